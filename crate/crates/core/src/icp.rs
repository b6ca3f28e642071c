//! One ICP step as a fixed-point map on pose space.
//!
//! `icp_step` evaluates the map `G`: transform the source cloud by the
//! current pose, match every point to its nearest reference neighbor,
//! estimate the best rigid increment in closed form, and left-compose it
//! onto the pose. Registering is then just iterating `u <- G(u)` until the
//! mean correspondence distance stops changing; `run_picard` does exactly
//! that, and the accelerated driver reuses the same pieces.

use std::time::Duration;

use nalgebra::{Matrix3, Vector3};

use crate::aa_icp;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{
    apply_transform, compose, pose_to_transform, transform_to_pose, Pose6, RigidTransform,
};
use crate::kdtree::NeighborIndex;

/// Singular-value ratio below which the cross-covariance is treated as
/// rank-deficient (collinear or coincident correspondences).
const RANK_TOLERANCE: f64 = 1e-12;

/// One matched pair: indices into the source and reference clouds plus their
/// Euclidean distance at matching time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub reference: usize,
    pub distance: f64,
}

/// All pairs that survived the distance cutoff for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
}

/// Output of a single fixed-point evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpStepResult {
    /// The mapped pose `G(u)`.
    pub next_pose: Pose6,
    /// Mean correspondence distance measured at the *input* pose, before the
    /// increment is applied.
    pub error: f64,
    /// Number of pairs that entered the estimate.
    pub correspondence_count: usize,
}

/// Matches every source point to its nearest reference point.
///
/// With a cutoff, pairs farther than `max_distance` are dropped; if nothing
/// survives the result is a [`Error::NoOverlap`].
pub fn find_correspondences(
    source: &PointCloud,
    index: &NeighborIndex,
    max_distance: Option<f64>,
) -> Result<CorrespondenceSet> {
    if source.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot match an empty source cloud".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(source.len());
    for (i, p) in source.points().iter().enumerate() {
        let hit = index.nearest_one(p)?;
        if max_distance.is_none_or(|cutoff| hit.distance <= cutoff) {
            pairs.push(Correspondence {
                source: i,
                reference: hit.index,
                distance: hit.distance,
            });
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(CorrespondenceSet { pairs })
}

/// Mean Euclidean correspondence distance: the error value the convergence
/// protocol watches. Errors on an empty set.
pub fn mean_error(correspondences: &CorrespondenceSet) -> Result<f64> {
    if correspondences.pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "mean error of an empty correspondence set is undefined".into(),
        ));
    }
    let sum: f64 = correspondences.pairs.iter().map(|c| c.distance).sum();
    Ok(sum / correspondences.pairs.len() as f64)
}

/// Closed-form least-squares rigid motion mapping matched source points onto
/// their reference partners (covariance SVD with a determinant sign fix, no
/// scale estimation).
///
/// Needs at least three pairs spanning a non-collinear set; anything less
/// leaves the rotation underdetermined and errors with
/// [`Error::DegenerateGeometry`]. The result is always a proper rotation
/// (`det = +1`) even when the best unconstrained linear map would be a
/// reflection.
pub fn estimate_rigid_transform(
    source: &PointCloud,
    reference: &PointCloud,
    correspondences: &CorrespondenceSet,
) -> Result<RigidTransform> {
    let pairs = &correspondences.pairs;
    if pairs.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "{} correspondence(s), need at least 3",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mut source_centroid = Vector3::zeros();
    let mut reference_centroid = Vector3::zeros();
    for c in pairs {
        source_centroid += source.points()[c.source].coords;
        reference_centroid += reference.points()[c.reference].coords;
    }
    source_centroid /= n;
    reference_centroid /= n;

    let mut cross_covariance = Matrix3::zeros();
    for c in pairs {
        let s = source.points()[c.source].coords - source_centroid;
        let r = reference.points()[c.reference].coords - reference_centroid;
        cross_covariance += s * r.transpose();
    }

    let svd = cross_covariance.svd(true, true);
    let sv = svd.singular_values;
    // sv is sorted descending. A vanishing second value means the matched
    // points are (numerically) collinear and the rotation about that line is
    // free; a vanishing first value means they are coincident.
    if sv[0] == 0.0 || sv[1] <= RANK_TOLERANCE * sv[0] {
        return Err(Error::DegenerateGeometry(
            "matched points are collinear or coincident".into(),
        ));
    }
    let u = svd.u.expect("svd with vectors requested");
    let v_t = svd.v_t.expect("svd with vectors requested");
    let v = v_t.transpose();
    let sign = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign)) * u.transpose();
    let translation = reference_centroid - rotation * source_centroid;
    debug_assert!(
        (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max()
            < 1e-9
    );
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Evaluates the fixed-point map once.
///
/// `index` must have been built over `reference` (checked by length). The
/// reported error belongs to the input pose; the returned pose has the
/// freshly estimated increment composed on.
pub fn icp_step(
    source: &PointCloud,
    index: &NeighborIndex,
    reference: &PointCloud,
    pose: &Pose6,
    max_distance: Option<f64>,
) -> Result<IcpStepResult> {
    if index.len() != reference.len() {
        return Err(Error::InvalidArgument(
            "index size does not match the reference cloud".into(),
        ));
    }
    let transform = pose_to_transform(pose)?;
    let moved = apply_transform(&transform, source);
    let correspondences = find_correspondences(&moved, index, max_distance)?;
    let error = mean_error(&correspondences)?;
    let increment = estimate_rigid_transform(&moved, reference, &correspondences)?;
    let next_pose = transform_to_pose(&compose(&increment, &transform)).pose;
    Ok(IcpStepResult {
        next_pose,
        error,
        correspondence_count: correspondences.pairs.len(),
    })
}

/// A source/reference pair with its prebuilt index: the reusable closure
/// form of the fixed-point map.
pub struct IcpProblem<'a> {
    source: &'a PointCloud,
    reference: &'a PointCloud,
    index: NeighborIndex,
    max_distance: Option<f64>,
}

impl<'a> IcpProblem<'a> {
    /// Builds the reference index once so repeated steps stay cheap.
    pub fn new(source: &'a PointCloud, reference: &'a PointCloud) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::InvalidArgument("source cloud is empty".into()));
        }
        let index = NeighborIndex::build(reference)?;
        Ok(IcpProblem {
            source,
            reference,
            index,
            max_distance: None,
        })
    }

    /// Optional correspondence rejection distance (default: keep everything).
    pub fn with_max_distance(mut self, max_distance: Option<f64>) -> Result<Self> {
        if let Some(d) = max_distance {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidArgument(
                    "max correspondence distance must be finite and positive".into(),
                ));
            }
        }
        self.max_distance = max_distance;
        Ok(self)
    }

    /// One evaluation of the map at `pose`.
    pub fn step(&self, pose: &Pose6) -> Result<IcpStepResult> {
        icp_step(self.source, &self.index, self.reference, pose, self.max_distance)
    }

    pub fn source(&self) -> &PointCloud {
        self.source
    }

    pub fn reference(&self) -> &PointCloud {
        self.reference
    }
}

/// Stopping protocol shared by the plain and accelerated drivers.
///
/// Iteration `n` satisfies the criterion when the error changed by less than
/// `epsilon` from iteration `n - 1`. A run stops once the criterion holds
/// `confirm_iterations` times in a row, or on a single hit while
/// `n < early_exit_before`, or unconditionally at `max_iterations`
/// evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceConfig {
    /// Minimum error change still counted as progress.
    pub epsilon: f64,
    /// Hard cap on fixed-point evaluations.
    pub max_iterations: usize,
    /// Consecutive satisfactions required in the steady regime.
    pub confirm_iterations: usize,
    /// Below this iteration index a single satisfaction already stops.
    pub early_exit_before: usize,
    /// Optional correspondence rejection cutoff handed to each step.
    pub max_correspondence_distance: Option<f64>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            epsilon: 1e-3,
            max_iterations: 100,
            confirm_iterations: 2,
            early_exit_before: 4,
            max_correspondence_distance: None,
        }
    }
}

impl ConvergenceConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(
                "epsilon must be finite and positive".into(),
            ));
        }
        if self.confirm_iterations == 0 {
            return Err(Error::InvalidArgument(
                "confirm_iterations must be at least 1".into(),
            ));
        }
        if let Some(d) = self.max_correspondence_distance {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidArgument(
                    "max correspondence distance must be finite and positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Evaluates the stopping rule after recording `errors[n]`.
///
/// `errors` holds one entry per evaluation so far; `n` is the index of the
/// latest. Returns false for `n = 0` (no previous error to compare against).
pub fn check_convergence(errors: &[f64], n: usize, cfg: &ConvergenceConfig) -> bool {
    let satisfied =
        |k: usize| k >= 1 && k < errors.len() && (errors[k] - errors[k - 1]).abs() < cfg.epsilon;
    if !satisfied(n) {
        return false;
    }
    if n < cfg.early_exit_before {
        return true;
    }
    (1..cfg.confirm_iterations).all(|j| n >= j && satisfied(n - j))
}

/// Everything one solver run produced.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Last iterate; what the caller should use as the registration result.
    pub final_pose: Pose6,
    /// Number of fixed-point evaluations (equals `errors.len()`).
    pub iterations: usize,
    /// `errors[k]` is the mean correspondence distance at iterate `k`.
    pub errors: Vec<f64>,
    /// Iterate sequence `u^0 ..= final_pose`.
    pub poses: Vec<Pose6>,
    /// How often the history-reset safeguard fired (always 0 for Picard).
    pub reset_count: usize,
    /// True when the stopping rule fired before the iteration cap.
    pub converged: bool,
    pub wall_time: Duration,
}

impl RunRecord {
    /// Error at the last evaluated iterate, if any evaluation happened.
    pub fn final_error(&self) -> Option<f64> {
        self.errors.last().copied()
    }
}

/// Plain fixed-point (Picard) registration: `u <- G(u)` under the shared
/// stopping protocol. `max_iterations = 0` returns `u0` untouched.
pub fn run_picard(
    source: &PointCloud,
    reference: &PointCloud,
    u0: &Pose6,
    cfg: &ConvergenceConfig,
) -> Result<RunRecord> {
    cfg.validate()?;
    let problem = IcpProblem::new(source, reference)?
        .with_max_distance(cfg.max_correspondence_distance)?;
    aa_icp::run_fixed_point(&problem, u0, cfg, None)
}
