//! Synthetic test clouds and reproducible misalignment.
//!
//! Everything here is seeded: the same inputs always produce bitwise the
//! same clouds, so experiments and regression tests can be replayed.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, Rotation3, Unit, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

/// Built-in shape generators, all roughly desk-scaled (about a meter across).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestShape {
    /// A gently modulated unit sphere: smooth, featureless at small scales.
    SphereIsh,
    /// A floor and a wall meeting at an edge: flat regions, one sharp crease.
    TwoPlanes,
    /// An asymmetric blob with a head and two thin ears: features at several
    /// scales and no symmetries, so registration has a unique optimum.
    BunnyProxy,
}

impl TestShape {
    pub const ALL: [TestShape; 3] = [
        TestShape::SphereIsh,
        TestShape::TwoPlanes,
        TestShape::BunnyProxy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestShape::SphereIsh => "sphere-ish",
            TestShape::TwoPlanes => "two-planes",
            TestShape::BunnyProxy => "bunny-proxy",
        }
    }
}

impl fmt::Display for TestShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere-ish" => Ok(TestShape::SphereIsh),
            "two-planes" => Ok(TestShape::TwoPlanes),
            "bunny-proxy" => Ok(TestShape::BunnyProxy),
            other => Err(Error::InvalidArgument(format!(
                "unknown shape '{other}' (expected sphere-ish, two-planes or bunny-proxy)"
            ))),
        }
    }
}

/// Random unit vector (uniform over the sphere via normalized Gaussians).
fn random_direction(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v = Vector3::new(
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Generates `count` points of the requested shape.
///
/// At least 10 points are required so every shape keeps some structure.
pub fn make_test_shape(kind: TestShape, count: usize, seed: u64) -> Result<PointCloud> {
    if count < 10 {
        return Err(Error::InvalidArgument(format!(
            "a test shape needs at least 10 points, got {count}"
        )));
    }
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let points = match kind {
        TestShape::SphereIsh => sphere_ish(count, &mut rng),
        TestShape::TwoPlanes => two_planes(count, &mut rng),
        TestShape::BunnyProxy => bunny_proxy(count, &mut rng),
    };
    PointCloud::from_points(points)
}

fn sphere_ish(count: usize, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    (0..count)
        .map(|_| {
            let d = random_direction(rng);
            // Smooth angular modulation keeps the radius within [0.92, 1.08].
            let radius = 1.0 + 0.08 * (3.0 * d.z).sin() * (2.0 * d.x.atan2(d.y)).cos();
            Point3::from(d * radius)
        })
        .collect()
}

fn two_planes(count: usize, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                // Floor: z = 0.
                Point3::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), 0.0)
            } else {
                // Wall: y = 1.
                Point3::new(rng.gen_range(-1.0..=1.0), 1.0, rng.gen_range(0.0..=1.0))
            }
        })
        .collect()
}

/// Point on the surface of an axis-aligned ellipsoid.
fn ellipsoid_point(
    rng: &mut ChaCha8Rng,
    center: Vector3<f64>,
    semi_axes: Vector3<f64>,
) -> Point3<f64> {
    let d = random_direction(rng);
    Point3::from(center + d.component_mul(&semi_axes))
}

fn bunny_proxy(count: usize, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    // Component budgets: 15% head, 7.5% per ear, the rest is body.
    let head = count * 3 / 20;
    let ear = count * 3 / 40;
    let body = count - head - 2 * ear;
    let mut points = Vec::with_capacity(count);
    for _ in 0..body {
        points.push(ellipsoid_point(
            rng,
            Vector3::zeros(),
            Vector3::new(0.6, 0.45, 0.5),
        ));
    }
    for _ in 0..head {
        points.push(ellipsoid_point(
            rng,
            Vector3::new(0.45, 0.0, 0.45),
            Vector3::new(0.25, 0.25, 0.25),
        ));
    }
    for side in [-1.0, 1.0] {
        for _ in 0..ear {
            points.push(ellipsoid_point(
                rng,
                Vector3::new(0.5, side * 0.12, 0.85),
                Vector3::new(0.06, 0.06, 0.22),
            ));
        }
    }
    points
}

/// How to perturb a reference cloud into a source cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisalignSpec {
    /// Rotation by exactly this angle (degrees) about a random axis through
    /// the cloud centroid.
    pub rotation_angle_deg: f64,
    /// Translation by exactly this distance along a random direction.
    pub translation_distance: f64,
    /// Standard deviation of per-coordinate Gaussian noise, added after the
    /// rigid motion. Zero means none.
    pub noise_sigma: f64,
    /// Seed for axis, direction, noise and subsampling draws.
    pub seed: u64,
    /// Optionally keep only this many points of the perturbed cloud.
    pub subsample_to: Option<usize>,
}

impl MisalignSpec {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rotation_angle_deg", self.rotation_angle_deg),
            ("translation_distance", self.translation_distance),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Keeps `keep` points chosen uniformly without replacement, in their
/// original order.
pub fn subsample(cloud: &PointCloud, keep: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    if keep == 0 || keep > cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {keep} of {} points",
            cloud.len()
        )));
    }
    if keep == cloud.len() {
        return Ok(cloud.clone());
    }
    let mut indices = rand::seq::index::sample(rng, cloud.len(), keep).into_vec();
    indices.sort_unstable();
    let points = indices.iter().map(|&i| cloud.points()[i]).collect();
    PointCloud::from_points(points)
}

/// Applies a random rigid misalignment (plus optional noise and subsampling)
/// to `reference` and returns the perturbed cloud together with the rigid
/// motion that maps it back onto `reference`.
///
/// The rotation angle and translation distance are honored exactly; only the
/// axis and direction are random. The rotation pivots about the centroid of
/// `reference`, so moderate angles do not fling the cloud far away. With
/// noise or subsampling the returned motion is the ground truth of the
/// underlying rigid part only.
pub fn random_misalign(
    reference: &PointCloud,
    spec: &MisalignSpec,
) -> Result<(PointCloud, RigidTransform)> {
    spec.validate()?;
    let centroid = reference.centroid()?;
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(spec.seed);

    let axis = random_direction(&mut rng);
    let angle = spec.rotation_angle_deg.to_radians();
    let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner();
    let direction = random_direction(&mut rng);
    let translation = centroid - rotation * centroid + direction * spec.translation_distance;
    let misalign = RigidTransform {
        rotation,
        translation,
    };

    let mut points: Vec<Point3<f64>> = reference
        .points()
        .iter()
        .map(|p| misalign.transform_point(p))
        .collect();
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| {
            Error::InvalidArgument(format!("invalid noise sigma: {e}"))
        })?;
        for p in &mut points {
            p.x += noise.sample(&mut rng);
            p.y += noise.sample(&mut rng);
            p.z += noise.sample(&mut rng);
        }
    }
    let mut source = PointCloud::from_points(points)?;
    if let Some(keep) = spec.subsample_to {
        source = subsample(&source, keep, &mut rng)?;
    }
    Ok((source, misalign.inverse()))
}
