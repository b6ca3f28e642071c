//! Point-cloud registration built around one idea: ICP is a fixed-point
//! iteration on the 6-D pose, so it can be accelerated like one.
//!
//! The crate provides
//!
//! * the classic pipeline — nearest-neighbor matching over a k-d tree,
//!   closed-form rigid-motion estimation, and a pose update — packaged as a
//!   reusable fixed-point map ([`IcpProblem`]),
//! * a plain driver ([`run_picard`]) and an Anderson-accelerated driver
//!   ([`run_aa_icp`]) that share the stopping protocol, so their iteration
//!   counts compare fairly,
//! * the acceleration machinery itself ([`anderson`]) usable on any
//!   fixed-point map, not just registration,
//! * seeded synthetic shapes and misalignments ([`synth`]), ASCII PLY / XYZ
//!   I/O ([`io`]), and a paired benchmark harness with CSV output
//!   ([`harness`]).
//!
//! The accelerated driver guards every extrapolation: combination weights
//! are bounded and the newest image must keep positive weight, and an error
//! regression rolls the iteration back to the last trusted image. With the
//! acceleration window set to zero it degenerates to the plain driver,
//! reproducing its iterates bit for bit.
//!
//! # Example
//!
//! ```
//! use aa_icp::{
//!     make_test_shape, random_misalign, run_aa_icp, AaConfig, MisalignSpec, Pose6, TestShape,
//! };
//!
//! let reference = make_test_shape(TestShape::BunnyProxy, 500, 7).unwrap();
//! let spec = MisalignSpec {
//!     rotation_angle_deg: 10.0,
//!     translation_distance: 0.02,
//!     noise_sigma: 0.0,
//!     seed: 1,
//!     subsample_to: None,
//! };
//! let (source, _truth) = random_misalign(&reference, &spec).unwrap();
//! let record = run_aa_icp(&source, &reference, &Pose6::IDENTITY, &AaConfig::default()).unwrap();
//! assert!(record.converged);
//! ```

pub mod aa_icp;
pub mod anderson;
pub mod cloud;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod icp;
pub mod io;
pub mod kdtree;
pub mod synth;

pub use aa_icp::{alpha_within_limits, run_aa_icp, should_reset, AaConfig};
pub use anderson::{
    anderson_step, run_anderson_plain, run_picard_plain, solve_alpha, AaEntry, AaHistory,
    AlphaSolution, FixedPointTrace,
};
pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use geometry::{
    apply_transform, compose, nearest_rotation, pose_to_transform, transform_to_pose, wrap_angle,
    Pose6, PoseExtraction, RigidTransform,
};
pub use harness::{
    parse_csv, read_csv, render_csv, run_pair, run_sweep, summarize, write_csv, AxisSummary,
    ComparisonStats, RunMode, SweepAxis, SweepConfig, SweepResult, TrialRow, CSV_HEADER,
    EPSILON_AXIS_ROTATION_DEG,
};
pub use icp::{
    check_convergence, estimate_rigid_transform, find_correspondences, icp_step, mean_error,
    run_picard, ConvergenceConfig, Correspondence, CorrespondenceSet, IcpProblem, IcpStepResult,
    RunRecord,
};
pub use io::{load_cloud, write_cloud, CloudFormat};
pub use kdtree::{Neighbor, NeighborIndex, DEFAULT_LEAF_SIZE};
pub use synth::{make_test_shape, random_misalign, subsample, MisalignSpec, TestShape};
