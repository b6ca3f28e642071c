//! Shared fixtures for the registration benchmarks.

use aa_icp::{make_test_shape, random_misalign, MisalignSpec, PointCloud, TestShape};

/// A reference cloud and a 10-degree-rotated copy of it, the standard
/// benchmark workload.
pub fn misaligned_pair(points: usize, seed: u64) -> (PointCloud, PointCloud) {
    let reference = make_test_shape(TestShape::BunnyProxy, points, seed)
        .expect("benchmark shape generation cannot fail");
    let spec = MisalignSpec {
        rotation_angle_deg: 10.0,
        translation_distance: 0.02,
        noise_sigma: 0.0,
        seed: seed.wrapping_add(1),
        subsample_to: None,
    };
    let (source, _) = random_misalign(&reference, &spec).expect("misalignment cannot fail");
    (source, reference)
}
