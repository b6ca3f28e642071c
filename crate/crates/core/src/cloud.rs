//! The point-cloud container used by every other module.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// An ordered set of 3-D points.
///
/// Coordinates are always finite; constructors that accept outside data check
/// this. Point order is meaningful (correspondences and file round-trips are
/// index-based), so nothing here ever reorders the points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    /// Builds a cloud from outside data, rejecting non-finite coordinates.
    pub fn from_points(points: Vec<Point3<f64>>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.coords.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        Ok(PointCloud { points })
    }

    /// Internal constructor for points that are finite by construction
    /// (transforms of valid clouds, generated shapes, ...).
    pub(crate) fn from_points_unchecked(points: Vec<Point3<f64>>) -> Self {
        debug_assert!(points.iter().all(|p| p.coords.iter().all(|c| c.is_finite())));
        PointCloud { points }
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Arithmetic mean of the points. Errors on an empty cloud.
    pub fn centroid(&self) -> Result<Vector3<f64>> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument(
                "centroid of an empty cloud is undefined".into(),
            ));
        }
        let sum: Vector3<f64> = self.points.iter().map(|p| p.coords).sum();
        Ok(sum / self.points.len() as f64)
    }

    /// Largest distance from the centroid to any point: a scale estimate
    /// that is robust to where the cloud sits in space.
    pub fn bounding_radius(&self) -> Result<f64> {
        let c = self.centroid()?;
        Ok(self
            .points
            .iter()
            .map(|p| (p.coords - c).norm())
            .fold(0.0, f64::max))
    }
}
