//! Poincaré-disk geometry of the genus-two surface built from the regular
//! hyperbolic octagon, together with its conformal perturbations.

mod group;
mod isometry;
mod surface;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub use group::{octagon, OctagonGroup, Reduction, CORONA_SIZE};
pub use isometry::{reduce_concat, Isometry, Letter};
pub use surface::{curvature_from_sigma, Bump, BumpField, ConformalJet, CurvatureRange, SurfaceModel, CURVATURE_LIMIT};

/// Inradius of the regular octagon with interior angles π/4.
pub fn inradius() -> f64 {
    (1.0 + std::f64::consts::SQRT_2).acosh()
}

/// Circumradius of the octagon: distance from the centre to a vertex.
pub fn circumradius() -> f64 {
    (3.0 + 2.0 * std::f64::consts::SQRT_2).acosh()
}

/// Length of the shortest closed geodesic on the surface.
pub fn systole() -> f64 {
    2.0 * inradius()
}

/// Euclidean coordinates of a point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub u: f64,
    pub v: f64,
}

impl DiskPoint {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        Self::check(u, v)?;
        Ok(Self { u, v })
    }

    pub(crate) fn check(u: f64, v: f64) -> Result<()> {
        let r2 = u * u + v * v;
        if !(r2 < 1.0) {
            return Err(LabError::Domain(r2.sqrt()));
        }
        Ok(())
    }

    pub fn origin() -> Self {
        Self { u: 0.0, v: 0.0 }
    }

    pub fn to_c(self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }

    pub fn from_c(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.u * self.u + self.v * self.v
    }

    pub fn distance(&self, other: &DiskPoint) -> f64 {
        distance_c(self.to_c(), other.to_c())
    }
}

/// Hyperbolic distance between two disk coordinates.
pub fn distance_c(z: Complex64, w: Complex64) -> f64 {
    let num = (z - w).norm();
    let den = (Complex64::new(1.0, 0.0) - w.conj() * z).norm();
    2.0 * (num / den).min(1.0).atanh()
}

/// Euclidean radius of the disk point at hyperbolic distance `d` from 0.
pub fn euclidean_radius(d: f64) -> f64 {
    (d / 2.0).tanh()
}
