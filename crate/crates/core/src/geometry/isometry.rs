use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DiskPoint;
use crate::error::Result;

/// One letter of a group word: generator index with exponent ±1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    pub generator: u8,
    pub exponent: i8,
}

impl Letter {
    pub fn inverse(self) -> Self {
        Self {
            generator: self.generator,
            exponent: -self.exponent,
        }
    }
}

/// Orientation-preserving isometry of the disk, stored as a real `SL(2,R)`
/// matrix acting on the upper half-plane and conjugated to the disk by the
/// Cayley transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub word: Vec<Letter>,
}

/// Concatenate two words, cancelling adjacent inverse letters.
pub fn reduce_concat(left: &[Letter], right: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = left.to_vec();
    for &l in right {
        match out.last() {
            Some(&last) if last == l.inverse() => {
                out.pop();
            }
            _ => out.push(l),
        }
    }
    out
}

impl Isometry {
    pub fn identity() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
            word: Vec::new(),
        }
    }

    /// Build from the `SU(1,1)` form `z ↦ (αz + β)/(β̄z + ᾱ)`.
    pub fn from_disk(alpha: Complex64, beta: Complex64, word: Vec<Letter>) -> Self {
        Self {
            a: alpha.re + beta.re,
            b: alpha.im - beta.im,
            c: -alpha.im - beta.im,
            d: alpha.re - beta.re,
            word,
        }
    }

    /// Rotation about the origin by `angle`.
    pub fn rotation(angle: f64) -> Self {
        Self::from_disk(Complex64::from_polar(1.0, angle / 2.0), Complex64::new(0.0, 0.0), Vec::new())
    }

    /// Translation of hyperbolic length `length` along the diameter at angle `direction`.
    pub fn translation(length: f64, direction: f64) -> Self {
        Self::from_disk(
            Complex64::new((length / 2.0).cosh(), 0.0),
            Complex64::from_polar((length / 2.0).sinh(), direction),
            Vec::new(),
        )
    }

    pub fn disk_coefficients(&self) -> (Complex64, Complex64) {
        (
            Complex64::new((self.a + self.d) / 2.0, (self.b - self.c) / 2.0),
            Complex64::new((self.a - self.d) / 2.0, -(self.b + self.c) / 2.0),
        )
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// `cosh d(0, g·0)`.
    pub fn cosh_displacement(&self) -> f64 {
        0.5 * (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d)
    }

    /// Translation length `2 arccosh(|tr|/2)`; zero for elliptic or parabolic elements.
    pub fn translation_length(&self) -> f64 {
        let t = self.trace().abs() / 2.0;
        if t <= 1.0 {
            0.0
        } else {
            2.0 * t.acosh()
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Isometry) -> Isometry {
        Isometry {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
            word: reduce_concat(&self.word, &other.word),
        }
    }

    pub fn inverse(&self) -> Isometry {
        Isometry {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
            word: self.word.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    /// Möbius action on a complex disk coordinate, without validation.
    pub fn apply_c(&self, z: Complex64) -> Complex64 {
        let (alpha, beta) = self.disk_coefficients();
        (alpha * z + beta) / (beta.conj() * z + alpha.conj())
    }

    /// Complex derivative of the disk action at `z`.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let (alpha, beta) = self.disk_coefficients();
        let den = beta.conj() * z + alpha.conj();
        1.0 / (den * den)
    }

    pub fn apply(&self, z: &DiskPoint) -> Result<DiskPoint> {
        DiskPoint::check(z.u, z.v)?;
        let w = self.apply_c(z.to_c());
        DiskPoint::new(w.re, w.im)
    }

    /// Same matrix up to sign (PSL identification), entrywise within `tol`.
    pub fn approx_eq(&self, other: &Isometry, tol: f64) -> bool {
        let same = (self.a - other.a).abs() <= tol
            && (self.b - other.b).abs() <= tol
            && (self.c - other.c).abs() <= tol
            && (self.d - other.d).abs() <= tol;
        let flipped = (self.a + other.a).abs() <= tol
            && (self.b + other.b).abs() <= tol
            && (self.c + other.c).abs() <= tol
            && (self.d + other.d).abs() <= tol;
        same || flipped
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&Isometry::identity(), tol)
    }
}
