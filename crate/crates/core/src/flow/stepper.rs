use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::geometry::{curvature_from_sigma, octagon, SurfaceModel};
use crate::jet::Jet2;

/// One evaluation point of a Runge-Kutta step: chart state plus metric jet.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stage {
    pub z: Complex64,
    pub theta: f64,
    pub sigma: Jet2,
}

impl Stage {
    pub fn new(model: &SurfaceModel, z: Complex64, theta: f64) -> Result<Self> {
        if !(z.norm_sqr() < 1.0) || !theta.is_finite() {
            return Err(LabError::Integration(format!("state left the disk at |z| = {}", z.norm())));
        }
        Ok(Self {
            z,
            theta,
            sigma: model.sigma_jet(z)?,
        })
    }

    /// Geodesic vector field `X = e^{−σ}(cos θ, sin θ, σ_v cos θ − σ_u sin θ)`.
    #[inline]
    pub fn rhs(&self) -> [f64; 3] {
        let l = (-self.sigma.v).exp();
        let (s, c) = self.theta.sin_cos();
        [l * c, l * s, l * (self.sigma.dv * c - self.sigma.du * s)]
    }

    #[inline]
    pub fn curvature(&self) -> f64 {
        curvature_from_sigma(&self.sigma)
    }
}

/// Classical RK4 step of the geodesic equation in the chart, no reduction.
pub(crate) fn rk4(model: &SurfaceModel, z: Complex64, theta: f64, h: f64) -> Result<(Complex64, f64, [Stage; 4])> {
    let s1 = Stage::new(model, z, theta)?;
    let k1 = s1.rhs();
    let s2 = Stage::new(model, z + Complex64::new(k1[0], k1[1]) * (h / 2.0), theta + k1[2] * h / 2.0)?;
    let k2 = s2.rhs();
    let s3 = Stage::new(model, z + Complex64::new(k2[0], k2[1]) * (h / 2.0), theta + k2[2] * h / 2.0)?;
    let k3 = s3.rhs();
    let s4 = Stage::new(model, z + Complex64::new(k3[0], k3[1]) * h, theta + k3[2] * h)?;
    let k4 = s4.rhs();
    let w = h / 6.0;
    let dz = Complex64::new(
        k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0],
        k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1],
    ) * w;
    let dt = (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]) * w;
    let zn = z + dz;
    if !(zn.norm_sqr() < 1.0) {
        return Err(LabError::Integration(format!("step left the disk at |z| = {}", zn.norm())));
    }
    Ok((zn, theta + dt, [s1, s2, s3, s4]))
}

/// RK4 update of auxiliary quantities driven by the stages of a flow step.
/// `f(stage, x, dx)` writes the derivative of `x` at that stage.
#[inline]
pub(crate) fn rk4_extras<const N: usize>(
    stages: &[Stage; 4],
    h: f64,
    x: &mut [f64; N],
    mut f: impl FnMut(&Stage, &[f64; N], &mut [f64; N]),
) {
    let mut k1 = [0.0; N];
    let mut k2 = [0.0; N];
    let mut k3 = [0.0; N];
    let mut k4 = [0.0; N];
    let mut tmp = [0.0; N];
    f(&stages[0], x, &mut k1);
    for i in 0..N {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f(&stages[1], &tmp, &mut k2);
    for i in 0..N {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f(&stages[2], &tmp, &mut k3);
    for i in 0..N {
        tmp[i] = x[i] + h * k3[i];
    }
    f(&stages[3], &tmp, &mut k4);
    for i in 0..N {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// A trajectory being integrated, kept in the fundamental domain.
#[derive(Debug, Clone)]
pub(crate) struct Orbit<'a> {
    pub model: &'a SurfaceModel,
    pub z: Complex64,
    pub theta: f64,
    /// Cumulative deck transformation: the lifted state is `lift · (z, θ)`.
    pub lift: Option<[f64; 4]>,
}

impl<'a> Orbit<'a> {
    pub fn new(model: &'a SurfaceModel, z: Complex64, theta: f64) -> Self {
        Self {
            model,
            z,
            theta,
            lift: None,
        }
    }

    pub fn tracked(mut self) -> Self {
        self.lift = Some([1.0, 0.0, 0.0, 1.0]);
        self
    }

    /// Advance by `h`, then reduce into the fundamental domain.
    pub fn step(&mut self, h: f64) -> Result<[Stage; 4]> {
        let (z, theta, stages) = rk4(self.model, self.z, self.theta, h)?;
        let grp = octagon();
        let lift = &mut self.lift;
        let (zr, dtheta) = grp.reduce_fast(z, |j| {
            if let Some(m) = lift.as_mut() {
                let s = grp.side_matrix(j);
                *m = [
                    m[0] * s[0] + m[1] * s[2],
                    m[0] * s[1] + m[1] * s[3],
                    m[2] * s[0] + m[3] * s[2],
                    m[2] * s[1] + m[3] * s[3],
                ];
            }
        })?;
        self.z = zr;
        self.theta = (theta + dtheta).rem_euclid(std::f64::consts::TAU);
        Ok(stages)
    }
}

/// Number of equal steps covering `|t|` with at most `step` each.
pub(crate) fn step_count(t: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) || !t.is_finite() {
        return Err(LabError::InvalidArgument(format!("need step > 0 and finite t (step {step}, t {t})")));
    }
    let n = (t.abs() / step).ceil();
    if n > 1e7 {
        return Err(LabError::InvalidArgument(format!("|t|/step = {n:.3e} exceeds 1e7")));
    }
    Ok(n as usize)
}
