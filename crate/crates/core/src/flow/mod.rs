//! Geodesic flow on the unit tangent bundle.
//!
//! A state is a base point in the disk chart and the angle `θ` of the unit
//! vector measured in the conformal frame, so the chart of `SM` is
//! `(u, v, θ)`. With `σ` the log conformal factor the orthonormal frame is
//!
//! ```text
//! X   = e^{−σ}(cos θ, sin θ, σ_v cos θ − σ_u sin θ)
//! X_⊥ = [X, V] = e^{−σ}(sin θ, −cos θ, σ_v sin θ + σ_u cos θ)
//! V   = ∂_θ
//! ```
//!
//! Orbits are integrated with classical RK4 and pushed back into the
//! fundamental domain after every step.

mod stepper;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{octagon, DiskPoint, Isometry, SurfaceModel};
use crate::riccati;

pub(crate) use stepper::{rk4_extras, step_count, Orbit, Stage};

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitTangentState {
    pub base: DiskPoint,
    pub theta: f64,
}

impl UnitTangentState {
    pub fn new(u: f64, v: f64, theta: f64) -> Result<Self> {
        Ok(Self {
            base: DiskPoint::new(u, v)?,
            theta,
        })
    }

    pub(crate) fn from_chart(z: Complex64, theta: f64) -> Result<Self> {
        Ok(Self {
            base: DiskPoint::from_c(z)?,
            theta,
        })
    }

    pub fn z(&self) -> Complex64 {
        self.base.to_c()
    }

    /// Image under an isometry; the angle turns by `arg g'(z)`.
    pub fn transformed(&self, g: &Isometry) -> Result<Self> {
        let z = self.z();
        Self::from_chart(g.apply_c(z), self.theta + g.derivative(z).arg())
    }

    /// Representative with base point in the fundamental domain.
    pub fn reduced(&self) -> Result<Self> {
        let (z, dtheta) = octagon().reduce_fast(self.z(), |_| {})?;
        Self::from_chart(z, (self.theta + dtheta).rem_euclid(std::f64::consts::TAU))
    }

    pub fn chart(&self) -> [f64; 3] {
        [self.base.u, self.base.v, self.theta]
    }

    /// Chart displacement `self + s·w`, without reduction.
    pub fn displaced(&self, w: &[f64; 3], s: f64) -> Result<Self> {
        Self::new(self.base.u + s * w[0], self.base.v + s * w[1], self.theta + s * w[2])
    }
}

/// Coefficients in the orthonormal frame `(X, X_⊥, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameVector {
    #[serde(rename = "aX")]
    pub x: f64,
    #[serde(rename = "aPerp")]
    pub perp: f64,
    #[serde(rename = "aVrot")]
    pub vrot: f64,
}

impl FrameVector {
    pub fn new(x: f64, perp: f64, vrot: f64) -> Self {
        Self { x, perp, vrot }
    }

    /// Sasaki norm, by orthonormality of the frame.
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.perp * self.perp + self.vrot * self.vrot).sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(c * self.x, c * self.perp, c * self.vrot)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.x - o.x, self.perp - o.perp, self.vrot - o.vrot)
    }
}

/// The frame at one state, as chart vectors on `(u, v, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x: [f64; 3],
    pub perp: [f64; 3],
    pub vrot: [f64; 3],
    sigma: f64,
    sigma_u: f64,
    sigma_v: f64,
}

impl Frame {
    /// Sasaki inner product `e^{2σ}(du du' + dv dv') + κ κ'`, where
    /// `κ = dθ + σ_u dv − σ_v du` is the connection form.
    pub fn sasaki_inner(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let e2 = (2.0 * self.sigma).exp();
        let ka = a[2] + self.sigma_u * a[1] - self.sigma_v * a[0];
        let kb = b[2] + self.sigma_u * b[1] - self.sigma_v * b[0];
        e2 * (a[0] * b[0] + a[1] * b[1]) + ka * kb
    }

    pub fn coefficients(&self, w: &[f64; 3]) -> FrameVector {
        FrameVector::new(
            self.sasaki_inner(w, &self.x),
            self.sasaki_inner(w, &self.perp),
            self.sasaki_inner(w, &self.vrot),
        )
    }

    pub fn to_chart(&self, w: &FrameVector) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = w.x * self.x[i] + w.perp * self.perp[i] + w.vrot * self.vrot[i];
        }
        out
    }
}

pub(crate) fn frame_from_sigma(sigma: &crate::jet::Jet2, theta: f64) -> Frame {
    let l = (-sigma.v).exp();
    let (s, c) = theta.sin_cos();
    Frame {
        x: [l * c, l * s, l * (sigma.dv * c - sigma.du * s)],
        perp: [l * s, -l * c, l * (sigma.dv * s + sigma.du * c)],
        vrot: [0.0, 0.0, 1.0],
        sigma: sigma.v,
        sigma_u: sigma.du,
        sigma_v: sigma.dv,
    }
}

pub fn frame_at(model: &SurfaceModel, s: &UnitTangentState) -> Result<Frame> {
    let sigma = model.sigma_jet(s.z())?;
    Ok(frame_from_sigma(&sigma, s.theta))
}

fn run<'a>(model: &'a SurfaceModel, s: &UnitTangentState, t: f64, step: f64, tracked: bool) -> Result<(Orbit<'a>, usize, f64)> {
    let n = step_count(t, step)?;
    let mut orbit = Orbit::new(model, s.z(), s.theta);
    if tracked {
        orbit = orbit.tracked();
    }
    let h = if n == 0 { 0.0 } else { t / n as f64 };
    Ok((orbit, n, h))
}

/// `φ_t(s)`, reduced to the fundamental domain.
pub fn flow(model: &SurfaceModel, s: &UnitTangentState, t: f64, step: f64) -> Result<UnitTangentState> {
    if t == 0.0 {
        step_count(t, step)?;
        return Ok(*s);
    }
    let (mut orbit, n, h) = run(model, s, t, step, false)?;
    for _ in 0..n {
        orbit.step(h)?;
    }
    UnitTangentState::from_chart(orbit.z, orbit.theta)
}

/// `φ_t(s)` together with the deck transformation `g` such that `g·φ_t(s)` is
/// the endpoint of the unreduced lift starting at `s`.
pub fn flow_tracked(model: &SurfaceModel, s: &UnitTangentState, t: f64, step: f64) -> Result<(UnitTangentState, Isometry)> {
    let (mut orbit, n, h) = run(model, s, t, step, true)?;
    for _ in 0..n {
        orbit.step(h)?;
    }
    let m = orbit.lift.unwrap();
    Ok((
        UnitTangentState::from_chart(orbit.z, orbit.theta)?,
        Isometry {
            a: m[0],
            b: m[1],
            c: m[2],
            d: m[3],
            word: Vec::new(),
        },
    ))
}

/// Jacobi-equation drift `(y, ẏ)' = (ẏ, −K y)` at a stage.
#[inline]
pub(crate) fn jacobi_rate(st: &Stage, x: &[f64; 2], dx: &mut [f64; 2]) {
    dx[0] = x[1];
    dx[1] = -st.curvature() * x[0];
}

/// `dφ_t(s)·w` in the frame at `φ_t(s)`. Writing the transverse part as
/// `−y X_⊥ + ẏ V`, the pair `(y, ẏ)` solves the Jacobi equation along the orbit
/// and the `X` coefficient is carried unchanged.
pub fn tangent_map(model: &SurfaceModel, s: &UnitTangentState, t: f64, w: &FrameVector, step: f64) -> Result<FrameVector> {
    let (mut orbit, n, h) = run(model, s, t, step, false)?;
    let mut x = [-w.perp, w.vrot];
    for _ in 0..n {
        let stages = orbit.step(h)?;
        rk4_extras(&stages, h, &mut x, jacobi_rate);
    }
    Ok(FrameVector::new(w.x, -x[0], x[1]))
}

/// Scalar function on `SM` evaluated along orbits.
#[derive(Clone)]
pub enum Observable {
    One,
    /// Gauss curvature of the base point.
    Curvature,
    /// The Hopf function `r_-`, carried along orbits by its Riccati equation.
    RMinus,
    Custom(Arc<dyn Fn(&UnitTangentState) -> f64 + Send + Sync>),
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::One => write!(f, "One"),
            Observable::Curvature => write!(f, "Curvature"),
            Observable::RMinus => write!(f, "RMinus"),
            Observable::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Observable {
    pub fn custom(f: impl Fn(&UnitTangentState) -> f64 + Send + Sync + 'static) -> Self {
        Observable::Custom(Arc::new(f))
    }

    pub fn id(&self) -> &'static str {
        match self {
            Observable::One => "one",
            Observable::Curvature => "K",
            Observable::RMinus => "r_minus",
            Observable::Custom(_) => "custom",
        }
    }
}

/// Tolerance of the Hopf limit that seeds Riccati transport along orbits.
pub(crate) const SEED_TOL: f64 = 1e-8;

/// Integrand value at a stage; `r` is the transported `r_-` when tracked.
#[inline]
fn observe(psi: &Observable, st: &Stage, r: f64) -> f64 {
    match psi {
        Observable::One => 1.0,
        Observable::Curvature => st.curvature(),
        Observable::RMinus => r,
        Observable::Custom(f) => match UnitTangentState::from_chart(st.z, st.theta) {
            Ok(s) => f(&s),
            Err(_) => f64::NAN,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffValue {
    pub value: f64,
    /// Richardson estimate `|I(h) − I(2h)| / 15`.
    pub error: f64,
}

fn birkhoff_once(model: &SurfaceModel, s: &UnitTangentState, psi: &Observable, t: f64, step: f64, r0: f64) -> Result<f64> {
    let (mut orbit, n, h) = run(model, s, t, step, false)?;
    // x = (r_-, ∫ψ)
    let mut x = [r0, 0.0];
    for _ in 0..n {
        let stages = orbit.step(h)?;
        rk4_extras(&stages, h, &mut x, |st, x, dx| {
            dx[0] = -x[0] * x[0] - st.curvature();
            dx[1] = observe(psi, st, x[0]);
        });
    }
    if !x[1].is_finite() {
        return Err(LabError::Integration("observable not finite along the orbit".into()));
    }
    Ok(x[1])
}

/// `∫_0^t ψ(φ_s(z)) ds` by the RK4 quadrature that rides on the flow steps.
pub fn birkhoff(model: &SurfaceModel, s: &UnitTangentState, psi: &Observable, t: f64, step: f64) -> Result<BirkhoffValue> {
    step_count(t, step)?;
    if let Observable::One = psi {
        return Ok(BirkhoffValue { value: t, error: 0.0 });
    }
    if matches!(psi, Observable::RMinus) && t < 0.0 {
        // r_- is transported stably only forward in time.
        let back = flow(model, s, t, step)?;
        let r0 = riccati::hopf_minus(model, &back, SEED_TOL)?.value;
        let fine = birkhoff_once(model, &back, psi, -t, step, r0)?;
        let coarse = birkhoff_once(model, &back, psi, -t, 2.0 * step, r0)?;
        return Ok(BirkhoffValue {
            value: -fine,
            error: (fine - coarse).abs() / 15.0,
        });
    }
    let r0 = if matches!(psi, Observable::RMinus) {
        riccati::hopf_minus(model, s, SEED_TOL)?.value
    } else {
        1.0
    };
    let fine = birkhoff_once(model, s, psi, t, step, r0)?;
    let coarse = birkhoff_once(model, s, psi, t, 2.0 * step, r0)?;
    Ok(BirkhoffValue {
        value: fine,
        error: (fine - coarse).abs() / 15.0,
    })
}

/// Sampled orbit segment with running integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<UnitTangentState>,
    /// Observable id to `∫_0^t ψ∘φ_s ds` at each sample time.
    pub integrals: BTreeMap<String, Vec<f64>>,
    /// `(μ_min(z,T), μ_max(z,T))`: extremes of `(1/t)∫_0^t r_-` over `t ∈ [T/2, T]`.
    pub finite_rates: (f64, f64),
}

impl TrajectoryRecord {
    /// CSV with columns `t,u,v,theta,int_rminus,int_V`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u,v,theta,int_rminus,int_V\n");
        let zeros = vec![0.0; self.times.len()];
        let ir = self.integrals.get("r_minus").unwrap_or(&zeros);
        let iv = self.integrals.get("V").unwrap_or(&zeros);
        for i in 0..self.times.len() {
            let s = &self.states[i];
            out.push_str(&format!(
                "{:.12e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}\n",
                self.times[i], s.base.u, s.base.v, s.theta, ir[i], iv[i]
            ));
        }
        out
    }
}

/// Integrate `t > 0` time units from `s`, sampling every `sample_every` steps.
/// Always accumulates `∫ r_-`; also `∫ V` when a potential is given.
pub fn trajectory(
    model: &SurfaceModel,
    s: &UnitTangentState,
    t: f64,
    step: f64,
    sample_every: usize,
    potential: Option<&Observable>,
) -> Result<TrajectoryRecord> {
    if !(t > 0.0) || sample_every == 0 {
        return Err(LabError::InvalidArgument("trajectory needs t > 0 and sample_every ≥ 1".into()));
    }
    let (mut orbit, n, h) = run(model, s, t, step, false)?;
    let r0 = riccati::hopf_minus(model, s, SEED_TOL)?.value;
    let mut x = [r0, 0.0, 0.0];
    let mut times = vec![0.0];
    let mut states = vec![*s];
    let mut ir = vec![0.0];
    let mut iv = vec![0.0];
    let pot = potential.cloned().unwrap_or(Observable::Custom(Arc::new(|_| 0.0)));
    for k in 1..=n {
        let stages = orbit.step(h)?;
        rk4_extras(&stages, h, &mut x, |st, x, dx| {
            dx[0] = -x[0] * x[0] - st.curvature();
            dx[1] = x[0];
            dx[2] = observe(&pot, st, x[0]);
        });
        if k % sample_every == 0 || k == n {
            times.push(k as f64 * h);
            states.push(UnitTangentState::from_chart(orbit.z, orbit.theta)?);
            ir.push(x[1]);
            iv.push(x[2]);
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, &tt) in times.iter().enumerate() {
        if tt >= 0.5 * t - 1e-12 && tt > 0.0 {
            let avg = ir[i] / tt;
            lo = lo.min(avg);
            hi = hi.max(avg);
        }
    }
    let mut integrals = BTreeMap::new();
    integrals.insert("r_minus".to_string(), ir);
    if potential.is_some() {
        integrals.insert("V".to_string(), iv);
    }
    Ok(TrajectoryRecord {
        times,
        states,
        integrals,
        finite_rates: (lo, hi),
    })
}

/// Smallest chart distance between `a` and the Γ-translates of `b` by the
/// identity and the corona, with angles compared mod 2π.
pub fn state_distance(a: &UnitTangentState, b: &UnitTangentState) -> f64 {
    let d = |x: &UnitTangentState| {
        let dt = (a.theta - x.theta + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        ((a.base.u - x.base.u).powi(2) + (a.base.v - x.base.v).powi(2) + dt * dt).sqrt()
    };
    let mut best = d(b);
    for g in octagon().corona() {
        if let Ok(tb) = b.transformed(g) {
            best = best.min(d(&tb));
        }
    }
    best
}
