//! Jacobi fields, finite-horizon Riccati solutions, Hopf limits and the
//! horocyclic fields `U_∓ = X_⊥ ∓ r_∓ V`.
//!
//! For a horizon `T` let `y_T` solve `ÿ + K y = 0` along the orbit with
//! `y_T(0) = 1, y_T(T) = 0`; then `r_T = ẏ_T(0)`. Writing `y_T = y₁ + r y₂` in
//! the fundamental system `y₁ = (1,0), y₂ = (0,1)` at time 0 gives
//! `r_T = −y₁(T)/y₂(T)`, which is what is computed. `r_- = lim r_{−T}` and
//! `r_+ = −lim r_T` as `T → +∞`.

use serde::{Deserialize, Serialize};

use crate::cache::StateKey;
use crate::error::{LabError, Result};
use crate::flow::{flow, frame_at, jacobi_rate, rk4_extras, step_count, FrameVector, Orbit, UnitTangentState};
use crate::geometry::SurfaceModel;

/// RK4 step for Jacobi integration inside Hopf limits.
pub const HOPF_STEP: f64 = 5e-3;
/// Largest horizon tried by the doubling search.
pub const HORIZON_CAP: f64 = 200.0;
/// Default tolerance of pointwise `r_±` evaluations.
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiState {
    pub y: f64,
    pub ydot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiValue {
    pub r_minus: f64,
    pub r_plus: f64,
    pub horizon_used: f64,
    pub error_estimate: f64,
}

/// One-sided Hopf limit with its convergence data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfLimit {
    pub value: f64,
    /// Horizon of the returned value.
    pub horizon: f64,
    /// `|r(T/2) − r(T)|` at the returned horizon.
    pub error: f64,
}

/// Integrate the Jacobi equation along the orbit of `s` for time `t`.
pub fn solve_jacobi(model: &SurfaceModel, s: &UnitTangentState, y0: f64, ydot0: f64, t: f64, step: f64) -> Result<JacobiState> {
    let n = step_count(t, step)?;
    let mut orbit = Orbit::new(model, s.z(), s.theta);
    let mut x = [y0, ydot0];
    if n > 0 {
        let h = t / n as f64;
        for _ in 0..n {
            let st = orbit.step(h)?;
            rk4_extras(&st, h, &mut x, jacobi_rate);
        }
    }
    Ok(JacobiState { y: x[0], ydot: x[1] })
}

/// Integrates the fundamental system `[y₁, ẏ₁, y₂, ẏ₂]` for time `t` and
/// reports `−y₁/y₂` at every horizon in `checkpoints` (each a multiple of
/// `step` in absolute value, increasing).
fn riccati_at_horizons(
    model: &SurfaceModel,
    s: &UnitTangentState,
    sign: f64,
    checkpoints: &[f64],
    step: f64,
    mut visit: impl FnMut(f64, f64) -> bool,
) -> Result<()> {
    let mut orbit = Orbit::new(model, s.z(), s.theta);
    let mut x = [1.0, 0.0, 0.0, 1.0];
    let mut elapsed = 0.0;
    for &target in checkpoints {
        let n = step_count(target - elapsed, step)?;
        let h = sign * (target - elapsed) / n.max(1) as f64;
        for _ in 0..n {
            let st = orbit.step(h)?;
            rk4_extras(&st, h, &mut x, |st, x, dx| {
                let k = st.curvature();
                dx[0] = x[1];
                dx[1] = -k * x[0];
                dx[2] = x[3];
                dx[3] = -k * x[2];
            });
            let m = x.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if m > 1e100 {
                for v in &mut x {
                    *v /= m;
                }
            }
        }
        elapsed = target;
        if x[2] == 0.0 || !x[2].is_finite() {
            return Err(LabError::ConjugatePoint(sign * target));
        }
        if !visit(target, -x[0] / x[2]) {
            break;
        }
    }
    Ok(())
}

/// `r_T(0, s)` for a horizon `T ≠ 0` of either sign.
pub fn riccati_finite_horizon(model: &SurfaceModel, s: &UnitTangentState, horizon: f64, step: f64) -> Result<f64> {
    if horizon == 0.0 || !horizon.is_finite() {
        return Err(LabError::InvalidArgument("horizon must be finite and nonzero".into()));
    }
    let mut out = f64::NAN;
    riccati_at_horizons(model, s, horizon.signum(), &[horizon.abs()], step, |_, r| {
        out = r;
        true
    })?;
    Ok(out)
}

/// `r_{−T}(s)` at a fixed horizon, used wherever `r_-` is differentiated.
pub fn r_minus_at_horizon(model: &SurfaceModel, s: &UnitTangentState, horizon: f64) -> Result<f64> {
    riccati_finite_horizon(model, s, -horizon, HOPF_STEP)
}

/// `−r_T(s)` at a fixed horizon.
pub fn r_plus_at_horizon(model: &SurfaceModel, s: &UnitTangentState, horizon: f64) -> Result<f64> {
    Ok(-riccati_finite_horizon(model, s, horizon, HOPF_STEP)?)
}

fn hopf_one_sided(model: &SurfaceModel, s: &UnitTangentState, tol: f64, sign: f64) -> Result<HopfLimit> {
    if !(tol > 0.0) {
        return Err(LabError::InvalidArgument("tolerance must be positive".into()));
    }
    let key = StateKey::new(s.base.u, s.base.v, s.theta, tol.to_bits() ^ (sign < 0.0) as u64);
    if let Some(v) = model.hopf_cache.get(&key) {
        return Ok(HopfLimit {
            value: v[0],
            horizon: v[1],
            error: v[2],
        });
    }
    let mut horizons = Vec::new();
    let mut t = 1.0;
    while t <= HORIZON_CAP {
        horizons.push(t);
        t *= 2.0;
    }
    let mut prev: Option<f64> = None;
    let mut found: Option<HopfLimit> = None;
    let mut last_gap = f64::INFINITY;
    riccati_at_horizons(model, s, sign, &horizons, HOPF_STEP, |t, r| {
        // r_{−T} for the past, −r_T for the future.
        let val = if sign < 0.0 { r } else { -r };
        if let Some(p) = prev {
            last_gap = (val - p).abs();
            if last_gap < tol {
                found = Some(HopfLimit {
                    value: val,
                    horizon: t,
                    error: last_gap,
                });
                return false;
            }
        }
        prev = Some(val);
        true
    })?;
    let limit = found.ok_or(LabError::Convergence {
        horizon: *horizons.last().unwrap(),
        gap: last_gap,
        tol,
    })?;
    model.hopf_cache.insert(key, [limit.value, limit.horizon, limit.error, 0.0]);
    Ok(limit)
}

/// `r_-(s) = lim r_{−T}(s)` by horizon doubling.
pub fn hopf_minus(model: &SurfaceModel, s: &UnitTangentState, tol: f64) -> Result<HopfLimit> {
    hopf_one_sided(model, s, tol, -1.0)
}

/// `r_+(s) = −lim r_T(s)` by horizon doubling.
pub fn hopf_plus(model: &SurfaceModel, s: &UnitTangentState, tol: f64) -> Result<HopfLimit> {
    hopf_one_sided(model, s, tol, 1.0)
}

pub fn hopf_r(model: &SurfaceModel, s: &UnitTangentState, tol: f64) -> Result<RiccatiValue> {
    let m = hopf_minus(model, s, tol)?;
    let p = hopf_plus(model, s, tol)?;
    Ok(RiccatiValue {
        r_minus: m.value,
        r_plus: p.value,
        horizon_used: m.horizon.max(p.horizon),
        error_estimate: m.error.max(p.error),
    })
}

/// `U_- = (0, 1, −r_-)` and `U_+ = (0, 1, r_+)` in the frame.
pub fn horocyclic_fields(model: &SurfaceModel, s: &UnitTangentState, tol: f64) -> Result<(FrameVector, FrameVector)> {
    let r = hopf_r(model, s, tol)?;
    Ok((FrameVector::new(0.0, 1.0, -r.r_minus), FrameVector::new(0.0, 1.0, r.r_plus)))
}

/// `U_-(s)` as a chart vector on `(u, v, θ)`.
pub fn u_minus_chart(model: &SurfaceModel, s: &UnitTangentState, r_minus: f64) -> Result<[f64; 3]> {
    let f = frame_at(model, s)?;
    Ok(f.to_chart(&FrameVector::new(0.0, 1.0, -r_minus)))
}

/// Horizon used for differentiated evaluations of `r_-` near `s`: the
/// converged horizon of the doubling search, and at least 8.
pub fn differentiation_horizon(model: &SurfaceModel, s: &UnitTangentState, tol: f64) -> Result<f64> {
    Ok(hopf_minus(model, s, tol)?.horizon.max(8.0))
}

/// Liouville divergences of `X`, `X_⊥` and `V` from the chart formula
/// `div Y = e^{−2σ} ∂_i(e^{2σ} Y^i)`, evaluated from the metric jet.
pub fn frame_divergences(model: &SurfaceModel, s: &UnitTangentState) -> Result<[f64; 3]> {
    let sg = model.sigma_jet(s.z())?;
    let (sn, cs) = s.theta.sin_cos();
    // e^{2σ}X = e^{σ}(cos, sin, σ_v cos − σ_u sin); divide the result by e^{σ}.
    let div_x = sg.du * cs + sg.dv * sn + (-sg.dv * sn - sg.du * cs);
    let div_perp = sg.du * sn - sg.dv * cs + (sg.dv * cs - sg.du * sn);
    let e = (-sg.v).exp();
    Ok([e * div_x, e * div_perp, 0.0])
}

/// `div(U_-) = div(X_⊥) − r_- div(V) − V(r_-)` with respect to the Liouville
/// measure; `V(r_-)` by a central difference of width `h` in `θ` at a fixed
/// horizon.
pub fn divergence_u_minus(model: &SurfaceModel, s: &UnitTangentState, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(LabError::InvalidArgument("h must be positive".into()));
    }
    let horizon = differentiation_horizon(model, s, DEFAULT_TOL)?;
    let r = r_minus_at_horizon(model, s, horizon)?;
    let rp = r_minus_at_horizon(model, &UnitTangentState { theta: s.theta + h, ..*s }, horizon)?;
    let rm = r_minus_at_horizon(model, &UnitTangentState { theta: s.theta - h, ..*s }, horizon)?;
    let [_, div_perp, div_v] = frame_divergences(model, s)?;
    Ok(div_perp - r * div_v - (rp - rm) / (2.0 * h))
}

/// `(|X r_- + r_-² + K|, |−X r_+ + r_+² + K|)` with `X` by a central
/// difference of width `h` along the flow, all at one fixed horizon.
pub fn riccati_residuals(model: &SurfaceModel, s: &UnitTangentState, tol: f64, h: f64) -> Result<(f64, f64)> {
    let hm = hopf_minus(model, s, tol)?.horizon.max(8.0);
    let hp = hopf_plus(model, s, tol)?.horizon.max(8.0);
    let fwd = flow(model, s, h, h)?;
    let bwd = flow(model, s, -h, h)?;
    let k = model.curvature_at(&s.base)?;
    let rm = r_minus_at_horizon(model, s, hm)?;
    let xrm = (r_minus_at_horizon(model, &fwd, hm)? - r_minus_at_horizon(model, &bwd, hm)?) / (2.0 * h);
    let rp = r_plus_at_horizon(model, s, hp)?;
    let xrp = (r_plus_at_horizon(model, &fwd, hp)? - r_plus_at_horizon(model, &bwd, hp)?) / (2.0 * h);
    Ok(((xrm + rm * rm + k).abs(), (-xrp + rp * rp + k).abs()))
}

/// Closed form of `r_-` when the curvature is the constant `−e^{−2c}`.
pub(crate) fn constant_curvature_r(model: &SurfaceModel) -> Option<f64> {
    model.is_constant_curvature().then(|| (-model.offset()).exp())
}

#[cfg(test)]
mod tests;
