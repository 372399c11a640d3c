//! Expansion rates of the unstable bundle, backward potential averages, the
//! length spectrum and pressure of the unperturbed surface, and the band
//! arithmetic built from them.

mod spectrum;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flow::{flow, rk4_extras, step_count, Orbit, UnitTangentState, SEED_TOL};
use crate::geometry::{circumradius, octagon, DiskPoint, SurfaceModel};
use crate::resolvent::PotentialSpec;
use crate::riccati::hopf_minus;

pub use spectrum::{
    closed_geodesics, default_lgrid, format_word, parse_word, pressure, ClosedGeodesic, LengthSpectrum, PressureEstimator, PressureFit,
    MAX_LENGTH,
};

/// RK4 step for ensemble integrations.
pub const ENSEMBLE_STEP: f64 = 1e-2;

/// A value with an error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl From<f64> for Estimate {
    fn from(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

/// `n` states drawn from the Liouville measure of the model (Riemannian area
/// on the base times Lebesgue measure on the fibre), by rejection sampling.
pub fn liouville_ensemble(model: &SurfaceModel, n: usize, seed: u64) -> Vec<UnitTangentState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rmax = (circumradius() / 2.0).tanh();
    let phi_sup = model.offset() + model.perturbation().iter().map(|b| b.amplitude.max(0.0)).sum::<f64>();
    let density_sup = (2.0 * phi_sup).exp() * 4.0 / (1.0 - rmax * rmax).powi(2);
    let grp = octagon();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u = rng.gen_range(-rmax..rmax);
        let v = rng.gen_range(-rmax..rmax);
        let r2 = u * u + v * v;
        let accept: f64 = rng.gen();
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        if r2 >= rmax * rmax || !grp.contains(num_complex::Complex64::new(u, v)) {
            continue;
        }
        let Ok(sigma) = model.sigma_jet(num_complex::Complex64::new(u, v)) else {
            continue;
        };
        if accept * density_sup <= (2.0 * sigma.v).exp() {
            out.push(UnitTangentState {
                base: DiskPoint { u, v },
                theta,
            });
        }
    }
    out
}

/// Cumulative integrals of `r_-` and of an optional potential, sampled every
/// `t / samples` time units along the forward orbit of `s`.
struct Running {
    r: Vec<f64>,
    v: Vec<f64>,
}

fn integrate_running(
    model: &SurfaceModel,
    s: &UnitTangentState,
    t: f64,
    step: f64,
    samples: usize,
    potential: Option<&PotentialSpec>,
) -> Result<Running> {
    let per = step_count(t / samples as f64, step)?.max(1);
    let h = t / (per * samples) as f64;
    let mut orbit = Orbit::new(model, s.z(), s.theta);
    let mut x = [hopf_minus(model, s, SEED_TOL)?.value, 0.0, 0.0];
    let mut r = Vec::with_capacity(samples + 1);
    let mut v = Vec::with_capacity(samples + 1);
    r.push(0.0);
    v.push(0.0);
    for _ in 0..samples {
        for _ in 0..per {
            let st = orbit.step(h)?;
            rk4_extras(&st, h, &mut x, |st, x, dx| {
                dx[0] = -x[0] * x[0] - st.curvature();
                dx[1] = x[0];
                dx[2] = potential.map_or(0.0, |p| p.at_stage(st, x[0]));
            });
        }
        r.push(x[1]);
        v.push(x[2]);
    }
    if !x.iter().all(|a| a.is_finite()) {
        return Err(LabError::Integration("non-finite Birkhoff integral".into()));
    }
    Ok(Running { r, v })
}

/// Extremes of window averages of `r_-` over aligned windows of one length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowExtremes {
    pub length: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mu_min: Estimate,
    pub mu_max: Estimate,
    pub horizon: f64,
    pub ensemble_size: usize,
    /// From the shortest window up to the full horizon.
    pub windows: Vec<WindowExtremes>,
    /// Window maxima nonincreasing and minima nondecreasing in the length.
    pub fekete_monotone: bool,
}

/// `μ_min` and `μ_max` as the extremes over a Liouville ensemble of
/// `(1/T)∫_0^T r_-∘φ_s ds`. The error bar is the change of each extreme
/// between windows of length `T/2` and `T`, plus the seeding tolerance.
pub fn expansion_rates(model: &SurfaceModel, ensemble_size: usize, t: f64, seed: u64, step: f64) -> Result<RateEstimate> {
    if !(t >= 10.0) || ensemble_size == 0 {
        return Err(LabError::InvalidArgument("expansion rates need T ≥ 10 and a nonempty ensemble".into()));
    }
    let levels = t.log2().floor() as u32;
    let samples = 1usize << levels;
    let states = liouville_ensemble(model, ensemble_size, seed);
    let runs: Vec<Running> = states
        .par_iter()
        .map(|s| integrate_running(model, s, t, step, samples, None))
        .collect::<Result<_>>()?;
    let mut windows = Vec::new();
    for k in 0..=levels {
        // windows of 2^k samples
        let w = 1usize << k;
        let len = t * w as f64 / samples as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for run in &runs {
            for j in (0..samples).step_by(w) {
                let avg = (run.r[j + w] - run.r[j]) / len;
                lo = lo.min(avg);
                hi = hi.max(avg);
            }
        }
        windows.push(WindowExtremes { length: len, min: lo, max: hi });
    }
    let slack = 1e-12;
    let fekete_monotone = windows
        .windows(2)
        .all(|p| p[1].max <= p[0].max + slack && p[1].min >= p[0].min - slack);
    let full = windows[windows.len() - 1];
    let half = windows[windows.len().saturating_sub(2)];
    Ok(RateEstimate {
        mu_min: Estimate {
            value: full.min,
            error: (full.min - half.min).abs() + SEED_TOL,
        },
        mu_max: Estimate {
            value: full.max,
            error: (full.max - half.max).abs() + SEED_TOL,
        },
        horizon: t,
        ensemble_size,
        windows,
        fekete_monotone,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VMaxReport {
    pub v_max: f64,
    /// Same supremum for `W = V − r_-`.
    pub w_max: f64,
    /// Infimum over the ensemble of the backward averages of `r_-`.
    pub mu_min: f64,
    /// `W_max ≤ V_max − μ_min + 0.02`.
    pub bound_holds: bool,
}

/// Ensemble supremum of the backward averages `(1/T)∫_{−T}^0 V∘φ_s ds`.
pub fn v_max(model: &SurfaceModel, potential: &PotentialSpec, ensemble_size: usize, t: f64, seed: u64, step: f64) -> Result<VMaxReport> {
    if !(t > 0.0) || ensemble_size == 0 {
        return Err(LabError::InvalidArgument("v_max needs T > 0 and a nonempty ensemble".into()));
    }
    let states = liouville_ensemble(model, ensemble_size, seed);
    let avgs: Vec<(f64, f64)> = states
        .par_iter()
        .map(|s| {
            let back = flow(model, s, -t, step)?;
            let run = integrate_running(model, &back, t, step, 1, Some(potential))?;
            Ok((run.v[1] / t, run.r[1] / t))
        })
        .collect::<Result<_>>()?;
    let mut v_max = f64::NEG_INFINITY;
    let mut w_max = f64::NEG_INFINITY;
    let mut mu_min = f64::INFINITY;
    for &(v, r) in &avgs {
        v_max = v_max.max(v);
        w_max = w_max.max(v - r);
        mu_min = mu_min.min(r);
    }
    Ok(VMaxReport {
        v_max,
        w_max,
        mu_min,
        bound_holds: w_max <= v_max - mu_min + 0.02,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gammas {
    pub gamma0_plus: f64,
    pub gamma0_minus: f64,
    pub gamma1_plus: f64,
    pub gamma1_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub mu_min: Estimate,
    pub mu_max: Estimate,
    pub epsilon: f64,
    /// Coefficient `c` of the potential `V = c·r_-`.
    pub r_weight: f64,
    pub gamma: Gammas,
    /// `μ_max < 2μ_min`
    pub pinching_2: bool,
    /// `3μ_min > μ_max`
    pub pinching_3: bool,
    pub band: [f64; 2],
    pub sobolev_exponent: f64,
}

/// Band data for potentials `V = c·r_-` (`c = 0` is `V = 0`). With
/// `κ = c − ½ − k` the growth rates are `γ_k^+ = sup κ·avg(r_-)` and
/// `γ_k^− = inf κ·avg(r_-)`, which the extremal rates realise.
pub fn band_report(mu_min: impl Into<Estimate>, mu_max: impl Into<Estimate>, epsilon: f64, r_weight: f64) -> Result<BandReport> {
    let (mu_min, mu_max) = (mu_min.into(), mu_max.into());
    let (lo, hi) = (mu_min.value, mu_max.value);
    if !(lo > 0.0) {
        return Err(LabError::Domain(lo));
    }
    if !(hi >= lo) || !(epsilon > 0.0) || !r_weight.is_finite() {
        return Err(LabError::InvalidArgument("band report needs μ_max ≥ μ_min and ε > 0".into()));
    }
    let gamma = |k: f64| {
        let kappa = r_weight - 0.5 - k;
        if kappa > 0.0 {
            (kappa * hi, kappa * lo)
        } else {
            (kappa * lo, kappa * hi)
        }
    };
    let (g0p, g0m) = gamma(0.0);
    let (g1p, g1m) = gamma(1.0);
    Ok(BandReport {
        mu_min,
        mu_max,
        epsilon,
        r_weight,
        gamma: Gammas {
            gamma0_plus: g0p,
            gamma0_minus: g0m,
            gamma1_plus: g1p,
            gamma1_minus: g1m,
        },
        pinching_2: hi < 2.0 * lo,
        pinching_3: 3.0 * lo > hi,
        band: [g0m - epsilon, g0p + epsilon],
        sobolev_exponent: -0.5 * (hi + 2.0 * epsilon) / lo,
    })
}

#[cfg(test)]
mod tests;
