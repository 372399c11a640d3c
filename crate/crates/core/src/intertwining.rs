//! Numerical checks of the horocyclic operator identities:
//!
//! ```text
//! [X, U_-] = −r_- U_-
//! (U_- + α_V) R_P(λ) = R_{P'}(λ) (U_- + α_V),   P = −X + V,  P' = P − r_-
//! U_-^* R_{−X+r_-}(λ) = R_{−X}(λ) U_-^*,        U_-^* = −U_- − div(U_-)
//! ⟨𝓤f, g⟩ + ⟨f, 𝓤g⟩ = 0,                      𝓤 = U_- + ½div(U_-)
//! ```
//!
//! Left-hand sides differentiate resolvent values by finite differences;
//! right-hand sides put the derivative inside a second, independent
//! quadrature along the orbit. Only potentials whose `α_V` is known in
//! closed form along orbits are supported: `0`, constants, `r_-` and `½r_-`,
//! where `α_V = w·div(U_-)` with `w` the weight of `r_-`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flow::{flow, frame_at, tangent_map, FrameVector, UnitTangentState, DEFAULT_STEP};
use crate::geometry::SurfaceModel;
use crate::rates::liouville_ensemble;
use crate::resolvent::table::{backward_table, Node};
use crate::resolvent::{
    chart_difference, horocyclic_node, recentred, resolvent_apply, resolvent_nodes, PotentialSpec, ResolventParams, TestFunction,
};
use crate::riccati::{differentiation_horizon, divergence_u_minus, hopf_minus, r_minus_at_horizon, u_minus_chart, DEFAULT_TOL};

/// Floor of the relative residual denominator.
pub const REL_FLOOR: f64 = 1e-8;
/// Outer finite-difference width for `U_-` of resolvent values.
pub const OUTER_STEP: f64 = 1e-2;
/// Fibre step of the pointwise divergence on adjoint left-hand sides.
const DIV_STEP: f64 = 1e-6;
/// Node spacing of the sampling orbits in the skew-adjointness check.
const SAMPLE_STEP: f64 = 2e-2;
/// Length of each sampling orbit.
const SAMPLE_ORBIT: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityId {
    Commutator,
    #[serde(rename = "intertwine_V0")]
    IntertwineV0,
    IntertwineGeneral,
    AdjointCase,
    SkewAdjoint,
}

impl IdentityId {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Commutator => "commutator",
            Self::IntertwineV0 => "intertwine_V0",
            Self::IntertwineGeneral => "intertwine_general",
            Self::AdjointCase => "adjoint_case",
            Self::SkewAdjoint => "skew_adjoint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Error attribution for one point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub quadrature: f64,
    /// `|D(h/2) − D(h)|/3` of the outer difference.
    pub differentiation: f64,
    /// Effect of the `r_-` tolerance on the difference direction.
    pub r_tolerance: f64,
}

impl ErrorBudget {
    pub fn total(&self) -> f64 {
        self.quadrature + self.differentiation + self.r_tolerance
    }

    fn max(self, o: Self) -> Self {
        Self {
            quadrature: self.quadrature.max(o.quadrature),
            differentiation: self.differentiation.max(o.differentiation),
            r_tolerance: self.r_tolerance.max(o.r_tolerance),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub point: UnitTangentState,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub budget: ErrorBudget,
}

impl PointResidual {
    fn new(point: UnitTangentState, lhs: Complex64, rhs: Complex64, budget: ErrorBudget) -> Self {
        let abs_residual = (lhs - rhs).norm();
        Self {
            point,
            lhs,
            rhs,
            abs_residual,
            rel_residual: relative(abs_residual, lhs.norm(), rhs.norm()),
            budget,
        }
    }
}

fn relative(abs: f64, a: f64, b: f64) -> f64 {
    abs / a.max(b).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity_id: IdentityId,
    pub params: Option<ResolventParams>,
    pub tolerance: f64,
    pub points: Vec<PointResidual>,
    pub max_rel_residual: f64,
    /// Componentwise maximum over the points.
    pub budget: ErrorBudget,
    pub verdict: Verdict,
}

impl IdentityReport {
    fn new(identity_id: IdentityId, params: Option<ResolventParams>, tolerance: f64, points: Vec<PointResidual>) -> Self {
        let max_rel_residual = points.iter().map(|p| p.rel_residual).fold(0.0, f64::max);
        let budget = points.iter().fold(ErrorBudget::default(), |b, p| b.max(p.budget));
        let verdict = if max_rel_residual <= tolerance { Verdict::Pass } else { Verdict::Fail };
        Self {
            identity_id,
            params,
            tolerance,
            points,
            max_rel_residual,
            budget,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "point,u,v,theta,lhs_re,lhs_im,rhs_re,rhs_im,abs_residual,rel_residual,quadrature_error,differentiation_error,r_tolerance_error\n",
        );
        for (i, p) in self.points.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{},{},{},{},{},{},{}",
                p.point.base.u,
                p.point.base.v,
                p.point.theta,
                p.lhs.re,
                p.lhs.im,
                p.rhs.re,
                p.rhs.im,
                p.abs_residual,
                p.rel_residual,
                p.budget.quadrature,
                p.budget.differentiation,
                p.budget.r_tolerance
            );
        }
        out
    }
}

/// Identity tolerance: 1e-2 in constant curvature, 3e-2 otherwise.
pub fn default_identity_tolerance(model: &SurfaceModel) -> f64 {
    if model.is_constant_curvature() {
        1e-2
    } else {
        3e-2
    }
}

// ---------------------------------------------------------------------------
// [X, U_-] = −r_- U_-

/// Both sides of the commutator relation in frame coefficients at `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorValue {
    /// Richardson-extrapolated `[X, gU_-]`.
    pub bracket: FrameVector,
    /// `−(r_- − X log g)·gU_-`
    pub expected: FrameVector,
    pub residual: f64,
}

fn check_width(h: f64) -> Result<()> {
    if !(1e-4..=1e-2).contains(&h) {
        return Err(LabError::InvalidArgument(format!("commutator width must lie in [1e-4, 1e-2], got {h}")));
    }
    Ok(())
}

/// `[X, Y](s)` for `Y = g·U_-` as `(dφ_{−h}Y(φ_h s) − dφ_h Y(φ_{−h}s))/2h`,
/// with `r_-` at one fixed horizon so that its flow derivative is smooth.
fn bracket_difference(model: &SurfaceModel, s: &UnitTangentState, h: f64, horizon: f64, g: &dyn Fn(&UnitTangentState) -> f64) -> Result<FrameVector> {
    let step = h.min(DEFAULT_STEP);
    let field = |x: &UnitTangentState| -> Result<FrameVector> {
        let r = r_minus_at_horizon(model, x, horizon)?;
        Ok(FrameVector::new(0.0, 1.0, -r).scale(g(x)))
    };
    let fwd = flow(model, s, h, step)?;
    let bwd = flow(model, s, -h, step)?;
    let a = tangent_map(model, &fwd, -h, &field(&fwd)?, step)?;
    let b = tangent_map(model, &bwd, h, &field(&bwd)?, step)?;
    Ok(a.sub(&b).scale(0.5 / h))
}

fn commutator_value(model: &SurfaceModel, s: &UnitTangentState, h: f64, gauge: bool) -> Result<CommutatorValue> {
    check_width(h)?;
    let horizon = differentiation_horizon(model, s, DEFAULT_TOL)?;
    let g = |x: &UnitTangentState| if gauge { 1.0 + 0.1 * x.theta.sin() } else { 1.0 };
    let d1 = bracket_difference(model, s, h, horizon, &g)?;
    let d2 = bracket_difference(model, s, h / 2.0, horizon, &g)?;
    let bracket = d2.scale(4.0 / 3.0).sub(&d1.scale(1.0 / 3.0));
    let r = r_minus_at_horizon(model, s, horizon)?;
    // X log g = 0.1 cos θ · Xθ / g, with Xθ the chart component of X.
    let x_log_g = if gauge { 0.1 * s.theta.cos() * frame_at(model, s)?.x[2] / g(s) } else { 0.0 };
    let expected = FrameVector::new(0.0, 1.0, -r).scale(-(r - x_log_g) * g(s));
    Ok(CommutatorValue {
        bracket,
        expected,
        residual: bracket.sub(&expected).norm(),
    })
}

/// Frame norm of `([X, U_-] + r_- U_-)(s)`.
pub fn commutator_residual(model: &SurfaceModel, s: &UnitTangentState, h: f64) -> Result<f64> {
    Ok(commutator_value(model, s, h, false)?.residual)
}

/// The same check for the rescaled field `gU_-`, `g = 1 + 0.1 sin θ`:
/// frame norm of `[X, gU_-] + (r_- − X log g)·gU_-`.
pub fn commutator_gauge_residual(model: &SurfaceModel, s: &UnitTangentState, h: f64) -> Result<f64> {
    Ok(commutator_value(model, s, h, true)?.residual)
}

/// Commutator check over a point set. Sides are reported as the
/// `X_⊥ + iV` coefficients; `abs_residual` is the full frame norm.
pub fn commutator_report(model: &SurfaceModel, points: &[UnitTangentState], h: f64, tolerance: f64) -> Result<IdentityReport> {
    let rows: Vec<PointResidual> = points
        .par_iter()
        .map(|s| {
            let c = commutator_value(model, s, h, false)?;
            let lhs = Complex64::new(c.bracket.perp, c.bracket.vrot);
            let rhs = Complex64::new(c.expected.perp, c.expected.vrot);
            let scale = lhs.norm().max(rhs.norm()).max(REL_FLOOR);
            Ok(PointResidual {
                point: *s,
                lhs,
                rhs,
                abs_residual: c.residual,
                rel_residual: c.residual / scale,
                budget: ErrorBudget::default(),
            })
        })
        .collect::<Result<_>>()?;
    // absolute criterion: the residual itself is the quantity of interest
    let max = rows.iter().map(|p| p.abs_residual).fold(0.0, f64::max);
    let mut report = IdentityReport::new(IdentityId::Commutator, None, tolerance, rows);
    report.verdict = if max <= tolerance { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}

// ---------------------------------------------------------------------------
// Resolvent intertwining

/// `α_V` expressed through `div(U_-)`, for the supported potentials.
fn alpha_weight(v: &PotentialSpec) -> Result<f64> {
    match v {
        PotentialSpec::Zero | PotentialSpec::Constant(_) | PotentialSpec::RMinus | PotentialSpec::HalfRMinus => Ok(v.r_weight()),
        PotentialSpec::Custom(_) => Err(LabError::InvalidArgument(
            "intertwining needs α_V along orbits; supported potentials are 0, constants, r_- and ½r_-".into(),
        )),
    }
}

/// `U_-f` at a table node from the exact chart gradient.
fn u_minus_at(f: &TestFunction, n: &Node) -> Result<f64> {
    let g = f.chart_gradient(&n.state)?;
    let w = n.u_minus_chart();
    Ok(g[0] * w[0] + g[1] * w[1] + g[2] * w[2])
}

struct OuterDerivative {
    value: Complex64,
    at_point: Complex64,
    quadrature: f64,
    differentiation: f64,
    r_tolerance: f64,
}

/// Richardson-extrapolated `U_-F(s)` for a resolvent value `F`, plus `F(s)`.
/// The direction uses `r_-` at tolerance [`DEFAULT_TOL`]; its effect is
/// budgeted as `tol·|VF|`.
fn outer_u_minus(
    model: &SurfaceModel,
    big: &(dyn Fn(&UnitTangentState) -> Result<Complex64> + Sync),
    quad_err: &(dyn Fn(&UnitTangentState) -> Result<f64> + Sync),
    s: &UnitTangentState,
) -> Result<OuterDerivative> {
    recentred(s, |x| {
        let r = hopf_minus(model, x, DEFAULT_TOL)?.value;
        let w = u_minus_chart(model, x, r)?;
        let d1 = chart_difference(big, x, &w, OUTER_STEP)?;
        let d2 = chart_difference(big, x, &w, OUTER_STEP / 2.0)?;
        let vf = chart_difference(big, x, &[0.0, 0.0, 1.0], OUTER_STEP)?;
        Ok(OuterDerivative {
            value: (d2 * 4.0 - d1) / 3.0,
            at_point: big(x)?,
            quadrature: quad_err(x)?,
            differentiation: (d2 - d1).norm() / 3.0,
            r_tolerance: DEFAULT_TOL * vf.norm(),
        })
    })
}

fn check_points(points: &[UnitTangentState]) -> Result<()> {
    if points.is_empty() {
        return Err(LabError::InvalidArgument("no sample points".into()));
    }
    Ok(())
}

/// Both sides of `(U_- + α_V)R_P(λ)f = R_{P'}(λ)(U_- + α_V)f` at each
/// point. `params.threshold` must be the differentiability threshold
/// `μ_max + V_max`; it also bounds the tail of the right-hand side, whose
/// potential `V − r_-` grows no faster.
pub fn intertwine(
    model: &SurfaceModel,
    f: &TestFunction,
    v: &PotentialSpec,
    points: &[UnitTangentState],
    params: &ResolventParams,
    tolerance: f64,
) -> Result<IdentityReport> {
    let weight = alpha_weight(v)?;
    check_points(points)?;
    params.check()?;
    let obs = f.observable();
    let rows: Vec<PointResidual> = points
        .par_iter()
        .map(|s| {
            let big = |x: &UnitTangentState| Ok(resolvent_apply(model, &obs, v, params, x)?.value);
            let err = |x: &UnitTangentState| Ok(resolvent_apply(model, &obs, v, params, x)?.error);
            let d = outer_u_minus(model, &big, &err, s)?;
            let alpha = if weight != 0.0 { weight * horocyclic_node(model, s)?.div_u_minus() } else { 0.0 };
            let lhs = d.value + d.at_point * alpha;
            let rhs = resolvent_nodes(model, s, params, true, |n| v.at_node(n) - n.r, |n| {
                Ok(u_minus_at(f, n)? + weight * n.div_u_minus() * f.evaluate(&n.state)?)
            })?;
            let budget = ErrorBudget {
                quadrature: rhs.error + alpha.abs() * d.quadrature,
                differentiation: d.differentiation,
                r_tolerance: d.r_tolerance,
            };
            Ok(PointResidual::new(*s, lhs, rhs.value, budget))
        })
        .collect::<Result<_>>()?;
    let id = if matches!(v, PotentialSpec::Zero) { IdentityId::IntertwineV0 } else { IdentityId::IntertwineGeneral };
    Ok(IdentityReport::new(id, Some(*params), tolerance, rows))
}

/// Both sides of `U_-^* R_{−X+r_-}(λ)f = R_{−X}(λ)U_-^*f`. On the left
/// `div(U_-)` is the fibre difference of the Hopf function; on the right it
/// is carried along the orbit.
pub fn adjoint_case(
    model: &SurfaceModel,
    f: &TestFunction,
    points: &[UnitTangentState],
    params: &ResolventParams,
    tolerance: f64,
) -> Result<IdentityReport> {
    check_points(points)?;
    params.check()?;
    let obs = f.observable();
    let v = PotentialSpec::RMinus;
    let rows: Vec<PointResidual> = points
        .par_iter()
        .map(|s| {
            let big = |x: &UnitTangentState| Ok(resolvent_apply(model, &obs, &v, params, x)?.value);
            let err = |x: &UnitTangentState| Ok(resolvent_apply(model, &obs, &v, params, x)?.error);
            let d = outer_u_minus(model, &big, &err, s)?;
            let div = divergence_u_minus(model, s, DIV_STEP)?;
            let lhs = -d.value - d.at_point * div;
            let rhs = resolvent_nodes(model, s, params, true, |_| 0.0, |n| {
                Ok(-u_minus_at(f, n)? - n.div_u_minus() * f.evaluate(&n.state)?)
            })?;
            let budget = ErrorBudget {
                quadrature: rhs.error + div.abs() * d.quadrature,
                differentiation: d.differentiation,
                r_tolerance: d.r_tolerance,
            };
            Ok(PointResidual::new(*s, lhs, rhs.value, budget))
        })
        .collect::<Result<_>>()?;
    Ok(IdentityReport::new(IdentityId::AdjointCase, Some(*params), tolerance, rows))
}

// ---------------------------------------------------------------------------
// Skew-adjointness of U_- + ½div(U_-)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewReport {
    /// `|⟨𝓤f, g⟩ + ⟨f, 𝓤g⟩|` normalised by the Liouville volume.
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    pub orbits: usize,
    pub passed: bool,
}

/// Monte Carlo estimate of `E[(U_-f)g + f(U_-g) + div(U_-)fg]` over the
/// normalised Liouville measure. Samples are the nodes of backward orbit
/// tables started from Liouville-distributed states; by flow invariance each
/// node is Liouville distributed, and the standard error comes from the
/// spread of per-orbit means. Passes within three standard errors of 0.
pub fn skew_adjoint_check(model: &SurfaceModel, f: &TestFunction, g: &TestFunction, samples: usize, seed: u64) -> Result<SkewReport> {
    if samples == 0 {
        return Err(LabError::InvalidArgument("need at least one sample".into()));
    }
    let per_orbit = ((SAMPLE_ORBIT / SAMPLE_STEP) as usize).min(samples.div_ceil(16)).max(1);
    let orbits = samples.div_ceil(per_orbit).max(2);
    let starts = liouville_ensemble(model, orbits, seed);
    let integrand = |n: &Node| -> Result<f64> {
        let (fv, gv) = (f.evaluate(&n.state)?, g.evaluate(&n.state)?);
        Ok(u_minus_at(f, n)? * gv + fv * u_minus_at(g, n)? + n.div_u_minus() * fv * gv)
    };
    let means: Vec<(f64, usize)> = starts
        .par_iter()
        .map(|s| {
            let t = per_orbit as f64 * SAMPLE_STEP;
            let table = backward_table(model, s, t, SAMPLE_STEP, true)?;
            let nodes = &table.nodes[..per_orbit.min(table.span)];
            let sum = nodes.iter().map(integrand).sum::<Result<f64>>()?;
            Ok((sum / nodes.len() as f64, nodes.len()))
        })
        .collect::<Result<_>>()?;
    let m = means.len() as f64;
    let mean = means.iter().map(|x| x.0).sum::<f64>() / m;
    let var = means.iter().map(|x| (x.0 - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let std_error = (var / m).sqrt();
    Ok(SkewReport {
        estimate: mean.abs(),
        std_error,
        samples: means.iter().map(|x| x.1).sum(),
        orbits: means.len(),
        passed: mean.abs() <= 3.0 * std_error,
    })
}
