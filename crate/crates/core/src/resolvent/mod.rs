//! The weighted transfer semigroup `e^{−tP}` and the resolvent of
//! `P = −X + V`,
//!
//! ```text
//! R_P(λ)f = −∫_{−∞}^0 exp(λt + ∫_t^0 V∘φ_s ds)·f∘φ_t dt,
//! ```
//!
//! evaluated pointwise by quadrature along one backward orbit, together with
//! the connection term `α_V` and derivatives along `U_-`.

mod potential;
pub(crate) mod table;
mod testfn;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flow::{flow, rk4_extras, step_count, Observable, Orbit, UnitTangentState, DEFAULT_STEP, SEED_TOL};
use crate::geometry::SurfaceModel;
use crate::riccati::{constant_curvature_r, hopf_minus, u_minus_chart, DEFAULT_TOL};

pub use potential::PotentialSpec;
pub use testfn::{FunctionId, TestFunction, TestFunctionSpec};
pub(crate) use table::{backward_table, laplace_quadrature, Node};

/// Node spacing of resolvent quadratures.
pub const RESOLVENT_STEP: f64 = 1e-2;
/// Node spacing of pointwise horocyclic jets.
pub const JET_STEP: f64 = 5e-3;
/// Default bound on `e^{(threshold − Re λ)T}`.
pub const TAIL_TARGET: f64 = 1e-8;
pub const DEFAULT_MARGIN: f64 = 0.1;
/// Chart step for derivatives of explicitly evaluable functions along `U_-`.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventParams {
    pub lambda: Complex64,
    pub t_trunc: f64,
    pub step: f64,
    pub margin: f64,
    /// Growth rate the weight may not exceed: the measured `V_max`, or
    /// `μ_max + V_max` when the result is to be differentiated.
    pub threshold: f64,
}

impl ResolventParams {
    /// Truncation chosen so that `e^{(threshold − Re λ)T} = TAIL_TARGET`.
    pub fn new(lambda: Complex64, threshold: f64) -> Self {
        let gap = lambda.re - threshold;
        let t_trunc = if gap > 0.0 { (1.0 / TAIL_TARGET).ln() / gap } else { f64::INFINITY };
        Self {
            lambda,
            t_trunc,
            step: RESOLVENT_STEP,
            margin: DEFAULT_MARGIN,
            threshold,
        }
    }

    pub fn with_t_trunc(self, t_trunc: f64) -> Self {
        Self { t_trunc, ..self }
    }

    pub fn with_step(self, step: f64) -> Self {
        Self { step, ..self }
    }

    pub fn with_margin(self, margin: f64) -> Self {
        Self { margin, ..self }
    }

    pub fn tail_factor(&self) -> f64 {
        ((self.threshold - self.lambda.re) * self.t_trunc).exp()
    }

    pub fn check(&self) -> Result<()> {
        if !(self.margin >= 0.0) || !self.threshold.is_finite() || !self.lambda.re.is_finite() || !self.lambda.im.is_finite() {
            return Err(LabError::InvalidArgument("resolvent parameters must be finite with margin ≥ 0".into()));
        }
        if self.lambda.re < self.threshold + self.margin {
            return Err(LabError::Region(format!(
                "Re λ = {} is below threshold {} + margin {}",
                self.lambda.re, self.threshold, self.margin
            )));
        }
        if !(self.t_trunc > 0.0 && self.t_trunc.is_finite()) || !(self.step > 0.0) {
            return Err(LabError::InvalidArgument("T_trunc and step must be positive and finite".into()));
        }
        if self.tail_factor() > TAIL_TARGET * (1.0 + 1e-9) {
            return Err(LabError::InvalidArgument(format!(
                "T_trunc = {} leaves a tail factor {:.3e} above {TAIL_TARGET:e}",
                self.t_trunc,
                self.tail_factor()
            )));
        }
        Ok(())
    }
}

/// Upper bound on the backward averages of `V` from the curvature bounds
/// alone (`k₁ ≤ r_- ≤ k₀`). `None` for custom potentials.
pub fn curvature_threshold(model: &SurfaceModel, v: &PotentialSpec) -> Option<f64> {
    let k0 = model.curvature_range().k0;
    match v {
        PotentialSpec::Zero => Some(0.0),
        PotentialSpec::Constant(c) => Some(*c),
        PotentialSpec::RMinus => Some(k0),
        PotentialSpec::HalfRMinus => Some(0.5 * k0),
        PotentialSpec::Custom(Observable::One) => Some(1.0),
        PotentialSpec::Custom(Observable::RMinus) => Some(k0),
        PotentialSpec::Custom(_) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventValue {
    pub value: Complex64,
    /// Richardson estimate of the quadrature error.
    pub quadrature_error: f64,
    /// `sup|f|·e^{(threshold − Re λ)T}/(Re λ − threshold)`, with `sup|f|`
    /// taken over the integrated orbit segment.
    pub tail_bound: f64,
    pub error: f64,
    pub t_trunc: f64,
}

pub(crate) fn observe_node(f: &Observable, n: &Node) -> f64 {
    match f {
        Observable::One => 1.0,
        Observable::Curvature => n.k,
        Observable::RMinus => n.r,
        Observable::Custom(g) => g(&n.state),
    }
}

fn observable_needs_r(f: &Observable) -> bool {
    matches!(f, Observable::RMinus)
}

/// Resolvent quadrature with node-level integrand and potential.
pub(crate) fn resolvent_nodes(
    model: &SurfaceModel,
    s: &UnitTangentState,
    params: &ResolventParams,
    with_r: bool,
    potential: impl Fn(&Node) -> f64,
    integrand: impl Fn(&Node) -> Result<f64>,
) -> Result<ResolventValue> {
    params.check()?;
    let table = backward_table(model, s, params.t_trunc, params.step, with_r)?;
    let v: Vec<f64> = table.nodes.iter().map(&potential).collect();
    let g: Vec<f64> = table.nodes[..=table.span].iter().map(&integrand).collect::<Result<_>>()?;
    if !g.iter().chain(&v).all(|x| x.is_finite()) {
        return Err(LabError::Integration("resolvent integrand is not finite".into()));
    }
    let (integral, quadrature_error) = laplace_quadrature(&table, params.lambda, &v, &g);
    let sup = g.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let gap = params.lambda.re - params.threshold;
    let tail_bound = sup * params.tail_factor() / gap;
    Ok(ResolventValue {
        value: -integral,
        quadrature_error,
        tail_bound,
        error: quadrature_error + tail_bound,
        t_trunc: params.t_trunc,
    })
}

/// `R_P(λ)f(s)` for `P = −X + V`.
pub fn resolvent_apply(
    model: &SurfaceModel,
    f: &Observable,
    v: &PotentialSpec,
    params: &ResolventParams,
    s: &UnitTangentState,
) -> Result<ResolventValue> {
    let with_r = observable_needs_r(f) || v.needs_r();
    resolvent_nodes(model, s, params, with_r, |n| v.at_node(n), |n| Ok(observe_node(f, n)))
}

/// `(e^{−tP}f)(s) = e^{−∫_0^t V∘φ_u du}·f(φ_t(s))` for `t ≥ 0`.
pub fn weighted_pullback(model: &SurfaceModel, f: &Observable, v: &PotentialSpec, t: f64, s: &UnitTangentState) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(LabError::InvalidArgument(format!("pullback time must be ≥ 0, got {t}")));
    }
    let n = step_count(t, DEFAULT_STEP)?;
    let needs_r = observable_needs_r(f) || v.needs_r();
    let r0 = if !needs_r {
        0.0
    } else if let Some(k) = constant_curvature_r(model) {
        k
    } else {
        hopf_minus(model, s, SEED_TOL)?.value
    };
    let mut orbit = Orbit::new(model, s.z(), s.theta);
    // x = (r_-, ∫V)
    let mut x = [r0, 0.0];
    if n > 0 {
        let h = t / n as f64;
        for _ in 0..n {
            let st = orbit.step(h)?;
            rk4_extras(&st, h, &mut x, |st, x, dx| {
                dx[0] = if needs_r { -x[0] * x[0] - st.curvature() } else { 0.0 };
                dx[1] = v.at_stage(st, x[0]);
            });
        }
    }
    let end = if n == 0 { *s } else { UnitTangentState::from_chart(orbit.z, orbit.theta)? };
    let fv = match f {
        Observable::One => 1.0,
        Observable::Curvature => model.curvature_at(&end.base)?,
        Observable::RMinus => x[0],
        Observable::Custom(g) => g(&end),
    };
    let out = (-x[1]).exp() * fv;
    if !out.is_finite() {
        return Err(LabError::Integration("pullback is not finite".into()));
    }
    Ok(out)
}

/// `|(P − λ)R_P(λ)f − f|(s)`, with `X` applied by a central difference of
/// width `h` along the flow and `V(s)` evaluated pointwise.
pub fn defining_identity_residual(
    model: &SurfaceModel,
    f: &Observable,
    v: &PotentialSpec,
    params: &ResolventParams,
    s: &UnitTangentState,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(LabError::InvalidArgument("h must be positive".into()));
    }
    let g = |x: &UnitTangentState| resolvent_apply(model, f, v, params, x).map(|r| r.value);
    let fwd = flow(model, s, h, h)?;
    let bwd = flow(model, s, -h, h)?;
    let xg = (g(&fwd)? - g(&bwd)?) / (2.0 * h);
    let g0 = g(s)?;
    let f0 = match f {
        Observable::One => 1.0,
        Observable::Curvature => model.curvature_at(&s.base)?,
        Observable::RMinus => hopf_minus(model, s, DEFAULT_TOL)?.value,
        Observable::Custom(c) => c(s),
    };
    let vs = v.evaluate(model, s)?;
    Ok((-xg + (vs - params.lambda) * g0 - f0).norm())
}

/// Derivative estimate with its Richardson data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    /// `(4D(h/2) − D(h))/3`
    pub value: f64,
    /// `|D(h/2) − D(h)|/3`
    pub error: f64,
    /// `(D(h) − D(h/2))/(D(h/2) − D(h/4))`, ≈ 4 for smooth `f`.
    pub ratio: f64,
}

/// Central difference of `f` along the chart segment `s + τw`.
pub(crate) fn chart_difference<T>(f: &dyn Fn(&UnitTangentState) -> Result<T>, s: &UnitTangentState, w: &[f64; 3], h: f64) -> Result<T>
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let plus = s.displaced(w, h).map_err(|_| LabError::ChartBoundary(s.chart()))?;
    let minus = s.displaced(w, -h).map_err(|_| LabError::ChartBoundary(s.chart()))?;
    Ok((f(&plus)? - f(&minus)?) * (0.5 / h))
}

/// Runs `op` at `s`; if a chart boundary is crossed, once more at the
/// representative of `s` in the fundamental domain.
pub(crate) fn recentred<T>(s: &UnitTangentState, op: impl Fn(&UnitTangentState) -> Result<T>) -> Result<T> {
    match op(s) {
        Err(LabError::ChartBoundary(_)) => op(&s.reduced()?),
        other => other,
    }
}

/// `U_-f(s)` by a central difference of width `h` along the chart segment
/// through `s` with velocity `U_-(s)`; `r_-(s)` from its Hopf limit.
pub fn u_minus_derivative(
    model: &SurfaceModel,
    f: &dyn Fn(&UnitTangentState) -> Result<f64>,
    s: &UnitTangentState,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(LabError::InvalidArgument("h must be positive".into()));
    }
    recentred(s, |x| {
        let r = hopf_minus(model, x, DEFAULT_TOL)?.value;
        chart_difference(f, x, &u_minus_chart(model, x, r)?, h)
    })
}

/// Richardson-extrapolated `U_-f(s)` from the widths `h`, `h/2`, `h/4`.
pub fn u_minus_richardson(
    model: &SurfaceModel,
    f: &dyn Fn(&UnitTangentState) -> Result<f64>,
    s: &UnitTangentState,
    h: f64,
) -> Result<DerivativeEstimate> {
    if !(h > 0.0) {
        return Err(LabError::InvalidArgument("h must be positive".into()));
    }
    recentred(s, |x| {
        let r = hopf_minus(model, x, DEFAULT_TOL)?.value;
        let w = u_minus_chart(model, x, r)?;
        let d1 = chart_difference(f, x, &w, h)?;
        let d2 = chart_difference(f, x, &w, h / 2.0)?;
        let d4 = chart_difference(f, x, &w, h / 4.0)?;
        Ok(DerivativeEstimate {
            value: (4.0 * d2 - d1) / 3.0,
            error: (d2 - d1).abs() / 3.0,
            ratio: (d1 - d2) / (d2 - d4),
        })
    })
}

/// `U_-(V)` at a table node.
pub(crate) fn u_minus_potential(v: &PotentialSpec, n: &Node) -> Result<f64> {
    Ok(match v {
        PotentialSpec::Zero | PotentialSpec::Constant(_) => 0.0,
        PotentialSpec::RMinus | PotentialSpec::Custom(Observable::RMinus) => n.u_minus_r(),
        PotentialSpec::HalfRMinus => 0.5 * n.u_minus_r(),
        PotentialSpec::Custom(Observable::One) => 0.0,
        // K depends on the base only, so U_-K = X_⊥K.
        PotentialSpec::Custom(Observable::Curvature) => n.dk,
        PotentialSpec::Custom(Observable::Custom(g)) => {
            let g = g.clone();
            chart_difference(&move |x: &UnitTangentState| Ok(g(x)), &n.state, &n.u_minus_chart(), FD_STEP)?
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaValue {
    pub value: f64,
    pub error: f64,
    pub t_trunc: f64,
}

/// `α_V = R_{−X−r_-}(0)U_-(V)`, the bounded solution of
/// `(−X − r_-)α_V = U_-(V)`. The weight `e^{−∫r_-}` decays at least like
/// `e^{−k₁|t|}`, so λ = 0 lies in the convergence region with threshold
/// `−k₁` whenever `k₁` exceeds the margin. The truncation makes
/// `e^{−k₁T} ≤ min(tol, TAIL_TARGET)`.
pub fn alpha_v(model: &SurfaceModel, v: &PotentialSpec, s: &UnitTangentState, tol: f64) -> Result<AlphaValue> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(LabError::InvalidArgument("tolerance must lie in (0, 1)".into()));
    }
    if v.is_horocyclically_constant() || matches!(v, PotentialSpec::Custom(Observable::One)) {
        return Ok(AlphaValue {
            value: 0.0,
            error: 0.0,
            t_trunc: 0.0,
        });
    }
    let k1 = model.curvature_range().k1;
    let params = ResolventParams::new(Complex64::new(0.0, 0.0), -k1).with_t_trunc((1.0 / tol.min(TAIL_TARGET)).ln() / k1);
    let out = resolvent_nodes(model, s, &params, true, |n| -n.r, |n| u_minus_potential(v, n))?;
    Ok(AlphaValue {
        value: out.value.re,
        error: out.error,
        t_trunc: params.t_trunc,
    })
}

/// `|(−X − r_-)α_V − U_-(V)|(s)` with `X` by a central difference of width `h`.
pub fn alpha_residual(model: &SurfaceModel, v: &PotentialSpec, s: &UnitTangentState, tol: f64, h: f64) -> Result<f64> {
    let fwd = flow(model, s, h, h)?;
    let bwd = flow(model, s, -h, h)?;
    let xa = (alpha_v(model, v, &fwd, tol)?.value - alpha_v(model, v, &bwd, tol)?.value) / (2.0 * h);
    let a = alpha_v(model, v, s, tol)?.value;
    let n = horocyclic_node(model, s)?;
    Ok((-xa - n.r * a - u_minus_potential(v, &n)?).abs())
}

/// `r_-` and its first derivatives at a point, from a transported table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorocyclicJet {
    pub r_minus: f64,
    /// `X_⊥ r_-`
    pub perp_r: f64,
    /// `V r_-`
    pub vert_r: f64,
    pub div_u_minus: f64,
    /// `U_-(r_-)`
    pub u_minus_r: f64,
}

pub(crate) fn horocyclic_node(model: &SurfaceModel, s: &UnitTangentState) -> Result<Node> {
    let table = backward_table(model, s, 4.0 * JET_STEP, JET_STEP, true)?;
    Ok(table.nodes[0])
}

pub fn horocyclic_jet(model: &SurfaceModel, s: &UnitTangentState) -> Result<HorocyclicJet> {
    let n = horocyclic_node(model, s)?;
    Ok(HorocyclicJet {
        r_minus: n.r,
        perp_r: n.p,
        vert_r: n.q,
        div_u_minus: n.div_u_minus(),
        u_minus_r: n.u_minus_r(),
    })
}

/// One entry of a batch manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    /// `[Re λ, Im λ]`
    pub lambda: [f64; 2],
    pub potential: String,
    /// `[u, v, θ]`
    pub point: [f64; 3],
    pub function: String,
    #[serde(rename = "T_trunc")]
    pub t_trunc: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub item: BatchItem,
    pub value: ResolventValue,
}

/// Evaluates every manifest entry. Thresholds come from `threshold` (the
/// measured `V_max` of each potential); entries whose potential has none
/// fall back to the curvature bound.
pub fn run_batch(
    model: &SurfaceModel,
    items: &[BatchItem],
    threshold: impl Fn(&PotentialSpec) -> Option<f64>,
) -> Result<Vec<BatchResult>> {
    items
        .iter()
        .map(|item| {
            let v: PotentialSpec = item.potential.parse()?;
            let f: FunctionId = item.function.parse()?;
            let th = threshold(&v)
                .or_else(|| curvature_threshold(model, &v))
                .ok_or_else(|| LabError::InvalidArgument(format!("no threshold for potential {}", item.potential)))?;
            let mut params = ResolventParams::new(Complex64::new(item.lambda[0], item.lambda[1]), th);
            if let Some(t) = item.t_trunc {
                params = params.with_t_trunc(t);
            }
            if let Some(h) = item.step {
                params = params.with_step(h);
            }
            let s = UnitTangentState::new(item.point[0], item.point[1], item.point[2])?;
            let value = resolvent_apply(model, &f.observable(), &v, &params, &s)?;
            Ok(BatchResult { item: item.clone(), value })
        })
        .collect()
}

/// One CSV row per entry, with the value and its error columns.
pub fn batch_csv(results: &[BatchResult]) -> String {
    let mut out = String::from("index,function,potential,lambda_re,lambda_im,re,im,error,quadrature_error,tail_bound\n");
    for (i, r) in results.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{:.15e},{:.15e},{:.6e},{:.6e},{:.6e}\n",
            r.item.function,
            r.item.potential,
            r.item.lambda[0],
            r.item.lambda[1],
            r.value.value.re,
            r.value.value.im,
            r.value.error,
            r.value.quadrature_error,
            r.value.tail_bound
        ));
    }
    out
}
