//! Backward orbit tables.
//!
//! A table holds the nodes `φ_{−jh}(s)`, `j = 0..=n`, of one backward RK4
//! orbit. `r_-` and its derivatives `p = X_⊥r_-`, `q = V r_-` are stable only
//! forward in time, so they are swept from the far end of the table towards
//! `s` along
//!
//! ```text
//! r' = −r² − K,   p' = −Kq − 2rp − X_⊥K,   q' = p − 2rq
//! ```
//!
//! (the Riccati equation differentiated along `X_⊥` and `V`). Midpoint
//! coefficients are evaluated at the cubic Hermite midpoint of each backward
//! step; interpolating `K` itself is much worse, since the bump curvature has
//! large high derivatives along the orbit. Seed errors in
//! `(p, q)` decay like `e^{−∫r_-}` and in `r` like `e^{−2∫r_-}`, so a backoff
//! of [`SEED_BACKOFF`] time units past the quadrature range makes the seeds
//! irrelevant.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::flow::{frame_from_sigma, step_count, Frame, FrameVector, Orbit, Stage, UnitTangentState};
use crate::geometry::{curvature_from_sigma, SurfaceModel};
use crate::jet::Jet2;

/// Extra backward time used to forget the transport seeds.
pub(crate) const SEED_BACKOFF: f64 = 24.0;
/// Chart step for the curvature gradient.
const GRAD_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub state: UnitTangentState,
    pub sigma: Jet2,
    pub k: f64,
    /// `X_⊥K`
    pub dk: f64,
    pub r: f64,
    /// `X_⊥ r_-`
    pub p: f64,
    /// `V r_-`
    pub q: f64,
}

impl Node {
    fn from_stage(model: &SurfaceModel, st: &Stage, gradient: bool) -> Result<Self> {
        let dk = if gradient {
            let k = |dz: Complex64| -> Result<f64> { Ok(curvature_from_sigma(&model.sigma_jet(st.z + dz)?)) };
            let ku = (k(Complex64::new(GRAD_EPS, 0.0))? - k(Complex64::new(-GRAD_EPS, 0.0))?) / (2.0 * GRAD_EPS);
            let kv = (k(Complex64::new(0.0, GRAD_EPS))? - k(Complex64::new(0.0, -GRAD_EPS))?) / (2.0 * GRAD_EPS);
            let (sn, cs) = st.theta.sin_cos();
            (-st.sigma.v).exp() * (sn * ku - cs * kv)
        } else {
            0.0
        };
        Ok(Self {
            state: UnitTangentState::from_chart(st.z, st.theta)?,
            sigma: st.sigma,
            k: st.curvature(),
            dk,
            r: f64::NAN,
            p: f64::NAN,
            q: f64::NAN,
        })
    }

    pub fn frame(&self) -> Frame {
        frame_from_sigma(&self.sigma, self.state.theta)
    }

    /// `U_- = X_⊥ − r_- V` as a chart vector.
    pub fn u_minus_chart(&self) -> [f64; 3] {
        self.frame().to_chart(&FrameVector::new(0.0, 1.0, -self.r))
    }

    /// The frame fields are divergence free for the Liouville measure, so
    /// `div(U_-) = −V(r_-)`.
    pub fn div_u_minus(&self) -> f64 {
        -self.q
    }

    /// `U_-(r_-) = X_⊥r_- − r_- V r_-`
    pub fn u_minus_r(&self) -> f64 {
        self.p - self.r * self.q
    }
}

pub(crate) struct OrbitTable {
    pub h: f64,
    /// Nodes used by the quadrature: `0..=span`, a multiple of 4.
    pub span: usize,
    pub nodes: Vec<Node>,
}

/// Nodes of the backward orbit of `s` over `[−t, 0]`, with `r_-`, `X_⊥r_-`
/// and `V r_-` filled in when `with_r` is set.
pub(crate) fn backward_table(model: &SurfaceModel, s: &UnitTangentState, t: f64, step: f64, with_r: bool) -> Result<OrbitTable> {
    if !(t > 0.0) {
        return Err(LabError::InvalidArgument(format!("table length must be positive, got {t}")));
    }
    let span = step_count(t, step)?.max(1).next_multiple_of(4);
    let h = t / span as f64;
    let constant = model.is_constant_curvature();
    let backoff = if with_r && !constant { (SEED_BACKOFF / h).ceil() as usize } else { 0 };
    let total = span + backoff;
    step_count(total as f64, 1.0)?;
    let gradient = with_r && !constant;
    let mut nodes = Vec::with_capacity(total + 1);
    let mut mids = Vec::with_capacity(if gradient { total } else { 0 });
    let mut orbit = Orbit::new(model, s.z(), s.theta);
    for _ in 0..total {
        let (z0, t0) = (orbit.z, orbit.theta);
        let stages = orbit.step(-h)?;
        nodes.push(Node::from_stage(model, &stages[0], gradient)?);
        if gradient {
            // end of the step before reduction, then Hermite with k1 and k4
            let k1 = stages[0].rhs();
            let k4 = stages[3].rhs();
            let (z1, t1) = unreduced_end(&stages, z0, t0, -h);
            let zm = (z0 + z1) * 0.5 - Complex64::new(k1[0] - k4[0], k1[1] - k4[1]) * (h / 8.0);
            let tm = 0.5 * (t0 + t1) - (k1[2] - k4[2]) * (h / 8.0);
            let m = Node::from_stage(model, &Stage::new(model, zm, tm)?, true)?;
            mids.push((m.k, m.dk));
        }
    }
    nodes.push(Node::from_stage(model, &Stage::new(model, orbit.z, orbit.theta)?, gradient)?);
    nodes[0].state = *s;
    if with_r {
        if constant {
            let k = (-nodes[0].k).sqrt();
            for n in &mut nodes {
                (n.r, n.p, n.q) = (k, 0.0, 0.0);
            }
        } else {
            sweep(model, &mut nodes, &mids, h);
        }
    }
    Ok(OrbitTable { h, span, nodes })
}

/// Endpoint of an RK4 step from `(z, θ)` with step `h`, recomputed from its
/// stages in the chart of the start point.
fn unreduced_end(stages: &[Stage; 4], z: Complex64, theta: f64, h: f64) -> (Complex64, f64) {
    let k: Vec<[f64; 3]> = stages.iter().map(|st| st.rhs()).collect();
    let w = h / 6.0;
    let comb = |i: usize| (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]) * w;
    (z + Complex64::new(comb(0), comb(1)), theta + comb(2))
}

/// `mids[j]` holds `(K, X_⊥K)` halfway between nodes `j` and `j + 1`.
fn sweep(model: &SurfaceModel, nodes: &mut [Node], mids: &[(f64, f64)], h: f64) {
    let last = nodes.len() - 1;
    let cr = model.curvature_range();
    let mut y = [0.5 * (cr.k0 + cr.k1), 0.0, 0.0];
    (nodes[last].r, nodes[last].p, nodes[last].q) = (y[0], y[1], y[2]);
    let rate = |k: f64, dk: f64, y: &[f64; 3]| [-y[0] * y[0] - k, -k * y[2] - 2.0 * y[0] * y[1] - dk, y[1] - 2.0 * y[0] * y[2]];
    for j in (0..last).rev() {
        let (k0, g0) = (nodes[j + 1].k, nodes[j + 1].dk);
        let (k1, g1) = (nodes[j].k, nodes[j].dk);
        let (km, gm) = mids[j];
        let a = rate(k0, g0, &y);
        let t1 = [y[0] + 0.5 * h * a[0], y[1] + 0.5 * h * a[1], y[2] + 0.5 * h * a[2]];
        let b = rate(km, gm, &t1);
        let t2 = [y[0] + 0.5 * h * b[0], y[1] + 0.5 * h * b[1], y[2] + 0.5 * h * b[2]];
        let c = rate(km, gm, &t2);
        let t3 = [y[0] + h * c[0], y[1] + h * c[1], y[2] + h * c[2]];
        let d = rate(k1, g1, &t3);
        for i in 0..3 {
            y[i] += h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
        }
        (nodes[j].r, nodes[j].p, nodes[j].q) = (y[0], y[1], y[2]);
    }
}

/// `∫_{−T}^0 e^{λt + ∫_t^0 V}·g(t) dt` over the table, as Simpson on the
/// node grid improved by one Richardson step against the doubled grid.
/// Returns the value and `|S_h − S_{2h}|/15`.
pub(crate) fn laplace_quadrature(table: &OrbitTable, lambda: Complex64, v: &[f64], g: &[f64]) -> (Complex64, f64) {
    let n = table.span;
    let h = table.h;
    let last = v.len() - 1;
    // cumulative ∫_{t_j}^0 V
    let mut acc = vec![0.0; n + 1];
    for j in 0..n {
        let piece = if j >= 1 && j + 2 <= last {
            h / 24.0 * (-v[j - 1] + 13.0 * v[j] + 13.0 * v[j + 1] - v[j + 2])
        } else if j + 2 <= last {
            h / 12.0 * (5.0 * v[j] + 8.0 * v[j + 1] - v[j + 2])
        } else {
            h / 12.0 * (5.0 * v[j + 1] + 8.0 * v[j] - v[j - 1])
        };
        acc[j + 1] = acc[j] + piece;
    }
    let w: Vec<Complex64> = (0..=n)
        .map(|j| (lambda * (-(j as f64) * h) + acc[j]).exp() * g[j])
        .collect();
    let simpson = |stride: usize| -> Complex64 {
        let m = n / stride;
        let mut s = w[0] + w[n];
        for i in 1..m {
            s += w[i * stride] * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * (h * stride as f64 / 3.0)
    };
    let fine = simpson(1);
    let coarse = simpson(2);
    let diff = (fine - coarse) / 15.0;
    (fine + diff, diff.norm())
}
