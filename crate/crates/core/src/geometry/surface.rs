//! Conformal metrics `e^{2φ} g_hyp` on the octagon surface.
//!
//! `φ` is a finite sum of compactly supported bumps, each summed over its
//! Γ-orbit. Supports have radius below half the systole, so translates of a
//! bump never overlap and the orbit sum is exact. Per bump the profile is
//! `a·exp(1 − 1/(1 − s))` with `s = tanh²(d/2) / tanh²(ρ/2)`, `d` the distance
//! to the centre; it equals `a` at the centre and vanishes to infinite order
//! at `d = ρ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::group::octagon;
use super::{circumradius, distance_c, systole, DiskPoint};
use crate::cache::MemoCache;
use crate::error::{LabError, Result};
use crate::jet::{CJet2, Jet2};

/// Upper curvature bound a model must stay below.
pub const CURVATURE_LIMIT: f64 = -0.01;
/// Points this close to the origin evaluate `φ` without reduction.
const DIRECT_RADIUS_PAD: f64 = 1.0;

fn default_word_budget() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SurfaceConfig {
    #[serde(default)]
    perturbation: Vec<Bump>,
    #[serde(default = "default_word_budget")]
    word_budget: usize,
    /// Constant added to `φ`.
    #[serde(default)]
    offset: f64,
}

/// One Γ-translate of a bump that can reach the direct-evaluation zone.
#[derive(Debug, Clone)]
struct Translate {
    centre: Complex64,
    t2: f64,
    amplitude: f64,
    /// Euclidean bounding circle of the support.
    ecentre: Complex64,
    eradius2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRange {
    pub kmin: f64,
    pub kmax: f64,
    /// `√(−kmin)`
    pub k0: f64,
    /// `√(−kmax)`
    pub k1: f64,
}

/// Log conformal factor `σ` of the metric relative to `|dz|²` with its first
/// and second chart derivatives.
pub type ConformalJet = Jet2;

#[derive(Debug)]
pub struct SurfaceModel {
    config: SurfaceConfig,
    field: BumpField,
    range: CurvatureRange,
    pub(crate) hopf_cache: MemoCache<[f64; 4]>,
}

impl Clone for SurfaceModel {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            field: self.field.clone(),
            range: self.range,
            hopf_cache: MemoCache::new(),
        }
    }
}

impl SurfaceModel {
    /// The constant-curvature metric, `φ ≡ 0`.
    pub fn hyperbolic() -> Self {
        Self::new(Vec::new(), default_word_budget(), 0.0).expect("hyperbolic model")
    }

    pub fn new(perturbation: Vec<Bump>, word_budget: usize, offset: f64) -> Result<Self> {
        Self::from_config(SurfaceConfig {
            perturbation,
            word_budget,
            offset,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: SurfaceConfig =
            serde_json::from_str(text).map_err(|e| LabError::InvalidModel(e.to_string()))?;
        Self::from_config(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.config).expect("serializable config")
    }

    pub fn perturbation(&self) -> &[Bump] {
        &self.config.perturbation
    }

    pub fn word_budget(&self) -> usize {
        self.config.word_budget
    }

    pub fn offset(&self) -> f64 {
        self.config.offset
    }

    /// `true` when `φ` is constant, so the metric has constant curvature.
    pub fn is_constant_curvature(&self) -> bool {
        self.field.is_empty()
    }

    /// Same bumps with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut config = self.config.clone();
        for b in &mut config.perturbation {
            b.amplitude *= factor;
        }
        Self::from_config(config)
    }

    fn from_config(config: SurfaceConfig) -> Result<Self> {
        if !config.offset.is_finite() {
            return Err(LabError::InvalidModel("offset must be finite".into()));
        }
        let grp = octagon();
        if !grp.relator_product().is_identity(1e-8) {
            return Err(LabError::InvalidModel("generators violate the surface relation".into()));
        }
        let field = BumpField::new(&config.perturbation, config.word_budget)?;
        let mut model = Self {
            config,
            field,
            range: CurvatureRange {
                kmin: -1.0,
                kmax: -1.0,
                k0: 1.0,
                k1: 1.0,
            },
            hopf_cache: MemoCache::new(),
        };
        model.range = model.compute_curvature_range();
        if model.range.kmax >= CURVATURE_LIMIT {
            return Err(LabError::MetricRejected {
                kmax: model.range.kmax,
                limit: CURVATURE_LIMIT,
            });
        }
        Ok(model)
    }

    /// `φ` (including the constant offset) as a jet in the given chart coordinate.
    pub(crate) fn phi_jet_c(&self, z: Complex64) -> Result<Jet2> {
        Ok(self.field.jet(z)? + self.config.offset)
    }

    /// `σ = φ + log 2 − log(1 − |z|²)`, so that the metric is `e^{2σ}|dz|²`.
    pub fn sigma_jet(&self, z: Complex64) -> Result<ConformalJet> {
        DiskPoint::check(z.re, z.im)?;
        let (ju, jv) = Jet2::variables(z.re, z.im);
        let hyp = -(1.0 - ju.square() - jv.square()).ln() + std::f64::consts::LN_2;
        Ok(self.phi_jet_c(z)? + hyp)
    }

    pub fn phi(&self, z: &DiskPoint) -> Result<f64> {
        DiskPoint::check(z.u, z.v)?;
        Ok(self.phi_jet_c(z.to_c())?.v)
    }

    /// Hyperbolic Laplacian of `φ`, `(1 − |z|²)²/4 · Δ_euc φ`.
    pub fn hyperbolic_laplacian_phi(&self, z: &DiskPoint) -> Result<f64> {
        DiskPoint::check(z.u, z.v)?;
        let j = self.phi_jet_c(z.to_c())?;
        let w = (1.0 - z.norm_sqr()) / 2.0;
        Ok(w * w * j.laplacian())
    }

    pub fn curvature_at(&self, z: &DiskPoint) -> Result<f64> {
        Ok(curvature_from_sigma(&self.sigma_jet(z.to_c())?))
    }

    pub fn curvature_range(&self) -> CurvatureRange {
        self.range
    }

    fn compute_curvature_range(&self) -> CurvatureRange {
        let base = -(-2.0 * self.config.offset).exp();
        if self.field.is_empty() {
            let k = (-base).sqrt();
            return CurvatureRange {
                kmin: base,
                kmax: base,
                k0: k,
                k1: k,
            };
        }
        let k_at = |z: Complex64| -> f64 {
            self.sigma_jet(z).map(|s| curvature_from_sigma(&s)).unwrap_or(f64::NAN)
        };
        let grp = octagon();
        let mut samples: Vec<(f64, Complex64)> = Vec::new();
        // Coarse polar grid over F.
        let rmax = circumradius();
        for i in 0..=40 {
            let rho = rmax * i as f64 / 40.0;
            let nang = if i == 0 { 1 } else { 96 };
            for k in 0..nang {
                let z = Complex64::from_polar((rho / 2.0).tanh(), std::f64::consts::TAU * k as f64 / nang as f64);
                if grp.contains(z) {
                    samples.push((k_at(z), z));
                }
            }
        }
        // Geodesic polar grids around each bump centre inside F.
        for b in &self.config.perturbation {
            let Ok(c) = DiskPoint::new(b.center[0], b.center[1]) else { continue };
            let Ok(home) = grp.reduce(&c) else { continue };
            let w = home.point.to_c();
            for i in 0..=32 {
                let d = b.radius * i as f64 / 32.0;
                let nang = if i == 0 { 1 } else { 64 };
                for k in 0..nang {
                    let dir = Complex64::from_polar((d / 2.0).tanh(), std::f64::consts::TAU * k as f64 / nang as f64);
                    // translate dir from 0 to w
                    let z = (dir + w) / (Complex64::new(1.0, 0.0) + w.conj() * dir);
                    samples.push((k_at(z), z));
                }
            }
        }
        samples.retain(|s| s.0.is_finite());
        let refine = |start: Complex64, sign: f64| -> f64 {
            // Compass search on sign·K.
            let mut z = start;
            let mut best = sign * k_at(z);
            let mut step = 2e-3;
            while step > 1e-10 {
                let mut moved = false;
                for d in [
                    Complex64::new(step, 0.0),
                    Complex64::new(-step, 0.0),
                    Complex64::new(0.0, step),
                    Complex64::new(0.0, -step),
                ] {
                    let cand = z + d;
                    if cand.norm() >= 0.999 {
                        continue;
                    }
                    let val = sign * k_at(cand);
                    if val > best {
                        best = val;
                        z = cand;
                        moved = true;
                    }
                }
                if !moved {
                    step /= 2.0;
                }
            }
            sign * best
        };
        let mut by_k = samples.clone();
        by_k.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let picks = 6.min(by_k.len());
        let mut kmin = by_k[0].0.min(base);
        let mut kmax = by_k[by_k.len() - 1].0.max(base);
        for s in by_k.iter().take(picks) {
            kmin = kmin.min(refine(s.1, -1.0));
        }
        for s in by_k.iter().rev().take(picks) {
            kmax = kmax.max(refine(s.1, 1.0));
        }
        CurvatureRange {
            kmin,
            kmax,
            k0: (-kmin).max(0.0).sqrt(),
            k1: (-kmax).max(0.0).sqrt(),
        }
    }
}

/// A sum of bumps over their Γ-orbits, evaluable anywhere in the disk.
#[derive(Debug, Clone)]
pub struct BumpField {
    translates: Vec<Translate>,
    direct_radius: f64,
}

impl BumpField {
    /// Each radius must lie below half the systole. `word_budget` caps the
    /// word length searched for translates; a cap that misses one is an error.
    pub fn new(bumps: &[Bump], word_budget: usize) -> Result<Self> {
        if word_budget == 0 {
            return Err(LabError::InvalidModel("word_budget must be positive".into()));
        }
        let grp = octagon();
        let direct_radius = circumradius() + DIRECT_RADIUS_PAD;
        let mut translates = Vec::new();
        for (i, b) in bumps.iter().enumerate() {
            if !(b.radius > 0.0 && b.radius < systole() / 2.0) {
                return Err(LabError::InvalidModel(format!(
                    "bump {i}: radius {} must lie in (0, {:.6})",
                    b.radius,
                    systole() / 2.0
                )));
            }
            if !b.amplitude.is_finite() {
                return Err(LabError::InvalidModel(format!("bump {i}: amplitude must be finite")));
            }
            let centre = DiskPoint::new(b.center[0], b.center[1])
                .map_err(|_| LabError::InvalidModel(format!("bump {i}: centre outside the disk")))?;
            if b.amplitude == 0.0 {
                continue;
            }
            let home = grp.reduce(&centre)?.point.to_c();
            let reach = direct_radius + b.radius;
            let max_cosh = (reach + circumradius()).cosh();
            let t = (b.radius / 2.0).tanh();
            let t2 = t * t;
            let mut local = Vec::new();
            let complete = grp.for_each_in_ball(max_cosh, word_budget, |m, _, _| {
                let g = super::Isometry {
                    a: m[0],
                    b: m[1],
                    c: m[2],
                    d: m[3],
                    word: Vec::new(),
                };
                let c = g.apply_c(home);
                if distance_c(c, Complex64::new(0.0, 0.0)) <= reach {
                    let n2 = c.norm_sqr();
                    let den = 1.0 - t2 * n2;
                    let er = t * (1.0 - n2) / den;
                    local.push(Translate {
                        centre: c,
                        t2,
                        amplitude: b.amplitude,
                        ecentre: c * ((1.0 - t2) / den),
                        eradius2: er * er * (1.0 + 1e-9),
                    });
                }
            });
            if !complete {
                return Err(LabError::InvalidModel(format!(
                    "word_budget {word_budget} cannot reach every translate of bump {i}"
                )));
            }
            translates.extend(local);
        }
        Ok(Self { translates, direct_radius })
    }

    pub fn is_empty(&self) -> bool {
        self.translates.is_empty()
    }

    /// Sum of bump translates at a jet-valued point in the direct zone.
    fn bump_sum(&self, z: CJet2) -> Jet2 {
        let zc = Complex64::new(z.re.v, z.im.v);
        let mut acc = Jet2::constant(0.0);
        for tr in &self.translates {
            if (zc - tr.ecentre).norm_sqr() >= tr.eradius2 {
                continue;
            }
            let (cx, cy) = (tr.centre.re, tr.centre.im);
            let num = (z.re + (-cx)).square() + (z.im + (-cy)).square();
            let den = (1.0 - (z.re * cx + z.im * cy)).square() + (z.im * cx - z.re * cy).square();
            let s = (num / den).scale(1.0 / tr.t2);
            if s.v >= 1.0 {
                continue;
            }
            let w = 1.0 / (1.0 - s.v);
            let f = (1.0 - w).exp();
            let g1 = -w * w;
            let g2 = -2.0 * w * w * w;
            acc = acc + s.compose(f, f * g1, f * (g1 * g1 + g2)).scale(tr.amplitude);
        }
        acc
    }

    /// Value, chart gradient and chart Hessian at `z`.
    pub(crate) fn jet(&self, z: Complex64) -> Result<Jet2> {
        if self.translates.is_empty() {
            return Ok(Jet2::constant(0.0));
        }
        let (ju, jv) = Jet2::variables(z.re, z.im);
        let zj = CJet2 { re: ju, im: jv };
        if distance_c(z, Complex64::new(0.0, 0.0)) <= self.direct_radius {
            return Ok(self.bump_sum(zj));
        }
        // Pull back through the reducing isometry, carried as a jet map.
        let grp = octagon();
        let mut m = [1.0, 0.0, 0.0, 1.0];
        grp.reduce_fast(z, |j| {
            let s = grp.side_matrix(j);
            // accumulate s_j⁻¹ on the left
            let inv = [s[3], -s[1], -s[2], s[0]];
            m = [
                inv[0] * m[0] + inv[1] * m[2],
                inv[0] * m[1] + inv[1] * m[3],
                inv[2] * m[0] + inv[3] * m[2],
                inv[2] * m[1] + inv[3] * m[3],
            ];
        })?;
        let g = super::Isometry {
            a: m[0],
            b: m[1],
            c: m[2],
            d: m[3],
            word: Vec::new(),
        };
        let (alpha, beta) = g.disk_coefficients();
        let w = CJet2::from_c(alpha.re, alpha.im)
            .mul(zj)
            .add(CJet2::from_c(beta.re, beta.im))
            .div(CJet2::from_c(beta.re, -beta.im).mul(zj).add(CJet2::from_c(alpha.re, -alpha.im)));
        Ok(self.bump_sum(w))
    }

    /// Value and chart gradient `(h, h_u, h_v)` at `z`.
    pub fn gradient(&self, z: Complex64) -> Result<[f64; 3]> {
        DiskPoint::check(z.re, z.im)?;
        let j = self.jet(z)?;
        Ok([j.v, j.du, j.dv])
    }
}

/// Gauss curvature `−e^{−2σ} Δσ` of `e^{2σ}|dz|²`.
pub fn curvature_from_sigma(s: &Jet2) -> f64 {
    -(-2.0 * s.v).exp() * s.laplacian()
}
