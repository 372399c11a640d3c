//! Closed geodesics of the unperturbed surface and pressure fits over them.
//!
//! A primitive conjugacy class of hyperbolic elements is a closed geodesic.
//! Every class has representatives whose axis meets `F`, and translating `0`
//! by one of them moves it at most `ℓ + 2R_F`, so a ball enumeration finds all
//! of them. Classes are told apart by cutting sequences: walking the axis
//! from `F` to `gF` and recording each tile transition as a corona index.
//! Conjugates give cyclic rotations of the sequence; the canonical form is
//! the least rotation, minimised over both orientations.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{circumradius, inradius, octagon, reduce_concat, Isometry, Letter, SurfaceModel};

/// Largest supported length cutoff.
pub const MAX_LENGTH: f64 = 12.0;

/// Klein-model step past an exit point when probing the next tile.
const PROBE_ALONG: f64 = 1e-7;
/// Klein-model offset to the left of the axis, which picks a side
/// consistently when an axis runs along tile edges.
const PROBE_LEFT: f64 = 1e-9;
/// Slack of the Klein half-plane tests.
const CLIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedGeodesic {
    /// Cyclically reduced word in `a, b, c, d` (inverses in upper case).
    pub word: String,
    pub length: f64,
    /// `∫_γ r_-`; equals the length when `φ ≡ 0`.
    pub r_minus_integral: f64,
    /// `m` when the class is the `m`-th power of a primitive one.
    pub multiplicity: usize,
    /// Canonical cutting sequence (corona indices).
    pub cutting_sequence: Vec<u8>,
}

impl ClosedGeodesic {
    pub fn primitive_length(&self) -> f64 {
        self.length / self.multiplicity as f64
    }

    pub fn is_primitive(&self) -> bool {
        self.multiplicity == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSpectrum {
    pub max_length: f64,
    /// Sorted by length, then by word.
    pub geodesics: Vec<ClosedGeodesic>,
    /// Elements of `Γ` examined by the ball enumeration.
    pub elements_scanned: usize,
    /// Representatives whose axis meets `F`.
    pub candidates: usize,
    /// Number of unoriented classes counted without cutting sequences, as
    /// `½ Σ_g |axis(g) ∩ F| / ℓ_prim(g)` over the candidates.
    pub class_count_check: f64,
}

impl LengthSpectrum {
    /// `N(L)`: classes of length at most `l`.
    pub fn count_up_to(&self, l: f64) -> usize {
        self.geodesics.partition_point(|g| g.length <= l)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("word,length,length_error,multiplicity\n");
        for g in &self.geodesics {
            out.push_str(&format!("{},{:.12},{:.1e},{}\n", g.word, g.length, 1e-9, g.multiplicity));
        }
        out
    }
}

const LETTERS: [char; 8] = ['a', 'b', 'c', 'd', 'A', 'B', 'C', 'D'];

pub fn format_word(word: &[Letter]) -> String {
    word.iter()
        .map(|l| LETTERS[l.generator as usize + if l.exponent < 0 { 4 } else { 0 }])
        .collect()
}

pub fn parse_word(text: &str) -> Result<Vec<Letter>> {
    text.chars()
        .map(|ch| {
            let k = LETTERS
                .iter()
                .position(|&c| c == ch)
                .ok_or_else(|| LabError::InvalidArgument(format!("bad letter '{ch}' in word")))?;
            Ok(Letter {
                generator: (k % 4) as u8,
                exponent: if k < 4 { 1 } else { -1 },
            })
        })
        .collect()
}

/// Remove inverse pairs across the ends of a freely reduced word.
fn cyclically_reduce(mut w: Vec<Letter>) -> Vec<Letter> {
    while w.len() >= 2 && w[0] == w[w.len() - 1].inverse() {
        w.pop();
        w.remove(0);
    }
    w
}

fn to_klein(z: Complex64) -> Complex64 {
    z * (2.0 / (1.0 + z.norm_sqr()))
}

fn to_poincare(k: Complex64) -> Complex64 {
    k / (1.0 + (1.0 - k.norm_sqr()).max(0.0).sqrt())
}

struct Octagon {
    normals: [Complex64; 8],
    offset: f64,
}

impl Octagon {
    fn new() -> Self {
        let mut normals = [Complex64::new(0.0, 0.0); 8];
        for (j, n) in normals.iter_mut().enumerate() {
            *n = Complex64::from_polar(1.0, j as f64 * std::f64::consts::FRAC_PI_4);
        }
        Self {
            normals,
            offset: inradius().tanh(),
        }
    }

    /// Parameter interval of the Klein chord `a + t(b − a)` inside `F`.
    fn clip(&self, a: Complex64, b: Complex64) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let d = b - a;
        for n in &self.normals {
            let p = a.re * n.re + a.im * n.im;
            let q = d.re * n.re + d.im * n.im;
            let rhs = self.offset + CLIP_TOL - p;
            if q.abs() < 1e-300 {
                if rhs < 0.0 {
                    return None;
                }
            } else if q > 0.0 {
                hi = hi.min(rhs / q);
            } else {
                lo = lo.max(rhs / q);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Index of a side the whole chord segment lies on, if any.
    fn on_side(&self, p: Complex64, q: Complex64) -> bool {
        self.normals.iter().any(|n| {
            let f = |z: Complex64| (z.re * n.re + z.im * n.im - self.offset).abs() < 1e-9;
            f(p) && f(q)
        })
    }
}

/// Boundary fixed points `(repelling, attracting)` of a hyperbolic element.
fn axis_endpoints(g: &Isometry) -> Option<(Complex64, Complex64)> {
    let (alpha, beta) = g.disk_coefficients();
    let disc = beta.norm_sqr() - alpha.im * alpha.im;
    if !(disc > 0.0) || beta.norm_sqr() == 0.0 {
        return None;
    }
    let i = Complex64::new(0.0, 1.0);
    let z1 = (i * alpha.im + disc.sqrt()) / beta.conj();
    let z2 = (i * alpha.im - disc.sqrt()) / beta.conj();
    let scale = |z: Complex64| (beta.conj() * z + alpha.conj()).norm();
    if scale(z1) > scale(z2) {
        Some((z2 / z2.norm(), z1 / z1.norm()))
    } else {
        Some((z1 / z1.norm(), z2 / z2.norm()))
    }
}

fn hyperbolic_klein_distance(p: Complex64, q: Complex64) -> f64 {
    let num = 1.0 - (p.re * q.re + p.im * q.im);
    let den = ((1.0 - p.norm_sqr()) * (1.0 - q.norm_sqr())).sqrt();
    (num / den).max(1.0).acosh()
}

fn same_matrix(m: &Isometry, n: &Isometry) -> bool {
    let scale = m.a.abs().max(m.b.abs()).max(m.c.abs()).max(m.d.abs());
    let tol = 1e-7 * scale.max(1.0);
    let close = |s: f64| (m.a - s * n.a).abs() < tol && (m.b - s * n.b).abs() < tol && (m.c - s * n.c).abs() < tol && (m.d - s * n.d).abs() < tol;
    close(1.0) || close(-1.0)
}

/// Corona index of the tile containing the Klein point `k` (in the frame of
/// the current tile), or `None` if it lies in the current tile itself.
fn tile_of(k: Complex64) -> Result<Option<(usize, Isometry)>> {
    let grp = octagon();
    let z = to_poincare(k);
    let mut h = Isometry::identity();
    grp.reduce_fast(z, |j| h = h.compose(&grp.side_pairings()[j]))?;
    if h.is_identity(1e-9) {
        return Ok(None);
    }
    let m = [h.a, h.b, h.c, h.d];
    let idx = grp
        .corona_index(&m)
        .ok_or_else(|| LabError::Enumeration("probe left the corona of the current tile".into()))?;
    Ok(Some((idx, grp.corona()[idx].clone())))
}

fn rotate_min(seq: &[u8]) -> Vec<u8> {
    (0..seq.len())
        .map(|r| seq[r..].iter().chain(&seq[..r]).copied().collect::<Vec<u8>>())
        .min()
        .unwrap_or_default()
}

/// Cutting sequence of the axis of `g`, which must meet `F`.
fn cutting_sequence(oct: &Octagon, g: &Isometry) -> Result<Vec<u8>> {
    let (mut a, mut b) = axis_endpoints(g).ok_or_else(|| LabError::Enumeration("element is not hyperbolic".into()))?;
    let (t0, t1) = oct
        .clip(a, b)
        .ok_or_else(|| LabError::Enumeration("axis misses the fundamental domain".into()))?;
    let left = |a: Complex64, b: Complex64| {
        let d = (b - a) / (b - a).norm();
        (d, d * Complex64::new(0.0, 1.0))
    };
    // Start tile: the one containing a point just left of the chord midpoint.
    let mut cur = a + (b - a) * (0.5 * (t0 + t1));
    let mut k = Isometry::identity();
    {
        let (_, n) = left(a, b);
        if let Some((_, h)) = tile_of(cur + n * PROBE_LEFT)? {
            let hi = h.inverse();
            a = hi.apply_c(a);
            b = hi.apply_c(b);
            cur = to_klein(hi.apply_c(to_poincare(cur)));
            k = h;
        }
    }
    let target = g.compose(&k);
    let mut seq = Vec::new();
    for _ in 0..4096 {
        let d = b - a;
        let t_cur = ((cur - a).re * d.re + (cur - a).im * d.im) / d.norm_sqr();
        let t_exit = oct.clip(a, b).map_or(t_cur, |(_, hi)| hi.max(t_cur));
        let exit = a + d * t_exit;
        let (dir, n) = left(a, b);
        // Near-degenerate exits (through a vertex, or clipped by rounding)
        // can leave the first probe in the current tile; step further.
        let mut next = None;
        let mut along = PROBE_ALONG;
        for _ in 0..5 {
            next = tile_of(exit + dir * along + n * PROBE_LEFT)?;
            if next.is_some() {
                break;
            }
            along *= 10.0;
        }
        let (idx, h) = next.ok_or_else(|| LabError::Enumeration("cutting-sequence walk made no progress".into()))?;
        seq.push(idx as u8);
        let hi = h.inverse();
        a = hi.apply_c(a);
        b = hi.apply_c(b);
        a /= a.norm();
        b /= b.norm();
        cur = to_klein(hi.apply_c(to_poincare(exit)));
        k = k.compose(&h);
        if same_matrix(&k, &target) {
            return Ok(seq);
        }
    }
    Err(LabError::Enumeration("cutting-sequence walk did not close up".into()))
}

/// Smallest period of a cyclic sequence.
fn period(seq: &[u8]) -> usize {
    let n = seq.len();
    (1..=n)
        .find(|&p| n % p == 0 && (0..n).all(|i| seq[i] == seq[(i + p) % n]))
        .unwrap_or(n)
}

struct Candidate {
    g: Isometry,
    length: f64,
    chord_length: f64,
    on_side: bool,
    axis_key: (i64, i64, i64, i64),
}

fn axis_key(a: Complex64, b: Complex64) -> (i64, i64, i64, i64) {
    let q = |x: f64| (x * 1e7).round() as i64;
    (q(a.re), q(a.im), q(b.re), q(b.im))
}

/// One representative per unoriented conjugacy class of length `≤ lmax`,
/// primitive or not, on the unperturbed surface.
pub fn closed_geodesics(model: &SurfaceModel, lmax: f64) -> Result<LengthSpectrum> {
    if !model.is_constant_curvature() || model.offset() != 0.0 {
        return Err(LabError::InvalidModel("closed geodesics are enumerated only for φ ≡ 0".into()));
    }
    if !(lmax > 0.0) {
        return Err(LabError::InvalidArgument("Lmax must be positive".into()));
    }
    if lmax > MAX_LENGTH {
        return Err(LabError::Enumeration(format!(
            "Lmax = {lmax} exceeds the supported cutoff {MAX_LENGTH}"
        )));
    }
    let grp = octagon();
    let oct = Octagon::new();
    let reach = (lmax + 2.0 * circumradius()).cosh() * (1.0 + 1e-9);
    let max_trace = 2.0 * (lmax / 2.0).cosh() * (1.0 + 1e-12);
    let mut scanned = 0usize;
    let mut candidates: Vec<Candidate> = Vec::new();
    let complete = grp.for_each_in_ball(reach, 64, |m, depth, _| {
        scanned += 1;
        let tr = (m[0] + m[3]).abs();
        if depth == 0 || tr > max_trace || tr <= 2.0 + 1e-9 {
            return;
        }
        let g = Isometry {
            a: m[0],
            b: m[1],
            c: m[2],
            d: m[3],
            word: Vec::new(),
        };
        let Some((a, b)) = axis_endpoints(&g) else {
            return;
        };
        if let Some((t0, t1)) = oct.clip(a, b) {
            let (p, q) = (a + (b - a) * t0, a + (b - a) * t1);
            let chord_length = hyperbolic_klein_distance(p, q);
            // Axes touching F only at a vertex also cross other tiles'
            // interiors, where a conjugate representative picks them up.
            if chord_length < 1e-6 {
                return;
            }
            candidates.push(Candidate {
                length: 2.0 * (tr / 2.0).acosh(),
                chord_length,
                on_side: oct.on_side(p, q),
                axis_key: axis_key(a, b),
                g,
            });
        }
    });
    if !complete {
        return Err(LabError::Enumeration("ball enumeration hit its depth cap".into()));
    }

    // Count check: primitive length from the shortest candidate on each axis.
    let mut shortest: HashMap<(i64, i64, i64, i64), f64> = HashMap::new();
    for c in &candidates {
        let e = shortest.entry(c.axis_key).or_insert(f64::INFINITY);
        *e = e.min(c.length);
    }
    let class_count_check = 0.5
        * candidates
            .iter()
            .map(|c| {
                let w = if c.on_side { 0.5 } else { 1.0 };
                w * c.chord_length / shortest[&c.axis_key]
            })
            .sum::<f64>();

    let mut classes: BTreeMap<Vec<u8>, ClosedGeodesic> = BTreeMap::new();
    for c in &candidates {
        let fwd = cutting_sequence(&oct, &c.g)?;
        let canon = rotate_min(&fwd);
        if classes.contains_key(&canon) {
            continue;
        }
        let bwd = rotate_min(&cutting_sequence(&oct, &c.g.inverse())?);
        if classes.contains_key(&bwd) {
            continue;
        }
        let key = canon.min(bwd);
        let corona = grp.corona();
        let word = key
            .iter()
            .fold(Vec::new(), |w, &i| reduce_concat(&w, &corona[i as usize].word));
        let word = cyclically_reduce(word);
        let rep = grp.evaluate_word(&word);
        let length = rep.translation_length();
        let multiplicity = key.len() / period(&key);
        classes.insert(
            key.clone(),
            ClosedGeodesic {
                word: format_word(&word),
                length,
                r_minus_integral: length,
                multiplicity,
                cutting_sequence: key,
            },
        );
    }
    let mut geodesics: Vec<ClosedGeodesic> = classes.into_values().filter(|g| g.length <= lmax + 1e-9).collect();
    geodesics.sort_by(|x, y| x.length.partial_cmp(&y.length).unwrap().then_with(|| x.word.cmp(&y.word)));
    Ok(LengthSpectrum {
        max_length: lmax,
        geodesics,
        elements_scanned: scanned,
        candidates: candidates.len(),
        class_count_check,
    })
}

/// How orbit sums are turned into a growth rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PressureEstimator {
    /// `log Σ_{ℓ_γ ≤ L} e^{∫_γ ψ}`.
    Cumulative,
    /// `log Σ_{L−w < ℓ_γ ≤ L} ℓ_prim(γ) e^{∫_γ ψ}`, free of the `1/L`
    /// prefactor of the orbit count.
    Window { width: f64 },
}

impl Default for PressureEstimator {
    fn default() -> Self {
        Self::Window { width: 2.0 }
    }
}

/// `L = lmax/2, lmax/2 + ½, …, lmax`.
pub fn default_lgrid(lmax: f64) -> Vec<f64> {
    let n = (lmax / 2.0 / 0.5).floor() as usize;
    (0..=n).map(|i| lmax - 0.5 * (n - i) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureFit {
    pub pressure: f64,
    /// Standard error of the fitted slope.
    pub error: f64,
    pub intercept: f64,
    /// `(L, log S(L))` at every grid point.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares slope of `log S(L)` against `L` over `lgrid`, where `S` is
/// the weighted orbit sum selected by `estimator`.
pub fn pressure(
    geodesics: &[ClosedGeodesic],
    psi_integrals: &[f64],
    lgrid: &[f64],
    estimator: PressureEstimator,
) -> Result<PressureFit> {
    if geodesics.len() != psi_integrals.len() {
        return Err(LabError::InvalidArgument("one ψ integral per geodesic is required".into()));
    }
    if lgrid.len() < 3 {
        return Err(LabError::Fit(format!("need at least 3 grid points, got {}", lgrid.len())));
    }
    let mut pts = Vec::with_capacity(lgrid.len());
    for &l in lgrid {
        let mut s = 0.0;
        for (g, &psi) in geodesics.iter().zip(psi_integrals) {
            let w = match estimator {
                PressureEstimator::Cumulative if g.length <= l => 1.0,
                PressureEstimator::Window { width } if g.length <= l && g.length > l - width => g.primitive_length(),
                _ => continue,
            };
            s += w * psi.exp();
        }
        if !(s > 0.0) {
            return Err(LabError::Fit(format!("empty orbit sum at L = {l}")));
        }
        pts.push((l, s.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if !(sxx > 0.0) {
        return Err(LabError::Fit("grid points must be distinct".into()));
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let rss = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>();
    let error = (rss / (n - 2.0).max(1.0) / sxx).sqrt();
    Ok(PressureFit {
        pressure: slope,
        error,
        intercept,
        points: pts,
    })
}

