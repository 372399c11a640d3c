//! The surface group of the regular octagon.
//!
//! Side `j` of the Dirichlet domain `F` centred at 0 faces the direction
//! `jπ/4`; the pairing `s_j` maps the opposite side `j + 4` onto side `j`, so
//! `s_{j+4} = s_j⁻¹` and `s_j(0)` is the centre of the neighbouring tile
//! across side `j`. Group words are written in the commutator basis
//! `a = s3 s6, b = s1 s6, c = s0, d = s3 s6 s1`, which satisfies
//! `[a,b][c,d] = 1`.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::isometry::{reduce_concat, Isometry, Letter};
use super::{circumradius, inradius, DiskPoint};
use crate::error::{LabError, Result};

/// Number of tiles meeting `F` in at least a vertex, excluding `F` itself.
pub const CORONA_SIZE: usize = 48;

/// Slack on the Dirichlet inequalities when deciding membership in `F`.
const DOMAIN_TOL: f64 = 1e-12;

#[derive(Debug)]
pub struct OctagonGroup {
    sides: Vec<Isometry>,
    generators: Vec<Isometry>,
    centres: [Complex64; 8],
    centre_norm2: f64,
    /// Side pairings as raw `SL(2,R)` matrices for the hot loops.
    side_mats: [[f64; 4]; 8],
    vertices: [Complex64; 8],
    corona: OnceLock<Vec<Isometry>>,
}

/// Result of reducing a point into the fundamental domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub point: DiskPoint,
    /// `isometry · point` recovers the input.
    pub isometry: Isometry,
}

fn letter(g: u8, e: i8) -> Letter {
    Letter {
        generator: g,
        exponent: e,
    }
}

fn mat(g: &Isometry) -> [f64; 4] {
    [g.a, g.b, g.c, g.d]
}

#[inline]
fn mul(m: &[f64; 4], n: &[f64; 4]) -> [f64; 4] {
    [
        m[0] * n[0] + m[1] * n[2],
        m[0] * n[1] + m[1] * n[3],
        m[2] * n[0] + m[3] * n[2],
        m[2] * n[1] + m[3] * n[3],
    ]
}

#[inline]
fn cosh_of(m: &[f64; 4]) -> f64 {
    0.5 * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3])
}

/// The shared group instance.
pub fn octagon() -> &'static OctagonGroup {
    static GROUP: OnceLock<OctagonGroup> = OnceLock::new();
    GROUP.get_or_init(OctagonGroup::build)
}

impl OctagonGroup {
    fn build() -> Self {
        let r = inradius();
        let (a, b, c, d) = (0u8, 1u8, 2u8, 3u8);
        let words: [Vec<Letter>; 8] = [
            vec![letter(c, 1)],
            vec![letter(a, -1), letter(d, 1)],
            vec![letter(b, -1), letter(a, -1), letter(d, 1)],
            vec![letter(a, 1), letter(b, -1), letter(a, -1), letter(d, 1)],
            vec![letter(c, -1)],
            vec![letter(d, -1), letter(a, 1)],
            vec![letter(d, -1), letter(a, 1), letter(b, 1)],
            vec![letter(d, -1), letter(a, 1), letter(b, 1), letter(a, -1)],
        ];
        let quarter = std::f64::consts::FRAC_PI_4;
        let sides: Vec<Isometry> = (0..8)
            .map(|j| {
                let mut s = Isometry::from_disk(
                    Complex64::new(r.cosh(), 0.0),
                    Complex64::from_polar(r.sinh(), j as f64 * quarter),
                    Vec::new(),
                );
                s.word = words[j].clone();
                s
            })
            .collect();
        let strip = |g: Isometry| Isometry { word: Vec::new(), ..g };
        let ga = strip(sides[3].compose(&sides[6]));
        let gb = strip(sides[1].compose(&sides[6]));
        let gc = strip(sides[0].clone());
        let gd = strip(sides[3].compose(&sides[6]).compose(&sides[1]));
        let mut generators = Vec::with_capacity(8);
        for (k, g) in [ga, gb, gc, gd].into_iter().enumerate() {
            generators.push(Isometry {
                word: vec![letter(k as u8, 1)],
                ..g
            });
        }
        for k in 0..4 {
            let inv = generators[k].inverse();
            generators.push(inv);
        }
        let mut centres = [Complex64::new(0.0, 0.0); 8];
        let mut side_mats = [[0.0; 4]; 8];
        for j in 0..8 {
            centres[j] = sides[j].apply_c(Complex64::new(0.0, 0.0));
            side_mats[j] = mat(&sides[j]);
        }
        let rv = (circumradius() / 2.0).tanh();
        let mut vertices = [Complex64::new(0.0, 0.0); 8];
        for (j, v) in vertices.iter_mut().enumerate() {
            *v = Complex64::from_polar(rv, (j as f64 + 0.5) * quarter);
        }
        Self {
            sides,
            generators,
            centre_norm2: centres[0].norm_sqr(),
            centres,
            side_mats,
            vertices,
            corona: OnceLock::new(),
        }
    }

    /// Side pairings `s_0 .. s_7`.
    pub fn side_pairings(&self) -> &[Isometry] {
        &self.sides
    }

    /// `a, b, c, d, a⁻¹, b⁻¹, c⁻¹, d⁻¹`.
    pub fn generators(&self) -> &[Isometry] {
        &self.generators
    }

    pub fn vertices(&self) -> &[Complex64; 8] {
        &self.vertices
    }

    /// Centres `s_j(0)` of the tiles adjacent to `F` across a side.
    pub fn neighbour_centres(&self) -> &[Complex64; 8] {
        &self.centres
    }

    /// `[a,b][c,d]` evaluated from the generator matrices.
    pub fn relator_product(&self) -> Isometry {
        let g = &self.generators;
        [0, 1, 4, 5, 2, 3, 6, 7]
            .iter()
            .fold(Isometry::identity(), |acc, &k| acc.compose(&g[k]))
    }

    /// Matrix of a word in the generators `a, b, c, d`.
    pub fn evaluate_word(&self, word: &[Letter]) -> Isometry {
        let mut out = Isometry::identity();
        for l in word {
            let k = l.generator as usize + if l.exponent < 0 { 4 } else { 0 };
            out = out.compose(&self.generators[k]);
        }
        out
    }

    /// How far `z` violates the Dirichlet inequality of side `j`.
    #[inline]
    pub fn side_excess(&self, z: Complex64, j: usize) -> f64 {
        z.norm_sqr() * (1.0 - self.centre_norm2) - (z - self.centres[j]).norm_sqr()
    }

    fn worst_side(&self, z: Complex64) -> Option<usize> {
        let mut best = DOMAIN_TOL;
        let mut idx = None;
        for j in 0..8 {
            let e = self.side_excess(z, j);
            if e > best {
                best = e;
                idx = Some(j);
            }
        }
        idx
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.worst_side(z).is_none()
    }

    fn iteration_cap(z: Complex64) -> usize {
        let d = super::distance_c(z, Complex64::new(0.0, 0.0));
        10 * (8 + (d / inradius()).ceil() as usize)
    }

    /// Map `z` into `F`, recording each side crossed. Returns the reduced
    /// coordinate and the rotation `arg((g⁻¹)'(z))` of tangent directions.
    pub(crate) fn reduce_fast(
        &self,
        mut z: Complex64,
        mut on_cross: impl FnMut(usize),
    ) -> Result<(Complex64, f64)> {
        let cap = Self::iteration_cap(z);
        let mut dtheta = 0.0;
        let alpha = self.sides[0].disk_coefficients().0;
        for _ in 0..cap {
            let Some(j) = self.worst_side(z) else {
                return Ok((z, dtheta));
            };
            // s_j⁻¹ has coefficients (ᾱ, −β_j); α is real here.
            let beta = self.sides[j].disk_coefficients().1;
            let den = alpha - beta.conj() * z;
            z = (alpha * z - beta) / den;
            dtheta -= 2.0 * den.arg();
            on_cross(j);
        }
        Err(LabError::Reduction(cap))
    }

    pub fn reduce(&self, z: &DiskPoint) -> Result<Reduction> {
        DiskPoint::check(z.u, z.v)?;
        let mut g = Isometry::identity();
        let (w, _) = self.reduce_fast(z.to_c(), |j| g = g.compose(&self.sides[j]))?;
        Ok(Reduction {
            point: DiskPoint::from_c(w)?,
            isometry: g,
        })
    }

    /// Index of the neighbour `m·s_k` closest to the origin, ties broken
    /// towards the lower index.
    fn canonical_parent(&self, m: &[f64; 4]) -> usize {
        let mut vals = [0.0; 8];
        let mut min = f64::INFINITY;
        for k in 0..8 {
            vals[k] = cosh_of(&mul(m, &self.side_mats[k]));
            min = min.min(vals[k]);
        }
        let thresh = min * (1.0 + 1e-9);
        (0..8).find(|&k| vals[k] <= thresh).unwrap_or(0)
    }

    /// Visit every group element `g` with `cosh d(0, g·0) ≤ max_cosh` exactly
    /// once, as a raw matrix together with its depth in side-pairing letters.
    /// Returns `false` if elements were skipped because of `depth_cap`.
    pub fn for_each_in_ball(
        &self,
        max_cosh: f64,
        depth_cap: usize,
        mut visit: impl FnMut(&[f64; 4], usize, &[u8]),
    ) -> bool {
        let mut complete = true;
        let id = [1.0, 0.0, 0.0, 1.0];
        let mut path: Vec<u8> = Vec::new();
        // Explicit DFS: (matrix, depth, next child to try).
        let mut stack: Vec<([f64; 4], usize, usize)> = vec![(id, 0, 0)];
        visit(&id, 0, &path);
        while let Some(top) = stack.last_mut() {
            let (m, depth, next) = (top.0, top.1, top.2);
            if next == 8 {
                stack.pop();
                path.pop();
                continue;
            }
            top.2 += 1;
            let child = mul(&m, &self.side_mats[next]);
            let c = cosh_of(&child);
            if c > max_cosh || c <= cosh_of(&m) {
                continue;
            }
            if self.canonical_parent(&child) != (next + 4) % 8 {
                continue;
            }
            if depth + 1 > depth_cap {
                complete = false;
                continue;
            }
            path.push(next as u8);
            visit(&child, depth + 1, &path);
            stack.push((child, depth + 1, 0));
        }
        complete
    }

    /// All group elements within `cosh d(0, g·0) ≤ max_cosh`, with words.
    pub fn ball(&self, max_cosh: f64, depth_cap: usize) -> Result<Vec<Isometry>> {
        let mut out = Vec::new();
        let complete = self.for_each_in_ball(max_cosh, depth_cap, |m, _, path| {
            let word = path
                .iter()
                .fold(Vec::new(), |w, &j| reduce_concat(&w, &self.sides[j as usize].word));
            out.push(Isometry {
                a: m[0],
                b: m[1],
                c: m[2],
                d: m[3],
                word,
            });
        });
        if !complete {
            return Err(LabError::Enumeration(format!(
                "word budget {depth_cap} too small for the ball of cosh-radius {max_cosh:.3}"
            )));
        }
        Ok(out)
    }

    /// The tiles `hF ≠ F` sharing at least a vertex with `F`, ordered by
    /// distance and then by the angle of `h·0`.
    pub fn corona(&self) -> &[Isometry] {
        self.corona.get_or_init(|| {
            let reach = (2.0 * circumradius()).cosh() * (1.0 + 1e-9);
            let mut out: Vec<Isometry> = self
                .ball(reach, 16)
                .expect("corona ball")
                .into_iter()
                .filter(|h| !h.is_identity(1e-9))
                .filter(|h| {
                    self.vertices.iter().any(|&v| {
                        let hv = h.apply_c(v);
                        self.vertices.iter().any(|&w| (hv - w).norm() < 1e-9)
                    })
                })
                .collect();
            out.sort_by(|g, h| {
                let key = |x: &Isometry| {
                    let c = x.apply_c(Complex64::new(0.0, 0.0));
                    ((x.cosh_displacement() * 1e6).round(), c.arg().rem_euclid(std::f64::consts::TAU))
                };
                key(g).partial_cmp(&key(h)).unwrap()
            });
            out
        })
    }

    /// Index in [`corona`](Self::corona) of the element matching `h`.
    pub fn corona_index(&self, h: &[f64; 4]) -> Option<usize> {
        self.corona().iter().position(|g| {
            let m = mat(g);
            (0..4).all(|i| (m[i] - h[i]).abs() < 1e-6) || (0..4).all(|i| (m[i] + h[i]).abs() < 1e-6)
        })
    }

    /// Raw matrices of the side pairings.
    pub(crate) fn side_matrix(&self, j: usize) -> &[f64; 4] {
        &self.side_mats[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relator_is_identity() {
        let p = octagon().relator_product();
        assert!(p.is_identity(1e-8), "{p:?}");
        // The opposite-side pairings satisfy their own cyclic relation.
        let s = octagon().side_pairings();
        let q = (0..8).fold(Isometry::identity(), |acc, k| acc.compose(&s[(3 * k) % 8]));
        assert!(q.is_identity(1e-8));
    }

    #[test]
    fn pairings_map_opposite_sides() {
        let g = octagon();
        for j in 0..8 {
            assert!(g.side_pairings()[j].compose(&g.side_pairings()[(j + 4) % 8]).is_identity(1e-12));
            // midpoint of side j+4 goes to the midpoint of side j
            let t = (inradius() / 2.0).tanh();
            let angle = j as f64 * std::f64::consts::FRAC_PI_4;
            let m_opp = Complex64::from_polar(t, angle + std::f64::consts::PI);
            let m = Complex64::from_polar(t, angle);
            assert!((g.side_pairings()[j].apply_c(m_opp) - m).norm() < 1e-12);
        }
    }

    #[test]
    fn interior_points_reduce_to_themselves() {
        let z = DiskPoint::new(0.2, -0.1).unwrap();
        let r = octagon().reduce(&z).unwrap();
        assert_eq!(r.point, z);
        assert!(r.isometry.is_identity(0.0));
    }

    #[test]
    fn reduction_recovers_translated_points() {
        let grp = octagon();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Oracle: brute-force search over words of length ≤ 2 in the generators.
        let gens = grp.generators();
        let mut words = vec![Isometry::identity()];
        for g in gens {
            words.push(g.clone());
            for h in gens {
                words.push(g.compose(h));
            }
        }
        for _ in 0..50 {
            let z0 = loop {
                let w = Complex64::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
                if grp.contains(w) && w.norm() < 0.6 {
                    break w;
                }
            };
            let a = &gens[rng.gen_range(0..8)];
            let z = DiskPoint::from_c(a.apply_c(z0)).unwrap();
            let red = grp.reduce(&z).unwrap();
            assert!((red.point.to_c() - z0).norm() < 1e-9);
            let found = words.iter().find(|w| (w.apply_c(z0) - z.to_c()).norm() < 1e-9).unwrap();
            assert!(found.approx_eq(&red.isometry, 1e-8) || (red.isometry.apply_c(z0) - z.to_c()).norm() < 1e-9);
            assert!((red.isometry.apply_c(red.point.to_c()) - z.to_c()).norm() < 1e-9);
            let again = grp.reduce(&red.point).unwrap();
            assert_eq!(again.point, red.point);
            assert!(grp.evaluate_word(&red.isometry.word).approx_eq(&red.isometry, 1e-8));
        }
    }

    #[test]
    fn corona_has_forty_eight_tiles() {
        let c = octagon().corona();
        assert_eq!(c.len(), CORONA_SIZE);
        let sides = c.iter().filter(|h| (h.cosh_displacement() - (2.0 * inradius()).cosh()).abs() < 1e-6);
        assert_eq!(sides.count(), 8);
    }

    #[test]
    fn ball_counts_match_area_growth() {
        // Tiles have area 4π; a disc of radius R has area 2π(cosh R − 1).
        let r: f64 = 9.0;
        let mut n = 0usize;
        assert!(octagon().for_each_in_ball(r.cosh(), 64, |_, _, _| n += 1));
        let expected = (r.cosh() - 1.0) / 2.0;
        let ratio = n as f64 / expected;
        assert!((0.8..1.2).contains(&ratio), "{n} vs {expected}");
        // No element is visited twice.
        let mut pts: Vec<(i64, i64)> = Vec::new();
        octagon().for_each_in_ball(6f64.cosh(), 64, |m, _, _| {
            let g = Isometry { a: m[0], b: m[1], c: m[2], d: m[3], word: vec![] };
            let p = g.apply_c(Complex64::new(0.0, 0.0));
            pts.push(((p.re * 1e9).round() as i64, (p.im * 1e9).round() as i64));
        });
        let total = pts.len();
        pts.sort();
        pts.dedup();
        assert_eq!(pts.len(), total);
    }
}
