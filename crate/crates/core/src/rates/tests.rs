use std::sync::OnceLock;

use super::*;
use crate::testutil::perturbed;

fn spectrum12() -> &'static LengthSpectrum {
    static S: OnceLock<LengthSpectrum> = OnceLock::new();
    S.get_or_init(|| closed_geodesics(&SurfaceModel::hyperbolic(), 12.0).unwrap())
}

#[test]
fn rates_on_hyperbolic_metric() {
    let r = expansion_rates(&SurfaceModel::hyperbolic(), 20, 16.0, 1, ENSEMBLE_STEP).unwrap();
    assert!((r.mu_min.value - 1.0).abs() < 1e-3 && (r.mu_max.value - 1.0).abs() < 1e-3);
    assert!(r.fekete_monotone);
    assert_eq!(r.windows.last().unwrap().length, 16.0);
    assert!(expansion_rates(&SurfaceModel::hyperbolic(), 20, 5.0, 1, ENSEMBLE_STEP).is_err());
    assert!(expansion_rates(&SurfaceModel::hyperbolic(), 0, 20.0, 1, ENSEMBLE_STEP).is_err());
}

#[test]
fn rates_on_perturbed_metric() {
    let m = perturbed();
    let cr = m.curvature_range();
    let a = expansion_rates(&m, 40, 20.0, 7, ENSEMBLE_STEP).unwrap();
    let b = expansion_rates(&m, 40, 40.0, 7, ENSEMBLE_STEP).unwrap();
    for r in [&a, &b] {
        assert!(r.mu_min.value <= r.mu_max.value);
        assert!(r.mu_min.value >= cr.k1 - 0.02 && r.mu_max.value <= cr.k0 + 0.02);
        assert!(r.fekete_monotone);
    }
    // Doubling T moves each extreme inward by no more than the error bar.
    assert!((b.mu_min.value - a.mu_min.value).abs() <= a.mu_min.error + b.mu_min.error, "{a:?} {b:?}");
    assert!((b.mu_max.value - a.mu_max.value).abs() <= a.mu_max.error + b.mu_max.error, "{a:?} {b:?}");
    assert!(a.mu_max.value > a.mu_min.value, "perturbation should spread the rates");
}

#[test]
fn ensembles_are_deterministic_and_in_the_domain() {
    let m = perturbed();
    let a = liouville_ensemble(&m, 50, 3);
    assert_eq!(a, liouville_ensemble(&m, 50, 3));
    assert_ne!(a, liouville_ensemble(&m, 50, 4));
    assert!(a.iter().all(|s| octagon().contains(s.z())));
}

#[test]
fn liouville_sampling_matches_area() {
    // The fraction of hyperbolic area of F inside the disc of radius ρ about
    // the centre is 2π(cosh ρ − 1)/(4π) when that disc lies inside F.
    let rho = crate::geometry::inradius();
    let n = 20000;
    let s = liouville_ensemble(&SurfaceModel::hyperbolic(), n, 9);
    let inside = s.iter().filter(|x| x.base.distance(&DiskPoint::origin()) < rho).count() as f64 / n as f64;
    let want = (rho.cosh() - 1.0) / 2.0;
    let se = (want * (1.0 - want) / n as f64).sqrt();
    assert!((inside - want).abs() < 4.0 * se, "{inside} vs {want}");
}

#[test]
fn backward_potential_averages() {
    let h = SurfaceModel::hyperbolic();
    let zero = v_max(&h, &PotentialSpec::Zero, 10, 10.0, 2, ENSEMBLE_STEP).unwrap();
    assert_eq!(zero.v_max, 0.0);
    let c = v_max(&h, &PotentialSpec::Constant(0.37), 10, 10.0, 2, ENSEMBLE_STEP).unwrap();
    assert!((c.v_max - 0.37).abs() < 1e-9);
    let r = v_max(&h, &PotentialSpec::RMinus, 10, 10.0, 2, ENSEMBLE_STEP).unwrap();
    assert!((r.v_max - 1.0).abs() < 1e-3);
    assert!(r.w_max.abs() < 1e-3);
    let p = perturbed();
    for v in [PotentialSpec::Zero, PotentialSpec::RMinus, PotentialSpec::HalfRMinus] {
        let rep = v_max(&p, &v, 20, 20.0, 5, ENSEMBLE_STEP).unwrap();
        assert!(rep.bound_holds, "{v:?}: {rep:?}");
    }
}

#[test]
fn band_report_examples() {
    let b = band_report(1.0, 1.0, 0.05, 0.0).unwrap();
    assert!((b.band[0] + 0.55).abs() < 1e-15 && (b.band[1] + 0.45).abs() < 1e-15);
    assert!(b.pinching_2 && b.pinching_3);
    assert!((b.sobolev_exponent + 0.55).abs() < 1e-15);
    assert_eq!(b.gamma.gamma0_plus, -0.5);
    assert_eq!(b.gamma.gamma1_minus, -1.5);
    assert!(!band_report(1.0, 2.5, 0.05, 0.0).unwrap().pinching_2);
    let c = band_report(1.0, 2.9, 0.05, 0.0).unwrap();
    assert!(c.pinching_3);
    assert_eq!(c.gamma.gamma1_plus, -1.5);
    assert!((c.gamma.gamma0_minus + 1.45).abs() < 1e-15);
    assert!(c.gamma.gamma1_plus < c.gamma.gamma0_minus);
    assert!(matches!(band_report(0.0, 1.0, 0.05, 0.0), Err(LabError::Domain(_))));
    assert!(band_report(1.0, 0.5, 0.05, 0.0).is_err());
    // V = r_-: κ₀ = ½, so γ_0^+ = ½μ_max.
    let v = band_report(0.8, 1.2, 0.05, 1.0).unwrap();
    assert!((v.gamma.gamma0_plus - 0.6).abs() < 1e-15 && (v.gamma.gamma0_minus - 0.4).abs() < 1e-15);
}

mod band_props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn band_invariants(lo in 0.05f64..3.0, spread in 0.0f64..3.0, eps in 1e-4f64..0.5) {
            let hi = lo + spread;
            let b = band_report(lo, hi, eps, 0.0).unwrap();
            prop_assert!(b.gamma.gamma0_minus <= b.gamma.gamma0_plus);
            prop_assert_eq!(b.gamma.gamma1_plus < b.gamma.gamma0_minus, b.pinching_3);
            prop_assert!(b.band[0] < b.band[1]);
            prop_assert!((b.band[0] - (-hi / 2.0 - eps)).abs() < 1e-12);
            prop_assert!((b.band[1] - (-lo / 2.0 + eps)).abs() < 1e-12);
        }
    }
}

#[test]
fn systole_matches_brute_force() {
    let grp = octagon();
    let gens = grp.generators();
    let mut best = f64::INFINITY;
    let mut words = vec![Isometry::identity()];
    for _ in 0..4 {
        let mut next = Vec::new();
        for w in &words {
            for g in gens {
                let h = w.compose(g);
                if !h.is_identity(1e-9) {
                    best = best.min(h.translation_length());
                }
                next.push(h);
            }
        }
        words = next;
    }
    let s = closed_geodesics(&SurfaceModel::hyperbolic(), 8.0).unwrap();
    let first = &s.geodesics[0];
    assert!((first.length - best).abs() < 1e-9, "{} vs {best}", first.length);
    assert!((first.length - crate::geometry::systole()).abs() < 1e-6);
    assert!(s.geodesics.iter().all(|g| g.length >= best - 1e-9));
}

use crate::geometry::Isometry;

#[test]
fn spectrum_is_self_consistent() {
    let s = closed_geodesics(&SurfaceModel::hyperbolic(), 9.0).unwrap();
    // Independent class count from chord lengths.
    assert!((s.class_count_check - s.geodesics.len() as f64).abs() < 1e-4, "{}", s.class_count_check);
    let grp = octagon();
    let mut words = std::collections::HashSet::new();
    for g in &s.geodesics {
        let w = parse_word(&g.word).unwrap();
        let m = grp.evaluate_word(&w);
        assert!((m.translation_length() - g.length).abs() < 1e-9);
        let inv = grp.evaluate_word(&m.inverse().word);
        assert!((inv.translation_length() - g.length).abs() < 1e-9);
        assert!(g.length <= 9.0 + 1e-9);
        assert_eq!(g.r_minus_integral, g.length);
        assert!(words.insert(g.word.clone()));
        assert_eq!(format_word(&w), g.word);
    }
    assert!(s.geodesics.windows(2).all(|p| p[0].length <= p[1].length));
    assert!(s.geodesics.iter().any(|g| !g.is_primitive()));
    for g in s.geodesics.iter().filter(|g| !g.is_primitive()) {
        let root = g.primitive_length();
        assert!(s.geodesics.iter().any(|h| h.is_primitive() && (h.length - root).abs() < 1e-9));
    }
}

#[test]
fn counting_function_follows_the_prime_geodesic_theorem() {
    let s = spectrum12();
    assert_eq!(s.count_up_to(crate::geometry::systole() + 1e-6), 12);
    let grid: Vec<f64> = (6..=12).map(|l| l as f64).collect();
    let counts: Vec<usize> = grid.iter().map(|&l| s.count_up_to(l)).collect();
    assert!(counts.windows(2).all(|p| p[0] <= p[1]));
    let ratio: Vec<f64> = grid.iter().zip(&counts).map(|(l, &n)| (n as f64).ln() / l).collect();
    // Bolza multiplicities make single steps noisy; the trend is upward.
    assert!(ratio.windows(3).all(|p| p[0] < p[2]), "{ratio:?}");
    // N(L) ~ e^L / L, so log(L·N(L)) grows with slope ≈ 1.
    let pts: Vec<(f64, f64)> = grid.iter().zip(&counts).map(|(l, &n)| (*l, (l * n as f64).ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((0.9..1.1).contains(&slope), "{slope}");
    assert!((s.class_count_check - s.geodesics.len() as f64).abs() < 1e-3);
}

#[test]
fn enumeration_preconditions() {
    assert!(matches!(closed_geodesics(&SurfaceModel::hyperbolic(), 13.0), Err(LabError::Enumeration(_))));
    assert!(matches!(closed_geodesics(&perturbed(), 6.0), Err(LabError::InvalidModel(_))));
    assert!(closed_geodesics(&SurfaceModel::hyperbolic(), -1.0).is_err());
}

#[test]
fn pressure_examples() {
    let s = spectrum12();
    let g = &s.geodesics;
    let grid = default_lgrid(12.0);
    let est = PressureEstimator::default();
    let with = |f: &dyn Fn(&ClosedGeodesic) -> f64| pressure(g, &g.iter().map(f).collect::<Vec<_>>(), &grid, est).unwrap();
    let p0 = with(&|_| 0.0);
    assert!((0.9..=1.1).contains(&p0.pressure), "{p0:?}");
    let pr = with(&|g| -g.r_minus_integral);
    assert!((-0.1..=0.1).contains(&pr.pressure), "{pr:?}");
    let ph = with(&|g| -0.5 * g.r_minus_integral);
    assert!((0.4..=0.6).contains(&ph.pressure), "{ph:?}");
    let c = 0.3;
    let pc = with(&|g| c * g.length);
    assert!((pc.pressure - p0.pressure - c).abs() <= pc.error + p0.error, "{} vs {}", pc.pressure, p0.pressure);
    // Monotonicity: −r_- ≤ −½r_- ≤ 0 ≤ c on every orbit.
    assert!(pr.pressure <= ph.pressure + pr.error + ph.error);
    assert!(ph.pressure <= p0.pressure + ph.error + p0.error);
    assert!(p0.pressure <= pc.pressure + p0.error + pc.error);
    assert!(matches!(pressure(g, &vec![0.0; g.len()], &[6.0, 7.0], est), Err(LabError::Fit(_))));
    assert!(pressure(g, &[0.0], &grid, est).is_err());
}

#[test]
fn spectrum_csv() {
    let s = closed_geodesics(&SurfaceModel::hyperbolic(), 4.0).unwrap();
    let csv = s.to_csv();
    assert!(csv.starts_with("word,length,length_error,multiplicity\n"));
    assert_eq!(csv.lines().count(), s.geodesics.len() + 1);
}
