use super::*;
use crate::flow::{birkhoff, tangent_map, Observable, DEFAULT_STEP};
use crate::testutil::{perturbed, random_state};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

#[test]
fn jacobi_closed_forms() {
    let m = SurfaceModel::hyperbolic();
    let s = UnitTangentState::new(0.1, -0.2, 0.3).unwrap();
    for &t in &[0.5, 3.0, 8.0] {
        let a = solve_jacobi(&m, &s, 1.0, 1.0, t, DEFAULT_STEP).unwrap();
        assert!((a.y / t.exp() - 1.0).abs() < 1e-10 && (a.ydot / t.exp() - 1.0).abs() < 1e-10);
        let b = solve_jacobi(&m, &s, 1.0, -1.0, t, DEFAULT_STEP).unwrap();
        assert!((b.y / (-t).exp() - 1.0).abs() < 1e-6);
        assert!((b.ydot / (-t).exp() + 1.0).abs() < 1e-6);
    }
}

#[test]
fn wronskian_is_conserved() {
    // Both solutions grow like e^t, so y₁ẏ₂ and y₂ẏ₁ reach ~e^{2t}/4 and their
    // difference carries an absolute rounding error of that size times 1e-16.
    // Up to t = 5 the absolute defect is checked; beyond that the defect is
    // measured against the size of the cancelling products.
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for m in [SurfaceModel::hyperbolic(), perturbed()] {
        let s = random_state(&mut rng);
        for &t in &[1.0, 2.5, 5.0, 10.0, 15.0, 20.0] {
            let a = solve_jacobi(&m, &s, 1.0, 0.0, t, DEFAULT_STEP).unwrap();
            let b = solve_jacobi(&m, &s, 0.0, 1.0, t, DEFAULT_STEP).unwrap();
            let (p, q) = (a.y * b.ydot, b.y * a.ydot);
            let defect = (p - q - 1.0).abs();
            if t <= 5.0 {
                assert!(defect < 1e-8 * t, "t = {t}: |W − 1| = {defect}");
            }
            assert!(defect < 1e-7 * (p.abs() + q.abs()), "t = {t}: |W − 1| = {defect}");
        }
    }
}

#[test]
fn finite_horizon_closed_forms() {
    let m = SurfaceModel::hyperbolic();
    let s = UnitTangentState::new(-0.3, 0.2, 4.0).unwrap();
    for &t in &[0.5, 2.0, 6.0] {
        let r = riccati_finite_horizon(&m, &s, t, DEFAULT_STEP).unwrap();
        assert!((r + coth(t)).abs() < 1e-8, "{r}");
    }
    let r = riccati_finite_horizon(&m, &s, -5.0, DEFAULT_STEP).unwrap();
    assert!((r - coth(5.0)).abs() < 1e-8);
    assert!(riccati_finite_horizon(&m, &s, 0.0, DEFAULT_STEP).is_err());
    // Offset metric: K = −k² with k = e^{−c}.
    let c = 0.3f64;
    let off = SurfaceModel::new(vec![], 6, c).unwrap();
    let k = (-c).exp();
    let r = riccati_finite_horizon(&off, &s, -3.0, DEFAULT_STEP).unwrap();
    assert!((r - k * coth(k * 3.0)).abs() < 1e-8);
}

#[test]
fn finite_horizon_comparison_bounds() {
    let m = perturbed();
    let cr = m.curvature_range();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10 {
        let s = random_state(&mut rng);
        for &t in &[0.5, 2.0, 6.0] {
            let r = riccati_finite_horizon(&m, &s, -t, HOPF_STEP).unwrap();
            let lo = cr.k1 * coth(cr.k1 * t);
            let hi = cr.k0 * coth(cr.k0 * t);
            assert!(lo - 1e-9 <= r && r <= hi + 1e-9, "{lo} ≤ {r} ≤ {hi}");
            let rp = -riccati_finite_horizon(&m, &s, t, HOPF_STEP).unwrap();
            assert!(lo - 1e-9 <= rp && rp <= hi + 1e-9);
        }
    }
}

#[test]
fn hopf_limits_on_hyperbolic_metric() {
    let m = SurfaceModel::hyperbolic();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..20 {
        let s = random_state(&mut rng);
        let r = hopf_r(&m, &s, 1e-6).unwrap();
        assert!((r.r_minus - 1.0).abs() < 1e-6 && (r.r_plus - 1.0).abs() < 1e-6);
        let (um, up) = horocyclic_fields(&m, &s, 1e-6).unwrap();
        assert!(um.sub(&FrameVector::new(0.0, 1.0, -1.0)).norm() < 1e-6);
        assert!(up.sub(&FrameVector::new(0.0, 1.0, 1.0)).norm() < 1e-6);
    }
    // The doubling gap coth T − coth 2T is ≈ 2e^{−2T}.
    let s = UnitTangentState::new(0.0, 0.0, 0.0).unwrap();
    let h = hopf_minus(&m, &s, 1e-6).unwrap();
    let predicted = 2.0 * (-h.horizon).exp();
    assert!(h.error < 2.0 * predicted && h.error > 0.5 * predicted, "{} vs {predicted}", h.error);
    assert!(matches!(hopf_minus(&m, &s, 0.0), Err(LabError::InvalidArgument(_))));
}

#[test]
fn hopf_limits_respect_curvature_bounds() {
    let m = perturbed();
    let cr = m.curvature_range();
    let tol = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..10 {
        let s = random_state(&mut rng);
        let r = hopf_r(&m, &s, tol).unwrap();
        for v in [r.r_minus, r.r_plus] {
            assert!(cr.k1 - tol <= v && v <= cr.k0 + tol, "{} ≤ {v} ≤ {}", cr.k1, cr.k0);
        }
        assert!(r.error_estimate < tol);
    }
}

#[test]
fn error_estimate_decreases_with_horizon() {
    let m = perturbed();
    let s = UnitTangentState::new(0.2, 0.3, 1.0).unwrap();
    let r = |t: f64| riccati_finite_horizon(&m, &s, -t, HOPF_STEP).unwrap();
    let gaps: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|&t| (r(t) - r(2.0 * t)).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn riccati_residuals_are_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let tol = 1e-6;
    for m in [SurfaceModel::hyperbolic(), perturbed()] {
        for _ in 0..10 {
            let s = random_state(&mut rng);
            let (a, b) = riccati_residuals(&m, &s, tol, 1e-3).unwrap();
            assert!(a <= 10.0 * tol && b <= 10.0 * tol, "{a} {b}");
        }
    }
}

#[test]
fn hopf_limit_is_transported_by_the_riccati_equation() {
    let m = perturbed();
    let tol = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for _ in 0..3 {
        let s = random_state(&mut rng);
        let t = 4.0;
        let n = step_count(t, DEFAULT_STEP).unwrap();
        let h = t / n as f64;
        let mut orbit = Orbit::new(&m, s.z(), s.theta);
        let mut x = [hopf_minus(&m, &s, tol).unwrap().value];
        for _ in 0..n {
            let st = orbit.step(h).unwrap();
            rk4_extras(&st, h, &mut x, |st, x, dx| dx[0] = -x[0] * x[0] - st.curvature());
        }
        let end = UnitTangentState::new(orbit.z.re, orbit.z.im, orbit.theta).unwrap();
        let direct = hopf_minus(&m, &end, tol).unwrap().value;
        assert!((direct - x[0]).abs() < 10.0 * tol, "{direct} vs {}", x[0]);
    }
}

#[test]
fn convergence_rate_is_at_least_twice_the_minimal_exponent() {
    let m = perturbed();
    let k1 = m.curvature_range().k1;
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..3 {
        let s = random_state(&mut rng);
        let limit = riccati_finite_horizon(&m, &s, -24.0, HOPF_STEP).unwrap();
        let ts: Vec<f64> = (0..7).map(|i| 2.0 + i as f64).collect();
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| (riccati_finite_horizon(&m, &s, -t, HOPF_STEP).unwrap() - limit).abs().ln())
            .collect();
        let (mt, my) = (ts.iter().sum::<f64>() / 7.0, ys.iter().sum::<f64>() / 7.0);
        let slope = ts.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum::<f64>()
            / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
        assert!(-slope >= 2.0 * k1, "slope {slope} vs 2k1 = {}", 2.0 * k1);
    }
}

#[test]
fn unstable_field_propagation_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    for m in [SurfaceModel::hyperbolic(), perturbed()] {
        let s = random_state(&mut rng);
        let (um, _) = horocyclic_fields(&m, &s, 1e-9).unwrap();
        for &t in &[1.0, 3.0, 5.0] {
            let pushed = tangent_map(&m, &s, t, &um, DEFAULT_STEP).unwrap();
            let end = flow(&m, &s, t, DEFAULT_STEP).unwrap();
            let (um_end, _) = horocyclic_fields(&m, &end, 1e-9).unwrap();
            let growth = birkhoff(&m, &s, &Observable::RMinus, t, DEFAULT_STEP).unwrap().value.exp();
            let want = um_end.scale(growth);
            let rel = pushed.sub(&want).norm() / want.norm();
            assert!(rel < 1e-4, "t = {t}: rel error {rel}");
        }
    }
}

#[test]
fn unstable_field_chart_vector() {
    let m = perturbed();
    let s = UnitTangentState::new(0.1, 0.1, 0.5).unwrap();
    let f = frame_at(&m, &s).unwrap();
    let w = u_minus_chart(&m, &s, 0.9).unwrap();
    let c = f.coefficients(&w);
    assert!(c.sub(&FrameVector::new(0.0, 1.0, -0.9)).norm() < 1e-12);
}

#[test]
fn divergences() {
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    let m = SurfaceModel::hyperbolic();
    for _ in 0..5 {
        let s = random_state(&mut rng);
        assert!(divergence_u_minus(&m, &s, 1e-3).unwrap().abs() < 1e-6);
    }
    let p = perturbed();
    for _ in 0..5 {
        let s = random_state(&mut rng);
        let d = frame_divergences(&p, &s).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-14));
        assert!(divergence_u_minus(&p, &s, 1e-3).unwrap().is_finite());
    }
    assert!(divergence_u_minus(&m, &UnitTangentState::new(0.0, 0.0, 0.0).unwrap(), 0.0).is_err());
}

