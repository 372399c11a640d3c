//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any of them does.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use horolab::flow::{birkhoff, flow, tangent_map, trajectory, FrameVector, Observable, UnitTangentState, DEFAULT_STEP};
use horolab::geometry::{systole, Bump, SurfaceModel};
use horolab::intertwining::{commutator_report, intertwine, skew_adjoint_check};
use horolab::rates::{
    band_report, closed_geodesics, default_lgrid, expansion_rates, liouville_ensemble, pressure, v_max, PressureEstimator,
    ENSEMBLE_STEP,
};
use horolab::resolvent::{
    alpha_v, curvature_threshold, defining_identity_residual, resolvent_apply, PotentialSpec, ResolventParams, TestFunction,
};
use horolab::riccati::{divergence_u_minus, hopf_minus, hopf_r, horocyclic_fields, r_minus_at_horizon, r_plus_at_horizon};

type Outcome = Result<String, String>;

fn perturbed() -> SurfaceModel {
    SurfaceModel::new(
        vec![
            Bump { center: [0.1, 0.05], radius: 1.2, amplitude: 0.05 },
            Bump { center: [-0.3, 0.4], radius: 1.0, amplitude: 0.03 },
        ],
        6,
        0.0,
    )
    .unwrap()
}

fn models() -> [(&'static str, SurfaceModel); 2] {
    [("hyperbolic", SurfaceModel::hyperbolic()), ("perturbed", perturbed())]
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let e = start.elapsed();
    ensure(e < limit, || format!("runtime {:.1}s exceeds {:.0}s", e.as_secs_f64(), limit.as_secs_f64()))
}

fn lab<T>(r: horolab::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn riccati_closed_forms() -> Outcome {
    let start = Instant::now();
    let m = SurfaceModel::hyperbolic();
    let mut worst = 0.0f64;
    let mut ratio = (f64::INFINITY, 0.0f64);
    for s in liouville_ensemble(&m, 100, 101) {
        for t in [0.5f64, 1.0, 2.0, 4.0, 8.0] {
            let want = 1.0 / t.tanh();
            for r in [lab(r_minus_at_horizon(&m, &s, t))?, lab(r_plus_at_horizon(&m, &s, t))?] {
                worst = worst.max((r - want).abs());
            }
        }
        let v = lab(hopf_r(&m, &s, 1e-6))?;
        worst = worst.max((v.r_minus - 1.0).abs()).max((v.r_plus - 1.0).abs());
        // the gap is coth(T/2) − coth T ≈ 2e^{−T} at the returned horizon T
        let h = lab(hopf_minus(&m, &s, 1e-6))?;
        let q = h.error / (2.0 * (-h.horizon).exp());
        ratio = (ratio.0.min(q), ratio.1.max(q));
    }
    ensure(worst <= 1e-6, || format!("max |r − closed form| = {worst:.2e}"))?;
    ensure(ratio.0 >= 0.5 && ratio.1 <= 2.0, || format!("gap / prediction in [{:.3}, {:.3}]", ratio.0, ratio.1))?;
    within(start, Duration::from_secs(10))?;
    Ok(format!("max error {worst:.1e}, gap ratio in [{:.3}, {:.3}]", ratio.0, ratio.1))
}

fn unstable_propagation() -> Outcome {
    let start = Instant::now();
    let mut detail = Vec::new();
    for ((name, m), tol) in models().into_iter().zip([1e-4, 1e-3]) {
        let mut worst = 0.0f64;
        for s in liouville_ensemble(&m, 10, 202) {
            let (um, _) = lab(horocyclic_fields(&m, &s, 1e-9))?;
            for k in 1..=10 {
                let t = 0.5 * k as f64;
                let pushed = lab(tangent_map(&m, &s, t, &um, DEFAULT_STEP))?;
                let end = lab(flow(&m, &s, t, DEFAULT_STEP))?;
                let (um_end, _) = lab(horocyclic_fields(&m, &end, 1e-9))?;
                let growth = lab(birkhoff(&m, &s, &Observable::RMinus, t, DEFAULT_STEP))?.value.exp();
                let want: FrameVector = um_end.scale(growth);
                worst = worst.max(pushed.sub(&want).norm() / want.norm());
            }
        }
        ensure(worst <= tol, || format!("{name}: relative error {worst:.2e} > {tol:.0e}"))?;
        detail.push(format!("{name} {worst:.1e}"));
    }
    within(start, Duration::from_secs(60))?;
    Ok(detail.join(", "))
}

fn commutator() -> Outcome {
    let mut detail = Vec::new();
    for (name, m) in models() {
        let pts = liouville_ensemble(&m, 200, 303);
        let r = lab(commutator_report(&m, &pts, 1e-3, 1e-3))?;
        let worst = r.points.iter().fold(0.0f64, |a, p| a.max(p.abs_residual));
        ensure(r.passed(), || format!("{name}: max residual {worst:.2e}"))?;
        detail.push(format!("{name} {worst:.1e}"));
    }
    Ok(detail.join(", "))
}

fn klingenberg_sandwich() -> Outcome {
    let mut detail = Vec::new();
    for (name, m) in models() {
        let cr = m.curvature_range();
        let (lo, hi) = (cr.k1 - 0.02, cr.k0 + 0.02);
        let (mut seen_lo, mut seen_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in liouville_ensemble(&m, 500, 404) {
            let rec = lab(trajectory(&m, &s, 50.0, ENSEMBLE_STEP, 10, None))?;
            let ints = &rec.integrals["r_minus"];
            for (t, i) in rec.times.iter().zip(ints) {
                if *t >= 5.0 - 1e-9 {
                    let rate = i / t;
                    seen_lo = seen_lo.min(rate);
                    seen_hi = seen_hi.max(rate);
                }
            }
        }
        ensure(seen_lo >= lo && seen_hi <= hi, || {
            format!("{name}: rates [{seen_lo:.4}, {seen_hi:.4}] outside [{lo:.4}, {hi:.4}]")
        })?;
        detail.push(format!("{name} [{seen_lo:.4}, {seen_hi:.4}] ⊂ [{lo:.4}, {hi:.4}]"));
    }
    Ok(detail.join(", "))
}

fn rates() -> Outcome {
    let h = lab(expansion_rates(&SurfaceModel::hyperbolic(), 200, 50.0, 5, ENSEMBLE_STEP))?;
    let dev = (h.mu_min.value - 1.0).abs().max((h.mu_max.value - 1.0).abs());
    ensure(dev <= 1e-3, || format!("hyperbolic rates deviate from 1 by {dev:.2e}"))?;
    ensure(h.fekete_monotone, || "hyperbolic window extremes are not monotone".into())?;
    let p = lab(expansion_rates(&perturbed(), 200, 50.0, 5, ENSEMBLE_STEP))?;
    ensure(p.fekete_monotone, || format!("perturbed window extremes are not monotone: {:?}", p.windows))?;
    Ok(format!(
        "hyperbolic |μ − 1| = {dev:.1e}; perturbed μ ∈ [{:.4}, {:.4}]",
        p.mu_min.value, p.mu_max.value
    ))
}

fn spectrum_and_pressure() -> Outcome {
    let start = Instant::now();
    let want = 2.0 * (1.0 + 2f64.sqrt()).acosh();
    let spec = lab(closed_geodesics(&SurfaceModel::hyperbolic(), 12.0))?;
    let shortest = spec.geodesics.first().ok_or("empty spectrum")?.length;
    ensure((shortest - want).abs() <= 1e-6 && (systole() - want).abs() <= 1e-6, || {
        format!("systole {shortest} vs {want}")
    })?;
    let g = &spec.geodesics;
    let grid = default_lgrid(12.0);
    let fit = |w: f64| {
        let ints: Vec<f64> = g.iter().map(|x| w * x.r_minus_integral).collect();
        lab(pressure(g, &ints, &grid, PressureEstimator::default()))
    };
    let p0 = fit(0.0)?;
    let pr = fit(-1.0)?;
    ensure((0.9..=1.1).contains(&p0.pressure), || format!("Pr(0) = {:.4}", p0.pressure))?;
    ensure((-0.1..=0.1).contains(&pr.pressure), || format!("Pr(−r_-) = {:.4}", pr.pressure))?;
    within(start, Duration::from_secs(300))?;
    Ok(format!(
        "systole {shortest:.9}, Pr(0) = {:.4} ± {:.4}, Pr(−r_-) = {:.4} ± {:.4}",
        p0.pressure, p0.error, pr.pressure, pr.error
    ))
}

fn resolvent() -> Outcome {
    let mut worst_closed = 0.0f64;
    let mut worst_def = 0.0f64;
    let f = TestFunction::random(7).observable();
    for (_, m) in models() {
        let pts = liouville_ensemble(&m, 5, 707);
        for s in &pts {
            for lambda in [c(2.5, 0.0), c(2.5, 1.0), c(0.7, -2.0)] {
                let r = lab(resolvent_apply(&m, &Observable::One, &PotentialSpec::Zero, &ResolventParams::new(lambda, 0.0), s))?;
                worst_closed = worst_closed.max((r.value + 1.0 / lambda).norm());
                let cst = 0.3;
                let p = ResolventParams::new(lambda, cst);
                let r = lab(resolvent_apply(&m, &Observable::One, &PotentialSpec::Constant(cst), &p, s))?;
                worst_closed = worst_closed.max((r.value + 1.0 / (lambda - cst)).norm());
            }
        }
        for s in &pts[..3] {
            let th = curvature_threshold(&m, &PotentialSpec::RMinus).ok_or("no threshold")?;
            let cases = [
                (PotentialSpec::RMinus, ResolventParams::new(c(2.0, 0.0), th)),
                (PotentialSpec::Zero, ResolventParams::new(c(1.5, 1.0), 0.0)),
            ];
            for (v, p) in &cases {
                worst_def = worst_def.max(lab(defining_identity_residual(&m, &f, v, p, s, 1e-3))?);
            }
        }
    }
    ensure(worst_closed <= 1e-6, || format!("closed forms off by {worst_closed:.2e}"))?;
    ensure(worst_def <= 1e-3, || format!("defining identity residual {worst_def:.2e}"))?;

    // R(λ₁) − R(λ₂) = (λ₁ − λ₂)R(λ₁)R(λ₂) applied to 1
    let m = Arc::new(SurfaceModel::hyperbolic());
    let s = UnitTangentState::new(-0.1, 0.3, 1.0).unwrap();
    let (l1, l2) = (c(2.0, 0.5), c(3.0, 0.0));
    let (p1, p2) = (ResolventParams::new(l1, 0.0), ResolventParams::new(l2, 0.0));
    let r1 = lab(resolvent_apply(&m, &Observable::One, &PotentialSpec::Zero, &p1, &s))?.value;
    let r2 = lab(resolvent_apply(&m, &Observable::One, &PotentialSpec::Zero, &p2, &s))?.value;
    let part = |im: bool| {
        let mm = m.clone();
        let inner = Observable::custom(move |x| {
            resolvent_apply(&mm, &Observable::One, &PotentialSpec::Zero, &p2, x)
                .map_or(f64::NAN, |r| if im { r.value.im } else { r.value.re })
        });
        lab(resolvent_apply(&m, &inner, &PotentialSpec::Zero, &p1, &s)).map(|r| r.value)
    };
    let nested = part(false)? + Complex64::i() * part(true)?;
    let gap = (r1 - r2 - (l1 - l2) * nested).norm();
    ensure(gap <= 1e-8, || format!("resolvent identity residual {gap:.2e}"))?;
    Ok(format!("closed forms {worst_closed:.1e}, defining identity {worst_def:.1e}, λ-identity {gap:.1e}"))
}

fn alpha() -> Outcome {
    let h = SurfaceModel::hyperbolic();
    let mut worst0 = 0.0f64;
    for s in liouville_ensemble(&h, 50, 808) {
        let a = lab(alpha_v(&h, &PotentialSpec::RMinus, &s, 1e-6))?.value;
        let d = lab(divergence_u_minus(&h, &s, 1e-7))?;
        worst0 = worst0.max(a.abs()).max(d.abs());
    }
    ensure(worst0 <= 1e-6, || format!("hyperbolic α, div reach {worst0:.2e}"))?;
    let m = perturbed();
    let mut worst = 0.0f64;
    for s in liouville_ensemble(&m, 50, 809) {
        let a = lab(alpha_v(&m, &PotentialSpec::RMinus, &s, 1e-6))?.value;
        let d = lab(divergence_u_minus(&m, &s, 1e-7))?;
        worst = worst.max((a - d).abs());
    }
    ensure(worst <= 1e-2, || format!("perturbed |α − div| = {worst:.2e}"))?;
    Ok(format!("hyperbolic max {worst0:.1e}, perturbed |α − div| ≤ {worst:.1e}"))
}

fn intertwining() -> Outcome {
    let start = Instant::now();
    let f = TestFunction::random(99);
    let mut detail = Vec::new();
    for ((name, m), tol) in models().into_iter().zip([1e-2, 3e-2]) {
        let rates = lab(expansion_rates(&m, 200, 50.0, 9, ENSEMBLE_STEP))?;
        let mu = rates.mu_max.value + rates.mu_max.error;
        let vm = lab(v_max(&m, &PotentialSpec::RMinus, 200, 50.0, 9, ENSEMBLE_STEP))?.v_max;
        let pts = liouville_ensemble(&m, 20, 909);
        let mut worst = 0.0f64;
        for (v, th) in [(PotentialSpec::Zero, mu), (PotentialSpec::RMinus, mu + vm)] {
            for lambda in [c(2.5, 0.0), c(2.5, 1.0)] {
                let p = ResolventParams::new(lambda, th);
                let r = lab(intertwine(&m, &f, &v, &pts, &p, tol))?;
                ensure(r.passed(), || format!("{name} {v:?} λ = {lambda}: {:.2e}", r.max_rel_residual))?;
                worst = worst.max(r.max_rel_residual);
                if lambda.im == 0.0 {
                    let d = lab(intertwine(&m, &f, &v, &pts, &p.with_t_trunc(2.0 * p.t_trunc), tol))?;
                    for (x, y) in r.points.iter().zip(&d.points) {
                        ensure(y.abs_residual <= x.abs_residual + x.budget.total() + y.budget.total(), || {
                            format!("{name} {v:?}: residual grew under doubling, {:.2e} → {:.2e}", x.abs_residual, y.abs_residual)
                        })?;
                    }
                }
            }
        }
        detail.push(format!("{name} {worst:.1e}"));
    }
    within(start, Duration::from_secs(600))?;
    Ok(format!("max rel residual: {}", detail.join(", ")))
}

fn skew_adjointness() -> Outcome {
    let mut detail = Vec::new();
    for (name, m) in models() {
        let mut worst = 0.0f64;
        for k in 0..5u64 {
            let (f, g) = (TestFunction::random(1000 + 2 * k), TestFunction::random(1001 + 2 * k));
            let r = lab(skew_adjoint_check(&m, &f, &g, 1_000_000, 10 + k))?;
            ensure(r.passed && r.samples >= 1_000_000, || format!("{name} pair {k}: {r:?}"))?;
            worst = worst.max(r.estimate / r.std_error);
        }
        detail.push(format!("{name} max {worst:.2}σ"));
    }
    Ok(detail.join(", "))
}

fn band() -> Outcome {
    let b = lab(band_report(1.0, 1.0, 0.05, 0.0))?;
    ensure(b.band == [-0.55, -0.45], || format!("band {:?}", b.band))?;
    ensure(b.sobolev_exponent == -0.55, || format!("sobolev exponent {}", b.sobolev_exponent))?;
    ensure(b.pinching_2 && b.pinching_3, || "pinching flags".into())?;
    Ok(format!("band {:?}, exponent {}", b.band, b.sobolev_exponent))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("constant-curvature Riccati", riccati_closed_forms),
        ("unstable field propagation", unstable_propagation),
        ("commutator", commutator),
        ("Klingenberg sandwich", klingenberg_sandwich),
        ("expansion rates", rates),
        ("length spectrum and pressure", spectrum_and_pressure),
        ("resolvent closed forms", resolvent),
        ("alpha consistency", alpha),
        ("intertwining", intertwining),
        ("skew-adjointness", skew_adjointness),
        ("band report", band),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS {name} ({secs:.1}s): {d}", i + 1),
            Err(e) => {
                println!("criterion {:>2} FAIL {name} ({secs:.1}s): {e}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
