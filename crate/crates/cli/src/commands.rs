use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use horolab::geometry::{octagon, systole, SurfaceModel, CURVATURE_LIMIT};
use horolab::intertwining::{default_identity_tolerance, intertwine, IdentityReport};
use horolab::rates::{
    band_report, closed_geodesics, default_lgrid, expansion_rates, liouville_ensemble, pressure, v_max, PressureEstimator,
    ENSEMBLE_STEP,
};
use horolab::resolvent::{
    batch_csv, resolvent_apply, run_batch, BatchItem, FunctionId, PotentialSpec, ResolventParams, TestFunction,
};
use horolab::riccati::{hopf_r, r_minus_at_horizon, r_plus_at_horizon, DEFAULT_TOL};

use crate::config::ScenarioConfig;
use crate::Failure;

pub struct Context {
    pub config: ScenarioConfig,
    pub model: SurfaceModel,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.config.outputs.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("serialisable report");
        text.push('\n');
        self.write(name, &text)
    }

    fn write_rows(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Failure::Io(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
        self.write(name, &String::from_utf8(bytes).expect("utf-8 csv"))
    }

    fn potential(&self) -> Result<PotentialSpec, Failure> {
        self.config.potential.parse().map_err(|e| Failure::Config(format!("{e}")))
    }

    fn lambda(&self) -> Complex64 {
        Complex64::new(self.config.lambda[0], self.config.lambda[1])
    }

    fn points(&self) -> Vec<horolab::flow::UnitTangentState> {
        // offset the seed so sample points differ from rate ensembles
        liouville_ensemble(&self.model, self.config.points, self.config.seed.wrapping_add(1))
    }

    /// Ensemble supremum of the backward averages of `V`.
    fn measured_v_max(&self, v: &PotentialSpec) -> Result<f64, Failure> {
        Ok(match v {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant(c) => *c,
            _ => v_max(&self.model, v, self.config.ensemble_size, self.config.t_rates(), self.config.seed, ENSEMBLE_STEP)?.v_max,
        })
    }

    /// Measured `μ_max` plus its error bar.
    fn measured_mu_max(&self) -> Result<f64, Failure> {
        let r = expansion_rates(&self.model, self.config.ensemble_size, self.config.t_rates(), self.config.seed, ENSEMBLE_STEP)?;
        Ok(r.mu_max.value + r.mu_max.error)
    }

    fn params(&self, threshold: f64) -> ResolventParams {
        let p = ResolventParams::new(self.lambda(), threshold);
        match self.config.horizon("T_trunc") {
            Some(t) => p.with_t_trunc(t),
            None => p,
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.15e}")
}

#[derive(Serialize)]
struct SurfaceCheck {
    constant_curvature: bool,
    kmin: f64,
    kmax: f64,
    k0: f64,
    k1: f64,
    curvature_limit: f64,
    relator_residual: f64,
    systole: f64,
    bumps: usize,
    word_budget: usize,
    offset: f64,
}

pub fn surface_check(cx: &Context) -> Result<(), Failure> {
    let range = cx.model.curvature_range();
    let (alpha, beta) = octagon().relator_product().disk_coefficients();
    let relator_residual = (alpha - 1.0).norm().min((alpha + 1.0).norm()) + beta.norm();
    cx.write_json(
        "surface_check.json",
        &SurfaceCheck {
            constant_curvature: cx.model.is_constant_curvature(),
            kmin: range.kmin,
            kmax: range.kmax,
            k0: range.k0,
            k1: range.k1,
            curvature_limit: CURVATURE_LIMIT,
            relator_residual,
            systole: systole(),
            bumps: cx.model.perturbation().len(),
            word_budget: cx.model.word_budget(),
            offset: cx.model.offset(),
        },
    )
}

pub fn riccati(cx: &Context) -> Result<(), Failure> {
    let tol = cx.config.tolerance("riccati").unwrap_or(DEFAULT_TOL);
    let t = cx.config.t_riccati();
    let mut rows = Vec::new();
    for (i, s) in cx.points().iter().enumerate() {
        let v = hopf_r(&cx.model, s, tol)?;
        let rm = r_minus_at_horizon(&cx.model, s, t)?;
        let rp = r_plus_at_horizon(&cx.model, s, t)?;
        rows.push(vec![
            i.to_string(),
            fmt(s.base.u),
            fmt(s.base.v),
            fmt(s.theta),
            fmt(v.r_minus),
            fmt(v.r_plus),
            format!("{:.3e}", v.error_estimate),
            v.horizon_used.to_string(),
            fmt(rm),
            fmt(rp),
            t.to_string(),
        ]);
    }
    cx.write_rows(
        "riccati.csv",
        &["index", "u", "v", "theta", "r_minus", "r_plus", "error_estimate", "horizon_used", "r_minus_T", "r_plus_T", "T"],
        &rows,
    )
}

pub fn rates(cx: &Context) -> Result<(), Failure> {
    let v = cx.potential()?;
    let c = &cx.config;
    let est = expansion_rates(&cx.model, c.ensemble_size, c.t_rates(), c.seed, ENSEMBLE_STEP)?;
    let vm = v_max(&cx.model, &v, c.ensemble_size, c.t_rates(), c.seed, ENSEMBLE_STEP)?;
    cx.write_json(
        "rates.json",
        &serde_json::json!({
            "horizon": c.t_rates(),
            "ensemble_size": c.ensemble_size,
            "seed": c.seed,
            "expansion_rates": est,
            "potential": v.id(),
            "v_max": vm,
        }),
    )
}

#[derive(Serialize)]
struct PressureEntry {
    psi: &'static str,
    pressure: f64,
    error: f64,
    intercept: f64,
}

pub fn spectrum(cx: &Context) -> Result<(), Failure> {
    let lmax = cx.config.lmax();
    let spec = closed_geodesics(&cx.model, lmax)?;
    cx.write("spectrum.csv", &spec.to_csv())?;
    let grid = default_lgrid(lmax);
    let mut entries = Vec::new();
    for (psi, w) in [("0", 0.0), ("-r_minus", -1.0), ("-half_r_minus", -0.5)] {
        let ints: Vec<f64> = spec.geodesics.iter().map(|g| w * g.r_minus_integral).collect();
        let fit = pressure(&spec.geodesics, &ints, &grid, PressureEstimator::default())?;
        entries.push(PressureEntry {
            psi,
            pressure: fit.pressure,
            error: fit.error,
            intercept: fit.intercept,
        });
    }
    let systole = spec.geodesics.first().map(|g| g.length);
    cx.write_json(
        "pressure.json",
        &serde_json::json!({
            "lmax": lmax,
            "classes": spec.geodesics.len(),
            "systole": systole,
            "estimator": PressureEstimator::default(),
            "lgrid": grid,
            "pressures": entries,
        }),
    )
}

pub fn resolvent(cx: &Context) -> Result<(), Failure> {
    if let Some(path) = &cx.config.batch {
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let items: Vec<BatchItem> =
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let cache: RefCell<BTreeMap<String, f64>> = RefCell::default();
        let failed: RefCell<Option<Failure>> = RefCell::default();
        let results = run_batch(&cx.model, &items, |v| {
            let key = format!("{v:?}");
            if let Some(&t) = cache.borrow().get(&key) {
                return Some(t);
            }
            match cx.measured_v_max(v) {
                Ok(t) => {
                    cache.borrow_mut().insert(key, t);
                    Some(t)
                }
                Err(e) => {
                    failed.replace(Some(e));
                    None
                }
            }
        });
        if let Some(e) = failed.into_inner() {
            return Err(e);
        }
        return cx.write("resolvent_batch.csv", &batch_csv(&results?));
    }
    let v = cx.potential()?;
    let f: FunctionId = cx.config.function_id().parse().map_err(|e| Failure::Config(format!("{e}")))?;
    let params = cx.params(cx.measured_v_max(&v)?);
    let obs = f.observable();
    let mut rows = Vec::new();
    for (i, s) in cx.points().iter().enumerate() {
        let r = resolvent_apply(&cx.model, &obs, &v, &params, s)?;
        rows.push(vec![
            i.to_string(),
            fmt(s.base.u),
            fmt(s.base.v),
            fmt(s.theta),
            fmt(r.value.re),
            fmt(r.value.im),
            format!("{:.6e}", r.error),
            format!("{:.6e}", r.quadrature_error),
            format!("{:.6e}", r.tail_bound),
            fmt(r.t_trunc),
            fmt(params.threshold),
        ]);
    }
    cx.write_rows(
        "resolvent.csv",
        &["index", "u", "v", "theta", "re", "im", "error", "quadrature_error", "tail_bound", "t_trunc", "threshold"],
        &rows,
    )
}

fn test_function(id: &str) -> Result<TestFunction, Failure> {
    match id.parse::<FunctionId>().map_err(|e| Failure::Config(format!("{e}")))? {
        FunctionId::Random(seed) => Ok(TestFunction::random(seed)),
        FunctionId::Constant(c) => Ok(TestFunction::constant(c)),
        other => Err(Failure::Config(format!("intertwine needs a test function (bump:<seed> or a constant), got {other}"))),
    }
}

#[derive(Serialize)]
struct IntertwineOutput<'a> {
    function: String,
    potential: &'static str,
    mu_max: f64,
    v_max: f64,
    report: &'a IdentityReport,
}

pub fn intertwine_cmd(cx: &Context) -> Result<(), Failure> {
    let v = cx.potential()?;
    let f = test_function(&cx.config.function_id())?;
    let mu = cx.measured_mu_max()?;
    let vm = cx.measured_v_max(&v)?;
    let params = cx.params(mu + vm);
    let tol = cx.config.tolerance("identity").unwrap_or_else(|| default_identity_tolerance(&cx.model));
    let report = intertwine(&cx.model, &f, &v, &cx.points(), &params, tol)?;
    cx.write("intertwine.csv", &report.to_csv())?;
    cx.write_json(
        "intertwine.json",
        &IntertwineOutput {
            function: cx.config.function_id(),
            potential: v.id(),
            mu_max: mu,
            v_max: vm,
            report: &report,
        },
    )?;
    if !report.passed() {
        return Err(Failure::Identity(format!(
            "max relative residual {:.3e} exceeds {:.1e}",
            report.max_rel_residual, report.tolerance
        )));
    }
    Ok(())
}

pub fn band(cx: &Context) -> Result<(), Failure> {
    let v = cx.potential()?;
    if matches!(v, PotentialSpec::Constant(_) | PotentialSpec::Custom(_)) {
        return Err(Failure::Config("band-report takes V = 0, r- or half-r-".into()));
    }
    let c = &cx.config;
    let est = expansion_rates(&cx.model, c.ensemble_size, c.t_rates(), c.seed, ENSEMBLE_STEP)?;
    let report = band_report(est.mu_min, est.mu_max, c.epsilon, v.r_weight())?;
    cx.write_json("band_report.json", &report)
}

pub const COMMANDS: [&str; 7] = ["surface-check", "riccati", "rates", "spectrum", "resolvent", "intertwine", "band-report"];

pub fn run_named(cx: &Context, name: &str) -> Result<(), Failure> {
    match name {
        "surface-check" => surface_check(cx),
        "riccati" => riccati(cx),
        "rates" => rates(cx),
        "spectrum" => spectrum(cx),
        "resolvent" => resolvent(cx),
        "intertwine" => intertwine_cmd(cx),
        "band-report" => band(cx),
        other => unreachable!("unknown command {other}"),
    }
}

/// Every command in turn; the length spectrum only exists for `φ ≡ 0`.
/// Writes `summary.json` and returns the first failure.
pub fn all(cx: &Context) -> Result<(), Failure> {
    let mut summary = BTreeMap::new();
    let mut first = None;
    for name in COMMANDS {
        if name == "spectrum" && !cx.model.is_constant_curvature() {
            summary.insert(name, serde_json::json!({"status": "skipped", "reason": "length spectrum needs constant curvature"}));
            continue;
        }
        let entry = match run_named(cx, name) {
            Ok(()) => serde_json::json!({"status": "ok", "exit_code": 0}),
            Err(e) => {
                let v = serde_json::json!({"status": "failed", "exit_code": e.exit_code(), "message": e.to_string()});
                first.get_or_insert(e);
                v
            }
        };
        summary.insert(name, entry);
    }
    cx.write_json("summary.json", &summary)?;
    first.map_or(Ok(()), Err)
}

pub fn ensure_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Config(format!("cannot create {}: {e}", path.display())))
}
