use std::fmt::Write as _;

use hypokinetic::constants::{
    asymptotic_comparison, build_coefficients, build_coefficients_with, discrepancy_report, optimize_rate, rate_report,
    regularization_scheme, spectral_gap, validate_coefficients, ConstantsError, ProblemParams, SearchConfig,
};
use hypokinetic::gamma::{certify, GammaKind};
use hypokinetic::geometry::{bracket_battery, random_frame_point, verify_brackets_with, BracketReport, ManifoldKind};
use hypokinetic::simulator::{
    estimate_decay_rate, estimate_diffusivity, simulate, EnsembleStats, FitPolicy, InitialLaw, Observable, SimError,
};
use hypokinetic::{FramePoint, ModelManifold, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value as Json};

use crate::config::{Command, RunConfig};

/// What a successful dispatch produced.
pub struct Outcome {
    pub result: Json,
    pub passed: bool,
    /// Time-series body (without the config header).
    pub csv: Option<String>,
}

#[derive(Debug)]
pub enum RunError {
    /// Bad input detected by a module precondition; exit code 2.
    Usage { key: Option<&'static str>, message: String },
    /// The computation could not produce a certified result; exit code 1.
    Failure(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage { key: Some(k), message } => write!(f, "invalid value for '{k}': {message}"),
            RunError::Usage { key: None, message } => f.write_str(message),
            RunError::Failure(m) => f.write_str(m),
        }
    }
}

fn usage(key: Option<&'static str>, message: impl ToString) -> RunError {
    RunError::Usage {
        key,
        message: message.to_string(),
    }
}

impl From<ConstantsError> for RunError {
    fn from(e: ConstantsError) -> Self {
        match e {
            ConstantsError::Domain(_) | ConstantsError::Precondition(_) => usage(None, e),
            ConstantsError::DegenerateRate(_) | ConstantsError::Infeasible(_) => RunError::Failure(e.to_string()),
        }
    }
}

impl From<SimError> for RunError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Observable(_) => usage(Some("observables"), e),
            SimError::Config(_) => usage(None, e),
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Json {
    serde_json::to_value(v).expect("results serialize")
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    match cfg.command {
        Command::VerifyGamma => verify_gamma(cfg),
        Command::VerifyBrackets => verify_brackets(cfg),
        Command::Constants => constants(cfg),
        Command::Optimize => optimize(cfg),
        Command::Regularization => regularization(cfg),
        Command::Simulate => simulate_cmd(cfg),
        Command::RateExperiment => rate_experiment(cfg),
    }
}

fn manifold(cfg: &RunConfig) -> ModelManifold {
    cfg.manifold("manifold").expect("manifold key is required")
}

fn parse_kind(s: &str) -> Option<GammaKind> {
    Some(match s {
        "vv" => GammaKind::Vv,
        "vh" => GammaKind::VH,
        "hh" => GammaKind::HH,
        "xi" => GammaKind::Xi,
        "sigma-v" => GammaKind::SigmaV,
        "sigma-vxi" => GammaKind::SigmaVXi,
        _ => return None,
    })
}

fn verify_gamma(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let m = manifold(cfg);
    let kinds = cfg
        .texts("kinds")
        .iter()
        .map(|s| parse_kind(s).ok_or_else(|| usage(Some("kinds"), format!("unknown kind '{s}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.is_empty() {
        return Err(usage(Some("kinds"), "no kinds selected"));
    }
    let reports = certify(
        &m,
        &kinds,
        cfg.f64("sigma"),
        cfg.f64("kappa"),
        cfg.u64("samples"),
        cfg.f64("tol"),
        cfg.seed(),
    );
    let passed = reports.iter().all(|r| r.passed);
    Ok(Outcome {
        result: json!({ "manifold": m.to_string(), "kinds": reports }),
        passed,
        csv: None,
    })
}

fn verify_brackets(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let m = manifold(cfg);
    let tol = cfg.f64("tol");
    let battery = bracket_battery(&m);
    let seed = cfg.seed();
    let points = cfg.u64("points");
    if points == 0 {
        return Err(usage(Some("points"), "need at least one point"));
    }
    let reports: Vec<BracketReport> = (0..points)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let p = random_frame_point(&m, &mut rng);
            verify_brackets_with(&m, &p, tol, &battery)
        })
        .collect();
    let worst_point = (0..reports.len()).max_by(|&i, &j| reports[i].max_residual.total_cmp(&reports[j].max_residual));
    let mut total = reports[0].clone();
    for r in &reports[1..] {
        total.merge(r);
    }
    let passed = total.passed;
    Ok(Outcome {
        result: json!({ "manifold": m.to_string(), "points": points, "worst_point": worst_point, "report": total }),
        passed,
        csv: None,
    })
}

fn params(cfg: &RunConfig) -> Result<ProblemParams, RunError> {
    let n = cfg.usize("n");
    if n < 2 {
        return Err(usage(Some("n"), format!("{n} must be at least 2")));
    }
    Ok(ProblemParams::new(cfg.f64("sigma"), cfg.f64("kappa"), n, cfg.f64("M"))?)
}

fn constants(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let p = params(cfg)?;
    let (eps, ep) = (cfg.f64("epsilon"), cfg.f64("epsilon-prime"));
    let cs = build_coefficients_with(&p, eps, ep, cfg.scheme())?;
    let constraints = validate_coefficients(&cs);
    let rate = match cfg.opt_f64("lambda") {
        Some(l) => match rate_report(&cs, l) {
            Ok(r) => to_json(&r),
            Err(e) => json!({ "error": e.to_string() }),
        },
        None => Json::Null,
    };
    let sigmas = cfg.floats("asymptotic-sigmas").unwrap_or(&[]);
    let asymptotic = if sigmas.is_empty() {
        Json::Null
    } else {
        to_json(&asymptotic_comparison(p.n, eps, ep, sigmas)?)
    };
    let passed = constraints.passed;
    Ok(Outcome {
        result: json!({
            "coefficients": cs,
            "constraints": constraints,
            "discrepancy": discrepancy_report(&cs),
            "rate": rate,
            "asymptotic": asymptotic,
        }),
        passed,
        csv: None,
    })
}

fn optimize(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let p = params(cfg)?.with_lambda(cfg.f64("lambda"))?;
    let search = SearchConfig {
        grid: cfg.usize("grid"),
        iterations: cfg.usize("iterations"),
        scheme: cfg.scheme(),
        ..SearchConfig::default()
    };
    if search.grid == 0 {
        return Err(usage(Some("grid"), "need at least one grid point"));
    }
    let opt = optimize_rate(&p, &search)?;
    let constraints = validate_coefficients(&opt.coefficients);
    let passed = constraints.passed && opt.report.lambda_tilde > 0.0;
    Ok(Outcome {
        result: json!({ "optimum": opt, "constraints": constraints }),
        passed,
        csv: None,
    })
}

fn regularization(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let p = params(cfg)?;
    let (a, b, c) = match cfg.floats("abc") {
        Some(&[a, b, c]) => (a, b, c),
        Some(other) => {
            return Err(usage(
                Some("abc"),
                format!("expected three values, got {}", other.len()),
            ))
        }
        None => {
            let cs = build_coefficients(&p, cfg.f64("epsilon"), cfg.f64("epsilon-prime"))?;
            (cs.a, cs.b, cs.c)
        }
    };
    let set = regularization_scheme(&p, a, b, c)?;
    let fit = set.leading_order_fit();
    let tol = cfg.f64("fit-tol");
    let grid_ok = set
        .grid()
        .into_iter()
        .filter(|&s| s <= set.s_max)
        .all(|s| set.all_signs_hold(s));
    let passed = set.s_max > 0.0 && grid_ok && fit.alpha_rel_error() <= tol && fit.gamma_rel_error() <= tol;
    Ok(Outcome {
        result: json!({
            "scheme": set,
            "signs_hold_on_grid": grid_ok,
            "sign_checks_at_s_max": set.sign_checks(set.s_max),
            "coefficients_at_s_max": set.coefficients(set.s_max),
            "hat_discriminant_margin": set.hat_discriminant_margin(),
            "leading_order_fit": fit,
            "alpha_rel_error": fit.alpha_rel_error(),
            "gamma_rel_error": fit.gamma_rel_error(),
        }),
        passed,
        csv: None,
    })
}

/// Start frame: `x` (origin, or `(r,0,0)` on a sphere) with `e^0` turned towards `e^1` by `angle`.
fn start_point(m: &ModelManifold, x: Option<&[f64]>, angle: f64) -> Result<FramePoint, RunError> {
    let dim = m.position_dim();
    let (x, mut e) = match m.kind() {
        ManifoldKind::Sphere2 { radius } => {
            let x = x.map_or(vec![radius, 0.0, 0.0], <[f64]>::to_vec);
            if x.len() != 3 {
                return Err(usage(Some("initial-x"), "expected three coordinates"));
            }
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(usage(Some("initial-x"), "the origin is not on the sphere"));
            }
            let u: Vec<f64> = x.iter().map(|v| v / norm).collect();
            let axis = (0..3).min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs())).unwrap();
            let mut e0: Vec<f64> = (0..3).map(|i| f64::from(i == axis) - u[axis] * u[i]).collect();
            let n0 = e0.iter().map(|v| v * v).sum::<f64>().sqrt();
            e0.iter_mut().for_each(|v| *v /= n0);
            let e1 = vec![
                u[1] * e0[2] - u[2] * e0[1],
                u[2] * e0[0] - u[0] * e0[2],
                u[0] * e0[1] - u[1] * e0[0],
            ];
            (u.iter().map(|v| v * radius).collect(), vec![e0, e1])
        }
        _ => {
            let x = x.map_or(vec![0.0; dim], <[f64]>::to_vec);
            if x.len() != dim {
                return Err(usage(Some("initial-x"), format!("expected {dim} coordinates")));
            }
            let e = (0..dim)
                .map(|i| (0..dim).map(|j| f64::from(i == j)).collect())
                .collect();
            (x, e)
        }
    };
    let (s, c) = angle.sin_cos();
    let (r0, r1) = (e[0].clone(), e[1].clone());
    e[0] = r0.iter().zip(&r1).map(|(a, b)| c * a + s * b).collect();
    e[1] = r0.iter().zip(&r1).map(|(a, b)| -s * a + c * b).collect();
    Ok(FramePoint { x, e })
}

fn time_series_csv(stats: &EnsembleStats) -> String {
    let mut out = String::from("time");
    let mut columns: Vec<&hypokinetic::simulator::Series> = stats.series.iter().collect();
    if let Some(msd) = &stats.msd {
        columns.push(msd);
    }
    for s in &columns {
        let _ = write!(out, ",{0}_mean,{0}_stderr", s.name);
    }
    out.push('\n');
    for (i, t) in stats.times.iter().enumerate() {
        let _ = write!(out, "{t:?}");
        for s in &columns {
            let _ = write!(out, ",{:?},{:?}", s.mean[i], s.stderr[i]);
        }
        out.push('\n');
    }
    out
}

fn sim_config(cfg: &RunConfig, m: ModelManifold, observables: &[String], initial: &str) -> Result<SimConfig, RunError> {
    let observables = observables
        .iter()
        .map(|s| Observable::parse(s, &m))
        .collect::<Result<Vec<_>, _>>()?;
    let compact = !matches!(m.kind(), ManifoldKind::Euclidean { .. });
    let initial_law = match initial {
        "uniform" => InitialLaw::Uniform,
        "auto" if compact => InitialLaw::Uniform,
        "point" | "auto" => InitialLaw::Point(start_point(&m, cfg.floats("initial-x"), cfg.f64("initial-angle"))?),
        other => {
            return Err(usage(
                Some("initial"),
                format!("'{other}' is not uniform, point or auto"),
            ))
        }
    };
    if initial == "uniform" && !compact {
        return Err(usage(Some("initial"), "a uniform start needs a compact base"));
    }
    Ok(SimConfig {
        manifold: m,
        sigma: cfg.f64("sigma"),
        kappa: cfg.f64("kappa"),
        dt: cfg.f64("dt"),
        horizon: cfg.f64("horizon"),
        paths: cfg.u64("paths"),
        seed: cfg.seed(),
        observables,
        initial_law,
        record_terminal: false,
    })
}

fn simulate_cmd(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let m = manifold(cfg);
    let sc = sim_config(cfg, m, cfg.texts("observables"), cfg.text("initial"))?;
    let stats = simulate(&sc)?;
    let mut result = json!({ "stats": stats });
    if cfg.bool("fit-decay") {
        let fits: serde_json::Map<String, Json> = stats
            .series
            .iter()
            .map(|s| {
                let fit = estimate_decay_rate(&stats.times, &s.mean, &s.stderr, &FitPolicy::default())
                    .map_or_else(|e| json!({ "error": e.to_string() }), |f| to_json(&f));
                (s.name.clone(), fit)
            })
            .collect();
        result["decay_fits"] = Json::Object(fits);
    }
    if let Some(w) = cfg.floats("diffusivity-window") {
        let &[t0, t1] = w else {
            return Err(usage(Some("diffusivity-window"), "expected two times t0,t1"));
        };
        let est = estimate_diffusivity(&stats, (t0, t1), sc.sigma, sc.kappa, m.n())
            .map_err(|e| usage(Some("diffusivity-window"), e))?;
        result["diffusivity"] = to_json(&est);
    }
    Ok(Outcome {
        result,
        passed: true,
        csv: Some(time_series_csv(&stats)),
    })
}

fn rate_experiment(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let m = manifold(cfg);
    let lambda = match cfg.opt_f64("lambda").or_else(|| spectral_gap(&m)) {
        Some(l) => l,
        None => {
            return Err(usage(
                Some("lambda"),
                format!("no known spectral gap for {m}; pass --lambda"),
            ))
        }
    };
    let p = ProblemParams::for_manifold(&m, cfg.f64("sigma"), cfg.f64("kappa"))?.with_lambda(lambda)?;
    let search = SearchConfig {
        grid: cfg.usize("grid"),
        iterations: cfg.usize("iterations"),
        ..SearchConfig::default()
    };
    let opt = optimize_rate(&p, &search)?;
    let observable = cfg.text("observable").to_string();
    let sc = sim_config(cfg, m, std::slice::from_ref(&observable), "point")?;
    let stats = simulate(&sc)?;
    let series = &stats.series[0];
    let fit = estimate_decay_rate(&stats.times, &series.mean, &series.stderr, &FitPolicy::default())
        .map_err(|e| RunError::Failure(format!("decay fit: {e}")))?;
    let theory = opt.report.lambda_tilde;
    let ci_excludes_zero = fit.ci.0 > 0.0;
    let consistent = fit.rate > 0.0 && ci_excludes_zero && fit.rate >= theory;
    Ok(Outcome {
        result: json!({
            "comparison": {
                "lambda_tilde_theory": theory,
                "rate_observed": fit.rate,
                "ci": [fit.ci.0, fit.ci.1],
            },
            "consistent": consistent,
            "ci_excludes_zero": ci_excludes_zero,
            "lambda": lambda,
            "optimum": opt,
            "fit": fit,
            "observable": observable,
        }),
        passed: consistent,
        csv: Some(time_series_csv(&stats)),
    })
}
