use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_coefficients_with, rate_report, validate_coefficients, CoefficientScheme, CoefficientSet, ConstantsError,
    ProblemParams, RateReport,
};

/// Coarse grid plus Nelder–Mead refinement over `(ln ε, ln ε′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub grid: usize,
    pub iterations: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_prime_min: f64,
    pub eps_prime_max: f64,
    pub scheme: CoefficientScheme,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            grid: 32,
            iterations: 200,
            eps_min: 1e-3,
            eps_max: 1.0 - 1e-3,
            eps_prime_min: 1e-3,
            eps_prime_max: 1e2,
            scheme: CoefficientScheme::Consistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub eps: f64,
    pub eps_prime: f64,
    pub report: RateReport,
    pub coefficients: CoefficientSet,
    pub evaluations: usize,
}

fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

struct Objective<'a> {
    params: &'a ProblemParams,
    lambda: f64,
    cfg: &'a SearchConfig,
}

impl Objective<'_> {
    fn in_box(&self, eps: f64, ep: f64) -> bool {
        (self.cfg.eps_min..=self.cfg.eps_max).contains(&eps)
            && (self.cfg.eps_prime_min..=self.cfg.eps_prime_max).contains(&ep)
    }

    /// `λ̃`, or `None` where a constraint fails.
    fn eval(&self, eps: f64, ep: f64) -> Option<(RateReport, CoefficientSet)> {
        if !self.in_box(eps, ep) {
            return None;
        }
        let cs = build_coefficients_with(self.params, eps, ep, self.cfg.scheme).ok()?;
        if !validate_coefficients(&cs).passed {
            return None;
        }
        let r = rate_report(&cs, self.lambda).ok()?;
        r.lambda_tilde.is_finite().then_some((r, cs))
    }

    fn score(&self, u: [f64; 2]) -> f64 {
        self.eval(u[0].exp(), u[1].exp())
            .map_or(f64::NEG_INFINITY, |(r, _)| r.lambda_tilde)
    }
}

/// Maximizes `λ̃` over `(ε, ε′)`. Deterministic for a fixed configuration.
pub fn optimize_rate(params: &ProblemParams, cfg: &SearchConfig) -> Result<Optimum, ConstantsError> {
    params.validate()?;
    let lambda = params
        .lambda
        .ok_or_else(|| ConstantsError::Precondition("optimize_rate needs a Poincaré constant lambda".into()))?;
    if cfg.grid == 0 || !(cfg.eps_min > 0.0 && cfg.eps_max < 1.0 && cfg.eps_min < cfg.eps_max) {
        return Err(ConstantsError::Domain(
            "search box must lie inside (0,1) × (0,∞)".into(),
        ));
    }
    if !(cfg.eps_prime_min > 0.0 && cfg.eps_prime_min < cfg.eps_prime_max) {
        return Err(ConstantsError::Domain(
            "search box must lie inside (0,1) × (0,∞)".into(),
        ));
    }
    let obj = Objective { params, lambda, cfg };
    let eps_axis = log_grid(cfg.eps_min, cfg.eps_max, cfg.grid);
    let ep_axis = log_grid(cfg.eps_prime_min, cfg.eps_prime_max, cfg.grid);
    let points: Vec<(f64, f64)> = eps_axis
        .iter()
        .flat_map(|&e| ep_axis.iter().map(move |&p| (e, p)))
        .collect();
    let scores: Vec<f64> = points.par_iter().map(|&(e, p)| obj.score([e.ln(), p.ln()])).collect();
    let mut evaluations = points.len();

    let mut best: Option<(f64, [f64; 2])> = None;
    for (&(e, p), &s) in points.iter().zip(&scores) {
        if s.is_finite() && best.is_none_or(|(bs, _)| s > bs) {
            best = Some((s, [e.ln(), p.ln()]));
        }
    }
    let (grid_score, start) = best.ok_or_else(|| {
        ConstantsError::Infeasible(format!(
            "no feasible (epsilon, epsilon-prime) on the {0}×{0} grid",
            cfg.grid
        ))
    })?;

    let (nm_score, nm_point, nm_evals) = nelder_mead(|u| obj.score(u), start, 0.25, cfg.iterations);
    evaluations += nm_evals;
    let u = if nm_score > grid_score { nm_point } else { start };
    let (eps, eps_prime) = (u[0].exp(), u[1].exp());
    let (report, coefficients) = obj.eval(eps, eps_prime).expect("best point is feasible");
    Ok(Optimum {
        eps,
        eps_prime,
        report,
        coefficients,
        evaluations,
    })
}

/// Maximizes `f` in two variables. Returns the best value, its point and the evaluation count.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64, iterations: usize) -> (f64, [f64; 2], usize) {
    let mut evals = 0;
    let mut g = |u: [f64; 2]| {
        evals += 1;
        -f(u)
    };
    let mut simplex = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut vals = simplex.map(&mut g);
    let comb = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..iterations {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);
        let centroid = comb(simplex[0], simplex[1], 0.5);
        let reflected = comb(centroid, simplex[2], -1.0);
        let fr = g(reflected);
        if fr < vals[0] {
            let expanded = comb(centroid, simplex[2], -2.0);
            let fe = g(expanded);
            if fe < fr {
                simplex[2] = expanded;
                vals[2] = fe;
            } else {
                simplex[2] = reflected;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = reflected;
            vals[2] = fr;
        } else {
            let contracted = comb(centroid, simplex[2], 0.5);
            let fc = g(contracted);
            if fc < vals[2] {
                simplex[2] = contracted;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = comb(simplex[0], simplex[k], 0.5);
                    vals[k] = g(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    (-vals[best], simplex[best], evals)
}
