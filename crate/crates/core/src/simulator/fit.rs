use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EnsembleStats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Window selection and bootstrap settings for decay fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPolicy {
    /// The window opens where `|mean|` first drops below this fraction of `|mean(0)|`.
    pub start_fraction: f64,
    /// Points count as signal when `|mean| > noise_multiple × stderr`.
    pub noise_multiple: f64,
    /// The window closes at the first run of this many consecutive noise points.
    pub noise_run: usize,
    pub min_points: usize,
    pub bootstrap: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for FitPolicy {
    fn default() -> Self {
        FitPolicy {
            start_fraction: 0.5,
            noise_multiple: 3.0,
            noise_run: 5,
            min_points: 10,
            bootstrap: 1000,
            confidence: 0.95,
            seed: 0x0fa1_7e57,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `−slope` of `log|mean|` against `t`.
    pub rate: f64,
    pub ci: (f64, f64),
    pub intercept: f64,
    pub window: (f64, f64),
    pub points_used: usize,
}

fn ols(t: &[f64], y: &[f64]) -> (f64, f64) {
    let k = t.len() as f64;
    let tm = t.iter().sum::<f64>() / k;
    let ym = y.iter().sum::<f64>() / k;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    let slope = sxy / sxx;
    (slope, ym - slope * tm)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Log-linear fit of an exponentially decaying mean on the admissible window,
/// with a residual-bootstrap confidence interval.
pub fn estimate_decay_rate(
    times: &[f64],
    mean: &[f64],
    stderr: &[f64],
    policy: &FitPolicy,
) -> Result<DecayFit, FitError> {
    if times.len() != mean.len() || times.len() != stderr.len() || times.is_empty() {
        return Err(FitError::Precondition(
            "times, mean and stderr must have equal nonzero length".into(),
        ));
    }
    let y0 = mean[0].abs();
    let start = (0..times.len())
        .find(|&i| mean[i].abs() < policy.start_fraction * y0)
        .ok_or_else(|| FitError::InsufficientSignal("the mean never drops below the start fraction".into()))?;
    let noisy = |i: usize| mean[i].abs() <= policy.noise_multiple * stderr[i];
    let mut end = times.len();
    let mut run = 0;
    for i in start..times.len() {
        run = if noisy(i) { run + 1 } else { 0 };
        if run == policy.noise_run {
            end = i + 1 - run;
            break;
        }
    }
    let idx: Vec<usize> = (start..end).filter(|&i| !noisy(i) && mean[i] != 0.0).collect();
    if idx.len() < policy.min_points {
        return Err(FitError::InsufficientSignal(format!(
            "{} admissible points in the window, need {}",
            idx.len(),
            policy.min_points
        )));
    }
    let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| mean[i].abs().ln()).collect();
    let (slope, intercept) = ols(&t, &y);
    let resid: Vec<f64> = t.iter().zip(&y).map(|(a, b)| b - (intercept + slope * a)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut rates: Vec<f64> = (0..policy.bootstrap)
        .map(|_| {
            let yb: Vec<f64> = t
                .iter()
                .map(|a| intercept + slope * a + resid[rng.random_range(0..resid.len())])
                .collect();
            -ols(&t, &yb).0
        })
        .collect();
    rates.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - policy.confidence);
    let ci = if rates.is_empty() {
        (-slope, -slope)
    } else {
        (quantile(&rates, alpha), quantile(&rates, 1.0 - alpha))
    };
    Ok(DecayFit {
        rate: -slope,
        ci,
        intercept,
        window: (times[start], times[end - 1]),
        points_used: idx.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusivityEstimate {
    /// Slope of `E|x_t|²` against `t` on the window.
    pub d_hat: f64,
    /// `4κ²/((n−1)σ²)`
    pub target: f64,
    pub window: (f64, f64),
    /// Extremes of `E|x_t|²/t` over the window.
    pub msd_over_t_min: f64,
    pub msd_over_t_max: f64,
}

/// Effective diffusivity from the displacement series of a Euclidean run.
pub fn estimate_diffusivity(
    stats: &EnsembleStats,
    window: (f64, f64),
    sigma: f64,
    kappa: f64,
    n: usize,
) -> Result<DiffusivityEstimate, FitError> {
    let msd = stats
        .msd
        .as_ref()
        .ok_or_else(|| FitError::Precondition("displacement series needs a Euclidean base".into()))?;
    let relax = 2.0 / ((n as f64 - 1.0) * sigma * sigma);
    if window.0 < 5.0 * relax {
        return Err(FitError::Precondition(format!(
            "window start {} is earlier than 5 relaxation times ({})",
            window.0,
            5.0 * relax
        )));
    }
    let idx: Vec<usize> = (0..stats.times.len())
        .filter(|&i| stats.times[i] >= window.0 - 1e-9 && stats.times[i] <= window.1 + 1e-9)
        .collect();
    if idx.len() < 2 {
        return Err(FitError::Precondition(
            "window holds fewer than two output times".into(),
        ));
    }
    let t: Vec<f64> = idx.iter().map(|&i| stats.times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| msd.mean[i]).collect();
    let ratios = t.iter().zip(&y).map(|(a, b)| b / a);
    Ok(DiffusivityEstimate {
        d_hat: ols(&t, &y).0,
        target: 4.0 * kappa * kappa / ((n as f64 - 1.0) * sigma * sigma),
        window: (t[0], t[t.len() - 1]),
        msd_over_t_min: ratios.clone().fold(f64::INFINITY, f64::min),
        msd_over_t_max: ratios.fold(f64::NEG_INFINITY, f64::max),
    })
}
