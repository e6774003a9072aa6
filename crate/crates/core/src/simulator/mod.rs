//! Strang-splitting simulation of kinetic Brownian motion and ensemble statistics.
//!
//! One step is a half vertical substep (Brownian motion of `e^0` on the fiber
//! sphere, variance `σ²dt/2`), an exact geodesic substep of length `κ dt`, and
//! another half vertical substep.

mod fit;

pub use fit::{estimate_decay_rate, estimate_diffusivity, DecayFit, DiffusivityEstimate, FitError, FitPolicy};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamma::TestFunction;
use crate::geometry::{
    gram_schmidt, orthonormality_defect, random_frame_point, FramePoint, ManifoldKind, ModelManifold,
};

/// Largest allowed `dt · max(σ², κ)`.
pub const STABILITY_LIMIT: f64 = 0.5;
/// Upper bound on the number of output times (plus the initial one).
pub const MAX_OUTPUTS: usize = 512;
const CHUNK: u64 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown observable '{0}'")]
    Observable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialLaw {
    Point(FramePoint),
    /// Normalized Liouville measure; needs a compact base.
    Uniform,
}

/// A test function with a display name used in outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub name: String,
    pub function: TestFunction,
}

impl Observable {
    /// Parses `cos:K:M` (`cos(2πM x_K/L)`, `L = 1` off the torus), `x:K`, `v:K` (`e^0_K`) or `const:C`.
    /// Indices are zero-based.
    pub fn parse(spec: &str, m: &ModelManifold) -> Result<Self, SimError> {
        let bad = || SimError::Observable(spec.to_string());
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let index = |s: &str| -> Result<usize, SimError> {
            let k: usize = s.parse().map_err(|_| bad())?;
            if k < m.position_dim() {
                Ok(k)
            } else {
                Err(bad())
            }
        };
        let function = match parts.as_slice() {
            ["cos", k, mode] => {
                let mode: i32 = mode.parse().map_err(|_| bad())?;
                TestFunction::cos_mode(index(k)?, mode, m.side_length().unwrap_or(1.0))
            }
            ["x", k] => TestFunction::coordinate(index(k)?),
            ["v", k] => TestFunction::frame_entry(0, index(k)?),
            ["const", c] => TestFunction::constant(c.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        Ok(Observable {
            name: spec.trim().to_string(),
            function,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub manifold: ModelManifold,
    pub sigma: f64,
    pub kappa: f64,
    pub dt: f64,
    pub horizon: f64,
    pub paths: u64,
    pub seed: u64,
    pub observables: Vec<Observable>,
    pub initial_law: InitialLaw,
    /// Keep every path's final state.
    pub record_terminal: bool,
}

fn check_stability(dt: f64, sigma: f64, kappa: f64) -> Result<(), SimError> {
    if !(sigma >= 0.0 && kappa >= 0.0) {
        return Err(SimError::Config(format!(
            "sigma = {sigma} and kappa = {kappa} must be nonnegative"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::Config(format!("dt = {dt} must be positive")));
    }
    let load = dt * (sigma * sigma).max(kappa);
    if load > STABILITY_LIMIT {
        return Err(SimError::Config(format!(
            "dt·max(sigma², kappa) = {load} exceeds {STABILITY_LIMIT}"
        )));
    }
    Ok(())
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        check_stability(self.dt, self.sigma, self.kappa)?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) || self.dt > self.horizon {
            return Err(SimError::Config(format!(
                "need 0 < dt = {} ≤ horizon = {}",
                self.dt, self.horizon
            )));
        }
        if self.paths == 0 {
            return Err(SimError::Config("paths must be at least 1".into()));
        }
        match &self.initial_law {
            InitialLaw::Uniform if matches!(self.manifold.kind(), ManifoldKind::Euclidean { .. }) => {
                return Err(SimError::Config("uniform initial law needs a compact base".into()));
            }
            InitialLaw::Point(p) => {
                let dim = self.manifold.position_dim();
                let shape_ok = p.x.len() == dim && p.e.len() == self.manifold.n() && p.e.iter().all(|r| r.len() == dim);
                if !shape_ok || orthonormality_defect(&self.manifold, p) > 1e-10 {
                    return Err(SimError::Config(
                        "initial point is not an orthonormal frame of the manifold".into(),
                    ));
                }
            }
            InitialLaw::Uniform => {}
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    /// Steps between output times: `dt_out = max(dt, horizon/512)` rounded up to whole steps.
    pub fn output_stride(&self) -> u64 {
        let dt_out = self.dt.max(self.horizon / MAX_OUTPUTS as f64);
        ((dt_out / self.dt - 1e-9).ceil() as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub mean: Vec<f64>,
    /// Sample standard deviation over `√paths`.
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub series: Vec<Series>,
    /// `E|x_t − x_0|²`, Euclidean bases only.
    pub msd: Option<Series>,
    pub terminal: Option<Vec<FramePoint>>,
    pub paths: u64,
    pub dt: f64,
    pub dt_out: f64,
    pub seed: u64,
}

impl EnsembleStats {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Index of the output time closest to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        (0..self.times.len())
            .min_by(|&i, &j| (self.times[i] - t).abs().total_cmp(&(self.times[j] - t).abs()))
            .unwrap_or(0)
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Spherical Brownian increment of `e^0` with per-direction standard deviation `scale`.
fn vertical<R: Rng + ?Sized>(m: &ModelManifold, p: &mut FramePoint, scale: f64, rng: &mut R) {
    let n = m.n();
    if n == 2 {
        let (s, c) = (scale * normal(rng)).sin_cos();
        rotate_rows(&mut p.e, 0, 1, s, c);
        return;
    }
    let z: Vec<f64> = (1..n).map(|_| normal(rng)).collect();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let dim = p.e[0].len();
    let u: Vec<f64> = (0..dim)
        .map(|k| (1..n).map(|i| z[i - 1] * p.e[i][k]).sum::<f64>() / norm)
        .collect();
    let (s, c) = (scale * norm).sin_cos();
    let e0 = p.e[0].clone();
    for k in 0..dim {
        p.e[0][k] = c * e0[k] + s * u[k];
    }
    // Rotation in the (e^0, u) plane applied to the rest of the frame.
    for i in 1..n {
        let w = z[i - 1] / norm;
        for k in 0..dim {
            p.e[i][k] += w * ((c - 1.0) * u[k] - s * e0[k]);
        }
    }
    if m.is_flat() {
        p.e = gram_schmidt(&p.e);
    }
}

fn rotate_rows(e: &mut [Vec<f64>], a: usize, b: usize, s: f64, c: f64) {
    for k in 0..e[a].len() {
        let (ea, eb) = (e[a][k], e[b][k]);
        e[a][k] = c * ea + s * eb;
        e[b][k] = c * eb - s * ea;
    }
}

fn geodesic(m: &ModelManifold, p: &mut FramePoint, length: f64) {
    match m.kind() {
        ManifoldKind::Sphere2 { radius } => {
            let (s, c) = (length / radius).sin_cos();
            for k in 0..3 {
                let u = p.x[k] / radius;
                let e0 = p.e[0][k];
                p.x[k] = radius * (c * u + s * e0);
                p.e[0][k] = c * e0 - s * u;
            }
        }
        ManifoldKind::Euclidean { .. } => {
            for (x, v) in p.x.iter_mut().zip(&p.e[0]) {
                *x += length * v;
            }
        }
        ManifoldKind::FlatTorus { side_length, .. } => {
            for (x, v) in p.x.iter_mut().zip(&p.e[0]) {
                *x = (*x + length * v).rem_euclid(side_length);
            }
        }
    }
}

/// One Strang step.
pub fn step<R: Rng + ?Sized>(
    m: &ModelManifold,
    state: &mut FramePoint,
    dt: f64,
    sigma: f64,
    kappa: f64,
    rng: &mut R,
) -> Result<(), SimError> {
    check_stability(dt, sigma, kappa)?;
    let scale = sigma * (0.5 * dt).sqrt();
    vertical(m, state, scale, rng);
    geodesic(m, state, kappa * dt);
    vertical(m, state, scale, rng);
    Ok(())
}

/// Planar bases tracked as `(x, θ, orientation)`: the same arithmetic as `step` with no allocation.
#[derive(Clone, Copy)]
struct Planar {
    x: [f64; 2],
    theta: f64,
    orient: f64,
    side: Option<f64>,
}

impl Planar {
    fn from_point(p: &FramePoint, side: Option<f64>) -> Self {
        let theta = p.e[0][1].atan2(p.e[0][0]);
        let orient = if p.e[0][0] * p.e[1][1] - p.e[0][1] * p.e[1][0] >= 0.0 {
            1.0
        } else {
            -1.0
        };
        Planar {
            x: [p.x[0], p.x[1]],
            theta,
            orient,
            side,
        }
    }

    fn to_point(self) -> FramePoint {
        let (s, c) = self.theta.sin_cos();
        FramePoint {
            x: self.x.to_vec(),
            e: vec![vec![c, s], vec![-s * self.orient, c * self.orient]],
        }
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&mut self, scale: f64, length: f64, rng: &mut R) {
        self.theta += self.orient * scale * normal(rng);
        let (s, c) = self.theta.sin_cos();
        self.x[0] += length * c;
        self.x[1] += length * s;
        if let Some(l) = self.side {
            self.x[0] = self.x[0].rem_euclid(l);
            self.x[1] = self.x[1].rem_euclid(l);
        }
        self.theta += self.orient * scale * normal(rng);
    }
}

/// Chan-style running moments, merged in a fixed order.
#[derive(Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1.0;
        let d = v - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (v - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.count == 0.0 {
            return;
        }
        let total = self.count + o.count;
        let d = o.mean - self.mean;
        self.mean += d * o.count / total;
        self.m2 += o.m2 + d * d * self.count * o.count / total;
        self.count = total;
    }

    fn stderr(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.count - 1.0) / self.count).sqrt()
    }
}

struct ChunkResult {
    /// `[series][time]`, with the displacement series last when present.
    moments: Vec<Vec<Moments>>,
    terminal: Vec<FramePoint>,
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn run_chunk(cfg: &SimConfig, first: u64, last: u64, n_out: usize, stride: u64, track_msd: bool) -> ChunkResult {
    let m = &cfg.manifold;
    let n_series = cfg.observables.len() + usize::from(track_msd);
    let mut moments = vec![vec![Moments::default(); n_out]; n_series];
    let mut terminal = Vec::new();
    let scale = cfg.sigma * (0.5 * cfg.dt).sqrt();
    let length = cfg.kappa * cfg.dt;
    let planar = m.n() == 2 && m.is_flat();
    for path in first..last {
        let mut rng = path_rng(cfg.seed, path);
        let start = match &cfg.initial_law {
            InitialLaw::Point(p) => p.clone(),
            InitialLaw::Uniform => random_frame_point(m, &mut rng),
        };
        let x0 = start.x.clone();
        let mut record = |j: usize, p: &FramePoint| {
            for (k, obs) in cfg.observables.iter().enumerate() {
                moments[k][j].push(obs.function.value(p));
            }
            if track_msd {
                let d2 = p.x.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum();
                moments[n_series - 1][j].push(d2);
            }
        };
        record(0, &start);
        let end = if planar {
            let mut s = Planar::from_point(&start, m.side_length());
            for j in 1..n_out {
                for _ in 0..stride {
                    s.step(scale, length, &mut rng);
                }
                record(j, &s.to_point());
            }
            s.to_point()
        } else {
            let mut p = start;
            for j in 1..n_out {
                for _ in 0..stride {
                    vertical(m, &mut p, scale, &mut rng);
                    geodesic(m, &mut p, length);
                    vertical(m, &mut p, scale, &mut rng);
                }
                record(j, &p);
            }
            p
        };
        if cfg.record_terminal {
            terminal.push(end);
        }
    }
    ChunkResult { moments, terminal }
}

/// Runs the ensemble. Results depend only on the configuration, not on thread count.
pub fn simulate(cfg: &SimConfig) -> Result<EnsembleStats, SimError> {
    cfg.validate()?;
    let stride = cfg.output_stride();
    let n_out = (cfg.steps() / stride) as usize + 1;
    let track_msd = matches!(cfg.manifold.kind(), ManifoldKind::Euclidean { .. });
    let chunks: Vec<(u64, u64)> = (0..cfg.paths.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(cfg.paths)))
        .collect();
    let results: Vec<ChunkResult> = chunks
        .par_iter()
        .map(|&(a, b)| run_chunk(cfg, a, b, n_out, stride, track_msd))
        .collect();

    let n_series = cfg.observables.len() + usize::from(track_msd);
    let mut total = vec![vec![Moments::default(); n_out]; n_series];
    let mut terminal = cfg.record_terminal.then(Vec::new);
    for r in results {
        for (acc, part) in total.iter_mut().zip(&r.moments) {
            for (a, p) in acc.iter_mut().zip(part) {
                a.merge(p);
            }
        }
        if let Some(t) = terminal.as_mut() {
            t.extend(r.terminal);
        }
    }
    let to_series = |name: &str, ms: &[Moments]| Series {
        name: name.to_string(),
        mean: ms.iter().map(|m| m.mean).collect(),
        stderr: ms.iter().map(Moments::stderr).collect(),
    };
    let series = cfg
        .observables
        .iter()
        .zip(&total)
        .map(|(o, ms)| to_series(&o.name, ms))
        .collect();
    let msd = track_msd.then(|| to_series("msd", &total[n_series - 1]));
    let dt_out = stride as f64 * cfg.dt;
    Ok(EnsembleStats {
        times: (0..n_out).map(|j| j as f64 * dt_out).collect(),
        series,
        msd,
        terminal,
        paths: cfg.paths,
        dt: cfg.dt,
        dt_out,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar_point(theta: f64) -> FramePoint {
        let (s, c) = theta.sin_cos();
        FramePoint {
            x: vec![0.0, 0.0],
            e: vec![vec![c, s], vec![-s, c]],
        }
    }

    fn config(m: ModelManifold, sigma: f64, kappa: f64, dt: f64, horizon: f64, paths: u64) -> SimConfig {
        SimConfig {
            manifold: m,
            sigma,
            kappa,
            dt,
            horizon,
            paths,
            seed: 11,
            observables: vec![],
            initial_law: InitialLaw::Uniform,
            record_terminal: false,
        }
    }

    #[test]
    fn pure_geodesic_flow_on_torus() {
        let m = ModelManifold::flat_torus(2, 1.0).unwrap();
        let mut p = planar_point(0.3);
        let mut rng = path_rng(0, 0);
        let e = p.e.clone();
        for k in 1..=100 {
            step(&m, &mut p, 0.01, 0.0, 1.0, &mut rng).unwrap();
            let want = [
                (0.01 * k as f64 * 0.3f64.cos()).rem_euclid(1.0),
                (0.01 * k as f64 * 0.3f64.sin()).rem_euclid(1.0),
            ];
            assert!((p.x[0] - want[0]).abs() < 1e-12 && (p.x[1] - want[1]).abs() < 1e-12);
        }
        assert_eq!(p.e, e);
    }

    #[test]
    fn planar_fast_path_matches_generic_step() {
        for m in [
            ModelManifold::flat_torus(2, 1.0).unwrap(),
            ModelManifold::euclidean(2).unwrap(),
        ] {
            let start = planar_point(1.2);
            let mut p = start.clone();
            let mut q = Planar::from_point(&start, m.side_length());
            let (mut r1, mut r2) = (path_rng(5, 3), path_rng(5, 3));
            for _ in 0..1000 {
                step(&m, &mut p, 1e-3, 1.3, 0.9, &mut r1).unwrap();
                q.step(1.3 * (0.5e-3f64).sqrt(), 0.9e-3, &mut r2);
            }
            let qp = q.to_point();
            for (a, b) in p.x.iter().zip(&qp.x) {
                assert!((a - b).abs() < 1e-9);
            }
            for (ra, rb) in p.e.iter().zip(&qp.e) {
                for (a, b) in ra.iter().zip(rb) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn frames_stay_orthonormal() {
        for m in [
            ModelManifold::euclidean(3).unwrap(),
            ModelManifold::flat_torus(4, 2.0).unwrap(),
            ModelManifold::sphere2(1.5).unwrap(),
        ] {
            let mut rng = path_rng(9, 0);
            let mut p = random_frame_point(&m, &mut rng);
            for _ in 0..2000 {
                step(&m, &mut p, 1e-2, 2.0, 1.0, &mut rng).unwrap();
                assert!(orthonormality_defect(&m, &p) <= 1e-10, "{m}");
            }
        }
    }

    #[test]
    fn stability_guard() {
        let m = ModelManifold::flat_torus(2, 1.0).unwrap();
        let mut p = planar_point(0.0);
        let mut rng = path_rng(0, 0);
        assert!(matches!(
            step(&m, &mut p, 0.2, 2.0, 1.0, &mut rng),
            Err(SimError::Config(_))
        ));
        assert!(simulate(&config(m, 2.0, 1.0, 0.2, 1.0, 10)).is_err());
        assert!(simulate(&config(ModelManifold::euclidean(2).unwrap(), 1.0, 1.0, 0.01, 1.0, 10)).is_err());
        assert!(simulate(&config(m, 1.0, 1.0, 0.01, 1.0, 0)).is_err());
    }

    #[test]
    fn velocity_autocorrelation_decays_at_fiber_rate() {
        for n in [2usize, 3] {
            let m = ModelManifold::euclidean(n).unwrap();
            let mut start = FramePoint {
                x: vec![0.0; n],
                e: (0..n).map(|i| (0..n).map(|k| f64::from(i == k)).collect()).collect(),
            };
            start.x[0] = 0.0;
            let mut cfg = config(m, 1.0, 0.0, 1e-2, 2.0, 10_000);
            cfg.initial_law = InitialLaw::Point(start);
            cfg.observables = vec![Observable::parse("v:0", &m).unwrap()];
            let stats = simulate(&cfg).unwrap();
            let s = &stats.series[0];
            for t in [0.5, 1.0, 2.0] {
                let j = stats.time_index(t);
                let want = (-(n as f64 - 1.0) * stats.times[j] / 2.0).exp();
                assert!(
                    (s.mean[j] - want).abs() <= 3.0 * s.stderr[j],
                    "n={n} t={t}: {} vs {want}",
                    s.mean[j]
                );
            }
        }
    }

    #[test]
    fn deterministic_and_output_grid() {
        let m = ModelManifold::flat_torus(2, 1.0).unwrap();
        let mut cfg = config(m, 1.0, 1.0, 1e-2, 10.0, 200);
        cfg.observables = vec![Observable::parse("cos:0:1", &m).unwrap()];
        let a = simulate(&cfg).unwrap();
        assert_eq!(a, simulate(&cfg).unwrap());
        assert_eq!(a.times.len(), 501);
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        cfg.horizon = 100.0;
        let b = simulate(&cfg).unwrap();
        assert!(b.times.len() <= MAX_OUTPUTS + 1);
        assert!(b.dt_out >= 100.0 / 512.0 && b.dt_out < 100.0 / 512.0 + cfg.dt);
    }

    #[test]
    fn observable_specs() {
        let m = ModelManifold::flat_torus(2, 2.0).unwrap();
        let p = FramePoint {
            x: vec![0.5, 0.25],
            e: vec![vec![0.6, 0.8], vec![-0.8, 0.6]],
        };
        assert!(
            (Observable::parse("cos:0:1", &m).unwrap().function.value(&p) - (std::f64::consts::PI * 0.5).cos()).abs()
                < 1e-15
        );
        assert_eq!(Observable::parse("v:1", &m).unwrap().function.value(&p), 0.8);
        assert_eq!(Observable::parse("x:1", &m).unwrap().function.value(&p), 0.25);
        assert!(Observable::parse("x:2", &m).is_err());
        assert!(Observable::parse("sin:0", &m).is_err());
    }
}
