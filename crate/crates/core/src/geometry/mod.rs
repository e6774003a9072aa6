//! Model manifolds, frame-bundle points, the vertical fields `V_i`, the
//! horizontal fields `H_i`, curvature and bracket verification.
//!
//! Flat manifolds use the global chart: `x` has `n` coordinates and the frame
//! rows `e^0..e^{n-1}` are `n`-vectors. `Sphere2(r)` uses its embedding in
//! `R^3`: `x` is the ambient position (`|x| = r`) and `e^0, e^1` are ambient
//! unit vectors, so `(x/r, e^0, e^1)` are the columns of a rotation matrix.
//! The chart description of the sphere lives in [`sphere_chart`].

pub mod sphere_chart;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffengine::{layout, Jet, JetError, Scalar};
use crate::gamma::TestFunction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid manifold: {0}")]
    InvalidManifold(String),
    #[error("point outside the chart domain: {0}")]
    ChartDomain(String),
    #[error("field {field} is out of range for base dimension {n}")]
    FieldIndex { field: FieldId, n: usize },
    #[error("frame index {index} is out of range for base dimension {n}")]
    FrameIndex { index: usize, n: usize },
    #[error("unsupported word length {0} (maximum is 4)")]
    WordLength(usize),
    #[error(transparent)]
    Jet(#[from] JetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ManifoldKind {
    Euclidean { n: usize },
    FlatTorus { n: usize, side_length: f64 },
    Sphere2 { radius: f64 },
}

/// Base manifold descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModelManifold {
    kind: ManifoldKind,
}

impl ModelManifold {
    pub fn euclidean(n: usize) -> Result<Self, GeometryError> {
        if n < 2 {
            return Err(GeometryError::InvalidManifold(format!("dimension {n} < 2")));
        }
        Ok(ModelManifold {
            kind: ManifoldKind::Euclidean { n },
        })
    }

    pub fn flat_torus(n: usize, side_length: f64) -> Result<Self, GeometryError> {
        if n < 2 {
            return Err(GeometryError::InvalidManifold(format!("dimension {n} < 2")));
        }
        if !(side_length > 0.0 && side_length.is_finite()) {
            return Err(GeometryError::InvalidManifold(format!("side length {side_length}")));
        }
        Ok(ModelManifold {
            kind: ManifoldKind::FlatTorus { n, side_length },
        })
    }

    pub fn sphere2(radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidManifold(format!("radius {radius}")));
        }
        Ok(ModelManifold {
            kind: ManifoldKind::Sphere2 { radius },
        })
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    /// Base dimension.
    pub fn n(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean { n } | ManifoldKind::FlatTorus { n, .. } => n,
            ManifoldKind::Sphere2 { .. } => 2,
        }
    }

    /// Supremum of `|<u, R(v,w)h>|` over unit vectors.
    pub fn curvature_bound(&self) -> f64 {
        match self.kind {
            ManifoldKind::Sphere2 { radius } => 1.0 / (radius * radius),
            _ => 0.0,
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self.kind, ManifoldKind::Sphere2 { .. })
    }

    /// Number of stored position coordinates.
    pub fn position_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere2 { .. } => 3,
            _ => self.n(),
        }
    }

    pub fn side_length(&self) -> Option<f64> {
        match self.kind {
            ManifoldKind::FlatTorus { side_length, .. } => Some(side_length),
            _ => None,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            ManifoldKind::Sphere2 { radius } => Some(radius),
            _ => None,
        }
    }

    /// All fields acting on this manifold's frame bundle.
    pub fn fields(&self) -> Vec<FieldId> {
        let n = self.n();
        (1..n).map(FieldId::V).chain((0..n).map(FieldId::H)).collect()
    }

    pub fn check_field(&self, field: FieldId) -> Result<(), GeometryError> {
        let n = self.n();
        let ok = match field {
            FieldId::V(i) => (1..n).contains(&i),
            FieldId::H(i) => i < n,
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::FieldIndex { field, n })
        }
    }
}

impl fmt::Display for ModelManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ManifoldKind::Euclidean { n } => write!(f, "euclidean:{n}"),
            ManifoldKind::FlatTorus { n, side_length } => write!(f, "flat-torus:{n}:{side_length}"),
            ManifoldKind::Sphere2 { radius } => write!(f, "sphere2:{radius}"),
        }
    }
}

impl FromStr for ModelManifold {
    type Err = GeometryError;

    /// Parses `euclidean:N`, `flat-torus:N:L` or `sphere2:R`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GeometryError::InvalidManifold(format!("cannot parse manifold '{s}'"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["euclidean", n] => Self::euclidean(n.parse().map_err(|_| bad())?),
            ["flat-torus", n, l] => Self::flat_torus(n.parse().map_err(|_| bad())?, l.parse().map_err(|_| bad())?),
            ["sphere2", r] => Self::sphere2(r.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ModelManifold {
    type Error = GeometryError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ModelManifold> for String {
    fn from(m: ModelManifold) -> String {
        m.to_string()
    }
}

/// A point of the orthonormal frame bundle with coordinates of type `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint<S> {
    pub x: Vec<S>,
    /// Rows `e^0, e^1, …`.
    pub e: Vec<Vec<S>>,
}

pub type FramePoint = PhasePoint<f64>;

impl<S> PhasePoint<S> {
    pub fn map<T>(&self, f: impl Fn(&S) -> T) -> PhasePoint<T> {
        PhasePoint {
            x: self.x.iter().map(&f).collect(),
            e: self.e.iter().map(|row| row.iter().map(&f).collect()).collect(),
        }
    }
}

impl<S: Scalar> PhasePoint<S> {
    /// Lift to constant jets.
    pub fn lift(&self) -> PhasePoint<Jet<S>> {
        self.map(|v| Jet::constant(v.clone()))
    }
}

impl FramePoint {
    /// Velocity vector `e^0`.
    pub fn velocity(&self) -> &[f64] {
        &self.e[0]
    }

    /// Position reduced to the fundamental domain for tori.
    pub fn reduced_position(&self, m: &ModelManifold) -> Vec<f64> {
        match m.side_length() {
            Some(l) => self.x.iter().map(|v| v.rem_euclid(l)).collect(),
            None => self.x.clone(),
        }
    }

    /// The rotation matrix `(x/r, e^0, e^1)` of a sphere point (row-major).
    pub fn sphere_rotation(&self, radius: f64) -> [[f64; 3]; 3] {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            r[i][0] = self.x[i] / radius;
            r[i][1] = self.e[0][i];
            r[i][2] = self.e[1][i];
        }
        r
    }

    pub fn from_sphere_rotation(rot: &[[f64; 3]; 3], radius: f64) -> Self {
        FramePoint {
            x: (0..3).map(|i| radius * rot[i][0]).collect(),
            e: vec![(0..3).map(|i| rot[i][1]).collect(), (0..3).map(|i| rot[i][2]).collect()],
        }
    }
}

/// Largest deviation of the frame from orthonormality in the metric at `x`.
pub fn orthonormality_defect(m: &ModelManifold, p: &FramePoint) -> f64 {
    let mut rows: Vec<Vec<f64>> = p.e.clone();
    if let Some(r) = m.radius() {
        rows.insert(0, p.x.iter().map(|v| v / r).collect());
    }
    let mut worst: f64 = 0.0;
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// Vertical field `V_i` (`1 ≤ i ≤ n-1`) or horizontal field `H_i` (`0 ≤ i ≤ n-1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldId {
    V(usize),
    H(usize),
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldId::V(i) => write!(f, "V{i}"),
            FieldId::H(i) => write!(f, "H{i}"),
        }
    }
}

/// Christoffel symbols `Γ^l_ij`, indexed `[l][i][j]`, in the manifold's chart.
///
/// For `Sphere2` the chart is `(θ, φ)` with metric `r²(dθ² + sin²θ dφ²)`.
pub fn christoffel(m: &ModelManifold, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>, GeometryError> {
    match m.kind {
        ManifoldKind::Euclidean { n } | ManifoldKind::FlatTorus { n, .. } => {
            if x.len() != n {
                return Err(GeometryError::ChartDomain(format!("expected {n} coordinates")));
            }
            Ok(vec![vec![vec![0.0; n]; n]; n])
        }
        ManifoldKind::Sphere2 { .. } => {
            if x.len() != 2 {
                return Err(GeometryError::ChartDomain("expected (theta, phi)".into()));
            }
            sphere_chart::check_domain(x[0])?;
            let (s, c) = x[0].sin_cos();
            let mut g = vec![vec![vec![0.0; 2]; 2]; 2];
            g[0][1][1] = -s * c;
            g[1][0][1] = c / s;
            g[1][1][0] = c / s;
            Ok(g)
        }
    }
}

/// `<R(e^i, e^j) e^k, e^l>` at `p`, with `R(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`.
pub fn riemann_component(
    m: &ModelManifold,
    _p: &FramePoint,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64, GeometryError> {
    let n = m.n();
    for index in [i, j, k, l] {
        if index >= n {
            return Err(GeometryError::FrameIndex { index, n });
        }
    }
    Ok(riemann_frame(m, i, j, k, l))
}

// Orthonormal frame, so the constant-curvature identity reduces to Kronecker deltas.
fn riemann_frame(m: &ModelManifold, i: usize, j: usize, k: usize, l: usize) -> f64 {
    match m.kind {
        ManifoldKind::Sphere2 { radius } => {
            let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            (d(j, k) * d(i, l) - d(i, k) * d(j, l)) / (radius * radius)
        }
        _ => 0.0,
    }
}

/// Matrix `R_ij = <R(e^i, e^0) e^0, e^j>` for `1 ≤ i, j ≤ n-1`.
pub fn jacobi_operator(m: &ModelManifold, p: &FramePoint) -> Vec<Vec<f64>> {
    let n = m.n();
    let _ = p;
    (1..n)
        .map(|i| (1..n).map(|j| riemann_frame(m, i, 0, 0, j)).collect())
        .collect()
}

/// Time-`t` flow of a field (exact one-parameter motions).
pub fn flow<S: Scalar>(m: &ModelManifold, field: FieldId, t: &S, p: &PhasePoint<S>) -> PhasePoint<S> {
    let mut q = p.clone();
    match field {
        FieldId::V(i) => {
            let (s, c) = t.sin_cos();
            rotate_pair(&mut q.e, 0, i, &s, &c);
        }
        FieldId::H(i) => match m.kind {
            ManifoldKind::Sphere2 { radius } => {
                let (s, c) = (t.clone() * (1.0 / radius)).sin_cos();
                for k in 0..3 {
                    let u = p.x[k].clone() * (1.0 / radius);
                    let ei = p.e[i][k].clone();
                    q.x[k] = (c.clone() * u.clone() + s.clone() * ei.clone()) * radius;
                    q.e[i][k] = c.clone() * ei - s.clone() * u;
                }
            }
            _ => {
                for k in 0..q.x.len() {
                    q.x[k] = q.x[k].clone() + t.clone() * p.e[i][k].clone();
                }
            }
        },
    }
    q
}

// (row a, row b) <- (c a + s b, −s a + c b)
fn rotate_pair<S: Scalar>(e: &mut [Vec<S>], a: usize, b: usize, s: &S, c: &S) {
    for k in 0..e[a].len() {
        let ea = e[a][k].clone();
        let eb = e[b][k].clone();
        e[a][k] = c.clone() * ea.clone() + s.clone() * eb.clone();
        e[b][k] = c.clone() * eb - s.clone() * ea;
    }
}

/// A scalar function on the frame bundle that can be evaluated on jets.
pub trait PhaseFunction: Sync {
    fn eval<S: Scalar>(&self, m: &ModelManifold, p: &PhasePoint<S>) -> S;
}

impl PhaseFunction for TestFunction {
    fn eval<S: Scalar>(&self, _m: &ModelManifold, p: &PhasePoint<S>) -> S {
        self.eval_point(p)
    }
}

/// `(X_1 X_2 … X_k f)(p)` for words of length at most 3, with coordinates of any scalar type.
///
/// The flows are composed as `Φ^{X_k}_{t_k} ∘ … ∘ Φ^{X_1}_{t_1}` and the
/// coefficient of `t_1 t_2 … t_k` is returned.
pub fn word_derivative<S: Scalar, F: PhaseFunction>(
    m: &ModelManifold,
    word: &[FieldId],
    p: &PhasePoint<S>,
    f: &F,
) -> Result<S, GeometryError> {
    for field in word {
        m.check_field(*field)?;
    }
    if word.is_empty() {
        return Ok(f.eval(m, p));
    }
    if word.len() > 3 {
        return Err(GeometryError::WordLength(word.len()));
    }
    let lay = layout(word.len(), word.len())?;
    let mut q = p.lift();
    for (k, field) in word.iter().enumerate() {
        let t = Jet::variable(&lay, k, S::from_f64(0.0));
        q = flow(m, *field, &t, &q);
    }
    Ok(f.eval(m, &q).coeff(&vec![1u8; word.len()]))
}

/// `X² f (p)`, the second derivative along a single flow.
pub fn field_square<S: Scalar, F: PhaseFunction>(m: &ModelManifold, field: FieldId, p: &PhasePoint<S>, f: &F) -> S {
    let lay = layout(1, 2).expect("order 2 layout");
    let t = Jet::variable(&lay, 0, S::from_f64(0.0));
    let q = flow(m, field, &t, &p.lift());
    f.eval(m, &q).coeff(&[2]) * 2.0
}

/// `(X_1 … X_k f)(p)` for words of length at most 4.
///
/// Words of length 4 nest an order-2 jet in the first two parameters inside
/// an order-2 jet in the last two.
pub fn apply_word<F: PhaseFunction>(
    m: &ModelManifold,
    word: &[FieldId],
    f: &F,
    p: &FramePoint,
) -> Result<f64, GeometryError> {
    if word.len() <= 3 {
        return word_derivative(m, word, p, f);
    }
    if word.len() > 4 {
        return Err(GeometryError::WordLength(word.len()));
    }
    for field in word {
        m.check_field(*field)?;
    }
    let outer = layout(2, 2)?;
    let inner = layout(2, 2)?;
    let mut q: PhasePoint<Jet<f64>> = p.lift();
    for k in 0..2 {
        q = flow(m, word[k], &Jet::variable(&outer, k, 0.0), &q);
    }
    let mut r: PhasePoint<Jet<Jet<f64>>> = q.lift();
    for k in 0..2 {
        let t = Jet::variable(&inner, k, Jet::constant(0.0));
        r = flow(m, word[2 + k], &t, &r);
    }
    Ok(f.eval(m, &r).coeff(&[1, 1]).coeff(&[1, 1]))
}

/// Residuals of the three bracket relations at one point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    /// `max |[V_i,H_0]f − H_i f|`
    pub vh_residual: f64,
    /// `max |[V_j,[V_i,H_0]]f + δ_ij H_0 f|`
    pub vvh_residual: f64,
    /// `max |[H_0,H_i]f − Σ_j <R(e^i,e^0)e^0,e^j> V_j f|`
    pub hh_residual: f64,
    pub max_residual: f64,
    pub tol: f64,
    pub passed: bool,
    pub functions: usize,
}

impl BracketReport {
    pub fn merge(&mut self, other: &BracketReport) {
        self.vh_residual = self.vh_residual.max(other.vh_residual);
        self.vvh_residual = self.vvh_residual.max(other.vvh_residual);
        self.hh_residual = self.hh_residual.max(other.hh_residual);
        self.max_residual = self.max_residual.max(other.max_residual);
        self.passed = self.passed && other.passed;
        self.functions += other.functions;
    }
}

/// Seed of the default bracket battery.
pub const BRACKET_BATTERY_SEED: u64 = 0x5eed_b7ac;
/// Size of the default bracket battery.
pub const BRACKET_BATTERY_SIZE: usize = 20;

/// Default battery: seeded random functions of position and the full frame.
pub fn bracket_battery(m: &ModelManifold) -> Vec<TestFunction> {
    (0..BRACKET_BATTERY_SIZE as u64)
        .map(|k| {
            TestFunction::random(
                m,
                BRACKET_BATTERY_SEED.wrapping_add(k),
                crate::gamma::FrameDependence::Full,
            )
        })
        .collect()
}

/// Checks the bracket relations at `p` on the default battery.
pub fn verify_brackets(m: &ModelManifold, p: &FramePoint, tol: f64) -> BracketReport {
    verify_brackets_with(m, p, tol, &bracket_battery(m))
}

pub fn verify_brackets_with(m: &ModelManifold, p: &FramePoint, tol: f64, functions: &[TestFunction]) -> BracketReport {
    use FieldId::{H, V};
    let n = m.n();
    let w = |word: &[FieldId], f: &TestFunction| word_derivative(m, word, p, f).expect("valid word");
    let mut rep = BracketReport {
        tol,
        passed: true,
        ..Default::default()
    };
    for f in functions {
        for i in 1..n {
            let r = w(&[V(i), H(0)], f) - w(&[H(0), V(i)], f) - w(&[H(i)], f);
            rep.vh_residual = rep.vh_residual.max(r.abs());
            for j in 1..n {
                let lhs = w(&[V(j), V(i), H(0)], f) - w(&[V(j), H(0), V(i)], f) - w(&[V(i), H(0), V(j)], f)
                    + w(&[H(0), V(i), V(j)], f);
                let rhs = if i == j { -w(&[H(0)], f) } else { 0.0 };
                rep.vvh_residual = rep.vvh_residual.max((lhs - rhs).abs());
            }
            let lhs = w(&[H(0), H(i)], f) - w(&[H(i), H(0)], f);
            let rhs: f64 = (1..n).map(|j| riemann_frame(m, i, 0, 0, j) * w(&[V(j)], f)).sum();
            rep.hh_residual = rep.hh_residual.max((lhs - rhs).abs());
        }
    }
    rep.max_residual = rep.vh_residual.max(rep.vvh_residual).max(rep.hh_residual);
    rep.passed = rep.max_residual <= tol;
    rep.functions = functions.len();
    rep
}

/// Seeded random point: uniform position on a bounded region, random frame.
pub fn random_frame_point<R: Rng + ?Sized>(m: &ModelManifold, rng: &mut R) -> FramePoint {
    match m.kind {
        ManifoldKind::Sphere2 { radius } => {
            let rot = random_rotation(rng, 3);
            let mut arr = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    arr[i][j] = rot[j][i];
                }
            }
            FramePoint::from_sphere_rotation(&arr, radius)
        }
        ManifoldKind::Euclidean { n } | ManifoldKind::FlatTorus { n, .. } => {
            let scale = m.side_length().unwrap_or(1.0);
            let x = (0..n).map(|_| rng.random::<f64>() * scale).collect();
            PhasePoint {
                x,
                e: random_rotation(rng, n),
            }
        }
    }
}

/// Rows of a Haar-distributed rotation matrix (Gram–Schmidt of a Gaussian matrix).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    loop {
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let det = determinant(&a);
        if det.abs() < 1e-9 {
            continue;
        }
        let mut q = gram_schmidt(&a);
        if det < 0.0 {
            for v in q[n - 1].iter_mut() {
                *v = -*v;
            }
        }
        return q;
    }
}

/// Euclidean Gram–Schmidt in row order.
pub fn gram_schmidt(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut v = r.clone();
        // Two passes keep the defect at round-off level.
        for _ in 0..2 {
            for q in &out {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= d * qi;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        out.push(v.into_iter().map(|a| a / norm).collect());
    }
    out
}

fn determinant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("non-empty");
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn manifolds() -> Vec<ModelManifold> {
        vec![
            ModelManifold::euclidean(2).unwrap(),
            ModelManifold::euclidean(3).unwrap(),
            ModelManifold::euclidean(4).unwrap(),
            ModelManifold::flat_torus(2, 1.0).unwrap(),
            ModelManifold::flat_torus(3, 1.0).unwrap(),
            ModelManifold::sphere2(1.0).unwrap(),
            ModelManifold::sphere2(2.0).unwrap(),
        ]
    }

    #[test]
    fn parse_round_trip() {
        for m in manifolds() {
            let s = m.to_string();
            assert_eq!(s.parse::<ModelManifold>().unwrap(), m);
        }
        assert!("torus:2".parse::<ModelManifold>().is_err());
        assert!(ModelManifold::euclidean(1).is_err());
        assert!(ModelManifold::flat_torus(2, 0.0).is_err());
        assert!(ModelManifold::sphere2(-1.0).is_err());
    }

    #[test]
    fn curvature_bounds() {
        assert_eq!(ModelManifold::flat_torus(3, 2.0).unwrap().curvature_bound(), 0.0);
        assert_eq!(ModelManifold::sphere2(2.0).unwrap().curvature_bound(), 0.25);
    }

    #[test]
    fn random_points_are_orthonormal_and_deterministic() {
        for m in manifolds() {
            let mut a = ChaCha8Rng::seed_from_u64(11);
            let mut b = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..50 {
                let p = random_frame_point(&m, &mut a);
                assert_eq!(p, random_frame_point(&m, &mut b));
                assert!(orthonormality_defect(&m, &p) <= 1e-12, "{m}");
            }
        }
    }

    #[test]
    fn torus_positions_are_uniform() {
        let m = ModelManifold::flat_torus(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..10_000).map(|_| random_frame_point(&m, &mut rng).x[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let se = (1.0f64 / 12.0).sqrt() / 100.0;
        assert!((mean - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn flat_christoffel_vanishes_and_sphere_domain() {
        let m = ModelManifold::euclidean(2).unwrap();
        assert!(christoffel(&m, &[0.3, 0.1])
            .unwrap()
            .iter()
            .flatten()
            .flatten()
            .all(|v| *v == 0.0));
        let t = ModelManifold::flat_torus(2, 1.0).unwrap();
        assert!(christoffel(&t, &[0.9, 0.2])
            .unwrap()
            .iter()
            .flatten()
            .flatten()
            .all(|v| *v == 0.0));
        let s = ModelManifold::sphere2(1.0).unwrap();
        assert!(matches!(
            christoffel(&s, &[0.0, 0.3]),
            Err(GeometryError::ChartDomain(_))
        ));
    }

    #[test]
    fn sphere_christoffel_matches_metric_differences() {
        // Γ^l_ij = ½ g^{lk}(∂_i g_jk + ∂_j g_ik − ∂_k g_ij), metric derivatives by central differences.
        let r = 1.0;
        let m = ModelManifold::sphere2(r).unwrap();
        let metric = |x: [f64; 2]| [[r * r, 0.0], [0.0, r * r * x[0].sin().powi(2)]];
        let h = 1e-5;
        for &(th, ph) in &[(0.4, 1.0), (1.2, -0.7), (2.5, 3.0)] {
            let g = metric([th, ph]);
            let mut dg = [[[0.0; 2]; 2]; 2]; // dg[k][i][j] = ∂_k g_ij
            for k in 0..2 {
                let mut xp = [th, ph];
                let mut xm = [th, ph];
                xp[k] += h;
                xm[k] -= h;
                let (gp, gm) = (metric(xp), metric(xm));
                for i in 0..2 {
                    for j in 0..2 {
                        dg[k][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
                    }
                }
            }
            let got = christoffel(&m, &[th, ph]).unwrap();
            for l in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let want = 0.5 / g[l][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                        assert!((got[l][i][j] - want).abs() < 1e-8, "{l}{i}{j}");
                        assert_eq!(got[l][i][j], got[l][j][i]);
                    }
                }
            }
        }
    }

    #[test]
    fn riemann_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in manifolds() {
            let p = random_frame_point(&m, &mut rng);
            let n = m.n();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let v = riemann_component(&m, &p, i, j, k, l).unwrap();
                            assert_eq!(v, -riemann_component(&m, &p, j, i, k, l).unwrap());
                            assert_eq!(v, -riemann_component(&m, &p, i, j, l, k).unwrap());
                            if m.is_flat() {
                                assert_eq!(v, 0.0);
                            }
                        }
                    }
                }
            }
            assert!(riemann_component(&m, &p, n, 0, 0, 0).is_err());
        }
        let s = ModelManifold::sphere2(2.0).unwrap();
        let p = random_frame_point(&s, &mut rng);
        assert_eq!(riemann_component(&s, &p, 1, 0, 0, 1).unwrap(), 0.25);
    }

    #[test]
    fn word_examples() {
        let m = ModelManifold::euclidean(2).unwrap();
        let th: f64 = 0.7;
        let p = PhasePoint {
            x: vec![0.2, -0.4],
            e: vec![vec![th.cos(), th.sin()], vec![-th.sin(), th.cos()]],
        };
        let f = TestFunction::coordinate(0);
        assert_eq!(apply_word(&m, &[], &f, &p).unwrap(), 0.2);
        assert!((apply_word(&m, &[FieldId::H(0)], &f, &p).unwrap() - p.e[0][0]).abs() < 1e-15);
        assert!((apply_word(&m, &[FieldId::V(1), FieldId::H(0)], &f, &p).unwrap() - p.e[1][0]).abs() < 1e-15);
        assert!(matches!(
            apply_word(&m, &[FieldId::V(2)], &f, &p),
            Err(GeometryError::FieldIndex { .. })
        ));
        let long = [FieldId::H(0); 5];
        assert!(matches!(
            apply_word(&m, &long, &f, &p),
            Err(GeometryError::WordLength(5))
        ));
    }

    #[test]
    fn length_four_words_match_iterated_short_words() {
        // V1 V1 V1 V1 applied to e^0_1 = cos θ gives cos θ (fourth derivative of cos).
        let m = ModelManifold::flat_torus(2, 1.0).unwrap();
        let th: f64 = 0.3;
        let p = PhasePoint {
            x: vec![0.1, 0.2],
            e: vec![vec![th.cos(), th.sin()], vec![-th.sin(), th.cos()]],
        };
        let f = TestFunction::frame_entry(0, 0);
        let v = apply_word(&m, &[FieldId::V(1); 4], &f, &p).unwrap();
        assert!((v - th.cos()).abs() < 1e-14);
    }

    #[test]
    fn brackets_hold_on_all_manifolds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in manifolds() {
            for _ in 0..3 {
                let p = random_frame_point(&m, &mut rng);
                let rep = verify_brackets(&m, &p, 1e-8);
                assert!(rep.passed, "{m}: {rep:?}");
            }
        }
    }

    #[test]
    fn constant_functions_have_zero_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in manifolds() {
            let p = random_frame_point(&m, &mut rng);
            let rep = verify_brackets_with(&m, &p, 1e-8, &[TestFunction::constant(3.5)]);
            assert_eq!(rep.max_residual, 0.0);
        }
    }
}
