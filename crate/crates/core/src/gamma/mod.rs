//! Carré du champ operators `Γ`, their iterates `Γ₂`, and the third-order
//! `Σ₂` forms, each computed two ways: definitionally through the generator
//! and from closed forms in derivative blocks.

mod testfn;

pub use testfn::{FrameDependence, PositionFactor, Term, TestFunction, RANDOM_TERMS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::CoefficientSet;
use crate::diffengine::Scalar;
use crate::geometry::{
    field_square, jacobi_operator, random_frame_point, word_derivative, FieldId, FramePoint, ModelManifold,
    PhaseFunction, PhasePoint,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GammaError {
    #[error("{0:?} is not valid for this operation")]
    WrongKind(GammaKind),
    #[error("invalid tensor coefficients: {0}")]
    Coefficients(String),
    #[error("configuration mismatch: {0}")]
    Configuration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GammaKind {
    /// `Γᵛ(f,g) = Σ V_i f V_i g`
    Vv,
    /// `Γ^{v,h̃}(f,g) = ½ Σ (H_i f V_i g + H_i g V_i f)`
    VH,
    /// `Γ^{h̃}(f,g) = Σ_{i≥1} H_i f H_i g`
    HH,
    /// `Γ^ξ(f,g) = H_0 f H_0 g`
    Xi,
    /// `Σᵛ(f,g) = Δᵛf Δᵛg`
    SigmaV,
    /// `Σ^{v,ξ}(f,g) = Δᵛf ξg`
    SigmaVXi,
}

impl GammaKind {
    pub const GAMMA: [GammaKind; 4] = [GammaKind::Vv, GammaKind::VH, GammaKind::HH, GammaKind::Xi];
    pub const SIGMA: [GammaKind; 2] = [GammaKind::SigmaV, GammaKind::SigmaVXi];

    pub fn is_sigma(self) -> bool {
        matches!(self, GammaKind::SigmaV | GammaKind::SigmaVXi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Definitional,
    Closed,
}

fn d1<S: Scalar, F: PhaseFunction>(m: &ModelManifold, field: FieldId, p: &PhasePoint<S>, f: &F) -> S {
    word_derivative(m, &[field], p, f).expect("field in range")
}

fn lap_v<S: Scalar, F: PhaseFunction>(m: &ModelManifold, p: &PhasePoint<S>, f: &F) -> S {
    let mut acc = S::from_f64(0.0);
    for i in 1..m.n() {
        acc = acc + field_square(m, FieldId::V(i), p, f);
    }
    acc
}

/// `(σ²/2) Σ V_i² f + κ H_0 f` at a point of any scalar type.
pub fn generator_at<S: Scalar, F: PhaseFunction>(
    m: &ModelManifold,
    sigma: f64,
    kappa: f64,
    f: &F,
    p: &PhasePoint<S>,
) -> S {
    lap_v(m, p, f) * (0.5 * sigma * sigma) + d1(m, FieldId::H(0), p, f) * kappa
}

pub fn generator_apply(m: &ModelManifold, sigma: f64, kappa: f64, f: &TestFunction, p: &FramePoint) -> f64 {
    generator_at(m, sigma, kappa, f, p)
}

/// Bilinear form of `kind` at a point of any scalar type.
pub fn gamma_at<S: Scalar, F: PhaseFunction, G: PhaseFunction>(
    kind: GammaKind,
    m: &ModelManifold,
    f: &F,
    g: &G,
    p: &PhasePoint<S>,
) -> S {
    use FieldId::{H, V};
    let n = m.n();
    let zero = || S::from_f64(0.0);
    match kind {
        GammaKind::Vv => (1..n).fold(zero(), |acc, i| acc + d1(m, V(i), p, f) * d1(m, V(i), p, g)),
        GammaKind::VH => (1..n).fold(zero(), |acc, i| {
            acc + (d1(m, H(i), p, f) * d1(m, V(i), p, g) + d1(m, H(i), p, g) * d1(m, V(i), p, f)) * 0.5
        }),
        GammaKind::HH => (1..n).fold(zero(), |acc, i| acc + d1(m, H(i), p, f) * d1(m, H(i), p, g)),
        GammaKind::Xi => d1(m, H(0), p, f) * d1(m, H(0), p, g),
        GammaKind::SigmaV => lap_v(m, p, f) * lap_v(m, p, g),
        GammaKind::SigmaVXi => lap_v(m, p, f) * d1(m, H(0), p, g),
    }
}

pub fn gamma(kind: GammaKind, m: &ModelManifold, f: &TestFunction, g: &TestFunction, p: &FramePoint) -> f64 {
    gamma_at(kind, m, f, g, p)
}

/// `L f` as a function on the frame bundle.
pub struct Generator<'a, F> {
    pub sigma: f64,
    pub kappa: f64,
    pub f: &'a F,
}

impl<F: PhaseFunction> PhaseFunction for Generator<'_, F> {
    fn eval<S: Scalar>(&self, m: &ModelManifold, p: &PhasePoint<S>) -> S {
        generator_at(m, self.sigma, self.kappa, self.f, p)
    }
}

/// `Γ(f, g)` as a function on the frame bundle.
pub struct GammaField<'a, F, G> {
    pub kind: GammaKind,
    pub f: &'a F,
    pub g: &'a G,
}

impl<F: PhaseFunction, G: PhaseFunction> PhaseFunction for GammaField<'_, F, G> {
    fn eval<S: Scalar>(&self, m: &ModelManifold, p: &PhasePoint<S>) -> S {
        gamma_at(self.kind, m, self.f, self.g, p)
    }
}

/// `½(L Γ(f,g) − Γ(Lf, g) − Γ(f, Lg))` through nested jets.
pub fn gamma2_pair_definitional(
    kind: GammaKind,
    m: &ModelManifold,
    sigma: f64,
    kappa: f64,
    f: &TestFunction,
    g: &TestFunction,
    p: &FramePoint,
) -> f64 {
    let lf = Generator { sigma, kappa, f };
    let lg = Generator { sigma, kappa, f: g };
    let field = GammaField { kind, f, g };
    0.5 * (generator_at(m, sigma, kappa, &field, p) - gamma_at(kind, m, &lf, g, p) - gamma_at(kind, m, f, &lg, p))
}

/// Derivatives of `f` at a point, grouped the way the closed forms use them.
///
/// Indices run over `1..n`, stored zero-based (`grad_v[0]` is `V_1 f`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBlocks {
    pub n: usize,
    /// `V_i f`
    pub grad_v: Vec<f64>,
    /// `H_i f`, `i ≥ 1`
    pub grad_h: Vec<f64>,
    /// `ξf = H_0 f`
    pub xi: f64,
    /// `V_i V_j f`
    pub hess_v: Vec<Vec<f64>>,
    /// `V_i H_j f`
    pub hess_vh: Vec<Vec<f64>>,
    /// `V_i H_0 f`
    pub hess_vxi: Vec<f64>,
    /// `<R(e^i, e^0) e^0, e^j>`
    pub curvature: Vec<Vec<f64>>,
    /// `Δᵛf`, present when third-order blocks were requested
    pub lap_v: Option<f64>,
    /// `V_k Δᵛ f`
    pub grad_v_lap_v: Option<Vec<f64>>,
    /// `Δ^{v,h̃} f = Σ V_i H_i f`
    pub lap_vh: Option<f64>,
}

impl DerivativeBlocks {
    pub fn compute(m: &ModelManifold, f: &TestFunction, p: &FramePoint, third_order: bool) -> Self {
        use FieldId::{H, V};
        let n = m.n();
        let w = |word: &[FieldId]| word_derivative(m, word, p, f).expect("field in range");
        let idx = 1..n;
        let grad_v = idx.clone().map(|i| w(&[V(i)])).collect();
        let grad_h = idx.clone().map(|i| w(&[H(i)])).collect();
        let hess_v = idx
            .clone()
            .map(|i| idx.clone().map(|j| w(&[V(i), V(j)])).collect())
            .collect();
        let hess_vh: Vec<Vec<f64>> = idx
            .clone()
            .map(|i| idx.clone().map(|j| w(&[V(i), H(j)])).collect())
            .collect();
        let hess_vxi = idx.clone().map(|i| w(&[V(i), H(0)])).collect();
        let (lap_v, grad_v_lap_v, lap_vh) = if third_order {
            let lap = idx.clone().map(|i| w(&[V(i), V(i)])).sum();
            let grad = idx
                .clone()
                .map(|k| idx.clone().map(|i| w(&[V(k), V(i), V(i)])).sum())
                .collect();
            let lvh = (0..n - 1).map(|i| hess_vh[i][i]).sum();
            (Some(lap), Some(grad), Some(lvh))
        } else {
            (None, None, None)
        };
        DerivativeBlocks {
            n,
            grad_v,
            grad_h,
            xi: w(&[H(0)]),
            hess_v,
            hess_vh,
            hess_vxi,
            curvature: jacobi_operator(m, p),
            lap_v,
            grad_v_lap_v,
            lap_vh,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn frob(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| dot(x, y)).sum()
}

fn bilinear(r: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
    r.iter().zip(u).map(|(row, ui)| ui * dot(row, v)).sum()
}

/// A closed-form value with the magnitude of its largest summand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub value: f64,
    /// `1 + max |summand|`
    pub scale: f64,
}

impl ClosedForm {
    fn from_summands(parts: &[f64]) -> Self {
        ClosedForm {
            value: parts.iter().sum(),
            scale: 1.0 + parts.iter().fold(0.0f64, |acc, v| acc.max(v.abs())),
        }
    }
}

/// Closed forms of `Γ₂` and `Σ₂` from derivative blocks.
pub fn closed_form(kind: GammaKind, b: &DerivativeBlocks, sigma: f64, kappa: f64) -> ClosedForm {
    let n = b.n as f64;
    let h = 0.5 * sigma * sigma;
    let third = || {
        (
            b.lap_v.expect("third-order blocks"),
            b.grad_v_lap_v.as_ref().expect("third-order blocks"),
            b.lap_vh.expect("third-order blocks"),
        )
    };
    match kind {
        GammaKind::Vv => ClosedForm::from_summands(&[
            h * frob(&b.hess_v, &b.hess_v),
            h * (n - 2.0) * dot(&b.grad_v, &b.grad_v),
            -kappa * dot(&b.grad_v, &b.grad_h),
        ]),
        GammaKind::VH => ClosedForm::from_summands(&[
            h * frob(&b.hess_v, &b.hess_vh),
            h * 0.5 * (n - 1.0) * dot(&b.grad_v, &b.grad_h),
            -h * dot(&b.hess_vxi, &b.grad_v),
            0.5 * kappa * bilinear(&b.curvature, &b.grad_v, &b.grad_v),
            -0.5 * kappa * dot(&b.grad_h, &b.grad_h),
        ]),
        GammaKind::HH => ClosedForm::from_summands(&[
            h * frob(&b.hess_vh, &b.hess_vh),
            h * dot(&b.grad_h, &b.grad_h),
            -2.0 * h * dot(&b.hess_vxi, &b.grad_h),
            kappa * bilinear(&b.curvature, &b.grad_v, &b.grad_h),
        ]),
        GammaKind::Xi => {
            let trace: f64 = (0..b.n - 1).map(|i| b.hess_vh[i][i]).sum();
            ClosedForm::from_summands(&[
                h * dot(&b.hess_vxi, &b.hess_vxi),
                h * (n - 1.0) * b.xi * b.xi,
                2.0 * h * trace * b.xi,
            ])
        }
        GammaKind::SigmaV => {
            let (lap, grad_lap, lvh) = third();
            ClosedForm::from_summands(&[
                h * dot(grad_lap, grad_lap),
                -(n - 1.0) * kappa * lap * b.xi,
                -2.0 * kappa * lap * lvh,
            ])
        }
        GammaKind::SigmaVXi => {
            let (lap, grad_lap, lvh) = third();
            ClosedForm::from_summands(&[
                0.5 * h * (n - 1.0) * lap * b.xi,
                h * lap * lvh,
                h * dot(grad_lap, &b.hess_vxi),
                -0.5 * (n - 1.0) * kappa * b.xi * b.xi,
                -kappa * lvh * b.xi,
            ])
        }
    }
}

fn iterated(
    kind: GammaKind,
    method: Method,
    m: &ModelManifold,
    sigma: f64,
    kappa: f64,
    f: &TestFunction,
    p: &FramePoint,
) -> f64 {
    match method {
        Method::Definitional => gamma2_pair_definitional(kind, m, sigma, kappa, f, f, p),
        Method::Closed => {
            let blocks = DerivativeBlocks::compute(m, f, p, kind.is_sigma());
            closed_form(kind, &blocks, sigma, kappa).value
        }
    }
}

/// `Γ₂` of one of the four first-order forms.
pub fn gamma2(
    kind: GammaKind,
    method: Method,
    m: &ModelManifold,
    sigma: f64,
    kappa: f64,
    f: &TestFunction,
    p: &FramePoint,
) -> Result<f64, GammaError> {
    if kind.is_sigma() {
        return Err(GammaError::WrongKind(kind));
    }
    Ok(iterated(kind, method, m, sigma, kappa, f, p))
}

/// `Σ₂ᵛ` or `Σ₂^{v,ξ}`.
pub fn sigma2(
    kind: GammaKind,
    method: Method,
    m: &ModelManifold,
    sigma: f64,
    kappa: f64,
    f: &TestFunction,
    p: &FramePoint,
) -> Result<f64, GammaError> {
    if !kind.is_sigma() {
        return Err(GammaError::WrongKind(kind));
    }
    Ok(iterated(kind, method, m, sigma, kappa, f, p))
}

/// Weights of the tensor `T = a Γᵛ − 2b Γ^{v,h̃} + c Γ^{h̃} + d Γ^ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl TensorCoefficients {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, GammaError> {
        if [a, b, c, d].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(GammaError::Coefficients(format!(
                "a={a}, b={b}, c={c}, d={d} must be positive"
            )));
        }
        Ok(TensorCoefficients { a, b, c, d })
    }

    /// `b² < ac`, which makes `T` nonnegative.
    pub fn is_definite(&self) -> bool {
        self.b * self.b < self.a * self.c
    }
}

/// `T(f)` with a flag telling whether nonnegativity is guaranteed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorValue {
    pub value: f64,
    pub nonnegative_certified: bool,
}

pub fn tensor_t(coeffs: &TensorCoefficients, m: &ModelManifold, f: &TestFunction, p: &FramePoint) -> TensorValue {
    let g = |k| gamma(k, m, f, f, p);
    let value = coeffs.a * g(GammaKind::Vv) - 2.0 * coeffs.b * g(GammaKind::VH)
        + coeffs.c * g(GammaKind::HH)
        + coeffs.d * g(GammaKind::Xi);
    TensorValue {
        value,
        nonnegative_certified: coeffs.is_definite(),
    }
}

pub fn tensor_t2(
    coeffs: &TensorCoefficients,
    m: &ModelManifold,
    sigma: f64,
    kappa: f64,
    f: &TestFunction,
    p: &FramePoint,
) -> f64 {
    let b = DerivativeBlocks::compute(m, f, p, false);
    tensor_t2_from_blocks(coeffs, &b, sigma, kappa).value
}

fn tensor_t2_from_blocks(c: &TensorCoefficients, b: &DerivativeBlocks, sigma: f64, kappa: f64) -> ClosedForm {
    let parts = [
        (c.a, closed_form(GammaKind::Vv, b, sigma, kappa)),
        (-2.0 * c.b, closed_form(GammaKind::VH, b, sigma, kappa)),
        (c.c, closed_form(GammaKind::HH, b, sigma, kappa)),
        (c.d, closed_form(GammaKind::Xi, b, sigma, kappa)),
    ];
    ClosedForm {
        value: parts.iter().map(|(w, g)| w * g.value).sum(),
        scale: 1.0 + parts.iter().fold(0.0f64, |acc, (w, g)| acc.max((w * g.scale).abs())),
    }
}

/// Pointwise slacks of the two Bakry–Émery type inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BakryEmerySlack {
    /// `T₂ + K₁‖∇ᵛf‖² − ‖∇^{h̃}f‖²`
    pub s1: f64,
    pub scale1: f64,
    /// `T₂ − ρT + KΓ` with `Γ = (σ²/2) Γᵛ`
    pub s2: f64,
    pub scale2: f64,
}

impl BakryEmerySlack {
    /// Both slacks are at least `−tol × scale`.
    pub fn certifies(&self, tol: f64) -> bool {
        self.s1 >= -tol * self.scale1 && self.s2 >= -tol * self.scale2
    }
}

pub fn check_bakry_emery(
    cs: &CoefficientSet,
    m: &ModelManifold,
    sigma: f64,
    kappa: f64,
    f: &TestFunction,
    p: &FramePoint,
) -> Result<BakryEmerySlack, GammaError> {
    if m.curvature_bound() > cs.m_bound * (1.0 + 1e-12) {
        return Err(GammaError::Configuration(format!(
            "manifold curvature bound {} exceeds M = {} of the coefficient set",
            m.curvature_bound(),
            cs.m_bound
        )));
    }
    if m.n() != cs.n || sigma != cs.sigma || kappa != cs.kappa {
        return Err(GammaError::Configuration(
            "sigma, kappa or n differ from the coefficient set".into(),
        ));
    }
    let b = DerivativeBlocks::compute(m, f, p, false);
    let tc = TensorCoefficients {
        a: cs.a,
        b: cs.b,
        c: cs.c,
        d: cs.d,
    };
    let t2 = tensor_t2_from_blocks(&tc, &b, sigma, kappa);
    let gv = dot(&b.grad_v, &b.grad_v);
    let gh = dot(&b.grad_h, &b.grad_h);
    let t = cs.a * gv - 2.0 * cs.b * dot(&b.grad_v, &b.grad_h) + cs.c * gh + cs.d * b.xi * b.xi;
    let gamma_l = 0.5 * sigma * sigma * gv;
    let s1_extra = [cs.k_gradient * gv, -gh];
    let s2_extra = [-cs.rho * t, cs.k * gamma_l];
    let maxabs = |xs: &[f64]| xs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(BakryEmerySlack {
        s1: t2.value + s1_extra.iter().sum::<f64>(),
        scale1: t2.scale.max(1.0 + maxabs(&s1_extra)),
        s2: t2.value + s2_extra.iter().sum::<f64>(),
        scale2: t2.scale.max(1.0 + maxabs(&s2_extra)),
    })
}

/// Worst definitional-versus-closed residual for one kind over a sample battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub kind: GammaKind,
    /// `max |definitional − closed| / (1 + max |closed summand|)`
    pub max_residual: f64,
    pub worst_sample: u64,
    pub failing_samples: Vec<u64>,
    pub passed: bool,
}

/// Test function and point for sample `k` of a seeded battery.
pub fn sample(m: &ModelManifold, seed: u64, k: u64, dependence: FrameDependence) -> (TestFunction, FramePoint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let f = TestFunction::random(m, rng.random(), dependence);
    let p = random_frame_point(m, &mut rng);
    (f, p)
}

/// Compares both evaluation routes on `samples` seeded `(f, p)` pairs per kind.
pub fn certify(
    m: &ModelManifold,
    kinds: &[GammaKind],
    sigma: f64,
    kappa: f64,
    samples: u64,
    tol: f64,
    seed: u64,
) -> Vec<KindReport> {
    let residuals: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let (f, p) = sample(m, seed, k, FrameDependence::Velocity);
            let any_sigma = kinds.iter().any(|k| k.is_sigma());
            let blocks = DerivativeBlocks::compute(m, &f, &p, any_sigma);
            kinds
                .iter()
                .map(|&kind| {
                    let closed = closed_form(kind, &blocks, sigma, kappa);
                    let def = gamma2_pair_definitional(kind, m, sigma, kappa, &f, &f, &p);
                    (def - closed.value).abs() / closed.scale
                })
                .collect()
        })
        .collect();
    kinds
        .iter()
        .enumerate()
        .map(|(j, &kind)| {
            let mut rep = KindReport {
                kind,
                max_residual: 0.0,
                worst_sample: 0,
                failing_samples: vec![],
                passed: true,
            };
            for (k, r) in residuals.iter().enumerate() {
                let r = r[j];
                if r > rep.max_residual || r.is_nan() {
                    rep.max_residual = r;
                    rep.worst_sample = k as u64;
                }
                if r.is_nan() || r > tol {
                    rep.failing_samples.push(k as u64);
                }
            }
            rep.passed = rep.failing_samples.is_empty();
            rep
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar(theta: f64) -> FramePoint {
        FramePoint {
            x: vec![0.25, -0.6],
            e: vec![vec![theta.cos(), theta.sin()], vec![-theta.sin(), theta.cos()]],
        }
    }

    #[test]
    fn generator_examples() {
        let m = ModelManifold::euclidean(2).unwrap();
        let p = planar(0.9);
        assert_eq!(generator_apply(&m, 1.0, 1.0, &TestFunction::constant(2.0), &p), 0.0);
        let lx = generator_apply(&m, 1.0, 1.0, &TestFunction::coordinate(0), &p);
        assert!((lx - 0.9f64.cos()).abs() < 1e-15);
        let lc = generator_apply(&m, 1.0, 0.0, &TestFunction::frame_entry(0, 0), &p);
        assert!((lc + 0.5 * 0.9f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn gamma_examples() {
        let m = ModelManifold::euclidean(2).unwrap();
        let p = planar(0.4);
        let x1 = TestFunction::coordinate(0);
        assert_eq!(gamma(GammaKind::Vv, &m, &x1, &x1, &p), 0.0);
        assert!((gamma(GammaKind::Xi, &m, &x1, &x1, &p) - 0.4f64.cos().powi(2)).abs() < 1e-15);
        for k in GammaKind::GAMMA {
            let c = TestFunction::constant(1.3);
            assert_eq!(gamma(k, &m, &c, &c, &p), 0.0);
        }
    }

    #[test]
    fn xi_gamma2_example_both_methods() {
        let m = ModelManifold::euclidean(2).unwrap();
        let th: f64 = 0.35;
        let p = planar(th);
        let f = TestFunction::coordinate(0);
        let want = -0.5 * (2.0 * th).cos();
        for method in [Method::Definitional, Method::Closed] {
            let v = gamma2(GammaKind::Xi, method, &m, 1.0, 1.0, &f, &p).unwrap();
            assert!((v - want).abs() < 1e-13, "{method:?}: {v}");
        }
    }

    #[test]
    fn sigma_v_example() {
        let m = ModelManifold::euclidean(2).unwrap();
        let th: f64 = 1.1;
        let p = planar(th);
        let f = TestFunction::frame_entry(0, 0);
        let want = 0.5 * 4.0 * th.sin().powi(2);
        for method in [Method::Definitional, Method::Closed] {
            let v = sigma2(GammaKind::SigmaV, method, &m, 2.0, 0.0, &f, &p).unwrap();
            assert!((v - want).abs() < 1e-12, "{method:?}: {v} vs {want}");
        }
    }

    #[test]
    fn wrong_kinds_are_rejected() {
        let m = ModelManifold::euclidean(2).unwrap();
        let p = planar(0.0);
        let f = TestFunction::constant(1.0);
        assert!(gamma2(GammaKind::SigmaV, Method::Closed, &m, 1.0, 1.0, &f, &p).is_err());
        assert!(sigma2(GammaKind::Vv, Method::Closed, &m, 1.0, 1.0, &f, &p).is_err());
    }

    #[test]
    fn constants_vanish() {
        let m = ModelManifold::sphere2(1.0).unwrap();
        let p = crate::geometry::random_frame_point(&m, &mut ChaCha8Rng::seed_from_u64(1));
        let c = TestFunction::constant(-0.7);
        for k in GammaKind::GAMMA {
            for method in [Method::Definitional, Method::Closed] {
                assert_eq!(gamma2(k, method, &m, 1.0, 1.0, &c, &p).unwrap(), 0.0);
            }
        }
        for k in GammaKind::SIGMA {
            for method in [Method::Definitional, Method::Closed] {
                assert_eq!(sigma2(k, method, &m, 1.0, 1.0, &c, &p).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn closed_forms_match_definitions_quickly() {
        for m in [
            ModelManifold::euclidean(2).unwrap(),
            ModelManifold::euclidean(3).unwrap(),
            ModelManifold::flat_torus(2, 1.0).unwrap(),
            ModelManifold::sphere2(1.0).unwrap(),
        ] {
            let kinds = [
                GammaKind::Vv,
                GammaKind::VH,
                GammaKind::HH,
                GammaKind::Xi,
                GammaKind::SigmaV,
                GammaKind::SigmaVXi,
            ];
            for rep in certify(&m, &kinds, 1.3, 0.8, 5, 1e-7, 17) {
                assert!(rep.passed, "{m} {:?}: {}", rep.kind, rep.max_residual);
            }
        }
    }
}
