//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] stores the Taylor coefficients `∂^α f / α!` of a function for
//! every multi-index `α` of total degree at most `order` in `dims` variables.
//! Jets are generic over their coefficient type, so a `Jet<Jet<f64>>` carries
//! derivatives with respect to two independent groups of variables.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

use crate::gamma::TestFunction;
use crate::geometry::{FramePoint, PhasePoint};

/// Largest supported truncation order.
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("unsupported jet order {0} (maximum is {MAX_ORDER})")]
    UnsupportedOrder(usize),
    #[error("jet dimension mismatch: {0} vs {1}")]
    DimsMismatch(usize, usize),
    #[error("jet order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("direction {0:?} is not a coordinate of this point")]
    BadDirection(Coord),
}

/// Number type usable inside jets and flows.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// The plain real part (degree-zero coefficient, recursively).
    fn value(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn recip(&self) -> Self;
    fn sin_cos(&self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn sin_cos(&self) -> (Self, Self) {
        f64::sin_cos(*self)
    }
}

/// Multi-index bookkeeping shared by all jets with the same `(dims, order)`.
#[derive(Debug)]
pub struct JetLayout {
    dims: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degree: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    // For each left index i, the pairs (j, k) with exps[i] + exps[j] = exps[k].
    mul_rows: Vec<Vec<(usize, usize)>>,
}

impl JetLayout {
    fn build(dims: usize, order: usize) -> Self {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        for deg in 0..=order {
            let mut cur = vec![0u8; dims];
            push_degree(&mut exps, &mut cur, 0, deg);
        }
        let degree: Vec<usize> = exps.iter().map(|e| e.iter().map(|&v| v as usize).sum()).collect();
        let index: HashMap<Vec<u8>, usize> = exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let mut mul_rows = vec![Vec::new(); exps.len()];
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if degree[i] + degree[j] <= order {
                    let sum: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                    mul_rows[i].push((j, index[&sum]));
                }
            }
        }
        JetLayout {
            dims,
            order,
            exps,
            degree,
            index,
            mul_rows,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn multi_indices(&self) -> &[Vec<u8>] {
        &self.exps
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.degree[i]
    }
}

// Enumerates exponent vectors of a fixed total degree in lexicographic order
// (largest power of the first variable first).
fn push_degree(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, pos: usize, remaining: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=remaining).rev() {
        cur[pos] = k as u8;
        push_degree(out, cur, pos + 1, remaining - k);
    }
    cur[pos] = 0;
}

thread_local! {
    static LAYOUTS: RefCell<HashMap<(usize, usize), Arc<JetLayout>>> = RefCell::new(HashMap::new());
}

/// Shared layout for `dims` variables truncated at total degree `order`.
pub fn layout(dims: usize, order: usize) -> Result<Arc<JetLayout>, JetError> {
    if order == 0 || order > MAX_ORDER {
        return Err(JetError::UnsupportedOrder(order));
    }
    Ok(LAYOUTS.with(|cache| {
        cache
            .borrow_mut()
            .entry((dims, order))
            .or_insert_with(|| Arc::new(JetLayout::build(dims, order)))
            .clone()
    }))
}

/// Truncated Taylor expansion. A jet without a layout is a broadcast constant.
#[derive(Debug, Clone)]
pub struct Jet<S> {
    layout: Option<Arc<JetLayout>>,
    coeffs: Vec<S>,
}

impl<S: Scalar> Jet<S> {
    pub fn constant(v: S) -> Self {
        Jet {
            layout: None,
            coeffs: vec![v],
        }
    }

    pub fn zero(layout: &Arc<JetLayout>) -> Self {
        Jet {
            layout: Some(layout.clone()),
            coeffs: vec![S::from_f64(0.0); layout.len()],
        }
    }

    /// The jet of the `k`-th coordinate function at value `v`.
    pub fn variable(layout: &Arc<JetLayout>, k: usize, v: S) -> Self {
        assert!(k < layout.dims, "variable index {k} out of range");
        let mut out = Self::zero(layout);
        out.coeffs[0] = v;
        let mut alpha = vec![0u8; layout.dims];
        alpha[k] = 1;
        let idx = layout.index[&alpha];
        out.coeffs[idx] = S::from_f64(1.0);
        out
    }

    pub fn from_coeffs(layout: &Arc<JetLayout>, coeffs: Vec<S>) -> Result<Self, JetError> {
        if coeffs.len() != layout.len() {
            return Err(JetError::DimsMismatch(coeffs.len(), layout.len()));
        }
        Ok(Jet {
            layout: Some(layout.clone()),
            coeffs,
        })
    }

    pub fn layout(&self) -> Option<&Arc<JetLayout>> {
        self.layout.as_ref()
    }

    pub fn dims(&self) -> usize {
        self.layout.as_ref().map_or(0, |l| l.dims)
    }

    pub fn order(&self) -> usize {
        self.layout.as_ref().map_or(0, |l| l.order)
    }

    /// Dense coefficient vector in layout order. A constant has length one.
    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    /// Degree-zero coefficient.
    pub fn constant_term(&self) -> &S {
        &self.coeffs[0]
    }

    /// Taylor coefficient `∂^α f / α!`; zero for indices beyond the truncation.
    pub fn coeff(&self, alpha: &[u8]) -> S {
        match &self.layout {
            None => {
                if alpha.iter().all(|&a| a == 0) {
                    self.coeffs[0].clone()
                } else {
                    S::from_f64(0.0)
                }
            }
            Some(l) => l
                .index_of(alpha)
                .map_or_else(|| S::from_f64(0.0), |i| self.coeffs[i].clone()),
        }
    }

    /// Raw mixed partial derivative `∂^α f`.
    pub fn derivative(&self, alpha: &[u8]) -> S {
        let fact: f64 = alpha.iter().map(|&a| factorial(a as usize)).product();
        self.coeff(alpha) * fact
    }

    /// Coefficient of `t_0 t_1 … t_{dims-1}`, the multilinear mixed partial.
    pub fn multilinear(&self) -> S {
        let alpha = vec![1u8; self.dims()];
        self.coeff(&alpha)
    }

    fn map(&self, f: impl Fn(&S) -> S) -> Self {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<(), JetError> {
        if let (Some(a), Some(b)) = (&self.layout, &other.layout) {
            if a.dims != b.dims {
                return Err(JetError::DimsMismatch(a.dims, b.dims));
            }
            if a.order != b.order {
                return Err(JetError::OrderMismatch(a.order, b.order));
            }
        }
        Ok(())
    }

    fn add_jet(&self, other: &Self) -> Self {
        match (&self.layout, &other.layout) {
            (_, None) => {
                let mut out = self.clone();
                out.coeffs[0] = out.coeffs[0].clone() + other.coeffs[0].clone();
                out
            }
            (None, Some(_)) => other.add_jet(self),
            (Some(_), Some(_)) => Jet {
                layout: self.layout.clone(),
                coeffs: self
                    .coeffs
                    .iter()
                    .zip(&other.coeffs)
                    .map(|(a, b)| a.clone() + b.clone())
                    .collect(),
            },
        }
    }

    fn mul_jet(&self, other: &Self) -> Self {
        match (&self.layout, &other.layout) {
            (_, None) => {
                let c = other.coeffs[0].clone();
                self.map(|a| a.clone() * c.clone())
            }
            (None, Some(_)) => other.mul_jet(self),
            (Some(l), Some(_)) => {
                let mut out = vec![S::from_f64(0.0); l.len()];
                for (i, row) in l.mul_rows.iter().enumerate() {
                    let a = &self.coeffs[i];
                    if a.is_zero() {
                        continue;
                    }
                    for &(j, k) in row {
                        let b = &other.coeffs[j];
                        if b.is_zero() {
                            continue;
                        }
                        out[k] = out[k].clone() + a.clone() * b.clone();
                    }
                }
                Jet {
                    layout: self.layout.clone(),
                    coeffs: out,
                }
            }
        }
    }

    // f(a0 + h) = Σ_k f^(k)(a0)/k! h^k where `derivs[k] = f^(k)(a0)`.
    fn compose_many(&self, derivs: &[&[S]]) -> Vec<Self> {
        let order = self.order();
        if self.layout.is_none() {
            return derivs.iter().map(|d| Jet::constant(d[0].clone())).collect();
        }
        let mut h = self.clone();
        h.coeffs[0] = S::from_f64(0.0);
        let mut powers = Vec::with_capacity(order);
        powers.push(h.clone());
        for k in 1..order {
            let next = powers[k - 1].mul_jet(&h);
            powers.push(next);
        }
        derivs
            .iter()
            .map(|d| {
                let mut out = Jet::constant(d[0].clone());
                for k in 1..=order {
                    let term = powers[k - 1].map(|c| c.clone() * d[k].clone()) * (1.0 / factorial(k));
                    out = out.add_jet(&term);
                }
                out
            })
            .collect()
    }

    fn compose(&self, derivs: &[S]) -> Self {
        self.compose_many(&[derivs]).pop().expect("one composition")
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl<S: Scalar> Add for Jet<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.check_compatible(&rhs).expect("jet addition");
        self.add_jet(&rhs)
    }
}

impl<S: Scalar> Sub for Jet<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<S: Scalar> Mul for Jet<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.check_compatible(&rhs).expect("jet multiplication");
        self.mul_jet(&rhs)
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|c| -c.clone())
    }
}

impl<S: Scalar> Add<f64> for Jet<S> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.coeffs[0] = self.coeffs[0].clone() + rhs;
        self
    }
}

impl<S: Scalar> Mul<f64> for Jet<S> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.map(|c| c.clone() * rhs)
    }
}

impl<S: Scalar> Scalar for Jet<S> {
    fn from_f64(v: f64) -> Self {
        Jet::constant(S::from_f64(v))
    }

    fn value(&self) -> f64 {
        self.coeffs[0].value()
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero)
    }

    fn sin(&self) -> Self {
        self.sin_cos().0
    }

    fn cos(&self) -> Self {
        self.sin_cos().1
    }

    fn sin_cos(&self) -> (Self, Self) {
        let (s, c) = self.coeffs[0].sin_cos();
        let ds = [s.clone(), c.clone(), -s.clone(), -c.clone()];
        let dc = [c.clone(), -s.clone(), -c, s];
        let mut out = self.compose_many(&[&ds, &dc]);
        let cos = out.pop().expect("cos");
        let sin = out.pop().expect("sin");
        (sin, cos)
    }

    fn exp(&self) -> Self {
        let e = self.coeffs[0].exp();
        self.compose(&[e.clone(), e.clone(), e.clone(), e])
    }

    fn powf(&self, p: f64) -> Self {
        let a = &self.coeffs[0];
        let mut derivs = Vec::with_capacity(MAX_ORDER + 1);
        let mut falling = 1.0;
        for k in 0..=MAX_ORDER {
            if falling == 0.0 {
                derivs.push(S::from_f64(0.0));
            } else {
                derivs.push(a.powf(p - k as f64) * falling);
            }
            falling *= p - k as f64;
        }
        self.compose(&derivs)
    }

    fn recip(&self) -> Self {
        let r = self.coeffs[0].recip();
        let r2 = r.clone() * r.clone();
        let r3 = r2.clone() * r.clone();
        let r4 = r3.clone() * r.clone();
        self.compose(&[r, -r2, r3 * 2.0, -(r4 * 6.0)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryOp {
    Sin,
    Cos,
    Exp,
    Pow(f64),
}

/// Checked binary jet arithmetic.
pub fn jet_binary<S: Scalar>(op: BinaryOp, a: &Jet<S>, b: &Jet<S>) -> Result<Jet<S>, JetError> {
    a.check_compatible(b)?;
    Ok(match op {
        BinaryOp::Add => a.add_jet(b),
        BinaryOp::Mul => a.mul_jet(b),
    })
}

/// Unary jet functions through their Taylor expansions.
pub fn jet_unary<S: Scalar>(op: UnaryOp, a: &Jet<S>) -> Jet<S> {
    match op {
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Exp => a.exp(),
        UnaryOp::Pow(p) => a.powf(p),
    }
}

/// Ambient coordinate of a frame-bundle point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    /// Position coordinate `x_k`.
    X(usize),
    /// Frame entry `e^row_col`.
    E(usize, usize),
}

/// Taylor expansion of `f` at `p` along the given coordinate directions.
pub fn jet_eval(f: &TestFunction, p: &FramePoint, dirs: &[Coord], order: usize) -> Result<Jet<f64>, JetError> {
    let lay = layout(dirs.len(), order)?;
    let mut q: PhasePoint<Jet<f64>> = p.map(|v| Jet::constant(*v));
    for (k, d) in dirs.iter().enumerate() {
        let slot = match *d {
            Coord::X(i) => q.x.get_mut(i),
            Coord::E(r, c) => q.e.get_mut(r).and_then(|row| row.get_mut(c)),
        }
        .ok_or(JetError::BadDirection(*d))?;
        *slot = Jet::variable(&lay, k, slot.value());
    }
    let out = f.eval_point(&q);
    // Constant functions come back without a layout; densify for a uniform shape.
    if out.layout.is_some() {
        return Ok(out);
    }
    let mut z = Jet::zero(&lay);
    z.coeffs[0] = out.coeffs[0];
    Ok(z)
}
