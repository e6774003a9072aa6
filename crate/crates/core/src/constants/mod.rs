//! Coefficients of the modified tensor `T = aΓᵛ − 2bΓ^{v,h̃} + cΓ^{h̃} + dΓ^ξ`,
//! the `(ρ, K)` pair of the generalized Bakry–Émery estimate, rates, and the
//! short-time regularization scheme.

mod optimize;
mod regularization;

pub use optimize::{optimize_rate, Optimum, SearchConfig};
pub use regularization::{
    regularization_scheme, CoefficientFunctions, LeadingOrderFit, RegularizationSet, SignCheck, REGULARIZATION_GRID,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ManifoldKind, ModelManifold};

/// Relative tolerance of equalities that hold by construction.
pub const EQUALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstantsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate rate: K + λ̂ = {0} ≤ 0")]
    DegenerateRate(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

/// `σ, κ, n, M` and an optional Poincaré constant `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub sigma: f64,
    pub kappa: f64,
    pub n: usize,
    #[serde(rename = "M")]
    pub m_bound: f64,
    pub lambda: Option<f64>,
}

impl ProblemParams {
    pub fn new(sigma: f64, kappa: f64, n: usize, m_bound: f64) -> Result<Self, ConstantsError> {
        let p = ProblemParams {
            sigma,
            kappa,
            n,
            m_bound,
            lambda: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self, ConstantsError> {
        self.lambda = Some(lambda);
        self.validate()?;
        Ok(self)
    }

    /// Parameters matching a manifold's dimension and curvature bound.
    pub fn for_manifold(m: &ModelManifold, sigma: f64, kappa: f64) -> Result<Self, ConstantsError> {
        Self::new(sigma, kappa, m.n(), m.curvature_bound())
    }

    pub fn validate(&self) -> Result<(), ConstantsError> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConstantsError::Domain(format!("{name} = {v} must be positive")))
            }
        };
        pos("sigma", self.sigma)?;
        pos("kappa", self.kappa)?;
        if self.n < 2 {
            return Err(ConstantsError::Domain(format!("n = {} must be at least 2", self.n)));
        }
        if !(self.m_bound >= 0.0 && self.m_bound.is_finite()) {
            return Err(ConstantsError::Domain(format!(
                "M = {} must be nonnegative",
                self.m_bound
            )));
        }
        if let Some(l) = self.lambda {
            pos("lambda", l)?;
        }
        Ok(())
    }
}

/// How the free Young parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientScheme {
    /// The choices exactly as stated in the proof (`a = b²/(cε)`).
    ProofChain,
    /// Same structure with `a`, `ε″`, `b` re-solved so every constraint holds.
    Consistent,
}

impl std::str::FromStr for CoefficientScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proof-chain" | "chain" => Ok(CoefficientScheme::ProofChain),
            "consistent" => Ok(CoefficientScheme::Consistent),
            _ => Err(format!("unknown scheme '{s}' (expected proof-chain or consistent)")),
        }
    }
}

impl std::fmt::Display for CoefficientScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoefficientScheme::ProofChain => "proof-chain",
            CoefficientScheme::Consistent => "consistent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub scheme: CoefficientScheme,
    pub sigma: f64,
    pub kappa: f64,
    pub n: usize,
    #[serde(rename = "M")]
    pub m_bound: f64,
    pub eps: f64,
    pub eps_prime: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    /// Absent when `M = 0`.
    pub eps5: Option<f64>,
    pub eps6: f64,
    pub eps_dprime: f64,
    #[serde(rename = "Cv")]
    pub c_v: f64,
    #[serde(rename = "Ch")]
    pub c_h: f64,
    #[serde(rename = "Cxi")]
    pub c_xi: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    #[serde(rename = "B")]
    pub big_b: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    #[serde(rename = "D")]
    pub big_d: f64,
    /// `K` of `T₂ ≥ ρT − KΓ`.
    #[serde(rename = "K")]
    pub k: f64,
    /// `−Cᵛ`, the constant in front of `‖∇ᵛf‖²` in `T₂ ≥ −K₁‖∇ᵛf‖² + ‖∇^{h̃}f‖²`.
    pub k_gradient: f64,
    pub rho: f64,
}

fn check_eps(eps: f64, eps_prime: f64) -> Result<(), ConstantsError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ConstantsError::Domain(format!("epsilon = {eps} must lie in (0, 1)")));
    }
    if !(eps_prime > 0.0 && eps_prime.is_finite()) {
        return Err(ConstantsError::Domain(format!(
            "epsilon-prime = {eps_prime} must be positive"
        )));
    }
    Ok(())
}

/// The proof's coefficient chain.
pub fn build_coefficients(params: &ProblemParams, eps: f64, eps_prime: f64) -> Result<CoefficientSet, ConstantsError> {
    build_coefficients_with(params, eps, eps_prime, CoefficientScheme::ProofChain)
}

pub fn build_coefficients_with(
    params: &ProblemParams,
    eps: f64,
    eps_prime: f64,
    scheme: CoefficientScheme,
) -> Result<CoefficientSet, ConstantsError> {
    params.validate()?;
    check_eps(eps, eps_prime)?;
    let ProblemParams {
        sigma,
        kappa,
        n,
        m_bound,
        ..
    } = *params;
    let nf = n as f64;
    let s2 = sigma * sigma;
    let h = 0.5 * s2;

    let eps6 = (nf - 1.0) * (2.0 + eps) / (2.0 * (1.0 + eps));
    let eps4 = (1.0 + eps_prime) * (1.0 + eps);
    let (eps_dprime, a, b, c) = match scheme {
        CoefficientScheme::ProofChain => {
            let edp = 0.25 / (1.0 + (nf - 1.0) * eps / (4.0 * (1.0 + eps_prime)));
            let b = (1.0 + 4.0 * (1.0 + eps_prime) / ((nf - 1.0) * eps)) / kappa;
            let c = b * kappa * edp / (h * eps4);
            (edp, b * b / (c * eps), b, c)
        }
        CoefficientScheme::Consistent => {
            // One ε″ slot per Young split feeding C^{h̃}: ε₁, ε₂, b's κ/2 and, when M > 0, ε₅.
            let slots = if m_bound > 0.0 { 4.0 } else { 3.0 };
            let q = (nf - 1.0) * eps / (2.0 * eps4 * (1.0 + eps).powi(2));
            let edp = 1.0 / (slots - 1.0 / eps4 + q);
            let b = 1.0 / (kappa * edp * q);
            let c = 2.0 * b * kappa * edp / (s2 * eps4);
            (edp, b * b * (2.0 + eps) / (c * eps), b, c)
        }
    };
    let d = c / (1.0 + eps);
    let eps3 = c * eps_prime / (eps4 * b);
    let eps5 = (m_bound > 0.0).then(|| b * kappa * eps_dprime / (c * kappa * m_bound / 2.0));
    let eps2 = kappa * eps_dprime / (s2 * (nf - 1.0) / 4.0);
    let eps1 = b * kappa * eps_dprime / (a * kappa / 2.0);

    let m_term_v = eps5.map_or(0.0, |e5| c * kappa * m_bound / (2.0 * e5));
    let m_term_h = eps5.map_or(0.0, |e5| kappa * m_bound / 2.0 * e5);
    let c_v = a * (h * (nf - 2.0) - kappa / (2.0 * eps1))
        - 2.0 * b * (h * ((nf - 1.0) / (4.0 * eps2) + 1.0 / (2.0 * eps3)) + kappa * m_bound / 2.0)
        - m_term_v;
    let c_h = -a * kappa / 2.0 * eps1
        + 2.0 * b * (kappa / 2.0 - s2 * (nf - 1.0) / 8.0 * eps2)
        + c * (h - h * eps4 - m_term_h);
    let c_xi = d * h * (nf - 1.0 - eps6);
    let big_a = h * a;
    let big_b = h * b;
    let big_c = h * (c - (nf - 1.0) * d / eps6);
    let big_d = h * (d - c / eps4 - b * eps3);

    let rho = 1.0 / (b + c).max(d);
    let k = (-c_v + (a + b) * rho) * 2.0 / s2;
    Ok(CoefficientSet {
        scheme,
        sigma,
        kappa,
        n,
        m_bound,
        eps,
        eps_prime,
        a,
        b,
        c,
        d,
        eps1,
        eps2,
        eps3,
        eps4,
        eps5,
        eps6,
        eps_dprime,
        c_v,
        c_h,
        c_xi,
        big_a,
        big_b,
        big_c,
        big_d,
        k,
        k_gradient: -c_v,
        rho,
    })
}

/// One checked constraint. `margin ≥ 0` means satisfied, except for equalities,
/// where `margin` is the relative defect and must not exceed the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
    pub passed: bool,
}

impl ConstraintReport {
    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn rel_defect(x: f64, y: f64) -> f64 {
    (x - y).abs() / (1.0 + x.abs().max(y.abs()))
}

pub fn validate_coefficients(cs: &CoefficientSet) -> ConstraintReport {
    let mut checks = Vec::new();
    let mut strict = |name: &str, margin: f64| {
        checks.push(ConstraintCheck {
            name: name.into(),
            margin,
            passed: margin > 0.0,
        });
    };
    for (name, v) in [
        ("a > 0", cs.a),
        ("b > 0", cs.b),
        ("c > 0", cs.c),
        ("d > 0", cs.d),
        ("rho > 0", cs.rho),
    ] {
        strict(name, v);
    }
    strict("b^2 < ac", cs.a * cs.c - cs.b * cs.b);
    strict("Ch > 0", cs.c_h);
    strict("Cxi > 0", cs.c_xi);
    let mut nonneg = |name: &str, margin: f64, scale: f64| {
        checks.push(ConstraintCheck {
            name: name.into(),
            margin,
            passed: margin >= -EQUALITY_TOL * scale,
        });
    };
    nonneg("b^2 <= ac*eps", cs.a * cs.c * cs.eps - cs.b * cs.b, cs.a * cs.c);
    nonneg("A >= 0", cs.big_a, 1.0 + cs.big_a.abs());
    nonneg("B >= 0", cs.big_b, 1.0 + cs.big_b.abs());
    nonneg("C >= 0", cs.big_c, 1.0 + cs.big_a.abs() + cs.big_c.abs());
    nonneg("D >= 0", cs.big_d, 1.0 + cs.big_a.abs() + cs.big_c.abs());
    nonneg(
        "B^2 <= AC",
        cs.big_a * cs.big_c - cs.big_b * cs.big_b,
        cs.big_a * cs.big_c + cs.big_b * cs.big_b,
    );
    let mut equal = |name: &str, defect: f64| {
        checks.push(ConstraintCheck {
            name: name.into(),
            margin: defect,
            passed: defect <= EQUALITY_TOL,
        });
    };
    equal("D = 0", cs.big_d.abs() / (1.0 + cs.big_a.abs() + cs.big_c.abs()));
    equal("Ch = 1", rel_defect(cs.c_h, 1.0));
    equal("Cxi = 1", rel_defect(cs.c_xi, 1.0));
    equal("rho = 1/max(b+c,d)", rel_defect(cs.rho, 1.0 / (cs.b + cs.c).max(cs.d)));
    let k = (-cs.c_v + (cs.a + cs.b) / (cs.b + cs.c).max(cs.d)) * 2.0 / (cs.sigma * cs.sigma);
    equal("K = (-Cv + (a+b)rho)*2/sigma^2", rel_defect(cs.k, k));
    let passed = checks.iter().all(|c| c.passed);
    ConstraintReport { checks, passed }
}

/// `a`, `c`, `d` from the closed-form summary printed after the proof.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrintedSummary {
    pub a: f64,
    pub c: f64,
    pub d: f64,
}

pub fn printed_summary(params: &ProblemParams, eps: f64, eps_prime: f64) -> PrintedSummary {
    let nf = params.n as f64;
    let s2 = params.sigma * params.sigma;
    let lead = 1.0 + 4.0 * (1.0 + eps_prime) / ((nf - 1.0) * eps);
    PrintedSummary {
        a: s2 / (2.0 * params.kappa * params.kappa) * (nf - 1.0) * lead * lead * (1.0 + eps),
        c: 2.0 / s2 / (nf - 1.0) * eps / (1.0 + eps),
        d: 2.0 / s2 / (nf - 1.0) * eps / (1.0 + eps).powi(2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyEntry {
    pub name: String,
    pub chain: f64,
    pub printed: f64,
    /// `printed / chain`
    pub ratio: f64,
    pub matches: bool,
    /// The ratio equals `ε²` to within rounding.
    pub factor_eps_squared: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub eps: f64,
    pub entries: Vec<DiscrepancyEntry>,
}

impl DiscrepancyReport {
    pub fn entry(&self, name: &str) -> Option<&DiscrepancyEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Compares the chain values of `cs` with the printed summary formulas.
pub fn discrepancy_report(cs: &CoefficientSet) -> DiscrepancyReport {
    let params = ProblemParams {
        sigma: cs.sigma,
        kappa: cs.kappa,
        n: cs.n,
        m_bound: cs.m_bound,
        lambda: None,
    };
    let p = printed_summary(&params, cs.eps, cs.eps_prime);
    let e2 = cs.eps * cs.eps;
    let entries = [("a", cs.a, p.a), ("c", cs.c, p.c), ("d", cs.d, p.d)]
        .into_iter()
        .map(|(name, chain, printed)| {
            let ratio = printed / chain;
            DiscrepancyEntry {
                name: name.into(),
                chain,
                printed,
                ratio,
                matches: rel_defect(ratio, 1.0) <= 1e-10,
                factor_eps_squared: rel_defect(ratio, e2) <= 1e-10,
            }
        })
        .collect();
    DiscrepancyReport { eps: cs.eps, entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub lambda: f64,
    pub lambda_hat: f64,
    pub eta: f64,
    pub lambda_tilde: f64,
    /// `min(a(1−√ε), c(1−√ε), d)`
    #[serde(rename = "H1_constant")]
    pub h1_constant: f64,
    /// `K ≤ 0`, so `η` was clamped to 1.
    pub eta_clamped: bool,
}

pub fn rate_report(cs: &CoefficientSet, lambda: f64) -> Result<RateReport, ConstantsError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ConstantsError::Domain(format!("lambda = {lambda} must be positive")));
    }
    let root = 1.0 - cs.eps.sqrt();
    let h1 = (cs.a * root).min(cs.c * root).min(cs.d);
    let lambda_hat = lambda * h1;
    if cs.k + lambda_hat <= 0.0 {
        return Err(ConstantsError::DegenerateRate(cs.k + lambda_hat));
    }
    let (eta, clamped) = if cs.k <= 0.0 {
        (1.0, true)
    } else {
        (lambda_hat / (cs.k + lambda_hat), false)
    };
    Ok(RateReport {
        lambda,
        lambda_hat,
        eta,
        lambda_tilde: cs.rho * eta,
        h1_constant: h1,
        eta_clamped: clamped,
    })
}

/// The printed large-`σ = κ` limit `K_{ε,ε′}`.
pub fn asymptotic_k(n: usize, eps: f64, eps_prime: f64) -> f64 {
    let nf = n as f64;
    let lead = 1.0 + 4.0 * (1.0 + eps_prime) / ((nf - 1.0) * eps);
    let bracket = nf
        - 2.0
        - (4.0 + eps * eps / eps_prime) * (1.0 + eps) * (1.0 + eps_prime) / eps
        - (nf - 1.0).powi(2) / 16.0 * eps / ((1.0 + eps) * (1.0 + eps_prime));
    (nf - 1.0) / 2.0 * lead * lead * (1.0 + eps) * bracket
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticComparison {
    pub n: usize,
    pub eps: f64,
    pub eps_prime: f64,
    pub sigmas: Vec<f64>,
    /// `K` of the chain at `σ = κ`.
    pub k_values: Vec<f64>,
    /// Relative change between successive `K` values.
    pub successive_rel_change: Vec<f64>,
    pub printed_limit: f64,
    /// `|K(σ_last) + K_{ε,ε′}| / |K_{ε,ε′}|`
    pub rel_distance_to_printed: f64,
}

pub fn asymptotic_comparison(
    n: usize,
    eps: f64,
    eps_prime: f64,
    sigmas: &[f64],
) -> Result<AsymptoticComparison, ConstantsError> {
    let k_values = sigmas
        .iter()
        .map(|&s| build_coefficients(&ProblemParams::new(s, s, n, 0.0)?, eps, eps_prime).map(|cs| cs.k))
        .collect::<Result<Vec<_>, _>>()?;
    let successive_rel_change = k_values.windows(2).map(|w| (w[1] - w[0]).abs() / w[1].abs()).collect();
    let printed_limit = asymptotic_k(n, eps, eps_prime);
    let last = *k_values
        .last()
        .ok_or_else(|| ConstantsError::Domain("no sigma values".into()))?;
    Ok(AsymptoticComparison {
        n,
        eps,
        eps_prime,
        sigmas: sigmas.to_vec(),
        k_values,
        successive_rel_change,
        printed_limit,
        rel_distance_to_printed: (last + printed_limit).abs() / printed_limit.abs(),
    })
}

/// Poincaré constant of the unit tangent bundle with its product metric, where known.
pub fn spectral_gap(m: &ModelManifold) -> Option<f64> {
    match m.kind() {
        ManifoldKind::FlatTorus { n, side_length } => {
            let base = (2.0 * std::f64::consts::PI / side_length).powi(2);
            Some(base.min(n as f64 - 1.0))
        }
        ManifoldKind::Euclidean { .. } | ManifoldKind::Sphere2 { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running() -> CoefficientSet {
        build_coefficients(&ProblemParams::new(1.0, 1.0, 3, 0.0).unwrap(), 0.5, 1.0).unwrap()
    }

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol * (1.0 + y.abs())
    }

    #[test]
    fn running_example_chain_values() {
        let cs = running();
        assert_eq!(cs.b, 9.0);
        assert!(close(cs.eps_dprime, 2.0 / 9.0, 1e-15));
        assert!(close(cs.c, 4.0 / 3.0, 1e-14));
        assert!(close(cs.d, 8.0 / 9.0, 1e-14));
        assert!(close(cs.a, 121.5, 1e-14));
        assert!(close(cs.rho, 3.0 / 31.0, 1e-14));
        assert!(cs.eps5.is_none());
    }

    #[test]
    fn chain_equalities_hold_on_a_grid() {
        for &(s, k, n, m) in &[(1.0, 1.0, 3, 0.0), (2.0, 0.5, 2, 0.0), (1.5, 3.0, 4, 1.0)] {
            let p = ProblemParams::new(s, k, n, m).unwrap();
            for &eps in &[0.05, 0.3, 0.9] {
                for &ep in &[0.01, 1.0, 30.0] {
                    let cs = build_coefficients(&p, eps, ep).unwrap();
                    let h = s * s / 2.0;
                    assert!(close(cs.c * h * cs.eps4, cs.b * k * cs.eps_dprime, 1e-12));
                    assert!(close(cs.a, cs.b * cs.b / (cs.c * eps), 1e-12));
                    assert!(close(cs.d, cs.c / (1.0 + eps), 1e-12));
                    assert!(close(cs.b * cs.eps3, cs.c / cs.eps4 * ep, 1e-12));
                    assert!(close(
                        s * s * (n as f64 - 1.0) / 4.0 * cs.eps2,
                        k * cs.eps_dprime,
                        1e-12
                    ));
                    assert!(close(cs.a * k / 2.0 * cs.eps1, cs.b * k * cs.eps_dprime, 1e-12));
                    if let Some(e5) = cs.eps5 {
                        assert!(close(cs.c * k * m / 2.0 * e5, cs.b * k * cs.eps_dprime, 1e-12));
                    }
                    assert!(cs.big_d.abs() <= 1e-12 * (1.0 + cs.big_a.abs() + cs.big_c.abs()));
                }
            }
        }
    }

    #[test]
    fn consistent_scheme_passes_everything() {
        for &(s, k, n, m) in &[
            (1.0, 1.0, 2, 0.0),
            (1.0, 1.0, 3, 0.0),
            (2.0, 0.7, 2, 1.0),
            (1.0, 1.0, 3, 1.0),
        ] {
            let p = ProblemParams::new(s, k, n, m).unwrap();
            for &eps in &[0.1, 0.5, 0.9] {
                for &ep in &[0.1, 1.0, 10.0] {
                    let cs = build_coefficients_with(&p, eps, ep, CoefficientScheme::Consistent).unwrap();
                    let rep = validate_coefficients(&cs);
                    assert!(rep.passed, "{:?}", rep.failures().collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn chain_failures_are_reported_not_hidden() {
        let rep = validate_coefficients(&running());
        assert!(!rep.passed);
        assert!(!rep.get("B^2 <= AC").unwrap().passed);
        assert!(rep.get("b^2 <= ac*eps").unwrap().passed);
        assert!(rep.get("D = 0").unwrap().passed);
        let mut cs = running();
        cs.b *= 2.0;
        let rep = validate_coefficients(&cs);
        let c = rep.get("b^2 < ac").unwrap();
        assert!(!c.passed && c.margin < 0.0);
    }

    #[test]
    fn domain_errors() {
        let p = ProblemParams::new(1.0, 1.0, 3, 0.0).unwrap();
        assert!(matches!(
            build_coefficients(&p, 1.5, 1.0),
            Err(ConstantsError::Domain(_))
        ));
        assert!(matches!(
            build_coefficients(&p, 0.5, 0.0),
            Err(ConstantsError::Domain(_))
        ));
        assert!(ProblemParams::new(0.0, 1.0, 3, 0.0).is_err());
        assert!(ProblemParams::new(1.0, 1.0, 1, 0.0).is_err());
    }

    #[test]
    fn discrepancy_flags_eps_squared() {
        let rep = discrepancy_report(&running());
        assert!(rep.entry("a").unwrap().matches);
        for name in ["c", "d"] {
            let e = rep.entry(name).unwrap();
            assert!(!e.matches && e.factor_eps_squared, "{e:?}");
        }
    }

    #[test]
    fn rate_running_example() {
        let r = rate_report(&running(), 1.0).unwrap();
        assert!((r.lambda_hat - 4.0 / 3.0 * (1.0 - 0.5f64.sqrt())).abs() < 1e-14);
        assert!((r.lambda_hat - 0.39052).abs() < 1e-5);
        let mut prev = 0.0;
        for l in [1e-6, 1e-3, 0.1, 1.0, 10.0] {
            let cs = build_coefficients_with(
                &ProblemParams::new(1.0, 1.0, 2, 0.0).unwrap(),
                0.5,
                1.0,
                CoefficientScheme::Consistent,
            )
            .unwrap();
            let t = rate_report(&cs, l).unwrap().lambda_tilde;
            assert!(t > prev);
            prev = t;
        }
        assert!(rate_report(&running(), 0.0).is_err());
    }

    #[test]
    fn printed_limit_values() {
        let k = asymptotic_k(3, 0.5, 1.0);
        assert!((k - 121.5 * (1.0 - 25.5 - 1.0 / 24.0)).abs() < 1e-9);
        assert!((k + 2982.0).abs() < 1.0);
        for eps in [0.01, 0.5, 0.99] {
            for ep in [0.01, 1.0, 100.0] {
                assert!(asymptotic_k(2, eps, ep) < 0.0);
            }
        }
    }

    #[test]
    fn chain_k_has_a_limit() {
        let cmp = asymptotic_comparison(3, 0.5, 1.0, &[10.0, 100.0, 1000.0, 10000.0]).unwrap();
        for r in &cmp.successive_rel_change {
            assert!(*r < 0.01, "{cmp:?}");
        }
    }

    #[test]
    fn spectral_gaps() {
        assert_eq!(spectral_gap(&ModelManifold::flat_torus(2, 1.0).unwrap()), Some(1.0));
        assert_eq!(spectral_gap(&ModelManifold::flat_torus(3, 1.0).unwrap()), Some(2.0));
        assert_eq!(spectral_gap(&ModelManifold::euclidean(2).unwrap()), None);
        assert_eq!(spectral_gap(&ModelManifold::sphere2(1.0).unwrap()), None);
    }
}
