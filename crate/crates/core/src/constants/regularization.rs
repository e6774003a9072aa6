//! Short-time regularization: coefficients making `s ↦ F_s` nonincreasing, where
//! `F_s` mixes `P_{t−s}` of `f²`, `s‖∇ᵛ‖²`-type and `s³…s⁸`-weighted gradient terms.

use serde::{Deserialize, Serialize};

use super::{ConstantsError, ProblemParams};

/// Number of log-spaced points in `[10⁻⁹, 1]` on which sign conditions are checked.
pub const REGULARIZATION_GRID: usize = 2000;
const S_MIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationSet {
    pub sigma: f64,
    pub kappa: f64,
    pub n: usize,
    #[serde(rename = "M")]
    pub m_bound: f64,
    /// `(a, b, c)` as supplied.
    pub input: [f64; 3],
    /// Joint factor applied so that `2a²κ/b = σ²/3`.
    pub rescale: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub c_hat: f64,
    pub eps2: f64,
    pub eps5: f64,
    pub eps6: f64,
    pub eps11: f64,
    pub s_max: f64,
    /// `min(1, s_max)`
    pub t0: f64,
    pub a_tilde: f64,
    pub c_tilde: f64,
    pub grid_points: usize,
}

/// Coefficients of the quadratic bound on `dF_s/ds` at a given `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CoefficientFunctions {
    pub A: f64,
    pub B: f64,
    pub C: f64,
    pub A_hat: f64,
    pub B_hat: f64,
    pub C_hat: f64,
    pub Cv: f64,
    pub Ch: f64,
    pub Cxi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCheck {
    pub name: &'static str,
    pub value: f64,
    pub passed: bool,
}

/// Least-squares leading coefficients on `s ∈ [10⁻³, 10⁻²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingOrderFit {
    /// Fitted `A(s)/s²`.
    pub alpha: f64,
    /// `−a σ²/2`
    pub alpha_expected: f64,
    /// Fitted `C(s)/s⁶`.
    pub gamma: f64,
    /// `−(c/2) σ²/2`
    pub gamma_expected: f64,
}

impl LeadingOrderFit {
    pub fn alpha_rel_error(&self) -> f64 {
        (self.alpha / self.alpha_expected - 1.0).abs()
    }

    pub fn gamma_rel_error(&self) -> f64 {
        (self.gamma / self.gamma_expected - 1.0).abs()
    }
}

impl RegularizationSet {
    pub fn eps1(&self, s: f64) -> f64 {
        self.b * s * s / (2.0 * self.a)
    }
    pub fn eps3(&self, s: f64) -> f64 {
        self.c_hat * s.powi(4) / (4.0 * self.b)
    }
    pub fn eps4(&self, s: f64) -> f64 {
        4.0 * self.c / (self.c_hat * s * s)
    }
    pub fn eps7(&self, s: f64) -> f64 {
        self.b_hat * s * s / (2.0 * self.a_hat)
    }
    pub fn eps8(&self, s: f64) -> f64 {
        self.c * self.sigma * self.sigma * s * s / (4.0 * self.a_hat * self.kappa * (self.n as f64 - 1.0))
    }
    pub fn eps9(&self, s: f64) -> f64 {
        s
    }
    pub fn eps10(&self, s: f64) -> f64 {
        s
    }
    pub fn eps12(&self, s: f64) -> f64 {
        (self.n as f64 - 1.0) * self.kappa * s / 12.0
    }
    pub fn eps13(&self, s: f64) -> f64 {
        self.kappa * s / 8.0
    }

    pub fn coefficients(&self, s: f64) -> CoefficientFunctions {
        let (a, b, c) = (self.a, self.b, self.c);
        let (ah, bh, ch) = (self.a_hat, self.b_hat, self.c_hat);
        let (sig2, kap, m) = (self.sigma * self.sigma, self.kappa, self.m_bound);
        let n1 = self.n as f64 - 1.0;
        let n2 = self.n as f64 - 2.0;
        let (e1, e2, e3, e4) = (self.eps1(s), self.eps2, self.eps3(s), self.eps4(s));
        let (e5, e6, e7, e8) = (self.eps5, self.eps6, self.eps7(s), self.eps8(s));
        let (e9, e10, e11, e12, e13) = (self.eps9(s), self.eps10(s), self.eps11, self.eps12(s), self.eps13(s));
        let p = |k: i32| s.powi(k);

        let big_a = -a * sig2 * p(2)
            + 4.0 * bh * p(6) * n1 * sig2 * (n1 / (8.0 * e9) + 1.0 / (4.0 * e10))
            + 4.0 * ah * p(3) * n1
            + 2.0 * ah * p(4) * (kap * n1 * n1 / (2.0 * e7) + kap * n1 / e8)
            + 6.0 * bh * p(5) * n1 / e12;
        let big_c = -c * sig2 * p(6)
            + 2.0 * ah * p(4) * kap * n1 * e8
            + bh * p(6) * n1 * e10 * sig2
            + 2.0 * bh * p(6) * kap * n1 / e11
            + ch * p(8) * sig2 * n1 / e6;
        let c_h = b * sig2 * e3 * p(4) + c * sig2 * p(6) / e4 - ch * sig2 * p(8);
        let c_v = -sig2 + 2.0 * a * s - 2.0 * a * p(2) * (sig2 * n2 / 2.0 - kap / (2.0 * e1))
            + 4.0 * b * p(3) / e13
            + 4.0 * b * p(4) * (sig2 * n1 / (8.0 * e2) + sig2 / (4.0 * e3) + kap * m / 2.0)
            + c * p(6) * kap * m / e5;
        let c_hh = a * p(2) * kap * e1
            + 4.0 * b * p(4) * (sig2 * n1 * e2 / 8.0 - kap / 2.0)
            + 4.0 * b * p(3) * e13
            + 6.0 * c * p(5)
            - 2.0 * c * p(6) * (sig2 / 2.0 - sig2 * e4 / 2.0 - kap * m * e5 / 2.0);
        let c_xi = ah * p(4) * kap * n1 * e7 + 6.0 * bh * p(5) * e12 + 8.0 * ch * p(7) - ch * p(8) * sig2 * (n1 - e6)
            + 4.0 * bh * p(6) * (-n1 * kap / 2.0 + n1 * sig2 * e9 / 8.0 + kap * e11 / 2.0);
        CoefficientFunctions {
            A: big_a,
            B: -b * sig2 * p(4),
            C: big_c,
            A_hat: -ah * sig2 * p(4),
            B_hat: -bh * sig2 * p(6),
            C_hat: c_h,
            Cv: c_v,
            Ch: c_hh,
            Cxi: c_xi,
        }
    }

    /// All sign and discriminant conditions required at `s`.
    pub fn sign_checks(&self, s: f64) -> Vec<SignCheck> {
        let k = self.coefficients(s);
        let le0 = |name, value: f64| SignCheck {
            name,
            value,
            passed: value <= 0.0,
        };
        vec![
            le0("A <= 0", k.A),
            le0("C <= 0", k.C),
            le0("B^2 - AC <= 0", k.B * k.B - k.A * k.C),
            le0("A_hat <= 0", k.A_hat),
            le0("C_hat <= 0", k.C_hat),
            le0("B_hat^2 - A_hat C_hat <= 0", k.B_hat * k.B_hat - k.A_hat * k.C_hat),
            le0("Cv <= 0", k.Cv),
            le0("Ch <= 0", k.Ch),
            le0("Cxi <= 0", k.Cxi),
        ]
    }

    pub fn all_signs_hold(&self, s: f64) -> bool {
        self.sign_checks(s).iter().all(|c| c.passed)
    }

    /// The `s` grid used for certification.
    pub fn grid(&self) -> Vec<f64> {
        s_grid(self.grid_points)
    }

    pub fn leading_order_fit(&self) -> LeadingOrderFit {
        let h = 0.5 * self.sigma * self.sigma;
        let pts: Vec<f64> = (0..50).map(|i| 10f64.powf(-3.0 + i as f64 / 49.0)).collect();
        let fit = |deg: i32, value: &dyn Fn(&CoefficientFunctions) -> f64| {
            let num: f64 = pts.iter().map(|&s| value(&self.coefficients(s)) * s.powi(deg)).sum();
            let den: f64 = pts.iter().map(|&s| s.powi(2 * deg)).sum();
            num / den
        };
        LeadingOrderFit {
            alpha: fit(2, &|k| k.A),
            alpha_expected: -self.a * h,
            gamma: fit(6, &|k| k.C),
            gamma_expected: -0.5 * self.c * h,
        }
    }

    /// `2b̂² < âĉ`
    pub fn hat_discriminant_margin(&self) -> f64 {
        self.a_hat * self.c_hat - 2.0 * self.b_hat * self.b_hat
    }
}

fn s_grid(k: usize) -> Vec<f64> {
    let lo = S_MIN.ln();
    (0..k).map(|i| (lo * (1.0 - i as f64 / (k - 1) as f64)).exp()).collect()
}

/// Runs the choice chain for `(a, b, c)` with `4b² < ac` and certifies signs on the grid.
pub fn regularization_scheme(
    params: &ProblemParams,
    a: f64,
    b: f64,
    c: f64,
) -> Result<RegularizationSet, ConstantsError> {
    params.validate()?;
    if [a, b, c].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(ConstantsError::Domain(format!("a={a}, b={b}, c={c} must be positive")));
    }
    if 4.0 * b * b >= a * c {
        return Err(ConstantsError::Precondition(format!(
            "4b² = {} ≥ ac = {}",
            4.0 * b * b,
            a * c
        )));
    }
    let ProblemParams {
        sigma,
        kappa,
        n,
        m_bound,
        ..
    } = *params;
    let sig2 = sigma * sigma;
    let n1 = n as f64 - 1.0;

    let rescale = sig2 * b / (6.0 * a * a * kappa);
    let (ra, rb, rc) = (a * rescale, b * rescale, c * rescale);
    let b_hat = rc * sig2 / (32.0 * kappa);
    let a_hat =
        ((ra * sig2 / 2.0) / (2.0 * kappa * n1 * n1 / b_hat + 8.0 * kappa * kappa * n1 * n1 / (rc * sig2))).sqrt();
    let thresholds = [
        24.0 * rc * rc * sig2 / (rb * kappa),
        4.0 * b_hat * b_hat / a_hat,
        24.0 * rb * rb / sig2,
        12.0 * rb * rb,
    ];
    let c_hat = 2.0 * thresholds.iter().cloned().fold(0.0, f64::max);

    let mut set = RegularizationSet {
        sigma,
        kappa,
        n,
        m_bound,
        input: [a, b, c],
        rescale,
        a: ra,
        b: rb,
        c: rc,
        a_hat,
        b_hat,
        c_hat,
        eps2: kappa / (sig2 * n1),
        eps5: 1.0,
        eps6: 1.0,
        eps11: n1 / 4.0,
        s_max: 0.0,
        t0: 0.0,
        a_tilde: 2.0 / ra,
        c_tilde: 2.0 / rc + 2.0 / c_hat,
        grid_points: REGULARIZATION_GRID,
    };
    let mut s_max = None;
    for s in s_grid(REGULARIZATION_GRID) {
        if !set.all_signs_hold(s) {
            break;
        }
        s_max = Some(s);
    }
    let s_max =
        s_max.ok_or_else(|| ConstantsError::Infeasible(format!("sign conditions already fail at s = {S_MIN:e}")))?;
    set.s_max = s_max;
    set.t0 = s_max.min(1.0);
    Ok(set)
}
