use hypokinetic::constants::{build_coefficients_with, CoefficientScheme, ProblemParams};
use hypokinetic::gamma::{
    gamma, gamma2, generator_apply, sample, sigma2, tensor_t, FrameDependence, GammaKind, Method, TensorCoefficients,
};
use hypokinetic::{ModelManifold, TestFunction};

const MANIFOLDS: [&str; 5] = [
    "euclidean:3",
    "flat-torus:2:1",
    "flat-torus:3:2",
    "sphere2:1",
    "sphere2:0.5",
];

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-10 * (1.0 + scale)
}

fn battery() -> impl Iterator<Item = (ModelManifold, TestFunction, TestFunction, hypokinetic::FramePoint)> {
    MANIFOLDS.into_iter().flat_map(|name| {
        let m: ModelManifold = name.parse().unwrap();
        (0..10).map(move |k| {
            let (f, p) = sample(&m, 11, k, FrameDependence::Full);
            let (g, _) = sample(&m, 12, k, FrameDependence::Full);
            (m, f, g, p)
        })
    })
}

#[test]
fn gamma_forms_are_symmetric_and_bilinear() {
    for (m, f, g, p) in battery() {
        let h = f.plus(&g, -0.7);
        for kind in GammaKind::GAMMA {
            let fg = gamma(kind, &m, &f, &g, &p);
            assert!(close(fg, gamma(kind, &m, &g, &f, &p), fg.abs()), "{kind:?} symmetry");
            let lhs = gamma(kind, &m, &h, &g, &p);
            let rhs = gamma(kind, &m, &f, &g, &p) - 0.7 * gamma(kind, &m, &g, &g, &p);
            assert!(
                close(lhs, rhs, lhs.abs().max(rhs.abs())),
                "{kind:?} linearity: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn diagonal_forms_are_nonnegative() {
    for (m, f, _, p) in battery() {
        for kind in [GammaKind::Vv, GammaKind::HH, GammaKind::Xi] {
            assert!(gamma(kind, &m, &f, &f, &p) >= 0.0, "{kind:?}");
        }
    }
}

#[test]
fn leibniz_rule_for_squares() {
    for (m, f, g, p) in battery() {
        let fv = f.value(&p);
        for kind in GammaKind::GAMMA {
            let lhs = gamma(kind, &m, &f.squared(), &g, &p);
            let rhs = 2.0 * fv * gamma(kind, &m, &f, &g, &p);
            assert!(close(lhs, rhs, lhs.abs()), "{kind:?}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn carre_du_champ_identity() {
    // L(f²) − 2fLf = 2Γ(f,f) with Γ = (σ²/2)Γᵛ.
    for (sigma, kappa) in [(1.0, 1.0), (0.5, 2.0)] {
        for (m, f, _, p) in battery() {
            let lhs = generator_apply(&m, sigma, kappa, &f.squared(), &p)
                - 2.0 * f.value(&p) * generator_apply(&m, sigma, kappa, &f, &p);
            let rhs = sigma * sigma * gamma(GammaKind::Vv, &m, &f, &f, &p);
            assert!(close(lhs, rhs, lhs.abs()), "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn generator_is_linear() {
    for (m, f, g, p) in battery() {
        let lhs = generator_apply(&m, 1.3, 0.8, &f.plus(&g, 2.5), &p);
        let rhs = generator_apply(&m, 1.3, 0.8, &f, &p) + 2.5 * generator_apply(&m, 1.3, 0.8, &g, &p);
        assert!(close(lhs, rhs, lhs.abs()));
    }
}

#[test]
fn gamma2_methods_agree_off_unit_parameters() {
    // The closed forms describe functions on the unit tangent bundle, so only `e^0` may enter.
    for (m, _, _, p) in battery() {
        let (f, _) = sample(&m, 13, 0, FrameDependence::Velocity);
        for kind in GammaKind::GAMMA {
            let d = gamma2(kind, Method::Definitional, &m, 0.9, 1.4, &f, &p).unwrap();
            let c = gamma2(kind, Method::Closed, &m, 0.9, 1.4, &f, &p).unwrap();
            assert!((d - c).abs() <= 1e-8 * (1.0 + c.abs()), "{kind:?} on {m}: {d} vs {c}");
        }
        assert!(gamma2(GammaKind::SigmaV, Method::Closed, &m, 1.0, 1.0, &f, &p).is_err());
        assert!(sigma2(GammaKind::Vv, Method::Closed, &m, 1.0, 1.0, &f, &p).is_err());
    }
}

#[test]
fn tensor_dominates_the_h1_energy() {
    // b² ≤ εac gives T ≥ min(a(1−√ε), c(1−√ε), d)(Γᵛ + Γ^{h̃} + Γ^ξ).
    for (m, f, _, p) in battery() {
        let params = ProblemParams::for_manifold(&m, 1.0, 1.0).unwrap();
        let cs = build_coefficients_with(&params, 0.4, 1.0, CoefficientScheme::Consistent).unwrap();
        let tc = TensorCoefficients::new(cs.a, cs.b, cs.c, cs.d).unwrap();
        let t = tensor_t(&tc, &m, &f, &p);
        assert!(t.nonnegative_certified);
        let root = 1.0 - cs.eps.sqrt();
        let h1 = (cs.a * root).min(cs.c * root).min(cs.d);
        let energy = [GammaKind::Vv, GammaKind::HH, GammaKind::Xi]
            .iter()
            .map(|&k| gamma(k, &m, &f, &f, &p))
            .sum::<f64>();
        assert!(
            t.value >= h1 * energy - 1e-10 * (1.0 + t.value.abs()),
            "{} < {}",
            t.value,
            h1 * energy
        );
    }
}
