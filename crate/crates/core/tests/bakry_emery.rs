use hypokinetic::constants::{build_coefficients_with, validate_coefficients, CoefficientScheme, ProblemParams};
use hypokinetic::gamma::{check_bakry_emery, sample, FrameDependence, GammaError};
use hypokinetic::ModelManifold;

fn worst_slacks(m: &ModelManifold, sigma: f64, kappa: f64, eps: f64, eps_prime: f64, samples: u64) -> (f64, f64) {
    let params = ProblemParams::for_manifold(m, sigma, kappa).unwrap();
    let cs = build_coefficients_with(&params, eps, eps_prime, CoefficientScheme::Consistent).unwrap();
    assert!(validate_coefficients(&cs).passed, "{m} ({eps}, {eps_prime})");
    (0..samples).fold((f64::INFINITY, f64::INFINITY), |(w1, w2), k| {
        let (f, p) = sample(m, 17, k, FrameDependence::Velocity);
        let s = check_bakry_emery(&cs, m, sigma, kappa, &f, &p).unwrap();
        (w1.min(s.s1 / s.scale1), w2.min(s.s2 / s.scale2))
    })
}

#[test]
fn consistent_coefficients_certify_both_inequalities() {
    for name in ["euclidean:2", "euclidean:3", "flat-torus:2:1", "sphere2:1", "sphere2:2"] {
        let m: ModelManifold = name.parse().unwrap();
        for (sigma, kappa) in [(1.0, 1.0), (2.0, 0.5), (0.7, 1.5)] {
            for (eps, ep) in [(0.2, 0.5), (0.5, 1.0), (0.8, 4.0)] {
                let (w1, w2) = worst_slacks(&m, sigma, kappa, eps, ep, 60);
                assert!(
                    w1 >= -1e-7 && w2 >= -1e-7,
                    "{name} σ={sigma} κ={kappa} ε={eps} ε′={ep}: {w1:e} {w2:e}"
                );
            }
        }
    }
}

#[test]
fn curvature_bound_must_cover_the_manifold() {
    let m: ModelManifold = "sphere2:1".parse().unwrap();
    let flat = ProblemParams::new(1.0, 1.0, 2, 0.0).unwrap();
    let cs = build_coefficients_with(&flat, 0.5, 1.0, CoefficientScheme::Consistent).unwrap();
    let (f, p) = sample(&m, 1, 0, FrameDependence::Velocity);
    assert!(matches!(
        check_bakry_emery(&cs, &m, 1.0, 1.0, &f, &p),
        Err(GammaError::Configuration(_))
    ));
    assert!(matches!(
        check_bakry_emery(&cs, &m, 2.0, 1.0, &f, &p),
        Err(GammaError::Configuration(_))
    ));
}
