use hypokinetic::diffengine::layout;
use hypokinetic::{Jet, ModelManifold, Scalar};
use proptest::prelude::*;

fn jet(coeffs: &[f64]) -> Jet<f64> {
    Jet::from_coeffs(&layout(2, 3).unwrap(), coeffs.to_vec()).unwrap()
}

fn close(a: &Jet<f64>, b: &Jet<f64>, tol: f64) -> bool {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    // (2, 3) layout: 10 coefficients.
    prop::collection::vec(-2.0f64..2.0, 10)
}

proptest! {
    #[test]
    fn multiplication_distributes(a in coeffs(), b in coeffs(), c in coeffs()) {
        let (a, b, c) = (jet(&a), jet(&b), jet(&c));
        prop_assert!(close(&((a.clone() + b.clone()) * c.clone()), &(a * c.clone() + b * c), 1e-12));
    }

    #[test]
    fn multiplication_commutes(a in coeffs(), b in coeffs()) {
        let (a, b) = (jet(&a), jet(&b));
        prop_assert!(close(&(a.clone() * b.clone()), &(b * a), 1e-14));
    }

    #[test]
    fn exp_is_a_homomorphism(a in coeffs(), b in coeffs()) {
        let (a, b) = (jet(&a), jet(&b));
        prop_assert!(close(&(a.clone() + b.clone()).exp(), &(a.exp() * b.exp()), 1e-10));
    }

    #[test]
    fn pythagoras(a in coeffs()) {
        let a = jet(&a);
        let one = a.sin() * a.sin() + a.cos() * a.cos();
        prop_assert!(close(&one, &(jet(&[0.0; 10]) + 1.0), 1e-12));
    }

    #[test]
    fn reciprocal_inverts(mut a in coeffs()) {
        a[0] = 1.5 + a[0].abs();
        let a = jet(&a);
        prop_assert!(close(&(a.recip() * a), &(jet(&[0.0; 10]) + 1.0), 1e-12));
    }

    #[test]
    fn manifold_specs_round_trip(n in 2usize..7, l in 0.01f64..100.0, r in 0.01f64..100.0, which in 0u8..3) {
        let m = match which {
            0 => ModelManifold::euclidean(n).unwrap(),
            1 => ModelManifold::flat_torus(n, l).unwrap(),
            _ => ModelManifold::sphere2(r).unwrap(),
        };
        prop_assert_eq!(m.to_string().parse::<ModelManifold>().unwrap(), m);
    }
}
