//! Jet word derivatives against Richardson-extrapolated finite differences of the flows.

use hypokinetic::gamma::FrameDependence;
use hypokinetic::geometry::{apply_word, flow, random_frame_point, word_derivative, PhaseFunction};
use hypokinetic::{FieldId, FramePoint, ModelManifold, TestFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MANIFOLDS: [&str; 4] = ["euclidean:2", "flat-torus:3:1", "sphere2:1", "sphere2:2"];

/// `g(t_1, …, t_k) = f(Φ^{X_k}_{t_k} ∘ … ∘ Φ^{X_1}_{t_1}(p))`
fn along(m: &ModelManifold, word: &[FieldId], f: &TestFunction, p: &FramePoint, t: &[f64]) -> f64 {
    let mut q = p.clone();
    for (field, s) in word.iter().zip(t) {
        q = flow(m, *field, s, &q);
    }
    f.eval(m, &q)
}

/// Central mixed difference `∂_{t_1}…∂_{t_k} g(0)` with step `h`.
fn mixed(g: &dyn Fn(&[f64]) -> f64, k: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for mask in 0..(1u32 << k) {
        let t: Vec<f64> = (0..k).map(|i| if mask >> i & 1 == 1 { -h } else { h }).collect();
        let sign = if mask.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        acc += sign * g(&t);
    }
    acc / (2.0 * h).powi(k as i32)
}

/// One Richardson step removes the `h²` error term.
fn richardson(g: &dyn Fn(&[f64]) -> f64, k: usize, h: f64) -> f64 {
    (4.0 * mixed(g, k, h / 2.0) - mixed(g, k, h)) / 3.0
}

fn setup(name: &str, seed: u64) -> (ModelManifold, TestFunction, FramePoint) {
    let m: ModelManifold = name.parse().unwrap();
    let f = TestFunction::random(&m, seed, FrameDependence::Full);
    let p = random_frame_point(&m, &mut ChaCha8Rng::seed_from_u64(seed));
    (m, f, p)
}

fn words(m: &ModelManifold, len: usize) -> Vec<Vec<FieldId>> {
    let fields = m.fields();
    let mut out: Vec<Vec<FieldId>> = vec![vec![]];
    for _ in 0..len {
        out = out
            .iter()
            .flat_map(|w| fields.iter().map(move |f| [w.clone(), vec![*f]].concat()))
            .collect();
    }
    out
}

fn check_words(len: usize, h: f64, tol: f64) {
    for (i, name) in MANIFOLDS.iter().enumerate() {
        let (m, f, p) = setup(name, 40 + i as u64);
        for w in words(&m, len) {
            let jet = word_derivative(&m, &w, &p, &f).unwrap();
            let fd = richardson(&|t| along(&m, &w, &f, &p, t), len, h);
            assert!(
                (jet - fd).abs() <= tol * (1.0 + jet.abs()),
                "{name} {w:?}: jet {jet} vs fd {fd}"
            );
        }
    }
}

#[test]
fn single_fields() {
    check_words(1, 1e-3, 1e-9);
}

#[test]
fn words_of_length_two() {
    check_words(2, 2.5e-3, 1e-7);
}

#[test]
fn words_of_length_three() {
    check_words(3, 5e-3, 1e-5);
}

#[test]
fn words_of_length_four_by_differencing_the_first_flow() {
    use FieldId::{H, V};
    for (i, name) in MANIFOLDS.iter().enumerate() {
        let (m, f, p) = setup(name, 60 + i as u64);
        let n = m.n();
        for w in [
            [V(1), H(0), V(1), H(0)],
            [H(0), H(0), V(n - 1), H(1)],
            [V(1), V(1), H(0), H(0)],
        ] {
            let jet = apply_word(&m, &w, &f, &p).unwrap();
            let inner = |t: &[f64]| word_derivative(&m, &w[1..], &flow(&m, w[0], &t[0], &p), &f).unwrap();
            let fd = richardson(&inner, 1, 1e-3);
            assert!(
                (jet - fd).abs() <= 1e-7 * (1.0 + jet.abs()),
                "{name} {w:?}: jet {jet} vs fd {fd}"
            );
        }
    }
}
