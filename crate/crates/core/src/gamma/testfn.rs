use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffengine::Scalar;
use crate::geometry::{FramePoint, ManifoldKind, ModelManifold, PhasePoint};

/// Position part of a term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PositionFactor {
    One,
    /// `cos(Σ_k freq_k x_k + phase)`
    Trig {
        freq: Vec<f64>,
        phase: f64,
    },
    /// `Π_k x_k^{powers_k}`
    Monomial {
        powers: Vec<u32>,
    },
}

/// `coeff × position factor × Π e^{row}_{col}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub position: PositionFactor,
    /// Frame entries `(row, col)` multiplied together.
    pub frame: Vec<(usize, usize)>,
}

/// Which frame rows a random function may read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameDependence {
    /// Only `e^0`: a genuine function on the unit tangent bundle.
    Velocity,
    /// Any frame row.
    Full,
}

/// Smooth scalar function of position and frame: `(Σ terms)^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    terms: Vec<Term>,
    exponent: u32,
    seed: Option<u64>,
}

/// Number of terms in a random test function.
pub const RANDOM_TERMS: usize = 4;

impl TestFunction {
    pub fn from_terms(terms: Vec<Term>) -> Self {
        TestFunction {
            terms,
            exponent: 1,
            seed: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms(vec![Term {
            coeff: c,
            position: PositionFactor::One,
            frame: vec![],
        }])
    }

    /// The coordinate function `x_k` (zero-based).
    pub fn coordinate(k: usize) -> Self {
        let mut powers = vec![0; k + 1];
        powers[k] = 1;
        Self::from_terms(vec![Term {
            coeff: 1.0,
            position: PositionFactor::Monomial { powers },
            frame: vec![],
        }])
    }

    /// The frame entry `e^row_col` (zero-based).
    pub fn frame_entry(row: usize, col: usize) -> Self {
        Self::from_terms(vec![Term {
            coeff: 1.0,
            position: PositionFactor::One,
            frame: vec![(row, col)],
        }])
    }

    /// `cos(2π m x_k / L)`.
    pub fn cos_mode(k: usize, m: i32, side_length: f64) -> Self {
        let mut freq = vec![0.0; k + 1];
        freq[k] = 2.0 * std::f64::consts::PI * m as f64 / side_length;
        Self::from_terms(vec![Term {
            coeff: 1.0,
            position: PositionFactor::Trig { freq, phase: 0.0 },
            frame: vec![],
        }])
    }

    /// Seeded random trigonometric polynomial suited to the manifold.
    ///
    /// Torus frequencies are integer multiples of `2π/L`, so the function is periodic.
    pub fn random(m: &ModelManifold, seed: u64, dependence: FrameDependence) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = m.n();
        let dim = m.position_dim();
        let rows = match dependence {
            FrameDependence::Velocity => 1,
            FrameDependence::Full => n,
        };
        let terms = (0..RANDOM_TERMS)
            .map(|_| {
                let coeff = rng.random_range(-1.0..1.0);
                let position = match m.kind() {
                    ManifoldKind::FlatTorus { side_length, .. } => {
                        let base = 2.0 * std::f64::consts::PI / side_length;
                        let freq = (0..dim).map(|_| base * rng.random_range(-1i32..=1) as f64).collect();
                        PositionFactor::Trig {
                            freq,
                            phase: rng.random_range(0.0..std::f64::consts::TAU),
                        }
                    }
                    ManifoldKind::Euclidean { .. } => {
                        if rng.random_bool(0.25) {
                            let mut powers = vec![0; dim];
                            for _ in 0..rng.random_range(1..=2) {
                                powers[rng.random_range(0..dim)] += 1;
                            }
                            PositionFactor::Monomial { powers }
                        } else {
                            let freq = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
                            PositionFactor::Trig {
                                freq,
                                phase: rng.random_range(0.0..std::f64::consts::TAU),
                            }
                        }
                    }
                    ManifoldKind::Sphere2 { radius } => {
                        let freq = (0..dim).map(|_| rng.random_range(-1.5..1.5) / radius).collect();
                        PositionFactor::Trig {
                            freq,
                            phase: rng.random_range(0.0..std::f64::consts::TAU),
                        }
                    }
                };
                let degree = rng.random_range(0..=2);
                let frame = (0..degree)
                    .map(|_| (rng.random_range(0..rows), rng.random_range(0..dim)))
                    .collect();
                Term { coeff, position, frame }
            })
            .collect();
        TestFunction {
            terms,
            exponent: 1,
            seed: Some(seed),
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Whether the function reads frame rows other than `e^0`.
    pub fn dependence(&self) -> FrameDependence {
        if self.terms.iter().flat_map(|t| &t.frame).all(|&(r, _)| r == 0) {
            FrameDependence::Velocity
        } else {
            FrameDependence::Full
        }
    }

    /// `self + scale · other`.
    pub fn plus(&self, other: &TestFunction, scale: f64) -> TestFunction {
        assert!(
            self.exponent == 1 && other.exponent == 1,
            "sums of powers are not representable"
        );
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| Term {
            coeff: t.coeff * scale,
            ..t.clone()
        }));
        TestFunction {
            terms,
            exponent: 1,
            seed: None,
        }
    }

    pub fn scaled(&self, c: f64) -> TestFunction {
        assert_eq!(self.exponent, 1, "scaling a power is not representable");
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff * c,
                ..t.clone()
            })
            .collect();
        TestFunction {
            terms,
            exponent: 1,
            seed: self.seed,
        }
    }

    /// `f²`.
    pub fn squared(&self) -> TestFunction {
        TestFunction {
            exponent: self.exponent * 2,
            ..self.clone()
        }
    }

    pub fn eval_point<S: Scalar>(&self, p: &PhasePoint<S>) -> S {
        let mut sum = S::from_f64(0.0);
        for t in &self.terms {
            if t.coeff == 0.0 {
                continue;
            }
            let mut v = match &t.position {
                PositionFactor::One => S::from_f64(t.coeff),
                PositionFactor::Trig { freq, phase } => {
                    let mut arg = S::from_f64(*phase);
                    for (x, w) in p.x.iter().zip(freq) {
                        if *w != 0.0 {
                            arg = arg + x.clone() * *w;
                        }
                    }
                    arg.cos() * t.coeff
                }
                PositionFactor::Monomial { powers } => {
                    let mut v = S::from_f64(t.coeff);
                    for (x, &k) in p.x.iter().zip(powers) {
                        for _ in 0..k {
                            v = v * x.clone();
                        }
                    }
                    v
                }
            };
            for &(r, c) in &t.frame {
                v = v * p.e[r][c].clone();
            }
            sum = sum + v;
        }
        let mut out = sum.clone();
        for _ in 1..self.exponent {
            out = out * sum.clone();
        }
        out
    }

    pub fn value(&self, p: &FramePoint) -> f64 {
        self.eval_point(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_functions() {
        let p = FramePoint {
            x: vec![0.3, -0.2],
            e: vec![vec![0.6, 0.8], vec![-0.8, 0.6]],
        };
        assert_eq!(TestFunction::constant(2.5).value(&p), 2.5);
        assert_eq!(TestFunction::coordinate(1).value(&p), -0.2);
        assert_eq!(TestFunction::frame_entry(1, 0).value(&p), -0.8);
        let c = TestFunction::cos_mode(0, 1, 1.0).value(&p);
        assert!((c - (std::f64::consts::TAU * 0.3).cos()).abs() < 1e-15);
        let f = TestFunction::coordinate(0).plus(&TestFunction::frame_entry(0, 1), 2.0);
        assert!((f.value(&p) - 1.9).abs() < 1e-15);
        assert!((f.squared().value(&p) - 3.61).abs() < 1e-14);
    }

    #[test]
    fn random_functions_respect_dependence_and_periodicity() {
        let m = ModelManifold::flat_torus(3, 2.0).unwrap();
        for seed in 0..20 {
            let f = TestFunction::random(&m, seed, FrameDependence::Velocity);
            assert_eq!(f.dependence(), FrameDependence::Velocity);
            assert_eq!(f.term_count(), RANDOM_TERMS);
            let p = FramePoint {
                x: vec![0.1, 0.7, 1.3],
                e: crate::geometry::gram_schmidt(&[vec![1.0, 0.2, 0.1], vec![0.0, 1.0, 0.3], vec![0.2, 0.0, 1.0]]),
            };
            let mut shifted = p.clone();
            shifted.x[1] += 2.0;
            assert!((f.value(&p) - f.value(&shifted)).abs() < 1e-12);
        }
        assert_eq!(
            TestFunction::random(&m, 1, FrameDependence::Full),
            TestFunction::random(&m, 1, FrameDependence::Full)
        );
    }
}
