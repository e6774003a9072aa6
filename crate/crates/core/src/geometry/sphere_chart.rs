//! The sphere `S²(r)` in the chart `(θ, φ)` with metric `r²(dθ² + sin²θ dφ²)`.
//!
//! Here the frame-bundle fields are written as first-order operators with
//! the standard horizontal lift
//! `H_a = e^a_k ∂_{x_k} − Γ^l_{km} e^a_k e^j_m ∂_{e^j_l}`,
//! and words are evaluated by applying the operators one after another.
//! This is independent of the rotation-group flows used elsewhere, so
//! agreement between the two is a check on the lift convention.

use crate::diffengine::{layout, Jet, Scalar};
use crate::geometry::{FieldId, FramePoint, GeometryError, ModelManifold, PhaseFunction, PhasePoint};

const DOMAIN_GUARD: f64 = 1e-6;

pub(crate) fn check_domain(theta: f64) -> Result<(), GeometryError> {
    if !(theta > 0.0 && theta < std::f64::consts::PI) || theta.sin() < DOMAIN_GUARD {
        return Err(GeometryError::ChartDomain(format!("theta = {theta} is at a pole")));
    }
    Ok(())
}

fn radius(m: &ModelManifold) -> f64 {
    m.radius().expect("sphere chart requires a Sphere2 manifold")
}

/// Chart coordinates of a sphere point. Frame rows are returned in `(θ, φ)` components.
pub fn to_chart(m: &ModelManifold, p: &FramePoint) -> Result<FramePoint, GeometryError> {
    let r = m
        .radius()
        .ok_or_else(|| GeometryError::InvalidManifold("chart conversion needs Sphere2".into()))?;
    let u: Vec<f64> = p.x.iter().map(|v| v / r).collect();
    let theta = u[2].clamp(-1.0, 1.0).acos();
    let phi = u[1].atan2(u[0]);
    check_domain(theta)?;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let d_theta = [r * ct * cp, r * ct * sp, -r * st];
    let d_phi = [-r * st * sp, r * st * cp, 0.0];
    let dot = |a: &[f64], b: &[f64; 3]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let e =
        p.e.iter()
            .map(|row| vec![dot(row, &d_theta) / (r * r), dot(row, &d_phi) / (r * r * st * st)])
            .collect();
    Ok(PhasePoint { x: vec![theta, phi], e })
}

/// Ambient representation of a chart point (any scalar type).
pub fn to_ambient<S: Scalar>(m: &ModelManifold, q: &PhasePoint<S>) -> PhasePoint<S> {
    let r = radius(m);
    let (st, ct) = q.x[0].sin_cos();
    let (sp, cp) = q.x[1].sin_cos();
    let x = vec![st.clone() * cp.clone() * r, st.clone() * sp.clone() * r, ct.clone() * r];
    let d_theta = [
        ct.clone() * cp.clone() * r,
        ct.clone() * sp.clone() * r,
        -(st.clone() * r),
    ];
    let d_phi = [-(st.clone() * sp * r), st * cp * r, S::from_f64(0.0)];
    let e =
        q.e.iter()
            .map(|row| {
                (0..3)
                    .map(|k| row[0].clone() * d_theta[k].clone() + row[1].clone() * d_phi[k].clone())
                    .collect()
            })
            .collect();
    PhasePoint { x, e }
}

// Coordinate order for derivatives: θ, φ, e^0_θ, e^0_φ, e^1_θ, e^1_φ.
const NCOORD: usize = 6;

fn coords<S: Clone>(q: &PhasePoint<S>) -> [S; NCOORD] {
    [
        q.x[0].clone(),
        q.x[1].clone(),
        q.e[0][0].clone(),
        q.e[0][1].clone(),
        q.e[1][0].clone(),
        q.e[1][1].clone(),
    ]
}

fn from_coords<S>(c: [S; NCOORD]) -> PhasePoint<S> {
    let [t, p, a, b, c2, d] = c;
    PhasePoint {
        x: vec![t, p],
        e: vec![vec![a, b], vec![c2, d]],
    }
}

/// Components of a field in the six chart coordinates at `q`.
pub fn field_components<S: Scalar>(field: FieldId, q: &PhasePoint<S>) -> [S; NCOORD] {
    let z = || S::from_f64(0.0);
    match field {
        FieldId::V(i) => {
            // V_i = e^i_k ∂_{e^0_k} − e^0_k ∂_{e^i_k}; only i = 1 exists on a surface.
            assert_eq!(i, 1);
            [
                z(),
                z(),
                q.e[1][0].clone(),
                q.e[1][1].clone(),
                -q.e[0][0].clone(),
                -q.e[0][1].clone(),
            ]
        }
        FieldId::H(a) => {
            let (st, ct) = q.x[0].sin_cos();
            let cot = ct.clone() * st.clone().recip();
            let sc = st * ct;
            let ea = &q.e[a];
            let mut out = [ea[0].clone(), ea[1].clone(), z(), z(), z(), z()];
            for j in 0..2 {
                let ej = &q.e[j];
                // −Γ^θ_φφ e^a_φ e^j_φ and −Γ^φ_θφ (e^a_θ e^j_φ + e^a_φ e^j_θ)
                out[2 + 2 * j] = sc.clone() * ea[1].clone() * ej[1].clone();
                out[3 + 2 * j] = -(cot.clone() * (ea[0].clone() * ej[1].clone() + ea[1].clone() * ej[0].clone()));
            }
            out
        }
    }
}

/// A function of chart coordinates.
pub trait ChartFunction {
    fn eval<S: Scalar>(&self, q: &PhasePoint<S>) -> S;
}

struct Pullback<'a, F> {
    m: ModelManifold,
    f: &'a F,
}

impl<F: PhaseFunction> ChartFunction for Pullback<'_, F> {
    fn eval<S: Scalar>(&self, q: &PhasePoint<S>) -> S {
        self.f.eval(&self.m, &to_ambient(&self.m, q))
    }
}

struct Applied<'a, G> {
    field: FieldId,
    inner: &'a G,
}

impl<G: ChartFunction> ChartFunction for Applied<'_, G> {
    fn eval<S: Scalar>(&self, q: &PhasePoint<S>) -> S {
        let lay = layout(NCOORD, 1).expect("order 1 layout");
        let c = coords(q);
        let lifted = from_coords(std::array::from_fn(|k| Jet::variable(&lay, k, c[k].clone())));
        let g = self.inner.eval(&lifted);
        let comps = field_components(self.field, q);
        let mut alpha = [0u8; NCOORD];
        let mut acc = S::from_f64(0.0);
        for (k, comp) in comps.into_iter().enumerate() {
            alpha[k] = 1;
            acc = acc + comp * g.coeff(&alpha);
            alpha[k] = 0;
        }
        acc
    }
}

/// `(X_1 … X_k f)(q)` at a chart point for words of length at most 3.
pub fn chart_word<F: PhaseFunction>(
    m: &ModelManifold,
    word: &[FieldId],
    f: &F,
    q: &FramePoint,
) -> Result<f64, GeometryError> {
    for field in word {
        m.check_field(*field)?;
    }
    check_domain(q.x[0])?;
    let base = Pullback { m: *m, f };
    Ok(match word {
        [] => base.eval(q),
        [a] => Applied {
            field: *a,
            inner: &base,
        }
        .eval(q),
        [a, b] => {
            let g = Applied {
                field: *b,
                inner: &base,
            };
            Applied { field: *a, inner: &g }.eval(q)
        }
        [a, b, c] => {
            let g = Applied {
                field: *c,
                inner: &base,
            };
            let h = Applied { field: *b, inner: &g };
            Applied { field: *a, inner: &h }.eval(q)
        }
        _ => return Err(GeometryError::WordLength(word.len())),
    })
}
