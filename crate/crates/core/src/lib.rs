//! Numerical laboratory for kinetic Brownian motion on model manifolds.
//!
//! * [`geometry`]: model manifolds, frame-bundle fields, flows, brackets.
//! * [`diffengine`]: truncated multivariate Taylor jets.
//! * [`gamma`]: `Γ`, `Γ₂`, `Σ₂` operators, definitional and closed forms.
//! * [`constants`]: hypocoercivity coefficients, rates, regularization scheme.
//! * [`simulator`]: Strang-splitting ensembles and rate fitting.

pub mod constants;
pub mod diffengine;
pub mod gamma;
pub mod geometry;
pub mod simulator;

pub use constants::{CoefficientScheme, CoefficientSet, ProblemParams, RateReport};
pub use diffengine::{Jet, Scalar};
pub use gamma::{GammaKind, Method, TestFunction};
pub use geometry::{FieldId, FramePoint, ModelManifold, PhasePoint};
pub use simulator::{EnsembleStats, SimConfig};
