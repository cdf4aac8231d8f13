//! Unsaturated poromechanics: parameters, discrete residuals, the Newton
//! Jacobian and a dense reduced-pressure oracle for tiny meshes.

mod dense;
mod jacobian;
mod params;
mod problem;

pub use dense::{DenseReducedProblem, DENSE_MAX_CELLS};
pub use jacobian::NewtonMatrix;
pub use params::{inflow_rate, lame_parameters, PhysicsParams, Scenario};
pub(crate) use problem::CellFields;
pub use problem::{PoroState, Problem, Residuals, StepData};

use crate::error::Result;
use crate::fem::RectMesh;

/// Uniform pressure `p0`, zero displacement and the matching stationary flux.
pub fn initial_state(mesh: &RectMesh, params: PhysicsParams, p0: f64) -> Result<PoroState> {
    Ok(Problem::new(mesh, params, p0)?.initial_state().clone())
}
