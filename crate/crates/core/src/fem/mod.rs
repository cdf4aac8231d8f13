//! Structured rectangular meshes, P0/RT0/Q1 assembly and sparse solves.

mod assembly;
mod export;
mod linalg;
mod mesh;

pub use assembly::{assemble, q1_interpolate, rt0_interpolate, DiscreteOperators};
pub use export::FieldView;
pub use linalg::{
    backward_error, conjugate_gradient, dot, norm2, solve_indefinite, solve_spd, LinearSystem,
    MatrixKind, SparseMatrix, SpdFactor, SOLVE_RTOL,
};
pub use mesh::{EdgeNormal, EdgeTag, RectMesh};

/// Builds a uniform mesh of `[0, lx] x [0, ly]` with an inflow strip on the top.
pub fn build_rect_mesh(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    inflow_width: f64,
) -> crate::Result<RectMesh> {
    RectMesh::new(nx, ny, lx, ly, inflow_width)
}
