//! Builds the injection mesh and the P0 / RT0 / Q1 operators.

use unsat_poro::fem::{assemble, build_rect_mesh, q1_interpolate, EdgeTag};
use unsat_poro::poromech::lame_parameters;

fn main() -> unsat_poro::Result<()> {
    let mesh = build_rect_mesh(50, 50, 1.0, 1.0, 0.2)?;
    let inflow = (0..mesh.n_edges())
        .filter(|&e| mesh.edge_tag(e) == EdgeTag::Inflow)
        .count();
    println!(
        "{} cells, {} edges ({inflow} inflow), {} nodes",
        mesh.n_cells(),
        mesh.n_edges(),
        mesh.n_nodes()
    );

    let (mu, lambda) = lame_parameters(30.0, 0.2)?;
    let ops = assemble(&mesh, mu, lambda)?;
    println!("dofs: p {}, q {}, u {}", ops.n_p(), ops.n_q(), ops.n_u());
    println!(
        "nnz: M_q {}, D_pq {}, D_pu {}, A_uu {}",
        ops.m_q.nnz(),
        ops.d_pq.nnz(),
        ops.d_pu.nnz(),
        ops.a_uu.nnz()
    );

    // u = (0, y) respects the rollers and has unit divergence
    let u = q1_interpolate(&mesh, |[_, y]| [0.0, y]);
    let div = ops.div_u(&u);
    let area = mesh.cell_area();
    let worst = div
        .iter()
        .map(|d| (d / area - 1.0).abs())
        .fold(0.0, f64::max);
    println!("max |div u - 1| for u = (0, y): {worst:.2e}");
    Ok(())
}
