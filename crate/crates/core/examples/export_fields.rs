//! Runs test case I with FS-MP and writes the final fields as CSV and legacy VTK.

use std::path::Path;

use unsat_poro::anderson::AndersonConfig;
use unsat_poro::fem::{FieldView, RectMesh};
use unsat_poro::poromech::{Problem, Scenario};
use unsat_poro::schemes::{simulate, SchemeConfig};

fn main() -> unsat_poro::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fields_out".into());
    let sc = Scenario::test_one(1.0);
    let mesh = RectMesh::new(20, 20, 1.0, 1.0, 0.2)?;
    let problem = Problem::new(&mesh, sc.params, sc.p0)?;
    let rep = simulate(
        &problem,
        SchemeConfig::fs_mp(),
        AndersonConfig::windowed(3),
        sc.params.n_steps(),
    )?;
    let st = &rep.final_state;
    let s: Vec<f64> =
        st.p.iter()
            .map(|&p| sc.params.vg.saturation(p))
            .collect::<Result<_, _>>()?;
    let view = FieldView {
        mesh: &mesh,
        p: &st.p,
        q: &st.q,
        u: &st.u,
        s: &s,
    };
    view.write_all(Path::new(&dir), "final")?;
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = s.iter().copied().fold(0.0, f64::max);
    println!(
        "t = {:.1}: saturation in [{smin:.3}, {smax:.3}], wrote {dir}/final.vtk",
        st.time
    );
    Ok(())
}
