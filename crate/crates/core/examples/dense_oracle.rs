//! On a 2x2 mesh the flow problem reduces to a dense pressure-only system.
//! FSL iterates coincide with the L-scheme on that reduced system.

use unsat_poro::fem::RectMesh;
use unsat_poro::poromech::{DenseReducedProblem, Problem, Scenario};
use unsat_poro::schemes::{Scheme, SchemeConfig};

fn main() -> unsat_poro::Result<()> {
    let sc = Scenario::test_one(1.0);
    let mesh = RectMesh::new(2, 2, 1.0, 1.0, 0.5)?;
    let problem = Problem::new(&mesh, sc.params, sc.p0)?;
    let reduced = DenseReducedProblem::new(&problem)?;
    let fsl = Scheme::new(&problem, SchemeConfig::fsl())?;

    let mut state = problem.initial_state().clone();
    for n in 1..=3 {
        let step = problem.step_data(&state)?;
        let mut x = step.prev.clone();
        let mut p = step.prev.p.clone();
        let mut gap = 0.0f64;
        for _ in 0..40 {
            x = fsl.map(&step, &x)?.state;
            p = reduced.l_scheme_step(&step, &p, fsl.l_coefficient())?;
            gap =
                x.p.iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).abs())
                    .fold(gap, f64::max);
        }
        let res = reduced.compact_residual(&step, &p)?;
        let eig = reduced.jacobian_b(&step, &p)?.symmetric_eigenvalues();
        println!(
            "step {n}: max |p_FSL - p_L| = {gap:.1e}, reduced residual {:.1e}, eig(D_b) in [{:.3e}, {:.3e}]",
            res.iter().map(|r| r.abs()).fold(0.0, f64::max),
            eig.min(),
            eig.max()
        );
        state = x;
    }
    Ok(())
}
