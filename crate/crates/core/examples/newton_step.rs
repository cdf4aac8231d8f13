//! One implicit Euler step of test case I solved by monolithic Newton,
//! printing the residual and increment norms per iteration.

use unsat_poro::anderson::AndersonConfig;
use unsat_poro::fem::RectMesh;
use unsat_poro::poromech::{Problem, Scenario};
use unsat_poro::schemes::{run_time_step, Scheme, SchemeConfig};

fn main() -> unsat_poro::Result<()> {
    let sc = Scenario::test_one(1.0);
    let mesh = RectMesh::new(20, 20, 1.0, 1.0, 0.2)?;
    let problem = Problem::new(&mesh, sc.params, sc.p0)?;
    let scheme = Scheme::new(&problem, SchemeConfig::newton())?;

    let mut state = problem.initial_state().clone();
    for n in 1..=3 {
        let step = problem.step_data(&state)?;
        let (next, report) = run_time_step(&scheme, AndersonConfig::none(), &step);
        println!(
            "step {n} (t = {:.1}): {}",
            step.t,
            report.termination.as_str()
        );
        for (i, rec) in report.records.iter().enumerate() {
            println!(
                "  it {:2}  |r| = {:.3e} {:.3e} {:.3e}   |dx| = {:.3e} {:.3e} {:.3e}",
                i + 1,
                rec.residuals[0],
                rec.residuals[1],
                rec.residuals[2],
                rec.increments[0],
                rec.increments[1],
                rec.increments[2]
            );
        }
        let gap = problem.volume_conservation_gap(&step, &next)?;
        println!(
            "  volume balance defect {:.1e}",
            gap.iter().fold(0.0f64, |m, g| m.max(g.abs()))
        );
        state = next;
    }
    Ok(())
}
