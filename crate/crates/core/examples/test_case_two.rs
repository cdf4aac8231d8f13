//! Test case II at alpha = 0.1: plain FS-MP stagnates, Anderson acceleration
//! completes the run. Pass a grid size as the first argument (default 15).

use unsat_poro::anderson::AndersonConfig;
use unsat_poro::fem::RectMesh;
use unsat_poro::poromech::{Problem, Scenario};
use unsat_poro::schemes::{simulate, SchemeConfig};

fn main() -> unsat_poro::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(15);
    let sc = Scenario::test_two(0.1);
    let mesh = RectMesh::new(n, n, 1.0, 1.0, 0.2)?;
    let problem = Problem::new(&mesh, sc.params, sc.p0)?;
    for m in [0, 1, 3] {
        let rep = simulate(
            &problem,
            SchemeConfig::fs_mp(),
            AndersonConfig::windowed(m),
            sc.params.n_steps(),
        )?;
        match rep.failure() {
            None => println!(
                "FS-MP AA({m}): {:.1} iterations per step {:?}",
                rep.average_iterations(),
                rep.iteration_counts()
            ),
            Some((k, t)) => println!("FS-MP AA({m}): {} at step {k}", t.as_str()),
        }
    }
    Ok(())
}
