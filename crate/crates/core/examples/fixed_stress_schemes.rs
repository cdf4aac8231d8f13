//! The four linearization schemes on test case I, with and without Anderson
//! acceleration. Pass a grid size as the first argument (default 15).

use unsat_poro::anderson::AndersonConfig;
use unsat_poro::constitutive::{derivative_counts, reset_derivative_counts};
use unsat_poro::fem::RectMesh;
use unsat_poro::poromech::{Problem, Scenario};
use unsat_poro::schemes::{simulate, SchemeConfig};

fn main() -> unsat_poro::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(15);
    let sc = Scenario::test_one(1.0);
    let mesh = RectMesh::new(n, n, 1.0, 1.0, 0.2)?;
    let problem = Problem::new(&mesh, sc.params, sc.p0)?;
    println!(
        "{n}x{n}, alpha = 1, L_s + beta_FS = {:.4}",
        sc.params.vg.saturation_lipschitz() + sc.params.beta_fs()
    );
    for cfg in [
        SchemeConfig::newton(),
        SchemeConfig::fs_newton(),
        SchemeConfig::fs_mp(),
        SchemeConfig::fsl(),
        SchemeConfig::fsl_half(),
    ] {
        for m in [0, 10] {
            reset_derivative_counts();
            let rep = simulate(
                &problem,
                cfg,
                AndersonConfig::windowed(m),
                sc.params.n_steps(),
            )?;
            let status = match rep.failure() {
                None => format!("{:6.1}", rep.average_iterations()),
                Some((k, t)) => format!("{} at step {k}", t.as_str()),
            };
            println!(
                "{:10} AA({m:2})  {status}  derivative evaluations {}",
                rep.scheme,
                derivative_counts().total()
            );
        }
    }
    Ok(())
}
