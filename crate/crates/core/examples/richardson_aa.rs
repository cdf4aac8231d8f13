//! Restarted AA*(1) on symmetric Richardson iterations: the four-step bound,
//! the explicit mixing weight, and a non-contractive pair.

use unsat_poro::aa_theory::{
    propagation_eigenvalues, richardson_aa_experiment, search_amplifying_weights, SpectralPair,
};

fn main() -> unsat_poro::Result<()> {
    for (l1, l2) in [(0.5, 0.9), (-0.8, 0.6), (1.5, 0.5), (2.0, -0.5)] {
        let pair = SpectralPair::new(l1, l2)?;
        let r = pair.contraction_factor()?;
        let h = richardson_aa_experiment(&pair, 10);
        let worst = h.aa_block_ratios().into_iter().fold(0.0, f64::max);
        println!(
            "({l1:5}, {l2:5})  r = {r:.4}  worst AA*(1) block ratio {worst:.4}  |e_40| AA {:.2e}  plain {:.2e}",
            h.aa_errors[40], h.plain_errors[40]
        );
        let gap = h
            .alphas
            .iter()
            .zip(&h.predicted_alphas)
            .map(|(a, p)| (a - p).abs())
            .fold(0.0, f64::max);
        println!("    explicit mixing weight formula matches to {gap:.1e}");
    }

    let lambdas = [0.9, -0.9, 0.5];
    match search_amplifying_weights(&lambdas, 20000, 1)? {
        Some((b, eig)) => {
            println!("lambdas {lambdas:?}: weights {b:.3?} give eigenvalues {eig:.3?}")
        }
        None => println!("lambdas {lambdas:?}: no amplifying weights found"),
    }
    let e = propagation_eigenvalues(&[0.9, 0.3], &[0.6, 0.8])?;
    println!("two-eigenvalue propagation at beta = (0.6, 0.8): {e:.4?}");
    Ok(())
}
