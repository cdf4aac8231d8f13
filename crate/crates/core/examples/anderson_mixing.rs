//! Anderson acceleration of a slowly contracting linear fixed-point map.

use unsat_poro::anderson::{accelerate, mixing_weights, AndersonConfig};

fn main() {
    let n = 50;
    // F(x) = A x + b with A = diag(0.99 .. 0.5)
    let diag: Vec<f64> = (0..n)
        .map(|k| 0.99 - 0.49 * k as f64 / (n - 1) as f64)
        .collect();
    let b: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
    let exact: Vec<f64> = diag.iter().zip(&b).map(|(a, b)| b / (1.0 - a)).collect();
    let f = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(&diag)
            .zip(&b)
            .map(|((x, a), b)| a * x + b)
            .collect()
    };
    let err = |x: &[f64]| {
        x.iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    for config in [
        AndersonConfig::none(),
        AndersonConfig::windowed(1),
        AndersonConfig::windowed(5),
        AndersonConfig::restarted(1),
    ] {
        let xs = accelerate(f, vec![0.0; n], config, 60);
        println!(
            "{:?}({}): error after 20 / 40 / 60 iterations {:.2e} {:.2e} {:.2e}",
            config.mode,
            config.depth,
            err(&xs[20]),
            err(&xs[40]),
            err(&xs[60])
        );
    }

    let w = mixing_weights(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1e10);
    println!("weights for orthogonal increments: {:?}", w.alpha);
}
