//! Samples the AA*(1) contraction factor over the eigenvalue plane and writes
//! `plane.csv` (or the path given as first argument).

use std::fs::File;
use std::io::BufWriter;

use unsat_poro::aa_theory::{sample_planes, PlaneRect};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "plane.csv".into());
    let contractive = sample_planes(
        PlaneRect {
            l1: (-0.995, 0.995),
            l2: (-0.995, 0.995),
        },
        200,
    )?;
    // r(l, -l) = l^4, so the anti-diagonal is a tie up to rounding
    let ties: Vec<_> = contractive
        .points
        .iter()
        .filter(|p| !p.accelerates)
        .collect();
    let off_diagonal = ties
        .iter()
        .filter(|p| (p.lambda1 + p.lambda2).abs() > 1e-12)
        .count();
    println!(
        "(-1,1)^2: {} points, {} with r >= rho^4, {off_diagonal} of them off lambda2 = -lambda1",
        contractive.points.len(),
        ties.len()
    );
    let wide = sample_planes(
        PlaneRect {
            l1: (-3.0, 3.0),
            l2: (-3.0, 3.0),
        },
        241,
    )?;
    let conv = wide.points.iter().filter(|p| p.converges).count();
    println!(
        "(-3,3)^2: {conv} of {} points have r < 1",
        wide.points.len()
    );
    wide.write_csv(BufWriter::new(File::create(&path)?))?;
    println!("wrote {path}");
    Ok(())
}
