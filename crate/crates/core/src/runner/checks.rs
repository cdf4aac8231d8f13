//! Quick invariant suites behind the `check` verb.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aa_theory::{contraction_factor, richardson_aa_experiment, SpectralPair};
use crate::anderson::AndersonConfig;
use crate::constitutive::derivative_counts;
use crate::error::Result;
use crate::fem::RectMesh;
use crate::poromech::{DenseReducedProblem, PoroState, Problem, Scenario};
use crate::schemes::{simulate, Scheme, SchemeConfig};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn closed_form() -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for k in 1..100 {
        let l = k as f64 / 100.0;
        worst = worst.max(contraction_factor(l, l)?.abs());
        worst = worst.max((contraction_factor(1.0, l)? - 1.0).abs());
        worst = worst.max((contraction_factor(l, -0.3)? - contraction_factor(-0.3, l)?).abs());
    }
    Ok(outcome(
        "closed-form contraction factor",
        worst <= 1e-12,
        format!("max deviation {worst:.2e}"),
    ))
}

fn four_step_bound() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mut l = || loop {
            let v: f64 = rng.gen_range(-0.95..0.95);
            if v.abs() > 1e-3 {
                break v;
            }
        };
        let (l1, l2) = (l(), l());
        let pair =
            SpectralPair::with_weights(l1, l2, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))?;
        let r = pair.contraction_factor()?;
        for q in richardson_aa_experiment(&pair, 10).aa_block_ratios() {
            if q.is_finite() && r > 0.0 {
                worst = worst.max(q / r);
            }
        }
    }
    Ok(outcome(
        "AA*(1) four-step bound",
        worst <= 1.0 + 1e-8,
        format!("max ratio / r = {worst:.6}"),
    ))
}

fn jacobian() -> Result<CheckOutcome> {
    let sc = Scenario::test_one(1.0);
    let mesh = RectMesh::new(4, 4, 1.0, 1.0, 0.25)?;
    let pr = Problem::new(&mesh, sc.params, sc.p0)?;
    let step = pr.step_data(pr.initial_state())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut state = pr.initial_state().clone();
    state
        .p
        .iter_mut()
        .for_each(|p| *p = rng.gen_range(-12.0..-3.0));
    state
        .q
        .iter_mut()
        .for_each(|q| *q = rng.gen_range(-0.5..0.5));
    let pack =
        |s: &PoroState| -> Vec<f64> { s.p.iter().chain(&s.q).chain(&s.u).copied().collect() };
    let (np, nq) = (pr.ops.n_p(), pr.ops.n_q());
    let unpack = |x: &[f64]| PoroState {
        p: x[..np].to_vec(),
        q: x[np..np + nq].to_vec(),
        u: x[np + nq..].to_vec(),
        time: state.time,
    };
    let x = pack(&state);
    let dir: Vec<f64> = (0..x.len())
        .map(|k| {
            if k >= np + nq && pr.ops.u_fixed[k - np - nq] {
                0.0
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect();
    let h = 1e-7;
    let shift = |s: f64| -> Result<Vec<f64>> {
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
        let r = pr.residuals(&step, &unpack(&y))?;
        Ok(r.p.into_iter().chain(r.q).chain(r.u).collect())
    };
    let (rp, rm) = (shift(h)?, shift(-h)?);
    let jd = pr.newton_blocks(&step, &state)?.matrix.mul_vec(&dir);
    let mut err = 0.0;
    let mut scale = 0.0;
    for ((a, b), j) in rp.iter().zip(&rm).zip(&jd) {
        let fd = -(a - b) / (2.0 * h);
        err += (j - fd) * (j - fd);
        scale += fd * fd;
    }
    let rel = (err / scale).sqrt();
    Ok(outcome(
        "Newton matrix vs finite differences",
        rel <= 1e-5,
        format!("relative error {rel:.2e}"),
    ))
}

fn fsl_equivalence() -> Result<CheckOutcome> {
    let sc = Scenario::test_one(1.0);
    let mesh = RectMesh::new(2, 2, 1.0, 1.0, 0.5)?;
    let pr = Problem::new(&mesh, sc.params, sc.p0)?;
    let fsl = Scheme::new(&pr, SchemeConfig::fsl())?;
    let red = DenseReducedProblem::new(&pr)?;
    let step = pr.step_data(pr.initial_state())?;
    let mut x = step.prev.clone();
    let mut p = step.prev.p.clone();
    let mut worst = 0.0f64;
    for _ in 0..8 {
        x = fsl.map(&step, &x)?.state;
        p = red.l_scheme_step(&step, &p, fsl.l_coefficient())?;
        for (a, b) in x.p.iter().zip(&p) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(outcome(
        "FSL matches the reduced L-scheme",
        worst <= 1e-10,
        format!("max pressure gap {worst:.2e}"),
    ))
}

fn fsl_run() -> Result<Vec<CheckOutcome>> {
    let sc = Scenario::test_one(1.0);
    let mesh = RectMesh::new(5, 5, 1.0, 1.0, 0.2)?;
    let pr = Problem::new(&mesh, sc.params, sc.p0)?;
    let before = derivative_counts();
    let rep = simulate(&pr, SchemeConfig::fsl(), AndersonConfig::none(), 3)?;
    let derivs = derivative_counts().since(before).total();
    Ok(vec![
        outcome(
            "volume conservation",
            rep.completed(3) && rep.max_volume_gap <= 1e-13,
            format!("max gap {:.2e}", rep.max_volume_gap),
        ),
        outcome(
            "FSL is derivative-free",
            derivs == 0,
            format!("{derivs} derivative evaluations"),
        ),
    ])
}

/// Runs all suites; takes well under a second in release builds.
pub fn run_checks() -> Result<Vec<CheckOutcome>> {
    let mut out = vec![
        closed_form()?,
        four_step_bound()?,
        jacobian()?,
        fsl_equivalence()?,
    ];
    out.extend(fsl_run()?);
    Ok(out)
}
