use super::{MapOutput, Scheme, SchemeConfig};
use crate::anderson::{AndersonConfig, AndersonWindow};
use crate::constitutive::{derivative_counts, DerivativeCounts};
use crate::error::Result;
use crate::fem::norm2;
use crate::poromech::{PoroState, Problem, StepData};

/// Growth of the increment norm over the first increment that counts as divergence.
pub const DIVERGENCE_GROWTH: f64 = 1e4;
/// Number of iterations over which flat increments count as stagnation.
pub const STAGNATION_WINDOW: usize = 20;
const STAGNATION_CHANGE: f64 = 0.01;
const NORM_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    Stagnated,
    Diverged,
    MaxIters,
}

impl Termination {
    pub fn is_success(self) -> bool {
        self == Termination::Converged
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Stagnated => "stagnated",
            Termination::Diverged => "diverged",
            Termination::MaxIters => "max_iters",
        }
    }
}

/// Norms recorded for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// L2 norms of the update `x^i - x^{i-1}` for `(p, q, u)`.
    pub increments: [f64; 3],
    /// Euclidean norms of `(r_p, r_q, r_u)` at `x^{i-1}`.
    pub residuals: [f64; 3],
    /// Anderson weights used to form `x^i`.
    pub weights: Vec<f64>,
    pub fallback: bool,
}

impl IterationRecord {
    pub fn increment_sum(&self) -> f64 {
        self.increments.iter().sum()
    }
}

/// Outcome of the nonlinear solve of one time step.
#[derive(Debug, Clone)]
pub struct IterationReport {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub unbounded_derivative: bool,
    pub anderson_fallbacks: usize,
    pub derivative_evaluations: DerivativeCounts,
    /// Message of the error that ended the iteration, if any.
    pub failure: Option<String>,
}

impl IterationReport {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// The stopping test: absolute and relative increment criteria must both hold.
/// Relative terms whose state norm is below `1e-14` are left out.
pub fn converged(increments: [f64; 3], state: [f64; 3], eps_abs: f64, eps_rel: f64) -> bool {
    let abs: f64 = increments.iter().sum();
    let rel: f64 = increments
        .iter()
        .zip(&state)
        .filter(|(_, s)| **s >= NORM_FLOOR)
        .map(|(d, s)| d / s)
        .sum();
    abs < eps_abs && rel < eps_rel
}

fn pack(x: &PoroState) -> Vec<f64> {
    x.p.iter().chain(&x.q).chain(&x.u).copied().collect()
}

fn unpack(v: &[f64], like: &PoroState) -> PoroState {
    let (np, nq) = (like.p.len(), like.q.len());
    PoroState {
        p: v[..np].to_vec(),
        q: v[np..np + nq].to_vec(),
        u: v[np + nq..].to_vec(),
        time: like.time,
    }
}

/// Square roots of the lumped mass diagonals, so that the Euclidean norm of
/// the scaled vector approximates the L2 norm.
fn lumped_mass_weights(problem: &Problem) -> Vec<f64> {
    let ops = &problem.ops;
    let lumped = |m: &crate::fem::SparseMatrix| -> Vec<f64> {
        (0..m.nrows())
            .map(|i| m.row(i).1.iter().sum::<f64>().max(0.0).sqrt())
            .collect()
    };
    ops.m_p
        .iter()
        .map(|a| a.sqrt())
        .chain(lumped(&ops.m_q))
        .chain(lumped(&ops.m_u))
        .collect()
}

fn diff_norms(problem: &Problem, a: &PoroState, b: &PoroState) -> [f64; 3] {
    let d = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| a - b).collect() };
    problem.norms(&d(&a.p, &b.p), &d(&a.q, &b.q), &d(&a.u, &b.u))
}

/// Iterates a scheme on one time step from the previous time level.
pub fn run_time_step(
    scheme: &Scheme,
    accel: AndersonConfig,
    step: &StepData,
) -> (PoroState, IterationReport) {
    run_time_step_observed(scheme, accel, step, |_, _| {})
}

/// As [`run_time_step`], calling `observe(i, &x^i)` after every iteration.
pub fn run_time_step_observed(
    scheme: &Scheme,
    accel: AndersonConfig,
    step: &StepData,
    mut observe: impl FnMut(usize, &PoroState),
) -> (PoroState, IterationReport) {
    let problem = scheme.problem;
    let cfg = &scheme.config;
    let counts0 = derivative_counts();
    let mut window = AndersonWindow::with_norm_weights(accel, lumped_mass_weights(problem));
    let mut x = step.prev.clone();
    x.time = step.t;
    let mut report = IterationReport {
        records: Vec::new(),
        termination: Termination::MaxIters,
        unbounded_derivative: false,
        anderson_fallbacks: 0,
        derivative_evaluations: DerivativeCounts::default(),
        failure: None,
    };
    let mut first = None;
    for i in 1..=cfg.max_iters {
        let out: MapOutput = match scheme.map(step, &x) {
            Ok(o) => o,
            Err(e) => {
                report.termination = Termination::Diverged;
                report.failure = Some(e.to_string());
                break;
            }
        };
        report.unbounded_derivative |= out.unbounded_derivative;
        let (next, weights, fallback) = if accel.depth == 0 {
            (out.state, vec![1.0], false)
        } else {
            let fx = pack(&out.state);
            let inc = fx.iter().zip(pack(&x)).map(|(a, b)| a - b).collect();
            let s = window.aa_step(fx, inc);
            (unpack(&s.next, &x), s.weights, s.fallback)
        };
        let increments = diff_norms(problem, &next, &x);
        report.records.push(IterationRecord {
            increments,
            residuals: out.residual_norms,
            weights,
            fallback,
        });
        observe(i, &next);
        let total: f64 = increments.iter().sum();
        if !total.is_finite() || !next.is_finite() {
            report.termination = Termination::Diverged;
            report.failure = Some(format!("non-finite iterate at iteration {i}"));
            break;
        }
        let first_total = *first.get_or_insert(total);
        x = next;
        let state = problem.norms(&x.p, &x.q, &x.u);
        if converged(increments, state, cfg.eps_abs, cfg.eps_rel) {
            report.termination = Termination::Converged;
            break;
        }
        if total > DIVERGENCE_GROWTH * first_total {
            report.termination = Termination::Diverged;
            break;
        }
        if stagnating(&report.records) {
            report.termination = Termination::Stagnated;
            break;
        }
    }
    report.anderson_fallbacks = window.fallbacks;
    report.derivative_evaluations = derivative_counts().since(counts0);
    (x, report)
}

/// Increment norms flat to within 1% over the last window.
fn stagnating(records: &[IterationRecord]) -> bool {
    if records.len() <= STAGNATION_WINDOW {
        return false;
    }
    let tail = &records[records.len() - STAGNATION_WINDOW - 1..];
    let (lo, hi) = tail
        .iter()
        .map(IterationRecord::increment_sum)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo < STAGNATION_CHANGE * hi
}

/// Time-stepping history of one scheme on one scenario.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub scheme: String,
    pub anderson_depth: usize,
    pub steps: Vec<IterationReport>,
    /// Largest per-cell volume balance defect over the accepted steps.
    pub max_volume_gap: f64,
    pub final_state: PoroState,
}

impl SimulationReport {
    /// 1-based index and status of the first failed step.
    pub fn failure(&self) -> Option<(usize, Termination)> {
        self.steps
            .iter()
            .position(|r| !r.termination.is_success())
            .map(|k| (k + 1, self.steps[k].termination))
    }

    pub fn completed(&self, n_steps: usize) -> bool {
        self.failure().is_none() && self.steps.len() == n_steps
    }

    pub fn iteration_counts(&self) -> Vec<usize> {
        self.steps.iter().map(IterationReport::iterations).collect()
    }

    /// Mean number of iterations per time step over the steps that ran.
    pub fn average_iterations(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        let total: usize = self.iteration_counts().iter().sum();
        total as f64 / self.steps.len() as f64
    }

    pub fn derivative_evaluations(&self) -> DerivativeCounts {
        self.steps
            .iter()
            .fold(DerivativeCounts::default(), |acc, r| DerivativeCounts {
                saturation: acc.saturation + r.derivative_evaluations.saturation,
                mobility: acc.mobility + r.derivative_evaluations.mobility,
            })
    }
}

/// Runs `n_steps` implicit Euler steps, stopping at the first failed step.
pub fn simulate(
    problem: &Problem,
    scheme: SchemeConfig,
    accel: AndersonConfig,
    n_steps: usize,
) -> Result<SimulationReport> {
    let scheme = Scheme::new(problem, scheme)?;
    let mut state = problem.initial_state().clone();
    let mut steps = Vec::with_capacity(n_steps);
    let mut max_gap = 0.0f64;
    for _ in 0..n_steps {
        let step = problem.step_data(&state)?;
        let (next, report) = run_time_step(&scheme, accel, &step);
        let ok = report.termination.is_success();
        steps.push(report);
        if !ok {
            break;
        }
        let gap = problem.volume_conservation_gap(&step, &next)?;
        max_gap = gap.iter().fold(max_gap, |m, g| m.max(g.abs()));
        state = next;
    }
    Ok(SimulationReport {
        scheme: scheme.config.label(),
        anderson_depth: accel.depth,
        steps,
        max_volume_gap: max_gap,
        final_state: state,
    })
}

pub(super) fn residual_norms(r: &crate::poromech::Residuals) -> [f64; 3] {
    [norm2(&r.p), norm2(&r.q), norm2(&r.u)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::RectMesh;
    use crate::poromech::Scenario;

    #[test]
    fn stopping_rule() {
        assert!(converged([0.0; 3], [0.0; 3], 1e-8, 1e-8));
        // absolute passes, relative fails
        assert!(!converged([1e-9, 0.0, 0.0], [1e-3, 0.0, 0.0], 1e-8, 1e-8));
        assert!(converged([1e-9; 3], [1.0; 3], 1e-8, 1e-8));
        // a zero state norm drops its relative term
        assert!(converged([1e-9, 1e-9, 1e-9], [1.0, 1.0, 0.0], 1e-8, 1e-8));
    }

    fn record(v: f64) -> IterationRecord {
        IterationRecord {
            increments: [v, 0.0, 0.0],
            residuals: [0.0; 3],
            weights: vec![1.0],
            fallback: false,
        }
    }

    #[test]
    fn flat_increments_stagnate() {
        let flat: Vec<_> = (0..25)
            .map(|i| record(1.0 + 1e-4 * (i % 3) as f64))
            .collect();
        assert!(stagnating(&flat));
        let decaying: Vec<_> = (0..25).map(|i| record(0.9f64.powi(i))).collect();
        assert!(!stagnating(&decaying));
        assert!(!stagnating(&flat[..20]));
    }

    fn small_problem() -> Problem {
        let sc = Scenario::test_one(1.0);
        let mesh = RectMesh::new(5, 5, 1.0, 1.0, 0.2).unwrap();
        Problem::new(&mesh, sc.params, sc.p0).unwrap()
    }

    #[test]
    fn fsl_first_step_contracts() {
        let pr = small_problem();
        let fsl = Scheme::new(&pr, SchemeConfig::fsl()).unwrap();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let (_, rep) = run_time_step(&fsl, AndersonConfig::none(), &step);
        assert_eq!(rep.termination, Termination::Converged);
        let dp: Vec<f64> = rep.records.iter().map(|r| r.increments[0]).collect();
        assert!(dp.windows(2).all(|w| w[1] <= w[0]), "{dp:?}");
        assert_eq!(rep.derivative_evaluations.total(), 0);
    }

    #[test]
    fn aa_zero_is_bitwise_plain() {
        let pr = small_problem();
        let fsl = Scheme::new(&pr, SchemeConfig::fs_mp()).unwrap();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let mut a = vec![];
        let (xa, _) = run_time_step_observed(&fsl, AndersonConfig::none(), &step, |_, x| {
            a.push(x.clone())
        });
        let mut x = step.prev.clone();
        for (i, ai) in a.iter().enumerate() {
            x = fsl.map(&step, &x).unwrap().state;
            assert_eq!(&x, ai, "iteration {i}");
        }
        assert_eq!(x, xa);
    }

    #[test]
    fn schemes_agree_on_the_solution() {
        let pr = small_problem();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let mut sols = vec![];
        for cfg in [
            SchemeConfig::newton(),
            SchemeConfig::fsl(),
            SchemeConfig::fs_mp(),
            SchemeConfig::fs_newton(),
        ] {
            let s = Scheme::new(&pr, cfg).unwrap();
            let (x, rep) = run_time_step(&s, AndersonConfig::windowed(3), &step);
            assert!(rep.termination.is_success(), "{:?}", cfg.kind);
            sols.push(x);
        }
        let np = pr.norms(&sols[0].p, &sols[0].q, &sols[0].u)[0];
        for s in &sols[1..] {
            let d = diff_norms(&pr, s, &sols[0])[0];
            assert!(d <= (1e-8 + 1e-8 * np) * 10.0, "{d}");
        }
    }
}
