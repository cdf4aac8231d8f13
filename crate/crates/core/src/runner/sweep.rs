use rayon::prelude::*;

use super::config::ScenarioConfig;
use crate::error::Result;
use crate::poromech::Problem;
use crate::schemes::{simulate, SimulationReport, Termination};

/// How one combination ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    /// Stagnation, or the iteration cap, at the given 1-based step.
    Stagnated(usize),
    /// Blow-up or a failed inner solve at the given 1-based step.
    Diverged(usize),
    /// The scheme could not be set up.
    Error(String),
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Stagnated(_) => "stagnated",
            RowStatus::Diverged(_) => "diverged",
            RowStatus::Error(_) => "error",
        }
    }

    pub fn failed_step(&self) -> Option<usize> {
        match self {
            RowStatus::Stagnated(n) | RowStatus::Diverged(n) => Some(*n),
            _ => None,
        }
    }

    /// Table marker: `->[n]` for stagnation, `^[n]` for divergence.
    pub fn marker(&self) -> Option<String> {
        match self {
            RowStatus::Ok => None,
            RowStatus::Stagnated(n) => Some(format!("->[{n}]")),
            RowStatus::Diverged(n) => Some(format!("^[{n}]")),
            RowStatus::Error(_) => Some("err".into()),
        }
    }

    fn of(report: &SimulationReport) -> Self {
        match report.failure() {
            None => RowStatus::Ok,
            Some((n, Termination::Diverged)) => RowStatus::Diverged(n),
            Some((n, _)) => RowStatus::Stagnated(n),
        }
    }
}

/// One (scheme, depth, alpha) combination.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scheme: String,
    pub depth: usize,
    pub alpha: f64,
    pub status: RowStatus,
    /// Present unless the scheme could not be set up.
    pub simulation: Option<SimulationReport>,
}

impl SweepRow {
    pub fn iteration_counts(&self) -> Vec<usize> {
        self.simulation
            .as_ref()
            .map(SimulationReport::iteration_counts)
            .unwrap_or_default()
    }

    pub fn average_iterations(&self) -> f64 {
        self.simulation
            .as_ref()
            .map_or(0.0, SimulationReport::average_iterations)
    }

    /// Average as printed in the table, or the failure marker.
    pub fn cell_text(&self) -> String {
        self.status
            .marker()
            .unwrap_or_else(|| format!("{:.1}", self.average_iterations()))
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub config: ScenarioConfig,
    /// Ordered by scheme, then depth, then alpha.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, scheme: &str, depth: usize, alpha: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.depth == depth && r.alpha == alpha)
    }
}

/// Runs every combination of the config. Solver failures are recorded in the
/// rows; only problem setup errors are returned.
pub fn run_sweep(config: &ScenarioConfig) -> Result<SweepReport> {
    let mesh = config.grid.mesh()?;
    let problems: Vec<Problem> = config
        .alphas
        .par_iter()
        .map(|&a| {
            let sc = config.scenario_for(a);
            Problem::new(&mesh, sc.params, sc.p0)
        })
        .collect::<Result<_>>()?;
    let n_steps = config.n_steps();
    let mut combos = Vec::new();
    for scheme in &config.schemes {
        for &depth in &config.depths {
            for (k, &alpha) in config.alphas.iter().enumerate() {
                combos.push((*scheme, depth, k, alpha));
            }
        }
    }
    let rows = combos
        .into_par_iter()
        .map(|(scheme, depth, k, alpha)| {
            let (status, simulation) =
                match simulate(&problems[k], scheme, config.anderson(depth), n_steps) {
                    Ok(rep) => (RowStatus::of(&rep), Some(rep)),
                    Err(e) => (RowStatus::Error(e.to_string()), None),
                };
            SweepRow {
                scheme: scheme.label(),
                depth,
                alpha,
                status,
                simulation,
            }
        })
        .collect();
    Ok(SweepReport {
        config: config.clone(),
        rows,
    })
}
