//! The four linearization schemes as fixed-point maps, the stopping
//! criterion and the time-step driver.

mod driver;

pub use driver::{
    converged, run_time_step, run_time_step_observed, simulate, IterationRecord, IterationReport,
    SimulationReport, Termination, DIVERGENCE_GROWTH, STAGNATION_WINDOW,
};

use crate::error::{Error, Result};
use crate::fem::{solve_indefinite, LinearSystem, SparseMatrix};
use crate::poromech::{CellFields, PoroState, Problem, StepData};

/// Fixed-stress stabilization `alpha^2 / (2 mu / d + lambda)`.
pub fn fixed_stress_beta(mu: f64, lambda: f64, alpha: f64, d: usize) -> f64 {
    alpha * alpha / (2.0 * mu / d as f64 + lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Monolithic Newton on `(p, q, u)`.
    Newton,
    /// Fixed-stress L-scheme: constant pressure stabilization, Picard mobility.
    Fsl,
    /// Fixed-stress modified Picard: saturation derivative, Picard mobility.
    FsMp,
    /// Fixed-stress Newton: saturation and mobility derivatives.
    FsNewton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Multiplier on `L_s + beta_FS` for the L-scheme.
    pub l_scale: f64,
    /// Replaces `L_s + beta_FS` when set.
    pub l_override: Option<f64>,
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind) -> Self {
        SchemeConfig {
            kind,
            l_scale: 1.0,
            l_override: None,
            max_iters: 500,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
        }
    }

    pub fn newton() -> Self {
        Self::new(SchemeKind::Newton)
    }

    pub fn fsl() -> Self {
        Self::new(SchemeKind::Fsl)
    }

    /// The L-scheme with `L = (L_s + beta_FS) / 2`.
    pub fn fsl_half() -> Self {
        SchemeConfig {
            l_scale: 0.5,
            ..Self::fsl()
        }
    }

    pub fn fs_mp() -> Self {
        Self::new(SchemeKind::FsMp)
    }

    pub fn fs_newton() -> Self {
        Self::new(SchemeKind::FsNewton)
    }

    /// Short name as used in reports: `Newton`, `FSL`, `FSL/2`, `FS-MP`, `FS-Newton`.
    pub fn label(&self) -> String {
        match self.kind {
            SchemeKind::Newton => "Newton".into(),
            SchemeKind::FsMp => "FS-MP".into(),
            SchemeKind::FsNewton => "FS-Newton".into(),
            SchemeKind::Fsl if self.l_override.is_none() && self.l_scale == 1.0 => "FSL".into(),
            SchemeKind::Fsl if self.l_override.is_none() && self.l_scale == 0.5 => "FSL/2".into(),
            SchemeKind::Fsl => format!("FSL(L={})", self.l_value_label()),
        }
    }

    fn l_value_label(&self) -> String {
        match self.l_override {
            Some(l) => format!("{l}"),
            None => format!("{}x", self.l_scale),
        }
    }

    /// Parses a report label back into a configuration.
    pub fn from_label(label: &str) -> Option<Self> {
        let lower = label.trim().to_ascii_lowercase();
        match lower.as_str() {
            "newton" => return Some(Self::newton()),
            "fsl" => return Some(Self::fsl()),
            "fsl/2" | "fsl2" => return Some(Self::fsl_half()),
            "fs-mp" | "fsmp" => return Some(Self::fs_mp()),
            "fs-newton" | "fsnewton" => return Some(Self::fs_newton()),
            _ => {}
        }
        // FSL(L=0.05) or FSL(L=0.25x)
        let inner = lower.strip_prefix("fsl(l=")?.strip_suffix(')')?;
        let cfg = match inner.strip_suffix('x') {
            Some(k) => SchemeConfig {
                l_scale: k.parse().ok()?,
                ..Self::fsl()
            },
            None => SchemeConfig {
                l_override: Some(inner.parse().ok()?),
                ..Self::fsl()
            },
        };
        Some(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_abs > 0.0 && self.eps_rel > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if self.kind == SchemeKind::Fsl {
            let ok = match self.l_override {
                Some(l) => l > 0.0,
                None => self.l_scale > 0.0,
            };
            if !ok {
                return Err(Error::InvalidInput("L must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One application of a scheme's fixed-point map.
#[derive(Debug, Clone)]
pub struct MapOutput {
    pub state: PoroState,
    pub unbounded_derivative: bool,
    /// Euclidean norms of `(r_p, r_q, r_u)` at the input iterate.
    pub residual_norms: [f64; 3],
}

/// A scheme bound to a problem.
#[derive(Debug)]
pub struct Scheme<'a> {
    pub problem: &'a Problem,
    pub config: SchemeConfig,
    beta: f64,
    l: f64,
}

impl<'a> Scheme<'a> {
    pub fn new(problem: &'a Problem, config: SchemeConfig) -> Result<Self> {
        config.validate()?;
        let beta = problem.params.beta_fs();
        let l = config
            .l_override
            .unwrap_or(problem.params.vg.saturation_lipschitz() + beta);
        Ok(Scheme {
            problem,
            config,
            beta,
            l,
        })
    }

    /// Stabilization `L` of the L-scheme before scaling.
    pub fn l_base(&self) -> f64 {
        self.l
    }

    /// Diagonal pressure coefficient of the L-scheme flow step.
    pub fn l_coefficient(&self) -> f64 {
        let scale = if self.config.l_override.is_some() {
            1.0
        } else {
            self.config.l_scale
        };
        scale * self.l + self.problem.params.law.inv_n
    }

    /// Applies one iteration to `x` and returns the new iterate.
    pub fn map(&self, step: &StepData, x: &PoroState) -> Result<MapOutput> {
        match self.config.kind {
            SchemeKind::Newton => self.newton_iteration(step, x),
            kind => self.fixed_stress_iteration(kind, step, x),
        }
    }

    /// Solves the coupled Newton system and adds the increment.
    pub fn newton_iteration(&self, step: &StepData, x: &PoroState) -> Result<MapOutput> {
        let pr = self.problem;
        let fields = pr.cell_fields(&x.p)?;
        let r = pr.residuals_with(step, x, &fields)?;
        let jac = pr.newton_blocks_with(step, x, &fields)?;
        let residual_norms = driver::residual_norms(&r);
        let rhs: Vec<f64> = r.p.into_iter().chain(r.q).chain(r.u).collect();
        let dx = solve_indefinite(&LinearSystem::indefinite(jac.matrix)?, &rhs)?;
        let (np, nq) = (pr.ops.n_p(), pr.ops.n_q());
        let mut next = x.clone();
        add(&mut next.p, &dx[..np]);
        add(&mut next.q, &dx[np..np + nq]);
        add(&mut next.u, &dx[np + nq..]);
        next.time = step.t;
        Ok(MapOutput {
            state: next,
            unbounded_derivative: jac.unbounded_derivative,
            residual_norms,
        })
    }

    /// Per-unit-area diagonal of the flow step's pressure block:
    /// `L + 1/N` for the L-scheme, `phi s' + (1/N + beta_FS) s^2` otherwise.
    pub(crate) fn pressure_coefficients(
        &self,
        step: &StepData,
        x: &PoroState,
        fields: &CellFields,
    ) -> Vec<f64> {
        let pr = self.problem;
        match self.config.kind {
            SchemeKind::Fsl => vec![self.l_coefficient(); pr.ops.n_p()],
            _ => {
                let vg = &pr.params.vg;
                let inv_n = pr.params.law.inv_n;
                let phi = pr.current_porosity(step, x, fields);
                (0..pr.ops.n_p())
                    .map(|c| {
                        let s = fields.s[c];
                        phi[c] * vg.sat_prime(x.p[c]) + (inv_n + self.beta) * s * s
                    })
                    .collect()
            }
        }
    }

    /// Flow step on `(p, q)` with a scheme-specific linearization, then the
    /// mechanics step with the new pressure.
    fn fixed_stress_iteration(
        &self,
        kind: SchemeKind,
        step: &StepData,
        x: &PoroState,
    ) -> Result<MapOutput> {
        let pr = self.problem;
        let (np, nq) = (pr.ops.n_p(), pr.ops.n_q());
        let area = pr.mesh().cell_area();
        let fields = pr.cell_fields(&x.p)?;
        let r = pr.residuals_with(step, x, &fields)?;
        let vg = &pr.params.vg;

        let pressure: Vec<f64> = self
            .pressure_coefficients(step, x, &fields)
            .into_iter()
            .map(|v| area * v)
            .collect();
        let mut unbounded = false;
        let t = if kind == SchemeKind::FsNewton {
            let dk: Vec<f64> =
                x.p.iter()
                    .map(|&p| {
                        let d = vg.inverse_mobility_prime(p);
                        unbounded |= d.unbounded;
                        d.value
                    })
                    .collect();
            pr.flow_triplets(&pressure, &fields.kinv, Some((&dk, &x.q)))
        } else {
            pr.flow_triplets(&pressure, &fields.kinv, None)
        };
        let flow = SparseMatrix::from_triplets(np + nq, np + nq, &t);
        let residual_norms = driver::residual_norms(&r);
        let rhs: Vec<f64> = r.p.into_iter().chain(r.q).collect();
        let d = solve_indefinite(&LinearSystem::indefinite(flow)?, &rhs)?;
        let mut next = x.clone();
        next.time = step.t;
        add(&mut next.p, &d[..np]);
        add(&mut next.q, &d[np..]);

        // mechanics with the new pressure and the old displacement
        let pe: Vec<f64> = next
            .p
            .iter()
            .enumerate()
            .map(|(c, &p)| {
                let v = vg.pe(p);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { cell: c })
                }
            })
            .collect::<Result<_>>()?;
        let ops = &pr.ops;
        let au = ops.a_uu.mul_vec(&x.u);
        let dtpe = ops.d_pu.tr_mul_vec(&pe);
        let alpha = pr.params.law.alpha;
        let ru: Vec<f64> = (0..ops.n_u())
            .map(|k| pr.f_u[k] - (au[k] - alpha * dtpe[k]))
            .collect();
        let du = ops.solve_elasticity(&ru)?;
        add(&mut next.u, &du);
        Ok(MapOutput {
            state: next,
            unbounded_derivative: unbounded,
            residual_norms,
        })
    }
}

fn add(x: &mut [f64], d: &[f64]) {
    for (a, b) in x.iter_mut().zip(d) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::derivative_counts;
    use crate::fem::RectMesh;
    use crate::poromech::{DenseReducedProblem, Scenario};

    #[test]
    fn beta_values() {
        assert_eq!(fixed_stress_beta(12.5, 25.0 / 3.0, 0.0, 2), 0.0);
        let b = fixed_stress_beta(12.5, 25.0 / 3.0, 1.0, 2);
        assert!((b - 0.048).abs() < 1e-12);
        let h = fixed_stress_beta(12.5, 25.0 / 3.0, 0.5, 2);
        assert!((h - b / 4.0).abs() < 1e-15);
    }

    #[test]
    fn labels_round_trip() {
        for c in [
            SchemeConfig::newton(),
            SchemeConfig::fsl(),
            SchemeConfig::fsl_half(),
            SchemeConfig::fs_mp(),
            SchemeConfig::fs_newton(),
            SchemeConfig::from_label("FSL(L=0.05)").unwrap(),
            SchemeConfig::from_label("fsl(l=0.25x)").unwrap(),
        ] {
            assert_eq!(SchemeConfig::from_label(&c.label()), Some(c));
        }
        assert_eq!(
            SchemeConfig::from_label("FSL(L=0.05)").unwrap().l_override,
            Some(0.05)
        );
        assert_eq!(
            SchemeConfig::from_label("FSL(L=0.25x)").unwrap().l_scale,
            0.25
        );
        assert!(SchemeConfig::from_label("FSL(L=abc)").is_none());
        assert!(SchemeConfig::from_label("picard").is_none());
    }

    fn problem(n: usize) -> Problem {
        let sc = Scenario::test_one(1.0);
        let mesh = RectMesh::new(n, n, 1.0, 1.0, 1.0 / n as f64).unwrap();
        Problem::new(&mesh, sc.params, sc.p0).unwrap()
    }

    #[test]
    fn exact_solution_is_a_fixed_point() {
        let pr = problem(3);
        let step = pr.step_data(pr.initial_state()).unwrap();
        let newton = Scheme::new(&pr, SchemeConfig::newton()).unwrap();
        let mut x = step.prev.clone();
        for _ in 0..30 {
            x = newton.map(&step, &x).unwrap().state;
        }
        for cfg in [
            SchemeConfig::newton(),
            SchemeConfig::fsl(),
            SchemeConfig::fs_mp(),
            SchemeConfig::fs_newton(),
        ] {
            let y = Scheme::new(&pr, cfg).unwrap().map(&step, &x).unwrap().state;
            let [dp, dq, du] = pr.norms(&diff(&y.p, &x.p), &diff(&y.q, &x.q), &diff(&y.u, &x.u));
            assert!(dp + dq + du <= 1e-11, "{:?}: {dp} {dq} {du}", cfg.kind);
        }
    }

    fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    #[test]
    fn newton_is_exact_for_the_saturated_linear_problem() {
        let mut sc = Scenario::test_one(1.0);
        sc.params.law.inv_n = 0.1;
        sc.params.q_star = 0.5;
        let mesh = RectMesh::new(3, 3, 1.0, 1.0, 1.0 / 3.0).unwrap();
        // pressures stay far above zero, so s = 1 and k is constant
        let pr = Problem::new(&mesh, sc.params, 50.0).unwrap();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let newton = Scheme::new(&pr, SchemeConfig::newton()).unwrap();
        let x1 = newton.map(&step, &step.prev).unwrap().state;
        let r = pr.residuals(&step, &x1).unwrap();
        let rmax =
            r.p.iter()
                .chain(&r.q)
                .chain(&r.u)
                .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(rmax < 1e-10, "{rmax}");
    }

    #[test]
    fn fsl_is_derivative_free_and_matches_the_reduced_l_scheme() {
        let pr = problem(2);
        let fsl = Scheme::new(&pr, SchemeConfig::fsl()).unwrap();
        let red = DenseReducedProblem::new(&pr).unwrap();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let before = derivative_counts();
        let mut x = step.prev.clone();
        let mut p = step.prev.p.clone();
        for _ in 0..8 {
            x = fsl.map(&step, &x).unwrap().state;
            p = red.l_scheme_step(&step, &p, fsl.l_coefficient()).unwrap();
            for (a, b) in x.p.iter().zip(&p) {
                assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
        assert_eq!(derivative_counts().since(before).total(), 0);
    }

    #[test]
    fn fs_mp_saturated_pressure_coefficient_is_beta() {
        let sc = Scenario::test_one(1.0);
        let mesh = RectMesh::new(2, 2, 1.0, 1.0, 0.5).unwrap();
        let pr = Problem::new(&mesh, sc.params, 1.0).unwrap();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let fields = pr.cell_fields(&step.prev.p).unwrap();
        let mp = Scheme::new(&pr, SchemeConfig::fs_mp()).unwrap();
        let beta = pr.params.beta_fs();
        for v in mp.pressure_coefficients(&step, &step.prev, &fields) {
            assert_eq!(v, beta);
        }
    }
}
