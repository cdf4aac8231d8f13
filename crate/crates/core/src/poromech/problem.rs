use super::params::{inflow_rate, PhysicsParams};
use crate::constitutive::Porosity;
use crate::error::{Error, Result};
use crate::fem::{
    assemble, solve_spd, DiscreteOperators, EdgeNormal, EdgeTag, LinearSystem, RectMesh,
    SparseMatrix,
};

/// Coefficient vectors of pressure (P0), flux (RT0) and displacement (Q1).
#[derive(Debug, Clone, PartialEq)]
pub struct PoroState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub time: f64,
}

impl PoroState {
    pub fn is_finite(&self) -> bool {
        self.p
            .iter()
            .chain(&self.q)
            .chain(&self.u)
            .all(|v| v.is_finite())
    }
}

/// Residual vectors `(r_p, r_q, r_u)`, each "data minus operator".
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
}

/// Data frozen over one time step.
#[derive(Debug, Clone)]
pub struct StepData {
    /// New time level `t^n`.
    pub t: f64,
    pub prev: PoroState,
    pub s_prev: Vec<f64>,
    pub pe_prev: Vec<f64>,
    /// Porosity `phi^{n-1}` per cell.
    pub phi_prev: Vec<f64>,
    /// Prescribed normal flux on boundary dofs (zero on interior dofs).
    pub q_bc: Vec<f64>,
}

/// Pointwise constitutive values on every cell.
#[derive(Debug, Clone)]
pub(crate) struct CellFields {
    pub s: Vec<f64>,
    pub pe: Vec<f64>,
    pub kinv: Vec<f64>,
}

/// A discretized scenario: operators, parameters and the reference state
/// that all porosity increments are measured from.
#[derive(Debug)]
pub struct Problem {
    pub ops: DiscreteOperators,
    pub params: PhysicsParams,
    initial: PoroState,
    div_init: Vec<f64>,
    pe_init: Vec<f64>,
    /// Load vector of the Darcy equation.
    pub f_q: Vec<f64>,
    /// Load vector of the momentum equation, including the reference traction.
    pub f_u: Vec<f64>,
}

impl Problem {
    pub fn new(mesh: &RectMesh, params: PhysicsParams, p0: f64) -> Result<Self> {
        params.validate()?;
        if !p0.is_finite() {
            return Err(Error::InvalidInput(
                "initial pressure must be finite".into(),
            ));
        }
        let ops = assemble(mesh, params.mu, params.lambda)?;
        let np = ops.n_p();
        let f_q: Vec<f64> = (0..ops.n_q())
            .map(|e| {
                let g = match mesh.edge_normal(e) {
                    EdgeNormal::X => params.gravity[0],
                    EdgeNormal::Y => params.gravity[1],
                };
                params.rho_w * g * ops.flux_load[e]
            })
            .collect();
        let pe0 = params.vg.equivalent_pore_pressure(p0)?;
        let pe_init = vec![pe0; np];
        // The initial displacement u = 0 is taken as the stress-free reference
        // under p_E(p0): the momentum load carries the matching traction.
        let react = ops.d_pu.tr_mul_vec(&pe_init);
        let f_u: Vec<f64> = (0..ops.n_u())
            .map(|k| {
                if ops.u_fixed[k] {
                    0.0
                } else {
                    params.rho_b * params.gravity[k % 2] * ops.node_load[k / 2]
                        - params.law.alpha * react[k]
                }
            })
            .collect();
        let mut problem = Problem {
            initial: PoroState {
                p: vec![p0; np],
                q: vec![0.0; ops.n_q()],
                u: vec![0.0; ops.n_u()],
                time: 0.0,
            },
            div_init: vec![0.0; np],
            pe_init,
            ops,
            params,
            f_q,
            f_u,
        };
        problem.initial.q = problem.stationary_flux(&problem.initial.p)?;
        Ok(problem)
    }

    pub fn initial_state(&self) -> &PoroState {
        &self.initial
    }

    pub fn mesh(&self) -> &RectMesh {
        &self.ops.mesh
    }

    /// Darcy flux for a fixed pressure with no-flow boundaries.
    fn stationary_flux(&self, p: &[f64]) -> Result<Vec<f64>> {
        let fields = self.cell_fields(p)?;
        let mq = self.ops.weighted_flux_mass(&fields.kinv);
        let dtp = self.ops.d_pq.tr_mul_vec(p);
        let rhs: Vec<f64> = (0..self.ops.n_q())
            .map(|e| {
                if self.ops.q_fixed[e] {
                    0.0
                } else {
                    self.f_q[e] + dtp[e]
                }
            })
            .collect();
        if rhs.iter().all(|v| *v == 0.0) {
            return Ok(rhs);
        }
        let sys = LinearSystem::spd(fix_rows(&mq, &self.ops.q_fixed))?;
        solve_spd(&sys, &rhs)
    }

    pub(crate) fn cell_fields(&self, p: &[f64]) -> Result<CellFields> {
        let vg = &self.params.vg;
        let mut s = Vec::with_capacity(p.len());
        let mut pe = Vec::with_capacity(p.len());
        let mut kinv = Vec::with_capacity(p.len());
        for (c, &pc) in p.iter().enumerate() {
            if !pc.is_finite() {
                return Err(Error::NonFinite { cell: c });
            }
            s.push(vg.sat(pc));
            pe.push(vg.equivalent_pore_pressure(pc)?);
            let k = vg.mob_of_p(pc);
            if !(k > 0.0) {
                return Err(Error::NonFinite { cell: c });
            }
            kinv.push(1.0 / k);
        }
        Ok(CellFields { s, pe, kinv })
    }

    /// Porosity of a state relative to the initial state, with admissibility.
    pub fn porosity(&self, state: &PoroState) -> Result<Vec<Porosity>> {
        let pe = self.cell_fields(&state.p)?.pe;
        let div = self.ops.div_u(&state.u);
        let area = self.mesh().cell_area();
        Ok((0..self.ops.n_p())
            .map(|c| {
                self.params
                    .law
                    .porosity((div[c] - self.div_init[c]) / area, pe[c] - self.pe_init[c])
            })
            .collect())
    }

    /// Freezes the previous time level and boundary data for the next step.
    pub fn step_data(&self, prev: &PoroState) -> Result<StepData> {
        let t = prev.time + self.params.tau;
        let fields = self.cell_fields(&prev.p)?;
        let phi_prev = self.porosity(prev)?.iter().map(|p| p.value).collect();
        let rate = inflow_rate(t, self.params.q_star);
        let q_bc = (0..self.ops.n_q())
            .map(|e| match self.mesh().edge_tag(e) {
                EdgeTag::Inflow => rate,
                _ => 0.0,
            })
            .collect();
        Ok(StepData {
            t,
            prev: prev.clone(),
            s_prev: fields.s,
            pe_prev: fields.pe,
            phi_prev,
            q_bc,
        })
    }

    /// Residuals of the fully implicit discrete equations at `state`.
    pub fn residuals(&self, step: &StepData, state: &PoroState) -> Result<Residuals> {
        let fields = self.cell_fields(&state.p)?;
        self.residuals_with(step, state, &fields)
    }

    pub(crate) fn residuals_with(
        &self,
        step: &StepData,
        state: &PoroState,
        fields: &CellFields,
    ) -> Result<Residuals> {
        let ops = &self.ops;
        let law = &self.params.law;
        let area = self.mesh().cell_area();
        let du: Vec<f64> = state
            .u
            .iter()
            .zip(&step.prev.u)
            .map(|(a, b)| a - b)
            .collect();
        let div_inc = ops.div_u(&du);
        let div_q = ops.d_pq.mul_vec(&state.q);
        let mut rp = vec![0.0; ops.n_p()];
        for c in 0..ops.n_p() {
            let s = fields.s[c];
            let v = area * step.phi_prev[c] * (s - step.s_prev[c])
                + law.alpha * s * div_inc[c]
                + law.inv_n * s * (fields.pe[c] - step.pe_prev[c]) * area
                + self.params.tau * div_q[c];
            if !v.is_finite() {
                return Err(Error::NonFinite { cell: c });
            }
            rp[c] = -v;
        }

        let mq = ops.weighted_flux_mass(&fields.kinv);
        let mqq = mq.mul_vec(&state.q);
        let dtp = ops.d_pq.tr_mul_vec(&state.p);
        let rq = (0..ops.n_q())
            .map(|e| {
                if ops.q_fixed[e] {
                    step.q_bc[e] - state.q[e]
                } else {
                    self.f_q[e] - (mqq[e] - dtp[e])
                }
            })
            .collect();

        let au = ops.a_uu.mul_vec(&state.u);
        let dtpe = ops.d_pu.tr_mul_vec(&fields.pe);
        let ru = (0..ops.n_u())
            .map(|k| self.f_u[k] - (au[k] - law.alpha * dtpe[k]))
            .collect();
        Ok(Residuals {
            p: rp,
            q: rq,
            u: ru,
        })
    }

    /// Per-cell defect of the volume balance identity
    /// `phi^n s^n - phi^{n-1} s^{n-1} = phi^{n-1} (s^n - s^{n-1}) + s^n (alpha div du + dp_E / N)`.
    pub fn volume_conservation_gap(&self, step: &StepData, state: &PoroState) -> Result<Vec<f64>> {
        let fields = self.cell_fields(&state.p)?;
        let phi: Vec<f64> = self.porosity(state)?.iter().map(|p| p.value).collect();
        let area = self.mesh().cell_area();
        let du: Vec<f64> = state
            .u
            .iter()
            .zip(&step.prev.u)
            .map(|(a, b)| a - b)
            .collect();
        let div_inc = self.ops.div_u(&du);
        let law = &self.params.law;
        Ok((0..self.ops.n_p())
            .map(|c| {
                let s = fields.s[c];
                let sp = step.s_prev[c];
                let lhs = phi[c] * s - step.phi_prev[c] * sp;
                let rhs = step.phi_prev[c] * (s - sp)
                    + s * (law.alpha * div_inc[c] / area
                        + law.inv_n * (fields.pe[c] - step.pe_prev[c]));
                lhs - rhs
            })
            .collect())
    }

    /// Mass-weighted norms `(|p|, |q|, |u|)` in L2.
    pub fn norms(&self, p: &[f64], q: &[f64], u: &[f64]) -> [f64; 3] {
        [self.ops.norm_p(p), self.ops.norm_q(q), self.ops.norm_u(u)]
    }
}

/// Replaces the rows (and columns) of fixed dofs by identity rows, keeping
/// the matrix symmetric.
pub(crate) fn fix_rows(m: &SparseMatrix, fixed: &[bool]) -> SparseMatrix {
    let mut t: Vec<_> = m
        .triplets()
        .into_iter()
        .filter(|&(i, j, _)| !fixed[i] && !fixed[j])
        .collect();
    t.extend((0..fixed.len()).filter(|&i| fixed[i]).map(|i| (i, i, 1.0)));
    SparseMatrix::from_triplets(m.nrows(), m.ncols(), &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poromech::Scenario;

    fn problem(nx: usize, alpha: f64) -> Problem {
        let sc = Scenario::test_one(alpha);
        let mesh = RectMesh::new(
            nx,
            nx,
            1.0,
            1.0,
            0.2 * (nx / 5).max(1) as f64 / (nx as f64 / 5.0),
        )
        .unwrap();
        Problem::new(&mesh, sc.params, sc.p0).unwrap()
    }

    #[test]
    fn initial_state_is_uniform_and_at_rest() {
        let pr = problem(5, 1.0);
        let init = pr.initial_state();
        assert!(init.u.iter().all(|v| *v == 0.0));
        assert!(init.q.iter().all(|v| *v == 0.0));
        let s = pr.cell_fields(&init.p).unwrap().s;
        assert!(s.iter().all(|v| (v - 0.4).abs() < 5e-4));
        // the initial state is stationary when no inflow is applied
        let mut step = pr.step_data(init).unwrap();
        step.q_bc.iter_mut().for_each(|v| *v = 0.0);
        let r = pr.residuals(&step, init).unwrap();
        for v in r.p.iter().chain(&r.q).chain(&r.u) {
            assert!(v.abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn single_cell_residual_by_hand() {
        let sc = Scenario::test_one(0.5);
        let mesh = RectMesh::new(1, 1, 1.0, 1.0, 1.0).unwrap();
        let pr = Problem::new(&mesh, sc.params, sc.p0).unwrap();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let vg = sc.params.vg;
        let p = -5.0;
        let mut state = pr.initial_state().clone();
        state.p = vec![p];
        state.q = vec![0.0; 4];
        // top edge carries the inflow; no displacement
        let top = mesh.cell_edges(0)[3];
        state.q[top] = 0.3;
        let r = pr.residuals(&step, &state).unwrap();
        let s = vg.saturation(p).unwrap();
        let s0 = vg.saturation(sc.p0).unwrap();
        let expected_rp = -(0.2 * (s - s0) + 0.1 * 0.3);
        assert!((r.p[0] - expected_rp).abs() < 1e-12);
        // boundary rows of r_q hold the flux constraint
        let g = inflow_rate(0.1, -1.25);
        assert!((r.q[top] - (g - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn volume_identity_is_exact() {
        let pr = problem(5, 1.0);
        let step = pr.step_data(pr.initial_state()).unwrap();
        let mut state = pr.initial_state().clone();
        for (c, p) in state.p.iter_mut().enumerate() {
            *p += 0.3 * (c as f64).sin();
        }
        for (k, u) in state.u.iter_mut().enumerate() {
            if !pr.ops.u_fixed[k] {
                *u = 1e-2 * (k as f64).cos();
            }
        }
        let gap = pr.volume_conservation_gap(&step, &state).unwrap();
        assert!(gap.iter().all(|g| g.abs() <= 1e-13));
    }

    #[test]
    fn saturated_regime_reduces_to_linear_biot() {
        let mut sc = Scenario::test_one(0.8);
        sc.params.law.inv_n = 0.3;
        let mesh = RectMesh::new(3, 3, 1.0, 1.0, 1.0 / 3.0).unwrap();
        let pr = Problem::new(&mesh, sc.params, 1.0).unwrap();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let mut state = pr.initial_state().clone();
        for (c, p) in state.p.iter_mut().enumerate() {
            *p = 1.0 + 0.1 * c as f64;
        }
        for (e, q) in state.q.iter_mut().enumerate() {
            *q = 0.05 * (e as f64).cos();
        }
        for (k, u) in state.u.iter_mut().enumerate() {
            if !pr.ops.u_fixed[k] {
                *u = 1e-3 * (k as f64).sin();
            }
        }
        let r = pr.residuals(&step, &state).unwrap();
        // linear Biot: storage (p - p_prev) / N plus alpha div du plus tau div q
        let a = mesh.cell_area();
        let ops = &pr.ops;
        let div_u = ops.d_pu.mul_vec(&state.u);
        let div_q = ops.d_pq.mul_vec(&state.q);
        for c in 0..ops.n_p() {
            let lin = -(0.3 * a * (state.p[c] - 1.0) + 0.8 * div_u[c] + 0.1 * div_q[c]);
            assert!((r.p[c] - lin).abs() < 1e-12);
        }
        let k0 = sc.params.vg.saturated_mobility();
        let mq = ops.m_q.mul_vec(&state.q);
        let dtp = ops.d_pq.tr_mul_vec(&state.p);
        for e in (0..ops.n_q()).filter(|&e| !ops.q_fixed[e]) {
            assert!((r.q[e] - (dtp[e] - mq[e] / k0)).abs() < 1e-12);
        }
        let au = ops.a_uu.mul_vec(&state.u);
        let dtp = ops.d_pu.tr_mul_vec(&state.p);
        for k in (0..ops.n_u()).filter(|&k| !ops.u_fixed[k]) {
            let lin = pr.f_u[k] - au[k] + 0.8 * dtp[k];
            assert!((r.u[k] - lin).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_pressure_names_the_cell() {
        let pr = problem(5, 1.0);
        let step = pr.step_data(pr.initial_state()).unwrap();
        let mut state = pr.initial_state().clone();
        state.p[7] = f64::NAN;
        assert!(matches!(
            pr.residuals(&step, &state),
            Err(Error::NonFinite { cell: 7 })
        ));
    }
}
