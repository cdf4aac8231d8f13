use super::problem::{Problem, StepData};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Largest mesh the dense oracle accepts.
pub const DENSE_MAX_CELLS: usize = 64;

/// The pressure-only problem obtained by eliminating displacement and flux
/// with dense inverses:
///
/// `b(p) + tau D K(p) (f_q + D^T p) = f_p`,
///
/// where `b(p) = S(p) phi(p)` collects the volume terms with the elastic
/// response `u(p) = A^{-1} (f_u + alpha D_pu^T p_E(p))` substituted.
#[derive(Debug)]
pub struct DenseReducedProblem<'a> {
    problem: &'a Problem,
    a_inv: DMatrix<f64>,
    d_pu: DMatrix<f64>,
    /// Divergence restricted to free (interior) flux dofs.
    d_free: DMatrix<f64>,
    /// Divergence restricted to prescribed flux dofs.
    d_bnd: DMatrix<f64>,
    free: Vec<usize>,
    bnd: Vec<usize>,
}

fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

impl<'a> DenseReducedProblem<'a> {
    pub fn new(problem: &'a Problem) -> Result<Self> {
        let ops = &problem.ops;
        let np = ops.n_p();
        if np > DENSE_MAX_CELLS {
            return Err(Error::ScaleGuard {
                cells: np,
                limit: DENSE_MAX_CELLS,
            });
        }
        let a = ops.a_uu.to_dense();
        let a_inv = a
            .cholesky()
            .ok_or_else(|| Error::Singular("elasticity stiffness".into()))?
            .inverse();
        let d_pq = ops.d_pq.to_dense();
        let free: Vec<usize> = (0..ops.n_q()).filter(|&e| !ops.q_fixed[e]).collect();
        let bnd: Vec<usize> = (0..ops.n_q()).filter(|&e| ops.q_fixed[e]).collect();
        Ok(DenseReducedProblem {
            problem,
            a_inv,
            d_pu: ops.d_pu.to_dense(),
            d_free: d_pq.select_columns(&free),
            d_bnd: d_pq.select_columns(&bnd),
            free,
            bnd,
        })
    }

    fn area(&self) -> f64 {
        self.problem.mesh().cell_area()
    }

    fn pe(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let vg = &self.problem.params.vg;
        p.iter()
            .map(|&v| vg.equivalent_pore_pressure(v))
            .collect::<Result<Vec<_>>>()
            .map(DVector::from_vec)
    }

    /// Displacement in equilibrium with pressure `p`.
    pub fn u_of_p(&self, p: &[f64]) -> Result<Vec<f64>> {
        let pe = self.pe(&dvec(p))?;
        let alpha = self.problem.params.law.alpha;
        let rhs = dvec(&self.problem.f_u) + alpha * self.d_pu.transpose() * pe;
        Ok((&self.a_inv * rhs).as_slice().to_vec())
    }

    /// Area-weighted porosity with `u = u(p)`.
    fn phi_vec(&self, step: &StepData, p: &DVector<f64>) -> Result<DVector<f64>> {
        let law = &self.problem.params.law;
        let area = self.area();
        let u = dvec(&self.u_of_p(p.as_slice())?);
        let du = u - dvec(&step.prev.u);
        let pe = self.pe(p)?;
        let div = &self.d_pu * du;
        Ok(DVector::from_fn(p.len(), |c, _| {
            area * step.phi_prev[c]
                + law.alpha * div[c]
                + law.inv_n * area * (pe[c] - step.pe_prev[c])
        }))
    }

    fn sat(&self, p: &DVector<f64>) -> DVector<f64> {
        p.map(|v| self.problem.params.vg.saturation(v).unwrap_or(f64::NAN))
    }

    /// `b(p) = S(p) phi(p)`.
    pub fn b(&self, step: &StepData, p: &[f64]) -> Result<Vec<f64>> {
        let p = dvec(p);
        let phi = self.phi_vec(step, &p)?;
        Ok(self.sat(&p).component_mul(&phi).as_slice().to_vec())
    }

    /// `f_p = M_p phi^{n-1} s^{n-1}`.
    pub fn f_p(&self, step: &StepData) -> Vec<f64> {
        let area = self.area();
        (0..step.phi_prev.len())
            .map(|c| area * step.phi_prev[c] * step.s_prev[c])
            .collect()
    }

    /// Inverse of the free-dof block of `M_q(1/k_w(p))`.
    pub fn k_free(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let fields = self.problem.cell_fields(p)?;
        let m = self.problem.ops.weighted_flux_mass(&fields.kinv).to_dense();
        m.select_rows(&self.free)
            .select_columns(&self.free)
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::Singular("free flux mass".into()))
    }

    /// Free flux data `f_q - M_fb q_b` with the mobility of `p_mob`.
    fn flux_data(&self, step: &StepData, p_mob: &[f64]) -> Result<DVector<f64>> {
        let fields = self.problem.cell_fields(p_mob)?;
        let m = self.problem.ops.weighted_flux_mass(&fields.kinv).to_dense();
        let m_fb = m.select_rows(&self.free).select_columns(&self.bnd);
        let qb = DVector::from_iterator(self.bnd.len(), self.bnd.iter().map(|&e| step.q_bc[e]));
        let fq = DVector::from_iterator(
            self.free.len(),
            self.free.iter().map(|&e| self.problem.f_q[e]),
        );
        Ok(fq - m_fb * qb)
    }

    fn q_bnd(&self, step: &StepData) -> DVector<f64> {
        DVector::from_iterator(self.bnd.len(), self.bnd.iter().map(|&e| step.q_bc[e]))
    }

    /// Darcy flux for pressure `p` (all edges).
    pub fn flux(&self, step: &StepData, p: &[f64]) -> Result<Vec<f64>> {
        let k = self.k_free(p)?;
        let qf = k * (self.flux_data(step, p)? + self.d_free.transpose() * dvec(p));
        let mut q = step.q_bc.clone();
        for (i, &e) in self.free.iter().enumerate() {
            q[e] = qf[i];
        }
        Ok(q)
    }

    /// `b(p) + tau D q(p) - f_p`.
    pub fn compact_residual(&self, step: &StepData, p: &[f64]) -> Result<Vec<f64>> {
        let tau = self.problem.params.tau;
        let b = dvec(&self.b(step, p)?);
        let q = self.flux(step, p)?;
        let div = dvec(&self.problem.ops.d_pq.mul_vec(&q));
        Ok((b + tau * div - dvec(&self.f_p(step))).as_slice().to_vec())
    }

    /// One L-scheme step with `L_pp = l * M_p`:
    /// `(L_pp + tau D K D^T) p = f_p - b(p') + L_pp p' - tau D K f~ - tau D_b q_b`.
    pub fn l_scheme_step(&self, step: &StepData, p_prev: &[f64], l: f64) -> Result<Vec<f64>> {
        let tau = self.problem.params.tau;
        let np = p_prev.len();
        let lpp = l * self.area();
        let k = self.k_free(p_prev)?;
        let dk = &self.d_free * &k;
        let mut lhs = tau * &dk * self.d_free.transpose();
        for c in 0..np {
            lhs[(c, c)] += lpp;
        }
        let pp = dvec(p_prev);
        let rhs = dvec(&self.f_p(step)) - dvec(&self.b(step, p_prev)?) + lpp * &pp
            - tau * &dk * self.flux_data(step, p_prev)?
            - tau * &self.d_bnd * self.q_bnd(step);
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("reduced L-scheme matrix".into()))?;
        Ok(sol.as_slice().to_vec())
    }

    /// Jacobian of `b`:
    /// `diag(s' phi) + S (alpha^2 D A^{-1} D^T + M_p / N) S`.
    pub fn jacobian_b(&self, step: &StepData, p: &[f64]) -> Result<DMatrix<f64>> {
        let vg = &self.problem.params.vg;
        let law = &self.problem.params.law;
        let pv = dvec(p);
        let phi = self.phi_vec(step, &pv)?;
        let s = self.sat(&pv);
        let mut db = law.alpha * law.alpha * &self.d_pu * &self.a_inv * self.d_pu.transpose();
        for c in 0..p.len() {
            db[(c, c)] += law.inv_n * self.area();
        }
        let sm = DMatrix::from_diagonal(&s);
        let mut db = &sm * db * &sm;
        for c in 0..p.len() {
            db[(c, c)] += vg.saturation_derivative(p[c])? * phi[c];
        }
        Ok(db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{solve_indefinite, LinearSystem, RectMesh};
    use crate::poromech::{PoroState, Scenario};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(alpha: f64) -> Problem {
        let sc = Scenario::test_one(alpha);
        let mesh = RectMesh::new(2, 2, 1.0, 1.0, 0.5).unwrap();
        Problem::new(&mesh, sc.params, sc.p0).unwrap()
    }

    /// Plain Newton on the three-field system, used as the oracle solution.
    fn newton_solve(pr: &Problem, step: &StepData) -> PoroState {
        let mut x = step.prev.clone();
        x.time = step.t;
        for _ in 0..50 {
            let r = pr.residuals(step, &x).unwrap();
            let rv: Vec<f64> = r.p.iter().chain(&r.q).chain(&r.u).copied().collect();
            if rv.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-14 {
                break;
            }
            let j = pr.newton_blocks(step, &x).unwrap();
            let dx = solve_indefinite(&LinearSystem::indefinite(j.matrix).unwrap(), &rv).unwrap();
            let (np, nq) = (pr.ops.n_p(), pr.ops.n_q());
            for (k, d) in dx.iter().enumerate() {
                if k < np {
                    x.p[k] += d;
                } else if k < np + nq {
                    x.q[k - np] += d;
                } else {
                    x.u[k - np - nq] += d;
                }
            }
        }
        x
    }

    #[test]
    fn compact_form_vanishes_at_three_field_solution() {
        let pr = small(1.0);
        let step = pr.step_data(pr.initial_state()).unwrap();
        let sol = newton_solve(&pr, &step);
        let red = DenseReducedProblem::new(&pr).unwrap();
        let r = red.compact_residual(&step, &sol.p).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-10), "{r:?}");
        let u = red.u_of_p(&sol.p).unwrap();
        for (a, b) in u.iter().zip(&sol.u) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobian_of_b_is_symmetric_and_nonnegative() {
        let pr = small(1.0);
        let step = pr.step_data(pr.initial_state()).unwrap();
        let red = DenseReducedProblem::new(&pr).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p: Vec<f64> = (0..4).map(|_| rng.gen_range(-20.0..-1.0)).collect();
            let db = red.jacobian_b(&step, &p).unwrap();
            assert!((&db - db.transpose()).amax() <= 1e-12 * db.amax());
            let eig = db.symmetric_eigenvalues();
            assert!(eig.min() > 0.0);
            // finite-difference check of one column
            let h = 1e-6;
            let mut pp = p.clone();
            pp[1] += h;
            let mut pm = p.clone();
            pm[1] -= h;
            let bp = red.b(&step, &pp).unwrap();
            let bm = red.b(&step, &pm).unwrap();
            for c in 0..4 {
                let fd = (bp[c] - bm[c]) / (2.0 * h);
                assert!((fd - db[(c, 1)]).abs() <= 1e-5 * db.amax());
            }
        }
    }

    #[test]
    fn scale_guard() {
        let sc = Scenario::test_one(1.0);
        let mesh = RectMesh::new(9, 8, 1.0, 1.0, 1.0 / 9.0).unwrap();
        let pr = Problem::new(&mesh, sc.params, sc.p0).unwrap();
        assert!(matches!(
            DenseReducedProblem::new(&pr),
            Err(Error::ScaleGuard { cells: 72, .. })
        ));
    }
}
