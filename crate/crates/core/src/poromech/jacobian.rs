use super::problem::{CellFields, PoroState, Problem, StepData};
use crate::error::Result;
use crate::fem::SparseMatrix;

/// Coupled Newton matrix with the unbounded-derivative warning attached.
#[derive(Debug, Clone)]
pub struct NewtonMatrix {
    /// `-dr/dx` in the unknown ordering `[p, q, u]`.
    pub matrix: SparseMatrix,
    /// Set when some constitutive derivative hit the cap.
    pub unbounded_derivative: bool,
}

impl Problem {
    /// Porosity `phi^{n-1} + alpha div(u - u^{n-1}) / |K| + (p_E - p_E^{n-1}) / N`.
    pub(crate) fn current_porosity(
        &self,
        step: &StepData,
        state: &PoroState,
        fields: &CellFields,
    ) -> Vec<f64> {
        let law = &self.params.law;
        let area = self.mesh().cell_area();
        let du: Vec<f64> = state
            .u
            .iter()
            .zip(&step.prev.u)
            .map(|(a, b)| a - b)
            .collect();
        let div_inc = self.ops.div_u(&du);
        (0..self.ops.n_p())
            .map(|c| {
                step.phi_prev[c]
                    + law.alpha * div_inc[c] / area
                    + law.inv_n * (fields.pe[c] - step.pe_prev[c])
            })
            .collect()
    }

    /// Triplets of the mixed flow block in `[p, q]` ordering:
    /// `[[diag(pressure), tau D_pq], [dM q - D_pq^T, M_q(kinv)]]` with identity
    /// rows on the prescribed flux dofs. `dkinv` adds the mobility derivative.
    pub(crate) fn flow_triplets(
        &self,
        pressure: &[f64],
        kinv: &[f64],
        dkinv: Option<(&[f64], &[f64])>,
    ) -> Vec<(usize, usize, f64)> {
        let ops = &self.ops;
        let np = ops.n_p();
        let tau = self.params.tau;
        let fixed = &ops.q_fixed;
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(np * 14 + ops.n_q() * 8);
        for (c, &v) in pressure.iter().enumerate() {
            t.push((c, c, v));
        }
        for (c, e, d) in ops.d_pq.triplets() {
            t.push((c, np + e, tau * d));
            if !fixed[e] {
                t.push((np + e, c, -d));
            }
        }
        if let Some((dk, q)) = dkinv {
            for c in 0..np {
                let (edges, vals) = ops.local_flux_mass_action(c, q);
                for (e, v) in edges.into_iter().zip(vals) {
                    if !fixed[e] {
                        t.push((np + e, c, dk[c] * v));
                    }
                }
            }
        }
        let mq = ops.weighted_flux_mass(kinv);
        for (i, j, v) in mq.triplets() {
            if !fixed[i] {
                t.push((np + i, np + j, v));
            }
        }
        for e in (0..ops.n_q()).filter(|&e| fixed[e]) {
            t.push((np + e, np + e, 1.0));
        }
        t
    }

    /// Jacobian of the fully implicit system, `J = -dr/dx`, so that a Newton
    /// increment solves `J dx = r`.
    pub fn newton_blocks(&self, step: &StepData, state: &PoroState) -> Result<NewtonMatrix> {
        let fields = self.cell_fields(&state.p)?;
        self.newton_blocks_with(step, state, &fields)
    }

    pub(crate) fn newton_blocks_with(
        &self,
        step: &StepData,
        state: &PoroState,
        fields: &CellFields,
    ) -> Result<NewtonMatrix> {
        let ops = &self.ops;
        let vg = &self.params.vg;
        let law = &self.params.law;
        let (np, nq, nu) = (ops.n_p(), ops.n_q(), ops.n_u());
        let area = self.mesh().cell_area();
        let phi = self.current_porosity(step, state, fields);

        let mut unbounded = false;
        let mut pressure = Vec::with_capacity(np);
        let mut dkinv = Vec::with_capacity(np);
        for c in 0..np {
            let p = state.p[c];
            let s = fields.s[c];
            pressure.push(area * (phi[c] * vg.sat_prime(p) + law.inv_n * s * s));
            let d = vg.inverse_mobility_prime(p);
            unbounded |= d.unbounded;
            dkinv.push(d.value);
        }
        let mut t = self.flow_triplets(&pressure, &fields.kinv, Some((&dkinv, &state.q)));
        let off = np + nq;
        for (c, k, d) in ops.d_pu.triplets() {
            t.push((c, off + k, law.alpha * fields.s[c] * d));
            t.push((off + k, c, -law.alpha * d * fields.s[c]));
        }
        for (i, j, v) in ops.a_uu.triplets() {
            t.push((off + i, off + j, v));
        }
        let n = np + nq + nu;
        Ok(NewtonMatrix {
            matrix: SparseMatrix::from_triplets(n, n, &t),
            unbounded_derivative: unbounded,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::RectMesh;
    use crate::poromech::Scenario;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pack(s: &PoroState) -> Vec<f64> {
        s.p.iter().chain(&s.q).chain(&s.u).copied().collect()
    }

    fn unpack(pr: &Problem, x: &[f64], time: f64) -> PoroState {
        let (np, nq) = (pr.ops.n_p(), pr.ops.n_q());
        PoroState {
            p: x[..np].to_vec(),
            q: x[np..np + nq].to_vec(),
            u: x[np + nq..].to_vec(),
            time,
        }
    }

    fn residual_vec(pr: &Problem, step: &StepData, s: &PoroState) -> Vec<f64> {
        let r = pr.residuals(step, s).unwrap();
        r.p.into_iter().chain(r.q).chain(r.u).collect()
    }

    #[test]
    fn matches_directional_differences() {
        let sc = Scenario::test_one(1.0);
        let mesh = RectMesh::new(4, 4, 1.0, 1.0, 0.25).unwrap();
        let pr = Problem::new(&mesh, sc.params, sc.p0).unwrap();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let mut state = pr.initial_state().clone();
            state
                .p
                .iter_mut()
                .for_each(|p| *p = rng.gen_range(-12.0..-3.0));
            state
                .q
                .iter_mut()
                .for_each(|q| *q = rng.gen_range(-0.5..0.5));
            for (k, u) in state.u.iter_mut().enumerate() {
                if !pr.ops.u_fixed[k] {
                    *u = rng.gen_range(-1e-2..1e-2);
                }
            }
            let x = pack(&state);
            let dir: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let fixed_u = k >= pr.ops.n_p() + pr.ops.n_q()
                        && pr.ops.u_fixed[k - pr.ops.n_p() - pr.ops.n_q()];
                    if fixed_u {
                        0.0
                    } else {
                        rng.gen_range(-1.0..1.0) * v.abs().max(0.1)
                    }
                })
                .collect();
            let h = 1e-7;
            let xp: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
            let xm: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
            let rp = residual_vec(&pr, &step, &unpack(&pr, &xp, state.time));
            let rm = residual_vec(&pr, &step, &unpack(&pr, &xm, state.time));
            let fd: Vec<f64> = rp
                .iter()
                .zip(&rm)
                .map(|(a, b)| -(a - b) / (2.0 * h))
                .collect();
            let jac = pr.newton_blocks(&step, &state).unwrap();
            assert!(!jac.unbounded_derivative);
            let jd = jac.matrix.mul_vec(&dir);
            let err: f64 = jd
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err <= 1e-5 * scale, "{err} vs {scale}");
        }
    }

    #[test]
    fn saturated_pressure_block_and_elasticity_block() {
        let mut sc = Scenario::test_one(1.0);
        sc.params.law.inv_n = 0.5;
        let mesh = RectMesh::new(3, 3, 1.0, 1.0, 1.0 / 3.0).unwrap();
        let pr = Problem::new(&mesh, sc.params, 2.0).unwrap();
        let step = pr.step_data(pr.initial_state()).unwrap();
        let jac = pr.newton_blocks(&step, pr.initial_state()).unwrap();
        let area = mesh.cell_area();
        for c in 0..pr.ops.n_p() {
            assert!((jac.matrix.get(c, c) - 0.5 * area).abs() < 1e-15);
        }
        let off = pr.ops.n_p() + pr.ops.n_q();
        for (i, j, v) in pr.ops.a_uu.triplets() {
            assert_eq!(jac.matrix.get(off + i, off + j), v);
        }
    }
}
