use super::linalg::{LinearSystem, SparseMatrix, SpdFactor};
use super::mesh::{EdgeNormal, RectMesh};
use crate::error::{Error, Result};

const GAUSS_01: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Bilinear shape functions on the unit square, counter-clockwise from (0,0).
fn q1_shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

/// Reference gradients `[d/dxi, d/deta]` of the bilinear shape functions.
fn q1_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [eta, xi],
        [-eta, 1.0 - xi],
    ]
}

/// Assembled finite element operators on a rectangular mesh.
///
/// Pressure is P0, flux RT0 (one normal-component dof per edge, oriented
/// along +x or +y), displacement Q1 with dofs `2 * node + component`.
/// Displacement rollers are imposed on left/right (`u_x = 0`) and bottom
/// (`u_y = 0`) by symmetric elimination; constrained dofs keep the value 0.
#[derive(Debug)]
pub struct DiscreteOperators {
    pub mesh: RectMesh,
    pub mu: f64,
    pub lambda: f64,
    /// Diagonal of the P0 mass matrix (cell areas).
    pub m_p: Vec<f64>,
    /// RT0 mass matrix with unit weight.
    pub m_q: SparseMatrix,
    /// Q1 vector mass matrix (used for L2 norms of displacements).
    pub m_u: SparseMatrix,
    /// `D_pq[c, e] = integral over c of div psi_e`.
    pub d_pq: SparseMatrix,
    /// `D_pu[c, k] = integral over c of div phi_k`, constrained columns zeroed.
    pub d_pu: SparseMatrix,
    /// Elasticity stiffness after Dirichlet elimination.
    pub a_uu: SparseMatrix,
    /// Elasticity stiffness before elimination.
    pub a_uu_unconstrained: SparseMatrix,
    /// Displacement dofs carrying a homogeneous Dirichlet condition.
    pub u_fixed: Vec<bool>,
    /// Flux dofs on the boundary, where the normal flux is prescribed.
    pub q_fixed: Vec<bool>,
    /// `integral of psi_e . n_e`, the load of a unit body force along the dof normal.
    pub flux_load: Vec<f64>,
    /// `integral of N_a` for each node.
    pub node_load: Vec<f64>,
    flux_mass_parts: Vec<(usize, usize, f64)>,
    a_factor: SpdFactor,
}

impl DiscreteOperators {
    pub fn n_p(&self) -> usize {
        self.mesh.n_cells()
    }

    pub fn n_q(&self) -> usize {
        self.mesh.n_edges()
    }

    pub fn n_u(&self) -> usize {
        2 * self.mesh.n_nodes()
    }

    /// RT0 mass matrix with a piecewise-constant weight per cell.
    pub fn weighted_flux_mass(&self, weights: &[f64]) -> SparseMatrix {
        assert_eq!(weights.len(), self.n_p());
        let mut m = self.m_q.clone();
        let vals = m.values_mut();
        vals.iter_mut().for_each(|v| *v = 0.0);
        for &(k, c, coeff) in &self.flux_mass_parts {
            vals[k] += weights[c] * coeff;
        }
        m
    }

    /// Action of the unit-weight local RT0 mass of cell `c` on `q`, as
    /// contributions to the cell's edges `[left, right, bottom, top]`.
    pub fn local_flux_mass_action(&self, c: usize, q: &[f64]) -> ([usize; 4], [f64; 4]) {
        let edges = self.mesh.cell_edges(c);
        let a = self.mesh.cell_area();
        let [l, r, b, t] = edges.map(|e| q[e]);
        (
            edges,
            [
                a * (l / 3.0 + r / 6.0),
                a * (l / 6.0 + r / 3.0),
                a * (b / 3.0 + t / 6.0),
                a * (b / 6.0 + t / 3.0),
            ],
        )
    }

    /// Solves `A_uu x = rhs` with the cached factorization.
    pub fn solve_elasticity(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.a_factor.solve(rhs)
    }

    /// Cellwise divergence integral `D_pu u`.
    pub fn div_u(&self, u: &[f64]) -> Vec<f64> {
        self.d_pu.mul_vec(u)
    }

    pub fn norm_p(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.m_p)
            .map(|(v, m)| m * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm_q(&self, q: &[f64]) -> f64 {
        self.m_q.bilinear(q, q).max(0.0).sqrt()
    }

    pub fn norm_u(&self, u: &[f64]) -> f64 {
        self.m_u.bilinear(u, u).max(0.0).sqrt()
    }
}

/// Assembles all operators with Lamé parameters `mu`, `lambda`.
pub fn assemble(mesh: &RectMesh, mu: f64, lambda: f64) -> Result<DiscreteOperators> {
    if !(mu > 0.0 && mu.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "Lamé parameters must satisfy mu > 0, lambda >= 0 (got {mu}, {lambda})"
        )));
    }
    let np = mesh.n_cells();
    let nq = mesh.n_edges();
    let nu = 2 * mesh.n_nodes();
    let hx = mesh.hx();
    let hy = mesh.hy();
    let area = mesh.cell_area();

    let m_p = vec![area; np];

    // RT0 mass and divergence
    let mut mq_t = Vec::with_capacity(8 * np);
    let mut mq_cells = Vec::with_capacity(8 * np);
    let mut dpq_t = Vec::with_capacity(4 * np);
    let mut flux_load = vec![0.0; nq];
    for c in 0..np {
        let [l, r, b, t] = mesh.cell_edges(c);
        for (lo, hi) in [(l, r), (b, t)] {
            for (i, j, v) in [
                (lo, lo, area / 3.0),
                (hi, hi, area / 3.0),
                (lo, hi, area / 6.0),
                (hi, lo, area / 6.0),
            ] {
                mq_t.push((i, j, v));
                mq_cells.push((i, j, c, v));
            }
            flux_load[lo] += 0.5 * area;
            flux_load[hi] += 0.5 * area;
        }
        dpq_t.push((c, l, -mesh.edge_length(l)));
        dpq_t.push((c, r, mesh.edge_length(r)));
        dpq_t.push((c, b, -mesh.edge_length(b)));
        dpq_t.push((c, t, mesh.edge_length(t)));
    }
    let m_q = SparseMatrix::from_triplets(nq, nq, &mq_t);
    let flux_mass_parts = mq_cells
        .into_iter()
        .map(|(i, j, c, v)| (m_q.position(i, j).expect("pattern entry"), c, v))
        .collect();
    let d_pq = SparseMatrix::from_triplets(np, nq, &dpq_t);

    // Q1 elasticity, mass and divergence with 2x2 Gauss
    let mut a_t = Vec::with_capacity(64 * np);
    let mut mu_t = Vec::with_capacity(32 * np);
    let mut dpu_t = Vec::with_capacity(8 * np);
    let mut node_load = vec![0.0; mesh.n_nodes()];
    for c in 0..np {
        let nodes = mesh.cell_nodes(c);
        let dofs: [usize; 8] = std::array::from_fn(|k| 2 * nodes[k / 2] + k % 2);
        let mut ke = [[0.0; 8]; 8];
        let mut me = [[0.0; 4]; 4];
        let mut de = [0.0; 8];
        for &xi in &GAUSS_01 {
            for &eta in &GAUSS_01 {
                let w = 0.25 * area;
                let n = q1_shape(xi, eta);
                let g = q1_grad(xi, eta).map(|[a, b]| [a / hx, b / hy]);
                for a in 0..4 {
                    node_load[nodes[a]] += w * n[a];
                    for b in 0..4 {
                        me[a][b] += w * n[a] * n[b];
                    }
                    for k in 0..2 {
                        de[2 * a + k] += w * g[a][k];
                        for b in 0..4 {
                            for l in 0..2 {
                                let grad_dot = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                                let delta = if k == l { grad_dot } else { 0.0 };
                                ke[2 * a + k][2 * b + l] += w
                                    * (mu * (delta + g[a][l] * g[b][k])
                                        + lambda * g[a][k] * g[b][l]);
                            }
                        }
                    }
                }
            }
        }
        for i in 0..8 {
            dpu_t.push((c, dofs[i], de[i]));
            for j in 0..8 {
                a_t.push((dofs[i], dofs[j], ke[i][j]));
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                for k in 0..2 {
                    mu_t.push((2 * nodes[a] + k, 2 * nodes[b] + k, me[a][b]));
                }
            }
        }
    }

    let mut u_fixed = vec![false; nu];
    for n in 0..mesh.n_nodes() {
        let [x, y] = mesh.node_coords(n);
        if x.abs() < 1e-12 * mesh.lx || (x - mesh.lx).abs() < 1e-12 * mesh.lx {
            u_fixed[2 * n] = true;
        }
        if y.abs() < 1e-12 * mesh.ly {
            u_fixed[2 * n + 1] = true;
        }
    }
    let a_uu_unconstrained = SparseMatrix::from_triplets(nu, nu, &a_t);
    let mut elim: Vec<_> = a_t
        .into_iter()
        .filter(|&(i, j, _)| !u_fixed[i] && !u_fixed[j])
        .collect();
    elim.extend((0..nu).filter(|&i| u_fixed[i]).map(|i| (i, i, 1.0)));
    let a_uu = SparseMatrix::from_triplets(nu, nu, &elim);
    dpu_t.retain(|&(_, k, _)| !u_fixed[k]);
    let d_pu = SparseMatrix::from_triplets(np, nu, &dpu_t);
    let m_u = SparseMatrix::from_triplets(nu, nu, &mu_t);

    let a_factor = SpdFactor::new(&LinearSystem::spd(a_uu.clone())?).map_err(|e| {
        Error::Assembly(format!(
            "elasticity matrix is singular after elimination: {e}"
        ))
    })?;

    let q_fixed = mesh.edge_tags().iter().map(|t| t.is_boundary()).collect();

    Ok(DiscreteOperators {
        mesh: mesh.clone(),
        mu,
        lambda,
        m_p,
        m_q,
        m_u,
        d_pq,
        d_pu,
        a_uu,
        a_uu_unconstrained,
        u_fixed,
        q_fixed,
        flux_load,
        node_load,
        flux_mass_parts,
        a_factor,
    })
}

/// RT0 interpolant of a vector field: normal component at each edge midpoint.
pub fn rt0_interpolate(mesh: &RectMesh, field: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    (0..mesh.n_edges())
        .map(|e| {
            let v = field(mesh.edge_midpoint(e));
            match mesh.edge_normal(e) {
                EdgeNormal::X => v[0],
                EdgeNormal::Y => v[1],
            }
        })
        .collect()
}

/// Q1 nodal interpolant of a vector field.
pub fn q1_interpolate(mesh: &RectMesh, field: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let mut u = vec![0.0; 2 * mesh.n_nodes()];
    for n in 0..mesh.n_nodes() {
        let v = field(mesh.node_coords(n));
        u[2 * n] = v[0];
        u[2 * n + 1] = v[1];
    }
    u
}
