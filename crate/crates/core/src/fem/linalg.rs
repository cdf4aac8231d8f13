//! Compressed sparse matrices and direct solvers.
//!
//! Storage and products are local (CSR); factorizations go through `faer`.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

/// Relative residual every successful solve must reach.
pub const SOLVE_RTOL: f64 = 1e-12;
const REFINEMENT_STEPS: usize = 4;

/// Row-compressed sparse matrix with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_unstable_by_key(|&k| (entries[k].0, entries[k].1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = entries[k];
            assert!(
                r < nrows && c < ncols,
                "entry ({r}, {c}) outside {nrows} x {ncols}"
            );
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let entries: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &entries)
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let entries: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &entries)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Position of entry `(r, c)` in the value array.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (cols, _) = self.row(r);
        cols.binary_search(&c).ok().map(|k| self.indptr[r] + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `A^T x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v))
            .collect();
        SparseMatrix::from_triplets(self.ncols, self.nrows, &t)
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    pub fn from_dense(d: &DMatrix<f64>) -> Self {
        let mut entries = Vec::new();
        for c in 0..d.ncols() {
            for r in 0..d.nrows() {
                if d[(r, c)] != 0.0 {
                    entries.push((r, c, d[(r, c)]));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), &entries)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::Assembly(format!("sparse conversion failed: {e:?}")))
    }

    /// Largest relative asymmetry `|x^T A y - y^T A x|` over random probes.
    pub fn symmetry_defect(&self, rng: &mut impl Rng, probes: usize) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let x: Vec<f64> = (0..self.nrows).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..self.nrows).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = self.bilinear(&x, &y);
            let b = self.bilinear(&y, &x);
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
        }
        worst
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Structural tag of a linear system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Spd,
    Indefinite,
}

/// A square sparse system together with its structural tag.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub kind: MatrixKind,
}

impl LinearSystem {
    /// Tags a matrix as SPD after a randomized symmetry probe.
    pub fn spd(matrix: SparseMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidInput("SPD system must be square".into()));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let defect = matrix.symmetry_defect(&mut rng, 3);
        if defect > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "matrix tagged SPD is not symmetric (defect {defect:e})"
            )));
        }
        Ok(LinearSystem {
            matrix,
            kind: MatrixKind::Spd,
        })
    }

    pub fn indefinite(matrix: SparseMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidInput("system must be square".into()));
        }
        Ok(LinearSystem {
            matrix,
            kind: MatrixKind::Indefinite,
        })
    }
}

fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64], r: &mut [f64]) -> f64 {
    a.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(r)
    } else {
        norm2(r) / nb
    }
}

/// Normwise backward error `|b - Ax| / (|A| |x| + |b|)` in the max norm.
pub fn backward_error(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (q - p).abs())
        .fold(0.0, f64::max);
    let a_norm = (0..a.nrows())
        .map(|i| a.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let x_norm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let b_norm = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let denom = a_norm * x_norm + b_norm;
    if denom == 0.0 {
        r
    } else {
        r / denom
    }
}

/// Direct solve with iterative refinement up to [`SOLVE_RTOL`].
fn refine(a: &SparseMatrix, b: &[f64], mut apply: impl FnMut(&mut [f64])) -> (Vec<f64>, f64) {
    let mut x = b.to_vec();
    apply(&mut x);
    let mut r = vec![0.0; b.len()];
    let mut res = relative_residual(a, &x, b, &mut r);
    for _ in 0..REFINEMENT_STEPS {
        if !(res > SOLVE_RTOL) {
            break;
        }
        let mut dx = r.clone();
        apply(&mut dx);
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let mut rt = vec![0.0; b.len()];
        let res_t = relative_residual(a, &trial, b, &mut rt);
        if !(res_t < res) {
            break;
        }
        x = trial;
        r = rt;
        res = res_t;
    }
    (x, res)
}

fn check_rhs(system: &LinearSystem, rhs: &[f64]) -> Result<()> {
    if rhs.len() != system.matrix.nrows() {
        return Err(Error::InvalidInput(format!(
            "rhs length {} does not match system size {}",
            rhs.len(),
            system.matrix.nrows()
        )));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolver {
            reason: "non-finite right-hand side".into(),
            residual: f64::NAN,
        });
    }
    Ok(())
}

/// Reusable sparse Cholesky factorization of an SPD matrix.
pub struct SpdFactor {
    matrix: SparseMatrix,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdFactor")
            .field("n", &self.matrix.nrows())
            .finish()
    }
}

impl SpdFactor {
    pub fn new(system: &LinearSystem) -> Result<Self> {
        let a = system.matrix.to_faer()?;
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::LinearSolver {
                reason: format!("Cholesky factorization failed: {e:?}"),
                residual: f64::NAN,
            })?;
        Ok(SpdFactor {
            matrix: system.matrix.clone(),
            llt,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let (x, res) = refine(&self.matrix, rhs, |v| {
            self.llt
                .solve_in_place(MatMut::from_column_major_slice_mut(v, n, 1));
        });
        if res <= SOLVE_RTOL {
            return Ok(x);
        }
        let (x, res) = conjugate_gradient(&self.matrix, rhs, Some(x));
        if res <= SOLVE_RTOL {
            Ok(x)
        } else {
            Err(Error::LinearSolver {
                reason: "Cholesky and CG both missed the residual target".into(),
                residual: res,
            })
        }
    }
}

/// Solves an SPD system by sparse Cholesky, falling back to CG.
pub fn solve_spd(system: &LinearSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    if system.kind != MatrixKind::Spd {
        return Err(Error::InvalidInput(
            "solve_spd called on a non-SPD system".into(),
        ));
    }
    check_rhs(system, rhs)?;
    match SpdFactor::new(system) {
        Ok(f) => f.solve(rhs),
        Err(_) => {
            let (x, res) = conjugate_gradient(&system.matrix, rhs, None);
            if res <= SOLVE_RTOL {
                Ok(x)
            } else {
                Err(Error::LinearSolver {
                    reason: "Cholesky failed and CG did not converge".into(),
                    residual: res,
                })
            }
        }
    }
}

/// Solves a general square system by sparse LU with partial pivoting.
pub fn solve_indefinite(system: &LinearSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    check_rhs(system, rhs)?;
    let a = system.matrix.to_faer()?;
    // faer panics on an exactly zero pivot instead of returning an error
    let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| a.sp_lu()))
        .map_err(|_| Error::LinearSolver {
            reason: "LU factorization hit an exactly zero pivot".into(),
            residual: f64::NAN,
        })?
        .map_err(|e| Error::LinearSolver {
            reason: format!("LU factorization failed: {e:?}"),
            residual: f64::NAN,
        })?;
    let n = rhs.len();
    let (x, res) = refine(&system.matrix, rhs, |v| {
        lu.solve_in_place(MatMut::from_column_major_slice_mut(v, n, 1));
    });
    // badly scaled saddle systems can stall just above the relative residual
    // target while being solved to working precision
    if res <= SOLVE_RTOL || backward_error(&system.matrix, &x, rhs) <= SOLVE_RTOL {
        Ok(x)
    } else {
        Err(Error::LinearSolver {
            reason: "sparse LU is numerically singular".into(),
            residual: res,
        })
    }
}

/// Jacobi-preconditioned conjugate gradients. Returns the iterate and its
/// relative residual.
pub fn conjugate_gradient(a: &SparseMatrix, b: &[f64], x0: Option<Vec<f64>>) -> (Vec<f64>, f64) {
    let n = b.len();
    let nb = norm2(b);
    if nb == 0.0 {
        return (vec![0.0; n], 0.0);
    }
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    let mut res = relative_residual(a, &x, b, &mut r);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..(10 * n).max(100) {
        if res <= SOLVE_RTOL {
            break;
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        res = norm2(&r) / nb;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // report the true residual, not the recurrence
    let res = relative_residual(a, &x, b, &mut r);
    (x, res)
}
