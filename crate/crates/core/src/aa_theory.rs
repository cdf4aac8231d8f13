//! Restarted AA*(1) on symmetric linear Richardson iterations: the closed
//! form four-step contraction factor, the general error propagation
//! eigenvalues, trajectory experiments and the (lambda1, lambda2) plane.

use crate::anderson::{AndersonConfig, AndersonWindow};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

/// Four-step contraction factor
/// `r = l1^2 l2^2 (l2 - l1)^2 / (|l1 (l1 - 1)| + |l2 (l2 - 1)|)^2`.
pub fn contraction_factor(l1: f64, l2: f64) -> Result<f64> {
    if !l1.is_finite() || !l2.is_finite() {
        return Err(Error::InvalidInput(format!("eigenvalues ({l1}, {l2})")));
    }
    let den = (l1 * (l1 - 1.0)).abs() + (l2 * (l2 - 1.0)).abs();
    if den == 0.0 {
        return Err(Error::Singular(format!(
            "contraction factor undefined at ({l1}, {l2})"
        )));
    }
    let d = l2 - l1;
    Ok((l1 * l1 * l2 * l2 * d * d) / (den * den))
}

/// Eigenvalues of the four-step error propagation matrix of AA*(1) when the
/// normalized vector `(A - I)^2 e / |(A - I)^2 e|` has eigen-coordinates `betas`.
///
/// If the weighted sum in the denominator vanishes the accelerated step is
/// exact and all eigenvalues are reported as zero.
pub fn propagation_eigenvalues(lambdas: &[f64], betas: &[f64]) -> Result<Vec<f64>> {
    if lambdas.len() != betas.len() || lambdas.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} eigenvalues but {} weights",
            lambdas.len(),
            betas.len()
        )));
    }
    let norm: f64 = betas.iter().map(|b| b * b).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "squared weights sum to {norm}, expected 1"
        )));
    }
    for (l, b) in lambdas.iter().zip(betas) {
        if *l == 1.0 && *b != 0.0 {
            return Err(Error::Singular("eigenvalue 1 with nonzero weight".into()));
        }
    }
    let n = lambdas.len();
    // sum over k != j of beta_k^2 w_k (lambda_k - lambda_j) / (lambda_k - 1)
    let cross = |j: usize, w: &dyn Fn(usize) -> f64| -> f64 {
        (0..n)
            .filter(|&k| k != j && betas[k] != 0.0)
            .map(|k| betas[k] * betas[k] * w(k) * (lambdas[k] - lambdas[j]) / (lambdas[k] - 1.0))
            .sum()
    };
    let eta: Vec<f64> = (0..n).map(|j| cross(j, &|_| 1.0)).collect();
    let weight = |k: usize| lambdas[k] * lambdas[k] * eta[k] * eta[k];
    let den: f64 = (0..n).map(|k| betas[k] * betas[k] * weight(k)).sum();
    if den == 0.0 {
        return Ok(vec![0.0; n]);
    }
    Ok((0..n)
        .map(|j| lambdas[j] * lambdas[j] * eta[j] * cross(j, &weight) / den)
        .collect())
}

/// Two eigenvalues of a symmetric `A` and the coordinates of the initial
/// error in the corresponding eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPair {
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl SpectralPair {
    /// Initial error `v1 + v2`, normalized.
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        Self::with_weights(lambda1, lambda2, 1.0, 1.0)
    }

    /// Weights are rescaled so that `beta1^2 + beta2^2 = 1`.
    pub fn with_weights(lambda1: f64, lambda2: f64, beta1: f64, beta2: f64) -> Result<Self> {
        for l in [lambda1, lambda2] {
            if !l.is_finite() || l == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "eigenvalue {l} must be nonzero"
                )));
            }
            if l == 1.0 {
                return Err(Error::Singular("I - A is not invertible".into()));
            }
        }
        let norm = beta1.hypot(beta2);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("initial error must be nonzero".into()));
        }
        Ok(SpectralPair {
            lambda1,
            lambda2,
            beta1: beta1 / norm,
            beta2: beta2 / norm,
        })
    }

    pub fn contraction_factor(&self) -> Result<f64> {
        contraction_factor(self.lambda1, self.lambda2)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        vec![self.lambda1 * x[0], self.lambda2 * x[1]]
    }
}

/// Error histories of AA*(1) and plain Richardson, one entry per iterate.
#[derive(Debug, Clone)]
pub struct RichardsonHistory {
    pub aa_errors: Vec<f64>,
    pub plain_errors: Vec<f64>,
    /// Weight of the older image in each accelerated step, `x^{i+2} =
    /// F(x^{i+1}) + alpha (F(x^i) - F(x^{i+1}))`.
    pub alphas: Vec<f64>,
    /// `e_hat . A (A - I)^{-1} e_hat` with `e_hat` the normalized
    /// `(A - I)^2 e^i`, evaluated on the AA*(1) iterate before each pair.
    pub predicted_alphas: Vec<f64>,
}

fn four_step_ratios(errors: &[f64]) -> Vec<f64> {
    errors
        .chunks(4)
        .zip(errors.iter().skip(4).step_by(4))
        .map(|(block, next)| next / block[0])
        .collect()
}

impl RichardsonHistory {
    /// `|e^{i+4}| / |e^i|` for `i = 0, 4, 8, ...`.
    pub fn aa_block_ratios(&self) -> Vec<f64> {
        four_step_ratios(&self.aa_errors)
    }

    pub fn plain_block_ratios(&self) -> Vec<f64> {
        four_step_ratios(&self.plain_errors)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Runs `4 n_quads` iterations of AA*(1) and of plain Richardson on
/// `F(x) = A x` with `A = diag(lambda1, lambda2)`, so that `x* = 0` and the
/// iterate is the error.
pub fn richardson_aa_experiment(pair: &SpectralPair, n_quads: usize) -> RichardsonHistory {
    let iters = 4 * n_quads;
    let x0 = vec![pair.beta1, pair.beta2];
    let (l1, l2) = (pair.lambda1, pair.lambda2);

    let mut plain = vec![norm(&x0)];
    let mut x = x0.clone();
    for _ in 0..iters {
        x = pair.apply(&x);
        plain.push(norm(&x));
    }

    let mut window = AndersonWindow::new(AndersonConfig::restarted(1));
    let mut aa = vec![norm(&x0)];
    let mut alphas = Vec::new();
    let mut predicted = Vec::new();
    let mut x = x0;
    for i in 0..iters {
        if i % 2 == 0 {
            let w = [(l1 - 1.0).powi(2) * x[0], (l2 - 1.0).powi(2) * x[1]];
            let nw = norm(&w);
            if nw > 0.0 {
                let e = [w[0] / nw, w[1] / nw];
                predicted.push(e[0] * e[0] * l1 / (l1 - 1.0) + e[1] * e[1] * l2 / (l2 - 1.0));
            }
        }
        let fx = pair.apply(&x);
        let inc: Vec<f64> = fx.iter().zip(&x).map(|(a, b)| a - b).collect();
        let step = window.aa_step(fx, inc);
        if step.weights.len() == 2 && !step.fallback {
            alphas.push(step.weights[0]);
        }
        x = step.next;
        aa.push(norm(&x));
    }
    RichardsonHistory {
        aa_errors: aa,
        plain_errors: plain,
        alphas,
        predicted_alphas: predicted,
    }
}

/// Rectangle `[l1_min, l1_max] x [l2_min, l2_max]` of the eigenvalue plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneRect {
    pub l1: (f64, f64),
    pub l2: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint {
    pub lambda1: f64,
    pub lambda2: f64,
    pub r: f64,
    /// `r < max(|lambda1|, |lambda2|)^4`.
    pub accelerates: bool,
    /// `r < 1`.
    pub converges: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSample {
    pub rect: PlaneRect,
    pub resolution: usize,
    /// Row-major in `lambda1`, then `lambda2`.
    pub points: Vec<PlanePoint>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

/// Evaluates `r` on a `resolution x resolution` grid including the corners.
/// Points on the axes or at `(1, 1)` are omitted.
pub fn sample_planes(rect: PlaneRect, resolution: usize) -> Result<PlaneSample> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!(
            "resolution {resolution} must be at least 2"
        )));
    }
    let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
    if !ok(rect.l1) || !ok(rect.l2) {
        return Err(Error::InvalidInput(format!("bad rectangle {rect:?}")));
    }
    let l1s: Vec<f64> = linspace(rect.l1.0, rect.l1.1, resolution).collect();
    let points = l1s
        .par_iter()
        .flat_map_iter(|&l1| {
            linspace(rect.l2.0, rect.l2.1, resolution).filter_map(move |l2| {
                if l1 == 0.0 || l2 == 0.0 {
                    return None;
                }
                let r = contraction_factor(l1, l2).ok()?;
                let rho4 = l1.abs().max(l2.abs()).powi(4);
                Some(PlanePoint {
                    lambda1: l1,
                    lambda2: l2,
                    r,
                    accelerates: r < rho4,
                    converges: r < 1.0,
                })
            })
        })
        .collect();
    Ok(PlaneSample {
        rect,
        resolution,
        points,
    })
}

impl PlaneSample {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lambda1,lambda2,r,accel_flag,conv_flag")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{:e},{},{}",
                p.lambda1, p.lambda2, p.r, p.accelerates as u8, p.converges as u8
            )?;
        }
        Ok(())
    }
}

/// Random search for unit weights making some propagation eigenvalue exceed
/// one in magnitude. Returns the weights and the eigenvalues.
pub fn search_amplifying_weights(
    lambdas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let mut b: Vec<f64> = lambdas.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&b);
        if n == 0.0 {
            continue;
        }
        b.iter_mut().for_each(|v| *v /= n);
        let eig = propagation_eigenvalues(lambdas, &b)?;
        if eig.iter().any(|v| v.abs() > 1.0) {
            return Ok(Some((b, eig)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_eigen(l1: f64, l2: f64, gamma: f64) -> f64 {
        propagation_eigenvalues(&[l1, l2], &[gamma.sqrt(), (1.0 - gamma).sqrt()]).unwrap()[0]
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(contraction_factor(0.5, 0.5).unwrap(), 0.0);
        for l2 in [0.1, 0.37, 0.5, 0.99] {
            assert!((contraction_factor(1.0, l2).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!((contraction_factor(1.5, 0.5).unwrap() - 0.5625).abs() < 1e-15);
        assert!(matches!(
            contraction_factor(0.0, 1.0),
            Err(Error::Singular(_))
        ));
        assert!(matches!(
            contraction_factor(1.0, 1.0),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn propagation_boundary_weights_vanish() {
        for (l1, l2) in [(0.9, 0.3), (-0.4, 0.7), (1.5, 0.5)] {
            let e = propagation_eigenvalues(&[l1, l2], &[1.0, 0.0]).unwrap();
            assert_eq!(e[0], 0.0);
            let e = propagation_eigenvalues(&[l1, l2], &[0.0, 1.0]).unwrap();
            assert_eq!(e[0], 0.0);
        }
        assert!(matches!(
            propagation_eigenvalues(&[1.0, 0.5], &[0.6, 0.8]),
            Err(Error::Singular(_))
        ));
        assert!(propagation_eigenvalues(&[0.2, 0.5], &[0.6, 0.6]).is_err());
    }

    #[test]
    fn worst_weight_attains_closed_form() {
        let (l1, l2) = (0.9, 0.3);
        // scan, then refine by golden section
        let n = 4000;
        let (mut best, mut gb) = (0.0f64, 0.0);
        for k in 0..=n {
            let g = k as f64 / n as f64;
            let v = two_eigen(l1, l2, g).abs();
            if v > best {
                best = v;
                gb = g;
            }
        }
        let (mut a, mut b) = (
            (gb - 1.0 / n as f64).max(0.0),
            (gb + 1.0 / n as f64).min(1.0),
        );
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if two_eigen(l1, l2, c).abs() > two_eigen(l1, l2, d).abs() {
                b = d;
            } else {
                a = c;
            }
        }
        let max = two_eigen(l1, l2, 0.5 * (a + b)).abs();
        let r = contraction_factor(l1, l2).unwrap();
        assert!((max - r).abs() < 1e-10, "{max} vs {r}");
    }

    #[test]
    fn three_eigenvalues_can_amplify() {
        let found = search_amplifying_weights(&[0.9, -0.9, 0.5], 20000, 3).unwrap();
        let (b, eig) = found.expect("no amplifying weights found");
        assert!((norm(&b) - 1.0).abs() < 1e-12);
        assert!(eig.iter().any(|v| v.abs() > 1.0));
    }

    #[test]
    fn plain_richardson_ratio_is_dominant_power() {
        let pair = SpectralPair::new(0.5, 0.9).unwrap();
        let h = richardson_aa_experiment(&pair, 5);
        let tail = *h.plain_block_ratios().last().unwrap();
        assert!((tail - 0.6561).abs() < 1e-3);
    }

    #[test]
    fn aa_star_respects_four_step_bound() {
        let pair = SpectralPair::new(0.5, 0.9).unwrap();
        let r = pair.contraction_factor().unwrap();
        assert!((r - 0.28028).abs() < 1e-4);
        let h = richardson_aa_experiment(&pair, 10);
        for q in h.aa_block_ratios() {
            assert!(q <= r * (1.0 + 1e-8), "{q} > {r}");
        }
    }

    #[test]
    fn aa_star_weights_match_explicit_formula() {
        let pair = SpectralPair::with_weights(-0.7, 0.4, 0.3, 1.0).unwrap();
        let h = richardson_aa_experiment(&pair, 6);
        assert!(!h.alphas.is_empty());
        for (a, p) in h.alphas.iter().zip(&h.predicted_alphas) {
            assert!((a - p).abs() <= 1e-10 * p.abs().max(1.0), "{a} vs {p}");
        }
    }

    #[test]
    fn equal_eigenvalues_finish_in_one_block() {
        let pair = SpectralPair::with_weights(0.6, 0.6, 0.8, 0.6).unwrap();
        let h = richardson_aa_experiment(&pair, 2);
        assert!(h.aa_errors[4] <= 1e-15);
    }

    #[test]
    fn non_contractive_pair_is_rescued() {
        let pair = SpectralPair::new(1.5, 0.5).unwrap();
        let h = richardson_aa_experiment(&pair, 15);
        assert!(h.plain_errors.windows(2).all(|w| w[1] > w[0]));
        assert!(h.aa_errors.last().unwrap() < &1e-3);
    }

    #[test]
    fn plane_flags_and_symmetry() {
        let rect = PlaneRect {
            l1: (-0.99, 0.99),
            l2: (-0.99, 0.99),
        };
        let s = sample_planes(rect, 51).unwrap();
        for p in &s.points {
            assert!(p.r >= 0.0 && p.converges);
            if (p.lambda1 + p.lambda2).abs() < 1e-12 {
                // r(l, -l) = l^4 exactly
                assert!((p.r - p.lambda1.powi(4)).abs() < 1e-15);
            } else {
                assert!(p.accelerates, "{p:?}");
            }
        }
        for p in &s.points {
            let q = contraction_factor(p.lambda2, p.lambda1).unwrap();
            assert!((p.r - q).abs() <= 1e-14);
        }
        let s = sample_planes(
            PlaneRect {
                l1: (1.01, 2.99),
                l2: (0.01, 0.99),
            },
            40,
        )
        .unwrap();
        assert!(s.points.iter().all(|p| p.converges));
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 40 * 40);
        assert!(sample_planes(rect, 1).is_err());
    }
}
