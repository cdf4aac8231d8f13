//! Anderson acceleration of fixed-point iterations, windowed AA(m) and
//! restarted AA*(m).

use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

pub const DEFAULT_COND_CAP: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AndersonMode {
    /// Keep the latest `m + 1` iterates.
    Windowed,
    /// Flush the window once it holds `m + 1` iterates.
    Restarted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AndersonConfig {
    pub depth: usize,
    pub mode: AndersonMode,
    pub cond_cap: f64,
}

impl AndersonConfig {
    pub fn windowed(depth: usize) -> Self {
        AndersonConfig {
            depth,
            mode: AndersonMode::Windowed,
            cond_cap: DEFAULT_COND_CAP,
        }
    }

    pub fn restarted(depth: usize) -> Self {
        AndersonConfig {
            mode: AndersonMode::Restarted,
            ..Self::windowed(depth)
        }
    }

    /// AA(0), the plain iteration.
    pub fn none() -> Self {
        Self::windowed(0)
    }
}

impl Default for AndersonConfig {
    fn default() -> Self {
        Self::none()
    }
}

/// Affine weights with `sum = 1`, oldest column first.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingWeights {
    pub alpha: Vec<f64>,
    /// The least squares problem was too ill-conditioned and the plain step
    /// `(0, ..., 0, 1)` was used instead.
    pub fallback: bool,
}

fn plain_step(k: usize) -> MixingWeights {
    let mut alpha = vec![0.0; k];
    alpha[k - 1] = 1.0;
    MixingWeights {
        alpha,
        fallback: true,
    }
}

/// Minimizes `|F alpha|_2` subject to `sum alpha = 1`.
///
/// With `f_last` the newest column this is the unconstrained problem
/// `min |f_last + sum_j gamma_j (f_j - f_last)|`, solved by QR; then
/// `alpha_j = gamma_j` and `alpha_last = 1 - sum gamma`.
pub fn mixing_weights(columns: &[Vec<f64>], cond_cap: f64) -> MixingWeights {
    let k = columns.len();
    assert!(k >= 1, "need at least one column");
    if k == 1 {
        return MixingWeights {
            alpha: vec![1.0],
            fallback: false,
        };
    }
    let n = columns[0].len();
    let last = &columns[k - 1];
    let g = DMatrix::from_fn(n, k - 1, |i, j| columns[j][i] - last[i]);
    if n < k - 1 || g.iter().any(|v| !v.is_finite()) {
        return plain_step(k);
    }
    let qr = g.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) || smax / smin > cond_cap {
        return plain_step(k);
    }
    let qtf = qr.q().transpose() * DVector::from_column_slice(last);
    let gamma = match r.solve_upper_triangular(&(-qtf)) {
        Some(g) => g,
        None => return plain_step(k),
    };
    let mut alpha: Vec<f64> = gamma.iter().copied().collect();
    alpha.push(1.0 - gamma.sum());
    MixingWeights {
        alpha,
        fallback: false,
    }
}

/// Result of one accelerated step.
#[derive(Debug, Clone, PartialEq)]
pub struct AndersonStep {
    pub next: Vec<f64>,
    pub weights: Vec<f64>,
    pub fallback: bool,
}

/// Stored images `F(x)` and increments `F(x) - x` of recent iterates.
#[derive(Debug, Clone)]
pub struct AndersonWindow {
    config: AndersonConfig,
    images: VecDeque<Vec<f64>>,
    increments: VecDeque<Vec<f64>>,
    /// Scaling applied to increments before the least squares solve.
    norm_weights: Option<Vec<f64>>,
    pub fallbacks: usize,
}

impl AndersonWindow {
    pub fn new(config: AndersonConfig) -> Self {
        AndersonWindow {
            config,
            images: VecDeque::new(),
            increments: VecDeque::new(),
            norm_weights: None,
            fallbacks: 0,
        }
    }

    /// Measures increments in the weighted norm `|w * f|_2`.
    pub fn with_norm_weights(config: AndersonConfig, weights: Vec<f64>) -> Self {
        AndersonWindow {
            norm_weights: Some(weights),
            ..Self::new(config)
        }
    }

    pub fn config(&self) -> &AndersonConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn clear(&mut self) {
        self.images.clear();
        self.increments.clear();
    }

    /// Records `F(x^{i-1})` and its increment and returns the next iterate.
    pub fn aa_step(&mut self, image: Vec<f64>, increment: Vec<f64>) -> AndersonStep {
        let m = self.config.depth;
        if m == 0 {
            return AndersonStep {
                next: image,
                weights: vec![1.0],
                fallback: false,
            };
        }
        assert_eq!(image.len(), increment.len());
        match self.config.mode {
            AndersonMode::Windowed => {
                if self.images.len() == m + 1 {
                    self.images.pop_front();
                    self.increments.pop_front();
                }
            }
            AndersonMode::Restarted => {
                if self.images.len() == m + 1 {
                    self.clear();
                }
            }
        }
        let scaled = match &self.norm_weights {
            Some(w) => increment.iter().zip(w).map(|(f, w)| f * w).collect(),
            None => increment,
        };
        self.images.push_back(image);
        self.increments.push_back(scaled);
        let cols: Vec<Vec<f64>> = self.increments.iter().cloned().collect();
        let w = mixing_weights(&cols, self.config.cond_cap);
        if w.fallback {
            self.fallbacks += 1;
        }
        let n = self.images[0].len();
        let mut next = vec![0.0; n];
        for (a, img) in w.alpha.iter().zip(&self.images) {
            for (x, v) in next.iter_mut().zip(img) {
                *x += a * v;
            }
        }
        AndersonStep {
            next,
            weights: w.alpha,
            fallback: w.fallback,
        }
    }
}

/// Runs `x <- F(x)` with Anderson acceleration, for `iters` steps.
/// Returns all iterates including `x0`.
pub fn accelerate<F>(mut f: F, x0: Vec<f64>, config: AndersonConfig, iters: usize) -> Vec<Vec<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut window = AndersonWindow::new(config);
    let mut xs = vec![x0];
    for _ in 0..iters {
        let x = xs.last().unwrap();
        let fx = f(x);
        let inc = fx.iter().zip(x).map(|(a, b)| a - b).collect();
        xs.push(window.aa_step(fx, inc).next);
    }
    xs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Constrained least squares through the KKT system
    /// `[[2 F^T F, 1], [1^T, 0]] [alpha; mu] = [0; 1]`.
    fn kkt_oracle(cols: &[Vec<f64>]) -> Vec<f64> {
        let k = cols.len();
        let mut a = DMatrix::zeros(k + 1, k + 1);
        for i in 0..k {
            for j in 0..k {
                a[(i, j)] = 2.0
                    * cols[i]
                        .iter()
                        .zip(&cols[j])
                        .map(|(x, y)| x * y)
                        .sum::<f64>();
            }
            a[(i, k)] = 1.0;
            a[(k, i)] = 1.0;
        }
        let mut b = DVector::zeros(k + 1);
        b[k] = 1.0;
        let x = a.lu().solve(&b).unwrap();
        x.rows(0, k).iter().copied().collect()
    }

    #[test]
    fn trivial_weights() {
        assert_eq!(mixing_weights(&[vec![3.0, 4.0]], 1e10).alpha, vec![1.0]);
        let w = mixing_weights(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1e10);
        assert!((w.alpha[0] - 0.5).abs() < 1e-15 && (w.alpha[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weights_match_kkt() {
        let cols = vec![vec![1.0, 0.0], vec![0.9, 0.1]];
        let w = mixing_weights(&cols, 1e10);
        let o = kkt_oracle(&cols);
        for (a, b) in w.alpha.iter().zip(&o) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn rank_deficiency_falls_back() {
        let w = mixing_weights(&[vec![1.0, 2.0], vec![1.0, 2.0]], 1e10);
        assert!(w.fallback);
        assert_eq!(w.alpha, vec![0.0, 1.0]);
    }

    #[test]
    fn depth_zero_is_identity() {
        let mut win = AndersonWindow::new(AndersonConfig::none());
        let img = vec![0.1, f64::MIN_POSITIVE, -3.0];
        let out = win.aa_step(img.clone(), vec![1.0, 2.0, 3.0]);
        assert_eq!(out.next, img);
        assert!(win.is_empty());
    }

    #[test]
    fn restarted_depth_sequence() {
        let mut win = AndersonWindow::new(AndersonConfig::restarted(1));
        let mut seq = vec![];
        for i in 0..6 {
            let v = vec![i as f64, (i * i) as f64 + 1.0];
            win.aa_step(v.clone(), v);
            seq.push(win.len() - 1);
        }
        assert_eq!(seq, vec![0, 1, 0, 1, 0, 1]);
        let mut win = AndersonWindow::new(AndersonConfig::windowed(2));
        let mut seq = vec![];
        for i in 0..5 {
            let v = vec![i as f64, (i * i) as f64 + 1.0, 1.0 / (i as f64 + 1.0)];
            win.aa_step(v.clone(), v);
            seq.push(win.len() - 1);
        }
        assert_eq!(seq, vec![0, 1, 2, 2, 2]);
    }

    #[test]
    fn linear_problems_beat_plain_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        for _ in 0..100 {
            // symmetric contraction G = Q diag(l) Q^T
            let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
                .qr()
                .q();
            let l = DVector::from_fn(n, |_, _| rng.gen_range(0.0..0.95));
            let g = &q * DMatrix::from_diagonal(&l) * q.transpose();
            let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let f = |x: &[f64]| {
                (&g * DVector::from_column_slice(x) + &b)
                    .as_slice()
                    .to_vec()
            };
            let res = |x: &[f64]| {
                let fx = f(x);
                fx.iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            };
            let x0 = vec![0.0; n];
            let iters = n;
            let plain = accelerate(f, x0.clone(), AndersonConfig::none(), iters);
            let aa = accelerate(f, x0, AndersonConfig::windowed(n), iters);
            let rp = res(plain.last().unwrap());
            let ra = res(aa.last().unwrap());
            assert!(ra <= rp * (1.0 + 1e-8) + 1e-12, "{ra} vs {rp}");
        }
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(cols in proptest::collection::vec(
            proptest::collection::vec(-10.0f64..10.0, 6), 1..5)) {
            let w = mixing_weights(&cols, 1e10);
            let s: f64 = w.alpha.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-14 * w.alpha.iter().map(|a| a.abs()).sum::<f64>().max(1.0));
        }

        #[test]
        fn window_never_exceeds_depth(m in 0usize..5, steps in 1usize..20, restarted in any::<bool>()) {
            let cfg = if restarted { AndersonConfig::restarted(m) } else { AndersonConfig::windowed(m) };
            let mut win = AndersonWindow::new(cfg);
            for i in 0..steps {
                let v = vec![(i as f64).sin(), (i as f64).cos(), 0.5 * i as f64];
                win.aa_step(v.clone(), v);
                prop_assert!(win.len() <= m + 1);
            }
        }
    }
}
