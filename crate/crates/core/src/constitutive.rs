//! Van Genuchten–Mualem retention and mobility laws, the equivalent pore
//! pressure, and the linear porosity law.
//!
//! Every map here is a pointwise scalar function. Derivative evaluations are
//! counted per thread so that callers can prove a scheme is derivative-free
//! (see [`derivative_counts`]).

use std::cell::Cell;

use crate::error::{Error, Result};

/// Default cap on the magnitude of mobility derivatives.
pub const DEFAULT_DERIVATIVE_CAP: f64 = 1e12;

/// Relative tolerance for the equivalent pore pressure quadrature.
const QUAD_RTOL: f64 = 1e-10;
const QUAD_MAX_PARTS: usize = 2000;

thread_local! {
    static SATURATION_DERIVATIVE_CALLS: Cell<u64> = const { Cell::new(0) };
    static MOBILITY_DERIVATIVE_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of constitutive derivative evaluations performed on this thread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DerivativeCounts {
    pub saturation: u64,
    pub mobility: u64,
}

impl DerivativeCounts {
    pub fn total(&self) -> u64 {
        self.saturation + self.mobility
    }

    pub fn since(&self, earlier: DerivativeCounts) -> DerivativeCounts {
        DerivativeCounts {
            saturation: self.saturation - earlier.saturation,
            mobility: self.mobility - earlier.mobility,
        }
    }
}

/// Current per-thread derivative evaluation counters.
pub fn derivative_counts() -> DerivativeCounts {
    DerivativeCounts {
        saturation: SATURATION_DERIVATIVE_CALLS.with(Cell::get),
        mobility: MOBILITY_DERIVATIVE_CALLS.with(Cell::get),
    }
}

/// Resets the per-thread derivative evaluation counters.
pub fn reset_derivative_counts() {
    SATURATION_DERIVATIVE_CALLS.with(|c| c.set(0));
    MOBILITY_DERIVATIVE_CALLS.with(|c| c.set(0));
}

/// A derivative value, clamped to a finite range when it blows up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    /// Set when the magnitude exceeded the cap and `value` was clamped.
    pub unbounded: bool,
}

impl Derivative {
    fn capped(raw: f64, cap: f64) -> Self {
        if raw.is_nan() {
            // only reachable through 0 * inf at the saturated limit
            return Derivative {
                value: cap,
                unbounded: true,
            };
        }
        if raw.abs() > cap {
            Derivative {
                value: cap.copysign(raw),
                unbounded: true,
            }
        } else {
            Derivative {
                value: raw,
                unbounded: false,
            }
        }
    }
}

/// Van Genuchten–Mualem material model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanGenuchten {
    /// Inverse air-suction value (1/Pa).
    pub a_vg: f64,
    /// Pore-size distribution exponent, > 1.
    pub n_vg: f64,
    /// Intrinsic permeability (m^2).
    pub kappa: f64,
    /// Fluid viscosity (Pa s).
    pub mu_w: f64,
    /// Magnitude above which mobility derivatives are clamped and flagged.
    pub derivative_cap: f64,
}

impl VanGenuchten {
    pub fn new(a_vg: f64, n_vg: f64, kappa: f64, mu_w: f64) -> Result<Self> {
        let model = VanGenuchten {
            a_vg,
            n_vg,
            kappa,
            mu_w,
            derivative_cap: DEFAULT_DERIVATIVE_CAP,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_derivative_cap(mut self, cap: f64) -> Self {
        self.derivative_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.a_vg) {
            return Err(Error::InvalidInput(format!(
                "a_vG must be > 0, got {}",
                self.a_vg
            )));
        }
        if !(self.n_vg.is_finite() && self.n_vg > 1.0) {
            return Err(Error::InvalidInput(format!(
                "n_vG must be > 1, got {}",
                self.n_vg
            )));
        }
        if !ok(self.kappa) || !ok(self.mu_w) {
            return Err(Error::InvalidInput(
                "permeability and viscosity must be positive".into(),
            ));
        }
        if !(self.derivative_cap > 0.0) {
            return Err(Error::InvalidInput(
                "derivative cap must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Lipschitz-continuous laws with initial saturation 0.4 at p = -7.78 Pa.
    pub fn test_case_one() -> Self {
        VanGenuchten::new(0.1844, 3.0, 3e-2, 1.0).expect("valid parameters")
    }

    /// Same saturation Lipschitz constant, Hölder-continuous mobility;
    /// initial saturation 0.4 at p = -15.3 Pa.
    pub fn test_case_two() -> Self {
        VanGenuchten::new(0.627, 1.4, 3e-2, 1.0).expect("valid parameters")
    }

    /// Mualem exponent m = (n - 1) / n.
    #[inline]
    pub fn m(&self) -> f64 {
        (self.n_vg - 1.0) / self.n_vg
    }

    /// Saturated mobility kappa / mu_w.
    #[inline]
    pub fn saturated_mobility(&self) -> f64 {
        self.kappa / self.mu_w
    }

    pub fn saturation(&self, p: f64) -> Result<f64> {
        check_finite(p)?;
        Ok(self.sat(p))
    }

    #[inline]
    pub(crate) fn sat(&self, p: f64) -> f64 {
        if p >= 0.0 {
            return 1.0;
        }
        let x = -self.a_vg * p;
        (1.0 + x.powf(self.n_vg)).powf(-self.m())
    }

    /// ds/dp; zero on the saturated branch and at p = 0 (left limit).
    pub fn saturation_derivative(&self, p: f64) -> Result<f64> {
        check_finite(p)?;
        Ok(self.sat_prime(p))
    }

    #[inline]
    pub(crate) fn sat_prime(&self, p: f64) -> f64 {
        SATURATION_DERIVATIVE_CALLS.with(|c| c.set(c.get() + 1));
        if p >= 0.0 {
            return 0.0;
        }
        let n = self.n_vg;
        let x = -self.a_vg * p;
        (n - 1.0) * self.a_vg * x.powf(n - 1.0) * (1.0 + x.powf(n)).powf(-self.m() - 1.0)
    }

    /// Global Lipschitz constant of the saturation law, sup |ds/dp|.
    ///
    /// The maximiser satisfies x^n = (n - 1)/n with x = -a_vG p.
    pub fn saturation_lipschitz(&self) -> f64 {
        let n = self.n_vg;
        let xn: f64 = (n - 1.0) / n;
        let x = xn.powf(1.0 / n);
        (n - 1.0) * self.a_vg * x.powf(n - 1.0) * (1.0 + xn).powf(-self.m() - 1.0)
    }

    /// Mualem mobility k_w(s) = (kappa/mu) sqrt(s) (1 - (1 - s^{1/m})^m)^2.
    pub fn mobility(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidInput(format!(
                "saturation {s} outside [0, 1]"
            )));
        }
        Ok(self.mob(s))
    }

    #[inline]
    pub(crate) fn mob(&self, s: f64) -> f64 {
        let m = self.m();
        let b = 1.0 - (1.0 - s.powf(1.0 / m)).powf(m);
        self.saturated_mobility() * s.sqrt() * b * b
    }

    /// Mobility as a function of pressure, evaluated without round-off loss
    /// near saturation.
    #[inline]
    pub(crate) fn mob_of_p(&self, p: f64) -> f64 {
        if p >= 0.0 {
            return self.saturated_mobility();
        }
        let (s, y) = self.sat_and_gap(p);
        let b = 1.0 - y.powf(self.m());
        self.saturated_mobility() * s.sqrt() * b * b
    }

    /// Returns (s, 1 - s^{1/m}) for p < 0, the latter computed as
    /// x^n / (1 + x^n).
    #[inline]
    fn sat_and_gap(&self, p: f64) -> (f64, f64) {
        let x = -self.a_vg * p;
        let xn = x.powf(self.n_vg);
        ((1.0 + xn).powf(-self.m()), xn / (1.0 + xn))
    }

    /// d k_w(s_w(p)) / dp via the chain rule, clamped at `derivative_cap`.
    ///
    /// At p = 0 the left limit is used; for n_vG < 2 that limit is infinite
    /// and the clamped value is returned with the flag set.
    pub fn mobility_derivative_wrt_p(&self, p: f64) -> Result<Derivative> {
        check_finite(p)?;
        Ok(self.mob_prime(p))
    }

    pub(crate) fn mob_prime(&self, p: f64) -> Derivative {
        MOBILITY_DERIVATIVE_CALLS.with(|c| c.set(c.get() + 1));
        let cap = self.derivative_cap;
        if p > 0.0 {
            return Derivative {
                value: 0.0,
                unbounded: false,
            };
        }
        let n = self.n_vg;
        let m = self.m();
        if p == 0.0 {
            // left limit behaves like x^(n-2)
            let limit = if n > 2.0 {
                0.0
            } else if n == 2.0 {
                2.0 * self.saturated_mobility() * self.a_vg
            } else {
                f64::INFINITY
            };
            return Derivative::capped(limit, cap);
        }
        let x = -self.a_vg * p;
        let xn = x.powf(n);
        let s = (1.0 + xn).powf(-m);
        let y = xn / (1.0 + xn);
        let b = 1.0 - y.powf(m);
        let ds_dp = (n - 1.0) * self.a_vg * x.powf(n - 1.0) * (1.0 + xn).powf(-m - 1.0);
        // dB/ds * ds/dp with s^{1/m - 1} = (1 + x^n)^{m - 1}
        let db_dp = y.powf(m - 1.0) * (1.0 + xn).powf(m - 1.0) * ds_dp;
        let k0 = self.saturated_mobility();
        let raw = k0 * (b * b / (2.0 * s.sqrt()) * ds_dp + 2.0 * s.sqrt() * b * db_dp);
        Derivative::capped(raw, cap)
    }

    /// d (1/k_w(s_w(p))) / dp = -k_w' / k_w^2, clamped at `derivative_cap`.
    pub(crate) fn inverse_mobility_prime(&self, p: f64) -> Derivative {
        let dk = self.mob_prime(p);
        let k = self.mob_of_p(p);
        let raw = -dk.value / (k * k);
        let mut d = Derivative::capped(raw, self.derivative_cap);
        d.unbounded |= dk.unbounded;
        d
    }

    /// Capillary pressure p_c(s) = -s_w^{-1}(s) >= 0.
    pub fn capillary_pressure(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "saturation {s} outside (0, 1]"
            )));
        }
        if s == 1.0 {
            return Ok(0.0);
        }
        let x = (s.powf(-1.0 / self.m()) - 1.0).powf(1.0 / self.n_vg);
        Ok(x / self.a_vg)
    }

    /// Equivalent pore pressure p_E(p) = integral of s_w from 0 to p.
    pub fn equivalent_pore_pressure(&self, p: f64) -> Result<f64> {
        check_finite(p)?;
        if p >= 0.0 {
            return Ok(p);
        }
        let integral = adaptive_gauss_kronrod(|xi| self.sat(xi), p, 0.0, QUAD_RTOL)?;
        Ok(-integral)
    }

    pub(crate) fn pe(&self, p: f64) -> f64 {
        // the integrand is bounded and smooth away from 0, so failure here
        // would indicate a non-finite pressure that callers already reject
        self.equivalent_pore_pressure(p).unwrap_or(f64::NAN)
    }
}

fn check_finite(p: f64) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "pressure must be finite, got {p}"
        )))
    }
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature: the subinterval with the
/// largest error estimate is bisected until the total estimate meets `rtol`.
pub(crate) fn adaptive_gauss_kronrod(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rtol: f64,
) -> Result<f64> {
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Integration(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if err <= rtol * total.abs() || err < 1e-300 {
            return Ok(total);
        }
        if parts.len() >= QUAD_MAX_PARTS {
            return Err(Error::Integration(format!(
                "no convergence on [{a}, {b}] with {QUAD_MAX_PARTS} subintervals, error {err:e}"
            )));
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (vl, el) = gk15(&f, lo, mid);
        let (vr, er) = gk15(&f, mid, hi);
        parts.push((lo, mid, vl, el));
        parts.push((mid, hi, vr, er));
    }
}

/// Linear porosity law φ = φ0 + α Δ(∇·u) + (1/N) Δp_E.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PorosityLaw {
    pub phi0: f64,
    pub alpha: f64,
    pub inv_n: f64,
}

/// Porosity value together with its physical admissibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Porosity {
    pub value: f64,
    /// True when the value lies in [0, 1].
    pub admissible: bool,
}

impl PorosityLaw {
    pub fn new(phi0: f64, alpha: f64, inv_n: f64) -> Result<Self> {
        if !(phi0 > 0.0 && phi0 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "phi0 must lie in (0, 1), got {phi0}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        if !(inv_n >= 0.0 && inv_n.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "1/N must be >= 0, got {inv_n}"
            )));
        }
        Ok(PorosityLaw { phi0, alpha, inv_n })
    }

    /// Porosity for the given volumetric-strain and pore-pressure increments
    /// measured from the initial state.
    pub fn porosity(&self, div_u_increment: f64, pe_increment: f64) -> Porosity {
        let value = self.phi0 + self.alpha * div_u_increment + self.inv_n * pe_increment;
        Porosity {
            value,
            admissible: (0.0..=1.0).contains(&value),
        }
    }
}
