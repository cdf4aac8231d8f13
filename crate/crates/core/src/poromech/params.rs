use crate::constitutive::{PorosityLaw, VanGenuchten};
use crate::error::{Error, Result};

/// Plane-strain Lamé parameters `(mu, lambda)` from Young's modulus and
/// Poisson's ratio.
pub fn lame_parameters(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if !(young > 0.0) || !(poisson > -1.0 && poisson < 0.5) {
        return Err(Error::InvalidInput(format!(
            "need E > 0 and -1 < nu < 0.5, got E = {young}, nu = {poisson}"
        )));
    }
    let mu = young / (2.0 * (1.0 + poisson));
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    Ok((mu, lambda))
}

/// Physical and time-stepping parameters of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsParams {
    pub vg: VanGenuchten,
    pub law: PorosityLaw,
    pub mu: f64,
    pub lambda: f64,
    pub rho_w: f64,
    pub rho_b: f64,
    pub gravity: [f64; 2],
    /// Maximal inflow rate (negative means injection).
    pub q_star: f64,
    pub tau: f64,
    pub final_time: f64,
}

/// Parameters plus the uniform initial pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub params: PhysicsParams,
    pub p0: f64,
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        self.vg.validate()?;
        PorosityLaw::new(self.law.phi0, self.law.alpha, self.law.inv_n)?;
        if !(self.mu > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::InvalidInput("need mu > 0 and lambda >= 0".into()));
        }
        if !(self.tau > 0.0) || !(self.final_time >= self.tau) {
            return Err(Error::InvalidInput(format!(
                "need tau > 0 and T >= tau, got tau = {}, T = {}",
                self.tau, self.final_time
            )));
        }
        let finite = [
            self.rho_w,
            self.rho_b,
            self.gravity[0],
            self.gravity[1],
            self.q_star,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "densities, gravity and q* must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Number of implicit Euler steps, `T / tau` rounded.
    pub fn n_steps(&self) -> usize {
        (self.final_time / self.tau).round().max(1.0) as usize
    }

    /// Fixed-stress stabilization `alpha^2 / (2 mu / d + lambda)` in 2D.
    pub fn beta_fs(&self) -> f64 {
        crate::schemes::fixed_stress_beta(self.mu, self.lambda, self.law.alpha, 2)
    }
}

fn shared_params(alpha: f64, vg: VanGenuchten, q_star: f64) -> PhysicsParams {
    let (mu, lambda) = lame_parameters(30.0, 0.2).expect("valid moduli");
    PhysicsParams {
        vg,
        law: PorosityLaw {
            phi0: 0.2,
            alpha,
            inv_n: 0.0,
        },
        mu,
        lambda,
        // gravity is off in both cases, the densities only matter for custom runs
        rho_w: 1000.0,
        rho_b: 2000.0,
        gravity: [0.0, 0.0],
        q_star,
        tau: 0.1,
        final_time: 1.0,
    }
}

impl Scenario {
    /// Injection into a medium with Lipschitz continuous laws.
    pub fn test_one(alpha: f64) -> Self {
        Scenario {
            params: shared_params(alpha, VanGenuchten::test_case_one(), -1.25),
            p0: -7.78,
        }
    }

    /// Injection into a medium with Hölder continuous mobility.
    pub fn test_two(alpha: f64) -> Self {
        Scenario {
            params: shared_params(alpha, VanGenuchten::test_case_two(), -0.175),
            p0: -15.3,
        }
    }
}

/// Ramped injection `q_star * min(t^2, 1)`.
pub fn inflow_rate(t: f64, q_star: f64) -> f64 {
    q_star * (t * t).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_strain_lame() {
        let (mu, lambda) = lame_parameters(30.0, 0.2).unwrap();
        assert!((mu - 12.5).abs() < 1e-12);
        assert!((lambda - 25.0 / 3.0).abs() < 1e-12);
        assert!(lame_parameters(1.0, 0.5).is_err());
    }

    #[test]
    fn ramp() {
        assert_eq!(inflow_rate(0.0, -1.25), 0.0);
        assert!((inflow_rate(0.5, -1.25) + 0.3125).abs() < 1e-15);
        assert_eq!(inflow_rate(1.0, -1.25), -1.25);
        assert_eq!(inflow_rate(3.0, -1.25), -1.25);
    }

    #[test]
    fn table_defaults() {
        let s = Scenario::test_one(1.0);
        s.params.validate().unwrap();
        assert_eq!(s.params.n_steps(), 10);
        assert!((s.params.beta_fs() - 0.048).abs() < 1e-12);
        let mut bad = s.params;
        bad.tau = -1.0;
        assert!(bad.validate().is_err());
    }
}
