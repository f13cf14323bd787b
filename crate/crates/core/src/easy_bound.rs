//! Closed-form bound on Eve's information for tests with Ω ≤ π/4, the
//! optimal choice of Ω, and the CHSH baseline.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use crate::corr::{beta_of, BellTest, Correlators};
use crate::entropy::{h_q, info_local};
use crate::error::{Error, Result};

/// Slack on β above the quantum bound 1.
pub const BETA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EasyRegionBound {
    /// Optimal test angle; π/4 when the unconstrained optimum leaves the easy regime.
    pub omega_opt: f64,
    pub z: f64,
    /// Bound on Eve's information, h_q(z, q).
    pub info: f64,
    /// Whether (4 − X²)/(XY) ≤ 1.
    pub in_region: bool,
}

/// z(β) for the test (cos Ω, sin Ω), with β clamped to [cos Ω, 1].
pub(crate) fn z_of(beta: f64, cos: f64, sin: f64) -> f64 {
    let b = beta.clamp(cos, 1.0);
    let rad = (b * b - cos * cos).max(0.0);
    (0.5 * (rad.sqrt() / sin + 1.0)).min(1.0)
}

/// The closed-form expression without the regime check. For Ω > π/4 this is
/// the ansatz information I_anz.
pub(crate) fn info_closed(beta: f64, cos: f64, sin: f64, q: f64) -> f64 {
    if beta <= cos {
        return info_local(q);
    }
    h_q(z_of(beta, cos, sin), q)
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta > 1.0 + BETA_TOL {
        return Err(Error::DomainError(format!("score {beta} exceeds the quantum bound 1")));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::DomainError(format!("noise parameter q = {q} outside [0, 1]")));
    }
    Ok(())
}

#[allow(non_snake_case)]
pub fn I_easy(beta: f64, test: &BellTest, q: f64) -> Result<f64> {
    if !test.is_easy() {
        return Err(Error::DomainError(format!(
            "closed form needs omega <= pi/4, got {}",
            test.omega()
        )));
    }
    check_beta(beta)?;
    check_q(q)?;
    Ok(info_closed(beta, test.cos(), test.sin(), q))
}

/// Lower bound on H(Â|E) from the CHSH score alone.
pub fn chsh_entropy_bound(s: f64, q: f64) -> Result<f64> {
    if !(s >= 2.0 && s <= 2.0 * SQRT_2 + BETA_TOL) {
        return Err(Error::DomainError(format!("CHSH score {s} outside [2, 2 sqrt 2]")));
    }
    Ok(1.0 - I_easy(s / (2.0 * SQRT_2), &BellTest::chsh(), q)?)
}

/// Eve's information from the CHSH score, extended by I_L below the local bound.
pub(crate) fn chsh_info(s: f64, q: f64) -> f64 {
    let c = FRAC_PI_4.cos();
    info_closed(s / (2.0 * SQRT_2), c, c, q)
}

pub fn optimal_omega_easy(corr: &Correlators, q: f64) -> Result<EasyRegionBound> {
    check_q(q)?;
    let (x, y) = (corr.x(), corr.y());
    let d = 4.0 - x * x;
    if x <= 0.0 || y <= 0.0 || d <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "optimal angle undefined at X = {x}, Y = {y}"
        )));
    }
    let in_region = d <= x * y;
    if in_region {
        let omega = d.atan2(x * y);
        let test = BellTest::new(omega)?;
        let beta = beta_of(corr, &test);
        let z = z_of(beta, test.cos(), test.sin());
        return Ok(EasyRegionBound { omega_opt: omega, z, info: h_q(z, q), in_region });
    }
    let test = BellTest::chsh();
    let z = z_of(beta_of(corr, &test), test.cos(), test.sin());
    Ok(EasyRegionBound { omega_opt: FRAC_PI_4, z, info: chsh_info(corr.chsh(), q), in_region })
}
