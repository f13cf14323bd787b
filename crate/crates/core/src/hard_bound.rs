//! The Ω > π/4 regime: region S, the optimal key angle c*², the
//! three-parameter heuristic, the two-coefficient ansatz and its concave roof,
//! and the combined (X, Y) bound.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::certify::Certificate;
use crate::corr::{beta_of, BellTest, Correlators, TVector, WeightOrdering};
use crate::corr::BellDiagonalWeights;
use crate::easy_bound::{info_closed, optimal_omega_easy, BETA_TOL};
use crate::entropy::{entropy_bits, eve_cond_entropy, h, info_local};
use crate::error::{Error, Result};
use crate::optim::{golden_min, grid_golden_min, halton, nelder_mead, NmOptions};

/// Number of grid points on (π/4, π/2] for the hard-regime Ω scan.
pub const OMEGA_GRID: usize = 64;
/// Default number of low-discrepancy starts for [`I_heuristic`].
pub const HEURISTIC_STARTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionS {
    pub lower: f64,
    pub upper: f64,
}

impl RegionS {
    pub fn new(t: &TVector, test: &BellTest) -> Self {
        let (c2, s2) = (test.cos().powi(2), test.sin().powi(2));
        let (z2, x2) = (t.tz * t.tz, t.tx * t.tx);
        Self { lower: c2 * z2 + s2 * x2, upper: s2 * z2 + c2 * x2 }
    }

    pub fn contains(&self, beta: f64) -> bool {
        let b2 = beta * beta;
        self.lower <= b2 && b2 <= self.upper
    }
}

/// c*² without validation; the Tz = Tx limit maps to 1 (angle unconstrained).
fn c_star_sq_raw(tz: f64, tx: f64, c2: f64, s2: f64, beta: f64) -> f64 {
    let (z2, x2, b2) = (tz * tz, tx * tx, beta * beta);
    let num = (b2 - s2 * x2) * (c2 * x2 + s2 * z2 - b2);
    let den = c2 * (z2 - x2) * (s2 * z2 + s2 * x2 - b2);
    if den <= 0.0 {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

pub fn c_star_sq(t: &TVector, test: &BellTest, beta: f64) -> Result<f64> {
    if t.tz - t.tx < 1e-10 {
        return Err(Error::DegenerateInput(format!(
            "T_z = T_x = {} leaves the key angle unconstrained",
            t.tz
        )));
    }
    Ok(c_star_sq_raw(t.tz, t.tx, test.cos().powi(2), test.sin().powi(2), beta))
}

fn t_from_unit(u: &[f64]) -> (f64, f64, f64) {
    let u: Vec<f64> = u.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let tz = u[0];
    let tx = u[1] * tz;
    let lo = tz + tx - 1.0;
    let hi = 1.0 - (tz - tx);
    (tz, tx, lo + u[2] * (hi - lo))
}

/// Eve's information for the state at unit-cube coordinates `u`, with the
/// key angle pushed as far as the score allows.
fn heuristic_objective(u: &[f64], beta: f64, c2: f64, s2: f64, q: f64) -> f64 {
    let (tz, tx, tp) = t_from_unit(u);
    let l = [
        0.25 * (1.0 + tp + tz + tx),
        0.25 * (1.0 + tp - tz - tx),
        0.25 * (1.0 - tp + tz - tx),
        0.25 * (1.0 - tp - tz + tx),
    ]
    .map(|v| v.max(0.0));
    let b2 = beta * beta;
    let lower = c2 * tz * tz + s2 * tx * tx;
    let upper = s2 * tz * tz + c2 * tx * tx;
    let phi = if lower >= b2 {
        0.0
    } else if b2 <= upper + 1e-12 {
        c_star_sq_raw(tz, tx, c2, s2, beta).sqrt().acos()
    } else {
        return -10.0 - (b2 - upper);
    };
    let w = BellDiagonalWeights::from_raw(l, WeightOrdering::KeyDifference);
    match eve_cond_entropy(&w, phi, q) {
        Ok(he) => entropy_bits(&l) - he,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Multi-start maximization of H(L) − H(ρ_E) over all Bell-diagonal states
/// compatible with score β. Starts are the first `starts` Halton points.
#[allow(non_snake_case)]
pub fn I_heuristic(beta: f64, test: &BellTest, q: f64, starts: usize) -> f64 {
    if beta <= test.sin() {
        return info_local(q);
    }
    let beta = beta.min(1.0);
    let (c2, s2) = (test.cos().powi(2), test.sin().powi(2));
    let f = |u: &[f64]| -heuristic_objective(u, beta, c2, s2, q);
    let opts = NmOptions { xatol: 1e-11, fatol: 1e-14, max_evals: 3000, step: 0.2 };
    let mut best = f64::NEG_INFINITY;
    // The pure corner T = (1, 1, 1) is the only state at β = 1 and has no volume.
    let corner = std::iter::once(vec![1.0, 1.0, 1.0]);
    for x0 in corner.chain((0..starts.max(1)).map(|i| halton(i as u64, 3))) {
        let r = nelder_mead(f, &x0, opts);
        let r = nelder_mead(f, &r.x, NmOptions { step: 0.02, ..opts });
        best = best.max(-r.f);
    }
    best
}

/// Two-coefficient ansatz: maximum over T_x of the information of states
/// with only L₁ and L₃ non-zero (T_z = 1, T_p = T_x).
#[allow(non_snake_case)]
pub fn ansatz_I(beta: f64, test: &BellTest, q: f64) -> Result<f64> {
    if test.is_easy() {
        return Err(Error::DomainError("ansatz is defined for omega > pi/4".into()));
    }
    if !beta.is_finite() || beta > 1.0 + BETA_TOL {
        return Err(Error::DomainError(format!("score {beta} exceeds the quantum bound 1")));
    }
    let beta = beta.clamp(test.sin(), 1.0);
    let (c2, s2) = (test.cos().powi(2), test.sin().powi(2));
    let lo = ((beta * beta - s2) / c2).max(0.0);
    let hi = (beta * beta - c2) / s2;
    if lo > hi + 1e-12 {
        return Err(Error::DomainError(format!("empty T_x interval at beta = {beta}")));
    }
    let hi = hi.max(lo).min(1.0);
    let f = |t2: f64| {
        let tx = t2.clamp(0.0, 1.0).sqrt();
        let cs = c_star_sq_raw(1.0, tx, c2, s2, beta);
        h(0.5 * (1.0 + tx)) - h(0.5 * (1.0 + (tx * tx + cs * q * (1.0 - tx * tx)).sqrt()))
    };
    if hi - lo < 1e-14 {
        return Ok(f(lo));
    }
    let (_, v) = grid_golden_min(|t| -f(t), lo, hi, 400, 1e-13);
    Ok(-v)
}

/// Concave roof of the closed-form ansatz for one test Ω > π/4: a chord
/// from the local-bound point (sin Ω, I_L) tangent to I_anz at β*.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoofBound {
    pub omega: f64,
    pub q: f64,
    pub beta_star: f64,
    pub info_star: f64,
    pub info_local: f64,
    cos: f64,
    sin: f64,
}

/// I_anz, the closed form evaluated at a hard-regime test.
fn info_anz(beta: f64, cos: f64, sin: f64, q: f64) -> f64 {
    info_closed(beta, cos, sin, q)
}

impl RoofBound {
    /// Î(β); equals I_L below the local bound.
    pub fn value(&self, beta: f64) -> f64 {
        let beta = beta.min(1.0);
        if beta <= self.sin {
            return self.info_local;
        }
        if beta < self.beta_star {
            let w = (beta - self.sin) / (self.beta_star - self.sin);
            return self.info_local + w * (self.info_star - self.info_local);
        }
        info_anz(beta, self.cos, self.sin, self.q)
    }

    /// Whether sin Ω is numerically 1 and the roof is flat at I_L.
    pub fn is_flat(&self) -> bool {
        self.beta_star >= 1.0 && self.info_star == self.info_local
    }
}

pub fn roof(test: &BellTest, q: f64) -> Result<RoofBound> {
    if test.is_easy() {
        return Err(Error::DomainError("roof is defined for omega > pi/4".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::DomainError(format!("noise parameter q = {q} outside [0, 1]")));
    }
    let (cos, sin) = (test.cos(), test.sin());
    let il = info_local(q);
    let base = RoofBound { omega: test.omega(), q, beta_star: 1.0, info_star: il, info_local: il, cos, sin };
    if sin >= 1.0 - 1e-7 {
        return Ok(base);
    }
    let slope = |b: f64| (il - info_anz(b, cos, sin, q)) / (b - sin);
    let a = sin + 1e-6;
    // The slope functional is unimodal in practice; the grid guards the left end.
    let (bs, _) = grid_golden_min(slope, a, 1.0, 32, 1e-12);
    let (bs2, _) = golden_min(slope, a, 1.0, 1e-12);
    let bs = if slope(bs2) < slope(bs) { bs2 } else { bs };
    Ok(RoofBound { beta_star: bs, info_star: info_anz(bs, cos, sin, q), ..base })
}

/// How a bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    Analytic,
    Ansatz,
    Heuristic,
    Certified,
}

impl std::fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BoundMethod::Analytic => "analytic",
            BoundMethod::Ansatz => "ansatz",
            BoundMethod::Heuristic => "heuristic",
            BoundMethod::Certified => "certified",
        };
        f.write_str(s)
    }
}

/// Lower bound on H(Â₀|E) with the test that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub entropy: f64,
    pub omega: f64,
    pub beta: f64,
    pub method: BoundMethod,
    pub certificate: Option<Certificate>,
}

/// Î(β(Ω); Ω, q) for the hard regime, or the closed form for Ω ≤ π/4.
pub fn info_at_omega(corr: &Correlators, omega: f64, q: f64) -> Result<f64> {
    let test = BellTest::new(omega)?;
    let beta = beta_of(corr, &test).min(1.0);
    if test.is_easy() {
        return Ok(info_closed(beta, test.cos(), test.sin(), q));
    }
    Ok(roof(&test, q)?.value(beta))
}

fn hard_candidate(corr: &Correlators, q: f64) -> Result<(f64, f64)> {
    let f = |omega: f64| info_at_omega(corr, omega, q).unwrap_or(f64::INFINITY);
    let step = FRAC_PI_4 / OMEGA_GRID as f64;
    let grid: Vec<(f64, f64)> =
        (1..=OMEGA_GRID).map(|k| FRAC_PI_4 + step * k as f64).map(|o| (o, f(o))).collect();
    let k = (0..grid.len()).min_by(|&i, &j| grid[i].1.total_cmp(&grid[j].1)).unwrap_or(0);
    let lo = grid[k.saturating_sub(1)].0;
    let hi = grid[(k + 1).min(grid.len() - 1)].0.min(FRAC_PI_2);
    let (o, v) = golden_min(f, lo, hi, 1e-10);
    Ok(if v < grid[k].1 { (o, v) } else { grid[k] })
}

pub fn entropy_bound_xy(corr: &Correlators, q: f64) -> Result<BoundResult> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::DomainError(format!("noise parameter q = {q} outside [0, 1]")));
    }
    if !corr.is_nonlocal() {
        return Ok(BoundResult {
            entropy: 1.0 - info_local(q),
            omega: FRAC_PI_4,
            beta: beta_of(corr, &BellTest::chsh()),
            method: BoundMethod::Analytic,
            certificate: None,
        });
    }
    let easy = optimal_omega_easy(corr, q)?;
    let (omega_h, info_h) = hard_candidate(corr, q)?;
    let (omega, info, method) = if easy.info <= info_h {
        (easy.omega_opt, easy.info, BoundMethod::Analytic)
    } else {
        (omega_h, info_h, BoundMethod::Ansatz)
    };
    let beta = beta_of(corr, &BellTest::new(omega)?);
    Ok(BoundResult { entropy: 1.0 - info, omega, beta, method, certificate: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::easy_bound::chsh_entropy_bound;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn t38() -> BellTest {
        BellTest::new(3.0 * std::f64::consts::PI / 8.0).unwrap()
    }

    #[test]
    fn c_star_boundaries() {
        let test = t38();
        let t = TVector::new(0.9, 0.3, 0.2).unwrap();
        let s = RegionS::new(&t, &test);
        assert_abs_diff_eq!(c_star_sq(&t, &test, s.lower.sqrt()).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c_star_sq(&t, &test, s.upper.sqrt()).unwrap(), 0.0, epsilon = 1e-12);
        // Below S_Ω²T_z² the key angle is free and the raw formula exceeds 1.
        let free = (0.5 * (s.lower + test.sin().powi(2) * 0.81)).sqrt();
        assert!(s.contains(free));
        assert_eq!(c_star_sq(&t, &test, free).unwrap(), 1.0);
        let mid = (0.5 * (test.sin().powi(2) * 0.81 + s.upper)).sqrt();
        let v = c_star_sq(&t, &test, mid).unwrap();
        assert!(v > 0.0 && v < 1.0);
        let reached = crate::certify::beta_max(&t, v.sqrt().acos(), &test);
        assert_abs_diff_eq!(reached, mid, epsilon = 1e-12);
        let pure = TVector::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(c_star_sq(&pure, &test, 1.0), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn ansatz_endpoints() {
        let test = t38();
        assert_abs_diff_eq!(ansatz_I(1.0, &test, 1.0).unwrap(), 0.0, epsilon = 1e-12);
        for q in [1.0, 0.5, 0.1] {
            let v = ansatz_I(test.sin(), &test, q).unwrap();
            assert_abs_diff_eq!(v, info_local(q), epsilon = 1e-9);
        }
        assert!(ansatz_I(0.9, &BellTest::chsh(), 1.0).is_err());
    }

    #[test]
    fn heuristic_endpoints_and_ansatz_agreement() {
        let test = t38();
        assert_abs_diff_eq!(I_heuristic(1.0, &test, 1.0, 8), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(I_heuristic(test.sin(), &test, 1.0, 8), 1.0, epsilon = 1e-12);
        let a = ansatz_I(0.95, &test, 1.0).unwrap();
        let b = I_heuristic(0.95, &test, 1.0, HEURISTIC_STARTS);
        assert!((a - b).abs() < 1e-6, "ansatz {a} heuristic {b}");
    }

    #[test]
    fn roof_shape() {
        for q in [1.0, 0.64, 0.25] {
            for omega in [0.9, 1.1, 1.3, 1.5] {
                let test = BellTest::new(omega).unwrap();
                let r = roof(&test, q).unwrap();
                assert_abs_diff_eq!(r.value(test.sin()), info_local(q), epsilon = 1e-15);
                assert!(r.beta_star > test.sin() && r.beta_star <= 1.0);
                // Continuity, and the chord slope matches the curve's derivative.
                let gap = 1.0 - r.beta_star;
                if gap > 1e-6 {
                    let d = (1e-5f64).min(0.1 * gap);
                    let at = |b: f64| info_anz(b, test.cos(), test.sin(), q);
                    assert!((r.value(r.beta_star - d) - r.value(r.beta_star + d)).abs() < 1e-3);
                    let chord = (r.info_star - r.info_local) / (r.beta_star - test.sin());
                    let tangent = (at(r.beta_star + d) - at(r.beta_star - d)) / (2.0 * d);
                    assert!((chord - tangent).abs() < 1e-3 * chord.abs().max(1.0), "{omega} {q}: {chord} {tangent}");
                }
            }
            let r = roof(&t38(), q).unwrap();
            if q == 1.0 {
                assert_abs_diff_eq!(r.value(1.0), 0.0, epsilon = 1e-12);
            }
        }
        let flat = roof(&BellTest::new(FRAC_PI_2).unwrap(), 0.5).unwrap();
        assert!(flat.is_flat());
        assert_eq!(flat.value(0.99), info_local(0.5));
    }

    #[test]
    fn roof_dominates_ansatz() {
        for q in [1.0, 0.5] {
            for omega in [0.9, 1.2, 1.45] {
                let test = BellTest::new(omega).unwrap();
                let r = roof(&test, q).unwrap();
                for k in 0..=40 {
                    let b = test.sin() + (1.0 - test.sin()) * k as f64 / 40.0;
                    assert!(r.value(b) >= ansatz_I(b, &test, q).unwrap() - 1e-9);
                }
            }
        }
    }

    #[test]
    fn xy_bound_examples() {
        let r = entropy_bound_xy(&Correlators::new(SQRT_2, SQRT_2).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(r.entropy, 1.0, epsilon = 1e-9);
        let r = entropy_bound_xy(&Correlators::new(1.0, 1.0).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(r.entropy, 0.0, epsilon = 1e-12);
        let r = entropy_bound_xy(&Correlators::new(1.2, 1.2).unwrap(), 1.0).unwrap();
        let chsh = chsh_entropy_bound(2.4, 1.0).unwrap();
        assert!(r.entropy > chsh + 1e-3, "{} vs {chsh}", r.entropy);
        assert_eq!(r.method, BoundMethod::Ansatz);
        assert!(r.omega > FRAC_PI_4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn xy_dominates_chsh(x in 0.0..2.0f64, y in 0.0..2.0f64, q in 0.1..1.0f64) {
            prop_assume!(x * x + y * y <= 4.0 && x + y > 2.0);
            let c = Correlators::new(x, y).unwrap();
            let r = entropy_bound_xy(&c, q).unwrap();
            prop_assert!(r.entropy >= chsh_entropy_bound(x + y, q).unwrap() - 1e-9);
        }
    }
}
