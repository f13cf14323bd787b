//! Certified upper bounds on Eve's information through the dual tangent
//! form, a global Lipschitz constant and hypercube branch and bound.

use std::f64::consts::{FRAC_PI_4, LN_2};
use std::fmt::Write as _;
use std::time::Instant;

use crate::corr::{angles_to_weights, beta_of, AngleModel, BellTest, Correlators, TVector};
use crate::easy_bound::info_closed;
use crate::entropy::{conditional_matrix, entropy_bits, von_neumann_entropy};
use crate::error::{Error, Result};
use crate::hard_bound::roof;

/// Default cap on the number of cubes visited by [`branch_and_bound`].
pub const DEFAULT_MAX_CUBES: u64 = 100_000_000;
/// Initial edge of the angle grid: 8 × 8 × 8 × 16 = 8192 cubes.
pub const DEFAULT_S0: f64 = FRAC_PI_4 / 8.0;
/// Step of the finite difference used to read the slope t* off the roof.
pub const SLOPE_STEP: f64 = 1e-4;

/// Root of 2 − 2r + ln r = 0 on (0, ½), by bisection.
pub fn r1() -> f64 {
    let g = |r: f64| 2.0 - 2.0 * r + r.ln();
    let (mut lo, mut hi) = (1e-12, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bound on |H(ρ) − H(σ)| / arccos F(ρ, σ) for n-dimensional states, in bits.
pub fn entropy_lipschitz_constant(n: usize) -> f64 {
    assert!(n >= 2, "dimension must be at least 2");
    if n <= 4 {
        let r = r1();
        4.0 * (r * (1.0 - r)).sqrt() * ((n - 1) as f64).sqrt() / LN_2
    } else {
        2.0 * (n as f64).log2()
    }
}

/// Bound on the gradient norm of the goal function in the angle chart.
pub fn goal_gradient_bound(t: f64) -> f64 {
    12.7 + 7.0 * t
}

fn beta_max_raw(tz: f64, tx: f64, phi: f64, c2: f64, s2: f64) -> f64 {
    let (sp, cp) = phi.sin_cos();
    let a = c2 * cp * cp * tz * tz + s2 * tx * tx;
    let d = c2 * sp * sp * tx * tx + s2 * tz * tz;
    let b = c2 * cp * sp * tz * tx;
    let half = 0.5 * (a - d);
    let lam = 0.5 * (a + d) + (half * half + b * b).sqrt();
    lam.max(0.0).sqrt()
}

/// Largest score of the test reachable by a state with correlations T and
/// key angle φ, maximized over the remaining settings.
pub fn beta_max(t: &TVector, phi: f64, test: &BellTest) -> f64 {
    beta_max_raw(t.tz, t.tx, phi, test.cos().powi(2), test.sin().powi(2))
}

/// The slope-t tangent problem f(t) = max_x G(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualProblem {
    pub t: f64,
    pub test: BellTest,
    pub q: f64,
}

impl DualProblem {
    pub fn new(t: f64, test: BellTest, q: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::DomainError(format!("slope {t} must be finite and non-negative")));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::DomainError(format!("noise parameter q = {q} outside [0, 1]")));
        }
        Ok(Self { t, test, q })
    }
}

/// G(x) = H(L) − H(ρ_E | â = +1) + t·β_max.
pub fn goal(x: &AngleModel, dual: &DualProblem) -> f64 {
    let l = angles_to_weights(x).values();
    let [l1, l2, l3, l4] = l;
    let tz = (l1 - l2) + (l3 - l4);
    let tx = (l1 - l2) - (l3 - l4);
    let he = von_neumann_entropy(&conditional_matrix(l, x.phi, dual.q))
        .expect("conditional states in the angle chart are PSD");
    let c2 = dual.test.cos().powi(2);
    let s2 = dual.test.sin().powi(2);
    entropy_bits(&l) - he + dual.t * beta_max_raw(tz, tx, x.phi, c2, s2)
}

/// A branch-and-bound cell; edges are the base grid edges scaled by 2^-depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypercube {
    pub center: Vec<f64>,
    pub depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBConfig {
    pub s0: f64,
    pub epsilon: f64,
    pub lipschitz: f64,
    pub nu: Option<f64>,
    pub max_cubes: u64,
}

impl BBConfig {
    pub fn new(s0: f64, epsilon: f64, lipschitz: f64) -> Result<Self> {
        if !(s0 > 0.0 && epsilon > 0.0 && lipschitz > 0.0) {
            return Err(Error::DomainError(format!(
                "s0 = {s0}, epsilon = {epsilon}, lipschitz = {lipschitz} must all be positive"
            )));
        }
        Ok(Self { s0, epsilon, lipschitz, nu: None, max_cubes: DEFAULT_MAX_CUBES })
    }

    pub fn with_guess(mut self, nu: f64) -> Self {
        self.nu = Some(nu);
        self
    }

    pub fn with_max_cubes(mut self, cap: u64) -> Self {
        self.max_cubes = cap;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BbOutcome {
    /// U ≥ sup f over the domain.
    pub upper_bound: f64,
    /// Largest value of f seen at a cube center.
    pub best_value: f64,
    pub best_point: Vec<f64>,
    pub cubes_explored: u64,
    pub max_depth: u32,
    /// Largest edge of the finest cells.
    pub final_edge: f64,
}

/// Maximizes a Λ-Lipschitz `f` over `domain` to within the leaf slack
/// Λ·(half-diagonal of an ε cell). Cells are visited depth first in
/// lexicographic order of their centers, so runs are reproducible.
pub fn branch_and_bound<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    cfg: &BBConfig,
    domain: &[(f64, f64)],
) -> Result<BbOutcome> {
    let n = domain.len();
    if n == 0 || n > 16 || domain.iter().any(|(a, b)| !(b > a)) {
        return Err(Error::DomainError(format!("invalid box {domain:?}")));
    }
    let cells: Vec<usize> =
        domain.iter().map(|(a, b)| ((b - a) / cfg.s0 - 1e-9).ceil().max(1.0) as usize).collect();
    let base: Vec<f64> = domain.iter().zip(&cells).map(|((a, b), k)| (b - a) / *k as f64).collect();
    let base_max = base.iter().cloned().fold(0.0, f64::max);
    let base_half_diag = 0.5 * base.iter().map(|e| e * e).sum::<f64>().sqrt();
    let slack = |depth: u32| cfg.lipschitz * base_half_diag / f64::powi(2.0, depth as i32);
    let edge = |depth: u32| base_max / f64::powi(2.0, depth as i32);

    // Stack entries carry an upper bound inherited from the parent.
    let mut stack: Vec<(Hypercube, f64)> = Vec::new();
    let total: usize = cells.iter().product();
    for idx in (0..total).rev() {
        let mut rem = idx;
        let mut center = vec![0.0; n];
        for d in (0..n).rev() {
            let k = rem % cells[d];
            rem /= cells[d];
            center[d] = domain[d].0 + (k as f64 + 0.5) * base[d];
        }
        stack.push((Hypercube { center, depth: 0 }, f64::INFINITY));
    }
    // A first sweep gives every top-level cell a finite bound for budget reports.
    let top_slack = slack(0);
    for (cube, inherited) in stack.iter_mut() {
        *inherited = f(&cube.center) + top_slack;
    }

    let nu = cfg.nu.unwrap_or(f64::NEG_INFINITY);
    let mut best_value = f64::NEG_INFINITY;
    let mut best_point = Vec::new();
    let mut leaf_max = f64::NEG_INFINITY;
    let mut cubes = 0u64;
    let mut max_depth = 0u32;

    while let Some((cube, inherited)) = stack.pop() {
        cubes += 1;
        if cubes > cfg.max_cubes {
            let frontier = stack.iter().map(|(_, u)| *u).fold(leaf_max.max(inherited), f64::max);
            return Err(Error::BudgetExceeded {
                cap: cfg.max_cubes,
                upper_bound: frontier.max(best_value).max(nu),
            });
        }
        max_depth = max_depth.max(cube.depth);
        let v = f(&cube.center);
        if !v.is_finite() {
            return Err(Error::NumericalFailure(format!("objective is {v} at {:?}", cube.center)));
        }
        if v > best_value {
            best_value = v;
            best_point = cube.center.clone();
        }
        let ub = v + slack(cube.depth);
        if ub <= nu.max(best_value) {
            continue;
        }
        if edge(cube.depth) <= cfg.epsilon {
            leaf_max = leaf_max.max(ub);
            continue;
        }
        let d = cube.depth + 1;
        let quarter: Vec<f64> = base.iter().map(|e| 0.25 * e / f64::powi(2.0, cube.depth as i32)).collect();
        for mask in (0..(1usize << n)).rev() {
            let center = (0..n)
                .map(|i| {
                    let up = mask >> (n - 1 - i) & 1 == 1;
                    cube.center[i] + if up { quarter[i] } else { -quarter[i] }
                })
                .collect();
            stack.push((Hypercube { center, depth: d }, ub));
        }
    }

    Ok(BbOutcome {
        upper_bound: leaf_max.max(best_value).max(nu),
        best_value,
        best_point,
        cubes_explored: cubes,
        max_depth,
        final_edge: edge(max_depth),
    })
}

/// Outcome of certifying one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub x: f64,
    pub y: f64,
    pub q: f64,
    pub omega: f64,
    pub beta_star: f64,
    pub precision: f64,
    pub t_star: f64,
    pub lipschitz: f64,
    pub s0: f64,
    pub epsilon: f64,
    pub guess: f64,
    pub upper_bound_f: f64,
    pub best_value: f64,
    pub entropy_lower_bound: f64,
    pub cubes_explored: u64,
    pub max_depth: u32,
    pub wall_time_s: f64,
}

impl Certificate {
    /// Plain-text `key = value` record.
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        let rows: [(&str, String); 17] = [
            ("x", format!("{:.16e}", self.x)),
            ("y", format!("{:.16e}", self.y)),
            ("q", format!("{:.16e}", self.q)),
            ("omega", format!("{:.16e}", self.omega)),
            ("beta_star", format!("{:.16e}", self.beta_star)),
            ("precision", format!("{:.16e}", self.precision)),
            ("t_star", format!("{:.16e}", self.t_star)),
            ("lipschitz", format!("{:.16e}", self.lipschitz)),
            ("s0", format!("{:.16e}", self.s0)),
            ("epsilon", format!("{:.16e}", self.epsilon)),
            ("guess", format!("{:.16e}", self.guess)),
            ("upper_bound_f", format!("{:.16e}", self.upper_bound_f)),
            ("best_value", format!("{:.16e}", self.best_value)),
            ("entropy_lower_bound", format!("{:.16e}", self.entropy_lower_bound)),
            ("cubes_explored", self.cubes_explored.to_string()),
            ("max_depth", self.max_depth.to_string()),
            ("wall_time_s", format!("{:.3}", self.wall_time_s)),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Î(β) at a fixed test: closed form for Ω ≤ π/4, the roof above.
fn info_curve(test: &BellTest, q: f64) -> Result<Box<dyn Fn(f64) -> f64>> {
    let (c, s) = (test.cos(), test.sin());
    if test.is_easy() {
        return Ok(Box::new(move |b| info_closed(b, c, s, q)));
    }
    let r = roof(test, q)?;
    Ok(Box::new(move |b| r.value(b)))
}

/// −dÎ/dβ at β by finite differences (one-sided at the quantum bound).
pub fn tangent_slope(test: &BellTest, q: f64, beta: f64) -> Result<f64> {
    let f = info_curve(test, q)?;
    let hs = SLOPE_STEP;
    let t = if beta + hs <= 1.0 {
        (f(beta - hs) - f(beta + hs)) / (2.0 * hs)
    } else {
        (f(beta - hs) - f(beta)) / hs
    };
    Ok(t.max(0.0))
}

/// Knobs for [`certify_point`] beyond the required precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub s0: f64,
    pub max_cubes: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { s0: DEFAULT_S0, max_cubes: DEFAULT_MAX_CUBES }
    }
}

pub fn certify_point(corr: &Correlators, q: f64, omega: f64, precision: f64) -> Result<Certificate> {
    certify_point_with(corr, q, omega, precision, CertifyOptions::default())
}

pub fn certify_point_with(
    corr: &Correlators,
    q: f64,
    omega: f64,
    precision: f64,
    opts: CertifyOptions,
) -> Result<Certificate> {
    if !(precision > 0.0) {
        return Err(Error::DomainError(format!("precision {precision} must be positive")));
    }
    let start = Instant::now();
    let test = BellTest::new(omega)?;
    let beta = beta_of(corr, &test).min(1.0);
    let t_star = tangent_slope(&test, q, beta)?;
    let dual = DualProblem::new(t_star, test, q)?;
    let curve = info_curve(&test, q)?;
    let guess = curve(beta) + t_star * beta - 1e-9;

    let lipschitz = goal_gradient_bound(t_star);
    let n = AngleModel::DOMAIN.len() as f64;
    let epsilon = 2.0 * precision / (n.sqrt() * lipschitz);
    let cfg = BBConfig::new(opts.s0, epsilon, lipschitz)?.with_guess(guess).with_max_cubes(opts.max_cubes);
    let objective = |x: &[f64]| goal(&AngleModel::from_array([x[0], x[1], x[2], x[3]]), &dual);
    let out = branch_and_bound(objective, &cfg, &AngleModel::DOMAIN)?;

    Ok(Certificate {
        x: corr.x(),
        y: corr.y(),
        q,
        omega,
        beta_star: beta,
        precision,
        t_star,
        lipschitz,
        s0: opts.s0,
        epsilon,
        guess,
        upper_bound_f: out.upper_bound,
        best_value: out.best_value,
        entropy_lower_bound: 1.0 - out.upper_bound + t_star * beta,
        cubes_explored: out.cubes_explored,
        max_depth: out.max_depth,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lipschitz_constants() {
        let r = r1();
        assert!((r - 0.2032).abs() < 5e-4, "r1 = {r}");
        let c = entropy_lipschitz_constant(4);
        assert!(c > 4.02 && c < 4.023, "{c}");
        assert_abs_diff_eq!(entropy_lipschitz_constant(8), 6.0, epsilon = 1e-12);
        assert!(entropy_lipschitz_constant(2) < c);
    }

    #[test]
    fn beta_max_examples() {
        for omega in [0.3, FRAC_PI_4, 1.2] {
            let test = BellTest::new(omega).unwrap();
            for phi in [0.0, 0.5, 1.4] {
                let pure = TVector::new(1.0, 1.0, 1.0).unwrap();
                assert_abs_diff_eq!(beta_max(&pure, phi, &test), 1.0, epsilon = 1e-12);
                let zero = TVector::new(0.0, 0.0, 0.0).unwrap();
                assert_eq!(beta_max(&zero, phi, &test), 0.0);
            }
            let t = TVector::new(1.0, 0.0, 0.0).unwrap();
            assert_abs_diff_eq!(beta_max(&t, 0.0, &test), test.local_bound(), epsilon = 1e-12);
        }
    }

    #[test]
    fn goal_at_pure_state() {
        let dual = DualProblem::new(0.0, BellTest::chsh(), 1.0).unwrap();
        assert_abs_diff_eq!(goal(&AngleModel::new(0.0, 0.0, 0.0, 0.0).unwrap(), &dual), 0.0, epsilon = 1e-12);
        let dual = DualProblem::new(2.0, BellTest::chsh(), 1.0).unwrap();
        assert_abs_diff_eq!(goal(&AngleModel::new(0.0, 0.0, 0.0, 0.7).unwrap(), &dual), 2.0, epsilon = 1e-12);
        assert!(DualProblem::new(-1.0, BellTest::chsh(), 1.0).is_err());
    }

    #[test]
    fn bb_on_parabola() {
        let f = |x: &[f64]| 1.0 - (x[0] - 0.3).powi(2) - (x[1] - 0.7).powi(2);
        let cfg = BBConfig::new(0.1, 1e-3, 3.0).unwrap();
        let out = branch_and_bound(f, &cfg, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert!(out.upper_bound >= 1.0 - 1e-15);
        assert!(out.upper_bound <= 1.0 + 3.0 * 2f64.sqrt() * 1e-3 / 2.0, "{out:?}");
        assert!(out.best_value <= out.upper_bound);
    }

    #[test]
    fn bb_constant_function() {
        let c = 0.25;
        let cfg = BBConfig::new(0.5, 0.1, 1.0).unwrap();
        let out = branch_and_bound(|_| c, &cfg, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        // Nothing beats the running best, so every cell is refined to the last level.
        assert_abs_diff_eq!(out.upper_bound, c + 0.5 * 2f64.sqrt() * 0.0625, epsilon = 1e-12);
        assert_eq!(out.final_edge, 0.0625);
        let out = branch_and_bound(|_| c, &cfg.with_guess(2.0), &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert_eq!(out.upper_bound, 2.0);
        assert_eq!(out.cubes_explored, 4);
    }

    #[test]
    fn bb_reports_budget() {
        let f = |x: &[f64]| (10.0 * x[0]).sin();
        let cfg = BBConfig::new(0.1, 1e-6, 10.0).unwrap().with_max_cubes(50);
        match branch_and_bound(f, &cfg, &[(0.0, 1.0)]) {
            Err(Error::BudgetExceeded { cap, upper_bound }) => {
                assert_eq!(cap, 50);
                assert!(upper_bound >= 1.0 - 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }
}
