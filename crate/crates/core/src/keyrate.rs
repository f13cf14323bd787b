//! Lossy two-qubit experiments, key rates r = H(Â₀|E) − H(Â₀|B₂), their
//! optimization over the setup, and critical detection efficiencies.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corr::{normalize_signs, Correlators};
use crate::easy_bound::chsh_info;
use crate::entropy::{entropy_bits, h, info_local};
use crate::error::{Error, Result};
use crate::hard_bound::{entropy_bound_xy, info_at_omega};
use crate::optim::{bisect_predicate, nelder_mead, NmOptions};

/// Rates at or below this are treated as zero in sign tests.
pub const RATE_EPS: f64 = 1e-12;
/// Smallest q the optimizer explores; keeps r/q finite.
pub const Q_MIN: f64 = 1e-4;
pub const DEFAULT_STARTS: usize = 64;
pub const DEFAULT_SEED: u64 = 0x5eed;

/// State cos θ|00⟩ + sin θ|11⟩ measured in the x–z plane with detection
/// efficiency η per side; Alice flips her key bit with probability p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSetup {
    pub theta: f64,
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub eta: f64,
    pub p: f64,
}

impl ExperimentSetup {
    pub fn validate(&self) -> Result<()> {
        let angles = [self.theta, self.a0, self.a1, self.b0, self.b1, self.b2];
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::DomainError(format!("non-finite angle in {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::DomainError(format!("efficiency {} outside [0, 1]", self.eta)));
        }
        if !(0.0..=0.5).contains(&self.p) {
            return Err(Error::DomainError(format!("flip probability {} outside [0, 1/2]", self.p)));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        (1.0 - 2.0 * self.p).powi(2)
    }

    /// Ideal CHSH settings on the maximally entangled state.
    pub fn chsh_singlet(eta: f64) -> Self {
        Self { theta: FRAC_PI_4, a0: 0.0, a1: FRAC_PI_2, b0: FRAC_PI_4, b1: -FRAC_PI_4, b2: 0.0, eta, p: 0.0 }
    }
}

/// How Bob's key measurement B₂ reports a missing click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeyLoss {
    /// No-click on B₂ is kept as a third symbol for error correction.
    #[default]
    ThirdOutcome,
    /// No-click on B₂ is binned to +1 like every other setting.
    Binned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulation {
    pub corr: Correlators,
    pub x_raw: f64,
    pub y_raw: f64,
    /// H(Â₀|B₂) in bits.
    pub h_ab: f64,
    /// Pr[Â₀ ≠ B₂] with no-clicks binned to +1.
    pub qber: f64,
}

fn quantum_corr(theta: f64, a: f64, b: f64) -> f64 {
    a.cos() * b.cos() + (2.0 * theta).sin() * a.sin() * b.sin()
}

fn quantum_marg(theta: f64, a: f64) -> f64 {
    (2.0 * theta).cos() * a.cos()
}

/// ⟨A_a B_b⟩ with both no-clicks mapped to +1.
pub fn effective_corr(s: &ExperimentSetup, a: f64, b: f64) -> f64 {
    let (eta, th) = (s.eta, s.theta);
    eta * eta * quantum_corr(th, a, b)
        + eta * (1.0 - eta) * (quantum_marg(th, a) + quantum_marg(th, b))
        + (1.0 - eta).powi(2)
}

/// ⟨A_a⟩ with no-click mapped to +1.
pub fn effective_marg(s: &ExperimentSetup, a: f64) -> f64 {
    s.eta * quantum_marg(s.theta, a) + (1.0 - s.eta)
}

/// Joint distribution of (Â₀, B₂) after the flip; rows a = +1, −1 and
/// columns b = +1, −1, no-click (zero under [`KeyLoss::Binned`]).
pub fn key_joint(s: &ExperimentSetup, loss: KeyLoss) -> [[f64; 3]; 2] {
    let (eta, th) = (s.eta, s.theta);
    let raw: [[f64; 3]; 2] = match loss {
        KeyLoss::Binned => {
            let ma = effective_marg(s, s.a0);
            let mb = effective_marg(s, s.b2);
            let e = effective_corr(s, s.a0, s.b2);
            let cell = |a: f64, b: f64| 0.25 * (1.0 + a * ma + b * mb + a * b * e);
            [[cell(1.0, 1.0), cell(1.0, -1.0), 0.0], [cell(-1.0, 1.0), cell(-1.0, -1.0), 0.0]]
        }
        KeyLoss::ThirdOutcome => {
            let maq = quantum_marg(th, s.a0);
            let mbq = quantum_marg(th, s.b2);
            let eq = quantum_corr(th, s.a0, s.b2);
            let ma = eta * maq + (1.0 - eta);
            let cell = |a: f64, b: f64| {
                let lost_a = if a > 0.0 { (1.0 - eta) * 0.5 * (1.0 + b * mbq) } else { 0.0 };
                eta * (eta * 0.25 * (1.0 + a * maq + b * mbq + a * b * eq) + lost_a)
            };
            let none = |a: f64| (1.0 - eta) * 0.5 * (1.0 + a * ma);
            [[cell(1.0, 1.0), cell(1.0, -1.0), none(1.0)], [cell(-1.0, 1.0), cell(-1.0, -1.0), none(-1.0)]]
        }
    };
    let p = s.p;
    let mut out = [[0.0; 3]; 2];
    for b in 0..3 {
        out[0][b] = (1.0 - p) * raw[0][b] + p * raw[1][b];
        out[1][b] = (1.0 - p) * raw[1][b] + p * raw[0][b];
    }
    out
}

/// H(A|B) = H(A, B) − H(B) for a joint distribution indexed [a][b].
pub fn cond_entropy_ab<const NB: usize>(joint: &[[f64; NB]; 2]) -> Result<f64> {
    let flat: Vec<f64> = joint.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite() || *v < -1e-12) {
        return Err(Error::DomainError(format!("negative or non-finite entry in {joint:?}")));
    }
    let total: f64 = flat.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::DomainError(format!("joint distribution sums to {total}")));
    }
    let flat: Vec<f64> = flat.iter().map(|v| v.max(0.0)).collect();
    let mb: Vec<f64> = (0..NB).map(|b| joint[0][b].max(0.0) + joint[1][b].max(0.0)).collect();
    Ok((entropy_bits(&flat) - entropy_bits(&mb)).max(0.0))
}

pub fn simulate(s: &ExperimentSetup) -> Result<Simulation> {
    simulate_with(s, KeyLoss::default())
}

pub fn simulate_with(s: &ExperimentSetup, loss: KeyLoss) -> Result<Simulation> {
    s.validate()?;
    let x_raw = effective_corr(s, s.a0, s.b0) + effective_corr(s, s.a0, s.b1);
    let y_raw = effective_corr(s, s.a1, s.b0) - effective_corr(s, s.a1, s.b1);
    let corr = normalize_signs(x_raw, y_raw)?;
    let h_ab = cond_entropy_ab(&key_joint(s, loss))?;
    let qber = 0.5 * (1.0 - (1.0 - 2.0 * s.p) * effective_corr(s, s.a0, s.b2));
    Ok(Simulation { corr, x_raw, y_raw, h_ab, qber })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Entropy bound from the CHSH score X + Y.
    Chsh,
    /// Entropy bound from the pair (X, Y).
    Xy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCorrection {
    /// Leak h(Q) from the QBER.
    Qber,
    /// Leak H(Â₀|B₂).
    CondEntropy,
}

/// A protocol variant: which bound, which error-correction cost, and
/// whether Alice applies noisy preprocessing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Method {
    pub bound: BoundKind,
    pub correction: ErrorCorrection,
    pub noisy: bool,
}

impl Method {
    pub const CHSH_QBER: Method =
        Method { bound: BoundKind::Chsh, correction: ErrorCorrection::Qber, noisy: false };
    pub const CHSH: Method =
        Method { bound: BoundKind::Chsh, correction: ErrorCorrection::CondEntropy, noisy: false };
    pub const CHSH_NOISY: Method =
        Method { bound: BoundKind::Chsh, correction: ErrorCorrection::CondEntropy, noisy: true };
    pub const XY_NOISY: Method =
        Method { bound: BoundKind::Xy, correction: ErrorCorrection::CondEntropy, noisy: true };

    /// The four protocol rows, each generalizing the one before.
    pub const TABLE: [Method; 4] = [Self::CHSH_QBER, Self::CHSH, Self::CHSH_NOISY, Self::XY_NOISY];

    pub fn tag(&self) -> &'static str {
        match (self.bound, self.correction, self.noisy) {
            (BoundKind::Chsh, ErrorCorrection::Qber, false) => "chsh-qber",
            (BoundKind::Chsh, ErrorCorrection::Qber, true) => "chsh-qber-noisy",
            (BoundKind::Chsh, ErrorCorrection::CondEntropy, false) => "chsh",
            (BoundKind::Chsh, ErrorCorrection::CondEntropy, true) => "chsh-noisy",
            (BoundKind::Xy, ErrorCorrection::Qber, false) => "xy-qber",
            (BoundKind::Xy, ErrorCorrection::Qber, true) => "xy-qber-noisy",
            (BoundKind::Xy, ErrorCorrection::CondEntropy, false) => "xy",
            (BoundKind::Xy, ErrorCorrection::CondEntropy, true) => "xy-noisy",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Method> {
        Self::all().into_iter().find(|m| m.tag() == tag)
    }

    fn all() -> Vec<Method> {
        let mut v = Vec::new();
        for bound in [BoundKind::Chsh, BoundKind::Xy] {
            for correction in [ErrorCorrection::Qber, ErrorCorrection::CondEntropy] {
                for noisy in [false, true] {
                    v.push(Method { bound, correction, noisy });
                }
            }
        }
        v
    }
}

fn leak(sim: &Simulation, method: Method) -> f64 {
    match method.correction {
        ErrorCorrection::Qber => h(sim.qber),
        ErrorCorrection::CondEntropy => sim.h_ab,
    }
}

/// Key rate with the (X, Y) bound evaluated at a fixed test angle Ω
/// (ignored by CHSH methods). Raw, possibly negative.
pub fn key_rate_at(s: &ExperimentSetup, omega: f64, method: Method) -> Result<f64> {
    let sim = simulate(s)?;
    let q = s.q();
    let info = match method.bound {
        BoundKind::Chsh => chsh_info(sim.corr.chsh(), q),
        BoundKind::Xy if sim.corr.is_nonlocal() => info_at_omega(&sim.corr, omega, q)?,
        BoundKind::Xy => info_local(q),
    };
    Ok(1.0 - info - leak(&sim, method))
}

/// Key rate with the best test angle for the (X, Y) bound. Raw, possibly negative.
pub fn key_rate(s: &ExperimentSetup, method: Method) -> Result<f64> {
    let sim = simulate(s)?;
    let q = s.q();
    let entropy = match method.bound {
        BoundKind::Chsh => 1.0 - chsh_info(sim.corr.chsh(), q),
        BoundKind::Xy => entropy_bound_xy(&sim.corr, q)?.entropy,
    };
    Ok(entropy - leak(&sim, method))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Maximally entangled state, θ = π/4.
    Singlet,
    /// Partially entangled state with θ optimized.
    Qubit,
}

impl Model {
    pub fn tag(&self) -> &'static str {
        match self {
            Model::Singlet => "singlet",
            Model::Qubit => "qubit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRatePoint {
    pub eta: f64,
    /// Rate clamped at 0.
    pub rate: f64,
    pub raw_rate: f64,
    pub method: Method,
    pub setup: ExperimentSetup,
    /// Best test angle for the (X, Y) bound, π/4 for CHSH methods.
    pub omega: f64,
    pub q: f64,
    /// Optimizer coordinates of the best point; reusable as a warm start.
    pub params: Vec<f64>,
}

impl KeyRatePoint {
    pub fn is_positive(&self) -> bool {
        self.raw_rate > RATE_EPS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub starts: usize,
    pub seed: u64,
    /// Extra starting points in optimizer coordinates.
    pub warm: Vec<Vec<f64>>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { starts: DEFAULT_STARTS, seed: DEFAULT_SEED, warm: Vec::new() }
    }
}

/// Maps unconstrained optimizer coordinates to a setup and test angle:
/// [θ (qubit)], a₀, a₁, b₀, b₁, b₂, [q (noisy)], [Ω (xy)].
struct Layout {
    model: Model,
    method: Method,
}

impl Layout {
    fn dim(&self) -> usize {
        5 + usize::from(self.model == Model::Qubit)
            + usize::from(self.method.noisy)
            + usize::from(self.method.bound == BoundKind::Xy)
    }

    fn decode(&self, x: &[f64], eta: f64) -> (ExperimentSetup, f64) {
        let mut i = 0;
        let theta = match self.model {
            Model::Singlet => FRAC_PI_4,
            Model::Qubit => {
                i += 1;
                FRAC_PI_4 * x[0].sin().powi(2)
            }
        };
        let a = &x[i..i + 5];
        i += 5;
        let p = if self.method.noisy {
            let q = Q_MIN.powf(x[i].sin().powi(2));
            i += 1;
            0.5 * (1.0 - q.sqrt())
        } else {
            0.0
        };
        let omega = if self.method.bound == BoundKind::Xy {
            (FRAC_PI_4 * (1.0 + x[i].sin())).max(1e-6)
        } else {
            FRAC_PI_4
        };
        let setup = ExperimentSetup { theta, a0: a[0], a1: a[1], b0: a[2], b1: a[3], b2: a[4], eta, p };
        (setup, omega)
    }

    fn random_start(&self, rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        if self.model == Model::Qubit {
            // Half the starts explore weakly entangled states.
            let hi = if k % 2 == 0 { 0.5 } else { FRAC_PI_2 };
            x.push(rng.gen_range(0.0..hi));
        }
        for _ in 0..5 {
            x.push(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        }
        if self.method.noisy {
            x.push(rng.gen_range(0.0..FRAC_PI_2));
        }
        if self.method.bound == BoundKind::Xy {
            x.push(rng.gen_range(-FRAC_PI_2..FRAC_PI_2));
        }
        x
    }

    /// Rate at fixed Ω, pushed towards nonlocality outside the CHSH-violating region.
    fn objective(&self, x: &[f64], eta: f64) -> f64 {
        let (s, omega) = self.decode(x, eta);
        let Ok(sim) = simulate(&s) else { return -10.0 };
        if !sim.corr.is_nonlocal() {
            return -1.0 + (sim.corr.chsh() - 2.0);
        }
        key_rate_at(&s, omega, self.method).unwrap_or(-10.0)
    }
}

fn run_starts<F: Fn(&[f64]) -> f64>(f: &F, starts: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let opts = NmOptions { xatol: 1e-9, fatol: 1e-13, max_evals: 6000, step: 0.3 };
    let mut best = (starts[0].clone(), f64::NEG_INFINITY);
    for x0 in starts {
        let r = nelder_mead(|x| -f(x), x0, opts);
        let r = nelder_mead(|x| -f(x), &r.x, NmOptions { step: 0.05, ..opts });
        if -r.f > best.1 {
            best = (r.x, -r.f);
        }
    }
    best
}

/// Maximizes the key rate over the state (qubit model), all five angles,
/// q (noisy methods) and Ω (xy methods). Deterministic for a given seed.
pub fn optimize_rate(eta: f64, model: Model, method: Method, opts: &OptimizeOptions) -> Result<KeyRatePoint> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::DomainError(format!("efficiency {eta} outside [0, 1]")));
    }
    let layout = Layout { model, method };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<f64>> =
        opts.warm.iter().filter(|w| w.len() == layout.dim()).cloned().collect();
    if method.bound == BoundKind::Xy {
        // The CHSH optimum at Ω = π/4 is always feasible, so start from it.
        let chsh = Method { bound: BoundKind::Chsh, ..method };
        let chsh_warm = opts.warm.iter().filter_map(|w| w.split_last().map(|(_, h)| h.to_vec())).collect();
        let base = optimize_rate(eta, model, chsh, &OptimizeOptions { warm: chsh_warm, ..opts.clone() })?;
        let mut x = base.params;
        x.push(0.0);
        starts.insert(0, x);
    }
    for k in 0..opts.starts.max(1) {
        starts.push(layout.random_start(&mut rng, k));
    }

    let rate = |x: &[f64]| layout.objective(x, eta);
    let (mut x, mut r) = run_starts(&rate, &starts);
    if r <= RATE_EPS && method.noisy {
        // Tiny positive rates live at small q; r/q keeps their sign and is easier to see.
        let scaled = |x: &[f64]| {
            let (s, _) = layout.decode(x, eta);
            let v = layout.objective(x, eta);
            if v > 0.0 {
                v / s.q()
            } else {
                v
            }
        };
        let mut probe = starts.clone();
        probe.insert(0, x.clone());
        let (xs, _) = run_starts(&scaled, &probe);
        let rs = rate(&xs);
        if rs > r {
            x = xs;
            r = rs;
        }
    }

    let (setup, omega_fixed) = layout.decode(&x, eta);
    let (raw_rate, omega) = match method.bound {
        BoundKind::Chsh => (r, FRAC_PI_4),
        BoundKind::Xy => {
            let sim = simulate(&setup)?;
            if sim.corr.is_nonlocal() {
                let b = entropy_bound_xy(&sim.corr, setup.q())?;
                let full = b.entropy - leak(&sim, method);
                if full >= r { (full, b.omega) } else { (r, omega_fixed) }
            } else {
                (r, omega_fixed)
            }
        }
    };
    Ok(KeyRatePoint {
        eta,
        rate: raw_rate.max(0.0),
        raw_rate,
        method,
        setup,
        omega,
        q: setup.q(),
        params: x,
    })
}

/// Smallest η with a positive optimized rate, by bisection on [0.7, 1].
pub fn critical_efficiency(model: Model, method: Method, tol_eta: f64, opts: &OptimizeOptions) -> Result<f64> {
    if tol_eta < 1e-4 {
        return Err(Error::DomainError(format!("tolerance {tol_eta} below 1e-4")));
    }
    let top = optimize_rate(1.0, model, method, opts)?;
    if !top.is_positive() {
        return Err(Error::BracketFailure(format!(
            "rate {} at eta = 1 is not positive for {} / {}",
            top.raw_rate,
            model.tag(),
            method.tag()
        )));
    }
    let mut warm: Vec<Vec<f64>> = vec![top.params];
    let mut failure = None;
    let eta = bisect_predicate(
        |eta| {
            let o = OptimizeOptions { warm: warm.clone(), ..opts.clone() };
            match optimize_rate(eta, model, method, &o) {
                Ok(pt) => {
                    let positive = pt.is_positive();
                    if positive {
                        warm.insert(0, pt.params);
                        warm.truncate(4);
                    }
                    positive
                }
                Err(e) => {
                    failure = Some(e);
                    false
                }
            }
        },
        0.7,
        1.0,
        tol_eta,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(eta),
    }
}
