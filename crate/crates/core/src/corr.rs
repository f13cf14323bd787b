//! Domain types shared by every bound: observed correlators, the generalized
//! CHSH test family, noisy preprocessing, and the three equivalent
//! parametrizations of Eve's Bell-diagonal attack state.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};

/// Slack allowed on the quantum circle X² + Y² ≤ 4.
pub const CIRCLE_TOL: f64 = 1e-9;
/// Slack for normalization and ordering checks on weight vectors.
pub const WEIGHT_TOL: f64 = 1e-12;

/// The pair (X, Y) = (⟨A₀(B₀+B₁)⟩, ⟨A₁(B₀−B₁)⟩) after sign normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlators {
    x: f64,
    y: f64,
}

impl Correlators {
    /// Validates an already sign-normalized pair.
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::DomainError(format!("non-finite correlators ({x}, {y})")));
        }
        if x < 0.0 || y < 0.0 {
            return Err(Error::DomainError(format!(
                "correlators must be non-negative after relabelling, got ({x}, {y})"
            )));
        }
        let norm_sq = x * x + y * y;
        if norm_sq > 4.0 + CIRCLE_TOL {
            return Err(Error::QuantumSetViolation { x, y, norm_sq });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// CHSH score S = X + Y.
    pub fn chsh(&self) -> f64 {
        self.x + self.y
    }

    /// True when the point violates the CHSH inequality X + Y ≤ 2.
    pub fn is_nonlocal(&self) -> bool {
        self.chsh() > 2.0
    }
}

/// Flips the outcome labels of A₁, B₀, B₁ so that both correlators are
/// non-negative, then checks the quantum-circle constraint.
pub fn normalize_signs(x_raw: f64, y_raw: f64) -> Result<Correlators> {
    if x_raw.abs() > 2.0 + CIRCLE_TOL || y_raw.abs() > 2.0 + CIRCLE_TOL {
        return Err(Error::DomainError(format!(
            "correlators are bounded by 2 in magnitude, got ({x_raw}, {y_raw})"
        )));
    }
    Correlators::new(x_raw.abs(), y_raw.abs())
}

/// Member of the generalized CHSH family, β = (cos Ω · X + sin Ω · Y) / 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellTest {
    omega: f64,
    cos: f64,
    sin: f64,
}

impl BellTest {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega <= FRAC_PI_2 + 1e-15) {
            return Err(Error::DomainError(format!("test angle {omega} outside (0, pi/2]")));
        }
        let omega = omega.min(FRAC_PI_2);
        Ok(Self { omega, cos: omega.cos(), sin: omega.sin() })
    }

    pub fn chsh() -> Self {
        Self::new(FRAC_PI_4).expect("pi/4 is a valid test angle")
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn cos(&self) -> f64 {
        self.cos
    }

    pub fn sin(&self) -> f64 {
        self.sin
    }

    /// Largest score reachable by local deterministic strategies.
    pub fn local_bound(&self) -> f64 {
        self.cos.max(self.sin)
    }

    /// Tsirelson-type bound of the normalized family.
    pub fn quantum_bound(&self) -> f64 {
        1.0
    }

    /// Whether the test belongs to the closed-form regime Ω ≤ π/4.
    pub fn is_easy(&self) -> bool {
        self.omega <= FRAC_PI_4 + 1e-15
    }
}

pub fn beta_of(corr: &Correlators, test: &BellTest) -> f64 {
    0.5 * (test.cos * corr.x + test.sin * corr.y)
}

/// Noisy preprocessing: Alice flips each raw key bit with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    p: f64,
    q: f64,
}

impl NoiseParams {
    pub fn from_p(p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::DomainError(format!("flip probability {p} outside [0, 1/2]")));
        }
        let s = 1.0 - 2.0 * p;
        Ok(Self { p, q: s * s })
    }

    pub fn from_q(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::DomainError(format!("noise parameter q = {q} outside [0, 1]")));
        }
        Ok(Self { p: 0.5 * (1.0 - q.sqrt()), q })
    }

    pub fn noiseless() -> Self {
        Self { p: 0.0, q: 1.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Which redundancy-breaking order is imposed between the pairs (L₁, L₂)
/// and (L₃, L₄), which a σ_z rotation on Alice's side swaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightOrdering {
    /// L₁ − L₂ ≥ L₃ − L₄, used by the analytic regimes (keeps T_x ≥ 0).
    KeyDifference,
    /// L₁ + L₂ ≥ L₃ + L₄, used by the certified angle parametrization.
    PairMass,
}

/// Eve's purification Σ √Lᵢ |Φⁱ⟩|i⟩ over the Bell basis (Φ⁺, Ψ⁻, Φ⁻, Ψ⁺).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellDiagonalWeights {
    l: [f64; 4],
    ordering: WeightOrdering,
}

impl BellDiagonalWeights {
    pub fn new(l: [f64; 4], ordering: WeightOrdering) -> Result<Self> {
        if l.iter().any(|v| !v.is_finite() || *v < -WEIGHT_TOL) {
            return Err(Error::InvariantViolation(format!("negative weight in {l:?}")));
        }
        let sum: f64 = l.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvariantViolation(format!("weights sum to {sum}, not 1")));
        }
        if l[0] < l[1] - WEIGHT_TOL || l[2] < l[3] - WEIGHT_TOL {
            return Err(Error::InvariantViolation(format!(
                "weights {l:?} violate L1 >= L2, L3 >= L4"
            )));
        }
        let ordered = match ordering {
            WeightOrdering::KeyDifference => l[0] - l[1] >= l[2] - l[3] - WEIGHT_TOL,
            WeightOrdering::PairMass => l[0] + l[1] >= l[2] + l[3] - WEIGHT_TOL,
        };
        if !ordered {
            return Err(Error::InvariantViolation(format!(
                "weights {l:?} violate the {ordering:?} ordering"
            )));
        }
        Ok(Self { l: l.map(|v| v.max(0.0)), ordering })
    }

    pub(crate) fn from_raw(l: [f64; 4], ordering: WeightOrdering) -> Self {
        Self { l: l.map(|v| v.max(0.0)), ordering }
    }

    pub fn values(&self) -> [f64; 4] {
        self.l
    }

    pub fn ordering(&self) -> WeightOrdering {
        self.ordering
    }

    /// Raw correlation components (T_z, T_x, T_p); T_x may be negative under
    /// [`WeightOrdering::PairMass`].
    pub fn correlation_components(&self) -> [f64; 3] {
        let [l1, l2, l3, l4] = self.l;
        [(l1 - l2) + (l3 - l4), (l1 - l2) - (l3 - l4), l1 + l2 - l3 - l4]
    }
}

/// Correlation-strength coordinates of a Bell-diagonal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TVector {
    pub tz: f64,
    pub tx: f64,
    pub tp: f64,
}

impl TVector {
    pub fn new(tz: f64, tx: f64, tp: f64) -> Result<Self> {
        let t = Self { tz, tx, tp };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let Self { tz, tx, tp } = *self;
        let tol = WEIGHT_TOL;
        let ok = tx >= -tol
            && tx <= tz + tol
            && tz <= 1.0 + tol
            && tp >= tz + tx - 1.0 - tol
            && tp <= 1.0 - (tz - tx) + tol;
        if ok {
            Ok(())
        } else {
            Err(Error::InvariantViolation(format!("T vector {self:?} outside its box")))
        }
    }
}

pub fn weights_to_t(l: &BellDiagonalWeights) -> Result<TVector> {
    let [tz, tx, tp] = l.correlation_components();
    let t = TVector { tz, tx, tp };
    t.validate()?;
    Ok(t)
}

pub fn t_to_weights(t: &TVector) -> Result<BellDiagonalWeights> {
    t.validate()?;
    let TVector { tz, tx, tp } = *t;
    let l = [
        0.25 * (1.0 + tp + tz + tx),
        0.25 * (1.0 + tp - tz - tx),
        0.25 * (1.0 - tp + tz - tx),
        0.25 * (1.0 - tp - tz + tx),
    ];
    BellDiagonalWeights::new(l, WeightOrdering::KeyDifference)
}

/// Four-angle chart (α, μ, ξ, φ) of the certified search domain
/// [0, π/4]³ × [0, π/2]; φ is Alice's key-generating direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleModel {
    pub alpha: f64,
    pub mu: f64,
    pub xi: f64,
    pub phi: f64,
}

impl AngleModel {
    pub const DOMAIN: [(f64, f64); 4] =
        [(0.0, FRAC_PI_4), (0.0, FRAC_PI_4), (0.0, FRAC_PI_4), (0.0, FRAC_PI_2)];

    pub fn new(alpha: f64, mu: f64, xi: f64, phi: f64) -> Result<Self> {
        let m = Self { alpha, mu, xi, phi };
        for (v, (lo, hi)) in m.as_array().iter().zip(Self::DOMAIN) {
            if !(*v >= lo - 1e-12 && *v <= hi + 1e-12) {
                return Err(Error::DomainError(format!("angle model {m:?} outside its box")));
            }
        }
        Ok(m)
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Self { alpha: x[0], mu: x[1], xi: x[2], phi: x[3] }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha, self.mu, self.xi, self.phi]
    }

    /// Unit vector √L.
    pub fn sqrt_weights(&self) -> [f64; 4] {
        let (sa, ca) = self.alpha.sin_cos();
        let (sm, cm) = self.mu.sin_cos();
        let (sx, cx) = self.xi.sin_cos();
        [ca * cm, ca * sm, sa * cx, sa * sx]
    }
}

pub fn angles_to_weights(x: &AngleModel) -> BellDiagonalWeights {
    let v = x.sqrt_weights();
    BellDiagonalWeights::from_raw(v.map(|c| c * c), WeightOrdering::PairMass)
}
