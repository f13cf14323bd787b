//! Entropy primitives and Eve's conditional state given Alice's outcome +1.

use nalgebra::{Matrix4, SymmetricEigen};

use crate::corr::BellDiagonalWeights;
use crate::error::{Error, Result};

/// Eigenvalues this far below zero are treated as rounding drift.
pub const PSD_TOL: f64 = 1e-10;

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Binary entropy with the argument clamped to [0, 1].
pub fn h(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    plogp(z) + plogp(1.0 - z)
}

pub fn binary_entropy(z: f64) -> Result<f64> {
    if !(z >= -1e-12 && z <= 1.0 + 1e-12) {
        return Err(Error::DomainError(format!("binary entropy argument {z} outside [0, 1]")));
    }
    Ok(h(z))
}

/// Shannon entropy in bits of a probability vector (0 log 0 = 0).
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().map(|&v| plogp(v)).sum()
}

pub fn n_q(z: f64, q: f64) -> f64 {
    let rad = 1.0 - 4.0 * (1.0 - q) * z * (1.0 - z);
    0.5 * (1.0 + rad.max(0.0).sqrt())
}

pub fn h_q(z: f64, q: f64) -> f64 {
    h(z) - h(n_q(z, q))
}

/// Eve's information at the local bound, 1 − h((1 + √q)/2).
pub fn info_local(q: f64) -> f64 {
    1.0 - h(0.5 * (1.0 + q.max(0.0).sqrt()))
}

pub fn shannon_entropy(l: &BellDiagonalWeights) -> f64 {
    entropy_bits(&l.values())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalState {
    pub rho: Matrix4<f64>,
    pub weights: BellDiagonalWeights,
    pub phi: f64,
    pub q: f64,
}

pub(crate) fn conditional_matrix(l: [f64; 4], phi: f64, q: f64) -> Matrix4<f64> {
    let [l1, l2, l3, l4] = l;
    let (s, c) = phi.sin_cos();
    let a = c * (l1 * l3 * q).sqrt();
    let b = s * (l1 * l4 * q).sqrt();
    let d = s * (l2 * l3 * q).sqrt();
    let e = -c * (l2 * l4 * q).sqrt();
    Matrix4::new(
        l1, 0.0, a, b, //
        0.0, l2, d, e, //
        a, d, l3, 0.0, //
        b, e, 0.0, l4,
    )
}

pub fn conditional_state(l: &BellDiagonalWeights, phi: f64, q: f64) -> ConditionalState {
    ConditionalState { rho: conditional_matrix(l.values(), phi, q), weights: *l, phi, q }
}

fn checked_spectrum(m: &Matrix4<f64>) -> Result<[f64; 4]> {
    let eig = SymmetricEigen::try_new(*m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut out = [0.0; 4];
    for (o, &v) in out.iter_mut().zip(eig.eigenvalues.iter()) {
        if v < -PSD_TOL {
            return Err(Error::NumericalFailure(format!("eigenvalue {v} is not PSD")));
        }
        *o = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Von Neumann entropy in bits of a 4×4 density matrix.
pub fn von_neumann_entropy(m: &Matrix4<f64>) -> Result<f64> {
    Ok(entropy_bits(&checked_spectrum(m)?))
}

/// Uhlmann fidelity tr√(√ρ σ √ρ) of two real 4×4 density matrices.
pub fn fidelity(rho: &Matrix4<f64>, sigma: &Matrix4<f64>) -> Result<f64> {
    let eig = SymmetricEigen::new(*rho);
    let sq = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let sqrt_rho = eig.eigenvectors * Matrix4::from_diagonal(&sq) * eig.eigenvectors.transpose();
    let inner = sqrt_rho * sigma * sqrt_rho;
    let inner = 0.5 * (inner + inner.transpose());
    let ev = SymmetricEigen::new(inner).eigenvalues;
    if ev.iter().any(|v| *v < -PSD_TOL) {
        return Err(Error::NumericalFailure("fidelity kernel is not PSD".into()));
    }
    Ok(ev.iter().map(|v| v.max(0.0).sqrt()).sum::<f64>().min(1.0))
}

pub fn eve_cond_entropy(l: &BellDiagonalWeights, phi: f64, q: f64) -> Result<f64> {
    von_neumann_entropy(&conditional_matrix(l.values(), phi, q))
}

/// Eigenvalues of Eve's conditional state at φ = 0, where it splits into two 2×2 blocks.
pub fn phi0_spectrum(l: [f64; 4], q: f64) -> [f64; 4] {
    let [l1, l2, l3, l4] = l;
    let r13 = (4.0 * l1 * l3 * q + (l1 - l3).powi(2)).sqrt();
    let r24 = (4.0 * l2 * l4 * q + (l2 - l4).powi(2)).sqrt();
    [
        0.5 * (l1 + l3 + r13),
        (0.5 * (l1 + l3 - r13)).max(0.0),
        0.5 * (l2 + l4 + r24),
        (0.5 * (l2 + l4 - r24)).max(0.0),
    ]
}

pub fn eve_cond_entropy_phi0(l: &BellDiagonalWeights, q: f64) -> f64 {
    entropy_bits(&phi0_spectrum(l.values(), q))
}
