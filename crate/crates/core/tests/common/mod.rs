//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.
#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};

/// Maximizes f from x0 by compass search, halving the step down to tol.
pub fn compass_max<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, tol: f64) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut h = step;
    while h > tol {
        let mut moved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += dir * h;
                let fy = f(&y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    moved = true;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (x, fx)
}

/// Score ½(cosΩ·a₀ᵀT(b₀+b₁) + sinΩ·a₁ᵀT(b₀−b₁)) for unit vectors in the z–x
/// plane and T = diag(tz, tx).
pub fn score(tz: f64, tx: f64, phi: f64, omega: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    let dot = |a: f64, b: f64| tz * a.cos() * b.cos() + tx * a.sin() * b.sin();
    0.5 * (omega.cos() * (dot(phi, b0) + dot(phi, b1)) + omega.sin() * (dot(a1, b0) - dot(a1, b1)))
}

/// Largest score over all auxiliary settings a₁, b₀, b₁ by grid and compass search.
pub fn brute_beta_max(tz: f64, tx: f64, phi: f64, omega: f64) -> f64 {
    let n = 36;
    let step = std::f64::consts::TAU / n as f64;
    let f = |v: &[f64]| score(tz, tx, phi, omega, v[0], v[1], v[2]);
    let mut best = (vec![0.0; 3], f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = [i as f64 * step, j as f64 * step, k as f64 * step];
                let fv = f(&v);
                if fv > best.1 {
                    best = (v.to_vec(), fv);
                }
            }
        }
    }
    compass_max(f, &best.0, step, 1e-10).1
}

fn observable(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, s, s, -c)
}

/// POVM of a lossy ±1 measurement: elements for +1, −1 and, if `keep_loss`,
/// a separate no-click element; otherwise no-click is merged into +1.
pub fn lossy_povm(angle: f64, eta: f64, keep_loss: bool) -> Vec<Matrix2<f64>> {
    let id = Matrix2::identity();
    let plus = (id + observable(angle)) * 0.5;
    let minus = (id - observable(angle)) * 0.5;
    if keep_loss {
        vec![plus * eta, minus * eta, id * (1.0 - eta)]
    } else {
        vec![plus * eta + id * (1.0 - eta), minus * eta]
    }
}

pub fn state(theta: f64) -> Vector4<f64> {
    Vector4::new(theta.cos(), 0.0, 0.0, theta.sin())
}

/// Joint distribution ⟨ψ|Mₐ ⊗ N_b|ψ⟩.
pub fn joint(psi: &Vector4<f64>, ma: &[Matrix2<f64>], nb: &[Matrix2<f64>]) -> Vec<Vec<f64>> {
    ma.iter()
        .map(|m| nb.iter().map(|n| (psi.transpose() * m.kronecker(n) * psi)[(0, 0)]).collect())
        .collect()
}

/// ⟨A B⟩ for two-outcome POVMs with outcomes ordered +1, −1.
pub fn correlator(p: &[Vec<f64>]) -> f64 {
    p[0][0] - p[0][1] - p[1][0] + p[1][1]
}

pub fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|v| **v > 0.0).map(|v| -v * v.log2()).sum()
}

pub fn cond_entropy(p: &[Vec<f64>]) -> f64 {
    let flat: Vec<f64> = p.iter().flatten().copied().collect();
    let nb = p[0].len();
    let mb: Vec<f64> = (0..nb).map(|b| p.iter().map(|r| r[b]).sum()).collect();
    shannon(&flat) - shannon(&mb)
}

pub fn binary_entropy(z: f64) -> f64 {
    shannon(&[z, 1.0 - z])
}

pub fn matrix_entropy(m: &Matrix4<f64>) -> f64 {
    let ev = SymmetricEigen::new(*m).eigenvalues;
    shannon(&ev.iter().map(|v| v.max(0.0)).collect::<Vec<_>>())
}

fn psd_sqrt(m: &Matrix4<f64>) -> Matrix4<f64> {
    let e = SymmetricEigen::new(*m);
    let d = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    e.eigenvectors * Matrix4::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// Root fidelity as the trace norm of √ρ√σ.
pub fn root_fidelity(rho: &Matrix4<f64>, sigma: &Matrix4<f64>) -> f64 {
    let prod = psd_sqrt(rho) * psd_sqrt(sigma);
    prod.singular_values().sum().min(1.0)
}
