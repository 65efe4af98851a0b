//! Three-channel FastICA: eigen-whitening followed by the symmetric
//! fixed-point iteration with a `tanh` contrast.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::trace::NormalizedWindow;

pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Whitened-covariance eigenvalues at or below this make the input singular.
pub const MIN_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct IcaResult {
    /// Estimated sources, one row per component.
    pub components: [Vec<f64>; 3],
    /// Rotation applied to the whitened input; rows have unit norm.
    pub unmixing: Matrix3<f64>,
    /// Maps centred input channels to whitened channels.
    pub whitening: Matrix3<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn apply(m: &Matrix3<f64>, rows: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
    let n = rows[0].len();
    std::array::from_fn(|r| {
        (0..n)
            .map(|t| m[(r, 0)] * rows[0][t] + m[(r, 1)] * rows[1][t] + m[(r, 2)] * rows[2][t])
            .collect()
    })
}

// W <- (W W^T)^{-1/2} W
fn symmetric_decorrelation(w: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = Matrix3::from_diagonal(
        &eig.eigenvalues
            .map(|v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt()),
    );
    eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w
}

/// Separates the three normalized channels into independent components.
///
/// The iteration starts from the identity rotation, so the result is fully
/// determined by the input. Running out of iterations is not an error: the
/// last iterate is returned with `converged = false`.
pub fn fastica_3ch(window: &NormalizedWindow, max_iter: usize, tol: f64) -> Result<IcaResult> {
    let n = window.len();
    if n < 3 {
        return Err(Error::SignalTooShort {
            len: n,
            required: 2,
        });
    }
    let centred: [Vec<f64>; 3] = std::array::from_fn(|c| {
        let m = window.channels[c].iter().sum::<f64>() / n as f64;
        window.channels[c].iter().map(|v| v - m).collect()
    });

    let mut cov = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let s: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            cov[(i, j)] = s / (n - 1) as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    if let Some(min) = eig.eigenvalues.iter().copied().reduce(f64::min) {
        if !(min > MIN_EIGENVALUE) {
            return Err(Error::degenerate(
                "covariance",
                format!("smallest eigenvalue {min:.3e} is singular"),
            ));
        }
    }
    let whitening = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let z = apply(&whitening, &centred);

    let mut w = Matrix3::identity();
    let mut converged = false;
    let mut iterations = 0;
    let inv_n = 1.0 / n as f64;
    while iterations < max_iter {
        iterations += 1;
        let mut next = Matrix3::zeros();
        for r in 0..3 {
            let row = w.row(r);
            let mut ezg = Vector3::zeros();
            let mut eg_prime = 0.0;
            for ((&z0, &z1), &z2) in z[0].iter().zip(&z[1]).zip(&z[2]) {
                let y: f64 = row[0] * z0 + row[1] * z1 + row[2] * z2;
                let g = y.tanh();
                ezg += Vector3::new(z0, z1, z2) * g;
                eg_prime += 1.0 - g * g;
            }
            let updated = ezg * inv_n - row.transpose() * (eg_prime * inv_n);
            next.set_row(r, &updated.transpose());
        }
        let next = symmetric_decorrelation(&next);
        let change = (0..3)
            .map(|r| 1.0 - next.row(r).dot(&w.row(r)).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < tol {
            converged = true;
            break;
        }
    }

    Ok(IcaResult {
        components: apply(&w, &z),
        unmixing: w,
        whitening,
        converged,
        iterations,
    })
}
