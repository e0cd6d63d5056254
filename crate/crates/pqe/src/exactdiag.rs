//! Exact-diagonalization oracle: the lowest eigenpairs of a sector
//! Hamiltonian via Lanczos with full reorthogonalization, with a dense
//! fallback for small dimensions.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::fock::{SparseHamiltonian, StateVector};
use crate::{PqeError, Result};

/// Dense-solver crossover dimension.
const DENSE_LIMIT: usize = 512;
/// Eigenvector residual tolerance for the oracle.
const RESIDUAL_TOL: f64 = 1e-9;
/// Degeneracy resolution when extracting the first excited level.
const DEGENERACY_TOL: f64 = 1e-10;

/// Ground and first-excited energies plus the ground eigenvector.
#[derive(Debug, Clone)]
pub struct SpectralOracle {
    pub e_gs: f64,
    /// Lowest eigenvalue strictly above `e_gs` within the sector.
    pub e_es: f64,
    pub gs_vector: StateVector,
    /// All eigenvalues actually resolved (ascending).
    pub eigenvalues: Vec<f64>,
}

/// Computes the `k` lowest eigenpairs of `h`. `k` is clipped to the
/// sector dimension; for a 1x1 sector `e_es` falls back to `e_gs`.
pub fn solve(h: &SparseHamiltonian, k: usize) -> Result<SpectralOracle> {
    let dim = h.dim();
    if dim == 0 {
        return Err(PqeError::Dimension("empty sector".into()));
    }
    let k = k.min(dim);
    let (vals, vecs) = if dim <= DENSE_LIMIT {
        dense_lowest(h, k)
    } else {
        lanczos_lowest(h, k)?
    };
    let mut gs_vector = StateVector::zeros(h.basis.clone());
    gs_vector.amp.copy_from_slice(vecs[0].as_slice());
    let norm = gs_vector.norm();
    for a in &mut gs_vector.amp {
        *a /= norm;
    }
    let residual = eig_residual(h, &gs_vector.amp, vals[0]);
    if residual > RESIDUAL_TOL {
        return Err(PqeError::NonConvergence { residual });
    }
    let e_gs = vals[0];
    let e_es = vals
        .iter()
        .copied()
        .find(|&e| e > e_gs + DEGENERACY_TOL)
        .unwrap_or(e_gs);
    Ok(SpectralOracle { e_gs, e_es, gs_vector, eigenvalues: vals })
}

fn eig_residual(h: &SparseHamiltonian, v: &[f64], lambda: f64) -> f64 {
    let mut hv = vec![0.0; v.len()];
    h.matvec_into(v, &mut hv);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn dense_lowest(h: &SparseHamiltonian, k: usize) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = h.to_dense().symmetric_eigen();
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs: Vec<DVector<f64>> = order
        .iter()
        .take(k)
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (vals, vecs)
}

/// Lanczos with full reorthogonalization of every new basis vector
/// against the whole Krylov block.
fn lanczos_lowest(h: &SparseHamiltonian, k: usize) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let dim = h.dim();
    let max_iter = dim.min(600);
    let mut rng = ChaCha8Rng::seed_from_u64(0x51ab);
    let mut q = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0f64));
    q /= q.norm();
    let mut block: Vec<DVector<f64>> = vec![q.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];

    for it in 0..max_iter {
        h.matvec_into(block[it].as_slice(), &mut w);
        let mut v = DVector::from_column_slice(&w);
        let alpha = block[it].dot(&v);
        alphas.push(alpha);
        for (j, qj) in block.iter().enumerate() {
            let coef = if j == it {
                alpha
            } else if j + 1 == it {
                betas[j]
            } else {
                0.0
            };
            v.axpy(-coef, qj, 1.0);
        }
        // Full reorthogonalization pass.
        for qj in &block {
            let c = qj.dot(&v);
            v.axpy(-c, qj, 1.0);
        }
        let beta = v.norm();
        let enough = it + 1 >= 2 * k + 10 || it + 1 == max_iter;
        if beta < 1e-13 || enough {
            if beta >= 1e-13 && it + 1 < max_iter {
                // Check Ritz residuals; extend if not yet converged.
                let (vals, converged) = ritz_converged(&alphas, &betas, beta, k);
                if !converged {
                    betas.push(beta);
                    block.push(v / beta);
                    continue;
                }
                let _ = vals;
            }
            break;
        }
        betas.push(beta);
        block.push(v / beta);
    }

    let n = alphas.len();
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = alphas[i];
        if i + 1 < n {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs: Vec<DVector<f64>> = order
        .iter()
        .take(k)
        .map(|&i| {
            let y = eig.eigenvectors.column(i);
            let mut v = DVector::zeros(dim);
            for (j, qj) in block.iter().enumerate().take(n) {
                v.axpy(y[j], qj, 1.0);
            }
            v
        })
        .collect();
    Ok((vals, vecs))
}

fn ritz_converged(alphas: &[f64], betas: &[f64], beta_next: f64, k: usize) -> (Vec<f64>, bool) {
    let n = alphas.len();
    if n < k + 2 {
        return (Vec::new(), false);
    }
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = alphas[i];
        if i + 1 < n {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // Residual of Ritz pair i is |beta_next * y_last|.
    let converged = order.iter().take(k).all(|&i| {
        // Keep a wide safety margin: round-off in the reconstructed
        // eigenvector inflates the true residual above this estimate.
        (beta_next * eig.eigenvectors[(n - 1, i)]).abs() < 0.01 * RESIDUAL_TOL
    });
    (order.iter().map(|&i| eig.eigenvalues[i]).collect(), converged)
}
