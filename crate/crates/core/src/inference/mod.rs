//! Mean-field variational Bayes: E-step, expert and gate M-steps, the
//! linearization LPs, the ELBO and the outer loop.

mod elbo;
mod estep;
mod fit;
mod gate;
mod lp;
mod mstep;

pub use elbo::{elbo, elbo_terms, ElboTerms};
pub use estep::{e_step, expected_log_normal, ExpertTerms};
pub use fit::{fit, fit_from, fit_observed, ElboRecord, ElboTrace};
pub use gate::{
    gate_objective_and_gradient, m_step_gate_stochastic, sample_bartlett_draws, GateObjective, GateStep,
};
pub use lp::{greedy_simplex_min, gate_coefficients, s_bounds, update_s, update_t};
pub use mstep::{effective_counts, m_step_experts, m_step_gate_closed};

use crate::linalg::{LowerTriangular, Matrix};
use rayon::prelude::*;

/// Rows `x_nᵀ L`, so that `‖z_n − z_m‖² = (x_n − x_m)ᵀ L Lᵀ (x_n − x_m)`.
pub(crate) fn transform_rows(x: &Matrix<f64>, l: &LowerTriangular<f64>) -> Matrix<f64> {
    let (n, d) = (x.rows(), x.cols());
    let mut z = Matrix::zeros(n, d);
    for i in 0..n {
        let xi = x.row(i);
        let zi = z.row_mut(i);
        for (j, zij) in zi.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, xk) in xi.iter().enumerate().skip(j) {
                s += xk * l.get(k, j);
            }
            *zij = s;
        }
    }
    z
}

/// Squared Euclidean distances between all row pairs.
pub(crate) fn pairwise_sq_dists(z: &Matrix<f64>) -> Matrix<f64> {
    let n = z.rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = z.row(i);
            (0..n)
                .map(|j| zi.iter().zip(z.row(j)).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect()
        })
        .collect();
    Matrix::from_vec(n, n, rows.into_iter().flatten().collect()).unwrap()
}

/// Gate distances `(x_n − x_m)ᵀ L Lᵀ (x_n − x_m)`.
pub fn gate_distances(x: &Matrix<f64>, l: &LowerTriangular<f64>) -> Matrix<f64> {
    pairwise_sq_dists(&transform_rows(x, l))
}

/// `Xᵀ (diag(rowsum W) + diag(colsum W) − W − Wᵀ) X = Σ_{n,m} W_{nm} (x_n − x_m)(x_n − x_m)ᵀ`.
pub(crate) fn weighted_scatter(x: &Matrix<f64>, w: &Matrix<f64>) -> Matrix<f64> {
    let (n, d) = (x.rows(), x.cols());
    let mut deg = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let v = w[(i, j)];
            deg[i] += v;
            deg[j] += v;
        }
    }
    // (W + Wᵀ) X
    let wx: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; d];
            for j in 0..n {
                let v = w[(i, j)] + w[(j, i)];
                if v != 0.0 {
                    for (a, b) in acc.iter_mut().zip(x.row(j)) {
                        *a += v * b;
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = Matrix::zeros(d, d);
    for i in 0..n {
        let xi = x.row(i);
        for a in 0..d {
            for b in 0..d {
                out[(a, b)] += xi[a] * (deg[i] * xi[b] - wx[i][b]);
            }
        }
    }
    out.symmetrize();
    out
}
