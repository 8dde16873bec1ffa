use crate::distributions::{wishart_expected_logdet, NiwParams};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::model::{Dataset, Responsibilities, VariationalState};

use super::estep::eln_table;
use super::gate_distances;

const DENOM_FLOOR: f64 = 1e-300;

/// Minimizes `Σ_c coeffs_c s_c` over the simplex with `0 ≤ s_c ≤ bounds_c`.
///
/// Fractional knapsack: fill coordinates to their bound in ascending order of
/// coefficient (ties to the lower index) until the mass reaches one. If the
/// bounds sum to less than one the last coordinate absorbs the remainder.
pub fn greedy_simplex_min(coeffs: &[f64], bounds: &[f64]) -> Vec<f64> {
    let k = coeffs.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| coeffs[a].partial_cmp(&coeffs[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut s = vec![0.0; k];
    let mut left = 1.0;
    for &c in &order {
        if left <= 0.0 {
            break;
        }
        let take = bounds[c].max(0.0).min(left);
        s[c] = take;
        left -= take;
    }
    if left > 0.0 {
        if let Some(&last) = order.last() {
            s[last] += left;
        }
    }
    s
}

/// Upper bounds `Σ_{n'≠n}(ω_{c,nn'} + ω_{c,n'n}) / Σ_{n'≠n} Ω_{n'n}` of the
/// s-LP, as an N×C matrix.
pub fn s_bounds(resp: &Responsibilities) -> Matrix<f64> {
    let n = resp.n();
    let c_count = resp.experts();
    let big = resp.big_omega();
    let mut inflow = vec![0.0; n];
    for m in 0..n {
        for i in 0..n {
            inflow[i] += big[(m, i)];
        }
    }
    let mut b = Matrix::zeros(n, c_count);
    for c in 0..c_count {
        let mut incoming = vec![0.0; n];
        for m in 0..n {
            for (j, &w) in resp.row(c, m).iter().enumerate() {
                incoming[crate::model::neighbour(m, j)] += w;
            }
        }
        for i in 0..n {
            let outgoing: f64 = resp.row(c, i).iter().sum();
            b[(i, c)] = (outgoing + incoming[i]) / inflow[i].max(DENOM_FLOOR);
        }
    }
    b
}

/// Expert-softmax linearization locations: per row, minimizes
/// `Σ_c s_{nc} E log N(yⁿ | μ_c, Σ_c)` subject to the bound constraints that
/// keep every effective count non-negative.
pub fn update_s(data: &Dataset, experts: &[NiwParams<f64>], resp: &Responsibilities) -> Result<Matrix<f64>> {
    let e = eln_table(data, experts)?;
    let b = s_bounds(resp);
    let n = data.n();
    let c_count = experts.len();
    let mut s = Matrix::zeros(n, c_count);
    let mut coeffs = vec![0.0; c_count];
    for i in 0..n {
        for (c, v) in coeffs.iter_mut().enumerate() {
            *v = e[(c, i)];
        }
        let row = greedy_simplex_min(&coeffs, b.row(i));
        debug_assert!(b.row(i).iter().sum::<f64>() >= 1.0 - 1e-9);
        s.row_mut(i).copy_from_slice(&row);
    }
    Ok(s)
}

/// LP coefficients `E_{q(Λ)} log N(xⁿ | xⁿ', Λ⁻¹)` as an N×N matrix (diagonal
/// unused).
pub fn gate_coefficients(data: &Dataset, state: &VariationalState) -> Result<Matrix<f64>> {
    let dx = data.dx() as f64;
    let elogdet = wishart_expected_logdet(&state.gate_l, state.gate_eta)?;
    let base = 0.5 * elogdet - 0.5 * dx * (2.0 * std::f64::consts::PI).ln();
    let dist = gate_distances(data.x(), &state.gate_l);
    let n = data.n();
    let mut coef = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                coef[(i, j)] = base - 0.5 * state.gate_eta * dist[(i, j)];
            }
        }
    }
    Ok(coef)
}

/// Neighbour-softmax linearization locations: the simplex minimizer of the
/// linear objective, one-hot at the smallest coefficient (lower index on ties).
pub fn update_t(data: &Dataset, state: &VariationalState) -> Result<Matrix<f64>> {
    let coef = gate_coefficients(data, state)?;
    let n = data.n();
    let mut t = Matrix::zeros(n, n);
    for i in 0..n {
        let mut best = usize::MAX;
        for j in 0..n {
            if j != i && (best == usize::MAX || coef[(i, j)] < coef[(i, best)]) {
                best = j;
            }
        }
        t[(i, best)] = 1.0;
    }
    Ok(t)
}
