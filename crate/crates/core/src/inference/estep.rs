use rayon::prelude::*;

use crate::distributions::NiwParams;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, sub_vec, LowerTriangular, Matrix};
use crate::model::{neighbour, Dataset, Hyperparameters, Responsibilities, VariationalState};
use crate::special::digamma_sum;

use super::gate_distances;

/// Per-expert constants for evaluating `E_q log N(y | μ_c, Σ_c)` repeatedly.
#[derive(Debug, Clone)]
pub struct ExpertTerms {
    mu: Vec<f64>,
    chol: LowerTriangular<f64>,
    nu: f64,
    offset: f64,
}

impl ExpertTerms {
    pub fn new(p: &NiwParams<f64>) -> Result<Self> {
        let d = p.dim();
        let chol = cholesky(&p.sigma)?;
        let offset = 0.5 * digamma_sum(d, p.nu)? - 0.5 * chol.log_det() - 0.5 * d as f64 / p.kappa;
        Ok(ExpertTerms { mu: p.mu.clone(), chol, nu: p.nu, offset })
    }

    /// Expected log-density without the `−(Dy/2) log π` constant.
    pub fn eln(&self, y: &[f64]) -> f64 {
        self.offset - 0.5 * self.nu * self.chol.inv_quad(&sub_vec(y, &self.mu))
    }

    /// `ν (y−μ)ᵀ Σ⁻¹ (y−μ)`.
    pub fn scaled_mahalanobis(&self, y: &[f64]) -> f64 {
        self.nu * self.chol.inv_quad(&sub_vec(y, &self.mu))
    }
}

/// `½ Σψ((ν+1−i)/2) − ½ log det Σ − ½ Dy/κ − ½ ν (y−μ)ᵀ Σ⁻¹ (y−μ)`.
///
/// This is `E log N(y | μ, Σ)` under the NIW posterior up to the additive
/// constant `−(Dy/2) log π`.
pub fn expected_log_normal(expert: &NiwParams<f64>, y: &[f64]) -> Result<f64> {
    if y.len() != expert.dim() {
        return Err(Error::DimensionMismatch("expected_log_normal: y dimension".into()));
    }
    Ok(ExpertTerms::new(expert)?.eln(y))
}

/// All `E log N(yⁿ | μ_c, Σ_c)` as a C×N matrix.
pub(crate) fn eln_table(data: &Dataset, experts: &[NiwParams<f64>]) -> Result<Matrix<f64>> {
    let n = data.n();
    let mut e = Matrix::zeros(experts.len(), n);
    for (c, p) in experts.iter().enumerate() {
        let terms = ExpertTerms::new(p)?;
        for i in 0..n {
            e[(c, i)] = terms.eln(data.y().row(i));
        }
    }
    Ok(e)
}

/// Responsibility update.
///
/// `log ω_{c,nn'} = E log N(yⁿ|c) + E log N(yⁿ'|c) − Σ_{c'} s_{n'c'} E log N(yⁿ'|c')
/// − ½ η (xⁿ−xⁿ')ᵀ Λ (xⁿ−xⁿ')` plus terms constant in `(c, n')`, normalized per `n`.
pub fn e_step(data: &Dataset, hp: &Hyperparameters, state: &VariationalState) -> Result<Responsibilities> {
    hp.check_dataset(data)?;
    let n = data.n();
    let c_count = state.experts.len();
    let e = eln_table(data, &state.experts)?;
    let s = &state.lin.s;
    let shift: Vec<f64> = (0..n).map(|m| (0..c_count).map(|c| s[(m, c)] * e[(c, m)]).sum()).collect();
    let dist = gate_distances(data.x(), &state.gate_l);
    let half_eta = 0.5 * state.gate_eta;

    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut logw = vec![0.0; c_count * (n - 1)];
            let mut max = f64::NEG_INFINITY;
            for c in 0..c_count {
                for j in 0..n - 1 {
                    let m = neighbour(i, j);
                    let v = e[(c, i)] + e[(c, m)] - shift[m] - half_eta * dist[(i, m)];
                    if v.is_nan() {
                        return Err(Error::NonFiniteLogWeight { expert: c, n: i, neighbour: m });
                    }
                    logw[c * (n - 1) + j] = v;
                    max = max.max(v);
                }
            }
            if !max.is_finite() {
                return Err(Error::NonFiniteLogWeight { expert: 0, n: i, neighbour: neighbour(i, 0) });
            }
            let mut total = 0.0;
            for v in logw.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            logw.iter_mut().for_each(|v| *v /= total);
            Ok(logw)
        })
        .collect();

    let mut omega = vec![0.0; c_count * n * (n - 1)];
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        for c in 0..c_count {
            let dst = (c * n + i) * (n - 1);
            omega[dst..dst + n - 1].copy_from_slice(&row[c * (n - 1)..(c + 1) * (n - 1)]);
        }
    }
    Ok(Responsibilities::from_dense(c_count, n, omega))
}
