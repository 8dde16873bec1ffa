use rayon::prelude::*;

use crate::distributions::sample_bartlett_factor;
use crate::error::{Error, Result};
use crate::linalg::{LowerTriangular, Matrix};
use crate::model::{column_moments, Dataset, FitConfig, Hyperparameters, Responsibilities};
use crate::rng::Stream;

use super::weighted_scatter;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const DIAG_FLOOR: f64 = 1e-10;

/// The stochastic gate objective as a function of the Cholesky factor `L`:
///
/// `f(L) = −η₀ log det L + Σₙ E_A log Σ_{n'≠n} exp(−½ ‖Aᵀ Lᵀ (xⁿ − xⁿ')‖²)
///        + (η₀/2) tr(Lᵀ M L)`,  `M = Λ₀⁻¹ + Σₙ Σ_{n'} Ω_{nn'} (xⁿ−xⁿ')(xⁿ−xⁿ')ᵀ`.
#[derive(Debug, Clone)]
pub struct GateObjective {
    x: Matrix<f64>,
    m: Matrix<f64>,
    eta0: f64,
}

impl GateObjective {
    pub fn new(data: &Dataset, hp: &Hyperparameters, resp: &Responsibilities) -> Result<Self> {
        hp.check_dataset(data)?;
        // differences are translation invariant; centring only helps conditioning
        let (mean, _) = column_moments(data.x());
        let mut x = data.x().clone();
        for i in 0..x.rows() {
            for (v, m) in x.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let m = hp.lambda0_inv().add(&weighted_scatter(&x, resp.big_omega()))?;
        Ok(GateObjective { x, m, eta0: hp.eta0 })
    }

    pub fn trace_matrix(&self) -> &Matrix<f64> {
        &self.m
    }

    /// Monte Carlo value and gradient (lower triangle) for fixed Bartlett draws.
    pub fn value_and_gradient(&self, l: &LowerTriangular<f64>, draws: &[LowerTriangular<f64>]) -> Result<(f64, Matrix<f64>)> {
        let d = l.dim();
        let lm = l.matrix();
        let ml = self.m.matmul(lm)?;
        let mut value = 0.0;
        let mut grad = Matrix::zeros(d, d);
        for i in 0..d {
            let lii = lm[(i, i)];
            value -= self.eta0 * lii.ln();
            grad[(i, i)] -= self.eta0 / lii;
            for j in 0..=i {
                grad[(i, j)] += self.eta0 * ml[(i, j)];
            }
        }
        let mut tr = 0.0;
        for i in 0..d {
            for j in 0..d {
                tr += lm[(i, j)] * ml[(i, j)];
            }
        }
        value += 0.5 * self.eta0 * tr;

        let scale = 1.0 / draws.len() as f64;
        for a in draws {
            let (v, g) = self.lse_term(l, a)?;
            value += scale * v;
            for i in 0..d {
                for j in 0..=i {
                    grad[(i, j)] += scale * g[(i, j)];
                }
            }
        }
        if !value.is_finite() {
            return Err(Error::NonFinite("gate objective".into()));
        }
        Ok((value, grad))
    }

    /// `Σₙ LSE_{n'≠n}(−½‖wₙ − w_{n'}‖²)` with `W = X L A`, and its gradient
    /// in `L` with `A` fixed.
    fn lse_term(&self, l: &LowerTriangular<f64>, a: &LowerTriangular<f64>) -> Result<(f64, Matrix<f64>)> {
        let b = l.mul(a);
        let w = super::transform_rows(&self.x, &b);
        let n = w.rows();
        let d = w.cols();

        // per-row log-sum-exp and softmax row of P
        let rows: Vec<Result<(f64, Vec<f64>)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let wi = w.row(i);
                let mut logits = vec![f64::NEG_INFINITY; n];
                let mut max = f64::NEG_INFINITY;
                for (j, lj) in logits.iter_mut().enumerate() {
                    if j == i {
                        continue;
                    }
                    let q: f64 = wi.iter().zip(w.row(j)).map(|(p, q)| (p - q) * (p - q)).sum();
                    if !q.is_finite() {
                        return Err(Error::NonFinite(format!("gate quadratic form between rows {i} and {j}")));
                    }
                    *lj = -0.5 * q;
                    max = max.max(*lj);
                }
                let mut total = 0.0;
                for v in logits.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                logits.iter_mut().for_each(|v| *v /= total);
                Ok((max + total.ln(), logits))
            })
            .collect();
        let mut p = Vec::with_capacity(n);
        let mut value = 0.0;
        for r in rows {
            let (lse, row) = r?;
            value += lse;
            p.push(row);
        }

        // K W with K = I − P − Pᵀ + diag(colsum P)
        let kw: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut colsum = 0.0;
                let mut acc: Vec<f64> = vec![0.0; d];
                for j in 0..n {
                    let pij = p[i][j];
                    let pji = p[j][i];
                    colsum += pji;
                    let c = pij + pji;
                    if c != 0.0 {
                        for (a, wj) in acc.iter_mut().zip(w.row(j)) {
                            *a -= c * wj;
                        }
                    }
                }
                for (a, wi) in acc.iter_mut().zip(w.row(i)) {
                    *a += (1.0 + colsum) * wi;
                }
                acc
            })
            .collect();

        // ∂/∂B = −Xᵀ K W, then ∂/∂L = (∂/∂B) Aᵀ
        let dx = self.x.cols();
        let mut gb = Matrix::zeros(dx, d);
        for (i, kwi) in kw.iter().enumerate() {
            let xi = self.x.row(i);
            for r in 0..dx {
                if xi[r] == 0.0 {
                    continue;
                }
                for c in 0..d {
                    gb[(r, c)] -= xi[r] * kwi[c];
                }
            }
        }
        let gl = gb.matmul(&a.matrix().transpose())?;
        Ok((value, gl.lower_part()))
    }
}

/// `count` independent Bartlett factors for a `d`-dimensional Wishart with
/// `eta` degrees of freedom.
pub fn sample_bartlett_draws(d: usize, eta: f64, count: usize, rng: &mut Stream) -> Result<Vec<LowerTriangular<f64>>> {
    (0..count).map(|_| sample_bartlett_factor(d, eta, rng)).collect()
}

/// Draws `mc_samples` Bartlett factors from `rng` and evaluates the gate
/// objective and its gradient at `l`.
pub fn gate_objective_and_gradient(
    data: &Dataset,
    hp: &Hyperparameters,
    resp: &Responsibilities,
    l: &LowerTriangular<f64>,
    mc_samples: usize,
    rng: &mut Stream,
) -> Result<(f64, Matrix<f64>)> {
    if mc_samples == 0 {
        return Err(Error::InvalidInput("mc_samples must be positive".into()));
    }
    let obj = GateObjective::new(data, hp, resp)?;
    let draws = sample_bartlett_draws(hp.dx(), hp.eta0, mc_samples, rng)?;
    obj.value_and_gradient(l, &draws)
}

/// Result of the stochastic gate M-step.
#[derive(Debug, Clone)]
pub struct GateStep {
    pub l: LowerTriangular<f64>,
    /// Monte Carlo objective at the last evaluated iterate.
    pub objective: f64,
}

/// Adam on the lower-triangular entries of `L` with fresh Bartlett draws each
/// step; diagonal entries are kept at or above `1e-10`.
pub fn m_step_gate_stochastic(
    data: &Dataset,
    hp: &Hyperparameters,
    resp: &Responsibilities,
    l_init: &LowerTriangular<f64>,
    config: &FitConfig,
    rng: &mut Stream,
) -> Result<GateStep> {
    let obj = GateObjective::new(data, hp, resp)?;
    let d = l_init.dim();
    let mut l = l_init.matrix().clone();
    let mut m1: Matrix<f64> = Matrix::zeros(d, d);
    let mut m2: Matrix<f64> = Matrix::zeros(d, d);
    let lr = config.adam_learning_rate;
    let mut objective = f64::NAN;
    for step in 1..=config.gate_subiterations {
        let draws = sample_bartlett_draws(d, hp.eta0, config.gate_mc_samples, rng)?;
        let current = LowerTriangular::from_lower(&l);
        let (v, g) = obj.value_and_gradient(&current, &draws)?;
        objective = v;
        let c1 = 1.0 - ADAM_BETA1.powi(step as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(step as i32);
        for i in 0..d {
            for j in 0..=i {
                let gij = g[(i, j)];
                m1[(i, j)] = ADAM_BETA1 * m1[(i, j)] + (1.0 - ADAM_BETA1) * gij;
                m2[(i, j)] = ADAM_BETA2 * m2[(i, j)] + (1.0 - ADAM_BETA2) * gij * gij;
                let mhat = m1[(i, j)] / c1;
                let vhat = m2[(i, j)] / c2;
                l[(i, j)] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
            if l[(i, i)] < DIAG_FLOOR {
                l[(i, i)] = DIAG_FLOOR;
            }
        }
        if !l.is_finite() {
            return Err(Error::NonFinite(format!("gate factor after step {step}")));
        }
    }
    Ok(GateStep { l: LowerTriangular::new(l)?, objective })
}
