use crate::distributions::NiwParams;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, eigen_reassemble, sub_vec, sym_eigen, LowerTriangular, Matrix};
use crate::model::{Dataset, Hyperparameters, Responsibilities};

use super::weighted_scatter;

/// Effective counts `r_{nc} = Σ_{n'≠n} (ω_{c,nn'} + ω_{c,n'n} − s_{nc} Ω_{n'n})`,
/// floored at `r_floor`.
pub fn effective_counts(resp: &Responsibilities, s: &Matrix<f64>, r_floor: f64) -> Matrix<f64> {
    let n = resp.n();
    let c_count = resp.experts();
    let big = resp.big_omega();
    let mut inflow = vec![0.0; n];
    for m in 0..n {
        for i in 0..n {
            inflow[i] += big[(m, i)];
        }
    }
    let mut r = Matrix::zeros(n, c_count);
    for c in 0..c_count {
        let mut incoming = vec![0.0; n];
        for m in 0..n {
            for (j, &w) in resp.row(c, m).iter().enumerate() {
                incoming[crate::model::neighbour(m, j)] += w;
            }
        }
        for i in 0..n {
            let outgoing: f64 = resp.row(c, i).iter().sum();
            let v = outgoing + incoming[i] - s[(i, c)] * inflow[i];
            r[(i, c)] = v.max(r_floor);
        }
    }
    r
}

/// Expert posteriors: `κ_c = κ₀ + R_c`, `ν_c = ν₀ + R_c`,
/// `μ_c = (κ₀μ₀ + Σₙ r_{nc} yⁿ)/κ_c` and
/// `Σ_c = Σ₀ + κ₀μ₀μ₀ᵀ − κ_cμ_cμ_cᵀ + Σₙ r_{nc} yⁿyⁿᵀ`, the last evaluated in
/// the equivalent centred form.
pub fn m_step_experts(
    data: &Dataset,
    hp: &Hyperparameters,
    resp: &Responsibilities,
    s: &Matrix<f64>,
    r_floor: f64,
) -> Result<Vec<NiwParams<f64>>> {
    hp.check_dataset(data)?;
    let r = effective_counts(resp, s, r_floor);
    let dy = data.dy();
    let mut experts = Vec::with_capacity(resp.experts());
    for c in 0..resp.experts() {
        let total: f64 = (0..data.n()).map(|i| r[(i, c)]).sum();
        let kappa = hp.kappa0 + total;
        let nu = hp.nu0 + total;
        let mut mu: Vec<f64> = hp.mu0.iter().map(|v| hp.kappa0 * v).collect();
        for i in 0..data.n() {
            for (m, y) in mu.iter_mut().zip(data.y().row(i)) {
                *m += r[(i, c)] * y;
            }
        }
        mu.iter_mut().for_each(|m| *m /= kappa);
        let mut sigma = hp.sigma0.clone();
        let d0 = sub_vec(&hp.mu0, &mu);
        sigma.add_outer(hp.kappa0, &d0, &d0);
        for i in 0..data.n() {
            let e = sub_vec(data.y().row(i), &mu);
            sigma.add_outer(r[(i, c)], &e, &e);
        }
        sigma.symmetrize();
        if !sigma.is_finite() {
            return Err(Error::NonFinite(format!("expert {c} scale matrix")));
        }
        debug_assert_eq!(sigma.rows(), dy);
        cholesky(&sigma)?;
        experts.push(NiwParams { mu, kappa, sigma, nu });
    }
    Ok(experts)
}

/// Closed-form gate update
/// `Λ⁻¹ = Λ₀⁻¹ + Σₙ Σ_{n'≠n} (Ω_{nn'} − t_{nn'})(xⁿ−xⁿ')(xⁿ−xⁿ')ᵀ`
/// with eigenvalues of the right-hand side clamped below at `eig_floor`.
///
/// Returns the Cholesky factor of `Λ`.
pub fn m_step_gate_closed(
    data: &Dataset,
    hp: &Hyperparameters,
    resp: &Responsibilities,
    t: &Matrix<f64>,
    eig_floor: f64,
) -> Result<LowerTriangular<f64>> {
    hp.check_dataset(data)?;
    let n = data.n();
    let big = resp.big_omega();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[(i, j)] = big[(i, j)] - t[(i, j)];
            }
        }
    }
    if w.max_abs() == 0.0 {
        return cholesky(&hp.lambda0);
    }
    let inv_scale = hp.lambda0_inv().add(&weighted_scatter(data.x(), &w))?;
    let (values, vectors) = sym_eigen(&inv_scale)?;
    let mut scale = eigen_reassemble(&values, &vectors, |v| 1.0 / v.max(eig_floor));
    scale.symmetrize();
    cholesky(&scale)
}
