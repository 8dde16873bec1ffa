use std::f64::consts::{LN_2, PI};

use crate::distributions::wishart_expected_logdet;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, sub_vec};
use crate::model::{Dataset, Hyperparameters, VariationalState};
use crate::special::{digamma_sum, multivariate_log_gamma};

use super::estep::ExpertTerms;
use super::{effective_counts, gate_distances};

/// The three pieces of the ELBO: `total = full_conditional + log_prior − log_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    /// Linearized pseudolikelihood, `Σₙ E log p(yⁿ, uⁿ, zⁿ | rest)`.
    pub full_conditional: f64,
    /// `E_q log p(θ)`.
    pub log_prior: f64,
    /// `E_q log q(θ)`.
    pub log_q: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.full_conditional + self.log_prior - self.log_q
    }
}

/// ELBO of the current state (see [`elbo_terms`]).
pub fn elbo(data: &Dataset, hp: &Hyperparameters, state: &VariationalState, r_floor: f64) -> Result<f64> {
    Ok(elbo_terms(data, hp, state, r_floor)?.total())
}

/// Term-by-term ELBO with the expert counts `r` floored at `r_floor`, as in
/// the expert M-step.
pub fn elbo_terms(data: &Dataset, hp: &Hyperparameters, state: &VariationalState, r_floor: f64) -> Result<ElboTerms> {
    hp.check_dataset(data)?;
    let n = data.n();
    let dy = data.dy();
    let dx = data.dx();
    let dyf = dy as f64;
    let dxf = dx as f64;

    // full conditional
    let r = effective_counts(&state.resp, &state.lin.s, r_floor);
    let log_pi_const = -0.5 * dyf * PI.ln();
    let mut full = 0.0;
    for (c, expert) in state.experts.iter().enumerate() {
        let terms = ExpertTerms::new(expert)?;
        for i in 0..n {
            full += r[(i, c)] * (terms.eln(data.y().row(i)) + log_pi_const);
        }
    }
    let dist = gate_distances(data.x(), &state.gate_l);
    let big = state.resp.big_omega();
    let mut gate = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                gate += (big[(i, j)] - state.lin.t[(i, j)]) * dist[(i, j)];
            }
        }
    }
    full -= 0.5 * state.gate_eta * gate;

    // gate prior and posterior
    let eta = state.gate_eta;
    let lam = state.gate_scale();
    let elogdet_lam = wishart_expected_logdet(&state.gate_l, eta)?;
    let lambda0_logdet = cholesky(&hp.lambda0)?.log_det();
    let tr_l0inv_lam: f64 = (0..dx).map(|i| (0..dx).map(|j| hp.lambda0_inv()[(i, j)] * lam[(j, i)]).sum::<f64>()).sum();
    let mut log_prior = -0.5 * hp.eta0 * dxf * LN_2 - 0.5 * hp.eta0 * lambda0_logdet
        - multivariate_log_gamma(dx, 0.5 * hp.eta0)?
        + 0.5 * (hp.eta0 - dxf - 1.0) * elogdet_lam
        - 0.5 * eta * tr_l0inv_lam;
    let mut log_q = -0.5 * eta * dxf * LN_2 - 0.5 * eta * state.gate_l.log_det() - multivariate_log_gamma(dx, 0.5 * eta)?
        + 0.5 * (eta - dxf - 1.0) * elogdet_lam
        - 0.5 * eta * dxf;

    // expert priors and posteriors
    let sigma0_logdet = cholesky(&hp.sigma0)?.log_det();
    let mvlg_nu0 = multivariate_log_gamma(dy, 0.5 * hp.nu0)?;
    let log_2pi = (2.0 * PI).ln();
    for expert in &state.experts {
        let chol = cholesky(&expert.sigma)?;
        let logdet = chol.log_det();
        let elogdet = -digamma_sum(dy, expert.nu)? - dyf * LN_2 + logdet;
        let dmu = sub_vec(&expert.mu, &hp.mu0);
        let quad = dyf / expert.kappa + expert.nu * chol.inv_quad(&dmu);
        // tr(Σ₀ Σ_c⁻¹)
        let mut tr = 0.0;
        for j in 0..dy {
            tr += chol.solve(&hp.sigma0.column(j))[j];
        }
        log_prior += -0.5 * dyf * log_2pi + 0.5 * dyf * hp.kappa0.ln() - 0.5 * elogdet - 0.5 * hp.kappa0 * quad
            + 0.5 * hp.nu0 * sigma0_logdet
            - 0.5 * hp.nu0 * dyf * LN_2
            - mvlg_nu0
            - 0.5 * (hp.nu0 + dyf + 1.0) * elogdet
            - 0.5 * expert.nu * tr;
        log_q += -0.5 * dyf * log_2pi + 0.5 * dyf * expert.kappa.ln() - 0.5 * elogdet - 0.5 * dyf
            + 0.5 * expert.nu * logdet
            - 0.5 * expert.nu * dyf * LN_2
            - multivariate_log_gamma(dy, 0.5 * expert.nu)?
            - 0.5 * (expert.nu + dyf + 1.0) * elogdet
            - 0.5 * expert.nu * dyf;
    }

    let terms = ElboTerms { full_conditional: full, log_prior, log_q };
    if !terms.total().is_finite() {
        return Err(Error::NonFinite(format!("ELBO terms {terms:?}")));
    }
    Ok(terms)
}
