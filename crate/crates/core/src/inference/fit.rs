use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{init_state, Dataset, FitConfig, GateMode, Hyperparameters, VariationalState};
use crate::rng::stream;

use super::{
    e_step, elbo, gate_objective_and_gradient, m_step_experts, m_step_gate_closed, m_step_gate_stochastic, update_s,
    update_t,
};

/// One row of the ELBO trace. Iteration 0 is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboRecord {
    pub iteration: usize,
    pub elbo: f64,
    pub gate_objective: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ElboTrace {
    pub records: Vec<ElboRecord>,
}

impl ElboTrace {
    pub fn initial(&self) -> Option<f64> {
        self.records.first().map(|r| r.elbo)
    }

    pub fn last(&self) -> Option<f64> {
        self.records.last().map(|r| r.elbo)
    }
}

// stream ids under the fit seed
const STREAM_GATE: u64 = 1 << 32;
const STREAM_MONITOR: u64 = 2 << 32;

/// Initializes from `config.seed` and runs [`fit_from`].
pub fn fit(data: &Dataset, hp: &Hyperparameters, config: &FitConfig) -> Result<(VariationalState, ElboTrace)> {
    let state = init_state(data, hp, config.seed)?;
    fit_from(data, hp, config, state)
}

/// Runs `config.iterations` rounds of: linearization update (s, and t in the
/// closed gate mode), E-step, expert M-step, gate M-step.
pub fn fit_from(
    data: &Dataset,
    hp: &Hyperparameters,
    config: &FitConfig,
    state: VariationalState,
) -> Result<(VariationalState, ElboTrace)> {
    fit_observed(data, hp, config, state, |_| {})
}

/// [`fit_from`], handing each trace record to `observe` as soon as it exists.
pub fn fit_observed(
    data: &Dataset,
    hp: &Hyperparameters,
    config: &FitConfig,
    mut state: VariationalState,
    mut observe: impl FnMut(&ElboRecord),
) -> Result<(VariationalState, ElboTrace)> {
    config.validate()?;
    hp.check_dataset(data)?;
    let start = Instant::now();
    let mut trace = ElboTrace::default();
    let wrap = |iteration: usize| move |e: Error| Error::Fit { iteration, source: Box::new(e) };

    // the gate objective is re-estimated at the current factor on its own stream
    let record = |state: &VariationalState, it: usize| -> Result<ElboRecord> {
        let value = elbo(data, hp, state, config.r_floor)?;
        let mut rng = stream(config.seed, STREAM_MONITOR + it as u64);
        let gate_objective =
            gate_objective_and_gradient(data, hp, &state.resp, &state.gate_l, config.gate_mc_samples, &mut rng)?.0;
        Ok(ElboRecord { iteration: it, elbo: value, gate_objective, wall_seconds: start.elapsed().as_secs_f64() })
    };

    let first = record(&state, 0).map_err(wrap(0))?;
    observe(&first);
    trace.records.push(first);
    for it in 1..=config.iterations {
        iterate(data, hp, config, &mut state, it).map_err(wrap(it))?;
        let rec = record(&state, it).map_err(wrap(it))?;
        log::info!("iteration {it}: elbo {:.6e}, gate objective {:.6e}", rec.elbo, rec.gate_objective);
        observe(&rec);
        trace.records.push(rec);
    }
    Ok((state, trace))
}

fn iterate(
    data: &Dataset,
    hp: &Hyperparameters,
    config: &FitConfig,
    state: &mut VariationalState,
    it: usize,
) -> Result<()> {
    state.lin.s = update_s(data, &state.experts, &state.resp)?;
    if config.gate_mode == GateMode::ClosedProjected {
        state.lin.t = update_t(data, state)?;
    }
    state.resp = e_step(data, hp, state)?;
    state.experts = m_step_experts(data, hp, &state.resp, &state.lin.s, config.r_floor)?;
    state.gate_l = match config.gate_mode {
        GateMode::ClosedProjected => m_step_gate_closed(data, hp, &state.resp, &state.lin.t, config.eig_floor)?,
        GateMode::Stochastic => {
            let mut rng = stream(config.seed, STREAM_GATE + it as u64);
            m_step_gate_stochastic(data, hp, &state.resp, &state.gate_l, config, &mut rng)?.l
        }
    };
    Ok(())
}
