//! Versioned JSON persistence of a fitted model.
//!
//! Responsibilities and linearization points are not stored; prediction only
//! needs the expert posteriors, the gate posterior and the training pairs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use simmoe::distributions::NiwParams;
use simmoe::inference::ElboTrace;
use simmoe::linalg::{LowerTriangular, Matrix};
use simmoe::model::{Dataset, FitConfig, Hyperparameters, Linearization, Responsibilities, VariationalState};

use crate::config::FitSettings;
use crate::data::Fingerprint;
use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl MatrixRecord {
    pub fn of(m: &Matrix<f64>) -> Self {
        MatrixRecord { rows: m.rows(), cols: m.cols(), data: m.as_slice().to_vec() }
    }

    pub fn to_matrix(&self) -> simmoe::Result<Matrix<f64>> {
        Matrix::from_vec(self.rows, self.cols, self.data.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparametersRecord {
    pub lambda0: MatrixRecord,
    pub eta0: f64,
    pub mu0: Vec<f64>,
    pub kappa0: f64,
    pub sigma0: MatrixRecord,
    pub nu0: f64,
    pub experts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertRecord {
    pub kappa: f64,
    pub mu: Vec<f64>,
    pub nu: f64,
    pub sigma: MatrixRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    /// Cholesky factor of the Wishart scale, row-major with zeros above the
    /// diagonal.
    pub l: MatrixRecord,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub elbo: f64,
    pub gate_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub seed: u64,
    pub iterations: usize,
    pub config: FitSettings,
    pub elbo_trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub hyperparameters: HyperparametersRecord,
    pub experts: Vec<ExpertRecord>,
    pub gate: GateRecord,
    pub fit: FitRecord,
    pub dataset: Fingerprint,
}

impl ModelFile {
    pub fn new(
        data: &Dataset,
        hp: &Hyperparameters,
        state: &VariationalState,
        config: &FitConfig,
        trace: &ElboTrace,
    ) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            hyperparameters: HyperparametersRecord {
                lambda0: MatrixRecord::of(&hp.lambda0),
                eta0: hp.eta0,
                mu0: hp.mu0.clone(),
                kappa0: hp.kappa0,
                sigma0: MatrixRecord::of(&hp.sigma0),
                nu0: hp.nu0,
                experts: hp.experts,
            },
            experts: state
                .experts
                .iter()
                .map(|e| ExpertRecord { kappa: e.kappa, mu: e.mu.clone(), nu: e.nu, sigma: MatrixRecord::of(&e.sigma) })
                .collect(),
            gate: GateRecord { l: MatrixRecord::of(state.gate_l.matrix()), eta: state.gate_eta },
            fit: FitRecord {
                seed: config.seed,
                iterations: config.iterations,
                config: FitSettings::from(config),
                elbo_trace: trace
                    .records
                    .iter()
                    .map(|r| TraceRecord { iteration: r.iteration, elbo: r.elbo, gate_objective: r.gate_objective })
                    .collect(),
            },
            dataset: Fingerprint::of(data),
        }
    }

    pub fn hyperparameters(&self) -> simmoe::Result<Hyperparameters> {
        let h = &self.hyperparameters;
        Hyperparameters::new(h.lambda0.to_matrix()?, h.eta0, h.mu0.clone(), h.kappa0, h.sigma0.to_matrix()?, h.nu0, h.experts)
    }

    /// Rebuilds a state for prediction. Responsibilities and linearization
    /// points are reset to uniform; they do not enter the predictive.
    pub fn state(&self, data: &Dataset) -> Result<VariationalState> {
        self.dataset.check(data)?;
        let experts = self
            .experts
            .iter()
            .map(|e| NiwParams::new(e.mu.clone(), e.kappa, e.sigma.to_matrix()?, e.nu))
            .collect::<simmoe::Result<Vec<_>>>()?;
        let gate_l = LowerTriangular::new(self.gate.l.to_matrix()?)?;
        let (n, c) = (data.n(), experts.len());
        let (resp, lin) = (Responsibilities::uniform(c, n), Linearization::uniform(n, c));
        Ok(VariationalState { experts, gate_l, gate_eta: self.gate.eta, resp, lin })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model records serialize")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let m: ModelFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if m.format_version != FORMAT_VERSION {
            return Err(format!("format version {} is not supported (expected {FORMAT_VERSION})", m.format_version));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| CliError::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(self.to_json().as_bytes()).map_err(io)?;
        w.write_all(b"\n").map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        ModelFile::from_json(&text).map_err(|message| CliError::ModelFormat { path: path.to_path_buf(), message })
    }
}
