//! Observations, priors and the variational state.

use crate::cluster::{farthest_point_clusters, ward_clusters};
use crate::distributions::NiwParams;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, LowerTriangular, Matrix};

/// Paired inputs `x` (N×Dx) and outputs `y` (N×Dy).
///
/// A single observation is accepted for prediction; fitting needs `N ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix<f64>,
    y: Matrix<f64>,
}

impl Dataset {
    pub fn new(x: Matrix<f64>, y: Matrix<f64>) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch(format!("{} input rows, {} output rows", x.rows(), y.rows())));
        }
        if x.rows() == 0 {
            return Err(Error::InvalidInput("a dataset needs at least one observation".into()));
        }
        if x.cols() == 0 || y.cols() == 0 {
            return Err(Error::InvalidInput("input and output dimensions must be at least 1".into()));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("dataset contains non-finite entries".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dx(&self) -> usize {
        self.x.cols()
    }

    pub fn dy(&self) -> usize {
        self.y.cols()
    }

    pub fn x(&self) -> &Matrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &Matrix<f64> {
        &self.y
    }
}

/// Column means and (unbiased) variances.
pub fn column_moments(m: &Matrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows() as f64;
    let d = m.cols();
    let mut mean = vec![0.0; d];
    for i in 0..m.rows() {
        for (a, v) in mean.iter_mut().zip(m.row(i)) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n);
    let mut var = vec![0.0; d];
    for i in 0..m.rows() {
        for j in 0..d {
            let e = m[(i, j)] - mean[j];
            var[j] += e * e;
        }
    }
    let denom = (n - 1.0).max(1.0);
    var.iter_mut().for_each(|v| *v /= denom);
    (mean, var)
}

/// Prior constants of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub lambda0: Matrix<f64>,
    pub eta0: f64,
    pub mu0: Vec<f64>,
    pub kappa0: f64,
    pub sigma0: Matrix<f64>,
    pub nu0: f64,
    pub experts: usize,
    lambda0_inv: Matrix<f64>,
}

impl Hyperparameters {
    pub fn new(
        lambda0: Matrix<f64>,
        eta0: f64,
        mu0: Vec<f64>,
        kappa0: f64,
        sigma0: Matrix<f64>,
        nu0: f64,
        experts: usize,
    ) -> Result<Self> {
        let dx = lambda0.rows();
        let dy = mu0.len();
        let lambda0_inv = cholesky(&lambda0)?.inverse_of_product();
        cholesky(&sigma0)?;
        if sigma0.rows() != dy {
            return Err(Error::DimensionMismatch(format!("Sigma0 is {}x{}, mu0 has {dy}", sigma0.rows(), sigma0.cols())));
        }
        if !(eta0 >= dx as f64) {
            return Err(Error::Domain(format!("eta0 = {eta0} must be at least the input dimension {dx}")));
        }
        if !(kappa0 > 0.0) || !kappa0.is_finite() {
            return Err(Error::Domain(format!("kappa0 = {kappa0} must be positive")));
        }
        if !(nu0 > dy as f64 - 1.0) {
            return Err(Error::Domain(format!("nu0 = {nu0} must exceed Dy - 1")));
        }
        if experts == 0 {
            return Err(Error::InvalidInput("at least one expert is required".into()));
        }
        Ok(Hyperparameters { lambda0, eta0, mu0, kappa0, sigma0, nu0, experts, lambda0_inv })
    }

    pub fn dx(&self) -> usize {
        self.lambda0.rows()
    }

    pub fn dy(&self) -> usize {
        self.mu0.len()
    }

    /// `Λ₀⁻¹`, formed once at construction.
    pub fn lambda0_inv(&self) -> &Matrix<f64> {
        &self.lambda0_inv
    }

    /// The expert prior as NIW parameters.
    pub fn expert_prior(&self) -> NiwParams<f64> {
        NiwParams { mu: self.mu0.clone(), kappa: self.kappa0, sigma: self.sigma0.clone(), nu: self.nu0 }
    }

    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.dx() != self.dx() || data.dy() != self.dy() {
            return Err(Error::DimensionMismatch(format!(
                "dataset is {}→{}, hyperparameters are {}→{}",
                data.dx(),
                data.dy(),
                self.dx(),
                self.dy()
            )));
        }
        if data.n() < 2 {
            return Err(Error::InvalidInput("fitting needs at least two observations".into()));
        }
        if self.experts > data.n() {
            return Err(Error::InvalidInput(format!("{} experts for {} observations", self.experts, data.n())));
        }
        Ok(())
    }
}

/// Default hyperparameters together with any warnings raised on the way.
#[derive(Debug, Clone)]
pub struct PriorDefaults {
    pub hyperparameters: Hyperparameters,
    pub warnings: Vec<String>,
}

const VARIANCE_JITTER: f64 = 1e-8;

/// Empirical-Bayes defaults: the prior means of `Σ_c` and `Λ` match the
/// diagonal output covariance and inverse diagonal input covariance.
pub fn default_hyperparameters(data: &Dataset, experts: usize) -> Result<PriorDefaults> {
    if experts == 0 || experts > data.n() {
        return Err(Error::InvalidInput(format!("{experts} experts for {} observations", data.n())));
    }
    let mut warnings = Vec::new();
    let mut jitter = |var: &mut [f64], what: &str| {
        for (j, v) in var.iter_mut().enumerate() {
            if !(*v > 0.0) {
                let msg = format!("{what} coordinate {} has zero variance; jittered to {VARIANCE_JITTER:e}", j + 1);
                log::warn!("{msg}");
                warnings.push(msg);
                *v = VARIANCE_JITTER;
            }
        }
    };
    let (mu0, mut vy) = column_moments(data.y());
    let (_, mut vx) = column_moments(data.x());
    jitter(&mut vy, "output");
    jitter(&mut vx, "input");

    let dy = data.dy() as f64;
    let dx = data.dx() as f64;
    let nu0 = dy + 2.0;
    let sigma0 = Matrix::from_diag(&vy.iter().map(|v| v * (nu0 - dy - 1.0)).collect::<Vec<_>>());
    let eta0 = dx + 2.0;
    let lambda0 = Matrix::from_diag(&vx.iter().map(|v| 1.0 / (v * eta0)).collect::<Vec<_>>());
    let hyperparameters = Hyperparameters::new(lambda0, eta0, mu0, 0.01, sigma0, nu0, experts)?;
    Ok(PriorDefaults { hyperparameters, warnings })
}

/// Variational responsibilities `ω_{c,nn'}` over (expert, neighbour) pairs.
///
/// Stored densely as C×N×(N−1); neighbour slot `j` of row `n` is `n' = j`
/// for `j < n` and `n' = j + 1` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    experts: usize,
    n: usize,
    omega: Vec<f64>,
    big_omega: Matrix<f64>,
}

impl Responsibilities {
    /// Uniform over all (c, n') for every n.
    pub fn uniform(experts: usize, n: usize) -> Self {
        let v = 1.0 / (experts * (n - 1)) as f64;
        Self::from_dense(experts, n, vec![v; experts * n * (n - 1)])
    }

    /// Builds from the raw C×N×(N−1) tensor, recomputing `Ω`.
    pub fn from_dense(experts: usize, n: usize, omega: Vec<f64>) -> Self {
        assert_eq!(omega.len(), experts * n * (n - 1));
        let mut r = Responsibilities { experts, n, omega, big_omega: Matrix::zeros(n, n) };
        r.refresh_big_omega();
        r
    }

    /// Builds from a function of `(c, n, n')`, `n' ≠ n`.
    pub fn from_fn(experts: usize, n: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut omega = vec![0.0; experts * n * (n - 1)];
        for c in 0..experts {
            for i in 0..n {
                for j in 0..n - 1 {
                    omega[(c * n + i) * (n - 1) + j] = f(c, i, neighbour(i, j));
                }
            }
        }
        Self::from_dense(experts, n, omega)
    }

    fn refresh_big_omega(&mut self) {
        let n = self.n;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n - 1 {
                let mut acc = 0.0;
                for c in 0..self.experts {
                    acc += self.omega[(c * n + i) * (n - 1) + j];
                }
                m[(i, neighbour(i, j))] = acc;
            }
        }
        self.big_omega = m;
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `ω_{c,nn'}`; zero on the diagonal.
    pub fn get(&self, c: usize, n: usize, n2: usize) -> f64 {
        if n == n2 {
            return 0.0;
        }
        let j = if n2 < n { n2 } else { n2 - 1 };
        self.omega[(c * self.n + n) * (self.n - 1) + j]
    }

    /// The N−1 neighbour slots of row `n` for expert `c`.
    pub fn row(&self, c: usize, n: usize) -> &[f64] {
        let start = (c * self.n + n) * (self.n - 1);
        &self.omega[start..start + self.n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.omega
    }

    /// `Ω_{nn'} = Σ_c ω_{c,nn'}` with zero diagonal.
    pub fn big_omega(&self) -> &Matrix<f64> {
        &self.big_omega
    }

    /// Largest deviation of `Σ_{c,n'} ω_{c,nn'}` from one over all n.
    pub fn normalization_error(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let s: f64 = self.big_omega.row(i).iter().sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Index of neighbour slot `j` of row `n`.
#[inline]
pub fn neighbour(n: usize, j: usize) -> usize {
    if j < n {
        j
    } else {
        j + 1
    }
}

/// Locations of the log-sum-exp linearizations: `s` (N×C) for the expert
/// softmax and `t` (N×N, zero diagonal) for the neighbour softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub s: Matrix<f64>,
    pub t: Matrix<f64>,
}

impl Linearization {
    pub fn uniform(n: usize, experts: usize) -> Self {
        let s = Matrix::from_vec(n, experts, vec![1.0 / experts as f64; n * experts]).unwrap();
        let mut t = Matrix::zeros(n, n);
        let v = 1.0 / (n - 1) as f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    t[(i, j)] = v;
                }
            }
        }
        Linearization { s, t }
    }
}

/// Full mean-field state: expert NIW posteriors, Wishart gate posterior
/// `W(L Lᵀ, η)`, responsibilities and linearization locations.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub experts: Vec<NiwParams<f64>>,
    pub gate_l: LowerTriangular<f64>,
    pub gate_eta: f64,
    pub resp: Responsibilities,
    pub lin: Linearization,
}

impl VariationalState {
    /// Gate posterior scale `Λ^l = L Lᵀ`.
    pub fn gate_scale(&self) -> Matrix<f64> {
        self.gate_l.reconstruct()
    }
}

/// How the gate posterior is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateMode {
    /// Reparameterized stochastic gradient on the Cholesky factor.
    #[default]
    Stochastic,
    /// Closed-form update with eigenvalue projection.
    ClosedProjected,
}

impl std::str::FromStr for GateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(GateMode::Stochastic),
            "closed_projected" | "closed-projected" | "closed" => Ok(GateMode::ClosedProjected),
            other => Err(Error::InvalidInput(format!("unknown gate mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for GateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GateMode::Stochastic => "stochastic",
            GateMode::ClosedProjected => "closed_projected",
        })
    }
}

/// Run controls for fitting and prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    pub gate_subiterations: usize,
    pub gate_mc_samples: usize,
    pub adam_learning_rate: f64,
    pub r_floor: f64,
    pub eig_floor: f64,
    pub predictive_ke: usize,
    pub predictive_kg: usize,
    pub seed: u64,
    pub gate_mode: GateMode,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 20,
            gate_subiterations: 50,
            gate_mc_samples: 8,
            adam_learning_rate: 0.01,
            r_floor: 1e-8,
            eig_floor: 1e-6,
            predictive_ke: 64,
            predictive_kg: 64,
            seed: 0,
            gate_mode: GateMode::Stochastic,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("gate_subiterations", self.gate_subiterations),
            ("gate_mc_samples", self.gate_mc_samples),
            ("predictive_ke", self.predictive_ke),
            ("predictive_kg", self.predictive_kg),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        let reals = [("r_floor", self.r_floor), ("eig_floor", self.eig_floor)];
        for (name, v) in reals {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        if !(self.adam_learning_rate >= 0.0) || !self.adam_learning_rate.is_finite() {
            return Err(Error::InvalidInput("adam_learning_rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Inputs standardized to zero mean and unit variance per column.
pub fn standardize(x: &Matrix<f64>) -> Matrix<f64> {
    let (mean, var) = column_moments(x);
    let mut out = x.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let sd = if var[j] > 0.0 { var[j].sqrt() } else { 1.0 };
            out[(i, j)] = (x[(i, j)] - mean[j]) / sd;
        }
    }
    out
}

/// Initial state: Ward clustering of the standardized inputs seeds the expert
/// means with per-cluster output means; everything else starts at the prior or
/// uniform.
///
/// `seed` picks the first centre of the farthest-point fallback.
pub fn init_state(data: &Dataset, hp: &Hyperparameters, seed: u64) -> Result<VariationalState> {
    hp.check_dataset(data)?;
    let c = hp.experts;
    let n = data.n();
    let z = standardize(data.x());
    let mut labels = ward_clusters(&z, c)?;
    if cluster_sizes(&labels, c).contains(&0) {
        log::warn!("{}; using farthest-point seeding", Error::ClusteringDegenerate);
        labels = farthest_point_clusters(&z, c, (seed % n as u64) as usize)?;
        if cluster_sizes(&labels, c).contains(&0) {
            return Err(Error::ClusteringDegenerate);
        }
    }
    let sizes = cluster_sizes(&labels, c);
    let dy = data.dy();
    let mut means = vec![vec![0.0; dy]; c];
    for (i, &l) in labels.iter().enumerate() {
        for (m, v) in means[l].iter_mut().zip(data.y().row(i)) {
            *m += v;
        }
    }
    let experts = means
        .into_iter()
        .zip(&sizes)
        .map(|(mut m, &k)| {
            m.iter_mut().for_each(|v| *v /= k as f64);
            NiwParams { mu: m, kappa: hp.kappa0, sigma: hp.sigma0.clone(), nu: hp.nu0 }
        })
        .collect();
    Ok(VariationalState {
        experts,
        gate_l: cholesky(&hp.lambda0)?,
        gate_eta: hp.eta0,
        resp: Responsibilities::uniform(c, n),
        lin: Linearization::uniform(n, c),
    })
}

fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &l in labels {
        if l < k {
            sizes[l] += 1;
        }
    }
    sizes
}
