//! Posterior predictive mixtures and the Nadaraya–Watson baseline.

use rand::Rng;
use rayon::prelude::*;

use crate::distributions::{mvn_logpdf_chol, sample_bartlett_factor, sample_mvn, sample_niw};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, LowerTriangular, Matrix};
use crate::model::{Dataset, VariationalState};
use crate::rng::{split, Stream};

/// Finite Gaussian mixture over `Dy`-dimensional outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Matrix<f64>>,
    chols: Vec<LowerTriangular<f64>>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Matrix<f64>>) -> Result<Self> {
        let m = weights.len();
        if m == 0 || means.len() != m || covariances.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} weights, {} means, {} covariances",
                m,
                means.len(),
                covariances.len()
            )));
        }
        let d = means[0].len();
        if means.iter().any(|mu| mu.len() != d) || covariances.iter().any(|s| s.rows() != d || s.cols() != d) {
            return Err(Error::DimensionMismatch("mixture components disagree in dimension".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("mixture weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("mixture weights sum to {total}")));
        }
        let chols = covariances.iter().map(cholesky).collect::<Result<Vec<_>>>()?;
        Ok(GaussianMixture { weights, means, covariances, chols })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Matrix<f64>] {
        &self.covariances
    }

    /// `log Σᵢ wᵢ N(y | μᵢ, Σᵢ)`.
    pub fn logpdf(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("mixture is {}-dimensional, y has {}", self.dim(), y.len())));
        }
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.chols)
            .filter(|((w, _), _)| **w > 0.0)
            .map(|((w, mu), l)| w.ln() + mvn_logpdf_chol(y, mu, l))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    /// Categorical component draw followed by a Gaussian draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        sample_mvn(&self.means[k], &self.chols[k], rng)
    }

    /// `Σᵢ wᵢ μᵢ`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (w, mu) in self.weights.iter().zip(&self.means) {
            for (o, m) in out.iter_mut().zip(mu) {
                *o += w * m;
            }
        }
        out
    }
}

/// Alias kept for symmetry with [`GaussianMixture::logpdf`].
pub fn mixture_logpdf(m: &GaussianMixture, y: &[f64]) -> Result<f64> {
    m.logpdf(y)
}

pub fn mixture_sample<R: Rng + ?Sized>(m: &GaussianMixture, rng: &mut R) -> Vec<f64> {
    m.sample(rng)
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    v.iter_mut().for_each(|x| *x /= total);
}

/// Component weights from the two layers of logits.
///
/// `gate_logits[k']` holds the N first-transition logits under gate draw k';
/// `expert_logits[k]` is the N×C matrix of second-transition logits under
/// expert draw k. Weight of component `(k, c)` (index `k·C + c`) is
/// `(1/Ke) Σₙ ḡ(n) softmax_c(expert_logits[k])(n, c)` with `ḡ` the average of
/// the gate softmaxes.
pub fn predictive_weights(gate_logits: &[Vec<f64>], expert_logits: &[Matrix<f64>]) -> Result<Vec<f64>> {
    if gate_logits.is_empty() || expert_logits.is_empty() {
        return Err(Error::InvalidInput("need at least one gate and one expert draw".into()));
    }
    let n = gate_logits[0].len();
    let mut gbar = vec![0.0; n];
    for g in gate_logits {
        if g.len() != n {
            return Err(Error::DimensionMismatch("gate logits differ in length".into()));
        }
        let mut p = g.clone();
        softmax_in_place(&mut p);
        for (a, b) in gbar.iter_mut().zip(&p) {
            *a += b;
        }
    }
    let kg = gate_logits.len() as f64;
    gbar.iter_mut().for_each(|a| *a /= kg);

    let ke = expert_logits.len();
    let c = expert_logits[0].cols();
    let mut weights = vec![0.0; ke * c];
    for (k, e) in expert_logits.iter().enumerate() {
        if e.rows() != n || e.cols() != c {
            return Err(Error::DimensionMismatch("expert logits have the wrong shape".into()));
        }
        let mut row = vec![0.0; c];
        for (i, g) in gbar.iter().enumerate() {
            row.copy_from_slice(e.row(i));
            softmax_in_place(&mut row);
            for (j, r) in row.iter().enumerate() {
                weights[k * c + j] += g * r;
            }
        }
    }
    weights.iter_mut().for_each(|w| *w /= ke as f64);
    Ok(weights)
}

/// Monte Carlo draws of the fitted posterior that do not depend on the query
/// input: `ke` independent expert sets and `kg` gate factors `L A`.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    gate_factors: Vec<LowerTriangular<f64>>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Matrix<f64>>,
    expert_logits: Vec<Matrix<f64>>,
    experts: usize,
}

impl PosteriorDraws {
    /// The gate and expert draws come from two child streams of `rng`.
    pub fn new(data: &Dataset, state: &VariationalState, ke: usize, kg: usize, rng: &mut Stream) -> Result<Self> {
        if ke == 0 || kg == 0 {
            return Err(Error::InvalidInput("Ke and Kg must be positive".into()));
        }
        if data.dx() != state.gate_l.dim() || state.experts.iter().any(|e| e.dim() != data.dy()) {
            return Err(Error::DimensionMismatch("state does not match the dataset".into()));
        }
        let mut gate_rng = split(rng);
        let mut expert_rng = split(rng);
        let d = state.gate_l.dim();
        let gate_factors = (0..kg)
            .map(|_| Ok(state.gate_l.mul(&sample_bartlett_factor(d, state.gate_eta, &mut gate_rng)?)))
            .collect::<Result<Vec<_>>>()?;

        let c = state.experts.len();
        let mut means = Vec::with_capacity(ke * c);
        let mut covariances = Vec::with_capacity(ke * c);
        for _ in 0..ke {
            for e in &state.experts {
                let (mu, sigma) = sample_niw(e, &mut expert_rng)?;
                means.push(mu);
                covariances.push(sigma);
            }
        }
        let chols = covariances.iter().map(cholesky).collect::<Result<Vec<_>>>()?;
        let n = data.n();
        let expert_logits = (0..ke)
            .into_par_iter()
            .map(|k| {
                let mut m = Matrix::zeros(n, c);
                for i in 0..n {
                    let y = data.y().row(i);
                    for j in 0..c {
                        m[(i, j)] = mvn_logpdf_chol(y, &means[k * c + j], &chols[k * c + j]);
                    }
                }
                m
            })
            .collect();
        Ok(PosteriorDraws { gate_factors, means, covariances, expert_logits, experts: c })
    }

    /// Number of components of every predictive built from these draws.
    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    /// First-transition logits `−½ (x* − xⁿ)ᵀ Λ_k (x* − xⁿ)` for every gate draw.
    pub fn gate_logits(&self, x_star: &[f64], data: &Dataset) -> Result<Vec<Vec<f64>>> {
        if x_star.len() != data.dx() {
            return Err(Error::DimensionMismatch(format!("x* has {} entries, inputs have {}", x_star.len(), data.dx())));
        }
        let diffs: Vec<Vec<f64>> =
            (0..data.n()).map(|i| x_star.iter().zip(data.x().row(i)).map(|(a, b)| a - b).collect()).collect();
        Ok(self
            .gate_factors
            .iter()
            .map(|b| diffs.iter().map(|d| -0.5 * b.t_mul_vec(d).iter().map(|v| v * v).sum::<f64>()).collect())
            .collect())
    }

    /// Predictive mixture at `x_star`.
    pub fn predictive(&self, x_star: &[f64], data: &Dataset) -> Result<GaussianMixture> {
        let gate = self.gate_logits(x_star, data)?;
        let mut weights = predictive_weights(&gate, &self.expert_logits)?;
        // renormalize away rounding
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        GaussianMixture::new(weights, self.means.clone(), self.covariances.clone())
    }
}

/// Monte Carlo posterior predictive at `x_star`: a mixture with `ke · C`
/// components.
pub fn posterior_predictive(
    x_star: &[f64],
    data: &Dataset,
    state: &VariationalState,
    ke: usize,
    kg: usize,
    rng: &mut Stream,
) -> Result<GaussianMixture> {
    PosteriorDraws::new(data, state, ke, kg, rng)?.predictive(x_star, data)
}

/// Nadaraya–Watson baseline parameters: RBF lengthscale and noise SD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NwConfig {
    pub lengthscale: f64,
    pub noise_sd: f64,
}

impl NwConfig {
    pub fn new(lengthscale: f64, noise_sd: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !(noise_sd > 0.0) {
            return Err(Error::InvalidInput("lengthscale and noise_sd must be positive".into()));
        }
        Ok(NwConfig { lengthscale, noise_sd })
    }

    /// Median pairwise input distance as the lengthscale, and the
    /// leave-one-out residual SD (pooled over output coordinates) as noise.
    pub fn heuristic(data: &Dataset) -> Result<Self> {
        let n = data.n();
        if n < 2 {
            return Err(Error::InvalidInput("the heuristic needs at least two observations".into()));
        }
        let mut dists = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let d: f64 = data.x().row(i).iter().zip(data.x().row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                dists.push(d.sqrt());
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = dists.len();
        let median = if m % 2 == 1 { dists[m / 2] } else { 0.5 * (dists[m / 2 - 1] + dists[m / 2]) };
        let lengthscale = if median > 0.0 { median } else { 1.0 };

        let sq: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let mean = nw_mean(data.x().row(i), data, lengthscale, Some(i));
                mean.iter().zip(data.y().row(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        let noise_sd = (sq / (n * data.dy()) as f64).sqrt().max(1e-12);
        NwConfig::new(lengthscale, noise_sd)
    }
}

fn nw_mean(x_star: &[f64], data: &Dataset, lengthscale: f64, skip: Option<usize>) -> Vec<f64> {
    let n = data.n();
    let inv = 1.0 / (2.0 * lengthscale * lengthscale);
    let mut logits: Vec<f64> = (0..n)
        .map(|i| {
            if Some(i) == skip {
                return f64::NEG_INFINITY;
            }
            let d: f64 = x_star.iter().zip(data.x().row(i)).map(|(a, b)| (a - b) * (a - b)).sum();
            -d * inv
        })
        .collect();
    softmax_in_place(&mut logits);
    let mut mean = vec![0.0; data.dy()];
    for (i, w) in logits.iter().enumerate() {
        if *w > 0.0 {
            for (m, y) in mean.iter_mut().zip(data.y().row(i)) {
                *m += w * y;
            }
        }
    }
    mean
}

/// Kernel-weighted mean of the training outputs and the noise variance `ε²`.
pub fn nadaraya_watson(x_star: &[f64], data: &Dataset, cfg: &NwConfig) -> Result<(Vec<f64>, f64)> {
    if x_star.len() != data.dx() {
        return Err(Error::DimensionMismatch(format!("x* has {} entries, inputs have {}", x_star.len(), data.dx())));
    }
    Ok((nw_mean(x_star, data, cfg.lengthscale, None), cfg.noise_sd * cfg.noise_sd))
}

/// The baseline's predictive `N(mean, ε² I)` as a one-component mixture.
pub fn nadaraya_watson_mixture(x_star: &[f64], data: &Dataset, cfg: &NwConfig) -> Result<GaussianMixture> {
    let (mean, var) = nadaraya_watson(x_star, data, cfg)?;
    let d = mean.len();
    GaussianMixture::new(vec![1.0], vec![mean], vec![Matrix::identity(d).scale(var)])
}
