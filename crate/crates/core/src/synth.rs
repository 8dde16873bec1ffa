//! Synthetic benchmarks with known conditional distributions.
//!
//! `oned`: x log-normal in 2D, y a log-shifted gamma with a Bernoulli jump.
//! `twod`: x the Fourier coefficients of two Gaussian bumps (32 features),
//! y the log-diagonal of an inverse-Wishart draw with a random sign.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::distributions::sample_inv_wishart;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::Dataset;
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    OneD,
    TwoD,
}

impl SynthKind {
    pub fn dx(self) -> usize {
        match self {
            SynthKind::OneD => 2,
            SynthKind::TwoD => 32,
        }
    }

    pub fn dy(self) -> usize {
        match self {
            SynthKind::OneD => 1,
            SynthKind::TwoD => 2,
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oned" => Ok(SynthKind::OneD),
            "twod" => Ok(SynthKind::TwoD),
            other => Err(Error::InvalidInput(format!("unknown benchmark '{other}' (expected oned or twod)"))),
        }
    }
}

impl std::fmt::Display for SynthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SynthKind::OneD => "oned",
            SynthKind::TwoD => "twod",
        })
    }
}

/// Conditioning values for resampling outputs: the input itself, and for
/// `twod` also the latent `η` behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthContext {
    pub x: Vec<f64>,
    pub eta: Option<[f64; 2]>,
}

/// A generated dataset with one context per row.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: Dataset,
    pub contexts: Vec<SynthContext>,
}

const LOG_CORR: f64 = 0.5;
const JUMP_P: f64 = 0.3;

/// Correlated log-normal pair: `exp(z)`, `z ~ N(0, [[1, .5], [.5, 1]])`.
fn log_normal_pair(rng: &mut Stream) -> [f64; 2] {
    let g1: f64 = StandardNormal.sample(rng);
    let g2: f64 = StandardNormal.sample(rng);
    let z2 = LOG_CORR * g1 + (1.0 - LOG_CORR * LOG_CORR).sqrt() * g2;
    [g1.exp(), z2.exp()]
}

fn oned_output(x: &[f64], rng: &mut Stream) -> Result<f64> {
    let tau = if rng.random::<f64>() < JUMP_P { 1.0 } else { 0.0 };
    // shape x₁, rate x₂
    let gamma = Gamma::new(x[0], 1.0 / x[1]).map_err(|e| Error::Domain(e.to_string()))?;
    let zeta: f64 = gamma.sample(rng);
    Ok((zeta + 0.4 * tau + 0.1).ln())
}

/// `n` draws of the one-dimensional benchmark (Dx = 2, Dy = 1).
pub fn gen_1d(n: usize, seed: u64) -> Result<Dataset> {
    Ok(generate(SynthKind::OneD, n, seed)?.data)
}

/// `n` draws of the two-dimensional benchmark (Dx = 32, Dy = 2) with the
/// latent `η` of every row.
pub fn gen_2d(n: usize, seed: u64) -> Result<(Dataset, Vec<[f64; 2]>)> {
    let s = generate(SynthKind::TwoD, n, seed)?;
    let eta = s.contexts.iter().map(|c| c.eta.expect("twod context")).collect();
    Ok((s.data, eta))
}

/// `φ(ξ)ᵢ = N(0.7 i | ξ, 4)` for `i = 0..8`.
pub fn bump(xi: f64) -> [f64; 8] {
    let norm = 1.0 / (8.0 * PI).sqrt();
    std::array::from_fn(|i| {
        let d = 0.7 * i as f64 - xi;
        norm * (-d * d / 8.0).exp()
    })
}

/// 8-point DFT `F_k = Σᵢ vᵢ e^{−2πi k i / 8}` as (real parts, imaginary parts).
pub fn dft8(v: &[f64; 8]) -> ([f64; 8], [f64; 8]) {
    // exact twiddles at multiples of π/4
    const R: f64 = FRAC_1_SQRT_2;
    const COS: [f64; 8] = [1.0, R, 0.0, -R, -1.0, -R, 0.0, R];
    const SIN: [f64; 8] = [0.0, R, 1.0, R, 0.0, -R, -1.0, -R];
    let mut re = [0.0; 8];
    let mut im = [0.0; 8];
    for k in 0..8 {
        for (i, vi) in v.iter().enumerate() {
            let m = (k * i) % 8;
            re[k] += vi * COS[m];
            im[k] -= vi * SIN[m];
        }
    }
    (re, im)
}

/// The 32 features of the `twod` benchmark for latent `η`.
pub fn twod_features(eta: [f64; 2]) -> Vec<f64> {
    let mut x = Vec::with_capacity(32);
    for e in eta {
        let (re, im) = dft8(&bump(e));
        x.extend_from_slice(&re);
        x.extend_from_slice(&im);
    }
    x
}

fn twod_output(eta: [f64; 2], rng: &mut Stream) -> Result<Vec<f64>> {
    let psi = twod_scale(eta);
    let zeta = sample_inv_wishart(&psi, 3.0, rng)?.sigma;
    let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
    Ok(vec![zeta[(0, 0)].ln(), sign * zeta[(1, 1)].ln()])
}

/// `A Aᵀ` with `A = [[η₁, 0], [0.5, η₂]]`.
pub fn twod_scale(eta: [f64; 2]) -> Matrix<f64> {
    let a = Matrix::from_rows(&[[eta[0], 0.0], [0.5, eta[1]]]).unwrap();
    a.matmul(&a.transpose()).unwrap()
}

fn draw_context(kind: SynthKind, rng: &mut Stream) -> SynthContext {
    let pair = log_normal_pair(rng);
    match kind {
        SynthKind::OneD => SynthContext { x: pair.to_vec(), eta: None },
        SynthKind::TwoD => SynthContext { x: twod_features(pair), eta: Some(pair) },
    }
}

fn draw_output(kind: SynthKind, ctx: &SynthContext, rng: &mut Stream) -> Result<Vec<f64>> {
    match kind {
        SynthKind::OneD => {
            if ctx.x.len() != 2 {
                return Err(Error::ContextMismatch(format!("oned context has {} inputs", ctx.x.len())));
            }
            if !(ctx.x[0] > 0.0 && ctx.x[1] > 0.0) {
                return Err(Error::ContextMismatch("oned inputs must be positive".into()));
            }
            Ok(vec![oned_output(&ctx.x, rng)?])
        }
        SynthKind::TwoD => {
            let eta = ctx.eta.ok_or_else(|| Error::ContextMismatch("twod context lacks the latent eta".into()))?;
            twod_output(eta, rng)
        }
    }
}

/// `n` rows of the chosen benchmark with their contexts.
pub fn generate(kind: SynthKind, n: usize, seed: u64) -> Result<Synthetic> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let mut rng = stream(seed, 0);
    let mut xs = Vec::with_capacity(n * kind.dx());
    let mut ys = Vec::with_capacity(n * kind.dy());
    let mut contexts = Vec::with_capacity(n);
    for _ in 0..n {
        let ctx = draw_context(kind, &mut rng);
        ys.extend(draw_output(kind, &ctx, &mut rng)?);
        xs.extend_from_slice(&ctx.x);
        contexts.push(ctx);
    }
    let x = Matrix::from_vec(n, kind.dx(), xs)?;
    let y = Matrix::from_vec(n, kind.dy(), ys)?;
    let data = Dataset::new(x, y)?;
    Ok(Synthetic { data, contexts })
}

/// `count` fresh contexts, e.g. held-out evaluation inputs.
pub fn draw_contexts(kind: SynthKind, count: usize, seed: u64) -> Vec<SynthContext> {
    let mut rng = stream(seed, 1);
    (0..count).map(|_| draw_context(kind, &mut rng)).collect()
}

/// Builds a context from stored values: `x` for `oned`, `η` for `twod`.
pub fn context_from(kind: SynthKind, x: &[f64], eta: Option<[f64; 2]>) -> Result<SynthContext> {
    match kind {
        SynthKind::OneD => Ok(SynthContext { x: x.to_vec(), eta: None }),
        SynthKind::TwoD => {
            let eta = eta.ok_or_else(|| Error::ContextMismatch("twod context lacks the latent eta".into()))?;
            Ok(SynthContext { x: twod_features(eta), eta: Some(eta) })
        }
    }
}

/// `m` independent outputs given the context, resampling everything except
/// the conditioning values.
pub fn true_conditional_samples(kind: SynthKind, ctx: &SynthContext, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = stream(seed, 2);
    (0..m).map(|_| draw_output(kind, ctx, &mut rng)).collect()
}
