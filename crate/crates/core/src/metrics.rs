//! Grid densities, kernel density estimates and divergences between them,
//! plus the held-out evaluation protocol for the synthetic benchmarks.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Dataset, VariationalState};
use crate::predict::{nadaraya_watson_mixture, GaussianMixture, NwConfig, PosteriorDraws};
use crate::rng::stream;
use crate::synth::{draw_contexts, true_conditional_samples, SynthContext, SynthKind};

/// Regular axis `lo + (i + ½)·step`, `i = 0..count` (cell midpoints).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub step: f64,
    pub count: usize,
}

impl GridAxis {
    /// `count` cells covering `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!("bad grid axis [{lo}, {hi}] with {count} cells")));
        }
        Ok(GridAxis { lo, step: (hi - lo) / count as f64, count })
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.step
    }
}

/// Non-negative values on a product grid, row-major with the first axis
/// slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    axes: Vec<GridAxis>,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(axes: Vec<GridAxis>, values: Vec<f64>) -> Result<Self> {
        let size: usize = axes.iter().map(|a| a.count).product();
        if axes.is_empty() || values.len() != size {
            return Err(Error::DimensionMismatch(format!("grid of {size} cells given {} values", values.len())));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("grid values must be finite and non-negative".into()));
        }
        Ok(DensityGrid { axes, values })
    }

    /// Evaluates `f` at every grid point.
    pub fn from_fn(axes: Vec<GridAxis>, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let size: usize = axes.iter().map(|a| a.count).product();
        let values = (0..size).into_par_iter().map(|k| f(&point_of(&axes, k))).collect();
        DensityGrid::new(axes, values)
    }

    /// Density of a mixture on the grid.
    pub fn from_mixture(axes: Vec<GridAxis>, m: &GaussianMixture) -> Result<Self> {
        if axes.len() != m.dim() {
            return Err(Error::DimensionMismatch("grid and mixture dimensions differ".into()));
        }
        Self::from_fn(axes, |p| m.logpdf(p).map(f64::exp).unwrap_or(0.0))
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step).product()
    }

    /// Riemann sum of the values.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Coordinates of cell `k`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        point_of(&self.axes, k)
    }

    /// CSV with one coordinate column per axis and a `density` column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.axes.len()).map(|i| format!("y{i}")).collect();
        writeln!(w, "{},density", header.join(","))?;
        for (k, v) in self.values.iter().enumerate() {
            let p = self.point(k);
            let coords: Vec<String> = p.iter().map(|c| format!("{c:.16e}")).collect();
            writeln!(w, "{},{v:.16e}", coords.join(","))?;
        }
        Ok(())
    }

    fn check_same(&self, other: &DensityGrid) -> Result<()> {
        if self.axes != other.axes {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

fn point_of(axes: &[GridAxis], mut k: usize) -> Vec<f64> {
    let mut p = vec![0.0; axes.len()];
    for (d, a) in axes.iter().enumerate().rev() {
        p[d] = a.point(k % a.count);
        k /= a.count;
    }
    p
}

/// Per-axis Scott bandwidths `σ̂_j m^{−1/(d+4)}`.
pub fn scott_bandwidths(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InvalidInput("bandwidth needs at least two samples".into()));
    }
    let d = samples[0].len();
    let factor = (m as f64).powf(-1.0 / (d as f64 + 4.0));
    (0..d)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / m as f64;
            let var = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
            if !(var > 0.0) {
                return Err(Error::DegenerateSamples { axis: j });
            }
            Ok(var.sqrt() * factor)
        })
        .collect()
}

const KERNEL_CUTOFF: f64 = 8.0;

/// Product-Gaussian KDE with Scott bandwidths evaluated on `axes`.
///
/// Grid cells farther than eight bandwidths from a sample along any axis get
/// no contribution from it.
pub fn gaussian_kde(samples: &[Vec<f64>], axes: Vec<GridAxis>) -> Result<DensityGrid> {
    if samples.len() < 30 {
        return Err(Error::InvalidInput(format!("KDE needs at least 30 samples, got {}", samples.len())));
    }
    let d = axes.len();
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::DimensionMismatch("samples and grid differ in dimension".into()));
    }
    let h = scott_bandwidths(samples)?;
    kde_with_bandwidths(samples, axes, &h)
}

pub fn kde_with_bandwidths(samples: &[Vec<f64>], axes: Vec<GridAxis>, h: &[f64]) -> Result<DensityGrid> {
    let d = axes.len();
    let m = samples.len() as f64;
    let norm: f64 = h.iter().map(|hj| 1.0 / (hj * (2.0 * std::f64::consts::PI).sqrt())).product::<f64>() / m;
    let size: usize = axes.iter().map(|a| a.count).product();
    let strides: Vec<usize> = (0..d).map(|j| axes[j + 1..].iter().map(|a| a.count).product()).collect();

    // split samples into fixed chunks so the reduction order is thread-independent
    let chunk = 4096;
    let partials: Vec<Vec<f64>> = samples
        .par_chunks(chunk)
        .map(|block| {
            let mut acc = vec![0.0; size];
            let mut windows: Vec<(usize, Vec<f64>)> = vec![(0, Vec::new()); d];
            for s in block {
                for j in 0..d {
                    let a = &axes[j];
                    let lo = ((s[j] - KERNEL_CUTOFF * h[j] - a.lo) / a.step - 0.5).floor().max(0.0) as usize;
                    let hi_f = ((s[j] + KERNEL_CUTOFF * h[j] - a.lo) / a.step - 0.5).ceil();
                    let hi = if hi_f < 0.0 { 0 } else { (hi_f as usize + 1).min(a.count) };
                    let vals: Vec<f64> = (lo..hi.max(lo))
                        .map(|i| {
                            let z = (a.point(i) - s[j]) / h[j];
                            (-0.5 * z * z).exp()
                        })
                        .collect();
                    windows[j] = (lo, vals);
                }
                add_product(&mut acc, &windows, &strides, 0, 0, 1.0);
            }
            acc
        })
        .collect();
    let mut values = vec![0.0; size];
    for p in &partials {
        for (v, a) in values.iter_mut().zip(p) {
            *v += a;
        }
    }
    values.iter_mut().for_each(|v| *v *= norm);
    DensityGrid::new(axes, values)
}

fn add_product(acc: &mut [f64], windows: &[(usize, Vec<f64>)], strides: &[usize], axis: usize, offset: usize, w: f64) {
    let (lo, vals) = &windows[axis];
    if axis + 1 == windows.len() {
        for (i, v) in vals.iter().enumerate() {
            acc[offset + (lo + i) * strides[axis]] += w * v;
        }
    } else {
        for (i, v) in vals.iter().enumerate() {
            add_product(acc, windows, strides, axis + 1, offset + (lo + i) * strides[axis], w * v);
        }
    }
}

const KL_FLOOR: f64 = 1e-12;

/// `∫ p log(p / q)` with both densities floored at `1e-12` inside the
/// logarithm, so identical grids give exactly zero.
pub fn kl(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    p.check_same(q)?;
    let s: f64 = p
        .values
        .iter()
        .zip(&q.values)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a.max(KL_FLOOR) / b.max(KL_FLOOR)).ln())
        .sum();
    Ok(s * p.cell_volume())
}

/// `‖√p − √q‖₂ / √2`.
pub fn hellinger(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    p.check_same(q)?;
    let s: f64 = p.values.iter().zip(&q.values).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok((0.5 * s * p.cell_volume()).sqrt())
}

/// `‖p − q‖₁ / 2`.
pub fn total_variation(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    p.check_same(q)?;
    let s: f64 = p.values.iter().zip(&q.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(0.5 * s * p.cell_volume())
}

/// `−(1/M) Σᵢ log mᵢ(yᵢ)`.
pub fn mean_negative_log_likelihood(predictives: &[GaussianMixture], outputs: &[Vec<f64>]) -> Result<f64> {
    if predictives.len() != outputs.len() || predictives.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictives for {} outputs",
            predictives.len(),
            outputs.len()
        )));
    }
    let mut total = 0.0;
    for (i, (m, y)) in predictives.iter().zip(outputs).enumerate() {
        let v = m.logpdf(y)?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("log-likelihood of test point {i}")));
        }
        total -= v;
    }
    Ok(total / predictives.len() as f64)
}

/// Divergences between the true conditional density and a predictive at one
/// context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextMetrics {
    pub kl: f64,
    pub hellinger: f64,
    pub tv: f64,
}

impl ContextMetrics {
    pub fn mean(rows: &[ContextMetrics]) -> ContextMetrics {
        let n = rows.len() as f64;
        ContextMetrics {
            kl: rows.iter().map(|r| r.kl).sum::<f64>() / n,
            hellinger: rows.iter().map(|r| r.hellinger).sum::<f64>() / n,
            tv: rows.iter().map(|r| r.tv).sum::<f64>() / n,
        }
    }
}

/// Default seed of the held-out evaluation contexts.
pub const EVAL_SEED: u64 = 1;

/// Settings of the held-out evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Draws from the true conditional (and from the predictive, for the grid box).
    pub samples: usize,
    /// Cells per axis.
    pub grid: usize,
    pub seed: u64,
}

impl EvalConfig {
    pub fn for_kind(kind: SynthKind, seed: u64) -> Self {
        match kind {
            SynthKind::OneD => EvalConfig { samples: 100_000, grid: 512, seed },
            SynthKind::TwoD => EvalConfig { samples: 100_000, grid: 128, seed },
        }
    }
}

/// Ground truth and predictive on a shared grid.
#[derive(Debug, Clone)]
pub struct ContextGrids {
    pub truth: DensityGrid,
    pub model: DensityGrid,
}

/// KDE of the true conditional and the predictive density on a box spanning
/// both sample sets, padded by three bandwidths per side.
pub fn context_grids(
    kind: SynthKind,
    ctx: &SynthContext,
    predictive: &GaussianMixture,
    cfg: &EvalConfig,
    context_index: u64,
) -> Result<ContextGrids> {
    let truth_samples = true_conditional_samples(kind, ctx, cfg.samples, cfg.seed ^ (context_index << 20))?;
    let mut rng = stream(cfg.seed, (1 << 40) + context_index);
    let model_samples: Vec<Vec<f64>> = (0..cfg.samples).map(|_| predictive.sample(&mut rng)).collect();
    let h = scott_bandwidths(&truth_samples)?;
    let d = kind.dy();
    let mut axes = Vec::with_capacity(d);
    for j in 0..d {
        let (lo, hi) = truth_samples
            .iter()
            .chain(&model_samples)
            .map(|s| s[j])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        axes.push(GridAxis::covering(lo - 3.0 * h[j], hi + 3.0 * h[j], cfg.grid)?);
    }
    let truth = kde_with_bandwidths(&truth_samples, axes.clone(), &h)?;
    let model = DensityGrid::from_mixture(axes, predictive)?;
    Ok(ContextGrids { truth, model })
}

/// KL(true ‖ predictive), Hellinger and TV at one context.
pub fn evaluate_context(
    kind: SynthKind,
    ctx: &SynthContext,
    predictive: &GaussianMixture,
    cfg: &EvalConfig,
    context_index: u64,
) -> Result<ContextMetrics> {
    let g = context_grids(kind, ctx, predictive, cfg, context_index)?;
    Ok(ContextMetrics {
        kl: kl(&g.truth, &g.model)?,
        hellinger: hellinger(&g.truth, &g.model)?,
        tv: total_variation(&g.truth, &g.model)?,
    })
}

/// Held-out contexts with their metrics.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub contexts: Vec<SynthContext>,
    pub metrics: Vec<ContextMetrics>,
}

impl Benchmark {
    pub fn mean(&self) -> ContextMetrics {
        ContextMetrics::mean(&self.metrics)
    }
}

/// Draws `count` contexts from `cfg.seed`, builds the fitted predictive at
/// each one (posterior draws from stream 3 of the same seed) and scores it.
pub fn evaluate_fitted(
    kind: SynthKind,
    data: &Dataset,
    state: &VariationalState,
    count: usize,
    cfg: &EvalConfig,
    ke: usize,
    kg: usize,
) -> Result<Benchmark> {
    let contexts = draw_contexts(kind, count, cfg.seed);
    let draws = PosteriorDraws::new(data, state, ke, kg, &mut stream(cfg.seed, 3))?;
    let metrics = contexts
        .iter()
        .enumerate()
        .map(|(i, ctx)| evaluate_context(kind, ctx, &draws.predictive(&ctx.x, data)?, cfg, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(Benchmark { contexts, metrics })
}

/// The same protocol for the Nadaraya–Watson baseline.
pub fn evaluate_baseline(kind: SynthKind, data: &Dataset, count: usize, cfg: &EvalConfig, nw: &NwConfig) -> Result<Benchmark> {
    let contexts = draw_contexts(kind, count, cfg.seed);
    let metrics = contexts
        .iter()
        .enumerate()
        .map(|(i, ctx)| evaluate_context(kind, ctx, &nadaraya_watson_mixture(&ctx.x, data, nw)?, cfg, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(Benchmark { contexts, metrics })
}
