//! Gaussian, Wishart and normal–inverse-Wishart densities, samplers and
//! conjugate expectations.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, sub_vec, LowerTriangular, Matrix};
use crate::scalar::Real;
use crate::special::{digamma_sum, multivariate_log_gamma};

/// Multivariate normal log-density `log N(y | mu, sigma)`.
pub fn mvn_logpdf<T: Real>(y: &[T], mu: &[T], sigma: &Matrix<T>) -> Result<T> {
    if y.len() != mu.len() || sigma.rows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "mvn_logpdf: y has {}, mu has {}, sigma is {}x{}",
            y.len(),
            mu.len(),
            sigma.rows(),
            sigma.cols()
        )));
    }
    let l = cholesky(sigma)?;
    Ok(mvn_logpdf_chol(y, mu, &l))
}

/// Same as [`mvn_logpdf`] with a precomputed Cholesky factor of the covariance.
pub fn mvn_logpdf_chol<T: Real>(y: &[T], mu: &[T], chol: &LowerTriangular<T>) -> T {
    let d = T::from_usize_lossy(y.len());
    let diff = sub_vec(y, mu);
    let half = T::lit(0.5);
    -half * (d * (T::lit(2.0) * T::PI()).ln() + chol.log_det() + chol.inv_quad(&diff))
}

/// Wishart log-density `log W(x | scale, dof)` (mean `dof · scale`).
pub fn wishart_logpdf<T: Real>(x: &Matrix<T>, scale: &Matrix<T>, dof: T) -> Result<T> {
    let d = x.rows();
    let df = T::from_usize_lossy(d);
    let half = T::lit(0.5);
    let lx = cholesky(x)?;
    let ls = cholesky(scale)?;
    // tr(scale⁻¹ x) = Σⱼ xⱼᵀ scale⁻¹ eⱼ
    let mut tr = T::zero();
    for j in 0..d {
        let col = x.column(j);
        tr = tr + ls.solve(&col)[j];
    }
    Ok(-half * dof * df * T::LN_2() - half * dof * ls.log_det() - multivariate_log_gamma(d, half * dof)?
        + half * (dof - df - T::one()) * lx.log_det()
        - half * tr)
}

/// Inverse-Wishart log-density `log IW(x | scale, dof)`.
pub fn inv_wishart_logpdf<T: Real>(x: &Matrix<T>, scale: &Matrix<T>, dof: T) -> Result<T> {
    let d = x.rows();
    let df = T::from_usize_lossy(d);
    let half = T::lit(0.5);
    let lx = cholesky(x)?;
    let ls = cholesky(scale)?;
    let mut tr = T::zero();
    for j in 0..d {
        let col = scale.column(j);
        tr = tr + lx.solve(&col)[j];
    }
    Ok(half * dof * ls.log_det() - half * dof * df * T::LN_2() - multivariate_log_gamma(d, half * dof)?
        - half * (dof + df + T::one()) * lx.log_det()
        - half * tr)
}

/// Parameters of a normal–inverse-Wishart distribution:
/// `Σ ~ IW(sigma, nu)`, `μ | Σ ~ N(mu, Σ / kappa)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwParams<T> {
    pub mu: Vec<T>,
    pub kappa: T,
    pub sigma: Matrix<T>,
    pub nu: T,
}

impl<T: Real> NiwParams<T> {
    pub fn new(mu: Vec<T>, kappa: T, sigma: Matrix<T>, nu: T) -> Result<Self> {
        let p = NiwParams { mu, kappa, sigma, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.sigma.rows() != d || self.sigma.cols() != d {
            return Err(Error::DimensionMismatch("NIW scale does not match mean".into()));
        }
        if !(self.kappa > T::zero()) || !self.kappa.is_finite() {
            return Err(Error::Domain(format!("NIW kappa = {:e}", self.kappa)));
        }
        if !(self.nu > T::from_usize_lossy(d) - T::one()) || !self.nu.is_finite() {
            return Err(Error::Domain(format!("NIW nu = {:e} with dimension {d}", self.nu)));
        }
        cholesky(&self.sigma)?;
        Ok(())
    }

    /// `E Σ = sigma / (nu − d − 1)`, defined for `nu > d + 1`.
    pub fn covariance_mean(&self) -> Result<Matrix<T>> {
        let d = T::from_usize_lossy(self.dim());
        let denom = self.nu - d - T::one();
        if !(denom > T::zero()) {
            return Err(Error::Domain(format!(
                "inverse-Wishart mean needs nu > d + 1 (nu = {:e})",
                self.nu
            )));
        }
        Ok(self.sigma.scale(T::one() / denom))
    }
}

/// The three closed-form NIW expectations used throughout inference.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwExpectations<T> {
    /// `E Σ⁻¹ = ν Σ₀⁻¹`
    pub e_inv_scale: Matrix<T>,
    /// `E log det Σ = −Σᵢ ψ((ν+1−i)/2) − d log 2 + log det Σ₀`
    pub e_logdet: T,
    /// `E (y−μ)ᵀ Σ⁻¹ (y−μ) = d/κ + ν (y−μ₀)ᵀ Σ₀⁻¹ (y−μ₀)`
    pub e_mahalanobis: T,
}

pub fn niw_expectations<T: Real>(p: &NiwParams<T>, y: &[T]) -> Result<NiwExpectations<T>> {
    if y.len() != p.dim() {
        return Err(Error::DimensionMismatch("niw_expectations: y dimension".into()));
    }
    let d = p.dim();
    let df = T::from_usize_lossy(d);
    let l = cholesky(&p.sigma)?;
    let e_inv_scale = l.inverse_of_product().scale(p.nu);
    let e_logdet = -digamma_sum(d, p.nu)? - df * T::LN_2() + l.log_det();
    let diff = sub_vec(y, &p.mu);
    let e_mahalanobis = df / p.kappa + p.nu * l.inv_quad(&diff);
    Ok(NiwExpectations { e_inv_scale, e_logdet, e_mahalanobis })
}

/// `E log det Λ` for `Λ ~ W(L Lᵀ, eta)`.
pub fn wishart_expected_logdet<T: Real>(chol: &LowerTriangular<T>, eta: T) -> Result<T> {
    let d = chol.dim();
    Ok(digamma_sum(d, eta)? + T::from_usize_lossy(d) * T::LN_2() + chol.log_det())
}

fn check_bartlett_dof(d: usize, eta: f64) -> Result<()> {
    if !(eta >= d as f64) || !eta.is_finite() {
        return Err(Error::Domain(format!(
            "Bartlett sampling needs degrees of freedom >= dimension ({eta} < {d})"
        )));
    }
    Ok(())
}

/// Draws the Bartlett factor `A`: lower triangular with `Aᵢᵢ² ~ χ²(eta + 1 − i)`
/// and standard normal entries below the diagonal, so that `A Aᵀ ~ W(I, eta)`.
pub fn sample_bartlett_factor<R: Rng + ?Sized>(d: usize, eta: f64, rng: &mut R) -> Result<LowerTriangular<f64>> {
    check_bartlett_dof(d, eta)?;
    let mut a = Matrix::zeros(d, d);
    for i in 0..d {
        // one-based row index i + 1
        let k = eta - i as f64;
        let gamma = Gamma::new(0.5 * k, 2.0).map_err(|e| Error::Domain(e.to_string()))?;
        let chi2: f64 = gamma.sample(rng);
        a[(i, i)] = chi2.sqrt().max(f64::MIN_POSITIVE);
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    LowerTriangular::new(a)
}

/// Draws `Λ ~ W(L Lᵀ, eta)` as `L A Aᵀ Lᵀ`.
pub fn sample_wishart_bartlett<R: Rng + ?Sized>(
    l: &LowerTriangular<f64>,
    eta: f64,
    rng: &mut R,
) -> Result<Matrix<f64>> {
    let a = sample_bartlett_factor(l.dim(), eta, rng)?;
    Ok(l.mul(&a).reconstruct())
}

/// A draw from an inverse-Wishart together with a square-root factor
/// `T` satisfying `T Tᵀ = Σ`.
#[derive(Debug, Clone)]
pub struct InvWishartDraw {
    pub sigma: Matrix<f64>,
    pub root: Matrix<f64>,
}

/// Draws `Σ ~ IW(scale, nu)` as the inverse of a Bartlett Wishart draw with
/// scale `scale⁻¹`.
///
/// With `scale = U Uᵀ`, the matrix `U⁻ᵀ A Aᵀ U⁻¹` is `W(scale⁻¹, nu)` and its
/// inverse is `(U A⁻ᵀ)(U A⁻ᵀ)ᵀ`, so only triangular inverses are needed.
pub fn sample_inv_wishart<R: Rng + ?Sized>(scale: &Matrix<f64>, nu: f64, rng: &mut R) -> Result<InvWishartDraw> {
    let u = cholesky(scale)?;
    let d = u.dim();
    let a = sample_bartlett_factor(d, nu, rng)?;
    let a_inv = a.inverse();
    // root = U · (A⁻¹)ᵀ
    let mut root = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..=i.min(j) {
                s += u.get(i, k) * a_inv.get(j, k);
            }
            root[(i, j)] = s;
        }
    }
    let mut sigma = root.matmul(&root.transpose())?;
    sigma.symmetrize();
    Ok(InvWishartDraw { sigma, root })
}

/// Draws `(μ, Σ)` from a normal–inverse-Wishart.
pub fn sample_niw<R: Rng + ?Sized>(p: &NiwParams<f64>, rng: &mut R) -> Result<(Vec<f64>, Matrix<f64>)> {
    let draw = sample_inv_wishart(&p.sigma, p.nu, rng)?;
    let d = p.dim();
    let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let s = 1.0 / p.kappa.sqrt();
    let mu = (0..d).map(|i| p.mu[i] + s * dot(draw.root.row(i), &g)).collect();
    Ok((mu, draw.sigma))
}

/// Draws `y ~ N(mu, L Lᵀ)`.
pub fn sample_mvn<R: Rng + ?Sized>(mu: &[f64], chol: &LowerTriangular<f64>, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..mu.len()).map(|_| StandardNormal.sample(rng)).collect();
    chol.mul_vec(&g).iter().zip(mu).map(|(a, b)| a + b).collect()
}
