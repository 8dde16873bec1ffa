//! Special functions: log-gamma, digamma and the multivariate log-gamma.

use crate::error::{Error, Result};
use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `log Γ(x)` for `x > 0` (Lanczos approximation, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma({x:e})")));
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // reflection
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma_unchecked(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// Digamma function `ψ(x)` for `x > 0`.
///
/// Shifts the argument above 10 with `ψ(x) = ψ(x+1) − 1/x`, then sums the
/// asymptotic Bernoulli series.
pub fn digamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("digamma({x:e})")));
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked<T: Real>(mut x: T) -> T {
    let mut shift = T::zero();
    let ten = T::lit(10.0);
    while x < ten {
        shift = shift - T::one() / x;
        x = x + T::one();
    }
    let inv = T::one() / x;
    let inv2 = inv * inv;
    // B2k / 2k for k = 1..7
    let series = inv2
        * (T::lit(1.0 / 12.0)
            - inv2
                * (T::lit(1.0 / 120.0)
                    - inv2
                        * (T::lit(1.0 / 252.0)
                            - inv2
                                * (T::lit(1.0 / 240.0)
                                    - inv2
                                        * (T::lit(1.0 / 132.0)
                                            - inv2
                                                * (T::lit(691.0 / 32760.0)
                                                    - inv2 * T::lit(1.0 / 12.0)))))));
    shift + x.ln() - T::lit(0.5) * inv - series
}

/// `Σᵢ₌₁ᵈ ψ((a + 1 − i)/2)`, the digamma sum appearing in Wishart expectations.
pub fn digamma_sum<T: Real>(d: usize, a: T) -> Result<T> {
    let two = T::lit(2.0);
    (1..=d).map(|i| digamma((a + T::one() - T::from_usize_lossy(i)) / two)).sum()
}

/// Multivariate log-gamma `log Γ_d(a) = d(d−1)/4 log π + Σⱼ log Γ(a + (1−j)/2)`.
pub fn multivariate_log_gamma<T: Real>(d: usize, a: T) -> Result<T> {
    if d == 0 {
        return Err(Error::Domain("multivariate_log_gamma with d = 0".into()));
    }
    let df = T::from_usize_lossy(d);
    if !(a > (df - T::one()) / T::lit(2.0)) {
        return Err(Error::Domain(format!("multivariate_log_gamma({d}, {a:e}) requires a > (d-1)/2")));
    }
    let mut acc = df * (df - T::one()) / T::lit(4.0) * T::PI().ln();
    for j in 1..=d {
        acc = acc + ln_gamma(a + (T::one() - T::from_usize_lossy(j)) / T::lit(2.0))?;
    }
    Ok(acc)
}
