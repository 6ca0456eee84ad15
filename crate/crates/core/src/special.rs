//! Modified Bessel function of the second kind and the Matérn correlation.

use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Arguments above this make `e^{-x}` underflow.
const UNDERFLOW_ARG: f64 = 745.0;
/// Values below this are flushed to zero.
pub const FLUSH_BELOW: f64 = 1e-300;

/// Taylor coefficients of `1/Γ(z) = Σ c_k z^k`, k = 1..26.
const RGAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// `(1/Γ(1-μ) - 1/Γ(1+μ)) / 2μ` and `(1/Γ(1-μ) + 1/Γ(1+μ)) / 2` for |μ| ≤ 1/2.
fn temme_gammas(mu: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    let (mut g1, mut g2) = (0.0, 0.0);
    // Even k (1-based) feed g1, odd k feed g2; Horner in μ².
    for k in (0..RGAMMA.len()).rev() {
        if k % 2 == 1 {
            g1 = g1 * mu2 + RGAMMA[k];
        } else {
            g2 = g2 * mu2 + RGAMMA[k];
        }
    }
    (-g1, g2)
}

fn is_half_integer(nu: f64) -> bool {
    let t = nu - 0.5;
    t >= 0.0 && t == libm::floor(t)
}

/// `e^x K_ν(x)`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::NonPositiveArgument(x));
    }
    let nu = nu.abs();
    if is_half_integer(nu) {
        return Ok(half_integer_scaled(nu, x));
    }
    let nl = libm::floor(nu + 0.5);
    let mu = nu - nl;
    let (mut k_mu, mut k_mu1) = if x < 2.0 { temme(mu, x) } else { steed(mu, x) };
    let xi2 = 2.0 / x;
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * xi2 * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    Ok(k_mu)
}

/// Modified Bessel function of the second kind `K_ν(x)` for `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let scaled = bessel_k_scaled(nu, x)?;
    if x > UNDERFLOW_ARG {
        return Ok(0.0);
    }
    Ok(scaled * libm::exp(-x))
}

fn half_integer_scaled(nu: f64, x: f64) -> f64 {
    let k0 = libm::sqrt(PI / (2.0 * x));
    let mut lo = k0;
    let mut hi = k0 * (1.0 + 1.0 / x);
    let steps = (nu - 0.5) as usize;
    if steps == 0 {
        return lo;
    }
    for i in 1..steps {
        let mu = i as f64 + 0.5;
        let next = lo + 2.0 * mu / x * hi;
        lo = hi;
        hi = next;
    }
    hi
}

/// Temme's series for `e^x K_μ(x)` and `e^x K_{μ+1}(x)`, |μ| ≤ 1/2, x < 2.
fn temme(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < f64::EPSILON { 1.0 } else { pimu / libm::sin(pimu) };
    let d = -libm::log(x2);
    let e = mu * d;
    let fact2 = if e.abs() < f64::EPSILON { 1.0 } else { libm::sinh(e) / e };
    let (gam1, gam2) = temme_gammas(mu);
    let gampl = gam2 - mu * gam1;
    let gammi = gam2 + mu * gam1;
    let mut ff = fact * (gam1 * libm::cosh(e) + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = libm::exp(e);
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..500 {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    let scale = libm::exp(x);
    (sum * scale, sum1 * (2.0 / x) * scale)
}

/// Steed's continued fraction for `e^x K_μ(x)` and `e^x K_{μ+1}(x)`, x ≥ 2.
fn steed(mu: f64, x: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    h *= a1;
    let k_mu = libm::sqrt(PI / (2.0 * x)) / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    (k_mu, k_mu1)
}

/// Matérn correlation `f_ν(r) = 2^{1-ν}/Γ(ν) · r^ν K_ν(r)` with a
/// precomputed normalizing constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matern {
    nu: f64,
    log_norm: f64,
}

impl Matern {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("smoothness must be positive, got {nu}")));
        }
        let log_norm = (1.0 - nu) * core::f64::consts::LN_2 - libm::lgamma(nu);
        Ok(Self { nu, log_norm })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Correlation at scaled distance `r ≥ 0`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        if r > UNDERFLOW_ARG {
            return 0.0;
        }
        let v = if self.nu == 0.5 {
            libm::exp(-r)
        } else if self.nu == 1.5 {
            (1.0 + r) * libm::exp(-r)
        } else if self.nu == 2.5 {
            (1.0 + r + r * r / 3.0) * libm::exp(-r)
        } else {
            // r > 0 here, so the scaled Bessel call cannot fail.
            let ks = bessel_k_scaled(self.nu, r).unwrap_or(0.0);
            if !ks.is_finite() {
                return 1.0;
            }
            libm::exp(self.log_norm + self.nu * libm::log(r) - r) * ks
        };
        if v < FLUSH_BELOW {
            0.0
        } else {
            v.min(1.0)
        }
    }
}

/// Matérn correlation at scaled distance `r` for smoothness `nu`.
pub fn matern_correlation(r: f64, nu: f64) -> Result<f64> {
    Ok(Matern::new(nu)?.eval(r))
}
