use num_complex::Complex64;
use statrs::function::gamma as real_gamma;

use crate::error::{domain, Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

// B_{2k} / (2k (2k - 1)), k = 1..=8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// Below this real part the argument is shifted up before the Stirling series.
const SHIFT_TO: f64 = 10.0;

/// Principal branch of `ln Γ(z)`.
///
/// Arguments with `Re z < 10` are moved right with `ln Γ(z) = ln Γ(z + n) - Σ ln(z + k)`;
/// every shifted term stays in the same half plane as `z`, so the sum of
/// principal logarithms reproduces the principal branch (the continuation of
/// the real `ln Γ` that is continuous off the negative real axis).
pub fn log_gamma_complex(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(domain(format!("log_gamma of non-finite {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(Error::Pole { re: z.re, im: z.im });
    }
    Ok(log_gamma_unchecked(z))
}

/// [`log_gamma_complex`] without the argument checks, for hot loops whose
/// contours are already known to be pole free.
#[inline]
pub(crate) fn log_gamma_unchecked(z: Complex64) -> Complex64 {
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while w.re < SHIFT_TO {
        shift += w.ln();
        w.re += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    for c in STIRLING.iter().rev() {
        series = series * inv2 + c;
    }
    series *= inv;
    (w - 0.5) * w.ln() - w + HALF_LN_2PI + series - shift
}

/// Real `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    real_gamma::ln_gamma(x)
}

/// Upper incomplete gamma function `Γ(s, x) = ∫_x^∞ t^{s-1} e^{-t} dt`.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(domain(format!("upper incomplete gamma needs s > 0, got {s}")));
    }
    if !(x >= 0.0) {
        return Err(domain(format!("upper incomplete gamma needs x >= 0, got {x}")));
    }
    let full = real_gamma::gamma(s);
    if x == 0.0 {
        return Ok(full);
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(regularized_upper(s, x) * full)
}

/// Regularised `Q(s, x) = Γ(s, x) / Γ(s)`; `x = 0` gives 1.
pub fn regularized_upper(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        real_gamma::gamma_ur(s, x)
    }
}

/// `ln Q(s, x)`, still finite where `Q` itself underflows.
pub fn ln_regularized_upper(s: f64, x: f64) -> f64 {
    let q = regularized_upper(s, x);
    if q > 1e-290 {
        return q.ln();
    }
    // Asymptotic series of Γ(s, x) x^{1-s} e^{x}; x is large here.
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..12 {
        term *= (s - k as f64) / x;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (s - 1.0) * x.ln() - x + sum.ln() - ln_gamma(s)
}

/// Regularised lower incomplete gamma `P(s, x)`; `x = 0` gives 0.
pub fn regularized_lower(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        real_gamma::gamma_lr(s, x)
    }
}
