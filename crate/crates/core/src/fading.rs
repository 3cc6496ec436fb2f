//! Fading and interference laws: the α-µ squared envelope of the desired
//! link, the aggregate Rayleigh-path interference and the residual
//! self-interference power.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special_fn::{ln_gamma, regularized_lower};

/// α-µ fading of the squared envelope `|h|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaMuParams {
    pub alpha: f64,
    pub mu: f64,
    /// `E[|h|²]`.
    pub mean_power: f64,
}

impl AlphaMuParams {
    pub fn new(alpha: f64, mu: f64, mean_power: f64) -> Result<Self> {
        let p = Self {
            alpha,
            mu,
            mean_power,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("mu", self.mu), ("mean_power", self.mean_power)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.beta_scale() > 0.0 && self.beta_scale().is_finite()) {
            return Err(Error::Config(format!("degenerate alpha-mu scale for {self:?}")));
        }
        Ok(())
    }

    /// `β = Ῡ Γ(µ) / Γ(µ + 2/α)`.
    pub fn beta_scale(&self) -> f64 {
        let d = 2.0 / self.alpha;
        // Integer shifts (α = 2, 1, ...) by recurrence, exactly to rounding.
        if d == d.round() && d <= 8.0 {
            let prod: f64 = (0..d as u32).map(|k| self.mu + k as f64).product();
            return self.mean_power / prod;
        }
        self.mean_power * (ln_gamma(self.mu) - ln_gamma(self.mu + d)).exp()
    }
}

impl Default for AlphaMuParams {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            mu: 1.0,
            mean_power: 1.0,
        }
    }
}

/// `ln f(x)` of the squared α-µ variable with scale `beta`, for `x > 0`.
pub(crate) fn alpha_mu_log_pdf_scaled(alpha: f64, mu: f64, beta: f64, x: f64) -> f64 {
    let k = 0.5 * alpha * mu;
    alpha.ln() - std::f64::consts::LN_2 - ln_gamma(mu) + (k - 1.0) * x.ln()
        - k * beta.ln()
        - (x / beta).powf(0.5 * alpha)
}

/// Density of `|h|²`.
pub fn alpha_mu_pdf(p: &AlphaMuParams, x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(domain(format!("alpha_mu_pdf needs x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(alpha_mu_log_pdf_scaled(p.alpha, p.mu, p.beta_scale(), x).exp())
}

/// Distribution function of `|h|²`: `P(µ, (x/β)^{α/2})`.
pub fn alpha_mu_cdf(p: &AlphaMuParams, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    regularized_lower(p.mu, (x / p.beta_scale()).powf(0.5 * p.alpha))
}

/// Reusable `|h|²` sampler: `β·G^{2/α}` with `G ~ Gamma(µ, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct AlphaMuSampler {
    gamma: Gamma<f64>,
    beta: f64,
    exponent: f64,
}

impl AlphaMuSampler {
    pub fn new(p: &AlphaMuParams) -> Result<Self> {
        p.validate()?;
        let gamma = Gamma::new(p.mu, 1.0).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            gamma,
            beta: p.beta_scale(),
            exponent: 2.0 / p.alpha,
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.beta * self.gamma.sample(rng).powf(self.exponent)
    }
}

pub fn sample_alpha_mu<R: Rng + ?Sized>(p: &AlphaMuParams, rng: &mut R) -> Result<f64> {
    Ok(AlphaMuSampler::new(p)?.sample(rng))
}

/// Aggregate interference `U = Σ |g_i|²` over `n_paths` Rayleigh paths,
/// each with `E|g_i|² = eta`, transmitted at `power` watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceParams {
    pub n_paths: u32,
    pub eta: f64,
    pub power: f64,
}

impl InterferenceParams {
    pub fn new(n_paths: u32, eta: f64, power: f64) -> Result<Self> {
        let p = Self { n_paths, eta, power };
        p.validate()?;
        Ok(p)
    }

    pub fn none() -> Self {
        Self {
            n_paths: 0,
            eta: 1.0,
            power: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(Error::Config(format!(
                "interference power must be >= 0, got {}",
                self.power
            )));
        }
        Ok(())
    }

    /// Whether interference contributes at all.
    pub fn is_active(&self) -> bool {
        self.n_paths > 0 && self.power > 0.0
    }
}

/// Gamma(N, η) density of the aggregate interference gain `U`.
pub fn aggregate_interference_pdf(p: &InterferenceParams, x: f64) -> Result<f64> {
    if p.n_paths == 0 {
        return Err(domain("aggregate interference pdf undefined with n_paths = 0"));
    }
    if !(x >= 0.0) {
        return Err(domain(format!("aggregate interference pdf needs x > 0, got {x}")));
    }
    let n = p.n_paths as f64;
    if x == 0.0 {
        return Ok(if p.n_paths == 1 { 1.0 / p.eta } else { 0.0 });
    }
    Ok(((n - 1.0) * x.ln() - n * p.eta.ln() - ln_gamma(n) - x / p.eta).exp())
}

#[derive(Debug, Clone, Copy)]
pub struct InterferenceSampler {
    n: u32,
    exp: Exp<f64>,
}

impl InterferenceSampler {
    pub fn new(p: &InterferenceParams) -> Result<Self> {
        p.validate()?;
        let exp = Exp::new(1.0 / p.eta).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { n: p.n_paths, exp })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (0..self.n).map(|_| self.exp.sample(rng)).sum()
    }
}

/// One draw of `U`; zero when there are no paths.
pub fn sample_aggregate_interference<R: Rng + ?Sized>(
    p: &InterferenceParams,
    rng: &mut R,
) -> Result<f64> {
    Ok(InterferenceSampler::new(p)?.sample(rng))
}

/// Residual self-interference after cancellation plus thermal noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfInterferenceParams {
    pub upsilon: f64,
    pub own_tx_power: f64,
    pub sigma_s_sq: f64,
    pub sigma_n_sq: f64,
}

impl SelfInterferenceParams {
    pub fn new(upsilon: f64, own_tx_power: f64, sigma_s_sq: f64, sigma_n_sq: f64) -> Result<Self> {
        let p = Self {
            upsilon,
            own_tx_power,
            sigma_s_sq,
            sigma_n_sq,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("upsilon", self.upsilon),
            ("own_tx_power", self.own_tx_power),
            ("sigma_s_sq", self.sigma_s_sq),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.sigma_n_sq > 0.0 && self.sigma_n_sq.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_n_sq must be positive, got {}",
                self.sigma_n_sq
            )));
        }
        Ok(())
    }
}

/// `φ = υ P σ_S² + σ_N²`.
pub fn residual_si_plus_noise_power(p: &SelfInterferenceParams) -> f64 {
    p.upsilon * p.own_tx_power * p.sigma_s_sq + p.sigma_n_sq
}
