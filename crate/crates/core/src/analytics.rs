//! SINR law, ergodic capacity and bit error probability.
//!
//! Every metric has two deterministic routes:
//!
//! - `Quadrature`: nested real-line integrals. The SINR density is
//!   `f(x) = E_U[(φ + ηP_I U) f_W(x(φ + ηP_I U))]` with `U ~ Gamma(N, 1)`
//!   and `W` the received signal power; capacity and BEP integrate it
//!   against `log₂(1 + x)` and `Γ(τ₂, τ₁x) / (2Γ(τ₂))`. All integrals run in
//!   log variables so deep tails keep their relative accuracy.
//! - `FoxH`: the same quantities as bivariate Mellin–Barnes integrals,
//!   evaluated with [`crate::special_fn::fox_h_bivariate`].
//!
//! With `Ω = P_j D^{-β} β_scale`, `φ` the self-interference-plus-noise power
//! and `b = η P_I`, the Mellin–Barnes kernels are
//!
//! ```text
//! pdf:      α/(2xΓ(µ)Γ(N)) · Γ(µ+t₁)Γ(t₂)Γ(N−t₂)Γ(αt₁/2−t₂) / Γ(αt₁/2)
//!           z₁ = (φx/Ω)^{α/2}
//! capacity: α/(ln4 Γ(µ)Γ(N)) · Γ(µ+t₁)Γ(t₂)Γ(N−t₂)Γ(αt₁/2−t₂)Γ(αt₁/2)Γ(1−αt₁/2) / Γ(1+αt₁/2)
//!           z₁ = (φ/Ω)^{α/2}
//! BEP:      1/2 − α/(4Γ(τ₂)Γ(µ)Γ(N)) · Γ(µ+t₁)Γ(t₂)Γ(N−t₂)Γ(αt₁/2−t₂)Γ(τ₂−αt₁/2) / Γ(1+αt₁/2)
//!           z₁ = (φ/(τ₁Ω))^{α/2}
//! ```
//!
//! each with `z₂ = b/φ` and kernel `z₁^{-t₁} z₂^{-t₂}`.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fading::alpha_mu_log_pdf_scaled;
use crate::link::LinkConfig;
use crate::quadrature::{integrate_log_window, LogEstimate, WindowOptions};
use crate::special_fn::{
    fox_h, ln_gamma, ln_regularized_upper, regularized_lower, regularized_upper, FoxHOptions, FoxHSpec, GammaFactor,
};

/// BEP values below this are flagged as underflow.
pub const BEP_FLOOR: f64 = 1e-12;

/// The Fox H route computes the BEP as 1/2 − H, so small values lose relative
/// accuracy to cancellation; past this relative error they are flagged.
pub const BEP_REL_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModulationScheme {
    CoherentBpsk,
    CoherentBfsk,
    NoncoherentBfsk,
    Dpsk,
}

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 4] = [
        ModulationScheme::CoherentBpsk,
        ModulationScheme::CoherentBfsk,
        ModulationScheme::NoncoherentBfsk,
        ModulationScheme::Dpsk,
    ];

    /// `(τ₁, τ₂)` of the conditional BEP `Γ(τ₂, τ₁γ) / (2Γ(τ₂))`.
    pub fn params(self) -> (f64, f64) {
        match self {
            ModulationScheme::CoherentBpsk => (1.0, 0.5),
            ModulationScheme::CoherentBfsk => (0.5, 0.5),
            ModulationScheme::NoncoherentBfsk => (0.5, 1.0),
            ModulationScheme::Dpsk => (1.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationScheme::CoherentBpsk => "coherent-bpsk",
            ModulationScheme::CoherentBfsk => "coherent-bfsk",
            ModulationScheme::NoncoherentBfsk => "noncoherent-bfsk",
            ModulationScheme::Dpsk => "dpsk",
        }
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "coherent-bpsk" | "bpsk" => Ok(ModulationScheme::CoherentBpsk),
            "coherent-bfsk" | "bfsk" => Ok(ModulationScheme::CoherentBfsk),
            "noncoherent-bfsk" | "ncbfsk" => Ok(ModulationScheme::NoncoherentBfsk),
            "dpsk" => Ok(ModulationScheme::Dpsk),
            other => Err(Error::Config(format!("unknown modulation '{other}'"))),
        }
    }
}

pub fn modulation_params(m: ModulationScheme) -> (f64, f64) {
    m.params()
}

/// BEP conditioned on SINR `gamma`.
pub fn conditional_bep(m: ModulationScheme, gamma: f64) -> f64 {
    let (tau1, tau2) = m.params();
    0.5 * regularized_upper(tau2, tau1 * gamma.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "quadrature")]
    Quadrature,
    #[serde(rename = "foxh")]
    FoxH,
    #[serde(rename = "mc")]
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::FoxH => "foxh",
            Method::MonteCarlo => "mc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadrature" | "quad" => Ok(Method::Quadrature),
            "foxh" | "fox-h" => Ok(Method::FoxH),
            "mc" | "montecarlo" | "monte-carlo" => Ok(Method::MonteCarlo),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricResult {
    pub value: f64,
    pub method: Method,
    /// Absolute error estimate (for Monte Carlo: the 95% CI half-width).
    pub error_estimate: f64,
    /// The value is below [`BEP_FLOOR`], or (Fox H route) its error estimate
    /// exceeds [`BEP_REL_RESOLUTION`] of the value.
    pub underflow: bool,
}

impl MetricResult {
    fn new(value: f64, method: Method, error_estimate: f64) -> Self {
        Self {
            value,
            method,
            error_estimate,
            underflow: false,
        }
    }
}

/// The handful of numbers every route needs.
#[derive(Debug, Clone, Copy)]
struct Channel {
    alpha: f64,
    mu: f64,
    omega: f64,
    phi: f64,
    b: f64,
    n: f64,
}

impl Channel {
    fn new(cfg: &LinkConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            alpha: cfg.fading.alpha,
            mu: cfg.fading.mu,
            omega: cfg.signal_scale(),
            phi: cfg.phi(),
            b: cfg.interference_scale(),
            n: cfg.interference.n_paths as f64,
        })
    }

    fn interference_free(&self) -> bool {
        self.b == 0.0
    }

    fn ln_f_w(&self, w: f64) -> f64 {
        alpha_mu_log_pdf_scaled(self.alpha, self.mu, self.omega, w)
    }

    /// Rough log of the typical SINR, used to seed window scans.
    fn ln_typical_sinr(&self) -> f64 {
        let mean_w = self.omega * (ln_gamma(self.mu + 2.0 / self.alpha) - ln_gamma(self.mu)).exp();
        (mean_w / (self.phi + self.b * self.n)).ln()
    }

    fn ln_pdf(&self, x: f64) -> Result<LogEstimate> {
        if self.interference_free() {
            return Ok(LogEstimate {
                ln_value: self.phi.ln() + self.ln_f_w(self.phi * x),
                rel_error: 0.0,
            });
        }
        // u = e^s, U ~ Gamma(N, 1): u^{N-1} e^{-u} du = e^{Ns - u} ds.
        let ln_gn = ln_gamma(self.n);
        let integrand = |s: f64| {
            let u = s.exp();
            let y = self.phi + self.b * u;
            y.ln() + self.ln_f_w(x * y) + self.n * s - u - ln_gn
        };
        integrate_log_window(integrand, self.n.ln(), WindowOptions::default())
    }

    /// `∫ exp(ln_weight(x)) f(x) dx` over `x > 0`, nested on the density quadrature.
    fn integrate_against_pdf<G: Fn(f64) -> f64>(&self, ln_weight: G) -> Result<LogEstimate> {
        let inner_err = Cell::new(0.0f64);
        let failure = Cell::new(None);
        let outer = |v: f64| {
            let x = v.exp();
            let lw = ln_weight(x);
            if lw == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            match self.ln_pdf(x) {
                Ok(p) => {
                    inner_err.set(inner_err.get().max(p.rel_error));
                    lw + p.ln_value + v
                }
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        };
        let est = integrate_log_window(outer, self.ln_typical_sinr(), WindowOptions::default());
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let est = est?;
        Ok(LogEstimate {
            ln_value: est.ln_value,
            rel_error: est.rel_error + inner_err.get(),
        })
    }
    /// `P(γ ≤ x)`, integrating the signal CDF against the interference law.
    fn cdf(&self, x: f64) -> Result<f64> {
        let a2 = 0.5 * self.alpha;
        let ln_f_w = |y: f64| regularized_lower(self.mu, (a2 * (x * y / self.omega).ln()).exp()).ln();
        if self.interference_free() {
            return Ok(ln_f_w(self.phi).exp());
        }
        let ln_gn = ln_gamma(self.n);
        let integrand = |s: f64| {
            let u = s.exp();
            ln_f_w(self.phi + self.b * u) + self.n * s - u - ln_gn
        };
        Ok(integrate_log_window(integrand, self.n.ln(), WindowOptions::default())?
            .value()
            .clamp(0.0, 1.0))
    }
}

fn zero_power_guard(cfg: &LinkConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.tx_power == 0.0 {
        return Err(domain("tx_power = 0: the SINR is identically zero and has no density"));
    }
    Ok(())
}

/// SINR density at `x` by direct quadrature.
pub fn sinr_pdf_quadrature(cfg: &LinkConfig, x: f64) -> Result<MetricResult> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("sinr pdf needs finite x > 0, got {x}")));
    }
    zero_power_guard(cfg)?;
    let ch = Channel::new(cfg)?;
    let est = ch.ln_pdf(x)?;
    Ok(MetricResult::new(est.value(), Method::Quadrature, est.abs_error()))
}

/// `ln` of the SINR density, for tails beyond `f64` range.
pub fn sinr_log_pdf_quadrature(cfg: &LinkConfig, x: f64) -> Result<LogEstimate> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("sinr pdf needs finite x > 0, got {x}")));
    }
    zero_power_guard(cfg)?;
    Channel::new(cfg)?.ln_pdf(x)
}

/// SINR distribution function by quadrature.
pub fn sinr_cdf_quadrature(cfg: &LinkConfig, x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_nan() {
        return Err(domain(format!("sinr cdf needs x >= 0, got {x}")));
    }
    zero_power_guard(cfg)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    Channel::new(cfg)?.cdf(x)
}

/// The `p`-quantile of the SINR, `0 < p < 1`, by bisection on the CDF.
pub fn sinr_quantile_quadrature(cfg: &LinkConfig, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("quantile level must lie in (0, 1), got {p}")));
    }
    zero_power_guard(cfg)?;
    let ch = Channel::new(cfg)?;
    let mid = ch.ln_typical_sinr();
    let (mut lo, mut hi) = (mid - 1.0, mid + 1.0);
    while ch.cdf(lo.exp())? > p {
        lo -= 2.0 * (mid - lo);
        if lo < -700.0 {
            return Err(domain(format!("quantile {p} below the representable range")));
        }
    }
    while ch.cdf(hi.exp())? < p {
        hi += 2.0 * (hi - mid);
        if hi > 700.0 {
            return Err(domain(format!("quantile {p} above the representable range")));
        }
    }
    while hi - lo > 1e-12 {
        let m = 0.5 * (lo + hi);
        if ch.cdf(m.exp())? < p {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

fn require_interference(ch: &Channel) -> Result<()> {
    if ch.interference_free() {
        return Err(domain(
            "the Fox H form needs active interference (N >= 1 and P_I > 0); use quadrature",
        ));
    }
    Ok(())
}

/// Common `Γ(µ+t₁)Γ(t₂)Γ(N−t₂)Γ(αt₁/2−t₂)` block.
fn core_factors(ch: &Channel) -> Vec<GammaFactor> {
    let a2 = 0.5 * ch.alpha;
    vec![
        GammaFactor::first(ch.mu, 1.0),
        GammaFactor::second(0.0, 1.0),
        GammaFactor::second(ch.n, -1.0),
        GammaFactor::new(0.0, a2, -1.0),
    ]
}

/// Mellin–Barnes form of the SINR density at `x`.
pub fn pdf_spec(cfg: &LinkConfig, x: f64) -> Result<FoxHSpec> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("sinr pdf needs finite x > 0, got {x}")));
    }
    zero_power_guard(cfg)?;
    let ch = Channel::new(cfg)?;
    require_interference(&ch)?;
    let a2 = 0.5 * ch.alpha;
    let ln_pref = ch.alpha.ln() - (2.0 * x).ln() - ln_gamma(ch.mu) - ln_gamma(ch.n);
    FoxHSpec::new(
        core_factors(&ch),
        vec![GammaFactor::first(0.0, a2)],
        [(a2 * (ch.phi * x / ch.omega).ln()).exp(), ch.b / ch.phi],
        ln_pref.exp(),
    )
}

/// Mellin–Barnes form of the ergodic capacity.
pub fn capacity_spec(cfg: &LinkConfig) -> Result<FoxHSpec> {
    zero_power_guard(cfg)?;
    let ch = Channel::new(cfg)?;
    require_interference(&ch)?;
    let a2 = 0.5 * ch.alpha;
    let mut num = core_factors(&ch);
    num.push(GammaFactor::first(0.0, a2));
    num.push(GammaFactor::first(1.0, -a2));
    let ln_pref = ch.alpha.ln() - 4f64.ln().ln() - ln_gamma(ch.mu) - ln_gamma(ch.n);
    FoxHSpec::new(
        num,
        vec![GammaFactor::first(1.0, a2)],
        [(a2 * (ch.phi / ch.omega).ln()).exp(), ch.b / ch.phi],
        ln_pref.exp(),
    )
}

/// Mellin–Barnes form of `1/2 − BEP`.
pub fn bep_spec(cfg: &LinkConfig, m: ModulationScheme) -> Result<FoxHSpec> {
    zero_power_guard(cfg)?;
    let ch = Channel::new(cfg)?;
    require_interference(&ch)?;
    let (tau1, tau2) = m.params();
    let a2 = 0.5 * ch.alpha;
    let mut num = core_factors(&ch);
    num.push(GammaFactor::first(tau2, -a2));
    let ln_pref =
        ch.alpha.ln() - 4f64.ln() - ln_gamma(tau2) - ln_gamma(ch.mu) - ln_gamma(ch.n);
    FoxHSpec::new(
        num,
        vec![GammaFactor::first(1.0, a2)],
        [(a2 * (ch.phi / (tau1 * ch.omega)).ln()).exp(), ch.b / ch.phi],
        ln_pref.exp(),
    )
}

fn foxh_opts(rel_tol: f64) -> FoxHOptions {
    FoxHOptions {
        rel_tol,
        ..FoxHOptions::default()
    }
}

/// SINR density at `x` from the bivariate Fox H form.
pub fn sinr_pdf_closed_form(cfg: &LinkConfig, x: f64) -> Result<MetricResult> {
    let spec = pdf_spec(cfg, x)?;
    let v = fox_h(&spec, foxh_opts(1e-9))?;
    Ok(MetricResult::new(v.value.max(0.0), Method::FoxH, v.error))
}

/// `E[log₂(1 + γ)]` in bits/s/Hz.
pub fn ergodic_capacity(cfg: &LinkConfig, method: Method) -> Result<MetricResult> {
    cfg.validate()?;
    if cfg.tx_power == 0.0 {
        return Ok(MetricResult::new(0.0, method, 0.0));
    }
    match method {
        Method::Quadrature => {
            let ch = Channel::new(cfg)?;
            let ln_ln2 = std::f64::consts::LN_2.ln();
            let est = ch.integrate_against_pdf(|x| {
                if x < 1e-12 {
                    x.ln() - ln_ln2
                } else {
                    x.ln_1p().ln() - ln_ln2
                }
            })?;
            Ok(MetricResult::new(est.value(), method, est.abs_error()))
        }
        Method::FoxH => {
            let v = fox_h(&capacity_spec(cfg)?, foxh_opts(1e-10))?;
            Ok(MetricResult::new(v.value.max(0.0), method, v.error))
        }
        Method::MonteCarlo => Err(Error::Config(
            "Monte Carlo estimates come from the montecarlo module".into(),
        )),
    }
}

/// Fading-averaged bit error probability of scheme `m`.
pub fn bit_error_probability(
    cfg: &LinkConfig,
    m: ModulationScheme,
    method: Method,
) -> Result<MetricResult> {
    cfg.validate()?;
    if cfg.tx_power == 0.0 {
        return Ok(MetricResult::new(0.5, method, 0.0));
    }
    let (tau1, tau2) = m.params();
    let mut r = match method {
        Method::Quadrature => {
            let ch = Channel::new(cfg)?;
            let est = ch.integrate_against_pdf(|x| {
                ln_regularized_upper(tau2, tau1 * x) - std::f64::consts::LN_2
            })?;
            MetricResult::new(est.value(), method, est.abs_error())
        }
        Method::FoxH => {
            let v = fox_h(&bep_spec(cfg, m)?, foxh_opts(1e-13))?;
            let bep = 0.5 - v.value;
            let mut r = MetricResult::new(bep.clamp(0.0, 0.5), method, v.error);
            r.underflow = v.error > BEP_REL_RESOLUTION * bep.abs();
            r
        }
        Method::MonteCarlo => {
            return Err(Error::Config(
                "Monte Carlo estimates come from the montecarlo module".into(),
            ))
        }
    };
    r.value = r.value.clamp(0.0, 0.5);
    r.underflow |= r.value < BEP_FLOOR;
    if r.method == Method::FoxH && r.underflow {
        r.value = r.value.clamp(BEP_FLOOR, 0.5);
    }
    Ok(r)
}

/// Find the mean fading power `Ῡ` at which `metric(cfg)` equals `target`.
///
/// `metric` must be monotone in `Ῡ`; the search brackets `Ῡ` in
/// `[1e-6, 1e9]` and bisects on `ln Ῡ`.
pub fn calibrate_mean_power<F>(cfg: &LinkConfig, target: f64, metric: F) -> Result<f64>
where
    F: Fn(&LinkConfig) -> Result<f64>,
{
    let eval = |ln_u: f64| {
        let mut c = *cfg;
        c.fading.mean_power = ln_u.exp();
        metric(&c).map(|v| v - target)
    };
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e9f64.ln());
    let f_lo = eval(lo)?;
    let f_hi = eval(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Config(format!(
            "calibration target {target} not bracketed by mean power in [1e-6, 1e9]"
        )));
    }
    let rising = f_hi > f_lo;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let f = eval(mid)?;
        if (f > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
