//! Parameter sweeps over link configurations and the payload degradation
//! study, with CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    bit_error_probability, calibrate_mean_power, ergodic_capacity, sinr_pdf_closed_form,
    sinr_pdf_quadrature, Method, MetricResult, ModulationScheme,
};
use crate::error::{Error, Result};
use crate::fading::{AlphaMuParams, InterferenceParams, SelfInterferenceParams};
use crate::link::{dbw_to_watt, LinkConfig};
use crate::montecarlo::{estimate_bep_mc, estimate_capacity_mc, estimate_pdf_mc, EstimateWithCI};
use crate::semantic_payload::{
    corrupt_bits, decode_message, encode_message, generate_fixture, match_descriptors,
    match_preservation_ratio, perturbed_view, FixtureSpec, DEFAULT_RATIO, FIXTURE_SEED,
};

/// Link parameters in interface units (dBW, metres).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub tx_power_dbw: f64,
    pub own_tx_power_dbw: f64,
    pub interference_power_dbw: f64,
    pub distance_m: f64,
    pub path_loss_exp: f64,
    pub alpha: f64,
    pub mu: f64,
    pub mean_power: f64,
    pub n_paths: u32,
    pub eta: f64,
    pub upsilon: f64,
    pub sigma_s_sq: f64,
    pub sigma_n_sq: f64,
}

impl LinkParams {
    /// D = 5 m, β = 2, α = 4, µ = 5, σ_N² = σ_S² = 0.1, P_k = 20 dBW,
    /// P_I = 1 dBW, η = υ = 0.2, N = 2, P_j = 0 dBW, Ῡ = 1.
    pub fn reference() -> Self {
        Self {
            tx_power_dbw: 0.0,
            own_tx_power_dbw: 20.0,
            interference_power_dbw: 1.0,
            distance_m: 5.0,
            path_loss_exp: 2.0,
            alpha: 4.0,
            mu: 5.0,
            mean_power: 1.0,
            n_paths: 2,
            eta: 0.2,
            upsilon: 0.2,
            sigma_s_sq: 0.1,
            sigma_n_sq: 0.1,
        }
    }

    pub fn to_link_config(&self) -> Result<LinkConfig> {
        let cfg = LinkConfig {
            tx_power: dbw_to_watt(self.tx_power_dbw),
            distance: self.distance_m,
            path_loss_exp: self.path_loss_exp,
            fading: AlphaMuParams::new(self.alpha, self.mu, self.mean_power)?,
            interference: InterferenceParams::new(
                self.n_paths,
                self.eta,
                dbw_to_watt(self.interference_power_dbw),
            )?,
            self_interference: SelfInterferenceParams::new(
                self.upsilon,
                dbw_to_watt(self.own_tx_power_dbw),
                self.sigma_s_sq,
                self.sigma_n_sq,
            )?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with(&self, p: Parameter, v: f64) -> Self {
        let mut out = *self;
        match p {
            Parameter::TxPowerDbw => out.tx_power_dbw = v,
            Parameter::OwnTxPowerDbw => out.own_tx_power_dbw = v,
            Parameter::InterferencePowerDbw => out.interference_power_dbw = v,
            Parameter::DistanceM => out.distance_m = v,
            Parameter::Mu => out.mu = v,
            Parameter::Alpha => out.alpha = v,
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    TxPowerDbw,
    OwnTxPowerDbw,
    InterferencePowerDbw,
    DistanceM,
    Mu,
    Alpha,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::TxPowerDbw => "tx_power_dbw",
            Parameter::OwnTxPowerDbw => "own_tx_power_dbw",
            Parameter::InterferencePowerDbw => "interference_power_dbw",
            Parameter::DistanceM => "distance_m",
            Parameter::Mu => "mu",
            Parameter::Alpha => "alpha",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Pdf,
    Capacity,
    Bep,
    PayloadDegradation,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Pdf => "pdf",
            Metric::Capacity => "capacity",
            Metric::Bep => "bep",
            Metric::PayloadDegradation => "payload_degradation",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Metric::Pdf, Metric::Capacity, Metric::Bep, Metric::PayloadDegradation]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: Parameter,
    pub values: Vec<f64>,
}

/// Pick `mean_power` so that `metric` at `parameter = at` (other values from
/// the base) equals `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub metric: Metric,
    pub at: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub base: LinkParams,
    pub modulation: ModulationScheme,
    #[serde(default)]
    pub calibration: Option<Calibration>,
    pub swept: Axis,
    /// Curve family; every swept value is evaluated once per series value.
    #[serde(default)]
    pub series: Option<Axis>,
    pub metrics: Vec<Metric>,
    pub methods: Vec<Method>,
    /// SINR at which the `pdf` metric is evaluated.
    #[serde(default = "default_pdf_x")]
    pub pdf_x: f64,
    pub mc_samples: u64,
    /// Corruption seeds per point for `payload_degradation`.
    #[serde(default = "default_degradation_seeds")]
    pub degradation_seeds: u64,
    pub seed: u64,
}

fn default_pdf_x() -> f64 {
    10.0
}

fn default_degradation_seeds() -> u64 {
    20
}

fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) || v.windows(2).all(|w| w[0] > w[1])
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::Config("metrics list is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods list is empty".into()));
        }
        for axis in std::iter::once(&self.swept).chain(&self.series) {
            if axis.values.is_empty() || axis.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{} needs finite values", axis.parameter)));
            }
            if !strictly_monotone(&axis.values) {
                return Err(Error::Config(format!(
                    "{} values must be strictly monotone",
                    axis.parameter
                )));
            }
        }
        if self.series.as_ref().is_some_and(|s| s.parameter == self.swept.parameter) {
            return Err(Error::Config("series and swept parameter must differ".into()));
        }
        if self.methods.contains(&Method::MonteCarlo) && self.mc_samples < 1_000 {
            return Err(Error::Config(format!(
                "mc_samples must be >= 1000, got {}",
                self.mc_samples
            )));
        }
        if !(self.pdf_x > 0.0 && self.pdf_x.is_finite()) {
            return Err(Error::Config(format!("pdf_x must be > 0, got {}", self.pdf_x)));
        }
        if self.metrics.contains(&Metric::PayloadDegradation) && self.degradation_seeds == 0 {
            return Err(Error::Config("degradation_seeds must be >= 1".into()));
        }
        if let Some(c) = &self.calibration {
            if !matches!(c.metric, Metric::Bep | Metric::Capacity) {
                return Err(Error::Config("calibration metric must be bep or capacity".into()));
            }
        }
        self.base.to_link_config()?;
        Ok(())
    }

    /// The base parameters with the calibrated mean power, if any.
    pub fn resolved_base(&self) -> Result<LinkParams> {
        let Some(c) = self.calibration else {
            return Ok(self.base);
        };
        let at = self.base.with(self.swept.parameter, c.at);
        let m = self.modulation;
        let ups = calibrate_mean_power(&at.to_link_config()?, c.target, |cfg| {
            Ok(match c.metric {
                Metric::Capacity => ergodic_capacity(cfg, Method::Quadrature)?.value,
                _ => bit_error_probability(cfg, m, Method::Quadrature)?.value,
            })
        })?;
        Ok(LinkParams {
            mean_power: ups,
            ..self.base
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub series: String,
    pub swept_value: f64,
    pub metric: Metric,
    pub method: Method,
    pub value: Option<f64>,
    pub error_estimate: Option<f64>,
    pub seed: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub base: LinkParams,
    pub rows: Vec<SweepRow>,
}

impl SweepOutput {
    /// Values of one curve in sweep order (`None` where evaluation failed).
    pub fn curve(&self, series: &str, metric: Metric, method: Method) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .filter(|r| r.series == series && r.metric == metric && r.method == method)
            .map(|r| r.value)
            .collect()
    }

    pub fn series_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.series) {
                out.push(r.series.clone());
            }
        }
        out
    }
}

fn from_ci(e: EstimateWithCI) -> (f64, f64) {
    (e.mean, e.half_width_95)
}

fn from_metric(r: MetricResult) -> (f64, f64) {
    (r.value, r.error_estimate)
}

fn evaluate(
    spec: &SweepSpec,
    cfg: &LinkConfig,
    metric: Metric,
    method: Method,
) -> Result<(f64, f64)> {
    let (n, seed, m) = (spec.mc_samples, spec.seed, spec.modulation);
    match (metric, method) {
        (Metric::Pdf, Method::Quadrature) => sinr_pdf_quadrature(cfg, spec.pdf_x).map(from_metric),
        (Metric::Pdf, Method::FoxH) => sinr_pdf_closed_form(cfg, spec.pdf_x).map(from_metric),
        (Metric::Pdf, Method::MonteCarlo) => estimate_pdf_mc(cfg, spec.pdf_x, n, seed).map(from_ci),
        (Metric::Capacity, Method::MonteCarlo) => estimate_capacity_mc(cfg, n, seed).map(from_ci),
        (Metric::Capacity, _) => ergodic_capacity(cfg, method).map(from_metric),
        (Metric::Bep, Method::MonteCarlo) => estimate_bep_mc(cfg, m, n, seed).map(from_ci),
        (Metric::Bep, _) => bit_error_probability(cfg, m, method).map(from_metric),
        (Metric::PayloadDegradation, _) => {
            let bep = evaluate(spec, cfg, Metric::Bep, method)?.0.clamp(0.0, 0.5);
            let study = DegradationSpec {
                bep_grid: vec![bep],
                seeds: spec.degradation_seeds,
                seed,
                ..DegradationSpec::default()
            };
            let row = run_degradation_study(&study)?.remove(0);
            Ok((row.mean_ratio, row.ci_half_width))
        }
    }
}

/// Evaluate every (series, swept value, metric, method) combination.
/// Failures become rows with an `error` message; the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let base = spec.resolved_base()?;
    let series: Vec<(String, LinkParams)> = match &spec.series {
        None => vec![(String::new(), base)],
        Some(ax) => ax
            .values
            .iter()
            .map(|v| (format!("{}={v}", ax.parameter), base.with(ax.parameter, *v)))
            .collect(),
    };
    let mut jobs = Vec::new();
    for (label, params) in &series {
        for v in &spec.swept.values {
            for metric in &spec.metrics {
                for method in &spec.methods {
                    jobs.push((label.clone(), params.with(spec.swept.parameter, *v), *v, *metric, *method));
                }
            }
        }
    }
    let run = |(label, params, v, metric, method): &(String, LinkParams, f64, Metric, Method)| {
        let out = params.to_link_config().and_then(|cfg| evaluate(spec, &cfg, *metric, *method));
        let (value, error_estimate, error) = match out {
            Ok((val, err)) => (Some(val), Some(err), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        SweepRow {
            series: label.clone(),
            swept_value: *v,
            metric: *metric,
            method: *method,
            value,
            error_estimate,
            seed: spec.seed,
            error,
        }
    };
    #[cfg(feature = "parallel")]
    let rows = jobs.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let rows = jobs.iter().map(run).collect();
    Ok(SweepOutput { base, rows })
}

pub const CSV_HEADER: [&str; 8] = [
    "series",
    "swept_value",
    "metric",
    "method",
    "value",
    "error_estimate",
    "seed",
    "error",
];

fn write_comments<W: Write>(out: &mut W, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        for line in c.lines() {
            if line.is_empty() {
                writeln!(out, "#")?;
            } else {
                writeln!(out, "# {line}")?;
            }
        }
    }
    Ok(())
}

/// Shortest round-trip form; exponent notation for very small or large values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// CSV with `#` comment lines first, then the header and one line per row.
pub fn write_sweep_csv<W: Write>(mut out: W, comments: &[String], rows: &[SweepRow]) -> Result<()> {
    write_comments(&mut out, comments)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.series.clone(),
            num(r.swept_value),
            r.metric.to_string(),
            r.method.to_string(),
            opt(r.value),
            opt(r.error_estimate),
            r.seed.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Transmit a perturbed view of a fixture at each BEP and measure how many
/// of its clean matches against the original survive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationSpec {
    pub bep_grid: Vec<f64>,
    /// Corruption seeds per BEP value: `seed, seed + 1, ...`.
    pub seeds: u64,
    pub seed: u64,
    pub fixture: FixtureSpec,
    pub fixture_seed: u64,
    pub view_shift: (i32, i32),
    pub view_noise: f64,
    pub ratio: f64,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        Self {
            bep_grid: vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1],
            seeds: 100,
            seed: 0,
            fixture: FixtureSpec::default(),
            fixture_seed: FIXTURE_SEED,
            view_shift: (4, -3),
            view_noise: 0.02,
            ratio: DEFAULT_RATIO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationRow {
    pub bep: f64,
    pub mean_ratio: f64,
    pub ci_half_width: f64,
    pub n_seeds: u64,
}

pub fn run_degradation_study(spec: &DegradationSpec) -> Result<Vec<DegradationRow>> {
    if let Some(b) = spec.bep_grid.iter().find(|b| !(0.0..=0.5).contains(*b)) {
        return Err(Error::Config(format!("bep values must lie in [0, 0.5], got {b}")));
    }
    if spec.seeds == 0 {
        return Err(Error::Config("need at least one corruption seed".into()));
    }
    let original = generate_fixture(&spec.fixture, spec.fixture_seed)?;
    let view = perturbed_view(
        &original,
        spec.view_shift,
        spec.view_noise,
        spec.fixture_seed.wrapping_add(1),
    )?;
    let clean = match_descriptors(&original, &view, spec.ratio)?;
    let wire = encode_message(&view)?;
    let one = |bep: f64, s: u64| -> Result<f64> {
        let rx = decode_message(&corrupt_bits(&wire, bep, spec.seed.wrapping_add(s))?)?;
        match_preservation_ratio(&clean, &match_descriptors(&original, &rx, spec.ratio)?)
    };
    spec.bep_grid
        .iter()
        .map(|&bep| {
            #[cfg(feature = "parallel")]
            let ratios: Result<Vec<f64>> = (0..spec.seeds).into_par_iter().map(|s| one(bep, s)).collect();
            #[cfg(not(feature = "parallel"))]
            let ratios: Result<Vec<f64>> = (0..spec.seeds).map(|s| one(bep, s)).collect();
            let ratios = ratios?;
            let n = ratios.len() as f64;
            let mean = ratios.iter().sum::<f64>() / n;
            let var = if n > 1.0 {
                ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            Ok(DegradationRow {
                bep,
                mean_ratio: mean,
                ci_half_width: 1.96 * (var / n).sqrt(),
                n_seeds: spec.seeds,
            })
        })
        .collect()
}

pub const DEGRADATION_HEADER: [&str; 4] = ["bep", "mean_ratio", "ci_half_width", "n_seeds"];

pub fn write_degradation_csv<W: Write>(
    mut out: W,
    comments: &[String],
    rows: &[DegradationRow],
) -> Result<()> {
    write_comments(&mut out, comments)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DEGRADATION_HEADER)?;
    for r in rows {
        w.write_record([
            num(r.bep),
            num(r.mean_ratio),
            num(r.ci_half_width),
            r.n_seeds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The named experiment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig4,
    Fig5,
    Fig6,
    Degradation,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig4, Preset::Fig5, Preset::Fig6, Preset::Degradation];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Degradation => "degradation",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?}")))
    }
}

fn grid(from: f64, to: f64, points: usize) -> Vec<f64> {
    let step = (to - from) / (points - 1) as f64;
    (0..points).map(|k| from + k as f64 * step).collect()
}

/// Mean fading power convention for the BEP presets: DPSK BEP of 1e-1 at
/// `P_j = 0 dBW` on the reference link.
pub const BEP_CALIBRATION: Calibration = Calibration {
    metric: Metric::Bep,
    at: 0.0,
    target: 0.1,
};

/// Capacity preset convention: 1 bit/s/Hz at `P_j = 0 dBW`, D = 5 m.
pub const CAPACITY_CALIBRATION: Calibration = Calibration {
    metric: Metric::Capacity,
    at: 0.0,
    target: 1.0,
};

/// BEP versus P_j for several interference powers.
pub fn fig4() -> SweepSpec {
    SweepSpec {
        name: "fig4".into(),
        base: LinkParams::reference(),
        modulation: ModulationScheme::Dpsk,
        calibration: Some(BEP_CALIBRATION),
        swept: Axis {
            parameter: Parameter::TxPowerDbw,
            values: grid(0.0, 20.0, 11),
        },
        series: Some(Axis {
            parameter: Parameter::InterferencePowerDbw,
            values: vec![1.0, 5.0, 10.0],
        }),
        metrics: vec![Metric::Bep],
        methods: vec![Method::Quadrature, Method::FoxH, Method::MonteCarlo],
        pdf_x: default_pdf_x(),
        mc_samples: 100_000,
        degradation_seeds: default_degradation_seeds(),
        seed: 2024,
    }
}

/// BEP versus P_k for several fading parameters µ, at D = 10 m and P_j = 20 dBW.
/// The mean fading power is calibrated on the fig4 link.
pub fn fig5() -> SweepSpec {
    SweepSpec {
        name: "fig5".into(),
        base: LinkParams {
            distance_m: 10.0,
            mu: 4.0,
            tx_power_dbw: 20.0,
            ..LinkParams::reference()
        },
        calibration: None,
        swept: Axis {
            parameter: Parameter::OwnTxPowerDbw,
            values: grid(5.0, 30.0, 6),
        },
        series: Some(Axis {
            parameter: Parameter::Mu,
            values: vec![2.0, 3.0, 4.0],
        }),
        ..fig4()
    }
}

/// Capacity versus P_j at D = 5 m and 10 m.
pub fn fig6() -> SweepSpec {
    SweepSpec {
        name: "fig6".into(),
        base: LinkParams {
            tx_power_dbw: 10.0,
            ..LinkParams::reference()
        },
        calibration: Some(CAPACITY_CALIBRATION),
        swept: Axis {
            parameter: Parameter::TxPowerDbw,
            values: grid(0.0, 25.0, 11),
        },
        series: Some(Axis {
            parameter: Parameter::DistanceM,
            values: vec![5.0, 10.0],
        }),
        metrics: vec![Metric::Capacity],
        ..fig4()
    }
}

/// Preset sweep spec; fig5 borrows the fig4 calibration.
pub fn preset_sweep(p: Preset) -> Result<Option<SweepSpec>> {
    Ok(match p {
        Preset::Fig4 => Some(fig4()),
        Preset::Fig5 => {
            let mut s = fig5();
            s.base.mean_power = fig4().resolved_base()?.mean_power;
            Some(s)
        }
        Preset::Fig6 => Some(fig6()),
        Preset::Degradation => None,
    })
}
