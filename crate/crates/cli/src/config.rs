//! Config file format and flag resolution.

use std::path::PathBuf;

use clap::ValueEnum;
use fdlink::analytics::{Method, ModulationScheme};
use fdlink::sweep::{preset_sweep, DegradationSpec, Preset, SweepSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Quadrature,
    Foxh,
    Mc,
    All,
}

impl MethodArg {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Quadrature => vec![Method::Quadrature],
            MethodArg::Foxh => vec![Method::FoxH],
            MethodArg::Mc => vec![Method::MonteCarlo],
            MethodArg::All => vec![Method::Quadrature, Method::FoxH, Method::MonteCarlo],
        }
    }
}

/// Top-level keys of the TOML config. Give a `preset`, a `[sweep]` table or
/// a `[degradation]` table; the scalar keys override whichever was chosen.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<Preset>,
    pub method: Option<MethodArg>,
    pub modulation: Option<ModulationScheme>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
    pub degradation: Option<DegradationSpec>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config: {e}"))
    }

    /// Flags win over file values.
    pub fn overlay(self, flags: ConfigFile) -> ConfigFile {
        ConfigFile {
            preset: flags.preset.or(self.preset),
            method: flags.method.or(self.method),
            modulation: flags.modulation.or(self.modulation),
            samples: flags.samples.or(self.samples),
            seed: flags.seed.or(self.seed),
            out: flags.out.or(self.out),
            sweep: self.sweep,
            degradation: self.degradation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Sweep {
        spec: SweepSpec,
        preset: Option<Preset>,
    },
    Degradation {
        spec: DegradationSpec,
        preset: Option<Preset>,
    },
}

pub fn resolve(cfg: &ConfigFile) -> Result<Job, String> {
    let err = |e: fdlink::Error| e.to_string();
    let mut job = match (cfg.preset, &cfg.sweep, &cfg.degradation) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err("give either a preset or a [sweep]/[degradation] table, not both".into())
        }
        (None, Some(_), Some(_)) => {
            return Err("a config holds one of [sweep] or [degradation], not both".into())
        }
        (Some(Preset::Degradation), ..) => Job::Degradation {
            spec: DegradationSpec::default(),
            preset: Some(Preset::Degradation),
        },
        (Some(p), ..) => Job::Sweep {
            spec: preset_sweep(p).map_err(err)?.expect("sweep preset"),
            preset: Some(p),
        },
        (None, Some(s), None) => Job::Sweep {
            spec: s.clone(),
            preset: None,
        },
        (None, None, Some(d)) => Job::Degradation {
            spec: d.clone(),
            preset: None,
        },
        (None, None, None) => {
            return Err("nothing to run: pass --preset or a config with [sweep] or [degradation]".into())
        }
    };
    match &mut job {
        Job::Sweep { spec, .. } => {
            if let Some(m) = cfg.method {
                spec.methods = m.methods();
            }
            if let Some(m) = cfg.modulation {
                spec.modulation = m;
            }
            if let Some(n) = cfg.samples {
                spec.mc_samples = n;
            }
            if let Some(s) = cfg.seed {
                spec.seed = s;
            }
            spec.validate().map_err(err)?;
        }
        Job::Degradation { spec, .. } => {
            if cfg.method.is_some() || cfg.modulation.is_some() {
                return Err("method and modulation do not apply to the degradation study".into());
            }
            if let Some(n) = cfg.samples {
                spec.seeds = n;
            }
            if let Some(s) = cfg.seed {
                spec.seed = s;
            }
            if spec.seeds == 0 {
                return Err("the degradation study needs samples >= 1".into());
            }
            if let Some(b) = spec.bep_grid.iter().find(|b| !(0.0..=0.5).contains(*b)) {
                return Err(format!("bep values must lie in [0, 0.5], got {b}"));
            }
        }
    }
    Ok(job)
}
