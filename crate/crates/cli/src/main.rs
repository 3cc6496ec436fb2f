//! `fdlink`: run an experiment preset or a configured sweep and write CSV.
//!
//! Exit status: 0 on success (per-point failures are reported in the CSV
//! `error` column), 2 on invalid flags or configuration, 1 on I/O failure.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fdlink::analytics::ModulationScheme;
use fdlink::sweep::{
    run_degradation_study, run_sweep, write_degradation_csv, write_sweep_csv, Preset,
};

use config::{resolve, ConfigFile, Job, MethodArg};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Fig4,
    Fig5,
    Fig6,
    Degradation,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Fig4 => Preset::Fig4,
            PresetArg::Fig5 => Preset::Fig5,
            PresetArg::Fig6 => Preset::Fig6,
            PresetArg::Degradation => Preset::Degradation,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fdlink", version, about = "Full-duplex link sweeps: BEP, capacity, SINR density and payload degradation")]
struct Args {
    /// TOML config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// coherent-bpsk, coherent-bfsk, noncoherent-bfsk or dpsk
    #[arg(long)]
    modulation: Option<ModulationScheme>,
    /// Monte Carlo draws per point (corruption seeds for the degradation study)
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Io(String),
}

fn header_comments(job: &Job) -> Result<Vec<String>, Failure> {
    let mut c = vec![format!("fdlink {}", env!("CARGO_PKG_VERSION"))];
    let dump = |cfg: &ConfigFile| toml::to_string(cfg).map_err(|e| Failure::Io(e.to_string()));
    match job {
        Job::Sweep { spec, preset } => {
            if let Some(p) = preset {
                c.push(format!("preset = {p}"));
            }
            c.push(format!("modulation = {}", spec.modulation));
            if matches!(preset, Some(Preset::Fig4 | Preset::Fig5)) {
                c.push("modulation is the preset default; the reference figures do not state one".into());
            }
            c.push(format!("seed = {}", spec.seed));
            c.push("resolved config:".into());
            c.push(dump(&ConfigFile {
                sweep: Some(spec.clone()),
                ..ConfigFile::default()
            })?);
        }
        Job::Degradation { spec, preset } => {
            if let Some(p) = preset {
                c.push(format!("preset = {p}"));
            }
            c.push(format!("seed = {}", spec.seed));
            c.push("resolved config:".into());
            c.push(dump(&ConfigFile {
                degradation: Some(spec.clone()),
                ..ConfigFile::default()
            })?);
        }
    }
    Ok(c)
}

fn run(args: Args) -> Result<(), Failure> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            ConfigFile::parse(&text).map_err(Failure::Config)?
        }
        None => ConfigFile::default(),
    };
    let cfg = file.overlay(ConfigFile {
        preset: args.preset.map(Preset::from),
        method: args.method,
        modulation: args.modulation,
        samples: args.samples,
        seed: args.seed,
        out: args.out,
        ..ConfigFile::default()
    });
    let job = resolve(&cfg).map_err(Failure::Config)?;
    let mut comments = header_comments(&job)?;

    let out: Box<dyn Write> = match &cfg.out {
        Some(path) => Box::new(
            File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let out = BufWriter::new(out);
    let io_err = |e: fdlink::Error| Failure::Io(e.to_string());
    match job {
        Job::Sweep { spec, .. } => {
            let result = run_sweep(&spec).map_err(|e| Failure::Config(e.to_string()))?;
            comments.push(format!("resolved mean_power = {}", result.base.mean_power));
            write_sweep_csv(out, &comments, &result.rows).map_err(io_err)
        }
        Job::Degradation { spec, .. } => {
            let rows = run_degradation_study(&spec).map_err(|e| Failure::Config(e.to_string()))?;
            write_degradation_csv(out, &comments, &rows).map_err(io_err)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("fdlink: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("fdlink: {msg}");
            ExitCode::from(1)
        }
    }
}
