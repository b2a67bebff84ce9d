use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ipmsm_hfi::harness::{load_experiment, run_experiment, ExperimentKind};
use ipmsm_hfi::Error;

/// Signal-injection position estimation experiments.
///
/// Every flag can also be set through an environment variable with the
/// `IPMSM_HFI_` prefix (IPMSM_HFI_CONFIG, IPMSM_HFI_OUT, IPMSM_HFI_WORKERS,
/// IPMSM_HFI_SEED). Exit status: 0 pass, 1 failed check or run error,
/// 2 configuration error.
#[derive(Parser, Debug)]
#[command(name = "ipmsm-hfi", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Scenario or experiment file.
    #[arg(long, global = true, env = "IPMSM_HFI_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory (overrides `experiment.out`).
    #[arg(long, global = true, env = "IPMSM_HFI_OUT")]
    out: Option<PathBuf>,

    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, env = "IPMSM_HFI_WORKERS", default_value_t = 0)]
    workers: usize,

    /// RNG seed (overrides `scenario.seed`).
    #[arg(long, global = true, env = "IPMSM_HFI_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Verb {
    /// Single run; writes the trace CSV.
    Run,
    /// RMSD of both estimators on one closed-loop trace.
    CompareRmsd,
    /// Steady error against probe frequency, with slope fits.
    SweepFrequency,
    /// Averaging residual against probe period.
    ResidualOrder,
    /// Bode tables of the signal operators.
    Bode,
    /// Fit the port compensation gains.
    Calibrate,
    /// Per-sample agreement of the two gradient-type realizations.
    Equivalence,
}

impl Verb {
    fn kind(self) -> ExperimentKind {
        match self {
            Verb::Run => ExperimentKind::Run,
            Verb::CompareRmsd => ExperimentKind::CompareRmsd,
            Verb::SweepFrequency => ExperimentKind::SweepFrequency,
            Verb::ResidualOrder => ExperimentKind::ResidualOrder,
            Verb::Bode => ExperimentKind::Bode,
            Verb::Calibrate => ExperimentKind::Calibrate,
            Verb::Equivalence => ExperimentKind::Equivalence,
        }
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::ConfigParse { .. }
            | Error::ConfigInvalid { .. }
            | Error::InvalidParameter { .. }
            | Error::Misaligned { .. }
            | Error::Io(_)
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config.as_deref() else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let mut spec = match load_experiment(config, Some(cli.verb.kind())) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(out) = cli.out {
        spec.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        spec.scenario.seed = seed;
    }
    match run_experiment(&spec, cli.workers) {
        Ok(report) => {
            print!("{}", report.render());
            for a in &report.artifacts {
                println!("  wrote {}", a.display());
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) if is_config_error(&e) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
