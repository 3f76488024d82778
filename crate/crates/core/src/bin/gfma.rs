use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfma_core::harness::{emit_csv, run_sweep, to_csv_string, ExperimentConfig};
use gfma_core::Error;

#[derive(Parser)]
#[command(name = "gfma", version, about = "Grant-free activity detection Monte Carlo harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write metrics as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Start from a named preset (fig2 .. fig8).
    #[arg(long)]
    preset: Option<String>,
    /// key=value file applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// sparsity | snr | antennas | none
    #[arg(long)]
    axis: Option<String>,
    /// Comma list or start:step:stop.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    /// axis:values in one flag, e.g. snr:-10:2:10.
    #[arg(long, allow_hyphen_values = true)]
    sweep: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Detector name, comma list, or `all`.
    #[arg(long)]
    detector: Option<String>,
    #[arg(long)]
    workers: Option<String>,

    #[arg(long = "K")]
    k: Option<String>,
    #[arg(long = "L")]
    l: Option<String>,
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long = "D")]
    d: Option<String>,
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// LASSO weight, number or `auto`.
    #[arg(long)]
    lambda: Option<String>,
    /// Relative support threshold.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    modulation: Option<String>,
    /// gaussian | ula
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    paths: Option<String>,
    /// Spreading length; 0 disables.
    #[arg(long)]
    spreading: Option<String>,
    /// Fixed pilot dictionary CSV.
    #[arg(long)]
    pilots: Option<String>,
    #[arg(long = "lasso_iters", alias = "lasso-iters")]
    lasso_iters: Option<String>,
    #[arg(long = "msbl_iters", alias = "msbl-iters")]
    msbl_iters: Option<String>,
    #[arg(long = "mfocuss_p", alias = "mfocuss-p")]
    mfocuss_p: Option<String>,
    #[arg(long = "mfocuss_lambda", alias = "mfocuss-lambda")]
    mfocuss_lambda: Option<String>,
    #[arg(long = "bound_split", alias = "bound-split")]
    bound_split: Option<String>,
}

impl SweepArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs = [
            ("sweep", &self.sweep),
            ("axis", &self.axis),
            ("values", &self.values),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("detector", &self.detector),
            ("workers", &self.workers),
            ("K", &self.k),
            ("L", &self.l),
            ("M", &self.m),
            ("D", &self.d),
            ("N", &self.n),
            ("snr", &self.snr),
            ("lambda", &self.lambda),
            ("tau", &self.tau),
            ("modulation", &self.modulation),
            ("channel", &self.channel),
            ("paths", &self.paths),
            ("spreading", &self.spreading),
            ("pilots", &self.pilots),
            ("lasso_iters", &self.lasso_iters),
            ("msbl_iters", &self.msbl_iters),
            ("mfocuss_p", &self.mfocuss_p),
            ("mfocuss_lambda", &self.mfocuss_lambda),
            ("bound_split", &self.bound_split),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }

    fn build_config(&self) -> gfma_core::Result<ExperimentConfig> {
        let mut cfg = match &self.preset {
            Some(name) => ExperimentConfig::preset(name)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.overrides() {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sweep(args: &SweepArgs) -> gfma_core::Result<()> {
    let cfg = args.build_config()?;
    let rows = run_sweep(&cfg)?;
    match &args.out {
        Some(path) => emit_csv(&rows, path),
        None => {
            print!("{}", to_csv_string(&rows)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(args) => sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(3),
                Error::Config(_) | Error::InvalidParameter(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
