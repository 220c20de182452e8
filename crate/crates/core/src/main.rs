use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use slcogarch::coherence::{acf_band, CoherenceConfig};
use slcogarch::io::{
    default_u_grid, prepare_series, read_table, run_acf, run_charfn, run_check, run_coherence,
    run_simulate, ExperimentConfig, Transform,
};
use slcogarch::Result;

#[derive(Parser)]
#[command(
    name = "slcogarch",
    version,
    about = "Semi-Lévy driven COGARCH simulation and PC analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    None,
    Diff,
    LogReturns,
}

impl From<TransformArg> for Transform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::None => Transform::None,
            TransformArg::Diff => Transform::Diff,
            TransformArg::LogReturns => Transform::LogReturns,
        }
    }
}

#[derive(Args)]
struct SeriesInput {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column to analyse (default: last column).
    #[arg(long)]
    column: Option<String>,
    /// Applied before --tail and --square.
    #[arg(long, value_enum, default_value = "none")]
    transform: TransformArg,
    /// Keep only the last K samples.
    #[arg(long)]
    tail: Option<usize>,
    /// Square the series.
    #[arg(long)]
    square: bool,
}

impl SeriesInput {
    fn load(&self) -> Result<Vec<f64>> {
        let table = read_table(&self.input)?;
        let col = match &self.column {
            Some(name) => table.column(name)?,
            None => table.last_column(),
        };
        prepare_series(col, self.transform.into(), self.tail, self.square)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and write grid and jump CSVs.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Refuse to simulate unless the condition check passes.
        #[arg(long)]
        require_valid: bool,
    },
    /// Check stationarity and non-negativity conditions; exit 0 iff all hold.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Spectral coherence and period estimation for a series.
    Coherence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        series: SeriesInput,
        /// Smoothing window in DFT ordinates (default 240).
        #[arg(long = "M")]
        m: Option<usize>,
        /// Per-pair significance level (default 0.05).
        #[arg(long)]
        alpha: Option<f64>,
        /// Evaluate every k-th row of the (P,Q) grid.
        #[arg(long)]
        stride: Option<usize>,
        /// Skip mean-centering before the DFT.
        #[arg(long)]
        no_center: bool,
    },
    /// Sample autocorrelation with the 95% white-noise band.
    Acf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        series: SeriesInput,
        /// Largest lag (default 104).
        #[arg(long)]
        max_lag: Option<usize>,
    },
    /// Characteristic function of the driver on u = -2, -1.5, ..., 2.
    Charfn {
        #[command(flatten)]
        common: Common,
        /// Time at which the driver is evaluated.
        #[arg(long)]
        t: f64,
        /// Also estimate it from this many simulated paths.
        #[arg(long, default_value_t = 0)]
        paths: usize,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    match &common.config {
        Some(p) => ExperimentConfig::load(p),
        None => Err(slcogarch::Error::Config("--config is required".into())),
    }
}

fn optional_config(common: &Common) -> Result<Option<ExperimentConfig>> {
    common
        .config
        .as_ref()
        .map(|p| ExperimentConfig::load(p))
        .transpose()
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            common,
            require_valid,
        } => {
            let cfg = load_config(&common)?;
            let seed = common.seed.unwrap_or(cfg.seed);
            let out = run_simulate(&cfg, seed, &common.out, require_valid)?;
            println!(
                "wrote {} grid samples and {} jumps to {}",
                out.path.times.len(),
                out.path.arrivals.len(),
                common.out.display()
            );
        }
        Command::Check { common } => {
            let cfg = load_config(&common)?;
            let report = run_check(&cfg);
            println!("{report}");
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(common.out.join("check.txt"), report.to_key_values())?;
            if !report.overall {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Coherence {
            common,
            series,
            m,
            alpha,
            stride,
            no_center,
        } => {
            let cfg = optional_config(&common)?;
            let analysis = cfg.as_ref().map(|c| c.analysis.clone());
            let mut cc = analysis
                .as_ref()
                .map(|a| a.coherence())
                .unwrap_or_else(|| CoherenceConfig::new(240, 0.05));
            if let Some(m) = m {
                cc.m = m;
            }
            if let Some(a) = alpha {
                cc.alpha = a;
            }
            if stride.is_some() {
                cc.stride = stride;
            }
            cc.center = !no_center;
            let x = series.load()?;
            let report =
                run_coherence(&x, &cc, &common.out, cfg.as_ref().map(|c| c.hash.as_str()))?;
            print!("{}", slcogarch::io::coherence_summary(&report));
            println!(
                "significant_off_diagonal={}",
                report.off_diagonal_significant()
            );
        }
        Command::Acf {
            common,
            series,
            max_lag,
        } => {
            let cfg = optional_config(&common)?;
            let max_lag = max_lag
                .or(cfg.as_ref().map(|c| c.analysis.max_lag))
                .unwrap_or(104);
            let x = series.load()?;
            let acf = run_acf(
                &x,
                max_lag,
                &common.out,
                cfg.as_ref().map(|c| c.hash.as_str()),
            )?;
            let band = acf_band(x.len());
            let outside = acf[1..].iter().filter(|r| r.abs() > band).count();
            println!(
                "n={} band={band:.6} lags_outside_band={outside}/{max_lag}",
                x.len()
            );
        }
        Command::Charfn { common, t, paths } => {
            let cfg = load_config(&common)?;
            let seed = common.seed.unwrap_or(cfg.seed);
            let rows = run_charfn(&cfg, t, &default_u_grid(), paths, seed, &common.out)?;
            for r in rows {
                if paths > 0 {
                    println!(
                        "u={:+.1} phi={:+.6}{:+.6}i mc={:+.6}{:+.6}i",
                        r[0], r[1], r[2], r[3], r[4]
                    );
                } else {
                    println!("u={:+.1} phi={:+.6}{:+.6}i", r[0], r[1], r[2]);
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
