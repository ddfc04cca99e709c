mod config;
mod files;
mod report;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hawkes_impact::backtest::{BacktestConfig, ModelCalibration, StrategyKind};
use hawkes_impact::hawkes_model::MarkedEvent;
use hawkes_impact::market_data::DayWindow;
use hawkes_impact::strategy_engine::check_pms;

use config::PipelineConfig;
use files::{Artifact, BacktestFile, CalibrationFile, DatasetInfo, Mode, BACKTEST_FORMAT, CALIBRATION_FORMAT, VERSION};

/// DBR band reported as a martingale by the manipulation check.
const PMS_TOLERANCE: f64 = 0.05;

#[derive(Parser)]
#[command(name = "hawkes-impact", version, about = "Simulate, calibrate and backtest a Hawkes flow with transient price impact")]
struct Cli {
    /// JSON run configuration; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the per-day computations.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the tick size of the config.
    #[arg(long, global = true)]
    tick_size: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes simulated windows as tick files.
    Simulate {
        /// Named dataset (sim1, sim2, martingale) instead of the config's simulation.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the number of windows.
        #[arg(long)]
        windows: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fits the propagator and the Hawkes flow to a directory of tick files.
    Calibrate {
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replays the strategies on a directory of tick files.
    Backtest {
        data: PathBuf,
        /// Calibration to trade with; required out of sample.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::InSample)]
        mode: Mode,
        /// Single strategy; all three when absent.
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// `half-tick` adds a run paying half a tick per share.
        #[arg(long, value_enum)]
        penalty: Option<Penalty>,
        /// Output directory for backtest.json and gains.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Prints a calibration or backtest file as tables.
    Report { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Mono,
    Multi,
    Poisson,
}

impl From<StrategyArg> for StrategyKind {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Mono => StrategyKind::HawkesMono,
            StrategyArg::Multi => StrategyKind::HawkesMulti,
            StrategyArg::Poisson => StrategyKind::Poisson,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Penalty {
    None,
    HalfTick,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_threads(cli.threads)?;
    let cfg = PipelineConfig::load(cli.config.as_deref(), cli.tick_size)?;
    match cli.command {
        Command::Simulate { preset, seed, windows, out } => simulate(&cfg, preset.as_deref(), seed, windows, cli.tick_size, &out),
        Command::Calibrate { data, out } => calibrate(&cfg, &data, &out),
        Command::Backtest { data, calibration, mode, strategy, penalty, out } => {
            backtest(&cfg, &data, calibration.as_deref(), mode, strategy.map(Into::into), penalty, &out)
        }
        Command::Report { file } => {
            let text = match files::read_artifact(&file)? {
                Artifact::Calibration(c) => report::render_calibration(&c),
                Artifact::Backtest(b) => report::render_backtest(&b),
            };
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(feature = "parallel")]
fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the thread pool")?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_threads(threads: Option<usize>) -> Result<()> {
    if threads.is_some_and(|n| n > 1) {
        eprintln!("built without the parallel feature, running on one thread");
    }
    Ok(())
}

fn simulate(cfg: &PipelineConfig, preset: Option<&str>, seed: u64, windows: Option<usize>, tick: Option<f64>, out: &Path) -> Result<()> {
    let sim = cfg.simulation(preset, windows, tick)?;
    let days = sim.simulate(seed);
    files::write_dataset(out, &days)?;
    eprintln!("wrote {} windows to {}", days.len(), out.display());
    Ok(())
}

fn fit(cfg: &PipelineConfig, dir: &Path, windows: &[DayWindow]) -> Result<CalibrationFile> {
    eprintln!("calibrating on {} windows", windows.len());
    let calibration = ModelCalibration::fit(windows, &cfg.hawkes, &cfg.regression).context("calibration failed")?;
    let hawkes = &calibration.hawkes.multi.spec;
    let prop = &calibration.propagator;
    let pms = prop.multi.spec.as_ref().or(prop.mono.spec.as_ref()).map(|p| {
        let marks = windows.iter().flat_map(|w| w.trades()).map(|e: &MarkedEvent| hawkes.mark(e));
        let support = marks.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m), hi.max(m)));
        check_pms(hawkes, p, None, support, PMS_TOLERANCE)
    });
    Ok(CalibrationFile {
        format: CALIBRATION_FORMAT.into(),
        version: VERSION,
        data: DatasetInfo::describe(dir, windows, cfg),
        config_hash: cfg.estimation_hash(),
        calibration,
        pms,
    })
}

fn calibrate(cfg: &PipelineConfig, dir: &Path, out: &Path) -> Result<()> {
    let windows = files::load_dataset(dir, cfg)?;
    let file = fit(cfg, dir, &windows)?;
    files::write_json(out, &file)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn backtest(
    cfg: &PipelineConfig,
    dir: &Path,
    calibration: Option<&Path>,
    mode: Mode,
    strategy: Option<StrategyKind>,
    penalty: Option<Penalty>,
    out: &Path,
) -> Result<()> {
    let windows = files::load_dataset(dir, cfg)?;
    let data = DatasetInfo::describe(dir, &windows, cfg);
    let cal = match (mode, calibration) {
        (Mode::OutOfSample, None) => bail!("out-of-sample backtests need --calibration from another sample"),
        (Mode::OutOfSample, Some(path)) => {
            let cal = files::read_calibration(path)?;
            if cal.data.same_sample(&data) {
                bail!("{} was fitted on the traded sample; use --mode in-sample", path.display());
            }
            cal
        }
        (Mode::InSample, Some(path)) => {
            let cal = files::read_calibration(path)?;
            if !cal.data.same_sample(&data) {
                bail!("{} was fitted on {}, not on the traded sample", path.display(), cal.data.dataset);
            }
            cal
        }
        (Mode::InSample, None) => fit(cfg, dir, &windows)?,
    };
    let with_penalty = match penalty {
        Some(p) => p == Penalty::HalfTick,
        None => cfg.backtest.half_tick_penalty,
    };
    let kinds: Vec<StrategyKind> = strategy.map_or_else(|| StrategyKind::ALL.to_vec(), |k| vec![k]);
    let mut runs = Vec::new();
    let mut columns = Vec::new();
    for kind in kinds {
        for half_tick_penalty in [false, true].into_iter().filter(|p| !p || with_penalty) {
            let bt = BacktestConfig { strategy: kind, half_tick_penalty, ..cfg.backtest.clone() };
            let run = cal.calibration.backtest(&windows, &bt).with_context(|| format!("backtest of the {} strategy failed", kind.name()))?;
            columns.push(format!("{}{}", kind.name(), if half_tick_penalty { "_bid_ask" } else { "_mid" }));
            runs.push(run);
        }
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    files::write_gains(&out.join("gains.csv"), &runs, &columns)?;
    let file = BacktestFile {
        format: BACKTEST_FORMAT.into(),
        version: VERSION,
        mode,
        data,
        calibrated_on: cal.data.clone(),
        config_hash: cal.config_hash.clone(),
        runs,
    };
    files::write_json(&out.join("backtest.json"), &file)?;
    for (name, run) in columns.iter().zip(&file.runs) {
        eprintln!("{name}: sharpe {:.3}, positive days {:.1}%", run.report.sharpe, 100.0 * run.report.proba);
    }
    Ok(())
}
