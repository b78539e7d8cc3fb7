use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use semitrace::harness::{self, Config, SweepOptions};

#[derive(Debug, Parser)]
#[command(name = "semitrace", version, about = "Semiclassical trace formula laboratory")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for sampled points; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write plot.gnuplot next to the report.
    #[arg(long, global = true)]
    emit_plots: bool,
    /// Record wall time per row; makes report.csv non-reproducible.
    #[arg(long, global = true)]
    wall_clock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Periodic components of a quadratic system with their densities.
    AnalyzeQuadratic,
    /// Resonant tori of an action-angle system and their amplitudes.
    BerryTabor,
    /// Frequency class and orbit predicates of a quadratic system.
    Classify {
        /// Random points per component, in addition to the representative.
        #[arg(long, default_value_t = 8)]
        samples: usize,
    },
    /// Checks an existing report.csv for consistency and convergence.
    Compare {
        /// Report to check; defaults to OUT/report.csv.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Fail when any evaluation row exceeds this relative error.
        #[arg(long)]
        max_rel_err: Option<f64>,
    },
    /// Quantum and semiclassical densities over the configured h list.
    Sweep,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let path = path.context("--config is required for this subcommand")?;
    Config::load(path).with_context(|| format!("loading {}", path.display()))
}

fn write(path: PathBuf, contents: String) -> Result<()> {
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_sweep(cli: &Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let report = harness::sweep(&config, &SweepOptions { wall_clock: cli.wall_clock })?;
    let files = report.write(&cli.out, cli.emit_plots)?;
    println!("{:>12} {:>14} {:>14} {:>10}", "h", "|quantum|", "rel_err", "count");
    for row in &report.rows {
        let tag = if row.h == report.calibration_h { " (calibration)" } else { "" };
        println!("{:>12.6} {:>14.6e} {:>14.6e} {:>10}{tag}", row.h, row.quantum.norm(), row.rel_err, row.n_eigenvalues);
    }
    println!("wrote {}", files.report.display());
    println!("wrote {}", files.components.display());
    if let Some(plot) = files.plot {
        println!("wrote {}", plot.display());
    }
    Ok(())
}

fn run_classify(cli: &Cli, samples: usize) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let report = harness::classify(&config, samples, seed)?;
    println!("frequency class: {:?}", report.frequencies.class);
    for p in &report.periods {
        println!("T = {:<12.6} J = {:?} dim = {} {}", p.period, p.resonant, p.dim, p.labels.join(","));
    }
    std::fs::create_dir_all(&cli.out)?;
    write(cli.out.join("classify.json"), serde_json::to_string_pretty(&report)?)
}

fn run_analyze(cli: &Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let analysis = harness::analyze_quadratic(&config)?;
    for c in &analysis.components {
        println!("T = {:<12.6} dim = {} d^2 = {:.6e} {}", c.period, c.dim, c.d_squared_closed_form, c.label);
    }
    std::fs::create_dir_all(&cli.out)?;
    write(cli.out.join("analysis.json"), serde_json::to_string_pretty(&analysis)?)
}

fn run_berry_tabor(cli: &Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let table = harness::torus_table(&config)?;
    for t in &table.tori {
        println!("M = {:?} T = {:.6} K = {:.6e} beta = {:?}", t.winding, t.period, t.curvature, t.beta_candidates);
    }
    if !table.multiple_solutions.is_empty() {
        log::warn!("winding vectors with several tori in the window: {:?}", table.multiple_solutions);
    }
    std::fs::create_dir_all(&cli.out)?;
    write(cli.out.join("tori.json"), serde_json::to_string_pretty(&table)?)?;
    write(cli.out.join("amplitudes.csv"), table.amplitudes_csv())
}

fn run_compare(cli: &Cli, report: Option<&Path>, max_rel_err: Option<f64>) -> Result<bool> {
    let path = report.map(Path::to_path_buf).unwrap_or_else(|| cli.out.join("report.csv"));
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let rows = harness::load_report_csv(&text).with_context(|| format!("checking {}", path.display()))?;
    let calibration_h = match &cli.config {
        Some(p) => load_config(Some(p))?.calibration_h()?,
        None => match rows.last() {
            Some(r) => r.h,
            None => bail!("{} has no rows", path.display()),
        },
    };
    let evaluation: Vec<_> = rows.iter().filter(|r| r.h != calibration_h).collect();
    let mut ok = true;
    for pair in evaluation.windows(2) {
        if !(pair[1].rel_err < pair[0].rel_err) {
            println!("FAIL: rel_err does not decrease from h = {} to h = {}", pair[0].h, pair[1].h);
            ok = false;
        }
    }
    if let Some(limit) = max_rel_err {
        for r in evaluation.iter().filter(|r| !(r.rel_err < limit)) {
            println!("FAIL: rel_err {} at h = {} exceeds {limit}", r.rel_err, r.h);
            ok = false;
        }
    }
    for r in &rows {
        let tag = if r.h == calibration_h { " (calibration)" } else { "" };
        println!("h = {:<10} rel_err = {:.6e}{tag}", r.h, r.rel_err);
    }
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Sweep => run_sweep(cli)?,
        Command::Classify { samples } => run_classify(cli, *samples)?,
        Command::AnalyzeQuadratic => run_analyze(cli)?,
        Command::BerryTabor => run_berry_tabor(cli)?,
        Command::Compare { report, max_rel_err } => return run_compare(cli, report.as_deref(), *max_rel_err),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build();
    let outcome = match pool {
        Ok(pool) => pool.install(|| run(&cli)),
        Err(e) => Err(e.into()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
