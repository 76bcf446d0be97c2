//! `e91sim` — run E91 sessions against honest or hostile hardware models and
//! check the Monte-Carlo results against closed-form predictions.
//!
//! Exit codes: 0 when every fair-sampling verdict passes, 3 when any verdict
//! is Fail, 4 when a verdict is inconclusive or unavailable, 2 for config,
//! I/O, or usage errors.

mod config;
mod report;

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use e91sim_core::analytics::{self, Arm};
use e91sim_core::presets::{self, PresetOverrides};
use e91sim_core::{
    run_session, scan_single_station, Angle, DetectorModel, SessionConfig, SessionStats, Verdict,
};
use report::{ComparisonPoint, ComparisonReport, RunManifest};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "e91sim",
    version,
    about = "E91 session simulator and detector-attack analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a session and write summary/tally reports
    Run(RunArgs),
    /// Sweep one station over relative angles and compare Monte-Carlo click
    /// rates with the analytic curve
    Compare(CompareArgs),
    /// List the built-in scenario presets
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// Preset name, or a path to a session TOML (recognized by ".toml" or a
    /// path separator)
    scenario: Option<String>,
    /// Preset name (same as the positional form)
    #[arg(long, conflicts_with = "scenario")]
    preset: Option<String>,
    /// Session TOML path (same as the positional form)
    #[arg(long, conflicts_with_all = ["scenario", "preset"])]
    config: Option<PathBuf>,
    /// Override the number of rounds
    #[arg(long)]
    rounds: Option<u64>,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Detector efficiency (genuine preset only)
    #[arg(long)]
    eta: Option<f64>,
    /// Pulse energy as a multiple of the click threshold (high-energy attack
    /// preset only)
    #[arg(long)]
    energy_ratio: Option<f64>,
    /// Report directory [default: $E91SIM_OUT_DIR, else ./out]
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for the simulation [default: all cores]
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Detector model to sweep
    #[arg(value_parser = ["ideal", "linear"], default_value = "ideal")]
    detector: String,
    /// Click threshold Φ
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    /// Saturation energy (linear model only)
    #[arg(long, default_value_t = 2.0)]
    saturation: f64,
    /// Pulse energy as a multiple of Φ
    #[arg(long, default_value_t = 2.0)]
    energy_ratio: f64,
    /// Evenly spaced grid points on [grid-min, grid-max]; 0 gives an empty
    /// report
    #[arg(long, default_value_t = 9)]
    grid_points: usize,
    /// First relative angle, radians
    #[arg(long, default_value_t = 0.0)]
    grid_min: f64,
    /// Last relative angle, radians
    #[arg(long, default_value_t = FRAC_PI_2)]
    grid_max: f64,
    /// Monte-Carlo pulses per grid point
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// Base seed; grid point i uses seed + i
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report directory [default: $E91SIM_OUT_DIR, else ./out]
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for the sweep [default: all cores]
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Presets => cmd_presets(),
    };
    result.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        ExitCode::from(2)
    })
}

fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("E91SIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn in_worker_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building the worker pool")?;
            Ok(pool.install(job))
        }
    }
}

fn looks_like_path(name: &str) -> bool {
    name.ends_with(".toml") || name.contains('/') || name.contains(std::path::MAIN_SEPARATOR)
}

/// Builds the session configuration plus the scenario label for the manifest.
/// Fails before anything is written, so a broken config leaves no outputs.
fn resolve_run_config(args: &RunArgs) -> Result<(String, SessionConfig)> {
    let overrides = PresetOverrides {
        rounds: args.rounds,
        seed: args.seed,
        eta: args.eta,
        energy_ratio: args.energy_ratio,
    };

    let from_file = |path: &Path| -> Result<(String, SessionConfig)> {
        if args.eta.is_some() || args.energy_ratio.is_some() {
            bail!(
                "--eta and --energy-ratio tune presets; a config file sets its \
                 detector models and source directly"
            );
        }
        let mut cfg = config::load_session_file(path)?;
        if let Some(rounds) = args.rounds {
            cfg.rounds = rounds;
        }
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "session".into());
        Ok((label, cfg))
    };

    let (label, cfg) = if let Some(path) = &args.config {
        from_file(path)?
    } else {
        let name = args
            .preset
            .as_deref()
            .or(args.scenario.as_deref())
            .context("give a preset name or a config path; `e91sim presets` lists presets")?;
        if looks_like_path(name) {
            from_file(Path::new(name))?
        } else {
            let preset = presets::find(name).with_context(|| {
                let names: Vec<_> = presets::registry().iter().map(|p| p.name()).collect();
                format!("unknown preset {name:?}; available: {}", names.join(", "))
            })?;
            (preset.name().to_string(), preset.build(&overrides)?)
        }
    };
    cfg.validate()?;
    Ok((label, cfg))
}

fn verdict_exit(stats: &SessionStats) -> ExitCode {
    let verdicts =
        [stats.alice_fair.as_ref().map(|v| v.verdict), stats.bob_fair.as_ref().map(|v| v.verdict)];
    if verdicts.contains(&Some(Verdict::Fail)) {
        ExitCode::from(3)
    } else if verdicts.iter().all(|v| *v == Some(Verdict::Pass)) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    }
}

fn verdict_name(v: Option<&e91sim_core::FairSamplingVerdict>) -> String {
    match v {
        Some(f) => format!("{:?}", f.verdict),
        None => "Unavailable".into(),
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let (label, cfg) = resolve_run_config(&args)?;
    let manifest = RunManifest::new(&label, &cfg)?;

    let out_dir = resolve_out_dir(args.out_dir);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let stats = in_worker_pool(args.workers, || run_session(&cfg))??;

    report::write_summary(&out_dir.join("summary.json"), &manifest, &stats)?;
    report::write_tallies_csv(&out_dir.join("tallies.csv"), &manifest, &stats)?;
    report::write_singles_csv(&out_dir.join("singles.csv"), &manifest, &stats)?;
    report::write_fair_sampling(&out_dir.join("fair_sampling.json"), &manifest, &stats)?;

    println!("scenario       {label}");
    println!("rounds         {} (seed {})", cfg.rounds, cfg.seed);
    match &stats.chsh {
        Some(chsh) => println!("CHSH S         {:.4} ± {:.4}", chsh.s, chsh.stderr),
        None => println!("CHSH S         unavailable (insufficient coincidences)"),
    }
    match &stats.qber {
        Some(q) => {
            println!("QBER           {:.4} over {} sifted bits", q.qber, stats.sifted_key_length)
        }
        None => println!("QBER           unavailable (no sifted bits)"),
    }
    println!(
        "fair sampling  alice {}, bob {}",
        verdict_name(stats.alice_fair.as_ref()),
        verdict_name(stats.bob_fair.as_ref())
    );
    println!(
        "double clicks  alice {:.4}, bob {:.4}",
        stats.doubles.alice.both_channels,
        stats.doubles.bob.both_channels
    );
    println!(
        "loophole       {} (critical efficiency {:.4})",
        if stats.loophole.open { "open" } else { "closed" },
        stats.loophole.critical_efficiency
    );
    println!("reports in     {}", out_dir.display());

    Ok(verdict_exit(&stats))
}

/// Parameters of a `compare` sweep, embedded in its manifest.
#[derive(Serialize)]
struct CompareSpec {
    detector: DetectorModel,
    e0: f64,
    grid_min: f64,
    grid_max: f64,
    grid_points: usize,
    samples: u64,
    seed: u64,
}

fn grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        n => (0..n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let detector = match args.detector.as_str() {
        "ideal" => DetectorModel::IdealThreshold { threshold: args.threshold },
        "linear" => DetectorModel::LinearThreshold {
            threshold: args.threshold,
            saturation: args.saturation,
        },
        other => bail!("unknown detector model {other:?}"),
    };
    if args.samples == 0 {
        bail!("--samples must be at least 1");
    }
    let e0 = args.energy_ratio * args.threshold;
    let angles = grid(args.grid_min, args.grid_max, args.grid_points);

    let spec = CompareSpec {
        detector,
        e0,
        grid_min: args.grid_min,
        grid_max: args.grid_max,
        grid_points: args.grid_points,
        samples: args.samples,
        seed: args.seed,
    };
    let label = format!("compare-{}", args.detector);
    let manifest = RunManifest::new(&label, &spec)?;

    let analytic = analytics::singles_curve(&detector, e0, &angles, Arm::Transmitted)?;
    let points = in_worker_pool(args.workers, || -> Result<Vec<ComparisonPoint>> {
        angles
            .iter()
            .zip(&analytic.values)
            .enumerate()
            .map(|(i, (&rel, &expected))| {
                let clicks = scan_single_station(
                    e0,
                    &detector,
                    Angle::new(rel),
                    args.samples,
                    args.seed + i as u64,
                )?;
                Ok(ComparisonPoint::new(rel, clicks, args.samples, expected))
            })
            .collect()
    })??;
    let report = ComparisonReport::new(points);

    let out_dir = resolve_out_dir(args.out_dir);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    report::write_comparison_csv(&out_dir.join("comparison.csv"), &manifest, &report)?;

    for p in &report.points {
        println!(
            "rel {:>8.5}  mc {:.6}  analytic {:.6}  z {:+.3}",
            p.rel_angle, p.mc, p.analytic, p.z
        );
    }
    println!(
        "max |z| = {:.3} over {} grid points ({} samples each)",
        report.max_abs_z,
        report.points.len(),
        args.samples
    );
    println!("report in {}", out_dir.join("comparison.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_presets() -> Result<ExitCode> {
    for preset in presets::registry() {
        println!("{:<22} {}", preset.name(), preset.summary());
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_inclusive_and_evenly_spaced() {
        assert!(grid(0.0, 1.0, 0).is_empty());
        assert_eq!(grid(0.3, 1.0, 1), vec![0.3]);
        let g = grid(0.0, FRAC_PI_2, 9);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[8], FRAC_PI_2);
        assert!((g[4] - FRAC_PI_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn path_detection_only_triggers_on_paths() {
        assert!(looks_like_path("missing.toml"));
        assert!(looks_like_path("configs/run.toml"));
        assert!(!looks_like_path("genuine"));
        assert!(!looks_like_path("attack-ideal-linear"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
