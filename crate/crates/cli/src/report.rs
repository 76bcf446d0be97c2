//! Report files and the provenance manifest embedded in each of them.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use e91sim_core::station::DETECTOR_LABELS;
use e91sim_core::{FairSamplingVerdict, SessionStats};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance block carried by every output file.
///
/// Everything here except `timestamp` is a pure function of the configuration,
/// so two runs of the same config and seed produce byte-identical reports once
/// that one field is set aside. CSV files only embed the deterministic part.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Preset name, config file stem, or sweep label.
    pub scenario: String,
    pub tool_version: String,
    /// Wall-clock start of the run, RFC 3339. Deliberately excluded from the
    /// determinism scope.
    pub timestamp: String,
    /// SHA-256 over the canonical JSON rendering of `config`.
    pub config_digest: String,
    /// The fully resolved configuration the engine actually ran.
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new<T: Serialize>(scenario: &str, config: &T) -> Result<Self> {
        let config = serde_json::to_value(config).context("serializing configuration")?;
        let canonical = serde_json::to_string(&config)?;
        let mut digest = String::with_capacity(64);
        for byte in Sha256::digest(canonical.as_bytes()) {
            write!(digest, "{byte:02x}")?;
        }
        Ok(RunManifest {
            scenario: scenario.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            config_digest: digest,
            config,
        })
    }

    /// Leading comment for CSV outputs; no timestamp, so identical runs give
    /// identical bytes.
    fn csv_comment(&self) -> String {
        format!(
            "# scenario={} tool_version={} config_digest={}",
            self.scenario, self.tool_version, self.config_digest
        )
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn csv_writer(path: &Path, manifest: &RunManifest) -> Result<csv::Writer<fs::File>> {
    let mut file =
        fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(file, "{}", manifest.csv_comment())?;
    Ok(csv::Writer::from_writer(file))
}

/// `summary.json`: the manifest next to the full statistics block.
pub fn write_summary(path: &Path, manifest: &RunManifest, stats: &SessionStats) -> Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        manifest: &'a RunManifest,
        #[serde(flatten)]
        stats: &'a SessionStats,
    }
    write_json(path, &Summary { manifest, stats })
}

/// `tallies.csv`: clean coincidence counts per setting pair and bit cell.
/// Angles are radians; `bits` is Alice's bit then Bob's.
pub fn write_tallies_csv(path: &Path, manifest: &RunManifest, stats: &SessionStats) -> Result<()> {
    let layout = &stats.layout;
    let mut w = csv_writer(path, manifest)?;
    w.write_record(["a_setting", "b_setting", "bits", "count"])?;
    for (ai, a) in layout.alice_settings.iter().enumerate() {
        for (bi, b) in layout.bob_settings.iter().enumerate() {
            let pair = layout.pair_index(ai, bi);
            for cell in 0..4 {
                w.write_record([
                    a.radians().to_string(),
                    b.radians().to_string(),
                    format!("{}{}", cell >> 1, cell & 1),
                    stats.tallies.bits[pair][cell].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `singles.csv`: per-station, per-setting, per-detector click counts with
/// the rounds spent at that setting. Polarimeter modes are pooled.
pub fn write_singles_csv(path: &Path, manifest: &RunManifest, stats: &SessionStats) -> Result<()> {
    let layout = &stats.layout;
    let stations = [
        ("alice", &layout.alice_settings, &stats.tallies.alice),
        ("bob", &layout.bob_settings, &stats.tallies.bob),
    ];
    let mut w = csv_writer(path, manifest)?;
    w.write_record(["station", "setting", "detector", "count", "rounds"])?;
    for (name, settings, tallies) in stations {
        for (i, setting) in settings.iter().enumerate() {
            let rounds = tallies.rounds_at(i);
            for (slot, label) in DETECTOR_LABELS.iter().enumerate() {
                w.write_record([
                    name.to_string(),
                    setting.radians().to_string(),
                    (*label).to_string(),
                    tallies.slot_clicks(i, slot).to_string(),
                    rounds.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `fair_sampling.json`: both stations' countermeasure verdicts.
pub fn write_fair_sampling(
    path: &Path,
    manifest: &RunManifest,
    stats: &SessionStats,
) -> Result<()> {
    #[derive(Serialize)]
    struct FairReport<'a> {
        manifest: &'a RunManifest,
        alice: Option<&'a FairSamplingVerdict>,
        bob: Option<&'a FairSamplingVerdict>,
    }
    write_json(
        path,
        &FairReport { manifest, alice: stats.alice_fair.as_ref(), bob: stats.bob_fair.as_ref() },
    )
}

/// One grid point of a Monte-Carlo versus closed-form comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonPoint {
    /// Relative angle between pulse polarization and polarimeter axis, radians.
    pub rel_angle: f64,
    /// Monte-Carlo click rate.
    pub mc: f64,
    /// Binomial standard error, floored at half a count per sample so the
    /// z-score stays finite even when a rate is exactly zero or one.
    pub stderr: f64,
    /// Closed-form (or quadrature) click probability.
    pub analytic: f64,
    /// `(mc - analytic) / stderr`.
    pub z: f64,
}

impl ComparisonPoint {
    pub fn new(rel_angle: f64, clicks: u64, samples: u64, analytic: f64) -> Self {
        let n = samples as f64;
        let mc = clicks as f64 / n;
        let stderr = (mc * (1.0 - mc) / n).sqrt().max(0.5 / n);
        ComparisonPoint { rel_angle, mc, stderr, analytic, z: (mc - analytic) / stderr }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub points: Vec<ComparisonPoint>,
    /// Largest |z| over the grid; 0 for an empty grid.
    pub max_abs_z: f64,
}

impl ComparisonReport {
    pub fn new(points: Vec<ComparisonPoint>) -> Self {
        let max_abs_z = points.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
        ComparisonReport { points, max_abs_z }
    }
}

/// `comparison.csv`: one row per grid point.
pub fn write_comparison_csv(
    path: &Path,
    manifest: &RunManifest,
    report: &ComparisonReport,
) -> Result<()> {
    let mut w = csv_writer(path, manifest)?;
    w.write_record(["rel_angle", "mc", "stderr", "analytic", "z"])?;
    for p in &report.points {
        w.write_record([
            p.rel_angle.to_string(),
            p.mc.to_string(),
            p.stderr.to_string(),
            p.analytic.to_string(),
            p.z.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
