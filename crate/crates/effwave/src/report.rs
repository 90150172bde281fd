//! Persistence: the aggregated run report, fixed-schema CSV artifacts, and
//! the provenance manifest. All writes go through a single writer at the
//! end of a stage, so partially parallel stages never interleave output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bands::CriticalPoint;
use crate::config::{config_hash, RunConfig};
use crate::correctors::CorrectorReport;
use crate::effective::EffectiveModelExport;
use crate::error::{Error, Result};
use crate::harness::{ConvergenceReport, SampleMass};
use crate::spde::Trajectory;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct BandsExport {
    pub theta: Vec<f64>,
    /// `bands[n-1][j] = lambda_n(theta_j)`.
    pub bands: Vec<Vec<f64>>,
}

#[derive(Debug, Default, Serialize)]
pub struct RunReport {
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<BandsExport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical: Option<CriticalPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correctors: Option<CorrectorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective: Option<EffectiveModelExport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    /// Unix seconds at stage start.
    pub started_at: u64,
    pub wall_seconds: f64,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    file.write_all(contents.as_bytes())
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io { path: dir.display().to_string(), source: e })
}

pub fn bands_csv(bands: &BandsExport) -> String {
    let n_bands = bands.bands.len();
    let mut out = String::from("theta");
    for n in 1..=n_bands {
        out.push_str(&format!(",lambda_{n}"));
    }
    out.push('\n');
    for (j, theta) in bands.theta.iter().enumerate() {
        out.push_str(&format!("{theta}"));
        for band in &bands.bands {
            out.push_str(&format!(",{}", band[j]));
        }
        out.push('\n');
    }
    out
}

pub fn errors_csv(convergence: Option<&ConvergenceReport>) -> String {
    let mut out = String::from("epsilon,replicas,t,err_mean,err_stderr\n");
    if let Some(conv) = convergence {
        for eps in &conv.eps_reports {
            for (i, t) in eps.times.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    eps.eps, eps.replicas_completed, t, eps.err_mean[i], eps.err_stderr[i]
                ));
            }
        }
    }
    out
}

pub fn mass_csv(sample: Option<&SampleMass>) -> String {
    let mut out = String::from("t,mass,predicted,residual\n");
    if let Some(mass) = sample {
        for (i, t) in mass.times.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t, mass.observed[i], mass.predicted[i], mass.residual[i]
            ));
        }
    }
    out
}

/// Snapshot export: one row per (t, x) pair.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,re_v,im_v\n");
    for (snapshot, t) in traj.states.iter().zip(&traj.times) {
        for (x, z) in traj.x_grid.iter().zip(snapshot) {
            out.push_str(&format!("{t},{x},{},{}\n", z.re, z.im));
        }
    }
    out
}

/// Write the deterministic artifact set and the manifest. Returns the paths
/// written.
pub fn write_report(
    report: &RunReport,
    config: &RunConfig,
    seed: u64,
    out_dir: &Path,
    started_at: u64,
    wall_seconds: f64,
) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();

    let report_path = out_dir.join("report.json");
    let mut report_text =
        serde_json::to_string_pretty(report).expect("report serialization is infallible");
    report_text.push('\n');
    write_file(&report_path, &report_text)?;
    written.push(report_path);

    let bands_path = out_dir.join("bands.csv");
    write_file(
        &bands_path,
        &report
            .bands
            .as_ref()
            .map(bands_csv)
            .unwrap_or_else(|| "theta,lambda_1\n".to_string()),
    )?;
    written.push(bands_path);

    let errors_path = out_dir.join("errors.csv");
    write_file(&errors_path, &errors_csv(report.convergence.as_ref()))?;
    written.push(errors_path);

    let mass_path = out_dir.join("mass.csv");
    write_file(&mass_path, &mass_csv(report.convergence.as_ref().map(|c| &c.sample_mass)))?;
    written.push(mass_path);

    let manifest = Manifest {
        config_hash: format!("{:016x}", config_hash(config)),
        seed,
        tool_version: TOOL_VERSION.to_string(),
        started_at,
        wall_seconds,
    };
    let manifest_path = out_dir.join("manifest.json");
    let mut manifest_text =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization is infallible");
    manifest_text.push('\n');
    write_file(&manifest_path, &manifest_text)?;
    written.push(manifest_path);

    Ok(written)
}

pub fn write_named(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let path = out_dir.join(name);
    write_file(&path, contents)?;
    Ok(path)
}
