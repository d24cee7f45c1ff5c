//! Result persistence: deterministic `report.json`, per-t summary CSV,
//! plot-data CSVs (variance vs horizon, QQ data, covariance heatmap), the
//! run manifest, and the optional path / kernel dumps.
//!
//! Every file carries the config hash so outputs of different configurations
//! cannot be mixed up silently. `report.json` contains no timestamps or
//! wall-clock data — identical configs reproduce it byte for byte; the
//! manifest holds the non-reproducible metadata instead.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mc::MCReport;
use crate::stats;
use crate::synth::SamplePath;

/// Full-precision decimal rendering (17 significant digits) so oracle
/// re-checks of CSV values are exact.
fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents)?;
    Ok(())
}

/// Serialized wrapper: report plus its config hash.
#[derive(Serialize)]
struct ReportFile<'a> {
    config_hash: &'a str,
    code_version: &'a str,
    #[serde(flatten)]
    report: &'a MCReport,
}

pub fn write_report_json(out_dir: &Path, report: &MCReport, hash: &str) -> Result<PathBuf> {
    let path = out_dir.join("report.json");
    let file = ReportFile {
        config_hash: hash,
        code_version: env!("CARGO_PKG_VERSION"),
        report,
    };
    let mut bytes = serde_json::to_vec_pretty(&file)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    bytes.push(b'\n');
    write_file(&path, &bytes)?;
    Ok(path)
}

pub fn write_summary_csv(out_dir: &Path, report: &MCReport, hash: &str) -> Result<PathBuf> {
    let path = out_dir.join("summary.csv");
    let mut s = format!("# config_hash={hash}\n");
    s.push_str("horizon,t,mean,variance,var_ci_lo,var_ci_hi,skewness,excess_kurtosis,ks_statistic,ks_p\n");
    let horizons = report
        .clt
        .as_ref()
        .map(|c| &c.horizons)
        .or_else(|| report.nclt.as_ref().map(|n| &n.horizons));
    if let Some(horizons) = horizons {
        for h in horizons {
            for (stat, ks) in h.per_t.iter().zip(&h.ks) {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    full(h.horizon),
                    full(stat.t),
                    full(stat.mean),
                    full(stat.variance),
                    full(stat.variance_ci.0),
                    full(stat.variance_ci.1),
                    full(stat.skewness),
                    full(stat.excess_kurtosis),
                    full(ks.statistic),
                    full(ks.p_value),
                ));
            }
        }
    }
    write_file(&path, s.as_bytes())?;
    Ok(path)
}

pub fn write_variance_vs_t_csv(out_dir: &Path, report: &MCReport, hash: &str) -> Result<PathBuf> {
    let path = out_dir.join("variance_vs_T.csv");
    let mut s = format!("# config_hash={hash}\n");
    s.push_str("horizon,variance_ratio_at_1,abs_deviation\n");
    let horizons = report
        .clt
        .as_ref()
        .map(|c| &c.horizons)
        .or_else(|| report.nclt.as_ref().map(|n| &n.horizons));
    if let Some(horizons) = horizons {
        for h in horizons {
            s.push_str(&format!(
                "{},{},{}\n",
                full(h.horizon),
                full(h.variance_ratio_at_1),
                full((h.variance_ratio_at_1 - 1.0).abs()),
            ));
        }
    }
    write_file(&path, s.as_bytes())?;
    Ok(path)
}

/// QQ data at the largest horizon: for the central regime the reference
/// quantiles are Normal(0, σ²t); for the non-central regime the reference is
/// the simulated chaos sample (two-sample QQ). Needs the raw samples, so it
/// is emitted during the run.
pub fn write_qq_csv(
    out_dir: &Path,
    hash: &str,
    t_grid: &[f64],
    samples: &[Vec<f64>],
    reference: QqReference<'_>,
) -> Result<PathBuf> {
    let path = out_dir.join("qq_data.csv");
    let mut s = format!("# config_hash={hash}\n");
    s.push_str("t,p,empirical_quantile,reference_quantile\n");
    for (i, &t) in t_grid.iter().enumerate() {
        let mut emp = samples[i].clone();
        emp.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = emp.len();
        let mut reference_sorted;
        for (k, &x) in emp.iter().enumerate() {
            let p = (k as f64 + 0.5) / m as f64;
            let q = match reference {
                QqReference::Normal { variance_at } => {
                    let v = variance_at(t);
                    if v > 0.0 {
                        stats::standard_normal_quantile(p) * v.sqrt()
                    } else {
                        0.0
                    }
                }
                QqReference::Sample(refs) => {
                    reference_sorted = refs[i].clone();
                    reference_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let idx = ((p * reference_sorted.len() as f64) as usize)
                        .min(reference_sorted.len().saturating_sub(1));
                    reference_sorted.get(idx).copied().unwrap_or(0.0)
                }
            };
            s.push_str(&format!("{},{},{},{}\n", full(t), full(p), full(x), full(q)));
        }
    }
    write_file(&path, s.as_bytes())?;
    Ok(path)
}

pub enum QqReference<'a> {
    Normal { variance_at: &'a dyn Fn(f64) -> f64 },
    Sample(&'a [Vec<f64>]),
}

pub fn write_cov_heatmap_csv(out_dir: &Path, report: &MCReport, hash: &str) -> Result<PathBuf> {
    let path = out_dir.join("cov_heatmap.csv");
    let mut s = format!("# config_hash={hash}\n");
    s.push_str("horizon,s,t,empirical,theory,boot_se,within_3se\n");
    let horizons = report
        .clt
        .as_ref()
        .map(|c| &c.horizons)
        .or_else(|| report.nclt.as_ref().map(|n| &n.horizons));
    if let Some(horizons) = horizons {
        for h in horizons {
            for c in &h.covariance {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    full(h.horizon),
                    full(c.s),
                    full(c.t),
                    full(c.empirical),
                    full(c.theory),
                    full(c.boot_se),
                    c.within_3se,
                ));
            }
        }
    }
    write_file(&path, s.as_bytes())?;
    Ok(path)
}

/// Run manifest: reproducibility metadata. Timestamps and wall-clock fields
/// live here, never in `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    pub status: String,
    pub unix_started: u64,
    pub unix_finished: Option<u64>,
    pub runtime_seconds: Option<f64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn started(hash: &str, master_seed: u64) -> Self {
        RunManifest {
            config_hash: hash.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            status: "incomplete".into(),
            unix_started: unix_now(),
            unix_finished: None,
            runtime_seconds: None,
            outputs: Vec::new(),
        }
    }

    pub fn complete(mut self, outputs: Vec<PathBuf>, runtime: f64) -> Self {
        self.status = "complete".into();
        self.unix_finished = Some(unix_now());
        self.runtime_seconds = Some(runtime);
        self.outputs = outputs
            .into_iter()
            .map(|p| p.display().to_string())
            .collect();
        self
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(manifest)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    bytes.push(b'\n');
    write_file(&path, &bytes)?;
    Ok(path)
}

/// Debug dump of one replication's coupled paths: columns (k, t_k, X, Y).
pub fn write_path_dump(
    path: &Path,
    hash: &str,
    model_note: &str,
    x: &SamplePath,
    y: Option<&SamplePath>,
) -> Result<()> {
    let mut s = format!(
        "# config_hash={hash} model={model_note} seed={} replication={}\n",
        x.master_seed, x.replication
    );
    s.push_str("k,t,x,y\n");
    for (k, &xv) in x.values.iter().enumerate() {
        let t = x.time.step * k as f64;
        let yv = y.map(|p| p.values[k]);
        match yv {
            Some(yv) => s.push_str(&format!("{k},{},{},{}\n", full(t), full(xv), full(yv))),
            None => s.push_str(&format!("{k},{},{},\n", full(t), full(xv))),
        }
    }
    write_file(path, s.as_bytes())
}

/// Kernel evaluation dump: (x1, x2, re, im) rows.
pub fn write_kernel_dump(
    path: &Path,
    hash: &str,
    rows: &[(f64, f64, f64, f64)],
    skipped: usize,
) -> Result<()> {
    let mut s = format!("# config_hash={hash} skipped_diagonal_or_axis={skipped}\n");
    s.push_str("x1,x2,re,im\n");
    for &(x1, x2, re, im) in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            full(x1),
            full(x2),
            full(re),
            full(im)
        ));
    }
    write_file(path, s.as_bytes())
}
