//! Flat key-value experiment configs with dotted sections, e.g.
//!
//! ```text
//! mode = clt
//! seed = 42
//! model.f.exponent = 0.2
//! model.f.sv.kind = constant
//! ```
//!
//! Lines are `key = value`, `#` starts a comment, unknown keys are rejected
//! with their line number. The config hash is a SHA-256 of the canonical
//! rendering of the *effective* experiment (after CLI overrides), so outputs
//! from different configurations are always distinguishable.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mc::{AssertionSpec, ChaosConfig, ExperimentConfig, Mode};
use crate::spectral::{SlowlyVaryingSpec, SpectralModel, SvKind, Tail};
use crate::synth::SynthParams;

/// Parsed config plus provenance.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub experiment: ExperimentConfig,
    /// Raw key/value pairs in file order (comments stripped).
    pub raw: Vec<(String, String)>,
}

const KNOWN_SCALAR_KEYS: &[&str] = &[
    "mode",
    "seed",
    "replications",
    "path_len",
    "significance",
    "delta",
    "horizons",
    "t_grid",
    "t_grid.count",
    "synth.oversample",
    "synth.min_cell_factor",
    "synth.geo_ratio",
    "synth.inner_bins",
    "chaos.x_min",
    "chaos.x_split",
    "chaos.x_max",
    "chaos.geo_ratio",
    "chaos.uniform_width",
    "kernel.trunc",
    "kernel.tol",
    "assert.variance_band",
    "assert.monotone_trend",
    "assert.min_ks_passes",
];

const KNOWN_MODEL_KEYS: &[&str] = &[
    "exponent",
    "sv.kind",
    "sv.value",
    "sv.gamma",
    "sv.cutoff",
    "tail.kind",
    "tail.amplitude",
    "tail.rate",
];

struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
    order: Vec<(String, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut order = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.clone(), (value.clone(), lineno + 1)).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
            order.push((key, value));
        }
        Ok(RawConfig { entries, order })
    }

    fn check_known(&self) -> Result<()> {
        for (key, (_, line)) in &self.entries {
            let known = KNOWN_SCALAR_KEYS.contains(&key.as_str())
                || ["model.f.", "model.g."].iter().any(|prefix| {
                    key.strip_prefix(prefix)
                        .map(|rest| KNOWN_MODEL_KEYS.contains(&rest))
                        .unwrap_or(false)
                });
            if !known {
                return Err(Error::Config(format!("line {line}: unknown key '{key}'")));
            }
        }
        Ok(())
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.entries
            .get(key)
            .map(|(v, _)| v.as_str())
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    fn optional(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|(_, l)| *l).unwrap_or(0)
    }

    fn parse_f64(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.optional(key) {
            None => default.ok_or_else(|| Error::Config(format!("missing required key '{key}'"))),
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!(
                    "line {}: key '{key}': cannot parse '{v}' as a number",
                    self.line_of(key)
                ))
            }),
        }
    }

    fn parse_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.optional(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!(
                    "line {}: key '{key}': cannot parse '{v}' as an integer",
                    self.line_of(key)
                ))
            }),
        }
    }

    fn parse_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.optional(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!(
                    "line {}: key '{key}': cannot parse '{v}' as an integer",
                    self.line_of(key)
                ))
            }),
        }
    }

    fn parse_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.optional(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|piece| {
                    piece.trim().parse::<f64>().map_err(|_| {
                        Error::Config(format!(
                            "line {}: key '{key}': bad list element '{piece}'",
                            self.line_of(key)
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }
}

fn parse_model(raw: &RawConfig, which: &str) -> Result<SpectralModel> {
    let k = |suffix: &str| format!("model.{which}.{suffix}");
    let exponent = raw.parse_f64(&k("exponent"), None)?;
    let cutoff = raw.parse_f64(&k("sv.cutoff"), Some(1.0))?;
    let kind = match raw.optional(&k("sv.kind")).unwrap_or("constant") {
        "constant" => SvKind::Constant {
            value: raw.parse_f64(&k("sv.value"), Some(1.0))?,
        },
        "log-power" => SvKind::LogPower {
            gamma: raw.parse_f64(&k("sv.gamma"), Some(1.0))?,
        },
        other => {
            return Err(Error::Config(format!(
                "line {}: key '{}': unknown sv kind '{other}'",
                raw.line_of(&k("sv.kind")),
                k("sv.kind")
            )))
        }
    };
    let tail = match raw.optional(&k("tail.kind")).unwrap_or("zero") {
        "zero" => Tail::Zero,
        "exp" => Tail::Exp {
            amplitude: raw.parse_f64(&k("tail.amplitude"), Some(1.0))?,
            rate: raw.parse_f64(&k("tail.rate"), Some(1.0))?,
        },
        other => {
            return Err(Error::Config(format!(
                "line {}: key '{}': unknown tail kind '{other}'",
                raw.line_of(&k("tail.kind")),
                k("tail.kind")
            )))
        }
    };
    Ok(SpectralModel {
        exponent,
        sv: SlowlyVaryingSpec { kind, cutoff },
        tail,
    })
}

/// Parse config text into an experiment description.
pub fn parse_config_str(text: &str) -> Result<ParsedConfig> {
    let raw = RawConfig::parse(text)?;
    raw.check_known()?;

    let mode: Mode = raw.required("mode")?.parse()?;
    let f_model = parse_model(&raw, "f")?;
    let g_model = parse_model(&raw, "g")?;

    let mut cfg = ExperimentConfig::new(f_model, g_model, mode);
    cfg.master_seed = raw.parse_u64("seed", cfg.master_seed)?;
    cfg.replications = raw.parse_usize("replications", cfg.replications)?;
    cfg.path_len = raw.parse_usize("path_len", cfg.path_len)?;
    cfg.significance = raw.parse_f64("significance", Some(cfg.significance))?;
    cfg.delta = raw.parse_f64("delta", Some(cfg.delta))?;
    if let Some(h) = raw.parse_list("horizons")? {
        cfg.horizons = h;
    }
    if let Some(grid) = raw.parse_list("t_grid")? {
        cfg.t_grid = grid;
    } else if raw.optional("t_grid.count").is_some() {
        let n = raw.parse_usize("t_grid.count", 11)?;
        if n < 2 {
            return Err(Error::Config("t_grid.count must be at least 2".into()));
        }
        cfg.t_grid = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    }

    cfg.synth = SynthParams {
        oversample: raw.parse_usize("synth.oversample", cfg.synth.oversample)?,
        min_cell_factor: raw.parse_f64("synth.min_cell_factor", Some(cfg.synth.min_cell_factor))?,
        geo_ratio: raw.parse_f64("synth.geo_ratio", Some(cfg.synth.geo_ratio))?,
        inner_bins: raw.parse_usize("synth.inner_bins", cfg.synth.inner_bins)?,
    };
    cfg.chaos = ChaosConfig {
        x_min: raw.parse_f64("chaos.x_min", Some(cfg.chaos.x_min))?,
        x_split: raw.parse_f64("chaos.x_split", Some(cfg.chaos.x_split))?,
        x_max: raw.parse_f64("chaos.x_max", Some(cfg.chaos.x_max))?,
        geo_ratio: raw.parse_f64("chaos.geo_ratio", Some(cfg.chaos.geo_ratio))?,
        uniform_width: raw.parse_f64("chaos.uniform_width", Some(cfg.chaos.uniform_width))?,
    };
    cfg.kernel_trunc = raw.parse_f64("kernel.trunc", Some(cfg.kernel_trunc))?;
    cfg.kernel_tol = raw.parse_f64("kernel.tol", Some(cfg.kernel_tol))?;

    let mut assertions = AssertionSpec::default();
    if let Some(band) = raw.parse_list("assert.variance_band")? {
        if band.len() != 2 {
            return Err(Error::Config(
                "assert.variance_band expects 'lo,hi'".into(),
            ));
        }
        assertions.variance_band = Some((band[0], band[1]));
    }
    if let Some(v) = raw.optional("assert.monotone_trend") {
        assertions.monotone_trend = v.parse().map_err(|_| {
            Error::Config(format!(
                "line {}: assert.monotone_trend expects true/false",
                raw.line_of("assert.monotone_trend")
            ))
        })?;
    }
    if raw.optional("assert.min_ks_passes").is_some() {
        assertions.min_ks_passes = Some(raw.parse_usize("assert.min_ks_passes", 0)?);
    }
    cfg.assertions = assertions;

    Ok(ParsedConfig {
        experiment: cfg,
        raw: raw.order,
    })
}

pub fn parse_config_file(path: &Path) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Canonical rendering of the effective experiment; hashing this makes
/// outputs from different configurations (or overridden seeds) distinct.
pub fn canonical_string(cfg: &ExperimentConfig) -> String {
    let model = |m: &SpectralModel| -> String {
        let sv = match &m.sv.kind {
            SvKind::Constant { value } => format!("constant({value:.17e})"),
            SvKind::LogPower { gamma } => format!("log-power({gamma:.17e})"),
            SvKind::Tabulated { xs, values } => format!("tabulated({} pts, {:?})", xs.len(), values.len()),
        };
        let tail = match &m.tail {
            Tail::Zero => "zero".to_string(),
            Tail::Exp { amplitude, rate } => format!("exp({amplitude:.17e},{rate:.17e})"),
            Tail::Table { xs, .. } => format!("table({} pts)", xs.len()),
        };
        format!(
            "exponent={:.17e};sv={sv};cutoff={:.17e};tail={tail}",
            m.exponent, m.sv.cutoff
        )
    };
    let fmt_list = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x:.17e}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    format!(
        "mode={}\nf[{}]\ng[{}]\nhorizons={}\npath_len={}\nreplications={}\nt_grid={}\nseed={}\nsignificance={:.17e}\ndelta={:.17e}\nsynth={},{:.17e},{:.17e},{}\nchaos={:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\nkernel={:.17e},{:.17e}\n",
        cfg.mode,
        model(&cfg.f_model),
        model(&cfg.g_model),
        fmt_list(&cfg.horizons),
        cfg.path_len,
        cfg.replications,
        fmt_list(&cfg.t_grid),
        cfg.master_seed,
        cfg.significance,
        cfg.delta,
        cfg.synth.oversample,
        cfg.synth.min_cell_factor,
        cfg.synth.geo_ratio,
        cfg.synth.inner_bins,
        cfg.chaos.x_min,
        cfg.chaos.x_split,
        cfg.chaos.x_max,
        cfg.chaos.geo_ratio,
        cfg.chaos.uniform_width,
        cfg.kernel_trunc,
        cfg.kernel_tol,
    )
}

/// SHA-256 hex digest of the canonical experiment rendering.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_string(cfg).as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
