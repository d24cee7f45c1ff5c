//! Monte Carlo harness: orchestrates replicated experiments that check the
//! statistical content of the limit theorems at desk scale — Brownian
//! variance and covariance structure in the central regime, convergence of
//! the normalized functional to the second-chaos process in the non-central
//! regime, the companion-process approximation gap, and the increment and
//! moment bounds used for tightness.
//!
//! Determinism: every replication derives its noise from
//! `(master_seed, replication)`, parallel loops collect in replication
//! order, and bootstrap seeds are fixed mixes of the master seed, so reports
//! are byte-identical regardless of the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit::{
    kernel_l2_norm, ChaosSimulator, KernelSettings, LimitKernel, NormEstimate,
};
use crate::quadform::{
    companion_functional, expected_qt, normalize, theoretical_increment_variance_lt,
    Normalization, QtFftEvaluator,
};
use crate::spectral::{
    check_clt_conditions, check_potter_bound, classify_regime, companion_transform_table,
    fourier_transform_table, CltConditionsReport, PotterReport, Regime, SpectralModel,
};
use crate::stats;
use crate::synth::{draw_noise, FrequencyGrid, SpectralSampler, SynthParams, TimeGrid};

/// Experiment kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Clt,
    Nclt,
    CompanionGap,
    KernelOnly,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clt" => Ok(Mode::Clt),
            "nclt" => Ok(Mode::Nclt),
            "companion-gap" => Ok(Mode::CompanionGap),
            "kernel-only" => Ok(Mode::KernelOnly),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected clt | nclt | companion-gap | kernel-only)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Clt => write!(f, "clt"),
            Mode::Nclt => write!(f, "nclt"),
            Mode::CompanionGap => write!(f, "companion-gap"),
            Mode::KernelOnly => write!(f, "kernel-only"),
        }
    }
}

/// Chaos-grid tunables for the second-chaos simulation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChaosConfig {
    pub x_min: f64,
    pub x_split: f64,
    pub x_max: f64,
    pub geo_ratio: f64,
    pub uniform_width: f64,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        ChaosConfig {
            x_min: 1e-3,
            x_split: 0.5,
            x_max: 80.0,
            geo_ratio: 1.25,
            uniform_width: 0.3,
        }
    }
}

/// Optional pass/fail gates evaluated on the finished report; any failure
/// makes the CLI exit nonzero.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AssertionSpec {
    pub variance_band: Option<(f64, f64)>,
    pub monotone_trend: bool,
    pub min_ks_passes: Option<usize>,
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub f_model: SpectralModel,
    pub g_model: SpectralModel,
    pub mode: Mode,
    pub horizons: Vec<f64>,
    pub path_len: usize,
    pub replications: usize,
    pub t_grid: Vec<f64>,
    pub master_seed: u64,
    pub significance: f64,
    /// Increment exponent for the non-central scaling study.
    pub delta: f64,
    pub synth: SynthParams,
    pub chaos: ChaosConfig,
    pub kernel_trunc: f64,
    pub kernel_tol: f64,
    pub assertions: AssertionSpec,
}

impl ExperimentConfig {
    pub fn new(f_model: SpectralModel, g_model: SpectralModel, mode: Mode) -> Self {
        ExperimentConfig {
            f_model,
            g_model,
            mode,
            horizons: vec![64.0, 256.0, 1024.0],
            path_len: 1 << 16,
            replications: 2000,
            t_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            master_seed: 1,
            significance: 0.01,
            delta: 0.3,
            synth: SynthParams::default(),
            chaos: ChaosConfig::default(),
            kernel_trunc: 50.0,
            kernel_tol: 1e-3,
            assertions: AssertionSpec::default(),
        }
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self.f_model.exponent, self.g_model.exponent)
    }

    pub fn validate(&self) -> Result<()> {
        self.f_model.validate()?;
        self.g_model.validate()?;
        let regime = self.regime();
        match self.mode {
            Mode::Clt | Mode::CompanionGap => {
                if !matches!(regime, Regime::Clt | Regime::Critical) {
                    return Err(Error::Config(format!(
                        "mode {} requires the CLT or Critical regime, got {regime}",
                        self.mode
                    )));
                }
            }
            Mode::Nclt => {
                if regime != Regime::Nclt {
                    return Err(Error::Config(format!(
                        "mode nclt requires the NCLT regime, got {regime}"
                    )));
                }
            }
            Mode::KernelOnly => {
                if regime == Regime::Invalid {
                    return Err(Error::Config("Invalid regime: need alpha < 1, beta < 1".into()));
                }
            }
        }
        if self.mode != Mode::KernelOnly && self.replications < 100 {
            return Err(Error::Config(
                "at least 100 replications are required for distribution tests".into(),
            ));
        }
        if self.t_grid.is_empty()
            || self
                .t_grid
                .iter()
                .any(|&t| !(0.0..=1.0).contains(&t) || !t.is_finite())
            || self.t_grid.windows(2).any(|w| w[1] <= w[0])
            || (self.t_grid.last().copied().unwrap_or(0.0) - 1.0).abs() > 1e-12
        {
            return Err(Error::Config(
                "t grid must be strictly increasing inside [0,1] and include 1".into(),
            ));
        }
        if self.mode != Mode::KernelOnly
            && (self.horizons.is_empty()
                || self.horizons.iter().any(|&t| t <= 0.0)
                || self.horizons.windows(2).any(|w| w[1] <= w[0]))
        {
            return Err(Error::Config("horizons must be positive and increasing".into()));
        }
        if self.path_len == 0 {
            return Err(Error::Config("path_len must be positive".into()));
        }
        if !(self.significance > 0.0 && self.significance < 0.5) {
            return Err(Error::Config("significance must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Report structures (all Vec-based: serialization order is deterministic).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TStat {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub variance_ci: (f64, f64),
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KsStat {
    pub t: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CovCell {
    pub s: f64,
    pub t: f64,
    pub empirical: f64,
    pub theory: f64,
    pub boot_se: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HorizonReport {
    pub horizon: f64,
    pub per_t: Vec<TStat>,
    /// Var at t = 1 divided by the theoretical reference (σ² or 2||H_1||²).
    pub variance_ratio_at_1: f64,
    /// Exact finite-horizon theory ratio for the companion functional,
    /// `Var L_T(1)/σ²` from the triangular covariance formula: the honest
    /// attainable level at this horizon (central regime only).
    pub finite_t_theory_ratio: Option<f64>,
    pub ks: Vec<KsStat>,
    pub ks_passes: usize,
    pub covariance: Vec<CovCell>,
    pub brownian_pairs_within_3se: usize,
    pub brownian_pairs_total: usize,
    /// Most negative eigenvalue of the empirical covariance matrix divided
    /// by the largest one (PSD within tolerance when tiny).
    pub cov_psd_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendReport {
    pub rows: Vec<(f64, f64)>,
    pub kendall_tau: f64,
    pub p_decreasing: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IncrementStudy {
    pub separations: Vec<f64>,
    pub mean_square: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FourthMomentStat {
    pub t: f64,
    pub ratio: f64,
    pub ci: (f64, f64),
    pub degenerate: bool,
    pub within_chaos_bound: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltSection {
    pub sigma2: f64,
    pub conditions: CltConditionsReport,
    pub horizons: Vec<HorizonReport>,
    pub trend: TrendReport,
    pub increment_study: Option<IncrementStudy>,
    pub fourth_moment: Vec<FourthMomentStat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub t: f64,
    pub gap_variance: f64,
    pub q_variance: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IncrementVarianceCheck {
    pub s: f64,
    pub t: f64,
    pub empirical: f64,
    pub theoretical: f64,
    pub boot_se: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapSection {
    pub by_horizon: Vec<(f64, Vec<GapRow>)>,
    /// Gap variance ratio at t = 1 per horizon, decreasing when Lemma-2-like
    /// behavior is visible.
    pub trend: TrendReport,
    pub l_stats: Vec<TStat>,
    pub l_mean_within_3se: bool,
    pub l_increment_check: IncrementVarianceCheck,
    pub l_variance_check: IncrementVarianceCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosSection {
    pub per_t: Vec<TStat>,
    pub discrete_variance_at_1: f64,
    pub max_imag_residue: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NcltSection {
    pub norm2_at_1: NormEstimate,
    pub potter_f: PotterReport,
    pub potter_g: PotterReport,
    pub horizons: Vec<HorizonReport>,
    pub trend: TrendReport,
    pub chaos: ChaosSection,
    pub two_sample_ks: Vec<KsStat>,
    pub two_sample_ks_passes: usize,
    pub kurtosis_z_t: FourthMomentStat,
    pub kurtosis_z: FourthMomentStat,
    pub increment_study: Option<IncrementStudy>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelOnlySection {
    pub norms: Vec<(f64, NormEstimate)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertionResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Top-level Monte Carlo report, serialized as `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct MCReport {
    pub mode: String,
    pub regime: Regime,
    pub master_seed: u64,
    pub replications: usize,
    pub horizons: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub clt: Option<CltSection>,
    pub gap: Option<GapSection>,
    pub nclt: Option<NcltSection>,
    pub kernel_only: Option<KernelOnlySection>,
    pub assertions: Vec<AssertionResult>,
    pub assertions_passed: bool,
}

// ---------------------------------------------------------------------------
// Simulation cores.
// ---------------------------------------------------------------------------

/// Per-horizon sample matrices, indexed `[t_idx][replication]`.
pub struct HorizonSamples {
    pub horizon: f64,
    pub q: Vec<Vec<f64>>,
    pub l: Option<Vec<Vec<f64>>>,
}

fn transpose(reps: Vec<Vec<f64>>, n_t: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(reps.len()); n_t];
    for rep in reps {
        for (slot, v) in out.iter_mut().zip(rep) {
            slot.push(v);
        }
    }
    out
}

/// Simulate one horizon of the (possibly coupled) normalized functionals.
fn simulate_horizon(
    cfg: &ExperimentConfig,
    horizon: f64,
    with_companion: bool,
    nclt_normalization: bool,
) -> Result<HorizonSamples> {
    let time = TimeGrid::for_horizon(horizon, cfg.path_len);
    let x_max = cfg.f_model.coverage_radius(1e-4)?;
    let grid = FrequencyGrid::for_synthesis(x_max, &time, &cfg.synth)?;
    let sampler_x = SpectralSampler::for_process(&cfg.f_model, &grid, &time)?;
    let sampler_y = if with_companion {
        Some(SpectralSampler::for_companion(
            &cfg.f_model,
            &cfg.g_model,
            &grid,
            &time,
        )?)
    } else {
        None
    };

    let kernel_table =
        fourier_transform_table(&cfg.g_model, time.step, horizon + time.step, 1e-9)?;
    let evaluator = QtFftEvaluator::new(&kernel_table, &time)?;
    // Exact centering: the expectation of the discrete functional under the
    // synthesized (grid) covariance, not the continuum one.
    let r_grid = sampler_x.covariance_table(time.step, cfg.path_len + 1);
    let expectations: Vec<f64> = cfg
        .t_grid
        .iter()
        .map(|&t| expected_qt(&kernel_table, &r_grid, horizon, t))
        .collect::<Result<_>>()?;
    let r_y0 = sampler_y.as_ref().map(|s| s.grid_variance());

    let (mode, l1, l2) = if nclt_normalization {
        (
            Normalization::Nclt,
            cfg.f_model.sv.eval(1.0 / horizon),
            cfg.g_model.sv.eval(1.0 / horizon),
        )
    } else {
        (Normalization::Clt, 1.0, 1.0)
    };
    let alpha = cfg.f_model.exponent;
    let beta = cfg.g_model.exponent;

    let reps: Vec<(Vec<f64>, Option<Vec<f64>>)> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| -> Result<(Vec<f64>, Option<Vec<f64>>)> {
            let noise = draw_noise(&grid, cfg.master_seed, rep);
            let x = sampler_x.synthesize(&noise)?;
            let raw = evaluator.eval(&x, &cfg.t_grid)?;
            let q = normalize(&raw, &expectations, mode, horizon, alpha, beta, l1, l2)?;
            let l = match (&sampler_y, r_y0) {
                (Some(sy), Some(r0)) => {
                    let y = sy.synthesize(&noise)?;
                    Some(companion_functional(&y, r0, &cfg.t_grid)?.values)
                }
                _ => None,
            };
            Ok((q.values, l))
        })
        .collect::<Result<_>>()?;

    let n_t = cfg.t_grid.len();
    let (qs, ls): (Vec<Vec<f64>>, Vec<Option<Vec<f64>>>) = reps.into_iter().unzip();
    let l = if with_companion {
        Some(transpose(ls.into_iter().flatten().collect(), n_t))
    } else {
        None
    };
    Ok(HorizonSamples {
        horizon,
        q: transpose(qs, n_t),
        l,
    })
}

// ---------------------------------------------------------------------------
// Statistics assembly.
// ---------------------------------------------------------------------------

fn t_stats(cfg: &ExperimentConfig, samples: &[Vec<f64>]) -> Vec<TStat> {
    cfg.t_grid
        .iter()
        .zip(samples)
        .enumerate()
        .map(|(idx, (&t, xs))| {
            let seed = stats::mix_seed(cfg.master_seed, 0xB001 + idx as u64);
            let ci = stats::bootstrap_ci(xs, stats::variance, 400, cfg.significance, seed);
            TStat {
                t,
                mean: stats::mean(xs),
                variance: stats::variance(xs),
                variance_ci: ci,
                skewness: stats::skewness(xs),
                excess_kurtosis: stats::excess_kurtosis(xs),
            }
        })
        .collect()
}

/// One-sample KS against Normal(0, var_t); degenerate targets compare the
/// point mass at zero directly.
fn ks_against_normal(cfg: &ExperimentConfig, samples: &[Vec<f64>], theory_var: &[f64]) -> Vec<KsStat> {
    cfg.t_grid
        .iter()
        .zip(samples.iter().zip(theory_var))
        .map(|(&t, (xs, &v))| {
            if v <= 0.0 {
                let all_zero = xs.iter().all(|&x| x.abs() < 1e-12);
                KsStat {
                    t,
                    statistic: if all_zero { 0.0 } else { 1.0 },
                    p_value: if all_zero { 1.0 } else { 0.0 },
                    rejected: !all_zero,
                    degenerate: true,
                }
            } else {
                let sd = v.sqrt();
                let out = stats::ks_one_sample(xs, |x| stats::standard_normal_cdf(x / sd));
                KsStat {
                    t,
                    statistic: out.statistic,
                    p_value: out.p_value,
                    rejected: out.p_value < cfg.significance,
                    degenerate: false,
                }
            }
        })
        .collect()
}

/// Empirical covariance matrix against a Brownian-structure theory, with
/// paired-bootstrap standard errors.
fn covariance_section(
    cfg: &ExperimentConfig,
    samples: &[Vec<f64>],
    theory: impl Fn(f64, f64) -> f64,
) -> (Vec<CovCell>, usize, usize, f64) {
    let n_t = cfg.t_grid.len();
    let mut cells = Vec::new();
    let mut within = 0usize;
    let mut total = 0usize;
    let mut mat = vec![vec![0.0; n_t]; n_t];
    for i in 0..n_t {
        for j in i..n_t {
            let emp = stats::covariance(&samples[i], &samples[j]);
            mat[i][j] = emp;
            mat[j][i] = emp;
            let th = theory(cfg.t_grid[i], cfg.t_grid[j]);
            let seed = stats::mix_seed(cfg.master_seed, 0xC0C0 + (i * n_t + j) as u64);
            let se = stats::bootstrap_se_paired(&samples[i], &samples[j], stats::covariance, 200, seed);
            let ok = (emp - th).abs() <= 3.0 * se || (se == 0.0 && (emp - th).abs() < 1e-12);
            cells.push(CovCell {
                s: cfg.t_grid[i],
                t: cfg.t_grid[j],
                empirical: emp,
                theory: th,
                boot_se: se,
                within_3se: ok,
            });
            within += ok as usize;
            total += 1;
        }
    }
    let eig = stats::symmetric_eigenvalues(&mat);
    let max_eig = eig.iter().fold(0.0f64, |m, &e| m.max(e.abs())).max(1e-300);
    let min_eig = eig.iter().fold(f64::INFINITY, |m, &e| m.min(e));
    let defect = if min_eig < 0.0 { -min_eig / max_eig } else { 0.0 };
    (cells, within, total, defect)
}

fn horizon_report(
    cfg: &ExperimentConfig,
    samples: &HorizonSamples,
    reference_var: impl Fn(f64) -> f64,
) -> HorizonReport {
    let per_t = t_stats(cfg, &samples.q);
    let theory_var: Vec<f64> = cfg.t_grid.iter().map(|&t| reference_var(t)).collect();
    let ks = ks_against_normal(cfg, &samples.q, &theory_var);
    let ks_passes = ks.iter().filter(|k| !k.rejected).count();
    let (covariance, within, total, defect) =
        covariance_section(cfg, &samples.q, |s, t| reference_var(s.min(t)));
    let var_at_1 = per_t.last().map(|s| s.variance).unwrap_or(f64::NAN);
    let ref_at_1 = reference_var(1.0);
    HorizonReport {
        horizon: samples.horizon,
        per_t,
        variance_ratio_at_1: if ref_at_1 > 0.0 {
            var_at_1 / ref_at_1
        } else if var_at_1.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        },
        finite_t_theory_ratio: None,
        ks,
        ks_passes,
        covariance,
        brownian_pairs_within_3se: within,
        brownian_pairs_total: total,
        cov_psd_defect: defect,
    }
}

/// Exact finite-horizon reference `Var L_T(1)/σ²` from the triangular
/// covariance formula; quantifies how far the Brownian limit can honestly be
/// approached at horizon `T` (slowly, ~T^{2(α+β)-1}, under long memory).
pub fn finite_t_variance_reference(
    f: &SpectralModel,
    g: &SpectralModel,
    horizon: f64,
    sigma2: f64,
) -> Option<f64> {
    if sigma2 <= 0.0 {
        return None;
    }
    let r_y = companion_transform_table(f, g, 0.05, horizon + 1.0, 1e-7).ok()?;
    let v = theoretical_increment_variance_lt(&r_y, horizon, 0.0, 1.0).ok()?;
    Some(v / sigma2)
}

fn trend_from_ratios(rows: Vec<(f64, f64)>) -> TrendReport {
    if rows.len() < 2 {
        return TrendReport {
            rows,
            kendall_tau: 0.0,
            p_decreasing: 1.0,
            monotone: false,
        };
    }
    let deviations: Vec<f64> = rows.iter().map(|&(_, r)| (r - 1.0).abs()).collect();
    let kendall = stats::kendall_trend(&deviations);
    TrendReport {
        rows,
        kendall_tau: kendall.tau,
        p_decreasing: kendall.p_decreasing,
        monotone: kendall.strictly_decreasing,
    }
}

/// Pooled second moments of increments over a ladder of separations, and the
/// log-log regression slope. Separations must be representable on the t-grid.
pub fn increment_scaling_study(
    t_grid: &[f64],
    samples: &[Vec<f64>],
    separations: &[f64],
) -> Result<IncrementStudy> {
    let find = |v: f64| -> Option<usize> {
        t_grid.iter().position(|&t| (t - v).abs() < 1e-9)
    };
    let mut seps = Vec::new();
    let mut moments = Vec::new();
    for &sep in separations {
        let mut acc = 0.0;
        let mut count = 0usize;
        for (i, &s) in t_grid.iter().enumerate() {
            if let Some(j) = find(s + sep) {
                let m = samples[i].len();
                for r in 0..m {
                    let d = samples[j][r] - samples[i][r];
                    acc += d * d;
                }
                count += m;
            }
        }
        if count > 0 {
            seps.push(sep);
            moments.push(acc / count as f64);
        }
    }
    if seps.len() < 3 {
        return Err(Error::Domain(
            "need at least 3 separations representable on the t-grid".into(),
        ));
    }
    let log_s: Vec<f64> = seps.iter().map(|s| s.ln()).collect();
    let log_m: Vec<f64> = moments.iter().map(|m| m.max(1e-300).ln()).collect();
    let (slope, intercept) = stats::linear_fit(&log_s, &log_m);
    Ok(IncrementStudy {
        separations: seps,
        mean_square: moments,
        slope,
        intercept,
    })
}

/// Fourth-moment ratios `E x⁴ / (E x²)²` per t with bootstrap CI, checked
/// against the order-2 chaos hypercontractivity cap of 81.
pub fn fourth_moment_check(
    t_grid: &[f64],
    samples: &[Vec<f64>],
    significance: f64,
    seed: u64,
) -> Result<Vec<FourthMomentStat>> {
    if samples.iter().any(|s| s.len() < 500) {
        return Err(Error::Precondition(
            "fourth-moment check needs at least 500 replications".into(),
        ));
    }
    Ok(t_grid
        .iter()
        .zip(samples)
        .enumerate()
        .map(|(idx, (&t, xs))| match stats::fourth_moment_ratio(xs) {
            None => FourthMomentStat {
                t,
                ratio: f64::NAN,
                ci: (f64::NAN, f64::NAN),
                degenerate: true,
                within_chaos_bound: true,
            },
            Some(ratio) => {
                let ci = stats::bootstrap_ci(
                    xs,
                    |s| stats::fourth_moment_ratio(s).unwrap_or(f64::NAN),
                    400,
                    significance,
                    stats::mix_seed(seed, 0xF4F4 + idx as u64),
                );
                FourthMomentStat {
                    t,
                    ratio,
                    ci,
                    degenerate: false,
                    within_chaos_bound: ratio <= 81.0,
                }
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Experiments.
// ---------------------------------------------------------------------------

const DEFAULT_SEPARATIONS: [f64; 4] = [0.1, 0.2, 0.4, 0.8];

fn clt_section(cfg: &ExperimentConfig, with_companion: bool) -> Result<(CltSection, Vec<HorizonSamples>)> {
    let conditions = check_clt_conditions(&cfg.f_model, &cfg.g_model, 1e-6)?;
    if !conditions.holds {
        return Err(Error::Precondition(
            "f·g must lie in L¹ ∩ L²; the probe detected divergence".into(),
        ));
    }
    let s2 = crate::limit::sigma2(&cfg.f_model, &cfg.g_model, 1e-9)?;

    let mut horizons = Vec::new();
    let mut all_samples = Vec::new();
    for &horizon in &cfg.horizons {
        let samples = simulate_horizon(cfg, horizon, with_companion, false)?;
        horizons.push(horizon_report(cfg, &samples, |t| s2 * t));
        all_samples.push(samples);
    }
    let trend = trend_from_ratios(
        horizons
            .iter()
            .map(|h| (h.horizon, h.variance_ratio_at_1))
            .collect(),
    );
    let largest = all_samples.last().expect("at least one horizon");
    let increment_study =
        increment_scaling_study(&cfg.t_grid, &largest.q, &DEFAULT_SEPARATIONS).ok();
    // The fourth-moment contract needs at least 500 replications.
    let fourth = if cfg.replications >= 500 {
        fourth_moment_check(&cfg.t_grid, &largest.q, cfg.significance, cfg.master_seed)?
    } else {
        Vec::new()
    };
    Ok((
        CltSection {
            sigma2: s2,
            conditions,
            horizons,
            trend,
            increment_study,
            fourth_moment: fourth,
        },
        all_samples,
    ))
}

/// Raw sample matrices retained for plot-data outputs (QQ), keyed to the
/// largest horizon.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub largest_q: Option<Vec<Vec<f64>>>,
    pub chaos_samples: Option<Vec<Vec<f64>>>,
    pub sigma2: Option<f64>,
}

/// Central-limit experiment: Brownian variance, covariance structure, and
/// marginal normality of the normalized functional across horizons.
pub fn run_clt_experiment(cfg: &ExperimentConfig) -> Result<MCReport> {
    run_clt_full(cfg).map(|(r, _)| r)
}

pub fn run_clt_full(cfg: &ExperimentConfig) -> Result<(MCReport, RunArtifacts)> {
    cfg.validate()?;
    if cfg.mode != Mode::Clt {
        return Err(Error::Config("config mode must be clt".into()));
    }
    let (section, mut samples) = clt_section(cfg, false)?;
    let artifacts = RunArtifacts {
        largest_q: samples.pop().map(|s| s.q),
        chaos_samples: None,
        sigma2: Some(section.sigma2),
    };
    let report = finish_report(cfg, Some(section), None, None, None)?;
    Ok((report, artifacts))
}

/// Companion-gap experiment: couples `X` and `Y` through one noise panel per
/// replication and tracks `Var[Q̃_T(t) - L_T(t)]` across horizons.
pub fn run_companion_gap(cfg: &ExperimentConfig) -> Result<MCReport> {
    run_companion_full(cfg).map(|(r, _)| r)
}

pub fn run_companion_full(cfg: &ExperimentConfig) -> Result<(MCReport, RunArtifacts)> {
    cfg.validate()?;
    if cfg.mode != Mode::CompanionGap {
        return Err(Error::Config("config mode must be companion-gap".into()));
    }
    let (clt, all_samples) = clt_section(cfg, true)?;

    let mut by_horizon = Vec::new();
    for samples in &all_samples {
        let l = samples.l.as_ref().expect("companion samples present");
        let rows: Vec<GapRow> = cfg
            .t_grid
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let gaps: Vec<f64> = samples.q[i]
                    .iter()
                    .zip(&l[i])
                    .map(|(q, l)| q - l)
                    .collect();
                let gap_var = stats::variance(&gaps);
                let q_var = stats::variance(&samples.q[i]);
                GapRow {
                    t,
                    gap_variance: gap_var,
                    q_variance: q_var,
                    ratio: if q_var > 0.0 { gap_var / q_var } else { 0.0 },
                }
            })
            .collect();
        by_horizon.push((samples.horizon, rows));
    }
    // Trend of the gap ratio at t = 1 across horizons.
    let rows: Vec<(f64, f64)> = by_horizon
        .iter()
        .map(|(h, rows)| (*h, 1.0 + rows.last().map(|r| r.ratio).unwrap_or(f64::NAN)))
        .collect();
    let trend = trend_from_ratios(rows);

    let largest = all_samples.last().expect("at least one horizon");
    let horizon = largest.horizon;
    let l_samples = largest.l.as_ref().expect("companion samples present");
    let l_stats = t_stats(cfg, l_samples);
    let l_mean_ok = l_stats.iter().all(|s| {
        let m = cfg.replications as f64;
        s.mean.abs() <= 3.0 * (s.variance / m).sqrt() + 1e-12
    });

    // Exact finite-horizon variance formulas for the companion functional.
    let r_y = companion_transform_table(
        &cfg.f_model,
        &cfg.g_model,
        (horizon / cfg.path_len as f64).max(horizon / 65536.0),
        horizon + 1.0,
        1e-8,
    )?;
    let check = |s: f64, t: f64, idx_s: Option<usize>, idx_t: usize| -> Result<IncrementVarianceCheck> {
        let inc: Vec<f64> = match idx_s {
            Some(i) => l_samples[idx_t]
                .iter()
                .zip(&l_samples[i])
                .map(|(a, b)| a - b)
                .collect(),
            None => l_samples[idx_t].clone(),
        };
        let emp = stats::variance(&inc);
        let th = theoretical_increment_variance_lt(&r_y, horizon, s, t)?;
        let se = stats::bootstrap_se(
            &inc,
            stats::variance,
            300,
            stats::mix_seed(cfg.master_seed, 0x11C7),
        );
        Ok(IncrementVarianceCheck {
            s,
            t,
            empirical: emp,
            theoretical: th,
            boot_se: se,
            within_3se: (emp - th).abs() <= 3.0 * se,
        })
    };
    let n_t = cfg.t_grid.len();
    let mid_idx = cfg
        .t_grid
        .iter()
        .position(|&t| (t - 0.5).abs() < 1e-9)
        .unwrap_or(n_t / 2);
    let l_increment_check = check(cfg.t_grid[mid_idx], 1.0, Some(mid_idx), n_t - 1)?;
    let l_variance_check = check(0.0, 1.0, None, n_t - 1)?;

    let gap = GapSection {
        by_horizon,
        trend,
        l_stats,
        l_mean_within_3se: l_mean_ok,
        l_increment_check,
        l_variance_check,
    };
    let sigma2 = clt.sigma2;
    let mut all_samples = all_samples;
    let artifacts = RunArtifacts {
        largest_q: all_samples.pop().map(|s| s.q),
        chaos_samples: None,
        sigma2: Some(sigma2),
    };
    let report = finish_report(cfg, Some(clt), Some(gap), None, None)?;
    Ok((report, artifacts))
}

/// Non-central experiment: variance convergence of `Z_T` to `2||H_1||²`,
/// two-sample comparison against the simulated limit process, and the
/// non-Gaussianity witnesses.
pub fn run_nclt_experiment(cfg: &ExperimentConfig) -> Result<MCReport> {
    run_nclt_full(cfg).map(|(r, _)| r)
}

pub fn run_nclt_full(cfg: &ExperimentConfig) -> Result<(MCReport, RunArtifacts)> {
    cfg.validate()?;
    if cfg.mode != Mode::Nclt {
        return Err(Error::Config("config mode must be nclt".into()));
    }
    let alpha = cfg.f_model.exponent;
    let beta = cfg.g_model.exponent;
    let kernel = LimitKernel::new(alpha, beta, 1.0);
    let norm = kernel_l2_norm(&kernel, cfg.kernel_trunc, cfg.kernel_tol)?;
    let reference = 2.0 * norm.value;

    let u_grid: Vec<f64> = (0..=60).map(|i| 10f64.powf(-3.0 + i as f64 * 0.1)).collect();
    let potter_f = check_potter_bound(&cfg.f_model.sv, 0.1, &[1e3, 1e6], &u_grid)?;
    let potter_g = check_potter_bound(&cfg.g_model.sv, 0.1, &[1e3, 1e6], &u_grid)?;

    let mut horizons = Vec::new();
    let mut all_samples = Vec::new();
    for &horizon in &cfg.horizons {
        let samples = simulate_horizon(cfg, horizon, false, true)?;
        // The Brownian covariance structure does not apply here; the
        // reference variance scales self-similarly as t^{2(α+β)}.
        horizons.push(horizon_report(cfg, &samples, |t| {
            reference * t.powf(2.0 * (alpha + beta))
        }));
        all_samples.push(samples);
    }
    let trend = trend_from_ratios(
        horizons
            .iter()
            .map(|h| (h.horizon, h.variance_ratio_at_1))
            .collect(),
    );

    // Chaos route: simulate the limit process on its own grid, with an
    // independent seed stream.
    let chaos_grid = FrequencyGrid::graded(
        cfg.chaos.x_min,
        cfg.chaos.x_split,
        cfg.chaos.x_max,
        cfg.chaos.geo_ratio,
        cfg.chaos.uniform_width,
    )?;
    let sim = ChaosSimulator::new(
        alpha,
        beta,
        &chaos_grid,
        &cfg.t_grid,
        &KernelSettings::default(),
    )?;
    let chaos_seed = stats::mix_seed(cfg.master_seed, 0x5EED_CA05);
    let chaos_reps: Vec<(Vec<f64>, f64)> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let s = sim.sample(chaos_seed, rep);
            (s.values, s.imag_residue)
        })
        .collect();
    let max_residue = chaos_reps
        .iter()
        .fold(0.0f64, |m, (_, r)| m.max(*r));
    let z_samples = transpose(
        chaos_reps.into_iter().map(|(v, _)| v).collect(),
        cfg.t_grid.len(),
    );
    let chaos = ChaosSection {
        per_t: t_stats(cfg, &z_samples),
        discrete_variance_at_1: sim.discrete_variance(cfg.t_grid.len() - 1),
        max_imag_residue: max_residue,
    };

    // Two-sample KS between the path route at the largest horizon and the
    // chaos route, per t.
    let largest = all_samples.last().expect("at least one horizon");
    let two_sample_ks: Vec<KsStat> = cfg
        .t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if t == 0.0 {
                KsStat {
                    t,
                    statistic: 0.0,
                    p_value: 1.0,
                    rejected: false,
                    degenerate: true,
                }
            } else {
                let out = stats::ks_two_sample(&largest.q[i], &z_samples[i]);
                KsStat {
                    t,
                    statistic: out.statistic,
                    p_value: out.p_value,
                    rejected: out.p_value < cfg.significance,
                    degenerate: false,
                }
            }
        })
        .collect();
    let two_sample_ks_passes = two_sample_ks.iter().filter(|k| !k.rejected).count();

    // Non-Gaussianity witnesses: excess kurtosis significantly positive.
    let n_t = cfg.t_grid.len();
    let kurt = |xs: &[f64], salt: u64| -> FourthMomentStat {
        let ratio = stats::excess_kurtosis(xs);
        let ci = stats::bootstrap_ci(
            xs,
            stats::excess_kurtosis,
            400,
            cfg.significance,
            stats::mix_seed(cfg.master_seed, salt),
        );
        FourthMomentStat {
            t: 1.0,
            ratio,
            ci,
            degenerate: false,
            within_chaos_bound: ratio + 3.0 <= 81.0,
        }
    };
    let kurtosis_z_t = kurt(&largest.q[n_t - 1], 0x4B55);
    let kurtosis_z = kurt(&z_samples[n_t - 1], 0x4B56);

    let increment_study =
        increment_scaling_study(&cfg.t_grid, &largest.q, &DEFAULT_SEPARATIONS).ok();

    let section = NcltSection {
        norm2_at_1: norm,
        potter_f,
        potter_g,
        horizons,
        trend,
        chaos,
        two_sample_ks,
        two_sample_ks_passes,
        kurtosis_z_t,
        kurtosis_z,
        increment_study,
    };
    let mut all_samples = all_samples;
    let artifacts = RunArtifacts {
        largest_q: all_samples.pop().map(|s| s.q),
        chaos_samples: Some(z_samples),
        sigma2: None,
    };
    let report = finish_report(cfg, None, None, Some(section), None)?;
    Ok((report, artifacts))
}

/// Kernel-only mode: L² norms of `H_t` along the t-grid, no paths.
pub fn run_kernel_only(cfg: &ExperimentConfig) -> Result<MCReport> {
    cfg.validate()?;
    if cfg.mode != Mode::KernelOnly {
        return Err(Error::Config("config mode must be kernel-only".into()));
    }
    let alpha = cfg.f_model.exponent;
    let beta = cfg.g_model.exponent;
    let mut norms = Vec::new();
    for &t in &cfg.t_grid {
        let kernel = LimitKernel {
            alpha,
            beta,
            t,
            finite_t: None,
            settings: KernelSettings::default(),
        };
        norms.push((t, kernel_l2_norm(&kernel, cfg.kernel_trunc, cfg.kernel_tol)?));
    }
    finish_report(cfg, None, None, None, Some(KernelOnlySection { norms }))
}

/// Dispatch on the configured mode.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MCReport> {
    run_experiment_full(cfg).map(|(r, _)| r)
}

/// Dispatch keeping the raw plot-data samples.
pub fn run_experiment_full(cfg: &ExperimentConfig) -> Result<(MCReport, RunArtifacts)> {
    match cfg.mode {
        Mode::Clt => run_clt_full(cfg),
        Mode::Nclt => run_nclt_full(cfg),
        Mode::CompanionGap => run_companion_full(cfg),
        Mode::KernelOnly => run_kernel_only(cfg).map(|r| (r, RunArtifacts::default())),
    }
}

fn finish_report(
    cfg: &ExperimentConfig,
    clt: Option<CltSection>,
    gap: Option<GapSection>,
    nclt: Option<NcltSection>,
    kernel_only: Option<KernelOnlySection>,
) -> Result<MCReport> {
    let mut report = MCReport {
        mode: cfg.mode.to_string(),
        regime: cfg.regime(),
        master_seed: cfg.master_seed,
        replications: cfg.replications,
        horizons: cfg.horizons.clone(),
        t_grid: cfg.t_grid.clone(),
        clt,
        gap,
        nclt,
        kernel_only,
        assertions: Vec::new(),
        assertions_passed: true,
    };
    report.assertions = evaluate_assertions(cfg, &report);
    report.assertions_passed = report.assertions.iter().all(|a| a.pass);
    Ok(report)
}

fn evaluate_assertions(cfg: &ExperimentConfig, report: &MCReport) -> Vec<AssertionResult> {
    let mut out = Vec::new();
    let spec = &cfg.assertions;
    let (ratio, trend, ks_passes) = match (&report.clt, &report.nclt) {
        (Some(c), _) => (
            c.horizons.last().map(|h| h.variance_ratio_at_1),
            Some(&c.trend),
            c.horizons.last().map(|h| h.ks_passes),
        ),
        (None, Some(n)) => (
            n.horizons.last().map(|h| h.variance_ratio_at_1),
            Some(&n.trend),
            Some(n.two_sample_ks_passes),
        ),
        _ => (None, None, None),
    };
    if let (Some((lo, hi)), Some(r)) = (spec.variance_band, ratio) {
        out.push(AssertionResult {
            name: "variance_band".into(),
            pass: r >= lo && r <= hi,
            detail: format!("ratio {r:.4} in [{lo}, {hi}]"),
        });
    }
    if spec.monotone_trend {
        if let Some(t) = trend {
            out.push(AssertionResult {
                name: "monotone_trend".into(),
                pass: t.monotone,
                detail: format!("tau {:.3}, p_dec {:.3}", t.kendall_tau, t.p_decreasing),
            });
        }
    }
    if let (Some(min), Some(p)) = (spec.min_ks_passes, ks_passes) {
        out.push(AssertionResult {
            name: "min_ks_passes".into(),
            pass: p >= min,
            detail: format!("{p} of {} t-points pass", cfg.t_grid.len()),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{SlowlyVaryingSpec, SvKind, Tail};

    fn small_clt_config(mode: Mode) -> ExperimentConfig {
        let f = SpectralModel::power_law(0.2);
        let g = SpectralModel::power_law(0.2);
        let mut cfg = ExperimentConfig::new(f, g, mode);
        cfg.horizons = vec![8.0, 16.0];
        cfg.path_len = 1 << 10;
        cfg.replications = 160;
        cfg.t_grid = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        cfg.master_seed = 99;
        cfg
    }

    #[test]
    fn config_validation_catches_regime_mismatch() {
        let f = SpectralModel::power_law(0.4);
        let g = SpectralModel::power_law(0.3);
        let cfg = ExperimentConfig::new(f, g, Mode::Clt);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let f = SpectralModel::power_law(0.2);
        let g = SpectralModel::power_law(0.2);
        let cfg = ExperimentConfig::new(f, g, Mode::Nclt);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let f = SpectralModel::power_law(1.2);
        let g = SpectralModel::power_law(0.1);
        let cfg = ExperimentConfig::new(f, g, Mode::KernelOnly);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_validation_catches_bad_grids() {
        let mut cfg = small_clt_config(Mode::Clt);
        cfg.t_grid = vec![0.0, 0.5]; // missing 1
        assert!(cfg.validate().is_err());
        let mut cfg = small_clt_config(Mode::Clt);
        cfg.replications = 50;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn clt_experiment_small_run_sane() {
        let mut cfg = small_clt_config(Mode::Clt);
        cfg.replications = 520; // enough for the fourth-moment contract
        let report = run_clt_experiment(&cfg).unwrap();
        let clt = report.clt.as_ref().unwrap();
        assert!(clt.sigma2 > 0.0);
        assert_eq!(clt.horizons.len(), 2);
        for h in &clt.horizons {
            // Q̃(0) ≡ 0 and variances grow with t.
            assert_eq!(h.per_t[0].variance, 0.0);
            assert!(h.per_t.last().unwrap().variance > 0.0);
            assert!(h.cov_psd_defect < 1e-8);
        }
        // Fourth-moment ratios near the Gaussian value 3 at these scales.
        let f4 = clt.fourth_moment.last().unwrap();
        assert!(!f4.degenerate && f4.within_chaos_bound);
        assert!(f4.ratio > 1.5 && f4.ratio < 10.0, "ratio {}", f4.ratio);
    }

    #[test]
    fn zero_generator_yields_all_zero_statistics() {
        let zero_g = SpectralModel {
            exponent: 0.0,
            sv: SlowlyVaryingSpec {
                kind: SvKind::Tabulated {
                    xs: vec![0.0, 1.0],
                    values: vec![0.0, 0.0],
                },
                cutoff: 1.0,
            },
            tail: Tail::Zero,
        };
        let mut cfg = small_clt_config(Mode::Clt);
        cfg.g_model = zero_g;
        cfg.replications = 120;
        let report = run_clt_experiment(&cfg).unwrap();
        let clt = report.clt.unwrap();
        assert_eq!(clt.sigma2, 0.0);
        for h in &clt.horizons {
            for s in &h.per_t {
                assert_eq!(s.mean, 0.0);
                assert_eq!(s.variance, 0.0);
            }
            // Degenerate targets count as non-rejections.
            assert_eq!(h.ks_passes, cfg.t_grid.len());
        }
    }

    #[test]
    fn determinism_across_worker_counts() {
        let cfg = {
            let mut c = small_clt_config(Mode::CompanionGap);
            c.mode = Mode::CompanionGap;
            c.replications = 120;
            c.horizons = vec![8.0];
            c
        };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_companion_gap(&cfg).unwrap());
        let two = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap()
            .install(|| run_companion_gap(&cfg).unwrap());
        let a = serde_json::to_string(&one).unwrap();
        let b = serde_json::to_string(&two).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn companion_gap_small_run() {
        let mut cfg = small_clt_config(Mode::CompanionGap);
        cfg.replications = 200;
        let report = run_companion_gap(&cfg).unwrap();
        let gap = report.gap.as_ref().unwrap();
        assert_eq!(gap.by_horizon.len(), 2);
        // The companion functional is centered.
        assert!(gap.l_mean_within_3se);
        // Gap variance is computed for each t.
        for (_, rows) in &gap.by_horizon {
            assert_eq!(rows.len(), cfg.t_grid.len());
            assert!(rows.iter().all(|r| r.gap_variance.is_finite()));
        }
    }

    #[test]
    fn increment_study_requires_separations() {
        let samples = vec![vec![0.0; 10]; 3];
        let err = increment_scaling_study(&[0.0, 0.3, 1.0], &samples, &[0.1, 0.2, 0.4]);
        assert!(err.is_err());
    }

    #[test]
    fn fourth_moment_check_contract() {
        let gauss: Vec<f64> = (0..1000)
            .map(|i| {
                let u = (i as f64 + 0.5) / 1000.0;
                // Inverse-CDF Gaussian-ish via probit approximation.
                crate::stats::standard_normal_cdf(0.0).mul_add(0.0, {
                    let t = (2.0 * std::f64::consts::PI * u).sin();
                    let r = (-2.0 * (1.0 - u * 0.9999).ln()).sqrt();
                    r * t
                })
            })
            .collect();
        let out = fourth_moment_check(&[1.0], &[gauss], 0.05, 7).unwrap();
        assert!(!out[0].degenerate);
        assert!(out[0].ratio > 1.5 && out[0].ratio < 6.0);
        // Degenerate all-zero samples are reported as such.
        let zeros = vec![vec![0.0; 600]];
        let out = fourth_moment_check(&[1.0], &zeros, 0.05, 7).unwrap();
        assert!(out[0].degenerate);
        // Too few replications violate the precondition.
        assert!(fourth_moment_check(&[1.0], &[vec![1.0; 100]], 0.05, 7).is_err());
    }
}
