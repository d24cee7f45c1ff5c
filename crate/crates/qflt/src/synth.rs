//! Sample-path synthesis from the spectral representation
//! `X(t) = ∫ e^{itx} √f(x) W(dx)` with a Hermitian complex Gaussian measure.
//!
//! The spectral measure is discretized on a symmetric frequency grid that is
//! geometrically refined toward the origin (to resolve long-memory mass at
//! frequencies ~1/T) and uniform beyond, with the uniform section aligned to
//! an FFT lattice so a whole path costs one FFT plus a handful of direct
//! low-frequency terms. Cell coefficients carry the exact spectral mass of
//! each cell, so the synthesized variance matches `r(0)` by construction.
//!
//! The companion process `Y(t)` with density `2π f g` is built from the same
//! noise panel, reproducing the joint law used in the CLT reduction.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::quadrature::CosRule;
use crate::spectral::{companion_mass_between, CovarianceTable, SpectralModel};
use crate::stats::mix_seed;

/// Uniform time grid `t_k = k·step`, `k = 0..=steps`, horizon `T = steps·step`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TimeGrid {
    pub step: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(step: f64, steps: usize) -> Self {
        TimeGrid { step, steps }
    }

    /// Grid for horizon `T` with `steps` integration steps.
    pub fn for_horizon(horizon: f64, steps: usize) -> Self {
        TimeGrid {
            step: horizon / steps as f64,
            steps,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.steps as f64
    }

    /// Number of samples (both endpoints included).
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One positive-frequency cell of the spectral discretization.
#[derive(Debug, Clone, Copy)]
pub struct FreqCell {
    pub lo: f64,
    pub hi: f64,
    /// Midpoint sampling node; never exactly zero.
    pub node: f64,
    /// Index into the FFT spectrum when the cell is lattice-aligned.
    pub fft_bin: Option<usize>,
}

impl FreqCell {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Symmetric frequency grid; only the positive half is stored, the negative
/// half being the mirror image with conjugate noise.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    pub cells: Vec<FreqCell>,
    /// FFT size when the uniform section is lattice-aligned.
    pub fft_size: Option<usize>,
}

/// Tunables of the synthesis grid.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SynthParams {
    /// FFT length over path length; higher resolves long lags better.
    pub oversample: usize,
    /// Smallest geometric cell as a fraction of 1/T.
    pub min_cell_factor: f64,
    /// Growth ratio of the geometric refinement toward 0.
    pub geo_ratio: f64,
    /// Number of FFT lattice cells replaced by the geometric section.
    pub inner_bins: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            oversample: 4,
            min_cell_factor: 1e-2,
            geo_ratio: 1.6,
            inner_bins: 8,
        }
    }
}

impl FrequencyGrid {
    /// Grid for synthesizing paths on `time`, covering `(0, x_max]`.
    ///
    /// Layout: FFT-aligned uniform cells of width `Δ = 2π/(nfft·h)` from
    /// `inner_bins·Δ` up to `x_max`, and a geometric cascade from
    /// `inner_bins·Δ` down to ~`min_cell_factor/T`, terminated by a final
    /// cell touching 0 (its midpoint node keeps the singularity unsampled).
    pub fn for_synthesis(x_max: f64, time: &TimeGrid, params: &SynthParams) -> Result<Self> {
        if !(x_max > 0.0) {
            return Err(Error::Grid("x_max must be positive".into()));
        }
        let nfft = (params.oversample.max(1) * time.steps)
            .next_power_of_two()
            .max(16);
        let delta = 2.0 * std::f64::consts::PI / (nfft as f64 * time.step);
        let split = params.inner_bins.max(1) as f64 * delta;
        let min_cell = params.min_cell_factor / time.horizon().max(1.0);

        // Geometric edges descending from the split toward 0.
        let mut desc = vec![split];
        let mut e = split;
        while e > min_cell && desc.len() < 400 {
            e /= params.geo_ratio;
            desc.push(e);
        }
        desc.push(0.0);
        desc.reverse();

        let mut cells = Vec::new();
        for w in desc.windows(2) {
            if w[1] > w[0] {
                cells.push(FreqCell {
                    lo: w[0],
                    hi: w[1],
                    node: 0.5 * (w[0] + w[1]),
                    fft_bin: None,
                });
            }
        }
        let mut m = params.inner_bins.max(1);
        while (m as f64) * delta < x_max {
            cells.push(FreqCell {
                lo: m as f64 * delta,
                hi: (m + 1) as f64 * delta,
                node: (m as f64 + 0.5) * delta,
                fft_bin: Some(m),
            });
            m += 1;
            if m >= nfft / 2 {
                return Err(Error::Grid(format!(
                    "x_max {x_max} needs more than nfft/2 = {} uniform cells",
                    nfft / 2
                )));
            }
        }
        let grid = FrequencyGrid {
            cells,
            fft_size: Some(nfft),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Geometric refinement near the origin up to `x_split`, then uniform
    /// cells of width at most `uniform_width` out to `x_max`. The chaos
    /// simulation uses this: the kernel oscillates on an O(1/t) scale away
    /// from the origin, which plain geometric growth cannot resolve.
    pub fn graded(
        x_min: f64,
        x_split: f64,
        x_max: f64,
        ratio: f64,
        uniform_width: f64,
    ) -> Result<Self> {
        if !(x_min > 0.0 && x_split > x_min && x_max > x_split) {
            return Err(Error::Grid("bad graded grid parameters".into()));
        }
        let mut cells = vec![FreqCell {
            lo: 0.0,
            hi: x_min,
            node: 0.5 * x_min,
            fft_bin: None,
        }];
        for w in crate::quadrature::geometric_edges(x_min, x_split, ratio).windows(2) {
            cells.push(FreqCell {
                lo: w[0],
                hi: w[1],
                node: 0.5 * (w[0] + w[1]),
                fft_bin: None,
            });
        }
        let count = ((x_max - x_split) / uniform_width).ceil().max(1.0) as usize;
        for w in crate::quadrature::uniform_edges(x_split, x_max, count).windows(2) {
            cells.push(FreqCell {
                lo: w[0],
                hi: w[1],
                node: 0.5 * (w[0] + w[1]),
                fft_bin: None,
            });
        }
        let grid = FrequencyGrid {
            cells,
            fft_size: None,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Plain geometric two-sided grid (used by the chaos simulation).
    pub fn geometric(x_min: f64, x_max: f64, ratio: f64) -> Result<Self> {
        if !(x_min > 0.0 && x_max > x_min && ratio > 1.0) {
            return Err(Error::Grid("bad geometric grid parameters".into()));
        }
        let edges = crate::quadrature::geometric_edges(x_min, x_max, ratio);
        let mut cells: Vec<FreqCell> = edges
            .windows(2)
            .map(|w| FreqCell {
                lo: w[0],
                hi: w[1],
                node: 0.5 * (w[0] + w[1]),
                fft_bin: None,
            })
            .collect();
        // Innermost cell touching zero, midpoint-sampled.
        cells.insert(
            0,
            FreqCell {
                lo: 0.0,
                hi: x_min,
                node: 0.5 * x_min,
                fft_bin: None,
            },
        );
        let grid = FrequencyGrid {
            cells,
            fft_size: None,
        };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        let mut prev_hi = 0.0;
        for c in &self.cells {
            if !(c.node > 0.0) || !c.node.is_finite() {
                return Err(Error::Grid(format!(
                    "frequency node {} touches the singularity",
                    c.node
                )));
            }
            if c.hi <= c.lo || (c.lo - prev_hi).abs() > 1e-9 * c.hi.max(1.0) {
                return Err(Error::Grid("cells must tile (0, x_max] contiguously".into()));
            }
            prev_hi = c.hi;
        }
        if self.cells.is_empty() {
            return Err(Error::Grid("empty frequency grid".into()));
        }
        Ok(())
    }

    pub fn x_max(&self) -> f64 {
        self.cells.last().map(|c| c.hi).unwrap_or(0.0)
    }

    /// Two-sided node list (±node per cell), for contract checks.
    pub fn nodes_two_sided(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.cells.iter().map(|c| -c.node).rev().collect();
        v.extend(self.cells.iter().map(|c| c.node));
        v
    }
}

/// Complex standard Gaussian draws, one per positive-frequency cell; the
/// negative cells carry the conjugates, so synthesized paths are real.
#[derive(Debug, Clone)]
pub struct NoisePanel {
    pub zetas: Vec<Complex64>,
    pub master_seed: u64,
    pub replication: u64,
}

/// Deterministic function of `(master_seed, replication)`; each replication
/// gets an independent ChaCha stream.
pub fn draw_noise(grid: &FrequencyGrid, master_seed: u64, replication: u64) -> NoisePanel {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(master_seed, replication));
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let zetas = (0..grid.cells.len())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    NoisePanel {
        zetas,
        master_seed,
        replication,
    }
}

/// A real sample path on a uniform time grid with provenance.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub time: TimeGrid,
    pub values: Vec<f64>,
    pub master_seed: u64,
    pub replication: u64,
}

impl SamplePath {
    pub fn horizon(&self) -> f64 {
        self.time.horizon()
    }
}

/// Precomputed sampler: spectral cell masses plus the FFT plan, reusable
/// across replications (it is `Sync`; synthesis allocates only local buffers).
pub struct SpectralSampler {
    grid: FrequencyGrid,
    time: TimeGrid,
    sqrt_masses: Vec<f64>,
    masses: Vec<f64>,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl SpectralSampler {
    /// Sampler for the process with density `model`.
    pub fn for_process(model: &SpectralModel, grid: &FrequencyGrid, time: &TimeGrid) -> Result<Self> {
        model.validate()?;
        let masses: Vec<f64> = grid
            .cells
            .iter()
            .map(|c| model.mass_between(c.lo, c.hi))
            .collect::<Result<_>>()?;
        Self::from_masses(grid, time, masses)
    }

    /// Sampler for the companion process with density `2π f g`, meant to be
    /// driven by the same noise panel as the `f` process.
    pub fn for_companion(
        f: &SpectralModel,
        g: &SpectralModel,
        grid: &FrequencyGrid,
        time: &TimeGrid,
    ) -> Result<Self> {
        f.validate()?;
        g.validate()?;
        let masses: Vec<f64> = grid
            .cells
            .iter()
            .map(|c| companion_mass_between(f, g, c.lo, c.hi))
            .collect::<Result<_>>()?;
        Self::from_masses(grid, time, masses)
    }

    fn from_masses(grid: &FrequencyGrid, time: &TimeGrid, masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|m| !m.is_finite() || *m < -1e-12) {
            return Err(Error::Grid("non-finite or negative cell mass".into()));
        }
        let fft = grid.fft_size.map(|n| {
            let mut planner = FftPlanner::<f64>::new();
            planner.plan_fft_inverse(n)
        });
        Ok(SpectralSampler {
            grid: grid.clone(),
            time: *time,
            sqrt_masses: masses.iter().map(|m| m.max(0.0).sqrt()).collect(),
            masses,
            fft,
        })
    }

    /// Total two-sided spectral mass on the grid: the variance `r_grid(0)` of
    /// the synthesized process.
    pub fn grid_variance(&self) -> f64 {
        2.0 * self.masses.iter().sum::<f64>()
    }

    /// Covariance function of the synthesized (grid) process on a uniform
    /// lag ladder: `r_grid(s) = 2 Σ_j m_j cos(x_j s)`. This is the exact
    /// covariance of the simulated process, used for exact centering.
    pub fn covariance_table(&self, lag_step: f64, count: usize) -> CovarianceTable {
        let rule = CosRule {
            nodes: self.grid.cells.iter().map(|c| c.node).collect(),
            coeffs: self.masses.clone(),
        };
        let mut values = rule.eval_ladder(lag_step, count);
        for v in values.iter_mut() {
            *v *= 2.0;
        }
        CovarianceTable {
            step: lag_step,
            values,
            source: "grid-covariance".into(),
        }
    }

    /// Synthesize one real path from a noise panel:
    /// `X(t_k) = 2 Re Σ_{j>0} √m_j ζ_j e^{i x_j t_k}`.
    pub fn synthesize(&self, noise: &NoisePanel) -> Result<SamplePath> {
        if noise.zetas.len() != self.grid.cells.len() {
            return Err(Error::Grid(format!(
                "noise panel has {} draws for {} cells",
                noise.zetas.len(),
                self.grid.cells.len()
            )));
        }
        let n = self.time.len();
        let h = self.time.step;
        let mut acc = vec![Complex64::new(0.0, 0.0); n];

        // FFT-aligned section: one sparse spectrum, one inverse FFT.
        if let (Some(nfft), Some(fft)) = (self.grid.fft_size, self.fft.as_ref()) {
            let mut spec = vec![Complex64::new(0.0, 0.0); nfft];
            let mut any = false;
            for (cell, (&sm, &zeta)) in self
                .grid
                .cells
                .iter()
                .zip(self.sqrt_masses.iter().zip(&noise.zetas))
            {
                if let Some(bin) = cell.fft_bin {
                    spec[bin] += sm * zeta;
                    any = true;
                }
            }
            if any {
                fft.process(&mut spec);
                // Node offset Δ/2 appears as the twiddle e^{iπk/nfft}.
                let phase = std::f64::consts::PI / nfft as f64;
                let rot = Complex64::from_polar(1.0, phase);
                let mut tw = Complex64::new(1.0, 0.0);
                for (k, slot) in acc.iter_mut().enumerate() {
                    if k % 4096 == 0 {
                        tw = Complex64::from_polar(1.0, phase * k as f64);
                    }
                    *slot += spec[k] * tw;
                    tw *= rot;
                }
            }
        }

        // Direct low-frequency section: per-cell rotation recurrence.
        for (cell, (&sm, &zeta)) in self
            .grid
            .cells
            .iter()
            .zip(self.sqrt_masses.iter().zip(&noise.zetas))
        {
            if cell.fft_bin.is_some() || sm == 0.0 {
                continue;
            }
            let coef = sm * zeta;
            let rot = Complex64::from_polar(1.0, cell.node * h);
            let mut cur = Complex64::new(1.0, 0.0);
            for (k, slot) in acc.iter_mut().enumerate() {
                if k % 4096 == 0 {
                    cur = Complex64::from_polar(1.0, cell.node * h * k as f64);
                }
                *slot += coef * cur;
                cur *= rot;
            }
        }

        Ok(SamplePath {
            time: self.time,
            values: acc.iter().map(|c| 2.0 * c.re).collect(),
            master_seed: noise.master_seed,
            replication: noise.replication,
        })
    }
}

/// Contract function: synthesize the `f`-process path for one noise panel.
pub fn synthesize_path(
    model: &SpectralModel,
    noise: &NoisePanel,
    grid: &FrequencyGrid,
    time: &TimeGrid,
) -> Result<SamplePath> {
    SpectralSampler::for_process(model, grid, time)?.synthesize(noise)
}

/// Contract function: synthesize the companion path `Y` (density `2π f g`)
/// from the same panel that drove the `f`-process, coupling `(X, Y)` exactly.
pub fn synthesize_companion_path(
    f: &SpectralModel,
    g: &SpectralModel,
    noise: &NoisePanel,
    grid: &FrequencyGrid,
    time: &TimeGrid,
) -> Result<SamplePath> {
    SpectralSampler::for_companion(f, g, grid, time)?.synthesize(noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{SlowlyVaryingSpec, SvKind, Tail};
    use crate::stats;

    fn box_model() -> SpectralModel {
        SpectralModel::power_law(0.0)
    }

    fn zero_model() -> SpectralModel {
        SpectralModel {
            exponent: 0.0,
            sv: SlowlyVaryingSpec {
                kind: SvKind::Tabulated {
                    xs: vec![0.0, 1.0],
                    values: vec![0.0, 0.0],
                },
                cutoff: 1.0,
            },
            tail: Tail::Zero,
        }
    }

    fn small_grid(time: &TimeGrid) -> FrequencyGrid {
        FrequencyGrid::for_synthesis(1.0, time, &SynthParams::default()).unwrap()
    }

    #[test]
    fn noise_is_deterministic_and_hermitian_ready() {
        let time = TimeGrid::for_horizon(4.0, 64);
        let grid = small_grid(&time);
        let a = draw_noise(&grid, 7, 3);
        let b = draw_noise(&grid, 7, 3);
        assert_eq!(a.zetas, b.zetas);
        let c = draw_noise(&grid, 7, 4);
        assert!(a.zetas.iter().zip(&c.zetas).all(|(x, y)| x != y));
        // Unit variance per draw, within Monte Carlo error across the panel.
        let mean_sq: f64 =
            a.zetas.iter().map(|z| z.norm_sqr()).sum::<f64>() / a.zetas.len() as f64;
        assert!(mean_sq > 0.3 && mean_sq < 3.0);
    }

    #[test]
    fn zero_density_gives_zero_path() {
        let time = TimeGrid::for_horizon(4.0, 64);
        let grid = small_grid(&time);
        let noise = draw_noise(&grid, 1, 0);
        let path = synthesize_path(&zero_model(), &noise, &grid, &time).unwrap();
        assert!(path.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesis_matches_two_sided_oracle() {
        // Oracle: explicit two-sided Hermitian sum, checking both realness
        // and agreement with the production (folded) synthesis.
        let time = TimeGrid::for_horizon(2.0, 32);
        let grid = small_grid(&time);
        let model = box_model();
        let noise = draw_noise(&grid, 11, 5);
        let path = synthesize_path(&model, &noise, &grid, &time).unwrap();

        let sampler = SpectralSampler::for_process(&model, &grid, &time).unwrap();
        let masses: Vec<f64> = grid
            .cells
            .iter()
            .map(|c| model.mass_between(c.lo, c.hi).unwrap())
            .collect();
        let mut max_imag: f64 = 0.0;
        let mut sd = 0.0f64;
        for (k, &v) in path.values.iter().enumerate() {
            let t = time.step * k as f64;
            let mut z = Complex64::new(0.0, 0.0);
            for (c, (&m, &zeta)) in grid.cells.iter().zip(masses.iter().zip(&noise.zetas)) {
                let e = Complex64::from_polar(1.0, c.node * t);
                z += m.sqrt() * zeta * e;
                z += m.sqrt() * zeta.conj() * e.conj();
            }
            max_imag = max_imag.max(z.im.abs());
            sd += v * v;
            assert!(
                (z.re - v).abs() < 1e-9 * (1.0 + v.abs()),
                "t={t}: oracle {} vs path {v}",
                z.re
            );
        }
        let sd = (sd / path.values.len() as f64).sqrt();
        assert!(max_imag < 1e-10 * sd.max(1e-6));
        assert!((sampler.grid_variance() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn empirical_variance_and_covariance_match_transform() {
        // f = 1 on [-1,1]: r(s) = 2 sin(s)/s; checks r(0), r(1), r(2).
        let time = TimeGrid::for_horizon(8.0, 64);
        let grid = small_grid(&time);
        let model = box_model();
        let sampler = SpectralSampler::for_process(&model, &grid, &time).unwrap();
        let m = 3000;
        let lag1 = 8; // 8 * h = 1.0
        let lag2 = 16;
        let (mut v0, mut v1, mut v2) = (0.0, 0.0, 0.0);
        for rep in 0..m {
            let path = sampler.synthesize(&draw_noise(&grid, 99, rep)).unwrap();
            v0 += path.values[0] * path.values[0];
            v1 += path.values[0] * path.values[lag1];
            v2 += path.values[0] * path.values[lag2];
        }
        let n = m as f64;
        let (v0, v1, v2) = (v0 / n, v1 / n, v2 / n);
        // 3 standard errors of each estimator, roughly r(0)√(2/m).
        let se = 2.0 * (2.0 / n).sqrt();
        assert!((v0 - 2.0).abs() < 3.0 * se, "r(0): {v0}");
        assert!((v1 - 2.0 * 1f64.sin()).abs() < 3.0 * se, "r(1): {v1}");
        assert!((v2 - 2.0f64.sin()).abs() < 3.0 * se, "r(2): {v2}");
    }

    #[test]
    fn marginal_is_gaussian() {
        let time = TimeGrid::for_horizon(2.0, 16);
        let grid = small_grid(&time);
        let sampler = SpectralSampler::for_process(&box_model(), &grid, &time).unwrap();
        let var = sampler.grid_variance();
        let samples: Vec<f64> = (0..2000)
            .map(|rep| {
                sampler
                    .synthesize(&draw_noise(&grid, 4242, rep))
                    .unwrap()
                    .values[0]
            })
            .collect();
        let ks = stats::ks_one_sample(&samples, |x| {
            stats::standard_normal_cdf(x / var.sqrt())
        });
        assert!(ks.p_value > 0.01, "normality KS p = {}", ks.p_value);
        assert!(stats::mean(&samples).abs() < 3.0 * (var / 2000.0).sqrt());
    }

    #[test]
    fn companion_zero_generator_gives_zero() {
        let time = TimeGrid::for_horizon(4.0, 64);
        let grid = small_grid(&time);
        let noise = draw_noise(&grid, 5, 0);
        let y =
            synthesize_companion_path(&box_model(), &zero_model(), &noise, &grid, &time).unwrap();
        assert!(y.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn companion_variance_and_coupling() {
        let time = TimeGrid::for_horizon(4.0, 32);
        let grid = small_grid(&time);
        let f = box_model();
        let g = box_model();
        let xs = SpectralSampler::for_process(&f, &grid, &time).unwrap();
        let ys = SpectralSampler::for_companion(&f, &g, &grid, &time).unwrap();
        let m = 3000;
        let mut var_y = 0.0;
        let mut cov_xy = 0.0;
        for rep in 0..m {
            let noise = draw_noise(&grid, 17, rep);
            let x = xs.synthesize(&noise).unwrap();
            let y = ys.synthesize(&noise).unwrap();
            var_y += y.values[0] * y.values[0];
            cov_xy += x.values[0] * y.values[0];
        }
        let n = m as f64;
        let four_pi = 4.0 * std::f64::consts::PI;
        let se_y = four_pi * (2.0 / n).sqrt();
        assert!((var_y / n - four_pi).abs() < 3.0 * se_y, "VarY {}", var_y / n);
        // Cov(X(0), Y(0)) = ∫ √(2π) f √g dx = 2 √(2π) for the box pair.
        let expect = 2.0 * (2.0 * std::f64::consts::PI).sqrt();
        let se_xy = expect * (2.0 / n).sqrt();
        assert!(
            (cov_xy / n - expect).abs() < 3.0 * se_xy,
            "CovXY {} vs {expect}",
            cov_xy / n
        );
    }

    #[test]
    fn companion_resynthesis_is_bitwise_identical() {
        let time = TimeGrid::for_horizon(4.0, 64);
        let grid = small_grid(&time);
        let noise = draw_noise(&grid, 23, 1);
        let f = box_model();
        let g = box_model();
        let a = synthesize_companion_path(&f, &g, &noise, &grid, &time).unwrap();
        let b = synthesize_companion_path(&f, &g, &noise, &grid, &time).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn grid_covariance_table_matches_direct_sum() {
        let time = TimeGrid::for_horizon(4.0, 64);
        let grid = small_grid(&time);
        let sampler = SpectralSampler::for_process(&box_model(), &grid, &time).unwrap();
        let table = sampler.covariance_table(time.step, 65);
        // Direct evaluation at one lag.
        let lag = time.step * 10.0;
        let direct: f64 = grid
            .cells
            .iter()
            .zip(&sampler.masses)
            .map(|(c, m)| 2.0 * m * (c.node * lag).cos())
            .sum();
        assert!((table.values[10] - direct).abs() < 1e-10);
        assert!((table.values[0] - sampler.grid_variance()).abs() < 1e-10);
        // Grid covariance tracks the true transform at small lags. This toy
        // grid (T = 4) has cells ~0.4 wide, so only coarse agreement here;
        // production horizons shrink the cells by two orders of magnitude.
        assert!((table.values[0] - 2.0).abs() < 1e-6);
        assert!((table.values[10] - 2.0 * lag.sin() / lag).abs() < 2e-2);
    }

    #[test]
    fn geometric_grid_has_no_zero_node_and_mirrors() {
        let grid = FrequencyGrid::geometric(1e-3, 40.0, 1.2).unwrap();
        assert!(grid.cells.iter().all(|c| c.node > 0.0));
        let nodes = grid.nodes_two_sided();
        let n = nodes.len();
        for i in 0..n / 2 {
            assert!((nodes[i] + nodes[n - 1 - i]).abs() < 1e-15);
        }
    }
}
