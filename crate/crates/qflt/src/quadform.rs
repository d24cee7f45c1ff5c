//! The Toeplitz quadratic functional
//! `Q_T(t) = ∫_0^{Tt} ∫_0^{Tt} ĝ(u-v) X(u) X(v) du dv`
//! discretized as a left-endpoint Riemann sum with step `h`, so the discrete
//! object is the quadratic form `x^T A x` with `A_{kl} = h² ĝ((k-l)h)`.
//!
//! Two evaluators are provided: an O(N²) reference and an FFT route that
//! computes the strictly-causal Toeplitz convolution once on the full horizon
//! and accumulates prefix sums, giving every ascending t-point in
//! O(N log N + N) total while agreeing with the reference to roundoff.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectral::CovarianceTable;
use crate::synth::{SamplePath, TimeGrid};

/// Which normalization a quadratic path carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Normalization {
    Raw,
    Clt,
    Nclt,
    Companion,
}

/// Values of the (possibly normalized) quadratic functional on a t-grid in [0,1].
#[derive(Debug, Clone)]
pub struct QuadraticPath {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub tag: Normalization,
    pub horizon: f64,
    pub master_seed: u64,
    pub replication: u64,
}

/// Number of integration cells for the prefix `[0, T·t]` of a path with
/// `steps` cells: the discrete domain is `k, l < round(steps · t)`.
fn prefix_len(steps: usize, t: f64) -> usize {
    ((steps as f64 * t).round() as usize).min(steps)
}

fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    for &t in t_grid {
        if !(0.0..=1.0 + 1e-12).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
        }
    }
    Ok(())
}

/// O(N²) reference evaluation of the raw quadratic functional.
pub fn eval_qt_naive(
    path: &SamplePath,
    kernel: &CovarianceTable,
    t_grid: &[f64],
) -> Result<QuadraticPath> {
    check_t_grid(t_grid)?;
    let n_max = path.time.steps;
    let h = path.time.step;
    if !kernel.covers((n_max.saturating_sub(1)) as f64 * h) {
        return Err(Error::Domain(
            "kernel table does not cover lags up to the horizon".into(),
        ));
    }
    let gvals: Vec<f64> = (0..n_max)
        .map(|d| kernel.value_at(d as f64 * h))
        .collect::<Result<_>>()?;
    let x = &path.values;
    let values = t_grid
        .iter()
        .map(|&t| {
            let n = prefix_len(n_max, t);
            let mut q = 0.0;
            for k in 0..n {
                for l in 0..n {
                    q += gvals[k.abs_diff(l)] * x[k] * x[l];
                }
            }
            h * h * q
        })
        .collect();
    Ok(QuadraticPath {
        t_grid: t_grid.to_vec(),
        values,
        tag: Normalization::Raw,
        horizon: path.horizon(),
        master_seed: path.master_seed,
        replication: path.replication,
    })
}

/// Reusable FFT evaluator for one (kernel, time-grid) pair: the kernel
/// spectrum is transformed once and shared across replications.
pub struct QtFftEvaluator {
    time: TimeGrid,
    g0: f64,
    kernel_fft: Vec<Complex64>,
    nfft: usize,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl QtFftEvaluator {
    pub fn new(kernel: &CovarianceTable, time: &TimeGrid) -> Result<Self> {
        let n = time.steps;
        let h = time.step;
        if n == 0 {
            return Err(Error::Domain("empty time grid".into()));
        }
        if !kernel.covers((n - 1) as f64 * h) {
            return Err(Error::Domain(
                "kernel table does not cover lags up to the horizon".into(),
            ));
        }
        let nfft = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(nfft);
        let inverse = planner.plan_fft_inverse(nfft);
        // Strictly causal taps: lag 0 handled separately in the prefix sum.
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for (d, slot) in buf.iter_mut().enumerate().take(n).skip(1) {
            *slot = Complex64::new(kernel.value_at(d as f64 * h)?, 0.0);
        }
        forward.process(&mut buf);
        Ok(QtFftEvaluator {
            time: *time,
            g0: kernel.value_at(0.0)?,
            kernel_fft: buf,
            nfft,
            forward,
            inverse,
        })
    }

    /// Raw `Q_T(t)` on the t-grid via causal convolution + prefix sums.
    pub fn eval(&self, path: &SamplePath, t_grid: &[f64]) -> Result<QuadraticPath> {
        check_t_grid(t_grid)?;
        if path.time != self.time {
            return Err(Error::Domain("path time grid differs from evaluator".into()));
        }
        let n = self.time.steps;
        let h = self.time.step;
        let x = &path.values;

        let mut buf = vec![Complex64::new(0.0, 0.0); self.nfft];
        for k in 0..n {
            buf[k] = Complex64::new(x[k], 0.0);
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_fft) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.nfft as f64;

        // Prefix sums of ĝ_0 x_k² + 2 x_k W_k with W_k = Σ_{j=1..k} ĝ_j x_{k-j}.
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for k in 0..n {
            let w_k = buf[k].re * scale;
            acc += self.g0 * x[k] * x[k] + 2.0 * x[k] * w_k;
            prefix.push(acc);
        }

        let values = t_grid
            .iter()
            .map(|&t| h * h * prefix[prefix_len(n, t)])
            .collect();
        Ok(QuadraticPath {
            t_grid: t_grid.to_vec(),
            values,
            tag: Normalization::Raw,
            horizon: path.horizon(),
            master_seed: path.master_seed,
            replication: path.replication,
        })
    }
}

/// One-shot FFT evaluation (contract form of the fast evaluator).
pub fn eval_qt_fft(
    path: &SamplePath,
    kernel: &CovarianceTable,
    t_grid: &[f64],
) -> Result<QuadraticPath> {
    QtFftEvaluator::new(kernel, &path.time)?.eval(path, t_grid)
}

/// Expectation of the discrete quadratic functional,
/// `E Q_T(t) = h² Σ_{k,l<n} ĝ((k-l)h) r((k-l)h)` reduced by stationarity to
/// the triangular lag sum. The tables define the quadrature step.
pub fn expected_qt(
    kernel: &CovarianceTable,
    cov: &CovarianceTable,
    horizon: f64,
    t: f64,
) -> Result<f64> {
    let h = kernel.step;
    if (cov.step - h).abs() > 1e-12 * h.max(1.0) {
        return Err(Error::Domain(
            "kernel and covariance tables must share the lag step".into(),
        ));
    }
    let n = (horizon * t / h).round() as usize;
    if n == 0 {
        return Ok(0.0);
    }
    let need = (n - 1) as f64 * h;
    if !kernel.covers(need) || !cov.covers(need) {
        return Err(Error::Domain(format!(
            "tables cover lag {:.4}, need {need:.4}",
            kernel.max_lag().min(cov.max_lag())
        )));
    }
    let mut acc = n as f64 * kernel.values[0] * cov.values[0];
    for d in 1..n {
        acc += 2.0 * (n - d) as f64 * kernel.values[d] * cov.values[d];
    }
    Ok(h * h * acc)
}

/// Apply the CLT (`T^{-1/2}`) or NCLT (`T^{-(α+β)} L_1(1/T)^{-1} L_2(1/T)^{-1}`)
/// normalization to a raw path, centering by the supplied expectations.
#[allow(clippy::too_many_arguments)]
pub fn normalize(
    q: &QuadraticPath,
    expectation_per_t: &[f64],
    mode: Normalization,
    horizon: f64,
    alpha: f64,
    beta: f64,
    l1_at_inv_t: f64,
    l2_at_inv_t: f64,
) -> Result<QuadraticPath> {
    if q.tag != Normalization::Raw {
        return Err(Error::Domain("normalize expects a raw path".into()));
    }
    if expectation_per_t.len() != q.values.len() {
        return Err(Error::Domain("expectation vector length mismatch".into()));
    }
    let denom = match mode {
        Normalization::Clt => horizon.sqrt(),
        Normalization::Nclt => horizon.powf(alpha + beta) * l1_at_inv_t * l2_at_inv_t,
        _ => {
            return Err(Error::Domain(
                "normalization mode must be clt or nclt".into(),
            ))
        }
    };
    if !(denom.is_finite() && denom != 0.0) {
        return Err(Error::Degenerate(format!(
            "normalization denominator {denom} is unusable"
        )));
    }
    Ok(QuadraticPath {
        t_grid: q.t_grid.clone(),
        values: q
            .values
            .iter()
            .zip(expectation_per_t)
            .map(|(v, e)| (v - e) / denom)
            .collect(),
        tag: mode,
        horizon: q.horizon,
        master_seed: q.master_seed,
        replication: q.replication,
    })
}

/// Companion functional
/// `L_T(t) = T^{-1/2} ( ∫_0^{Tt} Y²(u) du − E ∫_0^{Tt} Y²(u) du )`,
/// with the expectation supplied as `r_Y(0)` per unit time.
pub fn companion_functional(
    y: &SamplePath,
    r_y0: f64,
    t_grid: &[f64],
) -> Result<QuadraticPath> {
    check_t_grid(t_grid)?;
    let n_max = y.time.steps;
    let h = y.time.step;
    let horizon = y.horizon();
    let mut prefix = Vec::with_capacity(n_max + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for k in 0..n_max {
        acc += y.values[k] * y.values[k];
        prefix.push(acc);
    }
    let scale = 1.0 / horizon.sqrt();
    let values = t_grid
        .iter()
        .map(|&t| {
            let n = prefix_len(n_max, t);
            scale * (h * prefix[n] - n as f64 * h * r_y0)
        })
        .collect();
    Ok(QuadraticPath {
        t_grid: t_grid.to_vec(),
        values,
        tag: Normalization::Companion,
        horizon,
        master_seed: y.master_seed,
        replication: y.replication,
    })
}

/// Exact finite-horizon increment variance of the companion functional,
/// `E (L_T(t) − L_T(s))² = 2(t−s) ∫_{-A}^{A} (1 − |u|/A) r_Y²(u) du`
/// with `A = T(t−s)`, integrated over the covariance table by trapezoid.
pub fn theoretical_increment_variance_lt(
    r_y: &CovarianceTable,
    horizon: f64,
    s: f64,
    t: f64,
) -> Result<f64> {
    if !(s < t) {
        return Err(Error::Domain(format!("need s < t, got s={s}, t={t}")));
    }
    let a = horizon * (t - s);
    if !r_y.covers(a) {
        return Err(Error::Domain(format!(
            "covariance table covers lag {:.4}, need {a:.4}",
            r_y.max_lag()
        )));
    }
    let h = r_y.step;
    let phi = |d: usize| {
        let u = d as f64 * h;
        let r = r_y.values[d];
        (1.0 - u / a) * r * r
    };
    let m = (a / h).floor() as usize;
    let mut integral = 0.0;
    for d in 0..m.min(r_y.values.len() - 1) {
        integral += 0.5 * h * (phi(d) + phi(d + 1));
    }
    // Fractional last cell; the integrand vanishes at u = A.
    let u_m = m as f64 * h;
    if u_m < a && m < r_y.values.len() {
        integral += 0.5 * (a - u_m) * phi(m);
    }
    Ok(4.0 * (t - s) * integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn const_path(value: f64, time: TimeGrid) -> SamplePath {
        SamplePath {
            values: vec![value; time.len()],
            time,
            master_seed: 0,
            replication: 0,
        }
    }

    fn random_path(seed: u64, time: TimeGrid) -> SamplePath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SamplePath {
            values: (0..time.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            time,
            master_seed: seed,
            replication: 0,
        }
    }

    #[test]
    fn zero_path_gives_zero_q() {
        let time = TimeGrid::for_horizon(2.0, 128);
        let path = const_path(0.0, time);
        let kernel = CovarianceTable::from_fn(time.step, 129, |s| (-s).exp(), "exp");
        let grid = [0.0, 0.5, 1.0];
        let q = eval_qt_naive(&path, &kernel, &grid).unwrap();
        assert!(q.values.iter().all(|&v| v == 0.0));
        let qf = eval_qt_fft(&path, &kernel, &grid).unwrap();
        assert!(qf.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn q_starts_at_zero() {
        let time = TimeGrid::for_horizon(1.0, 64);
        let path = random_path(3, time);
        let kernel = CovarianceTable::from_fn(time.step, 65, |s| (-s).exp(), "exp");
        let q = eval_qt_naive(&path, &kernel, &[0.0, 1.0]).unwrap();
        assert_eq!(q.values[0], 0.0);
    }

    #[test]
    fn unit_path_exponential_kernel_matches_closed_form() {
        // ∫_0^1 ∫_0^1 e^{-|u-v|} du dv = 2 e^{-1}; left-Riemann error is O(h).
        let time = TimeGrid::for_horizon(1.0, 1000);
        let path = const_path(1.0, time);
        let kernel = CovarianceTable::from_fn(time.step, 1001, |s| (-s).exp(), "exp");
        let q = eval_qt_fft(&path, &kernel, &[1.0]).unwrap();
        let expect = 2.0 * (-1.0f64).exp();
        assert!(
            (q.values[0] - expect).abs() < 5e-3 * expect,
            "{} vs {expect}",
            q.values[0]
        );
    }

    #[test]
    fn unit_path_constant_kernel_is_exact() {
        let time = TimeGrid::for_horizon(2.0, 64);
        let path = const_path(1.0, time);
        let c = 0.7;
        let kernel = CovarianceTable::from_fn(time.step, 65, |_| c, "const");
        for &t in &[0.25, 0.5, 1.0] {
            let q = eval_qt_naive(&path, &kernel, &[t]).unwrap();
            let n = prefix_len(64, t) as f64;
            let expect = c * (n * time.step).powi(2);
            assert!((q.values[0] - expect).abs() < 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn fft_matches_naive_on_random_inputs() {
        for seed in 0..8u64 {
            let steps = [16, 100, 256, 511][seed as usize % 4];
            let time = TimeGrid::for_horizon(4.0, steps);
            let path = random_path(seed, time);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let (a, b) = (rng.gen_range(0.2..2.0), rng.gen_range(0.1..3.0));
            let kernel = CovarianceTable::from_fn(
                time.step,
                steps + 1,
                |s| (-b * s).exp() * (a * s).cos(),
                "damped-cos",
            );
            let grid = [0.0, 0.1, 0.33, 0.5, 0.77, 1.0];
            let naive = eval_qt_naive(&path, &kernel, &grid).unwrap();
            let fast = eval_qt_fft(&path, &kernel, &grid).unwrap();
            let scale = naive
                .values
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(1e-300);
            for (n, f) in naive.values.iter().zip(&fast.values) {
                assert!(
                    (n - f).abs() <= 1e-10 * scale,
                    "seed {seed}: naive {n} vs fft {f}"
                );
            }
        }
    }

    #[test]
    fn prefix_consistency() {
        let time = TimeGrid::for_horizon(2.0, 200);
        let path = random_path(9, time);
        let kernel = CovarianceTable::from_fn(time.step, 201, |s| 1.0 / (1.0 + s * s), "rational");
        let full = eval_qt_fft(&path, &kernel, &[0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
        let partial = eval_qt_fft(&path, &kernel, &[0.2, 0.4]).unwrap();
        assert_eq!(full.values[0], partial.values[0]);
        assert_eq!(full.values[1], partial.values[1]);
    }

    #[test]
    fn nonnegative_for_positive_definite_kernel() {
        // ĝ(s) = 2 sin(s)/s is the transform of a nonnegative g (indicator),
        // hence positive semidefinite; the quadratic form must be >= 0.
        let time = TimeGrid::for_horizon(8.0, 256);
        let kernel = CovarianceTable::from_fn(
            time.step,
            257,
            |s| if s == 0.0 { 2.0 } else { 2.0 * s.sin() / s },
            "sinc",
        );
        for seed in 0..5 {
            let path = random_path(seed, time);
            let q = eval_qt_fft(&path, &kernel, &[0.3, 1.0]).unwrap();
            for &v in &q.values {
                assert!(v >= -1e-9, "PSD kernel produced Q = {v}");
            }
        }
    }

    #[test]
    fn domain_error_when_kernel_table_too_short() {
        let time = TimeGrid::for_horizon(4.0, 64);
        let path = random_path(1, time);
        let kernel = CovarianceTable::from_fn(time.step, 10, |s| (-s).exp(), "short");
        assert!(matches!(
            eval_qt_naive(&path, &kernel, &[1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            eval_qt_fft(&path, &kernel, &[1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn expected_qt_constant_product() {
        let h = 0.01;
        let count = 401;
        let kernel = CovarianceTable::from_fn(h, count, |_| 2.0, "c");
        let cov = CovarianceTable::from_fn(h, count, |_| 0.5, "c");
        // ĝ r ≡ 1: E Q = (T t)² exactly in the discrete convention.
        let e = expected_qt(&kernel, &cov, 4.0, 0.5).unwrap();
        assert!((e - 4.0).abs() < 1e-12);
        let zero = CovarianceTable::from_fn(h, count, |_| 0.0, "0");
        assert_eq!(expected_qt(&kernel, &zero, 4.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn expected_qt_exponential_closed_form() {
        // ĝ = r = e^{-s}: E Q_T(1) = T − (1 − e^{-2T})/2 in the continuum.
        let t_horizon = 4.0;
        let h = 1e-3;
        let count = (t_horizon / h) as usize + 1;
        let table = CovarianceTable::from_fn(h, count, |s| (-s).exp(), "exp");
        let e = expected_qt(&table, &table, t_horizon, 1.0).unwrap();
        let expect = t_horizon - (1.0 - (-2.0 * t_horizon).exp()) / 2.0;
        assert!((e - expect).abs() < 5e-3, "{e} vs {expect}");
    }

    #[test]
    fn normalize_arithmetic_examples() {
        let raw = QuadraticPath {
            t_grid: vec![1.0],
            values: vec![5.0],
            tag: Normalization::Raw,
            horizon: 4.0,
            master_seed: 0,
            replication: 0,
        };
        // CLT: (5 − 3)/√4 = 1.
        let clt = normalize(&raw, &[3.0], Normalization::Clt, 4.0, 0.2, 0.2, 1.0, 1.0).unwrap();
        assert!((clt.values[0] - 1.0).abs() < 1e-15);

        // NCLT with T = e, α+β = 0.7, L ≡ 1: denominator e^{0.7}.
        let e = std::f64::consts::E;
        let raw2 = QuadraticPath {
            t_grid: vec![1.0],
            values: vec![e.powf(0.7)],
            horizon: e,
            ..raw.clone()
        };
        let nclt = normalize(&raw2, &[0.0], Normalization::Nclt, e, 0.4, 0.3, 1.0, 1.0).unwrap();
        assert!((nclt.values[0] - 1.0).abs() < 1e-12);

        // Q = EQ pointwise: normalized path vanishes.
        let centered =
            normalize(&raw, &[5.0], Normalization::Clt, 4.0, 0.2, 0.2, 1.0, 1.0).unwrap();
        assert_eq!(centered.values[0], 0.0);

        // Zero denominator signals a degenerate spec.
        assert!(matches!(
            normalize(&raw, &[0.0], Normalization::Nclt, 4.0, 0.4, 0.3, 0.0, 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn companion_functional_zero_case() {
        let time = TimeGrid::for_horizon(4.0, 64);
        let y = const_path(0.0, time);
        let l = companion_functional(&y, 0.0, &[0.0, 0.5, 1.0]).unwrap();
        assert!(l.values.iter().all(|&v| v == 0.0));
        assert_eq!(l.tag, Normalization::Companion);
    }

    #[test]
    fn increment_variance_zero_and_domain() {
        let r = CovarianceTable::from_fn(0.01, 201, |_| 0.0, "0");
        assert_eq!(
            theoretical_increment_variance_lt(&r, 1.0, 0.0, 1.0).unwrap(),
            0.0
        );
        assert!(matches!(
            theoretical_increment_variance_lt(&r, 1.0, 0.5, 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn increment_variance_exponential_oracle() {
        // r_Y(u) = e^{-u}, T = 1, (s,t) = (0,1): independent fine trapezoid
        // of 4 ∫_0^1 (1-u) e^{-2u} du; closed form 1 + e^{-2}.
        let n = 200_000;
        let mut oracle = 0.0;
        for i in 0..n {
            let u0 = i as f64 / n as f64;
            let u1 = (i + 1) as f64 / n as f64;
            let f0 = (1.0 - u0) * (-2.0 * u0).exp();
            let f1 = (1.0 - u1) * (-2.0 * u1).exp();
            oracle += 0.5 * (f0 + f1) / n as f64;
        }
        let oracle = 4.0 * oracle;
        assert!((oracle - (1.0 + (-2.0f64).exp())).abs() < 1e-9);

        let r = CovarianceTable::from_fn(1e-4, 10_001, |u| (-u).exp(), "exp");
        let v = theoretical_increment_variance_lt(&r, 1.0, 0.0, 1.0).unwrap();
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn increment_variance_large_t_reaches_parseval_limit() {
        // For large T the formula tends to 2(t-s) ∫ r_Y² = (t-s)·2·(1/2)·2 = 2(t-s)
        // for r_Y = e^{-|u|} (∫_R e^{-2|u|} du = 1).
        let r = CovarianceTable::from_fn(0.01, 110_001, |u| (-u).exp(), "exp");
        let v = theoretical_increment_variance_lt(&r, 1000.0, 0.0, 1.0).unwrap();
        assert!((v - 2.0).abs() < 0.01, "{v}");
    }
}
