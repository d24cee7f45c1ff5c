//! Statistical primitives for the Monte Carlo harness: moments,
//! Kolmogorov-Smirnov tests, bootstrap intervals, Kendall trend test,
//! and a least-squares slope for log-log scaling studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step, used to derive independent substream seeds.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Central moment of the given order.
pub fn central_moment(xs: &[f64], order: u32) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(order as i32)).sum::<f64>() / xs.len() as f64
}

/// Sample skewness (biased, moment-based).
pub fn skewness(xs: &[f64]) -> f64 {
    let m2 = central_moment(xs, 2);
    if m2 <= 0.0 {
        return f64::NAN;
    }
    central_moment(xs, 3) / m2.powf(1.5)
}

/// Excess kurtosis `m4/m2^2 - 3`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m2 = central_moment(xs, 2);
    if m2 <= 0.0 {
        return f64::NAN;
    }
    central_moment(xs, 4) / (m2 * m2) - 3.0
}

/// Raw fourth-moment ratio `E[x^4] / (E[x^2])^2` about zero (chaos bound form).
pub fn fourth_moment_ratio(xs: &[f64]) -> Option<f64> {
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    if m2 <= 0.0 {
        return None;
    }
    let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / xs.len() as f64;
    Some(m4 / (m2 * m2))
}

/// Sample covariance between two equally long slices (unbiased).
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() - 1) as f64
}

/// Standard normal CDF via an Abramowitz-Stegun style erfc approximation
/// (absolute error below 1.2e-7, ample for KS p-values at desk scale).
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Inverse standard normal CDF (Acklam's rational approximation,
/// relative error below 1.15e-9).
pub fn standard_normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// CDF of the Kolmogorov distribution, `P(K <= z)`.
pub fn kolmogorov_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 1.18 {
        // Theta-function inversion: fast convergence for small z.
        let v = std::f64::consts::PI * std::f64::consts::PI / (8.0 * z * z);
        let mut sum = 0.0;
        for k in 0..20 {
            let m = (2 * k + 1) as f64;
            sum += (-(m * m) * v).exp();
        }
        (2.0 * std::f64::consts::PI).sqrt() / z * sum
    } else {
        let mut sum = 0.0;
        for k in 1..=20 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * z * z).exp();
            sum += if k % 2 == 1 { term } else { -term };
        }
        1.0 - 2.0 * sum
    }
    .clamp(0.0, 1.0)
}

/// Outcome of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsOutcome {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    // Stephens' small-sample adjustment.
    let z = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    KsOutcome {
        statistic: d,
        p_value: 1.0 - kolmogorov_cdf(z),
    }
}

/// Two-sample KS test with the asymptotic Kolmogorov p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsOutcome {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (m, n) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0f64;
    while i < m && j < n {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
    }
    let ne = (m as f64 * n as f64) / (m as f64 + n as f64);
    KsOutcome {
        statistic: d,
        p_value: 1.0 - kolmogorov_cdf(ne.sqrt() * d),
    }
}

/// Percentile bootstrap confidence interval for a statistic of one sample.
/// Deterministic for a fixed seed; resample indices come from ChaCha8.
pub fn bootstrap_ci<F: Fn(&[f64]) -> f64>(
    samples: &[f64],
    stat: F,
    resamples: usize,
    level: f64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut stats: Vec<f64> = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; n];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = samples[rng.gen_range(0..n)];
        }
        stats.push(stat(&buf));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo_idx = ((level / 2.0) * resamples as f64) as usize;
    let hi_idx = (((1.0 - level / 2.0) * resamples as f64) as usize).min(resamples - 1);
    (stats[lo_idx], stats[hi_idx])
}

/// Bootstrap standard error of a statistic.
pub fn bootstrap_se<F: Fn(&[f64]) -> f64>(
    samples: &[f64],
    stat: F,
    resamples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut stats: Vec<f64> = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; n];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = samples[rng.gen_range(0..n)];
        }
        stats.push(stat(&buf));
    }
    variance(&stats).sqrt()
}

/// Bootstrap standard error for a paired statistic (e.g. a covariance):
/// resamples pairs jointly.
pub fn bootstrap_se_paired<F: Fn(&[f64], &[f64]) -> f64>(
    xs: &[f64],
    ys: &[f64],
    stat: F,
    resamples: usize,
    seed: u64,
) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = xs.len();
    let mut stats: Vec<f64> = Vec::with_capacity(resamples);
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for _ in 0..resamples {
        for i in 0..n {
            let k = rng.gen_range(0..n);
            bx[i] = xs[k];
            by[i] = ys[k];
        }
        stats.push(stat(&bx, &by));
    }
    variance(&stats).sqrt()
}

/// Kendall trend outcome for a short series.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct KendallOutcome {
    pub tau: f64,
    /// One-sided exact p-value for observing a concordance this negative
    /// (decreasing trend) under the exchangeable null.
    pub p_decreasing: f64,
    pub strictly_decreasing: bool,
}

/// Kendall tau of `ys` against their index order, with the exact one-sided
/// p-value for a decreasing trend (n! enumeration; fine for n <= 8).
pub fn kendall_trend(ys: &[f64]) -> KendallOutcome {
    let n = ys.len();
    assert!(n >= 2 && n <= 8, "exact Kendall enumeration needs 2..=8 points");
    let score = |perm: &[f64]| -> i64 {
        let mut s = 0i64;
        for i in 0..perm.len() {
            for j in (i + 1)..perm.len() {
                s += match perm[j].partial_cmp(&perm[i]).unwrap() {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Less => -1,
                    std::cmp::Ordering::Equal => 0,
                };
            }
        }
        s
    };
    let observed = score(ys);
    let pairs = (n * (n - 1) / 2) as f64;
    let tau = observed as f64 / pairs;

    // Enumerate permutations of the observed values to get the exact null
    // distribution of the concordance score.
    let mut perm: Vec<f64> = ys.to_vec();
    let mut le_count = 0usize;
    let mut total = 0usize;
    permute(&mut perm, 0, &mut |p| {
        total += 1;
        if score(p) <= observed {
            le_count += 1;
        }
    });
    KendallOutcome {
        tau,
        p_decreasing: le_count as f64 / total as f64,
        strictly_decreasing: ys.windows(2).all(|w| w[1] < w[0]),
    }
}

fn permute<F: FnMut(&[f64])>(xs: &mut Vec<f64>, k: usize, visit: &mut F) {
    if k == xs.len() {
        visit(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, visit);
        xs.swap(k, i);
    }
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(mat: &[Vec<f64>]) -> Vec<f64> {
    let n = mat.len();
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
