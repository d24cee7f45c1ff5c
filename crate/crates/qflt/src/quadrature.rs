//! Shared numerical integration machinery.
//!
//! Everything here is deterministic and allocation-light: composite
//! Gauss-Legendre panels, power-law endpoint substitution for integrands
//! behaving like `x^{-s}` (s < 1) at zero, refinement loops with error
//! estimates, and "cosine rules" — flattened node/coefficient lists for
//! evaluating Fourier-cosine transforms on whole ladders of lags at once.

use crate::error::{Error, Result};

/// 16-point Gauss-Legendre nodes (positive half) and weights on [-1, 1].
const GL16: [(f64, f64); 8] = [
    (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
    (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
    (0.458_016_777_657_227_4, 0.169_156_519_395_002_5),
    (0.617_876_244_402_643_7, 0.149_595_988_816_576_7),
    (0.755_404_408_355_003_0, 0.124_628_971_255_533_9),
    (0.865_631_202_387_831_7, 0.095_158_511_682_492_8),
    (0.944_575_023_073_232_6, 0.062_253_523_938_647_9),
    (0.989_400_934_991_649_9, 0.027_152_459_411_754_1),
];

/// 8-point Gauss-Legendre nodes (positive half) and weights on [-1, 1].
const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Positive-half Gauss-Legendre pairs for order 8 or 16.
pub fn gl_half_nodes(order: usize) -> &'static [(f64, f64)] {
    if order <= 8 {
        &GL8
    } else {
        &GL16
    }
}

/// Integrate `f` over a single panel [lo, hi] with 16-point Gauss-Legendre.
pub fn gl16<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> f64 {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for &(x, w) in &GL16 {
        acc += w * (f(c + h * x) + f(c - h * x));
    }
    acc * h
}

/// Integrate over consecutive panels given by `edges` (ascending).
pub fn gl16_edges<F: FnMut(f64) -> f64>(mut f: F, edges: &[f64]) -> f64 {
    let mut acc = 0.0;
    for w in edges.windows(2) {
        acc += gl16(&mut f, w[0], w[1]);
    }
    acc
}

/// Uniform panel edges.
pub fn uniform_edges(lo: f64, hi: f64, panels: usize) -> Vec<f64> {
    let n = panels.max(1);
    (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}

/// Geometric edges from `lo` to `hi` with the given ratio, ascending.
/// `lo` must be positive.
pub fn geometric_edges(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && ratio > 1.0);
    let mut edges = vec![lo];
    let mut x = lo;
    while x * ratio < hi {
        x *= ratio;
        edges.push(x);
    }
    edges.push(hi);
    edges
}

/// Result of an adaptive quadrature with a refinement-based error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

impl QuadEstimate {
    /// Turn a non-converged estimate into an accuracy error.
    pub fn require_converged(self, requested: f64) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Accuracy {
                achieved: self.error,
                requested,
            })
        }
    }
}

/// Evaluate `compute(panels)` with doubling panel counts until two successive
/// estimates agree to `rel_tol` (relative to scale), or `max_doublings` is hit.
pub fn refine<F: FnMut(usize) -> f64>(
    mut compute: F,
    initial_panels: usize,
    rel_tol: f64,
    max_doublings: usize,
) -> QuadEstimate {
    let mut panels = initial_panels.max(1);
    let mut prev = compute(panels);
    for _ in 0..max_doublings {
        panels *= 2;
        let next = compute(panels);
        let scale = next.abs().max(prev.abs()).max(f64::MIN_POSITIVE);
        let err = (next - prev).abs();
        if err <= rel_tol * scale.max(1e-300) || err <= 1e-300 {
            return QuadEstimate {
                value: next,
                error: err,
                converged: true,
            };
        }
        prev = next;
    }
    QuadEstimate {
        value: prev,
        error: f64::INFINITY,
        converged: false,
    }
}

/// Integrate `∫_0^hi x^{-s} phi(x) dx` for `s < 1` by the substitution
/// `x = y^{1/(1-s)}`, which maps the integral to `p ∫_0^{hi^{1-s}} phi(y^p) dy`
/// with `p = 1/(1-s)`, a bounded integrand.
pub fn power_singular<F: FnMut(f64) -> f64>(
    mut phi: F,
    s: f64,
    hi: f64,
    panels: usize,
) -> f64 {
    assert!(s < 1.0, "power exponent must be < 1 for integrability");
    let p = 1.0 / (1.0 - s);
    let y_hi = hi.powf(1.0 - s);
    let edges = uniform_edges(0.0, y_hi, panels);
    p * gl16_edges(|y| phi(y.powf(p)), &edges)
}

/// A flattened quadrature rule for cosine transforms: approximates
/// `s ↦ ∫ w(x) cos(x s) dx ≈ Σ_i coeffs[i] · cos(nodes[i] · s)`.
///
/// The weight function (density, singular factor, panel weights) is folded
/// into `coeffs` once; evaluation at one lag is then a plain weighted cosine
/// sum, and a whole uniform ladder of lags can be computed with per-node
/// rotation recurrences without calling `cos` in the inner loop.
#[derive(Debug, Clone, Default)]
pub struct CosRule {
    pub nodes: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl CosRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total mass `Σ coeffs` (the transform at lag 0).
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    pub fn push(&mut self, node: f64, coeff: f64) {
        self.nodes.push(node);
        self.coeffs.push(coeff);
    }

    pub fn extend_from(&mut self, other: &CosRule) {
        self.nodes.extend_from_slice(&other.nodes);
        self.coeffs.extend_from_slice(&other.coeffs);
    }

    /// Evaluate the transform at a single lag.
    pub fn eval(&self, s: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.coeffs)
            .map(|(&x, &c)| c * (x * s).cos())
            .sum()
    }

    /// Evaluate the transform on the ladder `s = 0, step, 2·step, …` with
    /// `count` entries, using a rotation recurrence per node. The recurrence
    /// is re-anchored to exact sin/cos every 1024 steps to kill drift.
    pub fn eval_ladder(&self, step: f64, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        for (&x, &c) in self.nodes.iter().zip(&self.coeffs) {
            let (sd, cd) = (x * step).sin_cos();
            let mut cos_cur = 1.0f64;
            let mut sin_cur = 0.0f64;
            for (d, slot) in out.iter_mut().enumerate() {
                if d % 1024 == 0 {
                    let (s0, c0) = (x * step * d as f64).sin_cos();
                    sin_cur = s0;
                    cos_cur = c0;
                }
                *slot += c * cos_cur;
                let next_cos = cos_cur * cd - sin_cur * sd;
                let next_sin = sin_cur * cd + cos_cur * sd;
                cos_cur = next_cos;
                sin_cur = next_sin;
            }
        }
        out
    }
}

/// Build a cosine rule for `∫_0^hi x^{-s} L(x) cos(x·lag) dx` valid for lags
/// up to `max_lag`, with `phase_per_panel` radians of oscillation per panel.
///
/// The power substitution `x = y^p` makes the node layout equal-phase in the
/// substituted variable, so large lags stay resolved near the outer edge.
pub fn power_cos_rule<L: Fn(f64) -> f64>(
    s: f64,
    hi: f64,
    sv: L,
    max_lag: f64,
    panels_scale: usize,
) -> CosRule {
    assert!(s < 1.0);
    let p = 1.0 / (1.0 - s);
    let y_hi = hi.powf(1.0 - s);
    // Panels: enough that phase x·max_lag advances <= ~10 rad per panel,
    // plus a floor for resolving the slowly varying factor itself.
    let total_phase = hi * max_lag.abs();
    let n_phase = (total_phase / 10.0).ceil() as usize;
    let panels = (n_phase + 16) * panels_scale.max(1);
    // Equal-phase edges in y: phase(y) = y^p * max_lag; invert at equal steps.
    let mut edges = Vec::with_capacity(panels + 1);
    if total_phase > 1.0 {
        for i in 0..=panels {
            let frac = i as f64 / panels as f64;
            // Blend equal-phase spacing with a few geometric points near 0 so
            // the slowly varying factor is resolved there as well.
            let phase_y = y_hi * frac.powf(1.0 / p.max(1.0));
            edges.push(phase_y);
        }
    } else {
        edges = uniform_edges(0.0, y_hi, panels);
    }
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-300);

    let mut rule = CosRule::default();
    for w in edges.windows(2) {
        let c = 0.5 * (w[0] + w[1]);
        let h = 0.5 * (w[1] - w[0]);
        if h <= 0.0 {
            continue;
        }
        for &(xi, wi) in &GL16 {
            for sign in [-1.0, 1.0] {
                let y = c + sign * h * xi;
                if y <= 0.0 {
                    continue;
                }
                let x = y.powf(p);
                rule.push(x, wi * h * p * sv(x));
            }
        }
    }
    rule
}

/// Build a cosine rule for a smooth (non-singular) integrand `g` on [lo, hi],
/// sized for lags up to `max_lag`.
pub fn smooth_cos_rule<G: Fn(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    max_lag: f64,
    panels_scale: usize,
) -> CosRule {
    let total_phase = (hi - lo) * max_lag.abs();
    let panels = ((total_phase / 10.0).ceil() as usize + 8) * panels_scale.max(1);
    let edges = uniform_edges(lo, hi, panels);
    let mut rule = CosRule::default();
    for w in edges.windows(2) {
        let c = 0.5 * (w[0] + w[1]);
        let h = 0.5 * (w[1] - w[0]);
        for &(xi, wi) in &GL16 {
            for sign in [-1.0, 1.0] {
                let x = c + sign * h * xi;
                rule.push(x, wi * h * g(x));
            }
        }
    }
    rule
}

/// Nodes and weights for `∫_0^∞ |x|^{-s} φ(x) dx` truncated at `r_cut`:
/// weights carry the `x^{-s} dx` measure exactly on the singular panel via
/// substitution and as `w·x^{-s}` elsewhere. Used to build the u- and x-rules
/// of the limit-kernel quadratures.
#[derive(Debug, Clone)]
pub struct PowerRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exponent: f64,
    pub r_cut: f64,
}

impl PowerRule {
    /// `inner`: boundary below which the singular substitution is applied;
    /// `ratio`: geometric growth of panels from `inner` outward;
    /// `per_unit_panels`: extra panel density per unit length (oscillation);
    /// `order`: Gauss-Legendre order per panel (8 or 16).
    pub fn build(
        exponent: f64,
        r_cut: f64,
        inner: f64,
        ratio: f64,
        sub_panels: usize,
        per_unit_panels: f64,
        order: usize,
    ) -> PowerRule {
        assert!(exponent < 1.0 && r_cut > inner && inner > 0.0);
        let gl = gl_half_nodes(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();

        // Singular core [0, inner]: substitution x = y^p.
        let p = 1.0 / (1.0 - exponent);
        let y_hi = inner.powf(1.0 - exponent);
        for w in uniform_edges(0.0, y_hi, sub_panels).windows(2) {
            let c = 0.5 * (w[0] + w[1]);
            let h = 0.5 * (w[1] - w[0]);
            for &(xi, wi) in gl {
                for sign in [-1.0, 1.0] {
                    let y = c + sign * h * xi;
                    if y <= 0.0 {
                        continue;
                    }
                    nodes.push(y.powf(p));
                    weights.push(wi * h * p);
                }
            }
        }

        // Outer region: geometric panels, subdivided so that no panel is
        // wider than 1/per_unit_panels.
        let mut edges = geometric_edges(inner, r_cut, ratio);
        if per_unit_panels > 0.0 {
            let max_w = 1.0 / per_unit_panels;
            let mut refined = vec![edges[0]];
            for w in edges.windows(2) {
                let width = w[1] - w[0];
                let sub = (width / max_w).ceil().max(1.0) as usize;
                for i in 1..=sub {
                    refined.push(w[0] + width * i as f64 / sub as f64);
                }
            }
            edges = refined;
        }
        for w in edges.windows(2) {
            let c = 0.5 * (w[0] + w[1]);
            let h = 0.5 * (w[1] - w[0]);
            for &(xi, wi) in gl {
                for sign in [-1.0, 1.0] {
                    let x = c + sign * h * xi;
                    nodes.push(x);
                    weights.push(wi * h * x.powf(-exponent));
                }
            }
        }

        PowerRule {
            nodes,
            weights,
            exponent,
            r_cut,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Apply the rule to `φ`: `Σ w_i φ(x_i) ≈ ∫_0^{r_cut} x^{-s} φ(x) dx`.
    pub fn apply<F: FnMut(f64) -> f64>(&self, mut phi: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * phi(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl16_exact_on_polynomials() {
        // Degree-31 exactness: x^20 over [0, 1].
        let v = gl16(|x| x.powi(20), 0.0, 1.0);
        assert!((v - 1.0 / 21.0).abs() < 1e-14);
    }

    #[test]
    fn refine_converges_on_oscillatory() {
        let est = refine(
            |panels| gl16_edges(|x| (10.0 * x).cos(), &uniform_edges(0.0, 1.0, panels)),
            4,
            1e-12,
            12,
        );
        assert!(est.converged);
        assert!((est.value - (10.0f64).sin() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn power_singular_pure_power() {
        // ∫_0^1 x^{-0.4} dx = 1/0.6
        let v = power_singular(|_| 1.0, 0.4, 1.0, 8);
        assert!((v - 1.0 / 0.6).abs() < 1e-12);
    }

    #[test]
    fn power_cos_rule_matches_closed_form() {
        // ∫_0^1 cos(xs) dx = sin(s)/s, exponent 0.
        let rule = power_cos_rule(0.0, 1.0, |_| 1.0, 50.0, 1);
        for &s in &[0.5, 3.0, 17.0, 50.0] {
            let v = rule.eval(s);
            assert!(
                (v - s.sin() / s).abs() < 1e-10,
                "lag {s}: {v} vs {}",
                s.sin() / s
            );
        }
    }

    #[test]
    fn ladder_matches_pointwise() {
        let rule = power_cos_rule(0.3, 1.0, |_| 1.0, 100.0, 1);
        let ladder = rule.eval_ladder(0.25, 401);
        for d in [0usize, 1, 17, 100, 400] {
            let direct = rule.eval(0.25 * d as f64);
            assert!(
                (ladder[d] - direct).abs() < 1e-11,
                "lag index {d}: {} vs {direct}",
                ladder[d]
            );
        }
    }

    #[test]
    fn power_rule_integrates_power_law() {
        // ∫_0^50 x^{-0.3} e^{-x} dx ≈ Γ(0.7) minus a negligible tail.
        let rule = PowerRule::build(0.3, 50.0, 0.5, 1.6, 8, 4.0, 16);
        let v = rule.apply(|x| (-x).exp());
        let gamma_07 = 1.298_055_332_647_557_8; // Γ(0.7)
        assert!((v - gamma_07).abs() < 1e-8, "{v} vs {gamma_07}");
        let rule8 = PowerRule::build(0.3, 50.0, 0.5, 1.6, 8, 4.0, 8);
        let v8 = rule8.apply(|x| (-x).exp());
        assert!((v8 - gamma_07).abs() < 1e-6, "{v8} vs {gamma_07}");
    }
}
