use qflt::limit::sigma2;
use qflt::spectral::{companion_transform_table, SpectralModel};

fn main() {
    let f = SpectralModel::power_law(0.2);
    let g = SpectralModel::power_law(0.2);
    let s2 = sigma2(&f, &g, 1e-10).unwrap();
    println!("sigma2 = {s2:.6}");

    // Exact table out to u = 2000; beyond that the power-law asymptote
    // r_Y(u) ~ A u^{-0.6} with A = 4π Γ(0.6) cos(0.3π) carries the tail.
    let step = 0.05;
    let u_cut = 2000.0;
    let r = companion_transform_table(&f, &g, step, u_cut, 1e-8).unwrap();
    let gamma_06 = 1.489_192_248_812_817_f64;
    let a_coef = 4.0 * std::f64::consts::PI * gamma_06 * (0.3 * std::f64::consts::PI).cos();
    println!("A = {a_coef:.6}");
    println!(
        "r_Y(100) table = {:.6}, asymptote = {:.6}",
        r.value_at(100.0).unwrap(),
        a_coef * 100f64.powf(-0.6) + 4.0 * std::f64::consts::PI * (100f64).sin() / 100.0
    );

    // Parseval: 2 [ ∫_0^U r² + A²/0.2 U^{-0.2} ] should match sigma2.
    let mut base = 0.0;
    for (d, v) in r.values.iter().enumerate() {
        let w = if d == 0 || d == r.values.len() - 1 { 0.5 } else { 1.0 };
        base += w * v * v * step;
    }
    let parseval = 2.0 * (base + a_coef * a_coef / 0.2 * u_cut.powf(-0.2));
    println!("2*Int r_Y^2 = {parseval:.4} vs sigma2 {s2:.4} (rel {:.4e})", (parseval - s2).abs() / s2);

    for t_horizon in [64.0f64, 256.0, 1024.0, 4096.0, 16384.0, 65536.0] {
        // Var L_T(1) = 4 ∫_0^T (1 - u/T) r² du, exact part to min(T, 2000).
        let hi = t_horizon.min(u_cut);
        let m = (hi / step).round() as usize;
        let mut acc = 0.0;
        for d in 0..=m {
            let u = step * d as f64;
            let w = if d == 0 || d == m { 0.5 } else { 1.0 };
            acc += w * (1.0 - u / t_horizon) * r.values[d] * r.values[d] * step;
        }
        // Analytic remainder of the A² u^{-1.2} part over [2000, T].
        if t_horizon > u_cut {
            let f_at = |u: f64| -5.0 * u.powf(-0.2) - u.powf(0.8) / (0.8 * t_horizon);
            acc += a_coef * a_coef * (f_at(t_horizon) - f_at(u_cut));
        }
        let v = 4.0 * acc;
        println!(
            "T = {t_horizon:8.0}: Var L_T(1)/sigma2 = {:.4}  (deficit {:.4})",
            v / s2,
            1.0 - v / s2
        );
    }
}
