//! Command-line front end: validates experiment configs, dispatches
//! experiments, persists results, and emits plot-ready data tables.
//!
//! Exit codes: 0 success, 1 assertion failure, 2 config error, 3 numerical
//! error — a stable contract for CI pipelines.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use qflt::config::{config_hash, parse_config_file};
use qflt::error::Error;
use qflt::limit::{eval_limit_kernel, kernel_l2_norm, KernelSettings, LimitKernel};
use qflt::mc::{run_experiment_full, Mode};
use qflt::output::{
    write_cov_heatmap_csv, write_kernel_dump, write_manifest, write_path_dump, write_qq_csv,
    write_report_json, write_summary_csv, write_variance_vs_t_csv, QqReference, RunManifest,
};
use qflt::spectral::{check_clt_conditions, check_potter_bound, classify_regime, Regime, SvKind};
use qflt::synth::{draw_noise, FrequencyGrid, SpectralSampler, TimeGrid};

#[derive(Parser)]
#[command(name = "qflt", version, about = "Toeplitz quadratic functional limit-theorem laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config file: regime classification and integrability conditions.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured experiment and write reports into an output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the experiment mode from the config.
        #[arg(long)]
        mode: Option<String>,
        /// Worker threads (falls back to the QFLT_WORKERS environment variable).
        #[arg(long)]
        workers: Option<usize>,
        /// Also dump the first replication's sample paths as CSV.
        #[arg(long, default_value_t = false)]
        dump_paths: bool,
    },
    /// Evaluate the limit kernel on a grid and report its L2 norm.
    Kernel {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Grid spec lo:hi:count for both axes.
        #[arg(long, default_value = "-2:2:21", allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        trunc: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Skip the norm computation (pointwise dump only).
        #[arg(long, default_value_t = false)]
        skip_norm: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the crate version.
    Version,
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn setup_workers(cli_workers: Option<usize>) {
    let n = cli_workers.or_else(|| {
        std::env::var("QFLT_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn dispatch(cli: Cli) -> qflt::Result<i32> {
    match cli.command {
        Command::Version => {
            println!("qflt {}", env!("CARGO_PKG_VERSION"));
            Ok(0)
        }
        Command::Validate { config } => cmd_validate(&config),
        Command::Run {
            config,
            out,
            seed,
            mode,
            workers,
            dump_paths,
        } => {
            setup_workers(workers);
            cmd_run(&config, &out, seed, mode, dump_paths)
        }
        Command::Kernel {
            alpha,
            beta,
            t,
            grid,
            out,
            trunc,
            tol,
            skip_norm,
            workers,
        } => {
            setup_workers(workers);
            cmd_kernel(alpha, beta, t, &grid, &out, trunc, tol, skip_norm)
        }
    }
}

fn cmd_validate(config: &PathBuf) -> qflt::Result<i32> {
    let parsed = parse_config_file(config)?;
    let cfg = &parsed.experiment;
    let regime = classify_regime(cfg.f_model.exponent, cfg.g_model.exponent);
    println!("regime: {regime}");
    if regime == Regime::Invalid {
        eprintln!(
            "Invalid: alpha < 1 and beta < 1 required (got alpha={}, beta={})",
            cfg.f_model.exponent, cfg.g_model.exponent
        );
        return Ok(2);
    }
    let conditions = check_clt_conditions(&cfg.f_model, &cfg.g_model, 1e-6)?;
    println!(
        "integrability conditions (f*g in L1 and L2): {}",
        if conditions.holds { "hold" } else { "fail" }
    );
    println!(
        "  |f*g| integral: {:.6} ({})",
        conditions.fg_l1.value,
        if conditions.fg_l1.converged {
            "converged"
        } else {
            "divergent"
        }
    );
    println!(
        "  (f*g)^2 integral: {:.6} ({})",
        conditions.fg_l2.value,
        if conditions.fg_l2.converged {
            "converged"
        } else {
            "divergent"
        }
    );
    for (name, model) in [("f", &cfg.f_model), ("g", &cfg.g_model)] {
        if matches!(model.sv.kind, SvKind::LogPower { .. }) {
            let us: Vec<f64> = (0..=60).map(|i| 10f64.powf(-3.0 + i as f64 * 0.1)).collect();
            let rep = check_potter_bound(&model.sv, 0.1, &[1e3, 1e6], &us)?;
            println!(
                "  potter bound ({name}): witness C = {:.4}, uniform = {}",
                rep.witness_c, rep.uniform
            );
        }
    }
    match cfg.validate() {
        Ok(()) => {
            println!("config: ok (mode {})", cfg.mode);
            Ok(0)
        }
        Err(e) => {
            eprintln!("config: {e}");
            Ok(2)
        }
    }
}

fn cmd_run(
    config: &PathBuf,
    out: &PathBuf,
    seed: Option<u64>,
    mode: Option<String>,
    dump_paths: bool,
) -> qflt::Result<i32> {
    let parsed = parse_config_file(config)?;
    let mut cfg = parsed.experiment;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(m) = mode {
        cfg.mode = m.parse()?;
    }
    cfg.validate()?;
    let hash = config_hash(&cfg);

    std::fs::create_dir_all(out)?;
    let manifest = RunManifest::started(&hash, cfg.master_seed);
    write_manifest(out, &manifest)?;

    let started = Instant::now();
    let (report, artifacts) = run_experiment_full(&cfg)?;

    let mut outputs = Vec::new();
    outputs.push(write_report_json(out, &report, &hash)?);
    outputs.push(write_summary_csv(out, &report, &hash)?);
    outputs.push(write_variance_vs_t_csv(out, &report, &hash)?);
    outputs.push(write_cov_heatmap_csv(out, &report, &hash)?);

    if let Some(samples) = &artifacts.largest_q {
        match (&artifacts.chaos_samples, artifacts.sigma2) {
            (Some(chaos), _) => {
                outputs.push(write_qq_csv(
                    out,
                    &hash,
                    &cfg.t_grid,
                    samples,
                    QqReference::Sample(chaos),
                )?);
            }
            (None, Some(s2)) => {
                let var_at = move |t: f64| s2 * t;
                outputs.push(write_qq_csv(
                    out,
                    &hash,
                    &cfg.t_grid,
                    samples,
                    QqReference::Normal {
                        variance_at: &var_at,
                    },
                )?);
            }
            (None, None) => {}
        }
    }

    if let Some(section) = &report.kernel_only {
        let mut s = format!("# config_hash={hash}\nt,norm2,error\n");
        for (t, est) in &section.norms {
            s.push_str(&format!("{t},{:.16e},{:.16e}\n", est.value, est.error));
        }
        let path = out.join("kernel_norms.csv");
        std::fs::write(&path, s)?;
        outputs.push(path);
    }

    if dump_paths && cfg.mode != Mode::KernelOnly {
        let horizon = *cfg.horizons.last().expect("validated non-empty");
        let time = TimeGrid::for_horizon(horizon, cfg.path_len);
        let x_max = cfg.f_model.coverage_radius(1e-4)?;
        let grid = FrequencyGrid::for_synthesis(x_max, &time, &cfg.synth)?;
        let noise = draw_noise(&grid, cfg.master_seed, 0);
        let x = SpectralSampler::for_process(&cfg.f_model, &grid, &time)?.synthesize(&noise)?;
        let y = if cfg.mode == Mode::CompanionGap {
            Some(
                SpectralSampler::for_companion(&cfg.f_model, &cfg.g_model, &grid, &time)?
                    .synthesize(&noise)?,
            )
        } else {
            None
        };
        let path = out.join("paths.csv");
        write_path_dump(
            &path,
            &hash,
            &format!(
                "alpha={} beta={}",
                cfg.f_model.exponent, cfg.g_model.exponent
            ),
            &x,
            y.as_ref(),
        )?;
        outputs.push(path);
    }

    let runtime = started.elapsed().as_secs_f64();
    write_manifest(out, &manifest.complete(outputs, runtime))?;

    for a in &report.assertions {
        println!(
            "assertion {}: {} ({})",
            a.name,
            if a.pass { "pass" } else { "FAIL" },
            a.detail
        );
    }
    println!(
        "run complete: mode {}, {} horizons, {} replications, {:.1}s",
        report.mode,
        report.horizons.len(),
        report.replications,
        runtime
    );
    Ok(if report.assertions_passed { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_kernel(
    alpha: f64,
    beta: f64,
    t: f64,
    grid: &str,
    out: &PathBuf,
    trunc: f64,
    tol: f64,
    skip_norm: bool,
) -> qflt::Result<i32> {
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "grid spec '{grid}' must be lo:hi:count"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid lower bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid upper bound '{}'", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid count '{}'", parts[2])))?;
    if count < 2 || hi <= lo {
        return Err(Error::Config("grid needs hi > lo and count >= 2".into()));
    }
    if classify_regime(alpha, beta) == Regime::Invalid {
        return Err(Error::Config(format!(
            "Invalid regime: alpha < 1 and beta < 1 required (got {alpha}, {beta})"
        )));
    }

    let kernel = LimitKernel {
        alpha,
        beta,
        t,
        finite_t: None,
        settings: KernelSettings::default(),
    };
    let xs: Vec<f64> = (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect();
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for &x1 in &xs {
        for &x2 in &xs {
            if x1 == 0.0 || x2 == 0.0 || x1.abs() == x2.abs() {
                skipped += 1;
                continue;
            }
            let v = eval_limit_kernel(&kernel, x1, x2)?;
            rows.push((x1, x2, v.re, v.im));
        }
    }
    let pseudo_hash = format!("kernel-a{alpha}-b{beta}-t{t}");
    write_kernel_dump(out, &pseudo_hash, &rows, skipped)?;
    println!(
        "kernel dump: {} points written, {skipped} diagonal/axis points skipped",
        rows.len()
    );

    if !skip_norm {
        let est = kernel_l2_norm(&kernel, trunc, tol)?;
        println!(
            "norm2 = {:.10e} (error estimate {:.3e})",
            est.value, est.error
        );
    }
    Ok(0)
}
