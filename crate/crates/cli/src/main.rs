//! Experiment harness for the kernel-ftrl simulator.
//!
//! Subcommands:
//! * `run` — execute one experiment from a JSON config and write run.json /
//!   regret.csv (plus buffer.jsonl, diag.json);
//! * `sweep` — horizon × seed grid, summary CSV and a fitted log-log regret
//!   slope;
//! * `audit` — the lemma property suites (solver correctness, regret
//!   inequality, trace/bias/second-moment bounds);
//! * `oracle-check` — the O(M²) recursion against the dense
//!   finite-dimensional oracle.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use kernel_ftrl::config::{ExperimentConfig, SeedsSpec};
use kernel_ftrl::estimator::{bias_audit, kgr, second_moment_audit, AuditInstance, ResampleBlock};
use kernel_ftrl::kernels::{DecayProfile, MercerKernel, Support};
use kernel_ftrl::oracle::{effective_dim_trace, oracle_kgr, sigma_estimate};
use kernel_ftrl::sim::fmt17;
use kernel_ftrl::{
    decomposition_diagnostic, regret_audit, run, slope_fit, solve_policy, write_run_outputs,
    ContextDistribution, LossFunction,
};

#[derive(Parser)]
#[command(
    name = "kftrl",
    version,
    about = "Adversarial contextual bandits with RKHS losses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment.
    Run(RunArgs),
    /// Run a horizon/seed grid and fit the regret slope.
    Sweep(SweepArgs),
    /// Run the lemma property suites.
    Audit(AuditArgs),
    /// Compare the KGR recursion against the dense oracle.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to the config's out_dir, then "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the resample cap M.
    #[arg(long)]
    max_m: Option<usize>,
    /// Also write the raw buffer as buffer.jsonl.
    #[arg(long)]
    emit_buffer: bool,
    /// Evaluation draws for the regret-decomposition diagnostic.
    #[arg(long, default_value_t = 256)]
    diag_eval: usize,
    /// Skip the decomposition diagnostic.
    #[arg(long)]
    no_diag: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config (JSON); horizon and seeds are overridden per cell.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048")]
    horizons: Vec<u64>,
    /// Seeds per horizon (master seeds seed_base..seed_base+seeds).
    #[arg(long, default_value_t = 8)]
    seeds: u64,
    /// First master seed of the grid.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    /// Smaller sample sizes for a fast smoke pass.
    #[arg(long)]
    quick: bool,
    /// Output directory for audit.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dump per-instance results to this JSON file.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Audit(args) => cmd_audit(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    }
}

fn load_config(path: &std::path::Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::from_path(path)
        .with_context(|| format!("failed to load config {}", path.display()))
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seeds = SeedsSpec::Master(seed);
    }
    if args.max_m.is_some() {
        config.max_m = args.max_m;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut record = run(&config)?;
    if !args.no_diag {
        let diag_seed = match config.seeds {
            SeedsSpec::Master(m) => m ^ 0x5eed_d1a6,
            SeedsSpec::Explicit(s) => s.context ^ 0x5eed_d1a6,
        };
        record.diagnostics = Some(decomposition_diagnostic(
            &record,
            args.diag_eval,
            diag_seed,
        )?);
    }
    write_run_outputs(&record, &out, args.emit_buffer)?;
    let last = record.regret_curve.last();
    println!(
        "run complete: T={} rounds, final regret {}, kernel evals {}{}",
        record.rounds.len(),
        last.map(|c| fmt17(c.cum_regret))
            .unwrap_or_else(|| "n/a".into()),
        record.kernel_evals,
        if record.incomplete {
            " (incomplete: wall-clock cap)"
        } else {
            ""
        },
    );
    println!("outputs in {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary {
    horizons: Vec<u64>,
    seeds: u64,
    mean_regret: Vec<f64>,
    slope: Option<f64>,
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    if args.seeds == 0 || args.horizons.is_empty() {
        bail!("sweep needs at least one horizon and one seed");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .context("failed to build thread pool")?;

    let cells: Vec<(u64, u64)> = args
        .horizons
        .iter()
        .flat_map(|&t| (0..args.seeds).map(move |s| (t, args.seed_base + s)))
        .collect();
    let results: Vec<anyhow::Result<(u64, u64, f64)>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(horizon, seed)| {
                let mut cell = config.clone();
                cell.horizon = horizon;
                cell.seeds = SeedsSpec::Master(seed);
                let record = run(&cell)?;
                let final_regret = record
                    .regret_curve
                    .last()
                    .map(|c| c.cum_regret)
                    .unwrap_or(0.0);
                Ok((horizon, seed, final_regret))
            })
            .collect()
    });

    std::fs::create_dir_all(&args.out)?;
    let mut csv = String::from("horizon,seed,final_regret\n");
    let mut by_horizon: Vec<(u64, Vec<f64>)> =
        args.horizons.iter().map(|&t| (t, Vec::new())).collect();
    for r in results {
        let (horizon, seed, regret) = r?;
        csv.push_str(&format!("{horizon},{seed},{}\n", fmt17(regret)));
        if let Some((_, v)) = by_horizon.iter_mut().find(|(t, _)| *t == horizon) {
            v.push(regret);
        }
    }
    std::fs::write(args.out.join("sweep.csv"), csv)?;

    let mean_regret: Vec<f64> = by_horizon
        .iter()
        .map(|(_, v)| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let points: Vec<(f64, f64)> = by_horizon
        .iter()
        .zip(&mean_regret)
        .map(|((t, _), &r)| (*t as f64, r))
        .collect();
    let slope = slope_fit(&points).ok();
    let summary = SweepSummary {
        horizons: args.horizons.clone(),
        seeds: args.seeds,
        mean_regret: mean_regret.clone(),
        slope,
    };
    let file = std::fs::File::create(args.out.join("sweep.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &summary)?;

    for ((t, _), r) in by_horizon.iter().zip(&mean_regret) {
        println!("T={t}: mean regret {r:.4}");
    }
    match slope {
        Some(s) => println!("fitted log-log slope: {s:.4}"),
        None => println!("fitted log-log slope: n/a (need 3+ positive means)"),
    }
    println!("outputs in {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct AuditReport {
    checks: Vec<AuditCheck>,
    passed: bool,
}

#[derive(Serialize)]
struct AuditCheck {
    name: String,
    pass: bool,
    details: String,
}

fn cmd_audit(args: AuditArgs) -> anyhow::Result<()> {
    let scale = if args.quick { 1usize } else { 10 };
    let mut checks = Vec::new();
    let mut push = |name: &str, pass: bool, details: String| {
        println!(
            "[audit] {name}: {} — {details}",
            if pass { "PASS" } else { "FAIL" }
        );
        checks.push(AuditCheck {
            name: name.into(),
            pass,
            details,
        });
    };

    // Solver invariants.
    {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut max_norm = 0.0f64;
        let mut max_kkt = 0.0f64;
        for _ in 0..1000 * scale {
            let k = rng.random_range(2..=8);
            let l: Vec<f64> = (0..k)
                .map(|_| rng.random::<f64>() * 200.0 - 100.0)
                .collect();
            let eta = 10f64.powf(rng.random::<f64>() * 5.0 - 4.0);
            let sol = solve_policy(&l, eta)?;
            max_norm = max_norm.max((sol.probs.iter().sum::<f64>() - 1.0).abs());
            max_kkt = max_kkt.max(sol.kkt_residual);
        }
        push(
            "ftrl-solver",
            max_norm <= 1e-12 && max_kkt <= 1e-9,
            format!("max |Σp−1|={max_norm:.2e}, max KKT={max_kkt:.2e}"),
        );
    }

    // Log-barrier regret inequality.
    {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let mut violations = 0usize;
        let n = 100 * scale;
        for i in 0..n {
            let range = if i % 4 == 3 { 50.0 } else { 5.0 };
            let k = [2usize, 3, 5][rng.random_range(0..3)];
            let losses: Vec<Vec<f64>> = (0..200)
                .map(|_| {
                    (0..k)
                        .map(|_| rng.random::<f64>() * 2.0 * range - range)
                        .collect()
                })
                .collect();
            let eta = 10f64.powf(rng.random::<f64>() * 3.0 - 3.0);
            let audit = regret_audit(&losses, eta, &vec![1.0 / k as f64; k])?;
            if audit.measured > audit.bound {
                violations += 1;
            }
        }
        push(
            "log-barrier-regret",
            violations == 0,
            format!("{n} sequences, {violations} violations"),
        );
    }

    // Oracle equivalence.
    {
        let (max_rel, n) = oracle_check_core(200 * scale, 21);
        push(
            "oracle-equivalence",
            max_rel <= 1e-10,
            format!("{n} instances, max rel err {max_rel:.2e}"),
        );
    }

    // Effective-dimension trace bound (one spectrum per decay family).
    {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let dist = ContextDistribution::uniform(Support::unit(1));
        let policy = |x: &[f64]| {
            let p0 = 0.3 + 0.4 * x[0];
            vec![p0, 1.0 - p0]
        };
        let n = 100_000 * scale;
        let mut ok = true;
        let mut detail = Vec::new();
        for (profile, d) in [
            (DecayProfile::exponential(1.0, 1.0)?, 28usize),
            (DecayProfile::polynomial(1.0, 2.0)?, 48),
        ] {
            let kernel = MercerKernel::from_profile(profile, d, Support::unit(1))?;
            let sigma = sigma_estimate(&kernel, &dist, &policy, 0, n, &mut rng)?;
            for m in [4u32, 16] {
                let trace = effective_dim_trace(&sigma.mean, m + 1)?;
                let allowance = sigma.trace_allowance(m + 1);
                let mut worst = f64::INFINITY;
                for eps in [1.0, 0.1, 0.01, 1e-3, 1e-4] {
                    let bound = kernel.truncation_index(eps)? as f64
                        + (m as f64 + 1.0) * eps
                        + 3.0 * allowance;
                    worst = worst.min(bound - trace);
                }
                ok &= worst >= 0.0;
                detail.push(format!("{profile} M={m}: min margin {worst:.3}"));
            }
        }
        push("trace-bound", ok, detail.join("; "));
    }

    // Estimator bias and second moment on the fixed K=2, D=8 instance.
    {
        let kernel =
            MercerKernel::from_profile(DecayProfile::exponential(1.0, 0.5)?, 8, Support::unit(1))?;
        let dist = ContextDistribution::uniform(Support::unit(1));
        let d = kernel.feature_dim().unwrap();
        let mut lrng = ChaCha12Rng::seed_from_u64(60);
        let losses: Vec<LossFunction> = (0..2)
            .map(|_| {
                let raw: Vec<f64> = (0..d).map(|_| lrng.random::<f64>() * 2.0 - 1.0).collect();
                let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                LossFunction::new(raw.into_iter().map(|v| v / norm).collect()).unwrap()
            })
            .collect();
        let policy = |x: &[f64]| {
            let p0 = 0.25 + 0.5 * x[0];
            vec![p0, 1.0 - p0]
        };
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let n = 10_000 * scale;
        let mut ok = true;
        let mut detail = Vec::new();
        for (beta, m) in [(0.05, 4usize), (0.2, 16)] {
            let inst = AuditInstance {
                kernel: &kernel,
                context: &dist,
                policy: &policy,
                losses: &losses,
                beta,
                m,
            };
            let audit = bias_audit(&inst, &[0.3], 0, n, &mut rng)?;
            let bias_ok = audit.empirical_bias.abs() <= audit.bias_bound + 3.0 * audit.bias_stderr;
            let excess_ok = audit.estimate_excess <= audit.excess_bound + 3.0 * audit.excess_stderr;
            let sm = second_moment_audit(&inst, 0.1, n, &mut rng)?;
            let sm_ok = sm.mean <= sm.bound + 3.0 * sm.stderr;
            ok &= bias_ok && excess_ok && sm_ok;
            detail.push(format!(
                "beta={beta} M={m}: |bias|={:.3}<={:.3}, excess={:.3}<={:.3}, 2nd moment {:.3}<={:.3}",
                audit.empirical_bias.abs(),
                audit.bias_bound,
                audit.estimate_excess,
                audit.excess_bound,
                sm.mean,
                sm.bound
            ));
        }
        push("estimator-bias", ok, detail.join("; "));
    }

    let passed = checks.iter().all(|c| c.pass);
    std::fs::create_dir_all(&args.out)?;
    let file = std::fs::File::create(args.out.join("audit.json"))?;
    serde_json::to_writer_pretty(
        std::io::BufWriter::new(file),
        &AuditReport { checks, passed },
    )?;
    println!(
        "audit report written to {}",
        args.out.join("audit.json").display()
    );
    if !passed {
        bail!("audit failed");
    }
    Ok(())
}

fn oracle_check_core(instances: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_rel = 0.0f64;
    for _ in 0..instances {
        let d = rng.random_range(1..=16);
        let rho: f64 = 0.3 + 0.65 * rng.random::<f64>();
        let mu: Vec<f64> = (1..=d).map(|j| rng.random::<f64>() * rho.powi(j)).collect();
        let kernel = MercerKernel::synthetic(mu, Support::unit(1)).unwrap();
        let k_actions = rng.random_range(1..=4);
        let m = rng.random_range(0..=8);
        let block = ResampleBlock {
            round: 0,
            context: vec![rng.random()],
            action: rng.random_range(0..k_actions),
            observed_loss: rng.random::<f64>() * 2.0 - 1.0,
            resamples: (0..m)
                .map(|_| (vec![rng.random::<f64>()], rng.random_range(0..k_actions)))
                .collect(),
        };
        let x = vec![rng.random::<f64>()];
        let action = rng.random_range(0..k_actions);
        let beta = rng.random::<f64>();
        let fast = kgr(&kernel, &x, action, &block, beta).unwrap();
        let (q, b) = oracle_kgr(&kernel, &x, action, &block, beta).unwrap();
        max_rel = max_rel.max((fast.q - q).abs() / q.abs().max(1.0));
        max_rel = max_rel.max((fast.b - b).abs() / b.abs().max(1.0));
    }
    (max_rel, instances)
}

#[derive(Serialize)]
struct OracleReport {
    instances: usize,
    seed: u64,
    max_relative_error: f64,
    tolerance: f64,
    pass: bool,
}

fn cmd_oracle_check(args: OracleArgs) -> anyhow::Result<()> {
    let (max_rel, n) = oracle_check_core(args.instances, args.seed);
    let pass = max_rel <= 1e-10;
    println!(
        "oracle-check: {} — {n} instances, max relative error {max_rel:.3e} (tolerance 1e-10)",
        if pass { "PASS" } else { "FAIL" }
    );
    if let Some(path) = args.json {
        let report = OracleReport {
            instances: n,
            seed: args.seed,
            max_relative_error: max_rel,
            tolerance: 1e-10,
            pass,
        };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &report)?;
        println!("report written to {}", path.display());
    }
    if !pass {
        bail!("oracle check failed");
    }
    Ok(())
}
