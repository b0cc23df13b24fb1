//! The main interaction loop, regret measurement, and the regret
//! decomposition diagnostic.
//!
//! Each round: observe X_t, compute L̂_{t−1}(X_t, ·) by replaying the buffer,
//! solve the log-barrier FTRL problem, draw A_t, observe the loss, draw the M
//! resample pairs (each needing its own policy solve at a fresh context), and
//! append the round's block to the buffer.
//!
//! Policies are defined pointwise: π_t(·|x) at any context x is the solver
//! applied to the same cumulative estimates evaluated at x, which is exactly
//! what the resampling step queries at the fresh contexts X(k).
//!
//! Contexts that recur (finite support, held-out evaluation points) keep
//! incrementally maintained cumulative estimates, so discrete-support runs
//! cost O(T·M²) instead of O(T²·M³); fresh contexts fall back to a full
//! buffer replay.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{resolve_schedule, ExperimentConfig, ResolvedParams};
use crate::env::{HistoryEntry, LossFunction};
use crate::error::{Error, Result};
use crate::estimator::{BufferEvaluator, PreparedQuery, ResampleBlock};
use crate::ftrl::{sample_action, solve_policy};
use crate::rng::{round_rng, stream_rng, SeedSpec, Stream};

/// Per-round trajectory entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub x: Vec<f64>,
    pub a: usize,
    pub loss: f64,
    /// π_t(·|X_t) used to draw the action.
    pub probs: Vec<f64>,
}

/// One row of the regret curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub t: u64,
    pub cum_regret: f64,
    pub stderr: f64,
}

/// Evaluation-context data kept in memory for post-run measurement: the
/// points, their weights (exact support weights or 1/n for Monte Carlo
/// draws), and π_t at each point for every round.
#[derive(Debug, Clone)]
pub struct EvalData {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// True when the points enumerate a finite context support exactly.
    pub exact: bool,
    /// probs[t][j] = π_{t+1}(·|points[j]).
    pub probs: Vec<Vec<Vec<f64>>>,
}

/// Monte Carlo estimates of the three regret-decomposition terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompDiag {
    pub r_tilde: f64,
    pub r_tilde_se: f64,
    pub b_star: f64,
    pub b_star_se: f64,
    pub b_under: f64,
    pub b_under_se: f64,
    /// R̃ + B* + B and its Monte Carlo standard error over the X₀ draws.
    pub sum: f64,
    pub sum_se: f64,
    /// Final measured regret of the run the diagnostic replays.
    pub regret_reference: f64,
    /// Estimated standard deviation of the measured regret around its
    /// context-distribution expectation.
    pub context_noise_se: f64,
    /// sqrt(sum_se² + context_noise_se²): the yardstick for sum vs. regret.
    pub combined_se: f64,
    pub n_eval: usize,
}

/// Full trajectory of one simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub resolved: ResolvedParams,
    pub seeds: SeedSpec,
    pub rounds: Vec<RoundLog>,
    /// loss_coeffs[t][a] = f_{t+1,a}; the replayable loss sequence.
    pub loss_coeffs: Vec<Vec<LossFunction>>,
    pub regret_curve: Vec<CheckpointRow>,
    pub round_kernel_evals: Vec<u64>,
    /// Evaluations spent preparing the tracked query contexts before round 1.
    pub setup_kernel_evals: u64,
    /// Grand total; equals setup plus the sum of the per-round counters.
    pub kernel_evals: u64,
    pub incomplete: bool,
    pub diagnostics: Option<DecompDiag>,
    /// Raw buffer; serialized separately as buffer.jsonl, never in run.json.
    #[serde(skip)]
    pub buffer: Vec<ResampleBlock>,
    #[serde(skip)]
    pub eval_data: Option<EvalData>,
    /// Wall-clock fields stay out of the serialized record so repeated runs
    /// produce byte-identical files.
    #[serde(skip)]
    pub wall_secs: f64,
    #[serde(skip)]
    pub round_wall_secs: Vec<f64>,
}

/// Incrementally maintained cumulative estimates L̂(x, ·) for a set of
/// tracked contexts.
struct EstimateTable {
    points: Vec<Vec<f64>>,
    queries: Vec<PreparedQuery>,
    lhat: Vec<Vec<f64>>,
    k_actions: usize,
}

impl EstimateTable {
    fn new(k_actions: usize) -> Self {
        EstimateTable {
            points: Vec::new(),
            queries: Vec::new(),
            lhat: Vec::new(),
            k_actions,
        }
    }

    fn find(&self, x: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == x)
    }

    fn track(&mut self, x: &[f64], evaluator: &BufferEvaluator<'_>) -> Result<usize> {
        if let Some(i) = self.find(x) {
            return Ok(i);
        }
        debug_assert_eq!(
            evaluator.n_blocks(),
            0,
            "tracking must happen before the run"
        );
        self.points.push(x.to_vec());
        self.queries.push(evaluator.prepare_query(x)?);
        self.lhat.push(vec![0.0; self.k_actions]);
        Ok(self.points.len() - 1)
    }

    /// Fold the newest block into every tracked estimate.
    fn absorb_block(&mut self, evaluator: &BufferEvaluator<'_>, block_idx: usize) {
        let mut row = vec![0.0; self.k_actions];
        for (query, lhat) in self.queries.iter().zip(self.lhat.iter_mut()) {
            evaluator.point_all(query, block_idx, &mut row);
            for (acc, v) in lhat.iter_mut().zip(&row) {
                *acc += v;
            }
        }
    }
}

/// Power-of-two checkpoints plus the endpoint.
pub fn checkpoints(t_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut c = 1u64;
    while c < t_max {
        out.push(c);
        c *= 2;
    }
    if t_max >= 1 {
        out.push(t_max);
    }
    out
}

/// Execute one experiment. Fully deterministic given the config's seeds.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let kernel = config.kernel.build()?;
    if kernel.eigensystem().is_none() {
        return Err(Error::NoEigensystem);
    }
    let context = config.context.build(&kernel)?;
    let seeds = config.seeds.resolve();
    let resolved = resolve_schedule(config, &kernel)?;
    let k_actions = config.actions;
    let feature_dim = kernel.feature_dim().expect("checked above");

    let adversary = config.adversary.build(
        feature_dim,
        k_actions,
        config.horizon,
        &mut stream_rng(&seeds, Stream::Adversary),
    )?;

    let mut evaluator = BufferEvaluator::new(&kernel, resolved.beta);
    let mut table = EstimateTable::new(k_actions);

    // Evaluation points: the exact finite support when there is one,
    // otherwise held-out Monte Carlo draws. Both are tracked incrementally.
    let (eval_points, eval_weights, eval_exact) = match context.support_points() {
        Some((pts, ws)) => (pts.to_vec(), ws.to_vec(), true),
        None => {
            let mut rng = round_rng(&seeds, Stream::Eval, 0);
            let n = config.eval_contexts;
            let pts: Vec<Vec<f64>> = (0..n).map(|_| context.sample(&mut rng)).collect();
            (pts, vec![1.0 / n as f64; n], false)
        }
    };
    let eval_idx: Vec<usize> = eval_points
        .iter()
        .map(|p| table.track(p, &evaluator))
        .collect::<Result<Vec<_>>>()?;
    let setup_kernel_evals = evaluator.kernel_evals();

    let start = Instant::now();
    let mut rounds: Vec<RoundLog> = Vec::new();
    let mut loss_coeffs: Vec<Vec<LossFunction>> = Vec::new();
    let mut buffer: Vec<ResampleBlock> = Vec::new();
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut eval_probs: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut round_kernel_evals: Vec<u64> = Vec::new();
    let mut round_wall_secs: Vec<f64> = Vec::new();
    let mut incomplete = false;
    let mut evals_before = evaluator.kernel_evals();

    for t in 1..=config.horizon {
        let round_start = Instant::now();

        let mut ctx_rng = round_rng(&seeds, Stream::Context, t);
        let x_t = context.sample(&mut ctx_rng);

        // Losses are chosen without seeing X_t.
        let losses_t = adversary.round_losses(t, &history, &kernel)?;

        let policy_at = |lhat: &[f64]| -> Result<crate::ftrl::PolicyDistribution> {
            if config.uniform_policy {
                crate::ftrl::PolicyDistribution::uniform(k_actions)
            } else {
                solve_policy(lhat, resolved.eta)
            }
        };

        let lhat_xt = match table.find(&x_t) {
            Some(i) => table.lhat[i].clone(),
            None => evaluator.cumulative_all(&x_t, k_actions)?,
        };
        let pi_t = policy_at(&lhat_xt)?;
        let mut pol_rng = round_rng(&seeds, Stream::Policy, t);
        let a_t = sample_action(&pi_t, &mut pol_rng);
        let loss_obs = losses_t[a_t].eval(&kernel, &x_t)?;

        let mut res_rng = round_rng(&seeds, Stream::Resample, t);
        let mut resamples = Vec::with_capacity(resolved.m);
        for _ in 0..resolved.m {
            let xk = context.sample(&mut res_rng);
            let lhat_k = match table.find(&xk) {
                Some(i) => table.lhat[i].clone(),
                None => evaluator.cumulative_all(&xk, k_actions)?,
            };
            let pi_k = policy_at(&lhat_k)?;
            let ak = sample_action(&pi_k, &mut res_rng);
            resamples.push((xk, ak));
        }

        // π_t at the evaluation points, before the buffer absorbs round t.
        let probs_row: Vec<Vec<f64>> = eval_idx
            .iter()
            .map(|&i| policy_at(&table.lhat[i]).map(|p| p.probs))
            .collect::<Result<Vec<_>>>()?;

        let block = ResampleBlock {
            round: t,
            context: x_t.clone(),
            action: a_t,
            observed_loss: loss_obs,
            resamples,
        };
        evaluator.push_block(&block)?;
        table.absorb_block(&evaluator, evaluator.n_blocks() - 1);
        buffer.push(block);
        history.push(HistoryEntry {
            context: x_t.clone(),
            action: a_t,
            loss: loss_obs,
        });
        rounds.push(RoundLog {
            x: x_t,
            a: a_t,
            loss: loss_obs,
            probs: pi_t.probs,
        });
        loss_coeffs.push(losses_t);
        eval_probs.push(probs_row);

        let evals_now = evaluator.kernel_evals();
        round_kernel_evals.push(evals_now - evals_before);
        evals_before = evals_now;
        round_wall_secs.push(round_start.elapsed().as_secs_f64());

        if let Some(cap) = config.wall_clock_cap_secs {
            if start.elapsed().as_secs_f64() > cap && t < config.horizon {
                incomplete = true;
                break;
            }
        }
    }

    let mut record = RunRecord {
        config: config.clone(),
        resolved,
        seeds,
        rounds,
        loss_coeffs,
        regret_curve: Vec::new(),
        round_kernel_evals,
        setup_kernel_evals,
        kernel_evals: evaluator.kernel_evals(),
        incomplete,
        diagnostics: None,
        buffer,
        eval_data: Some(EvalData {
            points: eval_points,
            weights: eval_weights,
            exact: eval_exact,
            probs: eval_probs,
        }),
        wall_secs: start.elapsed().as_secs_f64(),
        round_wall_secs,
    };
    record.regret_curve = empirical_regret(&record)?;
    Ok(record)
}

/// Per-action cumulative loss coefficient totals; π* follows by argmin.
fn comparator_totals(record: &RunRecord, dim: usize) -> Vec<Vec<f64>> {
    let k = record.config.actions;
    let mut totals = vec![vec![0.0f64; dim]; k];
    for round in &record.loss_coeffs {
        for (acc, f) in totals.iter_mut().zip(round) {
            for (s, c) in acc.iter_mut().zip(&f.coeffs) {
                *s += c;
            }
        }
    }
    totals
}

/// π*(x): argmin over actions of the total loss at x, ties to the smallest
/// action index.
fn argmin_action(totals: &[Vec<f64>], phi: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_val = f64::INFINITY;
    for (a, coeffs) in totals.iter().enumerate() {
        let v: f64 = coeffs.iter().zip(phi).map(|(c, p)| c * p).sum();
        if v < best_val {
            best_val = v;
            best = a;
        }
    }
    best
}

/// The cumulative-regret curve of a run, measured in conditional expectation
/// over the learner's action draw.
///
/// Finite-support runs report the realized-context curve exactly (π* computed
/// per support point; stderr is the exact context-draw standard deviation).
/// Continuous runs report the Monte Carlo estimate over the held-out
/// evaluation contexts with its standard error. Deserialized records without
/// in-memory evaluation data fall back to the realized-context curve with
/// stderr 0.
pub fn empirical_regret(record: &RunRecord) -> Result<Vec<CheckpointRow>> {
    let kernel = record.config.kernel.build()?;
    let dim = kernel.feature_dim().ok_or(Error::NoEigensystem)?;
    let t_total = record.rounds.len();
    if record.loss_coeffs.len() != t_total {
        return Err(Error::MissingReplay(format!(
            "{} loss rows for {} rounds",
            record.loss_coeffs.len(),
            t_total
        )));
    }
    let totals = comparator_totals(record, dim);
    let cps = checkpoints(t_total as u64);

    let eval = record.eval_data.as_ref();
    match eval {
        Some(data) if !data.exact => {
            // Monte Carlo over the held-out evaluation points.
            let n = data.points.len();
            let phis: Vec<Vec<f64>> = data
                .points
                .iter()
                .map(|p| kernel.features(p))
                .collect::<Result<_>>()?;
            let stars: Vec<usize> = phis.iter().map(|phi| argmin_action(&totals, phi)).collect();
            let mut per_point_cum = vec![0.0f64; n];
            let mut out = Vec::new();
            let mut cp_iter = cps.iter().peekable();
            for t in 0..t_total {
                for j in 0..n {
                    let losses: Vec<f64> = record.loss_coeffs[t]
                        .iter()
                        .map(|f| f.dot(&phis[j]))
                        .collect();
                    let expected: f64 = data.probs[t][j]
                        .iter()
                        .zip(&losses)
                        .map(|(p, l)| p * l)
                        .sum();
                    per_point_cum[j] += expected - losses[stars[j]];
                }
                while let Some(&&cp) = cp_iter.peek() {
                    if cp != (t + 1) as u64 {
                        break;
                    }
                    let mean = per_point_cum.iter().sum::<f64>() / n as f64;
                    let var = per_point_cum
                        .iter()
                        .map(|v| (v - mean) * (v - mean))
                        .sum::<f64>()
                        / (n as f64 - 1.0).max(1.0);
                    out.push(CheckpointRow {
                        t: cp,
                        cum_regret: mean,
                        stderr: (var / n as f64).sqrt(),
                    });
                    cp_iter.next();
                }
            }
            Ok(out)
        }
        _ => {
            // Realized contexts with stored policy probabilities.
            let exact_eval = eval.filter(|d| d.exact);
            let eval_phis: Option<Vec<Vec<f64>>> = match exact_eval {
                Some(d) => Some(
                    d.points
                        .iter()
                        .map(|p| kernel.features(p))
                        .collect::<Result<_>>()?,
                ),
                None => None,
            };
            let mut cum = 0.0f64;
            let mut var_acc = 0.0f64;
            let mut out = Vec::new();
            let mut cp_iter = cps.iter().peekable();
            for t in 0..t_total {
                let round = &record.rounds[t];
                let phi = kernel.features(&round.x)?;
                let losses: Vec<f64> = record.loss_coeffs[t].iter().map(|f| f.dot(&phi)).collect();
                let star = argmin_action(&totals, &phi);
                let expected: f64 = round.probs.iter().zip(&losses).map(|(p, l)| p * l).sum();
                cum += expected - losses[star];

                if let (Some(data), Some(phis)) = (exact_eval, eval_phis.as_ref()) {
                    // Exact per-round variance of the conditional regret over
                    // the context distribution.
                    let g: Vec<f64> = phis
                        .iter()
                        .enumerate()
                        .map(|(j, phij)| {
                            let lj: Vec<f64> =
                                record.loss_coeffs[t].iter().map(|f| f.dot(phij)).collect();
                            let e: f64 = data.probs[t][j].iter().zip(&lj).map(|(p, l)| p * l).sum();
                            e - lj[argmin_action(&totals, phij)]
                        })
                        .collect();
                    let mean: f64 = g.iter().zip(&data.weights).map(|(v, w)| v * w).sum();
                    let var: f64 = g
                        .iter()
                        .zip(&data.weights)
                        .map(|(v, w)| w * (v - mean) * (v - mean))
                        .sum();
                    var_acc += var;
                }

                while let Some(&&cp) = cp_iter.peek() {
                    if cp != (t + 1) as u64 {
                        break;
                    }
                    out.push(CheckpointRow {
                        t: cp,
                        cum_regret: cum,
                        stderr: var_acc.sqrt(),
                    });
                    cp_iter.next();
                }
            }
            Ok(out)
        }
    }
}

/// Monte Carlo estimates of R̃, B*, and B over `n_eval` fresh context draws,
/// replaying the stored buffer. The three estimates use the same draws, so
/// their sum telescopes to a direct estimate of the expected regret.
pub fn decomposition_diagnostic(
    record: &RunRecord,
    n_eval: usize,
    seed: u64,
) -> Result<DecompDiag> {
    if n_eval < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: n_eval,
        });
    }
    let t_total = record.rounds.len();
    if record.buffer.len() != t_total {
        return Err(Error::MissingReplay(
            "diagnostic needs the in-memory buffer".into(),
        ));
    }
    let kernel = record.config.kernel.build()?;
    let dim = kernel.feature_dim().ok_or(Error::NoEigensystem)?;
    let context = record.config.context.build(&kernel)?;
    let k_actions = record.config.actions;
    let totals = comparator_totals(record, dim);

    let mut evaluator = BufferEvaluator::new(&kernel, record.resolved.beta);
    for block in &record.buffer {
        evaluator.push_block(block)?;
    }

    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    use rand::SeedableRng;
    let draws: Vec<Vec<f64>> = (0..n_eval).map(|_| context.sample(&mut rng)).collect();

    // Replay each distinct draw once.
    let mut uniq: Vec<(Vec<f64>, usize)> = Vec::new();
    for d in &draws {
        match uniq.iter_mut().find(|(p, _)| p == d) {
            Some((_, c)) => *c += 1,
            None => uniq.push((d.clone(), 1)),
        }
    }

    struct PointStats {
        r_tilde: f64,
        b_star: f64,
        b_under: f64,
        g: Vec<f64>,
    }

    let mut per_point = Vec::with_capacity(uniq.len());
    for (x0, _) in &uniq {
        let query = evaluator.prepare_query(x0)?;
        let phi = kernel.features(x0)?;
        let star = argmin_action(&totals, &phi);
        let mut lhat = vec![0.0f64; k_actions];
        let mut est_row = vec![0.0f64; k_actions];
        let mut stats = PointStats {
            r_tilde: 0.0,
            b_star: 0.0,
            b_under: 0.0,
            g: Vec::with_capacity(t_total),
        };
        for t in 0..t_total {
            let pi_t = if record.config.uniform_policy {
                crate::ftrl::PolicyDistribution::uniform(k_actions)?
            } else {
                solve_policy(&lhat, record.resolved.eta)?
            };
            evaluator.point_all(&query, t, &mut est_row);
            let losses: Vec<f64> = record.loss_coeffs[t].iter().map(|f| f.dot(&phi)).collect();
            let mut g_t = 0.0;
            for a in 0..k_actions {
                let star_ind = if a == star { 1.0 } else { 0.0 };
                stats.r_tilde += (pi_t.probs[a] - star_ind) * est_row[a];
                stats.b_star += star_ind * (est_row[a] - losses[a]);
                stats.b_under += pi_t.probs[a] * (losses[a] - est_row[a]);
                g_t += pi_t.probs[a] * losses[a];
            }
            g_t -= losses[star];
            stats.g.push(g_t);
            for (acc, v) in lhat.iter_mut().zip(&est_row) {
                *acc += v;
            }
        }
        per_point.push(stats);
    }

    // Expand by multiplicity for draw-level statistics.
    let mut rt = Vec::with_capacity(n_eval);
    let mut bs = Vec::with_capacity(n_eval);
    let mut bu = Vec::with_capacity(n_eval);
    let mut sums = Vec::with_capacity(n_eval);
    let mut g_rounds = vec![Vec::with_capacity(n_eval); t_total];
    for ((_, count), stats) in uniq.iter().zip(&per_point) {
        for _ in 0..*count {
            rt.push(stats.r_tilde);
            bs.push(stats.b_star);
            bu.push(stats.b_under);
            sums.push(stats.r_tilde + stats.b_star + stats.b_under);
            for (t, g) in stats.g.iter().enumerate() {
                g_rounds[t].push(*g);
            }
        }
    }

    let mean_se = |vals: &[f64]| -> (f64, f64) {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    let (r_tilde, r_tilde_se) = mean_se(&rt);
    let (b_star, b_star_se) = mean_se(&bs);
    let (b_under, b_under_se) = mean_se(&bu);
    let (sum, sum_se) = mean_se(&sums);

    let context_noise_var: f64 = g_rounds
        .iter()
        .map(|vals| {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        })
        .sum();
    let context_noise_se = context_noise_var.sqrt();

    let regret_reference = record
        .regret_curve
        .last()
        .map(|c| c.cum_regret)
        .unwrap_or(0.0);
    Ok(DecompDiag {
        r_tilde,
        r_tilde_se,
        b_star,
        b_star_se,
        b_under,
        b_under_se,
        sum,
        sum_se,
        regret_reference,
        context_noise_se,
        combined_se: (sum_se * sum_se + context_noise_se * context_noise_se).sqrt(),
        n_eval,
    })
}

/// Least-squares slope of log regret against log horizon. Non-positive
/// regrets are dropped; at least three surviving points are required.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|&(t, r)| (t.ln(), r.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: logs.len(),
        });
    }
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let cov: f64 = logs.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let var: f64 = logs.iter().map(|(x, _)| (x - mean_x) * (x - mean_x)).sum();
    Ok(cov / var)
}

/// Format a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write run.json, regret.csv, and optionally buffer.jsonl / diag.json into
/// `out_dir`.
pub fn write_run_outputs(
    record: &RunRecord,
    out_dir: &std::path::Path,
    emit_buffer: bool,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let file = std::fs::File::create(out_dir.join("run.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), record)?;

    let mut csv = String::from("T_checkpoint,cum_regret,stderr\n");
    for row in &record.regret_curve {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.t,
            fmt17(row.cum_regret),
            fmt17(row.stderr)
        ));
    }
    std::fs::write(out_dir.join("regret.csv"), csv)?;

    if emit_buffer {
        crate::estimator::write_buffer_jsonl(&out_dir.join("buffer.jsonl"), &record.buffer)?;
    }
    if let Some(diag) = &record.diagnostics {
        let file = std::fs::File::create(out_dir.join("diag.json"))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), diag)?;
    }
    Ok(())
}
