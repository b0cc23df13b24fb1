//! Kernel Geometric Resampling loss estimator.
//!
//! One round's buffer entry ([`ResampleBlock`]) stores the played
//! context/action/loss plus M resampled context-action pairs. Replaying a
//! block for a query pair (x, a) produces
//!
//!   q = ⟨φ(x), Σ̂⁺ φ(X_t)⟩,   b = β ⟨φ(x), Σ̂⁺ φ(x)⟩,
//!
//! where Σ̂⁺ = I + Σ_{k=1}^M C_k and C_k = Π_{j≤k}(I − B_j) with
//! B_j = 1{A(j)=a} φ(X(j))⊗φ(X(j)). Nothing infinite-dimensional is ever
//! materialized: the bilinear forms are computed through kernel evaluations
//! alone by maintaining the coefficient representation
//!
//!   φ(x)ᵀ C_k = φ(x)ᵀ + Σ_{i≤k} p_i φ(X(i))ᵀ,
//!   p_k = −1{A(k)=a} ( κ(x, X(k)) + Σ_{i<k} p_i κ(X(i), X(k)) ),
//!
//! which costs O(M²) kernel evaluations and O(M) memory per call. The point
//! estimate is ℓ̂(x,a) = q·ℓ_t(X_t,A_t)·1{A_t=a} − b; the indicator is applied
//! here, once, so q itself is the raw bilinear form. Estimates are never
//! clamped: the log-barrier FTRL downstream needs no range assumption.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ContextDistribution, LossFunction};
use crate::error::{Error, Result};
use crate::kernels::MercerKernel;

/// One round's buffer entry, the unit the estimator replays.
///
/// JSON-lines schema: `{"t":..,"x":[..],"a":..,"loss":..,"resamples":[[[..],a],..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResampleBlock {
    #[serde(rename = "t")]
    pub round: u64,
    #[serde(rename = "x")]
    pub context: Vec<f64>,
    #[serde(rename = "a")]
    pub action: usize,
    #[serde(rename = "loss")]
    pub observed_loss: f64,
    pub resamples: Vec<(Vec<f64>, usize)>,
}

impl ResampleBlock {
    pub fn m(&self) -> usize {
        self.resamples.len()
    }

    pub fn validate(&self, kernel: &MercerKernel) -> Result<()> {
        if !self.observed_loss.is_finite() || self.observed_loss.abs() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "observed loss {} outside [-1, 1]",
                self.observed_loss
            )));
        }
        let check = |p: &[f64]| -> Result<()> {
            if kernel.support().contains(p) {
                Ok(())
            } else {
                Err(Error::OutsideSupport {
                    point: p.to_vec(),
                    support: kernel.support().to_string(),
                })
            }
        };
        check(&self.context)?;
        for (x, _) in &self.resamples {
            check(x)?;
        }
        Ok(())
    }
}

/// Result of one KGR invocation.
///
/// `kernel_eval_count` is the number of distinct kernel evaluations performed;
/// with the per-call Gram memoization the worst case (every resample action
/// matching) is exactly (M² + 3M + 4)/2: one κ(x,X_t), one κ(x,x), M values
/// κ(x,X(k)), M values κ(X(k),X_t), and the M(M−1)/2 pairs κ(X(i),X(k)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KgrResult {
    pub q: f64,
    pub b: f64,
    pub kernel_eval_count: u64,
}

/// Worst-case kernel evaluations of one `kgr` call with M resamples.
pub fn kgr_eval_bound(m: usize) -> u64 {
    ((m * m + 3 * m + 4) / 2) as u64
}

/// Scalar access to the kernel values a block replay needs. Index k refers to
/// the k-th resample (0-based); "center" is the block's own context X_t.
trait GramSource {
    fn query_center(&mut self) -> f64;
    fn query_query(&mut self) -> f64;
    fn query_res(&mut self, k: usize) -> f64;
    fn res_res(&mut self, i: usize, k: usize) -> f64;
    fn res_center(&mut self, k: usize) -> f64;
}

/// The O(M²) coefficient recursion. Returns (q, b/β·... ) — concretely
/// (q, ⟨φ(x), Σ̂⁺ φ(x)⟩); the caller applies β.
fn kgr_recursion<G: GramSource>(
    gram: &mut G,
    resample_actions: &[usize],
    action: usize,
) -> (f64, f64) {
    let kxc = gram.query_center();
    let kxx = gram.query_query();
    // Running ⟨φ(x), C_k φ(X_t)⟩ and ⟨φ(x), C_k φ(x)⟩; C_0 = I.
    let mut q_run = kxc;
    let mut b_run = kxx;
    let mut q_total = kxc;
    let mut b_total = kxx;
    // Coefficients for the indices whose action matched; all others are zero.
    let mut active: Vec<usize> = Vec::new();
    let mut coeff: Vec<f64> = Vec::new();
    for (k, &ak) in resample_actions.iter().enumerate() {
        if ak == action {
            let mut s = gram.query_res(k);
            for (idx, &i) in active.iter().enumerate() {
                s += coeff[idx] * gram.res_res(i, k);
            }
            let pk = -s;
            q_run += pk * gram.res_center(k);
            b_run += pk * gram.query_res(k);
            active.push(k);
            coeff.push(pk);
        }
        q_total += q_run;
        b_total += b_run;
    }
    (q_total, b_total)
}

/// Memoizing Gram source over raw kernel evaluations, with an eval counter.
struct LazyGram<'a> {
    kernel: &'a MercerKernel,
    query: &'a [f64],
    block: &'a ResampleBlock,
    qc: Option<f64>,
    qq: Option<f64>,
    qres: Vec<Option<f64>>,
    rc: Vec<Option<f64>>,
    rr: Vec<Option<f64>>,
    count: u64,
}

impl<'a> LazyGram<'a> {
    fn new(kernel: &'a MercerKernel, query: &'a [f64], block: &'a ResampleBlock) -> Self {
        let m = block.m();
        LazyGram {
            kernel,
            query,
            block,
            qc: None,
            qq: None,
            qres: vec![None; m],
            rc: vec![None; m],
            rr: vec![None; m * m],
            count: 0,
        }
    }

    fn eval(&mut self, x: &[f64], y: &[f64]) -> f64 {
        self.count += 1;
        self.kernel.eval_unchecked(x, y)
    }
}

impl GramSource for LazyGram<'_> {
    fn query_center(&mut self) -> f64 {
        if let Some(v) = self.qc {
            return v;
        }
        let v = self.eval(self.query, &self.block.context);
        self.qc = Some(v);
        v
    }

    fn query_query(&mut self) -> f64 {
        if let Some(v) = self.qq {
            return v;
        }
        let v = self.eval(self.query, self.query);
        self.qq = Some(v);
        v
    }

    fn query_res(&mut self, k: usize) -> f64 {
        if let Some(v) = self.qres[k] {
            return v;
        }
        let v = self.eval(self.query, &self.block.resamples[k].0);
        self.qres[k] = Some(v);
        v
    }

    fn res_res(&mut self, i: usize, k: usize) -> f64 {
        let m = self.block.m();
        if let Some(v) = self.rr[i * m + k] {
            return v;
        }
        let v = self.eval(&self.block.resamples[i].0, &self.block.resamples[k].0);
        self.rr[i * m + k] = Some(v);
        self.rr[k * m + i] = Some(v);
        v
    }

    fn res_center(&mut self, k: usize) -> f64 {
        if let Some(v) = self.rc[k] {
            return v;
        }
        let v = self.eval(&self.block.resamples[k].0, &self.block.context);
        self.rc[k] = Some(v);
        v
    }
}

/// One KGR invocation for the query pair (x, a) against a stored block.
pub fn kgr(
    kernel: &MercerKernel,
    x: &[f64],
    action: usize,
    block: &ResampleBlock,
    beta: f64,
) -> Result<KgrResult> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    if !kernel.support().contains(x) {
        return Err(Error::OutsideSupport {
            point: x.to_vec(),
            support: kernel.support().to_string(),
        });
    }
    block.validate(kernel)?;
    let actions: Vec<usize> = block.resamples.iter().map(|(_, a)| *a).collect();
    let mut gram = LazyGram::new(kernel, x, block);
    let (q, b_norm) = kgr_recursion(&mut gram, &actions, action);
    Ok(KgrResult {
        q,
        b: beta * b_norm,
        kernel_eval_count: gram.count,
    })
}

/// ℓ̂(x,a) = q·ℓ_t(X_t,A_t)·1{A_t=a} − b. May fall outside [−1, 1].
pub fn point_estimate(
    kernel: &MercerKernel,
    x: &[f64],
    action: usize,
    block: &ResampleBlock,
    beta: f64,
) -> Result<f64> {
    let r = kgr(kernel, x, action, block, beta)?;
    let indicator = if block.action == action { 1.0 } else { 0.0 };
    Ok(r.q * block.observed_loss * indicator - r.b)
}

/// L̂(x,a) = Σ_i ℓ̂_i(x,a) over a round-ordered buffer; empty buffer gives 0.
pub fn cumulative_estimate(
    kernel: &MercerKernel,
    x: &[f64],
    action: usize,
    buffer: &[ResampleBlock],
    beta: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for block in buffer {
        total += point_estimate(kernel, x, action, block, beta)?;
    }
    Ok(total)
}

/// A query context prepared once and replayed against many blocks.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    feat: Option<Vec<f64>>,
    raw: Vec<f64>,
    k_self: f64,
}

/// A block with its internal Gram matrix precomputed, so replaying it for a
/// new query context costs only the M+1 cross evaluations.
#[derive(Debug, Clone)]
struct PreparedBlock {
    resample_actions: Vec<usize>,
    center_action: usize,
    loss: f64,
    /// points[0] = X_t, points[1..] = resample contexts.
    feats: Option<Vec<Vec<f64>>>,
    raw: Vec<Vec<f64>>,
    /// Row-major (M+1)×(M+1); entry (0,0) is unused.
    gram: Vec<f64>,
}

/// Replay engine over a growing buffer with cross-call Gram caching: each
/// block's internal Gram matrix is computed once at push time and shared by
/// every later query, which is what makes the cumulative estimates affordable
/// inside the simulation loop.
#[derive(Debug)]
pub struct BufferEvaluator<'k> {
    kernel: &'k MercerKernel,
    beta: f64,
    blocks: Vec<PreparedBlock>,
    evals: AtomicU64,
}

impl<'k> BufferEvaluator<'k> {
    pub fn new(kernel: &'k MercerKernel, beta: f64) -> Self {
        BufferEvaluator {
            kernel,
            beta,
            blocks: Vec::new(),
            evals: AtomicU64::new(0),
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total kernel evaluations performed so far (pushes and queries).
    pub fn kernel_evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    fn count(&self, n: u64) {
        self.evals.fetch_add(n, Ordering::Relaxed);
    }

    fn pair_eval(&self, blk: &PreparedBlock, i: usize, j: usize) -> f64 {
        match &blk.feats {
            Some(f) => f[i].iter().zip(&f[j]).map(|(a, b)| a * b).sum(),
            None => self.kernel.eval_unchecked(&blk.raw[i], &blk.raw[j]),
        }
    }

    pub fn push_block(&mut self, block: &ResampleBlock) -> Result<()> {
        block.validate(self.kernel)?;
        let mut raw = Vec::with_capacity(block.m() + 1);
        raw.push(block.context.clone());
        for (x, _) in &block.resamples {
            raw.push(x.clone());
        }
        let feats = if self.kernel.eigensystem().is_some() {
            Some(
                raw.iter()
                    .map(|p| self.kernel.features(p))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let n = raw.len();
        let mut blk = PreparedBlock {
            resample_actions: block.resamples.iter().map(|(_, a)| *a).collect(),
            center_action: block.action,
            loss: block.observed_loss,
            feats,
            raw,
            gram: vec![0.0; n * n],
        };
        let mut new_evals = 0u64;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.pair_eval(&blk, i, j);
                blk.gram[i * n + j] = v;
                blk.gram[j * n + i] = v;
                new_evals += 1;
            }
        }
        self.count(new_evals);
        self.blocks.push(blk);
        Ok(())
    }

    /// Featurize a query context and compute κ(x,x) once.
    pub fn prepare_query(&self, x: &[f64]) -> Result<PreparedQuery> {
        if !self.kernel.support().contains(x) {
            return Err(Error::OutsideSupport {
                point: x.to_vec(),
                support: self.kernel.support().to_string(),
            });
        }
        let feat = match self.kernel.eigensystem() {
            Some(_) => Some(self.kernel.features(x)?),
            None => None,
        };
        let k_self = match &feat {
            Some(f) => f.iter().map(|v| v * v).sum(),
            None => self.kernel.eval_unchecked(x, x),
        };
        self.count(1);
        Ok(PreparedQuery {
            feat,
            raw: x.to_vec(),
            k_self,
        })
    }

    /// ℓ̂ of block `idx` at the query, for every action; `out.len()` is the
    /// action count K.
    pub fn point_all(&self, query: &PreparedQuery, idx: usize, out: &mut [f64]) {
        let blk = &self.blocks[idx];
        let n = blk.raw.len();
        // Cross row κ(x, ·) against [X_t, X(1..M)], shared across actions.
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let v = match (&query.feat, &blk.feats) {
                (Some(qf), Some(bf)) => qf.iter().zip(&bf[i]).map(|(a, b)| a * b).sum(),
                _ => self.kernel.eval_unchecked(&query.raw, &blk.raw[i]),
            };
            row.push(v);
        }
        self.count(n as u64);
        for (a, slot) in out.iter_mut().enumerate() {
            let mut gram = RowGram {
                row: &row,
                gram: &blk.gram,
                n,
                k_self: query.k_self,
            };
            let (q, b_norm) = kgr_recursion(&mut gram, &blk.resample_actions, a);
            let indicator = if blk.center_action == a { 1.0 } else { 0.0 };
            *slot = q * blk.loss * indicator - self.beta * b_norm;
        }
    }

    /// L̂(x, a) for every action over the whole buffer.
    pub fn cumulative_all(&self, x: &[f64], k_actions: usize) -> Result<Vec<f64>> {
        let query = self.prepare_query(x)?;
        let mut acc = vec![0.0; k_actions];
        let mut per_block = vec![0.0; k_actions];
        for idx in 0..self.blocks.len() {
            self.point_all(&query, idx, &mut per_block);
            for (a, v) in acc.iter_mut().zip(&per_block) {
                *a += v;
            }
        }
        Ok(acc)
    }
}

/// Gram source over a precomputed block Gram and a query row.
struct RowGram<'a> {
    row: &'a [f64],
    gram: &'a [f64],
    n: usize,
    k_self: f64,
}

impl GramSource for RowGram<'_> {
    fn query_center(&mut self) -> f64 {
        self.row[0]
    }
    fn query_query(&mut self) -> f64 {
        self.k_self
    }
    fn query_res(&mut self, k: usize) -> f64 {
        self.row[k + 1]
    }
    fn res_res(&mut self, i: usize, k: usize) -> f64 {
        self.gram[(i + 1) * self.n + (k + 1)]
    }
    fn res_center(&mut self, k: usize) -> f64 {
        self.gram[(k + 1) * self.n]
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo audits of the estimator's bias and second moment.
// ---------------------------------------------------------------------------

/// A fixed audit scenario: context distribution, stochastic policy, per-action
/// loss vectors, and the estimator parameters.
pub struct AuditInstance<'a> {
    pub kernel: &'a MercerKernel,
    pub context: &'a ContextDistribution,
    pub policy: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub losses: &'a [LossFunction],
    pub beta: f64,
    pub m: usize,
}

impl AuditInstance<'_> {
    /// Draw one synthetic round: (X_t, A_t, resample block).
    fn draw_block<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ResampleBlock> {
        let x_t = self.context.sample(rng);
        let a_t = sample_categorical(&(self.policy)(&x_t), rng);
        let loss = self.losses[a_t].eval(self.kernel, &x_t)?;
        let resamples = (0..self.m)
            .map(|_| {
                let xk = self.context.sample(rng);
                let ak = sample_categorical(&(self.policy)(&xk), rng);
                (xk, ak)
            })
            .collect();
        Ok(ResampleBlock {
            round: 0,
            context: x_t,
            action: a_t,
            observed_loss: loss,
            resamples,
        })
    }
}

pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Outcome of a bias audit at a fixed query pair (x, a).
#[derive(Debug, Clone, Copy)]
pub struct BiasAudit {
    /// mean⟨φ(x), f̃⟩ − ⟨φ(x), f⟩.
    pub empirical_bias: f64,
    /// β·mean‖φ(x)‖²_{Σ̂⁺} + 1/(β(M+1)); +∞ when β = 0.
    pub bias_bound: f64,
    pub bias_stderr: f64,
    /// mean ℓ̂(x,a) − ℓ(x,a); the optimistic bonus keeps this below
    /// 1/(β(M+1)) in expectation.
    pub estimate_excess: f64,
    pub excess_bound: f64,
    pub excess_stderr: f64,
    pub mean_bonus_norm: f64,
    pub samples: usize,
}

/// Draw `n` independent rounds and measure the estimator's bias at (x, a)
/// against the analytic bound.
pub fn bias_audit<R: Rng + ?Sized>(
    inst: &AuditInstance<'_>,
    x: &[f64],
    action: usize,
    n: usize,
    rng: &mut R,
) -> Result<BiasAudit> {
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let truth = inst.losses[action].eval(inst.kernel, x)?;
    let mut tilde_vals = Vec::with_capacity(n);
    let mut norm_vals = Vec::with_capacity(n);
    let mut est_vals = Vec::with_capacity(n);
    for _ in 0..n {
        let block = inst.draw_block(rng)?;
        // β = 1 recovers the Σ̂⁺-norm directly; the caller's β scales it.
        let r = kgr(inst.kernel, x, action, &block, 1.0)?;
        let indicator = if block.action == action { 1.0 } else { 0.0 };
        let ell_xt = inst.losses[action].eval(inst.kernel, &block.context)?;
        let tilde = r.q * ell_xt * indicator;
        tilde_vals.push(tilde);
        norm_vals.push(r.b);
        est_vals.push(r.q * block.observed_loss * indicator - inst.beta * r.b);
    }
    let (tilde_mean, tilde_se) = mean_and_stderr(&tilde_vals);
    let (norm_mean, norm_se) = mean_and_stderr(&norm_vals);
    let (est_mean, est_se) = mean_and_stderr(&est_vals);
    let slack = if inst.beta > 0.0 {
        1.0 / (inst.beta * (inst.m as f64 + 1.0))
    } else {
        f64::INFINITY
    };
    Ok(BiasAudit {
        empirical_bias: tilde_mean - truth,
        bias_bound: inst.beta * norm_mean + slack,
        bias_stderr: tilde_se + inst.beta * norm_se,
        estimate_excess: est_mean - truth,
        excess_bound: slack,
        excess_stderr: est_se,
        mean_bonus_norm: norm_mean,
        samples: n,
    })
}

/// Outcome of a second-moment audit at decay scale ε.
#[derive(Debug, Clone, Copy)]
pub struct SecondMomentAudit {
    pub mean: f64,
    pub stderr: f64,
    /// 2K(1 + m(ε) + Mε).
    pub bound: f64,
    pub eps: f64,
    pub m_eps: usize,
}

/// Monte Carlo check of E[Σ_a π(a|X₀)⟨φ(X₀), f̃_a⟩²] against the
/// effective-dimension bound.
pub fn second_moment_audit<R: Rng + ?Sized>(
    inst: &AuditInstance<'_>,
    eps: f64,
    n: usize,
    rng: &mut R,
) -> Result<SecondMomentAudit> {
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let k_actions = inst.losses.len();
    let mut vals = Vec::with_capacity(n);
    for _ in 0..n {
        let x0 = inst.context.sample(rng);
        let probs = (inst.policy)(&x0);
        let block = inst.draw_block(rng)?;
        // Only a = A_t contributes through the indicator.
        let r = kgr(inst.kernel, &x0, block.action, &block, 0.0)?;
        let inner = r.q * block.observed_loss;
        vals.push(probs[block.action] * inner * inner);
    }
    let (mean, stderr) = mean_and_stderr(&vals);
    let m_eps = inst.kernel.truncation_index(eps)?;
    let bound = 2.0 * k_actions as f64 * (1.0 + m_eps as f64 + inst.m as f64 * eps);
    Ok(SecondMomentAudit {
        mean,
        stderr,
        bound,
        eps,
        m_eps,
    })
}

// ---------------------------------------------------------------------------
// Buffer serialization (JSON lines, one block per line).
// ---------------------------------------------------------------------------

pub fn write_buffer_jsonl(path: &std::path::Path, buffer: &[ResampleBlock]) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for block in buffer {
        serde_json::to_writer(&mut w, block)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_buffer_jsonl(path: &std::path::Path) -> Result<Vec<ResampleBlock>> {
    use std::io::BufRead;
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
