//! Follow-the-regularized-leader over the action simplex with the log-barrier
//! regularizer Ψ(p) = Σ_a ln(1/p_a).
//!
//! The per-context optimization
//!   argmin_{p ∈ Δ} ( Ψ(p) + η Σ_a p_a L_a )
//! has the stationarity characterization p_a = 1/(η L_a + λ), with λ the
//! unique root of g(λ) = Σ_a 1/(η L_a + λ) − 1 to the right of the largest
//! pole. After translating losses so min_a L_a = 0 the root lies in [1, K]:
//! the minimum-loss term alone gives 1/λ ≤ 1, and bounding every term by 1/λ
//! gives λ ≤ K. g is convex and decreasing there, so Newton from the left
//! endpoint converges monotonically; a bisection fallback guards the floor.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on the simplex-constraint residual g(λ) at the accepted root.
const G_TOL: f64 = 1e-13;

/// A point on the action simplex produced by the solver, together with the
/// dual multiplier of the normalization constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution {
    pub probs: Vec<f64>,
    pub dual_lambda: f64,
    pub kkt_residual: f64,
}

impl PolicyDistribution {
    pub fn uniform(k: usize) -> Result<Self> {
        solve_policy(&vec![0.0; k], 1.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Ψ(p) = Σ_a ln(1/p_a); +∞ on the boundary.
pub fn log_barrier(p: &[f64]) -> f64 {
    p.iter().map(|&v| -v.ln()).sum()
}

/// Solve argmin_{p ∈ Δ} ( Ψ(p) + η Σ_a p_a L_a ).
///
/// `cum_loss` entries may be arbitrarily large or negative (the KGR estimates
/// are unbounded); they only need to be finite.
pub fn solve_policy(cum_loss: &[f64], eta: f64) -> Result<PolicyDistribution> {
    let k = cum_loss.len();
    if k == 0 {
        return Err(Error::EmptyActionSet);
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must be finite and > 0, got {eta}"
        )));
    }
    if let Some(bad) = cum_loss.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("cumulative loss entry {bad}")));
    }
    if k == 1 {
        return Ok(PolicyDistribution {
            probs: vec![1.0],
            dual_lambda: 1.0 - eta * cum_loss[0],
            kkt_residual: 0.0,
        });
    }

    let min_loss = cum_loss.iter().cloned().fold(f64::INFINITY, f64::min);
    // Translated weights z_a = η(L_a − min L) ≥ 0; solve for λ̃ = λ + η·min L.
    let z: Vec<f64> = cum_loss.iter().map(|&l| eta * (l - min_loss)).collect();

    let g = |lam: f64| -> f64 { z.iter().map(|&w| 1.0 / (w + lam)).sum::<f64>() - 1.0 };
    let g_prime = |lam: f64| -> f64 {
        -z.iter()
            .map(|&w| 1.0 / ((w + lam) * (w + lam)))
            .sum::<f64>()
    };

    let (mut lo, mut hi) = (1.0f64, k as f64);
    let mut lam = lo;
    let mut g_val = g(lam);
    // Newton from the left endpoint; iterates stay left of the root because g
    // is convex, so the bracket never inverts.
    for _ in 0..128 {
        if g_val.abs() <= G_TOL {
            break;
        }
        if g_val > 0.0 {
            lo = lam;
        } else {
            hi = lam;
        }
        let step = g_val / g_prime(lam);
        let next = lam - step;
        lam = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        g_val = g(lam);
    }
    // Bisection floor for pathologically scaled inputs.
    let mut iters = 0usize;
    while g_val.abs() > G_TOL && hi - lo > f64::EPSILON * hi && iters < 256 {
        if g_val > 0.0 {
            lo = lam;
        } else {
            hi = lam;
        }
        lam = 0.5 * (lo + hi);
        g_val = g(lam);
        iters += 1;
    }
    if g_val.abs() > 1e-10 {
        return Err(Error::RootFind(g_val));
    }

    let probs: Vec<f64> = z.iter().map(|&w| 1.0 / (w + lam)).collect();
    let dual_lambda = lam - eta * min_loss;
    let kkt_residual = cum_loss
        .iter()
        .zip(&probs)
        .map(|(&l, &p)| (eta * l + dual_lambda - 1.0 / p).abs())
        .fold(0.0, f64::max);
    Ok(PolicyDistribution {
        probs,
        dual_lambda,
        kkt_residual,
    })
}

/// Categorical draw from the policy.
pub fn sample_action<R: Rng + ?Sized>(policy: &PolicyDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in policy.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    policy.probs.len() - 1
}

/// Outcome of replaying Lemma-style FTRL on a loss sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretAudit {
    pub measured: f64,
    pub bound: f64,
}

/// Replay p_t = argmin_p { η Σ_a p_a Σ_{τ≤t} c_{τ,a} + Ψ(p) } — note that the
/// round-t losses are included in p_t's own cumulative sum, the
/// "be-the-leader" indexing of the regret guarantee being audited — and
/// compare the measured regret against
///   (Ψ(y) − Ψ(p_1))/η + η Σ_t Σ_a p_{t,a} c²_{t,a}.
///
/// The comparator `y` must lie strictly inside the simplex.
pub fn regret_audit(losses: &[Vec<f64>], eta: f64, comparator: &[f64]) -> Result<RegretAudit> {
    let k = comparator.len();
    if k == 0 {
        return Err(Error::EmptyActionSet);
    }
    if comparator.iter().any(|&y| y <= 0.0 || y >= 1.0) && k > 1 {
        return Err(Error::BoundaryComparator);
    }
    if k == 1 && comparator[0] != 1.0 {
        return Err(Error::BoundaryComparator);
    }
    let psi_y = log_barrier(comparator);

    let mut cum = vec![0.0f64; k];
    let mut measured = 0.0f64;
    let mut quad = 0.0f64;
    let mut psi_p1 = log_barrier(&vec![1.0 / k as f64; k]);
    for (t, c) in losses.iter().enumerate() {
        if c.len() != k {
            return Err(Error::DimensionMismatch(c.len(), k));
        }
        for (s, &v) in cum.iter_mut().zip(c) {
            *s += v;
        }
        let p = solve_policy(&cum, eta)?;
        if t == 0 {
            psi_p1 = log_barrier(&p.probs);
        }
        for ((&pa, &ya), &ca) in p.probs.iter().zip(comparator).zip(c) {
            measured += (pa - ya) * ca;
            quad += pa * ca * ca;
        }
    }
    Ok(RegretAudit {
        measured,
        bound: (psi_y - psi_p1) / eta + eta * quad,
    })
}
