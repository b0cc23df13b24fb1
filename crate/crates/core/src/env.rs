//! Context distributions and adversarial loss generators.
//!
//! Loss functions live in the kernel's RKHS: ℓ(x,a) = ⟨f_a, φ(x)⟩ with
//! ‖f_a‖₂ ≤ 1, stored directly as the coordinates of f in the √μ_j ψ_j basis.
//! Together with ‖φ(x)‖₂ ≤ 1 this keeps every loss in [−1, 1].

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{MercerKernel, Support};

/// Sampling access to the context distribution D.
#[derive(Debug, Clone, PartialEq)]
pub enum ContextDistribution {
    /// Uniform on the support box.
    UniformBox { support: Support },
    /// Finite support with explicit weights; makes π* exactly computable.
    Discrete {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

impl ContextDistribution {
    pub fn uniform(support: Support) -> Self {
        ContextDistribution::UniformBox { support }
    }

    /// `n` equally weighted points spaced along the main diagonal of the box,
    /// offset by half a cell.
    pub fn grid(n: usize, support: Support) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one point".into(),
            ));
        }
        let points = (0..n)
            .map(|i| {
                let v = support.lo + (support.hi - support.lo) * (i as f64 + 0.5) / n as f64;
                vec![v; support.dim]
            })
            .collect();
        Ok(ContextDistribution::Discrete {
            points,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn discrete(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "discrete distribution needs matching nonempty points and weights".into(),
            ));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and >= 0".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter(
                "weights must not all be zero".into(),
            ));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(ContextDistribution::Discrete { points, weights })
    }

    /// i.i.d. draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ContextDistribution::UniformBox { support } => (0..support.dim)
                .map(|_| support.lo + (support.hi - support.lo) * rng.random::<f64>())
                .collect(),
            ContextDistribution::Discrete { points, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (p, &w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return p.clone();
                    }
                }
                points.last().expect("nonempty").clone()
            }
        }
    }

    /// Finite support, when the distribution has one.
    pub fn support_points(&self) -> Option<(&[Vec<f64>], &[f64])> {
        match self {
            ContextDistribution::Discrete { points, weights } => Some((points, weights)),
            ContextDistribution::UniformBox { .. } => None,
        }
    }

    /// Every point this distribution can emit lies in the kernel support.
    pub fn validate_against(&self, kernel: &MercerKernel) -> Result<()> {
        match self {
            ContextDistribution::UniformBox { support } => {
                let ks = kernel.support();
                if support.dim == ks.dim && support.lo >= ks.lo && support.hi <= ks.hi {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "context box {support} not contained in kernel support {ks}"
                    )))
                }
            }
            ContextDistribution::Discrete { points, .. } => {
                for p in points {
                    if !kernel.support().contains(p) {
                        return Err(Error::OutsideSupport {
                            point: p.clone(),
                            support: kernel.support().to_string(),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// An RKHS loss function: coordinates of f in the feature basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossFunction {
    pub coeffs: Vec<f64>,
}

impl LossFunction {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let norm = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("loss coefficient vector".into()));
        }
        if norm > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "loss function norm {norm} exceeds 1"
            )));
        }
        Ok(LossFunction { coeffs })
    }

    /// Rescale onto the unit ball if the norm exceeds 1.
    pub fn projected(mut coeffs: Vec<f64>) -> Self {
        let norm = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 {
            for v in &mut coeffs {
                *v /= norm;
            }
        }
        LossFunction { coeffs }
    }

    pub fn zero(dim: usize) -> Self {
        LossFunction {
            coeffs: vec![0.0; dim],
        }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// ℓ(x) = ⟨f, φ(x)⟩.
    pub fn eval(&self, kernel: &MercerKernel, x: &[f64]) -> Result<f64> {
        let phi = kernel.features(x)?;
        if phi.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch(phi.len(), self.coeffs.len()));
        }
        Ok(self.coeffs.iter().zip(&phi).map(|(a, b)| a * b).sum())
    }

    /// ⟨f, v⟩ against a raw feature vector.
    pub fn dot(&self, phi: &[f64]) -> f64 {
        self.coeffs.iter().zip(phi).map(|(a, b)| a * b).sum()
    }
}

/// Public interaction record visible to an adaptive adversary: the learner's
/// internal randomness is never exposed.
#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub context: Vec<f64>,
    pub action: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    Fixed,
    ObliviousSequence,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryParams {
    /// Step size of the oblivious random walk.
    pub drift: f64,
}

impl Default for AdversaryParams {
    fn default() -> Self {
        AdversaryParams { drift: 0.0 }
    }
}

/// Per-round generator of K loss functions.
#[derive(Debug, Clone)]
pub struct Adversary {
    kind: AdversaryKind,
    k_actions: usize,
    base: Vec<LossFunction>,
    sequence: Vec<Vec<LossFunction>>,
}

/// Uniform draw from the unit ball: spherical gaussian direction with radius
/// u^{1/D}.
fn unit_ball_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    let radius: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
    for x in &mut v {
        *x *= radius / norm;
    }
    v
}

impl Adversary {
    /// Fixed adversary with all-zero loss functions.
    pub fn zero(feature_dim: usize, k_actions: usize) -> Self {
        Adversary {
            kind: AdversaryKind::Fixed,
            k_actions,
            base: vec![LossFunction::zero(feature_dim); k_actions],
            sequence: Vec::new(),
        }
    }

    /// Build an adversary over `feature_dim` loss coordinates. The horizon is
    /// required by `ObliviousSequence` (its walk is pre-drawn) and ignored by
    /// the other kinds.
    pub fn new<R: Rng + ?Sized>(
        kind: AdversaryKind,
        feature_dim: usize,
        k_actions: usize,
        horizon: u64,
        params: AdversaryParams,
        rng: &mut R,
    ) -> Result<Self> {
        if k_actions == 0 {
            return Err(Error::EmptyActionSet);
        }
        if !params.drift.is_finite() || params.drift < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "drift must be >= 0, got {}",
                params.drift
            )));
        }
        let base: Vec<LossFunction> = (0..k_actions)
            .map(|_| LossFunction::projected(unit_ball_vector(rng, feature_dim)))
            .collect();
        let sequence = match kind {
            AdversaryKind::ObliviousSequence => {
                let mut seq = Vec::with_capacity(horizon as usize);
                let mut current = base.clone();
                for _ in 0..horizon {
                    seq.push(current.clone());
                    let scale = params.drift / (feature_dim as f64).sqrt();
                    for f in &mut current {
                        let coeffs: Vec<f64> = f
                            .coeffs
                            .iter()
                            .map(|&v| {
                                let step: f64 = StandardNormal.sample(rng);
                                v + scale * step
                            })
                            .collect();
                        *f = LossFunction::projected(coeffs);
                    }
                }
                seq
            }
            _ => Vec::new(),
        };
        Ok(Adversary {
            kind,
            k_actions,
            base,
            sequence,
        })
    }

    pub fn kind(&self) -> AdversaryKind {
        self.kind
    }

    /// Loss functions for round `t` (1-based). Deterministic in
    /// (construction seed, history); repeated queries at the same round with
    /// the same history return identical functions. An adaptive adversary sees
    /// only F_{t−1}, never the current context.
    pub fn round_losses(
        &self,
        t: u64,
        history: &[HistoryEntry],
        kernel: &MercerKernel,
    ) -> Result<Vec<LossFunction>> {
        match self.kind {
            AdversaryKind::Fixed => Ok(self.base.clone()),
            AdversaryKind::ObliviousSequence => {
                let idx = (t as usize)
                    .checked_sub(1)
                    .filter(|&i| i < self.sequence.len())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!("round {t} outside pre-drawn horizon"))
                    })?;
                Ok(self.sequence[idx].clone())
            }
            AdversaryKind::Adaptive => {
                let mut losses = self.base.clone();
                if history.is_empty() {
                    return Ok(losses);
                }
                // Aim at the empirically most-played action: the unit vector
                // maximizing the average loss over the contexts seen so far.
                let mut counts = vec![0usize; self.k_actions];
                for h in history {
                    if h.action < self.k_actions {
                        counts[h.action] += 1;
                    }
                }
                let target = counts
                    .iter()
                    .enumerate()
                    .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                let dim = losses[0].coeffs.len();
                let mut mean_phi = vec![0.0f64; dim];
                for h in history {
                    let phi = kernel.features(&h.context)?;
                    for (m, p) in mean_phi.iter_mut().zip(&phi) {
                        *m += p;
                    }
                }
                let norm = mean_phi.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for v in &mut mean_phi {
                        *v /= norm;
                    }
                    losses[target] = LossFunction { coeffs: mean_phi };
                }
                Ok(losses)
            }
        }
    }
}

/// Write a full loss sequence (rounds × actions) as JSON for exact replay.
pub fn export_losses(path: &std::path::Path, losses: &[Vec<LossFunction>]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(file), losses)?;
    Ok(())
}

pub fn import_losses(path: &std::path::Path) -> Result<Vec<Vec<LossFunction>>> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DecayProfile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn test_kernel() -> MercerKernel {
        MercerKernel::synthetic(vec![0.5, 0.25], Support::unit(1)).unwrap()
    }

    #[test]
    fn zero_loss_function_is_zero_everywhere() {
        let k = test_kernel();
        let f = LossFunction::zero(2);
        for x in [[0.0], [0.3], [1.0]] {
            assert_eq!(f.eval(&k, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn cauchy_schwarz_equality_case() {
        let k = test_kernel();
        let x0 = [0.37];
        let phi = k.features(&x0).unwrap();
        let norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let f = LossFunction::new(phi.iter().map(|v| v / norm).collect()).unwrap();
        assert!((f.eval(&k, &x0).unwrap() - norm).abs() <= 1e-14);
    }

    #[test]
    fn loss_value_from_direct_arithmetic() {
        // 0.6·√0.5 + 0.8·0.5 at x = 0.
        let k = test_kernel();
        let f = LossFunction::new(vec![0.6, 0.8]).unwrap();
        let expected = 0.6 * 0.5f64.sqrt() + 0.8 * 0.5;
        let got = f.eval(&k, &[0.0]).unwrap();
        assert!((got - expected).abs() <= 1e-15);
        assert!((got - 0.82426).abs() < 1e-5);
    }

    #[test]
    fn losses_bounded_by_one_across_adversaries() {
        let k = MercerKernel::from_profile(
            DecayProfile::exponential(1.0, 0.5).unwrap(),
            32,
            Support::unit(1),
        )
        .unwrap();
        let d = k.feature_dim().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for kind in [
            AdversaryKind::Fixed,
            AdversaryKind::ObliviousSequence,
            AdversaryKind::Adaptive,
        ] {
            let adv =
                Adversary::new(kind, d, 3, 50, AdversaryParams { drift: 0.3 }, &mut rng).unwrap();
            let history = vec![HistoryEntry {
                context: vec![0.5],
                action: 1,
                loss: 0.2,
            }];
            for t in 1..=50 {
                let losses = adv.round_losses(t, &history, &k).unwrap();
                for f in &losses {
                    assert!(f.norm() <= 1.0 + 1e-12);
                    for _ in 0..20 {
                        let x = [rng.random::<f64>()];
                        assert!(f.eval(&k, &x).unwrap().abs() <= 1.0 + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn fixed_adversary_is_constant_across_queries() {
        let k = test_kernel();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let adv = Adversary::new(
            AdversaryKind::Fixed,
            2,
            2,
            10,
            AdversaryParams::default(),
            &mut rng,
        )
        .unwrap();
        let a = adv.round_losses(3, &[], &k).unwrap();
        let b = adv.round_losses(3, &[], &k).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_drift_oblivious_equals_fixed() {
        let k = test_kernel();
        let fixed = {
            let mut rng = ChaCha12Rng::seed_from_u64(9);
            Adversary::new(
                AdversaryKind::Fixed,
                2,
                3,
                20,
                AdversaryParams::default(),
                &mut rng,
            )
            .unwrap()
        };
        let oblivious = {
            let mut rng = ChaCha12Rng::seed_from_u64(9);
            Adversary::new(
                AdversaryKind::ObliviousSequence,
                2,
                3,
                20,
                AdversaryParams { drift: 0.0 },
                &mut rng,
            )
            .unwrap()
        };
        for t in 1..=20 {
            assert_eq!(
                fixed.round_losses(t, &[], &k).unwrap(),
                oblivious.round_losses(t, &[], &k).unwrap()
            );
        }
    }

    #[test]
    fn adaptive_adversary_replays_deterministically() {
        let k = test_kernel();
        let build = || {
            let mut rng = ChaCha12Rng::seed_from_u64(10);
            Adversary::new(
                AdversaryKind::Adaptive,
                2,
                2,
                10,
                AdversaryParams::default(),
                &mut rng,
            )
            .unwrap()
        };
        let history = vec![
            HistoryEntry {
                context: vec![0.2],
                action: 0,
                loss: 0.5,
            },
            HistoryEntry {
                context: vec![0.9],
                action: 0,
                loss: -0.1,
            },
            HistoryEntry {
                context: vec![0.4],
                action: 1,
                loss: 0.3,
            },
        ];
        let (a, b) = (build(), build());
        // Empty history falls back to the seeded base draw.
        assert_eq!(
            a.round_losses(1, &[], &k).unwrap(),
            b.round_losses(1, &[], &k).unwrap()
        );
        assert_eq!(
            a.round_losses(4, &history, &k).unwrap(),
            b.round_losses(4, &history, &k).unwrap()
        );
    }

    #[test]
    fn context_samples_are_iid_across_streams() {
        let dist = ContextDistribution::uniform(Support::unit(1));
        let f = |x: &[f64]| (3.0 * x[0]).sin();
        let n = 200_000;
        let mut means = Vec::new();
        for seed in [21u64, 22] {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let m: f64 = (0..n).map(|_| f(&dist.sample(&mut rng))).sum::<f64>() / n as f64;
            means.push(m);
        }
        // Var of sin(3x) on [0,1] is below 1/4; allow 4 combined stderr.
        let se = (0.25f64 / n as f64).sqrt() * std::f64::consts::SQRT_2;
        assert!((means[0] - means[1]).abs() <= 4.0 * se);
    }

    #[test]
    fn discrete_sampler_hits_support_with_given_weights() {
        let dist =
            ContextDistribution::discrete(vec![vec![0.1], vec![0.9]], vec![1.0, 3.0]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let n = 100_000;
        let hits = (0..n).filter(|_| dist.sample(&mut rng)[0] == 0.9).count() as f64;
        let se = (n as f64 * 0.75 * 0.25).sqrt();
        assert!((hits - 0.75 * n as f64).abs() <= 4.0 * se);
    }

    #[test]
    fn loss_round_trip_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("losses.json");
        let losses = vec![
            vec![
                LossFunction::new(vec![0.1, 0.2]).unwrap(),
                LossFunction::zero(2),
            ],
            vec![
                LossFunction::new(vec![-0.5, 0.5]).unwrap(),
                LossFunction::new(vec![0.0, 1.0]).unwrap(),
            ],
        ];
        export_losses(&path, &losses).unwrap();
        assert_eq!(import_losses(&path).unwrap(), losses);
    }
}
