//! Mercer kernels with controlled eigendecay.
//!
//! Two families are provided:
//!
//! * synthetic kernels defined by an explicit truncated eigensystem
//!   κ(x,x') = Σ_j μ_j ψ_j(x) ψ_j(x') with cosine eigenfunctions
//!   ψ_j(x) = cos(jπ x̄), where x̄ is the first coordinate of x mapped to
//!   [0,1] — these give exact control of the decay profile and satisfy
//!   |ψ_j| ≤ 1 by construction;
//! * evaluation-only kernels (Gaussian RBF, Matérn) tagged with the decay
//!   constants of their spectra for parameter-schedule purposes.
//!
//! Eigenvalues of synthetic kernels are rescaled so Σ_j μ_j ≤ 1, which
//! enforces κ(x,x) ≤ 1 and ‖φ(x)‖₂ ≤ 1 everywhere on the support.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative stopping rule for direct tail summation.
const TAIL_TERM_CUTOFF: f64 = 1e-15;
/// Hard cap on summed terms; the analytic remainder covers the rest. At this
/// depth the midpoint-integral remainder of a polynomial tail is accurate to
/// far below the summation cutoff.
const TAIL_MAX_TERMS: usize = 1_000_000;

/// Eigenvalue decay family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Exponential,
    Polynomial,
}

/// A (g,c) decay profile: μ_j = g·e^{-cj} (exponential) or μ_j = g·j^{-c}
/// (polynomial, c > 1), indices starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayProfile {
    pub kind: DecayKind,
    pub g: f64,
    pub c: f64,
}

impl DecayProfile {
    pub fn exponential(g: f64, c: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0 && c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "exponential decay needs finite g > 0 and c > 0, got g={g}, c={c}"
            )));
        }
        Ok(DecayProfile {
            kind: DecayKind::Exponential,
            g,
            c,
        })
    }

    pub fn polynomial(g: f64, c: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0 && c.is_finite() && c > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "polynomial decay needs finite g > 0 and c > 1, got g={g}, c={c}"
            )));
        }
        Ok(DecayProfile {
            kind: DecayKind::Polynomial,
            g,
            c,
        })
    }

    /// μ_j for 1-based index j.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        match self.kind {
            DecayKind::Exponential => self.g * (-self.c * j as f64).exp(),
            DecayKind::Polynomial => self.g * (j as f64).powf(-self.c),
        }
    }

    /// Closed-form analytic upper bound on the tail Σ_{j>m} μ_j.
    ///
    /// Exponential: g·e^{-c(m+1)}/(1-e^{-c}) (exact geometric sum).
    /// Polynomial: g·m^{1-c}/(c-1) for m ≥ 1; +∞ at m = 0.
    pub fn tail_bound(&self, m: usize) -> f64 {
        match self.kind {
            DecayKind::Exponential => {
                self.g * (-self.c * (m as f64 + 1.0)).exp() / (1.0 - (-self.c).exp())
            }
            DecayKind::Polynomial => {
                if m == 0 {
                    f64::INFINITY
                } else {
                    self.g * (m as f64).powf(1.0 - self.c) / (self.c - 1.0)
                }
            }
        }
    }

    /// Direct tail sum Σ_{j>m} μ_j: terms are accumulated until one falls
    /// below 1e-15 of the running sum, then the analytic remainder bound for
    /// the unsummed part is added.
    pub fn tail_sum(&self, m: usize) -> f64 {
        let mut acc = 0.0f64;
        let mut j = m + 1;
        let mut terms = 0usize;
        loop {
            let term = self.eigenvalue(j);
            acc += term;
            terms += 1;
            if term < TAIL_TERM_CUTOFF * acc || terms >= TAIL_MAX_TERMS {
                break;
            }
            j += 1;
        }
        acc + self.remainder_after(j)
    }

    /// Analytic remainder for Σ_{j>last} μ_j: the exact geometric sum for
    /// exponential decay, the midpoint-rule integral for polynomial decay
    /// (error O(last^{−c−1}), negligible at the summation depth used).
    fn remainder_after(&self, last: usize) -> f64 {
        match self.kind {
            DecayKind::Exponential => {
                self.g * (-self.c * (last as f64 + 1.0)).exp() / (1.0 - (-self.c).exp())
            }
            DecayKind::Polynomial => {
                self.g * (last as f64 + 0.5).powf(1.0 - self.c) / (self.c - 1.0)
            }
        }
    }

    /// m(ε) = min{m ∈ ℕ: Σ_{j>m} μ_j ≤ ε} for the exact profile series.
    pub fn truncation_index(&self, eps: f64) -> Result<usize> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation needs eps > 0, got {eps}"
            )));
        }
        let mut tail = self.tail_sum(0);
        let mut m = 0usize;
        while tail > eps {
            m += 1;
            tail -= self.eigenvalue(m);
        }
        Ok(m)
    }
}

impl std::fmt::Display for DecayProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            DecayKind::Exponential => write!(f, "exponential(g={}, c={})", self.g, self.c),
            DecayKind::Polynomial => write!(f, "polynomial(g={}, c={})", self.g, self.c),
        }
    }
}

/// Axis-aligned box support for contexts; the default is [0,1]^d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Support {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn unit(dim: usize) -> Self {
        Support {
            dim,
            lo: 0.0,
            hi: 1.0,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter()
                .all(|&v| v.is_finite() && v >= self.lo && v <= self.hi)
    }

    /// First coordinate mapped to [0,1]; argument of the cosine eigenfunctions.
    fn normalized_first(&self, x: &[f64]) -> f64 {
        (x[0] - self.lo) / (self.hi - self.lo)
    }
}

impl std::fmt::Display for Support {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]^{}", self.lo, self.hi, self.dim)
    }
}

/// Explicit truncated eigensystem with cosine eigenfunctions.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    mu: Vec<f64>,
    sqrt_mu: Vec<f64>,
}

impl Eigensystem {
    fn new(mu: Vec<f64>) -> Self {
        let sqrt_mu = mu.iter().map(|&m| m.sqrt()).collect();
        Eigensystem { mu, sqrt_mu }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.mu
    }

    /// ψ_j(x̄) = cos(jπ x̄) for 1-based j.
    pub fn psi(j: usize, xbar: f64) -> f64 {
        (j as f64 * std::f64::consts::PI * xbar).cos()
    }

    /// Exact stored-spectrum tail Σ_{j>m} μ_j, accumulated from the small end.
    pub fn tail_sum(&self, m: usize) -> f64 {
        self.mu.iter().skip(m).rev().sum()
    }

    /// m(ε) over the stored spectrum; always defined since the tail hits 0.
    pub fn truncation_index(&self, eps: f64) -> Result<usize> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation needs eps > 0, got {eps}"
            )));
        }
        let mut tail: f64 = self.mu.iter().rev().sum();
        let mut m = 0usize;
        while tail > eps && m < self.mu.len() {
            tail -= self.mu[m];
            m += 1;
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum KernelImpl {
    Cosine(Eigensystem),
    Gaussian { bandwidth: f64 },
    Matern { nu: f64, length_scale: f64 },
}

/// A positive-definite kernel on the declared support, optionally carrying an
/// explicit truncated eigensystem and a decay profile.
#[derive(Debug, Clone)]
pub struct MercerKernel {
    imp: KernelImpl,
    profile: Option<DecayProfile>,
    support: Support,
}

impl MercerKernel {
    /// Synthetic kernel from explicit eigenvalues (cosine eigenfunctions).
    /// Eigenvalues with Σ μ_j > 1 are rescaled so the sum is ≤ 1.
    pub fn synthetic(mu: Vec<f64>, support: Support) -> Result<Self> {
        if support.dim == 0 {
            return Err(Error::InvalidParameter(
                "context dimension must be >= 1".into(),
            ));
        }
        if mu.iter().any(|&m| !m.is_finite() || m < 0.0) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = mu.iter().sum();
        let mu = if sum > 1.0 {
            let scale = (1.0 - 1e-12) / sum;
            mu.into_iter().map(|m| m * scale).collect()
        } else {
            mu
        };
        Ok(MercerKernel {
            imp: KernelImpl::Cosine(Eigensystem::new(mu)),
            profile: None,
            support,
        })
    }

    /// Synthetic kernel whose spectrum follows a decay profile, truncated at
    /// `d_trunc` terms. If rescaling was needed to keep Σ μ_j ≤ 1, the stored
    /// profile carries the effective g.
    pub fn from_profile(profile: DecayProfile, d_trunc: usize, support: Support) -> Result<Self> {
        if d_trunc == 0 {
            return Err(Error::InvalidParameter("d_trunc must be >= 1".into()));
        }
        let mu: Vec<f64> = (1..=d_trunc).map(|j| profile.eigenvalue(j)).collect();
        let sum: f64 = mu.iter().sum();
        let (mu, g_eff) = if sum > 1.0 {
            let scale = (1.0 - 1e-12) / sum;
            (
                mu.into_iter().map(|m| m * scale).collect(),
                profile.g * scale,
            )
        } else {
            (mu, profile.g)
        };
        let mut kernel = MercerKernel::synthetic(mu, support)?;
        kernel.profile = Some(DecayProfile {
            kind: profile.kind,
            g: g_eff,
            c: profile.c,
        });
        Ok(kernel)
    }

    /// Gaussian RBF, evaluation-only. Tagged with the exponential decay
    /// constant c = 1/d of the squared-exponential spectrum (schedule use only).
    pub fn gaussian(bandwidth: f64, support: Support) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be > 0, got {bandwidth}"
            )));
        }
        let profile = DecayProfile::exponential(1.0, 1.0 / support.dim as f64)?;
        Ok(MercerKernel {
            imp: KernelImpl::Gaussian { bandwidth },
            profile: Some(profile),
            support,
        })
    }

    /// Matérn kernel (smoothness ν ∈ {1/2, 3/2, 5/2}), evaluation-only.
    /// Tagged with the polynomial decay constant c = 1 + 2ν/d.
    pub fn matern(nu: f64, length_scale: f64, support: Support) -> Result<Self> {
        if ![0.5, 1.5, 2.5].contains(&nu) {
            return Err(Error::InvalidParameter(format!(
                "matern smoothness must be one of 0.5, 1.5, 2.5, got {nu}"
            )));
        }
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "length_scale must be > 0, got {length_scale}"
            )));
        }
        let profile = DecayProfile::polynomial(1.0, 1.0 + 2.0 * nu / support.dim as f64)?;
        Ok(MercerKernel {
            imp: KernelImpl::Matern { nu, length_scale },
            profile: Some(profile),
            support,
        })
    }

    pub fn support(&self) -> &Support {
        self.support_ref()
    }

    fn support_ref(&self) -> &Support {
        &self.support
    }

    pub fn profile(&self) -> Option<&DecayProfile> {
        self.profile.as_ref()
    }

    pub fn eigensystem(&self) -> Option<&Eigensystem> {
        match &self.imp {
            KernelImpl::Cosine(e) => Some(e),
            _ => None,
        }
    }

    /// Number of explicit feature coordinates, when an eigensystem is present.
    pub fn feature_dim(&self) -> Option<usize> {
        self.eigensystem().map(Eigensystem::len)
    }

    fn check_support(&self, x: &[f64]) -> Result<()> {
        if self.support.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideSupport {
                point: x.to_vec(),
                support: self.support.to_string(),
            })
        }
    }

    /// κ(x, x').
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_support(x)?;
        self.check_support(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// κ(x, x') without the support check; callers on the hot path validate
    /// points once at block construction.
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.imp {
            KernelImpl::Cosine(eig) => {
                // cos(jθ) by the Chebyshev recurrence for both arguments.
                let tx = std::f64::consts::PI * self.support.normalized_first(x);
                let ty = std::f64::consts::PI * self.support.normalized_first(y);
                let (cx1, cy1) = (tx.cos(), ty.cos());
                let (mut cx_prev, mut cy_prev) = (1.0f64, 1.0f64);
                let (mut cx, mut cy) = (cx1, cy1);
                let mut acc = 0.0f64;
                for &mu in &eig.mu {
                    acc += mu * cx * cy;
                    let nx = 2.0 * cx1 * cx - cx_prev;
                    let ny = 2.0 * cy1 * cy - cy_prev;
                    cx_prev = cx;
                    cy_prev = cy;
                    cx = nx;
                    cy = ny;
                }
                acc
            }
            KernelImpl::Gaussian { bandwidth } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelImpl::Matern { nu, length_scale } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                let r = sq.sqrt() / length_scale;
                if *nu == 0.5 {
                    (-r).exp()
                } else if *nu == 1.5 {
                    let s = 3.0f64.sqrt() * r;
                    (1.0 + s) * (-s).exp()
                } else {
                    let s = 5.0f64.sqrt() * r;
                    (1.0 + s + s * s / 3.0) * (-s).exp()
                }
            }
        }
    }

    /// Feature vector φ(x) with φ_j(x) = √μ_j ψ_j(x); eigensystem kernels only.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_support(x)?;
        let eig = self.eigensystem().ok_or(Error::NoEigensystem)?;
        let theta = std::f64::consts::PI * self.support.normalized_first(x);
        let c1 = theta.cos();
        let mut c_prev = 1.0f64;
        let mut c = c1;
        let mut out = Vec::with_capacity(eig.len());
        for &s in &eig.sqrt_mu {
            out.push(s * c);
            let n = 2.0 * c1 * c - c_prev;
            c_prev = c;
            c = n;
        }
        Ok(out)
    }

    /// m(ε): stored spectrum when an eigensystem is present, otherwise the
    /// profile series.
    pub fn truncation_index(&self, eps: f64) -> Result<usize> {
        if let Some(eig) = self.eigensystem() {
            eig.truncation_index(eps)
        } else if let Some(p) = &self.profile {
            p.truncation_index(eps)
        } else {
            Err(Error::NoDecayProfile)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn two_term_kernel() -> MercerKernel {
        MercerKernel::synthetic(vec![0.5, 0.25], Support::unit(1)).unwrap()
    }

    #[test]
    fn rbf_self_eval_is_one() {
        let k = MercerKernel::gaussian(0.7, Support::unit(2)).unwrap();
        let x = [0.3, 0.4];
        assert!((k.eval(&x, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_term_mercer_sum_at_zero() {
        // Direct 2-term sum: 0.5·cos(0)² + 0.25·cos(0)² = 0.75.
        let k = two_term_kernel();
        assert!((k.eval(&[0.0], &[0.0]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_point_outside_support() {
        let k = two_term_kernel();
        assert!(matches!(
            k.eval(&[1.5], &[0.0]),
            Err(Error::OutsideSupport { .. })
        ));
    }

    #[test]
    fn eval_matches_direct_cosine_sum() {
        // Recurrence vs. direct cos() evaluation, 1000 sampled pairs.
        let mu: Vec<f64> = (1..=40).map(|j| 0.9f64.powi(j) * 0.05).collect();
        let k = MercerKernel::synthetic(mu.clone(), Support::unit(1)).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = [rng.random::<f64>()];
            let y = [rng.random::<f64>()];
            let direct: f64 = mu
                .iter()
                .enumerate()
                .map(|(i, &m)| m * Eigensystem::psi(i + 1, x[0]) * Eigensystem::psi(i + 1, y[0]))
                .sum();
            let got = k.eval(&x, &y).unwrap();
            assert!(
                (got - direct).abs() <= 1e-12,
                "recurrence drifted: {got} vs {direct}"
            );
        }
    }

    #[test]
    fn symmetry_on_sampled_pairs() {
        let k = MercerKernel::from_profile(
            DecayProfile::exponential(1.0, 1.0).unwrap(),
            24,
            Support::unit(1),
        )
        .unwrap();
        let g = MercerKernel::matern(1.5, 0.4, Support::unit(2)).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (x, y) = ([rng.random::<f64>()], [rng.random::<f64>()]);
            let (a, b) = (k.eval(&x, &y).unwrap(), k.eval(&y, &x).unwrap());
            assert!((a - b).abs() <= 1e-12);
            let (u, v) = (
                [rng.random::<f64>(), rng.random::<f64>()],
                [rng.random::<f64>(), rng.random::<f64>()],
            );
            assert!((g.eval(&u, &v).unwrap() - g.eval(&v, &u).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn self_eval_bounded_by_one() {
        let kernels = [
            MercerKernel::from_profile(
                DecayProfile::polynomial(1.0, 2.0).unwrap(),
                64,
                Support::unit(1),
            )
            .unwrap(),
            MercerKernel::gaussian(0.3, Support::unit(1)).unwrap(),
            MercerKernel::matern(2.5, 0.5, Support::unit(1)).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for k in &kernels {
            for _ in 0..500 {
                let x = [rng.random::<f64>()];
                assert!(k.eval(&x, &x).unwrap() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn feature_norm_bounded_by_one() {
        let k = MercerKernel::from_profile(
            DecayProfile::polynomial(1.0, 2.0).unwrap(),
            64,
            Support::unit(1),
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let x = [rng.random::<f64>()];
            let phi = k.features(&x).unwrap();
            let norm_sq: f64 = phi.iter().map(|v| v * v).sum();
            assert!(norm_sq.sqrt() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn truncation_exponential_profile() {
        // Tail e^{-(m+1)}/(1-e^{-1}): m=4 gives 0.01066 > 0.01, m=5 gives 0.00392.
        let p = DecayProfile::exponential(1.0, 1.0).unwrap();
        assert_eq!(p.truncation_index(0.01).unwrap(), 5);
        assert!(p.tail_sum(4) > 0.01);
        assert!(p.tail_sum(5) <= 0.01);
    }

    #[test]
    fn truncation_polynomial_profile() {
        // Direct summation: tail(9) ≈ 0.10517 > 0.1, tail(10) ≈ 0.09517.
        let p = DecayProfile::polynomial(1.0, 2.0).unwrap();
        assert_eq!(p.truncation_index(0.1).unwrap(), 10);
    }

    #[test]
    fn truncation_explicit_eigensystem() {
        let k = two_term_kernel();
        assert_eq!(k.truncation_index(1.0).unwrap(), 0);
        assert_eq!(k.truncation_index(0.5).unwrap(), 1);
        assert_eq!(k.truncation_index(0.1).unwrap(), 2);
    }

    #[test]
    fn tail_bound_values() {
        let e = DecayProfile::exponential(1.0, 1.0).unwrap();
        let expected = (-1.0f64).exp() / (1.0 - (-1.0f64).exp());
        assert!((e.tail_bound(0) - expected).abs() < 1e-12);
        assert!((expected - 0.58198).abs() < 1e-5);
        // Brute-force series agrees with the geometric closed form here.
        assert!((e.tail_sum(0) - expected).abs() < 1e-12);

        let p = DecayProfile::polynomial(1.0, 2.0).unwrap();
        assert!((p.tail_bound(10) - 0.1).abs() < 1e-15);
        assert!(p.tail_bound(0).is_infinite());
        let true_tail = p.tail_sum(10);
        assert!((true_tail - 0.09517).abs() < 1e-4);
        assert!(true_tail <= p.tail_bound(10));
    }

    #[test]
    fn tail_bound_dominates_tail_sum() {
        for p in [
            DecayProfile::exponential(1.0, 1.0).unwrap(),
            DecayProfile::exponential(2.0, 0.5).unwrap(),
            DecayProfile::polynomial(1.0, 2.0).unwrap(),
            DecayProfile::polynomial(0.5, 3.0).unwrap(),
        ] {
            for m in 1..=100 {
                assert!(
                    p.tail_sum(m) <= p.tail_bound(m) * (1.0 + 1e-12),
                    "tail_sum exceeded bound for {p} at m={m}"
                );
            }
        }
    }

    #[test]
    fn gram_matrices_are_psd() {
        let kernels = [
            MercerKernel::from_profile(
                DecayProfile::exponential(1.0, 1.0).unwrap(),
                24,
                Support::unit(1),
            )
            .unwrap(),
            MercerKernel::gaussian(0.5, Support::unit(2)).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for k in &kernels {
            let d = k.support().dim;
            for _ in 0..50 {
                let n = 8;
                let pts: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
                    .collect();
                let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        gram[(i, j)] = k.eval(&pts[i], &pts[j]).unwrap();
                    }
                }
                let eig = nalgebra::SymmetricEigen::new(gram);
                let min = eig
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    min >= -1e-9,
                    "sampled Gram matrix not PSD: min eigenvalue {min}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn truncation_index_monotone_in_eps(c in 1.5f64..4.0, e1 in 1e-4f64..1.0, e2 in 1e-4f64..1.0) {
            let p = DecayProfile::polynomial(1.0, c).unwrap();
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(p.truncation_index(lo).unwrap() >= p.truncation_index(hi).unwrap());
        }

        #[test]
        fn mercer_identity_feature_dot(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let k = MercerKernel::from_profile(
                DecayProfile::exponential(1.0, 0.8).unwrap(), 20, Support::unit(1)).unwrap();
            let (fx, fy) = (k.features(&[x]).unwrap(), k.features(&[y]).unwrap());
            let dot: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
            prop_assert!((dot - k.eval(&[x], &[y]).unwrap()).abs() <= 1e-12);
        }
    }
}
