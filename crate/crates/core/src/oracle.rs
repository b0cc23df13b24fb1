//! Brute-force finite-dimensional oracle.
//!
//! Everything the KGR estimator computes through kernel evaluations is
//! recomputed here with explicit feature vectors and dense operator algebra:
//! Σ̂⁺ = I + Σ_k Π_{j≤k}(I − B_j) assembled by dense matrix products, bilinear forms
//! taken literally, the covariance operator Σ_{t,a} estimated by Monte Carlo,
//! and the effective-dimension trace by symmetric eigendecomposition. This is
//! deliberately O(D²M) per call and never runs inside the simulation loop; it
//! exists to certify the O(M²) recursion and the trace lemma.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::env::ContextDistribution;
use crate::error::{Error, Result};
use crate::estimator::{sample_categorical, ResampleBlock};
use crate::kernels::MercerKernel;

/// φ(x) with φ_i(x) = √μ_i ψ_i(x); requires an explicit eigensystem.
pub fn feature_map(kernel: &MercerKernel, x: &[f64]) -> Result<Vec<f64>> {
    kernel.features(x)
}

/// Σ̂⁺ = I + Σ_{k=1}^M C_k with C_k = Π_{j=1}^k (I − B_j), products applied in
/// increasing j from the left (C_k = C_{k−1}(I − B_k)).
///
/// Each B_k must be D×D; the intended inputs are zero matrices or rank-one
/// outer products v⊗v with ‖v‖₂ ≤ 1.
pub fn explicit_sigma_plus(blocks: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let d = match blocks.first() {
        Some(b) => b.nrows(),
        None => return Ok(DMatrix::identity(0, 0)),
    };
    for b in blocks {
        if b.nrows() != d || b.ncols() != d {
            return Err(Error::DimensionMismatch(b.nrows() * b.ncols(), d * d));
        }
    }
    let eye = DMatrix::<f64>::identity(d, d);
    let mut product = eye.clone();
    let mut sum = eye.clone();
    for b in blocks {
        product = &product * &(&eye - b);
        sum += &product;
    }
    Ok(sum)
}

/// Dimension-aware Σ̂⁺ for a concrete block and action: M=0 blocks still need
/// an identity of the right size.
pub fn sigma_plus_for_block(
    kernel: &MercerKernel,
    action: usize,
    block: &ResampleBlock,
) -> Result<DMatrix<f64>> {
    let d = kernel.feature_dim().ok_or(Error::NoEigensystem)?;
    if block.resamples.is_empty() {
        return Ok(DMatrix::identity(d, d));
    }
    let bs: Vec<DMatrix<f64>> = block
        .resamples
        .iter()
        .map(|(xk, ak)| -> Result<DMatrix<f64>> {
            if *ak == action {
                let v = DVector::from_vec(kernel.features(xk)?);
                Ok(&v * v.transpose())
            } else {
                Ok(DMatrix::zeros(d, d))
            }
        })
        .collect::<Result<_>>()?;
    explicit_sigma_plus(&bs)
}

/// Ground-truth KGR quantities via dense algebra:
/// q = ⟨φ(x), Σ̂⁺ φ(X_t)⟩ and b = β⟨φ(x), Σ̂⁺ φ(x)⟩.
pub fn oracle_kgr(
    kernel: &MercerKernel,
    x: &[f64],
    action: usize,
    block: &ResampleBlock,
    beta: f64,
) -> Result<(f64, f64)> {
    let sigma_plus = sigma_plus_for_block(kernel, action, block)?;
    let phi_x = DVector::from_vec(kernel.features(x)?);
    let phi_c = DVector::from_vec(kernel.features(&block.context)?);
    let q = phi_x.dot(&(&sigma_plus * &phi_c));
    let b = beta * phi_x.dot(&(&sigma_plus * &phi_x));
    Ok((q, b))
}

/// Monte Carlo estimate of Σ_{t,a} = E[1{A=a} φ(X)⊗φ(X)] with entrywise
/// standard errors.
#[derive(Debug, Clone)]
pub struct SigmaEstimate {
    pub mean: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    pub samples: usize,
}

impl SigmaEstimate {
    /// Frobenius norm of the entrywise standard-error matrix; the raw
    /// ingredient of trace-bound tolerances.
    pub fn stderr_frobenius(&self) -> f64 {
        self.stderr.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Allowance for how far the trace functional with the given exponent can
    /// move under the Monte Carlo error: the map Σ ↦ tr(I−(I−Σ)^n) is
    /// n-Lipschitz in each eigenvalue and eigenvalues move by at most the
    /// Frobenius error in aggregate (Hoffman–Wielandt), giving
    /// n·√D·‖stderr‖_F.
    pub fn trace_allowance(&self, exponent: u32) -> f64 {
        let d = self.mean.nrows() as f64;
        exponent as f64 * d.sqrt() * self.stderr_frobenius()
    }
}

/// Draw N i.i.d. rounds (X ~ D, A ~ policy(·|X)) and average
/// 1{A = a}·φ(X)⊗φ(X).
pub fn sigma_estimate<R: Rng + ?Sized>(
    kernel: &MercerKernel,
    context: &ContextDistribution,
    policy: &dyn Fn(&[f64]) -> Vec<f64>,
    action: usize,
    n: usize,
    rng: &mut R,
) -> Result<SigmaEstimate> {
    if n == 0 {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let d = kernel.feature_dim().ok_or(Error::NoEigensystem)?;
    let mut sum = vec![0.0f64; d * d];
    let mut sumsq = vec![0.0f64; d * d];
    for _ in 0..n {
        let x = context.sample(rng);
        let a = sample_categorical(&policy(&x), rng);
        if a != action {
            continue;
        }
        let phi = kernel.features(&x)?;
        for i in 0..d {
            let pi = phi[i];
            let row = i * d;
            for j in 0..d {
                let v = pi * phi[j];
                sum[row + j] += v;
                sumsq[row + j] += v * v;
            }
        }
    }
    let nf = n as f64;
    let mean = DMatrix::from_fn(d, d, |i, j| sum[i * d + j] / nf);
    let stderr = DMatrix::from_fn(d, d, |i, j| {
        let m = sum[i * d + j] / nf;
        let var = (sumsq[i * d + j] - nf * m * m).max(0.0) / (nf - 1.0).max(1.0);
        (var / nf).sqrt()
    });
    Ok(SigmaEstimate {
        mean,
        stderr,
        samples: n,
    })
}

/// tr(I − (I − Σ)^n) by symmetric eigendecomposition: Σ_i (1 − (1−λ_i)^n).
///
/// Σ must be symmetric PSD with spectrum in [0, 1]; eigenvalues outside by
/// more than 1e−9 are an error, closer ones are clamped.
pub fn effective_dim_trace(sigma: &DMatrix<f64>, exponent: u32) -> Result<f64> {
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::DimensionMismatch(sigma.nrows(), sigma.ncols()));
    }
    // Symmetrize to absorb Monte Carlo asymmetry before decomposing.
    let symmetric = (sigma + sigma.transpose()) * 0.5;
    let eigen = nalgebra::SymmetricEigen::new(symmetric);
    let mut total = 0.0;
    for &lambda in eigen.eigenvalues.iter() {
        if !(-1e-9..=1.0 + 1e-9).contains(&lambda) {
            return Err(Error::EigenvalueRange(lambda));
        }
        let l = lambda.clamp(0.0, 1.0);
        total += 1.0 - (1.0 - l).powi(exponent as i32);
    }
    Ok(total)
}

/// Operator 2-norm, for the ‖Σ̂⁺‖ ≤ M+1 checks.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}
