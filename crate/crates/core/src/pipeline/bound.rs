use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{train_with_lambdas, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{mode_scaled_lambdas, Formulation};
use crate::tensor::{DenseTensor, SparseTensor, Support};

/// Largest singular value of `m` by power iteration on `m m^T`.
pub fn spectral_norm(m: &DMatrix<f64>, tol: f64, max_iters: usize, seed: u64) -> f64 {
    if m.norm() == 0.0 {
        return 0.0;
    }
    let g = m * m.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(g.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..max_iters {
        let w = &g * &v;
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        if (next - est).abs() <= tol * next {
            est = next;
            break;
        }
        est = next;
    }
    est.sqrt()
}

/// How the scalar `lambda` of the penalized estimator becomes solver weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaMapping {
    /// `lambda_k = lambda / 2`, under which the solver minimizes exactly
    /// `||Y - W||^2 / 2 + (1 / lambda) sum_k ||W^(k)_(k)||_*^2`.
    Raw,
    /// `lambda_k = lambda * n_k`, the weighting used for training.
    ModeScaled,
}

impl LambdaMapping {
    pub fn lambdas(self, lambda: f64, dims: &crate::tensor::Dims) -> Vec<f64> {
        match self {
            LambdaMapping::Raw => vec![lambda / 2.0; dims.order()],
            LambdaMapping::ModeScaled => mode_scaled_lambdas(lambda, dims),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MappingResult {
    pub mapping: LambdaMapping,
    pub discrepancy: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub lambda: f64,
    /// Largest `lambda` allowed by `lambda <= 1 / sqrt(sum_k ||E_(k)||_2^2)`.
    pub lambda_max: f64,
    pub assumption_holds: bool,
    /// `(2 / lambda) sqrt(min_k n_k)`.
    pub bound: f64,
    pub w_star_norm: f64,
    pub noise_spectral_norms: Vec<f64>,
    pub raw: MappingResult,
    pub mode_scaled: MappingResult,
}

impl BoundReport {
    /// The inequality is only binding when the noise assumption holds.
    pub fn binding(&self) -> bool {
        self.assumption_holds
    }
}

/// Denoises `Y = W* + E` observed everywhere and compares the estimate with
/// the error bound, under both weight mappings. `cfg.ranks` should be full
/// (`r_k = n_k`) for the fixed-rank problem to cover the convex estimator.
pub fn reconstruction_bound_check(
    w_star: &DenseTensor,
    noise: &DenseTensor,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<BoundReport> {
    let dims = w_star.dims();
    if noise.dims() != dims {
        return Err(Error::Shape("noise and truth dims differ".into()));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be finite and > 0, got {lambda}")));
    }
    let norms: Vec<f64> = (0..dims.order())
        .map(|k| spectral_norm(&noise.unfold(k), 1e-13, 10_000, k as u64))
        .collect();
    let sq: f64 = norms.iter().map(|s| s * s).sum();
    let lambda_max = if sq > 0.0 { 1.0 / sq.sqrt() } else { f64::INFINITY };
    let bound = 2.0 / lambda * (dims.min_size() as f64).sqrt();

    let full = Support::full(dims.clone());
    let y = w_star.add(noise).restrict(&full);
    let truth = w_star.restrict(&full);
    let run = |mapping: LambdaMapping| -> Result<MappingResult> {
        let mut cfg = cfg.clone();
        cfg.formulation = Formulation::Dual;
        let out = train_with_lambdas(&y, lambda, mapping.lambdas(lambda, dims), &cfg)?;
        let w_hat = out.model.predict(&full)?;
        let discrepancy = distance(&w_hat, &truth);
        Ok(MappingResult {
            mapping,
            discrepancy,
            holds: discrepancy <= bound,
        })
    };
    Ok(BoundReport {
        lambda,
        lambda_max,
        assumption_holds: lambda <= lambda_max,
        bound,
        w_star_norm: w_star.frob_norm(),
        noise_spectral_norms: norms,
        raw: run(LambdaMapping::Raw)?,
        mode_scaled: run(LambdaMapping::ModeScaled)?,
    })
}

fn distance(a: &SparseTensor, b: &SparseTensor) -> f64 {
    debug_assert!(Arc::ptr_eq(a.support(), b.support()) || a.support().same_as(b.support()));
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}
