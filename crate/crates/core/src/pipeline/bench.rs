use std::time::Instant;

use super::synth::{synth_generate, SynthConfig};
use crate::dual::DualCost;
use crate::error::{Error, Result};
use crate::least_squares::LsCost;
use crate::manifold::CostModel;
use crate::model::{mode_scaled_lambdas, Formulation};
use crate::product::{random_factors, ProductPoint, ProductVector};
use crate::spectrahedron::random_tangent;
use crate::tensor::{Dims, SparseTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub formulation: Formulation,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Observed-entry counts to sweep.
    pub sizes: Vec<usize>,
    /// Timed repetitions per size; the fastest is kept.
    pub repeats: usize,
    /// Fixed number of inner CG iterations per solve (dual only), so every
    /// size does the same amount of inner work per entry.
    pub inner_iters: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            formulation: Formulation::Dual,
            dims: vec![100, 100, 100],
            ranks: vec![5, 5, 5],
            sizes: vec![1_000, 4_000, 16_000, 64_000],
            repeats: 10,
            inner_iters: 10,
            lambda: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchPoint {
    pub nnz: usize,
    /// Seconds for one cost, gradient and Hessian-vector evaluation.
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub points: Vec<BenchPoint>,
    /// Slope of `log(seconds)` against `log(nnz)`.
    pub exponent: f64,
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn fit_exponent(points: &[BenchPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Config("need at least two sizes to fit an exponent".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.nnz as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.seconds.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("bench sizes must differ".into()));
    }
    Ok(sxy / sxx)
}

/// Times one trust-region iteration's worth of oracle calls for each size.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repeats == 0 || cfg.inner_iters == 0 {
        return Err(Error::Config("repeats and inner_iters must be >= 1".into()));
    }
    let dims = Dims::new(cfg.dims.clone())?;
    let total = dims.total() as f64;
    let lambdas = mode_scaled_lambdas(cfg.lambda, &dims);
    let shapes: Vec<(usize, usize)> =
        cfg.dims.iter().copied().zip(cfg.ranks.iter().copied()).collect();
    let mut inputs = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        // the generator holds out a fifth of what it samples
        let mut sc = SynthConfig::new(cfg.dims.clone(), cfg.ranks.clone(), 1.25 * size as f64 / total, cfg.seed);
        sc.test_fraction = 0.2;
        if sc.density > 1.0 {
            return Err(Error::Config(format!("{size} entries exceed 80% of the tensor")));
        }
        let y = synth_generate(&sc)?.train;
        let factors = random_factors(&shapes, cfg.seed);
        let dir: Vec<_> = factors
            .iter()
            .enumerate()
            .map(|(k, f)| random_tangent(f, cfg.seed + 100 + k as u64))
            .collect();
        inputs.push((y, factors, dir));
    }
    // sizes are interleaved within each round so that slow periods of the
    // machine hit all of them alike; round 0 warms the fiber caches
    let mut best = vec![f64::INFINITY; inputs.len()];
    for rep in 0..=cfg.repeats {
        for ((y, factors, dir), b) in inputs.iter().zip(best.iter_mut()) {
            let secs = time_once(cfg, y, &lambdas, factors, dir)?;
            if rep > 0 {
                *b = b.min(secs);
            }
        }
    }
    let points: Vec<BenchPoint> = inputs
        .iter()
        .zip(best)
        .map(|((y, _, _), seconds)| BenchPoint { nnz: y.nnz(), seconds })
        .collect();
    let exponent = fit_exponent(&points)?;
    Ok(BenchReport { points, exponent })
}

fn time_once(
    cfg: &BenchConfig,
    y: &SparseTensor,
    lambdas: &[f64],
    factors: &[crate::spectrahedron::FactorPoint],
    dir: &[crate::tensor::DenseFactor],
) -> Result<f64> {
    match cfg.formulation {
        Formulation::Dual => {
            // zero tolerance forces exactly `inner_iters` CG steps
            let mut cost = DualCost::new(y.clone(), lambdas.to_vec(), cfg.ranks.clone())?
                .with_inner(0.0, cfg.inner_iters);
            let x = ProductPoint {
                factors: factors.to_vec(),
                z: None,
            };
            let v = ProductVector {
                factors: dir.to_vec(),
                z: None,
            };
            let start = Instant::now();
            cost.cost(&x)?;
            cost.egrad(&x)?;
            cost.ehess(&x, &v)?;
            Ok(start.elapsed().as_secs_f64())
        }
        Formulation::LeastSquares => {
            let mut cost = LsCost::new(y.clone(), lambdas.to_vec(), cfg.ranks.clone())?;
            let x = ProductPoint {
                factors: factors.to_vec(),
                z: Some(y.scaled(0.5)),
            };
            let v = ProductVector {
                factors: dir.to_vec(),
                z: Some(y.scaled(0.1)),
            };
            let start = Instant::now();
            cost.cost(&x)?;
            cost.egrad(&x)?;
            cost.ehess(&x, &v)?;
            Ok(start.elapsed().as_secs_f64())
        }
    }
}
