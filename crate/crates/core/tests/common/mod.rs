#![allow(dead_code)]

pub mod suites;

use std::sync::{Arc, Mutex, MutexGuard};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use trace_completion::manifold::CostModel;
use trace_completion::product::{ProductManifold, ProductPoint, ProductVector};
use trace_completion::tensor::{DenseFactor, DenseTensor, Dims};
use trace_completion::{SparseTensor, Support};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Every multi-index of `dims` in lexicographic order.
pub fn all_indices(dims: &Dims) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in dims.sizes() {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

/// Each entry kept with probability `density`; never empty.
pub fn random_support(dims: &Dims, density: f64, rng: &mut ChaCha8Rng) -> Arc<Support> {
    let all = all_indices(dims);
    let mut picked: Vec<Vec<usize>> = all.iter().filter(|_| rng.random::<f64>() < density).cloned().collect();
    if picked.is_empty() {
        picked.push(all[rng.random_range(0..all.len())].clone());
    }
    Support::new(dims.clone(), picked).unwrap()
}

pub fn random_values(support: &Arc<Support>, rng: &mut ChaCha8Rng) -> SparseTensor {
    let values = (0..support.nnz()).map(|_| gaussian(rng)).collect();
    SparseTensor::new(Arc::clone(support), values).unwrap()
}

pub fn random_sparse(dims: &Dims, density: f64, rng: &mut ChaCha8Rng) -> SparseTensor {
    let s = random_support(dims, density, rng);
    random_values(&s, rng)
}

pub fn shapes(dims: &Dims, ranks: &[usize]) -> Vec<(usize, usize)> {
    dims.sizes().iter().copied().zip(ranks.iter().copied()).collect()
}

pub fn gaussian_direction(shapes: &[(usize, usize)], z: Option<&SparseTensor>, rng: &mut ChaCha8Rng) -> ProductVector {
    ProductVector {
        factors: shapes.iter().map(|&(n, r)| gaussian_matrix(n, r, rng)).collect(),
        z: z.map(|z| z.with_values((0..z.nnz()).map(|_| gaussian(rng)).collect())),
    }
}

pub fn ambient(x: &ProductPoint) -> ProductVector {
    ProductVector {
        factors: x.factor_matrices(),
        z: x.z.clone(),
    }
}

/// `(Z x_k M)` restricted to `support`, computed densely.
pub fn dense_mode_product(z: &SparseTensor, mode: usize, m: &DMatrix<f64>, support: &Arc<Support>) -> SparseTensor {
    DenseTensor::from_sparse(z).mode_multiply(mode, m).restrict(support)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn factor_norm_violation(factors: &[DenseFactor]) -> f64 {
    factors.iter().map(|u| (u.norm() - 1.0).abs()).fold(0.0, f64::max)
}

/// Runs timing-sensitive tests one at a time.
pub fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Wraps a cost and records the largest `| ||U_k||_F - 1 |` over every point
/// the solver evaluates.
pub struct NormWatch<C> {
    pub inner: C,
    pub worst: f64,
    pub points: usize,
}

impl<C> NormWatch<C> {
    pub fn new(inner: C) -> Self {
        NormWatch {
            inner,
            worst: 0.0,
            points: 0,
        }
    }

    fn see(&mut self, x: &ProductPoint) {
        self.worst = self.worst.max(factor_norm_violation(&x.factor_matrices()));
        self.points += 1;
    }
}

impl<C: CostModel<ProductManifold>> CostModel<ProductManifold> for NormWatch<C> {
    fn cost(&mut self, x: &ProductPoint) -> trace_completion::Result<f64> {
        self.see(x);
        self.inner.cost(x)
    }

    fn egrad(&mut self, x: &ProductPoint) -> trace_completion::Result<ProductVector> {
        self.see(x);
        self.inner.egrad(x)
    }

    fn ehess(&mut self, x: &ProductPoint, v: &ProductVector) -> trace_completion::Result<ProductVector> {
        self.see(x);
        self.inner.ehess(x, v)
    }
}

/// Accepted costs never increase.
pub fn monotone(costs: &[f64]) -> bool {
    costs.windows(2).all(|w| w[1] <= w[0])
}
