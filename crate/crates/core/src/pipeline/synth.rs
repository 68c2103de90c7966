use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectrahedron::random_point_with;
use crate::tensor::{DenseTensor, Dims, SparseTensor, Support};

/// Ground truth `W* = s * sum_k lambda_k (Z0 x_k U_k U_k^T)` with a Tucker
/// core `Z0 = G x_1 U_1 ... x_K U_K`, so every mode-k unfolding of `W*` has
/// rank at most `r_k`.
#[derive(Clone, Debug)]
pub struct PlantedTensor {
    dims: Dims,
    core: DenseTensor,
    factors: Vec<DMatrix<f64>>,
    /// `terms[k][j]` is the mode-`j` factor of the `k`-th summand.
    terms: Vec<Vec<DMatrix<f64>>>,
    weights: Vec<f64>,
}

impl PlantedTensor {
    pub fn new(dims: Dims, core: DenseTensor, factors: Vec<DMatrix<f64>>, lambdas: Vec<f64>) -> Result<Self> {
        let k = dims.order();
        if factors.len() != k || lambdas.len() != k || core.dims().order() != k {
            return Err(Error::Shape("planted tensor needs one factor and weight per mode".into()));
        }
        for (j, u) in factors.iter().enumerate() {
            if u.shape() != (dims.size(j), core.dims().size(j)) {
                return Err(Error::Shape(format!("planted factor {j} has shape {:?}", u.shape())));
            }
        }
        let terms = (0..k)
            .map(|mode| {
                factors
                    .iter()
                    .enumerate()
                    .map(|(j, u)| if j == mode { u * (u.transpose() * u) } else { u.clone() })
                    .collect()
            })
            .collect();
        Ok(PlantedTensor {
            dims,
            core,
            factors,
            terms,
            weights: lambdas,
        })
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    /// Planted unit-norm factors `U_k`.
    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn value(&self, index: &[usize]) -> f64 {
        let core_dims = self.core.dims();
        let mut total = 0.0;
        for (term, &w) in self.terms.iter().zip(&self.weights) {
            let mut acc = 0.0;
            let mut a = vec![0; core_dims.order()];
            for &g in self.core.data() {
                let mut p = g;
                for (j, f) in term.iter().enumerate() {
                    p *= f[(index[j], a[j])];
                }
                acc += p;
                for (j, aj) in a.iter_mut().enumerate() {
                    *aj += 1;
                    if *aj < core_dims.size(j) {
                        break;
                    }
                    *aj = 0;
                }
            }
            total += w * acc;
        }
        total
    }

    pub fn evaluate(&self, support: &Arc<Support>) -> SparseTensor {
        let values = support.iter().map(|idx| self.value(idx)).collect();
        SparseTensor::new(Arc::clone(support), values).expect("finite planted values")
    }

    pub fn to_dense(&self) -> DenseTensor {
        DenseTensor::from_fn(self.dims.clone(), |idx| self.value(idx))
    }

    /// `||W*||_F` from core-sized products only.
    pub fn frob_norm(&self) -> f64 {
        let mut sq = 0.0;
        for (tk, wk) in self.terms.iter().zip(&self.weights) {
            for (tl, wl) in self.terms.iter().zip(&self.weights) {
                let mut g = self.core.clone();
                for (j, (a, b)) in tk.iter().zip(tl).enumerate() {
                    g = g.mode_multiply(j, &(a.transpose() * b));
                }
                let dot: f64 = g.data().iter().zip(self.core.data()).map(|(x, y)| x * y).sum();
                sq += wk * wl * dot;
            }
        }
        sq.max(0.0).sqrt()
    }

    fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|w| *w *= s);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Fraction of all entries sampled into train and test together.
    pub density: f64,
    /// Share of the sampled entries held out for testing.
    pub test_fraction: f64,
    /// Gaussian noise level on training values, relative to unit RMS signal.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(dims: Vec<usize>, ranks: Vec<usize>, density: f64, seed: u64) -> Self {
        SynthConfig {
            dims,
            ranks,
            density,
            test_fraction: 0.2,
            noise_sigma: 0.0,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub train: SparseTensor,
    pub test: SparseTensor,
    pub truth: PlantedTensor,
}

/// Planted low-rank tensor with disjoint train/test samples.
///
/// `W*` is scaled to unit root-mean-square over all entries. Test values are
/// always noise free.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthData> {
    let dims = Dims::new(cfg.dims.clone())?;
    if cfg.ranks.len() != dims.order() {
        return Err(Error::Config(format!("{} ranks for {} modes", cfg.ranks.len(), dims.order())));
    }
    for (k, &r) in cfg.ranks.iter().enumerate() {
        if r == 0 || r > dims.size(k) {
            return Err(Error::Config(format!("rank {r} invalid for mode size {}", dims.size(k))));
        }
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(Error::Config(format!("density must lie in (0, 1], got {}", cfg.density)));
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {}", cfg.test_fraction)));
    }
    if !(cfg.noise_sigma >= 0.0) || !cfg.noise_sigma.is_finite() {
        return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", cfg.noise_sigma)));
    }
    let total = usize::try_from(dims.total())
        .map_err(|_| Error::Config("tensor too large to sample".into()))?;
    let sampled = (cfg.density * total as f64).round() as usize;
    let n_test = (cfg.test_fraction * sampled as f64).round() as usize;
    let n_train = sampled.saturating_sub(n_test);
    if n_train == 0 || n_test == 0 {
        return Err(Error::Config(format!(
            "density {} of {total} entries leaves an empty split",
            cfg.density
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let factors: Vec<DMatrix<f64>> = (0..dims.order())
        .map(|k| random_point_with(dims.size(k), cfg.ranks[k], &mut rng).into_matrix())
        .collect();
    let core_dims = Dims::new(cfg.ranks.clone())?;
    let core = DenseTensor::from_fn(core_dims, |_| rng.sample(StandardNormal));
    let mut truth = PlantedTensor::new(dims.clone(), core, factors, vec![1.0; dims.order()])?;
    let norm = truth.frob_norm();
    if norm > 0.0 {
        truth.scale((total as f64).sqrt() / norm);
    }

    let picked = rand::seq::index::sample(&mut rng, total, sampled).into_vec();
    let to_index = |mut lin: usize| {
        dims.sizes()
            .iter()
            .map(|&n| {
                let i = lin % n;
                lin /= n;
                i
            })
            .collect::<Vec<_>>()
    };
    let train_idx: Vec<Vec<usize>> = picked[..n_train].iter().map(|&l| to_index(l)).collect();
    let test_idx: Vec<Vec<usize>> = picked[n_train..].iter().map(|&l| to_index(l)).collect();
    let train_support = Support::new(dims.clone(), train_idx)?;
    let test_support = Support::new(dims, test_idx)?;

    let mut train = truth.evaluate(&train_support);
    if cfg.noise_sigma > 0.0 {
        for v in train.values_mut() {
            *v += cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let test = truth.evaluate(&test_support);
    Ok(SynthData { train, test, truth })
}
