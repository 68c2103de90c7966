//! Trained completion models in representer form
//! `W = sum_k lambda_k (Z x_k U_k U_k^T)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{self, DenseFactor, Dims, SparseTensor, Support};

/// Which fixed-rank problem produced a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// Minimize the dual value over the factors, with `Z` the inner maximizer.
    Dual,
    /// Least-squares fit over factors and `Z` jointly.
    LeastSquares,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Dual => "dual",
            Formulation::LeastSquares => "ls",
        })
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" => Ok(Formulation::Dual),
            "ls" => Ok(Formulation::LeastSquares),
            other => Err(Error::Config(format!(
                "unknown formulation '{other}' (expected dual or ls)"
            ))),
        }
    }
}

/// Everything needed to evaluate the learned tensor at any index.
#[derive(Clone, Debug)]
pub struct CompletionModel {
    pub formulation: Formulation,
    pub dims: Dims,
    pub ranks: Vec<usize>,
    /// Scalar regularization parameter chosen by the user or by CV.
    pub lambda: f64,
    /// Per-mode weights actually used (normally `lambda * n_k`).
    pub lambdas: Vec<f64>,
    pub factors: Vec<DenseFactor>,
    pub z: SparseTensor,
}

/// Per-mode weights `lambda_k = lambda * n_k`.
pub fn mode_scaled_lambdas(lambda: f64, dims: &Dims) -> Vec<f64> {
    dims.sizes().iter().map(|&n| lambda * n as f64).collect()
}

impl CompletionModel {
    pub fn validate(&self) -> Result<()> {
        let k = self.dims.order();
        if self.ranks.len() != k || self.lambdas.len() != k || self.factors.len() != k {
            return Err(Error::Shape(format!(
                "model with {k} modes has {} ranks, {} weights, {} factors",
                self.ranks.len(),
                self.lambdas.len(),
                self.factors.len()
            )));
        }
        for (mode, u) in self.factors.iter().enumerate() {
            if u.shape() != (self.dims.size(mode), self.ranks[mode]) {
                return Err(Error::Shape(format!(
                    "factor {mode} is {:?}, expected ({}, {})",
                    u.shape(),
                    self.dims.size(mode),
                    self.ranks[mode]
                )));
            }
        }
        if self.z.dims() != &self.dims {
            return Err(Error::Shape("Z dims differ from model dims".into()));
        }
        Ok(())
    }

    /// `W^(k)` evaluated on `query`.
    pub fn component_on(&self, mode: usize, query: &Arc<Support>) -> Result<SparseTensor> {
        let u = &self.factors[mode];
        let w = tensor::mode_multiply_on_support(&self.z, mode, u, u, query)?;
        Ok(w.scaled(self.lambdas[mode]))
    }

    /// `W` evaluated on `query`.
    pub fn predict(&self, query: &Arc<Support>) -> Result<SparseTensor> {
        if query.dims() != &self.dims {
            return Err(Error::Shape(format!(
                "query dims {:?} differ from model dims {:?}",
                query.dims().sizes(),
                self.dims.sizes()
            )));
        }
        let mut acc = vec![0.0; query.nnz()];
        for mode in 0..self.dims.order() {
            let w = self.component_on(mode, query)?;
            acc.iter_mut().zip(w.values()).for_each(|(a, b)| *a += b);
        }
        SparseTensor::new(Arc::clone(query), acc)
    }

    /// `||W^(k)||_F` for every mode, without densifying.
    ///
    /// `||U U^T Z_(k)||_F^2 = trace((U^T U)(U^T Z_(k) Z_(k)^T U))`.
    pub fn component_norms(&self) -> Result<Vec<f64>> {
        (0..self.dims.order())
            .map(|mode| {
                let u = &self.factors[mode];
                let m = tensor::zzt_u(&self.z, mode, u)?;
                let s = u.transpose() * m;
                let g = u.transpose() * u;
                let sq = (g * s).trace().max(0.0);
                Ok(self.lambdas[mode].abs() * sq.sqrt())
            })
            .collect()
    }

    /// `||W^(k)||_F / sum_j ||W^(j)||_F`.
    pub fn relative_sparsity(&self) -> Result<Vec<f64>> {
        let norms = self.component_norms()?;
        let total: f64 = norms.iter().sum();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::UndefinedMetric(
                "relative sparsity of an all-zero model".into(),
            ));
        }
        Ok(norms.iter().map(|n| n / total).collect())
    }
}
