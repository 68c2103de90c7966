//! Fixed-rank least-squares formulation.
//!
//! Factors and a sparse `Z` on the training support are fitted jointly:
//!
//! ```text
//! h(u, Z) = ||R||^2,   R = sum_k lambda_k (Z x_k U_k U_k^T)_Omega - Y_Omega
//! ```

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::CostModel;
use crate::model::{CompletionModel, Formulation};
use crate::product::{random_factors, ProductManifold, ProductPoint, ProductVector};
use crate::tensor::{self, DenseFactor, SparseTensor};

#[derive(Clone, Debug)]
pub struct LsCost {
    y: SparseTensor,
    lambdas: Vec<f64>,
    ranks: Vec<usize>,
    last_residual: Option<(Vec<DenseFactor>, SparseTensor, SparseTensor)>,
}

impl LsCost {
    pub fn new(y: SparseTensor, lambdas: Vec<f64>, ranks: Vec<usize>) -> Result<Self> {
        let dims = y.dims();
        if lambdas.len() != dims.order() || ranks.len() != dims.order() {
            return Err(Error::Config(format!(
                "{} weights and {} ranks for a {}-mode tensor",
                lambdas.len(),
                ranks.len(),
                dims.order()
            )));
        }
        if lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!("weights must be finite and >= 0: {lambdas:?}")));
        }
        for (k, &r) in ranks.iter().enumerate() {
            if r == 0 || r > dims.size(k) {
                return Err(Error::Config(format!(
                    "rank {r} invalid for mode {k} of size {}",
                    dims.size(k)
                )));
            }
        }
        Ok(LsCost {
            y,
            lambdas,
            ranks,
            last_residual: None,
        })
    }

    pub fn y(&self) -> &SparseTensor {
        &self.y
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.y.dims().sizes().iter().copied().zip(self.ranks.iter().copied()).collect()
    }

    pub fn manifold(&self) -> Result<ProductManifold> {
        ProductManifold::new(&self.shapes(), Some(Arc::clone(self.y.support())))
    }

    /// Seeded random factors with `Z = Y / (1 + sum_k lambda_k)`.
    pub fn initial_point(&self, seed: u64) -> ProductPoint {
        let s: f64 = self.lambdas.iter().sum();
        ProductPoint {
            factors: random_factors(&self.shapes(), seed),
            z: Some(self.y.scaled(1.0 / (1.0 + s))),
        }
    }

    fn check_z<'a>(&self, z: Option<&'a SparseTensor>) -> Result<&'a SparseTensor> {
        let z = z.ok_or_else(|| Error::Shape("least-squares point needs a Z component".into()))?;
        if !z.support().same_as(self.y.support()) {
            return Err(Error::SupportMismatch);
        }
        Ok(z)
    }

    /// `sum_k lambda_k sum_t (Z_t x_k L_tk R_tk^T)_Omega`, skipping zero weights.
    fn weighted_sum(&self, terms: &[(&SparseTensor, &[DenseFactor], &[DenseFactor])]) -> Result<Vec<f64>> {
        let support = self.y.support();
        let mut acc = vec![0.0; support.nnz()];
        for (mode, &lam) in self.lambdas.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            let per_mode: Vec<_> = terms.iter().map(|&(z, l, r)| (z, &l[mode], &r[mode])).collect();
            let w = tensor::mode_multiply_sum(&per_mode, mode, support)?;
            acc.iter_mut().zip(w.values()).for_each(|(a, b)| *a += lam * b);
        }
        Ok(acc)
    }

    pub fn residual(&self, u: &[DenseFactor], z: &SparseTensor) -> Result<SparseTensor> {
        let z = self.check_z(Some(z))?;
        let mut r = self.weighted_sum(&[(z, u, u)])?;
        r.iter_mut().zip(self.y.values()).for_each(|(a, y)| *a -= y);
        Ok(self.y.with_values(r))
    }

    pub fn cost_value(&self, u: &[DenseFactor], z: &SparseTensor) -> Result<f64> {
        Ok(tensor::frob_norm(&self.residual(u, z)?).powi(2))
    }

    /// Euclidean gradient `(2 lambda_k (R Z^T + Z R^T) U_k, 2 sum_k lambda_k (R x_k U U^T)_Omega)`.
    pub fn egrad_parts(
        &self,
        u: &[DenseFactor],
        z: &SparseTensor,
    ) -> Result<(Vec<DenseFactor>, SparseTensor)> {
        let r = self.residual(u, z)?;
        self.egrad_with_residual(u, z, &r)
    }

    fn egrad_with_residual(
        &self,
        u: &[DenseFactor],
        z: &SparseTensor,
        r: &SparseTensor,
    ) -> Result<(Vec<DenseFactor>, SparseTensor)> {
        let gu = u
            .iter()
            .enumerate()
            .map(|(mode, uk)| {
                let lam = self.lambdas[mode];
                if lam == 0.0 {
                    return Ok(DenseFactor::zeros(uk.nrows(), uk.ncols()));
                }
                let m = tensor::cross_unfold_sum(&[(r, z, uk), (z, r, uk)], mode)?;
                Ok(m * (2.0 * lam))
            })
            .collect::<Result<Vec<_>>>()?;
        let gz = self.weighted_sum(&[(r, u, u)])?;
        Ok((gu, self.y.with_values(gz.into_iter().map(|v| 2.0 * v).collect())))
    }

    /// Euclidean Hessian applied to `(V, Zdot)`.
    pub fn ehess_parts(
        &self,
        u: &[DenseFactor],
        z: &SparseTensor,
        v: &[DenseFactor],
        zdot: &SparseTensor,
    ) -> Result<(Vec<DenseFactor>, SparseTensor)> {
        let r = self.residual(u, z)?;
        self.ehess_with_residual(u, z, v, zdot, &r)
    }

    fn ehess_with_residual(
        &self,
        u: &[DenseFactor],
        z: &SparseTensor,
        v: &[DenseFactor],
        zdot: &SparseTensor,
        r: &SparseTensor,
    ) -> Result<(Vec<DenseFactor>, SparseTensor)> {
        let zdot = self.check_z(Some(zdot))?;
        let rdot = self.y.with_values(self.weighted_sum(&[(zdot, u, u), (z, v, u), (z, u, v)])?);

        let hu = u
            .iter()
            .enumerate()
            .map(|(mode, uk)| {
                let lam = self.lambdas[mode];
                if lam == 0.0 {
                    return Ok(DenseFactor::zeros(uk.nrows(), uk.ncols()));
                }
                let vk = &v[mode];
                let m = tensor::cross_unfold_sum(
                    &[
                        (&rdot, z, uk),
                        (r, zdot, uk),
                        (zdot, r, uk),
                        (z, &rdot, uk),
                        (r, z, vk),
                        (z, r, vk),
                    ],
                    mode,
                )?;
                Ok(m * (2.0 * lam))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut hz = self.weighted_sum(&[(&rdot, u, u), (r, v, u), (r, u, v)])?;
        hz.iter_mut().for_each(|h| *h *= 2.0);
        Ok((hu, self.y.with_values(hz)))
    }

    /// Residual at `(u, z)`, reusing the last one when the point repeats.
    fn cached_residual(&mut self, u: &[DenseFactor], z: &SparseTensor) -> Result<SparseTensor> {
        if let Some((cu, cz, r)) = &self.last_residual {
            if cu.as_slice() == u && cz.values() == z.values() {
                return Ok(r.clone());
            }
        }
        let r = self.residual(u, z)?;
        self.last_residual = Some((u.to_vec(), z.clone(), r.clone()));
        Ok(r)
    }

    pub fn recover_model(
        &self,
        u: &[DenseFactor],
        z: &SparseTensor,
        lambda: f64,
    ) -> Result<CompletionModel> {
        let z = self.check_z(Some(z))?;
        Ok(CompletionModel {
            formulation: Formulation::LeastSquares,
            dims: self.y.dims().clone(),
            ranks: self.ranks.clone(),
            lambda,
            lambdas: self.lambdas.clone(),
            factors: u.to_vec(),
            z: z.clone(),
        })
    }
}

impl CostModel<ProductManifold> for LsCost {
    fn cost(&mut self, x: &ProductPoint) -> Result<f64> {
        let z = self.check_z(x.z.as_ref())?;
        let r = self.cached_residual(&x.factor_matrices(), z)?;
        Ok(tensor::frob_norm(&r).powi(2))
    }

    fn egrad(&mut self, x: &ProductPoint) -> Result<ProductVector> {
        let z = self.check_z(x.z.as_ref())?;
        let u = x.factor_matrices();
        let r = self.cached_residual(&u, z)?;
        let (factors, gz) = self.egrad_with_residual(&u, z, &r)?;
        Ok(ProductVector {
            factors,
            z: Some(gz),
        })
    }

    fn ehess(&mut self, x: &ProductPoint, v: &ProductVector) -> Result<ProductVector> {
        let z = self.check_z(x.z.as_ref())?;
        let zdot = self.check_z(v.z.as_ref())?;
        let u = x.factor_matrices();
        let r = self.cached_residual(&u, z)?;
        let (factors, hz) = self.ehess_with_residual(&u, z, &v.factors, zdot, &r)?;
        Ok(ProductVector {
            factors,
            z: Some(hz),
        })
    }
}
