//! Fixed-rank dual formulation.
//!
//! For factors `u = (U_1, ..., U_K)` the cost is
//!
//! ```text
//! g(u) = max_{Z in C} <Z, Y> - ||Z||^2 / 2 - sum_k lambda_k / 2 ||U_k^T Z_(k)||^2
//! ```
//!
//! whose maximizer solves the sparse linear system
//! `Z + sum_k lambda_k (Z x_k U_k U_k^T)_Omega = Y_Omega`. The system is solved by
//! conjugate gradients on the support; gradients follow from Danskin's theorem.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::CostModel;
use crate::model::{CompletionModel, Formulation};
use crate::product::{ProductManifold, ProductPoint, ProductVector};
use crate::tensor::{self, DenseFactor, SparseTensor, Support};

/// The operator `Z -> Z + sum_k lambda_k (Z x_k U_k U_k^T)_Omega`.
pub struct LinOpA<'a> {
    pub factors: &'a [DenseFactor],
    pub lambdas: &'a [f64],
    pub support: &'a Arc<Support>,
}

impl LinOpA<'_> {
    pub fn apply(&self, z: &SparseTensor) -> Result<SparseTensor> {
        if !z.support().same_as(self.support) {
            return Err(Error::SupportMismatch);
        }
        let mut out = z.values().to_vec();
        for (mode, (u, &lam)) in self.factors.iter().zip(self.lambdas).enumerate() {
            if lam == 0.0 {
                continue;
            }
            let w = tensor::mode_multiply_on_support(z, mode, u, u, self.support)?;
            out.iter_mut().zip(w.values()).for_each(|(o, v)| *o += lam * v);
        }
        Ok(z.with_values(out))
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: SparseTensor,
    /// `||b - A x|| / ||b||` at exit (zero when `b = 0`).
    pub rel_residual: f64,
    pub iters: usize,
}

/// Conjugate gradients for a symmetric positive definite operator on a support.
pub fn conjugate_gradient(
    apply: impl Fn(&SparseTensor) -> Result<SparseTensor>,
    b: &SparseTensor,
    x0: SparseTensor,
    tol: f64,
    max_iters: usize,
) -> Result<CgSolution> {
    let b_norm = tensor::frob_norm(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: SparseTensor::zeros(Arc::clone(b.support())),
            rel_residual: 0.0,
            iters: 0,
        });
    }
    let mut x = x0;
    let mut r = b.lincomb(1.0, -1.0, &apply(&x)?)?;
    let mut rr = tensor::inner(&r, &r)?;
    let mut p = r.clone();
    let mut iters = 0;
    while rr.sqrt() > tol * b_norm && iters < max_iters {
        let ap = apply(&p)?;
        let pap = tensor::inner(&p, &ap)?;
        if !pap.is_finite() || pap <= 0.0 {
            if pap.is_finite() && rr.sqrt() <= 1e-14 * b_norm {
                break;
            }
            return Err(Error::Solver(format!(
                "curvature p^T A p = {pap} at iteration {iters}, residual {}",
                rr.sqrt() / b_norm
            )));
        }
        let alpha = rr / pap;
        x = p.lincomb(alpha, 1.0, &x)?;
        r = ap.lincomb(-alpha, 1.0, &r)?;
        let rr_new = tensor::inner(&r, &r)?;
        if !rr_new.is_finite() {
            return Err(Error::Solver(format!("non-finite residual at iteration {iters}")));
        }
        p = p.lincomb(rr_new / rr, 1.0, &r)?;
        rr = rr_new;
        iters += 1;
    }
    Ok(CgSolution {
        x,
        rel_residual: rr.sqrt() / b_norm,
        iters,
    })
}

/// Running totals of inner solves, for diagnostics and benchmarks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InnerStats {
    pub solves: usize,
    pub cg_iters: usize,
    pub last_rel_residual: f64,
}

/// Dual cost `g(u)` with cached inner maximizers.
#[derive(Clone, Debug)]
pub struct DualCost {
    y: SparseTensor,
    lambdas: Vec<f64>,
    ranks: Vec<usize>,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    warm_start: Option<SparseTensor>,
    cache: Vec<(Vec<DenseFactor>, Arc<SparseTensor>)>,
    stats: InnerStats,
}

const CACHE_SLOTS: usize = 2;

impl DualCost {
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
        Ok(DualCost {
            y,
            lambdas,
            ranks,
            inner_tol: 1e-10,
            inner_max_iters: 100,
            warm_start: None,
            cache: Vec::with_capacity(CACHE_SLOTS),
            stats: InnerStats::default(),
        })
    }

    pub fn with_inner(mut self, tol: f64, max_iters: usize) -> Self {
        self.inner_tol = tol;
        self.inner_max_iters = max_iters;
        self
    }

    pub fn with_warm_start(mut self, z: SparseTensor) -> Self {
        self.warm_start = Some(z);
        self
    }

    pub fn y(&self) -> &SparseTensor {
        &self.y
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn stats(&self) -> &InnerStats {
        &self.stats
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.y.dims().sizes().iter().copied().zip(self.ranks.iter().copied()).collect()
    }

    pub fn manifold(&self) -> Result<ProductManifold> {
        ProductManifold::new(&self.shapes(), None)
    }

    fn check_factors(&self, u: &[DenseFactor]) -> Result<()> {
        if u.len() != self.lambdas.len() {
            return Err(Error::Shape(format!(
                "{} factors for {} modes",
                u.len(),
                self.lambdas.len()
            )));
        }
        for (k, f) in u.iter().enumerate() {
            if f.nrows() != self.y.dims().size(k) {
                return Err(Error::Shape(format!(
                    "factor {k} has {} rows, mode size {}",
                    f.nrows(),
                    self.y.dims().size(k)
                )));
            }
        }
        Ok(())
    }

    pub fn operator<'a>(&'a self, u: &'a [DenseFactor]) -> LinOpA<'a> {
        LinOpA {
            factors: u,
            lambdas: &self.lambdas,
            support: self.y.support(),
        }
    }

    /// Solves for the inner maximizer at `u`, reusing cached solutions.
    pub fn inner_solve(&mut self, u: &[DenseFactor]) -> Result<Arc<SparseTensor>> {
        self.check_factors(u)?;
        if let Some((_, z)) = self.cache.iter().find(|(key, _)| key.as_slice() == u) {
            return Ok(Arc::clone(z));
        }
        let x0 = self
            .warm_start
            .clone()
            .filter(|w| w.support().same_as(self.y.support()))
            .unwrap_or_else(|| self.y.clone());
        let sol = {
            let op = self.operator(u);
            conjugate_gradient(|z| op.apply(z), &self.y, x0, self.inner_tol, self.inner_max_iters)?
        };
        self.stats.solves += 1;
        self.stats.cg_iters += sol.iters;
        self.stats.last_rel_residual = sol.rel_residual;
        self.warm_start = Some(sol.x.clone());
        let z = Arc::new(sol.x);
        if self.cache.len() == CACHE_SLOTS {
            self.cache.remove(0);
        }
        self.cache.push((u.to_vec(), Arc::clone(&z)));
        Ok(z)
    }

    /// Directional derivative of the maximizer along `v`:
    /// `A Zdot = -sum_k lambda_k (Z x_k (V_k U_k^T + U_k V_k^T))_Omega`.
    pub fn inner_solve_dot(
        &mut self,
        u: &[DenseFactor],
        v: &[DenseFactor],
        z_hat: &SparseTensor,
    ) -> Result<SparseTensor> {
        self.check_factors(u)?;
        self.check_factors(v)?;
        let support = self.y.support();
        let mut rhs = vec![0.0; support.nnz()];
        for (mode, &lam) in self.lambdas.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            let (uk, vk) = (&u[mode], &v[mode]);
            let w = tensor::mode_multiply_sum(&[(z_hat, vk, uk), (z_hat, uk, vk)], mode, support)?;
            rhs.iter_mut().zip(w.values()).for_each(|(r, x)| *r -= lam * x);
        }
        let b = SparseTensor::new(Arc::clone(support), rhs)?;
        let sol = {
            let op = self.operator(u);
            conjugate_gradient(
                |z| op.apply(z),
                &b,
                SparseTensor::zeros(Arc::clone(support)),
                self.inner_tol,
                self.inner_max_iters,
            )?
        };
        self.stats.solves += 1;
        self.stats.cg_iters += sol.iters;
        self.stats.last_rel_residual = sol.rel_residual;
        Ok(sol.x)
    }

    /// Inner objective evaluated at a given `z`.
    pub fn objective_at(&self, u: &[DenseFactor], z: &SparseTensor) -> Result<f64> {
        let mut val = tensor::inner(z, &self.y)? - 0.5 * tensor::frob_norm(z).powi(2);
        for (mode, &lam) in self.lambdas.iter().enumerate() {
            if lam != 0.0 {
                val -= 0.5 * lam * tensor::gram_norm(z, mode, &u[mode])?;
            }
        }
        Ok(val)
    }

    pub fn cost_value(&mut self, u: &[DenseFactor]) -> Result<f64> {
        let z = self.inner_solve(u)?;
        self.objective_at(u, &z)
    }

    /// `(-lambda_k Z_(k) Z_(k)^T U_k)_k`.
    pub fn egrad_factors(&mut self, u: &[DenseFactor]) -> Result<Vec<DenseFactor>> {
        let z = self.inner_solve(u)?;
        u.iter()
            .enumerate()
            .map(|(mode, uk)| Ok(tensor::zzt_u(&z, mode, uk)? * (-self.lambdas[mode])))
            .collect()
    }

    /// `(-lambda_k (Z Z^T V_k + (Zdot Z^T + Z Zdot^T) U_k))_k`.
    pub fn ehess_factors(&mut self, u: &[DenseFactor], v: &[DenseFactor]) -> Result<Vec<DenseFactor>> {
        let z = self.inner_solve(u)?;
        let zdot = self.inner_solve_dot(u, v, &z)?;
        (0..u.len())
            .map(|mode| {
                let lam = self.lambdas[mode];
                let uk = &u[mode];
                let a = tensor::cross_unfold_sum(
                    &[(&z, &z, &v[mode]), (&zdot, &z, uk), (&z, &zdot, uk)],
                    mode,
                )?;
                Ok(a * (-lam))
            })
            .collect()
    }

    /// Packages the factors and the inner maximizer as a model.
    pub fn recover_model(&mut self, u: &[DenseFactor], lambda: f64) -> Result<CompletionModel> {
        let z = self.inner_solve(u)?;
        Ok(CompletionModel {
            formulation: Formulation::Dual,
            dims: self.y.dims().clone(),
            ranks: self.ranks.clone(),
            lambda,
            lambdas: self.lambdas.clone(),
            factors: u.to_vec(),
            z: (*z).clone(),
        })
    }
}

impl CostModel<ProductManifold> for DualCost {
    fn cost(&mut self, x: &ProductPoint) -> Result<f64> {
        self.cost_value(&x.factor_matrices())
    }

    fn egrad(&mut self, x: &ProductPoint) -> Result<ProductVector> {
        Ok(ProductVector {
            factors: self.egrad_factors(&x.factor_matrices())?,
            z: None,
        })
    }

    fn ehess(&mut self, x: &ProductPoint, v: &ProductVector) -> Result<ProductVector> {
        Ok(ProductVector {
            factors: self.ehess_factors(&x.factor_matrices(), &v.factors)?,
            z: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrahedron::random_point;
    use crate::tensor::Dims;
    use nalgebra::DMatrix;

    fn scalar_problem(y: f64, lambdas: Vec<f64>) -> DualCost {
        let k = lambdas.len();
        let dims = Dims::new(vec![1; k]).unwrap();
        let y = SparseTensor::from_entries(dims, vec![(vec![0; k], y)]).unwrap();
        DualCost::new(y, lambdas, vec![1; k]).unwrap()
    }

    fn ones(k: usize) -> Vec<DenseFactor> {
        vec![DMatrix::from_element(1, 1, 1.0); k]
    }

    #[test]
    fn zero_weights_make_a_identity() {
        let dims = Dims::new(vec![3, 2, 2]).unwrap();
        let y = SparseTensor::from_entries(
            dims,
            vec![(vec![0, 0, 0], 1.0), (vec![2, 1, 0], -3.0), (vec![1, 1, 1], 0.5)],
        )
        .unwrap();
        let u: Vec<_> = [(3, 2), (2, 1), (2, 2)]
            .iter()
            .enumerate()
            .map(|(k, &(n, r))| random_point(n, r, k as u64).into_matrix())
            .collect();
        let mut cost = DualCost::new(y.clone(), vec![0.0; 3], vec![2, 1, 2]).unwrap();
        let op_out = cost.operator(&u).apply(&y).unwrap();
        assert_eq!(op_out.values(), y.values());
        let z = cost.inner_solve(&u).unwrap();
        assert_eq!(z.values(), y.values());
        let v: Vec<_> = u.iter().map(|m| m * 0.3).collect();
        assert!(cost.inner_solve_dot(&u, &v, &z).unwrap().is_zero());
    }

    #[test]
    fn scalar_collapse() {
        let (y, lam) = (2.5, vec![0.5, 1.0, 1.5]);
        let mut cost = scalar_problem(y, lam.clone());
        let u = ones(3);
        let s: f64 = lam.iter().sum();
        let yt = cost.y().clone();
        let az = cost.operator(&u).apply(&yt).unwrap();
        assert!((az.values()[0] - (1.0 + s) * y).abs() < 1e-15);
        let z = cost.inner_solve(&u).unwrap().values()[0];
        assert!((z - y / (1.0 + s)).abs() < 1e-14);
        let g = cost.cost_value(&u).unwrap();
        let expected = y * z - 0.5 * z * z - 0.5 * s * z * z;
        assert!((g - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_data_gives_zero_cost_and_gradient() {
        let mut cost = scalar_problem(0.0, vec![1.0, 2.0]);
        let u = ones(2);
        assert_eq!(cost.cost_value(&u).unwrap(), 0.0);
        assert!(cost.egrad_factors(&u).unwrap().iter().all(|g| g.norm() == 0.0));
    }

    #[test]
    fn zero_weight_mode_has_zero_gradient() {
        let dims = Dims::new(vec![3, 3]).unwrap();
        let y = SparseTensor::from_entries(
            dims,
            vec![(vec![0, 0], 1.0), (vec![1, 2], 2.0), (vec![2, 1], -1.0)],
        )
        .unwrap();
        let mut cost = DualCost::new(y, vec![0.0, 1.0], vec![2, 2]).unwrap();
        let u = vec![
            random_point(3, 2, 1).into_matrix(),
            random_point(3, 2, 2).into_matrix(),
        ];
        let g = cost.egrad_factors(&u).unwrap();
        assert_eq!(g[0].norm(), 0.0);
        assert!(g[1].norm() > 0.0);
        let zero_dir: Vec<_> = u.iter().map(|m| m * 0.0).collect();
        let h = cost.ehess_factors(&u, &zero_dir).unwrap();
        assert!(h.iter().all(|m| m.norm() < 1e-14));
    }

    #[test]
    fn cache_reuses_solutions() {
        let mut cost = scalar_problem(1.0, vec![1.0, 1.0]);
        let u = ones(2);
        cost.cost_value(&u).unwrap();
        cost.egrad_factors(&u).unwrap();
        assert_eq!(cost.stats().solves, 1);
    }

    #[test]
    fn invalid_configuration() {
        let dims = Dims::new(vec![2, 2]).unwrap();
        let y = SparseTensor::from_entries(dims, vec![(vec![0, 0], 1.0)]).unwrap();
        assert!(DualCost::new(y.clone(), vec![1.0], vec![1, 1]).is_err());
        assert!(DualCost::new(y.clone(), vec![-1.0, 1.0], vec![1, 1]).is_err());
        assert!(DualCost::new(y, vec![1.0, 1.0], vec![3, 1]).is_err());
    }
}
