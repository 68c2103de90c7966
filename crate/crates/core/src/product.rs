//! Products of spectrahedra, optionally times the flat space of tensors
//! supported on a fixed index set.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::spectrahedron::{self, FactorPoint, Spectrahedron};
use crate::tensor::{DenseFactor, SparseTensor, Support};

/// `(U_1, ..., U_K)` and, for the least-squares formulation, a sparse `Z`.
#[derive(Clone, Debug)]
pub struct ProductPoint {
    pub factors: Vec<FactorPoint>,
    pub z: Option<SparseTensor>,
}

impl ProductPoint {
    pub fn factor_matrices(&self) -> Vec<DenseFactor> {
        self.factors.iter().map(|f| f.matrix().clone()).collect()
    }
}

/// Tangent (or ambient) vector of a [`ProductPoint`].
#[derive(Clone, Debug)]
pub struct ProductVector {
    pub factors: Vec<DenseFactor>,
    pub z: Option<SparseTensor>,
}

/// `S(n_1, r_1) x ... x S(n_K, r_K) [x C]` with the sum metric.
#[derive(Clone, Debug)]
pub struct ProductManifold {
    components: Vec<Spectrahedron>,
    z_support: Option<Arc<Support>>,
}

impl ProductManifold {
    pub fn new(shapes: &[(usize, usize)], z_support: Option<Arc<Support>>) -> Result<Self> {
        let components = shapes
            .iter()
            .map(|&(n, r)| Spectrahedron::new(n, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProductManifold {
            components,
            z_support,
        })
    }

    pub fn components(&self) -> &[Spectrahedron] {
        &self.components
    }

    pub fn z_support(&self) -> Option<&Arc<Support>> {
        self.z_support.as_ref()
    }

    /// Checks that `x` has one factor per component with matching shapes,
    /// and a `z` exactly when the manifold has a flat component.
    pub fn check_point(&self, x: &ProductPoint) -> Result<()> {
        if x.factors.len() != self.components.len() {
            return Err(Error::Shape(format!(
                "{} factors for {} components",
                x.factors.len(),
                self.components.len()
            )));
        }
        for (f, c) in x.factors.iter().zip(&self.components) {
            if (f.rows(), f.rank()) != (c.n, c.r) {
                return Err(Error::Shape(format!(
                    "factor {}x{} for component {}x{}",
                    f.rows(),
                    f.rank(),
                    c.n,
                    c.r
                )));
            }
        }
        match (&self.z_support, &x.z) {
            (None, None) => Ok(()),
            (Some(s), Some(z)) if z.support().same_as(s) => Ok(()),
            (Some(_), Some(_)) => Err(Error::SupportMismatch),
            _ => Err(Error::Shape("flat component presence differs".into())),
        }
    }

    fn zip_z(
        &self,
        a: &Option<SparseTensor>,
        b: &Option<SparseTensor>,
        f: impl FnOnce(&SparseTensor, &SparseTensor) -> SparseTensor,
    ) -> Option<SparseTensor> {
        match (a, b) {
            (Some(a), Some(b)) => Some(f(a, b)),
            _ => None,
        }
    }
}

impl Manifold for ProductManifold {
    type Point = ProductPoint;
    type Vector = ProductVector;

    fn dim(&self) -> usize {
        self.components.iter().map(|c| c.dim()).sum::<usize>()
            + self.z_support.as_ref().map_or(0, |s| s.nnz())
    }

    fn inner(&self, x: &ProductPoint, a: &ProductVector, b: &ProductVector) -> f64 {
        let mut total: f64 = self
            .components
            .iter()
            .zip(&x.factors)
            .zip(a.factors.iter().zip(&b.factors))
            .map(|((c, p), (u, v))| c.inner(p, u, v))
            .sum();
        if let (Some(za), Some(zb)) = (&a.z, &b.z) {
            total += crate::tensor::inner(za, zb).expect("aligned flat components");
        }
        total
    }

    fn zero_vector(&self, x: &ProductPoint) -> ProductVector {
        ProductVector {
            factors: self
                .components
                .iter()
                .zip(&x.factors)
                .map(|(c, p)| c.zero_vector(p))
                .collect(),
            z: self.z_support.as_ref().map(|s| SparseTensor::zeros(Arc::clone(s))),
        }
    }

    fn lincomb(&self, x: &ProductPoint, a: f64, u: &ProductVector, b: f64, v: &ProductVector)
        -> ProductVector {
        ProductVector {
            factors: self
                .components
                .iter()
                .zip(&x.factors)
                .zip(u.factors.iter().zip(&v.factors))
                .map(|((c, p), (uu, vv))| c.lincomb(p, a, uu, b, vv))
                .collect(),
            z: self.zip_z(&u.z, &v.z, |zu, zv| zu.lincomb(a, b, zv).expect("aligned")),
        }
    }

    fn project(&self, x: &ProductPoint, v: &ProductVector) -> ProductVector {
        ProductVector {
            factors: self
                .components
                .iter()
                .zip(&x.factors)
                .zip(&v.factors)
                .map(|((c, p), vv)| c.project(p, vv))
                .collect(),
            z: v.z.clone(),
        }
    }

    fn retract(&self, x: &ProductPoint, v: &ProductVector) -> Result<ProductPoint> {
        let factors = self
            .components
            .iter()
            .zip(&x.factors)
            .zip(&v.factors)
            .map(|((c, p), vv)| c.retract(p, vv))
            .collect::<Result<Vec<_>>>()?;
        let z = match (&x.z, &v.z) {
            (Some(z), Some(dz)) => Some(crate::tensor::axpy(1.0, dz, z)?),
            (None, None) => None,
            _ => return Err(Error::Shape("flat component presence differs".into())),
        };
        Ok(ProductPoint { factors, z })
    }

    fn egrad_to_rgrad(&self, x: &ProductPoint, egrad: &ProductVector) -> ProductVector {
        ProductVector {
            factors: self
                .components
                .iter()
                .zip(&x.factors)
                .zip(&egrad.factors)
                .map(|((c, p), g)| c.egrad_to_rgrad(p, g))
                .collect(),
            z: egrad.z.clone(),
        }
    }

    fn ehess_to_rhess(
        &self,
        x: &ProductPoint,
        egrad: &ProductVector,
        ehess: &ProductVector,
        v: &ProductVector,
    ) -> ProductVector {
        let factors = (0..self.components.len())
            .map(|k| {
                self.components[k].ehess_to_rhess(
                    &x.factors[k],
                    &egrad.factors[k],
                    &ehess.factors[k],
                    &v.factors[k],
                )
            })
            .collect();
        ProductVector {
            factors,
            z: ehess.z.clone(),
        }
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ProductPoint {
        let factors = self.components.iter().map(|c| c.random_point(rng)).collect();
        let z = self.z_support.as_ref().map(|s| {
            let values = (0..s.nnz()).map(|_| rng.sample(StandardNormal)).collect();
            SparseTensor::new(Arc::clone(s), values).expect("finite normals")
        });
        ProductPoint { factors, z }
    }

    fn random_tangent<R: Rng + ?Sized>(&self, x: &ProductPoint, rng: &mut R) -> ProductVector {
        let factors: Vec<DenseFactor> = self
            .components
            .iter()
            .zip(&x.factors)
            .map(|(c, p)| c.random_tangent(p, rng))
            .collect();
        let z = self.z_support.as_ref().map(|s| {
            let values = (0..s.nnz()).map(|_| rng.sample(StandardNormal)).collect();
            SparseTensor::new(Arc::clone(s), values).expect("finite normals")
        });
        let v = ProductVector { factors, z };
        let norm = self.norm(x, &v);
        if norm > 0.0 {
            self.lincomb(x, 1.0 / norm, &v, 0.0, &v)
        } else {
            v
        }
    }

    fn constraint_violation(&self, x: &ProductPoint) -> f64 {
        self.components
            .iter()
            .zip(&x.factors)
            .map(|(c, p)| c.constraint_violation(p))
            .fold(0.0, f64::max)
    }
}

/// Converts a plain spectrahedron vector list into product form.
pub fn factors_only(factors: Vec<DenseFactor>) -> ProductVector {
    ProductVector { factors, z: None }
}

/// Random product point with one seeded factor per component.
pub fn random_factors(shapes: &[(usize, usize)], seed: u64) -> Vec<FactorPoint> {
    shapes
        .iter()
        .enumerate()
        .map(|(k, &(n, r))| spectrahedron::random_point(n, r, seed.wrapping_add(k as u64)))
        .collect()
}
