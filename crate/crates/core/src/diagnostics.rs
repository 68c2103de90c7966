//! Numerical self-checks: finite differences, Hessian symmetry, dense
//! operator oracles and the geometry invariants. The command-line `selftest`
//! runs [`selftest`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dual::DualCost;
use crate::error::Result;
use crate::least_squares::LsCost;
use crate::manifold::{CostModel, Manifold};
use crate::product::{random_factors, ProductManifold, ProductPoint, ProductVector};
use crate::spectrahedron::{self, random_point_with, random_tangent_with};
use crate::tensor::{self, DenseFactor, DenseTensor, Dims, SparseTensor, Support};

/// A cost that can be evaluated at arbitrary (not normalized) factors.
pub trait EuclideanCost {
    fn value_at(&mut self, x: &ProductVector) -> Result<f64>;
    fn grad_at(&mut self, x: &ProductVector) -> Result<ProductVector>;
    fn hess_at(&mut self, x: &ProductVector, v: &ProductVector) -> Result<ProductVector>;
}

impl EuclideanCost for DualCost {
    fn value_at(&mut self, x: &ProductVector) -> Result<f64> {
        self.cost_value(&x.factors)
    }

    fn grad_at(&mut self, x: &ProductVector) -> Result<ProductVector> {
        Ok(ProductVector {
            factors: self.egrad_factors(&x.factors)?,
            z: None,
        })
    }

    fn hess_at(&mut self, x: &ProductVector, v: &ProductVector) -> Result<ProductVector> {
        Ok(ProductVector {
            factors: self.ehess_factors(&x.factors, &v.factors)?,
            z: None,
        })
    }
}

fn z_of(x: &ProductVector) -> Result<&SparseTensor> {
    x.z.as_ref()
        .ok_or_else(|| crate::Error::Shape("least-squares point needs a Z component".into()))
}

impl EuclideanCost for LsCost {
    fn value_at(&mut self, x: &ProductVector) -> Result<f64> {
        self.cost_value(&x.factors, z_of(x)?)
    }

    fn grad_at(&mut self, x: &ProductVector) -> Result<ProductVector> {
        let (factors, z) = self.egrad_parts(&x.factors, z_of(x)?)?;
        Ok(ProductVector { factors, z: Some(z) })
    }

    fn hess_at(&mut self, x: &ProductVector, v: &ProductVector) -> Result<ProductVector> {
        let (factors, z) = self.ehess_parts(&x.factors, z_of(x)?, &v.factors, z_of(v)?)?;
        Ok(ProductVector { factors, z: Some(z) })
    }
}

fn axpy(a: f64, d: &ProductVector, x: &ProductVector) -> ProductVector {
    ProductVector {
        factors: x.factors.iter().zip(&d.factors).map(|(xf, df)| xf + df * a).collect(),
        z: match (&x.z, &d.z) {
            (Some(xz), Some(dz)) => Some(tensor::axpy(a, dz, xz).expect("aligned")),
            _ => None,
        },
    }
}

fn scaled(a: f64, v: &ProductVector) -> ProductVector {
    ProductVector {
        factors: v.factors.iter().map(|f| f * a).collect(),
        z: v.z.as_ref().map(|z| z.scaled(a)),
    }
}

fn dot(a: &ProductVector, b: &ProductVector) -> f64 {
    let mut s: f64 = a.factors.iter().zip(&b.factors).map(|(x, y)| x.dot(y)).sum();
    if let (Some(za), Some(zb)) = (&a.z, &b.z) {
        s += tensor::inner(za, zb).expect("aligned");
    }
    s
}

fn norm(a: &ProductVector) -> f64 {
    dot(a, a).sqrt()
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Relative error between `<grad, d>` and a central difference of the cost.
pub fn gradient_check<C: EuclideanCost>(cost: &mut C, x: &ProductVector, d: &ProductVector, h: f64) -> Result<f64> {
    let analytic = dot(&cost.grad_at(x)?, d);
    let fd = (cost.value_at(&axpy(h, d, x))? - cost.value_at(&axpy(-h, d, x))?) / (2.0 * h);
    Ok(rel((analytic - fd).abs(), analytic.abs().max(fd.abs())))
}

/// Relative error between `H d` and a central difference of the gradient.
pub fn hessian_check<C: EuclideanCost>(cost: &mut C, x: &ProductVector, d: &ProductVector, h: f64) -> Result<f64> {
    let analytic = cost.hess_at(x, d)?;
    let gp = cost.grad_at(&axpy(h, d, x))?;
    let gm = cost.grad_at(&axpy(-h, d, x))?;
    let fd = scaled(1.0 / (2.0 * h), &axpy(-1.0, &gm, &gp));
    let diff = axpy(-1.0, &fd, &analytic);
    Ok(rel(norm(&diff), norm(&analytic).max(norm(&fd))))
}

/// Relative error between `<rgrad, xi>` and a central difference of the cost
/// along the retraction curve `t -> R_x(t xi)`.
pub fn riemannian_gradient_check<M, C>(m: &M, cost: &mut C, x: &M::Point, xi: &M::Vector, t: f64) -> Result<f64>
where
    M: Manifold,
    C: CostModel<M>,
{
    let g = m.egrad_to_rgrad(x, &cost.egrad(x)?);
    let analytic = m.inner(x, &g, xi);
    let plus = m.retract(x, &m.lincomb(x, t, xi, 0.0, xi))?;
    let minus = m.retract(x, &m.lincomb(x, -t, xi, 0.0, xi))?;
    let fd = (cost.cost(&plus)? - cost.cost(&minus)?) / (2.0 * t);
    Ok(rel((analytic - fd).abs(), analytic.abs().max(fd.abs())))
}

/// Riemannian Hessian applied to `v`.
pub fn riemannian_hessian<M, C>(m: &M, cost: &mut C, x: &M::Point, v: &M::Vector) -> Result<M::Vector>
where
    M: Manifold,
    C: CostModel<M>,
{
    let eg = cost.egrad(x)?;
    let eh = cost.ehess(x, v)?;
    Ok(m.ehess_to_rhess(x, &eg, &eh, v))
}

/// `|<H xi, eta> - <xi, H eta>|` relative to `||H xi|| ||eta|| + ||xi|| ||H eta||`.
pub fn hessian_symmetry<M, C>(m: &M, cost: &mut C, x: &M::Point, xi: &M::Vector, eta: &M::Vector) -> Result<f64>
where
    M: Manifold,
    C: CostModel<M>,
{
    let hxi = riemannian_hessian(m, cost, x, xi)?;
    let heta = riemannian_hessian(m, cost, x, eta)?;
    let a = m.inner(x, &hxi, eta);
    let b = m.inner(x, xi, &heta);
    let scale = m.norm(x, &hxi) * m.norm(x, eta) + m.norm(x, xi) * m.norm(x, &heta);
    Ok(rel((a - b).abs(), scale))
}

/// The inner-system matrix built entry by entry from fiber membership:
/// `A[e, f] = [e = f] + sum_k lambda_k (U_k U_k^T)[i_k(e), i_k(f)]` whenever
/// `e` and `f` agree outside mode `k`.
pub fn dense_inner_matrix(support: &Support, factors: &[DenseFactor], lambdas: &[f64]) -> DMatrix<f64> {
    let n = support.nnz();
    let grams: Vec<DMatrix<f64>> = factors.iter().map(|u| u * u.transpose()).collect();
    DMatrix::from_fn(n, n, |e, f| {
        let (a, b) = (support.index(e), support.index(f));
        let mut v = if e == f { 1.0 } else { 0.0 };
        for (k, g) in grams.iter().enumerate() {
            let same_fiber = a.iter().zip(b).enumerate().all(|(j, (x, y))| j == k || x == y);
            if same_fiber {
                v += lambdas[k] * g[(a[k], b[k])];
            }
        }
        v
    })
}

/// Dense direct solve of the inner system for comparison with CG.
pub fn dense_inner_solve(y: &SparseTensor, factors: &[DenseFactor], lambdas: &[f64]) -> Option<SparseTensor> {
    let a = dense_inner_matrix(y.support(), factors, lambdas);
    let b = DVector::from_column_slice(y.values());
    let x = a.lu().solve(&b)?;
    Some(y.with_values(x.as_slice().to_vec()))
}

/// One named check with its measured value and threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {:.3e} (tol {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

fn random_sparse(dims: &Dims, nnz: usize, rng: &mut ChaCha8Rng) -> SparseTensor {
    let total = dims.total() as usize;
    let picked = rand::seq::index::sample(rng, total, nnz.min(total)).into_vec();
    let entries = picked
        .into_iter()
        .map(|mut lin| {
            let idx: Vec<usize> = dims
                .sizes()
                .iter()
                .map(|&n| {
                    let i = lin % n;
                    lin /= n;
                    i
                })
                .collect();
            (idx, rng.sample(StandardNormal))
        })
        .collect();
    SparseTensor::from_entries(dims.clone(), entries).expect("distinct indices")
}

fn max_over(mut results: impl Iterator<Item = Result<f64>>) -> Result<f64> {
    results.try_fold(0.0f64, |m, v| Ok(m.max(v?)))
}

/// Geometry, derivative and oracle checks on small seeded instances.
pub fn selftest(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut push = |name: &str, value: f64, tolerance: f64| {
        out.push(CheckResult {
            name: name.to_string(),
            value,
            tolerance,
        })
    };

    // geometry
    let (mut idem, mut lyap, mut unit, mut horiz) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let n = rng.random_range(1..=12);
        let r = rng.random_range(1..=n.min(4));
        let u = random_point_with(n, r, &mut rng);
        let z = DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = spectrahedron::Spectrahedron::new(n, r)?;
        let p = m.project(&u, &z);
        idem = idem.max((m.project(&u, &p) - &p).norm());
        let sym = p.transpose() * u.matrix() - u.matrix().transpose() * &p;
        horiz = horiz.max(sym.norm()).max(p.dot(u.matrix()).abs());
        let gram = u.matrix().transpose() * u.matrix();
        let rhs = u.matrix().transpose() * &z - z.transpose() * u.matrix();
        let sol = spectrahedron::solve_lyapunov(&gram, &rhs);
        if !sol.rank_deficient {
            lyap = lyap.max((&gram * &sol.lambda + &sol.lambda * &gram - &rhs).norm());
        }
        let xi = random_tangent_with(&u, &mut rng);
        unit = unit.max((m.retract(&u, &xi)?.matrix().norm() - 1.0).abs());
    }
    push("projection idempotence", idem, 1e-12);
    push("horizontal symmetry", horiz, 1e-12);
    push("Lyapunov residual", lyap, 1e-12);
    push("retraction unit norm", unit, 1e-12);

    // derivatives
    let dims = Dims::new(vec![4, 3, 2])?;
    let ranks = vec![2, 2, 2];
    let shapes: Vec<(usize, usize)> = dims.sizes().iter().copied().zip(ranks.iter().copied()).collect();
    let y = random_sparse(&dims, 14, &mut rng);
    let lambdas = vec![0.7, 1.3, 0.4];
    let mut dual = DualCost::new(y.clone(), lambdas.clone(), ranks.clone())?.with_inner(1e-14, 200);
    let mut ls = LsCost::new(y.clone(), lambdas.clone(), ranks.clone())?;
    let x = ProductPoint {
        factors: random_factors(&shapes, rng.random()),
        z: None,
    };
    let xz = ProductPoint {
        z: Some(y.scaled(0.8)),
        ..x.clone()
    };
    let gauss = |rng: &mut ChaCha8Rng, with_z: bool| ProductVector {
        factors: shapes
            .iter()
            .map(|&(n, r)| DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect(),
        z: with_z.then(|| y.with_values((0..y.nnz()).map(|_| rng.sample(StandardNormal)).collect())),
    };
    let amb = |p: &ProductPoint| ProductVector {
        factors: p.factor_matrices(),
        z: p.z.clone(),
    };
    let (mut gd, mut hd, mut gl, mut hl) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..3 {
        let d = gauss(&mut rng, false);
        gd = gd.max(gradient_check(&mut dual, &amb(&x), &d, 1e-5)?);
        hd = hd.max(hessian_check(&mut dual, &amb(&x), &d, 1e-4)?);
        let d = gauss(&mut rng, true);
        gl = gl.max(gradient_check(&mut ls, &amb(&xz), &d, 1e-5)?);
        hl = hl.max(hessian_check(&mut ls, &amb(&xz), &d, 1e-4)?);
    }
    push("dual gradient vs finite differences", gd, 1e-6);
    push("dual Hessian vs finite differences", hd, 1e-5);
    push("ls gradient vs finite differences", gl, 1e-6);
    push("ls Hessian vs finite differences", hl, 1e-5);

    let md = ProductManifold::new(&shapes, None)?;
    let ml = ProductManifold::new(&shapes, Some(Arc::clone(y.support())))?;
    let sd = max_over((0..3).map(|_| {
        let (a, b) = (md.random_tangent(&x, &mut rng), md.random_tangent(&x, &mut rng));
        hessian_symmetry(&md, &mut dual, &x, &a, &b)
    }))?;
    let sl = max_over((0..3).map(|_| {
        let (a, b) = (ml.random_tangent(&xz, &mut rng), ml.random_tangent(&xz, &mut rng));
        hessian_symmetry(&ml, &mut ls, &xz, &a, &b)
    }))?;
    push("dual Riemannian Hessian symmetry", sd, 1e-8);
    push("ls Riemannian Hessian symmetry", sl, 1e-8);

    // inner solve against a dense direct solve
    let u = x.factor_matrices();
    let z = dual.inner_solve(&u)?;
    let oracle = dense_inner_solve(&y, &u, &lambdas)
        .ok_or_else(|| crate::Error::Solver("dense oracle is singular".into()))?;
    let err = z.values().iter().zip(oracle.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    push("inner solve vs dense solve", err, 1e-8);

    // sparse kernel against the dense unfolding
    let dz = DenseTensor::from_sparse(&y);
    let mut kern = 0.0f64;
    for (k, uk) in u.iter().enumerate() {
        let dense = dz.unfold(k);
        let expect = &dense * dense.transpose() * uk;
        kern = kern.max((tensor::zzt_u(&y, k, uk)? - expect).norm());
    }
    push("Z Z^T U kernel vs dense unfolding", kern, 1e-12);
    Ok(out)
}
