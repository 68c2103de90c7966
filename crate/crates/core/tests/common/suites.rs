//! Suites shared by the focused integration tests and the acceptance target.
//! Each returns worst-case errors; callers decide the thresholds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use trace_completion::diagnostics::EuclideanCost;
use trace_completion::dual::DualCost;
use trace_completion::least_squares::LsCost;
use trace_completion::manifold::{CostModel, Manifold};
use trace_completion::product::{random_factors, ProductManifold, ProductPoint, ProductVector};
use trace_completion::spectrahedron::{
    horizontal_lambda, project_horizontal, project_tangent, random_point_with, random_tangent_with, retract,
};
use trace_completion::tensor::{self, DenseFactor, DenseTensor, Dims};
use trace_completion::{SparseTensor, Support};

use super::*;

#[derive(Debug, Default)]
pub struct GeometryReport {
    pub tangent_idempotence: f64,
    pub horizontal_idempotence: f64,
    pub horizontal_symmetry: f64,
    pub lyapunov_residual: f64,
    pub unit_norm: f64,
    /// Largest `||R(t xi) - (U + t xi)|| / (t^2 ||xi||^2)` over all `t`.
    pub second_order_constant: f64,
    /// Smallest observed decay order between consecutive `t`.
    pub min_order: f64,
}

pub const RETRACTION_STEPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

pub fn geometry_suite(instances: usize, seed: u64) -> GeometryReport {
    let mut rng = rng(seed);
    let mut rep = GeometryReport {
        min_order: f64::INFINITY,
        ..Default::default()
    };
    for _ in 0..instances {
        let n = rng.random_range(1..=20);
        let r = rng.random_range(1..=n.min(4));
        let u = random_point_with(n, r, &mut rng);
        let um = u.matrix();
        let z = gaussian_matrix(n, r, &mut rng);

        let t = project_tangent(&u, &z).unwrap();
        rep.tangent_idempotence = rep
            .tangent_idempotence
            .max((project_tangent(&u, &t).unwrap() - &t).norm())
            .max(t.dot(um).abs());

        let h = project_horizontal(&u, &t).unwrap();
        rep.horizontal_idempotence = rep
            .horizontal_idempotence
            .max((project_horizontal(&u, &h).unwrap() - &h).norm());
        rep.horizontal_symmetry = rep
            .horizontal_symmetry
            .max((h.transpose() * um - um.transpose() * &h).norm());

        let sol = horizontal_lambda(&u, &t).unwrap();
        let g = um.transpose() * um;
        let utx = um.transpose() * &t;
        let res = &g * &sol.lambda + &sol.lambda * &g - (&utx - utx.transpose());
        rep.lyapunov_residual = rep.lyapunov_residual.max(res.norm());

        let xi = random_tangent_with(&u, &mut rng);
        let xn2 = xi.norm_squared();
        let mut errs = Vec::new();
        for &s in &RETRACTION_STEPS {
            let step = retract(&u, &(&xi * s)).unwrap();
            rep.unit_norm = rep.unit_norm.max((step.matrix().norm() - 1.0).abs());
            let err = (step.matrix() - (um + &xi * s)).norm();
            rep.second_order_constant = rep.second_order_constant.max(err / (s * s * xn2));
            errs.push(err);
        }
        for (w, s) in errs.windows(2).zip(RETRACTION_STEPS.windows(2)) {
            if w[1] > 0.0 {
                rep.min_order = rep.min_order.min((w[0] / w[1]).log10() / (s[0] / s[1]).log10());
            }
        }
    }
    rep
}

#[derive(Debug, Default)]
pub struct DerivativeReport {
    pub gradient: f64,
    pub hessian: f64,
    pub symmetry: f64,
}

fn shifted(x: &ProductVector, a: f64, d: &ProductVector) -> ProductVector {
    ProductVector {
        factors: x.factors.iter().zip(&d.factors).map(|(p, q)| p + q * a).collect(),
        z: match (&x.z, &d.z) {
            (Some(p), Some(q)) => Some(tensor::axpy(a, q, p).unwrap()),
            _ => None,
        },
    }
}

fn vdot(a: &ProductVector, b: &ProductVector) -> f64 {
    let mut s: f64 = a.factors.iter().zip(&b.factors).map(|(x, y)| x.dot(y)).sum();
    if let (Some(p), Some(q)) = (&a.z, &b.z) {
        s += tensor::inner(p, q).unwrap();
    }
    s
}

fn vnorm(a: &ProductVector) -> f64 {
    vdot(a, a).sqrt()
}

/// Central-difference checks of the Euclidean gradient and Hessian, and the
/// symmetry of the Riemannian Hessian, at one point.
fn check_cost<C>(cost: &mut C, m: &ProductManifold, x: &ProductPoint, trials: usize, rng: &mut ChaCha8Rng) -> DerivativeReport
where
    C: EuclideanCost + CostModel<ProductManifold>,
{
    let sh: Vec<(usize, usize)> = x.factors.iter().map(|f| (f.rows(), f.rank())).collect();
    let xa = ambient(x);
    let mut rep = DerivativeReport::default();
    for _ in 0..trials {
        let d = gaussian_direction(&sh, x.z.as_ref(), rng);
        let h = 1e-5;
        let analytic = vdot(&cost.grad_at(&xa).unwrap(), &d);
        let fd = (cost.value_at(&shifted(&xa, h, &d)).unwrap() - cost.value_at(&shifted(&xa, -h, &d)).unwrap()) / (2.0 * h);
        rep.gradient = rep.gradient.max((analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-300));

        let h = 1e-4;
        let hv = cost.hess_at(&xa, &d).unwrap();
        let gp = cost.grad_at(&shifted(&xa, h, &d)).unwrap();
        let gm = cost.grad_at(&shifted(&xa, -h, &d)).unwrap();
        let fd = shifted(&gp, -1.0, &gm);
        let fd = ProductVector {
            factors: fd.factors.iter().map(|f| f / (2.0 * h)).collect(),
            z: fd.z.map(|z| z.scaled(1.0 / (2.0 * h))),
        };
        let scale = vnorm(&hv).max(vnorm(&fd)).max(1e-300);
        rep.hessian = rep.hessian.max(vnorm(&shifted(&hv, -1.0, &fd)) / scale);

        let (a, b) = (m.random_tangent(x, rng), m.random_tangent(x, rng));
        let eg = cost.egrad(x).unwrap();
        let ha = m.ehess_to_rhess(x, &eg, &cost.ehess(x, &a).unwrap(), &a);
        let hb = m.ehess_to_rhess(x, &eg, &cost.ehess(x, &b).unwrap(), &b);
        let (p, q) = (m.inner(x, &ha, &b), m.inner(x, &a, &hb));
        let scale = m.norm(x, &ha) * m.norm(x, &b) + m.norm(x, &a) * m.norm(x, &hb);
        rep.symmetry = rep.symmetry.max((p - q).abs() / scale.max(1e-300));
    }
    rep
}

/// `(dual, ls)` derivative reports on a random instance of the given shape.
pub fn derivative_suite(dims: &[usize], ranks: &[usize], density: f64, seed: u64) -> (DerivativeReport, DerivativeReport) {
    let mut rng = rng(seed);
    let dims = Dims::new(dims.to_vec()).unwrap();
    let y = random_sparse(&dims, density, &mut rng);
    let lambdas: Vec<f64> = (0..dims.order()).map(|_| rng.random_range(0.2..2.0)).collect();
    let sh = shapes(&dims, ranks);

    let mut dual = DualCost::new(y.clone(), lambdas.clone(), ranks.to_vec())
        .unwrap()
        .with_inner(1e-14, 1000);
    let x = ProductPoint {
        factors: random_factors(&sh, rng.random()),
        z: None,
    };
    let md = dual.manifold().unwrap();
    let d = check_cost(&mut dual, &md, &x, 3, &mut rng);

    let mut ls = LsCost::new(y.clone(), lambdas, ranks.to_vec()).unwrap();
    let xz = ProductPoint {
        factors: random_factors(&sh, rng.random()),
        z: Some(random_values(y.support(), &mut rng)),
    };
    let ml = ls.manifold().unwrap();
    let l = check_cost(&mut ls, &ml, &xz, 3, &mut rng);
    (d, l)
}

/// The inner system matrix with column `e` equal to `A(e_e)`, each mode
/// product taken densely.
pub fn dense_operator(support: &Arc<Support>, factors: &[DenseFactor], lambdas: &[f64]) -> DMatrix<f64> {
    let n = support.nnz();
    let mut a = DMatrix::identity(n, n);
    for e in 0..n {
        let mut unit = vec![0.0; n];
        unit[e] = 1.0;
        let basis = SparseTensor::new(Arc::clone(support), unit).unwrap();
        for (k, (u, &lam)) in factors.iter().zip(lambdas).enumerate() {
            let col = dense_mode_product(&basis, k, &(u * u.transpose()), support);
            for (i, v) in col.values().iter().enumerate() {
                a[(i, e)] += lam * v;
            }
        }
    }
    a
}

#[derive(Debug, Default)]
pub struct InnerReport {
    pub instances: usize,
    pub max_nnz: usize,
    pub solve: f64,
    pub solve_dot: f64,
}

/// CG inner solves against dense LU solves on small supports.
pub fn inner_oracle_suite(instances: usize, seed: u64) -> InnerReport {
    let mut rng = rng(seed);
    let mut rep = InnerReport::default();
    while rep.instances < instances {
        let dims = Dims::new(vec![rng.random_range(2..=5), rng.random_range(2..=4), rng.random_range(1..=3)]).unwrap();
        let y = random_sparse(&dims, rng.random_range(0.3..0.9), &mut rng);
        if y.nnz() > 30 {
            continue;
        }
        let ranks: Vec<usize> = dims.sizes().iter().map(|&n| rng.random_range(1..=n.min(3))).collect();
        let lambdas: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..5.0)).collect();
        let sh = shapes(&dims, &ranks);
        let u: Vec<DenseFactor> = random_factors(&sh, rng.random()).into_iter().map(|f| f.into_matrix()).collect();
        let v: Vec<DenseFactor> = sh.iter().map(|&(n, r)| gaussian_matrix(n, r, &mut rng)).collect();

        let mut cost = DualCost::new(y.clone(), lambdas.clone(), ranks).unwrap().with_inner(1e-14, 500);
        let z = cost.inner_solve(&u).unwrap();
        let zdot = cost.inner_solve_dot(&u, &v, &z).unwrap();

        let a = dense_operator(y.support(), &u, &lambdas).lu();
        let z_ref = a.solve(&DVector::from_column_slice(y.values())).unwrap();
        let mut rhs = DVector::zeros(y.nnz());
        for k in 0..3 {
            let m = &v[k] * u[k].transpose() + &u[k] * v[k].transpose();
            let t = dense_mode_product(&z, k, &m, y.support());
            rhs -= DVector::from_column_slice(t.values()) * lambdas[k];
        }
        let zdot_ref = a.solve(&rhs).unwrap();

        rep.solve = rep.solve.max(max_abs_diff(z.values(), z_ref.as_slice()));
        rep.solve_dot = rep.solve_dot.max(max_abs_diff(zdot.values(), zdot_ref.as_slice()));
        rep.instances += 1;
        rep.max_nnz = rep.max_nnz.max(y.nnz());
    }
    rep
}

#[derive(Debug, Default)]
pub struct KernelReport {
    pub shapes: usize,
    pub unfold: f64,
    pub cross: f64,
    pub gram: f64,
    pub mode_product: f64,
    pub fused: f64,
}

/// Column of `index` in the mode-`mode` unfolding, computed directly.
pub fn unfolding_column(dims: &[usize], index: &[usize], mode: usize) -> usize {
    let (mut col, mut stride) = (0, 1);
    for (j, (&i, &n)) in index.iter().zip(dims).enumerate() {
        if j != mode {
            col += i * stride;
            stride *= n;
        }
    }
    col
}

/// Every sparse kernel against dense unfolding arithmetic, for every shape
/// up to `max_dims`.
pub fn kernel_suite(max_dims: &[usize], seed: u64) -> KernelReport {
    let mut rng = rng(seed);
    let mut rep = KernelReport::default();
    let shape_list = all_indices(&Dims::new(max_dims.to_vec()).unwrap());
    for shape in shape_list {
        let sizes: Vec<usize> = shape.iter().map(|i| i + 1).collect();
        let dims = Dims::new(sizes.clone()).unwrap();
        rep.shapes += 1;
        let support = random_support(&dims, rng.random_range(0.2..1.0), &mut rng);
        let a = random_values(&support, &mut rng);
        let b = random_values(&support, &mut rng);
        let out = random_support(&dims, rng.random_range(0.2..1.0), &mut rng);
        let (da, db) = (DenseTensor::from_sparse(&a), DenseTensor::from_sparse(&b));

        for k in 0..dims.order() {
            let unf = da.unfold(k);
            for (idx, v) in a.iter() {
                rep.unfold = rep.unfold.max((unf[(idx[k], unfolding_column(&sizes, idx, k))] - v).abs());
            }
            let back = DenseTensor::fold(dims.clone(), k, &unf).unwrap();
            rep.unfold = rep.unfold.max(max_abs_diff(back.data(), da.data()));

            let n = sizes[k];
            let r = rng.random_range(1..=n.min(4));
            let u = gaussian_matrix(n, r, &mut rng);
            let w = gaussian_matrix(n, r, &mut rng);
            let (ak, bk) = (da.unfold(k), db.unfold(k));

            let cross = tensor::cross_unfold_u(&a, &b, k, &u).unwrap();
            rep.cross = rep.cross.max((cross - &ak * bk.transpose() * &u).norm());
            let zz = tensor::zzt_u(&a, k, &u).unwrap();
            rep.cross = rep.cross.max((zz - &ak * ak.transpose() * &u).norm());
            let gram = tensor::gram_norm(&a, k, &u).unwrap();
            rep.gram = rep.gram.max((gram - (u.transpose() * &ak).norm_squared()).abs());

            let mm = tensor::mode_multiply_on_support(&a, k, &u, &w, &out).unwrap();
            let expect = dense_mode_product(&a, k, &(&u * w.transpose()), &out);
            rep.mode_product = rep.mode_product.max(max_abs_diff(mm.values(), expect.values()));

            let fused = tensor::mode_multiply_sum(&[(&a, &u, &w), (&b, &w, &u)], k, &out).unwrap();
            let second = dense_mode_product(&b, k, &(&w * u.transpose()), &out);
            let sum: Vec<f64> = expect.values().iter().zip(second.values()).map(|(x, y)| x + y).collect();
            rep.fused = rep.fused.max(max_abs_diff(fused.values(), &sum));
            let fused = tensor::cross_unfold_sum(&[(&a, &b, &u), (&b, &a, &w)], k).unwrap();
            let expect = &ak * bk.transpose() * &u + &bk * ak.transpose() * &w;
            rep.fused = rep.fused.max((fused - expect).norm());
        }
    }
    rep
}
