//! The spectrahedron manifold `S(n, r) = { U in R^{n x r} : ||U||_F = 1 }`
//! taken modulo the right action of the orthogonal group `O(r)`.
//!
//! `U` parameterizes the unit-trace PSD matrix `Theta = U U^T`. Tangent vectors
//! of the quotient are represented by their horizontal lifts: matrices `xi`
//! with `trace(xi^T U) = 0` and `xi^T U = U^T xi`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::tensor::DenseFactor;

/// Allowed deviation of `||U||_F` from one.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Eigenvalues of `U^T U` below this fraction of the largest one are treated
/// as zero when solving the Lyapunov equation.
pub const GRAM_EIG_CUTOFF: f64 = 1e-14;

/// A point on the spectrahedron: an `n x r` matrix with unit Frobenius norm.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPoint(DenseFactor);

impl FactorPoint {
    pub fn new(u: DenseFactor) -> Result<Self> {
        let norm = u.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Shape(format!(
                "factor has Frobenius norm {norm}, expected 1"
            )));
        }
        Ok(FactorPoint(u))
    }

    /// Rescales `u` onto the manifold.
    pub fn normalize(u: DenseFactor) -> Result<Self> {
        let norm = u.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateStep);
        }
        Ok(FactorPoint(u / norm))
    }

    pub fn matrix(&self) -> &DenseFactor {
        &self.0
    }

    pub fn into_matrix(self) -> DenseFactor {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn rank(&self) -> usize {
        self.0.ncols()
    }
}

fn check_shape(u: &FactorPoint, z: &DenseFactor) -> Result<()> {
    if u.0.shape() != z.shape() {
        return Err(Error::Shape(format!(
            "point is {:?}, vector is {:?}",
            u.0.shape(),
            z.shape()
        )));
    }
    Ok(())
}

/// `trace(A^T B)`.
pub fn metric(a: &DenseFactor, b: &DenseFactor) -> f64 {
    a.dot(b)
}

/// Tangent-space projection `Z - trace(Z^T U) U`.
pub fn project_tangent(u: &FactorPoint, z: &DenseFactor) -> Result<DenseFactor> {
    check_shape(u, z)?;
    Ok(z - &u.0 * metric(z, &u.0))
}

/// Solution of the Lyapunov equation `G L + L G = rhs` for symmetric PSD `G`.
#[derive(Clone, Debug)]
pub struct LyapunovSolution {
    pub lambda: DMatrix<f64>,
    /// `G` had eigenvalues below the cutoff; the pseudo-inverse was used.
    pub rank_deficient: bool,
}

pub fn solve_lyapunov(gram: &DMatrix<f64>, rhs: &DMatrix<f64>) -> LyapunovSolution {
    let eig = SymmetricEigen::new(gram.clone());
    let q = &eig.eigenvectors;
    let sigma = &eig.eigenvalues;
    let max = sigma.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
    let cutoff = GRAM_EIG_CUTOFF * max;
    let rank_deficient = sigma.iter().any(|&s| s <= cutoff);
    let c = q.transpose() * rhs * q;
    let r = gram.nrows();
    let scaled = DMatrix::from_fn(r, r, |i, j| {
        let d = sigma[i] + sigma[j];
        if d > 2.0 * cutoff && d > 0.0 {
            c[(i, j)] / d
        } else {
            0.0
        }
    });
    LyapunovSolution {
        lambda: q * scaled * q.transpose(),
        rank_deficient,
    }
}

/// Skew matrix `L` removed by the horizontal projection of `xi`.
pub fn horizontal_lambda(u: &FactorPoint, xi: &DenseFactor) -> Result<LyapunovSolution> {
    check_shape(u, xi)?;
    let utxi = u.0.transpose() * xi;
    let rhs = &utxi - utxi.transpose();
    let gram = u.0.transpose() * &u.0;
    Ok(solve_lyapunov(&gram, &rhs))
}

/// Horizontal projection `xi - U L` of a tangent vector.
pub fn project_horizontal(u: &FactorPoint, xi: &DenseFactor) -> Result<DenseFactor> {
    let sol = horizontal_lambda(u, xi)?;
    Ok(xi - &u.0 * sol.lambda)
}

/// Retraction `(U + xi) / ||U + xi||_F`.
pub fn retract(u: &FactorPoint, xi: &DenseFactor) -> Result<FactorPoint> {
    check_shape(u, xi)?;
    FactorPoint::normalize(&u.0 + xi)
}

pub fn egrad_to_rgrad(u: &FactorPoint, egrad: &DenseFactor) -> Result<DenseFactor> {
    project_tangent(u, egrad)
}

/// Riemannian Hessian of the quotient along a horizontal `xi`, from the
/// Euclidean gradient and its directional derivative `ehess = D egrad[xi]`.
///
/// The derivative of the projected gradient is first brought back to the
/// tangent space of the sphere, then onto the horizontal space.
pub fn ehess_to_rhess(
    u: &FactorPoint,
    egrad: &DenseFactor,
    ehess: &DenseFactor,
    xi: &DenseFactor,
) -> Result<DenseFactor> {
    check_shape(u, egrad)?;
    check_shape(u, ehess)?;
    check_shape(u, xi)?;
    let g_u = metric(egrad, &u.0);
    let d_grad = ehess - xi * g_u - &u.0 * (metric(egrad, xi) + metric(ehess, &u.0));
    project_horizontal(u, &project_tangent(u, &d_grad)?)
}

fn gaussian_matrix<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> DenseFactor {
    // column-major fill order, fixed for reproducibility
    DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_point_with<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> FactorPoint {
    loop {
        if let Ok(p) = FactorPoint::normalize(gaussian_matrix(n, r, rng)) {
            return p;
        }
    }
}

pub fn random_point(n: usize, r: usize, seed: u64) -> FactorPoint {
    random_point_with(n, r, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_tangent_with<R: Rng + ?Sized>(u: &FactorPoint, rng: &mut R) -> DenseFactor {
    let (n, r) = u.0.shape();
    loop {
        let z = gaussian_matrix(n, r, rng);
        let h = project_horizontal(u, &project_tangent(u, &z).expect("same shape"))
            .expect("same shape");
        let norm = h.norm();
        if norm > 0.0 {
            return h / norm;
        }
        // n = r = 1 has a zero-dimensional tangent space
        if n * r == 1 {
            return h;
        }
    }
}

pub fn random_tangent(u: &FactorPoint, seed: u64) -> DenseFactor {
    random_tangent_with(u, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Quotient dimension `n r - 1 - r (r - 1) / 2`.
pub fn quotient_dim(n: usize, r: usize) -> usize {
    (n * r).saturating_sub(1 + r * r.saturating_sub(1) / 2)
}

/// `S(n, r) / O(r)` as a [`Manifold`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Spectrahedron {
    pub n: usize,
    pub r: usize,
}

impl Spectrahedron {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if n == 0 || r == 0 || r > n {
            return Err(Error::Config(format!("invalid spectrahedron shape {n}x{r}")));
        }
        Ok(Spectrahedron { n, r })
    }
}

impl Manifold for Spectrahedron {
    type Point = FactorPoint;
    type Vector = DenseFactor;

    fn dim(&self) -> usize {
        quotient_dim(self.n, self.r)
    }

    fn inner(&self, _x: &FactorPoint, a: &DenseFactor, b: &DenseFactor) -> f64 {
        metric(a, b)
    }

    fn zero_vector(&self, _x: &FactorPoint) -> DenseFactor {
        DMatrix::zeros(self.n, self.r)
    }

    fn lincomb(&self, _x: &FactorPoint, a: f64, u: &DenseFactor, b: f64, v: &DenseFactor)
        -> DenseFactor {
        u * a + v * b
    }

    fn project(&self, x: &FactorPoint, v: &DenseFactor) -> DenseFactor {
        project_horizontal(x, &project_tangent(x, v).expect("shape")).expect("shape")
    }

    fn retract(&self, x: &FactorPoint, v: &DenseFactor) -> Result<FactorPoint> {
        retract(x, v)
    }

    fn egrad_to_rgrad(&self, x: &FactorPoint, egrad: &DenseFactor) -> DenseFactor {
        egrad_to_rgrad(x, egrad).expect("shape")
    }

    fn ehess_to_rhess(
        &self,
        x: &FactorPoint,
        egrad: &DenseFactor,
        ehess: &DenseFactor,
        v: &DenseFactor,
    ) -> DenseFactor {
        ehess_to_rhess(x, egrad, ehess, v).expect("shape")
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> FactorPoint {
        random_point_with(self.n, self.r, rng)
    }

    fn random_tangent<R: Rng + ?Sized>(&self, x: &FactorPoint, rng: &mut R) -> DenseFactor {
        random_tangent_with(x, rng)
    }

    fn constraint_violation(&self, x: &FactorPoint) -> f64 {
        (x.0.norm() - 1.0).abs()
    }
}
