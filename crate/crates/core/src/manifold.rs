use rand::Rng;

use crate::error::Result;

/// A Riemannian manifold, represented through points and horizontal tangent
/// vectors in the total space.
///
/// Ambient (Euclidean) gradients and Hessian-vector products share the
/// `Vector` type with tangent vectors.
pub trait Manifold {
    type Point: Clone;
    type Vector: Clone;

    /// Dimension of the (quotient) search space.
    fn dim(&self) -> usize;

    fn inner(&self, x: &Self::Point, a: &Self::Vector, b: &Self::Vector) -> f64;

    fn norm(&self, x: &Self::Point, a: &Self::Vector) -> f64 {
        self.inner(x, a, a).max(0.0).sqrt()
    }

    fn zero_vector(&self, x: &Self::Point) -> Self::Vector;

    /// `a * u + b * v`.
    fn lincomb(&self, x: &Self::Point, a: f64, u: &Self::Vector, b: f64, v: &Self::Vector)
        -> Self::Vector;

    /// Projects an ambient vector onto the horizontal space at `x`.
    fn project(&self, x: &Self::Point, v: &Self::Vector) -> Self::Vector;

    fn retract(&self, x: &Self::Point, v: &Self::Vector) -> Result<Self::Point>;

    fn egrad_to_rgrad(&self, x: &Self::Point, egrad: &Self::Vector) -> Self::Vector;

    fn ehess_to_rhess(
        &self,
        x: &Self::Point,
        egrad: &Self::Vector,
        ehess: &Self::Vector,
        v: &Self::Vector,
    ) -> Self::Vector;

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;

    /// Unit-norm random horizontal vector.
    fn random_tangent<R: Rng + ?Sized>(&self, x: &Self::Point, rng: &mut R) -> Self::Vector;

    /// Largest violation of the point's defining constraints.
    fn constraint_violation(&self, x: &Self::Point) -> f64;
}

/// Objective supplied to the trust-region solver: value, Euclidean gradient,
/// and Euclidean Hessian-vector product.
pub trait CostModel<M: Manifold> {
    fn cost(&mut self, x: &M::Point) -> Result<f64>;

    fn egrad(&mut self, x: &M::Point) -> Result<M::Vector>;

    fn ehess(&mut self, x: &M::Point, v: &M::Vector) -> Result<M::Vector>;
}
