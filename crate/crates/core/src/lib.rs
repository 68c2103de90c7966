//! Low-rank tensor completion with a squared latent trace norm.
//!
//! The regularized estimator is computed through fixed-rank formulations on
//! products of spectrahedron manifolds and solved with a Riemannian trust
//! region method. Tensors are stored sparsely and no kernel ever densifies
//! them.

pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod io;
pub mod least_squares;
pub mod manifold;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod product;
pub mod spectrahedron;
pub mod tensor;
pub mod trust_region;

pub use error::{Error, Result};
pub use model::{CompletionModel, Formulation};
pub use pipeline::{train, Task, TrainConfig, TrainOutput};
pub use tensor::{DenseFactor, DenseTensor, Dims, SparseTensor, Support};
pub use trust_region::TrConfig;
