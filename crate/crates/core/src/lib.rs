pub mod curvature1d;
pub mod error;
pub mod hessian;
pub mod metrics;
pub mod models;
pub mod objective;
pub mod posterior;
pub mod sampler;
pub mod spectral;

pub use error::{CovError, Result};

pub use nalgebra::{DMatrix, DVector};
pub use hessian::{HessianMethod, HessianResult};
pub use objective::{CountingObjective, FnObjective, ObjectiveFunction};
pub use posterior::{
    adaptive_posterior, PosteriorOptions, PosteriorResult, TrackedQuantity, WeightConvention,
};
pub use spectral::{covariance_from_hessian, CovarianceResult};
