//! Simulation and semi-parametric estimation of the Poisson intensity
//! parameter `β` of stationary finite-range Gibbs point processes.
//!
//! The core is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`) and over the dimension `D`. The aliases below fix `f64` in the
//! plane, which is what the command-line tool and the Monte-Carlo harness use.

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod geometry;
pub mod index;
pub mod models;
pub mod num;
pub mod quadrature;
pub mod range;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use estimator::{estimate_beta, EstimateReport, QuadratureSettings};
pub use geometry::{Point, PointPattern, Window};
pub use index::{Neighborhood, SpatialIndex};
pub use models::{GibbsModel, Interaction, ModelConfig};
pub use num::Real;
pub use range::{BetaProfile, BreakpointFit};
pub use sampler::{ChainDiagnostics, SamplerConfig};

pub type Point2 = Point<f64, 2>;
pub type Point3 = Point<f64, 3>;
pub type Pattern2 = PointPattern<f64, 2>;
pub type Pattern3 = PointPattern<f64, 3>;
pub type Window2 = Window<f64, 2>;
pub type Window3 = Window<f64, 3>;
pub type Model = GibbsModel<f64>;
pub type Report2 = EstimateReport<f64, 2>;
pub type Fit = BreakpointFit<f64>;
