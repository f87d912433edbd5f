//! Active search for stiff inclusions in a 2-D stiffness field.
//!
//! A Gaussian process models the field from noisy probe readings. One of four
//! acquisition functions scores where to probe next, either one point at a
//! time or along Dubins-car trajectories chosen by the cross-entropy method.
//! [`sim`] provides synthetic phantoms and recall-scored experiments.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the precision.

pub mod acquisition;
pub mod cem;
pub mod error;
pub mod gp;
pub mod grid;
pub mod scalar;
pub mod search;
pub mod sim;
pub mod trajectory;

pub use acquisition::{AcquisitionField, AcquisitionKind, LevelRule, LseState, RegionGrid};
pub use cem::{CemConfig, GmmParams};
pub use error::{Error, Result};
pub use gp::{GpModel, Kernel, Prediction, TargetScaling};
pub use grid::{DomainGrid, Rect};
pub use scalar::Scalar;
pub use search::{Obstacle, RobotFootprint, SearchConfig, SearchState};
pub use sim::{ExperimentConfig, ProbeModel, StiffnessField};
pub use trajectory::{Path, Pose, PrimitiveParams};

pub type Kernel64 = Kernel<f64>;
pub type Kernel32 = Kernel<f32>;
pub type GpModel64 = GpModel<f64>;
pub type GpModel32 = GpModel<f32>;
pub type Rect64 = Rect<f64>;
pub type Rect32 = Rect<f32>;
pub type DomainGrid64 = DomainGrid<f64>;
pub type DomainGrid32 = DomainGrid<f32>;
pub type Pose64 = Pose<f64>;
pub type Pose32 = Pose<f32>;
pub type PrimitiveParams64 = PrimitiveParams<f64>;
pub type PrimitiveParams32 = PrimitiveParams<f32>;
pub type GmmParams64 = GmmParams<f64>;
pub type GmmParams32 = GmmParams<f32>;
pub type SearchConfig64 = SearchConfig<f64>;
pub type SearchConfig32 = SearchConfig<f32>;
pub type StiffnessField64 = StiffnessField<f64>;
pub type StiffnessField32 = StiffnessField<f32>;
pub type ExperimentConfig64 = ExperimentConfig<f64>;
pub type ExperimentConfig32 = ExperimentConfig<f32>;
