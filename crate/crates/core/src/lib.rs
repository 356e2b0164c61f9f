//! Hard Gaussian-mixture instances for statistical-query lower bounds.
//!
//! The pipeline builds a discrete core whose low-degree moments match the
//! standard Gaussian ([`moments`]), smooths it into a spherical mixture
//! ([`smoothing`]), draws nearly orthogonal hidden frames ([`packing`]) and
//! plants the mixture along one of them in high dimension ([`planting`]).
//! [`metrics`], [`oracle`] and [`experiment`] measure what the construction
//! promises: vanishing moments, large chi-square and total-variation
//! distances, small pairwise correlations, and the failure of low-degree
//! tests next to an informed likelihood-ratio test.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod experiment;
pub mod hermite;
pub mod json;
pub mod lp;
pub mod metrics;
pub mod moments;
pub mod oracle;
pub mod packing;
pub mod planting;
pub mod quadrature;
pub mod rng;
pub mod smoothing;

pub use density::{Density, LikelihoodRatio, StandardGaussian};
pub use error::{Error, Result};
pub use hermite::{HermiteBasis, HermiteCoefficientTable, MultiIndex};
pub use moments::{DiscreteDistribution, GeometryReport};
pub use smoothing::SmoothedMixture;
pub use experiment::{ExperimentConfig, PowerCurve};
pub use metrics::{EstimateWithCI, VerificationReport};
pub use oracle::{OracleConfig, VstatOracle};
pub use packing::SubspacePack;
pub use planting::{InstanceFile, InstanceSpec, Mode, PlantedInstance};
