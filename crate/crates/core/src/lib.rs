//! Radar place recognition from free space.
//!
//! The pipeline turns a polar radar scan into a binary feature mask
//! ([`feature`]), summarizes the free space in front of the farthest feature
//! of every azimuth into a short vector ([`descriptor`]), and retrieves
//! revisited places with a KD-tree under a similarity and a translational
//! threshold ([`retrieval`]). [`evaluation`] implements loop labelling,
//! precision/recall sweeps and timing; [`synthetic`] renders ground-truth
//! sessions for testing without real datasets.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the element type to `f64`, which is what the file formats and
//! the command-line tool use.

pub mod descriptor;
pub mod evaluation;
pub mod feature;
pub mod pipeline;
pub mod radar_io;
pub mod retrieval;
pub mod scalar;
pub mod synthetic;

pub use descriptor::{Descriptor, DescriptorError, PartitionAxis};
pub use feature::{FeatureMask, FeatureParams};
pub use radar_io::{Pose, PolarScan, ScanFormat, Trajectory};
pub use retrieval::{MatchResult, PlaceEntry, PlaceIndex, QueryMeta, RetrievalParams};
pub use scalar::Scalar;

pub type PolarScanF64 = PolarScan<f64>;
pub type PolarScanF32 = PolarScan<f32>;
pub type DescriptorF64 = Descriptor<f64>;
pub type DescriptorF32 = Descriptor<f32>;
pub type PlaceEntryF64 = PlaceEntry<f64>;
pub type PlaceIndexF64 = PlaceIndex<f64>;
pub type MatchResultF64 = MatchResult<f64>;

/// Version written into and accepted from RFMX scan files.
pub const RFMX_VERSION: u16 = 1;
/// Version written into and accepted from RFRD descriptor files.
pub const RFRD_VERSION: u16 = 1;
