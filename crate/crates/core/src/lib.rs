//! Multidimensional ideological scaling of follower networks.
//!
//! The pipeline runs in stages that mirror the modules of this crate:
//!
//! 1. [`model`]: ingest follower → elite edges, apply degree filters, compute
//!    activity metrics and pseudonymous identifiers.
//! 2. [`ca`]: correspondence analysis of the binary adjacency through a
//!    matrix-free truncated SVD of the standardized residual operator.
//! 3. [`calibrate`]: party centroids in latent space, ridge affine maps onto
//!    expert-survey dimensions, projection of every entity.
//! 4. [`media`]: media domain positions from sharing records.
//! 5. [`validate`]: label-based validation battery.
//! 6. [`synth`]: forward sampling of the logistic homophily model and
//!    end-to-end recovery benchmarks.
//!
//! [`stats`] holds the statistics kernels shared by the later stages, and
//! [`io`] the CSV schemas of every table the pipeline reads or writes.

pub mod ca;
pub mod calibrate;
pub mod error;
pub mod format;
pub mod io;
pub mod media;
pub mod model;
pub mod stats;
pub mod synth;
pub mod validate;

pub use ca::{correspondence_analysis, CaConfig, CoordinateKind, LatentEmbedding};
pub use calibrate::{
    AffineCalibration, DimensionSpec, Fidelity, PositionTable, SurveyReference,
};
pub use error::{Error, Result};
pub use media::{DomainProfile, ShareRecord};
pub use model::{ActivityRecord, BipartiteNetwork, EntityKind, EntityRecord};
pub use stats::{BinaryMetrics, DipResult, LogisticFit};
pub use synth::{GroundTruth, SyntheticModelParams};
