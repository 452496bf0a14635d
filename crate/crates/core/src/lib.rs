//! Coarse-to-fine plane-sweep stereo with depth-prior supervision synthesis,
//! prior-guided depth correction, fusion and point-cloud evaluation.
//!
//! The CLI and bench crates consume the types re-exported here.

// `!(x > y)` is how NaN gets rejected alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correction;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod mvs;
pub mod prior;
pub mod raster;
pub mod rng;
pub mod synthesis;
pub mod synthetic;

pub use correction::{correct_depth, AffineMapping, ConfidenceMask, CorrectionOutcome, CorrectionStatus, FitConfig};
pub use error::{Error, Result};
pub use fusion::{fuse, FusionConfig, FusionOutput, FusionView, PointCloud};
pub use geometry::{CameraView, Pixel};
pub use metrics::{cloud_distance_metrics, CloudMetrics, DEFAULT_MAX_DIST};
pub use mvs::{cascade_infer, CascadeConfig, CorrectionInput, ScaleOutput, ViewInput};
pub use prior::{PerturbationTriple, PriorMap};
pub use raster::{ConfidenceMap, DepthMap, GrayImage, Grid, RgbImage};
pub use rng::{stream_rng, PipelineRng};
pub use synthesis::{LossConfig, SynthConfig, TrainingSample};
