//! Affinity measures, losses and evaluation for tiny object detection.
//!
//! The crate centers on SAFit, a size-aware sigmoid blend of IoU and the
//! normalized Wasserstein distance, and provides the pieces needed to use it
//! end to end: box losses with analytic gradients, a COCO-style evaluator
//! parameterized by the affinity measure, dataset loading and statistics, and
//! box/mask conversion.

pub mod bbox;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod losses;
pub mod masks;
pub mod metrics;

pub use bbox::{BBox, Corners};
pub use dataset::{Annotation, Dataset, Detection, LightVision, Modality, ScaleLevel};
pub use error::{BoxError, ConfigError, LoadError, ValidationIssue};
pub use eval::{evaluate, EvalConfig, EvalReport};
pub use losses::{fd_check, loss, FdCheck, LossGrad};
pub use masks::{Mask, MaskMode};
pub use metrics::{Measure, MeasureParams, NwdParams, SafitParams};
