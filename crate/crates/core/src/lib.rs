//! Edge-guided ×4 super-resolution for PCB defect inspection: a from-scratch
//! tensor network with ResCat residual blocks, classical edge extraction,
//! bicubic resampling, detection-box ensemble fusion (NMS / Soft-NMS / WBF),
//! VOC dataset ingestion and image/detection quality metrics.

pub mod dataset;
pub mod edge;
pub mod error;
pub mod fusion;
pub mod image;
pub mod metrics;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
