//! Volumes, NIfTI-1 I/O, intensity normalization, STAPLE label fusion,
//! anatomical post-processing and evaluation metrics for brain tumor
//! segmentation ensembles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod nifti;
pub mod postprocess;
pub mod preprocess;
pub mod staple;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{
    extract_region, reconstruct_labels, CaseId, Geometry, LabelVolume, Region, RegionMask, ScalarVolume,
};
