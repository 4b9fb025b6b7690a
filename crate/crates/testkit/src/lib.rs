//! Slow, direct reference implementations for testing.
//!
//! Nothing here depends on the gliofuse crates. Volumes are flat slices in
//! C order (last axis fastest) with explicit `[usize; 3]` dims; tensors are
//! flat NCDHW slices.

pub mod components;
pub mod conv;
pub mod labels;
pub mod nifti;
pub mod staple;
pub mod stats;
pub mod surface;

/// Flat index of `(i, j, k)` in a volume of `dims`.
pub fn idx(dims: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    (i * dims[1] + j) * dims[2] + k
}
