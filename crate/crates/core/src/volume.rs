//! Volumetric data types, BraTS label semantics and region masks.
//!
//! Voxel storage is row-major with the last axis fastest: the voxel at
//! `(i, j, k)` lives at `(i * dims[1] + j) * dims[2] + k`. NIfTI files store
//! the first axis fastest; the reader and writer in [`crate::nifti`] transpose.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Background label.
pub const BACKGROUND: u8 = 0;
/// Necrotic / non-enhancing tumor core.
pub const NCR: u8 = 1;
/// Peritumoral edema.
pub const ED: u8 = 2;
/// Enhancing tumor.
pub const ET: u8 = 3;

/// Spacing components closer than this are considered the same grid.
const SPACING_TOLERANCE: f64 = 1e-6;

/// Shape, voxel size and voxel-to-world affine shared by every volume type.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: [[f64; 4]; 3],
}

impl Geometry {
    /// Grid with an axis-aligned affine built from `spacing`.
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let affine = [
            [spacing[0], 0.0, 0.0, 0.0],
            [0.0, spacing[1], 0.0, 0.0],
            [0.0, 0.0, spacing[2], 0.0],
        ];
        Self::with_affine(dims, spacing, affine)
    }

    pub fn with_affine(dims: [usize; 3], spacing: [f64; 3], affine: [[f64; 4]; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidVolume(format!("dims must be positive, got {dims:?}")));
        }
        if dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).is_none() {
            return Err(Error::InvalidVolume(format!("dims {dims:?} overflow")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::NonPositiveSpacing(spacing));
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVolume("affine contains non-finite values".into()));
        }
        Ok(Self {
            dims,
            spacing,
            affine,
        })
    }

    /// Isotropic 1 mm grid.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> [[f64; 4]; 3] {
        self.affine
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let k = index % self.dims[2];
        let rest = index / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    /// Same dims and spacing. The affine is not compared.
    pub fn same_grid(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(other.spacing.iter())
                .all(|(a, b)| (a - b).abs() <= SPACING_TOLERANCE)
    }

    pub(crate) fn check_same_grid(&self, other: &Geometry, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: dims {:?} spacing {:?} vs dims {:?} spacing {:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }

    pub(crate) fn with_spacing(&self, spacing: [f64; 3]) -> Result<Self> {
        Self::with_affine(self.dims, spacing, self.affine)
    }
}

/// Real-valued intensities on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    geometry: Geometry,
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(geometry: Geometry, data: Vec<f64>) -> Result<Self> {
        check_len(&geometry, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidVolume(format!("non-finite value at voxel {i}")));
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Integer tumor labels, each in `{0, 1, 2, 3}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    geometry: Geometry,
    data: Vec<u8>,
}

impl Eq for Geometry {}

impl LabelVolume {
    pub fn new(geometry: Geometry, data: Vec<u8>) -> Result<Self> {
        check_len(&geometry, data.len())?;
        if let Some(i) = data.iter().position(|&v| v > ET) {
            return Err(Error::InvalidLabel {
                index: i,
                value: f64::from(data[i]),
            });
        }
        Ok(Self { geometry, data })
    }

    pub fn zeros(geometry: Geometry) -> Self {
        let n = geometry.voxel_count();
        Self {
            geometry,
            data: vec![BACKGROUND; n],
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Copy with some voxels rewritten; `f` receives `(index, old_label)`.
    /// Returned labels above 3 are a programming error.
    pub(crate) fn map_labels(&self, mut f: impl FnMut(usize, u8) -> u8) -> LabelVolume {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let v = f(i, l);
                debug_assert!(v <= ET);
                v
            })
            .collect();
        LabelVolume {
            geometry: self.geometry.clone(),
            data,
        }
    }
}

fn check_len(geometry: &Geometry, len: usize) -> Result<()> {
    if len != geometry.voxel_count() {
        return Err(Error::InvalidVolume(format!(
            "data length {len} does not match dims {:?}",
            geometry.dims
        )));
    }
    Ok(())
}

/// BraTS evaluation region. Label sets nest: ET ⊆ TC ⊆ WT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "ET")]
    Et,
    #[serde(rename = "TC")]
    Tc,
    #[serde(rename = "WT")]
    Wt,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Et, Region::Tc, Region::Wt];

    pub fn labels(self) -> &'static [u8] {
        match self {
            Region::Et => &[ET],
            Region::Tc => &[NCR, ET],
            Region::Wt => &[NCR, ED, ET],
        }
    }

    #[inline]
    pub fn contains(self, label: u8) -> bool {
        match self {
            Region::Et => label == ET,
            Region::Tc => label == NCR || label == ET,
            Region::Wt => (NCR..=ET).contains(&label),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Et => "ET",
            Region::Tc => "TC",
            Region::Wt => "WT",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ET" => Ok(Region::Et),
            "TC" => Ok(Region::Tc),
            "WT" => Ok(Region::Wt),
            _ => Err(Error::InvalidConfig(format!("unknown region {s:?}"))),
        }
    }
}

/// Binary mask of one region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    region: Region,
    geometry: Geometry,
    data: Vec<bool>,
}

impl RegionMask {
    pub fn new(region: Region, geometry: Geometry, data: Vec<bool>) -> Result<Self> {
        check_len(&geometry, data.len())?;
        Ok(Self {
            region,
            geometry,
            data,
        })
    }

    pub fn empty(region: Region, geometry: Geometry) -> Self {
        let n = geometry.voxel_count();
        Self {
            region,
            geometry,
            data: vec![false; n],
        }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Same voxels on a grid with different spacing.
    pub fn with_spacing(&self, spacing: [f64; 3]) -> Result<Self> {
        Ok(Self {
            region: self.region,
            geometry: self.geometry.with_spacing(spacing)?,
            data: self.data.clone(),
        })
    }
}

/// Directory-derived case name, usable as a file-name component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct CaseId(String);

impl CaseId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let bad = id.is_empty()
            || id == "."
            || id == ".."
            || id.chars().any(|c| c == '/' || c == '\\' || c == '\0');
        if bad {
            return Err(Error::InvalidCaseId(id));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Mask of the voxels whose label belongs to `region`.
pub fn extract_region(labels: &LabelVolume, region: Region) -> RegionMask {
    RegionMask {
        region,
        geometry: labels.geometry.clone(),
        data: labels.data.iter().map(|&l| region.contains(l)).collect(),
    }
}

/// Rebuilds a label map from three region masks.
///
/// Nesting is enforced first (`et ∧ tc ∧ wt`, `tc ∧ wt`), so the masks may
/// come from independent per-region fusion.
pub fn reconstruct_labels(et: &RegionMask, tc: &RegionMask, wt: &RegionMask) -> Result<LabelVolume> {
    et.geometry.check_same_grid(&tc.geometry, "ET vs TC mask")?;
    et.geometry.check_same_grid(&wt.geometry, "ET vs WT mask")?;
    let data = et
        .data
        .iter()
        .zip(&tc.data)
        .zip(&wt.data)
        .map(|((&e, &t), &w)| match (w, w && t, w && t && e) {
            (_, _, true) => ET,
            (_, true, false) => NCR,
            (true, false, false) => ED,
            _ => BACKGROUND,
        })
        .collect();
    Ok(LabelVolume {
        geometry: wt.geometry.clone(),
        data,
    })
}
