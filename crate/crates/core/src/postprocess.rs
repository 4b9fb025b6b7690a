//! Connected-component post-processing of fused label maps.
//!
//! Two rules are applied in order: enhancing-tumor components of at most
//! `et_min_volume` voxels are relabeled as background, then background
//! cavities enclosed by the tumor core are filled so the removal cannot
//! leave holes in TC.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{extract_region, Geometry, LabelVolume, Region, RegionMask, BACKGROUND, ET, NCR};

/// Voxel adjacency: shared face (6), face or edge (18), or any contact (26).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Six,
    Eighteen,
    TwentySix,
}

impl Connectivity {
    /// Neighbor offsets, in a fixed order.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let max_l1 = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::with_capacity(26);
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                for dk in -1isize..=1 {
                    let l1 = di.abs() + dj.abs() + dk.abs();
                    if l1 > 0 && l1 <= max_l1 {
                        out.push([di, dj, dk]);
                    }
                }
            }
        }
        out
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(Error::InvalidConfig(format!("connectivity must be 6, 18 or 26, got {v}"))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Component id per voxel (0 = background), ids contiguous from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    connectivity: Connectivity,
    ids: Vec<u32>,
    sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn num_components(&self) -> usize {
        self.sizes.len()
    }

    /// Voxel count of component `id` (1-based).
    pub fn size(&self, id: u32) -> usize {
        self.sizes[id as usize - 1]
    }

    /// Sizes indexed by `id - 1`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
}

/// Labels the foreground of `mask`. Ids follow the scan order of each
/// component's first voxel.
pub fn connected_components(mask: &RegionMask, connectivity: Connectivity) -> ComponentLabeling {
    label_components(mask.geometry(), mask.data(), connectivity)
}

fn label_components(geometry: &Geometry, foreground: &[bool], connectivity: Connectivity) -> ComponentLabeling {
    let dims = geometry.dims();
    let offsets = connectivity.offsets();
    let mut ids = vec![0u32; foreground.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();

    for seed in 0..foreground.len() {
        if !foreground[seed] || ids[seed] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut size = 0usize;
        ids[seed] = id;
        stack.push(seed);
        while let Some(v) = stack.pop() {
            size += 1;
            let c = geometry.coords(v);
            for off in &offsets {
                if let Some(n) = neighbor(geometry, dims, c, off) {
                    if foreground[n] && ids[n] == 0 {
                        ids[n] = id;
                        stack.push(n);
                    }
                }
            }
        }
        sizes.push(size);
    }
    ComponentLabeling {
        connectivity,
        ids,
        sizes,
    }
}

#[inline]
fn neighbor(geometry: &Geometry, dims: [usize; 3], c: [usize; 3], off: &[isize; 3]) -> Option<usize> {
    let i = c[0].checked_add_signed(off[0]).filter(|&v| v < dims[0])?;
    let j = c[1].checked_add_signed(off[1]).filter(|&v| v < dims[1])?;
    let k = c[2].checked_add_signed(off[2]).filter(|&v| v < dims[2])?;
    Some(geometry.index(i, j, k))
}

fn on_border(dims: [usize; 3], c: [usize; 3]) -> bool {
    (0..3).any(|a| c[a] == 0 || c[a] + 1 == dims[a])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocessConfig {
    /// ET components with at most this many voxels are removed.
    pub et_min_volume: usize,
    pub foreground_connectivity: Connectivity,
    pub hole_connectivity: Connectivity,
    /// Label given to filled TC cavities; must be a TC label.
    pub hole_fill_label: u8,
    /// When false, holes are only reported.
    pub repair_holes: bool,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            et_min_volume: 50,
            foreground_connectivity: Connectivity::TwentySix,
            hole_connectivity: Connectivity::Six,
            hole_fill_label: NCR,
            repair_holes: true,
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !Region::Tc.contains(self.hole_fill_label) {
            return Err(Error::InvalidConfig(format!(
                "hole_fill_label {} is not a tumor-core label",
                self.hole_fill_label
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PostprocessReport {
    pub removed_et_components: usize,
    pub removed_et_voxels: usize,
    /// Background voxels enclosed by the tumor core after ET filtering.
    pub hole_voxels: usize,
    pub holes_filled: bool,
}

/// Sets every ET component of at most `et_min_volume` voxels to background.
pub fn filter_small_et(labels: &LabelVolume, config: &PostprocessConfig) -> LabelVolume {
    filter_small_et_counted(labels, config).0
}

fn filter_small_et_counted(labels: &LabelVolume, config: &PostprocessConfig) -> (LabelVolume, usize, usize) {
    let cc = connected_components(&extract_region(labels, Region::Et), config.foreground_connectivity);
    let small: Vec<bool> = cc.sizes().iter().map(|&s| s <= config.et_min_volume).collect();
    let removed_components = small.iter().filter(|&&s| s).count();
    if removed_components == 0 {
        return (labels.clone(), 0, 0);
    }
    let mut removed_voxels = 0;
    let out = labels.map_labels(|i, l| {
        let id = cc.ids()[i];
        if id != 0 && small[id as usize - 1] {
            removed_voxels += 1;
            BACKGROUND
        } else {
            l
        }
    });
    (out, removed_components, removed_voxels)
}

/// Background voxels lying in a cavity of the tumor core: a component of the
/// non-TC voxels (under `hole_connectivity`) that does not reach the volume
/// border.
pub fn find_tc_holes(labels: &LabelVolume, config: &PostprocessConfig) -> Vec<usize> {
    let geometry = labels.geometry();
    let dims = geometry.dims();
    let outside_tc: Vec<bool> = labels.data().iter().map(|&l| !Region::Tc.contains(l)).collect();
    let cc = label_components(geometry, &outside_tc, config.hole_connectivity);
    let mut touches_border = vec![false; cc.num_components()];
    for (v, &id) in cc.ids().iter().enumerate() {
        if id != 0 && on_border(dims, geometry.coords(v)) {
            touches_border[id as usize - 1] = true;
        }
    }
    cc.ids()
        .iter()
        .enumerate()
        .filter(|&(v, &id)| id != 0 && !touches_border[id as usize - 1] && labels.data()[v] == BACKGROUND)
        .map(|(v, _)| v)
        .collect()
}

/// Fills enclosed background cavities of TC with `hole_fill_label`.
/// Edema voxels are never changed.
pub fn repair_tc_holes(labels: &LabelVolume, config: &PostprocessConfig) -> LabelVolume {
    let holes = find_tc_holes(labels, config);
    if holes.is_empty() {
        return labels.clone();
    }
    let mut is_hole = vec![false; labels.data().len()];
    for v in holes {
        is_hole[v] = true;
    }
    let fill = config.hole_fill_label.min(ET);
    labels.map_labels(|i, l| if is_hole[i] { fill } else { l })
}

/// Small-ET removal followed by TC hole repair.
pub fn postprocess_case(labels: &LabelVolume, config: &PostprocessConfig) -> Result<LabelVolume> {
    postprocess_case_with_report(labels, config).map(|(l, _)| l)
}

pub fn postprocess_case_with_report(
    labels: &LabelVolume,
    config: &PostprocessConfig,
) -> Result<(LabelVolume, PostprocessReport)> {
    config.validate()?;
    let (filtered, removed_et_components, removed_et_voxels) = filter_small_et_counted(labels, config);
    let hole_voxels = find_tc_holes(&filtered, config).len();
    let out = if config.repair_holes && hole_voxels > 0 {
        repair_tc_holes(&filtered, config)
    } else {
        filtered
    };
    Ok((
        out,
        PostprocessReport {
            removed_et_components,
            removed_et_voxels,
            hole_voxels,
            holes_filled: config.repair_holes && hole_voxels > 0,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::ED;
    use proptest::prelude::*;

    fn grid(n: usize) -> Geometry {
        Geometry::unit([n, n, n]).unwrap()
    }

    fn mask_with(g: &Geometry, voxels: &[[usize; 3]]) -> RegionMask {
        let mut d = vec![false; g.voxel_count()];
        for &[i, j, k] in voxels {
            d[g.index(i, j, k)] = true;
        }
        RegionMask::new(Region::Et, g.clone(), d).unwrap()
    }

    #[test]
    fn offsets_counts() {
        assert_eq!(Connectivity::Six.offsets().len(), 6);
        assert_eq!(Connectivity::Eighteen.offsets().len(), 18);
        assert_eq!(Connectivity::TwentySix.offsets().len(), 26);
        assert!(Connectivity::try_from(8).is_err());
    }

    #[test]
    fn distant_voxels_are_separate() {
        let g = grid(6);
        let cc = connected_components(&mask_with(&g, &[[0, 0, 0], [5, 5, 5]]), Connectivity::TwentySix);
        assert_eq!(cc.sizes(), &[1, 1]);
        assert_eq!(cc.ids()[0], 1);
        assert_eq!(cc.ids()[g.index(5, 5, 5)], 2);
    }

    #[test]
    fn diagonal_neighbors_depend_on_connectivity() {
        let g = grid(3);
        let m = mask_with(&g, &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).num_components(), 1);
        assert_eq!(connected_components(&m, Connectivity::Eighteen).num_components(), 2);
        assert_eq!(connected_components(&m, Connectivity::Six).num_components(), 2);
        let m = mask_with(&g, &[[0, 0, 0], [1, 1, 0]]);
        assert_eq!(connected_components(&m, Connectivity::Eighteen).num_components(), 1);
        assert_eq!(connected_components(&m, Connectivity::Six).num_components(), 2);
    }

    fn et_block(g: &Geometry, count: usize) -> LabelVolume {
        // `count` voxels filled in scan order: a compact 26-connected blob
        let mut d = vec![0u8; g.voxel_count()];
        for v in d.iter_mut().take(count) {
            *v = ET;
        }
        LabelVolume::new(g.clone(), d).unwrap()
    }

    #[test]
    fn et_component_of_fifty_is_removed() {
        let l = et_block(&grid(10), 50);
        let out = filter_small_et(&l, &PostprocessConfig::default());
        assert!(out.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn et_component_of_fifty_one_is_kept() {
        let l = et_block(&grid(10), 51);
        assert_eq!(filter_small_et(&l, &PostprocessConfig::default()), l);
    }

    #[test]
    fn no_et_means_no_change() {
        let g = grid(4);
        let l = LabelVolume::new(g.clone(), (0..64).map(|i| (i % 3) as u8).collect()).unwrap();
        assert_eq!(filter_small_et(&l, &PostprocessConfig::default()), l);
    }

    #[test]
    fn cube_center_hole_is_filled() {
        let g = grid(5);
        let mut d = vec![NCR; 125];
        d[g.index(2, 2, 2)] = 0;
        let l = LabelVolume::new(g.clone(), d).unwrap();
        let out = repair_tc_holes(&l, &PostprocessConfig::default());
        assert!(out.data().iter().all(|&v| v == NCR));
    }

    #[test]
    fn tunnel_to_border_is_not_a_hole() {
        let g = grid(5);
        let mut d = vec![NCR; 125];
        for k in 0..=2 {
            d[g.index(2, 2, k)] = 0;
        }
        let l = LabelVolume::new(g, d).unwrap();
        assert!(find_tc_holes(&l, &PostprocessConfig::default()).is_empty());
        assert_eq!(repair_tc_holes(&l, &PostprocessConfig::default()), l);
    }

    #[test]
    fn diagonal_leak_does_not_open_a_hole_under_six_connectivity() {
        // The cavity touches a border-connected background voxel only by an edge.
        let g = grid(5);
        let mut d = vec![NCR; 125];
        d[g.index(2, 2, 2)] = 0;
        d[g.index(1, 1, 2)] = 0;
        d[g.index(0, 1, 2)] = 0;
        let l = LabelVolume::new(g.clone(), d).unwrap();
        assert_eq!(find_tc_holes(&l, &PostprocessConfig::default()), vec![g.index(2, 2, 2)]);
    }

    #[test]
    fn edema_inside_core_is_left_alone() {
        let g = grid(5);
        let mut d = vec![NCR; 125];
        d[g.index(2, 2, 2)] = ED;
        let l = LabelVolume::new(g, d).unwrap();
        assert_eq!(repair_tc_holes(&l, &PostprocessConfig::default()), l);
    }

    #[test]
    fn small_et_island_in_core_is_removed_and_refilled() {
        let g = grid(12);
        let mut d = vec![0u8; g.voxel_count()];
        for i in 1..11 {
            for j in 1..11 {
                for k in 1..11 {
                    d[g.index(i, j, k)] = NCR;
                }
            }
        }
        // 10-voxel ET island (2 x 5 x 1)
        for i in 4..6 {
            for j in 3..8 {
                d[g.index(i, j, 5)] = ET;
            }
        }
        let l = LabelVolume::new(g.clone(), d.clone()).unwrap();
        let (out, report) = postprocess_case_with_report(&l, &PostprocessConfig::default()).unwrap();
        assert_eq!(report.removed_et_components, 1);
        assert_eq!(report.removed_et_voxels, 10);
        assert_eq!(report.hole_voxels, 10);
        let expected: Vec<u8> = d.iter().map(|&v| if v == ET { NCR } else { v }).collect();
        assert_eq!(out.data(), &expected[..]);
    }

    #[test]
    fn report_only_mode_leaves_holes() {
        let g = grid(5);
        let mut d = vec![NCR; 125];
        d[g.index(2, 2, 2)] = ET;
        let l = LabelVolume::new(g.clone(), d).unwrap();
        let config = PostprocessConfig {
            repair_holes: false,
            ..Default::default()
        };
        let (out, report) = postprocess_case_with_report(&l, &config).unwrap();
        assert_eq!(report.hole_voxels, 1);
        assert!(!report.holes_filled);
        assert_eq!(out.data()[g.index(2, 2, 2)], 0);
    }

    #[test]
    fn invalid_fill_label() {
        let config = PostprocessConfig {
            hole_fill_label: ED,
            ..Default::default()
        };
        let l = LabelVolume::zeros(grid(2));
        assert!(matches!(postprocess_case(&l, &config), Err(Error::InvalidConfig(_))));
    }

    fn labels_strategy() -> impl Strategy<Value = Vec<u8>> {
        // Biased toward tumor so that components and cavities actually occur.
        proptest::collection::vec(prop_oneof![2 => Just(0u8), 3 => Just(1u8), 1 => Just(2u8), 3 => Just(3u8)], 512)
    }

    proptest! {
        #[test]
        fn postprocess_properties(data in labels_strategy(), min_volume in 0usize..8) {
            let l = LabelVolume::new(grid(8), data).unwrap();
            let config = PostprocessConfig { et_min_volume: min_volume, ..Default::default() };
            let count = |l: &LabelVolume, r: Region| extract_region(l, r).count();

            let filtered = filter_small_et(&l, &config);
            for r in Region::ALL {
                prop_assert!(count(&filtered, r) <= count(&l, r));
            }
            for (a, b) in l.data().iter().zip(filtered.data()) {
                if *a == NCR || *a == ED {
                    prop_assert_eq!(a, b);
                }
            }

            let repaired = repair_tc_holes(&filtered, &config);
            prop_assert!(count(&repaired, Region::Tc) >= count(&filtered, Region::Tc));
            for (a, b) in filtered.data().iter().zip(repaired.data()) {
                if *a == ED {
                    prop_assert_eq!(a, b);
                }
            }
            prop_assert!(find_tc_holes(&repaired, &config).is_empty());

            let once = postprocess_case(&l, &config).unwrap();
            prop_assert_eq!(&once, &repaired);
            prop_assert_eq!(postprocess_case(&once, &config).unwrap(), once);
        }

        #[test]
        fn components_are_maximal_partition(data in proptest::collection::vec(any::<bool>(), 216)) {
            let g = grid(6);
            let m = RegionMask::new(Region::Wt, g.clone(), data.clone()).unwrap();
            for conn in [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix] {
                let cc = connected_components(&m, conn);
                let total: usize = cc.sizes().iter().sum();
                prop_assert_eq!(total, m.count());
                for v in 0..data.len() {
                    prop_assert_eq!(data[v], cc.ids()[v] != 0);
                    if !data[v] { continue; }
                    let c = g.coords(v);
                    for off in conn.offsets() {
                        if let Some(n) = neighbor(&g, g.dims(), c, &off) {
                            if data[n] {
                                prop_assert_eq!(cc.ids()[v], cc.ids()[n]);
                            }
                        }
                    }
                }
            }
        }
    }
}
