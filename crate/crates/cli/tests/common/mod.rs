#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use gliofuse_testkit::{idx, nifti};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SPACING: [f32; 3] = [1.0, 1.0, 1.0];

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn gliofuse(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_gliofuse"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("spawn gliofuse");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn case_path(dir: &Path, case: &str, suffix: &str) -> PathBuf {
    dir.join(case).join(format!("{case}-{suffix}.nii.gz"))
}

pub fn write_labels(dir: &Path, case: &str, dims: [usize; 3], labels: &[u8]) -> PathBuf {
    write_labels_spaced(dir, case, dims, SPACING, labels)
}

pub fn write_labels_spaced(dir: &Path, case: &str, dims: [usize; 3], spacing: [f32; 3], labels: &[u8]) -> PathBuf {
    let path = case_path(dir, case, "seg");
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(&path, nifti::label_file(dims, spacing, labels)).unwrap();
    path
}

pub fn write_scalar(dir: &Path, case: &str, suffix: &str, dims: [usize; 3], values: &[f64]) -> PathBuf {
    let path = case_path(dir, case, suffix);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(&path, nifti::scalar_file(dims, SPACING, values)).unwrap();
    path
}

pub fn read_labels(path: &Path) -> Vec<u8> {
    nifti::decode(&fs::read(path).unwrap()).2.iter().map(|&v| v as u8).collect()
}

pub fn read_values(path: &Path) -> Vec<f64> {
    nifti::decode(&fs::read(path).unwrap()).2
}

/// Nested ellipsoids (edema, core, enhancing rim) at a random centre.
pub fn tumor(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Vec<u8> {
    let c: [f64; 3] = std::array::from_fn(|a| rng.gen_range(0.35..0.65) * dims[a] as f64);
    let r: [f64; 3] = std::array::from_fn(|a| rng.gen_range(0.22..0.32) * dims[a] as f64);
    let mut out = vec![0u8; dims.iter().product()];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let p = [i, j, k];
                let d: f64 = (0..3).map(|a| ((p[a] as f64 - c[a]) / r[a]).powi(2)).sum::<f64>().sqrt();
                out[idx(dims, i, j, k)] = match d {
                    d if d < 0.35 => 1,
                    d if d < 0.6 => 3,
                    d if d < 1.0 => 2,
                    _ => 0,
                };
            }
        }
    }
    out
}

/// Each voxel independently replaced by a random label with probability `flip`.
pub fn corrupt(rng: &mut ChaCha8Rng, labels: &[u8], flip: f64) -> Vec<u8> {
    labels
        .iter()
        .map(|&l| if rng.gen_bool(flip) { rng.gen_range(0..4) } else { l })
        .collect()
}

/// Sets an axis-aligned box to `label`.
pub fn paint(labels: &mut [u8], dims: [usize; 3], lo: [usize; 3], size: [usize; 3], label: u8) {
    for i in lo[0]..lo[0] + size[0] {
        for j in lo[1]..lo[1] + size[1] {
            for k in lo[2]..lo[2] + size[2] {
                labels[idx(dims, i, j, k)] = label;
            }
        }
    }
}
