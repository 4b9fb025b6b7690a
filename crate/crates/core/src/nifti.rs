//! NIfTI-1 single-file (`.nii` / `.nii.gz`) reading and writing.
//!
//! Only the subset needed for BraTS volumes is handled: 3D (or 4D with a
//! single frame) images of type uint8, int16, int32, float32 or float64.
//! Orientation comes from the sform rows when `sform_code > 0`; otherwise an
//! axis-aligned affine is built from `pixdim`. Quaternion qforms are ignored.
//!
//! NIfTI stores the first axis fastest, the in-memory volumes store the last
//! axis fastest; the conversion happens here.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{Geometry, LabelVolume, ScalarVolume};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const DEFAULT_VOX_OFFSET: usize = 352;
pub const MAGIC_SINGLE: [u8; 4] = *b"n+1\0";

/// Byte offsets of the NIfTI-1 header fields used here.
mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

const NIFTI_UNITS_MM: u8 = 2;
const NIFTI_XFORM_SCANNER_ANAT: i16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    UInt8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl DataType {
    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => DataType::UInt8,
            4 => DataType::Int16,
            8 => DataType::Int32,
            16 => DataType::Float32,
            64 => DataType::Float64,
            other => return Err(Error::UnsupportedDatatype(other)),
        })
    }

    pub fn code(self) -> i16 {
        match self {
            DataType::UInt8 => 2,
            DataType::Int16 => 4,
            DataType::Int32 => 8,
            DataType::Float32 => 16,
            DataType::Float64 => 64,
        }
    }

    pub fn bitpix(self) -> i16 {
        8 * self.size() as i16
    }

    pub fn size(self) -> usize {
        match self {
            DataType::UInt8 => 1,
            DataType::Int16 => 2,
            DataType::Int32 | DataType::Float32 => 4,
            DataType::Float64 => 8,
        }
    }
}

/// The NIfTI-1 header fields this crate reads or writes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub endianness: Endianness,
    pub sizeof_hdr: i32,
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub xyzt_units: u8,
    pub qform_code: i16,
    pub sform_code: i16,
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
}

struct Fields<'a> {
    bytes: &'a [u8],
    endianness: Endianness,
}

impl Fields<'_> {
    fn array<const N: usize>(&self, at: usize) -> [u8; N] {
        self.bytes[at..at + N].try_into().expect("header slice")
    }

    fn i16(&self, at: usize) -> i16 {
        match self.endianness {
            Endianness::Little => i16::from_le_bytes(self.array(at)),
            Endianness::Big => i16::from_be_bytes(self.array(at)),
        }
    }

    fn i32(&self, at: usize) -> i32 {
        match self.endianness {
            Endianness::Little => i32::from_le_bytes(self.array(at)),
            Endianness::Big => i32::from_be_bytes(self.array(at)),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        match self.endianness {
            Endianness::Little => f32::from_le_bytes(self.array(at)),
            Endianness::Big => f32::from_be_bytes(self.array(at)),
        }
    }
}

impl NiftiHeader {
    /// Parses and validates the first 348 bytes of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE {
            return Err(Error::BadHeader(format!(
                "{} bytes, shorter than the {HEADER_SIZE}-byte header",
                bytes.len()
            )));
        }
        let size_le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let size_be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
        let endianness = if size_le == HEADER_SIZE as i32 {
            Endianness::Little
        } else if size_be == HEADER_SIZE as i32 {
            Endianness::Big
        } else {
            return Err(Error::BadHeader(format!(
                "sizeof_hdr is {size_le} (little-endian) / {size_be} (big-endian), expected 348"
            )));
        };
        let f = Fields { bytes, endianness };

        let mut dim = [0i16; 8];
        let mut pixdim = [0f32; 8];
        for i in 0..8 {
            dim[i] = f.i16(offsets::DIM + 2 * i);
            pixdim[i] = f.f32(offsets::PIXDIM + 4 * i);
        }
        let mut srow = [[0f32; 4]; 3];
        for (r, row) in srow.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f.f32(offsets::SROW_X + 16 * r + 4 * c);
            }
        }
        let header = NiftiHeader {
            endianness,
            sizeof_hdr: f.i32(offsets::SIZEOF_HDR),
            dim,
            datatype: f.i16(offsets::DATATYPE),
            bitpix: f.i16(offsets::BITPIX),
            pixdim,
            vox_offset: f.f32(offsets::VOX_OFFSET),
            scl_slope: f.f32(offsets::SCL_SLOPE),
            scl_inter: f.f32(offsets::SCL_INTER),
            xyzt_units: bytes[offsets::XYZT_UNITS],
            qform_code: f.i16(offsets::QFORM_CODE),
            sform_code: f.i16(offsets::SFORM_CODE),
            srow,
            magic: f.array(offsets::MAGIC),
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<()> {
        if self.magic != MAGIC_SINGLE {
            return Err(Error::BadMagic(self.magic));
        }
        match self.dim[0] {
            3 => {}
            4 if self.dim[4] == 1 => {}
            4 => {
                return Err(Error::BadHeader(format!(
                    "4D volume with {} frames; only single-frame volumes are supported",
                    self.dim[4]
                )))
            }
            n => return Err(Error::BadHeader(format!("dim[0] = {n}, expected 3 or 4"))),
        }
        if self.dim[1..4].iter().any(|&d| d < 1) {
            return Err(Error::BadHeader(format!("non-positive dims {:?}", &self.dim[1..4])));
        }
        let datatype = DataType::from_code(self.datatype)?;
        if self.bitpix != datatype.bitpix() {
            return Err(Error::BadHeader(format!(
                "bitpix {} inconsistent with datatype {}",
                self.bitpix, self.datatype
            )));
        }
        let spacing = self.spacing();
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::NonPositiveSpacing(spacing));
        }
        if !(self.vox_offset.is_finite() && self.vox_offset >= HEADER_SIZE as f32) {
            return Err(Error::BadHeader(format!("vox_offset {} before end of header", self.vox_offset)));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.dim[1] as usize, self.dim[2] as usize, self.dim[3] as usize]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            f64::from(self.pixdim[1]),
            f64::from(self.pixdim[2]),
            f64::from(self.pixdim[3]),
        ]
    }

    pub fn data_type(&self) -> Result<DataType> {
        DataType::from_code(self.datatype)
    }

    /// Intensity scaling `(slope, intercept)`; a zero or non-finite slope
    /// means no scaling.
    pub fn scaling(&self) -> (f64, f64) {
        if self.scl_slope == 0.0 || !self.scl_slope.is_finite() {
            (1.0, 0.0)
        } else {
            let inter = if self.scl_inter.is_finite() { self.scl_inter } else { 0.0 };
            (f64::from(self.scl_slope), f64::from(inter))
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let spacing = self.spacing();
        if self.sform_code > 0 {
            let affine = self.srow.map(|row| row.map(f64::from));
            Geometry::with_affine(self.dims(), spacing, affine)
        } else {
            Geometry::new(self.dims(), spacing)
        }
    }

    /// Little-endian header for `geometry`, padded to the default voxel offset.
    fn encode(geometry: &Geometry, datatype: DataType) -> Vec<u8> {
        let mut b = vec![0u8; DEFAULT_VOX_OFFSET];
        let put = |b: &mut Vec<u8>, at: usize, v: &[u8]| b[at..at + v.len()].copy_from_slice(v);
        put(&mut b, offsets::SIZEOF_HDR, &(HEADER_SIZE as i32).to_le_bytes());
        let d = geometry.dims();
        let dim: [i16; 8] = [3, d[0] as i16, d[1] as i16, d[2] as i16, 1, 1, 1, 1];
        for (i, v) in dim.iter().enumerate() {
            put(&mut b, offsets::DIM + 2 * i, &v.to_le_bytes());
        }
        put(&mut b, offsets::DATATYPE, &datatype.code().to_le_bytes());
        put(&mut b, offsets::BITPIX, &datatype.bitpix().to_le_bytes());
        let s = geometry.spacing();
        let pixdim = [1.0f32, s[0] as f32, s[1] as f32, s[2] as f32, 0.0, 0.0, 0.0, 0.0];
        for (i, v) in pixdim.iter().enumerate() {
            put(&mut b, offsets::PIXDIM + 4 * i, &v.to_le_bytes());
        }
        put(&mut b, offsets::VOX_OFFSET, &(DEFAULT_VOX_OFFSET as f32).to_le_bytes());
        put(&mut b, offsets::SCL_SLOPE, &1.0f32.to_le_bytes());
        put(&mut b, offsets::SCL_INTER, &0.0f32.to_le_bytes());
        b[offsets::XYZT_UNITS] = NIFTI_UNITS_MM;
        put(&mut b, offsets::DESCRIP, b"gliofuse");
        put(&mut b, offsets::SFORM_CODE, &NIFTI_XFORM_SCANNER_ANAT.to_le_bytes());
        for (r, row) in geometry.affine().iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                put(&mut b, offsets::SROW_X + 16 * r + 4 * c, &(*v as f32).to_le_bytes());
            }
        }
        put(&mut b, offsets::MAGIC, &MAGIC_SINGLE);
        b
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::with_capacity(raw.len() * 4);
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Decodes an uncompressed NIfTI-1 image into geometry and scaled values in
/// last-axis-fastest order.
fn decode(bytes: &[u8]) -> Result<(Geometry, Vec<f64>)> {
    let header = NiftiHeader::parse(bytes)?;
    let geometry = header.geometry()?;
    let datatype = header.data_type()?;
    let [nx, ny, nz] = geometry.dims();
    let n = nx * ny * nz;
    let offset = header.vox_offset as usize;
    let expected = n * datatype.size();
    let found = bytes.len().saturating_sub(offset);
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    let raw = &bytes[offset..offset + expected];
    let (slope, inter) = header.scaling();
    let big = header.endianness == Endianness::Big;

    macro_rules! sample {
        ($t:ty, $i:expr) => {{
            const S: usize = std::mem::size_of::<$t>();
            let chunk: [u8; S] = raw[$i * S..($i + 1) * S].try_into().unwrap();
            if big {
                <$t>::from_be_bytes(chunk) as f64
            } else {
                <$t>::from_le_bytes(chunk) as f64
            }
        }};
    }
    let value = |i: usize| -> f64 {
        match datatype {
            DataType::UInt8 => f64::from(raw[i]),
            DataType::Int16 => sample!(i16, i),
            DataType::Int32 => sample!(i32, i),
            DataType::Float32 => sample!(f32, i),
            DataType::Float64 => sample!(f64, i),
        }
    };

    let mut data = vec![0.0f64; n];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let v = value(x + nx * (y + ny * z));
                data[geometry.index(x, y, z)] = v * slope + inter;
            }
        }
    }
    Ok((geometry, data))
}

/// Decodes an in-memory NIfTI-1 image (optionally gzip-compressed).
pub fn parse_scalar_volume(bytes: &[u8]) -> Result<ScalarVolume> {
    let (geometry, data) = decode_maybe_gz(bytes)?;
    ScalarVolume::new(geometry, data)
}

pub fn parse_label_volume(bytes: &[u8]) -> Result<LabelVolume> {
    let (geometry, data) = decode_maybe_gz(bytes)?;
    to_labels(geometry, data)
}

fn decode_maybe_gz(bytes: &[u8]) -> Result<(Geometry, Vec<f64>)> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| Error::io("<memory>", e))?;
        decode(&out)
    } else {
        decode(bytes)
    }
}

pub fn read_scalar_volume(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    let (geometry, data) = decode(&read_file(path.as_ref())?)?;
    ScalarVolume::new(geometry, data)
}

/// Reads a label map; every voxel must decode to exactly 0, 1, 2 or 3.
pub fn read_label_volume(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let (geometry, data) = decode(&read_file(path.as_ref())?)?;
    to_labels(geometry, data)
}

fn to_labels(geometry: Geometry, data: Vec<f64>) -> Result<LabelVolume> {
    let labels = data
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            let label = value as u8;
            if label <= 3 && f64::from(label) == value {
                Ok(label)
            } else {
                Err(Error::InvalidLabel { index, value })
            }
        })
        .collect::<Result<Vec<u8>>>()?;
    LabelVolume::new(geometry, labels)
}

fn encode_body<T: Copy>(geometry: &Geometry, data: &[T], mut put: impl FnMut(T)) {
    let [nx, ny, nz] = geometry.dims();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                put(data[geometry.index(x, y, z)]);
            }
        }
    }
}

/// Uncompressed NIfTI-1 bytes of a label map (uint8).
pub fn encode_label_volume(labels: &LabelVolume) -> Vec<u8> {
    let g = labels.geometry();
    let mut out = NiftiHeader::encode(g, DataType::UInt8);
    out.reserve(g.voxel_count());
    encode_body(g, labels.data(), |v| out.push(v));
    out
}

/// Uncompressed NIfTI-1 bytes of a scalar volume (float32).
pub fn encode_scalar_volume(volume: &ScalarVolume) -> Vec<u8> {
    let g = volume.geometry();
    let mut out = NiftiHeader::encode(g, DataType::Float32);
    out.reserve(4 * g.voxel_count());
    encode_body(g, volume.data(), |v| out.extend_from_slice(&(v as f32).to_le_bytes()));
    out
}

/// Writes labels as uint8; gzip-compressed when the path ends in `.gz`.
pub fn write_label_volume(labels: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_label_volume(labels))
}

/// Writes intensities as float32; gzip-compressed when the path ends in `.gz`.
pub fn write_scalar_volume(volume: &ScalarVolume, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_scalar_volume(volume))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let gz = path.extension().is_some_and(|e| e == "gz");
    let payload = if gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes.to_vec()
    };
    write_file_atomic(path, &payload)
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_file_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let tmp = temp_sibling(path);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    path.with_file_name(format!(".{name}.tmp-{}-{n}", std::process::id()))
}
