//! NIfTI-1 files assembled byte by byte from the field layout.

use std::io::Write;

/// Header fields a fixture can set; everything else stays zero.
#[derive(Debug, Clone)]
pub struct HeaderSpec {
    pub big_endian: bool,
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub sform_code: i16,
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
}

impl HeaderSpec {
    /// Little-endian 3D header with the given datatype/bitpix and spacing.
    pub fn new(dims: [usize; 3], datatype: i16, bitpix: i16, spacing: [f32; 3]) -> Self {
        Self {
            big_endian: false,
            dim: [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1],
            datatype,
            bitpix,
            pixdim: [1.0, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0],
            vox_offset: 352.0,
            scl_slope: 1.0,
            scl_inter: 0.0,
            sform_code: 0,
            srow: [[0.0; 4]; 3],
            magic: *b"n+1\0",
        }
    }

    fn put(&self, buf: &mut [u8], at: usize, le: &[u8]) {
        let mut bytes = le.to_vec();
        if self.big_endian {
            bytes.reverse();
        }
        buf[at..at + bytes.len()].copy_from_slice(&bytes);
    }

    /// The header padded with zeros up to `vox_offset`.
    pub fn bytes(&self) -> Vec<u8> {
        let mut b = vec![0u8; (self.vox_offset as usize).max(348)];
        self.put(&mut b, 0, &348i32.to_le_bytes());
        for (n, v) in self.dim.iter().enumerate() {
            self.put(&mut b, 40 + 2 * n, &v.to_le_bytes());
        }
        self.put(&mut b, 70, &self.datatype.to_le_bytes());
        self.put(&mut b, 72, &self.bitpix.to_le_bytes());
        for (n, v) in self.pixdim.iter().enumerate() {
            self.put(&mut b, 76 + 4 * n, &v.to_le_bytes());
        }
        self.put(&mut b, 108, &self.vox_offset.to_le_bytes());
        self.put(&mut b, 112, &self.scl_slope.to_le_bytes());
        self.put(&mut b, 116, &self.scl_inter.to_le_bytes());
        b[123] = 2; // mm
        self.put(&mut b, 254, &self.sform_code.to_le_bytes());
        for (r, row) in self.srow.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                self.put(&mut b, 280 + 16 * r + 4 * c, &v.to_le_bytes());
            }
        }
        b[344..348].copy_from_slice(&self.magic);
        b
    }

    /// Encodes values (already in file order) with this header's datatype.
    pub fn encode_values(&self, values: &[f64]) -> Vec<u8> {
        let mut out = Vec::new();
        for &v in values {
            let mut le: Vec<u8> = match self.datatype {
                2 => vec![v as u8],
                4 => (v as i16).to_le_bytes().to_vec(),
                8 => (v as i32).to_le_bytes().to_vec(),
                16 => (v as f32).to_le_bytes().to_vec(),
                64 => v.to_le_bytes().to_vec(),
                other => panic!("datatype {other}"),
            };
            if self.big_endian {
                le.reverse();
            }
            out.extend(le);
        }
        out
    }

    /// Header plus voxel data; `values` are given in C order (last axis
    /// fastest) and written first-axis-fastest as the format requires.
    pub fn file(&self, values_c_order: &[f64]) -> Vec<u8> {
        let dims = [self.dim[1] as usize, self.dim[2] as usize, self.dim[3] as usize];
        let mut file_order = Vec::with_capacity(values_c_order.len());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    file_order.push(values_c_order[crate::idx(dims, i, j, k)]);
                }
            }
        }
        let mut b = self.bytes();
        b.extend(self.encode_values(&file_order));
        b
    }
}

pub fn gzip(bytes: &[u8]) -> Vec<u8> {
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(bytes).unwrap();
    enc.finish().unwrap()
}

pub fn gunzip(bytes: &[u8]) -> Vec<u8> {
    let mut dec = flate2::write::GzDecoder::new(Vec::new());
    dec.write_all(bytes).unwrap();
    dec.finish().unwrap()
}

pub fn read_i16(bytes: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([bytes[at], bytes[at + 1]])
}

pub fn read_f32(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Dims, spacing and C-order values of a little-endian uint8 or float32
/// file (gzip or plain), read straight from the field offsets.
pub fn decode(file: &[u8]) -> ([usize; 3], [f64; 3], Vec<f64>) {
    let bytes = if file.starts_with(&[0x1f, 0x8b]) { gunzip(file) } else { file.to_vec() };
    assert_eq!(i32::from_le_bytes(bytes[0..4].try_into().unwrap()), 348, "little-endian header");
    let dims: [usize; 3] = std::array::from_fn(|a| read_i16(&bytes, 42 + 2 * a) as usize);
    let spacing: [f64; 3] = std::array::from_fn(|a| f64::from(read_f32(&bytes, 80 + 4 * a)));
    let offset = read_f32(&bytes, 108) as usize;
    let datatype = read_i16(&bytes, 70);
    let n = dims.iter().product::<usize>();
    let file_order: Vec<f64> = match datatype {
        2 => bytes[offset..offset + n].iter().map(|&b| f64::from(b)).collect(),
        16 => (0..n).map(|v| f64::from(read_f32(&bytes, offset + 4 * v))).collect(),
        other => panic!("datatype {other}"),
    };
    let mut values = vec![0.0; n];
    let mut v = 0;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                values[crate::idx(dims, i, j, k)] = file_order[v];
                v += 1;
            }
        }
    }
    (dims, spacing, values)
}

/// A gzip-compressed uint8 label file.
pub fn label_file(dims: [usize; 3], spacing: [f32; 3], labels: &[u8]) -> Vec<u8> {
    let values: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    gzip(&HeaderSpec::new(dims, 2, 8, spacing).file(&values))
}

/// A gzip-compressed float32 intensity file.
pub fn scalar_file(dims: [usize; 3], spacing: [f32; 3], values: &[f64]) -> Vec<u8> {
    gzip(&HeaderSpec::new(dims, 16, 32, spacing).file(values))
}
