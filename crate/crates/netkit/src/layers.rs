//! Layer primitives. Convolutions are cross-correlations (no kernel flip)
//! with zero padding.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gemm::{gemm, Layout};
use crate::tensor::Tensor5;

/// Target number of im2col columns per GEMM call.
const CHUNK_COLUMNS: usize = 8192;

pub const INSTANCE_NORM_EPS: f64 = 1e-5;

fn check_triplet(name: &str, v: [usize; 3]) -> Result<()> {
    if v.contains(&0) {
        return Err(Error::InvalidLayer(format!("{name} {v:?} has a zero component")));
    }
    Ok(())
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
fn uniform_init(rng: &mut impl Rng, len: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
    /// `[out, in, kd, kh, kw]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv3d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        padding: [usize; 3],
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        check_triplet("kernel", kernel)?;
        check_triplet("stride", stride)?;
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidLayer("zero channels".into()));
        }
        let expected = out_channels * in_channels * kernel.iter().product::<usize>();
        if weight.len() != expected || bias.len() != out_channels {
            return Err(Error::InvalidLayer(format!(
                "conv weight/bias sizes {}/{} (expected {expected}/{out_channels})",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight,
            bias,
        })
    }

    /// Seeded uniform initialization scaled by fan-in.
    pub fn init(
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        padding: [usize; 3],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let fan_in = in_channels * kernel.iter().product::<usize>();
        let weight = uniform_init(rng, out_channels * fan_in, fan_in);
        let bias = uniform_init(rng, out_channels, fan_in);
        Self::new(in_channels, out_channels, kernel, stride, padding, weight, bias)
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn output_spatial(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        let padded: [usize; 3] = std::array::from_fn(|a| input[a] + 2 * self.padding[a]);
        if (0..3).any(|a| padded[a] < self.kernel[a]) {
            return Err(Error::KernelTooLarge {
                kernel: self.kernel,
                padded,
            });
        }
        Ok(std::array::from_fn(|a| (padded[a] - self.kernel[a]) / self.stride[a] + 1))
    }

    pub fn forward(&self, input: &Tensor5) -> Result<Tensor5> {
        if input.channels() != self.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels,
                found: input.channels(),
            });
        }
        let [n, ci, d, h, w] = input.shape();
        let [od, oh, ow] = self.output_spatial([d, h, w])?;
        let co = self.out_channels;
        let [kd, kh, kw] = self.kernel;
        let rows = ci * kd * kh * kw;
        let plane = oh * ow;
        let out_len = od * plane;
        let chunk = (CHUNK_COLUMNS / plane).clamp(1, od);

        let mut out = vec![0.0; n * co * out_len];
        for (o, block) in out.chunks_mut(out_len).enumerate() {
            block.fill(self.bias[o % co]);
        }
        let mut cols = vec![0.0; rows * chunk * plane];
        let [sd, sh, sw] = self.stride;
        let [pd, ph, pw] = self.padding.map(|p| p as isize);

        for b in 0..n {
            let x = input.sample(b);
            for z0 in (0..od).step_by(chunk) {
                let z1 = (z0 + chunk).min(od);
                let ncols = (z1 - z0) * plane;
                for c in 0..ci {
                    let xc = &x[c * d * h * w..(c + 1) * d * h * w];
                    for a in 0..kd {
                        for bb in 0..kh {
                            for e in 0..kw {
                                let row = ((c * kd + a) * kh + bb) * kw + e;
                                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                                let mut t = 0;
                                for z in z0..z1 {
                                    let iz = (z * sd + a) as isize - pd;
                                    for y in 0..oh {
                                        let iy = (y * sh + bb) as isize - ph;
                                        let inside_zy = iz >= 0 && iz < d as isize && iy >= 0 && iy < h as isize;
                                        for xx in 0..ow {
                                            let ix = (xx * sw + e) as isize - pw;
                                            dst[t] = if inside_zy && ix >= 0 && ix < w as isize {
                                                xc[(iz as usize * h + iy as usize) * w + ix as usize]
                                            } else {
                                                0.0
                                            };
                                            t += 1;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                let c_start = b * co * out_len + z0 * plane;
                gemm(
                    &self.weight,
                    Layout::row_major(co, rows),
                    &cols,
                    Layout::row_major(rows, ncols),
                    1.0,
                    &mut out[c_start..],
                    Layout {
                        rows: co,
                        cols: ncols,
                        row_stride: out_len,
                        col_stride: 1,
                    },
                );
            }
        }
        Ok(Tensor5::from_parts([n, co, od, oh, ow], out))
    }
}

/// Transposed convolution, the adjoint of [`Conv3d`] with the same
/// hyper-parameters (bias aside).
#[derive(Debug, Clone, PartialEq)]
pub struct TransposedConv3d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
    /// `[in, out, kd, kh, kw]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl TransposedConv3d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        padding: [usize; 3],
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        check_triplet("kernel", kernel)?;
        check_triplet("stride", stride)?;
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidLayer("zero channels".into()));
        }
        let expected = in_channels * out_channels * kernel.iter().product::<usize>();
        if weight.len() != expected || bias.len() != out_channels {
            return Err(Error::InvalidLayer(format!(
                "transposed conv weight/bias sizes {}/{} (expected {expected}/{out_channels})",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight,
            bias,
        })
    }

    /// Fan-in is taken as `in_channels × kernel volume`, as for [`Conv3d`].
    pub fn init(
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        padding: [usize; 3],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let fan_in = in_channels * kernel.iter().product::<usize>();
        let weight = uniform_init(rng, out_channels * fan_in, fan_in);
        let bias = uniform_init(rng, out_channels, fan_in);
        Self::new(in_channels, out_channels, kernel, stride, padding, weight, bias)
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn output_spatial(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        let full: [usize; 3] = std::array::from_fn(|a| (input[a] - 1) * self.stride[a] + self.kernel[a]);
        if (0..3).any(|a| full[a] <= 2 * self.padding[a]) {
            return Err(Error::ShapeMismatch(format!(
                "padding {:?} leaves no output for input {input:?}",
                self.padding
            )));
        }
        Ok(std::array::from_fn(|a| full[a] - 2 * self.padding[a]))
    }

    pub fn forward(&self, input: &Tensor5) -> Result<Tensor5> {
        if input.channels() != self.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels,
                found: input.channels(),
            });
        }
        let [n, ci, d, h, w] = input.shape();
        let [od, oh, ow] = self.output_spatial([d, h, w])?;
        let co = self.out_channels;
        let [kd, kh, kw] = self.kernel;
        let rows = co * kd * kh * kw;
        let in_plane = h * w;
        let in_len = d * in_plane;
        let out_len = od * oh * ow;
        let chunk = (CHUNK_COLUMNS / in_plane).clamp(1, d);

        let mut out = vec![0.0; n * co * out_len];
        for (o, block) in out.chunks_mut(out_len).enumerate() {
            block.fill(self.bias[o % co]);
        }
        let mut cols = vec![0.0; rows * chunk * in_plane];
        let [sd, sh, sw] = self.stride;
        let [pd, ph, pw] = self.padding.map(|p| p as isize);
        // weight viewed as [in, out·k³]; its transpose maps channels to columns
        let w_layout = Layout::row_major(ci, rows).transposed();

        for b in 0..n {
            let x = input.sample(b);
            let y_out = &mut out[b * co * out_len..(b + 1) * co * out_len];
            for z0 in (0..d).step_by(chunk) {
                let z1 = (z0 + chunk).min(d);
                let ncols = (z1 - z0) * in_plane;
                gemm(
                    &self.weight,
                    w_layout,
                    &x[z0 * in_plane..],
                    Layout {
                        rows: ci,
                        cols: ncols,
                        row_stride: in_len,
                        col_stride: 1,
                    },
                    0.0,
                    &mut cols,
                    Layout::row_major(rows, ncols),
                );
                for o in 0..co {
                    let yo = &mut y_out[o * out_len..(o + 1) * out_len];
                    for a in 0..kd {
                        for bb in 0..kh {
                            for e in 0..kw {
                                let row = ((o * kd + a) * kh + bb) * kw + e;
                                let src = &cols[row * ncols..(row + 1) * ncols];
                                let mut t = 0;
                                for z in z0..z1 {
                                    let oz = (z * sd + a) as isize - pd;
                                    for y in 0..h {
                                        let oy = (y * sh + bb) as isize - ph;
                                        let inside_zy = oz >= 0 && oz < od as isize && oy >= 0 && oy < oh as isize;
                                        for xx in 0..w {
                                            let ox = (xx * sw + e) as isize - pw;
                                            if inside_zy && ox >= 0 && ox < ow as isize {
                                                yo[(oz as usize * oh + oy as usize) * ow + ox as usize] += src[t];
                                            }
                                            t += 1;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(Tensor5::from_parts([n, co, od, oh, ow], out))
    }
}

/// Convolves `input` with `layer`.
pub fn conv3d_forward(input: &Tensor5, layer: &Conv3d) -> Result<Tensor5> {
    layer.forward(input)
}

pub fn transposed_conv3d_forward(input: &Tensor5, layer: &TransposedConv3d) -> Result<Tensor5> {
    layer.forward(input)
}

fn require_even(input: &Tensor5) -> Result<()> {
    let dims = input.spatial();
    if dims.iter().any(|d| d % 2 != 0) {
        return Err(Error::Indivisible { dims, factor: 2 });
    }
    Ok(())
}

/// 2×2×2 max pooling with stride 2.
pub fn max_pool2(input: &Tensor5) -> Result<Tensor5> {
    require_even(input)?;
    let [n, c, d, h, w] = input.shape();
    let shape = [n, c, d / 2, h / 2, w / 2];
    let mut out = Vec::with_capacity(shape.iter().product());
    for b in 0..n {
        for ch in 0..c {
            let x = input.channel(b, ch);
            for z in 0..d / 2 {
                for y in 0..h / 2 {
                    for xx in 0..w / 2 {
                        let mut m = f64::NEG_INFINITY;
                        for (a, bb, e) in CUBE {
                            m = m.max(x[((2 * z + a) * h + 2 * y + bb) * w + 2 * xx + e]);
                        }
                        out.push(m);
                    }
                }
            }
        }
    }
    Ok(Tensor5::from_parts(shape, out))
}

const CUBE: [(usize, usize, usize); 8] = [
    (0, 0, 0),
    (0, 0, 1),
    (0, 1, 0),
    (0, 1, 1),
    (1, 0, 0),
    (1, 0, 1),
    (1, 1, 0),
    (1, 1, 1),
];

/// Nearest-neighbor upsampling by 2 along each spatial axis.
pub fn upsample2(input: &Tensor5) -> Tensor5 {
    let [n, c, d, h, w] = input.shape();
    let shape = [n, c, 2 * d, 2 * h, 2 * w];
    let mut out = Vec::with_capacity(shape.iter().product());
    for b in 0..n {
        for ch in 0..c {
            let x = input.channel(b, ch);
            for z in 0..2 * d {
                for y in 0..2 * h {
                    for xx in 0..2 * w {
                        out.push(x[((z / 2) * h + y / 2) * w + xx / 2]);
                    }
                }
            }
        }
    }
    Tensor5::from_parts(shape, out)
}

pub fn relu(input: &Tensor5) -> Tensor5 {
    Tensor5::from_parts(input.shape(), input.data().iter().map(|&v| v.max(0.0)).collect())
}

/// Parametric rectifier with one learned slope per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PRelu {
    pub slopes: Vec<f64>,
}

impl PRelu {
    pub const INITIAL_SLOPE: f64 = 0.25;

    pub fn new(channels: usize) -> Self {
        Self {
            slopes: vec![Self::INITIAL_SLOPE; channels],
        }
    }

    pub fn forward(&self, input: &Tensor5) -> Result<Tensor5> {
        if input.channels() != self.slopes.len() {
            return Err(Error::ChannelMismatch {
                expected: self.slopes.len(),
                found: input.channels(),
            });
        }
        let c = input.channels();
        let plane = input.spatial_len();
        let data = input
            .data()
            .chunks(plane)
            .enumerate()
            .flat_map(|(i, block)| {
                let a = self.slopes[i % c];
                block.iter().map(move |&v| if v >= 0.0 { v } else { a * v })
            })
            .collect();
        Ok(Tensor5::from_parts(input.shape(), data))
    }
}

/// Per-sample, per-channel standardization without affine parameters.
pub fn instance_norm(input: &Tensor5, eps: f64) -> Tensor5 {
    let plane = input.spatial_len();
    let mut out = input.clone();
    for block in out.data_mut().chunks_mut(plane) {
        let mean = block.iter().sum::<f64>() / plane as f64;
        let var = block.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / plane as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for v in block.iter_mut() {
            *v = (*v - mean) * inv;
        }
    }
    out
}

pub fn add(a: &Tensor5, b: &Tensor5) -> Result<Tensor5> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("add {:?} + {:?}", a.shape(), b.shape())));
    }
    Ok(Tensor5::from_parts(
        a.shape(),
        a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
    ))
}

/// Channel concatenation `[first, second]`.
pub fn concat_channels(first: &Tensor5, second: &Tensor5) -> Result<Tensor5> {
    let (sa, sb) = (first.shape(), second.shape());
    if sa[0] != sb[0] || sa[2..] != sb[2..] {
        return Err(Error::ShapeMismatch(format!("concat {sa:?} with {sb:?}")));
    }
    let mut data = Vec::with_capacity(first.data().len() + second.data().len());
    for b in 0..sa[0] {
        data.extend_from_slice(first.sample(b));
        data.extend_from_slice(second.sample(b));
    }
    Ok(Tensor5::from_parts([sa[0], sa[1] + sb[1], sa[2], sa[3], sa[4]], data))
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Gate on a skip connection. The skip features `x` are looked at through a
/// 1×1×1 and a 3×3×3 projection, combined with a 1×1×1 projection of the
/// decoder features `g`, and squashed to one coefficient per voxel:
///
/// `α = σ(ψ · relu(W1 x + W3 x + Wg g))`, output `g + α ⊙ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGate {
    pub channels: usize,
    pub skip_point: Conv3d,
    pub skip_context: Conv3d,
    pub gating: Conv3d,
    pub psi: Conv3d,
}

impl AttentionGate {
    pub fn init(channels: usize, rng: &mut impl Rng) -> Result<Self> {
        let inner = (channels / 2).max(1);
        Ok(Self {
            channels,
            skip_point: Conv3d::init(channels, inner, [1; 3], [1; 3], [0; 3], rng)?,
            skip_context: Conv3d::init(channels, inner, [3; 3], [1; 3], [1; 3], rng)?,
            gating: Conv3d::init(channels, inner, [1; 3], [1; 3], [0; 3], rng)?,
            psi: Conv3d::init(inner, 1, [1; 3], [1; 3], [0; 3], rng)?,
        })
    }

    pub fn param_count(&self) -> usize {
        self.skip_point.param_count()
            + self.skip_context.param_count()
            + self.gating.param_count()
            + self.psi.param_count()
    }

    /// Per-voxel coefficients in [0, 1], shape `(batch, 1, d, h, w)`.
    pub fn coefficients(&self, skip: &Tensor5, gate: &Tensor5) -> Result<Tensor5> {
        if skip.shape() != gate.shape() {
            return Err(Error::ShapeMismatch(format!(
                "attention gate skip {:?} vs gating {:?}",
                skip.shape(),
                gate.shape()
            )));
        }
        let a = self.skip_point.forward(skip)?;
        let b = self.skip_context.forward(skip)?;
        let c = self.gating.forward(gate)?;
        let inner = relu(&add(&add(&a, &b)?, &c)?);
        let logits = self.psi.forward(&inner)?;
        Ok(Tensor5::from_parts(
            logits.shape(),
            logits.data().iter().map(|&v| sigmoid(v)).collect(),
        ))
    }

    pub fn forward(&self, skip: &Tensor5, gate: &Tensor5) -> Result<Tensor5> {
        let alpha = self.coefficients(skip, gate)?;
        let plane = skip.spatial_len();
        let mut out = gate.clone();
        let c = skip.channels();
        for (i, block) in out.data_mut().chunks_mut(plane).enumerate() {
            let b = i / c;
            let x = skip.channel(b, i % c);
            let al = alpha.channel(b, 0);
            for ((o, &xv), &av) in block.iter_mut().zip(x).zip(al) {
                *o += av * xv;
            }
        }
        Ok(out)
    }

    /// Zero ψ weights and a large ψ bias: every coefficient evaluates to
    /// exactly 1.0, so the gate reduces to an additive skip.
    pub fn force_open(&mut self) {
        self.psi.weight.fill(0.0);
        self.psi.bias.fill(40.0);
    }
}
