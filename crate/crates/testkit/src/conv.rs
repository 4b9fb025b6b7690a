//! Seven-loop convolutions and finite differences.

/// Cross-correlation. `x` is `[n, ci, d, h, w]`, `weight` is
/// `[co, ci, kd, kh, kw]`. Returns the output and its shape.
pub fn conv3d(
    x: &[f64],
    xs: [usize; 5],
    weight: &[f64],
    ws: [usize; 5],
    bias: &[f64],
    stride: [usize; 3],
    padding: [usize; 3],
) -> (Vec<f64>, [usize; 5]) {
    let [n, ci, d, h, w] = xs;
    let [co, wci, kd, kh, kw] = ws;
    assert_eq!(ci, wci);
    let od = (d + 2 * padding[0] - kd) / stride[0] + 1;
    let oh = (h + 2 * padding[1] - kh) / stride[1] + 1;
    let ow = (w + 2 * padding[2] - kw) / stride[2] + 1;
    let mut out = vec![0.0; n * co * od * oh * ow];
    for b in 0..n {
        for o in 0..co {
            for z in 0..od {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut acc = bias[o];
                        for c in 0..ci {
                            for a in 0..kd {
                                for bb in 0..kh {
                                    for e in 0..kw {
                                        let iz = (z * stride[0] + a) as i64 - padding[0] as i64;
                                        let iy = (y * stride[1] + bb) as i64 - padding[1] as i64;
                                        let ix = (xx * stride[2] + e) as i64 - padding[2] as i64;
                                        if iz < 0 || iy < 0 || ix < 0 || iz >= d as i64 || iy >= h as i64 || ix >= w as i64 {
                                            continue;
                                        }
                                        let xi = (((b * ci + c) * d + iz as usize) * h + iy as usize) * w + ix as usize;
                                        let wi = (((o * ci + c) * kd + a) * kh + bb) * kw + e;
                                        acc += x[xi] * weight[wi];
                                    }
                                }
                            }
                        }
                        out[(((b * co + o) * od + z) * oh + y) * ow + xx] = acc;
                    }
                }
            }
        }
    }
    (out, [n, co, od, oh, ow])
}

/// Transposed convolution by scattering. `weight` is `[ci, co, kd, kh, kw]`;
/// the output extent is `(in - 1) * stride - 2 * padding + k` per axis.
pub fn conv_transpose3d(
    x: &[f64],
    xs: [usize; 5],
    weight: &[f64],
    ws: [usize; 5],
    bias: &[f64],
    stride: [usize; 3],
    padding: [usize; 3],
) -> (Vec<f64>, [usize; 5]) {
    let [n, ci, d, h, w] = xs;
    let [wci, co, kd, kh, kw] = ws;
    assert_eq!(ci, wci);
    let od = (d - 1) * stride[0] + kd - 2 * padding[0];
    let oh = (h - 1) * stride[1] + kh - 2 * padding[1];
    let ow = (w - 1) * stride[2] + kw - 2 * padding[2];
    let mut out = vec![0.0; n * co * od * oh * ow];
    for b in 0..n {
        for o in 0..co {
            for v in 0..od * oh * ow {
                out[(b * co + o) * od * oh * ow + v] = bias[o];
            }
        }
        for c in 0..ci {
            for z in 0..d {
                for y in 0..h {
                    for xx in 0..w {
                        let xv = x[(((b * ci + c) * d + z) * h + y) * w + xx];
                        for o in 0..co {
                            for a in 0..kd {
                                for bb in 0..kh {
                                    for e in 0..kw {
                                        let oz = (z * stride[0] + a) as i64 - padding[0] as i64;
                                        let oy = (y * stride[1] + bb) as i64 - padding[1] as i64;
                                        let ox = (xx * stride[2] + e) as i64 - padding[2] as i64;
                                        if oz < 0 || oy < 0 || ox < 0 || oz >= od as i64 || oy >= oh as i64 || ox >= ow as i64 {
                                            continue;
                                        }
                                        let oi = (((b * co + o) * od + oz as usize) * oh + oy as usize) * ow + ox as usize;
                                        out[oi] += xv * weight[(((c * co + o) * kd + a) * kh + bb) * kw + e];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (out, [n, co, od, oh, ow])
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
