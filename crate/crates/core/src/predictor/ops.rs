//! Layer kernels with hand-written backward passes.
//!
//! Feature maps are `channels × height × width`, channel-major, one sample
//! at a time. Convolutions are 3×3 with zero padding 1, lowered to GEMM
//! through an im2col buffer that the backward pass reuses.

/// `c = a · b + beta · c` where `a` is `m × k`, `b` is `k × n`, and the
/// transposition flags say whether each operand is stored transposed
/// (row-major in both cases).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_t: bool,
    b: &[f32],
    b_t: bool,
    beta: f32,
    c: &mut [f32],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices hold exactly m*k, k*n and m*n elements (checked
    // above in debug builds, guaranteed by every caller), and the strides
    // describe row-major storage of those shapes.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Feature {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Feature {
    pub fn new(c: usize, h: usize, w: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), c * h * w);
        Feature { c, h, w, data }
    }

    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Feature::new(c, h, w, vec![0.0; c * h * w])
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }
}

fn im2col(x: &Feature) -> Vec<f32> {
    let (h, w) = (x.h, x.w);
    let hw = h * w;
    let mut cols = vec![0.0f32; x.c * 9 * hw];
    for ci in 0..x.c {
        let src = &x.data[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y + ky;
                    if sy < 1 || sy > h {
                        continue;
                    }
                    let src_row = &src[(sy - 1) * w..sy * w];
                    let dst = &mut row[y * w..(y + 1) * w];
                    match kx {
                        0 => dst[1..].copy_from_slice(&src_row[..w - 1]),
                        1 => dst.copy_from_slice(src_row),
                        _ => dst[..w - 1].copy_from_slice(&src_row[1..]),
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f32], c: usize, h: usize, w: usize) -> Feature {
    let hw = h * w;
    let mut out = Feature::zeros(c, h, w);
    for ci in 0..c {
        let dst = &mut out.data[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y + ky;
                    if sy < 1 || sy > h {
                        continue;
                    }
                    let dst_row = &mut dst[(sy - 1) * w..sy * w];
                    let src = &row[y * w..(y + 1) * w];
                    match kx {
                        0 => dst_row[..w - 1]
                            .iter_mut()
                            .zip(&src[1..])
                            .for_each(|(d, s)| *d += s),
                        1 => dst_row.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                        _ => dst_row[1..]
                            .iter_mut()
                            .zip(&src[..w - 1])
                            .for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
    out
}

/// 3×3 convolution. `weight` is `[out, in, 3, 3]`. Returns the output and
/// the im2col buffer needed by [`conv3x3_backward`].
pub(crate) fn conv3x3(x: &Feature, weight: &[f32], bias: &[f32], out_c: usize) -> (Feature, Vec<f32>) {
    let hw = x.plane();
    let cols = im2col(x);
    let mut out = vec![0.0f32; out_c * hw];
    for (o, chunk) in out.chunks_exact_mut(hw).enumerate() {
        chunk.fill(bias[o]);
    }
    gemm(out_c, x.c * 9, hw, weight, false, &cols, false, 1.0, &mut out);
    (Feature::new(out_c, x.h, x.w, out), cols)
}

/// Accumulates weight and bias gradients and returns the input gradient.
pub(crate) fn conv3x3_backward(
    dy: &Feature,
    cols: &[f32],
    weight: &[f32],
    in_c: usize,
    dweight: &mut [f32],
    dbias: &mut [f32],
) -> Feature {
    let hw = dy.plane();
    let k = in_c * 9;
    for (o, chunk) in dy.data.chunks_exact(hw).enumerate() {
        dbias[o] += chunk.iter().sum::<f32>();
    }
    gemm(dy.c, hw, k, &dy.data, false, cols, true, 1.0, dweight);
    let mut dcols = vec![0.0f32; k * hw];
    gemm(k, dy.c, hw, weight, true, &dy.data, false, 0.0, &mut dcols);
    col2im(&dcols, in_c, dy.h, dy.w)
}

pub(crate) const NORM_EPS: f32 = 1e-5;

/// Largest group count not above 8 that divides `channels`.
pub(crate) fn norm_groups(channels: usize) -> usize {
    (1..=8.min(channels)).rev().find(|g| channels % g == 0).unwrap_or(1)
}

pub(crate) struct NormCache {
    pub xhat: Vec<f32>,
    pub inv_std: Vec<f32>,
}

pub(crate) fn group_norm(x: &Feature, groups: usize, gain: &[f32], shift: &[f32]) -> (Feature, NormCache) {
    let per_group = x.c / groups * x.plane();
    let hw = x.plane();
    let mut xhat = vec![0.0f32; x.data.len()];
    let mut inv_std = Vec::with_capacity(groups);
    for g in 0..groups {
        let src = &x.data[g * per_group..(g + 1) * per_group];
        let n = per_group as f64;
        let mean = src.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let var = src.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + f64::from(NORM_EPS)).sqrt();
        for (d, &v) in xhat[g * per_group..(g + 1) * per_group].iter_mut().zip(src) {
            *d = ((f64::from(v) - mean) * inv) as f32;
        }
        inv_std.push(inv as f32);
    }
    let mut out = vec![0.0f32; x.data.len()];
    for ch in 0..x.c {
        let (a, b) = (gain[ch], shift[ch]);
        for (o, &v) in out[ch * hw..(ch + 1) * hw].iter_mut().zip(&xhat[ch * hw..(ch + 1) * hw]) {
            *o = a * v + b;
        }
    }
    (Feature::new(x.c, x.h, x.w, out), NormCache { xhat, inv_std })
}

pub(crate) fn group_norm_backward(
    dy: &Feature,
    cache: &NormCache,
    gain: &[f32],
    dgain: &mut [f32],
    dshift: &mut [f32],
) -> Feature {
    let hw = dy.plane();
    let groups = cache.inv_std.len();
    let per_group = dy.c / groups * hw;
    let mut dxhat = vec![0.0f32; dy.data.len()];
    for ch in 0..dy.c {
        let range = ch * hw..(ch + 1) * hw;
        let (mut sg, mut ss) = (0.0f64, 0.0f64);
        for ((d, &g), &xh) in dxhat[range.clone()]
            .iter_mut()
            .zip(&dy.data[range.clone()])
            .zip(&cache.xhat[range])
        {
            sg += f64::from(g) * f64::from(xh);
            ss += f64::from(g);
            *d = g * gain[ch];
        }
        dgain[ch] += sg as f32;
        dshift[ch] += ss as f32;
    }
    let mut dx = vec![0.0f32; dy.data.len()];
    let n = per_group as f64;
    for g in 0..groups {
        let range = g * per_group..(g + 1) * per_group;
        let (mut sum, mut dot) = (0.0f64, 0.0f64);
        for (&d, &xh) in dxhat[range.clone()].iter().zip(&cache.xhat[range.clone()]) {
            sum += f64::from(d);
            dot += f64::from(d) * f64::from(xh);
        }
        let inv = f64::from(cache.inv_std[g]);
        let (mean_d, mean_dot) = (sum / n, dot / n);
        for ((o, &d), &xh) in dx[range.clone()]
            .iter_mut()
            .zip(&dxhat[range.clone()])
            .zip(&cache.xhat[range])
        {
            *o = (inv * (f64::from(d) - mean_d - f64::from(xh) * mean_dot)) as f32;
        }
    }
    Feature::new(dy.c, dy.h, dy.w, dx)
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn silu(x: &[f32]) -> Vec<f32> {
    x.iter().map(|&v| v * sigmoid(v)).collect()
}

/// Multiplies `dy` in place by the SiLU derivative at the pre-activation `x`.
pub(crate) fn silu_backward(x: &[f32], dy: &mut [f32]) {
    for (d, &v) in dy.iter_mut().zip(x) {
        let s = sigmoid(v);
        *d *= s * (1.0 + v * (1.0 - s));
    }
}

pub(crate) fn avg_pool2(x: &Feature) -> Feature {
    let (h, w) = (x.h / 2, x.w / 2);
    let mut out = Feature::zeros(x.c, h, w);
    for ch in 0..x.c {
        let src = &x.data[ch * x.plane()..(ch + 1) * x.plane()];
        let dst = &mut out.data[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                let (r0, r1) = (2 * y * x.w, (2 * y + 1) * x.w);
                dst[y * w + xx] =
                    0.25 * (src[r0 + 2 * xx] + src[r0 + 2 * xx + 1] + src[r1 + 2 * xx] + src[r1 + 2 * xx + 1]);
            }
        }
    }
    out
}

pub(crate) fn avg_pool2_backward(dy: &Feature) -> Feature {
    let (h, w) = (dy.h * 2, dy.w * 2);
    let mut out = Feature::zeros(dy.c, h, w);
    for ch in 0..dy.c {
        let src = &dy.data[ch * dy.plane()..(ch + 1) * dy.plane()];
        let dst = &mut out.data[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = 0.25 * src[(y / 2) * dy.w + x / 2];
            }
        }
    }
    out
}

pub(crate) fn upsample2(x: &Feature) -> Feature {
    let (h, w) = (x.h * 2, x.w * 2);
    let mut out = Feature::zeros(x.c, h, w);
    for ch in 0..x.c {
        let src = &x.data[ch * x.plane()..(ch + 1) * x.plane()];
        let dst = &mut out.data[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                dst[y * w + xx] = src[(y / 2) * x.w + xx / 2];
            }
        }
    }
    out
}

pub(crate) fn upsample2_backward(dy: &Feature) -> Feature {
    let (h, w) = (dy.h / 2, dy.w / 2);
    let mut out = Feature::zeros(dy.c, h, w);
    for ch in 0..dy.c {
        let src = &dy.data[ch * dy.plane()..(ch + 1) * dy.plane()];
        let dst = &mut out.data[ch * h * w..(ch + 1) * h * w];
        for y in 0..dy.h {
            for x in 0..dy.w {
                dst[(y / 2) * w + x / 2] += src[y * dy.w + x];
            }
        }
    }
    out
}

/// Channel concatenation `[a; b]`.
pub(crate) fn concat(a: &Feature, b: &Feature) -> Feature {
    debug_assert_eq!((a.h, a.w), (b.h, b.w));
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Feature::new(a.c + b.c, a.h, a.w, data)
}

pub(crate) fn split(x: Feature, first: usize) -> (Feature, Feature) {
    let at = first * x.plane();
    let second = Feature::new(x.c - first, x.h, x.w, x.data[at..].to_vec());
    let mut head = x.data;
    head.truncate(at);
    (Feature::new(first, second.h, second.w, head), second)
}

/// `y = W x + b` for `W` of shape `[out, in]`.
pub(crate) fn linear(x: &[f32], weight: &[f32], bias: &[f32]) -> Vec<f32> {
    let inp = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| b + weight[o * inp..(o + 1) * inp].iter().zip(x).map(|(w, v)| w * v).sum::<f32>())
        .collect()
}

/// Accumulates parameter gradients; adds the input gradient into `dx`.
pub(crate) fn linear_backward(
    x: &[f32],
    dy: &[f32],
    weight: &[f32],
    dweight: &mut [f32],
    dbias: &mut [f32],
    dx: &mut [f32],
) {
    let inp = x.len();
    for (o, &g) in dy.iter().enumerate() {
        dbias[o] += g;
        let row = &weight[o * inp..(o + 1) * inp];
        let drow = &mut dweight[o * inp..(o + 1) * inp];
        for i in 0..inp {
            drow[i] += g * x[i];
            dx[i] += g * row[i];
        }
    }
}
