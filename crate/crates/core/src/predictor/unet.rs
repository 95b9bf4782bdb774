use super::ops::{self, Feature, NormCache};
use super::{time_embedding, Init, NoisePredictor, Parameter, PredictorConfig};
use crate::error::Result;
use crate::hypercube::HsiCube;

/// Per-tensor gradients, index-aligned with [`NoisePredictor::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f32>>);

impl Gradients {
    pub(crate) fn zeros_like(params: &[Parameter]) -> Self {
        Gradients(params.iter().map(|p| vec![0.0; p.values.len()]).collect())
    }

    /// Element-wise `self += other`.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn tensors(&self) -> &[Vec<f32>] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy)]
struct LinearIdx {
    weight: usize,
    bias: usize,
}

#[derive(Debug, Clone, Copy)]
struct ConvIdx {
    weight: usize,
    bias: usize,
    in_c: usize,
    out_c: usize,
}

#[derive(Debug, Clone, Copy)]
struct NormIdx {
    gain: usize,
    shift: usize,
    groups: usize,
}

#[derive(Debug, Clone, Copy)]
struct BlockIdx {
    conv1: ConvIdx,
    norm1: NormIdx,
    time: LinearIdx,
    conv2: ConvIdx,
    norm2: NormIdx,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    time1: LinearIdx,
    time2: LinearIdx,
    down: Vec<BlockIdx>,
    up: Vec<BlockIdx>,
    out: ConvIdx,
}

type Alloc<'a> = dyn FnMut(&str, &[usize], Init) -> usize + 'a;

fn fan_in_bound(fan_in: usize) -> Init {
    Init::Uniform((3.0 / fan_in as f32).sqrt())
}

fn linear(alloc: &mut Alloc, name: &str, inp: usize, out: usize) -> LinearIdx {
    LinearIdx {
        weight: alloc(&format!("{name}.weight"), &[out, inp], fan_in_bound(inp)),
        bias: alloc(&format!("{name}.bias"), &[out], Init::Zero),
    }
}

fn conv(alloc: &mut Alloc, name: &str, in_c: usize, out_c: usize, zero: bool) -> ConvIdx {
    let init = if zero { Init::Zero } else { fan_in_bound(in_c * 9) };
    ConvIdx {
        weight: alloc(&format!("{name}.weight"), &[out_c, in_c, 3, 3], init),
        bias: alloc(&format!("{name}.bias"), &[out_c], Init::Zero),
        in_c,
        out_c,
    }
}

fn norm(alloc: &mut Alloc, name: &str, c: usize) -> NormIdx {
    NormIdx {
        gain: alloc(&format!("{name}.gain"), &[c], Init::One),
        shift: alloc(&format!("{name}.shift"), &[c], Init::Zero),
        groups: ops::norm_groups(c),
    }
}

fn block(alloc: &mut Alloc, name: &str, in_c: usize, out_c: usize, embed: usize) -> BlockIdx {
    BlockIdx {
        conv1: conv(alloc, &format!("{name}.conv1"), in_c, out_c, false),
        norm1: norm(alloc, &format!("{name}.norm1"), out_c),
        time: linear(alloc, &format!("{name}.time"), embed, out_c),
        conv2: conv(alloc, &format!("{name}.conv2"), out_c, out_c, false),
        norm2: norm(alloc, &format!("{name}.norm2"), out_c),
    }
}

impl Layout {
    /// Declares every parameter in a fixed order through `alloc`.
    pub(super) fn build(cfg: &PredictorConfig, alloc: &mut Alloc) -> Layout {
        let e = cfg.time_embed_dim;
        let time1 = linear(alloc, "time.fc1", e, e);
        let time2 = linear(alloc, "time.fc2", e, e);
        let mut down = vec![block(alloc, "down0", cfg.bands, cfg.width(0), e)];
        for l in 1..=cfg.depth {
            down.push(block(alloc, &format!("down{l}"), cfg.width(l - 1), cfg.width(l), e));
        }
        let mut up = Vec::with_capacity(cfg.depth);
        for l in 0..cfg.depth {
            up.push(block(
                alloc,
                &format!("up{l}"),
                cfg.width(l + 1) + cfg.width(l),
                cfg.width(l),
                e,
            ));
        }
        let out = conv(alloc, "out", cfg.width(0), cfg.bands, true);
        Layout {
            time1,
            time2,
            down,
            up,
            out,
        }
    }
}

struct BlockTrace {
    cols1: Vec<f32>,
    norm1: NormCache,
    pre1: Vec<f32>,
    cols2: Vec<f32>,
    norm2: NormCache,
    pre2: Vec<f32>,
    shape: (usize, usize),
}

pub(crate) struct Trace {
    embedding: Vec<f32>,
    hidden_pre: Vec<f32>,
    hidden: Vec<f32>,
    temb_pre: Vec<f32>,
    temb: Vec<f32>,
    down: Vec<BlockTrace>,
    up: Vec<BlockTrace>,
    out_cols: Vec<f32>,
}

fn p<'a>(net: &'a NoisePredictor, idx: usize) -> &'a [f32] {
    &net.params[idx].values
}

fn block_forward(
    net: &NoisePredictor,
    b: &BlockIdx,
    x: &Feature,
    temb: &[f32],
) -> (Feature, BlockTrace) {
    let (a1, cols1) = ops::conv3x3(x, p(net, b.conv1.weight), p(net, b.conv1.bias), b.conv1.out_c);
    let (n1, norm1) = ops::group_norm(&a1, b.norm1.groups, p(net, b.norm1.gain), p(net, b.norm1.shift));
    let mut h = ops::silu(&n1.data);
    let bias = ops::linear(temb, p(net, b.time.weight), p(net, b.time.bias));
    let hw = n1.plane();
    for (ch, chunk) in h.chunks_exact_mut(hw).enumerate() {
        chunk.iter_mut().for_each(|v| *v += bias[ch]);
    }
    let h = Feature::new(n1.c, n1.h, n1.w, h);
    let (a2, cols2) = ops::conv3x3(&h, p(net, b.conv2.weight), p(net, b.conv2.bias), b.conv2.out_c);
    let (n2, norm2) = ops::group_norm(&a2, b.norm2.groups, p(net, b.norm2.gain), p(net, b.norm2.shift));
    let out = Feature::new(n2.c, n2.h, n2.w, ops::silu(&n2.data));
    let trace = BlockTrace {
        cols1,
        norm1,
        pre1: n1.data,
        cols2,
        norm2,
        pre2: n2.data,
        shape: (x.h, x.w),
    };
    (out, trace)
}

fn block_backward(
    net: &NoisePredictor,
    b: &BlockIdx,
    trace: BlockTrace,
    mut dout: Feature,
    temb: &[f32],
    dtemb: &mut [f32],
    g: &mut Gradients,
) -> Feature {
    let (h, w) = trace.shape;
    ops::silu_backward(&trace.pre2, &mut dout.data);
    let da2 = {
        let (gain, shift) = two_mut(&mut g.0, b.norm2.gain, b.norm2.shift);
        ops::group_norm_backward(&dout, &trace.norm2, p(net, b.norm2.gain), gain, shift)
    };
    let mut dh = {
        let (dw, db) = two_mut(&mut g.0, b.conv2.weight, b.conv2.bias);
        ops::conv3x3_backward(&da2, &trace.cols2, p(net, b.conv2.weight), b.conv2.in_c, dw, db)
    };
    let hw = h * w;
    let dbias: Vec<f32> = dh.data.chunks_exact(hw).map(|c| c.iter().sum()).collect();
    {
        let (dw, db) = two_mut(&mut g.0, b.time.weight, b.time.bias);
        ops::linear_backward(temb, &dbias, p(net, b.time.weight), dw, db, dtemb);
    }
    ops::silu_backward(&trace.pre1, &mut dh.data);
    let da1 = {
        let (gain, shift) = two_mut(&mut g.0, b.norm1.gain, b.norm1.shift);
        ops::group_norm_backward(&dh, &trace.norm1, p(net, b.norm1.gain), gain, shift)
    };
    let (dw, db) = two_mut(&mut g.0, b.conv1.weight, b.conv1.bias);
    ops::conv3x3_backward(&da1, &trace.cols1, p(net, b.conv1.weight), b.conv1.in_c, dw, db)
}

fn two_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert!(i < j, "parameters are declared weight-before-bias");
    let (a, b) = v.split_at_mut(j);
    (&mut a[i], &mut b[0])
}

/// Runs the network; the trace is kept only when `keep` is set.
pub(crate) fn forward(
    net: &NoisePredictor,
    x: &HsiCube,
    t: usize,
    keep: bool,
) -> Result<(Vec<f32>, Option<Trace>)> {
    let cfg = &net.config;
    let l = &net.layout;
    let embedding = time_embedding(t, cfg.time_embed_dim, cfg.schedule.steps)?;
    let hidden_pre = ops::linear(&embedding, p(net, l.time1.weight), p(net, l.time1.bias));
    let hidden = ops::silu(&hidden_pre);
    let temb_pre = ops::linear(&hidden, p(net, l.time2.weight), p(net, l.time2.bias));
    let temb = ops::silu(&temb_pre);

    let input = Feature::new(x.bands(), x.height(), x.width(), x.data().to_vec());
    let mut skips: Vec<Feature> = Vec::with_capacity(cfg.depth + 1);
    let mut down = Vec::new();
    let (h0, tr) = block_forward(net, &l.down[0], &input, &temb);
    skips.push(h0);
    down.push(tr);
    for lvl in 1..=cfg.depth {
        let pooled = ops::avg_pool2(&skips[lvl - 1]);
        let (h, tr) = block_forward(net, &l.down[lvl], &pooled, &temb);
        skips.push(h);
        down.push(tr);
    }
    let mut h = skips.pop().expect("bottleneck");
    let mut up: Vec<Option<BlockTrace>> = (0..cfg.depth).map(|_| None).collect();
    for lvl in (0..cfg.depth).rev() {
        let merged = ops::concat(&ops::upsample2(&h), &skips[lvl]);
        let (next, tr) = block_forward(net, &l.up[lvl], &merged, &temb);
        up[lvl] = Some(tr);
        h = next;
    }
    let (out, out_cols) = ops::conv3x3(&h, p(net, l.out.weight), p(net, l.out.bias), l.out.out_c);
    let trace = keep.then(|| Trace {
        embedding,
        hidden_pre,
        hidden,
        temb_pre,
        temb,
        down,
        up: up.into_iter().map(|t| t.expect("every level visited")).collect(),
        out_cols,
    });
    Ok((out.data, trace))
}

pub(crate) fn backward(net: &NoisePredictor, trace: Trace, dout: Vec<f32>, g: &mut Gradients) {
    let cfg = &net.config;
    let l = &net.layout;
    let Trace {
        embedding,
        hidden_pre,
        hidden,
        temb_pre,
        temb,
        down,
        up,
        out_cols,
    } = trace;
    let (h0, w0) = down[0].shape;
    let mut dtemb = vec![0.0f32; temb.len()];

    let dout = Feature::new(cfg.bands, h0, w0, dout);
    let mut dh = {
        let (dw, db) = two_mut(&mut g.0, l.out.weight, l.out.bias);
        ops::conv3x3_backward(&dout, &out_cols, p(net, l.out.weight), l.out.in_c, dw, db)
    };

    let mut dskip: Vec<Option<Feature>> = (0..=cfg.depth).map(|_| None).collect();
    for (lvl, tr) in up.into_iter().enumerate() {
        let dmerged = block_backward(net, &l.up[lvl], tr, dh, &temb, &mut dtemb, g);
        let (dup, dskip_l) = ops::split(dmerged, cfg.width(lvl + 1));
        accumulate(&mut dskip[lvl], dskip_l);
        dh = ops::upsample2_backward(&dup);
    }
    accumulate(&mut dskip[cfg.depth], dh);

    for (lvl, tr) in down.into_iter().enumerate().rev() {
        let d = dskip[lvl].take().expect("gradient reached every level");
        let dinput = block_backward(net, &l.down[lvl], tr, d, &temb, &mut dtemb, g);
        if lvl > 0 {
            accumulate(&mut dskip[lvl - 1], ops::avg_pool2_backward(&dinput));
        }
    }

    ops::silu_backward(&temb_pre, &mut dtemb);
    let mut dhidden = vec![0.0f32; hidden.len()];
    {
        let (dw, db) = two_mut(&mut g.0, l.time2.weight, l.time2.bias);
        ops::linear_backward(&hidden, &dtemb, p(net, l.time2.weight), dw, db, &mut dhidden);
    }
    ops::silu_backward(&hidden_pre, &mut dhidden);
    let mut dembedding = vec![0.0f32; embedding.len()];
    let (dw, db) = two_mut(&mut g.0, l.time1.weight, l.time1.bias);
    ops::linear_backward(&embedding, &dhidden, p(net, l.time1.weight), dw, db, &mut dembedding);
}

fn accumulate(slot: &mut Option<Feature>, value: Feature) {
    match slot {
        Some(acc) => acc.data.iter_mut().zip(&value.data).for_each(|(a, b)| *a += b),
        None => *slot = Some(value),
    }
}
