//! Small sequential convolutional network trained from scratch.
//!
//! Images enter as `size × size × 1` row-major arrays; all tensors are NHWC
//! and `f64`. Convolutions are valid with stride 1 and run as im2col plus a
//! matrix product per sample. The default stack is:
//!
//! ```text
//! conv 128 3×3 ReLU → maxpool 2 → conv 64 3×3 ReLU → maxpool 2 → flatten
//! → dense 800 ReLU → dropout 0.2 → dense 400 ReLU → dropout 0.2
//! → dense 200 ReLU → dense 2 softmax
//! ```

mod ops;
mod train;

pub use ops::{conv2d_valid, gemm, maxpool};
pub use train::{train, AdamConfig, AdamState, TrainLog, TrainSettings};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

/// Smallest probability fed to the logarithm in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel: usize,
        stride: usize,
        activation: Activation,
    },
    MaxPool2d {
        pool: usize,
    },
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
    Dropout {
        rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub input_size: usize,
    pub layers: Vec<LayerSpec>,
}

impl CnnConfig {
    /// Two conv/pool blocks, then the dense head; dropout follows every
    /// hidden dense layer except the last.
    pub fn stack(input_size: usize, conv: [usize; 2], dense: &[usize], dropout: f64) -> Self {
        let conv_layer = |filters| LayerSpec::Conv2d {
            filters,
            kernel: 3,
            stride: 1,
            activation: Activation::Relu,
        };
        let mut layers = vec![
            conv_layer(conv[0]),
            LayerSpec::MaxPool2d { pool: 2 },
            conv_layer(conv[1]),
            LayerSpec::MaxPool2d { pool: 2 },
            LayerSpec::Flatten,
        ];
        for (i, &units) in dense.iter().enumerate() {
            layers.push(LayerSpec::Dense {
                units,
                activation: Activation::Relu,
            });
            if i + 1 < dense.len() {
                layers.push(LayerSpec::Dropout { rate: dropout });
            }
        }
        layers.push(LayerSpec::Dense {
            units: 2,
            activation: Activation::Softmax,
        });
        Self { input_size, layers }
    }

    /// The full-size network.
    pub fn full() -> Self {
        Self::stack(24, [128, 64], &[800, 400, 200], 0.2)
    }

    /// Same topology at reduced width.
    pub fn desk() -> Self {
        Self::stack(24, [16, 8], &[128, 64, 32], 0.2)
    }

    /// Two channels and two hidden dense layers of 8, for gradient checks.
    pub fn tiny() -> Self {
        Self::stack(24, [2, 2], &[8, 8], 0.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Conv {
        h: usize,
        w: usize,
        c: usize,
        k: usize,
        f: usize,
        relu: bool,
        p: usize,
    },
    Pool {
        h: usize,
        w: usize,
        c: usize,
        s: usize,
    },
    Flatten,
    Dense {
        i: usize,
        o: usize,
        act: Activation,
        p: usize,
    },
    Dropout {
        rate: f64,
        slot: usize,
    },
}

impl Op {
    fn has_params(&self) -> bool {
        matches!(self, Op::Conv { .. } | Op::Dense { .. })
    }
}

struct Compiled {
    ops: Vec<Op>,
    shapes: Vec<Vec<usize>>,
    ladder: Vec<usize>,
    flatten_width: Option<usize>,
    output_width: usize,
    dropout_slots: usize,
}

fn compile(config: &CnnConfig) -> Result<Compiled> {
    enum Shape {
        Spatial(usize, usize, usize),
        Flat(usize),
    }
    let shape_err = |i: usize, msg: &str| Error::Shape(format!("layer {i}: {msg}"));

    let s = config.input_size;
    if s == 0 {
        return Err(Error::Config("input_size must be positive".into()));
    }
    let mut shape = Shape::Spatial(s, s, 1);
    let mut c = Compiled {
        ops: Vec::new(),
        shapes: Vec::new(),
        ladder: vec![s],
        flatten_width: None,
        output_width: 0,
        dropout_slots: 0,
    };
    let last = config
        .layers
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::Config("empty layer list".into()))?;

    for (li, layer) in config.layers.iter().enumerate() {
        let op = match (*layer, &shape) {
            (
                LayerSpec::Conv2d {
                    filters,
                    kernel,
                    stride,
                    activation,
                },
                &Shape::Spatial(h, w, ch),
            ) => {
                if stride != 1 {
                    return Err(Error::Config(format!(
                        "layer {li}: only stride 1 is supported"
                    )));
                }
                if kernel == 0 || kernel > h || kernel > w || filters == 0 {
                    return Err(shape_err(li, "kernel does not fit"));
                }
                if activation == Activation::Softmax {
                    return Err(Error::Config(format!(
                        "layer {li}: softmax on a conv layer"
                    )));
                }
                let p = c.shapes.len();
                c.shapes.push(vec![kernel, kernel, ch, filters]);
                c.shapes.push(vec![filters]);
                shape = Shape::Spatial(h + 1 - kernel, w + 1 - kernel, filters);
                c.ladder.push(h + 1 - kernel);
                Op::Conv {
                    h,
                    w,
                    c: ch,
                    k: kernel,
                    f: filters,
                    relu: activation == Activation::Relu,
                    p,
                }
            }
            (LayerSpec::MaxPool2d { pool }, &Shape::Spatial(h, w, ch)) => {
                if pool == 0 || h < pool || w < pool {
                    return Err(shape_err(li, "pool does not fit"));
                }
                shape = Shape::Spatial(h / pool, w / pool, ch);
                c.ladder.push(h / pool);
                Op::Pool {
                    h,
                    w,
                    c: ch,
                    s: pool,
                }
            }
            (LayerSpec::Flatten, &Shape::Spatial(h, w, ch)) => {
                shape = Shape::Flat(h * w * ch);
                c.flatten_width = Some(h * w * ch);
                Op::Flatten
            }
            (LayerSpec::Dense { units, activation }, &Shape::Flat(i)) => {
                if units == 0 {
                    return Err(shape_err(li, "dense layer with no units"));
                }
                if activation == Activation::Softmax && li != last {
                    return Err(Error::Config(format!(
                        "layer {li}: softmax before the last layer"
                    )));
                }
                let p = c.shapes.len();
                c.shapes.push(vec![i, units]);
                c.shapes.push(vec![units]);
                shape = Shape::Flat(units);
                Op::Dense {
                    i,
                    o: units,
                    act: activation,
                    p,
                }
            }
            (LayerSpec::Dropout { rate }, _) => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::Config(format!(
                        "layer {li}: dropout rate {rate} outside [0, 1)"
                    )));
                }
                c.dropout_slots += 1;
                Op::Dropout {
                    rate,
                    slot: c.dropout_slots - 1,
                }
            }
            (LayerSpec::Dense { .. }, _) => {
                return Err(shape_err(li, "dense layer needs a flattened input"))
            }
            (_, _) => return Err(shape_err(li, "spatial layer after flatten")),
        };
        c.ops.push(op);
    }
    match c.ops.last() {
        Some(Op::Dense { o, .. }) => c.output_width = *o,
        _ => return Err(Error::Config("the last layer must be dense".into())),
    }
    Ok(c)
}

/// Where dropout masks come from during a forward pass.
pub enum Masks<'a> {
    /// Inference: dropout is the identity.
    Off,
    /// Training: draw fresh inverted-dropout masks.
    Sample(&'a mut dyn RngCore),
    /// Replay masks from an earlier pass.
    Fixed(&'a [Vec<f64>]),
}

/// Activations cached by a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    n: usize,
    width: usize,
    acts: Vec<Vec<f64>>,
    argmax: Vec<Vec<usize>>,
    masks: Vec<Vec<f64>>,
}

impl Forward {
    pub fn batch_len(&self) -> usize {
        self.n
    }

    /// Output of the last layer, `n × width` row-major.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least one layer")
    }

    pub fn output_width(&self) -> usize {
        self.width
    }

    /// Dropout masks in layer order (empty when dropout was off).
    pub fn masks(&self) -> &[Vec<f64>] {
        &self.masks
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    config: CnnConfig,
    ops: Vec<Op>,
    params: Vec<Vec<f64>>,
    shapes: Vec<Vec<usize>>,
    ladder: Vec<usize>,
    flatten_width: Option<usize>,
    output_width: usize,
    dropout_slots: usize,
}

impl CnnModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new(config: CnnConfig, rng: &mut dyn RngCore) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        for op in m.ops.clone() {
            let (fan_in, fan_out, p) = match op {
                Op::Conv { c, k, f, p, .. } => (k * k * c, k * k * f, p),
                Op::Dense { i, o, p, .. } => (i, o, p),
                _ => continue,
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut m.params[p] {
                *v = rng.random_range(-limit..limit);
            }
        }
        Ok(m)
    }

    pub fn zeros(config: CnnConfig) -> Result<Self> {
        let c = compile(&config)?;
        Ok(Self {
            params: c
                .shapes
                .iter()
                .map(|s| vec![0.0; s.iter().product()])
                .collect(),
            config,
            ops: c.ops,
            shapes: c.shapes,
            ladder: c.ladder,
            flatten_width: c.flatten_width,
            output_width: c.output_width,
            dropout_slots: c.dropout_slots,
        })
    }

    /// Rebuilds a model from stored tensors; shapes must match `config`.
    pub fn from_params(config: CnnConfig, params: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        if params.len() != m.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                m.params.len(),
                params.len()
            )));
        }
        for (i, (a, b)) in params.iter().zip(&m.params).enumerate() {
            if a.len() != b.len() {
                return Err(Error::Shape(format!(
                    "tensor {i}: expected {} values, got {}",
                    b.len(),
                    a.len()
                )));
            }
        }
        m.params = params;
        Ok(m)
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.params
    }

    /// Shape of each parameter tensor: conv weights `[k, k, c_in, c_out]`,
    /// dense weights `[in, out]`, biases `[out]`.
    pub fn param_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    /// Spatial side length at the input and after each conv or pool layer.
    pub fn shape_ladder(&self) -> &[usize] {
        &self.ladder
    }

    pub fn flatten_width(&self) -> Option<usize> {
        self.flatten_width
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn input_len(&self) -> usize {
        self.config.input_size * self.config.input_size
    }

    /// Runs `n` images stored back to back in `batch`.
    pub fn forward(&self, batch: &[f64], n: usize, mut masks: Masks<'_>) -> Result<Forward> {
        if batch.len() != n * self.input_len() {
            return Err(Error::Shape(format!(
                "batch of {n} needs {} values, got {}",
                n * self.input_len(),
                batch.len()
            )));
        }
        let mut acts = Vec::with_capacity(self.ops.len() + 1);
        let mut argmax = vec![Vec::new(); self.ops.len()];
        let mut used = vec![Vec::new(); self.dropout_slots];
        acts.push(batch.to_vec());

        for (li, op) in self.ops.iter().enumerate() {
            let x = acts.last().expect("input pushed");
            let y = match *op {
                Op::Conv {
                    h,
                    w,
                    c,
                    k,
                    f,
                    relu,
                    p,
                } => {
                    let (oh, ow) = (h + 1 - k, w + 1 - k);
                    let kk = k * k * c;
                    let (wt, b) = (&self.params[p], &self.params[p + 1]);
                    let mut col = vec![0.0; oh * ow * kk];
                    let mut out = vec![0.0; n * oh * ow * f];
                    for (xs, ys) in x
                        .chunks_exact(h * w * c)
                        .zip(out.chunks_exact_mut(oh * ow * f))
                    {
                        ops::im2col(xs, h, w, c, k, &mut col);
                        for r in ys.chunks_exact_mut(f) {
                            r.copy_from_slice(b);
                        }
                        ops::gemm(oh * ow, kk, f, &col, false, wt, false, 1.0, ys);
                    }
                    if relu {
                        out.iter_mut().for_each(|v| {
                            if *v < 0.0 {
                                *v = 0.0
                            }
                        });
                    }
                    out
                }
                Op::Pool { h, w, c, s } => {
                    let (out, arg) = ops::maxpool(x, n, h, w, c, s);
                    argmax[li] = arg;
                    out
                }
                Op::Flatten => x.clone(),
                Op::Dense { i, o, act, p } => {
                    let mut out = Vec::with_capacity(n * o);
                    for _ in 0..n {
                        out.extend_from_slice(&self.params[p + 1]);
                    }
                    ops::gemm(n, i, o, x, false, &self.params[p], false, 1.0, &mut out);
                    match act {
                        Activation::Relu => out.iter_mut().for_each(|v| {
                            if *v < 0.0 {
                                *v = 0.0
                            }
                        }),
                        Activation::Softmax => ops::softmax_rows(&mut out, o),
                        Activation::Linear => {}
                    }
                    out
                }
                Op::Dropout { rate, slot } => {
                    let mask = match &mut masks {
                        Masks::Off => Vec::new(),
                        Masks::Sample(rng) => {
                            let keep = 1.0 - rate;
                            (0..x.len())
                                .map(|_| {
                                    if rng.random::<f64>() < keep {
                                        1.0 / keep
                                    } else {
                                        0.0
                                    }
                                })
                                .collect()
                        }
                        Masks::Fixed(given) => {
                            let m = given.get(slot).ok_or_else(|| {
                                Error::Shape(format!("no mask for dropout slot {slot}"))
                            })?;
                            if !m.is_empty() && m.len() != x.len() {
                                return Err(Error::Shape(format!(
                                    "dropout mask {slot}: expected {} values, got {}",
                                    x.len(),
                                    m.len()
                                )));
                            }
                            m.clone()
                        }
                    };
                    let out = if mask.is_empty() {
                        x.clone()
                    } else {
                        x.iter().zip(&mask).map(|(a, m)| a * m).collect()
                    };
                    used[slot] = mask;
                    out
                }
            };
            acts.push(y);
        }
        Ok(Forward {
            n,
            width: self.output_width,
            acts,
            argmax,
            masks: used,
        })
    }

    /// Gradient of the mean cross-entropy with respect to every parameter
    /// tensor, reusing the activations and dropout masks of `fwd`.
    pub fn backward(&self, fwd: &Forward, labels: &[usize]) -> Result<Vec<Vec<f64>>> {
        let n = fwd.n;
        if labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: labels.len(),
            });
        }
        if !matches!(
            self.ops.last(),
            Some(Op::Dense {
                act: Activation::Softmax,
                ..
            })
        ) {
            return Err(Error::Config(
                "backward needs a softmax output layer".into(),
            ));
        }
        let width = self.output_width;
        if let Some(&bad) = labels.iter().find(|&&l| l >= width) {
            return Err(Error::Config(format!("label {bad} outside 0..{width}")));
        }

        // gradient with respect to the logits
        let mut delta = softmax_ce_grad(fwd.output(), labels, width);
        let inv_n = 1.0 / n as f64;
        delta.iter_mut().for_each(|v| *v *= inv_n);

        let first_param = self.ops.iter().position(Op::has_params).unwrap_or(0);
        let mut grads: Vec<Vec<f64>> = self.params.iter().map(|p| vec![0.0; p.len()]).collect();
        let last = self.ops.len() - 1;

        for li in (0..self.ops.len()).rev() {
            let x = &fwd.acts[li];
            let y = &fwd.acts[li + 1];
            let need_dx = li > first_param;
            match self.ops[li] {
                Op::Dense { i, o, act, p } => {
                    if li != last && act == Activation::Relu {
                        for (d, v) in delta.iter_mut().zip(y) {
                            if *v <= 0.0 {
                                *d = 0.0;
                            }
                        }
                    }
                    ops::gemm(i, n, o, x, true, &delta, false, 0.0, &mut grads[p]);
                    let gb = &mut grads[p + 1];
                    for row in delta.chunks_exact(o) {
                        for (g, d) in gb.iter_mut().zip(row) {
                            *g += d;
                        }
                    }
                    if need_dx {
                        let mut dx = vec![0.0; n * i];
                        ops::gemm(n, o, i, &delta, false, &self.params[p], true, 0.0, &mut dx);
                        delta = dx;
                    }
                }
                Op::Conv {
                    h,
                    w,
                    c,
                    k,
                    f,
                    relu,
                    p,
                } => {
                    if relu {
                        for (d, v) in delta.iter_mut().zip(y) {
                            if *v <= 0.0 {
                                *d = 0.0;
                            }
                        }
                    }
                    let (oh, ow) = (h + 1 - k, w + 1 - k);
                    let kk = k * k * c;
                    let mut col = vec![0.0; oh * ow * kk];
                    let mut dcol = vec![0.0; oh * ow * kk];
                    let mut dx = if need_dx {
                        vec![0.0; x.len()]
                    } else {
                        Vec::new()
                    };
                    let (gw, gb) = {
                        let (a, b) = grads.split_at_mut(p + 1);
                        (&mut a[p], &mut b[0])
                    };
                    for s in 0..n {
                        let xs = &x[s * h * w * c..(s + 1) * h * w * c];
                        let ds = &delta[s * oh * ow * f..(s + 1) * oh * ow * f];
                        ops::im2col(xs, h, w, c, k, &mut col);
                        ops::gemm(kk, oh * ow, f, &col, true, ds, false, 1.0, gw);
                        for row in ds.chunks_exact(f) {
                            for (g, d) in gb.iter_mut().zip(row) {
                                *g += d;
                            }
                        }
                        if need_dx {
                            ops::gemm(
                                oh * ow,
                                f,
                                kk,
                                ds,
                                false,
                                &self.params[p],
                                true,
                                0.0,
                                &mut dcol,
                            );
                            ops::col2im_add(
                                &dcol,
                                h,
                                w,
                                c,
                                k,
                                &mut dx[s * h * w * c..(s + 1) * h * w * c],
                            );
                        }
                    }
                    delta = dx;
                }
                Op::Pool { .. } => {
                    let mut dx = vec![0.0; x.len()];
                    for (&a, d) in fwd.argmax[li].iter().zip(&delta) {
                        dx[a] += d;
                    }
                    delta = dx;
                }
                Op::Flatten => {}
                Op::Dropout { slot, .. } => {
                    let m = &fwd.masks[slot];
                    if !m.is_empty() {
                        delta.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
                    }
                }
            }
            if !need_dx && self.ops[li].has_params() {
                break;
            }
        }
        Ok(grads)
    }

    /// Class probabilities with dropout off, one row per image.
    pub fn predict_proba<V: AsRef<[f64]>>(&self, images: &[V]) -> Result<Vec<Vec<f64>>> {
        const CHUNK: usize = 256;
        let mut rows = Vec::with_capacity(images.len());
        for chunk in images.chunks(CHUNK) {
            let batch = stack_images(chunk, self.input_len())?;
            let fwd = self.forward(&batch, chunk.len(), Masks::Off)?;
            rows.extend(
                fwd.output()
                    .chunks_exact(self.output_width)
                    .map(<[f64]>::to_vec),
            );
        }
        Ok(rows)
    }

    /// CSO iff its probability strictly exceeds the SINGLE probability.
    pub fn predict<V: AsRef<[f64]>>(&self, images: &[V]) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(images)?
            .iter()
            .map(|p| {
                if p[1] > p[0] {
                    Label::Cso
                } else {
                    Label::Single
                }
            })
            .collect())
    }
}

/// Concatenates images after checking their length.
pub fn stack_images<V: AsRef<[f64]>>(images: &[V], len: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(images.len() * len);
    for im in images {
        let im = im.as_ref();
        if im.len() != len {
            return Err(Error::Shape(format!(
                "image of {} values, expected {len}",
                im.len()
            )));
        }
        out.extend_from_slice(im);
    }
    Ok(out)
}

/// Mean sparse categorical cross-entropy, `−ln max(p[label], 1e-12)`.
pub fn loss(probs: &[f64], labels: &[usize], width: usize) -> f64 {
    let total: f64 = probs
        .chunks_exact(width)
        .zip(labels)
        .map(|(row, &l)| {
            let p = row[l];
            // NaN must survive the floor
            -(if p < PROB_FLOOR { PROB_FLOOR } else { p }).ln()
        })
        .sum();
    total / labels.len() as f64
}

/// Per-sample gradient of the cross-entropy with respect to the softmax
/// logits: `p − onehot(label)`.
pub fn softmax_ce_grad(probs: &[f64], labels: &[usize], width: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    for (row, &l) in g.chunks_exact_mut(width).zip(labels) {
        row[l] -= 1.0;
    }
    g
}
