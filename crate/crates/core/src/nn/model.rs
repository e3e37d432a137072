use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cell::{backward_direction, run_traced, DirectionTrace, LstmCellParams, TENSOR_NAMES};
use crate::data::Class;
use crate::embedding::{EmbeddingGrad, EmbeddingTable};
use crate::linalg::{softmax, Matrix};
use crate::text::TokenId;
use crate::{Error, Result};

pub const NUM_CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Hidden units per direction.
    pub hidden: usize,
    pub layers: usize,
    /// Longer inputs keep only their first `max_seq_len` tokens.
    pub max_seq_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 200,
            layers: 3,
            max_seq_len: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLayer {
    pub forward: LstmCellParams,
    pub backward: LstmCellParams,
}

impl BiLayer {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        BiLayer {
            forward: LstmCellParams::zeros(input_dim, hidden),
            backward: LstmCellParams::zeros(input_dim, hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embedding: EmbeddingTable,
    pub layers: Vec<BiLayer>,
    /// `[2 × 2H]`; row 0 scores `bot`, row 1 `human`.
    pub softmax_w: Matrix,
    pub softmax_b: Vec<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, m: &mut Matrix) {
    let bound = libm::sqrt(6.0 / (m.rows() + m.cols()) as f64);
    for x in m.as_mut_slice() {
        *x = rng.gen_range(-bound..=bound);
    }
}

/// Seeded initialization: Glorot-uniform matrices, zero peepholes, zero
/// biases except the forget gate at 1.
pub fn init_params(
    config: ModelConfig,
    embedding: EmbeddingTable,
    seed: u64,
) -> Result<ModelParams> {
    if config.hidden == 0 || config.layers == 0 || config.max_seq_len == 0 {
        return Err(Error::Config(format!(
            "dimensions must be positive: {config:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = config.hidden;
    let mut layers = Vec::with_capacity(config.layers);
    for l in 0..config.layers {
        let input_dim = if l == 0 { embedding.dim() } else { 2 * hidden };
        let mut layer = BiLayer::zeros(input_dim, hidden);
        for p in [&mut layer.forward, &mut layer.backward] {
            for m in [
                &mut p.u_i, &mut p.u_f, &mut p.u_c, &mut p.u_o, &mut p.w_i, &mut p.w_f, &mut p.w_c,
                &mut p.w_o,
            ] {
                glorot(&mut rng, m);
            }
            p.b_f.iter_mut().for_each(|b| *b = 1.0);
        }
        layers.push(layer);
    }
    let mut softmax_w = Matrix::zeros(NUM_CLASSES, 2 * hidden);
    glorot(&mut rng, &mut softmax_w);
    Ok(ModelParams {
        config,
        embedding,
        layers,
        softmax_w,
        softmax_b: vec![0.0; NUM_CLASSES],
    })
}

impl ModelParams {
    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    /// Checks every tensor against `config` and the embedding width.
    pub fn validate(&self) -> Result<()> {
        let h = self.config.hidden;
        if self.layers.len() != self.config.layers || self.layers.is_empty() {
            return Err(Error::Shape(format!(
                "expected {} layers, found {}",
                self.config.layers,
                self.layers.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let input_dim = if l == 0 { self.embedding.dim() } else { 2 * h };
            layer.forward.check_shape(input_dim, h)?;
            layer.backward.check_shape(input_dim, h)?;
        }
        if self.softmax_w.rows() != NUM_CLASSES
            || self.softmax_w.cols() != 2 * h
            || self.softmax_b.len() != NUM_CLASSES
        {
            return Err(Error::Shape("softmax layer".into()));
        }
        Ok(())
    }

    /// Every trainable tensor with a stable name. Embedding rows come first
    /// (only the trainable ones), then each layer's forward and backward
    /// tensors, then the softmax weights and bias. [`Gradients::tensors`]
    /// yields the same order.
    pub fn trainable_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        let mask: Vec<bool> = self.embedding.trainable_mask().to_vec();
        let dim = self.embedding.dim();
        for (r, row) in self
            .embedding
            .rows_mut()
            .as_mut_slice()
            .chunks_mut(dim)
            .enumerate()
        {
            if mask[r] {
                out.push((format!("embedding[{r}]"), row));
            }
        }
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (dir, p) in [
                ("forward", &mut layer.forward),
                ("backward", &mut layer.backward),
            ] {
                for (name, t) in TENSOR_NAMES.iter().zip(p.tensors_mut()) {
                    out.push((format!("layer{l}.{dir}.{name}"), t));
                }
            }
        }
        out.push(("softmax.w".into(), self.softmax_w.as_mut_slice()));
        out.push(("softmax.b".into(), self.softmax_b.as_mut_slice()));
        out
    }

    /// Immutable counterpart of [`ModelParams::trainable_tensors_mut`].
    pub fn trainable_tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for r in self.embedding.trainable_rows() {
            out.push((format!("embedding[{r}]"), self.embedding.rows().row(r)));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            for (dir, p) in [("forward", &layer.forward), ("backward", &layer.backward)] {
                for (name, t) in TENSOR_NAMES.iter().zip(p.tensors()) {
                    out.push((format!("layer{l}.{dir}.{name}"), t));
                }
            }
        }
        out.push(("softmax.w".into(), self.softmax_w.as_slice()));
        out.push(("softmax.b".into(), self.softmax_b.as_slice()));
        out
    }
}

/// Gradients with the same layout as the trainable part of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: EmbeddingGrad,
    pub layers: Vec<BiLayer>,
    pub softmax_w: Matrix,
    pub softmax_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(m: &ModelParams) -> Self {
        let h = m.hidden();
        let layers = m
            .layers
            .iter()
            .map(|l| BiLayer::zeros(l.forward.input_dim(), h))
            .collect();
        Gradients {
            embedding: EmbeddingGrad::zeros_for(&m.embedding),
            layers,
            softmax_w: Matrix::zeros(NUM_CLASSES, 2 * h),
            softmax_b: vec![0.0; NUM_CLASSES],
        }
    }

    /// Same order as [`ModelParams::trainable_tensors`].
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (slot, &r) in self.embedding.row_ids().iter().enumerate() {
            out.push((format!("embedding[{r}]"), self.embedding.slot(slot)));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            for (dir, p) in [("forward", &layer.forward), ("backward", &layer.backward)] {
                for (name, t) in TENSOR_NAMES.iter().zip(p.tensors()) {
                    out.push((format!("layer{l}.{dir}.{name}"), t));
                }
            }
        }
        out.push(("softmax.w".into(), self.softmax_w.as_slice()));
        out.push(("softmax.b".into(), self.softmax_b.as_slice()));
        out
    }

    fn flat_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.embedding.as_mut_slice()];
        for layer in &mut self.layers {
            out.extend(layer.forward.tensors_mut());
            out.extend(layer.backward.tensors_mut());
        }
        out.push(self.softmax_w.as_mut_slice());
        out.push(self.softmax_b.as_mut_slice());
        out
    }

    fn flat(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.embedding.as_slice()];
        for layer in &self.layers {
            out.extend(layer.forward.tensors());
            out.extend(layer.backward.tensors());
        }
        out.push(self.softmax_w.as_slice());
        out.push(self.softmax_b.as_slice());
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.flat_mut().into_iter().zip(other.flat()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.flat_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn fill_zero(&mut self) {
        for t in self.flat_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask<R: RngCore + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// `[T × D_in]` input to this layer.
    pub input: Matrix,
    pub forward: DirectionTrace,
    pub backward: DirectionTrace,
    /// `[T × 2H]` concatenated output after dropout.
    pub output: Matrix,
    /// Dropout multipliers for `output`, when dropout was applied.
    pub mask: Option<Vec<f64>>,
}

/// Everything a backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Ids actually run (PAD-trimmed and truncated).
    pub ids: Vec<TokenId>,
    pub layers: Vec<LayerTrace>,
    /// Classifier input `[→h_T; ←h_1]` of the top layer.
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
    /// `[p(bot), p(human)]`.
    pub probabilities: Vec<f64>,
}

impl ForwardTrace {
    pub fn p_bot(&self) -> f64 {
        self.probabilities[Class::Bot.index()]
    }
}

/// Strips leading and trailing `<PAD>` and truncates to `max_seq_len`.
fn prepare_ids(ids: &[TokenId], max_seq_len: usize) -> &[TokenId] {
    let ids = &ids[..ids.len().min(max_seq_len)];
    let start = ids
        .iter()
        .position(|&i| i != TokenId::PAD)
        .unwrap_or(ids.len());
    let end = ids
        .iter()
        .rposition(|&i| i != TokenId::PAD)
        .map_or(start, |e| e + 1);
    &ids[start..end]
}

/// Forward pass. With `train_mode` and a positive `dropout_rate`, inverted
/// dropout is applied to every layer's output (never to the recurrent
/// connections); `rng` is only consumed in that case.
pub fn bilstm_forward<R: RngCore + ?Sized>(
    m: &ModelParams,
    ids: &[TokenId],
    dropout_rate: f64,
    rng: &mut R,
    train_mode: bool,
) -> Result<ForwardTrace> {
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::Config(format!(
            "dropout rate {dropout_rate} outside [0, 1)"
        )));
    }
    let ids = prepare_ids(ids, m.config.max_seq_len);
    if ids.is_empty() {
        return Err(Error::EmptySequence);
    }
    let h = m.hidden();
    let t_len = ids.len();
    let mut input = m.embedding.embed_sequence(ids)?;
    let mut layers = Vec::with_capacity(m.layers.len());
    for layer in &m.layers {
        let forward = run_traced(&layer.forward, &input, false);
        let backward = run_traced(&layer.backward, &input, true);
        let mut output = Matrix::zeros(t_len, 2 * h);
        for k in 0..t_len {
            output.row_mut(forward.position(k))[..h].copy_from_slice(&forward.steps[k].h);
            output.row_mut(backward.position(k))[h..].copy_from_slice(&backward.steps[k].h);
        }
        let mask = if train_mode && dropout_rate > 0.0 {
            let mask = dropout_mask(t_len * 2 * h, dropout_rate, rng);
            for (y, s) in output.as_mut_slice().iter_mut().zip(&mask) {
                *y *= s;
            }
            Some(mask)
        } else {
            None
        };
        let next_input = output.clone();
        layers.push(LayerTrace {
            input: core::mem::replace(&mut input, next_input),
            forward,
            backward,
            output,
            mask,
        });
    }
    let top = &layers.last().expect("at least one layer").output;
    let mut features = Vec::with_capacity(2 * h);
    features.extend_from_slice(&top.row(t_len - 1)[..h]);
    features.extend_from_slice(&top.row(0)[h..]);
    let mut logits = m.softmax_b.clone();
    m.softmax_w.mul_vec_add(&features, &mut logits);
    let probabilities = softmax(&logits);
    Ok(ForwardTrace {
        ids: ids.to_vec(),
        layers,
        features,
        logits,
        probabilities,
    })
}

/// Accumulates the gradient of `-log p(label)` for one trace into `grads`.
/// Returns the unclamped probability of the true label.
pub fn backward_into(
    m: &ModelParams,
    trace: &ForwardTrace,
    label: Class,
    grads: &mut Gradients,
) -> Result<f64> {
    let h = m.hidden();
    if trace.layers.len() != m.layers.len()
        || grads.layers.len() != m.layers.len()
        || trace.features.len() != 2 * h
        || trace.probabilities.len() != NUM_CLASSES
    {
        return Err(Error::Shape("trace does not match model".into()));
    }
    let t_len = trace.ids.len();
    if trace
        .layers
        .iter()
        .any(|l| l.output.rows() != t_len || l.output.cols() != 2 * h)
    {
        return Err(Error::Shape("trace does not match model".into()));
    }

    let target = label.index();
    let d_logits: Vec<f64> = trace
        .probabilities
        .iter()
        .enumerate()
        .map(|(c, &p)| p - if c == target { 1.0 } else { 0.0 })
        .collect();
    grads.softmax_w.add_outer(&d_logits, &trace.features);
    for (g, d) in grads.softmax_b.iter_mut().zip(&d_logits) {
        *g += d;
    }
    let mut d_features = vec![0.0; 2 * h];
    m.softmax_w.mul_t_vec_add(&d_logits, &mut d_features);

    // gradient w.r.t. the (post-dropout) top-layer output
    let mut d_output = Matrix::zeros(t_len, 2 * h);
    for j in 0..h {
        d_output.row_mut(t_len - 1)[j] += d_features[j];
        d_output.row_mut(0)[h + j] += d_features[h + j];
    }

    for (l, (layer, lt)) in m.layers.iter().zip(&trace.layers).enumerate().rev() {
        if let Some(mask) = &lt.mask {
            for (d, s) in d_output.as_mut_slice().iter_mut().zip(mask) {
                *d *= s;
            }
        }
        let mut d_fwd = Matrix::zeros(t_len, h);
        let mut d_bwd = Matrix::zeros(t_len, h);
        for t in 0..t_len {
            d_fwd.row_mut(t).copy_from_slice(&d_output.row(t)[..h]);
            d_bwd.row_mut(t).copy_from_slice(&d_output.row(t)[h..]);
        }
        let mut d_input = Matrix::zeros(t_len, lt.input.cols());
        let g = &mut grads.layers[l];
        backward_direction(
            &layer.forward,
            &lt.forward,
            &lt.input,
            &d_fwd,
            &mut g.forward,
            &mut d_input,
        );
        backward_direction(
            &layer.backward,
            &lt.backward,
            &lt.input,
            &d_bwd,
            &mut g.backward,
            &mut d_input,
        );
        d_output = d_input;
    }
    grads.embedding.accumulate(&trace.ids, &d_output);
    Ok(trace.probabilities[target])
}

/// Gradient of `-log p(label)` for a single trace.
pub fn backward(m: &ModelParams, trace: &ForwardTrace, label: Class) -> Result<Gradients> {
    let mut g = Gradients::zeros_like(m);
    backward_into(m, trace, label, &mut g)?;
    Ok(g)
}
