//! One direction of one layer: the peephole LSTM cell and its unrolled
//! forward/backward passes.
//!
//! ```text
//! i_t = σ(U_i x_t + W_i h_{t-1} + V_i ⊙ c_{t-1} + b_i)
//! f_t = σ(U_f x_t + W_f h_{t-1} + V_f ⊙ c_{t-1} + b_f)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ tanh(U_c x_t + W_c h_{t-1} + b_c)
//! o_t = σ(U_o x_t + W_o h_{t-1} + V_o ⊙ c_t + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! The peephole weights `V` are diagonal, so they are stored as vectors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{sigmoid, tanh, Matrix};
use crate::{Error, Result};

pub const TENSOR_NAMES: [&str; 15] = [
    "u_i", "u_f", "u_c", "u_o", "w_i", "w_f", "w_c", "w_o", "v_i", "v_f", "v_o", "b_i", "b_f",
    "b_c", "b_o",
];

/// Weights of one LSTM direction. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub u_i: Matrix,
    pub u_f: Matrix,
    pub u_c: Matrix,
    pub u_o: Matrix,
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub v_i: Vec<f64>,
    pub v_f: Vec<f64>,
    pub v_o: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let u = || Matrix::zeros(hidden, input_dim);
        let w = || Matrix::zeros(hidden, hidden);
        let v = || vec![0.0; hidden];
        LstmCellParams {
            u_i: u(),
            u_f: u(),
            u_c: u(),
            u_o: u(),
            w_i: w(),
            w_f: w(),
            w_c: w(),
            w_o: w(),
            v_i: v(),
            v_f: v(),
            v_o: v(),
            b_i: v(),
            b_f: v(),
            b_c: v(),
            b_o: v(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_i.len()
    }

    pub fn input_dim(&self) -> usize {
        self.u_i.cols()
    }

    /// Tensors in [`TENSOR_NAMES`] order, matrices row-major.
    pub fn tensors(&self) -> [&[f64]; 15] {
        [
            self.u_i.as_slice(),
            self.u_f.as_slice(),
            self.u_c.as_slice(),
            self.u_o.as_slice(),
            self.w_i.as_slice(),
            self.w_f.as_slice(),
            self.w_c.as_slice(),
            self.w_o.as_slice(),
            &self.v_i,
            &self.v_f,
            &self.v_o,
            &self.b_i,
            &self.b_f,
            &self.b_c,
            &self.b_o,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 15] {
        [
            self.u_i.as_mut_slice(),
            self.u_f.as_mut_slice(),
            self.u_c.as_mut_slice(),
            self.u_o.as_mut_slice(),
            self.w_i.as_mut_slice(),
            self.w_f.as_mut_slice(),
            self.w_c.as_mut_slice(),
            self.w_o.as_mut_slice(),
            &mut self.v_i,
            &mut self.v_f,
            &mut self.v_o,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Checks every tensor against `(input_dim, hidden)`.
    pub fn check_shape(&self, input_dim: usize, hidden: usize) -> Result<()> {
        let ok = [&self.u_i, &self.u_f, &self.u_c, &self.u_o]
            .iter()
            .all(|m| m.rows() == hidden && m.cols() == input_dim)
            && [&self.w_i, &self.w_f, &self.w_c, &self.w_o]
                .iter()
                .all(|m| m.rows() == hidden && m.cols() == hidden)
            && [
                &self.v_i, &self.v_f, &self.v_o, &self.b_i, &self.b_f, &self.b_c, &self.b_o,
            ]
            .iter()
            .all(|v| v.len() == hidden);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "lstm parameters do not match input {input_dim} / hidden {hidden}"
            )))
        }
    }
}

/// Activations of one time step, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStep {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    /// Candidate `tanh(U_c x + W_c h + b_c)`.
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn gate_preactivation(u: &Matrix, w: &Matrix, b: &[f64], x: &[f64], h_prev: &[f64]) -> Vec<f64> {
    let mut a = b.to_vec();
    u.mul_vec_add(x, &mut a);
    w.mul_vec_add(h_prev, &mut a);
    a
}

pub(crate) fn cell_step(p: &LstmCellParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> CellStep {
    let hsz = p.hidden();
    let mut i = gate_preactivation(&p.u_i, &p.w_i, &p.b_i, x, h_prev);
    let mut f = gate_preactivation(&p.u_f, &p.w_f, &p.b_f, x, h_prev);
    let mut g = gate_preactivation(&p.u_c, &p.w_c, &p.b_c, x, h_prev);
    let mut o = gate_preactivation(&p.u_o, &p.w_o, &p.b_o, x, h_prev);
    let mut c = vec![0.0; hsz];
    let mut tanh_c = vec![0.0; hsz];
    let mut h = vec![0.0; hsz];
    for k in 0..hsz {
        i[k] = sigmoid(i[k] + p.v_i[k] * c_prev[k]);
        f[k] = sigmoid(f[k] + p.v_f[k] * c_prev[k]);
        g[k] = tanh(g[k]);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        o[k] = sigmoid(o[k] + p.v_o[k] * c[k]);
        tanh_c[k] = tanh(c[k]);
        h[k] = o[k] * tanh_c[k];
    }
    CellStep {
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    }
}

/// Single checked step. Returns `(h_t, c_t, cache)`.
pub fn lstm_cell_forward(
    p: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, CellStep)> {
    p.check_shape(x.len(), h_prev.len())?;
    if c_prev.len() != h_prev.len() {
        return Err(Error::Shape(format!(
            "cell state has {} entries, hidden state {}",
            c_prev.len(),
            h_prev.len()
        )));
    }
    for (name, v) in [("x", x), ("h_prev", h_prev), ("c_prev", c_prev)] {
        if v.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite(name.into()));
        }
    }
    let step = cell_step(p, x, h_prev, c_prev);
    Ok((step.h.clone(), step.c.clone(), step))
}

/// Unrolled pass over one sequence in one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionTrace {
    pub reverse: bool,
    /// Steps in processing order (`steps[0]` is position `T-1` when reversed).
    pub steps: Vec<CellStep>,
}

impl DirectionTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sequence position handled at processing step `k`.
    pub fn position(&self, k: usize) -> usize {
        if self.reverse {
            self.steps.len() - 1 - k
        } else {
            k
        }
    }

    /// Hidden states aligned to sequence positions, `[T × H]`.
    pub fn hidden_states(&self) -> Matrix {
        let t_len = self.steps.len();
        let hsz = self.steps.first().map_or(0, |s| s.h.len());
        let mut out = Matrix::zeros(t_len, hsz);
        for k in 0..t_len {
            out.row_mut(self.position(k))
                .copy_from_slice(&self.steps[k].h);
        }
        out
    }
}

pub(crate) fn run_traced(p: &LstmCellParams, inputs: &Matrix, reverse: bool) -> DirectionTrace {
    let t_len = inputs.rows();
    let hsz = p.hidden();
    let zeros = vec![0.0; hsz];
    let mut steps: Vec<CellStep> = Vec::with_capacity(t_len);
    for k in 0..t_len {
        let pos = if reverse { t_len - 1 - k } else { k };
        let (h_prev, c_prev) = match steps.last() {
            Some(s) => (s.h.as_slice(), s.c.as_slice()),
            None => (zeros.as_slice(), zeros.as_slice()),
        };
        let step = cell_step(p, inputs.row(pos), h_prev, c_prev);
        steps.push(step);
    }
    DirectionTrace { reverse, steps }
}

/// Runs one direction from `h_0 = c_0 = 0` and returns `[T × H]` hidden
/// states aligned to the original positions.
pub fn run_direction(p: &LstmCellParams, inputs: &Matrix, reverse: bool) -> Result<Matrix> {
    if inputs.rows() == 0 {
        return Err(Error::EmptySequence);
    }
    p.check_shape(inputs.cols(), p.hidden())?;
    if inputs.as_slice().iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("inputs".into()));
    }
    Ok(run_traced(p, inputs, reverse).hidden_states())
}

/// BPTT through one direction.
///
/// `d_hidden` is dLoss/dh at each sequence position (`[T × H]`, aligned like
/// the inputs). Parameter gradients are added into `grads` and input
/// gradients into `d_inputs`.
pub(crate) fn backward_direction(
    p: &LstmCellParams,
    trace: &DirectionTrace,
    inputs: &Matrix,
    d_hidden: &Matrix,
    grads: &mut LstmCellParams,
    d_inputs: &mut Matrix,
) {
    let hsz = p.hidden();
    let zeros = vec![0.0; hsz];
    let mut dh_next = vec![0.0; hsz];
    let mut dc_next = vec![0.0; hsz];
    let mut da_i = vec![0.0; hsz];
    let mut da_f = vec![0.0; hsz];
    let mut da_g = vec![0.0; hsz];
    let mut da_o = vec![0.0; hsz];

    for k in (0..trace.len()).rev() {
        let pos = trace.position(k);
        let s = &trace.steps[k];
        let (h_prev, c_prev) = if k == 0 {
            (zeros.as_slice(), zeros.as_slice())
        } else {
            (
                trace.steps[k - 1].h.as_slice(),
                trace.steps[k - 1].c.as_slice(),
            )
        };
        let x = inputs.row(pos);
        let dh_out = d_hidden.row(pos);

        for j in 0..hsz {
            let dh = dh_out[j] + dh_next[j];
            let d_o = dh * s.tanh_c[j];
            da_o[j] = d_o * s.o[j] * (1.0 - s.o[j]);
            let dc =
                dc_next[j] + dh * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + da_o[j] * p.v_o[j];
            da_i[j] = dc * s.g[j] * s.i[j] * (1.0 - s.i[j]);
            da_g[j] = dc * s.i[j] * (1.0 - s.g[j] * s.g[j]);
            da_f[j] = dc * c_prev[j] * s.f[j] * (1.0 - s.f[j]);
            dc_next[j] = dc * s.f[j] + da_i[j] * p.v_i[j] + da_f[j] * p.v_f[j];

            grads.v_i[j] += da_i[j] * c_prev[j];
            grads.v_f[j] += da_f[j] * c_prev[j];
            grads.v_o[j] += da_o[j] * s.c[j];
            grads.b_i[j] += da_i[j];
            grads.b_f[j] += da_f[j];
            grads.b_c[j] += da_g[j];
            grads.b_o[j] += da_o[j];
        }

        grads.u_i.add_outer(&da_i, x);
        grads.u_f.add_outer(&da_f, x);
        grads.u_c.add_outer(&da_g, x);
        grads.u_o.add_outer(&da_o, x);
        grads.w_i.add_outer(&da_i, h_prev);
        grads.w_f.add_outer(&da_f, h_prev);
        grads.w_c.add_outer(&da_g, h_prev);
        grads.w_o.add_outer(&da_o, h_prev);

        let dx = d_inputs.row_mut(pos);
        p.u_i.mul_t_vec_add(&da_i, dx);
        p.u_f.mul_t_vec_add(&da_f, dx);
        p.u_c.mul_t_vec_add(&da_g, dx);
        p.u_o.mul_t_vec_add(&da_o, dx);

        dh_next.iter_mut().for_each(|v| *v = 0.0);
        p.w_i.mul_t_vec_add(&da_i, &mut dh_next);
        p.w_f.mul_t_vec_add(&da_f, &mut dh_next);
        p.w_c.mul_t_vec_add(&da_g, &mut dh_next);
        p.w_o.mul_t_vec_add(&da_o, &mut dh_next);
    }
}
