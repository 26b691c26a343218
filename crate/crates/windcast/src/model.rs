//! The forecasting model: a recurrent encoder-decoder with per-turbine
//! embeddings and an MLP output head.
//!
//! The encoder consumes an m-hour window of the target turbine's and its
//! neighbours' wind speeds plus calendar features and compresses it into one
//! hidden state. The decoder starts from that state and unrolls tau_max
//! steps; each step's input is the previous prediction (the measured value
//! for the first step), the turbine's learned embedding column, and the
//! calendar features of the hour being forecast. The decoder is
//! autoregressive in training exactly as in inference; no teacher forcing.
//!
//! The recurrent cell is a GRU by default. A vanilla tanh RNN cell can be
//! swapped in so the baseline comparison changes exactly one thing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{WindowSample, WindowSpec, TIME_FEATURE_DIM};
use crate::tape::{Tape, Var};
use crate::tensor::{Tensor, TensorError};

/// Sizes and switches that define the architecture. Stored in checkpoints so
/// a saved model rebuilds itself exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Encoder history length, hours.
    pub m: usize,
    /// Neighbour count, the target turbine included.
    pub k: usize,
    /// Recurrent hidden width.
    pub hidden: usize,
    /// Turbine-embedding dimension.
    pub embed_dim: usize,
    /// Width of the output MLP's single hidden layer.
    pub mlp_hidden: usize,
    /// Number of forecast horizons.
    pub tau_max: usize,
    /// Number of turbines (embedding columns).
    pub n_turbines: usize,
    /// Feed neighbour power history as extra encoder channels.
    pub power_history: bool,
    /// Also append the embedding to every encoder input step.
    pub embed_encoder: bool,
    /// Southern-hemisphere season mapping for calendar features.
    pub southern: bool,
}

impl HyperParams {
    pub fn defaults(n_turbines: usize) -> Self {
        Self {
            m: 48,
            k: 6,
            hidden: 48,
            embed_dim: 16,
            mlp_hidden: 32,
            tau_max: 12,
            n_turbines,
            power_history: false,
            embed_encoder: false,
            southern: false,
        }
    }

    pub fn validate(&self) {
        assert!(self.m >= 1, "m must be positive");
        assert!(self.k >= 1, "k must be positive");
        assert!(self.hidden >= 1, "hidden width must be positive");
        assert!(self.embed_dim >= 1, "embedding dimension must be positive");
        assert!(self.mlp_hidden >= 1, "mlp hidden width must be positive");
        assert!(self.tau_max >= 1, "tau_max must be positive");
        assert!(self.n_turbines >= 1, "need at least one turbine");
    }

    /// Rows of the encoder input at each timestep.
    pub fn encoder_input_dim(&self) -> usize {
        let power_rows = if self.power_history { self.k } else { 0 };
        let embed = if self.embed_encoder {
            self.embed_dim
        } else {
            0
        };
        self.k + power_rows + TIME_FEATURE_DIM + embed
    }

    /// Decoder step input: previous prediction, embedding, calendar features.
    pub fn decoder_input_dim(&self) -> usize {
        1 + self.embed_dim + TIME_FEATURE_DIM
    }

    /// Rows expected in a [`WindowSample`]'s input matrix.
    pub fn window_rows(&self) -> usize {
        let power_rows = if self.power_history { self.k } else { 0 };
        self.k + power_rows + TIME_FEATURE_DIM
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            m: self.m,
            tau_max: self.tau_max,
            power_history: self.power_history,
            southern: self.southern,
        }
    }
}

/// Gated recurrent unit parameters: update gate z, reset gate r, candidate h̃.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCellParams {
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_h: Tensor,
    pub u_h: Tensor,
    pub b_h: Tensor,
}

/// Vanilla recurrent cell, h' = tanh(Wx + Uh + b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnCellParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Gru,
    Rnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellParams {
    Gru(GruCellParams),
    Rnn(RnnCellParams),
}

impl CellParams {
    fn init(kind: CellKind, input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let w_bound = 1.0 / (input_dim as f64).sqrt();
        let u_bound = 1.0 / (hidden as f64).sqrt();
        let mut mat = |rows: usize, cols: usize, bound: f64| {
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            Tensor::unchecked(vec![rows, cols], data)
        };
        match kind {
            CellKind::Gru => CellParams::Gru(GruCellParams {
                w_z: mat(hidden, input_dim, w_bound),
                u_z: mat(hidden, hidden, u_bound),
                b_z: Tensor::zeros(vec![hidden]),
                w_r: mat(hidden, input_dim, w_bound),
                u_r: mat(hidden, hidden, u_bound),
                b_r: Tensor::zeros(vec![hidden]),
                w_h: mat(hidden, input_dim, w_bound),
                u_h: mat(hidden, hidden, u_bound),
                b_h: Tensor::zeros(vec![hidden]),
            }),
            CellKind::Rnn => CellParams::Rnn(RnnCellParams {
                w: mat(hidden, input_dim, w_bound),
                u: mat(hidden, hidden, u_bound),
                b: Tensor::zeros(vec![hidden]),
            }),
        }
    }

    fn kind(&self) -> CellKind {
        match self {
            CellParams::Gru(_) => CellKind::Gru,
            CellParams::Rnn(_) => CellKind::Rnn,
        }
    }

    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            CellParams::Gru(g) => vec![
                ("w_z", &g.w_z),
                ("u_z", &g.u_z),
                ("b_z", &g.b_z),
                ("w_r", &g.w_r),
                ("u_r", &g.u_r),
                ("b_r", &g.b_r),
                ("w_h", &g.w_h),
                ("u_h", &g.u_h),
                ("b_h", &g.b_h),
            ],
            CellParams::Rnn(r) => vec![("w", &r.w), ("u", &r.u), ("b", &r.b)],
        }
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            CellParams::Gru(g) => vec![
                ("w_z", &mut g.w_z),
                ("u_z", &mut g.u_z),
                ("b_z", &mut g.b_z),
                ("w_r", &mut g.w_r),
                ("u_r", &mut g.u_r),
                ("b_r", &mut g.b_r),
                ("w_h", &mut g.w_h),
                ("u_h", &mut g.u_h),
                ("b_h", &mut g.b_h),
            ],
            CellParams::Rnn(r) => {
                vec![("w", &mut r.w), ("u", &mut r.u), ("b", &mut r.b)]
            }
        }
    }
}

/// One-hidden-layer output head mapping the decoder state to a scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHead {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// All trainable parameters plus the hyperparameters that shape them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hyper: HyperParams,
    encoder: CellParams,
    decoder: CellParams,
    embedding: Tensor,
    head: MlpHead,
}

impl ModelParams {
    /// Seeded initialization: weight matrices uniform in ±1/√fan_in, biases
    /// zero, embedding entries uniform in ±0.05.
    pub fn init(hyper: HyperParams, cell: CellKind, seed: u64) -> Self {
        hyper.validate();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = CellParams::init(cell, hyper.encoder_input_dim(), hyper.hidden, &mut rng);
        let decoder = CellParams::init(cell, hyper.decoder_input_dim(), hyper.hidden, &mut rng);
        let embedding = {
            let data = (0..hyper.embed_dim * hyper.n_turbines)
                .map(|_| rng.gen_range(-0.05..0.05))
                .collect();
            Tensor::unchecked(vec![hyper.embed_dim, hyper.n_turbines], data)
        };
        let mlp_bound = 1.0 / (hyper.hidden as f64).sqrt();
        let out_bound = 1.0 / (hyper.mlp_hidden as f64).sqrt();
        let mut mat = |rows: usize, cols: usize, bound: f64| {
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            Tensor::unchecked(vec![rows, cols], data)
        };
        let head = MlpHead {
            w1: mat(hyper.mlp_hidden, hyper.hidden, mlp_bound),
            b1: Tensor::zeros(vec![hyper.mlp_hidden]),
            w2: mat(1, hyper.mlp_hidden, out_bound),
            b2: Tensor::zeros(vec![1]),
        };
        Self {
            hyper,
            encoder,
            decoder,
            embedding,
            head,
        }
    }

    pub fn cell_kind(&self) -> CellKind {
        self.encoder.kind()
    }

    pub fn embedding(&self) -> &Tensor {
        &self.embedding
    }

    /// All parameter tensors in canonical order with dotted names. The order
    /// is the contract between binding, gradient reduction, and the
    /// optimizer.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(23);
        for (name, t) in self.encoder.tensors() {
            out.push((format!("encoder.{name}"), t));
        }
        for (name, t) in self.decoder.tensors() {
            out.push((format!("decoder.{name}"), t));
        }
        out.push(("embedding".to_string(), &self.embedding));
        out.push(("head.w1".to_string(), &self.head.w1));
        out.push(("head.b1".to_string(), &self.head.b1));
        out.push(("head.w2".to_string(), &self.head.w2));
        out.push(("head.b2".to_string(), &self.head.b2));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::with_capacity(23);
        for (name, t) in self.encoder.tensors_mut() {
            out.push((format!("encoder.{name}"), t));
        }
        for (name, t) in self.decoder.tensors_mut() {
            out.push((format!("decoder.{name}"), t));
        }
        out.push(("embedding".to_string(), &mut self.embedding));
        out.push(("head.w1".to_string(), &mut self.head.w1));
        out.push(("head.b1".to_string(), &mut self.head.b1));
        out.push(("head.w2".to_string(), &mut self.head.w2));
        out.push(("head.b2".to_string(), &mut self.head.b2));
        out
    }

    /// Index of the embedding tensor within [`Self::tensors`] order.
    pub fn embedding_tensor_index(&self) -> usize {
        self.encoder.tensors().len() + self.decoder.tensors().len()
    }

    /// Total number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Register every parameter on a tape and return handles for a forward
    /// pass.
    pub fn bind(&self, tape: &mut Tape) -> BoundModel<'_> {
        let mut order = Vec::with_capacity(23);
        let bind_cell = |tape: &mut Tape, cell: &CellParams, order: &mut Vec<Var>| {
            let vars: Vec<Var> = cell
                .tensors()
                .into_iter()
                .map(|(_, t)| {
                    let v = tape.leaf(t.clone());
                    order.push(v);
                    v
                })
                .collect();
            match cell {
                CellParams::Gru(_) => CellVars::Gru {
                    w_z: vars[0],
                    u_z: vars[1],
                    b_z: vars[2],
                    w_r: vars[3],
                    u_r: vars[4],
                    b_r: vars[5],
                    w_h: vars[6],
                    u_h: vars[7],
                    b_h: vars[8],
                },
                CellParams::Rnn(_) => CellVars::Rnn {
                    w: vars[0],
                    u: vars[1],
                    b: vars[2],
                },
            }
        };
        let encoder = bind_cell(tape, &self.encoder, &mut order);
        let decoder = bind_cell(tape, &self.decoder, &mut order);
        let embedding = tape.leaf(self.embedding.clone());
        order.push(embedding);
        let head = HeadVars {
            w1: tape.leaf(self.head.w1.clone()),
            b1: tape.leaf(self.head.b1.clone()),
            w2: tape.leaf(self.head.w2.clone()),
            b2: tape.leaf(self.head.b2.clone()),
        };
        order.extend([head.w1, head.b1, head.w2, head.b2]);
        BoundModel {
            hyper: &self.hyper,
            encoder,
            decoder,
            embedding,
            head,
            order,
        }
    }
}

#[derive(Clone, Copy)]
enum CellVars {
    Gru {
        w_z: Var,
        u_z: Var,
        b_z: Var,
        w_r: Var,
        u_r: Var,
        b_r: Var,
        w_h: Var,
        u_h: Var,
        b_h: Var,
    },
    Rnn {
        w: Var,
        u: Var,
        b: Var,
    },
}

#[derive(Clone, Copy)]
struct HeadVars {
    w1: Var,
    b1: Var,
    w2: Var,
    b2: Var,
}

/// Parameter handles on one tape, ready to run the model forward.
pub struct BoundModel<'p> {
    hyper: &'p HyperParams,
    encoder: CellVars,
    decoder: CellVars,
    embedding: Var,
    head: HeadVars,
    order: Vec<Var>,
}

fn cell_step(tape: &mut Tape, cell: CellVars, x: Var, h: Var) -> Result<Var, TensorError> {
    match cell {
        CellVars::Gru {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
        } => {
            let gate = |tape: &mut Tape, w: Var, u: Var, b: Var, rhs: Var| {
                let wx = tape.matmul(w, x)?;
                let uh = tape.matmul(u, rhs)?;
                let s = tape.add(wx, uh)?;
                tape.add(s, b)
            };
            let z_pre = gate(tape, w_z, u_z, b_z, h)?;
            let z = tape.sigmoid(z_pre);
            let r_pre = gate(tape, w_r, u_r, b_r, h)?;
            let r = tape.sigmoid(r_pre);
            let rh = tape.mul(r, h)?;
            let cand_pre = gate(tape, w_h, u_h, b_h, rh)?;
            let cand = tape.tanh(cand_pre);
            let keep = tape.one_minus(z);
            let kept = tape.mul(keep, h)?;
            let new = tape.mul(z, cand)?;
            tape.add(kept, new)
        }
        CellVars::Rnn { w, u, b } => {
            let wx = tape.matmul(w, x)?;
            let uh = tape.matmul(u, h)?;
            let s = tape.add(wx, uh)?;
            let pre = tape.add(s, b)?;
            Ok(tape.tanh(pre))
        }
    }
}

impl BoundModel<'_> {
    /// Parameter vars in the same order as [`ModelParams::tensors`].
    pub fn param_vars(&self) -> &[Var] {
        &self.order
    }

    /// The turbine's embedding column g(i).
    pub fn embed(&self, tape: &mut Tape, turbine: usize) -> Result<Var, TensorError> {
        tape.column(self.embedding, turbine)
    }

    /// Apply the encoder cell once. `x` must already be a full input step.
    pub fn step_encoder(&self, tape: &mut Tape, x: Var, h: Var) -> Result<Var, TensorError> {
        cell_step(tape, self.encoder, x, h)
    }

    /// Apply the decoder cell once.
    pub fn step_decoder(&self, tape: &mut Tape, x: Var, h: Var) -> Result<Var, TensorError> {
        cell_step(tape, self.decoder, x, h)
    }

    /// Map a decoder hidden state to one scalar prediction.
    pub fn head(&self, tape: &mut Tape, h: Var) -> Result<Var, TensorError> {
        let pre = tape.matmul(self.head.w1, h)?;
        let pre_b = tape.add(pre, self.head.b1)?;
        let act = tape.tanh(pre_b);
        let out = tape.matmul(self.head.w2, act)?;
        tape.add(out, self.head.b2)
    }

    /// Run the encoder over an input window (one column per hour) starting
    /// from a zero state; returns the final hidden state.
    pub fn encode(&self, tape: &mut Tape, input: &Tensor, turbine: usize) -> Result<Var, TensorError> {
        let expected = vec![self.hyper.window_rows(), self.hyper.m];
        if input.shape() != expected.as_slice() {
            return Err(TensorError::DimMismatch {
                op: "encode",
                left: input.shape().to_vec(),
                right: expected,
            });
        }
        let window = tape.leaf(input.clone());
        let g = self
            .hyper
            .embed_encoder
            .then(|| self.embed(tape, turbine))
            .transpose()?;
        let mut h = tape.leaf(Tensor::zeros(vec![self.hyper.hidden]));
        for t in 0..self.hyper.m {
            let col = tape.column(window, t)?;
            let x = match g {
                Some(g) => tape.concat(&[col, g])?,
                None => col,
            };
            h = cell_step(tape, self.encoder, x, h)?;
        }
        Ok(h)
    }

    /// Unroll the decoder for `future.len()` steps and emit one prediction
    /// per step. Autoregressive: each step feeds the previous prediction, so
    /// no future target value ever enters.
    pub fn decode(
        &self,
        tape: &mut Tape,
        h: Var,
        y_current: f64,
        turbine: usize,
        future: &[[f64; TIME_FEATURE_DIM]],
    ) -> Result<Vec<Var>, TensorError> {
        if future.len() != self.hyper.tau_max {
            return Err(TensorError::DimMismatch {
                op: "decode",
                left: vec![future.len()],
                right: vec![self.hyper.tau_max],
            });
        }
        let g = self.embed(tape, turbine)?;
        let mut prev = tape.leaf(Tensor::scalar(y_current)?);
        let mut state = h;
        let mut out = Vec::with_capacity(future.len());
        for feats in future {
            let u = tape.leaf(Tensor::vector(feats)?);
            let x = tape.concat(&[prev, g, u])?;
            state = cell_step(tape, self.decoder, x, state)?;
            let y = self.head(tape, state)?;
            out.push(y);
            prev = y;
        }
        Ok(out)
    }

    /// Encoder and decoder end to end for one window sample.
    pub fn forward(
        &self,
        tape: &mut Tape,
        sample: &WindowSample,
    ) -> Result<Vec<Var>, TensorError> {
        let h = self.encode(tape, &sample.input, sample.turbine)?;
        self.decode(
            tape,
            h,
            sample.y_current,
            sample.turbine,
            &sample.future_features,
        )
    }
}
