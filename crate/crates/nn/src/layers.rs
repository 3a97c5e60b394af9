//! Layers built from tape ops. Each layer only stores parameter handles;
//! the values live in a [`ParamStore`].

use rand::Rng;

use crate::error::{NnError, Result};
use crate::param::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_glorot(format!("{name}.weight"), input_dim, output_dim, rng)?;
        let bias = store.add_filled(format!("{name}.bias"), &[output_dim], 0.0)?;
        Ok(Self {
            weight,
            bias,
            input_dim,
            output_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, input: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(input, w)?;
        tape.add_bias(xw, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub shift: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub const DEFAULT_EPS: f64 = 1e-5;

    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            gain: store.add_filled(format!("{name}.gain"), &[dim], 1.0)?,
            shift: store.add_filled(format!("{name}.shift"), &[dim], 0.0)?,
            eps: Self::DEFAULT_EPS,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, input: Var) -> Result<Var> {
        let g = tape.param(store, self.gain);
        let s = tape.param(store, self.shift);
        tape.layer_norm(input, g, s, self.eps)
    }
}

/// Multi-head self-attention with separate query/key/value/output projections.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(NnError::InvalidArgument {
                op: "multi_head_attention",
                message: format!("model width {dim} is not divisible by {heads} heads"),
            });
        }
        Ok(Self {
            query: Linear::new(store, &format!("{name}.query"), dim, dim, rng)?,
            key: Linear::new(store, &format!("{name}.key"), dim, dim, rng)?,
            value: Linear::new(store, &format!("{name}.value"), dim, dim, rng)?,
            output: Linear::new(store, &format!("{name}.output"), dim, dim, rng)?,
            heads,
        })
    }

    /// `tokens` is `[batch * seq, dim]`; attention never crosses sequence boundaries.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, tokens: Var, seq: usize) -> Result<Var> {
        let q = self.query.forward(tape, store, tokens)?;
        let k = self.key.forward(tape, store, tokens)?;
        let v = self.value.forward(tape, store, tokens)?;
        let mixed = tape.attention(q, k, v, seq, self.heads)?;
        self.output.forward(tape, store, mixed)
    }
}

/// Stack of linear layers with GELU between them (none after the last).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(NnError::InvalidArgument {
                op: "mlp",
                message: "need at least input and output widths".into(),
            });
        }
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, input: Var) -> Result<Var> {
        let mut x = input;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, store, x)?;
            if i + 1 < self.layers.len() {
                x = tape.gelu(x);
            }
        }
        Ok(x)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }
}

/// Pre-norm transformer encoder block.
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    pub attn_norm: LayerNorm,
    pub attention: MultiHeadAttention,
    pub ff_norm: LayerNorm,
    pub feed_forward: Mlp,
}

impl TransformerBlock {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        ff_width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            attn_norm: LayerNorm::new(store, &format!("{name}.attn_norm"), dim)?,
            attention: MultiHeadAttention::new(store, &format!("{name}.attn"), dim, heads, rng)?,
            ff_norm: LayerNorm::new(store, &format!("{name}.ff_norm"), dim)?,
            feed_forward: Mlp::new(store, &format!("{name}.ff"), &[dim, ff_width, dim], rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, seq: usize) -> Result<Var> {
        let h = self.attn_norm.forward(tape, store, x)?;
        let h = self.attention.forward(tape, store, h, seq)?;
        let x = tape.add(x, h)?;
        let h = self.ff_norm.forward(tape, store, x)?;
        let h = self.feed_forward.forward(tape, store, h)?;
        tape.add(x, h)
    }
}
