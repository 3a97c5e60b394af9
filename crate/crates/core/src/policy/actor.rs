//! Transformer actor: each context shot is a token, a learned class token
//! summarises the window and feeds eight classification heads.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use shotwright_nn::{LayerNorm, Linear, ParamId, ParamStore, Tape, Tensor, TransformerBlock, Var};

use crate::attributes::{CLASS_COUNTS, CONTEXT_LEN, DISTRIBUTION_DIM, NUM_ATTRIBUTES};
use crate::error::{Result, ShotError};
use crate::representation::{AttributeDistribution, ContextState};

/// Scale of the initial class token and position embeddings.
const EMBEDDING_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActorConfig {
    pub d_model: usize,
    pub blocks: usize,
    pub heads: usize,
    pub ff_width: usize,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            blocks: 2,
            heads: 4,
            ff_width: 128,
        }
    }
}

impl ActorConfig {
    pub fn to_meta(&self) -> Vec<(String, String)> {
        vec![
            ("d_model".into(), self.d_model.to_string()),
            ("blocks".into(), self.blocks.to_string()),
            ("heads".into(), self.heads.to_string()),
            ("ff_width".into(), self.ff_width.to_string()),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ActorNetwork {
    config: ActorConfig,
    store: ParamStore,
    token_proj: Linear,
    class_token: ParamId,
    positions: ParamId,
    blocks: Vec<TransformerBlock>,
    final_norm: LayerNorm,
    heads: Vec<Linear>,
}

impl ActorNetwork {
    pub fn new<R: Rng + ?Sized>(config: ActorConfig, rng: &mut R) -> Result<Self> {
        if config.d_model < 2 || config.heads == 0 || !config.d_model.is_multiple_of(config.heads) || config.ff_width == 0 {
            return Err(ShotError::InvalidArgument(format!("invalid actor configuration {config:?}")));
        }
        let d = config.d_model;
        let mut store = ParamStore::new();
        let token_proj = Linear::new(&mut store, "token_proj", DISTRIBUTION_DIM, d, rng)?;
        let normal = Normal::new(0.0, EMBEDDING_INIT_STD).expect("valid std");
        let class_data = (0..d).map(|_| normal.sample(rng)).collect();
        let class_token = store.add("class_token", Tensor::new(vec![d], class_data)?)?;
        let pos_data = (0..(CONTEXT_LEN + 1) * d).map(|_| normal.sample(rng)).collect();
        let positions = store.add("positions", Tensor::new(vec![CONTEXT_LEN + 1, d], pos_data)?)?;
        let blocks = (0..config.blocks)
            .map(|b| TransformerBlock::new(&mut store, &format!("block{b}"), d, config.heads, config.ff_width, rng))
            .collect::<shotwright_nn::Result<Vec<_>>>()?;
        let final_norm = LayerNorm::new(&mut store, "final_norm", d)?;
        let heads = CLASS_COUNTS
            .iter()
            .enumerate()
            .map(|(i, &c)| Linear::new(&mut store, &format!("head{i}"), d, c, rng))
            .collect::<shotwright_nn::Result<Vec<_>>>()?;
        Ok(Self {
            config,
            store,
            token_proj,
            class_token,
            positions,
            blocks,
            final_norm,
            heads,
        })
    }

    pub fn config(&self) -> &ActorConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Records the forward pass with parameters from `store` and returns one
    /// `[batch, C_i]` logit var per head.
    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, states: &[ContextState]) -> Result<Vec<Var>> {
        if states.is_empty() {
            return Err(ShotError::Empty("actor batch"));
        }
        let mut flat = Vec::with_capacity(states.len() * CONTEXT_LEN * DISTRIBUTION_DIM);
        for s in states {
            flat.extend_from_slice(s.flat());
        }
        let shots = tape.constant(Tensor::new(vec![states.len() * CONTEXT_LEN, DISTRIBUTION_DIM], flat)?);
        let tokens = self.token_proj.forward(tape, store, shots)?;
        let class_token = tape.param(store, self.class_token);
        let positions = tape.param(store, self.positions);
        let mut x = tape.assemble_tokens(tokens, class_token, positions, CONTEXT_LEN)?;
        for block in &self.blocks {
            x = block.forward(tape, store, x, CONTEXT_LEN + 1)?;
        }
        let cls = tape.select_rows(x, CONTEXT_LEN + 1, 0)?;
        let cls = self.final_norm.forward(tape, store, cls)?;
        self.heads
            .iter()
            .map(|h| h.forward(tape, store, cls).map_err(ShotError::from))
            .collect()
    }

    /// Per-head class probabilities for each state.
    pub fn forward(&self, states: &[ContextState]) -> Result<Vec<AttributeDistribution>> {
        let mut tape = Tape::new();
        let heads = self.logits(&mut tape, &self.store, states)?;
        let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(DISTRIBUTION_DIM); states.len()];
        for head in heads.iter().take(NUM_ATTRIBUTES) {
            let logits = tape.value(*head);
            for (b, row_out) in out.iter_mut().enumerate() {
                let mut row = logits.row(b).to_vec();
                shotwright_nn::softmax_in_place(&mut row);
                row_out.extend(row);
            }
        }
        out.into_iter().map(AttributeDistribution::new).collect()
    }

    /// Sets every head's weights and biases to zero, making all outputs uniform.
    pub fn zero_heads(&mut self) {
        for h in &self.heads {
            self.store.get_mut(h.weight).value.data_mut().fill(0.0);
            self.store.get_mut(h.bias).value.data_mut().fill(0.0);
        }
    }
}

/// Per-head class probabilities for a single state.
pub fn actor_forward(actor: &ActorNetwork, state: &ContextState) -> Result<AttributeDistribution> {
    Ok(actor.forward(std::slice::from_ref(state))?.remove(0))
}
