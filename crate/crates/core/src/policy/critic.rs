//! MLP critic scoring a (context, action) pair on each of the eight reward channels.

use rand::Rng;
use shotwright_nn::{Mlp, ParamStore, Tape, Tensor, Var};

use crate::attributes::{AttributeVector, CONTEXT_DIM, DISTRIBUTION_DIM, NUM_ATTRIBUTES};
use crate::error::{Result, ShotError};
use crate::representation::{one_hot_encode, ContextState};

pub const CRITIC_INPUT_DIM: usize = CONTEXT_DIM + DISTRIBUTION_DIM;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticConfig {
    pub hidden: Vec<usize>,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self { hidden: vec![256, 128] }
    }
}

impl CriticConfig {
    pub fn to_meta(&self) -> Vec<(String, String)> {
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        vec![("hidden".into(), hidden.join(","))]
    }

    pub fn from_meta(hidden: &str) -> Result<Self> {
        let hidden = if hidden.is_empty() {
            Vec::new()
        } else {
            hidden
                .split(',')
                .map(|h| h.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| ShotError::InvalidArgument(format!("bad critic hidden widths `{hidden}`: {e}")))?
        };
        Ok(Self { hidden })
    }
}

/// Context followed by the one-hot action: 204 + 51 inputs.
pub fn critic_input(state: &ContextState, action: &AttributeVector) -> Vec<f64> {
    let mut x = Vec::with_capacity(CRITIC_INPUT_DIM);
    x.extend_from_slice(state.flat());
    x.extend_from_slice(one_hot_encode(action).values());
    x
}

#[derive(Debug, Clone)]
pub struct CriticNetwork {
    config: CriticConfig,
    mlp: Mlp,
    store: ParamStore,
}

impl CriticNetwork {
    pub fn new<R: Rng + ?Sized>(config: CriticConfig, rng: &mut R) -> Result<Self> {
        if config.hidden.contains(&0) {
            return Err(ShotError::InvalidArgument("critic hidden widths must be positive".into()));
        }
        let mut widths = vec![CRITIC_INPUT_DIM];
        widths.extend(&config.hidden);
        widths.push(NUM_ATTRIBUTES);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "critic", &widths, rng)?;
        Ok(Self { config, mlp, store })
    }

    pub fn config(&self) -> &CriticConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// `[n, 8]` values for `n` critic input rows.
    pub fn values_var(&self, tape: &mut Tape, store: &ParamStore, inputs: &[Vec<f64>]) -> Result<Var> {
        if inputs.is_empty() {
            return Err(ShotError::Empty("critic batch"));
        }
        let x = tape.constant(Tensor::from_rows(inputs)?);
        Ok(self.mlp.forward(tape, store, x)?)
    }

    pub fn values(&self, inputs: &[Vec<f64>]) -> Result<Vec<[f64; NUM_ATTRIBUTES]>> {
        let mut tape = Tape::new();
        let v = self.values_var(&mut tape, &self.store, inputs)?;
        let t = tape.value(v);
        Ok((0..inputs.len())
            .map(|r| std::array::from_fn(|c| t.row(r)[c]))
            .collect())
    }
}
