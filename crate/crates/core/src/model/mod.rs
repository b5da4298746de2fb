//! The edit policy: a transformer encoder over the source, a bidirectional
//! decoder over the current hypothesis, and one head per edit operation.
//!
//! * deletion: keep/delete logits for every non-sentinel position,
//! * insertion: logits over `0..=max_placeholders` for every adjacent pair,
//!   scored from the concatenation of both decoder states,
//! * replacement: vocabulary logits at each placeholder, tied to the input
//!   embedding, with reserved ids masked out.

mod layout;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::edit::{Hypothesis, Phase};
use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamStore, Real, Tensor, Var};
use crate::vocab::{Token, NON_OUTPUT, NUM_RESERVED, PLH};

use layout::{AttnIds, FfnIds, Layout, NormIds};

/// Logit assigned to token ids the replacement head may never emit.
pub const MASKED_LOGIT: f64 = -1e9;

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub ffn_dim: usize,
    pub max_placeholders: usize,
    pub max_seq_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 64,
            d_model: 64,
            n_heads: 4,
            n_encoder_layers: 2,
            n_decoder_layers: 2,
            ffn_dim: 128,
            max_placeholders: 64,
            max_seq_len: 64,
        }
    }
}

impl ModelConfig {
    /// Every violated constraint, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            v.push(format!(
                "model.d_model ({}) must be divisible by model.n_heads ({})",
                self.d_model, self.n_heads
            ));
        }
        if self.max_placeholders == 0 {
            v.push("model.max_placeholders must be at least 1".into());
        }
        if self.vocab_size <= NUM_RESERVED as usize {
            v.push(format!(
                "model.vocab_size ({}) must exceed the {NUM_RESERVED} reserved ids",
                self.vocab_size
            ));
        }
        if self.max_seq_len < 3 {
            v.push("model.max_seq_len must be at least 3".into());
        }
        if self.d_model == 0 || self.ffn_dim == 0 {
            v.push("model.d_model and model.ffn_dim must be positive".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Scalar parameter count implied by the architecture.
    pub fn num_parameters(&self) -> usize {
        let d = self.d_model;
        let f = self.ffn_dim;
        let norm = 2 * d;
        let attn = 4 * (d * d + d);
        let ffn = d * f + f + f * d + d;
        let enc_layer = 2 * norm + attn + ffn;
        let dec_layer = 3 * norm + 2 * attn + ffn;
        let embeddings = self.vocab_size * d + 2 * self.max_seq_len * d;
        let heads = (d * 2 + 2) + (2 * d * (self.max_placeholders + 1) + self.max_placeholders + 1) + self.vocab_size;
        embeddings
            + self.n_encoder_layers * enc_layer
            + self.n_decoder_layers * dec_layer
            + 2 * norm
            + heads
    }
}

/// Parameters plus the ids that address them.
#[derive(Clone, Debug)]
pub struct LevenshteinModel<T> {
    config: ModelConfig,
    pub params: ParamStore<T>,
    layout: Layout,
}

impl<T: Real> LevenshteinModel<T> {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let layout = Layout::build(&config, &mut |name, shape, init| {
            params.add(name, init.sample(shape, rng))
        })?;
        Ok(LevenshteinModel {
            config,
            params,
            layout,
        })
    }

    /// Adopts a parameter store, checking every expected name and shape.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::build(&config, &mut |name, shape, _| {
            let id = params
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if params.value(id).shape() != shape {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {:?}, config expects {shape:?}",
                    params.value(id).shape()
                )));
            }
            Ok(id)
        })?;
        if params.len() != layout.count() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} parameters, config expects {}",
                params.len(),
                layout.count()
            )));
        }
        Ok(LevenshteinModel {
            config,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn graph(&self) -> Graph<'_, T> {
        Graph::new(&self.params)
    }

    fn check_tokens(&self, tokens: &[Token], allow_plh: bool) -> Result<()> {
        for &t in tokens {
            if t as usize >= self.config.vocab_size {
                return Err(Error::Vocabulary {
                    id: t,
                    reason: "is outside the vocabulary",
                });
            }
            if t == PLH && !allow_plh {
                return Err(Error::Vocabulary {
                    id: t,
                    reason: "is a placeholder in the source",
                });
            }
        }
        Ok(())
    }

    fn linear(&self, g: &mut Graph<'_, T>, x: Var, w: crate::tensor::ParamId, b: crate::tensor::ParamId) -> Result<Var> {
        let w = g.param(w);
        let b = g.param(b);
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }

    fn norm(&self, g: &mut Graph<'_, T>, x: Var, ids: &NormIds) -> Result<Var> {
        let gain = g.param(ids.gain);
        let bias = g.param(ids.bias);
        g.layer_norm(x, gain, bias, LN_EPS)
    }

    fn attention(&self, g: &mut Graph<'_, T>, ids: &AttnIds, query: Var, context: Var) -> Result<Var> {
        let q = self.linear(g, query, ids.wq, ids.bq)?;
        let k = self.linear(g, context, ids.wk, ids.bk)?;
        let v = self.linear(g, context, ids.wv, ids.bv)?;
        let dh = self.config.d_model / self.config.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.config.n_heads);
        for h in 0..self.config.n_heads {
            let qh = g.slice_cols(q, h * dh, dh)?;
            let kh = g.slice_cols(k, h * dh, dh)?;
            let vh = g.slice_cols(v, h * dh, dh)?;
            let scores = g.matmul_nt(qh, kh)?;
            let scores = g.scale(scores, scale)?;
            let attn = g.softmax(scores, 1.0)?;
            heads.push(g.matmul(attn, vh)?);
        }
        let cat = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads)? };
        self.linear(g, cat, ids.wo, ids.bo)
    }

    fn ffn(&self, g: &mut Graph<'_, T>, ids: &FfnIds, x: Var) -> Result<Var> {
        let h = self.linear(g, x, ids.w1, ids.b1)?;
        let h = g.relu(h)?;
        self.linear(g, h, ids.w2, ids.b2)
    }

    fn embed(&self, g: &mut Graph<'_, T>, tokens: &[Token], pos: crate::tensor::ParamId) -> Result<Var> {
        let ids: Vec<usize> = tokens.iter().map(|&t| t as usize).collect();
        let positions: Vec<usize> = (0..tokens.len()).collect();
        let table = g.param(self.layout.tok_emb);
        let pos = g.param(pos);
        let tok = g.embedding(table, &ids)?;
        let p = g.gather_rows(pos, &positions)?;
        g.add(tok, p)
    }

    /// Encoder memory `[len(source) × d_model]`.
    pub fn encode(&self, g: &mut Graph<'_, T>, source: &[Token]) -> Result<Var> {
        if source.is_empty() {
            return Err(Error::Length("empty source".into()));
        }
        if source.len() > self.config.max_seq_len {
            return Err(Error::Length(format!(
                "source of length {} exceeds max_seq_len {}",
                source.len(),
                self.config.max_seq_len
            )));
        }
        self.check_tokens(source, false)?;
        let mut x = self.embed(g, source, self.layout.enc_pos)?;
        for layer in &self.layout.enc_layers {
            let h = self.norm(g, x, &layer.ln1)?;
            let a = self.attention(g, &layer.attn, h, h)?;
            x = g.add(x, a)?;
            let h = self.norm(g, x, &layer.ln2)?;
            let f = self.ffn(g, &layer.ffn, h)?;
            x = g.add(x, f)?;
        }
        self.norm(g, x, &self.layout.enc_norm)
    }

    /// Shared decoder states `[len(hyp) × d_model]` read by all three heads.
    pub fn decode_states(&self, g: &mut Graph<'_, T>, hyp: &Hypothesis, memory: Var) -> Result<Var> {
        hyp.check_len(self.config.max_seq_len)?;
        self.check_tokens(hyp.tokens(), true)?;
        let mut x = self.embed(g, hyp.tokens(), self.layout.dec_pos)?;
        for layer in &self.layout.dec_layers {
            let h = self.norm(g, x, &layer.ln1)?;
            let a = self.attention(g, &layer.self_attn, h, h)?;
            x = g.add(x, a)?;
            let h = self.norm(g, x, &layer.ln2)?;
            let c = self.attention(g, &layer.cross_attn, h, memory)?;
            x = g.add(x, c)?;
            let h = self.norm(g, x, &layer.ln3)?;
            let f = self.ffn(g, &layer.ffn, h)?;
            x = g.add(x, f)?;
        }
        self.norm(g, x, &self.layout.dec_norm)
    }

    /// `[(len − 2) × 2]` keep/delete logits; class 1 deletes.
    pub fn delete_head(&self, g: &mut Graph<'_, T>, states: Var, hyp: &Hypothesis) -> Result<Var> {
        let rows: Vec<usize> = (1..hyp.len() - 1).collect();
        let h = g.gather_rows(states, &rows)?;
        self.linear(g, h, self.layout.del_w, self.layout.del_b)
    }

    /// `[(len − 1) × (max_placeholders + 1)]`; class k inserts k placeholders.
    pub fn insert_head(&self, g: &mut Graph<'_, T>, states: Var, hyp: &Hypothesis) -> Result<Var> {
        let left: Vec<usize> = (0..hyp.len() - 1).collect();
        let right: Vec<usize> = (1..hyp.len()).collect();
        let l = g.gather_rows(states, &left)?;
        let r = g.gather_rows(states, &right)?;
        let pair = g.concat_cols(&[l, r])?;
        self.linear(g, pair, self.layout.ins_w, self.layout.ins_b)
    }

    /// `[num_placeholders × vocab_size]` with reserved ids masked.
    pub fn replace_head(&self, g: &mut Graph<'_, T>, states: Var, hyp: &Hypothesis) -> Result<Var> {
        let rows = hyp.placeholder_positions();
        let h = g.gather_rows(states, &rows)?;
        let table = g.param(self.layout.tok_emb);
        let bias = g.param(self.layout.tok_b);
        let logits = g.matmul_nt(h, table)?;
        let logits = g.add_row(logits, bias)?;
        let v = self.config.vocab_size;
        let mut mask = Tensor::zeros(&[rows.len(), v]);
        for row in mask.data_mut().chunks_exact_mut(v) {
            for &t in &NON_OUTPUT {
                row[t as usize] = T::of(MASKED_LOGIT);
            }
        }
        let mask = g.input(mask)?;
        g.add(logits, mask)
    }

    pub fn forward_delete(&self, g: &mut Graph<'_, T>, hyp: &Hypothesis, memory: Var) -> Result<Var> {
        if hyp.has_placeholders() {
            return Err(Error::State("deletion scores PLH-free hypotheses only".into()));
        }
        let s = self.decode_states(g, hyp, memory)?;
        self.delete_head(g, s, hyp)
    }

    pub fn forward_insert(&self, g: &mut Graph<'_, T>, hyp: &Hypothesis, memory: Var) -> Result<Var> {
        if hyp.has_placeholders() {
            return Err(Error::State("insertion scores PLH-free hypotheses only".into()));
        }
        let s = self.decode_states(g, hyp, memory)?;
        self.insert_head(g, s, hyp)
    }

    pub fn forward_replace(&self, g: &mut Graph<'_, T>, hyp: &Hypothesis, memory: Var) -> Result<Var> {
        let s = self.decode_states(g, hyp, memory)?;
        self.replace_head(g, s, hyp)
    }

    pub fn forward(&self, g: &mut Graph<'_, T>, phase: Phase, hyp: &Hypothesis, memory: Var) -> Result<Var> {
        match phase {
            Phase::Delete => self.forward_delete(g, hyp, memory),
            Phase::Insert => self.forward_insert(g, hyp, memory),
            Phase::Replace => self.forward_replace(g, hyp, memory),
        }
    }

    /// Casts parameters to another precision (used by gradient checks).
    pub fn cast<U: Real>(&self) -> LevenshteinModel<U> {
        LevenshteinModel {
            config: self.config.clone(),
            params: self.params.cast(),
            layout: self.layout.clone(),
        }
    }
}
