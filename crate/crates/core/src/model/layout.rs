use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::error::Result;
use crate::tensor::{ParamId, Real, Tensor};

#[derive(Clone, Copy, Debug)]
pub(crate) enum Init {
    Normal(f64),
    Zeros,
    Ones,
}

impl Init {
    pub(crate) fn sample<T: Real, R: Rng + ?Sized>(self, shape: &[usize], rng: &mut R) -> Tensor<T> {
        match self {
            Init::Zeros => Tensor::zeros(shape),
            Init::Ones => Tensor::full(shape, T::one()),
            Init::Normal(std) => {
                let n: usize = shape.iter().product();
                let dist = Normal::new(0.0, std).expect("positive std");
                let data = (0..n).map(|_| T::of(dist.sample(rng))).collect();
                Tensor::new(shape.to_vec(), data).expect("sized from shape")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct NormIds {
    pub gain: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct AttnIds {
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct FfnIds {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct EncoderLayer {
    pub ln1: NormIds,
    pub attn: AttnIds,
    pub ln2: NormIds,
    pub ffn: FfnIds,
}

#[derive(Clone, Debug)]
pub(crate) struct DecoderLayer {
    pub ln1: NormIds,
    pub self_attn: AttnIds,
    pub ln2: NormIds,
    pub cross_attn: AttnIds,
    pub ln3: NormIds,
    pub ffn: FfnIds,
}

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub tok_emb: ParamId,
    pub enc_pos: ParamId,
    pub dec_pos: ParamId,
    pub enc_layers: Vec<EncoderLayer>,
    pub enc_norm: NormIds,
    pub dec_layers: Vec<DecoderLayer>,
    pub dec_norm: NormIds,
    pub del_w: ParamId,
    pub del_b: ParamId,
    pub ins_w: ParamId,
    pub ins_b: ParamId,
    pub tok_b: ParamId,
    count: usize,
}

type Register<'a> = dyn FnMut(&str, &[usize], Init) -> Result<ParamId> + 'a;

struct Builder<'a, 'b> {
    reg: &'a mut Register<'b>,
    count: usize,
}

impl Builder<'_, '_> {
    fn add(&mut self, name: &str, shape: &[usize], init: Init) -> Result<ParamId> {
        self.count += 1;
        (self.reg)(name, shape, init)
    }

    fn weight(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Result<ParamId> {
        self.add(name, &[fan_in, fan_out], Init::Normal((1.0 / fan_in as f64).sqrt()))
    }

    fn norm(&mut self, prefix: &str, d: usize) -> Result<NormIds> {
        Ok(NormIds {
            gain: self.add(&format!("{prefix}.gain"), &[d], Init::Ones)?,
            bias: self.add(&format!("{prefix}.bias"), &[d], Init::Zeros)?,
        })
    }

    fn attn(&mut self, prefix: &str, d: usize) -> Result<AttnIds> {
        let pair = |b: &mut Self, n: &str| -> Result<(ParamId, ParamId)> {
            Ok((
                b.weight(&format!("{prefix}.w{n}"), d, d)?,
                b.add(&format!("{prefix}.b{n}"), &[d], Init::Zeros)?,
            ))
        };
        let (wq, bq) = pair(self, "q")?;
        let (wk, bk) = pair(self, "k")?;
        let (wv, bv) = pair(self, "v")?;
        let (wo, bo) = pair(self, "o")?;
        Ok(AttnIds {
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
        })
    }

    fn ffn(&mut self, prefix: &str, d: usize, f: usize) -> Result<FfnIds> {
        Ok(FfnIds {
            w1: self.weight(&format!("{prefix}.w1"), d, f)?,
            b1: self.add(&format!("{prefix}.b1"), &[f], Init::Zeros)?,
            w2: self.weight(&format!("{prefix}.w2"), f, d)?,
            b2: self.add(&format!("{prefix}.b2"), &[d], Init::Zeros)?,
        })
    }
}

impl Layout {
    /// Walks every parameter in a fixed order, asking `reg` for its id.
    pub(crate) fn build(c: &ModelConfig, reg: &mut Register<'_>) -> Result<Layout> {
        let d = c.d_model;
        let mut b = Builder { reg, count: 0 };
        let tok_emb = b.add("embed.tokens", &[c.vocab_size, d], Init::Normal(0.1))?;
        let enc_pos = b.add("embed.encoder_positions", &[c.max_seq_len, d], Init::Normal(0.1))?;
        let dec_pos = b.add("embed.decoder_positions", &[c.max_seq_len, d], Init::Normal(0.1))?;
        let mut enc_layers = Vec::with_capacity(c.n_encoder_layers);
        for i in 0..c.n_encoder_layers {
            let p = format!("encoder.{i}");
            enc_layers.push(EncoderLayer {
                ln1: b.norm(&format!("{p}.ln1"), d)?,
                attn: b.attn(&format!("{p}.self_attn"), d)?,
                ln2: b.norm(&format!("{p}.ln2"), d)?,
                ffn: b.ffn(&format!("{p}.ffn"), d, c.ffn_dim)?,
            });
        }
        let enc_norm = b.norm("encoder.final_norm", d)?;
        let mut dec_layers = Vec::with_capacity(c.n_decoder_layers);
        for i in 0..c.n_decoder_layers {
            let p = format!("decoder.{i}");
            dec_layers.push(DecoderLayer {
                ln1: b.norm(&format!("{p}.ln1"), d)?,
                self_attn: b.attn(&format!("{p}.self_attn"), d)?,
                ln2: b.norm(&format!("{p}.ln2"), d)?,
                cross_attn: b.attn(&format!("{p}.cross_attn"), d)?,
                ln3: b.norm(&format!("{p}.ln3"), d)?,
                ffn: b.ffn(&format!("{p}.ffn"), d, c.ffn_dim)?,
            });
        }
        let dec_norm = b.norm("decoder.final_norm", d)?;
        let del_w = b.weight("head.delete.w", d, 2)?;
        let del_b = b.add("head.delete.b", &[2], Init::Zeros)?;
        let ins_w = b.weight("head.insert.w", 2 * d, c.max_placeholders + 1)?;
        let ins_b = b.add("head.insert.b", &[c.max_placeholders + 1], Init::Zeros)?;
        let tok_b = b.add("head.token.b", &[c.vocab_size], Init::Zeros)?;
        let count = b.count;
        Ok(Layout {
            tok_emb,
            enc_pos,
            dec_pos,
            enc_layers,
            enc_norm,
            dec_layers,
            dec_norm,
            del_w,
            del_b,
            ins_w,
            ins_b,
            tok_b,
            count,
        })
    }

    pub(crate) fn count(&self) -> usize {
        self.count
    }
}
