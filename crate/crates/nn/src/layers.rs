use rand::Rng;

use crate::{Graph, NnError, ParamId, ParamStore, Result, Var};

/// `x W + b` with `W: [in, out]` and `b: [1, out]`.
pub fn linear(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = g.matmul(x, w)?;
    g.add_row(y, b)
}

/// Registered weight and bias of a dense layer.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    /// Fan-in uniform weights, zero bias.
    pub fn register<R: Rng>(store: &mut ParamStore, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            w: store.add_fan_in(format!("{prefix}.w"), fan_in, fan_out, rng)?,
            b: store.add_zeros(format!("{prefix}.b"), 1, fan_out)?,
        })
    }

    /// All-zero weights and bias.
    pub fn register_zeros(store: &mut ParamStore, prefix: &str, fan_in: usize, fan_out: usize) -> Result<Self> {
        Ok(Self {
            w: store.add_zeros(format!("{prefix}.w"), fan_in, fan_out)?,
            b: store.add_zeros(format!("{prefix}.b"), 1, fan_out)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let w = g.param(self.w);
        let b = g.param(self.b);
        linear(g, x, w, b)
    }
}

/// Projections of a multi-head attention layer (model width `d`).
#[derive(Debug, Clone, Copy)]
pub struct MhaParams {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl MhaParams {
    pub fn register<R: Rng>(store: &mut ParamStore, prefix: &str, d: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || d % heads != 0 {
            return Err(NnError::ShapeMismatch {
                op: "mha.register",
                lhs: vec![d],
                rhs: vec![heads],
            });
        }
        Ok(Self {
            q: Linear::register(store, &format!("{prefix}.q"), d, d, rng)?,
            k: Linear::register(store, &format!("{prefix}.k"), d, d, rng)?,
            v: Linear::register(store, &format!("{prefix}.v"), d, d, rng)?,
            o: Linear::register(store, &format!("{prefix}.o"), d, d, rng)?,
            heads,
        })
    }
}

/// Multi-head scaled dot-product attention: `query [n_q, d]` attends over
/// `keys`/`values` `[n_k, d]`; output `[n_q, d]`.
pub fn mha(g: &mut Graph, p: &MhaParams, query: Var, keys: Var, values: Var) -> Result<Var> {
    mha_with_weights(g, p, query, keys, values).map(|(out, _)| out)
}

/// Like [`mha`] but also returns the per-head attention matrices `[n_q, n_k]`.
pub fn mha_with_weights(g: &mut Graph, p: &MhaParams, query: Var, keys: Var, values: Var) -> Result<(Var, Vec<Var>)> {
    let (nq, d) = g.shape(query);
    let (nk, dk) = g.shape(keys);
    let (nv, dv) = g.shape(values);
    if dk != d || dv != d || nv != nk {
        return Err(NnError::ShapeMismatch {
            op: "mha",
            lhs: vec![nq, d],
            rhs: vec![nk, dk, nv, dv],
        });
    }
    if p.heads == 0 || d % p.heads != 0 {
        return Err(NnError::ShapeMismatch {
            op: "mha.heads",
            lhs: vec![d],
            rhs: vec![p.heads],
        });
    }
    let dh = d / p.heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let q = p.q.forward(g, query)?;
    let k = p.k.forward(g, keys)?;
    let v = p.v.forward(g, values)?;

    let mut head_outs = Vec::with_capacity(p.heads);
    let mut weights = Vec::with_capacity(p.heads);
    for h in 0..p.heads {
        let qh = g.slice_cols(q, h * dh, dh)?;
        let kh = g.slice_cols(k, h * dh, dh)?;
        let vh = g.slice_cols(v, h * dh, dh)?;
        let kt = g.transpose(kh)?;
        let logits = g.matmul(qh, kt)?;
        let logits = g.scale(logits, scale)?;
        let attn = g.softmax_last(logits)?;
        head_outs.push(g.matmul(attn, vh)?);
        weights.push(attn);
    }
    let concat = if head_outs.len() == 1 {
        head_outs[0]
    } else {
        g.concat_cols(&head_outs)?
    };
    let out = p.o.forward(g, concat)?;
    Ok((out, weights))
}
