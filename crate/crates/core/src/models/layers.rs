//! Building blocks shared by the architectures. Each layer owns only
//! parameter ids; values live in a [`ParamStore`] and are bound to a tape
//! for every forward pass.

use rand::Rng;

use super::context::{ContextVars, RegionVars};
use crate::error::{Error, Result};
use crate::numerics::{BoundParams, ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape<'_>, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
        }
    }
}

fn check_width(tape: &Tape<'_>, op: &'static str, x: Var, expected: usize) -> Result<()> {
    let shape = tape.shape(x);
    if shape.len() != 2 || shape[1] != expected {
        return Err(Error::shape(
            op,
            shape,
            &[shape.first().copied().unwrap_or(0), expected],
        ));
    }
    Ok(())
}

/// `x W + 1 b`
#[derive(Clone, Debug)]
pub struct Affine {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Affine {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Result<Self> {
        Ok(Affine {
            w: store.register_uniform(format!("{name}.w"), &[input, output], input, rng)?,
            b: store.register_uniform(format!("{name}.b"), &[1, output], input, rng)?,
            input,
            output,
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, p: &BoundParams, ones: Var, x: Var) -> Result<Var> {
        check_width(tape, "affine", x, self.input)?;
        let xw = tape.matmul(x, p.var(self.w))?;
        let bias = tape.matmul(ones, p.var(self.b))?;
        tape.add(xw, bias)
    }
}

/// Graph convolution `act(N H W + 1 b)` with a precomputed normalized
/// operator `N`.
#[derive(Clone, Debug)]
pub struct GcnLayer {
    pub linear: Affine,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(GcnLayer {
            linear: Affine::new(store, name, input, output, rng)?,
            activation,
        })
    }

    pub fn output(&self) -> usize {
        self.linear.output
    }
}

pub fn gcn_forward(
    tape: &mut Tape<'_>,
    p: &BoundParams,
    layer: &GcnLayer,
    normalized: Var,
    ones: Var,
    h: Var,
) -> Result<Var> {
    let n = tape.shape(h)[0];
    if tape.shape(normalized) != [n, n] {
        return Err(Error::shape("gcn", tape.shape(normalized), tape.shape(h)));
    }
    check_width(tape, "gcn", h, layer.linear.input)?;
    let propagated = tape.matmul(normalized, h)?;
    let z = layer.linear.forward(tape, p, ones, propagated)?;
    Ok(layer.activation.apply(tape, z))
}

/// `sigmoid(W eta_i + W sum_{k in nbr(i)} eta_k)` with one shared `W`.
#[derive(Clone, Debug)]
pub struct StructuralConv {
    pub w: ParamId,
    pub input: usize,
    pub output: usize,
}

impl StructuralConv {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Result<Self> {
        Ok(StructuralConv {
            w: store.register_uniform(format!("{name}.w"), &[input, output], input, rng)?,
            input,
            output,
        })
    }
}

/// `self_and_neighbors` is `I + B` with `B` the 0/1 neighbor indicator, so
/// row `i` of `(I + B) V` is `eta_i + sum_k eta_k`.
pub fn structural_conv(
    tape: &mut Tape<'_>,
    p: &BoundParams,
    conv: &StructuralConv,
    self_and_neighbors: Var,
    features: Var,
) -> Result<Var> {
    check_width(tape, "structural_conv", features, conv.input)?;
    let summed = tape.matmul(self_and_neighbors, features)?;
    let z = tape.matmul(summed, p.var(conv.w))?;
    Ok(tape.sigmoid(z))
}

/// GRU gates over `[input ⊕ h]`; no gate biases.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub wz: ParamId,
    pub wr: ParamId,
    pub wc: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let fan_in = input + hidden;
        let shape = [fan_in, hidden];
        Ok(GruCell {
            wz: store.register_uniform(format!("{name}.wz"), &shape, fan_in, rng)?,
            wr: store.register_uniform(format!("{name}.wr"), &shape, fan_in, rng)?,
            wc: store.register_uniform(format!("{name}.wc"), &shape, fan_in, rng)?,
            input,
            hidden,
        })
    }
}

/// One step: `z = σ([x⊕h]Wz)`, `r = σ([x⊕h]Wr)`, `c = tanh([x⊕(h⊙r)]W)`,
/// `h' = (1-z)⊙h + z⊙c`.
pub fn gru_step(tape: &mut Tape<'_>, p: &BoundParams, cell: &GruCell, input: Var, h_prev: Var) -> Result<Var> {
    check_width(tape, "gru input", input, cell.input)?;
    check_width(tape, "gru hidden", h_prev, cell.hidden)?;
    let joined = tape.concat(&[input, h_prev], 1)?;
    let z_pre = tape.matmul(joined, p.var(cell.wz))?;
    let z = tape.sigmoid(z_pre);
    let r_pre = tape.matmul(joined, p.var(cell.wr))?;
    let r = tape.sigmoid(r_pre);
    let gated = tape.mul(h_prev, r)?;
    let joined_gated = tape.concat(&[input, gated], 1)?;
    let c_pre = tape.matmul(joined_gated, p.var(cell.wc))?;
    let candidate = tape.tanh(c_pre);
    let keep = tape.one_minus(z)?;
    let old = tape.mul(keep, h_prev)?;
    let new = tape.mul(z, candidate)?;
    tape.add(old, new)
}

/// GRU whose input transformation is a structural graph convolution.
#[derive(Clone, Debug)]
pub struct GcnGruCell {
    pub conv: StructuralConv,
    pub gru: GruCell,
}

impl GcnGruCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(GcnGruCell {
            conv: StructuralConv::new(store, &format!("{name}.conv"), input, hidden, rng)?,
            gru: GruCell::new(store, &format!("{name}.gru"), hidden, hidden, rng)?,
        })
    }

    pub fn step(
        &self,
        tape: &mut Tape<'_>,
        p: &BoundParams,
        self_and_neighbors: Var,
        features: Var,
        h_prev: Var,
    ) -> Result<Var> {
        let conv_out = structural_conv(tape, p, &self.conv, self_and_neighbors, features)?;
        gru_step(tape, p, &self.gru, conv_out, h_prev)
    }
}

/// Learnable per-lag scores turned into weights by a softmax over lags.
#[derive(Clone, Debug)]
pub struct AttentionAggregator {
    pub scores: ParamId,
    pub lags: usize,
}

impl AttentionAggregator {
    pub fn new(store: &mut ParamStore, name: &str, lags: usize) -> Result<Self> {
        Ok(AttentionAggregator {
            scores: store.register(format!("{name}.scores"), Tensor::zeros(&[lags]))?,
            lags,
        })
    }
}

/// `sum_k softmax(a)_k * states[k]`
pub fn attention_aggregate(
    tape: &mut Tape<'_>,
    p: &BoundParams,
    agg: &AttentionAggregator,
    states: &[Var],
) -> Result<Var> {
    if states.len() != agg.lags {
        return Err(Error::shape("attention", &[states.len()], &[agg.lags]));
    }
    let weights = tape.softmax(p.var(agg.scores))?;
    let mut total: Option<Var> = None;
    for (k, &state) in states.iter().enumerate() {
        let w = tape.element(weights, k)?;
        let term = tape.mul(w, state)?;
        total = Some(match total {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    total.ok_or_else(|| Error::Usage("attention over zero lags".into()))
}

/// `ReLU(H W0 + b0) W1 + b1`; no activation on the output.
#[derive(Clone, Debug)]
pub struct Decoder {
    pub hidden: Affine,
    pub output: Affine,
}

impl Decoder {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        width: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if outputs == 0 {
            return Err(Error::Usage("decoder needs at least one output".into()));
        }
        Ok(Decoder {
            hidden: Affine::new(store, &format!("{name}.0"), input, width, rng)?,
            output: Affine::new(store, &format!("{name}.1"), width, outputs, rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, p: &BoundParams, ones: Var, h: Var) -> Result<Var> {
        let z = self.hidden.forward(tape, p, ones, h)?;
        let a = tape.relu(z);
        self.output.forward(tape, p, ones, a)
    }
}

/// Per-region spatial GCNs, scattered back to global node order and mixed by
/// one shared affine map.
#[derive(Clone, Debug)]
pub struct RegionalBlock {
    pub region_gcns: Vec<(String, GcnLayer)>,
    pub mixer: Affine,
}

impl RegionalBlock {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        labels: &[String],
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let region_gcns = labels
            .iter()
            .map(|label| {
                let layer = GcnLayer::new(
                    store,
                    &format!("regional.{label}"),
                    input,
                    hidden,
                    Activation::Sigmoid,
                    rng,
                )?;
                Ok((label.clone(), layer))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RegionalBlock {
            region_gcns,
            mixer: Affine::new(store, "regional.mixer", hidden, hidden, rng)?,
        })
    }
}

/// One lag of the regional path: `gamma = mixer(sum_r P_r GCN_r(G_r X, N_r))`.
pub fn regional_forward(
    tape: &mut Tape<'_>,
    p: &BoundParams,
    block: &RegionalBlock,
    ctx: &ContextVars,
    features: Var,
) -> Result<Var> {
    if ctx.regions.len() != block.region_gcns.len() {
        return Err(Error::Usage(format!(
            "model has {} regional GCNs, partition has {} regions",
            block.region_gcns.len(),
            ctx.regions.len()
        )));
    }
    let mut assembled: Option<Var> = None;
    for ((label, layer), region) in block.region_gcns.iter().zip(&ctx.regions) {
        let RegionVars {
            label: region_label,
            gather,
            scatter,
            normalized,
            ones,
        } = region;
        if label != region_label {
            return Err(Error::Usage(format!(
                "region order mismatch: {label} vs {region_label}"
            )));
        }
        let local = tape.matmul(*gather, features)?;
        let embedded = gcn_forward(tape, p, layer, *normalized, *ones, local)?;
        let global = tape.matmul(*scatter, embedded)?;
        assembled = Some(match assembled {
            None => global,
            Some(acc) => tape.add(acc, global)?,
        });
    }
    let assembled = assembled.ok_or_else(|| Error::Usage("partition without regions".into()))?;
    block.mixer.forward(tape, p, ctx.ones, assembled)
}
