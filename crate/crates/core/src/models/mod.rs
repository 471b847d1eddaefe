//! Forecasting architectures built from graph convolutions, GCN-gated GRU
//! cells, attention over lags and a two-layer decoder.
//!
//! A [`Model`] owns its parameters; constant graph operators live in a
//! separate [`GraphContext`] so that one trained model can be evaluated
//! against any node ordering of the same graph.

mod checkpoint;
mod context;
pub mod layers;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{ModelCheckpoint, CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC};
pub use context::{ContextVars, GraphContext, RegionContext, RegionVars};
use layers::{
    attention_aggregate, gcn_forward, gru_step, regional_forward, Activation, AttentionAggregator, Decoder, GcnGruCell,
    GcnLayer, GruCell, RegionalBlock,
};

use crate::data::FEATURE_COUNT;
use crate::error::{Error, Result};
use crate::graph::Strategy;
use crate::numerics::{BoundParams, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    StackedGRU,
    StackedGCN,
    TGCN,
    CSTGCN,
    RanTGCN,
    RegTGCN,
}

impl Architecture {
    pub const ALL: [Architecture; 6] = [
        Architecture::StackedGRU,
        Architecture::StackedGCN,
        Architecture::TGCN,
        Architecture::CSTGCN,
        Architecture::RanTGCN,
        Architecture::RegTGCN,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::StackedGRU => "StackedGRU",
            Architecture::StackedGCN => "StackedGCN",
            Architecture::TGCN => "TGCN",
            Architecture::CSTGCN => "CSTGCN",
            Architecture::RanTGCN => "RanTGCN",
            Architecture::RegTGCN => "RegTGCN",
        }
    }

    pub fn default_hidden(self) -> usize {
        match self {
            Architecture::TGCN => 512,
            _ => 256,
        }
    }

    /// The only connectivity this architecture accepts.
    pub fn connectivity(self) -> Strategy {
        match self {
            Architecture::RegTGCN => Strategy::Regional,
            Architecture::RanTGCN => Strategy::Random,
            _ => Strategy::Connected,
        }
    }

    pub fn uses_regions(self) -> bool {
        matches!(self, Architecture::RegTGCN | Architecture::RanTGCN)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    /// Case-insensitive; `-` and `_` are ignored, so `RegT-GCN` and
    /// `regt_gcn` both parse.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s}")))
    }
}

pub const DEFAULT_CST_DEPTH: usize = 5;

fn default_cst_depth() -> usize {
    DEFAULT_CST_DEPTH
}

/// Everything needed to rebuild a model's parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub hidden: usize,
    pub k: usize,
    pub horizons: Vec<usize>,
    pub connectivity: Strategy,
    /// Group count of a random decomposition.
    #[serde(default)]
    pub random_regions: Option<usize>,
    pub seed: u64,
    #[serde(default = "default_cst_depth")]
    pub cst_depth: usize,
    /// Region labels in partition order; empty unless the architecture
    /// uses a decomposition.
    #[serde(default)]
    pub region_labels: Vec<String>,
}

impl ModelSpec {
    /// Spec with the architecture's default hidden size and matching
    /// connectivity.
    pub fn new(architecture: Architecture, k: usize, horizons: Vec<usize>, seed: u64) -> Self {
        ModelSpec {
            architecture,
            hidden: architecture.default_hidden(),
            k,
            horizons,
            connectivity: architecture.connectivity(),
            random_regions: None,
            seed,
            cst_depth: DEFAULT_CST_DEPTH,
            region_labels: Vec::new(),
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }

    /// Copies region labels (and, for random partitions, the group count)
    /// from a graph context.
    pub fn with_regions_from(mut self, ctx: &GraphContext) -> Self {
        if self.architecture.uses_regions() {
            self.region_labels = ctx.region_labels();
            if self.connectivity == Strategy::Random {
                self.random_regions = Some(self.region_labels.len());
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.architecture.connectivity();
        if self.connectivity != expected {
            return Err(Error::Config(format!(
                "{} requires {expected} connectivity, got {}",
                self.architecture, self.connectivity
            )));
        }
        if self.hidden == 0 || self.k == 0 {
            return Err(Error::Config("hidden size and K must be positive".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be non-empty and positive".into()));
        }
        if self.architecture == Architecture::CSTGCN && self.cst_depth == 0 {
            return Err(Error::Config("CST-GCN depth must be at least 1".into()));
        }
        if self.architecture.uses_regions() {
            if self.region_labels.is_empty() {
                return Err(Error::Config(format!("{} needs region labels", self.architecture)));
            }
            if self.connectivity == Strategy::Random {
                if let Some(r) = self.random_regions {
                    if r != self.region_labels.len() {
                        return Err(Error::Config(format!(
                            "random region count {r} does not match {} labels",
                            self.region_labels.len()
                        )));
                    }
                }
            }
        } else if self.random_regions.is_some() {
            return Err(Error::Config(
                "region count is only valid for random connectivity".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Spatial {
    Gcn(Vec<GcnLayer>),
    Regional { structural: GcnLayer, block: RegionalBlock },
}

#[derive(Clone, Debug)]
enum Body {
    StackedGru {
        layers: [GruCell; 2],
    },
    StackedGcn {
        layers: [GcnLayer; 2],
    },
    Temporal {
        spatial: Spatial,
        cell: GcnGruCell,
        attention: AttentionAggregator,
    },
}

#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    params: ParamStore,
    body: Body,
    decoder: Decoder,
}

impl Model {
    /// Builds the architecture and draws initial weights from `spec.seed`.
    pub fn new(spec: ModelSpec) -> Result<Model> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut store = ParamStore::new();
        let h = spec.hidden;
        let f = FEATURE_COUNT;
        let sig = Activation::Sigmoid;
        let body = match spec.architecture {
            Architecture::StackedGRU => Body::StackedGru {
                layers: [
                    GruCell::new(&mut store, "gru0", f, h, &mut rng)?,
                    GruCell::new(&mut store, "gru1", h, h, &mut rng)?,
                ],
            },
            Architecture::StackedGCN => Body::StackedGcn {
                layers: [
                    GcnLayer::new(&mut store, "gcn0", f * spec.k, h, sig, &mut rng)?,
                    GcnLayer::new(&mut store, "gcn1", h, h, sig, &mut rng)?,
                ],
            },
            arch => {
                let depth = if arch == Architecture::CSTGCN {
                    spec.cst_depth
                } else {
                    1
                };
                let mut layers = Vec::with_capacity(depth);
                for d in 0..depth {
                    let input = if d == 0 { f } else { h };
                    layers.push(GcnLayer::new(
                        &mut store,
                        &format!("spatial{d}"),
                        input,
                        h,
                        sig,
                        &mut rng,
                    )?);
                }
                let (spatial, conv_width) = if arch.uses_regions() {
                    let structural = layers.pop().expect("one structural layer");
                    let block = RegionalBlock::new(&mut store, &spec.region_labels, f, h, &mut rng)?;
                    (Spatial::Regional { structural, block }, 2 * h)
                } else {
                    (Spatial::Gcn(layers), h)
                };
                Body::Temporal {
                    spatial,
                    cell: GcnGruCell::new(&mut store, "temporal", conv_width, h, &mut rng)?,
                    attention: AttentionAggregator::new(&mut store, "attention", spec.k)?,
                }
            }
        };
        let decoder = Decoder::new(&mut store, "decoder", h, h, spec.horizons.len(), &mut rng)?;
        Ok(Model {
            spec,
            params: store,
            body,
            decoder,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Checks that a graph context fits this model.
    pub fn check_context(&self, ctx: &GraphContext) -> Result<()> {
        if self.spec.architecture.uses_regions() {
            let labels = ctx.region_labels();
            if labels != self.spec.region_labels {
                return Err(Error::Config(format!(
                    "model regions {:?} do not match partition regions {:?}",
                    self.spec.region_labels, labels
                )));
            }
        }
        Ok(())
    }

    /// Records the forward pass for `inputs` (K frames of `n x 8`, oldest
    /// first) and returns the `n x |horizons|` prediction.
    pub fn forward(&self, tape: &mut Tape<'_>, p: &BoundParams, ctx: &ContextVars, inputs: &[Var]) -> Result<Var> {
        if inputs.len() != self.spec.k {
            return Err(Error::Usage(format!(
                "model expects {} lags, window has {}",
                self.spec.k,
                inputs.len()
            )));
        }
        let n = tape.shape(inputs[0])[0];
        let h = self.spec.hidden;
        let last = match &self.body {
            Body::StackedGru { layers } => {
                let mut s0 = tape.constant(Tensor::zeros(&[n, h]));
                let mut s1 = s0;
                for &x in inputs {
                    s0 = gru_step(tape, p, &layers[0], x, s0)?;
                    s1 = gru_step(tape, p, &layers[1], s0, s1)?;
                }
                s1
            }
            Body::StackedGcn { layers } => {
                let x = tape.concat(inputs, 1)?;
                let g = gcn_forward(tape, p, &layers[0], ctx.normalized, ctx.ones, x)?;
                gcn_forward(tape, p, &layers[1], ctx.normalized, ctx.ones, g)?
            }
            Body::Temporal {
                spatial,
                cell,
                attention,
            } => {
                let mut state = None;
                let mut states = Vec::with_capacity(inputs.len());
                for &x in inputs {
                    let features = match spatial {
                        Spatial::Gcn(layers) => {
                            let mut z = x;
                            for layer in layers {
                                z = gcn_forward(tape, p, layer, ctx.normalized, ctx.ones, z)?;
                            }
                            z
                        }
                        Spatial::Regional { structural, block } => {
                            let structural = gcn_forward(tape, p, structural, ctx.normalized, ctx.ones, x)?;
                            let gamma = regional_forward(tape, p, block, ctx, x)?;
                            // the earliest gamma seeds the recurrent state
                            state.get_or_insert(gamma);
                            tape.concat(&[structural, gamma], 1)?
                        }
                    };
                    let prev = match state {
                        Some(s) => s,
                        None => tape.constant(Tensor::zeros(&[n, h])),
                    };
                    let next = cell.step(tape, p, ctx.self_and_neighbors, features, prev)?;
                    state = Some(next);
                    states.push(next);
                }
                attention_aggregate(tape, p, attention, &states)?
            }
        };
        self.decoder.forward(tape, p, ctx.ones, last)
    }

    /// Tape-free inference on one window of (already scaled) frames.
    pub fn predict(&self, ctx: &GraphContext, inputs: &[Tensor]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let c = ctx.bind(&mut tape);
        let xs: Vec<Var> = inputs.iter().map(|x| tape.leaf_ref(x, false)).collect();
        let out = self.forward(&mut tape, &p, &c, &xs)?;
        Ok(tape.value(out).clone())
    }
}
