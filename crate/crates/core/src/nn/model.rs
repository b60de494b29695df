use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::GraphBatch;
use super::gat::{gat_layer, AttentionVariant, GatLayerVars, LayerAttention, LayerSettings};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::fsio;
use crate::graph::EdgeType;

pub const CHECKPOINT_FORMAT: &str = "neurograph-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub in_dim: usize,
    /// Total channels per attention layer, split evenly across heads.
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub mlp_hidden: usize,
    pub dropout: f64,
    pub norm_groups: usize,
    pub leaky_slope: f64,
    pub variant: AttentionVariant,
    pub n_bands: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_dim: 21,
            hidden: 64,
            heads: 8,
            layers: 2,
            mlp_hidden: 64,
            dropout: 0.5,
            norm_groups: 8,
            leaky_slope: 0.2,
            variant: AttentionVariant::V2,
            n_bands: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("in_dim", self.in_dim),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("layers", self.layers),
            ("mlp_hidden", self.mlp_hidden),
            ("norm_groups", self.norm_groups),
            ("n_bands", self.n_bands),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Argument(format!("model.{name} must be positive")));
            }
        }
        if self.hidden % self.heads != 0 {
            return Err(Error::Argument(format!(
                "model.hidden ({}) must be divisible by model.heads ({})",
                self.hidden, self.heads
            )));
        }
        if self.hidden % self.norm_groups != 0 {
            return Err(Error::Argument(format!(
                "model.hidden ({}) must be divisible by model.norm_groups ({})",
                self.hidden, self.norm_groups
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Argument("model.dropout must lie in [0, 1)".into()));
        }
        if !self.leaky_slope.is_finite() || self.leaky_slope < 0.0 {
            return Err(Error::Argument("model.leaky_slope must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

impl AsMut<[f64]> for Param {
    fn as_mut(&mut self) -> &mut [f64] {
        self.value.data_mut()
    }
}

/// Two (or more) attention layers followed by per-band mean pooling and a
/// two-layer regression head.
#[derive(Clone, Debug, PartialEq)]
pub struct GatModel {
    config: ModelConfig,
    params: Vec<Param>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active, masks drawn from this seed.
    Train { seed: u64 },
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// One prediction per graph in the batch.
    pub predictions: Vec<f64>,
    /// Final-layer node features.
    pub node_features: Tensor,
    /// Per-layer attention coefficients, before dropout.
    pub attention: Vec<LayerAttention>,
}

#[derive(Clone, Debug)]
pub struct LossOutput {
    pub loss: f64,
    pub predictions: Vec<f64>,
    /// Aligned with [`GatModel::params`].
    pub grads: Vec<Tensor>,
}

/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, the usual dense-layer default.
fn fan_in_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = 1.0 / (fan_in as f64).sqrt();
    Tensor::from_rows(fan_in, fan_out, (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect())
}

fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_rows(rows, cols, (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect())
}

struct Recorded {
    tape: Tape,
    param_vars: Vec<Var>,
    prediction: Var,
    node_out: Var,
    attention: Vec<LayerAttention>,
}

impl GatModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, heads) = (config.hidden, config.heads);
        let head_dim = h / heads;
        let mut params = Vec::new();
        let mut push = |name: String, value: Tensor| params.push(Param { name, value });
        for l in 0..config.layers {
            let d_in = if l == 0 { config.in_dim } else { h };
            if config.variant == AttentionVariant::V2 {
                // the two halves of W over [x_v || x_u]
                push(format!("gat{l}.w_dst"), glorot(&mut rng, d_in, h, 2 * d_in, h));
                push(format!("gat{l}.w_src"), glorot(&mut rng, d_in, h, 2 * d_in, h));
            } else {
                push(format!("gat{l}.w_src"), glorot(&mut rng, d_in, h, d_in, h));
            }
            push(format!("gat{l}.w_type"), glorot(&mut rng, EdgeType::COUNT, h, 2 * d_in, h));
            push(format!("gat{l}.att"), glorot(&mut rng, 1, h, head_dim, 1));
            if config.variant == AttentionVariant::Static {
                push(format!("gat{l}.att_src"), glorot(&mut rng, 1, h, head_dim, 1));
            }
            push(format!("gat{l}.bias"), Tensor::zeros(1, h));
            push(format!("gat{l}.gamma"), Tensor::full(1, h, 1.0));
            push(format!("gat{l}.beta"), Tensor::zeros(1, h));
        }
        let readout = config.n_bands * h;
        push("mlp.w1".into(), fan_in_uniform(&mut rng, readout, config.mlp_hidden));
        push("mlp.b1".into(), Tensor::zeros(1, config.mlp_hidden));
        push("mlp.w2".into(), fan_in_uniform(&mut rng, config.mlp_hidden, 1));
        push("mlp.b2".into(), Tensor::zeros(1, 1));
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.iter_mut().find(|p| p.name == name).map(|p| &mut p.value)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn set_output_bias(&mut self, value: f64) {
        if let Some(b) = self.param_mut("mlp.b2") {
            b.data_mut()[0] = value;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }

    fn check_batch(&self, batch: &GraphBatch) -> Result<()> {
        let d = batch.features.cols();
        if d != self.config.in_dim {
            return Err(Error::Shape(format!(
                "batch has {d} input features, model expects {}",
                self.config.in_dim
            )));
        }
        if batch.n_bands != self.config.n_bands {
            return Err(Error::Shape(format!(
                "batch has {} bands, model expects {}",
                batch.n_bands, self.config.n_bands
            )));
        }
        Ok(())
    }

    fn record(&self, batch: &GraphBatch, mode: Mode) -> Result<Recorded> {
        self.check_batch(batch)?;
        let mut tape = Tape::new();
        let param_vars: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.value.clone())).collect();
        let var = |name: &str| -> Option<Var> {
            self.params.iter().position(|p| p.name == name).map(|i| param_vars[i])
        };
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let settings = LayerSettings {
            heads: self.config.heads,
            groups: self.config.norm_groups,
            slope: self.config.leaky_slope,
            dropout: if rng.is_some() { self.config.dropout } else { 0.0 },
            variant: self.config.variant,
        };

        let mut h = tape.leaf(batch.features.clone());
        let mut attention = Vec::with_capacity(self.config.layers);
        for l in 0..self.config.layers {
            let req = |name: &str| var(&format!("gat{l}.{name}")).expect("parameter registered at construction");
            let vars = GatLayerVars {
                w_dst: var(&format!("gat{l}.w_dst")),
                w_src: req("w_src"),
                w_type: var(&format!("gat{l}.w_type")),
                att: req("att"),
                att_src: var(&format!("gat{l}.att_src")),
                bias: req("bias"),
                gamma: req("gamma"),
                beta: req("beta"),
            };
            let (next, record) = gat_layer(&mut tape, h, batch, &vars, &settings, rng.as_mut());
            h = next;
            attention.push(record);
        }

        let n_segments = batch.n_graphs * batch.n_bands;
        let pooled = tape.segment_mean(h, batch.pool_segment.clone(), n_segments);
        // rows are graph-major, so this is the per-band concatenation
        let readout = tape.reshape(pooled, batch.n_graphs, batch.n_bands * self.config.hidden);
        let w1 = tape.matmul(readout, var("mlp.w1").unwrap());
        let z1 = tape.add_row(w1, var("mlp.b1").unwrap());
        let a1 = tape.elu(z1);
        let w2 = tape.matmul(a1, var("mlp.w2").unwrap());
        let prediction = tape.add_row(w2, var("mlp.b2").unwrap());
        tape.check(prediction)?;
        Ok(Recorded { tape, param_vars, prediction, node_out: h, attention })
    }

    pub fn forward(&self, batch: &GraphBatch, mode: Mode) -> Result<ForwardOutput> {
        let rec = self.record(batch, mode)?;
        Ok(ForwardOutput {
            predictions: rec.tape.value(rec.prediction).data().to_vec(),
            node_features: rec.tape.value(rec.node_out).clone(),
            attention: rec.attention,
        })
    }

    pub fn predict(&self, batch: &GraphBatch) -> Result<Vec<f64>> {
        Ok(self.forward(batch, Mode::Eval)?.predictions)
    }

    /// Mean squared error over the batch and its parameter gradients.
    pub fn loss_and_grads(&self, batch: &GraphBatch, targets: &[f64], mode: Mode) -> Result<LossOutput> {
        if targets.len() != batch.n_graphs {
            return Err(Error::Shape(format!(
                "{} targets for {} graphs",
                targets.len(),
                batch.n_graphs
            )));
        }
        let mut rec = self.record(batch, mode)?;
        let tape = &mut rec.tape;
        let y = tape.leaf(Tensor::from_rows(targets.len(), 1, targets.to_vec()));
        let diff = tape.sub(rec.prediction, y);
        let sq = tape.square(diff);
        let loss = tape.mean_all(sq);
        tape.check(loss)?;
        let grads = tape.backward(loss)?;
        Ok(LossOutput {
            loss: tape.value(loss).data()[0],
            predictions: tape.value(rec.prediction).data().to_vec(),
            grads: rec
                .param_vars
                .iter()
                .zip(&self.params)
                .map(|(&v, p)| grads.get_or_zeros(v, &p.value))
                .collect(),
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Argument(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        let reference = Self::new(ckpt.config.clone(), 0)?;
        if reference.params.len() != ckpt.params.len() {
            return Err(Error::Shape("checkpoint parameter list does not match its config".into()));
        }
        for (want, got) in reference.params.iter().zip(&ckpt.params) {
            if want.name != got.name || want.value.shape() != got.value.shape() {
                return Err(Error::Shape(format!(
                    "checkpoint parameter {} {:?} does not match expected {} {:?}",
                    got.name,
                    got.value.shape(),
                    want.name,
                    want.value.shape()
                )));
            }
            if !got.value.is_finite() {
                return Err(Error::Numeric {
                    op: "checkpoint".into(),
                    reason: format!("parameter {} holds non-finite values", got.name),
                });
            }
        }
        Ok(Self { config: ckpt.config, params: ckpt.params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_json(path, &self.to_checkpoint())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(fsio::read_json(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub params: Vec<Param>,
}
