//! Minibatch SGD over composite graphs.
//!
//! Gradients are reverse-mode derivatives of the batch SSE. Frozen nodes
//! contribute no parameters but still pass adjoints through to their
//! children, so a trainable component below a frozen glue keeps learning.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{rmse, Dataset};
use crate::error::{Error, Result};
use crate::graph::{CompositeGraph, Node, ParamRef};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
}

fn default_shuffle() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    /// `learning_rate = 0` is accepted and makes training a no-op.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::Config(format!(
                "batch size must be in 1..={n}, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Gradient entries aligned with [`CompositeGraph::trainable_params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub params: Vec<ParamRef>,
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn get(&self, p: ParamRef) -> Option<f64> {
        self.params.iter().position(|q| *q == p).map(|i| self.values[i])
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Reverse-mode gradient of `Σ_{i∈batch} (g(x_i) − y_i)²` over every trainable parameter.
pub fn backprop_gradients(g: &CompositeGraph, data: &Dataset, batch: &[usize]) -> Result<Gradients> {
    if let Some(&bad) = batch.iter().find(|&&i| i >= data.n()) {
        return Err(Error::Dimension {
            what: "batch index",
            expected: data.n(),
            got: bad,
        });
    }
    let params = g.trainable_params();
    let mut offset = vec![usize::MAX; g.nodes().len()];
    for (k, p) in params.iter().enumerate() {
        if p.index == 0 {
            offset[p.node] = k;
        }
    }
    let mut values = vec![0.0; params.len()];
    if params.is_empty() {
        return Ok(Gradients { params, values });
    }

    let forward = g.forward(data, batch)?;
    let targets = data.targets();
    let mut adjoint: Vec<Vec<f64>> = vec![Vec::new(); g.nodes().len()];
    adjoint[g.root()] = forward[g.root()]
        .iter()
        .zip(batch)
        .map(|(out, &i)| 2.0 * (out - targets[i]))
        .collect();

    for &node in g.topological().iter().rev() {
        let a = std::mem::take(&mut adjoint[node]);
        if a.is_empty() {
            continue;
        }
        let trainable = offset[node] != usize::MAX;
        match g.node(node) {
            Node::Component(c) => {
                if trainable {
                    let k = offset[node];
                    c.accumulate_gradient(data, batch, &a, &mut values[k..k + c.param_count()])?;
                }
            }
            Node::Glue(glue) => {
                let child_values: Vec<&[f64]> = glue.children.iter().map(|&c| forward[c].as_slice()).collect();
                let mut dz = vec![0.0; batch.len()];
                for b in 0..batch.len() {
                    let z = glue.pre_activation(&child_values, b);
                    dz[b] = a[b] * glue.output_slope(z);
                    if trainable {
                        if let Some(o) = glue.outer {
                            let k = offset[node] + glue.theta.len();
                            values[k] += a[b] * glue.activation.delta(z, o.anchor);
                            values[k + 1] += a[b];
                        }
                    }
                }
                if trainable {
                    let k = offset[node];
                    values[k] += dz.iter().sum::<f64>();
                    for (c, vals) in child_values.iter().enumerate() {
                        values[k + 1 + c] += dz.iter().zip(*vals).map(|(d, v)| d * v).sum::<f64>();
                    }
                }
                for (c, &child) in glue.children.iter().enumerate() {
                    let w = glue.theta[c + 1];
                    let target = &mut adjoint[child];
                    if target.is_empty() {
                        target.resize(batch.len(), 0.0);
                    }
                    for (t, d) in target.iter_mut().zip(&dz) {
                        *t += d * w;
                    }
                }
            }
        }
    }
    Ok(Gradients { params, values })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_sse: f64,
    pub train_rmse: f64,
    pub val_rmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Full-training-set SSE before the first update.
    pub initial_sse: f64,
    /// One record per epoch, measured after that epoch's updates.
    pub epochs: Vec<EpochRecord>,
    pub initial_params: Vec<f64>,
    pub final_params: Vec<f64>,
    pub frozen_checksum_before: String,
    pub frozen_checksum_after: String,
}

impl TrainTrace {
    pub fn final_sse(&self) -> f64 {
        self.epochs.last().map_or(self.initial_sse, |e| e.train_sse)
    }

    pub fn frozen_unchanged(&self) -> bool {
        self.frozen_checksum_before == self.frozen_checksum_after
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |e| Error::csv("<train trace>", e);
        w.write_record(["epoch", "train_sse", "train_rmse", "val_rmse"])
            .map_err(wrap)?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_sse.to_string(),
                e.train_rmse.to_string(),
                e.val_rmse.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<train trace>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Runs `cfg.epochs` epochs of minibatch SGD with simultaneous updates.
///
/// Frozen parameters are never written; the trace records their checksum
/// before and after. A non-finite loss or parameter raises
/// [`Error::Diverged`] with the epoch it occurred in.
pub fn sgd_train(
    g: &mut CompositeGraph,
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainTrace> {
    cfg.validate(train.n())?;
    let frozen_checksum_before = g.frozen_checksum();
    let params = g.trainable_params();
    let initial_params = g.trainable_values();
    let initial_sse = g.sse(train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.n()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            let grad = backprop_gradients(g, train, batch)?;
            for (p, d) in params.iter().zip(&grad.values) {
                let v = g.param_mut(*p);
                *v -= cfg.learning_rate * d;
                if !v.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
            }
        }
        let train_sse = match g.sse(train) {
            Ok(s) if s.is_finite() => s,
            Ok(_) | Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch }),
            Err(e) => return Err(e),
        };
        let val_rmse = match validation {
            Some(v) => Some(rmse(g.sse(v)?, v.n())),
            None => None,
        };
        epochs.push(EpochRecord {
            epoch,
            train_sse,
            train_rmse: rmse(train_sse, train.n()),
            val_rmse,
        });
    }

    Ok(TrainTrace {
        initial_sse,
        epochs,
        initial_params,
        final_params: g.trainable_values(),
        frozen_checksum_before,
        frozen_checksum_after: g.frozen_checksum(),
    })
}

/// How trainable glue layers start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlueInit {
    /// Uniform in `±1/√(fan-in)`.
    Random,
    /// The unit vector selecting the child with the lowest SSE on the data.
    BestChild,
}

/// Re-draws every trainable parameter: components uniform in `±1/√(fan-in)`,
/// glue layers per `glue`. Outer output maps of trainable glues reset to the
/// identity map around their anchor.
pub fn initialize_trainable(g: &mut CompositeGraph, data: &Dataset, glue: GlueInit, rng: &mut impl Rng) -> Result<()> {
    let all: Vec<usize> = (0..data.n()).collect();
    for node in g.topological().to_vec() {
        if let Some(c) = g.component_mut(node) {
            if !c.is_frozen() {
                c.reinitialize(rng);
            }
            continue;
        }
        if g.glue_mut(node).is_some_and(|gl| gl.frozen) {
            continue;
        }
        // Children are final by now: they precede `node` in topological order.
        let values = match glue {
            GlueInit::BestChild => Some(g.forward(data, &all)?),
            GlueInit::Random => None,
        };
        let gl = g.glue_mut(node).expect("non-component node is a glue");
        match &values {
            Some(values) => {
                let targets = data.targets();
                let mut best = (0usize, crate::data::sse(&vec![1.0; data.n()], targets));
                for (c, &child) in gl.children.iter().enumerate() {
                    let loss = crate::data::sse(&values[child], targets);
                    if loss < best.1 {
                        best = (c + 1, loss);
                    }
                }
                gl.theta.iter_mut().for_each(|t| *t = 0.0);
                gl.theta[best.0] = 1.0;
            }
            None => {
                let r = 1.0 / (gl.theta.len() as f64).sqrt();
                for t in &mut gl.theta {
                    *t = rng.random_range(-r..=r);
                }
            }
        }
        if let Some(o) = &mut gl.outer {
            o.scale = 1.0 / gl.activation.derivative(o.anchor);
            o.offset = 0.0;
        }
    }
    Ok(())
}
