//! JSON run description for custom training.
//!
//! ```json
//! {
//!   "network": {"random": {"input_width": 1, "layers": [{"width": 4, "activation": "tan_sigmoid"},
//!                                                        {"width": 1, "activation": "linear"}],
//!                          "seed": 7, "scale": 0.5}},
//!   "dataset": {"builtin": "table1"},
//!   "set": {"w1_1_1": 0.3},
//!   "trainer": {"mode": "fsdm", "learning_rate": 0.05, "max_iterations": 500}
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::builtin::{
    build_ex5_network, build_fig2_network, build_fig3_dataset, table1_dataset,
};
use crate::harness::io::read_json;
use crate::network::{Activation, Dataset, Layer, Mlp, ParamId, Sample};
use crate::trainer::TrainerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinNetwork {
    /// 1-2-1 log-sigmoid network at its optimum.
    Fig2,
    /// 1-15-1 filter network; the tracked pair starts at 0.
    Ex5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinDataset {
    /// 41 samples of the optimal 1-2-1 network on [−2, 2].
    Fig3,
    /// The 20 filter pairs.
    Table1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerShape {
    pub width: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkSpec {
    Builtin(BuiltinNetwork),
    Explicit(Mlp),
    /// Weights and biases drawn uniformly from [−scale, scale].
    Random {
        input_width: usize,
        layers: Vec<LayerShape>,
        seed: u64,
        scale: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    Builtin(BuiltinDataset),
    Samples(Dataset),
    /// Scalar `(input, target)` pairs.
    Pairs(Vec<(f64, f64)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSpec,
    pub dataset: DatasetSpec,
    /// Parameter values installed after the network is built.
    #[serde(default)]
    pub set: BTreeMap<ParamId, f64>,
    #[serde(default)]
    pub trainer: TrainerConfig,
}

impl NetworkSpec {
    pub fn build(&self) -> Result<Mlp> {
        match self {
            NetworkSpec::Builtin(BuiltinNetwork::Fig2) => Ok(build_fig2_network(true)),
            NetworkSpec::Builtin(BuiltinNetwork::Ex5) => Ok(build_ex5_network()),
            NetworkSpec::Explicit(m) => Ok(m.clone()),
            NetworkSpec::Random {
                input_width,
                layers,
                seed,
                scale,
            } => random_mlp(*input_width, layers, *seed, *scale),
        }
    }
}

/// Network with every parameter uniform in [−scale, scale].
pub fn random_mlp(input_width: usize, layers: &[LayerShape], seed: u64, scale: f64) -> Result<Mlp> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Config(format!(
            "scale must be finite and ≥ 0, got {scale}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw =
        |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-scale..=scale)).collect() };
    let mut width = input_width;
    let mut built = Vec::with_capacity(layers.len());
    for l in layers {
        built.push(Layer::new(
            width,
            l.width,
            draw(width * l.width),
            draw(l.width),
            l.activation,
        )?);
        width = l.width;
    }
    Mlp::new(input_width, built)
}

impl DatasetSpec {
    pub fn build(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Builtin(BuiltinDataset::Fig3) => Ok(build_fig3_dataset()),
            DatasetSpec::Builtin(BuiltinDataset::Table1) => Ok(table1_dataset()),
            DatasetSpec::Samples(d) => Ok(d.clone()),
            DatasetSpec::Pairs(p) => {
                Dataset::new(p.iter().map(|&(x, y)| Sample::scalar(x, y)).collect())
            }
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Network with `set` applied, dataset, and validated trainer settings.
    pub fn materialize(&self) -> Result<(Mlp, Dataset, TrainerConfig)> {
        let mut mlp = self.network.build()?;
        for (&id, &v) in &self.set {
            mlp.set(id, v)?;
        }
        let data = self.dataset.build()?;
        if data.input_width() != mlp.input_width() || data.target_width() != mlp.output_width() {
            return Err(Error::Config(format!(
                "dataset is {}→{} but the network is {}→{}",
                data.input_width(),
                data.target_width(),
                mlp.input_width(),
                mlp.output_width()
            )));
        }
        self.trainer.validate()?;
        Ok((mlp, data, self.trainer.clone()))
    }
}
