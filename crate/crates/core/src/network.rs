//! Multilayer perceptron: parameters, activations, forward pass and errors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementwise transfer function of a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// 1/(1 + e^(−x))
    LogSigmoid,
    /// 2/(1 + e^(−2x)) − 1
    TanSigmoid,
    Linear,
}

fn logistic(g: f64) -> f64 {
    // split keeps exp() from overflowing for large |g|
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let z = g.exp();
        z / (1.0 + z)
    }
}

impl Activation {
    pub fn eval(self, g: f64) -> f64 {
        match self {
            Activation::LogSigmoid => logistic(g),
            Activation::TanSigmoid => g.tanh(),
            Activation::Linear => g,
        }
    }

    /// The value and first three derivatives at `g`.
    pub fn derivatives(self, g: f64) -> [f64; 4] {
        match self {
            Activation::LogSigmoid => {
                let s = logistic(g);
                let d1 = s * (1.0 - s);
                [
                    s,
                    d1,
                    d1 * (1.0 - 2.0 * s),
                    d1 * (1.0 - 6.0 * s + 6.0 * s * s),
                ]
            }
            Activation::TanSigmoid => {
                let t = g.tanh();
                let d1 = 1.0 - t * t;
                [t, d1, -2.0 * t * d1, -2.0 * d1 * (1.0 - 3.0 * t * t)]
            }
            Activation::Linear => [g, 1.0, 0.0, 0.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::LogSigmoid => "log_sigmoid",
            Activation::TanSigmoid => "tan_sigmoid",
            Activation::Linear => "linear",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log_sigmoid" | "logsig" => Ok(Activation::LogSigmoid),
            "tan_sigmoid" | "tansig" => Ok(Activation::TanSigmoid),
            "linear" | "purelin" => Ok(Activation::Linear),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The `order`-th derivative (0 ≤ order ≤ 3) of an activation at `g`.
///
/// # Panics
///
/// Panics if `order > 3`.
pub fn activation_eval(kind: Activation, g: f64, order: usize) -> f64 {
    assert!(
        order <= 3,
        "activation derivatives are available up to order 3"
    );
    kind.derivatives(g)[order]
}

/// One layer: `out_width × in_width` weights (row-major), biases, activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerRepr", into = "LayerRepr")]
pub struct Layer {
    in_width: usize,
    out_width: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl TryFrom<LayerRepr> for Layer {
    type Error = Error;

    fn try_from(r: LayerRepr) -> Result<Self> {
        Layer::from_rows(r.weights, r.biases, r.activation)
    }
}

impl From<Layer> for LayerRepr {
    fn from(l: Layer) -> Self {
        LayerRepr {
            activation: l.activation,
            weights: l.weights.chunks(l.in_width).map(<[f64]>::to_vec).collect(),
            biases: l.biases,
        }
    }
}

impl Layer {
    pub fn new(
        in_width: usize,
        out_width: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_width == 0 || out_width == 0 {
            return Err(Error::Config("layer widths must be at least 1".into()));
        }
        if weights.len() != in_width * out_width {
            return Err(Error::shape(
                "layer weights",
                in_width * out_width,
                weights.len(),
            ));
        }
        if biases.len() != out_width {
            return Err(Error::shape("layer biases", out_width, biases.len()));
        }
        if weights.iter().chain(&biases).any(|x| !x.is_finite()) {
            return Err(Error::Config("layer parameters must be finite".into()));
        }
        Ok(Layer {
            in_width,
            out_width,
            weights,
            biases,
            activation,
        })
    }

    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let out_width = rows.len();
        let in_width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != in_width) {
            return Err(Error::shape("weight row", in_width, bad.len()));
        }
        Layer::new(in_width, out_width, rows.concat(), biases, activation)
    }

    /// All-zero layer.
    pub fn zeros(in_width: usize, out_width: usize, activation: Activation) -> Result<Self> {
        Layer::new(
            in_width,
            out_width,
            vec![0.0; in_width * out_width],
            vec![0.0; out_width],
            activation,
        )
    }

    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Weight from input `j` to neuron `i` (0-based).
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.in_width + j]
    }

    #[inline]
    pub fn bias(&self, i: usize) -> f64 {
        self.biases[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn net_input(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.in_width)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// Identifies one scalar parameter. Indices are 1-based, matching the
/// usual w^m_{i,j} / b^m_i notation; textual form is `w<m>_<i>_<j>` or
/// `b<m>_<i>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ParamId {
    Weight {
        layer: usize,
        row: usize,
        col: usize,
    },
    Bias {
        layer: usize,
        row: usize,
    },
}

impl ParamId {
    pub fn weight(layer: usize, row: usize, col: usize) -> Self {
        ParamId::Weight { layer, row, col }
    }

    pub fn bias(layer: usize, row: usize) -> Self {
        ParamId::Bias { layer, row }
    }

    pub fn layer(&self) -> usize {
        match *self {
            ParamId::Weight { layer, .. } | ParamId::Bias { layer, .. } => layer,
        }
    }

    pub fn is_weight(&self) -> bool {
        matches!(self, ParamId::Weight { .. })
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ParamId::Weight { layer, row, col } => write!(f, "w{layer}_{row}_{col}"),
            ParamId::Bias { layer, row } => write!(f, "b{layer}_{row}"),
        }
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "malformed parameter name {s:?} (want w<m>_<i>_<j> or b<m>_<i>)"
            ))
        };
        let (kind, rest) = s.split_at(s.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?);
        let idx: Vec<usize> = rest
            .split('_')
            .map(|p| p.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if idx.contains(&0) {
            return Err(bad());
        }
        match (kind, idx.as_slice()) {
            ("w", &[layer, row, col]) => Ok(ParamId::weight(layer, row, col)),
            ("b", &[layer, row]) => Ok(ParamId::bias(layer, row)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ParamId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ParamId> for String {
    fn from(p: ParamId) -> String {
        p.to_string()
    }
}

/// A feed-forward network; each layer's output is the next layer's input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr", into = "MlpRepr")]
pub struct Mlp {
    input_width: usize,
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct MlpRepr {
    input_width: usize,
    layers: Vec<Layer>,
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRepr) -> Result<Self> {
        Mlp::new(r.input_width, r.layers)
    }
}

impl From<Mlp> for MlpRepr {
    fn from(m: Mlp) -> Self {
        MlpRepr {
            input_width: m.input_width,
            layers: m.layers,
        }
    }
}

impl Mlp {
    pub fn new(input_width: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_width == 0 {
            return Err(Error::Config("input width must be at least 1".into()));
        }
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut width = input_width;
        for layer in &layers {
            if layer.in_width != width {
                return Err(Error::shape("layer input width", width, layer.in_width));
            }
            width = layer.out_width;
        }
        Ok(Mlp {
            input_width,
            layers,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_width)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layer widths ψ^1 … ψ^M.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::out_width).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_id(&self, id: ParamId) -> Result<(usize, usize)> {
        let unknown = || {
            Error::Config(format!(
                "no parameter {id} in a network of widths {:?}",
                self.widths()
            ))
        };
        let layer = id.layer();
        if layer == 0 || layer > self.layers.len() {
            return Err(unknown());
        }
        let l = &self.layers[layer - 1];
        match id {
            ParamId::Weight { row, col, .. }
                if row >= 1 && row <= l.out_width && col >= 1 && col <= l.in_width =>
            {
                Ok((layer - 1, (row - 1) * l.in_width + col - 1))
            }
            ParamId::Bias { row, .. } if row >= 1 && row <= l.out_width => Ok((layer - 1, row - 1)),
            _ => Err(unknown()),
        }
    }

    pub fn get(&self, id: ParamId) -> Result<f64> {
        let (l, k) = self.check_id(id)?;
        Ok(if id.is_weight() {
            self.layers[l].weights[k]
        } else {
            self.layers[l].biases[k]
        })
    }

    pub fn set(&mut self, id: ParamId, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("refusing to set {id} to {value}")));
        }
        let (l, k) = self.check_id(id)?;
        let slot = if id.is_weight() {
            &mut self.layers[l].weights[k]
        } else {
            &mut self.layers[l].biases[k]
        };
        *slot = value;
        Ok(())
    }

    /// Every parameter identifier, weights before biases within each layer.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::with_capacity(self.parameter_count());
        for (m, l) in self.layers.iter().enumerate() {
            for i in 0..l.out_width {
                for j in 0..l.in_width {
                    ids.push(ParamId::weight(m + 1, i + 1, j + 1));
                }
            }
            for i in 0..l.out_width {
                ids.push(ParamId::bias(m + 1, i + 1));
            }
        }
        ids
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Propagates `input` through every layer.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        if input.len() != self.input_width {
            return Err(Error::shape("network input", self.input_width, input.len()));
        }
        let mut net_inputs = Vec::with_capacity(self.layers.len());
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let upstream = outputs.last().map_or(input, Vec::as_slice);
            let g = layer.net_input(upstream);
            let beta = g.iter().map(|&x| layer.activation.eval(x)).collect();
            net_inputs.push(g);
            outputs.push(beta);
        }
        Ok(ForwardTrace {
            input: input.to_vec(),
            net_inputs,
            outputs,
        })
    }
}

/// Per-layer net inputs g^m and outputs β^m from one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    input: Vec<f64>,
    net_inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn depth(&self) -> usize {
        self.outputs.len()
    }

    /// Net input of layer `m` (0-based).
    pub fn net_input(&self, m: usize) -> &[f64] {
        &self.net_inputs[m]
    }

    /// Output of layer `m` (0-based).
    pub fn layer_output(&self, m: usize) -> &[f64] {
        &self.outputs[m]
    }

    /// What layer `m` (0-based) consumed: the network input for the first
    /// layer, the previous layer's output otherwise.
    pub fn layer_input(&self, m: usize) -> &[f64] {
        if m == 0 {
            &self.input
        } else {
            &self.outputs[m - 1]
        }
    }

    pub fn output(&self) -> &[f64] {
        self.outputs.last().map_or(&[], Vec::as_slice)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Sample {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Sample { input, target }
    }

    pub fn scalar(p: f64, q: f64) -> Self {
        Sample::new(vec![p], vec![q])
    }
}

/// Nonempty list of (input, target) pairs with consistent, finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Sample>", into = "Vec<Sample>")]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl TryFrom<Vec<Sample>> for Dataset {
    type Error = Error;

    fn try_from(samples: Vec<Sample>) -> Result<Self> {
        Dataset::new(samples)
    }
}

impl From<Dataset> for Vec<Sample> {
    fn from(d: Dataset) -> Self {
        d.samples
    }
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Config("dataset must not be empty".into()))?;
        let (r, o) = (first.input.len(), first.target.len());
        if r == 0 || o == 0 {
            return Err(Error::Config("sample vectors must not be empty".into()));
        }
        for s in &samples {
            if s.input.len() != r {
                return Err(Error::shape("sample input", r, s.input.len()));
            }
            if s.target.len() != o {
                return Err(Error::shape("sample target", o, s.target.len()));
            }
            if s.input.iter().chain(&s.target).any(|x| !x.is_finite()) {
                return Err(Error::Config("dataset entries must be finite".into()));
            }
        }
        Ok(Dataset { samples })
    }

    /// Dataset of scalar (p, q) pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Dataset::new(
            pairs
                .into_iter()
                .map(|(p, q)| Sample::scalar(p, q))
                .collect(),
        )
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn input_width(&self) -> usize {
        self.samples[0].input.len()
    }

    pub fn target_width(&self) -> usize {
        self.samples[0].target.len()
    }

    pub(crate) fn check_against(&self, mlp: &Mlp) -> Result<()> {
        if self.input_width() != mlp.input_width() {
            return Err(Error::shape(
                "dataset input width",
                mlp.input_width(),
                self.input_width(),
            ));
        }
        if self.target_width() != mlp.output_width() {
            return Err(Error::shape(
                "dataset target width",
                mlp.output_width(),
                self.target_width(),
            ));
        }
        Ok(())
    }
}

/// Σ_j (q_j − β_j)².
pub fn squared_error(output: &[f64], target: &[f64]) -> Result<f64> {
    if output.len() != target.len() {
        return Err(Error::shape("target", output.len(), target.len()));
    }
    Ok(output
        .iter()
        .zip(target)
        .map(|(b, q)| (q - b) * (q - b))
        .sum())
}

/// Average of the per-sample squared errors over the dataset.
pub fn mean_squared_error(mlp: &Mlp, data: &Dataset) -> Result<f64> {
    data.check_against(mlp)?;
    let mut total = 0.0;
    for s in data.samples() {
        let trace = mlp.forward(&s.input)?;
        total += squared_error(trace.output(), &s.target)?;
    }
    Ok(total / data.len() as f64)
}
