//! Seven-layer slice classifier: an input layer, five rectified hidden layers and
//! a three-way softmax output.
//!
//! All parameters live in one flat vector; each [`LayerShape`] owns a contiguous
//! span of weights (row-major, `[outputs][inputs]`) followed by its biases.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LabeledExample, ModelError};
use crate::slicing::SliceKind;
use crate::traffic::EncodingBounds;

pub const HIDDEN_LAYERS: usize = 5;
pub const OUTPUT_CLASSES: usize = 3;

/// Geometry of one parametric layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerShape {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// Single-input-channel valid convolution over the feature vector; output is
    /// channel-major, `channels * (length - kernel + 1)` wide.
    Conv1d {
        length: usize,
        channels: usize,
        kernel: usize,
    },
}

impl LayerShape {
    pub fn inputs(&self) -> usize {
        match *self {
            LayerShape::Dense { inputs, .. } => inputs,
            LayerShape::Conv1d { length, .. } => length,
        }
    }

    pub fn outputs(&self) -> usize {
        match *self {
            LayerShape::Dense { outputs, .. } => outputs,
            LayerShape::Conv1d {
                length,
                channels,
                kernel,
            } => channels * (length + 1 - kernel),
        }
    }

    fn weight_count(&self) -> usize {
        match *self {
            LayerShape::Dense { inputs, outputs } => inputs * outputs,
            LayerShape::Conv1d {
                channels, kernel, ..
            } => channels * kernel,
        }
    }

    fn bias_count(&self) -> usize {
        match *self {
            LayerShape::Dense { outputs, .. } => outputs,
            LayerShape::Conv1d { channels, .. } => channels,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    fn is_well_formed(&self) -> bool {
        match *self {
            LayerShape::Dense { inputs, outputs } => inputs > 0 && outputs > 0,
            LayerShape::Conv1d {
                length,
                channels,
                kernel,
            } => channels > 0 && kernel > 0 && kernel <= length,
        }
    }

    fn fans(&self) -> (usize, usize) {
        match *self {
            LayerShape::Dense { inputs, outputs } => (inputs, outputs),
            LayerShape::Conv1d {
                channels, kernel, ..
            } => (kernel, channels),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub channels: usize,
    pub kernel: usize,
}

/// Hidden-layer widths; with `conv` set, the first hidden layer is a 1-D
/// convolution and `hidden[0]` is unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: [usize; HIDDEN_LAYERS],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv: Option<ConvSpec>,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            hidden: [64, 64, 32, 32, 16],
            conv: None,
        }
    }
}

impl Architecture {
    pub fn layers(&self, input_dim: usize) -> Vec<LayerShape> {
        let mut layers = Vec::with_capacity(HIDDEN_LAYERS + 1);
        let mut width = input_dim;
        for (i, &h) in self.hidden.iter().enumerate() {
            let layer = match (i, self.conv) {
                (0, Some(c)) => LayerShape::Conv1d {
                    length: input_dim,
                    channels: c.channels,
                    kernel: c.kernel,
                },
                _ => LayerShape::Dense {
                    inputs: width,
                    outputs: h,
                },
            };
            width = layer.outputs();
            layers.push(layer);
        }
        layers.push(LayerShape::Dense {
            inputs: width,
            outputs: OUTPUT_CLASSES,
        });
        layers
    }
}

/// Descriptor for the seven-layer view of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRole {
    Input { width: usize },
    Hidden { shape: LayerShape },
    Output { shape: LayerShape },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probabilities: [f64; OUTPUT_CLASSES],
    pub slice: SliceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlicePredictor {
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub(crate) fn softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// First index of the maximum; ties resolve to the earliest class.
fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

impl SlicePredictor {
    /// Xavier-uniform weights in `[-r, r]`, `r = sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(arch: &Architecture, input_dim: usize, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(arch, input_dim, &mut rng)
    }

    pub(crate) fn with_rng(
        arch: &Architecture,
        input_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ModelError> {
        let mut model = Self::zeros(arch, input_dim)?;
        let mut offset = 0;
        for layer in &model.layers {
            let (fan_in, fan_out) = layer.fans();
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut model.params[offset..offset + layer.weight_count()] {
                *w = rng.random_range(-r..r);
            }
            offset += layer.param_count();
        }
        Ok(model)
    }

    pub fn zeros(arch: &Architecture, input_dim: usize) -> Result<Self, ModelError> {
        Self::from_parts(arch.layers(input_dim), None)
    }

    /// Builds a model from explicit shapes, validating the layer chain.
    pub fn from_parts(
        layers: Vec<LayerShape>,
        params: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let bad = |msg: String| Err(ModelError::Checkpoint(msg));
        if layers.len() != HIDDEN_LAYERS + 1 {
            return bad(format!(
                "expected {} parametric layers, found {}",
                HIDDEN_LAYERS + 1,
                layers.len()
            ));
        }
        if let Some(l) = layers.iter().find(|l| !l.is_well_formed()) {
            return bad(format!("malformed layer {l:?}"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return bad(format!("layer {:?} does not feed {:?}", pair[0], pair[1]));
            }
        }
        if layers[1..]
            .iter()
            .any(|l| matches!(l, LayerShape::Conv1d { .. }))
        {
            return bad("only the first hidden layer may be convolutional".into());
        }
        if layers[HIDDEN_LAYERS].outputs() != OUTPUT_CLASSES {
            return bad(format!("output layer must have {OUTPUT_CLASSES} units"));
        }
        let count: usize = layers.iter().map(LayerShape::param_count).sum();
        let params = match params {
            Some(p) if p.len() != count => {
                return bad(format!("expected {count} parameters, found {}", p.len()))
            }
            Some(p) if p.iter().any(|x| !x.is_finite()) => {
                return bad("non-finite parameter".into())
            }
            Some(p) => p,
            None => vec![0.0; count],
        };
        Ok(SlicePredictor { layers, params })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.layers
    }

    /// Input, five hidden and output layer, in order.
    pub fn layer_roles(&self) -> Vec<LayerRole> {
        let mut roles = vec![LayerRole::Input {
            width: self.input_dim(),
        }];
        roles.extend(
            self.layers[..HIDDEN_LAYERS]
                .iter()
                .map(|&shape| LayerRole::Hidden { shape }),
        );
        roles.push(LayerRole::Output {
            shape: self.layers[HIDDEN_LAYERS],
        });
        roles
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_dim(&self, features: &[f64]) -> Result<(), ModelError> {
        if features.len() != self.input_dim() {
            return Err(ModelError::Shape {
                expected: self.input_dim(),
                found: features.len(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction, ModelError> {
        self.check_dim(features)?;
        let mut trace = Trace::new(&self.layers);
        self.forward(features, &mut trace);
        let mut probabilities = [0.0; OUTPUT_CLASSES];
        softmax(trace.pre.last().expect("output layer"), &mut probabilities);
        let slice = SliceKind::from_class_index(argmax(&probabilities)).expect("three classes");
        Ok(Prediction {
            probabilities,
            slice,
        })
    }

    fn forward(&self, x: &[f64], trace: &mut Trace) {
        trace.act[0].copy_from_slice(x);
        let mut offset = 0;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (w, rest) = self.params[offset..].split_at(layer.weight_count());
            let b = &rest[..layer.bias_count()];
            let (input, tail) = trace.act.split_at_mut(l + 1);
            let input = &input[l];
            let z = &mut trace.pre[l];
            match *layer {
                LayerShape::Dense { inputs, outputs } => {
                    for o in 0..outputs {
                        let row = &w[o * inputs..(o + 1) * inputs];
                        z[o] = b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                LayerShape::Conv1d {
                    length,
                    channels,
                    kernel,
                } => {
                    let positions = length + 1 - kernel;
                    for c in 0..channels {
                        let taps = &w[c * kernel..(c + 1) * kernel];
                        for p in 0..positions {
                            z[c * positions + p] = b[c]
                                + taps
                                    .iter()
                                    .zip(&input[p..p + kernel])
                                    .map(|(a, b)| a * b)
                                    .sum::<f64>();
                        }
                    }
                }
            }
            if l < last {
                for (a, &zz) in tail[0].iter_mut().zip(z.iter()) {
                    *a = relu(zz);
                }
            }
            offset += layer.param_count();
        }
    }

    /// Mean cross-entropy over `batch`.
    pub fn loss(&self, batch: &[LabeledExample]) -> Result<f64, ModelError> {
        let mut trace = Trace::new(&self.layers);
        let mut probs = [0.0; OUTPUT_CLASSES];
        let mut total = 0.0;
        for ex in batch {
            self.check_dim(&ex.features)?;
            self.forward(&ex.features, &mut trace);
            softmax(trace.pre.last().expect("output layer"), &mut probs);
            total -= probs[label_index(ex.label)?].max(f64::MIN_POSITIVE).ln();
        }
        finite(total / batch.len().max(1) as f64)
    }

    /// Mean cross-entropy over `batch`, writing its gradient into `grad`.
    pub fn loss_and_grad(
        &self,
        batch: &[LabeledExample],
        grad: &mut [f64],
    ) -> Result<f64, ModelError> {
        assert_eq!(grad.len(), self.params.len());
        grad.fill(0.0);
        let mut trace = Trace::new(&self.layers);
        let mut probs = [0.0; OUTPUT_CLASSES];
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut total = 0.0;
        let max_width = self
            .layers
            .iter()
            .map(|l| l.inputs().max(l.outputs()))
            .max()
            .unwrap_or(0);
        let mut delta = vec![0.0; max_width];
        let mut delta_prev = vec![0.0; max_width];

        for ex in batch {
            self.check_dim(&ex.features)?;
            let label = label_index(ex.label)?;
            self.forward(&ex.features, &mut trace);
            softmax(trace.pre.last().expect("output layer"), &mut probs);
            total -= probs[label].max(f64::MIN_POSITIVE).ln();

            // d(CE)/d(logits) = p - onehot
            for k in 0..OUTPUT_CLASSES {
                delta[k] = scale * (probs[k] - if k == label { 1.0 } else { 0.0 });
            }

            let mut end = self.params.len();
            for l in (0..self.layers.len()).rev() {
                let layer = self.layers[l];
                let start = end - layer.param_count();
                let (gw, gb) = grad[start..end].split_at_mut(layer.weight_count());
                let w = &self.params[start..start + layer.weight_count()];
                let input = &trace.act[l];
                let d = &delta[..layer.outputs()];
                let dp = &mut delta_prev[..layer.inputs()];
                dp.fill(0.0);
                match layer {
                    LayerShape::Dense { inputs, outputs } => {
                        for o in 0..outputs {
                            let g = d[o];
                            if g == 0.0 {
                                continue;
                            }
                            gb[o] += g;
                            let row = &w[o * inputs..(o + 1) * inputs];
                            let grow = &mut gw[o * inputs..(o + 1) * inputs];
                            for i in 0..inputs {
                                grow[i] += g * input[i];
                                dp[i] += g * row[i];
                            }
                        }
                    }
                    LayerShape::Conv1d {
                        length,
                        channels,
                        kernel,
                    } => {
                        let positions = length + 1 - kernel;
                        for c in 0..channels {
                            for p in 0..positions {
                                let g = d[c * positions + p];
                                gb[c] += g;
                                for k in 0..kernel {
                                    gw[c * kernel + k] += g * input[p + k];
                                    dp[p + k] += g * w[c * kernel + k];
                                }
                            }
                        }
                    }
                }
                if l > 0 {
                    // through the ReLU of the previous layer
                    for (g, &z) in dp.iter_mut().zip(&trace.pre[l - 1]) {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    std::mem::swap(&mut delta, &mut delta_prev);
                }
                end = start;
            }
        }
        finite(total * scale)
    }

    pub fn save(
        &self,
        path: impl AsRef<Path>,
        bounds: &EncodingBounds,
        seed: u64,
    ) -> Result<(), ModelError> {
        fs::write(path, self.to_checkpoint_string(bounds, seed)?)?;
        Ok(())
    }

    pub fn to_checkpoint_string(
        &self,
        bounds: &EncodingBounds,
        seed: u64,
    ) -> Result<String, ModelError> {
        let ckpt = PredictorCheckpoint {
            format: CHECKPOINT_FORMAT.to_owned(),
            version: CHECKPOINT_VERSION,
            seed,
            bounds: *bounds,
            layers: self.layers.clone(),
            params: self.params.clone(),
        };
        let mut s = serde_json::to_string(&ckpt)?;
        s.push('\n');
        Ok(s)
    }
}

fn label_index(label: SliceKind) -> Result<usize, ModelError> {
    label.class_index().ok_or(ModelError::MasterLabel)
}

fn finite(x: f64) -> Result<f64, ModelError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ModelError::NonFinite)
    }
}

/// Pre-activations and activations for one forward pass.
struct Trace {
    /// act[0] is the input; act[l + 1] is the output of hidden layer l.
    act: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    fn new(layers: &[LayerShape]) -> Self {
        let mut act = vec![vec![0.0; layers[0].inputs()]];
        act.extend(layers.iter().map(|l| vec![0.0; l.outputs()]));
        Trace {
            act,
            pre: layers.iter().map(|l| vec![0.0; l.outputs()]).collect(),
        }
    }
}

pub const CHECKPOINT_FORMAT: &str = "sliceforge-predictor";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk model: JSON with layer shapes, f64 parameters, encoding bounds and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorCheckpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub bounds: EncodingBounds,
    pub layers: Vec<LayerShape>,
    pub params: Vec<f64>,
}

impl PredictorCheckpoint {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let ckpt: PredictorCheckpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        Ok(ckpt)
    }

    pub fn into_model(self) -> Result<(SlicePredictor, EncodingBounds), ModelError> {
        let model = SlicePredictor::from_parts(self.layers, Some(self.params))?;
        Ok((model, self.bounds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::FEATURE_DIM;

    #[test]
    fn seven_layers() {
        let m = SlicePredictor::new(&Architecture::default(), FEATURE_DIM, 0).unwrap();
        let roles = m.layer_roles();
        assert_eq!(roles.len(), 7);
        assert!(matches!(roles[0], LayerRole::Input { width: 32 }));
        assert_eq!(
            roles
                .iter()
                .filter(|r| matches!(r, LayerRole::Hidden { .. }))
                .count(),
            5
        );
        assert!(matches!(
            roles[6],
            LayerRole::Output {
                shape: LayerShape::Dense {
                    inputs: 16,
                    outputs: 3
                }
            }
        ));

        let conv = Architecture {
            conv: Some(ConvSpec {
                channels: 4,
                kernel: 5,
            }),
            ..Architecture::default()
        };
        let m = SlicePredictor::new(&conv, FEATURE_DIM, 0).unwrap();
        assert_eq!(m.layer_roles().len(), 7);
        assert_eq!(m.shapes()[0].outputs(), 4 * 28);
        assert_eq!(
            m.shapes()[1],
            LayerShape::Dense {
                inputs: 112,
                outputs: 64
            }
        );
    }

    #[test]
    fn zero_model_is_uniform_and_breaks_ties_to_embb() {
        let m = SlicePredictor::zeros(&Architecture::default(), FEATURE_DIM).unwrap();
        let p = m.predict(&[0.3; FEATURE_DIM]).unwrap();
        for q in p.probabilities {
            assert!((q - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(p.slice, SliceKind::Embb);
    }

    #[test]
    fn dimension_mismatch() {
        let m = SlicePredictor::zeros(&Architecture::default(), FEATURE_DIM).unwrap();
        assert_eq!(
            m.predict(&[0.0; 31]).unwrap_err(),
            ModelError::Shape {
                expected: 32,
                found: 31
            }
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = SlicePredictor::new(&Architecture::default(), FEATURE_DIM, 42).unwrap();
        let text = m
            .to_checkpoint_string(&EncodingBounds::default(), 42)
            .unwrap();
        let ckpt = PredictorCheckpoint::parse(&text).unwrap();
        assert_eq!(ckpt.seed, 42);
        let (back, bounds) = ckpt.into_model().unwrap();
        assert_eq!(back, m);
        assert_eq!(bounds, EncodingBounds::default());
    }

    #[test]
    fn checkpoint_shape_validation() {
        let m = SlicePredictor::new(&Architecture::default(), FEATURE_DIM, 1).unwrap();
        let mut ckpt = PredictorCheckpoint::parse(
            &m.to_checkpoint_string(&EncodingBounds::default(), 1)
                .unwrap(),
        )
        .unwrap();
        ckpt.params.pop();
        assert!(matches!(
            ckpt.clone().into_model(),
            Err(ModelError::Checkpoint(_))
        ));
        ckpt.params.push(0.0);
        ckpt.layers[2] = LayerShape::Dense {
            inputs: 63,
            outputs: 32,
        };
        assert!(matches!(ckpt.into_model(), Err(ModelError::Checkpoint(_))));
        assert!(matches!(
            PredictorCheckpoint::parse(
                r#"{"format":"other","version":1,"seed":0,"bounds":{"delay_budget_ms":{"min":0,"max":1},"ttl_s":{"min":0,"max":1},"hour_of_day":{"min":0,"max":1},"ue_category":{"min":0,"max":1}},"layers":[],"params":[]}"#
            ),
            Err(ModelError::Checkpoint(_))
        ));
    }
}
