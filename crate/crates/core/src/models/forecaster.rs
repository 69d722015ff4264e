//! Per-slice load forecaster: one gated recurrent cell (input, forget and output
//! gates with a tanh candidate) unrolled over a window of utilization samples,
//! followed by a linear read-out of the next sample.
//!
//! Inputs and targets are utilization percentages scaled to `[0, 1]` internally.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::slicing::SliceKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    /// Unroll length; 12 samples is two hours at 10-minute sampling.
    pub window: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            window: 12,
            hidden: 16,
            epochs: 200,
            learning_rate: 0.1,
            batch_size: 8,
            seed: 0,
        }
    }
}

/// One training example: `inputs` are consecutive samples, `target` the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastWindow {
    pub inputs: Vec<f64>,
    pub target: f64,
}

impl ForecastWindow {
    /// All sliding windows of length `window` over `trace`.
    pub fn sliding(trace: &[f64], window: usize) -> Vec<ForecastWindow> {
        if trace.len() <= window {
            return Vec::new();
        }
        (0..trace.len() - window)
            .map(|s| ForecastWindow {
                inputs: trace[s..s + window].to_vec(),
                target: trace[s + window],
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterModel {
    hidden: usize,
    window: usize,
    params: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Layout {
    h: usize,
}

impl Layout {
    fn gates(&self) -> usize {
        4 * self.h
    }
    fn wx(&self) -> usize {
        0
    }
    fn wh(&self) -> usize {
        self.gates()
    }
    fn bias(&self) -> usize {
        self.wh() + self.gates() * self.h
    }
    fn wy(&self) -> usize {
        self.bias() + self.gates()
    }
    fn by(&self) -> usize {
        self.wy() + self.h
    }
    fn len(&self) -> usize {
        self.by() + 1
    }
}

/// Per-step values kept for back-propagation through time.
#[derive(Clone)]
struct Step {
    x: f64,
    gates: Vec<f64>, // i, f, g, o after their nonlinearity
    c: Vec<f64>,
    h: Vec<f64>,
}

impl ForecasterModel {
    pub fn zeros(hidden: usize, window: usize) -> Self {
        ForecasterModel {
            hidden,
            window,
            params: vec![0.0; Layout { h: hidden }.len()],
        }
    }

    /// Xavier-uniform weights, zero biases except a forget-gate bias of 1.
    pub fn new(hidden: usize, window: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(hidden, window, &mut rng)
    }

    fn with_rng(hidden: usize, window: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut m = Self::zeros(hidden, window);
        let l = Layout { h: hidden };
        let fill = |slice: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in slice {
                *w = rng.random_range(-r..r);
            }
        };
        fill(&mut m.params[l.wx()..l.wh()], 1, hidden, rng);
        fill(&mut m.params[l.wh()..l.bias()], hidden, hidden, rng);
        fill(&mut m.params[l.wy()..l.by()], hidden, 1, rng);
        for b in &mut m.params[l.bias() + hidden..l.bias() + 2 * hidden] {
            *b = 1.0;
        }
        m
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layout(&self) -> Layout {
        Layout { h: self.hidden }
    }

    /// Unrolls over `inputs` (already scaled) and returns the raw read-out.
    fn run(&self, inputs: &[f64], steps: Option<&mut Vec<Step>>) -> f64 {
        let l = self.layout();
        let h_n = self.hidden;
        let p = &self.params;
        let mut h = vec![0.0; h_n];
        let mut c = vec![0.0; h_n];
        let mut record = steps;
        for &x in inputs {
            let mut gates = vec![0.0; l.gates()];
            for (r, gate) in gates.iter_mut().enumerate() {
                let row = &p[l.wh() + r * h_n..l.wh() + (r + 1) * h_n];
                let a = p[l.wx() + r] * x
                    + p[l.bias() + r]
                    + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
                *gate = if (2 * h_n..3 * h_n).contains(&r) {
                    a.tanh()
                } else {
                    sigmoid(a)
                };
            }
            for j in 0..h_n {
                let (i, f, g, o) = (
                    gates[j],
                    gates[h_n + j],
                    gates[2 * h_n + j],
                    gates[3 * h_n + j],
                );
                c[j] = f * c[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            if let Some(steps) = record.as_deref_mut() {
                steps.push(Step {
                    x,
                    gates,
                    c: c.clone(),
                    h: h.clone(),
                });
            }
        }
        p[l.by()]
            + p[l.wy()..l.by()]
                .iter()
                .zip(&h)
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }

    fn check_window(&self, len: usize) -> Result<(), ModelError> {
        if len != self.window {
            return Err(ModelError::Shape {
                expected: self.window,
                found: len,
            });
        }
        Ok(())
    }

    /// Predicted next-sample utilization in percent, clamped to `[0, 100]`.
    pub fn forecast(&self, recent: &[f64]) -> Result<f64, ModelError> {
        self.check_window(recent.len())?;
        let scaled: Vec<f64> = recent.iter().map(|u| u / 100.0).collect();
        let y = self.run(&scaled, None) * 100.0;
        if !y.is_finite() {
            return Err(ModelError::NonFinite);
        }
        Ok(y.clamp(0.0, 100.0))
    }

    /// Mean squared error (scaled units) over `batch`.
    pub fn loss(&self, batch: &[ForecastWindow]) -> Result<f64, ModelError> {
        let mut total = 0.0;
        for w in batch {
            self.check_window(w.inputs.len())?;
            let scaled: Vec<f64> = w.inputs.iter().map(|u| u / 100.0).collect();
            let e = self.run(&scaled, None) - w.target / 100.0;
            total += e * e;
        }
        let loss = total / batch.len().max(1) as f64;
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(ModelError::NonFinite)
        }
    }

    /// Mean squared error over `batch` with its gradient by back-propagation
    /// through the full unrolled window.
    pub fn loss_and_grad(
        &self,
        batch: &[ForecastWindow],
        grad: &mut [f64],
    ) -> Result<f64, ModelError> {
        assert_eq!(grad.len(), self.params.len());
        grad.fill(0.0);
        let l = self.layout();
        let h_n = self.hidden;
        let p = &self.params;
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut total = 0.0;
        let mut steps = Vec::with_capacity(self.window);
        let zeros = vec![0.0; h_n];
        let mut da = vec![0.0; l.gates()];

        for w in batch {
            self.check_window(w.inputs.len())?;
            steps.clear();
            let scaled: Vec<f64> = w.inputs.iter().map(|u| u / 100.0).collect();
            let y = self.run(&scaled, Some(&mut steps));
            let e = y - w.target / 100.0;
            total += e * e;

            let dy = 2.0 * e * scale;
            let last_h = &steps.last().map_or(&zeros, |s| &s.h);
            grad[l.by()] += dy;
            let mut dh: Vec<f64> = (0..h_n).map(|j| dy * p[l.wy() + j]).collect();
            for j in 0..h_n {
                grad[l.wy() + j] += dy * last_h[j];
            }
            let mut dc = vec![0.0; h_n];

            for t in (0..steps.len()).rev() {
                let s = &steps[t];
                let (h_prev, c_prev) = match t {
                    0 => (&zeros, &zeros),
                    _ => (&steps[t - 1].h, &steps[t - 1].c),
                };
                for j in 0..h_n {
                    let (i, f, g, o) = (
                        s.gates[j],
                        s.gates[h_n + j],
                        s.gates[2 * h_n + j],
                        s.gates[3 * h_n + j],
                    );
                    let tc = s.c[j].tanh();
                    let d_o = dh[j] * tc;
                    let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
                    da[j] = dcj * g * i * (1.0 - i);
                    da[h_n + j] = dcj * c_prev[j] * f * (1.0 - f);
                    da[2 * h_n + j] = dcj * i * (1.0 - g * g);
                    da[3 * h_n + j] = d_o * o * (1.0 - o);
                    dc[j] = dcj * f;
                }
                dh.fill(0.0);
                for (r, &d) in da.iter().enumerate() {
                    grad[l.wx() + r] += d * s.x;
                    grad[l.bias() + r] += d;
                    let row = l.wh() + r * h_n;
                    for k in 0..h_n {
                        grad[row + k] += d * h_prev[k];
                        dh[k] += d * p[row + k];
                    }
                }
            }
        }
        let loss = total * scale;
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(ModelError::NonFinite)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForecasterTraining {
    pub model: ForecasterModel,
    /// Loss over all windows before training, then after each epoch.
    pub loss_history: Vec<f64>,
}

/// Fits a forecaster to one utilization trace (percent per sample) with SGD over
/// shuffled sliding windows.
pub fn train_forecaster(
    trace: &[f64],
    config: &ForecastConfig,
) -> Result<ForecasterTraining, ModelError> {
    if config.window == 0 || config.hidden == 0 || config.batch_size == 0 {
        return Err(ModelError::Config(
            "window, hidden size and batch size must be positive".into(),
        ));
    }
    let needed = 2 * config.window;
    if trace.len() < needed {
        return Err(ModelError::InsufficientData {
            needed,
            found: trace.len(),
        });
    }
    let windows = ForecastWindow::sliding(trace, config.window);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = ForecasterModel::with_rng(config.hidden, config.window, &mut rng);
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut loss_history = vec![model.loss(&windows)?];
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| windows[i].clone()));
            model.loss_and_grad(&batch, &mut grad)?;
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
        }
        loss_history.push(model.loss(&windows)?);
    }
    Ok(ForecasterTraining {
        model,
        loss_history,
    })
}

/// One forecaster per slice.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadForecaster {
    pub models: BTreeMap<SliceKind, ForecasterModel>,
}

impl LoadForecaster {
    /// Next-sample utilization for every slice that has both a model and a window.
    pub fn forecast_load(
        &self,
        recent: &BTreeMap<SliceKind, Vec<f64>>,
    ) -> Result<BTreeMap<SliceKind, f64>, ModelError> {
        let mut out = BTreeMap::new();
        for (kind, model) in &self.models {
            if let Some(window) = recent.get(kind) {
                out.insert(*kind, model.forecast(window)?);
            }
        }
        Ok(out)
    }

    /// Largest window among the models.
    pub fn window(&self) -> usize {
        self.models
            .values()
            .map(ForecasterModel::window)
            .max()
            .unwrap_or(0)
    }
}
