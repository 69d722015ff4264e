use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::predictor::{Architecture, SlicePredictor};
use super::{LabeledExample, ModelError};
use crate::slicing::SliceKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub train_fraction: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub architecture: Architecture,
    /// Fraction of training-split labels flipped before training. The
    /// held-out split keeps its labels.
    #[serde(default)]
    pub label_noise: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            train_fraction: 0.65,
            epochs: 100,
            learning_rate: 0.05,
            batch_size: 32,
            seed: 0,
            architecture: Architecture::default(),
            label_noise: 0.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(ModelError::Config(format!(
                "train fraction {} is outside (0, 1)",
                self.train_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::Config("learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(ModelError::Config(format!(
                "label noise {} is outside [0, 1]",
                self.label_noise
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedPredictor {
    pub model: SlicePredictor,
    /// Training-split loss before the first epoch, then after each epoch.
    pub loss_history: Vec<f64>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl TrainedPredictor {
    /// (truth, predicted) over the held-out split.
    pub fn held_out_pairs(
        &self,
        examples: &[LabeledExample],
    ) -> Result<Vec<(SliceKind, SliceKind)>, ModelError> {
        self.test_indices
            .iter()
            .map(|&i| {
                let ex = &examples[i];
                Ok((ex.label, self.model.predict(&ex.features)?.slice))
            })
            .collect()
    }

    pub fn held_out_accuracy(&self, examples: &[LabeledExample]) -> Result<f64, ModelError> {
        let pairs = self.held_out_pairs(examples)?;
        let correct = pairs.iter().filter(|(t, p)| t == p).count();
        Ok(correct as f64 / pairs.len().max(1) as f64)
    }
}

/// Per-class split: each class contributes `round(fraction * n_class)` examples
/// to the training side, chosen by a seeded shuffle.
pub fn stratified_split(
    labels: &[SliceKind],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>), ModelError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in SliceKind::CLASSES {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        let cut = (members.len() as f64 * fraction).round() as usize;
        if cut == 0 {
            return Err(ModelError::Stratification(class));
        }
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    if let Some(i) = labels.iter().position(|l| *l == SliceKind::Master) {
        log::warn!("example {i} is labeled master and was left out of both splits");
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Trains the slice predictor with plain minibatch SGD.
///
/// Randomness (split, label noise, initialization, per-epoch shuffles) is drawn
/// in that order from one generator seeded with `config.seed`.
pub fn train_predictor(
    examples: &[LabeledExample],
    config: &TrainConfig,
) -> Result<TrainedPredictor, ModelError> {
    config.validate()?;
    let input_dim = examples
        .first()
        .ok_or(ModelError::EmptyData)?
        .features
        .len();
    if let Some(ex) = examples.iter().find(|e| e.features.len() != input_dim) {
        return Err(ModelError::Shape {
            expected: input_dim,
            found: ex.features.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let labels: Vec<SliceKind> = examples.iter().map(|e| e.label).collect();
    let (train_indices, test_indices) = stratified_split(&labels, config.train_fraction, &mut rng)?;
    let mut train_set: Vec<LabeledExample> =
        train_indices.iter().map(|&i| examples[i].clone()).collect();
    if config.label_noise > 0.0 {
        let flipped = flip_labels(&mut train_set, config.label_noise, &mut rng);
        log::debug!("flipped {flipped} of {} training labels", train_set.len());
    }
    let mut model = SlicePredictor::with_rng(&config.architecture, input_dim, &mut rng)?;

    let mut loss_history = vec![model.loss(&train_set)?];
    let mut grad = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i].clone()));
            model.loss_and_grad(&batch, &mut grad)?;
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
        }
        let loss = model.loss(&train_set)?;
        log::debug!("epoch {}: training loss {loss:.6}", epoch + 1);
        loss_history.push(loss);
    }

    Ok(TrainedPredictor {
        model,
        loss_history,
        train_indices,
        test_indices,
    })
}

/// Replaces each label, with probability `rate`, by a uniformly chosen different class.
/// Returns how many labels changed.
pub fn inject_label_noise(examples: &mut [LabeledExample], rate: f64, seed: u64) -> usize {
    flip_labels(examples, rate, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn flip_labels(examples: &mut [LabeledExample], rate: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut flipped = 0;
    for ex in examples.iter_mut() {
        if rng.random::<f64>() < rate {
            let Some(current) = ex.label.class_index() else {
                continue;
            };
            let shift = rng.random_range(1..3);
            ex.label = SliceKind::from_class_index((current + shift) % 3).expect("three classes");
            flipped += 1;
        }
    }
    flipped
}
