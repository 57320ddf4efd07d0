//! Teacher-forced training with per-step target sampling, validation-loss
//! tracking and early stopping.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{apply_batch_stats, Graph};
use crate::features::ScreenFeatures;
use crate::model::{Summarizer, TargetSequence};
use crate::optim::{Adam, AdamConfig};
use crate::vocab::Vocabulary;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Hard cap on optimizer steps, if any.
    pub max_steps: Option<usize>,
    /// Momentum of the batch-norm running averages.
    pub bn_momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            adam: AdamConfig::default(),
            max_epochs: 30,
            patience: 5,
            max_steps: None,
            bn_momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.adam.lr >= 0.0) {
            return Err(Error::Config(format!("invalid learning rate {}", self.adam.lr)));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(Error::Config("bn_momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: core::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))
        }
        match key {
            "batch_size" => self.batch_size = num(key, value)?,
            "lr" => self.adam.lr = num(key, value)?,
            "beta1" => self.adam.beta1 = num(key, value)?,
            "beta2" => self.adam.beta2 = num(key, value)?,
            "eps" => self.adam.eps = num(key, value)?,
            "warmup_steps" => self.adam.warmup_steps = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "max_steps" => self.max_steps = Some(num(key, value)?),
            "bn_momentum" => self.bn_momentum = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown training setting {key:?}"))),
        }
        Ok(())
    }
}

/// A featurized screen with its tokenized reference summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: ScreenFeatures,
    pub summaries: Vec<Vec<String>>,
}

/// Uniform choice among a screen's summaries.
pub fn sample_target<'a, T>(summaries: &'a [T], rng: &mut impl Rng) -> &'a T {
    assert!(!summaries.is_empty(), "screen has no summaries");
    &summaries[rng.random_range(0..summaries.len())]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub correct: usize,
    pub total: usize,
}

impl StepStats {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    pub step: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trainer {
    model: Summarizer,
    opt: Adam,
    config: TrainConfig,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(model: Summarizer, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Trainer {
            model,
            opt: Adam::new(config.adam),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
        })
    }

    pub fn model(&self) -> &Summarizer {
        &self.model
    }

    pub fn into_model(self) -> Summarizer {
        self.model
    }

    pub fn steps(&self) -> usize {
        self.opt.steps()
    }

    /// One optimizer step on a batch with explicit targets. `batch_id` is
    /// reported if the loss is not finite.
    pub fn step_with_targets(
        &mut self,
        screens: &[&ScreenFeatures],
        targets: &[&TargetSequence],
        batch_id: usize,
    ) -> Result<StepStats> {
        let dropout_rng = ChaCha8Rng::seed_from_u64(self.rng.random());
        let (grads, stats, bn) = {
            let mut g = Graph::training(self.model.params(), dropout_rng);
            let (loss, correct, total) = self
                .model
                .batch_loss(&mut g, screens, targets)
                .map_err(|e| match e {
                    Error::Numeric(m) => Error::Numeric(format!(
                        "{m} at step {} (batch {batch_id}, first screen {})",
                        self.opt.steps() + 1,
                        screens.first().map_or("?", |s| s.screen_id.as_str())
                    )),
                    other => other,
                })?;
            let value = g.value(loss).item();
            let grads = g.backward(loss);
            let bn = g.take_batch_stats();
            (
                grads,
                StepStats {
                    loss: value,
                    correct,
                    total,
                },
                bn,
            )
        };
        self.opt.step(self.model.params_mut(), &grads);
        apply_batch_stats(self.model.params_mut(), &bn, self.config.bn_momentum);
        Ok(stats)
    }

    /// One optimizer step; each screen's target is sampled from its summaries.
    pub fn step(&mut self, batch: &[&Example], vocab: &Vocabulary, batch_id: usize) -> Result<StepStats> {
        let max_len = self.model.config().max_decode_len;
        let targets: Vec<TargetSequence> = batch
            .iter()
            .map(|e| {
                let s = sample_target(&e.summaries, &mut self.rng);
                TargetSequence::encode(vocab, s, max_len)
            })
            .collect();
        let screens: Vec<&ScreenFeatures> = batch.iter().map(|e| &e.features).collect();
        let trefs: Vec<&TargetSequence> = targets.iter().collect();
        self.step_with_targets(&screens, &trefs, batch_id)
    }

    /// Runs one shuffled pass over `train`. Returns per-step statistics; stops
    /// early if `max_steps` is reached.
    pub fn epoch(&mut self, train: &[Example], vocab: &Vocabulary) -> Result<Vec<StepStats>> {
        if train.is_empty() {
            return Err(Error::Empty("training split"));
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut out = Vec::new();
        for (batch_id, chunk) in order.chunks(self.config.batch_size).enumerate() {
            if self.config.max_steps.is_some_and(|m| self.opt.steps() >= m) {
                break;
            }
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            out.push(self.step(&batch, vocab, batch_id)?);
        }
        Ok(out)
    }
}

/// Inference-mode loss averaged over every (screen, summary) pair.
pub fn evaluation_loss(model: &Summarizer, examples: &[Example], vocab: &Vocabulary) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let max_len = model.config().max_decode_len;
    let mut total = 0.0;
    for e in examples {
        let mut g = Graph::inference(model.params());
        let mem = model.encode_batch(&mut g, &[&e.features])?[0];
        let mut screen_total = 0.0;
        for s in &e.summaries {
            let t = TargetSequence::encode(vocab, s, max_len);
            let logits = model.decode_logits(&mut g, mem, &t.input)?;
            let l = model.loss(&mut g, logits, &t.target)?;
            screen_total += g.value(l).item();
        }
        total += screen_total / e.summaries.len().max(1) as f64;
    }
    let mean = total / examples.len() as f64;
    if !mean.is_finite() {
        return Err(Error::Numeric("non-finite evaluation loss".into()));
    }
    Ok(mean)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation loss.
    pub best: Summarizer,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub curve: Vec<LossPoint>,
}

/// Full training loop with early stopping. `on_improve` is called with the
/// model each time validation loss improves (e.g. to write a checkpoint).
pub fn fit(
    model: Summarizer,
    train: &[Example],
    val: &[Example],
    vocab: &Vocabulary,
    config: &TrainConfig,
    mut on_improve: impl FnMut(&Summarizer, usize, f64) -> Result<()>,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(model, config.clone())?;
    let mut curve = Vec::new();
    let mut best: Option<(Summarizer, f64, usize)> = None;
    let mut since_best = 0;
    let mut epochs_run = 0;
    for epoch in 0..config.max_epochs {
        let stats = trainer.epoch(train, vocab)?;
        epochs_run += 1;
        let start = trainer.steps() - stats.len();
        for (i, s) in stats.iter().enumerate() {
            curve.push(LossPoint {
                step: start + i + 1,
                train_loss: s.loss,
                val_loss: None,
            });
        }
        let val_loss = evaluation_loss(trainer.model(), val, vocab)?;
        if let Some(last) = curve.last_mut() {
            last.val_loss = Some(val_loss);
        }
        if best.as_ref().is_none_or(|b| val_loss < b.1) {
            on_improve(trainer.model(), epoch, val_loss)?;
            best = Some((trainer.model().clone(), val_loss, epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
        if config.max_steps.is_some_and(|m| trainer.steps() >= m) {
            break;
        }
    }
    let (best, best_val_loss, best_epoch) = best.ok_or(Error::Empty("training epochs"))?;
    Ok(TrainOutcome {
        best,
        best_val_loss,
        best_epoch,
        epochs_run,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_summary_is_always_chosen() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = ["only"];
        for _ in 0..10 {
            assert_eq!(*sample_target(&s, &mut rng), "only");
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = [0, 1, 2, 3, 4];
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| *sample_target(&s, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn config_rejects_zero_batch() {
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
