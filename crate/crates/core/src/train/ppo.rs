//! Clipped-surrogate policy update with shared parameters.

use aam_nn::{Adam, Matrix, Tape};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gae::normalize;
use super::rollout::Transition;
use crate::policy::{BatchInput, Observation, Policy};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub batch: usize,
    pub minibatch: usize,
    pub sgd_iters: usize,
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Active timesteps over which the learning rate decays linearly.
    pub lr_decay_steps: u64,
    /// Rescale the gradient to at most this norm when set.
    #[serde(default)]
    pub max_grad_norm: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            batch: 1200,
            minibatch: 48,
            sgd_iters: 8,
            clip: 0.1,
            gamma: 0.99,
            lambda: 0.95,
            entropy_coef: 1e-2,
            value_coef: 5e-3,
            lr_start: 1e-4,
            lr_end: 1e-5,
            lr_decay_steps: 300_000,
            max_grad_norm: None,
        }
    }
}

impl PpoConfig {
    pub fn learning_rate(&self, steps: u64) -> f64 {
        let frac = if self.lr_decay_steps == 0 {
            1.0
        } else {
            (steps as f64 / self.lr_decay_steps as f64).min(1.0)
        };
        self.lr_start + (self.lr_end - self.lr_start) * frac
    }

    pub fn validate(&self) -> Result<()> {
        if self.minibatch == 0 || !self.batch.is_multiple_of(self.minibatch) {
            return Err(Error::InvalidConfig(format!(
                "minibatch {} must divide batch {}",
                self.minibatch, self.batch
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct UpdateStats {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    pub value_loss: f64,
    pub policy_loss: f64,
    pub minibatches: usize,
}

/// Loss pieces and their gradients for one minibatch.
#[derive(Clone, Debug)]
pub struct MinibatchLoss {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clipped: usize,
    /// d loss / d log-probabilities.
    pub grad_log_probs: Matrix,
    /// d loss / d values.
    pub grad_values: Matrix,
}

/// Evaluates the clipped objective on already computed log-probabilities
/// and values. `advantages` are the (normalised) advantages of `batch`.
pub fn minibatch_loss(
    log_probs: &Matrix,
    values: &Matrix,
    batch: &[&Transition],
    advantages: &[f64],
    config: &PpoConfig,
) -> MinibatchLoss {
    let n = batch.len() as f64;
    let mut grad_log_probs = Matrix::zeros(log_probs.rows(), log_probs.cols());
    let mut grad_values = Matrix::zeros(values.rows(), 1);
    let (mut policy_loss, mut value_loss, mut entropy, mut ratio_sum) = (0.0, 0.0, 0.0, 0.0);
    let mut clipped = 0;
    for (i, (t, &adv)) in batch.iter().zip(advantages).enumerate() {
        let new_lp = log_probs.get(i, t.action);
        let ratio = (new_lp - t.log_prob).exp();
        let bounded = ratio.clamp(1.0 - config.clip, 1.0 + config.clip);
        let (unclipped, clipped_term) = (ratio * adv, bounded * adv);
        ratio_sum += ratio;
        if (ratio - bounded).abs() > 0.0 {
            clipped += 1;
        }
        policy_loss -= unclipped.min(clipped_term) / n;
        if unclipped <= clipped_term {
            // d(-ratio * A)/d log pi = -ratio * A
            grad_log_probs.set(i, t.action, -unclipped / n);
        }

        let mut h = 0.0;
        for c in 0..log_probs.cols() {
            let l = log_probs.get(i, c);
            if l == f64::NEG_INFINITY {
                continue;
            }
            let p = l.exp();
            h -= p * l;
            let g = grad_log_probs.get(i, c) + config.entropy_coef * p * (l + 1.0) / n;
            grad_log_probs.set(i, c, g);
        }
        entropy += h / n;

        let err = values.get(i, 0) - t.ret;
        value_loss += err * err / n;
        grad_values.set(i, 0, 2.0 * config.value_coef * err / n);
    }
    MinibatchLoss {
        loss: policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy,
        policy_loss,
        value_loss,
        entropy,
        mean_ratio: ratio_sum / n,
        clipped,
        grad_log_probs,
        grad_values,
    }
}

/// Runs `sgd_iters` epochs of shuffled minibatch updates on `buffer`.
pub fn ppo_update(
    buffer: &[Transition],
    policy: &mut Policy,
    optimizer: &mut Adam,
    config: &PpoConfig,
    lr: f64,
    rng: &mut impl Rng,
) -> Result<UpdateStats> {
    let mut advantages: Vec<f64> = buffer.iter().map(|t| t.advantage).collect();
    normalize(&mut advantages);
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut stats = UpdateStats::default();
    let mb = config.minibatch.min(buffer.len()).max(1);
    let mut samples = 0usize;
    for epoch in 0..config.sgd_iters {
        order.shuffle(rng);
        for (m, chunk) in order.chunks(mb).enumerate() {
            let batch: Vec<&Transition> = chunk.iter().map(|&i| &buffer[i]).collect();
            let adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
            let observations: Vec<&Observation> = batch.iter().map(|t| &t.obs).collect();
            let input = BatchInput::new(&observations)?;
            let (grads, loss) = {
                let mut tape = Tape::new(&policy.params);
                let pass = policy.forward(&mut tape, &input)?;
                let loss = minibatch_loss(tape.value(pass.log_probs), tape.value(pass.values), &batch, &adv, config);
                if !loss.loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, minibatch: m });
                }
                let grads = tape.backward_seeded(&[
                    (pass.log_probs, loss.grad_log_probs.clone()),
                    (pass.values, loss.grad_values.clone()),
                ]);
                (grads, loss)
            };
            policy.params.zero_grad();
            policy.params.accumulate(&grads, 1.0);
            if let Some(limit) = config.max_grad_norm {
                let norm = policy.params.grad_norm();
                if norm > limit {
                    policy.params.scale_grads(limit / norm);
                }
            }
            optimizer.step(&mut policy.params, lr);

            let k = batch.len() as f64;
            stats.mean_ratio += loss.mean_ratio * k;
            stats.entropy += loss.entropy * k;
            stats.value_loss += loss.value_loss * k;
            stats.policy_loss += loss.policy_loss * k;
            stats.clip_fraction += loss.clipped as f64;
            stats.minibatches += 1;
            samples += batch.len();
        }
    }
    if samples > 0 {
        let s = samples as f64;
        stats.mean_ratio /= s;
        stats.entropy /= s;
        stats.value_loss /= s;
        stats.policy_loss /= s;
        stats.clip_fraction /= s;
    }
    Ok(stats)
}
