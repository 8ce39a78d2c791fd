//! Reference numerics for the pretraining and finetuning objectives.
//!
//! Small, exact implementations meant as a contract for trainers: masked
//! reconstruction loss, mixup with soft labels, soft-target cross-entropy,
//! hand-restricted loss pooling and the cross-attention fusion cascade.

mod fusion;

pub use fusion::{fuse, AttentionWeights, FusionSpec, FusionWeights};

use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::rng::MaskRng;
use crate::tokenset::TokenSet;

const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Ground truth, reconstruction and the masked positions the loss reads.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedPair {
    truth: Vec<f64>,
    recon: Vec<f64>,
    mask: Vec<usize>,
}

impl MaskedPair {
    pub fn new(truth: Vec<f64>, recon: Vec<f64>, mask: impl IntoIterator<Item = usize>) -> Result<Self> {
        if truth.len() != recon.len() {
            return Err(Error::ShapeMismatch(format!(
                "truth has {} values, reconstruction {}",
                truth.len(),
                recon.len()
            )));
        }
        let mut mask: Vec<usize> = mask.into_iter().collect();
        mask.sort_unstable();
        mask.dedup();
        if mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        if let Some(&bad) = mask.iter().find(|&&i| i >= truth.len()) {
            return Err(Error::ShapeMismatch(format!(
                "masked position {bad} outside {} values",
                truth.len()
            )));
        }
        Ok(MaskedPair { truth, recon, mask })
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn recon(&self) -> &[f64] {
        &self.recon
    }

    pub fn mask(&self) -> &[usize] {
        &self.mask
    }

    pub fn with_recon(&self, recon: Vec<f64>) -> Result<Self> {
        MaskedPair::new(self.truth.clone(), recon, self.mask.iter().copied())
    }
}

/// Mean squared error over the masked positions only.
pub fn masked_mse(pair: &MaskedPair) -> f64 {
    let sum: f64 = pair.mask.iter().map(|&p| (pair.truth[p] - pair.recon[p]).powi(2)).sum();
    sum / pair.mask.len() as f64
}

/// Gradient of [`masked_mse`] with respect to the reconstruction.
pub fn masked_mse_grad(pair: &MaskedPair) -> Vec<f64> {
    let mut g = vec![0.0; pair.recon.len()];
    let scale = 2.0 / pair.mask.len() as f64;
    for &p in &pair.mask {
        g[p] = scale * (pair.recon[p] - pair.truth[p]);
    }
    g
}

/// A probability vector over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel(Vec<f64>);

impl SoftLabel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidLabel("no classes".into()));
        }
        if let Some(c) = probs.iter().position(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidLabel(format!("class {c} has weight {}", probs[c])));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidLabel(format!("weights sum to {sum}")));
        }
        Ok(SoftLabel(probs))
    }

    pub fn one_hot(class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::InvalidLabel(format!("class {class} of {classes}")));
        }
        let mut v = vec![0.0; classes];
        v[class] = 1.0;
        Ok(SoftLabel(v))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }
}

/// `x = lambda * x_i + (1 - lambda) * x_j` with the matching label blend.
pub fn mixup(x_i: &[f64], x_j: &[f64], y_i: &SoftLabel, y_j: &SoftLabel, lambda: f64) -> Result<(Vec<f64>, SoftLabel)> {
    if x_i.len() != x_j.len() || y_i.classes() != y_j.classes() {
        return Err(Error::ShapeMismatch("mixup operands differ in length".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::ShapeMismatch(format!("mixup weight {lambda} outside [0, 1]")));
    }
    let blend =
        |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect() };
    let y = blend(y_i.probs(), y_j.probs());
    Ok((blend(x_i, x_j), SoftLabel(y)))
}

/// Draws a mixup weight from `Beta(alpha, alpha)`.
pub fn sample_lambda(alpha: f64, rng: &mut MaskRng) -> Result<f64> {
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::InvalidConfig(format!("mixup alpha {alpha}: {e}")))?;
    Ok(beta.sample(rng.as_rng()))
}

/// Mixup with a weight drawn from `Beta(alpha, alpha)`; returns the weight too.
pub fn mixup_sampled(
    x_i: &[f64],
    x_j: &[f64],
    y_i: &SoftLabel,
    y_j: &SoftLabel,
    alpha: f64,
    rng: &mut MaskRng,
) -> Result<(Vec<f64>, SoftLabel, f64)> {
    let lambda = sample_lambda(alpha, rng)?;
    let (x, y) = mixup(x_i, x_j, y_i, y_j, lambda)?;
    Ok((x, y, lambda))
}

/// `-sum_c y_c log p_c`. Classes with zero label weight are skipped, but
/// every probability must still be positive.
pub fn soft_cross_entropy(label: &SoftLabel, p: &[f64]) -> Result<f64> {
    if p.len() != label.classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities for {} classes",
            p.len(),
            label.classes()
        )));
    }
    if let Some(class) = p.iter().position(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::NonPositiveProbability { class });
    }
    Ok(-label
        .probs()
        .iter()
        .zip(p)
        .filter(|(y, _)| **y > 0.0)
        .map(|(y, p)| y * p.ln())
        .sum::<f64>())
}

/// Shannon entropy of a label, in nats.
pub fn entropy(label: &SoftLabel) -> f64 {
    -label
        .probs()
        .iter()
        .filter(|&&y| y > 0.0)
        .map(|y| y * y.ln())
        .sum::<f64>()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Soft cross-entropy of `softmax(logits)`.
pub fn soft_cross_entropy_logits(label: &SoftLabel, logits: &[f64]) -> Result<f64> {
    soft_cross_entropy(label, &softmax(logits))
}

/// Gradient of [`soft_cross_entropy_logits`] with respect to the logits.
pub fn soft_cross_entropy_logits_grad(label: &SoftLabel, logits: &[f64]) -> Result<Vec<f64>> {
    if logits.len() != label.classes() {
        return Err(Error::ShapeMismatch("logit count differs from class count".into()));
    }
    Ok(softmax(logits).iter().zip(label.probs()).map(|(p, y)| p - y).collect())
}

fn check_loss_len(losses: &[f64], tokens: &TokenSet) -> Result<()> {
    if losses.len() != tokens.universe() {
        return Err(Error::ShapeMismatch(format!(
            "{} token losses for a {}-token grid",
            losses.len(),
            tokens.universe()
        )));
    }
    Ok(())
}

/// Keypoint-stream finetuning loss: mean over hand tokens only.
pub fn keypoint_stream_loss_mask(losses: &[f64], hands: &TokenSet) -> Result<f64> {
    check_loss_len(losses, hands)?;
    if hands.is_empty() {
        return Err(Error::EmptyHandSet);
    }
    Ok(hands.iter().map(|i| losses[i]).sum::<f64>() / hands.len() as f64)
}

/// Video-stream finetuning loss: mean over every token.
pub fn full_frame_loss(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
