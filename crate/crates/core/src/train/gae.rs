//! Generalised advantage estimation over one agent's decision sequence.

use crate::{Error, Result};

/// Advantages and returns for a sequence ordered by decision index.
///
/// `last_value` bootstraps the step after the final one when that step is
/// not terminal.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{n} rewards, {} values, {} done flags",
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![0.0; n];
    let mut next_value = last_value;
    let mut next_advantage = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        advantages[t] = delta + gamma * lambda * live * next_advantage;
        next_value = values[t];
        next_advantage = advantages[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

/// Shifts and scales to mean 0 and standard deviation 1. A constant input
/// becomes all zeros.
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    if values.is_empty() {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = if std > 1e-12 { (*v - mean) / std } else { 0.0 };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let (a, r) = compute_gae(&[1.0], &[0.0], &[true], 0.0, 0.99, 0.95).unwrap();
        assert_eq!((a[0], r[0]), (1.0, 1.0));
        let (a, _) = compute_gae(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 0.0, 0.99, 0.95).unwrap();
        assert!((a[0] - 1.9405).abs() < 1e-12 && a[1] == 1.0);
        let (a, _) = compute_gae(&[0.0; 4], &[0.0; 4], &[false, false, false, true], 0.0, 0.99, 0.95).unwrap();
        assert!(a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bootstrap_only_applies_to_live_tails() {
        let (a, _) = compute_gae(&[0.0], &[0.0], &[false], 2.0, 0.5, 0.95).unwrap();
        assert_eq!(a[0], 1.0);
        let (a, _) = compute_gae(&[0.0], &[0.0], &[true], 2.0, 0.5, 0.95).unwrap();
        assert_eq!(a[0], 0.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(compute_gae(&[1.0, 2.0], &[0.0], &[true, true], 0.0, 0.99, 0.95).is_err());
    }

    #[test]
    fn normalization() {
        let mut v = vec![1.0, 2.0, 3.0];
        normalize(&mut v);
        assert!(v.iter().sum::<f64>().abs() < 1e-12);
        assert!((v.iter().map(|x| x * x).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        let mut c = vec![4.0; 3];
        normalize(&mut c);
        assert_eq!(c, vec![0.0; 3]);
    }
}
