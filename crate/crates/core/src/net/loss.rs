use alloc::vec::Vec;

use crate::{Error, Result};

/// Floor applied to a target probability before taking the log.
pub const CE_EPSILON: f64 = 1e-12;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    p
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
    logits.iter().map(|&z| z - lse).collect()
}

/// Softmax over the entries where `mask` is true; masked-out entries get
/// probability exactly zero.
pub fn softmax_masked(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if mask.len() != logits.len() {
        return Err(Error::Dimension {
            context: "softmax mask",
            expected: logits.len(),
            actual: mask.len(),
        });
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyMask);
    }
    let mut p: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&z, &m)| if m { libm::exp(z - max) } else { 0.0 })
        .collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    Ok(p)
}

/// `-ln probs[target]`, with the probability floored at [`CE_EPSILON`].
pub fn cross_entropy(probs: &[f64], target: usize) -> f64 {
    let p = probs[target];
    if p < CE_EPSILON {
        log::warn!("cross-entropy target probability {p} clamped to {CE_EPSILON}");
    }
    -libm::log(p.max(CE_EPSILON))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn masked_softmax_examples() {
        let p = softmax_masked(&[0.0, 0.0, 0.0], &[true, false, true]).unwrap();
        assert_eq!(p, [0.5, 0.0, 0.5]);
        let p = softmax_masked(&[1.0, 2.0, 3.0], &[false, true, true]).unwrap();
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 0.26894).abs() < 1e-5);
        assert!((p[2] - 0.73106).abs() < 1e-5);
        let full = softmax_masked(&[0.3, -1.0, 2.0], &[true; 3]).unwrap();
        let plain = softmax(&[0.3, -1.0, 2.0]);
        for (a, b) in full.iter().zip(&plain) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(softmax_masked(&[1.0, 2.0], &[false, false]), Err(Error::EmptyMask));
    }

    #[test]
    fn cross_entropy_examples() {
        let uniform = vec![1.0 / 50.0; 50];
        assert!((cross_entropy(&uniform, 7) - libm::log(50.0)).abs() < 1e-12);
        assert!((cross_entropy(&uniform, 7) - 3.9120).abs() < 1e-4);
        assert_eq!(cross_entropy(&[0.0, 1.0], 1), 0.0);
        assert!((cross_entropy(&[0.75, 0.25], 1) - 1.386_29).abs() < 1e-5);
        assert!((cross_entropy(&[1.0, 0.0], 1) - 27.631_021).abs() < 1e-5);
    }

    #[test]
    fn log_softmax_agrees_with_softmax() {
        let z = [3.0, -2.0, 0.5, 10.0];
        let p = softmax(&z);
        for (l, q) in log_softmax(&z).iter().zip(&p) {
            assert!((l - libm::log(*q)).abs() < 1e-12);
        }
    }
}
