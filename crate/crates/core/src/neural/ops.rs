use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::Rng;

pub fn sigmoid(x: f64) -> f64 {
    math::sigmoid(x)
}

/// Max-subtracted softmax.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| math::exp(x - max)).collect();
    let z: f64 = e.iter().sum();
    Ok(e.into_iter().map(|x| x / z).collect())
}

/// Gradient w.r.t. the softmax input given `p = softmax(v)` and `dL/dp`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, di)| pi * (di - inner)).collect()
}

/// Inverted-dropout mask: kept units scaled by `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(pub Vec<f64>);

impl DropoutMask {
    pub fn identity(n: usize) -> Self {
        Self(alloc::vec![1.0; n])
    }

    pub fn apply(&self, v: &mut [f64]) {
        v.iter_mut().zip(&self.0).for_each(|(x, m)| *x *= m);
    }
}

/// Inverted dropout; identity (and no randomness consumed) when
/// `train` is false or `rate` is zero.
pub fn dropout(v: &[f64], rate: f64, rng: &mut Rng, train: bool) -> Result<(Vec<f64>, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!("dropout rate must be in [0,1), got {rate}")));
    }
    if !train || rate == 0.0 {
        return Ok((v.to_vec(), DropoutMask::identity(v.len())));
    }
    let scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..v.len())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { scale })
        .collect();
    let out = v.iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((out, DropoutMask(mask)))
}

/// Sum of squared differences.
pub fn squared_error(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Empty("mse input"));
    }
    if y.len() != y_hat.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            found: y_hat.len(),
        });
    }
    Ok(squared_error(y, y_hat) / y.len() as f64)
}

/// Mean binary cross-entropy of probabilities.
pub fn bce(y: &[f64], p: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Empty("bce input"));
    }
    if y.len() != p.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            found: p.len(),
        });
    }
    let eps = 1e-15;
    let s: f64 = y
        .iter()
        .zip(p)
        .map(|(&t, &q)| {
            let q = q.clamp(eps, 1.0 - eps);
            -(t * math::ln(q) + (1.0 - t) * math::ln(1.0 - q))
        })
        .sum();
    Ok(s / y.len() as f64)
}

/// BCE of `sigmoid(z)` against `y`, computed stably from the logit.
/// Its derivative w.r.t. `z` is `sigmoid(z) - y`.
pub fn bce_with_logit(y: f64, z: f64) -> f64 {
    // softplus(z) - y z
    let softplus = if z > 0.0 {
        z + math::ln(1.0 + math::exp(-z))
    } else {
        math::ln(1.0 + math::exp(z))
    };
    softplus - y * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn softmax_closed_forms() {
        let p = softmax(&[0.7, 0.7, 0.7]).unwrap();
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[0.0, math::ln(2.0)]).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(softmax(&[]).is_err());
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!(p[0] == 1.0 && p[1] >= 0.0);
    }

    #[test]
    fn dropout_modes() {
        let mut r = rng::stream(0, "d");
        let v = [1.0, 2.0, 3.0];
        assert_eq!(dropout(&v, 0.5, &mut r, false).unwrap().0, v.to_vec());
        let (out, mask) = dropout(&[1.0; 1000], 0.5, &mut r, true).unwrap();
        assert!(out.iter().all(|&x| x == 0.0 || x == 2.0));
        let kept = mask.0.iter().filter(|&&m| m > 0.0).count();
        assert!((400..600).contains(&kept));
        assert!(dropout(&v, 1.0, &mut r, true).is_err());
        assert!(dropout(&v, -0.1, &mut r, true).is_err());
    }

    #[test]
    fn losses() {
        assert_eq!(squared_error(&[1.0], &[0.25]), 0.5625);
        assert_eq!(mse(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 0.25);
        let p = sigmoid(0.3);
        assert!((bce(&[1.0], &[p]).unwrap() - bce_with_logit(1.0, 0.3)).abs() < 1e-12);
        assert!((bce(&[0.0], &[p]).unwrap() - bce_with_logit(0.0, 0.3)).abs() < 1e-12);
    }
}
