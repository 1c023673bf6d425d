//! Training losses. Every loss is a mean over all elements (batch, frames,
//! bins) and operates in the compressed-magnitude domain.

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MAG_EPS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight of the RI term in the refinement loss.
    pub mu: f64,
    /// Weight of the mid band in the full-band loss.
    pub alpha: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { mu: 0.5, alpha: 0.5 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu", self.mu), ("alpha", self.alpha)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn check(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::shape(format!(
            "estimate {:?} and target {:?} differ in shape",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Mean squared error over every element.
pub fn mse(est: &Tensor, target: &Tensor) -> Result<Tensor> {
    check(est, target)?;
    Ok((est - target)?.sqr()?.mean_all()?)
}

/// Denoising loss on magnitudes.
pub fn loss_dn(est_mag: &Tensor, target_mag: &Tensor) -> Result<Tensor> {
    mse(est_mag, target_mag)
}

/// Dereverberation loss on magnitudes.
pub fn loss_dr(est_mag: &Tensor, target_mag: &Tensor) -> Result<Tensor> {
    mse(est_mag, target_mag)
}

fn magnitude(re: &Tensor, im: &Tensor) -> Result<Tensor> {
    Ok((re.sqr()? + im.sqr()?)?.affine(1.0, MAG_EPS)?.sqrt()?)
}

/// `μ·L_RI + (1 − μ)·L_mag`, where `L_RI` is the mean squared error over
/// all real and imaginary elements together.
pub fn loss_sr(
    est_re: &Tensor,
    est_im: &Tensor,
    target_re: &Tensor,
    target_im: &Tensor,
    cfg: &LossConfig,
) -> Result<Tensor> {
    check(est_re, est_im)?;
    check(est_re, target_re)?;
    check(target_re, target_im)?;
    let ri = ((mse(est_re, target_re)? + mse(est_im, target_im)?)? * 0.5)?;
    let mag = mse(&magnitude(est_re, est_im)?, &magnitude(target_re, target_im)?)?;
    Ok(((ri * cfg.mu)? + (mag * (1.0 - cfg.mu))?)?)
}

/// `α·L_mid + (1 − α)·L_high`.
pub fn loss_full(
    est_mid: &Tensor,
    est_high: &Tensor,
    target_mid: &Tensor,
    target_high: &Tensor,
    cfg: &LossConfig,
) -> Result<Tensor> {
    let mid = mse(est_mid, target_mid)?;
    let high = mse(est_high, target_high)?;
    Ok(((mid * cfg.alpha)? + (high * (1.0 - cfg.alpha))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};

    fn t(v: &[f64], shape: (usize, usize)) -> Tensor {
        Tensor::from_vec(v.to_vec(), shape, &Device::Cpu).unwrap()
    }

    fn scalar(x: Tensor) -> f64 {
        x.to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap()
    }

    #[test]
    fn zero_at_target_and_constant_offset() {
        let a = t(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], (2, 3));
        assert_eq!(scalar(loss_dn(&a, &a).unwrap()), 0.0);
        let b = (&a + 1.0).unwrap();
        assert!((scalar(loss_dr(&b, &a).unwrap()) - 1.0).abs() < 1e-12);
        assert!(loss_dn(&a, &t(&[0.0; 3], (1, 3))).is_err());
    }

    #[test]
    fn matches_double_loop() {
        let e: [f64; 6] = [0.3, -1.2, 0.8, 2.0, 0.0, -0.4];
        let g = [0.1, 0.5, 0.9, -0.3, 1.1, 0.2];
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..3 {
                acc += (e[i * 3 + j] - g[i * 3 + j]).powi(2);
            }
        }
        let got = scalar(loss_dn(&t(&e, (2, 3)), &t(&g, (2, 3))).unwrap());
        assert!((got - acc / 6.0).abs() <= 1e-9);
    }

    #[test]
    fn conjugate_of_imaginary_target() {
        let ti = [0.5, -1.5, 2.0, 0.25];
        let zeros = t(&[0.0; 4], (2, 2));
        let tgt_im = t(&ti, (2, 2));
        let est_im = tgt_im.neg().unwrap();
        let cfg = LossConfig::default();
        let got = scalar(loss_sr(&zeros, &est_im, &zeros, &tgt_im, &cfg).unwrap());
        let mean_sq = ti.iter().map(|v| v * v).sum::<f64>() / 4.0;
        let ri = 4.0 * mean_sq * 0.5;
        assert!((got - cfg.mu * ri).abs() < 1e-12);
    }

    #[test]
    fn full_loss_weights() {
        let a = t(&[1.0, 2.0], (1, 2));
        let b = t(&[0.0, 0.0], (1, 2));
        let cfg = LossConfig { mu: 0.5, alpha: 1.0 };
        let full = scalar(loss_full(&a, &b, &b, &a, &cfg).unwrap());
        assert_eq!(full, scalar(mse(&a, &b).unwrap()));
        assert!(LossConfig { mu: 1.5, alpha: 0.5 }.validate().is_err());
    }
}
