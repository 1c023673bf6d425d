use crate::error::{Error, Result};

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("compression beta {beta} outside (0, 1]")))
    }
}

/// Elementwise `mag^beta`. Phase is handled elsewhere and never touched here.
pub fn compress_magnitude(mag: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    mag.iter()
        .map(|&m| {
            if m >= 0.0 {
                Ok(m.powf(beta))
            } else {
                Err(Error::Domain(format!("negative magnitude {m}")))
            }
        })
        .collect()
}

/// Inverse of [`compress_magnitude`]: elementwise `mag^(1/beta)`.
pub fn decompress_magnitude(mag: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let inv = 1.0 / beta;
    mag.iter()
        .map(|&m| {
            if m >= 0.0 {
                Ok(m.powf(inv))
            } else {
                Err(Error::Domain(format!("negative magnitude {m}")))
            }
        })
        .collect()
}
