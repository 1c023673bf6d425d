use crate::error::{Error, Result};

pub const SI_SNR_CAP_DB: f64 = 60.0;

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scale-invariant SNR in dB with zero-mean signals, capped at +60 dB.
pub fn si_snr(est: &[f64], reference: &[f64]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::shape(format!(
            "si_snr: estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::invalid("si_snr: empty signals"));
    }
    let s = zero_mean(reference);
    let e = zero_mean(est);
    let ss = dot(&s, &s);
    if ss == 0.0 {
        return Err(Error::Domain("si_snr: reference is zero".into()));
    }
    // ratio of projected to residual energy, computed without forming the
    // projection so that scaling `est` cancels algebraically
    let se = dot(&s, &e);
    let ee = dot(&e, &e);
    let target = se * se / ss;
    let residual = (ee - target).max(0.0);
    if residual == 0.0 {
        return Ok(SI_SNR_CAP_DB);
    }
    Ok((10.0 * (target / residual).log10()).min(SI_SNR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn identity_hits_cap() {
        let x = random(1000, 1);
        assert_eq!(si_snr(&x, &x).unwrap(), SI_SNR_CAP_DB);
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(si_snr(&doubled, &x).unwrap(), SI_SNR_CAP_DB);
    }

    #[test]
    fn orthogonal_noise_at_ten_to_one() {
        // oracle: build noise orthogonal to the zero-mean reference by
        // Gram-Schmidt, then scale it to one tenth of the reference power
        let s = zero_mean(&random(4000, 2));
        let mut n = zero_mean(&random(4000, 3));
        let proj = dot(&n, &s) / dot(&s, &s);
        n.iter_mut().zip(&s).for_each(|(a, b)| *a -= proj * b);
        let g = (dot(&s, &s) / (10.0 * dot(&n, &n))).sqrt();
        let est: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + g * b).collect();
        let v = si_snr(&est, &s).unwrap();
        assert!((v - 10.0).abs() <= 0.1, "{v}");
    }

    #[test]
    fn scale_invariance() {
        let r = random(2000, 4);
        let e: Vec<f64> = r.iter().zip(random(2000, 5)).map(|(a, b)| a + 0.7 * b).collect();
        let base = si_snr(&e, &r).unwrap();
        for c in [0.5, 2.0, 1024.0] {
            let scaled: Vec<f64> = e.iter().map(|v| c * v).collect();
            assert_eq!(si_snr(&scaled, &r).unwrap(), base);
        }
        for c in [0.37, 3.3, 1e-3] {
            let scaled: Vec<f64> = e.iter().map(|v| c * v).collect();
            assert!((si_snr(&scaled, &r).unwrap() - base).abs() <= 1e-9);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(si_snr(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(si_snr(&[1.0, 2.0], &[0.5, 0.5]), Err(Error::Domain(_))));
    }
}
