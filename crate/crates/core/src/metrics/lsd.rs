use crate::error::{Error, Result};
use crate::frontend::{BandRange, ComplexSpectrogram};

/// Power floor applied before taking logarithms.
const POWER_FLOOR: f64 = 1e-12;

/// Log-spectral distance in dB: per frame, the RMS over bins of the
/// difference of `10·log10` powers; then the mean over frames. `band`
/// restricts the bins considered.
pub fn lsd(est: &ComplexSpectrogram, reference: &ComplexSpectrogram, band: Option<BandRange>) -> Result<f64> {
    if est.frames() != reference.frames() || est.bins() != reference.bins() {
        return Err(Error::shape(format!(
            "lsd: estimate is {}x{}, reference {}x{}",
            est.frames(),
            est.bins(),
            reference.frames(),
            reference.bins()
        )));
    }
    let band = band.unwrap_or(BandRange::new(0, reference.bins().saturating_sub(1)));
    if band.is_empty() || band.last >= reference.bins() {
        return Err(Error::shape(format!(
            "lsd: band [{}, {}] outside {} bins",
            band.first,
            band.last,
            reference.bins()
        )));
    }
    if reference.frames() == 0 {
        return Err(Error::invalid("lsd: no frames"));
    }
    let db = |c: num_complex::Complex64| 10.0 * c.norm_sqr().max(POWER_FLOOR).log10();
    let mut total = 0.0;
    for t in 0..reference.frames() {
        let (e, r) = (est.frame(t), reference.frame(t));
        let sq: f64 = (band.first..=band.last)
            .map(|f| (db(e[f]) - db(r[f])).powi(2))
            .sum();
        total += (sq / band.len() as f64).sqrt();
    }
    Ok(total / reference.frames() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(seed: u64) -> ComplexSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..7 * 33)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexSpectrogram::from_values(7, 33, v).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let s = random_spec(1);
        assert_eq!(lsd(&s, &s, None).unwrap(), 0.0);
    }

    #[test]
    fn tenfold_power_is_ten_db() {
        let s = random_spec(2);
        let mut louder = s.clone();
        let g = 10f64.sqrt();
        louder.values_mut().iter_mut().for_each(|v| *v *= g);
        assert!((lsd(&s, &louder, None).unwrap() - 10.0).abs() <= 1e-9);
    }

    #[test]
    fn matches_brute_force() {
        let (a, b) = (random_spec(3), random_spec(4));
        let band = BandRange::new(5, 20);
        let mut acc = 0.0;
        for t in 0..7 {
            let mut s = 0.0;
            for f in 5..=20 {
                let pa = a.at(t, f).re.powi(2) + a.at(t, f).im.powi(2);
                let pb = b.at(t, f).re.powi(2) + b.at(t, f).im.powi(2);
                s += (10.0 * pa.log10() - 10.0 * pb.log10()).powi(2);
            }
            acc += (s / 16.0).sqrt();
        }
        let expected = acc / 7.0;
        assert!((lsd(&a, &b, Some(band)).unwrap() - expected).abs() <= 1e-9);
    }

    #[test]
    fn shape_mismatch() {
        let a = random_spec(5);
        let b = ComplexSpectrogram::zeros(7, 32);
        assert!(matches!(lsd(&a, &b, None), Err(Error::Shape(_))));
        assert!(lsd(&a, &a, Some(BandRange::new(0, 40))).is_err());
    }
}
