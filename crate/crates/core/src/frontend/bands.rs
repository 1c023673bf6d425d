use serde::{Deserialize, Serialize};

use super::{ComplexSpectrogram, FrontendConfig};
use crate::error::{Error, Result};

/// Inclusive bin range `[first, last]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandRange {
    pub first: usize,
    pub last: usize,
}

impl BandRange {
    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }

    pub fn contains(&self, bin: usize) -> bool {
        bin >= self.first && bin <= self.last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapPolicy {
    /// Overlapped bins take the arithmetic mean of the contributing bands.
    Average,
}

/// Low/mid/high bin ranges. Adjacent ranges share `overlap_bins` bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandLayout {
    pub low_bins: BandRange,
    pub mid_bins: BandRange,
    pub high_bins: BandRange,
    pub overlap: OverlapPolicy,
}

impl Default for BandLayout {
    fn default() -> Self {
        Self::full_band()
    }
}

impl BandLayout {
    /// 481-bin layout with boundaries at 8 kHz (bin 160) and 16 kHz (bin 320),
    /// each shared by the two neighbouring bands: three bands of 161 bins.
    pub fn full_band() -> Self {
        Self::with_boundaries(481, 160, 320, 1).expect("static layout is valid")
    }

    /// Boundaries at 8 kHz and 16 kHz for the given front-end.
    pub fn for_frontend(cfg: &FrontendConfig, overlap_bins: usize) -> Result<Self> {
        let bin_hz = cfg.bin_hz();
        let b1 = (8_000.0 / bin_hz).round() as usize;
        let b2 = (16_000.0 / bin_hz).round() as usize;
        Self::with_boundaries(cfg.num_bins(), b1, b2, overlap_bins)
    }

    /// `low = [0, b1 + w − 1]`, `mid = [b1, b2 + w − 1]`, `high = [b2, F − 1]`.
    pub fn with_boundaries(total_bins: usize, b1: usize, b2: usize, overlap_bins: usize) -> Result<Self> {
        if overlap_bins == 0 {
            return Err(Error::Config("band overlap must be at least one bin".into()));
        }
        let w = overlap_bins;
        if !(b1 > 0 && b1 + w - 1 < b2 && b2 + w - 1 < total_bins) {
            return Err(Error::Config(format!(
                "boundaries {b1}/{b2} with overlap {w} do not fit {total_bins} bins"
            )));
        }
        let layout = Self {
            low_bins: BandRange::new(0, b1 + w - 1),
            mid_bins: BandRange::new(b1, b2 + w - 1),
            high_bins: BandRange::new(b2, total_bins - 1),
            overlap: OverlapPolicy::Average,
        };
        layout.validate(total_bins)?;
        Ok(layout)
    }

    pub fn bands(&self) -> [BandRange; 3] {
        [self.low_bins, self.mid_bins, self.high_bins]
    }

    pub fn total_bins(&self) -> usize {
        self.high_bins.last + 1
    }

    /// Width of the overlap between `low` and `mid` (equal to mid/high).
    pub fn overlap_bins(&self) -> usize {
        self.low_bins.last + 1 - self.mid_bins.first
    }

    /// Fusion weight of `band` (0 = low, 1 = mid, 2 = high) at `bin`.
    pub fn weight(&self, band: usize, bin: usize) -> f64 {
        let bands = self.bands();
        if !bands[band].contains(bin) {
            return 0.0;
        }
        match self.overlap {
            OverlapPolicy::Average => {
                let cover = bands.iter().filter(|b| b.contains(bin)).count();
                1.0 / cover as f64
            }
        }
    }

    pub fn validate(&self, total_bins: usize) -> Result<()> {
        let [low, mid, high] = self.bands();
        if low.is_empty() || mid.is_empty() || high.is_empty() {
            return Err(Error::Config("empty band in layout".into()));
        }
        if low.first != 0 || high.last + 1 != total_bins {
            return Err(Error::shape(format!(
                "layout spans [{}, {}] but the spectrogram has {total_bins} bins",
                low.first, high.last
            )));
        }
        let increasing = mid.first > low.first
            && high.first > low.last
            && high.last > mid.last
            && mid.first <= low.last
            && high.first <= mid.last;
        if !increasing {
            return Err(Error::Config(
                "bands must be increasing and each adjacent pair must overlap".into(),
            ));
        }
        let w1 = low.last + 1 - mid.first;
        let w2 = mid.last + 1 - high.first;
        if w1 != w2 {
            return Err(Error::Config(format!(
                "overlap widths differ: low/mid {w1}, mid/high {w2}"
            )));
        }
        Ok(())
    }
}

/// Splits a full-band spectrogram into contiguous low/mid/high bin slices.
pub fn split_bands(
    spec: &ComplexSpectrogram,
    layout: &BandLayout,
) -> Result<(ComplexSpectrogram, ComplexSpectrogram, ComplexSpectrogram)> {
    layout.validate(spec.bins())?;
    let [low, mid, high] = layout.bands();
    Ok((
        spec.slice_bins(low.first, low.len())?,
        spec.slice_bins(mid.first, mid.len())?,
        spec.slice_bins(high.first, high.len())?,
    ))
}

/// Stacks the bands along frequency, averaging the overlapped bins.
pub fn fuse_bands(
    low: &ComplexSpectrogram,
    mid: &ComplexSpectrogram,
    high: &ComplexSpectrogram,
    layout: &BandLayout,
) -> Result<ComplexSpectrogram> {
    let total = layout.total_bins();
    layout.validate(total)?;
    let frames = low.frames();
    if mid.frames() != frames || high.frames() != frames {
        return Err(Error::shape(format!(
            "band frame counts differ: {frames}/{}/{}",
            mid.frames(),
            high.frames()
        )));
    }
    let parts = [low, mid, high];
    for (range, part) in layout.bands().iter().zip(parts) {
        if part.bins() != range.len() {
            return Err(Error::shape(format!(
                "band has {} bins, layout expects {}",
                part.bins(),
                range.len()
            )));
        }
    }
    let mut out = ComplexSpectrogram::zeros(frames, total);
    for (band, (range, part)) in layout.bands().iter().zip(parts).enumerate() {
        for t in 0..frames {
            for (i, v) in part.frame(t).iter().enumerate() {
                let bin = range.first + i;
                let w = layout.weight(band, bin);
                let cur = out.at(t, bin);
                out.set(t, bin, cur + v * w);
            }
        }
    }
    Ok(out)
}
