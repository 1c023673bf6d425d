use std::fmt;
use std::str::FromStr;

use candle_core::{DType, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::subnets::{MaskNet, RefineNet};
use crate::error::{Error, Result};
use crate::nn::{apply_multiframe_filter, MaskKind, ParamStore, Scope};

/// Added under the square root whenever a magnitude is differentiated.
pub const MAG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subnet {
    Dn,
    Dr,
    Sr,
    Mf,
    Hf,
}

impl Subnet {
    pub const ALL: [Subnet; 5] = [Subnet::Dn, Subnet::Dr, Subnet::Sr, Subnet::Mf, Subnet::Hf];
    pub const LOW_BAND: [Subnet; 3] = [Subnet::Dn, Subnet::Dr, Subnet::Sr];

    pub fn name(self) -> &'static str {
        match self {
            Subnet::Dn => "dn",
            Subnet::Dr => "dr",
            Subnet::Sr => "sr",
            Subnet::Mf => "mf",
            Subnet::Hf => "hf",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Accepts a single sub-network name or `lf` for the three low-band
    /// networks.
    pub fn parse_group(name: &str) -> Result<Vec<Subnet>> {
        if name.eq_ignore_ascii_case("lf") {
            return Ok(Subnet::LOW_BAND.to_vec());
        }
        Ok(vec![name.parse()?])
    }
}

impl fmt::Display for Subnet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subnet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subnet::ALL
            .into_iter()
            .find(|n| n.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownSubnet(s.to_string()))
    }
}

/// Compressed low-band magnitude with the unit phasor of the noisy
/// spectrum, all `(B, 1, T, F)`.
#[derive(Debug, Clone)]
pub struct BandInput {
    pub mag: Tensor,
    pub cos: Tensor,
    pub sin: Tensor,
}

#[derive(Debug, Clone)]
pub struct LfOutputs {
    pub dn_mag: Tensor,
    pub dr_mag: Tensor,
    pub refined_re: Tensor,
    pub refined_im: Tensor,
}

impl LfOutputs {
    /// `sqrt(re² + im² + ε)` of the refined spectrum.
    pub fn refined_magnitude(&self) -> Result<Tensor> {
        Ok((self.refined_re.sqr()? + self.refined_im.sqr()?)?
            .affine(1.0, MAG_EPS)?
            .sqrt()?)
    }
}

#[derive(Debug, Clone)]
pub struct MaskedBand {
    pub estimate: Tensor,
    pub gain: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub dn: usize,
    pub dr: usize,
    pub sr: usize,
    pub mf: usize,
    pub hf: usize,
}

impl ParamCounts {
    pub fn get(&self, s: Subnet) -> usize {
        match s {
            Subnet::Dn => self.dn,
            Subnet::Dr => self.dr,
            Subnet::Sr => self.sr,
            Subnet::Mf => self.mf,
            Subnet::Hf => self.hf,
        }
    }

    pub fn total(&self) -> usize {
        Subnet::ALL.iter().map(|&s| self.get(s)).sum()
    }

    pub fn low_band(&self) -> usize {
        self.dn + self.dr + self.sr
    }
}

/// The five sub-networks, their parameters and freeze flags.
pub struct DmfModel {
    config: ModelConfig,
    seed: u64,
    stores: Vec<ParamStore>,
    dn: MaskNet,
    dr: MaskNet,
    sr: Option<RefineNet>,
    mf: MaskNet,
    hf: MaskNet,
    frozen: [bool; 5],
}

impl fmt::Debug for DmfModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DmfModel")
            .field("config", &self.config)
            .field("seed", &self.seed)
            .field("frozen", &self.frozen)
            .finish_non_exhaustive()
    }
}

fn subnet_seed(seed: u64, s: Subnet) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(s.index() as u64 + 1)
}

impl DmfModel {
    pub fn new(config: &ModelConfig, seed: u64, dtype: DType) -> Result<Self> {
        config.validate()?;
        let mut stores: Vec<ParamStore> = Subnet::ALL
            .iter()
            .map(|&s| ParamStore::new(subnet_seed(seed, s), dtype))
            .collect();
        let k = config.filter_taps;
        let [dn_s, dr_s, sr_s, mf_s, hf_s] = &mut stores[..] else {
            unreachable!()
        };
        let dn = MaskNet::new(Scope::new(dn_s, ""), config, 1, k, MaskKind::Linear)?;
        dn.pass_through()?;
        let dr = MaskNet::new(Scope::new(dr_s, ""), config, 2, k, MaskKind::Linear)?;
        let sr = if config.use_sr {
            Some(RefineNet::new(Scope::new(sr_s, ""), config, 6)?)
        } else {
            None
        };
        let mf = MaskNet::new(Scope::new(mf_s, ""), config, 2, 1, MaskKind::Sigmoid)?;
        let hf = MaskNet::new(Scope::new(hf_s, ""), config, 3, 1, MaskKind::Sigmoid)?;
        Ok(Self {
            config: config.clone(),
            seed,
            stores,
            dn,
            dr,
            sr,
            mf,
            hf,
            frozen: [false; 5],
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dtype(&self) -> DType {
        self.stores[0].dtype()
    }

    pub fn store(&self, s: Subnet) -> &ParamStore {
        &self.stores[s.index()]
    }

    pub fn vars(&self, s: Subnet) -> Vec<Var> {
        self.store(s).vars()
    }

    pub fn freeze(&mut self, subnets: &[Subnet]) {
        for s in subnets {
            self.frozen[s.index()] = true;
        }
    }

    /// Freezes by name; `lf` expands to the three low-band networks.
    pub fn freeze_named(&mut self, names: &[&str]) -> Result<()> {
        let mut all = Vec::new();
        for n in names {
            all.extend(Subnet::parse_group(n)?);
        }
        self.freeze(&all);
        Ok(())
    }

    pub fn unfreeze_all(&mut self) {
        self.frozen = [false; 5];
    }

    pub fn is_frozen(&self, s: Subnet) -> bool {
        self.frozen[s.index()]
    }

    pub fn frozen(&self) -> Vec<Subnet> {
        Subnet::ALL.into_iter().filter(|&s| self.is_frozen(s)).collect()
    }

    /// Parameters of every unfrozen sub-network.
    pub fn trainable_vars(&self) -> Vec<Var> {
        Subnet::ALL
            .into_iter()
            .filter(|&s| !self.is_frozen(s))
            .flat_map(|s| self.vars(s))
            .collect()
    }

    pub fn count_parameters(&self) -> ParamCounts {
        let n = |s: Subnet| self.store(s).num_params();
        ParamCounts {
            dn: n(Subnet::Dn),
            dr: n(Subnet::Dr),
            sr: n(Subnet::Sr),
            mf: n(Subnet::Mf),
            hf: n(Subnet::Hf),
        }
    }

    pub fn fingerprint(&self, s: Subnet) -> Result<String> {
        self.store(s).fingerprint()
    }

    fn gate(&self, s: Subnet, t: Tensor) -> Tensor {
        if self.is_frozen(s) {
            t.detach()
        } else {
            t
        }
    }

    /// DN-Net alone: multi-frame filtered denoising of the noisy magnitude.
    pub fn dn_forward(&self, input: &BandInput) -> Result<Tensor> {
        let mag = &input.mag;
        let taps = self.dn.forward(mag)?;
        let out = apply_multiframe_filter(&taps, mag, self.config.filter_offsets)?.relu()?;
        Ok(self.gate(Subnet::Dn, out))
    }

    /// DR-Net on top of a DN estimate.
    pub fn dr_forward(&self, input: &BandInput, dn_mag: &Tensor) -> Result<Tensor> {
        let taps = self.dr.forward(&Tensor::cat(&[dn_mag, &input.mag], 1)?)?;
        let out = apply_multiframe_filter(&taps, dn_mag, self.config.filter_offsets)?.relu()?;
        Ok(self.gate(Subnet::Dr, out))
    }

    /// Low-band chain: multi-frame filtered denoising, then
    /// dereverberation, then the complex residual refinement.
    pub fn lf_forward(&self, input: &BandInput) -> Result<LfOutputs> {
        let mag = &input.mag;
        let dn_mag = self.dn_forward(input)?;
        let dr_mag = self.dr_forward(input, &dn_mag)?;

        let dr_re = (&dr_mag * &input.cos)?;
        let dr_im = (&dr_mag * &input.sin)?;
        let (refined_re, refined_im) = match &self.sr {
            Some(sr) => {
                let features = Tensor::cat(
                    &[
                        &(&dn_mag * &input.cos)?,
                        &(&dn_mag * &input.sin)?,
                        &dr_re,
                        &dr_im,
                        &(mag * &input.cos)?,
                        &(mag * &input.sin)?,
                    ],
                    1,
                )?;
                let (res_re, res_im) = sr.forward(&features)?;
                (
                    self.gate(Subnet::Sr, (&dr_re + res_re)?),
                    self.gate(Subnet::Sr, (&dr_im + res_im)?),
                )
            }
            None => (dr_re, dr_im),
        };
        Ok(LfOutputs {
            dn_mag,
            dr_mag,
            refined_re,
            refined_im,
        })
    }

    fn check_band(&self, name: &str, a: &Tensor, b: &Tensor) -> Result<()> {
        if a.dims() != b.dims() {
            return Err(Error::shape(format!(
                "{name}: {:?} does not match low-band estimate {:?}",
                a.dims(),
                b.dims()
            )));
        }
        Ok(())
    }

    /// Mid band: gain mask conditioned on the low-band estimate.
    pub fn mf_forward(&self, noisy_mid: &Tensor, lf_mag: &Tensor) -> Result<MaskedBand> {
        self.check_band("mid band", noisy_mid, lf_mag)?;
        let gain = self.mf.forward(&Tensor::cat(&[noisy_mid, lf_mag], 1)?)?;
        let estimate = self.gate(Subnet::Mf, (noisy_mid * &gain)?);
        Ok(MaskedBand { estimate, gain })
    }

    /// High band: gain mask conditioned on the low and mid estimates.
    pub fn hf_forward(&self, noisy_high: &Tensor, lf_mag: &Tensor, mf_mag: &Tensor) -> Result<MaskedBand> {
        self.check_band("high band", noisy_high, lf_mag)?;
        self.check_band("mid estimate", mf_mag, lf_mag)?;
        let gain = self
            .hf
            .forward(&Tensor::cat(&[noisy_high, lf_mag, mf_mag], 1)?)?;
        let estimate = self.gate(Subnet::Hf, (noisy_high * &gain)?);
        Ok(MaskedBand { estimate, gain })
    }
}
