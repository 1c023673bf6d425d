use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StoiVariant;
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileMetrics {
    pub si_snr_db: f64,
    pub stoi: f64,
    pub lsd_db: f64,
    /// Reserved for externally computed scores; never filled in here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csig: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cbak: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covl: Option<f64>,
}

impl FileMetrics {
    pub fn new(si_snr_db: f64, stoi: f64, lsd_db: f64) -> Self {
        Self {
            si_snr_db,
            stoi,
            lsd_db,
            pesq: None,
            csig: None,
            cbak: None,
            covl: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub si_snr_db: f64,
    pub stoi: f64,
    pub lsd_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub stoi_variant: StoiVariant,
    pub clip_count: usize,
    pub files: BTreeMap<String, FileMetrics>,
    pub mean: Aggregates,
    /// Metrics of the unprocessed mixtures, for reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noisy_mean: Option<Aggregates>,
    pub config_echo: serde_json::Value,
}

fn mean_of<'a>(values: impl Iterator<Item = &'a FileMetrics>) -> Option<Aggregates> {
    let (mut n, mut a, mut b, mut c) = (0usize, 0.0, 0.0, 0.0);
    for m in values {
        n += 1;
        a += m.si_snr_db;
        b += m.stoi;
        c += m.lsd_db;
    }
    (n > 0).then(|| Aggregates {
        si_snr_db: a / n as f64,
        stoi: b / n as f64,
        lsd_db: c / n as f64,
    })
}

impl MetricReport {
    pub fn new(
        files: BTreeMap<String, FileMetrics>,
        stoi_variant: StoiVariant,
        config_echo: serde_json::Value,
    ) -> Result<Self> {
        let mean = mean_of(files.values())
            .ok_or_else(|| Error::invalid("a report needs at least one clip"))?;
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            stoi_variant,
            clip_count: files.len(),
            files,
            mean,
            noisy_mean: None,
            config_echo,
        })
    }

    pub fn with_noisy_reference<'a>(mut self, noisy: impl Iterator<Item = &'a FileMetrics>) -> Self {
        self.noisy_mean = mean_of(noisy);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "report schema version {} is not supported",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
