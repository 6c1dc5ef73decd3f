//! Scenario files: a single JSON document describing source, detection
//! chain, and requested analyses, plus its canonical hash.
//!
//! The hash covers the effective configuration (after any seed override), so
//! outputs can always be traced back to the exact inputs that produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{BandpassSpec, DetectorSpec, FiberSpec};
use crate::error::{Error, Result};
use crate::io::sha256_hex;
use crate::optics::Metasurface;
use crate::spdc::{PumpConfig, StatsMode};

/// Schema understood by this crate; files must declare it.
pub const SCHEMA_VERSION: u32 = 1;

fn default_splitter_ratio() -> f64 {
    0.5
}

fn default_rate_calibration() -> f64 {
    crate::constants::DEFAULT_RATE_CALIBRATION
}

fn default_lambda_bin_nm() -> f64 {
    1.0
}

fn default_bin_width_ps() -> f64 {
    5.0
}

fn default_span_ps() -> f64 {
    24_000.0
}

/// One optical element in a photon path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Stage {
    Fiber(FiberSpec),
    Bandpass(BandpassSpec),
}

impl Stage {
    fn validate(&self, field: &str) -> Result<()> {
        match self {
            Stage::Fiber(f) => f.validate(field),
            Stage::Bandpass(b) => b.validate(field),
        }
    }
}

/// One detector arm: optional spectral/dispersive stages, then a detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub channel: String,
    #[serde(default)]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub detector: DetectorSpec,
}

/// Photon path from source to the two detectors: shared stages, a
/// beamsplitter, and two arms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    #[serde(default)]
    pub pre_stages: Vec<Stage>,
    #[serde(default = "default_splitter_ratio")]
    pub splitter_ratio: f64,
    pub arms: Vec<ArmConfig>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            pre_stages: Vec::new(),
            splitter_ratio: 0.5,
            arms: vec![
                ArmConfig {
                    channel: "A".into(),
                    stages: Vec::new(),
                    detector: DetectorSpec::default(),
                },
                ArmConfig {
                    channel: "B".into(),
                    stages: Vec::new(),
                    detector: DetectorSpec::default(),
                },
            ],
        }
    }
}

/// One analysis to run on the recorded streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalysisRequest {
    /// Coincidence delay histogram between the two channels.
    Histogram {
        #[serde(default = "default_bin_width_ps")]
        bin_width_ps: f64,
        #[serde(default = "default_span_ps")]
        span_ps: f64,
    },
    /// Cross-correlation between the two channels of the main pass.
    G2Cross { t_c_ns: f64 },
    /// Autocorrelations of the signal and idler fields, each measured by
    /// splitting one field across both channels.
    G2Auto { t_c_ns: f64 },
    /// Cross/auto correlation ratio test against the classical bound.
    CsTest { t_c_ns: f64 },
    /// Pair spectrum reconstructed from the fiber-dispersed delay histogram.
    Spectrum {
        #[serde(default = "default_lambda_bin_nm")]
        lambda_bin_nm: f64,
        #[serde(default = "default_bin_width_ps")]
        bin_width_ps: f64,
        #[serde(default = "default_span_ps")]
        span_ps: f64,
    },
    /// Entanglement topology implied by the pump set and the resonances.
    Graph {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance_nm: Option<f64>,
    },
}

/// A complete simulation and analysis request.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub stats_mode: StatsMode,
    #[serde(default = "default_rate_calibration")]
    pub rate_calibration: f64,
    pub metasurfaces: Vec<Metasurface>,
    pub pumps: Vec<PumpConfig>,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub analysis: Vec<AnalysisRequest>,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| Error::malformed(path, e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!(
                    "file declares {} but this build reads {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(Error::invalid("name", "must not be empty"));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::invalid(
                "duration_s",
                format!("{} must be positive and finite", self.duration_s),
            ));
        }
        if !(self.rate_calibration > 0.0) || !self.rate_calibration.is_finite() {
            return Err(Error::invalid(
                "rate_calibration",
                format!("{} must be positive and finite", self.rate_calibration),
            ));
        }
        if self.metasurfaces.is_empty() {
            return Err(Error::invalid("metasurfaces", "need at least one"));
        }
        for (i, m) in self.metasurfaces.iter().enumerate() {
            m.validate(&format!("metasurfaces[{i}]"))?;
        }
        if self.pumps.is_empty() {
            return Err(Error::invalid("pumps", "need at least one"));
        }
        for (i, p) in self.pumps.iter().enumerate() {
            p.validate(&format!("pumps[{i}]"))?;
        }
        self.validate_detection()?;
        self.validate_analysis()?;
        Ok(())
    }

    fn validate_detection(&self) -> Result<()> {
        let d = &self.detection;
        if !(d.splitter_ratio > 0.0 && d.splitter_ratio < 1.0) {
            return Err(Error::invalid(
                "detection.splitter_ratio",
                format!("{} must lie strictly between 0 and 1", d.splitter_ratio),
            ));
        }
        if d.arms.len() != 2 {
            return Err(Error::invalid(
                "detection.arms",
                format!("need exactly 2 arms, got {}", d.arms.len()),
            ));
        }
        if d.arms[0].channel == d.arms[1].channel || d.arms.iter().any(|a| a.channel.is_empty())
        {
            return Err(Error::invalid(
                "detection.arms",
                "channels must be distinct and non-empty",
            ));
        }
        for (i, s) in d.pre_stages.iter().enumerate() {
            s.validate(&format!("detection.pre_stages[{i}]"))?;
        }
        for (ai, arm) in d.arms.iter().enumerate() {
            for (si, s) in arm.stages.iter().enumerate() {
                s.validate(&format!("detection.arms[{ai}].stages[{si}]"))?;
            }
            arm.detector
                .validate(&format!("detection.arms[{ai}].detector"))?;
        }
        Ok(())
    }

    fn validate_analysis(&self) -> Result<()> {
        for (i, a) in self.analysis.iter().enumerate() {
            let field = format!("analysis[{i}]");
            match a {
                AnalysisRequest::Histogram {
                    bin_width_ps,
                    span_ps,
                } => validate_histogram_shape(&field, *bin_width_ps, *span_ps)?,
                AnalysisRequest::G2Cross { t_c_ns }
                | AnalysisRequest::G2Auto { t_c_ns }
                | AnalysisRequest::CsTest { t_c_ns } => {
                    if !(*t_c_ns > 0.0) || !t_c_ns.is_finite() {
                        return Err(Error::invalid(
                            &format!("{field}.t_c_ns"),
                            format!("{t_c_ns} must be positive and finite"),
                        ));
                    }
                }
                AnalysisRequest::Spectrum {
                    lambda_bin_nm,
                    bin_width_ps,
                    span_ps,
                } => {
                    if !(*lambda_bin_nm > 0.0) || !lambda_bin_nm.is_finite() {
                        return Err(Error::invalid(
                            &format!("{field}.lambda_bin_nm"),
                            format!("{lambda_bin_nm} must be positive and finite"),
                        ));
                    }
                    validate_histogram_shape(&field, *bin_width_ps, *span_ps)?;
                    if self.pumps.len() != 1 {
                        return Err(Error::invalid(
                            &field,
                            "spectrum reconstruction needs exactly one pump",
                        ));
                    }
                    let has_shared_fiber = self
                        .detection
                        .pre_stages
                        .iter()
                        .any(|s| matches!(s, Stage::Fiber(_)));
                    if !has_shared_fiber {
                        return Err(Error::invalid(
                            &field,
                            "spectrum reconstruction needs a fiber stage in detection.pre_stages",
                        ));
                    }
                }
                AnalysisRequest::Graph { tolerance_nm } => {
                    if let Some(tol) = tolerance_nm {
                        if !(*tol > 0.0) || !tol.is_finite() {
                            return Err(Error::invalid(
                                &format!("{field}.tolerance_nm"),
                                format!("{tol} must be positive and finite"),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Compact canonical JSON of the effective configuration.
    pub fn canonical_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    /// Hash that names this exact configuration in every output.
    pub fn canonical_hash(&self) -> Result<String> {
        Ok(sha256_hex(&self.canonical_json()?))
    }

    /// First dispersive fiber in the shared path, needed to invert delays.
    pub fn shared_fiber(&self) -> Option<&FiberSpec> {
        self.detection.pre_stages.iter().find_map(|s| match s {
            Stage::Fiber(f) => Some(f),
            _ => None,
        })
    }
}

fn validate_histogram_shape(field: &str, bin_width_ps: f64, span_ps: f64) -> Result<()> {
    if !(bin_width_ps > 0.0) || !bin_width_ps.is_finite() {
        return Err(Error::invalid(
            &format!("{field}.bin_width_ps"),
            format!("{bin_width_ps} must be positive and finite"),
        ));
    }
    if !(span_ps > 0.0) || !span_ps.is_finite() {
        return Err(Error::invalid(
            &format!("{field}.span_ps"),
            format!("{span_ps} must be positive and finite"),
        ));
    }
    if span_ps / bin_width_ps + 1e-9 < 100.0 {
        return Err(Error::invalid(
            &format!("{field}.span_ps"),
            format!(
                "span must cover at least 100 bins for a usable baseline, got {:.1}",
                span_ps / bin_width_ps
            ),
        ));
    }
    Ok(())
}
