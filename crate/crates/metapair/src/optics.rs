//! Resonance and vacuum-field enhancement model for the metasurface.
//!
//! Each high-Q mode contributes a unit-peak Lorentzian enhancement profile
//! scaled by its quality factor and an empirical per-mode scale, weighted by
//! the Malus factor between the pump polarization and the mode axis. The
//! total field enhancement never drops below the unpatterned-film value of 1.

use serde::{Deserialize, Serialize};

use crate::constants::DEFAULT_KAPPA;
use crate::error::{Error, Result};

/// One optical mode of the metasurface.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resonance {
    pub label: String,
    /// Resonance center wavelength in nm.
    #[serde(rename = "center_nm")]
    pub center_wavelength_nm: f64,
    /// Quality factor; the linewidth is center / q.
    #[serde(rename = "q")]
    pub q_factor: f64,
    /// Polarization axis of the mode in degrees.
    #[serde(default)]
    pub pol_axis_deg: f64,
    /// Peak enhancement scale: on-axis peak enhancement is 1 + kappa * q.
    #[serde(rename = "kappa", default = "default_kappa")]
    pub peak_enhancement_scale: f64,
    /// Optional Fano asymmetry parameter for the linear transmission feature.
    /// `None` renders a symmetric Lorentzian dip/peak.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fano_asymmetry: Option<f64>,
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

impl Resonance {
    pub fn new(label: impl Into<String>, center_wavelength_nm: f64, q_factor: f64) -> Self {
        Resonance {
            label: label.into(),
            center_wavelength_nm,
            q_factor,
            pol_axis_deg: 0.0,
            peak_enhancement_scale: DEFAULT_KAPPA,
            fano_asymmetry: None,
        }
    }

    pub fn with_pol_axis(mut self, pol_axis_deg: f64) -> Self {
        self.pol_axis_deg = pol_axis_deg;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.peak_enhancement_scale = kappa;
        self
    }

    /// Full width at half maximum of the mode, center / q, in nm.
    pub fn fwhm_nm(&self) -> f64 {
        self.center_wavelength_nm / self.q_factor
    }

    /// Unit-peak Lorentzian line shape at `lambda_nm`.
    pub fn line_shape(&self, lambda_nm: f64) -> f64 {
        let gamma = self.fwhm_nm() / 2.0;
        let detuning = lambda_nm - self.center_wavelength_nm;
        gamma * gamma / (detuning * detuning + gamma * gamma)
    }

    /// Malus projection of a pump polarized at `pol_deg` onto the mode axis.
    pub fn polarization_coupling(&self, pol_deg: f64) -> f64 {
        let c = (pol_deg - self.pol_axis_deg).to_radians().cos();
        c * c
    }

    /// This mode's additive enhancement contribution.
    pub fn enhancement_term(&self, lambda_nm: f64, pump_pol_deg: f64) -> f64 {
        self.peak_enhancement_scale
            * self.q_factor
            * self.line_shape(lambda_nm)
            * self.polarization_coupling(pump_pol_deg)
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.center_wavelength_nm > 0.0) || !self.center_wavelength_nm.is_finite() {
            return Err(Error::invalid(
                format!("{field}.center_nm"),
                "center wavelength must be positive and finite",
            ));
        }
        if !(self.q_factor > 0.0) || !self.q_factor.is_finite() {
            return Err(Error::invalid(
                format!("{field}.q"),
                "quality factor must be positive and finite",
            ));
        }
        if !(self.peak_enhancement_scale > 0.0) || !self.peak_enhancement_scale.is_finite() {
            return Err(Error::invalid(
                format!("{field}.kappa"),
                "enhancement scale must be positive and finite",
            ));
        }
        if !self.pol_axis_deg.is_finite() {
            return Err(Error::invalid(
                format!("{field}.pol_axis_deg"),
                "polarization axis must be finite",
            ));
        }
        Ok(())
    }
}

/// A resonant nonlinear film: a set of modes plus bulk material parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metasurface {
    pub name: String,
    pub resonances: Vec<Resonance>,
    /// Effective second-order nonlinearity in pm/V.
    #[serde(rename = "chi2", default = "default_chi2")]
    pub chi2_pm_per_v: f64,
    /// Film thickness in nm.
    #[serde(rename = "thickness", default = "default_thickness")]
    pub film_thickness_nm: f64,
}

fn default_chi2() -> f64 {
    450.0
}

fn default_thickness() -> f64 {
    500.0
}

impl Metasurface {
    pub fn new(name: impl Into<String>, resonances: Vec<Resonance>) -> Self {
        Metasurface {
            name: name.into(),
            resonances,
            chi2_pm_per_v: default_chi2(),
            film_thickness_nm: default_thickness(),
        }
    }

    /// Total vacuum-field enhancement at `lambda_nm` for a pump polarized at
    /// `pump_pol_deg`. Bounded below by 1 (the unpatterned film).
    pub fn enhancement(&self, lambda_nm: f64, pump_pol_deg: f64) -> f64 {
        1.0 + self
            .resonances
            .iter()
            .map(|r| r.enhancement_term(lambda_nm, pump_pol_deg))
            .sum::<f64>()
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.resonances.is_empty() {
            return Err(Error::invalid(
                format!("{field}.resonances"),
                "metasurface needs at least one resonance",
            ));
        }
        for (i, r) in self.resonances.iter().enumerate() {
            r.validate(&format!("{field}.resonances[{i}]"))?;
        }
        for i in 0..self.resonances.len() {
            for j in (i + 1)..self.resonances.len() {
                let a = self.resonances[i].center_wavelength_nm;
                let b = self.resonances[j].center_wavelength_nm;
                if (a - b).abs() < 1e-9 {
                    return Err(Error::invalid(
                        format!("{field}.resonances[{j}].center_nm"),
                        "resonance centers must be pairwise distinct",
                    ));
                }
            }
        }
        if !(self.chi2_pm_per_v > 0.0) || !self.chi2_pm_per_v.is_finite() {
            return Err(Error::invalid(
                format!("{field}.chi2"),
                "chi2 must be positive and finite",
            ));
        }
        if !(self.film_thickness_nm > 0.0) || !self.film_thickness_nm.is_finite() {
            return Err(Error::invalid(
                format!("{field}.thickness"),
                "film thickness must be positive and finite",
            ));
        }
        Ok(())
    }
}

const TRANSMISSION_BASE: f64 = 0.50;
const TRANSMISSION_SLOPE_PER_NM: f64 = 1.0e-4;
const TRANSMISSION_FEATURE_AMPLITUDE: f64 = 0.35;

/// Linear transmission spectrum of the metasurface on the given wavelength
/// grid: a gently sloped background with one resonance feature per mode,
/// Fano-asymmetric when the mode carries an asymmetry parameter. Values are
/// clamped to [0, 1]. An empty grid yields an empty spectrum.
pub fn transmission_spectrum(
    surface: &Metasurface,
    lambda_grid_nm: &[f64],
    pump_pol_deg: f64,
) -> Vec<(f64, f64)> {
    lambda_grid_nm
        .iter()
        .map(|&lambda| {
            let background = TRANSMISSION_BASE + TRANSMISSION_SLOPE_PER_NM * (lambda - 1000.0);
            let features: f64 = surface
                .resonances
                .iter()
                .map(|r| {
                    let gamma = r.fwhm_nm() / 2.0;
                    let eps = (lambda - r.center_wavelength_nm) / gamma;
                    let shape = match r.fano_asymmetry {
                        // ((q+eps)^2/(1+eps^2) - 1) / q^2: unit peak at
                        // eps = 1/q, dip of depth 1/q^2 at eps = -q, zero far
                        // from resonance.
                        Some(q) => {
                            let f = (q + eps) * (q + eps) / (1.0 + eps * eps);
                            (f - 1.0) / (q * q)
                        }
                        None => 1.0 / (1.0 + eps * eps),
                    };
                    TRANSMISSION_FEATURE_AMPLITUDE * r.polarization_coupling(pump_pol_deg) * shape
                })
                .sum();
            (lambda, (background + features).clamp(0.0, 1.0))
        })
        .collect()
}
