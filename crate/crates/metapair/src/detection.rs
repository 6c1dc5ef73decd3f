//! Detection chain: beamsplitter routing, spectral filters, fiber delay and
//! the detector model (efficiency, timing jitter, dark counts, dead time).

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constants::{BANDPASS_ORDER, FIBER_GROUP_INDEX, SPEED_OF_LIGHT_M_PER_S};
use crate::error::{Error, Result};
use crate::spdc::PairEvent;

/// A photon in flight: arrival time, wavelength, and the pair it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photon {
    pub t_s: f64,
    pub lambda_nm: f64,
    pub pair_id: u64,
}

/// Which photons of each pair to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairPhotonSelection {
    Both,
    SignalOnly,
    IdlerOnly,
}

/// Expand pair events into individual photons (signal then idler per pair,
/// both at the emission time). `pair_id` is the event's index in the input.
pub fn pairs_to_photons(events: &[PairEvent], selection: PairPhotonSelection) -> Vec<Photon> {
    let mut photons = Vec::with_capacity(match selection {
        PairPhotonSelection::Both => events.len() * 2,
        _ => events.len(),
    });
    for (i, e) in events.iter().enumerate() {
        if selection != PairPhotonSelection::IdlerOnly {
            photons.push(Photon {
                t_s: e.t_emit_s,
                lambda_nm: e.lambda_s_nm,
                pair_id: i as u64,
            });
        }
        if selection != PairPhotonSelection::SignalOnly {
            photons.push(Photon {
                t_s: e.t_emit_s,
                lambda_nm: e.lambda_i_nm,
                pair_id: i as u64,
            });
        }
    }
    photons
}

/// Route photons through a beamsplitter: each goes to the first arm with
/// probability `ratio`, otherwise the second.
pub fn apply_beamsplitter<R: Rng>(
    photons: &[Photon],
    ratio: f64,
    rng: &mut R,
) -> Result<(Vec<Photon>, Vec<Photon>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!(
            "splitter ratio {ratio} must lie strictly inside (0, 1)"
        )));
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &p in photons {
        if rng.gen::<f64>() < ratio {
            a.push(p);
        } else {
            b.push(p);
        }
    }
    Ok((a, b))
}

/// Flat-top bandpass filter: transmission is a super-Gaussian
/// peak * exp(-ln2 * (2 (lambda - center) / fwhm)^(2 * order)).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandpassSpec {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    #[serde(default = "default_peak_transmission")]
    pub peak_transmission: f64,
}

fn default_peak_transmission() -> f64 {
    1.0
}

impl BandpassSpec {
    pub fn new(center_nm: f64, fwhm_nm: f64) -> Self {
        BandpassSpec {
            center_nm,
            fwhm_nm,
            peak_transmission: 1.0,
        }
    }

    pub fn transmission(&self, lambda_nm: f64) -> f64 {
        let x = 2.0 * (lambda_nm - self.center_nm) / self.fwhm_nm;
        self.peak_transmission
            * (-std::f64::consts::LN_2 * x.powi(2 * BANDPASS_ORDER)).exp()
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.center_nm > 0.0) || !self.center_nm.is_finite() {
            return Err(Error::invalid(
                format!("{field}.center_nm"),
                "filter center must be positive and finite",
            ));
        }
        if !(self.fwhm_nm > 0.0) || !self.fwhm_nm.is_finite() {
            return Err(Error::invalid(
                format!("{field}.fwhm_nm"),
                "filter width must be positive and finite",
            ));
        }
        if !(self.peak_transmission > 0.0 && self.peak_transmission <= 1.0) {
            return Err(Error::invalid(
                format!("{field}.peak_transmission"),
                "peak transmission must lie in (0, 1]",
            ));
        }
        Ok(())
    }
}

/// Bernoulli-filter photons through a bandpass.
pub fn apply_bandpass<R: Rng>(
    photons: &[Photon],
    spec: &BandpassSpec,
    rng: &mut R,
) -> Result<Vec<Photon>> {
    spec.validate("bandpass")?;
    Ok(photons
        .iter()
        .filter(|p| rng.gen::<f64>() < spec.transmission(p.lambda_nm))
        .copied()
        .collect())
}

/// Dispersive fiber spool: constant group delay plus a linear
/// wavelength-dependent term D * L * (lambda - lambda_ref).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub length_km: f64,
    /// Chromatic dispersion in ps / (nm * km).
    #[serde(default = "default_dispersion")]
    pub dispersion_ps_per_nm_km: f64,
    /// Wavelength at which the dispersive term vanishes.
    pub reference_wavelength_nm: f64,
}

fn default_dispersion() -> f64 {
    17.0
}

impl FiberSpec {
    pub fn new(length_km: f64, reference_wavelength_nm: f64) -> Self {
        FiberSpec {
            length_km,
            dispersion_ps_per_nm_km: default_dispersion(),
            reference_wavelength_nm,
        }
    }

    /// Accumulated dispersion D * L in ps per nm.
    pub fn dispersion_ps_per_nm(&self) -> f64 {
        self.dispersion_ps_per_nm_km * self.length_km
    }

    /// Group delay for a photon at `lambda_nm`, in seconds.
    pub fn delay_s(&self, lambda_nm: f64) -> f64 {
        let base = self.length_km * 1e3 * FIBER_GROUP_INDEX / SPEED_OF_LIGHT_M_PER_S;
        let dispersive =
            self.dispersion_ps_per_nm() * (lambda_nm - self.reference_wavelength_nm) * 1e-12;
        base + dispersive
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.length_km > 0.0) || !self.length_km.is_finite() {
            return Err(Error::invalid(
                format!("{field}.length_km"),
                "fiber length must be positive and finite",
            ));
        }
        if !self.dispersion_ps_per_nm_km.is_finite() {
            return Err(Error::invalid(
                format!("{field}.dispersion_ps_per_nm_km"),
                "dispersion must be finite",
            ));
        }
        if !(self.reference_wavelength_nm > 0.0) || !self.reference_wavelength_nm.is_finite() {
            return Err(Error::invalid(
                format!("{field}.reference_wavelength_nm"),
                "reference wavelength must be positive and finite",
            ));
        }
        Ok(())
    }
}

/// Delay every photon by the fiber's wavelength-dependent group delay.
pub fn apply_fiber(photons: &[Photon], fiber: &FiberSpec) -> Result<Vec<Photon>> {
    fiber.validate("fiber")?;
    Ok(photons
        .iter()
        .map(|&p| Photon {
            t_s: p.t_s + fiber.delay_s(p.lambda_nm),
            ..p
        })
        .collect())
}

/// Superconducting nanowire detector model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub jitter_sigma_ps: f64,
    pub dark_count_rate_hz: f64,
    pub dead_time_ns: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            efficiency: 0.8,
            jitter_sigma_ps: 50.0,
            dark_count_rate_hz: 100.0,
            dead_time_ns: 30.0,
        }
    }
}

impl DetectorSpec {
    /// An ideal click detector: unit efficiency, no jitter, darks or dead time.
    pub fn ideal() -> Self {
        DetectorSpec {
            efficiency: 1.0,
            jitter_sigma_ps: 0.0,
            dark_count_rate_hz: 0.0,
            dead_time_ns: 0.0,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.efficiency >= 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid(
                format!("{field}.efficiency"),
                "efficiency must lie in [0, 1]",
            ));
        }
        for (name, v) in [
            ("jitter_sigma_ps", self.jitter_sigma_ps),
            ("dark_count_rate_hz", self.dark_count_rate_hz),
            ("dead_time_ns", self.dead_time_ns),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(
                    format!("{field}.{name}"),
                    "must be non-negative and finite",
                ));
            }
        }
        Ok(())
    }
}

/// A time-ordered stream of detector clicks on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampStream {
    pub channel_id: String,
    pub times_s: Vec<f64>,
    pub duration_s: f64,
}

impl TimestampStream {
    /// Build a stream, enforcing ascending order and the [0, duration] range.
    pub fn new(channel_id: impl Into<String>, times_s: Vec<f64>, duration_s: f64) -> Result<Self> {
        let channel_id = channel_id.into();
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(Error::Domain(format!(
                "stream duration {duration_s} s must be positive and finite"
            )));
        }
        for (i, &t) in times_s.iter().enumerate() {
            if !t.is_finite() || t < 0.0 || t > duration_s {
                return Err(Error::Domain(format!(
                    "timestamp {t} at index {i} lies outside [0, {duration_s}]"
                )));
            }
            if i > 0 && t < times_s[i - 1] {
                return Err(Error::UnsortedStream {
                    channel: channel_id,
                    index: i,
                });
            }
        }
        Ok(TimestampStream {
            channel_id,
            times_s,
            duration_s,
        })
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    /// Mean click rate in Hz.
    pub fn rate_hz(&self) -> f64 {
        self.times_s.len() as f64 / self.duration_s
    }
}

/// Detect photons on one channel: Bernoulli efficiency, Gaussian timing
/// jitter, Poisson dark counts, then a non-paralyzable dead-time filter.
/// Clicks that jitter outside [0, duration] are dropped.
pub fn detect<R: Rng>(
    photons: &[Photon],
    spec: &DetectorSpec,
    channel_id: &str,
    duration_s: f64,
    rng: &mut R,
) -> Result<TimestampStream> {
    spec.validate("detector")?;
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::Domain(format!(
            "detection duration {duration_s} s must be positive and finite"
        )));
    }
    let mut clicks = Vec::with_capacity(photons.len());
    for p in photons {
        let survives = rng.gen::<f64>() < spec.efficiency;
        let jitter: f64 = rng.sample(StandardNormal);
        if survives {
            clicks.push(p.t_s + spec.jitter_sigma_ps * 1e-12 * jitter);
        }
    }
    let expected_darks = spec.dark_count_rate_hz * duration_s;
    if expected_darks > 0.0 {
        let n_dark = Poisson::new(expected_darks)
            .map_err(|e| Error::Domain(format!("dark count rate: {e}")))?
            .sample(rng) as u64;
        for _ in 0..n_dark {
            clicks.push(rng.gen::<f64>() * duration_s);
        }
    }
    clicks.sort_unstable_by(f64::total_cmp);

    let dead_s = spec.dead_time_ns * 1e-9;
    let mut times = Vec::with_capacity(clicks.len());
    let mut last_kept = f64::NEG_INFINITY;
    for t in clicks {
        if t < 0.0 || t > duration_s {
            continue;
        }
        if t - last_kept >= dead_s {
            times.push(t);
            last_kept = t;
        }
    }
    TimestampStream::new(channel_id, times, duration_s)
}
