//! Photon-pair generation from the resonant film.
//!
//! Pair emission is modeled as a spectral density proportional to the product
//! of vacuum-field enhancements at the signal and idler wavelengths, with the
//! idler fixed by energy conservation 1/lambda_s + 1/lambda_i = 1/lambda_p.
//! Event streams are drawn either as a homogeneous Poisson process or with
//! thermal (Bose-Einstein) occupation of coherence-time cells.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::constants::SPEED_OF_LIGHT_M_PER_S;
use crate::error::{Error, Result};
use crate::optics::Metasurface;
use crate::rng::Seeder;

/// Pump beam parameters. `spot_diameter_um` is recorded for provenance; the
/// brightness model works from total power.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    pub wavelength_nm: f64,
    pub power_mw: f64,
    #[serde(default)]
    pub pol_deg: f64,
    #[serde(default = "default_spot")]
    pub spot_diameter_um: f64,
    /// Pumps sharing a group id are mutually phase-coherent; pumps without
    /// one are independent lasers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherent_group_id: Option<String>,
}

fn default_spot() -> f64 {
    140.0
}

impl PumpConfig {
    pub fn new(wavelength_nm: f64, power_mw: f64) -> Self {
        PumpConfig {
            wavelength_nm,
            power_mw,
            pol_deg: 0.0,
            spot_diameter_um: default_spot(),
            coherent_group_id: None,
        }
    }

    pub fn with_pol(mut self, pol_deg: f64) -> Self {
        self.pol_deg = pol_deg;
        self
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.wavelength_nm > 0.0) || !self.wavelength_nm.is_finite() {
            return Err(Error::invalid(
                format!("{field}.wavelength_nm"),
                "pump wavelength must be positive and finite",
            ));
        }
        if !(self.power_mw >= 0.0) || !self.power_mw.is_finite() {
            return Err(Error::invalid(
                format!("{field}.power_mw"),
                "pump power must be non-negative and finite",
            ));
        }
        if !(self.spot_diameter_um > 0.0) || !self.spot_diameter_um.is_finite() {
            return Err(Error::invalid(
                format!("{field}.spot_diameter_um"),
                "spot diameter must be positive and finite",
            ));
        }
        Ok(())
    }
}

/// Idler wavelength partnered with `lambda_s_nm` under a pump at
/// `lambda_p_nm`, from 1/lambda_s + 1/lambda_i = 1/lambda_p. Requires the
/// signal to carry less energy than the pump photon.
pub fn idler_wavelength(lambda_p_nm: f64, lambda_s_nm: f64) -> Result<f64> {
    if !(lambda_p_nm > 0.0) || !lambda_p_nm.is_finite() {
        return Err(Error::Domain(format!(
            "pump wavelength {lambda_p_nm} nm out of range"
        )));
    }
    if !(lambda_s_nm > lambda_p_nm) || !lambda_s_nm.is_finite() {
        return Err(Error::Domain(format!(
            "signal wavelength {lambda_s_nm} nm must exceed the pump wavelength {lambda_p_nm} nm"
        )));
    }
    Ok(1.0 / (1.0 / lambda_p_nm - 1.0 / lambda_s_nm))
}

/// Pump wavelength that phase-matches the pair (lambda_a, lambda_b):
/// lambda_a * lambda_b / (lambda_a + lambda_b).
pub fn pump_for_pair(lambda_a_nm: f64, lambda_b_nm: f64) -> f64 {
    lambda_a_nm * lambda_b_nm / (lambda_a_nm + lambda_b_nm)
}

/// One generated photon pair. By convention `lambda_s_nm <= lambda_i_nm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairEvent {
    pub t_emit_s: f64,
    pub lambda_s_nm: f64,
    pub lambda_i_nm: f64,
    pub pump_index: usize,
    pub metasurface_index: usize,
}

/// Counting statistics of the generated stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StatsMode {
    /// Uncorrelated arrivals (exponential waiting times).
    #[default]
    Poisson,
    /// Bose-Einstein occupation of coherence-time cells: bunched arrivals
    /// with per-cell variance/mean = 1 + mean.
    ThermalCell,
}

/// Pair emission density over wavelength for one pump.
///
/// The grid spans both the signal and idler bands for display; the density at
/// each point is the symmetric product form C * P * chi2^2 * E(lambda) *
/// E(partner(lambda)). Integrating the signal half (lambda <= 2 lambda_p)
/// gives the total pair rate.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralDensity {
    pub pump_index: usize,
    pub pump_wavelength_nm: f64,
    pub lambda_nm: Vec<f64>,
    pub density_per_nm: Vec<f64>,
}

impl SpectralDensity {
    /// Total pair rate in Hz: trapezoidal integral of the density over the
    /// signal half-domain lambda <= 2 lambda_p of this grid.
    pub fn pair_rate_hz(&self) -> f64 {
        let fold = 2.0 * self.pump_wavelength_nm;
        let mut rate = 0.0;
        for i in 1..self.lambda_nm.len() {
            let (a, b) = (self.lambda_nm[i - 1], self.lambda_nm[i]);
            let (ya, yb) = (self.density_per_nm[i - 1], self.density_per_nm[i]);
            if b <= fold {
                rate += 0.5 * (ya + yb) * (b - a);
            } else if a < fold {
                let frac = (fold - a) / (b - a);
                let y_fold = ya + frac * (yb - ya);
                rate += 0.5 * (ya + y_fold) * (fold - a);
            }
        }
        rate
    }

    /// Wavelength of the highest density point.
    pub fn peak_lambda_nm(&self) -> Option<f64> {
        self.lambda_nm
            .iter()
            .zip(&self.density_per_nm)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(l, _)| *l)
    }
}

/// Lower margin of the signal half-domain above the pump line, nm. Pairs with
/// a signal this close to the pump have an idler far in the infrared and
/// carry negligible rate for any resonant configuration.
const SIGNAL_DOMAIN_MARGIN_NM: f64 = 1.0;
const COARSE_GRID_POINTS: usize = 1600;
const SITE_HALF_SPAN_FWHM: f64 = 12.0;
const SITE_POINTS_PER_FWHM: f64 = 40.0;

/// Spectral features (position, width) of the emission for a given pump:
/// every resonance inside the emission domain plus the energy-conservation
/// partner of every resonance, and the degenerate point.
fn emission_sites(surface: &Metasurface, lambda_p_nm: f64) -> Vec<(f64, f64)> {
    let mut sites = Vec::new();
    for r in &surface.resonances {
        if r.center_wavelength_nm <= lambda_p_nm {
            continue;
        }
        sites.push((r.center_wavelength_nm, r.fwhm_nm()));
        if let Ok(partner) = idler_wavelength(lambda_p_nm, r.center_wavelength_nm) {
            let jacobian = (partner / r.center_wavelength_nm).powi(2);
            sites.push((partner, r.fwhm_nm() * jacobian));
        }
    }
    sites.push((2.0 * lambda_p_nm, 2.0));
    sites
}

const SITE_TAIL_GROWTH: f64 = 1.5;

fn build_grid(lo: f64, hi: f64, sites: &[(f64, f64)], coarse: usize) -> Vec<f64> {
    let mut grid = Vec::with_capacity(coarse + sites.len() * 1024);
    let coarse_gap = (hi - lo) / (coarse - 1) as f64;
    for i in 0..coarse {
        grid.push(lo + (hi - lo) * i as f64 / (coarse - 1) as f64);
    }
    for &(pos, width) in sites {
        let half = SITE_HALF_SPAN_FWHM * width;
        let step = width / SITE_POINTS_PER_FWHM;
        let a = (pos - half).max(lo);
        let b = (pos + half).min(hi);
        if b <= a {
            continue;
        }
        let n = ((b - a) / step).ceil() as usize + 1;
        for i in 0..n.min(4096) {
            grid.push(a + (b - a) * i as f64 / (n - 1).max(1) as f64);
        }
        // Geometric shells bridge the line wings out to the coarse spacing;
        // without them the trapezoid from the refined edge to the next
        // coarse point overstates the tail area of very narrow lines.
        let mut offset = half;
        while offset * (SITE_TAIL_GROWTH - 1.0) < coarse_gap && offset < hi - lo {
            offset *= SITE_TAIL_GROWTH;
            for tail in [pos - offset, pos + offset] {
                if tail > lo && tail < hi {
                    grid.push(tail);
                }
            }
        }
    }
    grid.sort_unstable_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    grid
}

fn density_at(
    surface: &Metasurface,
    pump: &PumpConfig,
    calibration: f64,
    lambda_nm: f64,
) -> f64 {
    let partner = match idler_wavelength(pump.wavelength_nm, lambda_nm) {
        Ok(p) => p,
        Err(_) => return 0.0,
    };
    calibration
        * pump.power_mw
        * surface.chi2_pm_per_v
        * surface.chi2_pm_per_v
        * surface.enhancement(lambda_nm, pump.pol_deg)
        * surface.enhancement(partner, pump.pol_deg)
}

/// Pair emission spectral density for one pump over a display grid spanning
/// the signal and idler bands.
pub fn pair_spectral_density(
    surface: &Metasurface,
    pump: &PumpConfig,
    calibration: f64,
) -> Result<SpectralDensity> {
    pair_spectral_density_indexed(surface, pump, 0, calibration)
}

pub fn pair_spectral_density_indexed(
    surface: &Metasurface,
    pump: &PumpConfig,
    pump_index: usize,
    calibration: f64,
) -> Result<SpectralDensity> {
    surface.validate("metasurface")?;
    pump.validate("pump")?;
    check_calibration(calibration)?;
    let lambda_p = pump.wavelength_nm;
    let sites = emission_sites(surface, lambda_p);
    let lo_sites = sites
        .iter()
        .map(|&(p, w)| p - 25.0 * w)
        .fold(f64::INFINITY, f64::min);
    let hi_sites = sites
        .iter()
        .map(|&(p, w)| p + 25.0 * w)
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = (lo_sites - 20.0).max(lambda_p + SIGNAL_DOMAIN_MARGIN_NM);
    let hi = hi_sites + 20.0;
    let grid = build_grid(lo, hi, &sites, 1200);
    let density: Vec<f64> = grid
        .iter()
        .map(|&l| density_at(surface, pump, calibration, l))
        .collect();
    Ok(SpectralDensity {
        pump_index,
        pump_wavelength_nm: lambda_p,
        lambda_nm: grid,
        density_per_nm: density,
    })
}

fn check_calibration(calibration: f64) -> Result<()> {
    if !(calibration > 0.0) || !calibration.is_finite() {
        return Err(Error::Domain(format!(
            "rate calibration {calibration} must be positive and finite"
        )));
    }
    Ok(())
}

fn half_domain_grid(surface: &Metasurface, lambda_p_nm: f64) -> Vec<f64> {
    let lo = lambda_p_nm + SIGNAL_DOMAIN_MARGIN_NM;
    let hi = 2.0 * lambda_p_nm;
    if hi <= lo {
        return Vec::new();
    }
    build_grid(lo, hi, &emission_sites(surface, lambda_p_nm), COARSE_GRID_POINTS)
}

/// Total pair generation rate in Hz for one pump: the emission density
/// integrated over the signal half-domain (lambda_p, 2 lambda_p].
pub fn total_pair_rate(surface: &Metasurface, pump: &PumpConfig, calibration: f64) -> Result<f64> {
    surface.validate("metasurface")?;
    pump.validate("pump")?;
    check_calibration(calibration)?;
    let grid = half_domain_grid(surface, pump.wavelength_nm);
    let mut rate = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &l in &grid {
        let y = density_at(surface, pump, calibration, l);
        if let Some((lp, yp)) = prev {
            rate += 0.5 * (y + yp) * (l - lp);
        }
        prev = Some((l, y));
    }
    Ok(rate)
}

/// Pair rate of an unpatterned film with the same bulk parameters: the
/// enhancement factor is identically 1 across the emission domain.
pub fn film_pair_rate(surface: &Metasurface, pump: &PumpConfig, calibration: f64) -> Result<f64> {
    surface.validate("metasurface")?;
    pump.validate("pump")?;
    check_calibration(calibration)?;
    let lo = pump.wavelength_nm + SIGNAL_DOMAIN_MARGIN_NM;
    let hi = 2.0 * pump.wavelength_nm;
    if hi <= lo {
        return Ok(0.0);
    }
    Ok(calibration
        * pump.power_mw
        * surface.chi2_pm_per_v
        * surface.chi2_pm_per_v
        * (hi - lo))
}

/// Coherence time of the emitted light for one pump: tau = lambda_bar^2 /
/// (c * delta_lambda). The mean photon frequency of every pair is exactly
/// c / (2 lambda_p), so lambda_bar = 2 lambda_p; the emission width is the
/// inverse-participation width (integral S)^2 / integral S^2 of the photon
/// spectrum.
pub fn emission_coherence_time_s(
    surface: &Metasurface,
    pump: &PumpConfig,
    calibration: f64,
) -> Result<f64> {
    let density = pair_spectral_density(surface, pump, calibration)?;
    let mut total = 0.0;
    let mut total_sq = 0.0;
    for i in 1..density.lambda_nm.len() {
        let dl = density.lambda_nm[i] - density.lambda_nm[i - 1];
        let (ya, yb) = (density.density_per_nm[i - 1], density.density_per_nm[i]);
        total += 0.5 * (ya + yb) * dl;
        total_sq += 0.5 * (ya * ya + yb * yb) * dl;
    }
    if total <= 0.0 || total_sq <= 0.0 {
        return Err(Error::UndefinedEstimate(
            "emission spectrum is empty; coherence time undefined".into(),
        ));
    }
    let width_nm = total * total / total_sq;
    let lambda_bar_nm = 2.0 * pump.wavelength_nm;
    Ok(lambda_bar_nm * lambda_bar_nm / (SPEED_OF_LIGHT_M_PER_S * width_nm) * 1e-9)
}

/// Inverse-CDF sampler for the signal wavelength over (lambda_p, 2 lambda_p].
struct WavelengthSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    rate_hz: f64,
}

impl WavelengthSampler {
    fn build(surface: &Metasurface, pump: &PumpConfig, calibration: f64) -> Option<Self> {
        let grid = half_domain_grid(surface, pump.wavelength_nm);
        if grid.len() < 2 {
            return None;
        }
        let density: Vec<f64> = grid
            .iter()
            .map(|&l| density_at(surface, pump, calibration, l))
            .collect();
        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(0.0);
        for i in 1..grid.len() {
            let seg = 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
            cdf.push(cdf[i - 1] + seg);
        }
        let rate_hz = *cdf.last().unwrap();
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return None;
        }
        Some(WavelengthSampler { grid, cdf, rate_hz })
    }

    fn sample(&self, u: f64) -> f64 {
        let target = u * self.rate_hz;
        let idx = self.cdf.partition_point(|&c| c <= target).min(self.cdf.len() - 1);
        let i = idx.max(1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (l0, l1) = (self.grid[i - 1], self.grid[i]);
        if c1 <= c0 {
            return l0;
        }
        let frac = ((target - c0) / (c1 - c0)).clamp(0.0, 1.0);
        l0 + frac * (l1 - l0)
    }
}

/// Draw the pair event stream for one metasurface and a set of pumps over
/// `duration_s` seconds. Events are time-sorted; each pair records its pump
/// and satisfies energy conservation and the lambda_s <= lambda_i convention
/// by construction.
pub fn generate_events(
    surface: &Metasurface,
    pumps: &[PumpConfig],
    duration_s: f64,
    mode: StatsMode,
    seed: u64,
    calibration: f64,
) -> Result<Vec<PairEvent>> {
    generate_events_multi(
        std::slice::from_ref(surface),
        pumps,
        duration_s,
        mode,
        &Seeder::new(seed),
        "",
        calibration,
    )
}

/// Multi-surface variant used for spatially multiplexed setups; every
/// (surface, pump) combination draws from its own named substream so results
/// are invariant to evaluation order.
pub fn generate_events_multi(
    surfaces: &[Metasurface],
    pumps: &[PumpConfig],
    duration_s: f64,
    mode: StatsMode,
    seeder: &Seeder,
    substream_prefix: &str,
    calibration: f64,
) -> Result<Vec<PairEvent>> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::Domain(format!(
            "duration {duration_s} s must be positive and finite"
        )));
    }
    check_calibration(calibration)?;
    let mut events = Vec::new();
    for (si, surface) in surfaces.iter().enumerate() {
        surface.validate(&format!("metasurfaces[{si}]"))?;
        for (pi, pump) in pumps.iter().enumerate() {
            pump.validate(&format!("pumps[{pi}]"))?;
            let sampler = match WavelengthSampler::build(surface, pump, calibration) {
                Some(s) => s,
                None => continue,
            };
            let label = format!("{substream_prefix}generate/surface/{si}/pump/{pi}");
            let mut rng = seeder.stream(&label);
            match mode {
                StatsMode::Poisson => draw_poisson(
                    &sampler, pump, pi, si, duration_s, &mut rng, &mut events,
                )?,
                StatsMode::ThermalCell => {
                    let tau = emission_coherence_time_s(surface, pump, calibration)?;
                    draw_thermal(
                        &sampler, pump, pi, si, duration_s, tau, &mut rng, &mut events,
                    )?;
                }
            }
        }
    }
    events.sort_unstable_by(|a, b| {
        a.t_emit_s
            .total_cmp(&b.t_emit_s)
            .then_with(|| a.metasurface_index.cmp(&b.metasurface_index))
            .then_with(|| a.pump_index.cmp(&b.pump_index))
            .then_with(|| a.lambda_s_nm.total_cmp(&b.lambda_s_nm))
    });
    Ok(events)
}

fn push_pair<R: Rng>(
    sampler: &WavelengthSampler,
    pump: &PumpConfig,
    pump_index: usize,
    metasurface_index: usize,
    t: f64,
    rng: &mut R,
    events: &mut Vec<PairEvent>,
) {
    let lambda_s = sampler.sample(rng.gen::<f64>());
    let lambda_i = idler_wavelength(pump.wavelength_nm, lambda_s)
        .expect("sampled signal is inside (lambda_p, 2 lambda_p]");
    let (s, i) = if lambda_i < lambda_s {
        (lambda_i, lambda_s)
    } else {
        (lambda_s, lambda_i)
    };
    events.push(PairEvent {
        t_emit_s: t,
        lambda_s_nm: s,
        lambda_i_nm: i,
        pump_index,
        metasurface_index,
    });
}

#[allow(clippy::too_many_arguments)]
fn draw_poisson<R: Rng>(
    sampler: &WavelengthSampler,
    pump: &PumpConfig,
    pump_index: usize,
    metasurface_index: usize,
    duration_s: f64,
    rng: &mut R,
    events: &mut Vec<PairEvent>,
) -> Result<()> {
    let exp = Exp::new(sampler.rate_hz)
        .map_err(|e| Error::Domain(format!("invalid pair rate {}: {e}", sampler.rate_hz)))?;
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t >= duration_s {
            return Ok(());
        }
        push_pair(sampler, pump, pump_index, metasurface_index, t, rng, events);
    }
}

/// Largest cell count for which cell indices survive the trip through f64.
const MAX_THERMAL_CELLS: f64 = 4.0e15;

#[allow(clippy::too_many_arguments)]
fn draw_thermal<R: Rng>(
    sampler: &WavelengthSampler,
    pump: &PumpConfig,
    pump_index: usize,
    metasurface_index: usize,
    duration_s: f64,
    tau_s: f64,
    rng: &mut R,
    events: &mut Vec<PairEvent>,
) -> Result<()> {
    if !(tau_s > 0.0) || !tau_s.is_finite() {
        return Err(Error::Domain(format!("coherence time {tau_s} s out of range")));
    }
    let n_cells_f = (duration_s / tau_s).ceil();
    if n_cells_f > MAX_THERMAL_CELLS {
        return Err(Error::Domain(format!(
            "thermal mode needs {n_cells_f:.1e} coherence cells; shorten the duration or narrow the spectrum"
        )));
    }
    let n_cells = n_cells_f as u64;
    let mu = sampler.rate_hz * tau_s;
    if mu <= 0.0 {
        return Ok(());
    }
    // Per-cell pair count is Bose-Einstein: P(n) = (1-q) q^n with
    // q = mu / (1 + mu). Empty cells are skipped in bulk with geometric gaps;
    // an occupied cell draws its count from the conditional n >= 1 law.
    let q = mu / (1.0 + mu);
    let ln_empty = (-q).ln_1p();
    let ln_q = q.ln();
    let mut cell: u64 = 0;
    while cell < n_cells {
        let u = 1.0 - rng.gen::<f64>();
        let gap = (u.ln() / ln_empty).floor();
        if !gap.is_finite() || gap >= (n_cells - cell) as f64 {
            return Ok(());
        }
        cell += gap as u64;
        if cell >= n_cells {
            return Ok(());
        }
        let v = 1.0 - rng.gen::<f64>();
        let n = 1 + (v.ln() / ln_q).floor() as u64;
        for _ in 0..n {
            let t = (cell as f64 + rng.gen::<f64>()) * tau_s;
            if t < duration_s {
                push_pair(sampler, pump, pump_index, metasurface_index, t, rng, events);
            }
        }
        cell += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::Resonance;
    use proptest::prelude::*;

    fn degenerate_surface() -> Metasurface {
        Metasurface::new(
            "deg",
            vec![
                Resonance::new("ed", 1446.0, 330.0),
                Resonance::new("md", 1512.0, 1000.0).with_pol_axis(90.0),
            ],
        )
    }

    fn nondegenerate_surface() -> Metasurface {
        Metasurface::new("ed-only", vec![Resonance::new("ed", 1391.0, 330.0)])
    }

    #[test]
    fn idler_matches_energy_conservation_cases() {
        // partners computed from 1/l_i = 1/l_p - 1/l_s
        assert!((idler_wavelength(718.0, 1391.0).unwrap() - 1484.0089).abs() < 2e-3);
        assert!((idler_wavelength(725.0, 1359.0).unwrap() - 1554.0615).abs() < 2e-3);
        assert!((idler_wavelength(725.0, 1429.0).unwrap() - 1471.6264).abs() < 2e-3);
        assert!((idler_wavelength(718.0, 1359.0).unwrap() - 1522.2496).abs() < 2e-3);
        assert!((idler_wavelength(723.0, 1446.0).unwrap() - 1446.0).abs() < 1e-9);
    }

    #[test]
    fn idler_rejects_signal_at_or_below_pump() {
        assert!(idler_wavelength(723.0, 723.0).is_err());
        assert!(idler_wavelength(723.0, 500.0).is_err());
        assert!(idler_wavelength(0.0, 1446.0).is_err());
        assert!(idler_wavelength(-5.0, 1446.0).is_err());
    }

    #[test]
    fn pump_for_pair_inverts_idler() {
        assert!((pump_for_pair(1400.0, 1400.0) - 700.0).abs() < 1e-12);
        let idler = idler_wavelength(725.0, 1359.0).unwrap();
        let pump = pump_for_pair(1359.0, idler);
        assert!((pump - 725.0).abs() / 725.0 < 1e-12);
    }

    proptest! {
        #[test]
        fn idler_is_an_involution(
            lambda_p in 300.0..1000.0f64,
            ratio in 1.05..6.0f64,
        ) {
            let lambda_s = lambda_p * ratio;
            let lambda_i = idler_wavelength(lambda_p, lambda_s).unwrap();
            let back = idler_wavelength(lambda_p, lambda_i).unwrap();
            prop_assert!(((back - lambda_s) / lambda_s).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_density_peaks_at_twice_pump_with_narrowed_width() {
        let surface = degenerate_surface();
        let pump = PumpConfig::new(723.0, 9.6);
        let density = pair_spectral_density(&surface, &pump, 3.5e-10).unwrap();
        let peak = density.peak_lambda_nm().unwrap();
        assert!((peak - 1446.0).abs() < 0.05, "peak at {peak}");

        // product of two Lorentzians at the degenerate point: FWHM shrinks to
        // sqrt(sqrt(2) - 1) = 0.6436 of the single-resonance linewidth
        let max = density
            .density_per_nm
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let half = max / 2.0;
        let mut lo = f64::NAN;
        let mut hi = f64::NAN;
        for i in 1..density.lambda_nm.len() {
            let (y0, y1) = (density.density_per_nm[i - 1], density.density_per_nm[i]);
            if y0 < half && y1 >= half {
                let f = (half - y0) / (y1 - y0);
                lo = density.lambda_nm[i - 1] + f * (density.lambda_nm[i] - density.lambda_nm[i - 1]);
            }
            if y0 >= half && y1 < half {
                let f = (y0 - half) / (y0 - y1);
                hi = density.lambda_nm[i - 1] + f * (density.lambda_nm[i] - density.lambda_nm[i - 1]);
                break;
            }
        }
        let fwhm = hi - lo;
        let expected = 0.6436 * (1446.0 / 330.0);
        assert!(
            (fwhm - expected).abs() < 0.05,
            "narrowed width {fwhm}, expected {expected}"
        );
    }

    #[test]
    fn nondegenerate_density_shows_signal_and_idler_peaks() {
        let surface = nondegenerate_surface();
        let pump = PumpConfig::new(718.0, 9.6);
        let density = pair_spectral_density(&surface, &pump, 3.5e-10).unwrap();
        let max = density
            .density_per_nm
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        for expected in [1391.0, 1484.01] {
            let local = density
                .lambda_nm
                .iter()
                .zip(&density.density_per_nm)
                .filter(|(l, _)| (**l - expected).abs() < 10.0)
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(l, y)| (*l, *y))
                .unwrap();
            assert!((local.0 - expected).abs() < 0.2, "peak at {}", local.0);
            assert!(local.1 > 0.2 * max);
        }
    }

    #[test]
    fn rate_is_linear_in_power_and_zero_without_pump() {
        let surface = degenerate_surface();
        let r1 = total_pair_rate(&surface, &PumpConfig::new(723.0, 4.8), 3.5e-10).unwrap();
        let r2 = total_pair_rate(&surface, &PumpConfig::new(723.0, 9.6), 3.5e-10).unwrap();
        assert!(((r2 - 2.0 * r1) / r2).abs() < 1e-12);
        let r0 = total_pair_rate(&surface, &PumpConfig::new(723.0, 0.0), 3.5e-10).unwrap();
        assert_eq!(r0, 0.0);
        let density =
            pair_spectral_density(&surface, &PumpConfig::new(723.0, 0.0), 3.5e-10).unwrap();
        assert!(density.density_per_nm.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn resonant_surface_outshines_unpatterned_film() {
        let surface = degenerate_surface();
        let pump = PumpConfig::new(723.0, 9.6);
        let enhanced = total_pair_rate(&surface, &pump, 3.5e-10).unwrap();
        let film = film_pair_rate(&surface, &pump, 3.5e-10).unwrap();
        assert!(enhanced / film > 1e3, "ratio {}", enhanced / film);
    }

    #[test]
    fn display_rate_integral_matches_dedicated_half_domain_integral() {
        let surface = degenerate_surface();
        let pump = PumpConfig::new(723.0, 9.6);
        let density = pair_spectral_density(&surface, &pump, 3.5e-10).unwrap();
        let from_display = density.pair_rate_hz();
        let reference = total_pair_rate(&surface, &pump, 3.5e-10).unwrap();
        // display grid is truncated to the feature neighborhood, so it misses
        // part of the flat film background
        assert!(
            (from_display - reference).abs() / reference < 0.05,
            "display {from_display}, reference {reference}"
        );
    }

    #[test]
    fn generated_events_conserve_energy_and_order() {
        let surface = degenerate_surface();
        let pumps = vec![PumpConfig::new(723.0, 9.6)];
        let events =
            generate_events(&surface, &pumps, 5.0, StatsMode::Poisson, 7, 3.5e-10).unwrap();
        assert!(!events.is_empty());
        for e in &events {
            assert!(e.lambda_s_nm <= e.lambda_i_nm);
            assert!(e.t_emit_s >= 0.0 && e.t_emit_s < 5.0);
            let residual =
                (1.0 / e.lambda_s_nm + 1.0 / e.lambda_i_nm - 1.0 / 723.0).abs() * 723.0;
            assert!(residual < 1e-9, "residual {residual}");
        }
        for w in events.windows(2) {
            assert!(w[0].t_emit_s <= w[1].t_emit_s);
        }
    }

    #[test]
    fn same_seed_replays_bit_identical_streams() {
        let surface = degenerate_surface();
        let pumps = vec![PumpConfig::new(723.0, 9.6)];
        let a = generate_events(&surface, &pumps, 2.0, StatsMode::Poisson, 99, 3.5e-10).unwrap();
        let b = generate_events(&surface, &pumps, 2.0, StatsMode::Poisson, 99, 3.5e-10).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.t_emit_s.to_bits(), y.t_emit_s.to_bits());
            assert_eq!(x.lambda_s_nm.to_bits(), y.lambda_s_nm.to_bits());
        }
        let c = generate_events(&surface, &pumps, 2.0, StatsMode::Poisson, 100, 3.5e-10).unwrap();
        assert_ne!(a.len(), c.len());
    }

    #[test]
    fn poisson_count_tracks_the_analytic_rate() {
        let surface = degenerate_surface();
        let pump = PumpConfig::new(723.0, 9.6);
        let rate = total_pair_rate(&surface, &pump, 3.5e-10).unwrap();
        let duration = 20.0;
        let events = generate_events(
            &surface,
            std::slice::from_ref(&pump),
            duration,
            StatsMode::Poisson,
            11,
            3.5e-10,
        )
        .unwrap();
        let expected = rate * duration;
        let dev = (events.len() as f64 - expected).abs() / expected.sqrt();
        assert!(dev < 5.0, "count {} vs expected {expected:.1}", events.len());
    }

    #[test]
    fn sampled_wavelengths_land_on_the_resonances() {
        let surface = nondegenerate_surface();
        let pumps = vec![PumpConfig::new(718.0, 9.6)];
        let events =
            generate_events(&surface, &pumps, 400.0, StatsMode::Poisson, 3, 3.5e-10).unwrap();
        let on_peak = events
            .iter()
            .filter(|e| (e.lambda_s_nm - 1391.0).abs() < 10.0)
            .count();
        // independent quadrature of the same physical density on a uniform
        // 1 pm midpoint grid over the signal half-domain (718, 1436]
        let gamma = 1391.0 / 330.0 / 2.0;
        let enh = |l: f64| {
            let x = (l - 1391.0) / gamma;
            1.0 + 3.5 * 330.0 / (1.0 + x * x)
        };
        let partner = |s: f64| 1.0 / (1.0 / 718.0 - 1.0 / s);
        let (mut total, mut inside) = (0.0, 0.0);
        let n_cells = 718_000usize;
        for k in 0..n_cells {
            let l = 718.0 + (k as f64 + 0.5) * 1e-3;
            let w = enh(l) * enh(partner(l));
            total += w;
            if (l - 1391.0).abs() < 10.0 {
                inside += w;
            }
        }
        let expected_frac = inside / total;
        let frac = on_peak as f64 / events.len() as f64;
        let sigma = (expected_frac * (1.0 - expected_frac) / events.len() as f64).sqrt();
        assert!(
            (frac - expected_frac).abs() < 5.0 * sigma,
            "{on_peak} of {}: frac {frac:.4} vs expected {expected_frac:.4}",
            events.len()
        );
        let mean_idler: f64 = events
            .iter()
            .filter(|e| (e.lambda_s_nm - 1391.0).abs() < 5.0)
            .map(|e| e.lambda_i_nm)
            .sum::<f64>()
            / events
                .iter()
                .filter(|e| (e.lambda_s_nm - 1391.0).abs() < 5.0)
                .count() as f64;
        assert!((mean_idler - 1484.0).abs() < 1.0, "mean idler {mean_idler}");
    }

    #[test]
    fn thermal_cells_show_bose_einstein_bunching() {
        // one very narrow mode so the coherence time is long enough to bin
        let surface = Metasurface::new(
            "narrow",
            vec![Resonance::new("m", 1446.0, 2.0e6)],
        );
        let pump = PumpConfig::new(723.0, 50.0);
        let calibration = 3.5e-10;
        let tau = emission_coherence_time_s(&surface, &pump, calibration).unwrap();
        let rate = total_pair_rate(&surface, &pump, calibration).unwrap();
        let mu = rate * tau;
        assert!(mu > 0.3, "mu {mu} too small for a meaningful test");

        let n_cells: usize = 200_000;
        let duration = n_cells as f64 * tau;
        let events = generate_events(
            &surface,
            std::slice::from_ref(&pump),
            duration,
            StatsMode::ThermalCell,
            21,
            calibration,
        )
        .unwrap();

        let mut counts = vec![0u32; n_cells];
        for e in &events {
            let cell = (e.t_emit_s / tau) as usize;
            counts[cell.min(n_cells - 1)] += 1;
        }
        let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n_cells as f64;
        let var = counts
            .iter()
            .map(|&c| (c as f64 - mean) * (c as f64 - mean))
            .sum::<f64>()
            / (n_cells as f64 - 1.0);
        assert!((mean - mu).abs() / mu < 0.05, "mean {mean} vs mu {mu}");
        let vm = var / mean;
        assert!(
            (vm - (1.0 + mu)).abs() < 0.05 * (1.0 + mu),
            "var/mean {vm} vs 1+mu {}",
            1.0 + mu
        );
        let empty = counts.iter().filter(|&&c| c == 0).count() as f64 / n_cells as f64;
        let expected_empty = 1.0 / (1.0 + mu);
        assert!((empty - expected_empty).abs() < 0.01);
    }

    #[test]
    fn poisson_cells_stay_unbunched() {
        let surface = Metasurface::new("narrow", vec![Resonance::new("m", 1446.0, 2.0e6)]);
        let pump = PumpConfig::new(723.0, 50.0);
        let calibration = 3.5e-10;
        let tau = emission_coherence_time_s(&surface, &pump, calibration).unwrap();
        let n_cells: usize = 200_000;
        let duration = n_cells as f64 * tau;
        let events = generate_events(
            &surface,
            std::slice::from_ref(&pump),
            duration,
            StatsMode::Poisson,
            21,
            calibration,
        )
        .unwrap();
        let mut counts = vec![0u32; n_cells];
        for e in &events {
            counts[((e.t_emit_s / tau) as usize).min(n_cells - 1)] += 1;
        }
        let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n_cells as f64;
        let var = counts
            .iter()
            .map(|&c| (c as f64 - mean) * (c as f64 - mean))
            .sum::<f64>()
            / (n_cells as f64 - 1.0);
        let vm = var / mean;
        assert!((vm - 1.0).abs() < 0.05, "var/mean {vm}");
    }

    #[test]
    fn generation_rejects_bad_durations() {
        let surface = degenerate_surface();
        let pumps = vec![PumpConfig::new(723.0, 9.6)];
        assert!(
            generate_events(&surface, &pumps, 0.0, StatsMode::Poisson, 1, 3.5e-10).is_err()
        );
        assert!(
            generate_events(&surface, &pumps, -1.0, StatsMode::Poisson, 1, 3.5e-10).is_err()
        );
        assert!(
            generate_events(&surface, &pumps, f64::NAN, StatsMode::Poisson, 1, 3.5e-10).is_err()
        );
    }
}
