//! Cauchy-Schwarz inequality test on the pair source.
//!
//! Classical fields obey g_si^2 <= g_ss * g_ii. A photon-pair source breaks
//! this bound: the cross-correlation between signal and idler far exceeds
//! what the marginal autocorrelations allow. The run mirrors the real
//! measurement protocol with three passes over the same source settings:
//! one with both photons, then one per photon for the autocorrelations.
//!
//! Run with: cargo run --example cs_violation

use metapair::correlations::{cs_test, g2_auto, g2_cross, CorrelationEstimate};
use metapair::detection::{
    apply_beamsplitter, detect, pairs_to_photons, DetectorSpec, PairPhotonSelection,
    TimestampStream,
};
use metapair::optics::{Metasurface, Resonance};
use metapair::rng::Seeder;
use metapair::spdc::{generate_events, PumpConfig, StatsMode};

const DURATION_S: f64 = 120.0;
const WINDOW_S: f64 = 10e-9;

fn detect_pass(
    surface: &Metasurface,
    pump: &PumpConfig,
    selection: PairPhotonSelection,
    pass: &str,
    seed: u64,
) -> metapair::Result<(TimestampStream, TimestampStream)> {
    let events = generate_events(
        surface,
        std::slice::from_ref(pump),
        DURATION_S,
        StatsMode::Poisson,
        seed,
        3.5e-7,
    )?;
    let seeder = Seeder::new(seed);
    let photons = pairs_to_photons(&events, selection);
    let (arm_a, arm_b) =
        apply_beamsplitter(&photons, 0.5, &mut seeder.stream(&format!("{pass}/split")))?;
    let spec = DetectorSpec::default();
    let a = detect(&arm_a, &spec, "A", DURATION_S, &mut seeder.stream(&format!("{pass}/a")))?;
    let b = detect(&arm_b, &spec, "B", DURATION_S, &mut seeder.stream(&format!("{pass}/b")))?;
    Ok((a, b))
}

fn describe(name: &str, est: &CorrelationEstimate) {
    println!(
        "  {name} = {:>8.3} +/- {:>6.3} ({} coincidences)",
        est.value, est.std_error, est.coincidences
    );
}

fn main() -> metapair::Result<()> {
    let surface = Metasurface {
        name: "sample-b".into(),
        resonances: vec![Resonance {
            label: "ed".into(),
            center_wavelength_nm: 1391.0,
            q_factor: 330.0,
            pol_axis_deg: 0.0,
            peak_enhancement_scale: 3.5,
            fano_asymmetry: None,
        }],
        chi2_pm_per_v: 450.0,
        film_thickness_nm: 500.0,
    };
    let pump = PumpConfig {
        wavelength_nm: 718.0,
        power_mw: 9.6,
        pol_deg: 0.0,
        spot_diameter_um: 140.0,
        coherent_group_id: None,
    };

    let (main_a, main_b) = detect_pass(&surface, &pump, PairPhotonSelection::Both, "main", 2023)?;
    let (sig_a, sig_b) = detect_pass(&surface, &pump, PairPhotonSelection::SignalOnly, "auto_s", 2024)?;
    let (idl_a, idl_b) = detect_pass(&surface, &pump, PairPhotonSelection::IdlerOnly, "auto_i", 2025)?;

    let g_si = g2_cross(&main_a, &main_b, WINDOW_S)?;
    let g_ss = g2_auto(&sig_a, &sig_b, WINDOW_S)?;
    let g_ii = g2_auto(&idl_a, &idl_b, WINDOW_S)?;

    println!("correlations in a {:.0} ns window:", WINDOW_S * 1e9);
    describe("g_si", &g_si);
    describe("g_ss", &g_ss);
    describe("g_ii", &g_ii);

    let result = cs_test(&g_si, &g_ss, &g_ii);
    println!(
        "\ng_si^2 = {:.1} vs g_ss * g_ii = {:.2}",
        result.lhs, result.rhs
    );
    if result.violated {
        println!(
            "classical bound violated by {:.1} standard deviations",
            result.sigma_violation
        );
    } else {
        println!("no violation: the light is compatible with a classical model");
    }
    Ok(())
}
