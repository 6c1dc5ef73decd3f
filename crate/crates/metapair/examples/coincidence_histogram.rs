//! From pair events to a coincidence histogram.
//!
//! Simulates a pair source, splits the photons onto two detectors, joins the
//! two click streams into a delay histogram and prints the bins around the
//! coincidence peak together with the cross-correlation estimate.
//!
//! Run with: cargo run --example coincidence_histogram

use metapair::correlations::{coincidence_histogram, g2_cross};
use metapair::detection::{
    apply_beamsplitter, detect, pairs_to_photons, DetectorSpec, PairPhotonSelection,
};
use metapair::optics::{Metasurface, Resonance};
use metapair::rng::Seeder;
use metapair::spdc::{generate_events, PumpConfig, StatsMode};

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
    let duration_s = 10.0;
    let events = generate_events(&surface, &[pump], duration_s, StatsMode::Poisson, 42, 3.5e-7)?;
    println!("generated {} pair events in {duration_s} s", events.len());

    let seeder = Seeder::new(42);
    let photons = pairs_to_photons(&events, PairPhotonSelection::Both);
    let (arm_a, arm_b) = apply_beamsplitter(&photons, 0.5, &mut seeder.stream("splitter"))?;
    let spec = DetectorSpec::default();
    let stream_a = detect(&arm_a, &spec, "A", duration_s, &mut seeder.stream("det/a"))?;
    let stream_b = detect(&arm_b, &spec, "B", duration_s, &mut seeder.stream("det/b"))?;
    println!(
        "detected {} clicks on A, {} on B (efficiency {}, jitter {} ps rms)",
        stream_a.len(),
        stream_b.len(),
        spec.efficiency,
        spec.jitter_sigma_ps
    );

    let hist = coincidence_histogram(&stream_a, &stream_b, 50.0, 20_000.0)?;
    let peak_bin = (0..hist.counts.len())
        .max_by_key(|&i| hist.counts[i])
        .unwrap();
    println!("\ndelay histogram around the peak (50 ps bins):");
    let scale = hist.counts[peak_bin].max(1);
    for i in peak_bin.saturating_sub(6)..=(peak_bin + 6).min(hist.counts.len() - 1) {
        let bar = "#".repeat((hist.counts[i] * 40 / scale) as usize);
        println!(
            "  {:>7.0} ps | {:>6} {bar}",
            hist.bin_center_ps(i),
            hist.counts[i]
        );
    }

    let est = g2_cross(&stream_a, &stream_b, 1e-9)?;
    println!(
        "\ng2(0) = {:.1} +/- {:.1} from {} coincidences in a {} ns window",
        est.value,
        est.std_error,
        est.coincidences,
        est.window_s * 1e9
    );
    Ok(())
}
