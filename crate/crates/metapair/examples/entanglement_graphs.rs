//! Multi-pump entanglement graph assembly and pump planning.
//!
//! Each pump driving a resonance creates one edge between a resonance bin
//! and its energy-conservation partner bin. Pumps that reuse a bin chain
//! edges together, so a handful of pump lines can weave path or star graphs
//! across the emission spectrum. The example builds a three-vertex chain
//! and a four-vertex star, then runs the planner backwards: given desired
//! edges, which pump wavelengths realize them?
//!
//! Run with: cargo run --example entanglement_graphs

use std::slice::from_ref;

use metapair::graph::{build_graph, plan_pumps, EntanglementGraph};
use metapair::optics::{Metasurface, Resonance};
use metapair::spdc::{pump_for_pair, PumpConfig};

fn sample_surface() -> Metasurface {
    Metasurface {
        name: "sample-c".into(),
        resonances: vec![Resonance {
            label: "ed".into(),
            center_wavelength_nm: 1359.0,
            q_factor: 330.0,
            pol_axis_deg: 0.0,
            peak_enhancement_scale: 3.5,
            fano_asymmetry: None,
        }],
        chi2_pm_per_v: 450.0,
        film_thickness_nm: 500.0,
    }
}

fn pump(wavelength_nm: f64) -> PumpConfig {
    PumpConfig {
        wavelength_nm,
        power_mw: 9.6,
        pol_deg: 0.0,
        spot_diameter_um: 140.0,
        coherent_group_id: Some("laser-1".into()),
    }
}

fn print_graph(title: &str, graph: &EntanglementGraph) {
    println!("{title}: {}", graph.classification);
    for (i, v) in graph.vertices.iter().enumerate() {
        println!(
            "  vertex {i}: {:>8.2} nm +/- {:.2} nm{}",
            v.center_nm,
            v.tolerance_nm,
            if v.degenerate { "  (degenerate pair)" } else { "" }
        );
    }
    for e in &graph.edges {
        println!(
            "  edge {} -- {}  (pump {:.2} nm)",
            e.a, e.b, e.pump_wavelength_nm
        );
    }
    println!();
}

fn main() -> metapair::Result<()> {
    let surface = sample_surface();

    let chain = build_graph(from_ref(&surface), &[pump(725.0), pump(718.0)], None)?;
    print_graph("two pumps on one resonance", &chain);

    let hub_nm = 1359.0;
    let leaves = [1500.0, 1600.0, 1700.0];
    let star_pumps: Vec<PumpConfig> = leaves
        .iter()
        .map(|&leaf| pump(pump_for_pair(hub_nm, leaf)))
        .collect();
    let star = build_graph(from_ref(&surface), &star_pumps, None)?;
    print_graph("three pumps sharing the resonance bin", &star);

    println!("dot rendering of the star:\n{}", star.to_dot());

    let targets = [(hub_nm, 1500.0), (hub_nm, 1600.0), (hub_nm, 1700.0)];
    let plan = plan_pumps(&targets, &surface.resonances, None)?;
    println!("planner output for the same star:");
    for p in &plan.pumps {
        println!(
            "  pump {:.4} nm drives target edges {:?}",
            p.wavelength_nm, p.drives
        );
    }

    let replanned: Vec<PumpConfig> = plan
        .pumps
        .iter()
        .map(|p| pump(p.wavelength_nm))
        .collect();
    let rebuilt = build_graph(from_ref(&surface), &replanned, None)?;
    println!(
        "\nrebuilding from the plan reproduces the shape: {}",
        rebuilt.classification
    );
    Ok(())
}
