//! End-to-end scenario execution: simulate pair emission through the
//! detection chain into timestamp streams, then run the requested analyses
//! over those streams and write every result to disk.
//!
//! A scenario runs as up to three passes through the same optical chain:
//!
//! * `main`: both photons of every pair enter the setup (cross-correlation,
//!   histograms, spectroscopy).
//! * `auto_s` / `auto_i`: only the signal (idler) photon of each pair enters,
//!   so the two arms measure that field's autocorrelation.
//!
//! Every random draw comes from a substream named by pass, element, and
//! channel, so adding passes or reordering work never changes other results.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::correlations::{
    cs_test, g2_auto, g2_cross, coincidence_histogram, power_scan_fit, CorrelationEstimate,
    CsTestResult, PowerLawFit,
};
use crate::detection::{
    apply_bandpass, apply_beamsplitter, apply_fiber, detect, pairs_to_photons,
    PairPhotonSelection, Photon, TimestampStream,
};
use crate::error::{Error, Result};
use crate::graph::{build_graph, EntanglementGraph};
use crate::io::{self, Manifest};
use crate::rng::Seeder;
use crate::scenario::{AnalysisRequest, Scenario, Stage, SCHEMA_VERSION};
use crate::spdc::{
    generate_events_multi, pair_spectral_density_indexed, total_pair_rate, PairEvent,
};
use crate::spectroscopy::{find_peaks, reconstruct_spectrum, Peak};

pub const PASS_MAIN: &str = "main";
pub const PASS_AUTO_SIGNAL: &str = "auto_s";
pub const PASS_AUTO_IDLER: &str = "auto_i";

/// On-disk representation of timestamp streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Csv,
    Binary,
}

impl StreamFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            StreamFormat::Csv => "csv",
            StreamFormat::Binary => "binary",
        }
    }

    fn extension(&self) -> &'static str {
        match self {
            StreamFormat::Csv => "csv",
            StreamFormat::Binary => "bin",
        }
    }
}

/// Format of scan result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Replaces the scenario's seed before hashing and simulation.
    pub seed_override: Option<u64>,
    pub stream_format: StreamFormat,
    /// Also write the raw pair events of the main pass.
    pub dump_events: bool,
    /// Analyze streams even when their recorded scenario hash differs.
    pub force: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed_override: None,
            stream_format: StreamFormat::Csv,
            dump_events: false,
            force: false,
        }
    }
}

/// The scenario as actually executed: seed override applied, then validated.
pub fn effective_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<Scenario> {
    let mut s = scenario.clone();
    if let Some(seed) = opts.seed_override {
        s.seed = seed;
    }
    s.validate()?;
    Ok(s)
}

fn pass_selection(pass: &str) -> PairPhotonSelection {
    match pass {
        PASS_AUTO_SIGNAL => PairPhotonSelection::SignalOnly,
        PASS_AUTO_IDLER => PairPhotonSelection::IdlerOnly,
        _ => PairPhotonSelection::Both,
    }
}

fn needs_main(analysis: &[AnalysisRequest]) -> bool {
    analysis.iter().any(|a| {
        matches!(
            a,
            AnalysisRequest::Histogram { .. }
                | AnalysisRequest::G2Cross { .. }
                | AnalysisRequest::CsTest { .. }
                | AnalysisRequest::Spectrum { .. }
        )
    })
}

fn needs_autos(analysis: &[AnalysisRequest]) -> bool {
    analysis
        .iter()
        .any(|a| matches!(a, AnalysisRequest::G2Auto { .. } | AnalysisRequest::CsTest { .. }))
}

/// Passes a simulation must record to serve the scenario's analyses. The
/// main pass always runs: its streams are the primary product.
pub fn required_passes(scenario: &Scenario) -> Vec<&'static str> {
    let mut passes = vec![PASS_MAIN];
    if needs_autos(&scenario.analysis) {
        passes.push(PASS_AUTO_SIGNAL);
        passes.push(PASS_AUTO_IDLER);
    }
    passes
}

fn apply_stage(
    photons: Vec<Photon>,
    stage: &Stage,
    seeder: &Seeder,
    label: &str,
) -> Result<Vec<Photon>> {
    match stage {
        Stage::Fiber(f) => apply_fiber(&photons, f),
        Stage::Bandpass(b) => apply_bandpass(&photons, b, &mut seeder.stream(label)),
    }
}

/// Simulate one pass through the chain: emission, shared stages, splitter,
/// per-arm stages, detectors. Returns the emitted pairs and one stream per
/// arm, in arm order.
pub fn simulate_pass(
    scenario: &Scenario,
    pass: &str,
    seeder: &Seeder,
) -> Result<(Vec<PairEvent>, Vec<TimestampStream>)> {
    let events = generate_events_multi(
        &scenario.metasurfaces,
        &scenario.pumps,
        scenario.duration_s,
        scenario.stats_mode,
        seeder,
        &format!("pass/{pass}/"),
        scenario.rate_calibration,
    )?;
    let mut photons = pairs_to_photons(&events, pass_selection(pass));
    for (i, stage) in scenario.detection.pre_stages.iter().enumerate() {
        photons = apply_stage(photons, stage, seeder, &format!("pass/{pass}/detect/pre/{i}"))?;
    }
    let (first, second) = apply_beamsplitter(
        &photons,
        scenario.detection.splitter_ratio,
        &mut seeder.stream(&format!("pass/{pass}/detect/splitter")),
    )?;
    let mut streams = Vec::with_capacity(2);
    for (arm, arm_photons) in scenario.detection.arms.iter().zip([first, second]) {
        let mut arm_photons = arm_photons;
        for (i, stage) in arm.stages.iter().enumerate() {
            arm_photons = apply_stage(
                arm_photons,
                stage,
                seeder,
                &format!("pass/{pass}/detect/arm/{}/stage/{i}", arm.channel),
            )?;
        }
        streams.push(detect(
            &arm_photons,
            &arm.detector,
            &arm.channel,
            scenario.duration_s,
            &mut seeder.stream(&format!("pass/{pass}/detect/arm/{}/detector", arm.channel)),
        )?);
    }
    Ok((events, streams))
}

fn safe_name(raw: &str) -> String {
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn stream_file_name(pass: &str, channel: &str, format: StreamFormat) -> String {
    format!(
        "stream_{}_{}.{}",
        safe_name(pass),
        safe_name(channel),
        format.extension()
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct PassSummary {
    pub pass: String,
    pub pairs_emitted: usize,
    pub clicks: Vec<ChannelClicks>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelClicks {
    pub channel: String,
    pub clicks: usize,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub duration_s: f64,
    /// Analytic pair emission rate per pump, summed over surfaces.
    pub model_pair_rates_hz: Vec<f64>,
    pub passes: Vec<PassSummary>,
    pub files: Vec<String>,
}

/// Simulate every required pass of a scenario and write streams, model
/// spectra, the effective scenario, and the manifest into `out_dir`.
pub fn simulate(
    scenario_in: &Scenario,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<SimulateSummary> {
    let scenario = effective_scenario(scenario_in, opts)?;
    let hash = scenario.canonical_hash()?;
    std::fs::create_dir_all(out_dir)?;
    let seeder = Seeder::new(scenario.seed);
    let mut files: Vec<PathBuf> = Vec::new();

    let scenario_path = out_dir.join("scenario.json");
    io::write_json(&scenario_path, &scenario)?;
    files.push(scenario_path);

    let mut passes = Vec::new();
    for pass in required_passes(&scenario) {
        let (events, streams) = simulate_pass(&scenario, pass, &seeder)?;
        let mut clicks = Vec::new();
        for stream in &streams {
            let path = out_dir.join(stream_file_name(pass, &stream.channel_id, opts.stream_format));
            match opts.stream_format {
                StreamFormat::Csv => io::write_stream_csv(&path, stream, Some(&hash))?,
                StreamFormat::Binary => io::write_stream_binary(&path, stream, Some(&hash))?,
            }
            clicks.push(ChannelClicks {
                channel: stream.channel_id.clone(),
                clicks: stream.len(),
                rate_hz: stream.rate_hz(),
            });
            files.push(path);
        }
        if pass == PASS_MAIN && opts.dump_events {
            let path = out_dir.join("events.csv");
            io::write_events_csv(&path, &events)?;
            files.push(path);
        }
        passes.push(PassSummary {
            pass: pass.to_string(),
            pairs_emitted: events.len(),
            clicks,
        });
    }

    let mut model_pair_rates_hz = vec![0.0; scenario.pumps.len()];
    for (si, surface) in scenario.metasurfaces.iter().enumerate() {
        for (pi, pump) in scenario.pumps.iter().enumerate() {
            let density =
                pair_spectral_density_indexed(surface, pump, pi, scenario.rate_calibration)?;
            let path = out_dir.join(format!("density_s{si}_p{pi}.csv"));
            io::write_spectrum_csv(
                &path,
                &density.lambda_nm,
                &density.density_per_nm,
                &[
                    ("scenario_sha256", hash.clone()),
                    ("surface", surface.name.clone()),
                    ("pump_nm", pump.wavelength_nm.to_string()),
                    ("unit", "pairs_per_s_per_nm".to_string()),
                ],
            )?;
            files.push(path);
            model_pair_rates_hz[pi] += total_pair_rate(surface, pump, scenario.rate_calibration)?;
        }
    }

    write_manifest(out_dir, &scenario, &hash, opts, &files)?;
    Ok(SimulateSummary {
        scenario_name: scenario.name.clone(),
        scenario_sha256: hash,
        seed: scenario.seed,
        duration_s: scenario.duration_s,
        model_pair_rates_hz,
        passes,
        files: relative_names(out_dir, &files),
    })
}

fn relative_names(base: &Path, files: &[PathBuf]) -> Vec<String> {
    let mut names: Vec<String> = files
        .iter()
        .map(|f| {
            f.strip_prefix(base)
                .unwrap_or(f)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect();
    names.sort();
    names
}

fn write_manifest(
    out_dir: &Path,
    scenario: &Scenario,
    hash: &str,
    opts: &RunOptions,
    files: &[PathBuf],
) -> Result<()> {
    let mut manifest = Manifest::new(
        &scenario.name,
        hash,
        scenario.seed,
        SCHEMA_VERSION,
        opts.stream_format.as_str(),
    );
    for file in files {
        manifest.add_file(out_dir, file)?;
    }
    if let Some(existing) = Manifest::load(out_dir)? {
        manifest.absorb_existing(existing);
    }
    manifest.write(out_dir)
}

/// Streams of one pass in arm order.
type ArmStreams = Vec<TimestampStream>;

struct LoadedPasses {
    main: Option<ArmStreams>,
    auto_s: Option<ArmStreams>,
    auto_i: Option<ArmStreams>,
}

fn load_pass(
    dir: &Path,
    scenario: &Scenario,
    pass: &str,
    expected_hash: &str,
    force: bool,
) -> Result<ArmStreams> {
    let mut streams = Vec::with_capacity(2);
    for arm in &scenario.detection.arms {
        let candidates = [
            dir.join(stream_file_name(pass, &arm.channel, StreamFormat::Csv)),
            dir.join(stream_file_name(pass, &arm.channel, StreamFormat::Binary)),
        ];
        let path = candidates.iter().find(|p| p.exists()).ok_or_else(|| {
            Error::malformed(
                &candidates[0],
                format!(
                    "no recorded stream for pass `{pass}` channel `{}`; run simulate first",
                    arm.channel
                ),
            )
        })?;
        let (mut found, recorded_hash) = io::read_stream_any(path)?;
        if let Some(recorded) = recorded_hash {
            if recorded != expected_hash && !force {
                return Err(Error::HashMismatch {
                    expected: expected_hash.to_string(),
                    found: recorded,
                });
            }
        }
        let idx = found
            .iter()
            .position(|s| s.channel_id == arm.channel)
            .ok_or_else(|| {
                Error::malformed(
                    path,
                    format!("file does not contain channel `{}`", arm.channel),
                )
            })?;
        streams.push(found.swap_remove(idx));
    }
    Ok(streams)
}

/// Reconstructed spectrum report: peaks found, resolution, and provenance.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub pump_wavelength_nm: f64,
    pub dispersion_ps_per_nm: f64,
    pub timing_fwhm_ps: f64,
    pub resolution_nm: f64,
    pub lambda_bin_nm: f64,
    pub coincidences_used: u64,
    pub peaks: Vec<Peak>,
}

#[derive(Debug, Clone, Serialize)]
struct G2CrossReport {
    scenario_name: String,
    scenario_sha256: String,
    channel_a: String,
    channel_b: String,
    t_c_ns: f64,
    estimate: CorrelationEstimate,
}

#[derive(Debug, Clone, Serialize)]
struct G2AutoReport {
    scenario_name: String,
    scenario_sha256: String,
    t_c_ns: f64,
    signal: CorrelationEstimate,
    idler: CorrelationEstimate,
}

#[derive(Debug, Clone, Serialize)]
struct CsReport {
    scenario_name: String,
    scenario_sha256: String,
    t_c_ns: f64,
    g_si: CorrelationEstimate,
    g_ss: CorrelationEstimate,
    g_ii: CorrelationEstimate,
    result: CsTestResult,
}

#[derive(Debug, Clone, Serialize)]
struct GraphReport {
    scenario_name: String,
    scenario_sha256: String,
    tolerance_nm: Option<f64>,
    graph: EntanglementGraph,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSummary {
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub histogram_counts: Option<u64>,
    pub g2_cross: Option<CorrelationEstimate>,
    pub g2_signal: Option<CorrelationEstimate>,
    pub g2_idler: Option<CorrelationEstimate>,
    pub cs: Option<CsTestResult>,
    pub spectrum: Option<SpectrumReport>,
    pub graph: Option<EntanglementGraph>,
    pub files: Vec<String>,
    /// Human-readable one-liners, one per analysis, for terminal output.
    pub lines: Vec<String>,
}

/// Run every analysis of a scenario against the streams recorded in `dir`.
pub fn analyze(scenario_in: &Scenario, dir: &Path, opts: &RunOptions) -> Result<AnalyzeSummary> {
    let scenario = effective_scenario(scenario_in, opts)?;
    let hash = scenario.canonical_hash()?;
    std::fs::create_dir_all(dir)?;

    let mut loaded = LoadedPasses {
        main: None,
        auto_s: None,
        auto_i: None,
    };
    if needs_main(&scenario.analysis) {
        loaded.main = Some(load_pass(dir, &scenario, PASS_MAIN, &hash, opts.force)?);
    }
    if needs_autos(&scenario.analysis) {
        loaded.auto_s = Some(load_pass(dir, &scenario, PASS_AUTO_SIGNAL, &hash, opts.force)?);
        loaded.auto_i = Some(load_pass(dir, &scenario, PASS_AUTO_IDLER, &hash, opts.force)?);
    }

    let mut summary = AnalyzeSummary {
        scenario_name: scenario.name.clone(),
        scenario_sha256: hash.clone(),
        histogram_counts: None,
        g2_cross: None,
        g2_signal: None,
        g2_idler: None,
        cs: None,
        spectrum: None,
        graph: None,
        files: Vec::new(),
        lines: Vec::new(),
    };
    let mut files: Vec<PathBuf> = Vec::new();
    let mut occurrences: HashMap<&'static str, usize> = HashMap::new();
    let mut report_stem = |base: &'static str| -> String {
        let n = occurrences.entry(base).or_insert(0);
        *n += 1;
        if *n == 1 {
            base.to_string()
        } else {
            format!("{base}_{n}")
        }
    };

    for request in &scenario.analysis {
        match request {
            AnalysisRequest::Histogram {
                bin_width_ps,
                span_ps,
            } => {
                let main = loaded.main.as_ref().expect("main pass loaded");
                let hist =
                    coincidence_histogram(&main[0], &main[1], *bin_width_ps, *span_ps)?;
                let path = dir.join(format!("{}.csv", report_stem("histogram")));
                io::write_histogram_csv(&path, &hist, Some(&hash))?;
                summary.lines.push(format!(
                    "histogram: {} coincidences in {} bins of {} ps -> {}",
                    hist.total_counts(),
                    hist.n_bins(),
                    bin_width_ps,
                    path.file_name().unwrap().to_string_lossy()
                ));
                summary.histogram_counts = Some(hist.total_counts());
                files.push(path);
            }
            AnalysisRequest::G2Cross { t_c_ns } => {
                let main = loaded.main.as_ref().expect("main pass loaded");
                let estimate = g2_cross(&main[0], &main[1], t_c_ns * 1e-9)?;
                let path = dir.join(format!("{}.json", report_stem("g2_cross")));
                io::write_json(
                    &path,
                    &G2CrossReport {
                        scenario_name: scenario.name.clone(),
                        scenario_sha256: hash.clone(),
                        channel_a: main[0].channel_id.clone(),
                        channel_b: main[1].channel_id.clone(),
                        t_c_ns: *t_c_ns,
                        estimate: estimate.clone(),
                    },
                )?;
                summary.lines.push(format!(
                    "g2_cross(Tc = {} ns) = {:.3} +/- {:.3} ({} coincidences)",
                    t_c_ns, estimate.value, estimate.std_error, estimate.coincidences
                ));
                summary.g2_cross = Some(estimate);
                files.push(path);
            }
            AnalysisRequest::G2Auto { t_c_ns } => {
                let auto_s = loaded.auto_s.as_ref().expect("auto_s pass loaded");
                let auto_i = loaded.auto_i.as_ref().expect("auto_i pass loaded");
                let signal = g2_auto(&auto_s[0], &auto_s[1], t_c_ns * 1e-9)?;
                let idler = g2_auto(&auto_i[0], &auto_i[1], t_c_ns * 1e-9)?;
                let path = dir.join(format!("{}.json", report_stem("g2_auto")));
                io::write_json(
                    &path,
                    &G2AutoReport {
                        scenario_name: scenario.name.clone(),
                        scenario_sha256: hash.clone(),
                        t_c_ns: *t_c_ns,
                        signal: signal.clone(),
                        idler: idler.clone(),
                    },
                )?;
                summary.lines.push(format!(
                    "g2_auto(Tc = {} ns): signal {:.3} +/- {:.3}, idler {:.3} +/- {:.3}",
                    t_c_ns, signal.value, signal.std_error, idler.value, idler.std_error
                ));
                summary.g2_signal = Some(signal);
                summary.g2_idler = Some(idler);
                files.push(path);
            }
            AnalysisRequest::CsTest { t_c_ns } => {
                let main = loaded.main.as_ref().expect("main pass loaded");
                let auto_s = loaded.auto_s.as_ref().expect("auto_s pass loaded");
                let auto_i = loaded.auto_i.as_ref().expect("auto_i pass loaded");
                let g_si = g2_cross(&main[0], &main[1], t_c_ns * 1e-9)?;
                let g_ss = g2_auto(&auto_s[0], &auto_s[1], t_c_ns * 1e-9)?;
                let g_ii = g2_auto(&auto_i[0], &auto_i[1], t_c_ns * 1e-9)?;
                let result = cs_test(&g_si, &g_ss, &g_ii);
                let path = dir.join(format!("{}.json", report_stem("cs_report")));
                io::write_json(
                    &path,
                    &CsReport {
                        scenario_name: scenario.name.clone(),
                        scenario_sha256: hash.clone(),
                        t_c_ns: *t_c_ns,
                        g_si,
                        g_ss,
                        g_ii,
                        result: result.clone(),
                    },
                )?;
                summary.lines.push(format!(
                    "cauchy-schwarz: lhs {:.2} +/- {:.2} vs rhs {:.2} +/- {:.2} -> {} ({:.1} sigma)",
                    result.lhs,
                    result.lhs_std_error,
                    result.rhs,
                    result.rhs_std_error,
                    if result.violated { "violated" } else { "not violated" },
                    result.sigma_violation
                ));
                summary.cs = Some(result);
                files.push(path);
            }
            AnalysisRequest::Spectrum {
                lambda_bin_nm,
                bin_width_ps,
                span_ps,
            } => {
                let main = loaded.main.as_ref().expect("main pass loaded");
                let fiber = scenario.shared_fiber().ok_or_else(|| {
                    Error::invalid("analysis", "spectrum needs a fiber in pre_stages")
                })?;
                let hist =
                    coincidence_histogram(&main[0], &main[1], *bin_width_ps, *span_ps)?;
                let jitter_a = scenario.detection.arms[0].detector.jitter_sigma_ps;
                let jitter_b = scenario.detection.arms[1].detector.jitter_sigma_ps;
                let timing_fwhm_ps =
                    2.354_820_045 * (jitter_a * jitter_a + jitter_b * jitter_b).sqrt();
                let spectrum = reconstruct_spectrum(
                    &hist,
                    fiber,
                    scenario.pumps[0].wavelength_nm,
                    timing_fwhm_ps,
                    *lambda_bin_nm,
                )?;
                let min_separation = spectrum.resolution_nm.max(2.0 * lambda_bin_nm);
                let peaks = find_peaks(
                    &spectrum.lambda_nm,
                    &spectrum.intensity_per_nm,
                    0.1,
                    min_separation,
                );
                let stem = report_stem("spectrum");
                let csv_path = dir.join(format!("{stem}.csv"));
                io::write_spectrum_csv(
                    &csv_path,
                    &spectrum.lambda_nm,
                    &spectrum.intensity_per_nm,
                    &[
                        ("scenario_sha256", hash.clone()),
                        ("resolution_nm", spectrum.resolution_nm.to_string()),
                        ("lambda_bin_nm", spectrum.lambda_bin_nm.to_string()),
                        ("unit", "counts_per_nm".to_string()),
                    ],
                )?;
                files.push(csv_path);
                let report = SpectrumReport {
                    scenario_name: scenario.name.clone(),
                    scenario_sha256: hash.clone(),
                    pump_wavelength_nm: scenario.pumps[0].wavelength_nm,
                    dispersion_ps_per_nm: fiber.dispersion_ps_per_nm(),
                    timing_fwhm_ps,
                    resolution_nm: spectrum.resolution_nm,
                    lambda_bin_nm: spectrum.lambda_bin_nm,
                    coincidences_used: hist.total_counts(),
                    peaks,
                };
                let json_path = dir.join(format!("{stem}.json"));
                io::write_json(&json_path, &report)?;
                files.push(json_path);
                let peak_text = if report.peaks.is_empty() {
                    "none".to_string()
                } else {
                    report
                        .peaks
                        .iter()
                        .map(|p| format!("{:.1} nm (fwhm {:.1} nm)", p.lambda_nm, p.fwhm_nm))
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                summary.lines.push(format!(
                    "spectrum: resolution {:.2} nm, peaks: {peak_text}",
                    report.resolution_nm
                ));
                summary.spectrum = Some(report);
            }
            AnalysisRequest::Graph { tolerance_nm } => {
                let graph =
                    build_graph(&scenario.metasurfaces, &scenario.pumps, *tolerance_nm)?;
                let stem = report_stem("graph");
                let json_path = dir.join(format!("{stem}.json"));
                io::write_json(
                    &json_path,
                    &GraphReport {
                        scenario_name: scenario.name.clone(),
                        scenario_sha256: hash.clone(),
                        tolerance_nm: *tolerance_nm,
                        graph: graph.clone(),
                    },
                )?;
                files.push(json_path);
                let dot_path = dir.join(format!("{stem}.dot"));
                std::fs::write(&dot_path, graph.to_dot())?;
                files.push(dot_path);
                summary.lines.push(format!(
                    "graph: {} ({} vertices, {} edges)",
                    graph.classification,
                    graph.vertices.len(),
                    graph.edges.len()
                ));
                summary.graph = Some(graph);
            }
        }
    }

    write_manifest(dir, &scenario, &hash, opts, &files)?;
    summary.files = relative_names(dir, &files);
    Ok(summary)
}

/// Simulate and analyze in one call. Analyses read the freshly written
/// streams back from disk, so the results are exactly what a later
/// `analyze` over the same directory would produce.
pub fn run(
    scenario: &Scenario,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<(SimulateSummary, AnalyzeSummary)> {
    let sim = simulate(scenario, out_dir, opts)?;
    let ana = analyze(scenario, out_dir, opts)?;
    Ok((sim, ana))
}

/// Run only the spectrum reconstruction of a scenario. A scenario without an
/// explicit spectrum analysis gets one with default binning.
pub fn spectrum_only(
    scenario_in: &Scenario,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<(SimulateSummary, AnalyzeSummary)> {
    let mut scenario = scenario_in.clone();
    scenario.analysis = scenario
        .analysis
        .iter()
        .filter(|a| matches!(a, AnalysisRequest::Spectrum { .. }))
        .cloned()
        .collect();
    if scenario.analysis.is_empty() {
        scenario.analysis = vec![AnalysisRequest::Spectrum {
            lambda_bin_nm: 1.0,
            bin_width_ps: 5.0,
            span_ps: 24_000.0,
        }];
    }
    run(&scenario, out_dir, opts)
}

/// Build and write the entanglement graph of a scenario without simulating.
pub fn graph_only(
    scenario_in: &Scenario,
    out_dir: &Path,
    tolerance_nm: Option<f64>,
    opts: &RunOptions,
) -> Result<(EntanglementGraph, Vec<String>)> {
    let scenario = effective_scenario(scenario_in, opts)?;
    let hash = scenario.canonical_hash()?;
    std::fs::create_dir_all(out_dir)?;
    let tolerance = tolerance_nm.or_else(|| {
        scenario.analysis.iter().find_map(|a| match a {
            AnalysisRequest::Graph { tolerance_nm } => *tolerance_nm,
            _ => None,
        })
    });
    let graph = build_graph(&scenario.metasurfaces, &scenario.pumps, tolerance)?;
    let json_path = out_dir.join("graph.json");
    io::write_json(
        &json_path,
        &GraphReport {
            scenario_name: scenario.name.clone(),
            scenario_sha256: hash.clone(),
            tolerance_nm: tolerance,
            graph: graph.clone(),
        },
    )?;
    let dot_path = out_dir.join("graph.dot");
    std::fs::write(&dot_path, graph.to_dot())?;
    let files = vec![json_path, dot_path];
    write_manifest(out_dir, &scenario, &hash, opts, &files)?;
    Ok((graph, relative_names(out_dir, &files)))
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerScanPoint {
    pub power_mw: f64,
    pub g2: f64,
    pub std_error: f64,
    pub coincidences: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerScanReport {
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub t_c_ns: f64,
    pub duration_s: f64,
    pub points: Vec<PowerScanPoint>,
    pub fit: PowerLawFit,
}

/// Monte Carlo scan of the cross-correlation against pump power: each point
/// simulates the main pass at one power and estimates g2. Points run in
/// parallel; every point draws from substreams named by its index, so the
/// result is independent of thread count.
pub fn power_scan(
    scenario_in: &Scenario,
    powers_mw: &[f64],
    t_c_ns: f64,
    duration_s: Option<f64>,
    opts: &RunOptions,
) -> Result<PowerScanReport> {
    let scenario = effective_scenario(scenario_in, opts)?;
    let hash = scenario.canonical_hash()?;
    if powers_mw.len() < 4 {
        return Err(Error::invalid(
            "powers",
            format!("need at least 4 scan points, got {}", powers_mw.len()),
        ));
    }
    if !(t_c_ns > 0.0) || !t_c_ns.is_finite() {
        return Err(Error::invalid("t_c_ns", "must be positive and finite"));
    }
    let duration = duration_s.unwrap_or(scenario.duration_s);
    let points: Vec<PowerScanPoint> = powers_mw
        .par_iter()
        .enumerate()
        .map(|(i, &power)| -> Result<PowerScanPoint> {
            if !(power > 0.0) || !power.is_finite() {
                return Err(Error::invalid(
                    "powers",
                    format!("power {power} mW must be positive and finite"),
                ));
            }
            let mut point_scenario = scenario.clone();
            point_scenario.duration_s = duration;
            for pump in &mut point_scenario.pumps {
                pump.power_mw = power;
            }
            let seeder = Seeder::new(scenario.seed);
            let (_, streams) =
                simulate_pass(&point_scenario, &format!("scan/power/{i}"), &seeder)?;
            let estimate = g2_cross(&streams[0], &streams[1], t_c_ns * 1e-9)?;
            Ok(PowerScanPoint {
                power_mw: power,
                g2: estimate.value,
                std_error: estimate.std_error,
                coincidences: estimate.coincidences,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = power_scan_fit(
        &points
            .iter()
            .map(|p| (p.power_mw, p.g2))
            .collect::<Vec<_>>(),
    )?;
    Ok(PowerScanReport {
        scenario_name: scenario.name.clone(),
        scenario_sha256: hash,
        t_c_ns,
        duration_s: duration,
        points,
        fit,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DetuningScanPoint {
    pub detuning_nm: f64,
    pub pump_wavelength_nm: f64,
    pub pair_rate_hz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetuningScanReport {
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub points: Vec<DetuningScanPoint>,
}

/// Analytic scan of the total pair rate as the first pump's wavelength is
/// detuned by up to `half_span_nm` either way.
pub fn detuning_scan(
    scenario_in: &Scenario,
    half_span_nm: f64,
    steps: usize,
    opts: &RunOptions,
) -> Result<DetuningScanReport> {
    let scenario = effective_scenario(scenario_in, opts)?;
    let hash = scenario.canonical_hash()?;
    if !(half_span_nm > 0.0) || !half_span_nm.is_finite() {
        return Err(Error::invalid("half_span_nm", "must be positive and finite"));
    }
    if steps < 2 {
        return Err(Error::invalid("steps", "need at least 2 scan points"));
    }
    let base = scenario.pumps[0].clone();
    let mut points = Vec::with_capacity(steps);
    for k in 0..steps {
        let detuning = -half_span_nm + 2.0 * half_span_nm * k as f64 / (steps - 1) as f64;
        let mut pump = base.clone();
        pump.wavelength_nm = base.wavelength_nm + detuning;
        let mut rate = 0.0;
        for surface in &scenario.metasurfaces {
            rate += total_pair_rate(surface, &pump, scenario.rate_calibration)?;
        }
        points.push(DetuningScanPoint {
            detuning_nm: detuning,
            pump_wavelength_nm: pump.wavelength_nm,
            pair_rate_hz: rate,
        });
    }
    Ok(DetuningScanReport {
        scenario_name: scenario.name.clone(),
        scenario_sha256: hash,
        points,
    })
}

/// Write a power scan as a table or report in `out_dir`.
pub fn write_power_scan(
    out_dir: &Path,
    report: &PowerScanReport,
    format: TableFormat,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    match format {
        TableFormat::Csv => {
            let path = out_dir.join("scan_power.csv");
            let mut text = String::new();
            text.push_str(&format!("# scenario_sha256={}\n", report.scenario_sha256));
            text.push_str(&format!("# t_c_ns={}\n", report.t_c_ns));
            text.push_str(&format!(
                "# fit_amplitude={} fit_r_squared={}\n",
                report.fit.amplitude, report.fit.r_squared
            ));
            if let (Some(a), Some(b)) = (report.fit.free_amplitude, report.fit.free_exponent) {
                text.push_str(&format!("# free_fit_amplitude={a} free_fit_exponent={b}\n"));
            }
            text.push_str("power_mw,g2,std_error,coincidences\n");
            for p in &report.points {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    p.power_mw, p.g2, p.std_error, p.coincidences
                ));
            }
            std::fs::write(&path, text)?;
            files.push(path);
        }
        TableFormat::Json => {
            let path = out_dir.join("scan_power.json");
            io::write_json(&path, report)?;
            files.push(path);
        }
    }
    Ok(relative_names(out_dir, &files))
}

/// Write a detuning scan as a table or report in `out_dir`.
pub fn write_detuning_scan(
    out_dir: &Path,
    report: &DetuningScanReport,
    format: TableFormat,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    match format {
        TableFormat::Csv => {
            let path = out_dir.join("scan_detuning.csv");
            let mut text = String::new();
            text.push_str(&format!("# scenario_sha256={}\n", report.scenario_sha256));
            text.push_str("detuning_nm,pump_wavelength_nm,pair_rate_hz\n");
            for p in &report.points {
                text.push_str(&format!(
                    "{},{},{}\n",
                    p.detuning_nm, p.pump_wavelength_nm, p.pair_rate_hz
                ));
            }
            std::fs::write(&path, text)?;
            files.push(path);
        }
        TableFormat::Json => {
            let path = out_dir.join("scan_detuning.json");
            io::write_json(&path, report)?;
            files.push(path);
        }
    }
    Ok(relative_names(out_dir, &files))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::DetectorSpec;
    use crate::optics::{Metasurface, Resonance};
    use crate::scenario::{ArmConfig, DetectionConfig};
    use crate::spdc::{PumpConfig, StatsMode};
    use tempfile::tempdir;

    fn base_scenario() -> Scenario {
        Scenario {
            schema_version: 1,
            name: "pipeline-unit".into(),
            description: None,
            seed: 11,
            duration_s: 5.0,
            stats_mode: StatsMode::Poisson,
            rate_calibration: 3.5e-7,
            metasurfaces: vec![Metasurface::new(
                "m",
                vec![Resonance::new("ed", 1391.0, 330.0)],
            )],
            pumps: vec![PumpConfig::new(718.0, 9.6)],
            detection: DetectionConfig {
                pre_stages: vec![Stage::Fiber(crate::detection::FiberSpec::new(3.0, 1436.0))],
                splitter_ratio: 0.5,
                arms: vec![
                    ArmConfig {
                        channel: "A".into(),
                        stages: vec![],
                        detector: DetectorSpec {
                            efficiency: 0.8,
                            jitter_sigma_ps: 40.0,
                            dark_count_rate_hz: 50.0,
                            dead_time_ns: 30.0,
                        },
                    },
                    ArmConfig {
                        channel: "B".into(),
                        stages: vec![],
                        detector: DetectorSpec {
                            efficiency: 0.8,
                            jitter_sigma_ps: 40.0,
                            dark_count_rate_hz: 50.0,
                            dead_time_ns: 30.0,
                        },
                    },
                ],
            },
            analysis: vec![
                AnalysisRequest::Histogram {
                    bin_width_ps: 50.0,
                    span_ps: 20_000.0,
                },
                AnalysisRequest::G2Cross { t_c_ns: 1.0 },
            ],
        }
    }

    #[test]
    fn simulate_writes_streams_scenario_and_manifest() {
        let dir = tempdir().unwrap();
        let scenario = base_scenario();
        let summary = simulate(&scenario, dir.path(), &RunOptions::default()).unwrap();
        assert_eq!(summary.passes.len(), 1, "no auto analyses requested");
        assert!(summary.passes[0].pairs_emitted > 1000);
        assert!(dir.path().join("stream_main_A.csv").exists());
        assert!(dir.path().join("stream_main_B.csv").exists());
        assert!(dir.path().join("scenario.json").exists());
        assert!(dir.path().join("density_s0_p0.csv").exists());
        assert!(dir.path().join("manifest.json").exists());
        let manifest = Manifest::load(dir.path()).unwrap().unwrap();
        assert_eq!(manifest.scenario_sha256, summary.scenario_sha256);
        assert!(manifest.files.iter().any(|f| f.path == "stream_main_A.csv"));
    }

    #[test]
    fn run_produces_g2_well_above_one_for_pair_source() {
        let dir = tempdir().unwrap();
        let scenario = base_scenario();
        let (_, ana) = run(&scenario, dir.path(), &RunOptions::default()).unwrap();
        let g2 = ana.g2_cross.unwrap();
        assert!(
            g2.value > 10.0,
            "paired photons must be strongly correlated, got {}",
            g2.value
        );
        assert!(ana.histogram_counts.unwrap() > 100);
        assert!(dir.path().join("histogram.csv").exists());
        assert!(dir.path().join("g2_cross.json").exists());
    }

    #[test]
    fn analyze_rejects_streams_from_a_different_scenario() {
        let dir = tempdir().unwrap();
        let scenario = base_scenario();
        simulate(&scenario, dir.path(), &RunOptions::default()).unwrap();
        let mut other = scenario.clone();
        other.pumps[0].power_mw = 12.0;
        let err = analyze(&other, dir.path(), &RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::HashMismatch { .. }));
        let forced = analyze(
            &other,
            dir.path(),
            &RunOptions {
                force: true,
                ..RunOptions::default()
            },
        );
        assert!(forced.is_ok(), "force must bypass the hash check");
    }

    #[test]
    fn seed_override_changes_hash_and_streams() {
        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        let scenario = base_scenario();
        let s1 = simulate(&scenario, dir_a.path(), &RunOptions::default()).unwrap();
        let s2 = simulate(
            &scenario,
            dir_b.path(),
            &RunOptions {
                seed_override: Some(12),
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_ne!(s1.scenario_sha256, s2.scenario_sha256);
        assert_ne!(
            std::fs::read(dir_a.path().join("stream_main_A.csv")).unwrap(),
            std::fs::read(dir_b.path().join("stream_main_A.csv")).unwrap()
        );
    }

    #[test]
    fn binary_and_csv_streams_analyze_identically() {
        let dir_csv = tempdir().unwrap();
        let dir_bin = tempdir().unwrap();
        let scenario = base_scenario();
        let (_, ana_csv) = run(&scenario, dir_csv.path(), &RunOptions::default()).unwrap();
        let (_, ana_bin) = run(
            &scenario,
            dir_bin.path(),
            &RunOptions {
                stream_format: StreamFormat::Binary,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert!(dir_bin.path().join("stream_main_A.bin").exists());
        let (a, b) = (ana_csv.g2_cross.unwrap(), ana_bin.g2_cross.unwrap());
        assert_eq!(a.coincidences, b.coincidences);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn graph_only_writes_dot_and_json() {
        let dir = tempdir().unwrap();
        let mut scenario = base_scenario();
        scenario.analysis = vec![];
        let (graph, files) =
            graph_only(&scenario, dir.path(), None, &RunOptions::default()).unwrap();
        assert_eq!(graph.classification.to_string(), "single-edge");
        assert!(files.contains(&"graph.dot".to_string()));
        assert!(dir.path().join("graph.json").exists());
        let text = std::fs::read_to_string(dir.path().join("graph.json")).unwrap();
        assert!(text.contains("scenario_sha256"));
    }

    #[test]
    fn detuning_scan_spikes_at_the_degenerate_point() {
        let mut scenario = base_scenario();
        scenario.metasurfaces = vec![Metasurface::new(
            "m",
            vec![Resonance::new("ed", 1446.0, 330.0)],
        )];
        scenario.pumps = vec![PumpConfig::new(723.0, 9.6)];
        scenario.analysis = vec![];
        let report =
            detuning_scan(&scenario, 10.0, 41, &RunOptions::default()).unwrap();
        assert_eq!(report.points.len(), 41);
        let center = &report.points[20];
        assert!((center.detuning_nm).abs() < 1e-9);
        let edge = &report.points[0];
        assert!(
            center.pair_rate_hz > 1.5 * edge.pair_rate_hz,
            "degenerate point {} vs edge {}",
            center.pair_rate_hz,
            edge.pair_rate_hz
        );
    }

    #[test]
    fn power_scan_fits_inverse_power_law() {
        let mut scenario = base_scenario();
        scenario.analysis = vec![];
        scenario.duration_s = 2.0;
        let report = power_scan(
            &scenario,
            &[2.0, 4.0, 8.0, 16.0],
            1.0,
            None,
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(report.points.len(), 4);
        for pair in report.points.windows(2) {
            assert!(
                pair[0].g2 > pair[1].g2,
                "g2 must fall with power: {} at {} mW vs {} at {} mW",
                pair[0].g2,
                pair[0].power_mw,
                pair[1].g2,
                pair[1].power_mw
            );
        }
        assert!(report.fit.amplitude > 0.0);
        if let Some(exp) = report.fit.free_exponent {
            assert!((exp + 1.0).abs() < 0.35, "exponent {exp}");
        }
    }

    #[test]
    fn power_scan_is_deterministic_across_repeat_calls() {
        let mut scenario = base_scenario();
        scenario.analysis = vec![];
        scenario.duration_s = 1.0;
        let opts = RunOptions::default();
        let a = power_scan(&scenario, &[2.0, 4.0, 8.0, 16.0], 1.0, None, &opts).unwrap();
        let b = power_scan(&scenario, &[2.0, 4.0, 8.0, 16.0], 1.0, None, &opts).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            assert_eq!(x.g2.to_bits(), y.g2.to_bits());
            assert_eq!(x.coincidences, y.coincidences);
        }
    }
}
