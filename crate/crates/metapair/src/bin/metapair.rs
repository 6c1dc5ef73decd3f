use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use metapair::error::{Error, Result};
use metapair::pipeline::{
    self, AnalyzeSummary, RunOptions, SimulateSummary, StreamFormat, TableFormat,
};
use metapair::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "metapair",
    version,
    about = "Simulate and analyze photon-pair generation in resonant nonlinear metasurfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and run its analyses in one step
    Run(RunArgs),
    /// Simulate a scenario and record detector timestamp streams
    Simulate(RunArgs),
    /// Run the scenario's analyses over previously recorded streams
    Analyze(AnalyzeArgs),
    /// Reconstruct the pair spectrum of a scenario from dispersed delays
    Spectrum(RunArgs),
    /// Build the entanglement graph of a scenario without simulating
    Graph(GraphArgs),
    /// Scan pump power (Monte Carlo) or pump detuning (analytic)
    Scan(ScanArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CliStreamFormat {
    Csv,
    Binary,
}

impl From<CliStreamFormat> for StreamFormat {
    fn from(f: CliStreamFormat) -> Self {
        match f {
            CliStreamFormat::Csv => StreamFormat::Csv,
            CliStreamFormat::Binary => StreamFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliTableFormat {
    Csv,
    Json,
}

impl From<CliTableFormat> for TableFormat {
    fn from(f: CliTableFormat) -> Self {
        match f {
            CliTableFormat::Csv => TableFormat::Csv,
            CliTableFormat::Json => TableFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanKind {
    Power,
    Detuning,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario's random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// On-disk format for timestamp streams
    #[arg(long, value_enum, default_value_t = CliStreamFormat::Csv)]
    stream_format: CliStreamFormat,
    /// Also write the raw pair events of the main pass as events.csv
    #[arg(long)]
    dump_events: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Scenario JSON file (default: scenario.json inside --out)
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Directory holding the recorded streams; reports are written here
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario's random seed before hash comparison
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Analyze streams even when their recorded scenario hash differs
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct GraphArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario's random seed (only affects the recorded hash)
    #[arg(long)]
    seed: Option<u64>,
    /// Wavelength-bin merge tolerance in nm (default: half linewidth)
    #[arg(long)]
    tolerance_nm: Option<f64>,
}

#[derive(Args)]
struct ScanArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario's random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// What to sweep
    #[arg(long, value_enum)]
    kind: ScanKind,
    /// Output table format
    #[arg(long, value_enum, default_value_t = CliTableFormat::Csv)]
    format: CliTableFormat,
    /// Pump powers in mW for a power scan, comma separated
    #[arg(long, value_delimiter = ',')]
    points: Vec<f64>,
    /// Coincidence window in ns for a power scan
    #[arg(long, default_value_t = 1.0)]
    t_c_ns: f64,
    /// Per-point duration in seconds (default: the scenario's duration)
    #[arg(long)]
    duration_s: Option<f64>,
    /// Detuning half-span in nm for a detuning scan
    #[arg(long, default_value_t = 15.0)]
    half_span_nm: f64,
    /// Number of detuning points
    #[arg(long, default_value_t = 61)]
    steps: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code().clamp(0, 255) as u8)
        }
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid("threads", e.to_string()))?;
    }
    Ok(())
}

fn load_scenario(path: &PathBuf) -> Result<Scenario> {
    Scenario::from_path(path)
}

fn options(
    seed: Option<u64>,
    stream_format: CliStreamFormat,
    dump_events: bool,
    force: bool,
) -> RunOptions {
    RunOptions {
        seed_override: seed,
        stream_format: stream_format.into(),
        dump_events,
        force,
    }
}

fn print_simulate(summary: &SimulateSummary) {
    println!(
        "scenario `{}` (hash {})",
        summary.scenario_name,
        &summary.scenario_sha256[..12]
    );
    for (i, rate) in summary.model_pair_rates_hz.iter().enumerate() {
        println!("pump {i}: model pair rate {rate:.3e} /s");
    }
    for pass in &summary.passes {
        let clicks: Vec<String> = pass
            .clicks
            .iter()
            .map(|c| format!("{}: {} clicks ({:.3e}/s)", c.channel, c.clicks, c.rate_hz))
            .collect();
        println!(
            "pass {}: {} pairs emitted; {}",
            pass.pass,
            pass.pairs_emitted,
            clicks.join(", ")
        );
    }
    println!("wrote {} files", summary.files.len());
}

fn print_analyze(summary: &AnalyzeSummary) {
    for line in &summary.lines {
        println!("{line}");
    }
    println!("wrote {} files", summary.files.len());
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            init_threads(args.threads)?;
            let scenario = load_scenario(&args.scenario)?;
            let opts = options(args.seed, args.stream_format, args.dump_events, false);
            let (sim, ana) = pipeline::run(&scenario, &args.out, &opts)?;
            print_simulate(&sim);
            print_analyze(&ana);
            Ok(())
        }
        Command::Simulate(args) => {
            init_threads(args.threads)?;
            let scenario = load_scenario(&args.scenario)?;
            let opts = options(args.seed, args.stream_format, args.dump_events, false);
            let summary = pipeline::simulate(&scenario, &args.out, &opts)?;
            print_simulate(&summary);
            Ok(())
        }
        Command::Analyze(args) => {
            init_threads(args.threads)?;
            let scenario_path = args
                .scenario
                .unwrap_or_else(|| args.out.join("scenario.json"));
            let scenario = load_scenario(&scenario_path)?;
            let opts = RunOptions {
                seed_override: args.seed,
                force: args.force,
                ..RunOptions::default()
            };
            let summary = pipeline::analyze(&scenario, &args.out, &opts)?;
            print_analyze(&summary);
            Ok(())
        }
        Command::Spectrum(args) => {
            init_threads(args.threads)?;
            let scenario = load_scenario(&args.scenario)?;
            let opts = options(args.seed, args.stream_format, args.dump_events, false);
            let (_, ana) = pipeline::spectrum_only(&scenario, &args.out, &opts)?;
            print_analyze(&ana);
            Ok(())
        }
        Command::Graph(args) => {
            let scenario = load_scenario(&args.scenario)?;
            let opts = RunOptions {
                seed_override: args.seed,
                ..RunOptions::default()
            };
            let (graph, files) =
                pipeline::graph_only(&scenario, &args.out, args.tolerance_nm, &opts)?;
            println!(
                "graph: {} ({} vertices, {} edges)",
                graph.classification,
                graph.vertices.len(),
                graph.edges.len()
            );
            for v in &graph.vertices {
                let marker = if v.degenerate { " [degenerate]" } else { "" };
                println!("  {:.2} nm +/- {:.2} nm{marker}", v.center_nm, v.tolerance_nm);
            }
            for w in &graph.warnings {
                println!("warning: {w}");
            }
            println!("wrote {} files", files.len());
            Ok(())
        }
        Command::Scan(args) => {
            init_threads(args.threads)?;
            let scenario = load_scenario(&args.scenario)?;
            let opts = RunOptions {
                seed_override: args.seed,
                ..RunOptions::default()
            };
            match args.kind {
                ScanKind::Power => {
                    if args.points.is_empty() {
                        return Err(Error::invalid(
                            "points",
                            "power scan needs --points, e.g. --points 1,2,4,8,16,32",
                        ));
                    }
                    let report = pipeline::power_scan(
                        &scenario,
                        &args.points,
                        args.t_c_ns,
                        args.duration_s,
                        &opts,
                    )?;
                    for p in &report.points {
                        println!(
                            "P = {:>8.3} mW: g2 = {:.3} +/- {:.3} ({} coincidences)",
                            p.power_mw, p.g2, p.std_error, p.coincidences
                        );
                    }
                    println!(
                        "fit g2 = 1 + a/P: a = {:.3}, R^2 = {:.4}",
                        report.fit.amplitude, report.fit.r_squared
                    );
                    if let (Some(a), Some(b)) =
                        (report.fit.free_amplitude, report.fit.free_exponent)
                    {
                        println!("free fit g2 - 1 = a * P^b: a = {a:.3}, b = {b:.3}");
                    }
                    let files =
                        pipeline::write_power_scan(&args.out, &report, args.format.into())?;
                    println!("wrote {}", files.join(", "));
                }
                ScanKind::Detuning => {
                    let report = pipeline::detuning_scan(
                        &scenario,
                        args.half_span_nm,
                        args.steps,
                        &opts,
                    )?;
                    let peak = report
                        .points
                        .iter()
                        .max_by(|a, b| a.pair_rate_hz.total_cmp(&b.pair_rate_hz))
                        .expect("at least two points");
                    println!(
                        "{} points; peak rate {:.3e} /s at detuning {:+.2} nm (pump {:.2} nm)",
                        report.points.len(),
                        peak.pair_rate_hz,
                        peak.detuning_nm,
                        peak.pump_wavelength_nm
                    );
                    let files =
                        pipeline::write_detuning_scan(&args.out, &report, args.format.into())?;
                    println!("wrote {}", files.join(", "));
                }
            }
            Ok(())
        }
    }
}
