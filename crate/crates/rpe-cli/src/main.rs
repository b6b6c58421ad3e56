//! Command-line front end: pick a scenario, set its knobs, run it, and
//! print the report as text or schema-stable JSON.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rpe_core::atoms::AtomPrep;
use rpe_core::experiments::{run, ErasureMode, ExperimentConfig, Scenario};
use rpe_core::measurement::SampleConfig;
use rpe_core::report::ExperimentReport;
use rpe_core::SimError;

const USAGE_EXIT: u8 = 2;
const DOMAIN_EXIT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rpe",
    version,
    about = "Amplitude-exact photon-atom interference and entanglement experiments",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its report.
    Run(RunArgs),
    /// List the available scenarios.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name; accepts snake_case, kebab-case, and the short
    /// aliases `mzi` and `ifm`. May be omitted when --config names one.
    scenario: Option<String>,

    /// Alternative to the positional scenario argument.
    #[arg(long = "scenario", value_name = "SCENARIO", conflicts_with = "scenario")]
    scenario_flag: Option<String>,

    /// Keep the exit beam splitter in place or pull it out.
    #[arg(long, value_enum)]
    bs: Option<BsChoice>,

    /// Relative path phase in radians; omitted means the scenario default
    /// (auto-tuned to the dark port where one exists).
    #[arg(long)]
    phase: Option<f64>,

    /// Which-path erasure mode for rpe_coherent.
    #[arg(long, value_enum)]
    erasure: Option<EraseChoice>,

    /// Place the blocker next to source v (two_source_ifm only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    blocker: Option<bool>,

    /// Weak-source single-photon amplitude.
    #[arg(long = "p")]
    source_amplitude: Option<f64>,

    /// Weak-excitation amplitude for the three-level scheme.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Photon-number truncation per mode.
    #[arg(long = "nmax", value_parser = clap::value_parser!(u32).range(1..=2))]
    n_max: Option<u32>,

    /// Atom preparation convention: phase-plus or phase-minus.
    #[arg(long)]
    prep: Option<String>,

    /// Sample the detection events this many times.
    #[arg(long)]
    shots: Option<u64>,

    /// Seed for the sampler (default 0).
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Suppress the timestamp so identical runs are byte-identical.
    #[arg(long)]
    deterministic: bool,

    /// JSON file with the same schema as the report's `config` block;
    /// explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BsChoice {
    In,
    Out,
}

#[derive(Clone, Copy, ValueEnum)]
enum EraseChoice {
    None,
    #[value(alias = "position_measurement")]
    Position,
    #[value(alias = "unite_and_spin")]
    Unite,
}

impl From<EraseChoice> for ErasureMode {
    fn from(value: EraseChoice) -> Self {
        match value {
            EraseChoice::None => ErasureMode::None,
            EraseChoice::Position => ErasureMode::PositionMeasurement,
            EraseChoice::Unite => ErasureMode::UniteAndSpin,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for scenario in Scenario::ALL {
                println!("{:<24} {}", scenario.name(), scenario.describe());
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match execute(args) {
            Ok(text) => {
                println!("{text}");
                ExitCode::SUCCESS
            }
            Err(Failure::Usage(message)) => {
                eprintln!("error: {message}");
                ExitCode::from(USAGE_EXIT)
            }
            Err(Failure::Domain(error)) => {
                eprintln!("error: {error}");
                ExitCode::from(DOMAIN_EXIT)
            }
        },
    }
}

enum Failure {
    Usage(String),
    Domain(SimError),
}

fn parse_prep(token: &str) -> Result<AtomPrep, Failure> {
    match token.to_ascii_lowercase().replace('-', "_").as_str() {
        "phase_plus" | "eq1" => Ok(AtomPrep::PhaseOnPlus),
        "phase_minus" | "eq8" => Ok(AtomPrep::PhaseOnMinus),
        other => Err(Failure::Usage(format!(
            "unknown preparation `{other}` (expected phase-plus or phase-minus)"
        ))),
    }
}

fn execute(args: RunArgs) -> Result<String, Failure> {
    let named_scenario = args.scenario.as_ref().or(args.scenario_flag.as_ref());
    let mut cfg = match &args.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(|e| {
                Failure::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<ExperimentConfig>(&raw).map_err(|e| {
                Failure::Usage(format!("cannot parse config {}: {e}", path.display()))
            })?
        }
        None => {
            let Some(name) = named_scenario else {
                return Err(Failure::Usage(
                    "a scenario name is required unless --config provides one".into(),
                ));
            };
            let scenario = Scenario::from_str(name).map_err(|e| Failure::Usage(e.to_string()))?;
            ExperimentConfig::new(scenario)
        }
    };
    if let (Some(name), Some(_)) = (named_scenario, &args.config) {
        let scenario = Scenario::from_str(name).map_err(|e| Failure::Usage(e.to_string()))?;
        if scenario != cfg.scenario {
            return Err(Failure::Usage(format!(
                "scenario `{scenario}` contradicts the config file's `{}`",
                cfg.scenario
            )));
        }
    }

    if let Some(bs) = args.bs {
        cfg.bs_present = matches!(bs, BsChoice::In);
    }
    if let Some(phase) = args.phase {
        cfg.phase = Some(phase);
    }
    if let Some(erasure) = args.erasure {
        cfg.erasure = erasure.into();
    }
    if let Some(blocker) = args.blocker {
        cfg.blocker_present = blocker;
    }
    if let Some(p) = args.source_amplitude {
        cfg.source_amplitude = p;
    }
    if let Some(epsilon) = args.epsilon {
        cfg.epsilon = epsilon;
    }
    if let Some(n_max) = args.n_max {
        cfg.n_max = n_max;
    }
    if let Some(token) = &args.prep {
        cfg.prep = Some(parse_prep(token)?);
    }
    match (args.shots, args.seed) {
        (Some(shots), seed) => {
            cfg.samples = Some(SampleConfig {
                shots,
                seed: seed.unwrap_or(0),
            });
        }
        (None, Some(_)) => {
            return Err(Failure::Usage("--seed needs --shots".into()));
        }
        (None, None) => {}
    }

    let mut report = run(&cfg).map_err(Failure::Domain)?;
    if !args.deterministic {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_default();
        report.provenance.timestamp = Some(now);
    }

    Ok(match args.format {
        Format::Json => serde_json::to_string_pretty(&report)
            .map_err(|e| Failure::Usage(format!("serialization failed: {e}")))?,
        Format::Text => render_text(&report),
    })
}

/// Significant-but-not-noisy display of a probability for the summary line.
fn trim(value: f64) -> String {
    let mut text = format!("{value:.12}");
    while text.contains('.') && (text.ends_with('0') || text.ends_with('.')) {
        let last = text.pop();
        if last == Some('.') {
            break;
        }
    }
    if text.is_empty() || text == "-" {
        "0".to_string()
    } else {
        text
    }
}

fn render_text(report: &ExperimentReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", report.scenario);
    let cfgv = &report.config;
    let _ = writeln!(
        out,
        "config: bs={} phase={} erasure={} blocker={} p={} epsilon={} nmax={}",
        if cfgv.bs_present { "in" } else { "out" },
        trim(cfgv.phase),
        cfgv.erasure.token(),
        if cfgv.blocker_present { "on" } else { "off" },
        cfgv.source_amplitude,
        cfgv.epsilon,
        cfgv.n_max
    );
    let pc = report.probability("p_detector_c").unwrap_or(0.0);
    let pd = report.probability("p_detector_d").unwrap_or(0.0);
    let _ = writeln!(out, "P(C)={} P(D)={}", trim(pc), trim(pd));
    let _ = writeln!(out, "probabilities:");
    for (key, value) in &report.probabilities {
        let _ = writeln!(out, "  {key} = {value}");
    }
    if let Some(discard) = report.discard_probability {
        let _ = writeln!(out, "discard probability: {discard}");
    }
    if let Some(concurrence) = report.concurrence {
        let _ = writeln!(out, "concurrence: {concurrence}");
    }
    if let Some(chsh) = &report.chsh {
        let _ = writeln!(out, "chsh: {}", chsh.value);
        let axis = |d: &rpe_core::measurement::SpinDirection| {
            format!("(theta={}, phi={})", trim(d.theta), trim(d.phi))
        };
        let _ = writeln!(
            out,
            "  axes: a={} a2={} b={} b2={}",
            axis(&chsh.settings.a),
            axis(&chsh.settings.a2),
            axis(&chsh.settings.b),
            axis(&chsh.settings.b2)
        );
    }
    if !report.conditional_states.is_empty() {
        let _ = writeln!(out, "conditional states:");
        for (name, amplitudes) in &report.conditional_states {
            let _ = writeln!(out, "  {name}:");
            for entry in amplitudes {
                let _ = writeln!(out, "    {}{:+}i  |{}>", entry.re, entry.im, entry.ket);
            }
        }
    }
    if let Some(samples) = &report.samples {
        let _ = writeln!(
            out,
            "samples (seed={}, shots={}, {}):",
            samples.seed, samples.shots, samples.algorithm
        );
        for (event, count) in &samples.counts {
            let _ = writeln!(out, "  {event}: {count}");
        }
    }
    let _ = write!(
        out,
        "provenance: {} v{}; {}",
        report.provenance.engine, report.provenance.version, report.provenance.beam_splitter
    );
    if let Some(policy) = &report.provenance.chsh_axes_policy {
        let _ = write!(out, "; axes: {policy}");
    }
    if report.provenance.phase_autotuned {
        let _ = write!(out, "; phase auto-tuned");
    }
    out
}
