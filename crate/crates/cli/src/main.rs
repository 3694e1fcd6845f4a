use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conflict_core::config::PipelineConfig;
use conflict_core::enhance::EnhancedTrack;
use conflict_core::io::GROUND_TRUTH_FILE;
use conflict_core::pipeline::{
    self, analyse, anomaly_reports, load_scenarios, render_reports, write_outputs, PipelineError, ScenarioResult, Stage,
};
use conflict_core::synth::{synth_corpus, CorpusSpec, NoiseModel};
use conflict_core::track::Scenario;

#[derive(Debug, Parser)]
#[command(name = "conflict", version, about = "Two-agent conflict extraction and resolution metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate scenario files; with --out, re-export them canonically.
    Ingest(Common),
    /// Extract conflict cases (cases.csv).
    Select(Common),
    /// Enhance tracks (enhanced scenario files and enhancement.csv).
    Enhance(Common),
    /// Data-quality and regime reports (anomaly.csv, regimes.csv).
    Assess(Common),
    /// Per-case safety and efficiency metrics (metrics.csv).
    Metrics(Common),
    /// Binned distributions and run summary (histograms.csv, summary.json).
    Report(Common),
    /// Generate a seeded synthetic corpus with ground truth.
    Synth(SynthArgs),
    /// Run every stage and write all artifacts.
    Pipeline(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config with dotted section keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario file or directory; a synthetic corpus is used when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    scenarios: usize,
    #[arg(long, default_value_t = 0.0)]
    speed_noise_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    zero_fill_probability: f64,
    #[arg(long)]
    boundary_corruption: bool,
    /// Omit parked vehicles and bystanders.
    #[arg(long)]
    no_background: bool,
}

fn config_of(args: &Common) -> Result<PipelineConfig, PipelineError> {
    let cfg_err = |e: conflict_core::Error| PipelineError::Input { stage: Stage::Config, message: e.to_string() };
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path).map_err(cfg_err)?,
        None => PipelineConfig::default(),
    };
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate().map_err(cfg_err)?;
    Ok(cfg)
}

fn require_out(cfg: &PipelineConfig) -> Result<PathBuf, PipelineError> {
    cfg.output
        .clone()
        .ok_or_else(|| PipelineError::Input { stage: Stage::Config, message: "--out is required".into() })
}

fn pick(files: Vec<(String, Vec<u8>)>, names: &[&str]) -> Vec<(String, Vec<u8>)> {
    files.into_iter().filter(|(n, _)| names.contains(&n.as_str())).collect()
}

fn enhanced_scenarios(results: &[ScenarioResult], scenarios: &[Scenario]) -> Result<Vec<Scenario>, PipelineError> {
    results
        .iter()
        .zip(scenarios)
        .map(|(r, s)| {
            let tracks = r.enhanced.iter().map(EnhancedTrack::to_track).collect();
            Scenario::new(r.scenario_id.clone(), tracks, s.lane_graph.clone())
                .map_err(|e| PipelineError::Invariant { stage: Stage::Enhance, message: e.to_string() })
        })
        .collect()
}

fn run_stage(command: &Command, args: &Common) -> Result<(), PipelineError> {
    let cfg = config_of(args)?;
    let mut scenarios = load_scenarios(&cfg)?;
    scenarios.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    if let Command::Ingest(_) = command {
        let tracks: usize = scenarios.iter().map(|s| s.tracks.len()).sum();
        println!("{} scenarios, {tracks} tracks", scenarios.len());
        if let Some(out) = &cfg.output {
            write_outputs(out, &pipeline::scenario_files(&scenarios)?)?;
        }
        return Ok(());
    }
    let out = require_out(&cfg)?;
    let results = analyse(&scenarios, &cfg)?;
    let all = render_reports(&results, &cfg)?;
    let files = match command {
        Command::Select(_) => pick(all, &["cases.csv"]),
        Command::Enhance(_) => {
            let mut files = pipeline::scenario_files(&enhanced_scenarios(&results, &scenarios)?)?;
            files.extend(pick(all, &["enhancement.csv"]));
            files
        }
        Command::Assess(_) => pick(all, &["cases.csv", "anomaly.csv", "regimes.csv"]),
        Command::Metrics(_) => pick(all, &["metrics.csv"]),
        Command::Report(_) => pick(all, &["histograms.csv", "summary.json"]),
        _ => all,
    };
    write_outputs(&out, &files)?;
    let cases: usize = results.iter().map(|r| r.cases.len()).sum();
    println!("{} scenarios, {cases} cases → {}", results.len(), out.display());
    if let Command::Assess(_) = command {
        let (raw, enh) = anomaly_reports(&results, &cfg);
        for (name, rep) in [("raw", raw), ("enhanced", enh)] {
            if let Some(r) = rep {
                println!("{name:>8}: jsi {:.2}%  acc {:.2}%  jerk {:.2}%", r.all.jsi_pct, r.all.acc_pct, r.all.jerk_pct);
            }
        }
    }
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<(), PipelineError> {
    let spec = CorpusSpec {
        scenarios: args.scenarios,
        noise: NoiseModel {
            speed_noise_sigma: args.speed_noise_sigma,
            zero_fill_probability: args.zero_fill_probability,
            boundary_corruption: args.boundary_corruption,
        },
        background: !args.no_background,
    };
    let corpus = synth_corpus(&spec, args.seed)
        .map_err(|e| PipelineError::Input { stage: Stage::Synth, message: e.to_string() })?;
    let scenarios: Vec<Scenario> = corpus.iter().map(|s| s.scenario.clone()).collect();
    let truth: Vec<_> = corpus.into_iter().map(|s| s.truth).collect();
    let mut files = pipeline::scenario_files(&scenarios)?;
    files.push((GROUND_TRUTH_FILE.into(), pipeline::ground_truth_csv(&truth)?));
    write_outputs(&args.out, &files)?;
    println!("{} scenarios → {}", scenarios.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Ingest(a)
        | Command::Select(a)
        | Command::Enhance(a)
        | Command::Assess(a)
        | Command::Metrics(a)
        | Command::Report(a)
        | Command::Pipeline(a) => run_stage(&cli.command, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
