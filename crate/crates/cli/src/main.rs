use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use kinemarker::ingest::{write_recording, Action, ConventionName};
use kinemarker::pipeline::{
    self, build_features, calibrate_sources, emit_plot_data, load_inputs, PipelineConfig, PipelineError, PlotData,
};
use kinemarker::stats::Tails;
use kinemarker::synth::{write_cohort, CohortSpec, PlantedEffect};

#[derive(Parser)]
#[command(
    name = "kinemarker",
    version,
    about = "Movement biomarkers from 3D skeleton recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and resample every recording, writing canonical copies.
    Ingest(RunArgs),
    /// Write one windowed feature matrix CSV per patient, session and source.
    Features(RunArgs),
    /// Rank features per patient and count top features across patients.
    Biomarkers(RunArgs),
    /// Regress one pose source's features onto the other's.
    Calibrate(RunArgs),
    /// Paired pre/post tests and Bland-Altman summaries.
    Assess(RunArgs),
    /// Run every stage and write the full report bundle.
    Report(RunArgs),
    /// Generate a synthetic cohort and a matching config file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    tails: Option<TailsArg>,
    /// Limits of agreement multiplier, e.g. 1.96 or 2.0.
    #[arg(long)]
    ba_multiplier: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TailsArg {
    One,
    Two,
}

#[derive(Clone, Copy, ValueEnum)]
enum EffectArg {
    None,
    SlowerSquatKnee,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    patients: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, value_enum, default_value = "slower-squat-knee")]
    effect: EffectArg,
    /// Comma-separated source skeletons.
    #[arg(long, value_delimiter = ',', default_value = "mesh_model_24")]
    sources: Vec<ConventionName>,
}

/// A failure with its exit code: 1 for invalid input, 2 for I/O.
struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        // The pipeline error already names its cause.
        Failure {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn io_failure(error: anyhow::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{error:#}"),
    }
}

fn invalid(error: anyhow::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{error:#}"),
    }
}

type Outcome = Result<(), Failure>;

fn load_config(args: &RunArgs) -> Result<PipelineConfig, Failure> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(t) = args.tails {
        config.tails = match t {
            TailsArg::One => Tails::One,
            TailsArg::Two => Tails::Two,
        };
    }
    if let Some(m) = args.ba_multiplier {
        config.ba_multiplier = m;
    }
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(io_failure)?;
    }
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(io_failure)
}

fn ensure_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(io_failure)
}

fn ingest(args: &RunArgs) -> Outcome {
    let config = load_config(args)?;
    let inputs = load_inputs(&config)?;
    let dir = config.output_dir.join("canonical");
    ensure_dir(&dir)?;
    for (name, series) in inputs.files.iter().zip(&inputs.series) {
        let path = dir.join(name);
        let file = fs::File::create(&path)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(io_failure)?;
        let mut out = BufWriter::new(file);
        write_recording(&series.to_recording(), &mut out)
            .and_then(|()| out.flush())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(io_failure)?;
    }
    println!(
        "{} recordings valid; canonical copies in {}",
        inputs.files.len(),
        dir.display()
    );
    Ok(())
}

fn features(args: &RunArgs) -> Outcome {
    let config = load_config(args)?;
    let inputs = load_inputs(&config)?;
    let matrices = build_features(&inputs.series, &config)?;
    let dir = config.output_dir.join("features");
    ensure_dir(&dir)?;
    for m in &matrices {
        let mut buf = Vec::new();
        m.write_csv(&mut buf).map_err(|e| invalid(e.into()))?;
        let name = format!("{}_{}_{}.csv", m.patient_id, m.session, m.source);
        write_file(&dir.join(name), &buf)?;
    }
    println!("{} feature matrices written to {}", matrices.len(), dir.display());
    Ok(())
}

fn assess_source(config: &PipelineConfig, present: &[ConventionName]) -> Result<ConventionName, Failure> {
    match config.assess_source {
        Some(s) if present.contains(&s) => Ok(s),
        Some(s) => Err(invalid(anyhow::anyhow!("assess_source {s} has no recordings"))),
        None if present.contains(&ConventionName::MeshModel24) => Ok(ConventionName::MeshModel24),
        None => present
            .first()
            .copied()
            .ok_or_else(|| invalid(anyhow::anyhow!("no recordings"))),
    }
}

fn biomarkers(args: &RunArgs) -> Outcome {
    let config = load_config(args)?;
    let inputs = load_inputs(&config)?;
    let matrices = build_features(&inputs.series, &config)?;
    let mut present: Vec<ConventionName> = matrices.iter().map(|m| m.source).collect();
    present.sort();
    present.dedup();
    let source = assess_source(&config, &present)?;
    let rankings = pipeline::rank_biomarkers(&matrices, source)?;
    let histograms = pipeline::histograms(&matrices, source, config.histogram_session, config.top_k)?;
    ensure_dir(&config.output_dir)?;
    write_file(
        &config.output_dir.join("rankings.csv"),
        &pipeline::rankings_csv(&rankings),
    )?;
    for action in Action::ALL {
        match histograms.iter().find(|h| h.action == action) {
            Some(h) => {
                emit_plot_data(
                    PlotData::Histogram(h),
                    &config.output_dir,
                    &format!("histogram_{action}"),
                    config.svg,
                )?;
                let top: Vec<String> = h
                    .sorted()
                    .iter()
                    .take(config.top_k)
                    .map(|(f, c)| format!("{f} ({c})"))
                    .collect();
                println!("{action}: {}", top.join(", "));
            }
            None => write_file(
                &config.output_dir.join(format!("histogram_{action}.csv")),
                b"feature,count\n",
            )?,
        }
    }
    Ok(())
}

fn calibrate(args: &RunArgs) -> Outcome {
    let config = load_config(args)?;
    let inputs = load_inputs(&config)?;
    let matrices = build_features(&inputs.series, &config)?;
    let has = |s| matrices.iter().any(|m| m.source == s);
    if !(has(ConventionName::MeshModel24) && has(ConventionName::DepthTracker32)) {
        return Err(invalid(anyhow::anyhow!(
            "calibration needs recordings from both {} and {}",
            ConventionName::MeshModel24,
            ConventionName::DepthTracker32
        )));
    }
    let entries = calibrate_sources(&matrices, ConventionName::MeshModel24, ConventionName::DepthTracker32);
    write_file(
        &config.output_dir.join("calibration.csv"),
        &pipeline::calibration_csv(&entries),
    )?;
    for e in &entries {
        match (&e.model, &e.correlation) {
            (Some(m), Some(c)) => println!(
                "{}: slope {:.4} intercept {:.4} rmse {:.4} -> {:.4} r {:.4}",
                e.biomarker, m.slope, m.intercept, m.rmse_before, m.rmse_after, c.r
            ),
            _ => println!("{}: {}", e.biomarker, e.error.as_deref().unwrap_or("failed")),
        }
    }
    Ok(())
}

fn print_significant(report: &kinemarker::AnalysisReport) {
    let flagged = report.significant();
    println!(
        "{} patients, {} tests, {} significant",
        report.provenance.patients.len(),
        report.tests.len(),
        flagged.len()
    );
    for t in flagged {
        let r = t.result.expect("significant tests carry a result");
        println!(
            "  {} {} {}: t = {:.3}, p one-tailed {:.4}, p two-tailed {:.4}",
            t.action, t.biomarker, t.descriptor, r.t, r.p_one, r.p_two
        );
    }
}

fn assess(args: &RunArgs) -> Outcome {
    let config = load_config(args)?;
    let report = pipeline::run_pipeline(&config)?;
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    for action in Action::ALL {
        write_file(
            &dir.join(format!("ttest_{action}.csv")),
            &pipeline::ttest_csv(&report.tests, action),
        )?;
    }
    for b in &report.bland_altman {
        if let Some(s) = &b.summary {
            let name = b.file_name();
            emit_plot_data(PlotData::BlandAltman(s), dir, name.trim_end_matches(".csv"), config.svg)?;
        }
    }
    write_file(
        &dir.join("descriptors.csv"),
        &pipeline::descriptors_csv(&report.descriptors),
    )?;
    print_significant(&report);
    Ok(())
}

fn report(args: &RunArgs) -> Outcome {
    let config = load_config(args)?;
    let report = pipeline::run_pipeline(&config)?;
    pipeline::write_bundle(&report, &config.output_dir, config.svg)?;
    print_significant(&report);
    println!("report written to {}", config.output_dir.display());
    Ok(())
}

fn synth(args: &SynthArgs) -> Outcome {
    if args.patients == 0 || args.repeats == 0 || args.sources.is_empty() {
        return Err(invalid(anyhow::anyhow!(
            "patients, repeats and sources must be non-empty"
        )));
    }
    let spec = CohortSpec {
        patients: args.patients,
        repeats: args.repeats,
        seed: args.seed,
        sources: args.sources.clone(),
        effect: match args.effect {
            EffectArg::None => PlantedEffect::None,
            EffectArg::SlowerSquatKnee => PlantedEffect::SlowerSquatKnee,
        },
        ..CohortSpec::default()
    };
    let files = write_cohort(&spec, &args.out)
        .with_context(|| format!("writing cohort to {}", args.out.display()))
        .map_err(io_failure)?;
    let config = PipelineConfig {
        input_dir: ".".into(),
        output_dir: "report".into(),
        ..PipelineConfig::default()
    };
    let config_path = args.out.join("config.json");
    write_file(&config_path, config.to_json_pretty().as_bytes())?;
    println!(
        "{} recordings written; config at {}",
        files.len(),
        config_path.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Features(a) => features(a),
        Command::Biomarkers(a) => biomarkers(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Assess(a) => assess(a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
