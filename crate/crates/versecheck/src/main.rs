//! Thin command-line front end over the library's command layer.

use clap::{Parser, Subcommand};

use versecheck::commands::{self, BackendSet, CommandError, Overrides};
use versecheck::config::RunConfig;
use versecheck::eval::ReportFormat;
use versecheck::judge::PromptKind;
use versecheck::statdetect::Detector;

#[derive(Parser)]
#[command(
    name = "versecheck",
    about = "Detect AI-generated modern Chinese poetry: statistical detectors, LLM judges, and evaluation",
    version
)]
struct Cli {
    /// Path to the run configuration file.
    #[arg(long, global = true, default_value = "versecheck.toml")]
    config: std::path::PathBuf,

    /// Restrict to these detectors (repeatable).
    #[arg(long = "detector", global = true)]
    detectors: Vec<Detector>,

    /// Judge prompt kind override.
    #[arg(long, global = true)]
    prompt: Option<PromptKind>,

    /// Restrict to pairs of one generator.
    #[arg(long, global = true)]
    generator: Option<String>,

    /// Build prompts and write them out without calling any backend.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Report format: text, csv, or md.
    #[arg(long, global = true)]
    format: Option<ReportFormat>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the corpus manifest and print statistics.
    Ingest,
    /// Populate the sequence-score cache for all paired poems.
    Score,
    /// Calibrate per-generator detector thresholds on the train split.
    Calibrate,
    /// Classify the test split with calibrated detectors.
    Detect,
    /// Judge the test split with an LLM prompt protocol.
    Judge,
    /// Generate AI counterpart poems for every human poem.
    GenPoems,
    /// Generate one image per human poem.
    GenImages,
    /// Render combined reports from all detect/judge rows.
    Evaluate,
}

fn run(cli: Cli) -> Result<String, CommandError> {
    let config = RunConfig::load(&cli.config)?;
    let overrides = Overrides {
        detectors: if cli.detectors.is_empty() {
            None
        } else {
            Some(cli.detectors.clone())
        },
        prompt: cli.prompt,
        generator: cli.generator.clone(),
        dry_run: cli.dry_run,
        format: cli.format,
    };
    match cli.command {
        Command::Ingest => {
            let report = commands::cmd_ingest(&config)?;
            Ok(report.render())
        }
        Command::Score => {
            let backends = BackendSet::from_config(&config)?;
            let summary = commands::cmd_score(&config, &backends, &overrides)?;
            Ok(format!(
                "scored {} poems under {} model(s) [config {}]\n",
                summary.poems,
                summary.models.len(),
                summary.config_digest
            ))
        }
        Command::Calibrate => {
            let backends = BackendSet::from_config(&config)?;
            let records = commands::cmd_calibrate(&config, &backends, &overrides)?;
            let mut out = String::new();
            for r in &records {
                out.push_str(&format!(
                    "{} / {}: boundary {:.6}, train Macro-F1 {:.4} (n={})\n",
                    r.threshold.detector,
                    r.generator,
                    r.threshold.boundary,
                    r.threshold.train_metric,
                    r.threshold.calibration_meta.n_train
                ));
            }
            Ok(out)
        }
        Command::Detect => {
            let backends = BackendSet::from_config(&config)?;
            let rows = commands::cmd_detect(&config, &backends, &overrides)?;
            Ok(versecheck::eval::render_report(
                &rows,
                overrides.format.unwrap_or(ReportFormat::Text),
            ))
        }
        Command::Judge => {
            let backends = BackendSet::from_config(&config)?;
            let summary = commands::cmd_judge(&config, &backends, &overrides)?;
            let mut out = format!(
                "{}: judged {} poems ({} unparseable)\n",
                summary.kind, summary.judged, summary.unparseable
            );
            if let Some(example) = &summary.example_pair_id {
                out.push_str(&format!("example pair: {example}\n"));
            }
            out.push_str(&versecheck::eval::render_report(
                &summary.rows,
                overrides.format.unwrap_or(ReportFormat::Text),
            ));
            Ok(out)
        }
        Command::GenPoems => {
            let backends = BackendSet::from_config(&config)?;
            let summary = commands::cmd_gen_poems(&config, &backends, &overrides)?;
            Ok(format!(
                "generated {} poems ({} reused) -> {}\n",
                summary.generated,
                summary.reused,
                summary.manifest.display()
            ))
        }
        Command::GenImages => {
            let backends = BackendSet::from_config(&config)?;
            let summary = commands::cmd_gen_images(&config, &backends, &overrides)?;
            Ok(format!(
                "generated {} images ({} reused) -> {}\n",
                summary.generated,
                summary.reused,
                summary.manifest.display()
            ))
        }
        Command::Evaluate => commands::cmd_evaluate(&config, &overrides),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(output) => {
            print!("{output}");
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
