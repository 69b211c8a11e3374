use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use synthpass_cli::{
    cmd_evaluate, cmd_filter, cmd_generate, cmd_inspect, cmd_split, EvaluateOptions,
    FilterOptions, GenerateOptions, SplitMode, SplitOptions,
};
use synthpass_core::metrics::{Pai, PaiSelector};

/// Deterministic synthetic passport pipeline: generation, face filtering,
/// dataset splits and PAD score evaluation.
#[derive(Parser)]
#[command(name = "synthpass", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate subjects and render their documents.
    Generate(GenerateArgs),
    /// Rank face candidate pools and report the retained images.
    Filter(FilterArgs),
    /// Split a dataset manifest into train/validation/test.
    Split(SplitArgs),
    /// Compute PAD metrics from a classifier score file.
    Evaluate(EvaluateArgs),
    /// Summarize a country config; optionally render the empty template.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Country config: a config.toml path, a country directory, or a name
    /// resolved under $SYNTHPASS_CONFIG_DIR.
    #[arg(long)]
    config: PathBuf,
    /// Number of subjects (one document each).
    #[arg(long)]
    count: u32,
    /// Master seed; identical seeds reproduce identical outputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (images/, subjects.jsonl, manifest.csv, receipt).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses all cores. Output is identical either way.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Canvas scale factor (0.5 renders at half resolution).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Face candidate pools; defaults to <config dir>/../faces.
    #[arg(long)]
    faces_dir: Option<PathBuf>,
    /// Signature scans; defaults to <config dir>/../signatures.
    #[arg(long)]
    signatures_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Directory of per-subject candidate pools.
    #[arg(long)]
    faces_dir: PathBuf,
    /// Report file (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Images to retain per subject.
    #[arg(long, default_value_t = 3)]
    keep: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitModeArg {
    Intra,
    Loo,
}

#[derive(Clone, Copy, ValueEnum)]
enum PaiArg {
    Print,
    Screen,
}

impl From<PaiArg> for Pai {
    fn from(p: PaiArg) -> Self {
        match p {
            PaiArg::Print => Pai::Print,
            PaiArg::Screen => Pai::Screen,
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Dataset manifest CSV (path,country,subject_id,label,pai).
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    mode: SplitModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for train/validation/test/excluded CSVs.
    #[arg(long)]
    out: PathBuf,
    /// Intra mode train/validation/test shares.
    #[arg(long, num_args = 3, value_delimiter = ',', default_values_t = [0.6, 0.2, 0.2])]
    ratios: Vec<f64>,
    /// Held-out country (loo mode).
    #[arg(long)]
    test_country: Option<String>,
    /// Attack instrument kept in the test set (loo mode).
    #[arg(long, value_enum)]
    test_pai: Option<PaiArg>,
    /// Share of training-side subjects used for validation (loo mode).
    #[arg(long, default_value_t = 0.25)]
    val_fraction: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectorArg {
    Worst,
    Print,
    Screen,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Score file: optional polarity pragma + path,label,pai,score CSV.
    #[arg(long)]
    scores: PathBuf,
    /// Output directory (report.json, report.txt, det.csv).
    #[arg(long)]
    out: PathBuf,
    /// APCER convention: worst-case over instruments or a single one.
    #[arg(long, value_enum, default_value_t = SelectorArg::Worst)]
    pai: SelectorArg,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    config: PathBuf,
    /// Render the subject-free template to this PNG path.
    #[arg(long)]
    render_empty: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&GenerateOptions {
            config: a.config,
            count: a.count,
            seed: a.seed,
            out: a.out,
            workers: a.workers,
            scale: a.scale,
            faces_dir: a.faces_dir,
            signatures_dir: a.signatures_dir,
        }),
        Command::Filter(a) => cmd_filter(&FilterOptions {
            faces_dir: a.faces_dir,
            out: a.out,
            keep: a.keep,
        }),
        Command::Split(a) => cmd_split(&SplitOptions {
            manifest: a.manifest,
            mode: match a.mode {
                SplitModeArg::Intra => SplitMode::Intra,
                SplitModeArg::Loo => SplitMode::Loo,
            },
            seed: a.seed,
            out: a.out,
            ratios: [a.ratios[0], a.ratios[1], a.ratios[2]],
            test_country: a.test_country,
            test_pai: a.test_pai.map(Pai::from),
            val_fraction: a.val_fraction,
        }),
        Command::Evaluate(a) => cmd_evaluate(&EvaluateOptions {
            scores: a.scores,
            out: a.out,
            selector: match a.pai {
                SelectorArg::Worst => PaiSelector::WorstCase,
                SelectorArg::Print => PaiSelector::Single(Pai::Print),
                SelectorArg::Screen => PaiSelector::Single(Pai::Screen),
            },
        }),
        Command::Inspect(a) => cmd_inspect(&a.config, a.render_empty.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
