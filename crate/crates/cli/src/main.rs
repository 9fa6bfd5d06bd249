//! `waver`: build dictionaries, train heads and run the retrieval protocols.

mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use waver_core::distill::build_corpus;
use waver_core::encoders::{Encoder, PrecomputedEncoder};
use waver_core::eval::{
    annotator_csv, annotator_selections, annotator_split_eval, kappa_csv, kappa_sweep, kappa_table,
    multi_caption_eval, style_eval, table, Retriever, DEFAULT_STYLE_SEEDS,
};
use waver_core::ingest::{generate_synthetic, SyntheticConfig, VideoSource};
use waver_core::pipeline::fit_from_dictionary;
use waver_core::train::write_trace_csv;
use waver_core::vcd::{build_dictionary_with, PhraseSidecar, VcdOptions};
use waver_core::{ContentDictionary, Dataset, ErrorKind, Model};

use config::{RunConfig, Settings};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<waver_core::Error> for CliError {
    fn from(e: waver_core::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "waver",
    version,
    about = "Writing-style agnostic text-video retrieval"
)]
struct Cli {
    /// TOML file with default settings (falls back to $WAVER_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        videos: usize,
        #[arg(long, default_value_t = 5)]
        captions: usize,
        #[arg(long, default_value_t = 4)]
        styles: usize,
        #[arg(long, default_value_t = 8)]
        frames: usize,
        #[arg(long, default_value = "synthetic")]
        name: String,
    },
    /// Video content dictionary commands.
    Vcd {
        #[command(subcommand)]
        command: VcdCommand,
    },
    /// Train projection heads; writes a checkpoint and a loss trace.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        dictionary: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Loss trace CSV; defaults to `<out>.trace.csv`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Every caption as a query.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One randomly chosen caption per video, repeated over seeds.
    StyleEval {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated selection seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One row per annotator who described every video.
    AnnotatorEval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild, retrain and evaluate for several dictionary sizes.
    KappaSweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,9")]
        kappas: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum VcdCommand {
    /// Extract phrases and keep each video's top-κ.
    Build {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Manifest whose captions supply the vocabulary.
        #[arg(long)]
        vocab_dataset: Option<PathBuf>,
        /// Precomputed phrases per caption id.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct DataArgs {
    /// Dataset manifest.
    #[arg(long)]
    dataset: PathBuf,
    /// Directory that feature-file paths are relative to; defaults to the manifest's.
    #[arg(long)]
    features_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ModelArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    dictionary: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
}

fn require(path: &Path, what: &str) -> CliResult {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "{what} not found: {}",
            path.display()
        )))
    }
}

impl DataArgs {
    fn check(&self) -> CliResult {
        require(&self.dataset, "dataset")
    }

    fn load(&self) -> CliResult<Dataset> {
        Ok(Dataset::load(&self.dataset)?)
    }

    /// Toy encoder unless the manifest points at feature files, in which case
    /// those are loaded and captions still go through the toy text encoder.
    fn encoder(&self, run: &RunConfig, datasets: &[&Dataset]) -> CliResult<Box<dyn Encoder>> {
        let toy = run.toy_encoder()?;
        let uses_files = datasets
            .iter()
            .flat_map(|d| d.videos())
            .any(|v| matches!(v.source, VideoSource::FeatureFile { .. }));
        if !uses_files {
            return Ok(Box::new(toy));
        }
        let base = match &self.features_dir {
            Some(dir) => dir.clone(),
            None => self
                .dataset
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default(),
        };
        let mut enc =
            PrecomputedEncoder::new(run.dim, run.encoder.clone())?.with_text_fallback(toy)?;
        for d in datasets {
            enc.load_dataset_features(d, &base)?;
        }
        Ok(Box::new(enc))
    }
}

/// Training and evaluation parts of `dataset` under the holdout setting.
fn split(dataset: &Dataset, holdout: usize) -> CliResult<(Dataset, Dataset)> {
    if holdout == 0 {
        Ok((dataset.clone(), dataset.clone()))
    } else {
        Ok(dataset.split_holdout(holdout)?)
    }
}

fn emit(table: &str, csv: &str, out: Option<&Path>) -> CliResult {
    print!("{table}\n{csv}");
    if let Some(path) = out {
        std::fs::write(path, csv).map_err(|e| {
            CliError::from(waver_core::Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
        })?;
    }
    Ok(())
}

fn load_model(args: &ModelArgs, run: &RunConfig) -> CliResult<(Retriever, Dataset)> {
    let dataset = args.data.load()?;
    let (_, eval_set) = split(&dataset, run.holdout)?;
    let dictionary = ContentDictionary::load(&args.dictionary)?;
    let model = Model::load(&args.checkpoint)?;
    let encoder = args.data.encoder(run, &[&dataset])?;
    let corpus = build_corpus(&dictionary, encoder.as_ref(), run.pipeline.z)?;
    let retriever = Retriever::new(&model, encoder.as_ref(), &corpus, &eval_set)?;
    Ok((retriever, eval_set))
}

fn run(cli: Cli) -> CliResult {
    let file = Settings::load_file(cli.config.as_deref())?;
    let settings = cli.settings.or(file);
    let run = settings.resolve()?;
    match cli.command {
        Command::Synth {
            out,
            videos,
            captions,
            styles,
            frames,
            name,
        } => {
            let cfg = SyntheticConfig {
                seed: settings.seed.unwrap_or(SyntheticConfig::default().seed),
                n_videos: videos,
                captions_per_video: captions,
                style_variants: styles,
                frames_per_video: frames,
                name,
            };
            let ds = generate_synthetic(&cfg)?;
            ds.save(&out)?;
            println!(
                "wrote {} videos, {} captions to {}",
                ds.videos().len(),
                ds.captions().len(),
                out.display()
            );
        }
        Command::Vcd {
            command:
                VcdCommand::Build {
                    data,
                    out,
                    vocab_dataset,
                    sidecar,
                },
        } => {
            data.check()?;
            if let Some(p) = &vocab_dataset {
                require(p, "vocabulary dataset")?;
            }
            if let Some(p) = &sidecar {
                require(p, "phrase sidecar")?;
            }
            let dataset = data.load()?;
            let (train, _) = split(&dataset, run.holdout)?;
            let vocab_ds = vocab_dataset.as_deref().map(Dataset::load).transpose()?;
            let sidecar = sidecar.as_deref().map(PhraseSidecar::load).transpose()?;
            let mut sources = vec![&dataset];
            sources.extend(vocab_ds.as_ref());
            let encoder = data.encoder(&run, &sources)?;
            let opts = VcdOptions {
                vocab_dataset: vocab_ds.as_ref(),
                sidecar: sidecar.as_ref(),
            };
            let dict = build_dictionary_with(&train, encoder.as_ref(), run.pipeline.kappa, opts)?;
            dict.save(&out)?;
            println!(
                "U={} L={} kappa={} -> {}",
                dict.vocab_size(),
                dict.len(),
                dict.kappa(),
                out.display()
            );
        }
        Command::Train {
            data,
            dictionary,
            out,
            trace,
        } => {
            data.check()?;
            require(&dictionary, "dictionary")?;
            let dataset = data.load()?;
            let (train, _) = split(&dataset, run.holdout)?;
            let dict = ContentDictionary::load(&dictionary)?;
            let encoder = data.encoder(&run, &[&dataset])?;
            let fitted = fit_from_dictionary(&train, encoder.as_ref(), &run.pipeline, dict)?;
            fitted.model.save(&out)?;
            let trace_path = trace.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".trace.csv");
                p.into()
            });
            write_trace_csv(&fitted.trace, &trace_path)?;
            match fitted.trace.last() {
                Some(last) => println!(
                    "steps={} final_loss={:.6} tau={:.6} -> {}",
                    last.step,
                    last.loss,
                    last.tau,
                    out.display()
                ),
                None => println!("steps=0 (initialization saved) -> {}", out.display()),
            }
        }
        Command::Eval { model, out } => {
            check_model_args(&model)?;
            let (retriever, _) = load_model(&model, &run)?;
            let report = multi_caption_eval(&retriever)?;
            emit(&report.to_table(), &report.to_csv(), out.as_deref())?;
        }
        Command::StyleEval { model, seeds, out } => {
            let seeds = seeds.unwrap_or_else(|| DEFAULT_STYLE_SEEDS.to_vec());
            if seeds.is_empty() {
                return Err(CliError::usage("at least one seed is required"));
            }
            check_model_args(&model)?;
            let (retriever, _) = load_model(&model, &run)?;
            let report = style_eval(&retriever, &seeds, run.std)?;
            emit(&report.to_table(), &report.to_csv(), out.as_deref())?;
        }
        Command::AnnotatorEval { model, out } => {
            check_model_args(&model)?;
            let (retriever, eval_set) = load_model(&model, &run)?;
            let selections = annotator_selections(&eval_set);
            let rows = annotator_split_eval(&retriever, &selections)?;
            emit(
                &table(&["annotator", "R@1", "R@5", "R@10", "MdR", "MnR"], &rows),
                &annotator_csv(&rows),
                out.as_deref(),
            )?;
        }
        Command::KappaSweep { data, kappas, out } => {
            if kappas.is_empty() || kappas.contains(&0) {
                return Err(CliError::usage(
                    "kappas must be a non-empty list of positive integers",
                ));
            }
            data.check()?;
            let dataset = data.load()?;
            let (train, eval_set) = split(&dataset, run.holdout)?;
            let encoder = data.encoder(&run, &[&dataset])?;
            let rows = kappa_sweep(&train, &eval_set, encoder.as_ref(), &run.pipeline, &kappas)?;
            emit(&kappa_table(&rows), &kappa_csv(&rows), out.as_deref())?;
        }
    }
    Ok(())
}

fn check_model_args(args: &ModelArgs) -> CliResult {
    args.data.check()?;
    require(&args.dictionary, "dictionary")?;
    require(&args.checkpoint, "checkpoint")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
