use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecgfuse_core::dsp::Colormap;
use ecgfuse_core::encoder::BackendSpec;
use ecgfuse_core::fusion::{FusionInput, FusionStrategy};
use ecgfuse_core::ingest::{RecordFormat, Task};
use ecgfuse_core::model::ModelMode;
use ecgfuse_core::pipeline::{self, Manifest, PipelineConfig, PipelineError, SweepGrid};

#[derive(Parser)]
#[command(name = "ecgfuse", version, about = "12-lead ECG spectrogram fusion pipeline")]
struct Cli {
    /// JSON configuration; its keys override command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct DspArgs {
    #[arg(long)]
    window_s: Option<f64>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    chunk_s: Option<f64>,
    #[arg(long)]
    chunk_overlap: Option<f64>,
    #[arg(long)]
    colormap: Option<Colormap>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate and canonicalize a directory of records.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        format: RecordFormat,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rate: Option<u32>,
        #[arg(long)]
        seconds: Option<f64>,
    },
    /// Compute normalized window spectrograms.
    Spectrogram {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        dsp: DspArgs,
        /// Also write <record_id>/<lead>/<n>.png.
        #[arg(long)]
        export_png: bool,
    },
    /// Embed spectrograms into a feature cache.
    Encode {
        #[arg(long)]
        manifest: PathBuf,
        /// fallback:<tau>:<seed>, onnx:<path>, onnx-mnasnet:<path> or onnx-inception:<path>
        #[arg(long)]
        backend: Option<BackendSpec>,
        #[arg(long)]
        fusion_input: Option<FusionInput>,
        #[arg(long, env = "ECGFUSE_CACHE")]
        cache: PathBuf,
        #[command(flatten)]
        dsp: DspArgs,
    },
    /// Cross-validated training; writes a checkpoint.
    Train {
        #[arg(long, env = "ECGFUSE_CACHE")]
        cache: PathBuf,
        #[arg(long)]
        fusion: Option<FusionStrategy>,
        #[arg(long)]
        model: Option<ModelMode>,
        #[arg(long)]
        task: Option<Task>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Out-of-fold metrics for a checkpoint.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, env = "ECGFUSE_CACHE")]
        cache: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Classify one record; prints {label, probs}.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        format: Option<RecordFormat>,
    },
    /// Run a fusion × model grid; writes sweep.csv and sweep.txt.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
    },
}

fn apply_dsp(cfg: &mut PipelineConfig, a: &DspArgs) {
    if let Some(v) = a.window_s {
        cfg.dsp.window_s = v;
    }
    if let Some(v) = a.overlap {
        cfg.dsp.overlap = v;
    }
    if let Some(v) = a.chunk_s {
        cfg.dsp.chunk_s = v;
    }
    if let Some(v) = a.chunk_overlap {
        cfg.dsp.chunk_overlap = v;
    }
    if let Some(v) = a.colormap {
        cfg.colormap = v;
    }
}

fn finish(cfg: PipelineConfig, file: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
            cfg.overlay_json(&text)
        }
        None => {
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn infer_format(path: &Path) -> RecordFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("hea") => RecordFormat::Wfdb,
        _ => RecordFormat::Csv,
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let file = cli.config.as_deref();
    let mut cfg = PipelineConfig::default();
    match cli.command {
        Command::Ingest { input, format, out, rate, seconds } => {
            if let Some(r) = rate {
                cfg.ingest.rate_hz = r;
            }
            if let Some(s) = seconds {
                cfg.ingest.seconds = s;
            }
            let cfg = finish(cfg, file)?;
            let m = pipeline::ingest_stage(&input, format, &cfg.ingest, &out)?;
            let ok = m.accepted().count();
            eprintln!("ingested {} records ({} accepted) -> {}", m.records.len(), ok, out.display());
        }
        Command::Spectrogram { manifest, out, dsp, export_png } => {
            let m = Manifest::read(&manifest)?;
            cfg.ingest = m.ingest.clone();
            apply_dsp(&mut cfg, &dsp);
            let cfg = finish(cfg, file)?;
            let idx = pipeline::spectrogram_stage(&m, &cfg.dsp, cfg.colormap, &out, export_png)?;
            eprintln!("{} records -> {}", idx.records.len(), out.display());
        }
        Command::Encode { manifest, backend, fusion_input, cache, dsp } => {
            let m = Manifest::read(&manifest)?;
            cfg.ingest = m.ingest.clone();
            apply_dsp(&mut cfg, &dsp);
            if let Some(b) = backend {
                cfg.backend = b;
            }
            if let Some(f) = fusion_input {
                cfg.fusion_input = f;
            }
            let cfg = finish(cfg, file)?;
            let idx = pipeline::encode_stage(&m, &cfg.upstream(), &cache)?;
            eprintln!(
                "{} records, tau {}, gamma {} -> {} ({})",
                idx.records.len(),
                idx.tau,
                idx.gamma,
                cache.display(),
                idx.backend_id
            );
        }
        Command::Train { cache, fusion, model, task, folds, seed, epochs, batch_size, out } => {
            if let Some(v) = fusion {
                cfg.fusion = v;
                cfg.fusion_input = v.input();
            }
            if let Some(v) = model {
                cfg.model = v;
            }
            if let Some(v) = task {
                cfg.task = v;
            }
            if let Some(v) = folds {
                cfg.folds = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = batch_size {
                cfg.train.batch_size = v;
            }
            let cfg = finish(cfg, file)?;
            let s = pipeline::train_stage(&cache, &cfg, file.is_some(), &out)?;
            eprintln!("trained {} folds on {} records -> {} [{}]", s.folds, s.n_records, out.display(), s.config_hash);
        }
        Command::Evaluate { ckpt, cache, report } => {
            let r = pipeline::evaluate_stage(&ckpt, &cache, &report)?;
            let macro_auroc = r.aggregate.auroc_macro.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
            eprintln!("macro AUROC {macro_auroc}, accuracy {:.4} -> {}", r.aggregate.accuracy, report.display());
        }
        Command::Predict { ckpt, record, format } => {
            let format = format.unwrap_or_else(|| infer_format(&record));
            let out = pipeline::predict_record(&ckpt, &record, format)?;
            println!("{}", serde_json::to_string(&out).expect("serializable"));
        }
        Command::Sweep { grid } => {
            let text = std::fs::read_to_string(&grid).map_err(|e| PipelineError::Config(format!("{}: {e}", grid.display())))?;
            let g: SweepGrid = serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", grid.display())))?;
            let base = grid.parent().map(Path::to_path_buf).unwrap_or_default();
            let default_cache = std::env::var_os("ECGFUSE_CACHE").map(PathBuf::from);
            pipeline::sweep_stage(&g, &base, default_cache)?;
            let out = if g.out.is_absolute() { g.out.clone() } else { base.join(&g.out) };
            let table = std::fs::read_to_string(out.join("sweep.txt")).map_err(|e| PipelineError::Config(e.to_string()))?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
