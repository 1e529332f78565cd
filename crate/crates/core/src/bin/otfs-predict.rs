//! Command-line front end: dataset generation, diagnostics, training,
//! evaluation, sweeps and timing benchmarks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otfs_predict::baselines::Predictor;
use otfs_predict::channel::{generate_sequence, sparsity_report, ChannelSequence, MobilityProfile, PowerDelayProfile};
use otfs_predict::dataset::{load_dataset, save_dataset, DatasetSplit, DEFAULT_SPLIT};
use otfs_predict::harness::{
    bench, evaluate, load_predictor, save_predictor, sweep_history, sweep_horizon, sweep_speed, train_predictor,
    write_csv, AnyPredictor, KeyValueConfig, MetricsReport, PredictorKind, SpeedSweepSpec, TrainSettings,
};
use otfs_predict::otfs::OtfsDims;
use otfs_predict::{Error, Result};

#[derive(Parser)]
#[command(name = "otfs-predict", version, about = "Delay-Doppler channel simulation and prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a channel sequence and write it to --out.
    Gen,
    /// Print DD sparsity and frame-to-frame stability statistics.
    Diag,
    /// Train --model on the chronological split and write a checkpoint to --out.
    Train,
    /// Score predictors on the test split.
    Eval,
    /// One-step error against the amount of visible history.
    SweepHistory {
        /// Comma-separated history lengths, increasing.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,6,8,10")]
        lengths: Vec<usize>,
    },
    /// Error of the h-th autoregressive forecast.
    SweepHorizon {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        horizons: Vec<usize>,
    },
    /// Evaluate on fresh sequences simulated at other speeds.
    SweepSpeed {
        #[arg(long, value_delimiter = ',', default_value = "100,300,500")]
        speeds: Vec<f64>,
    },
    /// Parameter counts and mean single-sample inference time.
    Bench {
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
    },
}

/// Flags shared by every subcommand. Values left unset fall back to the
/// --config file, then to the built-in defaults.
#[derive(Args)]
struct Common {
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long = "speed-kmh", global = true)]
    speed_kmh: Option<f64>,
    #[arg(long = "fc-hz", global = true)]
    fc_hz: Option<f64>,
    #[arg(long, global = true)]
    frames: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dataset file; when absent a sequence is simulated from the flags.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Predictor to build or train; repeatable.
    #[arg(long, global = true)]
    model: Vec<String>,
    /// Trained predictor to load; repeatable.
    #[arg(long, global = true)]
    checkpoint: Vec<PathBuf>,
    #[arg(long, global = true)]
    history: Option<usize>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Metrics CSV destination; stdout when absent.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// key = value file with defaults for the flags above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "m", "n", "speed-kmh", "fc-hz", "frames", "seed", "data", "model", "history", "horizon", "epochs", "lr",
    "batch", "patience", "out", "csv", "hidden", "dlinear-kernel", "window", "channels", "latent-side",
    "trans-layers", "heads", "ffn-hidden", "max-positions",
];

/// Flag values merged with the config file.
struct Settings {
    dims: OtfsDims,
    profile: MobilityProfile,
    frames: usize,
    seed: u64,
    data: Option<PathBuf>,
    models: Vec<PredictorKind>,
    checkpoints: Vec<PathBuf>,
    horizon: usize,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    train: TrainSettings,
}

fn resolve(c: Common) -> Result<Settings> {
    let file = match &c.config {
        Some(p) => KeyValueConfig::parse(&std::fs::read_to_string(p)?, CONFIG_KEYS)?,
        None => KeyValueConfig::default(),
    };
    let m = c.m.or(file.get("m")?).unwrap_or(16);
    let n = c.n.or(file.get("n")?).unwrap_or(4);
    let dims = OtfsDims::new(m, n)?;
    let speed = c.speed_kmh.or(file.get("speed-kmh")?).unwrap_or(500.0);
    let fc = c.fc_hz.or(file.get("fc-hz")?).unwrap_or(MobilityProfile::high_speed_rail().carrier_hz());
    let profile = MobilityProfile::new(speed, fc, MobilityProfile::high_speed_rail().subcarrier_spacing_hz())?;
    let mut models = c.model;
    if models.is_empty() {
        models.extend(file.raw("model").map(|s| s.split(',').map(|m| m.trim().to_owned()).collect::<Vec<_>>()).unwrap_or_default());
    }
    let models = models.iter().map(|s| s.parse()).collect::<Result<Vec<PredictorKind>>>()?;

    let mut train = TrainSettings::desk();
    let f = &mut train.fit;
    f.history_len = c.history.or(file.get("history")?).unwrap_or(f.history_len);
    f.max_epochs = c.epochs.or(file.get("epochs")?).unwrap_or(f.max_epochs);
    f.lr = c.lr.or(file.get("lr")?).unwrap_or(f.lr);
    f.batch = c.batch.or(file.get("batch")?).unwrap_or(f.batch);
    f.patience = file.get("patience")?.unwrap_or(f.patience);
    let seed = c.seed.or(file.get("seed")?).unwrap_or(0);
    f.seed = seed;
    train.time_linear_hidden = file.get("hidden")?.unwrap_or(train.time_linear_hidden);
    train.dlinear_kernel = file.get("dlinear-kernel")?.unwrap_or(train.dlinear_kernel);
    train.moving_average_window = file.get("window")?.or(train.moving_average_window);
    let l = &mut train.ldformer;
    l.channels = file.get_list("channels")?.unwrap_or(l.channels.clone());
    l.latent_side = file.get("latent-side")?.unwrap_or(l.latent_side);
    l.trans_layers = file.get("trans-layers")?.unwrap_or(l.trans_layers);
    l.heads = file.get("heads")?.unwrap_or(l.heads);
    l.ffn_hidden = file.get("ffn-hidden")?.unwrap_or(l.ffn_hidden);
    l.max_positions = file.get("max-positions")?.unwrap_or(l.max_positions);

    Ok(Settings {
        dims,
        profile,
        frames: c.frames.or(file.get("frames")?).unwrap_or(1400),
        seed,
        data: c.data.or(file.get("data")?),
        models,
        checkpoints: c.checkpoint,
        horizon: c.horizon.or(file.get("horizon")?).unwrap_or(1),
        out: c.out.or(file.get("out")?),
        csv: c.csv.or(file.get("csv")?),
        train,
    })
}

fn sequence(s: &Settings) -> Result<ChannelSequence> {
    match &s.data {
        Some(p) => load_dataset(p),
        None => generate_sequence(s.dims, &s.profile, &PowerDelayProfile::eva(), s.frames, s.seed),
    }
}

fn require_out(s: &Settings) -> Result<&Path> {
    s.out
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--out is required for this command".into()))
}

/// Loaded checkpoints first, then `--model` kinds built or trained here.
/// All loaded checkpoints must share one normalization scale.
fn predictors(s: &Settings, seq: &ChannelSequence) -> Result<(Vec<AnyPredictor>, DatasetSplit)> {
    let raw = DatasetSplit::chronological(seq, s.train.fit.history_len, 1, 1, DEFAULT_SPLIT)?;
    let mut out = Vec::new();
    let mut scale = None;
    for path in &s.checkpoints {
        let (p, sc) = load_predictor(path)?;
        if scale.is_some_and(|prev: f64| prev != sc) {
            return Err(Error::InvalidArgument(format!(
                "{} was trained under a different normalization scale",
                path.display()
            )));
        }
        scale = Some(sc);
        out.push(p);
    }
    let split = match scale {
        Some(sc) => raw.normalize_with(sc)?,
        None => raw.normalize()?,
    };
    for &kind in &s.models {
        let (p, _) = train_predictor(kind, &split, &s.train, log_epoch(kind))?;
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("give at least one --model or --checkpoint".into()));
    }
    Ok((out, split))
}

fn log_epoch(kind: PredictorKind) -> impl FnMut(&otfs_predict::ldformer::EpochStats) {
    move |e| {
        eprintln!(
            "{kind} epoch {:>3}  train {:.6e}  val {:.6e}  {:.1}s",
            e.epoch, e.train_loss, e.val_loss, e.seconds
        )
    }
}

fn emit_csv<'a>(s: &Settings, rows: impl IntoIterator<Item = &'a MetricsReport>) -> Result<()> {
    match &s.csv {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            write_csv(&mut w, rows)?;
            w.flush()?;
        }
        None => write_csv(io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn refs(p: &[AnyPredictor]) -> Vec<&dyn Predictor> {
    p.iter().map(|p| p as &dyn Predictor).collect()
}

fn run(cli: Cli) -> Result<()> {
    let s = resolve(cli.common)?;
    match cli.command {
        Command::Gen => {
            let out = require_out(&s)?;
            let seq = generate_sequence(s.dims, &s.profile, &PowerDelayProfile::eva(), s.frames, s.seed)?;
            save_dataset(out, &seq)?;
            eprintln!("wrote {} frames of {}x{} to {}", seq.len(), s.dims.side(), s.dims.side(), out.display());
        }
        Command::Diag => {
            let r = sparsity_report(&sequence(&s)?)?;
            let mut o = io::stdout().lock();
            writeln!(o, "frames={}", r.frame_count)?;
            writeln!(o, "mean_top1={:.6}", r.mean_top1)?;
            writeln!(o, "mean_top5={:.6}", r.mean_top5)?;
            writeln!(o, "mean_top10={:.6}", r.mean_top10)?;
            writeln!(o, "mean_dd_correlation={:.6}", r.mean_dd_correlation)?;
            writeln!(o, "mean_tf_correlation={:.6}", r.mean_tf_correlation)?;
        }
        Command::Train => {
            let out = require_out(&s)?;
            let [kind] = s.models[..] else {
                return Err(Error::InvalidArgument("train takes exactly one --model".into()));
            };
            let split = DatasetSplit::chronological(&sequence(&s)?, s.train.fit.history_len, 1, 1, DEFAULT_SPLIT)?
                .normalize()?;
            let (model, report) = train_predictor(kind, &split, &s.train, log_epoch(kind))?;
            save_predictor(out, &model, split.norm_scale())?;
            if let Some(r) = report {
                eprintln!(
                    "best epoch {} of {} (val {:.6e}) in {:.1}s",
                    r.best_epoch, r.stopped_epoch, r.best_val, r.seconds
                );
            }
            eprintln!("{} parameters written to {}", model.param_count(), out.display());
        }
        Command::Eval => {
            let (models, split) = predictors(&s, &sequence(&s)?)?;
            let rows = models
                .iter()
                .map(|p| evaluate(p, &split, s.train.fit.history_len, s.horizon))
                .collect::<Result<Vec<_>>>()?;
            emit_csv(&s, &rows)?;
        }
        Command::SweepHistory { lengths } => {
            let (models, split) = predictors(&s, &sequence(&s)?)?;
            emit_csv(&s, sweep_history(&refs(&models), &split, &lengths)?.rows())?;
        }
        Command::SweepHorizon { horizons } => {
            let (models, split) = predictors(&s, &sequence(&s)?)?;
            let r = sweep_horizon(&refs(&models), &split, s.train.fit.history_len, &horizons)?;
            emit_csv(&s, r.rows())?;
        }
        Command::SweepSpeed { speeds } => {
            let seq = sequence(&s)?;
            let (models, split) = predictors(&s, &seq)?;
            let spec = SpeedSweepSpec {
                dims: seq.dims(),
                profile: seq.meta().mobility(seq.dims())?,
                pdp: PowerDelayProfile::eva(),
                frames: s.frames.min(seq.len()).max(s.train.fit.history_len + 1),
                history: s.train.fit.history_len,
                seed: s.seed,
                norm_scale: split.norm_scale(),
            };
            emit_csv(&s, sweep_speed(&refs(&models), &spec, &speeds)?.rows())?;
        }
        Command::Bench { runs, warmup } => {
            let (models, split) = predictors(&s, &sequence(&s)?)?;
            let rows = models
                .iter()
                .map(|p| bench(p, &split, s.train.fit.history_len, warmup, runs))
                .collect::<Result<Vec<_>>>()?;
            emit_csv(&s, &rows)?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => 4,
        e if e.is_format() => 3,
        Error::Shape(_) | Error::Io(_) => 3,
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe (`| head`) is the reader's choice, not a failure
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
