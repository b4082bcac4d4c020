use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand};

use gfs_dcf::config::{
    key_table, read_synthetic_spec, read_tracker_config, set_tracker_key, synthetic_spec_to_string,
    tracker_config_to_string, SYNTHETIC_KEYS, TRACKER_KEYS,
};
use gfs_dcf::eval::{
    bundled_suite, compute_metrics, generate_synthetic, load_sequence, parse_groundtruth, read_groundtruth,
    run_ablation, run_tracker, sensitivity_sweep, summarise_ablations, write_curve_csv, EvalOptions, SequenceData,
    SweepGrid, SyntheticSpec, TrackResults,
};
use gfs_dcf::tracker::{BoundingBox, TrackerConfig};
use gfs_dcf::{Error, Result};

static KEY_HELP: LazyLock<String> = LazyLock::new(|| {
    format!(
        "Tracker config keys (--config FILE, --set KEY=VALUE):\n{}\nSynthetic spec keys (--synthetic FILE):\n{}\n\
         Exit codes: 0 success, 2 configuration or input error, 3 I/O or decode error, 4 solver divergence, 1 other.",
        key_table(TRACKER_KEYS),
        key_table(SYNTHETIC_KEYS)
    )
});

#[derive(Parser)]
#[command(name = "gfs-dcf", version, about = "Group feature selection correlation-filter tracker")]
#[command(after_long_help = KEY_HELP.as_str())]
struct Cli {
    /// Worker threads for ablations and sweeps (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one sequence and write a results document.
    Track(TrackArgs),
    /// Score predicted boxes against ground truth.
    Eval(EvalArgs),
    /// Run all five variants on a sequence or on the bundled suite.
    Ablate(AblateArgs),
    /// Sweep the spatial, channel and temporal weights.
    Sweep(SweepArgs),
    /// Write a synthetic sequence directory.
    Synth(SynthArgs),
    /// Print the effective tracker configuration.
    ShowConfig(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Tracker config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SourceArgs {
    /// Sequence directory with frames and groundtruth_rect.txt.
    #[arg(long, conflicts_with = "synthetic")]
    seq: Option<PathBuf>,
    /// Synthetic spec file; the sequence is generated in memory.
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// Seed for the synthetic generator, overriding the spec.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Distance precision threshold in pixels.
    #[arg(long, default_value_t = 20.0)]
    dp_threshold: f64,
    /// Overlap threshold for overlap precision.
    #[arg(long, default_value_t = 0.5)]
    op_iou: f64,
}

impl ScoreArgs {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            dp_threshold: self.dp_threshold,
            op_iou: self.op_iou,
            ..EvalOptions::default()
        }
    }
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    score: ScoreArgs,
    /// Results file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Results document or box file of predictions.
    #[arg(long)]
    results: PathBuf,
    /// Ground-truth box file.
    #[arg(long)]
    gt: PathBuf,
    #[command(flatten)]
    score: ScoreArgs,
    /// Directory for precision.csv and success.csv.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Use the bundled synthetic suite instead of --seq/--synthetic.
    #[arg(long, conflicts_with_all = ["seq", "synthetic"])]
    bundled: bool,
    /// Seeds for the bundled suite.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    score: ScoreArgs,
    /// Results file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    score: ScoreArgs,
    /// Spatial weights, comma separated (default: the configured value).
    #[arg(long, value_delimiter = ',')]
    lambda_spatial: Vec<f64>,
    /// Channel weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    lambda_channel: Vec<f64>,
    /// Temporal weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    lambda_temporal: Vec<f64>,
    /// Results file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic spec file.
    #[arg(long, required_unless_present = "bundled")]
    spec: Option<PathBuf>,
    /// Name of a bundled suite spec (blob_walk, square_bounce, blob_zigzag).
    #[arg(long, conflicts_with = "spec")]
    bundled: Option<String>,
    /// Seed overriding the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn tracker_config(args: &ConfigArgs) -> Result<TrackerConfig> {
    let mut cfg = match &args.config {
        Some(p) => read_tracker_config(p)?,
        None => TrackerConfig::default(),
    };
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{o}' is not KEY=VALUE")))?;
        set_tracker_key(&mut cfg, k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_source(src: &SourceArgs) -> Result<SequenceData> {
    match (&src.seq, &src.synthetic) {
        (Some(dir), None) => {
            if !dir.is_dir() {
                return Err(Error::Io {
                    path: dir.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such sequence directory"),
                });
            }
            load_sequence(dir)
        }
        (None, Some(spec)) => {
            let mut spec = read_synthetic_spec(spec)?;
            if let Some(seed) = src.seed {
                spec.seed = seed;
            }
            Ok(generate_synthetic(&spec)?.into_sequence())
        }
        _ => Err(Error::Config("give exactly one of --seq or --synthetic".into())),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))
}

fn cmd_track(args: &TrackArgs) -> Result<()> {
    let cfg = tracker_config(&args.config)?;
    let seq = load_source(&args.source)?;
    let (_, results) = run_tracker(&seq, &cfg, &args.score.options())?;
    write_text(&args.out, &results.to_json()?)?;
    if let Some(m) = &results.metrics {
        print!("{}", m.table());
    }
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if text.trim_start().starts_with('{') {
        Ok(TrackResults::from_json(&text, path)?.boxes)
    } else {
        parse_groundtruth(&text, path)
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let pred = read_predictions(&args.results)?;
    let gt = read_groundtruth(&args.gt)?;
    let report = compute_metrics(&pred, &gt, args.score.dp_threshold, args.score.op_iou)?;
    if let Some(dir) = &args.curves {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        write_curve_csv(&dir.join("precision.csv"), &report.precision_curve)?;
        write_curve_csv(&dir.join("success.csv"), &report.success_curve)?;
    }
    print!("{}", report.table());
    println!("{}", serde_json::to_string(&report).map_err(|e| Error::Format(e.to_string()))?);
    Ok(())
}

fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    let cfg = tracker_config(&args.config)?;
    let opts = args.score.options();
    let json = if args.bundled {
        let reports = bundled_suite(&args.seeds)
            .iter()
            .map(|s| Ok(run_ablation(&generate_synthetic(s)?.into_sequence(), &cfg, &opts)))
            .collect::<Result<Vec<_>>>()?;
        let summary = summarise_ablations(reports);
        for (v, cle) in &summary.mean_cle {
            match cle {
                Some(c) => println!("{v:<9} mean CLE {c:.3}"),
                None => println!("{v:<9} failed"),
            }
        }
        to_json(&summary)?
    } else {
        let report = run_ablation(&load_source(&args.source)?, &cfg, &opts);
        for (v, o) in &report.variants {
            match (&o.metrics, &o.error) {
                (Some(m), _) => println!("{v:<9} mean CLE {:.3}  AUC {:.3}", m.mean_cle, m.auc),
                (None, Some(e)) => println!("{v:<9} error: {e}"),
                (None, None) => println!("{v:<9} no ground truth"),
            }
        }
        to_json(&report)?
    };
    write_text(&args.out, &json)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = tracker_config(&args.config)?;
    let seq = load_source(&args.source)?;
    let or_default = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
    let grid = SweepGrid {
        lambda_spatial: or_default(&args.lambda_spatial, cfg.reg.lambda_spatial),
        lambda_channel: or_default(&args.lambda_channel, cfg.reg.lambda_channel),
        lambda_temporal: or_default(&args.lambda_temporal, cfg.reg.lambda_temporal),
    };
    let rows = sensitivity_sweep(&seq, &cfg, &grid, &args.score.options())?;
    println!("lambda_spatial,lambda_channel,lambda_temporal,auc,mean_cle");
    for r in &rows {
        let fmt = |x: Option<f64>| x.map_or_else(|| "error".to_string(), |v| format!("{v:.4}"));
        println!(
            "{},{},{},{},{}",
            r.lambda_spatial,
            r.lambda_channel,
            r.lambda_temporal,
            fmt(r.auc),
            fmt(r.mean_cle)
        );
    }
    write_text(&args.out, &to_json(&rows)?)
}

fn bundled_spec(name: &str) -> Result<SyntheticSpec> {
    bundled_suite(&[0])
        .into_iter()
        .find(|s| s.name.strip_suffix("_s0") == Some(name))
        .ok_or_else(|| Error::Config(format!("unknown bundled spec '{name}'")))
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match (&args.spec, &args.bundled) {
        (Some(p), None) => read_synthetic_spec(p)?,
        (None, Some(name)) => bundled_spec(name)?,
        _ => return Err(Error::Config("give exactly one of --spec or --bundled".into())),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    generate_synthetic(&spec)?.write(&args.out)?;
    write_text(&args.out.join("spec.txt"), &synthetic_spec_to_string(&spec))
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Track(a) => cmd_track(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
        Command::ShowConfig(a) => {
            print!("{}", tracker_config_to_string(&tracker_config(a)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
