//! `feae`: command-line front end for training and applying few-shot flow
//! classifiers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::Value;

use feae_core::data::{
    generate_synthetic, load_flows, write_flows, ColumnMapping, FlowDataset, SyntheticConfig,
};
use feae_core::pipeline::{
    evaluate_model, export_embeddings, graph_labels, k_sweep, run_pipeline, summarize_sweep,
    DataSource, MetricsReport, Model, TrainConfig,
};
use feae_core::{ErrorClass, FeaeError};

type Result<T> = std::result::Result<T, FeaeError>;

#[derive(Parser, Debug)]
#[command(
    name = "feae",
    version,
    about = "Few-shot graph-based detection of malicious network flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic labeled flow file.
    Synth(SynthArgs),
    /// Train on a flow file; writes a model and a metrics report.
    Train(TrainArgs),
    /// Score a saved model on every flow of a file.
    Eval(EvalArgs),
    /// Write edge embeddings of a flow file under a saved model.
    Embed(EmbedArgs),
    /// Macro F1 and attack precision over several k and seeds.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    flows: usize,
    #[arg(long, default_value_t = 200)]
    hosts: usize,
    #[arg(long, default_value_t = 0.02)]
    attack_fraction: f64,
    #[arg(long, default_value_t = 3)]
    families: usize,
    /// Family offset on signature features, in benign standard deviations.
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long)]
    seed: u64,
}

/// Options shared by every command that reads a config.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML file mirroring the training config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// TOML file naming the input columns.
    #[arg(long)]
    columns: Option<PathBuf>,
    /// Config overrides as `--key value` pairs.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    metrics: PathBuf,
    /// Also write test-graph embeddings here.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Record wall-clock runtime in the metrics report.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long)]
    columns: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    columns: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated k values.
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 2, 4, 8])]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Write the per-run table as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &FeaeError) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Embed(a) => embed(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| FeaeError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| FeaeError::io(path, e))
}

fn mapping(path: Option<&Path>) -> Result<ColumnMapping> {
    match path {
        Some(p) => ColumnMapping::from_toml(&read_text(p)?),
        None => Ok(ColumnMapping::default()),
    }
}

/// Sets `key` to `raw` on `cfg`. `raw` is read as JSON when it parses,
/// otherwise as a bare string, so `--ssl-mode dgi_only` and `--alpha 0.5`
/// both work.
fn apply_override(cfg: TrainConfig, key: &str, raw: &str) -> Result<TrainConfig> {
    let to_cfg = |e: serde_json::Error| FeaeError::Config(format!("--{key} {raw}: {e}"));
    let mut value = serde_json::to_value(&cfg).map_err(to_cfg)?;
    let field = key.replace('-', "_");
    let obj = value
        .as_object_mut()
        .expect("config serializes as an object");
    if !obj.contains_key(&field) {
        return Err(FeaeError::Config(format!("unknown config key `{key}`")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    obj.insert(field, parsed);
    serde_json::from_value(value).map_err(to_cfg)
}

fn build_config(args: &ConfigArgs, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(p) => TrainConfig::from_toml(&read_text(p)?)?,
        None => TrainConfig::default(),
    };
    let mut rest = args.overrides.iter();
    while let Some(flag) = rest.next() {
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| FeaeError::Config(format!("expected `--key value`, found `{flag}`")))?;
        let (key, raw) = match key.split_once('=') {
            Some((k, v)) => (k, v.to_string()),
            None => {
                let v = rest
                    .next()
                    .ok_or_else(|| FeaeError::Config(format!("--{key} needs a value")))?;
                (key, v.clone())
            }
        };
        cfg = apply_override(cfg, key, &raw)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_metrics(path: &Path, m: &MetricsReport) -> Result<()> {
    let text = serde_json::to_string_pretty(m).map_err(|e| FeaeError::Format(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

fn report(m: &MetricsReport) {
    info!(
        "macro F1 {:.4}, attack precision {:.4} (tp {}, fp {}, tn {}, fn {})",
        m.macro_f1, m.attack_precision, m.tp, m.fp, m.tn, m.fn_
    );
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig::blobs(
        a.flows,
        a.hosts,
        a.attack_fraction,
        a.families,
        a.separation,
        a.seed,
    );
    let ds = generate_synthetic(&cfg)?;
    write_flows(
        &a.out,
        &ds,
        &ColumnMapping::with_features(ds.schema.clone()),
    )?;
    info!(
        "wrote {} flows ({} attacks) to {}",
        ds.len(),
        ds.attack_count(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = build_config(&a.cfg, Some(a.seed))?;
    let source = DataSource::Csv {
        path: a.data.clone(),
        mapping: mapping(a.cfg.columns.as_deref())?,
    };
    let run = run_pipeline(&cfg, &source)?;
    for (epoch, l) in run.history.encoder.iter().enumerate().step_by(50) {
        log::debug!("epoch {epoch}: {l:?}");
    }
    let mut metrics = run.metrics.clone();
    if a.timing {
        metrics.runtime_seconds = Some(run.runtime_seconds);
    }
    run.model.save(&a.model)?;
    write_metrics(&a.metrics, &metrics)?;
    if let Some(p) = &a.embeddings {
        let flags = vec![false; run.test_graph.num_edges()];
        export_embeddings(
            p,
            &run.test_embeddings,
            &graph_labels(&run.test_graph),
            &flags,
        )?;
    }
    report(&metrics);
    Ok(())
}

fn load_for_model(model: &Model, data: &Path, columns: Option<&Path>) -> Result<FlowDataset> {
    let mut m = mapping(columns)?;
    if columns.is_none() {
        m.features = model.feature_names.clone();
    }
    load_flows(data, &m)
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let ds = load_for_model(&model, &a.data, a.columns.as_deref())?;
    let metrics = evaluate_model(&model, &ds)?;
    write_metrics(&a.metrics, &metrics)?;
    report(&metrics);
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let ds = load_for_model(&model, &a.data, a.columns.as_deref())?;
    let g = model.prepare_graph(&ds)?;
    let h = model.embed(&g)?;
    export_embeddings(&a.out, &h, &graph_labels(&g), &vec![false; g.num_edges()])?;
    info!(
        "wrote {} embeddings of width {} to {}",
        h.rows(),
        h.cols(),
        a.out.display()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = build_config(&a.cfg, None)?;
    let source = DataSource::Csv {
        path: a.data.clone(),
        mapping: mapping(a.cfg.columns.as_deref())?,
    };
    let rows = k_sweep(&cfg, &source, &a.ks, a.seeds)?;
    println!("k\tmacro_f1\tattack_precision");
    for (k, f1, p) in summarize_sweep(&rows) {
        println!("{k}\t{f1:.4}\t{p:.4}");
    }
    if let Some(p) = &a.out {
        let text =
            serde_json::to_string_pretty(&rows).map_err(|e| FeaeError::Format(e.to_string()))?;
        write_text(p, &(text + "\n"))?;
    }
    Ok(())
}
