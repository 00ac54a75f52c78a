//! The `tempconv` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use tempconv_core::autograd::GradCheckOptions;
use tempconv_core::blocks::BlockKind;
use tempconv_core::complexity::{analyze, trace, InputShape};
use tempconv_core::diagnostics::{block_gradient_check, classifier_gradient_check, GradientProbe};
use tempconv_core::model::{build_model, describe, receptive_field, ModelError, ModelGraph};
use tempconv_core::train::{center_crop, cosine_lr, evaluate, train, Split, ToyDataset, TrainError};
use tempconv_core::{Tensor, TensorError};

use crate::checkpoint::{self, CheckpointError};
use crate::config::{self, ConfigLoadError, Document};
use crate::fixture::{self, FixtureError};
use crate::lwt::{self, LwtError};
use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Markdown,
    Text,
}

#[derive(Debug, Parser)]
#[command(
    name = "tempconv",
    version,
    about = "Causal temporal convolution models: build, audit, check and train"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file, or a preset name (baseline, toy, tcn-<kind>).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted override `path=value`; repeatable, last wins.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    sets: Vec<String>,
    #[arg(long, global = true, env = "TEMPCONV_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the output document here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the model structure, config and receptive field.
    Describe,
    /// Count parameters and MACs per module.
    Count {
        /// One input sequence, CxTxHxW.
        #[arg(long, default_value = "1x29x88x88")]
        input: InputShape,
    },
    /// Check expected parameter/MAC counts from a fixture file.
    Verify {
        #[arg(long)]
        fixture: PathBuf,
    },
    /// Classify an LWT1 tensor file.
    Infer {
        /// Model checkpoint; without it a model is built from the config and seed.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Frame side after center cropping (default: the config's crop).
        #[arg(long)]
        crop: Option<usize>,
        /// Frames counted by the temporal pooling (default: all).
        #[arg(long)]
        valid_len: Option<usize>,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        /// A block kind, `classifier` or `all`.
        #[arg(long, default_value = "all")]
        kind: String,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        /// Coordinates sampled per parameter tensor.
        #[arg(long, default_value_t = 5)]
        coords: usize,
    },
    /// Print the cosine learning-rate schedule.
    Schedule {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        base_lr: Option<f64>,
        /// Only this epoch.
        #[arg(long)]
        epoch: Option<usize>,
    },
    /// Train on the synthetic sequence task.
    TrainToy {
        /// Directory for history.jsonl, best.lwck and summary.json.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Write synthetic samples as LWT1 files plus a manifest.
    GenData {
        #[arg(long, value_enum, default_value_t = SplitArg::Val)]
        split: SplitArg,
        /// Samples to write (default: the whole split).
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(m: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: m.into(),
        }
    }

    fn validation(m: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: m.into(),
        }
    }

    fn numeric(m: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERIC,
            message: m.into(),
        }
    }
}

fn tensor_failure(scope: &str, e: &TensorError) -> Failure {
    match e {
        TensorError::NonFinite { .. } => Failure::numeric(format!("{scope}: {e}")),
        _ => Failure::validation(format!("{scope}: {e}")),
    }
}

impl From<ConfigLoadError> for Failure {
    fn from(e: ConfigLoadError) -> Self {
        Failure::validation(format!("config: {e}"))
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match &e {
            ModelError::Tensor(t) => tensor_failure("model", t),
            _ => Failure::validation(format!("model: {e}")),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match &e {
            TrainError::Tensor(t) => tensor_failure("train", t),
            TrainError::Diverged { .. } | TrainError::NonFiniteGradient(_) => Failure::numeric(format!("train: {e}")),
            _ => Failure::validation(format!("train: {e}")),
        }
    }
}

impl From<TensorError> for Failure {
    fn from(e: TensorError) -> Self {
        tensor_failure("tensor", &e)
    }
}

impl From<LwtError> for Failure {
    fn from(e: LwtError) -> Self {
        Failure::validation(format!("lwt: {e}"))
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        Failure::validation(format!("checkpoint: {e}"))
    }
}

impl From<FixtureError> for Failure {
    fn from(e: FixtureError) -> Self {
        Failure::validation(format!("fixture: {e}"))
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::validation(format!("{}: {e}", path.display()))
}

/// What a command produced: the document to print and whether it succeeded.
struct Output {
    body: String,
    code: i32,
}

impl Output {
    fn ok(body: String) -> Self {
        Output { body, code: EXIT_OK }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

/// Parses `argv` (including the program name), runs the command and writes
/// its document to `stdout` (or `--out`) and diagnostics to `stderr`.
/// Returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = dispatch(&cli);
    match result {
        Ok(out) => {
            let written = match &cli.common.out {
                Some(p) => std::fs::write(p, &out.body).map_err(|e| io_failure(p, e)),
                None => stdout
                    .write_all(out.body.as_bytes())
                    .map_err(|e| Failure::validation(e.to_string())),
            };
            match written {
                Ok(()) => out.code,
                Err(f) => {
                    let _ = writeln!(stderr, "error: {}", f.message);
                    f.code
                }
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Output, Failure> {
    let c = &cli.common;
    let fallback = match cli.command {
        Command::TrainToy { .. } | Command::GenData { .. } => "toy",
        _ => "baseline",
    };
    let doc = config::load(c.config.as_deref(), fallback, &c.sets)?;
    let seed = c.seed.unwrap_or(doc.train.seed);
    match &cli.command {
        Command::Describe => describe_cmd(&doc, seed, c.format),
        Command::Count { input } => count_cmd(&doc, *input, c.format),
        Command::Verify { fixture } => verify_cmd(fixture, c.format),
        Command::Infer {
            checkpoint,
            input,
            crop,
            valid_len,
            top,
        } => infer_cmd(
            &doc,
            seed,
            checkpoint.as_deref(),
            input,
            *crop,
            *valid_len,
            *top,
            c.format,
        ),
        Command::Gradcheck {
            kind,
            tolerance,
            step,
            coords,
        } => {
            let opts = GradCheckOptions {
                tolerance: *tolerance,
                step: *step,
                coords_per_param: Some(*coords),
                seed,
                ..GradCheckOptions::default()
            };
            gradcheck_cmd(kind, &opts, c.format)
        }
        Command::Schedule { epochs, base_lr, epoch } => schedule_cmd(
            epochs.unwrap_or(doc.train.epochs),
            base_lr.unwrap_or(doc.train.base_lr),
            *epoch,
            c.format,
        ),
        Command::TrainToy { dir } => train_toy_cmd(doc, seed, dir.as_deref(), c.format),
        Command::GenData { split, count, dir } => gen_data_cmd(&doc, (*split).into(), *count, dir, c.format),
    }
}

fn describe_cmd(doc: &Document, seed: u64, format: Format) -> Result<Output, Failure> {
    let graph = build_model::<f32>(&doc.model, seed)?;
    let body = match format {
        Format::Text => describe(&graph),
        Format::Json => to_json(&json!({
            "config": graph.config,
            "config_hash": format!("{:016x}", graph.meta.config_hash),
            "build_version": graph.meta.build_version,
            "seed": seed,
            "receptive_field": receptive_field(&graph.config),
            "params": graph.store.num_params(),
            "modules": trace(&graph, InputShape::default())?,
        })),
        Format::Markdown => {
            let rf = receptive_field(&graph.config);
            let mut out = format!(
                "Model `{:016x}`, receptive field {} frames (TCN {}, stem {}).\n\n",
                graph.meta.config_hash, rf.total, rf.tcn, rf.stem
            );
            out.push_str("| Module | Component | Output | Params |\n|---|---|---|---:|\n");
            for m in trace(&graph, InputShape::default())? {
                let dims: Vec<String> = m.output_shape.iter().map(usize::to_string).collect();
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    m.name,
                    m.component.name(),
                    dims.join("×"),
                    m.params
                );
            }
            let _ = writeln!(out, "| **Total** | | | {} |", graph.store.num_params());
            out
        }
    };
    Ok(Output::ok(body))
}

fn count_cmd(doc: &Document, input: InputShape, format: Format) -> Result<Output, Failure> {
    let graph = build_model::<f32>(&doc.model, 0)?;
    let r = analyze(&graph, input)?;
    Ok(Output::ok(match format {
        Format::Json => to_json(&r),
        Format::Markdown => report::complexity_markdown(&r),
        Format::Text => report::complexity_text(&r),
    }))
}

fn verify_cmd(path: &Path, format: Format) -> Result<Output, Failure> {
    let verdicts = fixture::check(path)?;
    let pass = verdicts.iter().all(|v| v.pass);
    let body = match format {
        Format::Json => to_json(&json!({ "pass": pass, "verdicts": verdicts })),
        Format::Markdown => report::verdicts_markdown(&verdicts),
        Format::Text => report::verdicts_text(&verdicts),
    };
    Ok(Output {
        body,
        code: if pass { EXIT_OK } else { EXIT_VALIDATION },
    })
}

/// Adds a batch axis to a single sequence and center-crops frames larger
/// than `crop`.
fn prepare_input(graph: &ModelGraph<f32>, t: Tensor<f32>, crop: usize) -> Result<Tensor<f32>, Failure> {
    let seq_rank = if graph.is_tcn_only() { 2 } else { 4 };
    let shape = t.shape().to_vec();
    let batched = if shape.len() == seq_rank {
        let mut s = vec![1];
        s.extend_from_slice(&shape);
        t.reshape(&s)?
    } else if shape.len() == seq_rank + 1 {
        t
    } else {
        return Err(Failure::validation(format!(
            "input has shape {shape:?}; expected rank {seq_rank} or {} for this model",
            seq_rank + 1
        )));
    };
    if graph.is_tcn_only() {
        return Ok(batched);
    }
    let s = batched.shape().to_vec();
    let (h, w) = (s[3], s[4]);
    if h == crop && w == crop {
        return Ok(batched);
    }
    if h < crop || w < crop {
        return Err(Failure::validation(format!(
            "frames are {h}×{w}, smaller than the {crop}×{crop} crop"
        )));
    }
    let per = s[1..].iter().product::<usize>();
    let mut data = Vec::with_capacity(s[0] * s[1] * s[2] * crop * crop);
    for i in 0..s[0] {
        let seq = Tensor::new(s[1..].to_vec(), batched.data()[i * per..(i + 1) * per].to_vec())?;
        data.extend_from_slice(center_crop(&seq, crop).map_err(Failure::from)?.data());
    }
    Ok(Tensor::new(vec![s[0], s[1], s[2], crop, crop], data)?)
}

#[allow(clippy::too_many_arguments)]
fn infer_cmd(
    doc: &Document,
    seed: u64,
    checkpoint: Option<&Path>,
    input: &Path,
    crop: Option<usize>,
    valid_len: Option<usize>,
    top: usize,
    format: Format,
) -> Result<Output, Failure> {
    let graph: ModelGraph<f32> = match checkpoint {
        Some(p) => checkpoint::load(p)?.restore()?,
        None => build_model(&doc.model, seed)?,
    };
    let raw = lwt::load(input)?.cast::<f32>();
    let x = prepare_input(&graph, raw, crop.unwrap_or(doc.train.augment.crop))?;
    let (n, frames) = (x.shape()[0], x.shape()[2]);
    let len = valid_len.unwrap_or(frames);
    if len == 0 || len > frames {
        return Err(Failure::validation(format!("valid length {len} outside 1..={frames}")));
    }
    let probs = graph.predict(&x, &vec![len; n])?;
    let k = probs.shape()[1];
    let mut predictions = Vec::with_capacity(n);
    for row in probs.data().chunks(k) {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        let best: Vec<Value> = order
            .iter()
            .take(top.min(k))
            .map(|&c| json!({ "class": c, "prob": row[c] as f64 }))
            .collect();
        let sum: f64 = row.iter().map(|&p| p as f64).sum();
        predictions.push(json!({ "top1": order[0], "top": best, "prob_sum": sum }));
    }
    let body = match format {
        Format::Json => to_json(&json!({
            "model": format!("{:016x}", graph.meta.config_hash),
            "input_shape": x.shape(),
            "valid_len": len,
            "predictions": predictions,
        })),
        Format::Markdown | Format::Text => {
            let md = format == Format::Markdown;
            let mut out = String::new();
            for (i, p) in predictions.iter().enumerate() {
                let _ = writeln!(out, "{}sample {i}: class {}", if md { "### " } else { "" }, p["top1"]);
                for e in p["top"].as_array().into_iter().flatten() {
                    let _ = writeln!(
                        out,
                        "{}{:>5}  {:.6}",
                        if md { "- " } else { "  " },
                        e["class"],
                        e["prob"].as_f64().unwrap_or(0.0)
                    );
                }
            }
            out
        }
    };
    Ok(Output::ok(body))
}

fn probes_for(kind: &str, opts: &GradCheckOptions) -> Result<Vec<GradientProbe>, Failure> {
    let kinds: Vec<BlockKind> = match kind {
        "all" => BlockKind::ALL.to_vec(),
        "classifier" => Vec::new(),
        k => vec![k.parse().map_err(|e| Failure::usage(format!("--kind: {e}")))?],
    };
    let mut probes = Vec::with_capacity(kinds.len() + 1);
    for k in kinds {
        probes.push(block_gradient_check(k, opts)?);
    }
    if matches!(kind, "all" | "classifier") {
        probes.push(classifier_gradient_check(opts)?);
    }
    Ok(probes)
}

fn gradcheck_cmd(kind: &str, opts: &GradCheckOptions, format: Format) -> Result<Output, Failure> {
    let probes = probes_for(kind, opts)?;
    let pass = probes.iter().all(GradientProbe::passed);
    let body = match format {
        Format::Json => {
            let items: Vec<Value> = probes
                .iter()
                .map(|p| {
                    let params: Vec<Value> = p
                        .report
                        .entries
                        .iter()
                        .map(|e| json!({ "name": p.param_names[e.param], "coords": e.coords_checked, "max_rel_err": e.max_rel_err }))
                        .collect();
                    json!({ "label": p.label, "pass": p.passed(), "max_rel_err": p.report.max_rel_err(), "params": params })
                })
                .collect();
            to_json(&json!({ "pass": pass, "tolerance": opts.tolerance, "step": opts.step, "probes": items }))
        }
        Format::Markdown => {
            let mut out = String::from("| Probe | Params | Max rel. error | Result |\n|---|---:|---:|---|\n");
            for p in &probes {
                let _ = writeln!(
                    out,
                    "| {} | {} | {:.3e} | {} |",
                    p.label,
                    p.report.entries.len(),
                    p.report.max_rel_err(),
                    if p.passed() { "PASS" } else { "FAIL" }
                );
            }
            out
        }
        Format::Text => {
            let mut out = String::new();
            for p in &probes {
                let _ = writeln!(
                    out,
                    "{} {:<20} {} params, max relative error {:.3e} (tolerance {:.0e})",
                    if p.passed() { "PASS" } else { "FAIL" },
                    p.label,
                    p.report.entries.len(),
                    p.report.max_rel_err(),
                    opts.tolerance
                );
            }
            out
        }
    };
    Ok(Output {
        body,
        code: if pass { EXIT_OK } else { EXIT_NUMERIC },
    })
}

#[derive(Serialize)]
struct LrPoint {
    epoch: usize,
    lr: f64,
}

fn schedule_cmd(epochs: usize, base_lr: f64, only: Option<usize>, format: Format) -> Result<Output, Failure> {
    if !(base_lr.is_finite() && base_lr >= 0.0) {
        return Err(Failure::validation(format!(
            "base learning rate must be finite and nonnegative, got {base_lr}"
        )));
    }
    let range: Vec<usize> = match only {
        Some(e) => vec![e],
        None => (0..=epochs).collect(),
    };
    let points = range
        .into_iter()
        .map(|epoch| {
            Ok(LrPoint {
                epoch,
                lr: cosine_lr(epoch, epochs, base_lr)?,
            })
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let body = match format {
        Format::Json => to_json(&json!({ "epochs": epochs, "base_lr": base_lr, "schedule": points })),
        Format::Markdown => {
            let mut out = String::from("| Epoch | Learning rate |\n|---:|---:|\n");
            for p in &points {
                let _ = writeln!(out, "| {} | {} |", p.epoch, p.lr);
            }
            out
        }
        Format::Text => points.iter().map(|p| format!("{:>4} {}\n", p.epoch, p.lr)).collect(),
    };
    Ok(Output::ok(body))
}

#[derive(Serialize)]
struct ToySummary {
    config_hash: String,
    seed: u64,
    epochs: usize,
    chance_val_acc: f64,
    best_epoch: usize,
    best_val_acc: f64,
    test_acc: f64,
    history: Vec<tempconv_core::train::EpochRecord>,
}

fn train_toy_cmd(mut doc: Document, seed: u64, dir: Option<&Path>, format: Format) -> Result<Output, Failure> {
    doc.train.seed = seed;
    let data = ToyDataset::new(doc.data.clone())?;
    let mut graph = build_model::<f32>(&doc.model, seed)?;
    let chance = evaluate(&graph, &data, Split::Val, &doc.train.augment)?;
    let outcome = train(&mut graph, &doc.train, &data)?;
    let test_acc = evaluate(&graph, &data, Split::Test, &doc.train.augment)?;
    let summary = ToySummary {
        config_hash: format!("{:016x}", graph.meta.config_hash),
        seed,
        epochs: doc.train.epochs,
        chance_val_acc: chance,
        best_epoch: outcome.best_epoch,
        best_val_acc: outcome.best_val_acc,
        test_acc,
        history: outcome.history,
    };
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let hist = dir.join("history.jsonl");
        let mut f = std::fs::File::create(&hist).map_err(|e| io_failure(&hist, e))?;
        report::write_history(&mut f, &summary.history).map_err(|e| io_failure(&hist, e))?;
        checkpoint::save(&dir.join("best.lwck"), &graph)?;
        let sp = dir.join("summary.json");
        std::fs::write(&sp, to_json(&summary)).map_err(|e| io_failure(&sp, e))?;
    }
    let body = match format {
        Format::Json => to_json(&summary),
        Format::Markdown | Format::Text => {
            let mut out = String::new();
            if format == Format::Markdown {
                out.push_str("| Epoch | LR | Train loss | Val acc |\n|---:|---:|---:|---:|\n");
                for r in &summary.history {
                    let _ = writeln!(
                        out,
                        "| {} | {:.6} | {:.4} | {:.3} |",
                        r.epoch, r.lr, r.train_loss, r.val_acc
                    );
                }
                out.push('\n');
            } else {
                for r in &summary.history {
                    let _ = writeln!(
                        out,
                        "epoch {:>3} lr {:.6} loss {:.4} val {:.3}",
                        r.epoch, r.lr, r.train_loss, r.val_acc
                    );
                }
            }
            let _ = writeln!(out, "untrained val accuracy: {:.3}", summary.chance_val_acc);
            let _ = writeln!(
                out,
                "best val accuracy: {:.3} (epoch {})",
                summary.best_val_acc, summary.best_epoch
            );
            let _ = writeln!(out, "test accuracy: {:.3}", summary.test_acc);
            out
        }
    };
    Ok(Output::ok(body))
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    split: Split,
    index: usize,
    label: usize,
}

fn gen_data_cmd(
    doc: &Document,
    split: Split,
    count: Option<usize>,
    dir: &Path,
    format: Format,
) -> Result<Output, Failure> {
    use tempconv_core::train::SequenceDataset;
    let data = ToyDataset::new(doc.data.clone())?;
    let available = SequenceDataset::<f32>::len(&data, split);
    let n = count.unwrap_or(available);
    if n > available {
        return Err(Failure::validation(format!(
            "{split:?} split has {available} samples, {n} requested"
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let tag = match split {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    };
    let mut entries = Vec::with_capacity(n);
    for index in 0..n {
        let (seq, label): (Tensor<f32>, usize) = data.sample(split, index)?;
        let file = format!("{tag}_{index:04}.lwt");
        lwt::save(&dir.join(&file), &seq)?;
        entries.push(ManifestEntry {
            file,
            split,
            index,
            label,
        });
    }
    let mp = dir.join("manifest.json");
    std::fs::write(&mp, to_json(&entries)).map_err(|e| io_failure(&mp, e))?;
    let body = match format {
        Format::Json => to_json(&json!({ "dir": dir.display().to_string(), "count": n, "samples": entries })),
        Format::Markdown => {
            let mut out = String::from("| File | Label |\n|---|---:|\n");
            for e in &entries {
                let _ = writeln!(out, "| {} | {} |", e.file, e.label);
            }
            out
        }
        Format::Text => format!("wrote {n} {tag} samples and manifest.json to {}\n", dir.display()),
    };
    Ok(Output::ok(body))
}
