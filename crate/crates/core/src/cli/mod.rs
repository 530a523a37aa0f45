//! Command-line entry point.

mod provenance;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::features::{
    band_energy_profile, corr_map, modulation_centers, write_feature_file, FeatureExtractor,
    FeatureKind,
};
use crate::harness::{
    evaluate, feature_path, run_cv, CvOptions, Dataset, Example, TrainConfig,
};
use crate::models::toy::{model_gradcheck, pooling_variants, toy_batch, toy_config};
use crate::models::{load_checkpoint, save_checkpoint, Model, ModelConfig, ModelKind};
use crate::nn::{AttentionMode, PoolingScheme, REL_FLOOR};
use crate::signal::{load_wav, parse_manifest, plan_folds, CorpusManifest, FoldPlan};
use crate::synth::{lhmr, write_corpus, SynthSpec};

pub use provenance::Provenance;

/// Environment variable read when `--seed` is absent.
pub const SEED_ENV: &str = "IK_SEED";

#[derive(Debug, Parser)]
#[command(name = "intelkit", version, about = "Speech intelligibility level classification toolkit")]
pub struct Cli {
    /// Master seed; falls back to $IK_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract per-frame features for every clip of a manifest.
    Featurize(FeaturizeArgs),
    /// Generate the synthetic corpus.
    Synth(SynthArgs),
    /// Train one model and write a checkpoint.
    Train(TrainArgs),
    /// Subject-wise cross-validation with repeats.
    Cv(CvArgs),
    /// Score a checkpoint on a manifest.
    Evaluate(EvaluateArgs),
    /// Finite-difference gradient check on toy dimensions.
    Gradcheck(GradcheckArgs),
    /// Parameter counts and relative complexity.
    Params(ParamsArgs),
    /// Per-frame pooling weights of one clip.
    AttentionExport(AttentionArgs),
    /// Modulation band profiles, correlation maps and LHMR.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Logmel,
    Modspec,
    Both,
}

impl KindArg {
    fn kinds(self) -> Vec<FeatureKind> {
        match self {
            KindArg::Logmel => vec![FeatureKind::Logmel],
            KindArg::Modspec => vec![FeatureKind::Modulation],
            KindArg::Both => vec![FeatureKind::Logmel, FeatureKind::Modulation],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Single,
    Literal,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep native lengths instead of padding or cutting to 7 s.
    #[arg(long)]
    pub no_pad: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON corpus spec; the default spec when absent.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Architecture selection shared by `train`, `cv` and `params`.
#[derive(Debug, Args, Clone)]
pub struct ArchArgs {
    #[arg(long)]
    pub arch: Option<ModelKind>,
    #[arg(long)]
    pub pooling: Option<PoolingScheme>,
    #[arg(long, value_enum)]
    pub attention_mode: Option<ModeArg>,
    /// Model config JSON (the checkpoint header schema).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ArchArgs {
    fn resolve(&self) -> Result<ModelConfig> {
        let mut cfg = match &self.config {
            Some(p) => ModelConfig::from_json(&read_text(p, "config")?)?,
            None => ModelConfig::new(
                self.arch
                    .ok_or_else(|| Error::Usage("either --arch or --config is required".into()))?,
            ),
        };
        if let Some(kind) = self.arch {
            cfg.kind = kind;
        }
        if let Some(p) = self.pooling {
            cfg.pooling.scheme = p;
        }
        if let Some(m) = self.attention_mode {
            cfg.pooling.mode = match m {
                ModeArg::Single => AttentionMode::SingleSoftmax,
                ModeArg::Literal => AttentionMode::LiteralDoubleSoftmax,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Clone)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 2e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Epochs without a validation accuracy gain before stopping.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Train for the full epoch budget.
    #[arg(long)]
    pub no_early_stop: bool,
}

impl OptimArgs {
    fn config(&self, repeats: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            repeats,
            seed,
            patience: (!self.no_early_stop).then_some(self.patience),
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of precomputed feature files; features are extracted from
    /// the audio when absent.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Fold plan JSON; trains on the rotation's training speakers and
    /// selects on its validation speakers.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub rotation: usize,
    /// Pretrained checkpoints whose matching layers seed the model.
    #[arg(long)]
    pub init_from: Vec<PathBuf>,
    /// Keep the branch layers of a fusion model fixed.
    #[arg(long)]
    pub freeze_branches: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Reuse a fold plan instead of planning one from the seed.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    /// Worker threads for folds and repeats.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Clip ids whose pooling weights are exported from the first repeat.
    #[arg(long)]
    pub trace: Vec<String>,
    /// Report path; the fold plan and traces are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Restrict to the test speakers of this rotation.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub rotation: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub arch: ModelKind,
    /// Toy dimensions (B = 2, L = 6, n_F = 5); the only supported size.
    #[arg(long)]
    pub toy: bool,
    /// One scheme instead of all of them.
    #[arg(long)]
    pub pooling: Option<PoolingScheme>,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, required = true)]
    pub clip: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn read_text(path: &Path, what: &'static str) -> Result<String> {
    if !path.exists() {
        return Err(Error::NotFound {
            what,
            path: path.to_path_buf(),
        });
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `<file>.<suffix>` next to `file`.
fn sibling(file: &Path, suffix: &str) -> PathBuf {
    let mut s = file.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Usage(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn load_data(args: &DataArgs, kinds: &[FeatureKind]) -> Result<(CorpusManifest, Dataset)> {
    let manifest = parse_manifest(&args.manifest)?;
    let data = match &args.features {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(Error::NotFound {
                    what: "feature directory",
                    path: dir.clone(),
                });
            }
            Dataset::from_feature_dir(&manifest, dir, kinds)?
        }
        None => Dataset::from_manifest(&manifest, kinds, &FeatureExtractor::default(), &BTreeMap::new())?,
    };
    Ok((manifest, data))
}

fn load_plan(path: &Path) -> Result<FoldPlan> {
    FoldPlan::from_json(&read_text(path, "fold plan")?)
}

fn check_rotation(plan: &FoldPlan, rotation: usize) -> Result<()> {
    if rotation >= plan.rotations.len() {
        return Err(Error::Usage(format!(
            "rotation {rotation} out of range for {} folds",
            plan.rotations.len()
        )));
    }
    Ok(())
}

/// Parses `argv`, runs the command and maps failures to exit codes. Errors
/// are reported on one stderr line as `error[<category>]: <message>`.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.kind().as_str().unwrap_or("invalid arguments").to_string();
            let detail = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            let _ = writeln!(err, "error[usage]: {msg}: {detail}");
            return 2;
        }
    };
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli, &args, out) {
        Ok(code) => code,
        Err(e) => {
            let cat = e.category();
            let _ = writeln!(err, "error[{}]: {}", cat.as_str(), e.to_string().replace('\n', " "));
            cat.exit_code()
        }
    }
}

/// Runs a parsed command; returns the exit code.
pub fn dispatch(cli: Cli, argv: &[String], out: &mut dyn Write) -> Result<i32> {
    let seed = resolve_seed(cli.seed)?;
    let name = command_name(&cli.command);
    if let Command::Cv(a) = &cli.command {
        return cmd_cv(a, seed.unwrap_or(0), argv, out);
    }
    // Everything but cross-validation runs on a single worker.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    let mut buf: Vec<u8> = Vec::new();
    let code = pool.install(|| {
        let out = &mut buf;
        let p = |config| Provenance::new(name, argv, seed.unwrap_or(0), config);
        match &cli.command {
            Command::Featurize(a) => cmd_featurize(a, p, out),
            Command::Synth(a) => cmd_synth(a, seed, argv, out),
            Command::Train(a) => cmd_train(a, seed.unwrap_or(0), argv, out),
            Command::Evaluate(a) => cmd_evaluate(a, p, out),
            Command::Gradcheck(a) => cmd_gradcheck(a, seed.unwrap_or(0), out),
            Command::Params(a) => cmd_params(a, out),
            Command::AttentionExport(a) => cmd_attention(a, p, out),
            Command::Analyze(a) => cmd_analyze(a, p, out),
            Command::Cv(_) => unreachable!("handled above"),
        }
    });
    out.write_all(&buf).map_err(io_out)?;
    code
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Featurize(_) => "featurize",
        Command::Synth(_) => "synth",
        Command::Train(_) => "train",
        Command::Cv(_) => "cv",
        Command::Evaluate(_) => "evaluate",
        Command::Gradcheck(_) => "gradcheck",
        Command::Params(_) => "params",
        Command::AttentionExport(_) => "attention-export",
        Command::Analyze(_) => "analyze",
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn cmd_featurize(
    a: &FeaturizeArgs,
    prov: impl FnOnce(serde_json::Value) -> Provenance,
    out: &mut dyn Write,
) -> Result<i32> {
    let manifest = parse_manifest(&a.manifest)?;
    let ex = FeatureExtractor::default();
    create_dir(&a.out)?;
    let kinds = a.kind.kinds();
    for e in &manifest.entries {
        let clip = load_wav(manifest.resolve(e))?;
        for &k in &kinds {
            let len = (!a.no_pad).then(|| k.default_len());
            let seq = ex.prepare(&clip, k, len)?;
            write_feature_file(feature_path(&a.out, &e.clip_id, k), &seq)?;
        }
    }
    prov(json!({
        "kinds": kinds,
        "pad": !a.no_pad,
        "logmel": ex.logmel,
        "modspec": ex.modspec,
        "manifest": a.manifest,
    }))
    .write(&a.out.join("provenance.json"))?;
    writeln!(out, "wrote {} clips x {} kinds to {}", manifest.entries.len(), kinds.len(), a.out.display())
        .map_err(io_out)?;
    Ok(0)
}

fn cmd_synth(a: &SynthArgs, seed: Option<u64>, argv: &[String], out: &mut dyn Write) -> Result<i32> {
    let mut spec = match &a.spec {
        Some(p) => SynthSpec::from_json(&read_text(p, "synth spec")?)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    create_dir(&a.out)?;
    let manifest = write_corpus(&spec, &a.out)?;
    Provenance::new("synth", argv, spec.seed, serde_json::to_value(&spec)?).write(&a.out.join("provenance.json"))?;
    writeln!(out, "wrote {} clips from {} speakers to {}", manifest.entries.len(), spec.n_speakers, a.out.display())
        .map_err(io_out)?;
    Ok(0)
}

fn cmd_train(a: &TrainArgs, seed: u64, argv: &[String], out: &mut dyn Write) -> Result<i32> {
    let mut model_cfg = a.arch.resolve()?;
    model_cfg.freeze_branches |= a.freeze_branches;
    model_cfg.validate()?;
    let cfg = a.optim.config(1, seed);
    cfg.validate()?;
    let (_, data) = load_data(&a.data, model_cfg.kind.branches())?;
    let (train_set, val_set): (Vec<&Example>, Vec<&Example>) = match &a.folds {
        Some(p) => {
            let plan = load_plan(p)?;
            check_rotation(&plan, a.rotation)?;
            (
                data.for_speakers(&plan.train_speakers(a.rotation)),
                data.for_speakers(&plan.validation_speakers(a.rotation)),
            )
        }
        None => (data.examples.iter().collect(), Vec::new()),
    };
    let pretrained = a
        .init_from
        .iter()
        .map(|p| load_checkpoint(p).map(|(m, _)| m))
        .collect::<Result<Vec<_>>>()?;
    let outcome = crate::harness::train_with_init(&model_cfg, &train_set, &val_set, &cfg, seed, &pretrained)?;
    save_checkpoint(&a.out, &outcome.model, Some(&outcome.adam))?;
    let history = json!({
        "best_epoch": outcome.best_epoch,
        "history": outcome.history,
    });
    write_text(&sibling(&a.out, "history.json"), &serde_json::to_string_pretty(&history)?)?;
    Provenance::new(
        "train",
        argv,
        seed,
        json!({ "model": model_cfg, "train": cfg, "folds": a.folds, "rotation": a.rotation }),
    )
    .write(&sibling(&a.out, "provenance.json"))?;
    let last = outcome.history.last();
    writeln!(
        out,
        "trained {} on {} clips for {} epochs (kept epoch {}), final loss {:.6}",
        model_cfg.kind,
        train_set.len(),
        outcome.history.len(),
        outcome.best_epoch,
        last.map_or(f64::NAN, |r| r.loss)
    )
    .map_err(io_out)?;
    Ok(0)
}

fn cmd_cv(a: &CvArgs, seed: u64, argv: &[String], out: &mut dyn Write) -> Result<i32> {
    let model_cfg = a.arch.resolve()?;
    let cfg = a.optim.config(a.repeats, seed);
    cfg.validate()?;
    if a.jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    let (manifest, data) = pool.install(|| load_data(&a.data, model_cfg.kind.branches()))?;
    let plan = match &a.folds {
        Some(p) => load_plan(p)?,
        None => plan_folds(&manifest, a.k, seed)?,
    };
    for id in &a.trace {
        if data.find(id).is_none() {
            return Err(Error::Validation(format!("trace clip {id} is not in the manifest")));
        }
    }
    let opts = CvOptions {
        jobs: a.jobs,
        trace_clips: a.trace.clone(),
    };
    let report = run_cv(&data, &plan, &model_cfg, &cfg, &opts)?;
    write_text(&a.out, &report.to_json())?;
    write_text(&sibling(&a.out, "folds.json"), &plan.to_json()?)?;
    for t in &report.attention {
        write_text(&sibling(&a.out, &format!("{}.{}.attention.tsv", t.clip_id, t.kind.name())), &t.to_tsv())?;
    }
    Provenance::new(
        "cv",
        argv,
        seed,
        json!({ "model": model_cfg, "train": cfg, "k": plan.k, "jobs": a.jobs }),
    )
    .write(&sibling(&a.out, "provenance.json"))?;
    writeln!(
        out,
        "{} {}: mean accuracy {:.2}% (std {:.2}, 95% CI ±{:.2}) over {} repeats x {} folds",
        model_cfg.kind, model_cfg.pooling.scheme, report.mean_accuracy, report.std_accuracy, report.ci95,
        cfg.repeats, plan.k
    )
    .map_err(io_out)?;
    Ok(0)
}

fn cmd_evaluate(
    a: &EvaluateArgs,
    prov: impl FnOnce(serde_json::Value) -> Provenance,
    out: &mut dyn Write,
) -> Result<i32> {
    if !a.checkpoint.exists() {
        return Err(Error::NotFound {
            what: "checkpoint",
            path: a.checkpoint.clone(),
        });
    }
    let (model, _) = load_checkpoint(&a.checkpoint)?;
    let (_, data) = load_data(&a.data, model.config().kind.branches())?;
    let examples: Vec<&Example> = match &a.folds {
        Some(p) => {
            let plan = load_plan(p)?;
            check_rotation(&plan, a.rotation)?;
            data.for_speakers(&plan.test_speakers(a.rotation))
        }
        None => data.examples.iter().collect(),
    };
    let ev = evaluate(&model, &examples, 32)?;
    let body = json!({
        "checkpoint": a.checkpoint,
        "n_clips": examples.len(),
        "accuracy": ev.accuracy,
        "loss": ev.loss,
        "confusion": ev.confusion.percentages(),
        "confusion_counts": ev.confusion,
        "predictions": ev.clip_ids.iter().zip(&ev.predictions).map(|(c, p)| json!([c, p])).collect::<Vec<_>>(),
    });
    if let Some(path) = &a.out {
        write_text(path, &serde_json::to_string_pretty(&body)?)?;
        prov(json!({ "model": model.config(), "folds": a.folds, "rotation": a.rotation }))
            .write(&sibling(path, "provenance.json"))?;
    }
    writeln!(out, "accuracy {:.4}% on {} clips, loss {:.6}", ev.accuracy, examples.len(), ev.loss).map_err(io_out)?;
    Ok(0)
}

fn cmd_gradcheck(a: &GradcheckArgs, seed: u64, out: &mut dyn Write) -> Result<i32> {
    if !a.toy {
        return Err(Error::Usage("gradcheck runs on toy dimensions only; pass --toy".into()));
    }
    let mut worst = 0.0f64;
    for (scheme, mode) in pooling_variants() {
        if a.pooling.is_some_and(|p| p != scheme) {
            continue;
        }
        let mut cfg = toy_config(a.arch, scheme);
        cfg.pooling.mode = mode;
        let rep = model_gradcheck(&cfg, &toy_batch(seed, &cfg), seed)?;
        let mode_name = if scheme == PoolingScheme::Attention {
            match mode {
                AttentionMode::SingleSoftmax => "/single",
                AttentionMode::LiteralDoubleSoftmax => "/literal",
            }
        } else {
            ""
        };
        writeln!(
            out,
            "{} {}{}: max relative error {:.3e} over {} parameters, {} at kinks (worst {}[{}])",
            a.arch, scheme, mode_name, rep.max_rel_error, rep.checked, rep.kinks, rep.worst_param, rep.worst_index
        )
        .map_err(io_out)?;
        worst = worst.max(rep.max_rel_error);
    }
    writeln!(out, "max relative error {worst:.3e} (floor {REL_FLOOR:e}, tolerance {:e})", a.tolerance)
        .map_err(io_out)?;
    if worst < a.tolerance {
        Ok(0)
    } else {
        Err(Error::Invariant(format!(
            "gradient check failed: max relative error {worst:.3e} >= {:e}",
            a.tolerance
        )))
    }
}

fn cmd_params(a: &ParamsArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = a.arch.resolve()?;
    let model = Model::<f32>::new(cfg.clone(), 0)?;
    let mut w = |s: String| writeln!(out, "{s}").map_err(io_out);
    w(format!("lstm\t{}", model.lstm_param_count()))?;
    w(format!("total\t{}", model.count_params()))?;
    for &k in cfg.kind.branches() {
        let b = cfg.branch(k);
        w(format!("{}.lstm\t{}", k.name(), b.lstm_params()))?;
        w(format!("{}.complexity\t{}", k.name(), b.complexity()))?;
    }
    let ratio = cfg.modspec.complexity() as f64 / cfg.logmel.complexity() as f64;
    w(format!("complexity_ratio\t{ratio:.4}"))?;
    Ok(0)
}

fn cmd_attention(
    a: &AttentionArgs,
    prov: impl FnOnce(serde_json::Value) -> Provenance,
    out: &mut dyn Write,
) -> Result<i32> {
    if !a.checkpoint.exists() {
        return Err(Error::NotFound {
            what: "checkpoint",
            path: a.checkpoint.clone(),
        });
    }
    let (model, _) = load_checkpoint(&a.checkpoint)?;
    let (_, data) = load_data(&a.data, model.config().kind.branches())?;
    create_dir(&a.out)?;
    let mut written = 0;
    for id in &a.clip {
        let ex = data
            .find(id)
            .ok_or_else(|| Error::Validation(format!("clip {id} is not in the manifest")))?;
        for t in crate::harness::export_attention(&model, ex)? {
            write_text(&a.out.join(format!("{}.{}.attention.tsv", t.clip_id, t.kind.name())), &t.to_tsv())?;
            written += 1;
        }
    }
    prov(json!({ "model": model.config(), "clips": a.clip })).write(&a.out.join("provenance.json"))?;
    writeln!(out, "wrote {written} traces to {}", a.out.display()).map_err(io_out)?;
    Ok(0)
}

fn cmd_analyze(
    a: &AnalyzeArgs,
    prov: impl FnOnce(serde_json::Value) -> Provenance,
    out: &mut dyn Write,
) -> Result<i32> {
    let manifest = parse_manifest(&a.manifest)?;
    let ex = FeatureExtractor::default();
    let centers = modulation_centers(&ex.modspec);
    let seqs = manifest
        .entries
        .iter()
        .map(|e| ex.extract(&load_wav(manifest.resolve(e))?, FeatureKind::Modulation))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<_> = manifest.entries.iter().map(|e| e.class).collect();
    create_dir(&a.out)?;

    let profile = band_energy_profile(&seqs, &labels, centers.len())?;
    write_text(
        &a.out.join("band_profile.json"),
        &serde_json::to_string_pretty(&json!({ "centers_hz": centers, "profile": profile }))?,
    )?;

    let corr = corr_map(&seqs, &labels)?;
    let m = centers.len();
    let mut tsv = String::from("band");
    for c in &centers {
        tsv.push_str(&format!("\t{c:.2}Hz"));
    }
    tsv.push('\n');
    for (k, row) in corr.chunks(m).enumerate() {
        tsv.push_str(&k.to_string());
        for v in row {
            tsv.push_str(&format!("\t{v:.6}"));
        }
        tsv.push('\n');
    }
    write_text(&a.out.join("corr_map.tsv"), &tsv)?;

    let mut lh = String::from("clip_id\tspeaker_id\tclass\tlhmr\n");
    for (e, s) in manifest.entries.iter().zip(&seqs) {
        let v = match lhmr(s, &centers) {
            Ok(v) => format!("{v:.6}"),
            Err(Error::Degenerate(_)) => "inf".into(),
            Err(e) => return Err(e),
        };
        lh.push_str(&format!("{}\t{}\t{}\t{v}\n", e.clip_id, e.speaker_id, e.class));
    }
    write_text(&a.out.join("lhmr.tsv"), &lh)?;
    prov(json!({ "modspec": ex.modspec, "manifest": a.manifest })).write(&a.out.join("provenance.json"))?;
    writeln!(out, "analyzed {} clips into {}", seqs.len(), a.out.display()).map_err(io_out)?;
    Ok(0)
}
