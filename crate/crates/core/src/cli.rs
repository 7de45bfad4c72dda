//! Command-line front end: `train`, `eval`, `process` and `profile`.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 configuration error,
//! 3 data error, 4 numerical abort. Every run that writes files also writes
//! `manifest.json` with the resolved configuration, so rerunning with the
//! manifest's config reproduces the outputs bit for bit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{self, WavFormat};
use crate::dnnha::{self, load_checkpoint, save_checkpoint, ArchSpec, DnnError, ModelParams};
use crate::evalkit::{evaluate, EvalConfig, EvalError, Evaluator};
use crate::losses::LossError;
use crate::periphery::{Audiogram, CFMap, FiberCounts, HearingProfile, Periphery, PeripheryConfig, PeripheryError};
use crate::trainer::{self, synthetic_corpus, Sentence, TrainConfig, TrainError, MODEL_RATE};

/// A failed command, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Output(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let m = e.to_string();
        match e {
            TrainError::Config(_) | TrainError::Loss(_) | TrainError::Dnn(_) => CliError::Config(m),
            TrainError::Periphery(PeripheryError::Context { .. }) => CliError::Data(m),
            TrainError::Periphery(_) => CliError::Config(m),
            TrainError::NonFinite { .. } | TrainError::Ad(_) => CliError::Numeric(m),
            TrainError::Data(_) | TrainError::Audio(_) => CliError::Data(m),
            TrainError::Io(_) => CliError::Output(m),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let m = e.to_string();
        match e {
            EvalError::Periphery(PeripheryError::Context { .. }) | EvalError::Input(_) | EvalError::Audio(_) => CliError::Data(m),
            EvalError::Periphery(_) | EvalError::Dnn(_) => CliError::Config(m),
            EvalError::ZeroReference => CliError::Numeric(m),
            EvalError::Io(_) => CliError::Output(m),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "hacomp", version, about = "Closed-loop hearing-loss compensation: train, evaluate and apply models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model against a hearing profile.
    Train(TrainArgs),
    /// Evaluate NRMSE and EFR, processed or unprocessed.
    Eval(EvalArgs),
    /// Run a WAV file through a trained model.
    Process(ProcessArgs),
    /// List, show or build hearing profiles.
    #[command(subcommand)]
    Profile(ProfileCmd),
}

/// Seeded synthetic sentences, used when no WAV corpus is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub sentences: usize,
    pub seed: u64,
    pub min_s: f64,
    pub max_s: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { sentences: 20, seed: 1, min_s: 1.0, max_s: 1.5 }
    }
}

/// JSON body of `train --config`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRun {
    pub corpus: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    /// Checkpoint to continue from.
    pub init: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub train: TrainConfig,
}

/// JSON body of `eval --config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalRun {
    pub corpus: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    /// Checkpoint file, or a training output directory.
    pub checkpoint: Option<PathBuf>,
    pub unprocessed: bool,
    /// Expected model architecture; a checkpoint that differs is rejected.
    pub arch: Option<ArchSpec>,
    pub max_sentences: Option<usize>,
    pub hi_profile: String,
    pub nh_profile: String,
    pub out: Option<PathBuf>,
    pub eval: EvalConfig,
}

impl Default for EvalRun {
    fn default() -> Self {
        Self {
            corpus: None,
            synthetic: None,
            checkpoint: None,
            unprocessed: false,
            arch: None,
            max_sentences: None,
            hi_profile: "Slope35+CS-7-0-0".into(),
            nh_profile: "NH".into(),
            out: None,
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the desk-scale defaults instead of the full-scale ones.
    #[arg(long)]
    pub desk: bool,
    #[arg(long)]
    pub loss: Option<String>,
    /// HI profile preset or JSON path.
    #[arg(long)]
    pub profile: Option<String>,
    /// Directory of mono WAV sentences.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Use this many synthetic sentences instead of a corpus.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Cap on the number of sentences.
    #[arg(long)]
    pub sentences: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub desk: bool,
    /// Checkpoint file or training output directory.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate without a model.
    #[arg(long)]
    pub unprocessed: bool,
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long)]
    pub sentences: Option<usize>,
    /// SNR conditions in dB, speech-shaped noise.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub snr: Option<Vec<f64>>,
    /// Quiet presentation levels in dB SPL.
    #[arg(long, num_args = 1..)]
    pub levels: Option<Vec<f64>>,
    #[arg(long)]
    pub no_efr: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProcessArgs {
    /// Checkpoint file or training output directory.
    #[arg(long)]
    pub checkpoint: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    /// Presentation level the WAV's RMS maps to, in dB SPL.
    #[arg(long, default_value_t = 70.0)]
    pub level_db: f64,
    #[arg(long, default_value_t = 2048)]
    pub window: usize,
    /// Write 32-bit float samples instead of 16-bit PCM.
    #[arg(long)]
    pub float: bool,
}

#[derive(Subcommand, Debug)]
pub enum ProfileCmd {
    /// Print the preset names.
    List,
    /// Print a preset or profile file as JSON.
    Show { name: String },
    /// Build a profile whose loss rises log-linearly between two frequencies.
    MakeSloping {
        /// Loss at the upper frequency, dB.
        #[arg(long)]
        db: f64,
        #[arg(long, default_value_t = 1000.0)]
        from_hz: f64,
        #[arg(long, default_value_t = 8000.0)]
        to_hz: f64,
        /// Fiber counts H M L.
        #[arg(long, num_args = 3, value_names = ["H", "M", "L"])]
        counts: Option<Vec<f64>>,
        #[arg(long)]
        name: Option<String>,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| out_err(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| out_err(dir, e))
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a C,
    /// `(file name, sha256)` of every output.
    outputs: Vec<(String, String)>,
    runtime_s: f64,
}

fn write_manifest<C: Serialize>(dir: &Path, command: &str, seed: u64, config: &C, outputs: Vec<(String, String)>, t0: Instant) -> Result<()> {
    let m = Manifest { command, version: env!("CARGO_PKG_VERSION"), seed, config, outputs, runtime_s: t0.elapsed().as_secs_f64() };
    let text = serde_json::to_vec_pretty(&m).map_err(|e| CliError::Output(e.to_string()))?;
    write_file(&dir.join("manifest.json"), &text)
}

/// Raw sentences from a WAV directory or the synthetic generator.
fn load_sentences(corpus: &Option<PathBuf>, synthetic: &Option<SyntheticSpec>, max: Option<usize>) -> Result<Vec<Sentence>> {
    let mut out = match (corpus, synthetic) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either a corpus directory or a synthetic corpus, not both".into())),
        (Some(dir), None) => {
            let entries = std::fs::read_dir(dir).map_err(|e| CliError::Data(format!("corpus {}: {e}", dir.display())))?;
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            paths.sort();
            if let Some(m) = max {
                paths.truncate(m);
            }
            if paths.is_empty() {
                return Err(CliError::Data(format!("corpus {}: no .wav files", dir.display())));
            }
            paths
                .iter()
                .map(|p| {
                    let (samples, sample_rate) = audio::read_wav(p).map_err(|e| CliError::Data(e.to_string()))?;
                    let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    Ok(Sentence { name, samples, sample_rate })
                })
                .collect::<Result<Vec<_>>>()?
        }
        (None, Some(s)) => synthetic_corpus(s.sentences, s.seed, s.min_s, s.max_s),
        (None, None) => return Err(CliError::Config("no corpus: pass --corpus DIR or --synthetic N".into())),
    };
    if let Some(m) = max {
        out.truncate(m);
    }
    if out.is_empty() {
        return Err(CliError::Data("corpus is empty".into()));
    }
    Ok(out)
}

fn checkpoint_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("model.dnnha")
    } else {
        p.to_path_buf()
    }
}

fn load_model(p: &Path) -> Result<ModelParams> {
    let path = checkpoint_path(p);
    if !path.is_file() {
        return Err(CliError::Data(format!("checkpoint {} not found", path.display())));
    }
    match load_checkpoint(&path) {
        Ok(c) => Ok(c.params),
        Err(e @ DnnError::Io(_)) => Err(CliError::Data(format!("{}: {e}", path.display()))),
        Err(e) => Err(CliError::Config(format!("{}: {e}", path.display()))),
    }
}

fn periphery_for(context_left: usize, context_right: usize) -> Result<Periphery> {
    let mut pc = PeripheryConfig::default();
    pc.context_left = context_left;
    pc.context_right = context_right;
    Periphery::new(pc, CFMap::standard()).map_err(config_err)
}

/// Resolves the training configuration from defaults, a JSON file and flags.
pub fn resolve_train(args: &TrainArgs) -> Result<TrainRun> {
    let mut run = match &args.config {
        Some(p) => read_json::<TrainRun>(p)?,
        None => TrainRun { train: if args.desk { TrainConfig::desk() } else { TrainConfig::default() }, ..TrainRun::default() },
    };
    let t = &mut run.train;
    if let Some(v) = &args.loss {
        t.loss = v.clone();
    }
    if let Some(v) = &args.profile {
        t.hi_profile = v.clone();
    }
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.sentences {
        t.max_sentences = Some(v);
    }
    if let Some(v) = args.lr {
        t.learning_rate = v;
    }
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if let Some(d) = &args.corpus {
        run.corpus = Some(d.clone());
        run.synthetic = None;
    }
    if let Some(n) = args.synthetic {
        run.synthetic = Some(SyntheticSpec { sentences: n, ..SyntheticSpec::default() });
        run.corpus = None;
    }
    if let Some(v) = &args.init {
        run.init = Some(v.clone());
    }
    if let Some(v) = &args.out {
        run.out = Some(v.clone());
    }
    run.train.validate()?;
    Ok(run)
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let t0 = Instant::now();
    let run = resolve_train(args)?;
    let out = run.out.clone().ok_or_else(|| CliError::Config("no output directory: pass --out DIR".into()))?;
    let cfg = &run.train;
    let sentences = load_sentences(&run.corpus, &run.synthetic, cfg.max_sentences)?;
    let data = trainer::prepare_corpus(&sentences, &cfg.pad_spec())?;
    let periphery = cfg.periphery()?;
    let init = run.init.as_deref().map(load_model).transpose()?;
    create_out(&out)?;
    let outcome = trainer::train(cfg, &data, &periphery, init, &mut |row| {
        eprintln!("epoch {} step {} {}: loss {:.6e}", row.epoch, row.step, row.source, row.total);
    })?;
    let ckpt = out.join("model.dnnha");
    save_checkpoint(&ckpt, &outcome.checkpoint).map_err(|e| out_err(&ckpt, e))?;
    let mut log = Vec::new();
    trainer::write_log_csv(&mut log, &outcome.log)?;
    write_file(&out.join("loss_log.csv"), &log)?;
    let ckpt_bytes = std::fs::read(&ckpt).map_err(|e| out_err(&ckpt, e))?;
    let outputs = vec![("model.dnnha".into(), sha256_hex(&ckpt_bytes)), ("loss_log.csv".into(), sha256_hex(&log))];
    write_manifest(&out, "train", cfg.seed, &run, outputs, t0)?;
    eprintln!("wrote {}", ckpt.display());
    Ok(())
}

pub fn resolve_eval(args: &EvalArgs) -> Result<EvalRun> {
    let mut run = match &args.config {
        Some(p) => read_json::<EvalRun>(p)?,
        None => EvalRun { eval: if args.desk { EvalConfig::desk() } else { EvalConfig::default() }, ..EvalRun::default() },
    };
    if let Some(v) = &args.checkpoint {
        run.checkpoint = Some(v.clone());
    }
    if args.unprocessed {
        run.unprocessed = true;
    }
    if let Some(v) = &args.profile {
        run.hi_profile = v.clone();
    }
    if let Some(d) = &args.corpus {
        run.corpus = Some(d.clone());
        run.synthetic = None;
    }
    if let Some(n) = args.synthetic {
        run.synthetic = Some(SyntheticSpec { sentences: n, seed: 99, ..SyntheticSpec::default() });
        run.corpus = None;
    }
    if let Some(v) = args.sentences {
        run.max_sentences = Some(v);
    }
    if let Some(v) = &args.snr {
        run.eval.snrs_db = v.clone();
    }
    if let Some(v) = &args.levels {
        run.eval.levels_db = v.clone();
    }
    if args.no_efr {
        run.eval.sam = None;
    }
    if let Some(v) = &args.out {
        run.out = Some(v.clone());
    }
    if run.unprocessed == run.checkpoint.is_some() {
        return Err(CliError::Config("pass exactly one of --checkpoint PATH and --unprocessed".into()));
    }
    Ok(run)
}

fn check_model(run: &EvalRun, m: &ModelParams) -> Result<()> {
    if let Some(want) = &run.arch {
        if want != &m.spec {
            return Err(CliError::Config(format!("checkpoint architecture {:?} does not match the configured {:?}", m.spec, want)));
        }
    }
    let g = m.spec.granularity();
    if run.eval.window % g != 0 {
        return Err(CliError::Config(format!("evaluation window {} is not a multiple of the checkpoint granularity {g}", run.eval.window)));
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let t0 = Instant::now();
    let run = resolve_eval(args)?;
    let out = run.out.clone().ok_or_else(|| CliError::Config("no output directory: pass --out DIR".into()))?;
    let c = &run.eval;
    let periphery = periphery_for(c.context_left, c.context_right)?;
    periphery.body_len(c.total_len).map_err(config_err)?;
    let nh = HearingProfile::load(&run.nh_profile).map_err(config_err)?;
    let hi = HearingProfile::load(&run.hi_profile).map_err(config_err)?;
    let model = run.checkpoint.as_deref().map(load_model).transpose()?;
    if let Some(m) = &model {
        check_model(&run, m)?;
    }
    let sentences = load_sentences(&run.corpus, &run.synthetic, run.max_sentences)?;
    let ev = Evaluator { periphery: &periphery, nh, hi, model: model.as_ref(), config: c.clone() };
    let label = run.checkpoint.as_ref().map(|p| p.display().to_string());
    let report = evaluate(&ev, &sentences, label)?;
    for f in &report.failures {
        eprintln!("warning: skipped {f}");
    }
    create_out(&out)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        write_file(&out.join(name), &bytes)?;
        files.push((name.to_string(), sha256_hex(&bytes)));
        Ok(())
    };
    let mut buf = Vec::new();
    report.write_json(&mut buf)?;
    emit("report.json", buf)?;
    let mut buf = Vec::new();
    report.write_rows_csv(&mut buf)?;
    emit("rows.csv", buf)?;
    let mut buf = Vec::new();
    report.write_level_csv(&mut buf)?;
    emit("nrmse_by_level.csv", buf)?;
    let mut buf = Vec::new();
    report.write_efr_csv(&mut buf)?;
    emit("efr.csv", buf)?;
    write_manifest(&out, "eval", c.seed, &run, files, t0)?;
    for a in &report.aggregates {
        let snr = a.snr_db.map(|s| format!("{s} dB SNR")).unwrap_or_else(|| "quiet".into());
        match a.nrmse_processed_pct {
            Some(p) => println!("{} dB SPL, {snr}: NRMSE {:.2}% -> {:.2}%", a.level_db, a.nrmse_unprocessed_pct, p),
            None => println!("{} dB SPL, {snr}: NRMSE {:.2}%", a.level_db, a.nrmse_unprocessed_pct),
        }
    }
    if let Some(e) = &report.efr {
        println!("EFR sum: NH {:.3} nV, HI {:.3} nV{}", e.nh, e.hi_unprocessed, e.hi_processed.map(|p| format!(", processed {p:.3} nV")).unwrap_or_default());
    }
    Ok(())
}

/// Processed samples at the input rate, with the limiter gain applied
/// (1 when no limiting was needed).
pub fn process_samples(model: &ModelParams, x: &[f64], rate: u32, level_db: f64, window: usize) -> Result<(Vec<f64>, f64)> {
    if x.is_empty() {
        return Err(CliError::Data("input has no samples".into()));
    }
    let g = model.spec.granularity();
    if window % g != 0 {
        return Err(CliError::Config(format!("window {window} is not a multiple of the model granularity {g}")));
    }
    let up = audio::resample(x, rate, MODEL_RATE).map_err(|e| CliError::Data(e.to_string()))?;
    let r = audio::rms(&up);
    // Silence stays at its own scale; there is no level to calibrate to.
    let cal = if r > 0.0 { audio::spl_to_rms(level_db) / r } else { 1.0 };
    let n = up.len();
    let mut padded: Vec<f64> = up.iter().map(|v| v * cal).collect();
    padded.resize(n.div_ceil(g) * g, 0.0);
    let y = dnnha::process(model, &padded, window).map_err(config_err)?;
    let body: Vec<f64> = y[..n].iter().map(|v| v / cal).collect();
    let mut down = audio::resample(&body, MODEL_RATE, rate).map_err(|e| CliError::Data(e.to_string()))?;
    down.resize(x.len(), 0.0);
    let peak = down.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    if limit < 1.0 {
        down.iter_mut().for_each(|v| *v *= limit);
    }
    if !down.iter().all(|v| v.is_finite()) {
        return Err(CliError::Numeric("model produced non-finite samples".into()));
    }
    Ok((down, limit))
}

pub fn cmd_process(args: &ProcessArgs) -> Result<()> {
    let model = load_model(&args.checkpoint)?;
    let (x, rate) = audio::read_wav(&args.input).map_err(|e| CliError::Data(e.to_string()))?;
    let (y, limit) = process_samples(&model, &x, rate, args.level_db, args.window)?;
    if limit < 1.0 {
        eprintln!("warning: output peak exceeded full scale; scaled by {:.2} dB", 20.0 * limit.log10());
    }
    let fmt = if args.float { WavFormat::Float32 } else { WavFormat::Pcm16 };
    audio::write_wav(&args.output, &y, rate, fmt).map_err(|e| out_err(&args.output, e))?;
    Ok(())
}

pub fn cmd_profile(cmd: &ProfileCmd) -> Result<()> {
    let json = |p: &HearingProfile| serde_json::to_string_pretty(p).expect("profiles serialise");
    match cmd {
        ProfileCmd::List => {
            for n in HearingProfile::preset_names() {
                println!("{n}");
            }
        }
        ProfileCmd::Show { name } => {
            let p = HearingProfile::load(name).map_err(config_err)?;
            println!("{}", json(&p));
        }
        ProfileCmd::MakeSloping { db, from_hz, to_hz, counts, name, out } => {
            let p = make_sloping(*db, *from_hz, *to_hz, counts.as_deref(), name.clone())?;
            match out {
                Some(path) => write_file(path, json(&p).as_bytes())?,
                None => println!("{}", json(&p)),
            }
        }
    }
    Ok(())
}

/// Profile with no loss up to `from_hz`, `db` at and above `to_hz`, and
/// log-linear in between.
pub fn make_sloping(db: f64, from_hz: f64, to_hz: f64, counts: Option<&[f64]>, name: Option<String>) -> Result<HearingProfile> {
    if !(db.is_finite() && db >= 0.0 && from_hz > 0.0 && to_hz > from_hz) {
        return Err(CliError::Config(format!("sloping loss of {db} dB between {from_hz} and {to_hz} Hz")));
    }
    let fiber_counts = match counts {
        Some(&[h, m, l]) => FiberCounts::new(h, m, l),
        Some(_) => return Err(CliError::Config("fiber counts need three values".into())),
        None => FiberCounts::NH,
    };
    let p = HearingProfile {
        name: name.unwrap_or_else(|| format!("Slope{db}")),
        audiogram: Audiogram::Anchors(vec![(from_hz, 0.0), (to_hz, db)]),
        fiber_counts,
    };
    p.validate(&CFMap::standard()).map_err(config_err)?;
    Ok(p)
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let res = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Process(a) => cmd_process(a),
        Command::Profile(c) => cmd_profile(c),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        CliError::Config(e.to_string())
    }
}
