//! Dataset preparation and the closed-loop training procedure.
//!
//! Each step crops the context off a padded item, runs the crop through the
//! hearing-aid model in fixed windows, puts the original context back, and
//! compares the impaired periphery's response with the cached normal-hearing
//! response. Only the model parameters are leaves on the tape, so the
//! periphery stays frozen by construction.

pub mod corpus;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ad::{AdError, AdamState, Array, Tape, Var};
use crate::audio::{self, AudioError};
use crate::dnnha::{self, ArchSpec, Checkpoint, DnnError, ModelParams};
use crate::losses::{compose, Bundle, LossError, LossSpec, LossValue, TermValue};
use crate::periphery::{strided_subset, HearingProfile, Periphery, PeripheryError};

pub use corpus::{synthetic_corpus, synthetic_sentence, Sentence, CORPUS_RATE};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Data(String),
    #[error("non-finite loss at epoch {epoch}, item {item} ({source_name}): {breakdown}")]
    NonFinite { epoch: usize, item: usize, source_name: String, breakdown: String },
    #[error(transparent)]
    Periphery(#[from] PeripheryError),
    #[error(transparent)]
    Dnn(#[from] DnnError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Sample rate of the periphery and the model.
pub const MODEL_RATE: u32 = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Loss preset name or JSON path.
    pub loss: String,
    /// Profile preset name or JSON path.
    pub hi_profile: String,
    pub nh_profile: String,
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak step size.
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
    pub cf_subset: Vec<usize>,
    pub level_db: f64,
    pub window: usize,
    pub context_left: usize,
    pub context_right: usize,
    pub total_len: usize,
    pub arch: ArchSpec,
    pub max_sentences: Option<usize>,
    /// Uniform SNR range for white-noise augmentation, if any.
    pub noise_snr_range: Option<[f64; 2]>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: "L_r2rp2Rp2+Tx".into(),
            hi_profile: "Slope35+CS-7-0-0".into(),
            nh_profile: "NH".into(),
            epochs: 60,
            batch_size: 1,
            learning_rate: 1e-4,
            lr_schedule: LrSchedule::Constant,
            seed: 0,
            cf_subset: strided_subset(201, 10),
            level_db: 70.0,
            window: 2048,
            context_left: 7936,
            context_right: 256,
            total_len: 81_920,
            arch: ArchSpec::default(),
            max_sentences: None,
            noise_snr_range: None,
        }
    }
}

impl TrainConfig {
    /// Minutes-scale settings: 32768-sample bodies, five epochs, a residual
    /// model and a larger, cosine-decayed step size.
    pub fn desk() -> Self {
        Self {
            epochs: 5,
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Cosine,
            total_len: 7936 + 32_768 + 256,
            arch: ArchSpec { residual: true, ..ArchSpec::default() },
            max_sentences: Some(20),
            ..Self::default()
        }
    }

    pub fn body_len(&self) -> usize {
        self.total_len.saturating_sub(self.context_left + self.context_right)
    }

    pub fn pad_spec(&self) -> PadSpec {
        PadSpec {
            context_left: self.context_left,
            context_right: self.context_right,
            total_len: self.total_len,
            level_db: self.level_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if !self.level_db.is_finite() {
            return bad(format!("level {} dB", self.level_db));
        }
        self.arch.validate()?;
        let g = self.arch.granularity();
        let body = self.body_len();
        if self.window == 0 || self.window % g != 0 {
            return bad(format!("window {} is not a multiple of the model granularity {g}", self.window));
        }
        if body == 0 || body % self.window != 0 {
            return bad(format!("body of {body} samples is not a positive multiple of the {}-sample window", self.window));
        }
        if self.cf_subset.is_empty() {
            return bad("empty CF subset".into());
        }
        if let Some([lo, hi]) = self.noise_snr_range {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("noise SNR range [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    /// Periphery whose context and block rules match these lengths.
    pub fn periphery(&self) -> Result<Periphery> {
        let mut pc = crate::periphery::PeripheryConfig::default();
        pc.context_left = self.context_left;
        pc.context_right = self.context_right;
        Ok(Periphery::new(pc, crate::periphery::CFMap::standard())?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from the peak to zero over all optimizer steps.
    Cosine,
}

impl LrSchedule {
    /// Step size for update `step` (0-based) of `total`.
    pub fn at(self, peak: f64, step: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => peak,
            LrSchedule::Cosine => 0.5 * peak * (1.0 + (std::f64::consts::PI * step as f64 / total.max(1) as f64).cos()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PadSpec {
    pub context_left: usize,
    pub context_right: usize,
    pub total_len: usize,
    pub level_db: f64,
}

/// A calibrated, context-padded waveform at [`MODEL_RATE`].
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetItem {
    pub waveform: Vec<f64>,
    pub source: String,
    /// Samples of sentence after the leading context.
    pub sentence_len: usize,
    pub duration_s: f64,
    pub snr_db: Option<f64>,
}

impl DatasetItem {
    pub fn sentence(&self, context_left: usize) -> &[f64] {
        &self.waveform[context_left..context_left + self.sentence_len]
    }
}

/// `left` zeros, the sentence, then zeros up to `total`.
pub fn pad_context(sentence: &[f64], left: usize, right: usize, total: usize) -> Result<Vec<f64>> {
    if left + sentence.len() + right > total {
        return Err(TrainError::Data(format!(
            "sentence of {} samples does not fit in {total} with {left} + {right} context",
            sentence.len()
        )));
    }
    let mut out = vec![0.0; total];
    out[left..left + sentence.len()].copy_from_slice(sentence);
    Ok(out)
}

/// Resamples to [`MODEL_RATE`], calibrates and pads one sentence.
pub fn prepare(samples: &[f64], rate: u32, source: &str, pad: &PadSpec) -> Result<DatasetItem> {
    if samples.is_empty() {
        return Err(TrainError::Data(format!("{source}: empty signal")));
    }
    let x = audio::resample(samples, rate, MODEL_RATE)?;
    let x = audio::calibrate(&x, pad.level_db).map_err(|e| TrainError::Data(format!("{source}: {e}")))?;
    let waveform = pad_context(&x, pad.context_left, pad.context_right, pad.total_len)
        .map_err(|e| TrainError::Data(format!("{source}: {e}")))?;
    Ok(DatasetItem {
        waveform,
        source: source.to_string(),
        sentence_len: x.len(),
        duration_s: x.len() as f64 / MODEL_RATE as f64,
        snr_db: None,
    })
}

pub fn ingest(path: &Path, pad: &PadSpec) -> Result<DatasetItem> {
    let (x, rate) = audio::read_wav(path).map_err(|e| TrainError::Data(e.to_string()))?;
    prepare(&x, rate, &path.display().to_string(), pad)
}

/// Every `.wav` in `dir`, in file-name order.
pub fn ingest_dir(dir: &Path, pad: &PadSpec, max: Option<usize>) -> Result<Vec<DatasetItem>> {
    let entries = std::fs::read_dir(dir).map_err(|e| TrainError::Data(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if let Some(m) = max {
        paths.truncate(m);
    }
    if paths.is_empty() {
        return Err(TrainError::Data(format!("{}: no .wav files", dir.display())));
    }
    paths.iter().map(|p| ingest(p, pad)).collect()
}

pub fn prepare_corpus(sentences: &[Sentence], pad: &PadSpec) -> Result<Vec<DatasetItem>> {
    sentences.iter().map(|s| prepare(&s.samples, s.sample_rate, &s.name, pad)).collect()
}

/// Adds seeded white noise over the sentence support at `snr_db`. Both
/// pathways later see the same noisy input. An infinite SNR leaves the item
/// unchanged.
pub fn mix_item(item: &DatasetItem, context_left: usize, snr_db: f64, seed: u64) -> Result<DatasetItem> {
    if snr_db == f64::INFINITY {
        return Ok(item.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..item.sentence_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mixed = audio::mix_at_snr(item.sentence(context_left), &noise, snr_db)?;
    let mut out = item.clone();
    out.waveform[context_left..context_left + item.sentence_len].copy_from_slice(&mixed);
    out.snr_db = Some(snr_db);
    Ok(out)
}

/// One uniformly drawn SNR per item from `range`, seeded.
pub fn add_noise_training(items: &[DatasetItem], context_left: usize, range: [f64; 2], seed: u64) -> Result<Vec<DatasetItem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items
        .iter()
        .map(|it| {
            let snr = if range[1] > range[0] { rng.gen_range(range[0]..=range[1]) } else { range[0] };
            let s = rng.gen::<u64>();
            mix_item(it, context_left, snr, s)
        })
        .collect()
}

/// Frozen pieces of one training step.
pub struct Pipeline<'a> {
    pub periphery: &'a Periphery,
    pub nh: HearingProfile,
    pub hi: HearingProfile,
    pub loss: LossSpec,
    pub subset: Vec<usize>,
    pub cf_hz: Vec<f64>,
    pub arch: ArchSpec,
    pub window: usize,
    pub context_left: usize,
    pub body_len: usize,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &TrainConfig, periphery: &'a Periphery) -> Result<Self> {
        cfg.validate()?;
        let pc = periphery.config();
        if pc.context_left != cfg.context_left || pc.context_right != cfg.context_right {
            return Err(TrainError::Config(format!(
                "periphery context {}+{} differs from training context {}+{}",
                pc.context_left, pc.context_right, cfg.context_left, cfg.context_right
            )));
        }
        periphery.body_len(cfg.total_len)?;
        let nh = HearingProfile::load(&cfg.nh_profile)?;
        let hi = HearingProfile::load(&cfg.hi_profile)?;
        let loss = LossSpec::load(&cfg.loss)?;
        loss.validate()?;
        let cf_hz = periphery.cf_map().subset(&cfg.cf_subset)?.cf_hz().to_vec();
        Ok(Self {
            periphery,
            nh,
            hi,
            loss,
            subset: cfg.cf_subset.clone(),
            cf_hz,
            arch: cfg.arch.clone(),
            window: cfg.window,
            context_left: cfg.context_left,
            body_len: cfg.body_len(),
        })
    }

    fn check_item(&self, item: &DatasetItem) -> Result<()> {
        let want = self.context_left + self.body_len + self.periphery.config().context_right;
        if item.waveform.len() != want {
            return Err(TrainError::Data(format!("{}: {} samples, expected {want}", item.source, item.waveform.len())));
        }
        Ok(())
    }

    /// Cached reference response `[C × L]` of the normal-hearing pathway.
    pub fn nh_response(&self, item: &DatasetItem) -> Result<Array> {
        self.check_item(item)?;
        Ok(self.periphery.simulate(&item.waveform, &self.nh, &self.subset)?.rates)
    }

    pub fn crop<'t>(&self, tape: &'t Tape, item: &DatasetItem) -> Var {
        tape.constant(Array::vector(item.waveform[self.context_left..self.context_left + self.body_len].to_vec()))
    }

    /// Original context around the processed body.
    pub fn assemble(&self, tape: &Tape, item: &DatasetItem, processed: &Var) -> Result<Var> {
        let w = &item.waveform;
        let end = self.context_left + self.body_len;
        let left = tape.constant(Array::vector(w[..self.context_left].to_vec()));
        let right = tape.constant(Array::vector(w[end..].to_vec()));
        Ok(tape.concat_time(&[&left, processed, &right])?)
    }

    /// Loss of one item, plus the crop and the assembled model input.
    pub fn forward_loss(&self, tape: &Tape, params: &[Var], item: &DatasetItem, nh: &Array) -> Result<(LossValue, Var, Var)> {
        self.check_item(item)?;
        let x = self.crop(tape, item);
        let y = dnnha::forward_windowed(tape, &self.arch, params, &x, self.window)?;
        let full = self.assemble(tape, item, &y)?;
        let r_hat = self.periphery.simulate_var(tape, &full, &self.hi, &self.subset)?;
        let r = tape.constant(nh.clone());
        let b = Bundle { x: &x, x_hat: &y, r: &r, r_hat: &r_hat, cf_hz: &self.cf_hz, sample_rate_hz: self.periphery.sample_rate() };
        let loss = compose(tape, &self.loss, &b)?;
        Ok((loss, x, full))
    }

    /// Loss value, breakdown and parameter gradients for one item.
    pub fn step(&self, params: &ModelParams, item: &DatasetItem, nh: &Array) -> Result<(f64, Vec<TermValue>, Vec<Array>)> {
        let tape = Tape::new();
        let leaves = params.leaves(&tape);
        let (loss, _, _) = self.forward_loss(&tape, &leaves, item, nh)?;
        let value = loss.value();
        if value.is_finite() {
            tape.backward(&loss.total)?;
        }
        let grads = leaves
            .iter()
            .zip(&params.values)
            .map(|(v, p)| tape.grad(v).unwrap_or_else(|| Array::zeros(p.shape())))
            .collect();
        Ok((value, loss.terms, grads))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub epoch: usize,
    pub step: usize,
    pub item: usize,
    pub source: String,
    pub total: f64,
    pub terms: Vec<TermValue>,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
    pub periphery_hash_before: String,
    pub periphery_hash_after: String,
}

impl TrainOutcome {
    /// Median training loss of each epoch.
    pub fn epoch_medians(&self) -> Vec<f64> {
        let epochs = self.log.iter().map(|r| r.epoch).max().unwrap_or(0);
        (1..=epochs)
            .map(|e| {
                let mut v: Vec<f64> = self.log.iter().filter(|r| r.epoch == e).map(|r| r.total).collect();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            })
            .collect()
    }
}

fn breakdown(terms: &[TermValue]) -> String {
    terms.iter().map(|t| format!("{}={}", t.label, t.raw)).collect::<Vec<_>>().join(", ")
}

fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    order.shuffle(&mut rng);
    order
}

/// Trains from `init` (or a fresh seeded model) for `cfg.epochs` passes.
/// `observer` sees every log row as it is produced.
pub fn train(
    cfg: &TrainConfig,
    data: &[DatasetItem],
    periphery: &Periphery,
    init: Option<ModelParams>,
    observer: &mut dyn FnMut(&LogRow),
) -> Result<TrainOutcome> {
    let pipe = Pipeline::new(cfg, periphery)?;
    if data.is_empty() {
        return Err(TrainError::Data("empty dataset".into()));
    }
    let hash_before = periphery.parameter_hash();
    let data: Vec<DatasetItem> = match cfg.noise_snr_range {
        Some(range) => add_noise_training(data, cfg.context_left, range, cfg.seed)?,
        None => data.to_vec(),
    };
    let nh: Vec<Array> = data.par_iter().map(|it| pipe.nh_response(it)).collect::<Result<_>>()?;

    let mut params = match init {
        Some(p) => {
            p.validate()?;
            if p.spec != cfg.arch {
                return Err(TrainError::Config("initial model architecture differs from the configuration".into()));
            }
            p
        }
        None => dnnha::build(&cfg.arch, cfg.seed)?,
    };
    let mut adam = AdamState::new(&params.sizes(), cfg.learning_rate);
    let mut log = Vec::new();
    let mut step = 0;
    let updates = cfg.epochs * data.len().div_ceil(cfg.batch_size);
    let mut update = 0;
    for epoch in 1..=cfg.epochs {
        let order = epoch_order(data.len(), cfg.seed, epoch);
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Option<Vec<Array>> = None;
            for &i in batch {
                let (total, terms, grads) = pipe.step(&params, &data[i], &nh[i])?;
                if !total.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                    return Err(TrainError::NonFinite {
                        epoch,
                        item: i,
                        source_name: data[i].source.clone(),
                        breakdown: breakdown(&terms),
                    });
                }
                step += 1;
                let row = LogRow { epoch, step, item: i, source: data[i].source.clone(), total, terms };
                observer(&row);
                log.push(row);
                acc = Some(match acc {
                    None => grads,
                    Some(mut a) => {
                        for (x, g) in a.iter_mut().zip(&grads) {
                            for (p, q) in x.data_mut().iter_mut().zip(g.data()) {
                                *p += q;
                            }
                        }
                        a
                    }
                });
            }
            let mut grads = acc.expect("non-empty batch");
            if batch.len() > 1 {
                let s = 1.0 / batch.len() as f64;
                grads.iter_mut().for_each(|g| g.data_mut().iter_mut().for_each(|v| *v *= s));
            }
            adam.lr = cfg.lr_schedule.at(cfg.learning_rate, update, updates);
            adam.step(&mut params.values, &grads, &params.names)?;
            update += 1;
        }
    }
    let hash_after = periphery.parameter_hash();
    let metadata = serde_json::json!({
        "loss": pipe.loss.name,
        "hi_profile": pipe.hi.name,
        "nh_profile": pipe.nh.name,
        "periphery_hash": hash_before,
        "steps": step,
        "config": cfg,
    });
    Ok(TrainOutcome {
        checkpoint: Checkpoint { params, metadata },
        log,
        periphery_hash_before: hash_before,
        periphery_hash_after: hash_after,
    })
}

/// CSV with columns `epoch, step, item, source, total` and one per term.
pub fn write_log_csv<W: Write>(w: W, rows: &[LogRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let labels: Vec<String> = rows.first().map(|r| r.terms.iter().map(|t| t.label.clone()).collect()).unwrap_or_default();
    let mut header: Vec<String> = ["epoch", "step", "item", "source", "total"].iter().map(|s| s.to_string()).collect();
    header.extend(labels);
    out.write_record(&header).map_err(|e| TrainError::Io(e.into()))?;
    for r in rows {
        let mut rec = vec![r.epoch.to_string(), r.step.to_string(), r.item.to_string(), r.source.clone(), format!("{:e}", r.total)];
        rec.extend(r.terms.iter().map(|t| format!("{:e}", t.raw)));
        out.write_record(&rec).map_err(|e| TrainError::Io(e.into()))?;
    }
    out.flush()?;
    Ok(())
}
