//! Evaluation: population-response NRMSE over levels and noise conditions,
//! and EFR magnitudes from SAM tones.

mod efr;
mod ssn;

use std::io::Write;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use efr::{efr, efr_waveform, sam_tone, sam_unramped, EfrParams, EfrResult, SamStimulus, SfieStage, CN_STAGE, IC_STAGE, NV_PER_UNIT};
pub use ssn::{ssn_from_corpus, SsnGenerator, SSN_SEGMENT};

use crate::audio::{self, AudioError};
use crate::dnnha::{self, DnnError, ModelParams};
use crate::periphery::{strided_subset, HearingProfile, Periphery, PeripheryError};
use crate::trainer::{pad_context, Sentence, MODEL_RATE};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid evaluation input: {0}")]
    Input(String),
    #[error("NH population response has no positive maximum")]
    ZeroReference,
    #[error(transparent)]
    Periphery(#[from] PeripheryError),
    #[error(transparent)]
    Dnn(#[from] DnnError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// RMSE between two population responses over the NH maximum, as a fraction.
pub fn nrmse(r_nh: &[f64], r_hi: &[f64]) -> Result<f64> {
    if r_nh.len() != r_hi.len() || r_nh.is_empty() {
        return Err(EvalError::Input(format!("population responses of {} and {} samples", r_nh.len(), r_hi.len())));
    }
    let max = r_nh.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(EvalError::ZeroReference);
    }
    let mse = r_nh.iter().zip(r_hi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r_nh.len() as f64;
    Ok(mse.sqrt() / max)
}

/// `|DFT|` over bins `0..=N/2`.
pub(crate) fn amplitude_spectrum(x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(x.len()).process(&mut buf);
    buf[..x.len() / 2 + 1].iter().map(|c| c.norm()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub levels_db: Vec<f64>,
    pub snrs_db: Vec<f64>,
    pub snr_level_db: f64,
    pub cf_subset: Vec<usize>,
    pub seed: u64,
    pub sam: Option<SamStimulus>,
    pub efr: EfrParams,
    pub window: usize,
    pub context_left: usize,
    pub context_right: usize,
    pub total_len: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            levels_db: vec![30.0, 40.0, 50.0, 60.0, 70.0],
            snrs_db: Vec::new(),
            snr_level_db: 70.0,
            cf_subset: strided_subset(201, 10),
            seed: 0,
            sam: Some(SamStimulus::default()),
            efr: EfrParams::default(),
            window: 2048,
            context_left: 7936,
            context_right: 256,
            total_len: 81_920,
        }
    }
}

impl EvalConfig {
    /// Matches the desk-scale training lengths.
    pub fn desk() -> Self {
        Self { total_len: 7936 + 32_768 + 256, ..Self::default() }
    }

    pub fn body_len(&self) -> usize {
        self.total_len.saturating_sub(self.context_left + self.context_right)
    }
}

/// Runs a model on the body of a padded signal and puts the context back.
pub fn apply_model(model: &ModelParams, padded: &[f64], context_left: usize, body_len: usize, window: usize) -> Result<Vec<f64>> {
    let body = &padded[context_left..context_left + body_len];
    let y = dnnha::process(model, body, window)?;
    let mut out = padded.to_vec();
    out[context_left..context_left + body_len].copy_from_slice(&y);
    Ok(out)
}

/// The frozen parts of an evaluation.
pub struct Evaluator<'a> {
    pub periphery: &'a Periphery,
    pub nh: HearingProfile,
    pub hi: HearingProfile,
    pub model: Option<&'a ModelParams>,
    pub config: EvalConfig,
}

impl Evaluator<'_> {
    fn population(&self, x: &[f64], profile: &HearingProfile) -> Result<Vec<f64>> {
        Ok(self.periphery.simulate(x, profile, &self.config.cf_subset)?.population())
    }

    fn pad(&self, sentence: &[f64]) -> Result<Vec<f64>> {
        let c = &self.config;
        pad_context(sentence, c.context_left, c.context_right, c.total_len).map_err(|e| EvalError::Input(e.to_string()))
    }

    fn processed(&self, padded: &[f64]) -> Result<Option<Vec<f64>>> {
        let c = &self.config;
        self.model.map(|m| apply_model(m, padded, c.context_left, c.body_len(), c.window)).transpose()
    }

    /// NRMSE of HI(unprocessed) and, with a model, HI(processed) against
    /// NH(unprocessed), for one padded input.
    pub fn nrmse_pair(&self, padded: &[f64]) -> Result<(f64, Option<f64>)> {
        let r_nh = self.population(padded, &self.nh)?;
        let un = nrmse(&r_nh, &self.population(padded, &self.hi)?)?;
        let pr = match self.processed(padded)? {
            Some(y) => Some(nrmse(&r_nh, &self.population(&y, &self.hi)?)?),
            None => None,
        };
        Ok((un, pr))
    }

    /// EFR sums of NH, HI and processed HI for a SAM tone.
    pub fn efr_summary(&self, sam: &SamStimulus) -> Result<EfrSummary> {
        let fs = self.periphery.sample_rate();
        let x = sam_tone(sam, fs)?;
        let c = &self.config;
        let mut unit = self.periphery.config().block;
        if let Some(m) = self.model {
            let g = m.spec.granularity();
            unit = unit / gcd(unit, g) * g;
        }
        let body = x.len().div_ceil(unit) * unit;
        let padded = pad_context(&x, c.context_left, c.context_right, c.context_left + body + c.context_right)
            .map_err(|e| EvalError::Input(e.to_string()))?;
        let params = EfrParams { modulation_hz: sam.modulation_hz, ..c.efr.clone() };
        let run = |y: &[f64], p: &HearingProfile| -> Result<f64> { Ok(efr(&self.population(y, p)?, fs, &params)?.efr_sum) };
        let nh = run(&padded, &self.nh)?;
        let hi_unprocessed = run(&padded, &self.hi)?;
        let hi_processed = match self.model {
            Some(m) => Some(run(&apply_model(m, &padded, c.context_left, body, c.window)?, &self.hi)?),
            None => None,
        };
        Ok(EfrSummary { nh, hi_unprocessed, hi_processed })
    }
}

/// Mean NRMSE per level, processed when a model is given.
pub fn level_sweep(ev: &Evaluator, sentences: &[Vec<f64>], levels: &[f64]) -> Result<Vec<(f64, f64)>> {
    if sentences.is_empty() {
        return Err(EvalError::Input("no sentences".into()));
    }
    levels
        .iter()
        .map(|&level| {
            let vals = sentences
                .par_iter()
                .map(|s| {
                    let (u, p) = ev.nrmse_pair(&ev.pad(&audio::calibrate(s, level)?)?)?;
                    Ok(p.unwrap_or(u))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((level, vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub sentence: String,
    pub level_db: f64,
    pub snr_db: Option<f64>,
    pub nrmse_unprocessed_pct: f64,
    pub nrmse_processed_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalAggregate {
    pub level_db: f64,
    pub snr_db: Option<f64>,
    pub sentences: usize,
    pub nrmse_unprocessed_pct: f64,
    pub nrmse_processed_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfrSummary {
    pub nh: f64,
    pub hi_unprocessed: f64,
    pub hi_processed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hi_profile: String,
    pub nh_profile: String,
    pub model: Option<String>,
    pub config: EvalConfig,
    pub rows: Vec<EvalRow>,
    pub aggregates: Vec<EvalAggregate>,
    pub efr: Option<EfrSummary>,
    /// Sentences that could not be evaluated, with the reason.
    pub failures: Vec<String>,
}

impl EvalReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn aggregate(&self, level_db: f64, snr_db: Option<f64>) -> Option<&EvalAggregate> {
        self.aggregates.iter().find(|a| a.level_db == level_db && a.snr_db == snr_db)
    }

    /// Mean over every quiet row.
    pub fn quiet_mean(&self, processed: bool) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.snr_db.is_none())
            .filter_map(|r| if processed { r.nrmse_processed_pct } else { Some(r.nrmse_unprocessed_pct) })
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| EvalError::Io(e.into()))
    }

    /// One row per sentence and condition.
    pub fn write_rows_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sentence", "level_db", "snr_db", "nrmse_unprocessed_pct", "nrmse_processed_pct"]).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.sentence.clone(),
                r.level_db.to_string(),
                opt(r.snr_db),
                r.nrmse_unprocessed_pct.to_string(),
                opt(r.nrmse_processed_pct),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Quiet NRMSE against level, one row per level.
    pub fn write_level_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["level_db", "nrmse_unprocessed_pct", "nrmse_processed_pct"]).map_err(csv_err)?;
        for a in self.aggregates.iter().filter(|a| a.snr_db.is_none()) {
            out.write_record([a.level_db.to_string(), a.nrmse_unprocessed_pct.to_string(), opt(a.nrmse_processed_pct)]).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_efr_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["condition", "efr_sum_nv"]).map_err(csv_err)?;
        if let Some(e) = &self.efr {
            out.write_record(["nh".to_string(), e.nh.to_string()]).map_err(csv_err)?;
            out.write_record(["hi_unprocessed".to_string(), e.hi_unprocessed.to_string()]).map_err(csv_err)?;
            if let Some(p) = e.hi_processed {
                out.write_record(["hi_processed".to_string(), p.to_string()]).map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> EvalError {
    EvalError::Io(e.into())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Quiet level sweep, NRMSE in speech-shaped noise at each SNR, and EFR
/// sums. Sentences run in parallel; rows keep sentence order.
pub fn evaluate(ev: &Evaluator, sentences: &[Sentence], model_label: Option<String>) -> Result<EvalReport> {
    if sentences.is_empty() {
        return Err(EvalError::Input("no sentences".into()));
    }
    let c = &ev.config;
    let resampled: Vec<Vec<f64>> =
        sentences.par_iter().map(|s| audio::resample(&s.samples, s.sample_rate, MODEL_RATE)).collect::<std::result::Result<_, _>>()?;
    let ssn = if c.snrs_db.is_empty() {
        None
    } else {
        let refs: Vec<&[f64]> = resampled.iter().map(Vec::as_slice).collect();
        Some(ssn_from_corpus(&refs, MODEL_RATE as f64)?)
    };

    let per_sentence: Vec<std::result::Result<Vec<EvalRow>, String>> = resampled
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let name = &sentences[i].name;
            let run = || -> Result<Vec<EvalRow>> {
                let mut rows = Vec::new();
                for &level in &c.levels_db {
                    let (u, p) = ev.nrmse_pair(&ev.pad(&audio::calibrate(s, level)?)?)?;
                    rows.push(row(name, level, None, u, p));
                }
                if let Some(gen) = &ssn {
                    let speech = audio::calibrate(s, c.snr_level_db)?;
                    let noise = gen.generate(speech.len(), c.seed.wrapping_add(i as u64));
                    for &snr in &c.snrs_db {
                        let mixed = audio::mix_at_snr(&speech, &noise, snr)?;
                        let (u, p) = ev.nrmse_pair(&ev.pad(&mixed)?)?;
                        rows.push(row(name, c.snr_level_db, Some(snr), u, p));
                    }
                }
                Ok(rows)
            };
            run().map_err(|e| format!("{name}: {e}"))
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in per_sentence {
        match r {
            Ok(v) => rows.extend(v),
            Err(e) => failures.push(e),
        }
    }
    let mut conditions: Vec<(f64, Option<f64>)> = c.levels_db.iter().map(|&l| (l, None)).collect();
    conditions.extend(c.snrs_db.iter().map(|&s| (c.snr_level_db, Some(s))));
    let aggregates = conditions
        .into_iter()
        .filter_map(|(level, snr)| {
            let sel: Vec<&EvalRow> = rows.iter().filter(|r| r.level_db == level && r.snr_db == snr).collect();
            if sel.is_empty() {
                return None;
            }
            let processed = sel.iter().all(|r| r.nrmse_processed_pct.is_some());
            Some(EvalAggregate {
                level_db: level,
                snr_db: snr,
                sentences: sel.len(),
                nrmse_unprocessed_pct: mean(sel.iter().map(|r| r.nrmse_unprocessed_pct)),
                nrmse_processed_pct: processed.then(|| mean(sel.iter().filter_map(|r| r.nrmse_processed_pct))),
            })
        })
        .collect();
    let efr = c.sam.as_ref().map(|s| ev.efr_summary(s)).transpose()?;
    Ok(EvalReport {
        hi_profile: ev.hi.name.clone(),
        nh_profile: ev.nh.name.clone(),
        model: model_label,
        config: c.clone(),
        rows,
        aggregates,
        efr,
        failures,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn row(name: &str, level: f64, snr: Option<f64>, u: f64, p: Option<f64>) -> EvalRow {
    EvalRow {
        sentence: name.to_string(),
        level_db: level,
        snr_db: snr,
        nrmse_unprocessed_pct: 100.0 * u,
        nrmse_processed_pct: p.map(|v| 100.0 * v),
    }
}
