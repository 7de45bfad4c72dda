//! Loss terms on neurograms and stimuli, and their weighted composition.
//!
//! Every term is a mean absolute error between a normal-hearing reference
//! and its hearing-impaired counterpart. Masks and per-CF weights restrict or
//! reweight the two time-domain terms only; the spectral terms always see the
//! whole response.

mod masks;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use masks::{
    moving_extrema, moving_rms, response_threshold, response_threshold_row, stimulus_threshold, ResponseThreshold,
    StimulusThreshold,
};

use crate::ad::{AdError, Array, ReduceKind, SpectrumMode, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum LossError {
    #[error("invalid loss specification: {0}")]
    Spec(String),
    #[error("unknown loss preset {0:?}")]
    UnknownPreset(String),
    #[error("inconsistent loss inputs: {0}")]
    Shape(String),
    #[error("cannot read loss specification {path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Ad(#[from] AdError),
}

pub type Result<T> = std::result::Result<T, LossError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    TimeChannels,
    TimePopulation,
    StftChannels,
    StftPopulation,
    StimulusHighFreq,
}

impl TermKind {
    pub fn is_stft(self) -> bool {
        matches!(self, Self::StftChannels | Self::StftPopulation)
    }

    pub fn is_time(self) -> bool {
        matches!(self, Self::TimeChannels | Self::TimePopulation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossTerm {
    pub kind: TermKind,
    #[serde(default)]
    pub squared: bool,
    #[serde(default)]
    pub complex_stft: bool,
    pub weight: f64,
}

impl LossTerm {
    pub fn new(kind: TermKind, squared: bool, weight: f64) -> Self {
        Self { kind, squared, complex_stft: false, weight }
    }

    /// Short column name: `r`, `rp`, `R`, `Rp`, `X`, with `2` for squared and
    /// `c` for complex spectra.
    pub fn label(&self) -> String {
        let base = match self.kind {
            TermKind::TimeChannels => "r",
            TermKind::TimePopulation => "rp",
            TermKind::StftChannels => "R",
            TermKind::StftPopulation => "Rp",
            TermKind::StimulusHighFreq => "X",
        };
        let suffix = if self.squared {
            "2"
        } else if self.complex_stft {
            "c"
        } else {
            ""
        };
        format!("{base}{suffix}")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(LossError::Spec(format!("term {} has weight {}", self.label(), self.weight)));
        }
        if self.complex_stft && !self.kind.is_stft() {
            return Err(LossError::Spec(format!("complex_stft set on non-spectral term {}", self.label())));
        }
        if self.complex_stft && self.squared {
            return Err(LossError::Spec(format!("term {}: squared and complex_stft are exclusive", self.label())));
        }
        if self.squared && self.kind == TermKind::StimulusHighFreq {
            return Err(LossError::Spec("the stimulus term has no squared form".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqEmphasis {
    pub max_attenuation: f64,
}

impl Default for FreqEmphasis {
    fn default() -> Self {
        Self { max_attenuation: 0.62 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modifiers {
    #[serde(default)]
    pub freq_emphasis: Option<FreqEmphasis>,
    #[serde(default)]
    pub response_threshold: Option<ResponseThreshold>,
    #[serde(default)]
    pub stimulus_threshold: Option<StimulusThreshold>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    pub window: usize,
    pub hop: usize,
}

impl Default for StftParams {
    fn default() -> Self {
        Self { window: 2048, hop: 1024 }
    }
}

fn default_cutoff() -> f64 {
    8000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    #[serde(default)]
    pub name: String,
    pub terms: Vec<LossTerm>,
    #[serde(default)]
    pub modifiers: Modifiers,
    #[serde(default)]
    pub stft: StftParams,
    #[serde(default = "default_cutoff")]
    pub cutoff_hz: f64,
}

const PRESETS: [&str; 8] = ["L_r", "L_rR", "L_rrp", "L_rrpRp", "L_r2", "L_r2R2", "L_r2rp2", "L_r2rp2Rp2"];

impl LossSpec {
    pub fn new(name: &str, terms: Vec<LossTerm>) -> Self {
        Self {
            name: name.to_string(),
            terms,
            modifiers: Modifiers::default(),
            stft: StftParams::default(),
            cutoff_hz: default_cutoff(),
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &PRESETS
    }

    /// A named composition, optionally followed by `+Tx` (stimulus
    /// threshold), `+Tr` (response threshold), `+FE` (frequency emphasis) or
    /// `+complex` (complex spectra on unsquared STFT terms).
    pub fn preset(name: &str) -> Result<Self> {
        use TermKind::*;
        let mut parts = name.split('+');
        let base = parts.next().unwrap_or_default();
        let t = LossTerm::new;
        let terms = match base {
            "L_r" => vec![t(TimeChannels, false, 1.0), t(StimulusHighFreq, false, 0.5)],
            "L_rR" => vec![t(TimeChannels, false, 1.0), t(StimulusHighFreq, false, 0.5), t(StftChannels, false, 0.1)],
            "L_rrp" => vec![t(TimeChannels, false, 1.0), t(StimulusHighFreq, false, 0.5), t(TimePopulation, false, 0.1)],
            "L_rrpRp" => vec![
                t(TimeChannels, false, 1.0),
                t(StimulusHighFreq, false, 0.5),
                t(TimePopulation, false, 0.1),
                t(StftPopulation, false, 0.02),
            ],
            "L_r2" => vec![t(TimeChannels, true, 1.0), t(StimulusHighFreq, false, 40.0)],
            "L_r2R2" => vec![t(TimeChannels, true, 1.0), t(StimulusHighFreq, false, 40.0), t(StftChannels, true, 0.0014)],
            "L_r2rp2" => vec![t(TimeChannels, true, 1.0), t(StimulusHighFreq, false, 40.0), t(TimePopulation, true, 0.08)],
            "L_r2rp2Rp2" => vec![
                t(TimeChannels, true, 1.0),
                t(StimulusHighFreq, false, 40.0),
                t(TimePopulation, true, 0.08),
                t(StftPopulation, true, 1e-5),
            ],
            _ => return Err(LossError::UnknownPreset(name.to_string())),
        };
        let mut spec = Self::new(name, terms);
        for opt in parts {
            match opt {
                "Tx" => spec.modifiers.stimulus_threshold = Some(StimulusThreshold::default()),
                "Tr" => spec.modifiers.response_threshold = Some(ResponseThreshold::default()),
                "FE" => spec.modifiers.freq_emphasis = Some(FreqEmphasis::default()),
                "complex" => {
                    for term in spec.terms.iter_mut().filter(|t| t.kind.is_stft() && !t.squared) {
                        term.complex_stft = true;
                    }
                }
                _ => return Err(LossError::UnknownPreset(name.to_string())),
            }
        }
        Ok(spec)
    }

    /// A preset name or the path of a JSON specification.
    pub fn load(name_or_path: &str) -> Result<Self> {
        match Self::preset(name_or_path) {
            Ok(s) => Ok(s),
            Err(LossError::UnknownPreset(_)) if Path::new(name_or_path).is_file() => {
                let io = |reason: String| LossError::Io { path: name_or_path.to_string(), reason };
                let text = std::fs::read_to_string(name_or_path).map_err(|e| io(e.to_string()))?;
                let spec: Self = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
                spec.validate()?;
                Ok(spec)
            }
            Err(e) => Err(e),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(LossError::Spec("no loss terms".into()));
        }
        for t in &self.terms {
            t.validate()?;
        }
        if self.stft.window == 0 || self.stft.hop == 0 {
            return Err(LossError::Spec("STFT window and hop must be positive".into()));
        }
        if !(self.cutoff_hz.is_finite() && self.cutoff_hz >= 0.0) {
            return Err(LossError::Spec(format!("cutoff {} Hz", self.cutoff_hz)));
        }
        if let Some(fe) = &self.modifiers.freq_emphasis {
            if !(0.0..1.0).contains(&fe.max_attenuation) {
                return Err(LossError::Spec(format!("max_attenuation {} outside [0, 1)", fe.max_attenuation)));
            }
        }
        if let Some(p) = &self.modifiers.response_threshold {
            p.validate()?;
        }
        if let Some(p) = &self.modifiers.stimulus_threshold {
            p.validate()?;
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(LossTerm::label).collect()
    }
}

/// Steepness of the emphasis sigmoid in units of the half log-CF span.
pub const EMPHASIS_SLOPE: f64 = 4.0;

/// Per-CF weights `1 − a·S(z)`, where `z` is log-CF mapped to `[−1, 1]`
/// about the geometric mean of the extreme CFs and `S` is a logistic of
/// slope [`EMPHASIS_SLOPE`] rescaled to run from 0 to 1. The lowest CF gets 1
/// and the highest `1 − a`.
pub fn freq_emphasis_weights(cf_hz: &[f64], max_attenuation: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&max_attenuation) {
        return Err(LossError::Spec(format!("max_attenuation {max_attenuation} outside [0, 1)")));
    }
    if cf_hz.iter().any(|&f| !(f > 0.0)) {
        return Err(LossError::Spec("CFs must be positive".into()));
    }
    let Some((lo, hi)) = cf_hz.iter().fold(None, |acc: Option<(f64, f64)>, &f| match acc {
        None => Some((f, f)),
        Some((a, b)) => Some((a.min(f), b.max(f))),
    }) else {
        return Ok(Vec::new());
    };
    if lo == hi {
        return Ok(vec![1.0; cf_hz.len()]);
    }
    let mid = 0.5 * (lo.ln() + hi.ln());
    let half = 0.5 * (hi.ln() - lo.ln());
    let sig = |z: f64| 1.0 / (1.0 + (-EMPHASIS_SLOPE * z).exp());
    let (s0, s1) = (sig(-1.0), sig(1.0));
    Ok(cf_hz
        .iter()
        .map(|f| {
            let z = (f.ln() - mid) / half;
            1.0 - max_attenuation * (sig(z) - s0) / (s1 - s0)
        })
        .collect())
}

fn check_pair(what: &str, a: &Var, b: &Var) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(LossError::Shape(format!("{what}: shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn mae_opt(tape: &Tape, a: &Var, b: &Var, mask: Option<&[bool]>) -> Result<Var> {
    Ok(match mask {
        Some(m) => tape.masked_mae(a, b, m)?,
        None => tape.mae(a, b)?,
    })
}

/// Channel-wise time-domain term. `cf_weights` scales each response row
/// before squaring; `mask` is row-major over `[C × L]` and the mean runs over
/// the retained samples only.
pub fn loss_r(tape: &Tape, r: &Var, r_hat: &Var, squared: bool, cf_weights: Option<&[f64]>, mask: Option<&[bool]>) -> Result<Var> {
    check_pair("loss_r", r, r_hat)?;
    let (mut a, mut b) = (r.clone(), r_hat.clone());
    if let Some(w) = cf_weights {
        a = tape.scale_rows(&a, w)?;
        b = tape.scale_rows(&b, w)?;
    }
    if squared {
        a = tape.square(&a);
        b = tape.square(&b);
    }
    mae_opt(tape, &a, &b, mask)
}

fn population(tape: &Tape, r: &Var) -> Result<Var> {
    if r.value().rank() < 2 {
        return Ok(r.clone());
    }
    Ok(tape.reduce(r, 0, ReduceKind::Sum)?)
}

/// Term on the CF-summed responses. `mask` runs over time.
pub fn loss_rp(tape: &Tape, r: &Var, r_hat: &Var, squared: bool, mask: Option<&[bool]>) -> Result<Var> {
    check_pair("loss_rp", r, r_hat)?;
    let (p, q) = (population(tape, r)?, population(tape, r_hat)?);
    loss_r(tape, &p, &q, squared, None, mask)
}

/// MAE between per-channel spectrograms: magnitudes, powers when `squared`,
/// or real and imaginary parts when `complex_out`.
pub fn loss_stft_channels(tape: &Tape, r: &Var, r_hat: &Var, squared: bool, complex_out: bool, stft: StftParams) -> Result<Var> {
    check_pair("loss_stft_channels", r, r_hat)?;
    let mode = SpectrumMode::from_flags(squared, complex_out)?;
    let a = tape.stft(r, stft.window, stft.hop, mode)?;
    let b = tape.stft(r_hat, stft.window, stft.hop, mode)?;
    Ok(tape.mae(&a, &b)?)
}

pub fn loss_stft_population(tape: &Tape, r: &Var, r_hat: &Var, squared: bool, complex_out: bool, stft: StftParams) -> Result<Var> {
    check_pair("loss_stft_population", r, r_hat)?;
    let (p, q) = (population(tape, r)?, population(tape, r_hat)?);
    loss_stft_channels(tape, &p, &q, squared, complex_out, stft)
}

/// MAE of one-sided FFT magnitudes over bins strictly above `cutoff_hz`.
/// Returns 0 when no bin qualifies.
pub fn loss_x_highfreq(tape: &Tape, x: &Var, x_hat: &Var, sample_rate_hz: f64, cutoff_hz: f64) -> Result<Var> {
    check_pair("loss_x_highfreq", x, x_hat)?;
    let n = x.len();
    let a = tape.fft_mag(x)?;
    let b = tape.fft_mag(x_hat)?;
    let mask: Vec<bool> = (0..a.len()).map(|k| k as f64 * sample_rate_hz / n as f64 > cutoff_hz).collect();
    Ok(tape.masked_mae(&a, &b, &mask)?)
}

/// Everything one loss evaluation needs. `x` and `x_hat` are the cropped
/// stimuli; `r` (reference) and `r_hat` are `[C × L]` neurograms on the same
/// time axis as the stimuli.
pub struct Bundle<'a> {
    pub x: &'a Var,
    pub x_hat: &'a Var,
    pub r: &'a Var,
    pub r_hat: &'a Var,
    pub cf_hz: &'a [f64],
    pub sample_rate_hz: f64,
}

impl Bundle<'_> {
    fn check(&self) -> Result<(usize, usize)> {
        check_pair("bundle stimuli", self.x, self.x_hat)?;
        check_pair("bundle neurograms", self.r, self.r_hat)?;
        if self.r.value().rank() != 2 {
            return Err(LossError::Shape(format!("neurogram must be [C × L], got {:?}", self.r.shape())));
        }
        let (c, l) = (self.r.shape()[0], self.r.shape()[1]);
        if self.x.value().rank() != 1 || self.x.len() != l {
            return Err(LossError::Shape(format!("stimulus {:?} does not match {l} response samples", self.x.shape())));
        }
        if self.cf_hz.len() != c {
            return Err(LossError::Shape(format!("{} CFs for {c} channels", self.cf_hz.len())));
        }
        Ok((c, l))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermValue {
    pub label: String,
    pub raw: f64,
    pub weighted: f64,
}

pub struct LossValue {
    pub total: Var,
    pub terms: Vec<TermValue>,
}

impl LossValue {
    pub fn value(&self) -> f64 {
        self.total.item()
    }
}

fn and_masks(a: Option<Vec<bool>>, b: Option<Vec<bool>>) -> Option<Vec<bool>> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.iter().zip(&b).map(|(x, y)| *x && *y).collect()),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Weighted sum of the spec's terms, with the per-term breakdown.
pub fn compose(tape: &Tape, spec: &LossSpec, b: &Bundle) -> Result<LossValue> {
    spec.validate()?;
    let (c, l) = b.check()?;
    let m = &spec.modifiers;
    let needs = |k: TermKind| spec.terms.iter().any(|t| t.kind == k);

    let tx = match &m.stimulus_threshold {
        Some(p) if spec.terms.iter().any(|t| t.kind.is_time()) => Some(stimulus_threshold(b.x.data(), p)?),
        _ => None,
    };
    let tr = m.response_threshold.as_ref();
    let channel_mask = if needs(TermKind::TimeChannels) {
        let r_mask = tr.map(|p| response_threshold(b.r.value(), p)).transpose()?;
        let x_mask = tx.as_ref().map(|t| (0..c).flat_map(|_| t.iter().copied()).collect());
        and_masks(r_mask, x_mask)
    } else {
        None
    };
    let pop_mask = if needs(TermKind::TimePopulation) {
        let rp = Array::vector(crate::periphery::population_sum(b.r.value()));
        let r_mask = tr.map(|p| response_threshold(&rp, p)).transpose()?;
        and_masks(r_mask, tx.clone())
    } else {
        None
    };
    debug_assert!(channel_mask.as_ref().map_or(true, |v| v.len() == c * l));
    let weights = m.freq_emphasis.as_ref().map(|fe| freq_emphasis_weights(b.cf_hz, fe.max_attenuation)).transpose()?;

    let mut total: Option<Var> = None;
    let mut terms = Vec::with_capacity(spec.terms.len());
    for t in &spec.terms {
        let raw = match t.kind {
            TermKind::TimeChannels => loss_r(tape, b.r, b.r_hat, t.squared, weights.as_deref(), channel_mask.as_deref())?,
            TermKind::TimePopulation => loss_rp(tape, b.r, b.r_hat, t.squared, pop_mask.as_deref())?,
            TermKind::StftChannels => loss_stft_channels(tape, b.r, b.r_hat, t.squared, t.complex_stft, spec.stft)?,
            TermKind::StftPopulation => loss_stft_population(tape, b.r, b.r_hat, t.squared, t.complex_stft, spec.stft)?,
            TermKind::StimulusHighFreq => loss_x_highfreq(tape, b.x, b.x_hat, b.sample_rate_hz, spec.cutoff_hz)?,
        };
        let weighted = tape.scale(&raw, t.weight);
        terms.push(TermValue { label: t.label(), raw: raw.item(), weighted: weighted.item() });
        total = Some(match total {
            None => weighted,
            Some(acc) => tape.add(&acc, &weighted)?,
        });
    }
    Ok(LossValue { total: total.expect("validated non-empty"), terms })
}
