//! Envelope-following response from a population response.
//!
//! Two same-frequency-inhibition-excitation stages model the brainstem (CN)
//! and midbrain (IC). Each stage is `max(0, A·(α_e ∗ x) − S·A·(α_i ∗ x)(t − D))`
//! with unit-area alpha kernels `α(t) = t/τ²·e^(−t/τ)`. The EFR waveform is
//! the sum of the population response and both stage outputs.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ad::{hann, Biquad};
use crate::audio;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfieStage {
    pub tau_exc_s: f64,
    pub tau_inh_s: f64,
    pub delay_s: f64,
    pub inhibition: f64,
    pub gain: f64,
}

pub const CN_STAGE: SfieStage = SfieStage { tau_exc_s: 0.5e-3, tau_inh_s: 2e-3, delay_s: 1e-3, inhibition: 0.6, gain: 1.5 };
pub const IC_STAGE: SfieStage = SfieStage { tau_exc_s: 1e-3, tau_inh_s: 2e-3, delay_s: 2e-3, inhibition: 0.9, gain: 1.0 };

/// Maps spectral amplitude of the EFR waveform (spikes/s) to nominal nV.
/// Fixed so the normal-hearing response to the default SAM tone on the
/// default 21 channels lands near the conventional reference.
pub const NV_PER_UNIT: f64 = 3.4845e-4;

fn alpha(x: &[f64], tau: f64, fs: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    let s = Biquad::leaky_integrator(tau, fs);
    s.apply(&mut y);
    s.apply(&mut y);
    y
}

impl SfieStage {
    pub fn apply(&self, x: &[f64], fs: f64) -> Vec<f64> {
        let e = alpha(x, self.tau_exc_s, fs);
        let i = alpha(x, self.tau_inh_s, fs);
        let d = (self.delay_s * fs).round() as usize;
        (0..x.len())
            .map(|n| {
                let inh = if n >= d { i[n - d] } else { 0.0 };
                (self.gain * (e[n] - self.inhibition * inh)).max(0.0)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EfrParams {
    pub modulation_hz: f64,
    pub harmonics: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub search_bins: usize,
    pub nv_per_unit: f64,
}

impl Default for EfrParams {
    fn default() -> Self {
        Self { modulation_hz: 120.0, harmonics: 4, start_s: 0.05, end_s: 0.4, search_bins: 2, nv_per_unit: NV_PER_UNIT }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfrResult {
    /// One-sided amplitude spectrum of the windowed EFR in nV.
    pub spectrum: Vec<f64>,
    pub bin_hz: f64,
    /// Peak magnitudes at `f_m, 2·f_m, …` in nV.
    pub peaks: Vec<f64>,
    pub efr_sum: f64,
}

/// EFR waveform: population response plus both brainstem stages.
pub fn efr_waveform(r_p: &[f64], fs: f64) -> Vec<f64> {
    let cn = CN_STAGE.apply(r_p, fs);
    let ic = IC_STAGE.apply(&cn, fs);
    r_p.iter().zip(&cn).zip(&ic).map(|((a, b), c)| a + b + c).collect()
}

/// EFR spectrum and summed harmonic peaks. Time zero of `r_p` is stimulus
/// onset.
pub fn efr(r_p: &[f64], fs: f64, p: &EfrParams) -> Result<EfrResult, EvalError> {
    let start = (p.start_s * fs).round() as usize;
    let end = ((p.end_s * fs).round() as usize).min(r_p.len());
    if end <= start + 2 {
        return Err(EvalError::Input(format!("EFR window {start}..{end} is empty for {} samples", r_p.len())));
    }
    let wave = efr_waveform(r_p, fs);
    let seg = &wave[start..end];
    let n = seg.len();
    let mean = seg.iter().sum::<f64>() / n as f64;
    let w = hann(n);
    let wsum: f64 = w.iter().sum();
    let frame: Vec<f64> = seg.iter().zip(&w).map(|(v, w)| (v - mean) * w).collect();
    let spectrum: Vec<f64> = super::amplitude_spectrum(&frame).iter().map(|a| a * 2.0 / wsum * p.nv_per_unit).collect();
    let bin_hz = fs / n as f64;
    let mut peaks = Vec::with_capacity(p.harmonics);
    for h in 1..=p.harmonics {
        let k = (h as f64 * p.modulation_hz / bin_hz).round() as usize;
        if k + p.search_bins >= spectrum.len() || k < p.search_bins {
            return Err(EvalError::Input(format!("harmonic {h} of {} Hz lies outside the spectrum", p.modulation_hz)));
        }
        let m = spectrum[k - p.search_bins..=k + p.search_bins].iter().cloned().fold(0.0, f64::max);
        peaks.push(m);
    }
    let efr_sum = peaks.iter().sum();
    Ok(EfrResult { spectrum, bin_hz, peaks, efr_sum })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamStimulus {
    pub duration_s: f64,
    pub carrier_hz: f64,
    pub modulation_hz: f64,
    pub depth: f64,
    pub ramp_s: f64,
    pub level_db: f64,
}

impl Default for SamStimulus {
    fn default() -> Self {
        Self { duration_s: 0.4, carrier_hz: 4000.0, modulation_hz: 120.0, depth: 1.0, ramp_s: 0.005, level_db: 70.0 }
    }
}

/// `(1 + m·sin(2π f_m t))·sin(2π f_c t)`, Hann-ramped on and off, then
/// calibrated to the level.
pub fn sam_tone(spec: &SamStimulus, fs: f64) -> Result<Vec<f64>, EvalError> {
    if !(spec.duration_s > 0.0 && (0.0..=1.0).contains(&spec.depth) && spec.ramp_s >= 0.0) {
        return Err(EvalError::Input(format!("invalid SAM stimulus {spec:?}")));
    }
    let x = sam_unramped(spec, fs);
    let n = x.len();
    let ramp = ((spec.ramp_s * fs).round() as usize).min(n / 2);
    let ramped: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let k = i.min(n - 1 - i);
            if k >= ramp {
                *v
            } else {
                v * (0.5 - 0.5 * (std::f64::consts::PI * k as f64 / ramp as f64).cos())
            }
        })
        .collect();
    Ok(audio::calibrate(&ramped, spec.level_db)?)
}

pub fn sam_unramped(spec: &SamStimulus, fs: f64) -> Vec<f64> {
    let n = (spec.duration_s * fs).round() as usize;
    let tau = 2.0 * std::f64::consts::PI;
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            (1.0 + spec.depth * (tau * spec.modulation_hz * t).sin()) * (tau * spec.carrier_hz * t).sin()
        })
        .collect()
}
