//! WAV I/O, resampling, level calibration and SNR mixing.
//!
//! Pressures are in pascals; levels are dB SPL re 20 µPa over the RMS of the
//! whole slice.

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("{path}: {reason}")]
    Wav { path: String, reason: String },
    #[error("{0}")]
    Signal(String),
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// Reference pressure for dB SPL.
pub const P_REF: f64 = 2e-5;

pub fn spl_to_rms(level_db: f64) -> f64 {
    P_REF * 10f64.powf(level_db / 20.0)
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn level_db(x: &[f64]) -> f64 {
    20.0 * (rms(x) / P_REF).log10()
}

/// Scales `x` so its RMS equals `spl_to_rms(level_db)`.
pub fn calibrate(x: &[f64], level_db: f64) -> Result<Vec<f64>> {
    let r = rms(x);
    if !(r.is_finite() && r > 0.0) {
        return Err(AudioError::Signal("cannot calibrate a silent or non-finite signal".into()));
    }
    let g = spl_to_rms(level_db) / r;
    Ok(x.iter().map(|v| v * g).collect())
}

/// Adds `noise[..speech.len()]` scaled so the speech-to-noise power ratio is
/// `snr_db`. An infinite SNR returns the speech unchanged.
pub fn mix_at_snr(speech: &[f64], noise: &[f64], snr_db: f64) -> Result<Vec<f64>> {
    if snr_db == f64::INFINITY {
        return Ok(speech.to_vec());
    }
    if !snr_db.is_finite() {
        return Err(AudioError::Signal(format!("SNR {snr_db} dB")));
    }
    if noise.len() < speech.len() {
        return Err(AudioError::Signal(format!("{} noise samples for {} speech samples", noise.len(), speech.len())));
    }
    let noise = &noise[..speech.len()];
    let (rs, rn) = (rms(speech), rms(noise));
    if rs == 0.0 || rn == 0.0 {
        return Err(AudioError::Signal("zero-energy speech or noise".into()));
    }
    let g = rs / rn * 10f64.powf(-snr_db / 20.0);
    Ok(speech.iter().zip(noise).map(|(s, n)| s + g * n).collect())
}

/// Mono WAV as floats in `[-1, 1]` and its sample rate. Accepts integer PCM
/// of 8 to 32 bits and 32-bit float.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let err = |reason: String| AudioError::Wav { path: path.display().to_string(), reason };
    let mut reader = hound::WavReader::open(path).map_err(|e| err(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(err(format!("{} channels, expected mono", spec.channels)));
    }
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => {
            reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>().map_err(|e| err(e.to_string()))?
        }
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(i32::from(spec.bits_per_sample) - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(e.to_string()))?
        }
    };
    if samples.is_empty() {
        return Err(err("no samples".into()));
    }
    Ok((samples, spec.sample_rate))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Writes mono samples; PCM16 values are clamped to full scale.
pub fn write_wav(path: &Path, x: &[f64], sample_rate: u32, format: WavFormat) -> Result<()> {
    let err = |reason: String| AudioError::Wav { path: path.display().to_string(), reason };
    let spec = match format {
        WavFormat::Pcm16 => hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int },
        WavFormat::Float32 => hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 32, sample_format: hound::SampleFormat::Float },
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| err(e.to_string()))?;
    for &v in x {
        let r = match format {
            WavFormat::Pcm16 => w.write_sample((v.clamp(-1.0, 1.0) * 32767.0).round() as i16),
            WavFormat::Float32 => w.write_sample(v as f32),
        };
        r.map_err(|e| err(e.to_string()))?;
    }
    w.finalize().map_err(|e| err(e.to_string()))
}

/// Windowed-sinc sample-rate converter.
///
/// Output sample `m` sits at input time `t = m·from/to` and is
/// `Σ x[n]·h(t − n)` with `h(u) = 2f·sinc(2f·u)·kaiser(u / W)`, where
/// `f = rolloff·min(from, to)/2 / from` cycles per input sample and the kernel
/// spans `W = zeros / (2f)` input samples on each side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resampler {
    pub zeros: usize,
    pub rolloff: f64,
    pub beta: f64,
}

impl Default for Resampler {
    fn default() -> Self {
        Self { zeros: 32, rolloff: 0.95, beta: 8.6 }
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

impl Resampler {
    /// `round(len·to/from)` output samples.
    pub fn output_len(len: usize, from: u32, to: u32) -> usize {
        ((len as u128 * to as u128 + from as u128 / 2) / from as u128) as usize
    }

    pub fn apply(&self, x: &[f64], from: u32, to: u32) -> Result<Vec<f64>> {
        if from == 0 || to == 0 {
            return Err(AudioError::Signal("zero sample rate".into()));
        }
        if from == to {
            return Ok(x.to_vec());
        }
        let f = self.rolloff * 0.5 * from.min(to) as f64 / from as f64;
        let half = self.zeros as f64 / (2.0 * f);
        let i0b = bessel_i0(self.beta);
        let n_out = Self::output_len(x.len(), from, to);
        let mut out = Vec::with_capacity(n_out);
        for m in 0..n_out {
            let t = (m as u128 * from as u128) as f64 / to as f64;
            let lo = (t - half).ceil().max(0.0) as usize;
            let hi = ((t + half).floor() as usize).min(x.len().saturating_sub(1));
            let mut acc = 0.0;
            for (n, v) in x.iter().enumerate().take(hi + 1).skip(lo) {
                let u = t - n as f64;
                let r = u / half;
                let w = bessel_i0(self.beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
                let a = 2.0 * std::f64::consts::PI * f * u;
                let s = if a == 0.0 { 1.0 } else { a.sin() / a };
                acc += v * 2.0 * f * s * w;
            }
            out.push(acc);
        }
        Ok(out)
    }
}

pub fn resample(x: &[f64], from: u32, to: u32) -> Result<Vec<f64>> {
    Resampler::default().apply(x, from, to)
}
