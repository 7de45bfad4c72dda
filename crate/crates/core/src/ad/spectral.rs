//! Differentiable short-time and whole-signal Fourier magnitudes.
//!
//! Frames are taken without centre padding: a signal of `T` samples yields
//! `1 + (T − N) / hop` frames. The Hann window is periodic,
//! `w[n] = 0.5 − 0.5·cos(2πn/N)`, and each frame keeps the one-sided bins
//! `0..=N/2`. The gradient of a magnitude is defined as 0 at zero-magnitude
//! bins.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::tape::{Tape, Var};
use super::{AdError, Array};

/// What each STFT bin is mapped to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumMode {
    Magnitude,
    /// Squared magnitude (power spectrogram).
    Power,
    /// Real parts followed by imaginary parts, `2·(N/2+1)` values per frame.
    Complex,
}

impl SpectrumMode {
    pub fn from_flags(squared: bool, complex_out: bool) -> Result<Self, AdError> {
        match (squared, complex_out) {
            (false, false) => Ok(Self::Magnitude),
            (true, false) => Ok(Self::Power),
            (false, true) => Ok(Self::Complex),
            (true, true) => Err(AdError::Invalid("squared and complex spectra are mutually exclusive".into())),
        }
    }

    fn width(self, bins: usize) -> usize {
        match self {
            Self::Complex => 2 * bins,
            _ => bins,
        }
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

pub fn frame_count(t: usize, window: usize, hop: usize) -> usize {
    if t < window {
        0
    } else {
        1 + (t - window) / hop
    }
}

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plan(n: usize) -> Plan {
    let mut planner = FftPlanner::new();
    Plan { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
}

/// Maps the one-sided spectrum of a frame to output values.
fn map_bins(spec: &[Complex64], mode: SpectrumMode, out: &mut Vec<f64>) {
    match mode {
        SpectrumMode::Magnitude => out.extend(spec.iter().map(|c| c.norm())),
        SpectrumMode::Power => out.extend(spec.iter().map(|c| c.norm_sqr())),
        SpectrumMode::Complex => {
            out.extend(spec.iter().map(|c| c.re));
            out.extend(spec.iter().map(|c| c.im));
        }
    }
}

/// Gradient w.r.t. the (windowed) frame samples, given the output-value
/// gradient `g` of one frame and that frame's spectrum.
fn frame_grad(spec: &[Complex64], g: &[f64], mode: SpectrumMode, plan: &Plan, n: usize) -> Vec<f64> {
    let bins = spec.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (k, c) in spec.iter().enumerate() {
        buf[k] = match mode {
            SpectrumMode::Magnitude => {
                let m = c.norm();
                if m > 0.0 {
                    c * (g[k] / m)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            SpectrumMode::Power => c * (2.0 * g[k]),
            SpectrumMode::Complex => Complex64::new(g[k], g[bins + k]),
        };
    }
    // d/dx_n = Re Σ_k G_k e^{+2πikn/N}: an unnormalised inverse transform.
    plan.inverse.process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Spectra of every frame of every row.
fn analyse(rows: &[&[f64]], window: &[f64], hop: usize, plan: &Plan) -> Vec<Vec<Complex64>> {
    let n = window.len();
    let bins = n / 2 + 1;
    let mut specs = Vec::new();
    for row in rows {
        let frames = frame_count(row.len(), n, hop);
        for f in 0..frames {
            let seg = &row[f * hop..f * hop + n];
            let mut buf: Vec<Complex64> = seg.iter().zip(window).map(|(x, w)| Complex64::new(x * w, 0.0)).collect();
            plan.forward.process(&mut buf);
            buf.truncate(bins);
            specs.push(buf);
        }
    }
    specs
}

impl Tape {
    /// Hann-windowed short-time Fourier transform of a signal `[T]`
    /// (output `[frames × width]`) or of each row of `[C × T]` (output
    /// `[C × frames × width]`).
    pub fn stft(&self, signal: &Var, window_len: usize, hop: usize, mode: SpectrumMode) -> Result<Var, AdError> {
        let (rows, t) = signal.value().rows_cols();
        if window_len == 0 || hop == 0 {
            return Err(AdError::Invalid("stft: window and hop must be positive".into()));
        }
        if t < window_len {
            return Err(AdError::TooShort { needed: window_len, got: t });
        }
        let window = hann(window_len);
        let frames = frame_count(t, window_len, hop);
        let bins = window_len / 2 + 1;
        let width = mode.width(bins);
        let plan = plan(window_len);
        let row_refs: Vec<&[f64]> = (0..rows).map(|r| signal.value().row(r)).collect();
        let specs = analyse(&row_refs, &window, hop, &plan);
        let mut out = Vec::with_capacity(specs.len() * width);
        for s in &specs {
            map_bins(s, mode, &mut out);
        }
        let shape = if signal.value().rank() <= 1 { vec![frames, width] } else { vec![rows, frames, width] };
        let value = Array::new(shape, out)?;
        Ok(self.record(&[signal], value, move |g| {
            let mut gx = vec![0.0; rows * t];
            for r in 0..rows {
                for f in 0..frames {
                    let idx = r * frames + f;
                    let gf = &g[idx * width..(idx + 1) * width];
                    let d = frame_grad(&specs[idx], gf, mode, &plan, window_len);
                    let dst = &mut gx[r * t + f * hop..r * t + f * hop + window_len];
                    for ((a, v), w) in dst.iter_mut().zip(&d).zip(&window) {
                        *a += v * w;
                    }
                }
            }
            vec![Some(gx)]
        }))
    }

    /// `|STFT|` with optional squaring, or the complex parts when
    /// `complex_out` is set.
    pub fn stft_mag(&self, signal: &Var, window_len: usize, hop: usize, squared: bool, complex_out: bool) -> Result<Var, AdError> {
        self.stft(signal, window_len, hop, SpectrumMode::from_flags(squared, complex_out)?)
    }

    /// One-sided magnitude spectrum `|FFT(x)|`, `T/2 + 1` bins, of an
    /// even-length 1-D signal. Bin `k` sits at `k·fs/T` Hz.
    pub fn fft_mag(&self, signal: &Var) -> Result<Var, AdError> {
        let t = signal.len();
        if t == 0 || t % 2 != 0 {
            return Err(AdError::Invalid(format!("fft_mag: length {t} must be even and non-zero")));
        }
        let window = vec![1.0; t];
        let plan = plan(t);
        let specs = analyse(&[signal.data()], &window, t, &plan);
        let mut out = Vec::with_capacity(t / 2 + 1);
        map_bins(&specs[0], SpectrumMode::Magnitude, &mut out);
        let value = Array::vector(out);
        Ok(self.record(&[signal], value, move |g| {
            vec![Some(frame_grad(&specs[0], g, SpectrumMode::Magnitude, &plan, t))]
        }))
    }
}
