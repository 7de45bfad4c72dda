//! Speech-shaped noise: random-phase noise with a corpus's long-term
//! spectrum.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::EvalError;
use crate::ad::hann;

/// Welch segment length of the long-term average spectrum.
pub const SSN_SEGMENT: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub struct SsnGenerator {
    /// Average power per bin, `SSN_SEGMENT/2 + 1` bins.
    pub psd: Vec<f64>,
    pub sample_rate: f64,
}

/// Averages Hann-windowed periodograms with 50% overlap over every
/// sentence. Sentences shorter than one segment contribute one zero-padded
/// segment.
pub fn ssn_from_corpus(sentences: &[&[f64]], sample_rate: f64) -> Result<SsnGenerator, EvalError> {
    if sentences.is_empty() {
        return Err(EvalError::Input("speech-shaped noise needs at least one sentence".into()));
    }
    let n = SSN_SEGMENT;
    let w = hann(n);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut psd = vec![0.0; n / 2 + 1];
    let mut count = 0usize;
    for s in sentences {
        let mut segs = Vec::new();
        if s.len() < n {
            let mut v = s.to_vec();
            v.resize(n, 0.0);
            segs.push(v);
        } else {
            let mut start = 0;
            while start + n <= s.len() {
                segs.push(s[start..start + n].to_vec());
                start += n / 2;
            }
        }
        for seg in segs {
            let mut buf: Vec<Complex<f64>> = seg.iter().zip(&w).map(|(x, w)| Complex::new(x * w, 0.0)).collect();
            fft.process(&mut buf);
            for (p, b) in psd.iter_mut().zip(&buf) {
                *p += b.norm_sqr();
            }
            count += 1;
        }
    }
    psd.iter_mut().for_each(|p| *p /= count as f64);
    if psd.iter().all(|p| *p == 0.0) {
        return Err(EvalError::Input("corpus has no energy".into()));
    }
    Ok(SsnGenerator { psd, sample_rate })
}

impl SsnGenerator {
    /// Power at `f` Hz, linearly interpolated between Welch bins.
    pub fn power_at(&self, f: f64) -> f64 {
        let pos = f / self.sample_rate * SSN_SEGMENT as f64;
        let k = pos.floor() as usize;
        if k + 1 >= self.psd.len() {
            return *self.psd.last().expect("non-empty");
        }
        let t = pos - k as f64;
        self.psd[k] * (1.0 - t) + self.psd[k + 1] * t
    }

    /// `len` samples whose periodogram follows the average spectrum exactly,
    /// with seeded uniform phases.
    pub fn generate(&self, len: usize, seed: u64) -> Vec<f64> {
        if len == 0 {
            return Vec::new();
        }
        let m = len + len % 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = vec![Complex::new(0.0, 0.0); m];
        for k in 1..m / 2 {
            let mag = self.power_at(k as f64 * self.sample_rate / m as f64).sqrt();
            let ph = rng.gen_range(0.0..2.0 * PI);
            spec[k] = Complex::from_polar(mag, ph);
            spec[m - k] = spec[k].conj();
        }
        let nyq = self.power_at(self.sample_rate / 2.0).sqrt();
        spec[m / 2] = Complex::new(if rng.gen_bool(0.5) { nyq } else { -nyq }, 0.0);
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(m).process(&mut spec);
        spec.iter().take(len).map(|c| c.re / m as f64).collect()
    }
}
