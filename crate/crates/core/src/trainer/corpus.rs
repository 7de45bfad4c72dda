//! Seeded speech-like test material.
//!
//! A sentence is a run of syllables separated by short pauses. Each syllable
//! is a voiced vowel (glottal pulse train through three formant resonators)
//! optionally preceded by a fricative or a stop burst (band-passed noise).
//! Material is generated at 16 kHz, so nothing lies above 8 kHz.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ad::Biquad;

pub const CORPUS_RATE: u32 = 16_000;

/// A raw sentence at its source rate, before calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct Sentence {
    pub name: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

const VOWELS: [(f64, f64, f64); 6] = [
    (730.0, 1090.0, 2440.0),
    (270.0, 2290.0, 3010.0),
    (530.0, 1840.0, 2480.0),
    (300.0, 870.0, 2240.0),
    (570.0, 840.0, 2410.0),
    (440.0, 1020.0, 2240.0),
];

fn raised_cosine_env(n: usize, ramp: usize) -> Vec<f64> {
    let ramp = ramp.min(n / 2).max(1);
    (0..n)
        .map(|i| {
            let k = i.min(n - 1 - i);
            if k >= ramp {
                1.0
            } else {
                0.5 - 0.5 * (PI * k as f64 / ramp as f64).cos()
            }
        })
        .collect()
}

fn vowel(rng: &mut ChaCha8Rng, n: usize, fs: f64, f0: f64) -> Vec<f64> {
    let (f1, f2, f3) = VOWELS[rng.gen_range(0..VOWELS.len())];
    let drift = rng.gen_range(-0.15..0.15);
    let mut src = vec![0.0; n];
    let mut phase = 0.0;
    for (i, s) in src.iter_mut().enumerate() {
        let f = f0 * (1.0 + drift * i as f64 / n as f64);
        phase += f / fs;
        if phase >= 1.0 {
            phase -= 1.0;
            *s = 1.0;
        }
    }
    let mut out = vec![0.0; n];
    for (fc, q, g) in [(f1, 5.0, 1.0), (f2, 8.0, 0.6), (f3, 10.0, 0.3)] {
        let mut band = src.clone();
        Biquad::bandpass(fc, q, fs).apply(&mut band);
        Biquad::bandpass(fc, q, fs).apply(&mut band);
        for (o, b) in out.iter_mut().zip(&band) {
            *o += g * b;
        }
    }
    out
}

fn noise_band(rng: &mut ChaCha8Rng, n: usize, fs: f64, fc: f64, q: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Biquad::bandpass(fc, q, fs).apply(&mut x);
    Biquad::bandpass(fc, q, fs).apply(&mut x);
    x
}

/// One sentence of roughly `duration_s`, at [`CORPUS_RATE`].
pub fn synthetic_sentence(seed: u64, duration_s: f64) -> Vec<f64> {
    let fs = CORPUS_RATE as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (duration_s * fs).round() as usize;
    let f0 = rng.gen_range(90.0..220.0);
    let mut out = Vec::with_capacity(total);
    out.extend(vec![0.0; rng.gen_range(80..400)]);
    while out.len() < total {
        if rng.gen_bool(0.45) {
            let len = rng.gen_range(400..1400);
            let fc = rng.gen_range(2500.0..6500.0);
            let burst = noise_band(&mut rng, len, fs, fc, 1.5);
            let env = raised_cosine_env(len, len / 4);
            let g = rng.gen_range(0.05..0.2);
            out.extend(burst.iter().zip(&env).map(|(b, e)| g * b * e));
        }
        let len = rng.gen_range(1300..3600);
        let pitch = f0 * rng.gen_range(0.9..1.1);
        let v = vowel(&mut rng, len, fs, pitch);
        let env = raised_cosine_env(len, 320);
        let g = rng.gen_range(0.4..1.0);
        out.extend(v.iter().zip(&env).map(|(s, e)| g * s * e));
        out.extend(vec![0.0; rng.gen_range(0..1200)]);
    }
    out.truncate(total);
    let tail = 160.min(total);
    for (i, v) in out[total - tail..].iter_mut().enumerate() {
        *v *= 1.0 - i as f64 / tail as f64;
    }
    out
}

/// `n` sentences with durations drawn from `[min_s, max_s]`.
pub fn synthetic_corpus(n: usize, seed: u64, min_s: f64, max_s: f64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
    (0..n)
        .map(|i| {
            let d = if max_s > min_s { rng.gen_range(min_s..max_s) } else { min_s };
            Sentence {
                name: format!("synth{i:03}"),
                samples: synthetic_sentence(seed.wrapping_mul(1_000_003).wrapping_add(i as u64), d),
                sample_rate: CORPUS_RATE,
            }
        })
        .collect()
}
