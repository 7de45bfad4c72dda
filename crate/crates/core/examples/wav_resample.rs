//! Writes a sentence to WAV at 16 kHz, reads it back, resamples it to the
//! model rate and back, and reports the round-trip error.
use hacomp::audio::{self, WavFormat};
use hacomp::trainer::{synthetic_sentence, CORPUS_RATE, MODEL_RATE};

fn main() {
    let s = synthetic_sentence(2, 1.0);
    let dir = std::env::temp_dir();
    let path = dir.join("hacomp_example.wav");
    audio::write_wav(&path, &s, CORPUS_RATE, WavFormat::Float32).unwrap();
    let (x, rate) = audio::read_wav(&path).unwrap();
    println!("{}: {} samples at {rate} Hz, RMS {:.4}", path.display(), x.len(), audio::rms(&x));
    let up = audio::resample(&x, rate, MODEL_RATE).unwrap();
    let back = audio::resample(&up, MODEL_RATE, rate).unwrap();
    let (a, b) = (&x[500..x.len() - 500], &back[500..x.len() - 500]);
    let err: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt() / a.iter().map(|p| p * p).sum::<f64>().sqrt();
    println!("{} -> {} samples at {MODEL_RATE} Hz -> {} samples; relative round-trip error {err:.2e}", x.len(), up.len(), back.len());
    let cal = audio::calibrate(&up, 65.0).unwrap();
    println!("calibrated to 65 dB SPL: RMS {:.6} Pa", audio::rms(&cal));
    std::fs::remove_file(&path).ok();
}
