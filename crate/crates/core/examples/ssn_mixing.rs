//! Speech-shaped noise from the long-term spectrum of a small corpus, mixed
//! at several SNRs.
use hacomp::audio;
use hacomp::evalkit::ssn_from_corpus;
use hacomp::trainer::{synthetic_corpus, MODEL_RATE};

fn main() {
    let corpus: Vec<Vec<f64>> = synthetic_corpus(6, 5, 1.0, 1.5)
        .iter()
        .map(|s| audio::calibrate(&audio::resample(&s.samples, s.sample_rate, MODEL_RATE).unwrap(), 70.0).unwrap())
        .collect();
    let refs: Vec<&[f64]> = corpus.iter().map(|v| v.as_slice()).collect();
    let gen = ssn_from_corpus(&refs, MODEL_RATE as f64).unwrap();
    for f in [250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0] {
        println!("long-term spectrum at {f:>5.0} Hz: {:>7.1} dB", 10.0 * gen.power_at(f).log10());
    }
    let speech = &corpus[0];
    for snr in [6.0, 0.0, -6.0, -12.0] {
        let noise = gen.generate(speech.len(), 1);
        let mix = audio::mix_at_snr(speech, &noise, snr).unwrap();
        let added: Vec<f64> = mix.iter().zip(speech).map(|(m, s)| m - s).collect();
        println!(
            "target {snr:>5.1} dB: measured {:>8.4} dB, mixture at {:.2} dB SPL",
            audio::level_db(speech) - audio::level_db(&added),
            audio::level_db(&mix)
        );
    }
}
