//! Builds the reference encoder-decoder, reports its size, and runs a
//! freshly initialised copy over a sentence window by window.
use hacomp::audio;
use hacomp::dnnha::{build, param_count, process, ArchSpec};
use hacomp::trainer::{synthetic_sentence, CORPUS_RATE, MODEL_RATE};

fn main() {
    let spec = ArchSpec::default();
    println!("layers:");
    for (i, l) in spec.layers().iter().enumerate() {
        let kind = if l.transposed { "deconv" } else { "conv  " };
        println!("  {i:>2} {kind} {:>4} -> {:<4} prelu={}", l.c_in, l.c_out, l.prelu);
    }
    println!("{} parameters, inputs in multiples of {}", param_count(&spec), spec.granularity());

    let model = build(&ArchSpec { residual: true, ..spec }, 0).unwrap();
    let s = synthetic_sentence(3, 0.8);
    let x = audio::resample(&s, CORPUS_RATE, MODEL_RATE).unwrap();
    let x = audio::calibrate(&x, 70.0).unwrap();
    let n = x.len().div_ceil(256) * 256;
    let mut padded = x.clone();
    padded.resize(n, 0.0);
    let y = process(&model, &padded, 2048).unwrap();
    let diff: Vec<f64> = y.iter().zip(&padded).map(|(a, b)| a - b).collect();
    println!(
        "residual model at init: input {:.1} dB, output {:.1} dB, correction {:.1} dB",
        audio::level_db(&padded),
        audio::level_db(&y),
        audio::level_db(&diff)
    );
}
