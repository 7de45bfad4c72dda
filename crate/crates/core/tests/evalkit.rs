mod common;

use common::{dense_dft, tone};
use hacomp::audio;
use hacomp::dnnha::{self, ArchSpec, ModelParams};
use hacomp::evalkit::{
    efr, evaluate, level_sweep, nrmse, sam_tone, sam_unramped, ssn_from_corpus, EfrParams, EvalConfig, EvalError, Evaluator,
    SamStimulus, SSN_SEGMENT,
};
use hacomp::periphery::{FiberType, HearingProfile, Periphery, PeripheryConfig, CFMap};
use hacomp::trainer::{pad_context, synthetic_corpus, Sentence, MODEL_RATE};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FS: f64 = MODEL_RATE as f64;

fn desk_periphery() -> Periphery {
    let cfg = EvalConfig::desk();
    let mut pc = PeripheryConfig::default();
    pc.context_left = cfg.context_left;
    pc.context_right = cfg.context_right;
    Periphery::new(pc, CFMap::standard()).unwrap()
}

fn evaluator<'a>(p: &'a Periphery, hi: &str, model: Option<&'a ModelParams>, config: EvalConfig) -> Evaluator<'a> {
    Evaluator { periphery: p, nh: HearingProfile::normal(), hi: HearingProfile::preset(hi).unwrap(), model, config }
}

/// A residual model whose correction path is exactly zero.
fn identity_model() -> ModelParams {
    let spec = ArchSpec { residual: true, ..ArchSpec::reduced_12() };
    let mut m = dnnha::build(&spec, 5).unwrap();
    let n = m.values.len();
    let last_w = m.names.iter().rposition(|s| s.ends_with(".w")).unwrap();
    for v in &mut m.values[last_w..n] {
        v.data_mut().iter_mut().for_each(|x| *x = 0.0);
    }
    m
}

#[test]
fn nrmse_hand_case() {
    let v = nrmse(&[0.0, 4.0], &[0.0, 0.0]).unwrap();
    assert!((v - 8f64.sqrt() / 4.0).abs() < 1e-15);
    assert!((v * 100.0 - 70.710678).abs() < 1e-5);
    assert_eq!(nrmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert!(matches!(nrmse(&[0.0, 0.0], &[1.0, 1.0]), Err(EvalError::ZeroReference)));
    assert!(matches!(nrmse(&[1.0], &[1.0, 2.0]), Err(EvalError::Input(_))));
}

proptest! {
    #[test]
    fn nrmse_scale_invariant(a in prop::collection::vec(0.1f64..100.0, 4..40), seed in 0u64..1000, c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
        let base = nrmse(&a, &b).unwrap();
        let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
        let sb: Vec<f64> = b.iter().map(|v| v * c).collect();
        prop_assert!((nrmse(&sa, &sb).unwrap() - base).abs() <= 1e-12 * base.max(1.0));
        prop_assert!(base >= 0.0);
    }
}

#[test]
fn sam_tone_spectrum() {
    // 0.4 s at 20 kHz puts 4000 Hz and 120 Hz multiples on exact bins.
    let spec = SamStimulus { depth: 0.6, ..SamStimulus::default() };
    let x = sam_unramped(&spec, FS);
    assert_eq!(x.len(), 8000);
    let n = x.len() as f64;
    let spectrum = dense_dft(&x);
    let amp = |f: f64| {
        let (re, im) = spectrum[(f * n / FS).round() as usize];
        2.0 * (re * re + im * im).sqrt() / n
    };
    assert!((amp(4000.0) - 1.0).abs() < 1e-9);
    assert!((amp(4120.0) - 0.3).abs() < 1e-9);
    assert!((amp(3880.0) - 0.3).abs() < 1e-9);
    assert!(amp(4240.0) < 1e-9 && amp(120.0) < 1e-9);

    let pure = sam_unramped(&SamStimulus { depth: 0.0, ..SamStimulus::default() }, FS);
    let reference = tone(4000.0, FS, 8000, 1.0);
    assert!(pure.iter().zip(&reference).all(|(a, b)| (a - b).abs() < 1e-9));

    let cal = sam_tone(&SamStimulus::default(), FS).unwrap();
    assert!((audio::rms(&cal) - audio::spl_to_rms(70.0)).abs() < 1e-12);
    assert_eq!(cal[0], 0.0);
    assert!(sam_tone(&SamStimulus { depth: 1.5, ..SamStimulus::default() }, FS).is_err());
}

#[test]
fn efr_reads_injected_harmonics() {
    // A population response with known harmonic amplitudes, no back-end
    // rectification since the stages see a positive slowly varying input.
    let n = 8000;
    let p = EfrParams { nv_per_unit: 1.0, ..EfrParams::default() };
    let flat: Vec<f64> = vec![500.0; n];
    let res = efr(&flat, FS, &p).unwrap();
    assert!(res.efr_sum < 1e-6, "constant input {}", res.efr_sum);
    assert!(efr(&flat[..900], FS, &p).is_err());
    let m: Vec<f64> = (0..n).map(|i| 500.0 + 50.0 * (2.0 * std::f64::consts::PI * 120.0 * i as f64 / FS).sin()).collect();
    let r = efr(&m, FS, &p).unwrap();
    assert!(r.peaks[0] > 50.0, "fundamental {:?}", r.peaks);
    assert!(r.peaks[0] > 10.0 * r.peaks[1]);
}

#[test]
fn efr_monotone_in_depth_and_cs_below_nh() {
    let p = desk_periphery();
    let ev = evaluator(&p, "CS-7-0-0", None, EvalConfig::desk());
    let depths = [0.0, 0.25, 0.5, 1.0];
    let sums: Vec<f64> = depths.iter().map(|&m| ev.efr_summary(&SamStimulus { depth: m, ..SamStimulus::default() }).unwrap().nh).collect();
    assert!(sums[0] < 1e-3 * sums[3], "{sums:?}");
    assert!(sums.windows(2).all(|w| w[0] < w[1]), "{sums:?}");
    let s = ev.efr_summary(&SamStimulus::default()).unwrap();
    assert!(s.hi_unprocessed < s.nh);
    assert!(s.hi_processed.is_none());
    // The nV scale is pinned so NH lands near the conventional label.
    assert!((s.nh - 8.39).abs() < 0.05, "NH EFR {}", s.nh);
}

fn third_octave_bands(psd: &[f64], fs: f64) -> Vec<f64> {
    let bin = fs / SSN_SEGMENT as f64;
    let mut out = Vec::new();
    let mut fc = 125.0;
    while fc < 8000.0 {
        let (lo, hi) = (fc / 2f64.powf(1.0 / 6.0), fc * 2f64.powf(1.0 / 6.0));
        out.push((0..psd.len()).filter(|&k| (k as f64 * bin) >= lo && (k as f64 * bin) < hi).map(|k| psd[k]).sum());
        fc *= 2f64.powf(1.0 / 3.0);
    }
    out
}

#[test]
fn ssn_matches_corpus_spectrum() {
    let corpus: Vec<Vec<f64>> = synthetic_corpus(4, 3, 0.8, 1.0)
        .iter()
        .map(|s| audio::resample(&s.samples, s.sample_rate, MODEL_RATE).unwrap())
        .collect();
    let refs: Vec<&[f64]> = corpus.iter().map(Vec::as_slice).collect();
    let gen = ssn_from_corpus(&refs, FS).unwrap();
    let noise = gen.generate(1 << 17, 11);
    let measured = ssn_from_corpus(&[&noise], FS).unwrap();
    let (a, b) = (third_octave_bands(&gen.psd, FS), third_octave_bands(&measured.psd, FS));
    let (ta, tb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    // Bands far below the dominant ones are biased by Hann leakage in the re-estimate.
    for (i, (x, y)) in a.iter().zip(&b).enumerate().filter(|(_, (x, _))| **x > 1e-3 * ta) {
        let db = 10.0 * ((y / tb) / (x / ta)).log10();
        assert!(db.abs() < 1.0, "band {i}: {db} dB");
    }
    assert_ne!(gen.generate(4096, 1), gen.generate(4096, 2));
    assert_eq!(gen.generate(4096, 1), gen.generate(4096, 1));
    assert_eq!(gen.generate(4097, 1).len(), 4097);
    assert!(ssn_from_corpus(&[], FS).is_err());
    assert!(ssn_from_corpus(&[&[0.0; 3000]], FS).is_err());
}

#[test]
fn ssn_of_white_corpus_is_white() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let white: Vec<f64> = (0..1 << 16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let gen = ssn_from_corpus(&[&white], FS).unwrap();
    let noise = gen.generate(1 << 17, 2);
    let measured = ssn_from_corpus(&[&noise], FS).unwrap();
    // Per-Hz density in the upper bands, where each band spans many bins.
    let bands = third_octave_bands(&measured.psd, FS);
    let mut fc = 125.0;
    let mut dens = Vec::new();
    for b in &bands {
        let width = fc * (2f64.powf(1.0 / 6.0) - 2f64.powf(-1.0 / 6.0));
        if fc > 1000.0 {
            dens.push(b / width);
        }
        fc *= 2f64.powf(1.0 / 3.0);
    }
    let mean = dens.iter().sum::<f64>() / dens.len() as f64;
    for d in dens {
        assert!((10.0 * (d / mean).log10()).abs() < 1.0);
    }
}

#[test]
fn mixing_hits_requested_snr() {
    let speech = tone(500.0, FS, 4000, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise: Vec<f64> = (0..5000).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for snr in [-12.0, -6.0, 0.0, 10.0] {
        let mixed = audio::mix_at_snr(&speech, &noise, snr).unwrap();
        let resid: Vec<f64> = mixed.iter().zip(&speech).map(|(m, s)| m - s).collect();
        let got = 20.0 * (audio::rms(&speech) / audio::rms(&resid)).log10();
        assert!((got - snr).abs() < 0.01, "{got} vs {snr}");
    }
    assert_eq!(audio::mix_at_snr(&speech, &noise, f64::INFINITY).unwrap(), speech);
    assert!(audio::mix_at_snr(&speech, &noise[..100], 0.0).is_err());
}

#[test]
fn nh_against_itself_is_zero_at_every_level() {
    let p = desk_periphery();
    let ev = evaluator(&p, "NH", None, EvalConfig::desk());
    let s: Vec<Vec<f64>> = synthetic_corpus(2, 7, 0.2, 0.3).iter().map(|s| audio::resample(&s.samples, 16000, MODEL_RATE).unwrap()).collect();
    for (_, v) in level_sweep(&ev, &s, &[30.0, 50.0, 70.0]).unwrap() {
        assert_eq!(v, 0.0);
    }
}

// Above threshold only: near 30 dB SPL both responses sit on the spontaneous floor and the
// max-normalised error shrinks again.
#[test]
fn sloping_loss_error_falls_with_level() {
    let p = desk_periphery();
    let ev = evaluator(&p, "Slope35", None, EvalConfig::desk());
    let s: Vec<Vec<f64>> = synthetic_corpus(2, 1, 1.0, 1.5).iter().map(|s| audio::resample(&s.samples, 16000, MODEL_RATE).unwrap()).collect();
    let sweep = level_sweep(&ev, &s, &[50.0, 60.0, 70.0, 80.0]).unwrap();
    assert!(sweep.windows(2).all(|w| w[0].1 > w[1].1), "{sweep:?}");
}

#[test]
fn synaptopathy_on_silence_matches_closed_form() {
    let p = desk_periphery();
    let cfg = EvalConfig::desk();
    let padded = vec![0.0; cfg.total_len];
    let ev = evaluator(&p, "CS-7-0-0", None, cfg);
    let (u, pr) = ev.nrmse_pair(&padded).unwrap();
    let sr = |t: FiberType| p.config().fiber(t).spont_rate;
    let nh = 13.0 * sr(FiberType::High) + 3.0 * sr(FiberType::Medium) + 3.0 * sr(FiberType::Low);
    let predicted = 1.0 - 7.0 * sr(FiberType::High) / nh;
    assert!((u - predicted).abs() < 1e-9, "{u} vs {predicted}");
    assert!(pr.is_none());
}

fn small_config() -> EvalConfig {
    EvalConfig { levels_db: vec![50.0, 70.0], snrs_db: vec![-6.0, 0.0], ..EvalConfig::desk() }
}

fn corpus() -> Vec<Sentence> {
    synthetic_corpus(3, 21, 0.2, 0.3)
}

#[test]
fn identity_model_reproduces_baseline() {
    let p = desk_periphery();
    let m = identity_model();
    let x = audio::calibrate(&audio::resample(&corpus()[0].samples, 16000, MODEL_RATE).unwrap(), 70.0).unwrap();
    let cfg = small_config();
    let padded = pad_context(&x, cfg.context_left, cfg.context_right, cfg.total_len).unwrap();
    let ev = evaluator(&p, "Slope35+CS-7-0-0", Some(&m), cfg);
    let (u, pr) = ev.nrmse_pair(&padded).unwrap();
    assert!(u > 0.0);
    assert_eq!(pr, Some(u));
    let e = ev.efr_summary(&SamStimulus::default()).unwrap();
    assert_eq!(e.hi_processed, Some(e.hi_unprocessed));
}

#[test]
fn report_aggregates_and_is_deterministic() {
    let p = desk_periphery();
    let m = identity_model();
    let ev = evaluator(&p, "CS-7-0-0", Some(&m), small_config());
    let a = evaluate(&ev, &corpus(), Some("identity".into())).unwrap();
    assert!(!a.is_partial());
    assert_eq!(a.rows.len(), 3 * 4);
    assert_eq!(a.aggregates.len(), 4);
    for g in &a.aggregates {
        let rows: Vec<f64> = a.rows.iter().filter(|r| r.level_db == g.level_db && r.snr_db == g.snr_db).map(|r| r.nrmse_unprocessed_pct).collect();
        assert_eq!(rows.len(), 3);
        assert!((g.nrmse_unprocessed_pct - rows.iter().sum::<f64>() / 3.0).abs() < 1e-12);
        assert_eq!(g.nrmse_processed_pct, Some(g.nrmse_unprocessed_pct));
    }
    assert!(a.aggregate(70.0, Some(-6.0)).is_some());
    assert!(a.aggregate(60.0, None).is_none());

    let b = evaluate(&ev, &corpus(), Some("identity".into())).unwrap();
    let (mut ja, mut jb) = (Vec::new(), Vec::new());
    a.write_json(&mut ja).unwrap();
    b.write_json(&mut jb).unwrap();
    assert_eq!(ja, jb);

    let mut csv = Vec::new();
    a.write_rows_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 12);
    let mut lv = Vec::new();
    a.write_level_csv(&mut lv).unwrap();
    assert_eq!(String::from_utf8(lv).unwrap().lines().count(), 3);
    let mut ef = Vec::new();
    a.write_efr_csv(&mut ef).unwrap();
    assert_eq!(String::from_utf8(ef).unwrap().lines().count(), 4);
}

#[test]
fn bad_sentence_is_reported_not_fatal() {
    let p = desk_periphery();
    let ev = evaluator(&p, "CS-7-0-0", None, EvalConfig { sam: None, ..small_config() });
    let mut c = corpus();
    c.push(Sentence { name: "silent".into(), samples: vec![0.0; 4000], sample_rate: 16000 });
    c.push(Sentence { name: "long".into(), samples: vec![0.1; 48000], sample_rate: 16000 });
    let r = evaluate(&ev, &c, None).unwrap();
    assert!(r.is_partial());
    assert_eq!(r.failures.len(), 2);
    assert!(r.failures.iter().any(|f| f.starts_with("silent")));
    assert_eq!(r.rows.len(), 3 * 4);
}
