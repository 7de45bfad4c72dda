mod common;

use common::{dense_dft, grad_check, random_array, rng, tone};
use hacomp::ad::{hann, Array, Tape, Var};
use hacomp::losses::{
    compose, freq_emphasis_weights, loss_r, loss_rp, loss_stft_channels, loss_stft_population, loss_x_highfreq,
    response_threshold_row, stimulus_threshold, Bundle, FreqEmphasis, LossError, LossSpec, LossTerm, ResponseThreshold,
    StftParams, StimulusThreshold, TermKind,
};
use hacomp::periphery::{strided_subset, CFMap, HearingProfile, Periphery, PeripheryConfig};
use proptest::prelude::*;

const FS: f64 = 20_000.0;
const SMALL_STFT: StftParams = StftParams { window: 64, hop: 32 };

fn c(t: &Tape, rows: usize, cols: usize, data: Vec<f64>) -> Var {
    t.constant(Array::matrix(rows, cols, data).unwrap())
}

fn brute_rms(x: &[f64], w: usize) -> Vec<f64> {
    let h = w / 2;
    (0..x.len())
        .map(|i| {
            let s = &x[i.saturating_sub(h)..(i + h + 1).min(x.len())];
            (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt()
        })
        .collect()
}

/// Direct recomputation of the moving threshold, one window at a time.
fn brute_tr(r: &[f64], p: &ResponseThreshold) -> Vec<bool> {
    let rms = brute_rms(r, p.rms_win);
    let h = p.extrema_win / 2;
    (0..r.len())
        .map(|i| {
            let s = &rms[i.saturating_sub(h)..(i + h + 1).min(r.len())];
            let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            r[i] > p.fraction * (hi - lo) + lo
        })
        .collect()
}

fn brute_tx(x: &[f64], p: &StimulusThreshold) -> Vec<bool> {
    let rms = brute_rms(x, p.rms_win);
    let m = rms.iter().cloned().fold(0.0, f64::max);
    rms.iter().map(|&v| m > 0.0 && v >= p.fraction * m).collect()
}

fn brute_masked_mae(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    let kept: Vec<f64> = a.iter().zip(b).zip(mask).filter(|(_, m)| **m).map(|((x, y), _)| (x - y).abs()).collect();
    if kept.is_empty() {
        0.0
    } else {
        kept.iter().sum::<f64>() / kept.len() as f64
    }
}

/// Modulated rate-like rows: `base + depth·sin` with row-specific periods.
fn modulated(rows: usize, n: usize) -> Vec<f64> {
    (0..rows * n)
        .map(|k| {
            let (r, i) = (k / n, k % n);
            let env = 0.5 + 0.5 * (i as f64 / (37.0 + 11.0 * r as f64)).sin();
            100.0 + 150.0 * env * env + 5.0 * (i as f64 * 0.9).cos()
        })
        .collect()
}

#[test]
fn time_channel_hand_case() {
    let t = Tape::new();
    let r = c(&t, 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
    let z = c(&t, 2, 2, vec![0.0; 4]);
    assert_eq!(loss_r(&t, &r, &z, false, None, None).unwrap().item(), 2.5);
    assert_eq!(loss_r(&t, &r, &r, false, None, None).unwrap().item(), 0.0);
    // Squared form is the MAE of squares: (1 + 4 + 9 + 16) / 4.
    assert_eq!(loss_r(&t, &r, &z, true, None, None).unwrap().item(), 7.5);
    // Weights scale rows before squaring.
    let w = loss_r(&t, &r, &z, false, Some(&[1.0, 0.5]), None).unwrap().item();
    assert_eq!(w, (1.0 + 2.0 + 1.5 + 2.0) / 4.0);
    let bad = c(&t, 1, 4, vec![0.0; 4]);
    assert!(matches!(loss_r(&t, &r, &bad, false, None, None), Err(LossError::Shape(_))));
}

#[test]
fn squared_matches_mae_of_squares() {
    let mut g = rng(1);
    let t = Tape::new();
    let a = t.constant(random_array(&mut g, &[3, 40], 5.0));
    let b = t.constant(random_array(&mut g, &[3, 40], 5.0));
    let direct = t.mae(&t.square(&a), &t.square(&b)).unwrap().item();
    assert_eq!(loss_r(&t, &a, &b, true, None, None).unwrap().item(), direct);
}

#[test]
fn population_hand_case_and_permutation() {
    let t = Tape::new();
    let r = c(&t, 2, 3, vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0]);
    let h = c(&t, 2, 3, vec![0.0, 2.0, 1.0, 5.0, 20.0, 30.0]);
    // r_p = [11, 22, 33], r̂_p = [5, 22, 31].
    assert_eq!(loss_rp(&t, &r, &h, false, None).unwrap().item(), (6.0 + 0.0 + 2.0) / 3.0);
    assert_eq!(loss_rp(&t, &r, &h, true, None).unwrap().item(), ((121.0 - 25.0) + 0.0 + (1089.0 - 961.0)) / 3.0);

    let mut g = rng(2);
    let a = random_array(&mut g, &[4, 30], 50.0);
    let b = random_array(&mut g, &[4, 30], 50.0);
    let perm = [2, 0, 3, 1];
    let ta = t.constant(a.clone());
    let tb = t.constant(b.clone());
    let pa = t.select_rows(&ta, &perm).unwrap();
    let pb = t.select_rows(&tb, &perm).unwrap();
    let l0 = loss_rp(&t, &ta, &tb, true, None).unwrap().item();
    let l1 = loss_rp(&t, &pa, &pb, true, None).unwrap().item();
    assert!((l0 - l1).abs() <= 1e-12 * l0.abs());
}

/// Mean of |STFT| over channels, frames and bins, from a dense DFT.
fn dense_stft_mean(rows: &[Vec<f64>], p: StftParams) -> f64 {
    let w = hann(p.window);
    let mut total = 0.0;
    let mut count = 0usize;
    for row in rows {
        let mut start = 0;
        while start + p.window <= row.len() {
            let frame: Vec<f64> = row[start..start + p.window].iter().zip(&w).map(|(a, b)| a * b).collect();
            for (re, im) in dense_dft(&frame) {
                total += re.hypot(im);
                count += 1;
            }
            start += p.hop;
        }
    }
    total / count as f64
}

#[test]
fn stft_channels_against_dense_dft() {
    let mut g = rng(3);
    let a = random_array(&mut g, &[2, 200], 10.0);
    let t = Tape::new();
    let r = t.constant(a.clone());
    let z = t.constant(Array::zeros(&[2, 200]));
    let got = loss_stft_channels(&t, &r, &z, false, false, SMALL_STFT).unwrap().item();
    let rows = vec![a.row(0).to_vec(), a.row(1).to_vec()];
    let want = dense_stft_mean(&rows, SMALL_STFT);
    assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
    assert_eq!(loss_stft_channels(&t, &r, &r, false, false, SMALL_STFT).unwrap().item(), 0.0);

    let short = t.constant(Array::zeros(&[2, 1000]));
    let err = loss_stft_channels(&t, &short, &short, false, false, StftParams::default()).unwrap_err();
    assert!(matches!(err, LossError::Ad(hacomp::ad::AdError::TooShort { needed: 2048, got: 1000 })));
}

#[test]
fn complex_mode_is_phase_sensitive() {
    let n = 256;
    let row: Vec<f64> = (0..n).map(|i| 100.0 + 50.0 * (2.0 * std::f64::consts::PI * 10.0 * i as f64 / n as f64).sin()).collect();
    let shifted: Vec<f64> = (0..n).map(|i| row[(i + n - SMALL_STFT.hop) % n]).collect();
    let t = Tape::new();
    let r = c(&t, 1, n, row);
    let s = c(&t, 1, n, shifted);
    let mag = loss_stft_channels(&t, &r, &s, false, false, SMALL_STFT).unwrap().item();
    let cpx = loss_stft_channels(&t, &r, &s, false, true, SMALL_STFT).unwrap().item();
    assert!(mag < 0.2 * cpx, "magnitude {mag} vs complex {cpx}");
    assert!(loss_stft_channels(&t, &r, &s, true, true, SMALL_STFT).is_err());
}

#[test]
fn magnitude_spectra_ignore_sign_flip() {
    let mut g = rng(4);
    let t = Tape::new();
    let a = t.constant(random_array(&mut g, &[2, 160], 3.0));
    let b = t.constant(random_array(&mut g, &[2, 160], 3.0));
    let (na, nb) = (t.scale(&a, -1.0), t.scale(&b, -1.0));
    for squared in [false, true] {
        let l0 = loss_stft_channels(&t, &a, &b, squared, false, SMALL_STFT).unwrap().item();
        let l1 = loss_stft_channels(&t, &na, &nb, squared, false, SMALL_STFT).unwrap().item();
        assert!((l0 - l1).abs() <= 1e-12 * l0);
    }
}

#[test]
fn stft_population_is_stft_of_sum() {
    let mut g = rng(5);
    let t = Tape::new();
    let a = random_array(&mut g, &[3, 128], 4.0);
    let b = random_array(&mut g, &[3, 128], 4.0);
    let sum = |x: &Array| -> Vec<f64> { (0..128).map(|i| (0..3).map(|r| x.row(r)[i]).sum()).collect() };
    let (ta, tb) = (t.constant(a.clone()), t.constant(b.clone()));
    let (pa, pb) = (c(&t, 1, 128, sum(&a)), c(&t, 1, 128, sum(&b)));
    for squared in [false, true] {
        let pop = loss_stft_population(&t, &ta, &tb, squared, false, SMALL_STFT).unwrap().item();
        let one = loss_stft_channels(&t, &pa, &pb, squared, false, SMALL_STFT).unwrap().item();
        assert!((pop - one).abs() <= 1e-12 * one);
    }
    let pow = loss_stft_population(&t, &ta, &tb, true, false, SMALL_STFT).unwrap().item();
    let ma = t.stft(&pa, 64, 32, hacomp::ad::SpectrumMode::Magnitude).unwrap();
    let mb = t.stft(&pb, 64, 32, hacomp::ad::SpectrumMode::Magnitude).unwrap();
    let direct = t.mae(&t.square(&ma), &t.square(&mb)).unwrap().item();
    assert!((pow - direct).abs() <= 1e-10 * direct);
}

#[test]
fn stimulus_high_frequency_term() {
    // Length 2000 puts 4 kHz and 9 kHz exactly on bins 400 and 900.
    let n = 2000;
    let mut g = rng(6);
    let x = random_array(&mut g, &[n], 0.05);
    let t = Tape::new();
    let tx = t.constant(x.clone());
    let add = |f: f64| {
        let s = tone(f, FS, n, 0.02);
        t.constant(Array::vector(x.data().iter().zip(&s).map(|(a, b)| a + b).collect()))
    };
    assert_eq!(loss_x_highfreq(&t, &tx, &tx, FS, 8000.0).unwrap().item(), 0.0);
    let low = loss_x_highfreq(&t, &tx, &add(4000.0), FS, 8000.0).unwrap().item();
    assert!(low.abs() < 1e-9, "{low}");
    let high = loss_x_highfreq(&t, &tx, &add(9000.0), FS, 8000.0).unwrap().item();
    assert!(high > 1e-4, "{high}");
    let short = t.constant(Array::zeros(&[n - 2]));
    assert!(matches!(loss_x_highfreq(&t, &tx, &short, FS, 8000.0), Err(LossError::Shape(_))));
}

#[test]
fn emphasis_endpoints_and_shape() {
    let cf = CFMap::standard();
    let sub = cf.subset(&strided_subset(201, 10)).unwrap();
    for map in [&cf, &sub] {
        let w = freq_emphasis_weights(map.cf_hz(), 0.62).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!((w[w.len() - 1] - 0.38).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[1] < p[0]));
    }
    let ones = freq_emphasis_weights(cf.cf_hz(), 0.0).unwrap();
    assert!(ones.iter().all(|&v| v == 1.0));
    assert!(freq_emphasis_weights(cf.cf_hz(), 1.0).is_err());
    assert_eq!(freq_emphasis_weights(&[500.0], 0.62).unwrap(), [1.0]);
}

#[test]
fn response_threshold_cases() {
    let p = ResponseThreshold { fraction: 0.4, rms_win: 5, extrema_win: 11 };
    assert!(response_threshold_row(&[3.0; 40], &p).unwrap().iter().all(|m| !m));

    let r = modulated(1, 300);
    let zero = ResponseThreshold { fraction: 0.0, ..p.clone() };
    let got = response_threshold_row(&r, &zero).unwrap();
    let rms = brute_rms(&r, 5);
    for (i, m) in got.iter().enumerate() {
        let s = &rms[i.saturating_sub(5)..(i + 6).min(300)];
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(*m, r[i] > lo, "sample {i}");
    }

    let mask = response_threshold_row(&r, &p).unwrap();
    assert_eq!(mask, brute_tr(&r, &p));
    let kept = mask.iter().filter(|m| **m).count();
    assert!(kept > 0 && kept < r.len());
    // Retained samples sit above the mean of the discarded ones.
    let mean = |keep: bool| {
        let v: Vec<f64> = r.iter().zip(&mask).filter(|(_, m)| **m == keep).map(|(v, _)| *v).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(true) > mean(false));

    let long = modulated(1, 3000);
    assert_eq!(response_threshold_row(&long, &ResponseThreshold::default()).unwrap(), brute_tr(&long, &ResponseThreshold::default()));
}

#[test]
fn stimulus_threshold_cases() {
    let p = StimulusThreshold::default();
    let x = tone(1000.0, FS, 1000, 0.1);
    assert!(stimulus_threshold(&x, &p).unwrap().iter().all(|m| *m));
    assert!(stimulus_threshold(&[0.0; 500], &p).unwrap().iter().all(|m| !m));

    let mut split = vec![0.0; 500];
    split.extend(tone(1000.0, FS, 500, 0.1));
    let mask = stimulus_threshold(&split, &p).unwrap();
    assert_eq!(mask, brute_tx(&split, &p));
    let first = mask.iter().position(|m| *m).unwrap();
    assert!((500 - 50..=500 + 50).contains(&first), "{first}");
    assert!(mask[first..].iter().all(|m| *m));
}

fn hand_bundle_spec(modifiers: bool) -> LossSpec {
    let mut s = LossSpec::new(
        "hand",
        vec![
            LossTerm::new(TermKind::TimeChannels, false, 1.0),
            LossTerm::new(TermKind::TimePopulation, true, 0.25),
        ],
    );
    if modifiers {
        s.modifiers.response_threshold = Some(ResponseThreshold { fraction: 0.4, rms_win: 7, extrema_win: 41 });
        s.modifiers.stimulus_threshold = Some(StimulusThreshold { rms_win: 11, fraction: 0.2 });
        s.modifiers.freq_emphasis = Some(FreqEmphasis { max_attenuation: 0.62 });
    }
    s
}

#[test]
fn masked_terms_match_brute_force() {
    let (rows, n) = (3, 240);
    let r = modulated(rows, n);
    let mut g = rng(7);
    let noise = random_array(&mut g, &[rows * n], 30.0);
    let r_hat: Vec<f64> = r.iter().zip(noise.data()).map(|(a, b)| (a + b).max(0.0)).collect();
    let mut x = vec![0.0; 80];
    x.extend(tone(700.0, FS, n - 80, 0.1));
    let cf = [500.0, 2000.0, 8000.0];
    let spec = hand_bundle_spec(true);

    let t = Tape::new();
    let (tr, th) = (c(&t, rows, n, r.clone()), c(&t, rows, n, r_hat.clone()));
    let tx = t.constant(Array::vector(x.clone()));
    let b = Bundle { x: &tx, x_hat: &tx, r: &tr, r_hat: &th, cf_hz: &cf, sample_rate_hz: FS };
    let out = compose(&t, &spec, &b).unwrap();

    let rp = spec.modifiers.response_threshold.clone().unwrap();
    let txm = brute_tx(&x, spec.modifiers.stimulus_threshold.as_ref().unwrap());
    let w = freq_emphasis_weights(&cf, 0.62).unwrap();
    let mut mask = Vec::new();
    let mut wa = Vec::new();
    let mut wb = Vec::new();
    for ch in 0..rows {
        let row = &r[ch * n..(ch + 1) * n];
        mask.extend(brute_tr(row, &rp).iter().zip(&txm).map(|(a, b)| *a && *b));
        wa.extend(row.iter().map(|v| v * w[ch]));
        wb.extend(r_hat[ch * n..(ch + 1) * n].iter().map(|v| v * w[ch]));
    }
    let want_r = brute_masked_mae(&wa, &wb, &mask);
    let pop = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..rows).map(|ch| v[ch * n + i]).sum()).collect() };
    let (pa, pb) = (pop(&r), pop(&r_hat));
    let pmask: Vec<bool> = brute_tr(&pa, &rp).iter().zip(&txm).map(|(a, b)| *a && *b).collect();
    let sq = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x * x).collect() };
    let want_p = brute_masked_mae(&sq(&pa), &sq(&pb), &pmask);

    assert!((out.terms[0].raw - want_r).abs() <= 1e-12 * want_r, "{} vs {want_r}", out.terms[0].raw);
    assert!((out.terms[1].raw - want_p).abs() <= 1e-12 * want_p);
    let total = want_r + 0.25 * want_p;
    assert!((out.value() - total).abs() <= 1e-12 * total);
    // Masking excluded something but not everything.
    let kept = mask.iter().filter(|m| **m).count();
    assert!(kept > 0 && kept < mask.len());
}

#[test]
fn table_rows_reproduce_weights() {
    let expect: [(&str, &[(&str, f64)]); 8] = [
        ("L_r", &[("r", 1.0), ("X", 0.5)]),
        ("L_rR", &[("r", 1.0), ("X", 0.5), ("R", 0.1)]),
        ("L_rrp", &[("r", 1.0), ("X", 0.5), ("rp", 0.1)]),
        ("L_rrpRp", &[("r", 1.0), ("X", 0.5), ("rp", 0.1), ("Rp", 0.02)]),
        ("L_r2", &[("r2", 1.0), ("X", 40.0)]),
        ("L_r2R2", &[("r2", 1.0), ("X", 40.0), ("R2", 0.0014)]),
        ("L_r2rp2", &[("r2", 1.0), ("X", 40.0), ("rp2", 0.08)]),
        ("L_r2rp2Rp2", &[("r2", 1.0), ("X", 40.0), ("rp2", 0.08), ("Rp2", 1e-5)]),
    ];
    assert_eq!(LossSpec::preset_names().len(), 8);
    for (name, terms) in expect {
        let s = LossSpec::preset(name).unwrap();
        s.validate().unwrap();
        let got: Vec<(String, f64)> = s.terms.iter().map(|t| (t.label(), t.weight)).collect();
        let want: Vec<(String, f64)> = terms.iter().map(|(l, w)| (l.to_string(), *w)).collect();
        assert_eq!(got, want, "{name}");
    }
    let tx = LossSpec::preset("L_r2rp2Rp2+Tx").unwrap();
    assert_eq!(tx.modifiers.stimulus_threshold, Some(StimulusThreshold { rms_win: 101, fraction: 0.01 }));
}

fn random_bundle_data(seed: u64, rows: usize, n: usize) -> (Array, Array, Array, Array) {
    let mut g = rng(seed);
    let r = Array::matrix(rows, n, modulated(rows, n)).unwrap();
    let noise = random_array(&mut g, &[rows, n], 20.0);
    let r_hat = Array::matrix(rows, n, r.data().iter().zip(noise.data()).map(|(a, b)| a + b).collect()).unwrap();
    let x = random_array(&mut g, &[n], 0.1);
    let x_hat = random_array(&mut g, &[n], 0.1);
    (r, r_hat, x, x_hat)
}

#[test]
fn compose_matches_table_rows() {
    let (r, r_hat, x, x_hat) = random_bundle_data(8, 2, 2048);
    let cf = [1000.0, 4000.0];
    let t = Tape::new();
    let (tr, th, tx, tz) = (t.constant(r), t.constant(r_hat), t.constant(x), t.constant(x_hat));
    let b = Bundle { x: &tx, x_hat: &tz, r: &tr, r_hat: &th, cf_hz: &cf, sample_rate_hz: FS };
    let lr = loss_r(&t, &tr, &th, false, None, None).unwrap().item();
    let lr2 = loss_r(&t, &tr, &th, true, None, None).unwrap().item();
    let lx = loss_x_highfreq(&t, &tx, &tz, FS, 8000.0).unwrap().item();

    let a = compose(&t, &LossSpec::preset("L_r").unwrap(), &b).unwrap();
    assert_eq!(a.value(), 1.0 * lr + 0.5 * lx);
    assert_eq!(a.terms[1].weighted, 0.5 * lx);
    let s = compose(&t, &LossSpec::preset("L_r2").unwrap(), &b).unwrap();
    assert_eq!(s.value(), 1.0 * lr2 + 40.0 * lx);
}

#[test]
fn compose_is_linear_in_weights() {
    let (r, r_hat, x, x_hat) = random_bundle_data(9, 2, 2048);
    let cf = [1000.0, 4000.0];
    let t = Tape::new();
    let (tr, th, tx, tz) = (t.constant(r), t.constant(r_hat), t.constant(x), t.constant(x_hat));
    let b = Bundle { x: &tx, x_hat: &tz, r: &tr, r_hat: &th, cf_hz: &cf, sample_rate_hz: FS };
    let base = LossSpec::preset("L_r2rp2Rp2").unwrap();
    let one = compose(&t, &base, &b).unwrap();
    for i in 0..base.terms.len() {
        let mut s = base.clone();
        s.terms[i].weight *= 2.0;
        let two = compose(&t, &s, &b).unwrap();
        assert_eq!(two.terms[i].weighted, 2.0 * one.terms[i].weighted);
        assert_eq!(two.terms[i].raw, one.terms[i].raw);
        let delta = two.value() - one.value();
        assert!((delta - one.terms[i].weighted).abs() <= 1e-12 * one.value());
    }
}

#[test]
fn zero_terms_give_zero_breakdown() {
    let t = Tape::new();
    let r = t.constant(Array::full(&[2, 2048], 70.0));
    let x = t.constant(Array::zeros(&[2048]));
    let cf = [1000.0, 4000.0];
    let b = Bundle { x: &x, x_hat: &x, r: &r, r_hat: &r, cf_hz: &cf, sample_rate_hz: FS };
    let out = compose(&t, &LossSpec::preset("L_rrpRp+Tx").unwrap(), &b).unwrap();
    assert_eq!(out.value(), 0.0);
    assert!(out.terms.iter().all(|v| v.raw == 0.0 && v.weighted == 0.0));
}

#[test]
fn every_preset_vanishes_on_identical_pathways() {
    let config = PeripheryConfig { context_left: 256, context_right: 64, block: 64, ..PeripheryConfig::default() };
    let p = Periphery::new(config, CFMap::standard()).unwrap();
    let sub = strided_subset(201, 50);
    let body = 2048;
    let mut x = vec![0.0; 256];
    x.extend(tone(1500.0, FS, body, 0.05));
    x.extend(vec![0.0; 64]);
    let nh = HearingProfile::normal();
    let t = Tape::new();
    let xv = t.constant(Array::vector(x.clone()));
    let r = p.simulate_var(&t, &xv, &nh, &sub).unwrap();
    let r_hat = p.simulate_var(&t, &xv, &HearingProfile::preset("NH").unwrap(), &sub).unwrap();
    let crop = t.constant(Array::vector(x[256..256 + body].to_vec()));
    let cf = p.cf_map().subset(&sub).unwrap();
    let b = Bundle { x: &crop, x_hat: &crop, r: &r, r_hat: &r_hat, cf_hz: cf.cf_hz(), sample_rate_hz: FS };
    for name in LossSpec::preset_names() {
        for suffix in ["", "+Tx", "+Tr+FE"] {
            let mut spec = LossSpec::preset(&format!("{name}{suffix}")).unwrap();
            if let Some(tr) = spec.modifiers.response_threshold.as_mut() {
                tr.extrema_win = 501;
            }
            let v = compose(&t, &spec, &b).unwrap();
            assert_eq!(v.value(), 0.0, "{name}{suffix}");
        }
    }
}

#[test]
fn composite_gradient_matches_finite_differences() {
    let (rows, n) = (2, 128);
    let (r, r_hat, x, x_hat) = random_bundle_data(10, rows, n);
    let cf = [800.0, 5000.0];
    let mut spec = LossSpec::new(
        "all",
        vec![
            LossTerm::new(TermKind::TimeChannels, true, 1e-4),
            LossTerm::new(TermKind::TimePopulation, false, 0.1),
            LossTerm::new(TermKind::StftChannels, true, 1e-6),
            LossTerm { kind: TermKind::StftPopulation, squared: false, complex_stft: true, weight: 0.01 },
            LossTerm::new(TermKind::StimulusHighFreq, false, 3.0),
        ],
    );
    spec.stft = SMALL_STFT;
    spec.modifiers.response_threshold = Some(ResponseThreshold { fraction: 0.3, rms_win: 5, extrema_win: 31 });
    spec.modifiers.stimulus_threshold = Some(StimulusThreshold { rms_win: 9, fraction: 0.5 });
    spec.modifiers.freq_emphasis = Some(FreqEmphasis::default());
    let f = |t: &Tape, v: &[Var]| {
        let rv = t.constant(r.clone());
        let xv = t.constant(x.clone());
        let b = Bundle { x: &xv, x_hat: &v[1], r: &rv, r_hat: &v[0], cf_hz: &cf, sample_rate_hz: FS };
        compose(t, &spec, &b).unwrap().total
    };
    let e = grad_check(&f, &[r_hat, x_hat], 1e-6);
    assert!(e < 1e-6, "{e}");
}

#[test]
fn json_round_trip_and_strictness() {
    let s = LossSpec::preset("L_r2rp2Rp2+Tx").unwrap();
    let text = serde_json::to_string_pretty(&s).unwrap();
    let back: LossSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
    let minimal: LossSpec = serde_json::from_str(r#"{"terms":[{"kind":"stft_population","squared":true,"weight":1e-5}]}"#).unwrap();
    assert_eq!(minimal.stft, StftParams::default());
    assert_eq!(minimal.cutoff_hz, 8000.0);
    assert!(serde_json::from_str::<LossSpec>(r#"{"terms":[],"extra":1}"#).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(LossSpec::load(path.to_str().unwrap()).unwrap(), s);
    assert!(matches!(LossSpec::load("L_nope"), Err(LossError::UnknownPreset(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn losses_are_non_negative_and_masks_only_select(
        seed in 0u64..10_000,
        rows in 1usize..4,
        fraction in 0.0f64..1.0,
    ) {
        let n = 96;
        let mut g = rng(seed);
        let a = random_array(&mut g, &[rows, n], 10.0);
        let b = random_array(&mut g, &[rows, n], 10.0);
        let p = ResponseThreshold { fraction, rms_win: 5, extrema_win: 15 };
        let mut mask = Vec::new();
        for r in 0..rows {
            mask.extend(response_threshold_row(a.row(r), &p).unwrap());
        }
        let t = Tape::new();
        let (ta, tb) = (t.constant(a.clone()), t.constant(b.clone()));
        let masked = loss_r(&t, &ta, &tb, false, None, Some(&mask)).unwrap().item();
        let want = brute_masked_mae(a.data(), b.data(), &mask);
        prop_assert!((masked - want).abs() <= 1e-12 * want.max(1.0));
        for squared in [false, true] {
            prop_assert!(loss_r(&t, &ta, &tb, squared, None, None).unwrap().item() >= 0.0);
            prop_assert!(loss_rp(&t, &ta, &tb, squared, None).unwrap().item() >= 0.0);
            prop_assert!(loss_stft_channels(&t, &ta, &tb, squared, false, SMALL_STFT).unwrap().item() >= 0.0);
        }
    }
}
