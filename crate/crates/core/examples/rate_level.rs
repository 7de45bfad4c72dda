//! Rate-level functions of the three fiber types at a 1 kHz and a 4 kHz
//! channel, plus the onset-to-steady ratio of the high-SR fiber.
use hacomp::ad::{Array, Tape};
use hacomp::periphery::{FiberType, HearingProfile, Periphery};

fn tone(freq: f64, fs: f64, n: usize, level_db: f64, onset: usize) -> Vec<f64> {
    let amp = 2e-5 * 10f64.powf(level_db / 20.0) * 2f64.sqrt();
    (0..n)
        .map(|i| if i < onset { 0.0 } else { amp * (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin() })
        .collect()
}

fn main() {
    let p = Periphery::default();
    let fs = p.sample_rate();
    let onset = 2000;
    let n = 8000;
    for (ch, label) in [(73usize, "~1 kHz"), (150, "~4 kHz")] {
        let cf = p.cf_map().cf_hz()[ch];
        println!("channel {ch} ({label}, cf = {cf:.0} Hz)");
        println!("{:>6} {:>9} {:>9} {:>9} {:>8} {:>8}", "dB SPL", "H", "M", "L", "H onset", "HI35 H");
        for level in (0..=100).step_by(10) {
            let x = tone(cf, fs, n, level as f64, onset);
            let mut row = Vec::new();
            let mut onset_peak = 0.0;
            for (profile, fibers) in [(HearingProfile::normal(), &FiberType::ALL[..]), (HearingProfile::preset("Flat35").unwrap(), &FiberType::ALL[..1])] {
                let ch_set = p.channels(&profile, &[ch]).unwrap();
                let t = Tape::new();
                let me = p.middle_ear(&t, &t.constant(Array::vector(x.clone()))).unwrap();
                let bm = p.cochlear_stage(&t, &me, &ch_set).unwrap();
                let ihc = p.ihc_stage(&t, &bm).unwrap();
                for &f in fibers {
                    let r = p.anf_stage(&t, &ihc, f).unwrap();
                    let tail = &r.data()[n - 1000..];
                    row.push(tail.iter().sum::<f64>() / tail.len() as f64);
                    if f == FiberType::High && onset_peak == 0.0 {
                        onset_peak = r.data()[onset..onset + 400].iter().cloned().fold(0.0, f64::max);
                    }
                }
            }
            println!(
                "{level:>6} {:>9.2} {:>9.2} {:>9.2} {:>8.2} {:>8.2}",
                row[0], row[1], row[2], onset_peak / row[0], row[3]
            );
        }
    }
}
