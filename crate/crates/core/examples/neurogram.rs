//! Neurogram of a synthetic sentence on the 21 default channels for the
//! normal-hearing profile and two impaired ones.
use hacomp::periphery::{strided_subset, HearingProfile, Periphery};
use hacomp::trainer::{prepare, synthetic_corpus, TrainConfig};

fn main() {
    let cfg = TrainConfig::desk();
    let p = Periphery::default();
    let s = &synthetic_corpus(1, 7, 1.0, 1.0)[0];
    let item = prepare(&s.samples, s.sample_rate, &s.name, &cfg.pad_spec()).unwrap();
    let sub = strided_subset(201, 10);
    let cf = p.cf_map().subset(&sub).unwrap();
    let profiles = ["NH", "Slope35", "CS-7-0-0"];
    let grams: Vec<_> = profiles.iter().map(|n| p.simulate(&item.waveform, &HearingProfile::load(n).unwrap(), &sub).unwrap()).collect();
    println!("mean rate over the {}-sample body (spikes/s, summed over fibers)", grams[0].n_samples());
    println!("{:>8} {:>10} {:>10} {:>10}", "CF (Hz)", profiles[0], profiles[1], profiles[2]);
    for (c, f) in cf.cf_hz().iter().enumerate() {
        let means: Vec<f64> = grams.iter().map(|g| g.rates.row(c).iter().sum::<f64>() / g.n_samples() as f64).collect();
        println!("{f:>8.0} {:>10.1} {:>10.1} {:>10.1}", means[0], means[1], means[2]);
    }
    for (n, g) in profiles.iter().zip(&grams) {
        let rp = g.population();
        println!("{n}: population peak {:.0}, mean {:.0}", rp.iter().cloned().fold(0.0, f64::max), rp.iter().sum::<f64>() / rp.len() as f64);
    }
}
