//! Every loss preset between the normal-hearing response and the unprocessed
//! impaired response to one sentence, term by term.
use hacomp::ad::{Array, Tape};
use hacomp::losses::{compose, Bundle, LossSpec};
use hacomp::periphery::HearingProfile;
use hacomp::trainer::{prepare, synthetic_corpus, TrainConfig};

fn main() {
    let cfg = TrainConfig::desk();
    let p = cfg.periphery().unwrap();
    let s = &synthetic_corpus(1, 11, 1.2, 1.2)[0];
    let item = prepare(&s.samples, s.sample_rate, &s.name, &cfg.pad_spec()).unwrap();
    let nh = p.simulate(&item.waveform, &HearingProfile::normal(), &cfg.cf_subset).unwrap().rates;
    let hi = p.simulate(&item.waveform, &HearingProfile::load("Slope35+CS-7-0-0").unwrap(), &cfg.cf_subset).unwrap().rates;
    let cf = p.cf_map().subset(&cfg.cf_subset).unwrap();
    let t = Tape::new();
    let x = t.constant(Array::vector(item.waveform[cfg.context_left..cfg.context_left + cfg.body_len()].to_vec()));
    let (r, r_hat) = (t.constant(nh), t.constant(hi));
    let b = Bundle { x: &x, x_hat: &x, r: &r, r_hat: &r_hat, cf_hz: cf.cf_hz(), sample_rate_hz: p.sample_rate() };
    for name in LossSpec::preset_names() {
        for variant in [name.to_string(), format!("{name}+Tx+Tr+FE")] {
            let v = compose(&t, &LossSpec::preset(&variant).unwrap(), &b).unwrap();
            let terms: Vec<String> = v.terms.iter().map(|t| format!("{}={:.3e}", t.label, t.weighted)).collect();
            println!("{variant:<22} total {:>11.4e}  {}", v.value(), terms.join(" "));
        }
    }
}
