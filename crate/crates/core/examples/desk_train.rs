//! Short training run on the synthetic corpus. Arguments: epochs, sentences,
//! output checkpoint path (defaults 1, 4, desk_model.dnnha).
use std::path::PathBuf;

use hacomp::dnnha::save_checkpoint;
use hacomp::trainer::{prepare_corpus, synthetic_corpus, train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs = args.first().map_or(1, |a| a.parse().expect("epochs"));
    let sentences = args.get(1).map_or(4, |a| a.parse().expect("sentences"));
    let out = PathBuf::from(args.get(2).map_or("desk_model.dnnha", String::as_str));
    let cfg = TrainConfig { hi_profile: "Slope25".into(), epochs, ..TrainConfig::desk() };
    let p = cfg.periphery().unwrap();
    let data = prepare_corpus(&synthetic_corpus(sentences, 1, 1.0, 1.5), &cfg.pad_spec()).unwrap();
    let outcome = train(&cfg, &data, &p, None, &mut |row| {
        let terms: Vec<String> = row.terms.iter().map(|t| format!("{}={:.3e}", t.label, t.weighted)).collect();
        println!("epoch {} step {:>3} {:<8} total {:.4e} {}", row.epoch, row.step, row.source, row.total, terms.join(" "));
    })
    .unwrap();
    println!("epoch medians {:?}", outcome.epoch_medians());
    save_checkpoint(&out, &outcome.checkpoint).unwrap();
    println!("wrote {}", out.display());
}
