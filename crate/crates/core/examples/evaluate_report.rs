//! Unprocessed evaluation across levels and SNRs. Pass a checkpoint path to
//! evaluate a trained model instead.
use hacomp::dnnha::load_checkpoint;
use hacomp::evalkit::{evaluate, EvalConfig, Evaluator};
use hacomp::periphery::HearingProfile;
use hacomp::trainer::{synthetic_corpus, TrainConfig};

fn main() {
    let ckpt = std::env::args().nth(1).map(|p| load_checkpoint(p.as_ref()).unwrap());
    let p = TrainConfig::desk().periphery().unwrap();
    let ev = Evaluator {
        periphery: &p,
        nh: HearingProfile::normal(),
        hi: HearingProfile::load("Slope35+CS-7-0-0").unwrap(),
        model: ckpt.as_ref().map(|c| &c.params),
        config: EvalConfig { snrs_db: vec![-6.0, -12.0], ..EvalConfig::desk() },
    };
    let report = evaluate(&ev, &synthetic_corpus(3, 99, 1.0, 1.5), None).unwrap();
    println!("{:>6} {:>6} {:>12} {:>12}", "level", "SNR", "unprocessed", "processed");
    for a in &report.aggregates {
        let snr = a.snr_db.map_or("quiet".to_string(), |s| format!("{s}"));
        let pr = a.nrmse_processed_pct.map_or("-".to_string(), |v| format!("{v:.2}%"));
        println!("{:>6} {snr:>6} {:>11.2}% {pr:>12}", a.level_db, a.nrmse_unprocessed_pct);
    }
    if let Some(e) = &report.efr {
        println!("EFR: NH {:.2} nV, impaired {:.2} nV, processed {:?}", e.nh, e.hi_unprocessed, e.hi_processed);
    }
    report.write_json(std::io::stdout().lock()).unwrap();
    println!();
}
