//! Envelope-following response to the 4 kHz SAM tone across modulation
//! depths and fiber-count profiles.
use hacomp::evalkit::{efr, sam_tone, EfrParams, SamStimulus};
use hacomp::periphery::{strided_subset, HearingProfile, Periphery};
use hacomp::trainer::pad_context;

fn main() {
    let p = Periphery::default();
    let fs = p.sample_rate();
    let sub = strided_subset(201, 10);
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "depth", "NH", "CS-7-0-0", "CS-13-0-0", "Flat35");
    for depth in [0.0, 0.25, 0.5, 1.0] {
        let x = sam_tone(&SamStimulus { depth, ..SamStimulus::default() }, fs).unwrap();
        let body = x.len().div_ceil(256) * 256;
        let padded = pad_context(&x, 7936, 256, 7936 + body + 256).unwrap();
        print!("{depth:>6.2}");
        for name in ["NH", "CS-7-0-0", "CS-13-0-0", "Flat35"] {
            let prof = HearingProfile::load(name).unwrap();
            let rp = p.simulate(&padded, &prof, &sub).unwrap().population();
            print!(" {:>8.3}", efr(&rp, fs, &EfrParams::default()).unwrap().efr_sum);
        }
        println!();
    }
}
