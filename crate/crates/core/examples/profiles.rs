//! Hearing-profile presets: per-CF outer-hair-cell loss and fiber counts,
//! plus an audiogram built from anchor points.
use hacomp::periphery::{strided_subset, Audiogram, CFMap, FiberCounts, HearingProfile};

fn main() {
    let cf = CFMap::standard().subset(&strided_subset(201, 40)).unwrap();
    print!("{:<20} {:>10}", "profile", "H/M/L");
    for f in cf.cf_hz() {
        print!(" {:>7.0}", f);
    }
    println!();
    let custom = HearingProfile {
        name: "notch".into(),
        audiogram: Audiogram::Anchors(vec![(2000.0, 0.0), (4000.0, 40.0), (6000.0, 10.0)]),
        fiber_counts: FiberCounts::new(13.0, 1.0, 0.0),
    };
    let mut all: Vec<HearingProfile> = HearingProfile::preset_names().iter().map(|n| HearingProfile::preset(n).unwrap()).collect();
    all.push(custom);
    for p in &all {
        let loss = p.audiogram.resolve(&cf).unwrap();
        let c = p.fiber_counts.as_array();
        print!("{:<20} {:>10}", p.name, format!("{}/{}/{}", c[0], c[1], c[2]));
        for l in loss {
            print!(" {:>7.1}", l);
        }
        println!();
    }
}
