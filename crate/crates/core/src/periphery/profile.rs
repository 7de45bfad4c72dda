use serde::{Deserialize, Serialize};

use super::{CFMap, PeripheryError};

/// ANF counts per fiber type, applied identically at every CF.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberCounts {
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

impl FiberCounts {
    pub const NH: FiberCounts = FiberCounts { high: 13.0, medium: 3.0, low: 3.0 };

    pub fn new(high: f64, medium: f64, low: f64) -> Self {
        Self { high, medium, low }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.high, self.medium, self.low]
    }
}

/// OHC gain loss, either by anchors interpolated linearly in log-frequency
/// (held constant outside the anchor range) or as one value per CF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audiogram {
    /// `(frequency_hz, loss_db)`, ascending in frequency. Empty means no loss.
    Anchors(Vec<(f64, f64)>),
    PerCf(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HearingProfile {
    pub name: String,
    pub audiogram: Audiogram,
    pub fiber_counts: FiberCounts,
}

/// Loss that is 0 up to 1 kHz, rises by `hl_at_8k / 3` per octave and is
/// held at `hl_at_8k` above 8 kHz.
pub fn sloping_audiogram(hl_at_8k_db: f64, cf_map: &CFMap) -> Vec<f64> {
    cf_map.cf_hz().iter().map(|&f| sloping_loss(hl_at_8k_db, f)).collect()
}

pub fn sloping_loss(hl_at_8k_db: f64, f: f64) -> f64 {
    if f <= 1000.0 {
        0.0
    } else if f <= 8000.0 {
        hl_at_8k_db * (f / 1000.0).log2() / 3.0
    } else {
        hl_at_8k_db
    }
}

impl Audiogram {
    pub fn loss_at(&self, f: f64) -> f64 {
        match self {
            Audiogram::Anchors(a) => interp_log(a, f),
            Audiogram::PerCf(_) => f64::NAN,
        }
    }

    pub fn resolve(&self, cf_map: &CFMap) -> Result<Vec<f64>, PeripheryError> {
        let loss = match self {
            Audiogram::Anchors(a) => {
                if a.windows(2).any(|w| !(w[1].0 > w[0].0)) || a.iter().any(|p| !(p.0 > 0.0)) {
                    return Err(PeripheryError::Profile("audiogram anchors must have ascending positive frequencies".into()));
                }
                cf_map.cf_hz().iter().map(|&f| interp_log(a, f)).collect::<Vec<_>>()
            }
            Audiogram::PerCf(v) => {
                if v.len() != cf_map.len() {
                    return Err(PeripheryError::Profile(format!(
                        "per-CF audiogram has {} values for {} channels",
                        v.len(),
                        cf_map.len()
                    )));
                }
                v.clone()
            }
        };
        if loss.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(PeripheryError::Profile("OHC loss must be finite and non-negative".into()));
        }
        Ok(loss)
    }
}

fn interp_log(anchors: &[(f64, f64)], f: f64) -> f64 {
    match anchors {
        [] => 0.0,
        [only] => only.1,
        _ => {
            let first = anchors[0];
            let last = anchors[anchors.len() - 1];
            if f <= first.0 {
                return first.1;
            }
            if f >= last.0 {
                return last.1;
            }
            let j = anchors.iter().position(|a| a.0 >= f).unwrap();
            let (f0, l0) = anchors[j - 1];
            let (f1, l1) = anchors[j];
            let w = (f / f0).ln() / (f1 / f0).ln();
            l0 + w * (l1 - l0)
        }
    }
}

impl HearingProfile {
    pub fn normal() -> Self {
        Self { name: "NH".into(), audiogram: Audiogram::Anchors(vec![]), fiber_counts: FiberCounts::NH }
    }

    pub fn validate(&self, cf_map: &CFMap) -> Result<(), PeripheryError> {
        self.audiogram.resolve(cf_map)?;
        let c = self.fiber_counts.as_array();
        if c.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(PeripheryError::Profile("fiber counts must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Resolves a preset name. Single presets are `NH`, `Slope<dB>`,
    /// `Flat<dB>` and `CS-<H>-<M>-<L>`; an OHC preset and a CS preset can be
    /// joined with `+`, as in `Slope35+CS-7-0-0`.
    pub fn preset(name: &str) -> Result<Self, PeripheryError> {
        let mut audiogram = Audiogram::Anchors(vec![]);
        let mut counts = FiberCounts::NH;
        let (mut seen_ohc, mut seen_cs) = (false, false);
        for part in name.split('+') {
            let unknown = || PeripheryError::UnknownPreset(name.to_string());
            if part == "NH" {
                continue;
            }
            if let Some(rest) = part.strip_prefix("CS-") {
                let v: Vec<f64> = rest.split('-').map(str::parse).collect::<Result<_, _>>().map_err(|_| unknown())?;
                if v.len() != 3 || seen_cs {
                    return Err(unknown());
                }
                counts = FiberCounts::new(v[0], v[1], v[2]);
                seen_cs = true;
            } else if let Some(db) = part.strip_prefix("Slope") {
                let db: f64 = db.parse().map_err(|_| unknown())?;
                if seen_ohc {
                    return Err(unknown());
                }
                audiogram = Audiogram::Anchors(vec![(1000.0, 0.0), (8000.0, db)]);
                seen_ohc = true;
            } else if let Some(db) = part.strip_prefix("Flat") {
                let db: f64 = db.parse().map_err(|_| unknown())?;
                if seen_ohc {
                    return Err(unknown());
                }
                audiogram = Audiogram::Anchors(vec![(1000.0, db)]);
                seen_ohc = true;
            } else {
                return Err(unknown());
            }
        }
        let profile = Self { name: name.to_string(), audiogram, fiber_counts: counts };
        profile.validate(&CFMap::standard())?;
        Ok(profile)
    }

    /// Names shipped as presets.
    pub fn preset_names() -> &'static [&'static str] {
        &["NH", "Slope35", "Slope25", "Flat35", "CS-7-0-0", "CS-13-0-0", "Slope35+CS-7-0-0", "Slope25+CS-7-0-0"]
    }

    /// A preset name or a path to a JSON profile.
    pub fn load(name_or_path: &str) -> Result<Self, PeripheryError> {
        match Self::preset(name_or_path) {
            Ok(p) => Ok(p),
            Err(PeripheryError::UnknownPreset(_)) if std::path::Path::new(name_or_path).is_file() => {
                let text = std::fs::read_to_string(name_or_path)
                    .map_err(|e| PeripheryError::Profile(format!("{name_or_path}: {e}")))?;
                let p: HearingProfile = serde_json::from_str(&text)
                    .map_err(|e| PeripheryError::Profile(format!("{name_or_path}: {e}")))?;
                p.validate(&CFMap::standard())?;
                Ok(p)
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(profile: &str, f: f64) -> f64 {
        HearingProfile::preset(profile).unwrap().audiogram.loss_at(f)
    }

    #[test]
    fn sloping_values_at_two_four_six_khz() {
        for (hl, want) in [(35.0, [11.66, 23.33, 30.16]), (25.0, [8.33, 16.66, 21.54])] {
            for (f, w) in [2000.0, 4000.0, 6000.0].into_iter().zip(want) {
                let l = sloping_loss(hl, f);
                assert!((l - w).abs() < 0.01, "{hl} dB at {f}: {l}");
                assert!((at(&format!("Slope{hl}"), f) - l).abs() < 1e-12);
            }
        }
        for f in [100.0, 500.0, 1000.0] {
            assert_eq!(sloping_loss(35.0, f), 0.0);
        }
        assert_eq!(sloping_loss(35.0, 11000.0), 35.0);
    }

    #[test]
    fn presets() {
        let nh = HearingProfile::preset("NH").unwrap();
        assert_eq!(nh.fiber_counts, FiberCounts::NH);
        assert!(nh.audiogram.resolve(&CFMap::standard()).unwrap().iter().all(|&l| l == 0.0));
        let flat = HearingProfile::preset("Flat35").unwrap();
        assert!(flat.audiogram.resolve(&CFMap::standard()).unwrap().iter().all(|&l| l == 35.0));
        let cs = HearingProfile::preset("CS-13-0-0").unwrap();
        assert_eq!(cs.fiber_counts, FiberCounts::new(13.0, 0.0, 0.0));
        let both = HearingProfile::preset("Slope35+CS-7-0-0").unwrap();
        assert_eq!(both.fiber_counts, FiberCounts::new(7.0, 0.0, 0.0));
        assert!((both.audiogram.loss_at(4000.0) - 23.333).abs() < 1e-3);
        for bad in ["Slope", "CS-1-2", "Foo", "Slope35+Flat35"] {
            assert!(matches!(HearingProfile::preset(bad), Err(PeripheryError::UnknownPreset(_))), "{bad}");
        }
        for name in HearingProfile::preset_names() {
            HearingProfile::preset(name).unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let p = HearingProfile::preset("Slope25+CS-7-0-0").unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<HearingProfile>(&s).unwrap(), p);
        let per_cf = HearingProfile {
            name: "custom".into(),
            audiogram: Audiogram::PerCf(vec![1.0; 3]),
            fiber_counts: FiberCounts::NH,
        };
        assert!(per_cf.validate(&CFMap::standard()).is_err());
        assert!(serde_json::from_str::<HearingProfile>(r#"{"name":"x","audiogram":{"anchors":[]},"fiber_counts":{"high":1,"medium":0,"low":0},"extra":1}"#).is_err());
    }
}
