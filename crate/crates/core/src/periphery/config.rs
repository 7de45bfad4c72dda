use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PeripheryError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiberType {
    High,
    Medium,
    Low,
}

impl FiberType {
    pub const ALL: [FiberType; 3] = [FiberType::High, FiberType::Medium, FiberType::Low];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiddleEarParams {
    pub center_hz: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CochleaParams {
    /// Band-pass sections per channel.
    pub sections: usize,
    /// Section Q as a multiple of `cf / ERB(cf)`.
    pub q_scale: f64,
    /// Filter centres are clamped to this fraction of the sample rate.
    pub max_center_fraction: f64,
    /// Small-signal active gain of a normal channel.
    pub max_gain_db: f64,
    /// Linear gain of the passive path.
    pub passive_gain: f64,
    /// Active-path knee, in units of active-path output.
    pub knee: f64,
    /// Large-signal growth exponent of the active path, in (0, 1].
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IhcParams {
    /// Width of the softplus rectifier.
    pub smoothing: f64,
    pub cutoff_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberParams {
    /// Spikes/s in silence.
    pub spont_rate: f64,
    /// Drive above spontaneous at full saturation, spikes/s.
    pub sat_rate: f64,
    /// Half-saturation point of the Hill drive, in IHC output units.
    pub threshold: f64,
    pub hill_exponent: f64,
    pub tau_fast_s: f64,
    pub tau_slow_s: f64,
    /// Steady-state divisive strength of each adaptation pool.
    pub k_fast: f64,
    pub k_slow: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeripheryConfig {
    pub sample_rate_hz: f64,
    pub middle_ear: MiddleEarParams,
    pub cochlea: CochleaParams,
    pub ihc: IhcParams,
    /// High, medium and low spontaneous-rate fibers, in that order.
    pub fibers: [FiberParams; 3],
    pub context_left: usize,
    pub context_right: usize,
    /// The cropped length `L` must be a multiple of this.
    pub block: usize,
}

impl Default for PeripheryConfig {
    fn default() -> Self {
        let fiber = |spont_rate, sat_rate, threshold| FiberParams {
            spont_rate,
            sat_rate,
            threshold,
            hill_exponent: 2.0,
            tau_fast_s: 0.002,
            tau_slow_s: 0.06,
            k_fast: 1.0,
            k_slow: 0.6,
        };
        Self {
            sample_rate_hz: 20_000.0,
            middle_ear: MiddleEarParams { center_hz: 1000.0, q: 0.3 },
            cochlea: CochleaParams {
                sections: 2,
                q_scale: 0.65,
                max_center_fraction: 0.45,
                max_gain_db: 60.0,
                passive_gain: 1.0,
                knee: 1.59,
                exponent: 0.25,
            },
            ihc: IhcParams { smoothing: 0.02, cutoff_hz: 1000.0 },
            fibers: [fiber(70.0, 300.0, 0.1), fiber(10.0, 200.0, 0.5), fiber(0.1, 150.0, 1.5)],
            context_left: 7936,
            context_right: 256,
            block: 256,
        }
    }
}

impl PeripheryConfig {
    pub fn fiber(&self, t: FiberType) -> &FiberParams {
        &self.fibers[t.index()]
    }

    /// Resting IHC output, reached in silence.
    pub fn ihc_rest(&self) -> f64 {
        crate::ad::softplus(0.0, self.ihc.smoothing).0
    }

    pub fn validate(&self) -> Result<(), PeripheryError> {
        let bad = |m: String| Err(PeripheryError::Config(m));
        let fs = self.sample_rate_hz;
        if !(fs > 0.0) {
            return bad("sample rate must be positive".into());
        }
        if !(self.middle_ear.center_hz > 0.0 && self.middle_ear.center_hz < fs / 2.0 && self.middle_ear.q > 0.0) {
            return bad("middle-ear centre must lie in (0, fs/2) with positive Q".into());
        }
        let c = &self.cochlea;
        if c.sections == 0 || !(c.q_scale > 0.0) || !(c.max_center_fraction > 0.0 && c.max_center_fraction < 0.5) {
            return bad("cochlear filter parameters out of range".into());
        }
        if !(c.exponent > 0.0 && c.exponent <= 1.0) {
            return bad(format!("compression exponent {} not in (0, 1]", c.exponent));
        }
        if !(c.max_gain_db >= 35.0) || !(c.knee > 0.0) || !(c.passive_gain >= 0.0) {
            return bad("active gain must be at least 35 dB with a positive knee".into());
        }
        if !(self.ihc.smoothing > 0.0 && self.ihc.cutoff_hz > 0.0) {
            return bad("IHC smoothing and cutoff must be positive".into());
        }
        let rest = self.ihc_rest();
        for (t, f) in FiberType::ALL.iter().zip(&self.fibers) {
            if !(f.tau_fast_s > 0.0 && f.tau_slow_s > 0.0) {
                return bad(format!("{t:?} fiber time constants must be positive"));
            }
            if !(f.spont_rate >= 0.0 && f.sat_rate > 0.0 && f.threshold > 0.0 && f.hill_exponent > 0.0) {
                return bad(format!("{t:?} fiber rates and threshold out of range"));
            }
            if !(f.k_fast >= 0.0 && f.k_slow >= 0.0) {
                return bad(format!("{t:?} adaptation strengths must be non-negative"));
            }
            // These two bounds keep the drive and the divisive term positive,
            // hence every rate non-negative.
            let q0 = hill(rest, f.threshold, f.hill_exponent).0;
            if f.sat_rate * q0 > f.spont_rate || (f.k_fast + f.k_slow) * q0 >= 1.0 {
                return bad(format!("{t:?} fiber threshold is too close to the IHC resting value"));
            }
        }
        if self.block == 0 {
            return bad("block size must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn parameter_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Hill drive `v^n / (v^n + θ^n)` for `v ≥ 0` and its derivative.
pub(crate) fn hill(v: f64, theta: f64, n: f64) -> (f64, f64) {
    if v <= 0.0 {
        return (0.0, 0.0);
    }
    let vn = v.powf(n);
    let tn = theta.powf(n);
    let den = vn + tn;
    (vn / den, n * vn * tn / (v * den * den))
}

/// Equivalent rectangular bandwidth in Hz.
pub fn erb_hz(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}
