use serde::{Deserialize, Serialize};

use super::PeripheryError;

/// Human Greenwood constants for `f(x) = A·(10^{a·x} − k)`, `x ∈ [0, 1]`
/// from apex to base.
pub const GREENWOOD_A: f64 = 165.4;
pub const GREENWOOD_ALPHA: f64 = 2.1;
pub const GREENWOOD_K: f64 = 0.88;

/// Channel centre frequencies in ascending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CFMap {
    cf_hz: Vec<f64>,
}

pub fn greenwood_frequency(x: f64) -> f64 {
    GREENWOOD_A * (10f64.powf(GREENWOOD_ALPHA * x) - GREENWOOD_K)
}

pub fn greenwood_position(f: f64) -> f64 {
    (f / GREENWOOD_A + GREENWOOD_K).log10() / GREENWOOD_ALPHA
}

/// `n` CFs at uniformly spaced Greenwood positions between `f_min` and
/// `f_max`; the endpoints are exact.
pub fn greenwood_cf(n: usize, f_min: f64, f_max: f64) -> Result<CFMap, PeripheryError> {
    if n < 2 || !(f_min > 0.0) || !(f_max > f_min) {
        return Err(PeripheryError::Config(format!(
            "greenwood_cf needs n >= 2 and 0 < f_min < f_max, got n={n}, [{f_min}, {f_max}]"
        )));
    }
    let (x0, x1) = (greenwood_position(f_min), greenwood_position(f_max));
    let mut cf: Vec<f64> = (0..n)
        .map(|i| greenwood_frequency(x0 + (x1 - x0) * i as f64 / (n - 1) as f64))
        .collect();
    cf[0] = f_min;
    cf[n - 1] = f_max;
    Ok(CFMap { cf_hz: cf })
}

impl CFMap {
    /// The 201-channel 112 Hz to 12 kHz map.
    pub fn standard() -> Self {
        greenwood_cf(201, 112.0, 12000.0).expect("valid default range")
    }

    pub fn from_frequencies(cf_hz: Vec<f64>) -> Result<Self, PeripheryError> {
        if cf_hz.is_empty() || cf_hz.windows(2).any(|w| !(w[1] > w[0])) || cf_hz.iter().any(|f| !(*f > 0.0)) {
            return Err(PeripheryError::Config("CFs must be positive and strictly ascending".into()));
        }
        Ok(Self { cf_hz })
    }

    pub fn len(&self) -> usize {
        self.cf_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cf_hz.is_empty()
    }

    pub fn cf_hz(&self) -> &[f64] {
        &self.cf_hz
    }

    /// Sub-map over `indices`, which must be strictly ascending.
    pub fn subset(&self, indices: &[usize]) -> Result<CFMap, PeripheryError> {
        check_subset(indices, self.len())?;
        Ok(CFMap { cf_hz: indices.iter().map(|&i| self.cf_hz[i]).collect() })
    }
}

/// Every `step`-th channel starting at 0, e.g. 21 of 201 for `step = 10`.
pub fn strided_subset(n_channels: usize, step: usize) -> Vec<usize> {
    (0..n_channels).step_by(step.max(1)).collect()
}

pub(crate) fn check_subset(indices: &[usize], n: usize) -> Result<(), PeripheryError> {
    if indices.is_empty() {
        return Err(PeripheryError::Subset("empty CF subset".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(PeripheryError::Subset(format!("channel index {bad} out of range for {n} channels")));
    }
    if indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PeripheryError::Subset("CF subset must be strictly ascending".into()));
    }
    Ok(())
}
