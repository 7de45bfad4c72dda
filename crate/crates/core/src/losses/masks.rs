//! Time masks that restrict the time-domain loss terms.
//!
//! Moving statistics use centred windows that shrink at the edges, so sample
//! `i` looks at `[i − w/2, i + w/2] ∩ [0, n)` with no padding.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::LossError;
use crate::ad::Array;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseThreshold {
    pub fraction: f64,
    pub rms_win: usize,
    pub extrema_win: usize,
}

impl Default for ResponseThreshold {
    fn default() -> Self {
        Self { fraction: 0.4, rms_win: 51, extrema_win: 1001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusThreshold {
    pub rms_win: usize,
    pub fraction: f64,
}

impl Default for StimulusThreshold {
    fn default() -> Self {
        Self { rms_win: 101, fraction: 0.01 }
    }
}

fn check_window(name: &str, w: usize, len: usize) -> Result<(), LossError> {
    if w == 0 || w % 2 == 0 {
        return Err(LossError::Spec(format!("{name} must be odd, got {w}")));
    }
    if w > len {
        return Err(LossError::Spec(format!("{name} of {w} exceeds the {len}-sample signal")));
    }
    Ok(())
}

fn check_fraction(f: f64) -> Result<(), LossError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(LossError::Spec(format!("threshold fraction {f} outside [0, 1]")));
    }
    Ok(())
}

impl ResponseThreshold {
    pub fn validate(&self) -> Result<(), LossError> {
        check_fraction(self.fraction)?;
        check_window("rms_win", self.rms_win, usize::MAX)?;
        check_window("extrema_win", self.extrema_win, usize::MAX)
    }
}

impl StimulusThreshold {
    pub fn validate(&self) -> Result<(), LossError> {
        check_fraction(self.fraction)?;
        check_window("rms_win", self.rms_win, usize::MAX)
    }
}

/// Centred moving RMS over `win` samples, computed from prefix sums of x².
pub fn moving_rms(x: &[f64], win: usize) -> Vec<f64> {
    let n = x.len();
    let h = win / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v * v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(n);
            ((prefix[hi] - prefix[lo]).max(0.0) / (hi - lo) as f64).sqrt()
        })
        .collect()
}

/// Centred moving (min, max) over `win` samples using monotone deques.
pub fn moving_extrema(x: &[f64], win: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let h = win / 2;
    let mut mins = vec![0.0; n];
    let mut maxs = vec![0.0; n];
    let mut qmin: VecDeque<usize> = VecDeque::new();
    let mut qmax: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let hi = (i + h + 1).min(n);
        while next < hi {
            while qmin.back().is_some_and(|&j| x[j] >= x[next]) {
                qmin.pop_back();
            }
            qmin.push_back(next);
            while qmax.back().is_some_and(|&j| x[j] <= x[next]) {
                qmax.pop_back();
            }
            qmax.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(h);
        while qmin.front().is_some_and(|&j| j < lo) {
            qmin.pop_front();
        }
        while qmax.front().is_some_and(|&j| j < lo) {
            qmax.pop_front();
        }
        mins[i] = x[qmin[0]];
        maxs[i] = x[qmax[0]];
    }
    (mins, maxs)
}

/// Per-sample mask of one response: `r > min + fraction·(max − min)` where
/// the extrema are taken over the moving RMS. A constant response is
/// entirely excluded.
pub fn response_threshold_row(r: &[f64], p: &ResponseThreshold) -> Result<Vec<bool>, LossError> {
    check_fraction(p.fraction)?;
    check_window("rms_win", p.rms_win, r.len())?;
    check_window("extrema_win", p.extrema_win, r.len())?;
    let rms = moving_rms(r, p.rms_win);
    let (lo, hi) = moving_extrema(&rms, p.extrema_win);
    Ok(r.iter().enumerate().map(|(i, &v)| v > lo[i] + p.fraction * (hi[i] - lo[i])).collect())
}

/// Row-major mask for a `[C × L]` neurogram, or a `[L]` population response.
pub fn response_threshold(r: &Array, p: &ResponseThreshold) -> Result<Vec<bool>, LossError> {
    let (rows, cols) = r.rows_cols();
    let mut out = Vec::with_capacity(rows * cols);
    for c in 0..rows {
        out.extend(response_threshold_row(r.row(c), p)?);
    }
    Ok(out)
}

/// Mask over the stimulus: moving RMS ≥ `fraction` of its maximum. Sample
/// `i` of the cropped stimulus gates sample `i` of every response channel.
/// An all-zero stimulus gives an all-false mask.
pub fn stimulus_threshold(x: &[f64], p: &StimulusThreshold) -> Result<Vec<bool>, LossError> {
    check_fraction(p.fraction)?;
    check_window("rms_win", p.rms_win, x.len())?;
    let rms = moving_rms(x, p.rms_win);
    let peak = rms.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(vec![false; x.len()]);
    }
    let t = p.fraction * peak;
    Ok(rms.iter().map(|&v| v >= t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrema_match_naive_scan() {
        let x: Vec<f64> = (0..97).map(|i| ((i * 37) % 23) as f64 - 0.5 * (i % 5) as f64).collect();
        for w in [1, 3, 7, 21, 97] {
            let (mn, mx) = moving_extrema(&x, w);
            let h = w / 2;
            for i in 0..x.len() {
                let s = &x[i.saturating_sub(h)..(i + h + 1).min(x.len())];
                assert_eq!(mn[i], s.iter().cloned().fold(f64::INFINITY, f64::min));
                assert_eq!(mx[i], s.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }

    #[test]
    fn shrinking_window_at_edges() {
        let rms = moving_rms(&[3.0, 0.0, 0.0, 0.0], 3);
        assert_eq!(rms[0], (9.0f64 / 2.0).sqrt());
        assert_eq!(rms[1], (9.0f64 / 3.0).sqrt());
        assert_eq!(rms[3], 0.0);
    }

    #[test]
    fn even_or_oversized_windows_are_rejected() {
        let p = ResponseThreshold { rms_win: 4, ..Default::default() };
        assert!(response_threshold_row(&[0.0; 2000], &p).is_err());
        assert!(response_threshold_row(&[0.0; 500], &ResponseThreshold::default()).is_err());
        assert!(stimulus_threshold(&[0.0; 50], &StimulusThreshold::default()).is_err());
    }
}
