//! Linear recursive filtering along the time axis.
//!
//! Filters start from rest (zero state). Because a causal LTI filter applied
//! from rest is a lower-triangular Toeplitz operator, its adjoint is the same
//! recursion run over the time-reversed gradient.

use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::{AdError, Array};

/// Second-order section
/// `y[n] = b0·x[n] + b1·x[n−1] + b2·x[n−2] − a1·y[n−1] − a2·y[n−2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad { b0: 1.0, b1: 0.0, b2: 0.0, a1: 0.0, a2: 0.0 };

    /// One-pole lowpass with unit DC gain, `y[n] = (1−p)·x[n] + p·y[n−1]`,
    /// `p = exp(−2π·fc/fs)`.
    pub fn one_pole_lowpass(cutoff_hz: f64, fs: f64) -> Self {
        let p = (-2.0 * std::f64::consts::PI * cutoff_hz / fs).exp();
        Self { b0: 1.0 - p, b1: 0.0, b2: 0.0, a1: -p, a2: 0.0 }
    }

    /// One-pole lowpass with time constant `tau` seconds.
    pub fn leaky_integrator(tau: f64, fs: f64) -> Self {
        let p = (-1.0 / (tau * fs)).exp();
        Self { b0: 1.0 - p, b1: 0.0, b2: 0.0, a1: -p, a2: 0.0 }
    }

    /// RBJ band-pass with 0 dB peak gain at `f0`.
    pub fn bandpass(f0: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: alpha / a0,
            b1: 0.0,
            b2: -alpha / a0,
            a1: -2.0 * w0.cos() / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> (f64, f64) {
        let w = 2.0 * std::f64::consts::PI * f / fs;
        let z1 = (w.cos(), -w.sin());
        let z2 = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (self.b0 + self.b1 * z1.0 + self.b2 * z2.0, self.b1 * z1.1 + self.b2 * z2.1);
        let den = (1.0 + self.a1 * z1.0 + self.a2 * z2.0, self.a1 * z1.1 + self.a2 * z2.1);
        let d2 = den.0 * den.0 + den.1 * den.1;
        ((num.0 * den.0 + num.1 * den.1) / d2, (num.1 * den.0 - num.0 * den.1) / d2)
    }

    pub fn gain(&self, f: f64, fs: f64) -> f64 {
        let (re, im) = self.response(f, fs);
        re.hypot(im)
    }

    /// Filters `x` in place, starting from rest.
    pub fn apply(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let x0 = *v;
            let y0 = self.b0 * x0 + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            *v = y0;
        }
    }
}

/// Applies a cascade of sections to one row.
pub fn filter_cascade(x: &mut [f64], cascade: &[Biquad]) {
    for s in cascade {
        s.apply(x);
    }
}

fn adjoint_cascade(g: &mut [f64], cascade: &[Biquad]) {
    g.reverse();
    for s in cascade.iter().rev() {
        s.apply(g);
    }
    g.reverse();
}

impl Tape {
    /// Filters every row of a `[C × T]` (or `[T]`) array with its own cascade.
    /// `cascades` holds either one cascade per row or a single shared cascade.
    pub fn iir(&self, a: &Var, cascades: &[Vec<Biquad>]) -> Result<Var, AdError> {
        let (rows, cols) = a.value().rows_cols();
        if cascades.len() != rows && cascades.len() != 1 {
            return Err(AdError::Shape(format!(
                "iir: {} filter cascades for {} rows",
                cascades.len(),
                rows
            )));
        }
        let cascades = cascades.to_vec();
        let shared = cascades.len() == 1;
        let mut out = a.data().to_vec();
        for (r, row) in out.chunks_mut(cols.max(1)).enumerate() {
            filter_cascade(row, &cascades[if shared { 0 } else { r }]);
        }
        let value = Array::new(a.shape().to_vec(), out)?;
        Ok(self.record(&[a], value, move |g| {
            let mut ga = g.to_vec();
            for (r, row) in ga.chunks_mut(cols.max(1)).enumerate() {
                adjoint_cascade(row, &cascades[if shared { 0 } else { r }]);
            }
            vec![Some(ga)]
        }))
    }
}
