//! Differentiable surrogate of the auditory periphery.
//!
//! Signal chain per channel: middle-ear band-pass, cochlear band-pass cascade
//! at the CF, dual-path compression whose active gain is reduced by the OHC
//! loss, softplus rectifier with a one-pole IHC lowpass, then three
//! adapting ANF populations weighted by the fiber counts.
//!
//! Units: input in pascals, output in spikes/s. Channels are in ascending CF
//! order. The model has no trainable state; gradients only flow to the input.

mod cfmap;
mod config;
mod profile;

pub use cfmap::{greenwood_cf, greenwood_frequency, greenwood_position, strided_subset, CFMap};
pub use config::{erb_hz, CochleaParams, FiberParams, FiberType, IhcParams, MiddleEarParams, PeripheryConfig};
pub use profile::{sloping_audiogram, sloping_loss, Audiogram, FiberCounts, HearingProfile};

use crate::ad::{AdError, Array, Biquad, ReduceKind, Tape, Var};
use config::hill;

#[derive(Debug, thiserror::Error)]
pub enum PeripheryError {
    #[error("invalid periphery configuration: {0}")]
    Config(String),
    #[error("invalid hearing profile: {0}")]
    Profile(String),
    #[error("unknown hearing-profile preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid CF subset: {0}")]
    Subset(String),
    #[error("input of {got} samples lacks context: need {left} leading + {right} trailing samples and a body that is a positive multiple of {block}")]
    Context { got: usize, left: usize, right: usize, block: usize },
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// CF × time firing rates in spikes/s.
#[derive(Clone, Debug, PartialEq)]
pub struct Neurogram {
    pub rates: Array,
    pub cf_map: CFMap,
    pub sample_rate_hz: f64,
}

impl Neurogram {
    pub fn n_channels(&self) -> usize {
        self.rates.shape()[0]
    }

    pub fn n_samples(&self) -> usize {
        self.rates.shape()[1]
    }

    /// Sum over channels.
    pub fn population(&self) -> Vec<f64> {
        population_sum(&self.rates)
    }
}

pub(crate) fn population_sum(rates: &Array) -> Vec<f64> {
    let (rows, cols) = rates.rows_cols();
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        for (o, v) in out.iter_mut().zip(rates.row(r)) {
            *o += v;
        }
    }
    out
}

/// The channels a simulation runs on, with their resolved OHC losses.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub indices: Vec<usize>,
    pub cf_hz: Vec<f64>,
    pub loss_db: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Periphery {
    config: PeripheryConfig,
    cf_map: CFMap,
}

impl Default for Periphery {
    fn default() -> Self {
        Self::new(PeripheryConfig::default(), CFMap::standard()).expect("default periphery is valid")
    }
}

/// Rows processed together by the gradient-free path.
const CHUNK: usize = 16;

impl Periphery {
    pub fn new(config: PeripheryConfig, cf_map: CFMap) -> Result<Self, PeripheryError> {
        config.validate()?;
        Ok(Self { config, cf_map })
    }

    pub fn config(&self) -> &PeripheryConfig {
        &self.config
    }

    pub fn cf_map(&self) -> &CFMap {
        &self.cf_map
    }

    pub fn sample_rate(&self) -> f64 {
        self.config.sample_rate_hz
    }

    pub fn parameter_hash(&self) -> String {
        self.config.parameter_hash()
    }

    pub fn channels(&self, profile: &HearingProfile, subset: &[usize]) -> Result<ChannelSet, PeripheryError> {
        profile.validate(&self.cf_map)?;
        cfmap::check_subset(subset, self.cf_map.len())?;
        let loss = profile.audiogram.resolve(&self.cf_map)?;
        Ok(ChannelSet {
            indices: subset.to_vec(),
            cf_hz: subset.iter().map(|&i| self.cf_map.cf_hz()[i]).collect(),
            loss_db: subset.iter().map(|&i| loss[i]).collect(),
        })
    }

    pub fn middle_ear_filter(&self) -> Biquad {
        let me = &self.config.middle_ear;
        Biquad::bandpass(me.center_hz, me.q, self.config.sample_rate_hz)
    }

    /// Linear band-pass on a 1-D signal.
    pub fn middle_ear(&self, tape: &Tape, x: &Var) -> Result<Var, PeripheryError> {
        Ok(tape.iir(x, &[vec![self.middle_ear_filter()]])?)
    }

    /// Band-pass cascade for one channel.
    pub fn cochlear_filters(&self, cf: f64) -> Vec<Biquad> {
        let c = &self.config.cochlea;
        let fs = self.config.sample_rate_hz;
        let fc = cf.min(c.max_center_fraction * fs);
        let q = c.q_scale * fc / erb_hz(fc);
        vec![Biquad::bandpass(fc, q, fs); c.sections]
    }

    /// Small-signal active gain (linear) of a channel with the given loss.
    pub fn active_gain(&self, loss_db: f64) -> f64 {
        10f64.powf((self.config.cochlea.max_gain_db - loss_db) / 20.0)
    }

    /// Basilar-membrane response `[C × T]` from a middle-ear output `[T]`.
    pub fn cochlear_stage(&self, tape: &Tape, me: &Var, ch: &ChannelSet) -> Result<Var, PeripheryError> {
        let filters: Vec<Vec<Biquad>> = ch.cf_hz.iter().map(|&f| self.cochlear_filters(f)).collect();
        let rows = tape.repeat_rows(me, ch.cf_hz.len());
        let bp = tape.iir(&rows, &filters)?;
        let gains: Vec<f64> = ch.loss_db.iter().map(|&l| self.active_gain(l)).collect();
        let c = self.config.cochlea.clone();
        let e = (1.0 - c.exponent) / 2.0;
        let inv_knee2 = 1.0 / (c.knee * c.knee);
        Ok(tape.pointwise(&bp, move |r, v| {
            let g = gains[r];
            let u = g * v;
            let w = 1.0 + u * u * inv_knee2;
            let we = w.powf(-e);
            let y = c.passive_gain * v + u * we;
            let dy = c.passive_gain + g * we / w * (1.0 + c.exponent * u * u * inv_knee2);
            (y, dy)
        }))
    }

    /// Softplus rectifier and one-pole lowpass; equals the resting value in
    /// silence and is never negative.
    pub fn ihc_stage(&self, tape: &Tape, bm: &Var) -> Result<Var, PeripheryError> {
        let s = self.config.ihc.smoothing;
        let rest = self.config.ihc_rest();
        let rect = tape.pointwise(bm, move |_, u| {
            let (y, d) = crate::ad::softplus(u, s);
            (y - rest, d)
        });
        let lp = Biquad::one_pole_lowpass(self.config.ihc.cutoff_hz, self.config.sample_rate_hz);
        let smooth = tape.iir(&rect, &[vec![lp]])?;
        Ok(tape.add_scalar(&smooth, rest))
    }

    /// Firing rate of one fiber type. The Hill drive
    /// `d = SR + R_sat·(q(v) − q(v_rest))` is divided by
    /// `1 + (k_f·a_f + k_s·a_s)/R_sat`, where `a_f`, `a_s` are leaky
    /// integrals of `d − SR` with the fast and slow time constants.
    pub fn anf_stage(&self, tape: &Tape, ihc: &Var, fiber: FiberType) -> Result<Var, PeripheryError> {
        let p = self.config.fiber(fiber).clone();
        let fs = self.config.sample_rate_hz;
        let q0 = hill(self.config.ihc_rest(), p.threshold, p.hill_exponent).0;
        let (sat, theta, n) = (p.sat_rate, p.threshold, p.hill_exponent);
        let dev = tape.pointwise(ihc, move |_, v| {
            let (q, dq) = hill(v, theta, n);
            (sat * (q - q0), sat * dq)
        });
        let drive = tape.add_scalar(&dev, p.spont_rate);
        let fast = tape.iir(&dev, &[vec![Biquad::leaky_integrator(p.tau_fast_s, fs)]])?;
        let slow = tape.iir(&dev, &[vec![Biquad::leaky_integrator(p.tau_slow_s, fs)]])?;
        let den = tape.add(&tape.scale(&fast, p.k_fast / sat), &tape.scale(&slow, p.k_slow / sat))?;
        let den = tape.add_scalar(&den, 1.0);
        Ok(tape.div(&drive, &den)?)
    }

    /// `H·r_H + M·r_M + L·r_L`. A type whose count is zero may be `None`.
    pub fn an_sum(&self, tape: &Tape, rates: [Option<&Var>; 3], counts: FiberCounts) -> Result<Var, PeripheryError> {
        an_sum(tape, rates, counts)
    }

    /// Differentiable simulation of a context-padded 1-D signal; returns the
    /// trimmed `[C × L]` summed response.
    pub fn simulate_var(&self, tape: &Tape, x: &Var, profile: &HearingProfile, subset: &[usize]) -> Result<Var, PeripheryError> {
        let body = self.body_len(x.len())?;
        let ch = self.channels(profile, subset)?;
        let me = self.middle_ear(tape, x)?;
        let r = self.channels_response(tape, &me, &ch, profile.fiber_counts)?;
        Ok(tape.slice_time(&r, self.config.context_left, body)?)
    }

    fn channels_response(&self, tape: &Tape, me: &Var, ch: &ChannelSet, counts: FiberCounts) -> Result<Var, PeripheryError> {
        let bm = self.cochlear_stage(tape, me, ch)?;
        let ihc = self.ihc_stage(tape, &bm)?;
        let c = counts.as_array();
        let mut rates: [Option<Var>; 3] = [None, None, None];
        for t in FiberType::ALL {
            if c[t.index()] != 0.0 {
                rates[t.index()] = Some(self.anf_stage(tape, &ihc, t)?);
            }
        }
        if rates.iter().all(Option::is_none) {
            let (rows, cols) = ihc.value().rows_cols();
            return Ok(tape.constant(Array::zeros(&[rows, cols])));
        }
        an_sum(tape, [rates[0].as_ref(), rates[1].as_ref(), rates[2].as_ref()], counts)
    }

    /// Gradient-free simulation, processed in channel chunks.
    pub fn simulate(&self, x: &[f64], profile: &HearingProfile, subset: &[usize]) -> Result<Neurogram, PeripheryError> {
        let body = self.body_len(x.len())?;
        let ch = self.channels(profile, subset)?;
        let tape = Tape::new();
        let me = self.middle_ear(&tape, &tape.constant(Array::vector(x.to_vec())))?;
        let mut rates = Vec::with_capacity(subset.len() * body);
        for start in (0..subset.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(subset.len());
            let part = ChannelSet {
                indices: ch.indices[start..end].to_vec(),
                cf_hz: ch.cf_hz[start..end].to_vec(),
                loss_db: ch.loss_db[start..end].to_vec(),
            };
            let r = self.channels_response(&tape, &me, &part, profile.fiber_counts)?;
            let r = tape.slice_time(&r, self.config.context_left, body)?;
            rates.extend_from_slice(r.data());
        }
        Ok(Neurogram {
            rates: Array::new(vec![subset.len(), body], rates)?,
            cf_map: self.cf_map.subset(subset)?,
            sample_rate_hz: self.config.sample_rate_hz,
        })
    }

    /// Cropped length for a padded input, or an error if the context or block
    /// rules are violated.
    pub fn body_len(&self, padded: usize) -> Result<usize, PeripheryError> {
        let c = &self.config;
        let err = || PeripheryError::Context { got: padded, left: c.context_left, right: c.context_right, block: c.block };
        let body = padded.checked_sub(c.context_left + c.context_right).ok_or_else(err)?;
        if body == 0 || body % c.block != 0 {
            return Err(err());
        }
        Ok(body)
    }

    /// Steady rate of the summed response in silence.
    pub fn spontaneous_sum(&self, counts: FiberCounts) -> f64 {
        let c = counts.as_array();
        FiberType::ALL.iter().map(|t| c[t.index()] * self.config.fiber(*t).spont_rate).sum()
    }
}

pub fn an_sum(tape: &Tape, rates: [Option<&Var>; 3], counts: FiberCounts) -> Result<Var, PeripheryError> {
    let c = counts.as_array();
    let shape = rates.iter().flatten().next().map(|v| v.shape().to_vec()).ok_or_else(|| {
        PeripheryError::Config("an_sum needs at least one fiber response".into())
    })?;
    let mut acc: Option<Var> = None;
    for (i, r) in rates.iter().enumerate() {
        match r {
            Some(r) => {
                if r.shape() != shape.as_slice() {
                    return Err(AdError::Shape(format!("an_sum: shapes {:?} and {:?}", shape, r.shape())).into());
                }
                let term = tape.scale(r, c[i]);
                acc = Some(match acc {
                    Some(a) => tape.add(&a, &term)?,
                    None => term,
                });
            }
            None if c[i] != 0.0 => {
                return Err(PeripheryError::Config(format!("an_sum: fiber type {i} has count {} but no response", c[i])));
            }
            None => {}
        }
    }
    Ok(acc.expect("at least one response"))
}

/// Sum over CF; `[C × T] → [T]`.
pub fn population_response(tape: &Tape, r: &Var) -> Result<Var, PeripheryError> {
    Ok(tape.reduce(r, 0, ReduceKind::Sum)?)
}
