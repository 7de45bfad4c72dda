//! Strided convolutional encoder-decoder operating on raw waveforms.
//!
//! Encoder layer `i` maps `f[i-1] → f[i]` channels and halves time. Decoder
//! layer `j` doubles time; its input is the previous decoder output
//! concatenated (decoder channels first) with the encoder output of matching
//! length, except for the first decoder layer, which reads the bottleneck
//! directly. Decoder outputs mirror the encoder widths down to one channel.
//! Every layer except the last is followed by a per-channel PReLU.

mod checkpoint;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ad::{AdError, Array, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum DnnError {
    #[error("invalid architecture: {0}")]
    Spec(String),
    #[error("input length {len} is not a positive multiple of {multiple}")]
    Length { len: usize, multiple: usize },
    #[error("parameter mismatch: {0}")]
    Params(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ad(#[from] AdError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub encoder_filters: Vec<usize>,
    pub kernel_len: usize,
    pub stride: usize,
    /// Adds the input to the network output. Off in the reference
    /// architecture.
    #[serde(default)]
    pub residual: bool,
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self { encoder_filters: vec![16, 32, 32, 64, 64, 128, 128, 256], kernel_len: 32, stride: 2, residual: false }
    }
}

/// Shape of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub c_in: usize,
    pub c_out: usize,
    pub transposed: bool,
    pub prelu: bool,
}

impl ArchSpec {
    /// The six-plus-six layer variant.
    pub fn reduced_12() -> Self {
        Self { encoder_filters: vec![16, 32, 32, 64, 64, 128], ..Self::default() }
    }

    pub fn depth(&self) -> usize {
        self.encoder_filters.len()
    }

    pub fn validate(&self) -> Result<(), DnnError> {
        if self.depth() < 2 {
            return Err(DnnError::Spec(format!("need at least 2 encoder layers, got {}", self.depth())));
        }
        if self.encoder_filters.contains(&0) {
            return Err(DnnError::Spec("filter counts must be positive".into()));
        }
        if self.stride < 1 || self.kernel_len < self.stride {
            return Err(DnnError::Spec(format!(
                "kernel length {} must be at least the stride {} (stride >= 1)",
                self.kernel_len, self.stride
            )));
        }
        self.stride.checked_pow(self.depth() as u32).ok_or_else(|| DnnError::Spec("stride^depth overflows".into()))?;
        Ok(())
    }

    /// Input lengths must be multiples of `stride^depth`.
    pub fn granularity(&self) -> usize {
        self.stride.pow(self.depth() as u32)
    }

    /// Encoder layers followed by decoder layers.
    pub fn layers(&self) -> Vec<LayerShape> {
        let f = &self.encoder_filters;
        let n = f.len();
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            out.push(LayerShape { c_in: if i == 0 { 1 } else { f[i - 1] }, c_out: f[i], transposed: false, prelu: true });
        }
        for j in 0..n {
            let c_out = if j + 1 < n { f[n - 2 - j] } else { 1 };
            let c_in = if j == 0 { f[n - 1] } else { out[n + j - 1].c_out + f[n - 1 - j] };
            out.push(LayerShape { c_in, c_out, transposed: true, prelu: j + 1 < n });
        }
        out
    }

    /// Names and shapes of all parameters, in checkpoint order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>)> {
        let k = self.kernel_len;
        let n = self.depth();
        let mut out = Vec::new();
        for (l, s) in self.layers().iter().enumerate() {
            let name = if l < n { format!("enc{l}") } else { format!("dec{}", l - n) };
            // conv1d kernels are [out × in × K]; transposed ones [in × out × K].
            let w = if s.transposed { vec![s.c_in, s.c_out, k] } else { vec![s.c_out, s.c_in, k] };
            out.push((format!("{name}.w"), w));
            out.push((format!("{name}.b"), vec![s.c_out]));
            if s.prelu {
                out.push((format!("{name}.alpha"), vec![s.c_out]));
            }
        }
        out
    }
}

/// Kernels, biases and one PReLU slope per channel on every layer but the last.
pub fn param_count(spec: &ArchSpec) -> usize {
    spec.param_layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub spec: ArchSpec,
    pub names: Vec<String>,
    pub values: Vec<Array>,
}

const PRELU_INIT: f64 = 0.25;
/// Scale of the final layer's initial kernel in residual mode, so training
/// starts close to the identity map.
const RESIDUAL_FINAL_SCALE: f64 = 1e-3;

/// Seeded init: kernels uniform in `±1/sqrt(fan_in)`, biases zero, PReLU
/// slopes 0.25.
pub fn build(spec: &ArchSpec, seed: u64) -> Result<ModelParams, DnnError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec.layers();
    let layout = spec.param_layout();
    let last_w = layout.iter().rposition(|(n, _)| n.ends_with(".w")).expect("at least one layer");
    let mut names = Vec::with_capacity(layout.len());
    let mut values = Vec::with_capacity(layout.len());
    let mut layer = 0;
    for (i, (name, shape)) in layout.into_iter().enumerate() {
        let len: usize = shape.iter().product();
        let value = if name.ends_with(".w") {
            let s = layers[layer];
            layer += 1;
            let mut bound = 1.0 / ((s.c_in * spec.kernel_len) as f64).sqrt();
            if spec.residual && i == last_w {
                bound *= RESIDUAL_FINAL_SCALE;
            }
            let data = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
            Array::new(shape, data)?
        } else if name.ends_with(".alpha") {
            Array::full(&shape, PRELU_INIT)
        } else {
            Array::zeros(&shape)
        };
        names.push(name);
        values.push(value);
    }
    Ok(ModelParams { spec: spec.clone(), names, values })
}

impl ModelParams {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(Array::len).sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.values.iter().map(Array::len).collect()
    }

    /// Checks names and shapes against the architecture.
    pub fn validate(&self) -> Result<(), DnnError> {
        self.spec.validate()?;
        let layout = self.spec.param_layout();
        if layout.len() != self.values.len() || self.names.len() != self.values.len() {
            return Err(DnnError::Params(format!("expected {} tensors, found {}", layout.len(), self.values.len())));
        }
        for ((name, shape), (n, v)) in layout.iter().zip(self.names.iter().zip(&self.values)) {
            if name != n || shape.as_slice() != v.shape() {
                return Err(DnnError::Params(format!("{n} {:?} does not match {name} {shape:?}", v.shape())));
            }
            if !v.all_finite() {
                return Err(DnnError::Params(format!("{n} holds non-finite values")));
            }
        }
        Ok(())
    }

    /// Registers every tensor as a trainable leaf.
    pub fn leaves(&self, tape: &Tape) -> Vec<Var> {
        self.values.iter().map(|v| tape.leaf(v.clone())).collect()
    }

    pub fn constants(&self, tape: &Tape) -> Vec<Var> {
        self.values.iter().map(|v| tape.constant(v.clone())).collect()
    }
}

/// One pass over a 1-D signal whose length is a multiple of
/// [`ArchSpec::granularity`]; the output has the same length.
pub fn forward(tape: &Tape, spec: &ArchSpec, params: &[Var], x: &Var) -> Result<Var, DnnError> {
    let t = x.len();
    let g = spec.granularity();
    if x.value().rank() != 1 || t == 0 || t % g != 0 {
        return Err(DnnError::Length { len: t, multiple: g });
    }
    let layers = spec.layers();
    let n = spec.depth();
    let mut p = params.iter();
    let mut next = |s: &LayerShape| -> Result<(&Var, &Var, Option<&Var>), DnnError> {
        let missing = || DnnError::Params("too few parameter tensors".into());
        let w = p.next().ok_or_else(missing)?;
        let b = p.next().ok_or_else(missing)?;
        let a = if s.prelu { Some(p.next().ok_or_else(missing)?) } else { None };
        Ok((w, b, a))
    };
    let mut h = tape.reshape(x, vec![1, t])?;
    let mut skips = Vec::with_capacity(n);
    for s in &layers[..n] {
        let (w, b, a) = next(s)?;
        h = tape.conv1d(&h, w, b, spec.stride)?;
        if let Some(a) = a {
            h = tape.prelu(&h, a)?;
        }
        skips.push(h.clone());
    }
    for (j, s) in layers[n..].iter().enumerate() {
        let (w, b, a) = next(s)?;
        if j > 0 {
            h = tape.concat_rows(&[&h, &skips[n - 1 - j]])?;
        }
        h = tape.conv1d_transposed(&h, w, b, spec.stride)?;
        if let Some(a) = a {
            h = tape.prelu(&h, a)?;
        }
    }
    let y = tape.reshape(&h, vec![t])?;
    if spec.residual {
        Ok(tape.add(&y, x)?)
    } else {
        Ok(y)
    }
}

/// Applies [`forward`] to consecutive non-overlapping windows and
/// concatenates the results. A shorter final window is allowed when the
/// total length is a multiple of [`ArchSpec::granularity`].
pub fn forward_windowed(tape: &Tape, spec: &ArchSpec, params: &[Var], x: &Var, window: usize) -> Result<Var, DnnError> {
    let t = x.len();
    let g = spec.granularity();
    if window == 0 || window % g != 0 {
        return Err(DnnError::Spec(format!("window {window} is not a positive multiple of {g}")));
    }
    if t == 0 || t % g != 0 || x.value().rank() != 1 {
        return Err(DnnError::Length { len: t, multiple: g });
    }
    let outs = (0..t.div_ceil(window))
        .map(|w| {
            let start = w * window;
            forward(tape, spec, params, &tape.slice_time(x, start, window.min(t - start))?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Var> = outs.iter().collect();
    Ok(tape.concat_time(&refs)?)
}

/// Gradient-free windowed inference on a plain slice.
pub fn process(params: &ModelParams, x: &[f64], window: usize) -> Result<Vec<f64>, DnnError> {
    let tape = Tape::new();
    let p = params.constants(&tape);
    let y = forward_windowed(&tape, &params.spec, &p, &tape.constant(Array::vector(x.to_vec())), window)?;
    Ok(y.data().to_vec())
}
