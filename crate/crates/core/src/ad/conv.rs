//! Strided 1-D convolution and its adjoint.
//!
//! Padding is "same": an input of length `T` gives `ceil(T / stride)` output
//! samples, with `(ceil(T/s) - 1)·s + K - T` zeros split so that the left side
//! gets the floor half (odd remainders go right).
//!
//! Kernel layout is `[C_out × C_in × K]` for [`Tape::conv1d`]. The transposed
//! convolution takes the *same* layout and is its exact adjoint: for kernel
//! `w` mapping `C_in → C_out` channels, `conv1d_transposed(y, w)` maps `C_out`
//! channels of length `T/s` back to `C_in` channels of length `T`. No kernel
//! flip is applied; a decoder layer with `c_in` inputs and `c_out` outputs
//! therefore stores its kernel as `[c_in × c_out × K]`.

use super::tape::{Tape, Var};
use super::{AdError, Array};

/// Geometry of a "same"-padded strided convolution over `t_in` samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub t_in: usize,
    pub t_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub fn same(t_in: usize, k: usize, stride: usize) -> Self {
        let t_out = t_in.div_ceil(stride);
        let total = ((t_out.saturating_sub(1)) * stride + k).saturating_sub(t_in);
        Self { t_in, t_out, k, stride, pad_left: total / 2 }
    }

    #[inline]
    fn src(&self, t: usize, k: usize) -> Option<usize> {
        let pos = (t * self.stride + k) as isize - self.pad_left as isize;
        (pos >= 0 && (pos as usize) < self.t_in).then_some(pos as usize)
    }
}

/// `cols[(c·K + k)·T_out + t] = x[c][t·s + k − pad]`.
fn im2col(x: &[f64], channels: usize, g: &ConvGeometry) -> Vec<f64> {
    let mut cols = vec![0.0; channels * g.k * g.t_out];
    for c in 0..channels {
        let row = &x[c * g.t_in..(c + 1) * g.t_in];
        for k in 0..g.k {
            let dst = &mut cols[(c * g.k + k) * g.t_out..(c * g.k + k + 1) * g.t_out];
            for (t, d) in dst.iter_mut().enumerate() {
                if let Some(p) = g.src(t, k) {
                    *d = row[p];
                }
            }
        }
    }
    cols
}

/// Scatter-add inverse of [`im2col`].
fn col2im(cols: &[f64], channels: usize, g: &ConvGeometry) -> Vec<f64> {
    let mut x = vec![0.0; channels * g.t_in];
    for c in 0..channels {
        for k in 0..g.k {
            let src = &cols[(c * g.k + k) * g.t_out..(c * g.k + k + 1) * g.t_out];
            let row = &mut x[c * g.t_in..(c + 1) * g.t_in];
            for (t, v) in src.iter().enumerate() {
                if let Some(p) = g.src(t, k) {
                    row[p] += v;
                }
            }
        }
    }
    x
}

/// `C = alpha·op(A)·op(B) + beta·C` on row-major buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: buffer lengths are checked above and the strides describe
    // exactly those row-major layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_conv_shapes(op: &str, input: &Array, kernels: &Array, bias_len: usize, in_axis: usize) -> Result<(usize, usize, usize), AdError> {
    if kernels.rank() != 3 {
        return Err(AdError::Shape(format!("{op}: kernels must be rank 3, got {:?}", kernels.shape())));
    }
    if input.rank() != 2 {
        return Err(AdError::Shape(format!("{op}: input must be [channels × time], got {:?}", input.shape())));
    }
    let ks = kernels.shape();
    let (c_in, t) = (input.shape()[0], input.shape()[1]);
    if ks[in_axis] != c_in {
        return Err(AdError::Shape(format!(
            "{op}: input has {c_in} channels but kernel dimension {in_axis} is {}",
            ks[in_axis]
        )));
    }
    let c_out = ks[1 - in_axis];
    if bias_len != c_out {
        return Err(AdError::Shape(format!("{op}: bias has {bias_len} entries for {c_out} output channels")));
    }
    Ok((c_in, c_out, t))
}

impl Tape {
    /// Strided "same" cross-correlation. `input: [C_in × T]`,
    /// `kernels: [C_out × C_in × K]`, `bias: [C_out]`.
    pub fn conv1d(&self, input: &Var, kernels: &Var, bias: &Var, stride: usize) -> Result<Var, AdError> {
        if stride == 0 {
            return Err(AdError::Shape("conv1d: stride must be positive".into()));
        }
        let (c_in, c_out, t) = check_conv_shapes("conv1d", input.value(), kernels.value(), bias.len(), 1)?;
        let k = kernels.shape()[2];
        if t == 0 {
            return Err(AdError::Shape("conv1d: empty time axis".into()));
        }
        let g = ConvGeometry::same(t, k, stride);
        let cols = im2col(input.data(), c_in, &g);
        let mut out = vec![0.0; c_out * g.t_out];
        for (co, row) in out.chunks_mut(g.t_out).enumerate() {
            row.fill(bias.data()[co]);
        }
        gemm(c_out, c_in * k, g.t_out, kernels.data(), false, &cols, false, 1.0, &mut out);
        let value = Array::new(vec![c_out, g.t_out], out)?;
        let wv = kernels.value_rc();
        let need_cols = kernels.requires_grad();
        let need_dx = input.requires_grad();
        let cols = if need_cols { cols } else { Vec::new() };
        Ok(self.record(&[input, kernels, bias], value, move |gout| {
            let dx = if need_dx {
                let mut dcols = vec![0.0; c_in * k * g.t_out];
                gemm(c_in * k, c_out, g.t_out, wv.data(), true, gout, false, 0.0, &mut dcols);
                Some(col2im(&dcols, c_in, &g))
            } else {
                None
            };
            let dw = if need_cols {
                let mut dw = vec![0.0; c_out * c_in * k];
                gemm(c_out, g.t_out, c_in * k, gout, false, &cols, true, 0.0, &mut dw);
                Some(dw)
            } else {
                None
            };
            let db: Vec<f64> = gout.chunks(g.t_out).map(|r| r.iter().sum()).collect();
            vec![dx, dw, Some(db)]
        }))
    }

    /// Adjoint of [`Tape::conv1d`] plus bias: `input: [C_y × T]`,
    /// `kernels: [C_y × C_x × K]`, `bias: [C_x]`, output `[C_x × stride·T]`.
    pub fn conv1d_transposed(&self, input: &Var, kernels: &Var, bias: &Var, stride: usize) -> Result<Var, AdError> {
        if stride == 0 {
            return Err(AdError::Shape("conv1d_transposed: stride must be positive".into()));
        }
        let (c_y, c_x, t) = check_conv_shapes("conv1d_transposed", input.value(), kernels.value(), bias.len(), 0)?;
        let k = kernels.shape()[2];
        let g = ConvGeometry::same(stride * t, k, stride);
        debug_assert_eq!(g.t_out, t);
        let mut dcols = vec![0.0; c_x * k * t];
        gemm(c_x * k, c_y, t, kernels.data(), true, input.data(), false, 0.0, &mut dcols);
        let mut out = col2im(&dcols, c_x, &g);
        for (c, row) in out.chunks_mut(g.t_in).enumerate() {
            let b = bias.data()[c];
            row.iter_mut().for_each(|v| *v += b);
        }
        let value = Array::new(vec![c_x, g.t_in], out)?;
        let (wv, yv) = (kernels.value_rc(), input.value_rc());
        let need_w = kernels.requires_grad();
        Ok(self.record(&[input, kernels, bias], value, move |gout| {
            let cols = im2col(gout, c_x, &g);
            let mut dy = vec![0.0; c_y * t];
            gemm(c_y, c_x * k, t, wv.data(), false, &cols, false, 0.0, &mut dy);
            let dw = if need_w {
                let mut dw = vec![0.0; c_y * c_x * k];
                gemm(c_y, t, c_x * k, yv.data(), false, &cols, true, 0.0, &mut dw);
                Some(dw)
            } else {
                None
            };
            let db: Vec<f64> = gout.chunks(g.t_in).map(|r| r.iter().sum()).collect();
            vec![Some(dy), dw, Some(db)]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_geometry_matches_tf_convention() {
        let g = ConvGeometry::same(2048, 32, 2);
        assert_eq!((g.t_out, g.pad_left), (1024, 15));
        let g = ConvGeometry::same(3, 3, 1);
        assert_eq!((g.t_out, g.pad_left), (3, 1));
        let g = ConvGeometry::same(5, 2, 2);
        // total pad 1, goes right
        assert_eq!((g.t_out, g.pad_left), (3, 0));
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        let g = ConvGeometry::same(9, 4, 2);
        let x: Vec<f64> = (0..18).map(|i| (i as f64 * 0.37).sin()).collect();
        let c: Vec<f64> = (0..2 * 4 * g.t_out).map(|i| (i as f64 * 0.11).cos()).collect();
        let lhs: f64 = im2col(&x, 2, &g).iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&c, 2, &g)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
