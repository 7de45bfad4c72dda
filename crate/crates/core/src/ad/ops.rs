//! Elementwise, structural and reduction operations.
//!
//! Conventions at non-smooth points: `abs` has subgradient 0 at the origin,
//! max-reductions route the gradient to the first maximal element, and `prelu`
//! uses the positive branch at exactly zero.

use std::rc::Rc;

use super::tape::{InputGrads, Tape, Var};
use super::{AdError, Array};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
    Max,
}

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

/// How the two operands of a binary op line up.
#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Same,
    LeftScalar,
    RightScalar,
}

fn layout(a: &Array, b: &Array, op: &str) -> Result<Layout, AdError> {
    if a.shape() == b.shape() {
        Ok(Layout::Same)
    } else if a.len() == 1 {
        Ok(Layout::LeftScalar)
    } else if b.len() == 1 {
        Ok(Layout::RightScalar)
    } else {
        Err(AdError::Shape(format!(
            "{op}: operand shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )))
    }
}

fn reduce_to(g: Vec<f64>, scalar: bool) -> Vec<f64> {
    if scalar {
        vec![g.iter().sum()]
    } else {
        g
    }
}

impl Tape {
    fn binary(&self, a: &Var, b: &Var, op: Binary) -> Result<Var, AdError> {
        let name = match op {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
            Binary::Div => "div",
        };
        let lay = layout(a.value(), b.value(), name)?;
        let shape = if lay == Layout::LeftScalar { b.shape().to_vec() } else { a.shape().to_vec() };
        let n: usize = shape.iter().product();
        let (ad, bd) = (a.data(), b.data());
        let pick = |x: &[f64], i: usize| if x.len() == 1 { x[0] } else { x[i] };
        let out: Vec<f64> = (0..n)
            .map(|i| {
                let (x, y) = (pick(ad, i), pick(bd, i));
                match op {
                    Binary::Add => x + y,
                    Binary::Sub => x - y,
                    Binary::Mul => x * y,
                    Binary::Div => x / y,
                }
            })
            .collect();
        let (av, bv) = (a.value_rc(), b.value_rc());
        let (a_scalar, b_scalar) = (lay == Layout::LeftScalar, lay == Layout::RightScalar);
        Ok(self.record(&[a, b], Array::new(shape, out)?, move |g| {
            let pick = |x: &[f64], i: usize| if x.len() == 1 { x[0] } else { x[i] };
            let (ad, bd) = (av.data(), bv.data());
            let (ga, gb): (Vec<f64>, Vec<f64>) = match op {
                Binary::Add => (g.to_vec(), g.to_vec()),
                Binary::Sub => (g.to_vec(), g.iter().map(|v| -v).collect()),
                Binary::Mul => (
                    g.iter().enumerate().map(|(i, v)| v * pick(bd, i)).collect(),
                    g.iter().enumerate().map(|(i, v)| v * pick(ad, i)).collect(),
                ),
                Binary::Div => (
                    g.iter().enumerate().map(|(i, v)| v / pick(bd, i)).collect(),
                    g.iter()
                        .enumerate()
                        .map(|(i, v)| {
                            let y = pick(bd, i);
                            -v * pick(ad, i) / (y * y)
                        })
                        .collect(),
                ),
            };
            vec![Some(reduce_to(ga, a_scalar)), Some(reduce_to(gb, b_scalar))]
        }))
    }

    pub fn add(&self, a: &Var, b: &Var) -> Result<Var, AdError> {
        self.binary(a, b, Binary::Add)
    }

    pub fn sub(&self, a: &Var, b: &Var) -> Result<Var, AdError> {
        self.binary(a, b, Binary::Sub)
    }

    pub fn mul(&self, a: &Var, b: &Var) -> Result<Var, AdError> {
        self.binary(a, b, Binary::Mul)
    }

    pub fn div(&self, a: &Var, b: &Var) -> Result<Var, AdError> {
        self.binary(a, b, Binary::Div)
    }

    /// Generic unary map. `f(row, x)` returns the value and its derivative;
    /// `row` is the leading index (0 for 1-D inputs), which lets per-channel
    /// constants enter a fused pointwise stage.
    pub fn pointwise<F>(&self, a: &Var, f: F) -> Var
    where
        F: Fn(usize, f64) -> (f64, f64),
    {
        let (_, cols) = a.value().rows_cols();
        let cols = cols.max(1);
        let mut out = Vec::with_capacity(a.len());
        let mut deriv = Vec::with_capacity(a.len());
        for (i, &x) in a.data().iter().enumerate() {
            let (y, d) = f(i / cols, x);
            out.push(y);
            deriv.push(d);
        }
        let value = Array::new(a.shape().to_vec(), out).expect("pointwise shape");
        self.record(&[a], value, move |g| {
            vec![Some(g.iter().zip(&deriv).map(|(g, d)| g * d).collect())]
        })
    }

    pub fn scale(&self, a: &Var, c: f64) -> Var {
        self.pointwise(a, |_, x| (c * x, c))
    }

    pub fn add_scalar(&self, a: &Var, c: f64) -> Var {
        self.pointwise(a, |_, x| (x + c, 1.0))
    }

    pub fn square(&self, a: &Var) -> Var {
        self.pointwise(a, |_, x| (x * x, 2.0 * x))
    }

    /// Absolute value; the subgradient at exactly zero is 0.
    pub fn abs(&self, a: &Var) -> Var {
        self.pointwise(a, |_, x| {
            let d = if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            };
            (x.abs(), d)
        })
    }

    /// Smooth rectifier `width · ln(1 + exp(x / width))`.
    pub fn relu_smooth(&self, a: &Var, width: f64) -> Var {
        self.pointwise(a, move |_, x| softplus(x, width))
    }

    /// `x^p` for non-negative inputs.
    pub fn powf(&self, a: &Var, p: f64) -> Var {
        self.pointwise(a, move |_, x| {
            let y = x.powf(p);
            let d = if x == 0.0 { 0.0 } else { p * y / x };
            (y, d)
        })
    }

    /// Parametric ReLU. `alpha` holds one slope per leading-axis channel, or a
    /// single shared slope.
    pub fn prelu(&self, x: &Var, alpha: &Var) -> Result<Var, AdError> {
        let (rows, cols) = x.value().rows_cols();
        if alpha.len() != rows && alpha.len() != 1 {
            return Err(AdError::Shape(format!(
                "prelu: {} slopes for {} channels",
                alpha.len(),
                rows
            )));
        }
        let shared = alpha.len() == 1;
        let ad = alpha.data();
        let out: Vec<f64> = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let a = if shared { ad[0] } else { ad[i / cols] };
                if v >= 0.0 {
                    v
                } else {
                    a * v
                }
            })
            .collect();
        let (xv, av) = (x.value_rc(), alpha.value_rc());
        Ok(self.record(&[x, alpha], Array::new(x.shape().to_vec(), out)?, move |g| {
            let ad = av.data();
            let mut gx = vec![0.0; g.len()];
            let mut ga = vec![0.0; ad.len()];
            for (i, (&v, &gi)) in xv.data().iter().zip(g).enumerate() {
                let c = if shared { 0 } else { i / cols };
                if v >= 0.0 {
                    gx[i] = gi;
                } else {
                    gx[i] = ad[c] * gi;
                    ga[c] += v * gi;
                }
            }
            vec![Some(gx), Some(ga)]
        }))
    }

    /// Multiplies row `r` by the constant `w[r]`.
    pub fn scale_rows(&self, a: &Var, w: &[f64]) -> Result<Var, AdError> {
        let (rows, _) = a.value().rows_cols();
        if rows != w.len() {
            return Err(AdError::Shape(format!(
                "scale_rows: {} weights for {} rows",
                w.len(),
                rows
            )));
        }
        let w = w.to_vec();
        Ok(self.pointwise(a, move |r, x| (w[r] * x, w[r])))
    }

    pub fn reshape(&self, a: &Var, shape: Vec<usize>) -> Result<Var, AdError> {
        let value = a.value().clone().reshape(shape)?;
        Ok(self.record(&[a], value, |g| vec![Some(g.to_vec())]))
    }

    /// Stacks a 1-D signal `n` times into an `n × T` array.
    pub fn repeat_rows(&self, a: &Var, n: usize) -> Var {
        let t = a.len();
        let mut out = Vec::with_capacity(n * t);
        for _ in 0..n {
            out.extend_from_slice(a.data());
        }
        let value = Array::new(vec![n, t], out).expect("repeat shape");
        self.record(&[a], value, move |g| {
            let mut ga = vec![0.0; t];
            for row in g.chunks(t) {
                for (a, v) in ga.iter_mut().zip(row) {
                    *a += v;
                }
            }
            vec![Some(ga)]
        })
    }

    /// Concatenates 2-D arrays along the leading (channel) axis.
    pub fn concat_rows(&self, parts: &[&Var]) -> Result<Var, AdError> {
        let cols = parts[0].value().rows_cols().1;
        let mut rows = 0;
        let mut out = Vec::new();
        let mut sizes = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, c) = p.value().rows_cols();
            if c != cols {
                return Err(AdError::Shape(format!(
                    "concat_rows: time length {c} differs from {cols}"
                )));
            }
            rows += r;
            sizes.push(p.len());
            out.extend_from_slice(p.data());
        }
        let value = Array::new(vec![rows, cols], out)?;
        Ok(self.record(parts, value, move |g| {
            let mut offset = 0;
            sizes
                .iter()
                .map(|&n| {
                    let s = g[offset..offset + n].to_vec();
                    offset += n;
                    Some(s)
                })
                .collect()
        }))
    }

    /// Concatenates along the last (time) axis. All parts must have the same
    /// number of rows.
    pub fn concat_time(&self, parts: &[&Var]) -> Result<Var, AdError> {
        let rows = parts[0].value().rows_cols().0;
        let one_d = parts[0].value().rank() <= 1;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, c) = p.value().rows_cols();
            if r != rows {
                return Err(AdError::Shape(format!(
                    "concat_time: {r} rows differs from {rows}"
                )));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                out.extend_from_slice(p.value().row(r));
            }
        }
        let shape = if one_d { vec![total] } else { vec![rows, total] };
        let value = Array::new(shape, out)?;
        Ok(self.record(parts, value, move |g| {
            let mut grads: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(w * rows)).collect();
            for r in 0..rows {
                let mut off = r * total;
                for (k, &w) in widths.iter().enumerate() {
                    grads[k].extend_from_slice(&g[off..off + w]);
                    off += w;
                }
            }
            grads.into_iter().map(Some).collect()
        }))
    }

    /// Time-axis slice `[start, start + len)` of a 1-D or 2-D array.
    pub fn slice_time(&self, a: &Var, start: usize, len: usize) -> Result<Var, AdError> {
        let (rows, cols) = a.value().rows_cols();
        if start + len > cols {
            return Err(AdError::Shape(format!(
                "slice_time: [{start}, {}) exceeds length {cols}",
                start + len
            )));
        }
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&a.value().row(r)[start..start + len]);
        }
        let shape = if a.value().rank() <= 1 { vec![len] } else { vec![rows, len] };
        let value = Array::new(shape, out)?;
        Ok(self.record(&[a], value, move |g| {
            let mut ga = vec![0.0; rows * cols];
            for r in 0..rows {
                ga[r * cols + start..r * cols + start + len].copy_from_slice(&g[r * len..(r + 1) * len]);
            }
            vec![Some(ga)]
        }))
    }

    /// Picks rows of a 2-D array.
    pub fn select_rows(&self, a: &Var, idx: &[usize]) -> Result<Var, AdError> {
        let (rows, cols) = a.value().rows_cols();
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(AdError::Shape(format!("select_rows: row {bad} out of {rows}")));
        }
        let mut out = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            out.extend_from_slice(a.value().row(i));
        }
        let idx = idx.to_vec();
        let value = Array::new(vec![idx.len(), cols], out)?;
        Ok(self.record(&[a], value, move |g| {
            let mut ga = vec![0.0; rows * cols];
            for (k, &i) in idx.iter().enumerate() {
                for (a, v) in ga[i * cols..(i + 1) * cols].iter_mut().zip(&g[k * cols..(k + 1) * cols]) {
                    *a += v;
                }
            }
            vec![Some(ga)]
        }))
    }

    pub fn sum_all(&self, a: &Var) -> Var {
        let s: f64 = a.data().iter().sum();
        let n = a.len();
        self.record(&[a], Array::scalar(s), move |g| vec![Some(vec![g[0]; n])])
    }

    pub fn mean_all(&self, a: &Var) -> Var {
        let n = a.len();
        let s: f64 = a.data().iter().sum();
        let inv = 1.0 / n as f64;
        self.record(&[a], Array::scalar(s / n as f64), move |g| vec![Some(vec![g[0] * inv; n])])
    }

    /// Reduction of a 1-D or 2-D array along `axis`. Reducing a 1-D array
    /// yields a scalar. Max routes the gradient to the first maximum.
    pub fn reduce(&self, a: &Var, axis: usize, kind: ReduceKind) -> Result<Var, AdError> {
        let rank = a.value().rank();
        if axis >= rank.max(1) || rank > 2 {
            return Err(AdError::Axis { axis, rank });
        }
        let (rows, cols) = if rank == 1 { (a.len(), 1) } else { (a.shape()[0], a.shape()[1]) };
        // Normalise so we always reduce over `outer` groups of `count` values
        // with stride `step`.
        let (groups, count, at): (usize, usize, Box<dyn Fn(usize, usize) -> usize>) = if rank == 1 {
            (1, rows, Box::new(|_, k| k))
        } else if axis == 0 {
            (cols, rows, Box::new(move |j, k| k * cols + j))
        } else {
            (rows, cols, Box::new(move |j, k| j * cols + k))
        };
        let d = a.data();
        let mut out = Vec::with_capacity(groups);
        let mut argmax = Vec::new();
        for j in 0..groups {
            match kind {
                ReduceKind::Sum | ReduceKind::Mean => {
                    let mut s = 0.0;
                    for k in 0..count {
                        s += d[at(j, k)];
                    }
                    out.push(if kind == ReduceKind::Mean { s / count as f64 } else { s });
                }
                ReduceKind::Max => {
                    let mut best = 0;
                    for k in 1..count {
                        if d[at(j, k)] > d[at(j, best)] {
                            best = k;
                        }
                    }
                    argmax.push(at(j, best));
                    out.push(d[at(j, best)]);
                }
            }
        }
        let shape = if rank == 1 { vec![] } else { vec![groups] };
        let total = a.len();
        let positions: Vec<Vec<usize>> = if kind == ReduceKind::Max {
            Vec::new()
        } else {
            (0..groups).map(|j| (0..count).map(|k| at(j, k)).collect()).collect()
        };
        let value = Array::new(shape, out)?;
        Ok(self.record(&[a], value, move |g| {
            let mut ga = vec![0.0; total];
            match kind {
                ReduceKind::Max => {
                    for (j, &p) in argmax.iter().enumerate() {
                        ga[p] += g[j];
                    }
                }
                ReduceKind::Sum | ReduceKind::Mean => {
                    let c = if kind == ReduceKind::Mean { 1.0 / count as f64 } else { 1.0 };
                    for (j, pos) in positions.iter().enumerate() {
                        for &p in pos {
                            ga[p] += g[j] * c;
                        }
                    }
                }
            }
            vec![Some(ga)]
        }))
    }

    /// Mean absolute difference over all elements.
    pub fn mae(&self, a: &Var, b: &Var) -> Result<Var, AdError> {
        if a.shape() != b.shape() {
            return Err(AdError::Shape(format!(
                "mae: shapes {:?} and {:?} differ",
                a.shape(),
                b.shape()
            )));
        }
        let n = a.len();
        let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
        let (av, bv) = (a.value_rc(), b.value_rc());
        Ok(self.record(&[a, b], Array::scalar(s / n as f64), move |g| {
            let c = g[0] / n as f64;
            let ga: Vec<f64> = av.data().iter().zip(bv.data()).map(|(x, y)| c * sign(x - y)).collect();
            let gb = ga.iter().map(|v| -v).collect();
            vec![Some(ga), Some(gb)]
        }))
    }

    /// Mean absolute difference over the elements where `mask` is set. An
    /// empty mask yields 0.
    pub fn masked_mae(&self, a: &Var, b: &Var, mask: &[bool]) -> Result<Var, AdError> {
        if a.shape() != b.shape() || mask.len() != a.len() {
            return Err(AdError::Shape(format!(
                "masked_mae: shapes {:?}, {:?} and mask of {}",
                a.shape(),
                b.shape(),
                mask.len()
            )));
        }
        let kept = mask.iter().filter(|m| **m).count();
        let s: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|((x, y), _)| (x - y).abs())
            .sum();
        let v = if kept == 0 { 0.0 } else { s / kept as f64 };
        let (av, bv) = (a.value_rc(), b.value_rc());
        let mask: Rc<Vec<bool>> = Rc::new(mask.to_vec());
        Ok(self.record(&[a, b], Array::scalar(v), move |g| {
            if kept == 0 {
                return vec![None, None];
            }
            let c = g[0] / kept as f64;
            let ga: Vec<f64> = av
                .data()
                .iter()
                .zip(bv.data())
                .zip(mask.iter())
                .map(|((x, y), m)| if *m { c * sign(x - y) } else { 0.0 })
                .collect();
            let gb = ga.iter().map(|v| -v).collect();
            let out: InputGrads = vec![Some(ga), Some(gb)];
            out
        }))
    }
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Numerically stable `width · ln(1 + exp(x / width))` and its derivative.
pub(crate) fn softplus(x: f64, width: f64) -> (f64, f64) {
    let z = x / width;
    let (sp, sig) = if z > 30.0 {
        (z, 1.0)
    } else if z < -30.0 {
        (z.exp(), z.exp())
    } else {
        ((1.0 + z.exp()).ln(), 1.0 / (1.0 + (-z).exp()))
    };
    (width * sp, sig)
}
