//! Test-only oracles: central finite differences and a dense DFT.
#![allow(dead_code)]

use hacomp::ad::{Array, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_array(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Array {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Array::new(shape.to_vec(), data).unwrap()
}

/// Scalar objective of several leaves, evaluated on a fresh tape.
pub type Objective<'a> = dyn Fn(&Tape, &[Var]) -> Var + 'a;

/// Analytic gradient of `f` at `inputs`, one array per input.
pub fn analytic_grad(f: &Objective, inputs: &[Array]) -> Vec<Array> {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
    let out = f(&tape, &vars);
    tape.backward(&out).unwrap();
    vars.iter().map(|v| tape.grad(v).unwrap()).collect()
}

fn eval(f: &Objective, inputs: &[Array]) -> f64 {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.constant(a.clone())).collect();
    f(&tape, &vars).item()
}

/// Central finite-difference gradient with step `h`.
pub fn numeric_grad(f: &Objective, inputs: &[Array], h: f64) -> Vec<Array> {
    let mut grads = Vec::new();
    for i in 0..inputs.len() {
        let mut g = vec![0.0; inputs[i].len()];
        for (j, gj) in g.iter_mut().enumerate() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= h;
            *gj = (eval(f, &plus) - eval(f, &minus)) / (2.0 * h);
        }
        grads.push(Array::new(inputs[i].shape().to_vec(), g).unwrap());
    }
    grads
}

/// Norm-wise relative error `‖a − n‖ / max(‖n‖, ‖a‖, 1e-300)` over all
/// inputs jointly.
pub fn rel_err(a: &[Array], n: &[Array]) -> f64 {
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nn = 0.0;
    for (x, y) in a.iter().zip(n) {
        for (p, q) in x.data().iter().zip(y.data()) {
            diff += (p - q) * (p - q);
            na += p * p;
            nn += q * q;
        }
    }
    diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-300)
}

pub fn grad_check(f: &Objective, inputs: &[Array], h: f64) -> f64 {
    rel_err(&analytic_grad(f, inputs), &numeric_grad(f, inputs, h))
}

/// Direct O(N²) DFT, bins `0..=N/2`, as (re, im).
pub fn dense_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, v) in x.iter().enumerate() {
                let th = 2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += v * th.cos();
                im -= v * th.sin();
            }
            (re, im)
        })
        .collect()
}

pub fn tone(freq: f64, fs: f64, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin()).collect()
}
