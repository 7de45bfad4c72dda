//! Reverse-mode gradient of a small strided-conv + PReLU graph, checked
//! against central differences.
use hacomp::ad::{Array, Tape, Var};

fn objective(t: &Tape, v: &[Var]) -> Var {
    let y = t.conv1d(&v[0], &v[1], &v[2], 2).unwrap();
    let y = t.prelu(&y, &t.constant(Array::scalar(0.2))).unwrap();
    t.mean_all(&t.square(&y))
}

fn main() {
    let x = Array::matrix(1, 16, (0..16).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
    let w = Array::new(vec![2, 1, 4], vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.25, -0.15]).unwrap();
    let b = Array::vector(vec![0.05, -0.02]);
    let inputs = [x, w, b];

    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
    let loss = objective(&tape, &vars);
    tape.backward(&loss).unwrap();
    println!("loss = {:.6}, tape holds {} nodes", loss.item(), tape.len());

    let h = 1e-6;
    for (name, (i, arr)) in ["x", "w", "b"].iter().zip(inputs.iter().enumerate()) {
        let g = tape.grad(&vars[i]).unwrap();
        let mut worst = 0.0f64;
        for j in 0..arr.len() {
            let eval = |d: f64| {
                let mut moved = inputs.to_vec();
                moved[i].data_mut()[j] += d;
                let t = Tape::new();
                let v: Vec<Var> = moved.into_iter().map(|a| t.constant(a)).collect();
                objective(&t, &v).item()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            worst = worst.max((fd - g.data()[j]).abs());
        }
        println!("d loss / d {name}: {} entries, max |autodiff - central difference| = {worst:.2e}", arr.len());
    }
}
