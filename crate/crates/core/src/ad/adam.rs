use super::{AdError, Array};

/// Adam optimiser state for an ordered list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state for parameters of the given sizes, with β1 = 0.9,
    /// β2 = 0.999 and ε = 1e-8.
    pub fn new(sizes: &[usize], lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. `names` labels the parameters in error
    /// messages. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [Array], grads: &[Array], names: &[String]) -> Result<(), AdError> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(AdError::Shape(format!(
                "adam: {} parameters, {} gradients, {} state slots",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            let name = names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
            if p.len() != self.m[i].len() || g.len() != p.len() {
                return Err(AdError::Shape(format!(
                    "adam: parameter {name} has {} values, gradient {}, state {}",
                    p.len(),
                    g.len(),
                    self.m[i].len()
                )));
            }
            if !g.all_finite() {
                return Err(AdError::NonFinite(name));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![Array::vector(vec![1.0, -2.0, 3.0])];
        let g = vec![Array::zeros(&[3])];
        let mut s = AdamState::new(&[3], 1e-3);
        s.step(&mut p, &g, &names(1)).unwrap();
        assert_eq!(p[0].data(), &[1.0, -2.0, 3.0]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + ε).
        let lr = 0.01;
        for g0 in [0.5, -3.0, 1e-3] {
            let mut p = vec![Array::vector(vec![0.0])];
            let mut s = AdamState::new(&[1], lr);
            s.step(&mut p, &[Array::vector(vec![g0])], &names(1)).unwrap();
            let expected = -lr * g0 / (g0.abs() + 1e-8);
            assert!((p[0].data()[0] - expected).abs() < 1e-15, "{g0}");
        }
    }

    #[test]
    fn step_counter_increments_by_one() {
        let mut p = vec![Array::vector(vec![0.0, 0.0])];
        let mut s = AdamState::new(&[2], 1e-3);
        for k in 1..=5 {
            s.step(&mut p, &[Array::vector(vec![1.0, -1.0])], &names(1)).unwrap();
            assert_eq!(s.step_count(), k);
        }
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut p = vec![Array::vector(vec![0.0]), Array::vector(vec![1.0])];
        let mut s = AdamState::new(&[1, 1], 1e-3);
        let err = s
            .step(&mut p, &[Array::vector(vec![0.0]), Array::vector(vec![f64::NAN])], &["enc0.w".into(), "enc0.b".into()])
            .unwrap_err();
        assert!(matches!(&err, AdError::NonFinite(n) if n == "enc0.b"), "{err}");
        assert_eq!(s.step_count(), 0);
        assert_eq!(p[1].data(), &[1.0]);
    }
}
