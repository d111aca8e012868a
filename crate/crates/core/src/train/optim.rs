use crate::error::{Error, Result};
use crate::model::ParamStore;
use crate::nn::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments for every parameter of a store.
#[derive(Clone, Debug)]
pub struct OptimState {
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimState {
    pub fn new(params: &ParamStore<f32>) -> Self {
        let zeros = || params.iter().map(|e| Tensor::zeros(e.value.dims())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

/// One bias-corrected Adam update using the gradients held in `params`.
pub fn adam_step(params: &mut ParamStore<f32>, state: &mut OptimState, lr: f64) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::Internal(format!(
            "optimizer tracks {} tensors, store has {}",
            state.m.len(),
            params.len()
        )));
    }
    if let Some(e) = params.iter().find(|e| !e.has_grad()) {
        return Err(Error::Internal(format!("missing gradient for {}", e.name)));
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for ((e, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let g = e.grad.data();
        let theta = e.value.data_mut();
        for (((p, mi), vi), &gi) in theta
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g)
        {
            let gi = gi as f64;
            let mn = b1 * *mi as f64 + (1.0 - b1) * gi;
            let vn = b2 * *vi as f64 + (1.0 - b2) * gi * gi;
            *mi = mn as f32;
            *vi = vn as f32;
            let step = lr * (mn / c1) / ((vn / c2).sqrt() + state.eps);
            *p = (*p as f64 - step) as f32;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Graph, Rng, Tape};
    use proptest::prelude::*;

    fn store(values: &[f32]) -> ParamStore<f32> {
        let mut s = ParamStore::new();
        s.push("w", vec![values.len()], Tensor::new([1, values.len(), 1, 1], values.to_vec()).unwrap())
            .unwrap();
        s
    }

    fn set_grad(s: &mut ParamStore<f32>, g: &[f32]) {
        let mut tape = Tape::new();
        let vars = s.bind(&mut tape);
        let gt = tape.leaf(Tensor::new([1, g.len(), 1, 1], g.to_vec()).unwrap());
        let prod = tape.mul(&vars[0], &gt).unwrap();
        let y = tape.sum(prod).unwrap();
        let mut grads = tape.backward(y).unwrap();
        s.load_grads(&vars, &mut grads).unwrap();
    }

    #[test]
    fn first_step_is_sign_times_lr() {
        let mut s = store(&[1.0, -2.0, 0.5]);
        set_grad(&mut s, &[0.3, -4.0, 1e-3]);
        let mut st = OptimState::new(&s);
        adam_step(&mut s, &mut st, 1e-2).unwrap();
        let v = s.iter().next().unwrap().value.data().to_vec();
        assert!((v[0] - 0.99).abs() < 1e-6);
        assert!((v[1] + 1.99).abs() < 1e-6);
        assert!((v[2] - 0.49).abs() < 1e-5);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = store(&[1.0, 2.0]);
        set_grad(&mut s, &[0.0, 0.0]);
        let before = s.clone();
        let mut st = OptimState::new(&s);
        adam_step(&mut s, &mut st, 0.1).unwrap();
        assert!(s.bitwise_eq(&before));
        assert_eq!(st.t, 1);
    }

    #[test]
    fn missing_gradient() {
        let mut s = store(&[1.0]);
        let mut st = OptimState::new(&s);
        assert!(matches!(adam_step(&mut s, &mut st, 0.1), Err(Error::Internal(_))));
        assert_eq!(st.t, 0);
    }

    #[test]
    fn deterministic_ten_steps() {
        let run = || {
            let mut rng = Rng::new(3);
            let mut s = store(&[0.1; 6]);
            let mut st = OptimState::new(&s);
            for _ in 0..10 {
                let g: Vec<f32> = (0..6).map(|_| rng.normal() as f32).collect();
                set_grad(&mut s, &g);
                adam_step(&mut s, &mut st, 1e-3).unwrap();
            }
            s
        };
        assert!(run().bitwise_eq(&run()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn step_bounded(grads in prop::collection::vec(prop::collection::vec(-10f32..10.0, 4), 1..8), lr in 1e-6f64..1e-1) {
            let mut s = store(&[0.0; 4]);
            let mut st = OptimState::new(&s);
            for (k, g) in grads.iter().enumerate() {
                let before = s.iter().next().unwrap().value.data().to_vec();
                set_grad(&mut s, g);
                adam_step(&mut s, &mut st, lr).unwrap();
                let after = s.iter().next().unwrap().value.data().to_vec();
                // |m̂|/√v̂ is at most 1 at t = 1; afterwards Cauchy–Schwarz gives
                // (1−β1)/√(1−β2) · √(1/(1−β1²/β2)) · √(1−β2^t)/(1−β1^t).
                let t = (k + 1) as i32;
                let bound = if t == 1 {
                    1.0
                } else {
                    (1.0 - ADAM_BETA1) / (1.0 - ADAM_BETA2).sqrt()
                        * (1.0 / (1.0 - ADAM_BETA1 * ADAM_BETA1 / ADAM_BETA2)).sqrt()
                        * (1.0 - ADAM_BETA2.powi(t)).sqrt()
                        / (1.0 - ADAM_BETA1.powi(t))
                };
                for (a, b) in before.iter().zip(&after) {
                    prop_assert!(((a - b).abs() as f64) <= 2.0 * lr * bound + 1e-7);
                }
            }
        }
    }
}
