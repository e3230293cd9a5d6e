//! AdamW with decoupled weight decay and bias-corrected moments.

use super::params::ModelParams;
use crate::numeric::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub step: u64,
    pub hyper: AdamHyper,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(params: &ModelParams<T>, hyper: AdamHyper) -> Self {
        OptimizerState {
            m: ModelParams::zeros(&params.config),
            v: ModelParams::zeros(&params.config),
            step: 0,
            hyper,
        }
    }
}

/// One decoupled-weight-decay update: p *= (1 - lr*wd), then
/// p -= lr * m_hat / (sqrt(v_hat) + eps).
pub fn adamw_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut OptimizerState<T>,
    lr: f64,
) {
    state.step += 1;
    let h = state.hyper;
    let b1 = T::from_f64(h.beta1);
    let b2 = T::from_f64(h.beta2);
    let one = T::one();
    let bc1 = T::from_f64(1.0 - crate::numeric::f64x::powi(h.beta1, state.step as i32));
    let bc2 = T::from_f64(1.0 - crate::numeric::f64x::powi(h.beta2, state.step as i32));
    let eps = T::from_f64(h.eps);
    let lr_t = T::from_f64(lr);
    let decay = T::from_f64(1.0 - lr * h.weight_decay);

    for idx in 0..params.tensor_count() {
        let g = grads.tensor(idx) as *const super::tensor::Mat<T>;
        let m = state.m.tensor_mut(idx) as *mut super::tensor::Mat<T>;
        let v = state.v.tensor_mut(idx) as *mut super::tensor::Mat<T>;
        let p = params.tensor_mut(idx);
        // distinct allocations; raw pointers only sidestep the double
        // mutable borrow of state
        let (g, m, v) = unsafe { (&*g, &mut *m, &mut *v) };
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (one - b1) * gi;
            v.data[i] = b2 * v.data[i] + (one - b2) * gi * gi;
            let m_hat = m.data[i] / bc1;
            let v_hat = v.data[i] / bc2;
            p.data[i] = p.data[i] * decay - lr_t * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModelConfig;
    use crate::model::params::init_params;

    fn setup(wd: f64) -> (ModelParams<f64>, OptimizerState<f64>) {
        let mut c = ModelConfig::sized(1, 2, 8);
        c.vocab_size = 5;
        let p: ModelParams<f64> = init_params(&c, 0);
        let h = AdamHyper {
            weight_decay: wd,
            ..AdamHyper::default()
        };
        let s = OptimizerState::new(&p, h);
        (p, s)
    }

    #[test]
    fn zero_grads_zero_decay_leave_params_unchanged() {
        let (mut p, mut s) = setup(0.0);
        let before = p.clone();
        let zeros = ModelParams::zeros(&p.config);
        adamw_step(&mut p, &zeros, &mut s, 1e-3);
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn decay_shrinks_params_by_expected_factor() {
        let (mut p, mut s) = setup(0.1);
        let before = p.embed.at(0, 0);
        let zeros = ModelParams::zeros(&p.config);
        let lr = 1e-2;
        adamw_step(&mut p, &zeros, &mut s, lr);
        let expect = before * (1.0 - lr * 0.1);
        assert!((p.embed.at(0, 0) - expect).abs() < 1e-15);
    }

    #[test]
    fn single_scalar_step_matches_hand_calculation() {
        let (mut p, mut s) = setup(0.0);
        let theta = 0.5f64;
        *p.embed.at_mut(0, 0) = theta;
        let mut grads = ModelParams::zeros(&p.config);
        let g = 0.25f64;
        *grads.embed.at_mut(0, 0) = g;
        let lr = 1e-3;
        adamw_step(&mut p, &grads, &mut s, lr);
        // step 1: m = (1-b1) g, v = (1-b2) g^2; m_hat = g, v_hat = g^2
        let expect = theta - lr * g / (g.abs() + 1e-8);
        assert!((p.embed.at(0, 0) - expect).abs() < 1e-12);
    }

    #[test]
    fn moments_track_across_two_steps() {
        let (mut p, mut s) = setup(0.0);
        *p.embed.at_mut(0, 0) = 1.0;
        let mut grads = ModelParams::zeros(&p.config);
        *grads.embed.at_mut(0, 0) = 1.0;
        let lr = 0.1;
        adamw_step(&mut p, &grads, &mut s, lr);
        adamw_step(&mut p, &grads, &mut s, lr);
        // constant unit gradient: m_hat = 1, v_hat = 1 at every step
        let expect = 1.0 - 2.0 * lr * 1.0 / (1.0 + 1e-8);
        assert!((p.embed.at(0, 0) - expect).abs() < 1e-9);
        assert_eq!(s.step, 2);
    }
}
