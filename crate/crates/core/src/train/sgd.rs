//! Stochastic gradient descent with classical momentum and coupled weight
//! decay.

use crate::engine::scalar::Scalar;
use crate::error::{Error, Result};
use crate::model::graph::{Model, ParamId};

/// One momentum update on a raw buffer:
///
/// ```text
/// v <- momentum * v - lr * (g + weight_decay * theta)
/// theta <- theta + v
/// ```
pub fn sgd_update<S: Scalar>(
    theta: &mut [S],
    grad: &[S],
    velocity: &mut [S],
    lr: S,
    momentum: S,
    weight_decay: S,
) {
    debug_assert_eq!(theta.len(), grad.len());
    debug_assert_eq!(theta.len(), velocity.len());
    for ((t, &g), v) in theta.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * (g + weight_decay * *t);
        *t += *v;
    }
}

/// Per-model optimizer state: one velocity buffer per trainable parameter,
/// allocated lazily on first use.
pub struct Sgd<S> {
    momentum: f64,
    velocity: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Sgd<S> {
    pub fn new(model: &Model<S>, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        Ok(Sgd { momentum, velocity: vec![None; model.params().len()] })
    }

    /// Apply one step to every (parameter, gradient) pair. Rejects
    /// non-finite gradients, naming the offending parameter.
    pub fn step(
        &mut self,
        model: &mut Model<S>,
        grads: &[(ParamId, Vec<S>)],
        lr: f64,
        weight_decay: f64,
    ) -> Result<()> {
        for (pid, grad) in grads {
            let param = model.params_mut().get_mut(*pid);
            debug_assert!(param.trainable, "gradient for non-trainable `{}`", param.name);
            if !grad.iter().all(|g| g.is_finite()) {
                return Err(Error::NonFinite { what: "gradient", name: param.name.clone() });
            }
            let velocity = self.velocity[*pid]
                .get_or_insert_with(|| vec![S::zero(); param.value.len()]);
            sgd_update(
                param.value.data_mut(),
                grad,
                velocity,
                S::of(lr),
                S::of(self.momentum),
                S::of(weight_decay),
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::tensor::Tensor;
    use crate::model::zoo::build_densenet121;

    #[test]
    fn plain_gradient_descent_when_momentum_and_decay_are_zero() {
        let mut theta = [1.0f64];
        let mut v = [0.0];
        sgd_update(&mut theta, &[0.5], &mut v, 0.1, 0.0, 0.0);
        assert_eq!(theta[0], 0.95);
    }

    #[test]
    fn momentum_recurrence_hand_unrolled() {
        // momentum 0.9, g = 1 constant, lr = 0.1, theta0 = 0:
        // v1 = -0.1, theta1 = -0.1; v2 = -0.19, theta2 = -0.29.
        let mut theta = [0.0f64];
        let mut v = [0.0];
        sgd_update(&mut theta, &[1.0], &mut v, 0.1, 0.9, 0.0);
        assert!((v[0] - -0.1).abs() < 1e-15);
        assert!((theta[0] - -0.1).abs() < 1e-15);
        sgd_update(&mut theta, &[1.0], &mut v, 0.1, 0.9, 0.0);
        assert!((v[0] - -0.19).abs() < 1e-15);
        assert!((theta[0] - -0.29).abs() < 1e-15);
    }

    #[test]
    fn decay_alone_shrinks_parameters_monotonically() {
        let mut theta = [2.0f64];
        let mut v = [0.0];
        let mut prev = theta[0];
        for _ in 0..50 {
            sgd_update(&mut theta, &[0.0], &mut v, 0.1, 0.0, 1e-5);
            assert!(theta[0].abs() < prev.abs());
            prev = theta[0];
        }
    }

    #[test]
    fn one_step_reduces_a_convex_quadratic() {
        // loss = 0.5 * theta^2, gradient = theta.
        let mut theta = [3.0f64];
        let mut v = [0.0];
        let before = 0.5 * theta[0] * theta[0];
        sgd_update(&mut theta, &[3.0], &mut v, 0.5, 0.0, 0.0);
        assert!(0.5 * theta[0] * theta[0] < before);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut model = build_densenet121::<f32>(5, 8, 64, 1).unwrap();
        let mut sgd = Sgd::new(&model, 0.9).unwrap();
        let pid = model.params().id_of("features.conv0.weight").unwrap();
        let len = model.params().get(pid).value.len();
        let mut grad = vec![0.0f32; len];
        grad[3] = f32::NAN;
        let err = sgd.step(&mut model, &[(pid, grad)], 1e-3, 0.0).unwrap_err().to_string();
        assert!(err.contains("features.conv0.weight"), "{err}");
    }

    #[test]
    fn rejects_bad_momentum_and_keeps_velocity_between_steps() {
        let model = build_densenet121::<f32>(5, 8, 64, 1).unwrap();
        assert!(Sgd::new(&model, 1.0).is_err());
        assert!(Sgd::new(&model, -0.1).is_err());

        // Velocity persists: two steps with momentum on a toy model.
        let mut model = build_densenet121::<f32>(5, 8, 64, 1).unwrap();
        let mut sgd = Sgd::new(&model, 0.9).unwrap();
        let pid = model.params().id_of("classifier.bias").unwrap();
        let len = model.params().get(pid).value.len();
        model.params_mut().get_mut(pid).value = Tensor::zeros(vec![len]);
        let grad = vec![1.0f32; len];
        sgd.step(&mut model, &[(pid, grad.clone())], 0.1, 0.0).unwrap();
        sgd.step(&mut model, &[(pid, grad)], 0.1, 0.0).unwrap();
        for &t in model.params().get(pid).value.data() {
            assert!((t - -0.29).abs() < 1e-6);
        }
    }
}
