use serde::{Deserialize, Serialize};

use super::{NetError, Result};
use crate::scalar::Scalar;

/// First-order optimizer family. The default Adam hyperparameters are the
/// standard decay rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptKind<T> {
    Sgd,
    SgdMomentum { momentum: T },
    Adam { beta1: T, beta2: T, epsilon: T },
}

impl<T: Scalar> OptKind<T> {
    pub fn adam_default() -> Self {
        OptKind::Adam {
            beta1: T::c(0.9),
            beta2: T::c(0.999),
            epsilon: T::c(1e-8),
        }
    }
}

/// Optimizer state over one flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState<T> {
    pub kind: OptKind<T>,
    pub learning_rate: T,
    pub step_count: u64,
    first_moment: Vec<T>,
    second_moment: Vec<T>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(kind: OptKind<T>, learning_rate: T, dim: usize) -> Self {
        let needs_first = !matches!(kind, OptKind::Sgd);
        let needs_second = matches!(kind, OptKind::Adam { .. });
        Self {
            kind,
            learning_rate,
            step_count: 0,
            first_moment: if needs_first { vec![T::zero(); dim] } else { Vec::new() },
            second_moment: if needs_second { vec![T::zero(); dim] } else { Vec::new() },
        }
    }

    /// One update following the optimizer's standard recurrence. Fails on
    /// non-finite gradients; `describe` maps a flat index to its block name.
    pub fn step(
        &mut self,
        params: &mut [T],
        grads: &[T],
        describe: impl Fn(usize) -> String,
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(NetError::GradLengthMismatch {
                params: params.len(),
                grads: grads.len(),
            });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NetError::NonFiniteGrad {
                block: describe(index),
                index,
            });
        }
        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p = *p - lr * g;
                }
            }
            OptKind::SgdMomentum { momentum } => {
                for ((p, &g), m) in params.iter_mut().zip(grads).zip(&mut self.first_moment) {
                    *m = momentum * *m + g;
                    *p = *p - lr * *m;
                }
            }
            OptKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let t = T::from_u64(self.step_count).unwrap();
                let bc1 = T::one() - beta1.powf(t);
                let bc2 = T::one() - beta2.powf(t);
                for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
                    let m = &mut self.first_moment[i];
                    *m = beta1 * *m + (T::one() - beta1) * g;
                    let v = &mut self.second_moment[i];
                    *v = beta2 * *v + (T::one() - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p = *p - lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_basic_step() {
        let mut state = OptimizerState::new(OptKind::<f64>::Sgd, 0.1, 1);
        let mut p = [1.0];
        state.step(&mut p, &[2.0], |_| "p".into()).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn adam_first_step_is_signed_unit() {
        // t=1: m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps).
        let lr = 1e-3;
        for &g in &[0.7_f64, -2.5, 4.0e-3] {
            let mut state = OptimizerState::new(OptKind::adam_default(), lr, 1);
            let mut p = [0.5];
            state.step(&mut p, &[g], |_| "p".into()).unwrap();
            let expected = 0.5 - lr * g / (g.abs() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-15, "g={g}");
            assert!((p[0] - (0.5 - lr * g.signum())).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_gradient_behaviour() {
        let mut sgd = OptimizerState::new(OptKind::<f64>::Sgd, 0.1, 2);
        let mut p = [1.0, -2.0];
        sgd.step(&mut p, &[0.0, 0.0], |_| "p".into()).unwrap();
        assert_eq!(p, [1.0, -2.0]);

        let mut adam = OptimizerState::new(OptKind::<f64>::adam_default(), 0.1, 2);
        let mut q = [1.0, -2.0];
        adam.step(&mut q, &[0.0, 0.0], |_| "p".into()).unwrap();
        assert!((q[0] - 1.0).abs() <= 0.1);
        assert!((q[1] + 2.0).abs() <= 0.1);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut state = OptimizerState::new(OptKind::<f64>::Sgd, 0.1, 3);
        let mut p = [0.0; 3];
        let err = state
            .step(&mut p, &[0.0, f64::NAN, 0.0], |i| format!("block{i}"))
            .unwrap_err();
        match err {
            NetError::NonFiniteGrad { block, index } => {
                assert_eq!(index, 1);
                assert_eq!(block, "block1");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn momentum_accumulates() {
        let mut state =
            OptimizerState::new(OptKind::SgdMomentum { momentum: 0.9 }, 0.1, 1);
        let mut p = [0.0_f64];
        state.step(&mut p, &[1.0], |_| "p".into()).unwrap();
        assert!((p[0] + 0.1).abs() < 1e-15);
        state.step(&mut p, &[1.0], |_| "p".into()).unwrap();
        // velocity = 0.9 * 1 + 1 = 1.9
        assert!((p[0] + 0.1 + 0.19).abs() < 1e-15);
    }
}
