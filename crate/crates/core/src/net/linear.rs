use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::lstm::INIT_SCALE;
use super::params::{Gradients, Init, ParamId, ParameterStore};
use super::{axpy, matvec_acc, matvec_t_acc, outer_acc};

/// Affine map `y = W x + b` with `W` of shape `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub input: usize,
    pub output: usize,
    pub(crate) w: ParamId,
    pub(crate) b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParameterStore, name: &str, input: usize, output: usize) -> Self {
        Linear {
            input,
            output,
            w: store.add(&format!("{name}.w"), &[output, input], Init::Uniform(INIT_SCALE)),
            b: store.add(&format!("{name}.b"), &[output], Init::Zeros),
        }
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> ParamId {
        self.b
    }

    pub fn forward(&self, store: &ParameterStore, x: &[f64]) -> Vec<f64> {
        let mut y = store.get(self.b).to_vec();
        matvec_acc(store.get(self.w), x, &mut y);
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, store: &ParameterStore, grads: &mut Gradients, x: &[f64], dy: &[f64]) -> Vec<f64> {
        outer_acc(grads.get_mut(self.w), dy, x);
        axpy(1.0, dy, grads.get_mut(self.b));
        let mut dx = vec![0.0; self.input];
        matvec_t_acc(store.get(self.w), dy, &mut dx);
        dx
    }
}
