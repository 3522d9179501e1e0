//! Minimal trainable sequence-model substrate.
//!
//! Parameters live in a [`ParameterStore`]; layers hold [`ParamId`]s and read
//! values from the store during the forward pass and accumulate into a
//! separate [`Gradients`] buffer during the backward pass.

mod adam;
mod early_stop;
mod gradcheck;
mod linear;
mod loss;
mod lstm;
mod params;
mod train;

pub use adam::{adam_update, AdamConfig};
pub use early_stop::{EarlyStopper, Objective, Verdict};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckEntry, GradCheckReport};
pub use linear::Linear;
pub use loss::{cross_entropy, log_softmax, softmax, softmax_masked, CE_EPSILON};
pub use lstm::{
    dropout_mask, lstm_step, Direction, LayerTrace, LstmLayer, LstmStack, LstmState, StackState,
    StackTrace,
};
pub use train::{fit, EpochRecord, TrainConfig, TrainLog, Trainable};
pub use params::{clip_global_norm, Gradients, Init, ParamId, ParamInfo, ParameterStore};

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// `out += W x` for row-major `W` with `x.len()` columns.
pub(crate) fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), cols * out.len());
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += Wᵀ dy`.
pub(crate) fn matvec_t_acc(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    debug_assert_eq!(w.len(), cols * dy.len());
    for (&d, row) in dy.iter().zip(w.chunks_exact(cols)) {
        if d != 0.0 {
            for (x, a) in dx.iter_mut().zip(row) {
                *x += d * a;
            }
        }
    }
}

/// `dW += dy xᵀ`.
pub(crate) fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(dw.len(), cols * dy.len());
    for (&d, row) in dy.iter().zip(dw.chunks_exact_mut(cols)) {
        if d != 0.0 {
            for (g, b) in row.iter_mut().zip(x) {
                *g += d * b;
            }
        }
    }
}

pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
