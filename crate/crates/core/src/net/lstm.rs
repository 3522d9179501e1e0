use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::params::{Gradients, Init, ParamId, ParameterStore};
use super::{axpy, matvec_acc, matvec_t_acc, outer_acc, sigmoid};
use crate::seed::Rng;
use crate::{Error, Result};

pub const INIT_SCALE: f64 = 0.08;
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// One LSTM layer with gate order input, forget, cell, output.
///
/// Besides the per-step input the layer can take a *static* input that is
/// the same at every step of a sequence (conditioning channels). Its
/// contribution `W_s s + b` is computed once per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub input: usize,
    pub static_input: usize,
    pub hidden: usize,
    w_x: ParamId,
    w_h: ParamId,
    w_s: Option<ParamId>,
    b: ParamId,
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    // activated gates, length 4H: i, f, g, o
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Forward record of one layer over a sequence, indexed by position.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    steps: Vec<StepCache>,
    reverse: bool,
    static_in: Option<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl LstmLayer {
    pub fn new(store: &mut ParameterStore, name: &str, input: usize, static_input: usize, hidden: usize) -> Self {
        let g = 4 * hidden;
        let w_x = store.add(&format!("{name}.w_x"), &[g, input], Init::Uniform(INIT_SCALE));
        let w_h = store.add(&format!("{name}.w_h"), &[g, hidden], Init::Uniform(INIT_SCALE));
        let w_s = (static_input > 0)
            .then(|| store.add(&format!("{name}.w_s"), &[g, static_input], Init::Uniform(INIT_SCALE)));
        let b = store.add(&format!("{name}.b"), &[g], Init::Zeros);
        store.get_mut(b)[hidden..2 * hidden].fill(FORGET_BIAS);
        LstmLayer {
            input,
            static_input,
            hidden,
            w_x,
            w_h,
            w_s,
            b,
        }
    }

    /// `b + W_s s`, the per-sequence constant part of the gate
    /// pre-activations.
    pub fn static_bias(&self, store: &ParameterStore, s: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut bias = store.get(self.b).to_vec();
        match (self.w_s, s) {
            (Some(w), Some(s)) => {
                check_dim("static input", self.static_input, s.len())?;
                matvec_acc(store.get(w), s, &mut bias);
            }
            (None, None) => {}
            (None, Some(s)) if s.is_empty() => {}
            (Some(_), None) => check_dim("static input", self.static_input, 0)?,
            (None, Some(s)) => check_dim("static input", 0, s.len())?,
        }
        Ok(bias)
    }

    fn step_cached(&self, store: &ParameterStore, bias: &[f64], x: &[f64], prev: &LstmState) -> (LstmState, StepCache) {
        let h = self.hidden;
        let mut z = bias.to_vec();
        matvec_acc(store.get(self.w_x), x, &mut z);
        matvec_acc(store.get(self.w_h), &prev.h, &mut z);
        for v in &mut z[..2 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut z[2 * h..3 * h] {
            *v = libm::tanh(*v);
        }
        for v in &mut z[3 * h..] {
            *v = sigmoid(*v);
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hn = vec![0.0; h];
        for k in 0..h {
            c[k] = z[h + k] * prev.c[k] + z[k] * z[2 * h + k];
            tanh_c[k] = libm::tanh(c[k]);
            hn[k] = z[3 * h + k] * tanh_c[k];
        }
        let cache = StepCache {
            x: x.to_vec(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            gates: z,
            tanh_c,
        };
        (LstmState { h: hn, c }, cache)
    }

    /// One recurrence step with a precomputed [`static_bias`](Self::static_bias).
    pub fn step(&self, store: &ParameterStore, bias: &[f64], x: &[f64], prev: &LstmState) -> LstmState {
        self.step_cached(store, bias, x, prev).0
    }

    pub fn forward_seq(
        &self,
        store: &ParameterStore,
        xs: &[Vec<f64>],
        static_in: Option<&[f64]>,
        reverse: bool,
    ) -> Result<LayerTrace> {
        let bias = self.static_bias(store, static_in)?;
        let n = xs.len();
        let mut state = LstmState::zeros(self.hidden);
        let mut steps = Vec::with_capacity(n);
        let mut outputs = vec![Vec::new(); n];
        for k in 0..n {
            let t = if reverse { n - 1 - k } else { k };
            check_dim("lstm input", self.input, xs[t].len())?;
            let (next, cache) = self.step_cached(store, &bias, &xs[t], &state);
            outputs[t] = next.h.clone();
            steps.push(cache);
            state = next;
        }
        Ok(LayerTrace {
            steps,
            reverse,
            static_in: static_in.map(<[f64]>::to_vec),
            outputs,
        })
    }

    /// Backpropagation through time. `dh[t]` is the loss gradient with
    /// respect to the output at position `t`. Returns input gradients per
    /// position and the static-input gradient.
    pub fn backward_seq(
        &self,
        store: &ParameterStore,
        grads: &mut Gradients,
        trace: &LayerTrace,
        dh: &[Vec<f64>],
    ) -> (Vec<Vec<f64>>, Option<Vec<f64>>) {
        let h = self.hidden;
        let n = trace.steps.len();
        let w_x = store.get(self.w_x);
        let w_h = store.get(self.w_h);
        let mut dxs = vec![Vec::new(); n];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz_sum = vec![0.0; 4 * h];
        let mut dz = vec![0.0; 4 * h];
        for k in (0..n).rev() {
            let t = if trace.reverse { n - 1 - k } else { k };
            let s = &trace.steps[k];
            let g = &s.gates;
            for j in 0..h {
                let dhj = dh[t][j] + dh_next[j];
                let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = s.tanh_c[j];
                let dc = dc_next[j] + dhj * o * (1.0 - tc * tc);
                dz[j] = dc * gg * i * (1.0 - i);
                dz[h + j] = dc * s.c_prev[j] * f * (1.0 - f);
                dz[2 * h + j] = dc * i * (1.0 - gg * gg);
                dz[3 * h + j] = dhj * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            outer_acc(grads.get_mut(self.w_x), &dz, &s.x);
            outer_acc(grads.get_mut(self.w_h), &dz, &s.h_prev);
            axpy(1.0, &dz, &mut dz_sum);
            let mut dx = vec![0.0; self.input];
            matvec_t_acc(w_x, &dz, &mut dx);
            dxs[t] = dx;
            dh_next.iter_mut().for_each(|x| *x = 0.0);
            matvec_t_acc(w_h, &dz, &mut dh_next);
        }
        axpy(1.0, &dz_sum, grads.get_mut(self.b));
        let ds = match (self.w_s, &trace.static_in) {
            (Some(w), Some(s)) => {
                outer_acc(grads.get_mut(w), &dz_sum, s);
                let mut ds = vec![0.0; self.static_input];
                matvec_t_acc(store.get(w), &dz_sum, &mut ds);
                Some(ds)
            }
            _ => None,
        };
        (dxs, ds)
    }
}

fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Single LSTM recurrence step on explicit state vectors.
pub fn lstm_step(
    layer: &LstmLayer,
    store: &ParameterStore,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    static_in: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim("lstm input", layer.input, x.len())?;
    check_dim("lstm h_prev", layer.hidden, h_prev.len())?;
    check_dim("lstm c_prev", layer.hidden, c_prev.len())?;
    let bias = layer.static_bias(store, static_in)?;
    let prev = LstmState {
        h: h_prev.to_vec(),
        c: c_prev.to_vec(),
    };
    let s = layer.step(store, &bias, x, &prev);
    Ok((s.h, s.c))
}

/// Inverted-dropout mask: entries are 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask(n: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    fwd: LstmLayer,
    bwd: Option<LstmLayer>,
}

/// Stack of LSTM layers. Dropout is applied to the inputs of every layer
/// above the first, during training only. Static input feeds the first
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    pub direction: Direction,
    pub hidden: usize,
    pub dropout: f64,
    levels: Vec<Level>,
}

#[derive(Debug, Clone)]
pub struct StackTrace {
    levels: Vec<(LayerTrace, Option<LayerTrace>)>,
    masks: Vec<Option<Vec<Vec<f64>>>>,
    /// Top-layer outputs per position (`hidden` or `2·hidden` wide).
    pub outputs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackState {
    pub layers: Vec<LstmState>,
    biases: Vec<Vec<f64>>,
}

impl LstmStack {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParameterStore,
        name: &str,
        input: usize,
        static_input: usize,
        hidden: usize,
        n_layers: usize,
        direction: Direction,
        dropout: f64,
    ) -> Self {
        assert!(n_layers >= 1, "an LSTM stack needs at least one layer");
        assert!((0.0..1.0).contains(&dropout), "dropout must be in [0, 1)");
        let dirs = if direction == Direction::Bidirectional { 2 } else { 1 };
        let levels = (0..n_layers)
            .map(|l| {
                let (inp, st) = if l == 0 { (input, static_input) } else { (hidden * dirs, 0) };
                let fwd = LstmLayer::new(store, &format!("{name}.l{l}.fwd"), inp, st, hidden);
                let bwd = (direction == Direction::Bidirectional)
                    .then(|| LstmLayer::new(store, &format!("{name}.l{l}.bwd"), inp, st, hidden));
                Level { fwd, bwd }
            })
            .collect();
        LstmStack {
            direction,
            hidden,
            dropout,
            levels,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.levels.len()
    }

    pub fn output_dim(&self) -> usize {
        match self.direction {
            Direction::Forward => self.hidden,
            Direction::Bidirectional => 2 * self.hidden,
        }
    }

    /// Full-sequence forward pass. Passing an RNG enables dropout.
    pub fn forward(
        &self,
        store: &ParameterStore,
        xs: &[Vec<f64>],
        static_in: Option<&[f64]>,
        mut dropout_rng: Option<&mut Rng>,
    ) -> Result<StackTrace> {
        let mut levels = Vec::with_capacity(self.levels.len());
        let mut masks = Vec::with_capacity(self.levels.len());
        let mut input: Vec<Vec<f64>> = xs.to_vec();
        for (l, level) in self.levels.iter().enumerate() {
            let st = if l == 0 { static_in } else { None };
            let mask = match (&mut dropout_rng, l > 0 && self.dropout > 0.0) {
                (Some(rng), true) => {
                    let m: Vec<Vec<f64>> = input
                        .iter()
                        .map(|x| dropout_mask(x.len(), self.dropout, rng))
                        .collect();
                    for (x, mk) in input.iter_mut().zip(&m) {
                        x.iter_mut().zip(mk).for_each(|(a, b)| *a *= b);
                    }
                    Some(m)
                }
                _ => None,
            };
            let f = level.fwd.forward_seq(store, &input, st, false)?;
            let b = match &level.bwd {
                Some(bl) => Some(bl.forward_seq(store, &input, st, true)?),
                None => None,
            };
            input = match &b {
                None => f.outputs.clone(),
                Some(b) => f
                    .outputs
                    .iter()
                    .zip(&b.outputs)
                    .map(|(x, y)| x.iter().chain(y).copied().collect())
                    .collect(),
            };
            levels.push((f, b));
            masks.push(mask);
        }
        Ok(StackTrace {
            levels,
            masks,
            outputs: input,
        })
    }

    /// Returns gradients of the inputs per position and of the static input.
    pub fn backward(
        &self,
        store: &ParameterStore,
        grads: &mut Gradients,
        trace: &StackTrace,
        d_outputs: &[Vec<f64>],
    ) -> (Vec<Vec<f64>>, Option<Vec<f64>>) {
        let h = self.hidden;
        let mut d: Vec<Vec<f64>> = d_outputs.to_vec();
        let mut d_static = None;
        for l in (0..self.levels.len()).rev() {
            let level = &self.levels[l];
            let (ft, bt) = &trace.levels[l];
            let (mut dx, ds) = match (&level.bwd, bt) {
                (Some(bl), Some(bt)) => {
                    let df: Vec<Vec<f64>> = d.iter().map(|v| v[..h].to_vec()).collect();
                    let db: Vec<Vec<f64>> = d.iter().map(|v| v[h..].to_vec()).collect();
                    let (mut dxf, dsf) = level.fwd.backward_seq(store, grads, ft, &df);
                    let (dxb, dsb) = bl.backward_seq(store, grads, bt, &db);
                    for (a, b) in dxf.iter_mut().zip(&dxb) {
                        axpy(1.0, b, a);
                    }
                    let ds = match (dsf, dsb) {
                        (Some(mut a), Some(b)) => {
                            axpy(1.0, &b, &mut a);
                            Some(a)
                        }
                        _ => None,
                    };
                    (dxf, ds)
                }
                _ => level.fwd.backward_seq(store, grads, ft, &d),
            };
            if let Some(m) = &trace.masks[l] {
                for (x, mk) in dx.iter_mut().zip(m) {
                    x.iter_mut().zip(mk).for_each(|(a, b)| *a *= b);
                }
            }
            if l == 0 {
                d_static = ds;
            }
            d = dx;
        }
        (d, d_static)
    }

    /// Initial state for step-by-step inference (forward stacks only).
    pub fn start(&self, store: &ParameterStore, static_in: Option<&[f64]>) -> Result<StackState> {
        let mut biases = Vec::with_capacity(self.levels.len());
        for (l, level) in self.levels.iter().enumerate() {
            biases.push(level.fwd.static_bias(store, if l == 0 { static_in } else { None })?);
        }
        Ok(StackState {
            layers: vec![LstmState::zeros(self.hidden); self.levels.len()],
            biases,
        })
    }

    /// Advances a forward stack by one input; returns the top output.
    pub fn step(&self, store: &ParameterStore, state: &mut StackState, x: &[f64]) -> Result<Vec<f64>> {
        if self.direction != Direction::Forward {
            return Err(Error::Config("step-wise inference needs a forward stack".into()));
        }
        let mut input = x.to_vec();
        for (l, level) in self.levels.iter().enumerate() {
            check_dim("lstm input", level.fwd.input, input.len())?;
            let next = level.fwd.step(store, &state.biases[l], &input, &state.layers[l]);
            input = next.h.clone();
            state.layers[l] = next;
        }
        Ok(input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{grad_check, GradCheckConfig};
    use rand::SeedableRng;

    fn zero_layer(hidden: usize) -> (ParameterStore, LstmLayer) {
        let mut store = ParameterStore::new(0);
        let layer = LstmLayer::new(&mut store, "l", 2, 0, hidden);
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).fill(0.0);
        }
        (store, layer)
    }

    #[test]
    fn zero_weights_give_half_gates() {
        let (store, layer) = zero_layer(3);
        let (h, c) = lstm_step(&layer, &store, &[0.3, -1.0], &[0.0; 3], &[0.0; 3], None).unwrap();
        assert_eq!(h, [0.0; 3]);
        assert_eq!(c, [0.0; 3]);
    }

    #[test]
    fn zero_weights_scalar_cell_decays() {
        let (store, layer) = zero_layer(1);
        let (h, c) = lstm_step(&layer, &store, &[1.0, 2.0], &[0.0], &[1.0], None).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-12);
        assert!((h[0] - 0.5 * libm::tanh(0.5)).abs() < 1e-12);
        assert!((h[0] - 0.23106).abs() < 1e-5);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (store, layer) = zero_layer(2);
        assert!(matches!(
            lstm_step(&layer, &store, &[1.0], &[0.0; 2], &[0.0; 2], None),
            Err(Error::Dimension { .. })
        ));
        assert!(lstm_step(&layer, &store, &[1.0, 1.0], &[0.0; 3], &[0.0; 2], None).is_err());
    }

    /// Straight-line evaluation of the gate equations, written independently
    /// of the layer code.
    fn reference_step(w_x: &[f64], w_h: &[f64], b: &[f64], x: &[f64], h0: &[f64], c0: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hn = h0.len();
        let pre = |r: usize| {
            let mut s = b[r];
            for (j, xj) in x.iter().enumerate() {
                s += w_x[r * x.len() + j] * xj;
            }
            for (j, hj) in h0.iter().enumerate() {
                s += w_h[r * hn + j] * hj;
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + libm::exp(-v));
        let mut h = Vec::new();
        let mut c = Vec::new();
        for k in 0..hn {
            let i = sig(pre(k));
            let f = sig(pre(hn + k));
            let g = libm::tanh(pre(2 * hn + k));
            let o = sig(pre(3 * hn + k));
            let ck = f * c0[k] + i * g;
            c.push(ck);
            h.push(o * libm::tanh(ck));
        }
        (h, c)
    }

    #[test]
    fn random_step_matches_reference() {
        let mut store = ParameterStore::new(11);
        let layer = LstmLayer::new(&mut store, "l", 3, 0, 4);
        let mut rng = Rng::seed_from_u64(5);
        for id in store.ids().collect::<Vec<_>>() {
            for v in store.get_mut(id) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let x = [0.2, -0.7, 1.1];
        let h0 = [0.1, 0.0, -0.3, 0.5];
        let c0 = [0.4, -0.2, 0.0, 1.0];
        let (h, c) = lstm_step(&layer, &store, &x, &h0, &c0, None).unwrap();
        let ids: Vec<_> = store.ids().collect();
        let (rh, rc) = reference_step(store.get(ids[0]), store.get(ids[1]), store.get(ids[2]), &x, &h0, &c0);
        for k in 0..4 {
            assert!((h[k] - rh[k]).abs() < 1e-14);
            assert!((c[k] - rc[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn forget_bias_is_one() {
        let mut store = ParameterStore::new(0);
        let layer = LstmLayer::new(&mut store, "l", 1, 0, 2);
        assert_eq!(store.get(layer.b), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dropout_preserves_expected_scale() {
        let mut rng = Rng::seed_from_u64(1);
        let m = dropout_mask(10_000, 0.4, &mut rng);
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn inference_step_matches_sequence_forward() {
        let mut store = ParameterStore::new(4);
        let stack = LstmStack::new(&mut store, "s", 3, 2, 5, 2, Direction::Forward, 0.4);
        let xs: Vec<Vec<f64>> = (0..4).map(|t| vec![t as f64 * 0.1, -0.2, 0.3]).collect();
        let st = [4.0, 1.0];
        let tr = stack.forward(&store, &xs, Some(&st), None).unwrap();
        let mut state = stack.start(&store, Some(&st)).unwrap();
        for (t, x) in xs.iter().enumerate() {
            let out = stack.step(&store, &mut state, x).unwrap();
            assert_eq!(out, tr.outputs[t]);
        }
    }

    fn stack_loss(stack: &LstmStack, store: &ParameterStore, xs: &[Vec<f64>], st: &[f64], seed: u64) -> (f64, StackTrace) {
        let mut rng = Rng::seed_from_u64(seed);
        let tr = stack.forward(store, xs, Some(st), Some(&mut rng)).unwrap();
        // weighted sum of outputs so every position matters
        let loss = tr
            .outputs
            .iter()
            .enumerate()
            .map(|(t, o)| o.iter().enumerate().map(|(j, v)| v * ((t + 1) as f64 * 0.3 - j as f64 * 0.1)).sum::<f64>())
            .sum();
        (loss, tr)
    }

    fn check_stack(direction: Direction, seed: u64) {
        let mut store = ParameterStore::new(seed);
        let stack = LstmStack::new(&mut store, "s", 3, 2, 4, 2, direction, 0.3);
        let mut rng = Rng::seed_from_u64(seed + 100);
        for id in store.ids().collect::<Vec<_>>() {
            for v in store.get_mut(id) {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
        let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let st = [0.5, -1.0];
        let (_, tr) = stack_loss(&stack, &store, &xs, &st, seed);
        let d: Vec<Vec<f64>> = tr
            .outputs
            .iter()
            .enumerate()
            .map(|(t, o)| (0..o.len()).map(|j| (t + 1) as f64 * 0.3 - j as f64 * 0.1).collect())
            .collect();
        let mut grads = store.zero_gradients();
        stack.backward(&store, &mut grads, &tr, &d);
        let report = grad_check(
            &mut store,
            |s| stack_loss(&stack, s, &xs, &st, seed).0,
            &grads,
            &GradCheckConfig::default(),
        );
        assert!(report.passed(), "{direction:?} seed {seed}: {:?}", report.worst);
    }

    #[test]
    fn stacks_pass_gradient_check() {
        for seed in 0..3 {
            check_stack(Direction::Forward, seed);
            check_stack(Direction::Bidirectional, seed);
        }
    }
}
