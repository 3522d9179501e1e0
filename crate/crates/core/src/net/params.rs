use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::seed::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub(crate) fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    Uniform(f64),
}

/// Named arrays plus the Adam moments and step counter that belong to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    info: Vec<ParamInfo>,
    values: Vec<Vec<f64>>,
    pub(crate) m: Vec<Vec<f64>>,
    pub(crate) v: Vec<Vec<f64>>,
    pub(crate) step: u64,
    seed: u64,
    rng: Rng,
}

impl ParameterStore {
    pub fn new(seed: u64) -> Self {
        ParameterStore {
            info: Vec::new(),
            values: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
            seed,
            rng: crate::seed::rng_for(seed, "param-init"),
        }
    }

    pub fn add(&mut self, name: &str, shape: &[usize], init: Init) -> ParamId {
        let n: usize = shape.iter().product();
        let values = match init {
            Init::Zeros => vec![0.0; n],
            Init::Constant(c) => vec![c; n],
            Init::Uniform(a) => (0..n).map(|_| self.rng.gen_range(-a..a)).collect(),
        };
        self.add_values(name, shape, values, true)
    }

    /// Adds an array that is stored and checkpointed but never updated.
    pub fn add_fixed(&mut self, name: &str, shape: &[usize], values: Vec<f64>) -> ParamId {
        self.add_values(name, shape, values, false)
    }

    fn add_values(&mut self, name: &str, shape: &[usize], values: Vec<f64>, trainable: bool) -> ParamId {
        assert_eq!(values.len(), shape.iter().product::<usize>(), "{name}: shape/value mismatch");
        assert!(self.find(name).is_none(), "duplicate parameter {name}");
        let n = values.len();
        self.info.push(ParamInfo {
            name: name.to_string(),
            shape: shape.to_vec(),
            trainable,
        });
        self.values.push(values);
        self.m.push(if trainable { vec![0.0; n] } else { Vec::new() });
        self.v.push(if trainable { vec![0.0; n] } else { Vec::new() });
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.values[id.0]
    }

    pub fn info(&self, id: ParamId) -> &ParamInfo {
        &self.info[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.info.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trainable_count(&self) -> usize {
        self.info
            .iter()
            .zip(&self.values)
            .filter(|(i, _)| i.trainable)
            .map(|(_, v)| v.len())
            .sum()
    }

    /// Overwrites an array by name. Shape must match exactly.
    pub fn load(&mut self, name: &str, shape: &[usize], values: &[f64]) -> Result<()> {
        let id = self.find(name).ok_or_else(|| Error::Param {
            name: name.to_string(),
            reason: "not present in model".to_string(),
        })?;
        if self.info[id.0].shape != shape || values.len() != self.values[id.0].len() {
            return Err(Error::Param {
                name: name.to_string(),
                reason: alloc::format!(
                    "shape {:?} does not match model shape {:?}",
                    shape,
                    self.info[id.0].shape
                ),
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(name.to_string()));
        }
        self.values[id.0].copy_from_slice(values);
        Ok(())
    }

    /// Copies every array of `other` whose name and shape match, returning
    /// the number of arrays copied.
    pub fn copy_matching(&mut self, other: &ParameterStore) -> usize {
        let mut n = 0;
        for (i, info) in other.info.iter().enumerate() {
            if let Some(id) = self.find(&info.name) {
                if self.info[id.0].shape == info.shape {
                    self.values[id.0].copy_from_slice(&other.values[i]);
                    n += 1;
                }
            }
        }
        n
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn reset_optimizer(&mut self) {
        for m in self.m.iter_mut().chain(self.v.iter_mut()) {
            m.iter_mut().for_each(|x| *x = 0.0);
        }
        self.step = 0;
    }

    pub fn check_finite(&self) -> Result<()> {
        for (info, v) in self.info.iter().zip(&self.values) {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(info.name.clone()));
            }
        }
        Ok(())
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            g: self.values.iter().map(|v| vec![0.0; v.len()]).collect(),
        }
    }

    /// Copies values only (no optimizer state); used for best-epoch snapshots.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.values.clone()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) {
        for (dst, src) in self.values.iter_mut().zip(snapshot) {
            dst.copy_from_slice(src);
        }
    }
}

/// Gradient buffer shaped like a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    g: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.g[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.g[id.0]
    }

    pub fn zero(&mut self) {
        for g in &mut self.g {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.g {
            g.iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.g.iter_mut().zip(&other.g) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        libm::sqrt(self.g.iter().flatten().map(|x| x * x).sum())
    }

    pub fn all_finite(&self) -> bool {
        self.g.iter().flatten().all(|x| x.is_finite())
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let n = grads.global_norm();
    if n > max_norm && n > 0.0 {
        grads.scale(max_norm / n);
    }
    n
}
