use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng as _;

use crate::rng::Rng;

/// Handle to one tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId {
    pub index: usize,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamId {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform on `(-s, s)`.
    Uniform(f64),
    Constant(f64),
}

/// Named tensors stored back to back in one flat value buffer, with a
/// gradient buffer of the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    ids: Vec<ParamId>,
    values: Vec<f64>,
    grads: Vec<f64>,
    seed: u64,
    version: u64,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            names: Vec::new(),
            ids: Vec::new(),
            values: Vec::new(),
            grads: Vec::new(),
            seed,
            version: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, init: Init, rng: &mut Rng) -> ParamId {
        let id = ParamId {
            index: self.ids.len(),
            offset: self.values.len(),
            rows,
            cols,
        };
        for _ in 0..rows * cols {
            self.values.push(match init {
                Init::Uniform(s) => rng.random_range(-s..s),
                Init::Constant(c) => c,
            });
        }
        self.grads.resize(self.values.len(), 0.0);
        self.names.push(name.into());
        self.ids.push(id);
        self.version += 1;
        id
    }

    /// Rebuilds a store from named shapes and a flat value buffer.
    pub fn from_parts(seed: u64, tensors: Vec<(String, usize, usize)>, values: Vec<f64>) -> Option<Self> {
        let mut store = Self::new(seed);
        for (name, rows, cols) in tensors {
            let id = ParamId {
                index: store.ids.len(),
                offset: store.values.len(),
                rows,
                cols,
            };
            store.values.resize(store.values.len() + rows * cols, 0.0);
            store.ids.push(id);
            store.names.push(name);
        }
        if store.values.len() != values.len() {
            return None;
        }
        store.values = values;
        store.grads = alloc::vec![0.0; store.values.len()];
        Some(store)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Incremented whenever values may have changed; forward caches
    /// remember it to detect staleness.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.index]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(|i| self.ids[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ParamId)> {
        self.names.iter().map(String::as_str).zip(self.ids.iter().copied())
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.values[id.range()]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.version += 1;
        &mut self.values[id.range()]
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.grads[id.range()]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.grads[id.range()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.values
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    /// Read-only values alongside writable gradients, for backward passes.
    pub fn split_mut(&mut self) -> (&[f64], &mut [f64]) {
        (&self.values, &mut self.grads)
    }

    pub(crate) fn update_mut(&mut self) -> (&mut [f64], &[f64]) {
        self.version += 1;
        (&mut self.values, &self.grads)
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Order-sensitive FNV-1a digest over the bit patterns of the given
    /// tensors.
    pub fn checksum(&self, ids: &[ParamId]) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for id in ids {
            for v in self.value(*id) {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01B3);
                }
            }
        }
        h
    }
}
