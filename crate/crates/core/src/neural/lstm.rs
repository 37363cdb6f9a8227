use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, axpy, dot};
use crate::rng::Rng;

use super::params::{Init, ParamId, ParamStore};

/// Single-layer LSTM with gate order (input, forget, candidate, output):
///
/// ```text
/// z_t = W_ih x_t + W_hh h_{t-1} + b
/// i, f, o = sigmoid(z_i, z_f, z_o);  g = tanh(z_g)
/// c_t = f * c_{t-1} + i * g;         h_t = o * tanh(c_t)
/// ```
///
/// with `h_0 = c_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    pub steps: usize,
    version: u64,
    x: Vec<f64>,
    /// Post-activation gates, `steps x 4h`.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    /// Hidden states, `steps x h`.
    pub h: Vec<f64>,
}

impl LstmCache {
    pub fn hidden_states(&self) -> &[f64] {
        &self.h
    }
}

impl Lstm {
    /// Weights uniform in `±1/sqrt(fan_in)`, zero biases except +1 on the
    /// forget gate.
    pub fn new(store: &mut ParamStore, name: &str, input_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w_ih = store.add(
            format!("{name}.w_ih"),
            4 * hidden,
            input_dim,
            Init::Uniform(1.0 / math::sqrt(input_dim as f64)),
            rng,
        );
        let w_hh = store.add(
            format!("{name}.w_hh"),
            4 * hidden,
            hidden,
            Init::Uniform(1.0 / math::sqrt(hidden as f64)),
            rng,
        );
        let b = store.add(format!("{name}.b"), 1, 4 * hidden, Init::Constant(0.0), rng);
        store.value_mut(b)[hidden..2 * hidden].fill(1.0);
        Self {
            input_dim,
            hidden,
            w_ih,
            w_hh,
            b,
        }
    }

    pub fn params(&self) -> [ParamId; 3] {
        [self.w_ih, self.w_hh, self.b]
    }

    /// Runs the cell over a row-major `steps x input_dim` sequence.
    pub fn forward(&self, store: &ParamStore, inputs: &[f64]) -> Result<LstmCache> {
        let (d, h) = (self.input_dim, self.hidden);
        if inputs.is_empty() || inputs.len() % d != 0 {
            return Err(Error::Dimension {
                expected: d,
                found: inputs.len(),
            });
        }
        let steps = inputs.len() / d;
        let (w_ih, w_hh, b) = (store.value(self.w_ih), store.value(self.w_hh), store.value(self.b));
        let mut gates = vec![0.0; steps * 4 * h];
        let mut c = vec![0.0; steps * h];
        let mut tanh_c = vec![0.0; steps * h];
        let mut hs = vec![0.0; steps * h];
        let zeros = vec![0.0; h];
        for t in 0..steps {
            let x = &inputs[t * d..(t + 1) * d];
            let (h_prev, c_prev) = if t == 0 {
                (&zeros[..], &zeros[..])
            } else {
                (&hs[(t - 1) * h..t * h], &c[(t - 1) * h..t * h])
            };
            let z = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            for r in 0..4 * h {
                z[r] = b[r] + dot(&w_ih[r * d..(r + 1) * d], x) + dot(&w_hh[r * h..(r + 1) * h], h_prev);
            }
            for r in 0..h {
                z[r] = math::sigmoid(z[r]);
                z[h + r] = math::sigmoid(z[h + r]);
                z[2 * h + r] = math::tanh(z[2 * h + r]);
                z[3 * h + r] = math::sigmoid(z[3 * h + r]);
            }
            let mut c_t = vec![0.0; h];
            for r in 0..h {
                c_t[r] = z[h + r] * c_prev[r] + z[r] * z[2 * h + r];
            }
            for r in 0..h {
                let tc = math::tanh(c_t[r]);
                tanh_c[t * h + r] = tc;
                hs[t * h + r] = z[3 * h + r] * tc;
                c[t * h + r] = c_t[r];
            }
        }
        Ok(LstmCache {
            steps,
            version: store.version(),
            x: inputs.to_vec(),
            gates,
            c,
            tanh_c,
            h: hs,
        })
    }

    /// Backpropagation through time. `grad_h` is `dL/dh_t` for every step
    /// (`steps x hidden`). Parameter gradients are accumulated into the
    /// store; the input gradient `steps x input_dim` is returned.
    pub fn backward(&self, store: &mut ParamStore, cache: &LstmCache, grad_h: &[f64]) -> Result<Vec<f64>> {
        if cache.version != store.version() {
            return Err(Error::StaleCache);
        }
        let (d, h, steps) = (self.input_dim, self.hidden, cache.steps);
        if grad_h.len() != steps * h {
            return Err(Error::Dimension {
                expected: steps * h,
                found: grad_h.len(),
            });
        }
        let (values, grads) = store.split_mut();
        let w_ih = &values[self.w_ih.range()];
        let w_hh = &values[self.w_hh.range()];
        let mut dx = vec![0.0; steps * d];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..steps).rev() {
            let g = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
            let x = &cache.x[t * d..(t + 1) * d];
            for r in 0..h {
                let (i, f, gg, o) = (g[r], g[h + r], g[2 * h + r], g[3 * h + r]);
                let c_prev = if t == 0 { 0.0 } else { cache.c[(t - 1) * h + r] };
                let tc = cache.tanh_c[t * h + r];
                let dh = grad_h[t * h + r] + dh_next[r];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[r];
                dz[r] = dc * gg * i * (1.0 - i);
                dz[h + r] = dc * c_prev * f * (1.0 - f);
                dz[2 * h + r] = dc * i * (1.0 - gg * gg);
                dz[3 * h + r] = d_o * o * (1.0 - o);
                dc_next[r] = dc * f;
            }
            {
                let gw = &mut grads[self.w_ih.range()];
                for r in 0..4 * h {
                    axpy(dz[r], x, &mut gw[r * d..(r + 1) * d]);
                }
            }
            if t > 0 {
                let h_prev = &cache.h[(t - 1) * h..t * h];
                let gw = &mut grads[self.w_hh.range()];
                for r in 0..4 * h {
                    axpy(dz[r], h_prev, &mut gw[r * h..(r + 1) * h]);
                }
            }
            {
                let gb = &mut grads[self.b.range()];
                for r in 0..4 * h {
                    gb[r] += dz[r];
                }
            }
            let dx_t = &mut dx[t * d..(t + 1) * d];
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..4 * h {
                axpy(dz[r], &w_ih[r * d..(r + 1) * d], dx_t);
                axpy(dz[r], &w_hh[r * h..(r + 1) * h], &mut dh_next);
            }
        }
        Ok(dx)
    }
}

/// Two LSTMs, the second reading the sequence reversed. Output row `t` is
/// `[h_fwd_t ; h_bwd_(T-1-t)]`, i.e. both halves are aligned to token `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmCache {
    pub fwd: LstmCache,
    pub bwd: LstmCache,
    /// `steps x 2h`.
    pub out: Vec<f64>,
}

fn reverse_rows(v: &[f64], width: usize) -> Vec<f64> {
    v.chunks_exact(width).rev().flatten().copied().collect()
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, name: &str, input_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self {
            fwd: Lstm::new(store, &format!("{name}.fwd"), input_dim, hidden, rng),
            bwd: Lstm::new(store, &format!("{name}.bwd"), input_dim, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    pub fn params(&self) -> [ParamId; 6] {
        let [a, b, c] = self.fwd.params();
        let [d, e, f] = self.bwd.params();
        [a, b, c, d, e, f]
    }

    pub fn forward(&self, store: &ParamStore, inputs: &[f64]) -> Result<BiLstmCache> {
        let fwd = self.fwd.forward(store, inputs)?;
        let rev = reverse_rows(inputs, self.bwd.input_dim);
        let bwd = self.bwd.forward(store, &rev)?;
        let h = self.hidden();
        let steps = fwd.steps;
        let mut out = vec![0.0; steps * 2 * h];
        for t in 0..steps {
            out[t * 2 * h..t * 2 * h + h].copy_from_slice(&fwd.h[t * h..(t + 1) * h]);
            let s = steps - 1 - t;
            out[t * 2 * h + h..(t + 1) * 2 * h].copy_from_slice(&bwd.h[s * h..(s + 1) * h]);
        }
        Ok(BiLstmCache { fwd, bwd, out })
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &BiLstmCache, grad_out: &[f64]) -> Result<Vec<f64>> {
        let h = self.hidden();
        let steps = cache.fwd.steps;
        if grad_out.len() != steps * 2 * h {
            return Err(Error::Dimension {
                expected: steps * 2 * h,
                found: grad_out.len(),
            });
        }
        let mut g_fwd = vec![0.0; steps * h];
        let mut g_bwd = vec![0.0; steps * h];
        for t in 0..steps {
            g_fwd[t * h..(t + 1) * h].copy_from_slice(&grad_out[t * 2 * h..t * 2 * h + h]);
            let s = steps - 1 - t;
            g_bwd[s * h..(s + 1) * h].copy_from_slice(&grad_out[t * 2 * h + h..(t + 1) * 2 * h]);
        }
        let mut dx = self.fwd.backward(store, &cache.fwd, &g_fwd)?;
        let dx_rev = self.bwd.backward(store, &cache.bwd, &g_bwd)?;
        let d = self.fwd.input_dim;
        for (t, row) in dx_rev.chunks_exact(d).enumerate() {
            let s = steps - 1 - t;
            axpy(1.0, row, &mut dx[s * d..(s + 1) * d]);
        }
        Ok(dx)
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub input_dim: usize,
    pub output_dim: usize,
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, input_dim: usize, output_dim: usize, rng: &mut Rng) -> Self {
        let w = store.add(
            format!("{name}.w"),
            output_dim,
            input_dim,
            Init::Uniform(1.0 / math::sqrt(input_dim as f64)),
            rng,
        );
        let b = store.add(format!("{name}.b"), 1, output_dim, Init::Constant(0.0), rng);
        Self {
            input_dim,
            output_dim,
            w,
            b,
        }
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let (w, b) = (store.value(self.w), store.value(self.b));
        let d = self.input_dim;
        (0..self.output_dim)
            .map(|r| b[r] + dot(&w[r * d..(r + 1) * d], x))
            .collect()
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, store: &mut ParamStore, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let d = self.input_dim;
        let (values, grads) = store.split_mut();
        let w = &values[self.w.range()];
        let mut dx = vec![0.0; d];
        for (r, &g) in dy.iter().enumerate() {
            axpy(g, x, &mut grads[self.w.range()][r * d..(r + 1) * d]);
            grads[self.b.range()][r] += g;
            axpy(g, &w[r * d..(r + 1) * d], &mut dx);
        }
        dx
    }
}
