//! A fixed input-hidden-output perceptron with ReLU hidden units, trained
//! on the squared error of a single output with Adam.
//!
//! Parameters live in one flat vector laid out as `W1` (hidden x input,
//! row-major), `b1`, `W2` (output x hidden, row-major), `b2`. Gradients and
//! Adam moments share that layout.

use crate::error::{Error, Result};
use rand::Rng;
use std::fmt::Write as _;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &str = "# uav-noma mlp checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    params: Vec<f64>,
}

/// Reusable activations for a forward/backward pass.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    pre: Vec<f64>,
    act: Vec<f64>,
    out: Vec<f64>,
}

impl Mlp {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        let n = hidden * inputs + hidden + outputs * hidden + outputs;
        Self {
            inputs,
            hidden,
            outputs,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(inputs, hidden, outputs);
        let l1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + outputs) as f64).sqrt();
        let (w1, w2) = net.weight_ranges();
        for w in &mut net.params[w1] {
            *w = rng.random_range(-l1..=l1);
        }
        for w in &mut net.params[w2] {
            *w = rng.random_range(-l2..=l2);
        }
        net
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.inputs, self.hidden, self.outputs]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> [usize; 4] {
        let w1 = 0;
        let b1 = w1 + self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        [w1, b1, w2, b2]
    }

    fn weight_ranges(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let [w1, b1, w2, b2] = self.offsets();
        (w1..b1, w2..b2)
    }

    fn check_input(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.inputs {
            return Err(Error::Dimension {
                expected: self.inputs,
                got: state.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_input(state)?;
        let mut scratch = Scratch::default();
        self.forward_into(state, &mut scratch);
        Ok(scratch.out)
    }

    /// Forward pass into `scratch`; returns the output slice. Panics on a
    /// dimension mismatch (hot path, callers validate once).
    pub fn forward_into<'s>(&self, state: &[f64], scratch: &'s mut Scratch) -> &'s [f64] {
        assert_eq!(state.len(), self.inputs);
        let [w1, b1, w2, b2] = self.offsets();
        let p = &self.params;
        scratch.pre.resize(self.hidden, 0.0);
        scratch.act.resize(self.hidden, 0.0);
        scratch.out.resize(self.outputs, 0.0);
        for j in 0..self.hidden {
            let row = &p[w1 + j * self.inputs..w1 + (j + 1) * self.inputs];
            let z = p[b1 + j] + row.iter().zip(state).map(|(w, x)| w * x).sum::<f64>();
            scratch.pre[j] = z;
            scratch.act[j] = z.max(0.0);
        }
        for o in 0..self.outputs {
            let row = &p[w2 + o * self.hidden..w2 + (o + 1) * self.hidden];
            scratch.out[o] = p[b2 + o] + row.iter().zip(&scratch.act).map(|(w, a)| w * a).sum::<f64>();
        }
        &scratch.out
    }

    /// Adds `scale * d/dtheta (target - Q(state, action))^2` into `grad`.
    /// Returns the squared error.
    pub fn accumulate_gradient(
        &self,
        state: &[f64],
        action: usize,
        target: f64,
        scale: f64,
        grad: &mut [f64],
        scratch: &mut Scratch,
    ) -> f64 {
        debug_assert_eq!(grad.len(), self.params.len());
        let q = self.forward_into(state, scratch)[action];
        let err = target - q;
        let dq = -2.0 * err * scale;
        let [w1, b1, w2, b2] = self.offsets();
        grad[b2 + action] += dq;
        let w2_row = w2 + action * self.hidden;
        for j in 0..self.hidden {
            grad[w2_row + j] += dq * scratch.act[j];
            if scratch.pre[j] > 0.0 {
                let dz = dq * self.params[w2_row + j];
                grad[b1 + j] += dz;
                let row = w1 + j * self.inputs;
                for (g, x) in grad[row..row + self.inputs].iter_mut().zip(state) {
                    *g += dz * x;
                }
            }
        }
        err * err
    }

    /// Gradient of `(target - Q(state, action))^2` with respect to every
    /// parameter.
    pub fn backward(&self, state: &[f64], action: usize, target: f64) -> Result<Vec<f64>> {
        self.check_input(state)?;
        if action >= self.outputs {
            return Err(Error::Dimension {
                expected: self.outputs,
                got: action,
            });
        }
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_gradient(state, action, target, 1.0, &mut grad, &mut Scratch::default());
        Ok(grad)
    }

    /// Copies `other`'s parameters into `self` (target-network sync).
    pub fn copy_from(&mut self, other: &Mlp) {
        assert_eq!(self.sizes(), other.sizes());
        self.params.copy_from_slice(&other.params);
    }

    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{CHECKPOINT_MAGIC}").unwrap();
        writeln!(s, "layers {} {} {}", self.inputs, self.hidden, self.outputs).unwrap();
        for v in &self.params {
            writeln!(s, "{v:?}").unwrap();
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("missing checkpoint header".into()));
        }
        let layers = lines.next().ok_or_else(|| bad("missing layer line".into()))?;
        let sizes: Vec<usize> = layers
            .strip_prefix("layers ")
            .ok_or_else(|| bad(format!("malformed layer line `{layers}`")))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad layer size `{t}`"))))
            .collect::<Result<_>>()?;
        let [inputs, hidden, outputs] = sizes[..] else {
            return Err(bad(format!("expected 3 layer sizes, got {}", sizes.len())));
        };
        let mut net = Self::zeros(inputs, hidden, outputs);
        let values: Vec<f64> = lines
            .map(|l| l.trim().parse().map_err(|_| bad(format!("bad parameter `{l}`"))))
            .collect::<Result<_>>()?;
        if values.len() != net.params.len() {
            return Err(bad(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter".into()));
        }
        net.params = values;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: usize) -> Self {
        Self {
            config,
            m: vec![0.0; params],
            v: vec![0.0; params],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
