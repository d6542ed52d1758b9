//! Fully connected network with rectified-linear hidden layers.
//!
//! Inputs are batched row-wise: a batch is an `n × in` matrix. Layer `l`
//! holds an `out × in` weight matrix, so its pre-activation is
//! `z = a Wᵀ + b`.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::Rng;

/// Activation applied to the last layer.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputActivation {
    Identity,
    /// `lo + (hi − lo)(tanh z + 1)/2` per output, one `(lo, hi)` per unit.
    Squash(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    output: OutputActivation,
}

/// Parameter-shaped container used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Layer inputs; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl Mlp {
    /// Uniform `±1/√fan_in` initialization for hidden layers and
    /// `±FINAL_INIT` for the output layer, so that squashed outputs start
    /// away from saturation; biases start at zero.
    pub fn new(sizes: &[usize], output: OutputActivation, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        let last = net.weights.len() - 1;
        for (l, w) in net.weights.iter_mut().enumerate() {
            let bound = if l == last { FINAL_INIT } else { 1.0 / (w.ncols() as f64).sqrt() };
            w.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("network needs at least two positive layer sizes, got {sizes:?}")));
        }
        let weights = sizes.windows(2).map(|p| Array2::zeros((p[1], p[0]))).collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Self::from_parts(weights, biases, output)
    }

    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>, output: OutputActivation) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Config("one bias vector per weight matrix is required".into()));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.nrows() != b.len() {
                return Err(Error::Config(format!("layer {l}: {} rows but {} biases", w.nrows(), b.len())));
            }
            if l > 0 && weights[l - 1].nrows() != w.ncols() {
                return Err(Error::Config(format!("layer {l} expects {} inputs", w.ncols())));
            }
        }
        if let OutputActivation::Squash(bounds) = &output {
            let out = weights.last().map_or(0, |w| w.nrows());
            if bounds.len() != out || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
                return Err(Error::Config("squashing needs one nonempty interval per output".into()));
            }
        }
        Ok(Self {
            weights,
            biases,
            output,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].ncols()];
        s.extend(self.weights.iter().map(|w| w.nrows()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map_or(0, |w| w.nrows())
    }

    pub fn output_activation(&self) -> &OutputActivation {
        &self.output
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Config(format!(
                "network input has {cols} features, expected {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn finish(&self, z: &Array2<f64>) -> Array2<f64> {
        match &self.output {
            OutputActivation::Identity => z.clone(),
            OutputActivation::Squash(bounds) => {
                let mut y = z.mapv(f64::tanh);
                for (mut col, &(lo, hi)) in y.axis_iter_mut(Axis(1)).zip(bounds) {
                    col.mapv_inplace(|t| lo + (hi - lo) * (t + 1.0) / 2.0);
                }
                y
            }
        }
    }

    /// Output for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Config(e.to_string()))?;
        Ok(self.forward_batch(batch)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = a.dot(&w.t()) + b;
            a = if l == last { self.finish(&z) } else { z.mapv(relu) };
        }
        Ok(a)
    }

    /// Forward pass keeping what [`Mlp::backward`] needs.
    pub fn forward_trace(&self, x: Array2<f64>) -> Result<Trace> {
        self.check_input(x.ncols())?;
        let last = self.weights.len() - 1;
        let mut inputs = vec![x];
        let mut pre = Vec::with_capacity(self.weights.len());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = inputs[l].dot(&w.t()) + b;
            if l < last {
                inputs.push(z.mapv(relu));
            }
            pre.push(z);
        }
        let output = self.finish(&pre[last]);
        Ok(Trace { inputs, pre, output })
    }

    /// Reverse-mode pass. `grad_out` is `∂J/∂output` per batch row; returns
    /// `∂J/∂parameters` summed over the batch and `∂J/∂input` per row.
    pub fn backward(&self, trace: &Trace, grad_out: ArrayView2<f64>) -> (Gradients, Array2<f64>) {
        let last = self.weights.len() - 1;
        let mut delta = match &self.output {
            OutputActivation::Identity => grad_out.to_owned(),
            OutputActivation::Squash(bounds) => {
                let mut d = grad_out.to_owned();
                for ((mut col, z), &(lo, hi)) in d.axis_iter_mut(Axis(1)).zip(trace.pre[last].axis_iter(Axis(1))).zip(bounds) {
                    col.zip_mut_with(&z, |g, &z| {
                        let t = z.tanh();
                        *g *= (hi - lo) / 2.0 * (1.0 - t * t);
                    });
                }
                d
            }
        };
        let mut grads = Gradients::zeros_like(self);
        for l in (0..=last).rev() {
            grads.weights[l] = delta.t().dot(&trace.inputs[l]);
            grads.biases[l] = delta.sum_axis(Axis(0));
            let mut back = delta.dot(&self.weights[l]);
            if l > 0 {
                back.zip_mut_with(&trace.pre[l - 1], |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            delta = back;
        }
        (grads, delta)
    }

    /// `self ← self + rate · (src − self)`.
    pub fn soft_update(&mut self, src: &Mlp, rate: f64) {
        for (w, s) in self.weights.iter_mut().zip(&src.weights) {
            w.zip_mut_with(s, |a, &b| *a = (1.0 - rate) * *a + rate * b);
        }
        for (w, s) in self.biases.iter_mut().zip(&src.biases) {
            w.zip_mut_with(s, |a, &b| *a = (1.0 - rate) * *a + rate * b);
        }
    }

    /// Writes the binary checkpoint layout described in the project README.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(self.weights.len() as u32).to_le_bytes())?;
        for w in &self.weights {
            out.write_all(&(w.ncols() as u32).to_le_bytes())?;
            out.write_all(&(w.nrows() as u32).to_le_bytes())?;
        }
        match &self.output {
            OutputActivation::Identity => out.write_all(&0u32.to_le_bytes())?,
            OutputActivation::Squash(bounds) => {
                out.write_all(&1u32.to_le_bytes())?;
                for &(lo, hi) in bounds {
                    out.write_all(&lo.to_le_bytes())?;
                    out.write_all(&hi.to_le_bytes())?;
                }
            }
        }
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for v in w.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
            for v in b.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Config("not a weight checkpoint".into()));
        }
        let version = read_u32(&mut input)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {version}")));
        }
        let n_layers = read_u32(&mut input)? as usize;
        if n_layers == 0 || n_layers > 1024 {
            return Err(Error::Config(format!("implausible layer count {n_layers}")));
        }
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let fan_in = read_u32(&mut input)? as usize;
            let fan_out = read_u32(&mut input)? as usize;
            shapes.push((fan_in, fan_out));
        }
        let output = match read_u32(&mut input)? {
            0 => OutputActivation::Identity,
            1 => {
                let out = shapes[n_layers - 1].1;
                let mut bounds = Vec::with_capacity(out);
                for _ in 0..out {
                    bounds.push((read_f64(&mut input)?, read_f64(&mut input)?));
                }
                OutputActivation::Squash(bounds)
            }
            k => return Err(Error::Config(format!("unknown output activation {k}"))),
        };
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for &(fan_in, fan_out) in &shapes {
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| read_f64(&mut input)).collect::<Result<_>>()?;
            let b: Vec<f64> = (0..fan_out).map(|_| read_f64(&mut input)).collect::<Result<_>>()?;
            weights.push(Array2::from_shape_vec((fan_out, fan_in), w).map_err(|e| Error::Config(e.to_string()))?);
            biases.push(Array1::from(b));
        }
        Self::from_parts(weights, biases, output)
    }
}

/// Output-layer initialization bound.
pub const FINAL_INIT: f64 = 3e-3;

const CHECKPOINT_MAGIC: &[u8; 4] = b"PRMW";
const CHECKPOINT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

/// Mean squared error `(1/N) Σ (q − y)²` of a single-output network and
/// its parameter gradients.
pub fn mse_gradients(net: &Mlp, inputs: Array2<f64>, targets: &[f64]) -> Result<(f64, Gradients)> {
    if net.output_dim() != 1 || targets.len() != inputs.nrows() {
        return Err(Error::Config("squared error needs a scalar network and one target per row".into()));
    }
    let trace = net.forward_trace(inputs)?;
    let n = targets.len() as f64;
    let mut g = Array2::zeros((targets.len(), 1));
    let mut loss = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        let d = trace.output[[i, 0]] - y;
        loss += d * d / n;
        g[[i, 0]] = 2.0 * d / n;
    }
    Ok((loss, net.backward(&trace, g.view()).0))
}
