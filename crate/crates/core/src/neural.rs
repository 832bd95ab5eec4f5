//! Fully connected Q-network: ReLU hidden layers, linear output layer.
//!
//! Weights are stored per layer as a row-major `outputs x inputs` matrix, so
//! row `j` holds the incoming weights of unit `j`.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("input has {got} entries, network expects {expected}")]
    InputSize { expected: usize, got: usize },
    #[error("action index {index} out of range for {outputs} outputs")]
    ActionOutOfRange { index: usize, outputs: usize },
    #[error("td target must be finite, got {0}")]
    NonFiniteTarget(f64),
    #[error("gradient contains a non-finite component")]
    NonFiniteGradient,
    #[error("gradient shape does not match the network")]
    GradientShape,
    #[error("learning rate must be finite and non-negative, got {0}")]
    LearningRate(f64),
    #[error("a network needs at least two layer widths, all positive; got {0:?}")]
    Shape(Vec<usize>),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed network stream at byte {offset}: {reason}")]
pub struct DecodeError {
    pub offset: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weight(&self, to: usize, from: usize) -> f64 {
        self.weights[to * self.inputs + from]
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(dot + b);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Layer>,
}

/// Gradient of a scalar loss, shaped like the network it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights
                .iter_mut()
                .zip(&b.weights)
                .for_each(|(x, y)| *x += y);
            a.biases
                .iter_mut()
                .zip(&b.biases)
                .for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x *= factor);
            l.biases.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|v| v == 0.0)
    }

    /// All components in parameter order (per layer: weights, then biases).
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }
}

/// Activations recorded by a forward pass; `activations[0]` is the input.
struct Trace {
    pre: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
}

impl QNetwork {
    /// Network with every weight and bias set to zero.
    pub fn zeros(dims: &[usize]) -> Result<Self, NetError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NetError::Shape(dims.to_vec()));
        }
        Ok(Self {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self, NetError> {
        let mut net = Self::zeros(dims)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Mutable view of every parameter in the same order as [`Gradients::values`].
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn check_input(&self, s: &[f64]) -> Result<(), NetError> {
        if s.len() != self.input_size() {
            return Err(NetError::InputSize {
                expected: self.input_size(),
                got: s.len(),
            });
        }
        Ok(())
    }

    /// Q-values for every action, in output order.
    pub fn forward(&self, s: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(s)?;
        let mut x = s.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&x, &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut x, &mut z);
        }
        Ok(x)
    }

    fn trace(&self, s: &[f64]) -> Trace {
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(s.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.affine(&activations[i], &mut z);
            let a = if i < last {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            activations.push(a);
        }
        Trace { pre, activations }
    }

    /// Gradient of `(Q(s, action) - td_target)^2` with respect to every parameter.
    pub fn backward(
        &self,
        s: &[f64],
        action: usize,
        td_target: f64,
    ) -> Result<Gradients, NetError> {
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_gradient(s, action, td_target, &mut grads)?;
        Ok(grads)
    }

    /// Adds the squared-TD-error gradient into `grads`; returns the residual `Q(s,a) - target`.
    pub fn accumulate_gradient(
        &self,
        s: &[f64],
        action: usize,
        td_target: f64,
        grads: &mut Gradients,
    ) -> Result<f64, NetError> {
        self.check_input(s)?;
        if action >= self.output_size() {
            return Err(NetError::ActionOutOfRange {
                index: action,
                outputs: self.output_size(),
            });
        }
        if !td_target.is_finite() {
            return Err(NetError::NonFiniteTarget(td_target));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(NetError::GradientShape);
        }
        let trace = self.trace(s);
        let last = self.layers.len() - 1;
        let residual = trace.activations[last + 1][action] - td_target;

        // delta holds dL/dz for the current layer's pre-activations.
        let mut delta = vec![0.0; self.output_size()];
        delta[action] = 2.0 * residual;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &trace.activations[i];
            let g = &mut grads.layers[i];
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[j] += d;
                let row = &mut g.weights[j * layer.inputs..(j + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(gw, x)| *gw += d * x);
            }
            if i == 0 {
                break;
            }
            let below = &trace.pre[i - 1];
            let mut next = vec![0.0; layer.inputs];
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                next.iter_mut().zip(row).for_each(|(n, w)| *n += d * w);
            }
            for (n, z) in next.iter_mut().zip(below) {
                if *z <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
        Ok(residual)
    }

    /// Plain gradient descent: `theta <- theta - lr * grad`.
    pub fn apply_sgd(&mut self, grads: &Gradients, learning_rate: f64) -> Result<(), NetError> {
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(NetError::LearningRate(learning_rate));
        }
        if grads.layers.len() != self.layers.len()
            || grads
                .layers
                .iter()
                .zip(&self.layers)
                .any(|(g, l)| g.inputs != l.inputs || g.outputs != l.outputs)
        {
            return Err(NetError::GradientShape);
        }
        if grads.values().any(|v| !v.is_finite()) {
            return Err(NetError::NonFiniteGradient);
        }
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights
                .iter_mut()
                .zip(&g.weights)
                .for_each(|(w, d)| *w -= learning_rate * d);
            l.biases
                .iter_mut()
                .zip(&g.biases)
                .for_each(|(b, d)| *b -= learning_rate * d);
        }
        Ok(())
    }

    /// Little-endian encoding: layer count, widths, then per layer the
    /// row-major weights followed by the biases.
    pub fn encode(&self, out: &mut Vec<u8>) {
        let dims = self.dims();
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode(&mut out);
        out
    }

    /// Decodes a stream produced by [`QNetwork::to_bytes`]; trailing bytes are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut reader = ByteReader::new(bytes);
        let net = Self::decode(&mut reader)?;
        reader.finish()?;
        Ok(net)
    }

    pub(crate) fn decode(reader: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let at = reader.offset();
        let count = reader.u32()? as usize;
        if !(2..=64).contains(&count) {
            return Err(reader.error_at(at, format!("implausible layer count {count}")));
        }
        let mut dims = Vec::with_capacity(count);
        for _ in 0..count {
            let at = reader.offset();
            let d = reader.u32()? as usize;
            if d == 0 || d > 1 << 20 {
                return Err(reader.error_at(at, format!("implausible layer width {d}")));
            }
            dims.push(d);
        }
        let mut net = Self::zeros(&dims).map_err(|e| reader.error_at(at, e.to_string()))?;
        for l in &mut net.layers {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = reader.f64()?;
            }
        }
        Ok(net)
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    pub(crate) fn error_at(&self, offset: usize, reason: impl Into<String>) -> DecodeError {
        DecodeError {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error_at(
                self.pos,
                format!("needed {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, DecodeError> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    pub(crate) fn finish(&self) -> Result<(), DecodeError> {
        if self.pos != self.bytes.len() {
            return Err(self.error_at(
                self.pos,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}
