//! A small CNN: stride-1 valid convolutions with ReLU, then ReLU dense
//! layers, then a linear action head and an optional scalar value head
//! sharing the trunk.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{
    conv2d, conv2d_backward, dense, dense_backward, dense_backward_batch, relu_backward, relu_in_place,
};
use super::Tensor;
use crate::gaf::{CHANNELS, STATE_LEN};
use crate::market::WINDOW_LEN;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvSpec {
    pub kernel: usize,
    pub filters: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Architecture {
    /// `[height, width, channels]`.
    pub input: [usize; 3],
    pub convs: Vec<ConvSpec>,
    pub hidden: Vec<usize>,
    pub outputs: usize,
    pub value_head: bool,
}

impl Architecture {
    /// conv 3x3 4->8, conv 3x3 8->16, dense 64, 18 outputs.
    pub fn default_for(value_head: bool) -> Self {
        Architecture {
            input: [WINDOW_LEN, WINDOW_LEN, CHANNELS],
            convs: vec![ConvSpec { kernel: 3, filters: 8 }, ConvSpec { kernel: 3, filters: 16 }],
            hidden: vec![64],
            outputs: crate::env::ACTION_COUNT,
            value_head,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("architecture: {msg}")));
        if self.input.contains(&0) {
            return bad("empty input");
        }
        let (mut h, mut w) = (self.input[0], self.input[1]);
        for c in &self.convs {
            if c.kernel == 0 || c.filters == 0 || c.kernel > h || c.kernel > w {
                return bad("convolution does not fit its input");
            }
            h -= c.kernel - 1;
            w -= c.kernel - 1;
        }
        if self.hidden.contains(&0) || self.outputs == 0 {
            return bad("zero-width layer");
        }
        Ok(())
    }

    fn flat_features(&self) -> usize {
        let (mut h, mut w, mut c) = (self.input[0], self.input[1], self.input[2]);
        for s in &self.convs {
            h -= s.kernel - 1;
            w -= s.kernel - 1;
            c = s.filters;
        }
        h * w * c
    }

    /// Shapes of every parameter tensor in storage order: each conv (kernels,
    /// bias), each hidden dense (weights, bias), action head, value head.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        let mut c = self.input[2];
        for s in &self.convs {
            shapes.push(vec![s.kernel, s.kernel, c, s.filters]);
            shapes.push(vec![s.filters]);
            c = s.filters;
        }
        let mut n = self.flat_features();
        for &m in &self.hidden {
            shapes.push(vec![n, m]);
            shapes.push(vec![m]);
            n = m;
        }
        shapes.push(vec![n, self.outputs]);
        shapes.push(vec![self.outputs]);
        if self.value_head {
            shapes.push(vec![n, 1]);
            shapes.push(vec![1]);
        }
        shapes
    }

    fn trunk_len(&self) -> usize {
        self.convs.len() + self.hidden.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOutput {
    pub logits: Vec<f64>,
    pub value: Option<f64>,
}

/// Gradient of a scalar loss with respect to the network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrad {
    pub logits: Vec<f64>,
    pub value: f64,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input followed by each trunk layer's post-ReLU output.
    activations: Vec<Tensor>,
    pub output: NetworkOutput,
}

impl Trace {
    /// Input followed by each trunk layer's post-ReLU output.
    pub fn activations(&self) -> &[Tensor] {
        &self.activations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    params: Vec<Tensor>,
}

impl Network {
    /// He-normal trunk weights, zero biases, and heads scaled down by 100 so
    /// initial outputs sit near zero. Identical seeds give identical bits.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = arch.param_shapes();
        let head_start = 2 * arch.trunk_len();
        let mut params = Vec::with_capacity(shapes.len());
        for (i, shape) in shapes.iter().enumerate() {
            let mut t = Tensor::zeros(shape);
            if i % 2 == 0 {
                let fan_in: usize = shape[..shape.len() - 1].iter().product();
                let mut std = libm::sqrt(2.0 / fan_in as f64);
                if i >= head_start {
                    std *= 0.01;
                }
                let normal = Normal::new(0.0, std).map_err(|_| Error::NonFinite("init std"))?;
                t.data_mut().iter_mut().for_each(|v| *v = normal.sample(&mut rng));
            }
            params.push(t);
        }
        Ok(Network { arch, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<Tensor>) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::LengthMismatch { left: shapes.len(), right: params.len() });
        }
        for (t, s) in params.iter().zip(&shapes) {
            t.expect_shape(s)?;
            if !t.is_finite() {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        Ok(Network { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    /// Wraps a flat GAF state as the `12 x 12 x 4` input tensor.
    pub fn input_from_state(state: &crate::gaf::GafState) -> Tensor {
        debug_assert_eq!(state.as_slice().len(), STATE_LEN);
        Tensor::from_vec(&[WINDOW_LEN, WINDOW_LEN, CHANNELS], state.as_slice().to_vec())
            .expect("GAF state has 576 entries")
    }

    pub fn forward(&self, input: &Tensor) -> Result<NetworkOutput> {
        Ok(self.forward_trace(input)?.output)
    }

    pub fn forward_trace(&self, input: &Tensor) -> Result<Trace> {
        input.expect_shape(&self.arch.input)?;
        let mut activations = Vec::with_capacity(self.arch.trunk_len() + 1);
        activations.push(input.clone());
        let mut p = 0;
        for _ in &self.arch.convs {
            let mut a = conv2d(activations.last().expect("non-empty"), &self.params[p], &self.params[p + 1])?;
            relu_in_place(&mut a);
            activations.push(a);
            p += 2;
        }
        for _ in &self.arch.hidden {
            let mut a = dense(activations.last().expect("non-empty"), &self.params[p], &self.params[p + 1])?;
            relu_in_place(&mut a);
            activations.push(a);
            p += 2;
        }
        let features = activations.last().expect("non-empty");
        let logits = dense(features, &self.params[p], &self.params[p + 1])?.into_data();
        let value = if self.arch.value_head {
            Some(dense(features, &self.params[p + 2], &self.params[p + 3])?.data()[0])
        } else {
            None
        };
        if logits.iter().chain(value.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output"));
        }
        Ok(Trace { activations, output: NetworkOutput { logits, value } })
    }

    /// Accumulates parameter gradients for one traced sample into `grads`.
    pub fn backward(&self, trace: &Trace, d_out: &OutputGrad, grads: &mut [Tensor]) -> Result<()> {
        self.backward_batch(core::slice::from_ref(trace), core::slice::from_ref(d_out), grads)
    }

    /// Accumulates the summed parameter gradients of several traced samples.
    /// Dense layers are swept once per batch rather than once per sample.
    pub fn backward_batch(&self, traces: &[Trace], d_outs: &[OutputGrad], grads: &mut [Tensor]) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::LengthMismatch { left: self.params.len(), right: grads.len() });
        }
        if traces.len() != d_outs.len() {
            return Err(Error::LengthMismatch { left: traces.len(), right: d_outs.len() });
        }
        if let Some(bad) = d_outs.iter().find(|d| d.logits.len() != self.arch.outputs) {
            return Err(Error::LengthMismatch { left: self.arch.outputs, right: bad.logits.len() });
        }
        let trunk = self.arch.trunk_len();
        let head = 2 * trunk;
        let (trunk_grads, head_grads) = grads.split_at_mut(head);
        let want = trunk > 0;
        let mut d_feats = Vec::with_capacity(traces.len());
        for (trace, d_out) in traces.iter().zip(d_outs) {
            let features = &trace.activations[trunk];
            let (w, b) = head_grads.split_at_mut(1);
            let mut d_feat = dense_backward(features, &self.params[head], &d_out.logits, &mut w[0], &mut b[0], want)?;
            if self.arch.value_head {
                let (w, b) = head_grads[2..].split_at_mut(1);
                let dv = dense_backward(features, &self.params[head + 2], &[d_out.value], &mut w[0], &mut b[0], want)?;
                if let (Some(acc), Some(dv)) = (d_feat.as_mut(), dv) {
                    for (a, v) in acc.data_mut().iter_mut().zip(dv.data()) {
                        *a += v;
                    }
                }
            }
            if let Some(d) = d_feat {
                d_feats.push(d);
            }
        }
        for layer in (0..trunk).rev() {
            for (d, trace) in d_feats.iter_mut().zip(traces) {
                relu_backward(&trace.activations[layer + 1], d);
            }
            let (w, b) = trunk_grads[2 * layer..2 * layer + 2].split_at_mut(1);
            let want = layer > 0;
            let kernels = &self.params[2 * layer];
            if layer < self.arch.convs.len() {
                let mut next = Vec::with_capacity(if want { d_feats.len() } else { 0 });
                for (d, trace) in d_feats.iter().zip(traces) {
                    if let Some(d_in) =
                        conv2d_backward(&trace.activations[layer], kernels, d, &mut w[0], &mut b[0], want)?
                    {
                        next.push(d_in);
                    }
                }
                d_feats = next;
            } else {
                let inputs: Vec<&Tensor> = traces.iter().map(|t| &t.activations[layer]).collect();
                let d_slices: Vec<&[f64]> = d_feats.iter().map(Tensor::data).collect();
                d_feats = dense_backward_batch(&inputs, kernels, &d_slices, &mut w[0], &mut b[0], want)?;
            }
        }
        Ok(())
    }

    /// Loss value and exact parameter gradients for a scalar loss of the outputs.
    pub fn gradients<F>(&self, input: &Tensor, loss: F) -> Result<(f64, Vec<Tensor>)>
    where
        F: FnOnce(&NetworkOutput) -> (f64, OutputGrad),
    {
        let trace = self.forward_trace(input)?;
        let (value, d_out) = loss(&trace.output);
        if !value.is_finite() || d_out.logits.iter().any(|g| !g.is_finite()) || !d_out.value.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        let mut grads = self.zero_grads();
        self.backward(&trace, &d_out, &mut grads)?;
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradients"));
        }
        Ok((value, grads))
    }

    /// Overwrites this network's parameters with `other`'s (same architecture).
    pub fn copy_from(&mut self, other: &Network) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::InvalidConfig("architecture mismatch".into()));
        }
        self.params.clone_from(&other.params);
        Ok(())
    }
}
