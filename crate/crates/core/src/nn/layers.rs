//! Layer kernels. Images are `H x W x C` with channels innermost; conv
//! kernels are `k x k x C x F` with filters innermost.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::{Error, Result};

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn dims3(t: &Tensor, what: &str) -> Result<[usize; 3]> {
    match *t.shape() {
        [h, w, c] => Ok([h, w, c]),
        ref s => Err(Error::Shape { expected: format!("{what} of rank 3"), got: format!("{s:?}") }),
    }
}

fn conv_dims(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<([usize; 3], usize, usize)> {
    let [h, w, c] = dims3(input, "conv input")?;
    let (k, f) = match *kernels.shape() {
        [k1, k2, kc, f] if k1 == k2 && kc == c && k1 > 0 => (k1, f),
        ref s => return Err(Error::Shape { expected: format!("[k, k, {c}, F] kernels"), got: format!("{s:?}") }),
    };
    if k > h || k > w {
        return Err(Error::Shape { expected: format!("kernel no larger than {h}x{w}"), got: format!("{k}x{k}") });
    }
    bias.expect_shape(&[f])?;
    Ok(([h, w, c], k, f))
}

#[derive(Clone, Copy)]
struct ConvGeom {
    w: usize,
    c: usize,
    k: usize,
    f: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    /// Within one kernel row the `(kx, ci)` patch is contiguous in both the
    /// image and the kernel; this is its length.
    fn row_len(&self) -> usize {
        self.k * self.c
    }

    fn patch_start(&self, oy: usize, ox: usize, ky: usize) -> usize {
        ((oy + ky) * self.w + ox) * self.c
    }
}

/// Valid, stride-1 cross-correlation plus bias.
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let ([h, w, c], k, f) = conv_dims(input, kernels, bias)?;
    let g = ConvGeom { w, c, k, f, oh: h - k + 1, ow: w - k + 1 };
    let mut out = Tensor::zeros(&[g.oh, g.ow, f]);
    let (x, wt, b, o) = (input.data(), kernels.data(), bias.data(), out.data_mut());
    // Common filter counts get a fixed-width accumulator that stays in registers.
    match f {
        4 => conv_forward_fixed::<4>(g, x, wt, b, o),
        8 => conv_forward_fixed::<8>(g, x, wt, b, o),
        16 => conv_forward_fixed::<16>(g, x, wt, b, o),
        32 => conv_forward_fixed::<32>(g, x, wt, b, o),
        _ => conv_forward_any(g, x, wt, b, o),
    }
    Ok(out)
}

fn conv_forward_fixed<const F: usize>(g: ConvGeom, x: &[f64], wt: &[f64], bias: &[f64], o: &mut [f64]) {
    let row_len = g.row_len();
    let bias: [f64; F] = bias.try_into().expect("bias length checked");
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let mut acc = bias;
            for ky in 0..g.k {
                let start = g.patch_start(oy, ox, ky);
                let xs = &x[start..start + row_len];
                let ws = &wt[ky * row_len * F..(ky + 1) * row_len * F];
                for (&xv, wr) in xs.iter().zip(ws.chunks_exact(F)) {
                    for j in 0..F {
                        acc[j] += xv * wr[j];
                    }
                }
            }
            let p = (oy * g.ow + ox) * F;
            o[p..p + F].copy_from_slice(&acc);
        }
    }
}

fn conv_forward_any(g: ConvGeom, x: &[f64], wt: &[f64], bias: &[f64], o: &mut [f64]) {
    let (row_len, f) = (g.row_len(), g.f);
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let p = (oy * g.ow + ox) * f;
            let acc = &mut o[p..p + f];
            acc.copy_from_slice(bias);
            for ky in 0..g.k {
                let start = g.patch_start(oy, ox, ky);
                let xs = &x[start..start + row_len];
                let ws = &wt[ky * row_len * f..(ky + 1) * row_len * f];
                for (&xv, wr) in xs.iter().zip(ws.chunks_exact(f)) {
                    for (a, &wv) in acc.iter_mut().zip(wr) {
                        *a += xv * wv;
                    }
                }
            }
        }
    }
}

/// Accumulates kernel and bias gradients; returns the input gradient when asked.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    d_out: &Tensor,
    d_kernels: &mut Tensor,
    d_bias: &mut Tensor,
    want_input_grad: bool,
) -> Result<Option<Tensor>> {
    let bias_shape = [kernels.shape().get(3).copied().unwrap_or(0)];
    let ([h, w, c], k, f) = conv_dims(input, kernels, &Tensor::zeros(&bias_shape))?;
    let g = ConvGeom { w, c, k, f, oh: h - k + 1, ow: w - k + 1 };
    d_out.expect_shape(&[g.oh, g.ow, f])?;
    d_kernels.expect_shape(kernels.shape())?;
    d_bias.expect_shape(&[f])?;
    let mut d_in = want_input_grad.then(|| Tensor::zeros(&[h, w, c]));
    let grads = ConvGrads {
        d_kernels: d_kernels.data_mut(),
        d_bias: d_bias.data_mut(),
        d_input: d_in.as_mut().map(Tensor::data_mut),
    };
    let (x, wt, go) = (input.data(), kernels.data(), d_out.data());
    match f {
        4 => conv_backward_fixed::<4>(g, x, wt, go, grads),
        8 => conv_backward_fixed::<8>(g, x, wt, go, grads),
        16 => conv_backward_fixed::<16>(g, x, wt, go, grads),
        32 => conv_backward_fixed::<32>(g, x, wt, go, grads),
        _ => conv_backward_any(g, x, wt, go, grads),
    }
    Ok(d_in)
}

struct ConvGrads<'a> {
    d_kernels: &'a mut [f64],
    d_bias: &'a mut [f64],
    d_input: Option<&'a mut [f64]>,
}

fn conv_backward_fixed<const F: usize>(g: ConvGeom, x: &[f64], wt: &[f64], d_out: &[f64], mut grads: ConvGrads<'_>) {
    let row_len = g.row_len();
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let p = (oy * g.ow + ox) * F;
            let go: [f64; F] = d_out[p..p + F].try_into().expect("d_out shape checked");
            for ky in 0..g.k {
                let start = g.patch_start(oy, ox, ky);
                let xs = &x[start..start + row_len];
                let krows = ky * row_len * F..(ky + 1) * row_len * F;
                for (&xv, drow) in xs.iter().zip(grads.d_kernels[krows.clone()].chunks_exact_mut(F)) {
                    for j in 0..F {
                        drow[j] += xv * go[j];
                    }
                }
                if let Some(di) = grads.d_input.as_deref_mut() {
                    for (d, wrow) in di[start..start + row_len].iter_mut().zip(wt[krows].chunks_exact(F)) {
                        let mut part = [0.0; 4];
                        for j in 0..F {
                            part[j % 4] += wrow[j] * go[j];
                        }
                        *d += (part[0] + part[1]) + (part[2] + part[3]);
                    }
                }
            }
            for (b, g) in grads.d_bias.iter_mut().zip(go) {
                *b += g;
            }
        }
    }
}

fn conv_backward_any(g: ConvGeom, x: &[f64], wt: &[f64], d_out: &[f64], mut grads: ConvGrads<'_>) {
    let (row_len, f) = (g.row_len(), g.f);
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let p = (oy * g.ow + ox) * f;
            let go = &d_out[p..p + f];
            for ky in 0..g.k {
                let start = g.patch_start(oy, ox, ky);
                let xs = &x[start..start + row_len];
                let krows = ky * row_len * f..(ky + 1) * row_len * f;
                for (&xv, drow) in xs.iter().zip(grads.d_kernels[krows.clone()].chunks_exact_mut(f)) {
                    for (d, &gv) in drow.iter_mut().zip(go) {
                        *d += xv * gv;
                    }
                }
                if let Some(di) = grads.d_input.as_deref_mut() {
                    for (d, wrow) in di[start..start + row_len].iter_mut().zip(wt[krows].chunks_exact(f)) {
                        *d += dot(wrow, go);
                    }
                }
            }
            for (d, &gv) in grads.d_bias.iter_mut().zip(go) {
                *d += gv;
            }
        }
    }
}

fn dense_dims(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    let n = input.len();
    let m = match *weights.shape() {
        [wn, m] if wn == n => m,
        ref s => return Err(Error::Shape { expected: format!("[{n}, M] weights"), got: format!("{s:?}") }),
    };
    bias.expect_shape(&[m])?;
    Ok((n, m))
}

/// `x W + b` over the flattened input.
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, m) = dense_dims(input, weights, bias)?;
    let mut out = bias.data().to_vec();
    for (row, &xv) in weights.data().chunks_exact(m).zip(input.data()) {
        if xv == 0.0 {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += xv * wv;
        }
    }
    Tensor::from_vec(&[m], out)
}

pub fn dense_backward(
    input: &Tensor,
    weights: &Tensor,
    d_out: &[f64],
    d_weights: &mut Tensor,
    d_bias: &mut Tensor,
    want_input_grad: bool,
) -> Result<Option<Tensor>> {
    let (_, m) = dense_dims(input, weights, &Tensor::zeros(&[d_out.len()]))?;
    d_weights.expect_shape(weights.shape())?;
    d_bias.expect_shape(&[m])?;
    for (d, &g) in d_bias.data_mut().iter_mut().zip(d_out) {
        *d += g;
    }
    for (row, &xv) in d_weights.data_mut().chunks_exact_mut(m).zip(input.data()) {
        if xv == 0.0 {
            continue;
        }
        for (d, &g) in row.iter_mut().zip(d_out) {
            *d += xv * g;
        }
    }
    if !want_input_grad {
        return Ok(None);
    }
    let d_in: Vec<f64> = weights.data().chunks_exact(m).map(|row| dot(row, d_out)).collect();
    Tensor::from_vec(input.shape(), d_in).map(Some)
}

/// [`dense_backward`] summed over a batch. Returns the per-sample input
/// gradients when asked, otherwise an empty vector.
pub fn dense_backward_batch(
    inputs: &[&Tensor],
    weights: &Tensor,
    d_outs: &[&[f64]],
    d_weights: &mut Tensor,
    d_bias: &mut Tensor,
    want_input_grad: bool,
) -> Result<Vec<Tensor>> {
    if inputs.len() != d_outs.len() {
        return Err(Error::LengthMismatch { left: inputs.len(), right: d_outs.len() });
    }
    let Some(first) = inputs.first() else {
        return Ok(Vec::new());
    };
    let m = d_outs[0].len();
    let (n, _) = dense_dims(first, weights, &Tensor::zeros(&[m]))?;
    for (x, g) in inputs.iter().zip(d_outs) {
        if x.len() != n || g.len() != m {
            return Err(Error::Shape {
                expected: format!("inputs of {n} and output gradients of {m}"),
                got: format!("{} and {}", x.len(), g.len()),
            });
        }
    }
    d_weights.expect_shape(weights.shape())?;
    d_bias.expect_shape(&[m])?;
    for g in d_outs {
        for (d, &gv) in d_bias.data_mut().iter_mut().zip(g.iter()) {
            *d += gv;
        }
    }
    let mut d_in: Vec<Vec<f64>> =
        if want_input_grad { inputs.iter().map(|_| vec![0.0; n]).collect() } else { Vec::new() };
    let rows = d_weights.data_mut().chunks_exact_mut(m).zip(weights.data().chunks_exact(m));
    for (i, (d_row, w_row)) in rows.enumerate() {
        for (x, g) in inputs.iter().zip(d_outs) {
            let xv = x.data()[i];
            if xv != 0.0 {
                for (d, &gv) in d_row.iter_mut().zip(g.iter()) {
                    *d += xv * gv;
                }
            }
        }
        for (di, g) in d_in.iter_mut().zip(d_outs) {
            di[i] = dot(w_row, g);
        }
    }
    inputs.iter().zip(d_in).map(|(x, d)| Tensor::from_vec(x.shape(), d)).collect()
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn relu_in_place(t: &mut Tensor) {
    t.data_mut().iter_mut().for_each(|v| *v = relu(*v));
}

/// Masks `d_out` where the ReLU output was zero.
pub fn relu_backward(output: &Tensor, d_out: &mut Tensor) {
    for (d, &y) in d_out.data_mut().iter_mut().zip(output.data()) {
        if y <= 0.0 {
            *d = 0.0;
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
    logits.iter().map(|&z| z - lse).collect()
}
