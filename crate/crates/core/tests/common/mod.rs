//! Reference implementations used to check the library. They are written
//! from the trading rules directly and share no code with the crate.

#![allow(dead_code)]

use surefire_core::market::{GapPolicy, FOUR_HOURS_SECS};
use surefire_core::{Candle, CandleSeries, Pips, Side};

// ---------------------------------------------------------------- grid

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOutcome {
    pub pnl: i128,
    pub positions: usize,
    pub bars: usize,
    pub settled: bool,
}

/// Cash-and-inventory bookkeeping of a Sure-Fire grid. Orders alternate
/// between the entry price and one take-profit away on the losing side,
/// sizes 1, 3, 6, 12, ...; exits happen at `entry + k` / `entry - 2k`
/// (mirrored for a sell-first grid).
pub fn oracle_grid(
    entry: i64,
    first: Side,
    k: i64,
    max_additional: Option<u32>,
    base: u64,
    closes: &[i64],
) -> OracleOutcome {
    let s: i128 = if first == Side::Buy { 1 } else { -1 };
    let (e, k) = (entry as i128, k as i128);
    let near = e - s * k;
    let win_exit = e + s * k;
    let loss_exit = e - 2 * s * k;
    let base = base as i128;
    let mut inventory = s * base;
    let mut cash = -s * base * e;
    let mut positions = 1usize;
    let mut size = base;
    for (i, &c) in closes.iter().enumerate() {
        let c = c as i128;
        let budget = max_additional.is_none_or(|m| positions <= m as usize);
        if budget {
            let at_near = positions % 2 == 1;
            let crossed = if at_near { s * c <= s * near } else { s * c >= s * e };
            if crossed {
                size = if positions == 1 { 3 * base } else { size * 2 };
                let (dir, level) = if at_near { (-s, near) } else { (s, e) };
                inventory += dir * size;
                cash -= dir * size * level;
                positions += 1;
            }
        }
        let exit = if s * c >= s * win_exit {
            Some(win_exit)
        } else if s * c <= s * loss_exit {
            Some(loss_exit)
        } else {
            None
        };
        if let Some(x) = exit {
            return OracleOutcome { pnl: cash + inventory * x, positions, bars: i + 1, settled: true };
        }
    }
    let last = *closes.last().expect("non-empty closes") as i128;
    OracleOutcome { pnl: cash + inventory * last, positions, bars: closes.len(), settled: false }
}

/// Bounce between the two order levels until `m` additional orders have
/// filled, then run to the exit that loses.
pub fn forced_loss_path(entry: i64, first: Side, k: i64, m: u32) -> Vec<i64> {
    let s = if first == Side::Buy { 1 } else { -1 };
    let near = entry - s * k;
    let mut path: Vec<i64> = (0..m).map(|i| if i % 2 == 0 { near } else { entry }).collect();
    // After an odd number of extra fills the grid is net short the first side.
    path.push(if m % 2 == 1 { entry + s * k } else { entry - 2 * s * k });
    path
}

/// Worst settled P&L over every close path of up to `max_len` bars drawn from
/// the prices between the exits in steps of `k`.
pub fn worst_settled_loss(entry: i64, first: Side, k: i64, m: u32, max_len: usize) -> i128 {
    let s = if first == Side::Buy { 1 } else { -1 };
    let (lo, hi) = if s == 1 { (entry - 2 * k, entry + k) } else { (entry - k, entry + 2 * k) };
    let levels: Vec<i64> = (0..).map(|i| lo + i * k).take_while(|&p| p <= hi).collect();
    let mut worst = i128::MAX;
    let mut path = Vec::with_capacity(max_len);
    fn walk(
        levels: &[i64],
        path: &mut Vec<i64>,
        max_len: usize,
        worst: &mut i128,
        run: &dyn Fn(&[i64]) -> OracleOutcome,
    ) {
        if !path.is_empty() {
            let o = run(path);
            if o.settled {
                *worst = (*worst).min(o.pnl);
                return;
            }
        }
        if path.len() == max_len {
            return;
        }
        for &p in levels {
            path.push(p);
            walk(levels, path, max_len, worst, run);
            path.pop();
        }
    }
    let run = |p: &[i64]| oracle_grid(entry, first, k, Some(m), 1, p);
    walk(&levels, &mut path, max_len, &mut worst, &run);
    worst
}

/// Gaussian-free integer random walk: each step moves by -step..=step pips.
pub fn random_walk<R: rand::Rng>(rng: &mut R, start: i64, len: usize, step: i64) -> Vec<i64> {
    let mut p = start;
    (0..len)
        .map(|_| {
            p += rng.gen_range(-step..=step);
            p
        })
        .collect()
}

pub fn to_pips(v: &[i64]) -> Vec<Pips> {
    v.iter().copied().map(Pips).collect()
}

// ---------------------------------------------------------------- GAF

pub fn oracle_rescale(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| ((x - hi) + (x - lo)) / (hi - lo)).collect()
}

/// `cos(phi_i + phi_j)` with `phi = arccos(x)`.
pub fn oracle_gasf_trig(x: &[f64]) -> Vec<Vec<f64>> {
    let phi: Vec<f64> = x.iter().map(|v| v.clamp(-1.0, 1.0).acos()).collect();
    phi.iter().map(|a| phi.iter().map(|b| (a + b).cos()).collect()).collect()
}

/// `x_i x_j - sqrt(1 - x_i^2) sqrt(1 - x_j^2)`.
pub fn oracle_gasf_algebraic(x: &[f64]) -> Vec<Vec<f64>> {
    let s: Vec<f64> = x.iter().map(|v| (1.0 - v * v).max(0.0).sqrt()).collect();
    (0..x.len()).map(|i| (0..x.len()).map(|j| x[i] * x[j] - s[i] * s[j]).collect()).collect()
}

// ---------------------------------------------------------------- gradients

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &mut [f64], i: usize, h: f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let up = f(x);
    x[i] = orig - h;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|, 1e-8)` over whole vectors (Euclidean norms).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    diff / norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied())).max(1e-8)
}

// ---------------------------------------------------------------- metrics

pub fn oracle_net_profit(log: &[i64]) -> i64 {
    let mut total = 0;
    for p in log {
        total += p;
    }
    total
}

/// `None` when there are no losses; the caller distinguishes inf from n/a.
pub fn oracle_profit_factor(log: &[i64]) -> Option<f64> {
    let wins: i64 = log.iter().map(|&p| p.max(0)).sum();
    let losses: i64 = log.iter().map(|&p| (-p).max(0)).sum();
    (losses > 0).then(|| wins as f64 / losses as f64)
}

/// Worst ratio over every ordered pair of equity points, in percent.
pub fn oracle_max_drawdown(log: &[i64], initial: i64) -> f64 {
    let mut equity = vec![initial];
    for p in log {
        equity.push(equity.last().unwrap() + p);
    }
    let mut worst = 0.0f64;
    for i in 0..equity.len() {
        for j in i..equity.len() {
            if equity[j] < equity[i] {
                worst = worst.min((equity[j] - equity[i]) as f64 / equity[i] as f64);
            }
        }
    }
    worst * 100.0
}

pub fn oracle_sqn(log: &[i64]) -> Option<f64> {
    let n = log.len() as f64;
    let mean = log.iter().sum::<i64>() as f64 / n;
    let ss: f64 = log.iter().map(|&p| (p as f64 - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    (sd > 0.0).then(|| mean * n.sqrt() / sd)
}

// ---------------------------------------------------------------- synthetic market

pub const SYNTHETIC_BARS: usize = 44;
pub const SYNTHETIC_START: i64 = 110_000;

/// Strictly rising closes, each step 20..=40 pips from a fixed LCG. Buying
/// with any take-profit wins without ever filling a second order; selling
/// first always takes one losing fill before the upper exit.
pub fn synthetic_rising_closes(bars: usize) -> Vec<i64> {
    let mut state: u64 = 12_345;
    let mut close = SYNTHETIC_START;
    (0..bars)
        .map(|i| {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            if i > 0 {
                close += 20 + ((state >> 33) % 21) as i64;
            }
            close
        })
        .collect()
}

pub fn series_from_closes(closes: &[i64]) -> CandleSeries {
    let candles = closes
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            Candle::new(1_533_081_600 + i as i64 * FOUR_HOURS_SECS, Pips(c), Pips(c + 2), Pips(c - 2), Pips(c))
                .expect("valid candle")
        })
        .collect();
    CandleSeries::new(candles, FOUR_HOURS_SECS, GapPolicy::Reject).expect("valid series")
}

// ---------------------------------------------------------------- gradient checks

pub mod gradcheck {
    use super::{central_difference, relative_error};
    use rand::Rng;
    use rand_distr::StandardNormal;
    use surefire_core::agents::{ppo_sample_grad, PpoCoefficients};
    use surefire_core::nn::{
        conv2d, conv2d_backward, dense, dense_backward, relu_backward, relu_in_place, Architecture, ConvSpec, Network,
        OutputGrad, Tensor,
    };

    pub const H: f64 = 1e-5;

    fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn tensor<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor {
        Tensor::from_vec(shape, normal_vec(rng, shape.iter().product())).unwrap()
    }

    fn weighted(out: &[f64], w: &[f64]) -> f64 {
        out.iter().zip(w).map(|(a, b)| a * b).sum()
    }

    /// Relative error of every gradient (input, kernels, bias) of a random
    /// convolution under the loss `sum(w * conv(x))`; the worst is returned.
    pub fn conv<R: Rng>(rng: &mut R) -> f64 {
        let k = rng.gen_range(1..=3);
        let h = rng.gen_range(k..=k + 4);
        let wd = rng.gen_range(k..=k + 4);
        let c = rng.gen_range(1..=4);
        let f = [1, 3, 4, 8, 16][rng.gen_range(0..5)];
        let x = tensor(rng, &[h, wd, c]);
        let kern = tensor(rng, &[k, k, c, f]);
        let bias = tensor(rng, &[f]);
        let w = normal_vec(rng, (h - k + 1) * (wd - k + 1) * f);
        let d_out = Tensor::from_vec(&[h - k + 1, wd - k + 1, f], w.clone()).unwrap();
        let mut dk = Tensor::zeros(kern.shape());
        let mut db = Tensor::zeros(&[f]);
        let dx = conv2d_backward(&x, &kern, &d_out, &mut dk, &mut db, true).unwrap().unwrap();

        let mut errs = Vec::new();
        let mut xs = x.data().to_vec();
        let fd: Vec<f64> = (0..xs.len())
            .map(|i| {
                let mut f = |v: &[f64]| {
                    weighted(
                        conv2d(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), &kern, &bias).unwrap().data(),
                        &w,
                    )
                };
                central_difference(&mut f, &mut xs, i, H)
            })
            .collect();
        errs.push(relative_error(dx.data(), &fd));
        let mut ks = kern.data().to_vec();
        let fd: Vec<f64> = (0..ks.len())
            .map(|i| {
                let mut f = |v: &[f64]| {
                    weighted(
                        conv2d(&x, &Tensor::from_vec(kern.shape(), v.to_vec()).unwrap(), &bias).unwrap().data(),
                        &w,
                    )
                };
                central_difference(&mut f, &mut ks, i, H)
            })
            .collect();
        errs.push(relative_error(dk.data(), &fd));
        let mut bs = bias.data().to_vec();
        let fd: Vec<f64> = (0..bs.len())
            .map(|i| {
                let mut f = |v: &[f64]| {
                    weighted(conv2d(&x, &kern, &Tensor::from_vec(&[f], v.to_vec()).unwrap()).unwrap().data(), &w)
                };
                central_difference(&mut f, &mut bs, i, H)
            })
            .collect();
        errs.push(relative_error(db.data(), &fd));
        errs.into_iter().fold(0.0, f64::max)
    }

    pub fn dense_layer<R: Rng>(rng: &mut R) -> f64 {
        let n = rng.gen_range(1..=40);
        let m = rng.gen_range(1..=20);
        let x = tensor(rng, &[n]);
        let wt = tensor(rng, &[n, m]);
        let b = tensor(rng, &[m]);
        let c = normal_vec(rng, m);
        let mut dw = Tensor::zeros(&[n, m]);
        let mut db = Tensor::zeros(&[m]);
        let dx = dense_backward(&x, &wt, &c, &mut dw, &mut db, true).unwrap().unwrap();
        let run = |x: &Tensor, wt: &Tensor, b: &Tensor| weighted(dense(x, wt, b).unwrap().data(), &c);
        let mut errs = Vec::new();
        for (which, analytic) in [(0, dx.data()), (1, dw.data()), (2, db.data())] {
            let base = [&x, &wt, &b][which];
            let mut v = base.data().to_vec();
            let fd: Vec<f64> = (0..v.len())
                .map(|i| {
                    let mut f = |p: &[f64]| {
                        let t = Tensor::from_vec(base.shape(), p.to_vec()).unwrap();
                        match which {
                            0 => run(&t, &wt, &b),
                            1 => run(&x, &t, &b),
                            _ => run(&x, &wt, &t),
                        }
                    };
                    central_difference(&mut f, &mut v, i, H)
                })
                .collect();
            errs.push(relative_error(analytic, &fd));
        }
        errs.into_iter().fold(0.0, f64::max)
    }

    /// Inputs are kept at least 1e-3 from the kink.
    pub fn relu<R: Rng>(rng: &mut R) -> f64 {
        let n = rng.gen_range(1..=50);
        let xs: Vec<f64> =
            normal_vec(rng, n).into_iter().map(|v| if v.abs() < 1e-3 { 1e-3_f64.copysign(v) + v } else { v }).collect();
        let c = normal_vec(rng, n);
        let mut y = Tensor::from_vec(&[n], xs.clone()).unwrap();
        relu_in_place(&mut y);
        let mut d = Tensor::from_vec(&[n], c.clone()).unwrap();
        relu_backward(&y, &mut d);
        let mut v = xs;
        let fd: Vec<f64> = (0..n)
            .map(|i| {
                let mut f = |p: &[f64]| {
                    let mut t = Tensor::from_vec(&[n], p.to_vec()).unwrap();
                    relu_in_place(&mut t);
                    weighted(t.data(), &c)
                };
                central_difference(&mut f, &mut v, i, H)
            })
            .collect();
        relative_error(d.data(), &fd)
    }

    /// Softmax policy head under the clipped PPO objective, value and entropy
    /// terms included. Ratios are kept away from the clip edges.
    pub fn policy_head<R: Rng>(rng: &mut R) -> f64 {
        let n = rng.gen_range(2..=18);
        let logits = normal_vec(rng, n);
        let action = rng.gen_range(0..n);
        let value: f64 = rng.sample(StandardNormal);
        let ret: f64 = rng.sample(StandardNormal);
        let adv: f64 = rng.sample(StandardNormal);
        let clip = 0.2;
        let lp = logits[action] - logits.iter().map(|z| z.exp()).sum::<f64>().ln();
        let ratio = loop {
            let r = rng.gen_range(0.5..1.5);
            if ((r - 1.0_f64).abs() - clip).abs() > 0.02 {
                break r;
            }
        };
        let old = lp - f64::ln(ratio);
        let coefs = PpoCoefficients::default();
        let (_, grad, _) = ppo_sample_grad(&logits, value, action, old, adv, ret, clip, coefs, 1).unwrap();
        let mut v = logits.clone();
        v.push(value);
        let mut f = |p: &[f64]| ppo_sample_grad(&p[..n], p[n], action, old, adv, ret, clip, coefs, 1).unwrap().0;
        let fd: Vec<f64> = (0..=n).map(|i| central_difference(&mut f, &mut v, i, H)).collect();
        let mut analytic = grad.logits;
        analytic.push(grad.value);
        relative_error(&analytic, &fd)
    }

    pub fn random_architecture<R: Rng>(rng: &mut R) -> Architecture {
        let side = rng.gen_range(5..=8);
        let channels = rng.gen_range(1..=4);
        let convs = (0..rng.gen_range(0..=2))
            .map(|_| ConvSpec { kernel: rng.gen_range(1..=2), filters: rng.gen_range(1..=5) })
            .collect();
        Architecture {
            input: [side, side, channels],
            convs,
            hidden: (0..rng.gen_range(0..=2)).map(|_| rng.gen_range(2..=10)).collect(),
            outputs: rng.gen_range(1..=18),
            value_head: rng.gen_bool(0.5),
        }
    }

    /// Which trunk units are active; a finite difference is only meaningful
    /// when both perturbed points share this pattern with each other.
    fn relu_pattern(net: &Network, input: &Tensor) -> Vec<bool> {
        let trace = net.forward_trace(input).unwrap();
        trace.activations()[1..].iter().flat_map(|a| a.data().iter().map(|&v| v > 0.0)).collect()
    }

    /// Worst per-tensor relative error of a network's parameter gradients
    /// under `sum(c * logits) + c_v * value`. With `sample = Some(n)`, each
    /// tensor compares `n` random coordinates instead of all of them.
    /// Coordinates whose perturbation flips a ReLU are skipped.
    pub fn network<R: Rng>(rng: &mut R, arch: Architecture, sample: Option<usize>) -> f64 {
        let mut net = Network::new(arch.clone(), rng.gen()).unwrap();
        // Undo the small head scaling so every layer carries signal.
        for p in net.params_mut() {
            for v in p.data_mut() {
                *v = rng.sample::<f64, _>(StandardNormal) * 0.5;
            }
        }
        let [h, w, c] = arch.input;
        let input = tensor(rng, &[h, w, c]);
        let cl = normal_vec(rng, arch.outputs);
        let cv: f64 = rng.sample(StandardNormal);
        let loss = |out: &surefire_core::nn::NetworkOutput| weighted(&out.logits, &cl) + cv * out.value.unwrap_or(0.0);
        let (_, grads) =
            net.gradients(&input, |out| (loss(out), OutputGrad { logits: cl.clone(), value: cv })).unwrap();
        let mut worst = 0.0f64;
        for (t, grad) in grads.iter().enumerate() {
            let len = grad.len();
            let coords: Vec<usize> = match sample {
                Some(n) if n < len => (0..n).map(|_| rng.gen_range(0..len)).collect(),
                _ => (0..len).collect(),
            };
            let mut analytic = Vec::with_capacity(coords.len());
            let mut fd = Vec::with_capacity(coords.len());
            for &i in &coords {
                let orig = net.params()[t].data()[i];
                net.params_mut()[t].data_mut()[i] = orig + H;
                let up = loss(&net.forward(&input).unwrap());
                let up_pattern = relu_pattern(&net, &input);
                net.params_mut()[t].data_mut()[i] = orig - H;
                let down = loss(&net.forward(&input).unwrap());
                let down_pattern = relu_pattern(&net, &input);
                net.params_mut()[t].data_mut()[i] = orig;
                if up_pattern != down_pattern {
                    continue;
                }
                analytic.push(grad.data()[i]);
                fd.push((up - down) / (2.0 * H));
            }
            worst = worst.max(relative_error(&analytic, &fd));
        }
        worst
    }
}
