//! Gramian angular summation field (GASF) encoding of candle windows.
//!
//! Each OHLC channel of a 12-bar window is min-max rescaled into [-1, 1],
//! mapped to angles `phi = arccos(x)`, and expanded into the matrix
//! `cos(phi_i + phi_j)`. The four matrices stack into a 12x12x4 state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::market::{CandleWindow, WINDOW_LEN};
use crate::{Error, Result};

pub const CHANNELS: usize = 4;
pub const CHANNEL_NAMES: [&str; CHANNELS] = ["open", "high", "low", "close"];
pub const STATE_LEN: usize = WINDOW_LEN * WINDOW_LEN * CHANNELS;

/// A window rescaled into [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledSeries([f64; WINDOW_LEN]);

impl RescaledSeries {
    /// Wraps values already in [-1, 1].
    pub fn new(values: [f64; WINDOW_LEN]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidConfig("rescaled values must lie in [-1, 1]".into()));
        }
        Ok(RescaledSeries(values))
    }

    pub fn values(&self) -> &[f64; WINDOW_LEN] {
        &self.0
    }
}

/// Min-max rescale over the window itself. A constant window maps to zeros.
pub fn rescale(values: &[f64; WINDOW_LEN]) -> Result<RescaledSeries> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rescale input"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rescale_between(values, min, max)
}

/// Min-max rescale against a fixed `[min, max]`; values outside are clamped.
pub fn rescale_between(values: &[f64; WINDOW_LEN], min: f64, max: f64) -> Result<RescaledSeries> {
    if values.iter().any(|v| !v.is_finite()) || !min.is_finite() || !max.is_finite() {
        return Err(Error::NonFinite("rescale input"));
    }
    let mut out = [0.0; WINDOW_LEN];
    if max > min {
        let span = max - min;
        for (o, v) in out.iter_mut().zip(values) {
            *o = (2.0 * (v - min) / span - 1.0).clamp(-1.0, 1.0);
        }
    }
    Ok(RescaledSeries(out))
}

/// A symmetric 12x12 Gram matrix.
pub type GramMatrix = [[f64; WINDOW_LEN]; WINDOW_LEN];

pub fn gasf(x: &RescaledSeries) -> GramMatrix {
    let mut phi = [0.0; WINDOW_LEN];
    for (p, v) in phi.iter_mut().zip(x.values()) {
        *p = libm::acos(v.clamp(-1.0, 1.0));
    }
    let mut g = [[0.0; WINDOW_LEN]; WINDOW_LEN];
    for i in 0..WINDOW_LEN {
        for j in i..WINDOW_LEN {
            let v = libm::cos(phi[i] + phi[j]);
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    g
}

/// Where the rescaling bounds come from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Rescaling {
    /// Bounds taken from each window and channel independently.
    #[default]
    PerWindow,
    /// Fixed `(min, max)` per channel, e.g. measured over a training range.
    Fixed([(f64, f64); CHANNELS]),
}

impl Rescaling {
    /// Per-channel bounds over every bar of `candles`.
    pub fn fixed_from(candles: &[crate::Candle]) -> Rescaling {
        let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); CHANNELS];
        for c in candles {
            for (ch, r) in ranges.iter_mut().enumerate() {
                let v = c.channel(ch).as_f64();
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        Rescaling::Fixed(ranges)
    }
}

/// A 12x12x4 stack of GASF matrices, stored row-major with channel innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct GafState {
    data: Vec<f64>,
}

impl GafState {
    pub fn from_channels(channels: &[GramMatrix; CHANNELS]) -> Self {
        let mut data = vec![0.0; STATE_LEN];
        for i in 0..WINDOW_LEN {
            for j in 0..WINDOW_LEN {
                for (c, m) in channels.iter().enumerate() {
                    data[(i * WINDOW_LEN + j) * CHANNELS + c] = m[i][j];
                }
            }
        }
        GafState { data }
    }

    /// Rebuilds a state from its flat layout, checking length and range.
    pub fn from_flat(data: Vec<f64>) -> Result<Self> {
        if data.len() != STATE_LEN {
            return Err(Error::Shape { expected: format!("{STATE_LEN} values"), got: format!("{}", data.len()) });
        }
        if data.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidConfig("GAF entries must lie in [-1, 1]".into()));
        }
        Ok(GafState { data })
    }

    pub fn shape(&self) -> [usize; 3] {
        [WINDOW_LEN, WINDOW_LEN, CHANNELS]
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * WINDOW_LEN + col) * CHANNELS + channel]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, channel: usize) -> GramMatrix {
        let mut m = [[0.0; WINDOW_LEN]; WINDOW_LEN];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j, channel);
            }
        }
        m
    }
}

pub fn encode_window(window: &CandleWindow<'_>) -> Result<GafState> {
    encode_window_with(window, &Rescaling::PerWindow)
}

pub fn encode_window_with(window: &CandleWindow<'_>, rescaling: &Rescaling) -> Result<GafState> {
    let mut channels = [[[0.0; WINDOW_LEN]; WINDOW_LEN]; CHANNELS];
    for (c, out) in channels.iter_mut().enumerate() {
        let raw = window.channel(c);
        let scaled = match rescaling {
            Rescaling::PerWindow => rescale(&raw)?,
            Rescaling::Fixed(ranges) => rescale_between(&raw, ranges[c].0, ranges[c].1)?,
        };
        *out = gasf(&scaled);
    }
    Ok(GafState::from_channels(&channels))
}

/// Diverging blue-white-red colormap: -1 blue, 0 white, +1 red.
pub fn heat_color(value: f64) -> [u8; 3] {
    let v = value.clamp(-1.0, 1.0);
    let fade = |t: f64| libm::round(255.0 * t) as u8;
    if v <= 0.0 {
        let t = fade(v + 1.0);
        [t, t, 255]
    } else {
        let t = fade(1.0 - v);
        [255, t, t]
    }
}

/// Renders one channel as a binary PPM (P6), each cell a `zoom`x`zoom` block.
pub fn render_heatmap(state: &GafState, channel: usize, zoom: usize) -> Result<Vec<u8>> {
    if channel >= CHANNELS {
        return Err(Error::InvalidConfig(format!("channel {channel} not in 0..4")));
    }
    if zoom == 0 {
        return Err(Error::InvalidConfig("zoom must be positive".into()));
    }
    let side = WINDOW_LEN * zoom;
    let header = format!("P6\n{side} {side}\n255\n");
    let mut out = Vec::with_capacity(header.len() + side * side * 3);
    out.extend_from_slice(header.as_bytes());
    for row in 0..side {
        for col in 0..side {
            out.extend_from_slice(&heat_color(state.get(row / zoom, col / zoom, channel)));
        }
    }
    Ok(out)
}
