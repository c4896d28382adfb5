//! Learned per-channel cumulative distributions.
//!
//! Each channel owns a small monotone network `R -> (0, 1)`:
//! `K` affine layers whose matrices are `exp(H)` (strictly positive), with
//! the gated nonlinearity `x + tanh(a) * tanh(x)` between layers and a
//! logistic sigmoid at the end. Positive weights and `|tanh(a)| < 1` keep
//! every layer nondecreasing, so the composition is a valid CDF.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Probability floor; matches the 16-bit frequency precision of the coder.
pub const P_MIN: f64 = 1.0 / 65536.0;

/// Layer widths of the default per-channel network (input and output 1).
pub const DEFAULT_DIMS: [usize; 5] = [1, 3, 3, 3, 1];

/// Spread of the freshly initialized distribution: `cdf(y) = sigmoid(y / INIT_SCALE)`
/// before symmetry-breaking perturbations.
pub const INIT_SCALE: f64 = 10.0;

const MAX_WIDTH: usize = 8;
const MAX_LAYERS: usize = 8;

/// Anything that assigns probability mass to integer-centred unit bins.
pub trait ProbabilityModel: Sync {
    fn channels(&self) -> usize;

    fn cdf(&self, channel: usize, y: f64) -> Result<f64>;

    /// Probability of the unit bin centred at `y`, floored at [`P_MIN`].
    fn pmf(&self, channel: usize, y: f64) -> Result<f64> {
        let p = self.cdf(channel, y + 0.5)? - self.cdf(channel, y - 0.5)?;
        Ok(p.max(P_MIN))
    }

    fn param_count(&self) -> usize {
        0
    }

    /// Returns `(-log2 pmf(y), d/dy)` and accumulates `scale * d/dparams`
    /// into `grad` (length [`param_count`](Self::param_count)).
    fn bits_with_grad(
        &self,
        channel: usize,
        y: f64,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<(f64, f64)>;

    fn bits(&self, channel: usize, y: f64) -> Result<f64> {
        Ok(-self.pmf(channel, y)?.log2())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(u) - sigmoid(l)` for `u >= l` without cancellation in the upper tail.
#[inline]
fn sigmoid_diff(u: f64, l: f64) -> f64 {
    if u + l > 0.0 {
        sigmoid(-l) - sigmoid(-u)
    } else {
        sigmoid(u) - sigmoid(l)
    }
}

#[derive(Clone, Copy)]
struct Tape {
    x: [[f64; MAX_WIDTH]; MAX_LAYERS + 1],
    tz: [[f64; MAX_WIDTH]; MAX_LAYERS],
}

impl Tape {
    fn new() -> Self {
        Tape {
            x: [[0.0; MAX_WIDTH]; MAX_LAYERS + 1],
            tz: [[0.0; MAX_WIDTH]; MAX_LAYERS],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EntropyModelData", into = "EntropyModelData")]
pub struct EntropyModel {
    channels: usize,
    dims: Vec<usize>,
    params: Vec<f64>,
    /// Per-layer offsets into one channel's parameter block: (H, b, a).
    offsets: Vec<(usize, usize, Option<usize>)>,
    per_channel: usize,
    /// `exp(H)` and `tanh(a)` at the same offsets; refreshed on every update.
    cache: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EntropyModelData {
    channels: usize,
    dims: Vec<usize>,
    params: Vec<f64>,
}

impl TryFrom<EntropyModelData> for EntropyModel {
    type Error = crate::Error;
    fn try_from(d: EntropyModelData) -> Result<Self> {
        EntropyModel::from_params(d.channels, d.dims, d.params)
    }
}

impl From<EntropyModel> for EntropyModelData {
    fn from(m: EntropyModel) -> Self {
        EntropyModelData {
            channels: m.channels,
            dims: m.dims,
            params: m.params,
        }
    }
}

fn layout(dims: &[usize]) -> (Vec<(usize, usize, Option<usize>)>, usize) {
    let k = dims.len() - 1;
    let mut off = 0;
    let mut out = Vec::with_capacity(k);
    for l in 0..k {
        let (din, dout) = (dims[l], dims[l + 1]);
        let h = off;
        off += din * dout;
        let b = off;
        off += dout;
        let a = if l + 1 < k {
            let a = off;
            off += dout;
            Some(a)
        } else {
            None
        };
        out.push((h, b, a));
    }
    (out, off)
}

fn check_dims(dims: &[usize]) -> Result<()> {
    ensure!(
        dims.len() >= 2 && dims.len() <= MAX_LAYERS + 1,
        Structure,
        "entropy model needs between 1 and {MAX_LAYERS} layers, got dims {dims:?}"
    );
    ensure!(
        dims[0] == 1 && *dims.last().unwrap() == 1,
        Structure,
        "entropy model dims must start and end with 1, got {dims:?}"
    );
    ensure!(
        dims.iter().all(|&d| (1..=MAX_WIDTH).contains(&d)),
        Structure,
        "entropy model widths must be in 1..={MAX_WIDTH}, got {dims:?}"
    );
    Ok(())
}

impl EntropyModel {
    /// Symmetric initialization: zero biases and gates make the logit an odd
    /// linear function of `y`, so `cdf(0) = 0.5` exactly. Matrix entries get
    /// small deterministic offsets so hidden units receive distinct gradients.
    pub fn new(channels: usize) -> Result<Self> {
        Self::with_dims(channels, &DEFAULT_DIMS)
    }

    pub fn with_dims(channels: usize, dims: &[usize]) -> Result<Self> {
        ensure!(
            channels > 0,
            Structure,
            "entropy model needs at least one channel"
        );
        check_dims(dims)?;
        let (offsets, per_channel) = layout(dims);
        let k = dims.len() - 1;
        let scale = INIT_SCALE.powf(1.0 / k as f64);
        let mut params = vec![0.0; channels * per_channel];
        for c in 0..channels {
            let block = &mut params[c * per_channel..(c + 1) * per_channel];
            for (l, &(h, _, _)) in offsets.iter().enumerate() {
                let (din, dout) = (dims[l], dims[l + 1]);
                let base = (1.0 / (scale * dout as f64)).ln();
                for i in 0..dout {
                    for j in 0..din {
                        let jitter = ((i * 3 + j * 5 + l * 7 + c * 11) % 7) as f64 / 6.0 - 0.5;
                        block[h + i * din + j] = base + 0.1 * jitter;
                    }
                }
            }
        }
        Self::from_params(channels, dims.to_vec(), params)
    }

    pub fn from_params(channels: usize, dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        ensure!(
            channels > 0,
            Structure,
            "entropy model needs at least one channel"
        );
        check_dims(&dims)?;
        let (offsets, per_channel) = layout(&dims);
        ensure!(
            params.len() == channels * per_channel,
            Structure,
            "entropy model with {channels} channels and dims {dims:?} needs {} parameters, got {}",
            channels * per_channel,
            params.len()
        );
        ensure!(
            params.iter().all(|p| p.is_finite()),
            Domain,
            "entropy model parameters must be finite"
        );
        let mut m = EntropyModel {
            channels,
            dims,
            params,
            offsets,
            per_channel,
            cache: Vec::new(),
        };
        m.refresh();
        Ok(m)
    }

    fn refresh(&mut self) {
        self.cache = self.params.clone();
        for c in 0..self.channels {
            let block = &mut self.cache[c * self.per_channel..(c + 1) * self.per_channel];
            for (l, &(h, _, a)) in self.offsets.iter().enumerate() {
                let n = self.dims[l] * self.dims[l + 1];
                for v in &mut block[h..h + n] {
                    *v = v.exp();
                }
                if let Some(a) = a {
                    for v in &mut block[a..a + self.dims[l + 1]] {
                        *v = v.tanh();
                    }
                }
            }
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_per_channel(&self) -> usize {
        self.per_channel
    }

    /// Mutates the raw parameters and refreshes derived quantities.
    pub fn update_params<T>(&mut self, f: impl FnOnce(&mut [f64]) -> T) -> T {
        let out = f(&mut self.params);
        self.refresh();
        out
    }

    /// Rounds every parameter to the nearest `f32`, as stored in a bitstream.
    pub fn round_to_f32(&mut self) {
        self.update_params(|p| p.iter_mut().for_each(|v| *v = *v as f32 as f64));
    }

    fn check_channel(&self, channel: usize) -> Result<()> {
        ensure!(
            channel < self.channels,
            Structure,
            "channel {channel} out of range for entropy model with {} channels",
            self.channels
        );
        Ok(())
    }

    fn forward(&self, channel: usize, y: f64, tape: &mut Tape) -> f64 {
        let w = &self.cache[channel * self.per_channel..(channel + 1) * self.per_channel];
        tape.x[0][0] = y;
        let k = self.offsets.len();
        for (l, &(h, b, a)) in self.offsets.iter().enumerate() {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            for i in 0..dout {
                let mut z = w[b + i];
                for j in 0..din {
                    z += w[h + i * din + j] * tape.x[l][j];
                }
                if let Some(a) = a {
                    let t = z.tanh();
                    tape.tz[l][i] = t;
                    tape.x[l + 1][i] = z + w[a + i] * t;
                } else {
                    tape.x[l + 1][i] = z;
                }
            }
        }
        tape.x[k][0]
    }

    /// Accumulates `scale * d_logit * d logit / d params` into `grad` (one
    /// channel's block) and returns `d_logit * d logit / dy`.
    fn backward(
        &self,
        channel: usize,
        tape: &Tape,
        d_logit: f64,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let w = &self.cache[channel * self.per_channel..(channel + 1) * self.per_channel];
        let mut g = [0.0; MAX_WIDTH];
        g[0] = d_logit;
        for (l, &(h, b, a)) in self.offsets.iter().enumerate().rev() {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            let mut gz = [0.0; MAX_WIDTH];
            for i in 0..dout {
                gz[i] = match a {
                    Some(a) => {
                        let (ta, t) = (w[a + i], tape.tz[l][i]);
                        grad[a + i] += scale * g[i] * t * (1.0 - ta * ta);
                        g[i] * (1.0 + ta * (1.0 - t * t))
                    }
                    None => g[i],
                };
                grad[b + i] += scale * gz[i];
            }
            let mut gx = [0.0; MAX_WIDTH];
            for i in 0..dout {
                for j in 0..din {
                    let wij = w[h + i * din + j];
                    grad[h + i * din + j] += scale * gz[i] * tape.x[l][j] * wij;
                    gx[j] += wij * gz[i];
                }
            }
            g = gx;
        }
        g[0]
    }

    /// Logit of the CDF; exposed for tests and diagnostics.
    pub fn logit(&self, channel: usize, y: f64) -> Result<f64> {
        self.check_channel(channel)?;
        ensure!(
            y.is_finite(),
            Domain,
            "entropy model input must be finite, got {y}"
        );
        Ok(self.forward(channel, y, &mut Tape::new()))
    }
}

impl ProbabilityModel for EntropyModel {
    fn channels(&self) -> usize {
        self.channels
    }

    fn cdf(&self, channel: usize, y: f64) -> Result<f64> {
        Ok(sigmoid(self.logit(channel, y)?))
    }

    fn pmf(&self, channel: usize, y: f64) -> Result<f64> {
        let u = self.logit(channel, y + 0.5)?;
        let l = self.logit(channel, y - 0.5)?;
        Ok(sigmoid_diff(u, l).max(P_MIN))
    }

    fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Below the floor the reported rate is `-log2 P_MIN`, but the gradient
    /// still flows as if the floor were not there (scaled by `1 / P_MIN`) so
    /// values in an unmodelled tail keep pulling the distribution toward them.
    fn bits_with_grad(
        &self,
        channel: usize,
        y: f64,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<(f64, f64)> {
        self.check_channel(channel)?;
        ensure!(
            y.is_finite(),
            Domain,
            "entropy model input must be finite, got {y}"
        );
        let (mut tu, mut tl) = (Tape::new(), Tape::new());
        let u = self.forward(channel, y + 0.5, &mut tu);
        let l = self.forward(channel, y - 0.5, &mut tl);
        let p = sigmoid_diff(u, l);
        let pf = p.max(P_MIN);
        let bits = -pf.log2();
        let d_p = -1.0 / (pf * std::f64::consts::LN_2);
        let d_u = d_p * sigmoid(u) * sigmoid(-u);
        let d_l = -d_p * sigmoid(l) * sigmoid(-l);
        let block = &mut grad[channel * self.per_channel..(channel + 1) * self.per_channel];
        let dy_u = self.backward(channel, &tu, d_u, scale, block);
        let dy_l = self.backward(channel, &tl, d_l, scale, block);
        Ok((bits, dy_u + dy_l))
    }
}

/// Uniform distribution on `[lo, hi]` for every channel. Useful as a
/// reference model; it has no trainable parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformModel {
    pub channels: usize,
    pub lo: f64,
    pub hi: f64,
}

impl UniformModel {
    pub fn new(channels: usize, lo: f64, hi: f64) -> Result<Self> {
        ensure!(
            channels > 0,
            Structure,
            "uniform model needs at least one channel"
        );
        ensure!(
            lo < hi,
            Domain,
            "uniform model needs lo < hi, got [{lo}, {hi}]"
        );
        Ok(UniformModel { channels, lo, hi })
    }
}

impl ProbabilityModel for UniformModel {
    fn channels(&self) -> usize {
        self.channels
    }

    fn cdf(&self, channel: usize, y: f64) -> Result<f64> {
        ensure!(
            channel < self.channels,
            Structure,
            "channel {channel} out of range for model with {} channels",
            self.channels
        );
        Ok(((y - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0))
    }

    fn bits_with_grad(
        &self,
        channel: usize,
        y: f64,
        _scale: f64,
        _grad: &mut [f64],
    ) -> Result<(f64, f64)> {
        let p = self.pmf(channel, y)?;
        let inside = |v: f64| (self.lo..=self.hi).contains(&v) as u8 as f64;
        let dp = (inside(y + 0.5) - inside(y - 0.5)) / (self.hi - self.lo);
        let d = if p > P_MIN {
            -dp / (p * std::f64::consts::LN_2)
        } else {
            0.0
        };
        Ok((-p.log2(), d))
    }
}
