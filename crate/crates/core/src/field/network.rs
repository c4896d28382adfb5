//! The tiny shading MLP and the view-direction encoding it consumes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Real spherical-harmonics constants, bands 0..=2.
const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];

pub const MAX_SH_DEGREE: usize = 2;

pub fn direction_encoding_width(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Real spherical harmonics of `d` up to `degree` (at most 2).
///
/// For `d = (0, 0, 1)` and degree 2 this is
/// `[0.2821, 0, 0.4886, 0, 0, 0, 0.6308, 0, 0]`.
pub fn direction_encode_into(d: [f64; 3], degree: usize, out: &mut [f64]) -> Result<()> {
    ensure!(
        degree <= MAX_SH_DEGREE,
        Config,
        "direction encoding degree {} unsupported (max {})",
        degree,
        MAX_SH_DEGREE
    );
    let n2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if !((n2.sqrt() - 1.0).abs() <= 1e-6) {
        return Err(Error::Domain(format!(
            "direction {:?} is not unit length (|d| = {})",
            d,
            n2.sqrt()
        )));
    }
    let [x, y, z] = d;
    out[0] = SH_C0;
    if degree >= 1 {
        out[1] = -SH_C1 * y;
        out[2] = SH_C1 * z;
        out[3] = -SH_C1 * x;
    }
    if degree >= 2 {
        out[4] = SH_C2[0] * x * y;
        out[5] = SH_C2[1] * y * z;
        out[6] = SH_C2[2] * (3.0 * z * z - 1.0);
        out[7] = SH_C2[3] * x * z;
        out[8] = SH_C2[4] * (x * x - y * y);
    }
    Ok(())
}

pub fn direction_encode(d: [f64; 3], degree: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; direction_encoding_width(degree)];
    direction_encode_into(d, degree, &mut v)?;
    Ok(v)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Fully connected ReLU network with 4 raw outputs: rgb logits and a density
/// pre-activation. Parameters live in one flat buffer, layer by layer, each
/// layer as a row-major `out x in` weight matrix followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadingNetwork {
    sizes: Vec<usize>,
    sh_degree: usize,
    params: Vec<f64>,
}

/// Per-evaluation activations, reused across calls.
#[derive(Debug, Clone, Default)]
pub struct NetScratch {
    acts: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
}

impl ShadingNetwork {
    pub const OUTPUTS: usize = 4;

    /// `feature_width` is the Hadamard-product width (basis total channels).
    pub fn new<R: Rng>(
        feature_width: usize,
        hidden: &[usize],
        sh_degree: usize,
        density_bias: f64,
        rng: &mut R,
    ) -> Result<Self> {
        ensure!(
            sh_degree <= MAX_SH_DEGREE,
            Config,
            "direction encoding degree {} unsupported",
            sh_degree
        );
        ensure!(
            hidden.iter().all(|&h| h > 0),
            Config,
            "hidden layer widths must be positive"
        );
        let mut sizes = vec![feature_width + direction_encoding_width(sh_degree)];
        sizes.extend_from_slice(hidden);
        sizes.push(Self::OUTPUTS);
        let mut params = Vec::new();
        let n_layers = sizes.len() - 1;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = if l + 1 == n_layers {
                (1.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-bound..bound));
            }
            for o in 0..fan_out {
                let b = if l + 1 == n_layers && o == 3 {
                    density_bias
                } else {
                    0.0
                };
                params.push(b);
            }
        }
        Ok(ShadingNetwork {
            sizes,
            sh_degree,
            params,
        })
    }

    pub fn from_params(sizes: Vec<usize>, sh_degree: usize, params: Vec<f64>) -> Result<Self> {
        ensure!(
            sizes.len() >= 2,
            Structure,
            "network needs at least an input and an output layer"
        );
        ensure!(
            *sizes.last().unwrap() == Self::OUTPUTS,
            Structure,
            "network output width must be {}",
            Self::OUTPUTS
        );
        ensure!(
            sh_degree <= MAX_SH_DEGREE && sizes[0] > direction_encoding_width(sh_degree),
            Structure,
            "network input width {} inconsistent with direction degree {}",
            sizes[0],
            sh_degree
        );
        let expected = Self::param_count_for(&sizes);
        ensure!(
            params.len() == expected,
            Structure,
            "network has {} parameters, expected {}",
            params.len(),
            expected
        );
        ensure!(
            params.iter().all(|p| p.is_finite()),
            Domain,
            "network weights must be finite"
        );
        Ok(ShadingNetwork {
            sizes,
            sh_degree,
            params,
        })
    }

    fn param_count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn sh_degree(&self) -> usize {
        self.sh_degree
    }

    pub fn feature_width(&self) -> usize {
        self.sizes[0] - direction_encoding_width(self.sh_degree)
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Rounds every weight to the nearest `f32`, the precision it is stored at.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }

    pub fn scratch(&self) -> NetScratch {
        NetScratch {
            acts: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            grads: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Raw outputs for `input`; activations are kept in `scratch` for
    /// [`backward`](Self::backward).
    pub fn forward(&self, input: &[f64], scratch: &mut NetScratch) -> [f64; 4] {
        debug_assert_eq!(input.len(), self.sizes[0]);
        scratch.acts[0].copy_from_slice(input);
        let n_layers = self.sizes.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + ni * no];
            let b = &self.params[off + ni * no..off + ni * no + no];
            off += ni * no + no;
            let (before, after) = scratch.acts.split_at_mut(l + 1);
            let x = &before[l];
            let y = &mut after[0];
            for o in 0..no {
                let row = &w[o * ni..(o + 1) * ni];
                let mut s = b[o];
                for (wi, xi) in row.iter().zip(x.iter()) {
                    s += wi * xi;
                }
                y[o] = if l + 1 < n_layers { s.max(0.0) } else { s };
            }
        }
        let out = &scratch.acts[n_layers];
        [out[0], out[1], out[2], out[3]]
    }

    /// Backpropagates `d_out` through the activations of the last forward
    /// call. Parameter gradients are added into `grad_params`; the input
    /// gradient is written to `d_input`.
    pub fn backward(
        &self,
        scratch: &mut NetScratch,
        d_out: &[f64; 4],
        grad_params: &mut [f64],
        d_input: &mut [f64],
    ) {
        let n_layers = self.sizes.len() - 1;
        scratch.grads[n_layers].copy_from_slice(d_out);
        let mut off = self.params.len();
        for l in (0..n_layers).rev() {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            off -= ni * no + no;
            let w = &self.params[off..off + ni * no];
            let (gw, gb) = grad_params[off..off + ni * no + no].split_at_mut(ni * no);
            let (lower, upper) = scratch.grads.split_at_mut(l + 1);
            let g_out = &mut upper[0];
            if l + 1 < n_layers {
                // ReLU: gradient flows where the activation was positive.
                for (g, a) in g_out.iter_mut().zip(&scratch.acts[l + 1]) {
                    if *a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let x = &scratch.acts[l];
            let g_in = &mut lower[l];
            g_in.fill(0.0);
            for o in 0..no {
                let g = g_out[o];
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                let row = &w[o * ni..(o + 1) * ni];
                let grow = &mut gw[o * ni..(o + 1) * ni];
                for i in 0..ni {
                    grow[i] += g * x[i];
                    g_in[i] += g * row[i];
                }
            }
        }
        d_input.copy_from_slice(&scratch.grads[0]);
    }
}
