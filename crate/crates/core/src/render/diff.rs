//! Reverse-mode differentiation of rendered pixels w.r.t. grid entries and
//! network weights.
//!
//! The tape keeps, per sample, only the interpolated features, the raw
//! density pre-activation, the shaded color and the compositing state;
//! network activations are recomputed during the backward pass.

use rayon::prelude::*;

use super::camera::Ray;
use super::image::{samples_in, RenderConfig};
use super::volume::{render_ray, render_ray_backward, RayRender};
use crate::error::{Error, Result};
use crate::field::{activate, direction_encode_into, sigmoid, FieldGrads, GridField};

/// Forward state of one ray.
#[derive(Debug, Clone)]
pub struct RayTape {
    enc: Vec<f64>,
    positions: Vec<[f64; 3]>,
    deltas: Vec<f64>,
    /// Interleaved per-sample basis features then coefficients (`2 * width`).
    features: Vec<f64>,
    raw_density: Vec<f64>,
    rgb: Vec<[f64; 3]>,
    sigma: Vec<f64>,
    fwd: Option<RayRender>,
    color: [f64; 3],
}

impl RayTape {
    pub fn color(&self) -> [f64; 3] {
        self.color
    }
}

pub(crate) fn trace_ray(
    field: &GridField<'_>,
    ray: &Ray,
    cfg: &RenderConfig,
    seed: u64,
    ray_index: usize,
) -> Result<RayTape> {
    let w = field.width();
    let mut enc = vec![0.0; field.net.input_width() - w];
    direction_encode_into(ray.dir, field.net.sh_degree(), &mut enc)?;
    let mut tape = RayTape {
        enc,
        positions: Vec::new(),
        deltas: Vec::new(),
        features: Vec::new(),
        raw_density: Vec::new(),
        rgb: Vec::new(),
        sigma: Vec::new(),
        fwd: None,
        color: cfg.background,
    };
    let Some(s) = samples_in(ray, field.basis.bounds(), cfg, seed, ray_index)? else {
        return Ok(tape);
    };
    let n = s.len();
    let mut ws = field.workspace();
    tape.features = vec![0.0; n * 2 * w];
    for (i, &x) in s.positions.iter().enumerate() {
        let (b, c) = tape.features[i * 2 * w..(i + 1) * 2 * w].split_at_mut(w);
        field.features(x, b, c)?;
        let raw = field.shade(b, c, &tape.enc, &mut ws);
        let (col, sig) = activate(&raw);
        tape.rgb.push(col);
        tape.sigma.push(sig);
        tape.raw_density.push(raw[3]);
    }
    let fwd = render_ray(&s.deltas, &tape.rgb, &tape.sigma)?;
    tape.color = fwd.with_background(cfg.background);
    tape.fwd = Some(fwd);
    tape.positions = s.positions;
    tape.deltas = s.deltas;
    Ok(tape)
}

pub(crate) fn backprop_ray(
    field: &GridField<'_>,
    tape: &RayTape,
    background: [f64; 3],
    d_color: [f64; 3],
    grads: &mut FieldGrads,
) -> Result<()> {
    let Some(fwd) = &tape.fwd else {
        return Ok(());
    };
    if d_color == [0.0; 3] {
        return Ok(());
    }
    let (mut d_rgb, mut d_sigma) = (Vec::new(), Vec::new());
    render_ray_backward(
        &tape.deltas,
        &tape.rgb,
        &tape.sigma,
        fwd,
        background,
        d_color,
        &mut d_rgb,
        &mut d_sigma,
    );
    let w = field.width();
    let mut ws = field.workspace();
    for i in 0..tape.deltas.len() {
        let c = &tape.rgb[i];
        let d_raw = [
            d_rgb[i][0] * c[0] * (1.0 - c[0]),
            d_rgb[i][1] * c[1] * (1.0 - c[1]),
            d_rgb[i][2] * c[2] * (1.0 - c[2]),
            d_sigma[i] * sigmoid(tape.raw_density[i]),
        ];
        if d_raw == [0.0; 4] {
            continue;
        }
        let f = &tape.features[i * 2 * w..(i + 1) * 2 * w];
        let (b, cf) = f.split_at(w);
        field.backward_sample(tape.positions[i], b, cf, &tape.enc, &d_raw, &mut ws, grads)?;
    }
    Ok(())
}

/// Splits `0..n` into `shards` contiguous ranges.
pub(crate) fn shard_ranges(n: usize, shards: usize) -> Vec<std::ops::Range<usize>> {
    let shards = shards.max(1).min(n.max(1));
    let base = n / shards;
    let extra = n % shards;
    let mut out = Vec::with_capacity(shards);
    let mut start = 0;
    for s in 0..shards {
        let len = base + usize::from(s < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Sums per-shard gradients in shard order so the result is independent of
/// thread scheduling.
pub(crate) fn reduce_ordered(mut parts: Vec<FieldGrads>) -> FieldGrads {
    let mut acc = parts.remove(0);
    for p in &parts {
        acc.add_assign(p);
    }
    acc
}

/// Batch renderer that records a tape on `forward` and replays it on
/// `backward`.
pub struct DiffRenderer<'a> {
    field: GridField<'a>,
    cfg: RenderConfig,
    shards: usize,
    tapes: Option<Vec<RayTape>>,
}

impl<'a> DiffRenderer<'a> {
    pub fn new(field: GridField<'a>, cfg: RenderConfig) -> Self {
        DiffRenderer {
            field,
            cfg,
            shards: 4,
            tapes: None,
        }
    }

    /// Number of gradient accumulation shards; fixed independently of the
    /// thread count so reductions are reproducible.
    pub fn with_shards(mut self, shards: usize) -> Self {
        self.shards = shards.max(1);
        self
    }

    pub fn forward(&mut self, rays: &[Ray], seed: u64) -> Result<Vec<[f64; 3]>> {
        let field = self.field;
        let cfg = self.cfg;
        let tapes = rays
            .par_iter()
            .enumerate()
            .map(|(i, r)| trace_ray(&field, r, &cfg, seed, i))
            .collect::<Result<Vec<_>>>()?;
        let colors = tapes.iter().map(|t| t.color).collect();
        self.tapes = Some(tapes);
        Ok(colors)
    }

    /// Gradients of `sum_r <d_colors[r], C_r>` w.r.t. all field parameters.
    pub fn backward(&self, d_colors: &[[f64; 3]]) -> Result<FieldGrads> {
        let tapes = self
            .tapes
            .as_ref()
            .ok_or_else(|| Error::Usage("backward called before forward".into()))?;
        if tapes.len() != d_colors.len() {
            return Err(Error::Structure(format!(
                "{} pixel gradients for {} rays",
                d_colors.len(),
                tapes.len()
            )));
        }
        let field = self.field;
        let bg = self.cfg.background;
        let zero = FieldGrads::zeros(field.basis, field.coeff, field.net);
        let parts = shard_ranges(tapes.len(), self.shards)
            .into_par_iter()
            .map(|range| {
                let mut g = zero.zeros_like();
                for i in range {
                    backprop_ray(&field, &tapes[i], bg, d_colors[i], &mut g)?;
                }
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(reduce_ordered(parts))
    }
}

/// Mean squared error over rays and channels, and its gradient, without
/// keeping tapes beyond one ray.
pub fn mse_and_grad(
    field: &GridField<'_>,
    rays: &[Ray],
    targets: &[[f64; 3]],
    cfg: &RenderConfig,
    seed: u64,
    shards: usize,
) -> Result<(f64, FieldGrads)> {
    if rays.len() != targets.len() || rays.is_empty() {
        return Err(Error::Structure(format!(
            "{} rays for {} targets",
            rays.len(),
            targets.len()
        )));
    }
    let norm = 1.0 / (3 * rays.len()) as f64;
    let zero = FieldGrads::zeros(field.basis, field.coeff, field.net);
    let parts = shard_ranges(rays.len(), shards)
        .into_par_iter()
        .map(|range| {
            let mut g = zero.zeros_like();
            let mut sse = 0.0;
            for i in range {
                let tape = trace_ray(field, &rays[i], cfg, seed, i)?;
                let c = tape.color;
                let t = targets[i];
                let e = [c[0] - t[0], c[1] - t[1], c[2] - t[2]];
                sse += e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
                let d = [2.0 * e[0] * norm, 2.0 * e[1] * norm, 2.0 * e[2] * norm];
                backprop_ray(field, &tape, cfg.background, d, &mut g)?;
            }
            Ok((sse, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sse = 0.0;
    let mut grads = Vec::with_capacity(parts.len());
    for (s, g) in parts {
        sse += s;
        grads.push(g);
    }
    Ok((sse * norm, reduce_ordered(grads)))
}
