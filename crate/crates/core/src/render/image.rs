use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{Camera, Ray};
use super::volume::{render_ray, sample_ray, RaySamples};
use crate::error::Result;
use crate::field::{Aabb, RadianceField};
use crate::raster::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Samples per ray.
    pub samples: usize,
    /// Color seen by rays that miss the field or are not fully absorbed.
    pub background: [f64; 3],
    /// Jittered stratified sampling (training) instead of bin centers.
    pub jitter: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            samples: 128,
            background: [0.0; 3],
            jitter: false,
        }
    }
}

/// Per-ray jitter stream: independent of how rays are scheduled.
pub(crate) fn ray_rng(seed: u64, ray_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ray_index as u64);
    rng
}

/// Samples a ray clipped to `bounds`, with positions pinned inside the box.
pub(crate) fn samples_in(
    ray: &Ray,
    bounds: &Aabb,
    cfg: &RenderConfig,
    seed: u64,
    ray_index: usize,
) -> Result<Option<RaySamples>> {
    let Some(clipped) = ray.clip(bounds) else {
        return Ok(None);
    };
    let mut rng = ray_rng(seed, ray_index);
    let mut s = sample_ray(&clipped, cfg.samples, cfg.jitter, &mut rng)?;
    for p in &mut s.positions {
        *p = bounds.clamp(*p);
    }
    Ok(Some(s))
}

/// Renders one ray through `field`, background included.
pub fn render_field_ray<F: RadianceField + ?Sized>(
    field: &F,
    ray: &Ray,
    cfg: &RenderConfig,
    seed: u64,
    ray_index: usize,
) -> Result<[f64; 3]> {
    let Some(s) = samples_in(ray, field.bounds(), cfg, seed, ray_index)? else {
        return Ok(cfg.background);
    };
    let (mut rgb, mut sigma) = (Vec::new(), Vec::new());
    field.eval_samples(&s.positions, ray.dir, &mut rgb, &mut sigma)?;
    Ok(render_ray(&s.deltas, &rgb, &sigma)?.with_background(cfg.background))
}

/// Renders every pixel of `camera`. Rows are rendered in parallel; the
/// result does not depend on the thread count.
pub fn render_image<F: RadianceField + ?Sized>(
    field: &F,
    camera: &Camera,
    cfg: &RenderConfig,
) -> Result<Image> {
    let (w, h) = (camera.width(), camera.height());
    let rows: Vec<Vec<[f64; 3]>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let ray = camera.ray(x, y)?;
                    render_field_ray(field, &ray, cfg, 0, (y * w + x) as usize)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Image {
        width: w,
        height: h,
        pixels: rows.into_iter().flatten().collect(),
    })
}
