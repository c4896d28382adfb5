use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Axis-aligned box in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        for a in 0..3 {
            ensure!(
                min[a].is_finite() && max[a].is_finite() && max[a] > min[a],
                Structure,
                "bounds must have positive finite extent on every axis, got {:?}..{:?}",
                min,
                max
            );
        }
        Ok(Aabb { min, max })
    }

    pub fn cube(half: f64) -> Self {
        Aabb {
            min: [-half; 3],
            max: [half; 3],
        }
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|a| x[a] >= self.min[a] && x[a] <= self.max[a])
    }

    pub fn clamp(&self, x: [f64; 3]) -> [f64; 3] {
        [
            x[0].clamp(self.min[0], self.max[0]),
            x[1].clamp(self.min[1], self.max[1]),
            x[2].clamp(self.min[2], self.max[2]),
        ]
    }

    /// Slab intersection. Returns the entry/exit ray parameters clipped to
    /// `t >= 0`, or `None` on a miss.
    pub fn intersect(&self, origin: [f64; 3], dir: [f64; 3]) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if dir[a].abs() < 1e-300 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[a];
            let mut ta = (self.min[a] - origin[a]) * inv;
            let mut tb = (self.max[a] - origin[a]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        (t1 > t0).then_some((t0, t1))
    }
}

/// Trilinear footprint of a point: 8 lattice node indices and their weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub nodes: [usize; 8],
    pub weights: [f64; 8],
}

/// Dense 3D lattice of feature vectors.
///
/// Nodes sit on the corners of the bounds: node `(i, j, k)` is at
/// `min + (i, j, k) / (res - 1) * extent`. Storage is channel-fastest, then
/// x, then y, then z: `data[((k * ny + j) * nx + i) * channels + c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    res: [usize; 3],
    channels: usize,
    data: Vec<f64>,
    bounds: Aabb,
}

impl FeatureGrid {
    pub fn zeros(res: [usize; 3], channels: usize, bounds: Aabb) -> Result<Self> {
        Self::validate_shape(res, channels)?;
        Ok(FeatureGrid {
            res,
            channels,
            data: vec![0.0; res[0] * res[1] * res[2] * channels],
            bounds,
        })
    }

    pub fn from_data(
        res: [usize; 3],
        channels: usize,
        data: Vec<f64>,
        bounds: Aabb,
    ) -> Result<Self> {
        Self::validate_shape(res, channels)?;
        ensure!(
            data.len() == res[0] * res[1] * res[2] * channels,
            Structure,
            "grid data has {} entries, expected {}",
            data.len(),
            res[0] * res[1] * res[2] * channels
        );
        ensure!(
            data.iter().all(|v| v.is_finite()),
            Domain,
            "grid data must be finite"
        );
        // Revalidate bounds; deserialized values bypass `Aabb::new`.
        let bounds = Aabb::new(bounds.min, bounds.max)?;
        Ok(FeatureGrid {
            res,
            channels,
            data,
            bounds,
        })
    }

    /// Entries drawn i.i.d. from `uniform(-scale, scale)`.
    pub fn uniform<R: Rng>(
        res: [usize; 3],
        channels: usize,
        bounds: Aabb,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut g = Self::zeros(res, channels, bounds)?;
        for v in &mut g.data {
            *v = rng.gen_range(-scale..scale);
        }
        Ok(g)
    }

    fn validate_shape(res: [usize; 3], channels: usize) -> Result<()> {
        ensure!(
            res.iter().all(|&n| n >= 1) && channels >= 1,
            Structure,
            "grid resolution {:?} and channels {} must be positive",
            res,
            channels
        );
        Ok(())
    }

    pub fn res(&self) -> [usize; 3] {
        self.res
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn node_count(&self) -> usize {
        self.res[0] * self.res[1] * self.res[2]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &FeatureGrid) -> bool {
        self.res == other.res && self.channels == other.channels
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.res[1] + j) * self.res[0] + i
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> &[f64] {
        let n = self.node_index(i, j, k);
        &self.data[n * self.channels..(n + 1) * self.channels]
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let e = self.bounds.extent();
        let f = |a: usize, idx: usize| {
            if self.res[a] == 1 {
                self.bounds.min[a]
            } else {
                self.bounds.min[a] + e[a] * idx as f64 / (self.res[a] - 1) as f64
            }
        };
        [f(0, i), f(1, j), f(2, k)]
    }

    /// Trilinear stencil of `x`; fails for points outside the bounds.
    pub fn stencil(&self, x: [f64; 3]) -> Result<Stencil> {
        stencil_for(&self.res, &self.bounds, x)
    }

    /// Trilinear interpolation of the feature vector at `x`, written into `out`.
    pub fn interp_into(&self, x: [f64; 3], out: &mut [f64]) -> Result<()> {
        let s = self.stencil(x)?;
        self.gather(&s, out);
        Ok(())
    }

    pub fn interp(&self, x: [f64; 3]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.channels];
        self.interp_into(x, &mut out)?;
        Ok(out)
    }

    /// Weighted sum of stencil nodes into `out` (overwrites).
    pub fn gather(&self, s: &Stencil, out: &mut [f64]) {
        let c = self.channels;
        out[..c].fill(0.0);
        for (&n, &w) in s.nodes.iter().zip(&s.weights) {
            if w == 0.0 {
                continue;
            }
            let src = &self.data[n * c..(n + 1) * c];
            for (o, v) in out[..c].iter_mut().zip(src) {
                *o += w * v;
            }
        }
    }

    /// Adjoint of [`gather`](Self::gather): adds `w * grad` into each stencil
    /// node of a gradient buffer laid out like this grid.
    pub fn scatter(&self, s: &Stencil, grad: &[f64], buf: &mut [f64]) {
        scatter_into(self.channels, s, grad, buf);
    }
}

pub(crate) fn scatter_into(channels: usize, s: &Stencil, grad: &[f64], buf: &mut [f64]) {
    for (&n, &w) in s.nodes.iter().zip(&s.weights) {
        if w == 0.0 {
            continue;
        }
        let dst = &mut buf[n * channels..(n + 1) * channels];
        for (d, g) in dst.iter_mut().zip(&grad[..channels]) {
            *d += w * g;
        }
    }
}

pub(crate) fn stencil_for(res: &[usize; 3], bounds: &Aabb, x: [f64; 3]) -> Result<Stencil> {
    if !bounds.contains(x) {
        return Err(Error::Domain(format!(
            "point {:?} outside grid bounds {:?}..{:?}",
            x, bounds.min, bounds.max
        )));
    }
    let e = bounds.extent();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut t = [0.0f64; 3];
    for a in 0..3 {
        let n = res[a];
        if n == 1 {
            continue;
        }
        let u = (x[a] - bounds.min[a]) / e[a] * (n - 1) as f64;
        let i0 = (u.floor() as usize).min(n - 2);
        lo[a] = i0;
        hi[a] = i0 + 1;
        t[a] = u - i0 as f64;
    }
    let idx = |i: usize, j: usize, k: usize| (k * res[1] + j) * res[0] + i;
    let mut nodes = [0usize; 8];
    let mut weights = [0.0f64; 8];
    for corner in 0..8 {
        let (bx, by, bz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
        let i = if bx == 1 { hi[0] } else { lo[0] };
        let j = if by == 1 { hi[1] } else { lo[1] };
        let k = if bz == 1 { hi[2] } else { lo[2] };
        let wx = if bx == 1 { t[0] } else { 1.0 - t[0] };
        let wy = if by == 1 { t[1] } else { 1.0 - t[1] };
        let wz = if bz == 1 { t[2] } else { 1.0 - t[2] };
        nodes[corner] = idx(i, j, k);
        weights[corner] = wx * wy * wz;
    }
    Ok(Stencil { nodes, weights })
}
