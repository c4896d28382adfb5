//! Image quality and rate-distortion summary metrics.
//!
//! PSNR and SSIM operate on 8-bit images. SSIM uses the luma
//! `0.299 R + 0.587 G + 0.114 B` (unrounded, 0..255 scale), an 11x11
//! Gaussian window with sigma 1.5, population statistics and the mean over
//! all fully contained windows.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::raster::Rgb8Image;

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 99.0;

fn same_dims(a: &Rgb8Image, b: &Rgb8Image) -> Result<()> {
    ensure!(
        a.width == b.width && a.height == b.height,
        Structure,
        "image sizes differ: {}x{} vs {}x{}",
        a.width,
        a.height,
        b.width,
        b.height
    );
    Ok(())
}

pub fn psnr(a: &Rgb8Image, b: &Rgb8Image) -> Result<f64> {
    same_dims(a, b)?;
    let sse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    if sse == 0.0 {
        return Ok(PSNR_CAP);
    }
    let mse = sse / a.data.len() as f64;
    Ok((10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CAP))
}

const WIN: usize = 11;
const SIGMA: f64 = 1.5;

fn luma(img: &Rgb8Image) -> Vec<f64> {
    img.data
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

fn gaussian() -> [f64; WIN] {
    let r = (WIN / 2) as f64;
    let mut w = [0.0; WIN];
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-x * x / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable weighted sums over every fully contained window.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; WIN]) -> Vec<f64> {
    let (ow, oh) = (w - WIN + 1, h - WIN + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..WIN).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..WIN).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

pub fn ssim(a: &Rgb8Image, b: &Rgb8Image) -> Result<f64> {
    same_dims(a, b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    ensure!(
        w >= WIN && h >= WIN,
        Domain,
        "SSIM needs images of at least {WIN}x{WIN}, got {w}x{h}"
    );
    let (x, y) = (luma(a), luma(b));
    let k = gaussian();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mx = filter_valid(&x, w, h, &k);
    let my = filter_valid(&y, w, h, &k);
    let mxx = filter_valid(&xx, w, h, &k);
    let myy = filter_valid(&yy, w, h, &k);
    let mxy = filter_valid(&xy, w, h, &k);
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// One operating point of a codec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub label: String,
    /// Total compressed size in bytes.
    pub bytes: f64,
    pub psnr: f64,
    pub ssim: f64,
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson
/// derivatives with the usual three-point end conditions).
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(mut pts: Vec<(f64, f64)>) -> Result<Self> {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        ensure!(
            pts.windows(2).all(|w| w[1].0 > w[0].0),
            Domain,
            "interpolation abscissae must be distinct"
        );
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let n = x.len();
        let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
        let m: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![m[0], m[0]];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            let edge = |h0: f64, h1: f64, m0: f64, m1: f64| {
                let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
                if d.signum() != m0.signum() || m0 == 0.0 {
                    0.0
                } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
                    3.0 * m0
                } else {
                    d
                }
            };
            d[0] = edge(h[0], h[1], m[0], m[1]);
            d[n - 1] = edge(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Pchip { x, y, d })
    }

    /// Integral of segment `k` from its left end to parameter `t` in [0, 1].
    fn segment_integral(&self, k: usize, t: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
        let i00 = t4 / 2.0 - t3 + t;
        let i10 = t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0;
        let i01 = -t4 / 2.0 + t3;
        let i11 = t4 / 4.0 - t3 / 3.0;
        h * (self.y[k] * i00 + h * self.d[k] * i10 + self.y[k + 1] * i01 + h * self.d[k + 1] * i11)
    }

    /// Integral from `x[0]` to `v`, for `v` within the data range.
    fn antiderivative(&self, v: f64) -> f64 {
        let n = self.x.len();
        let k = (self.x.partition_point(|&xi| xi <= v).max(1) - 1).min(n - 2);
        let full: f64 = (0..k).map(|j| self.segment_integral(j, 1.0)).sum();
        let t = (v - self.x[k]) / (self.x[k + 1] - self.x[k]);
        full + self.segment_integral(k, t)
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }
}

fn average_gap(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    let pa = Pchip::new(a.to_vec())?;
    let pb = Pchip::new(b.to_vec())?;
    let lo = pa.x[0].max(pb.x[0]);
    let hi = pa.x[pa.x.len() - 1].min(pb.x[pb.x.len() - 1]);
    ensure!(hi > lo, Domain, "curves do not overlap");
    Ok((pb.integrate(lo, hi) - pa.integrate(lo, hi)) / (hi - lo))
}

/// Bjøntegaard deltas of `b` relative to `a`: `(BD-PSNR in dB, BD-rate in %)`.
/// Curves are interpolated piecewise-cubically in the log10-rate domain.
pub fn bd_metrics(a: &[RdPoint], b: &[RdPoint]) -> Result<(f64, f64)> {
    ensure!(
        a.len() >= 4 && b.len() >= 4,
        Structure,
        "BD metrics need at least 4 points per curve ({} and {} given)",
        a.len(),
        b.len()
    );
    ensure!(
        a.iter()
            .chain(b)
            .all(|p| p.bytes > 0.0 && p.psnr.is_finite()),
        Domain,
        "RD points need positive sizes and finite PSNR"
    );
    let rp = |c: &[RdPoint]| {
        c.iter()
            .map(|p| (p.bytes.log10(), p.psnr))
            .collect::<Vec<_>>()
    };
    let pr = |c: &[RdPoint]| {
        c.iter()
            .map(|p| (p.psnr, p.bytes.log10()))
            .collect::<Vec<_>>()
    };
    let bd_psnr = average_gap(&rp(a), &rp(b))?;
    let bd_rate = (10f64.powf(average_gap(&pr(a), &pr(b))?) - 1.0) * 100.0;
    Ok((bd_psnr, bd_rate))
}
