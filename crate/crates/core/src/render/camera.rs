use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::field::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// Pinhole camera. The pose maps camera to world coordinates; the camera
/// looks down its +z axis with +x right and +y down in the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    intrinsics: Intrinsics,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl Camera {
    pub fn new(
        intrinsics: Intrinsics,
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
    ) -> Result<Self> {
        ensure!(
            intrinsics.fx > 0.0 && intrinsics.fy > 0.0,
            Domain,
            "focal lengths must be positive"
        );
        ensure!(
            intrinsics.width > 0 && intrinsics.height > 0,
            Domain,
            "image size must be positive"
        );
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                ensure!(
                    (dot - want).abs() <= 1e-6,
                    Domain,
                    "camera rotation is not orthonormal"
                );
            }
        }
        Ok(Camera {
            intrinsics,
            rotation,
            translation,
        })
    }

    /// Camera at `eye` looking at `target`; `up` is the approximate world up.
    pub fn look_at(
        intrinsics: Intrinsics,
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
    ) -> Result<Self> {
        let fwd = normalize(sub(target, eye))?;
        let mut right = cross(fwd, up);
        if norm(right) < 1e-9 {
            right = cross(fwd, [1.0, 0.0, 0.0]);
        }
        let right = normalize(right)?;
        // Image y points down.
        let down = cross(fwd, right);
        let rotation = [
            [right[0], down[0], fwd[0]],
            [right[1], down[1], fwd[1]],
            [right[2], down[2], fwd[2]],
        ];
        Self::new(intrinsics, rotation, eye)
    }

    /// Builds a camera from a row-major 4x4 world-from-camera matrix.
    pub fn from_matrix(intrinsics: Intrinsics, m: &[f64; 16]) -> Result<Self> {
        let rotation = [[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]];
        Self::new(intrinsics, rotation, [m[3], m[7], m[11]])
    }

    pub fn to_matrix(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0][0], r[0][1], r[0][2], t[0], r[1][0], r[1][1], r[1][2], t[1], r[2][0], r[2][1],
            r[2][2], t[2], 0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    pub fn origin(&self) -> [f64; 3] {
        self.translation
    }

    pub fn rotation(&self) -> &[[f64; 3]; 3] {
        &self.rotation
    }

    /// Ray through the center of pixel `(u, v)`.
    pub fn ray(&self, u: u32, v: u32) -> Result<Ray> {
        let k = &self.intrinsics;
        if u >= k.width || v >= k.height {
            return Err(Error::Domain(format!(
                "pixel ({u}, {v}) outside {}x{} image",
                k.width, k.height
            )));
        }
        let dc = [
            (u as f64 + 0.5 - k.cx) / k.fx,
            (v as f64 + 0.5 - k.cy) / k.fy,
            1.0,
        ];
        let r = &self.rotation;
        let dw = [
            r[0][0] * dc[0] + r[0][1] * dc[1] + r[0][2] * dc[2],
            r[1][0] * dc[0] + r[1][1] * dc[1] + r[1][2] * dc[2],
            r[2][0] * dc[0] + r[2][1] * dc[1] + r[2][2] * dc[2],
        ];
        Ray::new(self.translation, normalize(dw)?, 0.0, f64::INFINITY)
    }

    /// Projects a world point to continuous pixel coordinates; `None` behind
    /// the camera.
    pub fn project(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        let d = sub(p, self.translation);
        let r = &self.rotation;
        let pc = [
            r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2],
            r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2],
            r[0][2] * d[0] + r[1][2] * d[1] + r[2][2] * d[2],
        ];
        if pc[2] <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some([k.fx * pc[0] / pc[2] + k.cx, k.fy * pc[1] / pc[2] + k.cy])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
    pub near: f64,
    pub far: f64,
}

impl Ray {
    pub fn new(origin: [f64; 3], dir: [f64; 3], near: f64, far: f64) -> Result<Self> {
        ensure!(
            (norm(dir) - 1.0).abs() <= 1e-6,
            Domain,
            "ray direction must be unit length"
        );
        ensure!(
            near >= 0.0 && far > near,
            Domain,
            "ray interval must satisfy 0 <= near < far (got {near}, {far})"
        );
        Ok(Ray {
            origin,
            dir,
            near,
            far,
        })
    }

    pub fn at(&self, t: f64) -> [f64; 3] {
        [
            self.origin[0] + t * self.dir[0],
            self.origin[1] + t * self.dir[1],
            self.origin[2] + t * self.dir[2],
        ]
    }

    /// Restricts the ray to its overlap with `bounds`.
    pub fn clip(&self, bounds: &Aabb) -> Option<Ray> {
        let (t0, t1) = bounds.intersect(self.origin, self.dir)?;
        let near = t0.max(self.near);
        let far = t1.min(self.far);
        (far > near).then_some(Ray { near, far, ..*self })
    }
}

/// Back-projects each pixel center through the pinhole.
pub fn generate_rays(camera: &Camera, pixels: &[(u32, u32)]) -> Result<Vec<Ray>> {
    pixels.iter().map(|&(u, v)| camera.ray(u, v)).collect()
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub(crate) fn normalize(a: [f64; 3]) -> Result<[f64; 3]> {
    let n = norm(a);
    ensure!(n > 0.0 && n.is_finite(), Domain, "cannot normalize {:?}", a);
    Ok([a[0] / n, a[1] / n, a[2] / n])
}
