use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetCamera, Split};
use crate::error::{ensure, Result};
use crate::field::{Aabb, RadianceField};
use crate::render::{render_image, Camera, Intrinsics, RenderConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
}

impl Shape {
    fn sdf(&self, p: [f64; 3]) -> f64 {
        match *self {
            Shape::Sphere { radius } => (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - radius,
            Shape::Box { half_extents: h } => {
                let q = [p[0].abs() - h[0], p[1].abs() - h[1], p[2].abs() - h[2]];
                let outside = q.map(|v| v.max(0.0));
                let o =
                    (outside[0] * outside[0] + outside[1] * outside[1] + outside[2] * outside[2])
                        .sqrt();
                o + q[0].max(q[1]).max(q[2]).min(0.0)
            }
        }
    }

    fn half_size(&self) -> [f64; 3] {
        match *self {
            Shape::Sphere { radius } => [radius; 3],
            Shape::Box { half_extents } => half_extents,
        }
    }
}

/// A shape translating at constant velocity, with diffuse color and a
/// density ramp of width `edge` across its surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    /// Center at frame 0.
    pub center: [f64; 3],
    /// Displacement per frame.
    #[serde(default)]
    pub velocity: [f64; 3],
    pub color: [f64; 3],
    pub density: f64,
}

impl Primitive {
    pub fn center_at(&self, frame: usize) -> [f64; 3] {
        let f = frame as f64;
        [
            self.center[0] + f * self.velocity[0],
            self.center[1] + f * self.velocity[1],
            self.center[2] + f * self.velocity[2],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    pub frames: usize,
    pub bounds: Aabb,
    /// Width of the linear density ramp across each surface.
    pub edge: f64,
    #[serde(default)]
    pub background: [f64; 3],
}

impl SceneSpec {
    /// Three primitives: a red sphere drifting along x, a static green box,
    /// and a small blue sphere rising along z.
    pub fn toy(frames: usize) -> Self {
        SceneSpec {
            primitives: vec![
                Primitive {
                    shape: Shape::Sphere { radius: 0.35 },
                    center: [-0.25, 0.1, 0.0],
                    velocity: [0.04, 0.0, 0.0],
                    color: [0.9, 0.2, 0.15],
                    density: 12.0,
                },
                Primitive {
                    shape: Shape::Box {
                        half_extents: [0.22, 0.22, 0.22],
                    },
                    center: [0.3, -0.3, -0.2],
                    velocity: [0.0; 3],
                    color: [0.2, 0.8, 0.3],
                    density: 12.0,
                },
                Primitive {
                    shape: Shape::Sphere { radius: 0.2 },
                    center: [0.1, 0.35, -0.35],
                    velocity: [0.0, 0.0, 0.035],
                    color: [0.2, 0.3, 0.95],
                    density: 12.0,
                },
            ],
            frames,
            bounds: Aabb::cube(1.0),
            edge: 0.15,
            background: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.frames >= 1, Config, "scene needs at least one frame");
        ensure!(
            self.edge.is_finite() && self.edge > 0.0,
            Config,
            "edge width must be positive, got {}",
            self.edge
        );
        ensure!(
            self.background.iter().all(|c| (0.0..=1.0).contains(c)),
            Config,
            "background color outside [0, 1]"
        );
        for (i, p) in self.primitives.iter().enumerate() {
            ensure!(
                p.color.iter().all(|c| (0.0..=1.0).contains(c)),
                Config,
                "primitive {i}: color outside [0, 1]"
            );
            ensure!(
                p.density.is_finite() && p.density >= 0.0,
                Config,
                "primitive {i}: density must be nonnegative"
            );
            let h = p.shape.half_size();
            ensure!(
                h.iter().all(|v| v.is_finite() && *v > 0.0),
                Config,
                "primitive {i}: size must be positive"
            );
            // Paths are linear, so the end frames bound the whole motion.
            for f in [0, self.frames - 1] {
                let c = p.center_at(f);
                for a in 0..3 {
                    let reach = h[a] + 0.5 * self.edge;
                    ensure!(
                        c[a] - reach >= self.bounds.min[a] && c[a] + reach <= self.bounds.max[a],
                        Config,
                        "primitive {i} leaves the scene bounds at frame {f}"
                    );
                }
            }
        }
        Ok(())
    }

    /// Density and color at `x` in `frame`.
    pub fn eval(&self, frame: usize, x: [f64; 3]) -> ([f64; 3], f64) {
        let mut sigma = 0.0;
        let mut rgb = [0.0; 3];
        for p in &self.primitives {
            let c = p.center_at(frame);
            let d = p.shape.sdf([x[0] - c[0], x[1] - c[1], x[2] - c[2]]);
            let occ = (0.5 - d / self.edge).clamp(0.0, 1.0);
            let s = p.density * occ;
            sigma += s;
            for k in 0..3 {
                rgb[k] += s * p.color[k];
            }
        }
        if sigma > 0.0 {
            rgb = rgb.map(|v| v / sigma);
        }
        (rgb, sigma)
    }

    pub fn field(&self, frame: usize) -> AnalyticField<'_> {
        AnalyticField { scene: self, frame }
    }
}

/// The scene at one frame, as a renderable field.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticField<'a> {
    scene: &'a SceneSpec,
    frame: usize,
}

impl RadianceField for AnalyticField<'_> {
    fn bounds(&self) -> &Aabb {
        &self.scene.bounds
    }

    fn eval_samples(
        &self,
        positions: &[[f64; 3]],
        _dir: [f64; 3],
        rgb: &mut Vec<[f64; 3]>,
        sigma: &mut Vec<f64>,
    ) -> Result<()> {
        rgb.clear();
        sigma.clear();
        for &x in positions {
            let (c, s) = self.scene.eval(self.frame, x);
            rgb.push(c);
            sigma.push(s);
        }
        Ok(())
    }
}

/// `count` cameras on a Fibonacci sphere of radius `distance`, looking at
/// the origin. Every `test_every`-th camera (if nonzero) is held out.
pub fn orbit_cameras(
    count: usize,
    distance: f64,
    width: u32,
    height: u32,
    fov_deg: f64,
    test_every: usize,
) -> Result<Vec<DatasetCamera>> {
    ensure!(count > 0, Config, "need at least one camera");
    ensure!(
        fov_deg > 0.0 && fov_deg < 180.0,
        Config,
        "field of view must be in (0, 180) degrees"
    );
    let f = 0.5 * width as f64 / (0.5 * fov_deg.to_radians()).tan();
    let intr = Intrinsics {
        fx: f,
        fy: f,
        cx: 0.5 * width as f64,
        cy: 0.5 * height as f64,
        width,
        height,
    };
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let eye = [
                distance * r * phi.cos(),
                distance * r * phi.sin(),
                distance * z,
            ];
            let cam = Camera::look_at(intr, eye, [0.0; 3], [0.0, 0.0, 1.0])?;
            let split = if test_every > 0 && i % test_every == test_every - 1 {
                Split::Test
            } else {
                Split::Train
            };
            Ok(DatasetCamera {
                name: format!("cam_{i:03}"),
                intrinsics: intr,
                pose: cam.to_matrix(),
                split,
            })
        })
        .collect()
}

/// Ray-traces every frame from every camera with the volume quadrature.
pub fn generate_scene(
    spec: &SceneSpec,
    cameras: &[DatasetCamera],
    samples: usize,
) -> Result<Dataset> {
    spec.validate()?;
    ensure!(samples > 0, Config, "need at least one sample per ray");
    let cfg = RenderConfig {
        samples,
        background: spec.background,
        jitter: false,
    };
    let cams = cameras
        .iter()
        .map(|c| c.camera())
        .collect::<Result<Vec<_>>>()?;
    let frames = (0..spec.frames)
        .map(|f| {
            let field = spec.field(f);
            cams.par_iter()
                .map(|cam| Ok(render_image(&field, cam, &cfg)?.to_rgb8()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(spec.bounds, spec.background, cameras.to_vec(), frames)
}
