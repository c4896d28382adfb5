//! Ray generation, stratified sampling and differentiable volume rendering.

mod camera;
mod diff;
mod image;
mod volume;

pub use camera::{generate_rays, Camera, Intrinsics, Ray};
pub use diff::{mse_and_grad, DiffRenderer, RayTape};
pub use image::{render_field_ray, render_image, RenderConfig};
pub use volume::{render_ray, render_ray_backward, sample_ray, RayRender, RaySamples};
