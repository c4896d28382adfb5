use super::basis::{FrameKind, FrameRepresentation, MultiResBasis};
use super::grid::{scatter_into, stencil_for, Aabb, FeatureGrid, Stencil};
use super::network::{direction_encode_into, sigmoid, softplus, NetScratch, ShadingNetwork};
use crate::error::{ensure, Result};

/// Anything that can be volume rendered: color and density at a point seen
/// from a direction.
pub trait RadianceField: Sync {
    fn bounds(&self) -> &Aabb;

    /// Evaluates every position along one ray direction. `rgb` and `sigma`
    /// are cleared and refilled.
    fn eval_samples(
        &self,
        positions: &[[f64; 3]],
        dir: [f64; 3],
        rgb: &mut Vec<[f64; 3]>,
        sigma: &mut Vec<f64>,
    ) -> Result<()>;
}

/// Maps raw network outputs to `(rgb, density)`.
#[inline]
pub fn activate(raw: &[f64; 4]) -> ([f64; 3], f64) {
    (
        [sigmoid(raw[0]), sigmoid(raw[1]), sigmoid(raw[2])],
        softplus(raw[3]),
    )
}

/// `(c, sigma) = Phi(interp(x, C) * interp(x, B_t), d)` for one point.
///
/// Residual frames are evaluated as `interp(x, B_1) + interp(x, R_t)`, which
/// equals interpolation of the composed basis by linearity.
pub fn query_field(
    frame: &FrameRepresentation,
    keyframe_basis: &MultiResBasis,
    net: &ShadingNetwork,
    x: [f64; 3],
    d: [f64; 3],
) -> Result<([f64; 3], f64)> {
    let width = frame.basis.total_channels();
    ensure!(
        net.feature_width() == width && frame.coeff.channels() == width,
        Structure,
        "network feature width {} does not match basis width {}",
        net.feature_width(),
        width
    );
    let mut b = vec![0.0; width];
    frame.basis.interp_into(x, &mut b)?;
    if frame.kind == FrameKind::Residual {
        ensure!(
            keyframe_basis.same_shape(&frame.basis),
            Structure,
            "residual does not match keyframe basis shapes"
        );
        let mut k = vec![0.0; width];
        keyframe_basis.interp_into(x, &mut k)?;
        for (bi, ki) in b.iter_mut().zip(&k) {
            *bi += ki;
        }
    }
    let c = frame.coeff.interp(x)?;
    let mut input = vec![0.0; net.input_width()];
    for i in 0..width {
        input[i] = b[i] * c[i];
    }
    direction_encode_into(d, net.sh_degree(), &mut input[width..])?;
    let mut scratch = net.scratch();
    let raw = net.forward(&input, &mut scratch);
    Ok(activate(&raw))
}

/// Gradient buffers shaped like a grid field's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrads {
    pub basis: Vec<Vec<f64>>,
    pub coeff: Vec<f64>,
    pub net: Vec<f64>,
}

impl FieldGrads {
    pub fn zeros(basis: &MultiResBasis, coeff: &FeatureGrid, net: &ShadingNetwork) -> Self {
        FieldGrads {
            basis: basis.levels().iter().map(|l| vec![0.0; l.len()]).collect(),
            coeff: vec![0.0; coeff.len()],
            net: vec![0.0; net.param_count()],
        }
    }

    pub fn zeros_like(&self) -> Self {
        FieldGrads {
            basis: self.basis.iter().map(|l| vec![0.0; l.len()]).collect(),
            coeff: vec![0.0; self.coeff.len()],
            net: vec![0.0; self.net.len()],
        }
    }

    fn buffers_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.basis
            .iter_mut()
            .chain(std::iter::once(&mut self.coeff))
            .chain(std::iter::once(&mut self.net))
    }

    fn buffers(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.basis
            .iter()
            .chain(std::iter::once(&self.coeff))
            .chain(std::iter::once(&self.net))
    }

    pub fn add_assign(&mut self, other: &FieldGrads) {
        for (a, b) in self.buffers_mut().zip(other.buffers()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.buffers_mut() {
            for x in a.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn clear(&mut self) {
        for a in self.buffers_mut() {
            a.fill(0.0);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.buffers().all(|b| b.iter().all(|&v| v == 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.buffers()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A factorized grid field ready for batched evaluation and
/// differentiation: `basis` is the effective `B_t`.
#[derive(Debug, Clone, Copy)]
pub struct GridField<'a> {
    pub basis: &'a MultiResBasis,
    pub coeff: &'a FeatureGrid,
    pub net: &'a ShadingNetwork,
}

/// Scratch space for evaluating one sample of a [`GridField`].
#[derive(Debug, Clone)]
pub struct SampleWorkspace {
    pub input: Vec<f64>,
    pub d_input: Vec<f64>,
    pub stencils: Vec<Stencil>,
    pub net: NetScratch,
    pub tmp: Vec<f64>,
}

impl<'a> GridField<'a> {
    pub fn new(
        basis: &'a MultiResBasis,
        coeff: &'a FeatureGrid,
        net: &'a ShadingNetwork,
    ) -> Result<Self> {
        let width = basis.total_channels();
        ensure!(
            coeff.channels() == width,
            Structure,
            "coefficient channels {} != basis channels {}",
            coeff.channels(),
            width
        );
        ensure!(
            net.feature_width() == width,
            Structure,
            "network feature width {} != basis channels {}",
            net.feature_width(),
            width
        );
        ensure!(
            coeff.bounds() == basis.bounds(),
            Structure,
            "coefficient and basis bounds differ"
        );
        Ok(GridField { basis, coeff, net })
    }

    pub fn width(&self) -> usize {
        self.coeff.channels()
    }

    pub fn workspace(&self) -> SampleWorkspace {
        SampleWorkspace {
            input: vec![0.0; self.net.input_width()],
            d_input: vec![0.0; self.net.input_width()],
            stencils: Vec::with_capacity(self.basis.level_count() + 1),
            net: self.net.scratch(),
            tmp: vec![0.0; self.width()],
        }
    }

    /// Interpolated basis features `b` and coefficients `c` at `x`.
    pub fn features(&self, x: [f64; 3], b: &mut [f64], c: &mut [f64]) -> Result<()> {
        self.basis.interp_into(x, b)?;
        self.coeff.interp_into(x, c)
    }

    /// Runs the network on `b * c` and the direction encoding `enc`.
    pub fn shade(&self, b: &[f64], c: &[f64], enc: &[f64], ws: &mut SampleWorkspace) -> [f64; 4] {
        let w = self.width();
        for i in 0..w {
            ws.input[i] = b[i] * c[i];
        }
        ws.input[w..].copy_from_slice(enc);
        self.net.forward(&ws.input, &mut ws.net)
    }

    /// Accumulates the gradient of one sample given `d_raw`, the loss
    /// gradient w.r.t. the raw network outputs. Network activations are
    /// recomputed from the stored features.
    #[allow(clippy::too_many_arguments)]
    pub fn backward_sample(
        &self,
        x: [f64; 3],
        b: &[f64],
        c: &[f64],
        enc: &[f64],
        d_raw: &[f64; 4],
        ws: &mut SampleWorkspace,
        grads: &mut FieldGrads,
    ) -> Result<()> {
        self.shade(b, c, enc, ws);
        self.net
            .backward(&mut ws.net, d_raw, &mut grads.net, &mut ws.d_input);
        let w = self.width();
        let bounds = self.basis.bounds();
        // d/db = d_h * c, level by level.
        let mut off = 0;
        for (li, level) in self.basis.levels().iter().enumerate() {
            let ch = level.channels();
            for i in 0..ch {
                ws.tmp[i] = ws.d_input[off + i] * c[off + i];
            }
            let s = stencil_for(&level.res(), bounds, x)?;
            scatter_into(ch, &s, &ws.tmp[..ch], &mut grads.basis[li]);
            off += ch;
        }
        for i in 0..w {
            ws.tmp[i] = ws.d_input[i] * b[i];
        }
        let s = self.coeff.stencil(x)?;
        scatter_into(w, &s, &ws.tmp[..w], &mut grads.coeff);
        Ok(())
    }
}

impl RadianceField for GridField<'_> {
    fn bounds(&self) -> &Aabb {
        self.basis.bounds()
    }

    fn eval_samples(
        &self,
        positions: &[[f64; 3]],
        dir: [f64; 3],
        rgb: &mut Vec<[f64; 3]>,
        sigma: &mut Vec<f64>,
    ) -> Result<()> {
        rgb.clear();
        sigma.clear();
        let w = self.width();
        let mut ws = self.workspace();
        let mut enc = vec![0.0; self.net.input_width() - w];
        direction_encode_into(dir, self.net.sh_degree(), &mut enc)?;
        let mut b = vec![0.0; w];
        let mut c = vec![0.0; w];
        for &x in positions {
            self.features(x, &mut b, &mut c)?;
            let raw = self.shade(&b, &c, &enc, &mut ws);
            let (col, s) = activate(&raw);
            rgb.push(col);
            sigma.push(s);
        }
        Ok(())
    }
}

/// A frame with its effective basis materialized, for repeated rendering.
#[derive(Debug, Clone)]
pub struct FrameField {
    basis: MultiResBasis,
    coeff: FeatureGrid,
    net: ShadingNetwork,
}

impl FrameField {
    pub fn new(
        frame: &FrameRepresentation,
        keyframe_basis: &MultiResBasis,
        net: &ShadingNetwork,
    ) -> Result<Self> {
        let basis = frame.effective_basis(keyframe_basis)?;
        GridField::new(&basis, &frame.coeff, net)?;
        Ok(FrameField {
            basis,
            coeff: frame.coeff.clone(),
            net: net.clone(),
        })
    }

    pub fn view(&self) -> GridField<'_> {
        GridField {
            basis: &self.basis,
            coeff: &self.coeff,
            net: &self.net,
        }
    }
}

impl RadianceField for FrameField {
    fn bounds(&self) -> &Aabb {
        self.basis.bounds()
    }

    fn eval_samples(
        &self,
        positions: &[[f64; 3]],
        dir: [f64; 3],
        rgb: &mut Vec<[f64; 3]>,
        sigma: &mut Vec<f64>,
    ) -> Result<()> {
        self.view().eval_samples(positions, dir, rgb, sigma)
    }
}
