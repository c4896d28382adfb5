use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Aabb, FeatureGrid};
use crate::error::{ensure, Error, Result};

/// Ordered set of basis grids at strictly increasing resolution, sharing one
/// bounding box. Interpolated level features are concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiResBasis {
    levels: Vec<FeatureGrid>,
}

impl MultiResBasis {
    pub fn new(levels: Vec<FeatureGrid>) -> Result<Self> {
        ensure!(
            !levels.is_empty(),
            Structure,
            "basis needs at least one level"
        );
        let bounds = *levels[0].bounds();
        for w in levels.windows(2) {
            let (a, b) = (w[0].res(), w[1].res());
            ensure!(
                (0..3).all(|i| b[i] > a[i]),
                Structure,
                "basis resolutions must be strictly increasing ({:?} then {:?})",
                a,
                b
            );
        }
        ensure!(
            levels.iter().all(|l| *l.bounds() == bounds),
            Structure,
            "all basis levels must share the same bounds"
        );
        Ok(MultiResBasis { levels })
    }

    pub fn zeros(shapes: &[([usize; 3], usize)], bounds: Aabb) -> Result<Self> {
        let levels = shapes
            .iter()
            .map(|&(r, c)| FeatureGrid::zeros(r, c, bounds))
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    pub fn uniform<R: Rng>(
        shapes: &[([usize; 3], usize)],
        bounds: Aabb,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let levels = shapes
            .iter()
            .map(|&(r, c)| FeatureGrid::uniform(r, c, bounds, scale, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    pub fn levels(&self) -> &[FeatureGrid] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [FeatureGrid] {
        &mut self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn total_channels(&self) -> usize {
        self.levels.iter().map(|l| l.channels()).sum()
    }

    pub fn bounds(&self) -> &Aabb {
        self.levels[0].bounds()
    }

    pub fn shapes(&self) -> Vec<([usize; 3], usize)> {
        self.levels
            .iter()
            .map(|l| (l.res(), l.channels()))
            .collect()
    }

    pub fn same_shape(&self, other: &MultiResBasis) -> bool {
        self.levels.len() == other.levels.len()
            && self
                .levels
                .iter()
                .zip(&other.levels)
                .all(|(a, b)| a.same_shape(b))
    }

    /// Concatenated per-level interpolation at `x`.
    pub fn interp_into(&self, x: [f64; 3], out: &mut [f64]) -> Result<()> {
        let mut off = 0;
        for l in &self.levels {
            let c = l.channels();
            l.interp_into(x, &mut out[off..off + c])?;
            off += c;
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }
}

/// `B_t = B_1 + R_t`, level by level. Inputs are left untouched.
pub fn compose_basis(keyframe: &MultiResBasis, residual: &MultiResBasis) -> Result<MultiResBasis> {
    if !keyframe.same_shape(residual) {
        return Err(Error::Structure(format!(
            "residual shapes {:?} do not match keyframe basis {:?}",
            residual.shapes(),
            keyframe.shapes()
        )));
    }
    let levels = keyframe
        .levels
        .iter()
        .zip(&residual.levels)
        .map(|(b, r)| {
            let data = b.data().iter().zip(r.data()).map(|(x, y)| x + y).collect();
            FeatureGrid::from_data(b.res(), b.channels(), data, *b.bounds())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiResBasis { levels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    Keyframe,
    Residual,
}

/// One frame of a group: `{B_1, C_1}` for the keyframe, `{R_t, C_t}` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRepresentation {
    pub kind: FrameKind,
    /// The keyframe basis for keyframes, the residual for residual frames.
    pub basis: MultiResBasis,
    pub coeff: FeatureGrid,
    /// 1-based position inside the group.
    pub frame_index: usize,
}

impl FrameRepresentation {
    pub fn new(
        kind: FrameKind,
        basis: MultiResBasis,
        coeff: FeatureGrid,
        frame_index: usize,
    ) -> Result<Self> {
        ensure!(frame_index >= 1, Structure, "frame index is 1-based");
        ensure!(
            (kind == FrameKind::Keyframe) == (frame_index == 1),
            Structure,
            "only frame 1 of a group is a keyframe (got {:?} at index {})",
            kind,
            frame_index
        );
        ensure!(
            coeff.channels() == basis.total_channels(),
            Structure,
            "coefficient channels {} must equal basis total channels {}",
            coeff.channels(),
            basis.total_channels()
        );
        ensure!(
            coeff.bounds() == basis.bounds(),
            Structure,
            "coefficient and basis bounds differ"
        );
        Ok(FrameRepresentation {
            kind,
            basis,
            coeff,
            frame_index,
        })
    }

    pub fn is_keyframe(&self) -> bool {
        self.kind == FrameKind::Keyframe
    }

    /// The effective basis `B_t` of this frame.
    pub fn effective_basis(&self, keyframe_basis: &MultiResBasis) -> Result<MultiResBasis> {
        match self.kind {
            FrameKind::Keyframe => Ok(self.basis.clone()),
            FrameKind::Residual => compose_basis(keyframe_basis, &self.basis),
        }
    }

    /// All grids in coding order: basis (or residual) levels, then the coefficients.
    pub fn grids(&self) -> impl Iterator<Item = &FeatureGrid> {
        self.basis
            .levels()
            .iter()
            .chain(std::iter::once(&self.coeff))
    }
}
