use rayon::prelude::*;

use super::entropy::{EntropyModel, ProbabilityModel};
use super::quant::QuantConfig;
use crate::error::{ensure, Result};

/// Elements per parallel chunk; partial sums are reduced in chunk order so
/// results do not depend on the thread count.
const CHUNK: usize = 4096;

/// Mean bits per element of the basis-side grids and of the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateLoss {
    pub basis_bits: f64,
    pub coeff_bits: f64,
}

impl RateLoss {
    pub fn total(&self) -> f64 {
        self.basis_bits + self.coeff_bits
    }
}

/// Gradients of [`RateLoss::total`]. Value gradients are in the original
/// (unscaled) domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGrads {
    pub basis: Vec<Vec<f64>>,
    pub coeff: Vec<f64>,
    pub basis_models: Vec<Vec<f64>>,
    pub coeff_model: Vec<f64>,
}

/// One model per basis level plus one for the coefficient grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EntropyModelSet {
    pub basis: Vec<EntropyModel>,
    pub coeff: EntropyModel,
}

impl EntropyModelSet {
    pub fn new(level_channels: &[usize], coeff_channels: usize) -> Result<Self> {
        Ok(EntropyModelSet {
            basis: level_channels
                .iter()
                .map(|&c| EntropyModel::new(c))
                .collect::<Result<_>>()?,
            coeff: EntropyModel::new(coeff_channels)?,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntropyModel> {
        self.basis.iter().chain(std::iter::once(&self.coeff))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut EntropyModel> {
        self.basis
            .iter_mut()
            .chain(std::iter::once(&mut self.coeff))
    }

    pub fn round_to_f32(&mut self) {
        self.iter_mut().for_each(EntropyModel::round_to_f32);
    }
}

fn check_grid<M: ProbabilityModel + ?Sized>(values: &[f64], model: &M, what: &str) -> Result<()> {
    let c = model.channels();
    ensure!(
        values.len().is_multiple_of(c),
        Structure,
        "{what}: {} values do not split into {c} channels",
        values.len()
    );
    Ok(())
}

/// Sum of `-log2 pmf(q x)` over one grid; element `e` uses channel `e % C`.
pub fn grid_bits<M: ProbabilityModel + ?Sized>(
    values: &[f64],
    q: QuantConfig,
    model: &M,
) -> Result<f64> {
    check_grid(values, model, "grid")?;
    let c = model.channels();
    let parts = values
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut s = 0.0;
            for (i, &x) in chunk.iter().enumerate() {
                s += model.bits((ci * CHUNK + i) % c, q.q() * x)?;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

/// Like [`grid_bits`], writing `weight * d/dx` into `d_values` and
/// accumulating `weight * d/dparams` into `d_model`.
fn grid_bits_grad<M: ProbabilityModel + ?Sized>(
    values: &[f64],
    q: QuantConfig,
    model: &M,
    weight: f64,
    d_values: &mut [f64],
    d_model: &mut [f64],
) -> Result<f64> {
    let c = model.channels();
    let np = model.param_count();
    let parts = values
        .par_chunks(CHUNK)
        .zip(d_values.par_chunks_mut(CHUNK))
        .enumerate()
        .map(|(ci, (chunk, dchunk))| {
            let mut g = vec![0.0; np];
            let mut s = 0.0;
            for (i, (&x, dx)) in chunk.iter().zip(dchunk.iter_mut()).enumerate() {
                let (b, dy) =
                    model.bits_with_grad((ci * CHUNK + i) % c, q.q() * x, weight, &mut g)?;
                s += b;
                *dx = weight * dy * q.q();
            }
            Ok((s, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for (s, g) in parts {
        total += s;
        for (a, b) in d_model.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok(total)
}

fn check_set<M: ProbabilityModel>(
    basis: &[&[f64]],
    coeff: &[f64],
    basis_models: &[M],
    coeff_model: &M,
) -> Result<()> {
    ensure!(
        basis.len() == basis_models.len(),
        Structure,
        "{} basis grids but {} basis entropy models",
        basis.len(),
        basis_models.len()
    );
    for (l, (v, m)) in basis.iter().zip(basis_models).enumerate() {
        check_grid(v, m, &format!("basis level {l}"))?;
    }
    check_grid(coeff, coeff_model, "coefficient grid")
}

/// `-mean log2 pmf` over all basis-side elements (each level with its own
/// model) plus `-mean log2 pmf` over the coefficients. Values are given in
/// the original domain and evaluated at `q * x`.
pub fn rate_loss<M: ProbabilityModel>(
    basis: &[&[f64]],
    coeff: &[f64],
    q: QuantConfig,
    basis_models: &[M],
    coeff_model: &M,
) -> Result<RateLoss> {
    check_set(basis, coeff, basis_models, coeff_model)?;
    let n: usize = basis.iter().map(|v| v.len()).sum();
    let mut b = 0.0;
    for (v, m) in basis.iter().zip(basis_models) {
        b += grid_bits(v, q, m)?;
    }
    let c = grid_bits(coeff, q, coeff_model)?;
    Ok(RateLoss {
        basis_bits: if n == 0 { 0.0 } else { b / n as f64 },
        coeff_bits: if coeff.is_empty() {
            0.0
        } else {
            c / coeff.len() as f64
        },
    })
}

/// [`rate_loss`] together with its gradients.
pub fn rate_loss_grad<M: ProbabilityModel>(
    basis: &[&[f64]],
    coeff: &[f64],
    q: QuantConfig,
    basis_models: &[M],
    coeff_model: &M,
) -> Result<(RateLoss, RateGrads)> {
    check_set(basis, coeff, basis_models, coeff_model)?;
    let n: usize = basis.iter().map(|v| v.len()).sum();
    let wb = if n == 0 { 0.0 } else { 1.0 / n as f64 };
    let wc = if coeff.is_empty() {
        0.0
    } else {
        1.0 / coeff.len() as f64
    };
    let mut grads = RateGrads {
        basis: basis.iter().map(|v| vec![0.0; v.len()]).collect(),
        coeff: vec![0.0; coeff.len()],
        basis_models: basis_models
            .iter()
            .map(|m| vec![0.0; m.param_count()])
            .collect(),
        coeff_model: vec![0.0; coeff_model.param_count()],
    };
    let mut b = 0.0;
    for (l, (v, m)) in basis.iter().zip(basis_models).enumerate() {
        b += grid_bits_grad(v, q, m, wb, &mut grads.basis[l], &mut grads.basis_models[l])?;
    }
    let c = grid_bits_grad(
        coeff,
        q,
        coeff_model,
        wc,
        &mut grads.coeff,
        &mut grads.coeff_model,
    )?;
    Ok((
        RateLoss {
            basis_bits: b * wb,
            coeff_bits: c * wc,
        },
        grads,
    ))
}
