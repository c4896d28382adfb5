use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::config::{lambda_schedule, TrainConfig};
use super::log::{LogRow, Stage};
use super::loss::{l1_loss_grad, total_loss};
use crate::codec::reconstruct_grid;
use crate::error::{ensure, Result};
use crate::field::{
    compose_basis, FeatureGrid, FrameKind, FrameRepresentation, GridField, MultiResBasis,
    ShadingNetwork,
};
use crate::rate::{
    rate_loss, rate_loss_grad, round_half_away, simulate_quantize_in_place, EntropyModelSet,
    ProbabilityModel, QuantConfig, RateLoss,
};
use crate::render::{mse_and_grad, Ray, RenderConfig};
use crate::scene::{Dataset, Split};

/// Training rays of one frame with their target colors.
#[derive(Debug, Clone)]
pub struct FrameTargets {
    pub rays: Vec<Ray>,
    pub colors: Vec<[f64; 3]>,
}

impl FrameTargets {
    /// Every pixel of every training camera of `frame`.
    pub fn new(dataset: &Dataset, frame: usize) -> Result<Self> {
        ensure!(
            frame < dataset.frame_count(),
            Structure,
            "frame {frame} outside dataset of {} frames",
            dataset.frame_count()
        );
        let train = dataset.indices(Split::Train);
        ensure!(
            !train.is_empty(),
            Structure,
            "dataset has no training cameras"
        );
        let mut rays = Vec::new();
        let mut colors = Vec::new();
        for c in train {
            let cam = dataset.cameras[c].camera()?;
            let img = dataset.frames[frame][c].to_linear();
            for y in 0..img.height {
                for x in 0..img.width {
                    rays.push(cam.ray(x, y)?);
                    colors.push(img.get(x, y));
                }
            }
        }
        Ok(FrameTargets { rays, colors })
    }

    /// `n` rays drawn uniformly with replacement, or all rays in order when
    /// `n` covers the whole set.
    fn batch<R: Rng>(&self, n: usize, rng: &mut R) -> (Vec<Ray>, Vec<[f64; 3]>) {
        if n >= self.rays.len() {
            return (self.rays.clone(), self.colors.clone());
        }
        (0..n)
            .map(|_| {
                let i = rng.gen_range(0..self.rays.len());
                (self.rays[i], self.colors[i])
            })
            .unzip()
    }
}

/// What a decoder reconstructs of a keyframe: grids after quantization at
/// `q`, network and entropy models at storage precision.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeBuffer {
    pub basis: MultiResBasis,
    pub coeff: FeatureGrid,
    pub net: ShadingNetwork,
    pub models: EntropyModelSet,
    pub q: QuantConfig,
}

#[derive(Debug, Clone)]
pub struct KeyframeOutput {
    /// Unquantized `{B_1, C_1}`.
    pub frame: FrameRepresentation,
    pub buffer: KeyframeBuffer,
    pub log: Vec<LogRow>,
}

/// Independent random stream per (seed, global frame).
fn stage_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64 + 1);
    rng
}

fn render_config(dataset: &Dataset, cfg: &TrainConfig) -> RenderConfig {
    RenderConfig {
        samples: cfg.samples,
        background: dataset.background,
        jitter: true,
    }
}

fn adam_states(basis: &MultiResBasis) -> Vec<AdamState> {
    basis
        .levels()
        .iter()
        .map(|l| AdamState::new(l.len()))
        .collect()
}

fn level_slices(basis: &MultiResBasis) -> Vec<&[f64]> {
    basis.levels().iter().map(|l| l.data()).collect()
}

fn noisy(
    basis: &MultiResBasis,
    coeff: &FeatureGrid,
    q: QuantConfig,
    rng: &mut ChaCha8Rng,
) -> (MultiResBasis, FeatureGrid) {
    let mut b = basis.clone();
    for l in b.levels_mut() {
        simulate_quantize_in_place(l.data_mut(), q, rng);
    }
    let mut c = coeff.clone();
    simulate_quantize_in_place(c.data_mut(), q, rng);
    (b, c)
}

fn add_scaled(dst: &mut [f64], src: &[f64], s: f64) {
    for (d, v) in dst.iter_mut().zip(src) {
        *d += s * v;
    }
}

fn psnr_of_mse(mse: f64) -> f64 {
    if mse > 0.0 {
        -10.0 * mse.log10()
    } else {
        f64::INFINITY
    }
}

fn should_log(it: usize, iters: usize, cfg: &TrainConfig) -> bool {
    it.is_multiple_of(cfg.log_every) || it + 1 == iters
}

/// Initial keyframe grids and network.
pub fn init_keyframe(
    dataset: &Dataset,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(MultiResBasis, FeatureGrid, ShadingNetwork, EntropyModelSet)> {
    let shapes: Vec<_> = cfg
        .basis_res
        .iter()
        .map(|&r| (r, cfg.basis_channels))
        .collect();
    let basis = MultiResBasis::uniform(&shapes, dataset.bounds, cfg.basis_init, rng)?;
    let width = basis.total_channels();
    let mut coeff =
        FeatureGrid::uniform(cfg.coeff_res, width, dataset.bounds, cfg.coeff_init, rng)?;
    coeff.data_mut().iter_mut().for_each(|v| *v += 1.0);
    let net = ShadingNetwork::new(width, &cfg.hidden, cfg.sh_degree, cfg.density_bias, rng)?;
    let level_channels = vec![cfg.basis_channels; cfg.basis_res.len()];
    let models = EntropyModelSet::new(&level_channels, width)?;
    Ok((basis, coeff, net, models))
}

/// Fits the entropy models alone to the integer symbols of the given
/// frames (pooled per grid) with full-batch Adam. Grids are untouched.
pub fn fit_entropy_models(
    models: &mut EntropyModelSet,
    frames: &[&FrameRepresentation],
    q: QuantConfig,
    iters: usize,
    lr: f64,
) -> Result<RateLoss> {
    ensure!(
        !frames.is_empty(),
        Structure,
        "no grids to fit entropy models to"
    );
    let snap = |g: &FeatureGrid, out: &mut Vec<f64>| {
        out.extend(g.data().iter().map(|&x| round_half_away(q.q() * x) / q.q()));
    };
    let mut levels = vec![Vec::new(); frames[0].basis.level_count()];
    let mut c = Vec::new();
    for f in frames {
        for (out, l) in levels.iter_mut().zip(f.basis.levels()) {
            snap(l, out);
        }
        snap(&f.coeff, &mut c);
    }
    let refs: Vec<&[f64]> = levels.iter().map(|v| v.as_slice()).collect();
    let mut states: Vec<AdamState> = models
        .iter()
        .map(|m| AdamState::new(m.params().len()))
        .collect();
    for _ in 0..iters {
        let (_, g) = rate_loss_grad(&refs, &c, q, &models.basis, &models.coeff)?;
        let grads = g.basis_models.iter().chain(std::iter::once(&g.coeff_model));
        for ((m, g), st) in models.iter_mut().zip(grads).zip(&mut states) {
            m.update_params(|p| adam_step(p, g, st, lr))?;
        }
    }
    rate_loss(&refs, &c, q, &models.basis, &models.coeff)
}

/// Optimizes `{B_1, C_1, Φ, models}` on `frame`, then fits the models to
/// the final symbols, freezes network and models and builds the
/// reconstructed keyframe buffer.
pub fn train_keyframe(
    dataset: &Dataset,
    frame: usize,
    cfg: &TrainConfig,
) -> Result<KeyframeOutput> {
    cfg.validate()?;
    let q = cfg.quant()?;
    let targets = FrameTargets::new(dataset, frame)?;
    let mut rng = stage_rng(cfg.seed, frame);
    let (mut basis, mut coeff, mut net, mut models) = init_keyframe(dataset, cfg, &mut rng)?;
    let rcfg = render_config(dataset, cfg);

    let mut st_basis = adam_states(&basis);
    let mut st_coeff = AdamState::new(coeff.len());
    let mut st_net = AdamState::new(net.param_count());
    let mut st_models: Vec<AdamState> = models
        .iter()
        .map(|m| AdamState::new(m.params().len()))
        .collect();
    let iters = cfg.keyframe_iters;
    let mut log = Vec::new();

    for it in 0..iters {
        let lambda = if cfg.joint {
            lambda_schedule(it, iters, cfg)
        } else {
            0.0
        };
        let (rays, colors) = targets.batch(cfg.rays_per_batch, &mut rng);
        let (bn, cn) = if cfg.joint {
            noisy(&basis, &coeff, q, &mut rng)
        } else {
            (basis.clone(), coeff.clone())
        };
        let field = GridField::new(&bn, &cn, &net)?;
        let (mse, mut g) = mse_and_grad(&field, &rays, &colors, &rcfg, rng.gen(), cfg.shards)?;

        let mut rate = RateLoss::default();
        if cfg.joint {
            let (r, rg) = rate_loss_grad(
                &level_slices(&bn),
                cn.data(),
                q,
                &models.basis,
                &models.coeff,
            )?;
            rate = r;
            if lambda != 0.0 {
                for (gb, rb) in g.basis.iter_mut().zip(&rg.basis) {
                    add_scaled(gb, rb, lambda);
                }
                add_scaled(&mut g.coeff, &rg.coeff, lambda);
            }
            // The models minimize the rate alone; λ only trades it against distortion.
            let mgrads = rg
                .basis_models
                .iter()
                .chain(std::iter::once(&rg.coeff_model));
            for ((m, mg), st) in models.iter_mut().zip(mgrads).zip(&mut st_models) {
                m.update_params(|p| adam_step(p, mg, st, cfg.lr_entropy))?;
            }
        }
        let loss = total_loss(mse, rate.total(), 0.0, lambda, 0.0)?;

        for ((level, gl), st) in basis
            .levels_mut()
            .iter_mut()
            .zip(&g.basis)
            .zip(&mut st_basis)
        {
            adam_step(level.data_mut(), gl, st, cfg.lr_grid)?;
        }
        adam_step(coeff.data_mut(), &g.coeff, &mut st_coeff, cfg.lr_grid)?;
        adam_step(net.params_mut(), &g.net, &mut st_net, cfg.lr_net)?;

        if should_log(it, iters, cfg) {
            log.push(LogRow {
                frame,
                stage: Stage::Keyframe,
                iteration: it,
                loss,
                mse,
                rate_bits: rate.total(),
                l1: 0.0,
                psnr: psnr_of_mse(mse),
            });
        }
    }

    let frame = FrameRepresentation::new(FrameKind::Keyframe, basis, coeff, 1)?;
    fit_entropy_models(
        &mut models,
        &[&frame],
        q,
        cfg.entropy_refine_iters,
        cfg.lr_entropy,
    )?;
    net.round_to_f32();
    models.round_to_f32();
    let levels = frame
        .basis
        .levels()
        .iter()
        .map(|l| reconstruct_grid(l, q))
        .collect::<Result<Vec<_>>>()?;
    let buffer = KeyframeBuffer {
        basis: MultiResBasis::new(levels)?,
        coeff: reconstruct_grid(&frame.coeff, q)?,
        net,
        models,
        q,
    };
    Ok(KeyframeOutput { frame, buffer, log })
}

/// State carried across the residual stages of one group: the entropy
/// models coding the residual frames and the previous frame's grids, which
/// initialize the next frame.
#[derive(Debug, Clone)]
pub struct ResidualState {
    pub models: EntropyModelSet,
    /// Adam moments when the models are trained, `None` when frozen.
    adam: Option<Vec<AdamState>>,
    pub previous: Option<FrameRepresentation>,
}

impl ResidualState {
    /// Separate, freshly initialized models shaped like the keyframe set,
    /// trained in frame order.
    pub fn new(like: &EntropyModelSet) -> Result<Self> {
        let levels: Vec<usize> = like.basis.iter().map(|m| m.channels()).collect();
        let models = EntropyModelSet::new(&levels, like.coeff.channels())?;
        let adam = models
            .iter()
            .map(|m| AdamState::new(m.params().len()))
            .collect();
        Ok(ResidualState {
            models,
            adam: Some(adam),
            previous: None,
        })
    }

    /// Residual frames coded with the frozen keyframe models.
    pub fn frozen(keyframe_models: &EntropyModelSet) -> Self {
        ResidualState {
            models: keyframe_models.clone(),
            adam: None,
            previous: None,
        }
    }

    pub fn for_config(keyframe_models: &EntropyModelSet, cfg: &TrainConfig) -> Result<Self> {
        if cfg.separate_residual_models {
            Self::new(keyframe_models)
        } else {
            Ok(Self::frozen(keyframe_models))
        }
    }

    /// The separate residual models after a final fit to every residual
    /// frame of the group, at storage precision; `None` when frozen.
    pub fn finish(
        mut self,
        frames: &[&FrameRepresentation],
        q: QuantConfig,
        cfg: &TrainConfig,
    ) -> Result<Option<EntropyModelSet>> {
        if self.adam.is_none() || frames.is_empty() {
            return Ok(None);
        }
        fit_entropy_models(
            &mut self.models,
            frames,
            q,
            cfg.entropy_refine_iters,
            cfg.lr_entropy,
        )?;
        self.models.round_to_f32();
        Ok(Some(self.models))
    }
}

/// Optimizes `{R_t, C_t}` for `frame` against the frozen buffer:
/// `B_t = B̂_1 + R_t` with the network fixed. Both grids start from the
/// previous residual frame (`R = 0`, `C = Ĉ_1` for the first one); the
/// residual models are trained alongside on the frame's rate.
/// `position` is the 1-based index inside the group.
pub fn train_residual_frame(
    dataset: &Dataset,
    frame: usize,
    position: usize,
    buffer: &KeyframeBuffer,
    residual: &mut ResidualState,
    cfg: &TrainConfig,
) -> Result<(FrameRepresentation, Vec<LogRow>)> {
    cfg.validate()?;
    ensure!(
        position >= 2,
        Structure,
        "residual frames start at position 2, got {position}"
    );
    ensure!(
        buffer.basis.level_count() == cfg.basis_res.len()
            && buffer
                .basis
                .levels()
                .iter()
                .zip(&cfg.basis_res)
                .all(|(l, r)| l.res() == *r),
        Structure,
        "buffer basis shapes {:?} do not match the configuration",
        buffer.basis.shapes()
    );
    let q = buffer.q;
    let targets = FrameTargets::new(dataset, frame)?;
    let mut rng = stage_rng(cfg.seed, frame);
    let (mut resid, mut coeff) = match &residual.previous {
        Some(p) => {
            ensure!(
                p.basis.same_shape(&buffer.basis) && p.coeff.same_shape(&buffer.coeff),
                Structure,
                "previous residual frame does not match the buffer"
            );
            (p.basis.clone(), p.coeff.clone())
        }
        None => (
            MultiResBasis::zeros(&buffer.basis.shapes(), *buffer.basis.bounds())?,
            buffer.coeff.clone(),
        ),
    };
    let rcfg = render_config(dataset, cfg);

    let mut st_resid = adam_states(&resid);
    let mut st_coeff = AdamState::new(coeff.len());
    let iters = cfg.residual_iters;
    let mut log = Vec::new();

    for it in 0..iters {
        let lambda = if cfg.joint {
            lambda_schedule(it, iters, cfg)
        } else {
            0.0
        };
        let (rays, colors) = targets.batch(cfg.rays_per_batch, &mut rng);
        let (rn, cn) = if cfg.joint {
            noisy(&resid, &coeff, q, &mut rng)
        } else {
            (resid.clone(), coeff.clone())
        };
        let full = compose_basis(&buffer.basis, &rn)?;
        let field = GridField::new(&full, &cn, &buffer.net)?;
        let (mse, mut g) = mse_and_grad(&field, &rays, &colors, &rcfg, rng.gen(), cfg.shards)?;

        let mut rate = RateLoss::default();
        if cfg.joint {
            let models = &mut residual.models;
            let (r, rg) = rate_loss_grad(
                &level_slices(&rn),
                cn.data(),
                q,
                &models.basis,
                &models.coeff,
            )?;
            rate = r;
            if lambda != 0.0 {
                for (gb, rb) in g.basis.iter_mut().zip(&rg.basis) {
                    add_scaled(gb, rb, lambda);
                }
                add_scaled(&mut g.coeff, &rg.coeff, lambda);
            }
            if let Some(adam) = &mut residual.adam {
                let mgrads = rg
                    .basis_models
                    .iter()
                    .chain(std::iter::once(&rg.coeff_model));
                for ((m, mg), st) in models.iter_mut().zip(mgrads).zip(adam) {
                    m.update_params(|p| adam_step(p, mg, st, cfg.lr_entropy))?;
                }
            }
        }
        let l1 = l1_loss_grad(&level_slices(&resid), cfg.lambda_l1, &mut g.basis);
        let loss = total_loss(mse, rate.total(), l1, lambda, cfg.lambda_l1)?;

        for ((level, gl), st) in resid
            .levels_mut()
            .iter_mut()
            .zip(&g.basis)
            .zip(&mut st_resid)
        {
            adam_step(level.data_mut(), gl, st, cfg.lr_grid)?;
        }
        adam_step(coeff.data_mut(), &g.coeff, &mut st_coeff, cfg.lr_grid)?;

        if should_log(it, iters, cfg) {
            log.push(LogRow {
                frame,
                stage: Stage::Residual,
                iteration: it,
                loss,
                mse,
                rate_bits: rate.total(),
                l1,
                psnr: psnr_of_mse(mse),
            });
        }
    }
    let rep = FrameRepresentation::new(FrameKind::Residual, resid, coeff, position)?;
    residual.previous = Some(rep.clone());
    Ok((rep, log))
}
