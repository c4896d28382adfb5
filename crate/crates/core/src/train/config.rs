use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rate::QuantConfig;

/// Every knob of the training pipeline. Missing TOML keys take the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Rate weight at the start of every stage.
    pub lambda_rate: f64,
    /// Rate weight reached on the last iteration of a stage.
    pub lambda_rate_final: f64,
    /// Fraction of a stage run at `lambda_rate` before the linear decay.
    pub lambda_decay_start: f64,
    /// Weight of the mean absolute residual.
    pub lambda_l1: f64,
    pub q: f64,
    /// Quantization parameters visited by an RD sweep.
    pub q_sweep: Vec<f64>,
    /// Frames per group (keyframe included).
    pub gof_len: usize,
    /// Train with simulated quantization and the rate term. When false the
    /// grids are fitted for reconstruction only and the entropy models are
    /// fitted afterwards.
    pub joint: bool,
    /// Code residual frames with their own model set (trained during the
    /// residual stages) instead of the frozen keyframe models.
    pub separate_residual_models: bool,

    pub lr_grid: f64,
    pub lr_net: f64,
    pub lr_entropy: f64,
    pub keyframe_iters: usize,
    pub residual_iters: usize,
    /// Model-only iterations fitting the entropy models to the final
    /// keyframe grids before they are frozen.
    pub entropy_refine_iters: usize,
    pub rays_per_batch: usize,
    pub samples: usize,
    pub seed: u64,
    /// Fixed number of gradient partial sums, reduced in order; results do
    /// not depend on the thread count.
    pub shards: usize,

    /// Basis level resolutions, strictly increasing.
    pub basis_res: Vec<[usize; 3]>,
    pub basis_channels: usize,
    pub coeff_res: [usize; 3],
    pub hidden: Vec<usize>,
    pub sh_degree: usize,
    /// Basis entries start uniform in `±basis_init`.
    pub basis_init: f64,
    /// Coefficient entries start uniform in `1 ± coeff_init`.
    pub coeff_init: f64,
    /// Initial bias of the density pre-activation.
    pub density_bias: f64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_rate: 1e-6,
            lambda_rate_final: 1e-7,
            lambda_decay_start: 0.5,
            lambda_l1: 1e-6,
            q: 10.0,
            q_sweep: vec![1.0, 2.0, 5.0, 10.0],
            gof_len: 10,
            joint: true,
            separate_residual_models: false,
            lr_grid: 2e-2,
            lr_net: 1e-3,
            lr_entropy: 1e-3,
            keyframe_iters: 4000,
            residual_iters: 1500,
            entropy_refine_iters: 500,
            rays_per_batch: 4096,
            samples: 128,
            seed: 0,
            shards: 4,
            basis_res: [8, 12, 16, 24, 32, 48].map(|n| [n; 3]).to_vec(),
            basis_channels: 4,
            coeff_res: [48; 3],
            hidden: vec![64, 64],
            sh_degree: 2,
            basis_init: 0.1,
            coeff_init: 0.1,
            density_bias: -2.0,
            log_every: 50,
        }
    }
}

impl TrainConfig {
    /// A scaled-down configuration that trains a toy scene in seconds on
    /// one core. Loss weights, q values and the group length keep their
    /// defaults.
    pub fn small() -> Self {
        TrainConfig {
            lr_entropy: 1e-2,
            keyframe_iters: 400,
            residual_iters: 150,
            entropy_refine_iters: 300,
            rays_per_batch: 256,
            samples: 32,
            basis_res: [4, 6, 8, 10, 12, 16].map(|n| [n; 3]).to_vec(),
            basis_channels: 2,
            coeff_res: [6; 3],
            hidden: vec![32],
            log_every: 25,
            ..Default::default()
        }
    }

    pub fn quant(&self) -> Result<QuantConfig> {
        QuantConfig::new(self.q)
    }

    /// One model per basis level plus one for the coefficients.
    pub fn entropy_model_count(&self) -> usize {
        self.basis_res.len() + 1
    }

    pub fn coeff_channels(&self) -> usize {
        self.basis_res.len() * self.basis_channels
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_rate", self.lambda_rate),
            ("lambda_rate_final", self.lambda_rate_final),
            ("lambda_l1", self.lambda_l1),
        ] {
            ensure!(
                v.is_finite() && v >= 0.0,
                Config,
                "{name} must be >= 0, got {v}"
            );
        }
        ensure!(
            self.lambda_rate_final <= self.lambda_rate,
            Config,
            "lambda_rate_final must not exceed lambda_rate"
        );
        ensure!(
            (0.0..=1.0).contains(&self.lambda_decay_start),
            Config,
            "lambda_decay_start must lie in [0, 1]"
        );
        QuantConfig::new(self.q)?;
        for &q in &self.q_sweep {
            QuantConfig::new(q)?;
        }
        ensure!(self.gof_len >= 1, Config, "gof_len must be at least 1");
        for (name, v) in [
            ("lr_grid", self.lr_grid),
            ("lr_net", self.lr_net),
            ("lr_entropy", self.lr_entropy),
        ] {
            ensure!(
                v.is_finite() && v >= 0.0,
                Config,
                "{name} must be >= 0, got {v}"
            );
        }
        ensure!(
            self.rays_per_batch > 0,
            Config,
            "rays_per_batch must be positive"
        );
        ensure!(self.samples > 0, Config, "samples must be positive");
        ensure!(self.shards > 0, Config, "shards must be positive");
        ensure!(
            !self.basis_res.is_empty(),
            Config,
            "need at least one basis level"
        );
        ensure!(
            self.basis_res.iter().flatten().all(|&n| n >= 2)
                && self.coeff_res.iter().all(|&n| n >= 2),
            Config,
            "grid resolutions must be at least 2 per axis"
        );
        ensure!(
            self.basis_channels > 0,
            Config,
            "basis_channels must be positive"
        );
        ensure!(self.sh_degree <= 2, Config, "sh_degree must be at most 2");
        ensure!(self.log_every > 0, Config, "log_every must be positive");
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Rate weight at `iteration` of a stage of `total` iterations: constant
/// `lambda_rate` for the first `lambda_decay_start` fraction, then linear
/// down to `lambda_rate_final` on the last iteration.
pub fn lambda_schedule(iteration: usize, total: usize, cfg: &TrainConfig) -> f64 {
    let (hi, lo) = (cfg.lambda_rate, cfg.lambda_rate_final);
    if total <= 1 {
        return hi;
    }
    let last = (total - 1) as f64;
    let start = cfg.lambda_decay_start * last;
    let it = (iteration as f64).min(last);
    if it <= start || last <= start {
        return hi;
    }
    hi + (lo - hi) * (it - start) / (last - start)
}
