//! Differentiable compression surrogate: simulated quantization and learned
//! entropy models that turn grid values into bit estimates.

mod entropy;
mod loss;
mod quant;

pub use entropy::{EntropyModel, ProbabilityModel, UniformModel, DEFAULT_DIMS, INIT_SCALE, P_MIN};
pub use loss::{grid_bits, rate_loss, rate_loss_grad, EntropyModelSet, RateGrads, RateLoss};
pub use quant::{round_half_away, simulate_quantize, simulate_quantize_in_place, QuantConfig};
