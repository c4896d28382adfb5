// Negated float comparisons are deliberate: they also reject NaN.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod codec;
pub mod error;
pub mod field;
pub mod raster;
pub mod rate;
pub mod render;
pub mod scene;
pub mod train;

pub use error::{Error, Result};
