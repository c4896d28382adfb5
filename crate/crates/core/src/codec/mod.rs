//! Real compression path: integer quantization, static-table range coding
//! and the `.gof` group-of-frames container.

mod freq;
mod gof;
mod quantize;
mod range;

pub use freq::{build_freq_table, FrequencyTable, FREQ_BITS, FREQ_TOTAL};
pub use gof::{
    decode_gof, encode_gof, reconstruct_gof, GofBitstream, GofHeader, GofReader, GofRepresentation,
    GridStats, MAGIC, VERSION,
};
pub use quantize::{
    dequantize_grid, quantize_grid, quantize_grid_with_limit, reconstruct_grid, QuantizedGrid,
    DEFAULT_MAX_ALPHABET,
};
pub use range::{range_decode, range_encode, RangeDecoder, RangeEncoder, FLUSH_BYTES};
