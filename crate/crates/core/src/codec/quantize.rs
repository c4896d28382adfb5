use crate::error::{ensure, Result};
use crate::field::{Aabb, FeatureGrid};
use crate::rate::{round_half_away, ProbabilityModel, QuantConfig};

/// Largest alphabet a single grid may use unless configured otherwise.
pub const DEFAULT_MAX_ALPHABET: usize = 1 << 16;

/// Integer symbols of one grid after min-shifting: `value = (symbol + min_q) / q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedGrid {
    pub res: [usize; 3],
    pub channels: usize,
    pub bounds: Aabb,
    pub q: QuantConfig,
    pub min_q: i64,
    pub symbols: Vec<u32>,
}

impl QuantizedGrid {
    /// `max symbol + 1` (1 for an empty grid, so tables stay well-formed).
    pub fn alphabet(&self) -> usize {
        self.symbols
            .iter()
            .copied()
            .max()
            .map_or(1, |m| m as usize + 1)
    }

    /// `-sum log2 pmf(symbol + min_q)` with channel `e % C` for element `e`:
    /// the rate estimate evaluated at the integer symbols.
    pub fn estimated_bits<M: ProbabilityModel + ?Sized>(&self, model: &M) -> Result<f64> {
        ensure!(
            model.channels() == self.channels,
            Structure,
            "grid has {} channels, model {}",
            self.channels,
            model.channels()
        );
        let mut bits = 0.0;
        for (e, &s) in self.symbols.iter().enumerate() {
            bits += model.bits(e % self.channels, (s as i64 + self.min_q) as f64)?;
        }
        Ok(bits)
    }
}

/// `symbols = Q(q x) - Q(q min x)` with the project rounding rule.
pub fn quantize_grid(x: &FeatureGrid, q: QuantConfig) -> Result<QuantizedGrid> {
    quantize_grid_with_limit(x, q, DEFAULT_MAX_ALPHABET)
}

pub fn quantize_grid_with_limit(
    x: &FeatureGrid,
    q: QuantConfig,
    max_alphabet: usize,
) -> Result<QuantizedGrid> {
    let data = x.data();
    ensure!(
        data.iter().all(|v| v.is_finite()),
        Domain,
        "cannot quantize non-finite grid values"
    );
    let rounded: Vec<i64> = data
        .iter()
        .map(|&v| round_half_away(q.q() * v) as i64)
        .collect();
    let min_q = rounded.iter().copied().min().unwrap_or(0);
    let max_q = rounded.iter().copied().max().unwrap_or(0);
    let alphabet = (max_q - min_q) as u128 + 1;
    ensure!(
        alphabet <= max_alphabet as u128,
        Range,
        "grid {:?}x{} needs {} symbols at q = {} (values {:.4}..{:.4}), limit is {}",
        x.res(),
        x.channels(),
        alphabet,
        q.q(),
        min_q as f64 / q.q(),
        max_q as f64 / q.q(),
        max_alphabet
    );
    Ok(QuantizedGrid {
        res: x.res(),
        channels: x.channels(),
        bounds: *x.bounds(),
        q,
        min_q,
        symbols: rounded.iter().map(|&r| (r - min_q) as u32).collect(),
    })
}

pub fn dequantize_grid(g: &QuantizedGrid) -> Result<FeatureGrid> {
    let q = g.q.q();
    let data = g
        .symbols
        .iter()
        .map(|&s| (s as i64 + g.min_q) as f64 / q)
        .collect();
    FeatureGrid::from_data(g.res, g.channels, data, g.bounds)
}

/// `dequantize(quantize(x))`: what a decoder reconstructs.
pub fn reconstruct_grid(x: &FeatureGrid, q: QuantConfig) -> Result<FeatureGrid> {
    dequantize_grid(&quantize_grid(x, q)?)
}
