//! 32-bit range coder with byte-wise carry propagation.
//!
//! The encoder keeps a 33-bit `low`; a carry out of bit 32 is resolved by
//! buffering the last non-0xFF byte (`cache`) together with a run of pending
//! 0xFF bytes. The first byte such a coder emits is always zero, so it is
//! not stored. On finish, `low` is rounded up to a multiple of 2^24 inside
//! the final interval and only its top byte is written; the decoder reads
//! zeros past the end of its input. An empty message codes to one zero byte.

use super::freq::{FrequencyTable, FREQ_BITS};
use crate::error::{ensure, Result};

const TOP: u32 = 1 << 24;

/// Length of the coded empty message.
pub const FLUSH_BYTES: usize = 1;

#[derive(Debug)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
    started: bool,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
            started: false,
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut temp = self.cache;
            loop {
                if self.started {
                    self.out.push(temp.wrapping_add(carry));
                } else {
                    debug_assert_eq!(temp.wrapping_add(carry), 0);
                    self.started = true;
                }
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = ((self.low as u32) << 8) as u64;
    }

    pub fn encode(&mut self, table: &FrequencyTable, symbol: usize) -> Result<()> {
        ensure!(
            symbol < table.len(),
            Range,
            "symbol {symbol} outside table alphabet {}",
            table.len()
        );
        let r = self.range >> FREQ_BITS;
        self.low += r as u64 * table.cum(symbol) as u64;
        self.range = r * table.count(symbol);
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
        Ok(())
    }

    pub fn finish(mut self) -> Vec<u8> {
        // range >= 2^24 here, so the rounded value stays inside the interval.
        let step = TOP as u64;
        self.low = self.low.div_ceil(step) * step;
        self.shift_low();
        self.shift_low();
        self.out
    }
}

#[derive(Debug)]
pub struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self> {
        let mut d = RangeDecoder {
            code: 0,
            range: u32::MAX,
            input,
            pos: 0,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next_byte() as u32;
        }
        Ok(d)
    }

    /// Input bytes, then zeros.
    fn next_byte(&mut self) -> u8 {
        let b = self.input.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    pub fn decode(&mut self, table: &FrequencyTable) -> Result<usize> {
        let r = self.range >> FREQ_BITS;
        let target = self.code / r;
        ensure!(
            target < super::freq::FREQ_TOTAL,
            Format,
            "corrupted range-coded stream"
        );
        let s = table.find(target);
        self.code -= r * table.cum(s);
        self.range = r * table.count(s);
        while self.range < TOP {
            self.code = (self.code << 8) | self.next_byte() as u32;
            self.range <<= 8;
        }
        Ok(s)
    }

    /// Bytes consumed so far, counting implicit trailing zeros. A complete
    /// decode of a well-formed stream consumes at least the whole input.
    pub fn position(&self) -> usize {
        self.pos
    }
}

/// Codes `symbols[i]` with `tables[i % tables.len()]`.
pub fn range_encode(symbols: &[u32], tables: &[FrequencyTable]) -> Result<Vec<u8>> {
    ensure!(
        !tables.is_empty() || symbols.is_empty(),
        Structure,
        "no frequency tables"
    );
    let mut enc = RangeEncoder::new();
    for (i, &s) in symbols.iter().enumerate() {
        enc.encode(&tables[i % tables.len()], s as usize)?;
    }
    Ok(enc.finish())
}

/// Inverse of [`range_encode`]; fails on trailing input. Truncation is
/// caught by the length and checksum of the enclosing chunk.
pub fn range_decode(bytes: &[u8], tables: &[FrequencyTable], count: usize) -> Result<Vec<u32>> {
    ensure!(
        !tables.is_empty() || count == 0,
        Structure,
        "no frequency tables"
    );
    let mut dec = RangeDecoder::new(bytes)?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        out.push(dec.decode(&tables[i % tables.len()])? as u32);
    }
    ensure!(
        dec.position() >= bytes.len(),
        Format,
        "range-coded stream has {} trailing bytes",
        bytes.len() - dec.position()
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_message() {
        let t = FrequencyTable::from_weights(&[1.0]).unwrap();
        let b = range_encode(&[], std::slice::from_ref(&t)).unwrap();
        assert_eq!(b, vec![0; FLUSH_BYTES]);
        assert!(range_decode(&[], std::slice::from_ref(&t), 0)
            .unwrap()
            .is_empty());
        assert!(range_decode(&b, &[t], 0).unwrap().is_empty());
    }

    #[test]
    fn near_shannon_bound() {
        let t = FrequencyTable::from_weights(&[0.5, 0.25, 0.25]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 10_000;
        let syms: Vec<u32> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                if u < 0.5 {
                    0
                } else if u < 0.75 {
                    1
                } else {
                    2
                }
            })
            .collect();
        let b = range_encode(&syms, std::slice::from_ref(&t)).unwrap();
        let bound_bytes = 1.5 * n as f64 / 8.0;
        assert!(
            (b.len() as f64) <= bound_bytes * 1.01 + 8.0,
            "{} vs {bound_bytes}",
            b.len()
        );
        assert_eq!(range_decode(&b, &[t], n).unwrap(), syms);
    }

    #[test]
    fn carry_heavy_stream() {
        // A near-certain symbol drives `low` through long 0xFF runs.
        let t = FrequencyTable::from_counts(&[65535, 1]).unwrap();
        let mut syms = vec![0u32; 5000];
        for i in (0..5000).step_by(701) {
            syms[i] = 1;
        }
        let b = range_encode(&syms, std::slice::from_ref(&t)).unwrap();
        assert_eq!(range_decode(&b, &[t], syms.len()).unwrap(), syms);
    }

    #[test]
    fn overhead_is_small() {
        // Payload stays within 32 bits of the table cross-entropy.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let s = rng.gen_range(1..40);
            let w: Vec<f64> = (0..s).map(|_| rng.gen::<f64>().powi(3)).collect();
            let t = FrequencyTable::from_weights(&w).unwrap();
            let n = rng.gen_range(0..200);
            let syms: Vec<u32> = (0..n).map(|_| rng.gen_range(0..s) as u32).collect();
            let ce: f64 = syms.iter().map(|&x| t.bits(x as usize)).sum();
            let b = range_encode(&syms, std::slice::from_ref(&t)).unwrap();
            assert!(
                (b.len() * 8) as f64 <= ce + 32.0,
                "{} bytes vs {ce} bits",
                b.len()
            );
            assert_eq!(range_decode(&b, &[t], n).unwrap(), syms);
        }
    }

    #[test]
    fn fuzz_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..1000 {
            let ntab = rng.gen_range(1..4);
            let tables: Vec<FrequencyTable> = (0..ntab)
                .map(|_| {
                    let s = rng.gen_range(1..300);
                    let skew: f64 = rng.gen_range(0.0..4.0);
                    let w: Vec<f64> = (0..s).map(|_| rng.gen::<f64>().powf(skew * 3.0)).collect();
                    FrequencyTable::from_weights(&w).unwrap()
                })
                .collect();
            let n = rng.gen_range(0..400);
            let syms: Vec<u32> = (0..n)
                .map(|i| rng.gen_range(0..tables[i % ntab].len()) as u32)
                .collect();
            let b = range_encode(&syms, &tables).unwrap();
            assert_eq!(range_decode(&b, &tables, n).unwrap(), syms);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let t = FrequencyTable::from_weights(&[1.0, 1.0]).unwrap();
        assert!(range_encode(&[2], std::slice::from_ref(&t)).is_err());
        let b = range_encode(&[0, 1, 1, 0, 1, 1, 1, 0, 0, 1], std::slice::from_ref(&t)).unwrap();
        let mut long = b.clone();
        long.extend_from_slice(&[7; 6]);
        assert!(range_decode(&long, &[t], 10).is_err());
    }
}
