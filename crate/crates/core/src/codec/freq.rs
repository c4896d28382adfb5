use crate::error::{ensure, Result};
use crate::rate::ProbabilityModel;

pub const FREQ_BITS: u32 = 16;
pub const FREQ_TOTAL: u32 = 1 << FREQ_BITS;

/// Static symbol frequencies over `[0, S)` summing to [`FREQ_TOTAL`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    /// `cum[s]` is the total count of symbols below `s`; `cum[S] = FREQ_TOTAL`.
    cum: Vec<u32>,
}

impl FrequencyTable {
    /// Every count must be at least 1 and the counts must sum to [`FREQ_TOTAL`].
    pub fn from_counts(counts: &[u32]) -> Result<Self> {
        ensure!(
            !counts.is_empty(),
            Structure,
            "frequency table needs at least one symbol"
        );
        ensure!(
            counts.iter().all(|&c| c >= 1),
            Structure,
            "every symbol needs a nonzero count"
        );
        let mut cum = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0u64;
        cum.push(0);
        for &c in counts {
            acc += c as u64;
            ensure!(
                acc <= FREQ_TOTAL as u64,
                Structure,
                "counts exceed {FREQ_TOTAL}"
            );
            cum.push(acc as u32);
        }
        ensure!(
            acc == FREQ_TOTAL as u64,
            Structure,
            "counts sum to {acc}, expected {FREQ_TOTAL}"
        );
        Ok(FrequencyTable { cum })
    }

    /// Largest-remainder allocation of `FREQ_TOTAL` proportional to `weights`
    /// after reserving one count per symbol. Ties go to the smaller symbol.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let s = weights.len();
        ensure!(
            (1..=FREQ_TOTAL as usize).contains(&s),
            Range,
            "alphabet of {s} symbols does not fit a {FREQ_BITS}-bit frequency table"
        );
        ensure!(
            weights.iter().all(|w| w.is_finite() && *w >= 0.0),
            Domain,
            "frequency weights must be finite and nonnegative"
        );
        let sum: f64 = weights.iter().sum();
        let spare = (FREQ_TOTAL as usize - s) as f64;
        let mut counts = vec![1u32; s];
        let mut frac = vec![0.0; s];
        let mut assigned = 0u64;
        if sum > 0.0 {
            for i in 0..s {
                let exact = weights[i] / sum * spare;
                let fl = exact.floor();
                counts[i] += fl as u32;
                assigned += fl as u64;
                frac[i] = exact - fl;
            }
        } else {
            frac.iter_mut().for_each(|f| *f = 1.0);
        }
        let mut left = FREQ_TOTAL as u64 - s as u64 - assigned;
        if left > 0 {
            let mut order: Vec<usize> = (0..s).collect();
            order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
            let mut i = 0;
            while left > 0 {
                counts[order[i % s]] += 1;
                left -= 1;
                i += 1;
            }
        }
        Self::from_counts(&counts)
    }

    pub fn len(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn count(&self, s: usize) -> u32 {
        self.cum[s + 1] - self.cum[s]
    }

    pub fn cum(&self, s: usize) -> u32 {
        self.cum[s]
    }

    pub fn counts(&self) -> Vec<u32> {
        (0..self.len()).map(|s| self.count(s)).collect()
    }

    /// The symbol whose interval contains `target < FREQ_TOTAL`.
    pub fn find(&self, target: u32) -> usize {
        self.cum.partition_point(|&c| c <= target) - 1
    }

    /// Ideal code length of `s` under this table.
    pub fn bits(&self, s: usize) -> f64 {
        FREQ_BITS as f64 - (self.count(s) as f64).log2()
    }
}

/// Table for `channel` of `model` over symbols `k in [0, S)`, weighted by
/// `pmf(k + min_q)`.
pub fn build_freq_table<M: ProbabilityModel + ?Sized>(
    model: &M,
    channel: usize,
    alphabet: usize,
    min_q: i64,
) -> Result<FrequencyTable> {
    ensure!(
        alphabet >= 1,
        Structure,
        "alphabet must contain at least one symbol"
    );
    let w = (0..alphabet)
        .map(|k| model.pmf(channel, (k as i64 + min_q) as f64))
        .collect::<Result<Vec<_>>>()?;
    FrequencyTable::from_weights(&w)
}
