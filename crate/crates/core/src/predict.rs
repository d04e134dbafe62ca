//! Miss-ratio prediction from a [`Characterization`].
//!
//! An access misses in a fully-associative LRU cache of `C` lines iff its
//! stack distance is at least `C`, so the capacity miss ratio is the mixture
//! tail `P(X ≥ C)`. Evaluating it touches only the atoms and one closed-form
//! CDF, never the samples the characterization was built from.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::characterize::Characterization;
use crate::stackdist::Outline;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub cache_size: u64,
    pub line_size: u64,
}

impl CacheConfig {
    pub fn new(cache_size: u64, line_size: u64) -> Result<Self> {
        if !line_size.is_power_of_two() {
            return Err(Error::LineSizeNotPowerOfTwo(line_size));
        }
        if cache_size < line_size || !cache_size.is_multiple_of(line_size) {
            return Err(Error::BadCacheConfig(format!(
                "cache size {cache_size} is not a positive multiple of the line size {line_size}"
            )));
        }
        Ok(Self {
            cache_size,
            line_size,
        })
    }

    /// A cache holding `lines` lines of `line_size` bytes.
    pub fn with_lines(lines: u64, line_size: u64) -> Result<Self> {
        let size = lines
            .checked_mul(line_size)
            .ok_or_else(|| Error::BadCacheConfig(format!("{lines} lines overflow")))?;
        Self::new(size, line_size)
    }

    /// Capacity in lines, `cs / ls`.
    pub fn capacity_lines(&self) -> u64 {
        self.cache_size / self.line_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionResult {
    pub capacity_miss_ratio: f64,
    pub capacity_lines: u64,
    pub line_size: u64,
    /// The cache is smaller than the size the characterization was refined
    /// for; the prediction is outside the range the fit was tuned to.
    pub below_threshold: bool,
}

fn check_line_size(c: &Characterization, line_size: u64) -> Result<()> {
    if c.line_size != line_size {
        return Err(Error::LineSizeMismatch {
            left: c.line_size,
            right: line_size,
        });
    }
    Ok(())
}

pub fn miss_ratio(c: &Characterization, cache: &CacheConfig) -> Result<PredictionResult> {
    check_line_size(c, cache.line_size)?;
    let lines = cache.capacity_lines();
    Ok(PredictionResult {
        capacity_miss_ratio: c.tail_at_least(lines as f64),
        capacity_lines: lines,
        line_size: c.line_size,
        below_threshold: lines < c.threshold_lines,
    })
}

/// Power-of-two cache sizes in `[cs_min, cs_max]`.
pub fn sweep_sizes(cs_min: u64, cs_max: u64) -> Result<Vec<u64>> {
    if cs_min == 0 || cs_min > cs_max {
        return Err(Error::BadCacheConfig(format!(
            "bad sweep range {cs_min}:{cs_max}"
        )));
    }
    let mut sizes = Vec::new();
    let mut cs = cs_min.next_power_of_two();
    while cs <= cs_max {
        sizes.push(cs);
        match cs.checked_mul(2) {
            Some(next) => cs = next,
            None => break,
        }
    }
    Ok(sizes)
}

/// Miss ratio at every power-of-two cache size in `[cs_min, cs_max]`.
pub fn sweep(c: &Characterization, cs_min: u64, cs_max: u64) -> Result<Vec<(u64, f64)>> {
    let sizes = sweep_sizes(cs_min.max(c.line_size), cs_max)?;
    sizes
        .into_iter()
        .map(|cs| {
            let cache = CacheConfig::new(cs, c.line_size)?;
            Ok((cs, miss_ratio(c, &cache)?.capacity_miss_ratio))
        })
        .collect()
}

/// `n` mixture draws sorted in descending order, comparable to an empirical
/// outline.
pub fn monte_carlo_outline(c: &Characterization, n: usize, seed: u64) -> Outline {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Outline::from_values((0..n).map(|_| c.draw(&mut rng)).collect())
}

/// Per-size miss ratios of two characterizations: `(cs, ratio_a, ratio_b)`.
pub fn compare(
    a: &Characterization,
    b: &Characterization,
    cs_min: u64,
    cs_max: u64,
) -> Result<Vec<(u64, f64, f64)>> {
    check_line_size(a, b.line_size)?;
    let ra = sweep(a, cs_min, cs_max)?;
    let rb = sweep(b, cs_min, cs_max)?;
    Ok(ra
        .into_iter()
        .zip(rb)
        .map(|((cs, x), (_, y))| (cs, x, y))
        .collect())
}

/// Largest absolute miss-ratio difference over the sweep grid.
pub fn divergence(
    a: &Characterization,
    b: &Characterization,
    cs_min: u64,
    cs_max: u64,
) -> Result<f64> {
    Ok(compare(a, b, cs_min, cs_max)?
        .into_iter()
        .map(|(_, x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
