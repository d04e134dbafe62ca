//! Brute-force fully-associative LRU cache: the ground truth every
//! prediction is checked against. It shares no code with the stack-distance
//! engine.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::predict::CacheConfig;
use crate::stackdist::{to_line_addresses, DistanceSequence};
use crate::trace::AccessSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimResult {
    pub accesses: u64,
    pub hits: u64,
    pub compulsory_misses: u64,
    pub capacity_misses: u64,
}

impl SimResult {
    /// Capacity misses over non-compulsory accesses.
    pub fn capacity_miss_ratio(&self) -> f64 {
        let reuses = self.accesses - self.compulsory_misses;
        if reuses == 0 {
            0.0
        } else {
            self.capacity_misses as f64 / reuses as f64
        }
    }
}

/// Replays `seq` through an LRU cache of `cs / ls` lines of one line each.
pub fn simulate_lru(seq: &AccessSequence, cache: &CacheConfig) -> Result<SimResult> {
    let lines = to_line_addresses(seq, cache.line_size)?;
    let capacity = cache.capacity_lines() as usize;

    // line -> time of last use, and the inverse ordered by time.
    let mut resident: HashMap<u64, u64> = HashMap::with_capacity(capacity + 1);
    let mut by_age: BTreeMap<u64, u64> = BTreeMap::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut r = SimResult::default();

    for (now, &line) in lines.lines.iter().enumerate() {
        let now = now as u64;
        r.accesses += 1;
        if let Some(last) = resident.insert(line, now) {
            by_age.remove(&last);
            by_age.insert(now, line);
            r.hits += 1;
            continue;
        }
        if seen.insert(line) {
            r.compulsory_misses += 1;
        } else {
            r.capacity_misses += 1;
        }
        by_age.insert(now, line);
        if resident.len() > capacity {
            let (_, victim) = by_age.pop_first().expect("cache is non-empty");
            resident.remove(&victim);
        }
    }
    Ok(r)
}

/// Fraction of finite distances that are `≥ capacity_lines`.
pub fn empirical_miss_ratio(d: &DistanceSequence, capacity_lines: u64) -> Result<f64> {
    let (mut finite, mut misses) = (0u64, 0u64);
    for v in d.finite() {
        finite += 1;
        if v >= capacity_lines {
            misses += 1;
        }
    }
    if finite == 0 {
        return Err(Error::Empty("no finite stack distances"));
    }
    Ok(misses as f64 / finite as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stackdist::Distance::{Cold, Finite};
    use crate::trace::{gen_cyclic, AccessKind};

    fn cache(lines: u64) -> CacheConfig {
        CacheConfig::with_lines(lines, 64).unwrap()
    }

    #[test]
    fn cycle_that_fits() {
        let r = simulate_lru(&gen_cyclic(3, 300, 64), &cache(3)).unwrap();
        assert_eq!(
            r,
            SimResult {
                accesses: 300,
                hits: 297,
                compulsory_misses: 3,
                capacity_misses: 0
            }
        );
    }

    #[test]
    fn cycle_that_thrashes() {
        let r = simulate_lru(&gen_cyclic(3, 300, 64), &cache(2)).unwrap();
        assert_eq!(
            r,
            SimResult {
                accesses: 300,
                hits: 0,
                compulsory_misses: 3,
                capacity_misses: 297
            }
        );
        assert_eq!(r.capacity_miss_ratio(), 1.0);
    }

    #[test]
    fn bytes_in_one_line_hit() {
        let seq = AccessSequence::new(AccessKind::Data, vec![0, 8, 63, 64, 0]);
        let r = simulate_lru(&seq, &cache(1)).unwrap();
        assert_eq!((r.hits, r.compulsory_misses, r.capacity_misses), (2, 2, 1));
    }

    #[test]
    fn empirical_ratio_examples() {
        let d = DistanceSequence {
            kind: AccessKind::Data,
            line_size: 64,
            entries: vec![Cold, Finite(2), Finite(2), Finite(2)],
        };
        assert_eq!(empirical_miss_ratio(&d, 3).unwrap(), 0.0);
        assert_eq!(empirical_miss_ratio(&d, 2).unwrap(), 1.0);
        let cold = DistanceSequence {
            entries: vec![Cold],
            ..d
        };
        assert!(empirical_miss_ratio(&cold, 2).is_err());
    }
}
