//! LRU stack distances at cache-line granularity.
//!
//! The distance of an access to line `L` is the number of distinct lines
//! touched strictly between it and the previous access to `L`; a first touch
//! is [`Distance::Cold`]. Under this convention an access misses in a
//! fully-associative LRU cache of `C` lines iff its distance is `>= C`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::ops::Range;

use crate::trace::{AccessKind, AccessSequence};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distance {
    Cold,
    Finite(u64),
}

impl Distance {
    pub fn finite(self) -> Option<u64> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Cold => None,
        }
    }

    pub fn is_cold(self) -> bool {
        matches!(self, Distance::Cold)
    }
}

/// Line addresses (`address / line_size`) of one access stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineSequence {
    pub kind: AccessKind,
    pub line_size: u64,
    pub lines: Vec<u64>,
}

impl LineSequence {
    /// Wraps raw line numbers, treating them as data lines of one byte.
    pub fn from_lines(lines: Vec<u64>) -> Self {
        Self {
            kind: AccessKind::Data,
            line_size: 1,
            lines,
        }
    }
}

/// One entry per access of the source sequence, in access order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceSequence {
    pub kind: AccessKind,
    pub line_size: u64,
    pub entries: Vec<Distance>,
}

impl DistanceSequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn finite(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().filter_map(|d| d.finite())
    }
}

/// Finite stack distances in line units with their collection metadata.
///
/// Samples are stored as reals: measured distances are integral, but
/// synthetic sets drawn straight from a continuous model are not.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<f64>,
    pub line_size: u64,
    pub sampling_interval: u64,
    pub kind: AccessKind,
    pub window: (u64, u64),
}

impl SampleSet {
    /// An exhaustive sample set over `samples.len()` accesses.
    pub fn from_values(samples: Vec<f64>, line_size: u64, kind: AccessKind) -> Self {
        let n = samples.len() as u64;
        Self {
            samples,
            line_size,
            sampling_interval: 1,
            kind,
            window: (0, n),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Serializes as a commented header plus one distance per line.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# line_size={} interval={} kind={} window={}:{}\n",
            self.line_size,
            self.sampling_interval,
            self.kind.letter(),
            self.window.0,
            self.window.1
        );
        for s in &self.samples {
            writeln!(out, "{s}").unwrap();
        }
        out
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut set = SampleSet::from_values(Vec::new(), 1, AccessKind::Data);
        let mut saw_header = false;
        for (i, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            let t = line.trim();
            let lineno = i + 1;
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                if !saw_header {
                    parse_header(rest, &mut set, lineno)?;
                    saw_header = true;
                }
                continue;
            }
            let v: f64 = t.parse().map_err(|_| Error::BadSampleFile {
                line: lineno,
                reason: format!("{t:?} is not a number"),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::BadSampleFile {
                    line: lineno,
                    reason: format!("distance {v} must be finite and non-negative"),
                });
            }
            set.samples.push(v);
        }
        if !saw_header {
            set.window = (0, set.samples.len() as u64);
        }
        Ok(set)
    }
}

fn parse_header(text: &str, set: &mut SampleSet, line: usize) -> Result<()> {
    let bad = |reason: String| Error::BadSampleFile { line, reason };
    for field in text.split_whitespace() {
        let Some((key, value)) = field.split_once('=') else {
            continue;
        };
        match key {
            "line_size" => {
                set.line_size = value
                    .parse()
                    .map_err(|_| bad(format!("bad line_size {value:?}")))?
            }
            "interval" => {
                set.sampling_interval = value
                    .parse()
                    .map_err(|_| bad(format!("bad interval {value:?}")))?
            }
            "kind" => {
                set.kind = match value {
                    "i" => AccessKind::Instruction,
                    "d" => AccessKind::Data,
                    _ => return Err(bad(format!("bad kind {value:?}"))),
                }
            }
            "window" => {
                let parsed = value
                    .split_once(':')
                    .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)));
                set.window = parsed.ok_or_else(|| bad(format!("bad window {value:?}")))?;
            }
            _ => {}
        }
    }
    Ok(())
}

/// Distances sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Outline {
    pub values: Vec<f64>,
}

impl Outline {
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn to_line_addresses(seq: &AccessSequence, line_size: u64) -> Result<LineSequence> {
    if !line_size.is_power_of_two() {
        return Err(Error::LineSizeNotPowerOfTwo(line_size));
    }
    let shift = line_size.trailing_zeros();
    Ok(LineSequence {
        kind: seq.kind,
        line_size,
        lines: seq.addresses.iter().map(|a| a >> shift).collect(),
    })
}

/// Fenwick tree over last-access slots. A set bit at slot `s` means some line
/// was last touched at slot `s`; slots are handed out in access order.
struct SlotTree {
    tree: Vec<u32>,
}

impl SlotTree {
    fn new(capacity: usize) -> Self {
        Self {
            tree: vec![0; capacity + 1],
        }
    }

    fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    fn add(&mut self, slot: usize, delta: i32) {
        let mut i = slot + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
        }
    }

    /// Number of set slots in `0..=slot`.
    fn prefix(&self, slot: usize) -> u64 {
        let mut i = slot + 1;
        let mut sum = 0u64;
        while i > 0 {
            sum += self.tree[i] as u64;
            i &= i - 1;
        }
        sum
    }
}

/// Exact stack distances in O(N log M) for N accesses over M distinct lines.
///
/// Each live line owns the slot of its most recent access. The distance of a
/// reuse is the number of occupied slots after the line's own slot. When the
/// slot space runs out the live slots are renumbered densely, so the tree
/// stays within a constant factor of M.
pub fn compute_distances(lines: &LineSequence) -> DistanceSequence {
    const MIN_CAPACITY: usize = 1024;

    let mut slot_of: HashMap<u64, usize> = HashMap::new();
    let mut tree = SlotTree::new(MIN_CAPACITY.min(lines.lines.len().max(1)));
    let mut next_slot = 0usize;
    let mut entries = Vec::with_capacity(lines.lines.len());

    for &line in &lines.lines {
        if next_slot == tree.capacity() {
            let live = slot_of.len();
            let capacity = (2 * live).max(MIN_CAPACITY);
            let mut order: Vec<(usize, u64)> = slot_of.iter().map(|(&l, &s)| (s, l)).collect();
            order.sort_unstable();
            tree = SlotTree::new(capacity);
            for (new_slot, &(_, l)) in order.iter().enumerate() {
                slot_of.insert(l, new_slot);
                tree.add(new_slot, 1);
            }
            next_slot = live;
        }

        let live = slot_of.len() as u64;
        let distance = match slot_of.get(&line) {
            Some(&slot) => {
                let d = live - tree.prefix(slot);
                tree.add(slot, -1);
                Distance::Finite(d)
            }
            None => Distance::Cold,
        };
        slot_of.insert(line, next_slot);
        tree.add(next_slot, 1);
        next_slot += 1;
        entries.push(distance);
    }

    DistanceSequence {
        kind: lines.kind,
        line_size: lines.line_size,
        entries,
    }
}

/// Quadratic reference: literally collects the set of lines between reuses.
pub fn compute_distances_bruteforce(lines: &LineSequence) -> DistanceSequence {
    let seq = &lines.lines;
    let entries = (0..seq.len())
        .map(|i| {
            let prev = seq[..i].iter().rposition(|&l| l == seq[i]);
            match prev {
                None => Distance::Cold,
                Some(p) => {
                    let between: HashSet<u64> = seq[p + 1..i].iter().copied().collect();
                    Distance::Finite(between.len() as u64)
                }
            }
        })
        .collect();
    DistanceSequence {
        kind: lines.kind,
        line_size: lines.line_size,
        entries,
    }
}

/// Keeps the finite distances at access ordinals `≡ offset (mod interval)`.
pub fn sample_distances(
    d: &DistanceSequence,
    interval: u64,
    offset: u64,
    line_size: u64,
) -> Result<SampleSet> {
    sample_window(d, 0..d.len() as u64, interval, offset, line_size)
}

/// Like [`sample_distances`], restricted to the access ordinals in `window`.
/// Ordinals are counted from the start of the full sequence.
pub fn sample_window(
    d: &DistanceSequence,
    window: Range<u64>,
    interval: u64,
    offset: u64,
    line_size: u64,
) -> Result<SampleSet> {
    if interval == 0 {
        return Err(Error::BadConfig(
            "sampling interval must be positive".into(),
        ));
    }
    if offset >= interval {
        return Err(Error::BadConfig(format!(
            "sampling offset {offset} must be below the interval {interval}"
        )));
    }
    let end = window.end.min(d.len() as u64);
    let start = window.start.min(end);
    let samples = (start..end)
        .filter(|i| i % interval == offset)
        .filter_map(|i| d.entries[i as usize].finite())
        .map(|v| v as f64)
        .collect();
    Ok(SampleSet {
        samples,
        line_size,
        sampling_interval: interval,
        kind: d.kind,
        window: (start, end),
    })
}

pub fn outline(s: &SampleSet) -> Outline {
    Outline::from_values(s.samples.clone())
}

/// `(cold accesses, total accesses)`; cold accesses are compulsory misses.
pub fn cold_stats(d: &DistanceSequence) -> (u64, u64) {
    let cold = d.entries.iter().filter(|e| e.is_cold()).count() as u64;
    (cold, d.len() as u64)
}
