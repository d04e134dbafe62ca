//! Memory-access traces: the binary and text file formats, and synthetic
//! generators used as fixtures and as inputs with known stack distances.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//!      0     8  magic "STKTRC01"
//!      8     1  kind (0 = instruction, 1 = data)
//!      9     7  zero padding
//!     16     8  record count (u64)
//!     24   8*n  addresses (u64)
//! ```
//!
//! The text format holds one address per line, decimal or `0x`-prefixed hex.
//! Lines starting with `#` and blank lines are ignored.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::characterize::Characterization;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"STKTRC01";
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AccessKind {
    Instruction,
    #[default]
    Data,
}

impl AccessKind {
    pub fn code(self) -> u8 {
        match self {
            AccessKind::Instruction => 0,
            AccessKind::Data => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(AccessKind::Instruction),
            1 => Some(AccessKind::Data),
            _ => None,
        }
    }

    /// Single-letter tag used in sample CSV headers.
    pub fn letter(self) -> char {
        match self {
            AccessKind::Instruction => 'i',
            AccessKind::Data => 'd',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AccessKind::Instruction => "instruction",
            AccessKind::Data => "data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Binary,
    Text,
}

/// An ordered stream of byte addresses of one access kind.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AccessSequence {
    pub kind: AccessKind,
    pub addresses: Vec<u64>,
}

impl AccessSequence {
    pub fn new(kind: AccessKind, addresses: Vec<u64>) -> Self {
        Self { kind, addresses }
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceHeader {
    pub version: u8,
    pub kind: AccessKind,
    pub count: u64,
}

impl TraceHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut buf = [0u8; HEADER_LEN];
        buf[..8].copy_from_slice(MAGIC);
        buf[8] = self.kind.code();
        buf[16..24].copy_from_slice(&self.count.to_le_bytes());
        buf
    }

    pub fn decode(buf: &[u8; HEADER_LEN]) -> Result<Self> {
        if &buf[..8] != MAGIC {
            return Err(Error::BadHeader {
                offset: 0,
                reason: format!("bad magic {:?}", String::from_utf8_lossy(&buf[..8])),
            });
        }
        let kind = AccessKind::from_code(buf[8]).ok_or_else(|| Error::BadHeader {
            offset: 8,
            reason: format!("unknown access kind {}", buf[8]),
        })?;
        if let Some(i) = buf[9..16].iter().position(|&b| b != 0) {
            return Err(Error::BadHeader {
                offset: 9 + i as u64,
                reason: "non-zero padding".into(),
            });
        }
        let count = u64::from_le_bytes(buf[16..24].try_into().unwrap());
        // The version lives in the last magic byte ("01").
        Ok(Self {
            version: 1,
            kind,
            count,
        })
    }
}

/// Reads a full trace. For the text format the access kind cannot be
/// recovered from the file and defaults to [`AccessKind::Data`].
pub fn read_trace<R: Read>(source: R, format: TraceFormat) -> Result<AccessSequence> {
    match format {
        TraceFormat::Binary => read_binary(source),
        TraceFormat::Text => read_text(source, AccessKind::default()),
    }
}

/// Sniffs the magic bytes to choose between the two formats.
pub fn detect_format(prefix: &[u8]) -> TraceFormat {
    if prefix.len() >= MAGIC.len() && &prefix[..MAGIC.len()] == MAGIC {
        TraceFormat::Binary
    } else {
        TraceFormat::Text
    }
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn read_binary<R: Read>(source: R) -> Result<AccessSequence> {
    let mut r = BufReader::new(source);
    let mut head = [0u8; HEADER_LEN];
    let got = read_exact_or_eof(&mut r, &mut head)?;
    if got < HEADER_LEN {
        return Err(Error::BadHeader {
            offset: got as u64,
            reason: format!("header needs {HEADER_LEN} bytes, file has {got}"),
        });
    }
    let header = TraceHeader::decode(&head)?;

    // Cap the pre-allocation so a corrupt count cannot exhaust memory.
    let mut addresses = Vec::with_capacity(header.count.min(1 << 24) as usize);
    let mut rec = [0u8; 8];
    for i in 0..header.count {
        let n = read_exact_or_eof(&mut r, &mut rec)?;
        if n < 8 {
            return Err(Error::TruncatedTrace {
                expected: header.count,
                found: i,
                offset: HEADER_LEN as u64 + i * 8 + n as u64,
            });
        }
        addresses.push(u64::from_le_bytes(rec));
    }
    let trailing = read_exact_or_eof(&mut r, &mut rec)?;
    if trailing > 0 {
        return Err(Error::BadHeader {
            offset: 16,
            reason: format!(
                "count says {} records but more data follows at byte {}",
                header.count,
                HEADER_LEN as u64 + header.count * 8
            ),
        });
    }
    Ok(AccessSequence::new(header.kind, addresses))
}

/// Parses one decimal or `0x`-prefixed hexadecimal address.
pub fn parse_address(text: &str) -> Option<u64> {
    if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        text.parse().ok()
    }
}

pub fn read_text<R: Read>(source: R, kind: AccessKind) -> Result<AccessSequence> {
    let mut addresses = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let addr = parse_address(t).ok_or_else(|| Error::BadAddress {
            line: i + 1,
            text: t.to_string(),
        })?;
        addresses.push(addr);
    }
    Ok(AccessSequence::new(kind, addresses))
}

pub fn write_trace<W: Write>(seq: &AccessSequence, format: TraceFormat, sink: W) -> Result<()> {
    let mut w = BufWriter::new(sink);
    match format {
        TraceFormat::Binary => {
            let header = TraceHeader {
                version: 1,
                kind: seq.kind,
                count: seq.addresses.len() as u64,
            };
            w.write_all(&header.encode())?;
            for a in &seq.addresses {
                w.write_all(&a.to_le_bytes())?;
            }
        }
        TraceFormat::Text => {
            writeln!(w, "# kind={}", seq.kind.name())?;
            for a in &seq.addresses {
                writeln!(w, "{a:#x}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Cycles through `num_lines` line-aligned addresses. After the first
/// `num_lines` accesses every access has stack distance `num_lines - 1`.
pub fn gen_cyclic(num_lines: u64, num_accesses: usize, line_size: u64) -> AccessSequence {
    assert!(num_lines >= 1, "gen_cyclic needs at least one line");
    let addresses = (0..num_accesses as u64)
        .map(|i| (i % num_lines) * line_size)
        .collect();
    AccessSequence::new(AccessKind::Data, addresses)
}

/// Independent uniform choice among `num_lines` line-aligned addresses.
pub fn gen_random_uniform(
    num_lines: u64,
    num_accesses: usize,
    line_size: u64,
    seed: u64,
) -> AccessSequence {
    assert!(num_lines >= 1, "gen_random_uniform needs at least one line");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let addresses = (0..num_accesses)
        .map(|_| rng.random_range(0..num_lines) * line_size)
        .collect();
    AccessSequence::new(AccessKind::Data, addresses)
}

/// Builds a trace whose stack distances realize `model`.
///
/// An explicit LRU stack is kept; each access draws a distance `d` (rounded to
/// the nearest integer, negatives clamped to 0) and touches the line at depth
/// `d`. When the stack is shallower than `d + 1` a fresh line is pushed, which
/// shows up as a cold access.
pub fn gen_from_distance_model(
    model: &Characterization,
    num_accesses: usize,
    seed: u64,
) -> AccessSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let line_size = model.line_size;
    // stack[0] is the most recently used line.
    let mut stack: Vec<u64> = Vec::new();
    let mut next_line = 0u64;
    let mut addresses = Vec::with_capacity(num_accesses);
    for _ in 0..num_accesses {
        let d = model.draw(&mut rng).round().max(0.0);
        let depth = if d >= stack.len() as f64 {
            None
        } else {
            Some(d as usize)
        };
        let line = match depth {
            Some(d) => {
                let line = stack[d];
                stack[..=d].rotate_right(1);
                line
            }
            None => {
                let line = next_line;
                next_line += 1;
                stack.insert(0, line);
                line
            }
        };
        addresses.push(line * line_size);
    }
    AccessSequence::new(model.kind, addresses)
}
