//! Fingerprints, readings and reference aggregation.
//!
//! A [`Fingerprint`] is the start-up pattern of a window of SRAM cells. Bit
//! `i` always refers to cell `i`. Bits are packed little-endian within each
//! byte: cell `i` lives in byte `i / 8` at bit position `i % 8`. Padding bits
//! in the final byte are always zero.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint {
    bytes: Vec<u8>,
    len_bits: usize,
}

impl Fingerprint {
    /// All-zero fingerprint of `len_bits` cells.
    pub fn zeros(len_bits: usize) -> Result<Self> {
        if len_bits == 0 {
            return Err(Error::InvalidParameter("fingerprint length must be positive".into()));
        }
        Ok(Self {
            bytes: vec![0; len_bits.div_ceil(8)],
            len_bits,
        })
    }

    /// Builds a fingerprint from packed bytes. `bytes` must hold exactly
    /// `ceil(len_bits / 8)` bytes; padding bits are cleared.
    pub fn from_bytes(bytes: &[u8], len_bits: usize) -> Result<Self> {
        let mut fp = Self::zeros(len_bits)?;
        if bytes.len() != fp.bytes.len() {
            return Err(Error::LengthMismatch {
                left: bytes.len() * 8,
                right: len_bits,
            });
        }
        fp.bytes.copy_from_slice(bytes);
        fp.clear_padding();
        Ok(fp)
    }

    /// Fingerprint spanning every bit of `bytes`.
    pub fn from_byte_vec(bytes: Vec<u8>) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::InvalidParameter("fingerprint length must be positive".into()));
        }
        let len_bits = bytes.len() * 8;
        Ok(Self { bytes, len_bits })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut fp = Self::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            fp.set(i, b);
        }
        Ok(fp)
    }

    /// Parses a string of `'0'`/`'1'` characters, cell 0 first.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(alloc::format!("not a bit: {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len_bits
    }

    /// Always false; fingerprints have at least one cell.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len_bits == 0
    }

    #[inline]
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len_bits, "bit index {i} out of range");
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len_bits, "bit index {i} out of range");
        let mask = 1u8 << (i % 8);
        if value {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let b = self.bit(i);
        self.set(i, !b);
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len_bits).map(move |i| self.bit(i))
    }

    /// Indices of the cells set to 1.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len_bits).filter(move |&i| self.bit(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.bytes {
            *b = !*b;
        }
        out.clear_padding();
        out
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        let bytes = self.bytes.iter().zip(&other.bytes).map(|(a, b)| a ^ b).collect();
        Ok(Self {
            bytes,
            len_bits: self.len_bits,
        })
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        let bytes = self.bytes.iter().zip(&other.bytes).map(|(a, b)| a & b).collect();
        Ok(Self {
            bytes,
            len_bits: self.len_bits,
        })
    }

    /// Number of cells whose values differ.
    pub fn hamming_distance(&self, other: &Self) -> Result<usize> {
        self.check_len(other)?;
        Ok(self
            .bytes
            .iter()
            .zip(&other.bytes)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len_bits != other.len_bits {
            return Err(Error::LengthMismatch {
                left: self.len_bits,
                right: other.len_bits,
            });
        }
        Ok(())
    }

    fn clear_padding(&mut self) {
        let rem = self.len_bits % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= (1u8 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({}b:", self.len_bits)?;
        if self.len_bits <= 64 {
            for b in self.bits() {
                f.write_str(if b { "1" } else { "0" })?;
            }
        } else {
            for b in &self.bytes {
                write!(f, "{b:02x}")?;
            }
        }
        f.write_str(")")
    }
}

/// Fractional Hamming distance: differing cells divided by fingerprint length.
pub fn fhd(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    Ok(a.hamming_distance(b)? as f64 / a.len() as f64)
}

/// Board family a reading came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoardType {
    F401RE,
    F446RE,
    /// Synthetic device with a custom noise profile.
    Sim,
    Other(String),
}

impl BoardType {
    pub fn as_str(&self) -> &str {
        match self {
            BoardType::F401RE => "F401RE",
            BoardType::F446RE => "F446RE",
            BoardType::Sim => "SIM",
            BoardType::Other(s) => s,
        }
    }
}

impl fmt::Display for BoardType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoardType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s.contains([',', '\n', '\r']) {
            return Err(Error::InvalidParameter(alloc::format!("bad board type {s:?}")));
        }
        Ok(match s {
            "F401RE" => BoardType::F401RE,
            "F446RE" => BoardType::F446RE,
            "SIM" => BoardType::Sim,
            other => BoardType::Other(other.to_string()),
        })
    }
}

/// One power-up of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct Reading {
    pub fingerprint: Fingerprint,
    pub device_id: String,
    pub board_type: BoardType,
    /// Chamber set point; authoritative for grouping.
    pub nominal_temp_c: i32,
    /// On-chip sensor value, noisy.
    pub sensor_temp_c: f64,
    pub run_index: u32,
}

/// Per-cell counts of power-ups to 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellStatistics {
    ones: Vec<u32>,
    sample_count: u32,
}

impl CellStatistics {
    /// Accumulates statistics over fingerprints of equal length.
    pub fn from_fingerprints<'a, I>(fingerprints: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Fingerprint>,
    {
        let mut iter = fingerprints.into_iter();
        let first = iter.next().ok_or(Error::Empty("no fingerprints to aggregate"))?;
        let mut ones = vec![0u32; first.len()];
        let mut sample_count = 0u32;
        for fp in core::iter::once(first).chain(iter) {
            first.check_len(fp)?;
            for i in fp.ones() {
                ones[i] += 1;
            }
            sample_count += 1;
        }
        Ok(Self { ones, sample_count })
    }

    pub fn len(&self) -> usize {
        self.ones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ones.is_empty()
    }

    pub fn sample_count(&self) -> u32 {
        self.sample_count
    }

    /// Number of samples in which cell `i` powered up to 1.
    pub fn ones_count(&self, i: usize) -> u32 {
        self.ones[i]
    }

    /// Empirical probability that cell `i` powers up to 1.
    pub fn p_one(&self, i: usize) -> f64 {
        self.ones[i] as f64 / self.sample_count as f64
    }

    pub fn p_ones(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.p_one(i)).collect()
    }
}

/// Per-cell statistics over readings from a single device.
pub fn cell_statistics(readings: &[Reading]) -> Result<CellStatistics> {
    let first = readings.first().ok_or(Error::Empty("no readings to aggregate"))?;
    if let Some(other) = readings.iter().find(|r| r.device_id != first.device_id) {
        return Err(Error::DeviceMismatch {
            expected: first.device_id.clone(),
            found: other.device_id.clone(),
        });
    }
    CellStatistics::from_fingerprints(readings.iter().map(|r| &r.fingerprint))
}

/// Majority-rounded fingerprint of repeated readings at one temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFingerprint {
    pub fingerprint: Fingerprint,
    pub device_id: String,
    pub board_type: BoardType,
    pub source_temp_c: i32,
    pub source_count: u32,
    /// Cells whose empirical probability was exactly one half. Those cells
    /// round to 0.
    pub tie_mask: Fingerprint,
}

impl ReferenceFingerprint {
    /// Rounds cell statistics: 1 iff strictly more than half the samples
    /// were 1.
    pub fn from_statistics(
        stats: &CellStatistics,
        device_id: impl Into<String>,
        board_type: BoardType,
        source_temp_c: i32,
    ) -> Result<Self> {
        let n = stats.len();
        let mut fingerprint = Fingerprint::zeros(n)?;
        let mut tie_mask = Fingerprint::zeros(n)?;
        let count = stats.sample_count();
        for i in 0..n {
            let twice = 2 * u64::from(stats.ones_count(i));
            match twice.cmp(&u64::from(count)) {
                core::cmp::Ordering::Greater => fingerprint.set(i, true),
                core::cmp::Ordering::Equal => tie_mask.set(i, true),
                core::cmp::Ordering::Less => {}
            }
        }
        Ok(Self {
            fingerprint,
            device_id: device_id.into(),
            board_type,
            source_temp_c,
            source_count: count,
            tie_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.fingerprint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingerprint.is_empty()
    }

    pub fn tie_count(&self) -> usize {
        self.tie_mask.count_ones()
    }
}

/// Enrolls a reference from readings of one device taken at `temp_c`.
pub fn aggregate_reference(readings: &[Reading], temp_c: i32) -> Result<ReferenceFingerprint> {
    let stats = cell_statistics(readings)?;
    if let Some(r) = readings.iter().find(|r| r.nominal_temp_c != temp_c) {
        return Err(Error::TemperatureMismatch {
            expected: temp_c,
            found: r.nominal_temp_c,
        });
    }
    let first = &readings[0];
    ReferenceFingerprint::from_statistics(
        &stats,
        first.device_id.clone(),
        first.board_type.clone(),
        temp_c,
    )
}

/// Cells split by how reliably they power up.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellPartition {
    pub strong0: Vec<usize>,
    pub strong1: Vec<usize>,
    pub weak: Vec<usize>,
}

impl CellPartition {
    pub fn total(&self) -> usize {
        self.strong0.len() + self.strong1.len() + self.weak.len()
    }
}

/// Default threshold for [`classify_cells`].
pub const DEFAULT_WEAK_EPSILON: f64 = 0.1;

/// A cell is strong-1 when `p_one >= 1 - epsilon`, strong-0 when
/// `p_one <= epsilon`, and weak otherwise.
pub fn classify_cells(stats: &CellStatistics, epsilon: f64) -> Result<CellPartition> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidParameter(alloc::format!(
            "epsilon must lie in (0, 0.5), got {epsilon}"
        )));
    }
    let mut part = CellPartition::default();
    for i in 0..stats.len() {
        let p = stats.p_one(i);
        if p >= 1.0 - epsilon {
            part.strong1.push(i);
        } else if p <= epsilon {
            part.strong0.push(i);
        } else {
            part.weak.push(i);
        }
    }
    Ok(part)
}
