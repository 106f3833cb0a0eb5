//! Sample-then-lock fuzzy extractor.
//!
//! [`gen`] draws a random key and locks it `ℓ` times, each time under the
//! fingerprint restricted to `k` random cell positions. [`rep`] succeeds as
//! soon as one locker's positions contain no bit errors. `ℓ` is chosen by
//! [`locker_count`] so that a fingerprint within `t` errors fails with
//! probability at most `delta`.
//!
//! # Helper-data format
//!
//! All integers little-endian:
//!
//! | field          | bytes                 |
//! |----------------|-----------------------|
//! | magic `PUFL`   | 4                     |
//! | version (=1)   | 2                     |
//! | n, k, t, s, key_len | 2 each           |
//! | delta (IEEE-754 double) | 8            |
//! | ℓ              | 4                     |
//! | ℓ × locker     | ceil(n/8) mask, 16 nonce, (key_len+s)/8 ciphertext |
//!
//! Mask bit `i` (little-endian within bytes) selects fingerprint cell `i`.

pub mod locker;
pub mod params;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::fingerprint::Fingerprint;
use crate::{Error, Result};

pub use locker::{Locker, Nonce};
pub use params::{
    helper_size, locker_count, sampling_success_fraction, sampling_success_prob, FeParams,
    HEADER_BYTES, NONCE_BYTES,
};

pub const MAGIC: &[u8; 4] = b"PUFL";
pub const FORMAT_VERSION: u16 = 1;

/// Extracted key.
#[derive(Clone, PartialEq, Eq)]
pub struct Key(Vec<u8>);

impl Key {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len_bits(&self) -> usize {
        self.0.len() * 8
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key({} bits)", self.len_bits())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HelperData {
    pub params: FeParams,
    pub lockers: Vec<Locker>,
}

/// Enrolls `w`: returns a fresh key and the helper data that locks it.
/// Deterministic in `(w, params, seed)`.
pub fn gen(w: &Fingerprint, params: &FeParams, seed: u64) -> Result<(Key, HelperData)> {
    let count = locker_count(params)?;
    let n = usize::from(params.n);
    if w.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: w.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut key = alloc::vec![0u8; params.key_bytes()];
    rng.fill(&mut key[..]);

    let mut nonces = BTreeSet::new();
    let mut lockers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut mask = Fingerprint::zeros(n)?;
        for i in index::sample(&mut rng, n, usize::from(params.k)) {
            mask.set(i, true);
        }
        let nonce = loop {
            let candidate: Nonce = rng.random();
            if nonces.insert(candidate) {
                break candidate;
            }
        };
        lockers.push(Locker::seal(mask, nonce, w, &key, params.tag_bytes())?);
    }
    Ok((
        Key(key),
        HelperData {
            params: *params,
            lockers,
        },
    ))
}

/// Reproduces the key from a noisy fingerprint, trying lockers in index
/// order.
pub fn rep(w_prime: &Fingerprint, helper: &HelperData) -> Result<Key> {
    helper.open_first(w_prime).map(|(_, key)| key)
}

impl HelperData {
    pub fn len(&self) -> usize {
        self.lockers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lockers.is_empty()
    }

    /// Tries a single locker.
    pub fn open(&self, index: usize, w_prime: &Fingerprint) -> Result<Option<Key>> {
        let opened = self.lockers[index].open(w_prime, self.params.tag_bytes())?;
        Ok(opened.map(Key))
    }

    /// Index of the first locker that opens, with the released key.
    pub fn open_first(&self, w_prime: &Fingerprint) -> Result<(usize, Key)> {
        let n = usize::from(self.params.n);
        if w_prime.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: w_prime.len(),
            });
        }
        for i in 0..self.lockers.len() {
            if let Some(key) = self.open(i, w_prime)? {
                return Ok((i, key));
            }
        }
        Err(Error::ReproductionFailed)
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_BYTES + self.lockers.len() * self.params.locker_bytes()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for v in [p.n, p.k, p.t, p.s, p.key_len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&p.delta.to_le_bytes());
        out.extend_from_slice(&(self.lockers.len() as u32).to_le_bytes());
        for l in &self.lockers {
            out.extend_from_slice(l.mask.as_bytes());
            out.extend_from_slice(&l.nonce);
            out.extend_from_slice(&l.ciphertext);
        }
        out
    }

    /// Parses and validates serialized helper data.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let (n, k, t, s, key_len) = (r.u16()?, r.u16()?, r.u16()?, r.u16()?, r.u16()?);
        let delta = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let params = FeParams {
            n,
            t,
            k,
            delta,
            s,
            key_len,
        };
        params
            .validate()
            .map_err(|e| Error::Format(format!("bad parameters: {e}")))?;
        let count = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        let expected = locker_count(&params)?;
        if count != expected {
            return Err(Error::Format(format!(
                "locker count {count} does not match parameters ({expected})"
            )));
        }
        let remaining = bytes.len() - r.pos;
        if remaining as u64 != u64::from(count) * params.locker_bytes() as u64 {
            return Err(Error::Format(format!(
                "expected {count} lockers of {} bytes, found {remaining} bytes",
                params.locker_bytes()
            )));
        }
        let mut nonces = BTreeSet::new();
        let mut lockers = Vec::with_capacity(count as usize);
        for i in 0..count {
            let mask_bytes = r.take(params.mask_bytes())?;
            let mask = Fingerprint::from_bytes(mask_bytes, usize::from(n))?;
            if mask.as_bytes() != mask_bytes {
                return Err(Error::Format(format!("locker {i}: mask padding bits set")));
            }
            if mask.count_ones() != usize::from(k) {
                return Err(Error::Format(format!("locker {i}: mask does not select k = {k} cells")));
            }
            let nonce: Nonce = r.take(NONCE_BYTES)?.try_into().expect("nonce length");
            if !nonces.insert(nonce) {
                return Err(Error::Format(format!("locker {i}: repeated nonce")));
            }
            let ciphertext = r.take(params.ciphertext_bytes())?.to_vec();
            lockers.push(Locker {
                mask,
                nonce,
                ciphertext,
            });
        }
        Ok(Self { params, lockers })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t: u16) -> FeParams {
        FeParams::with_all(32, t, 12, 1e-3, 64, 64).unwrap()
    }

    fn fingerprint(seed: u64, n: usize) -> Fingerprint {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let bytes: Vec<u8> = (0..n / 8).map(|_| rng.random()).collect();
        Fingerprint::from_byte_vec(bytes).unwrap()
    }

    #[test]
    fn zero_error_round_trip() {
        let w = fingerprint(1, 32);
        let (key, helper) = gen(&w, &params(3), 9).unwrap();
        assert_eq!(helper.len() as u32, locker_count(&params(3)).unwrap());
        let (idx, got) = helper.open_first(&w).unwrap();
        assert_eq!(idx, 0);
        assert_eq!(got, key);
        assert_eq!(key.len_bits(), 64);
    }

    #[test]
    fn gen_is_deterministic() {
        let w = fingerprint(2, 32);
        assert_eq!(gen(&w, &params(2), 5).unwrap(), gen(&w, &params(2), 5).unwrap());
        assert_ne!(gen(&w, &params(2), 5).unwrap().1, gen(&w, &params(2), 6).unwrap().1);
    }

    #[test]
    fn masks_select_k_cells() {
        let (_, helper) = gen(&fingerprint(3, 32), &params(2), 1).unwrap();
        assert!(helper.lockers.iter().all(|l| l.mask.count_ones() == 12));
    }

    #[test]
    fn far_fingerprint_fails() {
        let w = fingerprint(4, 32);
        let (_, helper) = gen(&w, &params(3), 1).unwrap();
        assert_eq!(rep(&w.complement(), &helper), Err(Error::ReproductionFailed));
    }

    #[test]
    fn length_checks() {
        let w = fingerprint(4, 32);
        assert!(matches!(gen(&w, &FeParams::new(128, 4, 1e-3).unwrap(), 1), Err(Error::LengthMismatch { .. })));
        let (_, helper) = gen(&w, &params(1), 1).unwrap();
        assert!(matches!(rep(&fingerprint(4, 40), &helper), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn serialization_layout() {
        let (_, helper) = gen(&fingerprint(5, 32), &params(1), 3).unwrap();
        let bytes = helper.to_bytes();
        assert_eq!(bytes.len(), helper_size(&params(1)).unwrap() as usize);
        assert_eq!(&bytes[..4], b"PUFL");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..16], &[32, 0, 12, 0, 1, 0, 64, 0, 64, 0]);
        assert_eq!(&bytes[16..24], &1e-3f64.to_le_bytes());
        assert_eq!(&bytes[24..28], &(helper.len() as u32).to_le_bytes());
        assert_eq!(&bytes[28..32], helper.lockers[0].mask.as_bytes());
        assert_eq!(HelperData::from_bytes(&bytes).unwrap(), helper);
    }

    #[test]
    fn corrupt_helper_data_rejected() {
        let (_, helper) = gen(&fingerprint(6, 32), &params(1), 3).unwrap();
        let good = helper.to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(HelperData::from_bytes(&bad), Err(Error::Format(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(HelperData::from_bytes(&bad), Err(Error::Format(_))));

        assert!(matches!(HelperData::from_bytes(&good[..good.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(HelperData::from_bytes(&good[..10]), Err(Error::Format(_))));

        // locker count that disagrees with the parameters
        let mut bad = good.clone();
        bad[24] ^= 1;
        assert!(matches!(HelperData::from_bytes(&bad), Err(Error::Format(_))));

        // mask with the wrong popcount
        let mut bad = good.clone();
        bad[28] ^= 1;
        assert!(matches!(HelperData::from_bytes(&bad), Err(Error::Format(_))));

        // repeated nonce
        let mut bad = good.clone();
        let rec = helper.params.locker_bytes();
        let (n0, n1) = (HEADER_BYTES + 4, HEADER_BYTES + rec + 4);
        let first: Vec<u8> = bad[n0..n0 + NONCE_BYTES].to_vec();
        bad[n1..n1 + NONCE_BYTES].copy_from_slice(&first);
        assert!(matches!(HelperData::from_bytes(&bad), Err(Error::Format(_))));
    }
}
