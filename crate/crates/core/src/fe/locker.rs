//! Hash-based digital lockers.
//!
//! A locker hides a payload under a secret value `v`:
//! `ciphertext = H(nonce, v) XOR (payload || 0^tag)`. Opening with `v'`
//! recomputes the pad; the payload is released only if the trailing tag
//! bytes come out all zero.
//!
//! `H` is SHA-256 in counter mode over
//! `"puf-locker/v1" || nonce || v || counter_le32`, truncated to the
//! ciphertext length.

use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use super::params::NONCE_BYTES;
use crate::fingerprint::Fingerprint;
use crate::{Error, Result};

const DOMAIN: &[u8] = b"puf-locker/v1";

pub type Nonce = [u8; NONCE_BYTES];

/// Fills `out` with the pseudorandom pad for `(nonce, value)`.
pub fn pad(nonce: &Nonce, value: &[u8], out: &mut [u8]) {
    for (counter, chunk) in out.chunks_mut(32).enumerate() {
        let mut h = Sha256::new();
        h.update(DOMAIN);
        h.update(nonce);
        h.update(value);
        h.update((counter as u32).to_le_bytes());
        let block = h.finalize();
        chunk.copy_from_slice(&block[..chunk.len()]);
    }
}

/// Locks `payload` under `value` with a `tag_bytes`-byte zero check tag.
pub fn lock(nonce: &Nonce, value: &[u8], payload: &[u8], tag_bytes: usize) -> Vec<u8> {
    let mut ct = alloc::vec![0u8; payload.len() + tag_bytes];
    pad(nonce, value, &mut ct);
    for (c, p) in ct.iter_mut().zip(payload) {
        *c ^= p;
    }
    ct
}

/// Opens a locker, returning the payload if the check tag verifies.
pub fn unlock(nonce: &Nonce, value: &[u8], ciphertext: &[u8], tag_bytes: usize) -> Option<Vec<u8>> {
    let mut plain = alloc::vec![0u8; ciphertext.len()];
    pad(nonce, value, &mut plain);
    for (p, c) in plain.iter_mut().zip(ciphertext) {
        *p ^= c;
    }
    let split = ciphertext.len().checked_sub(tag_bytes)?;
    if plain[split..].iter().all(|&b| b == 0) {
        plain.truncate(split);
        Some(plain)
    } else {
        None
    }
}

/// One sample-then-lock locker: the key locked under the fingerprint bits
/// selected by `mask`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Locker {
    /// Selected cell positions; exactly `k` bits set.
    pub mask: Fingerprint,
    pub nonce: Nonce,
    pub ciphertext: Vec<u8>,
}

impl Locker {
    /// The subsample fed to the hash: the fingerprint with every unselected
    /// cell cleared. Equal subsamples give equal bytes because the mask is
    /// fixed per locker.
    pub fn subsample(&self, w: &Fingerprint) -> Result<Fingerprint> {
        if w.len() != self.mask.len() {
            return Err(Error::LengthMismatch {
                left: self.mask.len(),
                right: w.len(),
            });
        }
        w.and(&self.mask)
    }

    pub fn seal(mask: Fingerprint, nonce: Nonce, w: &Fingerprint, key: &[u8], tag_bytes: usize) -> Result<Self> {
        let mut locker = Self {
            mask,
            nonce,
            ciphertext: Vec::new(),
        };
        let v = locker.subsample(w)?;
        locker.ciphertext = lock(&locker.nonce, v.as_bytes(), key, tag_bytes);
        Ok(locker)
    }

    pub fn open(&self, w: &Fingerprint, tag_bytes: usize) -> Result<Option<Vec<u8>>> {
        let v = self.subsample(w)?;
        Ok(unlock(&self.nonce, v.as_bytes(), &self.ciphertext, tag_bytes))
    }
}
