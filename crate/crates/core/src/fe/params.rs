use alloc::format;

use crate::{Error, Result};

/// Nonce length of every locker, in bytes.
pub const NONCE_BYTES: usize = 16;

pub const DEFAULT_SUBSAMPLE_BITS: u16 = 80;
pub const DEFAULT_TAG_BITS: u16 = 128;
pub const DEFAULT_KEY_BITS: u16 = 128;
pub const MIN_TAG_BITS: u16 = 64;

/// Sample-then-lock parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeParams {
    /// Fingerprint length in bits.
    pub n: u16,
    /// Number of bit errors the helper data is sized to tolerate.
    pub t: u16,
    /// Bits per subsample.
    pub k: u16,
    /// Target probability that reproduction fails within `t` errors.
    pub delta: f64,
    /// Length of the all-zero check tag, in bits.
    pub s: u16,
    pub key_len: u16,
}

impl FeParams {
    /// Parameters with the default subsample size, tag and key lengths.
    pub fn new(n: u16, t: u16, delta: f64) -> Result<Self> {
        Self::with_all(n, t, DEFAULT_SUBSAMPLE_BITS, delta, DEFAULT_TAG_BITS, DEFAULT_KEY_BITS)
    }

    pub fn with_all(n: u16, t: u16, k: u16, delta: f64, s: u16, key_len: u16) -> Result<Self> {
        let p = Self {
            n,
            t,
            k,
            delta,
            s,
            key_len,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidParameter(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.t >= self.n {
            return bad(format!("t = {} must be below n = {}", self.t, self.n));
        }
        if self.k == 0 || self.k > self.n {
            return bad(format!("k = {} must lie in [1, n = {}]", self.k, self.n));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if self.s < MIN_TAG_BITS || !self.s.is_multiple_of(8) {
            return bad(format!("s = {} must be a multiple of 8 and at least {MIN_TAG_BITS}", self.s));
        }
        if self.key_len == 0 || !self.key_len.is_multiple_of(8) {
            return bad(format!("key_len = {} must be a positive multiple of 8", self.key_len));
        }
        if self.k > self.n - self.t {
            return Err(Error::Infeasible(format!(
                "k = {} exceeds n - t = {}: no subsample can avoid {} errors",
                self.k,
                self.n - self.t,
                self.t
            )));
        }
        Ok(())
    }

    pub fn mask_bytes(&self) -> usize {
        usize::from(self.n).div_ceil(8)
    }

    pub fn ciphertext_bytes(&self) -> usize {
        usize::from(self.key_len + self.s) / 8
    }

    pub fn key_bytes(&self) -> usize {
        usize::from(self.key_len) / 8
    }

    pub fn tag_bytes(&self) -> usize {
        usize::from(self.s) / 8
    }

    /// Serialized size of one locker record.
    pub fn locker_bytes(&self) -> usize {
        self.mask_bytes() + NONCE_BYTES + self.ciphertext_bytes()
    }
}

fn check_sampling_args(n: u32, t: u32, k: u32) -> Result<()> {
    if n == 0 || k == 0 || k > n || t > n {
        return Err(Error::InvalidParameter(format!(
            "sampling needs 0 < k <= n and t <= n, got n = {n}, t = {t}, k = {k}"
        )));
    }
    Ok(())
}

/// Probability that `k` positions drawn uniformly without replacement from
/// `n` miss all of `t` fixed error positions: `C(n-t, k) / C(n, k)`,
/// evaluated as `Π_{i<t} (n-k-i)/(n-i)`. Zero when `t > n - k`.
pub fn sampling_success_prob(n: u32, t: u32, k: u32) -> Result<f64> {
    check_sampling_args(n, t, k)?;
    let mut p = 1.0f64;
    for i in 0..t {
        if n - k < i + 1 {
            return Ok(0.0);
        }
        p *= f64::from(n - k - i) / f64::from(n - i);
    }
    Ok(p)
}

/// [`sampling_success_prob`] as a reduced fraction `(numerator, denominator)`.
/// Fails if the intermediate product overflows `u128`.
pub fn sampling_success_fraction(n: u32, t: u32, k: u32) -> Result<(u128, u128)> {
    check_sampling_args(n, t, k)?;
    let (mut num, mut den) = (1u128, 1u128);
    for i in 0..t {
        if n - k < i + 1 {
            return Ok((0, 1));
        }
        let overflow = || Error::InvalidParameter("fraction overflows u128".into());
        num = num.checked_mul(u128::from(n - k - i)).ok_or_else(overflow)?;
        den = den.checked_mul(u128::from(n - i)).ok_or_else(overflow)?;
        let g = gcd(num, den);
        num /= g;
        den /= g;
    }
    Ok((num, den))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Smallest locker count `ℓ` with `1 - (1 - p)^ℓ >= 1 - delta`.
pub fn locker_count(params: &FeParams) -> Result<u32> {
    params.validate()?;
    let p = sampling_success_prob(params.n.into(), params.t.into(), params.k.into())?;
    lockers_for(p, params.delta)
}

fn lockers_for(p: f64, delta: f64) -> Result<u32> {
    if p <= 0.0 {
        return Err(Error::Infeasible("subsampling success probability is zero".into()));
    }
    if p >= 1.0 {
        return Ok(1);
    }
    // ln(1 - p) via log1p keeps precision for tiny p.
    let log_miss = libm::log1p(-p);
    let log_delta = libm::log(delta);
    if log_miss == 0.0 {
        return Err(Error::Infeasible(format!("success probability {p:e} too small to size")));
    }
    let mut count = libm::ceil(log_delta / log_miss).max(1.0);
    // Guard against the quotient rounding to just below an integer.
    if count * log_miss > log_delta {
        count += 1.0;
    }
    if count > f64::from(u32::MAX) {
        return Err(Error::Infeasible(format!("{count} lockers exceed the helper-data format")));
    }
    Ok(count as u32)
}

/// Header bytes of the serialized helper data.
pub const HEADER_BYTES: usize = 4 + 2 + 5 * 2 + 8 + 4;

/// Serialized helper-data size in bytes.
pub fn helper_size(params: &FeParams) -> Result<u64> {
    let count = locker_count(params)?;
    Ok(HEADER_BYTES as u64 + u64::from(count) * params.locker_bytes() as u64)
}
