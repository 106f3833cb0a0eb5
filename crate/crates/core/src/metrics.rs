//! Reliability and uniqueness metrics.
//!
//! Reliability is measured as the intra-device distance between readings and
//! a reference of the same device; uniqueness as the inter-device distance
//! between references of different devices. All standard deviations are
//! population standard deviations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::fingerprint::{fhd, Reading, ReferenceFingerprint};
use crate::{Error, Result};

/// Buckets readings by chamber set point, keeping input order inside each
/// bucket. The sensor temperature is ignored.
pub fn group_readings(readings: &[Reading]) -> BTreeMap<i32, Vec<&Reading>> {
    let mut groups: BTreeMap<i32, Vec<&Reading>> = BTreeMap::new();
    for r in readings {
        groups.entry(r.nominal_temp_c).or_default().push(r);
    }
    groups
}

/// Distances of a device's readings to its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct IntraSeries {
    pub device_id: String,
    pub values: Vec<f64>,
    pub nominal_temps_c: Vec<i32>,
    pub run_indices: Vec<u32>,
}

impl IntraSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn summary(&self) -> Result<DistributionSummary> {
        distribution_summary(&self.values)
    }
}

pub fn intra_hd<'a, I>(readings: I, reference: &ReferenceFingerprint) -> Result<IntraSeries>
where
    I: IntoIterator<Item = &'a Reading>,
{
    let mut series = IntraSeries {
        device_id: reference.device_id.clone(),
        values: Vec::new(),
        nominal_temps_c: Vec::new(),
        run_indices: Vec::new(),
    };
    for r in readings {
        if r.device_id != reference.device_id {
            return Err(Error::DeviceMismatch {
                expected: reference.device_id.clone(),
                found: r.device_id.clone(),
            });
        }
        series.values.push(fhd(&r.fingerprint, &reference.fingerprint)?);
        series.nominal_temps_c.push(r.nominal_temp_c);
        series.run_indices.push(r.run_index);
    }
    Ok(series)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDistance {
    pub device_a: String,
    pub device_b: String,
    pub fhd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub pairs: Vec<PairDistance>,
    pub mean: f64,
    pub std_dev: f64,
}

impl UniquenessReport {
    fn from_pairs(pairs: Vec<PairDistance>) -> Result<Self> {
        let values: Vec<f64> = pairs.iter().map(|p| p.fhd).collect();
        let s = distribution_summary(&values)?;
        Ok(Self {
            pairs,
            mean: s.mean,
            std_dev: s.std_dev,
        })
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.fhd)
    }
}

/// Compares every unordered pair of references exactly once, in input order
/// (`(0,1), (0,2), ..., (1,2), ...`).
pub fn inter_hd(references: &[ReferenceFingerprint]) -> Result<UniquenessReport> {
    if references.len() < 2 {
        return Err(Error::InvalidParameter(
            "uniqueness needs at least two references".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for r in references {
        if !seen.insert(r.device_id.as_str()) {
            return Err(Error::DuplicateDevice(r.device_id.clone()));
        }
    }
    let mut pairs = Vec::with_capacity(references.len() * (references.len() - 1) / 2);
    for (i, a) in references.iter().enumerate() {
        for b in &references[i + 1..] {
            pairs.push(PairDistance {
                device_a: a.device_id.clone(),
                device_b: b.device_id.clone(),
                fhd: fhd(&a.fingerprint, &b.fingerprint)?,
            });
        }
    }
    UniquenessReport::from_pairs(pairs)
}

/// Uniqueness over raw readings: every pair of readings from distinct
/// devices with the same run index.
pub fn inter_hd_readings(readings: &[&Reading]) -> Result<UniquenessReport> {
    let mut pairs = Vec::new();
    for (i, a) in readings.iter().enumerate() {
        for b in &readings[i + 1..] {
            if a.device_id != b.device_id && a.run_index == b.run_index {
                pairs.push(PairDistance {
                    device_a: a.device_id.clone(),
                    device_b: b.device_id.clone(),
                    fhd: fhd(&a.fingerprint, &b.fingerprint)?,
                });
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Empty("no cross-device reading pairs"));
    }
    UniquenessReport::from_pairs(pairs)
}

/// How much lower `smaller` is than `larger`, as a fraction of `larger`.
pub fn relative_noise_change(smaller: f64, larger: f64) -> Result<f64> {
    if larger.is_nan() || larger <= 0.0 {
        return Err(Error::InvalidParameter(alloc::format!(
            "reference noise must be positive, got {larger}"
        )));
    }
    Ok((larger - smaller) / larger)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

pub fn distribution_summary(values: &[f64]) -> Result<DistributionSummary> {
    if values.is_empty() {
        return Err(Error::Empty("no values to summarize"));
    }
    let count = values.len();
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    // Rounding can put the mean a hair outside [min, max] for constant input.
    let mean = (values.iter().sum::<f64>() / count as f64).clamp(min, max);
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    Ok(DistributionSummary {
        mean,
        std_dev: libm::sqrt(var),
        count,
        min,
        max,
    })
}
