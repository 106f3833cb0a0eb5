//! Synthetic SRAM devices with temperature-dependent start-up noise.
//!
//! Every cell is an independent Bernoulli source. A cell's probability of
//! powering up to 1 at the reference temperature is `p_ref`; away from the
//! reference it moves linearly toward the opposite value, with separate
//! slopes below and above the reference, and is clamped to `[0, 1]`.
//!
//! [`calibrate`] builds a device whose expected distance to its own
//! noiseless reference hits a [`NoiseTargets`] triple exactly:
//!
//! * a fixed number of weak cells sit at `p = 0.5` at every temperature;
//! * all remaining (strong) cells share one flip probability at the
//!   reference temperature;
//! * the extra noise on the hot side comes from a subset of strong cells
//!   that turn weak (reach `p = 0.5`) at the hot target temperature;
//! * the extra noise on the cold side comes from a few strong cells that
//!   flip their preferred value when chilled.
//!
//! Cells outside those subsets keep their reference behaviour, so absolute
//! reliability in the cold stays close to the reference temperature while
//! heat adds unpredictable bits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fingerprint::{BoardType, Fingerprint, Reading, ReferenceFingerprint};
use crate::{Error, Result};

pub const REFERENCE_TEMP_C: i32 = 25;

/// Default share of weak cells at the reference temperature.
pub const DEFAULT_WEAK_FRACTION: f64 = 0.04;

/// Half-width of the uniform sensor jitter added to readings, in °C.
pub const SENSOR_JITTER_C: f64 = 1.5;

/// Largest allowed gap between calibrated and requested expected noise.
pub const CALIBRATION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempTarget {
    pub temp_c: i32,
    /// Mean fractional Hamming distance to the reference-temperature
    /// fingerprint.
    pub fhd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTargets {
    pub cold: TempTarget,
    pub reference: TempTarget,
    pub hot: TempTarget,
    pub weak_fraction: f64,
}

impl NoiseTargets {
    /// Targets at 10, 25 and 50 °C with the default weak fraction.
    pub fn new(cold: f64, reference: f64, hot: f64) -> Self {
        Self {
            cold: TempTarget { temp_c: 10, fhd: cold },
            reference: TempTarget {
                temp_c: REFERENCE_TEMP_C,
                fhd: reference,
            },
            hot: TempTarget { temp_c: 50, fhd: hot },
            weak_fraction: DEFAULT_WEAK_FRACTION,
        }
    }

    /// Measured averages of the STM32F401RE boards.
    pub fn f401re() -> Self {
        Self::new(0.0529, 0.0387, 0.0535)
    }

    /// Measured averages of the STM32F446RE boards.
    pub fn f446re() -> Self {
        Self::new(0.0679, 0.0424, 0.0772)
    }

    pub fn with_weak_fraction(mut self, weak_fraction: f64) -> Self {
        self.weak_fraction = weak_fraction;
        self
    }

    pub fn targets(&self) -> [TempTarget; 3] {
        [self.cold, self.reference, self.hot]
    }

    fn validate(&self) -> Result<()> {
        for t in self.targets() {
            if !(0.0..=0.5).contains(&t.fhd) {
                return Err(Error::Unattainable(format!(
                    "noise target {} at {} °C outside [0, 0.5]",
                    t.fhd, t.temp_c
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.weak_fraction) {
            return Err(Error::InvalidParameter(format!(
                "weak fraction {} outside [0, 1]",
                self.weak_fraction
            )));
        }
        if !(self.cold.temp_c < self.reference.temp_c && self.reference.temp_c < self.hot.temp_c) {
            return Err(Error::InvalidParameter(
                "target temperatures must satisfy cold < reference < hot".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoardProfile {
    F401RE,
    F446RE,
    Custom(NoiseTargets),
}

impl BoardProfile {
    pub fn targets(&self) -> NoiseTargets {
        match self {
            BoardProfile::F401RE => NoiseTargets::f401re(),
            BoardProfile::F446RE => NoiseTargets::f446re(),
            BoardProfile::Custom(t) => *t,
        }
    }

    pub fn board_type(&self) -> BoardType {
        match self {
            BoardProfile::F401RE => BoardType::F401RE,
            BoardProfile::F446RE => BoardType::F446RE,
            BoardProfile::Custom(_) => BoardType::Sim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoardProfile::F401RE => "f401re",
            BoardProfile::F446RE => "f446re",
            BoardProfile::Custom(_) => "custom",
        }
    }
}

impl FromStr for BoardProfile {
    type Err = Error;

    /// Parses the two built-in profiles; custom profiles carry targets and
    /// are built directly.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f401re" | "f401re-like" => Ok(BoardProfile::F401RE),
            "f446re" | "f446re-like" => Ok(BoardProfile::F446RE),
            _ => Err(Error::InvalidParameter(format!("unknown board profile {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellModel {
    /// Probability of powering up to 1 at the reference temperature.
    pub p_ref: f64,
    /// Shift per °C below the reference, toward the opposite value.
    pub sens_cold: f64,
    /// Shift per °C above the reference, toward the opposite value.
    pub sens_hot: f64,
}

impl CellModel {
    pub const fn fixed(p_ref: f64) -> Self {
        Self {
            p_ref,
            sens_cold: 0.0,
            sens_hot: 0.0,
        }
    }

    /// Probability of powering up to 1 at `temp_c`.
    pub fn p_one(&self, temp_c: i32, reference_temp_c: i32) -> f64 {
        let delta = temp_c - reference_temp_c;
        let shift = if delta < 0 {
            self.sens_cold * f64::from(-delta)
        } else {
            self.sens_hot * f64::from(delta)
        };
        let p = if self.p_ref < 0.5 {
            self.p_ref + shift
        } else if self.p_ref > 0.5 {
            self.p_ref - shift
        } else {
            self.p_ref
        };
        p.clamp(0.0, 1.0)
    }

    /// Value the cell favours at the reference temperature (0 on a tie).
    pub fn preferred(&self) -> bool {
        self.p_ref > 0.5
    }

    /// Probability of not powering up to the preferred value.
    pub fn flip_probability(&self, temp_c: i32, reference_temp_c: i32) -> f64 {
        let p = self.p_one(temp_c, reference_temp_c);
        if self.preferred() {
            1.0 - p
        } else {
            p
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub device_id: String,
    pub profile: BoardProfile,
    pub reference_temp_c: i32,
    pub cells: Vec<CellModel>,
    pub seed: u64,
}

impl DeviceModel {
    pub fn with_device_id(mut self, device_id: impl Into<String>) -> Self {
        self.device_id = device_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn board_type(&self) -> BoardType {
        self.profile.board_type()
    }

    /// The fingerprint an infinite number of reference-temperature readings
    /// would round to.
    pub fn preferred_fingerprint(&self) -> Fingerprint {
        let bits: Vec<bool> = self.cells.iter().map(CellModel::preferred).collect();
        Fingerprint::from_bits(&bits).expect("device models have at least one cell")
    }

    pub fn p_ones(&self, temp_c: i32) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| c.p_one(temp_c, self.reference_temp_c))
            .collect()
    }

    /// Mean distance between a reading at `temp_c` and `reference`:
    /// `(1/n) Σ p_i (1 - R_i) + (1 - p_i) R_i`.
    pub fn expected_fhd_to(&self, reference: &Fingerprint, temp_c: i32) -> Result<f64> {
        if reference.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: reference.len(),
            });
        }
        let total: f64 = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let p = c.p_one(temp_c, self.reference_temp_c);
                if reference.bit(i) {
                    1.0 - p
                } else {
                    p
                }
            })
            .sum();
        Ok(total / self.len() as f64)
    }

    /// One power-up at `temp_c`. Deterministic in `(seed, temp_c, run_index)`.
    pub fn sample_fingerprint(&self, temp_c: i32, run_index: u32) -> Fingerprint {
        self.sample(temp_c, run_index).0
    }

    fn sample(&self, temp_c: i32, run_index: u32) -> (Fingerprint, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(reading_stream(temp_c, run_index));
        let jitter: f64 = rng.random_range(-SENSOR_JITTER_C..=SENSOR_JITTER_C);
        let mut fp = Fingerprint::zeros(self.len()).expect("device models have at least one cell");
        for (i, c) in self.cells.iter().enumerate() {
            let p = c.p_one(temp_c, self.reference_temp_c);
            if rng.random::<f64>() < p {
                fp.set(i, true);
            }
        }
        (fp, libm::round(jitter * 100.0) / 100.0)
    }
}

fn reading_stream(temp_c: i32, run_index: u32) -> u64 {
    // Stream 0 is used for model construction.
    ((u64::from(temp_c as u32) << 32) | u64::from(run_index)).wrapping_add(1)
}

/// A calibrated device for one of the built-in (or custom) profiles.
pub fn synth_device(profile: BoardProfile, cell_count: usize, seed: u64) -> Result<DeviceModel> {
    calibrate(profile, &profile.targets(), cell_count, seed)
}

/// Builds a device whose expected noise against its preferred fingerprint
/// matches `targets` at each of the three target temperatures.
///
/// Weak cells are capped so that they alone never exceed the reference
/// noise budget. Layout (which cells are weak, preferred values, which cells
/// flip in the cold) is drawn from `seed`.
pub fn calibrate(
    profile: BoardProfile,
    targets: &NoiseTargets,
    cell_count: usize,
    seed: u64,
) -> Result<DeviceModel> {
    if cell_count == 0 {
        return Err(Error::InvalidParameter("cell count must be positive".into()));
    }
    targets.validate()?;
    let n = cell_count as f64;
    let cold_span = f64::from(targets.reference.temp_c - targets.cold.temp_c);
    let hot_span = f64::from(targets.hot.temp_c - targets.reference.temp_c);

    let ref_bits = targets.reference.fhd * n;
    let weak = libm::round(targets.weak_fraction * n)
        .min(libm::floor(2.0 * ref_bits + 1e-9))
        .min(n) as usize;
    let strong = cell_count - weak;
    let strong_f = strong as f64;
    let weak_bits = weak as f64 / 2.0;

    // Flip probability shared by every strong cell at the reference, and
    // how many strong-cell equivalents must move to reach the other targets.
    let (q_ref, cold_cells, hot_cells) = if strong == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let q_ref = ((ref_bits - weak_bits) / strong_f).max(0.0);
        let excess = |target: &TempTarget, side: &str| -> Result<f64> {
            let bits = (target.fhd - targets.reference.fhd) * n;
            if bits < -1e-9 {
                return Err(Error::Unattainable(format!(
                    "{side} noise {} below reference noise {}",
                    target.fhd, targets.reference.fhd
                )));
            }
            Ok(bits.max(0.0))
        };
        let cold_bits = excess(&targets.cold, "cold")?;
        let hot_bits = excess(&targets.hot, "hot")?;
        let cold_cells = cold_bits / (1.0 - q_ref);
        let hot_cells = if hot_bits > 0.0 { hot_bits / (0.5 - q_ref) } else { 0.0 };
        if !hot_cells.is_finite() || libm::ceil(cold_cells) + libm::ceil(hot_cells) > strong_f {
            return Err(Error::Unattainable(format!(
                "targets need {cold_cells:.2} cold-flipping and {hot_cells:.2} hot-weakening cells, \
                 only {strong} strong cells"
            )));
        }
        (q_ref, cold_cells, hot_cells)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_weak = alloc::vec![false; cell_count];
    for i in index::sample(&mut rng, cell_count, weak) {
        is_weak[i] = true;
    }
    let strong_idx: Vec<usize> = (0..cell_count).filter(|&i| !is_weak[i]).collect();

    // Whole cells that move all the way, plus one cell for the remainder.
    let split = |cells: f64| -> (usize, f64) {
        let whole = libm::floor(cells + 1e-12);
        (whole as usize, (cells - whole).max(0.0))
    };
    let (cold_whole, cold_part) = split(cold_cells);
    let (hot_whole, hot_part) = split(hot_cells);
    let cold_count = cold_whole + usize::from(cold_part > 1e-12);
    let hot_count = hot_whole + usize::from(hot_part > 1e-12);

    // Slopes in flip probability per °C, toward the opposite value.
    let mut cold_slope = alloc::vec![0.0; cell_count];
    let mut hot_slope = alloc::vec![0.0; cell_count];
    let chosen = index::sample(&mut rng, strong, cold_count + hot_count).into_vec();
    for (rank, &j) in chosen[..cold_count].iter().enumerate() {
        let reach = if rank < cold_whole { 1.0 } else { cold_part };
        cold_slope[strong_idx[j]] = reach * (1.0 - q_ref) / cold_span;
    }
    for (rank, &j) in chosen[cold_count..].iter().enumerate() {
        let reach = if rank < hot_whole { 1.0 } else { hot_part };
        hot_slope[strong_idx[j]] = reach * (0.5 - q_ref) / hot_span;
    }

    let cells = (0..cell_count)
        .map(|i| {
            if is_weak[i] {
                CellModel::fixed(0.5)
            } else {
                let preferred_one: bool = rng.random();
                CellModel {
                    p_ref: if preferred_one { 1.0 - q_ref } else { q_ref },
                    sens_cold: cold_slope[i],
                    sens_hot: hot_slope[i],
                }
            }
        })
        .collect();

    let model = DeviceModel {
        device_id: format!("{}-{seed:016x}", profile.board_type()),
        profile,
        reference_temp_c: targets.reference.temp_c,
        cells,
        seed,
    };

    let reference = model.preferred_fingerprint();
    for t in targets.targets() {
        let got = model.expected_fhd_to(&reference, t.temp_c)?;
        if (got - t.fhd).abs() > CALIBRATION_TOLERANCE {
            return Err(Error::Unattainable(format!(
                "expected noise {got:.5} at {} °C misses target {:.5}",
                t.temp_c, t.fhd
            )));
        }
    }
    Ok(model)
}

/// Analytic mean distance between readings of `model` at `temp_c` and an
/// enrolled reference.
pub fn expected_fhd(model: &DeviceModel, reference: &ReferenceFingerprint, temp_c: i32) -> Result<f64> {
    model.expected_fhd_to(&reference.fingerprint, temp_c)
}

/// One simulated power-up, labelled like a hardware reading.
pub fn sample_reading(model: &DeviceModel, temp_c: i32, run_index: u32) -> Reading {
    let (fingerprint, jitter) = model.sample(temp_c, run_index);
    Reading {
        fingerprint,
        device_id: model.device_id.clone(),
        board_type: model.board_type(),
        nominal_temp_c: temp_c,
        sensor_temp_c: f64::from(temp_c) + jitter,
        run_index,
    }
}
