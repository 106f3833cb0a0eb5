//! Experiment pipeline: simulate → enroll → metrics → fe-trial.
//!
//! Each `cmd_*` function reads its inputs from and writes its outputs to the
//! configured output directory. The pure halves (`simulate`, `enroll`,
//! `compute_metrics`, `fe_trial`) are exposed for tests and embedding.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use puf_core::fe::{self, FeParams};
use puf_core::metrics::{self, DistributionSummary};
use puf_core::simulator::{self, BoardProfile, DeviceModel};
use puf_core::{aggregate_reference, BoardType, Reading, ReferenceFingerprint};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::readings_file::{self, write_atomic};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of the `index`-th simulated device of a profile.
pub fn device_seed(base: u64, profile: &BoardProfile, index: u32) -> u64 {
    splitmix64(base ^ splitmix64(fnv1a(profile.name())) ^ (u64::from(index) << 20))
}

pub fn device_id(profile: &BoardProfile, index: u32) -> String {
    format!("{}-{index:02}", profile.board_type())
}

pub fn simulated_devices(cfg: &ExperimentConfig) -> Result<Vec<DeviceModel>> {
    let mut devices = Vec::new();
    for profile in &cfg.profiles {
        for i in 0..cfg.devices {
            let model = simulator::synth_device(*profile, cfg.cell_count, device_seed(cfg.seed, profile, i))?;
            devices.push(model.with_device_id(device_id(profile, i)));
        }
    }
    Ok(devices)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// `readings_per_temp` readings per device at every temperature, run
    /// indices `0..readings_per_temp`.
    pub campaign: Vec<Reading>,
    /// Separate reference-temperature readings for enrollment, run indices
    /// starting at `readings_per_temp`.
    pub enrollment: Vec<Reading>,
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let devices = simulated_devices(cfg)?;
    let per_device: Vec<(Vec<Reading>, Vec<Reading>)> = devices
        .par_iter()
        .map(|m| {
            let mut campaign = Vec::new();
            for &t in &cfg.temperatures_c {
                campaign.extend((0..cfg.readings_per_temp).map(|run| simulator::sample_reading(m, t, run)));
            }
            let enrollment = (0..cfg.enroll_readings)
                .map(|j| simulator::sample_reading(m, cfg.reference_temp_c, cfg.readings_per_temp + j))
                .collect();
            (campaign, enrollment)
        })
        .collect();
    let (campaign, enrollment): (Vec<_>, Vec<_>) = per_device.into_iter().unzip();
    Ok(Simulation {
        campaign: campaign.into_iter().flatten().collect(),
        enrollment: enrollment.into_iter().flatten().collect(),
    })
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let sim = simulate(cfg)?;
    readings_file::write_readings(cfg.readings_path(), &sim.campaign)?;
    if let Some(path) = cfg.enrollment_path() {
        readings_file::write_readings(path, &sim.enrollment)?;
    }
    Ok(sim)
}

fn by_device(readings: &[Reading]) -> BTreeMap<&str, Vec<&Reading>> {
    let mut map: BTreeMap<&str, Vec<&Reading>> = BTreeMap::new();
    for r in readings {
        map.entry(r.device_id.as_str()).or_default().push(r);
    }
    map
}

/// One reference per device in `devices`, aggregated from that device's
/// readings at `reference_temp_c`.
pub fn enroll<'a>(
    source: &[Reading],
    devices: impl IntoIterator<Item = &'a str>,
    reference_temp_c: i32,
) -> Result<Vec<ReferenceFingerprint>> {
    let grouped = by_device(source);
    let mut refs = Vec::new();
    for dev in devices {
        let at_ref: Vec<Reading> = grouped
            .get(dev)
            .into_iter()
            .flatten()
            .filter(|r| r.nominal_temp_c == reference_temp_c)
            .map(|r| (*r).clone())
            .collect();
        if at_ref.is_empty() {
            return Err(HarnessError::MissingInput(format!(
                "device {dev} has no readings at the reference temperature {reference_temp_c} °C"
            )));
        }
        refs.push(aggregate_reference(&at_ref, reference_temp_c)?);
    }
    Ok(refs)
}

pub fn cmd_enroll(cfg: &ExperimentConfig) -> Result<Vec<ReferenceFingerprint>> {
    let campaign = readings_file::ingest_readings(cfg.readings_path())?;
    if campaign.is_empty() {
        return Err(HarnessError::MissingInput("readings file has no readings".into()));
    }
    let source = match cfg.enrollment_path() {
        Some(p) => readings_file::ingest_readings(p)?,
        None => campaign.clone(),
    };
    let devices = by_device(&campaign);
    let refs = enroll(&source, devices.keys().copied(), cfg.reference_temp_c)?;
    readings_file::write_references(cfg.references_path(), &refs)?;

    let mut ties = String::from("device_id,tie_count,tie_mask_hex\n");
    for r in &refs {
        writeln!(ties, "{},{},{}", r.device_id, r.tie_count(), hex::encode(r.tie_mask.as_bytes())).unwrap();
    }
    write_atomic(cfg.out_path("reference_ties.csv"), ties.as_bytes())?;
    Ok(refs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntraRow {
    pub device_id: String,
    pub board_type: BoardType,
    pub nominal_temp_c: i32,
    pub run_index: u32,
    pub fhd: f64,
}

/// What the readings at a temperature are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// The enrolled reference-temperature fingerprint.
    Enrolled,
    /// A reference aggregated at the same temperature (absolute reliability).
    SameTemperature,
}

impl Basis {
    pub fn label(self) -> &'static str {
        match self {
            Basis::Enrolled => "enrolled",
            Basis::SameTemperature => "same_temp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityRow {
    pub board_type: BoardType,
    pub temp_c: i32,
    pub basis: Basis,
    pub summary: DistributionSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessRow {
    pub board_type: BoardType,
    pub temp_c: i32,
    pub report: metrics::UniquenessReport,
    pub summary: DistributionSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub temperatures_c: Vec<i32>,
    pub intra: Vec<IntraRow>,
    pub reliability: Vec<ReliabilityRow>,
    pub uniqueness: Vec<UniquenessRow>,
}

impl MetricsReport {
    /// Grand mean of the enrolled-basis distance for one board and temperature.
    pub fn mean_noise(&self, board: &BoardType, temp_c: i32) -> Option<f64> {
        self.reliability
            .iter()
            .find(|r| &r.board_type == board && r.temp_c == temp_c && r.basis == Basis::Enrolled)
            .map(|r| r.summary.mean)
    }

    pub fn uniqueness_at(&self, board: &BoardType, temp_c: i32) -> Option<&UniquenessRow> {
        self.uniqueness
            .iter()
            .find(|u| &u.board_type == board && u.temp_c == temp_c)
    }

    pub fn board_types(&self) -> Vec<BoardType> {
        let mut boards: Vec<BoardType> = self.reliability.iter().map(|r| r.board_type.clone()).collect();
        boards.dedup();
        boards
    }
}

/// Reliability and uniqueness of `readings` given each device's enrolled
/// reference. No randomness is involved.
pub fn compute_metrics(readings: &[Reading], references: &[ReferenceFingerprint]) -> Result<MetricsReport> {
    let refs: BTreeMap<&str, &ReferenceFingerprint> =
        references.iter().map(|r| (r.device_id.as_str(), r)).collect();
    let devices = by_device(readings);

    let mut intra = Vec::new();
    for (dev, rs) in &devices {
        let reference = refs
            .get(dev)
            .ok_or_else(|| HarnessError::MissingInput(format!("no enrolled reference for device {dev}")))?;
        let series = metrics::intra_hd(rs.iter().copied(), reference)?;
        for (r, fhd) in rs.iter().zip(series.values) {
            intra.push(IntraRow {
                device_id: r.device_id.clone(),
                board_type: r.board_type.clone(),
                nominal_temp_c: r.nominal_temp_c,
                run_index: r.run_index,
                fhd,
            });
        }
    }

    let temperatures_c: Vec<i32> = metrics::group_readings(readings).keys().copied().collect();
    let mut boards: BTreeMap<&BoardType, BTreeMap<&str, Vec<&Reading>>> = BTreeMap::new();
    for (dev, rs) in &devices {
        boards.entry(&rs[0].board_type).or_default().insert(dev, rs.clone());
    }

    let mut reliability = Vec::new();
    let mut uniqueness = Vec::new();
    for (board, devs) in &boards {
        for &t in &temperatures_c {
            let enrolled: Vec<f64> = intra
                .iter()
                .filter(|row| &row.board_type == *board && row.nominal_temp_c == t)
                .map(|row| row.fhd)
                .collect();
            if enrolled.is_empty() {
                continue;
            }
            reliability.push(ReliabilityRow {
                board_type: (*board).clone(),
                temp_c: t,
                basis: Basis::Enrolled,
                summary: metrics::distribution_summary(&enrolled)?,
            });

            let mut local_refs = Vec::new();
            let mut same_temp = Vec::new();
            for rs in devs.values() {
                let at_t: Vec<Reading> = rs.iter().filter(|r| r.nominal_temp_c == t).map(|r| (*r).clone()).collect();
                if at_t.is_empty() {
                    continue;
                }
                let local = aggregate_reference(&at_t, t)?;
                same_temp.extend(metrics::intra_hd(&at_t, &local)?.values);
                local_refs.push(local);
            }
            reliability.push(ReliabilityRow {
                board_type: (*board).clone(),
                temp_c: t,
                basis: Basis::SameTemperature,
                summary: metrics::distribution_summary(&same_temp)?,
            });
            if local_refs.len() >= 2 {
                let report = metrics::inter_hd(&local_refs)?;
                let values: Vec<f64> = report.values().collect();
                uniqueness.push(UniquenessRow {
                    board_type: (*board).clone(),
                    temp_c: t,
                    summary: metrics::distribution_summary(&values)?,
                    report,
                });
            }
        }
    }
    Ok(MetricsReport {
        temperatures_c,
        intra,
        reliability,
        uniqueness,
    })
}

/// CSV files emitted by `metrics`, as `(file name, contents)`.
pub fn metrics_files(report: &MetricsReport) -> Vec<(&'static str, String)> {
    let mut intra = String::from("device_id,board_type,nominal_temp_c,run_index,fhd\n");
    for r in &report.intra {
        writeln!(intra, "{},{},{},{},{:.6}", r.device_id, r.board_type, r.nominal_temp_c, r.run_index, r.fhd).unwrap();
    }

    // Average noise in percent per board and temperature, enrolled basis.
    let mut summary = String::from("board_type");
    for t in &report.temperatures_c {
        write!(summary, ",FHD_avg{t}").unwrap();
    }
    summary.push('\n');
    for board in report.board_types() {
        summary.push_str(board.as_str());
        for &t in &report.temperatures_c {
            match report.mean_noise(&board, t) {
                Some(m) => write!(summary, ",{:.2}", m * 100.0).unwrap(),
                None => summary.push(','),
            }
        }
        summary.push('\n');
    }

    let mut reliability = String::from("board_type,temp_c,basis,count,mean,std_dev,min,max\n");
    for r in &report.reliability {
        let s = &r.summary;
        writeln!(
            reliability,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.board_type, r.temp_c, r.basis.label(), s.count, s.mean, s.std_dev, s.min, s.max
        )
        .unwrap();
    }

    let mut uniqueness = String::from("board_type,temp_c,pairs,mean,std_dev,min,max\n");
    let mut pairs = String::from("board_type,temp_c,device_a,device_b,fhd\n");
    for u in &report.uniqueness {
        let s = &u.summary;
        writeln!(
            uniqueness,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            u.board_type, u.temp_c, s.count, s.mean, s.std_dev, s.min, s.max
        )
        .unwrap();
        for p in &u.report.pairs {
            writeln!(pairs, "{},{},{},{},{:.6}", u.board_type, u.temp_c, p.device_a, p.device_b, p.fhd).unwrap();
        }
    }

    vec![
        ("intra_hd.csv", intra),
        ("summary.csv", summary),
        ("reliability.csv", reliability),
        ("uniqueness.csv", uniqueness),
        ("uniqueness_pairs.csv", pairs),
    ]
}

pub fn cmd_metrics(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let readings = readings_file::ingest_readings(cfg.readings_path())?;
    let references = readings_file::ingest_references(cfg.references_path())?;
    if readings.is_empty() || references.is_empty() {
        return Err(HarnessError::MissingInput("metrics needs readings and enrolled references".into()));
    }
    let report = compute_metrics(&readings, &references)?;
    for (name, contents) in metrics_files(&report) {
        write_atomic(cfg.out_path(name), contents.as_bytes())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRow {
    pub board_type: BoardType,
    pub temp_c: i32,
    pub attempts: usize,
    pub successes: usize,
}

impl TrialRow {
    pub fn success_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.successes as f64 / self.attempts as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialReport {
    pub params: FeParams,
    pub locker_count: u32,
    pub helper_bytes: u64,
    pub rows: Vec<TrialRow>,
    pub elapsed: Duration,
}

impl TrialReport {
    pub fn row(&self, board: &BoardType, temp_c: i32) -> Option<&TrialRow> {
        self.rows.iter().find(|r| &r.board_type == board && r.temp_c == temp_c)
    }

    pub fn failures(&self) -> (usize, usize) {
        let attempts = self.rows.iter().map(|r| r.attempts).sum::<usize>();
        let successes = self.rows.iter().map(|r| r.successes).sum::<usize>();
        (attempts - successes, attempts)
    }
}

/// Enrolls every reference with the fuzzy extractor and tries to reproduce
/// the key from that device's readings. At most `per_temp` readings per
/// device and temperature are tried (all when zero), in run order.
pub fn fe_trial(
    readings: &[Reading],
    references: &[ReferenceFingerprint],
    params: &FeParams,
    seed: u64,
    per_temp: u32,
) -> Result<TrialReport> {
    let start = Instant::now();
    let locker_count = fe::locker_count(params)?;
    let helper_bytes = fe::helper_size(params)?;
    let devices = by_device(readings);

    let per_device: Vec<Vec<(BoardType, i32, bool)>> = references
        .par_iter()
        .map(|reference| -> Result<Vec<(BoardType, i32, bool)>> {
            let gen_seed = splitmix64(seed ^ fnv1a(&reference.device_id));
            let (key, helper) = fe::gen(&reference.fingerprint, params, gen_seed)?;
            let mut outcomes = Vec::new();
            let mut tried: BTreeMap<i32, u32> = BTreeMap::new();
            for r in devices.get(reference.device_id.as_str()).into_iter().flatten() {
                let n = tried.entry(r.nominal_temp_c).or_default();
                if per_temp != 0 && *n >= per_temp {
                    continue;
                }
                *n += 1;
                let ok = match fe::rep(&r.fingerprint, &helper) {
                    Ok(k) => k == key,
                    Err(puf_core::Error::ReproductionFailed) => false,
                    Err(e) => return Err(e.into()),
                };
                outcomes.push((r.board_type.clone(), r.nominal_temp_c, ok));
            }
            Ok(outcomes)
        })
        .collect::<Result<_>>()?;

    let mut rows: BTreeMap<(BoardType, i32), TrialRow> = BTreeMap::new();
    for (board, temp_c, ok) in per_device.into_iter().flatten() {
        let row = rows.entry((board.clone(), temp_c)).or_insert(TrialRow {
            board_type: board,
            temp_c,
            attempts: 0,
            successes: 0,
        });
        row.attempts += 1;
        row.successes += usize::from(ok);
    }
    Ok(TrialReport {
        params: *params,
        locker_count,
        helper_bytes,
        rows: rows.into_values().collect(),
        elapsed: start.elapsed(),
    })
}

pub fn trial_csv(report: &TrialReport) -> String {
    let p = &report.params;
    let mut out = String::from("board_type,temp_c,t,k,delta,lockers,helper_bytes,attempts,successes,success_rate\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.4}",
            r.board_type,
            r.temp_c,
            p.t,
            p.k,
            p.delta,
            report.locker_count,
            report.helper_bytes,
            r.attempts,
            r.successes,
            r.success_rate()
        )
        .unwrap();
    }
    out
}

/// Runs the trial and writes `fe_trial.csv` (deterministic) and
/// `fe_trial_timing.csv`. With `strict`, any failed reproduction is an error.
pub fn cmd_fe_trial(cfg: &ExperimentConfig, strict: bool) -> Result<TrialReport> {
    let params = cfg.fe_params()?;
    fe::locker_count(&params)?;
    let readings = readings_file::ingest_readings(cfg.readings_path())?;
    let references = readings_file::ingest_references(cfg.references_path())?;
    if readings.is_empty() || references.is_empty() {
        return Err(HarnessError::MissingInput("fe-trial needs readings and enrolled references".into()));
    }
    let report = fe_trial(&readings, &references, &params, cfg.seed, cfg.fe_readings_per_temp)?;
    write_atomic(cfg.out_path("fe_trial.csv"), trial_csv(&report).as_bytes())?;
    let timing = format!(
        "t,lockers,helper_bytes,wall_ms\n{},{},{},{}\n",
        params.t,
        report.locker_count,
        report.helper_bytes,
        report.elapsed.as_millis()
    );
    write_atomic(cfg.out_path("fe_trial_timing.csv"), timing.as_bytes())?;
    let (failures, attempts) = report.failures();
    if strict && failures > 0 {
        return Err(HarnessError::ReproductionFailures { failures, attempts });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use puf_core::Fingerprint;

    fn reading(dev: &str, temp: i32, run: u32, byte: u8) -> Reading {
        Reading {
            fingerprint: Fingerprint::from_byte_vec(vec![byte; 16]).unwrap(),
            device_id: dev.into(),
            board_type: BoardType::Sim,
            nominal_temp_c: temp,
            sensor_temp_c: temp as f64,
            run_index: run,
        }
    }

    #[test]
    fn enroll_single_reading_is_identity() {
        let rs = vec![reading("a", 25, 0, 0x3c), reading("b", 25, 0, 0x5a)];
        let refs = enroll(&rs, ["a", "b"], 25).unwrap();
        assert_eq!(refs.len(), 2);
        assert_eq!(refs[0].fingerprint, rs[0].fingerprint);
        assert_eq!(refs[1].fingerprint, rs[1].fingerprint);
    }

    #[test]
    fn enroll_requires_reference_temperature() {
        let rs = vec![reading("a", 25, 0, 1), reading("b", 50, 0, 1)];
        assert!(matches!(enroll(&rs, ["a", "b"], 25), Err(HarnessError::MissingInput(_))));
    }

    #[test]
    fn readings_equal_to_reference_have_zero_noise() {
        let rs: Vec<_> = (0..4).map(|i| reading("a", 25, i, 0x77)).collect();
        let refs = enroll(&rs, ["a"], 25).unwrap();
        let m = compute_metrics(&rs, &refs).unwrap();
        assert!(m.intra.iter().all(|r| r.fhd == 0.0));
        assert_eq!(m.mean_noise(&BoardType::Sim, 25), Some(0.0));
        assert!(m.uniqueness.is_empty());
    }

    #[test]
    fn metrics_need_references() {
        let rs = vec![reading("a", 25, 0, 1)];
        assert!(matches!(compute_metrics(&rs, &[]), Err(HarnessError::MissingInput(_))));
    }

    #[test]
    fn device_seeds_differ() {
        let a = device_seed(1, &BoardProfile::F401RE, 0);
        assert_ne!(a, device_seed(1, &BoardProfile::F401RE, 1));
        assert_ne!(a, device_seed(1, &BoardProfile::F446RE, 0));
        assert_ne!(a, device_seed(2, &BoardProfile::F401RE, 0));
        assert_eq!(device_id(&BoardProfile::F446RE, 3), "F446RE-03");
    }
}
