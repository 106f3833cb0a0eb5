//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # campaign
//! reference_temp = 25
//! temperatures = 10, 25, 50
//! readings_per_temp = 50
//! enroll_readings = 50
//! devices = 14
//! cell_count = 128
//! profiles = f401re, f446re
//! seed = 2024
//! out_dir = out
//!
//! # fuzzy extractor
//! fe_t = 5
//! fe_k = 80
//! fe_delta = 0.001
//! fe_s = 128
//! fe_key_len = 128
//! fe_readings_per_temp = 50
//! ```
//!
//! `custom_targets = cold, reference, hot` adds a synthetic profile with the
//! given mean noise fractions. `readings_file` and `enrollment_file`
//! override the default input locations inside `out_dir`.

use std::fs;
use std::path::{Path, PathBuf};

use puf_core::fe::FeParams;
use puf_core::simulator::{BoardProfile, NoiseTargets};

use crate::error::{HarnessError, Result};

pub const READINGS_FILE: &str = "readings.csv";
pub const ENROLLMENT_FILE: &str = "enrollment.csv";
pub const REFERENCES_FILE: &str = "references.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub reference_temp_c: i32,
    pub temperatures_c: Vec<i32>,
    pub readings_per_temp: u32,
    /// Extra reference-temperature readings per device used only for
    /// enrollment. Zero enrolls from the campaign readings themselves.
    pub enroll_readings: u32,
    pub devices: u32,
    pub cell_count: usize,
    pub profiles: Vec<BoardProfile>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub fe_t: u16,
    pub fe_k: u16,
    pub fe_delta: f64,
    pub fe_s: u16,
    pub fe_key_len: u16,
    /// Readings per device and temperature tried in `fe-trial`; zero means all.
    pub fe_readings_per_temp: u32,
    pub readings_file: Option<PathBuf>,
    pub enrollment_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            reference_temp_c: 25,
            temperatures_c: vec![10, 25, 50],
            readings_per_temp: 50,
            enroll_readings: 50,
            devices: 14,
            cell_count: 128,
            profiles: vec![BoardProfile::F401RE, BoardProfile::F446RE],
            seed: 2024,
            out_dir: PathBuf::from("out"),
            fe_t: 5,
            fe_k: 80,
            fe_delta: 1e-3,
            fe_s: 128,
            fe_key_len: 128,
            fe_readings_per_temp: 50,
            readings_file: None,
            enrollment_file: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| HarnessError::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut custom: Option<NoiseTargets> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "reference_temp" => cfg.reference_temp_c = parse_value(key, value)?,
                "temperatures" => cfg.temperatures_c = parse_list(key, value)?,
                "readings_per_temp" => cfg.readings_per_temp = parse_value(key, value)?,
                "enroll_readings" => cfg.enroll_readings = parse_value(key, value)?,
                "devices" => cfg.devices = parse_value(key, value)?,
                "cell_count" => cfg.cell_count = parse_value(key, value)?,
                "profiles" => {
                    cfg.profiles = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<BoardProfile>().map_err(|e| HarnessError::Config(e.to_string())))
                        .collect::<Result<_>>()?
                }
                "custom_targets" => {
                    let v: Vec<f64> = parse_list(key, value)?;
                    let [cold, reference, hot] = v[..] else {
                        return Err(HarnessError::Config(
                            "custom_targets needs three values: cold, reference, hot".into(),
                        ));
                    };
                    custom = Some(NoiseTargets::new(cold, reference, hot));
                }
                "seed" => cfg.seed = parse_value(key, value)?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "fe_t" => cfg.fe_t = parse_value(key, value)?,
                "fe_k" => cfg.fe_k = parse_value(key, value)?,
                "fe_delta" => cfg.fe_delta = parse_value(key, value)?,
                "fe_s" => cfg.fe_s = parse_value(key, value)?,
                "fe_key_len" => cfg.fe_key_len = parse_value(key, value)?,
                "fe_readings_per_temp" => cfg.fe_readings_per_temp = parse_value(key, value)?,
                "readings_file" => cfg.readings_file = Some(PathBuf::from(value)),
                "enrollment_file" => cfg.enrollment_file = Some(PathBuf::from(value)),
                other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
            }
        }
        if let Some(t) = custom {
            cfg.profiles.push(BoardProfile::Custom(t));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperatures_c.is_empty() {
            return Err(HarnessError::Config("temperature list is empty".into()));
        }
        if !self.temperatures_c.contains(&self.reference_temp_c) {
            return Err(HarnessError::Config(format!(
                "reference temperature {} °C is not in the temperature list",
                self.reference_temp_c
            )));
        }
        if self.cell_count == 0 || !self.cell_count.is_multiple_of(8) {
            return Err(HarnessError::Config(format!(
                "cell_count = {} must be a positive multiple of 8",
                self.cell_count
            )));
        }
        Ok(())
    }

    pub fn fe_params(&self) -> Result<FeParams> {
        let n = u16::try_from(self.cell_count)
            .map_err(|_| HarnessError::Config(format!("cell_count {} too large", self.cell_count)))?;
        Ok(FeParams::with_all(n, self.fe_t, self.fe_k, self.fe_delta, self.fe_s, self.fe_key_len)?)
    }

    pub fn readings_path(&self) -> PathBuf {
        self.readings_file
            .clone()
            .unwrap_or_else(|| self.out_dir.join(READINGS_FILE))
    }

    /// Where enrollment readings come from, if a separate set is used.
    pub fn enrollment_path(&self) -> Option<PathBuf> {
        match (&self.enrollment_file, self.enroll_readings) {
            (Some(p), _) => Some(p.clone()),
            (None, 0) => None,
            (None, _) => Some(self.out_dir.join(ENROLLMENT_FILE)),
        }
    }

    pub fn references_path(&self) -> PathBuf {
        self.out_dir.join(REFERENCES_FILE)
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_campaign_shape() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.temperatures_c, [10, 25, 50]);
        assert_eq!(c.devices * c.readings_per_temp * c.temperatures_c.len() as u32, 2100);
    }

    #[test]
    fn parses_keys() {
        let c = ExperimentConfig::parse(
            "# comment\nseed = 7\ntemperatures = 0, 25\nprofiles = F446RE # trailing\nfe_t=8\ncustom_targets = 0.05, 0.04, 0.06\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.temperatures_c, [0, 25]);
        assert_eq!(c.profiles.len(), 2);
        assert_eq!(c.profiles[0], BoardProfile::F446RE);
        assert!(matches!(c.profiles[1], BoardProfile::Custom(_)));
        assert_eq!(c.fe_t, 8);
    }

    #[test]
    fn rejects_bad_config() {
        for bad in [
            "seed = x",
            "nonsense = 1",
            "no equals sign",
            "temperatures = 10, 50",
            "reference_temp = 30",
            "profiles = z80",
            "cell_count = 12",
            "custom_targets = 0.1, 0.2",
        ] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(HarnessError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn infeasible_fe_params() {
        let c = ExperimentConfig::parse("fe_k = 125\nfe_t = 5").unwrap();
        assert_eq!(c.fe_params().unwrap_err().exit_code(), 2);
    }
}
