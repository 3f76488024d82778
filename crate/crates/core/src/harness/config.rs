use std::path::{Path, PathBuf};

use crate::baselines::{MfocussOptions, MsblOptions};
use crate::detect::{Lambda, LassoOptions};
use crate::link::ModulationScheme;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    CovLasso,
    Msbl,
    Bomp,
    Mfocuss,
    /// Genie: true support, LS channel estimate.
    Pai,
    /// Genie: true support and true channel.
    Paci,
}

impl Detector {
    pub const BLIND: [Detector; 4] = [Detector::CovLasso, Detector::Msbl, Detector::Bomp, Detector::Mfocuss];

    pub fn name(self) -> &'static str {
        match self {
            Detector::CovLasso => "cov-lasso",
            Detector::Msbl => "msbl",
            Detector::Bomp => "bomp",
            Detector::Mfocuss => "mfocuss",
            Detector::Pai => "pai",
            Detector::Paci => "paci",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "cov-lasso" | "lasso" => Ok(Detector::CovLasso),
            "msbl" => Ok(Detector::Msbl),
            "bomp" => Ok(Detector::Bomp),
            "mfocuss" => Ok(Detector::Mfocuss),
            "pai" => Ok(Detector::Pai),
            "paci" => Ok(Detector::Paci),
            other => Err(config_err(format!("unknown detector {other:?}"))),
        }
    }

    /// Comma-separated names; `all` expands to the four blind detectors.
    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let add: Vec<Detector> =
                if part == "all" { Self::BLIND.to_vec() } else { vec![Self::from_name(part)?] };
            for d in add {
                if !out.contains(&d) {
                    out.push(d);
                }
            }
        }
        if out.is_empty() {
            return Err(config_err("no detector selected"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Sparsity,
    Snr,
    Antennas,
    None,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Sparsity => "sparsity",
            SweepAxis::Snr => "snr",
            SweepAxis::Antennas => "antennas",
            SweepAxis::None => "none",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sparsity" | "D" => Ok(SweepAxis::Sparsity),
            "snr" => Ok(SweepAxis::Snr),
            "antennas" | "M" => Ok(SweepAxis::Antennas),
            "none" => Ok(SweepAxis::None),
            other => Err(config_err(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    Gaussian,
    Ula,
}

/// One Monte Carlo experiment: fixed scenario plus an optional sweep axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub num_nodes: usize,
    pub pilot_length: usize,
    pub antennas: usize,
    pub active: usize,
    /// `inf` gives a noiseless channel.
    pub snr_db: f64,
    pub trials: usize,
    pub seed: u64,
    pub detectors: Vec<Detector>,
    pub lasso: LassoOptions,
    pub msbl: MsblOptions,
    pub mfocuss: MfocussOptions,
    pub data_symbols: usize,
    pub modulation: ModulationScheme,
    pub channel: ChannelModel,
    pub paths: usize,
    /// Spreading length `L_d`; 0 disables spreading.
    pub spreading: usize,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Fixed pilot dictionary; when unset pilots are redrawn every trial.
    pub pilots: Option<PathBuf>,
    /// Rayon worker count; `None` uses all cores.
    pub workers: Option<usize>,
    /// Split of `c₁/L` between the two error terms of the bound.
    pub bound_c1_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_nodes: 64,
            pilot_length: 20,
            antennas: 128,
            active: 10,
            snr_db: 0.0,
            trials: 200,
            seed: 1,
            detectors: Detector::BLIND.to_vec(),
            lasso: LassoOptions::default(),
            msbl: MsblOptions::default(),
            mfocuss: MfocussOptions::default(),
            data_symbols: 40,
            modulation: ModulationScheme::qpsk(),
            channel: ChannelModel::Gaussian,
            paths: crate::model::DEFAULT_PATHS,
            spreading: 0,
            axis: SweepAxis::None,
            values: Vec::new(),
            pilots: None,
            workers: None,
            bound_c1_fraction: 0.5,
        }
    }
}

pub const PRESETS: [&str; 7] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"];

const GENIE_COMPARISON: [Detector; 4] = [Detector::CovLasso, Detector::Msbl, Detector::Pai, Detector::Paci];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        let snr_range: Vec<f64> = (-5..=5).map(|i| 2.0 * i as f64).collect();
        let even_d: Vec<f64> = vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let cfg = match name {
            "fig2" => Self { axis: SweepAxis::Sparsity, values: even_d, ..base },
            "fig3" => Self { axis: SweepAxis::Snr, values: snr_range, ..base },
            "fig4" => Self {
                axis: SweepAxis::Antennas,
                values: vec![16.0, 32.0, 64.0, 128.0, 256.0],
                ..base
            },
            "fig5" | "fig8" => Self {
                antennas: 500,
                active: 6,
                detectors: GENIE_COMPARISON.to_vec(),
                axis: SweepAxis::Snr,
                values: snr_range,
                ..base
            },
            "fig6" | "fig7" => Self {
                antennas: 500,
                snr_db: 10.0,
                detectors: GENIE_COMPARISON.to_vec(),
                axis: SweepAxis::Sparsity,
                values: even_d,
                ..base
            },
            other => {
                return Err(config_err(format!("unknown preset {other:?}; expected one of {}", PRESETS.join(", "))))
            }
        };
        Ok(cfg)
    }

    /// Applies one `key=value` setting. Keys are the config-file keys, which
    /// double as CLI flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "K" => self.num_nodes = parse(key, value)?,
            "L" => self.pilot_length = parse(key, value)?,
            "M" => self.antennas = parse(key, value)?,
            "D" => self.active = parse(key, value)?,
            "snr" => self.snr_db = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "detector" => self.detectors = Detector::parse_list(value)?,
            "N" => self.data_symbols = parse(key, value)?,
            "modulation" => self.modulation = ModulationScheme::by_name(value)?,
            "channel" => {
                self.channel = match value {
                    "gaussian" => ChannelModel::Gaussian,
                    "ula" => ChannelModel::Ula,
                    other => return Err(config_err(format!("unknown channel model {other:?}"))),
                }
            }
            "paths" => self.paths = parse(key, value)?,
            "spreading" => self.spreading = parse(key, value)?,
            "lambda" => {
                self.lasso.lambda = if value == "auto" { Lambda::Auto } else { Lambda::Fixed(parse(key, value)?) }
            }
            "tau" => {
                let tau: f64 = parse(key, value)?;
                self.lasso.threshold_ratio = tau;
                self.msbl.prune_tolerance = tau;
                self.mfocuss.prune_tolerance = tau;
            }
            "lasso_iters" => self.lasso.max_iterations = parse(key, value)?,
            "msbl_iters" => self.msbl.max_iterations = parse(key, value)?,
            "mfocuss_p" => self.mfocuss.p = parse(key, value)?,
            "mfocuss_lambda" => {
                self.mfocuss.lambda = if value == "auto" { None } else { Some(parse(key, value)?) }
            }
            "axis" => self.axis = SweepAxis::from_name(value)?,
            "values" => self.values = parse_values(value)?,
            "sweep" => {
                let (axis, values) = value
                    .split_once(':')
                    .ok_or_else(|| config_err(format!("sweep {value:?} must look like axis:values")))?;
                self.axis = SweepAxis::from_name(axis)?;
                self.values = parse_values(values)?;
            }
            "pilots" => self.pilots = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "workers" => self.workers = Some(parse(key, value)?),
            "bound_split" => self.bound_c1_fraction = parse(key, value)?,
            other => return Err(config_err(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line of a config text. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            self.set(key, value).map_err(|e| match e {
                Error::Config(msg) | Error::InvalidParameter(msg) => config_err(format!("line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        self.apply_text(&text)
    }

    /// The sweep points in ascending order; a single point when there is no axis.
    pub fn axis_values(&self) -> Vec<f64> {
        match self.axis {
            SweepAxis::None => vec![self.current_axis_value()],
            _ => {
                let mut v = self.values.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        }
    }

    fn current_axis_value(&self) -> f64 {
        self.active as f64
    }

    /// The scenario at one sweep point.
    pub fn at(&self, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(config_err(format!("{} sweep value {v} is not a count", self.axis.name())))
            }
        };
        match self.axis {
            SweepAxis::Sparsity => cfg.active = as_count(value)?,
            SweepAxis::Antennas => cfg.antennas = as_count(value)?,
            SweepAxis::Snr => cfg.snr_db = value,
            SweepAxis::None => {}
        }
        cfg.axis = SweepAxis::None;
        cfg.values.clear();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(config_err(msg.to_string())) };
        check(self.trials >= 1, "trials must be at least 1")?;
        check(self.num_nodes >= 2, "K must be at least 2")?;
        check(self.pilot_length >= 1, "L must be at least 1")?;
        check(self.data_symbols >= 1, "N must be at least 1")?;
        check(self.paths >= 1, "paths must be at least 1")?;
        check(!self.snr_db.is_nan() && self.snr_db > f64::NEG_INFINITY, "snr must be a number; use inf for noiseless")?;
        check(!self.detectors.is_empty(), "no detector selected")?;
        check(self.bound_c1_fraction > 0.0 && self.bound_c1_fraction < 1.0, "bound_split must lie in (0, 1)")?;
        check(self.workers != Some(0), "workers must be at least 1")?;
        check(self.axis == SweepAxis::None || !self.values.is_empty(), "sweep values are empty")?;
        self.lasso.validate().map_err(|e| config_err(e.to_string()))?;
        check(self.mfocuss.p > 0.0 && self.mfocuss.p <= 1.0, "mfocuss_p must lie in (0, 1]")?;
        for v in self.axis_values() {
            let point = self.at(v)?;
            check(point.active <= point.num_nodes, "D exceeds K")?;
            check(point.antennas >= 1, "M must be at least 1")?;
        }
        Ok(())
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| config_err(format!("cannot parse {key}={value:?}")))
}

/// `a,b,c` or an inclusive range `start:step:stop`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let parts: Vec<&str> = text.split(':').collect();
    let values = if parts.len() == 3 {
        let [start, step, stop] = [parts[0], parts[1], parts[2]].map(|p| parse::<f64>("range", p.trim()));
        let (start, step, stop) = (start?, step?, stop?);
        if !(step > 0.0) || stop < start {
            return Err(config_err(format!("range {text:?} needs step > 0 and stop >= start")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + step * i as f64).collect()
    } else if parts.len() == 1 {
        text.split(',').map(|p| parse::<f64>("values", p.trim())).collect::<Result<Vec<_>>>()?
    } else {
        return Err(config_err(format!("cannot parse values {text:?}")));
    };
    if values.is_empty() {
        return Err(config_err("sweep values are empty"));
    }
    Ok(values)
}
