use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::config::{ChannelModel, Detector, ExperimentConfig};
use crate::baselines::{bomp, mfocuss, msbl, MmvProblem};
use crate::detect::detect_activity;
use crate::link::{
    align_to_support, channel_mse, demodulate, despread, ls_channel_estimate, ls_data_decode, spread,
    symbol_error_rate,
};
use crate::linalg::complex_gaussian_matrix;
use crate::model::{
    draw_channel_gaussian, draw_channel_ula, draw_support, received_data, received_pilot, trial_rng, ActivityModel,
    ChannelMatrix, NoiseSpec, ReceivedPilot, Support, DEFAULT_SPACING_RATIO,
};
use crate::pilots::{normalize_columns, PilotDictionary};
use crate::theory::{evaluate_bound, BoundInputs};
use crate::{CMat, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutcome {
    pub detector: Detector,
    /// Detected support equals the true support exactly.
    pub success: bool,
    pub ser: f64,
    pub channel_mse: f64,
    /// Wall-clock time of the detection step alone.
    pub runtime_ms: f64,
    /// Recovery-probability bound for this trial's scenario (cov-lasso only).
    pub bound: Option<f64>,
    /// Solver error that turned this trial into a failure.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub support: Support,
    pub outcomes: Vec<DetectorOutcome>,
}

/// Aggregated metrics of one detector at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub axis_value: f64,
    pub detector: String,
    pub success_rate: f64,
    pub ser: f64,
    pub channel_mse: f64,
    pub runtime_ms: f64,
    pub bound: Option<f64>,
}

struct Slot {
    support: Support,
    dict: PilotDictionary,
    channel: ChannelMatrix,
    noise: NoiseSpec,
    pilot: ReceivedPilot,
    symbols: DMatrix<usize>,
    data: CMat,
    codes: Option<CMat>,
}

fn load_pilots(config: &ExperimentConfig) -> Result<Option<PilotDictionary>> {
    let Some(path) = &config.pilots else { return Ok(None) };
    let dict = PilotDictionary::read_csv(path)?;
    if dict.length() != config.pilot_length || dict.num_nodes() != config.num_nodes {
        return Err(Error::Config(format!(
            "pilot file {} is {}x{}, config needs L={} K={}",
            path.display(),
            dict.length(),
            dict.num_nodes(),
            config.pilot_length,
            config.num_nodes
        )));
    }
    Ok(Some(dict))
}

fn draw_slot(config: &ExperimentConfig, fixed: Option<&PilotDictionary>, trial_index: u64) -> Result<Slot> {
    let mut rng = trial_rng(config.seed, trial_index);
    let k = config.num_nodes;
    let support = draw_support(k, ActivityModel::Fixed(config.active), &mut rng)?;
    let dict = match fixed {
        Some(d) => d.clone(),
        None => PilotDictionary::gaussian(config.pilot_length, k, &mut rng)?,
    };
    let channel = match config.channel {
        ChannelModel::Gaussian => draw_channel_gaussian(config.antennas, &support, &vec![1.0; k], &mut rng)?,
        ChannelModel::Ula => {
            draw_channel_ula(config.antennas, config.paths, &support, DEFAULT_SPACING_RATIO, &mut rng)?
        }
    };
    let noise = NoiseSpec::from_snr_db(config.snr_db)?;
    let pilot = received_pilot(&channel, &dict, noise, &mut rng)?;
    let order = config.modulation.order();
    let symbols = DMatrix::from_fn(support.len(), config.data_symbols, |_, _| rng.random_range(0..order));
    let mut tx = config.modulation.modulate(&symbols);
    let codes = if config.spreading > 0 {
        let mut c = complex_gaussian_matrix(config.spreading, k, 1.0, &mut rng);
        normalize_columns(&mut c)?;
        tx = spread(&tx, &c.select_columns(support.indices()))?;
        Some(c)
    } else {
        None
    };
    let data = received_data(&channel.active_columns(), &tx, noise, &mut rng)?;
    Ok(Slot { support, dict, channel, noise, pilot, symbols, data, codes })
}

fn detect(config: &ExperimentConfig, slot: &Slot, detector: Detector) -> Result<(Support, Option<f64>)> {
    let sigma2 = slot.noise.variance();
    match detector {
        Detector::CovLasso => {
            let result = detect_activity(&slot.pilot, &slot.dict, sigma2, &config.lasso)?;
            Ok((result.support, Some(result.lambda)))
        }
        Detector::Msbl => {
            let problem = MmvProblem::from_pilot(&slot.pilot, &slot.dict, sigma2)?;
            Ok((msbl(&problem, &config.msbl)?.support, None))
        }
        Detector::Mfocuss => {
            let problem = MmvProblem::from_pilot(&slot.pilot, &slot.dict, sigma2)?;
            Ok((mfocuss(&problem, &config.mfocuss)?.support, None))
        }
        Detector::Bomp => {
            if slot.support.is_empty() {
                return Ok((Support::empty(config.num_nodes), None));
            }
            let problem = MmvProblem::from_pilot(&slot.pilot, &slot.dict, sigma2)?;
            Ok((bomp(&problem, slot.support.len())?.support, None))
        }
        Detector::Pai | Detector::Paci => Ok((slot.support.clone(), None)),
    }
}

/// Scenario bound evaluated with the regularization actually used.
fn trial_bound(config: &ExperimentConfig, slot: &Slot, lambda: f64) -> Option<f64> {
    let mut active: Vec<f64> = slot.support.iter().map(|k| slot.channel.variances[k]).collect();
    active.sort_by(|a, b| b.total_cmp(a));
    let sigma_w = slot.noise.variance().sqrt();
    let inputs = BoundInputs {
        lambda,
        mu: slot.dict.coherence(),
        active: slot.support.len(),
        pilot_length: config.pilot_length,
        antennas: config.antennas,
        sigma_max: [active.first().map_or(0.0, |v| v.sqrt()), active.get(1).map_or(0.0, |v| v.sqrt())],
        noise_sigma_max: [sigma_w, sigma_w],
        s_inf_norm: slot.dict.max_abs_entry(),
        sigma_min2: active.last().copied().unwrap_or(0.0),
    };
    evaluate_bound(&inputs, config.bound_c1_fraction).ok().map(|r| r.bound)
}

/// LS channel estimate and data decode on the detected support.
fn receive(config: &ExperimentConfig, slot: &Slot, detector: Detector, support_hat: &Support) -> Result<(f64, f64)> {
    let h_true = slot.channel.active_columns();
    let h_hat = if detector == Detector::Paci {
        h_true.clone()
    } else {
        ls_channel_estimate(&slot.pilot.entries, &slot.dict.select(support_hat.indices()))?
    };
    let mut d_soft = ls_data_decode(&slot.data, &h_hat)?;
    if let Some(codes) = &slot.codes {
        d_soft = despread(&d_soft, &codes.select_columns(support_hat.indices()))?;
    }
    let symbols_hat = demodulate(&d_soft, &config.modulation);
    let ser = symbol_error_rate(&slot.symbols, &symbols_hat, &slot.support, support_hat);
    let mse = channel_mse(&h_true, &align_to_support(&h_hat, support_hat, &slot.support))?;
    Ok((ser, mse))
}

fn outcome(config: &ExperimentConfig, slot: &Slot, detector: Detector) -> DetectorOutcome {
    let start = Instant::now();
    let detected = detect(config, slot, detector);
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let worst = |failure: String| DetectorOutcome {
        detector,
        success: false,
        ser: 1.0,
        channel_mse: slot.support.len() as f64,
        runtime_ms,
        bound: None,
        failure: Some(failure),
    };
    let (support_hat, lambda) = match detected {
        Ok(d) => d,
        Err(e) => return worst(e.to_string()),
    };
    let success = support_hat == slot.support;
    let bound = lambda.and_then(|l| trial_bound(config, slot, l));
    match receive(config, slot, detector, &support_hat) {
        Ok((ser, channel_mse)) => {
            DetectorOutcome { detector, success, ser, channel_mse, runtime_ms, bound, failure: None }
        }
        Err(e) => DetectorOutcome { success, bound, ..worst(e.to_string()) },
    }
}

fn trial_with(config: &ExperimentConfig, fixed: Option<&PilotDictionary>, trial_index: u64) -> Result<TrialRecord> {
    let slot = draw_slot(config, fixed, trial_index)?;
    let outcomes = config.detectors.iter().map(|&d| outcome(config, &slot, d)).collect();
    Ok(TrialRecord { trial_index, support: slot.support, outcomes })
}

/// One full pipeline pass for a single scenario (no sweep axis applied).
/// Every detector sees the same slot; the slot depends only on
/// `(config.seed, trial_index)`.
pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    let fixed = load_pilots(config)?;
    trial_with(config, fixed.as_ref(), trial_index)
}

/// Means over trials, one row per detector in configuration order.
pub fn aggregate(axis_value: f64, detectors: &[Detector], records: &[TrialRecord]) -> Vec<MetricsRow> {
    let n = records.len().max(1) as f64;
    detectors
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let outs: Vec<&DetectorOutcome> = records.iter().map(|r| &r.outcomes[i]).collect();
            let mean = |f: &dyn Fn(&DetectorOutcome) -> f64| outs.iter().map(|o| f(o)).sum::<f64>() / n;
            let bounds: Vec<f64> = outs.iter().filter_map(|o| o.bound).collect();
            MetricsRow {
                axis_value,
                detector: d.name().to_string(),
                success_rate: mean(&|o| if o.success { 1.0 } else { 0.0 }),
                ser: mean(&|o| o.ser),
                channel_mse: mean(&|o| o.channel_mse),
                runtime_ms: mean(&|o| o.runtime_ms),
                bound: if bounds.is_empty() { None } else { Some(bounds.iter().sum::<f64>() / bounds.len() as f64) },
            }
        })
        .collect()
}

/// Runs every sweep point and returns rows ordered by axis value, then by
/// detector. Trials run in parallel; results do not depend on the schedule.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let fixed = load_pilots(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut rows = Vec::new();
    for value in config.axis_values() {
        let point = config.at(value)?;
        let records = pool.install(|| {
            (0..point.trials as u64)
                .into_par_iter()
                .map(|i| trial_with(&point, fixed.as_ref(), i))
                .collect::<Result<Vec<_>>>()
        })?;
        rows.extend(aggregate(value, &point.detectors, &records));
    }
    Ok(rows)
}
