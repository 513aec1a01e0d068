//! Teleportation schemes under fluctuating loss: direct and adaptive, over
//! one or two atmospheric channels, with optional postselection on the
//! measured transmission.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atmosphere::TransmittanceEnsemble;
use crate::gaussian_teleport::{adaptive_fidelity, check_squeezing, fidelity_closed_form, TeleportError, TeleportParams};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("no samples survive postselection at t_min = {t_min}")]
    EmptyAfterPostselection { t_min: f64 },
    #[error("paired ensembles differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("scheme {mode} needs {expected} channel ensemble(s)")]
    ChannelCount { mode: SchemeMode, expected: usize },
    #[error("threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
    #[error(transparent)]
    Params(#[from] TeleportError),
    #[error("unknown scheme {0:?}; expected direct-single, adaptive-single, direct-dual or adaptive-dual")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeMode {
    /// Mode A lossless, mode B through the channel.
    DirectSingle,
    /// Mode A attenuated to the measured transmission of mode B.
    AdaptiveSingle,
    /// Both modes through independent channels.
    DirectDual,
    /// Both modes through channels; the better one is attenuated to the worse.
    AdaptiveDual,
}

impl SchemeMode {
    pub const ALL: [SchemeMode; 4] = [
        SchemeMode::DirectSingle,
        SchemeMode::AdaptiveSingle,
        SchemeMode::DirectDual,
        SchemeMode::AdaptiveDual,
    ];

    pub fn is_dual(self) -> bool {
        matches!(self, SchemeMode::DirectDual | SchemeMode::AdaptiveDual)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, SchemeMode::AdaptiveSingle | SchemeMode::AdaptiveDual)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeMode::DirectSingle => "direct-single",
            SchemeMode::AdaptiveSingle => "adaptive-single",
            SchemeMode::DirectDual => "direct-dual",
            SchemeMode::AdaptiveDual => "adaptive-dual",
        }
    }
}

impl fmt::Display for SchemeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeMode {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| StrategyError::UnknownMode(s.to_string()))
    }
}

/// Postselection thresholds on the two channels. For single-channel schemes
/// only `t_min_b` is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Postselection {
    pub t_min_a: f64,
    pub t_min_b: f64,
}

impl Postselection {
    pub fn common(t_min: f64) -> Result<Self, StrategyError> {
        Self::per_channel(t_min, t_min)
    }

    pub fn per_channel(t_min_a: f64, t_min_b: f64) -> Result<Self, StrategyError> {
        for t in [t_min_a, t_min_b] {
            if !(0.0..=1.0).contains(&t) {
                return Err(StrategyError::Threshold(t));
            }
        }
        Ok(Self { t_min_a, t_min_b })
    }

    fn label(&self) -> f64 {
        self.t_min_a.max(self.t_min_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub mode: SchemeMode,
    pub postselect: Option<Postselection>,
}

impl SchemeSpec {
    pub fn new(mode: SchemeMode) -> Self {
        Self { mode, postselect: None }
    }

    pub fn with_threshold(mode: SchemeMode, t_min: f64) -> Result<Self, StrategyError> {
        Ok(Self { mode, postselect: Some(Postselection::common(t_min)?) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFidelityResult {
    pub mean_fidelity: f64,
    /// Sample standard deviation of the per-event fidelities over `√n_used`.
    pub std_error: f64,
    /// Postselection efficiency, the exceedance of the threshold.
    pub retained_fraction: f64,
    pub n_used: usize,
}

fn summarize(fidelities: &[f64], total: usize, prior_efficiency: f64) -> MeanFidelityResult {
    let (mean_fidelity, std_error) = stats::mean_and_std_error(fidelities);
    MeanFidelityResult {
        mean_fidelity,
        std_error,
        retained_fraction: prior_efficiency * fidelities.len() as f64 / total as f64,
        n_used: fidelities.len(),
    }
}

/// Keeps the samples with `T >= t_min`; the returned ensemble records the
/// retained fraction as its efficiency.
pub fn postselect(
    ens: &TransmittanceEnsemble,
    t_min: f64,
) -> Result<TransmittanceEnsemble, StrategyError> {
    if !(0.0..=1.0).contains(&t_min) {
        return Err(StrategyError::Threshold(t_min));
    }
    let kept: Vec<f64> = ens.samples().iter().copied().filter(|&t| t >= t_min).collect();
    if kept.is_empty() {
        return Err(StrategyError::EmptyAfterPostselection { t_min });
    }
    Ok(ens.retained(kept))
}

/// Average fidelity with mode B through a fluctuating channel.
pub fn mean_fidelity_single(
    r: f64,
    ens_b: &TransmittanceEnsemble,
    scheme: &SchemeSpec,
) -> Result<MeanFidelityResult, StrategyError> {
    check_squeezing(r)?;
    if scheme.mode.is_dual() {
        return Err(StrategyError::ChannelCount { mode: scheme.mode, expected: 2 });
    }
    let selected;
    let ens = match scheme.postselect {
        Some(ps) => {
            selected = postselect(ens_b, ps.t_min_b)?;
            &selected
        }
        None => ens_b,
    };
    let adaptive = scheme.mode.is_adaptive();
    let fidelities: Vec<f64> = ens
        .samples()
        .par_iter()
        .map(|&t| if adaptive { adaptive_fidelity(r, t) } else { direct(r, 1.0, t) })
        .collect();
    Ok(summarize(&fidelities, ens_b.len(), ens_b.efficiency()))
}

fn direct(r: f64, t_a: f64, t_b: f64) -> f64 {
    fidelity_closed_form(&TeleportParams::new(r, t_a, t_b).expect("validated inputs"))
}

/// Adaptive loss correlation: both channels are brought to the worse
/// transmission.
pub fn adaptive_pair_map(t_a: f64, t_b: f64) -> (f64, f64) {
    let m = t_a.min(t_b);
    (m, m)
}

/// Average fidelity with both modes through independent channels, paired by
/// sample index.
pub fn mean_fidelity_dual(
    r: f64,
    ens_a: &TransmittanceEnsemble,
    ens_b: &TransmittanceEnsemble,
    scheme: &SchemeSpec,
) -> Result<MeanFidelityResult, StrategyError> {
    check_squeezing(r)?;
    if !scheme.mode.is_dual() {
        return Err(StrategyError::ChannelCount { mode: scheme.mode, expected: 1 });
    }
    if ens_a.len() != ens_b.len() {
        return Err(StrategyError::LengthMismatch { a: ens_a.len(), b: ens_b.len() });
    }
    let (lo_a, lo_b) = scheme.postselect.map_or((0.0, 0.0), |p| (p.t_min_a, p.t_min_b));
    let adaptive = scheme.mode.is_adaptive();
    let fidelities: Vec<f64> = ens_a
        .samples()
        .par_iter()
        .zip(ens_b.samples().par_iter())
        .filter(|&(&a, &b)| a >= lo_a && b >= lo_b)
        .map(|(&a, &b)| {
            let (a, b) = if adaptive { adaptive_pair_map(a, b) } else { (a, b) };
            direct(r, a, b)
        })
        .collect();
    if fidelities.is_empty() {
        let t_min = scheme.postselect.map_or(0.0, |p| p.label());
        return Err(StrategyError::EmptyAfterPostselection { t_min });
    }
    Ok(summarize(&fidelities, ens_a.len(), 1.0))
}

/// One or two channel ensembles.
#[derive(Debug, Clone, Copy)]
pub enum Channels<'a> {
    Single(&'a TransmittanceEnsemble),
    Dual(&'a TransmittanceEnsemble, &'a TransmittanceEnsemble),
}

impl Channels<'_> {
    pub fn mean_fidelity(
        &self,
        r: f64,
        scheme: &SchemeSpec,
    ) -> Result<MeanFidelityResult, StrategyError> {
        match *self {
            Channels::Single(b) => mean_fidelity_single(r, b, scheme),
            Channels::Dual(a, b) => mean_fidelity_dual(r, a, b, scheme),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub t_min: f64,
    /// `None` when no sample survives the threshold.
    pub result: Option<MeanFidelityResult>,
}

/// Mean fidelity and efficiency for each postselection threshold. The
/// threshold in `scheme` is ignored; rows past the point where the ensemble
/// empties are `None`.
pub fn fidelity_vs_threshold(
    r: f64,
    channels: Channels<'_>,
    mode: SchemeMode,
    thresholds: &[f64],
) -> Result<Vec<ThresholdRow>, StrategyError> {
    let mut rows = Vec::with_capacity(thresholds.len());
    let mut emptied = false;
    for &t_min in thresholds {
        let spec = SchemeSpec::with_threshold(mode, t_min)?;
        let result = if emptied {
            None
        } else {
            match channels.mean_fidelity(r, &spec) {
                Ok(res) => Some(res),
                Err(StrategyError::EmptyAfterPostselection { .. }) => {
                    emptied = true;
                    None
                }
                Err(e) => return Err(e),
            }
        };
        rows.push(ThresholdRow { t_min, result });
    }
    Ok(rows)
}

/// Fraction of index pairs with `min(T_a, T_b) >= t_min`.
pub fn dual_exceedance(ens_a: &TransmittanceEnsemble, ens_b: &TransmittanceEnsemble, t_min: f64) -> f64 {
    let kept = ens_a
        .samples()
        .iter()
        .zip(ens_b.samples())
        .filter(|&(&a, &b)| a.min(b) >= t_min)
        .count();
    kept as f64 / ens_a.len().min(ens_b.len()) as f64
}

/// Kolmogorov distance between the empirical CDF of the index-paired minima
/// and the order-statistics prediction `1 − (1 − F_a)(1 − F_b)` built from
/// the two marginal empirical CDFs.
pub fn min_map_kolmogorov_distance(
    ens_a: &TransmittanceEnsemble,
    ens_b: &TransmittanceEnsemble,
) -> Result<f64, StrategyError> {
    if ens_a.len() != ens_b.len() {
        return Err(StrategyError::LengthMismatch { a: ens_a.len(), b: ens_b.len() });
    }
    let sorted = |v: Vec<f64>| {
        let mut v = v;
        v.sort_by(f64::total_cmp);
        v
    };
    let a = sorted(ens_a.samples().to_vec());
    let b = sorted(ens_b.samples().to_vec());
    let m = sorted(ens_a.samples().iter().zip(ens_b.samples()).map(|(x, y)| x.min(*y)).collect());
    let n = a.len() as f64;

    let mut points: Vec<f64> = a.iter().chain(&b).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let (mut ia, mut ib, mut im) = (0, 0, 0);
    let mut dist = 0.0f64;
    for t in points {
        while ia < a.len() && a[ia] <= t {
            ia += 1;
        }
        while ib < b.len() && b[ib] <= t {
            ib += 1;
        }
        while im < m.len() && m[im] <= t {
            im += 1;
        }
        let predicted = 1.0 - (1.0 - ia as f64 / n) * (1.0 - ib as f64 / n);
        dist = dist.max((im as f64 / n - predicted).abs());
    }
    Ok(dist)
}
