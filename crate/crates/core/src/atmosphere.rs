//! Elliptic-beam model of a turbulent free-space channel.
//!
//! Turbulence deflects the beam centroid by `(x₀, y₀)` and deforms the spot
//! into an ellipse with semi-axes `W₁`, `W₂` at angle `χ`. The fraction of
//! the beam intensity collected by a circular aperture of radius `a` is the
//! transmittance `η(x₀, y₀, Θ₁, Θ₂, χ)`; the stored ensemble samples are the
//! amplitude transmissions `T = √(η_m η)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::specfun::{self, SpecFunError};
use crate::stats;

/// Allowed excess of the unclamped transmittance above 1.
pub const CLAMP_TOL_ABOVE: f64 = 1e-9;
/// Allowed excess of the unclamped transmittance below 0.
pub const CLAMP_TOL_BELOW: f64 = 1e-12;
/// Below this value of `a·|1/W₁ − 1/W₂|` the beam is treated as circular.
pub const SYMMETRIC_GUARD: f64 = 1e-6;
pub const DEFAULT_PDT_BINS: usize = 100;

#[derive(Debug, Error)]
pub enum AtmosphereError {
    #[error("invalid channel parameter {name} = {value}: {reason}")]
    InvalidParam { name: &'static str, value: f64, reason: &'static str },
    #[error("transmittance {value} outside [0, 1] beyond tolerance (sample {sample:?})")]
    Inconsistent { value: f64, sample: BeamSample },
    #[error("sample {index}: {source}")]
    Sample { index: usize, source: Box<AtmosphereError> },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("ensemble needs at least one sample")]
    Empty,
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("transmission sample {0} outside [0, 1]")]
    SampleRange(f64),
}

/// How `Θ` maps to the ellipse semi-axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaConvention {
    /// `W² = W₀² exp(+Θ)`: positive `⟨Θ⟩` widens the beam.
    #[default]
    Broadening,
    /// `W² = W₀² exp(−Θ)`.
    Narrowing,
}

impl ThetaConvention {
    fn sign(self) -> f64 {
        match self {
            ThetaConvention::Broadening => 1.0,
            ThetaConvention::Narrowing => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            ThetaConvention::Broadening => ThetaConvention::Narrowing,
            ThetaConvention::Narrowing => ThetaConvention::Broadening,
        }
    }
}

/// Physical channel constants, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticBeamParams {
    pub wavelength: f64,
    /// Beam-spot radius at the transmitter.
    pub w0: f64,
    /// Propagation distance.
    pub length: f64,
    /// Receiver aperture radius.
    pub aperture: f64,
    /// Deterministic intensity attenuation.
    pub eta_m: f64,
    /// Index-of-refraction structure constant, m^(-2/3).
    pub cn2: f64,
    #[serde(default)]
    pub theta_convention: ThetaConvention,
}

impl EllipticBeamParams {
    /// The 1.6 km Erlangen link: 809 nm, W₀ = 20 mm, a = 4 cm, η_m = 0.7.
    pub fn erlangen(cn2: f64) -> Self {
        Self {
            wavelength: 809e-9,
            w0: 0.02,
            length: 1600.0,
            aperture: 0.04,
            eta_m: 0.7,
            cn2,
            theta_convention: ThetaConvention::Broadening,
        }
    }

    pub fn validate(&self) -> Result<(), AtmosphereError> {
        let positive = [
            ("wavelength", self.wavelength),
            ("w0", self.w0),
            ("length", self.length),
            ("aperture", self.aperture),
            ("eta_m", self.eta_m),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(AtmosphereError::InvalidParam { name, value, reason: "must be > 0" });
            }
        }
        if self.eta_m > 1.0 {
            return Err(AtmosphereError::InvalidParam {
                name: "eta_m",
                value: self.eta_m,
                reason: "must be <= 1",
            });
        }
        if !(self.cn2.is_finite() && self.cn2 >= 0.0) {
            return Err(AtmosphereError::InvalidParam {
                name: "cn2",
                value: self.cn2,
                reason: "must be >= 0",
            });
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("params serialize");
        hex::encode(Sha256::digest(&json))
    }
}

/// Turbulence statistics derived from [`EllipticBeamParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedBeamParams {
    pub k: f64,
    pub fresnel_omega: f64,
    pub rytov2: f64,
    pub theta_mean: f64,
    pub x0_var: f64,
    pub theta_var: f64,
    pub theta_cov: f64,
    pub w0: f64,
    pub theta_convention: ThetaConvention,
}

impl DerivedBeamParams {
    /// Spot radius of the beam with `Θ₁ = Θ₂ = ⟨Θ⟩`.
    pub fn mean_spot_radius(&self) -> f64 {
        self.spot_radius(self.theta_mean)
    }

    pub fn spot_radius(&self, theta: f64) -> f64 {
        self.w0 * (0.5 * self.theta_convention.sign() * theta).exp()
    }
}

pub fn derive_params(p: &EllipticBeamParams) -> Result<DerivedBeamParams, AtmosphereError> {
    p.validate()?;
    let k = 2.0 * PI / p.wavelength;
    let omega = k * p.w0 * p.w0 / (2.0 * p.length);
    let rytov2 = 1.23 * p.cn2 * k.powf(7.0 / 6.0) * p.length.powf(11.0 / 6.0);
    let q = rytov2 * omega.powf(5.0 / 6.0);
    let d = 1.0 + 2.96 * q;
    let d2 = d * d;
    let theta_mean = (d2 / (omega * omega * (d2 + 1.2 * q).sqrt())).ln();
    let x0_var = 0.33 * p.w0 * p.w0 * rytov2 * omega.powf(-7.0 / 6.0);
    let theta_var = (1.2 * q / d2).ln_1p();
    let theta_cov = (-0.8 * q / d2).ln_1p();
    Ok(DerivedBeamParams {
        k,
        fresnel_omega: omega,
        rytov2,
        theta_mean,
        x0_var,
        theta_var,
        theta_cov,
        w0: p.w0,
        theta_convention: p.theta_convention,
    })
}

/// One random beam realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamSample {
    pub x0: f64,
    pub y0: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub chi: f64,
}

impl BeamSample {
    pub fn semi_axes(&self, d: &DerivedBeamParams) -> (f64, f64) {
        (d.spot_radius(self.theta1), d.spot_radius(self.theta2))
    }
}

/// Draws `(x₀, y₀)` independently with variance `x0_var`, `(Θ₁, Θ₂)` jointly
/// Gaussian through the symmetric square root of their covariance, and `χ`
/// uniformly on `[0, π/2]`.
pub fn sample_beam<R: Rng + ?Sized>(d: &DerivedBeamParams, rng: &mut R) -> BeamSample {
    let sx = d.x0_var.sqrt();
    let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let chi = rng.random::<f64>() * FRAC_PI_2;
    // sqrt([[v, c], [c, v]]) = ½[[p + q, p − q], [p − q, p + q]]
    let p = (d.theta_var + d.theta_cov).max(0.0).sqrt();
    let q = (d.theta_var - d.theta_cov).max(0.0).sqrt();
    let s = 0.5 * (p + q);
    let t = 0.5 * (p - q);
    BeamSample {
        x0: sx * z[0],
        y0: sx * z[1],
        theta1: d.theta_mean + s * z[2] + t * z[3],
        theta2: d.theta_mean + t * z[2] + s * z[3],
        chi,
    }
}

/// `1 − e^{−z} I₀(z)` without cancellation at small `z`.
fn one_minus_scaled_i0(z: f64) -> f64 {
    if z < 1.0 {
        // e^{-z}(I₀(z) − 1) with I₀ − 1 summed from its k >= 1 terms
        let q = 0.25 * z * z;
        let mut term = q;
        let mut i0m1 = q;
        let mut k = 2.0;
        while term > 1e-18 * i0m1 {
            term *= q / (k * k);
            i0m1 += term;
            k += 1.0;
        }
        -(-z).exp_m1() - (-z).exp() * i0m1
    } else {
        1.0 - specfun::bessel_i0e(z)
    }
}

/// Taylor coefficients of `2(1 − e^{−z/2}) − 1 + e^{−z} I₀(z)` from `z²` on.
const LOG_ARG_SERIES: [f64; 12] = [
    1.0 / 2.0,
    -3.0 / 8.0,
    17.0 / 96.0,
    -25.0 / 384.0,
    461.0 / 23040.0,
    -49.0 / 9216.0,
    3217.0 / 2580480.0,
    -2701.0 / 10321920.0,
    92377.0 / 1857945600.0,
    -6413.0 / 743178240.0,
    1352077.0 / 980995276800.0,
    -44447.0 / 217998950400.0,
];

/// Shape scale `R(ξ)` and exponent `λ(ξ)` as functions of `z = a²ξ²`.
///
/// Both come from `ln[2(1 − e^{−z/2}) / (1 − e^{−z} I₀(z))]`, which tends
/// to zero like `z/2`; near zero the log argument minus one is summed from
/// its Taylor series.
pub fn shape_factors(z: f64) -> (f64, f64) {
    if z <= 0.0 {
        return (f64::INFINITY, 2.0);
    }
    let g = one_minus_scaled_i0(z);
    let log_term = if z < 0.1 {
        let h = LOG_ARG_SERIES.iter().rev().fold(0.0, |acc, c| acc * z + c) * z * z;
        (h / g).ln_1p()
    } else {
        (2.0 * -(-0.5 * z).exp_m1() / g).ln()
    };
    let lambda = 2.0 * z * specfun::bessel_i1e(z) / (g * log_term);
    let r = log_term.powf(-1.0 / lambda);
    (r, lambda)
}

/// Effective spot radius `W_eff(W₁, W₂, χ)` seen by an aperture of radius `a`.
pub fn effective_spot_radius(w1: f64, w2: f64, chi: f64, a: f64) -> Result<f64, SpecFunError> {
    let z = effective_shape_argument(w1, w2, chi, a)?;
    Ok(2.0 * a / z.sqrt())
}

/// `4a²/W_eff²`, obtained as `W₀(e^L)` so large exponents cannot overflow.
fn effective_shape_argument(w1: f64, w2: f64, chi: f64, a: f64) -> Result<f64, SpecFunError> {
    let a2 = a * a;
    let (c, s) = (chi.cos(), chi.sin());
    let log_arg = (4.0 * a2 / (w1 * w2)).ln()
        + a2 / (w1 * w1) * (1.0 + 2.0 * c * c)
        + a2 / (w2 * w2) * (1.0 + 2.0 * s * s);
    specfun::lambert_w0_of_exp(log_arg)
}

/// Transmittance of a centered elliptic beam.
pub fn centered_transmittance(w1: f64, w2: f64, a: f64) -> f64 {
    let a2 = a * a;
    let u1 = a2 / (w1 * w1);
    let u2 = a2 / (w2 * w2);
    // I₀(u1 − u2) e^{−(u1 + u2)} = i0e(|u1 − u2|) e^{−2 min(u1, u2)}
    let first = specfun::bessel_i0e(u1 - u2) * (-2.0 * u1.min(u2)).exp();
    let inv_diff = (1.0 / w1 - 1.0 / w2).abs();
    if a * inv_diff < SYMMETRIC_GUARD {
        return 1.0 - first;
    }
    let zd = a2 * inv_diff * inv_diff;
    let (r, lambda) = shape_factors(zd);
    let ratio = (w1 + w2).powi(2) / (w1 * w1 - w2 * w2).abs() / r;
    let second = -2.0 * (-0.5 * zd).exp_m1() * (-ratio.powf(lambda)).exp();
    1.0 - first - second
}

/// Intensity transmittance `η` of one beam realization through an aperture of
/// radius `a`, clamped to `[0, 1]`.
pub fn aperture_transmittance(
    s: &BeamSample,
    d: &DerivedBeamParams,
    a: f64,
) -> Result<f64, AtmosphereError> {
    let (w1, w2) = s.semi_axes(d);
    let eta0 = centered_transmittance(w1, w2, a);
    let r0 = s.x0.hypot(s.y0);
    let eta = if r0 == 0.0 {
        eta0
    } else {
        let (r, lambda) = shape_factors(effective_shape_argument(w1, w2, s.chi, a)?);
        eta0 * (-(r0 / a / r).powf(lambda)).exp()
    };
    if !(-CLAMP_TOL_BELOW..=1.0 + CLAMP_TOL_ABOVE).contains(&eta) {
        return Err(AtmosphereError::Inconsistent { value: eta, sample: *s });
    }
    Ok(eta.clamp(0.0, 1.0))
}

/// Seeded amplitude-transmission samples of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmittanceEnsemble {
    samples: Vec<f64>,
    seed: u64,
    params: Option<EllipticBeamParams>,
    efficiency: f64,
}

impl TransmittanceEnsemble {
    /// Wraps externally produced samples (e.g. constant-loss or synthetic
    /// channels).
    pub fn from_samples(
        samples: Vec<f64>,
        seed: u64,
        params: Option<EllipticBeamParams>,
    ) -> Result<Self, AtmosphereError> {
        if samples.is_empty() {
            return Err(AtmosphereError::Empty);
        }
        if let Some(&bad) = samples.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(AtmosphereError::SampleRange(bad));
        }
        Ok(Self { samples, seed, params, efficiency: 1.0 })
    }

    pub(crate) fn retained(&self, samples: Vec<f64>) -> Self {
        let efficiency = self.efficiency * samples.len() as f64 / self.samples.len() as f64;
        Self { samples, seed: self.seed, params: self.params, efficiency }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> Option<&EllipticBeamParams> {
        self.params.as_ref()
    }

    /// Fraction of the originally sampled events still present; `1` unless
    /// the ensemble came out of a postselection.
    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn mean(&self) -> f64 {
        stats::shifted_mean(&self.samples)
    }

    /// `√(⟨T²⟩ − ⟨T⟩²)`.
    pub fn std_dev(&self) -> f64 {
        stats::mean_and_std_dev(&self.samples).1
    }

    pub fn fraction_below(&self, t: f64) -> f64 {
        let below = self.samples.iter().filter(|&&s| s < t).count();
        below as f64 / self.samples.len() as f64
    }

    /// SHA-256 over the little-endian bytes of every sample.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.samples {
            h.update(s.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// One transmission per line after a comment header carrying the seed and
    /// the parameter hash.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let params_hash = self.params.map(|p| p.content_hash()).unwrap_or_else(|| "none".into());
        writeln!(w, "# seed={} params_sha256={} n={}", self.seed, params_hash, self.len())?;
        writeln!(w, "transmission")?;
        for s in &self.samples {
            writeln!(w, "{}", stats::fmt_f64(*s))?;
        }
        Ok(())
    }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws `n` amplitude transmissions `T = √(η_m η)`. Sample `i` uses its own
/// ChaCha stream keyed by `(seed, i)`, so the result does not depend on how
/// the work is split across threads.
pub fn sample_transmittance_ensemble(
    p: &EllipticBeamParams,
    n: usize,
    seed: u64,
) -> Result<TransmittanceEnsemble, AtmosphereError> {
    if n == 0 {
        return Err(AtmosphereError::Empty);
    }
    let d = derive_params(p)?;
    let results: Vec<Result<f64, AtmosphereError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let beam = sample_beam(&d, &mut sample_rng(seed, i));
            aperture_transmittance(&beam, &d, p.aperture).map(|eta| (p.eta_m * eta).sqrt())
        })
        .collect();
    let mut samples = Vec::with_capacity(n);
    for (index, r) in results.into_iter().enumerate() {
        samples.push(r.map_err(|e| AtmosphereError::Sample { index, source: Box::new(e) })?);
    }
    Ok(TransmittanceEnsemble { samples, seed, params: Some(*p), efficiency: 1.0 })
}

/// Normalized histogram of an ensemble on uniform bins over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalPdt {
    pub bin_edges: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl EmpiricalPdt {
    pub fn bin_centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    pub fn mean(&self) -> f64 {
        self.bin_centers().zip(&self.probabilities).map(|(c, p)| c * p).sum()
    }
}

pub fn empirical_pdt(e: &TransmittanceEnsemble, bins: usize) -> Result<EmpiricalPdt, AtmosphereError> {
    if bins < 2 {
        return Err(AtmosphereError::TooFewBins(bins));
    }
    let mut counts = vec![0usize; bins];
    for &t in e.samples() {
        let idx = ((t * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = e.len() as f64;
    Ok(EmpiricalPdt {
        bin_edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        probabilities: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// Fraction of samples with `T >= t_min`.
pub fn exceedance(e: &TransmittanceEnsemble, t_min: f64) -> f64 {
    let kept = e.samples().iter().filter(|&&t| t >= t_min).count();
    kept as f64 / e.len() as f64
}
