//! Run configuration: a TOML file with `[channel]`, `[sweep]`, `[scheme]`
//! and `[run]` sections, overridable from the command line.
//!
//! ```toml
//! [channel]
//! wavelength_nm = 809
//! w0_mm = 20
//! length_m = 1600
//! aperture_m = 0.04
//! eta_m = 0.7
//! cn2 = 1.5e-14
//!
//! [sweep]
//! r_lo = 0.0
//! r_hi = 3.0
//! r_step = 0.05
//!
//! [scheme]
//! modes = ["direct-single", "adaptive-single"]
//!
//! [run]
//! samples = 100000
//! seed = 7
//! ```
//!
//! Without a `[channel]` section, `fidelity-sweep` runs in constant-loss
//! mode using `[sweep] t_a` and `t_b`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atmosphere::{EllipticBeamParams, ThetaConvention, DEFAULT_PDT_BINS};
use crate::strategies::{Postselection, SchemeMode};

pub const MIN_SAMPLES: usize = 100;
pub const MAX_SQUEEZING: f64 = 10.0;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(invalid(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelCount {
    #[default]
    Single,
    Dual,
}

/// One number or a list of numbers.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    channel: Option<RawChannel>,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    scheme: RawScheme,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    wavelength_nm: f64,
    w0_mm: f64,
    length_m: f64,
    aperture_m: f64,
    eta_m: f64,
    cn2: f64,
    #[serde(default)]
    theta_convention: ThetaConvention,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    r_lo: Option<f64>,
    r_hi: Option<f64>,
    r_step: Option<f64>,
    r: Option<f64>,
    thresholds: Option<Vec<f64>>,
    t_a: Option<f64>,
    t_b: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    modes: Option<Vec<String>>,
    t_min: Option<OneOrMany>,
    t_min_a: Option<f64>,
    t_min_b: Option<f64>,
    channels: Option<ChannelCount>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    samples: Option<usize>,
    seed: Option<u64>,
    bins: Option<usize>,
    format: Option<OutputFormat>,
}

/// Squeezing grid `r_lo, r_lo + step, …` up to and including `r_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl SqueezingRange {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        // Rounding to 1e-12 keeps grid values like 0.15 free of accumulated
        // representation noise in the output.
        (0..=n).map(|i| ((self.lo + i as f64 * self.step) * 1e12).round() / 1e12).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub r_range: SqueezingRange,
    /// Fixed squeezing for threshold sweeps.
    pub r: f64,
    pub thresholds: Vec<f64>,
    /// Constant-loss transmissions.
    pub t_a: f64,
    pub t_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeConfig {
    pub modes: Vec<SchemeMode>,
    /// Postselection settings; empty means no postselection.
    pub postselect: Vec<Postselection>,
    pub channels: ChannelCount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub channel: Option<EllipticBeamParams>,
    pub samples: usize,
    pub seed: u64,
    pub bins: usize,
    pub sweep: SweepSpec,
    pub scheme: SchemeConfig,
    pub format: OutputFormat,
    /// Left out of summaries so they do not depend on where they are written.
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw: RawFile = toml::from_str(text)?;
        Self::resolve(raw, overrides)
    }

    fn resolve(raw: RawFile, ov: &Overrides) -> Result<Self, ConfigError> {
        let channel = raw.channel.map(|c| EllipticBeamParams {
            wavelength: c.wavelength_nm * 1e-9,
            w0: c.w0_mm * 1e-3,
            length: c.length_m,
            aperture: c.aperture_m,
            eta_m: c.eta_m,
            cn2: c.cn2,
            theta_convention: c.theta_convention,
        });
        if let Some(ch) = &channel {
            ch.validate().map_err(|e| invalid(e.to_string()))?;
        }

        let s = raw.sweep;
        let r_range = SqueezingRange {
            lo: s.r_lo.unwrap_or(0.0),
            hi: s.r_hi.unwrap_or(3.0),
            step: s.r_step.unwrap_or(0.05),
        };
        if !(0.0 <= r_range.lo && r_range.lo < r_range.hi && r_range.hi <= MAX_SQUEEZING) {
            return Err(invalid(format!(
                "squeezing range must satisfy 0 <= r_lo < r_hi <= {MAX_SQUEEZING}, got [{}, {}]",
                r_range.lo, r_range.hi
            )));
        }
        if !(r_range.step > 0.0 && r_range.step.is_finite()) {
            return Err(invalid(format!("r_step must be > 0, got {}", r_range.step)));
        }
        let r = s.r.unwrap_or(1.0);
        if !(0.0..=MAX_SQUEEZING).contains(&r) {
            return Err(invalid(format!("r must lie in [0, {MAX_SQUEEZING}], got {r}")));
        }
        let thresholds = s.thresholds.unwrap_or_else(|| (0..=16).map(|i| i as f64 / 20.0).collect());
        check_thresholds(&thresholds)?;
        let t_a = s.t_a.unwrap_or(1.0);
        let t_b = s.t_b.unwrap_or(1.0);
        for (name, t) in [("t_a", t_a), ("t_b", t_b)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {t}")));
            }
        }

        let sc = raw.scheme;
        let modes = match sc.modes {
            Some(list) if list.is_empty() => return Err(invalid("scheme.modes is empty")),
            Some(list) => list
                .iter()
                .map(|m| m.parse::<SchemeMode>().map_err(|e| invalid(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![SchemeMode::DirectSingle, SchemeMode::AdaptiveSingle],
        };
        let postselect = match (sc.t_min, sc.t_min_a, sc.t_min_b) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(invalid("use either t_min or the t_min_a/t_min_b pair"))
            }
            (Some(list), None, None) => list
                .into_vec()
                .into_iter()
                .map(|t| Postselection::common(t).map_err(|e| invalid(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
            (None, None, None) => Vec::new(),
            (None, a, b) => {
                let a = a.or(b).unwrap_or(0.0);
                let b = b.unwrap_or(a);
                vec![Postselection::per_channel(a, b).map_err(|e| invalid(e.to_string()))?]
            }
        };
        let channels = sc.channels.unwrap_or_else(|| {
            if modes.iter().any(|m| m.is_dual()) {
                ChannelCount::Dual
            } else {
                ChannelCount::Single
            }
        });

        let samples = ov.samples.or(raw.run.samples).unwrap_or(DEFAULT_SAMPLES);
        if samples < MIN_SAMPLES {
            return Err(invalid(format!("samples must be >= {MIN_SAMPLES}, got {samples}")));
        }
        let bins = raw.run.bins.unwrap_or(DEFAULT_PDT_BINS);
        if bins < 2 {
            return Err(invalid(format!("bins must be >= 2, got {bins}")));
        }

        Ok(RunConfig {
            channel,
            samples,
            seed: ov.seed.or(raw.run.seed).unwrap_or(DEFAULT_SEED),
            bins,
            sweep: SweepSpec { r_range, r, thresholds, t_a, t_b },
            scheme: SchemeConfig { modes, postselect, channels },
            format: ov.format.or(raw.run.format).unwrap_or_default(),
            output: ov.out.clone(),
        })
    }
}

fn check_thresholds(t: &[f64]) -> Result<(), ConfigError> {
    if t.is_empty() {
        return Err(invalid("thresholds list is empty"));
    }
    if t.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(invalid("thresholds must lie in [0, 1]"));
    }
    if t.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("thresholds must be sorted ascending"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ERLANGEN: &str = r#"
[channel]
wavelength_nm = 809
w0_mm = 20
length_m = 1600
aperture_m = 0.04
eta_m = 0.7
cn2 = 1.5e-14
"#;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, &Overrides::default())
    }

    #[test]
    fn channel_units_converted() {
        let c = parse(ERLANGEN).unwrap();
        let ch = c.channel.unwrap();
        let want = EllipticBeamParams::erlangen(1.5e-14);
        assert!((ch.wavelength - want.wavelength).abs() < 1e-20);
        assert!((ch.w0 - want.w0).abs() < 1e-15);
        assert_eq!(ch.length, want.length);
        assert_eq!(ch.aperture, want.aperture);
        assert_eq!(ch.theta_convention, ThetaConvention::Broadening);
        assert_eq!(c.samples, DEFAULT_SAMPLES);
        assert_eq!(c.scheme.modes, vec![SchemeMode::DirectSingle, SchemeMode::AdaptiveSingle]);
    }

    #[test]
    fn empty_file_is_constant_loss() {
        let c = parse("").unwrap();
        assert!(c.channel.is_none());
        assert_eq!(c.sweep.r_range.points().len(), 61);
    }

    #[test]
    fn too_few_samples() {
        let err = parse("[run]\nsamples = 50\n").unwrap_err();
        assert!(err.to_string().contains("samples must be >= 100"));
        let ov = Overrides { samples: Some(50), ..Default::default() };
        assert!(RunConfig::parse(ERLANGEN, &ov).is_err());
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides {
            seed: Some(9),
            samples: Some(500),
            out: Some("x.csv".into()),
            format: Some(OutputFormat::Json),
        };
        let c = RunConfig::parse("[run]\nseed = 3\nsamples = 200\n", &ov).unwrap();
        assert_eq!((c.seed, c.samples, c.format), (9, 500, OutputFormat::Json));
    }

    #[test]
    fn range_validation() {
        assert!(parse("[sweep]\nr_lo = 2.0\nr_hi = 1.0\n").is_err());
        assert!(parse("[sweep]\nr_hi = 11.0\n").is_err());
        assert!(parse("[sweep]\nr_step = 0.0\n").is_err());
        assert!(parse("[sweep]\nr_lo = -0.1\n").is_err());
        assert!(parse("[sweep]\nthresholds = [0.5, 0.2]\n").is_err());
        assert!(parse("[sweep]\nt_b = 1.5\n").is_err());
    }

    #[test]
    fn scheme_parsing() {
        let c = parse("[scheme]\nmodes = [\"adaptive-dual\"]\nt_min = 0.6\n").unwrap();
        assert_eq!(c.scheme.modes, vec![SchemeMode::AdaptiveDual]);
        assert_eq!(c.scheme.channels, ChannelCount::Dual);
        assert_eq!(c.scheme.postselect, vec![Postselection::common(0.6).unwrap()]);
        let c = parse("[scheme]\nt_min = [0.5, 0.6]\n").unwrap();
        assert_eq!(c.scheme.postselect.len(), 2);
        let c = parse("[scheme]\nt_min_a = 0.3\nt_min_b = 0.5\n").unwrap();
        assert_eq!(c.scheme.postselect, vec![Postselection::per_channel(0.3, 0.5).unwrap()]);
        assert!(parse("[scheme]\nmodes = [\"bogus\"]\n").is_err());
        assert!(parse("[scheme]\nt_min = 0.5\nt_min_a = 0.3\n").is_err());
        assert!(parse("[scheme]\nt_min = 1.5\n").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse("[channel]\nwavelength = 1\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse("[sweep]\nrlo = 1\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn invalid_channel_rejected() {
        let text = ERLANGEN.replace("eta_m = 0.7", "eta_m = 1.7");
        assert!(matches!(parse(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn grid_includes_endpoint() {
        let r = SqueezingRange { lo: 0.0, hi: 3.0, step: 0.1 };
        let p = r.points();
        assert_eq!(p.len(), 31);
        assert!((p[30] - 3.0).abs() < 1e-12);
    }
}
