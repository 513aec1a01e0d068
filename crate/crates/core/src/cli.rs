//! The three sweep commands behind the `cvteleport` binary.
//!
//! Each command is a pure function of the resolved [`RunConfig`]: it returns
//! a [`Report`] holding the data table and a JSON summary, and the caller
//! decides where those go. Rendering is deterministic so repeated runs give
//! byte-identical files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use crate::atmosphere::{
    empirical_pdt, sample_transmittance_ensemble, AtmosphereError, TransmittanceEnsemble,
};
use crate::config::{ChannelCount, ConfigError, OutputFormat, RunConfig};
use crate::gaussian_teleport::{
    adaptive_fidelity, crossover_squeezing, fidelity_closed_form, optimal_squeezing, Squeezing,
    TeleportError, TeleportParams,
};
use crate::stats::fmt_f64;
use crate::strategies::{
    fidelity_vs_threshold, Channels, MeanFidelityResult, Postselection, SchemeMode, SchemeSpec,
    StrategyError, ThresholdRow,
};

/// Fidelity bound reachable without entanglement.
pub const CLASSICAL_LIMIT: f64 = 0.5;

/// Offset that turns the run seed into the seed of the independent channel A.
const CHANNEL_A_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical inconsistency: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// Process exit status: 1 for configuration problems, 2 for numerical
    /// ones. Output failures count as configuration problems since they
    /// usually mean a bad `--out` path.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<AtmosphereError> for CliError {
    fn from(e: AtmosphereError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<StrategyError> for CliError {
    fn from(e: StrategyError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<TeleportError> for CliError {
    fn from(e: TeleportError) -> Self {
        CliError::Config(ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Pdt,
    FidelitySweep,
    PostselectSweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Pdt => "pdt",
            Command::FidelitySweep => "fidelity-sweep",
            Command::PostselectSweep => "postselect-sweep",
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json!(x),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

/// Output of one command: a data table plus a summary.
#[derive(Debug, Clone)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Value,
    /// The channel B ensemble, if one was sampled.
    pub ensemble: Option<TransmittanceEnsemble>,
}

impl Report {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Summary and table in a single document.
    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self.rows.iter().map(|r| r.iter().map(Cell::json).collect()).collect();
        let doc = json!({ "summary": self.summary, "columns": self.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn run(command: Command, config: &RunConfig) -> Result<Report, CliError> {
    match command {
        Command::Pdt => run_pdt(config),
        Command::FidelitySweep => run_fidelity_sweep(config),
        Command::PostselectSweep => run_postselect_sweep(config),
    }
}

/// Seed of the channel A ensemble in dual-channel runs.
pub fn channel_a_seed(seed: u64) -> u64 {
    seed.wrapping_add(CHANNEL_A_SEED_OFFSET)
}

struct Sampled {
    b: TransmittanceEnsemble,
    a: Option<TransmittanceEnsemble>,
}

impl Sampled {
    fn channels(&self) -> Channels<'_> {
        match &self.a {
            Some(a) => Channels::Dual(a, &self.b),
            None => Channels::Single(&self.b),
        }
    }

    fn summary(&self) -> Value {
        let mut v = json!({ "channel_b": ensemble_summary(&self.b) });
        if let Some(a) = &self.a {
            v["channel_a"] = ensemble_summary(a);
        }
        v
    }
}

fn ensemble_summary(e: &TransmittanceEnsemble) -> Value {
    json!({
        "seed": e.seed(),
        "n": e.len(),
        "mean": e.mean(),
        "stddev": e.std_dev(),
        "sha256": e.content_hash(),
        "params_sha256": e.params().map(|p| p.content_hash()),
    })
}

fn require_channel(config: &RunConfig, command: Command) -> Result<(), CliError> {
    if config.channel.is_none() {
        return Err(ConfigError::Invalid(format!(
            "{} needs a [channel] section",
            command.as_str()
        ))
        .into());
    }
    Ok(())
}

fn sample(config: &RunConfig, dual: bool) -> Result<Sampled, CliError> {
    let ch = config.channel.as_ref().expect("channel checked by caller");
    let b = sample_transmittance_ensemble(ch, config.samples, config.seed)?;
    let a = if dual {
        Some(sample_transmittance_ensemble(ch, config.samples, channel_a_seed(config.seed))?)
    } else {
        None
    };
    Ok(Sampled { b, a })
}

fn base_summary(command: Command, config: &RunConfig) -> Value {
    json!({
        "command": command.as_str(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "config": config,
        "theta_convention": config.channel.map(|c| c.theta_convention),
    })
}

fn squeezing_json(s: Squeezing) -> Value {
    match s {
        Squeezing::Finite(r) => json!(r),
        Squeezing::Unbounded => json!(s.to_string()),
    }
}

/// Histogram of the channel B transmission.
pub fn run_pdt(config: &RunConfig) -> Result<Report, CliError> {
    require_channel(config, Command::Pdt)?;
    let sampled = sample(config, false)?;
    let pdt = empirical_pdt(&sampled.b, config.bins)?;
    let rows = pdt
        .bin_centers()
        .zip(&pdt.probabilities)
        .map(|(c, &p)| vec![Cell::Num(c), Cell::Num(p)])
        .collect();
    let mut summary = base_summary(Command::Pdt, config);
    summary["mean"] = json!(sampled.b.mean());
    summary["stddev"] = json!(sampled.b.std_dev());
    summary["ensemble"] = sampled.summary();
    Ok(Report {
        columns: vec!["bin_center", "probability"],
        rows,
        summary,
        ensemble: Some(sampled.b),
    })
}

const SWEEP_COLUMNS: [&str; 9] = [
    "r",
    "scheme",
    "t_min",
    "mean_fidelity",
    "std_error",
    "efficiency",
    "n_used",
    "classical_limit",
    "status",
];

fn sweep_row(r: f64, mode: SchemeMode, ps: Option<Postselection>, res: Option<MeanFidelityResult>) -> Vec<Cell> {
    let t_min = match ps {
        Some(p) if p.t_min_a == p.t_min_b => Cell::Num(p.t_min_b),
        Some(p) => Cell::Text(format!("{}/{}", fmt_f64(p.t_min_a), fmt_f64(p.t_min_b))),
        None => Cell::Empty,
    };
    let head = vec![Cell::Num(r), Cell::Text(mode.to_string()), t_min];
    let tail = match res {
        Some(m) => vec![
            Cell::Num(m.mean_fidelity),
            Cell::Num(m.std_error),
            Cell::Num(m.retained_fraction),
            Cell::Int(m.n_used),
            Cell::Num(CLASSICAL_LIMIT),
            Cell::Text("ok".into()),
        ],
        None => vec![
            Cell::Empty,
            Cell::Empty,
            Cell::Num(0.0),
            Cell::Int(0),
            Cell::Num(CLASSICAL_LIMIT),
            Cell::Text("empty".into()),
        ],
    };
    head.into_iter().chain(tail).collect()
}

fn postselect_options(config: &RunConfig) -> Vec<Option<Postselection>> {
    if config.scheme.postselect.is_empty() {
        vec![None]
    } else {
        config.scheme.postselect.iter().copied().map(Some).collect()
    }
}

/// Fidelity against squeezing for every configured scheme, through the
/// sampled channel or, without a `[channel]` section, through fixed
/// transmissions `t_a` and `t_b`.
pub fn run_fidelity_sweep(config: &RunConfig) -> Result<Report, CliError> {
    let r_values = config.sweep.r_range.points();
    let options = postselect_options(config);
    let mut rows = Vec::new();
    let mut summary = base_summary(Command::FidelitySweep, config);

    let ensemble = if config.channel.is_some() {
        let dual = config.scheme.modes.iter().any(|m| m.is_dual());
        let sampled = sample(config, dual)?;
        let channels = sampled.channels();
        for &r in &r_values {
            for &mode in &config.scheme.modes {
                for &ps in &options {
                    let spec = SchemeSpec { mode, postselect: ps };
                    let res = match (mode.is_dual(), channels) {
                        (true, Channels::Dual(..)) | (false, Channels::Single(_)) => {
                            channels.mean_fidelity(r, &spec)
                        }
                        (false, Channels::Dual(_, b)) => Channels::Single(b).mean_fidelity(r, &spec),
                        (true, Channels::Single(_)) => unreachable!("dual ensemble sampled"),
                    };
                    let res = match res {
                        Ok(m) => Some(m),
                        Err(StrategyError::EmptyAfterPostselection { .. }) => None,
                        Err(e) => return Err(e.into()),
                    };
                    rows.push(sweep_row(r, mode, ps, res));
                }
            }
        }
        summary["ensemble"] = sampled.summary();
        Some(sampled.b)
    } else {
        let (t_a, t_b) = (config.sweep.t_a, config.sweep.t_b);
        for &r in &r_values {
            for &mode in &config.scheme.modes {
                for &ps in &options {
                    rows.push(sweep_row(r, mode, ps, constant_loss(r, t_a, t_b, mode, ps)?));
                }
            }
        }
        summary["constant_loss"] = json!({
            "t_a": t_a,
            "t_b": t_b,
            "optimal_squeezing": squeezing_json(optimal_squeezing(t_a, t_b)?),
            "crossover_squeezing": squeezing_json(crossover_squeezing(t_b)?),
        });
        None
    };

    Ok(Report { columns: SWEEP_COLUMNS.to_vec(), rows, summary, ensemble })
}

/// Fidelity through fixed transmissions. Single-channel schemes keep mode A
/// lossless and use `t_b` only.
fn constant_loss(
    r: f64,
    t_a: f64,
    t_b: f64,
    mode: SchemeMode,
    ps: Option<Postselection>,
) -> Result<Option<MeanFidelityResult>, CliError> {
    let t_a = if mode.is_dual() { t_a } else { 1.0 };
    let (lo_a, lo_b) = ps.map_or((0.0, 0.0), |p| (p.t_min_a, p.t_min_b));
    if (mode.is_dual() && t_a < lo_a) || t_b < lo_b {
        return Ok(None);
    }
    let fidelity = if mode.is_adaptive() {
        adaptive_fidelity(r, t_a.min(t_b))
    } else {
        fidelity_closed_form(&TeleportParams::new(r, t_a, t_b)?)
    };
    Ok(Some(MeanFidelityResult {
        mean_fidelity: fidelity,
        std_error: 0.0,
        retained_fraction: 1.0,
        n_used: 1,
    }))
}

/// Direct and adaptive fidelity against the postselection threshold at the
/// fixed squeezing `[sweep] r`.
pub fn run_postselect_sweep(config: &RunConfig) -> Result<Report, CliError> {
    require_channel(config, Command::PostselectSweep)?;
    let dual = config.scheme.channels == ChannelCount::Dual;
    let (direct_mode, adaptive_mode) = if dual {
        (SchemeMode::DirectDual, SchemeMode::AdaptiveDual)
    } else {
        (SchemeMode::DirectSingle, SchemeMode::AdaptiveSingle)
    };
    let sampled = sample(config, dual)?;
    let channels = sampled.channels();
    let r = config.sweep.r;
    let thresholds = &config.sweep.thresholds;
    let direct = fidelity_vs_threshold(r, channels, direct_mode, thresholds)?;
    let adaptive = fidelity_vs_threshold(r, channels, adaptive_mode, thresholds)?;

    let rows = direct.iter().zip(&adaptive).map(|(d, a)| postselect_row(d, a)).collect();
    let mut summary = base_summary(Command::PostselectSweep, config);
    summary["r"] = json!(r);
    summary["schemes"] = json!([direct_mode, adaptive_mode]);
    summary["ensemble"] = sampled.summary();
    Ok(Report {
        columns: vec![
            "t_min",
            "mean_fidelity_direct",
            "std_error_direct",
            "mean_fidelity_adaptive",
            "std_error_adaptive",
            "efficiency",
            "n_used",
            "status",
        ],
        rows,
        summary,
        ensemble: Some(sampled.b),
    })
}

fn postselect_row(direct: &ThresholdRow, adaptive: &ThresholdRow) -> Vec<Cell> {
    let pair = |res: &Option<MeanFidelityResult>| match res {
        Some(m) => [Cell::Num(m.mean_fidelity), Cell::Num(m.std_error)],
        None => [Cell::Empty, Cell::Empty],
    };
    let [fd, ed] = pair(&direct.result);
    let [fa, ea] = pair(&adaptive.result);
    let (eff, n, status) = match direct.result {
        Some(m) => (m.retained_fraction, m.n_used, "ok"),
        None => (0.0, 0, "empty"),
    };
    vec![
        Cell::Num(direct.t_min),
        fd,
        ed,
        fa,
        ea,
        Cell::Num(eff),
        Cell::Int(n),
        Cell::Text(status.into()),
    ]
}

/// Where a report goes.
#[derive(Debug, Clone)]
pub struct OutputPlan {
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    /// Destination for the channel B ensemble CSV, if requested.
    pub ensemble: Option<PathBuf>,
}

/// Path of the summary written next to a CSV data file.
pub fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Writes a report. CSV goes to `out` with the summary beside it in
/// `<out>.summary.json`; JSON puts both in `out`. Without `out` the data goes
/// to `stdout` and the summary to `stderr`.
pub fn emit<O: Write, E: Write>(
    report: &Report,
    plan: &OutputPlan,
    stdout: &mut O,
    stderr: &mut E,
) -> Result<(), CliError> {
    let console = |e: io::Error| CliError::Io { path: PathBuf::from("<stdout>"), source: e };
    match (plan.format, &plan.out) {
        (OutputFormat::Csv, Some(out)) => {
            write_file(out, report.to_csv().as_bytes())?;
            write_file(&summary_path(out), report.summary_json().as_bytes())?;
        }
        (OutputFormat::Json, Some(out)) => write_file(out, report.to_json().as_bytes())?,
        (OutputFormat::Csv, None) => {
            stdout.write_all(report.to_csv().as_bytes()).map_err(console)?;
            stderr.write_all(report.summary_json().as_bytes()).map_err(console)?;
        }
        (OutputFormat::Json, None) => stdout.write_all(report.to_json().as_bytes()).map_err(console)?,
    }
    if let Some(path) = &plan.ensemble {
        let Some(e) = &report.ensemble else {
            return Err(ConfigError::Invalid("this run samples no ensemble to export".into()).into());
        };
        let mut buf = Vec::new();
        e.write_csv(&mut buf).expect("writing to memory");
        write_file(path, &buf)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    fn config(text: &str) -> RunConfig {
        RunConfig::parse(text, &Overrides::default()).unwrap()
    }

    const CHANNEL: &str = "[channel]\nwavelength_nm = 809\nw0_mm = 20\nlength_m = 1600\n\
        aperture_m = 0.04\neta_m = 0.7\ncn2 = 1.5e-14\n";

    fn num(cell: &Cell) -> f64 {
        match cell {
            Cell::Num(x) => *x,
            other => panic!("not a number: {other:?}"),
        }
    }

    #[test]
    fn constant_loss_peak_near_optimum() {
        let c = config("[sweep]\nt_a = 1.0\nt_b = 0.8\nr_step = 0.01\n[scheme]\nmodes = [\"direct-single\"]\n");
        let rep = run_fidelity_sweep(&c).unwrap();
        let f = rep.column("mean_fidelity").unwrap();
        let best = rep.rows.iter().max_by(|a, b| num(&a[f]).total_cmp(&num(&b[f]))).unwrap();
        let r_opt = optimal_squeezing(1.0, 0.8).unwrap().finite().unwrap();
        assert!((num(&best[0]) - r_opt).abs() <= 0.01);
        assert!((rep.summary["constant_loss"]["optimal_squeezing"].as_f64().unwrap() - r_opt).abs() < 1e-15);
    }

    #[test]
    fn constant_loss_symmetric_reports_monotone() {
        let c = config("[sweep]\nt_a = 0.7\nt_b = 0.7\n[scheme]\nmodes = [\"direct-dual\"]\n");
        let rep = run_fidelity_sweep(&c).unwrap();
        assert_eq!(
            rep.summary["constant_loss"]["optimal_squeezing"],
            json!("monotone (no finite optimum)")
        );
        assert!(rep.summary["constant_loss"]["crossover_squeezing"].is_number());
    }

    #[test]
    fn constant_loss_adaptive_lossless_tends_to_one() {
        let c = config("[sweep]\nr_hi = 10.0\nr_step = 0.5\n[scheme]\nmodes = [\"adaptive-single\"]\n");
        let rep = run_fidelity_sweep(&c).unwrap();
        let last = rep.rows.last().unwrap();
        assert!(num(&last[3]) > 1.0 - 1e-8);
    }

    #[test]
    fn constant_loss_threshold_above_transmission_is_empty() {
        let c = config("[sweep]\nt_b = 0.5\n[scheme]\nmodes = [\"direct-single\"]\nt_min = 0.6\n");
        let rep = run_fidelity_sweep(&c).unwrap();
        assert!(rep.rows.iter().all(|r| r[8] == Cell::Text("empty".into())));
    }

    #[test]
    fn numerical_failures_exit_with_two() {
        let e: CliError = AtmosphereError::SampleRange(1.5).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = StrategyError::LengthMismatch { a: 1, b: 2 }.into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = TeleportError::Squeezing(-1.0).into();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn pdt_needs_channel() {
        let err = run_pdt(&config("")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn pdt_histogram_normalized() {
        let c = config(&format!("{CHANNEL}[run]\nsamples = 2000\nbins = 20\n"));
        let rep = run_pdt(&c).unwrap();
        assert_eq!(rep.rows.len(), 20);
        let total: f64 = rep.rows.iter().map(|r| num(&r[1])).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(rep.summary["ensemble"]["channel_b"]["n"], json!(2000));
        assert_eq!(rep.summary["theta_convention"], json!("broadening"));
    }

    #[test]
    fn postselect_first_row_matches_unselected() {
        let c = config(&format!(
            "{CHANNEL}[sweep]\nr = 1.0\nr_lo = 1.0\nr_hi = 1.5\nr_step = 1.0\n\
             thresholds = [0.0, 0.5, 0.95]\n[run]\nsamples = 3000\n"
        ));
        let ps = run_postselect_sweep(&c).unwrap();
        let fs = run_fidelity_sweep(&c).unwrap();
        assert_eq!(num(&ps.rows[0][5]), 1.0);
        // direct-single at r = 1 is the first row of the fidelity sweep
        assert_eq!(num(&ps.rows[0][1]), num(&fs.rows[0][3]));
        assert_eq!(num(&ps.rows[0][3]), num(&fs.rows[1][3]));
        assert_eq!(ps.rows[2][7], Cell::Text("empty".into()));
        assert_eq!(ps.rows[2][1], Cell::Empty);
    }

    #[test]
    fn dual_uses_independent_seed() {
        let c = config(&format!(
            "{CHANNEL}[scheme]\nmodes = [\"direct-dual\", \"direct-single\"]\n\
             [sweep]\nr_lo = 0.0\nr_hi = 0.5\nr_step = 0.5\n[run]\nsamples = 500\nseed = 4\n"
        ));
        let rep = run_fidelity_sweep(&c).unwrap();
        let e = &rep.summary["ensemble"];
        assert_eq!(e["channel_a"]["seed"], json!(channel_a_seed(4)));
        assert_ne!(e["channel_a"]["sha256"], e["channel_b"]["sha256"]);
        assert_eq!(rep.rows.len(), 4);
    }

    #[test]
    fn csv_and_json_rendering() {
        let rep = Report {
            columns: vec!["a", "b", "c"],
            rows: vec![vec![Cell::Num(0.5), Cell::Empty, Cell::Text("ok".into())]],
            summary: json!({"k": 1}),
            ensemble: None,
        };
        assert_eq!(rep.to_csv(), "a,b,c\n0.50000000000000000,,ok\n");
        let v: Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(v["rows"][0], json!([0.5, null, "ok"]));
    }

    #[test]
    fn emit_without_out_splits_streams() {
        let rep = run_fidelity_sweep(&config("[sweep]\nr_hi = 0.1\nr_step = 0.1\n")).unwrap();
        let plan = OutputPlan { format: OutputFormat::Csv, out: None, ensemble: None };
        let (mut o, mut e) = (Vec::new(), Vec::new());
        emit(&rep, &plan, &mut o, &mut e).unwrap();
        assert!(String::from_utf8(o).unwrap().starts_with("r,scheme,"));
        assert!(String::from_utf8(e).unwrap().contains("\"command\": \"fidelity-sweep\""));
    }

    #[test]
    fn emit_ensemble_requires_sampling() {
        let rep = run_fidelity_sweep(&config("")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let plan = OutputPlan {
            format: OutputFormat::Csv,
            out: Some(dir.path().join("x.csv")),
            ensemble: Some(dir.path().join("e.csv")),
        };
        let err = emit(&rep, &plan, &mut io::sink(), &mut io::sink()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
