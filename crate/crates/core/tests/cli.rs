use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const ERLANGEN: &str = r#"
[channel]
wavelength_nm = 809
w0_mm = 20
length_m = 1600
aperture_m = 0.04
eta_m = 0.7
cn2 = 1.5e-14
"#;

fn cvteleport(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cvteleport"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn too_few_samples_is_a_config_error() {
    let o = cvteleport(&["pdt", "--samples", "50"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("samples must be >= 100"));
}

#[test]
fn bad_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = cvteleport(&["pdt", "--config", missing.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));

    let cfg = write_config(dir.path(), "[channel\nbroken");
    assert_eq!(cvteleport(&["pdt", "--config", &cfg], None).status.code(), Some(1));

    // pdt without a channel section
    assert_eq!(cvteleport(&["pdt"], None).status.code(), Some(1));

    assert_eq!(cvteleport(&["pdt", "--format", "xml"], None).status.code(), Some(1));
    assert_eq!(cvteleport(&["frobnicate"], None).status.code(), Some(1));

    let cfg = write_config(dir.path(), "[sweep]\nr_lo = 1.0\nr_hi = 0.5\n");
    assert_eq!(cvteleport(&["fidelity-sweep", "--config", &cfg], None).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let o = cvteleport(&["--help"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("postselect-sweep"));
}

#[test]
fn pdt_writes_histogram_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ERLANGEN);
    let out = dir.path().join("pdt.csv");
    let ens = dir.path().join("ens.csv");
    let o = cvteleport(
        &[
            "pdt",
            "--config",
            &cfg,
            "--seed",
            "11",
            "--samples",
            "100000",
            "--out",
            out.to_str().unwrap(),
            "--ensemble",
            ens.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("bin_center,probability"));
    assert_eq!(lines.count(), 100);

    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pdt.csv.summary.json")).unwrap()).unwrap();
    let mean = summary["mean"].as_f64().unwrap();
    assert!((mean - 0.70).abs() <= 0.05, "mean {mean}");
    assert_eq!(summary["seed"], 11);
    assert_eq!(summary["config"]["channel"]["cn2"], 1.5e-14);
    assert_eq!(summary["theta_convention"], "broadening");
    let hash = summary["ensemble"]["channel_b"]["sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);

    let exported = fs::read_to_string(&ens).unwrap();
    let mut lines = exported.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# seed=11 params_sha256="), "{header}");
    assert!(header.ends_with("n=100000"));
    assert_eq!(lines.next(), Some("transmission"));
    assert_eq!(lines.count(), 100_000);
}

fn run_to_dir(dir: &Path, args: &[&str], threads: &str) -> (Vec<u8>, Vec<u8>) {
    let out = dir.join("out.csv");
    let mut full: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap().to_string();
    full.extend(["--out", &out_s]);
    let o = cvteleport(&full, Some(threads));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    (fs::read(&out).unwrap(), fs::read(dir.join("out.csv.summary.json")).unwrap())
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{ERLANGEN}[sweep]\nr_hi = 2.0\nr_step = 0.25\n\
         [scheme]\nmodes = [\"direct-single\", \"adaptive-dual\"]\nt_min = [0.0, 0.6]\n\
         [run]\nsamples = 4000\nseed = 3\n"
    );
    let cfg = write_config(cfg_dir.path(), &body);
    for cmd in ["pdt", "fidelity-sweep", "postselect-sweep"] {
        let args = ["--config", &cfg];
        let mut first = None;
        for threads in ["1", "4", "8", "1"] {
            let dir = tempfile::tempdir().unwrap();
            let mut full = vec![cmd];
            full.extend(args);
            let got = run_to_dir(dir.path(), &full, threads);
            match &first {
                None => first = Some(got),
                Some(f) => assert!(f == &got, "{cmd} differs with {threads} threads"),
            }
        }
    }
}

#[test]
fn seed_changes_output() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = write_config(cfg_dir.path(), ERLANGEN);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_to_dir(a.path(), &["pdt", "--config", &cfg, "--samples", "1000", "--seed", "1"], "2");
    let rb = run_to_dir(b.path(), &["pdt", "--config", &cfg, "--samples", "1000", "--seed", "2"], "2");
    assert_ne!(ra.1, rb.1);
}

#[test]
fn json_format_is_one_document() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let o = cvteleport(
        &["fidelity-sweep", "--format", "json", "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!dir.path().join("sweep.json.summary.json").exists());
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["summary"]["command"], "fidelity-sweep");
    assert_eq!(doc["columns"][0], "r");
    assert_eq!(doc["rows"].as_array().unwrap().len(), 61 * 2);
}

#[test]
fn stdout_carries_data_when_no_out() {
    let o = cvteleport(&["fidelity-sweep"], None);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(out.starts_with(
        "r,scheme,t_min,mean_fidelity,std_error,efficiency,n_used,classical_limit,status\n"
    ));
    let summary: Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(summary["constant_loss"]["optimal_squeezing"], "monotone (no finite optimum)");
}

#[test]
fn constant_loss_golden_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[sweep]\nr_lo = 0.0\nr_hi = 1.0\nr_step = 0.5\nt_a = 1.0\nt_b = 0.8\n\
         [scheme]\nmodes = [\"direct-single\"]\n",
    );
    let o = cvteleport(&["fidelity-sweep", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    let expected = "\
r,scheme,t_min,mean_fidelity,std_error,efficiency,n_used,classical_limit,status
0,direct-single,,0.50000000000000000,0,1.0000000000000000,1,0.50000000000000000,ok
0.50000000000000000,direct-single,,0.66437891523960646,0,1.0000000000000000,1,0.50000000000000000,ok
1.0000000000000000,direct-single,,0.73340014390968322,0,1.0000000000000000,1,0.50000000000000000,ok
";
    assert_eq!(String::from_utf8(o.stdout).unwrap(), expected);
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for (name, cmd) in [("erlangen.toml", "postselect-sweep"), ("constant-loss.toml", "fidelity-sweep")] {
        let path = root.join(name);
        let o = cvteleport(&[cmd, "--config", path.to_str().unwrap(), "--samples", "2000"], None);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
}
