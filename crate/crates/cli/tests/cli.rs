use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn magshield(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magshield"))
        .args(args)
        .env("MAGSHIELD_OUTPUT_ROOT", root)
        .env("MAGSHIELD_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn small(t_end: f64, extra_field: &str) -> String {
    format!(
        "schema_version = 1\nparticle_count = 32\nseed = 5\nrecord_cadence = 4\nsnapshot_cadence = 10\n\
         [field]\nmu = 1.0\ntau = 6.0\n{extra_field}\n\
         [datum]\nlambda = 1.0\ntotal_charge = 0.1\nbox_min = [0.5, 0.0, 0.0]\nbox_max = [1.5, 1.0, 1.0]\n\
         [stepper]\ndt_base = 0.005\ndt_min = 1e-7\nt_end = {t_end}\n"
    )
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn ledger_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = magshield(tmp.path(), &["ledger", "--mu", "1", "--tau", "6", "--gamma", "3/5"]);
    assert_eq!(ok.status.code(), Some(0));
    let v = json(&ok);
    assert_eq!(v["eta_range"]["lo"], "1/10");
    assert_eq!(v["eta_range"]["hi"], "7/15");
    let bad = magshield(tmp.path(), &["ledger", "--mu", "1", "--tau", "5.5"]);
    assert_eq!(bad.status.code(), Some(2));
    let garbage = magshield(tmp.path(), &["ledger", "--mu", "one", "--tau", "6"]);
    assert_eq!(garbage.status.code(), Some(2));
}

#[test]
fn malformed_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &small(0.1, "").replace("mu = 1.0", "mu = -1.0"));
    let out = magshield(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("field.mu"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn run_is_reproducible_and_plottable() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("out");
    let cfg = write(tmp.path(), "s.toml", &small(0.1, ""));
    let first = magshield(&root, &["run", cfg.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let m = json(&first);
    assert_eq!(m["status"], "completed");
    let id = m["run_id"].as_str().unwrap().to_string();
    assert_eq!(id.len(), 16);
    let dir = root.join(&id);
    let diag = fs::read(dir.join("diag.jsonl")).unwrap();
    let snaps = files(&dir.join("snapshots"));
    let steps = m["summary"]["steps"].as_u64().unwrap();
    let expected = 1 + steps / 10 + u64::from(!steps.is_multiple_of(10));
    assert_eq!(snaps.len() as u64, expected, "initial, every 10 steps, final");
    assert_eq!(snaps[0].0, "step_00000000.csv");

    let again = magshield(&root, &["run", cfg.to_str().unwrap()]);
    assert_eq!(json(&again)["run_id"].as_str(), Some(id.as_str()));
    assert_eq!(fs::read(dir.join("diag.jsonl")).unwrap(), diag);
    assert_eq!(files(&dir.join("snapshots")), snaps);

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "completed");
    assert!(manifest["summary"]["min_x1"].as_f64().unwrap() > 0.0);

    for kind in ["timeseries", "tail", "ladder"] {
        let out = magshield(&root, &["plot", &id, "--kind", kind]);
        assert_eq!(out.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let path = String::from_utf8(out.stdout).unwrap();
        let text = fs::read_to_string(path.trim()).unwrap();
        assert!(text.lines().count() >= 2, "{kind}: {text}");
    }
    let timeseries = fs::read_to_string(dir.join("plot/timeseries.tsv")).unwrap();
    let rows = diag.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count();
    assert_eq!(timeseries.lines().count(), rows + 1);
    assert!(timeseries.starts_with("t\tmin_x1\tmax_speed\ttotal_energy\n"));

    let unknown = magshield(&root, &["plot", "0123456789abcdef", "--kind", "timeseries"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown run"));
}

#[test]
fn empty_run_gives_single_row_timeseries() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", &small(0.0, ""));
    let out = magshield(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let id = json(&out)["run_id"].as_str().unwrap().to_string();
    let plot = magshield(tmp.path(), &["plot", &id, "--kind", "timeseries"]);
    let text = fs::read_to_string(String::from_utf8(plot.stdout).unwrap().trim()).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn shield_off_run_reports_wall_event() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", &small(3.0, "magnetic_enabled = false"));
    let out = magshield(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let m = json(&out);
    let status = m["status"].as_str().unwrap();
    assert!(status == "wall_crossing" || status == "timestep_collapse", "{status}");
    assert!(m["summary"]["min_x1"].as_f64().unwrap() < 0.05);
    assert!(m["error"].is_string());
}

#[test]
fn sweep_tables_and_frontier() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", &small(0.05, ""));
    let out = magshield(
        tmp.path(),
        &["sweep", cfg.to_str().unwrap(), "--mu", "1", "--tau", "3,6", "--repeats", "2"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let cells = v["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    assert_eq!(cells[0]["shield_condition"], false);
    assert_eq!(cells[1]["shield_condition"], true);
    let dir = PathBuf::from(v["dir"].as_str().unwrap());
    let runs = fs::read_to_string(dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 2);
    assert!(runs.lines().next().unwrap().contains("status"));
    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "mu,tau,shield_condition,confined_fraction,min_x1_median,runtime"
    );

    let id = v["sweep_id"].as_str().unwrap();
    let plot = magshield(tmp.path(), &["plot", id, "--kind", "frontier"]);
    assert_eq!(plot.status.code(), Some(0));
    let text = fs::read_to_string(String::from_utf8(plot.stdout).unwrap().trim()).unwrap();
    assert_eq!(text.lines().count(), summary.lines().count());

    let run_id = runs.lines().nth(1).unwrap().split(',').nth(4).unwrap();
    let nested = magshield(tmp.path(), &["plot", run_id, "--kind", "timeseries"]);
    assert_eq!(nested.status.code(), Some(0));
}

#[test]
fn pair_driver_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", &small(0.05, ""));
    let out = magshield(
        tmp.path(),
        &["pair", cfg.to_str().unwrap(), "--cutoffs", "1,2", "--thermal-units", "--seeds", "2"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["report"]["rows"].as_array().unwrap().len(), 2);
    let dir = PathBuf::from(v["dir"].as_str().unwrap());
    let csv = fs::read_to_string(dir.join("pairs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}
