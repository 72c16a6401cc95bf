//! Replays the checked-in fuzz corpus through the same entry points the fuzz
//! targets drive, so seed files stay valid as formats evolve.

use std::fs;
use std::path::PathBuf;

use magshield::experiment::parse_diag;
use magshield::scenario::ScenarioConfig;
use magshield::snapshot::{decode_binary, read_csv, write_binary, write_csv};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

#[test]
fn scenario_seeds_parse_and_round_trip() {
    for (name, bytes) in corpus("scenario_config") {
        let cfg = ScenarioConfig::parse(std::str::from_utf8(&bytes).unwrap())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        let mut again = ScenarioConfig::parse(&cfg.canonical_toml()).unwrap();
        assert_eq!(again.run_id(), cfg.run_id(), "{name}");
        // The canonical form leaves out output_dir.
        again.output_dir = cfg.output_dir.clone();
        assert_eq!(again, cfg, "{name}");
    }
}

#[test]
fn binary_snapshot_seeds_re_encode_exactly() {
    for (name, bytes) in corpus("snapshot_binary") {
        let (t, ps) = decode_binary(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        let mut out = Vec::new();
        write_binary(&mut out, t, &ps).unwrap();
        assert_eq!(out, bytes, "{name}");
    }
}

#[test]
fn csv_snapshot_seeds_round_trip() {
    for (name, bytes) in corpus("snapshot_csv") {
        let ps = read_csv(&bytes[..]).unwrap_or_else(|e| panic!("{name}: {e}"));
        let mut out = Vec::new();
        write_csv(&mut out, &ps).unwrap();
        assert_eq!(read_csv(&out[..]).unwrap(), ps, "{name}");
    }
}

#[test]
fn diag_seeds_parse() {
    for (name, bytes) in corpus("diag_jsonl") {
        parse_diag(&bytes[..]).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn ledger_seeds_parse_line_by_line() {
    for (name, bytes) in corpus("ledger_rational") {
        let text = std::str::from_utf8(&bytes).unwrap();
        for line in text.lines() {
            assert!(magshield_ledger::parse_rational(line).is_ok(), "{name}: `{line}`");
        }
    }
}
