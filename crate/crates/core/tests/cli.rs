//! Runs the `prg` binary end to end.

use std::process::{Command, Output};

fn prg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prg")).args(args).output().expect("spawn prg")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    let o = prg(args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn csv_rows(args: &[&str]) -> Vec<csv::StringRecord> {
    let o = prg(args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn flow_lists_every_step_up_to_n_max() {
    let rows = csv_rows(&["flow", "--v0", "1e-5", "--mu0", "1e-5", "--format", "csv"]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| &r[0] == "prg/flow/v1"));
    let v = json(&["flow", "--v0", "1e-5", "--mu0", "1e-5"]);
    assert_eq!(v["schema"], "prg/flow/v1");
    assert_eq!(v["n_max"], 4);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn symbol_presets_classify_regimes() {
    let p = json(&["symbol", "--d", "1", "--mu", "1e-3"]);
    let e = json(&["symbol", "--d", "100", "--mu", "5000"]);
    let regime = |v: &serde_json::Value| {
        v["fits"]
            .as_array()
            .unwrap()
            .iter()
            .find(|f| f["target"] == "soft_eigenvalue")
            .unwrap()["regime"]
            .as_str()
            .unwrap()
            .to_string()
    };
    assert_eq!(regime(&p), "parabolic");
    assert_eq!(regime(&e), "elliptic");
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let args = ["symbol", "--d", "2", "--mu", "0.01", "--Nt", "2", "--Nx", "1"];
    let v = json(&args);
    let mut with_csv = args.to_vec();
    with_csv.extend(["--format", "csv"]);
    let rows = csv_rows(&with_csv);
    let from_json: Vec<&serde_json::Value> = v["grid"]
        .as_array()
        .unwrap()
        .iter()
        .chain(v["fits"].as_array().unwrap())
        .collect();
    assert_eq!(rows.len(), from_json.len());
    let raw = prg(&with_csv).stdout;
    let mut reader = csv::Reader::from_reader(raw.as_slice());
    let header = reader.headers().unwrap().clone();
    for (row, obj) in rows.iter().zip(from_json) {
        for (name, cell) in header.iter().zip(row.iter()) {
            let j = &obj[name];
            if cell.is_empty() {
                assert!(j.is_null(), "{name}");
            } else if let Some(x) = j.as_f64() {
                assert_eq!(cell.parse::<f64>().unwrap(), x, "{name}");
            } else {
                assert_eq!(cell, j.as_str().unwrap(), "{name}");
            }
        }
    }
}

#[test]
fn background_constant_preset_has_three_roots() {
    let v = json(&["background", "--mu", "2", "--v", "1", "--psi", "0"]);
    let roots: Vec<f64> = v["roots"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(roots, vec![-1.0, 0.0, 1.0]);
    let s = json(&["background", "--mu", "0.05", "--v", "0.01", "--amp", "0.05", "--seed", "7"]);
    assert_eq!(s["solve"]["converged"], true);
}

#[test]
fn spectrum_stays_off_the_negative_axis() {
    let v = json(&["spectrum", "--mu", "0.05"]);
    assert!(v["min_distance"].as_f64().unwrap() > 0.0);
    assert_eq!(v["violation"], false);
}

#[test]
fn norms_default_fixture_gives_twice_the_strength() {
    let v = json(&["norms"]);
    assert_eq!(v["coupling_constant"].as_f64().unwrap(), 0.01);
}

#[test]
fn output_is_deterministic_and_can_go_to_a_file() {
    let a = prg(&["background", "--mu", "0.05", "--v", "0.01", "--amp", "0.05", "--seed", "3"]);
    let b = prg(&["background", "--mu", "0.05", "--v", "0.01", "--amp", "0.05", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let dir = std::env::temp_dir().join(format!("prg-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("flow.json");
    let o = prg(&["flow", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written["schema"], "prg/flow/v1");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = std::env::temp_dir().join(format!("prg-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, "mu = 2.0\nv = 1.0\npsi = 0.0\n").unwrap();
    let from_file = json(&["background", "--config", path.to_str().unwrap()]);
    assert_eq!(from_file["roots"].as_array().unwrap().len(), 3);
    let overridden = json(&["background", "--config", path.to_str().unwrap(), "--mu", "0.5"]);
    assert_eq!(overridden["roots"].as_array().unwrap().len(), 1);
    std::fs::write(&path, "bogus_key = 1\n").unwrap();
    assert_eq!(prg(&["background", "--config", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes_separate_configuration_from_numerics() {
    assert_eq!(prg(&["flow", "--L", "4"]).status.code(), Some(2));
    assert_eq!(prg(&["flow", "--bogus"]).status.code(), Some(2));
    assert_eq!(prg(&["symbol", "--window", "5"]).status.code(), Some(2));
    assert_eq!(prg(&["background", "--d", "0.5"]).status.code(), Some(2));
    assert_eq!(prg(&["norms", "--kernel", "/nonexistent/kernel.txt"]).status.code(), Some(2));
    let o = prg(&["background", "--mu", "0.05", "--v", "1", "--amp", "50", "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
}
