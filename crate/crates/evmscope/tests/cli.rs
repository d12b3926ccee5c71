//! The `evmscope` binary end to end.

mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use evmscope_core::attrs::AttributeRuleTable;
use evmscope_core::signature::LabelSpace;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evmscope"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn disasm_single_stop() {
    let out = stdout(&run(&["disasm", "0x00"]));
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains("STOP"));
}

#[test]
fn disasm_json_and_stdin() {
    let out = stdout(&run_stdin(&["disasm", "--json"], b"0x61AA\n"));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["mnemonic"], "PUSH2");
    assert_eq!(v[0]["truncated"], true);
    assert_eq!(v[0]["operand"], "0xaa00");
}

#[test]
fn raw_binary_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("code.bin");
    std::fs::write(&path, [0x60, 0x01, 0x60, 0x02, 0x01]).unwrap();
    let out = stdout(&run(&["disasm", path.to_str().unwrap()]));
    assert_eq!(out.lines().count(), 3);
    assert!(out.lines().last().unwrap().contains("ADD"));
}

#[test]
fn functions_match_fixture_oracle() {
    let dir = tempfile::tempdir().unwrap();
    for f in common::fixtures()
        .iter()
        .filter(|f| f.id.starts_with("Token"))
    {
        let path = dir.path().join(format!("{}.hex", f.id));
        std::fs::write(&path, &f.runtime_hex).unwrap();
        let out = stdout(&run(&["functions", path.to_str().unwrap()]));
        let v: Value = serde_json::from_str(&out).unwrap();
        let got: Vec<String> = v["functions"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|f| f["fallback"] == false)
            .map(|f| f["selector"].as_str().unwrap().to_string())
            .collect();
        let mut got = got;
        got.sort();
        assert_eq!(got, f.oracle.selectors, "{}", f.id);
    }
}

#[test]
fn functions_resolve_against_db() {
    let dir = tempfile::tempdir().unwrap();
    let f = common::fixtures()
        .into_iter()
        .find(|f| f.id == "Vault-0.8.26-opt")
        .unwrap();
    let code = dir.path().join("vault.hex");
    std::fs::write(&code, &f.runtime_hex).unwrap();
    let db = dir.path().join("sigs.tsv");
    std::fs::write(&db, "0xf3fef3a3\twithdraw(address,uint256)\n").unwrap();
    let out = stdout(&run(&[
        "functions",
        code.to_str().unwrap(),
        "--db",
        db.to_str().unwrap(),
    ]));
    let v: Value = serde_json::from_str(&out).unwrap();
    let withdraw = v["functions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["selector"] == "0xf3fef3a3")
        .unwrap();
    assert_eq!(withdraw["signature"], "withdraw(address,uint256)");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate", "--json-errors"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["kind"], "usage");
}

#[test]
fn bad_input_is_processing_error() {
    let o = run(&["disasm", "0xG1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["disasm", "0xG1", "--json-errors"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["kind"], "processing");
    assert!(err["error"].as_str().unwrap().contains("index 2"));
}

#[test]
fn cfg_json_and_dot() {
    let code = "0x6003565b00";
    let v: Value = serde_json::from_str(&stdout(&run(&["cfg", code]))).unwrap();
    assert_eq!(v["edges"][0]["dst"], 3);
    let dot = stdout(&run(&["cfg", code, "--dot"]));
    assert!(dot.starts_with("digraph"));
}

#[test]
fn ssa_from_tokens_and_code() {
    let out = stdout(&run_stdin(&["ssa", "--tokens"], b"PUSH1 PUSH1 ADD STOP"));
    assert_eq!(out.trim(), "ADD STOP");
    let out = stdout(&run(&["ssa", "0x6001600201"]));
    assert_eq!(out.trim(), "ADD");
}

#[test]
fn attrs_from_tokens() {
    let v: Value = serde_json::from_str(&stdout(&run_stdin(
        &["attrs", "--tokens"],
        b"CALLVALUE SSTORE STOP",
    )))
    .unwrap();
    assert_eq!(
        v,
        serde_json::json!({"view": false, "payable": true, "pure": false})
    );
}

#[test]
fn custom_rule_table_changes_polarity() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("rules.json");
    let mut table = AttributeRuleTable::default();
    table.payable_marker.clear();
    std::fs::write(&rules, serde_json::to_string(&table).unwrap()).unwrap();
    let v: Value = serde_json::from_str(&stdout(&run_stdin(
        &["attrs", "--tokens", "--rules", rules.to_str().unwrap()],
        b"CALLVALUE STOP",
    )))
    .unwrap();
    assert_eq!(v["payable"], false);
}

#[test]
fn shipped_data_files_match_defaults() {
    let space: LabelSpace =
        serde_json::from_str(&std::fs::read_to_string(data("label_space.json")).unwrap()).unwrap();
    assert_eq!(space, LabelSpace::default());
    let rules: AttributeRuleTable =
        serde_json::from_str(&std::fs::read_to_string(data("attribute_rules.json")).unwrap())
            .unwrap();
    assert_eq!(rules, AttributeRuleTable::default());
}

fn contracts_file(dir: &Path) -> std::path::PathBuf {
    let labels = |id: &str| -> Value {
        if id.starts_with("LegacyBank") {
            serde_json::json!(["reentrancy"])
        } else if id.starts_with("LegacyLottery") {
            serde_json::json!(["time_manipulation", "transaction_ordering_dependency"])
        } else {
            serde_json::json!(["no_vulnerability"])
        }
    };
    let mut text = String::new();
    for (i, f) in common::fixtures().iter().enumerate() {
        let mut row =
            serde_json::json!({"id": f.id, "code": f.runtime_hex, "labels": labels(&f.id)});
        if i % 2 == 0 {
            row["abi"] = serde_json::to_value(&f.abi).unwrap();
        }
        text.push_str(&row.to_string());
        text.push('\n');
    }
    let path = dir.join("contracts.jsonl");
    std::fs::write(&path, text).unwrap();
    path
}

fn db_file(dir: &Path) -> std::path::PathBuf {
    let sigs = common::abi_signatures(&common::fixtures());
    let path = dir.join("sigs.tsv");
    std::fs::write(&path, sigs.into_iter().collect::<Vec<_>>().join("\n")).unwrap();
    path
}

#[test]
fn features_writes_dataset_directory() {
    let dir = tempfile::tempdir().unwrap();
    let contracts = contracts_file(dir.path());
    let db = db_file(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, jobs) in [(&out_a, "1"), (&out_b, "4")] {
        stdout(&run(&[
            "features",
            "--input",
            contracts.to_str().unwrap(),
            "--db",
            db.to_str().unwrap(),
            "--labels",
            &data("label_space.json"),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
            "--seed",
            "7",
        ]));
    }
    for name in [
        "signature.jsonl",
        "detection.jsonl",
        "manifest.json",
        "vocab/opcodes.txt",
        "vocab/params.txt",
        "vocab/vulnerabilities.txt",
    ] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between --jobs 1 and 4");
    }
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["max_context"], 16384);
    let n = common::fixtures().len();
    for (split, parts) in manifest["splits"].as_object().unwrap() {
        let mut ids: Vec<&str> = parts
            .as_object()
            .unwrap()
            .values()
            .flat_map(|v| v.as_array().unwrap())
            .map(|v| v.as_str().unwrap())
            .collect();
        ids.sort();
        let total = ids.len();
        ids.dedup();
        assert_eq!((ids.len(), total), (n, n), "{split}");
    }
    let params = std::fs::read_to_string(out_a.join("vocab/params.txt")).unwrap();
    let sha = evmscope::dataset::sha256_hex(params.as_bytes());
    assert_eq!(manifest["vocab"]["params"]["sha256"], sha);

    let detection = std::fs::read_to_string(out_a.join("detection.jsonl")).unwrap();
    assert_eq!(detection.lines().count(), n);
    for line in detection.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["kind"], "detection");
    }

    // frequency over the detection records
    let freq: Value = serde_json::from_str(&stdout(&run(&[
        "freq",
        out_a.join("detection.jsonl").to_str().unwrap(),
        "--filter-generic",
    ])))
    .unwrap();
    let generic = freq["generic"].as_array().unwrap();
    assert!(!generic.is_empty());
    for rates in freq["rates"].as_object().unwrap().values() {
        for m in generic {
            assert!(rates.get(m.as_str().unwrap()).is_none());
        }
    }
    assert!(freq["rates"]["reentrancy"].is_object());
}

#[test]
fn features_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let contracts = contracts_file(dir.path());
    let db = db_file(dir.path());
    let out = stdout(&run(&[
        "features",
        "--input",
        contracts.to_str().unwrap(),
        "--db",
        db.to_str().unwrap(),
        "--kind",
        "signature",
    ]));
    assert!(out.lines().count() > 50);
    assert!(out.lines().all(|l| l.contains("\"kind\":\"signature\"")));
}

#[test]
fn detect_renders_checked_in_predictions() {
    let preds = common::fixture_dir().join("predictions.jsonl");
    let out = stdout(&run(&["detect", preds.to_str().unwrap()]));
    assert!(out.starts_with("4 contract(s), 3 flagged as vulnerable"));
    assert!(out.contains("LegacyBank-0.4.26-noopt: VULNERABLE"));
    assert!(out.contains("unchecked_low_level_calls"));
    assert!(out.contains("Counter-0.8.26-opt: no vulnerability found"));
    assert!(!out.contains("warning"));

    let dir = tempfile::tempdir().unwrap();
    let contracts = contracts_file(dir.path());
    let out = stdout(&run(&[
        "detect",
        preds.to_str().unwrap(),
        "--input",
        contracts.to_str().unwrap(),
        "--json",
    ]));
    let v: Value = serde_json::from_str(&out).unwrap();
    let bank = v
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["contract_id"] == "LegacyBank-0.4.26-noopt")
        .unwrap();
    assert_eq!(bank["scores"]["reentrancy"], 0.91);
    assert!(bank["functions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f == "fallback"));
}
