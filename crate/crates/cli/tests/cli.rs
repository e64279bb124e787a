use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use dirform_cli::{parse_config, run};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirform")).args(args).output().unwrap()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    fs::write(&p, text).unwrap();
    p
}

const FORM: &str = "command = form
seed = 11

[model g]
variant = product-1d
dimension = 2
marginal = normal(0, 1)

[function eta]
kind = cutoff
coordinate = 1
scale = 1

[form]
model = g
function = eta
alpha = 1
delta = 0.2
samples = 4000
";

const CHAIN: &str = "command = chain
seed = 5

[model g]
variant = product-1d
dimension = 2
marginal = normal(0, 1)

[function u]
kind = product-of-cutoffs
coordinates = 1, 2
scale = 1

[chain]
model = g
function = u
alpha = 1
delta = 0.1
horizon = 1
chains = 64
";

fn lines(stdout: &[u8]) -> Vec<Value> {
    String::from_utf8_lossy(stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn unknown_command_is_invalid_input() {
    let out = bin(&["bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn configuration_errors_are_listed_together() {
    let p = scratch("bad.cfg", "command = form\nseed = 1\ncolour = red\n[form]\nmodel = nowhere\nfunction = f\n");
    let out = bin(&["form", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("model 'nowhere' is not defined"), "{err}");
    assert!(err.contains("function 'f' is not defined"), "{err}");
}

#[test]
fn stochastic_commands_need_a_seed() {
    let p = scratch("noseed.cfg", &FORM.replace("seed = 11\n", ""));
    assert_eq!(bin(&["form", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    let out = bin(&["form", "--config", p.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn same_seed_same_bytes_for_any_thread_count() {
    let p = scratch("chain.cfg", CHAIN);
    let p = p.to_str().unwrap();
    let a = bin(&["chain", "--config", p, "--threads", "1"]);
    let b = bin(&["chain", "--config", p, "--threads", "2"]);
    let c = bin(&["chain", "--config", p]);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn seed_flag_replaces_config_seed() {
    let p = scratch("form-seed.cfg", FORM);
    let p = p.to_str().unwrap();
    let a = bin(&["form", "--config", p]);
    let b = bin(&["form", "--config", p, "--seed", "12"]);
    let c = scratch("form-12.cfg", &FORM.replace("seed = 11", "seed = 12"));
    let c = bin(&["form", "--config", c.to_str().unwrap()]);
    assert_ne!(a.stdout, b.stdout);
    assert_eq!(b.stdout, c.stdout);
    assert_eq!(lines(&b.stdout)[0]["seed"], 12);
}

#[test]
fn form_records_carry_header_and_estimate_fields() {
    let p = scratch("form-schema.cfg", FORM);
    let out = bin(&["form", "--config", p.to_str().unwrap()]);
    let recs = lines(&out.stdout);
    assert_eq!(recs.len(), 1);
    let r = recs[0].as_object().unwrap();
    let keys: Vec<&str> = r.keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        ["command", "version", "seed", "parameters", "record", "value", "stderr", "nsamples", "alpha", "delta", "per_coordinate"]
    );
    assert_eq!(r["command"], "form");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["parameters"]["delta"], "0.2");
    assert_eq!(r["per_coordinate"][1]["exact_zero"], true);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("1 records\n"));
}

#[test]
fn written_values_read_back_exactly() {
    let cfg = parse_config(FORM).unwrap();
    let out = run(&cfg);
    assert!(out.error.is_none());
    let text = dirform_cli::render(&out.header, &out.records);
    let back: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["value", "stderr", "alpha", "delta"] {
        let mem = out.records[0].body[key].as_f64().unwrap();
        assert_eq!(back[key].as_f64().unwrap().to_bits(), mem.to_bits(), "{key}");
    }
}

#[test]
fn out_flag_moves_summary_to_stdout() {
    let p = scratch("form-out.cfg", FORM);
    let data = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("form-out.jsonl");
    let out = bin(&["form", "--config", p.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("1 records\n"));
    assert_eq!(fs::read_to_string(&data).unwrap().lines().count(), 1);
    let bad = bin(&["form", "--config", p.to_str().unwrap(), "--out", "/nonexistent/dir/x.jsonl"]);
    assert_eq!(bad.status.code(), Some(9));
}

#[test]
fn empty_run_reports_zero_records() {
    let p = scratch("empty.cfg", &CHAIN.replace("chains = 64", "chains = 0").replace("function = u\n", ""));
    let out = bin(&["chain", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("0 records\n"));
}

#[test]
fn eigen_output_serves_as_a_table_file() {
    let eig = scratch("eigen.cfg", "command = eigen\n[eigen]\nd = 1\nextent = 8\nn = 64\nk = 24\n");
    let table = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("table.jsonl");
    let out = bin(&["eigen", "--config", eig.to_str().unwrap(), "--out", table.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let qr = format!(
        "command = qr-report\nseed = 2\n\n[table t]\nfile = {}\n\n[model g]\nvariant = product-1d\ndimension = 24\nmarginal = normal(0, 1)\n\n[scheme s]\nkind = lp\np = 2\nalpha = 1\nbeta = eigen(-2)\ngamma = constant(1)\ntable = t\n\n[qr-report]\nmodel = g\nscheme = s\nconditions = 4.3, 4.8\nsamples = 2000\n",
        table.display()
    );
    let p = scratch("qr.cfg", &qr);
    let out = bin(&["qr-report", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = lines(&out.stdout);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["record"], "qr-report");
}

#[test]
fn budget_is_enforced() {
    let p = scratch("budget.cfg", &format!("{FORM}budget = 100\n"));
    assert_eq!(bin(&["form", "--config", p.to_str().unwrap()]).status.code(), Some(5));
}
