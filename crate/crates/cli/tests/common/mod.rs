//! Helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orbitcert"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn verify_value(v: &Value, dir: &Path, name: &str) -> Output {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    run(&["verify", "--no-replay", p.to_str().unwrap()])
}

fn set_rational_denominator(v: &mut Value, factor: u64) {
    let s = v.as_str().unwrap().to_string();
    let (p, q) = s.split_once('/').unwrap();
    let q: u64 = q.parse().unwrap();
    *v = Value::String(format!("{p}/{}", q * factor));
}

fn bump_numerator(v: &mut Value, by: i64) {
    let s = v.as_str().unwrap().to_string();
    let (p, q) = s.split_once('/').unwrap();
    let p: i64 = p.parse().unwrap();
    *v = Value::String(format!("{}/{q}", p + by));
}

pub type Mutation = (&'static str, &'static str, fn(&mut Value));

pub const MUTATIONS: [Mutation; 12] = [
    ("q2_changed", "chain", |v| set_rational_denominator(&mut v["stages"][2]["omega"][1], 2)),
    ("x1_doubled", "halving", |v| {
        let m = &mut v["stages"][2]["z"][0]["magnitude"];
        let s = m.as_str().unwrap().trim_matches(|c| c == '[' || c == ']').to_string();
        let x: f64 = s.split(',').next().unwrap().parse().unwrap();
        *m = Value::String(format!("{}", 2.0 * x));
    }),
    ("m_plus_one", "step_count", |v| {
        let m: u128 = v["stages"][2]["M"].as_str().unwrap().parse().unwrap();
        v["stages"][2]["M"] = Value::String((m + 1).to_string());
    }),
    ("eta_half", "eta_schedule", |v| v["stages"][2]["eta"] = Value::String("0.5".into())),
    ("bump_center", "replay", |v| {
        let b = v["stages"][2]["program"]["bumps"].as_array_mut().unwrap().last_mut().unwrap();
        b["center_x"] = Value::String("0.0078125".into());
    }),
    ("admissibility_flag", "admissibility", |v| v["stages"][1]["admissibility_ok"] = Value::Bool(false)),
    ("density_flipped", "density", |v| v["stages"][1]["density_cert"]["inequalities"][0] = Value::Bool(false)),
    ("norm_entry", "norm_ledger", |v| v["stages"][1]["norm_entry_ln"] = Value::String("-1".into())),
    ("z0_perturbed", "z0_cauchy", |v| {
        let x = v["stages"][1]["z0"][0]["x"].as_f64().unwrap();
        v["stages"][1]["z0"][0]["x"] = Value::from(x + 0.5);
    }),
    ("omega_numerator", "replay", |v| bump_numerator(&mut v["stages"][1]["omega"][0], 2)),
    ("n_hat", "step_count", |v| {
        let n: u128 = v["stages"][1]["step"]["n_hat"].as_str().unwrap().parse().unwrap();
        v["stages"][1]["step"]["n_hat"] = Value::String((n + 1).to_string());
    }),
    ("schema_version", "schema", |v| v["schema_version"] = Value::from(2)),
];
