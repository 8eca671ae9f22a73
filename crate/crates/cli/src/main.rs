use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use orbitcert::budget::constants;
use orbitcert::construction::{
    read_certificates, run_construction, verify_certificates, write_certificates, ConstructionConfig, Mode,
};
use orbitcert::flows::{Amplitude, FlowConfig, State};
use orbitcert::mechanism::{brute_force_run, run_mechanism, MapProgram, Variant};
use orbitcert::numeric::parse_rational;
use orbitcert::rotations::Frequency3;
use rug::Rational;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "orbitcert", version, about = "Certified orbit constructions near an elliptic fixed point")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one attraction-mechanism variant.
    Mechanism(MechanismArgs),
    /// Build the stage certificates and the limit report.
    Construct(CommonArgs),
    /// Verify a certificate file (exit 1 on any violated invariant).
    Verify(VerifyArgs),
    /// Brute-force trajectory of a map program as CSV.
    Trajectory(TrajectoryArgs),
    /// Norm-budget constants for the configured parameters.
    Budget(BudgetArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Toy,
    Faithful,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    stages: Option<u32>,
    /// Initial working precision in bits.
    #[arg(long)]
    precision: Option<u32>,
    /// Upper bound on the first η, as a rational.
    #[arg(long)]
    eta0: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MechanismArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// I, II or III.
    #[arg(long)]
    variant: String,
    /// Three rationals, comma separated.
    #[arg(long)]
    omega: String,
    /// Three axis magnitudes, comma separated.
    #[arg(long)]
    z: String,
    /// Toy amplitude: a rational ε or ln(r).
    #[arg(long, default_value = "ln(2)")]
    epsilon: String,
}

#[derive(Args)]
struct VerifyArgs {
    file: PathBuf,
    /// Skip the float replays of stored initial points.
    #[arg(long)]
    no_replay: bool,
    /// Write the full JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// A map program, or a certificate file (see --stage).
    #[arg(long)]
    program: PathBuf,
    /// Stage whose program is used from a certificate file; last by default.
    #[arg(long)]
    stage: Option<usize>,
    /// Three axis magnitudes or six Cartesian coordinates.
    #[arg(long)]
    z: String,
    #[arg(long)]
    steps: u64,
    /// Emit every k-th step.
    #[arg(long, default_value_t = 1)]
    every: u64,
}

#[derive(Args)]
struct BudgetArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of degrees of freedom n (X = R^2n).
    #[arg(long, default_value_t = 3)]
    n: u32,
}

/// Exit code 2: usage or configuration errors.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn resolve_config(c: &CommonArgs) -> Result<ConstructionConfig> {
    let mut v = serde_json::to_value(ConstructionConfig::default_toy()?)?;
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let user: Value = serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        merge(&mut v, user);
    }
    let mut cfg: ConstructionConfig = serde_json::from_value(v).map_err(|e| usage(format!("config: {e}")))?;
    match c.mode {
        Some(ModeArg::Faithful) => cfg.mode = Mode::Faithful,
        Some(ModeArg::Toy) if !cfg.mode.is_toy() => cfg.mode = Mode::toy(),
        _ => {}
    }
    if let Some(s) = c.stages {
        cfg.stages = s;
    }
    if let Some(p) = c.precision {
        cfg.prec = p;
    }
    if let Some(e) = &c.eta0 {
        let e = parse_rational(e).map_err(|e| usage(format!("--eta0: {e}")))?;
        if e <= 0 {
            return Err(usage("--eta0 must be positive"));
        }
        cfg.eta0 = Some(e);
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<Rational>> {
    s.split(',')
        .map(|t| parse_rational(t.trim()).map_err(|e| usage(format!("{what}: {e}"))))
        .collect()
}

fn parse3(s: &str, what: &str) -> Result<[Rational; 3]> {
    let v = parse_list(s, what)?;
    <[Rational; 3]>::try_from(v).map_err(|_| usage(format!("{what} needs three values")))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => write_stdout(&format!("{text}\n")),
    }
}

/// Writes to standard output; a closed pipe is not an error.
fn write_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn cmd_mechanism(a: &MechanismArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let variant: Variant = a.variant.parse().map_err(|e| usage(format!("--variant: {e}")))?;
    let omega = Frequency3::new(parse3(&a.omega, "--omega")?)?;
    let x = parse3(&a.z, "--z")?;
    let amp = match cfg.mode {
        Mode::Faithful => Amplitude::Faithful { c: cfg.params.c.clone(), alpha: cfg.params.alpha.clone() },
        Mode::Toy { .. } => Amplitude::parse_toy(&a.epsilon).map_err(|e| usage(format!("--epsilon: {e}")))?,
    };
    let mut flow = FlowConfig::from_params(&cfg.params);
    flow.prec = cfg.prec;
    let res = run_mechanism(variant, &omega, &State::axis_rational(x), &amp, &flow)?;
    let doc = json!({
        "config": cfg,
        "variant": variant,
        "omega": omega,
        "epsilon": amp,
        "result": res,
    });
    emit(&a.common.out, &serde_json::to_string_pretty(&doc)?)
}

fn cmd_construct(c: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(c)?;
    let file = run_construction(&cfg)?;
    let r = &file.limit_report;
    eprintln!(
        "built {} stages at {} bits; limit report {}",
        file.stages.len() - 1,
        file.precision_bits,
        if r.all_ok { "ok" } else { "FAILED" }
    );
    emit(&c.out, &write_certificates(&file)?)?;
    if !r.all_ok {
        bail!("limit report checks failed");
    }
    Ok(())
}

/// Returns whether the certificates verified.
fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&a.file).map_err(|e| usage(format!("{}: {e}", a.file.display())))?;
    let file = read_certificates(&text).map_err(|e| usage(format!("{}: {e}", a.file.display())))?;
    let report = verify_certificates(&file, !a.no_replay);
    for f in report.failures() {
        let at = f.stage.map(|s| format!("stage {s}")).unwrap_or_else(|| "file".into());
        println!("FAIL {at} {}: {}", f.invariant, f.detail);
    }
    println!("{} ({} checks)", if report.ok { "OK" } else { "REJECTED" }, report.checks.len());
    if let Some(p) = &a.out {
        std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report.ok)
}

fn load_program(path: &Path, stage: Option<usize>) -> Result<MapProgram> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if v.get("stages").is_some() {
        let file = read_certificates(&text)?;
        let k = stage.unwrap_or(file.stages.len() - 1);
        let st = file.stages.get(k).ok_or_else(|| usage(format!("no stage {k}")))?;
        return Ok(st.program.clone());
    }
    let v = v.get("program").or_else(|| v.pointer("/result/program")).cloned().unwrap_or(v);
    serde_json::from_value(v).map_err(|e| usage(format!("{}: not a map program: {e}", path.display())))
}

fn trajectory_csv(program: &MapProgram, z: &[f64; 6], steps: u64, every: u64, flow: &FlowConfig) -> Result<String> {
    let mut out = String::from("m,x1,y1,x2,y2,x3,y3,sup_norm\n");
    if steps == 0 {
        return Ok(out);
    }
    let run = brute_force_run(program, z, steps, Some(every.max(1)), flow)?;
    for (m, v) in run.samples.iter().filter(|(m, _)| *m > 0) {
        let sup = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        writeln!(out, "{m},{},{},{},{},{},{},{sup}", v[0], v[1], v[2], v[3], v[4], v[5])?;
    }
    Ok(out)
}

fn cmd_trajectory(a: &TrajectoryArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let program = load_program(&a.program, a.stage)?;
    let vals = parse_list(&a.z, "--z")?;
    let z: [f64; 6] = match vals.len() {
        3 => [vals[0].to_f64(), 0.0, vals[1].to_f64(), 0.0, vals[2].to_f64(), 0.0],
        6 => std::array::from_fn(|i| vals[i].to_f64()),
        _ => return Err(usage("--z needs three magnitudes or six coordinates")),
    };
    let flow = FlowConfig::from_params(&cfg.params);
    let csv = trajectory_csv(&program, &z, a.steps, a.every, &flow)?;
    match &a.common.out {
        Some(p) => std::fs::write(p, csv)?,
        None => write_stdout(&csv)?,
    }
    Ok(())
}

fn cmd_budget(a: &BudgetArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let p = &cfg.params;
    let k = constants(a.n, &p.alpha, &p.l, &p.l1, cfg.prec)?;
    let doc = json!({ "config": cfg, "constants": k });
    emit(&a.common.out, &serde_json::to_string_pretty(&doc)?)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match e.downcast_ref::<orbitcert::Error>() {
        Some(ce) if ce.is_budget() => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Mechanism(a) => cmd_mechanism(a),
        Cmd::Construct(c) => cmd_construct(c),
        Cmd::Verify(a) => match cmd_verify(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        Cmd::Trajectory(a) => cmd_trajectory(a),
        Cmd::Budget(a) => cmd_budget(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
