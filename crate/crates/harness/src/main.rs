use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ltv_core::json::instance_to_string;
use ltv_core::{rollout_policy, verify_assumptions, LtvInstance, PolicyKind, PolicyParam};
use ltv_harness::config::{merge_json, set_path};
use ltv_harness::{run_experiment, ExperimentConfig, HarnessError, InstanceSpec, Result};
use ltv_instances::sat::BRUTE_FORCE_CAP;
use ltv_instances::{assignment_to_k, compile_max3sat, parse_dimacs, CnfFormula};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "ltv", version, about = "Online control of linear time-varying systems: instances, learners and regret audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect instances.
    #[command(subcommand)]
    Instance(InstanceCmd),
    /// Run a learner over the configured seeds.
    Run(RunArgs),
    /// Run a learner and score interval regret against a comparator class.
    Regret(RegretArgs),
    /// Compile a DIMACS MAX-3SAT formula into a control instance.
    ReduceSat(ReduceArgs),
    /// Audits that exit 2 when the checked property fails.
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Subcommand)]
enum InstanceCmd {
    /// Build an instance from a generator and write it as JSON.
    Gen(GenArgs),
    /// Print dimensions, segments and an assumption audit of an instance file.
    Inspect(InspectArgs),
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Check sequential stability and the disturbance bound.
    Assumptions(AssumptionArgs),
    /// Check that every assignment's gain matrix costs minus its satisfied count.
    Reduction(ReductionArgs),
    /// Scan the working-set properties up to a horizon.
    WorkingSets(WorkingSetArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; its fields override the ones set by flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single seed (sets `seeds` to `[seed]`).
    #[arg(long)]
    seed: Option<u64>,
    /// Run seeds `0..n`.
    #[arg(long, conflicts_with = "seed")]
    seeds: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Set any config field: `--set path.to.field=<json>` (bare words are strings).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    sets: Vec<String>,
}

#[derive(Args, Clone)]
struct InstanceFlags {
    /// Instance generator (separation, dsigma, unstable, kswitch, sat, scalar-lti, random).
    #[arg(long)]
    generator: Option<String>,
    /// Generator parameter `key=value`, repeatable.
    #[arg(short = 'i', long = "instance-param", value_name = "KEY=VALUE")]
    instance_params: Vec<String>,
    /// Instance JSON file instead of a generator.
    #[arg(long, conflicts_with = "generator")]
    instance_file: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    generator: String,
    #[arg(short = 'i', long = "instance-param", value_name = "KEY=VALUE")]
    instance_params: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct StabilityFlags {
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    /// Disturbance bound; defaults to the largest `‖w_t‖`.
    #[arg(long)]
    r_w: Option<f64>,
    /// Largest window checked.
    #[arg(long)]
    h_cap: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    file: PathBuf,
    #[command(flatten)]
    stability: StabilityFlags,
}

#[derive(Args)]
struct RunArgs {
    /// drc-ogd, ada-pred, ada-ctrl or exp3.
    algorithm: String,
    /// Algorithm parameter `key=value`, repeatable.
    #[arg(short = 'a', long = "algo-param", value_name = "KEY=VALUE")]
    algo_params: Vec<String>,
    #[command(flatten)]
    instance: InstanceFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RegretArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comparator class: drc, dac or feedback.
    #[arg(long)]
    class: Option<String>,
    /// Comparator memory.
    #[arg(long)]
    memory: Option<usize>,
    /// Comparator radius.
    #[arg(long)]
    radius: Option<f64>,
    /// grid or projected-descent.
    #[arg(long)]
    method: Option<String>,
    /// Interval grid: whole, dyadic, segments, dyadic-and-segments or all.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args)]
struct ReduceArgs {
    cnf: PathBuf,
    #[arg(long, default_value_t = ltv_instances::sat::DEFAULT_SAT_SCALE)]
    scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AssumptionArgs {
    #[command(flatten)]
    instance: InstanceFlags,
    #[command(flatten)]
    stability: StabilityFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReductionArgs {
    cnf: PathBuf,
    #[arg(long, default_value_t = ltv_instances::sat::DEFAULT_SAT_SCALE)]
    scale: f64,
}

#[derive(Args)]
struct WorkingSetArgs {
    #[arg(long, default_value_t = 100_000)]
    up_to: usize,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Instance(InstanceCmd::Gen(a)) => instance_gen(a),
        Command::Instance(InstanceCmd::Inspect(a)) => instance_inspect(a),
        Command::Run(a) => run(a, None),
        Command::Regret(a) => {
            let mut extra = json!({});
            if let Some(grid) = &a.grid {
                extra["intervals"] = json!({ "grid": grid });
            }
            if a.class.is_some() || a.memory.is_some() || a.radius.is_some() || a.method.is_some() {
                let mut c = json!({});
                if let Some(k) = &a.class {
                    c["kind"] = json!(k);
                }
                if let Some(m) = a.memory {
                    c["m"] = json!(m);
                }
                if let Some(r) = a.radius {
                    c["radius"] = json!(r);
                }
                if let Some(m) = &a.method {
                    c["method"] = json!({ "method": m });
                }
                extra["comparator"] = c;
            }
            run(a.run, Some(extra))
        }
        Command::ReduceSat(a) => reduce_sat(a),
        Command::Verify(VerifyCmd::Assumptions(a)) => verify_assumption_cmd(a),
        Command::Verify(VerifyCmd::Reduction(a)) => verify_reduction(a),
        Command::Verify(VerifyCmd::WorkingSets(a)) => verify_working_sets(a),
    }
}

/// `key=value` with the value read as JSON when it parses, else as a string.
fn parse_kv(s: &str) -> Result<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| HarnessError::Validation(format!("expected KEY=VALUE, got '{s}'")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn params_object(tag_key: &str, tag: &str, params: &[String]) -> Result<Value> {
    let mut obj = json!({ tag_key: tag });
    for p in params {
        let (k, v) = parse_kv(p)?;
        set_path(&mut obj, &k, v)?;
    }
    Ok(obj)
}

fn instance_value(flags: &InstanceFlags) -> Result<Option<Value>> {
    if let Some(path) = &flags.instance_file {
        return Ok(Some(json!({ "generator": "file", "path": path })));
    }
    match &flags.generator {
        Some(g) => Ok(Some(params_object("generator", g, &flags.instance_params)?)),
        None if flags.instance_params.is_empty() => Ok(None),
        None => Err(HarnessError::Validation("instance parameters given without --generator".into())),
    }
}

/// Flags first, then `--set`, then the `--config` file on top.
fn assemble(mut base: Value, common: &Common) -> Result<Value> {
    if let Some(seed) = common.seed {
        base["seeds"] = json!([seed]);
    }
    if let Some(n) = common.seeds {
        base["seeds"] = json!((0..n).collect::<Vec<_>>());
    }
    if let Some(out) = &common.out {
        base["output"] = json!({ "dir": out });
    }
    for s in &common.sets {
        let (k, v) = parse_kv(s)?;
        set_path(&mut base, &k, v)?;
    }
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
        let top: Value = serde_json::from_str(&text).map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))?;
        merge_json(&mut base, top);
    }
    Ok(base)
}

fn to_config(v: Value) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(&v.to_string())
}

fn run(a: RunArgs, extra: Option<Value>) -> Result<()> {
    let mut base = json!({ "algorithm": params_object("name", &a.algorithm, &a.algo_params)? });
    if let Some(inst) = instance_value(&a.instance)? {
        base["instance"] = inst;
    }
    let regret = extra.is_some();
    if let Some(extra) = extra {
        merge_json(&mut base, extra);
    }
    let cfg = to_config(assemble(base, &a.common)?)?;
    let output = run_experiment(&cfg, regret)?;
    match &cfg.output.dir {
        Some(dir) => {
            output.write(dir)?;
            eprintln!("wrote {}", dir.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&output.summary)?),
    }
    output.failure_status()
}

fn write_or_print(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io { path: dir.to_path_buf(), source: e })?;
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn instance_gen(a: GenArgs) -> Result<()> {
    let v = assemble(json!({ "instance": params_object("generator", &a.generator, &a.instance_params)? }), &a.common)?;
    let seed = v.get("seeds").and_then(|s| s.get(0)).and_then(Value::as_u64).unwrap_or(0);
    let out = v.pointer("/output/dir").and_then(Value::as_str).map(PathBuf::from);
    let spec: InstanceSpec = serde_json::from_value(v["instance"].clone()).map_err(|e| HarnessError::Validation(format!("instance: {e}")))?;
    let built = spec.build(seed)?;
    write_or_print(out.as_deref(), "instance.json", &instance_to_string(&built.instance)?)
}

fn stability_report(inst: &LtvInstance, s: &StabilityFlags) -> ltv_core::AssumptionReport {
    let r_w = s.r_w.unwrap_or_else(|| inst.w_seq().iter().map(|w| w.norm()).fold(0.0, f64::max));
    verify_assumptions(inst, s.c1, s.rho, r_w, s.h_cap)
}

fn instance_inspect(a: InspectArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.file).map_err(|e| HarnessError::Io { path: a.file.clone(), source: e })?;
    let inst = ltv_core::json::instance_from_str(&text)?;
    let mut kinds: Vec<&str> = inst.costs().iter().map(|c| c.kind()).collect();
    kinds.dedup();
    let report = json!({
        "horizon": inst.horizon(),
        "state_dim": inst.state_dim(),
        "input_dim": inst.input_dim(),
        "segments": inst.segments(),
        "cost_kinds": kinds,
        "signed_costs": inst.has_signed_costs(),
        "assumptions": stability_report(&inst, &a.stability),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn read_formula(path: &Path) -> Result<CnfFormula> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e })?;
    Ok(parse_dimacs(&text)?)
}

fn reduce_sat(a: ReduceArgs) -> Result<()> {
    let formula = read_formula(&a.cnf)?;
    let inst = compile_max3sat(&formula, a.scale)?;
    let optimum = if formula.n_vars() <= BRUTE_FORCE_CAP { Some(formula.brute_force()?.0) } else { None };
    let summary = json!({
        "variables": formula.n_vars(),
        "clauses": formula.n_clauses(),
        "horizon": inst.horizon(),
        "state_dim": inst.state_dim(),
        "max_satisfiable": optimum,
        "optimal_cost": optimum.map(|k| -(k as f64)),
    });
    match &a.out {
        Some(dir) => {
            write_or_print(Some(dir), "instance.json", &instance_to_string(&inst)?)?;
            write_or_print(Some(dir), "summary.json", &serde_json::to_string_pretty(&summary)?)
        }
        None => write_or_print(None, "summary.json", &serde_json::to_string_pretty(&summary)?),
    }
}

fn verify_assumption_cmd(a: AssumptionArgs) -> Result<()> {
    let mut base = json!({});
    if let Some(inst) = instance_value(&a.instance)? {
        base["instance"] = inst;
    }
    let v = assemble(base, &a.common)?;
    let seed = v.get("seeds").and_then(|s| s.get(0)).and_then(Value::as_u64).unwrap_or(0);
    let spec: InstanceSpec = serde_json::from_value(v.get("instance").cloned().ok_or_else(|| HarnessError::Validation("no instance given".into()))?)
        .map_err(|e| HarnessError::Validation(format!("instance: {e}")))?;
    let inst = spec.build(seed)?.instance;
    let report = stability_report(&inst, &a.stability);
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.passed {
        Ok(())
    } else {
        Err(HarnessError::Validation("assumption audit failed".into()))
    }
}

fn verify_reduction(a: ReductionArgs) -> Result<()> {
    let formula = read_formula(&a.cnf)?;
    let n = formula.n_vars();
    if n > BRUTE_FORCE_CAP {
        return Err(HarnessError::Validation(format!("exhaustive check limited to {BRUTE_FORCE_CAP} variables (formula has {n})")));
    }
    let inst = compile_max3sat(&formula, a.scale)?;
    let (k_star, _) = formula.brute_force()?;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let v: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let k = PolicyParam::new(vec![assignment_to_k(&v)])?;
        let cost = rollout_policy(&inst, PolicyKind::Feedback, &k)?.total_cost();
        let expect = -(formula.satisfied(&v) as f64);
        if cost != expect {
            return Err(HarnessError::Validation(format!("assignment {v:?}: rollout cost {cost}, expected {expect}")));
        }
        best = best.min(cost);
    }
    println!("{}", serde_json::to_string_pretty(&json!({ "assignments": 1u64 << n, "max_satisfiable": k_star, "min_cost": best }))?);
    if best == -(k_star as f64) {
        Ok(())
    } else {
        Err(HarnessError::Validation(format!("minimum cost {best} differs from −{k_star}")))
    }
}

fn verify_working_sets(a: WorkingSetArgs) -> Result<()> {
    match ltv_learn::working_set_audit(a.up_to) {
        Ok(largest) => {
            println!("{}", serde_json::to_string_pretty(&json!({ "up_to": a.up_to, "largest_set": largest, "passed": true }))?);
            Ok(())
        }
        Err(v) => Err(HarnessError::Validation(format!("working-set property '{}' fails at t = {}", v.property, v.t))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn key_values_parse_as_json_or_strings() {
        assert_eq!(parse_kv("a=0.5").unwrap(), ("a".into(), json!(0.5)));
        assert_eq!(parse_kv("which=z1").unwrap(), ("which".into(), json!("z1")));
        assert_eq!(parse_kv("free=[true,false]").unwrap(), ("free".into(), json!([true, false])));
        assert!(parse_kv("novalue").is_err());
    }
}
