//! One seed end to end: build the instance, run the learner, optionally score
//! interval regret; then the seed-parallel driver and its file outputs.

use std::path::Path;

use ltv_core::{markov_operators, nature_x, Interval, LtvInstance, Trace};
use ltv_learn::bandit::{exp3_default_eta, exp3_loss_scale, exp3_regret_bound};
use ltv_learn::oco::drc_ogd_step_size;
use ltv_learn::{ada_ctrl_run, ada_pred_interval_bound, ada_pred_run, drc_ogd_run, epsilon_cover, exp3_control_run};
use ltv_learn::{AdaCtrlConfig, AdaPredConfig, CoverSpec, DrcOgdConfig, EstimationAudit, EstimatorMode, Exp3Config, NoisyOracle, Projection};
use ltv_learn::estimation::CostlyOracle;
use serde::Serialize;

use crate::config::{AlgorithmSpec, BuiltInstance, ComparatorSpec, EstimatorChoice, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::montecarlo::{config_hash, monte_carlo_collect, Aggregate, Metrics, SeedRecord};
use crate::regret::{adaptive_regret, grid_intervals_for, ComparatorMethod, RegretRecord};

/// One step of one seed. For prediction runs `cost` is the squared error
/// plus the query charge, `state_norm` is `‖ẑ_t‖` and `input_norm` is `‖z_t‖`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRow {
    pub seed: u64,
    pub t: usize,
    pub cost: f64,
    pub state_norm: f64,
    pub input_norm: f64,
    pub explored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalRow {
    pub seed: u64,
    pub start: usize,
    pub end: usize,
    pub algorithm_cost: f64,
    pub comparator_cost: f64,
    pub regret: f64,
    /// The learner's guarantee on this interval, where one is available.
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SeedOutput {
    pub steps: Vec<StepRow>,
    pub intervals: Vec<IntervalRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub algorithm: String,
    pub seeds: usize,
    pub failures: usize,
    pub aggregates: Vec<Aggregate>,
    pub failed_seeds: Vec<SeedRecord>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub summary: Summary,
    pub steps: Vec<StepRow>,
    pub intervals: Vec<IntervalRow>,
    pub records: Vec<SeedRecord>,
}

enum Outcome {
    Control { built: BuiltInstance, trace: Trace, metrics: Metrics },
    Prediction { audit: EstimationAudit, steps: Vec<StepRow>, metrics: Metrics, bound: Box<dyn Fn(&Interval) -> f64 + Send> },
}

fn control_steps(seed: u64, trace: &Trace) -> Vec<StepRow> {
    (1..=trace.horizon())
        .map(|t| StepRow {
            seed,
            t,
            cost: trace.cost(t),
            state_norm: trace.state(t).norm(),
            input_norm: trace.input(t).norm(),
            explored: trace.explore_flags.as_ref().is_some_and(|f| f[t - 1]),
        })
        .collect()
}

fn run_control(inst: &LtvInstance, algo: &AlgorithmSpec, seed: u64) -> Result<(Trace, Metrics)> {
    let horizon = inst.horizon();
    let (d_x, d_u) = (inst.state_dim(), inst.input_dim());
    match algo {
        AlgorithmSpec::DrcOgd { m, h, radius, eta, lipschitz } => {
            let eta = match eta {
                Some(e) => *e,
                None => {
                    let r_nat = nature_x(inst).iter().map(|x| x.norm()).fold(0.0, f64::max);
                    if !r_nat.is_finite() {
                        return Err(HarnessError::Numerical("Nature's state diverges, so no default step size exists; set eta".into()));
                    }
                    let r_g = markov_operators(inst, *h).iter().map(|g| g.l1_op_norm()).fold(0.0, f64::max).max(1.0);
                    drc_ogd_step_size(d_x.min(d_u), *lipschitz, r_g * radius * r_nat.max(1.0), *h, horizon, *radius)
                }
            };
            Ok((drc_ogd_run(inst, DrcOgdConfig { m: *m, h: *h, radius: *radius, eta, d_x, d_u })?, Vec::new()))
        }
        AlgorithmSpec::AdaCtrl { m, r_m, r_g, r_nat, lipschitz, rho, h, p, eta, estimator } => {
            let (h_def, p_def) = AdaCtrlConfig::default_schedule(horizon.max(2), *rho)?;
            let cfg = AdaCtrlConfig {
                p: p.unwrap_or(p_def),
                h: h.unwrap_or(h_def),
                m: *m,
                r_m: *r_m,
                r_g: *r_g,
                r_nat: *r_nat,
                lipschitz: *lipschitz,
                eta: *eta,
                estimator: match estimator {
                    EstimatorChoice::AdaPred => EstimatorMode::AdaPred,
                    EstimatorChoice::Oracle => EstimatorMode::Oracle,
                },
                seed,
            };
            let run = ada_ctrl_run(inst, &cfg)?;
            let metrics = vec![("explored_epochs".to_string(), run.explored_epochs() as f64)];
            Ok((run.trace, metrics))
        }
        AlgorithmSpec::Exp3 { window, r_k, epsilon, eta, loss_scale, lipschitz, c_star, rho_star, r_w, free, .. } => {
            let mut spec = CoverSpec::new(d_u, d_x, *r_k, *epsilon);
            spec.region = algo.gain_region();
            spec.free = free.clone();
            let arms = epsilon_cover(&spec)?;
            let windows = horizon.div_ceil(*window);
            let scale = loss_scale.unwrap_or_else(|| exp3_loss_scale(*lipschitz, *window, *r_k, *c_star, *rho_star, *r_w));
            let eta = eta.unwrap_or_else(|| exp3_default_eta(arms.len(), windows, scale));
            let run = exp3_control_run(inst, &arms, Exp3Config { window: *window, eta, seed })?;
            let best = run.final_probabilities.iter().cloned().fold(0.0, f64::max);
            let metrics = vec![
                ("arms".to_string(), arms.len() as f64),
                ("regret_bound".to_string(), exp3_regret_bound(arms.len(), windows, scale)),
                ("final_max_probability".to_string(), best),
            ];
            Ok((run.trace, metrics))
        }
        AlgorithmSpec::AdaPred { .. } => Err(HarnessError::Validation("ada-pred is a prediction run, not a control run".into())),
    }
}

fn run_seed_outcome(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    if let AlgorithmSpec::AdaPred { horizon, p, lambda, noise, targets } = &cfg.algorithm {
        let z = targets.draw(*horizon, seed)?;
        let mut oracle = NoisyOracle::new(z.clone(), *noise, seed);
        let r_z = targets.radius();
        let r_est = oracle.estimate_bound();
        let dim = z[0].len();
        let pred_cfg = AdaPredConfig { p: *p, r_z, r_est, projection: Projection::Ball { radius: r_z }, start: ltv_core::Vector::zeros(dim) };
        let run = ada_pred_run(&mut oracle, pred_cfg, *horizon, seed)?;
        let audit = EstimationAudit::new(&run, &z, *lambda)?;
        let steps = (0..*horizon)
            .map(|k| StepRow {
                seed,
                t: k + 1,
                cost: (&run.predictions[k] - &z[k]).norm_squared() + if run.queries[k] { *lambda } else { 0.0 },
                state_norm: run.predictions[k].norm(),
                input_norm: z[k].norm(),
                explored: run.queries[k],
            })
            .collect();
        let metrics = vec![("queries".to_string(), run.query_count() as f64)];
        let (p, lambda) = (*p, *lambda);
        return Ok(Outcome::Prediction { audit, steps, metrics, bound: Box::new(move |i| ada_pred_interval_bound(r_z, r_est, p, lambda, i)) });
    }
    let spec = cfg.instance.as_ref().ok_or_else(|| HarnessError::Validation(format!("{} needs an instance", cfg.algorithm.name())))?;
    let built = spec.build(seed)?;
    let (trace, metrics) = run_control(&built.instance, &cfg.algorithm, seed)?;
    Ok(Outcome::Control { built, trace, metrics })
}

/// Resolves the comparator: the configured class, or else the generator's
/// own reference policy played as an explicit comparator.
fn comparator_for(cfg: &ExperimentConfig, built: &BuiltInstance) -> Result<ComparatorSpec> {
    if let Some(c) = &cfg.comparator {
        let mut c = c.clone();
        let mut method = c.resolved_method();
        if let (ComparatorMethod::ProjectedDescent { warm_starts, .. }, Some((kind, params))) = (&mut method, &built.reference) {
            if *kind == c.kind && params.memory() <= c.m {
                warm_starts.push(ltv_core::json::PolicyDoc::from_policy(params, None));
            }
        }
        c.method = Some(method);
        return Ok(c);
    }
    match &built.reference {
        Some((kind, params)) => Ok(ComparatorSpec { kind: *kind, m: params.memory(), radius: params.l1_op_norm().max(1.0), method: Some(ComparatorMethod::explicit(params)) }),
        None => Err(HarnessError::Validation("regret needs a comparator class for this instance".into())),
    }
}

/// Runs one seed; with `regret` set, also scores every interval of the grid.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, regret: bool) -> Result<(Metrics, SeedOutput)> {
    match run_seed_outcome(cfg, seed)? {
        Outcome::Control { built, trace, metrics: extra } => {
            let total = trace.total_cost();
            let mut metrics = vec![("total_cost".to_string(), total), ("mean_cost".to_string(), total / trace.horizon() as f64)];
            metrics.extend(extra);
            let mut out = SeedOutput { steps: control_steps(seed, &trace), intervals: Vec::new() };
            if regret {
                let comp = comparator_for(cfg, &built)?;
                let report = adaptive_regret(&trace, &built.instance, &comp.class(), &cfg.intervals, &comp.resolved_method(), seed)?;
                metrics.push(("max_regret".to_string(), report.max_regret()));
                let whole = Interval { start: 1, end: trace.horizon() };
                if let Some(r) = report.record(&whole) {
                    metrics.push(("regret".to_string(), r.regret));
                }
                out.intervals = report.records.iter().map(|r| interval_row(seed, r, None)).collect();
            }
            Ok((metrics, out))
        }
        Outcome::Prediction { audit, steps, metrics: extra, bound } => {
            let horizon = audit.horizon();
            let whole = Interval { start: 1, end: horizon };
            let mut metrics = vec![("regret".to_string(), audit.regret(&whole)?)];
            metrics.extend(extra);
            let mut out = SeedOutput { steps, intervals: Vec::new() };
            if regret {
                let mut worst_slack = f64::NEG_INFINITY;
                for i in grid_intervals_for(&cfg.intervals, horizon, &[])? {
                    let (algorithm_cost, comparator_cost) = audit.parts(&i)?;
                    let b = bound(&i);
                    let rec = RegretRecord { interval: i, algorithm_cost, comparator_cost, regret: algorithm_cost - comparator_cost };
                    worst_slack = worst_slack.max(rec.regret - b);
                    out.intervals.push(interval_row(seed, &rec, Some(b)));
                }
                metrics.push(("max_regret_minus_bound".to_string(), worst_slack));
            }
            Ok((metrics, out))
        }
    }
}

fn interval_row(seed: u64, r: &RegretRecord, bound: Option<f64>) -> IntervalRow {
    IntervalRow { seed, start: r.interval.start, end: r.interval.end, algorithm_cost: r.algorithm_cost, comparator_cost: r.comparator_cost, regret: r.regret, bound }
}

/// Runs every configured seed in parallel and assembles the outputs in seed
/// order.
pub fn run_experiment(cfg: &ExperimentConfig, regret: bool) -> Result<ExperimentOutput> {
    cfg.validate()?;
    // Where results are written is not part of the experiment's identity.
    let hash = config_hash(&ExperimentConfig { output: Default::default(), ..cfg.clone() })?;
    let (mc, payloads) = monte_carlo_collect(&cfg.seeds, |seed| run_seed(cfg, seed, regret));
    let mut steps = Vec::new();
    let mut intervals = Vec::new();
    for (_, out) in payloads {
        steps.extend(out.steps);
        intervals.extend(out.intervals);
    }
    let summary = Summary {
        config_hash: hash,
        algorithm: cfg.algorithm.name().to_string(),
        seeds: mc.seeds.len(),
        failures: mc.failures(),
        aggregates: mc.aggregates.clone(),
        failed_seeds: mc.seeds.iter().filter(|s| s.failure.is_some()).cloned().collect(),
    };
    Ok(ExperimentOutput { summary, steps, intervals, records: mc.seeds })
}

impl ExperimentOutput {
    /// Writes `steps.csv`, `intervals.csv` (when regret was scored) and
    /// `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_csv(&dir.join("steps.csv"), &self.steps)?;
        if !self.intervals.is_empty() {
            write_csv(&dir.join("intervals.csv"), &self.intervals)?;
        }
        let path = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(&self.summary)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
    }

    pub fn failure_status(&self) -> Result<()> {
        crate::montecarlo::require_success(&crate::montecarlo::MonteCarloRun { seeds: self.records.clone(), aggregates: Vec::new() })
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::Validation(format!("{}: {other:?}", path.display())),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
