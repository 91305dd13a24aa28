//! `check`, `solve`, `oracle`, `river`, `stability` and `multirisk`.

use std::time::Instant;

use serde_json::{json, Value};
use specrisk::comonotone::{solve_with_signs, ComonotoneOptions, ComonotoneSolution};
use specrisk::marginals::{DiscreteMarginal, Marginal};
use specrisk::mmot::{
    lift_surplus, monotone_support_check, partial_transport_value, solve_lifted, solve_mmot_entropic,
    solve_mmot_lp, Coupling, EntropicOptions, LpOptions, LpSolution,
};
use specrisk::multirisk::{
    curve_lifted_lp, invertibility_probe, maximal_correlation, solve_curve_case, BaselineMeasure, PointCloud,
};
use specrisk::payout::{
    classify_compatibility, mixed_partial_signs, twist_condition_check, Partition, Payout, Side, Sign, SignStructure,
    Verdict,
};
use specrisk::stability::{perturbation_experiment, ExperimentOptions, Perturbation};
use specrisk::{Error, Marginal64, SpectralFunction64};

use crate::config::{RunConfig, SolverSpec, StabilitySpec};
use crate::{river, CliError, Outcome};

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub solver: Option<String>,
    pub discretize: Option<usize>,
    pub epsilon: Option<f64>,
    pub m0: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.discretize {
            if n == 0 {
                return Err(CliError::Config("--discretize must be at least 1".into()));
            }
            cfg.discretization = n;
        }
        let name = self.solver.as_deref().unwrap_or(cfg.solver.name());
        cfg.solver = match name {
            "auto" => SolverSpec::Auto,
            "comonotone" => SolverSpec::Comonotone,
            "lp" => SolverSpec::Lp,
            "entropic" => {
                let epsilon = match (self.epsilon, cfg.solver) {
                    (Some(e), _) => e,
                    (None, SolverSpec::Entropic { epsilon }) => epsilon,
                    _ => return Err(CliError::Config("the entropic solver needs --epsilon".into())),
                };
                SolverSpec::Entropic { epsilon }
            }
            "partial" => {
                let m0 = match (self.m0, cfg.solver) {
                    (Some(m), _) => m,
                    (None, SolverSpec::Partial { m0 }) => m0,
                    _ => cfg.spectral.es_level().ok_or_else(|| {
                        CliError::Config("the partial solver needs --m0 or an expected-shortfall spectrum".into())
                    })?,
                };
                SolverSpec::Partial { m0 }
            }
            other => return Err(CliError::Config(format!("unknown solver `{other}`"))),
        };
        Ok(())
    }
}

/// Everything derived from a config before a solver runs.
struct Setup {
    names: Vec<String>,
    marginals: Vec<Marginal64>,
    alpha: SpectralFunction64,
    payout: Payout,
    signs: SignStructure,
    /// `probed`, `declared` or `supermodular`.
    sign_source: &'static str,
    /// Declared entries contradicted by probing.
    sign_disagreements: Vec<String>,
    lifted: bool,
    verdict: Verdict,
    auto_partition: Option<Partition>,
}

impl Setup {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let marginals = cfg.build_marginals()?;
        let alpha = cfg.build_alpha()?;
        let payout = cfg.build_payout(&marginals)?;
        let (signs, sign_source, sign_disagreements) = match cfg.declared_signs()? {
            Some(declared) => {
                let found = match mixed_partial_signs(&payout, cfg.grid_per_axis) {
                    Ok(probed) => declared.disagreements(&probed),
                    Err(e) => vec![format!("probing failed: {e}")],
                };
                (declared, "declared", found)
            }
            None => {
                let mut probed = mixed_partial_signs(&payout, cfg.grid_per_axis)?;
                if cfg.payout.supermodular {
                    let d = probed.arity();
                    for i in 0..d {
                        for j in 0..d {
                            if i != j {
                                probed.sigma[i][j] = Sign::Positive;
                            }
                        }
                    }
                    (probed, "supermodular", Vec::new())
                } else {
                    (probed, "probed", Vec::new())
                }
            }
        };
        let lifted = !alpha.is_constant();
        let (auto_partition, verdict) = classify_compatibility(&signs, lifted);
        Ok(Self {
            names: cfg.names(),
            marginals,
            alpha,
            payout,
            signs,
            sign_source,
            sign_disagreements,
            lifted,
            verdict,
            auto_partition,
        })
    }

    fn comonotone_options(&self, cfg: &RunConfig) -> ComonotoneOptions {
        ComonotoneOptions {
            grid_per_axis: cfg.grid_per_axis,
            trust_partition: cfg.override_compatibility,
            ..Default::default()
        }
    }

    fn partition_json(&self, p: Option<&Partition>) -> Value {
        partition_json(&self.names, p)
    }
}

fn partition_json(names: &[String], p: Option<&Partition>) -> Value {
    match p {
        None => Value::Null,
        Some(p) => {
            let pick = |side: Side| -> Vec<&str> {
                (1..p.sides.len())
                    .filter(|&i| p.side(i) == side)
                    .map(|i| names[i - 1].as_str())
                    .collect()
            };
            json!({ "plus": pick(Side::Plus), "minus": pick(Side::Minus) })
        }
    }
}

fn verdict_json(v: &Verdict, names: &[String]) -> Value {
    match v {
        Verdict::Incompatible { witness, point, reason } => {
            let node = |i: &usize| if *i == 0 { "x0".to_string() } else { names[i - 1].clone() };
            json!({
                "label": v.label(),
                "witness": witness.iter().map(node).collect::<Vec<_>>(),
                "point": point,
                "reason": reason,
            })
        }
        _ => json!({ "label": v.label() }),
    }
}

fn finish(mut report: Value, start: Instant) -> Value {
    report["timing_ms"] = json!(start.elapsed().as_secs_f64() * 1e3);
    report
}

/// Discrete marginals kept as they are, others discretized to `n` atoms.
fn discretized(marginals: &[Marginal64], n: usize) -> Result<(Vec<DiscreteMarginal<f64>>, Option<String>), CliError> {
    let mut any = false;
    let out = marginals
        .iter()
        .map(|m| match m.as_discrete() {
            Some(d) => Ok(d.clone()),
            None => {
                any = true;
                m.discretize(n)
            }
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let caveat = any.then(|| {
        format!("continuous marginals were discretized to {n} atoms; the value carries discretization error")
    });
    Ok((out, caveat))
}

fn plan_csv(plan: &Coupling<f64>) -> Result<String, CliError> {
    let mut buf = Vec::new();
    plan.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn support_csv(sol: &ComonotoneSolution<f64>, names: &[String], value_column: &str) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["m".to_string()];
    header.extend(names.iter().cloned());
    header.push(value_column.to_string());
    w.write_record(&header)?;
    for row in &sol.support_sample {
        let mut rec = vec![row.m.to_string()];
        rec.extend(row.x.iter().map(|v| v.to_string()));
        rec.push(row.b.to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn check_report(s: &Setup, cfg: &RunConfig) -> Result<Value, CliError> {
    let names = &s.names;
    let monotonicity: Vec<Value> = names
        .iter()
        .zip(&s.signs.monotonicity)
        .map(|(n, m)| json!({ "variable": n, "label": m.label() }))
        .collect();
    let increasing: Vec<&String> = names
        .iter()
        .zip(&s.signs.monotonicity)
        .filter(|(_, m)| m.is_nondecreasing() && !m.is_nonincreasing())
        .map(|(n, _)| n)
        .collect();
    let decreasing: Vec<&String> = names
        .iter()
        .zip(&s.signs.monotonicity)
        .filter(|(_, m)| m.is_nonincreasing() && !m.is_nondecreasing())
        .map(|(n, _)| n)
        .collect();
    let sigma: Vec<Vec<&str>> = s.signs.sigma.iter().map(|r| r.iter().map(|x| x.code()).collect()).collect();
    let twist = match cfg.twist_block {
        None => Value::Null,
        Some(n) => {
            let t = twist_condition_check(&s.payout, n, cfg.grid_per_axis)?;
            json!({
                "block_dim": t.block_dim,
                "points": t.points,
                "passing": t.passing,
                "singular": t.singular,
                "fraction_passing": t.fraction_passing,
                "min_value": t.min_value,
                "worst_point": t.worst_point,
            })
        }
    };
    Ok(json!({
        "command": "check",
        "verdict": verdict_json(&s.verdict, names),
        "compatible": s.verdict.is_compatible(),
        "spectral_variable_included": s.lifted,
        "partition": s.partition_json(s.auto_partition.as_ref()),
        "sign_source": s.sign_source,
        "sign_disagreements": s.sign_disagreements,
        "sigma": sigma,
        "monotonicity": monotonicity,
        "increasing": increasing,
        "decreasing": decreasing,
        "grid_per_axis": s.signs.grid_per_axis,
        "excluded_samples": s.signs.excluded_samples,
        "twist": twist,
    }))
}

/// Sign classification and, when requested, the twist probe. Exit code 2 when incompatible.
pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let s = Setup::new(cfg)?;
    let report = check_report(&s, cfg)?;
    Ok(Outcome {
        report: finish(report, start),
        tables: Vec::new(),
        exit_code: if s.verdict.is_compatible() { 0 } else { 2 },
    })
}

struct Run {
    method: &'static str,
    value: f64,
    partition: Value,
    diagnostics: Value,
    warnings: Vec<String>,
    tables: Vec<(String, String)>,
}

fn run_comonotone(s: &Setup, cfg: &RunConfig, marginals: &[Marginal64], table: &str) -> Result<Run, CliError> {
    let user = cfg.partition()?;
    let sol = solve_with_signs(
        &s.alpha,
        &s.payout,
        marginals,
        &s.signs,
        user.as_ref(),
        &s.comonotone_options(cfg),
    )?;
    let mut warnings = Vec::new();
    if cfg.override_compatibility && !s.verdict.is_compatible() {
        warnings.push("hypotheses overridden; the comonotone value is only a lower bound".to_string());
    }
    if let Some(w) = s.alpha.normalization_warning() {
        warnings.push(w);
    }
    let value_column = if table == "river_table.csv" { "S" } else { "b" };
    Ok(Run {
        method: "comonotone",
        value: sol.value,
        partition: s.partition_json(Some(&sol.partition)),
        diagnostics: json!({
            "exact": sol.exact,
            "alpha_zero_mass": sol.alpha_zero_mass,
            "region_boundaries": sol.region_boundaries,
            "unique_off_alpha_zero": sol.unique_off_alpha_zero,
            "composition_nondecreasing": sol.composition_nondecreasing,
        }),
        warnings,
        tables: vec![(table.to_string(), support_csv(&sol, &s.names, value_column)?)],
    })
}

fn lifted_lp(s: &Setup, cfg: &RunConfig, disc: &[DiscreteMarginal<f64>]) -> Result<LpSolution<f64>, CliError> {
    let lifted = lift_surplus(&s.alpha, &s.payout, cfg.discretization)?;
    Ok(solve_lifted(&lifted, disc, &LpOptions::default())?.require_optimal()?)
}

fn run_lp(s: &Setup, cfg: &RunConfig) -> Result<Run, CliError> {
    let (disc, caveat) = discretized(&s.marginals, cfg.discretization)?;
    let sol = lifted_lp(s, cfg, &disc)?;
    let monotone = if s.verdict.is_compatible() {
        Some(monotone_support_check(&sol.plan, &s.payout)?.monotone)
    } else {
        None
    };
    Ok(Run {
        method: "lp",
        value: sol.value,
        partition: s.partition_json(s.auto_partition.as_ref()),
        diagnostics: json!({
            "status": sol.status.label(),
            "pivots": sol.pivots,
            "dual_value": sol.dual_value(),
            "max_marginal_residual": max_abs(&sol.plan.marginal_residuals()),
            "monotone_support": monotone,
            "discretization": cfg.discretization,
        }),
        warnings: caveat.into_iter().collect(),
        tables: vec![("plan.csv".into(), plan_csv(&sol.plan)?)],
    })
}

fn run_entropic(s: &Setup, cfg: &RunConfig, epsilon: f64) -> Result<Run, CliError> {
    let (disc, caveat) = discretized(&s.marginals, cfg.discretization)?;
    let lifted = lift_surplus(&s.alpha, &s.payout, cfg.discretization)?;
    let mut all = vec![lifted.mu0.measure.clone()];
    all.extend(disc);
    let sol = solve_mmot_entropic(&all, |x: &[f64]| lifted.eval(x), epsilon, &EntropicOptions::default())?;
    let mut warnings: Vec<String> = caveat.into_iter().collect();
    warnings.push("entropic values are a diagnostic, not a certified optimum".into());
    Ok(Run {
        method: "entropic",
        value: sol.value,
        partition: Value::Null,
        diagnostics: json!({
            "status": sol.status.label(),
            "epsilon": epsilon,
            "sweeps": sol.pivots,
            "max_marginal_residual": max_abs(&sol.plan.marginal_residuals()),
        }),
        warnings,
        tables: vec![("plan.csv".into(), plan_csv(&sol.plan)?)],
    })
}

fn run_partial(s: &Setup, cfg: &RunConfig, m0: f64) -> Result<Run, CliError> {
    let (disc, caveat) = discretized(&s.marginals, cfg.discretization)?;
    let sol = partial_transport_value(m0, &s.payout, &disc, &LpOptions::default())?.require_optimal()?;
    let mut warnings: Vec<String> = caveat.into_iter().collect();
    if cfg.spectral.es_level() != Some(m0) {
        warnings.push(format!(
            "partial transport at mass {m0} equals the worst expected shortfall at that level, not the configured spectrum"
        ));
    }
    Ok(Run {
        method: "partial",
        value: sol.value,
        partition: Value::Null,
        diagnostics: json!({
            "status": sol.status.label(),
            "m0": m0,
            "max_dominance_excess": max_abs(&sol.plan.dominance_excess()),
        }),
        warnings,
        tables: vec![("plan.csv".into(), plan_csv(&sol.plan)?)],
    })
}

fn solve_run(s: &Setup, cfg: &RunConfig, table: &str) -> Result<Run, CliError> {
    match cfg.solver {
        SolverSpec::Auto => {
            if s.verdict.is_compatible() || (cfg.override_compatibility && cfg.partition_minus.is_some()) {
                run_comonotone(s, cfg, &s.marginals, table)
            } else {
                let mut run = run_lp(s, cfg)?;
                run.warnings.insert(0, "payout is not compatible; solved the multi-marginal LP instead".into());
                Ok(run)
            }
        }
        SolverSpec::Comonotone => run_comonotone(s, cfg, &s.marginals, table),
        SolverSpec::Lp => run_lp(s, cfg),
        SolverSpec::Entropic { epsilon } => run_entropic(s, cfg, epsilon),
        SolverSpec::Partial { m0 } => run_partial(s, cfg, m0),
    }
}

fn solve_json(s: &Setup, cfg: &RunConfig, run: &Run, command: &str) -> Value {
    json!({
        "command": command,
        "solver": cfg.solver.name(),
        "method": run.method,
        "value": run.value,
        "verdict": verdict_json(&s.verdict, &s.names),
        "partition": run.partition,
        "diagnostics": run.diagnostics,
        "warnings": run.warnings,
        "provenance": cfg.provenance,
        "config": cfg,
    })
}

/// Dispatches to the configured solver and reports its value.
pub fn cmd_solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let s = Setup::new(cfg)?;
    let run = solve_run(&s, cfg, "support.csv")?;
    Ok(Outcome {
        report: finish(solve_json(&s, cfg, &run, "solve"), start),
        tables: run.tables,
        exit_code: 0,
    })
}

/// Runs the comonotone formula and the lifted LP on the same discrete
/// marginals and reports their gap; adds the partial-transport value for
/// expected shortfall and the plain transport value for constant spectra.
pub fn cmd_oracle(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let s = Setup::new(cfg)?;
    let (disc, caveat) = discretized(&s.marginals, cfg.discretization)?;
    let lp = lifted_lp(&s, cfg, &disc)?;
    let discrete: Vec<Marginal64> = disc.iter().cloned().map(Marginal::Discrete).collect();

    let comonotone = if s.verdict.is_compatible() || cfg.override_compatibility {
        Some(run_comonotone(&s, cfg, &discrete, "support.csv")?)
    } else {
        None
    };
    let monotone = monotone_support_check(&lp.plan, &s.payout)?;
    let oracle_gap = comonotone.as_ref().map(|c| (c.value - lp.value).abs());

    let partial = match cfg.spectral.es_level() {
        Some(m0) => Some(partial_transport_value(m0, &s.payout, &disc, &LpOptions::default())?.require_optimal()?),
        None => None,
    };
    let three_way_gap = match (&partial, &comonotone) {
        (Some(p), Some(c)) => {
            let v = [p.value, lp.value, c.value];
            Some(v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - v.iter().fold(f64::INFINITY, |a, &b| a.min(b)))
        }
        (Some(p), None) => Some((p.value - lp.value).abs()),
        _ => None,
    };

    let plain = if s.alpha.is_constant() {
        let c = s.alpha.bound();
        let b = &s.payout;
        let sol = solve_mmot_lp(&disc, |x: &[f64]| Ok(c * b.eval(x)?), &LpOptions::default())?.require_optimal()?;
        Some(sol.value)
    } else {
        None
    };

    let mut warnings: Vec<String> = caveat.into_iter().collect();
    if comonotone.is_none() {
        warnings.push("payout is not compatible; only the LP value is available".into());
    }
    let mut tables = vec![("plan.csv".to_string(), plan_csv(&lp.plan)?)];
    if let Some(c) = &comonotone {
        tables.extend(c.tables.iter().cloned());
    }
    let report = json!({
        "command": "oracle",
        "value": lp.value,
        "lp_value": lp.value,
        "comonotone_value": comonotone.as_ref().map(|c| c.value),
        "oracle_gap": oracle_gap,
        "partial_value": partial.as_ref().map(|p| p.value),
        "three_way_gap": three_way_gap,
        "plain_mmot_value": plain,
        "verdict": verdict_json(&s.verdict, &s.names),
        "partition": comonotone.as_ref().map_or(Value::Null, |c| c.partition.clone()),
        "diagnostics": {
            "lp_status": lp.status.label(),
            "dual_value": lp.dual_value(),
            "max_marginal_residual": max_abs(&lp.plan.marginal_residuals()),
            "monotone_support": monotone.monotone,
            "monotone_violations": monotone.violations.len(),
        },
        "warnings": warnings,
        "config": cfg,
    });
    Ok(Outcome {
        report: finish(report, start),
        tables,
        exit_code: 0,
    })
}

/// Classification and comonotone solve of the river overflow model, with
/// placeholder marginals unless the config supplies all eight.
pub fn cmd_river(user: Option<&RunConfig>) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let cfg = river::river_config(user)?;
    let s = Setup::new(&cfg)?;
    let check = check_report(&s, &cfg)?;
    if !s.verdict.is_compatible() {
        return Ok(Outcome {
            report: finish(json!({ "command": "river", "check": check, "provenance": cfg.provenance }), start),
            tables: Vec::new(),
            exit_code: 2,
        });
    }
    let run = solve_run(&s, &cfg, "river_table.csv")?;
    let solve = solve_json(&s, &cfg, &run, "river");
    let report = json!({
        "command": "river",
        "expression": river::RIVER_EXPR,
        "provenance": cfg.provenance,
        "value": run.value,
        "check": check,
        "solve": solve,
    });
    Ok(Outcome {
        report: finish(report, start),
        tables: run.tables,
        exit_code: 0,
    })
}

/// Perturbation trials against the Lipschitz bound.
pub fn cmd_stability(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let marginals = cfg.build_marginals()?;
    let alpha = cfg.build_alpha()?;
    let payout = cfg.build_payout(&marginals)?;
    let spec = cfg.stability.clone().unwrap_or(StabilitySpec {
        perturbation: Perturbation::Jitter {
            sigma: 0.05,
            atoms: cfg.discretization,
        },
        trials: 100,
        p: 1.0,
        k_override: None,
    });
    let opts = ExperimentOptions {
        p: spec.p,
        trials: spec.trials,
        seed: cfg.seed,
        k_override: spec.k_override,
        grid_per_axis: cfg.grid_per_axis,
        comonotone: ComonotoneOptions {
            grid_per_axis: cfg.grid_per_axis,
            ..Default::default()
        },
    };
    let rep = perturbation_experiment(&alpha, &payout, &marginals, spec.perturbation, &opts)?;
    let mut buf = Vec::new();
    rep.write_trials_csv(&mut buf)?;
    let mut body = serde_json::to_value(&rep).expect("report serializes");
    if let Some(obj) = body.as_object_mut() {
        obj.remove("trial_log");
        obj.insert("command".into(), json!("stability"));
        obj.insert("perturbation".into(), serde_json::to_value(spec.perturbation).expect("serializes"));
        obj.insert("trials".into(), json!(spec.trials));
        obj.insert("config".into(), serde_json::to_value(cfg).expect("serializes"));
    }
    Ok(Outcome {
        report: finish(body, start),
        tables: vec![("trials.csv".into(), String::from_utf8(buf).expect("csv is utf-8"))],
        exit_code: 0,
    })
}

/// Maximal-correlation risk of a vector payout against a curve or a point cloud.
pub fn cmd_multirisk(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let marginals = cfg.build_marginals()?;
    let b = cfg.build_vector_payout(&marginals)?;
    let baseline = cfg.build_baseline()?;
    let mut warnings = Vec::new();
    let mut report = match &baseline {
        BaselineMeasure::Curve(curve) => {
            let opts = ComonotoneOptions {
                grid_per_axis: cfg.grid_per_axis,
                ..Default::default()
            };
            let sol = solve_curve_case(curve, &b, &marginals, &opts)?;
            let oracle = match marginals.iter().map(|m| m.as_discrete().cloned()).collect::<Option<Vec<_>>>() {
                Some(disc) => match curve_lifted_lp(curve, &b, &disc, cfg.discretization, &LpOptions::default()) {
                    Ok(lp) => Some(lp.value),
                    Err(Error::SizeGuard { size, limit }) => {
                        warnings.push(format!("lifted LP skipped: size {size} exceeds {limit}"));
                        None
                    }
                    Err(e) => return Err(e.into()),
                },
                None => None,
            };
            json!({
                "baseline": "curve",
                "value": sol.value,
                "exact": sol.exact,
                "lifted_lp_value": oracle,
                "oracle_gap": oracle.map(|v| (v - sol.value).abs()),
            })
        }
        BaselineMeasure::PointCloud(nu) => {
            let (disc, caveat) = discretized(&marginals, cfg.discretization)?;
            warnings.extend(caveat);
            let product = Coupling::product(&disc)?;
            let eta = PointCloud::from_coupling(&b, &disc, product.support())?;
            let sol = maximal_correlation(nu, &eta, &LpOptions::default())?;
            json!({
                "baseline": "point_cloud",
                "value": sol.value,
                "payout_law": "independent coupling of the marginals",
                "lp_status": sol.status.label(),
            })
        }
    };
    if cfg.multirisk.as_ref().is_some_and(|m| m.invertibility) {
        let r = invertibility_probe(&b, cfg.grid_per_axis)?;
        report["invertibility"] = json!({
            "points": r.points,
            "excluded": r.excluded,
            "min_abs_det": r.min_abs_det,
            "scale": r.scale,
            "flagged": r.flagged.len(),
            "passing": r.passing,
        });
    }
    report["command"] = json!("multirisk");
    report["warnings"] = json!(warnings);
    report["config"] = serde_json::to_value(cfg).expect("serializes");
    Ok(Outcome {
        report: finish(report, start),
        tables: Vec::new(),
        exit_code: 0,
    })
}
