//! Stability of the worst-case value under changes of the marginals.
//!
//! For a payout that is `K`-Lipschitz in the `ℓ^p` norm and `α ≤ M`,
//! the optimal values for marginals `μ` and `ν` differ by at most
//! `M·K·(Σ_i W_p(μ_i, ν_i)^p)^{1/p}`. This is the bound tested here; the
//! variant with `W_p` unpowered under the root is reported alongside it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comonotone::{solve_compatible, ComonotoneOptions};
use crate::error::{Error, Result};
use crate::marginals::{wasserstein_1d, DiscreteMarginal, Marginal};
use crate::payout::{BinOp, Expr, Payout};
use crate::scalar::Scalar;
use crate::spectral::SpectralFunction;

/// Both forms of the Lipschitz bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzBound {
    /// `M·K·(Σ W_p^p)^{1/p}`.
    pub proof_form: f64,
    /// `M·K·(Σ W_p)^{1/p}`.
    pub statement_form: f64,
}

pub fn lipschitz_bound(k: f64, m: f64, wp: &[f64], p: f64) -> Result<LipschitzBound> {
    if !(k >= 0.0 && m >= 0.0 && k.is_finite() && m.is_finite()) {
        return Err(Error::invalid("Lipschitz constants must be finite and nonnegative"));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("order p must be >= 1, got {p}")));
    }
    if wp.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("Wasserstein distances must be nonnegative"));
    }
    let powered: f64 = wp.iter().map(|w| w.powf(p)).sum();
    let plain: f64 = wp.iter().sum();
    Ok(LipschitzBound {
        proof_form: m * k * powered.powf(1.0 / p),
        statement_form: m * k * plain.powf(1.0 / p),
    })
}

/// `sup ‖∇b‖_q` over the probe grid, `q` conjugate to `p`.
pub fn estimate_lipschitz(b: &Payout, p: f64, grid_per_axis: usize) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("order p must be >= 1, got {p}")));
    }
    let grid = crate::payout::probe_grid(b.domain(), grid_per_axis)?;
    let norms = grid
        .points
        .par_iter()
        .map(|x| {
            let g = crate::payout::gradient_at(b, x, &grid.steps)?;
            let g: Vec<f64> = g.into_iter().flatten().map(f64::abs).collect();
            Ok(if p == 1.0 {
                g.iter().fold(0.0f64, |a, &v| a.max(v))
            } else if p.is_infinite() {
                g.iter().sum()
            } else {
                let q = p / (p - 1.0);
                g.iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
            })
        })
        .collect::<Vec<Result<f64>>>();
    let mut k = 0.0f64;
    for n in norms {
        k = k.max(n?);
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Translate every marginal by `delta`.
    Shift { delta: f64 },
    /// Replace every marginal by an empirical measure of `n` draws.
    Resample { n: usize },
    /// Discretize to `atoms` levels and add Gaussian noise of scale `sigma` to each atom.
    Jitter { sigma: f64, atoms: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub wp: Vec<f64>,
    pub value: f64,
    pub observed: f64,
    pub bound: f64,
    pub statement_bound: f64,
    pub ratio: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityInputs {
    pub k: f64,
    pub k_estimated: bool,
    pub m: f64,
    pub p: f64,
    /// Per-marginal `W_p` of the reported trial.
    pub wp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Bound and observation of the trial with the largest `observed / bound`.
    pub bound: f64,
    pub observed: f64,
    pub statement_bound: f64,
    /// Every trial satisfied `observed ≤ bound + 1e-9`.
    pub satisfied: bool,
    pub worst_ratio: f64,
    pub base_value: f64,
    pub inputs: StabilityInputs,
    pub trial_log: Vec<TrialRecord>,
}

impl StabilityReport {
    pub fn write_trials_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let d = self.inputs.wp.len();
        let mut header = vec!["trial".to_string()];
        header.extend((1..=d).map(|i| format!("wp{i}")));
        header.extend(
            ["value", "observed", "bound", "statement_bound", "ratio", "satisfied"].map(String::from),
        );
        w.write_record(&header)?;
        for t in &self.trial_log {
            let mut rec = vec![t.trial.to_string()];
            rec.extend(t.wp.iter().map(|v| v.to_string()));
            rec.extend([
                t.value.to_string(),
                t.observed.to_string(),
                t.bound.to_string(),
                t.statement_bound.to_string(),
                t.ratio.to_string(),
                t.satisfied.to_string(),
            ]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    pub p: f64,
    pub trials: usize,
    pub seed: u64,
    /// Use this `K` instead of the grid estimate (no inflation is applied).
    pub k_override: Option<f64>,
    pub grid_per_axis: usize,
    pub comonotone: ComonotoneOptions,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            p: 1.0,
            trials: 100,
            seed: 0,
            k_override: None,
            grid_per_axis: 5,
            comonotone: ComonotoneOptions::default(),
        }
    }
}

/// Slack of the `satisfied` test.
const BOUND_SLACK: f64 = 1e-9;
/// Inflation of a grid-estimated `K`.
const K_INFLATION: f64 = 1.01;

fn perturb<T: Scalar>(mu: &Marginal<T>, kind: Perturbation, rng: &mut ChaCha8Rng) -> Result<Marginal<T>> {
    match kind {
        Perturbation::Shift { delta } => mu.shifted(T::lit(delta)),
        Perturbation::Resample { n } => {
            if n == 0 {
                return Err(Error::invalid("resampling needs n >= 1"));
            }
            let draws: Vec<T> = (0..n)
                .map(|_| mu.quantile(T::lit(rng.random::<f64>())))
                .collect();
            Ok(Marginal::Discrete(DiscreteMarginal::empirical(&draws)?))
        }
        Perturbation::Jitter { sigma, atoms } => {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::invalid(format!("jitter scale {sigma}: {e}")))?;
            let base = match mu {
                Marginal::Discrete(d) => d.clone(),
                other => other.discretize(atoms)?,
            };
            let atoms = base
                .atoms()
                .map(|(x, w)| (x + T::lit(normal.sample(rng)), w))
                .collect::<Vec<_>>();
            Ok(Marginal::Discrete(DiscreteMarginal::normalized(atoms)?))
        }
    }
}

fn hull(domain: &[(f64, f64)], marginals: &[Marginal<impl Scalar>]) -> Vec<(f64, f64)> {
    domain
        .iter()
        .zip(marginals)
        .map(|(&(lo, hi), m)| {
            let (a, b) = m.support();
            (lo.min(a.to_f64_lossy()), hi.max(b.to_f64_lossy()))
        })
        .collect()
}

/// Perturbs the marginals `trials` times, re-solves the comonotone problem,
/// and compares each change of value with the Lipschitz bound.
pub fn perturbation_experiment<T: Scalar>(
    alpha: &SpectralFunction<T>,
    b: &Payout,
    marginals: &[Marginal<T>],
    perturbation: Perturbation,
    opts: &ExperimentOptions,
) -> Result<StabilityReport> {
    let base = solve_compatible(alpha, b, marginals, None, &opts.comonotone)?;
    let (k, k_estimated) = match opts.k_override {
        Some(k) => (k, false),
        None => (estimate_lipschitz(b, opts.p, opts.grid_per_axis)? * K_INFLATION, true),
    };
    let m = alpha.bound().to_f64_lossy();
    let base_value = base.value.to_f64_lossy();
    let p = T::lit(opts.p);

    let trial_log = (0..opts.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialRecord> {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(trial as u64);
            let moved = marginals
                .iter()
                .map(|mu| perturb(mu, perturbation, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let wp = marginals
                .iter()
                .zip(&moved)
                .map(|(a, b)| wasserstein_1d(a, b, p).map(|w| w.to_f64_lossy()))
                .collect::<Result<Vec<_>>>()?;
            let bb = b.with_domain(hull(b.domain(), &moved))?;
            let sol = solve_compatible(alpha, &bb, &moved, Some(&base.partition), &opts.comonotone)?;
            let value = sol.value.to_f64_lossy();
            let observed = (value - base_value).abs();
            let bound = lipschitz_bound(k, m, &wp, opts.p)?;
            let ratio = if bound.proof_form > 0.0 {
                observed / bound.proof_form
            } else if observed == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            Ok(TrialRecord {
                trial,
                wp,
                value,
                observed,
                bound: bound.proof_form,
                statement_bound: bound.statement_form,
                ratio,
                satisfied: observed <= bound.proof_form + BOUND_SLACK,
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let worst = trial_log
        .iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio).then(b.trial.cmp(&a.trial)));
    let (bound, observed, statement_bound, worst_ratio, wp) = match worst {
        Some(t) => (t.bound, t.observed, t.statement_bound, t.ratio, t.wp.clone()),
        None => (0.0, 0.0, 0.0, 0.0, vec![0.0; marginals.len()]),
    };
    Ok(StabilityReport {
        bound,
        observed,
        statement_bound,
        satisfied: trial_log.iter().all(|t| t.satisfied),
        worst_ratio,
        base_value,
        inputs: StabilityInputs {
            k,
            k_estimated,
            m,
            p: opts.p,
            wp,
        },
        trial_log,
    })
}

/// One member of an approximating sequence.
#[derive(Debug, Clone)]
pub struct ProbeLevel<T> {
    pub n: usize,
    pub alpha: SpectralFunction<T>,
    pub payout: Payout,
    pub marginals: Vec<Marginal<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub limit: f64,
    pub rows: Vec<ConvergenceRow>,
    /// The last error is below the first, or every error is negligible.
    pub trend_decreasing: bool,
}

/// Solves every level and tabulates `|value_n − limit|`.
pub fn weak_stability_probe<T: Scalar>(
    levels: &[ProbeLevel<T>],
    limit: T,
    opts: &ComonotoneOptions,
) -> Result<ConvergenceTable> {
    let limit = limit.to_f64_lossy();
    let rows = levels
        .iter()
        .map(|lv| {
            let sol = solve_compatible(&lv.alpha, &lv.payout, &lv.marginals, None, opts)?;
            let value = sol.value.to_f64_lossy();
            Ok(ConvergenceRow {
                n: lv.n,
                value,
                error: (value - limit).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let negligible = 1e-12 * (1.0 + limit.abs());
    let trend_decreasing = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) => l.error < f.error || rows.iter().all(|r| r.error <= negligible),
        _ => true,
    };
    Ok(ConvergenceTable {
        limit,
        rows,
        trend_decreasing,
    })
}

/// Levels `n = 2^k`, `k = 1..=max_k`: marginals discretized to `n` atoms and,
/// when `g` is given, the payout replaced by `b + g/n`.
pub fn refinement_levels<T: Scalar>(
    alpha: &SpectralFunction<T>,
    b: &Payout,
    g: Option<&Payout>,
    marginals: &[Marginal<T>],
    max_k: u32,
) -> Result<Vec<ProbeLevel<T>>> {
    (1..=max_k)
        .map(|k| {
            let n = 1usize << k;
            let payout = match g {
                None => b.clone(),
                Some(g) => {
                    let expr = Expr::Binary(
                        BinOp::Add,
                        Box::new(b.expr().clone()),
                        Box::new(Expr::Binary(
                            BinOp::Mul,
                            Box::new(Expr::Const(1.0 / n as f64)),
                            Box::new(g.expr().clone()),
                        )),
                    );
                    Payout::from_expr(expr, b.names().to_vec(), b.domain().to_vec())?
                }
            };
            let marginals = marginals
                .iter()
                .map(|m| m.discretize(n).map(Marginal::Discrete))
                .collect::<Result<Vec<_>>>()?;
            Ok(ProbeLevel {
                n,
                alpha: alpha.clone(),
                payout,
                marginals,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniforms(d: usize) -> Vec<Marginal<f64>> {
        (0..d)
            .map(|i| Marginal::uniform(i as f64, i as f64 + 1.0 + 0.5 * i as f64).unwrap())
            .collect()
    }

    fn sum_payout(marg: &[Marginal<f64>]) -> Payout {
        let d = marg.len();
        let expr = (1..=d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(" + ");
        Payout::parse(&expr, marg.iter().map(|m| m.support()).collect()).unwrap()
    }

    #[test]
    fn bound_examples() {
        assert_eq!(lipschitz_bound(2.0, 3.0, &[0.0, 0.0], 2.0).unwrap().proof_form, 0.0);
        let one = lipschitz_bound(2.0, 3.0, &[0.5], 2.0).unwrap();
        assert!((one.proof_form - 3.0).abs() < 1e-15);
        assert!((one.statement_form - 6.0 * 0.5f64.sqrt()).abs() < 1e-14);
        let two = lipschitz_bound(1.0, 1.0, &[0.1, 0.1], 1.0).unwrap();
        assert!((two.proof_form - 0.2).abs() < 1e-15);
        let p2 = lipschitz_bound(1.0, 1.0, &[0.1, 0.1], 2.0).unwrap();
        assert!(p2.proof_form < p2.statement_form);
        assert!(lipschitz_bound(1.0, 1.0, &[0.1], 0.5).is_err());
    }

    #[test]
    fn lipschitz_estimate_of_linear_payouts() {
        let b = Payout::parse("2*x1 - x2", vec![(0.0, 1.0); 2]).unwrap();
        assert!((estimate_lipschitz(&b, 1.0, 4).unwrap() - 2.0).abs() < 1e-8);
        assert!((estimate_lipschitz(&b, 2.0, 4).unwrap() - 5f64.sqrt()).abs() < 1e-8);
        assert!((estimate_lipschitz(&b, f64::INFINITY, 4).unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn shift_is_tight_for_the_sum() {
        let marg = uniforms(3);
        let b = sum_payout(&marg);
        let alpha = SpectralFunction::<f64>::constant(1.0).unwrap();
        let opts = ExperimentOptions {
            trials: 2,
            k_override: Some(1.0),
            ..Default::default()
        };
        let r = perturbation_experiment(&alpha, &b, &marg, Perturbation::Shift { delta: 0.1 }, &opts)
            .unwrap();
        assert!(r.satisfied);
        assert!((r.observed - 0.3).abs() < 1e-9);
        assert!((r.worst_ratio - 1.0).abs() < 1e-9);

        let r = perturbation_experiment(&alpha, &b, &marg, Perturbation::Shift { delta: 0.0 }, &opts)
            .unwrap();
        assert_eq!(r.observed, 0.0);
        assert_eq!(r.bound, 0.0);
    }

    #[test]
    fn jitter_trials_respect_the_bound_and_are_reproducible() {
        let marg = uniforms(3);
        let b = sum_payout(&marg);
        let alpha = SpectralFunction::<f64>::expected_shortfall(0.2).unwrap();
        let opts = ExperimentOptions {
            trials: 12,
            seed: 7,
            ..Default::default()
        };
        let kind = Perturbation::Jitter { sigma: 0.05, atoms: 32 };
        let r = perturbation_experiment(&alpha, &b, &marg, kind, &opts).unwrap();
        assert!(r.satisfied);
        assert!(r.inputs.k_estimated);
        let again = perturbation_experiment(&alpha, &b, &marg, kind, &opts).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn refinement_converges() {
        let marg = uniforms(2);
        let b = Payout::parse("x1*x2", marg.iter().map(|m| m.support()).collect()).unwrap();
        let g = Payout::parse("x1", b.domain().to_vec()).unwrap();
        let alpha = SpectralFunction::<f64>::expected_shortfall(0.3).unwrap();
        let limit = solve_compatible(&alpha, &b, &marg, None, &Default::default())
            .unwrap()
            .value;
        let levels = refinement_levels(&alpha, &b, Some(&g), &marg, 6).unwrap();
        let t = weak_stability_probe(&levels, limit, &Default::default()).unwrap();
        assert!(t.trend_decreasing);
        assert!(t.rows.last().unwrap().error < 0.05);

        let same: Vec<ProbeLevel<f64>> = (0..3)
            .map(|_| ProbeLevel {
                n: 1,
                alpha: alpha.clone(),
                payout: b.clone(),
                marginals: marg.clone(),
            })
            .collect();
        let t = weak_stability_probe(&same, limit, &Default::default()).unwrap();
        assert!(t.rows.iter().all(|r| r.value == t.rows[0].value));
        assert!(t.trend_decreasing);
    }

    #[test]
    fn expected_shortfall_levels_converge() {
        let marg = uniforms(2);
        let b = sum_payout(&marg);
        let limit_alpha = SpectralFunction::<f64>::expected_shortfall(0.2).unwrap();
        let limit = solve_compatible(&limit_alpha, &b, &marg, None, &Default::default())
            .unwrap()
            .value;
        let levels: Vec<ProbeLevel<f64>> = (1..=5)
            .map(|k| {
                let n = 1usize << (k + 1);
                ProbeLevel {
                    n,
                    alpha: SpectralFunction::expected_shortfall(0.2 + 1.0 / n as f64).unwrap(),
                    payout: b.clone(),
                    marginals: marg.clone(),
                }
            })
            .collect();
        let t = weak_stability_probe(&levels, limit, &Default::default()).unwrap();
        assert!(t.trend_decreasing);
        assert!(t.rows.windows(2).all(|w| w[1].error < w[0].error));
    }
}
