//! Discrete multi-marginal optimal transport.
//!
//! [`solve_mmot_lp`] is the exact oracle: a dense simplex over the transport
//! polytope of the product of atoms. [`entropic::solve_mmot_entropic`] is a
//! regularized approximation for diagnostics.

pub mod entropic;
mod simplex;

pub use entropic::{solve_mmot_entropic, EntropicOptions};

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::marginals::DiscreteMarginal;
use crate::payout::Payout;
use crate::scalar::{pairwise_sum, Scalar};
use crate::spectral::{spectral_measure, SpectralFunction, SpectralMeasure};
use simplex::{LinearProgram, Row, RowKind, SimplexStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub max_pivots: usize,
    pub pivot_tol: f64,
    /// Largest number of support tuples (LP variables) accepted.
    pub size_guard: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_pivots: 1_000_000,
            pivot_tol: 1e-11,
            size_guard: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    IterationLimit,
    Infeasible,
}

impl LpStatus {
    pub fn label(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::IterationLimit => "iteration-limit",
            LpStatus::Infeasible => "infeasible",
        }
    }
}

/// A discrete joint measure: weighted index tuples into each axis' atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<T> {
    weights: Vec<Vec<T>>,
    locations: Option<Vec<Vec<T>>>,
    support: Vec<(Vec<usize>, T)>,
}

impl<T: Scalar> Coupling<T> {
    /// A coupling of index-only marginals (atom weights per axis).
    pub fn new(weights: Vec<Vec<T>>, support: Vec<(Vec<usize>, T)>) -> Result<Self> {
        for (tuple, w) in &support {
            if tuple.len() != weights.len() {
                return Err(Error::invalid("support tuple has the wrong arity"));
            }
            if tuple.iter().zip(&weights).any(|(&i, ws)| i >= ws.len()) {
                return Err(Error::invalid("support index out of range"));
            }
            if !(*w >= T::zero()) {
                return Err(Error::invalid("coupling weights must be nonnegative"));
            }
        }
        Ok(Self {
            weights,
            locations: None,
            support,
        })
    }

    /// A coupling of one-dimensional discrete marginals.
    pub fn on_marginals(
        marginals: &[DiscreteMarginal<T>],
        support: Vec<(Vec<usize>, T)>,
    ) -> Result<Self> {
        let mut c = Self::new(
            marginals.iter().map(|m| m.weights().to_vec()).collect(),
            support,
        )?;
        c.locations = Some(marginals.iter().map(|m| m.locations().to_vec()).collect());
        Ok(c)
    }

    /// The independent coupling.
    pub fn product(marginals: &[DiscreteMarginal<T>]) -> Result<Self> {
        let sizes: Vec<usize> = marginals.iter().map(|m| m.len()).collect();
        let support = TupleIter::new(&sizes)
            .map(|t| {
                let w = t
                    .iter()
                    .zip(marginals)
                    .fold(T::one(), |acc, (&i, m)| acc * m.weights()[i]);
                (t, w)
            })
            .collect();
        Self::on_marginals(marginals, support)
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    pub fn support(&self) -> &[(Vec<usize>, T)] {
        &self.support
    }

    pub fn axis_weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    pub fn locations(&self) -> Option<&[Vec<T>]> {
        self.locations.as_deref()
    }

    /// Location vector of a support tuple (1D marginals only).
    pub fn point(&self, tuple: &[usize]) -> Option<Vec<T>> {
        self.locations
            .as_ref()
            .map(|locs| tuple.iter().zip(locs).map(|(&i, l)| l[i]).collect())
    }

    pub fn total_mass(&self) -> T {
        let w: Vec<T> = self.support.iter().map(|s| s.1).collect();
        pairwise_sum(&w)
    }

    /// Mass the coupling puts on each atom of `axis`.
    pub fn projection(&self, axis: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.weights[axis].len()];
        for (t, w) in &self.support {
            out[t[axis]] += *w;
        }
        out
    }

    /// Per-axis `max_a |γ_axis(a) − μ_axis(a)|`.
    pub fn marginal_residuals(&self) -> Vec<T> {
        (0..self.arity())
            .map(|k| {
                self.projection(k)
                    .iter()
                    .zip(&self.weights[k])
                    .fold(T::zero(), |m, (&p, &w)| m.max((p - w).abs()))
            })
            .collect()
    }

    /// Per-axis `max_a (γ_axis(a) − μ_axis(a))₊`; zero when dominated.
    pub fn dominance_excess(&self) -> Vec<T> {
        (0..self.arity())
            .map(|k| {
                self.projection(k)
                    .iter()
                    .zip(&self.weights[k])
                    .fold(T::zero(), |m, (&p, &w)| m.max(p - w))
            })
            .collect()
    }

    /// `∫ s dγ` over the support.
    pub fn integrate<F>(&self, s: F) -> Result<T>
    where
        F: Fn(&[usize]) -> Result<T>,
    {
        let terms = self
            .support
            .iter()
            .map(|(t, w)| s(t).map(|v| v * *w))
            .collect::<Result<Vec<_>>>()?;
        Ok(pairwise_sum(&terms))
    }

    /// Reorders axes: new axis `k` is old axis `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            weights: order.iter().map(|&k| self.weights[k].clone()).collect(),
            locations: self
                .locations
                .as_ref()
                .map(|l| order.iter().map(|&k| l[k].clone()).collect()),
            support: self
                .support
                .iter()
                .map(|(t, w)| (order.iter().map(|&k| t[k]).collect(), *w))
                .collect(),
        }
    }

    /// One CSV row per support tuple: atom indices, locations (if known), weight.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let d = self.arity();
        let mut header: Vec<String> = (0..d).map(|k| format!("i{k}")).collect();
        if self.locations.is_some() {
            header.extend((0..d).map(|k| format!("x{k}")));
        }
        header.push("weight".into());
        w.write_record(&header)?;
        for (t, wt) in &self.support {
            let mut rec: Vec<String> = t.iter().map(|i| i.to_string()).collect();
            if let Some(p) = self.point(t) {
                rec.extend(p.iter().map(|v| v.to_f64_lossy().to_string()));
            }
            rec.push(wt.to_f64_lossy().to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Row-major enumeration of index tuples (last axis fastest).
pub(crate) struct TupleIter {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl TupleIter {
    pub(crate) fn new(sizes: &[usize]) -> Self {
        let next = (!sizes.is_empty() && sizes.iter().all(|&n| n > 0)).then(|| vec![0; sizes.len()]);
        Self {
            sizes: sizes.to_vec(),
            next,
        }
    }
}

impl Iterator for TupleIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut nxt = cur.clone();
        for k in (0..nxt.len()).rev() {
            nxt[k] += 1;
            if nxt[k] < self.sizes[k] {
                self.next = Some(nxt);
                break;
            }
            nxt[k] = 0;
        }
        Some(cur)
    }
}

pub(crate) fn tuple_count(sizes: &[usize], limit: usize) -> Result<usize> {
    let mut n: usize = 1;
    for &s in sizes {
        n = n.checked_mul(s).ok_or(Error::SizeGuard {
            size: usize::MAX,
            limit,
        })?;
    }
    if n > limit {
        return Err(Error::SizeGuard { size: n, limit });
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    /// Optimal value (or the value of the last feasible vertex on iteration limit).
    pub value: T,
    pub plan: Coupling<T>,
    pub status: LpStatus,
    /// `u_k(a)` per axis and atom, with `Σ_k u_k(x_k) ≥ s(x)` everywhere.
    pub dual_potentials: Option<Vec<Vec<T>>>,
    pub pivots: usize,
}

impl<T: Scalar> LpSolution<T> {
    pub fn require_optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::IterationLimit => Err(Error::IterationLimit {
                iterations: self.pivots,
            }),
            LpStatus::Infeasible => Err(Error::Infeasible),
        }
    }

    /// `Σ_k Σ_a u_k(a) μ_k(a)`.
    pub fn dual_value(&self) -> Option<T> {
        self.dual_potentials.as_ref().map(|u| {
            let terms: Vec<T> = u
                .iter()
                .zip(self.plan.axis_weights())
                .flat_map(|(uk, wk)| uk.iter().zip(wk).map(|(&a, &b)| a * b))
                .collect();
            pairwise_sum(&terms)
        })
    }
}

/// Maximizes `∫ s dπ` over couplings of the given one-dimensional marginals.
/// The surplus receives the atom locations of a tuple.
pub fn solve_mmot_lp<T, F>(
    marginals: &[DiscreteMarginal<T>],
    surplus: F,
    opts: &LpOptions,
) -> Result<LpSolution<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<T> + Sync,
{
    let weights: Vec<Vec<T>> = marginals.iter().map(|m| m.weights().to_vec()).collect();
    let locs: Vec<&[T]> = marginals.iter().map(|m| m.locations()).collect();
    let mut sol = solve_mmot_lp_indexed(
        &weights,
        |t: &[usize]| {
            let x: Vec<T> = t.iter().zip(&locs).map(|(&i, l)| l[i]).collect();
            surplus(&x)
        },
        opts,
    )?;
    sol.plan.locations = Some(marginals.iter().map(|m| m.locations().to_vec()).collect());
    Ok(sol)
}

/// [`solve_mmot_lp`] for marginals known only by their atom weights; the
/// surplus receives index tuples.
pub fn solve_mmot_lp_indexed<T, F>(
    weights: &[Vec<T>],
    surplus: F,
    opts: &LpOptions,
) -> Result<LpSolution<T>>
where
    T: Scalar,
    F: Fn(&[usize]) -> Result<T> + Sync,
{
    if weights.is_empty() {
        return Err(Error::invalid("transport needs at least one marginal"));
    }
    for (k, w) in weights.iter().enumerate() {
        if w.is_empty() || w.iter().any(|&v| !(v > T::zero())) {
            return Err(Error::invalid(format!(
                "marginal {k} must have positive atom weights"
            )));
        }
    }
    let sizes: Vec<usize> = weights.iter().map(Vec::len).collect();
    let n_vars = tuple_count(&sizes, opts.size_guard)?;
    let tuples: Vec<Vec<usize>> = TupleIter::new(&sizes).collect();
    let objective: Vec<T> = tuples
        .par_iter()
        .map(|t| {
            let v = surplus(t)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("surplus at atom tuple {t:?}")))
            }
        })
        .collect::<Vec<Result<T>>>()
        .into_iter()
        .collect::<Result<_>>()?;

    // one equality per atom; the last atom of every axis after the first is
    // implied by total mass and dropped
    let mut rows = Vec::new();
    let mut row_of: Vec<Vec<Option<usize>>> = Vec::with_capacity(sizes.len());
    for (k, w) in weights.iter().enumerate() {
        let mut map = Vec::with_capacity(w.len());
        for (a, &wa) in w.iter().enumerate() {
            if k > 0 && a + 1 == w.len() {
                map.push(None);
                continue;
            }
            map.push(Some(rows.len()));
            rows.push(Row {
                coefs: Vec::new(),
                kind: RowKind::Eq,
                rhs: wa,
            });
        }
        row_of.push(map);
    }
    for (j, t) in tuples.iter().enumerate() {
        for (k, &a) in t.iter().enumerate() {
            if let Some(r) = row_of[k][a] {
                rows[r].coefs.push((j, T::one()));
            }
        }
    }
    let lp = LinearProgram {
        n_vars,
        objective: objective.clone(),
        rows,
    };
    let out = simplex::solve(&lp, opts.max_pivots, T::tol(opts.pivot_tol));

    let status = match out.status {
        SimplexStatus::Optimal => LpStatus::Optimal,
        SimplexStatus::IterationLimit => LpStatus::IterationLimit,
        SimplexStatus::Infeasible => LpStatus::Infeasible,
    };
    let support: Vec<(Vec<usize>, T)> = out
        .x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > T::zero())
        .map(|(j, &v)| (tuples[j].clone(), v))
        .collect();
    let value = if support.is_empty() {
        T::nan()
    } else {
        let terms: Vec<T> = out
            .x
            .iter()
            .zip(&objective)
            .filter(|(&v, _)| v > T::zero())
            .map(|(&v, &c)| v * c)
            .collect();
        pairwise_sum(&terms)
    };
    let plan = Coupling::new(weights.to_vec(), support)?;

    let dual_potentials = (status == LpStatus::Optimal).then(|| {
        row_of
            .iter()
            .map(|m| {
                m.iter()
                    .map(|r| r.map_or(T::zero(), |r| out.duals[r]))
                    .collect()
            })
            .collect()
    });
    if status == LpStatus::Optimal {
        let worst = plan
            .marginal_residuals()
            .into_iter()
            .fold(T::zero(), T::max);
        if worst > T::tol(1e-10) {
            return Err(Error::Numerical(format!(
                "LP plan misses its marginals by {}",
                worst.to_f64_lossy()
            )));
        }
    }
    Ok(LpSolution {
        value,
        plan,
        status,
        dual_potentials,
        pivots: out.pivots,
    })
}

/// The lifted surplus `s(x0, x) = x0·b(x)` with its extra marginal `μ0 = α_#Leb`.
#[derive(Debug, Clone)]
pub struct LiftedSurplus<T> {
    pub mu0: SpectralMeasure<T>,
    pub payout: Payout,
}

impl<T: Scalar> LiftedSurplus<T> {
    /// `x = (x0, x1, …, xd)`.
    pub fn eval(&self, x: &[T]) -> Result<T> {
        Ok(x[0] * self.payout.eval(&x[1..])?)
    }
}

pub fn lift_surplus<T: Scalar>(
    alpha: &SpectralFunction<T>,
    b: &Payout,
    quantization_n: usize,
) -> Result<LiftedSurplus<T>> {
    Ok(LiftedSurplus {
        mu0: spectral_measure(alpha, quantization_n)?,
        payout: b.clone(),
    })
}

/// Solves the lifted problem on marginals `(μ0, μ1, …, μd)`; axis 0 of the plan is `x0`.
pub fn solve_lifted<T: Scalar>(
    lifted: &LiftedSurplus<T>,
    marginals: &[DiscreteMarginal<T>],
    opts: &LpOptions,
) -> Result<LpSolution<T>> {
    if marginals.len() != lifted.payout.arity() {
        return Err(Error::invalid(format!(
            "payout has {} variables but {} marginals were given",
            lifted.payout.arity(),
            marginals.len()
        )));
    }
    let mut all = Vec::with_capacity(marginals.len() + 1);
    all.push(lifted.mu0.measure.clone());
    all.extend(marginals.iter().cloned());
    solve_mmot_lp(&all, |x: &[T]| lifted.eval(x), opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneSupport<T> {
    pub monotone: bool,
    /// `(x0, b(x))` per support point, in plan order.
    pub pairs: Vec<(T, T)>,
    /// Index pairs into `pairs` that are ordered in opposite directions.
    pub violations: Vec<(usize, usize)>,
}

/// Checks that `(x0, b(x))` is monotone over the support of a lifted plan.
pub fn monotone_support_check<T: Scalar>(plan: &Coupling<T>, b: &Payout) -> Result<MonotoneSupport<T>> {
    if plan.arity() != b.arity() + 1 {
        return Err(Error::invalid("plan must carry the x0 axis plus one axis per variable"));
    }
    let weight_floor = T::tol(1e-12);
    let mut pairs = Vec::new();
    for (t, w) in plan.support() {
        if *w <= weight_floor {
            continue;
        }
        let x = plan
            .point(t)
            .ok_or_else(|| Error::invalid("plan has no atom locations"))?;
        pairs.push((x[0], b.eval(&x[1..])?));
    }
    let (mu, mv) = pairs
        .iter()
        .fold((T::zero(), T::zero()), |(a, b), &(u, v)| (a.max(u.abs()), b.max(v.abs())));
    let tol = T::tol(1e-9) * (T::one() + mu) * (T::one() + mv);
    let mut violations = Vec::new();
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (u0, v0) = pairs[i];
            let (u1, v1) = pairs[j];
            if (u1 - u0) * (v1 - v0) < -tol {
                violations.push((i, j));
            }
        }
    }
    Ok(MonotoneSupport {
        monotone: violations.is_empty(),
        pairs,
        violations,
    })
}

/// `max (1/m0) ∫ b dγ` over sub-couplings of mass `m0` dominated by the marginals.
pub fn partial_transport_value<T: Scalar>(
    m0: T,
    b: &Payout,
    marginals: &[DiscreteMarginal<T>],
    opts: &LpOptions,
) -> Result<LpSolution<T>> {
    if !(m0 > T::zero() && m0 <= T::one()) {
        return Err(Error::invalid(format!("mass level must lie in (0, 1], got {m0}")));
    }
    if marginals.len() != b.arity() {
        return Err(Error::invalid("one marginal per payout variable is required"));
    }
    let sizes: Vec<usize> = marginals.iter().map(|m| m.len()).collect();
    let n_vars = tuple_count(&sizes, opts.size_guard)?;
    let tuples: Vec<Vec<usize>> = TupleIter::new(&sizes).collect();
    let values: Vec<T> = tuples
        .par_iter()
        .map(|t| {
            let x: Vec<T> = t.iter().zip(marginals).map(|(&i, m)| m.locations()[i]).collect();
            b.eval(&x)
        })
        .collect::<Vec<Result<T>>>()
        .into_iter()
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut offset = Vec::with_capacity(marginals.len());
    for m in marginals {
        offset.push(rows.len());
        for &w in m.weights() {
            rows.push(Row {
                coefs: Vec::new(),
                kind: RowKind::Le,
                rhs: w,
            });
        }
    }
    rows.push(Row {
        coefs: (0..n_vars).map(|j| (j, T::one())).collect(),
        kind: RowKind::Eq,
        rhs: m0,
    });
    for (j, t) in tuples.iter().enumerate() {
        for (k, &a) in t.iter().enumerate() {
            rows[offset[k] + a].coefs.push((j, T::one()));
        }
    }
    let objective: Vec<T> = values.iter().map(|&v| v / m0).collect();
    let lp = LinearProgram {
        n_vars,
        objective: objective.clone(),
        rows,
    };
    let out = simplex::solve(&lp, opts.max_pivots, T::tol(opts.pivot_tol));
    let status = match out.status {
        SimplexStatus::Optimal => LpStatus::Optimal,
        SimplexStatus::IterationLimit => LpStatus::IterationLimit,
        SimplexStatus::Infeasible => LpStatus::Infeasible,
    };
    let support: Vec<(Vec<usize>, T)> = out
        .x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > T::zero())
        .map(|(j, &v)| (tuples[j].clone(), v))
        .collect();
    let terms: Vec<T> = out
        .x
        .iter()
        .zip(&objective)
        .filter(|(&v, _)| v > T::zero())
        .map(|(&v, &c)| v * c)
        .collect();
    let value = if support.is_empty() {
        T::nan()
    } else {
        pairwise_sum(&terms)
    };
    let plan = Coupling::on_marginals(marginals, support)?;
    if status == LpStatus::Optimal {
        let excess = plan.dominance_excess().into_iter().fold(T::zero(), T::max);
        let mass_gap = (plan.total_mass() - m0).abs();
        if excess > T::tol(1e-10) || mass_gap > T::tol(1e-10) {
            return Err(Error::Numerical(format!(
                "partial plan violates its constraints (excess {}, mass gap {})",
                excess.to_f64_lossy(),
                mass_gap.to_f64_lossy()
            )));
        }
    }
    Ok(LpSolution {
        value,
        plan,
        status,
        dual_potentials: None,
        pivots: out.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(atoms: &[(f64, f64)]) -> DiscreteMarginal<f64> {
        DiscreteMarginal::new(atoms.iter().copied()).unwrap()
    }

    #[test]
    fn diracs_give_a_single_point() {
        let sol = solve_mmot_lp(
            &[DiscreteMarginal::<f64>::dirac(2.0), DiscreteMarginal::<f64>::dirac(-3.0)],
            |x: &[f64]| Ok(x[0] * x[0] + x[1]),
            &LpOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn birkhoff_two_by_two() {
        let mu0 = dm(&[(0.0, 0.5), (2.0, 0.5)]);
        let mu1 = dm(&[(0.0, 0.5), (1.0, 0.5)]);
        let sol = solve_mmot_lp(&[mu0, mu1], |x: &[f64]| Ok(x[0] * x[1]), &LpOptions::default())
            .unwrap();
        assert!((sol.value - 1.0).abs() < 1e-14);
        let mut sup: Vec<Vec<usize>> = sol.plan.support().iter().map(|s| s.0.clone()).collect();
        sup.sort();
        assert_eq!(sup, vec![vec![0, 0], vec![1, 1]]);
        let dual = sol.dual_value().unwrap();
        assert!((dual - sol.value).abs() < 1e-12);
    }

    #[test]
    fn vertex_support_bound_and_duals() {
        let a = dm(&[(0.0, 0.2), (1.0, 0.3), (2.5, 0.5)]);
        let b = dm(&[(-1.0, 0.1), (0.5, 0.6), (3.0, 0.3)]);
        let c = dm(&[(0.0, 0.25), (1.0, 0.25), (2.0, 0.5)]);
        let s = |x: &[f64]| Ok((x[0] + x[1] - x[2]).abs() + x[0] * x[2]);
        let marg = [a, b, c];
        let sol = solve_mmot_lp(&marg, s, &LpOptions::default()).unwrap();
        assert!(sol.plan.support().len() <= 3 + 3 + 3 - 3 + 1);
        let u = sol.dual_potentials.as_ref().unwrap();
        for t in TupleIter::new(&[3, 3, 3]) {
            let x: Vec<f64> = t.iter().zip(&marg).map(|(&i, m)| m.locations()[i]).collect();
            let lhs: f64 = t.iter().enumerate().map(|(k, &i)| u[k][i]).sum();
            assert!(lhs >= s(&x).unwrap() - 1e-9);
        }
        assert!((sol.dual_value().unwrap() - sol.value).abs() < 1e-9);
    }

    #[test]
    fn size_guard_is_enforced() {
        let m = Coupling::<f64>::product(&[DiscreteMarginal::<f64>::dirac(0.0)]).unwrap();
        assert_eq!(m.support().len(), 1);
        let big = DiscreteMarginal::new((0..100).map(|i| (i as f64, 0.01))).unwrap();
        let r = solve_mmot_lp(
            &[big.clone(), big.clone(), big],
            |_x: &[f64]| Ok(0.0),
            &LpOptions::default(),
        );
        assert!(matches!(r, Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn residuals_detect_perturbations() {
        let a = dm(&[(0.0, 0.5), (1.0, 0.5)]);
        let prod = Coupling::product(&[a.clone(), a.clone()]).unwrap();
        assert!(prod.marginal_residuals().iter().all(|&r| r < 1e-15));
        let mut sup = prod.support().to_vec();
        sup[0].1 += 1e-3;
        let bad = Coupling::on_marginals(&[a.clone(), a], sup).unwrap();
        assert!(bad.marginal_residuals().iter().any(|&r| r >= 1e-3 - 1e-15));
    }

    #[test]
    fn monotone_support_examples() {
        let b = Payout::parse("x1", vec![(0.0, 1.0)]).unwrap();
        let mu0 = dm(&[(0.0, 0.5), (2.0, 0.5)]);
        let mu1 = dm(&[(0.0, 0.5), (1.0, 0.5)]);
        let marg = [mu0, mu1];
        let como = Coupling::on_marginals(&marg, vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)]).unwrap();
        assert!(monotone_support_check(&como, &b).unwrap().monotone);
        let anti = Coupling::on_marginals(&marg, vec![(vec![0, 1], 0.5), (vec![1, 0], 0.5)]).unwrap();
        let r = monotone_support_check(&anti, &b).unwrap();
        assert!(!r.monotone);
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn partial_transport_examples() {
        let b = Payout::parse("x1", vec![(0.0, 1.0)]).unwrap();
        let mu = dm(&[(0.0, 0.5), (1.0, 0.5)]);
        let sol = partial_transport_value(0.5, &b, std::slice::from_ref(&mu), &LpOptions::default())
            .unwrap();
        assert!((sol.value - 1.0).abs() < 1e-14);

        let b2 = Payout::parse("x1*x2 - x1", vec![(0.0, 2.0); 2]).unwrap();
        let nu = dm(&[(0.0, 0.3), (1.5, 0.3), (2.0, 0.4)]);
        let full = partial_transport_value(1.0, &b2, &[mu.clone(), nu.clone()], &LpOptions::default())
            .unwrap();
        let lp = solve_mmot_lp(&[mu, nu], |x: &[f64]| b2.eval(x), &LpOptions::default()).unwrap();
        assert!((full.value - lp.value).abs() < 1e-12);
    }

    #[test]
    fn lifted_measure_for_expected_shortfall() {
        let alpha = SpectralFunction::expected_shortfall(0.25).unwrap();
        let b = Payout::parse("x1", vec![(0.0, 5.0)]).unwrap();
        let lifted = lift_surplus(&alpha, &b, 1).unwrap();
        let atoms: Vec<(f64, f64)> = lifted.mu0.measure.atoms().collect();
        assert_eq!(atoms, vec![(0.0, 0.75), (4.0, 0.25)]);
        assert_eq!(lifted.eval(&[2.0, 3.0]).unwrap(), 6.0);
        let one = SpectralFunction::<f64>::constant(1.0).unwrap();
        let lifted = lift_surplus(&one, &b, 1).unwrap();
        assert_eq!(lifted.mu0.measure.atoms().collect::<Vec<_>>(), vec![(1.0, 1.0)]);
    }
}
