//! Maximal-correlation risk of vector-valued payouts.
//!
//! `ℛ_ν(η) = max ∫ z·y dπ` over couplings of a baseline `ν` and the law `η`
//! of `b(X) ∈ ℝⁿ`. When `ν` is the law of a monotone curve `f(U)`, the
//! worst coupling of the inputs is comonotone and the value reduces to a
//! one-dimensional integral.

use rayon::prelude::*;

use crate::comonotone::{build_g, integrate_levels, ComonotoneOptions, QuantileMap};
use crate::error::{Error, Result};
use crate::marginals::{DiscreteMarginal, Marginal};
use crate::mmot::{solve_mmot_lp_indexed, LpOptions, LpSolution};
use crate::payout::{gradient_at, mixed_partial_signs, probe_grid, Partition, Payout, Sign, SignStructure};
use crate::scalar::{merge_breakpoints, Scalar};
use crate::spectral::SpectralFunction;

/// Components `b_1, …, b_n` over one set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPayout {
    components: Vec<Payout>,
}

impl VectorPayout {
    pub fn new(components: Vec<Payout>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("a vector payout needs at least one component"))?;
        for (j, c) in components.iter().enumerate().skip(1) {
            if c.domain() != first.domain() || c.names() != first.names() {
                return Err(Error::invalid(format!(
                    "component {} does not share the variables and domain of component 1",
                    j + 1
                )));
            }
        }
        Ok(Self { components })
    }

    pub fn parse(exprs: &[&str], domain: Vec<(f64, f64)>) -> Result<Self> {
        exprs
            .iter()
            .map(|e| Payout::parse(e, domain.clone()))
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }

    pub fn components(&self) -> &[Payout] {
        &self.components
    }

    /// Output dimension `n`.
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Number of input variables `d`.
    pub fn arity(&self) -> usize {
        self.components[0].arity()
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        self.components[0].domain()
    }

    pub fn eval<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }
}

/// Finitely many weighted points in `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    points: Vec<Vec<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(points: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::invalid(format!(
                "point cloud has {} points and {} weights",
                points.len(),
                weights.len()
            )));
        }
        let n = points[0].len();
        if n == 0 || points.iter().any(|p| p.len() != n) {
            return Err(Error::invalid("cloud points must share a positive dimension"));
        }
        if points.iter().flatten().chain(&weights).any(|v: &T| !v.is_finite()) {
            return Err(Error::NonFinite("point cloud entry".into()));
        }
        if weights.iter().any(|&w| w < T::zero()) {
            return Err(Error::invalid("cloud weights must be nonnegative"));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::tol(1e-9) {
            return Err(Error::invalid(format!("cloud weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Vec<T>>) -> Result<Self> {
        let w = T::one() / T::from_usize(points.len().max(1)).expect("usize");
        let weights = vec![w; points.len()];
        Self::new(points, weights)
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn mean(&self) -> Vec<T> {
        (0..self.dim())
            .map(|j| {
                self.points
                    .iter()
                    .zip(&self.weights)
                    .map(|(p, &w)| p[j] * w)
                    .sum()
            })
            .collect()
    }

    /// The cloud of `b(x)` under a discrete coupling given by tuples and weights.
    pub fn from_coupling(
        b: &VectorPayout,
        marginals: &[DiscreteMarginal<T>],
        support: &[(Vec<usize>, T)],
    ) -> Result<Self> {
        let mut points = Vec::with_capacity(support.len());
        let mut weights = Vec::with_capacity(support.len());
        for (t, w) in support {
            let x: Vec<T> = t.iter().zip(marginals).map(|(&i, m)| m.locations()[i]).collect();
            points.push(b.eval(&x)?);
            weights.push(*w);
        }
        Self::new(points, weights)
    }
}

/// `m ↦ (f_1(m), …, f_n(m))` with nondecreasing, nonnegative components.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve<T> {
    components: Vec<SpectralFunction<T>>,
}

impl<T: Scalar> Curve<T> {
    pub fn new(components: Vec<SpectralFunction<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("a curve needs at least one component"));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[SpectralFunction<T>] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, m: T) -> Vec<T> {
        self.components.iter().map(|f| f.eval(m)).collect()
    }

    pub fn breakpoints(&self) -> Vec<T> {
        let bps = self.components.iter().flat_map(|f| f.breakpoints()).collect();
        merge_breakpoints(bps, T::epsilon() * T::lit(4.0))
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.components.iter().all(|f| f.is_piecewise_constant())
    }

    /// Pushforward of Lebesgue measure: exact for piecewise-constant
    /// components, otherwise midpoints of `quantization_n` equal cells.
    pub fn to_point_cloud(&self, quantization_n: usize) -> Result<(PointCloud<T>, bool)> {
        let half = T::lit(0.5);
        if self.is_piecewise_constant() {
            let bps = self.breakpoints();
            let (points, weights) = bps
                .windows(2)
                .filter(|w| w[1] > w[0])
                .map(|w| (self.eval((w[0] + w[1]) * half), w[1] - w[0]))
                .unzip();
            return Ok((PointCloud::new(points, weights)?, true));
        }
        if quantization_n == 0 {
            return Err(Error::invalid("quantization needs n >= 1"));
        }
        let n = T::from_usize(quantization_n).expect("usize");
        let points = (0..quantization_n)
            .map(|k| self.eval((T::from_usize(k).expect("usize") + half) / n))
            .collect();
        Ok((PointCloud::uniform(points)?, false))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineMeasure<T> {
    PointCloud(PointCloud<T>),
    Curve(Curve<T>),
}

impl<T: Scalar> BaselineMeasure<T> {
    pub fn dim(&self) -> usize {
        match self {
            Self::PointCloud(c) => c.dim(),
            Self::Curve(c) => c.dim(),
        }
    }
}

/// Largest ambient dimension accepted for the cloud problem.
const MAX_CLOUD_DIM: usize = 6;

/// `max ∫ z·y dπ` over couplings of two clouds.
pub fn maximal_correlation<T: Scalar>(
    nu: &PointCloud<T>,
    eta: &PointCloud<T>,
    opts: &LpOptions,
) -> Result<LpSolution<T>> {
    if nu.dim() != eta.dim() {
        return Err(Error::invalid(format!(
            "baseline lives in dimension {} but the payout cloud in {}",
            nu.dim(),
            eta.dim()
        )));
    }
    if nu.dim() > MAX_CLOUD_DIM {
        return Err(Error::invalid(format!(
            "dimension {} exceeds the supported {MAX_CLOUD_DIM}",
            nu.dim()
        )));
    }
    let weights = vec![nu.weights.clone(), eta.weights.clone()];
    solve_mmot_lp_indexed(
        &weights,
        |t: &[usize]| {
            Ok(nu.points[t[0]]
                .iter()
                .zip(&eta.points[t[1]])
                .map(|(&z, &y)| z * y)
                .sum())
        },
        opts,
    )?
    .require_optimal()
}

/// Value of [`maximal_correlation`].
pub fn maximal_correlation_risk<T: Scalar>(
    nu: &PointCloud<T>,
    eta: &PointCloud<T>,
    opts: &LpOptions,
) -> Result<T> {
    maximal_correlation(nu, eta, opts).map(|s| s.value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSolution<T> {
    /// Every map is on the `+` side.
    pub maps: Vec<QuantileMap<T>>,
    pub value: T,
    pub exact: bool,
    /// Sign structure of each component.
    pub component_signs: Vec<SignStructure>,
}

fn check_component(j: usize, b: &Payout, signs: &SignStructure, needs_monotone: bool) -> Result<()> {
    let d = b.arity();
    for i in 0..d {
        for k in i + 1..d {
            let s = signs.sigma[i][k];
            if s == Sign::Mixed || s.direction() < 0 {
                return Err(Error::HypothesisViolation {
                    variable: format!("component {}: {} and {}", j + 1, b.names()[i], b.names()[k]),
                    reason: format!("mixed partial has sign {s}; supermodularity is required"),
                });
            }
        }
        if needs_monotone && !signs.monotonicity[i].is_nondecreasing() {
            return Err(Error::HypothesisViolation {
                variable: format!("component {}: {}", j + 1, b.names()[i]),
                reason: format!(
                    "component is {} in it; it must be nondecreasing",
                    signs.monotonicity[i].label()
                ),
            });
        }
    }
    Ok(())
}

/// `∫₀¹ Σ_j f_j(m) b_j(F_1⁻¹(m), …, F_d⁻¹(m)) dm` after checking that every
/// component is supermodular and, where `f_j` varies, nondecreasing.
pub fn solve_curve_case<T: Scalar>(
    f: &Curve<T>,
    b: &VectorPayout,
    marginals: &[Marginal<T>],
    opts: &ComonotoneOptions,
) -> Result<CurveSolution<T>> {
    if f.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "curve has {} components but the payout {}",
            f.dim(),
            b.dim()
        )));
    }
    if marginals.len() != b.arity() {
        return Err(Error::invalid(format!(
            "payout has {} variables but {} marginals were given",
            b.arity(),
            marginals.len()
        )));
    }
    let component_signs = b
        .components()
        .iter()
        .map(|c| mixed_partial_signs(c, opts.grid_per_axis))
        .collect::<Result<Vec<_>>>()?;
    for (j, (c, s)) in b.components().iter().zip(&component_signs).enumerate() {
        check_component(j, c, s, !f.components[j].is_constant())?;
    }

    let maps = build_g(marginals, &Partition::all_plus(b.arity()))?;
    let mut bps = f.breakpoints();
    for g in &maps {
        bps.extend(g.breakpoints());
    }
    let exact = maps.iter().all(|g| g.marginal.is_discrete());
    let value = integrate_levels(
        bps,
        exact,
        |m| {
            let x: Vec<T> = maps.iter().map(|g| g.eval(m)).collect();
            let mut acc = T::zero();
            for (fj, bj) in f.components.iter().zip(b.components()) {
                acc += fj.eval(m) * bj.eval(&x)?;
            }
            Ok(acc)
        },
        opts.quadrature,
    )?;
    Ok(CurveSolution {
        maps,
        value,
        exact,
        component_signs,
    })
}

/// Multi-marginal LP with the discretized curve as an extra marginal and
/// surplus `Σ_j y_j b_j(x)`. Exact for piecewise-constant curves.
pub fn curve_lifted_lp<T: Scalar>(
    f: &Curve<T>,
    b: &VectorPayout,
    marginals: &[DiscreteMarginal<T>],
    quantization_n: usize,
    opts: &LpOptions,
) -> Result<LpSolution<T>> {
    if f.dim() != b.dim() || marginals.len() != b.arity() {
        return Err(Error::invalid("curve, payout and marginals do not fit together"));
    }
    let (cloud, _) = f.to_point_cloud(quantization_n)?;
    let mut weights = vec![cloud.weights.clone()];
    weights.extend(marginals.iter().map(|m| m.weights().to_vec()));
    solve_mmot_lp_indexed(
        &weights,
        |t: &[usize]| {
            let x: Vec<T> = t[1..]
                .iter()
                .zip(marginals)
                .map(|(&i, m)| m.locations()[i])
                .collect();
            let y = &cloud.points[t[0]];
            let mut acc = T::zero();
            for (yj, bj) in y.iter().zip(b.components()) {
                acc += *yj * bj.eval(&x)?;
            }
            Ok(acc)
        },
        opts,
    )?
    .require_optimal()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertibilityReport {
    pub points: usize,
    /// Probe points skipped because a stencil crossed a kink.
    pub excluded: usize,
    pub min_abs_det: f64,
    pub scale: f64,
    /// Points with `|det| < 1e-8·scale`.
    pub flagged: Vec<Vec<f64>>,
    pub passing: bool,
}

const SINGULAR_TOL: f64 = 1e-8;

/// Finite-difference Jacobian determinant of a square `b` over the probe grid.
/// The scale is `Π_j max_x ‖∇b_j(x)‖_∞`, so a well-conditioned map is not flagged.
pub fn invertibility_probe(b: &VectorPayout, grid_per_axis: usize) -> Result<InvertibilityReport> {
    let n = b.dim();
    if b.arity() != n {
        return Err(Error::invalid(format!(
            "invertibility needs as many outputs as inputs, got {n} and {}",
            b.arity()
        )));
    }
    let grid = probe_grid(b.domain(), grid_per_axis)?;
    let jacobians = grid
        .points
        .par_iter()
        .map(|x| {
            let rows = b
                .components()
                .iter()
                .map(|c| gradient_at(c, x, &grid.steps).map(|g| g.into_iter().collect::<Option<Vec<_>>>()))
                .collect::<Result<Vec<_>>>()?;
            Ok(rows.into_iter().collect::<Option<Vec<Vec<f64>>>>())
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut row_max = vec![0.0f64; n];
    for jac in jacobians.iter().flatten() {
        for (j, row) in jac.iter().enumerate() {
            row_max[j] = row.iter().fold(row_max[j], |a, v| a.max(v.abs()));
        }
    }
    let scale = row_max.iter().map(|&r| if r > 0.0 { r } else { 1.0 }).product::<f64>();

    let mut min_abs_det = f64::INFINITY;
    let mut flagged = Vec::new();
    let mut excluded = 0;
    for (x, jac) in grid.points.iter().zip(jacobians) {
        let Some(jac) = jac else {
            excluded += 1;
            continue;
        };
        let (det, _) = crate::linalg::det_solve(jac, None);
        min_abs_det = min_abs_det.min(det.abs());
        if det.abs() < SINGULAR_TOL * scale {
            flagged.push(x.clone());
        }
    }
    Ok(InvertibilityReport {
        points: grid.points.len(),
        excluded,
        min_abs_det,
        scale,
        passing: flagged.is_empty() && excluded < grid.points.len(),
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comonotone::solve_compatible;
    use crate::spectral::risk_via_ot;

    fn dm(atoms: &[(f64, f64)]) -> DiscreteMarginal<f64> {
        DiscreteMarginal::new(atoms.iter().copied()).unwrap()
    }

    #[test]
    fn dirac_baseline_gives_inner_product_with_mean() {
        let nu = PointCloud::<f64>::new(vec![vec![2.0, -1.0]], vec![1.0]).unwrap();
        let eta = PointCloud::new(
            vec![vec![1.0, 0.0], vec![0.0, 3.0], vec![2.0, 2.0]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let v = maximal_correlation_risk(&nu, &eta, &Default::default()).unwrap();
        let mean = eta.mean();
        assert!((v - (2.0 * mean[0] - mean[1])).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_clouds_match_the_spectral_oracle() {
        let alpha = SpectralFunction::<f64>::piecewise_constant(vec![(0.0, 0.5), (0.6, 1.75)]).unwrap();
        let mu = dm(&[(-1.0, 0.3), (0.5, 0.3), (2.0, 0.4)]);
        let (nu, _) = Curve::new(vec![alpha.clone()]).unwrap().to_point_cloud(0).unwrap();
        let eta = PointCloud::new(mu.locations().iter().map(|&x| vec![x]).collect(), mu.weights().to_vec())
            .unwrap();
        let v = maximal_correlation_risk(&nu, &eta, &Default::default()).unwrap();
        let r = risk_via_ot(&alpha, &mu, 0).unwrap();
        assert!((v - r).abs() < 1e-10);
    }

    #[test]
    fn two_by_two_clouds_match_vertex_enumeration() {
        let z = [vec![1.0, 0.0], vec![0.3, 2.0]];
        let y = [vec![0.5, 1.5], vec![2.0, -1.0]];
        let nu = PointCloud::uniform(z.to_vec()).unwrap();
        let eta = PointCloud::uniform(y.to_vec()).unwrap();
        let dot = |a: &[f64], b: &[f64]| -> f64 { a[0] * b[0] + a[1] * b[1] };
        let id = 0.5 * (dot(&z[0], &y[0]) + dot(&z[1], &y[1]));
        let swap = 0.5 * (dot(&z[0], &y[1]) + dot(&z[1], &y[0]));
        let v = maximal_correlation_risk(&nu, &eta, &Default::default()).unwrap();
        assert!((v - id.max(swap)).abs() < 1e-12);
    }

    #[test]
    fn scalar_collapse() {
        let alpha = SpectralFunction::<f64>::expected_shortfall(0.4).unwrap();
        let marg = vec![
            Marginal::Discrete(dm(&[(1.0, 0.5), (2.0, 0.5)])),
            Marginal::Discrete(dm(&[(0.5, 0.25), (1.0, 0.25), (3.0, 0.5)])),
        ];
        let b = Payout::parse("x1*x2 + x1", vec![(1.0, 2.0), (0.5, 3.0)]).unwrap();
        let vb = VectorPayout::new(vec![b.clone()]).unwrap();
        let curve = Curve::new(vec![alpha.clone()]).unwrap();
        let c = solve_curve_case(&curve, &vb, &marg, &Default::default()).unwrap();
        let s = solve_compatible(&alpha, &b, &marg, None, &Default::default()).unwrap();
        assert!((c.value - s.value).abs() < 1e-10);
    }

    #[test]
    fn coordinate_payouts_give_sum_of_means() {
        let one = SpectralFunction::<f64>::constant(1.0).unwrap();
        let curve = Curve::new(vec![one.clone(), one]).unwrap();
        let b = VectorPayout::parse(&["x1", "x2"], vec![(0.0, 2.0), (-1.0, 1.0)]).unwrap();
        let marg = vec![Marginal::uniform(0.0, 2.0).unwrap(), Marginal::uniform(-1.0, 1.0).unwrap()];
        let c = solve_curve_case(&curve, &b, &marg, &Default::default()).unwrap();
        assert!((c.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn curve_case_matches_the_lifted_lp() {
        let f1 = SpectralFunction::<f64>::piecewise_constant(vec![(0.0, 0.5), (0.5, 1.5)]).unwrap();
        let f2 = SpectralFunction::<f64>::piecewise_constant(vec![(0.0, 0.2), (0.3, 1.0), (0.8, 2.0)]).unwrap();
        let curve = Curve::new(vec![f1, f2]).unwrap();
        let a = dm(&[(0.5, 0.2), (1.0, 0.5), (2.0, 0.3)]);
        let c = dm(&[(1.0, 0.4), (1.5, 0.1), (3.0, 0.5)]);
        let b = VectorPayout::parse(&["x1*x2", "x1 + 2*x2"], vec![(0.5, 2.0), (1.0, 3.0)]).unwrap();
        let marg = vec![Marginal::Discrete(a.clone()), Marginal::Discrete(c.clone())];
        let closed = solve_curve_case(&curve, &b, &marg, &Default::default()).unwrap();
        let lp = curve_lifted_lp(&curve, &b, &[a, c], 0, &Default::default()).unwrap();
        assert!(closed.exact);
        assert!((closed.value - lp.value).abs() < 1e-8, "{} vs {}", closed.value, lp.value);
    }

    #[test]
    fn curve_case_names_the_failing_component() {
        let one = SpectralFunction::<f64>::constant(1.0).unwrap();
        let curve = Curve::new(vec![one.clone(), one]).unwrap();
        let b = VectorPayout::parse(&["x1 + x2", "-x1*x2"], vec![(0.0, 1.0); 2]).unwrap();
        let marg = vec![Marginal::uniform(0.0, 1.0).unwrap(); 2];
        match solve_curve_case(&curve, &b, &marg, &Default::default()) {
            Err(Error::HypothesisViolation { variable, .. }) => assert!(variable.starts_with("component 2")),
            other => panic!("expected a hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn invertibility_examples() {
        let id = VectorPayout::parse(&["x1", "x2"], vec![(0.0, 1.0); 2]).unwrap();
        let r = invertibility_probe(&id, 5).unwrap();
        assert!((r.min_abs_det - 1.0).abs() < 1e-9 && r.passing);

        let degenerate = VectorPayout::parse(&["x1 + x2", "x1 + x2"], vec![(0.0, 1.0); 2]).unwrap();
        let r = invertibility_probe(&degenerate, 5).unwrap();
        assert_eq!(r.min_abs_det, 0.0);
        assert_eq!(r.flagged.len(), r.points);
        assert!(!r.passing);

        let b = VectorPayout::parse(&["x1", "x1*x2"], vec![(1.0, 2.0); 2]).unwrap();
        let r = invertibility_probe(&b, 5).unwrap();
        assert!(r.passing);
        assert!((r.min_abs_det - 1.1).abs() < 1e-9, "{}", r.min_abs_det);
    }
}
