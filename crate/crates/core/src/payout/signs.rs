//! Finite-difference sign structure of a payout and the compatibility test.
//!
//! Mixed partials `∂²b/∂x_i∂x_j` and first partials are sampled on a tensor
//! grid of cell centers. Samples whose stencil crosses a kink of `abs`, `max`,
//! `min` or `relu` (detected by a change of branch) are dropped from the vote.
//!
//! Compatibility is a 2-coloring of the sign graph on `{0, 1, …, d}`, node 0
//! being the spectral variable `x0` of the lifted surplus `x0·b(x)`.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;

use super::Payout;
use crate::error::{Error, Result};
use crate::linalg::det_solve;

/// Largest probe grid accepted.
const GRID_LIMIT: usize = 2_000_000;
/// Relative sign tolerance.
const SIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    StrictPositive,
    /// `≥ 0` everywhere and positive somewhere.
    Positive,
    Zero,
    Negative,
    StrictNegative,
    Mixed,
}

impl Sign {
    pub fn symbol(self) -> &'static str {
        match self {
            Sign::StrictPositive | Sign::Positive => "+",
            Sign::Zero => "0",
            Sign::Negative | Sign::StrictNegative => "-",
            Sign::Mixed => "mixed",
        }
    }

    /// Like [`Sign::symbol`] but doubled for strict signs: `++`, `+`, `0`, `-`, `--`, `mixed`.
    pub fn code(self) -> &'static str {
        match self {
            Sign::StrictPositive => "++",
            Sign::StrictNegative => "--",
            s => s.symbol(),
        }
    }

    /// Inverse of [`Sign::code`].
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "++" => Sign::StrictPositive,
            "+" => Sign::Positive,
            "0" => Sign::Zero,
            "-" => Sign::Negative,
            "--" => Sign::StrictNegative,
            "mixed" => Sign::Mixed,
            _ => return None,
        })
    }

    /// `+1`, `-1`, or `0` for zero and mixed entries.
    pub fn direction(self) -> i8 {
        match self {
            Sign::StrictPositive | Sign::Positive => 1,
            Sign::Negative | Sign::StrictNegative => -1,
            Sign::Zero | Sign::Mixed => 0,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Sign::StrictPositive | Sign::StrictNegative)
    }

    pub fn negated(self) -> Self {
        match self {
            Sign::StrictPositive => Sign::StrictNegative,
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
            Sign::StrictNegative => Sign::StrictPositive,
            s => s,
        }
    }

    fn from_counts(pos: usize, neg: usize, zero: usize) -> Self {
        match (pos > 0, neg > 0, zero > 0) {
            (true, true, _) => Sign::Mixed,
            (true, false, false) => Sign::StrictPositive,
            (true, false, true) => Sign::Positive,
            (false, true, false) => Sign::StrictNegative,
            (false, true, true) => Sign::Negative,
            (false, false, _) => Sign::Zero,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    StrictIncreasing,
    Increasing,
    Constant,
    Decreasing,
    StrictDecreasing,
    NonMonotone,
}

impl Monotonicity {
    pub fn label(self) -> &'static str {
        match self {
            Monotonicity::StrictIncreasing => "strict-increasing",
            Monotonicity::Increasing => "increasing",
            Monotonicity::Constant => "constant",
            Monotonicity::Decreasing => "decreasing",
            Monotonicity::StrictDecreasing => "strict-decreasing",
            Monotonicity::NonMonotone => "non-monotone",
        }
    }

    /// Sign of `∂s/∂x0∂x_i` for the lifted surplus `x0·b`.
    pub fn as_sign(self) -> Sign {
        match self {
            Monotonicity::StrictIncreasing => Sign::StrictPositive,
            Monotonicity::Increasing => Sign::Positive,
            Monotonicity::Constant => Sign::Zero,
            Monotonicity::Decreasing => Sign::Negative,
            Monotonicity::StrictDecreasing => Sign::StrictNegative,
            Monotonicity::NonMonotone => Sign::Mixed,
        }
    }

    pub fn is_nondecreasing(self) -> bool {
        matches!(
            self,
            Monotonicity::StrictIncreasing | Monotonicity::Increasing | Monotonicity::Constant
        )
    }

    pub fn is_nonincreasing(self) -> bool {
        matches!(
            self,
            Monotonicity::StrictDecreasing | Monotonicity::Decreasing | Monotonicity::Constant
        )
    }

    pub fn is_strict(self) -> bool {
        matches!(
            self,
            Monotonicity::StrictIncreasing | Monotonicity::StrictDecreasing
        )
    }

    fn from_sign(s: Sign) -> Self {
        match s {
            Sign::StrictPositive => Monotonicity::StrictIncreasing,
            Sign::Positive => Monotonicity::Increasing,
            Sign::Zero => Monotonicity::Constant,
            Sign::Negative => Monotonicity::Decreasing,
            Sign::StrictNegative => Monotonicity::StrictDecreasing,
            Sign::Mixed => Monotonicity::NonMonotone,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "strict-increasing" => Monotonicity::StrictIncreasing,
            "increasing" => Monotonicity::Increasing,
            "constant" => Monotonicity::Constant,
            "decreasing" => Monotonicity::Decreasing,
            "strict-decreasing" => Monotonicity::StrictDecreasing,
            "non-monotone" => Monotonicity::NonMonotone,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Two-coloring of `{0, 1, …, d}`; index 0 is the spectral variable and is always `Plus`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub sides: Vec<Side>,
}

impl Partition {
    pub fn all_plus(d: usize) -> Self {
        Self {
            sides: vec![Side::Plus; d + 1],
        }
    }

    /// Builds a partition of `{0..d}` from the 1-based indices placed in `S−`.
    pub fn with_minus(d: usize, minus: &[usize]) -> Result<Self> {
        let mut p = Self::all_plus(d);
        for &i in minus {
            if i == 0 || i > d {
                return Err(Error::invalid(format!(
                    "partition index {i} outside 1..={d}"
                )));
            }
            p.sides[i] = Side::Minus;
        }
        Ok(p)
    }

    pub fn arity(&self) -> usize {
        self.sides.len() - 1
    }

    /// Side of variable `i` (1-based; 0 is the spectral variable).
    pub fn side(&self, i: usize) -> Side {
        self.sides[i]
    }

    pub fn plus(&self) -> Vec<usize> {
        (0..self.sides.len())
            .filter(|&i| self.sides[i] == Side::Plus)
            .collect()
    }

    pub fn minus(&self) -> Vec<usize> {
        (0..self.sides.len())
            .filter(|&i| self.sides[i] == Side::Minus)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    StrictlyCompatible,
    WeaklyCompatible,
    /// `witness` lists nodes of `{0..d}` forming an odd cycle (or the mixed pair).
    Incompatible {
        witness: Vec<usize>,
        point: Option<Vec<f64>>,
        reason: String,
    },
}

impl Verdict {
    pub fn is_compatible(&self) -> bool {
        !matches!(self, Verdict::Incompatible { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::StrictlyCompatible => "StrictlyCompatible",
            Verdict::WeaklyCompatible => "WeaklyCompatible",
            Verdict::Incompatible { .. } => "Incompatible",
        }
    }
}

/// Sign data of a payout. Matrices are indexed by 0-based variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SignStructure {
    pub sigma: Vec<Vec<Sign>>,
    pub monotonicity: Vec<Monotonicity>,
    /// A probe point where the entry changed sign, for `Mixed` entries.
    pub sigma_witness: Vec<Vec<Option<Vec<f64>>>>,
    pub monotonicity_witness: Vec<Option<Vec<f64>>>,
    pub grid_per_axis: usize,
    /// Samples dropped because their stencil straddled a kink.
    pub excluded_samples: usize,
    /// Largest `|b|` over the probe grid.
    pub scale: f64,
}

impl SignStructure {
    /// A user-declared structure (no probing).
    pub fn declared(sigma: Vec<Vec<Sign>>, monotonicity: Vec<Monotonicity>) -> Result<Self> {
        let d = monotonicity.len();
        if sigma.len() != d || sigma.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("sign matrix must be d x d"));
        }
        for i in 0..d {
            for j in 0..d {
                if i != j && sigma[i][j] != sigma[j][i] {
                    return Err(Error::invalid(format!(
                        "sign matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self {
            sigma,
            monotonicity,
            sigma_witness: vec![vec![None; d]; d],
            monotonicity_witness: vec![None; d],
            grid_per_axis: 0,
            excluded_samples: 0,
            scale: 0.0,
        })
    }

    pub fn arity(&self) -> usize {
        self.monotonicity.len()
    }

    /// Entries whose direction differs from `other`; zero and weak entries
    /// are treated as agreeing with either strict direction of the same sign.
    pub fn disagreements(&self, other: &SignStructure) -> Vec<String> {
        let mut out = Vec::new();
        let d = self.arity().min(other.arity());
        for i in 0..d {
            let (a, b) = (self.monotonicity[i].as_sign(), other.monotonicity[i].as_sign());
            if a.direction() * b.direction() < 0 || (a == Sign::Mixed) != (b == Sign::Mixed) {
                out.push(format!(
                    "monotonicity of x{}: {} vs {}",
                    i + 1,
                    self.monotonicity[i].label(),
                    other.monotonicity[i].label()
                ));
            }
            for j in i + 1..d {
                let (a, b) = (self.sigma[i][j], other.sigma[i][j]);
                if a.direction() * b.direction() < 0 || (a == Sign::Mixed) != (b == Sign::Mixed) {
                    out.push(format!("sigma({}, {}): {} vs {}", i + 1, j + 1, a, b));
                }
            }
        }
        out
    }

    /// Edge sign between nodes `i`, `j` of `{0..d}`.
    fn edge(&self, i: usize, j: usize) -> Sign {
        match (i, j) {
            (0, 0) => Sign::Zero,
            (0, k) | (k, 0) => self.monotonicity[k - 1].as_sign(),
            _ if i == j => Sign::Zero,
            _ => self.sigma[i - 1][j - 1],
        }
    }

    fn edge_witness(&self, i: usize, j: usize) -> Option<Vec<f64>> {
        match (i, j) {
            (0, k) | (k, 0) => self.monotonicity_witness[k - 1].clone(),
            _ => self.sigma_witness[i - 1][j - 1].clone(),
        }
    }
}

/// Cell-center probe points and finite-difference steps for a box.
pub(crate) struct ProbeGrid {
    pub points: Vec<Vec<f64>>,
    pub steps: Vec<f64>,
    /// Axis widths used for tolerance scaling (degenerate axes widened).
    pub widths: Vec<f64>,
}

pub(crate) fn probe_grid(domain: &[(f64, f64)], g: usize) -> Result<ProbeGrid> {
    if g == 0 {
        return Err(Error::invalid("probe grid needs at least one point per axis"));
    }
    let d = domain.len();
    let total = g
        .checked_pow(d as u32)
        .filter(|&n| n <= GRID_LIMIT)
        .ok_or(Error::SizeGuard {
            size: g.saturating_pow(d as u32),
            limit: GRID_LIMIT,
        })?;
    let widths: Vec<f64> = domain
        .iter()
        .map(|&(lo, hi)| {
            let w = hi - lo;
            if w > 0.0 {
                w
            } else {
                1e-3 * lo.abs().max(1.0)
            }
        })
        .collect();
    let steps = widths.iter().map(|w| w / (4.0 * g as f64)).collect();
    let mut points = Vec::with_capacity(total);
    for idx in 0..total {
        let mut r = idx;
        let mut x = Vec::with_capacity(d);
        for &(lo, hi) in domain {
            let k = r % g;
            r /= g;
            x.push(lo + (hi - lo) * (k as f64 + 0.5) / g as f64);
        }
        points.push(x);
    }
    Ok(ProbeGrid {
        points,
        steps,
        widths,
    })
}

/// Central first differences at `x`; `None` where the stencil crosses a kink.
pub(crate) fn gradient_at(b: &Payout, x: &[f64], steps: &[f64]) -> Result<Vec<Option<f64>>> {
    let (_, br0) = b.eval_branches(x)?;
    let mut out = Vec::with_capacity(x.len());
    let mut y = x.to_vec();
    for i in 0..x.len() {
        let h = steps[i];
        y[i] = x[i] + h;
        let (fp, bp) = b.eval_branches(&y)?;
        y[i] = x[i] - h;
        let (fm, bm) = b.eval_branches(&y)?;
        y[i] = x[i];
        out.push((bp == br0 && bm == br0).then(|| (fp - fm) / (2.0 * h)));
    }
    Ok(out)
}

/// Central mixed difference `∂²b/∂x_i∂x_j` at `x`; `None` across a kink.
pub(crate) fn mixed_at(
    b: &Payout,
    x: &[f64],
    i: usize,
    j: usize,
    steps: &[f64],
    br0: &[u32],
) -> Result<Option<f64>> {
    let (hi, hj) = (steps[i], steps[j]);
    let mut y = x.to_vec();
    let mut corner = |si: f64, sj: f64| -> Result<(f64, bool)> {
        y[i] = x[i] + si * hi;
        y[j] = x[j] + sj * hj;
        let (v, br) = b.eval_branches(&y)?;
        Ok((v, br == br0))
    };
    let (pp, a) = corner(1.0, 1.0)?;
    let (pm, bb) = corner(1.0, -1.0)?;
    let (mp, c) = corner(-1.0, 1.0)?;
    let (mm, e) = corner(-1.0, -1.0)?;
    Ok((a && bb && c && e).then(|| (pp - pm - mp + mm) / (4.0 * hi * hj)))
}

struct PointSample {
    value: f64,
    grad: Vec<Option<f64>>,
    mixed: Vec<Option<f64>>,
}

fn pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .collect()
}

/// Classifies every first and mixed partial of `b` over its domain box.
pub fn mixed_partial_signs(b: &Payout, grid_per_axis: usize) -> Result<SignStructure> {
    if grid_per_axis < 3 {
        return Err(Error::invalid("sign probing needs at least 3 points per axis"));
    }
    let d = b.arity();
    let grid = probe_grid(b.domain(), grid_per_axis)?;
    let pair_list = pairs(d);

    let samples: Vec<Result<PointSample>> = grid
        .points
        .par_iter()
        .map(|x| {
            let (value, br0) = b.eval_branches(x)?;
            let grad = gradient_at(b, x, &grid.steps)?;
            let mixed = pair_list
                .iter()
                .map(|&(i, j)| mixed_at(b, x, i, j, &grid.steps, &br0))
                .collect::<Result<Vec<_>>>()?;
            Ok(PointSample { value, grad, mixed })
        })
        .collect();
    let samples: Vec<PointSample> = samples.into_iter().collect::<Result<_>>()?;

    let mut scale = samples.iter().fold(0.0f64, |m, s| m.max(s.value.abs()));
    if scale == 0.0 {
        scale = 1.0;
    }

    let mut excluded = 0usize;
    let mut vote = |values: &mut dyn Iterator<Item = (usize, Option<f64>)>,
                    tol: f64|
     -> (Sign, Option<Vec<f64>>) {
        let (mut pos, mut neg, mut zero) = (0, 0, 0);
        let (mut first_pos, mut first_neg) = (None, None);
        for (k, v) in values {
            match v {
                None => excluded += 1,
                Some(v) if v > tol => {
                    pos += 1;
                    first_pos.get_or_insert(k);
                }
                Some(v) if v < -tol => {
                    neg += 1;
                    first_neg.get_or_insert(k);
                }
                Some(_) => zero += 1,
            }
        }
        let sign = Sign::from_counts(pos, neg, zero);
        let witness = (sign == Sign::Mixed).then(|| {
            // the minority sign is the informative one
            let k = if pos <= neg { first_pos } else { first_neg };
            grid.points[k.expect("both signs seen")].clone()
        });
        (sign, witness)
    };

    let mut monotonicity = Vec::with_capacity(d);
    let mut monotonicity_witness = Vec::with_capacity(d);
    for i in 0..d {
        let tol = SIGN_TOL * scale / grid.widths[i];
        let (s, w) = vote(
            &mut samples.iter().enumerate().map(|(k, s)| (k, s.grad[i])),
            tol,
        );
        monotonicity.push(Monotonicity::from_sign(s));
        monotonicity_witness.push(w);
    }
    let mut sigma = vec![vec![Sign::Zero; d]; d];
    let mut sigma_witness = vec![vec![None; d]; d];
    for (p, &(i, j)) in pair_list.iter().enumerate() {
        let tol = SIGN_TOL * scale / (grid.widths[i] * grid.widths[j]);
        let (s, w) = vote(
            &mut samples.iter().enumerate().map(|(k, s)| (k, s.mixed[p])),
            tol,
        );
        sigma[i][j] = s;
        sigma[j][i] = s;
        sigma_witness[i][j] = w.clone();
        sigma_witness[j][i] = w;
    }
    Ok(SignStructure {
        sigma,
        monotonicity,
        sigma_witness,
        monotonicity_witness,
        grid_per_axis,
        excluded_samples: excluded,
        scale,
    })
}

/// Two-colors the sign graph. With `include_x0` the spectral variable joins
/// the graph through the monotonicity of `b`; pass `false` when α is constant,
/// since then the lift adds nothing.
pub fn classify_compatibility(s: &SignStructure, include_x0: bool) -> (Option<Partition>, Verdict) {
    let d = s.arity();
    let nodes: Vec<usize> = if include_x0 { (0..=d).collect() } else { (1..=d).collect() };

    for (a, &i) in nodes.iter().enumerate() {
        for &j in &nodes[a + 1..] {
            if s.edge(i, j) == Sign::Mixed {
                return (
                    None,
                    Verdict::Incompatible {
                        witness: vec![i, j],
                        point: s.edge_witness(i, j),
                        reason: format!("the interaction of nodes {i} and {j} changes sign"),
                    },
                );
            }
        }
    }

    let mut color: Vec<Option<Side>> = vec![None; d + 1];
    let mut parent: Vec<Option<usize>> = vec![None; d + 1];
    let mut conflict = None;
    'outer: for &root in &nodes {
        if color[root].is_some() {
            continue;
        }
        color[root] = Some(Side::Plus);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &nodes {
                if v == u {
                    continue;
                }
                let dir = s.edge(u, v).direction();
                if dir == 0 {
                    continue;
                }
                let cu = color[u].expect("visited");
                let want = if dir > 0 {
                    cu
                } else if cu == Side::Plus {
                    Side::Minus
                } else {
                    Side::Plus
                };
                match color[v] {
                    None => {
                        color[v] = Some(want);
                        parent[v] = Some(u);
                        queue.push_back(v);
                    }
                    Some(c) if c != want => {
                        conflict = Some((u, v));
                        break 'outer;
                    }
                    Some(_) => {}
                }
            }
        }
    }

    if let Some((u, v)) = conflict {
        let witness = odd_triple(s, &nodes).unwrap_or_else(|| tree_cycle(&parent, u, v));
        return (
            None,
            Verdict::Incompatible {
                reason: format!("sign cycle through nodes {witness:?} has negative product"),
                witness,
                point: None,
            },
        );
    }

    // node 0 is either the first root or outside the graph, so it is Plus
    let sides: Vec<Side> = color.into_iter().map(|c| c.unwrap_or(Side::Plus)).collect();
    let strict = nodes.iter().enumerate().all(|(a, &i)| {
        nodes[a + 1..].iter().all(|&j| s.edge(i, j).is_strict())
    });
    let verdict = if strict {
        Verdict::StrictlyCompatible
    } else {
        Verdict::WeaklyCompatible
    };
    (Some(Partition { sides }), verdict)
}

fn odd_triple(s: &SignStructure, nodes: &[usize]) -> Option<Vec<usize>> {
    for (a, &i) in nodes.iter().enumerate() {
        for (b, &j) in nodes.iter().enumerate().skip(a + 1) {
            for &k in &nodes[b + 1..] {
                let p = s.edge(i, j).direction() * s.edge(j, k).direction() * s.edge(i, k).direction();
                if p < 0 {
                    return Some(vec![i, j, k]);
                }
            }
        }
    }
    None
}

fn tree_cycle(parent: &[Option<usize>], u: usize, v: usize) -> Vec<usize> {
    let path = |mut x: usize| {
        let mut p = vec![x];
        while let Some(q) = parent[x] {
            p.push(q);
            x = q;
        }
        p
    };
    let pu = path(u);
    let pv = path(v);
    let lca = *pu.iter().find(|x| pv.contains(x)).expect("same component");
    let mut cycle: Vec<usize> = pu.iter().copied().take_while(|&x| x != lca).collect();
    cycle.push(lca);
    let back: Vec<usize> = pv.iter().copied().take_while(|&x| x != lca).collect();
    cycle.extend(back.into_iter().rev());
    cycle
}

/// One probe point of the twist check.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistSample {
    pub point: Vec<f64>,
    pub det: f64,
    /// `D_{x2}b · [D²_{x1x2}b]⁻¹ D_{x1}b`; `None` when the block is singular or
    /// the stencil crossed a kink.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwistReport {
    pub block_dim: usize,
    pub points: usize,
    pub passing: usize,
    pub singular: usize,
    pub fraction_passing: f64,
    pub min_value: Option<f64>,
    pub worst_point: Option<Vec<f64>>,
    pub samples: Vec<TwistSample>,
}

/// Checks the differential condition for `b(x1, x2)` with `x1, x2 ∈ ℝⁿ`,
/// the first `n` variables forming `x1`.
pub fn twist_condition_check(b: &Payout, n: usize, grid_per_axis: usize) -> Result<TwistReport> {
    if n == 0 || n > 4 || b.arity() != 2 * n {
        return Err(Error::invalid(format!(
            "twist check needs 2n variables with 1 <= n <= 4, got arity {} and n = {n}",
            b.arity()
        )));
    }
    let grid = probe_grid(b.domain(), grid_per_axis)?;
    let scale = grid
        .points
        .iter()
        .map(|x| b.eval(x).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let det_tol: f64 = SIGN_TOL
        * (0..n)
            .map(|r| scale / (grid.widths[r] * grid.widths[n + r]))
            .product::<f64>();
    let value_tol = SIGN_TOL * scale;

    let samples: Vec<TwistSample> = grid
        .points
        .par_iter()
        .map(|x| -> Result<TwistSample> {
            let (_, br0) = b.eval_branches(x)?;
            let grad = gradient_at(b, x, &grid.steps)?;
            let mut h = vec![vec![0.0; n]; n];
            let mut kinked = grad.iter().any(Option::is_none);
            for r in 0..n {
                for l in 0..n {
                    match mixed_at(b, x, r, n + l, &grid.steps, &br0)? {
                        Some(v) => h[r][l] = v,
                        None => kinked = true,
                    }
                }
            }
            let d1: Vec<f64> = grad[..n].iter().map(|g| g.unwrap_or(0.0)).collect();
            let d2: Vec<f64> = grad[n..].iter().map(|g| g.unwrap_or(0.0)).collect();
            let (det, z) = det_solve(h, Some(d1));
            let value = if kinked || det.abs() <= det_tol {
                None
            } else {
                z.map(|z| d2.iter().zip(&z).map(|(a, b)| a * b).sum())
            };
            Ok(TwistSample {
                point: x.clone(),
                det,
                value,
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;

    let singular = samples.iter().filter(|s| s.det.abs() <= det_tol).count();
    let passing = samples
        .iter()
        .filter(|s| s.value.is_some_and(|v| v > value_tol))
        .count();
    let worst = samples
        .iter()
        .filter_map(|s| s.value.map(|v| (v, &s.point)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    Ok(TwistReport {
        block_dim: n,
        points: samples.len(),
        passing,
        singular,
        fraction_passing: passing as f64 / samples.len() as f64,
        min_value: worst.map(|w| w.0),
        worst_point: worst.map(|w| w.1.clone()),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); d]
    }

    #[test]
    fn additive_payout_has_zero_interactions() {
        let b = Payout::parse("x1 + x2", unit(2)).unwrap();
        let s = mixed_partial_signs(&b, 5).unwrap();
        assert_eq!(s.sigma[0][1], Sign::Zero);
        assert_eq!(
            s.monotonicity,
            vec![Monotonicity::StrictIncreasing, Monotonicity::StrictIncreasing]
        );
        let (p, v) = classify_compatibility(&s, true);
        assert_eq!(v, Verdict::WeaklyCompatible);
        assert_eq!(p.unwrap().minus(), Vec::<usize>::new());
    }

    #[test]
    fn product_is_supermodular() {
        let b = Payout::parse("x1*x2", unit(2)).unwrap();
        let s = mixed_partial_signs(&b, 4).unwrap();
        assert_eq!(s.sigma[0][1], Sign::StrictPositive);
        let (_, v) = classify_compatibility(&s, true);
        assert_eq!(v, Verdict::StrictlyCompatible);
    }

    #[test]
    fn opposite_directions_split_the_partition() {
        let b = Payout::parse("x1 - x2 + 0.1*x1*(2 - x2)", unit(2)).unwrap();
        let s = mixed_partial_signs(&b, 4).unwrap();
        assert_eq!(s.sigma[0][1], Sign::StrictNegative);
        let (p, v) = classify_compatibility(&s, true);
        assert_eq!(v, Verdict::StrictlyCompatible);
        assert_eq!(p.unwrap().minus(), vec![2]);
    }

    #[test]
    fn declared_supermodular_structure() {
        use Sign::Positive as P;
        let s = SignStructure::declared(
            vec![vec![Sign::Zero, P, P], vec![P, Sign::Zero, P], vec![P, P, Sign::Zero]],
            vec![Monotonicity::Constant; 3],
        )
        .unwrap();
        let (p, v) = classify_compatibility(&s, false);
        assert_eq!(v, Verdict::WeaklyCompatible);
        assert!(p.unwrap().minus().is_empty());
    }

    #[test]
    fn odd_triple_is_reported() {
        use Sign::{StrictNegative as N, StrictPositive as P, Zero as Z};
        let s = SignStructure::declared(
            vec![vec![Z, P, P], vec![P, Z, N], vec![P, N, Z]],
            vec![Monotonicity::Constant; 3],
        )
        .unwrap();
        let (p, v) = classify_compatibility(&s, false);
        assert!(p.is_none());
        match v {
            Verdict::Incompatible { witness, .. } => assert_eq!(witness, vec![1, 2, 3]),
            other => panic!("expected incompatible, got {other:?}"),
        }
    }

    #[test]
    fn four_cycle_without_bad_triple_still_fails() {
        use Sign::{StrictNegative as N, StrictPositive as P, Zero as Z};
        // 1-2 +, 2-3 +, 3-4 +, 4-1 −, chords zero
        let s = SignStructure::declared(
            vec![
                vec![Z, P, Z, N],
                vec![P, Z, P, Z],
                vec![Z, P, Z, P],
                vec![N, Z, P, Z],
            ],
            vec![Monotonicity::Constant; 4],
        )
        .unwrap();
        let (_, v) = classify_compatibility(&s, false);
        match v {
            Verdict::Incompatible { mut witness, .. } => {
                witness.sort();
                assert_eq!(witness, vec![1, 2, 3, 4]);
            }
            other => panic!("expected incompatible, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_payout_is_incompatible_only_when_lifted() {
        let b = Payout::parse("-(x1 - x2)^2", unit(2)).unwrap();
        let s = mixed_partial_signs(&b, 4).unwrap();
        assert_eq!(s.sigma[0][1], Sign::StrictPositive);
        assert_eq!(s.monotonicity[0], Monotonicity::NonMonotone);
        let (_, v) = classify_compatibility(&s, false);
        assert_eq!(v, Verdict::StrictlyCompatible);
        let (_, v) = classify_compatibility(&s, true);
        match v {
            Verdict::Incompatible { witness, point, .. } => {
                assert_eq!(witness, vec![0, 1]);
                assert!(point.is_some());
            }
            other => panic!("expected incompatible, got {other:?}"),
        }
    }

    #[test]
    fn kinks_are_excluded_from_votes() {
        let b = Payout::parse("max(x1 + x2 - 1, 0)", unit(2)).unwrap();
        let s = mixed_partial_signs(&b, 6).unwrap();
        assert!(s.excluded_samples > 0);
        assert_eq!(s.sigma[0][1], Sign::Zero);
        assert_eq!(s.monotonicity[0], Monotonicity::Increasing);
    }

    #[test]
    fn evaluation_failure_names_the_point() {
        // finite on the validation grid, singular at the stencil point 0.375 - 1/16
        let b = Payout::parse("1/(x1 - 0.3125)", unit(1)).unwrap();
        let err = mixed_partial_signs(&b, 4).unwrap_err();
        assert!(matches!(err, Error::Evaluation { .. }));
    }

    #[test]
    fn twist_examples() {
        let b = Payout::parse("x1*x2", unit(2)).unwrap();
        let r = twist_condition_check(&b, 1, 5).unwrap();
        assert_eq!(r.passing, r.points);
        for s in &r.samples {
            let exact = s.point[0] * s.point[1];
            assert!((s.value.unwrap() - exact).abs() < 1e-6);
        }

        let b = Payout::parse("-(x1 - x2)^2/2", unit(2)).unwrap();
        let r = twist_condition_check(&b, 1, 5).unwrap();
        assert_eq!(r.passing, 0);
        for s in &r.samples {
            let exact = -(s.point[0] - s.point[1]).powi(2);
            assert!((s.value.unwrap() - exact).abs() < 1e-6);
        }
        assert!(r.min_value.unwrap() < 0.0);

        let b = Payout::parse("x1 + x2", unit(2)).unwrap();
        let r = twist_condition_check(&b, 1, 5).unwrap();
        assert_eq!(r.singular, r.points);
        assert_eq!(r.passing, 0);
    }
}
