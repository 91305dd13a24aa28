//! One-dimensional marginal distributions.
//!
//! Every marginal exposes a right-continuous CDF and its generalized inverse
//! `F⁻¹(m) = inf{x : F(x) ≥ m}`. At `m = 0` the quantile returns the left end
//! of the support instead of `-∞`.

use std::io::Read;
use std::path::Path;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureOptions};
use crate::scalar::{merge_breakpoints, Scalar};

/// Finitely supported measure: sorted distinct locations with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMarginal<T> {
    locations: Vec<T>,
    weights: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Scalar> DiscreteMarginal<T> {
    /// Builds from `(location, weight)` pairs. Pairs are sorted, equal
    /// locations merged, and the weights must sum to one.
    pub fn new<I: IntoIterator<Item = (T, T)>>(atoms: I) -> Result<Self> {
        let mut atoms: Vec<(T, T)> = atoms.into_iter().collect();
        if atoms.is_empty() {
            return Err(Error::invalid("discrete marginal needs at least one atom"));
        }
        for &(x, w) in &atoms {
            if !x.is_finite() || !w.is_finite() {
                return Err(Error::invalid("atom location and weight must be finite"));
            }
            if w <= T::zero() {
                return Err(Error::invalid(format!(
                    "atom weight must be positive, got {w} at {x}"
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let mut locations: Vec<T> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<T> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            if locations.last() == Some(&x) {
                *weights.last_mut().expect("non-empty") += w;
            } else {
                locations.push(x);
                weights.push(w);
            }
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = T::zero();
        for &w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        *cumulative.last_mut().expect("non-empty") = T::one();
        Ok(Self {
            locations,
            weights,
            cumulative,
        })
    }

    /// Like [`DiscreteMarginal::new`] but rescales the weights to total mass one.
    pub fn normalized<I: IntoIterator<Item = (T, T)>>(atoms: I) -> Result<Self> {
        let atoms: Vec<(T, T)> = atoms.into_iter().collect();
        let total: T = atoms.iter().map(|a| a.1).sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::invalid("total weight must be positive and finite"));
        }
        Self::new(atoms.into_iter().map(|(x, w)| (x, w / total)))
    }

    pub fn dirac(x: T) -> Self {
        Self {
            locations: vec![x],
            weights: vec![T::one()],
            cumulative: vec![T::one()],
        }
    }

    /// Equal-weight atoms (an empirical measure).
    pub fn empirical(samples: &[T]) -> Result<Self> {
        let w = T::one() / T::from_usize(samples.len().max(1)).expect("usize");
        Self::new(samples.iter().map(|&x| (x, w)))
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[T] {
        &self.locations
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `F` evaluated at each atom; the last entry is exactly one.
    pub fn cumulative(&self) -> &[T] {
        &self.cumulative
    }

    pub fn atoms(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.locations.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn quantile(&self, m: T) -> T {
        let k = self.cumulative.partition_point(|&c| c < m);
        self.locations[k.min(self.len() - 1)]
    }

    pub fn cdf(&self, x: T) -> T {
        let k = self.locations.partition_point(|&l| l <= x);
        if k == 0 {
            T::zero()
        } else {
            self.cumulative[k - 1]
        }
    }

    pub fn mean(&self) -> T {
        self.atoms().map(|(x, w)| x * w).sum()
    }

    pub fn map_locations(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.atoms().map(|(x, w)| (f(x), w)))
    }

    /// `(1 - t)·self + t·other`.
    pub fn mixture(&self, other: &Self, t: T) -> Result<Self> {
        let s = T::one() - t;
        let atoms = self
            .atoms()
            .map(|(x, w)| (x, w * s))
            .chain(other.atoms().map(|(x, w)| (x, w * t)))
            .filter(|a| a.1 > T::zero());
        Self::normalized(atoms)
    }

    /// Reads two-column CSV rows `location,weight`. A non-numeric first row is
    /// treated as a header; lines starting with `#` are skipped.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut atoms = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::invalid(format!("csv row {} needs two columns", i + 1)));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(x), Ok(w)) => atoms.push((T::lit(x), T::lit(w))),
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::invalid(format!(
                        "csv row {} is not numeric: {:?}",
                        i + 1,
                        rec
                    )))
                }
            }
        }
        Self::new(atoms)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file)
    }
}

/// Continuous nondecreasing quantile interpolating `(m, x)` knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearQuantile<T> {
    knots: Vec<(T, T)>,
}

impl<T: Scalar> PiecewiseLinearQuantile<T> {
    pub fn new(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("piecewise-linear quantile needs two knots"));
        }
        if knots[0].0 != T::zero() || knots[knots.len() - 1].0 != T::one() {
            return Err(Error::invalid("quantile knots must start at m = 0 and end at m = 1"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid("quantile knot levels must be strictly increasing"));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::invalid("quantile knot values must be nondecreasing"));
            }
        }
        if knots.iter().any(|k| !k.1.is_finite()) {
            return Err(Error::invalid("quantile knot values must be finite"));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(T, T)] {
        &self.knots
    }

    pub fn quantile(&self, m: T) -> T {
        let m = m.max(T::zero()).min(T::one());
        let k = self.knots.partition_point(|kn| kn.0 <= m);
        if k >= self.knots.len() {
            return self.knots[self.knots.len() - 1].1;
        }
        let (m0, x0) = self.knots[k - 1];
        let (m1, x1) = self.knots[k];
        x0 + (x1 - x0) * (m - m0) / (m1 - m0)
    }

    pub fn cdf(&self, x: T) -> T {
        let first = self.knots[0].1;
        let last = self.knots[self.knots.len() - 1].1;
        if x < first {
            return T::zero();
        }
        if x >= last {
            return T::one();
        }
        // last knot whose value is <= x; flat pieces are atoms and jump past
        let k = self.knots.partition_point(|kn| kn.1 <= x) - 1;
        let (m0, x0) = self.knots[k];
        let (m1, x1) = self.knots[k + 1];
        m0 + (m1 - m0) * (x - x0) / (x1 - x0)
    }
}

/// Bounded parametric families. Truncated families renormalize the parent CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parametric<T> {
    Uniform { a: T, b: T },
    TruncatedNormal { mean: T, sd: T, lo: T, hi: T },
    Triangular { a: T, mode: T, b: T },
    TruncatedGumbel { loc: T, scale: T, lo: T, hi: T },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn gumbel_cdf(z: f64) -> f64 {
    (-(-z).exp()).exp()
}

impl<T: Scalar> Parametric<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(msg.to_string()));
        match *self {
            Parametric::Uniform { a, b } => {
                if !(a < b) {
                    return bad("uniform requires a < b");
                }
            }
            Parametric::TruncatedNormal { sd, lo, hi, .. } => {
                if !(sd > T::zero()) || !(lo < hi) {
                    return bad("truncated normal requires sd > 0 and lo < hi");
                }
            }
            Parametric::Triangular { a, mode, b } => {
                if !(a < b) || mode < a || mode > b {
                    return bad("triangular requires a <= mode <= b and a < b");
                }
            }
            Parametric::TruncatedGumbel { scale, lo, hi, .. } => {
                if !(scale > T::zero()) || !(lo < hi) {
                    return bad("truncated gumbel requires scale > 0 and lo < hi");
                }
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (T, T) {
        match *self {
            Parametric::Uniform { a, b } => (a, b),
            Parametric::TruncatedNormal { lo, hi, .. } => (lo, hi),
            Parametric::Triangular { a, b, .. } => (a, b),
            Parametric::TruncatedGumbel { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn cdf(&self, x: T) -> T {
        let (lo, hi) = self.support();
        if x < lo {
            return T::zero();
        }
        if x >= hi {
            return T::one();
        }
        let xf = x.to_f64_lossy();
        let v = match *self {
            Parametric::Uniform { a, b } => {
                return (x - a) / (b - a);
            }
            Parametric::Triangular { a, mode, b } => {
                let (a, c, b) = (a.to_f64_lossy(), mode.to_f64_lossy(), b.to_f64_lossy());
                if xf <= c {
                    (xf - a) * (xf - a) / ((b - a) * (c - a))
                } else {
                    1.0 - (b - xf) * (b - xf) / ((b - a) * (b - c))
                }
            }
            Parametric::TruncatedNormal { mean, sd, lo, hi } => {
                let (m, s) = (mean.to_f64_lossy(), sd.to_f64_lossy());
                let f = |t: f64| std_normal_cdf((t - m) / s);
                let (flo, fhi) = (f(lo.to_f64_lossy()), f(hi.to_f64_lossy()));
                (f(xf) - flo) / (fhi - flo)
            }
            Parametric::TruncatedGumbel { loc, scale, lo, hi } => {
                let (l, s) = (loc.to_f64_lossy(), scale.to_f64_lossy());
                let f = |t: f64| gumbel_cdf((t - l) / s);
                let (flo, fhi) = (f(lo.to_f64_lossy()), f(hi.to_f64_lossy()));
                (f(xf) - flo) / (fhi - flo)
            }
        };
        T::lit(v.clamp(0.0, 1.0))
    }

    pub fn quantile(&self, m: T) -> T {
        let (lo, hi) = self.support();
        if m <= T::zero() {
            return lo;
        }
        if m >= T::one() {
            return hi;
        }
        match *self {
            Parametric::Uniform { a, b } => a + m * (b - a),
            Parametric::Triangular { a, mode, b } => {
                let split = (mode - a) / (b - a);
                if m < split {
                    a + (m * (b - a) * (mode - a)).sqrt()
                } else {
                    b - ((T::one() - m) * (b - a) * (b - mode)).sqrt()
                }
            }
            _ => self.bisect_quantile(m),
        }
    }

    /// Generalized inverse by bisection on the CDF to 1e-12 in `x`.
    fn bisect_quantile(&self, m: T) -> T {
        let (lo, hi) = self.support();
        let (mut a, mut b) = (lo, hi);
        let tol = T::tol(1e-12);
        let half = T::lit(0.5);
        for _ in 0..200 {
            if b - a <= tol {
                break;
            }
            let mid = a + (b - a) * half;
            if mid <= a || mid >= b {
                break;
            }
            if self.cdf(mid) >= m {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    }

    fn quantile_breakpoints(&self) -> Vec<T> {
        match *self {
            Parametric::Triangular { a, mode, b } => vec![(mode - a) / (b - a)],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Marginal<T> {
    Discrete(DiscreteMarginal<T>),
    PiecewiseLinearQuantile(PiecewiseLinearQuantile<T>),
    Parametric(Parametric<T>),
}

impl<T: Scalar> From<DiscreteMarginal<T>> for Marginal<T> {
    fn from(d: DiscreteMarginal<T>) -> Self {
        Marginal::Discrete(d)
    }
}

impl<T: Scalar> Marginal<T> {
    pub fn uniform(a: T, b: T) -> Result<Self> {
        Self::parametric(Parametric::Uniform { a, b })
    }

    pub fn parametric(p: Parametric<T>) -> Result<Self> {
        p.validate()?;
        Ok(Marginal::Parametric(p))
    }

    pub fn dirac(x: T) -> Self {
        Marginal::Discrete(DiscreteMarginal::dirac(x))
    }

    pub fn quantile(&self, m: T) -> T {
        match self {
            Marginal::Discrete(d) => d.quantile(m),
            Marginal::PiecewiseLinearQuantile(q) => q.quantile(m),
            Marginal::Parametric(p) => p.quantile(m),
        }
    }

    pub fn cdf(&self, x: T) -> T {
        match self {
            Marginal::Discrete(d) => d.cdf(x),
            Marginal::PiecewiseLinearQuantile(q) => q.cdf(x),
            Marginal::Parametric(p) => p.cdf(x),
        }
    }

    pub fn support(&self) -> (T, T) {
        match self {
            Marginal::Discrete(d) => (d.locations[0], d.locations[d.len() - 1]),
            Marginal::PiecewiseLinearQuantile(q) => (q.knots[0].1, q.knots[q.knots.len() - 1].1),
            Marginal::Parametric(p) => p.support(),
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteMarginal<T>> {
        match self {
            Marginal::Discrete(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Marginal::Discrete(_))
    }

    /// Interior levels `m` where the quantile jumps or loses smoothness.
    pub fn quantile_breakpoints(&self) -> Vec<T> {
        match self {
            Marginal::Discrete(d) => d.cumulative[..d.len() - 1].to_vec(),
            Marginal::PiecewiseLinearQuantile(q) => {
                q.knots[1..q.knots.len() - 1].iter().map(|k| k.0).collect()
            }
            Marginal::Parametric(p) => p.quantile_breakpoints(),
        }
    }

    /// `n` equal-weight atoms at the mid-level quantiles `(k - 1/2)/n`.
    pub fn discretize(&self, n: usize) -> Result<DiscreteMarginal<T>> {
        if n == 0 {
            return Err(Error::invalid("discretization needs n >= 1"));
        }
        let nf = T::from_usize(n).expect("usize");
        let w = T::one() / nf;
        let half = T::lit(0.5);
        DiscreteMarginal::new((1..=n).map(|k| {
            let m = (T::from_usize(k).expect("usize") - half) / nf;
            (self.quantile(m), w)
        }))
    }

    /// Translates the distribution by `delta`.
    pub fn shifted(&self, delta: T) -> Result<Self> {
        Ok(match self {
            Marginal::Discrete(d) => Marginal::Discrete(d.map_locations(|x| x + delta)?),
            Marginal::PiecewiseLinearQuantile(q) => Marginal::PiecewiseLinearQuantile(
                PiecewiseLinearQuantile::new(q.knots.iter().map(|&(m, x)| (m, x + delta)).collect())?,
            ),
            Marginal::Parametric(p) => Marginal::Parametric(match *p {
                Parametric::Uniform { a, b } => Parametric::Uniform {
                    a: a + delta,
                    b: b + delta,
                },
                Parametric::TruncatedNormal { mean, sd, lo, hi } => Parametric::TruncatedNormal {
                    mean: mean + delta,
                    sd,
                    lo: lo + delta,
                    hi: hi + delta,
                },
                Parametric::Triangular { a, mode, b } => Parametric::Triangular {
                    a: a + delta,
                    mode: mode + delta,
                    b: b + delta,
                },
                Parametric::TruncatedGumbel { loc, scale, lo, hi } => {
                    Parametric::TruncatedGumbel {
                        loc: loc + delta,
                        scale,
                        lo: lo + delta,
                        hi: hi + delta,
                    }
                }
            }),
        })
    }
}

/// `W_p(μ, ν) = ‖F_μ⁻¹ − F_ν⁻¹‖_{L^p([0,1])}`; exact when both are discrete.
pub fn wasserstein_1d<T: Scalar>(mu: &Marginal<T>, nu: &Marginal<T>, p: T) -> Result<T> {
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::invalid(format!("wasserstein order must be >= 1, got {p}")));
    }
    let mut bps = mu.quantile_breakpoints();
    bps.extend(nu.quantile_breakpoints());
    let bps = merge_breakpoints(bps, T::epsilon() * T::lit(4.0));
    let integrand = |m: T| Ok((mu.quantile(m) - nu.quantile(m)).abs().powf(p));
    let total = if mu.is_discrete() && nu.is_discrete() {
        // quantiles are constant between consecutive breakpoints
        let half = T::lit(0.5);
        let terms: Vec<T> = bps
            .windows(2)
            .map(|w| integrand((w[0] + w[1]) * half).map(|v: T| v * (w[1] - w[0])))
            .collect::<Result<_>>()?;
        crate::scalar::pairwise_sum(&terms)
    } else {
        quadrature::integrate(integrand, &bps, QuadratureOptions::default())?
    };
    let w = total.max(T::zero()).powf(T::one() / p);
    if !w.is_finite() {
        return Err(Error::NonFinite("wasserstein distance".into()));
    }
    Ok(w)
}
