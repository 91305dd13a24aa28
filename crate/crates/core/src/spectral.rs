//! Spectral functions, spectral risk measures and the induced spectral measure.

use std::io::Read;

use crate::error::{Error, Result};
use crate::marginals::{DiscreteMarginal, Marginal};
use crate::mmot::{self, LpOptions};
use crate::quadrature::{self, QuadratureOptions};
use crate::scalar::{merge_breakpoints, pairwise_sum, Scalar};

/// Monotonicity violations up to this size are clamped instead of rejected.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralShape<T> {
    /// Right-continuous steps: value `a_k` on `[m_k, m_{k+1})`, first `m_0 = 0`.
    PiecewiseConstant { steps: Vec<(T, T)> },
    /// Linear interpolation of `(m, value)` knots spanning `[0, 1]`.
    PiecewiseLinear { knots: Vec<(T, T)> },
}

/// A nondecreasing, nonnegative, bounded weight `α` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction<T> {
    shape: SpectralShape<T>,
    normalized: bool,
}

fn clamp_monotone<T: Scalar>(values: &mut [T]) -> Result<()> {
    let slack = T::lit(MONOTONE_SLACK);
    for k in 1..values.len() {
        let (prev, cur) = (values[k - 1], values[k]);
        if cur < prev {
            if prev - cur <= slack {
                values[k] = prev;
            } else {
                return Err(Error::invalid(format!(
                    "spectral function decreases from {prev} to {cur}"
                )));
            }
        }
    }
    Ok(())
}

fn check_values<T: Scalar>(values: &[T]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("spectral function values must be finite"));
    }
    if values[0] < T::zero() {
        return Err(Error::invalid("spectral function must be nonnegative"));
    }
    Ok(())
}

impl<T: Scalar> SpectralFunction<T> {
    pub fn piecewise_constant(steps: Vec<(T, T)>) -> Result<Self> {
        if steps.is_empty() || steps[0].0 != T::zero() {
            return Err(Error::invalid("first step must start at m = 0"));
        }
        for w in steps.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid("step levels must be strictly increasing"));
            }
        }
        if steps[steps.len() - 1].0 >= T::one() {
            return Err(Error::invalid("step levels must lie in [0, 1)"));
        }
        let (ms, mut vals): (Vec<T>, Vec<T>) = steps.into_iter().unzip();
        check_values(&vals)?;
        clamp_monotone(&mut vals)?;
        Ok(Self {
            shape: SpectralShape::PiecewiseConstant {
                steps: ms.into_iter().zip(vals).collect(),
            },
            normalized: false,
        })
    }

    pub fn piecewise_linear(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.len() < 2
            || knots[0].0 != T::zero()
            || knots[knots.len() - 1].0 != T::one()
        {
            return Err(Error::invalid("linear knots must span m = 0 to m = 1"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid("knot levels must be strictly increasing"));
            }
        }
        let (ms, mut vals): (Vec<T>, Vec<T>) = knots.into_iter().unzip();
        check_values(&vals)?;
        clamp_monotone(&mut vals)?;
        Ok(Self {
            shape: SpectralShape::PiecewiseLinear {
                knots: ms.into_iter().zip(vals).collect(),
            },
            normalized: false,
        })
    }

    pub fn constant(value: T) -> Result<Self> {
        Self::piecewise_constant(vec![(T::zero(), value)])
    }

    /// `α = (1/m0)·1_{[1-m0, 1]}`.
    pub fn expected_shortfall(m0: T) -> Result<Self> {
        if !(m0 > T::zero()) || m0 > T::one() {
            return Err(Error::invalid(format!(
                "expected shortfall level must lie in (0, 1], got {m0}"
            )));
        }
        let top = T::one() / m0;
        let steps = if m0 == T::one() {
            vec![(T::zero(), T::one())]
        } else {
            vec![(T::zero(), T::zero()), (T::one() - m0, top)]
        };
        Ok(Self::piecewise_constant(steps)?.flagged_normalized())
    }

    /// Canonicalizes sampled `(m, α(m))` pairs to `pieces` constant pieces, each
    /// taking the interpolated sample value at its midpoint.
    pub fn from_samples(samples: &[(T, T)], pieces: usize) -> Result<Self> {
        if samples.is_empty() || pieces == 0 {
            return Err(Error::invalid("need samples and at least one piece"));
        }
        let mut s = samples.to_vec();
        if s.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::invalid("samples must be finite"));
        }
        s.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let interp = |m: T| -> T {
            let k = s.partition_point(|p| p.0 <= m);
            if k == 0 {
                return s[0].1;
            }
            if k >= s.len() {
                return s[s.len() - 1].1;
            }
            let (m0, v0) = s[k - 1];
            let (m1, v1) = s[k];
            if m1 == m0 {
                v1
            } else {
                v0 + (v1 - v0) * (m - m0) / (m1 - m0)
            }
        };
        let n = T::from_usize(pieces).expect("usize");
        let half = T::lit(0.5);
        let steps = (0..pieces)
            .map(|k| {
                let kf = T::from_usize(k).expect("usize");
                (kf / n, interp((kf + half) / n))
            })
            .collect();
        Self::piecewise_constant(steps)
    }

    /// Reads `m,value` rows (optional header) and canonicalizes them.
    pub fn samples_from_csv<R: Read>(reader: R, pieces: usize) -> Result<Self> {
        let d = read_pairs(reader)?;
        Self::from_samples(&d, pieces)
    }

    /// Marks α as intended to integrate to one; see [`Self::normalization_warning`].
    pub fn flagged_normalized(mut self) -> Self {
        self.normalized = true;
        self
    }

    pub fn is_flagged_normalized(&self) -> bool {
        self.normalized
    }

    pub fn normalization_warning(&self) -> Option<String> {
        let gap = (self.integral() - T::one()).abs();
        (self.normalized && gap > T::tol(1e-10)).then(|| {
            format!(
                "spectral function flagged normalized but integrates to {}",
                self.integral()
            )
        })
    }

    pub fn shape(&self) -> &SpectralShape<T> {
        &self.shape
    }

    pub fn eval(&self, m: T) -> T {
        match &self.shape {
            SpectralShape::PiecewiseConstant { steps } => {
                let k = steps.partition_point(|s| s.0 <= m);
                steps[k.max(1) - 1].1
            }
            SpectralShape::PiecewiseLinear { knots } => {
                let m = m.max(T::zero()).min(T::one());
                let k = knots.partition_point(|s| s.0 <= m);
                if k >= knots.len() {
                    return knots[knots.len() - 1].1;
                }
                let (m0, v0) = knots[k - 1];
                let (m1, v1) = knots[k];
                v0 + (v1 - v0) * (m - m0) / (m1 - m0)
            }
        }
    }

    /// `M = α(1)`.
    pub fn bound(&self) -> T {
        match &self.shape {
            SpectralShape::PiecewiseConstant { steps } => steps[steps.len() - 1].1,
            SpectralShape::PiecewiseLinear { knots } => knots[knots.len() - 1].1,
        }
    }

    pub fn integral(&self) -> T {
        match &self.shape {
            SpectralShape::PiecewiseConstant { steps } => {
                let mut total = T::zero();
                for (k, &(m, v)) in steps.iter().enumerate() {
                    let end = steps.get(k + 1).map_or(T::one(), |s| s.0);
                    total += v * (end - m);
                }
                total
            }
            SpectralShape::PiecewiseLinear { knots } => knots
                .windows(2)
                .map(|w| (w[0].1 + w[1].1) * T::lit(0.5) * (w[1].0 - w[0].0))
                .sum(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match &self.shape {
            SpectralShape::PiecewiseConstant { steps } => steps.iter().all(|s| s.1 == steps[0].1),
            SpectralShape::PiecewiseLinear { knots } => knots.iter().all(|s| s.1 == knots[0].1),
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self.shape, SpectralShape::PiecewiseConstant { .. })
    }

    /// Interior levels where α jumps or changes slope.
    pub fn breakpoints(&self) -> Vec<T> {
        match &self.shape {
            SpectralShape::PiecewiseConstant { steps } => steps[1..].iter().map(|s| s.0).collect(),
            SpectralShape::PiecewiseLinear { knots } => {
                knots[1..knots.len() - 1].iter().map(|s| s.0).collect()
            }
        }
    }

    /// Lebesgue measure of `{α = 0}`.
    pub fn zero_set_measure(&self) -> T {
        match &self.shape {
            SpectralShape::PiecewiseConstant { steps } => {
                let mut total = T::zero();
                for (k, &(m, v)) in steps.iter().enumerate() {
                    if v == T::zero() {
                        total += steps.get(k + 1).map_or(T::one(), |s| s.0) - m;
                    }
                }
                total
            }
            SpectralShape::PiecewiseLinear { knots } => {
                let mut total = T::zero();
                for w in knots.windows(2) {
                    if w[0].1 == T::zero() && w[1].1 == T::zero() {
                        total += w[1].0 - w[0].0;
                    }
                }
                total
            }
        }
    }
}

pub(crate) fn read_pairs<T: Scalar, R: Read>(reader: R) -> Result<Vec<(T, T)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::invalid(format!("csv row {} needs two columns", i + 1)));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => out.push((T::lit(a), T::lit(b))),
            _ if i == 0 => continue,
            _ => return Err(Error::invalid(format!("csv row {} is not numeric", i + 1))),
        }
    }
    Ok(out)
}

/// `μ0 = α_#Leb_[0,1]` as a discrete measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure<T> {
    pub measure: DiscreteMarginal<T>,
    /// `μ0({0})`, the mass of the level set `{α = 0}`.
    pub atom_at_zero_mass: T,
    /// False when α had to be quantized.
    pub exact: bool,
}

/// Pushes Lebesgue measure forward by α. Exact for piecewise-constant α;
/// otherwise α is sampled at `(k - 1/2)/quantization_n` with weights `1/n`.
pub fn spectral_measure<T: Scalar>(
    alpha: &SpectralFunction<T>,
    quantization_n: usize,
) -> Result<SpectralMeasure<T>> {
    let (measure, exact) = match &alpha.shape {
        SpectralShape::PiecewiseConstant { steps } => {
            let atoms: Vec<(T, T)> = steps
                .iter()
                .enumerate()
                .map(|(k, &(m, v))| (v, steps.get(k + 1).map_or(T::one(), |s| s.0) - m))
                .collect();
            (DiscreteMarginal::new(atoms)?, true)
        }
        SpectralShape::PiecewiseLinear { .. } => {
            if quantization_n == 0 {
                return Err(Error::invalid("quantization needs n >= 1"));
            }
            let n = T::from_usize(quantization_n).expect("usize");
            let half = T::lit(0.5);
            let atoms = (1..=quantization_n).map(|k| {
                let m = (T::from_usize(k).expect("usize") - half) / n;
                (alpha.eval(m), T::one() / n)
            });
            (DiscreteMarginal::new(atoms)?, false)
        }
    };
    let atom_at_zero_mass = measure
        .atoms()
        .find(|a| a.0 == T::zero())
        .map_or(T::zero(), |a| a.1);
    Ok(SpectralMeasure {
        measure,
        atom_at_zero_mass,
        exact,
    })
}

/// `ℛ_α(μ) = ∫₀¹ F_μ⁻¹(m) α(m) dm`.
///
/// With a discrete μ the quantile is constant between breakpoints and α is at
/// most linear there, so the midpoint sum over the common refinement is exact.
pub fn spectral_risk<T: Scalar>(alpha: &SpectralFunction<T>, mu: &Marginal<T>) -> Result<T> {
    let mut bps = alpha.breakpoints();
    bps.extend(mu.quantile_breakpoints());
    let bps = merge_breakpoints(bps, T::epsilon() * T::lit(4.0));
    if mu.is_discrete() {
        let half = T::lit(0.5);
        let terms: Vec<T> = bps
            .windows(2)
            .map(|w| {
                let mid = (w[0] + w[1]) * half;
                mu.quantile(mid) * alpha.eval(mid) * (w[1] - w[0])
            })
            .collect();
        Ok(pairwise_sum(&terms))
    } else {
        quadrature::integrate(
            |m| Ok(mu.quantile(m) * alpha.eval(m)),
            &bps,
            QuadratureOptions::default(),
        )
    }
}

/// Risk as the value of the two-marginal transport between `α_#Leb` and μ with
/// surplus `x·y`, solved by the LP oracle.
pub fn risk_via_ot<T: Scalar>(
    alpha: &SpectralFunction<T>,
    mu: &DiscreteMarginal<T>,
    quantization_n: usize,
) -> Result<T> {
    let mu0 = spectral_measure(alpha, quantization_n)?;
    let sol = mmot::solve_mmot_lp(
        &[mu0.measure, mu.clone()],
        |x: &[T]| Ok(x[0] * x[1]),
        &LpOptions::default(),
    )?
    .require_optimal()?;
    Ok(sol.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn es(m0: f64) -> SpectralFunction<f64> {
        SpectralFunction::expected_shortfall(m0).unwrap()
    }

    #[test]
    fn expected_shortfall_shapes() {
        let one = es(1.0);
        assert!(one.is_constant());
        assert_eq!(one.eval(0.3), 1.0);
        let half = es(0.5);
        assert_eq!(half.eval(0.49), 0.0);
        assert_eq!(half.eval(0.5), 2.0);
        assert_eq!(half.eval(1.0), 2.0);
        let q = es(0.25);
        assert_eq!(q.bound(), 4.0);
        let mu0 = spectral_measure(&q, 1).unwrap();
        assert_eq!(mu0.atom_at_zero_mass, 0.75);
        assert!(SpectralFunction::expected_shortfall(0.0).is_err());
        assert!(SpectralFunction::expected_shortfall(1.5).is_err());
        assert!(q.normalization_warning().is_none());
    }

    #[test]
    fn spectral_measure_examples() {
        let m = spectral_measure(&es(0.5), 1).unwrap();
        assert_eq!(m.measure.locations(), &[0.0, 2.0]);
        assert_eq!(m.measure.weights(), &[0.5, 0.5]);
        let c = spectral_measure(&SpectralFunction::<f64>::constant(1.0).unwrap(), 1).unwrap();
        assert_eq!(c.measure.locations(), &[1.0]);
        let lin = SpectralFunction::piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let q = spectral_measure(&lin, 2).unwrap();
        assert_eq!(q.measure.locations(), &[0.25, 0.75]);
        assert_eq!(q.measure.weights(), &[0.5, 0.5]);
        assert!(!q.exact);
    }

    #[test]
    fn risk_examples() {
        let mu: Marginal<f64> =
            DiscreteMarginal::new([(1.0, 0.2), (2.0, 0.3), (5.0, 0.5)]).unwrap().into();
        let one = SpectralFunction::<f64>::constant(1.0).unwrap();
        assert!((spectral_risk(&one, &mu).unwrap() - 3.3).abs() < 1e-12);
        // 2∫_{1/2}^1 m dm
        let u = Marginal::<f64>::uniform(0.0, 1.0).unwrap();
        assert!((spectral_risk(&es(0.5), &u).unwrap() - 0.75).abs() < 1e-12);
        let dirac = Marginal::dirac(3.5);
        assert!((spectral_risk(&es(0.1), &dirac).unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn risk_via_ot_examples() {
        let one = SpectralFunction::<f64>::constant(1.0).unwrap();
        let d = DiscreteMarginal::<f64>::dirac(2.0);
        assert!((risk_via_ot(&one, &d, 1).unwrap() - 2.0).abs() < 1e-12);
        // 2x2 polytope vertices: comonotone gives 0·0·½ + 2·1·½ = 1, the other 0
        let mu = DiscreteMarginal::new([(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!((risk_via_ot(&es(0.5), &mu, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_clamp_and_rejection() {
        let a = SpectralFunction::piecewise_constant(vec![(0.0, 1.0), (0.5, 1.0 - 1e-13)]).unwrap();
        assert_eq!(a.bound(), 1.0);
        assert!(SpectralFunction::piecewise_constant(vec![(0.0, 1.0), (0.5, 0.5)]).is_err());
        assert!(SpectralFunction::piecewise_constant(vec![(0.0, -1.0)]).is_err());
        assert!(SpectralFunction::piecewise_constant(vec![(0.1, 1.0)]).is_err());
    }

    #[test]
    fn samples_canonicalize_to_grid() {
        let s = vec![(0.0, 0.0), (1.0, 2.0)];
        let a = SpectralFunction::<f64>::from_samples(&s, 4).unwrap();
        assert_eq!(a.eval(0.0), 0.25);
        assert_eq!(a.eval(0.99), 1.75);
        assert!((a.integral() - 1.0).abs() < 1e-15);
        let csv = "m,alpha\n0,0\n1,2\n";
        let b = SpectralFunction::<f64>::samples_from_csv(csv.as_bytes(), 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normalization_flag_warns() {
        let a = SpectralFunction::<f64>::constant(2.0).unwrap().flagged_normalized();
        assert!(a.normalization_warning().is_some());
        let b = SpectralFunction::<f64>::constant(2.0).unwrap();
        assert!(b.normalization_warning().is_none());
    }

    #[test]
    fn linear_alpha_exact_with_discrete_measure() {
        // α(m) = 2m, μ = {0: ½, 1: ½}: ∫_{1/2}^1 2m dm = 3/4
        let lin = SpectralFunction::piecewise_linear(vec![(0.0, 0.0), (1.0, 2.0)]).unwrap();
        let mu: Marginal<f64> = DiscreteMarginal::new([(0.0, 0.5), (1.0, 0.5)]).unwrap().into();
        assert!((spectral_risk(&lin, &mu).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(lin.zero_set_measure(), 0.0);
    }
}
