//! Closed-form worst case for compatible payouts.
//!
//! Every variable is driven by one uniform level `m`: `G_i(m) = F_i⁻¹(m)` on
//! the `+` side and `F_i⁻¹(1 − m)` on the `−` side. The optimal value is
//! `∫₀¹ α(m) b(G(m)) dm`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::marginals::{DiscreteMarginal, Marginal};
use crate::mmot::Coupling;
use crate::payout::{
    classify_compatibility, mixed_partial_signs, Partition, Payout, Side, SignStructure, Verdict,
};
use crate::quadrature::{self, QuadratureOptions};
use crate::scalar::{merge_breakpoints, pairwise_sum, Scalar};
use crate::spectral::{spectral_risk, SpectralFunction};

/// `m ↦ F⁻¹(m)` or `m ↦ F⁻¹(1 − m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileMap<T> {
    pub marginal: Marginal<T>,
    pub side: Side,
}

impl<T: Scalar> QuantileMap<T> {
    pub fn eval(&self, m: T) -> T {
        match self.side {
            Side::Plus => self.marginal.quantile(m),
            Side::Minus => self.marginal.quantile(T::one() - m),
        }
    }

    /// Levels where the map jumps or bends.
    pub fn breakpoints(&self) -> Vec<T> {
        let bps = self.marginal.quantile_breakpoints();
        match self.side {
            Side::Plus => bps,
            Side::Minus => bps.into_iter().map(|m| T::one() - m).collect(),
        }
    }
}

/// The maps `G_1, …, G_d` for a partition of `{0..d}`.
pub fn build_g<T: Scalar>(marginals: &[Marginal<T>], partition: &Partition) -> Result<Vec<QuantileMap<T>>> {
    if partition.arity() != marginals.len() {
        return Err(Error::invalid(format!(
            "partition covers {} variables but {} marginals were given",
            partition.arity(),
            marginals.len()
        )));
    }
    Ok(marginals
        .iter()
        .enumerate()
        .map(|(i, m)| QuantileMap {
            marginal: m.clone(),
            side: partition.side(i + 1),
        })
        .collect())
}

/// Integrates `f` over `[0, 1]` split at `bps`. With `exact`, `f` is at most
/// linear between breakpoints and the midpoint rule is used.
pub(crate) fn integrate_levels<T, F>(
    bps: Vec<T>,
    exact: bool,
    f: F,
    opts: QuadratureOptions,
) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> Result<T> + Sync,
{
    let bps = merge_breakpoints(bps, T::epsilon() * T::lit(4.0));
    if exact {
        let half = T::lit(0.5);
        let terms = bps
            .windows(2)
            .map(|w| f((w[0] + w[1]) * half).map(|v| v * (w[1] - w[0])))
            .collect::<Result<Vec<_>>>()?;
        Ok(pairwise_sum(&terms))
    } else {
        quadrature::integrate(f, &bps, opts)
    }
}

fn point_at<T: Scalar>(g: &[QuantileMap<T>], m: T) -> Vec<T> {
    g.iter().map(|gi| gi.eval(m)).collect()
}

/// `∫₀¹ α(m) b(G_1(m), …, G_d(m)) dm`, exact when every marginal is discrete.
pub fn optimal_value<T: Scalar>(
    alpha: &SpectralFunction<T>,
    b: &Payout,
    g: &[QuantileMap<T>],
    opts: QuadratureOptions,
) -> Result<T> {
    let mut bps = alpha.breakpoints();
    for gi in g {
        bps.extend(gi.breakpoints());
    }
    let exact = g.iter().all(|gi| gi.marginal.is_discrete());
    integrate_levels(
        bps,
        exact,
        |m| Ok(alpha.eval(m) * b.eval(&point_at(g, m))?),
        opts,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComonotoneOptions {
    /// Probe points per axis for the sign classification.
    pub grid_per_axis: usize,
    /// Rows in the emitted `(m, G(m), b)` table.
    pub sample_points: usize,
    pub quadrature: QuadratureOptions,
    /// Skip the hypothesis checks for a user-supplied partition.
    pub trust_partition: bool,
}

impl Default for ComonotoneOptions {
    fn default() -> Self {
        Self {
            grid_per_axis: 5,
            sample_points: 101,
            quadrature: QuadratureOptions::default(),
            trust_partition: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow<T> {
    pub m: T,
    pub x: Vec<T>,
    pub b: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComonotoneSolution<T> {
    pub maps: Vec<QuantileMap<T>>,
    pub value: T,
    pub partition: Partition,
    pub verdict: Verdict,
    pub signs: SignStructure,
    /// `a = μ0({0})`, the Lebesgue measure of `{α = 0}`.
    pub alpha_zero_mass: T,
    /// `G_i(a)` when `a > 0`: the levels separating the region that α ignores.
    pub region_boundaries: Option<Vec<T>>,
    pub unique_off_alpha_zero: bool,
    /// True when the value is a finite sum rather than a quadrature.
    pub exact: bool,
    pub support_sample: Vec<SampleRow<T>>,
    /// `m ↦ b(G(m))` was nondecreasing on the sample.
    pub composition_nondecreasing: bool,
}

impl<T: Scalar> ComonotoneSolution<T> {
    /// Columns `m, <variable names>, b`.
    pub fn write_support_csv<W: Write>(&self, writer: W, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["m".to_string()];
        header.extend(names.iter().cloned());
        header.push("b".into());
        w.write_record(&header)?;
        for row in &self.support_sample {
            let mut rec = vec![row.m.to_f64_lossy().to_string()];
            rec.extend(row.x.iter().map(|v| v.to_f64_lossy().to_string()));
            rec.push(row.b.to_f64_lossy().to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves with signs estimated from `b` on its domain box.
pub fn solve_compatible<T: Scalar>(
    alpha: &SpectralFunction<T>,
    b: &Payout,
    marginals: &[Marginal<T>],
    partition: Option<&Partition>,
    opts: &ComonotoneOptions,
) -> Result<ComonotoneSolution<T>> {
    let signs = mixed_partial_signs(b, opts.grid_per_axis)?;
    solve_with_signs(alpha, b, marginals, &signs, partition, opts)
}

/// Solves with a given sign structure (estimated or declared).
pub fn solve_with_signs<T: Scalar>(
    alpha: &SpectralFunction<T>,
    b: &Payout,
    marginals: &[Marginal<T>],
    signs: &SignStructure,
    partition: Option<&Partition>,
    opts: &ComonotoneOptions,
) -> Result<ComonotoneSolution<T>> {
    let d = b.arity();
    if marginals.len() != d || signs.arity() != d {
        return Err(Error::invalid(format!(
            "payout has {d} variables, {} marginals and a {}-variable sign structure were given",
            marginals.len(),
            signs.arity()
        )));
    }
    // with constant α the extra marginal is a point mass and imposes nothing
    let lifted = !alpha.is_constant();
    let (auto, verdict) = classify_compatibility(signs, lifted);

    let partition = match partition {
        Some(p) => {
            if !opts.trust_partition {
                check_partition(b, signs, p, lifted)?;
            }
            p.clone()
        }
        None => match (&verdict, auto) {
            (_, Some(p)) => p,
            (Verdict::Incompatible { witness, point, reason }, None) => {
                let mut msg = format!("{reason}; witness nodes {witness:?}");
                if let Some(pt) = point {
                    msg.push_str(&format!(" near {pt:?}"));
                }
                if opts.trust_partition {
                    Partition::all_plus(d)
                } else {
                    return Err(Error::Incompatible { witness: msg });
                }
            }
            _ => unreachable!("a compatible verdict always carries a partition"),
        },
    };

    let maps = build_g(marginals, &partition)?;
    let value = optimal_value(alpha, b, &maps, opts.quadrature)?;
    let exact = maps.iter().all(|g| g.marginal.is_discrete());

    let a = alpha.zero_set_measure();
    let region_boundaries = (a > T::zero()).then(|| point_at(&maps, a));

    let n = opts.sample_points.max(2);
    let nf = T::from_usize(n).expect("usize");
    let mut support_sample = Vec::with_capacity(n);
    for k in 0..n {
        let m = (T::from_usize(k).expect("usize") + T::lit(0.5)) / nf;
        let x = point_at(&maps, m);
        let v = b.eval(&x)?;
        support_sample.push(SampleRow { m, x, b: v });
    }
    let scale = support_sample
        .iter()
        .fold(T::zero(), |s, r| s.max(r.b.abs()));
    let slack = T::tol(1e-12) * (T::one() + scale);
    let composition_nondecreasing = support_sample.windows(2).all(|w| w[1].b >= w[0].b - slack);

    Ok(ComonotoneSolution {
        maps,
        value,
        unique_off_alpha_zero: verdict == Verdict::StrictlyCompatible,
        partition,
        verdict,
        signs: signs.clone(),
        alpha_zero_mass: a,
        region_boundaries,
        exact,
        support_sample,
        composition_nondecreasing,
    })
}

fn check_partition(b: &Payout, signs: &SignStructure, p: &Partition, lifted: bool) -> Result<()> {
    let d = b.arity();
    if p.arity() != d {
        return Err(Error::invalid("partition does not match the payout arity"));
    }
    let name = |i: usize| b.names()[i].clone();
    if lifted {
        for i in 0..d {
            let mono = signs.monotonicity[i];
            let ok = match p.side(i + 1) {
                Side::Plus => mono.is_nondecreasing(),
                Side::Minus => mono.is_nonincreasing(),
            };
            if !ok {
                return Err(Error::HypothesisViolation {
                    variable: name(i),
                    reason: format!(
                        "payout is {} in it but the variable is on the {} side",
                        mono.label(),
                        if p.side(i + 1) == Side::Plus { "+" } else { "-" }
                    ),
                });
            }
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            let s = signs.sigma[i][j];
            let same = p.side(i + 1) == p.side(j + 1);
            let dir = s.direction();
            let bad = s == crate::payout::Sign::Mixed || (same && dir < 0) || (!same && dir > 0);
            if bad {
                return Err(Error::HypothesisViolation {
                    variable: format!("{} and {}", name(i), name(j)),
                    reason: format!(
                        "their interaction has sign {s} but they are on {} sides",
                        if same { "the same" } else { "opposite" }
                    ),
                });
            }
        }
    }
    Ok(())
}

/// `ℛ_α(b_#γ)` for a discrete coupling of one-dimensional marginals.
pub fn coupling_risk<T: Scalar>(
    alpha: &SpectralFunction<T>,
    b: &Payout,
    coupling: &Coupling<T>,
) -> Result<T> {
    let mut atoms = Vec::with_capacity(coupling.support().len());
    for (t, w) in coupling.support() {
        if *w > T::zero() {
            let x = coupling
                .point(t)
                .ok_or_else(|| Error::invalid("coupling has no atom locations"))?;
            atoms.push((b.eval(&x)?, *w));
        }
    }
    let pushed = DiscreteMarginal::normalized(atoms)?;
    spectral_risk(alpha, &Marginal::Discrete(pushed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn es(m0: f64) -> SpectralFunction<f64> {
        SpectralFunction::expected_shortfall(m0).unwrap()
    }

    #[test]
    fn maps_follow_the_partition() {
        let u = Marginal::<f64>::uniform(0.0, 1.0).unwrap();
        let g = build_g(&[u.clone()], &Partition::with_minus(1, &[1]).unwrap()).unwrap();
        assert!((g[0].eval(0.3) - 0.7).abs() < 1e-15);
        let dirac = Marginal::dirac(4.0);
        for p in [Partition::all_plus(1), Partition::with_minus(1, &[1]).unwrap()] {
            let g = build_g(&[dirac.clone()], &p).unwrap();
            assert_eq!(g[0].eval(0.1), 4.0);
            assert_eq!(g[0].eval(0.9), 4.0);
        }
    }

    #[test]
    fn closed_form_examples() {
        let u = Marginal::<f64>::uniform(0.0, 1.0).unwrap();
        let one = SpectralFunction::<f64>::constant(1.0).unwrap();
        let b = Payout::parse("x1", vec![(0.0, 1.0)]).unwrap();
        let s = solve_compatible(&one, &b, &[u.clone()], None, &Default::default()).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12);

        let b = Payout::parse("x1*x2", vec![(0.0, 1.0); 2]).unwrap();
        let s = solve_compatible(&es(0.5), &b, &[u.clone(), u], None, &Default::default()).unwrap();
        assert!((s.value - 7.0 / 12.0).abs() < 1e-10);
        assert_eq!(s.verdict, Verdict::StrictlyCompatible);
        assert!(s.unique_off_alpha_zero);
        assert_eq!(s.alpha_zero_mass, 0.5);
        let r = s.region_boundaries.unwrap();
        assert!((r[0] - 0.5).abs() < 1e-12 && (r[1] - 0.5).abs() < 1e-12);
        assert!(s.composition_nondecreasing);
    }

    #[test]
    fn sum_payout_is_additive() {
        let m1 = Marginal::Discrete(
            DiscreteMarginal::new([(0.0, 0.2), (1.0, 0.5), (3.0, 0.3)]).unwrap(),
        );
        let m2 = Marginal::<f64>::uniform(-1.0, 2.0).unwrap();
        let m3 = Marginal::Discrete(DiscreteMarginal::new([(5.0, 0.6), (6.0, 0.4)]).unwrap());
        let marg = [m1, m2, m3];
        let b = Payout::parse("x1 + x2 + x3", vec![(0.0, 3.0), (-1.0, 2.0), (5.0, 6.0)]).unwrap();
        let alpha = es(0.25);
        let s = solve_compatible(&alpha, &b, &marg, None, &Default::default()).unwrap();
        let sum: f64 = marg.iter().map(|m| spectral_risk(&alpha, m).unwrap()).sum();
        assert!((s.value - sum).abs() < 1e-10);
        assert_eq!(s.verdict, Verdict::WeaklyCompatible);
    }

    #[test]
    fn refusals() {
        let u = Marginal::<f64>::uniform(0.0, 1.0).unwrap();
        let b = Payout::parse("-(x1 - x2)^2", vec![(0.0, 1.0); 2]).unwrap();
        let r = solve_compatible(&es(0.5), &b, &[u.clone(), u.clone()], None, &Default::default());
        assert!(matches!(r, Err(Error::Incompatible { .. })));

        let b = Payout::parse("x1 - x2", vec![(0.0, 1.0); 2]).unwrap();
        let wrong = Partition::all_plus(2);
        let r = solve_compatible(&es(0.5), &b, &[u.clone(), u], Some(&wrong), &Default::default());
        match r {
            Err(Error::HypothesisViolation { variable, .. }) => assert_eq!(variable, "x2"),
            other => panic!("expected a hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn flipping_a_supermodular_variable_lowers_the_value() {
        let m1 = Marginal::Discrete(DiscreteMarginal::new([(0.5, 0.3), (1.0, 0.3), (2.0, 0.4)]).unwrap());
        let m2 = Marginal::Discrete(DiscreteMarginal::new([(1.0, 0.5), (1.5, 0.25), (3.0, 0.25)]).unwrap());
        let b = Payout::parse("x1*x2", vec![(0.5, 2.0), (1.0, 3.0)]).unwrap();
        let alpha = SpectralFunction::<f64>::constant(1.0).unwrap();
        let marg = [m1, m2];
        let opts = ComonotoneOptions {
            trust_partition: true,
            ..Default::default()
        };
        let best = solve_compatible(&alpha, &b, &marg, None, &opts).unwrap().value;
        let flipped = Partition::with_minus(2, &[2]).unwrap();
        let worse = solve_compatible(&alpha, &b, &marg, Some(&flipped), &opts).unwrap().value;
        assert!(worse < best - 1e-6);
    }

    #[test]
    fn support_table_csv() {
        let u = Marginal::<f64>::uniform(0.0, 1.0).unwrap();
        let b = Payout::parse("x1", vec![(0.0, 1.0)]).unwrap();
        let opts = ComonotoneOptions {
            sample_points: 3,
            ..Default::default()
        };
        let s = solve_compatible(&es(0.5), &b, &[u], None, &opts).unwrap();
        let mut buf = Vec::new();
        s.write_support_csv(&mut buf, b.names()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "m,x1,b");
        assert_eq!(text.lines().count(), 4);
    }
}
