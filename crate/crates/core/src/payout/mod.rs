//! Payout expressions `b(x1, …, xd)`: parsing, evaluation and sign structure.

mod parser;
mod signs;

pub use parser::{parse_expr, BinOp, Expr, Func, ParseError};
pub use signs::{
    classify_compatibility, mixed_partial_signs, twist_condition_check, Monotonicity, Partition,
    Side, Sign, SignStructure, TwistReport, Verdict,
};
pub(crate) use signs::{gradient_at, probe_grid};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probe points per axis used to validate finiteness on construction.
const VALIDATION_GRID: usize = 3;
const VALIDATION_LIMIT: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Payout {
    expr: Expr,
    names: Vec<String>,
    domain: Vec<(f64, f64)>,
}

impl Payout {
    /// Parses `src` over variables `x1..xd` on the box `domain` (one interval per variable).
    pub fn parse(src: &str, domain: Vec<(f64, f64)>) -> Result<Self> {
        let names = (1..=domain.len()).map(|i| format!("x{i}")).collect();
        Self::parse_named(src, names, domain)
    }

    /// Like [`Payout::parse`] with custom variable names.
    pub fn parse_named(src: &str, names: Vec<String>, domain: Vec<(f64, f64)>) -> Result<Self> {
        if names.len() != domain.len() {
            return Err(Error::invalid(format!(
                "{} variable names for a {}-dimensional domain",
                names.len(),
                domain.len()
            )));
        }
        let expr = parse_expr(src, &names)?;
        Self::from_expr(expr, names, domain)
    }

    pub fn from_expr(expr: Expr, names: Vec<String>, domain: Vec<(f64, f64)>) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::invalid("payout needs at least one variable"));
        }
        for (i, &(lo, hi)) in domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!(
                    "domain interval {} = [{lo}, {hi}] is not a bounded interval",
                    i + 1
                )));
            }
        }
        if let Some(v) = expr.max_var() {
            if v >= domain.len() {
                return Err(Error::invalid(format!("variable index {} out of range", v + 1)));
            }
        }
        let b = Self {
            expr,
            names,
            domain,
        };
        b.validate_finite()?;
        Ok(b)
    }

    fn validate_finite(&self) -> Result<()> {
        let d = self.arity();
        let g = if VALIDATION_GRID.checked_pow(d as u32).is_some_and(|n| n <= VALIDATION_LIMIT) {
            VALIDATION_GRID
        } else {
            2
        };
        let total = g.checked_pow(d as u32).unwrap_or(usize::MAX);
        if total > VALIDATION_LIMIT {
            // too many grid points; check the center only
            let center: Vec<f64> = self.domain.iter().map(|&(l, h)| 0.5 * (l + h)).collect();
            self.eval(&center)?;
            return Ok(());
        }
        let mut x = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            for (k, &(lo, hi)) in self.domain.iter().enumerate() {
                let j = r % g;
                r /= g;
                x[k] = lo + (hi - lo) * j as f64 / (g - 1) as f64;
            }
            self.eval(&x)?;
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.domain.len()
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Fully parenthesized source that re-parses to the same tree.
    pub fn source(&self) -> String {
        self.expr.render(&self.names)
    }

    /// Evaluates at `x`, which must lie in the domain box.
    pub fn eval<T: Scalar>(&self, x: &[T]) -> Result<T> {
        self.check_point(x)?;
        self.eval_unchecked(x)
    }

    /// Evaluates without the domain check (finite-difference stencils may step
    /// slightly outside a degenerate box).
    pub fn eval_unchecked<T: Scalar>(&self, x: &[T]) -> Result<T> {
        let v = eval_node(&self.expr, x, &mut None).map_err(|reason| Error::Evaluation {
            point: x.iter().map(|v| v.to_f64_lossy()).collect(),
            reason,
        })?;
        Ok(v)
    }

    /// Value plus the branch taken by every `abs`/`max`/`min`/`relu` node.
    pub(crate) fn eval_branches(&self, x: &[f64]) -> Result<(f64, Vec<u32>)> {
        let mut br = Some(Vec::new());
        let v = eval_node(&self.expr, x, &mut br).map_err(|reason| Error::Evaluation {
            point: x.to_vec(),
            reason,
        })?;
        Ok((v, br.unwrap_or_default()))
    }

    fn check_point<T: Scalar>(&self, x: &[T]) -> Result<()> {
        if x.len() != self.arity() {
            return Err(Error::invalid(format!(
                "payout expects {} arguments, got {}",
                self.arity(),
                x.len()
            )));
        }
        for (&v, &(lo, hi)) in x.iter().zip(&self.domain) {
            let v = v.to_f64_lossy();
            let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
            if !(v >= lo - slack && v <= hi + slack) {
                return Err(Error::OutOfDomain {
                    point: x.iter().map(|v| v.to_f64_lossy()).collect(),
                });
            }
        }
        Ok(())
    }

    /// Same payout on a new box (re-validated).
    pub fn with_domain(&self, domain: Vec<(f64, f64)>) -> Result<Self> {
        if domain.len() != self.arity() {
            return Err(Error::invalid("domain arity mismatch"));
        }
        Self::from_expr(self.expr.clone(), self.names.clone(), domain)
    }

    /// The payout in the variable `y_i = −x_i`.
    pub fn with_flipped_variable(&self, i: usize) -> Result<Self> {
        if i >= self.arity() {
            return Err(Error::invalid(format!("variable index {} out of range", i + 1)));
        }
        let expr = self.expr.substitute(&|k| {
            if k == i {
                Expr::Neg(Box::new(Expr::Var(k)))
            } else {
                Expr::Var(k)
            }
        });
        let mut domain = self.domain.clone();
        domain[i] = (-self.domain[i].1, -self.domain[i].0);
        Self::from_expr(expr, self.names.clone(), domain)
    }

    /// Renames variables: old variable `k` becomes variable `perm[k]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let d = self.arity();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("relabeling must be a permutation"));
        }
        let expr = self.expr.substitute(&|k| Expr::Var(perm[k]));
        let mut names = vec![String::new(); d];
        let mut domain = vec![(0.0, 0.0); d];
        for k in 0..d {
            names[perm[k]] = self.names[k].clone();
            domain[perm[k]] = self.domain[k];
        }
        Self::from_expr(expr, names, domain)
    }
}

fn finite<T: Scalar>(v: T, what: &str) -> std::result::Result<T, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} produced a non-finite value"))
    }
}

fn mark(branches: &mut Option<Vec<u32>>, b: u32) {
    if let Some(v) = branches.as_mut() {
        v.push(b);
    }
}

fn eval_node<T: Scalar>(
    e: &Expr,
    x: &[T],
    branches: &mut Option<Vec<u32>>,
) -> std::result::Result<T, String> {
    match e {
        Expr::Const(c) => Ok(T::lit(*c)),
        Expr::Var(i) => x.get(*i).copied().ok_or_else(|| format!("missing x{}", i + 1)),
        Expr::Neg(a) => Ok(-eval_node(a, x, branches)?),
        Expr::Binary(op, a, b) => {
            let u = eval_node(a, x, branches)?;
            let v = eval_node(b, x, branches)?;
            match op {
                BinOp::Add => finite(u + v, "addition"),
                BinOp::Sub => finite(u - v, "subtraction"),
                BinOp::Mul => finite(u * v, "multiplication"),
                BinOp::Div => {
                    if v == T::zero() {
                        Err("division by zero".into())
                    } else {
                        finite(u / v, "division")
                    }
                }
                BinOp::Pow => {
                    if u < T::zero() && v.fract() != T::zero() {
                        return Err(format!(
                            "negative base {} with non-integer exponent {}",
                            u.to_f64_lossy(),
                            v.to_f64_lossy()
                        ));
                    }
                    if u == T::zero() && v < T::zero() {
                        return Err("zero raised to a negative power".into());
                    }
                    finite(u.powf(v), "power")
                }
            }
        }
        Expr::Call(f, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_node(a, x, branches)?);
            }
            let u = vals[0];
            match f {
                Func::Sqrt => {
                    if u < T::zero() {
                        Err(format!("sqrt of negative value {}", u.to_f64_lossy()))
                    } else {
                        Ok(u.sqrt())
                    }
                }
                Func::Exp => finite(u.exp(), "exp"),
                Func::Log => {
                    if u <= T::zero() {
                        Err(format!("log of non-positive value {}", u.to_f64_lossy()))
                    } else {
                        Ok(u.ln())
                    }
                }
                Func::Abs => {
                    mark(branches, u32::from(u >= T::zero()));
                    Ok(u.abs())
                }
                Func::Relu => {
                    mark(branches, u32::from(u > T::zero()));
                    Ok(u.max(T::zero()))
                }
                Func::Max | Func::Min => {
                    let mut best = 0;
                    for (k, &v) in vals.iter().enumerate().skip(1) {
                        let better = match f {
                            Func::Max => v > vals[best],
                            _ => v < vals[best],
                        };
                        if better {
                            best = k;
                        }
                    }
                    mark(branches, best as u32);
                    Ok(vals[best])
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); d]
    }

    #[test]
    fn evaluates_basic_payouts() {
        let b = Payout::parse("x1 + x2 + x3", vec![(0.0, 5.0); 3]).unwrap();
        assert_eq!(b.eval(&[1.0, 2.0, 3.0]).unwrap(), 6.0);
        let b = Payout::parse("max(x1 + x2 - 1, 0)", unit(2)).unwrap();
        assert_eq!(b.eval(&[0.4, 0.4]).unwrap(), 0.0);
        let b = Payout::parse("x1*x2", vec![(0.0, 5.0); 2]).unwrap();
        assert_eq!(b.eval(&[3.0, 4.0]).unwrap(), 12.0);
        let b = Payout::parse("-(x1 - x2)^2", unit(2)).unwrap();
        assert_eq!(b.eval(&[0.3, 0.3]).unwrap(), 0.0);
        let b = Payout::parse("(x1 + x2)^2", vec![(0.0, 3.0); 2]).unwrap();
        assert_eq!(b.eval(&[1.0, 2.0]).unwrap(), 9.0);
        assert_eq!(b.eval(&[1.0f32, 2.0]).unwrap(), 9.0f32);
    }

    #[test]
    fn domain_and_evaluation_errors() {
        let b = Payout::parse("x1*x2", unit(2)).unwrap();
        assert!(matches!(b.eval(&[2.0, 0.5]), Err(Error::OutOfDomain { .. })));
        assert!(b.eval(&[0.5]).is_err());
        assert!(matches!(
            Payout::parse("log(x1)", unit(1)),
            Err(Error::Evaluation { .. })
        ));
        assert!(matches!(
            Payout::parse("1/(x1 - 0.5)", unit(1)),
            Err(Error::Evaluation { .. })
        ));
        assert!(matches!(Payout::parse("x1 +", unit(1)), Err(Error::Parse(_))));
        assert!(Payout::parse("x1", vec![(1.0, 0.0)]).is_err());
    }

    #[test]
    fn flipping_and_relabeling_preserve_values() {
        let b = Payout::parse("x1 * exp(x2) - x3", vec![(0.0, 1.0), (1.0, 2.0), (2.0, 4.0)])
            .unwrap();
        let f = b.with_flipped_variable(1).unwrap();
        assert_eq!(f.domain()[1], (-2.0, -1.0));
        let v = b.eval(&[0.5, 1.5, 3.0]).unwrap();
        assert_eq!(f.eval(&[0.5, -1.5, 3.0]).unwrap(), v);
        let r = b.relabeled(&[2, 0, 1]).unwrap();
        assert_eq!(r.names(), &["x2", "x3", "x1"]);
        assert_eq!(r.eval(&[1.5, 3.0, 0.5]).unwrap(), v);
        assert!(b.relabeled(&[0, 0, 1]).is_err());
    }

    #[test]
    fn named_variables_and_source_round_trip() {
        let names = vec!["q".to_string(), "k".to_string()];
        let b = Payout::parse_named("(q/k)^0.6", names.clone(), vec![(1.0, 2.0); 2]).unwrap();
        let again = Payout::parse_named(&b.source(), names, vec![(1.0, 2.0); 2]).unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn branch_signatures_track_kinks() {
        let b = Payout::parse("max(x1 - 0.5, 0) + abs(x2 - 0.5)", unit(2)).unwrap();
        let (_, lo) = b.eval_branches(&[0.2, 0.2]).unwrap();
        let (_, hi) = b.eval_branches(&[0.8, 0.2]).unwrap();
        assert_ne!(lo, hi);
    }
}
