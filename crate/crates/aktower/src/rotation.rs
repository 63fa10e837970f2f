//! Lift iteration, rotation-number estimation, continued-fraction
//! convergents, and Liouville/Diophantine certificates.
//!
//! Targets are specified in a small text format: `cf:a0,a1,...` (the last
//! coefficient repeats forever, covering eventually-periodic expansions like
//! sqrt(2) or the golden mean), `series:base=B,exponents=factorial|squaring`
//! for sum_k B^-e_k, and `rat:p/q`. Every convergent carries certified exact
//! rational two-sided error bounds; streams end rather than yield an item
//! whose exact bounds would not fit in memory, so a "no certificate" outcome
//! is always budget-limited, never a claim about the target.

use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::real::Real;

/// One rational approximant with certified two-sided error bounds:
/// err_lo <= |tau - p/q| <= err_hi, exactly.
#[derive(Debug, Clone)]
pub struct Convergent {
    pub p: Integer,
    pub q: Integer,
    pub err_lo: Rational,
    pub err_hi: Rational,
}

impl Convergent {
    pub fn value(&self) -> Rational {
        Rational::from((self.p.clone(), self.q.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpFamily {
    /// e_k = k!
    Factorial,
    /// e_1 = 2, e_{k+1} = e_k^2
    Squaring,
}

/// A rotation-number target.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Continued fraction [a0; a1, a2, ...], last coefficient repeating.
    Cf(Vec<Integer>),
    /// sum_{k>=1} base^(-e_k) with exponents from the family.
    Series { base: u32, exponents: ExpFamily },
    /// An exact rational (periodic-orbit baseline).
    Rat(Rational),
}

impl TargetSpec {
    pub fn parse(s: &str) -> Result<TargetSpec> {
        if let Some(rest) = s.strip_prefix("cf:") {
            let coeffs: Result<Vec<Integer>> = rest
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<Integer>()
                        .map_err(|e| Error::Parse(format!("bad cf coefficient {c:?}: {e}")))
                })
                .collect();
            let coeffs = coeffs?;
            if coeffs.len() < 2 {
                return Err(Error::Parse("cf target needs at least a0,a1".into()));
            }
            if coeffs[0] < 0 || coeffs[1..].iter().any(|a| *a < 1) {
                return Err(Error::Parse(
                    "cf coefficients must satisfy a0 >= 0, a_i >= 1".into(),
                ));
            }
            Ok(TargetSpec::Cf(coeffs))
        } else if let Some(rest) = s.strip_prefix("series:") {
            let mut base = None;
            let mut exponents = None;
            for part in rest.split(',') {
                match part.trim().split_once('=') {
                    Some(("base", v)) => {
                        base = Some(
                            v.parse::<u32>()
                                .map_err(|e| Error::Parse(format!("bad base {v:?}: {e}")))?,
                        )
                    }
                    Some(("exponents", v)) => {
                        exponents = Some(match v {
                            "factorial" => ExpFamily::Factorial,
                            "squaring" => ExpFamily::Squaring,
                            other => {
                                return Err(Error::Parse(format!(
                                    "unknown exponent family {other:?}"
                                )))
                            }
                        })
                    }
                    _ => return Err(Error::Parse(format!("bad series component {part:?}"))),
                }
            }
            let base = base.ok_or_else(|| Error::Parse("series needs base=".into()))?;
            if base < 2 {
                return Err(Error::Parse("series base must be >= 2".into()));
            }
            let exponents =
                exponents.ok_or_else(|| Error::Parse("series needs exponents=".into()))?;
            Ok(TargetSpec::Series { base, exponents })
        } else if let Some(rest) = s.strip_prefix("rat:") {
            let r = match rest.split_once('/') {
                Some((p, q)) => {
                    let p: Integer = p
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad numerator {p:?}: {e}")))?;
                    let q: Integer = q
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad denominator {q:?}: {e}")))?;
                    if q <= 0 {
                        return Err(Error::Parse("denominator must be positive".into()));
                    }
                    Rational::from((p, q))
                }
                None => {
                    let p: Integer = rest
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad rational {rest:?}: {e}")))?;
                    Rational::from(p)
                }
            };
            Ok(TargetSpec::Rat(r))
        } else {
            Err(Error::Parse(format!(
                "unknown target {s:?}; expected cf:, series:, or rat:"
            )))
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TargetSpec::Cf(a) => format!(
                "cf:{}",
                a.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            TargetSpec::Series { base, exponents } => format!(
                "series:base={},exponents={}",
                base,
                match exponents {
                    ExpFamily::Factorial => "factorial",
                    ExpFamily::Squaring => "squaring",
                }
            ),
            TargetSpec::Rat(r) => format!("rat:{r}"),
        }
    }

    /// Fresh convergent stream; exact error-bound components larger than
    /// `max_component_bits` end the stream.
    pub fn stream(&self, max_component_bits: u32) -> ConvergentStream {
        ConvergentStream {
            kind: match self {
                TargetSpec::Cf(a) => StreamKind::Cf {
                    coeffs: a.clone(),
                    k: 0,
                    p_prev: Integer::from(1),
                    p_prev2: Integer::from(0),
                    q_prev: Integer::from(0),
                    q_prev2: Integer::from(1),
                },
                TargetSpec::Series { base, exponents } => StreamKind::Series {
                    base: *base,
                    exponents: *exponents,
                    k: 0,
                    e_cur: Integer::from(0),
                    p_cur: Integer::from(0),
                },
                TargetSpec::Rat(r) => StreamKind::Rat {
                    value: r.clone(),
                    k: 0,
                },
            },
            max_component_bits,
        }
    }

    /// High-precision approximation of the target value (diagnostics).
    pub fn approx(&self, prec: u32) -> Real {
        let mut last = Rational::from(0);
        for c in self.stream(1 << 22) {
            last = c.value();
            let small = Rational::from((Integer::from(1), Integer::from(1) << (prec + 8)));
            if c.err_hi < small {
                break;
            }
        }
        Real::from_rat(prec, &last)
    }
}

enum StreamKind {
    Cf {
        coeffs: Vec<Integer>,
        k: usize,
        p_prev: Integer,
        p_prev2: Integer,
        q_prev: Integer,
        q_prev2: Integer,
    },
    Series {
        base: u32,
        exponents: ExpFamily,
        k: usize,
        e_cur: Integer,
        p_cur: Integer,
    },
    Rat {
        value: Rational,
        k: usize,
    },
}

/// Single-consumer iterator of convergents in strictly increasing q order
/// (rational targets repeat their exact value, which is the degenerate case).
pub struct ConvergentStream {
    kind: StreamKind,
    max_component_bits: u32,
}

fn series_exponent(family: ExpFamily, k: usize, prev: &Integer) -> Integer {
    match family {
        ExpFamily::Factorial => {
            if k == 1 {
                Integer::from(1)
            } else {
                prev * Integer::from(k as u64)
            }
        }
        ExpFamily::Squaring => {
            if k == 1 {
                Integer::from(2)
            } else {
                Integer::from(prev * prev)
            }
        }
    }
}

impl Iterator for ConvergentStream {
    type Item = Convergent;

    fn next(&mut self) -> Option<Convergent> {
        let cap = self.max_component_bits;
        match &mut self.kind {
            StreamKind::Cf {
                coeffs,
                k,
                p_prev,
                p_prev2,
                q_prev,
                q_prev2,
            } => {
                let coeff = |i: usize| -> Integer {
                    coeffs
                        .get(i)
                        .cloned()
                        .unwrap_or_else(|| coeffs.last().unwrap().clone())
                };
                let a = coeff(*k);
                let p = Integer::from(&a * &*p_prev) + &*p_prev2;
                let q = Integer::from(&a * &*q_prev) + &*q_prev2;
                let a_next = coeff(*k + 1);
                let q_next = Integer::from(&a_next * &q) + &*q_prev;
                if q.significant_bits() > cap || q_next.significant_bits() > cap {
                    return None;
                }
                // 1/(q (q_next + q)) <= |tau - p/q| <= 1/(q q_next)
                let err_hi = Rational::from((Integer::from(1), Integer::from(&q * &q_next)));
                let err_lo = Rational::from((
                    Integer::from(1),
                    Integer::from(&q * &Integer::from(&q_next + &q)),
                ));
                *p_prev2 = std::mem::replace(p_prev, p.clone());
                *q_prev2 = std::mem::replace(q_prev, q.clone());
                *k += 1;
                Some(Convergent {
                    p,
                    q,
                    err_lo,
                    err_hi,
                })
            }
            StreamKind::Series {
                base,
                exponents,
                k,
                e_cur,
                p_cur,
            } => {
                // item k has q = base^{e_k} (e_0 = 0 gives the 0/1 item) and
                // exact tail bounds from e_{k+1}
                let e_next = series_exponent(*exponents, *k + 1, e_cur);
                let log2b = (*base as f64).log2();
                let bits_next = e_next.to_f64() * log2b;
                if bits_next > cap as f64 {
                    return None;
                }
                let e_next_u = e_next.to_u32().expect("guarded exponent");
                let q_next = Integer::from(*base).pow(e_next_u);
                // tail: base^-e_{k+1} <= |tau - p_k/q_k| <= base^-e_{k+1} * base/(base-1)
                let err_lo = Rational::from((Integer::from(1), q_next.clone()));
                let err_hi = Rational::from((Integer::from(*base), Integer::from(*base) - 1))
                    * &err_lo;
                let (p, q) = if *k == 0 {
                    (Integer::from(0), Integer::from(1))
                } else {
                    let q = Integer::from(*base).pow(e_cur.to_u32().expect("guarded"));
                    (p_cur.clone(), q)
                };
                // advance: p_{k+1} = p_k * base^{e_{k+1} - e_k} + 1
                let shift = Integer::from(&e_next - &*e_cur).to_u32().expect("guarded");
                *p_cur = (&*p_cur * Integer::from(*base).pow(shift)) + 1u32;
                *e_cur = e_next;
                *k += 1;
                Some(Convergent {
                    p,
                    q,
                    err_lo,
                    err_hi,
                })
            }
            StreamKind::Rat { value, k } => {
                let item = if *k == 0 {
                    let floor = value.clone().floor();
                    let a0 = floor.numer().clone();
                    let err = Rational::from(&*value - &Rational::from(a0.clone())).abs();
                    Convergent {
                        p: a0,
                        q: Integer::from(1),
                        err_lo: err.clone(),
                        err_hi: err,
                    }
                } else {
                    Convergent {
                        p: value.numer().clone(),
                        q: value.denom().clone(),
                        err_lo: Rational::from(0),
                        err_hi: Rational::from(0),
                    }
                };
                *k += 1;
                Some(item)
            }
        }
    }
}

/// First convergent (q > 1) certifying |tau - p/q| < 1/q^n, scanning at most
/// `budget` stream items. `None` is a budget-limited outcome, not a verdict.
pub fn liouville_certificate(
    target: &TargetSpec,
    n: u32,
    budget: usize,
    max_component_bits: u32,
) -> Option<(Integer, Integer)> {
    for c in target.stream(max_component_bits).take(budget) {
        if c.q <= 1 {
            continue;
        }
        // err_hi < 1/q^n exactly
        if c.q.significant_bits() as u64 * n as u64 > (1 << 24) {
            continue; // power too large to materialize; skip honestly
        }
        let qn = Rational::from((Integer::from(1), c.q.clone().pow(n)));
        if c.err_hi < qn {
            return Some((c.p, c.q));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DioVerdict {
    /// Certified |tau - p/q| <= K/q^(2+delta).
    Violation,
    /// Certified |tau - p/q| > K/q^(2+delta).
    Clear,
    /// Error bounds straddle the threshold.
    Indeterminate,
}

/// Scan convergents against the Diophantine threshold K/q^(2+delta),
/// returning the ones that certifiably violate it (finite-order evidence
/// only). Indeterminate items are reported separately.
pub fn diophantine_scan(
    target: &TargetSpec,
    k_const: &Rational,
    delta: &Rational,
    budget: usize,
    max_component_bits: u32,
) -> Vec<(Integer, Integer, DioVerdict)> {
    let prec = 320u32;
    let margin = Real::pow2(prec, -200);
    let one_up = &Real::one(prec) + &margin;
    let one_dn = &Real::one(prec) - &margin;
    let mut out = Vec::new();
    for c in target.stream(max_component_bits).take(budget) {
        let q = Real::from_int(prec, &c.q);
        let expo = &Real::from_u64(prec, 2) + &Real::from_rat(prec, delta);
        let thresh = &Real::from_rat(prec, k_const) / &q.pow(&expo);
        // conservative two-sided rounding margins
        let hi = &Real::from_rat(prec, &c.err_hi) * &one_up;
        let lo = &Real::from_rat(prec, &c.err_lo) * &one_dn;
        let verdict = if hi <= &thresh * &one_dn {
            DioVerdict::Violation
        } else if lo > &thresh * &one_up {
            DioVerdict::Clear
        } else {
            DioVerdict::Indeterminate
        };
        out.push((c.p, c.q, verdict));
    }
    out
}

/// A lift F of an orientation-preserving circle map: F(x + 1) = F(x) + 1.
pub trait CircleLift {
    fn prec(&self) -> u32;
    fn eval(&self, x: &Real) -> Result<Real>;
    /// F^n(x); implementations with algebraic structure may shortcut.
    fn eval_power(&self, x: &Real, n: u64) -> Result<Real> {
        let mut v = x.clone();
        for _ in 0..n {
            v = self.eval(&v)?;
        }
        Ok(v)
    }
}

/// The rigid rotation lift x -> x + tau.
pub struct RotationLift {
    pub tau: Rational,
    pub prec: u32,
}

impl CircleLift for RotationLift {
    fn prec(&self) -> u32 {
        self.prec
    }

    fn eval(&self, x: &Real) -> Result<Real> {
        Ok(x + &Real::from_rat(self.prec, &self.tau))
    }

    fn eval_power(&self, x: &Real, n: u64) -> Result<Real> {
        let shift = Rational::from(&self.tau * Integer::from(n));
        Ok(x + &Real::from_rat(self.prec.max(x.prec()), &shift))
    }
}

/// Birkhoff estimate (F^N(x) - x)/N with its 1/N error bar.
pub fn rotation_number_estimate(
    lift: &dyn CircleLift,
    x: &Real,
    n: u64,
) -> Result<(Real, Real)> {
    if n == 0 {
        return Err(Error::Bounds("iteration count must be positive".into()));
    }
    let fx = lift.eval_power(x, n)?;
    let est = &(&fx - x) / &Real::from_u64(lift.prec(), n);
    let bar = Real::from_u64(lift.prec(), n).recip();
    Ok((est, bar))
}
