//! Anchored truncated-derivative jets and their composition/inversion.
//!
//! A jet stores plain derivatives (f(x), f'(x), ..., f^(n)(x)) at a recorded
//! anchor point x. Composition follows the higher-order chain rule over the
//! tuple set from [`crate::numerics::bruno`]; inversion runs the triangular
//! recursion that expresses the top derivative of the inverse through the
//! tuples with m_1 != n.

use crate::error::{Error, Result};
use crate::numerics::bruno::{bruno_coefficient, enumerate_bruno_tuples};
use crate::numerics::real::Real;

#[derive(Debug, Clone)]
pub struct Jet {
    anchor: Real,
    /// coeffs[k] = f^(k)(anchor); length = order + 1.
    coeffs: Vec<Real>,
}

impl Jet {
    pub fn new(anchor: Real, coeffs: Vec<Real>) -> Jet {
        assert!(!coeffs.is_empty(), "jet needs at least the value");
        Jet { anchor, coeffs }
    }

    /// Jet of the identity map at x: (x, 1, 0, ..., 0).
    pub fn identity(anchor: Real, order: usize) -> Jet {
        let prec = anchor.prec();
        let mut coeffs = Vec::with_capacity(order + 1);
        coeffs.push(anchor.clone());
        if order >= 1 {
            coeffs.push(Real::one(prec));
        }
        for _ in 2..=order {
            coeffs.push(Real::zero(prec));
        }
        Jet { anchor, coeffs }
    }

    /// Jet of x -> x + c (a rotation of the lift) at x.
    pub fn shift(anchor: Real, offset: &Real, order: usize) -> Jet {
        let mut j = Jet::identity(anchor, order);
        j.coeffs[0] += offset;
        j
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn anchor(&self) -> &Real {
        &self.anchor
    }

    pub fn value(&self) -> &Real {
        &self.coeffs[0]
    }

    /// k-th plain derivative at the anchor.
    pub fn coeff(&self, k: usize) -> &Real {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[Real] {
        &self.coeffs
    }

    pub fn prec(&self) -> u32 {
        self.coeffs
            .iter()
            .map(Real::prec)
            .max()
            .unwrap_or(self.anchor.prec())
    }

    /// Truncate to a lower order (no-op when already at or below it).
    pub fn truncated(&self, order: usize) -> Jet {
        Jet {
            anchor: self.anchor.clone(),
            coeffs: self.coeffs[..=order.min(self.order())].to_vec(),
        }
    }

    /// Largest per-coefficient absolute difference against another jet.
    pub fn max_coeff_distance(&self, other: &Jet) -> Real {
        let n = self.order().min(other.order());
        let mut worst = Real::zero(self.prec());
        for k in 0..=n {
            let d = (&self.coeffs[k] - &other.coeffs[k]).abs();
            worst = worst.max(&d);
        }
        worst
    }
}

/// Jet of f(g(x)) at x from the jet of f at g(x) (`outer`) and the jet of g
/// at x (`inner`). The outer anchor must match the inner value within
/// `anchor_tol` (absolute).
pub fn jet_compose(outer: &Jet, inner: &Jet, n: usize, anchor_tol: &Real) -> Result<Jet> {
    if outer.order() < n || inner.order() < n {
        return Err(Error::Bounds(format!(
            "jet orders {} and {} below requested {n}",
            outer.order(),
            inner.order()
        )));
    }
    let mismatch = (outer.anchor() - inner.value()).abs();
    if &mismatch > anchor_tol {
        return Err(Error::AnchorMismatch {
            outer: format!("{:e}", outer.anchor()),
            inner: format!("{:e}", inner.value()),
            tol: format!("{anchor_tol:e}"),
        });
    }
    let prec = outer.prec().max(inner.prec());
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(outer.value().clone());
    for k in 1..=n {
        let mut acc = Real::zero(prec);
        for t in enumerate_bruno_tuples(k)? {
            let c = bruno_coefficient(&t);
            let mut term = &outer.coeffs[t.outer_order()] * &c;
            for (idx, &mj) in t.m.iter().enumerate() {
                if mj == 0 {
                    continue;
                }
                term *= &inner.coeffs[idx + 1].powi(mj as i32);
            }
            acc += &term;
        }
        coeffs.push(acc);
    }
    Ok(Jet::new(inner.anchor().clone(), coeffs))
}

/// Jet of the inverse map at f(x) from the jet of f at x.
///
/// Requires |f'(x)| >= `deriv_floor`. The k-th derivative of the inverse G
/// solves G^(k)(f(x)) (f'(x))^k = -sum over tuples with m_1 != k of
/// c_m G^(sum m)(f(x)) prod_j (f^(j)(x))^(m_j).
pub fn jet_invert(j: &Jet, n: usize, deriv_floor: &Real) -> Result<Jet> {
    if j.order() < n {
        return Err(Error::Bounds(format!(
            "jet order {} below requested {n}",
            j.order()
        )));
    }
    if n < 1 {
        return Err(Error::Bounds("inverse jet needs order >= 1".into()));
    }
    let fp = &j.coeffs[1];
    if &fp.abs() < deriv_floor {
        return Err(Error::NonInvertible(format!(
            "first derivative {:e} below floor {:e}",
            fp, deriv_floor
        )));
    }
    let prec = j.prec();
    let mut g: Vec<Real> = Vec::with_capacity(n + 1);
    g.push(j.anchor().clone()); // G(f(x)) = x
    g.push(fp.recip());
    for k in 2..=n {
        let mut acc = Real::zero(prec);
        for t in enumerate_bruno_tuples(k)? {
            if t.m[0] as usize == k {
                continue; // the G^(k) (f')^k term being solved for
            }
            let c = bruno_coefficient(&t);
            let mut term = &g[t.outer_order()] * &c;
            for (idx, &mj) in t.m.iter().enumerate() {
                if mj == 0 {
                    continue;
                }
                term *= &j.coeffs[idx + 1].powi(mj as i32);
            }
            acc += &term;
        }
        let gk = -acc / fp.powi(k as i32);
        g.push(gk);
    }
    Ok(Jet::new(j.value().clone(), g))
}
