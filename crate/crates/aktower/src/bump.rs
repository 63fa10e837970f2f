//! The smooth step g: flat near 0 and 1, slope bounded by 1/(1-2*eps) <= 2,
//! with evaluable derivatives of every order.
//!
//! g is the clamped linear ramp on [eps, 1-eps] convolved with the standard
//! compactly supported mollifier phi(t) = C exp(-1/(1-t^2)) of radius eta.
//! Convolution against a symmetric mollifier leaves the ramp exactly linear
//! outside the two transition windows of width 2*eta, so only three
//! quantities ever need the mollifier: its CDF, the CDF's antiderivative,
//! and its derivatives. All three are served from a per-precision quadrature
//! model: the interval [-1, 1] is split into Taylor pieces sized by the
//! distance to the endpoint singularities, each carrying a truncated series
//! of exp(-1/(1-t^2)) whose tail is bounded by Cauchy estimates (|exp(-w)|
//! stays below 1 on every disk used, since Re(1/(1-z^2)) > 0 for |Re z| < 1).
//! Antiderivative prefix sums across pieces give the CDF with a tracked
//! error below 2^-(prec+64); the sliver next to each endpoint, where psi and
//! the queried derivatives are certifiably below that threshold, is treated
//! as zero.

use std::sync::Arc;

use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::jet::Jet;
use crate::numerics::real::Real;

/// Extra bits of accuracy demanded from the model beyond the working precision.
const GUARD_BITS: u32 = 64;

/// Shape parameters of the step function.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpProfile {
    /// Flat-zone half-width of the ramp: g is 0 on [0, eps-eta], 1 on [1-eps+eta, 1].
    pub eps: Rational,
    /// Mollifier radius, 0 < eta < eps.
    pub eta: Rational,
    /// Highest derivative order served by jets.
    pub max_order: usize,
    /// Cap on the per-piece series order of the CDF quadrature model.
    pub quadrature: usize,
}

impl Default for BumpProfile {
    fn default() -> Self {
        BumpProfile {
            eps: Rational::from((1, 8)),
            eta: Rational::from((1, 16)),
            max_order: 10,
            quadrature: 4096,
        }
    }
}

impl BumpProfile {
    pub fn validate(&self) -> Result<()> {
        let quarter = Rational::from((1, 4));
        if !(self.eps > 0 && self.eps <= quarter) {
            return Err(Error::Construction(format!(
                "eps = {} outside (0, 1/4]",
                self.eps
            )));
        }
        if !(self.eta > 0 && self.eta < self.eps) {
            return Err(Error::Construction(format!(
                "eta = {} outside (0, eps)",
                self.eta
            )));
        }
        if self.max_order < 2 || self.max_order > 14 {
            return Err(Error::Construction(format!(
                "max_order = {} outside 2..=14",
                self.max_order
            )));
        }
        Ok(())
    }

    /// Exact slope of the mollified ramp on its linear stretch: 1/(1-2*eps).
    pub fn slope(&self) -> Rational {
        let denom = Rational::from(1) - Rational::from(2) * self.eps.clone();
        denom.recip()
    }
}

/// One Taylor piece of the mollifier model on [-1, 0].
struct Piece {
    lo: Real,
    hi: Real,
    center: Real,
    /// Series coefficients of psi = exp(-1/(1-t^2)): coeff[i] = psi^(i)(c)/i!.
    ser: Vec<Real>,
    /// First antiderivative coefficients: ser[i]/(i+1), power offset +1.
    ser_i1: Vec<Real>,
    /// Second antiderivative coefficients: ser[i]/((i+1)(i+2)), offset +2.
    ser_i2: Vec<Real>,
    /// Unnormalized CDF at `lo`.
    prefix1: Real,
    /// Unnormalized second antiderivative at `lo`.
    prefix2: Real,
    a_left: Real,
    b_left: Real,
}

/// Evaluable model of the step g at a fixed precision.
pub struct BumpModel {
    pub profile: BumpProfile,
    pub prec: u32,
    wp: u32,
    pieces: Vec<Piece>,
    /// Unnormalized integral over [-1, 1].
    total: Real,
    /// Normalizing constant 1/total.
    norm: Real,
    eps_r: Real,
    eta_r: Real,
    slope_r: Real,
}

fn horner(coeffs: &[Real], start: usize, dx: &Real, wp: u32) -> Real {
    let mut acc = Real::zero(wp);
    for c in coeffs[start..].iter().rev() {
        acc = &(&acc * dx) + c;
    }
    acc
}

impl BumpModel {
    pub fn build(profile: BumpProfile, prec: u32) -> Result<Arc<BumpModel>> {
        profile.validate()?;
        let wp = prec + 96;
        // Deepest dyadic block: beyond -1 + 2^-k_cut the mollifier and every
        // queried derivative sit below 2^-(prec+GUARD).
        let j_max = profile.max_order + 2;
        let mut k_cut = 6u32;
        loop {
            let lhs = (1u64 << k_cut) as f64 * std::f64::consts::LOG2_E / 9.0;
            let rhs = (prec + GUARD_BITS) as f64 + 12.0 * (k_cut as f64 + 1.0) + 40.0;
            if lhs >= rhs || k_cut >= 24 {
                break;
            }
            k_cut += 1;
        }
        // Series order: tail 4^-(m-j) with derivative amplification.
        let m_order = ((prec + GUARD_BITS) as usize
            + 2 * j_max * (k_cut as usize + 4)
            + 12 * 10
            + 32)
            / 2;
        let m_order = m_order.max(48);
        if m_order > profile.quadrature {
            return Err(Error::Precision(format!(
                "CDF quadrature needs series order {m_order} at {prec} bits,                  above the configured cap {}",
                profile.quadrature
            )));
        }

        let mut pieces = Vec::new();
        // Blocks from the cut toward the middle: [-1+2^-k, -1+2^-(k-1)] for
        // k = k_cut..=2, then [-1/2, 0]; four pieces per block.
        for k in (2..=k_cut).rev() {
            let lo = -Real::one(wp) + Real::pow2(wp, -(k as i32));
            let width = Real::pow2(wp, -(k as i32));
            push_block(&mut pieces, &lo, &width, m_order, wp)?;
        }
        let lo = Real::from_f64(wp, -0.5);
        let width = Real::from_f64(wp, 0.5);
        push_block(&mut pieces, &lo, &width, m_order, wp)?;

        // Antiderivative prefix sums from -1 (sliver contributes < 2^-(prec+G)).
        let mut prefix1 = Real::zero(wp);
        let mut prefix2 = Real::zero(wp);
        for p in pieces.iter_mut() {
            p.prefix1 = prefix1.clone();
            p.prefix2 = prefix2.clone();
            let dx_lo = &p.lo - &p.center;
            let dx_hi = &p.hi - &p.center;
            let a_lo = &dx_lo * &horner(&p.ser_i1, 0, &dx_lo, wp);
            let a_hi = &dx_hi * &horner(&p.ser_i1, 0, &dx_hi, wp);
            let b_lo = &dx_lo.square() * &horner(&p.ser_i2, 0, &dx_lo, wp);
            let b_hi = &dx_hi.square() * &horner(&p.ser_i2, 0, &dx_hi, wp);
            p.a_left = a_lo.clone();
            p.b_left = b_lo.clone();
            let width = &p.hi - &p.lo;
            prefix2 = &prefix2 + &(&(&(&prefix1 - &a_lo) * &width) + &(&b_hi - &b_lo));
            prefix1 = &prefix1 + &(&a_hi - &a_lo);
        }
        let half = prefix1.clone();
        if half.is_zero() {
            return Err(Error::Precision("mollifier mass vanished".into()));
        }
        let total = half.mul_2exp(1);
        let norm = total.recip();
        let eps_r = Real::from_rat(wp, &profile.eps);
        let eta_r = Real::from_rat(wp, &profile.eta);
        let slope_r = Real::from_rat(wp, &profile.slope());
        Ok(Arc::new(BumpModel {
            profile,
            prec,
            wp,
            pieces,
            total,
            norm,
            eps_r,
            eta_r,
            slope_r,
        }))
    }

    fn locate(&self, t: &Real) -> Option<usize> {
        if t < &self.pieces[0].lo || t > &self.pieces[self.pieces.len() - 1].hi {
            return None;
        }
        let mut lo = 0usize;
        let mut hi = self.pieces.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if t > &self.pieces[mid].hi {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    /// Normalized mollifier derivative phi^(j)(t); exact zero off support
    /// and on the certified sliver near the endpoints.
    pub fn phi_deriv(&self, t: &Real, j: usize) -> Real {
        let neg;
        let tt = if t > &Real::zero(self.wp) {
            neg = true;
            -t
        } else {
            neg = false;
            t.clone()
        };
        let Some(idx) = self.locate(&tt) else {
            return Real::zero(self.prec);
        };
        let p = &self.pieces[idx];
        let dx = &tt - &p.center;
        // psi^(j)(t) = sum_{i>=j} ser[i] * i!/(i-j)! * dx^(i-j)
        let m = p.ser.len() - 1;
        if j > m {
            return Real::zero(self.prec);
        }
        let mut acc = Real::zero(self.wp);
        for i in (j..=m).rev() {
            let ff = falling_factorial(i, j);
            acc = &(&acc * &dx) + &(&p.ser[i] * &Real::from_int(self.wp, &ff));
        }
        let mut v = &acc * &self.norm;
        if neg && j % 2 == 1 {
            v = -v;
        }
        v
    }

    /// Normalized CDF Phi(t) = int_{-1}^t phi, clamped to [0, 1] off support.
    pub fn cdf(&self, t: &Real) -> Real {
        if t >= &Real::one(self.wp) {
            return Real::one(self.prec);
        }
        if t <= &(-Real::one(self.wp)) {
            return Real::zero(self.prec);
        }
        &self.cdf_unnorm(t) * &self.norm
    }

    fn cdf_unnorm(&self, t: &Real) -> Real {
        if t > &Real::zero(self.wp) {
            return &self.total - &self.cdf_unnorm(&-t);
        }
        let Some(idx) = self.locate(t) else {
            // below the sliver: mass certifiably negligible
            return Real::zero(self.wp);
        };
        let p = &self.pieces[idx];
        let dx = &t.clone() - &p.center;
        let a = &dx * &horner(&p.ser_i1, 0, &dx, self.wp);
        &p.prefix1 + &(&a - &p.a_left)
    }

    /// Normalized second antiderivative Psi(t) = int_{-1}^t Phi.
    pub fn cdf2(&self, t: &Real) -> Real {
        &self.cdf2_unnorm(t) * &self.norm
    }

    fn cdf2_unnorm(&self, t: &Real) -> Real {
        if t > &Real::zero(self.wp) {
            // Psi(t) = t*total + Psi(-t) by evenness of phi
            return &(t * &self.total) + &self.cdf2_unnorm(&-t);
        }
        let Some(idx) = self.locate(t) else {
            return Real::zero(self.wp);
        };
        let p = &self.pieces[idx];
        let dx = &t.clone() - &p.center;
        let b = &dx.square() * &horner(&p.ser_i2, 0, &dx, self.wp);
        let run = &(&p.prefix1 - &p.a_left) * &(t - &p.lo);
        &(&p.prefix2 + &run) + &(&b - &p.b_left)
    }

    // --- the step g itself -------------------------------------------------

    fn region(&self, x: &Real) -> Result<Region> {
        // callers reduce through mod-s arithmetic whose rounding can land a
        // hair outside [0, 1], inside the flat zones where g is exactly 0/1
        let slack = Real::pow2(self.wp, -((self.prec / 2) as i32));
        if x < &(-slack.clone()) || x > &(&Real::one(self.wp) + &slack) {
            return Err(Error::Domain(format!("bump argument {x:e} outside [0,1]")));
        }
        let eps = &self.profile.eps;
        let eta = &self.profile.eta;
        let lo_flat = eps - eta.clone();
        let lo_hi = eps + eta.clone();
        let hi_lo = Rational::from(1) - lo_hi.clone();
        let hi_flat = Rational::from(1) - lo_flat.clone();
        Ok(if *x <= lo_flat {
            Region::FlatLo
        } else if *x < lo_hi {
            Region::TransLo
        } else if *x <= hi_lo {
            Region::Ramp
        } else if *x < hi_flat {
            Region::TransHi
        } else {
            Region::FlatHi
        })
    }

    /// g(x): exactly 0/1 on the plateaus, linear on the ramp, convolution
    /// value (via the mollifier's second antiderivative) on the transitions.
    pub fn eval_g(&self, x: &Real) -> Result<Real> {
        Ok(match self.region(x)? {
            Region::FlatLo => Real::zero(self.prec),
            Region::FlatHi => Real::one(self.prec),
            Region::Ramp => &(x - &self.eps_r) * &self.slope_r,
            Region::TransLo => {
                let w = &(x - &self.eps_r) / &self.eta_r;
                &(&self.eta_r * &self.slope_r) * &self.cdf2(&w)
            }
            Region::TransHi => {
                let xm = &Real::one(self.wp) - x;
                let inner = self.eval_g(&xm)?;
                &Real::one(self.prec) - &inner
            }
        })
    }

    /// g'(x): 0 on plateaus, the exact slope on the ramp, CDF difference on
    /// the transitions.
    pub fn g1(&self, x: &Real) -> Result<Real> {
        Ok(match self.region(x)? {
            Region::FlatLo | Region::FlatHi => Real::zero(self.prec),
            Region::Ramp => Real::from_rat(self.prec, &self.profile.slope()),
            Region::TransLo => {
                let w = &(x - &self.eps_r) / &self.eta_r;
                &self.slope_r * &self.cdf(&w)
            }
            Region::TransHi => {
                let w = &(x - &(&Real::one(self.wp) - &self.eps_r)) / &self.eta_r;
                &self.slope_r * &(&Real::one(self.wp) - &self.cdf(&w))
            }
        })
    }

    /// g^(k)(x) for k >= 2: mollifier-derivative differences scaled by the
    /// ramp slope; exactly 0 outside the transition windows.
    pub fn g_deriv(&self, x: &Real, k: usize) -> Result<Real> {
        if k < 2 {
            return Err(Error::Bounds("g_deriv expects k >= 2".into()));
        }
        if k > self.profile.max_order + 2 {
            return Err(Error::Bounds(format!(
                "derivative order {k} above configured max {}",
                self.profile.max_order + 2
            )));
        }
        Ok(match self.region(x)? {
            Region::FlatLo | Region::FlatHi | Region::Ramp => Real::zero(self.prec),
            Region::TransLo => {
                let w = &(x - &self.eps_r) / &self.eta_r;
                let scale = &self.slope_r / &self.eta_r.powi(k as i32 - 1);
                &scale * &self.phi_deriv(&w, k - 2)
            }
            Region::TransHi => {
                let w = &(x - &(&Real::one(self.wp) - &self.eps_r)) / &self.eta_r;
                let scale = &self.slope_r / &self.eta_r.powi(k as i32 - 1);
                -(&scale * &self.phi_deriv(&w, k - 2))
            }
        })
    }

    /// Jet of g at x up to order n.
    pub fn g_jet(&self, x: &Real, n: usize) -> Result<Jet> {
        let mut coeffs = Vec::with_capacity(n + 1);
        coeffs.push(self.eval_g(x)?);
        if n >= 1 {
            coeffs.push(self.g1(x)?);
        }
        for k in 2..=n {
            coeffs.push(self.g_deriv(x, k)?);
        }
        Ok(Jet::new(x.clone(), coeffs))
    }

    /// Certified upper bound for max |g^(n)| + 1 over [0, 1]: dense sampling
    /// over the transition windows plus a Lipschitz slack from the sampled
    /// max of the next derivative.
    pub fn kappa_bound(&self, n: usize) -> Result<Real> {
        let one = Real::one(self.prec);
        match n {
            0 => Ok(Real::from_u64(self.prec, 2)),
            1 => Ok(&Real::from_rat(self.prec, &self.profile.slope()) + &one),
            _ => {
                let lo = Rational::from(&self.profile.eps - &self.profile.eta);
                let hi = Rational::from(&self.profile.eps + &self.profile.eta);
                let lo = Real::from_rat(self.wp, &lo);
                let hi = Real::from_rat(self.wp, &hi);
                let samples = 512u32;
                let step = &(&hi - &lo) / samples;
                let mut max_n = Real::zero(self.wp);
                let mut max_n1 = Real::zero(self.wp);
                for i in 0..=samples {
                    let x = &lo + &(&step * i);
                    max_n = max_n.max(&self.g_deriv(&x, n)?.abs());
                    max_n1 = max_n1.max(&self.g_deriv(&x, n + 1)?.abs());
                }
                let slack = &(&max_n1 * &step).mul_2exp(-1) + &Real::zero(self.prec);
                Ok(&(&max_n + &slack) + &one)
            }
        }
    }
}

enum Region {
    FlatLo,
    TransLo,
    Ramp,
    TransHi,
    FlatHi,
}

fn falling_factorial(i: usize, j: usize) -> Integer {
    let mut acc = Integer::from(1);
    for v in (i - j + 1)..=i {
        acc *= v as u64;
    }
    acc
}

/// Split a block [lo, lo+width] into four Taylor pieces of psi.
fn push_block(
    pieces: &mut Vec<Piece>,
    lo: &Real,
    width: &Real,
    m_order: usize,
    wp: u32,
) -> Result<()> {
    let quarter = width.mul_2exp(-2);
    for i in 0..4 {
        let p_lo = lo + &(&quarter * (i as u32));
        let p_hi = &p_lo + &quarter;
        let center = (&p_lo + &p_hi).mul_2exp(-1);
        let ser = psi_series(&center, m_order, wp)?;
        let mut ser_i1 = Vec::with_capacity(ser.len());
        let mut ser_i2 = Vec::with_capacity(ser.len());
        for (i, c) in ser.iter().enumerate() {
            ser_i1.push(c / (i as u32 + 1));
            ser_i2.push(&(c / (i as u32 + 1)) / (i as u32 + 2));
        }
        pieces.push(Piece {
            lo: p_lo,
            hi: p_hi,
            center,
            ser,
            ser_i1,
            ser_i2,
            prefix1: Real::zero(wp),
            prefix2: Real::zero(wp),
            a_left: Real::zero(wp),
            b_left: Real::zero(wp),
        });
    }
    Ok(())
}

/// Taylor series (derivatives over factorials) of psi = exp(-1/(1-t^2))
/// around `c`, through the reciprocal recurrence and the exp ODE recurrence.
fn psi_series(c: &Real, m: usize, wp: u32) -> Result<Vec<Real>> {
    // u(x) = 1 - (c+x)^2 = (1-c^2) - 2c x - x^2
    let u0 = &Real::one(wp) - &c.square();
    if u0 <= Real::zero(wp) {
        return Err(Error::Precision("series center outside (-1,1)".into()));
    }
    let u1 = -c.mul_2exp(1);
    let u2 = -Real::one(wp);
    // v = 1/u: v_k = -(u1 v_{k-1} + u2 v_{k-2})/u0
    let inv_u0 = u0.recip();
    let mut v: Vec<Real> = Vec::with_capacity(m + 1);
    v.push(inv_u0.clone());
    for k in 1..=m {
        let mut s = &u1 * &v[k - 1];
        if k >= 2 {
            s += &(&u2 * &v[k - 2]);
        }
        v.push(-(&s * &inv_u0));
    }
    // w = -1/u, e = exp(w): e_k = (1/k) sum_{j=1..k} j w_j e_{k-j}
    let w: Vec<Real> = v.into_iter().map(|x| -x).collect();
    let mut e: Vec<Real> = Vec::with_capacity(m + 1);
    e.push(w[0].exp());
    for k in 1..=m {
        let mut s = Real::zero(wp);
        for j in 1..=k {
            s += &(&(&w[j] * (j as u32)) * &e[k - j]);
        }
        e.push(&s / (k as u32));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 256;

    fn model() -> Arc<BumpModel> {
        BumpModel::build(BumpProfile::default(), P).unwrap()
    }

    /// Direct one-liner evaluation of the unnormalized mollifier.
    fn psi_direct(t: f64, prec: u32) -> Real {
        let t = Real::from_f64(prec, t);
        let one = Real::one(prec);
        (-(&one / &(&one - &t.square()))).exp()
    }

    #[test]
    fn series_model_matches_direct_evaluation() {
        let m = model();
        for &t in &[-0.9, -0.72, -0.5, -0.31, -0.125, 0.0, 0.33, 0.77] {
            let direct = &psi_direct(t, 320) * &m.norm;
            let modeled = m.phi_deriv(&Real::from_f64(m.wp, t), 0);
            let err = (&direct - &modeled).abs();
            assert!(
                err < Real::pow2(320, -(P as i32) - 40),
                "t = {t}: err {err:e}"
            );
        }
    }

    #[test]
    fn phi_first_derivative_matches_finite_difference() {
        let m = model();
        let h = Real::pow2(m.wp, -60);
        for &t in &[-0.6, -0.3, 0.2, 0.55] {
            let tr = Real::from_f64(m.wp, t);
            let fd = (&m.phi_deriv(&(&tr + &h), 0) - &m.phi_deriv(&(&tr - &h), 0)) / h.mul_2exp(1);
            let an = m.phi_deriv(&tr, 1);
            assert!((&fd - &an).abs() < Real::pow2(P, -100), "t = {t}");
        }
    }

    #[test]
    fn cdf_normalization_and_symmetry() {
        let m = model();
        let one = Real::one(m.wp);
        assert!((&m.cdf(&one) - &one).abs().is_zero());
        let half = m.cdf(&Real::zero(m.wp));
        assert!((&half - &Real::from_f64(P, 0.5)).abs() < Real::pow2(P, -(P as i32) + 8));
        let t = Real::from_f64(m.wp, 0.37);
        let sym = &(&m.cdf(&t) + &m.cdf(&-t.clone())) - &one;
        assert!(sym.abs() < Real::pow2(P, -(P as i32) - 8));
    }

    #[test]
    fn cdf_matches_simpson_quadrature() {
        // Independent check of the piecewise-series CDF against composite
        // Simpson on the direct integrand.
        let m = model();
        let t_end = 0.4f64;
        let n = 20_000u32;
        let a = -1.0 + 1e-12;
        let h = (t_end - a) / (n as f64);
        let wp = 320;
        let mut acc = Real::zero(wp);
        for i in 0..=n {
            let t = a + h * i as f64;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += &(&psi_direct(t, wp) * &Real::from_f64(wp, w));
        }
        acc = &acc * &Real::from_f64(wp, h / 3.0);
        let simpson = &acc * &m.norm;
        let cdf = m.cdf(&Real::from_f64(m.wp, t_end));
        assert!(
            (&simpson - &cdf).abs() < Real::from_f64(P, 1e-14),
            "simpson {simpson:e} vs cdf {cdf:e}"
        );
    }

    #[test]
    fn g_anchors_and_symmetry() {
        let m = model();
        assert!(m.eval_g(&Real::zero(P)).unwrap().is_zero());
        assert_eq!(m.eval_g(&Real::one(P)).unwrap(), Real::one(P));
        // plateau exactness, not just smallness
        assert!(m.eval_g(&Real::from_f64(P, 0.05)).unwrap().is_zero());
        assert!(m
            .g_deriv(&Real::from_f64(P, 0.97), 5)
            .unwrap()
            .is_zero());
        // ramp and mollifier are symmetric about 1/2
        let half = m.eval_g(&Real::from_f64(P, 0.5)).unwrap();
        assert!((&half - &Real::from_f64(P, 0.5)).abs() < Real::pow2(P, -(P as i32) + 8));
        // transition continuity against the ramp formula at eps+eta
        let x = Real::from_rat(m.wp, &Rational::from((3, 16)));
        let g_here = m.eval_g(&x).unwrap();
        let ramp = &(&x - &m.eps_r) * &m.slope_r;
        assert!((&g_here - &ramp).abs() < Real::pow2(P, -(P as i32) - 16));
    }

    #[test]
    fn g_slope_bound_and_midpoint() {
        let m = model();
        let slope = Real::from_rat(P, &m.profile.slope());
        assert_eq!(m.g1(&Real::from_f64(P, 0.5)).unwrap(), slope);
        // monotone, bounded by 2 on a sample grid
        let two = Real::from_u64(P, 2);
        let mut prev = -Real::one(P);
        for i in 0..=400u32 {
            let x = &Real::from_u64(m.wp, i as u64) / 400u32;
            let g = m.eval_g(&x).unwrap();
            assert!(g >= prev, "monotonicity at {i}");
            let gp = m.g1(&x).unwrap();
            assert!(gp <= two, "slope bound at {i}");
            assert!(gp >= Real::zero(P));
            prev = g;
        }
    }

    #[test]
    fn g_prime_integrates_to_one() {
        // int_0^1 g' = g(1) - g(0) = 1, composite Simpson on g'.
        let m = model();
        let n = 4096u32;
        let h = &Real::one(m.wp) / n;
        let mut acc = Real::zero(m.wp);
        for i in 0..=n {
            let x = &h * i;
            let w = if i == 0 || i == n {
                1u32
            } else if i % 2 == 1 {
                4
            } else {
                2
            };
            acc += &(&m.g1(&x).unwrap() * w);
        }
        acc = &(&acc * &h) / 3u32;
        assert!(
            (&acc - &Real::one(P)).abs() < Real::from_f64(P, 1e-10),
            "integral {acc:e}"
        );
    }

    #[test]
    fn kappa_bounds_sane_and_reproducible() {
        let m = model();
        assert_eq!(m.kappa_bound(0).unwrap(), Real::from_u64(P, 2));
        let k1 = m.kappa_bound(1).unwrap();
        assert!(k1 <= Real::from_u64(P, 3));
        let k2 = m.kappa_bound(2).unwrap();
        // doubled-resolution oracle: dense grid max at 2x sampling
        let lo = 0.0625f64;
        let hi = 0.1875f64;
        let n = 1024u32;
        let mut oracle = Real::zero(m.wp);
        for i in 0..=n {
            let x = Real::from_f64(m.wp, lo + (hi - lo) * (i as f64) / (n as f64));
            oracle = oracle.max(&m.g_deriv(&x, 2).unwrap().abs());
        }
        let oracle = &oracle + &Real::one(P);
        let rel = (&(&k2 - &oracle) / &oracle).abs();
        assert!(
            rel < Real::from_f64(P, 1e-2),
            "kappa_2 {k2:e} vs oracle {oracle:e}"
        );
        assert!(k2 >= oracle);
        // deterministic: a second run reproduces the value exactly
        assert_eq!(m.kappa_bound(2).unwrap(), k2);
    }
}
