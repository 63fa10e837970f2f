//! The period-s staircase diffeomorphism A = Id + a.
//!
//! On the fundamental domain [0, s]: A(t) = t + (s - 2*delta) g(t/delta) for
//! t in [0, delta], and the graph on [delta, s] is the reflection of the
//! graph on [0, delta] across the line y = s - x, i.e. A(t) = s - G(s - t)
//! with G the inverse of the rising branch. The displacement a(x) = A(x) - x
//! extends with period s, so A acts on the whole line as a lift fixing every
//! multiple of s.
//!
//! Inverses on the steep branch have no closed form and are computed by
//! guarded bisection-then-Newton; on [s - delta, s] the reflection identity
//! gives the inverse in closed form.

use std::sync::Arc;

use rug::{Integer, Rational};

use crate::bump::BumpModel;
use crate::error::{Error, Result};
use crate::numerics::jet::{jet_invert, Jet};
use crate::numerics::real::Real;

#[derive(Clone)]
pub struct Staircase {
    s: Rational,
    s_real: Real,
    delta: Real,
    delta_exact: Option<Rational>,
    rise: Real, // s - 2*delta
    bump: Arc<BumpModel>,
    prec: u32,
}

impl std::fmt::Debug for Staircase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Staircase(s = {}, delta ≈ {:e})",
            self.s,
            self.delta.to_f64()
        )
    }
}

impl Staircase {
    /// Build A_{s,delta}. Requires 1/s integer and 0 < delta < s/2.
    pub fn build(
        s: Rational,
        delta: Real,
        delta_exact: Option<Rational>,
        bump: Arc<BumpModel>,
        prec: u32,
    ) -> Result<Staircase> {
        if s <= 0 || s.numer() != &Integer::from(1) {
            return Err(Error::Construction(format!("1/s not an integer for s = {s}")));
        }
        let s_real = Real::from_rat(prec.max(bump.prec), &s);
        if delta <= Real::zero(prec) {
            return Err(Error::Construction("delta must be positive".into()));
        }
        let half_s = &s / Rational::from(2);
        if delta >= half_s {
            return Err(Error::Construction(format!(
                "delta = {:e} >= s/2 = {}",
                delta, half_s
            )));
        }
        if let Some(de) = &delta_exact {
            if Real::from_rat(delta.prec(), de) != delta {
                return Err(Error::Construction(
                    "delta_exact does not match delta at this precision".into(),
                ));
            }
        }
        let rise = &s_real - &delta.mul_2exp(1);
        Ok(Staircase {
            s,
            s_real,
            delta,
            delta_exact,
            rise,
            bump,
            prec,
        })
    }

    pub fn period(&self) -> &Rational {
        &self.s
    }

    pub fn period_real(&self) -> &Real {
        &self.s_real
    }

    /// Number of periods in [0, 1], i.e. 1/s.
    pub fn periods(&self) -> Integer {
        self.s.denom().clone()
    }

    pub fn delta(&self) -> &Real {
        &self.delta
    }

    pub fn delta_exact(&self) -> Option<&Rational> {
        self.delta_exact.as_ref()
    }

    pub fn bump(&self) -> &Arc<BumpModel> {
        &self.bump
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Exact total growth over one period of the exceptional interval:
    /// A(i s + delta) - A(i s) = s - delta.
    pub fn growth_per_period(&self) -> Real {
        &self.s_real - &self.delta
    }

    /// Exact supremum of A': 1 + ((s - 2 delta)/delta) * max g', with
    /// max g' = 1/(1 - 2 eps) attained on the ramp.
    pub fn slope_max_exact(&self) -> Real {
        let slope = Real::from_rat(self.prec, &self.bump.profile.slope());
        &Real::one(self.prec) + &(&(&self.rise / &self.delta) * &slope)
    }

    /// Exact infimum of A' (the reciprocal, attained on the reflected branch).
    pub fn slope_min_exact(&self) -> Real {
        self.slope_max_exact().recip()
    }

    fn reduce(&self, x: &Real) -> (Integer, Real) {
        // exact: a rounded quotient x/s can misplace the floor by many whole
        // periods once x/s outgrows the working precision (fine stages)
        let q = x.to_rational() / &self.s;
        let k = q.floor().numer().clone();
        let ks = Rational::from(&self.s * &k);
        let t = x - &ks;
        (k, t)
    }

    // --- rising branch F = A|[0, delta] ------------------------------------

    fn f_eval(&self, t: &Real) -> Result<Real> {
        let u = t / &self.delta;
        let g = self.bump.eval_g(&u)?;
        Ok(t + &(&self.rise * &g))
    }

    fn f_deriv(&self, t: &Real) -> Result<Real> {
        let u = t / &self.delta;
        let g1 = self.bump.g1(&u)?;
        Ok(&Real::one(self.prec) + &(&(&self.rise / &self.delta) * &g1))
    }

    /// Jet of the rising branch at t in [0, delta]: the j-th derivative picks
    /// up the factor (s - 2 delta)/delta^j.
    fn f_jet(&self, t: &Real, n: usize) -> Result<Jet> {
        let u = t / &self.delta;
        let gj = self.bump.g_jet(&u, n)?;
        let mut coeffs = Vec::with_capacity(n + 1);
        coeffs.push(t + &(&self.rise * gj.coeff(0)));
        if n >= 1 {
            coeffs.push(&Real::one(self.prec) + &(&(&self.rise / &self.delta) * gj.coeff(1)));
        }
        for k in 2..=n {
            let scale = &self.rise / &self.delta.powi(k as i32);
            coeffs.push(&scale * gj.coeff(k));
        }
        Ok(Jet::new(t.clone(), coeffs))
    }

    /// Solve F(t) = v on [0, delta] for v in [0, s - delta].
    fn invert_f(&self, v: &Real, seed: Option<&Real>) -> Result<Real> {
        let zero = Real::zero(self.prec);
        let f_top = self.growth_per_period();
        let margin = Real::pow2(self.prec, -(self.prec as i32) + 8);
        if v < &(-margin.clone()) || v > &(&f_top + &margin) {
            return Err(Error::Domain(format!(
                "inverse target {v:e} outside [0, s - delta]"
            )));
        }
        // Flat-zone shortcuts: F = Id near 0, F = Id + (s - 2 delta) near delta.
        let eps = &self.bump.profile.eps;
        let eta = &self.bump.profile.eta;
        let lo_flat = &self.delta * &Real::from_rat(self.prec, &(eps - eta.clone()));
        if v <= &lo_flat {
            return Ok(v.max(&zero));
        }
        let hi_flat_t =
            &self.delta * &Real::from_rat(self.prec, &(Rational::from(1) - (eps - eta.clone())));
        let hi_flat_v = &hi_flat_t + &self.rise;
        if v >= &hi_flat_v {
            return Ok((v - &self.rise).min(&self.delta));
        }

        let mut lo = lo_flat;
        let mut hi = hi_flat_t;
        // A caller-supplied starting point (typically the previous root of a
        // sweep) skips the bracketing bisection; Newton self-corrects from
        // either side under the bracket guard.
        let seeded = matches!(seed, Some(t0) if *t0 > lo && *t0 < hi);
        if !seeded {
            for _ in 0..24 {
                let mid = (&lo + &hi).mul_2exp(-1);
                if self.f_eval(&mid)? < *v {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let tol = &self.s_real * &Real::pow2(self.prec, -(self.prec as i32) + 8);
        let mut t = if seeded {
            seed.unwrap().clone()
        } else {
            (&lo + &hi).mul_2exp(-1)
        };
        let mut best: Option<Real> = None;
        let mut stall = 0u32;
        for _ in 0..400u32 {
            let ft = self.f_eval(&t)?;
            let resid = &ft - v;
            let mag = resid.abs();
            if mag <= tol {
                return Ok(t);
            }
            // Newton can cycle on the S-shaped branch; demand the residual
            // keep halving, otherwise fall back to a bracket bisection.
            match &best {
                Some(b) if mag > b.mul_2exp(-1) => stall += 1,
                _ => {
                    best = Some(mag.clone());
                    stall = 0;
                }
            }
            if resid < Real::zero(self.prec) {
                lo = t.clone();
            } else {
                hi = t.clone();
            }
            let mut next = if stall >= 2 {
                stall = 0;
                best = None;
                (&lo + &hi).mul_2exp(-1)
            } else {
                let fp = self.f_deriv(&t)?; // >= 1 on the whole branch
                &t - &(&resid / &fp)
            };
            // clamp into the closed bracket: the root may sit exactly on an
            // endpoint pinned by the bisection phase, and a Newton step that
            // rounds one ulp past it must land there, not be thrown away
            if next < lo {
                next = lo.clone();
            } else if next > hi {
                next = hi.clone();
            }
            if next == t {
                next = (&lo + &hi).mul_2exp(-1);
            }
            t = next;
        }
        Err(Error::Numeric(format!(
            "staircase inverse did not converge for v = {v:e}"
        )))
    }

    // --- the lift A and its inverse ----------------------------------------

    /// A(x) on the line (lift): fixes every multiple of s.
    pub fn eval(&self, x: &Real) -> Result<Real> {
        let (k, t) = self.reduce(x);
        let ks = Rational::from(&self.s * &k);
        let val = if t <= self.delta {
            self.f_eval(&t)?
        } else {
            let v = &self.s_real - &t;
            let u = self.invert_f(&v, None)?;
            &self.s_real - &u
        };
        Ok(&val + &ks)
    }

    /// A^{-1}(y) on the line.
    pub fn eval_inv(&self, y: &Real) -> Result<Real> {
        self.eval_inv_warm(y, None)
    }

    /// A^{-1}(y) seeded with a nearby previous result (sweeps).
    pub fn eval_inv_warm(&self, y: &Real, prev: Option<&Real>) -> Result<Real> {
        let (k, v) = self.reduce(y);
        let ks = Rational::from(&self.s * &k);
        let f_top = self.growth_per_period();
        let val = if v <= f_top {
            let seed = prev.map(|p| p - &ks);
            self.invert_f(&v, seed.as_ref())?
        } else {
            // closed form via the reflection identity: A^{-1}(v) = s - F(s - v)
            let t = &self.s_real - &v;
            &self.s_real - &self.f_eval(&t)?
        };
        Ok(&val + &ks)
    }

    /// A'(x).
    pub fn deriv(&self, x: &Real) -> Result<Real> {
        Ok(self.deriv_warm(x, None)?.0)
    }

    /// A'(x) with an optional seed for the reflected-branch root (the root
    /// is returned for the next call of a sweep).
    pub fn deriv_warm(&self, x: &Real, seed: Option<&Real>) -> Result<(Real, Option<Real>)> {
        let (_, t) = self.reduce(x);
        if t <= self.delta {
            Ok((self.f_deriv(&t)?, None))
        } else {
            // A'(t) = G'(s - t) = 1/F'(G(s - t))
            let v = &self.s_real - &t;
            let u = self.invert_f(&v, seed)?;
            Ok((self.f_deriv(&u)?.recip(), Some(u)))
        }
    }

    /// Jet of the lift A at x up to order n.
    pub fn jet(&self, x: &Real, n: usize) -> Result<Jet> {
        let (k, t) = self.reduce(x);
        let ks = Rational::from(&self.s * &k);
        if t <= self.delta {
            let fj = self.f_jet(&t, n)?;
            let mut coeffs = fj.coeffs().to_vec();
            coeffs[0] = &coeffs[0] + &ks;
            return Ok(Jet::new(x.clone(), coeffs));
        }
        let v = &self.s_real - &t;
        let u = self.invert_f(&v, None)?;
        let fj = self.f_jet(&u, n)?;
        let gj = jet_invert(&fj, n, &Real::pow2(self.prec, -1))?;
        // A(t) = s - G(s - t): A^(i)(t) = (-1)^(i+1) G^(i)(s - t)
        let mut coeffs = Vec::with_capacity(n + 1);
        coeffs.push(&(&(&self.s_real - &u) + &ks) + &Real::zero(self.prec));
        for i in 1..=n {
            let c = gj.coeff(i);
            coeffs.push(if i % 2 == 1 { c.clone() } else { -c });
        }
        Ok(Jet::new(x.clone(), coeffs))
    }

    /// Jet of the inverse lift A^{-1} at y up to order n.
    pub fn inv_jet(&self, y: &Real, n: usize) -> Result<Jet> {
        let (k, v) = self.reduce(y);
        let ks = Rational::from(&self.s * &k);
        let f_top = self.growth_per_period();
        if v <= f_top {
            let u = self.invert_f(&v, None)?;
            let fj = self.f_jet(&u, n)?;
            let gj = jet_invert(&fj, n, &Real::pow2(self.prec, -1))?;
            let mut coeffs = gj.coeffs().to_vec();
            coeffs[0] = &u + &ks;
            return Ok(Jet::new(y.clone(), coeffs));
        }
        // A^{-1}(v) = s - F(s - v)
        let t = &self.s_real - &v;
        let fj = self.f_jet(&t, n)?;
        let mut coeffs = Vec::with_capacity(n + 1);
        coeffs.push(&(&self.s_real - &fj.coeff(0).clone()) + &ks);
        for i in 1..=n {
            let c = fj.coeff(i);
            coeffs.push(if i % 2 == 1 { c.clone() } else { -c });
        }
        Ok(Jet::new(y.clone(), coeffs))
    }

    /// Sampled range of A' over one period plus Lipschitz slack; the
    /// reflected branch contributes the reciprocals of the rising branch, so
    /// a single sweep of F covers both.
    pub fn derivative_range(&self, samples: u32) -> Result<(Real, Real)> {
        let step = &self.delta / samples;
        let mut max_fp = Real::one(self.prec);
        let mut max_fpp = Real::zero(self.prec);
        for i in 0..=samples {
            let t = &step * i;
            let j = self.f_jet(&t, 2)?;
            max_fp = max_fp.max(&j.coeff(1).abs());
            max_fpp = max_fpp.max(&j.coeff(2).abs());
        }
        let slack = (&max_fpp * &step).mul_2exp(-1);
        let hi = &max_fp + &slack;
        Ok((hi.recip(), hi))
    }

    /// Grid estimate of ||A||_n per the max-of-both-sides norm: the largest
    /// |A^(i)| and |(A^{-1})^(i)| for i <= n, sampled over one period with a
    /// per-sample Lipschitz slack from order n+1 (the inverse side's grid
    /// spacing on the image axis is F'(u) du locally, so the slack pairs
    /// each derivative with its own local spacing rather than global maxima).
    pub fn norm(&self, n: usize, samples: u32) -> Result<Real> {
        let mut worst = Real::one(self.prec);
        let step = &self.delta / samples;
        let half_step = step.mul_2exp(-1);
        for i in 0..=samples {
            let t = &step * i;
            let fj = self.f_jet(&t, n + 1)?;
            let gj = jet_invert(&fj, n + 1, &Real::pow2(self.prec, -1))?;
            let dv_half = &half_step * fj.coeff(1);
            for k in 1..=n {
                let f_bound = &fj.coeff(k).abs() + &(&fj.coeff(k + 1).abs() * &half_step);
                let g_bound = &gj.coeff(k).abs() + &(&gj.coeff(k + 1).abs() * &dv_half);
                worst = worst.max(&f_bound).max(&g_bound);
            }
        }
        Ok(worst)
    }
}

/// The constants kappa_j = max|g^(j)| + 1 and the inverse-branch recursion
/// xi_n = xi_{n-1} * sum over tuples with m_1 != n of c_m prod kappa_j^{m_j};
/// rho_n = max(kappa_0..kappa_n, xi_n). These certify ||A||_n <= rho_n /
/// delta^(n^2) independently of s and delta.
pub fn rho_constants(bump: &BumpModel, n_max: usize) -> Result<Vec<Real>> {
    use crate::numerics::bruno::{bruno_coefficient, enumerate_bruno_tuples};
    let prec = bump.prec;
    let mut kappa = Vec::with_capacity(n_max + 1);
    for j in 0..=n_max {
        kappa.push(bump.kappa_bound(j)?);
    }
    let mut xi = vec![Real::one(prec), Real::one(prec)];
    for n in 2..=n_max {
        let mut sum = Real::zero(prec);
        for t in enumerate_bruno_tuples(n)? {
            if t.m[0] as usize == n {
                continue;
            }
            let mut term = Real::from_int(prec, &bruno_coefficient(&t));
            for (idx, &mj) in t.m.iter().enumerate() {
                if mj == 0 {
                    continue;
                }
                term = &term * &kappa[idx + 1].powi(mj as i32);
            }
            sum += &term;
        }
        let next = (&xi[n - 1] * &sum).max(&xi[n - 1]);
        xi.push(next);
    }
    let mut rho = Vec::with_capacity(n_max + 1);
    let mut kmax = Real::zero(prec);
    for n in 0..=n_max {
        kmax = kmax.max(&kappa[n]);
        rho.push(kmax.max(&xi[n.min(xi.len() - 1)]));
    }
    Ok(rho)
}

/// max(c_n ||h||_n^n rho_n, c_n ||h||_n rho_1..rho_n): the two estimates in
/// the composition norm bound ||A o h||_n <= c~(h, n)/delta^(n^2).
pub fn compose_norm_constant(h_norm: &Real, n: usize, rho: &[Real]) -> Result<Real> {
    use crate::numerics::bruno::bruno_coefficient_sum;
    let prec = h_norm.prec();
    let cn = Real::from_int(prec, &bruno_coefficient_sum(n)?);
    let branch_a = &(&cn * &h_norm.powi(n as i32)) * &rho[n];
    let mut rho_prod = Real::one(prec);
    for r in &rho[1..=n] {
        rho_prod = &rho_prod * r;
    }
    let branch_b = &(&cn * h_norm) * &rho_prod;
    Ok(branch_a.max(&branch_b))
}
