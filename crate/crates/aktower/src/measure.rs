//! Distribution functions, exceptional sets, and the dimension estimators.
//!
//! The conjugacy h at a chosen level acts as the distribution function of
//! the invariant measure: mu(B(x, r)) = h(x + r) - h(x - r) through the
//! lift. Everything here is a finite-stage proxy along explicit scale
//! ladders; reports carry the scales and flags rather than claiming limits.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::real::Real;
use crate::tower::Tower;

/// A measure's CDF on the circle, evaluated through a lift fixing 0.
pub enum DistributionFunction<'a> {
    /// h after `level` staircases of a tower (level 0 is Lebesgue).
    TowerLevel { tower: &'a Tower, level: usize },
    /// Lebesgue baseline.
    Identity { prec: u32 },
    /// Uniform atomic measure on the orbit {i/q}: the rational-rotation
    /// baseline with step-function CDF.
    StepOrbit { q: u64, prec: u32 },
}

impl DistributionFunction<'_> {
    pub fn prec(&self) -> u32 {
        match self {
            DistributionFunction::TowerLevel { tower, .. } => tower.prec(),
            DistributionFunction::Identity { prec } => *prec,
            DistributionFunction::StepOrbit { prec, .. } => *prec,
        }
    }

    /// Monotone lift with h(x + 1) = h(x) + 1 and h(0) = 0.
    pub fn eval_lift(&self, x: &Real) -> Result<Real> {
        match self {
            DistributionFunction::TowerLevel { tower, level } => tower.eval_h(*level, x),
            DistributionFunction::Identity { .. } => Ok(x.clone()),
            DistributionFunction::StepOrbit { q, prec } => {
                let qx = x * &Real::from_u64(*prec, *q);
                Ok(&Real::from_int(*prec, &qx.ceil_int()) / &Real::from_u64(*prec, *q))
            }
        }
    }

    /// Ball mass Delta h(x, r) = h(x + r) - h(x - r), 0 < r < 1/2.
    pub fn measure_ball(&self, x: &Real, r: &Real) -> Result<Real> {
        let prec = self.prec();
        if !(r > &Real::zero(prec) && r < &Real::from_f64(prec, 0.5)) {
            return Err(Error::Domain(format!("radius {r:e} outside (0, 1/2)")));
        }
        let hi = self.eval_lift(&(x + r))?;
        let lo = self.eval_lift(&(x - r))?;
        Ok(&hi - &lo)
    }

    /// Total mass of a union of arcs.
    pub fn measure_of(&self, set: &IntervalUnion) -> Result<Real> {
        let mut acc = Real::zero(self.prec());
        for (a, b) in &set.arcs {
            let hb = self.eval_lift(b)?;
            let ha = self.eval_lift(a)?;
            acc += &(&hb - &ha);
        }
        Ok(acc)
    }
}

/// Sorted disjoint circle arcs [a_i, b_i) with 0 <= a_i < b_i <= 1.
#[derive(Debug, Clone)]
pub struct IntervalUnion {
    arcs: Vec<(Real, Real)>,
}

impl IntervalUnion {
    /// Normalize: wrap into [0, 1), split wrapping arcs, sort, and merge
    /// overlaps. Total length must not exceed 1.
    pub fn new(raw: Vec<(Real, Real)>) -> Result<IntervalUnion> {
        let mut arcs: Vec<(Real, Real)> = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            if b <= a {
                return Err(Error::Domain("arc with non-positive length".into()));
            }
            if &b - &a > Real::one(a.prec()) {
                return Err(Error::Domain("arc longer than the circle".into()));
            }
            let k = a.floor_int();
            let a0 = &a - &Rational::from(k.clone());
            let b0 = &b - &Rational::from(k);
            if b0 > Real::one(a0.prec()) {
                let one = Real::one(a0.prec());
                arcs.push((a0, one.clone()));
                let tail = &b0 - &one;
                if tail > Real::zero(tail.prec()) {
                    arcs.push((Real::zero(tail.prec()), tail));
                }
            } else {
                arcs.push((a0, b0));
            }
        }
        arcs.sort_by(|x, y| x.0.cmp_total(&y.0));
        // merge touching/overlapping arcs
        let mut merged: Vec<(Real, Real)> = Vec::with_capacity(arcs.len());
        for (a, b) in arcs {
            if let Some(last) = merged.last_mut() {
                if a <= last.1 {
                    if b > last.1 {
                        last.1 = b;
                    }
                    continue;
                }
            }
            merged.push((a, b));
        }
        Ok(IntervalUnion { arcs: merged })
    }

    pub fn full_circle(prec: u32) -> IntervalUnion {
        IntervalUnion {
            arcs: vec![(Real::zero(prec), Real::one(prec))],
        }
    }

    pub fn arcs(&self) -> &[(Real, Real)] {
        &self.arcs
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn total_length(&self) -> Real {
        let mut acc = Real::zero(64);
        for (a, b) in &self.arcs {
            acc += &(b - a);
        }
        acc
    }

    /// Intersection with another union (sorted sweep).
    pub fn intersect(&self, other: &IntervalUnion) -> IntervalUnion {
        let mut out = Vec::new();
        let (mut i, mut j) = (0usize, 0usize);
        while i < self.arcs.len() && j < other.arcs.len() {
            let (a1, b1) = &self.arcs[i];
            let (a2, b2) = &other.arcs[j];
            let lo = if a1 >= a2 { a1.clone() } else { a2.clone() };
            let hi = if b1 <= b2 { b1.clone() } else { b2.clone() };
            if lo < hi {
                out.push((lo, hi));
            }
            if b1 <= b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalUnion { arcs: out }
    }

    /// Least number of closed arcs of length `eps` covering the union.
    ///
    /// When some gap is at least `eps`, no covering arc can span that gap,
    /// so the circle problem linearizes there and the left-aligned greedy
    /// sweep is exactly minimal. With no such gap, greedy sweeps from every
    /// arc start are compared while the arc count stays moderate; for huge
    /// unions at such coarse scales a single greedy from the largest gap is
    /// used instead, which overshoots the minimum by at most one arc.
    pub fn covering_count(&self, eps: &Real) -> Result<u64> {
        let prec = eps.prec();
        if self.arcs.is_empty() {
            return Ok(0);
        }
        if eps <= &Real::zero(prec) {
            return Err(Error::Domain("covering scale must be positive".into()));
        }
        if eps >= &Real::one(prec) {
            return Ok(1);
        }
        // cyclic gaps
        let n = self.arcs.len();
        let mut best_gap_idx = 0usize;
        let mut best_gap = Real::zero(prec) - Real::one(prec);
        for i in 0..n {
            let end = &self.arcs[i].1;
            let next_start = if i + 1 < n {
                self.arcs[i + 1].0.clone()
            } else {
                &self.arcs[0].0 + &Real::one(prec)
            };
            let gap = &next_start - end;
            if gap > best_gap {
                best_gap = gap;
                best_gap_idx = i;
            }
        }
        if best_gap.is_zero() || best_gap < Real::zero(prec) {
            // the union is the full circle
            let inv = Real::one(prec) / eps;
            let mut k = inv.ceil_int();
            if Real::from_int(prec, &k) < inv {
                k += 1;
            }
            return Ok(k.to_u64().unwrap_or(u64::MAX));
        }
        let start = (best_gap_idx + 1) % n;
        if &best_gap >= eps || n > 2048 {
            return Ok(self.greedy_from(start, eps));
        }
        let mut best = u64::MAX;
        for s in 0..n {
            best = best.min(self.greedy_from(s, eps));
        }
        Ok(best)
    }

    fn greedy_from(&self, start: usize, eps: &Real) -> u64 {
        let n = self.arcs.len();
        let one = Real::one(eps.prec());
        let mut count = 0u64;
        let mut covered_to: Option<Real> = None;
        for k in 0..n {
            let idx = (start + k) % n;
            let wrap = if start + k >= n { one.clone() } else { Real::zero(eps.prec()) };
            let a = &self.arcs[idx].0 + &wrap;
            let b = &self.arcs[idx].1 + &wrap;
            let pos = match &covered_to {
                Some(c) if *c >= b => continue,
                Some(c) if *c > a => c.clone(),
                _ => a,
            };
            // left-aligned balls over the remaining stretch, counted at once
            let need = &b - &pos;
            let ratio = &need / eps;
            let mut balls = ratio.ceil_int();
            if balls < 1 {
                balls = rug::Integer::from(1);
            }
            count = count.saturating_add(balls.to_u64().unwrap_or(u64::MAX));
            covered_to = Some(&pos + &(eps * &Real::from_int(eps.prec(), &balls)));
        }
        count
    }
}

/// The stage-n exceptional set E_n = h_n^{-1}(union of [i s_n, i s_n + delta_n]).
///
/// s_n divides the period of the innermost inverse A_{n-1}, so that factor
/// is evaluated once per residue class i mod q_n and shifted exactly; only
/// the remaining (coarser) inverses run per endpoint.
pub fn build_e_n(tower: &Tower, n: u32, max_arcs: u64) -> Result<IntervalUnion> {
    let st = tower.stage(n)?;
    let delta = st
        .delta
        .as_ref()
        .ok_or_else(|| Error::Domain("rotation-only stage has no exceptional set".into()))?;
    let count = st.s.denom().clone();
    let count = count.to_u64().filter(|c| *c <= max_arcs).ok_or_else(|| {
        Error::Capacity(format!(
            "E_{n} has 1/s_n = {} arcs, above the materialization cap {max_arcs}",
            st.s.denom()
        ))
    })?;
    let prec = tower.prec();
    let level = n as usize - 1;
    let s_r = Real::from_rat(prec, &st.s);
    let mut arcs = Vec::with_capacity(count as usize);
    if level == 0 {
        for i in 0..count {
            let a = &s_r * &Real::from_u64(prec, i);
            arcs.push((a.clone(), &a + delta));
        }
        return IntervalUnion::new(arcs);
    }
    let inner = tower
        .staircase_at(level - 1)
        .expect("staircase level exists");
    let q_n = st.q.to_u64().ok_or_else(|| {
        Error::Capacity("stage denominator exceeds u64 for materialization".into())
    })?;
    let s_prev = inner.period().clone();
    let mut residues = Vec::with_capacity(q_n as usize);
    let mut prev: Option<Real> = None;
    for j in 0..q_n {
        let base = &s_r * &Real::from_u64(prec, j);
        let a = inner.eval_inv_warm(&base, prev.as_ref())?;
        let b = inner.eval_inv_warm(&(&base + delta), Some(&a))?;
        prev = Some(b.clone());
        residues.push((a, b));
    }
    let mut sweep: Vec<Option<Real>> = Vec::new();
    for i in 0..count {
        let k = i / q_n;
        let j = (i % q_n) as usize;
        let shift = Rational::from(&s_prev * Integer::from(k));
        let a = &residues[j].0 + &shift;
        let b = &residues[j].1 + &shift;
        arcs.push((
            tower.eval_h_inv_warm(level - 1, &a, &mut sweep)?,
            tower.eval_h_inv_warm(level - 1, &b, &mut sweep)?,
        ));
    }
    IntervalUnion::new(arcs)
}

/// Deterministic sample of points from E_n (uniform arc index, uniform
/// offset inside the arc's target interval).
pub fn sample_e_n(tower: &Tower, n: u32, count: usize, seed: u64) -> Result<Vec<Real>> {
    let st = tower.stage(n)?;
    let delta = st
        .delta
        .as_ref()
        .ok_or_else(|| Error::Domain("rotation-only stage has no exceptional set".into()))?;
    let arcs = st
        .s
        .denom()
        .to_u64()
        .ok_or_else(|| Error::Capacity("1/s_n exceeds u64".into()))?;
    let prec = tower.prec();
    let level = n as usize - 1;
    let s_r = Real::from_rat(prec, &st.s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e3779b97f4a7c15));
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let i = rng.gen_range(0..arcs);
        let frac = rng.gen::<u64>();
        let t = &Real::from_u64(prec, frac) / &Real::pow2(prec, 64);
        let target = &(&s_r * &Real::from_u64(prec, i)) + &(delta * &t);
        out.push(tower.eval_h_inv(level, &target)?);
    }
    Ok(out)
}

/// One scanned (point, scale) cell.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub x: Real,
    pub r: Real,
    pub scale_label: String,
    pub delta_h: Real,
    /// log Delta h / log r; None when the mass underflowed.
    pub ratio: Option<Real>,
    pub flagged: bool,
}

/// Scale-by-scale pointwise dimension data.
#[derive(Debug, Default)]
pub struct DimensionReport {
    pub rows: Vec<ScanRow>,
}

impl DimensionReport {
    /// Per-point (min, max) ratio across scales: liminf/limsup proxies.
    pub fn per_point_extremes(&self) -> Vec<(Real, Real, Real)> {
        let mut out: Vec<(Real, Real, Real)> = Vec::new();
        for row in &self.rows {
            let Some(ratio) = &row.ratio else { continue };
            match out.iter_mut().find(|(x, _, _)| x == &row.x) {
                Some((_, lo, hi)) => {
                    if ratio < lo {
                        *lo = ratio.clone();
                    }
                    if ratio > hi {
                        *hi = ratio.clone();
                    }
                }
                None => out.push((row.x.clone(), ratio.clone(), ratio.clone())),
            }
        }
        out
    }
}

/// Ratio scan of log mu(B(x, r))/log r over the supplied scales.
pub fn pointwise_dim_scan(
    h: &DistributionFunction,
    points: &[Real],
    scales: &[(String, Real)],
) -> Result<DimensionReport> {
    let prec = h.prec();
    let underflow = Real::pow2(prec, -(prec as i32) + 32);
    let mut rows = Vec::with_capacity(points.len() * scales.len());
    for x in points {
        for (label, r) in scales {
            let dh = h.measure_ball(x, r)?;
            let flagged = dh <= underflow;
            let ratio = if flagged {
                None
            } else {
                Some(&dh.ln()? / &r.ln()?)
            };
            rows.push(ScanRow {
                x: x.clone(),
                r: r.clone(),
                scale_label: label.clone(),
                delta_h: dh,
                ratio,
                flagged,
            });
        }
    }
    Ok(DimensionReport { rows })
}

/// Covering curve (eps, N) for a set, plus consecutive-slope estimates
/// log N / log(1/eps).
pub fn box_counting(set: &IntervalUnion, eps_list: &[Real]) -> Result<Vec<(Real, u64)>> {
    let mut out = Vec::with_capacity(eps_list.len());
    for eps in eps_list {
        out.push((eps.clone(), set.covering_count(eps)?));
    }
    Ok(out)
}

/// Least-squares slope of log N against log(1/eps) over a covering curve.
pub fn covering_slope(curve: &[(Real, u64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(e, n)| ((1.0 / e.to_f64()).ln(), (*n as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((m * sxy - sx * sy) / denom)
}

/// Max of |h(x) - h(y)| / |x - y|^beta over the supplied pairs.
pub fn holder_fit(
    h: &DistributionFunction,
    beta: &Rational,
    pairs: &[(Real, Real)],
) -> Result<Real> {
    let prec = h.prec();
    let beta_r = Real::from_rat(prec, beta);
    let mut worst = Real::zero(prec);
    for (x, y) in pairs {
        let d = (x - y).abs();
        if d.is_zero() {
            continue;
        }
        let num = (&h.eval_lift(x)? - &h.eval_lift(y)?).abs();
        let ratio = &num / &d.pow(&beta_r);
        worst = worst.max(&ratio);
    }
    Ok(worst)
}

/// Stratified pair sample at mixed scales: per-scale strata plus uniform.
pub fn stratified_pairs(
    strata: &[Real],
    per_stratum: usize,
    prec: u32,
    seed: u64,
) -> Vec<(Real, Real)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut all = strata.to_vec();
    all.push(Real::one(prec));
    for scale in &all {
        for _ in 0..per_stratum {
            let u = rng.gen::<u64>();
            let v = rng.gen::<u64>();
            let d = &(&Real::from_u64(prec, v) / &Real::pow2(prec, 64)) * scale;
            if d.is_zero() {
                continue;
            }
            let span = &Real::one(prec) - &d;
            let x = &(&Real::from_u64(prec, u) / &Real::pow2(prec, 64)) * &span;
            let y = &x + &d;
            out.push((x, y));
        }
    }
    out
}

/// Aggregated finite-stage proxies with the Hausdorff <= lower box <= upper
/// box ordering check.
#[derive(Debug, Clone)]
pub struct DimSummary {
    pub lower_pointwise: f64,
    pub upper_pointwise: f64,
    pub hausdorff: f64,
    pub box_lower: Option<f64>,
    pub box_upper: Option<f64>,
    pub ordering_ok: bool,
    pub flagged_rows: usize,
}

/// Combine a pointwise report and optional covering slopes. The Hausdorff
/// proxy is the minimum lower-pointwise proxy over sampled points (the
/// pointwise-to-Hausdorff direction of the dimension estimates); ordering
/// is checked with a small tolerance.
pub fn dim_summary(
    report: &DimensionReport,
    box_lower: Option<f64>,
    box_upper: Option<f64>,
) -> DimSummary {
    let ex = report.per_point_extremes();
    let mut lower = f64::INFINITY;
    let mut upper = f64::INFINITY;
    for (_, lo, hi) in &ex {
        lower = lower.min(lo.to_f64());
        upper = upper.min(hi.to_f64());
    }
    if ex.is_empty() {
        lower = f64::NAN;
        upper = f64::NAN;
    }
    let hausdorff = lower;
    let tol = 0.05;
    let mut ordering_ok = true;
    if let Some(bl) = box_lower {
        ordering_ok &= hausdorff <= bl + tol;
        if let Some(bu) = box_upper {
            ordering_ok &= bl <= bu + tol;
        }
    }
    DimSummary {
        lower_pointwise: lower,
        upper_pointwise: upper,
        hausdorff,
        box_lower,
        box_upper,
        ordering_ok,
        flagged_rows: report.rows.iter().filter(|r| r.flagged).count(),
    }
}
