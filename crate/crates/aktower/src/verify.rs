//! The invariant suite run by the verify command: exact rational
//! bookkeeping, staircase anchors and ranges, commutation, convergence and
//! norm laws, measure bounds, pointwise ratios, rotation numbers, Hölder
//! fits, and the dimension-ordering consistency rule.
//!
//! Checks that the construction only promises asymptotically ("for all
//! sufficiently large n") are reported with `informational = true` and do
//! not fail the suite.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rug::{Integer, Rational};

use crate::error::Result;
use crate::measure::{
    build_e_n, dim_summary, holder_fit, pointwise_dim_scan, sample_e_n, stratified_pairs,
    DistributionFunction, IntervalUnion,
};
use crate::numerics::bruno::bruno_coefficient_sum;
use crate::numerics::real::Real;
use crate::rotation::{rotation_number_estimate, CircleLift};
use crate::staircase::compose_norm_constant;
use crate::tower::{Tower, TowerLift};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Paper promises the bound only asymptotically; never fails the suite.
    pub informational: bool,
    pub skipped: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Sample count for pointwise scans and commutation checks.
    pub samples: u32,
    /// Grid size for derivative/norm scans.
    pub grid: u32,
    /// E_n materialization cap (arcs).
    pub materialize_cap: u64,
    /// Highest norm order exercised by the norm-law checks.
    pub norm_order: usize,
    /// Birkhoff iteration count.
    pub rot_iters: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            samples: 200,
            grid: 256,
            materialize_cap: 20_000,
            norm_order: 3,
            rot_iters: 10_000,
        }
    }
}

pub fn suite_passed(results: &[CheckResult]) -> bool {
    results
        .iter()
        .all(|c| c.passed || c.informational || c.skipped)
}

fn ok(name: impl Into<String>, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: true,
        informational: false,
        skipped: false,
        detail,
    }
}

fn fail(name: impl Into<String>, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: false,
        informational: false,
        skipped: false,
        detail,
    }
}

fn verdict(name: impl Into<String>, passed: bool, detail: String) -> CheckResult {
    if passed {
        ok(name, detail)
    } else {
        fail(name, detail)
    }
}

fn info(name: impl Into<String>, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        informational: true,
        skipped: false,
        detail,
    }
}

fn skipped(name: impl Into<String>, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: true,
        informational: false,
        skipped: true,
        detail,
    }
}

fn unit_points(prec: u32, count: u32, rng: &mut ChaCha8Rng) -> Vec<Real> {
    (0..count)
        .map(|_| &Real::from_u64(prec, rng.gen::<u64>()) / &Real::pow2(prec, 64))
        .collect()
}

/// Run the whole suite on a tower.
pub fn run_all(tower: &Tower, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let prec = tower.prec();

    // Bruno/Bell exactness (independent recurrence).
    {
        let expected: [u64; 8] = [1, 2, 5, 15, 52, 203, 877, 4140];
        let mut good = true;
        for (i, e) in expected.iter().enumerate() {
            if bruno_coefficient_sum(i + 1)? != *e {
                good = false;
            }
        }
        out.push(verdict(
            "bruno-bell",
            good,
            "coefficient sums equal Bell numbers for n = 1..8".into(),
        ));
    }

    // Exact rational bookkeeping across stages.
    for w in tower.stages.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let expect = Rational::from(&a.s / &b.q);
        let name = format!("stage-rationals:n={}", b.n);
        if b.staircase.is_none() {
            out.push(skipped(name, "rotation-only stage".into()));
            continue;
        }
        let recursion = b.s == expect;
        let unit = b.s.numer() == &Integer::from(1);
        let tau_ok = b.tau == Rational::from((b.p.clone(), b.q.clone()));
        out.push(verdict(
            name,
            recursion && unit && tau_ok,
            format!(
                "s_n = s_prev/q_n: {recursion}; 1/s_n integer: {unit}; tau = p/q: {tau_ok}"
            ),
        ));
    }

    // Commutation, exact and sampled.
    for st in &tower.stages {
        let Some(a) = &st.staircase else { continue };
        let comm = Rational::from(&st.tau / &st.s);
        let name_e = format!("commutation-exact:n={}", st.n);
        out.push(verdict(
            name_e,
            comm.is_integer(),
            format!("tau/s = {comm}"),
        ));
        let tau_r = Real::from_rat(prec, &st.tau);
        let mut worst = Real::zero(prec);
        for x in unit_points(prec, opts.samples.min(1000), &mut rng) {
            let lhs = a.eval(&(&x + &tau_r))?;
            let rhs = &a.eval(&x)? + &tau_r;
            worst = worst.max(&(&lhs - &rhs).abs());
        }
        let bound = Real::pow2(prec, -100);
        out.push(verdict(
            format!("commutation-sampled:n={}", st.n),
            worst <= bound,
            format!("max residual {:e}", worst.to_f64()),
        ));
    }

    // Staircase anchors and derivative ranges.
    for st in &tower.stages {
        let Some(a) = &st.staircase else { continue };
        let s_r = Real::from_rat(prec, &st.s);
        let tol = Real::pow2(prec, -((prec as i32) * 3 / 4));
        let a0 = a.eval(&Real::zero(prec))?.abs();
        let as_ = (&a.eval(&s_r)? - &s_r).abs();
        let ad = (&a.eval(a.delta())? - &(&s_r - a.delta())).abs();
        out.push(verdict(
            format!("staircase-anchors:n={}", st.n),
            a0 <= tol && as_ <= tol && ad <= tol,
            format!(
                "A(0) = {:e}, A(s)-s = {:e}, A(delta)-(s-delta) = {:e}",
                a0.to_f64(),
                as_.to_f64(),
                ad.to_f64()
            ),
        ));
        let (lo, hi) = a.derivative_range(opts.grid)?;
        let range_lo = a.delta() / &s_r.mul_2exp(1);
        let range_hi = &s_r.mul_2exp(1) / a.delta();
        out.push(verdict(
            format!("derivative-range:n={}", st.n),
            lo >= range_lo && hi <= range_hi,
            format!(
                "A' in [{:e}, {:e}] within [{:e}, {:e}]",
                lo.to_f64(),
                hi.to_f64(),
                range_lo.to_f64(),
                range_hi.to_f64()
            ),
        ));
    }

    // Conjugacy convergence: |h_{k+1} - h_k| <= s_k, inverse side <= s_k/m_k,
    // and |h_N - h_k| <= 2 s_k. Sampled values carry rounding noise at the
    // working precision, which dominates when s_k sits far below one ulp of
    // the sample points (the astronomically fine strict stages).
    let levels = tower.levels();
    if levels >= 1 {
        let noise = Real::pow2(prec, -(prec as i32) + 24);
        let pts = unit_points(prec, opts.samples.min(200), &mut rng);
        for k in 1..=levels {
            let st = &tower.stages[k - 1];
            let s_k = Real::from_rat(prec, &st.s);
            let mut d_fwd = Real::zero(prec);
            let mut d_inv = Real::zero(prec);
            let mut d_deep = Real::zero(prec);
            for x in &pts {
                let hk = tower.eval_h(k - 1, x)?;
                let hk1 = tower.eval_h(k, x)?;
                d_fwd = d_fwd.max(&(&hk1 - &hk).abs());
                let ik = tower.eval_h_inv(k - 1, x)?;
                let ik1 = tower.eval_h_inv(k, x)?;
                d_inv = d_inv.max(&(&ik1 - &ik).abs());
                let deep = tower.eval_h(levels, x)?;
                d_deep = d_deep.max(&(&deep - &hk).abs());
            }
            let m_k = &tower.stages[k - 1].m_lo;
            let inv_bound = &(&s_k / m_k) + &noise;
            // |h_N - h_k| <= sum_{j>=k} s_j <= 2 s_k
            let deep_bound = &s_k.mul_2exp(1) + &noise;
            let fwd_bound = &s_k + &noise;
            out.push(verdict(
                format!("h-convergence:k={k}"),
                d_fwd <= fwd_bound && d_inv <= inv_bound && d_deep <= deep_bound,
                format!(
                    "|h_k+1 - h_k| = {:e} <= {:e}; inverse {:e} <= {:e}; deep {:e} <= {:e}",
                    d_fwd.to_f64(),
                    s_k.to_f64(),
                    d_inv.to_f64(),
                    inv_bound.to_f64(),
                    d_deep.to_f64(),
                    deep_bound.to_f64()
                ),
            ));
        }
    }

    // Norm laws: ||A_n||_j <= rho_j / delta^(j^2) and the composition law.
    for st in &tower.stages {
        let Some(a) = &st.staircase else { continue };
        let fine = st.s.denom().to_u64().is_some_and(|d| d <= 100_000);
        if !fine {
            out.push(skipped(
                format!("staircase-norm-law:n={}", st.n),
                "stage too fine for grid norms".into(),
            ));
            continue;
        }
        let mut good = true;
        let mut detail = String::new();
        for j in 1..=opts.norm_order {
            let norm = a.norm(j, opts.grid)?;
            let bound = &tower.rho()[j] / &a.delta().powi((j * j) as i32);
            if norm > bound {
                good = false;
            }
            detail.push_str(&format!(
                "j={j}: {:.3e} <= {:.3e}; ",
                norm.to_f64(),
                bound.to_f64()
            ));
        }
        out.push(verdict(
            format!("staircase-norm-law:n={}", st.n),
            good,
            detail,
        ));
    }
    for (idx, st) in tower.stages.iter().enumerate() {
        let Some(a) = &st.staircase else { continue };
        let level = idx + 1; // A_n o h_n = h at this level
        let fine = st.s.denom().to_u64().is_some_and(|d| d <= 20_000);
        if !fine {
            out.push(skipped(
                format!("compose-norm-law:n={}", st.n),
                "stage too fine for grid norms".into(),
            ));
            continue;
        }
        let mut good = true;
        let mut detail = String::new();
        for j in 1..=opts.norm_order.min(4) {
            let h_norm = tower.h_norm_grid(idx, j)?;
            let ct = compose_norm_constant(&h_norm, j, tower.rho())?;
            let bound = &ct / &a.delta().powi((j * j) as i32);
            let measured = tower.h_norm_grid(level, j)?;
            if measured > bound {
                good = false;
            }
            detail.push_str(&format!(
                "j={j}: {:.3e} <= {:.3e}; ",
                measured.to_f64(),
                bound.to_f64()
            ));
        }
        out.push(verdict(
            format!("compose-norm-law:n={}", st.n),
            good,
            detail,
        ));
    }

    // Two-rotations distance bound and the 1/2^n convergence target.
    for n in 1..tower.stages.len() as u32 {
        if tower.stages[n as usize].staircase.is_none() {
            break;
        }
        let fine = tower.stages[n as usize - 1]
            .s
            .denom()
            .to_u64()
            .is_some_and(|d| d <= 20_000);
        if !fine {
            out.push(skipped(
                format!("distance-bound:n={n}"),
                "stage too fine for jet grids".into(),
            ));
            continue;
        }
        let rep = tower.distance_dn(n, 2, opts.grid.min(128))?;
        out.push(verdict(
            format!("distance-bound:n={n}"),
            rep.bound_holds,
            format!(
                "d_2(f_{n}, f_{}) = {:e} <= c_2 |dtau| ||h||^3 = {:e}",
                n + 1,
                rep.measured.to_f64(),
                rep.two_rotations_bound.to_f64()
            ),
        ));
        out.push(info(
            format!("distance-halving:n={n}"),
            rep.halving_holds,
            format!(
                "d_2 = {:e} vs 1/2^n = {:e} (promised for sufficiently large n only)",
                rep.measured.to_f64(),
                rep.halving_bound.to_f64()
            ),
        ));
    }

    // Measure of the exceptional sets against 1 - 5/2^(n sigma).
    let beta = tower.config.beta.clone();
    let sigma = tower.config.sigma();
    for n in 1..=tower.stages.len() as u32 {
        if tower.stages[n as usize - 1].staircase.is_none() {
            continue;
        }
        let e_n = match build_e_n(tower, n, opts.materialize_cap) {
            Ok(u) => u,
            Err(_) => {
                out.push(skipped(
                    format!("mu-E:n={n}"),
                    "set too fine to materialize".into(),
                ));
                continue;
            }
        };
        let h = DistributionFunction::TowerLevel {
            tower,
            level: levels,
        };
        let mu = h.measure_of(&e_n)?;
        // beta = 0: 1 - 5/2^n exactly; beta > 0: 1 - 5/2^(n sigma) at the
        // working precision
        let bound = if beta == 0 {
            let b = Rational::from(1)
                - Rational::from((Integer::from(5), Integer::from(1) << n));
            Real::from_rat(prec, &b)
        } else {
            let expo = Rational::from(&sigma * Rational::from(n));
            let pow = Real::from_u64(prec, 2).pow_rat(&expo);
            &Real::one(prec) - &(&Real::from_u64(prec, 5) / &pow)
        };
        out.push(verdict(
            format!("mu-E:n={n}"),
            mu >= bound,
            format!("mu(E_{n}) = {:.6} >= {:.6}", mu.to_f64(), bound.to_f64()),
        ));
        // exact growth bookkeeping when delta is rational
        let st = &tower.stages[n as usize - 1];
        if let Some(de) = &st.delta_exact {
            let lhs = Rational::from(&st.s - de) * Rational::from(st.s.denom().clone());
            let rhs = Rational::from(1) - Rational::from(de / &st.s);
            out.push(verdict(
                format!("growth-identity:n={n}"),
                lhs == rhs,
                format!("(s - delta)/s = {}", lhs.to_f64()),
            ));
        }
    }

    // Pointwise ratios along r_n and r~_n at points sampled from E_n.
    let deep = DistributionFunction::TowerLevel {
        tower,
        level: levels,
    };
    for n in 2..=tower.stages.len() as u32 {
        if tower.stages[n as usize - 1].staircase.is_none() {
            continue;
        }
        let pts = match sample_e_n(tower, n, opts.samples as usize, opts.seed) {
            Ok(p) => p,
            Err(_) => {
                out.push(skipped(
                    format!("pointwise-upper:n={n}"),
                    "stage too fine to sample".into(),
                ));
                continue;
            }
        };
        let r_n = tower.r_n(n)?;
        let rt_n = tower.r_tilde_n(n)?;
        let scales = vec![
            (format!("r_{n}"), r_n.clone()),
            (format!("rt_{n}"), rt_n.clone()),
        ];
        let rep = pointwise_dim_scan(&deep, &pts, &scales)?;
        let upper_target = if beta == 0 {
            2.0 / n as f64 + 0.1
        } else {
            beta.to_f64() + 1.0 / n as f64 + 0.1
        };
        let lower_target = 1.0 - 1.0 / n as f64 - 0.05;
        let mut upper_hits = 0usize;
        let mut upper_total = 0usize;
        let mut lower_ok = true;
        let mut worst_lower = f64::INFINITY;
        for row in &rep.rows {
            let Some(ratio) = &row.ratio else { continue };
            let v = ratio.to_f64();
            if row.scale_label.starts_with("r_") {
                upper_total += 1;
                if v <= upper_target {
                    upper_hits += 1;
                }
            } else {
                worst_lower = worst_lower.min(v);
                if v < lower_target {
                    lower_ok = false;
                }
            }
        }
        let frac = if upper_total == 0 {
            0.0
        } else {
            upper_hits as f64 / upper_total as f64
        };
        // the ratio bounds are consequences of the selection conditions; a
        // tower whose stage-n scale floors were violated (relaxed waivers)
        // gets them reported informationally rather than enforced
        let floors_ok = tower.stages[n as usize - 1]
            .report
            .iter()
            .filter(|c| c.name.starts_with("iii:q>=(3M") || c.name.starts_with("iii:q>=1/m"))
            .all(|c| c.holds);
        let push = |out: &mut Vec<CheckResult>, name: String, passed: bool, detail: String| {
            if floors_ok {
                out.push(verdict(name, passed, detail));
            } else {
                out.push(info(name, passed, detail + " [scale floors waived at this stage]"));
            }
        };
        push(
            &mut out,
            format!("pointwise-upper:n={n}"),
            frac >= 0.95,
            format!(
                "{:.1}% of E_{n} samples had log-ratio <= {upper_target:.4} at r_{n}",
                100.0 * frac
            ),
        );
        push(
            &mut out,
            format!("pointwise-lower:n={n}"),
            lower_ok,
            format!(
                "min ratio {worst_lower:.4} >= {lower_target:.4} at r~_{n}"
            ),
        );
    }

    // Rotation number: Birkhoff estimate within 1/N and lift periodicity.
    if !tower.stages.is_empty() {
        let stage = tower.stages.len() as u32;
        let st = tower.stage(stage)?;
        let lift = TowerLift { tower, stage };
        let tau = Real::from_rat(prec, &st.tau);
        let mut worst = Real::zero(prec);
        for x in unit_points(prec, 10, &mut rng) {
            let (est, bar) = rotation_number_estimate(&lift, &x, opts.rot_iters)?;
            worst = worst.max(&(&est - &tau).abs());
            debug_assert!(bar > Real::zero(prec));
        }
        let bar = Real::from_u64(prec, opts.rot_iters).recip();
        out.push(verdict(
            "rotation-number",
            worst <= bar,
            format!(
                "max |estimate - tau_{stage}| = {:e} <= 1/N = {:e}",
                worst.to_f64(),
                bar.to_f64()
            ),
        ));
        if st.q <= 1000 {
            let qn = st.q.to_u64().unwrap();
            let p_r = Real::from_int(prec, &st.p);
            let mut worst = Real::zero(prec);
            for x in unit_points(prec, 5, &mut rng) {
                let fq = lift.eval_power(&x, qn)?;
                worst = worst.max(&(&(&fq - &x) - &p_r).abs());
            }
            out.push(verdict(
                "lift-periodicity",
                worst < Real::pow2(prec, -100),
                format!("max |F^q(x) - x - p| = {:e}", worst.to_f64()),
            ));
        } else {
            out.push(skipped(
                "lift-periodicity",
                format!("q_{stage} = {} too large for the toy check", st.q),
            ));
        }
    }

    // Hölder continuity for beta towers.
    if beta > 0 && beta < 1 && levels >= 1 {
        let mut strata = Vec::new();
        for st in &tower.stages {
            strata.push(Real::from_rat(prec, &st.s));
            if st.staircase.is_some() {
                strata.push(tower.r_n(st.n)?);
            }
        }
        let pairs = stratified_pairs(&strata, (opts.samples as usize).max(32), prec, opts.seed);
        let fit = holder_fit(&deep, &beta, &pairs)?;
        out.push(verdict(
            "holder-global",
            fit <= Real::from_u64(prec, 3),
            format!("max |h(x)-h(y)|/|x-y|^beta = {:.4} <= 3", fit.to_f64()),
        ));
        // stagewise: |h_n(x) - h_n(y)| <= |x - y|^beta for |x - y| <= s_{n-1}
        let beta_r = Real::from_rat(prec, &beta);
        let mut stage_ok = true;
        let mut worst = 0f64;
        for k in 1..=levels {
            let s_prev = Real::from_rat(prec, &tower.stages[k - 1].s);
            let mut rng2 = ChaCha8Rng::seed_from_u64(opts.seed ^ (k as u64) << 32);
            for _ in 0..opts.samples {
                let u = rng2.gen::<u64>();
                let v = rng2.gen::<u64>();
                let d = &(&Real::from_u64(prec, v) / &Real::pow2(prec, 64)) * &s_prev;
                if d.is_zero() {
                    continue;
                }
                let span = &Real::one(prec) - &d;
                let x = &(&Real::from_u64(prec, u) / &Real::pow2(prec, 64)) * &span;
                let y = &x + &d;
                let num = (&tower.eval_h(k, &x)? - &tower.eval_h(k, &y)?).abs();
                let ratio = &num / &d.pow(&beta_r);
                worst = worst.max(ratio.to_f64());
                if ratio > Real::one(prec) {
                    stage_ok = false;
                }
            }
        }
        out.push(verdict(
            "holder-stagewise",
            stage_ok,
            format!("max stagewise ratio {worst:.4} <= 1 for |x-y| <= s_(n-1)"),
        ));
    }

    // Box counting: N(G_2, r_n) <= 1/s_n for materializable stages.
    if levels >= 2 {
        let mut g: Option<IntervalUnion> = None;
        let mut deepest = 1u32;
        for n in 2..=tower.stages.len() as u32 {
            if tower.stages[n as usize - 1].staircase.is_none() {
                break;
            }
            match build_e_n(tower, n, opts.materialize_cap) {
                Ok(e) => {
                    g = Some(match g {
                        None => e,
                        Some(prev) => prev.intersect(&e),
                    });
                    deepest = n;
                }
                Err(_) => break,
            }
        }
        if let Some(g2) = g {
            let mut good = true;
            let mut detail = String::new();
            for n in 2..=deepest {
                let r_n = tower.r_n(n)?;
                let count = g2.covering_count(&r_n)?;
                let cap = tower.stages[n as usize - 1].s.denom().to_u64().unwrap();
                if count > cap {
                    good = false;
                }
                detail.push_str(&format!("N(G_2, r_{n}) = {count} <= {cap}; "));
            }
            out.push(verdict("box-counting-G", good, detail));
        } else {
            out.push(skipped(
                "box-counting-G",
                "no materializable exceptional sets".into(),
            ));
        }
    }

    // Dimension ordering on a dyadic ladder at sampled points.
    {
        let pts = unit_points(prec, 16, &mut rng);
        let ladder: Vec<(String, Real)> = (3..=9)
            .map(|k| (format!("2^-{}", k * 8), Real::pow2(prec, -(k * 8))))
            .collect();
        let rep = pointwise_dim_scan(&deep, &pts, &ladder)?;
        let summary = dim_summary(&rep, None, None);
        out.push(verdict(
            "dim-ordering",
            summary.ordering_ok,
            format!(
                "lower {:.4}, upper {:.4}, flagged {}",
                summary.lower_pointwise, summary.upper_pointwise, summary.flagged_rows
            ),
        ));
    }

    Ok(out)
}
