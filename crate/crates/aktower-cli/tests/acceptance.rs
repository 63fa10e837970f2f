//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its elapsed time and asserting the stated tolerance and budget.
//!
//! The criteria share three towers (built once): the 512-bit relaxed
//! Liouville tower (beta = 0, q_cap = 10^6, 3 stages), a beta = 1/2 tower,
//! and a coarse toy tower whose exceptional sets materialize fully. A mutex
//! serializes the tests so each criterion's wall clock measures its own
//! work.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rug::{Integer, Rational};

use aktower::bump::{BumpModel, BumpProfile};
use aktower::measure::{
    box_counting, build_e_n, covering_slope, holder_fit, pointwise_dim_scan, sample_e_n,
    DistributionFunction, IntervalUnion,
};
use aktower::numerics::bruno::bruno_coefficient_sum;
use aktower::numerics::jet::{jet_compose, jet_invert, Jet};
use aktower::numerics::real::Real;
use aktower::rotation::{rotation_number_estimate, CircleLift, TargetSpec};
use aktower::staircase::{compose_norm_constant, rho_constants, Staircase};
use aktower::tower::{Tower, TowerConfig, TowerLift};

fn lock() -> MutexGuard<'static, ()> {
    static GATE: Mutex<()> = Mutex::new(());
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn liouville_512() -> &'static Tower {
    static T: OnceLock<Tower> = OnceLock::new();
    T.get_or_init(|| {
        let target = TargetSpec::parse("series:base=10,exponents=factorial").unwrap();
        let mut c = TowerConfig::new(target, Rational::from(0));
        c.max_stage = 3;
        c.prec = 512;
        Tower::build(c).unwrap()
    })
}

fn beta_half_tower() -> &'static Tower {
    static T: OnceLock<Tower> = OnceLock::new();
    T.get_or_init(|| {
        let target = TargetSpec::parse("cf:0,150").unwrap();
        let mut c = TowerConfig::new(target, Rational::from((1, 2)));
        c.max_stage = 2;
        c.q_cap = Some(Integer::from(1000));
        Tower::build(c).unwrap()
    })
}

fn toy_tower() -> &'static Tower {
    static T: OnceLock<Tower> = OnceLock::new();
    T.get_or_init(|| {
        let target = TargetSpec::parse("cf:0,49,7").unwrap();
        let mut c = TowerConfig::new(target, Rational::from(0));
        c.max_stage = 3;
        c.q_cap = Some(Integer::from(1000));
        Tower::build(c).unwrap()
    })
}

fn report(name: &str, t0: Instant, budget: Duration) {
    let dt = t0.elapsed();
    println!("ACCEPT {name}: PASS in {dt:.2?} (budget {budget:.0?})");
    assert!(dt <= budget, "{name} exceeded its {budget:?} budget: {dt:?}");
}

#[test]
fn c01_bruno_bell_sums() {
    let _g = lock();
    let t0 = Instant::now();
    let expected: [u64; 8] = [1, 2, 5, 15, 52, 203, 877, 4140];
    for (i, e) in expected.iter().enumerate() {
        assert_eq!(bruno_coefficient_sum(i + 1).unwrap(), Integer::from(*e));
    }
    report("c01 bruno/bell", t0, Duration::from_secs(1));
}

#[test]
fn c02_staircase_anchors_and_ranges() {
    let _g = lock();
    let t0 = Instant::now();
    let prec = 256;
    let bump = BumpModel::build(BumpProfile::default(), prec).unwrap();
    let tol_anchor = Real::pow2(prec, -200);
    let tol_round = Real::pow2(prec, -120);
    for den in [2u32, 4, 8] {
        let s = Rational::from((1, den));
        let de = Rational::from(&s / Rational::from(8));
        let st = Staircase::build(
            s.clone(),
            Real::from_rat(prec, &de),
            Some(de),
            bump.clone(),
            prec,
        )
        .unwrap();
        let s_r = Real::from_rat(prec, &s);
        // anchors exact to 2^-200
        assert!(st.eval(&Real::zero(prec)).unwrap().abs() <= tol_anchor);
        assert!((&st.eval(&s_r).unwrap() - &s_r).abs() <= tol_anchor);
        let expect = &s_r - st.delta();
        assert!((&st.eval(st.delta()).unwrap() - &expect).abs() <= tol_anchor);
        // sampled A' within [delta/(2s), 2s/delta] at 10^4 points
        let lo = st.delta() / &s_r.mul_2exp(1);
        let hi = &s_r.mul_2exp(1) / st.delta();
        let n = 10_000u32;
        let mut seed: Option<Real> = None;
        for i in 0..n {
            let x = &Real::from_u64(prec, i as u64) / n;
            let (d, root) = st.deriv_warm(&x, seed.as_ref()).unwrap();
            if root.is_some() {
                seed = root;
            }
            assert!(d >= lo && d <= hi, "derivative out of range at {i}");
        }
        // inverse roundtrip residual < 2^-120
        for i in 0..1000u32 {
            let x = &Real::from_u64(prec, 1 + i as u64) / 1001u32;
            let y = st.eval(&x).unwrap();
            let back = st.eval_inv(&y).unwrap();
            assert!((&st.eval(&back).unwrap() - &y).abs() < tol_round);
            assert!((&back - &x).abs() < tol_round);
        }
    }
    report("c02 staircase anchors", t0, Duration::from_secs(30));
}

#[test]
fn c03_jet_inversion_round_trip() {
    let _g = lock();
    let t0 = Instant::now();
    let prec = 256;
    let order = 8usize;
    let tol = Real::pow2(prec, -100);
    let floor = Real::pow2(prec, -30);
    // exp at 0
    let e = Real::zero(prec).exp();
    let jet = Jet::new(Real::zero(prec), vec![e; order + 1]);
    let inv = jet_invert(&jet, order, &floor).unwrap();
    let round = jet_compose(&inv, &jet, order, &tol).unwrap();
    assert!(round.max_coeff_distance(&Jet::identity(Real::zero(prec), order)) < tol);
    // staircase pieces at 20 sampled points across both branches
    let bump = BumpModel::build(BumpProfile::default(), prec).unwrap();
    let s = Rational::from((1, 2));
    let de = Rational::from(&s / Rational::from(8));
    let st = Staircase::build(s, Real::from_rat(prec, &de), Some(de), bump, prec).unwrap();
    for i in 0..20u32 {
        let x = &(&Real::from_u64(prec, i as u64) + &Real::from_f64(prec, 0.45)) / 41u32;
        let j = st.jet(&x, order).unwrap();
        let ji = st.inv_jet(j.value(), order).unwrap();
        let round = jet_compose(&ji, &j, order, &tol).unwrap();
        let dist = round.max_coeff_distance(&Jet::identity(x.clone(), order));
        assert!(dist < tol, "point {i}: distance {dist:e}");
    }
    report("c03 jet inversion", t0, Duration::from_secs(30));
}

#[test]
fn c04_norm_laws() {
    let _g = lock();
    let t0 = Instant::now();
    let prec = 256;
    let target = TargetSpec::parse("series:base=10,exponents=factorial").unwrap();
    let mut c = TowerConfig::new(target, Rational::from(0));
    c.max_stage = 2;
    c.prec = prec;
    let tower = Tower::build(c).unwrap();
    let a2 = tower.staircase_at(1).unwrap();
    let rho = rho_constants(tower.bump_model(), 5).unwrap();
    for n in 1..=4usize {
        // ||A||_n <= rho_n / delta^(n^2)
        let norm = a2.norm(n, 256).unwrap();
        let bound = &rho[n] / &a2.delta().powi((n * n) as i32);
        assert!(norm <= bound, "staircase norm law at n = {n}");
        // ||A o h||_n <= c~(h, n)/delta^(n^2) with h = h_2 (one staircase)
        let h_norm = tower.h_norm_grid(1, n).unwrap();
        let ct = compose_norm_constant(&h_norm, n, &rho).unwrap();
        let cbound = &ct / &a2.delta().powi((n * n) as i32);
        let measured = tower.h_norm_grid(2, n).unwrap();
        assert!(measured <= cbound, "composition norm law at n = {n}");
    }
    report("c04 norm laws", t0, Duration::from_secs(120));
}

#[test]
fn c05_pointwise_ratios_512() {
    let _g = lock();
    let t0 = Instant::now();
    let tower = liouville_512();
    assert_eq!(
        tower.stages.iter().map(|s| s.q.clone()).collect::<Vec<_>>(),
        vec![Integer::from(1), Integer::from(100), Integer::from(1_000_000)]
    );
    let deep = DistributionFunction::TowerLevel {
        tower,
        level: tower.levels(),
    };
    for n in [2u32, 3] {
        let pts = sample_e_n(tower, n, 1000, 20260809).unwrap();
        let scales = vec![
            ("r".to_string(), tower.r_n(n).unwrap()),
            ("rt".to_string(), tower.r_tilde_n(n).unwrap()),
        ];
        let rep = pointwise_dim_scan(&deep, &pts, &scales).unwrap();
        let upper_target = 2.0 / n as f64 + 0.1;
        let lower_target = 1.0 - 1.0 / n as f64 - 0.05;
        let (mut hits, mut total) = (0usize, 0usize);
        for row in &rep.rows {
            assert!(!row.flagged, "mass underflow at n = {n}");
            let v = row.ratio.as_ref().unwrap().to_f64();
            if row.scale_label == "r" {
                total += 1;
                if v <= upper_target {
                    hits += 1;
                }
            } else {
                assert!(
                    v >= lower_target,
                    "ratio {v:.4} below {lower_target:.4} at r~_{n}"
                );
            }
        }
        let frac = hits as f64 / total as f64;
        assert!(
            frac >= 0.95,
            "only {:.1}% of E_{n} samples met the r_{n} bound",
            100.0 * frac
        );
        println!("  c05 n={n}: {:.1}% under {upper_target:.3}", 100.0 * frac);
    }
    report("c05 pointwise ratios", t0, Duration::from_secs(600));
}

#[test]
fn c06_measure_of_exceptional_sets() {
    let _g = lock();
    let t0 = Instant::now();
    // beta = 0: mu(E_2) >= 1 - 5/2^2 against the deepest conjugacy
    let tower = liouville_512();
    let e2 = build_e_n(tower, 2, 10_000).unwrap();
    let deep = DistributionFunction::TowerLevel {
        tower,
        level: tower.levels(),
    };
    let mu = deep.measure_of(&e2).unwrap();
    // 1 - 5/2^2 exactly, compared in the measure's own precision
    let bound0 = Real::from_rat(512, &Rational::from((Integer::from(-1), Integer::from(4))));
    assert!(mu >= bound0);
    // the measured value also matches its finite-stage prediction
    // 1 - delta_2/s_2 up to the deeper-stage correction 4 s_3/s_2
    let st2 = tower.stage(2).unwrap();
    let predict = 1.0
        - (st2.delta.as_ref().unwrap() / &Real::from_rat(512, &st2.s)).to_f64();
    assert!((mu.to_f64() - predict).abs() < 1e-4, "mu = {} vs {}", mu.to_f64(), predict);

    // beta = 1/2: mu(E_2) >= 1 - 5/2^(2 sigma), sigma = 1/3
    let bt = beta_half_tower();
    let e2b = build_e_n(bt, 2, 10_000).unwrap();
    let deep_b = DistributionFunction::TowerLevel {
        tower: bt,
        level: bt.levels(),
    };
    let mu_b = deep_b.measure_of(&e2b).unwrap();
    let sigma = bt.config.sigma();
    assert_eq!(sigma, Rational::from((1, 3)));
    // 1 - 5/2^(2 sigma) at the tower's precision
    let pow = Real::from_u64(bt.prec(), 2).pow_rat(&Rational::from((2, 3)));
    let bound_b = &Real::one(bt.prec()) - &(&Real::from_u64(bt.prec(), 5) / &pow);
    assert!(mu_b >= bound_b);
    println!(
        "  c06 mu(E_2) beta=0: {:.6}; beta=1/2: {:.6}",
        mu.to_f64(),
        mu_b.to_f64()
    );
    report("c06 mu(E_n) bounds", t0, Duration::from_secs(60));
}

#[test]
fn c07_holder_continuity() {
    let _g = lock();
    let t0 = Instant::now();
    let tower = beta_half_tower();
    let prec = tower.prec();
    let beta = Rational::from((1, 2));
    let deep = DistributionFunction::TowerLevel {
        tower,
        level: tower.levels(),
    };
    // 10^4 stratified pairs across per-stage scales s_n, r_n and uniform
    let mut strata = Vec::new();
    for st in &tower.stages {
        strata.push(Real::from_rat(prec, &st.s));
        if st.staircase.is_some() && st.n >= 2 {
            strata.push(tower.r_n(st.n).unwrap());
        }
    }
    let per = 10_000 / (strata.len() + 1);
    let pairs = aktower::measure::stratified_pairs(&strata, per, prec, 7);
    assert!(pairs.len() >= 9_000);
    let fit = holder_fit(&deep, &beta, &pairs).unwrap();
    assert!(fit <= Real::from_u64(prec, 3), "Hölder ratio {:.4}", fit.to_f64());
    // stagewise induction bound: |h_n(x) - h_n(y)| <= |x-y|^beta for
    // |x - y| <= s_(n-1)
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let beta_r = Real::from_rat(prec, &beta);
    for level in 1..=tower.levels() {
        let s_prev = Real::from_rat(prec, &tower.stages[level - 1].s);
        for _ in 0..1000 {
            let u = rng.gen::<u64>();
            let v = rng.gen::<u64>();
            let d = &(&Real::from_u64(prec, v) / &Real::pow2(prec, 64)) * &s_prev;
            if d.is_zero() {
                continue;
            }
            let span = &Real::one(prec) - &d;
            let x = &(&Real::from_u64(prec, u) / &Real::pow2(prec, 64)) * &span;
            let y = &x + &d;
            let num = (&tower.eval_h(level, &x).unwrap() - &tower.eval_h(level, &y).unwrap()).abs();
            let ratio = &num / &d.pow(&beta_r);
            assert!(
                ratio <= Real::one(prec),
                "stagewise ratio {:.4} at level {level}",
                ratio.to_f64()
            );
        }
    }
    println!("  c07 max Hölder ratio {:.4}", fit.to_f64());
    report("c07 hölder", t0, Duration::from_secs(120));
}

#[test]
fn c08_rotation_numbers() {
    let _g = lock();
    let t0 = Instant::now();
    // Birkhoff estimate of f_3 within 1/N for N = 10^5 at 10 base points
    let tower = liouville_512();
    let prec = tower.prec();
    let lift = TowerLift { tower, stage: 3 };
    let tau = Real::from_rat(prec, &tower.stage(3).unwrap().tau);
    let n = 100_000u64;
    let bar = Real::from_u64(prec, n).recip();
    for i in 0..10u32 {
        let x = &(&Real::from_u64(prec, i as u64) + &Real::from_f64(prec, 0.05)) / 10u32;
        let (est, _) = rotation_number_estimate(&lift, &x, n).unwrap();
        assert!((&est - &tau).abs() <= bar, "point {i}");
    }
    // the shortcut agrees with direct iteration
    let x = Real::from_f64(prec, 0.37);
    let mut direct = x.clone();
    for _ in 0..5 {
        direct = lift.eval(&direct).unwrap();
    }
    assert!((&direct - &lift.eval_power(&x, 5).unwrap()).abs() < Real::pow2(prec, -100));
    // lift periodicity on a small-q toy tower: |F^q(x) - x - p| < 2^-100
    let toy = toy_tower();
    let st3 = toy.stage(3).unwrap();
    let q = st3.q.to_u64().unwrap();
    assert!(q <= 1000);
    let toy_lift = TowerLift {
        tower: toy,
        stage: 3,
    };
    let p_r = Real::from_int(toy.prec(), &st3.p);
    for i in 0..5u32 {
        let x = &(&Real::from_u64(toy.prec(), i as u64) + &Real::from_f64(toy.prec(), 0.3)) / 5u32;
        let fq = toy_lift.eval_power(&x, q).unwrap();
        let resid = (&(&fq - &x) - &p_r).abs();
        assert!(resid < Real::pow2(toy.prec(), -100), "residual {resid:e}");
    }
    report("c08 rotation numbers", t0, Duration::from_secs(120));
}

#[test]
fn c09_commutation() {
    let _g = lock();
    let t0 = Instant::now();
    let tower = liouville_512();
    let prec = tower.prec();
    let bound = Real::pow2(prec, -100);
    for st in &tower.stages {
        // exact integer check tau_n / s_n
        let ratio = Rational::from(&st.tau / &st.s);
        assert!(ratio.is_integer(), "stage {}", st.n);
        let Some(a) = &st.staircase else { continue };
        let tau = Real::from_rat(prec, &st.tau);
        // max over 10^3 samples of |A(x + tau) - (A(x) + tau)| (both mod 1
        // through the lift, which commutes with integer translation)
        let samples = if st.n == 3 { 334u32 } else { 333u32 };
        for i in 0..samples {
            let x = &Real::from_u64(prec, i as u64) / (samples + 1);
            let lhs = a.eval(&(&x + &tau)).unwrap();
            let rhs = &a.eval(&x).unwrap() + &tau;
            assert!((&lhs - &rhs).abs() < bound, "stage {} sample {i}", st.n);
        }
    }
    report("c09 commutation", t0, Duration::from_secs(30));
}

#[test]
fn c10_box_counting() {
    let _g = lock();
    let t0 = Instant::now();
    // N(G_2, r_n) <= 1/s_n for n = 2, 3 on a fully materializable tower
    let tower = toy_tower();
    let e2 = build_e_n(tower, 2, 50_000).unwrap();
    let e3 = build_e_n(tower, 3, 50_000).unwrap();
    let g2 = e2.intersect(&e3);
    for n in [2u32, 3] {
        let r_n = tower.r_n(n).unwrap();
        let count = g2.covering_count(&r_n).unwrap();
        let cap = tower.stage(n).unwrap().s.denom().to_u64().unwrap();
        assert!(count <= cap, "N(G_2, r_{n}) = {count} > 1/s_{n} = {cap}");
        println!("  c10 N(G_2, r_{n}) = {count} <= {cap}");
    }
    // Lebesgue baseline: covering slope of the full circle = 1 +- 0.01
    let prec = 192;
    let full = IntervalUnion::full_circle(prec);
    let eps: Vec<Real> = (6..=14).map(|k| Real::pow2(prec, -k)).collect();
    let curve = box_counting(&full, &eps).unwrap();
    let slope = covering_slope(&curve).unwrap();
    assert!((slope - 1.0).abs() <= 0.01, "Lebesgue slope {slope}");
    // delta-like baseline (periodic orbit of a rational rotation): slope <= 0.05
    let q = 7u32;
    let atom = Real::pow2(prec, -80);
    let arcs: Vec<(Real, Real)> = (0..q)
        .map(|i| {
            let a = &Real::from_u64(prec, i as u64) / q;
            let b = &a + &atom;
            (a, b)
        })
        .collect();
    let orbit = IntervalUnion::new(arcs).unwrap();
    let eps: Vec<Real> = (20..=40).step_by(5).map(|k| Real::pow2(prec, -k)).collect();
    let curve = box_counting(&orbit, &eps).unwrap();
    for (_, n) in &curve {
        assert_eq!(*n, q as u64);
    }
    let atomic_slope = covering_slope(&curve).unwrap();
    assert!(atomic_slope.abs() <= 0.05, "atomic slope {atomic_slope}");
    println!("  c10 slopes: Lebesgue {slope:.4}, atomic {atomic_slope:.4}");
    report("c10 box counting", t0, Duration::from_secs(60));
}

#[test]
fn c11_baseline_dimensions() {
    let _g = lock();
    let t0 = Instant::now();
    // identity tower (beta = 1): pointwise proxy = 1 +- 0.01 everywhere
    let target = TargetSpec::parse("series:base=10,exponents=factorial").unwrap();
    let mut c = TowerConfig::new(target, Rational::from(1));
    c.max_stage = 3;
    c.prec = 256;
    let tower = Tower::build(c).unwrap();
    assert_eq!(tower.levels(), 0);
    let h = DistributionFunction::TowerLevel {
        tower: &tower,
        level: 0,
    };
    let pts: Vec<Real> = (0..50)
        .map(|i| &Real::from_u64(256, 2 * i + 1) / 101u32)
        .collect();
    let scales: Vec<(String, Real)> = [128i32, 160, 192]
        .iter()
        .map(|k| (format!("2^-{k}"), Real::pow2(256, -k)))
        .collect();
    let rep = pointwise_dim_scan(&h, &pts, &scales).unwrap();
    for row in &rep.rows {
        let v = row.ratio.as_ref().unwrap().to_f64();
        assert!((v - 1.0).abs() <= 0.01, "identity ratio {v}");
    }
    // rational-rotation baseline (uniform atoms on the orbit): proxies near 0
    let step = DistributionFunction::StepOrbit { q: 7, prec: 256 };
    let orbit_pts: Vec<Real> = (0..7).map(|i| &Real::from_u64(256, i) / 7u32).collect();
    let rep = pointwise_dim_scan(&step, &orbit_pts, &scales).unwrap();
    for row in &rep.rows {
        let v = row.ratio.as_ref().unwrap().to_f64();
        assert!(v.abs() <= 0.05, "atomic ratio {v}");
    }
    report("c11 baselines", t0, Duration::from_secs(60));
}

#[test]
fn c12_verify_determinism() {
    let _g = lock();
    let t0 = Instant::now();
    use std::process::Command;
    let dir = tempfile::tempdir().unwrap();
    let tower_path = dir.path().join("tower.json");
    let bin = env!("CARGO_BIN_EXE_aktower");
    let status = Command::new(bin)
        .args([
            "build",
            "--target",
            "cf:0,49,7",
            "--beta",
            "0",
            "--stages",
            "3",
            "--q-cap",
            "1000",
            "--precision",
            "256",
            "--out",
        ])
        .arg(&tower_path)
        .status()
        .unwrap();
    assert!(status.success());
    let run = |report: &std::path::Path| {
        let out = Command::new(bin)
            .args(["verify", "--seed", "7", "--samples", "60", "--tower"])
            .arg(&tower_path)
            .arg("--out")
            .arg(report)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "verify failed: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        out.stdout
    };
    let r1 = dir.path().join("report1.json");
    let r2 = dir.path().join("report2.json");
    let stdout1 = run(&r1);
    let stdout2 = run(&r2);
    assert_eq!(stdout1, stdout2, "verify stdout differs between runs");
    assert_eq!(
        std::fs::read(&r1).unwrap(),
        std::fs::read(&r2).unwrap(),
        "verify reports differ between runs"
    );
    report("c12 determinism", t0, Duration::from_secs(300));
}
