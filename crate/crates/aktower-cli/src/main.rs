//! Batch front end for the conjugacy-tower library: build towers, evaluate
//! maps, run the dimension estimators, estimate rotation numbers, and verify
//! the invariant suite. Exit codes: 0 success, 1 check/construction failure,
//! 2 usage errors. Identical configuration and seed produce byte-identical
//! reports.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rug::{Integer, Rational};

use aktower::measure::{
    box_counting, build_e_n, covering_slope, dim_summary, holder_fit, pointwise_dim_scan,
    sample_e_n, stratified_pairs, DistributionFunction, IntervalUnion,
};
use aktower::numerics::real::{Real, DEFAULT_PRECISION};
use aktower::rotation::{rotation_number_estimate, TargetSpec};
use aktower::tower::{Mode, Tower, TowerConfig, TowerLift};
use aktower::verify::{run_all, suite_passed, VerifyOptions};

#[derive(Parser)]
#[command(name = "aktower", version, about = "circle-diffeomorphism conjugacy towers and dimension estimators")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a tower and write its JSON document.
    Build(BuildArgs),
    /// Evaluate h, h^-1, f, or a staircase on a grid or at a point.
    Eval(EvalArgs),
    /// Pointwise/box dimension scans, covering curves, and Hölder fits.
    Dim(DimArgs),
    /// Birkhoff rotation-number estimates against the stage rotations.
    Rotnum(RotnumArgs),
    /// Run the full invariant suite; exit 0 iff every enforced check passes.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Target rotation number: cf:..., series:..., or rat:p/q.
    #[arg(long)]
    target: String,
    /// Lower-dimension parameter in [0, 1], e.g. 0, 1/2, 1.
    #[arg(long, default_value = "0")]
    beta: String,
    #[arg(long, value_enum, default_value = "relaxed")]
    mode: CliMode,
    /// Denominator cap (relaxed mode).
    #[arg(long, default_value = "1000000")]
    q_cap: String,
    /// Number of stages to build.
    #[arg(long, default_value_t = 3)]
    stages: u32,
    /// Working precision in bits (AKTOWER_PRECISION overrides the default).
    #[arg(long)]
    precision: Option<u32>,
    /// Flat-zone half-width of the step's ramp (rational in (0, 1/4]).
    #[arg(long, default_value = "1/8")]
    bump_eps: String,
    /// Mollifier radius (rational in (0, eps)).
    #[arg(long, default_value = "1/16")]
    bump_eta: String,
    #[arg(long, default_value = "tower.json")]
    out: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum CliMode {
    Strict,
    Relaxed,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    tower: PathBuf,
    /// Map to evaluate: h, hinv, f, or a (staircase of --stage).
    #[arg(long, default_value = "h")]
    map: String,
    /// Stage for f/a; level (staircase count) for h/hinv.
    #[arg(long, default_value_t = 0)]
    stage: u32,
    /// Evaluate at a single point (rational like 1/3, or decimal).
    #[arg(long)]
    x: Option<String>,
    /// Or on a uniform grid of this many points.
    #[arg(long, default_value_t = 16)]
    grid: u32,
}

#[derive(Args)]
struct DimArgs {
    #[arg(long)]
    tower: PathBuf,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV with one row per (x, r) cell.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// CSV of covering curves: set,eps,count.
    #[arg(long)]
    out_cover: Option<PathBuf>,
    /// JSON summary with proxies, scales, and flags.
    #[arg(long)]
    out: Option<PathBuf>,
    /// E_n materialization cap for covering curves.
    #[arg(long, default_value_t = 20000)]
    materialize_cap: u64,
}

#[derive(Args)]
struct RotnumArgs {
    #[arg(long)]
    tower: PathBuf,
    /// Stage whose f_n is iterated (default: deepest).
    #[arg(long)]
    stage: Option<u32>,
    #[arg(long, default_value_t = 100_000)]
    iters: u64,
    #[arg(long, default_value_t = 10)]
    points: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    tower: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    samples: u32,
    /// JSON report output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Bad inputs (unparsable specs, missing files) exit with code 2;
/// construction and verification failures exit with 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Build(a) => cmd_build(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Dim(a) => cmd_dim(a),
        Cmd::Rotnum(a) => cmd_rotnum(a),
        Cmd::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn default_precision(flag: Option<u32>) -> u32 {
    flag.or_else(|| {
        std::env::var("AKTOWER_PRECISION")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(DEFAULT_PRECISION)
}

fn parse_rat_arg(s: &str) -> anyhow::Result<Rational> {
    if let Ok(r) = s.parse::<Rational>() {
        return Ok(r);
    }
    // tolerate decimals like 0.5
    if let Ok(f) = s.parse::<f64>() {
        if let Some(r) = Rational::from_f64(f) {
            return Ok(r);
        }
    }
    Err(usage(format!("cannot parse {s:?} as a rational")))
}

fn load_tower(path: &PathBuf) -> anyhow::Result<Tower> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read tower file {}: {e}", path.display())))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("malformed tower file: {e}")))?;
    Ok(Tower::from_json(v)?)
}

fn cmd_build(a: BuildArgs) -> anyhow::Result<ExitCode> {
    let target = TargetSpec::parse(&a.target).map_err(|e| usage(e.to_string()))?;
    let beta = parse_rat_arg(&a.beta)?;
    let mut config = TowerConfig::new(target, beta);
    config.mode = match a.mode {
        CliMode::Strict => Mode::Strict,
        CliMode::Relaxed => Mode::Relaxed,
    };
    config.q_cap = match config.mode {
        Mode::Strict => None,
        Mode::Relaxed => Some(
            a.q_cap
                .parse::<Integer>()
                .map_err(|e| usage(format!("bad q-cap {}: {e}", a.q_cap)))?,
        ),
    };
    config.max_stage = a.stages;
    config.prec = default_precision(a.precision);
    config.bump.eps = parse_rat_arg(&a.bump_eps)?;
    config.bump.eta = parse_rat_arg(&a.bump_eta)?;
    match Tower::build(config) {
        Ok(tower) => {
            let doc = serde_json::to_string_pretty(&tower.to_json())?;
            fs::write(&a.out, doc)?;
            println!(
                "built {} stages -> {}",
                tower.stages.len(),
                a.out.display()
            );
            for st in &tower.stages {
                let violated: Vec<&str> = st
                    .report
                    .iter()
                    .filter(|c| !c.holds)
                    .map(|c| c.name.as_str())
                    .collect();
                println!(
                    "  stage {}: q = {}, s = {}, violated = [{}]",
                    st.n,
                    st.q,
                    st.s,
                    violated.join(", ")
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("construction failed: {e}");
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<ExitCode> {
    let tower = load_tower(&a.tower)?;
    let prec = tower.prec();
    let xs: Vec<Real> = match &a.x {
        Some(s) => vec![Real::from_rat(prec, &parse_rat_arg(s)?)],
        None => (0..a.grid)
            .map(|i| &Real::from_u64(prec, i as u64) / a.grid)
            .collect(),
    };
    println!("x,value");
    for x in xs {
        let v = match a.map.as_str() {
            "h" => tower.eval_h(a.stage as usize, &x)?,
            "hinv" => tower.eval_h_inv(a.stage as usize, &x)?,
            "f" => tower.eval_f(a.stage.max(1), &x)?,
            "a" => {
                let st = tower
                    .staircase_at(a.stage.max(1) as usize - 1)
                    .ok_or_else(|| anyhow::anyhow!("stage {} has no staircase", a.stage))?;
                st.eval(&x)?
            }
            other => anyhow::bail!("unknown map {other:?} (expected h|hinv|f|a)"),
        };
        println!("{},{}", fmt(&x), fmt(&v));
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt(x: &Real) -> String {
    format!("{:.20e}", x.to_f64())
}

fn cmd_dim(a: DimArgs) -> anyhow::Result<ExitCode> {
    let tower = load_tower(&a.tower)?;
    let prec = tower.prec();
    let levels = tower.levels();
    let deep = DistributionFunction::TowerLevel {
        tower: &tower,
        level: levels,
    };

    // Scale menu: the construction's own ladders plus a dyadic ladder.
    let mut scales: Vec<(String, Real)> = Vec::new();
    for n in 2..=tower.stages.len() as u32 {
        if tower.stages[n as usize - 1].staircase.is_some() {
            scales.push((format!("r_{n}"), tower.r_n(n)?));
            scales.push((format!("rt_{n}"), tower.r_tilde_n(n)?));
        }
    }
    for k in [16i32, 32, 64, 96] {
        scales.push((format!("2^-{k}"), Real::pow2(prec, -k)));
    }

    // Points: from the deepest materialized E_n when the tower has
    // staircases, else uniform.
    let deepest_e = (2..=tower.stages.len() as u32)
        .rev()
        .find(|n| tower.stages[*n as usize - 1].staircase.is_some());
    // exceptional-set sampling needs countable arcs; parameter-level towers
    // (strict mode) fall back to uniform points
    let e_points = deepest_e.and_then(|n| sample_e_n(&tower, n, a.points, a.seed).ok());
    let points: Vec<Real> = match e_points {
        Some(pts) => pts,
        None => {
            use rand::Rng;
            use rand_chacha_seed::seeded;
            let mut rng = seeded(a.seed);
            (0..a.points)
                .map(|_| &Real::from_u64(prec, rng.gen::<u64>()) / &Real::pow2(prec, 64))
                .collect()
        }
    };
    let report = pointwise_dim_scan(&deep, &points, &scales)?;

    // Covering curves on E_n and G_2 where materializable.
    let mut curves: Vec<(String, Vec<(Real, u64)>)> = Vec::new();
    let mut g: Option<IntervalUnion> = None;
    for n in 2..=tower.stages.len() as u32 {
        if tower.stages[n as usize - 1].staircase.is_none() {
            continue;
        }
        if let Ok(e) = build_e_n(&tower, n, a.materialize_cap) {
            let eps: Vec<Real> = (2..=tower.stages.len() as u32)
                .filter_map(|m| tower.r_n(m).ok())
                .collect();
            curves.push((format!("E_{n}"), box_counting(&e, &eps)?));
            g = Some(match g.take() {
                None => e,
                Some(prev) => prev.intersect(&e),
            });
        }
    }
    if let Some(g2) = &g {
        let eps: Vec<Real> = (2..=tower.stages.len() as u32)
            .filter_map(|m| tower.r_n(m).ok())
            .collect();
        curves.push(("G_2".into(), box_counting(g2, &eps)?));
    }

    // Hölder fit for beta towers.
    let beta = tower.config.beta.clone();
    let holder = if beta > 0 && beta < 1 && levels >= 1 {
        let strata: Vec<Real> = tower
            .stages
            .iter()
            .map(|st| Real::from_rat(prec, &st.s))
            .collect();
        let pairs = stratified_pairs(&strata, a.points.max(64), prec, a.seed);
        Some(holder_fit(&deep, &beta, &pairs)?)
    } else {
        None
    };

    // Box slopes and the summary.
    let box_slopes: Vec<(String, Option<f64>)> = curves
        .iter()
        .map(|(name, c)| (name.clone(), covering_slope(c)))
        .collect();
    let g_slope = box_slopes
        .iter()
        .find(|(n, _)| n == "G_2")
        .and_then(|(_, s)| *s);
    let summary = dim_summary(&report, g_slope, Some(1.0));

    // CSV.
    if let Some(path) = &a.out_csv {
        let mut csv = String::from("x,r,scale,delta_h,ratio,flagged\n");
        for row in &report.rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt(&row.x),
                fmt(&row.r),
                row.scale_label,
                fmt(&row.delta_h),
                row.ratio
                    .as_ref()
                    .map(|r| format!("{:.12}", r.to_f64()))
                    .unwrap_or_else(|| "NA".into()),
                row.flagged
            ));
        }
        fs::write(path, csv)?;
    }
    if let Some(path) = &a.out_cover {
        let mut csv = String::from("set,eps,count\n");
        for (name, curve) in &curves {
            for (eps, count) in curve {
                csv.push_str(&format!("{name},{},{count}\n", fmt(eps)));
            }
        }
        fs::write(path, csv)?;
    }

    // JSON summary.
    let beta_case = if beta > 0 && beta < 1 {
        serde_json::json!({
            "beta": beta.to_string(),
            "gamma": tower.config.gamma().to_string(),
            "sigma": tower.config.sigma().to_string(),
        })
    } else {
        serde_json::json!(null)
    };
    let json = serde_json::json!({
        "schema": 1,
        "tower": a.tower.display().to_string(),
        "seed": a.seed,
        "points": a.points,
        "beta_case": beta_case,
        "stages": tower.stages.iter().map(|st| serde_json::json!({
            "n": st.n,
            "q": st.q.to_string(),
            "s": st.s.to_string(),
            "has_staircase": st.staircase.is_some(),
        })).collect::<Vec<_>>(),
        "scales": scales.iter().map(|(n, r)| serde_json::json!({
            "label": n, "value_hex": r.to_hex(), "value": r.to_f64(),
        })).collect::<Vec<_>>(),
        "summary": {
            "lower_pointwise_proxy": summary.lower_pointwise,
            "upper_pointwise_proxy": summary.upper_pointwise,
            "hausdorff_proxy": summary.hausdorff,
            "box_lower_proxy": summary.box_lower,
            "box_upper_proxy": summary.box_upper,
            "ordering_ok": summary.ordering_ok,
            "flagged_rows": summary.flagged_rows,
            "finite_stage_note": "all values are finite-stage proxies along the listed scales",
        },
        "box_slopes": box_slopes.iter().map(|(n, s)| serde_json::json!({
            "set": n, "slope": s,
        })).collect::<Vec<_>>(),
        "g_note": "G_2 intersects the exceptional sets up to the deepest materializable stage; the underlying construction intersects all of them",
        "holder_max_ratio": holder.as_ref().map(|h| h.to_f64()),
    });
    let text = serde_json::to_string_pretty(&json)?;
    match &a.out {
        Some(path) => fs::write(path, &text)?,
        None => println!("{text}"),
    }
    if !summary.ordering_ok {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

// small deterministic-seeding shim so dim sampling stays reproducible
mod rand_chacha_seed {
    pub use rand_chacha::rand_core::SeedableRng;
    pub fn seeded(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }
}

fn cmd_rotnum(a: RotnumArgs) -> anyhow::Result<ExitCode> {
    let tower = load_tower(&a.tower)?;
    let prec = tower.prec();
    let stage = a.stage.unwrap_or(tower.stages.len() as u32);
    let st = tower.stage(stage)?;
    let lift = TowerLift {
        tower: &tower,
        stage,
    };
    let tau = Real::from_rat(prec, &st.tau);
    use rand::Rng;
    let mut rng = rand_chacha_seed::seeded(a.seed);
    println!("x,estimate,error,bar");
    let mut worst = Real::zero(prec);
    for _ in 0..a.points {
        let x = &Real::from_u64(prec, rng.gen::<u64>()) / &Real::pow2(prec, 64);
        let (est, bar) = rotation_number_estimate(&lift, &x, a.iters)?;
        let err = (&est - &tau).abs();
        worst = worst.max(&err);
        println!(
            "{},{},{},{}",
            fmt(&x),
            fmt(&est),
            fmt(&err),
            fmt(&bar)
        );
    }
    let bar = Real::from_u64(prec, a.iters).recip();
    if worst > bar {
        eprintln!("estimate strayed past the 1/N bar");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<ExitCode> {
    let tower = load_tower(&a.tower)?;
    // Loader-independent exactness of the stored stage rationals comes
    // first: a tampered file should fail loudly by name.
    let opts = VerifyOptions {
        seed: a.seed,
        samples: a.samples,
        ..VerifyOptions::default()
    };
    let results = run_all(&tower, &opts)?;
    let mut lines = String::new();
    for c in &results {
        let tag = if c.skipped {
            "SKIP"
        } else if c.passed {
            "PASS"
        } else if c.informational {
            "INFO"
        } else {
            "FAIL"
        };
        lines.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
    }
    print!("{lines}");
    if let Some(path) = &a.out {
        let json = serde_json::json!({
            "schema": 1,
            "seed": a.seed,
            "samples": a.samples,
            "checks": results.iter().map(|c| serde_json::json!({
                "name": c.name,
                "passed": c.passed,
                "informational": c.informational,
                "skipped": c.skipped,
                "detail": c.detail,
            })).collect::<Vec<_>>(),
            "all_passed": suite_passed(&results),
        });
        fs::write(path, serde_json::to_string_pretty(&json)?)?;
    }
    if suite_passed(&results) {
        println!("verify: all enforced checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        let failed: Vec<&str> = results
            .iter()
            .filter(|c| !c.passed && !c.informational && !c.skipped)
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("verify failed: {}", failed.join(", "));
        Ok(ExitCode::from(1))
    }
}
