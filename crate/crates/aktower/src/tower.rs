//! The inductive conjugacy tower: stage selection against the construction
//! conditions, staircase assembly, and evaluation of h and f = h^-1 R h.
//!
//! Indexing convention (matches the construction): stage n carries the
//! rotation tau_n = p_n/q_n, the period s_n, the width delta_n, and the
//! staircase A_n. The conjugacy before stage n is h_n = A_{n-1} o ... o A_1,
//! so a tower with N stages materializes "levels" 0..N where level k is the
//! composition of the first k staircases (level 0 is the identity and
//! h_n = level n-1). Stage records store certified bounds for the extrema
//! of h_n' because the selection conditions consume them.
//!
//! Two modes:
//! - strict: every condition is enforced with exact arithmetic; selection
//!   fails loudly when the convergent stream cannot certify a stage.
//! - relaxed: a q cap keeps stages densely evaluable; conditions that no
//!   candidate under the cap can satisfy are waived and recorded, the rest
//!   are enforced.

use std::sync::Arc;

use rug::ops::Pow;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::bump::{BumpModel, BumpProfile};
use crate::error::{Error, Result};
use crate::numerics::bruno::bruno_coefficient_sum;
use crate::numerics::jet::{jet_compose, Jet};
use crate::numerics::real::Real;
use crate::rotation::{CircleLift, Convergent, TargetSpec};
use crate::staircase::{compose_norm_constant, rho_constants, Staircase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strict,
    Relaxed,
}

#[derive(Debug, Clone)]
pub struct TowerConfig {
    pub target: TargetSpec,
    pub beta: Rational,
    pub mode: Mode,
    pub q_cap: Option<Integer>,
    pub max_stage: u32,
    pub prec: u32,
    /// Grid points per staircase period for norm scans.
    pub sample_density: u32,
    pub bump: BumpProfile,
    /// Per-stage scan budget over the convergent stream.
    pub stream_budget: usize,
    /// Bit-size guard for exact stream components.
    pub max_component_bits: u32,
}

impl TowerConfig {
    pub fn new(target: TargetSpec, beta: Rational) -> TowerConfig {
        TowerConfig {
            target,
            beta,
            mode: Mode::Relaxed,
            q_cap: Some(Integer::from(1_000_000)),
            max_stage: 3,
            prec: crate::numerics::real::DEFAULT_PRECISION,
            sample_density: 8,
            bump: BumpProfile::default(),
            stream_budget: 64,
            max_component_bits: 1 << 21,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta < 0 || self.beta > 1 {
            return Err(Error::Construction(format!(
                "beta = {} outside [0, 1]",
                self.beta
            )));
        }
        if self.mode == Mode::Strict && self.q_cap.is_some() {
            return Err(Error::Construction("strict mode forbids q_cap".into()));
        }
        if self.mode == Mode::Relaxed && self.q_cap.is_none() {
            return Err(Error::Construction("relaxed mode requires q_cap".into()));
        }
        if self.max_stage < 1 || self.max_stage > 10 {
            return Err(Error::Construction("max_stage outside 1..=10".into()));
        }
        self.bump.validate()
    }

    /// gamma = (1 - beta)/2.
    pub fn gamma(&self) -> Rational {
        (Rational::from(1) - self.beta.clone()) / Rational::from(2)
    }

    /// sigma = min(1/(beta + gamma) - 1, 1) > 0 for beta < 1.
    pub fn sigma(&self) -> Rational {
        let bg = Rational::from(&self.beta + &self.gamma());
        let v = Rational::from(bg.recip_ref()) - Rational::from(1);
        if v > 1 {
            Rational::from(1)
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub holds: bool,
    /// Whether selection actually enforced this condition (strict mode
    /// enforces everything; relaxed mode waives what the cap makes
    /// unsatisfiable and records it here).
    pub enforced: bool,
    pub detail: String,
}

fn check(name: &str, holds: bool, enforced: bool, detail: String) -> ConditionCheck {
    ConditionCheck {
        name: name.to_string(),
        holds,
        enforced,
        detail,
    }
}

#[derive(Debug, Clone)]
pub struct TowerStage {
    pub n: u32,
    pub p: Integer,
    pub q: Integer,
    pub tau: Rational,
    pub s: Rational,
    pub delta: Option<Real>,
    pub delta_exact: Option<Rational>,
    pub staircase: Option<Staircase>,
    /// Certified lower bound for min h_n' (h before this stage's staircase).
    pub m_lo: Real,
    /// Certified upper bound for max h_n'.
    pub m_hi: Real,
    /// ||h_n||_{n+1}: grid estimate in relaxed mode, certified bound in strict.
    pub h_norm: Real,
    pub report: Vec<ConditionCheck>,
}

pub struct Tower {
    pub config: TowerConfig,
    pub stages: Vec<TowerStage>,
    bump_model: Arc<BumpModel>,
    rho: Vec<Real>,
}

impl Tower {
    pub fn bump_model(&self) -> &Arc<BumpModel> {
        &self.bump_model
    }

    pub fn rho(&self) -> &[Real] {
        &self.rho
    }

    pub fn prec(&self) -> u32 {
        self.config.prec
    }

    /// Number of staircase levels materialized (0 for rotation-only towers).
    pub fn levels(&self) -> usize {
        self.stages
            .iter()
            .filter(|st| st.staircase.is_some())
            .count()
    }

    fn staircase(&self, idx: usize) -> &Staircase {
        self.stages[idx].staircase.as_ref().expect("staircase level")
    }

    pub fn staircase_at(&self, idx: usize) -> Option<&Staircase> {
        self.stages.get(idx).and_then(|st| st.staircase.as_ref())
    }

    // --- construction -------------------------------------------------------

    pub fn build(config: TowerConfig) -> Result<Tower> {
        config.validate()?;
        let bump_model = BumpModel::build(config.bump.clone(), config.prec)?;
        let rho = rho_constants(&bump_model, (config.max_stage as usize + 2).min(12))?;
        let mut stream = config.target.stream(config.max_component_bits);
        let rotation_only = config.beta == 1;

        let mut tower = Tower {
            config,
            stages: Vec::new(),
            bump_model,
            rho,
        };

        // Stage 1: tau_1 is the first convergent (the q = 1 item), s_1 the
        // beta-dependent initial period, delta_1 the stage-1 width rule.
        let c0 = stream
            .next()
            .ok_or_else(|| Error::Construction("empty convergent stream".into()))?;
        if c0.q != 1 {
            return Err(Error::Construction(
                "convergent stream must start at the integer convergent".into(),
            ));
        }
        tower.push_stage_one(c0, rotation_only)?;

        for n in 2..=tower.config.max_stage {
            tower.push_stage(n, &mut stream, rotation_only)?;
        }
        Ok(tower)
    }

    fn push_stage_one(&mut self, c0: Convergent, rotation_only: bool) -> Result<()> {
        let prec = self.config.prec;
        let one = Real::one(prec);
        let tau = c0.value();
        let mut report = Vec::new();
        let (s, delta, delta_exact, staircase) = if rotation_only {
            report.push(check(
                "rotation-only",
                true,
                true,
                "beta = 1: f = R_tau, no staircase stages".into(),
            ));
            (Rational::from(1), None, None, None)
        } else {
            let s = self.initial_period()?;
            let (delta, delta_exact) = self.stage_one_delta(&s)?;
            let st = Staircase::build(
                s.clone(),
                delta.clone(),
                delta_exact.clone(),
                self.bump_model.clone(),
                prec,
            )?;
            let half_s = &s / Rational::from(2);
            report.push(check(
                "delta<s/2",
                delta < half_s,
                true,
                format!("delta_1 = {:e}, s_1 = {}", delta, s),
            ));
            let comm = Rational::from(&tau / &s);
            report.push(check(
                "commutation",
                comm.is_integer(),
                true,
                format!("tau_1/s_1 = {comm}"),
            ));
            (s, Some(delta), delta_exact, Some(st))
        };
        report.push(check(
            "i:first-convergent",
            true,
            true,
            format!("tau_1 = {tau}, certified |tau - tau_1| <= {}", c0.err_hi),
        ));
        self.stages.push(TowerStage {
            n: 1,
            p: c0.p,
            q: c0.q,
            tau,
            s,
            delta,
            delta_exact,
            staircase,
            m_lo: one.clone(),
            m_hi: one.clone(),
            h_norm: one,
            report,
        });
        Ok(())
    }

    /// s_1: 1/2 for beta = 0; otherwise the largest 1/k (smallest k) with
    /// delta_1 = s_1^(1/(beta+gamma)) < s_1/2, which reduces to the exact
    /// integer condition k^(v-u) > 2^u for beta + gamma = u/v.
    fn initial_period(&self) -> Result<Rational> {
        if self.config.beta == 0 {
            return Ok(Rational::from((1, 2)));
        }
        let bg = Rational::from(&self.config.beta + &self.config.gamma());
        let u = bg.numer().clone();
        let v = bg.denom().clone();
        let exp_k = Integer::from(&v - &u)
            .to_u32()
            .ok_or_else(|| Error::Construction("beta denominator too large".into()))?;
        let exp_2 = u
            .to_u32()
            .ok_or_else(|| Error::Construction("beta numerator too large".into()))?;
        let rhs = Integer::from(2).pow(exp_2);
        let mut k = Integer::from(2);
        loop {
            if k.clone().pow(exp_k) > rhs {
                return Ok(Rational::from((Integer::from(1), k)));
            }
            k += 1;
            if k > 1_000_000 {
                return Err(Error::Construction(
                    "no valid initial period found".into(),
                ));
            }
        }
    }

    fn stage_one_delta(&self, s: &Rational) -> Result<(Real, Option<Rational>)> {
        let prec = self.config.prec;
        if self.config.beta == 0 {
            // The delta_n = s_n^n rule degenerates at n = 1 (delta = s); a
            // fixed fraction of the period keeps delta < s/2 with margin.
            let de = s / Rational::from(3);
            return Ok((Real::from_rat(prec, &de), Some(de)));
        }
        let bg = Rational::from(&self.config.beta + &self.config.gamma());
        let expo = Rational::from(bg.recip_ref());
        let delta = Real::from_rat(prec, s).pow_rat(&expo);
        Ok((delta, None))
    }

    fn push_stage(
        &mut self,
        n: u32,
        stream: &mut crate::rotation::ConvergentStream,
        rotation_only: bool,
    ) -> Result<()> {
        let prec = self.config.prec;
        let prev = self.stages.last().expect("stage 1 exists");
        let s_prev = prev.s.clone();
        let q_prev = prev.q.clone();

        if rotation_only {
            // beta = 1: plain convergent consumption, no construction conditions.
            let c = stream.next().ok_or_else(|| {
                Error::Construction(format!("stream exhausted at stage {n} (beta = 1)"))
            })?;
            let one = Real::one(prec);
            let report = vec![check(
                "rotation-only",
                true,
                true,
                "beta = 1: f = R_tau".into(),
            )];
            self.stages.push(TowerStage {
                n,
                p: c.p.clone(),
                q: c.q.clone(),
                tau: c.value(),
                s: Rational::from(1),
                delta: None,
                delta_exact: None,
                staircase: None,
                m_lo: one.clone(),
                m_hi: one.clone(),
                h_norm: one,
                report,
            });
            return Ok(());
        }

        // Extrema bounds of h_n' (product of per-staircase exact bounds).
        let (m_lo, m_hi) = self.extrema_bounds(self.stages.len());
        // ||h_n||_{n+1}: grid estimate (relaxed) or certified recursion (strict).
        let h_norm = self.h_norm_for_conditions(self.stages.len(), n as usize + 1)?;

        // Condition (iii) floor terms, plus the beta-case (v) scale terms.
        let cn = Real::from_int(prec, &bruno_coefficient_sum(n as usize)?);
        let c_tilde = compose_norm_constant(&h_norm, n as usize + 1, &self.rho)?;
        let inv_s_prev = Real::from_rat(prec, &Rational::from(s_prev.recip_ref()));
        let inv_m = m_lo.recip();
        let three_m_pow = (&m_hi * 3u32).powi(n as i32);
        let mut floors: Vec<(String, Real)> = vec![
            ("iii:q>=1/s_prev".into(), inv_s_prev),
            ("iii:q>=1/m_n".into(), inv_m),
            (format!("iii:q>=(3M_n)^{n}"), three_m_pow),
            ("iii:q>=c_n".into(), cn),
            (format!("iii:q>=c~(h_{n},{})", n + 1), c_tilde),
        ];
        let beta_pos = self.config.beta > 0;
        if beta_pos {
            let gamma = self.config.gamma();
            let n_over_gamma =
                Rational::from(n) / gamma;
            let t1 = (&m_hi + &Real::one(prec)).pow_rat(&n_over_gamma);
            let t2 = (&m_hi.mul_2exp(1) / &m_lo).pow_rat(&n_over_gamma);
            let s_prev_r = Real::from_rat(prec, &s_prev);
            floors.push((
                "v:q>=2^(n+1)".into(),
                Real::pow2(prec, n as i32 + 1),
            ));
            floors.push(("v:s-gamma(M+1)".into(), &s_prev_r * &t1));
            floors.push(("v:s-gamma(2M/m)".into(), &s_prev_r * &t2));
        }

        // Which floors can any candidate under the cap satisfy?
        let cap = self.config.q_cap.clone();
        let mut q_req = Integer::from(2);
        let mut waived: Vec<(String, Integer)> = Vec::new();
        for (name, bound) in &floors {
            let need = bound.ceil_int();
            let satisfiable = match (&self.config.mode, &cap) {
                (Mode::Strict, _) => true,
                (Mode::Relaxed, Some(c)) => need <= *c,
                (Mode::Relaxed, None) => true,
            };
            if satisfiable {
                if need > q_req {
                    q_req = need;
                }
            } else {
                waived.push((name.clone(), need));
            }
        }

        // Liouville-rate exponent: 3 n^4 for beta = 0, n^4 otherwise.
        let rate_exp: u64 = if self.config.beta == 0 {
            3 * (n as u64).pow(4)
        } else {
            (n as u64).pow(4)
        };

        // Scan the stream.
        let mut selected: Option<(Convergent, bool)> = None; // (item, rate_ok)
        for _ in 0..self.config.stream_budget {
            let Some(c) = stream.next() else {
                break;
            };
            if c.q < q_prev || (c.q == q_prev && c.err_hi > 0) {
                continue;
            }
            if c.q < 2 {
                continue;
            }
            if let Some(capv) = &cap {
                if c.q > *capv {
                    break; // q only grows; nothing under the cap remains
                }
            }
            let rate_ok = rate_condition_holds(&c, rate_exp);
            if c.q >= q_req && (self.config.mode == Mode::Relaxed || rate_ok) {
                selected = Some((c, rate_ok));
                break;
            }
            // An exact rational target repeats forever; the approximation
            // conditions are vacuous for it ((ii) holds with error 0), so a
            // relaxed build takes it as-is and records the floor violations.
            if self.config.mode == Mode::Relaxed && c.err_hi == 0 {
                selected = Some((c, rate_ok));
                break;
            }
        }
        let Some((c, rate_ok)) = selected else {
            let detail = format!(
                "stage {n}: no convergent with q >= {q_req}{} satisfied the conditions",
                cap.as_ref()
                    .map(|c| format!(" under q_cap = {c}"))
                    .unwrap_or_default()
            );
            return Err(match self.config.mode {
                Mode::Strict => Error::NotVerifiablyLiouville(detail),
                Mode::Relaxed => Error::Construction(detail),
            });
        };

        // Derived parameters.
        let s = Rational::from(&s_prev / &c.q);
        let tau = c.value();
        let (delta, delta_exact) = if self.config.beta == 0 {
            let de = s.clone().pow(n);
            (Real::from_rat(prec, &de), Some(de))
        } else {
            // delta_n = m_n * s_n^(1/(beta + gamma/n))
            let gamma_n = self.config.gamma() / Rational::from(n);
            let expo = Rational::from(Rational::from(&self.config.beta + &gamma_n).recip_ref());
            let d = &m_lo * &Real::from_rat(prec, &s).pow_rat(&expo);
            (d, None)
        };
        let half_s = &s / Rational::from(2);
        if delta >= half_s {
            return Err(Error::Parameter(format!(
                "stage {n}: delta = {delta:e} >= s/2 = {half_s} (q too small)"
            )));
        }

        // Assemble the report.
        let mut report = Vec::new();
        report.push(check(
            "i:monotone-approach",
            true,
            true,
            format!(
                "stream errors strictly decrease; |tau - tau_{n}| <= {}",
                short_rat(&c.err_hi)
            ),
        ));
        report.push(check(
            &format!("ii:rate<=1/q^{rate_exp}"),
            rate_ok,
            self.config.mode == Mode::Strict,
            format!("q = {}, certified err <= {}", c.q, short_rat(&c.err_hi)),
        ));
        for (name, bound) in &floors {
            let need = bound.ceil_int();
            let holds = c.q >= need;
            let enforced = !waived.iter().any(|(w, _)| w == name);
            report.push(check(
                name,
                holds,
                enforced,
                format!("requires q >= {need}"),
            ));
        }
        let s_pow_ok = s <= Rational::from((Integer::from(1), Integer::from(1) << n));
        report.push(check(
            "iv:s<=2^-n",
            s_pow_ok,
            false,
            format!("s_{n} = {}", short_rat(&s)),
        ));
        let comm = Rational::from(&tau / &s);
        report.push(check(
            "commutation",
            comm.is_integer(),
            true,
            format!("tau_{n}/s_{n} = {}", short_rat(&comm)),
        ));
        if !comm.is_integer() {
            return Err(Error::Construction(format!(
                "stage {n}: commutation violated (tau/s not an integer)"
            )));
        }

        let staircase = Staircase::build(
            s.clone(),
            delta.clone(),
            delta_exact.clone(),
            self.bump_model.clone(),
            prec,
        )?;

        self.stages.push(TowerStage {
            n,
            p: c.p,
            q: c.q,
            tau,
            s,
            delta: Some(delta),
            delta_exact,
            staircase: Some(staircase),
            m_lo,
            m_hi,
            h_norm,
            report,
        });
        Ok(())
    }

    /// Certified bounds (lower, upper) for the extrema of (level-k h)' as
    /// products of the per-staircase exact slope bounds.
    pub fn extrema_bounds(&self, level: usize) -> (Real, Real) {
        let prec = self.config.prec;
        let mut lo = Real::one(prec);
        let mut hi = Real::one(prec);
        for st in self.stages.iter().take(level) {
            if let Some(a) = &st.staircase {
                lo = &lo * &a.slope_min_exact();
                hi = &hi * &a.slope_max_exact();
            }
        }
        (lo, hi)
    }

    fn h_norm_for_conditions(&self, level: usize, order: usize) -> Result<Real> {
        match self.config.mode {
            Mode::Relaxed => self.h_norm_grid(level, order),
            Mode::Strict => self.h_norm_bound(level, order),
        }
    }

    /// Certified bound: ||A o h||_k <= c~(||h||_k, k)/delta^(k^2), iterated
    /// through the composition; never scans.
    pub fn h_norm_bound(&self, level: usize, order: usize) -> Result<Real> {
        let mut norm = Real::one(self.config.prec);
        for st in self.stages.iter().take(level) {
            let Some(a) = &st.staircase else { continue };
            let ct = compose_norm_constant(&norm, order, &self.rho)?;
            norm = &ct / &a.delta().powi((order * order) as i32);
        }
        Ok(norm)
    }

    /// Grid estimate of ||level-k h||_order per the max-of-both-sides norm.
    pub fn h_norm_grid(&self, level: usize, order: usize) -> Result<Real> {
        let prec = self.config.prec;
        if level == 0 {
            return Ok(Real::one(prec));
        }
        let finest: Integer = self.staircase(level - 1).periods();
        let per = self.config.sample_density.max(4);
        let points: u32 = finest
            .to_u32()
            .map(|f| (f.saturating_mul(per)).clamp(256, 4096))
            .unwrap_or(4096);
        let mut worst = Real::one(prec);
        for i in 0..points {
            let x = &Real::from_u64(prec, i as u64) / points;
            let hj = self.h_jet(level, &x, order)?;
            for k in 1..=order {
                worst = worst.max(&hj.coeff(k).abs());
            }
            let hij = self.h_inv_jet(level, &x, order)?;
            for k in 1..=order {
                worst = worst.max(&hij.coeff(k).abs());
            }
        }
        Ok(worst)
    }

    // --- evaluation ---------------------------------------------------------

    /// h at `level` staircases (lift): level 0 is the identity.
    pub fn eval_h(&self, level: usize, x: &Real) -> Result<Real> {
        let mut v = x.clone();
        for i in 0..level {
            v = self.staircase(i).eval(&v)?;
        }
        Ok(v)
    }

    /// Inverse of the level-k conjugacy (lift).
    pub fn eval_h_inv(&self, level: usize, y: &Real) -> Result<Real> {
        let mut v = y.clone();
        for i in (0..level).rev() {
            v = self.staircase(i).eval_inv(&v)?;
        }
        Ok(v)
    }

    /// Inverse evaluation for monotone sweeps: `state` holds the previous
    /// intermediate values per level and seeds each staircase root-finder.
    pub fn eval_h_inv_warm(
        &self,
        level: usize,
        y: &Real,
        state: &mut Vec<Option<Real>>,
    ) -> Result<Real> {
        state.resize(level, None);
        let mut v = y.clone();
        for i in (0..level).rev() {
            v = self.staircase(i).eval_inv_warm(&v, state[i].as_ref())?;
            state[i] = Some(v.clone());
        }
        Ok(v)
    }

    /// Jet of the level-k conjugacy at x.
    pub fn h_jet(&self, level: usize, x: &Real, order: usize) -> Result<Jet> {
        let tol = self.anchor_tol();
        let mut jet = Jet::identity(x.clone(), order);
        for i in 0..level {
            let a = self.staircase(i).jet(jet.value(), order)?;
            jet = jet_compose(&a, &jet, order, &tol)?;
        }
        Ok(jet)
    }

    /// Jet of the inverse conjugacy at y.
    pub fn h_inv_jet(&self, level: usize, y: &Real, order: usize) -> Result<Jet> {
        let tol = self.anchor_tol();
        let mut jet = Jet::identity(y.clone(), order);
        for i in (0..level).rev() {
            let a = self.staircase(i).inv_jet(jet.value(), order)?;
            jet = jet_compose(&a, &jet, order, &tol)?;
        }
        Ok(jet)
    }

    fn anchor_tol(&self) -> Real {
        Real::pow2(self.config.prec, -((self.config.prec / 2) as i32))
    }

    /// f_n = h_n^-1 o R_{tau_n} o h_n evaluated through level n-1, on the lift.
    pub fn eval_f(&self, stage: u32, x: &Real) -> Result<Real> {
        let st = self.stage(stage)?;
        let level = (stage as usize - 1).min(self.levels());
        let hx = self.eval_h(level, x)?;
        let shifted = &hx + &Real::from_rat(self.config.prec, &st.tau);
        self.eval_h_inv(level, &shifted)
    }

    /// Jet of f_n at x.
    pub fn f_jet(&self, stage: u32, x: &Real, order: usize) -> Result<Jet> {
        let st = self.stage(stage)?;
        self.conjugated_jet(stage, &st.tau.clone(), x, order)
    }

    /// Jet of h^-1 o R_tau o h for the conjugacy at level stage-1.
    pub fn conjugated_jet(
        &self,
        stage: u32,
        tau: &Rational,
        x: &Real,
        order: usize,
    ) -> Result<Jet> {
        let level = (stage as usize - 1).min(self.levels());
        let tol = self.anchor_tol();
        let h = self.h_jet(level, x, order)?;
        let shift = Jet::shift(
            h.value().clone(),
            &Real::from_rat(self.config.prec, tau),
            order,
        );
        let rh = jet_compose(&shift, &h, order, &tol)?;
        let hinv = self.h_inv_jet(level, rh.value(), order)?;
        jet_compose(&hinv, &rh, order, &tol)
    }

    pub fn stage(&self, n: u32) -> Result<&TowerStage> {
        self.stages
            .get(n as usize - 1)
            .ok_or_else(|| Error::Bounds(format!("stage {n} not built")))
    }

    /// The scale r_n = delta_n / m_n.
    pub fn r_n(&self, n: u32) -> Result<Real> {
        let st = self.stage(n)?;
        let delta = st
            .delta
            .as_ref()
            .ok_or_else(|| Error::Bounds("rotation-only stage has no delta".into()))?;
        Ok(delta / &st.m_lo)
    }

    /// The scale r~_n = (3 M_n)^-n.
    pub fn r_tilde_n(&self, n: u32) -> Result<Real> {
        let st = self.stage(n)?;
        Ok((&st.m_hi * 3u32).powi(-(n as i32)))
    }

    /// ||.||_n of a named map over a grid (Definition-style max of the map's
    /// and its inverse's derivative magnitudes, i <= order; the i = 0 term
    /// is 1 for circle maps fixing [0, 1]).
    pub fn cn_norm(&self, map: MapId, order: usize, points: u32) -> Result<Real> {
        let prec = self.config.prec;
        let mut worst = Real::one(prec);
        for i in 0..points {
            let x = &Real::from_u64(prec, i as u64) / points;
            let (j, ji) = match map {
                MapId::H { level } => (
                    self.h_jet(level, &x, order)?,
                    self.h_inv_jet(level, &x, order)?,
                ),
                MapId::F { stage } => {
                    let st = self.stage(stage)?;
                    let tau = st.tau.clone();
                    let neg = -tau.clone();
                    (
                        self.conjugated_jet(stage, &tau, &x, order)?,
                        self.conjugated_jet(stage, &neg, &x, order)?,
                    )
                }
                MapId::A { stage } => {
                    let st = self
                        .stage(stage)?
                        .staircase
                        .as_ref()
                        .ok_or_else(|| Error::Bounds("no staircase".into()))?;
                    (st.jet(&x, order)?, st.inv_jet(&x, order)?)
                }
            };
            for k in 1..=order {
                worst = worst.max(&j.coeff(k).abs()).max(&ji.coeff(k).abs());
            }
        }
        Ok(worst)
    }

    /// Grid max of |f_n^(i) - f_{n+1}^(i)| and the inverse counterparts for
    /// i <= order, together with the two-rotations bound
    /// c_order |tau_n - tau_{n+1}| ||h_{n+1}||_{order+1}^{order+1}.
    pub fn distance_dn(&self, n: u32, order: usize, points: u32) -> Result<DistanceReport> {
        let prec = self.config.prec;
        let st_a = self.stage(n)?;
        let st_b = self.stage(n + 1)?;
        // both f_n and f_{n+1} conjugated through the SAME h at level n
        // (the staircase A_n commutes with R_{tau_n})
        let level = n as usize;
        let tau_a = st_a.tau.clone();
        let tau_b = st_b.tau.clone();
        let mut measured = Real::zero(prec);
        for i in 0..points {
            let x = &Real::from_u64(prec, i as u64) / points;
            let ja = self.conjugated_jet(level as u32 + 1, &tau_a, &x, order)?;
            let jb = self.conjugated_jet(level as u32 + 1, &tau_b, &x, order)?;
            measured = measured.max(&ja.max_coeff_distance(&jb));
            let na = -tau_a.clone();
            let nb = -tau_b.clone();
            let jia = self.conjugated_jet(level as u32 + 1, &na, &x, order)?;
            let jib = self.conjugated_jet(level as u32 + 1, &nb, &x, order)?;
            measured = measured.max(&jia.max_coeff_distance(&jib));
        }
        let dt = Rational::from(&tau_a - &tau_b).abs();
        let c_ord = Real::from_int(prec, &bruno_coefficient_sum(order.max(1))?);
        let h_norm = self.h_norm_grid(level, order + 1)?;
        let bound = &(&c_ord * &Real::from_rat(prec, &dt)) * &h_norm.powi(order as i32 + 1);
        let halving = Real::pow2(prec, -(n as i32));
        Ok(DistanceReport {
            order,
            measured: measured.clone(),
            two_rotations_bound: bound.clone(),
            bound_holds: measured <= bound,
            halving_bound: halving.clone(),
            halving_holds: measured <= halving,
        })
    }
}

/// Which map a norm scan addresses.
#[derive(Debug, Clone, Copy)]
pub enum MapId {
    H { level: usize },
    F { stage: u32 },
    A { stage: u32 },
}

#[derive(Debug, Clone)]
pub struct DistanceReport {
    pub order: usize,
    pub measured: Real,
    pub two_rotations_bound: Real,
    pub bound_holds: bool,
    /// The 1/2^n target; the construction only promises it for all
    /// sufficiently large n, so failures here are informational.
    pub halving_bound: Real,
    pub halving_holds: bool,
}

fn rate_condition_holds(c: &Convergent, exp: u64) -> bool {
    // err_hi <= 1/q^exp, exactly, with a bit-size guard
    if c.err_hi == 0 {
        return true;
    }
    let bits = c.q.significant_bits() as u64 * exp;
    if bits > (1 << 24) {
        return false; // cannot certify at this size
    }
    let qe = Integer::from((&c.q).pow(exp as u32));
    Rational::from(&c.err_hi * &qe) <= 1
}

fn short_rat(r: &Rational) -> String {
    let s = r.to_string();
    if s.len() > 48 {
        let f = r.to_f64();
        format!("~{f:e}")
    } else {
        s
    }
}

// --- serialization -----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BumpDto {
    eps: String,
    eta: String,
    max_order: usize,
    quadrature: usize,
}

#[derive(Serialize, Deserialize)]
struct ConfigDto {
    target: String,
    beta: String,
    mode: Mode,
    q_cap: Option<String>,
    max_stage: u32,
    precision: u32,
    sample_density: u32,
    stream_budget: usize,
    max_component_bits: u32,
    bump: BumpDto,
}

#[derive(Serialize, Deserialize)]
struct StageDto {
    n: u32,
    p: String,
    q: String,
    tau: String,
    s: String,
    delta_hex: Option<String>,
    delta_exact: Option<String>,
    m_lo_hex: String,
    m_hi_hex: String,
    h_norm_hex: String,
    report: Vec<ConditionCheck>,
}

#[derive(Serialize, Deserialize)]
struct TowerDto {
    schema: u32,
    config: ConfigDto,
    stages: Vec<StageDto>,
}

fn parse_rat(s: &str) -> Result<Rational> {
    s.parse::<Rational>()
        .map_err(|e| Error::Parse(format!("bad rational {s:?}: {e}")))
}

fn parse_int(s: &str) -> Result<Integer> {
    s.parse::<Integer>()
        .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
}

impl Tower {
    /// Versioned JSON document; numeric fields use exact rational strings or
    /// hex-float strings so a reload is bit-exact at the recorded precision.
    pub fn to_json(&self) -> serde_json::Value {
        let c = &self.config;
        let dto = TowerDto {
            schema: 1,
            config: ConfigDto {
                target: c.target.describe(),
                beta: c.beta.to_string(),
                mode: c.mode,
                q_cap: c.q_cap.as_ref().map(|q| q.to_string()),
                max_stage: c.max_stage,
                precision: c.prec,
                sample_density: c.sample_density,
                stream_budget: c.stream_budget,
                max_component_bits: c.max_component_bits,
                bump: BumpDto {
                    eps: c.bump.eps.to_string(),
                    eta: c.bump.eta.to_string(),
                    max_order: c.bump.max_order,
                    quadrature: c.bump.quadrature,
                },
            },
            stages: self
                .stages
                .iter()
                .map(|st| StageDto {
                    n: st.n,
                    p: st.p.to_string(),
                    q: st.q.to_string(),
                    tau: st.tau.to_string(),
                    s: st.s.to_string(),
                    delta_hex: st.delta.as_ref().map(Real::to_hex),
                    delta_exact: st.delta_exact.as_ref().map(|r| r.to_string()),
                    m_lo_hex: st.m_lo.to_hex(),
                    m_hi_hex: st.m_hi.to_hex(),
                    h_norm_hex: st.h_norm.to_hex(),
                    report: st.report.clone(),
                })
                .collect(),
        };
        serde_json::to_value(dto).expect("tower serialization")
    }

    /// Reload a tower document; staircases are reconstructed from their
    /// parameters, everything else is taken verbatim (verification of the
    /// stored invariants is the verify command's job, not the loader's).
    pub fn from_json(v: serde_json::Value) -> Result<Tower> {
        let dto: TowerDto = serde_json::from_value(v)?;
        if dto.schema != 1 {
            return Err(Error::Parse(format!("unsupported schema {}", dto.schema)));
        }
        let c = dto.config;
        let bump = BumpProfile {
            eps: parse_rat(&c.bump.eps)?,
            eta: parse_rat(&c.bump.eta)?,
            max_order: c.bump.max_order,
            quadrature: c.bump.quadrature,
        };
        let config = TowerConfig {
            target: TargetSpec::parse(&c.target)?,
            beta: parse_rat(&c.beta)?,
            mode: c.mode,
            q_cap: c.q_cap.as_deref().map(parse_int).transpose()?,
            max_stage: c.max_stage,
            prec: c.precision,
            sample_density: c.sample_density,
            bump: bump.clone(),
            stream_budget: c.stream_budget,
            max_component_bits: c.max_component_bits,
        };
        let bump_model = BumpModel::build(bump, config.prec)?;
        let rho = rho_constants(&bump_model, (config.max_stage as usize + 2).min(12))?;
        let mut stages = Vec::new();
        for sd in dto.stages {
            let s = parse_rat(&sd.s)?;
            let delta_exact = sd.delta_exact.as_deref().map(parse_rat).transpose()?;
            let delta = match (&delta_exact, &sd.delta_hex) {
                (Some(de), _) => Some(Real::from_rat(config.prec, de)),
                (None, Some(hx)) => Some(Real::from_hex(config.prec, hx)?),
                (None, None) => None,
            };
            let staircase = match &delta {
                Some(d) => Some(Staircase::build(
                    s.clone(),
                    d.clone(),
                    delta_exact.clone(),
                    bump_model.clone(),
                    config.prec,
                )?),
                None => None,
            };
            stages.push(TowerStage {
                n: sd.n,
                p: parse_int(&sd.p)?,
                q: parse_int(&sd.q)?,
                tau: parse_rat(&sd.tau)?,
                s,
                delta,
                delta_exact,
                staircase,
                m_lo: Real::from_hex(config.prec, &sd.m_lo_hex)?,
                m_hi: Real::from_hex(config.prec, &sd.m_hi_hex)?,
                h_norm: Real::from_hex(config.prec, &sd.h_norm_hex)?,
                report: sd.report,
            });
        }
        Ok(Tower {
            config,
            stages,
            bump_model,
            rho,
        })
    }
}

/// Lift of f_n with the exact conjugation shortcut for powers:
/// F^N(x) = H^-1(H(x) + N tau).
pub struct TowerLift<'a> {
    pub tower: &'a Tower,
    pub stage: u32,
}

impl CircleLift for TowerLift<'_> {
    fn prec(&self) -> u32 {
        self.tower.config.prec
    }

    fn eval(&self, x: &Real) -> Result<Real> {
        self.tower.eval_f(self.stage, x)
    }

    fn eval_power(&self, x: &Real, n: u64) -> Result<Real> {
        let st = self.tower.stage(self.stage)?;
        let level = (self.stage as usize - 1).min(self.tower.levels());
        let shift = Rational::from(&st.tau * Integer::from(n));
        let hx = self.tower.eval_h(level, x)?;
        let shifted = &hx + &Real::from_rat(self.tower.config.prec, &shift);
        self.tower.eval_h_inv(level, &shifted)
    }
}
