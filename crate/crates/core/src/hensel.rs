//! Certified root finding for systems of m p-adic power series in m
//! variables: the multivariate Hensel criterion with Newton iteration, and
//! the full enumeration routine (residues mod p, naive lifting to a
//! fallback depth, Hensel certification where the criterion holds, residual
//! reports where it never does).

use crate::linalg::{self, Matrix};
use crate::mseries::{IntSystem, MSeriesError, SeriesSystem, TailBound};
use crate::padic::{PadicContext, PadicError, PadicNumber};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};

pub type HenselResult<T> = Result<T, HenselError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HenselError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Series(#[from] MSeriesError),
    #[error("system is not normalized (rescale_and_normalize it first)")]
    NotNormalized,
    #[error("system is not square: {components} equations in {vars} variables")]
    NotSquare { components: usize, vars: usize },
    #[error("Hensel hypothesis ord(f(a)) > 2 ord(det J(a)) fails: ord(f(a)) = {h}, ord(det J(a)) = {delta}")]
    HypothesisFails { h: i64, delta: i64 },
    #[error("Jacobian determinant is indistinguishable from zero at working precision")]
    SingularJacobian,
    #[error("Newton iteration did not converge within {0} steps")]
    MaxStepsExceeded(u32),
    #[error("tail valuation bound {bound} is below the target depth {depth}")]
    TailTooShallow { bound: i64, depth: u32 },
    #[error("evaluation budget of {0} points exhausted")]
    BudgetExceeded(u64),
    #[error("invalid search configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootStatus {
    /// A certified approximation of a unique true root.
    Certified,
    /// A root of the truncated system mod p^n in a disk where the Hensel
    /// criterion never became applicable at the reached depth.
    ResidualModPn,
}

/// Convergence record for one Newton step: after computing the N-th iterate,
/// ord_p(root - iterate) is at least `bound` and was measured as `measured`
/// (both saturated at the certified depth).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NewtonStep {
    pub step: u32,
    pub measured: i64,
    pub bound: i64,
}

/// Output contract of a certified (or residual) root of one system.
#[derive(Debug, Clone)]
pub struct RootReport {
    pub status: RootStatus,
    pub approximation: Vec<PadicNumber>,
    /// The approximation solves the system modulo p^certified_exponent.
    pub certified_exponent: i64,
    /// Theorem radius delta: there is a unique true root alpha with
    /// ord_p(alpha - approximation) > delta. None for residual reports.
    pub uniqueness_radius: Option<i64>,
    pub trace: Vec<NewtonStep>,
}

impl RootReport {
    /// Residue vector of the approximation mod p^k.
    pub fn residue_mod(&self, k: u32) -> HenselResult<Vec<u64>> {
        self.approximation
            .iter()
            .map(|x| {
                let r = x.residue_mod(k)?;
                Ok(num_traits::ToPrimitive::to_u64(&r).expect("residue fits u64"))
            })
            .collect()
    }

    /// Whether a residue mod p^k lies inside this report's certified ball:
    /// equality for residual reports, ord(residue - approximation) > delta
    /// for certified ones.
    pub fn covers(&self, residue: &[u64], p: u64, k: u32) -> bool {
        let own = match self.residue_mod(k) {
            Ok(r) => r,
            Err(_) => return false,
        };
        match self.status {
            RootStatus::ResidualModPn => own == residue,
            RootStatus::Certified => {
                let delta = self.uniqueness_radius.unwrap_or(0);
                vec_ord(&own, residue, p, k) > delta
            }
        }
    }
}

/// min over coordinates of ord_p(a_i - b_i) for residues mod p^k,
/// saturating at k when the vectors agree.
pub fn vec_ord(a: &[u64], b: &[u64], p: u64, k: u32) -> i64 {
    let m = p.pow(k);
    let mut best = k as i64;
    for (x, y) in a.iter().zip(b) {
        let mut d = (x % m + m - y % m) % m;
        if d == 0 {
            continue;
        }
        let mut v = 0i64;
        while d % p == 0 {
            d /= p;
            v += 1;
        }
        best = best.min(v);
    }
    best
}

/// Search parameters for [`solve_system`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SearchConfig {
    /// Target depth n: reports are separated / reported modulo p^n.
    pub target_depth: u32,
    /// First fallback depth r (default 3).
    pub first_fallback_depth: u32,
    /// Strictly increasing refinement schedule ending at target_depth.
    pub schedule: Vec<u32>,
    pub max_newton_steps: u32,
    /// Cap on naive-search point evaluations.
    pub budget: u64,
}

impl SearchConfig {
    /// Default configuration: r = 3 and a depth-doubling schedule, matching
    /// the quadratic convergence of the Newton lift.
    pub fn new(target_depth: u32) -> HenselResult<Self> {
        Self::with_fallback(target_depth, 3.min(target_depth))
    }

    pub fn with_fallback(target_depth: u32, r: u32) -> HenselResult<Self> {
        let mut schedule = vec![r];
        let mut d = r;
        while d < target_depth {
            d = (2 * d).min(target_depth);
            schedule.push(d);
        }
        let cfg = SearchConfig {
            target_depth,
            first_fallback_depth: r,
            schedule,
            max_newton_steps: 64,
            budget: 10_000_000,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> HenselResult<()> {
        let n = self.target_depth;
        let r = self.first_fallback_depth;
        if n < 1 {
            return Err(HenselError::BadConfig("target depth must be >= 1".into()));
        }
        if n >= 3 && !(3..=n).contains(&r) {
            return Err(HenselError::BadConfig(format!(
                "fallback depth must satisfy 3 <= r <= n, got r = {r}, n = {n}"
            )));
        }
        if self.schedule.first() != Some(&r) || self.schedule.last() != Some(&n) {
            return Err(HenselError::BadConfig(
                "schedule must start at r and end at n".into(),
            ));
        }
        if !self.schedule.windows(2).all(|w| w[0] < w[1]) {
            return Err(HenselError::BadConfig(
                "schedule must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

fn check_square(sys: &SeriesSystem) -> HenselResult<usize> {
    let m = sys.num_vars();
    if sys.components().len() != m {
        return Err(HenselError::NotSquare {
            components: sys.components().len(),
            vars: m,
        });
    }
    Ok(m)
}

/// Depth to which evaluations of the system are certified: the min of the
/// tail bound and the coefficients' certified moduli.
fn certified_depth(sys: &SeriesSystem) -> i64 {
    let mut depth = match sys.tail_bound() {
        TailBound::Exact => None,
        TailBound::AtLeast(b) => Some(b),
    };
    let mut cap: Option<i64> = None;
    for c in sys.components() {
        for (_, coeff) in c.terms() {
            let a = coeff.abs_prec();
            depth = Some(depth.map_or(a, |d: i64| d.min(a)));
            let pc = coeff.precision_cap() as i64;
            cap = Some(cap.map_or(pc, |x: i64| x.min(pc)));
        }
    }
    match (depth, cap) {
        (Some(d), _) => d,
        (None, Some(c)) => c,
        (None, None) => 1,
    }
}

/// Newton lift under the multivariate Hensel criterion.
///
/// Requires ord_p(f(a)) > 2 ord_p(det J_f(a)) and iterates
/// a -> a - f(a) (J_f(a)^T)^{-1} until the convergence bound
/// delta + 2^{N-1}(h - 2 delta) certifies the system's full depth.
pub fn newton_lift(
    sys: &SeriesSystem,
    a: &[PadicNumber],
    max_steps: u32,
) -> HenselResult<RootReport> {
    if !sys.is_normalized() {
        return Err(HenselError::NotNormalized);
    }
    let m = check_square(sys)?;
    assert_eq!(a.len(), m, "start point arity mismatch");
    let jac = sys.jacobian()?;
    newton_lift_prepared(sys, &jac, a, max_steps)
}

fn newton_lift_prepared(
    sys: &SeriesSystem,
    jac: &[Vec<crate::mseries::TruncatedSeries>],
    a: &[PadicNumber],
    max_steps: u32,
) -> HenselResult<RootReport> {
    let target = certified_depth(sys);

    let f_a = sys.evaluate(a)?;
    let h = f_a
        .iter()
        .map(|x| x.valuation_lower_bound())
        .min()
        .unwrap();
    let j_a = eval_jacobian(jac, a)?;
    let det = linalg::det(&j_a)?;
    let delta = match det.valuation() {
        Some(v) => v,
        None => return Err(HenselError::SingularJacobian),
    };
    if h <= 2 * delta {
        return Err(HenselError::HypothesisFails { h, delta });
    }

    let mut iterates: Vec<Vec<PadicNumber>> = vec![a.to_vec()];
    let mut current = a.to_vec();
    let mut step = 1u32;
    loop {
        let bound = convergence_bound(delta, h, step, target);
        if bound >= target {
            break;
        }
        if step > max_steps {
            return Err(HenselError::MaxStepsExceeded(max_steps));
        }
        let f_cur = sys.evaluate(&current)?;
        if f_cur.iter().all(|x| x.is_zero()) {
            // Root to the full certified depth: no more digits to gain.
            break;
        }
        let j_cur = eval_jacobian(jac, &current)?;
        let correction = linalg::solve(&j_cur, &f_cur).map_err(|e| match e {
            PadicError::DivisionByZero => HenselError::SingularJacobian,
            other => HenselError::Padic(other),
        })?;
        let next: Vec<PadicNumber> = current
            .iter()
            .zip(&correction)
            .map(|(x, s)| x.sub(s))
            .collect::<Result<_, _>>()?;
        iterates.push(next.clone());
        current = next;
        step += 1;
    }

    // Post-hoc convergence trace against the final iterate. The recorded
    // bound is capped at the certified modulus of the comparison: a
    // difference indistinguishable from zero at k digits can witness the
    // bound only up to k.
    let mut trace = Vec::new();
    for (i, it) in iterates.iter().enumerate() {
        let n = (i + 1) as u32;
        let bound = convergence_bound(delta, h, n, target);
        let (measured, limit) = ord_of_difference(&current, it, target);
        trace.push(NewtonStep {
            step: n,
            measured,
            bound: bound.min(target).min(limit),
        });
    }

    // Report invariant: the Jacobian determinant stays away from zero at
    // the approximation (it is congruent to det J(a) modulo a power of p
    // beyond delta).
    debug_assert!(
        eval_jacobian(jac, &current)
            .and_then(|j| linalg::det(&j).map_err(HenselError::Padic))
            .map(|d| !d.is_zero())
            .unwrap_or(false),
        "certified approximation with vanishing Jacobian determinant"
    );
    Ok(RootReport {
        status: RootStatus::Certified,
        approximation: current,
        certified_exponent: target,
        uniqueness_radius: Some(delta),
        trace,
    })
}

fn convergence_bound(delta: i64, h: i64, step: u32, target: i64) -> i64 {
    let gain = h - 2 * delta;
    let factor = 1i64.checked_shl(step - 1).unwrap_or(i64::MAX);
    delta
        .saturating_add(gain.saturating_mul(factor))
        .min(target)
}

/// (lower bound on min ord of the difference, certified modulus of the
/// comparison), both saturated at `saturate`.
fn ord_of_difference(a: &[PadicNumber], b: &[PadicNumber], saturate: i64) -> (i64, i64) {
    let mut best = saturate;
    let mut limit = saturate;
    for (x, y) in a.iter().zip(b) {
        match x.sub(y) {
            Ok(d) => {
                best = best.min(d.valuation_lower_bound());
                limit = limit.min(d.abs_prec());
            }
            Err(_) => {
                best = best.min(0);
                limit = limit.min(0);
            }
        }
    }
    (best, limit)
}

fn eval_jacobian(
    jac: &[Vec<crate::mseries::TruncatedSeries>],
    point: &[PadicNumber],
) -> HenselResult<Matrix> {
    let rows = jac
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| e.evaluate(point))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix::from_rows(rows))
}

/// Exhaustive root set of the system mod p by direct scan of {0..p-1}^m.
pub fn enumerate_roots_modp(sys: &SeriesSystem) -> HenselResult<Vec<Vec<u64>>> {
    if !sys.is_normalized() {
        return Err(HenselError::NotNormalized);
    }
    let int = IntSystem::from_series(sys, 1)?;
    Ok(all_points(int.p, sys.num_vars())
        .into_iter()
        .filter(|pt| int.is_root(pt))
        .collect())
}

fn all_points(p: u64, m: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..m {
        let mut next = Vec::with_capacity(out.len() * p as usize);
        for pt in &out {
            for d in 0..p {
                let mut q = pt.clone();
                q.push(d);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

struct BudgetMeter {
    used: u64,
    cap: u64,
}

impl BudgetMeter {
    fn charge(&mut self, points: u64) -> HenselResult<()> {
        self.used = self.used.saturating_add(points);
        if self.used > self.cap {
            return Err(HenselError::BudgetExceeded(self.cap));
        }
        Ok(())
    }
}

/// All roots mod p^to extending `base` (a root mod p^from), found by
/// digit-by-digit lifting; exact because any root mod p^{k+1} reduces to a
/// root mod p^k.
fn lift_roots(
    sys: &SeriesSystem,
    base: &[u64],
    from: u32,
    to: u32,
    meter: &mut BudgetMeter,
) -> HenselResult<Vec<Vec<u64>>> {
    let m = sys.num_vars();
    let p = sys.p();
    let mut level: Vec<Vec<u64>> = vec![base.to_vec()];
    for k in from..to {
        let int = IntSystem::from_series(sys, k + 1)?;
        let pk = p.pow(k);
        let digits = all_points(p, m);
        let mut next = Vec::new();
        meter.charge(level.len() as u64 * digits.len() as u64)?;
        for r in &level {
            for d in &digits {
                let cand: Vec<u64> = r.iter().zip(d).map(|(x, e)| x + pk * e).collect();
                if int.is_root(&cand) {
                    next.push(cand);
                }
            }
        }
        level = next;
        if level.is_empty() {
            break;
        }
    }
    level.sort();
    Ok(level)
}

/// Exact exhaustive solution set of the truncated system mod p^n.
pub fn brute_force_roots(
    sys: &SeriesSystem,
    depth: u32,
    budget: u64,
) -> HenselResult<Vec<Vec<u64>>> {
    if !sys.is_normalized() {
        return Err(HenselError::NotNormalized);
    }
    let mut meter = BudgetMeter {
        used: 0,
        cap: budget,
    };
    let m = sys.num_vars();
    let p = sys.p();
    meter.charge(p.pow(m as u32))?;
    let int1 = IntSystem::from_series(sys, 1)?;
    let mut out = Vec::new();
    for pt in all_points(p, m) {
        if !int1.is_root(&pt) {
            continue;
        }
        out.extend(lift_roots(sys, &pt, 1, depth, &mut meter)?);
    }
    out.sort();
    Ok(out)
}

/// Full enumeration of the system's roots: every true root in Z_p^m reduces
/// mod p^target into the ball of some returned report, certified reports
/// carry uniqueness radii, and disks where the Hensel criterion stayed
/// inapplicable surface as ResidualModPn residues.
pub fn solve_system(sys: &SeriesSystem, cfg: &SearchConfig) -> HenselResult<Vec<RootReport>> {
    cfg.validate()?;
    if !sys.is_normalized() {
        return Err(HenselError::NotNormalized);
    }
    let m = check_square(sys)?;
    let n = cfg.target_depth;
    if let TailBound::AtLeast(b) = sys.tail_bound() {
        if b < n as i64 {
            return Err(HenselError::TailTooShallow { bound: b, depth: n });
        }
    }
    // Reports are stated modulo p^n; refuse to run when the coefficients
    // cannot back that many digits.
    let depth_cert = certified_depth(sys);
    if depth_cert < n as i64 {
        return Err(HenselError::Padic(PadicError::InsufficientPrecision {
            requested: n as i64,
            available: depth_cert,
        }));
    }
    let p = sys.p();
    let cap = sys
        .components()
        .iter()
        .flat_map(|c| c.terms().map(|(_, x)| x.precision_cap()))
        .min()
        .unwrap_or(n.max(4));
    let ctx = PadicContext::new(p, cap)?;
    let jac = sys.jacobian()?;
    let mut meter = BudgetMeter {
        used: 0,
        cap: cfg.budget,
    };

    meter.charge(p.pow(m as u32))?;
    let int1 = IntSystem::from_series(sys, 1)?;
    let mut reports = Vec::new();
    for a in all_points(p, m) {
        if !int1.is_root(&a) {
            continue;
        }
        let delta1 = jacobian_det_ord(&jac, &a, 1, &ctx)?;
        if delta1 == Some(0) {
            // Simple root mod p: the hypothesis holds with delta = 0.
            let start: Vec<PadicNumber> = a.iter().map(|&x| ctx.from_integer(x as i64)).collect();
            reports.push(newton_lift_prepared(sys, &jac, &start, cfg.max_newton_steps)?);
        } else {
            process_box(sys, &jac, &ctx, &a, 1, 0, cfg, &mut meter, &mut reports)?;
        }
    }
    sort_reports(&mut reports, n);
    Ok(reports)
}

/// Handles one residue box in the refinement schedule: enumerate extensions
/// to the next scheduled depth, certify the ones where 2 ord(det J) < depth,
/// prune their uniqueness balls, recurse or emit residual reports for the rest.
#[allow(clippy::too_many_arguments)]
fn process_box(
    sys: &SeriesSystem,
    jac: &[Vec<crate::mseries::TruncatedSeries>],
    ctx: &PadicContext,
    base: &[u64],
    base_depth: u32,
    schedule_pos: usize,
    cfg: &SearchConfig,
    meter: &mut BudgetMeter,
    reports: &mut Vec<RootReport>,
) -> HenselResult<()> {
    let depth = cfg.schedule[schedule_pos];
    let mut worklist = lift_roots(sys, base, base_depth, depth, meter)?;
    while !worklist.is_empty() {
        let b = worklist.remove(0);
        let delta = jacobian_det_ord(jac, &b, depth, ctx)?;
        let applicable = match delta {
            Some(d) => 2 * d < depth as i64,
            None => false,
        };
        if applicable {
            let delta = delta.unwrap();
            let start: Vec<PadicNumber> = b.iter().map(|&x| ctx.from_integer(x as i64)).collect();
            reports.push(newton_lift_prepared(sys, jac, &start, cfg.max_newton_steps)?);
            // Remove later candidates inside the certified uniqueness ball.
            worklist.retain(|b2| vec_ord(b2, &b, sys.p(), depth) <= delta);
        } else if depth == cfg.target_depth {
            let approx: Vec<PadicNumber> = b
                .iter()
                .map(|&x| {
                    ctx.from_integer(x as i64)
                        .truncate_abs(depth as i64)
                        .expect("depth >= 1")
                })
                .collect();
            reports.push(RootReport {
                status: RootStatus::ResidualModPn,
                approximation: approx,
                certified_exponent: depth as i64,
                uniqueness_radius: None,
                trace: Vec::new(),
            });
        } else {
            process_box(
                sys,
                jac,
                ctx,
                &b,
                depth,
                schedule_pos + 1,
                cfg,
                meter,
                reports,
            )?;
        }
    }
    Ok(())
}

/// ord_p of det J at an integer residue, computed exactly mod p^k.
/// Returns None when the determinant vanishes mod p^k (ord >= k).
fn jacobian_det_ord(
    jac: &[Vec<crate::mseries::TruncatedSeries>],
    point: &[u64],
    k: u32,
    ctx: &PadicContext,
) -> HenselResult<Option<i64>> {
    let p = ctx.p();
    let pk = BigInt::from(p.pow(k));
    let m = jac.len();
    let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(m);
    let pt: Vec<PadicNumber> = point.iter().map(|&x| ctx.from_integer(x as i64)).collect();
    for row in jac {
        let mut out = Vec::with_capacity(m);
        for e in row {
            let v = e.evaluate(&pt)?;
            let r = if v.abs_prec() >= k as i64 {
                v.residue_mod(k).map_err(HenselError::Padic)?
            } else {
                return Err(HenselError::Padic(PadicError::InsufficientPrecision {
                    requested: k as i64,
                    available: v.abs_prec(),
                }));
            };
            out.push(BigInt::from(r));
        }
        rows.push(out);
    }
    let det = bigint_det(rows);
    let red = modulo(&det, &pk);
    if red.is_zero() {
        return Ok(None);
    }
    let mut v = 0i64;
    let mut d = red;
    let pb = BigInt::from(p);
    while (&d % &pb).is_zero() {
        d /= &pb;
        v += 1;
    }
    Ok(Some(v))
}

fn modulo(a: &BigInt, m: &BigInt) -> BigInt {
    let r = a % m;
    if r.is_negative() {
        r + m
    } else {
        r
    }
}

/// Exact integer determinant by Laplace expansion (matrices here are tiny).
fn bigint_det(mut rows: Vec<Vec<BigInt>>) -> BigInt {
    let n = rows.len();
    match n {
        0 => BigInt::from(1),
        1 => rows.pop().unwrap().pop().unwrap(),
        2 => &rows[0][0] * &rows[1][1] - &rows[0][1] * &rows[1][0],
        _ => {
            let mut acc = BigInt::zero();
            for j in 0..n {
                let minor: Vec<Vec<BigInt>> = rows[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, x)| x.clone())
                            .collect()
                    })
                    .collect();
                let term = &rows[0][j] * bigint_det(minor);
                if j % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
    }
}

fn sort_reports(reports: &mut [RootReport], n: u32) {
    reports.sort_by_key(|r| r.residue_mod(n).unwrap_or_default());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mseries::SeriesSystem;
    use crate::padic::PadicContext;

    fn ctx(p: u64, n: u32) -> PadicContext {
        PadicContext::new(p, n).unwrap()
    }

    /// Independent brute-force oracle over exact i128 arithmetic: full scan
    /// of every residue vector mod p^n (no lifting, no shared code path).
    pub(crate) fn oracle_full_scan(
        comps: &[Vec<(Vec<u32>, i64)>],
        m: usize,
        p: u64,
        n: u32,
    ) -> Vec<Vec<u64>> {
        let modulus = (p as i128).pow(n);
        let mut pts: Vec<Vec<u64>> = vec![vec![]];
        for _ in 0..m {
            let mut next = Vec::new();
            for pt in &pts {
                for x in 0..p.pow(n) {
                    let mut q = pt.clone();
                    q.push(x);
                    next.push(q);
                }
            }
            pts = next;
        }
        pts.into_iter()
            .filter(|pt| {
                comps.iter().all(|terms| {
                    let mut acc: i128 = 0;
                    for (exps, c) in terms {
                        let mut t: i128 = (*c as i128).rem_euclid(modulus);
                        for (i, &e) in exps.iter().enumerate() {
                            for _ in 0..e {
                                t = t * pt[i] as i128 % modulus;
                            }
                        }
                        acc = (acc + t) % modulus;
                    }
                    acc.rem_euclid(modulus) == 0
                })
            })
            .collect()
    }

    /// Covered-residue comparison: every report residue is a brute-force
    /// root, and every brute-force root lies in some report's ball.
    pub(crate) fn assert_reports_cover_brute(
        p: u64,
        reports: &[RootReport],
        brute: &[Vec<u64>],
        n: u32,
    ) {
        for rep in reports {
            let own = rep.residue_mod(n).unwrap();
            assert!(
                brute.contains(&own),
                "report residue {own:?} not a brute-force root"
            );
        }
        for r in brute {
            assert!(
                reports.iter().any(|rep| rep.covers(r, p, n)),
                "brute residue {r:?} not covered by any report"
            );
        }
    }

    #[test]
    fn newton_exact_root() {
        let c = ctx(5, 12);
        // x^2 - 1 from a = 1: the root is exact, delta = ord(2) = 0.
        let sys =
            SeriesSystem::from_int_polys(&c, 1, &[vec![(vec![2], 1), (vec![0], -1)]]).unwrap();
        let rep = newton_lift(&sys, &[c.one()], 32).unwrap();
        assert_eq!(rep.status, RootStatus::Certified);
        assert_eq!(rep.uniqueness_radius, Some(0));
        assert_eq!(rep.approximation[0], c.one());
    }

    #[test]
    fn newton_finds_sqrt_of_minus_one() {
        let c = ctx(5, 12);
        let sys = SeriesSystem::from_int_polys(&c, 1, &[vec![(vec![2], 1), (vec![0], 1)]]).unwrap();
        let rep = newton_lift(&sys, &[c.from_integer(2)], 32).unwrap();
        let r = &rep.approximation[0];
        assert_eq!(r.mul(r).unwrap(), c.from_integer(-1));
        // Quadratic convergence: each recorded step satisfies its bound.
        for s in &rep.trace {
            assert!(
                s.measured >= s.bound,
                "step {}: {} < {}",
                s.step,
                s.measured,
                s.bound
            );
        }
    }

    #[test]
    fn newton_hypothesis_failure_detected() {
        let c = ctx(5, 12);
        // f = (x^2 - y - 3, x + y - 1) at a = (2,4): f(a) = (-3, 5) has
        // ord 0 while the hypothesis needs ord > 2 ord(det J) .
        let comps = vec![
            vec![(vec![2, 0], 1), (vec![0, 1], -1), (vec![0, 0], -3)],
            vec![(vec![1, 0], 1), (vec![0, 1], 1), (vec![0, 0], -1)],
        ];
        let sys = SeriesSystem::from_int_polys(&c, 2, &comps).unwrap();
        let r = newton_lift(&sys, &[c.from_integer(2), c.from_integer(4)], 32);
        assert!(matches!(r, Err(HenselError::HypothesisFails { .. })));
        // And the system indeed has no roots at all mod 5^2, hence none deeper.
        assert!(oracle_full_scan(&comps, 2, 5, 2).is_empty());
        let cfg = SearchConfig::new(4).unwrap();
        assert!(solve_system(&sys, &cfg).unwrap().is_empty());
    }

    #[test]
    fn enumerate_modp_examples() {
        let c = ctx(3, 8);
        let sys =
            SeriesSystem::from_int_polys(&c, 2, &[vec![(vec![1, 0], 1)], vec![(vec![0, 1], 1)]])
                .unwrap();
        assert_eq!(enumerate_roots_modp(&sys).unwrap(), vec![vec![0, 0]]);
        // Unit constant terms: no solutions mod p.
        let sys = SeriesSystem::from_int_polys(
            &c,
            2,
            &[vec![(vec![1, 0], 1), (vec![0, 0], 1)], vec![(vec![0, 0], 2)]],
        )
        .unwrap();
        assert!(enumerate_roots_modp(&sys).unwrap().is_empty());
    }

    #[test]
    fn enumerate_modp_matches_independent_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let c = ctx(5, 8);
        for _ in 0..20 {
            let mut comps = Vec::new();
            for _ in 0..2 {
                let mut terms = Vec::new();
                for a in 0..3u32 {
                    for b in 0..(3 - a) {
                        let coef: i64 = rng.gen_range(-12..12);
                        if coef != 0 {
                            terms.push((vec![a, b], coef));
                        }
                    }
                }
                if terms.is_empty() {
                    terms.push((vec![0, 0], 1));
                }
                comps.push(terms);
            }
            let sys = SeriesSystem::from_int_polys(&c, 2, &comps).unwrap();
            if !sys.is_normalized() {
                continue;
            }
            let got = enumerate_roots_modp(&sys).unwrap();
            let want = oracle_full_scan(&comps, 2, 5, 1);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn brute_force_examples() {
        let c = ctx(3, 8);
        let sys = SeriesSystem::from_int_polys(&c, 1, &[vec![(vec![1], 1)]]).unwrap();
        assert_eq!(
            brute_force_roots(&sys, 2, 1_000_000).unwrap(),
            vec![vec![0]]
        );
        let sys =
            SeriesSystem::from_int_polys(&c, 1, &[vec![(vec![2], 1), (vec![0], -1)]]).unwrap();
        assert_eq!(
            brute_force_roots(&sys, 3, 1_000_000).unwrap(),
            vec![vec![1], vec![26]]
        );
    }

    #[test]
    fn budget_guard_trips() {
        let c = ctx(7, 8);
        // Components vanishing to high order force a full-width root cloud.
        let sys =
            SeriesSystem::from_int_polys(&c, 2, &[vec![(vec![5, 0], 1)], vec![(vec![0, 5], 1)]])
                .unwrap();
        let r = brute_force_roots(&sys, 5, 1000);
        assert!(matches!(r, Err(HenselError::BudgetExceeded(_))));
    }

    #[test]
    fn solve_simple_certified_root() {
        let c = ctx(5, 12);
        let sys = SeriesSystem::from_int_polys(
            &c,
            2,
            &[
                vec![(vec![1, 0], 1), (vec![0, 0], -1)],
                vec![(vec![0, 1], 1), (vec![0, 0], -2)],
            ],
        )
        .unwrap();
        let cfg = SearchConfig::new(4).unwrap();
        let reports = solve_system(&sys, &cfg).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].status, RootStatus::Certified);
        assert_eq!(reports[0].residue_mod(4).unwrap(), vec![1, 2]);
    }

    #[test]
    fn degenerate_diagonal_terminates_with_residuals() {
        let c = ctx(3, 10);
        // (t1^2 - t2^2, t1 - t2) vanishes along the whole diagonal.
        let sys = SeriesSystem::from_int_polys(
            &c,
            2,
            &[
                vec![(vec![2, 0], 1), (vec![0, 2], -1)],
                vec![(vec![1, 0], 1), (vec![0, 1], -1)],
            ],
        )
        .unwrap();
        let cfg = SearchConfig::new(3).unwrap();
        let reports = solve_system(&sys, &cfg).unwrap();
        assert!(!reports.is_empty());
        assert!(reports
            .iter()
            .all(|r| r.status == RootStatus::ResidualModPn));
        // Exactly the diagonal mod 27.
        let mut residues: Vec<Vec<u64>> = reports
            .iter()
            .map(|r| r.residue_mod(3).unwrap())
            .collect();
        residues.sort();
        let want: Vec<Vec<u64>> = (0..27).map(|t| vec![t, t]).collect();
        assert_eq!(residues, want);
        // Covered-residue equality against the independent oracle.
        let comps = vec![
            vec![(vec![2, 0], 1), (vec![0, 2], -1)],
            vec![(vec![1, 0], 1), (vec![0, 1], -1)],
        ];
        let brute = oracle_full_scan(&comps, 2, 3, 3);
        assert_reports_cover_brute(3, &reports, &brute, 3);
    }

    #[test]
    fn double_root_lifts_through_fallback() {
        let c = ctx(3, 12);
        // (t1^2 - 9, t2 - 1): the only mod-3 root (0,1) kills det J, but
        // its depth-3 refinements satisfy 2 ord(det J) < 3 and lift.
        let sys = SeriesSystem::from_int_polys(
            &c,
            2,
            &[
                vec![(vec![2, 0], 1), (vec![0, 0], -9)],
                vec![(vec![0, 1], 1), (vec![0, 0], -1)],
            ],
        )
        .unwrap();
        let cfg = SearchConfig::new(4).unwrap();
        let reports = solve_system(&sys, &cfg).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.status == RootStatus::Certified));
        assert!(reports.iter().all(|r| r.uniqueness_radius == Some(1)));
        let res: Vec<Vec<u64>> = reports
            .iter()
            .map(|r| r.residue_mod(4).unwrap())
            .collect();
        assert_eq!(res, vec![vec![3, 1], vec![78, 1]]); // 78 = -3 mod 81
    }

    #[test]
    fn solve_matches_brute_force_on_random_systems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut nontrivial = 0;
        for _ in 0..40 {
            let p = [3u64, 5, 7][rng.gen_range(0..3)];
            let m = rng.gen_range(1..=2usize);
            let n = 3u32;
            let c = ctx(p, 12);
            let mut comps = Vec::new();
            for _ in 0..m {
                let mut terms = Vec::new();
                for exps in super::all_points(4, m) {
                    let d: u32 = exps.iter().map(|&x| x as u32).sum();
                    if d > 3 {
                        continue;
                    }
                    let coef: i64 = rng.gen_range(-(p as i64).pow(2)..(p as i64).pow(2));
                    if coef != 0 && rng.gen_bool(0.6) {
                        terms.push((exps.iter().map(|&x| x as u32).collect(), coef));
                    }
                }
                if terms.is_empty() {
                    terms.push((vec![0; m], 1));
                }
                comps.push(terms);
            }
            let sys = SeriesSystem::from_int_polys(&c, m, &comps).unwrap();
            if !sys.is_normalized() {
                continue;
            }
            let cfg = SearchConfig::new(n).unwrap();
            let reports = match solve_system(&sys, &cfg) {
                Ok(r) => r,
                Err(HenselError::BudgetExceeded(_)) => continue,
                Err(e) => panic!("solver error: {e}"),
            };
            let brute = oracle_full_scan(&comps, m, p, n);
            assert_reports_cover_brute(p, &reports, &brute, n);
            if !reports.is_empty() {
                nontrivial += 1;
            }
        }
        assert!(nontrivial > 5, "test generated too few nontrivial systems");
    }

    #[test]
    fn certified_roots_reduce_into_brute_force_set() {
        let c = ctx(5, 12);
        let sys = SeriesSystem::from_int_polys(
            &c,
            1,
            &[vec![(vec![2], 1), (vec![1], -3), (vec![0], 2)]], // (x-1)(x-2)
        )
        .unwrap();
        let cfg = SearchConfig::new(4).unwrap();
        let reports = solve_system(&sys, &cfg).unwrap();
        let brute = brute_force_roots(&sys, 4, 1_000_000).unwrap();
        for rep in &reports {
            assert!(brute.contains(&rep.residue_mod(4).unwrap()));
        }
        assert_eq!(reports.len(), 2);
    }

    #[test]
    fn uniqueness_radii_separate_distinct_roots() {
        let c = ctx(5, 12);
        let sys = SeriesSystem::from_int_polys(
            &c,
            1,
            &[vec![(vec![2], 1), (vec![0], -25 * 4)]], // roots +-10, delta = 1
        )
        .unwrap();
        let cfg = SearchConfig::new(4).unwrap();
        let reports = solve_system(&sys, &cfg).unwrap();
        assert_eq!(reports.len(), 2);
        let a = reports[0].residue_mod(4).unwrap();
        let b = reports[1].residue_mod(4).unwrap();
        let da = reports[0].uniqueness_radius.unwrap();
        let db = reports[1].uniqueness_radius.unwrap();
        assert!(vec_ord(&a, &b, 5, 4) <= da.max(db));
    }

    #[test]
    fn refinement_recurses_through_the_schedule() {
        // t^2 - 81 at p = 3, n = 5: the mod-3 root 0 has vanishing det J;
        // its depth-3 refinements {0, 9, 18} still fail the criterion
        // (2 ord(det) = 4 >= 3), so the solver must refine to the next
        // scheduled depth 5, where b = 9 and b = 18 certify with delta = 2
        // and prune each other's balls, while the 0-branch dies out.
        let c = ctx(3, 12);
        let sys =
            SeriesSystem::from_int_polys(&c, 1, &[vec![(vec![2], 1), (vec![0], -81)]]).unwrap();
        let cfg = SearchConfig::new(5).unwrap();
        assert_eq!(cfg.schedule, vec![3, 5]);
        let reports = solve_system(&sys, &cfg).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.status == RootStatus::Certified));
        assert!(reports.iter().all(|r| r.uniqueness_radius == Some(2)));
        let res: Vec<Vec<u64>> = reports.iter().map(|r| r.residue_mod(5).unwrap()).collect();
        assert_eq!(res, vec![vec![9], vec![243 - 9]]);
        // Exhaustive agreement at full depth.
        let comps = vec![vec![(vec![2u32], 1i64), (vec![0], -81)]];
        let brute = oracle_full_scan(&comps, 1, 3, 5);
        assert_reports_cover_brute(3, &reports, &brute, 5);
    }

    #[test]
    fn search_config_validation() {
        assert!(SearchConfig::new(4).is_ok());
        let cfg = SearchConfig::new(5).unwrap();
        assert_eq!(cfg.schedule, vec![3, 5]);
        let mut cfg = SearchConfig::new(5).unwrap();
        cfg.first_fallback_depth = 6;
        assert!(cfg.validate().is_err());
        let mut cfg = SearchConfig::new(5).unwrap();
        cfg.schedule = vec![3, 3, 5];
        assert!(cfg.validate().is_err());
    }
}
