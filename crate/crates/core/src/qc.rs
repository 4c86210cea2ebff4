//! Assembly layer for the quadratic Chabauty machinery: solving for the
//! height coefficients alpha, building finite target sets T from per-prime
//! local-height tables, combining supplied Coleman expansions into the
//! locally analytic functions rho, and solving one residue pair's system
//! with the automorphism-symmetry case split.

use crate::hensel::{self, HenselError, RootReport, RootStatus, SearchConfig};
use crate::linalg::{self, Matrix};
use crate::mseries::{
    symmetric_factor, MSeriesError, SeriesSystem, SymmetryMode, TruncatedSeries,
};
use crate::padic::{PadicContext, PadicError, PadicNumber};
use num_rational::BigRational;
use std::collections::BTreeMap;

pub type QcResult<T> = Result<T, QcError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QcError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Series(#[from] MSeriesError),
    #[error(transparent)]
    Hensel(#[from] HenselError),
    #[error("the g_ij evaluation system is singular: Condition on the functionals fails numerically")]
    SingularSystem,
    #[error("functional matrix does not have full row rank {expected} (rank {found})")]
    RankDeficient { expected: usize, found: usize },
    #[error("height table is not symmetric at entry ({0}, {1})")]
    AsymmetricHeights(usize, usize),
    #[error("expansions have incompatible truncation orders")]
    IncompatibleTruncation,
    #[error("missing per-prime data: {0}")]
    MissingPrimeData(String),
    #[error("branch restriction is identically zero: the disk is degenerate")]
    DegenerateBranch,
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

/// Values of the functionals f_0..f_{s-1} on generators D_1..D_r of a
/// finite-index subgroup of J(K).
#[derive(Debug, Clone)]
pub struct FunctionalMatrix {
    rows: Vec<Vec<PadicNumber>>,
}

impl FunctionalMatrix {
    /// Requires full row rank (the functionals span the dual of the span of
    /// the generators).
    pub fn new(rows: Vec<Vec<PadicNumber>>) -> QcResult<Self> {
        let r = rows.len();
        let m = Matrix::from_rows(rows.clone());
        let rank = linalg::rank(&m).map_err(QcError::Padic)?;
        if rank < r {
            return Err(QcError::RankDeficient {
                expected: r,
                found: rank,
            });
        }
        Ok(FunctionalMatrix { rows })
    }

    pub fn num_generators(&self) -> usize {
        self.rows.len()
    }

    pub fn num_functionals(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// f_i(D_k).
    pub fn value(&self, k: usize, i: usize) -> &PadicNumber {
        &self.rows[k][i]
    }
}

/// Symmetric table of height pairings h(D_k, D_l) for one character.
#[derive(Debug, Clone)]
pub struct HeightTable {
    entries: Vec<Vec<PadicNumber>>,
}

impl HeightTable {
    pub fn new(entries: Vec<Vec<PadicNumber>>) -> QcResult<Self> {
        let r = entries.len();
        for row in &entries {
            if row.len() != r {
                return Err(QcError::ValidationFailed("height table must be square".into()));
            }
        }
        for k in 0..r {
            for l in (k + 1)..r {
                if entries[k][l] != entries[l][k] {
                    return Err(QcError::AsymmetricHeights(k, l));
                }
            }
        }
        Ok(HeightTable { entries })
    }

    pub fn rank_size(&self) -> usize {
        self.entries.len()
    }

    pub fn at(&self, k: usize, l: usize) -> &PadicNumber {
        &self.entries[k][l]
    }
}

/// The coefficients alpha_ij (i <= j) expressing a height pairing in the
/// basis g_ij of bilinear forms built from the functionals.
#[derive(Debug, Clone)]
pub struct AlphaCoefficients {
    pub rank: usize,
    values: BTreeMap<(usize, usize), PadicNumber>,
}

impl AlphaCoefficients {
    pub fn at(&self, i: usize, j: usize) -> &PadicNumber {
        assert!(i <= j);
        &self.values[&(i, j)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &PadicNumber)> {
        self.values.iter()
    }

    /// Reconstructs sum alpha_ij g_ij(D_k, D_l) from the functional matrix.
    pub fn evaluate_pairing(
        &self,
        f: &FunctionalMatrix,
        k: usize,
        l: usize,
    ) -> QcResult<PadicNumber> {
        let mut acc: Option<PadicNumber> = None;
        for ((i, j), a) in &self.values {
            let g = g_ij(f, *i, *j, k, l)?;
            let term = a.mul(&g)?;
            acc = Some(match acc {
                None => term,
                Some(x) => x.add(&term).map_err(QcError::Padic)?,
            });
        }
        acc.ok_or_else(|| QcError::ValidationFailed("empty alpha coefficient set".into()))
    }
}

/// g_ij(D_k, D_l) = (f_i(D_k) f_j(D_l) + f_j(D_k) f_i(D_l)) / 2.
fn g_ij(f: &FunctionalMatrix, i: usize, j: usize, k: usize, l: usize) -> QcResult<PadicNumber> {
    let a = f.value(k, i).mul(f.value(l, j))?;
    let b = f.value(k, j).mul(f.value(l, i))?;
    let two = PadicContext::new(a.p(), a.precision_cap())
        .map_err(QcError::Padic)?
        .from_integer(2);
    Ok(a.add(&b)?.div(&two)?)
}

/// Solves h = sum_{i<=j} alpha_ij g_ij on the generators: one linear
/// equation per pair (k <= l), unknowns indexed by (i <= j).
pub fn solve_alpha(f: &FunctionalMatrix, h: &HeightTable) -> QcResult<AlphaCoefficients> {
    let r = h.rank_size();
    if f.num_generators() != r {
        return Err(QcError::ValidationFailed(format!(
            "height table rank {r} does not match generator count {}",
            f.num_generators()
        )));
    }
    if f.num_functionals() < r {
        return Err(QcError::ValidationFailed(
            "fewer functionals than generators: g_ij cannot span".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..r)
        .flat_map(|i| (i..r).map(move |j| (i, j)))
        .collect();
    let mut rows = Vec::with_capacity(pairs.len());
    let mut rhs = Vec::with_capacity(pairs.len());
    for &(k, l) in &pairs {
        let mut row = Vec::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            row.push(g_ij(f, i, j, k, l)?);
        }
        rows.push(row);
        rhs.push(h.at(k, l).clone());
    }
    let sol = linalg::solve(&Matrix::from_rows(rows), &rhs).map_err(|e| match e {
        PadicError::DivisionByZero => QcError::SingularSystem,
        other => QcError::Padic(other),
    })?;
    let values = pairs.into_iter().zip(sol).collect();
    Ok(AlphaCoefficients { rank: r, values })
}

/// Basis of relations among the functionals: vectors lambda with
/// sum_i lambda_i f_i(D_k) = 0 for every generator, normalized so the
/// first nonzero coordinate is 1. Empty when the matrix has full column rank.
pub fn relation_functions(f: &FunctionalMatrix) -> QcResult<Vec<Vec<PadicNumber>>> {
    let m = Matrix::from_rows(f.rows.clone());
    linalg::kernel_basis(&m).map_err(QcError::Padic)
}

/// A finite target set of p-adic values, deduplicated at guarded precision.
#[derive(Debug, Clone)]
pub struct TSet {
    values: Vec<PadicNumber>,
}

fn sort_key(x: &PadicNumber) -> (i64, Vec<u64>) {
    match x.valuation() {
        None => (i64::MAX, Vec::new()),
        Some(v) => (v, x.digits()),
    }
}

impl TSet {
    /// Deduplicates at `guard` digits below the working precision: values
    /// agreeing modulo p^{N_work - guard} (and within their certified
    /// moduli) merge; values differing at certified digits never do.
    pub fn from_values(ctx: &PadicContext, values: Vec<PadicNumber>, guard: u32) -> QcResult<Self> {
        let cut = (ctx.working_precision() as i64 - guard as i64).max(1);
        let mut kept: Vec<PadicNumber> = Vec::new();
        for v in values {
            let mut merged = false;
            for k in &kept {
                let joint = cut.min(v.abs_prec()).min(k.abs_prec());
                let (a, b) = (v.truncate_abs(joint)?, k.truncate_abs(joint)?);
                if a == b {
                    merged = true;
                    break;
                }
            }
            if !merged {
                kept.push(v);
            }
        }
        kept.sort_by_key(sort_key);
        Ok(TSet { values: kept })
    }

    pub fn singleton_zero(ctx: &PadicContext) -> Self {
        TSet {
            values: vec![ctx.zero()],
        }
    }

    pub fn values(&self) -> &[PadicNumber] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Set equality at the given absolute precision.
    pub fn matches(&self, expected: &[PadicNumber], abs_prec: i64) -> bool {
        if self.values.len() != expected.len() {
            return false;
        }
        let mut used = vec![false; expected.len()];
        for v in &self.values {
            let mut found = false;
            for (i, e) in expected.iter().enumerate() {
                if used[i] {
                    continue;
                }
                let vt = v.truncate_abs(abs_prec);
                let et = e.truncate_abs(abs_prec);
                if let (Ok(a), Ok(b)) = (vt, et) {
                    if a == b {
                        used[i] = true;
                        found = true;
                        break;
                    }
                }
            }
            if !found {
                return false;
            }
        }
        true
    }
}

/// The possible local heights at one prime away from p, as a finite set of
/// values (ingested from component/Kodaira data, not computed from models).
#[derive(Debug, Clone)]
pub struct LocalHeightValueSet {
    pub prime_label: String,
    pub values: Vec<PadicNumber>,
    pub provenance: Option<String>,
}

impl LocalHeightValueSet {
    pub fn new(prime_label: impl Into<String>, values: Vec<PadicNumber>) -> Self {
        LocalHeightValueSet {
            prime_label: prime_label.into(),
            values,
            provenance: None,
        }
    }

    /// Heights of the shape (rational multiple) * chi_q(pi_q).
    pub fn from_multiples(
        prime_label: impl Into<String>,
        multiples: &[BigRational],
        chi_q_pi: &PadicNumber,
    ) -> QcResult<Self> {
        let values = multiples
            .iter()
            .map(|m| chi_q_pi.scale_rational(m).map_err(QcError::Padic))
            .collect::<QcResult<Vec<_>>>()?;
        Ok(LocalHeightValueSet {
            prime_label: prime_label.into(),
            values,
            provenance: None,
        })
    }
}

/// T = { -sum_q w_q : w_q in W_q }: the Cartesian sum over the supplied
/// per-prime value sets, negated and deduplicated. Primes omitted from the
/// list contribute {0}.
pub fn assemble_tset_hyperelliptic(
    ctx: &PadicContext,
    tables: &[LocalHeightValueSet],
    guard: u32,
) -> QcResult<TSet> {
    let mut sums = vec![ctx.zero()];
    for table in tables {
        if table.values.is_empty() {
            return Err(QcError::MissingPrimeData(table.prime_label.clone()));
        }
        let mut next = Vec::with_capacity(sums.len() * table.values.len());
        for s in &sums {
            for w in &table.values {
                next.push(s.add(w)?);
            }
        }
        sums = next;
    }
    let negated = sums.into_iter().map(|x| x.neg()).collect();
    TSet::from_values(ctx, negated, guard)
}

/// Per-prime data for the bielliptic target sets: the local character value
/// chi_q(pi_q), ord_q(a_0), the finite local-height value sets of each curve
/// stratified by ord_q(x) = 0 versus ord_q(x) > 0, and the local heights of
/// the branch points Q_1, Q_2.
#[derive(Debug, Clone)]
pub struct BiellipticPrimeData {
    pub label: String,
    pub chi_q_pi: PadicNumber,
    pub ord_a0: u32,
    /// values on points with ord_q(x) = 0, per curve (index 0 = E1).
    pub w_unit: [Vec<PadicNumber>; 2],
    /// values on points with ord_q(x) > 0, per curve.
    pub w_plus: [Vec<PadicNumber>; 2],
    /// h_q(Q_1), h_q(Q_2).
    pub h_q_branch_point: [PadicNumber; 2],
}

impl BiellipticPrimeData {
    fn stratum(&self, curve: usize, ord_x: u32) -> &[PadicNumber] {
        if ord_x == 0 {
            &self.w_unit[curve]
        } else {
            &self.w_plus[curve]
        }
    }
}

/// The finite set of values w_q^{chi,E_k}(z) can take at one prime, per the
/// quasi-parallelogram case split: both x-coordinates integral (with the
/// chi_q(x) term ranging over n chi_q(pi_q), 0 <= n <= ord_q(a_0)), or
/// exactly one non-integral, where the height collapses to chi_q(x).
fn bielliptic_prime_values(
    data: &BiellipticPrimeData,
    k: usize,
) -> QcResult<Vec<PadicNumber>> {
    assert!(k == 1 || k == 2);
    let kk = k - 1;
    let oo = 2 - k;
    let two = PadicContext::new(data.chi_q_pi.p(), data.chi_q_pi.precision_cap())
        .map_err(QcError::Padic)?
        .from_integer(2);
    let ctx = PadicContext::new(data.chi_q_pi.p(), data.chi_q_pi.precision_cap())
        .map_err(QcError::Padic)?;
    let h_k = &data.h_q_branch_point[kk];
    let mut out = Vec::new();
    // Both arguments integral: ord x(phi_k) = n, ord x(phi_{3-k}) = A - n.
    for n in 0..=data.ord_a0 {
        let chi_term = data.chi_q_pi.mul(&ctx.from_integer(n as i64))?;
        for wk in data.stratum(kk, n) {
            for wo in data.stratum(oo, data.ord_a0 - n) {
                let v = wk.add(h_k)?.sub(&chi_term)?.sub(wo)?.mul(&two)?;
                out.push(v);
            }
        }
    }
    // x(phi_k) non-integral (or phi_k(z) at infinity): w = 2(h_q(Q_k) - w_o).
    for wo in &data.w_plus[oo] {
        out.push(h_k.sub(wo)?.mul(&two)?);
    }
    // x(phi_{3-k}) non-integral: w = 2(w_k + h_q(Q_k) - A chi_q(pi_q)).
    let a_chi = data.chi_q_pi.mul(&ctx.from_integer(data.ord_a0 as i64))?;
    for wk in &data.w_plus[kk] {
        out.push(wk.add(h_k)?.sub(&a_chi)?.mul(&two)?);
    }
    Ok(out)
}

/// T^{chi,k}: the Cartesian sum over bad primes of the per-prime value sets
/// (primes dividing neither discriminant contribute {0} and may be omitted).
pub fn assemble_tset_bielliptic(
    ctx: &PadicContext,
    primes: &[BiellipticPrimeData],
    k: usize,
    guard: u32,
) -> QcResult<TSet> {
    assert!(k == 1 || k == 2);
    let mut sums = vec![ctx.zero()];
    for data in primes {
        let locals = bielliptic_prime_values(data, k)?;
        if locals.is_empty() {
            return Err(QcError::MissingPrimeData(data.label.clone()));
        }
        let mut next = Vec::with_capacity(sums.len() * locals.len());
        for s in &sums {
            for w in &locals {
                next.push(s.add(w)?);
            }
        }
        sums = next;
    }
    TSet::from_values(ctx, sums, guard)
}

/// rho = sum_j c_j tau_j - sum_{i<=j} alpha_ij f_i f_j, assembled from
/// supplied expansions on one residue pair. All expansions must share the
/// prime, the variable convention (t_1 for place 1, t_2 for place 2) and
/// their truncation orders.
pub fn build_rho_series(
    trace: &[PadicNumber; 2],
    taus: &[TruncatedSeries; 2],
    alpha: &AlphaCoefficients,
    f_expansions: &[TruncatedSeries],
) -> QcResult<TruncatedSeries> {
    if taus[0].trunc_order() != taus[1].trunc_order() {
        return Err(QcError::IncompatibleTruncation);
    }
    for f in f_expansions {
        if f.trunc_order() != f_expansions[0].trunc_order() {
            return Err(QcError::IncompatibleTruncation);
        }
    }
    let mut rho = taus[0].scale(&trace[0])?.add(&taus[1].scale(&trace[1])?)?;
    for ((i, j), a) in alpha.iter() {
        if *i >= f_expansions.len() || *j >= f_expansions.len() {
            return Err(QcError::ValidationFailed(format!(
                "alpha index ({i},{j}) outside the supplied expansions"
            )));
        }
        let prod = f_expansions[*i].mul(&f_expansions[*j])?;
        rho = rho.sub(&prod.scale(a)?)?;
    }
    Ok(rho)
}

/// Assembles a full residue-pair system: the character series
/// rho = sum c_j tau_j - sum alpha_ij f_i f_j as the second component,
/// paired with the relation series sum lambda_i f_i (which factors through
/// the disk symmetry and carries target {0}) as the first.
#[allow(clippy::too_many_arguments)]
pub fn build_rho_system(
    label: impl Into<String>,
    trace: &[PadicNumber; 2],
    taus: &[TruncatedSeries; 2],
    alpha: &AlphaCoefficients,
    f_expansions: &[TruncatedSeries],
    relation: &[PadicNumber],
    character_targets: TSet,
    symmetry: Option<SymmetryMode>,
) -> QcResult<RhoSystem> {
    let rho = build_rho_series(trace, taus, alpha, f_expansions)?;
    let rel = build_relation_series(relation, f_expansions)?;
    let ctx = PadicContext::new(rho.p(), 4).map_err(QcError::Padic)?;
    let zero_target = TSet::singleton_zero(&PadicContext::new(
        rho.p(),
        rho.terms()
            .map(|(_, c)| c.precision_cap())
            .min()
            .unwrap_or(ctx.working_precision()),
    )
    .map_err(QcError::Padic)?);
    Ok(RhoSystem {
        label: label.into(),
        components: [rel, rho],
        targets: [zero_target, character_targets],
        symmetry,
        orbit: Vec::new(),
    })
}

/// The relation function sum_i lambda_i f_i as a series on the pair.
pub fn build_relation_series(
    lambda: &[PadicNumber],
    f_expansions: &[TruncatedSeries],
) -> QcResult<TruncatedSeries> {
    if lambda.len() != f_expansions.len() {
        return Err(QcError::ValidationFailed(
            "relation vector length does not match expansions".into(),
        ));
    }
    let mut acc: Option<TruncatedSeries> = None;
    for (c, f) in lambda.iter().zip(f_expansions) {
        let term = f.scale(c)?;
        acc = Some(match acc {
            None => term,
            Some(x) => x.add(&term)?,
        });
    }
    acc.ok_or(QcError::ValidationFailed("empty relation".into()))
}

/// Defect of the quasi-parallelogram law on supplied local-height
/// expansions: the minimum-valuation coefficient of
/// h(P+R) + h(P-R) - 2h(P) - 2h(R) + 2 chi(x(R) - x(P)),
/// a certified zero when the law holds on the data.
pub fn quasi_parallelogram_residual(
    h_plus: &TruncatedSeries,
    h_minus: &TruncatedSeries,
    h_p: &TruncatedSeries,
    h_r: &TruncatedSeries,
    chi_term: &TruncatedSeries,
) -> QcResult<PadicNumber> {
    let ctx = PadicContext::new(
        h_plus.p(),
        h_plus
            .terms()
            .map(|(_, c)| c.precision_cap())
            .min()
            .unwrap_or(8),
    )
    .map_err(QcError::Padic)?;
    let two = ctx.from_integer(2);
    let lhs = h_plus.add(h_minus)?;
    let rhs = h_p.add(h_r)?.sub(&chi_term.neg())?.scale(&two)?;
    let diff = lhs.sub(&rhs)?;
    let mut worst: Option<PadicNumber> = None;
    for (_, c) in diff.terms() {
        if c.is_zero() {
            continue;
        }
        let better = match &worst {
            None => true,
            Some(w) => c.valuation_lower_bound() < w.valuation_lower_bound(),
        };
        if better {
            worst = Some(c.clone());
        }
    }
    Ok(match worst {
        Some(w) => w,
        None => {
            let abs = diff
                .terms()
                .map(|(_, c)| c.abs_prec())
                .min()
                .unwrap_or(ctx.working_precision() as i64)
                .max(1);
            ctx.zero_mod(abs).map_err(QcError::Padic)?
        }
    })
}

/// One residue pair's system: two series (character- or relation-derived),
/// each with its finite target set, plus the symmetry tag of the disk.
/// When a symmetry tag is present, the component to be factored is the
/// first one (its target set is then pinned to the series' constant term,
/// zero in the height-normalized setting).
#[derive(Debug, Clone)]
pub struct RhoSystem {
    pub label: String,
    pub components: [TruncatedSeries; 2],
    pub targets: [TSet; 2],
    pub symmetry: Option<SymmetryMode>,
    /// Labels of residue pairs equivalent to this one under the recorded
    /// automorphism/place-swap quotient; carried through to output.
    pub orbit: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairBranch {
    /// Plain two-variable solve of (rho_1 - w_1, rho_2 - w_2).
    Direct,
    /// The branch t_1 = t_2 of a factored symmetric component.
    Diagonal,
    /// The branch t_1 = -t_2.
    AntiDiagonal,
    /// The cofactor system (factored quotient, second component).
    Cofactor,
}

/// A root of one residue pair, tagged with the branch it came from and the
/// indices of the target values that were subtracted.
#[derive(Debug, Clone)]
pub struct PairRootReport {
    pub branch: PairBranch,
    pub target_indices: (usize, usize),
    pub report: RootReport,
}

fn normalized(components: Vec<TruncatedSeries>) -> QcResult<SeriesSystem> {
    let sys = SeriesSystem::new(components)?;
    if sys.is_normalized() {
        return Ok(sys);
    }
    let (norm, _) = sys.rescale_and_normalize()?;
    Ok(norm)
}

/// Certified-root sanity check: the converted branch point must solve the
/// normalized pair system to the target depth.
fn pair_root_checks(pair: &SeriesSystem, point: &[PadicNumber], depth: u32) -> QcResult<bool> {
    for c in pair.components() {
        let v = c.evaluate(point)?;
        if v.valuation_lower_bound() < (depth as i64).min(v.abs_prec()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Converts a one-variable root in u = t^2 into pair points (t, sign*t).
/// Roots whose u-value is not a square contribute nothing. The uniqueness
/// radius carries over when t is a unit; around t = 0 the full residue
/// cloud of the disk belongs to this root and the radius collapses to 0.
fn branch_points_from_u_root(
    rep: &RootReport,
    sign: i64,
    ctx: &PadicContext,
) -> QcResult<Vec<(Vec<PadicNumber>, Option<i64>)>> {
    let u = &rep.approximation[0];
    let mut out = Vec::new();
    if u.is_zero() {
        let z = ctx.zero_mod(u.abs_prec().max(1)).map_err(QcError::Padic)?;
        out.push((vec![z.clone(), z], Some(0)));
        return Ok(out);
    }
    match u.sqrt().map_err(QcError::Padic)? {
        None => {}
        Some(t0) => {
            let radius = if t0.valuation() == Some(0) {
                rep.uniqueness_radius
            } else {
                Some(0)
            };
            for t in [t0.clone(), t0.neg()] {
                let other = if sign == 1 { t.clone() } else { t.neg() };
                out.push((vec![t, other], radius));
            }
        }
    }
    Ok(out)
}

/// Solves one residue pair.
///
/// Without a symmetry tag this is one Hensel solve per pair of target
/// values. With a tag, the first component minus its constant factors
/// through (t_1^2 - t_2^2) or (t_1 - t_2); the roots split into the
/// diagonal branch, the antidiagonal branch (each a one-variable solve in
/// u = t^2 of the second component restricted to the line) and the factored
/// cofactor system, with branch labels on every report.
pub fn solve_residue_pair(sys: &RhoSystem, cfg: &SearchConfig) -> QcResult<Vec<PairRootReport>> {
    if sys.targets.iter().any(|t| t.is_empty()) {
        return Err(QcError::ValidationFailed(format!(
            "pair {:?} has an empty target set",
            sys.label
        )));
    }
    let ctx = PadicContext::new(
        sys.components[0].p(),
        sys.components[0]
            .terms()
            .chain(sys.components[1].terms())
            .map(|(_, c)| c.precision_cap())
            .min()
            .unwrap_or(8),
    )
    .map_err(QcError::Padic)?;
    let mut out: Vec<PairRootReport> = Vec::new();
    match sys.symmetry {
        None => {
            for (i1, w1) in sys.targets[0].values().iter().enumerate() {
                for (i2, w2) in sys.targets[1].values().iter().enumerate() {
                    let c0 = sys.components[0].add_constant(&w1.neg())?;
                    let c1 = sys.components[1].add_constant(&w2.neg())?;
                    let solved = hensel::solve_system(&normalized(vec![c0, c1])?, cfg)?;
                    out.extend(solved.into_iter().map(|report| PairRootReport {
                        branch: PairBranch::Direct,
                        target_indices: (i1, i2),
                        report,
                    }));
                }
            }
        }
        Some(mode) => {
            for (i1, w1) in sys.targets[0].values().iter().enumerate() {
                for (i2, w2) in sys.targets[1].values().iter().enumerate() {
                    // Normalize the target-shifted pair first so that line
                    // restriction and u = t^2 halving happen over Z_p.
                    let c0 = sys.components[0].add_constant(&w1.neg())?;
                    let c1 = sys.components[1].add_constant(&w2.neg())?;
                    let pair = normalized(vec![c0, c1])?;
                    let n0 = pair.components()[0].clone();
                    let n1 = pair.components()[1].clone();
                    if !n0.constant_term().is_zero() {
                        // Target off the symmetric constant: the factored
                        // form does not apply; solve the pair directly.
                        for report in hensel::solve_system(&pair, cfg)? {
                            out.push(PairRootReport {
                                branch: PairBranch::Direct,
                                target_indices: (i1, i2),
                                report,
                            });
                        }
                        continue;
                    }
                    let factored = symmetric_factor(&n0, mode)?;
                    let signs: &[i64] = match mode {
                        SymmetryMode::EvenPair => &[1, -1],
                        SymmetryMode::AntiDiagonal => &[1],
                    };
                    for &sign in signs {
                        let line = n1.restrict_to_line(sign)?;
                        let even = line.halve_even_exponents()?;
                        if even.is_coefficientwise_zero() {
                            return Err(QcError::DegenerateBranch);
                        }
                        let one_var = normalized(vec![even])?;
                        let branch = if sign == 1 {
                            PairBranch::Diagonal
                        } else {
                            PairBranch::AntiDiagonal
                        };
                        for rep in hensel::solve_system(&one_var, cfg)? {
                            for (point, radius) in branch_points_from_u_root(&rep, sign, &ctx)? {
                                if !pair_root_checks(&pair, &point, cfg.target_depth)? {
                                    return Err(QcError::ValidationFailed(format!(
                                        "branch point fails the pair system on {}",
                                        sys.label
                                    )));
                                }
                                let converted = RootReport {
                                    status: rep.status,
                                    approximation: point,
                                    certified_exponent: rep.certified_exponent,
                                    uniqueness_radius: match rep.status {
                                        RootStatus::Certified => radius,
                                        RootStatus::ResidualModPn => None,
                                    },
                                    trace: rep.trace.clone(),
                                };
                                out.push(PairRootReport {
                                    branch,
                                    target_indices: (i1, i2),
                                    report: converted,
                                });
                            }
                        }
                    }
                    // Cofactor system: (quotient, rho_2 - w_2).
                    let cof = normalized(vec![factored.quotient.clone(), n1.clone()]);
                    match cof {
                        Err(QcError::Series(MSeriesError::AllCoefficientsZero)) => {
                            return Err(QcError::DegenerateBranch)
                        }
                        Err(e) => return Err(e),
                        Ok(cof_sys) => {
                            for report in hensel::solve_system(&cof_sys, cfg)? {
                                out.push(PairRootReport {
                                    branch: PairBranch::Cofactor,
                                    target_indices: (i1, i2),
                                    report,
                                });
                            }
                        }
                    }
                }
            }
            // Deduplicate identical residues found on both branches (the
            // origin lies on the diagonal and the antidiagonal at once).
            let n = cfg.target_depth;
            let mut seen: Vec<(usize, usize, Vec<u64>)> = Vec::new();
            out.retain(|r| {
                let key = (
                    r.target_indices.0,
                    r.target_indices.1,
                    r.report.residue_mod(n).unwrap_or_default(),
                );
                if seen.contains(&key) {
                    false
                } else {
                    seen.push(key);
                    true
                }
            });
        }
    }
    Ok(out)
}

/// Verdict of the torsion-congruence post-filter on one recovered root.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterVerdict {
    Consistent,
    Excluded { n1_mod: u64, n2_mod: u64 },
}

/// Congruence filter on recovered roots: if the image of the root on the
/// second curve is n * Q for the Mordell-Weil generator Q, then n is
/// congruent to (supplied integral expansion at the root) / (integral at Q)
/// mod p, and to the reduction index mod the order of Q in E(F_p). Roots
/// where the two congruences clash cannot come from global points.
#[derive(Debug, Clone)]
pub struct CongruenceFilter {
    /// Expansion of the Coleman integral z -> int_inf^{phi(z)} omega on the pair.
    pub integral_series: TruncatedSeries,
    /// The same integral at the generator Q.
    pub base_integral: PadicNumber,
    /// Index n_2 with reduction(phi(z)) = n_2 * reduction(Q).
    pub reduction_index: u64,
    /// Order of reduction(Q) in E(F_p).
    pub reduction_order: u32,
}

pub fn apply_congruence_filter(
    filter: &CongruenceFilter,
    root: &[PadicNumber],
) -> QcResult<FilterVerdict> {
    let p = filter.base_integral.p();
    let val = filter.integral_series.evaluate(root)?;
    let n1 = val.div(&filter.base_integral)?;
    if n1.valuation_lower_bound() < 0 {
        return Err(QcError::ValidationFailed(
            "integral ratio is not p-integral on this disk".into(),
        ));
    }
    let n1_mod = num_traits::ToPrimitive::to_u64(&n1.residue_mod(1).map_err(QcError::Padic)?)
        .expect("single digit");
    // n = n1 mod p and n = n2 mod order: consistent iff they agree mod gcd.
    let g = gcd(p, filter.reduction_order as u64);
    let n2_mod = filter.reduction_index % filter.reduction_order as u64;
    if n1_mod % g == n2_mod % g {
        Ok(FilterVerdict::Consistent)
    } else {
        Ok(FilterVerdict::Excluded {
            n1_mod,
            n2_mod,
        })
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mseries::{Scaling, TailBound};
    use crate::padic::PadicContext;

    fn ctx(p: u64, n: u32) -> PadicContext {
        PadicContext::new(p, n).unwrap()
    }

    fn fm(c: &PadicContext, rows: &[&[i64]]) -> FunctionalMatrix {
        FunctionalMatrix::new(
            rows.iter()
                .map(|r| r.iter().map(|&x| c.from_integer(x)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn ht(c: &PadicContext, rows: &[&[i64]]) -> HeightTable {
        HeightTable::new(
            rows.iter()
                .map(|r| r.iter().map(|&x| c.from_integer(x)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn alpha_scalar_case() {
        let c = ctx(7, 12);
        // r = 1: alpha_00 = h(D,D) / f_0(D)^2.
        let f = fm(&c, &[&[3]]);
        let h = ht(&c, &[&[18]]);
        let a = solve_alpha(&f, &h).unwrap();
        assert_eq!(a.at(0, 0), &c.from_integer(2));
    }

    #[test]
    fn alpha_identity_functionals() {
        let c = ctx(7, 12);
        // F = identity: g_ij orthonormal-ish, so alpha reads off H.
        let f = fm(&c, &[&[1, 0], &[0, 1]]);
        let h = ht(&c, &[&[5, 3], &[3, -2]]);
        let a = solve_alpha(&f, &h).unwrap();
        assert_eq!(a.at(0, 0), &c.from_integer(5));
        assert_eq!(a.at(1, 1), &c.from_integer(-2));
        // off-diagonal: h_{01} = alpha_01 * g_01 with g_01 = 1/2 here.
        assert_eq!(a.at(0, 1), &c.from_integer(6));
    }

    #[test]
    fn alpha_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let c = ctx(7, 12);
        for _ in 0..20 {
            let r = 4usize;
            let rows: Vec<Vec<PadicNumber>> = loop {
                let cand: Vec<Vec<i64>> = (0..r)
                    .map(|_| (0..r).map(|_| rng.gen_range(-20..20)).collect())
                    .collect();
                let rows: Vec<Vec<PadicNumber>> = cand
                    .iter()
                    .map(|row| row.iter().map(|&x| c.from_integer(x)).collect())
                    .collect();
                if FunctionalMatrix::new(rows.clone()).is_ok() {
                    break rows;
                }
            };
            let f = FunctionalMatrix::new(rows).unwrap();
            let mut hrows = vec![vec![c.zero(); r]; r];
            for k in 0..r {
                for l in k..r {
                    let v = c.from_integer(rng.gen_range(-50..50));
                    hrows[k][l] = v.clone();
                    hrows[l][k] = v;
                }
            }
            let h = HeightTable::new(hrows).unwrap();
            let a = solve_alpha(&f, &h).unwrap();
            for k in 0..r {
                for l in k..r {
                    let got = a.evaluate_pairing(&f, k, l).unwrap();
                    assert_eq!(&got, h.at(k, l), "entry ({k},{l})");
                }
            }
        }
    }

    #[test]
    fn relations_recover_planted_dependence() {
        let c = ctx(13, 12);
        // rank 1, f_0 = 5 f_1 on the generator: relation (1, -5).
        let f = fm(&c, &[&[10, 2]]);
        let rel = relation_functions(&f).unwrap();
        assert_eq!(rel.len(), 1);
        assert_eq!(rel[0][0], c.one());
        assert_eq!(rel[0][1], c.from_ratio(-10, 2).unwrap());
        // Square invertible: no relations.
        let f = fm(&c, &[&[1, 0], &[0, 1]]);
        assert!(relation_functions(&f).unwrap().is_empty());
    }

    #[test]
    fn relations_annihilate_generators() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let c = ctx(7, 12);
        for _ in 0..10 {
            let rows: Vec<Vec<i64>> = (0..2)
                .map(|_| (0..4).map(|_| rng.gen_range(-9..9)).collect())
                .collect();
            let Ok(f) = FunctionalMatrix::new(
                rows.iter()
                    .map(|r| r.iter().map(|&x| c.from_integer(x)).collect())
                    .collect(),
            ) else {
                continue;
            };
            for lam in relation_functions(&f).unwrap() {
                for k in 0..2 {
                    let mut acc = c.zero();
                    for i in 0..4 {
                        acc = acc.add(&lam[i].mul(f.value(k, i)).unwrap()).unwrap();
                    }
                    assert!(acc.is_zero());
                }
            }
        }
    }

    #[test]
    fn hyperelliptic_tset_assembly() {
        let c = ctx(5, 12);
        // All W_q = {0}: T = {0}.
        let t = assemble_tset_hyperelliptic(
            &c,
            &[LocalHeightValueSet::new("q2", vec![c.zero()])],
            2,
        )
        .unwrap();
        assert!(t.matches(&[c.zero()], 10));
        // Two primes with {0, a} and {0, b}.
        let a = c.from_integer(25);
        let b = c.from_integer(7);
        let t = assemble_tset_hyperelliptic(
            &c,
            &[
                LocalHeightValueSet::new("qa", vec![c.zero(), a.clone()]),
                LocalHeightValueSet::new("qb", vec![c.zero(), b.clone()]),
            ],
            2,
        )
        .unwrap();
        let want = vec![
            c.zero(),
            a.neg(),
            b.neg(),
            a.add(&b).unwrap().neg(),
        ];
        assert!(t.matches(&want, 10));
        // Empty table list: T = {0}.
        let t = assemble_tset_hyperelliptic(&c, &[], 2).unwrap();
        assert!(t.matches(&[c.zero()], 10));
    }

    #[test]
    fn tset_dedup_respects_certified_digits() {
        let c = ctx(5, 12);
        let a = c.from_integer(3);
        // Differs from a only beyond the guard cut: merges.
        let near = c.from_integer(3 + 5i64.pow(11));
        // Differs at a certified digit: stays.
        let far = c.from_integer(3 + 5i64.pow(2));
        let t = TSet::from_values(&c, vec![a, near, far], 2).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn bielliptic_tset_trivial_all_zero() {
        // I_1 / Tamagawa 1 data at every bad prime: T = {0} for both k.
        let c = ctx(5, 12);
        let iw = crate::padic::BranchConstant::iwasawa(&c);
        let chi7 = c.from_integer(49).log(&iw).unwrap().neg(); // -(1/1) log N(7)
        let z = || vec![c.zero()];
        let prime = |label: &str, chi: &PadicNumber| BiellipticPrimeData {
            label: label.into(),
            chi_q_pi: chi.clone(),
            ord_a0: 0,
            w_unit: [z(), z()],
            w_plus: [z(), z()],
            h_q_branch_point: [c.zero(), c.zero()],
        };
        for k in [1, 2] {
            let t = assemble_tset_bielliptic(
                &c,
                &[prime("q7", &chi7), prime("q13", &c.from_integer(13))],
                k,
                2,
            )
            .unwrap();
            assert!(t.matches(&[c.zero()], 10), "k = {k}");
        }
        // Good reduction everywhere: empty prime list, T = {0}.
        let t = assemble_tset_bielliptic(&c, &[], 1, 2).unwrap();
        assert!(t.matches(&[c.zero()], 10));
    }

    #[test]
    fn bielliptic_tset_with_positive_a0_valuation() {
        // ord_q(a0) = 2: the chi_q(x) term ranges over {0, C, 2C} and the
        // strata interleave. Hand-computed expectation for k = 1 with
        // W0 = {0} on both curves, Wplus = {u1}, {u2}, h_q = (h1, h2):
        //   n = 0: 2(0 + h1 - 0C - u2)
        //   n = 1: 2(u1 + h1 - C - u2)
        //   n = 2: 2(u1 + h1 - 2C - 0)
        //   x(phi_1) non-integral: 2(h1 - u2)   [= n = 0 value]
        //   x(phi_2) non-integral: 2(u1 + h1 - 2C) [= n = 2 value]
        let c = ctx(5, 12);
        let big_c = c.from_integer(7);
        let (u1, u2) = (c.from_integer(5), c.from_integer(11));
        let (h1, h2) = (c.from_integer(1), c.from_integer(2));
        let data = BiellipticPrimeData {
            label: "q".into(),
            chi_q_pi: big_c.clone(),
            ord_a0: 2,
            w_unit: [vec![c.zero()], vec![c.zero()]],
            w_plus: [vec![u1.clone()], vec![u2.clone()]],
            h_q_branch_point: [h1.clone(), h2.clone()],
        };
        let t = assemble_tset_bielliptic(&c, &[data], 1, 2).unwrap();
        let two = c.from_integer(2);
        let v0 = h1.sub(&u2).unwrap().mul(&two).unwrap();
        let v1 = u1
            .add(&h1)
            .unwrap()
            .sub(&big_c)
            .unwrap()
            .sub(&u2)
            .unwrap()
            .mul(&two)
            .unwrap();
        let v2 = u1
            .add(&h1)
            .unwrap()
            .sub(&big_c.mul(&two).unwrap())
            .unwrap()
            .mul(&two)
            .unwrap();
        assert!(t.matches(&[v0, v1, v2], 10), "T = {:?}", t.values());
    }

    #[test]
    fn empty_target_set_is_rejected() {
        let c = ctx(5, 12);
        let comp =
            TruncatedSeries::from_int_terms(&c, 2, &[(vec![1, 0], 1), (vec![0, 1], 1)]).unwrap();
        let sys = RhoSystem {
            label: "empty".into(),
            components: [comp.clone(), comp],
            targets: [
                TSet::from_values(&c, vec![], 2).unwrap(),
                TSet::singleton_zero(&c),
            ],
            symmetry: None,
            orbit: vec![],
        };
        let cfg = SearchConfig::new(4).unwrap();
        assert!(matches!(
            solve_residue_pair(&sys, &cfg),
            Err(QcError::ValidationFailed(_))
        ));
    }

    #[test]
    fn rho_assembly_elliptic_shape() {
        // r = 1: rho = tau_1 + tau_2 - alpha f_0^2.
        let c = ctx(5, 12);
        let tau1 = TruncatedSeries::new(
            5,
            2,
            4,
            Scaling::Local,
            TailBound::AtLeast(4),
            vec![(vec![1, 0], c.from_integer(2)), (vec![2, 0], c.one())],
        )
        .unwrap();
        let tau2 = TruncatedSeries::new(
            5,
            2,
            4,
            Scaling::Local,
            TailBound::AtLeast(4),
            vec![(vec![0, 1], c.from_integer(3))],
        )
        .unwrap();
        let f0 = TruncatedSeries::new(
            5,
            2,
            4,
            Scaling::Local,
            TailBound::AtLeast(4),
            vec![(vec![1, 0], c.one()), (vec![0, 1], c.one())],
        )
        .unwrap();
        let alpha = AlphaCoefficients {
            rank: 1,
            values: [((0, 0), c.from_integer(7))].into_iter().collect(),
        };
        let rho = build_rho_series(
            &[c.one(), c.one()],
            &[tau1.clone(), tau2.clone()],
            &alpha,
            &[f0.clone()],
        )
        .unwrap();
        // Hand-assembled: tau1 + tau2 - 7 (t1 + t2)^2.
        let hand = tau1
            .add(&tau2)
            .unwrap()
            .sub(&f0.mul(&f0).unwrap().scale(&c.from_integer(7)).unwrap())
            .unwrap();
        for (e, coeff) in hand.terms() {
            assert_eq!(rho.coefficient(e).unwrap_or(&c.zero()), coeff);
        }
        // Torsion-disk degenerate case: zero alpha part.
        let alpha0 = AlphaCoefficients {
            rank: 1,
            values: [((0, 0), c.zero())].into_iter().collect(),
        };
        let rho0 = build_rho_series(&[c.one(), c.one()], &[tau1.clone(), tau2.clone()], &alpha0, &[f0])
            .unwrap();
        let plain = tau1.add(&tau2).unwrap();
        for (e, coeff) in plain.terms() {
            assert_eq!(rho0.coefficient(e).unwrap_or(&c.zero()), coeff);
        }
    }

    #[test]
    fn quasi_parallelogram_on_quadratic_form() {
        // h(z) = z^2 as a series in one "coordinate" on the pair: the law is
        // exact for quadratic forms, so the residual is certified zero.
        let c = ctx(5, 12);
        let series = |terms: Vec<(Vec<u32>, i64)>| {
            TruncatedSeries::from_int_terms(&c, 2, &terms).unwrap()
        };
        // P + R ~ t1 + t2, P - R ~ t1 - t2, P ~ t1, R ~ t2, h = square.
        let h_plus = series(vec![(vec![2, 0], 1), (vec![1, 1], 2), (vec![0, 2], 1)]);
        let h_minus = series(vec![(vec![2, 0], 1), (vec![1, 1], -2), (vec![0, 2], 1)]);
        let h_p = series(vec![(vec![2, 0], 1)]);
        let h_r = series(vec![(vec![0, 2], 1)]);
        let chi = series(vec![]); // vanishing chi term
        let res = quasi_parallelogram_residual(&h_plus, &h_minus, &h_p, &h_r, &chi).unwrap();
        assert!(res.is_zero());
        // All-zero inputs: residual certified zero.
        let z = series(vec![]);
        let res = quasi_parallelogram_residual(&z, &z, &z, &z, &z).unwrap();
        assert!(res.is_zero());
        // Injected fault of valuation 3 is detected.
        let bumped = h_plus
            .add_constant(&c.from_integer(125))
            .unwrap();
        let res = quasi_parallelogram_residual(&bumped, &h_minus, &h_p, &h_r, &chi).unwrap();
        assert_eq!(res.valuation(), Some(3));
    }

    #[test]
    fn even_pair_disk_splits_into_branches() {
        let c = ctx(5, 12);
        // rho_anti = t1^2 - t2^2 (factored constant 0, cofactor 1),
        // rho_cyc = t1 t2 - 1: diagonal roots t = +-1, antidiagonal roots
        // t^2 = -1 (solvable at p = 5), cofactor system has no root.
        let comp0 = TruncatedSeries::from_int_terms(
            &c,
            2,
            &[(vec![2, 0], 1), (vec![0, 2], -1)],
        )
        .unwrap();
        let comp1 = TruncatedSeries::from_int_terms(
            &c,
            2,
            &[(vec![1, 1], 1), (vec![0, 0], -1)],
        )
        .unwrap();
        let sys = RhoSystem {
            label: "test".into(),
            components: [comp0.clone(), comp1.clone()],
            targets: [TSet::singleton_zero(&c), TSet::singleton_zero(&c)],
            symmetry: Some(SymmetryMode::EvenPair),
            orbit: vec![],
        };
        let cfg = SearchConfig::new(4).unwrap();
        let reports = solve_residue_pair(&sys, &cfg).unwrap();
        assert!(reports.iter().all(|r| r.branch != PairBranch::Cofactor));
        let diag: Vec<_> = reports
            .iter()
            .filter(|r| r.branch == PairBranch::Diagonal)
            .collect();
        assert_eq!(diag.len(), 2); // (1,1) and (-1,-1)
        let anti: Vec<_> = reports
            .iter()
            .filter(|r| r.branch == PairBranch::AntiDiagonal)
            .collect();
        assert_eq!(anti.len(), 2); // (i, -i) and (-i, i)
        // Branch union equals the brute-force roots of the raw pair system.
        let brute = hensel::brute_force_roots(
            &SeriesSystem::new(vec![comp0, comp1]).unwrap(),
            4,
            1_000_000,
        )
        .unwrap();
        let mut got: Vec<Vec<u64>> = reports
            .iter()
            .map(|r| r.report.residue_mod(4).unwrap())
            .collect();
        got.sort();
        assert_eq!(got, brute);
    }

    #[test]
    fn planted_root_off_diagonal_recovered() {
        let c = ctx(5, 12);
        // comp0 = t1^2 - t2^2 with target a^2 - b^2 (off the symmetric
        // constant 0), comp1 = t1^2 + t2^2 with target a^2 + b^2: plants
        // roots (+-a, +-b); check (a, b) = (1, 2) is recovered as Certified.
        let comp0 =
            TruncatedSeries::from_int_terms(&c, 2, &[(vec![2, 0], 1), (vec![0, 2], -1)]).unwrap();
        let comp1 =
            TruncatedSeries::from_int_terms(&c, 2, &[(vec![2, 0], 1), (vec![0, 2], 1)]).unwrap();
        let t0 = TSet::from_values(&c, vec![c.from_integer(-3)], 2).unwrap();
        let t1 = TSet::from_values(&c, vec![c.from_integer(5)], 2).unwrap();
        let sys = RhoSystem {
            label: "planted".into(),
            components: [comp0, comp1],
            targets: [t0, t1],
            symmetry: Some(SymmetryMode::EvenPair),
            orbit: vec![],
        };
        let cfg = SearchConfig::new(4).unwrap();
        let reports = solve_residue_pair(&sys, &cfg).unwrap();
        assert!(reports.iter().all(|r| r.branch == PairBranch::Direct));
        assert_eq!(reports.len(), 4);
        assert!(reports
            .iter()
            .all(|r| r.report.status == RootStatus::Certified));
        let residues: Vec<Vec<u64>> = reports
            .iter()
            .map(|r| r.report.residue_mod(1).unwrap())
            .collect();
        assert!(residues.contains(&vec![1, 2]));
    }

    #[test]
    fn rho_system_pairs_relation_with_character_series() {
        // The real-quadratic shape: rho_1 = tau_1 + tau_2 - alpha f_0^2
        // paired with the relation rho_2 = f_0 - b f_1, targets ({0}, T).
        let c = ctx(13, 12);
        let tau = |var: usize| {
            TruncatedSeries::from_int_terms(&c, 1, &[(vec![1], 2), (vec![2], 1)])
                .unwrap()
                .embed_in_pair(var)
        };
        let f0 = TruncatedSeries::from_int_terms(&c, 1, &[(vec![1], 1)])
            .unwrap()
            .embed_in_pair(0);
        let f1 = TruncatedSeries::from_int_terms(&c, 1, &[(vec![1], 1)])
            .unwrap()
            .embed_in_pair(1);
        let alpha = AlphaCoefficients {
            rank: 1,
            values: [((0, 0), c.from_integer(3))].into_iter().collect(),
        };
        let t = TSet::from_values(&c, vec![c.zero(), c.from_integer(13)], 2).unwrap();
        let sys = build_rho_system(
            "real-case",
            &[c.one(), c.one()],
            &[tau(0), tau(1)],
            &alpha,
            &[f0.clone(), f1.clone()],
            &[c.one(), c.from_integer(-1)], // f_0 - f_1
            t,
            Some(SymmetryMode::AntiDiagonal),
        )
        .unwrap();
        // First component is the relation f_0 - f_1 = t1 - t2.
        assert_eq!(sys.components[0].coefficient(&[1, 0]).unwrap(), &c.one());
        assert_eq!(
            sys.components[0].coefficient(&[0, 1]).unwrap(),
            &c.from_integer(-1)
        );
        assert_eq!(sys.targets[0].len(), 1);
        assert_eq!(sys.targets[1].len(), 2);
        // Second component carries the -alpha f_0^2 term.
        assert_eq!(
            sys.components[1].coefficient(&[2, 0]).unwrap(),
            &c.from_integer(1 - 3)
        );
    }

    #[test]
    fn antisymmetry_propagates_through_rho_assembly() {
        // For a curve over Q the expansions at the two places coincide, and
        // the coefficient constraints are alpha_01^anti = 0,
        // alpha_00^anti = -alpha_11^anti, alpha_00^cyc = alpha_11^cyc.
        // Swapping the places then negates the constant-free part of the
        // anticyclotomic rho and fixes the cyclotomic one.
        let c = ctx(5, 12);
        let tau = |var: usize| {
            TruncatedSeries::from_int_terms(&c, 1, &[(vec![1], 3), (vec![2], 2), (vec![3], 1)])
                .unwrap()
                .embed_in_pair(var)
        };
        let f = |var: usize| {
            TruncatedSeries::from_int_terms(&c, 1, &[(vec![1], 1), (vec![2], 4)])
                .unwrap()
                .embed_in_pair(var)
        };
        let fs = [f(0), f(1)];
        let a = c.from_integer(7);
        let alpha_anti = AlphaCoefficients {
            rank: 2,
            values: [
                ((0, 0), a.clone()),
                ((0, 1), c.zero()),
                ((1, 1), a.neg()),
            ]
            .into_iter()
            .collect(),
        };
        let s = c.from_integer(2);
        let alpha_cyc = AlphaCoefficients {
            rank: 2,
            values: [
                ((0, 0), s.clone()),
                ((0, 1), c.from_integer(9)),
                ((1, 1), s),
            ]
            .into_iter()
            .collect(),
        };
        let rho_anti = build_rho_series(
            &[c.one(), c.from_integer(-1)],
            &[tau(0), tau(1)],
            &alpha_anti,
            &fs,
        )
        .unwrap();
        let rho_cyc = build_rho_series(&[c.one(), c.one()], &[tau(0), tau(1)], &alpha_cyc, &fs)
            .unwrap();
        let swapped_anti = rho_anti.swap_vars();
        for (e, coeff) in rho_anti.terms() {
            let got = swapped_anti.coefficient(e).cloned().unwrap_or_else(|| c.zero());
            assert_eq!(got, coeff.neg(), "anti coefficient at {e:?}");
        }
        let swapped_cyc = rho_cyc.swap_vars();
        for (e, coeff) in rho_cyc.terms() {
            let got = swapped_cyc.coefficient(e).cloned().unwrap_or_else(|| c.zero());
            assert_eq!(&got, coeff, "cyc coefficient at {e:?}");
        }
    }

    #[test]
    fn congruence_filter_verdicts() {
        let c = ctx(3, 12);
        // Integral expansion n1(z) = 1 + 3 t1 at the root (0,0): n1 = 1.
        let series = TruncatedSeries::from_int_terms(&c, 2, &[(vec![0, 0], 1), (vec![1, 0], 3)])
            .unwrap();
        let filt = CongruenceFilter {
            integral_series: series,
            base_integral: c.one(),
            reduction_index: 3,
            reduction_order: 6,
        };
        // n = 1 mod 3 vs n = 3 mod 6: 1 != 0 mod 3 -> excluded.
        let verdict = apply_congruence_filter(&filt, &[c.zero(), c.zero()]).unwrap();
        assert_eq!(
            verdict,
            FilterVerdict::Excluded {
                n1_mod: 1,
                n2_mod: 3
            }
        );
        // n2 = 1 mod 6 is consistent with n1 = 1 mod 3.
        let filt2 = CongruenceFilter {
            reduction_index: 1,
            ..filt
        };
        assert_eq!(
            apply_congruence_filter(&filt2, &[c.zero(), c.zero()]).unwrap(),
            FilterVerdict::Consistent
        );
    }
}
