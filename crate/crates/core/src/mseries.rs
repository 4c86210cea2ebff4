//! Truncated multivariate power series over Q_p.
//!
//! A series stores coefficients below a total-degree truncation order and a
//! certified lower bound on the valuation of everything omitted. Two scaling
//! regimes are distinguished:
//!
//! * [`Scaling::Local`] — a raw local expansion, to be evaluated at points of
//!   p Z_p; the tail bound refers to evaluation after the substitution
//!   t -> p t, so a term of degree d earns a valuation credit of d.
//! * [`Scaling::Unit`] — the substitution has been absorbed into the
//!   coefficients ([`SeriesSystem::rescale_and_normalize`]); evaluation points
//!   run over Z_p and no degree credit applies.

use crate::padic::{PadicContext, PadicError, PadicNumber};
use std::collections::BTreeMap;

pub type MSeriesResult<T> = Result<T, MSeriesError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MSeriesError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error("stored term of total degree {0} at or above truncation order {1}")]
    DegreeAboveTruncation(u32, u32),
    #[error("declared tail bound {declared} exceeds what coefficient certification supports ({supported})")]
    InconsistentTailBound { declared: i64, supported: i64 },
    #[error("tail valuation bound below 1: evaluation cannot be certified")]
    UncertifiedTail,
    #[error("evaluation point outside the series' domain of validity")]
    PointOutsideDomain,
    #[error("operands have incompatible scaling regimes")]
    MixedScaling,
    #[error("operands disagree in prime or variable count")]
    IncompatibleSeries,
    #[error("series violates the required symmetry: {0}")]
    NotSymmetric(String),
    #[error("all coefficients of a component are zero: nothing to normalize")]
    AllCoefficientsZero,
    #[error("coefficient certified to {available} digits, {requested} required")]
    InsufficientCoefficientPrecision { requested: i64, available: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Local,
    Unit,
}

/// Lower bound on the valuation of every omitted term; `Exact` means the
/// series is a polynomial with no omitted terms at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailBound {
    Exact,
    AtLeast(i64),
}

impl TailBound {
    pub fn as_option(self) -> Option<i64> {
        match self {
            TailBound::Exact => None,
            TailBound::AtLeast(b) => Some(b),
        }
    }

    fn min_with(self, other: TailBound) -> TailBound {
        match (self.as_option(), other.as_option()) {
            (None, None) => TailBound::Exact,
            (Some(a), None) => TailBound::AtLeast(a),
            (None, Some(b)) => TailBound::AtLeast(b),
            (Some(a), Some(b)) => TailBound::AtLeast(a.min(b)),
        }
    }

    fn shift(self, d: i64) -> TailBound {
        match self {
            TailBound::Exact => TailBound::Exact,
            TailBound::AtLeast(b) => TailBound::AtLeast(b + d),
        }
    }
}

fn min_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, x) => x,
        (x, None) => x,
        (Some(a), Some(b)) => Some(a.min(b)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    p: u64,
    num_vars: usize,
    trunc_order: u32,
    scaling: Scaling,
    tail: TailBound,
    cap: u32,
    coeffs: BTreeMap<Vec<u32>, PadicNumber>,
}

/// Precision cap for series with no stored coefficients: an identically
/// zero polynomial evaluates to an exact zero, so any claimed precision is
/// sound; this cap only bounds the reported certificate.
const DEFAULT_EMPTY_CAP: u32 = 32;

fn total_degree(exps: &[u32]) -> u32 {
    exps.iter().sum()
}

impl TruncatedSeries {
    /// Builds a series, checking the stored degrees against the truncation
    /// order and the declared tail bound against coefficient certification.
    pub fn new(
        p: u64,
        num_vars: usize,
        trunc_order: u32,
        scaling: Scaling,
        tail: TailBound,
        terms: Vec<(Vec<u32>, PadicNumber)>,
    ) -> MSeriesResult<Self> {
        let mut coeffs = BTreeMap::new();
        for (exps, c) in terms {
            assert_eq!(exps.len(), num_vars, "exponent tuple arity mismatch");
            let d = total_degree(&exps);
            if d >= trunc_order {
                return Err(MSeriesError::DegreeAboveTruncation(d, trunc_order));
            }
            if c.p() != p {
                return Err(MSeriesError::IncompatibleSeries);
            }
            if let TailBound::AtLeast(b) = tail {
                // Each stored term's contribution must be certified at least
                // as deep as the bound claims for the omitted ones.
                let credit = if scaling == Scaling::Local { d as i64 } else { 0 };
                let supported = c.abs_prec() + credit;
                if supported < b {
                    return Err(MSeriesError::InconsistentTailBound {
                        declared: b,
                        supported,
                    });
                }
            }
            match coeffs.entry(exps) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(c);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let s = e.get().add(&c)?;
                    e.insert(s);
                }
            }
        }
        let cap = coeffs
            .values()
            .map(|c| c.precision_cap())
            .min()
            .unwrap_or(DEFAULT_EMPTY_CAP);
        Ok(TruncatedSeries {
            p,
            num_vars,
            trunc_order,
            scaling,
            tail,
            cap,
            coeffs,
        })
    }

    /// Polynomial with exact integer coefficients, unit scaling.
    pub fn from_int_terms(
        ctx: &PadicContext,
        num_vars: usize,
        terms: &[(Vec<u32>, i64)],
    ) -> MSeriesResult<Self> {
        let deg = terms.iter().map(|(e, _)| total_degree(e)).max().unwrap_or(0);
        Self::new(
            ctx.p(),
            num_vars,
            deg + 1,
            Scaling::Unit,
            TailBound::Exact,
            terms
                .iter()
                .map(|(e, c)| (e.clone(), ctx.from_integer(*c)))
                .collect(),
        )
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn trunc_order(&self) -> u32 {
        self.trunc_order
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn tail_bound(&self) -> TailBound {
        self.tail
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &PadicNumber)> {
        self.coeffs.iter()
    }

    pub fn coefficient(&self, exps: &[u32]) -> Option<&PadicNumber> {
        self.coeffs.get(exps)
    }

    pub fn is_coefficientwise_zero(&self) -> bool {
        self.coeffs.values().all(|c| c.is_zero())
    }

    pub(crate) fn precision_cap(&self) -> u32 {
        self.cap
    }

    fn ctx(&self) -> PadicContext {
        PadicContext::new(self.p, self.precision_cap()).expect("valid prime")
    }

    /// Constant term; a certified zero when none is stored.
    pub fn constant_term(&self) -> PadicNumber {
        let key = vec![0u32; self.num_vars];
        match self.coeffs.get(&key) {
            Some(c) => c.clone(),
            None => {
                let ctx = self.ctx();
                let abs = min_opt(Some(ctx.working_precision() as i64), self.tail.as_option())
                    .unwrap()
                    .max(1);
                ctx.zero_mod(abs).expect("abs >= 1")
            }
        }
    }

    /// Valuation floor of the series' values on its domain: every value
    /// (including the omitted tail) has valuation at least this.
    fn value_floor(&self) -> Option<i64> {
        let mut floor = self.tail.as_option();
        for (exps, c) in &self.coeffs {
            let credit = if self.scaling == Scaling::Local {
                total_degree(exps) as i64
            } else {
                0
            };
            floor = min_opt(floor, Some(c.valuation_lower_bound() + credit));
        }
        floor
    }

    fn check_compatible(&self, other: &TruncatedSeries) -> MSeriesResult<()> {
        if self.p != other.p || self.num_vars != other.num_vars {
            return Err(MSeriesError::IncompatibleSeries);
        }
        if self.scaling != other.scaling {
            return Err(MSeriesError::MixedScaling);
        }
        Ok(())
    }

    /// Evaluates the series at a point inside its domain of validity.
    /// The result is certified modulo p^{min(arithmetic certificate, tail bound)}.
    pub fn evaluate(&self, point: &[PadicNumber]) -> MSeriesResult<PadicNumber> {
        assert_eq!(point.len(), self.num_vars, "point arity mismatch");
        let min_val = match self.scaling {
            Scaling::Local => 1,
            Scaling::Unit => 0,
        };
        for t in point {
            if t.valuation_lower_bound() < min_val {
                return Err(MSeriesError::PointOutsideDomain);
            }
        }
        if let TailBound::AtLeast(b) = self.tail {
            if b < 1 {
                return Err(MSeriesError::UncertifiedTail);
            }
        }
        let ctx = self.ctx();
        let mut acc = ctx
            .zero_mod(ctx.working_precision() as i64)
            .expect("cap >= 1");
        for (exps, c) in &self.coeffs {
            let mut term = c.clone();
            for (i, &e) in exps.iter().enumerate() {
                if e > 0 {
                    term = term.mul(&point[i].pow(e as i64)?)?;
                }
            }
            acc = acc.add(&term)?;
        }
        match self.tail {
            TailBound::Exact => Ok(acc),
            TailBound::AtLeast(b) => Ok(acc.truncate_abs(b.min(acc.abs_prec()))?),
        }
    }

    pub fn add(&self, other: &TruncatedSeries) -> MSeriesResult<TruncatedSeries> {
        self.check_compatible(other)?;
        let trunc = self.trunc_order.min(other.trunc_order);
        let mut tail = self.tail.min_with(other.tail);
        let mut coeffs = BTreeMap::new();
        for (exps, c) in self.coeffs.iter().chain(other.coeffs.iter()) {
            if total_degree(exps) >= trunc {
                // A term one side kept but the joint order cannot: absorb it.
                let credit = if self.scaling == Scaling::Local {
                    total_degree(exps) as i64
                } else {
                    0
                };
                tail = tail.min_with(TailBound::AtLeast(c.valuation_lower_bound() + credit));
                continue;
            }
            match coeffs.entry(exps.clone()) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(c.clone());
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let s = e.get().add(c)?;
                    e.insert(s);
                }
            }
        }
        Ok(TruncatedSeries {
            p: self.p,
            num_vars: self.num_vars,
            trunc_order: trunc,
            scaling: self.scaling,
            tail,
            cap: self.cap.min(other.cap),
            coeffs,
        })
    }

    pub fn neg(&self) -> TruncatedSeries {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = c.neg();
        }
        out
    }

    /// Adds a constant to the series.
    pub fn add_constant(&self, c: &PadicNumber) -> MSeriesResult<TruncatedSeries> {
        let mut out = self.clone();
        let key = vec![0u32; self.num_vars];
        let current = out.constant_term();
        let sum = current.add(c)?;
        out.coeffs.insert(key, sum);
        Ok(out)
    }

    pub fn sub(&self, other: &TruncatedSeries) -> MSeriesResult<TruncatedSeries> {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &PadicNumber) -> MSeriesResult<TruncatedSeries> {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = c.mul(s)?;
        }
        out.tail = out.tail.shift(s.valuation_lower_bound());
        Ok(out)
    }

    /// Multiplies by the exact power p^e (valuation shift, no precision loss).
    pub fn shift_val(&self, e: i64) -> TruncatedSeries {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = c.shift_val(e);
        }
        out.tail = out.tail.shift(e);
        out
    }

    pub fn mul(&self, other: &TruncatedSeries) -> MSeriesResult<TruncatedSeries> {
        self.check_compatible(other)?;
        let both_exact = self.tail == TailBound::Exact && other.tail == TailBound::Exact;
        let trunc = if both_exact {
            self.trunc_order + other.trunc_order - 1
        } else {
            self.trunc_order.min(other.trunc_order)
        };
        let credit = |exps: &[u32]| -> i64 {
            if self.scaling == Scaling::Local {
                total_degree(exps) as i64
            } else {
                0
            }
        };
        let mut coeffs: BTreeMap<Vec<u32>, PadicNumber> = BTreeMap::new();
        let mut dropped: Option<i64> = None;
        for (ea, ca) in &self.coeffs {
            for (eb, cb) in &other.coeffs {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                if total_degree(&exps) >= trunc {
                    let contribution =
                        ca.valuation_lower_bound() + cb.valuation_lower_bound() + credit(ea) + credit(eb);
                    dropped = min_opt(dropped, Some(contribution));
                    continue;
                }
                let prod = ca.mul(cb)?;
                match coeffs.entry(exps) {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(prod);
                    }
                    std::collections::btree_map::Entry::Occupied(mut e) => {
                        let s = e.get().add(&prod)?;
                        e.insert(s);
                    }
                }
            }
        }
        // Tail interactions: tail_a * values(b), tail_b * values(a).
        let mut tail = match dropped {
            None => TailBound::Exact,
            Some(d) => TailBound::AtLeast(d),
        };
        if let TailBound::AtLeast(ba) = self.tail {
            let fb = other.value_floor().unwrap_or(0);
            tail = tail.min_with(TailBound::AtLeast(ba + fb));
        }
        if let TailBound::AtLeast(bb) = other.tail {
            let fa = self.value_floor().unwrap_or(0);
            tail = tail.min_with(TailBound::AtLeast(bb + fa));
        }
        Ok(TruncatedSeries {
            p: self.p,
            num_vars: self.num_vars,
            trunc_order: trunc,
            scaling: self.scaling,
            tail,
            cap: self.cap.min(other.cap),
            coeffs,
        })
    }

    /// Formal partial derivative by variable `var`, truncated one order lower.
    pub fn derivative(&self, var: usize) -> MSeriesResult<TruncatedSeries> {
        assert!(var < self.num_vars);
        let ctx = self.ctx();
        let mut coeffs = BTreeMap::new();
        for (exps, c) in &self.coeffs {
            let e = exps[var];
            if e == 0 {
                continue;
            }
            let mut ne = exps.clone();
            ne[var] = e - 1;
            let d = c.mul(&ctx.from_integer(e as i64))?;
            coeffs.insert(ne, d);
        }
        let tail = match self.scaling {
            Scaling::Unit => self.tail,
            Scaling::Local => self.tail.shift(-1),
        };
        Ok(TruncatedSeries {
            p: self.p,
            num_vars: self.num_vars,
            trunc_order: self.trunc_order.saturating_sub(1).max(1),
            scaling: self.scaling,
            tail,
            cap: self.cap,
            coeffs,
        })
    }

    /// Applies t_i -> p * t_i to every term.
    pub fn rescale_variables(&self) -> TruncatedSeries {
        let mut out = self.clone();
        out.coeffs = self
            .coeffs
            .iter()
            .map(|(exps, c)| (exps.clone(), c.shift_val(total_degree(exps) as i64)))
            .collect();
        out.scaling = Scaling::Unit;
        out
    }

    /// Swaps the two variables of a bivariate series.
    pub fn swap_vars(&self) -> TruncatedSeries {
        assert_eq!(self.num_vars, 2, "swap_vars requires two variables");
        let mut out = self.clone();
        out.coeffs = self
            .coeffs
            .iter()
            .map(|(e, c)| (vec![e[1], e[0]], c.clone()))
            .collect();
        out
    }

    /// Substitutes t_1 = t, t_2 = sign * t, producing a univariate series.
    pub fn restrict_to_line(&self, sign: i64) -> MSeriesResult<TruncatedSeries> {
        assert_eq!(self.num_vars, 2, "line restriction requires two variables");
        assert!(sign == 1 || sign == -1);
        let mut out = TruncatedSeries {
            p: self.p,
            num_vars: 1,
            trunc_order: self.trunc_order,
            scaling: self.scaling,
            tail: self.tail,
            cap: self.cap,
            coeffs: BTreeMap::new(),
        };
        for (exps, c) in &self.coeffs {
            let d = vec![exps[0] + exps[1]];
            let coeff = if sign == -1 && exps[1] % 2 == 1 {
                c.neg()
            } else {
                c.clone()
            };
            match out.coeffs.entry(d) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(coeff);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let s = e.get().add(&coeff)?;
                    e.insert(s);
                }
            }
        }
        Ok(out)
    }

    /// Rewrites an even univariate series g(t) = G(t^2) as G(u).
    pub fn halve_even_exponents(&self) -> MSeriesResult<TruncatedSeries> {
        assert_eq!(self.num_vars, 1);
        let mut coeffs = BTreeMap::new();
        for (exps, c) in &self.coeffs {
            if exps[0] % 2 == 1 {
                if !c.is_zero() {
                    return Err(MSeriesError::NotSymmetric(
                        "odd-exponent coefficient in an even series".into(),
                    ));
                }
                continue;
            }
            coeffs.insert(vec![exps[0] / 2], c.clone());
        }
        Ok(TruncatedSeries {
            p: self.p,
            num_vars: 1,
            trunc_order: self.trunc_order / 2 + 1,
            scaling: self.scaling,
            tail: self.tail,
            cap: self.cap,
            coeffs,
        })
    }

    /// Lifts a univariate series into two variables as a series in variable `var`.
    pub fn embed_in_pair(&self, var: usize) -> TruncatedSeries {
        assert_eq!(self.num_vars, 1);
        assert!(var < 2);
        let coeffs = self
            .coeffs
            .iter()
            .map(|(e, c)| {
                let mut exps = vec![0u32; 2];
                exps[var] = e[0];
                (exps, c.clone())
            })
            .collect();
        TruncatedSeries {
            p: self.p,
            num_vars: 2,
            trunc_order: self.trunc_order,
            scaling: self.scaling,
            tail: self.tail,
            cap: self.cap,
            coeffs,
        }
    }

    /// Drops certified-zero coefficients, folding their certification into
    /// the tail bound so evaluation certificates stay honest.
    fn prune_zeros(&mut self) {
        let scaling = self.scaling;
        let mut extra: Option<i64> = None;
        self.coeffs.retain(|exps, c| {
            if c.is_zero() {
                let credit = if scaling == Scaling::Local {
                    total_degree(exps) as i64
                } else {
                    0
                };
                extra = min_opt(extra, Some(c.abs_prec() + credit));
                false
            } else {
                true
            }
        });
        if let Some(e) = extra {
            self.tail = self.tail.min_with(TailBound::AtLeast(e));
        }
    }
}

/// Factoring modes for the automorphism symmetries of residue-disk systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryMode {
    /// s(t1,t2) - s(0,0) = (t1^2 - t2^2) * quotient, for series of the shape
    /// sum c_i (t1^{2i} - t2^{2i}).
    EvenPair,
    /// s = (t1 - t2) * quotient, for series vanishing identically on t1 = t2.
    AntiDiagonal,
}

#[derive(Debug, Clone)]
pub struct FactoredSeries {
    pub mode: SymmetryMode,
    /// The constant s(0,0) that was subtracted (zero for AntiDiagonal).
    pub constant: PadicNumber,
    pub quotient: TruncatedSeries,
}

/// Factors a bivariate series through its automorphism symmetry.
///
/// The factorization is exact on stored coefficients; the precondition is
/// checked coefficientwise and any violating stored coefficient is an error.
pub fn symmetric_factor(
    s: &TruncatedSeries,
    mode: SymmetryMode,
) -> MSeriesResult<FactoredSeries> {
    assert_eq!(s.num_vars, 2, "symmetric factoring requires two variables");
    match mode {
        SymmetryMode::EvenPair => {
            let constant = s.constant_term();
            let mut pair_coeffs: BTreeMap<u32, (Option<PadicNumber>, Option<PadicNumber>)> =
                BTreeMap::new();
            for (exps, c) in &s.coeffs {
                if total_degree(exps) == 0 {
                    continue;
                }
                if c.is_zero() {
                    continue;
                }
                let (a, b) = (exps[0], exps[1]);
                if a % 2 == 1 || b % 2 == 1 || (a > 0 && b > 0) {
                    return Err(MSeriesError::NotSymmetric(format!(
                        "term t1^{a} t2^{b} is not of the shape t1^2i or t2^2i"
                    )));
                }
                let entry = pair_coeffs.entry(a.max(b) / 2).or_insert((None, None));
                if a > 0 {
                    entry.0 = Some(c.clone());
                } else {
                    entry.1 = Some(c.clone());
                }
            }
            let ctx = s.ctx();
            let mut quotient_terms: Vec<(Vec<u32>, PadicNumber)> = Vec::new();
            for (i, (c1, c2)) in &pair_coeffs {
                let c1 = c1.clone().ok_or_else(|| {
                    MSeriesError::NotSymmetric(format!("t2^{} has no matching t1 term", 2 * i))
                })?;
                let c2 = c2.clone().ok_or_else(|| {
                    MSeriesError::NotSymmetric(format!("t1^{} has no matching t2 term", 2 * i))
                })?;
                if c1.add(&c2).map(|x| !x.is_zero()).unwrap_or(true) {
                    return Err(MSeriesError::NotSymmetric(format!(
                        "coefficients of t1^{0} and t2^{0} do not negate each other",
                        2 * i
                    )));
                }
                // c_i (t1^{2i} - t2^{2i}) = (t1^2 - t2^2) c_i sum_j t1^{2j} t2^{2i-2-2j}
                for j in 0..*i {
                    quotient_terms.push((vec![2 * j, 2 * (i - 1 - j)], c1.clone()));
                }
            }
            let _ = ctx;
            let tail = match s.scaling {
                Scaling::Local => s.tail.shift(-2),
                Scaling::Unit => s.tail,
            };
            let quotient = TruncatedSeries::new(
                s.p,
                2,
                s.trunc_order.saturating_sub(2).max(1),
                s.scaling,
                tail,
                quotient_terms,
            )?;
            Ok(FactoredSeries {
                mode,
                constant,
                quotient,
            })
        }
        SymmetryMode::AntiDiagonal => {
            // Check s(t,t) = 0 identically on stored coefficients.
            let diag = s.restrict_to_line(1)?;
            for (exps, c) in diag.terms() {
                if !c.is_zero() {
                    return Err(MSeriesError::NotSymmetric(format!(
                        "diagonal restriction has nonzero coefficient at degree {}",
                        exps[0]
                    )));
                }
            }
            // Synthetic division by (t1 - t2): q_{a-1,b} = s_{a,b} + q_{a,b-1}.
            let ctx = s.ctx();
            let zero = ctx.zero();
            let mut q: BTreeMap<Vec<u32>, PadicNumber> = BTreeMap::new();
            let degrees: Vec<u32> = {
                let mut d: Vec<u32> = s.coeffs.keys().map(|e| total_degree(e)).collect();
                d.sort_unstable();
                d.dedup();
                d
            };
            for d in degrees {
                if d == 0 {
                    continue;
                }
                let coeff_s = |a: u32, b: u32| -> PadicNumber {
                    s.coeffs.get(&vec![a, b]).cloned().unwrap_or_else(|| zero.clone())
                };
                let mut prev: Option<PadicNumber> = None; // q_{a, b-1} as b walks up
                for b in 0..d {
                    let a = d - b;
                    let mut val = coeff_s(a, b);
                    if let Some(pv) = &prev {
                        val = val.add(pv)?;
                    }
                    if !val.is_zero() {
                        q.insert(vec![a - 1, b], val.clone());
                    }
                    prev = Some(val);
                }
            }
            let tail = match s.scaling {
                Scaling::Local => s.tail.shift(-1),
                Scaling::Unit => s.tail,
            };
            let quotient = TruncatedSeries {
                p: s.p,
                num_vars: 2,
                trunc_order: s.trunc_order.saturating_sub(1).max(1),
                scaling: s.scaling,
                tail,
                cap: s.cap,
                coeffs: q,
            };
            Ok(FactoredSeries {
                mode,
                constant: ctx.zero(),
                quotient,
            })
        }
    }
}

/// A system of m series in m variables (the left-hand sides of one
/// residue-disk root-finding problem).
#[derive(Debug, Clone)]
pub struct SeriesSystem {
    components: Vec<TruncatedSeries>,
    p: u64,
    normalized: bool,
}

impl SeriesSystem {
    pub fn new(components: Vec<TruncatedSeries>) -> MSeriesResult<Self> {
        assert!(!components.is_empty(), "empty system");
        let p = components[0].p();
        let nv = components[0].num_vars();
        for c in &components {
            if c.p() != p || c.num_vars() != nv {
                return Err(MSeriesError::IncompatibleSeries);
            }
        }
        let normalized = components.iter().all(|c| c.scaling() == Scaling::Unit)
            && components.iter().all(|c| {
                c.terms()
                    .filter(|(_, x)| !x.is_zero())
                    .map(|(_, x)| x.valuation().unwrap())
                    .min()
                    == Some(0)
            });
        Ok(SeriesSystem {
            components,
            p,
            normalized,
        })
    }

    /// Polynomial system with exact integer coefficients (already in the
    /// unit-scaling regime, i.e. to be solved over Z_p^m directly).
    pub fn from_int_polys(
        ctx: &PadicContext,
        num_vars: usize,
        comps: &[Vec<(Vec<u32>, i64)>],
    ) -> MSeriesResult<Self> {
        let components = comps
            .iter()
            .map(|terms| TruncatedSeries::from_int_terms(ctx, num_vars, terms))
            .collect::<MSeriesResult<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn num_vars(&self) -> usize {
        self.components[0].num_vars()
    }

    pub fn components(&self) -> &[TruncatedSeries] {
        &self.components
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Joint tail bound of the components (min over per-component orders).
    pub fn tail_bound(&self) -> TailBound {
        self.components
            .iter()
            .fold(TailBound::Exact, |acc, c| acc.min_with(c.tail_bound()))
    }

    pub fn evaluate(&self, point: &[PadicNumber]) -> MSeriesResult<Vec<PadicNumber>> {
        self.components.iter().map(|c| c.evaluate(point)).collect()
    }

    /// Substitutes t -> p t in every component and divides each component by
    /// p^(its minimal coefficient valuation). Returns the normalized system
    /// together with the per-component division exponents.
    pub fn rescale_and_normalize(&self) -> MSeriesResult<(SeriesSystem, Vec<i64>)> {
        let mut out = Vec::with_capacity(self.components.len());
        let mut exponents = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let mut rescaled = match c.scaling() {
                Scaling::Local => c.rescale_variables(),
                Scaling::Unit => c.clone(),
            };
            rescaled.prune_zeros();
            let min_val = rescaled
                .coeffs
                .values()
                .map(|x| x.valuation().expect("pruned"))
                .min()
                .ok_or(MSeriesError::AllCoefficientsZero)?;
            let normalized = rescaled.shift_val(-min_val);
            exponents.push(min_val);
            out.push(normalized);
        }
        let sys = SeriesSystem::new(out)?;
        debug_assert!(sys.normalized);
        Ok((sys, exponents))
    }

    /// The matrix of formal partial derivatives, truncated one order lower.
    pub fn jacobian(&self) -> MSeriesResult<Vec<Vec<TruncatedSeries>>> {
        let nv = self.num_vars();
        self.components
            .iter()
            .map(|c| (0..nv).map(|j| c.derivative(j)).collect())
            .collect()
    }
}

/// Integer reduction of a normalized system mod p^k, for fast enumeration.
#[derive(Debug, Clone)]
pub struct IntSystem {
    pub p: u64,
    pub k: u32,
    pub modulus: u64,
    pub num_vars: usize,
    comps: Vec<Vec<(Vec<u32>, u64)>>,
}

impl IntSystem {
    pub fn from_series(sys: &SeriesSystem, k: u32) -> MSeriesResult<IntSystem> {
        let p = sys.p();
        let modulus = p
            .checked_pow(k)
            .expect("p^k must fit in u64 for integer enumeration");
        let mut comps = Vec::with_capacity(sys.components().len());
        for c in sys.components() {
            if c.scaling() != Scaling::Unit {
                return Err(MSeriesError::MixedScaling);
            }
            if let TailBound::AtLeast(b) = c.tail_bound() {
                if b < k as i64 {
                    return Err(MSeriesError::UncertifiedTail);
                }
            }
            let mut terms = Vec::new();
            for (exps, coeff) in c.terms() {
                if coeff.abs_prec() < k as i64 {
                    return Err(MSeriesError::InsufficientCoefficientPrecision {
                        requested: k as i64,
                        available: coeff.abs_prec(),
                    });
                }
                let r = coeff
                    .residue_mod(k)
                    .map_err(MSeriesError::Padic)?;
                let r = num_traits::ToPrimitive::to_u64(&r).expect("residue fits u64");
                if r != 0 {
                    terms.push((exps.clone(), r));
                }
            }
            comps.push(terms);
        }
        Ok(IntSystem {
            p,
            k,
            modulus,
            num_vars: sys.num_vars(),
            comps,
        })
    }

    pub fn num_components(&self) -> usize {
        self.comps.len()
    }

    /// Evaluates component `i` at the point, mod p^k.
    pub fn eval_component(&self, i: usize, point: &[u64]) -> u64 {
        let m = self.modulus as u128;
        let mut acc: u128 = 0;
        for (exps, c) in &self.comps[i] {
            let mut term = *c as u128;
            for (j, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    term = term * (point[j] as u128) % m;
                }
            }
            acc = (acc + term) % m;
        }
        acc as u64
    }

    pub fn is_root(&self, point: &[u64]) -> bool {
        (0..self.comps.len()).all(|i| self.eval_component(i, point) == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PadicContext;
    use num_rational::BigRational;

    fn ctx(p: u64, n: u32) -> PadicContext {
        PadicContext::new(p, n).unwrap()
    }

    fn poly(c: &PadicContext, nv: usize, terms: &[(Vec<u32>, i64)]) -> TruncatedSeries {
        TruncatedSeries::from_int_terms(c, nv, terms).unwrap()
    }

    #[test]
    fn evaluate_trivial_cases() {
        let c = ctx(5, 8);
        // t1^2 - t2 at (0,0) is 0.
        let s = poly(&c, 2, &[(vec![2, 0], 1), (vec![0, 1], -1)]);
        let v = s.evaluate(&[c.zero(), c.zero()]).unwrap();
        assert!(v.is_zero());
        // 1 + t1 t2 at (5,5) is 26.
        let s = poly(&c, 2, &[(vec![0, 0], 1), (vec![1, 1], 1)]);
        let v = s
            .evaluate(&[c.from_integer(5), c.from_integer(5)])
            .unwrap();
        assert_eq!(v, c.from_integer(26));
    }

    #[test]
    fn evaluate_matches_rational_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = 7u64;
        let c = ctx(p, 9);
        for _ in 0..25 {
            // Dense-ish random local series of degree < 5 with tail bound.
            let mut terms = Vec::new();
            let mut rats = Vec::new();
            for a in 0..5u32 {
                for b in 0..(5 - a) {
                    let coef: i64 = rng.gen_range(-200..200);
                    if coef != 0 {
                        terms.push((vec![a, b], c.from_integer(coef)));
                        rats.push((a, b, coef));
                    }
                }
            }
            let tail = 5i64; // omitted degree-5 terms at v>=1 points
            let s = TruncatedSeries::new(
                p,
                2,
                5,
                Scaling::Local,
                TailBound::AtLeast(tail),
                terms,
            )
            .unwrap();
            let x: i64 = rng.gen_range(-40..40) * p as i64;
            let y: i64 = rng.gen_range(-40..40) * p as i64;
            let got = s
                .evaluate(&[c.from_integer(x), c.from_integer(y)])
                .unwrap();
            let mut exact = BigRational::from_integer(0.into());
            for (a, b, coef) in rats {
                let term = BigRational::from_integer(coef.into())
                    * BigRational::from_integer(num_bigint::BigInt::from(x).pow(a))
                    * BigRational::from_integer(num_bigint::BigInt::from(y).pow(b));
                exact += term;
            }
            let want = c.from_rational(&exact).truncate_abs(tail).unwrap();
            assert_eq!(got.truncate_abs(tail).unwrap(), want);
        }
    }

    #[test]
    fn tail_injection_cannot_change_certified_digits() {
        let c = ctx(5, 10);
        let base = TruncatedSeries::new(
            5,
            2,
            3,
            Scaling::Local,
            TailBound::AtLeast(3),
            vec![
                (vec![0, 0], c.from_integer(2)),
                (vec![1, 1], c.from_integer(3)),
            ],
        )
        .unwrap();
        // Adversarial variant: same series but a degree-3 term the original
        // absorbed into its tail; allowed because val + deg >= 3.
        let adversarial = TruncatedSeries::new(
            5,
            2,
            5,
            Scaling::Local,
            TailBound::AtLeast(3),
            vec![
                (vec![0, 0], c.from_integer(2)),
                (vec![1, 1], c.from_integer(3)),
                (vec![3, 0], c.from_integer(1)), // valuation 0 + degree 3 = 3
            ],
        )
        .unwrap();
        let pt = [c.from_integer(5), c.from_integer(10)];
        let a = base.evaluate(&pt).unwrap();
        let b = adversarial.evaluate(&pt).unwrap();
        assert_eq!(a, b, "certified digits must agree below the tail bound");
    }

    #[test]
    fn jacobian_of_polynomials() {
        let c = ctx(5, 8);
        // f = (x^2 - y, x + y) -> [[2x, -1], [1, 1]]
        let sys = SeriesSystem::from_int_polys(
            &c,
            2,
            &[
                vec![(vec![2, 0], 1), (vec![0, 1], -1)],
                vec![(vec![1, 0], 1), (vec![0, 1], 1)],
            ],
        )
        .unwrap();
        let j = sys.jacobian().unwrap();
        assert_eq!(
            j[0][0].coefficient(&[1, 0]).unwrap(),
            &c.from_integer(2)
        );
        assert_eq!(
            j[0][1].coefficient(&[0, 0]).unwrap(),
            &c.from_integer(-1)
        );
        assert_eq!(j[1][0].coefficient(&[0, 0]).unwrap(), &c.one());
        assert_eq!(j[1][1].coefficient(&[0, 0]).unwrap(), &c.one());
        // Constant system -> zero matrix.
        let sys = SeriesSystem::from_int_polys(&c, 2, &[vec![(vec![0, 0], 3)], vec![(vec![0, 0], 1)]])
            .unwrap();
        let j = sys.jacobian().unwrap();
        for row in &j {
            for e in row {
                assert!(e.is_coefficientwise_zero() || e.terms().count() == 0);
            }
        }
    }

    #[test]
    fn jacobian_matches_symbolic_oracle_on_random_systems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let c = ctx(5, 8);
        for _ in 0..20 {
            let mut terms = Vec::new();
            for a in 0..=4u32 {
                for b in 0..=(4 - a) {
                    let coef: i64 = rng.gen_range(-50..50);
                    if coef != 0 {
                        terms.push((vec![a, b], coef));
                    }
                }
            }
            if terms.is_empty() {
                continue;
            }
            let s = poly(&c, 2, &terms);
            let dx = s.derivative(0).unwrap();
            let dy = s.derivative(1).unwrap();
            for (exps, coef) in &terms {
                // d/dx: coefficient of (a-1, b) must be a * coef
                if exps[0] > 0 {
                    let got = dx.coefficient(&[exps[0] - 1, exps[1]]).unwrap();
                    assert_eq!(got, &c.from_integer(coef * exps[0] as i64));
                }
                if exps[1] > 0 {
                    let got = dy.coefficient(&[exps[0], exps[1] - 1]).unwrap();
                    assert_eq!(got, &c.from_integer(coef * exps[1] as i64));
                }
            }
        }
    }

    #[test]
    fn rescale_and_normalize_examples() {
        let c = ctx(3, 8);
        // rho = t1: after t -> 3t and division by 3, back to t1 with exponent 1.
        let s = TruncatedSeries::new(
            3,
            1,
            2,
            Scaling::Local,
            TailBound::Exact,
            vec![(vec![1], c.one())],
        )
        .unwrap();
        let sys = SeriesSystem::new(vec![s]).unwrap();
        let (norm, exps) = sys.rescale_and_normalize().unwrap();
        assert_eq!(exps, vec![1]);
        assert_eq!(
            norm.components()[0].coefficient(&[1]).unwrap(),
            &c.one()
        );
        // rho = 3 + t1^2 -> 3 + 9 t1^2 -> 1 + 3 t1^2.
        let s = TruncatedSeries::new(
            3,
            1,
            3,
            Scaling::Local,
            TailBound::Exact,
            vec![(vec![0], c.from_integer(3)), (vec![2], c.one())],
        )
        .unwrap();
        let sys = SeriesSystem::new(vec![s]).unwrap();
        let (norm, exps) = sys.rescale_and_normalize().unwrap();
        assert_eq!(exps, vec![1]);
        assert_eq!(norm.components()[0].coefficient(&[0]).unwrap(), &c.one());
        assert_eq!(
            norm.components()[0].coefficient(&[2]).unwrap(),
            &c.from_integer(3)
        );
        assert!(norm.is_normalized());
    }

    #[test]
    fn rescale_normalize_random_min_valuation_zero() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let c = ctx(5, 10);
        for _ in 0..30 {
            let mut terms = Vec::new();
            for a in 0..4u32 {
                for b in 0..(4 - a) {
                    let coef: i64 = rng.gen_range(-100..100) * 5;
                    if coef != 0 {
                        terms.push((vec![a, b], c.from_integer(coef)));
                    }
                }
            }
            if terms.is_empty() {
                continue;
            }
            let s = TruncatedSeries::new(5, 2, 4, Scaling::Local, TailBound::AtLeast(4), terms)
                .unwrap();
            let sys = SeriesSystem::new(vec![s]).unwrap();
            let (norm, _) = sys.rescale_and_normalize().unwrap();
            let min_val = norm.components()[0]
                .terms()
                .filter(|(_, x)| !x.is_zero())
                .map(|(_, x)| x.valuation().unwrap())
                .min()
                .unwrap();
            assert_eq!(min_val, 0);
        }
    }

    #[test]
    fn rescale_commutes_with_evaluation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let c = ctx(5, 10);
        for _ in 0..20 {
            let mut terms = Vec::new();
            for a in 0..4u32 {
                for b in 0..(4 - a) {
                    let coef: i64 = rng.gen_range(-100..100);
                    if coef != 0 {
                        terms.push((vec![a, b], c.from_integer(coef)));
                    }
                }
            }
            if terms.is_empty() {
                continue;
            }
            let s =
                TruncatedSeries::new(5, 2, 4, Scaling::Local, TailBound::AtLeast(4), terms).unwrap();
            let sys = SeriesSystem::new(vec![s.clone()]).unwrap();
            let (norm, exps) = sys.rescale_and_normalize().unwrap();
            let t: Vec<PadicNumber> = (0..2).map(|_| c.from_integer(rng.gen_range(0..25))).collect();
            let pt_scaled: Vec<PadicNumber> = t.iter().map(|x| x.shift_val(1)).collect();
            let raw = s.evaluate(&pt_scaled).unwrap();
            let cooked = norm.components()[0]
                .evaluate(&t)
                .unwrap()
                .shift_val(exps[0]);
            assert_eq!(raw, cooked);
        }
    }

    #[test]
    fn even_pair_factoring() {
        let c = ctx(5, 8);
        // s = t1^2 - t2^2 -> quotient 1.
        let s = poly(&c, 2, &[(vec![2, 0], 1), (vec![0, 2], -1)]);
        let f = symmetric_factor(&s, SymmetryMode::EvenPair).unwrap();
        assert_eq!(f.quotient.coefficient(&[0, 0]).unwrap(), &c.one());
        assert!(f.constant.is_zero());
        // Round trip with random coefficients c_i, i <= 3.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let mut terms = Vec::new();
            for i in 1..=3u32 {
                let coef: i64 = rng.gen_range(-50..50);
                if coef == 0 {
                    continue;
                }
                terms.push((vec![2 * i, 0], coef));
                terms.push((vec![0, 2 * i], -coef));
            }
            if terms.is_empty() {
                continue;
            }
            let s = poly(&c, 2, &terms);
            let f = symmetric_factor(&s, SymmetryMode::EvenPair).unwrap();
            let factor = poly(&c, 2, &[(vec![2, 0], 1), (vec![0, 2], -1)]);
            let back = factor.mul(&f.quotient).unwrap();
            for (exps, coef) in s.terms() {
                let got = back.coefficient(exps).cloned().unwrap_or_else(|| c.zero());
                assert_eq!(&got, coef, "mismatch at {exps:?}");
            }
        }
    }

    #[test]
    fn anti_diagonal_factoring() {
        let c = ctx(5, 8);
        // t1^3 - t2^3 = (t1 - t2)(t1^2 + t1 t2 + t2^2)
        let s = poly(&c, 2, &[(vec![3, 0], 1), (vec![0, 3], -1)]);
        let f = symmetric_factor(&s, SymmetryMode::AntiDiagonal).unwrap();
        assert_eq!(f.quotient.coefficient(&[2, 0]).unwrap(), &c.one());
        assert_eq!(f.quotient.coefficient(&[1, 1]).unwrap(), &c.one());
        assert_eq!(f.quotient.coefficient(&[0, 2]).unwrap(), &c.one());
        // Non-symmetric input is rejected.
        let bad = poly(&c, 2, &[(vec![1, 0], 1)]);
        assert!(matches!(
            symmetric_factor(&bad, SymmetryMode::AntiDiagonal),
            Err(MSeriesError::NotSymmetric(_))
        ));
    }

    #[test]
    fn even_pair_rejects_asymmetric_input() {
        let c = ctx(5, 8);
        let bad = poly(&c, 2, &[(vec![2, 0], 1), (vec![0, 2], -2)]);
        assert!(matches!(
            symmetric_factor(&bad, SymmetryMode::EvenPair),
            Err(MSeriesError::NotSymmetric(_))
        ));
        let bad = poly(&c, 2, &[(vec![2, 2], 1)]);
        assert!(matches!(
            symmetric_factor(&bad, SymmetryMode::EvenPair),
            Err(MSeriesError::NotSymmetric(_))
        ));
    }

    #[test]
    fn jacobian_commutes_with_rescale_up_to_chain_rule() {
        let c = ctx(5, 10);
        let s = TruncatedSeries::new(
            5,
            2,
            4,
            Scaling::Local,
            TailBound::Exact,
            vec![
                (vec![1, 0], c.from_integer(2)),
                (vec![2, 1], c.from_integer(3)),
            ],
        )
        .unwrap();
        // d/dt of s(pt) = p * (ds)(pt)
        let lhs = s.rescale_variables().derivative(0).unwrap();
        let rhs = s.derivative(0).unwrap().rescale_variables().shift_val(1);
        let probe = [c.from_integer(2), c.from_integer(3)];
        assert_eq!(
            lhs.evaluate(&probe).unwrap(),
            rhs.evaluate(&probe).unwrap()
        );
    }

    #[test]
    fn tail_bound_consistency_checked_on_ingestion() {
        let c = ctx(5, 6);
        // Constant certified to 6 digits cannot back a tail bound of 8.
        let r = TruncatedSeries::new(
            5,
            1,
            2,
            Scaling::Local,
            TailBound::AtLeast(8),
            vec![(vec![0], c.one())],
        );
        assert!(matches!(
            r,
            Err(MSeriesError::InconsistentTailBound { .. })
        ));
    }
}
