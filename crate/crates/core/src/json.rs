//! JSON wire formats for the toolkit's inputs and outputs.
//!
//! Scalars are accepted either as exact rational strings ("-5/4", "35") or
//! as explicit digit-list p-adic objects; everything is parsed into a
//! supplied [`PadicContext`] so precision policy stays in one place.

use crate::hensel::{NewtonStep, RootReport, RootStatus, SearchConfig};
use crate::icc::{PrimeIdealData, QuadElement, QuadraticFieldData, SplittingTag};
use crate::mseries::{Scaling, SeriesSystem, TailBound, TruncatedSeries};
use crate::padic::{PadicContext, PadicNumber};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;

pub type JsonResult<T> = Result<T, JsonError>;

#[derive(Debug, thiserror::Error)]
pub enum JsonError {
    #[error("malformed rational literal {0:?}")]
    BadRational(String),
    #[error("digit {digit} out of range for p = {p}")]
    BadDigit { digit: u64, p: u64 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Padic(#[from] crate::padic::PadicError),
    #[error(transparent)]
    Series(#[from] crate::mseries::MSeriesError),
    #[error(transparent)]
    Icc(#[from] crate::icc::IccError),
}

pub fn parse_rational(s: &str) -> JsonResult<BigRational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        None => (s, "1"),
        Some((a, b)) => (a.trim(), b.trim()),
    };
    let n = BigInt::from_str(num).map_err(|_| JsonError::BadRational(s.to_string()))?;
    let d = BigInt::from_str(den).map_err(|_| JsonError::BadRational(s.to_string()))?;
    if d == BigInt::from(0) {
        return Err(JsonError::BadRational(s.to_string()));
    }
    Ok(BigRational::new(n, d))
}

/// Digit-list serialization of a p-adic number:
/// `{"p": 5, "v": 1, "digits": [d0, d1, ...], "certified": N_g}`,
/// with `v` null and empty digits for a certified zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PadicNumberJson {
    pub p: u64,
    pub v: Option<i64>,
    pub digits: Vec<u64>,
    pub certified: i64,
}

impl PadicNumberJson {
    pub fn from_number(x: &PadicNumber) -> Self {
        PadicNumberJson {
            p: x.p(),
            v: x.valuation(),
            digits: x.digits(),
            certified: match x.valuation() {
                Some(_) => x.rel_prec() as i64,
                None => x.abs_prec(),
            },
        }
    }

    pub fn to_number(&self, ctx: &PadicContext) -> JsonResult<PadicNumber> {
        if self.p != ctx.p() {
            return Err(JsonError::Invalid(format!(
                "element prime {} does not match context prime {}",
                self.p,
                ctx.p()
            )));
        }
        match self.v {
            None => Ok(ctx.zero_mod(self.certified.min(ctx.working_precision() as i64))?),
            Some(v) => {
                let mut unit = num_bigint::BigUint::from(0u32);
                let pb = num_bigint::BigUint::from(self.p);
                for &d in self.digits.iter().rev() {
                    if d >= self.p {
                        return Err(JsonError::BadDigit { digit: d, p: self.p });
                    }
                    unit = unit * &pb + num_bigint::BigUint::from(d);
                }
                let rel = (self.certified.max(1) as u32)
                    .min(self.digits.len().max(1) as u32)
                    .min(ctx.working_precision());
                Ok(ctx.from_unit_digits(v, unit, rel)?)
            }
        }
    }
}

/// A scalar in fixture files: an exact rational string or a digit-list object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarJson {
    Rational(String),
    Padic(PadicNumberJson),
}

impl ScalarJson {
    pub fn to_number(&self, ctx: &PadicContext) -> JsonResult<PadicNumber> {
        match self {
            ScalarJson::Rational(s) => Ok(ctx.from_rational(&parse_rational(s)?)),
            ScalarJson::Padic(p) => p.to_number(ctx),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesTermJson {
    pub exps: Vec<u32>,
    pub coeff: ScalarJson,
}

/// `{"p", "num_vars", "trunc_order", "tail_val_bound", "scaling", "terms"}`;
/// a null tail bound marks an exact polynomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesJson {
    pub p: u64,
    pub num_vars: usize,
    pub trunc_order: u32,
    pub tail_val_bound: Option<i64>,
    #[serde(default = "default_scaling")]
    pub scaling: Scaling,
    pub terms: Vec<SeriesTermJson>,
}

fn default_scaling() -> Scaling {
    Scaling::Local
}

impl SeriesJson {
    pub fn to_series(&self, ctx: &PadicContext) -> JsonResult<TruncatedSeries> {
        let tail = match self.tail_val_bound {
            None => TailBound::Exact,
            Some(b) => TailBound::AtLeast(b),
        };
        let terms = self
            .terms
            .iter()
            .map(|t| Ok((t.exps.clone(), t.coeff.to_number(ctx)?)))
            .collect::<JsonResult<Vec<_>>>()?;
        Ok(TruncatedSeries::new(
            self.p,
            self.num_vars,
            self.trunc_order,
            self.scaling,
            tail,
            terms,
        )?)
    }

    pub fn from_series(s: &TruncatedSeries) -> Self {
        SeriesJson {
            p: s.p(),
            num_vars: s.num_vars(),
            trunc_order: s.trunc_order(),
            tail_val_bound: s.tail_bound().as_option(),
            scaling: s.scaling(),
            terms: s
                .terms()
                .map(|(e, c)| SeriesTermJson {
                    exps: e.clone(),
                    coeff: ScalarJson::Padic(PadicNumberJson::from_number(c)),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesSystemJson {
    pub components: Vec<SeriesJson>,
}

impl SeriesSystemJson {
    pub fn to_system(&self, ctx: &PadicContext) -> JsonResult<SeriesSystem> {
        let comps = self
            .components
            .iter()
            .map(|c| c.to_series(ctx))
            .collect::<JsonResult<Vec<_>>>()?;
        Ok(SeriesSystem::new(comps)?)
    }
}

/// Field fixture: `{"d", "h_K", "fund_unit", "torsion_order", "primes"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldFixtureJson {
    pub d: i64,
    #[serde(rename = "h_K")]
    pub h_k: u32,
    pub fund_unit: Option<[String; 2]>,
    pub torsion_order: u32,
    #[serde(default)]
    pub primes: Vec<PrimeIdealJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimeIdealJson {
    pub label: String,
    pub q: u64,
    pub xi: [String; 2],
    pub tag: SplittingTag,
}

impl FieldFixtureJson {
    pub fn to_field(&self) -> JsonResult<(QuadraticFieldData, Vec<PrimeIdealData>)> {
        let unit = match &self.fund_unit {
            None => None,
            Some([a, b]) => Some(QuadElement::new(parse_rational(a)?, parse_rational(b)?)),
        };
        let field = QuadraticFieldData::new(self.d, self.h_k, unit, self.torsion_order)?;
        let primes = self
            .primes
            .iter()
            .map(|p| {
                let xi = QuadElement::new(parse_rational(&p.xi[0])?, parse_rational(&p.xi[1])?);
                Ok(PrimeIdealData::new(
                    p.label.clone(),
                    p.q,
                    xi,
                    p.tag,
                    &field,
                )?)
            })
            .collect::<JsonResult<Vec<_>>>()?;
        Ok((field, primes))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfigJson {
    pub n: u32,
    #[serde(default)]
    pub r: Option<u32>,
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub max_newton_steps: Option<u32>,
}

impl SearchConfigJson {
    pub fn to_config(&self) -> JsonResult<SearchConfig> {
        let mut cfg = match self.r {
            None => SearchConfig::new(self.n),
            Some(r) => SearchConfig::with_fallback(self.n, r),
        }
        .map_err(|e| JsonError::Invalid(e.to_string()))?;
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        if let Some(m) = self.max_newton_steps {
            cfg.max_newton_steps = m;
        }
        Ok(cfg)
    }
}

/// Input to `hensel solve`: a system plus search parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HenselJobJson {
    pub p: u64,
    pub prec: u32,
    pub system: SeriesSystemJson,
    pub config: SearchConfigJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootReportJson {
    pub status: RootStatus,
    pub approximation: Vec<PadicNumberJson>,
    pub certified_exponent: i64,
    pub uniqueness_radius: Option<i64>,
    pub residue_mod_target: Vec<u64>,
    pub trace: Vec<NewtonStep>,
}

impl RootReportJson {
    pub fn from_report(r: &RootReport, target_depth: u32) -> Self {
        RootReportJson {
            status: r.status,
            approximation: r
                .approximation
                .iter()
                .map(PadicNumberJson::from_number)
                .collect(),
            certified_exponent: r.certified_exponent,
            uniqueness_radius: r.uniqueness_radius,
            residue_mod_target: r.residue_mod(target_depth).unwrap_or_default(),
            trace: r.trace.clone(),
        }
    }
}

/// Input to `qc alphas`: functional values on generators and height tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaJobJson {
    pub p: u64,
    pub prec: u32,
    pub functionals: Vec<Vec<ScalarJson>>,
    /// One symmetric table per character label.
    pub heights: BTreeMap<String, Vec<Vec<ScalarJson>>>,
}

/// Bielliptic per-prime table, all height values expressed as rational
/// multiples of chi_q(pi_q) (computed from the field fixture's xi_q).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiellipticPrimeJson {
    /// Label of the prime in the field fixture.
    pub prime: String,
    pub ord_a0: u32,
    /// Multiples on the ord_q(x) = 0 stratum, per curve.
    pub w_unit: CurvePairJson,
    /// Multiples on the ord_q(x) > 0 stratum, per curve.
    pub w_plus: CurvePairJson,
    /// Multiples for h_q(Q_1), h_q(Q_2).
    pub h_q: CurveScalarPairJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePairJson {
    pub e1: Vec<String>,
    pub e2: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveScalarPairJson {
    pub e1: String,
    pub e2: String,
}

/// Input to `qc tsets`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsetJobJson {
    pub p: u64,
    pub prec: u32,
    #[serde(default)]
    pub guard: Option<u32>,
    /// Inline field fixture, or a path relative to the job file.
    #[serde(default)]
    pub field: Option<FieldFixtureJson>,
    #[serde(default)]
    pub field_file: Option<String>,
    /// Character labels to assemble for: "cyclotomic" / "anticyclotomic".
    pub characters: Vec<String>,
    /// Hyperelliptic tables: per prime, multiples of chi_q(pi_q).
    #[serde(default)]
    pub hyperelliptic_tables: Vec<HyperellipticTableJson>,
    /// Bielliptic tables.
    #[serde(default)]
    pub bielliptic_tables: Vec<BiellipticPrimeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperellipticTableJson {
    pub prime: String,
    pub multiples: Vec<String>,
}

/// One residue pair of a problem bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResiduePairJson {
    pub label: String,
    pub k: usize,
    #[serde(default)]
    pub symmetry: Option<crate::mseries::SymmetryMode>,
    /// Component series, inline or as file references.
    pub components: Vec<SeriesRefJson>,
    /// Per-component target selector.
    pub targets: Vec<TargetSelectorJson>,
    #[serde(default)]
    pub orbit: Vec<String>,
    #[serde(default)]
    pub congruence_filter: Option<CongruenceFilterJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesRefJson {
    File { series_file: String },
    Inline(SeriesJson),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSelectorJson {
    /// "zero" for {0}, "tset" for the assembled T-set of this pair's k and
    /// the bundle's first character, or "tset:LABEL" to pick one.
    Named(String),
    Explicit(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CongruenceFilterJson {
    pub integral: SeriesRefJson,
    pub base_integral: String,
    pub reduction_index: u64,
    pub reduction_order: u32,
}

/// A quadruple of local-height expansions whose quasi-parallelogram
/// residual must vanish for the bundle to be considered consistent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyCheckJson {
    pub label: String,
    pub h_plus: SeriesRefJson,
    pub h_minus: SeriesRefJson,
    pub h_p: SeriesRefJson,
    pub h_r: SeriesRefJson,
    pub chi_term: SeriesRefJson,
}

/// A full problem bundle for `qc run`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleJson {
    pub p: u64,
    pub prec: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub guard: Option<u32>,
    /// Inline fixture or path relative to the bundle file.
    #[serde(default)]
    pub field: Option<FieldFixtureJson>,
    #[serde(default)]
    pub field_file: Option<String>,
    pub characters: Vec<String>,
    #[serde(default)]
    pub functional_matrix: Option<Vec<Vec<ScalarJson>>>,
    #[serde(default)]
    pub height_tables: Option<BTreeMap<String, Vec<Vec<ScalarJson>>>>,
    #[serde(default)]
    pub w_tables: Vec<BiellipticPrimeJson>,
    #[serde(default)]
    pub consistency_checks: Vec<ConsistencyCheckJson>,
    #[serde(default)]
    pub residue_pairs: Vec<ResiduePairJson>,
    pub search: SearchConfigJson,
}
