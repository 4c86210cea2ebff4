//! Continuous Q_p-valued idele class characters of a quadratic field with
//! p split.
//!
//! A character is determined by its trace vector (c_1, c_2) acting through
//! the two embeddings K -> Q_p, subject to the unit equation
//! c_1 log(sigma_1(eps)) + c_2 log(sigma_2(eps)) = 0 for every unit eps.
//! Class-group data (class number, fundamental unit, generators xi_q of
//! q^{h_K}) is ingested, not computed.

use crate::padic::{BranchConstant, PadicContext, PadicError, PadicNumber, PadicResult};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type IccResult<T> = Result<T, IccError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IccError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error("invalid field data: {0}")]
    InvalidFieldData(String),
    #[error("p = {0} is not split in the field (d must be a nonzero square mod p)")]
    NotSplit(u64),
    #[error("operation requires an imaginary quadratic field")]
    NotImaginary,
    #[error("field data carries no fundamental unit")]
    MissingFundamentalUnit,
    #[error("prime above p passed where q coprime to p is required")]
    DividesP,
    #[error("factorization inconsistent with the norm of beta")]
    InconsistentFactorization,
    #[error("unit logarithms vanish at working precision: rank cannot be certified")]
    PrecisionExhausted,
}

/// An element a + b sqrt(d) of the quadratic field, with exact rational
/// coordinates (half-integers occur for d = 1 mod 4).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadElement {
    pub a: BigRational,
    pub b: BigRational,
}

impl QuadElement {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        QuadElement { a, b }
    }

    pub fn from_integers(a: i64, b: i64) -> Self {
        QuadElement {
            a: BigRational::from_integer(BigInt::from(a)),
            b: BigRational::from_integer(BigInt::from(b)),
        }
    }

    pub fn from_ratios(a: (i64, i64), b: (i64, i64)) -> Self {
        QuadElement {
            a: BigRational::new(BigInt::from(a.0), BigInt::from(a.1)),
            b: BigRational::new(BigInt::from(b.0), BigInt::from(b.1)),
        }
    }

    pub fn norm(&self, d: i64) -> BigRational {
        &self.a * &self.a - BigRational::from_integer(BigInt::from(d)) * &self.b * &self.b
    }

    pub fn conjugate(&self) -> QuadElement {
        QuadElement {
            a: self.a.clone(),
            b: -self.b.clone(),
        }
    }

    pub fn mul(&self, other: &QuadElement, d: i64) -> QuadElement {
        let db = BigRational::from_integer(BigInt::from(d));
        QuadElement {
            a: &self.a * &other.a + &db * &self.b * &other.b,
            b: &self.a * &other.b + &self.b * &other.a,
        }
    }

    pub fn pow(&self, n: u32, d: i64) -> QuadElement {
        let mut acc = QuadElement::from_integers(1, 0);
        for _ in 0..n {
            acc = acc.mul(self, d);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

/// Class-group and unit data of K = Q(sqrt(d)), supplied as a fixture.
#[derive(Debug, Clone)]
pub struct QuadraticFieldData {
    pub d: i64,
    pub class_number: u32,
    pub fundamental_unit: Option<QuadElement>,
    pub signature: (u32, u32),
    pub torsion_order: u32,
}

fn is_squarefree(mut n: i64) -> bool {
    n = n.abs();
    let mut k = 2i64;
    while k * k <= n {
        if n % (k * k) == 0 {
            return false;
        }
        k += 1;
    }
    true
}

impl QuadraticFieldData {
    pub fn new(
        d: i64,
        class_number: u32,
        fundamental_unit: Option<QuadElement>,
        torsion_order: u32,
    ) -> IccResult<Self> {
        if d == 0 || d == 1 || !is_squarefree(d) {
            return Err(IccError::InvalidFieldData(format!(
                "d = {d} is not a squarefree integer != 0, 1"
            )));
        }
        if class_number < 1 {
            return Err(IccError::InvalidFieldData(
                "class number must be >= 1".into(),
            ));
        }
        let signature = if d > 0 { (2, 0) } else { (0, 1) };
        let expected_torsion = match d {
            -1 => 4,
            -3 => 6,
            _ => 2,
        };
        if torsion_order != expected_torsion {
            return Err(IccError::InvalidFieldData(format!(
                "torsion order {torsion_order} does not match d = {d}"
            )));
        }
        match (&fundamental_unit, d > 0) {
            (Some(eps), true) => {
                let n = eps.norm(d);
                if !(n == BigRational::one() || n == -BigRational::one()) {
                    return Err(IccError::InvalidFieldData(
                        "fundamental unit must have norm +-1".into(),
                    ));
                }
            }
            (None, true) => return Err(IccError::MissingFundamentalUnit),
            (Some(_), false) => {
                return Err(IccError::InvalidFieldData(
                    "imaginary quadratic fields have no fundamental unit".into(),
                ))
            }
            (None, false) => {}
        }
        Ok(QuadraticFieldData {
            d,
            class_number,
            fundamental_unit,
            signature,
            torsion_order,
        })
    }

    pub fn unit_rank(&self) -> u32 {
        self.signature.0 + self.signature.1 - 1
    }

    pub fn is_imaginary(&self) -> bool {
        self.d < 0
    }

    /// A generator of the torsion subgroup of O_K^*.
    pub fn torsion_generator(&self) -> QuadElement {
        match self.d {
            -1 => QuadElement::from_integers(0, 1),
            -3 => QuadElement::from_ratios((1, 2), (1, 2)),
            _ => QuadElement::from_integers(-1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingTag {
    Split,
    Inert,
    Ramified,
}

/// A prime ideal q of K together with a generator xi of q^{h_K}.
#[derive(Debug, Clone)]
pub struct PrimeIdealData {
    pub label: String,
    pub residue_char: u64,
    pub xi: QuadElement,
    pub tag: SplittingTag,
}

impl PrimeIdealData {
    pub fn new(
        label: impl Into<String>,
        residue_char: u64,
        xi: QuadElement,
        tag: SplittingTag,
        field: &QuadraticFieldData,
    ) -> IccResult<Self> {
        let label = label.into();
        let f = match tag {
            SplittingTag::Inert => 2u32,
            _ => 1,
        };
        let n = xi.norm(field.d);
        let expect =
            BigRational::from_integer(BigInt::from(residue_char).pow(f * field.class_number));
        if n != expect && n != -expect.clone() {
            return Err(IccError::InvalidFieldData(format!(
                "Norm(xi) != +-{residue_char}^{} for prime {label}",
                f * field.class_number
            )));
        }
        Ok(PrimeIdealData {
            label,
            residue_char,
            xi,
            tag,
        })
    }
}

/// Embeddings of K into Q_p for split p: sigma_1 sends sqrt(d) to the
/// least-residue square root of d, sigma_2 to its negative.
#[derive(Debug, Clone)]
pub struct SplitPrimeContext {
    pub ctx: PadicContext,
    pub d: i64,
    sqrt_d: PadicNumber,
}

impl SplitPrimeContext {
    pub fn new(field: &QuadraticFieldData, ctx: PadicContext) -> IccResult<Self> {
        let p = ctx.p();
        if field.d.rem_euclid(p as i64) == 0 {
            return Err(IccError::NotSplit(p));
        }
        let d_p = ctx.from_integer(field.d);
        let sqrt_d = match d_p.sqrt().map_err(IccError::Padic)? {
            Some(r) => r,
            None => return Err(IccError::NotSplit(p)),
        };
        Ok(SplitPrimeContext {
            ctx,
            d: field.d,
            sqrt_d,
        })
    }

    pub fn sqrt_d(&self) -> &PadicNumber {
        &self.sqrt_d
    }

    /// sigma_j(a + b sqrt(d)) for j in {1, 2}.
    pub fn embed(&self, place: usize, x: &QuadElement) -> IccResult<PadicNumber> {
        assert!(place == 1 || place == 2);
        let root = if place == 1 {
            self.sqrt_d.clone()
        } else {
            self.sqrt_d.neg()
        };
        let a = self.ctx.from_rational(&x.a);
        let b = self.ctx.from_rational(&x.b);
        Ok(a.add(&b.mul(&root)?)?)
    }
}

/// The trace-map interface in general: a Q_p-linear map K_j -> Q_p through
/// which a character factors at a place above p. For higher-degree places
/// this would be a genuine linear form on a degree-d_j extension; only the
/// split case, where K_j = Q_p and the map is scalar multiplication, is
/// implemented end-to-end in this crate.
pub trait TraceMap {
    fn apply(&self, x: &PadicNumber) -> PadicResult<PadicNumber>;
}

/// Scalar multiplication c * x on K_j = Q_p: the trace map of a split place.
#[derive(Debug, Clone)]
pub struct ScalarTrace(pub PadicNumber);

impl TraceMap for ScalarTrace {
    fn apply(&self, x: &PadicNumber) -> PadicResult<PadicNumber> {
        self.0.mul(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacterLabel {
    Cyclotomic,
    Anticyclotomic,
    Custom,
}

/// A continuous idele class character, presented by its trace vector and a
/// branch constant (the declared log p) at each place above p.
#[derive(Debug, Clone)]
pub struct IdeleClassCharacter {
    pub trace: [PadicNumber; 2],
    pub branches: [BranchConstant; 2],
    pub label: CharacterLabel,
}

impl IdeleClassCharacter {
    pub fn new(trace: [PadicNumber; 2], label: CharacterLabel, ctx: &PadicContext) -> Self {
        IdeleClassCharacter {
            trace,
            branches: [BranchConstant::iwasawa(ctx), BranchConstant::iwasawa(ctx)],
            label,
        }
    }

    pub fn cyclotomic(ctx: &PadicContext) -> Self {
        Self::new([ctx.one(), ctx.one()], CharacterLabel::Cyclotomic, ctx)
    }

    /// Swaps the two places (the action of conjugation on trace data).
    pub fn swap_places(&self) -> Self {
        IdeleClassCharacter {
            trace: [self.trace[1].clone(), self.trace[0].clone()],
            branches: [self.branches[1].clone(), self.branches[0].clone()],
            label: CharacterLabel::Custom,
        }
    }

    /// Sum of c_j log_j(sigma_j(x)) over the places above p, with each log
    /// taken on the branch declared for its place.
    pub fn p_part(&self, x: &QuadElement, sctx: &SplitPrimeContext) -> IccResult<PadicNumber> {
        let mut acc = sctx.ctx.zero();
        for j in 1..=2 {
            let emb = sctx.embed(j, x)?;
            let l = emb.log(&self.branches[j - 1])?;
            acc = acc.add(&self.trace[j - 1].mul(&l)?)?;
        }
        Ok(acc)
    }

    /// Solves the branch constants from generators of the primes above p,
    /// so that the character kills the principal ideles they generate.
    /// With the Iwasawa default this is the identity for the cyclotomic
    /// character; ramified characters (the anticyclotomic one) genuinely
    /// need it before their p-divisible values are meaningful.
    pub fn calibrate_branches(
        &mut self,
        p_primes: &[&PrimeIdealData],
        sctx: &SplitPrimeContext,
    ) -> IccResult<()> {
        let iw = BranchConstant::iwasawa(&sctx.ctx);
        for data in p_primes {
            if data.residue_char != sctx.ctx.p() {
                return Err(IccError::InvalidFieldData(format!(
                    "prime {} does not lie above p",
                    data.label
                )));
            }
            // Which embedding vanishes on xi decides which place this is.
            let e1 = sctx.embed(1, &data.xi)?;
            let e2 = sctx.embed(2, &data.xi)?;
            let (j, ej, other) = match (e1.valuation(), e2.valuation()) {
                (Some(v), Some(0)) if v > 0 => (1usize, e1, e2),
                (Some(0), Some(v)) if v > 0 => (2usize, e2, e1),
                _ => {
                    return Err(IccError::InvalidFieldData(format!(
                        "xi for {} is not a generator of a single prime above p",
                        data.label
                    )))
                }
            };
            let v = ej.valuation().unwrap();
            // c_j (v b_j + log(unit part)) + c_other log(other) = 0
            let unit_log = ej.log(&iw)?; // the Iwasawa log drops the p-power
            let other_log = other.log(&iw)?;
            let c_j = &self.trace[j - 1];
            let c_o = &self.trace[2 - j];
            if c_j.is_zero() {
                continue; // this place does not constrain the branch
            }
            let num = c_j.mul(&unit_log)?.add(&c_o.mul(&other_log)?)?;
            let b = num.neg().div(&c_j.mul(&sctx.ctx.from_integer(v))?)?;
            self.branches[j - 1] = BranchConstant::new(b);
        }
        Ok(())
    }
}

/// Residual of the unit equation for this character: a certified zero iff
/// the trace vector defines an idele class character. Torsion units impose
/// nothing since log kills torsion.
pub fn unit_equation_residual(
    chi: &IdeleClassCharacter,
    field: &QuadraticFieldData,
    sctx: &SplitPrimeContext,
) -> IccResult<PadicNumber> {
    match &field.fundamental_unit {
        None => {
            // Imaginary: only torsion; verify log indeed kills it.
            let res = chi.p_part(&field.torsion_generator(), sctx)?;
            if !res.is_zero() {
                return Err(IccError::InvalidFieldData(
                    "torsion unit has nonzero logarithm: field data is inconsistent".into(),
                ));
            }
            Ok(res)
        }
        Some(eps) => chi.p_part(eps, sctx),
    }
}

/// A basis of the space V_K of continuous idele class characters:
/// dimension r_2 + 1, i.e. two characters (cyclotomic, anticyclotomic) for
/// imaginary quadratic K and one for real quadratic K.
pub fn character_space_basis(
    field: &QuadraticFieldData,
    sctx: &SplitPrimeContext,
) -> IccResult<Vec<IdeleClassCharacter>> {
    let ctx = &sctx.ctx;
    if field.is_imaginary() {
        let basis = vec![
            IdeleClassCharacter::cyclotomic(ctx),
            anticyclotomic_character(field, sctx)?,
        ];
        for chi in &basis {
            let r = unit_equation_residual(chi, field, sctx)?;
            debug_assert!(r.is_zero());
        }
        return Ok(basis);
    }
    let eps = field
        .fundamental_unit
        .as_ref()
        .ok_or(IccError::MissingFundamentalUnit)?;
    let iw = BranchConstant::iwasawa(ctx);
    let l1 = sctx.embed(1, eps)?.log(&iw)?;
    let l2 = sctx.embed(2, eps)?.log(&iw)?;
    if l1.is_zero() && l2.is_zero() {
        return Err(IccError::PrecisionExhausted);
    }
    // Solution line of c1 L1 + c2 L2 = 0, normalized to the cyclotomic
    // vector (1, 1) when that lies on it (always, since log N(eps) = 0).
    let chi = if !l2.is_zero() {
        let c2 = l1.neg().div(&l2)?;
        if c2 == ctx.one() {
            IdeleClassCharacter::cyclotomic(ctx)
        } else {
            IdeleClassCharacter::new([ctx.one(), c2], CharacterLabel::Custom, ctx)
        }
    } else {
        IdeleClassCharacter::new([ctx.zero(), ctx.one()], CharacterLabel::Custom, ctx)
    };
    Ok(vec![chi])
}

/// The anticyclotomic character of an imaginary quadratic field with p
/// split: trace vector (1, -1). Conjugation swaps the places, so
/// chi o c = -chi holds by construction.
pub fn anticyclotomic_character(
    field: &QuadraticFieldData,
    sctx: &SplitPrimeContext,
) -> IccResult<IdeleClassCharacter> {
    if !field.is_imaginary() {
        return Err(IccError::NotImaginary);
    }
    let ctx = &sctx.ctx;
    Ok(IdeleClassCharacter::new(
        [ctx.one(), ctx.from_integer(-1)],
        CharacterLabel::Anticyclotomic,
        ctx,
    ))
}

/// chi_q(pi_q) for a prime q not dividing p:
/// -(1/h_K) (c_1 log sigma_1(xi_q) + c_2 log sigma_2(xi_q)).
pub fn local_value_away_from_p(
    chi: &IdeleClassCharacter,
    q: &PrimeIdealData,
    field: &QuadraticFieldData,
    sctx: &SplitPrimeContext,
) -> IccResult<PadicNumber> {
    if q.residue_char == sctx.ctx.p() {
        return Err(IccError::DividesP);
    }
    let sum = chi.p_part(&q.xi, sctx)?;
    let h = sctx.ctx.from_integer(field.class_number as i64);
    Ok(sum.neg().div(&h)?)
}

/// Sum of local character values over a principal idele:
/// sum over q of e_q chi_q(pi_q) plus the p-places' branch-extended logs.
/// A valid character yields a certified-zero residual.
pub fn verify_principal_vanishing(
    chi: &IdeleClassCharacter,
    factorization: &[(&PrimeIdealData, i64)],
    beta: &QuadElement,
    field: &QuadraticFieldData,
    sctx: &SplitPrimeContext,
) -> IccResult<PadicNumber> {
    if beta.is_zero() {
        return Err(IccError::InvalidFieldData("beta must be nonzero".into()));
    }
    // Norm consistency: |N(beta)|^{h_K} = prod |N(xi_q)|^{e_q} exactly.
    let mut lhs = beta.norm(field.d).abs();
    lhs = rational_pow(&lhs, field.class_number as i64);
    let mut rhs = BigRational::one();
    for (q, e) in factorization {
        rhs *= rational_pow(&q.xi.norm(field.d).abs(), *e);
    }
    if lhs != rhs {
        return Err(IccError::InconsistentFactorization);
    }
    let mut acc = sctx.ctx.zero();
    for (q, e) in factorization {
        if q.residue_char == sctx.ctx.p() {
            continue; // the p-contribution flows through the embedding logs
        }
        let v = local_value_away_from_p(chi, q, field, sctx)?;
        acc = acc.add(&v.mul(&sctx.ctx.from_integer(*e))?)?;
    }
    acc = acc.add(&chi.p_part(beta, sctx)?)?;
    Ok(acc)
}

fn rational_pow(x: &BigRational, e: i64) -> BigRational {
    if e == 0 {
        return BigRational::one();
    }
    let mut acc = BigRational::one();
    for _ in 0..e.unsigned_abs() {
        acc *= x;
    }
    if e < 0 {
        acc.recip()
    } else {
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PadicContext;

    fn q_i(ctx: &PadicContext) -> (QuadraticFieldData, SplitPrimeContext) {
        let f = QuadraticFieldData::new(-1, 1, None, 4).unwrap();
        let s = SplitPrimeContext::new(&f, *ctx).unwrap();
        (f, s)
    }

    fn q_sqrt3(ctx: &PadicContext) -> (QuadraticFieldData, SplitPrimeContext) {
        let f = QuadraticFieldData::new(3, 1, Some(QuadElement::from_integers(2, 1)), 2).unwrap();
        let s = SplitPrimeContext::new(&f, *ctx).unwrap();
        (f, s)
    }

    #[test]
    fn field_data_validation() {
        assert!(QuadraticFieldData::new(4, 1, None, 2).is_err()); // not squarefree
        assert!(QuadraticFieldData::new(1, 1, None, 2).is_err());
        assert!(QuadraticFieldData::new(-1, 1, None, 2).is_err()); // wrong torsion
        // real field needs a unit with norm +-1
        assert!(QuadraticFieldData::new(3, 1, Some(QuadElement::from_integers(2, 2)), 2).is_err());
        assert!(QuadraticFieldData::new(3, 1, None, 2).is_err());
    }

    #[test]
    fn split_context_rejects_inert_primes() {
        let f = QuadraticFieldData::new(-1, 1, None, 4).unwrap();
        // -1 is a non-residue mod 7, so 7 is inert in Q(i).
        let ctx = PadicContext::new(7, 10).unwrap();
        assert!(matches!(
            SplitPrimeContext::new(&f, ctx),
            Err(IccError::NotSplit(7))
        ));
    }

    #[test]
    fn basis_for_imaginary_quadratic() {
        let ctx = PadicContext::new(5, 12).unwrap();
        let (f, s) = q_i(&ctx);
        let basis = character_space_basis(&f, &s).unwrap();
        assert_eq!(basis.len(), 2);
        assert_eq!(basis[0].label, CharacterLabel::Cyclotomic);
        assert_eq!(basis[1].label, CharacterLabel::Anticyclotomic);
        assert_eq!(basis[1].trace[0], ctx.one());
        assert_eq!(basis[1].trace[1], ctx.from_integer(-1));
    }

    #[test]
    fn basis_for_real_quadratic_is_cyclotomic_line() {
        let ctx = PadicContext::new(13, 12).unwrap();
        let (f, s) = q_sqrt3(&ctx);
        let basis = character_space_basis(&f, &s).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(basis[0].label, CharacterLabel::Cyclotomic);
        // Norm 1 forces L1 = -L2, so the unit equation residual vanishes.
        let r = unit_equation_residual(&basis[0], &f, &s).unwrap();
        assert!(r.is_zero());
        // And the logs themselves are nonzero (the rank is certified).
        let iw = BranchConstant::iwasawa(&ctx);
        let l1 = s
            .embed(1, f.fundamental_unit.as_ref().unwrap())
            .unwrap()
            .log(&iw)
            .unwrap();
        let l2 = s
            .embed(2, f.fundamental_unit.as_ref().unwrap())
            .unwrap()
            .log(&iw)
            .unwrap();
        assert!(!l1.is_zero());
        assert_eq!(l2, l1.neg());
    }

    #[test]
    fn cyclotomic_satisfies_unit_equation_for_any_field() {
        // log N(eps) = log(+-1) = 0.
        let ctx = PadicContext::new(3, 12).unwrap();
        let f = QuadraticFieldData::new(34, 2, Some(QuadElement::from_integers(35, 6)), 2).unwrap();
        let s = SplitPrimeContext::new(&f, ctx).unwrap();
        let chi = IdeleClassCharacter::cyclotomic(&ctx);
        assert!(unit_equation_residual(&chi, &f, &s).unwrap().is_zero());
    }

    #[test]
    fn local_value_of_cyclotomic_is_norm_log() {
        let ctx = PadicContext::new(5, 12).unwrap();
        let (f, s) = q_i(&ctx);
        // q = 3 inert in Q(i), xi = 3.
        let q3 =
            PrimeIdealData::new("q3", 3, QuadElement::from_integers(3, 0), SplittingTag::Inert, &f)
                .unwrap();
        let chi = IdeleClassCharacter::cyclotomic(&ctx);
        let got = local_value_away_from_p(&chi, &q3, &f, &s).unwrap();
        // -(1/h) log N(xi) with N(3) = 9, computed on the rational side.
        let iw = BranchConstant::iwasawa(&ctx);
        let want = ctx.from_integer(9).log(&iw).unwrap().neg();
        assert_eq!(got, want);
    }

    #[test]
    fn anticyclotomic_kills_inert_generators() {
        let ctx = PadicContext::new(5, 12).unwrap();
        let (f, s) = q_i(&ctx);
        let q3 =
            PrimeIdealData::new("q3", 3, QuadElement::from_integers(3, 0), SplittingTag::Inert, &f)
                .unwrap();
        let chi = anticyclotomic_character(&f, &s).unwrap();
        let got = local_value_away_from_p(&chi, &q3, &f, &s).unwrap();
        assert!(got.is_zero());
    }

    #[test]
    fn anticyclotomic_antisymmetry_under_place_swap() {
        let ctx = PadicContext::new(5, 12).unwrap();
        let (f, s) = q_i(&ctx);
        // 13 = (3+2i)(3-2i) splits in Q(i).
        let q13 = PrimeIdealData::new(
            "q13a",
            13,
            QuadElement::from_integers(3, 2),
            SplittingTag::Split,
            &f,
        )
        .unwrap();
        let anti = anticyclotomic_character(&f, &s).unwrap();
        let cyc = IdeleClassCharacter::cyclotomic(&ctx);
        let v = local_value_away_from_p(&anti, &q13, &f, &s).unwrap();
        let v_swapped = local_value_away_from_p(&anti.swap_places(), &q13, &f, &s).unwrap();
        assert!(!v.is_zero());
        assert_eq!(v_swapped, v.neg());
        let w = local_value_away_from_p(&cyc, &q13, &f, &s).unwrap();
        let w_swapped = local_value_away_from_p(&cyc.swap_places(), &q13, &f, &s).unwrap();
        assert_eq!(w, w_swapped);
    }

    #[test]
    fn local_value_is_linear_in_trace_vector() {
        let ctx = PadicContext::new(5, 12).unwrap();
        let (f, s) = q_i(&ctx);
        let q13 = PrimeIdealData::new(
            "q13a",
            13,
            QuadElement::from_integers(3, 2),
            SplittingTag::Split,
            &f,
        )
        .unwrap();
        let chi_a = IdeleClassCharacter::new(
            [ctx.from_integer(2), ctx.from_integer(7)],
            CharacterLabel::Custom,
            &ctx,
        );
        let chi_b = IdeleClassCharacter::new(
            [ctx.from_integer(-1), ctx.from_integer(4)],
            CharacterLabel::Custom,
            &ctx,
        );
        let chi_sum = IdeleClassCharacter::new(
            [
                chi_a.trace[0].add(&chi_b.trace[0]).unwrap(),
                chi_a.trace[1].add(&chi_b.trace[1]).unwrap(),
            ],
            CharacterLabel::Custom,
            &ctx,
        );
        let va = local_value_away_from_p(&chi_a, &q13, &f, &s).unwrap();
        let vb = local_value_away_from_p(&chi_b, &q13, &f, &s).unwrap();
        let vs = local_value_away_from_p(&chi_sum, &q13, &f, &s).unwrap();
        assert_eq!(vs, va.add(&vb).unwrap());
    }

    #[test]
    fn principal_vanishing_for_units_and_generators() {
        let ctx = PadicContext::new(13, 12).unwrap();
        let (f, s) = q_sqrt3(&ctx);
        let chi = character_space_basis(&f, &s).unwrap().remove(0);
        // beta = eps: the residual is exactly the unit equation.
        let eps = f.fundamental_unit.clone().unwrap();
        let r = verify_principal_vanishing(&chi, &[], &eps, &f, &s).unwrap();
        assert!(r.is_zero());
        // beta = xi_q itself, for the ramified prime above 3.
        let q3 = PrimeIdealData::new(
            "q3",
            3,
            QuadElement::from_integers(0, 1),
            SplittingTag::Ramified,
            &f,
        )
        .unwrap();
        let r = verify_principal_vanishing(&chi, &[(&q3, 1)], &q3.xi, &f, &s).unwrap();
        assert!(r.is_zero(), "residual {r} should vanish");
    }

    #[test]
    fn principal_vanishing_with_p_part_bookkeeping() {
        // K = Q(i), p = 5, beta = 2+i generates a prime above p.
        let ctx = PadicContext::new(5, 12).unwrap();
        let (f, s) = q_i(&ctx);
        let pa = PrimeIdealData::new(
            "p5a",
            5,
            QuadElement::from_integers(2, -1),
            SplittingTag::Split,
            &f,
        )
        .unwrap();
        let pb = PrimeIdealData::new(
            "p5b",
            5,
            QuadElement::from_integers(2, 1),
            SplittingTag::Split,
            &f,
        )
        .unwrap();
        let beta = QuadElement::from_integers(2, 1);
        // Cyclotomic with the Iwasawa branch: residual vanishes as is.
        let cyc = IdeleClassCharacter::cyclotomic(&ctx);
        let r = verify_principal_vanishing(&cyc, &[(&pb, 1)], &beta, &f, &s).unwrap();
        assert!(r.is_zero(), "cyclotomic residual {r}");
        // The anticyclotomic character is ramified at p: with the default
        // branch the residual is nonzero, after calibration it vanishes.
        let mut anti = anticyclotomic_character(&f, &s).unwrap();
        let r0 = verify_principal_vanishing(&anti, &[(&pb, 1)], &beta, &f, &s).unwrap();
        assert!(!r0.is_zero());
        anti.calibrate_branches(&[&pa, &pb], &s).unwrap();
        let r1 = verify_principal_vanishing(&anti, &[(&pb, 1)], &beta, &f, &s).unwrap();
        assert!(r1.is_zero(), "calibrated anticyclotomic residual {r1}");
        // Calibration leaves the cyclotomic branches at the Iwasawa default.
        let mut cyc2 = IdeleClassCharacter::cyclotomic(&ctx);
        cyc2.calibrate_branches(&[&pa, &pb], &s).unwrap();
        assert!(cyc2.branches[0].log_p.is_zero());
        assert!(cyc2.branches[1].log_p.is_zero());
    }

    #[test]
    fn inconsistent_factorization_detected() {
        let ctx = PadicContext::new(5, 12).unwrap();
        let (f, s) = q_i(&ctx);
        let q3 =
            PrimeIdealData::new("q3", 3, QuadElement::from_integers(3, 0), SplittingTag::Inert, &f)
                .unwrap();
        let chi = IdeleClassCharacter::cyclotomic(&ctx);
        let beta = QuadElement::from_integers(3, 0);
        // Claiming (3) = q3^2 is wrong: N(3)^1 = 9 but N(xi)^2 = 81.
        let r = verify_principal_vanishing(&chi, &[(&q3, 2)], &beta, &f, &s);
        assert!(matches!(r, Err(IccError::InconsistentFactorization)));
    }
}
