//! Capped-precision arithmetic in Q_p for an odd prime p.
//!
//! Every element tracks the number of p-adic digits it is certified to.
//! Operations propagate certified precision with the usual min rules and
//! return an error instead of fabricating digits the inputs cannot back.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt;

pub type PadicResult<T> = Result<T, PadicError>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PadicError {
    #[error("prime {0} is not an odd prime >= 3")]
    BadPrime(u64),
    #[error("operands live over different primes ({0} vs {1})")]
    DifferentPrimes(u64, u64),
    #[error("division by an element indistinguishable from zero")]
    DivisionByZero,
    #[error("result cannot be certified to a single digit")]
    PrecisionExhausted,
    #[error("operation requires a nonzero argument")]
    ZeroArgument,
    #[error("operation requires a unit (valuation zero)")]
    NotAUnit,
    #[error("requested {requested} certified digits but only {available} are available")]
    InsufficientPrecision { requested: i64, available: i64 },
}

/// Working context: the prime and the flat precision cap `N_work`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadicContext {
    p: u64,
    n_work: u32,
}

fn is_odd_prime(p: u64) -> bool {
    if p < 3 || p % 2 == 0 {
        return false;
    }
    let mut d = 3u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub(crate) fn pk_pow(p: u64, k: u32) -> BigUint {
    BigUint::from(p).pow(k)
}

/// Inverse of `a` modulo `p^k`; `a` must be coprime to p.
pub(crate) fn inv_mod_pk(a: &BigUint, p: u64, k: u32) -> BigUint {
    let m = BigInt::from(pk_pow(p, k));
    let a = BigInt::from(a.clone());
    let e = a.extended_gcd(&m);
    debug_assert!(e.gcd.is_one());
    let x = e.x.mod_floor(&m);
    x.to_biguint().expect("mod_floor of positive modulus")
}

/// Reduce a rational with p-free denominator part handled exactly:
/// returns (valuation, unit residue mod p^k) of `r`, or None when r = 0.
pub(crate) fn rational_val_unit(r: &BigRational, p: u64, k: u32) -> Option<(i64, BigUint)> {
    if r.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let mut num = r.numer().clone();
    let mut den = r.denom().clone();
    let mut v: i64 = 0;
    while (&num % &pb).is_zero() {
        num /= &pb;
        v += 1;
    }
    while (&den % &pb).is_zero() {
        den /= &pb;
        v -= 1;
    }
    let m = BigInt::from(pk_pow(p, k));
    let nu = num.mod_floor(&m).to_biguint().unwrap();
    let du = den.mod_floor(&m).to_biguint().unwrap();
    let unit = (nu * inv_mod_pk(&du, p, k)) % pk_pow(p, k);
    Some((v, unit))
}

impl PadicContext {
    pub fn new(p: u64, n_work: u32) -> PadicResult<Self> {
        if !is_odd_prime(p) {
            return Err(PadicError::BadPrime(p));
        }
        if n_work < 1 {
            return Err(PadicError::PrecisionExhausted);
        }
        Ok(PadicContext { p, n_work })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn working_precision(&self) -> u32 {
        self.n_work
    }

    pub fn zero(&self) -> PadicNumber {
        PadicNumber {
            p: self.p,
            cap: self.n_work,
            repr: Repr::Zero {
                abs_prec: self.n_work as i64,
            },
        }
    }

    pub fn one(&self) -> PadicNumber {
        self.from_integer(1)
    }

    pub fn from_integer(&self, n: i64) -> PadicNumber {
        self.from_bigint(&BigInt::from(n))
    }

    pub fn from_bigint(&self, n: &BigInt) -> PadicNumber {
        self.from_rational(&BigRational::from_integer(n.clone()))
    }

    /// Constructs a + 0, certified to absolute precision N_work
    /// (relative precision N_work - v for valuation v >= 0).
    pub fn from_rational(&self, r: &BigRational) -> PadicNumber {
        match rational_val_unit(r, self.p, self.n_work) {
            None => self.zero(),
            Some((v, _)) if v >= self.n_work as i64 => self.zero(),
            Some((v, _)) => {
                let rel = if v >= 0 {
                    self.n_work - v as u32
                } else {
                    self.n_work
                };
                let (_, unit) = rational_val_unit(r, self.p, rel).unwrap();
                if unit.is_zero() {
                    return self.zero();
                }
                PadicNumber {
                    p: self.p,
                    cap: self.n_work,
                    repr: Repr::Unit {
                        val: v,
                        unit,
                        rel_prec: rel,
                    },
                }
            }
        }
    }

    pub fn from_ratio(&self, num: i64, den: i64) -> PadicResult<PadicNumber> {
        if den == 0 {
            return Err(PadicError::DivisionByZero);
        }
        Ok(self.from_rational(&BigRational::new(BigInt::from(num), BigInt::from(den))))
    }

    /// Element p^val * unit with explicitly certified relative precision.
    pub fn from_unit_digits(&self, val: i64, unit: BigUint, rel_prec: u32) -> PadicResult<PadicNumber> {
        if rel_prec < 1 || rel_prec > self.n_work {
            return Err(PadicError::PrecisionExhausted);
        }
        let unit = unit % pk_pow(self.p, rel_prec);
        if (&unit % self.p).is_zero() {
            return Err(PadicError::NotAUnit);
        }
        Ok(PadicNumber {
            p: self.p,
            cap: self.n_work,
            repr: Repr::Unit {
                val,
                unit,
                rel_prec,
            },
        })
    }

    /// Zero certified modulo p^abs_prec.
    pub fn zero_mod(&self, abs_prec: i64) -> PadicResult<PadicNumber> {
        if abs_prec < 1 {
            return Err(PadicError::PrecisionExhausted);
        }
        Ok(PadicNumber {
            p: self.p,
            cap: self.n_work,
            repr: Repr::Zero {
                abs_prec: abs_prec.min(self.n_work as i64),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Repr {
    /// Indistinguishable from 0 modulo p^abs_prec.
    Zero { abs_prec: i64 },
    /// p^val * unit with unit certified modulo p^rel_prec, unit coprime to p.
    Unit {
        val: i64,
        unit: BigUint,
        rel_prec: u32,
    },
}

/// An element of Q_p carrying its own certified precision.
#[derive(Debug, Clone)]
pub struct PadicNumber {
    p: u64,
    cap: u32,
    repr: Repr,
}

/// Declared value of log(p); the default 0 is the Iwasawa branch.
#[derive(Debug, Clone)]
pub struct BranchConstant {
    pub log_p: PadicNumber,
}

impl BranchConstant {
    /// The Iwasawa branch log(p) = 0.
    pub fn iwasawa(ctx: &PadicContext) -> Self {
        BranchConstant { log_p: ctx.zero() }
    }

    pub fn new(log_p: PadicNumber) -> Self {
        BranchConstant { log_p }
    }
}

impl PadicNumber {
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision_cap(&self) -> u32 {
        self.cap
    }

    /// True when the element is indistinguishable from zero at its certified precision.
    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { .. })
    }

    /// Valuation; None for an element indistinguishable from zero.
    pub fn valuation(&self) -> Option<i64> {
        match &self.repr {
            Repr::Zero { .. } => None,
            Repr::Unit { val, .. } => Some(*val),
        }
    }

    /// A certified lower bound on the valuation: the valuation itself for a
    /// nonzero element, the certified modulus exponent for a zero.
    pub fn valuation_lower_bound(&self) -> i64 {
        match &self.repr {
            Repr::Zero { abs_prec } => *abs_prec,
            Repr::Unit { val, .. } => *val,
        }
    }

    /// Certified relative precision N_g (number of certified unit digits).
    pub fn rel_prec(&self) -> u32 {
        match &self.repr {
            Repr::Zero { abs_prec } => (*abs_prec).max(0) as u32,
            Repr::Unit { rel_prec, .. } => *rel_prec,
        }
    }

    /// Exponent of the certified modulus: the element is known mod p^{abs_prec}.
    pub fn abs_prec(&self) -> i64 {
        match &self.repr {
            Repr::Zero { abs_prec } => *abs_prec,
            Repr::Unit { val, rel_prec, .. } => val + *rel_prec as i64,
        }
    }

    pub fn unit_part(&self) -> Option<&BigUint> {
        match &self.repr {
            Repr::Zero { .. } => None,
            Repr::Unit { unit, .. } => Some(unit),
        }
    }

    /// Base-p digits of the unit part, d_0 first, one per certified digit.
    pub fn digits(&self) -> Vec<u64> {
        match &self.repr {
            Repr::Zero { .. } => Vec::new(),
            Repr::Unit {
                unit, rel_prec, ..
            } => {
                let mut out = Vec::with_capacity(*rel_prec as usize);
                let mut u = unit.clone();
                let pb = BigUint::from(self.p);
                for _ in 0..*rel_prec {
                    let (q, r) = u.div_rem(&pb);
                    out.push(r.to_u64().unwrap());
                    u = q;
                }
                out
            }
        }
    }

    fn ctx_like(&self) -> PadicContext {
        PadicContext {
            p: self.p,
            n_work: self.cap,
        }
    }

    fn check_same_prime(&self, other: &PadicNumber) -> PadicResult<()> {
        if self.p != other.p {
            return Err(PadicError::DifferentPrimes(self.p, other.p));
        }
        Ok(())
    }

    /// Integer representative modulo p^k; requires valuation >= 0 and
    /// certified absolute precision >= k.
    pub fn residue_mod(&self, k: u32) -> PadicResult<BigUint> {
        if self.abs_prec() < k as i64 {
            return Err(PadicError::InsufficientPrecision {
                requested: k as i64,
                available: self.abs_prec(),
            });
        }
        match &self.repr {
            Repr::Zero { .. } => Ok(BigUint::zero()),
            Repr::Unit { val, unit, .. } => {
                if *val < 0 {
                    return Err(PadicError::NotAUnit);
                }
                let shifted = unit * pk_pow(self.p, (*val).min(k as i64) as u32);
                Ok(shifted % pk_pow(self.p, k))
            }
        }
    }

    /// Truncates the certification down to absolute precision k.
    pub fn truncate_abs(&self, k: i64) -> PadicResult<PadicNumber> {
        if k < 1 {
            return Err(PadicError::PrecisionExhausted);
        }
        match &self.repr {
            Repr::Zero { abs_prec } => Ok(PadicNumber {
                p: self.p,
                cap: self.cap,
                repr: Repr::Zero {
                    abs_prec: (*abs_prec).min(k),
                },
            }),
            Repr::Unit {
                val,
                unit,
                rel_prec,
            } => {
                if *val >= k {
                    return Ok(PadicNumber {
                        p: self.p,
                        cap: self.cap,
                        repr: Repr::Zero { abs_prec: k },
                    });
                }
                let rel = ((k - val) as u32).min(*rel_prec);
                let u = unit % pk_pow(self.p, rel);
                Ok(PadicNumber {
                    p: self.p,
                    cap: self.cap,
                    repr: Repr::Unit {
                        val: *val,
                        unit: u,
                        rel_prec: rel,
                    },
                })
            }
        }
    }

    pub fn add(&self, other: &PadicNumber) -> PadicResult<PadicNumber> {
        self.check_same_prime(other)?;
        let cap = self.cap.min(other.cap);
        let abs = self.abs_prec().min(other.abs_prec());
        match (&self.repr, &other.repr) {
            (Repr::Zero { .. }, _) => other.truncate_abs(abs).map(|x| x.with_cap(cap)),
            (_, Repr::Zero { .. }) => self.truncate_abs(abs).map(|x| x.with_cap(cap)),
            (
                Repr::Unit {
                    val: v1, unit: u1, ..
                },
                Repr::Unit {
                    val: v2, unit: u2, ..
                },
            ) => {
                let vmin = (*v1).min(*v2);
                let width = abs - vmin;
                if width < 1 {
                    return Err(PadicError::PrecisionExhausted);
                }
                let m = pk_pow(self.p, width as u32);
                let a = (u1 * pk_pow(self.p, (v1 - vmin) as u32)) % &m;
                let b = (u2 * pk_pow(self.p, (v2 - vmin) as u32)) % &m;
                let s = (a + b) % &m;
                Self::from_scaled_residue(self.p, cap, vmin, s, abs)
            }
        }
    }

    pub fn sub(&self, other: &PadicNumber) -> PadicResult<PadicNumber> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PadicNumber {
        match &self.repr {
            Repr::Zero { .. } => self.clone(),
            Repr::Unit {
                val,
                unit,
                rel_prec,
            } => {
                let m = pk_pow(self.p, *rel_prec);
                PadicNumber {
                    p: self.p,
                    cap: self.cap,
                    repr: Repr::Unit {
                        val: *val,
                        unit: (&m - unit) % &m,
                        rel_prec: *rel_prec,
                    },
                }
            }
        }
    }

    fn with_cap(mut self, cap: u32) -> PadicNumber {
        self.cap = cap;
        self
    }

    /// Builds an element from p^{vmin} * s with s known mod p^{abs - vmin}.
    fn from_scaled_residue(
        p: u64,
        cap: u32,
        vmin: i64,
        s: BigUint,
        abs: i64,
    ) -> PadicResult<PadicNumber> {
        if s.is_zero() {
            if abs < 1 {
                return Err(PadicError::PrecisionExhausted);
            }
            return Ok(PadicNumber {
                p,
                cap,
                repr: Repr::Zero { abs_prec: abs },
            });
        }
        let pb = BigUint::from(p);
        let mut u = s;
        let mut w = 0i64;
        while (&u % &pb).is_zero() {
            u /= &pb;
            w += 1;
        }
        let val = vmin + w;
        let rel = abs - val;
        if rel < 1 {
            return Err(PadicError::PrecisionExhausted);
        }
        let rel = (rel as u32).min(cap);
        Ok(PadicNumber {
            p,
            cap,
            repr: Repr::Unit {
                val,
                unit: u % pk_pow(p, rel),
                rel_prec: rel,
            },
        })
    }

    pub fn mul(&self, other: &PadicNumber) -> PadicResult<PadicNumber> {
        self.check_same_prime(other)?;
        let cap = self.cap.min(other.cap);
        match (&self.repr, &other.repr) {
            (Repr::Zero { abs_prec }, _) => {
                let abs = abs_prec + other.valuation_lower_bound();
                if abs < 1 {
                    return Err(PadicError::PrecisionExhausted);
                }
                Ok(PadicNumber {
                    p: self.p,
                    cap,
                    repr: Repr::Zero {
                        abs_prec: abs.min(cap as i64),
                    },
                })
            }
            (_, Repr::Zero { .. }) => other.mul(self),
            (
                Repr::Unit {
                    val: v1,
                    unit: u1,
                    rel_prec: n1,
                },
                Repr::Unit {
                    val: v2,
                    unit: u2,
                    rel_prec: n2,
                },
            ) => {
                let rel = (*n1).min(*n2).min(cap);
                let m = pk_pow(self.p, rel);
                Ok(PadicNumber {
                    p: self.p,
                    cap,
                    repr: Repr::Unit {
                        val: v1 + v2,
                        unit: (u1 * u2) % &m,
                        rel_prec: rel,
                    },
                })
            }
        }
    }

    pub fn div(&self, other: &PadicNumber) -> PadicResult<PadicNumber> {
        self.check_same_prime(other)?;
        let cap = self.cap.min(other.cap);
        match &other.repr {
            Repr::Zero { .. } => Err(PadicError::DivisionByZero),
            Repr::Unit {
                val: v2,
                unit: u2,
                rel_prec: n2,
            } => match &self.repr {
                Repr::Zero { abs_prec } => {
                    let abs = abs_prec - v2;
                    if abs < 1 {
                        return Err(PadicError::PrecisionExhausted);
                    }
                    Ok(PadicNumber {
                        p: self.p,
                        cap,
                        repr: Repr::Zero {
                            abs_prec: abs.min(cap as i64),
                        },
                    })
                }
                Repr::Unit {
                    val: v1,
                    unit: u1,
                    rel_prec: n1,
                } => {
                    let rel = (*n1).min(*n2).min(cap);
                    let m = pk_pow(self.p, rel);
                    let inv = inv_mod_pk(&(u2 % &m), self.p, rel);
                    Ok(PadicNumber {
                        p: self.p,
                        cap,
                        repr: Repr::Unit {
                            val: v1 - v2,
                            unit: (u1 % &m * inv) % &m,
                            rel_prec: rel,
                        },
                    })
                }
            },
        }
    }

    /// Multiplies by the exact power p^e: a pure valuation shift, certified
    /// digits are unchanged.
    pub fn shift_val(&self, e: i64) -> PadicNumber {
        match &self.repr {
            Repr::Zero { abs_prec } => PadicNumber {
                p: self.p,
                cap: self.cap,
                repr: Repr::Zero {
                    abs_prec: abs_prec + e,
                },
            },
            Repr::Unit {
                val,
                unit,
                rel_prec,
            } => PadicNumber {
                p: self.p,
                cap: self.cap,
                repr: Repr::Unit {
                    val: val + e,
                    unit: unit.clone(),
                    rel_prec: *rel_prec,
                },
            },
        }
    }

    pub fn pow(&self, n: i64) -> PadicResult<PadicNumber> {
        let ctx = self.ctx_like();
        if n == 0 {
            return Ok(ctx.one());
        }
        let mut base = if n < 0 {
            ctx.one().div(self)?
        } else {
            self.clone()
        };
        let mut e = n.unsigned_abs();
        let mut acc: Option<PadicNumber> = None;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base)?,
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc.unwrap())
    }

    /// Multiplies by an exact rational scalar.
    pub fn scale_rational(&self, r: &BigRational) -> PadicResult<PadicNumber> {
        let s = self.ctx_like().from_rational(r);
        self.mul(&s)
    }

    /// The Teichmueller representative: the unique (p-1)-st root of unity
    /// congruent to this unit mod p, computed by iterating x -> x^p.
    pub fn teichmueller(&self) -> PadicResult<PadicNumber> {
        match &self.repr {
            Repr::Zero { .. } => Err(PadicError::NotAUnit),
            Repr::Unit {
                val,
                unit,
                rel_prec,
            } => {
                if *val != 0 {
                    return Err(PadicError::NotAUnit);
                }
                let m = pk_pow(self.p, *rel_prec);
                let mut x = unit.clone() % &m;
                for _ in 0..(4 * *rel_prec as usize + 4) {
                    let next = x.modpow(&BigUint::from(self.p), &m);
                    if next == x {
                        return Ok(PadicNumber {
                            p: self.p,
                            cap: self.cap,
                            repr: Repr::Unit {
                                val: 0,
                                unit: x,
                                rel_prec: *rel_prec,
                            },
                        });
                    }
                    x = next;
                }
                unreachable!("x -> x^p reaches the Teichmueller lift in rel_prec steps");
            }
        }
    }

    /// Branch-parametrized p-adic logarithm.
    ///
    /// Writes u = p^v * omega * u_1 with omega the Teichmueller part and
    /// u_1 a 1-unit, and returns v*c + log(u_1) where c is the declared
    /// value of log(p). The series for log(u_1) is truncated so that every
    /// omitted term has valuation at least the certified target.
    pub fn log(&self, branch: &BranchConstant) -> PadicResult<PadicNumber> {
        let (val, rel_prec) = match &self.repr {
            Repr::Zero { .. } => return Err(PadicError::ZeroArgument),
            Repr::Unit { val, rel_prec, .. } => (*val, *rel_prec),
        };
        let unit = PadicNumber {
            p: self.p,
            cap: self.cap,
            repr: match &self.repr {
                Repr::Unit { unit, .. } => Repr::Unit {
                    val: 0,
                    unit: unit.clone(),
                    rel_prec,
                },
                Repr::Zero { .. } => unreachable!(),
            },
        };
        let omega = unit.teichmueller()?;
        let one_unit = unit.div(&omega)?;
        let log_u1 = one_unit.log_one_unit()?;
        if val == 0 {
            return Ok(log_u1);
        }
        let v_elt = self.ctx_like().from_integer(val);
        let branch_term = v_elt.mul(&branch.log_p)?;
        branch_term.add(&log_u1)
    }

    /// log of a 1-unit via the alternating series on u - 1.
    fn log_one_unit(&self) -> PadicResult<PadicNumber> {
        let ctx = self.ctx_like();
        let target = self.rel_prec().max(1);
        let x = self.sub(&ctx.one())?;
        let (e, x_res) = match &x.repr {
            // u = 1 to full certified precision: log is 0 to the same precision.
            Repr::Zero { abs_prec } => return ctx.zero_mod(*abs_prec),
            Repr::Unit { val, unit, .. } => (*val, unit * pk_pow(self.p, *val as u32)),
        };
        debug_assert!(e >= 1, "Teichmueller reduction must yield a 1-unit");
        // Least M with k*e - floor(log_p k) >= target for all k > M.
        let mut m_terms = 1u32;
        let mut k = 1u32;
        loop {
            let c = k as i64 * e - ilog_floor(self.p, k);
            if c < target as i64 {
                m_terms = k;
            }
            // Past this point k*e - log_p(k) is >= target for good: the bound
            // grows by at least e - 1 >= 0 per step and log_p k is flat.
            if k as i64 * e >= target as i64 + ilog_floor(self.p, k) + e + 2 {
                break;
            }
            k += 1;
        }
        let guard = ilog_floor(self.p, m_terms) as u32 + 1;
        let work = target + guard;
        let modulus = pk_pow(self.p, work);
        let out_modulus = pk_pow(self.p, target);
        let mut acc = BigUint::zero();
        let mut xk = x_res.clone() % &modulus;
        for k in 1..=m_terms {
            let s = val_u32(self.p, k);
            let k_unit = k as u64 / self.p.pow(s);
            // x^k is divisible by p^{ke} >= p^s, so the division is exact.
            let divided = &xk / pk_pow(self.p, s);
            let inv = inv_mod_pk(&BigUint::from(k_unit), self.p, work);
            let term = (divided * inv) % &out_modulus;
            if k % 2 == 1 {
                acc = (acc + term) % &out_modulus;
            } else {
                acc = (acc + (&out_modulus - term)) % &out_modulus;
            }
            if k < m_terms {
                xk = (xk * &x_res) % &modulus;
            }
        }
        PadicNumber::from_scaled_residue(self.p, self.cap, 0, acc, target as i64)
    }

    /// Canonical square root: the root whose unit part has least residue
    /// mod p. Returns Ok(None) when no square root exists in Q_p.
    pub fn sqrt(&self) -> PadicResult<Option<PadicNumber>> {
        let (val, unit, rel) = match &self.repr {
            Repr::Zero { .. } => return Err(PadicError::ZeroArgument),
            Repr::Unit {
                val,
                unit,
                rel_prec,
            } => (*val, unit.clone(), *rel_prec),
        };
        if val % 2 != 0 {
            return Ok(None);
        }
        let a0 = (&unit % self.p).to_u64().unwrap();
        let r0 = match sqrt_mod_p(a0, self.p) {
            None => return Ok(None),
            Some(r) => r,
        };
        // Newton lift x -> (x + a/x)/2 doubles the certified digits.
        let m = pk_pow(self.p, rel);
        let inv2 = inv_mod_pk(&BigUint::from(2u32), self.p, rel);
        let mut x = BigUint::from(r0);
        let mut prec = 1u32;
        while prec < rel {
            let inv_x = inv_mod_pk(&x, self.p, rel);
            x = ((&x + (&unit % &m) * inv_x) * &inv2) % &m;
            prec *= 2;
        }
        // Canonical choice: least residue mod p among the two roots.
        let first_digit = (&x % self.p).to_u64().unwrap();
        if first_digit > self.p - first_digit {
            x = (&m - &x) % &m;
        }
        Ok(Some(PadicNumber {
            p: self.p,
            cap: self.cap,
            repr: Repr::Unit {
                val: val / 2,
                unit: x,
                rel_prec: rel,
            },
        }))
    }
}

fn val_u32(p: u64, mut k: u32) -> u32 {
    let mut v = 0;
    while k as u64 % p == 0 {
        k /= p as u32;
        v += 1;
    }
    v
}

fn ilog_floor(p: u64, k: u32) -> i64 {
    let mut v = 0i64;
    let mut acc = p;
    while acc <= k as u64 {
        v += 1;
        acc *= p;
    }
    v
}

/// Square root mod an odd prime via Tonelli-Shanks; None for non-residues.
fn sqrt_mod_p(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if mod_pow(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    if p % 4 == 3 {
        return Some(mod_pow(a, (p + 1) / 4, p));
    }
    let mut q = p - 1;
    let mut s = 0u32;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let mut z = 2;
    while mod_pow(z, (p - 1) / 2, p) == 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = mod_pow(z, q, p);
    let mut t = mod_pow(a, q, p);
    let mut r = mod_pow(a, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0;
        let mut t2 = t;
        while t2 != 1 {
            t2 = t2 * t2 % p;
            i += 1;
        }
        let b = mod_pow(c, 1 << (m - i - 1), p);
        m = i;
        c = b * b % p;
        t = t * c % p;
        r = r * b % p;
    }
    Some(r)
}

fn mod_pow(mut base: u64, mut exp: u64, modulus: u64) -> u64 {
    let mut result = 1u64;
    base %= modulus;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * base % modulus;
        }
        exp >>= 1;
        base = base * base % modulus;
    }
    result
}

impl PartialEq for PadicNumber {
    /// Two elements compare equal iff they agree modulo the smaller of
    /// their certified moduli.
    fn eq(&self, other: &Self) -> bool {
        if self.p != other.p {
            return false;
        }
        let abs = self.abs_prec().min(other.abs_prec());
        if abs < 1 {
            return true;
        }
        let vmin = self
            .valuation_lower_bound()
            .min(other.valuation_lower_bound())
            .min(0);
        let width = (abs - vmin) as u32;
        let m = pk_pow(self.p, width);
        let rep = |x: &PadicNumber| -> BigUint {
            match &x.repr {
                Repr::Zero { .. } => BigUint::zero(),
                Repr::Unit { val, unit, .. } => {
                    (unit * pk_pow(x.p, (val - vmin) as u32)) % &m
                }
            }
        };
        rep(self) == rep(other)
    }
}

impl fmt::Display for PadicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Zero { abs_prec } => write!(f, "O({}^{})", self.p, abs_prec),
            Repr::Unit { val, .. } => {
                let digits = self.digits();
                let mut wrote = false;
                for (i, d) in digits.iter().enumerate() {
                    if *d == 0 {
                        continue;
                    }
                    let e = *val + i as i64;
                    if wrote {
                        write!(f, " + ")?;
                    }
                    match e {
                        0 => write!(f, "{d}")?,
                        1 => {
                            if *d == 1 {
                                write!(f, "{}", self.p)?
                            } else {
                                write!(f, "{}*{}", d, self.p)?
                            }
                        }
                        _ => {
                            if *d == 1 {
                                write!(f, "{}^{}", self.p, e)?
                            } else {
                                write!(f, "{}*{}^{}", d, self.p, e)?
                            }
                        }
                    }
                    wrote = true;
                }
                if !wrote {
                    write!(f, "0")?;
                }
                write!(f, " + O({}^{})", self.p, self.abs_prec())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn ctx(p: u64, n: u32) -> PadicContext {
        PadicContext::new(p, n).unwrap()
    }

    /// Reduce an exact rational mod p^k; panics on p in the denominator.
    fn rational_mod(r: &BigRational, p: u64, k: u32) -> BigUint {
        match rational_val_unit(r, p, k) {
            None => BigUint::zero(),
            Some((v, u)) => {
                assert!(v >= 0, "negative valuation in oracle reduction");
                (u * pk_pow(p, (v as u32).min(k))) % pk_pow(p, k)
            }
        }
    }

    #[test]
    fn carry_case() {
        let c = ctx(5, 8);
        let s = c.from_integer(1).add(&c.from_integer(4)).unwrap();
        assert_eq!(s.valuation(), Some(1));
        assert_eq!(s, c.from_integer(5));
    }

    #[test]
    fn product_against_integer_oracle() {
        let c = ctx(5, 3);
        let a = c.from_integer(11); // 1 + 2*5
        let b = c.from_integer(16); // 1 + 3*5
        let prod = a.mul(&b).unwrap();
        // 11 * 16 = 176 = 51 mod 125 = 1 + 0*5 + 2*25
        assert_eq!(prod.residue_mod(3).unwrap(), BigUint::from(51u32));
        assert_eq!(prod.digits(), vec![1, 0, 2]);
    }

    #[test]
    fn self_division_is_one() {
        let c = ctx(7, 10);
        for n in [2i64, 13, -41, 7 * 7 * 3, 29] {
            let a = c.from_integer(n);
            assert_eq!(a.div(&a).unwrap(), c.one());
        }
    }

    #[test]
    fn division_by_certified_zero_fails() {
        let c = ctx(5, 6);
        let z = c.from_integer(2).sub(&c.from_integer(2)).unwrap();
        assert!(z.is_zero());
        assert_eq!(c.one().div(&z), Err(PadicError::DivisionByZero));
    }

    #[test]
    fn different_primes_rejected() {
        let a = ctx(5, 6).one();
        let b = ctx(7, 6).one();
        assert_eq!(a.add(&b), Err(PadicError::DifferentPrimes(5, 7)));
    }

    #[test]
    fn cancellation_reduces_precision() {
        let c = ctx(3, 6);
        // (1 + 3^4) - 1 is certified to 6 absolute digits, so only 2 relative.
        let a = c.from_integer(1 + 81);
        let d = a.sub(&c.one()).unwrap();
        assert_eq!(d.valuation(), Some(4));
        assert_eq!(d.rel_prec(), 2);
    }

    #[test]
    fn ring_ops_match_rational_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for p in [3u64, 5, 7] {
            let c = ctx(p, 9);
            for _ in 0..350 {
                let x: i64 = rng.gen_range(-10_000..10_000);
                let y: i64 = rng.gen_range(-10_000..10_000);
                let z: i64 = rng.gen_range(1..10_000);
                let (rx, ry, rz) = (
                    BigRational::from_integer(BigInt::from(x)),
                    BigRational::from_integer(BigInt::from(y)),
                    BigRational::from_integer(BigInt::from(z)),
                );
                let sum = c.from_integer(x).add(&c.from_integer(y)).unwrap();
                let prod = c.from_integer(x).mul(&c.from_integer(y)).unwrap();
                let quot = c.from_integer(x).div(&c.from_integer(z));
                let sum_abs = sum.abs_prec().max(0) as u32;
                assert_eq!(
                    sum.residue_mod(sum_abs).unwrap(),
                    rational_mod(&(&rx + &ry), p, sum_abs)
                );
                let prod_abs = prod.abs_prec().max(0) as u32;
                assert_eq!(
                    prod.residue_mod(prod_abs).unwrap(),
                    rational_mod(&(&rx * &ry), p, prod_abs)
                );
                let q = &rx / &rz;
                if let Ok(quot) = quot {
                    if quot.valuation().map_or(true, |v| v >= 0) {
                        let k = quot.abs_prec().max(0) as u32;
                        let den_val = rational_val_unit(&rz, p, 1).unwrap().0;
                        if den_val == 0 {
                            assert_eq!(quot.residue_mod(k).unwrap(), rational_mod(&q, p, k));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn log_of_one_and_minus_one_vanish() {
        let c = ctx(5, 10);
        let br = BranchConstant::iwasawa(&c);
        assert!(c.one().log(&br).unwrap().is_zero());
        assert!(c.from_integer(-1).log(&br).unwrap().is_zero());
    }

    #[test]
    fn log_matches_rational_series_oracle() {
        // log(1+3) mod 3^8 via 20 exact-rational series terms.
        let c = ctx(3, 8);
        let br = BranchConstant::iwasawa(&c);
        let mut acc = BigRational::from_integer(BigInt::from(0));
        for k in 1..=20i64 {
            let term = BigRational::new(BigInt::from(3).pow(k as u32), BigInt::from(k));
            if k % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let expected = rational_mod(&acc, 3, 8);
        let got = c.from_integer(4).log(&br).unwrap();
        assert_eq!(got.residue_mod(8).unwrap(), expected);
    }

    #[test]
    fn log_is_a_homomorphism() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for p in [3u64, 5, 7] {
            let c = ctx(p, 9);
            let br = BranchConstant::new(c.from_integer(3)); // a nontrivial branch
            for _ in 0..40 {
                let a: i64 = loop {
                    let t = rng.gen_range(2..2000);
                    if t % p as i64 != 0 {
                        break t;
                    }
                };
                let b: i64 = rng.gen_range(1..500) * p as i64;
                let u = c.from_integer(a);
                let v = c.from_integer(b);
                let lhs = u.mul(&v).unwrap().log(&br).unwrap();
                let rhs = u.log(&br).unwrap().add(&v.log(&br).unwrap()).unwrap();
                assert_eq!(lhs, rhs, "p={p} a={a} b={b}");
            }
        }
    }

    #[test]
    fn log_of_powers_scales() {
        let c = ctx(7, 9);
        let br = BranchConstant::iwasawa(&c);
        let u = c.from_integer(2);
        let lu = u.log(&br).unwrap();
        for n in [-20i64, -3, 1, 2, 5, 20] {
            let lhs = u.pow(n).unwrap().log(&br).unwrap();
            let rhs = lu.mul(&c.from_integer(n)).unwrap();
            assert_eq!(lhs, rhs, "n={n}");
        }
    }

    #[test]
    fn teichmueller_fixed_point_and_defining_equation() {
        let c = ctx(5, 8);
        // 1-units are fixed.
        let u = c.from_integer(6);
        assert_eq!(u.teichmueller().unwrap(), c.one());
        // omega(2) is the 4th root of unity congruent to 2 mod 5.
        let w = c.from_integer(2).teichmueller().unwrap();
        assert_eq!(w.pow(4).unwrap(), c.one());
        assert_eq!(w.residue_mod(1).unwrap(), BigUint::from(2u32));
        // p = 3: the only root of unity congruent to 2 is -1.
        let c3 = ctx(3, 8);
        let w3 = c3.from_integer(2).teichmueller().unwrap();
        assert_eq!(w3, c3.from_integer(-1));
    }

    #[test]
    fn sqrt_examples() {
        let c = ctx(5, 8);
        assert_eq!(c.one().sqrt().unwrap().unwrap(), c.one());
        let r = c.from_integer(-1).sqrt().unwrap().unwrap();
        assert_eq!(r.residue_mod(1).unwrap(), BigUint::from(2u32));
        assert_eq!(r.mul(&r).unwrap(), c.from_integer(-1));
        let c3 = ctx(3, 8);
        assert!(c3.from_integer(2).sqrt().unwrap().is_none());
        // Odd valuation has no square root.
        assert!(c3.from_integer(3).sqrt().unwrap().is_none());
    }

    #[test]
    fn sqrt_of_squares_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for p in [3u64, 5, 7, 13] {
            let c = ctx(p, 8);
            for _ in 0..30 {
                let n: i64 = rng.gen_range(1..3000);
                let r = c.from_integer(n);
                if r.is_zero() {
                    continue;
                }
                let s = r.mul(&r).unwrap().sqrt().unwrap().unwrap();
                assert!(s == r || s == r.neg(), "p={p} n={n}");
            }
        }
    }

    #[test]
    fn equality_is_modulo_joint_precision() {
        let c = ctx(5, 8);
        let a = c.from_integer(2);
        let b = c.from_integer(2 + 5i64.pow(6)).truncate_abs(6).unwrap();
        // They agree mod 5^6, which is the smaller certified modulus.
        assert_eq!(a, b);
        let d = c.from_integer(2 + 5i64.pow(3));
        assert_ne!(a, d);
    }
}
