//! Property tests for the arithmetic invariants: exact-oracle agreement for
//! the ring operations, homomorphism laws for the logarithm, defining
//! equations for Teichmueller lifts and square roots, and the series
//! rescaling and factoring identities.

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use quadchab::hensel::{self, RootStatus, SearchConfig};
use quadchab::mseries::{symmetric_factor, Scaling, SeriesSystem, SymmetryMode, TailBound, TruncatedSeries};
use quadchab::padic::{BranchConstant, PadicContext, PadicNumber};
use rand::{Rng, SeedableRng};

fn ctx(p: u64, n: u32) -> PadicContext {
    PadicContext::new(p, n).unwrap()
}

/// Reduce an exact rational with p-free denominator mod p^k.
fn rational_residue(r: &BigRational, p: u64, k: u32) -> num_bigint::BigUint {
    let pk = BigInt::from(p).pow(k);
    let num = r.numer().clone();
    let den = r.denom().clone();
    let inv = mod_inverse(&den, &pk);
    let v = (num * inv) % &pk;
    ((v % &pk + &pk) % &pk).to_biguint().unwrap()
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    use num_integer::Integer;
    let e = a.extended_gcd(m);
    ((e.x % m) + m) % m
}

#[test]
fn ring_ops_agree_with_exact_rationals_on_1000_triples() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000);
    let mut checked = 0;
    while checked < 1000 {
        let p = [3u64, 5, 7, 13][rng.gen_range(0..4)];
        let c = ctx(p, 9);
        let (x, y, z): (i64, i64, i64) = (
            rng.gen_range(-100_000..100_000),
            rng.gen_range(-100_000..100_000),
            rng.gen_range(1..100_000),
        );
        if z % p as i64 == 0 {
            continue;
        }
        let (rx, ry, rz) = (
            BigRational::from_integer(x.into()),
            BigRational::from_integer(y.into()),
            BigRational::from_integer(z.into()),
        );
        let sum = c.from_integer(x).add(&c.from_integer(y)).unwrap();
        let diff = c.from_integer(x).sub(&c.from_integer(y)).unwrap();
        let prod = c.from_integer(x).mul(&c.from_integer(y)).unwrap();
        let quot = c.from_integer(x).div(&c.from_integer(z)).unwrap();
        for (got, exact) in [
            (sum, &rx + &ry),
            (diff, &rx - &ry),
            (prod, &rx * &ry),
            (quot, &rx / &rz),
        ] {
            let k = got.abs_prec().max(0) as u32;
            if k == 0 || got.valuation_lower_bound() < 0 {
                continue;
            }
            assert_eq!(
                got.residue_mod(k).unwrap(),
                rational_residue(&exact, p, k),
                "p={p} x={x} y={y} z={z}"
            );
        }
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_is_homomorphic_for_any_branch(
        a in 2i64..5000,
        b in 1i64..500,
        branch in -50i64..50,
        pi in 0usize..3,
    ) {
        let p = [3u64, 5, 7][pi];
        prop_assume!(a % p as i64 != 0);
        let c = ctx(p, 9);
        let br = BranchConstant::new(c.from_integer(branch));
        let u = c.from_integer(a);
        let v = c.from_integer(b * p as i64);
        let lhs = u.mul(&v).unwrap().log(&br).unwrap();
        let rhs = u.log(&br).unwrap().add(&v.log(&br).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn log_scales_on_powers(n in -20i64..=20, a in 2i64..2000) {
        let p = 5u64;
        prop_assume!(a % p as i64 != 0);
        let c = ctx(p, 9);
        let br = BranchConstant::iwasawa(&c);
        let u = c.from_integer(a);
        let lhs = u.pow(n).unwrap().log(&br).unwrap();
        let rhs = u.log(&br).unwrap().mul(&c.from_integer(n)).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn teichmueller_is_a_root_of_unity(a in 1i64..10_000, pi in 0usize..3) {
        let p = [3u64, 5, 7][pi];
        prop_assume!(a % p as i64 != 0);
        let c = ctx(p, 8);
        let w = c.from_integer(a).teichmueller().unwrap();
        prop_assert_eq!(w.pow(p as i64 - 1).unwrap(), c.one());
        prop_assert_eq!(
            w.residue_mod(1).unwrap(),
            c.from_integer(a).residue_mod(1).unwrap()
        );
    }

    #[test]
    fn sqrt_of_square_is_plus_minus_root(r in 1i64..50_000, pi in 0usize..3) {
        let p = [3u64, 5, 7][pi];
        let c = ctx(p, 8);
        let x = c.from_integer(r);
        prop_assume!(!x.is_zero());
        let s = x.mul(&x).unwrap().sqrt().unwrap().unwrap();
        prop_assert!(s == x || s == x.neg());
    }

    #[test]
    fn even_pair_factor_round_trips(
        c1 in -40i64..40,
        c2 in -40i64..40,
        c3 in -40i64..40,
    ) {
        prop_assume!(c1 != 0 || c2 != 0 || c3 != 0);
        let c = ctx(5, 10);
        let mut terms = Vec::new();
        for (i, ci) in [(1u32, c1), (2, c2), (3, c3)] {
            if ci != 0 {
                terms.push((vec![2 * i, 0], ci));
                terms.push((vec![0, 2 * i], -ci));
            }
        }
        let s = TruncatedSeries::from_int_terms(&c, 2, &terms).unwrap();
        let f = symmetric_factor(&s, SymmetryMode::EvenPair).unwrap();
        let factor = TruncatedSeries::from_int_terms(
            &c,
            2,
            &[(vec![2, 0], 1), (vec![0, 2], -1)],
        )
        .unwrap();
        let back = factor.mul(&f.quotient).unwrap();
        for (e, coeff) in s.terms() {
            let got = back.coefficient(e).cloned().unwrap_or_else(|| c.zero());
            prop_assert_eq!(&got, coeff);
        }
    }

    #[test]
    fn anti_diagonal_division_inverts_multiplication(
        qcoeffs in proptest::collection::vec(-30i64..30, 6),
    ) {
        prop_assume!(qcoeffs.iter().any(|&x| x != 0));
        let c = ctx(7, 10);
        // s = (t1 - t2) * q for a random quotient q of degree <= 2.
        let exps: [[u32; 2]; 6] = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]];
        let qterms: Vec<(Vec<u32>, i64)> = exps
            .iter()
            .zip(&qcoeffs)
            .filter(|(_, &v)| v != 0)
            .map(|(e, &v)| (e.to_vec(), v))
            .collect();
        let q = TruncatedSeries::from_int_terms(&c, 2, &qterms).unwrap();
        let factor =
            TruncatedSeries::from_int_terms(&c, 2, &[(vec![1, 0], 1), (vec![0, 1], -1)]).unwrap();
        let s = factor.mul(&q).unwrap();
        let f = symmetric_factor(&s, SymmetryMode::AntiDiagonal).unwrap();
        for (e, coeff) in q.terms() {
            let got = f.quotient.coefficient(e).cloned().unwrap_or_else(|| c.zero());
            prop_assert_eq!(&got, coeff);
        }
        for (e, coeff) in f.quotient.terms() {
            if !coeff.is_zero() {
                let want = q.coefficient(e).cloned().unwrap_or_else(|| c.zero());
                prop_assert_eq!(coeff, &want);
            }
        }
    }

    #[test]
    fn branch_parameter_scales_log_of_p_powers(v in -4i64..=4, bc in -30i64..30) {
        let c = ctx(5, 10);
        let branch = BranchConstant::new(c.from_integer(bc));
        let x = c.one().shift_val(v);
        let got = x.log(&branch).unwrap();
        let want = c.from_integer(bc).mul(&c.from_integer(v)).unwrap();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn rescale_commutes_with_evaluation(
        coeffs in proptest::collection::vec(-60i64..60, 6),
        t1 in 0i64..20,
        t2 in 0i64..20,
    ) {
        prop_assume!(coeffs.iter().any(|&x| x != 0));
        let c = ctx(5, 10);
        let exps: [[u32; 2]; 6] = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]];
        let terms: Vec<(Vec<u32>, PadicNumber)> = exps
            .iter()
            .zip(&coeffs)
            .filter(|(_, &v)| v != 0)
            .map(|(e, &v)| (e.to_vec(), c.from_integer(v)))
            .collect();
        let s = TruncatedSeries::new(5, 2, 3, Scaling::Local, TailBound::AtLeast(3), terms)
            .unwrap();
        let sys = SeriesSystem::new(vec![s.clone()]).unwrap();
        let (norm, exponents) = sys.rescale_and_normalize().unwrap();
        let pt = [c.from_integer(t1), c.from_integer(t2)];
        let scaled_pt = [pt[0].shift_val(1), pt[1].shift_val(1)];
        let raw = s.evaluate(&scaled_pt).unwrap();
        let cooked = norm.components()[0]
            .evaluate(&pt)
            .unwrap()
            .shift_val(exponents[0]);
        prop_assert_eq!(raw, cooked);
    }
}

/// Soundness of certified reports: the approximation solves the system at
/// its certified modulus and the hypothesis held at the lift point.
#[test]
fn certified_reports_are_sound() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
    let mut lifted = 0;
    for _ in 0..60 {
        let p = [3u64, 5, 7][rng.gen_range(0..3)];
        let c = ctx(p, 12);
        let m = rng.gen_range(1..=2usize);
        let mut comps = Vec::new();
        for _ in 0..m {
            let mut terms = Vec::new();
            for e in 0..=3u32 {
                let coef: i64 = rng.gen_range(-20..20);
                if coef != 0 {
                    let mut exps = vec![0u32; m];
                    exps[rng.gen_range(0..m)] = e;
                    terms.push((exps, coef));
                }
            }
            if terms.is_empty() {
                terms.push((vec![0; m], 1));
            }
            comps.push(terms);
        }
        let Ok(sys) = SeriesSystem::from_int_polys(&c, m, &comps) else {
            continue;
        };
        if !sys.is_normalized() {
            continue;
        }
        let cfg = SearchConfig::new(4).unwrap();
        let Ok(reports) = hensel::solve_system(&sys, &cfg) else {
            continue;
        };
        for rep in reports {
            if rep.status != RootStatus::Certified {
                continue;
            }
            lifted += 1;
            let values = sys.evaluate(&rep.approximation).unwrap();
            for v in values {
                assert!(
                    v.valuation_lower_bound() >= rep.certified_exponent.min(v.abs_prec()),
                    "certified root does not solve the system: {v}"
                );
            }
        }
    }
    assert!(lifted > 20, "too few certified roots exercised");
}

/// Distinct certified roots are separated beyond their uniqueness radii.
#[test]
fn uniqueness_radii_separate_roots() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(777);
    let mut pairs = 0;
    for _ in 0..80 {
        let p = [3u64, 5][rng.gen_range(0..2)];
        let c = ctx(p, 12);
        let a: i64 = rng.gen_range(1..30);
        let b: i64 = rng.gen_range(1..30);
        if a == b {
            continue;
        }
        // (x - a)(x - b): two certified roots.
        let comps = vec![vec![
            (vec![2u32], 1i64),
            (vec![1], -(a + b)),
            (vec![0], a * b),
        ]];
        let sys = SeriesSystem::from_int_polys(&c, 1, &comps).unwrap();
        if !sys.is_normalized() {
            continue;
        }
        let cfg = SearchConfig::new(4).unwrap();
        let Ok(reports) = hensel::solve_system(&sys, &cfg) else {
            continue;
        };
        let certified: Vec<_> = reports
            .iter()
            .filter(|r| r.status == RootStatus::Certified)
            .collect();
        for i in 0..certified.len() {
            for j in (i + 1)..certified.len() {
                let ri = certified[i].residue_mod(4).unwrap();
                let rj = certified[j].residue_mod(4).unwrap();
                let di = certified[i].uniqueness_radius.unwrap();
                let dj = certified[j].uniqueness_radius.unwrap();
                let ord = hensel::vec_ord(&ri, &rj, p, 4);
                assert!(
                    ord <= di.max(dj),
                    "roots {ri:?}, {rj:?} not separated: ord {ord} > max radius"
                );
                pairs += 1;
            }
        }
    }
    assert!(pairs > 10, "too few root pairs exercised");
}
