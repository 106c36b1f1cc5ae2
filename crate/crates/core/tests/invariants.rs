use epi_core::discrimination::{cap_discrimination, cap_via_series, tri_discrimination};
use epi_core::dist::{binomial_pmf, convolve, entropy, shift, BernoulliParam, IntegerPmf};
use epi_core::epi::epi_gap;
use epi_core::moments::{binomial_central_moment, central_moment_closed, h_hat, taylor_lower_bound};
use epi_core::polycert::{build_g, rat, shift_expand, Rational};
use epi_core::precision::{ExtReal, Precision};
use proptest::prelude::*;

fn prec() -> Precision {
    Precision::new(30).unwrap()
}

fn close(a: &ExtReal, b: &ExtReal, tol: &str) -> bool {
    (a - b).abs() <= ExtReal::parse(tol, a.precision()).unwrap()
}

fn pmf_strategy(max_len: usize) -> impl Strategy<Value = IntegerPmf> {
    (-20i64..20, prop::collection::vec(1u64..1000, 1..=max_len))
        .prop_map(|(offset, counts)| IntegerPmf::from_counts(offset, &counts, prec()).unwrap())
}

fn param(num: i64) -> BernoulliParam {
    BernoulliParam::from_ratio(num, 1000, prec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn entropy_is_shift_invariant(pmf in pmf_strategy(12), k in -50i64..50) {
        prop_assert!(close(&entropy(&pmf), &entropy(&shift(&pmf, k)), "1e-25"));
    }

    #[test]
    fn convolution_keeps_mass_and_raises_entropy(a in pmf_strategy(10), b in pmf_strategy(10)) {
        let c = convolve(&a, &b).unwrap();
        prop_assert!(close(&c.total_mass(), &ExtReal::one(prec()), "1e-25"));
        prop_assert_eq!(c.offset(), a.offset() + b.offset());
        let h = entropy(&c);
        prop_assert!(h >= entropy(&a).max(entropy(&b)) - &prec().epsilon());
    }

    #[test]
    fn gap_is_symmetric_and_reflects(m in 1u64..12, n in 1u64..12, k in 1i64..1000) {
        let p = param(k);
        let fwd = epi_gap(m, n, &p);
        prop_assert_eq!(&fwd.gap, &epi_gap(n, m, &p).gap);
        prop_assert!(close(&fwd.gap, &epi_gap(m, n, &p.reflected()).gap, "1e-20"));
    }

    #[test]
    fn series_matches_direct(a in pmf_strategy(8), b in pmf_strategy(8), k in 50i64..950) {
        let p = param(k);
        let direct = cap_discrimination(&a, &b, &p).unwrap();
        prop_assert!(!direct.is_negative());
        if a.offset() == b.offset() && a.len() == b.len() {
            let tol = ExtReal::parse("1e-15", prec()).unwrap();
            let series = cap_via_series(&a, &b, &p, &tol).unwrap();
            prop_assert!(close(&series.partial_sum, &direct, "1e-14"));
        }
    }

    #[test]
    fn triangular_discrimination_decreases(a in pmf_strategy(8), b in pmf_strategy(8), k in 50i64..950) {
        let p = param(k);
        let d1 = tri_discrimination(&a, &b, &p, 1).unwrap();
        let d2 = tri_discrimination(&a, &b, &p, 2).unwrap();
        prop_assert!(d2 <= &d1 + &prec().epsilon());
    }

    #[test]
    fn taylor_bound_lies_below(x in 0u32..=1000, k in 1i64..1000, l in 1u32..=4) {
        let p = param(k);
        let x = ExtReal::from_ratio(x as i64, 1000, prec());
        let lower = taylor_lower_bound(&x, &p, l).unwrap();
        prop_assert!(lower <= &h_hat(&x, &p) + &prec().epsilon());
    }

    #[test]
    fn closed_moments_match_ladder(n in 1u64..80, k in 1i64..1000, order in 2u32..=7) {
        let p = param(k);
        let closed = central_moment_closed(n, &p, order).unwrap();
        prop_assert!(close(&closed, &binomial_central_moment(n, &p, order), "1e-18"));
        let brute = epi_core::moments::central_moment_brute(&binomial_pmf(n, &p), order, &(p.p() * &ExtReal::from_u64(n, prec())));
        prop_assert!(close(&closed, &brute, "1e-18"));
    }

    #[test]
    fn shift_expansion_evaluates_consistently(
        a in (1i64..500, 1i64..50),
        b in 0i64..20,
        m0 in (0i64..100, 1i64..20),
        t0 in (0i64..100, 1i64..20),
    ) {
        let g = build_g().unwrap();
        let (a, m0, t0) = (rat(a.0, a.1), rat(m0.0, m0.1), rat(t0.0, t0.1));
        let b: Rational = rat(b, 1);
        let shifted = shift_expand(&g, &a, &b);
        let n = &a * &t0 + &b + &m0;
        prop_assert_eq!(shifted.eval(&m0, &t0), g.eval(&n, &t0));
    }
}
