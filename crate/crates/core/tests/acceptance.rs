//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use epi_core::asymptotics::{knessl_g, predicted_leading_term, tulino_verdu_compare, DEFAULT_SUPPORT_BUDGET};
use epi_core::discrimination::{cap_discrimination, cap_via_series};
use epi_core::dist::{binomial_pmf, BernoulliParam, IntegerPmf};
use epi_core::epi::{
    binomial_entropies, epi_gap, epi_grid_check, formula_thresholds, gap_sweep, p_grid, semi_asymptotic_condition,
    step_margins, sufficient_step_check,
};
use epi_core::moments::{
    bernoulli_cumulants, central_moment_brute, central_moment_closed, faa_di_bruno_poly, gamma_l, harmonic_validity,
};
use epi_core::polycert::{build_g, certify, rat, reference_g, Substitution};
use epi_core::precision::{ExtReal, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn prec50() -> Precision {
    Precision::new(50).unwrap()
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn tenths(precision: Precision) -> Vec<BernoulliParam> {
    (1..=9).map(|k| BernoulliParam::from_ratio(k, 10, precision).unwrap()).collect()
}

fn sweep_one_two() -> Outcome {
    let precision = prec50();
    let ps = p_grid(&ExtReal::parse("0.01", precision).unwrap(), &ExtReal::parse("0.99", precision).unwrap(), 197)
        .map_err(|e| e.to_string())?;
    let rows = gap_sweep(1, 2, &ps);
    check(rows.len() == 197, || format!("{} rows", rows.len()))?;
    let at = |p: f64| {
        rows.iter().min_by(|a, b| (a.p.to_f64() - p).abs().total_cmp(&(b.p.to_f64() - p).abs())).unwrap().gap.to_f64()
    };
    let (mid, lo, hi) = (at(0.5), at(0.05), at(0.95));
    check((mid - 0.3167).abs() < 1e-3, || format!("gap(0.5) = {mid}"))?;
    check(lo < 0.0 && hi < 0.0, || format!("gap(0.05) = {lo}, gap(0.95) = {hi}"))?;
    let changes = rows.windows(2).filter(|w| w[0].gap.is_negative() != w[1].gap.is_negative()).count();
    check(changes == 2, || format!("{changes} sign changes"))?;
    Ok(format!("gap(0.5) = {mid:.6}, gap(0.05) = {lo:.3e}, gap(0.95) = {hi:.3e}, 2 sign changes"))
}

fn threshold_half() -> Outcome {
    let precision = prec50();
    let p = BernoulliParam::from_ratio(1, 2, precision).unwrap();
    let t = p.omega().map_err(|e| e.to_string())?;
    let (a, b) = formula_thresholds(&t);
    check(a == 7 && b == 7, || format!("formula thresholds ({a}, {b})"))?;
    let margins = step_margins(&p, 2000);
    let bad: Vec<u64> = margins.iter().filter(|s| s.n >= 7 && !s.holds).map(|s| s.n).collect();
    check(bad.is_empty(), || format!("step check fails at {bad:?}"))?;
    for n in [7, 2000] {
        let direct = sufficient_step_check(n, &p).map_err(|e| e.to_string())?;
        check(direct.holds, || format!("sufficient_step_check({n}) false"))?;
    }
    let eps = precision.epsilon();
    let grid = epi_grid_check(6, 6, &p);
    let worst = grid.iter().flatten().map(|r| r.gap.clone()).reduce(|a, b| a.min(b)).unwrap();
    check(worst >= -eps, || format!("min grid gap {}", worst.to_decimal(10)))?;
    Ok(format!("formulas (7, 7), step check on [7, 2000], min 6x6 gap {}", worst.to_decimal(6)))
}

fn single_trial_grid() -> Outcome {
    let precision = prec50();
    // k/98 for k = 1..=97; the midpoint k = 49 is p = 1/2 exactly.
    let mut worst = f64::NEG_INFINITY;
    for k in 1..=97 {
        let p = BernoulliParam::from_ratio(k, 98, precision).unwrap();
        let gap = epi_gap(1, 1, &p).gap;
        if k == 49 {
            check(gap.abs() < ExtReal::parse("1e-30", precision).unwrap(), || {
                format!("|gap(0.5)| = {}", gap.to_decimal(5))
            })?;
        } else {
            check(gap.is_negative(), || format!("gap({k}/98) = {}", gap.to_decimal(10)))?;
            worst = worst.max(gap.to_f64());
        }
    }
    Ok(format!("96 off-centre points negative (max {worst:.3e}), |gap(1/2)| < 1e-30"))
}

fn random_pmf(rng: &mut ChaCha8Rng, offset: i64, len: usize, precision: Precision) -> IntegerPmf {
    let weights = (0..len).map(|_| ExtReal::from_f64(rng.gen_range(0.1..1.0), precision)).collect();
    IntegerPmf::from_unnormalized(offset, weights, precision).unwrap()
}

fn discrimination_identity() -> Outcome {
    let precision = prec50();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let tol = ExtReal::parse("1e-13", precision).unwrap();
    let limit = ExtReal::parse("1e-12", precision).unwrap();
    let mut worst = ExtReal::zero(precision);
    let mut max_terms = 0;
    for case in 0..200 {
        let len = rng.gen_range(1..=64);
        let offset = rng.gen_range(-5..=5);
        let first = random_pmf(&mut rng, offset, len, precision);
        let second = random_pmf(&mut rng, offset, len, precision);
        let p = BernoulliParam::new(ExtReal::from_f64(rng.gen_range(0.05..0.95), precision)).unwrap();
        let direct = cap_discrimination(&first, &second, &p).map_err(|e| format!("case {case}: {e}"))?;
        let series = cap_via_series(&first, &second, &p, &tol).map_err(|e| format!("case {case}: {e}"))?;
        let diff = (&series.partial_sum - &direct).abs();
        check(diff <= limit, || format!("case {case}: |diff| = {}", diff.to_decimal(5)))?;
        max_terms = max_terms.max(series.terms_used);
        worst = worst.max(diff);
    }
    Ok(format!("200 cases, max |diff| = {}, max terms {max_terms}", worst.to_decimal(3)))
}

fn certificates() -> Outcome {
    let g = build_g().map_err(|e| e.to_string())?;
    check(g == reference_g(), || "g differs from the reference polynomial".into())?;
    for sub in [Substitution::A, Substitution::APrime, Substitution::B, Substitution::C] {
        let report = certify(sub).map_err(|e| e.to_string())?;
        check(report.all_nonneg, || format!("{} has {} negative coefficients", sub.id(), report.negative_count()))?;
    }
    let a = certify(Substitution::A).map_err(|e| e.to_string())?.polynomial;
    let m6: Vec<_> = (0..=a.degree(epi_core::polycert::Axis::Y)).map(|j| a.coeff(6, j)).collect();
    let expected = [rat(70, 1), rat(2030, 1), rat(5614, 5)];
    check(m6.len() >= 3 && m6[..3] == expected && m6[3..].iter().all(|c| *c == rat(0, 1)), || {
        format!("m^6 coefficients {m6:?}")
    })?;
    let control = certify(Substitution::Control).map_err(|e| e.to_string())?;
    check(!control.all_nonneg, || "control substitution certified".into())?;
    Ok(format!(
        "g exact, A/A'/B/C nonnegative, m^6 = 5614/5 t^2 + 2030 t + 70, control has {} negative coefficients",
        control.negative_count()
    ))
}

fn moment_forms() -> Outcome {
    let precision = prec50();
    let limit = ExtReal::parse("1e-35", precision).unwrap();
    let mut worst = ExtReal::zero(precision);
    for p in tenths(precision) {
        for n in 1..=200u64 {
            let pmf = binomial_pmf(n, &p);
            let mean = p.p() * &ExtReal::from_u64(n, precision);
            for k in 2..=7 {
                let closed = central_moment_closed(n, &p, k).map_err(|e| e.to_string())?;
                let brute = central_moment_brute(&pmf, k, &mean);
                let diff = (&closed - &brute).abs();
                check(diff <= limit, || format!("n={n} k={k} p={}: {}", p.p().to_decimal(2), diff.to_decimal(3)))?;
                worst = worst.max(diff);
            }
        }
        let kappa = bernoulli_cumulants(&p, 8).map_err(|e| e.to_string())?;
        let polys: Vec<_> =
            (2..=8).map(|k| faa_di_bruno_poly(k, &kappa)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        for j in 1..=64u64 {
            let pmf = binomial_pmf(j, &p);
            let mean = p.p() * &ExtReal::from_u64(j, precision);
            for poly in &polys {
                let diff = (poly.eval(j, precision) - &central_moment_brute(&pmf, poly.k, &mean)).abs();
                check(diff <= limit, || format!("Faà di Bruno k={} j={j}: {}", poly.k, diff.to_decimal(3)))?;
                worst = worst.max(diff);
            }
        }
    }
    Ok(format!("closed forms and Faà di Bruno polynomials agree, max |diff| = {}", worst.to_decimal(3)))
}

fn moment_bounds() -> Outcome {
    let precision = prec50();
    let eps = precision.epsilon();
    let mut checked = 0;
    for p in tenths(precision) {
        let h = binomial_entropies(&p, 500);
        let mut sums = [ExtReal::zero(precision), ExtReal::zero(precision), ExtReal::zero(precision)];
        for n in 1..=500u64 {
            for (l, sum) in (1..=3).zip(sums.iter_mut()) {
                *sum += &gamma_l(n, &p, l).map_err(|e| e.to_string())?;
                check(*sum <= &h[n as usize] + &eps, || {
                    format!("Γ bound exceeds entropy at n={n} l={l} p={}", p.p().to_decimal(2))
                })?;
                checked += 1;
            }
        }
    }
    let half = BernoulliParam::from_ratio(1, 2, precision).unwrap();
    let validity = harmonic_validity(500, &half, 2).map_err(|e| e.to_string())?;
    check(validity.violations == [1, 2, 3], || format!("harmonic violations {:?}", validity.violations))?;
    check(validity.holds_from == Some(4), || format!("harmonic bound holds from {:?}", validity.holds_from))?;
    Ok(format!("{checked} Γ bounds below entropy; harmonic bound holds on [4, 500], fails at n = 1, 2, 3"))
}

fn knessl_constants() -> Outcome {
    let precision = Precision::new(30).unwrap();
    let n = 4096u64;
    let nf = ExtReal::from_u64(n, precision);

    let half = IntegerPmf::from_counts(0, &[1, 1], precision).unwrap();
    let g = knessl_g(&half, n, DEFAULT_SUPPORT_BUDGET).map_err(|e| e.to_string())?;
    let scaled = (g * &nf.square()).to_f64();
    let target = -1.0 / 12.0;
    check((scaled / target - 1.0).abs() < 0.05, || format!("n^2 g(n) at p=0.5 is {scaled}"))?;

    let p3 = BernoulliParam::from_ratio(3, 10, precision).unwrap();
    let skew = IntegerPmf::new(0, vec![p3.q().clone(), p3.p().clone()], precision).unwrap();
    let lead = predicted_leading_term(&skew).map_err(|e| e.to_string())?;
    check(lead.cumulant_order == 3 && lead.exponent == 1, || format!("leading term {lead:?}"))?;
    let g = knessl_g(&skew, n, DEFAULT_SUPPORT_BUDGET).map_err(|e| e.to_string())?;
    let scaled3 = (g * &nf).to_f64();
    let target3 = -lead.constant.to_f64();
    check((scaled3 / target3 - 1.0).abs() < 0.05, || format!("n g(n) at p=0.3 is {scaled3}, target {target3}"))?;
    Ok(format!("n^2 g = {scaled:.6} (target {target:.6}); n g = {scaled3:.6} (target {target3:.6})"))
}

fn factor_two_bound() -> Outcome {
    let precision = Precision::new(30).unwrap();
    let p = BernoulliParam::from_ratio(1, 2, precision).unwrap();
    let sigma = ExtReal::parse("1e-3", precision).unwrap();
    let tol = ExtReal::parse("1e-10", precision).unwrap();
    let slack = ExtReal::parse("1e-4", precision).unwrap();
    let rows = tulino_verdu_compare(&p, &sigma, 8..=64, &tol).map_err(|e| e.to_string())?;
    check(rows.len() == 57, || format!("{} rows", rows.len()))?;
    let mut tightest = f64::INFINITY;
    for row in &rows {
        let margin = &row.increment - &(&row.log_ratio - &slack);
        check(!margin.is_negative(), || format!("n={}: margin {}", row.n, margin.to_decimal(5)))?;
        tightest = tightest.min(margin.to_f64());
    }
    Ok(format!("increment ≥ ln(n/(n-1)) - 1e-4 on [8, 64], smallest margin {tightest:.3e}"))
}

fn semi_asymptotic() -> Outcome {
    let precision = prec50();
    let small =
        semi_asymptotic_condition(1, &BernoulliParam::parse("0.01", precision).unwrap()).map_err(|e| e.to_string())?;
    let half = semi_asymptotic_condition(1, &BernoulliParam::from_ratio(1, 2, precision).unwrap())
        .map_err(|e| e.to_string())?;
    check(!small.holds, || "holds at (1, 0.01)".into())?;
    check(half.holds, || "fails at (1, 0.5)".into())?;
    Ok(format!(
        "(1, 0.01): {} vs {} false; (1, 0.5): {} vs {} true",
        small.entropy.to_decimal(6),
        small.gaussian_entropy.to_decimal(6),
        half.entropy.to_decimal(6),
        half.gaussian_entropy.to_decimal(6)
    ))
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { name: "sweep f(1,2,p), 197 points", budget: Duration::from_secs(5), run: sweep_one_two },
        Criterion { name: "threshold at p = 0.5", budget: Duration::from_secs(120), run: threshold_half },
        Criterion { name: "f(1,1,p) sign on a 97-point grid", budget: Duration::from_secs(10), run: single_trial_grid },
        Criterion {
            name: "series identity, 200 random cases",
            budget: Duration::from_secs(60),
            run: discrimination_identity,
        },
        Criterion { name: "positivity certificates", budget: Duration::from_secs(30), run: certificates },
        Criterion { name: "central moment closed forms", budget: Duration::from_secs(60), run: moment_forms },
        Criterion { name: "moment-based entropy bounds", budget: Duration::from_secs(60), run: moment_bounds },
        Criterion { name: "leading asymptotic constants", budget: Duration::from_secs(120), run: knessl_constants },
        Criterion { name: "smoothed entropy increments", budget: Duration::from_secs(300), run: factor_two_bound },
        Criterion { name: "semi-asymptotic condition", budget: Duration::from_secs(1), run: semi_asymptotic },
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut stdout = std::io::stdout().lock();
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > c.budget => Err(format!("took {elapsed:.2?}, budget {:?}", c.budget)),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += outcome.is_err() as usize;
        writeln!(stdout, "{tag} criterion {:>2}: {} [{elapsed:.2?}] {detail}", i + 1, c.name).unwrap();
    }
    writeln!(stdout, "acceptance: {} passed, {failed} failed", criteria.len() - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
