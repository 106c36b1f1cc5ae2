//! Large-`n` behavior of entropies of IID sums and Gaussian-smoothed sums.
//!
//! `g(n) = H(X^(n)) - ½ ln(2πe nσ²)` has leading term
//! `-κ_{N+1}² / (2 (N+1)! σ^{2N+2}) · n^{-(N-1)}`, where `κ_3 = .. = κ_N = 0`
//! and `κ_{N+1} ≠ 0`. Only this leading constant is predicted; higher-order
//! coefficients are treated as fitted residuals.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use num_bigint::BigUint;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{binomial_pmf, entropy, iid_sum_len, iid_sum_pmf, BernoulliParam, IntegerPmf};
use crate::epi::gaussian_entropy;
use crate::error::{EpiError, Result};
use crate::moments::CumulantSet;
use crate::precision::ExtReal;
use crate::quadrature::{integrate, GaussLegendre};

/// Default cap on the support size of `X^(n)` for exact convolution.
pub const DEFAULT_SUPPORT_BUDGET: u64 = 1 << 16;

/// Highest cumulant order inspected by [`predicted_leading_term`].
pub const MAX_CUMULANT_ORDER: usize = 12;

#[derive(Clone, Debug, Serialize)]
pub struct KnesslProfile {
    pub base: String,
    pub sigma2: ExtReal,
    pub kappa: CumulantSet,
    pub g_values: BTreeMap<u64, ExtReal>,
    /// Smallest tested `n` from which every tested `g(n)` is negative.
    pub onset: Option<u64>,
}

fn require_nondegenerate(base: &IntegerPmf) -> Result<()> {
    if base.support_size() < 2 {
        return Err(EpiError::InvalidArgument("base distribution needs at least two support points".into()));
    }
    Ok(())
}

/// `H(X^(n)) - ½ ln(2πe nσ²)` by exact convolution.
pub fn knessl_g(base: &IntegerPmf, n: u64, budget: u64) -> Result<ExtReal> {
    require_nondegenerate(base)?;
    if n == 0 {
        return Err(EpiError::InvalidArgument("n must be ≥ 1".into()));
    }
    let len = iid_sum_len(base, n);
    if len > budget {
        return Err(EpiError::BudgetExceeded(format!("support of X^({n}) has {len} points, budget is {budget}")));
    }
    let sum = iid_sum_pmf(base, n);
    let variance = base.variance() * &ExtReal::from_u64(n, base.precision());
    Ok(entropy(&sum) - &gaussian_entropy(&variance))
}

pub fn knessl_profile(base: &IntegerPmf, label: &str, ns: &[u64], budget: u64) -> Result<KnesslProfile> {
    require_nondegenerate(base)?;
    let values: Vec<(u64, ExtReal)> =
        ns.par_iter().map(|&n| knessl_g(base, n, budget).map(|g| (n, g))).collect::<Result<_>>()?;
    let g_values: BTreeMap<u64, ExtReal> = values.into_iter().collect();
    let mut onset = None;
    for (&n, g) in g_values.iter().rev() {
        if g.is_negative() {
            onset = Some(n);
        } else {
            break;
        }
    }
    Ok(KnesslProfile {
        base: label.to_string(),
        sigma2: base.variance(),
        kappa: CumulantSet::of_pmf(base, MAX_CUMULANT_ORDER)?,
        g_values,
        onset,
    })
}

/// `g(n) ≈ -constant · n^{-exponent}`.
#[derive(Clone, Debug, Serialize)]
pub struct LeadingTerm {
    pub constant: ExtReal,
    pub exponent: u32,
    /// Order of the first nonvanishing cumulant beyond the variance.
    pub cumulant_order: u32,
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// Leading constant from the cumulants; cumulants below `ε` count as zero.
pub fn predicted_leading_term(base: &IntegerPmf) -> Result<LeadingTerm> {
    require_nondegenerate(base)?;
    let precision = base.precision();
    let kappa = CumulantSet::of_pmf(base, MAX_CUMULANT_ORDER)?;
    let sigma2 = kappa.get(2).expect("variance").clone();
    let eps = precision.epsilon();
    for order in 3..=MAX_CUMULANT_ORDER {
        let k = kappa.get(order).expect("computed");
        if k.abs() > eps {
            let big_n = order as u32 - 1;
            let denom =
                ExtReal::from_bigint(&factorial(order as u64).into(), precision) * 2 * &sigma2.powi(order as i32);
            return Ok(LeadingTerm {
                constant: k.square() / &denom,
                exponent: big_n - 1,
                cumulant_order: order as u32,
            });
        }
    }
    Err(EpiError::InvalidArgument(format!("cumulants 3..={MAX_CUMULANT_ORDER} all vanish")))
}

#[derive(Clone, Debug, Serialize)]
pub struct LeadingFit {
    pub constant: f64,
    pub exponent: f64,
    pub points: Vec<(u64, f64)>,
    /// `|g(n)|` failed to decrease strictly over the range.
    pub non_monotone: bool,
}

/// Least squares on `ln|g(n)| = ln C - k ln n`.
pub fn leading_constant_fit(base: &IntegerPmf, ns: &[u64], budget: u64) -> Result<LeadingFit> {
    if ns.len() < 4 {
        return Err(EpiError::InvalidArgument("fit needs at least four n values".into()));
    }
    let profile = knessl_profile(base, "fit", ns, budget)?;
    let points: Vec<(u64, f64)> = profile.g_values.iter().map(|(&n, g)| (n, g.to_f64())).collect();
    let non_monotone = points.windows(2).any(|w| w[1].1.abs() >= w[0].1.abs());
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.abs().ln()).collect();
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(LeadingFit { constant: (my - slope * mx).exp(), exponent: -slope, points, non_monotone })
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothedEntropy {
    /// Span of the support, the trial count for binomial sums.
    pub n: u64,
    pub sigma: ExtReal,
    pub h_value: ExtReal,
    pub quadrature_error: ExtReal,
    pub intervals: usize,
}

/// Differential entropy of `Σ_k P(k) φ_σ(x - k)`.
pub fn gaussian_smoothed_entropy(pmf: &IntegerPmf, sigma: &ExtReal, tol: &ExtReal) -> Result<SmoothedEntropy> {
    if !sigma.is_positive() {
        return Err(EpiError::InvalidArgument("sigma must be positive".into()));
    }
    if !tol.is_positive() {
        return Err(EpiError::InvalidArgument("tolerance must be positive".into()));
    }
    let precision = pmf.precision();
    let support: Vec<(i64, ExtReal)> = pmf.iter().filter(|(_, w)| !w.is_zero()).map(|(k, w)| (k, w.clone())).collect();
    // beyond this distance a component is below 10^{-(P+20)} of its peak
    let ln10 = ExtReal::from_i64(10, precision).ln();
    let reach = (ln10 * 2 * (precision.digits() as i64 + 20)).sqrt() * sigma;
    let reach_f = reach.to_f64();
    let norm = (ExtReal::pi(precision) * 2).sqrt() * sigma;
    let two_s2 = sigma.square() * 2;

    let density = |x: &ExtReal| {
        let xf = x.to_f64();
        let lo = (xf - reach_f).ceil() as i64;
        let hi = (xf + reach_f).floor() as i64;
        let start = support.partition_point(|(k, _)| *k < lo);
        let mut acc = x.zero_like();
        for (k, w) in support[start..].iter().take_while(|(k, _)| *k <= hi) {
            let d = x - &ExtReal::from_i64(*k, precision);
            acc.add_mul(w, &(-(d.square()) / &two_s2).exp());
        }
        acc / &norm
    };
    let integrand = |x: &ExtReal| density(x).neg_x_ln_x();

    let mut breakpoints: Vec<ExtReal> = Vec::new();
    let offsets: Vec<ExtReal> =
        [0i64, 1, 4, 8].iter().map(|&c| sigma * c).chain(std::iter::once(reach.clone())).collect();
    for (k, _) in &support {
        let centre = ExtReal::from_i64(*k, precision);
        for o in &offsets {
            breakpoints.push(&centre - o);
            breakpoints.push(&centre + o);
        }
    }
    breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    breakpoints.dedup_by(|a, b| a == b);

    let rule = GaussLegendre::new(20, precision);
    let out = integrate(&rule, &integrand, &breakpoints, tol)?;
    let n = (pmf.max_point() - pmf.offset()).max(0) as u64;
    Ok(SmoothedEntropy {
        n,
        sigma: sigma.clone(),
        h_value: out.value,
        quadrature_error: out.error_estimate,
        intervals: out.intervals,
    })
}

/// `h(S^(n))` with `S^(n) = Σ_{i≤n} (X_i + Z_i)`, `Z_i ~ N(0, σ²)`, so the
/// smoothing width is `σ√n`.
pub fn smoothed_binomial_entropy(
    n: u64,
    p: &BernoulliParam,
    sigma: &ExtReal,
    tol: &ExtReal,
) -> Result<SmoothedEntropy> {
    if n == 0 {
        return Err(EpiError::InvalidArgument("n must be ≥ 1".into()));
    }
    let width = sigma * &ExtReal::from_u64(n, p.precision()).sqrt();
    let mut out = gaussian_smoothed_entropy(&binomial_pmf(n, p), &width, tol)?;
    out.n = n;
    out.sigma = sigma.clone();
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct TulinoRow {
    pub n: u64,
    pub increment: ExtReal,
    /// `½ ln(n/(n-1))`
    pub half_log_ratio: ExtReal,
    /// `ln(n/(n-1))`
    pub log_ratio: ExtReal,
    pub quadrature_error: ExtReal,
    pub original_holds: bool,
    pub improved_holds: bool,
}

/// Increments `h(S^(n)) - h(S^(n-1))` against `½ ln(n/(n-1))` and
/// `ln(n/(n-1))`; a bound "holds" when the increment is within the summed
/// quadrature errors of it or above.
pub fn tulino_verdu_compare(
    p: &BernoulliParam,
    sigma: &ExtReal,
    n_range: RangeInclusive<u64>,
    tol: &ExtReal,
) -> Result<Vec<TulinoRow>> {
    let (lo, hi) = (*n_range.start(), *n_range.end());
    if lo < 2 || hi < lo {
        return Err(EpiError::InvalidArgument(format!("n range must satisfy 2 ≤ start ≤ end, got {lo}..={hi}")));
    }
    let hs: Vec<SmoothedEntropy> =
        (lo - 1..=hi).into_par_iter().map(|j| smoothed_binomial_entropy(j, p, sigma, tol)).collect::<Result<_>>()?;
    let precision = p.precision();
    Ok(hs
        .windows(2)
        .map(|w| {
            let n = w[1].n;
            let increment = &w[1].h_value - &w[0].h_value;
            let err = &w[1].quadrature_error + &w[0].quadrature_error;
            let log_ratio = (ExtReal::from_u64(n, precision) / &ExtReal::from_u64(n - 1, precision)).ln();
            let half_log_ratio = &log_ratio / 2;
            let slack = &increment + &err;
            TulinoRow {
                n,
                original_holds: slack >= half_log_ratio,
                improved_holds: slack >= log_ratio,
                increment,
                half_log_ratio,
                log_ratio,
                quadrature_error: err,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::Precision;

    fn prec() -> Precision {
        Precision::default()
    }

    fn bp(s: &str) -> BernoulliParam {
        BernoulliParam::parse(s, prec()).unwrap()
    }

    fn e(s: &str) -> ExtReal {
        ExtReal::parse(s, prec()).unwrap()
    }

    #[test]
    fn knessl_g_is_negative_for_fair_coin() {
        let base = binomial_pmf(1, &bp("0.5"));
        for n in [1, 2, 3, 10, 50] {
            assert!(knessl_g(&base, n, DEFAULT_SUPPORT_BUDGET).unwrap().is_negative());
        }
        assert!(matches!(knessl_g(&base, 100, 50), Err(EpiError::BudgetExceeded(_))));
        let delta = IntegerPmf::point_mass(0, prec());
        assert!(knessl_g(&delta, 3, 100).is_err());
    }

    #[test]
    fn predicted_constants() {
        let half = predicted_leading_term(&binomial_pmf(1, &bp("0.5"))).unwrap();
        assert_eq!(half.exponent, 2);
        assert!((half.constant.clone() - &ExtReal::from_ratio(1, 12, prec())).abs() <= prec().epsilon());
        let skew = predicted_leading_term(&binomial_pmf(1, &bp("0.3"))).unwrap();
        assert_eq!(skew.exponent, 1);
        assert!((skew.constant.to_f64() - 0.0634920634920).abs() < 1e-12);
        let u = predicted_leading_term(&IntegerPmf::uniform(0, 2, prec()).unwrap()).unwrap();
        assert_eq!(u.exponent, 2);
    }

    #[test]
    fn fits_recover_exponents() {
        let ns = [128, 256, 512, 1024];
        let fit = leading_constant_fit(&binomial_pmf(1, &bp("0.5")), &ns, DEFAULT_SUPPORT_BUDGET).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.05, "{fit:?}");
        assert!((fit.constant / (1.0 / 12.0) - 1.0).abs() < 0.05, "{fit:?}");
        assert!(!fit.non_monotone);
        let fit = leading_constant_fit(&binomial_pmf(1, &bp("0.3")), &ns, DEFAULT_SUPPORT_BUDGET).unwrap();
        assert!((fit.exponent - 1.0).abs() < 0.05, "{fit:?}");
        let u = IntegerPmf::uniform(0, 2, prec()).unwrap();
        let fit = leading_constant_fit(&u, &[64, 128, 256, 512], DEFAULT_SUPPORT_BUDGET).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.1, "{fit:?}");
        assert!(leading_constant_fit(&u, &[1, 2, 3], DEFAULT_SUPPORT_BUDGET).is_err());
    }

    #[test]
    fn smoothed_point_mass_is_gaussian() {
        let sigma = e("0.7");
        let out = gaussian_smoothed_entropy(&IntegerPmf::point_mass(0, prec()), &sigma, &e("1e-30")).unwrap();
        let expect = gaussian_entropy(&sigma.square());
        assert!((out.h_value - &expect).abs() <= e("1e-29"));
    }

    #[test]
    fn smoothed_coin_limits() {
        let coin = binomial_pmf(1, &bp("0.5"));
        let big = e("10");
        let out = gaussian_smoothed_entropy(&coin, &big, &e("1e-12")).unwrap();
        let approx = gaussian_entropy(&(big.square() + &e("0.25")));
        assert!(((out.h_value.clone() - &approx) / &approx).abs() < e("0.01"));
        assert!(out.h_value >= gaussian_entropy(&big.square()));

        let small = e("1e-3");
        let out = gaussian_smoothed_entropy(&coin, &small, &e("1e-12")).unwrap();
        let info = out.h_value - &gaussian_entropy(&small.square());
        assert!((info - &ExtReal::ln2(prec())).abs() < e("1e-6"));
    }

    #[test]
    fn tulino_small_range() {
        let rows = tulino_verdu_compare(&bp("0.5"), &e("1e-3"), 2..=9, &e("1e-10")).unwrap();
        assert!(rows[0].original_holds);
        for row in &rows[6..] {
            assert!(row.improved_holds, "n = {}", row.n);
        }
        for w in rows.windows(2) {
            assert!(w[1].increment < w[0].increment);
            assert!(w[1].increment.is_positive());
        }
        assert!(tulino_verdu_compare(&bp("0.5"), &e("1e-3"), 1..=3, &e("1e-10")).is_err());
    }
}
