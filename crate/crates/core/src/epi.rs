//! Entropy-power gaps, step margins and EPI thresholds for binomial and
//! general IID families.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{entropy, iid_sum_pmf, BernoulliParam, BinomialLadder, IntegerPmf};
use crate::error::{EpiError, Result};
use crate::precision::{ExtReal, Precision};

/// `f(m,n,p) = e^{2H[B(m+n,p)]} - e^{2H[B(m,p)]} - e^{2H[B(n,p)]}`.
#[derive(Clone, Debug, Serialize)]
pub struct EpiReport {
    pub m: u64,
    pub n: u64,
    pub p: ExtReal,
    pub gap: ExtReal,
    pub holds: bool,
    pub precision: u32,
}

impl EpiReport {
    fn from_entropies(m: u64, n: u64, p: ExtReal, h_m: &ExtReal, h_n: &ExtReal, h_sum: &ExtReal) -> Self {
        let precision = p.precision();
        let power = |h: &ExtReal| (h * 2).exp();
        // fixed summation order keeps the gap exactly symmetric in (m, n)
        let (lo, hi) = if m <= n { (h_m, h_n) } else { (h_n, h_m) };
        let gap = power(h_sum) - &(power(lo) + &power(hi));
        let holds = gap >= -precision.epsilon();
        EpiReport { m, n, p, gap, holds, precision: precision.digits() }
    }
}

/// Binomial entropies `H[B(0,p)] .. H[B(n_max,p)]`.
pub fn binomial_entropies(p: &BernoulliParam, n_max: u64) -> Vec<ExtReal> {
    BinomialLadder::new(p.clone()).take(n_max as usize + 1).map(|b| entropy(&b)).collect()
}

pub fn epi_gap(m: u64, n: u64, p: &BernoulliParam) -> EpiReport {
    let h = binomial_entropies(p, m + n);
    EpiReport::from_entropies(m, n, p.p().clone(), &h[m as usize], &h[n as usize], &h[(m + n) as usize])
}

/// `f(m,n,p)` at each `p`, in input order.
pub fn gap_sweep(m: u64, n: u64, ps: &[BernoulliParam]) -> Vec<EpiReport> {
    ps.par_iter().map(|p| epi_gap(m, n, p)).collect()
}

/// Full table of `f(m,n,p)` for `1 ≤ m ≤ m_max`, `1 ≤ n ≤ n_max`.
pub fn epi_grid_check(m_max: u64, n_max: u64, p: &BernoulliParam) -> Vec<Vec<EpiReport>> {
    let h = binomial_entropies(p, m_max + n_max);
    (1..=m_max)
        .into_par_iter()
        .map(|m| {
            (1..=n_max)
                .map(|n| {
                    EpiReport::from_entropies(m, n, p.p().clone(), &h[m as usize], &h[n as usize], &h[(m + n) as usize])
                })
                .collect()
        })
        .collect()
}

/// `H[B(n+1,p)] - H[B(n,p)] - ½ ln((n+1)/n)`; a nonnegative margin for
/// every `n ≥ n*` makes `e^{2H[B(n,p)]}/n` increasing there.
#[derive(Clone, Debug, Serialize)]
pub struct StepMargin {
    pub n: u64,
    pub margin: ExtReal,
    pub holds: bool,
}

fn margin_from(n: u64, h_n: &ExtReal, h_next: &ExtReal) -> StepMargin {
    let precision = h_n.precision();
    let ratio = ExtReal::from_u64(n + 1, precision) / &ExtReal::from_u64(n, precision);
    let margin = h_next - h_n - &(ratio.ln() / 2);
    let holds = margin >= -precision.epsilon();
    StepMargin { n, margin, holds }
}

pub fn sufficient_step_check(n: u64, p: &BernoulliParam) -> Result<StepMargin> {
    if n == 0 {
        return Err(EpiError::InvalidArgument("step check needs n ≥ 1".into()));
    }
    let h = binomial_entropies(p, n + 1);
    Ok(margin_from(n, &h[n as usize], &h[n as usize + 1]))
}

/// Step margins for `n = 1..=n_max`.
pub fn step_margins(p: &BernoulliParam, n_max: u64) -> Vec<StepMargin> {
    let h = binomial_entropies(p, n_max + 1);
    (1..=n_max).map(|n| margin_from(n, &h[n as usize], &h[n as usize + 1])).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmpiricalN0 {
    Found(u64),
    NotFoundBelowCap,
}

impl EmpiricalN0 {
    pub fn value(&self) -> Option<u64> {
        match self {
            EmpiricalN0::Found(n) => Some(*n),
            EmpiricalN0::NotFoundBelowCap => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    pub p: ExtReal,
    pub t: ExtReal,
    pub empirical_n0: EmpiricalN0,
    /// `ceil(111/25 t + 7)`
    pub formula_a: i64,
    /// `ceil(t² + 117/50 t + 7)`
    pub formula_b: i64,
    pub cap: u64,
}

/// `ceil(x - ε)`, so values that sit on an integer up to rounding map to it.
fn ceil_tolerant(x: &ExtReal) -> i64 {
    (x - &x.precision().epsilon()).ceil_i64().expect("threshold fits in i64")
}

/// `(formula_a, formula_b)` for a given `t = ω(p)`.
pub fn formula_thresholds(t: &ExtReal) -> (i64, i64) {
    let precision = t.precision();
    let seven = ExtReal::from_i64(7, precision);
    let a = t * &ExtReal::from_ratio(111, 25, precision) + &seven;
    let b = t.square() + &(t * &ExtReal::from_ratio(117, 50, precision)) + &seven;
    (ceil_tolerant(&a), ceil_tolerant(&b))
}

/// Smallest `n* ≤ cap` with a nonnegative step margin on all of `[n*, cap]`.
pub fn empirical_threshold(p: &BernoulliParam, cap: u64) -> Result<ThresholdReport> {
    p.require_interior("empirical_threshold")?;
    if cap == 0 {
        return Err(EpiError::InvalidArgument("cap must be ≥ 1".into()));
    }
    let t = p.omega()?;
    let (formula_a, formula_b) = formula_thresholds(&t);
    let margins = step_margins(p, cap);
    let empirical_n0 = match margins.iter().rposition(|s| !s.holds) {
        None => EmpiricalN0::Found(1),
        Some(i) if (i as u64) + 1 < cap => EmpiricalN0::Found(i as u64 + 2),
        Some(_) => EmpiricalN0::NotFoundBelowCap,
    };
    Ok(ThresholdReport { p: p.p().clone(), t, empirical_n0, formula_a, formula_b, cap })
}

/// [`empirical_threshold`] at each `p`, in input order.
pub fn threshold_sweep(ps: &[BernoulliParam], cap: u64) -> Result<Vec<ThresholdReport>> {
    ps.par_iter().map(|p| empirical_threshold(p, cap)).collect()
}

/// Values of `n ∈ [2, cap]` where the sign class of the step margin
/// (negative below `-ε`, nonnegative otherwise) differs from that at `n-1`.
pub fn zero_crossing_scan(p: &BernoulliParam, cap: u64) -> Vec<u64> {
    let margins = step_margins(p, cap);
    margins.windows(2).filter(|w| w[0].holds != w[1].holds).map(|w| w[1].n).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SemiAsymptoticReport {
    pub m: u64,
    pub p: ExtReal,
    pub entropy: ExtReal,
    /// `½ ln(2πe m p(1-p))`
    pub gaussian_entropy: ExtReal,
    pub holds: bool,
}

/// `H[B(m,p)] < ½ ln(2πe m p(1-p))`.
pub fn semi_asymptotic_condition(m: u64, p: &BernoulliParam) -> Result<SemiAsymptoticReport> {
    p.require_interior("semi_asymptotic_condition")?;
    if m == 0 {
        return Err(EpiError::InvalidArgument("m must be ≥ 1".into()));
    }
    let precision = p.precision();
    let h = entropy(&crate::dist::binomial_pmf(m, p));
    let variance = p.p() * p.q() * &ExtReal::from_u64(m, precision);
    let gaussian_entropy = gaussian_entropy(&variance);
    let holds = h < gaussian_entropy;
    Ok(SemiAsymptoticReport { m, p: p.p().clone(), entropy: h, gaussian_entropy, holds })
}

/// `½ ln(2πe v)`.
pub fn gaussian_entropy(variance: &ExtReal) -> ExtReal {
    let precision = variance.precision();
    let two_pi_e = ExtReal::pi(precision) * &ExtReal::e(precision) * 2;
    (two_pi_e * variance).ln() / 2
}

/// Gap for sums of IID copies of an arbitrary base; `p` in the report is
/// left as zero since there is no Bernoulli parameter.
pub fn iid_epi_gap(base: &IntegerPmf, m: u64, n: u64) -> EpiReport {
    let h_m = entropy(&iid_sum_pmf(base, m));
    let h_n = entropy(&iid_sum_pmf(base, n));
    let h_sum = entropy(&iid_sum_pmf(base, m + n));
    EpiReport::from_entropies(m, n, ExtReal::zero(base.precision()), &h_m, &h_n, &h_sum)
}

/// Uniform grid of `steps` points on `[p_min, p_max]`, endpoints included;
/// `steps = 1` yields `p_min` alone.
pub fn p_grid(p_min: &ExtReal, p_max: &ExtReal, steps: usize) -> Result<Vec<BernoulliParam>> {
    if steps == 0 {
        return Err(EpiError::InvalidArgument("steps must be ≥ 1".into()));
    }
    if p_min > p_max {
        return Err(EpiError::InvalidArgument("p_min exceeds p_max".into()));
    }
    if steps == 1 {
        return Ok(vec![BernoulliParam::new(p_min.clone())?]);
    }
    let span = p_max - p_min;
    (0..steps)
        .map(|i| {
            let x = p_min + &(&span * i as i64 / (steps as i64 - 1));
            BernoulliParam::new(x)
        })
        .collect()
}

/// Interior rational grid `k / den`, `k = 1..den`.
pub fn rational_p_grid(den: i64, precision: Precision) -> Vec<BernoulliParam> {
    (1..den).map(|k| BernoulliParam::from_ratio(k, den, precision).expect("interior")).collect()
}
