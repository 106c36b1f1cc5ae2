//! Capacitory and triangular discrimination.
//!
//! For pmfs `P`, `Q` and a weight `p` with mixture `M = pP + qQ`:
//!
//! * `C^(p)(P,Q) = p D(P‖M) + q D(Q‖M)`
//! * `Δ_ν^(p)(P,Q) = Σ |p p_i - q q_i|^{2ν} / (p p_i + q q_i)^{2ν-1}`
//!
//! and the series identity
//! `C^(p)(P,Q) = Σ_ν Δ_ν / (2ν(2ν-1)) - [ln 2 - H(p)]`.
//!
//! Supports are aligned by absolute integer position with zero padding, so
//! shifted binomials can be compared directly. The first argument is always
//! the one weighted by `p`.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::dist::{bernoulli_entropy, binary_entropy, binomial_pmf, shift, BernoulliParam, IntegerPmf};
use crate::error::{EpiError, Result};
use crate::precision::{ExtReal, Precision};

/// Hard cap on the number of series terms in [`cap_via_series`].
pub const MAX_SERIES_TERMS: usize = 10_000;

/// Two pmfs and the weight of the first one.
#[derive(Clone, Debug)]
pub struct MixturePair<'a> {
    pub first: &'a IntegerPmf,
    pub second: &'a IntegerPmf,
    pub weight: &'a BernoulliParam,
}

/// One aligned support point: position, `p p_i`, `q q_i`.
struct Atom {
    pos: i64,
    a: ExtReal,
    b: ExtReal,
}

impl<'a> MixturePair<'a> {
    pub fn new(first: &'a IntegerPmf, second: &'a IntegerPmf, weight: &'a BernoulliParam) -> Result<Self> {
        if first.precision() != second.precision() {
            return Err(EpiError::PrecisionMismatch {
                left: first.precision().digits(),
                right: second.precision().digits(),
            });
        }
        Ok(MixturePair { first, second, weight })
    }

    fn precision(&self) -> Precision {
        self.first.precision()
    }

    fn atoms(&self) -> Vec<Atom> {
        let lo = self.first.offset().min(self.second.offset());
        let hi = self.first.max_point().max(self.second.max_point());
        (lo..=hi)
            .map(|pos| Atom {
                pos,
                a: self.weight.p() * &self.first.weight_at(pos),
                b: self.weight.q() * &self.second.weight_at(pos),
            })
            .collect()
    }

    /// `M = pP + qQ` on the union support.
    pub fn mixture(&self) -> IntegerPmf {
        let atoms = self.atoms();
        let offset = atoms[0].pos;
        let weights = atoms.into_iter().map(|at| at.a + at.b).collect();
        IntegerPmf::new(offset, weights, self.precision()).expect("mixture of pmfs is a pmf")
    }

    /// `|p p_i - q q_i| / (p p_i + q q_i)` per position; points with
    /// no mixture mass are skipped.
    pub fn pointwise_ratio(&self) -> Vec<(i64, ExtReal)> {
        self.atoms()
            .into_iter()
            .filter_map(|at| {
                let m = &at.a + &at.b;
                (!m.is_zero()).then(|| (at.pos, (&at.a - &at.b).abs() / &m))
            })
            .collect()
    }
}

/// Result of a truncated series.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesEvaluation {
    pub partial_sum: ExtReal,
    pub terms_used: usize,
    pub tail_bound: ExtReal,
}

/// `D(P‖Q) = Σ p_i ln(p_i / q_i)`.
pub fn kl_divergence(p_dist: &IntegerPmf, q_dist: &IntegerPmf) -> Result<ExtReal> {
    if p_dist.precision() != q_dist.precision() {
        return Err(EpiError::PrecisionMismatch {
            left: p_dist.precision().digits(),
            right: q_dist.precision().digits(),
        });
    }
    let mut acc = ExtReal::zero(p_dist.precision());
    for (pos, w) in p_dist.iter() {
        if w.is_zero() {
            continue;
        }
        let v = q_dist.weight_at(pos);
        if v.is_zero() {
            return Err(EpiError::InfiniteDivergence(pos));
        }
        acc += &(w * &(w / &v).ln());
    }
    Ok(acc)
}

/// `C^(p)(P,Q) = p D(P‖M) + q D(Q‖M)`.
pub fn cap_discrimination(first: &IntegerPmf, second: &IntegerPmf, p: &BernoulliParam) -> Result<ExtReal> {
    let pair = MixturePair::new(first, second, p)?;
    let mut acc = ExtReal::zero(pair.precision());
    for at in pair.atoms() {
        let m = &at.a + &at.b;
        // a ln(p_i/m_i) = a ln(a/m_i) - a ln p; same for b. The ln p, ln q
        // pieces are accumulated once below.
        for part in [&at.a, &at.b] {
            if !part.is_zero() {
                acc += &(part * &(part / &m).ln());
            }
        }
    }
    // + H(p) restores the -a ln p - b ln q contributions summed over atoms.
    Ok(acc + &bernoulli_entropy(p))
}

/// `Δ_ν^(p)(P,Q)` for `ν ≥ 1`.
pub fn tri_discrimination(first: &IntegerPmf, second: &IntegerPmf, p: &BernoulliParam, nu: u32) -> Result<ExtReal> {
    if nu == 0 {
        return Err(EpiError::InvalidArgument("triangular discrimination order must be ≥ 1".into()));
    }
    let pair = MixturePair::new(first, second, p)?;
    let mut acc = ExtReal::zero(pair.precision());
    for at in pair.atoms() {
        let m = &at.a + &at.b;
        if m.is_zero() {
            continue;
        }
        let ratio = (&at.a - &at.b).abs() / &m;
        acc += &(ratio.powi(2 * nu as i32) * &m);
    }
    Ok(acc)
}

/// Evaluates `C^(p)(P,Q)` through the triangular-discrimination series.
///
/// Terms are added until `Δ_N (ln 2 - Σ_{ν≤N} 1/(2ν(2ν-1))) ≤ tol`, which
/// bounds the remainder because `Δ_ν` is non-increasing in `ν`. Hitting
/// [`MAX_SERIES_TERMS`] first is reported as [`EpiError::SeriesTruncated`].
pub fn cap_via_series(
    first: &IntegerPmf,
    second: &IntegerPmf,
    p: &BernoulliParam,
    tol: &ExtReal,
) -> Result<SeriesEvaluation> {
    cap_via_series_capped(first, second, p, tol, MAX_SERIES_TERMS)
}

/// [`cap_via_series`] with an explicit term cap.
pub fn cap_via_series_capped(
    first: &IntegerPmf,
    second: &IntegerPmf,
    p: &BernoulliParam,
    tol: &ExtReal,
    max_terms: usize,
) -> Result<SeriesEvaluation> {
    p.require_interior("the discrimination series")?;
    if !tol.is_positive() {
        return Err(EpiError::InvalidArgument("series tolerance must be positive".into()));
    }
    let pair = MixturePair::new(first, second, p)?;
    let precision = pair.precision();
    let ln2 = ExtReal::ln2(precision);

    // (m_i ρ_i^{2ν}, ρ_i^2) for atoms with ρ_i > 0
    let mut atoms: Vec<(ExtReal, ExtReal)> = pair
        .atoms()
        .into_iter()
        .filter_map(|at| {
            let m = &at.a + &at.b;
            if m.is_zero() {
                return None;
            }
            let rho2 = ((&at.a - &at.b) / &m).square();
            (!rho2.is_zero()).then_some((m, rho2))
        })
        .collect();

    let mut series = ExtReal::zero(precision);
    let mut harmonic = ExtReal::zero(precision);
    let mut tail_bound = ExtReal::zero(precision);
    for nu in 1..=max_terms {
        let mut delta = ExtReal::zero(precision);
        for (term, rho2) in atoms.iter_mut() {
            *term *= &*rho2;
            delta += &*term;
        }
        let denom = (2 * nu as i64) * (2 * nu as i64 - 1);
        series += &(&delta / denom);
        harmonic += &(ExtReal::one(precision) / denom);
        tail_bound = &delta * &(&ln2 - &harmonic);
        if tail_bound <= *tol {
            let partial_sum = series - &(&ln2 - &bernoulli_entropy(p));
            return Ok(SeriesEvaluation { partial_sum, terms_used: nu, tail_bound });
        }
    }
    Err(EpiError::SeriesTruncated { terms: max_terms, tail_bound: tail_bound.to_decimal(6) })
}

/// The identity `ln 2 - H(p) = Σ_ν 2^{2ν}/(2ν(2ν-1)) (p - 1/2)^{2ν}`,
/// truncated after `terms` terms. The tail bound is the geometric majorant
/// `(4r^2)^{N+1} / ((2N+2)(2N+1)(1 - 4r^2))`.
pub fn log2_gap_series(p: &BernoulliParam, terms: usize) -> Result<SeriesEvaluation> {
    p.require_interior("the ln 2 - H(p) series")?;
    if terms == 0 {
        return Err(EpiError::InvalidArgument("need at least one term".into()));
    }
    let precision = p.precision();
    let x = p.r().square() * 4;
    let mut power = ExtReal::one(precision);
    let mut acc = ExtReal::zero(precision);
    for nu in 1..=terms as i64 {
        power *= &x;
        acc += &(&power / ((2 * nu) * (2 * nu - 1)));
    }
    let n = terms as i64;
    let tail_bound = &power * &x / ((2 * n + 2) * (2 * n + 1)) / &(ExtReal::one(precision) - &x);
    Ok(SeriesEvaluation { partial_sum: acc, terms_used: terms, tail_bound })
}

/// Which argument of `C^(p)` receives the shifted binomial.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PairOrder {
    /// `C^(p)(P_{X+1}, P_X)`: the order whose mixture is `B(n+1,p)`.
    ShiftedFirst,
    /// `C^(p)(P_X, P_{X+1})`.
    ShiftedSecond,
}

/// `C^(p)` of the pair `(B(n,p) + 1, B(n,p))` in the requested order.
pub fn binomial_pair_c(n: u64, p: &BernoulliParam, order: PairOrder) -> Result<ExtReal> {
    let base = binomial_pmf(n, p);
    let shifted = shift(&base, 1);
    match order {
        PairOrder::ShiftedFirst => cap_discrimination(&shifted, &base, p),
        PairOrder::ShiftedSecond => cap_discrimination(&base, &shifted, p),
    }
}

/// `Σ_{i=0}^{n+1} [H(p) - H(i/(n+1))] P_{B(n+1,p)}(i)`, the entropy increment
/// `H[B(n+1,p)] - H[B(n,p)]` written as a binomial average.
pub fn binomial_step_c(n: u64, p: &BernoulliParam) -> Result<ExtReal> {
    p.require_interior("binomial_step_c")?;
    let precision = p.precision();
    let next = binomial_pmf(n + 1, p);
    let hp = bernoulli_entropy(p);
    let mut acc = ExtReal::zero(precision);
    let denom = (n + 1) as i64;
    for (i, w) in next.iter() {
        let x = ExtReal::from_ratio(i, denom, precision);
        acc.add_mul(&(&hp - &binary_entropy(&x)), w);
    }
    Ok(acc)
}

/// `|2i - n - 1| / (n + 1)` exactly.
pub fn binomial_ratio_exact(i: i64, n: u64) -> Result<BigRational> {
    let n = n as i64;
    if i < 0 || i > n + 1 {
        return Err(EpiError::InvalidArgument(format!("index {i} outside 0..={}", n + 1)));
    }
    Ok(BigRational::new(BigInt::from((2 * i - n - 1).abs()), BigInt::from(n + 1)))
}

/// `|2i - n - 1| / (n + 1)` at working precision.
pub fn binomial_ratio(i: i64, n: u64, precision: Precision) -> Result<ExtReal> {
    binomial_ratio_exact(i, n).map(|r| ExtReal::from_rational(&r, precision))
}
