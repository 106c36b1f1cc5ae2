//! Integer-supported distributions and their discrete entropy.
//!
//! A pmf is a dense weight vector on consecutive integers starting at an
//! `offset`. Binomials are built by the one-step mixing recurrence
//! `P_{n+1}(k) = p P_n(k-1) + q P_n(k)`, so nothing overflows and every
//! weight is computed at working precision.

use serde::Serialize;

use crate::error::{EpiError, Result};
use crate::precision::{ExtReal, Precision};

/// Finite-support pmf on `offset, offset + 1, ..`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegerPmf {
    offset: i64,
    weights: Vec<ExtReal>,
    #[serde(skip)]
    precision: Precision,
}

impl IntegerPmf {
    /// Validates non-negativity and unit mass within `10^-(P-10)`.
    pub fn new(offset: i64, weights: Vec<ExtReal>, precision: Precision) -> Result<Self> {
        if weights.is_empty() {
            return Err(EpiError::InvalidPmf("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| w.is_negative() || !w.is_finite()) {
            return Err(EpiError::InvalidPmf(format!("weight {w} is not a probability")));
        }
        if weights.iter().any(|w| w.precision() != precision) {
            return Err(EpiError::InvalidPmf("weights carry mixed precision".into()));
        }
        let pmf = IntegerPmf { offset, weights, precision };
        let defect = (pmf.total_mass() - 1_i64).abs();
        if defect > precision.epsilon() {
            return Err(EpiError::InvalidPmf(format!("mass differs from 1 by {}", defect.to_decimal(6))));
        }
        Ok(pmf)
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_unnormalized(offset: i64, weights: Vec<ExtReal>, precision: Precision) -> Result<Self> {
        let total = ExtReal::sum(&weights, precision);
        if !total.is_positive() {
            return Err(EpiError::InvalidPmf("weights have no positive mass".into()));
        }
        let weights = weights.into_iter().map(|w| w / &total).collect();
        Self::new(offset, weights, precision)
    }

    /// Rational weights `numerators[i] / sum(numerators)`.
    pub fn from_counts(offset: i64, counts: &[u64], precision: Precision) -> Result<Self> {
        let weights = counts.iter().map(|&c| ExtReal::from_u64(c, precision)).collect();
        Self::from_unnormalized(offset, weights, precision)
    }

    pub fn point_mass(at: i64, precision: Precision) -> Self {
        IntegerPmf { offset: at, weights: vec![ExtReal::one(precision)], precision }
    }

    /// Uniform on `lo..=hi`.
    pub fn uniform(lo: i64, hi: i64, precision: Precision) -> Result<Self> {
        if hi < lo {
            return Err(EpiError::InvalidArgument(format!("empty range {lo}..={hi}")));
        }
        let len = (hi - lo + 1) as u64;
        Self::from_counts(lo, &vec![1; len as usize], precision)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// Largest stored support point.
    pub fn max_point(&self) -> i64 {
        self.offset + self.weights.len() as i64 - 1
    }

    pub fn weights(&self) -> &[ExtReal] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Weight at absolute position `k`, zero outside the stored range.
    pub fn weight_at(&self, k: i64) -> ExtReal {
        if k < self.offset || k > self.max_point() {
            ExtReal::zero(self.precision)
        } else {
            self.weights[(k - self.offset) as usize].clone()
        }
    }

    /// `(position, weight)` pairs in increasing position.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &ExtReal)> {
        self.weights.iter().enumerate().map(move |(i, w)| (self.offset + i as i64, w))
    }

    pub fn total_mass(&self) -> ExtReal {
        ExtReal::sum(&self.weights, self.precision)
    }

    /// Number of support points with positive weight.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|w| w.is_positive()).count()
    }

    pub fn mean(&self) -> ExtReal {
        let mut acc = ExtReal::zero(self.precision);
        for (k, w) in self.iter() {
            acc += &(w * k);
        }
        acc
    }

    pub fn variance(&self) -> ExtReal {
        let mean = self.mean();
        let mut acc = ExtReal::zero(self.precision);
        for (k, w) in self.iter() {
            let d = ExtReal::from_i64(k, self.precision) - &mean;
            acc += &(w * &d.square());
        }
        acc
    }

    /// `E[X^k]` about the origin.
    pub fn raw_moment(&self, k: u32) -> ExtReal {
        let mut acc = ExtReal::zero(self.precision);
        for (x, w) in self.iter() {
            acc += &(w * &ExtReal::from_i64(x, self.precision).powi(k as i32));
        }
        acc
    }

    /// Drops zero weights at both ends.
    pub fn trimmed(&self) -> IntegerPmf {
        let first = self.weights.iter().position(|w| !w.is_zero());
        let last = self.weights.iter().rposition(|w| !w.is_zero());
        match (first, last) {
            (Some(a), Some(b)) => IntegerPmf {
                offset: self.offset + a as i64,
                weights: self.weights[a..=b].to_vec(),
                precision: self.precision,
            },
            _ => self.clone(),
        }
    }
}

/// Bernoulli success probability with derived `q = 1 - p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BernoulliParam {
    p: ExtReal,
    q: ExtReal,
}

impl BernoulliParam {
    pub fn new(p: ExtReal) -> Result<Self> {
        if p.is_negative() || p > 1_i64 || !p.is_finite() {
            return Err(EpiError::InvalidProbability(p.to_decimal(12)));
        }
        let q = p.one_like() - &p;
        Ok(BernoulliParam { p, q })
    }

    /// From a decimal literal, e.g. `"0.3"`.
    pub fn parse(s: &str, precision: Precision) -> Result<Self> {
        Self::new(ExtReal::parse(s, precision)?)
    }

    pub fn from_ratio(num: i64, den: i64, precision: Precision) -> Result<Self> {
        if den == 0 {
            return Err(EpiError::InvalidArgument("zero denominator".into()));
        }
        Self::new(ExtReal::from_ratio(num, den, precision))
    }

    pub fn p(&self) -> &ExtReal {
        &self.p
    }

    pub fn q(&self) -> &ExtReal {
        &self.q
    }

    /// `r = p - 1/2`.
    pub fn r(&self) -> ExtReal {
        &self.p - &ExtReal::from_ratio(1, 2, self.precision())
    }

    pub fn precision(&self) -> Precision {
        self.p.precision()
    }

    pub fn is_degenerate(&self) -> bool {
        self.p.is_zero() || self.q.is_zero()
    }

    /// The reflected parameter `1 - p`.
    pub fn reflected(&self) -> BernoulliParam {
        BernoulliParam { p: self.q.clone(), q: self.p.clone() }
    }

    /// Squared Bernoulli skewness `ω(p) = (2p-1)^2 / (p(1-p))`.
    pub fn omega(&self) -> Result<ExtReal> {
        omega(self)
    }

    pub fn entropy(&self) -> ExtReal {
        bernoulli_entropy(self)
    }

    pub(crate) fn require_interior(&self, what: &str) -> Result<()> {
        if self.is_degenerate() {
            Err(EpiError::Domain(format!("{what} requires 0 < p < 1, got p = {}", self.p.to_decimal(12))))
        } else {
            Ok(())
        }
    }
}

/// Binary entropy in nats.
pub fn bernoulli_entropy(p: &BernoulliParam) -> ExtReal {
    p.p.neg_x_ln_x() + p.q.neg_x_ln_x()
}

/// Binary entropy of a raw value `x ∈ [0, 1]`.
pub fn binary_entropy(x: &ExtReal) -> ExtReal {
    let q = x.one_like() - x;
    x.neg_x_ln_x() + q.neg_x_ln_x()
}

/// `ω(p) = (2p-1)^2 / (p(1-p))`; a pole at `p ∈ {0, 1}`.
pub fn omega(p: &BernoulliParam) -> Result<ExtReal> {
    p.require_interior("omega")?;
    let two_p_minus_one = p.p() * 2 - 1;
    Ok(two_p_minus_one.square() / (p.p() * p.q()))
}

/// `B(n, p)` on `{0..n}` via the mixing recurrence.
pub fn binomial_pmf(n: u64, p: &BernoulliParam) -> IntegerPmf {
    BinomialLadder::new(p.clone()).nth(n as usize).expect("ladder is infinite")
}

/// Iterator over `B(0,p), B(1,p), B(2,p), ..`, each obtained from the
/// previous one by one mixing step.
#[derive(Clone, Debug)]
pub struct BinomialLadder {
    p: BernoulliParam,
    current: Option<Vec<ExtReal>>,
}

impl BinomialLadder {
    pub fn new(p: BernoulliParam) -> Self {
        BinomialLadder { p, current: None }
    }
}

impl Iterator for BinomialLadder {
    type Item = IntegerPmf;

    fn next(&mut self) -> Option<IntegerPmf> {
        let precision = self.p.precision();
        let next = match self.current.take() {
            None => vec![ExtReal::one(precision)],
            Some(prev) => {
                let mut next = Vec::with_capacity(prev.len() + 1);
                next.push(self.p.q() * &prev[0]);
                for k in 1..prev.len() {
                    let mut w = self.p.q() * &prev[k];
                    w.add_mul(self.p.p(), &prev[k - 1]);
                    next.push(w);
                }
                next.push(self.p.p() * &prev[prev.len() - 1]);
                next
            }
        };
        self.current = Some(next.clone());
        Some(IntegerPmf { offset: 0, weights: next, precision })
    }
}

/// Distribution of the independent sum.
pub fn convolve(a: &IntegerPmf, b: &IntegerPmf) -> Result<IntegerPmf> {
    if a.precision != b.precision {
        return Err(EpiError::PrecisionMismatch { left: a.precision.digits(), right: b.precision.digits() });
    }
    let precision = a.precision;
    let mut out = vec![ExtReal::zero(precision); a.len() + b.len() - 1];
    for (i, wa) in a.weights.iter().enumerate() {
        if wa.is_zero() {
            continue;
        }
        for (j, wb) in b.weights.iter().enumerate() {
            out[i + j].add_mul(wa, wb);
        }
    }
    Ok(IntegerPmf { offset: a.offset + b.offset, weights: out, precision })
}

/// Translate the support by `k`; weights are untouched.
pub fn shift(a: &IntegerPmf, k: i64) -> IntegerPmf {
    IntegerPmf { offset: a.offset + k, weights: a.weights.clone(), precision: a.precision }
}

/// `-Σ w ln w` in nats.
pub fn entropy(a: &IntegerPmf) -> ExtReal {
    let mut acc = ExtReal::zero(a.precision);
    for w in &a.weights {
        acc += &w.neg_x_ln_x();
    }
    acc
}

/// Distribution of `X_1 + .. + X_n` for IID `X_i ~ base`, by repeated
/// squaring. `n = 0` gives the point mass at zero.
pub fn iid_sum_pmf(base: &IntegerPmf, n: u64) -> IntegerPmf {
    let mut result = IntegerPmf::point_mass(0, base.precision);
    let mut power = base.trimmed();
    let mut remaining = n;
    while remaining > 0 {
        if remaining & 1 == 1 {
            result = convolve(&result, &power).expect("same precision");
        }
        remaining >>= 1;
        if remaining > 0 {
            power = convolve(&power, &power).expect("same precision");
        }
    }
    result
}

/// Support length of the n-fold sum, used for budget checks.
pub fn iid_sum_len(base: &IntegerPmf, n: u64) -> u64 {
    let t = base.trimmed();
    (t.len() as u64 - 1) * n + 1
}
