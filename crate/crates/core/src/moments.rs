//! Cumulants, binomial central moments and the moment-based entropy bounds.
//!
//! The increment `H[B(j,p)] - H[B(j-1,p)]` is bounded below by
//! `Γ_l(j) = Σ_{k=1}^{2l+1} F^(k)(p) j^{-k} μ_k^(j)`, where `F^(k)` are the
//! Taylor coefficients of `Ĥ(x) = H(p) - H(x)` at `p`. Summing over `j`
//! telescopes into a lower bound on `H[B(n,p)]`; regrouping by powers of `j`
//! gives the generalized-harmonic-number form `Σ_w c(w) H_n^(w)`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use crate::dist::{bernoulli_entropy, binary_entropy, BernoulliParam, IntegerPmf};
use crate::error::{EpiError, Result};
use crate::precision::{ExtReal, Precision};

/// Cumulants `κ_1..κ_K` of a base distribution.
#[derive(Clone, Debug, Serialize)]
pub struct CumulantSet {
    kappa: Vec<ExtReal>,
}

impl CumulantSet {
    /// From raw moments `m_1..m_K` through
    /// `κ_n = m_n - Σ_{k=1}^{n-1} C(n-1,k-1) κ_k m_{n-k}`.
    pub fn from_raw_moments(raw: &[ExtReal]) -> Result<Self> {
        if raw.len() < 2 {
            return Err(EpiError::InvalidArgument("need at least two moments".into()));
        }
        let mut kappa: Vec<ExtReal> = Vec::with_capacity(raw.len());
        for n in 1..=raw.len() {
            let mut k_n = raw[n - 1].clone();
            for k in 1..n {
                let c = binomial_coefficient((n - 1) as u64, (k - 1) as u64);
                let term = &kappa[k - 1] * &raw[n - k - 1];
                k_n -= &(term * &ExtReal::from_bigint(&c.into(), raw[0].precision()));
            }
            kappa.push(k_n);
        }
        Ok(CumulantSet { kappa })
    }

    /// Cumulants of an arbitrary integer pmf.
    pub fn of_pmf(pmf: &IntegerPmf, count: usize) -> Result<Self> {
        let raw: Vec<_> = (1..=count as u32).map(|k| pmf.raw_moment(k)).collect();
        Self::from_raw_moments(&raw)
    }

    /// `κ_g`, one-based.
    pub fn get(&self, g: usize) -> Option<&ExtReal> {
        g.checked_sub(1).and_then(|i| self.kappa.get(i))
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn as_slice(&self) -> &[ExtReal] {
        &self.kappa
    }
}

/// `κ_1..κ_K` of Bernoulli(p); every raw moment equals `p`.
pub fn bernoulli_cumulants(p: &BernoulliParam, count: usize) -> Result<CumulantSet> {
    p.require_interior("bernoulli_cumulants")?;
    if count < 2 {
        return Err(EpiError::InvalidArgument("need at least two cumulants".into()));
    }
    CumulantSet::from_raw_moments(&vec![p.p().clone(); count])
}

fn binomial_coefficient(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// One integer partition written as `(part g, multiplicity i)` pairs with
/// parts in decreasing order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionTerm {
    pub parts: Vec<(u32, u32)>,
}

impl PartitionTerm {
    /// `Σ i_a g_a`.
    pub fn constraint_sum(&self) -> u32 {
        self.parts.iter().map(|&(g, i)| g * i).sum()
    }

    /// `Σ i_a`, the power of `j` in the moment polynomial.
    pub fn block_count(&self) -> u32 {
        self.parts.iter().map(|&(_, i)| i).sum()
    }

    /// `k! / Π i_a! (g_a!)^{i_a}` with `k = Σ i_a g_a`.
    pub fn weight(&self) -> BigUint {
        let k = self.constraint_sum() as u64;
        let denom = self
            .parts
            .iter()
            .fold(BigUint::one(), |acc, &(g, i)| acc * factorial(i as u64) * factorial(g as u64).pow(i));
        factorial(k) / denom
    }

    fn cumulant_product(&self, cumulants: &CumulantSet) -> Result<ExtReal> {
        let precision = cumulants.as_slice()[0].precision();
        let mut acc = ExtReal::one(precision);
        for &(g, i) in &self.parts {
            let kappa = cumulants
                .get(g as usize)
                .ok_or_else(|| EpiError::InvalidArgument(format!("cumulant κ_{g} not available")))?;
            acc *= &kappa.powi(i as i32);
        }
        Ok(acc)
    }
}

/// Partitions of `total` into parts no smaller than `min_part`, enumerated
/// lexicographically from the largest part down.
pub fn partitions(total: u32, min_part: u32) -> Vec<PartitionTerm> {
    fn recurse(rest: u32, max_part: u32, min_part: u32, stack: &mut Vec<(u32, u32)>, out: &mut Vec<PartitionTerm>) {
        if rest == 0 {
            out.push(PartitionTerm { parts: stack.clone() });
            return;
        }
        for g in (min_part..=max_part.min(rest)).rev() {
            for i in (1..=rest / g).rev() {
                stack.push((g, i));
                recurse(rest - g * i, g - 1, min_part, stack, out);
                stack.pop();
            }
        }
    }
    let mut out = Vec::new();
    if min_part == 0 {
        return out;
    }
    recurse(total, total, min_part, &mut Vec::new(), &mut out);
    out
}

/// `μ_k^(j)` as a polynomial in `j`: power of `j` → coefficient.
#[derive(Clone, Debug, Serialize)]
pub struct MomentPolynomial {
    pub k: u32,
    pub coeffs: BTreeMap<u32, ExtReal>,
}

impl MomentPolynomial {
    pub fn degree(&self) -> u32 {
        self.coeffs.keys().next_back().copied().unwrap_or(0)
    }

    pub fn eval(&self, j: u64, precision: Precision) -> ExtReal {
        let jj = ExtReal::from_u64(j, precision);
        let mut acc = ExtReal::zero(precision);
        for (&w, c) in &self.coeffs {
            acc += &(c * &jj.powi(w as i32));
        }
        acc
    }
}

/// Faà di Bruno: `μ_k^(j) = Σ k!/Π(i!(g!)^i) Π κ_g^i · j^{Σ i}` over
/// partitions of `k`. Parts equal to 1 are excluded because the moments are
/// central (the `κ_1` factor vanishes after centering).
pub fn faa_di_bruno_poly(k: u32, cumulants: &CumulantSet) -> Result<MomentPolynomial> {
    if k < 2 {
        return Err(EpiError::InvalidArgument("moment order must be ≥ 2".into()));
    }
    if cumulants.len() < k as usize {
        return Err(EpiError::InvalidArgument(format!("order {k} needs {k} cumulants, have {}", cumulants.len())));
    }
    let precision = cumulants.as_slice()[0].precision();
    let mut coeffs: BTreeMap<u32, ExtReal> = BTreeMap::new();
    for term in partitions(k, 2) {
        let value = term.cumulant_product(cumulants)? * &ExtReal::from_bigint(&term.weight().into(), precision);
        let slot = coeffs.entry(term.block_count()).or_insert_with(|| ExtReal::zero(precision));
        *slot += &value;
    }
    Ok(MomentPolynomial { k, coeffs })
}

/// Closed forms of `μ_k^(n)` for `B(n,p)`, `k = 2..=7`, in `n` and
/// `r = p - 1/2`.
pub fn central_moment_closed(n: u64, p: &BernoulliParam, k: u32) -> Result<ExtReal> {
    let precision = p.precision();
    let r = p.r();
    let r2 = r.square();
    let r4 = r2.square();
    let nn = ExtReal::from_u64(n, precision);
    let one = ExtReal::one(precision);
    let s = &one - &(&r2 * 4); // 1 - 4r^2
    let ns = &nn * &s;
    let c = |num: i64, den: i64| ExtReal::from_ratio(num, den, precision);
    let value = match k {
        2 => &ns / 4,
        3 => -(&ns * &r) / 2,
        4 => {
            let inner = (&r2 * 24) - 2 + &(&ns * 3);
            &ns * &inner / 16
        }
        5 => {
            let inner = (&r2 * 24) - 4 + &(&ns * 5);
            -(&ns * &r * &inner) / 4
        }
        6 => {
            // 1/64 prefactor: the brute-force moment of B(1, 1/2) is 1/64.
            let a = &nn.square() * &s.square() * 15;
            let b = (&one - &(&r2 * 30) + &(&r4 * 120)) * 16;
            let cterm = &nn * &(c(3, 1) - &(&r2 * 64) + &(&r4 * 208)) * 10;
            &ns * &(a + &b - &cterm) / 64
        }
        7 => {
            let a = &nn.square() * &s.square() * 105;
            let b = &nn * &(c(17, 1) - &(&r2 * 200) + &(&r4 * 528)) * 14;
            let cterm = (c(17, 1) - &(&r2 * 240) + &(&r4 * 720)) * 8;
            -(&ns * &r * &(a - &b + &cterm)) / 32
        }
        _ => return Err(EpiError::InvalidArgument(format!("closed forms cover k = 2..=7, got {k}"))),
    };
    Ok(value)
}

/// `Σ (x - mean)^k P(x)`, the reference for all moment code.
pub fn central_moment_brute(pmf: &IntegerPmf, k: u32, mean: &ExtReal) -> ExtReal {
    let precision = pmf.precision();
    let mut acc = ExtReal::zero(precision);
    for (x, w) in pmf.iter() {
        if w.is_zero() {
            continue;
        }
        let d = ExtReal::from_i64(x, precision) - mean;
        acc.add_mul(&d.powi(k as i32), w);
    }
    acc
}

/// `μ_k^(n)` of `B(n,p)`: closed form for `k ≤ 7`, brute force above.
pub fn binomial_central_moment(n: u64, p: &BernoulliParam, k: u32) -> ExtReal {
    match k {
        0 => ExtReal::one(p.precision()),
        1 => ExtReal::zero(p.precision()),
        2..=7 => central_moment_closed(n, p, k).expect("k in closed-form range"),
        _ => {
            let pmf = crate::dist::binomial_pmf(n, p);
            let mean = p.p() * &ExtReal::from_u64(n, p.precision());
            central_moment_brute(&pmf, k, &mean)
        }
    }
}

/// `F^(k)(x) = Ĥ^(k)(x) / k!`.
pub fn taylor_coeff(k: u32, x: &ExtReal) -> Result<ExtReal> {
    if k == 0 {
        return Err(EpiError::InvalidArgument("Taylor order must be ≥ 1".into()));
    }
    if !x.is_positive() || *x >= 1_i64 {
        return Err(EpiError::Domain(format!("F^(k) needs 0 < x < 1, got {}", x.to_decimal(12))));
    }
    let one = x.one_like();
    let q = &one - x;
    if k == 1 {
        return Ok(x.ln() - &q.ln());
    }
    let e = -(k as i32 - 1);
    let sign = if k.is_multiple_of(2) { 1 } else { -1 };
    let bracket = q.powi(e) + &(x.powi(e) * sign);
    Ok(bracket / ((k as i64) * (k as i64 - 1)))
}

/// `Σ_{k=1}^{2l+1} F^(k)(p) (x - p)^k`, never above `Ĥ(x) = H(p) - H(x)`.
pub fn taylor_lower_bound(x: &ExtReal, p: &BernoulliParam, l: u32) -> Result<ExtReal> {
    p.require_interior("taylor_lower_bound")?;
    let d = x - p.p();
    let mut acc = ExtReal::zero(p.precision());
    for k in 1..=(2 * l + 1) {
        acc += &(taylor_coeff(k, p.p())? * &d.powi(k as i32));
    }
    Ok(acc)
}

/// `Ĥ(x) = H(p) - H(x)`.
pub fn h_hat(x: &ExtReal, p: &BernoulliParam) -> ExtReal {
    bernoulli_entropy(p) - &binary_entropy(x)
}

/// `Γ_l(j) = Σ_{k=1}^{2l+1} F^(k)(p) j^{-k} μ_k^(j)`.
pub fn gamma_l(j: u64, p: &BernoulliParam, l: u32) -> Result<ExtReal> {
    p.require_interior("gamma_l")?;
    if j == 0 {
        return Err(EpiError::InvalidArgument("gamma_l needs j ≥ 1".into()));
    }
    let precision = p.precision();
    let jj = ExtReal::from_u64(j, precision);
    let mut acc = ExtReal::zero(precision);
    for k in 2..=(2 * l + 1) {
        let mu = binomial_central_moment(j, p, k);
        acc += &(taylor_coeff(k, p.p())? * &mu / &jj.powi(k as i32));
    }
    Ok(acc)
}

/// `Σ_{j=1}^n Γ_l(j)`, a lower bound on `H[B(n,p)]`.
pub fn cumulative_gamma_bound(n: u64, p: &BernoulliParam, l: u32) -> Result<ExtReal> {
    let mut acc = ExtReal::zero(p.precision());
    for j in 1..=n {
        acc += &gamma_l(j, p, l)?;
    }
    Ok(acc)
}

/// `c(w)`: Faà di Bruno weight × cumulant product × `F^(k)(p)` summed over
/// all partitions with `Σ i_a (g_a - 1) = w`, parts `g ≥ 2`. Such partitions
/// correspond to partitions of `w` with parts `g - 1`, so `k` runs over
/// `w+1..=2w`.
pub fn c_coeff(w: u32, p: &BernoulliParam) -> Result<ExtReal> {
    p.require_interior("c_coeff")?;
    if w == 0 {
        return Err(EpiError::InvalidArgument("c(w) needs w ≥ 1".into()));
    }
    let precision = p.precision();
    let cumulants = bernoulli_cumulants(p, (2 * w) as usize)?;
    let mut acc = ExtReal::zero(precision);
    for shifted in partitions(w, 1) {
        let term = PartitionTerm { parts: shifted.parts.iter().map(|&(h, i)| (h + 1, i)).collect() };
        let k = term.constraint_sum();
        let value = term.cumulant_product(&cumulants)?
            * &ExtReal::from_bigint(&term.weight().into(), precision)
            * &taylor_coeff(k, p.p())?;
        acc += &value;
    }
    Ok(acc)
}

/// Generalized harmonic number `H_n^(w) = Σ_{j≤n} j^{-w}`.
pub fn generalized_harmonic(n: u64, w: u32, precision: Precision) -> ExtReal {
    let mut acc = ExtReal::zero(precision);
    for j in 1..=n {
        acc += &ExtReal::from_u64(j, precision).powi(-(w as i32));
    }
    acc
}

/// `Σ_{w=1}^{W} c(w) H_n^(w)`; with `W = 2` this is
/// `½ H_n + (1 - pq)/(12pq) H_n^(2)`.
pub fn harmonic_lower_bound(n: u64, p: &BernoulliParam, big_w: u32) -> Result<ExtReal> {
    if n == 0 {
        return Err(EpiError::InvalidArgument("harmonic bound needs n ≥ 1".into()));
    }
    if big_w == 0 || !big_w.is_multiple_of(2) {
        return Err(EpiError::InvalidArgument(format!("W must be a positive even number, got {big_w}")));
    }
    let mut acc = ExtReal::zero(p.precision());
    for w in 1..=big_w {
        acc += &(c_coeff(w, p)? * &generalized_harmonic(n, w, p.precision()));
    }
    Ok(acc)
}

/// Where the harmonic-number bound fails against exact entropy.
#[derive(Clone, Debug, Serialize)]
pub struct HarmonicValidity {
    pub n_max: u64,
    /// `n` with `bound(n) > H[B(n,p)] + ε`.
    pub violations: Vec<u64>,
    /// Smallest `n*` such that the bound holds for every `n ∈ [n*, n_max]`.
    pub holds_from: Option<u64>,
}

/// Scans `n = 1..=n_max` and reports the empirical validity region of
/// [`harmonic_lower_bound`].
pub fn harmonic_validity(n_max: u64, p: &BernoulliParam, big_w: u32) -> Result<HarmonicValidity> {
    let eps = p.precision().epsilon();
    let mut ladder = crate::dist::BinomialLadder::new(p.clone()).skip(1);
    let cs: Vec<ExtReal> = (1..=big_w).map(|w| c_coeff(w, p)).collect::<Result<_>>()?;
    let mut sums = vec![ExtReal::zero(p.precision()); big_w as usize];
    let mut violations = Vec::new();
    for n in 1..=n_max {
        let pmf = ladder.next().expect("infinite ladder");
        let mut bound = ExtReal::zero(p.precision());
        for (w, (c, s)) in cs.iter().zip(sums.iter_mut()).enumerate() {
            *s += &ExtReal::from_u64(n, p.precision()).powi(-(w as i32 + 1));
            bound += &(c * &*s);
        }
        if bound > crate::dist::entropy(&pmf) + &eps {
            violations.push(n);
        }
    }
    let holds_from = match violations.last() {
        None => Some(1),
        Some(&last) if last < n_max => Some(last + 1),
        Some(_) => None,
    };
    Ok(HarmonicValidity { n_max, violations, holds_from })
}
