//! Exact rational polynomial engine for the binomial EPI positivity
//! certificates.
//!
//! The step margin is bounded below by
//! `f(n,t) = Σ_{k=2}^{7} F^(k)(p)(n+1)^{-k} μ_k^(n+1) - ½(1/n - 1/(2n²) + 1/(3n³))`
//! and `g(n,t) = 420(n+1)^6 n^3 f(n,t)` is a polynomial in `n` and
//! `t = ω(p)`. A substitution `n = s(t) + m` whose expansion has only
//! nonnegative coefficients proves `g ≥ 0`, hence the margin is positive,
//! for every `m, t ≥ 0`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::dist::BernoulliParam;
use crate::error::{EpiError, Result};
use crate::moments::{central_moment_closed, taylor_coeff};
use crate::precision::ExtReal;

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

fn rat_int(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

/// `num/den`, always with an explicit denominator.
pub fn rational_string(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Which of the two variables an operation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Polynomial in two named variables with exact rational coefficients.
/// Keys are `(deg_x, deg_y)`; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BivarPoly {
    vars: [&'static str; 2],
    coeffs: BTreeMap<(u32, u32), Rational>,
}

impl BivarPoly {
    pub fn zero(vars: [&'static str; 2]) -> Self {
        BivarPoly { vars, coeffs: BTreeMap::new() }
    }

    pub fn constant(vars: [&'static str; 2], c: Rational) -> Self {
        Self::monomial(vars, 0, 0, c)
    }

    pub fn monomial(vars: [&'static str; 2], i: u32, j: u32, c: Rational) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(i, j, c);
        p
    }

    /// The first variable.
    pub fn x(vars: [&'static str; 2]) -> Self {
        Self::monomial(vars, 1, 0, Rational::one())
    }

    /// The second variable.
    pub fn y(vars: [&'static str; 2]) -> Self {
        Self::monomial(vars, 0, 1, Rational::one())
    }

    pub fn from_terms<I: IntoIterator<Item = (u32, u32, Rational)>>(vars: [&'static str; 2], terms: I) -> Self {
        let mut p = Self::zero(vars);
        for (i, j, c) in terms {
            p.add_term(i, j, c);
        }
        p
    }

    fn add_term(&mut self, i: u32, j: u32, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry((i, j)).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(&(i, j));
        }
    }

    pub fn vars(&self) -> [&'static str; 2] {
        self.vars
    }

    /// Same coefficients under new variable names.
    pub fn with_vars(mut self, vars: [&'static str; 2]) -> Self {
        self.vars = vars;
        self
    }

    pub fn coeff(&self, i: u32, j: u32) -> Rational {
        self.coeffs.get(&(i, j)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &Rational)> {
        self.coeffs.iter().map(|(&(i, j), c)| (i, j, c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn degree(&self, axis: Axis) -> u32 {
        self.coeffs.keys().map(|&(i, j)| if axis == Axis::X { i } else { j }).max().unwrap_or(0)
    }

    /// The coefficient of `x^i` as a polynomial in `y` (same variable names).
    pub fn x_slice(&self, i: u32) -> BivarPoly {
        Self::from_terms(self.vars, self.terms().filter(|t| t.0 == i).map(|(_, j, c)| (0, j, c.clone())))
    }

    pub fn scale(&self, c: &Rational) -> BivarPoly {
        Self::from_terms(self.vars, self.terms().map(|(i, j, v)| (i, j, v * c)))
    }

    pub fn pow(&self, e: u32) -> BivarPoly {
        let mut acc = Self::constant(self.vars, Rational::one());
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    pub fn eval(&self, x: &Rational, y: &Rational) -> Rational {
        self.terms().fold(Rational::zero(), |acc, (i, j, c)| acc + c * pow_q(x, i) * pow_q(y, j))
    }

    pub fn eval_ext(&self, x: &ExtReal, y: &ExtReal) -> ExtReal {
        let precision = x.precision();
        let mut acc = ExtReal::zero(precision);
        for (i, j, c) in self.terms() {
            acc += &(ExtReal::from_rational(c, precision) * &x.powi(i as i32) * &y.powi(j as i32));
        }
        acc
    }

    /// `p(X, Y)` with `X`, `Y` polynomials in a common variable pair.
    pub fn substitute(&self, x_sub: &BivarPoly, y_sub: &BivarPoly) -> BivarPoly {
        assert_eq!(x_sub.vars, y_sub.vars, "substituted polynomials must share variables");
        let vars = x_sub.vars;
        let x_pows = powers(x_sub, self.degree(Axis::X));
        let y_pows = powers(y_sub, self.degree(Axis::Y));
        let mut out = Self::zero(vars);
        for (i, j, c) in self.terms() {
            out = &out + &(&x_pows[i as usize] * &y_pows[j as usize]).scale(c);
        }
        out
    }

    /// Exact quotient by `(var + c)`, or `None` when the remainder is nonzero.
    pub fn divide_linear(&self, axis: Axis, c: &Rational) -> Option<BivarPoly> {
        // group by the other variable's degree and run synthetic division on
        // each univariate slice
        let mut slices: BTreeMap<u32, BTreeMap<u32, Rational>> = BTreeMap::new();
        for (i, j, v) in self.terms() {
            let (along, other) = if axis == Axis::X { (i, j) } else { (j, i) };
            slices.entry(other).or_default().insert(along, v.clone());
        }
        let root = -c;
        let mut out = Self::zero(self.vars);
        for (other, slice) in slices {
            let deg = *slice.keys().next_back().expect("nonempty slice");
            let mut carry = Rational::zero();
            for d in (0..=deg).rev() {
                let a = slice.get(&d).cloned().unwrap_or_else(Rational::zero) + &carry * &root;
                if d == 0 {
                    if !a.is_zero() {
                        return None;
                    }
                } else {
                    let (i, j) = if axis == Axis::X { (d - 1, other) } else { (other, d - 1) };
                    out.add_term(i, j, a.clone());
                }
                carry = a;
            }
        }
        Some(out)
    }

    pub fn min_coefficient(&self) -> Option<&Rational> {
        self.coeffs.values().min()
    }

    pub fn all_nonneg(&self) -> bool {
        self.coeffs.values().all(|c| !c.is_negative())
    }

    /// Terms ordered by `deg_x` descending, then `deg_y` ascending.
    pub fn sorted_terms(&self) -> Vec<(u32, u32, Rational)> {
        let mut v: Vec<_> = self.terms().map(|(i, j, c)| (i, j, c.clone())).collect();
        v.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        v
    }
}

fn pow_q(x: &Rational, e: u32) -> Rational {
    (0..e).fold(Rational::one(), |acc, _| acc * x)
}

fn powers(p: &BivarPoly, max: u32) -> Vec<BivarPoly> {
    let mut out = vec![BivarPoly::constant(p.vars, Rational::one())];
    for k in 1..=max as usize {
        let next = &out[k - 1] * p;
        out.push(next);
    }
    out
}

impl fmt::Display for BivarPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let [vx, vy] = self.vars;
        for (idx, (i, j, c)) in self.sorted_terms().into_iter().enumerate() {
            let sign = if c.is_negative() {
                "-"
            } else if idx == 0 {
                ""
            } else {
                "+"
            };
            if idx > 0 {
                write!(f, " {sign} ")?;
            } else {
                write!(f, "{sign}")?;
            }
            write!(f, "{}", c.abs())?;
            match i {
                0 => {}
                1 => write!(f, "*{vx}")?,
                _ => write!(f, "*{vx}^{i}")?,
            }
            match j {
                0 => {}
                1 => write!(f, "*{vy}")?,
                _ => write!(f, "*{vy}^{j}")?,
            }
        }
        Ok(())
    }
}

impl Add<&BivarPoly> for &BivarPoly {
    type Output = BivarPoly;
    fn add(self, rhs: &BivarPoly) -> BivarPoly {
        let mut out = self.clone();
        for (i, j, c) in rhs.terms() {
            out.add_term(i, j, c.clone());
        }
        out
    }
}

impl Sub<&BivarPoly> for &BivarPoly {
    type Output = BivarPoly;
    fn sub(self, rhs: &BivarPoly) -> BivarPoly {
        let mut out = self.clone();
        for (i, j, c) in rhs.terms() {
            out.add_term(i, j, -c);
        }
        out
    }
}

impl Mul<&BivarPoly> for &BivarPoly {
    type Output = BivarPoly;
    fn mul(self, rhs: &BivarPoly) -> BivarPoly {
        let mut out = BivarPoly::zero(self.vars);
        for (i1, j1, c1) in self.terms() {
            for (i2, j2, c2) in rhs.terms() {
                out.add_term(i1 + i2, j1 + j2, c1 * c2);
            }
        }
        out
    }
}

impl Neg for &BivarPoly {
    type Output = BivarPoly;
    fn neg(self) -> BivarPoly {
        self.scale(&-Rational::one())
    }
}

const NT: [&str; 2] = ["n", "t"];
const NR: [&str; 2] = ["n", "r"];
const MT: [&str; 2] = ["m", "t"];

/// Allowed denominator factors of a [`RationalExpr`] in `(n, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DenomFactor {
    N,
    NPlusOne,
    TPlusFour,
    OnePlusT,
}

impl DenomFactor {
    fn axis_and_shift(self) -> (Axis, Rational) {
        match self {
            DenomFactor::N => (Axis::X, Rational::zero()),
            DenomFactor::NPlusOne => (Axis::X, Rational::one()),
            DenomFactor::TPlusFour => (Axis::Y, rat_int(4)),
            DenomFactor::OnePlusT => (Axis::Y, Rational::one()),
        }
    }

    pub fn as_poly(self) -> BivarPoly {
        let (axis, c) = self.axis_and_shift();
        let v = if axis == Axis::X { BivarPoly::x(NT) } else { BivarPoly::y(NT) };
        &v + &BivarPoly::constant(NT, c)
    }
}

impl fmt::Display for DenomFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DenomFactor::N => "n",
            DenomFactor::NPlusOne => "(n+1)",
            DenomFactor::TPlusFour => "(t+4)",
            DenomFactor::OnePlusT => "(1+t)",
        };
        f.write_str(s)
    }
}

/// `numerator / Π factor^e` in `(n, t)`, kept in lowest terms with respect to
/// the allowed factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalExpr {
    numerator: BivarPoly,
    denominator: BTreeMap<DenomFactor, u32>,
}

impl RationalExpr {
    pub fn new(numerator: BivarPoly, denominator: BTreeMap<DenomFactor, u32>) -> Self {
        let mut e = RationalExpr { numerator: numerator.with_vars(NT), denominator };
        e.cancel();
        e
    }

    pub fn polynomial(p: BivarPoly) -> Self {
        Self::new(p, BTreeMap::new())
    }

    pub fn numerator(&self) -> &BivarPoly {
        &self.numerator
    }

    pub fn denominator(&self) -> &BTreeMap<DenomFactor, u32> {
        &self.denominator
    }

    pub fn denominator_exponent(&self, f: DenomFactor) -> u32 {
        self.denominator.get(&f).copied().unwrap_or(0)
    }

    fn cancel(&mut self) {
        self.denominator.retain(|_, e| *e > 0);
        if self.numerator.is_zero() {
            self.denominator.clear();
            return;
        }
        let factors: Vec<_> = self.denominator.keys().copied().collect();
        for f in factors {
            let (axis, c) = f.axis_and_shift();
            while self.denominator_exponent(f) > 0 {
                match self.numerator.divide_linear(axis, &c) {
                    Some(q) => {
                        self.numerator = q;
                        let e = self.denominator.get_mut(&f).expect("present");
                        *e -= 1;
                    }
                    None => break,
                }
            }
        }
        self.denominator.retain(|_, e| *e > 0);
    }

    /// Multiply by `f^e` for a signed exponent `e`.
    pub fn mul_factor(&self, f: DenomFactor, e: i32) -> RationalExpr {
        let mut numerator = self.numerator.clone();
        let mut denominator = self.denominator.clone();
        let current = denominator.get(&f).copied().unwrap_or(0) as i32;
        let net = current - e;
        if net >= 0 {
            denominator.insert(f, net as u32);
        } else {
            denominator.remove(&f);
            numerator = &numerator * &f.as_poly().pow((-net) as u32);
        }
        RationalExpr::new(numerator, denominator)
    }

    pub fn scale(&self, c: &Rational) -> RationalExpr {
        RationalExpr::new(self.numerator.scale(c), self.denominator.clone())
    }

    pub fn eval(&self, n: &Rational, t: &Rational) -> Option<Rational> {
        let mut den = Rational::one();
        for (f, &e) in &self.denominator {
            den *= pow_q(&f.as_poly().eval(n, t), e);
        }
        if den.is_zero() {
            None
        } else {
            Some(self.numerator.eval(n, t) / den)
        }
    }

    /// Drop the denominator, failing if one is left.
    pub fn into_polynomial(self) -> Result<BivarPoly> {
        if self.denominator.is_empty() {
            Ok(self.numerator)
        } else {
            Err(EpiError::Consistency(format!("non-polynomial remainder: denominator {}", self.denominator_string())))
        }
    }

    fn denominator_string(&self) -> String {
        let parts: Vec<String> =
            self.denominator.iter().map(|(f, e)| if *e == 1 { f.to_string() } else { format!("{f}^{e}") }).collect();
        parts.join("*")
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Add<&RationalExpr> for &RationalExpr {
    type Output = RationalExpr;
    fn add(self, rhs: &RationalExpr) -> RationalExpr {
        let mut common = self.denominator.clone();
        for (&f, &e) in &rhs.denominator {
            let slot = common.entry(f).or_insert(0);
            *slot = (*slot).max(e);
        }
        let lift = |x: &RationalExpr| {
            let mut p = x.numerator.clone();
            for (&f, &e) in &common {
                let missing = e - x.denominator_exponent(f);
                if missing > 0 {
                    p = &p * &f.as_poly().pow(missing);
                }
            }
            p
        };
        RationalExpr::new(&lift(self) + &lift(rhs), common)
    }
}

impl fmt::Display for RationalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator.is_empty() {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "({}) / ({})", self.numerator, self.denominator_string())
        }
    }
}

/// `μ_k^(n)` of `B(n,p)` as a polynomial in `n` and `r = p - 1/2`.
pub fn moment_poly_nr(k: u32) -> Result<BivarPoly> {
    let n = BivarPoly::x(NR);
    let r = BivarPoly::y(NR);
    let c = |v: Rational| BivarPoly::constant(NR, v);
    let r2 = &r * &r;
    let r4 = &r2 * &r2;
    let s = &c(rat_int(1)) - &r2.scale(&rat_int(4));
    let ns = &n * &s;
    let lin = |a: i64, b: i64, d: i64| &(&c(rat_int(a)) + &r2.scale(&rat_int(b))) + &r4.scale(&rat_int(d));
    let p = match k {
        2 => ns.scale(&rat(1, 4)),
        3 => (&ns * &r).scale(&rat(-1, 2)),
        4 => {
            let inner = &(&c(rat_int(-2)) + &r2.scale(&rat_int(24))) + &ns.scale(&rat_int(3));
            (&ns * &inner).scale(&rat(1, 16))
        }
        5 => {
            let inner = &(&c(rat_int(-4)) + &r2.scale(&rat_int(24))) + &ns.scale(&rat_int(5));
            (&(&ns * &r) * &inner).scale(&rat(-1, 4))
        }
        6 => {
            let a = (&(&n * &n) * &(&s * &s)).scale(&rat_int(15));
            let b = lin(1, -30, 120).scale(&rat_int(16));
            let d = (&n * &lin(3, -64, 208)).scale(&rat_int(10));
            (&ns * &(&(&a + &b) - &d)).scale(&rat(1, 64))
        }
        7 => {
            let a = (&(&n * &n) * &(&s * &s)).scale(&rat_int(105));
            let b = (&n * &lin(17, -200, 528)).scale(&rat_int(14));
            let d = lin(17, -240, 720).scale(&rat_int(8));
            (&(&ns * &r) * &(&(&a - &b) + &d)).scale(&rat(-1, 32))
        }
        _ => return Err(EpiError::InvalidArgument(format!("symbolic moments cover k = 2..=7, got {k}"))),
    };
    Ok(p)
}

/// `r^{2j} → t^j / (4^j (t+4)^j)`; every monomial must carry an even power
/// of `r`.
pub fn eliminate_r(p: &BivarPoly) -> Result<RationalExpr> {
    if let Some((i, j, _)) = p.terms().find(|t| t.1 % 2 == 1) {
        return Err(EpiError::Consistency(format!("odd power r^{j} survives in monomial n^{i} r^{j}")));
    }
    let big_j = p.degree(Axis::Y) / 2;
    let t4 = DenomFactor::TPlusFour.as_poly();
    let mut numerator = BivarPoly::zero(NT);
    for (i, j, c) in p.terms() {
        let half = j / 2;
        let coeff = c / pow_q(&rat_int(4), half);
        let mono = BivarPoly::monomial(NT, i, half, coeff);
        numerator = &numerator + &(&mono * &t4.pow(big_j - half));
    }
    let mut den = BTreeMap::new();
    den.insert(DenomFactor::TPlusFour, big_j);
    Ok(RationalExpr::new(numerator, den))
}

/// `μ_k^(n) = r^{r_power} · expr(n, t)`.
#[derive(Clone, Debug)]
pub struct SymbolicMoment {
    pub k: u32,
    pub r_power: u32,
    pub expr: RationalExpr,
}

pub fn symbolic_moments(k: u32) -> Result<SymbolicMoment> {
    let p = moment_poly_nr(k)?;
    if k.is_multiple_of(2) {
        return Ok(SymbolicMoment { k, r_power: 0, expr: eliminate_r(&p)? });
    }
    let reduced = p
        .divide_linear(Axis::Y, &Rational::zero())
        .ok_or_else(|| EpiError::Consistency(format!("odd moment {k} lacks a factor r")))?;
    Ok(SymbolicMoment { k, r_power: 1, expr: eliminate_r(&reduced)? })
}

/// `(½+r)^{k-1} + (-1)^k (½-r)^{k-1}`, the numerator of `F^(k)` over
/// `(¼-r²)^{k-1} k(k-1)`.
fn taylor_numerator_r(k: u32) -> BivarPoly {
    let half = BivarPoly::constant(NR, rat(1, 2));
    let r = BivarPoly::y(NR);
    let plus = (&half + &r).pow(k - 1);
    let minus = (&half - &r).pow(k - 1);
    if k.is_multiple_of(2) {
        &plus + &minus
    } else {
        &plus - &minus
    }
}

/// `f(n,t)` as an exact rational expression. The `k = 1` term vanishes
/// because the first central moment is zero.
pub fn symbolic_f() -> Result<RationalExpr> {
    let shift_n = &BivarPoly::x(NR) + &BivarPoly::constant(NR, Rational::one());
    let r = BivarPoly::y(NR);
    let mut f = RationalExpr::polynomial(BivarPoly::zero(NT));
    for k in 2..=7u32 {
        let mu = moment_poly_nr(k)?.substitute(&shift_n, &r);
        let product = (&taylor_numerator_r(k) * &mu).scale(&rat(1, (k * (k - 1)) as i64));
        // (¼ - r²)^{-(k-1)} = (t+4)^{k-1}
        let term = eliminate_r(&product)?
            .mul_factor(DenomFactor::TPlusFour, k as i32 - 1)
            .mul_factor(DenomFactor::NPlusOne, -(k as i32));
        f = &f + &term;
    }
    // -½ (1/n - 1/(2n²) + 1/(3n³)) = -(6n² - 3n + 2) / (12 n³)
    let tail_num = BivarPoly::from_terms(NT, [(2, 0, rat(-1, 2)), (1, 0, rat(1, 4)), (0, 0, rat(-1, 6))]);
    let mut den = BTreeMap::new();
    den.insert(DenomFactor::N, 3);
    Ok(&f + &RationalExpr::new(tail_num, den))
}

/// `g(n,t) = 420 (n+1)^6 n^3 f(n,t)`.
pub fn build_g() -> Result<BivarPoly> {
    static G: OnceLock<Result<BivarPoly>> = OnceLock::new();
    G.get_or_init(|| {
        symbolic_f()?
            .scale(&rat_int(420))
            .mul_factor(DenomFactor::NPlusOne, 6)
            .mul_factor(DenomFactor::N, 3)
            .into_polynomial()
    })
    .clone()
}

/// `f(n, ω(p))` from the numeric moment and Taylor-coefficient routines.
pub fn numeric_f(n: u64, p: &BernoulliParam) -> Result<ExtReal> {
    if n == 0 {
        return Err(EpiError::InvalidArgument("numeric_f needs n ≥ 1".into()));
    }
    let precision = p.precision();
    let np1 = ExtReal::from_u64(n + 1, precision);
    let mut acc = ExtReal::zero(precision);
    for k in 2..=7 {
        let mu = central_moment_closed(n + 1, p, k)?;
        acc += &(taylor_coeff(k, p.p())? * &mu / &np1.powi(k as i32));
    }
    let nn = ExtReal::from_u64(n, precision);
    let tail = nn.recip() - &(nn.square() * 2).recip() + &(nn.powi(3) * 3).recip();
    Ok(acc - &(tail / 2))
}

/// `420 (n+1)^6 n^3 f(n, ω(p))` evaluated numerically.
pub fn numeric_g(n: u64, p: &BernoulliParam) -> Result<ExtReal> {
    let precision = p.precision();
    let nn = ExtReal::from_u64(n, precision);
    let np1 = ExtReal::from_u64(n + 1, precision);
    Ok(numeric_f(n, p)? * &np1.powi(6) * &nn.powi(3) * 420)
}

/// `g(a t + b + m, t)` in `(m, t)`.
pub fn shift_expand(g: &BivarPoly, a: &Rational, b: &Rational) -> BivarPoly {
    quadratic_shift_expand(g, &Rational::zero(), a, b)
}

/// `g(a2 t² + a1 t + b + m, t)` in `(m, t)`.
pub fn quadratic_shift_expand(g: &BivarPoly, a2: &Rational, a1: &Rational, b: &Rational) -> BivarPoly {
    let n_sub =
        BivarPoly::from_terms(MT, [(1, 0, Rational::one()), (0, 2, a2.clone()), (0, 1, a1.clone()), (0, 0, b.clone())]);
    g.substitute(&n_sub, &BivarPoly::y(MT))
}

/// `(4(1+t))^D g(n_shift + m, t/(4(1+t)))` with `D = deg_t g`, a polynomial
/// in `(m, t)`.
pub fn rational_substitute_t(g: &BivarPoly, n_shift: &Rational) -> BivarPoly {
    let shifted = shift_expand(g, &Rational::zero(), n_shift);
    let big_d = shifted.degree(Axis::Y);
    let one_plus_t = BivarPoly::from_terms(MT, [(0, 0, Rational::one()), (0, 1, Rational::one())]);
    let mut out = BivarPoly::zero(MT);
    for (i, j, c) in shifted.terms() {
        let scale = c * pow_q(&rat_int(4), big_d - j);
        let mono = BivarPoly::monomial(MT, i, j, scale);
        out = &out + &(&mono * &one_plus_t.pow(big_d - j));
    }
    out
}

/// The substitutions with a certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Substitution {
    /// `n = 111/25 t + 7 + m`
    A,
    /// `n = 2219/500 t + 7 + m`
    APrime,
    /// `n = t² + 117/50 t + 7 + m`
    B,
    /// `n = 7 + m` with `t → t/(4(1+t))`, covering `ω(p) < 1/4`
    C,
    /// `n = t + 1 + m`, expected to fail
    Control,
}

impl Substitution {
    pub const ALL: [Substitution; 5] =
        [Substitution::A, Substitution::APrime, Substitution::B, Substitution::C, Substitution::Control];

    pub fn id(self) -> &'static str {
        match self {
            Substitution::A => "A",
            Substitution::APrime => "A'",
            Substitution::B => "B",
            Substitution::C => "C",
            Substitution::Control => "control",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Substitution::A => "n = 111/25 t + 7 + m",
            Substitution::APrime => "n = 2219/500 t + 7 + m",
            Substitution::B => "n = t^2 + 117/50 t + 7 + m",
            Substitution::C => "n = 7 + m, t -> t/(4(1+t)), scaled by (4(1+t))^5",
            Substitution::Control => "n = t + 1 + m",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Substitution::A),
            "A'" | "A′" | "Aprime" | "aprime" | "a'" => Ok(Substitution::APrime),
            "B" | "b" => Ok(Substitution::B),
            "C" | "c" => Ok(Substitution::C),
            "control" | "Control" => Ok(Substitution::Control),
            other => Err(EpiError::InvalidArgument(format!("unknown substitution {other:?}"))),
        }
    }

    /// The expanded polynomial in `(m, t)`.
    pub fn expand(self, g: &BivarPoly) -> BivarPoly {
        match self {
            Substitution::A => shift_expand(g, &rat(111, 25), &rat_int(7)),
            Substitution::APrime => shift_expand(g, &rat(2219, 500), &rat_int(7)),
            Substitution::B => quadratic_shift_expand(g, &Rational::one(), &rat(117, 50), &rat_int(7)),
            Substitution::C => rational_substitute_t(g, &rat_int(7)),
            Substitution::Control => shift_expand(g, &Rational::one(), &Rational::one()),
        }
    }
}

/// One stored coefficient, serialized as `[deg_m, deg_t, "num/den"]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientEntry {
    pub deg_m: u32,
    pub deg_t: u32,
    pub value: Rational,
}

impl Serialize for CoefficientEntry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.deg_m, self.deg_t, rational_string(&self.value)).serialize(s)
    }
}

fn serialize_rational<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(q))
}

/// Field order is alphabetical so the derived JSON has sorted keys.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub all_nonneg: bool,
    pub coefficients: Vec<CoefficientEntry>,
    #[serde(serialize_with = "serialize_rational")]
    pub min_coefficient: Rational,
    pub substitution: String,
    #[serde(skip)]
    pub polynomial: BivarPoly,
}

impl CertificateReport {
    pub fn from_polynomial(substitution: &str, polynomial: BivarPoly) -> Self {
        let coefficients = polynomial
            .sorted_terms()
            .into_iter()
            .map(|(deg_m, deg_t, value)| CoefficientEntry { deg_m, deg_t, value })
            .collect();
        let min_coefficient = polynomial.min_coefficient().cloned().unwrap_or_else(Rational::zero);
        CertificateReport {
            all_nonneg: polynomial.all_nonneg(),
            coefficients,
            min_coefficient,
            substitution: substitution.to_string(),
            polynomial,
        }
    }

    pub fn negative_count(&self) -> usize {
        self.coefficients.iter().filter(|c| c.value.is_negative()).count()
    }
}

pub fn certify(sub: Substitution) -> Result<CertificateReport> {
    let g = build_g()?;
    Ok(CertificateReport::from_polynomial(sub.id(), sub.expand(&g)))
}

/// A coefficient printed as a rounded decimal times `10^scale_exp`.
#[derive(Clone, Copy, Debug)]
pub struct RoundedCoefficient {
    pub deg_m: u32,
    pub deg_t: u32,
    pub printed: &'static str,
    pub scale_exp: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingVerdict {
    /// Exact value rounds to the printed decimals.
    Rounded,
    /// Off by at most one unit in the last printed digit, e.g. truncated.
    LastDigit,
    Mismatch,
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundedCheck {
    pub deg_m: u32,
    pub deg_t: u32,
    pub printed: String,
    pub scale_exp: u32,
    pub exact: String,
    pub verdict: RoundingVerdict,
}

fn parse_decimal(s: &str) -> Result<(Rational, u32)> {
    let bad = || EpiError::InvalidArgument(format!("not a decimal literal: {s:?}"));
    let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
    let digits = frac_part.len() as u32;
    let joined = format!("{int_part}{frac_part}");
    let v: BigInt = joined.parse().map_err(|_| bad())?;
    Ok((Rational::new(v, BigInt::from(10).pow(digits)), digits))
}

fn round_half_away(q: &Rational) -> BigInt {
    let half = rat(1, 2);
    if q.is_negative() {
        -(-q + half).floor().to_integer()
    } else {
        (q + half).floor().to_integer()
    }
}

/// Compare exact coefficients with a table of printed rounded values.
pub fn check_rounded(poly: &BivarPoly, table: &[RoundedCoefficient]) -> Result<Vec<RoundedCheck>> {
    table
        .iter()
        .map(|entry| {
            let (printed, digits) = parse_decimal(entry.printed)?;
            let exact = poly.coeff(entry.deg_m, entry.deg_t);
            let unit = Rational::from_integer(BigInt::from(10).pow(digits));
            let scaled = &exact / Rational::from_integer(BigInt::from(10).pow(entry.scale_exp)) * &unit;
            let target = (&printed * &unit).to_integer();
            let verdict = if round_half_away(&scaled) == target {
                RoundingVerdict::Rounded
            } else if (scaled - Rational::from_integer(target)).abs() <= Rational::one() {
                RoundingVerdict::LastDigit
            } else {
                RoundingVerdict::Mismatch
            };
            Ok(RoundedCheck {
                deg_m: entry.deg_m,
                deg_t: entry.deg_t,
                printed: entry.printed.to_string(),
                scale_exp: entry.scale_exp,
                exact: rational_string(&exact),
                verdict,
            })
        })
        .collect()
}

macro_rules! rounded_row {
    ($m:expr, $e:expr; $($t:expr => $v:expr),* $(,)?) => {
        [$(RoundedCoefficient { deg_m: $m, deg_t: $t, printed: $v, scale_exp: $e }),*]
    };
}

/// Published rounded expansion of `g(4.44t + 7 + m, t)`.
pub const REFERENCE_A_ROUNDED: [RoundedCoefficient; 43] = {
    let r7 = rounded_row!(7, 0; 1 => "35");
    let r6 = rounded_row!(6, 0; 2 => "1122.8", 1 => "2030", 0 => "70");
    let r5 = rounded_row!(5, 0; 3 => "14700.90", 2 => "52210.20", 1 => "48120.80", 0 => "2625");
    let r4 = rounded_row!(4, 5; 4 => "1.01", 3 => "5.32", 2 => "9.57", 1 => "6.06", 0 => "0.40");
    let r3 = rounded_row!(3, 5; 5 => "3.85", 4 => "26.94", 3 => "72.32", 2 => "88.61", 1 => "43.61", 0 => "3.02");
    let r2 = rounded_row!(2, 5; 6 => "7.76", 5 => "68.23", 4 => "247.042", 3 => "456.97", 2 => "433.17",
        1 => "176.77", 0 => "11.80");
    let r1 = rounded_row!(1, 5; 7 => "6.47", 6 => "70.91", 5 => "338.88", 4 => "880.98", 3 => "1297.85",
        2 => "1030.51", 1 => "361.59", 0 => "20.14");
    let r0 = rounded_row!(0, 4; 8 => "0.15", 7 => "56.29", 6 => "709.80", 5 => "3485.03", 4 => "8728.40",
        3 => "11955.74", 2 => "8613.06", 1 => "2628.77", 0 => "64.15");
    [
        r7[0], r6[0], r6[1], r6[2], r5[0], r5[1], r5[2], r5[3], r4[0], r4[1], r4[2], r4[3], r4[4], r3[0], r3[1], r3[2],
        r3[3], r3[4], r3[5], r2[0], r2[1], r2[2], r2[3], r2[4], r2[5], r2[6], r1[0], r1[1], r1[2], r1[3], r1[4], r1[5],
        r1[6], r1[7], r0[0], r0[1], r0[2], r0[3], r0[4], r0[5], r0[6], r0[7], r0[8],
    ]
};

/// The published `g(n, t)`, term by term.
pub fn reference_g() -> BivarPoly {
    let t = |n: u32, cs: &[(u32, i64)]| cs.iter().map(move |&(j, c)| (n, j, rat_int(c))).collect::<Vec<_>>();
    let mut terms = Vec::new();
    terms.extend(t(7, &[(1, 35)]));
    terms.extend(t(6, &[(2, 35), (1, 315), (0, 70)]));
    terms.extend(t(5, &[(3, -721), (2, -3339), (1, -2989), (0, -315)]));
    terms.extend(t(4, &[(4, -546), (3, -1568), (2, 371), (1, 721), (0, -826)]));
    terms.extend(t(3, &[(5, -10), (4, -66), (3, -157), (2, -135), (1, -90), (0, -826)]));
    terms.extend(t(2, &[(0, -630)]));
    terms.extend(t(1, &[(0, -315)]));
    terms.extend(t(0, &[(0, -70)]));
    BivarPoly::from_terms(NT, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::Precision;

    #[test]
    fn poly_arithmetic_basics() {
        let x = BivarPoly::x(NT);
        let y = BivarPoly::y(NT);
        let p = &(&x + &y) * &(&x - &y);
        assert_eq!(p, &(&x * &x) - &(&y * &y));
        assert!((&p - &p).is_zero());
        assert_eq!(p.eval(&rat_int(3), &rat_int(2)), rat_int(5));
        let one = BivarPoly::constant(NT, Rational::one());
        let d = &(&x - &one) * &(&x + &y);
        let q = d.divide_linear(Axis::X, &rat_int(-1)).unwrap();
        assert_eq!(q, &x + &y);
        assert!(p.divide_linear(Axis::Y, &rat_int(5)).is_none());
        assert_eq!(x.pow(3).degree(Axis::X), 3);
    }

    #[test]
    fn symbolic_moment_examples() {
        let m2 = symbolic_moments(2).unwrap();
        let expect = RationalExpr::new(BivarPoly::x(NT), [(DenomFactor::TPlusFour, 1)].into());
        assert_eq!(m2.expr, expect);
        let m3 = symbolic_moments(3).unwrap();
        assert_eq!(m3.r_power, 1);
        let m4 = symbolic_moments(4).unwrap();
        assert_eq!(m4.expr.eval(&rat_int(4), &Rational::zero()), Some(rat(5, 2)));
        assert!(symbolic_moments(8).is_err());
        assert!(symbolic_moments(1).is_err());
    }

    #[test]
    fn symbolic_moments_match_numeric_closed_forms() {
        let precision = Precision::default();
        let p = BernoulliParam::parse("0.3", precision).unwrap();
        let r = p.r();
        for k in 2..=7 {
            let sm = symbolic_moments(k).unwrap();
            let t = p.omega().unwrap();
            for n in [1u64, 3, 10] {
                let nn = ExtReal::from_u64(n, precision);
                let mut den = ExtReal::one(precision);
                for (f, &e) in sm.expr.denominator() {
                    den *= &f.as_poly().eval_ext(&nn, &t).powi(e as i32);
                }
                let mut v = sm.expr.numerator().eval_ext(&nn, &t) / &den;
                if sm.r_power == 1 {
                    v *= &r;
                }
                let closed = central_moment_closed(n, &p, k).unwrap();
                assert!((v - &closed).abs() <= precision.epsilon(), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn odd_r_power_is_rejected() {
        let p = BivarPoly::y(NR);
        assert!(matches!(eliminate_r(&p), Err(EpiError::Consistency(_))));
    }

    #[test]
    fn f_examples() {
        let f = symbolic_f().unwrap();
        assert!(f.eval(&rat_int(7), &Rational::zero()).unwrap() > Rational::zero());
        assert!(f.eval(&rat_int(1), &Rational::zero()).unwrap() < Rational::zero());
        assert!(f.denominator_exponent(DenomFactor::N) <= 3);
        assert!(f.denominator_exponent(DenomFactor::NPlusOne) <= 6);
        assert_eq!(f.denominator_exponent(DenomFactor::TPlusFour), 0);
    }

    #[test]
    fn g_matches_published_polynomial() {
        let g = build_g().unwrap();
        assert_eq!(g, reference_g());
        assert_eq!(g.coeff(7, 1), rat_int(35));
        assert_eq!(g.coeff(0, 0), rat_int(-70));
        assert_eq!(g.eval(&rat_int(7), &Rational::zero()), rat_int(641536));
    }

    #[test]
    fn shift_examples() {
        let g = build_g().unwrap();
        let a = shift_expand(&g, &rat(111, 25), &rat_int(7));
        assert_eq!(a.coeff(7, 1), rat_int(35));
        assert_eq!(a.coeff(6, 2), rat(5614, 5));
        assert_eq!(a.coeff(6, 1), rat_int(2030));
        assert_eq!(a.coeff(6, 0), rat_int(70));
        assert_eq!(shift_expand(&g, &Rational::zero(), &Rational::zero()), g.clone().with_vars(MT));
        let q = quadratic_shift_expand(&g, &Rational::zero(), &rat(111, 25), &rat_int(7));
        assert_eq!(q, a);
    }

    #[test]
    fn quadratic_shift_evaluation() {
        let g = build_g().unwrap();
        let b = quadratic_shift_expand(&g, &Rational::one(), &rat(117, 50), &rat_int(7));
        let n = rat_int(1) + rat(117, 50) + rat_int(7) + rat_int(1);
        assert_eq!(b.eval(&rat_int(1), &rat_int(1)), g.eval(&n, &rat_int(1)));
        assert_eq!(
            b.eval(&rat_int(1), &rat_int(1)),
            Rational::new("50581090401400763561".parse().unwrap(), "156250000000".parse().unwrap())
        );
    }

    #[test]
    fn rational_t_substitution_examples() {
        let g = build_g().unwrap();
        let c = rational_substitute_t(&g, &rat_int(7));
        assert!(c.all_nonneg());
        let a = shift_expand(&g, &Rational::zero(), &rat_int(7));
        for i in 0..=7 {
            assert_eq!(c.coeff(i, 0), a.coeff(i, 0) * rat_int(1024));
        }
        assert!(c.eval(&rat_int(2), &rat(1, 8)) >= Rational::zero());
        // direct check of the definition at a rational point
        let (m0, t0) = (rat(3, 2), rat(2, 7));
        let s = &t0 / (rat_int(4) * (rat_int(1) + &t0));
        let lhs = c.eval(&m0, &t0);
        let rhs = g.eval(&(rat_int(7) + &m0), &s) * pow_q(&(rat_int(4) * (rat_int(1) + &t0)), 5);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn certificates() {
        for sub in [Substitution::A, Substitution::APrime, Substitution::B] {
            let r = certify(sub).unwrap();
            assert!(r.all_nonneg, "{}", sub.id());
            assert_eq!(r.min_coefficient, rat_int(35));
        }
        let c = certify(Substitution::C).unwrap();
        assert!(c.all_nonneg);
        assert_eq!(c.min_coefficient, rat_int(8960));
        let ctl = certify(Substitution::Control).unwrap();
        assert!(!ctl.all_nonneg);
        assert_eq!(ctl.min_coefficient, rat_int(-163154));
        assert_eq!(certify(Substitution::A).unwrap().coefficients.len(), 43);
    }

    #[test]
    fn certificate_json_shape() {
        let r = certify(Substitution::A).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["substitution"], "A");
        assert_eq!(v["all_nonneg"], true);
        assert_eq!(v["min_coefficient"], "35/1");
        assert_eq!(v["coefficients"][0], serde_json::json!([7, 1, "35/1"]));
        assert_eq!(v["coefficients"][1], serde_json::json!([6, 0, "70/1"]));
    }

    #[test]
    fn rounded_table_agrees() {
        let a = certify(Substitution::A).unwrap().polynomial;
        let checks = check_rounded(&a, &REFERENCE_A_ROUNDED).unwrap();
        assert_eq!(checks.len(), a.len());
        for c in &checks {
            let expected = if c.printed == "247.042" { RoundingVerdict::LastDigit } else { RoundingVerdict::Rounded };
            assert_eq!(c.verdict, expected, "m^{} t^{}: {} vs {}", c.deg_m, c.deg_t, c.printed, c.exact);
        }
    }

    #[test]
    fn numeric_bridge() {
        let precision = Precision::default();
        let g = build_g().unwrap();
        for ps in ["0.5", "0.3", "0.85"] {
            let p = BernoulliParam::parse(ps, precision).unwrap();
            let t = p.omega().unwrap();
            for n in [1u64, 5, 20] {
                let sym = g.eval_ext(&ExtReal::from_u64(n, precision), &t);
                let num = numeric_g(n, &p).unwrap();
                let scale = sym.abs().max(ExtReal::one(precision));
                assert!((sym - &num).abs() <= precision.epsilon() * &scale, "p={ps} n={n}");
            }
        }
    }
}
