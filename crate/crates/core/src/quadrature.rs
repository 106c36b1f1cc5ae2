//! Adaptive Gauss–Legendre quadrature at working precision.

use crate::error::{EpiError, Result};
use crate::precision::{ExtReal, Precision};

/// Nodes and weights of an `order`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<ExtReal>,
    weights: Vec<ExtReal>,
}

impl GaussLegendre {
    /// Roots of `P_order` by Newton iteration from the usual cosine guesses.
    pub fn new(order: usize, precision: Precision) -> Self {
        assert!(order >= 2, "rule order must be at least 2");
        let eps = precision.epsilon() * &ExtReal::from_ratio(1, 1000, precision);
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        let nf = order as f64;
        for i in 1..=order {
            let guess = (std::f64::consts::PI * (i as f64 - 0.25) / (nf + 0.5)).cos();
            let mut x = ExtReal::from_f64(guess, precision);
            let mut deriv = ExtReal::zero(precision);
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(order, &x);
                let dx = &p / &dp;
                x -= &dx;
                deriv = dp;
                if dx.abs() <= eps {
                    let (_, dp) = legendre_with_derivative(order, &x);
                    deriv = dp;
                    break;
                }
            }
            let one = ExtReal::one(precision);
            let w = ExtReal::from_i64(2, precision) / &((&one - &x.square()) * &deriv.square());
            nodes.push(x);
            weights.push(w);
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[ExtReal] {
        &self.nodes
    }

    pub fn weights(&self) -> &[ExtReal] {
        &self.weights
    }

    /// `∫_a^b f`.
    pub fn apply<F: Fn(&ExtReal) -> ExtReal>(&self, f: &F, a: &ExtReal, b: &ExtReal) -> ExtReal {
        let half = (b - a) / 2;
        let mid = (a + b) / 2;
        let mut acc = a.zero_like();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let at = &mid + &(&half * x);
            acc.add_mul(w, &f(&at));
        }
        acc * &half
    }
}

fn legendre_with_derivative(order: usize, x: &ExtReal) -> (ExtReal, ExtReal) {
    let mut p0 = x.one_like();
    let mut p1 = x.clone();
    for k in 2..=order {
        let k = k as i64;
        let p2 = (x * &p1 * (2 * k - 1) - &(&p0 * (k - 1))) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = (x * &p1 - &p0) * order as i64 / &(x.square() - 1);
    (p1, dp)
}

/// Result of [`integrate`].
#[derive(Clone, Debug)]
pub struct Integral {
    pub value: ExtReal,
    pub error_estimate: ExtReal,
    pub intervals: usize,
}

const MAX_DEPTH: u32 = 60;

/// `∫ f` over consecutive `breakpoints` with absolute tolerance `tol`.
/// Each panel gets an equal share of `tol` and is bisected, with the share
/// halving at each level, until `|Q - (Q_left + Q_right)|` meets it.
pub fn integrate<F: Fn(&ExtReal) -> ExtReal>(
    rule: &GaussLegendre,
    f: &F,
    breakpoints: &[ExtReal],
    tol: &ExtReal,
) -> Result<Integral> {
    if breakpoints.len() < 2 {
        return Err(EpiError::Quadrature("need at least two breakpoints".into()));
    }
    if !tol.is_positive() {
        return Err(EpiError::Quadrature("tolerance must be positive".into()));
    }
    let precision = tol.precision();
    let share = tol / (breakpoints.len() as i64 - 1);
    let mut value = ExtReal::zero(precision);
    let mut error_estimate = ExtReal::zero(precision);
    let mut intervals = 0;
    for w in breakpoints.windows(2) {
        let whole = rule.apply(f, &w[0], &w[1]);
        adapt(rule, f, &w[0], &w[1], whole, share.clone(), 0, &mut value, &mut error_estimate, &mut intervals)?;
    }
    Ok(Integral { value, error_estimate, intervals })
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(&ExtReal) -> ExtReal>(
    rule: &GaussLegendre,
    f: &F,
    a: &ExtReal,
    b: &ExtReal,
    whole: ExtReal,
    tol: ExtReal,
    depth: u32,
    value: &mut ExtReal,
    error: &mut ExtReal,
    intervals: &mut usize,
) -> Result<()> {
    let mid = (a + b) / 2;
    let left = rule.apply(f, a, &mid);
    let right = rule.apply(f, &mid, b);
    let refined = &left + &right;
    let err = (&whole - &refined).abs();
    if err <= tol {
        *value += &refined;
        *error += &err;
        *intervals += 1;
        return Ok(());
    }
    if depth >= MAX_DEPTH {
        return Err(EpiError::Quadrature(format!(
            "tolerance {} unreachable on [{}, {}]",
            tol.to_decimal(6),
            a.to_decimal(12),
            b.to_decimal(12)
        )));
    }
    let half_tol = tol / 2;
    adapt(rule, f, a, &mid, left, half_tol.clone(), depth + 1, value, error, intervals)?;
    adapt(rule, f, &mid, b, right, half_tol, depth + 1, value, error, intervals)
}
