use serde_json::{json, Value};

use epi_core::asymptotics::{
    knessl_profile, leading_constant_fit, predicted_leading_term, smoothed_binomial_entropy, tulino_verdu_compare,
};
use epi_core::discrimination::{
    binomial_pair_c, binomial_step_c, cap_via_series_capped, tri_discrimination, PairOrder,
};
use epi_core::dist::{binomial_pmf, entropy, shift, BernoulliParam};
use epi_core::epi::{self, gaussian_entropy};
use epi_core::error::EpiError;
use epi_core::moments::{cumulative_gamma_bound, harmonic_lower_bound};
use epi_core::polycert::{certify, rational_string, Substitution};
use epi_core::precision::{ExtReal, Precision};

use crate::output::{emit, Format, Report, Table};
use crate::svg::Plot;
use crate::{Cli, Command, Failure, PGrid};

const MIN_CLI_DIGITS: u32 = 20;

struct Ctx {
    precision: Precision,
}

impl Ctx {
    fn dec(&self, x: &ExtReal) -> String {
        x.to_decimal(self.precision.digits())
    }

    fn real(&self, s: &str, what: &str) -> Result<ExtReal, Failure> {
        ExtReal::parse(s, self.precision).map_err(|_| Failure::usage(format!("{what}: cannot parse {s:?}")))
    }

    /// A probability strictly inside (0, 1).
    fn prob(&self, s: &str) -> Result<BernoulliParam, Failure> {
        let p =
            BernoulliParam::parse(s, self.precision).map_err(|_| Failure::usage(format!("bad probability {s:?}")))?;
        if p.is_degenerate() {
            return Err(Failure::usage(format!("p must lie strictly inside (0, 1), got {s}")));
        }
        Ok(p)
    }

    fn grid(&self, g: &PGrid, default: (&str, &str, usize)) -> Result<Vec<BernoulliParam>, Failure> {
        if let Some(p) = &g.p {
            if g.p_min.is_some() || g.p_max.is_some() {
                return Err(Failure::usage("--p cannot be combined with --p-min/--p-max"));
            }
            return Ok(vec![self.prob(p)?]);
        }
        let lo = self.prob(g.p_min.as_deref().unwrap_or(default.0))?;
        let hi = self.prob(g.p_max.as_deref().unwrap_or(default.1))?;
        let steps = g.steps.unwrap_or(default.2);
        if steps == 0 {
            return Err(Failure::usage("--steps must be at least 1"));
        }
        Ok(epi::p_grid(lo.p(), hi.p(), steps)?)
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub(crate) fn preset(name: &str) -> Result<Command, Failure> {
    let grid = |p_min: &str, p_max: &str, steps: usize| PGrid {
        p: None,
        p_min: Some(p_min.into()),
        p_max: Some(p_max.into()),
        steps: Some(steps),
    };
    let cmd = match name {
        "fig1" => Command::Sweep { m: 1, n: 2, grid: grid("0.01", "0.99", 197) },
        "thresholds" => Command::Threshold { grid: grid("0.1", "0.9", 9), cap: 2000 },
        "certifyA" => Command::Certify { sub: "A".into() },
        "certifyA'" | "certifyA′" | "certifyAprime" => Command::Certify { sub: "A'".into() },
        "certifyB" => Command::Certify { sub: "B".into() },
        "certifyC" => Command::Certify { sub: "C".into() },
        "knessl" => Command::Knessl { p: "0.5".into(), n: 4096, cap: epi_core::asymptotics::DEFAULT_SUPPORT_BUDGET },
        "tulino" => Command::Tulino { p: "0.5".into(), sigma: "0.001".into(), m: 8, n: 64, tol: "1e-10".into() },
        other => return Err(Failure::usage(format!("unknown preset {other:?}"))),
    };
    Ok(cmd)
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.precision < MIN_CLI_DIGITS {
        return Err(Failure::usage(format!("--precision must be at least {MIN_CLI_DIGITS}")));
    }
    let ctx = Ctx { precision: Precision::new(cli.precision)? };
    let command = match &cli.command {
        Command::Preset { name } => preset(name)?,
        other => other.clone(),
    };
    let (report, default_format) = dispatch(&ctx, &command)?;
    let format = cli.format.unwrap_or(default_format);
    let text = report.render(format).map_err(Failure::usage)?;
    emit(&text, cli.out.as_deref()).map_err(|e| Failure { code: 1, message: format!("cannot write output: {e}") })
}

fn dispatch(ctx: &Ctx, command: &Command) -> Result<(Report, Format), Failure> {
    match command {
        Command::Gap { m, n, p } => gap(ctx, *m, *n, p).map(|r| (r, Format::Json)),
        Command::Sweep { m, n, grid } => sweep(ctx, *m, *n, grid).map(|r| (r, Format::Csv)),
        Command::Threshold { grid, cap } => threshold(ctx, grid, *cap).map(|r| (r, Format::Json)),
        Command::Grid { m, n, p } => grid_cmd(ctx, *m, *n, p).map(|r| (r, Format::Csv)),
        Command::Bound { p, n, l } => bound(ctx, p, *n, *l).map(|r| (r, Format::Json)),
        Command::Discrimination { p, n, l, cap } => discrimination(ctx, p, *n, *l, *cap).map(|r| (r, Format::Json)),
        Command::Certify { sub } => certify_cmd(sub).map(|r| (r, Format::Json)),
        Command::Knessl { p, n, cap } => knessl(ctx, p, *n, *cap).map(|r| (r, Format::Csv)),
        Command::Smooth { p, n, sigma, tol } => smooth(ctx, p, *n, sigma, tol).map(|r| (r, Format::Json)),
        Command::Tulino { p, sigma, m, n, tol } => tulino(ctx, p, sigma, *m, *n, tol).map(|r| (r, Format::Csv)),
        Command::Preset { .. } => unreachable!("presets are resolved before dispatch"),
    }
}

fn positive(v: u64, flag: &str) -> Result<(), Failure> {
    if v == 0 {
        Err(Failure::usage(format!("{flag} must be at least 1")))
    } else {
        Ok(())
    }
}

fn gap(ctx: &Ctx, m: u64, n: u64, p: &str) -> Result<Report, Failure> {
    let p = ctx.prob(p)?;
    let r = epi::epi_gap(m, n, &p);
    let mut table = Table::new(&["m", "n", "p", "gap", "holds"]);
    table.push(vec![m.to_string(), n.to_string(), ctx.dec(&r.p), ctx.dec(&r.gap), r.holds.to_string()]);
    Ok(Report { json: to_json(&r), table, plot: None })
}

fn sweep(ctx: &Ctx, m: u64, n: u64, grid: &PGrid) -> Result<Report, Failure> {
    let ps = ctx.grid(grid, ("0.01", "0.99", 197))?;
    let rows = epi::gap_sweep(m, n, &ps);
    let mut table = Table::new(&["p", "gap"]);
    for r in &rows {
        table.push(vec![ctx.dec(&r.p), ctx.dec(&r.gap)]);
    }
    let json = json!({
        "m": m,
        "n": n,
        "precision": ctx.precision.digits(),
        "rows": rows.iter().map(|r| json!({"p": ctx.dec(&r.p), "gap": ctx.dec(&r.gap), "holds": r.holds})).collect::<Vec<_>>(),
    });
    let plot = Plot {
        title: format!("e^(2H[B({},p)]) - e^(2H[B({m},p)]) - e^(2H[B({n},p)])", m + n),
        x_label: "p".into(),
        y_label: "gap".into(),
        points: rows.iter().map(|r| (r.p.to_f64(), r.gap.to_f64())).collect(),
    };
    Ok(Report { json, table, plot: Some(plot) })
}

fn threshold(ctx: &Ctx, grid: &PGrid, cap: u64) -> Result<Report, Failure> {
    positive(cap, "--cap")?;
    let single = grid.p.is_some();
    let ps = ctx.grid(grid, ("0.1", "0.9", 9))?;
    let reports = epi::threshold_sweep(&ps, cap)?;
    let mut table = Table::new(&["p", "t", "empirical_n0", "formula_a", "formula_b", "cap"]);
    for r in &reports {
        let n0 = r.empirical_n0.value().map(|v| v.to_string()).unwrap_or_else(|| "not_found_below_cap".into());
        table.push(vec![
            ctx.dec(&r.p),
            ctx.dec(&r.t),
            n0,
            r.formula_a.to_string(),
            r.formula_b.to_string(),
            r.cap.to_string(),
        ]);
    }
    let json = if single { to_json(&reports[0]) } else { to_json(&reports) };
    Ok(Report { json, table, plot: None })
}

fn grid_cmd(ctx: &Ctx, m: u64, n: u64, p: &str) -> Result<Report, Failure> {
    positive(m, "--m")?;
    positive(n, "--n")?;
    let p = ctx.prob(p)?;
    let cells = epi::epi_grid_check(m, n, &p);
    let mut table = Table::new(&["m", "n", "gap", "holds"]);
    let mut all_hold = true;
    for cell in cells.iter().flatten() {
        all_hold &= cell.holds;
        table.push(vec![cell.m.to_string(), cell.n.to_string(), ctx.dec(&cell.gap), cell.holds.to_string()]);
    }
    let json = json!({
        "p": ctx.dec(p.p()),
        "all_hold": all_hold,
        "cells": cells.iter().flatten().map(|c| json!({"m": c.m, "n": c.n, "gap": ctx.dec(&c.gap), "holds": c.holds})).collect::<Vec<_>>(),
    });
    Ok(Report { json, table, plot: None })
}

fn bound(ctx: &Ctx, p: &str, n: u64, l: u32) -> Result<Report, Failure> {
    positive(n, "--n")?;
    positive(l as u64, "--l")?;
    let p = ctx.prob(p)?;
    let exact = entropy(&binomial_pmf(n, &p));
    let gamma = cumulative_gamma_bound(n, &p, l)?;
    let w = 2 * l;
    let harmonic = harmonic_lower_bound(n, &p, w)?;
    let eps = ctx.precision.epsilon();
    let gamma_holds = gamma <= &exact + &eps;
    let harmonic_holds = harmonic <= &exact + &eps;
    let json = json!({
        "n": n,
        "p": ctx.dec(p.p()),
        "l": l,
        "w": w,
        "entropy": ctx.dec(&exact),
        "gamma_bound": ctx.dec(&gamma),
        "gamma_holds": gamma_holds,
        "harmonic_bound": ctx.dec(&harmonic),
        "harmonic_holds": harmonic_holds,
    });
    let mut table = Table::new(&["n", "p", "l", "entropy", "gamma_bound", "harmonic_bound", "harmonic_holds"]);
    table.push(vec![
        n.to_string(),
        ctx.dec(p.p()),
        l.to_string(),
        ctx.dec(&exact),
        ctx.dec(&gamma),
        ctx.dec(&harmonic),
        harmonic_holds.to_string(),
    ]);
    Ok(Report { json, table, plot: None })
}

fn discrimination(ctx: &Ctx, p: &str, n: u64, l: u32, cap: u64) -> Result<Report, Failure> {
    positive(cap, "--cap")?;
    let p = ctx.prob(p)?;
    let base = binomial_pmf(n, &p);
    let shifted = shift(&base, 1);
    let c_first = binomial_pair_c(n, &p, PairOrder::ShiftedFirst)?;
    let c_second = binomial_pair_c(n, &p, PairOrder::ShiftedSecond)?;
    let increment = binomial_step_c(n, &p)?;
    let deltas: Vec<ExtReal> =
        (1..=l).map(|nu| tri_discrimination(&shifted, &base, &p, nu)).collect::<Result<_, _>>()?;
    let series = match cap_via_series_capped(&shifted, &base, &p, &ctx.precision.epsilon(), cap as usize) {
        Ok(s) => json!({
            "status": "converged",
            "partial_sum": ctx.dec(&s.partial_sum),
            "terms_used": s.terms_used,
            "tail_bound": ctx.dec(&s.tail_bound),
        }),
        Err(EpiError::SeriesTruncated { terms, tail_bound }) => json!({
            "status": "truncated",
            "terms_used": terms,
            "tail_bound": tail_bound,
        }),
        Err(e) => return Err(e.into()),
    };
    let json = json!({
        "n": n,
        "p": ctx.dec(p.p()),
        "c_shifted_first": ctx.dec(&c_first),
        "c_shifted_second": ctx.dec(&c_second),
        "entropy_increment": ctx.dec(&increment),
        "triangular": deltas.iter().map(|d| ctx.dec(d)).collect::<Vec<_>>(),
        "series": series,
    });
    let mut table = Table::new(&["nu", "triangular"]);
    for (nu, d) in deltas.iter().enumerate() {
        table.push(vec![(nu + 1).to_string(), ctx.dec(d)]);
    }
    Ok(Report { json, table, plot: None })
}

fn certify_cmd(sub: &str) -> Result<Report, Failure> {
    let sub = Substitution::parse(sub)?;
    let r = certify(sub)?;
    let mut table = Table::new(&["deg_m", "deg_t", "coefficient"]);
    for c in &r.coefficients {
        table.push(vec![c.deg_m.to_string(), c.deg_t.to_string(), rational_string(&c.value)]);
    }
    Ok(Report { json: to_json(&r), table, plot: None })
}

fn knessl(ctx: &Ctx, p: &str, n_max: u64, cap: u64) -> Result<Report, Failure> {
    if n_max < 16 {
        return Err(Failure::usage("--n must be at least 16"));
    }
    let p = ctx.prob(p)?;
    let base = binomial_pmf(1, &p);
    let ns: Vec<u64> = std::iter::successors(Some(16u64), |&n| n.checked_mul(2)).take_while(|&n| n <= n_max).collect();
    let profile = knessl_profile(&base, &format!("Bernoulli({})", ctx.dec(p.p())), &ns, cap)?;
    let predicted = predicted_leading_term(&base)?;
    let fit = if ns.len() >= 4 { Some(leading_constant_fit(&base, &ns[ns.len() - 4..], cap)?) } else { None };
    let mut table = Table::new(&["n", "g", "scaled_g", "predicted_scaled_g"]);
    let neg_c = -predicted.constant.clone();
    for (&n, g) in &profile.g_values {
        let scaled = g * &ExtReal::from_u64(n, ctx.precision).powi(predicted.exponent as i32);
        table.push(vec![n.to_string(), ctx.dec(g), ctx.dec(&scaled), ctx.dec(&neg_c)]);
    }
    let json = json!({
        "profile": to_json(&profile),
        "predicted": to_json(&predicted),
        "fit": fit.as_ref().map(to_json),
    });
    let plot = Plot {
        title: format!("n^{} g(n), Bernoulli({})", predicted.exponent, p.p().to_decimal(6)),
        x_label: "log2 n".into(),
        y_label: "scaled g".into(),
        points: profile
            .g_values
            .iter()
            .map(|(&n, g)| ((n as f64).log2(), g.to_f64() * (n as f64).powi(predicted.exponent as i32)))
            .collect(),
    };
    Ok(Report { json, table, plot: Some(plot) })
}

fn smooth(ctx: &Ctx, p: &str, n: u64, sigma: &str, tol: &str) -> Result<Report, Failure> {
    positive(n, "--n")?;
    let p = ctx.prob(p)?;
    let sigma = ctx.real(sigma, "--sigma")?;
    let tol = ctx.real(tol, "--tol")?;
    let s = smoothed_binomial_entropy(n, &p, &sigma, &tol)?;
    let var = sigma.square() * &ExtReal::from_u64(n, ctx.precision);
    let info = &s.h_value - &gaussian_entropy(&var);
    let exact = entropy(&binomial_pmf(n, &p));
    let json = json!({
        "n": n,
        "p": ctx.dec(p.p()),
        "sigma": ctx.dec(&sigma),
        "h": ctx.dec(&s.h_value),
        "quadrature_error": ctx.dec(&s.quadrature_error),
        "mutual_information": ctx.dec(&info),
        "discrete_entropy": ctx.dec(&exact),
    });
    let mut table = Table::new(&["n", "p", "sigma", "h", "quadrature_error", "mutual_information", "discrete_entropy"]);
    table.push(vec![
        n.to_string(),
        ctx.dec(p.p()),
        ctx.dec(&sigma),
        ctx.dec(&s.h_value),
        ctx.dec(&s.quadrature_error),
        ctx.dec(&info),
        ctx.dec(&exact),
    ]);
    Ok(Report { json, table, plot: None })
}

fn tulino(ctx: &Ctx, p: &str, sigma: &str, m: u64, n: u64, tol: &str) -> Result<Report, Failure> {
    if m < 2 || n < m {
        return Err(Failure::usage("need 2 <= --m <= --n"));
    }
    let p = ctx.prob(p)?;
    let sigma = ctx.real(sigma, "--sigma")?;
    let tol = ctx.real(tol, "--tol")?;
    let rows = tulino_verdu_compare(&p, &sigma, m..=n, &tol)?;
    let mut table = Table::new(&["n", "increment", "half_log_ratio", "log_ratio", "original_holds", "improved_holds"]);
    for r in &rows {
        table.push(vec![
            r.n.to_string(),
            ctx.dec(&r.increment),
            ctx.dec(&r.half_log_ratio),
            ctx.dec(&r.log_ratio),
            r.original_holds.to_string(),
            r.improved_holds.to_string(),
        ]);
    }
    let plot = Plot {
        title: "h(S^(n)) - h(S^(n-1)) minus ln(n/(n-1))".into(),
        x_label: "n".into(),
        y_label: "increment - ln(n/(n-1))".into(),
        points: rows.iter().map(|r| (r.n as f64, (&r.increment - &r.log_ratio).to_f64())).collect(),
    };
    Ok(Report { json: to_json(&rows), table, plot: Some(plot) })
}
