//! Renewal-limit scenarios: Blackwell, strong renewal, defective.

use super::{BlackwellParams, DefectiveParams, SrtParams};
use crate::outcome::Outcome;
use latticeq::cramer;
use latticeq::law::{subexp_diagnostic, ArithmeticLaw, Generator};
use latticeq::renewal::{self, Window};
use latticeq::report::{convergence_table, fmt_f64, Table};
use std::f64::consts::LN_2;

pub fn blackwell(p: &BlackwellParams) -> Result<Outcome, String> {
    let mut out = Outcome::default();

    // one-sided two-point law, with the forward recursion as oracle
    let f = ArithmeticLaw::from_atoms(1.0, [(1, 0.5), (2, 0.5)], 0.0).map_err(|e| e.to_string())?;
    let u = renewal::renewal_sequence(&f, 1.0, Window::nonneg(p.n_hi), 1e-12)
        .map_err(|e| e.to_string())?;
    let mut oracle = vec![0.0f64; p.n_hi as usize + 1];
    oracle[0] = 1.0;
    for n in 1..=p.n_hi as usize {
        let mut s = 0.5 * oracle[n - 1];
        if n >= 2 {
            s += 0.5 * oracle[n - 2];
        }
        oracle[n] = s;
    }
    let worst_oracle = u
        .iter()
        .map(|(n, un, _)| (un - oracle[n as usize]).abs())
        .fold(0.0f64, f64::max);
    out.check_le("recursion_oracle_max_abs_diff", worst_oracle, 1e-10);
    let mu = 1.5;
    out.note("mu_two_point", mu);
    out.note("window_hi", p.n_hi);
    let rep = renewal::blackwell_check(&u, mu).map_err(|e| e.to_string())?;
    let band_dev = rep
        .rows
        .iter()
        .filter(|r| r.n >= p.n_hi * 3 / 4)
        .map(|r| (r.ratio - 1.0).abs())
        .fold(0.0f64, f64::max);
    out.check_le("two_point_ratio_band", band_dev, p.tol);
    out.tables.push(convergence_table(&rep));

    // two-sided tilted law (2/3, 1/3) on ±h
    let f2 = ArithmeticLaw::from_atoms(LN_2, [(1, 2.0 / 3.0), (-1, 1.0 / 3.0)], 0.0)
        .map_err(|e| e.to_string())?;
    let w = Window::default_for(1.0, LN_2, p.n_hi);
    out.note("two_sided_window_lo", w.n_lo);
    let u2 = renewal::renewal_sequence(&f2, 1.0, w, 1e-10).map_err(|e| e.to_string())?;
    let mu2 = f2.log_moment_lattice();
    out.note("mu_two_sided", mu2);
    out.note("trunc_error_two_sided", u2.trunc(p.n_hi).unwrap_or(0.0));
    let rep2 = renewal::blackwell_check(&u2, mu2).map_err(|e| e.to_string())?;
    let band_dev2 = rep2
        .rows
        .iter()
        .filter(|r| r.n >= p.n_hi * 3 / 4)
        .map(|r| (r.ratio - 1.0).abs())
        .fold(0.0f64, f64::max);
    out.check_le("two_sided_ratio_band", band_dev2, p.tol);
    let mut t2 = convergence_table(&rep2);
    t2.name = "blackwell_two_sided".to_string();
    out.tables.push(t2);
    Ok(out)
}

pub fn srt(p: &SrtParams) -> Result<Outcome, String> {
    let mut out = Outcome::default();
    if !(0.0 < p.alpha && p.alpha <= 1.0) {
        return Err(format!("alpha = {} outside (0, 1]", p.alpha));
    }
    // tilted law with the prescribed regularly varying tail, and the
    // original law it comes from (classified end to end)
    let f = ArithmeticLaw::from_generator(LN_2, Generator::power_law(p.alpha, 1, 1.0), 0.0)
        .map_err(|e| e.to_string())?;
    let original = cramer::invert_tilt(&f, 1.0).map_err(|e| e.to_string())?;
    let info = cramer::classify(&original, 8.0).map_err(|e| e.to_string())?;
    out.note("kappa", info.kappa);
    out.note("zero_atom_original", original.zero_atom());
    out.note("cramer_info", serde_json::to_value(&info).map_err(|e| e.to_string())?);
    let regime_ok = matches!(
        info.regime,
        cramer::Regime::InfiniteMeanRegVar { alpha, .. } if (alpha - p.alpha).abs() < 1e-12
    );
    out.check("classified_infinite_mean", regime_ok, format!("{:?}", info.regime));

    let c_alpha = renewal::srt_constant(p.alpha);
    out.note("c_alpha", c_alpha);
    out.note("c_half_sanity", renewal::srt_constant(0.5));
    out.note("n_hi", p.n_hi);

    let u = renewal::renewal_sequence(&f, 1.0, Window::nonneg(p.n_hi), p.series_tol)
        .map_err(|e| e.to_string())?;
    let rep = renewal::srt_check(&u, &f, p.alpha).map_err(|e| e.to_string())?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rep.rows.iter().filter(|r| r.n >= p.n_hi / 2) {
        lo = lo.min(r.ratio);
        hi = hi.max(r.ratio);
    }
    out.note("ratio_min_last_half", lo);
    out.note("ratio_max_last_half", hi);
    out.check(
        "srt_ratio_band",
        lo >= p.band_lo && hi <= p.band_hi,
        format!("[{lo}, {hi}] within [{}, {}]", p.band_lo, p.band_hi),
    );
    let devs: Vec<f64> = rep.decade_mean_dev.iter().map(|&(_, d)| d).collect();
    out.check(
        "decade_deviation_monotone",
        devs.windows(2).all(|w| w[1] <= w[0]),
        format!("{devs:?}"),
    );
    out.tables.push(convergence_table(&rep));

    // the α ≤ 1/2 condition diagnostic: trend table, or the automatic note
    if p.alpha <= 0.5 {
        let xs: Vec<i64> = (1..=8).map(|i| i * p.n_hi / 16).collect();
        let deltas = [0.4, 0.2, 0.1, 0.05];
        let rep = cramer::doney_diagnostic(&f, p.alpha, &xs, &deltas).map_err(|e| e.to_string())?;
        out.check("srt_condition_trend_decreasing", rep.decreasing_in_delta, String::new());
        let mut t = Table::new("srt_condition", &["delta", "n", "value"]);
        for c in &rep.cells {
            t.push(vec![fmt_f64(c.delta), c.n.to_string(), fmt_f64(c.value)]);
        }
        out.tables.push(t);
    } else {
        out.note("srt_condition", "automatic for alpha > 1/2");
    }
    Ok(out)
}

pub fn defective(p: &DefectiveParams) -> Result<Outcome, String> {
    let mut out = Outcome::default();
    if !(0.0 < p.theta && p.theta < 1.0) {
        return Err(format!("theta = {} outside (0, 1)", p.theta));
    }
    let f_target = ArithmeticLaw::from_generator(1.0, Generator::power_law(p.tail_alpha, 1, 1.0), 0.0)
        .map_err(|e| e.to_string())?;
    // manufacture the original law, then rediscover (κ, θ) from it
    let original =
        cramer::scaled_invert_tilt(&f_target, 1.0, p.theta).map_err(|e| e.to_string())?;
    let info = cramer::classify(&original, 8.0).map_err(|e| e.to_string())?;
    let (kappa_hat, theta_hat) = match info.regime {
        cramer::Regime::Defective { theta } => (info.kappa, theta),
        ref other => return Err(format!("expected defective regime, got {other:?}")),
    };
    out.note("kappa_discovered", kappa_hat);
    out.note("theta_discovered", theta_hat);
    out.note("cramer_info", serde_json::to_value(&info).map_err(|e| e.to_string())?);
    out.check(
        "defective_detected",
        (kappa_hat - 1.0).abs() < 1e-8 && (theta_hat - p.theta).abs() < 1e-8,
        format!("kappa = {kappa_hat}, theta = {theta_hat}"),
    );

    let u = renewal::renewal_sequence(&info.tilted, theta_hat, Window::nonneg(p.n_hi), p.series_tol)
        .map_err(|e| e.to_string())?;
    out.note("limit_constant", theta_hat / (1.0 - theta_hat) / (1.0 - theta_hat));
    let rep = renewal::defective_check(&u, &info.tilted, theta_hat).map_err(|e| e.to_string())?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rep.rows.iter().filter(|r| r.n >= p.n_hi / 2) {
        lo = lo.min(r.ratio);
        hi = hi.max(r.ratio);
    }
    out.note("ratio_min_last_half", lo);
    out.note("ratio_max_last_half", hi);
    out.check(
        "defective_ratio_band",
        lo >= 0.9 && hi <= 1.1,
        format!("normalized band [{lo}, {hi}]"),
    );
    out.tables.push(convergence_table(&rep));

    // total mass of U is 1/(1−θ) up to the windowed tail (Markov bound)
    let total: f64 = u.u.iter().sum();
    let mean = info.tilted.generator().map(|g| g.tail_weighted(1, 1)).unwrap_or(f64::NAN);
    let leftover = mean * theta_hat / (1.0 - theta_hat).powi(2) / p.n_hi as f64;
    let expect = 1.0 / (1.0 - theta_hat);
    out.note("u_total", total);
    out.check(
        "u_total_mass",
        (total - expect).abs() <= leftover + 1e-9,
        format!("{total} vs {expect} (allow {leftover})"),
    );

    // h-subexponentiality diagnostic on the tilted law
    let sub = subexp_diagnostic(&info.tilted, p.n_hi).map_err(|e| e.to_string())?;
    out.check(
        "subexponentiality_ratios",
        sub.plausibly_subexponential(p.subexp_tol),
        format!("sup tail ratio {}", sub.sup_tail_ratio),
    );
    let mut t = Table::new("subexp_ratios", &["n", "ratio_step", "ratio_conv"]);
    for r in sub.rows.iter().filter(|r| r.n % 25 == 0) {
        t.push(vec![r.n.to_string(), fmt_f64(r.ratio_step), fmt_f64(r.ratio_conv)]);
    }
    out.tables.push(t);
    Ok(out)
}
