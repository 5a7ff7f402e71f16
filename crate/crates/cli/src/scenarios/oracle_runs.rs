//! Scenarios built on the exact closed-form oracles.

use super::{ConditionsParams, ConstantQParams, QsetParams, StpParams};
use crate::outcome::Outcome;
use latticeq::cramer;
use latticeq::law::JointAbLaw;
use latticeq::oracles::{self, QSegment, QTarget};
use latticeq::qprofile::{self, jittered_grid, ConditionMode, NormalizerSeq, PsiFunction};
use latticeq::report::{ecdf_table, fmt_f64, tail_q_table, Table};
use latticeq::sim::{self, SimConfig, StopRule};
use latticeq::stats;
use latticeq::tail::TailFunction;
use std::f64::consts::LN_2;

fn classify_pair(pair: &JointAbLaw) -> Result<(cramer::CramerInfo, PsiFunction, TailFunction), String> {
    let marginal = pair.marginal_a().map_err(|e| e.to_string())?;
    let info = cramer::classify(&marginal, 8.0).map_err(|e| e.to_string())?;
    let tail = TailFunction::st_petersburg();
    let psi = PsiFunction::new(tail.clone(), marginal, info.kappa);
    Ok((info, psi, tail))
}

pub fn st_petersburg(p: &StpParams, seed: u64) -> Result<Outcome, String> {
    let mut out = Outcome::default();
    let pair = oracles::st_petersburg_pair();

    // exact df values and the fixed-point pushforward identity
    for (x, expected) in [(2.0, 0.5), (3.0, 0.5), (4.0, 0.25)] {
        let got = oracles::st_petersburg_tail(x);
        out.check(
            &format!("tail_exact_x{x}"),
            (got - expected).abs() <= 1e-15,
            format!("T({x}) = {got}, expected {expected}"),
        );
    }
    let worst_push = (1..=p.pushforward_k_max)
        .map(|k| (oracles::st_petersburg_pushforward_pmf(k) - 2f64.powi(-k)).abs())
        .fold(0.0f64, f64::max);
    out.check_le("pushforward_pmf_max_abs_err", worst_push, 1e-14);

    let (info, psi, tail) = classify_pair(&pair)?;
    out.note("kappa", info.kappa);
    out.note("mu", info.mu);
    out.note("cramer_info", serde_json::to_value(&info).map_err(|e| e.to_string())?);
    out.check("kappa_is_one", (info.kappa - 1.0).abs() < 1e-12, format!("kappa = {}", info.kappa));

    // explicit lattice-sum route vs the closed form
    let grid = jittered_grid(LN_2, p.grid_points);
    let q_psi = qprofile::q_from_psi(&psi, info.mu, &grid, 4_000_000).map_err(|e| e.to_string())?;
    let worst = q_psi.grid.iter().map(|&(x, v)| (v - x).abs()).fold(0.0f64, f64::max);
    out.check_le("q_from_psi_max_abs_err", worst, 1e-6);
    out.tables.push(latticeq::report::periodic_q_table("q_psi", &q_psi));

    // smoothing route agrees away from the dyadic seams
    let smooth = qprofile::q_from_smoothing(&psi, None, info.mu, &grid, 1e-3)
        .map_err(|e| e.to_string())?;
    let worst_gap = q_psi
        .grid
        .iter()
        .zip(&smooth.q.grid)
        .map(|(a, b)| (a.1 - b.1).abs())
        .fold(0.0f64, f64::max);
    out.check_le("q_smoothing_vs_psi_max_gap", worst_gap, 1e-6);
    out.tables.push(latticeq::report::periodic_q_table("q_smoothing", &smooth.q));

    // direct tail normalization is exactly depth-independent
    let norm = NormalizerSeq::unit(1, 4);
    let tq = qprofile::q_from_tail(&tail, 1.0, LN_2, &norm, &grid, (1, 4), false)
        .map_err(|e| e.to_string())?;
    let max_stab = tq.stabilization.iter().map(|&(_, g)| g).fold(0.0f64, f64::max);
    out.check_le("tail_route_depth_gap", max_stab, 1e-12);
    out.tables.push(tail_q_table("q_tail_stabilization", &tq));

    // integrability diagnostics
    for (label, mode) in [
        ("integral", ConditionMode::Integral),
        ("sum", ConditionMode::Sum { x: LN_2 / 5f64.sqrt() }),
        ("delta_integral", ConditionMode::DeltaIntegral { delta: 0.3 }),
    ] {
        let rep = qprofile::check_conditions(&psi, mode, (-30.0, 40.0));
        out.check(
            &format!("condition_{label}_converged"),
            rep.converged_heuristic,
            format!("partial = {}, last decade = {}", rep.partial_value, rep.last_decade_contribution),
        );
    }

    // Monte Carlo agreement with the exact tail
    if p.mc_samples > 0 {
        let cfg = SimConfig { sample_count: p.mc_samples, seed, stop: StopRule::default() };
        let batch = sim::sample_perpetuity(&pair, &cfg).map_err(|e| e.to_string())?;
        out.note("mc_samples", p.mc_samples as u64);
        out.note("mc_truncated_paths", batch.truncated_paths);
        let emp = TailFunction::from_samples(batch.values.clone());
        let mut worst_z = 0.0f64;
        for &x in &[2.0, 3.0, 4.0] {
            let exact = oracles::st_petersburg_tail(x);
            let se = stats::binomial_se(exact, p.mc_samples);
            worst_z = worst_z.max((emp.value(x) - exact).abs() / se);
        }
        out.check_le("mc_tail_max_z_score", worst_z, 3.0);
        out.tables.push(ecdf_table("ecdf_mc", &batch.values, 512));
    }

    // unsmoothing sandwich at the dyadic jump points: brackets [1, 2]
    let xs: Vec<f64> = (3..14).map(|k| 2f64.powi(k)).collect();
    let sandwich = qprofile::lemma_sandwich(&q_psi, &tail, &xs, None, 2e-2);
    out.check("sandwich_at_jumps", sandwich.all_within, format!("rows = {}", sandwich.rows.len()));
    let mut t = Table::new("sandwich", &["x", "lambda", "value", "q_right", "q_left", "within"]);
    for r in &sandwich.rows {
        t.push(vec![
            fmt_f64(r.x),
            fmt_f64(r.lambda),
            fmt_f64(r.value),
            fmt_f64(r.q_right),
            fmt_f64(r.q_left),
            r.within.to_string(),
        ]);
    }
    out.tables.push(t);
    Ok(out)
}

/// Parse a target file: one JSON header line `{"kappa":..,"span_h":..,
/// "scale_c":..}` followed by `y,q` CSV rows on [1, 2].
fn parse_target_file(path: &str) -> Result<QTarget, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty target file")?;
    #[derive(serde::Deserialize)]
    struct Header {
        kappa: f64,
        span_h: f64,
        #[serde(default = "one")]
        scale_c: f64,
    }
    fn one() -> f64 {
        1.0
    }
    let h: Header = serde_json::from_str(header).map_err(|e| format!("bad header: {e}"))?;
    let mut pts = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('y') {
            continue;
        }
        let mut cells = line.split(',');
        let y: f64 = cells
            .next()
            .and_then(|c| c.trim().parse().ok())
            .ok_or(format!("bad y on line {}", i + 2))?;
        let q: f64 = cells
            .next()
            .and_then(|c| c.trim().parse().ok())
            .ok_or(format!("bad q on line {}", i + 2))?;
        pts.push((y, q));
    }
    if pts.len() < 2 {
        return Err("target needs at least two grid points".into());
    }
    let segments = pts
        .windows(2)
        .map(|w| QSegment { z_lo: w[0].0, z_hi: w[1].0, q_lo: w[0].1, q_hi: w[1].1 })
        .collect();
    Ok(QTarget { kappa: h.kappa, span_h: h.span_h, segments, scale_c: h.scale_c })
}

pub fn qset_roundtrip(p: &QsetParams, seed: u64) -> Result<Outcome, String> {
    let mut out = Outcome::default();
    let targets: Vec<(String, QTarget)> = match &p.target_file {
        Some(path) => vec![("target_file".to_string(), parse_target_file(path)?)],
        None => {
            let mut ts = vec![
                ("constant".to_string(), QTarget::constant(2.0 / 3.0)),
                (
                    "piecewise_linear".to_string(),
                    QTarget::native(vec![
                        QSegment { z_lo: 1.0, z_hi: 1.4, q_lo: 0.7, q_hi: 0.98 },
                        QSegment { z_lo: 1.4, z_hi: 2.0, q_lo: 0.98, q_hi: 0.98 },
                    ]),
                ),
                ("st_petersburg_shape".to_string(), QTarget::st_petersburg_shape()),
            ];
            for (i, (&s, &k)) in p.random_seeds.iter().zip(p.knots.iter()).enumerate() {
                ts.push((format!("random_{i}"), QTarget::random_monotone(s ^ seed, k)));
            }
            ts
        }
    };
    for (name, target) in &targets {
        let built = oracles::qset_construct(target).map_err(|e| e.to_string())?;
        out.note(&format!("{name}_p"), built.p);
        out.note(&format!("{name}_dyadic_shift"), built.dyadic_shift);
        // export the constructed pair in the wire schema
        let mut t = Table::new(&format!("{name}_profile"), &["x", "expected", "recovered"]);
        let grid = jittered_grid(target.span_h, p.grid_points);
        let n_lo = built.min_depth();
        let norm = NormalizerSeq::unit(n_lo, n_lo + 3);
        let tq = qprofile::q_from_tail(
            &built.tail,
            target.kappa,
            target.span_h,
            &norm,
            &grid,
            (n_lo, n_lo + 3),
            false,
        )
        .map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for &(x, v) in &tq.q.grid {
            let expected = built.expected_profile(x);
            worst = worst.max((v - expected).abs() / expected.abs().max(1.0));
            t.push(vec![fmt_f64(x), fmt_f64(expected), fmt_f64(v)]);
        }
        out.check_le(&format!("{name}_roundtrip_rel_err"), worst, 1e-9);
        tq.q.validate_class(1e-9).map_err(|e| e.to_string())?;
        out.tables.push(t);
        out.note(
            &format!("{name}_pair_json"),
            serde_json::to_value(&built.pair).map_err(|e| e.to_string())?,
        );
    }
    out.note("targets", targets.len() as u64);
    Ok(out)
}

pub fn constant_q(p: &ConstantQParams) -> Result<Outcome, String> {
    let mut out = Outcome::default();
    if !(0.0 < p.p && p.p < 0.5) {
        return Err(format!("p = {} outside (0, 1/2)", p.p));
    }
    // the constant profile whose construction lands exactly on p
    let qt = 2.0 - 1.0 / (1.0 - p.p);
    let built = oracles::qset_construct(&QTarget::constant(qt)).map_err(|e| e.to_string())?;
    out.note("p", built.p);
    out.note("q_constant", qt);
    out.check(
        "construction_recovers_p",
        (built.p - p.p).abs() < 1e-12,
        format!("{} vs {}", built.p, p.p),
    );
    // regularly varying tail: x·T(x) constant above 2·scale
    let coeff = 2.0 - 1.0 / (1.0 - p.p);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let x = built.scale_total * 2.0001 * 1.05f64.powi(i);
        worst = worst.max((x * built.tail.value(x) - coeff * built.scale_total).abs());
    }
    out.check_le("tail_times_x_constant_dev", worst, 1e-12);
    let probe = 4.0 * built.scale_total;
    out.note("tail_at_4scale", built.tail.value(probe));
    out.check(
        "tail_value_closed_form",
        (built.tail.value(probe) - coeff / 4.0).abs() <= 1e-15,
        format!("T({probe}) = {}", built.tail.value(probe)),
    );

    // cross-module: the implicit formula on the constructed pair returns
    // the same constant
    let marginal = built.pair.marginal_a().map_err(|e| e.to_string())?;
    let info = cramer::classify(&marginal, 8.0).map_err(|e| e.to_string())?;
    out.note("kappa", info.kappa);
    out.note("mu", info.mu);
    out.note("cramer_info", serde_json::to_value(&info).map_err(|e| e.to_string())?);
    let psi = PsiFunction::new(built.tail.clone(), marginal, info.kappa);
    let grid = jittered_grid(LN_2, p.grid_points);
    let q = qprofile::q_from_psi(&psi, info.mu, &grid, 4_000_000).map_err(|e| e.to_string())?;
    let expected = qt * built.scale_total;
    let worst =
        q.grid.iter().map(|&(_, v)| (v - expected).abs()).fold(0.0f64, f64::max);
    out.check_le("q_from_psi_constant_dev", worst, 1e-6 * expected.max(1.0));
    out.tables.push(latticeq::report::periodic_q_table("q_constant", &q));
    Ok(out)
}

pub fn conditions_check(_p: &ConditionsParams) -> Result<Outcome, String> {
    let mut out = Outcome::default();
    let pair = oracles::st_petersburg_pair();
    let marginal = pair.marginal_a().map_err(|e| e.to_string())?;

    let mut decades_table = Table::new("condition_decades", &["case", "mode", "decade", "contribution"]);
    let push_decades = |table: &mut Table, case: &str, rep: &qprofile::ConditionReport| {
        for &(d, c) in &rep.decades {
            table.push(vec![case.to_string(), rep.mode_label.clone(), fmt_f64(d), fmt_f64(c)]);
        }
    };

    // oracle pair: all three conditions finite
    let psi = PsiFunction::new(TailFunction::st_petersburg(), marginal.clone(), 1.0);
    for (label, mode) in [
        ("integral", ConditionMode::Integral),
        ("sum", ConditionMode::Sum { x: 0.31 }),
        ("delta_integral", ConditionMode::DeltaIntegral { delta: 0.3 }),
    ] {
        let rep = qprofile::check_conditions(&psi, mode, (-30.0, 40.0));
        out.check(
            &format!("oracle_{label}_converged"),
            rep.converged_heuristic,
            format!("partial = {}", rep.partial_value),
        );
        push_decades(&mut decades_table, "oracle", &rep);
    }

    // heavy tail: X Pareto with index κ/2 makes the integral diverge
    let heavy = PsiFunction::new(
        TailFunction::Exact(latticeq::tail::ExactTail::Pareto { index: 0.5, x_min: 1.0 }),
        marginal.clone(),
        1.0,
    );
    let rep = qprofile::check_conditions(&heavy, ConditionMode::Integral, (-10.0, 55.0));
    out.check(
        "heavy_tail_integral_diverges",
        !rep.converged_heuristic,
        format!("last decade contribution = {}", rep.last_decade_contribution),
    );
    push_decades(&mut decades_table, "heavy", &rep);

    // A ≡ 1: ψ ≡ 0 and every condition value vanishes
    let id_law = latticeq::law::ArithmeticLaw::from_atoms(LN_2, [(0, 1.0)], 0.0)
        .map_err(|e| e.to_string())?;
    let zero = PsiFunction::new(TailFunction::st_petersburg(), id_law, 1.0);
    let rep = qprofile::check_conditions(&zero, ConditionMode::Integral, (-20.0, 30.0));
    out.check("zero_psi_zero_value", rep.partial_value == 0.0, format!("{}", rep.partial_value));
    push_decades(&mut decades_table, "zero", &rep);

    out.tables.push(decades_table);
    Ok(out)
}
