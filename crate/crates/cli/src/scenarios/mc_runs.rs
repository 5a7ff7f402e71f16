//! Monte Carlo scenarios: estimator consistency and the IFS sandwich.

use super::{IfsParams, McParams};
use crate::outcome::Outcome;
use latticeq::oracles;
use latticeq::qprofile::{self, jittered_grid, NormalizerSeq};
use latticeq::report::{ecdf_table, fmt_f64, write_samples_with_sidecar, Table};
use latticeq::sim::{self, IfsDescriptor, IfsMap, SimConfig, StopRule};
use latticeq::stats;
use latticeq::tail::TailFunction;
use std::f64::consts::LN_2;
use std::path::Path;

pub fn mc_run(p: &McParams, seed: u64, use_max: bool, out_dir: &Path) -> Result<Outcome, String> {
    let mut out = Outcome::default();
    let pair = oracles::st_petersburg_pair();
    let cfg = SimConfig { sample_count: p.samples, seed, stop: StopRule::default() };
    let batch = if use_max {
        sim::sample_max(&pair, &cfg).map_err(|e| e.to_string())?
    } else {
        sim::sample_perpetuity(&pair, &cfg).map_err(|e| e.to_string())?
    };
    out.note("samples", p.samples as u64);
    out.note("truncated_paths", batch.truncated_paths);
    out.note("bias_bound", batch.bias_bound);

    let emp = TailFunction::from_samples(batch.values.clone());
    let mut t = Table::new("tail_vs_exact", &["x", "empirical", "exact", "z_score"]);
    let mut worst_z = 0.0f64;
    for &x in &p.xs {
        let exact = oracles::st_petersburg_tail(x);
        let se = stats::binomial_se(exact, p.samples);
        let z = (emp.value(x) - exact).abs() / se;
        worst_z = worst_z.max(z);
        t.push(vec![fmt_f64(x), fmt_f64(emp.value(x)), fmt_f64(exact), fmt_f64(z)]);
    }
    out.check_le("tail_max_z_score", worst_z, 3.0);
    out.tables.push(t);
    out.tables.push(ecdf_table("ecdf", &batch.values, p.ecdf_rows));

    if use_max {
        // the maximum equation has the same solution for this A·B = 0 pair:
        // two-sample KS against an independently seeded perpetuity run
        let other = sim::sample_perpetuity(
            &pair,
            &SimConfig { sample_count: p.samples, seed: seed ^ 0x9E3779B97F4A7C15, stop: StopRule::default() },
        )
        .map_err(|e| e.to_string())?;
        let d = stats::ks_two_sample(&batch.values, &other.values);
        let crit = stats::ks_critical_1pct(p.samples, p.samples);
        out.check("ks_vs_perpetuity", d < crit, format!("D = {d}, critical = {crit}"));
    }

    if p.export_samples {
        write_samples_with_sidecar(out_dir, "samples", &batch.values, seed, "see-manifest")
            .map_err(|e| e.to_string())?;
        out.note("samples_file", "samples.f64le");
    }
    Ok(out)
}

pub fn ifs_sandwich(p: &IfsParams, seed: u64) -> Result<Outcome, String> {
    let mut out = Outcome::default();
    let pair = oracles::st_petersburg_pair();
    let desc = IfsDescriptor { pair, map: IfsMap::SqrtSumSq, burn_in: p.burn_in };
    let cfg = SimConfig { sample_count: p.paths, seed, stop: StopRule::default() };
    let batch = sim::sample_ifs(&desc, &cfg).map_err(|e| e.to_string())?;
    out.note("paths", p.paths as u64);
    out.note("burn_in", p.burn_in);
    out.note("violations", batch.violations);
    out.check(
        "pathwise_sandwich",
        batch.violations == 0,
        format!("{} violations", batch.violations),
    );

    let grid = jittered_grid(LN_2, p.grid_points);
    let norm = NormalizerSeq::unit(p.depth_lo, p.depth_hi);
    let mk = |values: &[f64]| {
        qprofile::q_from_tail(
            &TailFunction::from_samples(values.to_vec()),
            1.0,
            LN_2,
            &norm,
            &grid,
            (p.depth_lo, p.depth_hi),
            false,
        )
        .map_err(|e| e.to_string())
        .map(|o| o.q)
    };
    let q_lo = mk(&batch.lower)?;
    let q_ifs = mk(&batch.ifs)?;
    let q_hi = mk(&batch.upper)?;
    let mut ordered = true;
    let mut t = Table::new("ifs_profiles", &["x", "q_lower", "q_ifs", "q_upper"]);
    for i in 0..grid.len() {
        let (x, v) = q_ifs.grid[i];
        ordered &= q_lo.grid[i].1 <= v && v <= q_hi.grid[i].1;
        t.push(vec![
            fmt_f64(x),
            fmt_f64(q_lo.grid[i].1),
            fmt_f64(v),
            fmt_f64(q_hi.grid[i].1),
        ]);
    }
    out.check("profiles_ordered", ordered, "lower <= ifs <= upper on the grid".to_string());
    out.tables.push(t);
    Ok(out)
}
