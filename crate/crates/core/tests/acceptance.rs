//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its runtime and enforcing the stated tolerance and budget.

use latticeq::cramer;
use latticeq::law::ArithmeticLaw;
use latticeq::oracles::{self, QSegment, QTarget};
use latticeq::qprofile::{self, jittered_grid, NormalizerSeq};
use latticeq::renewal::{self, Window};
use latticeq::sim::{self, IfsDescriptor, IfsMap, SimConfig, StopRule};
use latticeq::stats;
use latticeq::tail::{EmpiricalTail, TailFunction};
use std::f64::consts::LN_2;
use std::time::Instant;

fn finish(criterion: &str, t0: Instant, budget_s: f64) {
    let dt = t0.elapsed().as_secs_f64();
    println!("criterion {criterion}: PASS ({dt:.2}s, budget {budget_s}s)");
    assert!(dt < budget_s, "criterion {criterion} exceeded its {budget_s}s budget: {dt:.2}s");
}

#[test]
fn criterion_1_st_petersburg_exactness() {
    let t0 = Instant::now();
    for (x, expected) in [(2.0, 0.5), (3.0, 0.5), (4.0, 0.25)] {
        let got = oracles::st_petersburg_tail(x);
        assert!((got - expected).abs() <= 1e-15, "tail({x}) = {got}, expected {expected}");
    }
    for k in 1..=40 {
        let got = oracles::st_petersburg_pushforward_pmf(k);
        let expected = 2f64.powi(-k);
        assert!(
            (got - expected).abs() <= 1e-14,
            "pushforward pmf at k={k}: {got} vs {expected}"
        );
    }
    finish("1 (St. Petersburg exactness)", t0, 1.0);
}

#[test]
fn criterion_2_implicit_formula_vs_oracle() {
    let t0 = Instant::now();
    let pair = oracles::st_petersburg_pair();
    let marginal = pair.marginal_a().unwrap();
    let info = cramer::classify(&marginal, 1.9).unwrap();
    assert!((info.kappa - 1.0).abs() < 1e-12);
    let psi = qprofile::PsiFunction::new(TailFunction::st_petersburg(), marginal, info.kappa);
    let grid = jittered_grid(LN_2, 64);
    let q = qprofile::q_from_psi(&psi, info.mu, &grid, 4_000_000).unwrap();
    for &(x, qv) in &q.grid {
        // q(x) = 2^{frac(log2 x)} = x on [1, 2)
        assert!((qv - x).abs() <= 1e-6, "q({x}) = {qv}, expected {x}");
    }
    finish("2 (implicit formula vs oracle)", t0, 10.0);
}

fn five_targets() -> Vec<QTarget> {
    // constant with p = 1/4, piecewise-linear, the St. Petersburg shape,
    // and two random monotone-compatible grids
    let piecewise = QTarget::native(vec![
        QSegment { z_lo: 1.0, z_hi: 1.4, q_lo: 0.7, q_hi: 0.98 },
        QSegment { z_lo: 1.4, z_hi: 2.0, q_lo: 0.98, q_hi: 0.98 },
    ]);
    vec![
        QTarget::constant(2.0 / 3.0),
        piecewise,
        QTarget::st_petersburg_shape(),
        QTarget::random_monotone(0xACCE55, 24),
        QTarget::random_monotone(0x5EED, 48),
    ]
}

#[test]
fn criterion_3_profile_construction_round_trip() {
    let t0 = Instant::now();
    for (i, target) in five_targets().iter().enumerate() {
        let built = oracles::qset_construct(target).unwrap();
        let grid = jittered_grid(LN_2, 96);
        let n_lo = built.min_depth();
        let norm = NormalizerSeq::unit(n_lo, n_lo + 3);
        let out = qprofile::q_from_tail(
            &built.tail,
            1.0,
            LN_2,
            &norm,
            &grid,
            (n_lo, n_lo + 3),
            false,
        )
        .unwrap();
        for &(x, qv) in &out.q.grid {
            let expected = built.expected_profile(x);
            assert!(
                (qv - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                "target {i}: recovered q({x}) = {qv}, expected {expected}"
            );
        }
        // the tail route is exactly depth-independent past the dyadic shift
        for &(_, gap) in &out.stabilization {
            assert!(gap <= 1e-12, "target {i}: depth instability {gap}");
        }
    }
    // constant-q explicit values: p = 1/4 gives tail (2 − 1/(1−p))/x, so 1/6 at x = 4
    let c = oracles::qset_construct(&QTarget::constant(2.0 / 3.0)).unwrap();
    assert!((c.p - 0.25).abs() < 1e-13);
    assert!((c.tail.value(4.0) - 1.0 / 6.0).abs() <= 1e-15);
    finish("3 (profile construction round trip)", t0, 5.0);
}

#[test]
fn criterion_4_monte_carlo_consistency() {
    let t0 = Instant::now();
    let pair = oracles::st_petersburg_pair();
    let n = 1_000_000usize;
    let cfg = |seed| SimConfig { sample_count: n, seed, stop: StopRule::default() };
    let perp = sim::sample_perpetuity(&pair, &cfg(0xA1)).unwrap().values;
    let maxi = sim::sample_max(&pair, &cfg(0xB2)).unwrap().values;
    let exact = sim::sample_ab0_exact(&pair, &cfg(0xC3)).unwrap().values;
    let crit = stats::ks_critical_1pct(n, n);
    assert!(stats::ks_two_sample(&perp, &maxi) < crit, "perpetuity vs max KS");
    assert!(stats::ks_two_sample(&perp, &exact) < crit, "perpetuity vs exact KS");
    assert!(stats::ks_two_sample(&maxi, &exact) < crit, "max vs exact KS");
    for values in [&perp, &maxi, &exact] {
        let tail = EmpiricalTail::from_samples(values.clone());
        for &x in &[2.0, 3.0, 4.0, 6.0, 8.0] {
            let exact_t = oracles::st_petersburg_tail(x);
            let se = stats::binomial_se(exact_t, n);
            assert!(
                (tail.value(x) - exact_t).abs() <= 3.0 * se,
                "tail at {x}: {} vs {exact_t}",
                tail.value(x)
            );
        }
    }
    finish("4 (Monte Carlo consistency)", t0, 60.0);
}

#[test]
fn criterion_5_blackwell_limit() {
    let t0 = Instant::now();
    // recursion oracle (independent of the engine): forward recursion on
    // the strictly positive support
    let f = ArithmeticLaw::from_atoms(1.0, [(1, 0.5), (2, 0.5)], 0.0).unwrap();
    let u = renewal::renewal_sequence(&f, 1.0, Window::nonneg(200), 1e-12).unwrap();
    let mut oracle = vec![0.0f64; 201];
    oracle[0] = 1.0;
    for n in 1..=200usize {
        let mut s = 0.5 * oracle[n - 1];
        if n >= 2 {
            s += 0.5 * oracle[n - 2];
        }
        oracle[n] = s;
    }
    for (n, un, _) in u.iter() {
        assert!((un - oracle[n as usize]).abs() <= 1e-10, "oracle mismatch at n={n}");
    }
    let mu = 1.5;
    let rep = renewal::blackwell_check(&u, mu).unwrap();
    for r in rep.rows.iter().filter(|r| (150..=200).contains(&r.n)) {
        assert!(
            (r.ratio - 1.0).abs() <= 1e-4,
            "u_n·mu/h at n={}: {}",
            r.n,
            r.ratio
        );
    }
    // two-sided tilted law converges similarly
    let f2 = ArithmeticLaw::from_atoms(LN_2, [(1, 2.0 / 3.0), (-1, 1.0 / 3.0)], 0.0).unwrap();
    let w = Window::default_for(1.0, LN_2, 200);
    let u2 = renewal::renewal_sequence(&f2, 1.0, w, 1e-10).unwrap();
    let rep2 = renewal::blackwell_check(&u2, f2.log_moment_lattice()).unwrap();
    for r in rep2.rows.iter().filter(|r| (150..=200).contains(&r.n)) {
        assert!((r.ratio - 1.0).abs() <= 1e-4, "two-sided ratio at n={}: {}", r.n, r.ratio);
    }
    finish("5 (Blackwell limit)", t0, 5.0);
}

#[test]
fn criterion_6_srt_limit() {
    let t0 = Instant::now();
    // sanity value for the constant
    assert!((renewal::srt_constant(0.5) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    // α = 0.7 masses k^{-1.7}: the limit itself converges too slowly for a
    // tight check, so the band plus monotone decade-average deviations is
    // the contract
    let f = ArithmeticLaw::from_generator(
        LN_2,
        latticeq::law::Generator::power_law(0.7, 1, 1.0),
        0.0,
    )
    .unwrap();
    let u = renewal::renewal_sequence(&f, 1.0, Window::nonneg(10_000), 1e-12).unwrap();
    let rep = renewal::srt_check(&u, &f, 0.7).unwrap();
    for r in rep.rows.iter().filter(|r| (5_000..=10_000).contains(&r.n)) {
        assert!(
            r.ratio >= 0.9 && r.ratio <= 1.1,
            "srt ratio at n={}: {}",
            r.n,
            r.ratio
        );
    }
    let devs: Vec<f64> = rep.decade_mean_dev.iter().map(|&(_, d)| d).collect();
    assert!(
        devs.windows(2).all(|w| w[1] <= w[0]),
        "decade-average deviation must decrease: {devs:?}"
    );
    finish("6 (SRT limit)", t0, 300.0);
}

#[test]
fn criterion_7_defective_limit() {
    let t0 = Instant::now();
    let theta = 0.5;
    let f = ArithmeticLaw::from_generator(
        1.0,
        latticeq::law::Generator::power_law(1.5, 1, 1.0),
        0.0,
    )
    .unwrap();
    let u = renewal::renewal_sequence(&f, theta, Window::nonneg(10_000), 1e-13).unwrap();
    // u_n / p_n within [1.8, 2.2] of the limit constant θ/(1−θ)² = 2
    for (n, un, _) in u.iter() {
        if !(5_000..=10_000).contains(&n) {
            continue;
        }
        let ratio = un / f.mass(n);
        assert!((1.8..=2.2).contains(&ratio), "u_n/p_n at n={n}: {ratio}");
    }
    let rep = renewal::defective_check(&u, &f, theta).unwrap();
    assert!(rep.last_decade_max_dev <= 0.1);
    // subexponentiality diagnostic over the same range
    let sub = latticeq::law::subexp_diagnostic(&f, 10_000).unwrap();
    assert!(sub.plausibly_subexponential(0.02), "k^{{-5/2}} ratios within 2%");
    finish("7 (defective limit)", t0, 300.0);
}

#[test]
fn criterion_8_sandwich_ifs() {
    let t0 = Instant::now();
    let pair = oracles::st_petersburg_pair();
    let desc = IfsDescriptor { pair, map: IfsMap::SqrtSumSq, burn_in: 200 };
    let cfg = SimConfig { sample_count: 100_000, seed: 0xD4, stop: StopRule::default() };
    let batch = sim::sample_ifs(&desc, &cfg).unwrap();
    assert_eq!(batch.violations, 0, "pathwise sandwich violations");
    // profile of the IFS lies between the bound pairs' profiles wherever
    // all three rest on ≥ 100 exceedances
    let grid = jittered_grid(LN_2, 16);
    let norm = NormalizerSeq::unit(1, 3);
    let mk = |values: &[f64]| {
        qprofile::q_from_tail(
            &TailFunction::from_samples(values.to_vec()),
            1.0,
            LN_2,
            &norm,
            &grid,
            (1, 3),
            false,
        )
        .unwrap()
        .q
    };
    let q_lo = mk(&batch.lower);
    let q_ifs = mk(&batch.ifs);
    let q_hi = mk(&batch.upper);
    for i in 0..grid.len() {
        let (x, v) = q_ifs.grid[i];
        assert!(
            q_lo.grid[i].1 <= v && v <= q_hi.grid[i].1,
            "profile ordering at x={x}: {} / {v} / {}",
            q_lo.grid[i].1,
            q_hi.grid[i].1
        );
    }
    finish("8 (sandwich IFS)", t0, 120.0);
}

#[test]
fn criterion_9_class_q_structural() {
    let t0 = Instant::now();
    // every profile produced by the oracle routes satisfies the class
    let mut profiles = Vec::new();
    for target in five_targets() {
        let built = oracles::qset_construct(&target).unwrap();
        let grid = jittered_grid(LN_2, 64);
        let n_lo = built.min_depth();
        let norm = NormalizerSeq::unit(n_lo, n_lo);
        let out = qprofile::q_from_tail(&built.tail, 1.0, LN_2, &norm, &grid, (n_lo, n_lo), false)
            .unwrap();
        profiles.push(out.q);
    }
    let norm1 = NormalizerSeq::unit(1, 1);
    profiles.push(
        qprofile::q_from_tail(
            &TailFunction::st_petersburg(),
            1.0,
            LN_2,
            &norm1,
            &jittered_grid(LN_2, 64),
            (1, 1),
            false,
        )
        .unwrap()
        .q,
    );
    for q in &profiles {
        q.validate_class(1e-9).unwrap();
        assert!(q.grid.iter().all(|&(_, v)| v >= 0.0));
    }
    // scaling covariance (A, cB) ↔ c·q(x/c) on the exact oracles, 1e-10
    let base = QTarget::random_monotone(0xCAB, 32);
    let mut scaled = base.clone();
    scaled.scale_c = 3.0;
    let b1 = oracles::qset_construct(&base).unwrap();
    let bc = oracles::qset_construct(&scaled).unwrap();
    let grid = jittered_grid(LN_2, 64);
    // deep enough that both tails sit in their exactly periodic regime
    // (the scaled pair needs log2(3·2^m) + 1 dyadic steps)
    let n = bc.min_depth().max(b1.min_depth()) + 4;
    for &x in &grid {
        // profile of the scaled pair at x, via its exact tail
        let arg = x * 2f64.powi(n as i32);
        let qc = arg * bc.tail.value(arg);
        // c·q1(x/c) via the base pair's exact tail, evaluated deep enough
        // that the base profile is exactly periodic
        let arg1 = (x / 3.0) * 2f64.powi((n + 4) as i32);
        let q1 = 3.0 * arg1 * b1.tail.value(arg1);
        assert!(
            (qc - q1).abs() <= 1e-10 * q1.abs().max(1.0),
            "scaling covariance at x={x}: {qc} vs {q1}"
        );
    }
    finish("9 (class-Q structural suite)", t0, 1.0);
}
