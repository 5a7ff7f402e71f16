//! Monte Carlo samplers for the stationary solutions of `X =_D AX + B`,
//! `X =_D AX ∨ B`, and sandwich-bounded iterated function systems.
//!
//! Paths are embarrassingly parallel: every path owns a ChaCha substream
//! keyed by its index, so output is bit-identical for any worker count
//! (and for the sequential fallback). The perpetuity and maximum use
//! forward iteration with a weight-floor stopping rule; the reported
//! truncation bias is a heuristic bound, never silently dropped. For
//! `A·B = 0` pairs the representation `X = A_1…A_{N-1} B_N` terminates
//! exactly (the weight hits zero), so those samples carry no bias at all.

use crate::exec::{self, Mode};
use crate::law::{JointAbLaw, LawError, PairSampler};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("pair is not contracting: E log A >= 0")]
    NonContractive,
    #[error("exact sampler requires an A·B = 0 pair in conditional form")]
    NotAb0Pair,
    #[error("sandwich violated at (a={a}, b={b}, x={x}): psi={psi}, lower={lower}, upper={upper}")]
    SandwichViolated { a: f64, b: f64, x: f64, psi: f64, lower: f64, upper: f64 },
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Path stopping rule: stop when the running weight `Π A_i` drops below
/// `weight_floor` or after `max_steps` factors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StopRule {
    pub weight_floor: f64,
    pub max_steps: u32,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { weight_floor: 1e-9, max_steps: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub sample_count: usize,
    pub seed: u64,
    #[serde(default)]
    pub stop: StopRule,
}

/// Sample array plus truncation accounting.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub truncated_paths: u64,
    /// heuristic bound on the per-sample bias from weight-floor stopping
    pub bias_bound: f64,
}

fn path_rng(seed: u64, idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx);
    rng
}

fn contraction_check(pair: &JointAbLaw) -> Result<(), SimError> {
    let marginal = pair.marginal_a()?;
    if marginal.drift_log() >= 0.0 {
        return Err(SimError::NonContractive);
    }
    Ok(())
}

fn bias_heuristic(pair: &JointAbLaw, stop: &StopRule, truncated: u64, total: usize) -> f64 {
    if truncated == 0 {
        return 0.0;
    }
    let e_b = pair.mean_abs_b_bound();
    let e_a = pair.marginal_a().map(|m| m.mellin_moment(1.0)).unwrap_or(f64::INFINITY);
    let per_path = if e_a < 0.999 {
        stop.weight_floor * e_b / (1.0 - e_a)
    } else {
        stop.weight_floor * e_b * stop.max_steps as f64
    };
    per_path * truncated as f64 / total as f64
}

fn run_batch(
    pair: &JointAbLaw,
    cfg: &SimConfig,
    mode: Mode,
    per_path: impl Fn(&PairSampler, &mut ChaCha8Rng, &StopRule) -> (f64, bool) + Sync + Send,
) -> SampleBatch {
    let sampler = pair.sampler();
    let out: Vec<(f64, bool)> = exec::map_indexed(cfg.sample_count, mode, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        per_path(&sampler, &mut rng, &cfg.stop)
    });
    let truncated = out.iter().filter(|&&(_, t)| t).count() as u64;
    let values = out.into_iter().map(|(v, _)| v).collect();
    SampleBatch { values, truncated_paths: truncated, bias_bound: bias_heuristic(pair, &cfg.stop, truncated, cfg.sample_count) }
}

fn perpetuity_path(sampler: &PairSampler, rng: &mut ChaCha8Rng, stop: &StopRule) -> (f64, bool) {
    let mut acc = 0.0;
    let mut w = 1.0;
    let mut steps = 0u32;
    loop {
        let (a, b) = sampler.sample(rng);
        acc += w * b;
        w *= a;
        steps += 1;
        if w == 0.0 {
            return (acc, false);
        }
        if w < stop.weight_floor || steps >= stop.max_steps {
            return (acc, true);
        }
    }
}

fn max_path(sampler: &PairSampler, rng: &mut ChaCha8Rng, stop: &StopRule) -> (f64, bool) {
    let mut best = f64::NEG_INFINITY;
    let mut w = 1.0;
    let mut steps = 0u32;
    loop {
        let (a, b) = sampler.sample(rng);
        best = best.max(w * b);
        w *= a;
        steps += 1;
        if w == 0.0 {
            return (best, false);
        }
        if w < stop.weight_floor || steps >= stop.max_steps {
            return (best, true);
        }
    }
}

/// Sample `X = Σ_{n≥1} (Π_{i<n} A_i) B_n` by forward iteration.
pub fn sample_perpetuity(pair: &JointAbLaw, cfg: &SimConfig) -> Result<SampleBatch, SimError> {
    sample_perpetuity_mode(pair, cfg, Mode::Par)
}

/// Execution-mode variant (benchmarks compare Seq vs Par).
pub fn sample_perpetuity_mode(
    pair: &JointAbLaw,
    cfg: &SimConfig,
    mode: Mode,
) -> Result<SampleBatch, SimError> {
    contraction_check(pair)?;
    Ok(run_batch(pair, cfg, mode, perpetuity_path))
}

/// Sample `X = sup_{n≥1} (Π_{i<n} A_i) B_n`.
pub fn sample_max(pair: &JointAbLaw, cfg: &SimConfig) -> Result<SampleBatch, SimError> {
    contraction_check(pair)?;
    Ok(run_batch(pair, cfg, Mode::Par, max_path))
}

/// Exact sampler for `A·B = 0` pairs: draw the geometric stopping index N,
/// then `X = e^{h·S_{N-1}}·B` with the conditional laws. No truncation.
pub fn sample_ab0_exact(pair: &JointAbLaw, cfg: &SimConfig) -> Result<SampleBatch, SimError> {
    let (p_zero, b_dist, a_pos) = match pair {
        JointAbLaw::Ab0 { p_zero, b_given_zero, a_given_pos } => (*p_zero, b_given_zero, a_given_pos),
        JointAbLaw::Mixture { .. } => return Err(SimError::NotAb0Pair),
    };
    contraction_check(pair)?;
    let h = a_pos.span();
    let base2 = (h - std::f64::consts::LN_2).abs() < 1e-15;
    let mut ks = Vec::new();
    let mut cum = Vec::new();
    let mut acc = 0.0;
    for (k, m) in a_pos.atoms() {
        acc += m;
        ks.push(k);
        cum.push(acc);
    }
    let values: Vec<f64> = exec::map_indexed(cfg.sample_count, Mode::Par, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let u: f64 = rng.gen();
        let n = 1 + ((1.0 - u).ln() / (1.0 - p_zero).ln()).floor().max(0.0) as u64;
        let mut s: i64 = 0;
        for _ in 0..n - 1 {
            let v: f64 = rng.gen();
            let idx = cum.partition_point(|&c| c <= v * acc).min(ks.len() - 1);
            s += ks[idx];
        }
        let b = b_dist.sample(rng.gen());
        if base2 {
            crate::special::exp2i(s as i32) * b
        } else {
            (s as f64 * h).exp() * b
        }
    });
    Ok(SampleBatch { values, truncated_paths: 0, bias_bound: 0.0 })
}

/// The recursion map of the iterated function system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IfsMap {
    /// Ψ(θ, x) = Ax + B (the upper bound itself)
    Linear,
    /// Ψ(θ, x) = Ax ∨ B (the lower bound itself)
    Max,
    /// Ψ(θ, x) = sqrt((Ax)² + B²)
    SqrtSumSq,
}

impl IfsMap {
    fn apply(&self, a: f64, x: f64, b: f64) -> f64 {
        let ax = a * x;
        match self {
            IfsMap::Linear => ax + b,
            IfsMap::Max => ax.max(b),
            // exact on the A·B = 0 branches, hypot elsewhere
            IfsMap::SqrtSumSq => {
                if ax == 0.0 {
                    b.abs()
                } else if b == 0.0 {
                    ax
                } else {
                    ax.hypot(b)
                }
            }
        }
    }
}

/// IFS driven by a pair: the same θ = (A, B) draw feeds the map and both
/// bounding recursions `Ax ∨ B ≤ Ψ(θ, x) ≤ Ax + B`.
#[derive(Debug, Clone)]
pub struct IfsDescriptor {
    pub pair: JointAbLaw,
    pub map: IfsMap,
    /// forward-iteration horizon per path
    pub burn_in: u32,
}

/// End states of the IFS and of the coupled bounding chains.
#[derive(Debug, Clone)]
pub struct IfsBatch {
    pub ifs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// pathwise sandwich violations over every step of every path
    pub violations: u64,
}

/// Forward-iterate the IFS with coupled bounds.
///
/// Before running any paths the bound inequalities are checked on a draw
/// grid; violations abort with the offending (θ, x).
pub fn sample_ifs(desc: &IfsDescriptor, cfg: &SimConfig) -> Result<IfsBatch, SimError> {
    contraction_check(&desc.pair)?;
    let sampler = desc.pair.sampler();
    // validation grid: dedicated stream so path streams stay untouched
    {
        let mut rng = path_rng(cfg.seed, u64::MAX);
        let xs = [0.0, 0.1, 0.5, 1.0, 2.0, 8.0, 64.0, 1e4];
        for _ in 0..256 {
            let (a, b) = sampler.sample(&mut rng);
            for &x in &xs {
                let psi = desc.map.apply(a, x, b);
                let lower = (a * x).max(b);
                let upper = a * x + b;
                if psi < lower || psi > upper {
                    return Err(SimError::SandwichViolated { a, b, x, psi, lower, upper });
                }
            }
        }
    }
    let out: Vec<(f64, f64, f64, u64)> = exec::map_indexed(cfg.sample_count, Mode::Par, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let mut x = 0.0f64;
        let mut lo = 0.0f64;
        let mut hi = 0.0f64;
        let mut viol = 0u64;
        for _ in 0..desc.burn_in {
            let (a, b) = sampler.sample(&mut rng);
            x = desc.map.apply(a, x, b);
            lo = (a * lo).max(b);
            hi = a * hi + b;
            if !(lo <= x && x <= hi) {
                viol += 1;
            }
        }
        (x, lo, hi, viol)
    });
    let mut batch = IfsBatch {
        ifs: Vec::with_capacity(out.len()),
        lower: Vec::with_capacity(out.len()),
        upper: Vec::with_capacity(out.len()),
        violations: 0,
    };
    for (x, lo, hi, v) in out {
        batch.ifs.push(x);
        batch.lower.push(lo);
        batch.upper.push(hi);
        batch.violations += v;
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{BDist, PairRow};
    use crate::oracles;
    use crate::stats;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn constant_pair(a: f64, b: f64) -> JointAbLaw {
        // A ≡ a = e^{k·h} with h chosen so k = -1, B ≡ b
        let h = -(a.ln());
        JointAbLaw::Mixture {
            span_h: h,
            rows: vec![PairRow { weight: 1.0, a_index: Some(-1), b: BDist::Point(b) }],
        }
    }

    #[test]
    fn constant_pair_geometric_series() {
        // B ≡ b, A ≡ a < 1: samples = b/(1−a) up to the weight-floor cut
        let pair = constant_pair(0.5, 1.0);
        let cfg = SimConfig { sample_count: 32, seed: 9, stop: StopRule::default() };
        let batch = sample_perpetuity(&pair, &cfg).unwrap();
        for &v in &batch.values {
            assert!((v - 2.0).abs() <= 2.0 * 1e-9 + 1e-12);
        }
        assert_eq!(batch.truncated_paths, 32);
        assert!(batch.bias_bound > 0.0 && batch.bias_bound < 1e-8);
        // maximum equation with decreasing weights: X ≡ b
        let batch = sample_max(&pair, &cfg).unwrap();
        assert!(batch.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_a_samples_are_b_draws() {
        // A ≡ 0: perpetuity samples are plain B draws
        let pair = JointAbLaw::Mixture {
            span_h: LN_2,
            rows: vec![PairRow { weight: 1.0, a_index: None, b: BDist::Point(3.25) }],
        };
        let cfg = SimConfig { sample_count: 16, seed: 4, stop: StopRule::default() };
        let batch = sample_perpetuity(&pair, &cfg).unwrap();
        assert!(batch.values.iter().all(|&v| v == 3.25));
        assert_eq!(batch.bias_bound, 0.0);
    }

    #[test]
    fn noncontractive_rejected() {
        let pair = constant_pair(0.5, 1.0);
        // invert the sign of the lattice index: A = 2 > 1
        let bad = match pair {
            JointAbLaw::Mixture { span_h, mut rows } => {
                rows[0].a_index = Some(1);
                JointAbLaw::Mixture { span_h, rows }
            }
            _ => unreachable!(),
        };
        let cfg = SimConfig { sample_count: 4, seed: 1, stop: StopRule::default() };
        assert!(matches!(sample_perpetuity(&bad, &cfg), Err(SimError::NonContractive)));
    }

    #[test]
    fn determinism_bit_identical() {
        let pair = oracles::st_petersburg_pair();
        let cfg = SimConfig { sample_count: 2000, seed: 77, stop: StopRule::default() };
        let a = sample_perpetuity(&pair, &cfg).unwrap();
        let b = sample_perpetuity(&pair, &cfg).unwrap();
        assert_eq!(a.values, b.values);
        let a_seq = sample_perpetuity_mode(&pair, &cfg, crate::exec::Mode::Seq).unwrap();
        assert_eq!(a.values, a_seq.values, "parallel and sequential must agree bit for bit");
    }

    #[test]
    fn st_petersburg_tail_matches_oracle() {
        // empirical tail within 3 binomial standard errors at the spec points
        let pair = oracles::st_petersburg_pair();
        let cfg = SimConfig { sample_count: 200_000, seed: 3, stop: StopRule::default() };
        let batch = sample_perpetuity(&pair, &cfg).unwrap();
        assert_eq!(batch.truncated_paths, 0, "A·B = 0 paths terminate exactly");
        let tail = crate::tail::EmpiricalTail::from_samples(batch.values);
        for &x in &[2.0, 3.0, 4.0] {
            let exact = oracles::st_petersburg_tail(x);
            let se = stats::binomial_se(exact, cfg.sample_count);
            assert!(
                (tail.value(x) - exact).abs() <= 3.0 * se,
                "tail at {x}: {} vs {exact} (se {se})",
                tail.value(x)
            );
        }
    }

    #[test]
    fn ab0_exact_matches_pmfs() {
        // Prop-pair with p = 1/4: N geometric with success 1/3;
        // S_{N-1} pmf from the closed form
        let built = oracles::qset_construct(&oracles::QTarget::constant(2.0 / 3.0)).unwrap();
        assert_relative_eq!(built.p, 0.25, epsilon = 1e-13);
        let cfg = SimConfig { sample_count: 400_000, seed: 21, stop: StopRule::default() };
        let batch = sample_ab0_exact(&built.pair, &cfg).unwrap();
        // S is recoverable from the sample: X = scale·2^S·B̃ with B̃ ∈ [1,2)
        let mut s_counts = vec![0usize; 12];
        for &v in &batch.values {
            let (_, n) = crate::special::frexp2(v / built.scale_total);
            if (n as usize) < s_counts.len() {
                s_counts[n as usize] += 1;
            }
        }
        for k in 0..8u32 {
            let expected = oracles::sn_pmf(0.25, k);
            let got = s_counts[k as usize] as f64 / cfg.sample_count as f64;
            let se = stats::binomial_se(expected, cfg.sample_count);
            assert!(
                (got - expected).abs() <= 4.0 * se,
                "S pmf at {k}: {got} vs {expected}"
            );
        }
        // empirical tail vs the exact closed form
        let tail = crate::tail::EmpiricalTail::from_samples(batch.values);
        for &x in &[2.5f64, 4.0, 6.3, 9.0] {
            let exact = built.tail.value(x);
            let se = stats::binomial_se(exact, cfg.sample_count);
            assert!((tail.value(x) - exact).abs() <= 3.5 * se, "tail at {x}");
        }
    }

    #[test]
    fn ab0_routes_agree_in_distribution() {
        // perpetuity, maximum and exact sampler agree pairwise (KS below
        // the 1% critical value) for the A·B = 0 St. Petersburg pair
        let pair = oracles::st_petersburg_pair();
        let n = 100_000usize;
        let mk = |seed| SimConfig { sample_count: n, seed, stop: StopRule::default() };
        let a = sample_perpetuity(&pair, &mk(100)).unwrap().values;
        let b = sample_max(&pair, &mk(200)).unwrap().values;
        let c = sample_ab0_exact(&pair, &mk(300)).unwrap().values;
        let crit = stats::ks_critical_1pct(n, n);
        assert!(stats::ks_two_sample(&a, &b) < crit);
        assert!(stats::ks_two_sample(&a, &c) < crit);
        assert!(stats::ks_two_sample(&b, &c) < crit);
    }

    #[test]
    fn ifs_linear_equals_perpetuity_under_coupling() {
        // Ψ = Ax + B: the IFS chain is the perpetuity accumulated forward;
        // with coupled draws upper state == ifs state exactly
        let pair = oracles::st_petersburg_pair();
        let desc = IfsDescriptor { pair, map: IfsMap::Linear, burn_in: 64 };
        let cfg = SimConfig { sample_count: 500, seed: 5, stop: StopRule::default() };
        let batch = sample_ifs(&desc, &cfg).unwrap();
        assert_eq!(batch.violations, 0);
        for (x, u) in batch.ifs.iter().zip(batch.upper.iter()) {
            assert_eq!(x, u);
        }
    }

    #[test]
    fn ifs_sqrt_map_nondegenerate_sandwich() {
        // a pair with A and B simultaneously positive: the bounds differ
        // pathwise, and the IFS sits strictly between them
        let pair = JointAbLaw::Mixture {
            span_h: LN_2,
            rows: vec![
                PairRow { weight: 0.7, a_index: Some(-1), b: BDist::Point(1.0) },
                PairRow { weight: 0.3, a_index: Some(1), b: BDist::Point(0.5) },
            ],
        };
        let desc = IfsDescriptor { pair, map: IfsMap::SqrtSumSq, burn_in: 400 };
        let cfg = SimConfig { sample_count: 4_000, seed: 33, stop: StopRule::default() };
        let batch = sample_ifs(&desc, &cfg).unwrap();
        assert_eq!(batch.violations, 0);
        let mut strict = 0usize;
        for ((x, l), u) in batch.ifs.iter().zip(&batch.lower).zip(&batch.upper) {
            assert!(l <= x && x <= u);
            if l < x && x < u {
                strict += 1;
            }
        }
        assert!(strict > 3_000, "bounds should separate on most paths: {strict}");
        // ... and the empirical tails order strictly somewhere
        let xs = [1.5f64, 2.0, 3.0];
        let count = |v: &[f64], x: f64| v.iter().filter(|&&s| s > x).count();
        assert!(xs.iter().any(|&x| count(&batch.lower, x) < count(&batch.upper, x)));
    }

    #[test]
    fn ifs_sqrt_map_sandwich_zero_violations() {
        let pair = oracles::st_petersburg_pair();
        let desc = IfsDescriptor { pair, map: IfsMap::SqrtSumSq, burn_in: 128 };
        let cfg = SimConfig { sample_count: 5_000, seed: 15, stop: StopRule::default() };
        let batch = sample_ifs(&desc, &cfg).unwrap();
        assert_eq!(batch.violations, 0);
        // with A·B = 0 the sqrt map coincides with the max map pathwise
        for (x, l) in batch.ifs.iter().zip(batch.lower.iter()) {
            assert_eq!(x, l);
        }
        // empirical tails are pathwise ordered at every threshold
        for &x in &[1.0, 2.0, 4.0, 16.0] {
            let tl = batch.lower.iter().filter(|&&v| v > x).count();
            let ti = batch.ifs.iter().filter(|&&v| v > x).count();
            let tu = batch.upper.iter().filter(|&&v| v > x).count();
            assert!(tl <= ti && ti <= tu);
        }
    }
}
