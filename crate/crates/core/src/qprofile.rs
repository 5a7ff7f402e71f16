//! The log-periodic tail profile `q` and the machinery around it.
//!
//! For a solution `X` of the fixed-point equation, the implicit renewal
//! function is `ψ(x) = e^{κx}(P{X > e^x} − P{AX > e^x})`. The profile is
//! recovered three ways, cross-checking each other:
//!
//! * [`q_from_psi`] — the explicit lattice sum `q(x) = (h/μ) Σ_j ψ(log x + jh)`;
//! * [`q_from_smoothing`] — the exponential-kernel smoothing route:
//!   `C(s) = (h/μ) Σ_j ψ̂(s + jh)` with `ψ̂(s) = ∫_{-∞}^s e^{-(s-x)} ψ(x) dx`,
//!   then `q` at continuity points by divided differences of `e^s C(s)`;
//! * [`q_from_tail`] — direct normalization of the tail along the lattice:
//!   `normalizer(n) · x^κ e^{κnh} · P{X > x e^{nh}}`.
//!
//! The smoothing integrals run over a breakpoint partition supplied by the
//! tail oracle, so every Gauss panel sees a smooth integrand; the
//! cumulative `W(s) = ∫_{-∞}^s e^y ψ(y) dy` is built once and every
//! `ψ̂(s + jh) = e^{-(s+jh)} W(s+jh)` is a lookup plus a partial panel.

use crate::exec::{self, Mode};
use crate::law::ArithmeticLaw;
use crate::renewal::RenewalSequence;
use crate::tail::TailFunction;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImplicitError {
    #[error("lattice sum failed the Cauchy criterion within |j| <= {cap}")]
    SumDivergence { cap: i64 },
    #[error("smoothing quadrature diverges")]
    QuadratureDivergence,
    #[error("empirical tail at depth n={n}: {got} exceedances < {needed} required")]
    InsufficientTailSamples { n: i64, got: usize, needed: usize },
    #[error("empirical tails must not feed the smoothing quadrature")]
    EmpiricalTailInSmoothing,
    #[error("profile violates the log-periodic class: {0}")]
    ProfileViolation(String),
}

/// Jittered evaluation grid on `[1, e^h)`: `count` points offset from the
/// lattice seams by the irrational fraction 1/√5 of the grid step, so
/// every point is a continuity point of piecewise oracles.
pub fn jittered_grid(span_h: f64, count: usize) -> Vec<f64> {
    let jitter = 1.0 / 5f64.sqrt();
    (0..count).map(|i| (span_h * (i as f64 + jitter) / count as f64).exp()).collect()
}

/// Which normalizer multiplies `x^κ e^{κnh} P{X > x e^{nh}}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormalizerKind {
    /// finite-mean regime: 1
    Unit,
    /// infinite-mean regime: m(nh)
    TruncatedMean,
    /// defective regime: 1/p_n
    DefectiveMass,
}

/// Per-depth normalizer values aligned with an `n` range.
#[derive(Debug, Clone)]
pub struct NormalizerSeq {
    pub kind: NormalizerKind,
    pub n_lo: i64,
    pub values: Vec<f64>,
}

impl NormalizerSeq {
    pub fn unit(n_lo: i64, n_hi: i64) -> Self {
        NormalizerSeq { kind: NormalizerKind::Unit, n_lo, values: vec![1.0; (n_hi - n_lo + 1) as usize] }
    }

    pub fn at(&self, n: i64) -> f64 {
        self.values[(n - self.n_lo) as usize]
    }
}

/// Values of `q` on one period `[1, e^h)`.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodicQ {
    pub kappa: f64,
    pub span_h: f64,
    /// (x, q(x)) sorted by x
    pub grid: Vec<(f64, f64)>,
    /// per-point truncation estimate
    pub trunc: Vec<f64>,
    pub normalizer: NormalizerKind,
}

impl PeriodicQ {
    /// q at the grid point nearest to the period-wrapped position of x.
    pub fn nearest(&self, x: f64) -> f64 {
        let lam = self.wrap(x);
        let i = self.grid.partition_point(|&(gx, _)| gx <= lam);
        if i == 0 {
            self.grid[0].1
        } else if i == self.grid.len() {
            self.grid[i - 1].1
        } else if (self.grid[i].0 - lam).abs() < (lam - self.grid[i - 1].0).abs() {
            self.grid[i].1
        } else {
            self.grid[i - 1].1
        }
    }

    /// Wrap x into `[1, e^h)` using the log-period.
    pub fn wrap(&self, x: f64) -> f64 {
        let f = (x.ln() / self.span_h).rem_euclid(1.0);
        (f * self.span_h).exp()
    }

    /// Grid value just right of the wrapped position (cyclic).
    pub fn right_limit(&self, x: f64) -> f64 {
        let lam = self.wrap(x);
        let i = self.grid.partition_point(|&(gx, _)| gx < lam);
        if i == self.grid.len() {
            self.grid[0].1 // next period starts at the first grid point
        } else {
            self.grid[i].1
        }
    }

    /// Grid value just left of the wrapped position (cyclic).
    pub fn left_limit(&self, x: f64) -> f64 {
        let lam = self.wrap(x);
        let i = self.grid.partition_point(|&(gx, _)| gx <= lam);
        if i == 0 {
            // previous period ends at the last grid point
            self.grid.last().unwrap().1
        } else {
            self.grid[i - 1].1
        }
    }

    /// Structural class check: `q ≥ 0` and `x^{-κ} q(x)` nonincreasing on
    /// the grid extended by one period across the seam.
    pub fn validate_class(&self, tol: f64) -> Result<(), ImplicitError> {
        let scale = self.grid.iter().map(|&(_, q)| q.abs()).fold(0.0f64, f64::max).max(1e-300);
        let mut prev = f64::INFINITY;
        for &(x, q) in &self.grid {
            if q < -tol * scale {
                return Err(ImplicitError::ProfileViolation(format!("q({x}) = {q} < 0")));
            }
            let r = q.max(0.0) * x.powf(-self.kappa);
            if r > prev * (1.0 + 1e-9) + tol * scale {
                return Err(ImplicitError::ProfileViolation(format!(
                    "x^-kappa q(x) increases at x = {x}"
                )));
            }
            prev = r;
        }
        // seam: first point wrapped one period up must continue the decrease
        let (x0, q0) = self.grid[0];
        let xw = x0 * self.span_h.exp();
        let r = q0.max(0.0) * xw.powf(-self.kappa);
        if r > prev * (1.0 + 1e-9) + tol * scale {
            return Err(ImplicitError::ProfileViolation(
                "x^-kappa q(x) increases across the period seam".into(),
            ));
        }
        Ok(())
    }
}

/// The implicit renewal function with a write-once evaluation cache.
#[derive(Debug)]
pub struct PsiFunction {
    pub kappa: f64,
    pub law_a: ArithmeticLaw,
    pub tail_x: TailFunction,
    /// tilted atom weights (k, a_k e^{κkh})
    weights: Vec<(i64, f64)>,
    cache: Mutex<HashMap<u64, f64>>,
}

impl PsiFunction {
    pub fn new(tail_x: TailFunction, law_a: ArithmeticLaw, kappa: f64) -> Self {
        if let Some(count) = tail_x.sample_count() {
            if count < 10_000 {
                eprintln!("warning: psi over an empirical tail with only {count} samples");
            }
        }
        let h = law_a.span();
        let weights = law_a
            .atoms()
            .map(|(k, m)| (k, m * (kappa * k as f64 * h).exp()))
            .collect();
        PsiFunction { kappa, law_a, tail_x, weights, cache: Mutex::new(HashMap::new()) }
    }

    /// `g(t) = e^{κt} P{X > e^t}`.
    fn g(&self, t: f64) -> f64 {
        if t.abs() <= 600.0 {
            (self.kappa * t).exp() * self.tail_x.value(t.exp())
        } else {
            // log-space far out, where e^t would overflow or underflow
            let x = t.exp().clamp(f64::MIN_POSITIVE, f64::MAX);
            let tv = self.tail_x.value(x);
            if tv <= 0.0 {
                0.0
            } else {
                (self.kappa * t + tv.ln()).exp()
            }
        }
    }

    /// `ψ(x) = e^{κx} (P{X > e^x} − P{AX > e^x})`, via the stable form
    /// `g(x) − Σ_k a_k e^{κkh} g(x − kh)`.
    pub fn eval(&self, x: f64) -> f64 {
        let key = x.to_bits();
        if let Some(&v) = self.cache.lock().unwrap().get(&key) {
            return v;
        }
        let h = self.law_a.span();
        let mut v = self.g(x);
        for &(k, w) in &self.weights {
            v -= w * self.g(x - k as f64 * h);
        }
        self.cache.lock().unwrap().insert(key, v);
        v
    }

    /// Breakpoints of ψ on `[y_lo, y_hi]`: the tail's breakpoints shifted
    /// by every atom of A, deduplicated.
    pub fn breakpoints(&self, y_lo: f64, y_hi: f64) -> Vec<f64> {
        let tail = match &self.tail_x {
            TailFunction::Exact(t) => t,
            TailFunction::Empirical(_) => return vec![],
        };
        let h = self.law_a.span();
        let mut pts = Vec::new();
        tail.breakpoints(y_lo, y_hi, &mut pts);
        let mut all = pts.clone();
        for &(k, _) in &self.weights {
            let shift = k as f64 * h;
            let mut tmp = Vec::new();
            tail.breakpoints(y_lo - shift, y_hi - shift, &mut tmp);
            all.extend(tmp.into_iter().map(|b| b + shift));
        }
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        all
    }
}

/// Two-sided lattice sum `Σ_j f(j)` expanded outward from 0 until 20
/// consecutive terms fall below 1e-12 of the running absolute mass.
fn two_sided_sum(f: impl Fn(i64) -> f64, cap: i64) -> Result<(f64, f64), ImplicitError> {
    let mut sum = f(0);
    let mut abs = sum.abs();
    let mut remainder = 0.0;
    for dir in [1i64, -1] {
        let mut below = 0;
        let mut j = dir;
        loop {
            let term = f(j);
            sum += term;
            abs += term.abs();
            if term.abs() < 1e-12 * (abs + 1e-300) {
                below += 1;
                if below >= 20 {
                    remainder += 20.0 * 1e-12 * (abs + 1e-300);
                    break;
                }
            } else {
                below = 0;
            }
            j += dir;
            if j.abs() > cap {
                return Err(ImplicitError::SumDivergence { cap });
            }
        }
    }
    Ok((sum, remainder))
}

/// Explicit route: `q(x) = (h/μ) Σ_j ψ(log x + jh)` on the grid.
pub fn q_from_psi(
    psi: &PsiFunction,
    mu: f64,
    x_grid: &[f64],
    j_cap: i64,
) -> Result<PeriodicQ, ImplicitError> {
    let h = psi.law_a.span();
    let xs = sorted_grid(x_grid);
    let per_point: Vec<Result<(f64, f64), ImplicitError>> =
        exec::map_indexed(xs.len(), Mode::Par, |i| {
            let s = xs[i].ln();
            let (sum, rem) = two_sided_sum(|j| psi.eval(s + j as f64 * h), j_cap)?;
            Ok((h / mu * sum, h / mu * rem))
        });
    let mut grid = Vec::with_capacity(xs.len());
    let mut trunc = Vec::with_capacity(xs.len());
    for (i, r) in per_point.into_iter().enumerate() {
        let (q, t) = r?;
        // clamp sub-truncation negatives: q is a nonnegative profile
        grid.push((xs[i], if q < 0.0 && q > -1e-11 { 0.0 } else { q }));
        trunc.push(t);
    }
    Ok(PeriodicQ { kappa: psi.kappa, span_h: h, grid, trunc, normalizer: NormalizerKind::Unit })
}

fn sorted_grid(x_grid: &[f64]) -> Vec<f64> {
    let mut xs = x_grid.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs
}

/// `e^{n·h}` evaluated exactly as a power of two when `h` is an integer
/// multiple of log 2 (the common case for the dyadic oracles).
fn exp_nh(span_h: f64, n: i64) -> f64 {
    let r = span_h / std::f64::consts::LN_2;
    if (r - r.round()).abs() < 1e-14 && (n * r.round() as i64).unsigned_abs() < 1000 {
        crate::special::exp2i((r.round() as i64 * n) as i32)
    } else {
        (n as f64 * span_h).exp()
    }
}

fn pow_kappa(x: f64, kappa: f64) -> f64 {
    if kappa == 1.0 {
        x
    } else {
        x.powf(kappa)
    }
}

// ---------------------------------------------------------------------------
// integrability / summability diagnostics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub enum ConditionMode {
    /// `∫ y^{κ-1} |ΔT| dy` — the weak hypothesis
    Integral,
    /// `Σ_j e^{κ(x+jh)} |ΔT|` at a fixed x — the strong hypothesis
    Sum { x: f64 },
    /// `∫ y^{κ+δ-1} |ΔT| dy` — the heavier-regime hypothesis
    DeltaIntegral { delta: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub mode_label: String,
    pub partial_value: f64,
    /// (decade upper edge in y-units of log10, contribution)
    pub decades: Vec<(f64, f64)>,
    pub last_decade_contribution: f64,
    /// contributions over the last decades shrink: the partial value looks convergent
    pub converged_heuristic: bool,
}

/// Evaluate one of the integrability conditions over the truncation range
/// `y ∈ [range.0, range.1]` (log scale). Diagnostic: reports the partial
/// value and the per-decade contributions, never errors.
pub fn check_conditions(psi: &PsiFunction, mode: ConditionMode, range: (f64, f64)) -> ConditionReport {
    let ln10 = std::f64::consts::LN_10;
    let (label, weight): (String, Box<dyn Fn(f64) -> f64>) = match mode {
        ConditionMode::Integral => ("integral".into(), Box::new(|_| 1.0)),
        ConditionMode::DeltaIntegral { delta } => {
            (format!("delta_integral({delta})"), Box::new(move |y: f64| (delta * y).exp()))
        }
        ConditionMode::Sum { x } => {
            // lattice sum: per-decade blocks of |j|
            let h = psi.law_a.span();
            let mut decades = Vec::new();
            let mut total = 0.0;
            let mut j_hi = 1i64;
            let cap = ((range.1 - range.0).abs() / h).ceil() as i64 + 10;
            let mut j_lo = 0i64;
            while j_lo <= cap {
                let mut block = 0.0;
                for j in j_lo..j_hi.min(cap + 1) {
                    for sgn in [1i64, -1] {
                        if j == 0 && sgn == -1 {
                            continue;
                        }
                        let y = x + (sgn * j) as f64 * h;
                        if y >= range.0 && y <= range.1 {
                            block += psi.eval(y).abs();
                        }
                    }
                }
                total += block;
                decades.push((j_hi as f64, block));
                j_lo = j_hi;
                j_hi *= 10;
            }
            let last = decades.last().map(|&(_, c)| c).unwrap_or(0.0);
            let converged = trailing_decreasing(&decades);
            return ConditionReport {
                mode_label: format!("sum(x={x})"),
                partial_value: total,
                decades,
                last_decade_contribution: last,
                converged_heuristic: converged,
            };
        }
    };
    // integral modes: breakpoint-partition quadrature of weight(y)·|ψ(y)|,
    // reported per decade of e^y
    let bps = partition(psi, range.0, range.1);
    let mut decades: Vec<(f64, f64)> = Vec::new();
    let mut total = 0.0;
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let v = gauss8(|y| weight(y) * psi.eval(y).abs(), a, b);
        total += v;
        let d = (0.5 * (a + b) / ln10).floor();
        match decades.last_mut() {
            Some(last) if last.0 == d => last.1 += v,
            _ => decades.push((d, v)),
        }
    }
    let last = decades.last().map(|&(_, c)| c).unwrap_or(0.0);
    let converged = trailing_decreasing(&decades);
    ConditionReport {
        mode_label: label,
        partial_value: total,
        decades,
        last_decade_contribution: last,
        converged_heuristic: converged,
    }
}

fn trailing_decreasing(decades: &[(f64, f64)]) -> bool {
    let total: f64 = decades.iter().map(|&(_, c)| c).sum();
    let tail: Vec<f64> = decades.iter().rev().take(3).map(|&(_, c)| c).collect();
    // contributions at the rounding floor count as converged
    tail.len() >= 2
        && tail
            .windows(2)
            .all(|w| w[0] <= w[1] * 1.001 + 1e-300 || w[0] <= 1e-9 * total)
}

// ---------------------------------------------------------------------------
// smoothing route
// ---------------------------------------------------------------------------

const GL8_X: [f64; 8] = [
    -0.9602898564975363,
    -0.7966664774136267,
    -0.525_532_409_916_329,
    -0.1834346424956498,
    0.1834346424956498,
    0.525_532_409_916_329,
    0.7966664774136267,
    0.9602898564975363,
];
const GL8_W: [f64; 8] = [
    0.1012285362903763,
    0.2223810344533745,
    0.3137066458778873,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];
const GL4_X: [f64; 4] =
    [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526];
const GL4_W: [f64; 4] =
    [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538];

fn gauss8(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    GL8_X.iter().zip(GL8_W).map(|(&x, w)| w * f(c + r * x)).sum::<f64>() * r
}

fn gauss4(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    GL4_X.iter().zip(GL4_W).map(|(&x, w)| w * f(c + r * x)).sum::<f64>() * r
}

/// Breakpoint partition of `[y_lo, y_hi]` for ψ, capped to a sane density.
fn partition(psi: &PsiFunction, y_lo: f64, y_hi: f64) -> Vec<f64> {
    let mut bps = psi.breakpoints(y_lo, y_hi);
    bps.retain(|&b| b > y_lo && b < y_hi);
    let mut out = Vec::with_capacity(bps.len() + 2);
    out.push(y_lo);
    out.extend(bps);
    out.push(y_hi);
    // subdivide stretches wider than one lattice step so the Gauss panels
    // stay short even where no oracle breakpoints exist
    let h = psi.law_a.span();
    let mut fine = Vec::with_capacity(out.len() * 2);
    for w in out.windows(2) {
        fine.push(w[0]);
        let len = w[1] - w[0];
        let extra = (len / h).floor() as usize;
        for e in 1..=extra {
            fine.push(w[0] + len * e as f64 / (extra + 1) as f64);
        }
    }
    fine.push(y_hi);
    fine
}

/// Exponential-kernel smoothing `ĝ(s) = ∫_{-∞}^s e^{-(s-x)} g(x) dx` by
/// composite Simpson with step halving.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Smoothed {
    pub value: f64,
    pub err_estimate: f64,
}

pub fn smooth_hat(
    g: &dyn Fn(f64) -> f64,
    s: f64,
    quad_step: f64,
) -> Result<Smoothed, ImplicitError> {
    assert!(quad_step > 0.0);
    let horizon = 45.0; // e^{-45} ≈ 3e-20 below any value of interest
    let simpson = |step: f64, t_max: f64| -> f64 {
        let n = ((t_max / step).ceil() as usize).max(2);
        let n = n + n % 2; // even panel count
        let hh = t_max / n as f64;
        let integrand = |t: f64| (-t).exp() * g(s - t);
        let mut acc = integrand(0.0) + integrand(t_max);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(i as f64 * hh);
        }
        acc * hh / 3.0
    };
    let mut step = quad_step;
    let mut prev = simpson(step, horizon);
    let mut small_in_a_row = 0;
    for _ in 0..16 {
        step *= 0.5;
        let next = simpson(step, horizon);
        let err = (next - prev).abs();
        // integrand jumps degrade Simpson to first order, where a single
        // small difference can be a fluke; require two consecutive passes
        if err <= 1e-11 * next.abs().max(1.0) {
            small_in_a_row += 1;
        } else {
            small_in_a_row = 0;
        }
        if small_in_a_row >= 2 {
            // integrable check: doubling the horizon must not move the value
            let wide = simpson(step, 2.0 * horizon);
            if (wide - next).abs() > 1e-6 * next.abs().max(1e-12) {
                return Err(ImplicitError::QuadratureDivergence);
            }
            return Ok(Smoothed { value: next, err_estimate: err.max(1e-13 * next.abs()) });
        }
        prev = next;
    }
    let wide = simpson(step, 2.0 * horizon);
    if (wide - prev).abs() > 1e-4 * prev.abs().max(1e-9) {
        return Err(ImplicitError::QuadratureDivergence);
    }
    Ok(Smoothed { value: prev, err_estimate: (wide - prev).abs().max(1e-12 * prev.abs()) })
}

/// Outcome of the smoothing route.
#[derive(Debug, Clone)]
pub struct SmoothingOutcome {
    pub q: PeriodicQ,
    /// C(s) at the bracket midpoints (diagnostic)
    pub c_values: Vec<(f64, f64)>,
    /// accumulated quadrature error estimate folded into q.trunc
    pub quad_err_w: f64,
    /// if a renewal sequence was supplied: the ratio of the key-renewal
    /// evaluation of ψ̂ at the window top to the direct C(s), per grid point
    pub renewal_ratio: Option<Vec<f64>>,
}

/// Smoothing route: build `W(s) = ∫_{-∞}^s e^y ψ(y) dy` once over a
/// breakpoint partition, assemble `C(s) = (h/μ) Σ_j e^{-(s+jh)} W(s+jh)`,
/// and recover q by central divided differences of `e^s C(s)` over
/// brackets of width `bracket_frac·h`.
pub fn q_from_smoothing(
    psi: &PsiFunction,
    u: Option<&RenewalSequence>,
    mu: f64,
    x_grid: &[f64],
    bracket_frac: f64,
) -> Result<SmoothingOutcome, ImplicitError> {
    if psi.tail_x.is_empirical() {
        return Err(ImplicitError::EmpiricalTailInSmoothing);
    }
    let h = psi.law_a.span();
    let kappa = psi.kappa;
    let delta = bracket_frac * h;
    let s_min = x_grid.iter().cloned().fold(f64::INFINITY, f64::min).ln() - delta;
    let s_max = x_grid.iter().cloned().fold(0.0f64, f64::max).ln() + delta;
    let y_lo = s_min - (50.0 / (1.0 + kappa)).max(10.0);
    let y_hi = s_max + 50.0f64.max(45.0 * h);

    // cumulative W over the partition
    let bps = partition(psi, y_lo, y_hi);
    let integrals: Vec<(f64, f64)> = exec::map_indexed(bps.len() - 1, Mode::Par, |i| {
        let (a, b) = (bps[i], bps[i + 1]);
        let f = |y: f64| y.exp() * psi.eval(y);
        (gauss8(f, a, b), gauss4(f, a, b))
    });
    let mut prefix = Vec::with_capacity(bps.len());
    prefix.push(0.0);
    let mut acc = 0.0;
    let mut quad_err_w = 0.0;
    for &(v8, v4) in &integrals {
        acc += v8;
        quad_err_w += (v8 - v4).abs();
        prefix.push(acc);
    }
    let w_at = |s: f64| -> f64 {
        if s <= y_lo {
            return 0.0;
        }
        if s >= y_hi {
            return acc;
        }
        let i = bps.partition_point(|&b| b <= s) - 1;
        prefix[i] + gauss8(|y| y.exp() * psi.eval(y), bps[i], s)
    };
    let psi_hat = |s: f64| -> f64 {
        if s < y_lo {
            0.0
        } else {
            (-s).exp() * w_at(s)
        }
    };
    let c_at = |s: f64| -> Result<f64, ImplicitError> {
        let (sum, _) = two_sided_sum(
            |j| {
                let t = s + j as f64 * h;
                if t > y_hi {
                    0.0
                } else {
                    psi_hat(t)
                }
            },
            4_000_000,
        )?;
        Ok(h / mu * sum)
    };

    let per_point: Vec<Result<(f64, f64), ImplicitError>> =
        exec::map_indexed(x_grid.len(), Mode::Par, |i| {
            let s = x_grid[i].ln();
            let (s1, s2) = (s - 0.5 * delta, s + 0.5 * delta);
            let (c1, c2) = (c_at(s1)?, c_at(s2)?);
            let q = (s2.exp() * c2 - s1.exp() * c1) / (s2.exp() - s1.exp());
            Ok((q, c_at(s)?))
        });
    let mut grid = Vec::with_capacity(x_grid.len());
    let mut c_values = Vec::with_capacity(x_grid.len());
    // error in C propagates into q through the divided difference
    let per_q_err = (h / mu) * quad_err_w / (1.0 - (-h).exp()) / delta * 3.0;
    let mut trunc = Vec::with_capacity(x_grid.len());
    for (i, r) in per_point.into_iter().enumerate() {
        let (q, c) = r?;
        grid.push((x_grid[i], q.max(0.0)));
        c_values.push((x_grid[i].ln(), c));
        trunc.push(per_q_err);
    }

    let renewal_ratio = match u {
        None => None,
        Some(useq) => {
            // evaluate in the window interior so the lattice shifts of ψ̂
            // are covered on both sides of its support
            let n = (useq.window.n_lo + useq.window.n_hi) / 2;
            let mut ratios = Vec::with_capacity(x_grid.len());
            for &(s, c) in &c_values {
                let fhat: f64 = useq
                    .iter()
                    .map(|(j, uj, _)| psi_hat(s + (n - j) as f64 * h) * uj)
                    .sum();
                ratios.push(if c.abs() > 1e-300 { fhat / c } else { f64::NAN });
            }
            Some(ratios)
        }
    };

    let q = PeriodicQ { kappa, span_h: h, grid, trunc, normalizer: NormalizerKind::Unit };
    Ok(SmoothingOutcome { q, c_values, quad_err_w, renewal_ratio })
}

// ---------------------------------------------------------------------------
// direct tail normalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailQRow {
    pub n: i64,
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct TailQOutcome {
    pub q: PeriodicQ,
    pub rows: Vec<TailQRow>,
    /// (n, max relative gap to the deepest row over the grid)
    pub stabilization: Vec<(i64, f64)>,
}

/// Direct route: `normalizer(n) · x^κ e^{κnh} · T(x e^{nh})` tabulated per
/// depth; the profile is taken from the deepest row.
///
/// Empirical tails are refused when the deepest depth would rest on fewer
/// than 100 exceedances, unless `allow_sparse_tail` is set.
pub fn q_from_tail(
    tail: &TailFunction,
    kappa: f64,
    span_h: f64,
    norm: &NormalizerSeq,
    x_grid: &[f64],
    n_range: (i64, i64),
    allow_sparse_tail: bool,
) -> Result<TailQOutcome, ImplicitError> {
    let (n_lo, n_hi) = n_range;
    assert!(n_hi >= n_lo);
    let xs = sorted_grid(x_grid);
    if tail.is_empirical() && !allow_sparse_tail {
        for &x in &xs {
            let arg = x * exp_nh(span_h, n_hi);
            let got = tail.exceedances(arg).unwrap_or(0);
            if got < 100 {
                return Err(ImplicitError::InsufficientTailSamples { n: n_hi, got, needed: 100 });
            }
        }
    }
    let mut rows = Vec::with_capacity(((n_hi - n_lo + 1) as usize) * xs.len());
    for n in n_lo..=n_hi {
        let step = exp_nh(span_h, n);
        let boost = pow_kappa(step, kappa);
        for &x in &xs {
            let value = norm.at(n) * pow_kappa(x, kappa) * boost * tail.value(x * step);
            rows.push(TailQRow { n, x, value });
        }
    }
    let last_start = rows.len() - xs.len();
    let deepest: Vec<(f64, f64)> =
        rows[last_start..].iter().map(|r| (r.x, r.value)).collect();
    let mut stabilization = Vec::new();
    for n in n_lo..=n_hi {
        let off = ((n - n_lo) as usize) * xs.len();
        let max_gap = (0..xs.len())
            .map(|i| {
                let denom = deepest[i].1.abs().max(1e-300);
                (rows[off + i].value - deepest[i].1).abs() / denom
            })
            .fold(0.0f64, f64::max);
        stabilization.push((n, max_gap));
    }
    let trunc = vec![0.0; deepest.len()];
    let q = PeriodicQ { kappa, span_h, grid: deepest, trunc, normalizer: norm.kind };
    Ok(TailQOutcome { q, rows, stabilization })
}

// ---------------------------------------------------------------------------
// sandwich (unsmoothing) report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SandwichRow {
    pub x: f64,
    pub lambda: f64,
    pub value: f64,
    pub q_right: f64,
    pub q_left: f64,
    pub within: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    pub all_within: bool,
    /// max |value/q(λ) − 1| over rows where q(λ) > 0 (continuous-q check)
    pub max_ratio_dev: f64,
}

/// Check `q(λ+) − tol ≤ normalizer·x^κ·T(x) ≤ q(λ−) + tol` along an
/// increasing sequence, where λ is the period-wrapped position of x.
pub fn lemma_sandwich(
    q: &PeriodicQ,
    tail: &TailFunction,
    x_seq: &[f64],
    norm_at: Option<&dyn Fn(f64) -> f64>,
    tol: f64,
) -> SandwichReport {
    let mut rows = Vec::with_capacity(x_seq.len());
    let mut all_within = true;
    let mut max_ratio_dev = 0.0f64;
    for &x in x_seq {
        let lambda = q.wrap(x);
        let norm = norm_at.map(|f| f(x)).unwrap_or(1.0);
        let value = norm * x.powf(q.kappa) * tail.value(x);
        let q_right = q.right_limit(x);
        let q_left = q.left_limit(x);
        let lo = q_right.min(q_left);
        let hi = q_right.max(q_left);
        let within = value >= lo - tol && value <= hi + tol;
        all_within &= within;
        let qn = q.nearest(x);
        if qn > 0.0 {
            max_ratio_dev = max_ratio_dev.max((value / qn - 1.0).abs());
        }
        rows.push(SandwichRow { x, lambda, value, q_right, q_left, within });
    }
    SandwichReport { rows, all_within, max_ratio_dev }
}
