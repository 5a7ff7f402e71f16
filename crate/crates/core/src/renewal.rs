//! Renewal mass sequences `u_n = U(nh) − U(nh−)` for `U = Σ_m (θ F_κ)^{∗m}`.
//!
//! The engine iterates convolutions of the (possibly defective) tilted law
//! and accumulates the partial sums of the series, rather than solving a
//! linear system: two-sided supports preclude a pure forward recursion,
//! and the series form yields a certified truncation error.
//!
//! Two paths:
//!
//! * support bounded below by 1 — convolution powers are combined by
//!   doubling (`U_{2M+1} = U_M + V^{∗(M+1)} ∗ U_M`). Truncating every
//!   array at the window top is exact because indices only add, and the
//!   iteration stops once the power term vanishes on the window, so the
//!   result carries zero truncation error (or the geometric bound if the
//!   defective series is cut earlier).
//! * general two-sided support — sequential accumulation with padded
//!   arrays. The stopping rule bounds the omitted tail
//!   `Σ_{m>M} θ^m P{S_m = nh}` uniformly on the window by the geometric
//!   tail (θ < 1) or by a Chernoff bound from the tilted mgf (θ = 1,
//!   positive drift). Mass discarded at the array edges is tracked and
//!   folded into the per-index error bound.

use crate::conv;
use crate::cramer;
use crate::law::{ArithmeticLaw, LawError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenewalError {
    #[error("renewal series diverges: theta = 1 with nonpositive drift")]
    NonconvergentU,
    #[error("stopping bound stalled at {reached} > tol {tol}; raise the iteration cap")]
    WindowTooWide { reached: f64, tol: f64 },
    #[error("check does not apply to this sequence's regime")]
    WrongRegime,
    #[error("z does not satisfy the decay prerequisite")]
    DecayViolation,
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Inclusive lattice-index window `[n_lo, n_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub n_lo: i64,
    pub n_hi: i64,
}

impl Window {
    pub fn nonneg(n_hi: i64) -> Self {
        Window { n_lo: 0, n_hi }
    }

    /// Default window: the left edge puts the tilted law's exponential
    /// left-tail mass below e^{-40}.
    pub fn default_for(kappa: f64, span_h: f64, n_hi: i64) -> Self {
        let n_lo = -((40.0 / (kappa * span_h)).ceil() as i64);
        Window { n_lo, n_hi }
    }

    pub fn len(&self) -> usize {
        (self.n_hi - self.n_lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n_hi < self.n_lo
    }

    pub fn contains(&self, n: i64) -> bool {
        (self.n_lo..=self.n_hi).contains(&n)
    }
}

/// Renewal masses over a window, with per-index truncation-error bounds.
#[derive(Debug, Clone, Serialize)]
pub struct RenewalSequence {
    pub span_h: f64,
    pub window: Window,
    pub u: Vec<f64>,
    /// total kernel mass θ; 1 = proper
    pub defect_theta: f64,
    pub trunc_error: Vec<f64>,
}

impl RenewalSequence {
    pub fn value(&self, n: i64) -> Option<f64> {
        self.window.contains(n).then(|| self.u[(n - self.window.n_lo) as usize])
    }

    pub fn trunc(&self, n: i64) -> Option<f64> {
        self.window.contains(n).then(|| self.trunc_error[(n - self.window.n_lo) as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        self.u
            .iter()
            .zip(&self.trunc_error)
            .enumerate()
            .map(|(i, (&u, &e))| (self.window.n_lo + i as i64, u, e))
    }
}

/// Dense nonnegative mass vector with a lattice offset.
#[derive(Debug, Clone)]
struct Dense {
    off: i64,
    v: Vec<f64>,
}

impl Dense {
    fn delta0() -> Self {
        Dense { off: 0, v: vec![1.0] }
    }

    fn total(&self) -> f64 {
        self.v.iter().sum()
    }

    /// Convolve, truncate to `[lo, hi]`, clamp FFT noise, return discarded mass.
    fn conv_trunc(&self, other: &Dense, lo: i64, hi: i64) -> (Dense, f64) {
        let raw = conv::dense_auto(&self.v, &other.v);
        let off = self.off + other.off;
        let keep_lo = lo.max(off);
        let keep_hi = hi.min(off + raw.len() as i64 - 1);
        if keep_hi < keep_lo {
            let d: f64 = raw.iter().filter(|&&m| m > 0.0).sum();
            return (Dense { off: lo, v: vec![0.0] }, d);
        }
        let mut discarded = 0.0;
        for (i, &m) in raw.iter().enumerate() {
            let k = off + i as i64;
            if (k < keep_lo || k > keep_hi) && m > 0.0 {
                discarded += m;
            }
        }
        let v: Vec<f64> = raw[(keep_lo - off) as usize..=(keep_hi - off) as usize]
            .iter()
            .map(|&m| m.max(0.0))
            .collect();
        (Dense { off: keep_lo, v }, discarded)
    }

    fn add(&mut self, other: &Dense) {
        if other.v.iter().all(|&m| m == 0.0) {
            return;
        }
        let lo = self.off.min(other.off);
        let hi = (self.off + self.v.len() as i64).max(other.off + other.v.len() as i64) - 1;
        let mut v = vec![0.0; (hi - lo + 1) as usize];
        for (i, &m) in self.v.iter().enumerate() {
            v[(self.off + i as i64 - lo) as usize] += m;
        }
        for (i, &m) in other.v.iter().enumerate() {
            v[(other.off + i as i64 - lo) as usize] += m;
        }
        self.off = lo;
        self.v = v;
    }

    fn window_slice(&self, w: Window) -> Vec<f64> {
        (w.n_lo..=w.n_hi)
            .map(|k| {
                let i = k - self.off;
                if i >= 0 && (i as usize) < self.v.len() {
                    self.v[i as usize]
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn is_zero_on(&self, w: Window) -> bool {
        self.window_slice(w).iter().all(|&m| m == 0.0)
    }
}

/// Iteration cap for the sequential engine.
const M_CAP: usize = 400_000;

/// Compute `u_n = Σ_{m≥0} θ^m f^{∗m}[n]` on the window.
///
/// `tol` bounds the omitted series tail uniformly on the window; the
/// achieved bound (plus edge-discard contributions for two-sided laws)
/// is recorded per index in `trunc_error`.
pub fn renewal_sequence(
    f: &ArithmeticLaw,
    theta: f64,
    window: Window,
    tol: f64,
) -> Result<RenewalSequence, RenewalError> {
    assert!(theta > 0.0 && theta <= 1.0, "theta must lie in (0,1]");
    assert!(!window.is_empty());
    if f.zero_atom() > 1e-15 {
        return Err(RenewalError::Law(LawError::ZeroAtomPresent(f.zero_atom())));
    }
    let k_lo = f.support_min().ok_or(RenewalError::Law(LawError::UnboundedSupport))?;
    if theta == 1.0 && f.log_moment_lattice() <= 0.0 {
        return Err(RenewalError::NonconvergentU);
    }
    if k_lo >= 1 {
        doubling_positive(f, theta, window, tol)
    } else {
        sequential_two_sided(f, theta, window, tol, k_lo)
    }
}

/// Doubling path for supports in `{1, 2, ...}`: exact on the window.
fn doubling_positive(
    f: &ArithmeticLaw,
    theta: f64,
    window: Window,
    tol: f64,
) -> Result<RenewalSequence, RenewalError> {
    let n_hi = window.n_hi;
    let k_lo = f.support_min().unwrap();
    let k_hi = f.support_max().unwrap_or(n_hi).min(n_hi).max(k_lo);
    let mut fv = f.dense(k_lo, k_hi);
    for m in fv.iter_mut() {
        *m *= theta;
    }
    let mut u = Dense::delta0();
    let mut p = Dense { off: k_lo, v: fv };
    let mut m_done: i64 = 0; // u covers Σ_{m=0}^{m_done}; p = V^{∗(m_done+1)}
    let bound;
    loop {
        if p.is_zero_on(Window { n_lo: 0, n_hi }) {
            bound = 0.0;
            break;
        }
        if theta < 1.0 {
            let geo = theta.powi(m_done as i32 + 1) / (1.0 - theta);
            if geo <= tol {
                bound = geo;
                break;
            }
        }
        let (pu, _) = p.conv_trunc(&u, 0, n_hi);
        u.add(&pu);
        let (pp, _) = p.conv_trunc(&p, 0, n_hi);
        p = pp;
        m_done = 2 * m_done + 1;
        if m_done > 4 * n_hi.max(64) {
            return Err(RenewalError::WindowTooWide { reached: p.total(), tol });
        }
    }
    let uvals = u.window_slice(window);
    let trunc = vec![bound; uvals.len()];
    Ok(RenewalSequence {
        span_h: f.span(),
        window,
        u: uvals,
        defect_theta: theta,
        trunc_error: trunc,
    })
}

/// Sequential path for two-sided supports with padded arrays.
fn sequential_two_sided(
    f: &ArithmeticLaw,
    theta: f64,
    window: Window,
    tol: f64,
    k_lo: i64,
) -> Result<RenewalSequence, RenewalError> {
    let k_hi = f.support_max().ok_or(RenewalError::Law(LawError::UnboundedSupport))?;
    let width = (k_hi - k_lo).max(1);
    let pad = 256 + 4 * width;
    let l_cut = window.n_lo - pad;
    let r_cut = window.n_hi + pad;
    let mut fv = f.dense(k_lo, k_hi);
    for m in fv.iter_mut() {
        *m *= theta;
    }
    let fd = Dense { off: k_lo, v: fv.clone() };

    // Chernoff data for the proper case: φ(t) = Σ f_k e^{tk} over a t-grid
    let chernoff: Vec<(f64, f64)> = if theta == 1.0 {
        (1..=640)
            .map(|j| -0.0125 * j as f64)
            .filter_map(|t| {
                let phi: f64 = fv
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| m * (t * (k_lo + i as i64) as f64).exp())
                    .sum();
                (phi.is_finite() && phi < 1.0).then_some((t, phi))
            })
            .collect()
    } else {
        Vec::new()
    };
    if theta == 1.0 && chernoff.is_empty() {
        return Err(RenewalError::NonconvergentU);
    }

    let mut acc = vec![0.0f64; window.len()];
    if window.contains(0) {
        acc[(0 - window.n_lo) as usize] += 1.0; // the m = 0 delta term
    }
    let mut g = Dense::delta0();
    let mut discards: Vec<(usize, f64)> = Vec::new();
    let mut final_bound;
    let mut m = 0usize;
    loop {
        m += 1;
        let (g2, d) = g.conv_trunc(&fd, l_cut, r_cut);
        g = g2;
        if d > 0.0 {
            discards.push((m, d));
        }
        for (slot, val) in acc.iter_mut().zip(g.window_slice(window)) {
            *slot += val;
        }
        let bound = if theta < 1.0 {
            theta.powi(m as i32 + 1) / (1.0 - theta)
        } else {
            // min over the grid of e^{-t·n_hi}·φ(t)^{m+1}/(1−φ(t))
            chernoff
                .iter()
                .map(|&(t, phi)| {
                    (-t * window.n_hi as f64).exp() * phi.powi(m as i32 + 1) / (1.0 - phi)
                })
                .fold(f64::INFINITY, f64::min)
        };
        if bound <= tol {
            final_bound = bound;
            break;
        }
        if m >= M_CAP {
            return Err(RenewalError::WindowTooWide { reached: bound, tol });
        }
    }
    // every unit of mass discarded at step m' can revisit window points at
    // most θ/(1−θ) times (θ<1) or once per remaining step (θ=1)
    let discard_contrib: f64 = discards
        .iter()
        .map(|&(md, d)| {
            if theta < 1.0 {
                d / (1.0 - theta)
            } else {
                d * (m - md) as f64
            }
        })
        .sum();
    final_bound += discard_contrib;
    let trunc = vec![final_bound; acc.len()];
    Ok(RenewalSequence {
        span_h: f.span(),
        window,
        u: acc,
        defect_theta: theta,
        trunc_error: trunc,
    })
}

/// `sin(απ)/((1−α)π)`, with the α = 1 convention C_1 = 1.
pub fn srt_constant(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        1.0
    } else {
        (alpha * std::f64::consts::PI).sin() / ((1.0 - alpha) * std::f64::consts::PI)
    }
}

/// One row of a convergence report: `ratio = u_n · normalizer`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub n: i64,
    pub u_n: f64,
    pub normalizer: f64,
    pub ratio: f64,
    pub trunc_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub kind: String,
    pub rows: Vec<ConvergenceRow>,
    /// max |ratio − 1| over the last decade of the window
    pub last_decade_max_dev: f64,
    /// (decade upper edge, mean |ratio − 1| within the decade)
    pub decade_mean_dev: Vec<(i64, f64)>,
}

fn build_report(kind: &str, rows: Vec<ConvergenceRow>) -> ConvergenceReport {
    let n_hi = rows.last().map(|r| r.n).unwrap_or(0);
    let last_decade_max_dev = rows
        .iter()
        .filter(|r| r.n >= n_hi - n_hi / 10)
        .map(|r| (r.ratio - 1.0).abs())
        .fold(0.0f64, f64::max);
    let mut decade_mean_dev = Vec::new();
    let mut hi = n_hi;
    while hi >= 10 {
        let lo = hi / 10;
        let devs: Vec<f64> = rows
            .iter()
            .filter(|r| r.n > lo && r.n <= hi)
            .map(|r| (r.ratio - 1.0).abs())
            .collect();
        if !devs.is_empty() {
            decade_mean_dev.push((hi, devs.iter().sum::<f64>() / devs.len() as f64));
        }
        hi = lo;
    }
    decade_mean_dev.reverse();
    ConvergenceReport { kind: kind.to_string(), rows, last_decade_max_dev, decade_mean_dev }
}

/// Blackwell limit check: `u_n · μ/h → 1` (proper, finite mean).
pub fn blackwell_check(u: &RenewalSequence, mu: f64) -> Result<ConvergenceReport, RenewalError> {
    if u.defect_theta < 1.0 || !mu.is_finite() {
        return Err(RenewalError::WrongRegime);
    }
    let norm = mu / u.span_h;
    let rows = u
        .iter()
        .filter(|&(n, _, _)| n >= 0)
        .map(|(n, un, e)| ConvergenceRow {
            n,
            u_n: un,
            normalizer: norm,
            ratio: un * norm,
            trunc_error: e,
        })
        .collect();
    Ok(build_report("blackwell", rows))
}

/// Strong renewal limit check: `u_n · m(nh) / (h·C_α) → 1`.
pub fn srt_check(
    u: &RenewalSequence,
    f_kappa: &ArithmeticLaw,
    alpha: f64,
) -> Result<ConvergenceReport, RenewalError> {
    if u.defect_theta < 1.0 || !(0.0 < alpha && alpha <= 1.0) {
        return Err(RenewalError::WrongRegime);
    }
    let c = srt_constant(alpha);
    let m_grid = cramer::truncated_mean_grid(f_kappa, u.window.n_hi);
    let rows = u
        .iter()
        .filter(|&(n, _, _)| n >= 1)
        .map(|(n, un, e)| {
            let norm = m_grid[n as usize] / (u.span_h * c);
            ConvergenceRow { n, u_n: un, normalizer: norm, ratio: un * norm, trunc_error: e }
        })
        .collect();
    Ok(build_report("srt", rows))
}

/// Defective limit check: `u_n / (p_n · θ/(1−θ)²) → 1`.
pub fn defective_check(
    u: &RenewalSequence,
    f_kappa: &ArithmeticLaw,
    theta: f64,
) -> Result<ConvergenceReport, RenewalError> {
    if u.defect_theta >= 1.0 || !(0.0 < theta && theta < 1.0) {
        return Err(RenewalError::WrongRegime);
    }
    let c = theta / (1.0 - theta).powi(2);
    let rows = u
        .iter()
        .filter(|&(n, _, _)| n >= 1 && f_kappa.mass(n) > 0.0)
        .map(|(n, un, e)| {
            let norm = 1.0 / (f_kappa.mass(n) * c);
            ConvergenceRow { n, u_n: un, normalizer: norm, ratio: un * norm, trunc_error: e }
        })
        .collect();
    Ok(build_report("defective", rows))
}

/// Regime data for the key-renewal limit prediction.
#[derive(Debug, Clone, Copy)]
pub enum LimitKind {
    FiniteMean { mu: f64 },
    /// `m_nh` = m(n·h) at the evaluation index
    InfiniteMean { alpha: f64, m_nh: f64 },
    /// `p_n` = kernel mass at the evaluation index
    Defective { theta: f64, p_n: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KeyRenewalOutcome {
    /// Σ_j z(x + nh − jh)·u_j over the window
    pub value: f64,
    /// Σ_j z(x + jh), truncated with the reported remainder
    pub z_sum: f64,
    /// the regime's predicted limit for `value`
    pub predicted: f64,
    pub z_sum_remainder: f64,
}

/// Evaluate `∫ z(x + nh − y) U(dy)` on the computed window and compare to
/// the key renewal prediction for the regime.
pub fn key_renewal_eval(
    z: &dyn Fn(f64) -> f64,
    u: &RenewalSequence,
    x: f64,
    n: i64,
    limit: &LimitKind,
) -> Result<KeyRenewalOutcome, RenewalError> {
    let h = u.span_h;
    let value: f64 = u.iter().map(|(j, uj, _)| z(x + (n - j) as f64 * h) * uj).sum();

    // Σ_j z(x + jh) with symmetric outward expansion
    let mut z_sum = z(x);
    let mut abs_sum = z(x).abs();
    let mut remainder = 0.0;
    for dir in [1i64, -1] {
        let mut below = 0;
        let mut j = dir;
        loop {
            let term = z(x + j as f64 * h);
            z_sum += term;
            abs_sum += term.abs();
            if term.abs() < 1e-12 * (abs_sum + 1e-300) {
                below += 1;
                if below >= 20 {
                    remainder += 20.0 * 1e-12 * (abs_sum + 1e-300);
                    break;
                }
            } else {
                below = 0;
            }
            j += dir;
            if j.abs() > 2_000_000 {
                return Err(RenewalError::DecayViolation);
            }
        }
    }

    // decay prerequisite
    match limit {
        LimitKind::FiniteMean { .. } | LimitKind::InfiniteMean { .. } => {
            // z(y) = O(y^{-1}): sampled growth check on y·|z(y)|
            let probe: Vec<f64> = (1..=40)
                .map(|i| {
                    let y = x + (n + i * 50) as f64 * h;
                    y.abs() * z(y).abs()
                })
                .collect();
            let head = probe[..20].iter().cloned().fold(0.0f64, f64::max);
            let tail = probe[20..].iter().cloned().fold(0.0f64, f64::max);
            if tail > 10.0 * head.max(1e-12) {
                return Err(RenewalError::DecayViolation);
            }
        }
        LimitKind::Defective { p_n, .. } => {
            // z(x + nh) = o(p_n): reject if z at the horizon dominates
            if z(x + n as f64 * h).abs() > 1e3 * p_n {
                return Err(RenewalError::DecayViolation);
            }
        }
    }

    let predicted = match *limit {
        LimitKind::FiniteMean { mu } => h / mu * z_sum,
        LimitKind::InfiniteMean { alpha, m_nh } => h * srt_constant(alpha) * z_sum / m_nh,
        LimitKind::Defective { theta, p_n } => theta / (1.0 - theta).powi(2) * z_sum * p_n,
    };
    Ok(KeyRenewalOutcome { value, z_sum, predicted, z_sum_remainder: remainder })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Generator;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    /// Forward-recursion oracle, valid for strictly positive support:
    /// u_n = δ_{n0} + θ Σ_k f_k u_{n−k}. Independent of the engine.
    fn recursion_oracle(f: &ArithmeticLaw, theta: f64, n_hi: i64) -> Vec<f64> {
        let k_max = f.support_max().unwrap_or(n_hi);
        let mut u = vec![0.0f64; n_hi as usize + 1];
        u[0] = 1.0;
        for n in 1..=n_hi {
            let mut s = 0.0;
            for k in 1..=k_max.min(n) {
                s += f.mass(k) * u[(n - k) as usize];
            }
            u[n as usize] = theta * s;
        }
        u
    }

    #[test]
    fn deterministic_walk() {
        // f = δ_h, θ = 1: u_n = 1 for n ≥ 0
        let f = ArithmeticLaw::point(1.0, 1);
        let u = renewal_sequence(&f, 1.0, Window::nonneg(50), 1e-12).unwrap();
        for (n, un, e) in u.iter() {
            assert_relative_eq!(un, 1.0, epsilon = 1e-12);
            assert_eq!(e, 0.0, "exact path has zero truncation error at n={n}");
        }
        let rep = blackwell_check(&u, 1.0).unwrap();
        assert!(rep.rows.iter().all(|r| (r.ratio - 1.0).abs() < 1e-12));
    }

    #[test]
    fn geometric_point_mass_defective() {
        // θ = 1/2, f = δ_h: u_n = 2^{-n}
        let f = ArithmeticLaw::point(1.0, 1);
        let u = renewal_sequence(&f, 0.5, Window::nonneg(40), 1e-15).unwrap();
        for (n, un, e) in u.iter() {
            assert_relative_eq!(un, 0.5f64.powi(n as i32), max_relative = 1e-10);
            assert!(e <= 1e-15 + 1e-18);
        }
    }

    #[test]
    fn two_point_law_recursion_values() {
        // f = ½δ_h + ½δ_{2h}: u_0 = 1, u_1 = ½, u_2 = ¾; u_n → h/μ = 2/3
        let f = ArithmeticLaw::from_atoms(1.0, [(1, 0.5), (2, 0.5)], 0.0).unwrap();
        let u = renewal_sequence(&f, 1.0, Window::nonneg(200), 1e-12).unwrap();
        assert_relative_eq!(u.value(0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(u.value(1).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(u.value(2).unwrap(), 0.75, epsilon = 1e-12);
        let oracle = recursion_oracle(&f, 1.0, 200);
        for (n, un, _) in u.iter() {
            assert!((un - oracle[n as usize]).abs() <= 1e-10, "recursion oracle mismatch at {n}");
        }
        let mu = 1.5; // E steps = ½·1 + ½·2 lattice units, h = 1
        let rep = blackwell_check(&u, mu).unwrap();
        assert!(rep.last_decade_max_dev < 1e-10);
    }

    #[test]
    fn two_sided_law_blackwell() {
        // tilted ±h law with masses (2/3, 1/3): u_n → h/μ = 3
        let f = ArithmeticLaw::from_atoms(LN_2, [(1, 2.0 / 3.0), (-1, 1.0 / 3.0)], 0.0).unwrap();
        let w = Window::default_for(1.0, LN_2, 200);
        let u = renewal_sequence(&f, 1.0, w, 1e-10).unwrap();
        let mu = f.log_moment_lattice();
        assert_relative_eq!(mu, LN_2 / 3.0, epsilon = 1e-12);
        let rep = blackwell_check(&u, mu).unwrap();
        let at_200 = rep.rows.iter().find(|r| r.n == 200).unwrap();
        assert!((at_200.ratio - 1.0).abs() < 1e-4, "ratio at n=200: {}", at_200.ratio);
        // iterated-convolution oracle: plain dense powers, no truncation
        let fd = f.dense(-1, 1);
        let targets = [0i64, 5, 20];
        let mut oracle = [0.0f64; 3];
        for (ti, &t) in targets.iter().enumerate() {
            if t == 0 {
                oracle[ti] += 1.0;
            }
        }
        let mut g = vec![1.0f64];
        let mut g_off = 0i64;
        for _m in 1..4000 {
            g = crate::conv::dense_direct_seq(&g, &fd);
            g_off -= 1;
            for (ti, &t) in targets.iter().enumerate() {
                let idx = t - g_off;
                if idx >= 0 && (idx as usize) < g.len() {
                    oracle[ti] += g[idx as usize];
                }
            }
        }
        for (ti, &t) in targets.iter().enumerate() {
            assert_relative_eq!(u.value(t).unwrap(), oracle[ti], epsilon = 1e-8);
        }
    }

    #[test]
    fn window_consistency() {
        let f = ArithmeticLaw::from_atoms(LN_2, [(1, 2.0 / 3.0), (-1, 1.0 / 3.0)], 0.0).unwrap();
        let big = renewal_sequence(&f, 1.0, Window { n_lo: -40, n_hi: 120 }, 1e-11).unwrap();
        let small = renewal_sequence(&f, 1.0, Window { n_lo: -10, n_hi: 60 }, 1e-11).unwrap();
        for (n, un, e) in small.iter() {
            let ub = big.value(n).unwrap();
            let eb = big.trunc(n).unwrap();
            assert!((un - ub).abs() <= e + eb + 1e-15, "window consistency at {n}");
        }
    }

    #[test]
    fn defective_power_law_limit_and_mass() {
        // θ = 1/2, p_k ∝ k^{-5/2}: u_n/p_n → θ/(1−θ)² = 2; total mass 1/(1−θ)
        let theta = 0.5;
        let f =
            ArithmeticLaw::from_generator(1.0, Generator::power_law(1.5, 1, 1.0), 0.0).unwrap();
        let n_hi = 4000;
        let u = renewal_sequence(&f, theta, Window::nonneg(n_hi), 1e-13).unwrap();
        let rep = defective_check(&u, &f, theta).unwrap();
        let last = rep.rows.last().unwrap();
        assert!((last.ratio - 1.0).abs() < 0.05, "u_n/(2p_n) at n={}: {}", last.n, last.ratio);
        assert_relative_eq!(theta / (1.0 - theta) / (1.0 - theta), 2.0, epsilon = 1e-15);
        // Σ u_n = 1/(1−θ) with a Markov bound on the out-of-window tail
        let total: f64 = u.u.iter().sum();
        let mean = f.generator().unwrap().tail_weighted(1, 1);
        let leftover = mean * theta / (1.0 - theta) / (1.0 - theta) / n_hi as f64;
        let expect = 1.0 / (1.0 - theta);
        assert!(
            (total - expect).abs() <= leftover + 1e-10,
            "total {total} vs {expect} (allow {leftover})"
        );
        // forward recursion oracle to 1e-10
        let oracle = recursion_oracle(&f, theta, 500);
        for n in 0..=500i64 {
            assert!((u.value(n).unwrap() - oracle[n as usize]).abs() <= 1e-10);
        }
    }

    #[test]
    fn defective_theta_small_first_order() {
        // θ → 0: u_n/p_n → θ/(1−θ)² ≈ θ (single-convolution dominance)
        let theta = 0.01;
        let f =
            ArithmeticLaw::from_generator(1.0, Generator::power_law(1.5, 1, 1.0), 0.0).unwrap();
        let u = renewal_sequence(&f, theta, Window::nonneg(800), 1e-16).unwrap();
        let n = 800;
        let ratio = u.value(n).unwrap() / f.mass(n);
        assert_relative_eq!(ratio, theta / (1.0 - theta) / (1.0 - theta), max_relative = 0.05);
        assert!((ratio - theta).abs() < 0.1 * theta);
    }

    #[test]
    fn srt_alpha_half_constant() {
        assert_relative_eq!(srt_constant(0.5), 2.0 / std::f64::consts::PI, epsilon = 1e-15);
        assert_eq!(srt_constant(1.0), 1.0);
    }

    #[test]
    fn srt_power_law_ratio_band() {
        // α = 0.7: ratio u_n·m(nh)/(h·C_α) near 1 over the last decade
        let f =
            ArithmeticLaw::from_generator(LN_2, Generator::power_law(0.7, 1, 1.0), 0.0).unwrap();
        let u = renewal_sequence(&f, 1.0, Window::nonneg(5000), 1e-12).unwrap();
        let rep = srt_check(&u, &f, 0.7).unwrap();
        let last = rep.rows.last().unwrap();
        assert!((last.ratio - 1.0).abs() < 0.1, "srt ratio at n={}: {}", last.n, last.ratio);
        let devs: Vec<f64> = rep.decade_mean_dev.iter().map(|&(_, d)| d).collect();
        assert!(devs.windows(2).all(|w| w[1] <= w[0]), "decade deviations {devs:?}");
    }

    #[test]
    fn nonconvergent_inputs_rejected() {
        let f = ArithmeticLaw::from_atoms(1.0, [(1, 0.3), (-1, 0.7)], 0.0).unwrap();
        assert!(matches!(
            renewal_sequence(&f, 1.0, Window::nonneg(10), 1e-10),
            Err(RenewalError::NonconvergentU)
        ));
    }

    #[test]
    fn key_renewal_point_indicator_reduces_to_blackwell() {
        // z = indicator of a single lattice point: value → h/μ
        let f = ArithmeticLaw::from_atoms(1.0, [(1, 0.5), (2, 0.5)], 0.0).unwrap();
        let u = renewal_sequence(&f, 1.0, Window::nonneg(400), 1e-12).unwrap();
        let z = |y: f64| if (y - 0.25).abs() < 1e-9 { 1.0 } else { 0.0 };
        let out = key_renewal_eval(&z, &u, 0.25, 300, &LimitKind::FiniteMean { mu: 1.5 }).unwrap();
        assert_relative_eq!(out.value, 1.0 / 1.5, max_relative = 1e-9);
        assert_relative_eq!(out.predicted, 1.0 / 1.5, max_relative = 1e-12);
    }

    #[test]
    fn key_renewal_exponential_z_interior_limit() {
        // z(x+jh) = e^{-|j|}, f = δ_h: at the window top the sum collapses
        // to the one-sided geometric Σ_{m≥0} e^{-m} = e/(e-1); in the
        // interior it reaches the full two-sided prediction (e+1)/(e-1)
        let f = ArithmeticLaw::point(1.0, 1);
        let u = renewal_sequence(&f, 1.0, Window::nonneg(400), 1e-12).unwrap();
        let x = 0.0;
        let z = move |y: f64| (-(y - x).abs()).exp();
        let e = std::f64::consts::E;
        let top = key_renewal_eval(&z, &u, x, 400, &LimitKind::FiniteMean { mu: 1.0 }).unwrap();
        assert_relative_eq!(top.value, e / (e - 1.0), max_relative = 1e-10);
        let mid = key_renewal_eval(&z, &u, x, 200, &LimitKind::FiniteMean { mu: 1.0 }).unwrap();
        assert_relative_eq!(mid.value, (e + 1.0) / (e - 1.0), max_relative = 1e-10);
        assert_relative_eq!(mid.predicted, (e + 1.0) / (e - 1.0), max_relative = 1e-10);
    }

    #[test]
    fn key_renewal_decay_violation() {
        let f = ArithmeticLaw::point(1.0, 1);
        let u = renewal_sequence(&f, 1.0, Window::nonneg(50), 1e-12).unwrap();
        let z = |y: f64| if y > 0.0 { y.sqrt() * 1e-9 } else { 0.0 };
        assert!(matches!(
            key_renewal_eval(&z, &u, 0.0, 25, &LimitKind::FiniteMean { mu: 1.0 }),
            Err(RenewalError::DecayViolation)
        ));
    }
}
