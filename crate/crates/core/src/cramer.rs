//! Cramér condition, exponential tilting and regime classification.
//!
//! For a law of `log A` the Cramér root is the κ > 0 with `E A^κ = 1`.
//! Under the tilted measure `F_κ(dy) = e^{κy} F(dy)` the fixed-point
//! equations become renewal equations; which renewal limit applies is
//! decided here:
//!
//! * finite mean — `E A^κ log A < ∞` (Blackwell limit);
//! * infinite mean — the tilted tail is regularly varying with index
//!   α ∈ (0, 1] (strong renewal limit with the truncated-mean normalizer);
//! * defective — `E A^κ = θ < 1` with `E A^t = ∞` for t > κ
//!   (heavy-tailed tilted law, defective renewal limit).
//!
//! The abscissa of convergence of `s ↦ E A^s` is discovered numerically by
//! bisection on a far-tail mass-ratio probe rather than read off the
//! parametric family.

use crate::law::{ArithmeticLaw, LawError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CramerError {
    #[error("E log A >= 0: no contracting regime")]
    PositiveDrift,
    #[error("E A^s < 1 for all s <= s_max = {s_max} and no finite abscissa")]
    NoCramerRoot { s_max: f64 },
    #[error("E A^kappa diverges, cannot tilt")]
    DivergentTilt,
    #[error("inverse tilt mass {0} exceeds 1; rescale the span or shift indices")]
    MassExceedsOne(f64),
    #[error("operation does not apply in this regime")]
    WrongRegime,
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Outcome of solving the Cramér condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaSolution {
    /// `E A^κ = 1` with κ > 0.
    Root(f64),
    /// The moment jumps to +∞ at `kappa` with `E A^kappa = theta < 1`.
    Defective { kappa: f64, theta: f64 },
}

/// Hint describing the slowly varying part of the tilted tail. Supplied
/// by the construction (estimating it from data is ill-posed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SlowlyVaryingHint {
    Constant(f64),
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Regime {
    FiniteMean,
    InfiniteMeanRegVar { alpha: f64, ell: SlowlyVaryingHint },
    Defective { theta: f64 },
}

/// κ, μ = E A^κ log A, the regime tag and the tilted law.
#[derive(Debug, Clone, Serialize)]
pub struct CramerInfo {
    pub kappa: f64,
    #[serde(serialize_with = "ser_maybe_inf")]
    pub mu: f64,
    pub regime: Regime,
    pub tilted: ArithmeticLaw,
}

fn ser_maybe_inf<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

/// Solve `E A^s = 1` on `(0, s_max]`, or detect the defective regime.
///
/// The map `s ↦ E A^s` is log-convex with value 1 at s = 0 and negative
/// slope there (drift check), so a root in the region of finiteness is
/// unique and plain bracketed bisection suffices.
pub fn solve_kappa(law: &ArithmeticLaw, s_max: f64) -> Result<KappaSolution, CramerError> {
    assert!(s_max > 0.0);
    if law.drift_log() >= 0.0 {
        return Err(CramerError::PositiveDrift);
    }
    let (s_ub, at_abscissa) = if law.mellin_is_finite(s_max) {
        (s_max, false)
    } else {
        // bisect the abscissa of convergence on the finiteness probe
        let mut lo = 0.0f64;
        let mut hi = s_max;
        for _ in 0..120 {
            let mid = 0.5 * (lo + hi);
            if law.mellin_is_finite(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        (lo, true)
    };
    let phi_ub = law.mellin_moment(s_ub);
    if at_abscissa {
        if phi_ub < 1.0 - 1e-9 {
            return Ok(KappaSolution::Defective { kappa: s_ub, theta: phi_ub });
        }
        if (phi_ub - 1.0).abs() <= 1e-9 {
            // Cramér condition holds exactly at the series boundary
            return Ok(KappaSolution::Root(s_ub));
        }
    } else if phi_ub < 1.0 {
        return Err(CramerError::NoCramerRoot { s_max });
    }
    // root strictly inside (0, s_ub]: find a bracket point with E A^s < 1
    let mut s_lo = 0.5 * s_ub;
    let mut tries = 0;
    while law.mellin_moment(s_lo) >= 1.0 {
        s_lo *= 0.5;
        tries += 1;
        if tries > 200 {
            return Err(CramerError::NoCramerRoot { s_max });
        }
    }
    let mut hi = s_ub;
    let mut lo = s_lo;
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if law.mellin_moment(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(KappaSolution::Root(0.5 * (lo + hi)))
}

/// Tilted law: `tilted[k] = e^{κkh}·law[k] / E A^κ`, with no division when
/// `E A^κ = 1` (within mass tolerance). The zero atom is annihilated.
pub fn tilt(law: &ArithmeticLaw, kappa: f64) -> Result<ArithmeticLaw, CramerError> {
    let m = law.mellin_moment(kappa);
    if !m.is_finite() {
        return Err(CramerError::DivergentTilt);
    }
    let divisor = if (m - 1.0).abs() <= 1e-12 { 1.0 } else { m };
    let h = law.span();
    match law.generator() {
        Some(g) => {
            let mut g2 = *g;
            g2.damp -= kappa * h;
            if g2.damp < 0.0 {
                if g2.damp < -1e-9 {
                    return Err(CramerError::DivergentTilt);
                }
                g2.damp = 0.0;
            }
            g2.coeff /= divisor;
            Ok(ArithmeticLaw::from_generator(h, g2, 0.0)?)
        }
        None => {
            let atoms: Vec<(i64, f64)> = law
                .atoms()
                .map(|(k, mass)| (k, mass * (kappa * k as f64 * h).exp() / divisor))
                .collect();
            Ok(ArithmeticLaw::from_atoms_raw(h, atoms, 0.0)?)
        }
    }
}

/// Inverse tilt: `original[k] = e^{-κkh}·f_κ[k]`, deficit into the zero atom.
pub fn invert_tilt(f_kappa: &ArithmeticLaw, kappa: f64) -> Result<ArithmeticLaw, CramerError> {
    scaled_invert_tilt(f_kappa, kappa, 1.0)
}

/// Inverse tilt with total lattice mass `theta`:
/// `original[k] = θ·e^{-κkh}·f_κ[k]`, so that `E A^κ = θ` by construction.
///
/// θ = 1 is the plain inverse tilt; θ < 1 manufactures defective laws.
pub fn scaled_invert_tilt(
    f_kappa: &ArithmeticLaw,
    kappa: f64,
    theta: f64,
) -> Result<ArithmeticLaw, CramerError> {
    assert!((0.0..=1.0).contains(&theta) && theta > 0.0);
    let h = f_kappa.span();
    if f_kappa.zero_atom() > 1e-15 {
        return Err(CramerError::Law(LawError::ZeroAtomPresent(f_kappa.zero_atom())));
    }
    let law = match f_kappa.generator() {
        Some(g) => {
            let mut g2 = *g;
            g2.damp += kappa * h;
            g2.coeff *= theta;
            let s = g2.total();
            if s > 1.0 + 1e-12 {
                return Err(CramerError::MassExceedsOne(s));
            }
            ArithmeticLaw::from_generator(h, g2, (1.0 - s).max(0.0))?
        }
        None => {
            let atoms: Vec<(i64, f64)> = f_kappa
                .atoms()
                .map(|(k, mass)| (k, theta * mass * (-kappa * k as f64 * h).exp()))
                .collect();
            let s: f64 = atoms.iter().map(|(_, m)| m).sum();
            if s > 1.0 + 1e-12 {
                return Err(CramerError::MassExceedsOne(s));
            }
            ArithmeticLaw::from_atoms_raw(h, atoms, (1.0 - s).max(0.0))?
        }
    };
    Ok(law)
}

/// Full classification: κ (or the defective pair), μ and the tilted law.
pub fn classify(law: &ArithmeticLaw, s_max: f64) -> Result<CramerInfo, CramerError> {
    match solve_kappa(law, s_max)? {
        KappaSolution::Root(kappa) => {
            let tilted = tilt(law, kappa)?;
            let mu = tilted.log_moment_lattice();
            if mu.is_finite() {
                debug_assert!(mu > 0.0, "convexity forces mu > 0 at a Cramér root");
                Ok(CramerInfo { kappa, mu, regime: Regime::FiniteMean, tilted })
            } else {
                // E A^κ log_+ A = ∞: only reachable through a generator tail
                let g = tilted.generator().expect("finite-support law has finite log moment");
                let alpha = g.alpha;
                let h = law.span();
                // F̄_κ(x) ~ (coeff/α)·(x/h)^{-α}: constant slowly-varying part
                let ell = SlowlyVaryingHint::Constant(g.coeff / alpha * h.powf(alpha));
                Ok(CramerInfo {
                    kappa,
                    mu: f64::INFINITY,
                    regime: Regime::InfiniteMeanRegVar { alpha, ell },
                    tilted,
                })
            }
        }
        KappaSolution::Defective { kappa, theta } => {
            let tilted = tilt(law, kappa)?;
            let lm = tilted.log_moment_lattice();
            let mu = if lm.is_finite() { theta * lm } else { f64::INFINITY };
            Ok(CramerInfo { kappa, mu, regime: Regime::Defective { theta }, tilted })
        }
    }
}

/// Truncated expectation `m(x) = ∫_0^x F̄_κ(y) dy`, computed exactly as a
/// piecewise-constant integral over lattice cells.
pub fn truncated_mean(f_kappa: &ArithmeticLaw, x: f64) -> f64 {
    assert!(x >= 0.0);
    let h = f_kappa.span();
    let k = (x / h).floor() as i64;
    let mut m = 0.0;
    for j in 1..=k {
        m += h * f_kappa.tail_ge(j);
    }
    let rem = x - k as f64 * h;
    if rem > 0.0 {
        m += rem * f_kappa.tail_ge(k + 1);
    }
    m
}

/// `m(n·h)` for n = 0..=n_hi, computed incrementally.
pub fn truncated_mean_grid(f_kappa: &ArithmeticLaw, n_hi: i64) -> Vec<f64> {
    let h = f_kappa.span();
    let mut out = Vec::with_capacity(n_hi as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..=n_hi {
        acc += h * f_kappa.tail_ge(j);
        out.push(acc);
    }
    out
}

/// One evaluated cell of the SRT condition diagnostic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DoneyCell {
    pub delta: f64,
    pub n: i64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct DoneyReport {
    pub cells: Vec<DoneyCell>,
    /// per delta (sorted as given): max of the value over the top half of the x grid
    pub limsup_estimate: Vec<(f64, f64)>,
    /// whether the limsup estimates decrease as delta decreases
    pub decreasing_in_delta: bool,
}

/// Numeric evaluation of the α ≤ 1/2 strong-renewal condition
/// `x F̄(x) Σ_{1≤y≤δx} p(x−y) / (y F̄(y)²)` on a grid. Trend report only.
///
/// Refuses α > 1/2, where the condition holds automatically.
pub fn doney_diagnostic(
    f_kappa: &ArithmeticLaw,
    alpha: f64,
    x_grid: &[i64],
    deltas: &[f64],
) -> Result<DoneyReport, CramerError> {
    if alpha > 0.5 {
        return Err(CramerError::WrongRegime);
    }
    let h = f_kappa.span();
    let j_lo = ((1.0 / h).ceil() as i64).max(1);
    let mut cells = Vec::new();
    let mut limsup = Vec::new();
    for &delta in deltas {
        for &n in x_grid {
            let tail_x = f_kappa.tail_ge(n + 1);
            if tail_x == 0.0 {
                continue; // excluded grid point
            }
            let j_hi = ((delta * n as f64 * h) / h).floor() as i64;
            let mut sum = 0.0;
            for j in j_lo..=j_hi {
                let ty = f_kappa.tail_ge(j + 1);
                if ty > 0.0 {
                    sum += f_kappa.mass(n - j) / (j as f64 * h * ty * ty);
                }
            }
            cells.push(DoneyCell { delta, n, value: n as f64 * h * tail_x * sum });
        }
        let half = x_grid.len() / 2;
        let est = cells
            .iter()
            .filter(|c| c.delta == delta && x_grid[half..].contains(&c.n))
            .map(|c| c.value)
            .fold(0.0f64, f64::max);
        limsup.push((delta, est));
    }
    let mut sorted = limsup.clone();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let decreasing = sorted.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    Ok(DoneyReport { cells, limsup_estimate: limsup, decreasing_in_delta: decreasing })
}
