//! Tail functions `T(x) = P{X > x}`: exact closed forms and empirical tails.
//!
//! Exact tails are evaluated through the bit-exact dyadic split
//! [`crate::special::frexp2`], so log-periodic oracles like the
//! St. Petersburg tail carry no rounding at all. Each exact tail also
//! exposes the breakpoints of `y ↦ T(e^y)` (jumps and kinks), which the
//! smoothing quadrature uses to integrate piecewise-smooth stretches
//! exactly.

use crate::law::HDf;
use crate::special::{exp2i, frexp2};
use serde::Serialize;
use std::f64::consts::LN_2;

/// Exact tail of the target-profile construction: the pair parameters
/// `p` and the df `H` (with its scale) determine `P{X > x}` in closed form.
#[derive(Debug, Clone, Serialize)]
pub struct QsetTail {
    pub p: f64,
    pub hdf: HDf,
}

impl QsetTail {
    /// P{X > x} for `X = scale · 2^S · B̃`, `B̃ ~ H` on [1, 2).
    ///
    /// Splitting `x/scale = z·2^n` exactly, the walk/df decomposition is
    /// `P{S ≥ n+1} + P{S = n}·(1 − H(z))`; for n ≥ 1 this collapses to the
    /// log-periodic closed form `C·2^{-n}·(2 − H(z))`.
    pub fn value(&self, x: f64) -> f64 {
        let p = self.p;
        let xp = x / self.hdf.scale;
        if xp < 1.0 {
            return 1.0;
        }
        let (z, n) = frexp2(xp);
        let c = (1.0 - 2.0 * p) / (2.0 * (1.0 - p));
        if n == 0 {
            c + (1.0 - self.hdf.value(z)) / (2.0 * (1.0 - p))
        } else {
            c * exp2i(-n) * (2.0 - self.hdf.value(z))
        }
    }
}

/// Closed-form tail oracles.
#[derive(Debug, Clone, Serialize)]
pub enum ExactTail {
    /// P{X = 2^k} = 2^{-k}: T(x) = 2^{-n} on [2^n, 2^{n+1}), 1 below 2.
    StPetersburg,
    Qset(QsetTail),
    /// P{X > x} = (x/x_min)^{-index} above x_min, 1 below.
    Pareto { index: f64, x_min: f64 },
    /// Tail of c·X: T(x) = inner(x/c).
    Scaled { inner: Box<ExactTail>, c: f64 },
    /// Tail of X^g: T(x) = inner(x^{1/g}).
    PowerMapped { inner: Box<ExactTail>, g: f64 },
}

impl ExactTail {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            ExactTail::StPetersburg => {
                if x < 2.0 {
                    1.0
                } else {
                    let (_, n) = frexp2(x);
                    exp2i(-n)
                }
            }
            ExactTail::Qset(q) => q.value(x),
            ExactTail::Pareto { index, x_min } => {
                if x <= *x_min {
                    1.0
                } else {
                    (x / x_min).powf(-index)
                }
            }
            ExactTail::Scaled { inner, c } => inner.value(x / c),
            ExactTail::PowerMapped { inner, g } => {
                if x <= 0.0 {
                    1.0
                } else {
                    inner.value(x.powf(1.0 / g))
                }
            }
        }
    }

    /// Breakpoints of `y ↦ T(e^y)` inside `[y_lo, y_hi]`.
    pub fn breakpoints(&self, y_lo: f64, y_hi: f64, out: &mut Vec<f64>) {
        match self {
            ExactTail::StPetersburg => periodic_points(&[0.0], LN_2, y_lo, y_hi, out),
            ExactTail::Qset(q) => {
                let mut knots: Vec<f64> = q.hdf.segs.iter().map(|s| s.z_lo.ln()).collect();
                knots.push(LN_2); // z = 2 seam
                let shift = q.hdf.scale.ln();
                let shifted: Vec<f64> = knots.iter().map(|k| k + shift).collect();
                periodic_points(&shifted, LN_2, y_lo, y_hi, out);
            }
            ExactTail::Pareto { x_min, .. } => {
                let y = x_min.ln();
                if (y_lo..=y_hi).contains(&y) {
                    out.push(y);
                }
            }
            ExactTail::Scaled { inner, c } => {
                let mut tmp = Vec::new();
                inner.breakpoints(y_lo - c.ln(), y_hi - c.ln(), &mut tmp);
                out.extend(tmp.into_iter().map(|y| y + c.ln()));
            }
            ExactTail::PowerMapped { inner, g } => {
                let mut tmp = Vec::new();
                inner.breakpoints(y_lo / g, y_hi / g, &mut tmp);
                out.extend(tmp.into_iter().map(|y| y * g));
            }
        }
    }
}

/// All points `b + k·period` (b in `offsets`) within `[y_lo, y_hi]`.
fn periodic_points(offsets: &[f64], period: f64, y_lo: f64, y_hi: f64, out: &mut Vec<f64>) {
    for &b in offsets {
        let k_lo = ((y_lo - b) / period).floor() as i64;
        let k_hi = ((y_hi - b) / period).ceil() as i64;
        for k in k_lo..=k_hi {
            let y = b + k as f64 * period;
            if (y_lo..=y_hi).contains(&y) {
                out.push(y);
            }
        }
    }
}

/// Sorted-sample empirical tail.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalTail {
    sorted: Vec<f64>,
}

impl EmpiricalTail {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
        EmpiricalTail { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Number of samples strictly above x.
    pub fn exceedances(&self, x: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&s| s <= x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.exceedances(x) as f64 / self.sorted.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }
}

/// Unified tail interface: either a closed form or sorted samples.
#[derive(Debug, Clone, Serialize)]
pub enum TailFunction {
    Exact(ExactTail),
    Empirical(EmpiricalTail),
}

impl TailFunction {
    pub fn st_petersburg() -> Self {
        TailFunction::Exact(ExactTail::StPetersburg)
    }

    pub fn from_samples(samples: Vec<f64>) -> Self {
        TailFunction::Empirical(EmpiricalTail::from_samples(samples))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            TailFunction::Exact(t) => t.value(x),
            TailFunction::Empirical(t) => t.value(x),
        }
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self, TailFunction::Empirical(_))
    }

    pub fn sample_count(&self) -> Option<usize> {
        match self {
            TailFunction::Empirical(t) => Some(t.len()),
            TailFunction::Exact(_) => None,
        }
    }

    /// Exceedance count at x for empirical tails; None for exact ones.
    pub fn exceedances(&self, x: f64) -> Option<usize> {
        match self {
            TailFunction::Empirical(t) => Some(t.exceedances(x)),
            TailFunction::Exact(_) => None,
        }
    }
}
