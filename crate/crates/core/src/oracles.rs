//! Exact closed-form ground truth: the St. Petersburg pair and the
//! target-profile constructor.
//!
//! The St. Petersburg distribution `P{X = 2^k} = 2^{-k}` solves the
//! perpetuity with the pair `P{A=0, B=2^k} = 2^{-2k}`,
//! `P{A=2^ℓ, B=0} = 2^{-(2ℓ+1)}`, giving the canonical non-constant
//! profile `q(x) = 2^{frac(log2 x)}`.
//!
//! The constructor generalizes this: given any right-continuous profile
//! `q ≥ 0` on [1, 2) with `q(y)/y` nonincreasing, it produces an
//! `A·B = 0` pair whose solution has tail
//! `P{X > x} = x^{-1}·C·2^{frac(log2 x)}·(2 − H(2^{frac(log2 x)}))`
//! with `H(y) = 2 − (2/q(2−))·q(y)/y` and `p = 1 − (2 − q(2−))^{-1}`.
//! Profiles with `q(2−) ∉ (0,1)` are first brought into range by the
//! dyadic rescale `q ↦ q/2^m` (scaling B by `2^m`); an extra scale `c`
//! maps the pair to `(A, cB)` and the profile to `c·q(x/c)`.

use crate::law::{ArithmeticLaw, BDist, HDf, HSeg, JointAbLaw, LawError};
use crate::special::exp2i;
use crate::tail::{ExactTail, QsetTail, TailFunction};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid profile: {0}")]
    InvalidQ(String),
    #[error("unsupported (kappa, span): construction needs kappa*span = log 2, got {product}")]
    UnsupportedKappaSpan { product: f64 },
    #[error(transparent)]
    Law(#[from] LawError),
}

/// The exact St. Petersburg pair `(A, B)`.
pub fn st_petersburg_pair() -> JointAbLaw {
    // P{A=0} = Σ 2^{-2k} = 1/3; A | A≠0 is 2^ℓ with mass (3/4)·4^{-ℓ};
    // B | A=0 is 2^k with mass 3·4^{-k}, k ≥ 1.
    let atoms: Vec<(i64, f64)> = (0..=52).map(|l| (l, 0.75 * 0.25f64.powi(l as i32))).collect();
    let a_given_pos = ArithmeticLaw::from_atoms(LN_2, atoms, 0.0)
        .expect("geometric prefix sums to 1 within tolerance");
    JointAbLaw::Ab0 {
        p_zero: 1.0 / 3.0,
        b_given_zero: BDist::Pow2Geometric { k0: 1, ratio: 0.25 },
        a_given_pos,
    }
}

/// Exact St. Petersburg tail `P{X > x}`.
pub fn st_petersburg_tail(x: f64) -> f64 {
    ExactTail::StPetersburg.value(x)
}

/// `P{AX + B = 2^k}` when X is St. Petersburg and (A, B) the exact pair.
///
/// The fixed-point property makes this 2^{-k} for every k ≥ 1.
pub fn st_petersburg_pushforward_pmf(k: i32) -> f64 {
    assert!(k >= 1);
    let mut total = exp2i(-2 * k); // P{A = 0, B = 2^k}
    for l in 0..k {
        // P{A = 2^l, B = 0} · P{X = 2^{k-l}}
        total += exp2i(-(2 * l + 1)) * exp2i(-(k - l));
    }
    total
}

/// pmf of the pre-stopping walk position `S_{N-1}` in the A·B = 0
/// representation `X = A_1…A_{N-1} B_N` (parameter p of the pair family).
pub fn sn_pmf(p: f64, k: u32) -> f64 {
    assert!(p > 0.0 && p < 0.5);
    if k == 0 {
        1.0 / (2.0 * (1.0 - p))
    } else {
        (1.0 - 2.0 * p) / (2.0 * (1.0 - p)) * exp2i(-(k as i32))
    }
}

/// Exact tail of the constructed pair with parameters `(p, H)`.
pub fn qset_exact_tail(p: f64, hdf: &HDf, x: f64) -> f64 {
    QsetTail { p, hdf: hdf.clone() }.value(x)
}

/// A target profile on [1, 2): piecewise linear segments with jumps at the
/// knots, evaluated right-continuously.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QSegment {
    pub z_lo: f64,
    pub z_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

impl QSegment {
    fn slope(&self) -> f64 {
        (self.q_hi - self.q_lo) / (self.z_hi - self.z_lo)
    }

    fn at(&self, z: f64) -> f64 {
        self.q_lo + self.slope() * (z - self.z_lo)
    }
}

/// Right-continuous profile descriptor with `q(y)/y` nonincreasing.
///
/// `kappa` and `span_h` are native (1, log 2) for the direct construction;
/// pairs with `kappa·span_h = log 2` are reached by the deterministic
/// power reparametrization `X ↦ X^{1/kappa}` applied to inputs and
/// outputs. `scale_c` applies the `(A, cB)` extension on top.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QTarget {
    pub kappa: f64,
    pub span_h: f64,
    pub segments: Vec<QSegment>,
    pub scale_c: f64,
}

impl QTarget {
    pub fn native(segments: Vec<QSegment>) -> Self {
        QTarget { kappa: 1.0, span_h: LN_2, segments, scale_c: 1.0 }
    }

    /// Constant profile `q ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self::native(vec![QSegment { z_lo: 1.0, z_hi: 2.0, q_lo: c, q_hi: c }])
    }

    /// The St. Petersburg shape `q(y) = y`.
    pub fn st_petersburg_shape() -> Self {
        Self::native(vec![QSegment { z_lo: 1.0, z_hi: 2.0, q_lo: 1.0, q_hi: 2.0 }])
    }

    /// Random profile compatible with the monotonicity constraints:
    /// alternating proportional (`q = r·y`) and flat pieces with mild
    /// downward jumps, retried until the period-seam constraint holds.
    pub fn random_monotone(seed: u64, knots: usize) -> Self {
        assert!(knots >= 2);
        use rand::{Rng, SeedableRng};
        for attempt in 0..200u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (attempt << 32));
            let mut zs: Vec<f64> = (0..=knots)
                .map(|i| exp2i(0) * 2f64.powf(i as f64 / knots as f64))
                .collect();
            zs[0] = 1.0;
            *zs.last_mut().unwrap() = 2.0;
            let mut segs = Vec::with_capacity(knots);
            let mut q = rng.gen_range(0.5..0.9);
            for i in 0..knots {
                let (z_lo, z_hi) = (zs[i], zs[i + 1]);
                // occasional downward jump at the knot
                if i > 0 && rng.gen_bool(0.4) {
                    q *= rng.gen_range(0.96..1.0);
                }
                let (q_lo, q_hi) = if rng.gen_bool(0.6) {
                    (q, q * z_hi / z_lo) // proportional: q/y constant
                } else {
                    (q, q) // flat: q/y strictly decreasing
                };
                segs.push(QSegment { z_lo, z_hi, q_lo, q_hi });
                q = q_hi;
            }
            let t = Self::native(segs);
            if t.validate().is_ok() {
                return t;
            }
        }
        panic!("random_monotone failed to produce a valid profile for seed {seed}");
    }

    /// Right-continuous evaluation on [1, 2).
    pub fn value(&self, z: f64) -> f64 {
        assert!((1.0..2.0).contains(&z), "profile is stored on [1,2), got {z}");
        for s in &self.segments {
            if z >= s.z_lo && z < s.z_hi {
                return s.at(z);
            }
        }
        // z == z_hi of the last segment cannot happen (z < 2)
        self.segments.last().map(|s| s.at(z)).unwrap_or(0.0)
    }

    /// Left limit at 2.
    pub fn q_two_minus(&self) -> f64 {
        self.segments.last().map(|s| s.q_hi).unwrap_or(0.0)
    }

    /// Class membership on the representation: q ≥ 0, q ≢ 0, `q(y)/y`
    /// nonincreasing within pieces and across knots, and across the
    /// period seam.
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.segments.is_empty() {
            return Err(OracleError::InvalidQ("no segments".into()));
        }
        if (self.segments[0].z_lo - 1.0).abs() > 1e-12 {
            return Err(OracleError::InvalidQ("segments must start at 1".into()));
        }
        if (self.segments.last().unwrap().z_hi - 2.0).abs() > 1e-12 {
            return Err(OracleError::InvalidQ("segments must end at 2".into()));
        }
        let mut prev_hi = 1.0;
        let mut prev_r = f64::INFINITY;
        let mut all_zero = true;
        for s in &self.segments {
            if (s.z_lo - prev_hi).abs() > 1e-12 || s.z_hi <= s.z_lo {
                return Err(OracleError::InvalidQ("segments must be contiguous".into()));
            }
            if s.q_lo < 0.0 || s.q_hi < 0.0 {
                return Err(OracleError::InvalidQ("q must be nonnegative".into()));
            }
            if s.q_lo > 0.0 || s.q_hi > 0.0 {
                all_zero = false;
            }
            // within a piece, (q/y)' ≤ 0 iff slope ≤ q(y)/y holds at entry
            let r_in = s.q_lo / s.z_lo;
            if s.slope() > r_in + 1e-12 {
                return Err(OracleError::InvalidQ(format!(
                    "q(y)/y increases inside [{}, {})",
                    s.z_lo, s.z_hi
                )));
            }
            if r_in > prev_r + 1e-12 {
                return Err(OracleError::InvalidQ(format!(
                    "q(y)/y jumps up at knot {}",
                    s.z_lo
                )));
            }
            prev_r = s.q_hi / s.z_hi;
            prev_hi = s.z_hi;
        }
        if all_zero {
            return Err(OracleError::InvalidQ("q must not vanish identically".into()));
        }
        // period seam: r(2+) = q(1)/2 must not exceed r(2−) = q(2−)/2
        if self.segments[0].q_lo > self.q_two_minus() + 1e-12 {
            return Err(OracleError::InvalidQ("q(1) must not exceed q(2−)".into()));
        }
        Ok(())
    }
}

/// A constructed pair realizing a target profile, with its exact tail.
#[derive(Debug, Clone)]
pub struct QsetPair {
    pub pair: JointAbLaw,
    pub tail: TailFunction,
    pub p: f64,
    pub hdf: HDf,
    /// dyadic shift m applied so the rescaled profile has q(2−) in (0,1)
    pub dyadic_shift: i32,
    /// the full B scale: scale_c · 2^m
    pub scale_total: f64,
    target: QTarget,
}

impl QsetPair {
    /// The profile the constructed pair's tail must reproduce at
    /// continuity points: `c·q(x/c)` wrapped into the period.
    pub fn expected_profile(&self, x: f64) -> f64 {
        let c = self.target.scale_c;
        let native_x = if (self.target.kappa - 1.0).abs() < 1e-12 {
            x / c
        } else {
            (x / c).powf(self.target.kappa)
        };
        let (z, _) = crate::special::frexp2(native_x);
        c * self.target.value(z)
    }

    /// First depth n at which the normalized tail is exactly periodic.
    pub fn min_depth(&self) -> i64 {
        self.dyadic_shift as i64 + 1
    }
}

/// Build the pair `(A, B)` whose fixed-point solution has the prescribed
/// tail profile, together with the exact tail.
pub fn qset_construct(target: &QTarget) -> Result<QsetPair, OracleError> {
    target.validate()?;
    if target.scale_c <= 0.0 {
        return Err(OracleError::InvalidQ("scale_c must be positive".into()));
    }
    let product = target.kappa * target.span_h;
    if (product - LN_2).abs() > 1e-12 {
        return Err(OracleError::UnsupportedKappaSpan { product });
    }
    let native = (target.kappa - 1.0).abs() < 1e-12;

    let q2 = target.q_two_minus();
    if q2 <= 0.0 {
        return Err(OracleError::InvalidQ("q(2−) must be positive".into()));
    }
    // dyadic rescale puts q(2−)/2^m into [1/2, 1), which caps the pair
    // parameter at p ≤ 1/3 and keeps every series geometric in 2p ≤ 2/3
    let m = q2.log2().floor() as i32 + 1;
    let qt = q2 / exp2i(m);
    let p = 1.0 - 1.0 / (2.0 - qt);
    let c_h = 2.0 / qt;
    let pow_m = exp2i(m);

    // H(y) = 2 − c_h·(q(y)/2^m)/y, piecewise a + b/y
    let segs: Vec<HSeg> = target
        .segments
        .iter()
        .map(|s| {
            let slope = s.slope() / pow_m;
            let q_lo = s.q_lo / pow_m;
            HSeg {
                z_lo: s.z_lo,
                z_hi: s.z_hi,
                a: 2.0 - c_h * slope,
                b: -c_h * (q_lo - slope * s.z_lo),
            }
        })
        .collect();
    let hdf = HDf { segs, scale: target.scale_c * pow_m };
    hdf.validate()?;

    // conditional law of log A: P{A = 2^ℓ | A ≠ 0} = (1−p)·p^ℓ. The
    // realization depth is driven by the 2^ℓ-weighted series (E A deficit
    // decays like (2p)^depth), not by the raw mass
    let depth = (16.0 * 10f64.ln() / (1.0 / (2.0 * p)).ln()).ceil() as i64;
    let atoms: Vec<(i64, f64)> = (0..=depth).map(|l| (l, (1.0 - p) * p.powi(l as i32))).collect();
    let a_given_pos = ArithmeticLaw::from_atoms(LN_2, atoms, 0.0)?;
    let b_native = BDist::HSegments(hdf.clone());
    let (a_law, b_dist, tail) = if native {
        (
            a_given_pos,
            b_native,
            ExactTail::Qset(QsetTail { p, hdf: hdf.clone() }),
        )
    } else {
        // power reparametrization X ↦ X^{1/κ}: same lattice indices on the
        // target span, B and the tail mapped through the same power
        let g = 1.0 / target.kappa;
        let atoms: Vec<(i64, f64)> = a_given_pos.atoms().collect();
        (
            ArithmeticLaw::from_atoms(target.span_h, atoms, 0.0)?,
            BDist::PowerOf { inner: Box::new(b_native), exponent: g },
            ExactTail::PowerMapped {
                inner: Box::new(ExactTail::Qset(QsetTail { p, hdf: hdf.clone() })),
                g,
            },
        )
    };
    let pair = JointAbLaw::Ab0 {
        p_zero: p / (1.0 - p),
        b_given_zero: b_dist,
        a_given_pos: a_law,
    };
    pair.validate()?;
    Ok(QsetPair {
        pair,
        tail: TailFunction::Exact(tail),
        p,
        hdf,
        dyadic_shift: m,
        scale_total: target.scale_c * pow_m,
        target: target.clone(),
    })
}
