//! Arithmetic probability laws on a lattice `hZ` and joint (A, B) pairs.
//!
//! A law here is the distribution of `log A` restricted to the lattice
//! `{k·h : k ∈ Z}`, plus an explicit atom for the event `A = 0` (which has
//! no finite logarithm and is annihilated by exponential tilting). Lattice
//! indices are exact integers throughout; only masses are floating point,
//! so the span can never drift.
//!
//! Laws with infinite right support (masses `coeff·e^{-damp·k}·k^{-(1+α)}`)
//! are carried as a [`Generator`] plus a cached prefix. Tail sums and
//! moments of generator laws are evaluated from the closed form (Hurwitz
//! zeta / certified geometric remainders), never by truncation.

use crate::conv;
use crate::special;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use thiserror::Error;

/// Mass-balance tolerance: a law's masses must total 1 within this.
pub const MASS_TOL: f64 = 1e-12;
/// Commensurability tolerance for span detection.
pub const SPAN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LawError {
    #[error("masses total {total}, expected 1 within {MASS_TOL}")]
    MassNotNormalized { total: f64 },
    #[error("negative mass {mass} at lattice index {k}")]
    NegativeMass { k: i64, mass: f64 },
    #[error("span must be positive, got {0}")]
    BadSpan(f64),
    #[error("support values are not commensurable within {SPAN_TOL}")]
    NoCommonSpan,
    #[error("span mismatch: {a} vs {b}")]
    SpanMismatch { a: f64, b: f64 },
    #[error("operation requires zero_atom = 0, law has {0}")]
    ZeroAtomPresent(f64),
    #[error("operation requires bounded support")]
    UnboundedSupport,
    #[error("zero mass at lattice index {n} inside the scanned range")]
    ZeroMassTail { n: i64 },
    #[error("invalid pair: {0}")]
    BadPair(String),
}

/// Closed-form mass family `p_k = coeff · e^{-damp·k} · k^{-(1+alpha)}`, k ≥ k_min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub alpha: f64,
    pub damp: f64,
    pub coeff: f64,
    pub k_min: i64,
}

impl Generator {
    /// Mass family normalized to total `mass` with no damping.
    pub fn power_law(alpha: f64, k_min: i64, mass: f64) -> Self {
        let z = special::hurwitz_zeta(1.0 + alpha, k_min as f64);
        Generator { alpha, damp: 0.0, coeff: mass / z, k_min }
    }

    pub fn mass(&self, k: i64) -> f64 {
        if k < self.k_min {
            return 0.0;
        }
        let kf = k as f64;
        self.coeff * (-self.damp * kf).exp() * kf.powf(-(1.0 + self.alpha))
    }

    /// Σ_{j ≥ k} p_j · j^w, exact up to ~1e-15 relative.
    ///
    /// Returns +∞ when the sum diverges (undamped with w ≥ alpha).
    pub fn tail_weighted(&self, k: i64, w: i32) -> f64 {
        let k = k.max(self.k_min);
        if self.damp > 0.0 {
            self.coeff * special::damped_power_sum(self.alpha, self.damp, k, w)
        } else {
            let s = 1.0 + self.alpha - w as f64;
            if s > 1.0 {
                self.coeff * special::hurwitz_zeta(s, k as f64)
            } else {
                f64::INFINITY
            }
        }
    }

    pub fn total(&self) -> f64 {
        self.tail_weighted(self.k_min, 0)
    }
}

/// Probability law of `log A` on `hZ`, with an explicit atom at `A = 0`.
#[derive(Debug, Clone)]
pub struct ArithmeticLaw {
    span_h: f64,
    zero_atom: f64,
    atoms: BTreeMap<i64, f64>,
    generator: Option<Generator>,
}

/// Size of the prefix cache realized for generator-backed laws.
const PREFIX_CACHE: i64 = 256;

impl ArithmeticLaw {
    /// Finite law from explicit atoms. Drops zero masses and reduces the
    /// index gcd so the stored span is maximal.
    pub fn from_atoms<I>(span_h: f64, atoms: I, zero_atom: f64) -> Result<Self, LawError>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        let law = Self::from_atoms_raw(span_h, atoms, zero_atom)?;
        Ok(law.gcd_reduced())
    }

    /// Finite law on the caller's lattice, without gcd reduction.
    ///
    /// Convolution and tilting keep indices on the input lattice, so they
    /// construct through this.
    pub(crate) fn from_atoms_raw<I>(span_h: f64, atoms: I, zero_atom: f64) -> Result<Self, LawError>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        if span_h <= 0.0 || !span_h.is_finite() {
            return Err(LawError::BadSpan(span_h));
        }
        let mut map = BTreeMap::new();
        for (k, m) in atoms {
            if m < 0.0 {
                // FFT round-off can leave ~1e-16 negatives; anything larger is a bug
                if m < -1e-13 {
                    return Err(LawError::NegativeMass { k, mass: m });
                }
                continue;
            }
            if m > 0.0 {
                *map.entry(k).or_insert(0.0) += m;
            }
        }
        if zero_atom < 0.0 {
            return Err(LawError::NegativeMass { k: i64::MIN, mass: zero_atom });
        }
        let total: f64 = zero_atom + map.values().sum::<f64>();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(LawError::MassNotNormalized { total });
        }
        Ok(ArithmeticLaw { span_h, zero_atom, atoms: map, generator: None })
    }

    /// Law backed by a closed-form generator (infinite right support).
    pub fn from_generator(span_h: f64, gen: Generator, zero_atom: f64) -> Result<Self, LawError> {
        if span_h <= 0.0 || !span_h.is_finite() {
            return Err(LawError::BadSpan(span_h));
        }
        if gen.k_min < 1 {
            return Err(LawError::BadPair("generator requires k_min >= 1".into()));
        }
        let total = zero_atom + gen.total();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(LawError::MassNotNormalized { total });
        }
        let mut atoms = BTreeMap::new();
        for k in gen.k_min..gen.k_min + PREFIX_CACHE {
            atoms.insert(k, gen.mass(k));
        }
        Ok(ArithmeticLaw { span_h, zero_atom, atoms, generator: Some(gen) })
    }

    /// Point mass at `k·h`.
    pub fn point(span_h: f64, k: i64) -> Self {
        ArithmeticLaw {
            span_h,
            zero_atom: 0.0,
            atoms: BTreeMap::from([(k, 1.0)]),
            generator: None,
        }
    }

    fn gcd_reduced(mut self) -> Self {
        let g = self
            .atoms
            .keys()
            .filter(|&&k| k != 0)
            .fold(0i64, |acc, &k| gcd(acc, k.unsigned_abs() as i64));
        if g >= 2 {
            self.atoms = self.atoms.into_iter().map(|(k, m)| (k / g, m)).collect();
            self.span_h *= g as f64;
        }
        self
    }

    pub fn span(&self) -> f64 {
        self.span_h
    }

    pub fn zero_atom(&self) -> f64 {
        self.zero_atom
    }

    pub fn generator(&self) -> Option<&Generator> {
        self.generator.as_ref()
    }

    pub fn is_unbounded(&self) -> bool {
        self.generator.is_some()
    }

    /// Iterate the realized atoms (for generator laws: the cached prefix).
    pub fn atoms(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.atoms.iter().map(|(&k, &m)| (k, m))
    }

    pub fn mass(&self, k: i64) -> f64 {
        match &self.generator {
            Some(g) => g.mass(k),
            None => self.atoms.get(&k).copied().unwrap_or(0.0),
        }
    }

    pub fn support_min(&self) -> Option<i64> {
        match &self.generator {
            Some(g) => Some(g.k_min),
            None => self.atoms.keys().next().copied(),
        }
    }

    /// None for unbounded (generator-backed) laws.
    pub fn support_max(&self) -> Option<i64> {
        match &self.generator {
            Some(_) => None,
            None => self.atoms.keys().next_back().copied(),
        }
    }

    /// Masses at indices `lo..=hi` as a dense vector.
    pub fn dense(&self, lo: i64, hi: i64) -> Vec<f64> {
        assert!(hi >= lo);
        match &self.generator {
            Some(g) => (lo..=hi).map(|k| g.mass(k)).collect(),
            None => {
                let mut v = vec![0.0; (hi - lo + 1) as usize];
                for (&k, &m) in self.atoms.range(lo..=hi) {
                    v[(k - lo) as usize] = m;
                }
                v
            }
        }
    }

    /// P{Y ≥ k·h} over the lattice part (zero atom excluded).
    pub fn tail_ge(&self, k: i64) -> f64 {
        match &self.generator {
            Some(g) => g.tail_weighted(k, 0),
            None => self.atoms.range(k..).map(|(_, &m)| m).sum(),
        }
    }

    /// P{Y ≤ k·h} over the lattice part (zero atom excluded).
    pub fn cum_le(&self, k: i64) -> f64 {
        match &self.generator {
            Some(g) => {
                if k < g.k_min {
                    0.0
                } else {
                    g.total() - g.tail_weighted(k + 1, 0)
                }
            }
            None => self.atoms.range(..=k).map(|(_, &m)| m).sum(),
        }
    }

    pub fn lattice_mass(&self) -> f64 {
        match &self.generator {
            Some(g) => g.total(),
            None => self.atoms.values().sum(),
        }
    }

    /// Σ_k p_k · (k·h): the log-moment over the lattice part.
    ///
    /// +∞ when the undamped tail is too heavy.
    pub fn log_moment_lattice(&self) -> f64 {
        match &self.generator {
            Some(g) => {
                let t = g.tail_weighted(g.k_min, 1);
                if t.is_infinite() {
                    f64::INFINITY
                } else {
                    t * self.span_h
                }
            }
            None => self.atoms.iter().map(|(&k, &m)| m * k as f64 * self.span_h).sum(),
        }
    }

    /// E log A. −∞ as soon as the law puts mass on `A = 0`.
    pub fn drift_log(&self) -> f64 {
        if self.zero_atom > 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_moment_lattice()
        }
    }

    /// E A^s = Σ_k p_k e^{s·k·h}, with `E A^0 = 1` by convention.
    ///
    /// Returns +∞ when the series diverges; divergence is a value here,
    /// not an error. Within 1e-9 of the abscissa of convergence the value
    /// is evaluated at the abscissa itself (the series boundary).
    pub fn mellin_moment(&self, s: f64) -> f64 {
        assert!(s >= 0.0, "mellin_moment requires s >= 0");
        if s == 0.0 {
            return 1.0;
        }
        match &self.generator {
            Some(g) => {
                let eff = g.damp - s * self.span_h;
                if eff > SPAN_TOL {
                    g.coeff * special::damped_power_sum(g.alpha, eff, g.k_min, 0)
                } else if eff > -SPAN_TOL {
                    // boundary: Σ coeff·k^{-(1+alpha)}
                    g.coeff * special::hurwitz_zeta(1.0 + g.alpha, g.k_min as f64)
                } else {
                    f64::INFINITY
                }
            }
            None => self
                .atoms
                .iter()
                .map(|(&k, &m)| m * (s * k as f64 * self.span_h).exp())
                .sum(),
        }
    }

    /// Whether Σ_k p_k e^{s·k·h} converges, probed from the mass-ratio of
    /// the far tail rather than taken from the parameters.
    pub fn mellin_is_finite(&self, s: f64) -> bool {
        match &self.generator {
            None => true,
            Some(g) => {
                // log ratio of consecutive weighted masses at a huge index
                let k = 1e12;
                let lr = s * self.span_h - g.damp - (1.0 + g.alpha) * (1.0 / k);
                lr < 0.0
            }
        }
    }

}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Largest `h` such that every support value lies on `hZ`.
///
/// Values at 0 impose no constraint. Euclid on the reals followed by a
/// least-squares refit through the rounded integer indices; rejects
/// inputs whose residuals exceed [`SPAN_TOL`].
pub fn detect_span(support: &[f64]) -> Result<f64, LawError> {
    let vals: Vec<f64> = support.iter().map(|v| v.abs()).filter(|&v| v > SPAN_TOL).collect();
    if vals.is_empty() {
        return Err(LawError::NoCommonSpan);
    }
    let mut g = vals[0];
    for &v in &vals[1..] {
        let (mut a, mut b) = (g.max(v), g.min(v));
        while b > SPAN_TOL {
            let r = a - (a / b).round() * b;
            a = b;
            b = r.abs();
        }
        g = a;
        if g < SPAN_TOL {
            return Err(LawError::NoCommonSpan);
        }
    }
    // refine: least squares fit of v_i ≈ k_i·g through the origin
    let ks: Vec<f64> = vals.iter().map(|v| (v / g).round()).collect();
    let num: f64 = ks.iter().zip(&vals).map(|(k, v)| k * v).sum();
    let den: f64 = ks.iter().map(|k| k * k).sum();
    if den == 0.0 {
        return Err(LawError::NoCommonSpan);
    }
    let mut h = num / den;
    // the rounded indices may share a common factor
    let gi = ks.iter().fold(0i64, |acc, &k| gcd(acc, k as i64));
    if gi >= 2 {
        h *= gi as f64;
    }
    for &v in &vals {
        let k = (v / h).round();
        if (v - k * h).abs() > SPAN_TOL {
            return Err(LawError::NoCommonSpan);
        }
    }
    Ok(h)
}

/// Lattice convolution `(f∗g)[n] = Σ_k f[k]·g[n−k]`.
///
/// Both laws must share the span and have no zero atom; indices stay on
/// the input lattice. Direct kernel below 4096 output points,
/// transform-based above; mass is conserved to 1e-12 either way.
pub fn convolve(f: &ArithmeticLaw, g: &ArithmeticLaw) -> Result<ArithmeticLaw, LawError> {
    if (f.span() - g.span()).abs() > 1e-12 * f.span().max(g.span()) {
        return Err(LawError::SpanMismatch { a: f.span(), b: g.span() });
    }
    if f.zero_atom() > 1e-15 {
        return Err(LawError::ZeroAtomPresent(f.zero_atom()));
    }
    if g.zero_atom() > 1e-15 {
        return Err(LawError::ZeroAtomPresent(g.zero_atom()));
    }
    let (flo, fhi) = match (f.support_min(), f.support_max()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(LawError::UnboundedSupport),
    };
    let (glo, ghi) = match (g.support_min(), g.support_max()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(LawError::UnboundedSupport),
    };
    let fa = f.dense(flo, fhi);
    let ga = g.dense(glo, ghi);
    let out = conv::dense_auto(&fa, &ga);
    ArithmeticLaw::from_atoms_raw(
        f.span(),
        out.iter().enumerate().map(|(i, &m)| (flo + glo + i as i64, m)),
        0.0,
    )
}

/// One row of the subexponentiality diagnostic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubexpRow {
    pub n: i64,
    /// p_{n+1} / p_n
    pub ratio_step: f64,
    /// p^{∗2}_n / (2 p_n)
    pub ratio_conv: f64,
}

#[derive(Debug, Clone)]
pub struct SubexpReport {
    pub rows: Vec<SubexpRow>,
    /// max over the last decade of sup_{k≥n} p_k / p_n
    pub sup_tail_ratio: f64,
    pub n_max: i64,
}

impl SubexpReport {
    /// Both ratios within `tol` of 1 over the last decade of n, and the
    /// running-sup ratio bounded.
    pub fn plausibly_subexponential(&self, tol: f64) -> bool {
        let lo = self.n_max / 10;
        let in_decade = self.rows.iter().filter(|r| r.n >= lo);
        let mut any = false;
        for r in in_decade {
            any = true;
            if (r.ratio_step - 1.0).abs() > tol || (r.ratio_conv - 1.0).abs() > tol {
                return false;
            }
        }
        any && self.sup_tail_ratio < 10.0
    }
}

/// Ratios `p_{n+1}/p_n` and `p^{∗2}_n/(2p_n)` for n up to `n_max`.
///
/// The self-convolution is computed on a window wide enough that every
/// reported value is exact (no truncated contributions for laws with
/// support bounded below).
pub fn subexp_diagnostic(law: &ArithmeticLaw, n_max: i64) -> Result<SubexpReport, LawError> {
    if law.zero_atom() > 1e-15 {
        return Err(LawError::ZeroAtomPresent(law.zero_atom()));
    }
    assert!(n_max >= 10, "subexp_diagnostic needs n_max >= 10");
    let lo = law.support_min().ok_or(LawError::UnboundedSupport)?;
    if lo < 0 {
        return Err(LawError::BadPair("diagnostic expects support bounded below by 0".into()));
    }
    let hi = match law.support_max() {
        Some(h) => h.min(n_max + 1),
        None => n_max + 1,
    };
    let dense = law.dense(lo, hi);
    let conv2 = conv::dense_auto(&dense, &dense); // offset 2·lo
    let first = dense.iter().position(|&m| m > 0.0).map(|i| lo + i as i64);
    let n0 = match first {
        Some(k) => k,
        None => return Err(LawError::ZeroMassTail { n: lo }),
    };
    let mut rows = Vec::new();
    for n in n0..=n_max {
        let pn = law.mass(n);
        if pn == 0.0 {
            return Err(LawError::ZeroMassTail { n });
        }
        let pnext = law.mass(n + 1);
        let idx = n - 2 * lo;
        let p2 = if idx >= 0 && (idx as usize) < conv2.len() {
            conv2[idx as usize].max(0.0)
        } else {
            0.0
        };
        rows.push(SubexpRow { n, ratio_step: pnext / pn, ratio_conv: p2 / (2.0 * pn) });
    }
    // sup_{k≥n} p_k/p_n over the last decade, using realized masses
    let mut sup_ratio: f64 = 0.0;
    let mut running_max = match law.support_max() {
        // unbounded generators: masses beyond n_max are below p_{n_max+1}
        // only if eventually monotone; seed with the analytic sup of the tail
        None => law.mass(n_max + 1),
        Some(_) => 0.0,
    };
    for n in (n_max / 10..=n_max).rev() {
        running_max = running_max.max(law.mass(n));
        let pn = law.mass(n);
        if pn > 0.0 {
            sup_ratio = sup_ratio.max(running_max / pn);
        }
    }
    Ok(SubexpReport { rows, sup_tail_ratio: sup_ratio, n_max })
}

// ---------------------------------------------------------------------------
// joint (A, B) pairs
// ---------------------------------------------------------------------------

/// Distribution of B within a pair row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BDist {
    /// Degenerate at a constant.
    Point(f64),
    /// Value `2^(k0+G)` with `G` geometric: P{G=j} = (1-ratio)·ratio^j, j ≥ 0.
    Pow2Geometric { k0: i32, ratio: f64 },
    /// Scaled df on [scale, 2·scale) with piecewise `a + b/y` pieces.
    HSegments(HDf),
    /// Pareto: P{B > x} = (x/x_min)^(-index) for x ≥ x_min.
    Pareto { index: f64, x_min: f64 },
    /// `inner^exponent` (the power reparametrization of a pair).
    PowerOf { inner: Box<BDist>, exponent: f64 },
}

impl BDist {
    /// E|B|, or +∞; an upper bound is fine (it only feeds the reported
    /// truncation-bias heuristic).
    pub fn mean_abs_bound(&self) -> f64 {
        match self {
            BDist::Point(c) => c.abs(),
            BDist::Pow2Geometric { k0, ratio } => {
                // Σ (1-r) r^j 2^{k0+j}; diverges if 2r ≥ 1
                if 2.0 * ratio >= 1.0 {
                    f64::INFINITY
                } else {
                    (1.0 - ratio) * special::exp2i(*k0) / (1.0 - 2.0 * ratio)
                }
            }
            BDist::HSegments(h) => 2.0 * h.scale,
            BDist::Pareto { index, x_min } => {
                if *index <= 1.0 {
                    f64::INFINITY
                } else {
                    x_min * index / (index - 1.0)
                }
            }
            BDist::PowerOf { inner, exponent } => match inner.as_ref() {
                // H-backed values live in [scale, 2·scale): exact range bound
                BDist::HSegments(h) => (2.0 * h.scale).powf(*exponent),
                other => other.mean_abs_bound().powf(*exponent),
            },
        }
    }

    pub fn sample(&self, u: f64) -> f64 {
        match self {
            BDist::Point(c) => *c,
            BDist::Pow2Geometric { k0, ratio } => {
                let g = ((1.0 - u).ln() / ratio.ln()).floor().max(0.0) as i32;
                special::exp2i(k0 + g)
            }
            BDist::HSegments(h) => h.sample(u),
            BDist::Pareto { index, x_min } => x_min * (1.0 - u).powf(-1.0 / index),
            BDist::PowerOf { inner, exponent } => inner.sample(u).powf(*exponent),
        }
    }
}

/// Piecewise distribution function on [1, 2): `H(y) = a_i + b_i / y` on
/// `[z_lo_i, z_hi_i)`, scaled to live on `[scale, 2·scale)`.
///
/// Gaps between pieces are atoms at the next piece's left endpoint;
/// inversion is exact (`y = b/(u-a)`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HDf {
    pub segs: Vec<HSeg>,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HSeg {
    pub z_lo: f64,
    pub z_hi: f64,
    pub a: f64,
    pub b: f64,
}

impl HSeg {
    fn at(&self, y: f64) -> f64 {
        self.a + self.b / y
    }
}

impl HDf {
    /// H(y) for y in [1, 2), unscaled coordinates; right-continuous.
    pub fn value(&self, y: f64) -> f64 {
        if self.segs.is_empty() || y < self.segs[0].z_lo {
            return 0.0;
        }
        let mut h = 0.0;
        for s in &self.segs {
            if y < s.z_lo {
                return h; // inside a gap: df is flat at the previous level
            }
            if y < s.z_hi {
                return s.at(y);
            }
            h = s.at(s.z_hi); // level carried across the jump
        }
        1.0
    }

    /// Validates monotonicity, range and H(2−) = 1.
    pub fn validate(&self) -> Result<(), LawError> {
        let mut prev = 0.0;
        let mut prev_hi = 1.0;
        for s in &self.segs {
            if s.z_lo < prev_hi - 1e-12 || s.z_hi <= s.z_lo {
                return Err(LawError::BadPair("H pieces must be ordered and disjoint".into()));
            }
            let lo = s.at(s.z_lo);
            let hi = s.at(s.z_hi);
            if lo < prev - 1e-10 || hi < lo - 1e-10 {
                return Err(LawError::BadPair("H must be nondecreasing".into()));
            }
            if lo < -1e-10 || hi > 1.0 + 1e-10 {
                return Err(LawError::BadPair("H must take values in [0,1]".into()));
            }
            prev = hi;
            prev_hi = s.z_hi;
        }
        if (prev - 1.0).abs() > 1e-9 {
            return Err(LawError::BadPair(format!("H(2-) = {prev}, expected 1")));
        }
        Ok(())
    }

    /// Exact inverse-df sample (scaled).
    pub fn sample(&self, u: f64) -> f64 {
        let mut level = 0.0;
        for s in &self.segs {
            let lo = s.at(s.z_lo);
            let hi = s.at(s.z_hi);
            if u < lo {
                // atom at the left endpoint of this piece (jump from `level`)
                let _ = level;
                return self.scale * s.z_lo;
            }
            if u < hi {
                if s.b == 0.0 {
                    // flat piece carries no interior mass
                    return self.scale * s.z_lo;
                }
                return self.scale * (s.b / (u - s.a));
            }
            level = hi;
        }
        // u beyond H(2−): numerically u < 1 always, fall back to the top
        self.scale * self.segs.last().map(|s| s.z_hi).unwrap_or(1.0)
    }
}

/// Joint law of a pair (A, B) driving `X =_D AX + B` / `X =_D AX ∨ B`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum JointAbLaw {
    /// Finite mixture of rows (a = e^{k·h} or 0, b-law, weight).
    Mixture { span_h: f64, rows: Vec<PairRow> },
    /// A·B = 0 a.s.: B drawn only when A = 0, log A | A≠0 arithmetic.
    Ab0 {
        p_zero: f64,
        b_given_zero: BDist,
        /// conditional law of log A given A ≠ 0 (proper, no zero atom)
        a_given_pos: ArithmeticLaw,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRow {
    pub weight: f64,
    /// lattice index of a = e^{k·h}; None encodes a = 0
    pub a_index: Option<i64>,
    pub b: BDist,
}

impl JointAbLaw {
    pub fn span(&self) -> f64 {
        match self {
            JointAbLaw::Mixture { span_h, .. } => *span_h,
            JointAbLaw::Ab0 { a_given_pos, .. } => a_given_pos.span(),
        }
    }

    pub fn validate(&self) -> Result<(), LawError> {
        match self {
            JointAbLaw::Mixture { rows, .. } => {
                let total: f64 = rows.iter().map(|r| r.weight).sum();
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(LawError::MassNotNormalized { total });
                }
                if rows.iter().any(|r| r.weight < 0.0) {
                    return Err(LawError::BadPair("negative row weight".into()));
                }
                Ok(())
            }
            JointAbLaw::Ab0 { p_zero, a_given_pos, .. } => {
                if !(0.0..1.0).contains(p_zero) {
                    return Err(LawError::BadPair(format!("p_zero = {p_zero} outside (0,1)")));
                }
                if a_given_pos.zero_atom() > 1e-15 {
                    return Err(LawError::ZeroAtomPresent(a_given_pos.zero_atom()));
                }
                Ok(())
            }
        }
    }

    /// Marginal law of A (as a law of log A with a zero atom).
    pub fn marginal_a(&self) -> Result<ArithmeticLaw, LawError> {
        match self {
            JointAbLaw::Mixture { span_h, rows } => {
                let zero: f64 =
                    rows.iter().filter(|r| r.a_index.is_none()).map(|r| r.weight).sum();
                ArithmeticLaw::from_atoms_raw(
                    *span_h,
                    rows.iter().filter_map(|r| r.a_index.map(|k| (k, r.weight))),
                    zero,
                )
            }
            JointAbLaw::Ab0 { p_zero, a_given_pos, .. } => {
                let scaled: Vec<(i64, f64)> = a_given_pos
                    .atoms()
                    .map(|(k, m)| (k, m * (1.0 - p_zero)))
                    .collect();
                ArithmeticLaw::from_atoms_raw(a_given_pos.span(), scaled, *p_zero)
            }
        }
    }

    /// Does the pair satisfy A·B = 0 almost surely (with B ≥ 0)?
    pub fn is_ab0(&self) -> bool {
        match self {
            JointAbLaw::Ab0 { .. } => true,
            JointAbLaw::Mixture { rows, .. } => rows.iter().all(|r| match (&r.a_index, &r.b) {
                (None, _) => true,
                (Some(_), BDist::Point(c)) => *c == 0.0,
                _ => false,
            }),
        }
    }

    /// Upper bound on E|B| for the truncation-bias heuristic.
    pub fn mean_abs_b_bound(&self) -> f64 {
        match self {
            JointAbLaw::Mixture { rows, .. } => rows
                .iter()
                .map(|r| r.weight * r.b.mean_abs_bound())
                .sum(),
            JointAbLaw::Ab0 { p_zero, b_given_zero, .. } => p_zero * b_given_zero.mean_abs_bound(),
        }
    }

    /// Precomputed sampling tables.
    pub fn sampler(&self) -> PairSampler {
        match self {
            JointAbLaw::Mixture { span_h, rows } => {
                let mut cum = Vec::with_capacity(rows.len());
                let mut acc = 0.0;
                for r in rows {
                    acc += r.weight;
                    cum.push(acc);
                }
                PairSampler::Mixture { span_h: *span_h, rows: rows.clone(), cum }
            }
            JointAbLaw::Ab0 { p_zero, b_given_zero, a_given_pos } => {
                let mut ks = Vec::new();
                let mut cum = Vec::new();
                let mut acc = 0.0;
                for (k, m) in a_given_pos.atoms() {
                    acc += m;
                    ks.push(k);
                    cum.push(acc);
                }
                PairSampler::Ab0 {
                    span_h: a_given_pos.span(),
                    p_zero: *p_zero,
                    b: b_given_zero.clone(),
                    a_ks: ks,
                    a_cum: cum,
                }
            }
        }
    }
}

/// Sampling view of a pair; one uniform decides the branch, further
/// uniforms feed the conditional draws. Power-of-two lattices produce
/// exact `2^k` values.
#[derive(Debug, Clone)]
pub enum PairSampler {
    Mixture { span_h: f64, rows: Vec<PairRow>, cum: Vec<f64> },
    Ab0 { span_h: f64, p_zero: f64, b: BDist, a_ks: Vec<i64>, a_cum: Vec<f64> },
}

fn lattice_value(span_h: f64, k: i64) -> f64 {
    if (span_h - std::f64::consts::LN_2).abs() < 1e-15 {
        special::exp2i(k as i32)
    } else {
        (k as f64 * span_h).exp()
    }
}

impl PairSampler {
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> (f64, f64) {
        match self {
            PairSampler::Mixture { span_h, rows, cum } => {
                let u: f64 = rng.gen();
                let i = cum.partition_point(|&c| c <= u).min(rows.len() - 1);
                let row = &rows[i];
                let a = match row.a_index {
                    None => 0.0,
                    Some(k) => lattice_value(*span_h, k),
                };
                let b = row.b.sample(rng.gen());
                (a, b)
            }
            PairSampler::Ab0 { span_h, p_zero, b, a_ks, a_cum } => {
                let u: f64 = rng.gen();
                if u < *p_zero {
                    (0.0, b.sample(rng.gen()))
                } else {
                    let v: f64 = rng.gen();
                    let i = a_cum.partition_point(|&c| c <= v * a_cum.last().unwrap()).min(a_ks.len() - 1);
                    (lattice_value(*span_h, a_ks[i]), 0.0)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// serialization of ArithmeticLaw: {span_h, zero_atom, atoms, generator?}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LawWire {
    span_h: f64,
    zero_atom: f64,
    atoms: Vec<(i64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    generator: Option<GeneratorWire>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorWire {
    kind: String,
    params: Generator,
}

impl Serialize for ArithmeticLaw {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        LawWire {
            span_h: self.span_h,
            zero_atom: self.zero_atom,
            atoms: self.atoms().collect(),
            generator: self.generator.map(|g| GeneratorWire {
                kind: "power_tail".to_string(),
                params: g,
            }),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ArithmeticLaw {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = LawWire::deserialize(deserializer)?;
        match wire.generator {
            Some(gw) => {
                if gw.kind != "power_tail" {
                    return Err(D::Error::custom(format!("unknown generator kind {}", gw.kind)));
                }
                ArithmeticLaw::from_generator(wire.span_h, gw.params, wire.zero_atom)
                    .map_err(D::Error::custom)
            }
            None => ArithmeticLaw::from_atoms_raw(wire.span_h, wire.atoms, wire.zero_atom)
                .map_err(D::Error::custom),
        }
    }
}
