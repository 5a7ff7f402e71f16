//! Small statistics helpers for the acceptance checks.

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let xa = sa[i];
        let xb = sb[j];
        let x = xa.min(xb);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`:
/// `sqrt(-ln(alpha/2)/2) · sqrt((n+m)/(n·m))`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Critical value at the 1% level.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    ks_critical(n, m, 0.01)
}

/// Standard error of an empirical probability.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_identical_samples_zero() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn ks_disjoint_samples_one() {
        let a = vec![1.0, 2.0];
        let b = vec![10.0, 20.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn ks_shifted_half() {
        // half of b sits below all of a
        let a = vec![10.0, 11.0, 12.0, 13.0];
        let b = vec![1.0, 2.0, 10.5, 11.5];
        assert!((ks_two_sample(&a, &b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn critical_value_formula() {
        // c(0.01) = 1.6276 for the asymptotic two-sample statistic
        let c = ks_critical_1pct(1_000_000, 1_000_000) / (2.0f64 / 1e6).sqrt();
        assert!((c - 1.6276).abs() < 1e-3);
    }
}
