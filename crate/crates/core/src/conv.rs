//! Dense convolution kernels for probability mass vectors.
//!
//! Direct (quadratic) convolution below [`FFT_THRESHOLD`] output points,
//! transform-based above. The direct kernel is the reference route: it is
//! exact up to per-term rounding and is used to cross-check the FFT path
//! to 1e-10. Direct convolution parallelizes over output blocks.

use crate::exec::{self, Mode};
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Output length at or above which convolution switches to the FFT path.
pub const FFT_THRESHOLD: usize = 4096;

/// Direct convolution, sequential.
pub fn dense_direct_seq(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    direct_fill(a, b, 0, &mut out);
    out
}

/// Direct convolution, block-parallel over the output range.
pub fn dense_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    dense_direct_mode(a, b, Mode::Par)
}

/// Direct convolution with an explicit execution mode (benchmarks).
pub fn dense_direct_mode(a: &[f64], b: &[f64], mode: Mode) -> Vec<f64> {
    let n = a.len() + b.len() - 1;
    let mut out = vec![0.0; n];
    let chunk = 512.max(n / 64);
    exec::for_chunks_mut(&mut out, chunk, mode, |start, c| {
        direct_fill(a, b, start, c);
    });
    out
}

/// out[i] = Σ_k a[k]·b[start+i-k] for each slot of `out`.
fn direct_fill(a: &[f64], b: &[f64], start: usize, out: &mut [f64]) {
    for (i, slot) in out.iter_mut().enumerate() {
        let n = start + i;
        let k_lo = n.saturating_sub(b.len() - 1);
        let k_hi = n.min(a.len() - 1);
        let mut acc = 0.0;
        for k in k_lo..=k_hi {
            acc += a[k] * b[n - k];
        }
        *slot = acc;
    }
}

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn planner_cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = planner_cache().lock().unwrap();
    cache
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// FFT convolution (zero-padded to the next power of two).
pub fn dense_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let fwd = plan(size, false);
    let inv = plan(size, true);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(size, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Convolve, selecting the backend by output size.
pub fn dense_auto(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.len() + b.len() > FFT_THRESHOLD {
        dense_fft(a, b)
    } else {
        dense_direct(a, b)
    }
}

/// Self-convolution via the auto backend.
pub fn dense_square(a: &[f64]) -> Vec<f64> {
    dense_auto(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_small_binomial() {
        let a = [0.5, 0.5];
        let out = dense_direct_seq(&a, &a);
        assert_eq!(out.len(), 3);
        assert!((out[0] - 0.25).abs() < 1e-15);
        assert!((out[1] - 0.5).abs() < 1e-15);
        assert!((out[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fft_agrees_with_direct() {
        // pseudo-random masses, cross-backend agreement to 1e-10
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = || {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            (state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
        };
        let a: Vec<f64> = (0..3000).map(|_| next()).collect();
        let b: Vec<f64> = (0..2500).map(|_| next()).collect();
        let sa: f64 = a.iter().sum();
        let sb: f64 = b.iter().sum();
        let a: Vec<f64> = a.iter().map(|x| x / sa).collect();
        let b: Vec<f64> = b.iter().map(|x| x / sb).collect();
        let d = dense_direct_seq(&a, &b);
        let f = dense_fft(&a, &b);
        let p = dense_direct_mode(&a, &b, Mode::Par);
        for i in 0..d.len() {
            assert!((d[i] - f[i]).abs() <= 1e-10, "fft mismatch at {i}");
            assert_eq!(d[i], p[i], "parallel direct must be bit-identical");
        }
        // mass conservation
        let total: f64 = f.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
