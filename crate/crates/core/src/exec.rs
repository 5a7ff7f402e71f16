//! Sequential / data-parallel execution of per-index kernels.
//!
//! Every parallel site in the crate routes through these helpers so the
//! `parallel` feature (rayon) and the sequential fallback produce
//! bit-identical output: work is keyed by index, collected in index
//! order, and no accumulation order changes between modes.

/// Execution mode for data-parallel kernels.
///
/// `Par` uses rayon when the `parallel` feature is enabled and silently
/// degrades to sequential otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub enum Mode {
    Seq,
    #[default]
    Par,
}


/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(n: usize, mode: Mode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        Mode::Seq => (0..n).map(f).collect(),
        Mode::Par => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}

/// Fill `out` by chunks: `f(chunk_start, chunk)` writes each chunk in place.
pub fn for_chunks_mut<F>(out: &mut [f64], chunk: usize, mode: Mode, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    match mode {
        Mode::Seq => {
            for (i, c) in out.chunks_mut(chunk).enumerate() {
                f(i * chunk, c);
            }
        }
        Mode::Par => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                out.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i * chunk, c));
            }
            #[cfg(not(feature = "parallel"))]
            {
                for (i, c) in out.chunks_mut(chunk).enumerate() {
                    f(i * chunk, c);
                }
            }
        }
    }
}
