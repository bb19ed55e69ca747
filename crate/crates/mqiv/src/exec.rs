//! Parallel/sequential execution facade.
//!
//! With the `parallel` feature (default) indexed maps run on the rayon
//! global pool; without it, or when a caller forces sequential execution,
//! they degrade to plain iteration. Results are always collected in input
//! order and reduced sequentially afterwards, so outputs are bit-identical
//! across feature settings, thread counts, and scheduling.

/// How to execute an indexed map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Use the rayon pool when the `parallel` feature is enabled;
    /// otherwise identical to `Sequential`.
    #[default]
    Parallel,
    Sequential,
}

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        ExecMode::Sequential => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(_mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let out = map_indexed(ExecMode::Parallel, 1000, |i| i * i);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
        let seq = map_indexed(ExecMode::Sequential, 1000, |i| i * i);
        assert_eq!(out, seq);
    }
}
