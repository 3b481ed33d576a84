//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled, [`ExecMode::Parallel`] dispatches to
//! rayon. Without it, every mode runs sequentially. Results are always
//! gathered in input order, so both modes produce identical output for pure
//! per-item functions.

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// `Parallel` only when the crate was built with rayon support.
    pub fn effective(self) -> ExecMode {
        if cfg!(feature = "parallel") {
            self
        } else {
            ExecMode::Sequential
        }
    }

    /// Honors the `KGNMT_DETERMINISTIC` environment override.
    pub fn from_env(default: ExecMode) -> ExecMode {
        if deterministic_from_env() {
            ExecMode::Sequential
        } else {
            default
        }
    }
}

/// True when `KGNMT_DETERMINISTIC` is set to a truthy value.
pub fn deterministic_from_env() -> bool {
    match std::env::var("KGNMT_DETERMINISTIC") {
        Ok(v) => matches!(v.trim().to_ascii_lowercase().as_str(), "1" | "true" | "yes" | "on"),
        Err(_) => false,
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Order-preserving indexed map over `0..n`.
pub fn map_range<R, F>(mode: ExecMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Map then fold with an associative merge. The merge is applied in input
/// order in both modes, so non-commutative merges stay deterministic.
pub fn map_reduce<T, A, F, M>(mode: ExecMode, items: &[T], identity: A, f: F, merge: M) -> A
where
    T: Sync,
    A: Send + Clone,
    F: Fn(&T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    map(mode, items, f).into_iter().fold(identity, merge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(ExecMode::Sequential, &xs, |x| x * x);
        let b = map(ExecMode::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);
        let s = map_reduce(ExecMode::Parallel, &xs, 0u64, |x| *x, |a, b| a + b);
        assert_eq!(s, 999 * 1000 / 2);
        assert_eq!(map_range(ExecMode::Parallel, 5, |i| i), vec![0, 1, 2, 3, 4]);
    }
}
