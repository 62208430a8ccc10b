//! Indexed map over independent work items, on rayon or a plain loop.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent iterations are scheduled.
///
/// Results are always collected by position, so both variants return
/// identical output for identical inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Runs on the ambient rayon pool. Falls back to a loop when the crate
    /// is built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Execution {
    /// Evaluates `f(0), …, f(len-1)` and returns the results in index order.
    /// The error from the lowest failing index wins.
    pub fn try_map<T, E, F>(self, len: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                let results: Vec<Result<T, E>> = (0..len).into_par_iter().map(&f).collect();
                results.into_iter().collect()
            }
            _ => (0..len).map(f).collect(),
        }
    }

    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self.try_map(len, |i| Ok::<T, std::convert::Infallible>(f(i))) {
            Ok(v) => v,
            Err(never) => match never {},
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_and_report_first_error() {
        let f = |i: usize| if i == 3 || i == 7 { Err(i) } else { Ok(i * i) };
        assert_eq!(Execution::Sequential.try_map(10, f), Err(3));
        assert_eq!(Execution::Parallel.try_map(10, f), Err(3));
        let a = Execution::Sequential.map(100, |i| (i as f64).sqrt());
        let b = Execution::Parallel.map(100, |i| (i as f64).sqrt());
        assert_eq!(a, b);
    }
}
