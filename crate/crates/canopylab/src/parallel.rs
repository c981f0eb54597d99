//! Row-parallel execution helper.
//!
//! Every hot loop in this crate partitions its output by grid row and computes
//! rows independently, so results are identical whether rows run on one thread
//! or many. With the `parallel` feature the rows are distributed by rayon;
//! without it they run sequentially through the same code path.

#[cfg(feature = "parallel")]
pub(crate) fn map_rows<T, F>(rows: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..rows).into_par_iter().map(task).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_rows<T, F>(rows: usize, task: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..rows).map(task).collect()
}
