//! Deterministic fan-out over independent trials.
//!
//! Trials are grouped into fixed index blocks; each block is folded
//! sequentially and the block results are merged in index order. The block
//! layout depends only on the trial count, so the aggregate is bit-identical
//! for any number of worker threads.

use rayon::prelude::*;

const BLOCK: u64 = 256;

pub fn fold_trials<A, F, M>(trials: u64, init: impl Fn() -> A + Sync, fold: F, merge: M) -> A
where
    A: Send,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let blocks = trials.div_ceil(BLOCK);
    let parts: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            for i in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                fold(&mut acc, i);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

pub fn map_trials<T: Send>(trials: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..trials).into_par_iter().map(f).collect()
}

/// Runs `f` on a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
