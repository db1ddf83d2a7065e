//! Deterministic fan-out helpers for per-item parallel work.

use std::env;
use std::thread;

/// Worker count for `n_items` independent jobs: hardware parallelism, capped
/// by the `PERCEPT_THREADS` environment variable when set to a positive
/// integer, and never more than the number of items.
pub fn worker_count(n_items: usize) -> usize {
    let hw = thread::available_parallelism().map_or(1, usize::from);
    let cap = env::var("PERCEPT_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(hw);
    cap.min(n_items).max(1)
}

/// Apply `f` to every item, possibly across threads, returning results in
/// input order. Output is identical for any worker count: items are striped
/// round-robin and results are re-placed by index before returning.
pub fn parallel_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let workers = worker_count(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }

    let mut out: Vec<Option<U>> = (0..items.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || {
                    let mut part = Vec::new();
                    let mut i = w;
                    while i < items.len() {
                        part.push((i, f(&items[i])));
                        i += workers;
                    }
                    part
                })
            })
            .collect();
        for handle in handles {
            for (i, v) in handle.join().expect("parallel_map worker panicked") {
                out[i] = Some(v);
            }
        }
    });
    out.into_iter()
        .map(|v| v.expect("every index visited"))
        .collect()
}
