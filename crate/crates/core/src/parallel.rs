//! Deterministic fan-out over scoped threads.
//!
//! Work is split into contiguous index ranges and the results are stitched
//! back in index order, so output never depends on the worker count.

use std::thread;

pub const THREADS_ENV: &str = "AFFINEINEQ_THREADS";

/// Worker count: `AFFINEINEQ_THREADS` if set to a positive integer, else the
/// available parallelism.
pub fn worker_count() -> usize {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            return n;
        }
    }
    thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

pub fn par_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = worker_count().min(len.max(1));
    if workers <= 1 || len < 64 {
        return (0..len).map(f).collect();
    }
    let chunk = len.div_ceil(workers);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = (w * chunk).min(len);
                let hi = ((w + 1) * chunk).min(len);
                s.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        let mut out = Vec::with_capacity(len);
        for h in handles {
            out.extend(h.join().expect("worker panicked"));
        }
        out
    })
}

/// Like `par_map` without the small-input cutoff; for a few expensive tasks.
pub fn par_tasks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = worker_count().min(len.max(1));
    if workers <= 1 {
        return (0..len).map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let f = &f;
    let next = &next;
    let mut slots: Vec<Option<T>> = (0..len).map(|_| None).collect();
    let done: Vec<Vec<(usize, T)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(move || {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= len {
                            break out;
                        }
                        out.push((i, f(i)));
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for (i, v) in done.into_iter().flatten() {
        slots[i] = Some(v);
    }
    slots.into_iter().map(|v| v.expect("every task ran")).collect()
}

/// Fallible variant; the first error in index order wins.
pub fn try_par_map<T, E, F>(len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync,
{
    par_map(len, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = par_map(1000, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
        let e: Result<Vec<usize>, usize> =
            try_par_map(200, |i| if i == 150 || i == 170 { Err(i) } else { Ok(i) });
        assert_eq!(e, Err(150));
        assert!(par_map(0, |i| i).is_empty());
        assert_eq!(par_tasks(5, |i| i + 1), vec![1, 2, 3, 4, 5]);
    }
}
