//! Per-case parallelism with results in input order.

/// Maps `f` over `items` on up to `jobs` threads. Thread `t` takes items
/// `t, t + jobs, ...`; the output is in input order whatever the thread count.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let f = &f;
    let mut parts: Vec<Vec<(usize, R)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs).map(|t| s.spawn(move || items.iter().enumerate().skip(t).step_by(jobs).map(|(i, x)| (i, f(x))).collect())).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    for (i, r) in parts.iter_mut().flat_map(|p| p.drain(..)) {
        out[i] = Some(r);
    }
    out.into_iter().map(|r| r.expect("every index visited")).collect()
}
