use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::Result;

/// Runs `job(0..n)` on at most `threads` worker threads and returns the
/// results in job order. Once a job fails no new jobs are started; the
/// error of the lowest-numbered failed job is returned.
pub fn run_pool<T, F>(n: usize, threads: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(&job).collect();
    }
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = job(i);
                if r.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    // Jobs start in index order, so every unstarted slot lies after the
    // failure that stopped the queue and is never reached here.
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|slot| slot.expect("unstarted job before the first failure"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn results_come_back_in_job_order() {
        for threads in [1, 2, 4, 9] {
            let out = run_pool(20, threads, |i| Ok(i * i)).unwrap();
            assert_eq!(out, (0..20).map(|i| i * i).collect::<Vec<_>>());
        }
        assert!(run_pool(0, 3, |i| Ok(i)).unwrap().is_empty());
    }

    #[test]
    fn failure_is_reported() {
        let r = run_pool(10, 3, |i| {
            if i == 4 {
                Err(Error::Protocol("boom".into()))
            } else {
                Ok(i)
            }
        });
        assert!(matches!(r, Err(Error::Protocol(_))));
    }
}
