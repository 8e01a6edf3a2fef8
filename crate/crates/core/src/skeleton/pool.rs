//! Fixed-size worker pool draining a shared queue of work units.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::datagen::SampleRng;

/// Runs `f` over every unit on `workers` threads and returns one local
/// accumulator per worker. With `order_seed` the dispatch order is a seeded
/// random permutation of `units`.
///
/// The first error stops further dispatch and is returned.
pub(crate) fn run_units<U, L, E, F>(units: &[U], workers: usize, order_seed: Option<u64>, f: F) -> Result<Vec<L>, E>
where
    U: Sync,
    L: Default + Send,
    E: Send,
    F: Fn(&U, &mut L) -> Result<(), E> + Sync,
{
    let mut order: Vec<usize> = (0..units.len()).collect();
    if let Some(seed) = order_seed {
        let mut rng = SampleRng::new(seed);
        for k in (1..order.len()).rev() {
            let r = (rng.next_u64() % (k as u64 + 1)) as usize;
            order.swap(k, r);
        }
    }

    if workers <= 1 || units.len() <= 1 {
        let mut local = L::default();
        for &k in &order {
            f(&units[k], &mut local)?;
        }
        return Ok(vec![local]);
    }

    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let first_error: Mutex<Option<E>> = Mutex::new(None);
    let locals = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers.min(units.len()))
            .map(|_| {
                scope.spawn(|| {
                    let mut local = L::default();
                    while !failed.load(Ordering::Relaxed) {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        let Some(&idx) = order.get(k) else { break };
                        if let Err(e) = f(&units[idx], &mut local) {
                            failed.store(true, Ordering::Relaxed);
                            first_error.lock().unwrap().get_or_insert(e);
                            break;
                        }
                    }
                    local
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect::<Vec<L>>()
    });
    match first_error.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(locals),
    }
}
