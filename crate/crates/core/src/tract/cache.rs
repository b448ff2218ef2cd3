use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

type Slot = Arc<OnceLock<Arc<[f64]>>>;

/// Memoized per-voxel log-likelihood vectors shared across tracking threads.
///
/// Each voxel is computed at most once: concurrent requests for the same
/// voxel block on a single initializer.
#[derive(Debug, Default)]
pub struct LikelihoodCache {
    slots: RwLock<HashMap<usize, Slot>>,
    computations: AtomicUsize,
}

impl LikelihoodCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, voxel: usize) -> Option<Arc<[f64]>> {
        let slots = self.slots.read().expect("cache lock poisoned");
        slots.get(&voxel).and_then(|s| s.get().cloned())
    }

    pub fn get_or_compute<F>(&self, voxel: usize, compute: F) -> Arc<[f64]>
    where
        F: FnOnce() -> Vec<f64>,
    {
        let slot = {
            let slots = self.slots.read().expect("cache lock poisoned");
            slots.get(&voxel).cloned()
        };
        let slot = match slot {
            Some(s) => s,
            None => {
                let mut slots = self.slots.write().expect("cache lock poisoned");
                Arc::clone(slots.entry(voxel).or_default())
            }
        };
        Arc::clone(slot.get_or_init(|| {
            self.computations.fetch_add(1, Ordering::Relaxed);
            compute().into()
        }))
    }

    /// Number of likelihood vectors computed through this cache.
    pub fn computations(&self) -> usize {
        self.computations.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.slots.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.slots.write().expect("cache lock poisoned").clear();
        self.computations.store(0, Ordering::Relaxed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn computes_once_per_voxel() {
        let cache = LikelihoodCache::new();
        let a = cache.get_or_compute(3, || vec![1.0, 2.0]);
        let b = cache.get_or_compute(3, || panic!("recomputed"));
        assert_eq!(&*a, &*b);
        assert_eq!(cache.computations(), 1);
        assert!(cache.get(4).is_none());
    }

    #[test]
    fn concurrent_requests_share_one_computation() {
        let cache = LikelihoodCache::new();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for v in 0..50 {
                        cache.get_or_compute(v, || vec![v as f64; 4]);
                    }
                });
            }
        });
        assert_eq!(cache.computations(), 50);
        assert_eq!(&*cache.get(17).unwrap(), &[17.0; 4]);
    }
}
