use rayon::prelude::*;

use super::cache::LikelihoodCache;
use super::tracker::{ProbabilisticTracker, StreamId, Streamline};
use crate::error::{Error, Result};

/// Visit counts per voxel, aligned with the volume grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMap {
    pub dims: [usize; 3],
    pub counts: Vec<u64>,
}

impl ConnectivityMap {
    pub fn new(dims: [usize; 3]) -> Self {
        Self {
            dims,
            counts: vec![0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn add(&mut self, streamline: &Streamline) {
        for v in &streamline.voxels {
            self.counts[v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Streamlines of a multi-seed run and their accumulated visit counts.
#[derive(Debug, Clone)]
pub struct TrackingRun {
    /// Ordered by seed, then sample.
    pub streamlines: Vec<Streamline>,
    pub map: ConnectivityMap,
    pub rejected: usize,
}

/// Tracks `samples_per_seed` fibers from every seed in parallel on the
/// current rayon pool and accumulates their occupancy.
pub fn connectivity_map(
    seeds: &[[usize; 3]],
    tracker: &ProbabilisticTracker<'_>,
    cache: Option<&LikelihoodCache>,
) -> Result<TrackingRun> {
    if seeds.is_empty() {
        return Err(Error::Precondition("connectivity map needs at least one seed".into()));
    }
    let samples = tracker.config().samples_per_seed;
    let jobs: Vec<(usize, StreamId)> = seeds
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            (0..samples).map(move |j| {
                (
                    i,
                    StreamId {
                        seed_index: i as u32,
                        sample_index: j as u32,
                    },
                )
            })
        })
        .collect();
    let results: Vec<Result<Option<Streamline>>> = jobs
        .par_iter()
        .map(|&(i, id)| match tracker.track(seeds[i], id, cache) {
            Ok(s) => Ok(Some(s)),
            Err(Error::SeedRejected(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();

    let mut map = ConnectivityMap::new(tracker.volume().dims());
    let mut streamlines = Vec::with_capacity(results.len());
    let mut rejected = 0;
    for r in results {
        match r? {
            Some(s) => {
                map.add(&s);
                streamlines.push(s);
            }
            None => rejected += 1,
        }
    }
    Ok(TrackingRun {
        streamlines,
        map,
        rejected,
    })
}
