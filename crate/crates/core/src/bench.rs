//! Timing harness comparing Bayesian posterior evaluation, network
//! inference and cached vs uncached probabilistic tracking.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dwi::{generate_phantom, DwiVolume, Geometry, GradientTable, GroundTruth, PhantomSpec};
use crate::error::{Error, Result};
use crate::nn::{extract_patch, Architecture, Network, PatchSample};
use crate::tract::{
    connectivity_map, LikelihoodCache, ProbabilisticTracker, StreamId, TrackerConfig,
};

/// Bench parameters. The default is the 32³ straight reference phantom with
/// the six-direction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub dims: [usize; 3],
    pub geometry: Geometry,
    pub noise_sigma: f64,
    /// Diffusion-weighted directions added to one b=0 shell.
    pub directions: usize,
    pub b_value: f64,
    /// Timed repetitions; one extra warm-up repetition runs first and is
    /// discarded.
    pub repetitions: usize,
    /// Voxels timed per repetition for the per-voxel rows.
    pub voxels: usize,
    /// Fibers tracked from the same seed for the per-fiber rows.
    pub fibers: usize,
    /// Seeds × samples for the throughput row.
    pub throughput_seeds: usize,
    pub throughput_samples: usize,
    pub inference_batch: usize,
    pub threads: usize,
    pub rng_seed: u64,
    pub tracker: TrackerConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: [32; 3],
            geometry: Geometry::Straight,
            noise_sigma: 0.02,
            directions: 6,
            b_value: 1000.0,
            repetitions: 5,
            voxels: 200,
            fibers: 20,
            throughput_seeds: 8,
            throughput_samples: 16,
            inference_batch: 40,
            threads: 1,
            rng_seed: 0,
            tracker: TrackerConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 5 {
            return Err(Error::Config("bench needs at least 5 timed repetitions".into()));
        }
        if self.voxels == 0 || self.fibers == 0 || self.throughput_seeds == 0 {
            return Err(Error::Config("bench voxel, fiber and seed counts must be ≥ 1".into()));
        }
        if self.threads == 0 || self.inference_batch == 0 || self.throughput_samples == 0 {
            return Err(Error::Config("threads, batch and samples must be ≥ 1".into()));
        }
        self.tracker.validate()
    }

    pub fn table(&self) -> GradientTable {
        if self.directions == 6 {
            GradientTable::six_direction(self.b_value)
        } else {
            GradientTable::dense(self.b_value, self.directions)
        }
    }
}

/// One line of the report: median and spread over the timed repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub metric: &'static str,
    pub unit: &'static str,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub shells: usize,
    pub sphere_points: usize,
    pub threads: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, metric: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn median(&self, metric: &str) -> Option<f64> {
        self.row(metric).map(|r| r.median)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,unit,median,min,max,repetitions,shells,sphere_points,threads\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{:.6},{},{},{},{}",
                r.metric, r.unit, r.median, r.min, r.max, r.repetitions, self.shells,
                self.sphere_points, self.threads
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "shells {}, sphere points {}, threads {}\n",
            self.shells, self.sphere_points, self.threads
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<32} {:>12.3} {:<10} (min {:.3}, max {:.3})",
                r.metric, r.median, r.unit, r.min, r.max
            );
        }
        s
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `f` once as warm-up, then `reps` times; each call returns one
/// measurement.
fn repeat(
    metric: &'static str,
    unit: &'static str,
    reps: usize,
    mut f: impl FnMut() -> Result<f64>,
) -> Result<BenchRow> {
    f()?;
    let mut v = (0..reps).map(|_| f()).collect::<Result<Vec<f64>>>()?;
    let (min, max) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(BenchRow {
        metric,
        unit,
        median: median(&mut v),
        min,
        max,
        repetitions: reps,
    })
}

fn derived(metric: &'static str, unit: &'static str, value: f64, reps: usize) -> BenchRow {
    BenchRow {
        metric,
        unit,
        median: value,
        min: value,
        max: value,
        repetitions: reps,
    }
}

/// In-fiber voxels whose full 7³ patch window fits inside the volume,
/// in raster order.
fn interior_fiber_voxels(truth: &GroundTruth, count: usize) -> Vec<[usize; 3]> {
    let [nx, ny, nz] = truth.dims;
    let m = 3;
    let mut out = Vec::new();
    for z in m..nz.saturating_sub(m) {
        for y in m..ny.saturating_sub(m) {
            for x in m..nx.saturating_sub(m) {
                if truth.in_fiber([x, y, z]) {
                    out.push([x, y, z]);
                }
            }
        }
    }
    // spread the selection over the whole fiber
    let stride = (out.len() / count.max(1)).max(1);
    out.into_iter().step_by(stride).take(count).collect()
}

/// Voxel closest to the volume center that lies inside the fiber.
fn central_seed(truth: &GroundTruth) -> Result<[usize; 3]> {
    let c = truth.dims.map(|d| d as f64 / 2.0);
    interior_fiber_voxels(truth, usize::MAX)
        .into_iter()
        .min_by(|a, b| {
            let d = |v: &[usize; 3]| (0..3).map(|k| (v[k] as f64 - c[k]).powi(2)).sum::<f64>();
            d(a).total_cmp(&d(b))
        })
        .ok_or_else(|| Error::Config("phantom has no interior fiber voxel".into()))
}

/// Builds the reference phantom and runs every measurement. Without a
/// network, a randomly initialized one of the reference layout is timed;
/// inference cost does not depend on the weight values.
pub fn run_bench(config: &BenchConfig, network: Option<&Network<f32>>) -> Result<BenchReport> {
    config.validate()?;
    let table = config.table();
    let spec = PhantomSpec::new(config.geometry, config.noise_sigma, config.rng_seed);
    let (volume, truth) = generate_phantom(&spec, config.dims, &table)?;
    let owned;
    let net = match network {
        Some(n) => n,
        None => {
            owned = Network::<f32>::init(&Architecture::table1(table.len())?, config.rng_seed)?;
            &owned
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| measure(config, &volume, &truth, net))
}

fn measure(
    config: &BenchConfig,
    volume: &DwiVolume,
    truth: &GroundTruth,
    net: &Network<f32>,
) -> Result<BenchReport> {
    let reps = config.repetitions;
    let tracker = ProbabilisticTracker::new(volume, config.tracker.clone())?;
    let voxels = interior_fiber_voxels(truth, config.voxels);
    if voxels.is_empty() {
        return Err(Error::Config("phantom has no interior fiber voxel".into()));
    }
    let n_vox = voxels.len() as f64;
    let mut rows = Vec::new();

    rows.push(repeat("posterior_per_voxel", "us", reps, || {
        let t = Instant::now();
        for v in &voxels {
            std::hint::black_box(tracker.posterior_at(*v, None, None)?);
        }
        Ok(t.elapsed().as_secs_f64() * 1e6 / n_vox)
    })?);

    let patches = |vs: &[[usize; 3]]| -> Result<Vec<PatchSample>> {
        vs.iter()
            .map(|v| PatchSample::new(extract_patch(volume, *v)?, [1.0, 0.0, 0.0]))
            .collect()
    };
    rows.push(repeat("network_forward_per_voxel", "us", reps, || {
        let t = Instant::now();
        let samples = patches(&voxels)?;
        let refs: Vec<&PatchSample> = samples.iter().collect();
        std::hint::black_box(net.predict_batch(&refs, config.inference_batch)?);
        Ok(t.elapsed().as_secs_f64() * 1e6 / n_vox)
    })?);
    rows.push(repeat("network_forward_single_voxel", "us", reps, || {
        let t = Instant::now();
        for v in &voxels {
            let s = patches(std::slice::from_ref(v))?;
            std::hint::black_box(net.predict(&s[0])?);
        }
        Ok(t.elapsed().as_secs_f64() * 1e6 / n_vox)
    })?);

    let seed = central_seed(truth)?;
    let fibers = config.fibers as f64;
    let stream = |j: usize| StreamId {
        seed_index: 0,
        sample_index: j as u32,
    };
    rows.push(repeat("fiber_uncached", "ms", reps, || {
        let t = Instant::now();
        for j in 0..config.fibers {
            std::hint::black_box(tracker.track(seed, stream(j), None)?);
        }
        Ok(t.elapsed().as_secs_f64() * 1e3 / fibers)
    })?);
    let cache = LikelihoodCache::new();
    let mut visits = 0usize;
    rows.push(repeat("fiber_cached", "ms", reps, || {
        cache.clear();
        visits = 0;
        let t = Instant::now();
        for j in 0..config.fibers {
            visits += tracker.track(seed, stream(j), Some(&cache))?.len();
        }
        Ok(t.elapsed().as_secs_f64() * 1e3 / fibers)
    })?);
    let revisit = if visits == 0 {
        0.0
    } else {
        1.0 - cache.computations() as f64 / visits as f64
    };
    let speedup = rows[3].median / rows[4].median;
    rows.push(derived("cache_speedup", "ratio", speedup, reps));
    rows.push(derived("revisit_fraction", "fraction", revisit, reps));

    let seeds: Vec<[usize; 3]> = interior_fiber_voxels(truth, config.throughput_seeds);
    let mut throughput_config = config.tracker.clone();
    throughput_config.samples_per_seed = config.throughput_samples;
    let throughput_tracker = ProbabilisticTracker::new(volume, throughput_config)?;
    rows.push(repeat("fibers_per_second", "1/s", reps, || {
        let cache = LikelihoodCache::new();
        let t = Instant::now();
        let run = connectivity_map(&seeds, &throughput_tracker, Some(&cache))?;
        Ok((run.streamlines.len() + run.rejected) as f64 / t.elapsed().as_secs_f64())
    })?);

    Ok(BenchReport {
        shells: volume.n_shells(),
        sphere_points: tracker.sphere().len(),
        threads: rayon::current_num_threads(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn warm_up_is_discarded() {
        let mut calls = 0;
        let row = repeat("x", "s", 5, || {
            calls += 1;
            Ok(if calls == 1 { 1e9 } else { calls as f64 })
        })
        .unwrap();
        assert_eq!(calls, 6);
        assert_eq!(row.max, 6.0);
        assert_eq!(row.median, 4.0);
    }

    #[test]
    fn too_few_repetitions_rejected() {
        let c = BenchConfig {
            repetitions: 4,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
