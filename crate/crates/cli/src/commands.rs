use std::fmt;
use std::path::{Path, PathBuf};

use fibertrack::bench::run_bench;
use fibertrack::dwi::{generate_phantom, DwiVolume, GradientTable, PhantomSpec, VoxelLabel};
use fibertrack::error::Error;
use fibertrack::io::{read_raw, read_volume, write_raw, write_trk, write_volume, TrkHeader, VolumeHeader};
use fibertrack::nn::{
    checkpoint, evaluate, extract_patch, history_csv, synthetic_patches, train, Architecture,
    Network, PatchSample,
};
use fibertrack::tract::{
    connectivity_map, track_deterministic, ConnectivityMap, LikelihoodCache, ProbabilisticTracker,
    Streamline, TensorField,
};
use rayon::prelude::*;

use crate::config::FileConfig;
use crate::{BenchArgs, Cli, Command, EvalArgs, FitArgs, Mode, PhantomArgs, TableArgs, TrackArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Engine(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Engine(e) if e.is_numerical() => 3,
            CliError::Engine(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Engine(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Phantom(a) => phantom(a),
        Command::Fit(a) => fit(a),
        Command::Track(a) => track(a, file),
        Command::Train(a) => train_cmd(a, file),
        Command::Eval(a) => eval(a, file),
        Command::Bench(a) => bench(a, file, cli.threads),
    }
}

fn gradient_table(t: &TableArgs) -> Result<GradientTable> {
    if t.directions < 6 {
        return Err(CliError::Usage("--directions must be at least 6".into()));
    }
    Ok(if t.directions == 6 {
        GradientTable::six_direction(t.b_value)
    } else {
        GradientTable::dense(t.b_value, t.directions)
    })
}

fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes per-voxel components with the component axis slowest.
fn write_map(base: &Path, dims: [usize; 3], voxel_size: [f64; 3], components: usize, data: &[f32]) -> Result<()> {
    let header = VolumeHeader::new([dims[0], dims[1], dims[2], components], voxel_size);
    Ok(write_raw(base, &header, data)?)
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let table = gradient_table(&a.table)?;
    let spec = PhantomSpec::new(a.geometry.into(), a.noise, a.seed);
    let (volume, truth) = generate_phantom(&spec, [a.size; 3], &table)?;
    write_volume(&a.out, &volume)?;
    let n = volume.n_voxels();
    let labels: Vec<f32> = truth.labels.iter().map(|l| *l as u8 as f32).collect();
    let mut tangents = vec![0.0f32; 3 * n];
    for (i, t) in truth.tangents.iter().enumerate() {
        for k in 0..3 {
            tangents[i + k * n] = t[k] as f32;
        }
    }
    write_map(&suffixed(&a.out, "_labels"), volume.dims(), volume.voxel_size(), 1, &labels)?;
    write_map(&suffixed(&a.out, "_tangents"), volume.dims(), volume.voxel_size(), 3, &tangents)?;
    println!(
        "phantom {:?} {}³, {} shells, {} fiber voxels",
        spec.geometry,
        a.size,
        volume.n_shells(),
        labels.iter().filter(|&&l| l > 0.0).count()
    );
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let volume = read_volume(&a.input)?;
    let field = TensorField::fit(&volume)?;
    let n = volume.n_voxels();
    let mut tensor = vec![f32::NAN; 6 * n];
    let mut failed = 0;
    for (i, f) in field.fits().iter().enumerate() {
        match f {
            Some(f) => {
                for (k, c) in f.fit.tensor.components().iter().enumerate() {
                    tensor[i + k * n] = *c as f32;
                }
            }
            None => failed += 1,
        }
    }
    let to_f32 = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect::<Vec<_>>();
    let (dims, vs) = (volume.dims(), volume.voxel_size());
    write_map(&suffixed(&a.out, "_tensor"), dims, vs, 6, &tensor)?;
    write_map(&suffixed(&a.out, "_fa"), dims, vs, 1, &to_f32(field.fa_map()))?;
    write_map(&suffixed(&a.out, "_md"), dims, vs, 1, &to_f32(field.md_map()))?;
    println!("fitted {} voxels, {failed} failed", n - failed);
    Ok(())
}

fn parse_seeds(path: &Path) -> Result<Vec<[usize; 3]>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut seeds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let coords: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
        match coords.as_deref() {
            Some(&[x, y, z]) => seeds.push([x, y, z]),
            _ => {
                return Err(Error::Parse(format!(
                    "{}:{}: expected three voxel indices, got {line:?}",
                    path.display(),
                    i + 1
                ))
                .into())
            }
        }
    }
    Ok(seeds)
}

/// Tracks every seed in parallel, dropping rejected seeds.
fn track_each(
    seeds: &[[usize; 3]],
    f: impl Fn([usize; 3]) -> fibertrack::Result<Streamline> + Sync,
) -> Result<(Vec<Streamline>, usize)> {
    let results: Vec<fibertrack::Result<Option<Streamline>>> = seeds
        .par_iter()
        .map(|&s| match f(s) {
            Ok(l) => Ok(Some(l)),
            Err(Error::SeedRejected(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut out = Vec::new();
    let mut rejected = 0;
    for r in results {
        match r? {
            Some(s) => out.push(s),
            None => rejected += 1,
        }
    }
    Ok((out, rejected))
}

fn track(a: TrackArgs, file: FileConfig) -> Result<()> {
    let volume = read_volume(&a.input)?;
    let mut config = file.tracker;
    if let Some(s) = a.samples {
        config.samples_per_seed = s;
    }
    if let Some(s) = a.seed {
        config.rng_seed = s;
    }
    if let Some(l) = a.sphere_level {
        config.sphere_level = l;
    }
    if let Some(f) = a.fa_stop {
        config.fa_stop = f;
    }
    if a.sigma.is_some() {
        config.sigma_override = a.sigma;
    }
    config.validate()?;
    let seeds = match (&a.seeds, a.seed_fa) {
        (Some(path), _) => parse_seeds(path)?,
        (None, Some(t)) => TensorField::fit(&volume)?.seeds_above(t),
        (None, None) => return Err(CliError::Usage("give --seeds or --seed-fa".into())),
    };
    if seeds.is_empty() {
        return Err(Error::Precondition("no seed voxels".into()).into());
    }

    let (streamlines, rejected, map) = match a.mode {
        Mode::Probabilistic => {
            let tracker = ProbabilisticTracker::new(&volume, config)?;
            let cache = (!a.no_cache).then(LikelihoodCache::new);
            let run = connectivity_map(&seeds, &tracker, cache.as_ref())?;
            (run.streamlines, run.rejected, run.map)
        }
        Mode::Deterministic => {
            let field = TensorField::fit(&volume)?;
            let (s, r) = track_each(&seeds, |seed| track_deterministic(seed, &field, &config))?;
            let map = occupancy(&volume, &s);
            (s, r, map)
        }
        Mode::Learned => {
            let path = a
                .checkpoint
                .as_deref()
                .ok_or_else(|| CliError::Usage("learned mode needs --checkpoint".into()))?;
            let net = checkpoint::load::<f32>(path)?;
            let (s, r) = track_each(&seeds, |seed| {
                fibertrack::nn::track_learned(seed, &volume, &net, &config)
            })?;
            let map = occupancy(&volume, &s);
            (s, r, map)
        }
    };

    write_trk(&a.out, &TrkHeader::new(volume.dims(), volume.voxel_size())?, &streamlines)?;
    let map_path = a.map.unwrap_or_else(|| suffixed(&a.out.with_extension(""), "_connectivity"));
    let counts: Vec<f32> = map.counts.iter().map(|&c| c as f32).collect();
    write_map(&map_path, volume.dims(), volume.voxel_size(), 1, &counts)?;
    println!(
        "{} streamlines from {} seeds ({rejected} rejected), {} voxel visits",
        streamlines.len(),
        seeds.len(),
        map.total()
    );
    Ok(())
}

fn occupancy(volume: &DwiVolume, streamlines: &[Streamline]) -> ConnectivityMap {
    let mut map = ConnectivityMap::new(volume.dims());
    streamlines.iter().for_each(|s| map.add(s));
    map
}

fn train_cmd(a: TrainArgs, file: FileConfig) -> Result<()> {
    let table = gradient_table(&a.table)?;
    let mut config = file.train;
    if let Some(s) = a.seed {
        config.rng_seed = s;
    }
    if let Some(e) = a.max_epochs {
        config.max_epochs = e;
    }
    if a.max_steps.is_some() {
        config.max_steps = a.max_steps;
    }
    if a.time_budget.is_some() {
        config.time_budget_secs = a.time_budget;
    }
    config.validate()?;
    let mut spec = file.dataset;
    if let Some(n) = a.noise {
        spec.noise_sigma = n;
    }
    spec.rng_seed = config.rng_seed.wrapping_mul(2);
    spec.samples = a.train_samples;
    let train_set = synthetic_patches(&spec, &table)?;
    spec.rng_seed += 1;
    spec.samples = a.val_samples;
    let val_set = synthetic_patches(&spec, &table)?;

    let net = Network::<f32>::init(&Architecture::table1(table.len())?, config.rng_seed)?;
    println!(
        "training {} parameters on {} samples ({} shells)",
        net.parameter_count(),
        train_set.len(),
        table.len()
    );
    let outcome = train(net, &train_set, &val_set, &config)?;
    checkpoint::save(&a.out, &outcome.network)?;
    if let Some(h) = &a.history {
        std::fs::write(h, history_csv(&outcome.history)).map_err(|e| Error::Io {
            path: h.clone(),
            source: e,
        })?;
    }
    println!(
        "best validation error {:.4} rad at epoch {}, {} steps, stopped by {:?}",
        outcome.best_val_error, outcome.best_epoch, outcome.steps, outcome.stop
    );
    Ok(())
}

fn eval(a: EvalArgs, file: FileConfig) -> Result<()> {
    let net = checkpoint::load::<f32>(&a.checkpoint)?;
    let samples = match &a.input {
        Some(base) => phantom_samples(base)?,
        None => {
            let mut spec = file.dataset;
            spec.samples = a.samples;
            if let Some(n) = a.noise {
                spec.noise_sigma = n;
            }
            if let Some(s) = a.seed {
                spec.rng_seed = s;
            }
            let table = if net.architecture().shells == 7 {
                GradientTable::six_direction(1000.0)
            } else {
                GradientTable::dense(1000.0, net.architecture().shells - 1)
            };
            synthetic_patches(&spec, &table)?
        }
    };
    if samples.is_empty() {
        return Err(Error::Precondition("no voxels to evaluate".into()).into());
    }
    let s = evaluate(&net, &samples)?;
    println!(
        "{} voxels: mean {:.4} rad ({:.2}°), median {:.4} rad ({:.2}°)",
        s.count,
        s.mean,
        s.mean.to_degrees(),
        s.median,
        s.median.to_degrees()
    );
    Ok(())
}

/// Single-fiber voxels of a phantom whose patch window fits in the volume.
fn phantom_samples(base: &Path) -> Result<Vec<PatchSample>> {
    let volume = read_volume(base)?;
    let (_, labels) = read_raw(&suffixed(base, "_labels"))?;
    let (_, tangents) = read_raw(&suffixed(base, "_tangents"))?;
    let n = volume.n_voxels();
    if labels.len() != n || tangents.len() != 3 * n {
        return Err(Error::Parse("ground-truth maps do not match the volume".into()).into());
    }
    let mut out = Vec::new();
    for i in 0..n {
        if labels[i] != VoxelLabel::Fiber as u8 as f32 {
            continue;
        }
        let views = match extract_patch(&volume, volume.voxel_coords(i)) {
            Ok(v) => v,
            Err(Error::Precondition(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let t = [0, 1, 2].map(|k| f64::from(tangents[i + k * n]));
        out.push(PatchSample::new(views, t)?);
    }
    Ok(out)
}

fn bench(a: BenchArgs, file: FileConfig, threads: Option<usize>) -> Result<()> {
    let mut config = file.bench;
    if let Some(r) = a.repetitions {
        config.repetitions = r;
    }
    if let Some(s) = a.seed {
        config.rng_seed = s;
    }
    if let Some(l) = a.sphere_level {
        config.tracker.sphere_level = l;
    }
    if let Some(f) = a.fa_stop {
        config.tracker.fa_stop = f;
    }
    config.threads = threads.unwrap_or_else(rayon::current_num_threads);
    let net = a.checkpoint.as_deref().map(checkpoint::load::<f32>).transpose()?;
    let report = run_bench(&config, net.as_ref())?;
    print!("{}", report.to_text());
    let csv = report.to_csv();
    match &a.csv {
        Some(path) => std::fs::write(path, csv).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_classes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::from(Error::Parse("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::SeedRejected("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::DeadEnd).exit_code(), 3);
        assert_eq!(CliError::from(Error::Fit("x".into())).exit_code(), 3);
    }
}
