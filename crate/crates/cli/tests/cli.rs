use std::path::Path;
use std::process::{Command, Output};

use fibertrack::io::{read_raw, read_trk};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fibertrack"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

fn phantom(dir: &Path, name: &str, seed: &str) -> String {
    let base = p(dir, name);
    ok(&["phantom", "--geometry", "straight", "--noise", "0.02", "--seed", seed, "--out", &base]);
    base
}

#[test]
fn phantom_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = phantom(dir.path(), "a", "7");
    let b = phantom(dir.path(), "b", "7");
    for suffix in [".raw", "_labels.raw", "_tangents.raw", ".bval", ".bvec"] {
        let x = std::fs::read(format!("{a}{suffix}")).unwrap();
        let y = std::fs::read(format!("{b}{suffix}")).unwrap();
        assert_eq!(x, y, "{suffix}");
    }
    let c = phantom(dir.path(), "c", "8");
    assert_ne!(
        std::fs::read(format!("{a}.raw")).unwrap(),
        std::fs::read(format!("{c}.raw")).unwrap()
    );
}

#[test]
fn probabilistic_track_writes_one_streamline_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let base = phantom(dir.path(), "ph", "1");
    let seeds = p(dir.path(), "seeds.txt");
    std::fs::write(&seeds, "# center of the tube\n16 16 16\n").unwrap();
    let trk = |name: &str, threads: &str| {
        let out = p(dir.path(), name);
        ok(&[
            "--threads", threads, "track", "--input", &base, "--mode", "probabilistic", "--seeds",
            &seeds, "--samples", "100", "--seed", "1", "--out", &out,
        ]);
        out
    };
    let a = trk("a.trk", "1");
    let bytes = std::fs::read(&a).unwrap();
    let file = read_trk(&bytes).unwrap();
    assert_eq!(file.header.n_count, 100);
    assert_eq!(file.streamlines.len(), 100);
    let (header, counts) = read_raw(&dir.path().join("a_connectivity")).unwrap();
    assert_eq!(header.dims, [32, 32, 32, 1]);
    let visits: usize = file.streamlines.iter().map(|s| s.len()).sum();
    assert_eq!(counts.iter().sum::<f32>() as usize, visits);

    let b = trk("b.trk", "2");
    assert_eq!(bytes, std::fs::read(&b).unwrap());
}

#[test]
fn deterministic_track_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let base = phantom(dir.path(), "ph", "3");
    let fit = p(dir.path(), "fit");
    ok(&["fit", "--input", &base, "--out", &fit]);
    let (h, fa) = read_raw(&dir.path().join("fit_fa")).unwrap();
    assert_eq!(h.dims, [32, 32, 32, 1]);
    assert!(fa[16 + 32 * (16 + 32 * 16)] > 0.5);
    assert!(fa[2 + 32 * (2 + 32 * 2)] < 0.2);
    let (h, _) = read_raw(&dir.path().join("fit_tensor")).unwrap();
    assert_eq!(h.dims[3], 6);

    let trk = p(dir.path(), "det.trk");
    let stdout = ok(&[
        "track", "--input", &base, "--mode", "deterministic", "--seed-fa", "0.5", "--out", &trk,
    ]);
    assert!(stdout.contains("streamlines"));
    let file = read_trk(&std::fs::read(&trk).unwrap()).unwrap();
    assert!(file.header.n_count > 0);
}

#[test]
fn train_eval_and_learned_track() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = p(dir.path(), "net.ftnn");
    let history = p(dir.path(), "history.csv");
    ok(&[
        "train", "--train-samples", "8", "--val-samples", "4", "--max-steps", "2", "--seed", "4",
        "--out", &ckpt, "--history", &history,
    ]);
    assert!(std::fs::read_to_string(&history).unwrap().lines().count() >= 2);
    let base = phantom(dir.path(), "ph", "5");
    let stdout = ok(&["eval", "--checkpoint", &ckpt, "--input", &base]);
    assert!(stdout.contains("rad") && stdout.contains('°'), "{stdout}");
    let stdout = ok(&["eval", "--checkpoint", &ckpt, "--samples", "10"]);
    assert!(stdout.starts_with("10 voxels"), "{stdout}");

    let seeds = p(dir.path(), "seeds.txt");
    std::fs::write(&seeds, "16 16 16\n").unwrap();
    let trk = p(dir.path(), "learned.trk");
    ok(&[
        "track", "--input", &base, "--mode", "learned", "--checkpoint", &ckpt, "--seeds", &seeds,
        "--out", &trk,
    ]);
    assert_eq!(read_trk(&std::fs::read(&trk).unwrap()).unwrap().header.n_count, 1);
}

#[test]
fn bench_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = p(dir.path(), "bench.toml");
    std::fs::write(
        &config,
        "[bench]\ndims = [16, 16, 16]\nvoxels = 4\nfibers = 2\nthroughput_seeds = 2\nthroughput_samples = 2\n",
    )
    .unwrap();
    let csv = p(dir.path(), "bench.csv");
    let stdout = ok(&["--config", &config, "--threads", "1", "bench", "--csv", &csv]);
    assert!(stdout.contains("posterior_per_voxel"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "metric,unit,median,min,max,repetitions,shells,sphere_points,threads"
    );
    let metrics: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    for m in [
        "posterior_per_voxel",
        "network_forward_per_voxel",
        "network_forward_single_voxel",
        "fiber_uncached",
        "fiber_cached",
        "cache_speedup",
        "revisit_fraction",
        "fibers_per_second",
    ] {
        assert!(metrics.contains(&m), "missing {m}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["track", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let missing = p(dir.path(), "nope");
    let out = run(&["fit", "--input", &missing, "--out", &missing]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);

    let base = phantom(dir.path(), "ph", "1");
    let trk = p(dir.path(), "x.trk");
    let out = run(&["track", "--input", &base, "--mode", "learned", "--seed-fa", "0.5", "--out", &trk]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["track", "--input", &base, "--out", &trk]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["track", "--input", &base, "--seed-fa", "0.5", "--sigma", "0", "--out", &trk]);
    assert_eq!(out.status.code(), Some(2));

    let bad = p(dir.path(), "bad.toml");
    std::fs::write(&bad, "[tracker]\nunknown = 1\n").unwrap();
    assert_eq!(run(&["--config", &bad, "bench"]).status.code(), Some(2));
}
