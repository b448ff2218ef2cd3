use fibertrack::dwi::{generate_phantom, Geometry, GradientTable, PhantomSpec};
use fibertrack::io::{read_raw, read_trk, read_volume, trk_bytes, write_raw, write_volume, TrkHeader, VolumeHeader};
use fibertrack::nn::{checkpoint, Architecture, Network};
use fibertrack::tract::Streamline;
use fibertrack::Error;

#[test]
fn dwi_volume_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PhantomSpec::new(Geometry::QuarterArc, 0.03, 2);
    let (volume, _) = generate_phantom(&spec, [18, 17, 16], &GradientTable::dense(1000.0, 12)).unwrap();
    let base = dir.path().join("dwi");
    write_volume(&base, &volume).unwrap();
    let back = read_volume(&base).unwrap();
    assert_eq!(back.dims(), volume.dims());
    // gradients are renormalized on read, which can move the last bit
    for (a, b) in back.table().iter().zip(volume.table().iter()) {
        assert_eq!(a.b_value, b.b_value);
        assert!((0..3).all(|k| (a.gradient[k] - b.gradient[k]).abs() < 1e-15));
    }
    assert!(back.data().iter().zip(volume.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn truncated_payload_is_a_size_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("v");
    write_raw(&base, &VolumeHeader::new([2, 2, 2, 1], [1.0; 3]), &[0.5; 8]).unwrap();
    let raw = dir.path().join("v.raw");
    let mut bytes = std::fs::read(&raw).unwrap();
    bytes.truncate(28);
    std::fs::write(&raw, bytes).unwrap();
    assert!(matches!(read_raw(&base), Err(Error::SizeMismatch { expected: 32, actual: 28, .. })));
}

#[test]
fn trk_sizes_and_counts() {
    let header = TrkHeader::new([10, 10, 10], [2.0; 3]).unwrap();
    assert_eq!(trk_bytes(&header, &[]).len(), 1000);
    let line = Streamline { points: vec![[1.0, 1.0, 1.0]; 2], voxels: vec![[0, 0, 0]; 2] };
    let bytes = trk_bytes(&header, &[line.clone(), line]);
    assert_eq!(bytes.len(), 1000 + 2 * (4 + 24));
    let file = read_trk(&bytes).unwrap();
    assert_eq!(file.header.n_count, 2);
    assert_eq!(file.streamlines, vec![vec![[1.0f32; 3]; 2]; 2]);
    assert!(read_trk(&bytes[..1010]).is_err());
    assert!(TrkHeader::new([40_000, 1, 1], [1.0; 3]).is_err());
}

#[test]
fn checkpoint_rejects_corruption() {
    let net = Network::<f32>::init(&Architecture::shrunken(), 3).unwrap();
    let bytes = checkpoint::to_bytes(&net);
    assert_eq!(&bytes[..4], b"FTNN");
    let back: Network<f32> = checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(checkpoint::to_bytes(&back), bytes);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(checkpoint::from_bytes::<f32>(&bad).is_err());
    assert!(checkpoint::from_bytes::<f32>(&bytes[..bytes.len() - 1]).is_err());
}
