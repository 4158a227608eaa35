use std::fs;
use std::path::Path;

use nmr_tvcond::dataset::{
    dataset_paths, make_dataset, read_dataset, read_manifest, write_dataset, Dataset,
    DatasetRequest, Split, TauSource,
};
use nmr_tvcond::metrics::snr_db;
use nmr_tvcond::signal::{fid_snr_db, PeakModel};
use nmr_tvcond::tv::{tv_prox_values, TauGrid};
use nmr_tvcond::{Error, Exec, NoiseSpec, PeakParams};

fn build(
    k: usize,
    n: usize,
    snr: f64,
    seed: u64,
    split: Split,
    grid: &TauGrid,
    exec: Exec,
) -> Dataset {
    let model = PeakModel::default();
    let peaks = model.sample_sets(k, seed);
    let req = DatasetRequest {
        peak_sets: &peaks,
        peak_model: Some(model),
        n,
        noise: NoiseSpec::new(snr, seed),
        split,
        tau_grid: grid,
        tau_source: TauSource::default_for(split),
    };
    make_dataset(&req, exec).unwrap()
}

fn files(dir: &Path, name: &str, ds: &Dataset) -> (Vec<u8>, Vec<u8>) {
    let stem = dir.join(name);
    write_dataset(ds, &stem).unwrap();
    let (j, b) = dataset_paths(&stem);
    (fs::read(j).unwrap(), fs::read(b).unwrap())
}

fn small_grid() -> TauGrid {
    TauGrid::log_spaced(1e-2, 10.0, 9).unwrap()
}

#[test]
fn byte_identical_across_runs_and_exec() {
    let dir = tempfile::tempdir().unwrap();
    let grid = small_grid();
    for split in [Split::Train, Split::Test] {
        let a = files(dir.path(), "a", &build(4, 256, 5.0, 7, split, &grid, Exec::Parallel));
        let b = files(dir.path(), "b", &build(4, 256, 5.0, 7, split, &grid, Exec::Parallel));
        let c = files(dir.path(), "c", &build(4, 256, 5.0, 7, split, &grid, Exec::Sequential));
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}

#[test]
fn write_read_round_trip_and_blob_size() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build(5, 128, 10.0, 3, Split::Valid, &small_grid(), Exec::Parallel);
    let stem = dir.path().join("set.json");
    write_dataset(&ds, &stem).unwrap();
    let (_, bin) = dataset_paths(&stem);
    assert_eq!(fs::metadata(&bin).unwrap().len(), (3 * 5 * 128 * 4) as u64);
    let back = read_dataset(dir.path().join("set")).unwrap();
    assert_eq!(back, ds);
    assert_eq!(read_manifest(&bin).unwrap(), ds.manifest);
}

#[test]
fn corrupt_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build(2, 64, 10.0, 1, Split::Test, &small_grid(), Exec::Parallel);
    let stem = dir.path().join("d");
    write_dataset(&ds, &stem).unwrap();
    let (json, bin) = dataset_paths(&stem);
    let manifest = fs::read_to_string(&json).unwrap();
    let blob = fs::read(&bin).unwrap();

    fs::write(&bin, &blob[..blob.len() - 4]).unwrap();
    assert!(matches!(read_dataset(&stem), Err(Error::ShapeMismatch(_))));

    let mut nan = blob.clone();
    nan[4 * 64 * 2 + 8..4 * 64 * 2 + 12].copy_from_slice(&f32::NAN.to_le_bytes());
    fs::write(&bin, &nan).unwrap();
    assert!(matches!(read_dataset(&stem), Err(Error::NonFinite(_))));
    fs::write(&bin, &blob).unwrap();

    fs::write(&json, manifest.replace("\"NMRD1\"", "\"NMRD9\"")).unwrap();
    match read_dataset(&stem) {
        Err(Error::Version { found, .. }) => assert_eq!(found, "NMRD9"),
        other => panic!("expected version error, got {other:?}"),
    }

    let mut value: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    value.as_object_mut().unwrap().remove("tau_grid");
    fs::write(&json, value.to_string()).unwrap();
    match read_dataset(&stem) {
        Err(Error::MissingField(f)) => assert_eq!(f, "tau_grid"),
        other => panic!("expected missing field, got {other:?}"),
    }

    let mut value: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    value["K"] = 3.into();
    fs::write(&json, value.to_string()).unwrap();
    assert!(matches!(read_dataset(&stem), Err(Error::ShapeMismatch(_))));
}

#[test]
fn rows_are_normalized_and_conditions_rederive() {
    let ds = build(6, 512, 5.0, 11, Split::Train, &small_grid(), Exec::Parallel);
    assert_eq!(ds.len(), 6);
    for i in 0..ds.len() {
        for row in [ds.clean_row(i), ds.noisy_row(i)] {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let std = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-6 && (std - 1.0).abs() < 1e-6);
        }
        let c = tv_prox_values(&ds.noisy_row(i), ds.manifest.taus[i]).unwrap();
        for (a, b) in c.iter().zip(ds.condition_row(i)) {
            assert!((a - b).abs() < 1e-5, "row {i}");
        }
    }
}

#[test]
fn realized_snr_matches_target() {
    for snr in [3.0, 5.0, 10.0, 15.0] {
        let ds = build(8, 256, snr, 21, Split::Test, &small_grid(), Exec::Parallel);
        for i in 0..ds.len() {
            assert!((ds.manifest.realized_snr_db[i] - snr).abs() < 1e-6);
            let (clean, noisy) = ds.regenerate_fids(i).unwrap();
            assert!((fid_snr_db(&clean, &noisy) - snr).abs() < 1e-6);
        }
    }
}

#[test]
fn oracle_taus_are_per_example_and_shared_otherwise() {
    let grid = small_grid();
    let train = build(6, 256, 3.0, 5, Split::Train, &grid, Exec::Parallel);
    assert_eq!(train.shared_tau(), None);
    assert!(train.manifest.taus.iter().all(|t| grid.values().contains(t)));
    let test = build(6, 256, 3.0, 5, Split::Test, &grid, Exec::Parallel);
    let tau = test.shared_tau().unwrap();
    assert!(test.manifest.taus.iter().all(|&t| t == tau));
}

#[test]
fn fixed_tau_from_validation_is_used() {
    let peaks = PeakModel::default().sample_sets(3, 2);
    let grid = small_grid();
    let req = DatasetRequest {
        peak_sets: &peaks,
        peak_model: None,
        n: 128,
        noise: NoiseSpec::new(5.0, 2),
        split: Split::Test,
        tau_grid: &grid,
        tau_source: TauSource::Fixed(0.37),
    };
    let ds = make_dataset(&req, Exec::Parallel).unwrap();
    assert_eq!(ds.shared_tau(), Some(0.37));
    let bad = DatasetRequest {
        tau_source: TauSource::Fixed(-1.0),
        ..req
    };
    assert!(make_dataset(&bad, Exec::Parallel).is_err());
}

#[test]
fn vanishing_noise_with_zero_tau() {
    let grid = TauGrid::new(vec![0.0, 0.1, 1.0]).unwrap();
    for split in [Split::Train, Split::Test] {
        let ds = build(1, 256, 300.0, 4, split, &grid, Exec::Parallel);
        assert_eq!(ds.manifest.taus, vec![0.0]);
        let (x, y, c) = (ds.clean_row(0), ds.noisy_row(0), ds.condition_row(0));
        for j in 0..x.len() {
            assert!((x[j] - y[j]).abs() < 1e-6);
        }
        assert_eq!(c, y);
    }
}

#[test]
fn degenerate_examples_are_skipped() {
    let good = PeakModel::default().sample_sets(2, 9);
    let imaginary_dc = vec![PeakParams::new(1.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2)];
    let peaks = vec![good[0].clone(), imaginary_dc, good[1].clone()];
    let grid = small_grid();
    let req = DatasetRequest {
        peak_sets: &peaks,
        peak_model: None,
        n: 64,
        noise: NoiseSpec::new(300.0, 0),
        split: Split::Train,
        tau_grid: &grid,
        tau_source: TauSource::Oracle,
    };
    let ds = make_dataset(&req, Exec::Parallel).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.manifest.skipped, 1);
    assert_eq!(ds.manifest.source_index, vec![0, 2]);
}

#[test]
fn tv_condition_improves_snr_at_3_db() {
    let grid = TauGrid::default();
    let ds = build(64, 512, 3.0, 17, Split::Test, &grid, Exec::Parallel);
    let k = ds.len() as f64;
    let (mut noisy, mut cond) = (0.0, 0.0);
    for i in 0..ds.len() {
        let x = ds.clean_row(i);
        noisy += snr_db(&x, &ds.noisy_row(i)).unwrap() / k;
        cond += snr_db(&x, &ds.condition_row(i)).unwrap() / k;
    }
    assert!(cond > 3.0, "condition SNR {cond}");
    assert!(cond > noisy, "condition {cond} vs noisy {noisy}");
}

#[test]
fn empty_request_rejected() {
    let grid = small_grid();
    let req = DatasetRequest {
        peak_sets: &[],
        peak_model: None,
        n: 64,
        noise: NoiseSpec::new(3.0, 0),
        split: Split::Test,
        tau_grid: &grid,
        tau_source: TauSource::Validation,
    };
    assert!(make_dataset(&req, Exec::Sequential).is_err());
}
