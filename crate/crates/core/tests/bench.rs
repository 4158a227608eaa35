use std::path::PathBuf;

use nmr_tvcond::bench::{bench_datasets, run_bench, BenchConfig, MethodId, ModelSpec, CadzowSettings};
use nmr_tvcond::dataset::{make_dataset, write_dataset, Dataset, DatasetRequest, Split, TauSource};
use nmr_tvcond::metrics::{rmse, snr_db, SNR_CAP_DB};
use nmr_tvcond::nn::{save_weights, ArchConfig, Model};
use nmr_tvcond::plot::{emit_plot, render_plot};
use nmr_tvcond::report::{emit_report, render_report, ReportFormat, CSV_HEADER};
use nmr_tvcond::signal::PeakModel;
use nmr_tvcond::tv::TauGrid;
use nmr_tvcond::{Error, Exec, NoiseSpec};
use proptest::prelude::*;

fn dataset(k: usize, n: usize, snr: f64) -> Dataset {
    let peaks = PeakModel::default().sample_sets(k, 77);
    let grid = TauGrid::log_spaced(1e-2, 10.0, 9).unwrap();
    make_dataset(
        &DatasetRequest {
            peak_sets: &peaks,
            peak_model: None,
            n,
            noise: NoiseSpec::new(snr, 77),
            split: Split::Test,
            tau_grid: &grid,
            tau_source: TauSource::Validation,
        },
        Exec::Parallel,
    )
    .unwrap()
}

fn noiseless(ds: &Dataset) -> Dataset {
    let clean: Vec<f32> = (0..ds.len()).flat_map(|i| ds.clean_f32(i).to_vec()).collect();
    Dataset::from_parts(ds.manifest.clone(), clean.clone(), clean.clone(), clean).unwrap()
}

fn cfg(methods: &[MethodId]) -> BenchConfig {
    BenchConfig {
        methods: methods.to_vec(),
        repetitions: 1,
        ..BenchConfig::default()
    }
}

#[test]
fn tv_on_noiseless_data_is_perfect() {
    let ds = noiseless(&dataset(3, 128, 10.0));
    let c = BenchConfig {
        tau: Some(0.0),
        ..cfg(&[MethodId::Tv])
    };
    let report = bench_datasets(&[("clean".into(), ds)], &c).unwrap();
    let cell = &report.cells[0];
    assert_eq!(cell.snr_mean_db, SNR_CAP_DB);
    assert_eq!(cell.snr_median_db, SNR_CAP_DB);
    assert_eq!(cell.rmse_mean, 0.0);
}

#[test]
fn two_methods_fill_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for snr in [3.0, 10.0] {
        let p = dir.path().join(format!("test_{snr}"));
        write_dataset(&dataset(32, 256, snr), &p).unwrap();
        paths.push(p);
    }
    let methods = [MethodId::Tv, MethodId::Wt];
    let report = run_bench(&paths, &cfg(&methods)).unwrap();
    assert_eq!(report.cells.len(), 4);
    report.validate(&methods).unwrap();
    for c in &report.cells {
        assert_eq!(c.spectra, 32);
        assert!(c.snr_mean_db.is_finite() && c.rmse_mean > 0.0 && c.time_mean_s > 0.0);
    }
    assert!(report.snr_definition.contains("20*log10"));
    assert_eq!(report.datasets.len(), 2);
}

#[test]
fn learned_methods_need_matching_weights() {
    let dir = tempfile::tempdir().unwrap();
    let ds = vec![("d".to_string(), dataset(2, 64, 5.0))];
    match bench_datasets(&ds, &cfg(&[MethodId::Tvcondnet])) {
        Err(Error::MissingModel(m)) => assert!(m.contains("tvcondnet")),
        other => panic!("expected missing model, got {other:?}"),
    }
    let absent = BenchConfig {
        models: vec![ModelSpec {
            method: MethodId::Unet,
            input_snr_db: None,
            path: dir.path().join("nope.tvcw"),
        }],
        ..cfg(&[MethodId::Unet])
    };
    match bench_datasets(&ds, &absent) {
        Err(Error::MissingModel(m)) => assert!(m.contains("unet")),
        other => panic!("expected missing model, got {other:?}"),
    }
    let two_channel = dir.path().join("cond.tvcw");
    save_weights(&Model::zeros(ArchConfig::tvcondnet()).unwrap(), &two_channel).unwrap();
    let mismatched = BenchConfig {
        models: vec![ModelSpec {
            method: MethodId::Unet,
            input_snr_db: None,
            path: two_channel,
        }],
        ..cfg(&[MethodId::Unet])
    };
    assert!(matches!(
        bench_datasets(&ds, &mismatched),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn zero_network_scores_like_the_noisy_input() {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/zero.tvcw");
    let ds = dataset(4, 128, 5.0);
    let noisy: Vec<f64> = (0..4)
        .map(|i| snr_db(&ds.clean_row(i), &ds.noisy_row(i)).unwrap())
        .collect();
    let c = BenchConfig {
        models: vec![ModelSpec {
            method: MethodId::Tvcondnet,
            input_snr_db: Some(5.0),
            path: fixture,
        }],
        ..cfg(&[MethodId::Tvcondnet])
    };
    let report = bench_datasets(&[("d".into(), ds)], &c).unwrap();
    let mean = noisy.iter().sum::<f64>() / 4.0;
    assert!((report.cells[0].snr_mean_db - mean).abs() < 1e-12);
    assert!((report.datasets[0].noisy_snr_mean_db - mean).abs() < 1e-12);
}

#[test]
fn cadzow_runs_through_regenerated_fids() {
    let ds = dataset(2, 128, 10.0);
    let c = BenchConfig {
        cadzow: CadzowSettings {
            rank: None,
            iterations: 3,
            window: None,
        },
        ..cfg(&[MethodId::Cadzow])
    };
    let report = bench_datasets(&[("d".into(), ds)], &c).unwrap();
    assert!(report.cells[0].snr_mean_db.is_finite());
}

#[test]
fn tv_time_per_spectrum_is_small() {
    let ds = dataset(4, 2048, 3.0);
    let report = bench_datasets(
        &[("d".into(), ds)],
        &BenchConfig {
            repetitions: 5,
            ..cfg(&[MethodId::Tv])
        },
    )
    .unwrap();
    let t = report.cells[0].time_mean_s;
    assert!(t.is_finite() && t > 0.0 && t < 1.0, "{t}");
}

#[test]
fn report_files() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(3, 64, 3.0);
    let report =
        bench_datasets(&[("d".into(), ds)], &cfg(&[MethodId::Tv, MethodId::Wt])).unwrap();
    let csv = dir.path().join("r.csv");
    emit_report(&report, ReportFormat::Csv, Some(&csv)).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], CSV_HEADER);
    let json = dir.path().join("r.json");
    emit_report(&report, ReportFormat::from_path(&json), Some(&json)).unwrap();
    let back: nmr_tvcond::bench::BenchReport =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(back, report);
    let table = render_report(&report, ReportFormat::Text);
    for row in table.lines().filter(|l| !l.starts_with('#')) {
        assert_eq!(row.split_whitespace().count(), 6);
    }
    assert!(emit_report(&report, ReportFormat::Csv, Some(&dir.path().join("no/such/dir.csv"))).is_err());
}

fn polylines(svg: &str, group: &str) -> Vec<(String, String)> {
    let doc = roxmltree::Document::parse(svg).unwrap();
    let g = doc
        .descendants()
        .find(|n| n.attribute("id") == Some(group))
        .unwrap_or_else(|| panic!("no group {group}"));
    g.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .map(|n| {
            (
                n.attribute("data-series").unwrap().to_string(),
                n.attribute("points").unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn plot_is_well_formed_with_expected_panels() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(1, 256, 3.0);
    let (x, y) = (ds.clean_row(0), ds.noisy_row(0));
    let methods = vec![("tv".to_string(), ds.condition_row(0)), ("exact".to_string(), x.clone())];
    let path = dir.path().join("fig.svg");
    emit_plot(&x, &y, &methods, 40..90, &path).unwrap();
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(!svg.is_empty());
    let a = polylines(&svg, "panel-a");
    let b = polylines(&svg, "panel-b");
    assert_eq!(a.len(), 4);
    assert_eq!(b.len(), 4);
    assert_eq!(b[0].1.split(' ').count(), 50);

    let trace = polylines(&svg, "panel-c-exact");
    let ys: Vec<&str> = trace[0].1.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
    assert!(ys.iter().all(|v| *v == ys[0]), "zero error must be a flat line");
    assert_eq!(polylines(&svg, "panel-c-tv").len(), 1);
}

#[test]
fn full_zoom_repeats_main_view() {
    let ds = dataset(1, 128, 5.0);
    let (x, y) = (ds.clean_row(0), ds.noisy_row(0));
    let svg = render_plot(&x, &y, &[("tv".into(), ds.condition_row(0))], 0..128).unwrap();
    assert_eq!(polylines(&svg, "panel-a"), polylines(&svg, "panel-b"));
}

#[test]
fn plot_rejects_bad_input() {
    let x = vec![0.0, 1.0, 2.0, 3.0];
    assert!(matches!(render_plot(&x, &x, &[], 0..5), Err(Error::InvalidArgument(_))));
    assert!(matches!(render_plot(&x, &x[..3], &[], 0..3), Err(Error::InvalidArgument(_))));
}

proptest! {
    #[test]
    fn snr_and_rmse_agree_on_normalized_spectra(
        raw in prop::collection::vec(-10.0f64..10.0, 16..128),
        noise in prop::collection::vec(-1.0f64..1.0, 128),
    ) {
        let spec = nmr_tvcond::signal::normalize(&raw);
        prop_assume!(spec.is_ok());
        let x = spec.unwrap().into_values();
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, e)| a + e).collect();
        prop_assume!(x.iter().zip(&y).any(|(a, b)| a != b));
        let s = snr_db(&x, &y).unwrap();
        let r = rmse(&x, &y).unwrap();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let predicted = norm * 10f64.powf(-s / 20.0) / (x.len() as f64).sqrt();
        prop_assert!((predicted - r).abs() <= 1e-9 * r.max(1e-300));
    }

    #[test]
    fn metrics_ignore_sample_order(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..50),
        rot in 0usize..50,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let k = rot % x.len();
        let (mut xr, mut yr) = (x.clone(), y.clone());
        xr.rotate_left(k);
        yr.rotate_left(k);
        let (a, b) = (rmse(&x, &y).unwrap(), rmse(&xr, &yr).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        let (a, b) = (snr_db(&x, &y).unwrap(), snr_db(&xr, &yr).unwrap());
        prop_assert!(a == b || (a - b).abs() <= 1e-9);
    }
}
