//! Benchmark harness: run every method over test datasets and score it.
//!
//! Denoising and timing run in a single execution context, one spectrum at
//! a time, so timings are free of thread contention. Metrics are computed
//! afterwards, optionally in parallel.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::{read_dataset, Dataset, Split};
use crate::error::{Error, Result};
use crate::hankel::{cadzow_denoise, estimate_rank, HankelConfig};
use crate::metrics::{cap_snr, mean, median, rmse, snr_db};
use crate::nn::{self, load_weights, Model};
use crate::par::Exec;
use crate::signal::fid_to_spectrum;
use crate::tv::tv_prox_values;
use crate::wavelet::{wavelet_denoise_values, WaveletConfig};

pub const SNR_DEFINITION: &str =
    "SNR = 20*log10(||reference||_2 / ||estimate - reference||_2) on normalized spectra; perfect reconstructions reported as 300 dB";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodId {
    Tv,
    Wt,
    Cadzow,
    Unet,
    Tvcondnet,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::Tv,
        MethodId::Wt,
        MethodId::Cadzow,
        MethodId::Unet,
        MethodId::Tvcondnet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Tv => "tv",
            MethodId::Wt => "wt",
            MethodId::Cadzow => "cadzow",
            MethodId::Unet => "unet",
            MethodId::Tvcondnet => "tvcondnet",
        }
    }

    /// Input channels of the network behind a learned method.
    pub fn network_inputs(self) -> Option<usize> {
        match self {
            MethodId::Unet => Some(1),
            MethodId::Tvcondnet => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// Weights for a learned method, optionally restricted to one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub method: MethodId,
    pub input_snr_db: Option<f64>,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CadzowSettings {
    /// `None` estimates the rank from the singular-value gap per spectrum.
    pub rank: Option<usize>,
    pub iterations: usize,
    pub window: Option<usize>,
}

impl Default for CadzowSettings {
    fn default() -> Self {
        Self {
            rank: None,
            iterations: 10,
            window: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub methods: Vec<MethodId>,
    /// Overrides the dataset's τ for `tv` and for the `tvcondnet` condition.
    pub tau: Option<f64>,
    pub wavelet: WaveletConfig,
    pub cadzow: CadzowSettings,
    pub models: Vec<ModelSpec>,
    /// Timed repetitions per spectrum; the median is kept.
    pub repetitions: usize,
    pub exec: Exec,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![MethodId::Tv, MethodId::Wt],
            tau: None,
            wavelet: WaveletConfig::default(),
            cadzow: CadzowSettings::default(),
            models: Vec::new(),
            repetitions: 5,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: String,
    pub split: Split,
    pub input_snr_db: f64,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Mean SNR of the noisy spectra against the clean ones.
    pub noisy_snr_mean_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub method: MethodId,
    pub input_snr_db: f64,
    pub snr_mean_db: f64,
    pub snr_median_db: f64,
    pub rmse_mean: f64,
    pub time_mean_s: f64,
    pub spectra: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub snr_definition: String,
    pub environment: String,
    pub datasets: Vec<DatasetRef>,
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    pub fn cell(&self, method: MethodId, input_snr_db: f64) -> Option<&BenchCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.input_snr_db == input_snr_db)
    }

    /// Every (method, level) cell present, all times positive.
    pub fn validate(&self, methods: &[MethodId]) -> Result<()> {
        for d in &self.datasets {
            for &m in methods {
                let cell = self.cell(m, d.input_snr_db).ok_or_else(|| {
                    Error::invalid(format!("report lacks {m} at {} dB", d.input_snr_db))
                })?;
                if cell.time_mean_s.is_nan() || cell.time_mean_s <= 0.0 {
                    return Err(Error::invalid(format!("non-positive time for {m}")));
                }
            }
        }
        Ok(())
    }
}

pub fn environment_note() -> String {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    format!(
        "{}-{}, {threads} hardware threads, timings single-threaded, median of repetitions per spectrum",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// One method made ready to run on dataset rows. Learned methods hold their
/// loaded network.
pub struct Denoiser {
    method: MethodId,
    kind: Prepared,
}

enum Prepared {
    Tv,
    Wt,
    Cadzow,
    Net { model: Model, conditioned: bool },
}

impl Denoiser {
    /// Resolve `method` for a dataset at `input_snr_db`. Weight files bound to
    /// that level win over ones without a level.
    pub fn new(method: MethodId, input_snr_db: f64, cfg: &BenchConfig) -> Result<Self> {
        Ok(Self {
            method,
            kind: prepare(method, input_snr_db, cfg)?,
        })
    }

    pub fn method(&self) -> MethodId {
        self.method
    }

    /// Denoise row `i` of `ds`.
    pub fn apply(&self, ds: &Dataset, i: usize, cfg: &BenchConfig) -> Result<Vec<f64>> {
        if i >= ds.len() {
            return Err(Error::invalid(format!(
                "row {i} out of range for a dataset of {}",
                ds.len()
            )));
        }
        Ok(run_method(&self.kind, ds, i, cfg, 1)?.0)
    }
}

fn prepare(method: MethodId, level: f64, cfg: &BenchConfig) -> Result<Prepared> {
    let Some(inputs) = method.network_inputs() else {
        return Ok(match method {
            MethodId::Tv => Prepared::Tv,
            MethodId::Wt => Prepared::Wt,
            _ => Prepared::Cadzow,
        });
    };
    let spec = cfg
        .models
        .iter()
        .find(|s| s.method == method && s.input_snr_db == Some(level))
        .or_else(|| {
            cfg.models
                .iter()
                .find(|s| s.method == method && s.input_snr_db.is_none())
        })
        .ok_or_else(|| Error::MissingModel(format!("{method}: no weight file given")))?;
    let model = load_weights(&spec.path).map_err(|e| match e {
        Error::Io { .. } => Error::MissingModel(format!("{method}: {e}")),
        e => Error::invalid(format!(
            "weights for `{method}` at {}: {e}",
            spec.path.display()
        )),
    })?;
    if model.arch().in_channels != inputs {
        return Err(Error::invalid(format!(
            "`{method}` needs a {inputs}-channel network, {} has {}",
            spec.path.display(),
            model.arch().in_channels
        )));
    }
    Ok(Prepared::Net {
        model,
        conditioned: inputs == 2,
    })
}

fn timed<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, Duration)> {
    let mut times = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let out = f()?;
        times.push(start.elapsed());
        last = Some(out);
    }
    times.sort();
    Ok((last.expect("at least one repetition"), times[times.len() / 2]))
}

fn run_method(
    prepared: &Prepared,
    ds: &Dataset,
    i: usize,
    cfg: &BenchConfig,
    reps: usize,
) -> Result<(Vec<f64>, Duration)> {
    let y = ds.noisy_row(i);
    let tau = cfg.tau.unwrap_or(ds.manifest.taus[i]);
    match prepared {
        Prepared::Tv => timed(reps, || tv_prox_values(&y, tau)),
        Prepared::Wt => timed(reps, || wavelet_denoise_values(&y, &cfg.wavelet)),
        Prepared::Cadzow => {
            let (_, noisy_fid) = ds.regenerate_fids(i)?;
            timed(reps, || {
                let rank = match cfg.cadzow.rank {
                    Some(r) => r,
                    None => estimate_rank(&noisy_fid, cfg.cadzow.window)?,
                };
                let hc = HankelConfig {
                    rank,
                    iterations: cfg.cadzow.iterations,
                    window: cfg.cadzow.window,
                };
                let fid = cadzow_denoise(&noisy_fid, &hc)?;
                Ok(fid_to_spectrum(&fid)?.into_values())
            })
        }
        Prepared::Net { model, conditioned } => timed(reps, || {
            if *conditioned {
                let c = tv_prox_values(&y, tau)?;
                nn::denoise(model, &y, Some(&c))
            } else {
                nn::denoise(model, &y, None)
            }
        }),
    }
}

fn score(
    method: MethodId,
    ds: &Dataset,
    outputs: &[Vec<f64>],
    times: &[Duration],
    exec: Exec,
) -> Result<BenchCell> {
    let scored: Vec<Result<(f64, f64)>> = exec.map(outputs.len(), |i| {
        let x = ds.clean_row(i);
        Ok((cap_snr(snr_db(&x, &outputs[i])?), rmse(&x, &outputs[i])?))
    });
    let scored = scored.into_iter().collect::<Result<Vec<_>>>()?;
    let snrs: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let rmses: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let secs: Vec<f64> = times
        .iter()
        .map(|t| t.as_secs_f64().max(1e-9))
        .collect();
    Ok(BenchCell {
        method,
        input_snr_db: ds.manifest.input_snr_db,
        snr_mean_db: mean(&snrs),
        snr_median_db: median(&snrs),
        rmse_mean: mean(&rmses),
        time_mean_s: mean(&secs),
        spectra: outputs.len(),
    })
}

/// Benchmark on already-loaded datasets.
pub fn bench_datasets(datasets: &[(String, Dataset)], cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    if let Some(t) = cfg.tau {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::invalid(format!("tau must be finite and ≥ 0, got {t}")));
        }
    }
    let mut refs = Vec::new();
    let mut cells = Vec::new();
    for (path, ds) in datasets {
        if ds.is_empty() {
            return Err(Error::invalid(format!("dataset {path} is empty")));
        }
        let level = ds.manifest.input_snr_db;
        let noisy_snrs = (0..ds.len())
            .map(|i| snr_db(&ds.clean_row(i), &ds.noisy_row(i)).map(cap_snr))
            .collect::<Result<Vec<_>>>()?;
        refs.push(DatasetRef {
            path: path.clone(),
            split: ds.manifest.split,
            input_snr_db: level,
            n: ds.n(),
            k: ds.len(),
            noisy_snr_mean_db: mean(&noisy_snrs),
        });
        for &method in &cfg.methods {
            let denoiser = Denoiser::new(method, level, cfg)?;
            let mut outputs = Vec::with_capacity(ds.len());
            let mut times = Vec::with_capacity(ds.len());
            for i in 0..ds.len() {
                let (out, t) = run_method(&denoiser.kind, ds, i, cfg, cfg.repetitions)?;
                outputs.push(out);
                times.push(t);
            }
            cells.push(score(method, ds, &outputs, &times, cfg.exec)?);
        }
    }
    let report = BenchReport {
        snr_definition: SNR_DEFINITION.to_string(),
        environment: environment_note(),
        datasets: refs,
        cells,
    };
    report.validate(&cfg.methods)?;
    Ok(report)
}

/// Read NMRD1 datasets (one per noise level) and benchmark them.
pub fn run_bench(dataset_paths: &[impl AsRef<Path>], cfg: &BenchConfig) -> Result<BenchReport> {
    let datasets = dataset_paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            Ok((p.display().to_string(), read_dataset(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    bench_datasets(&datasets, cfg)
}
