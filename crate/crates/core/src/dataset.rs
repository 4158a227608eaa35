//! Datasets of (noisy, clean, TV condition) spectrum triples and the NMRD1
//! on-disk format.
//!
//! NMRD1 is two files sharing a stem: `<name>.json` holds the [`Manifest`],
//! `<name>.bin` holds the arrays X (clean), Y (noisy) and C (condition),
//! each K×n, row-major, little-endian `f32`, concatenated in that order.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::signal::{
    add_noise, fid_snr_db, fid_to_spectrum, synth_fid, Fid, NoiseSpec, PeakModel, PeakParams,
    Spectrum,
};
use crate::tv::{tune_tau_oracle, tune_tau_validation, tv_prox_values, TauGrid};

pub const DATASET_VERSION: &str = "NMRD1";

/// Tolerance on per-row mean and standard deviation checked on read.
const ROW_NORM_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

/// How the TV condition's τ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "protocol", content = "tau")]
pub enum TauSource {
    /// Per example, best grid τ against that example's clean spectrum.
    Oracle,
    /// One grid τ maximizing mean SNR over this dataset's own pairs.
    Validation,
    /// A τ chosen elsewhere, typically on a validation set.
    Fixed(f64),
}

impl TauSource {
    /// Train examples are oracle-tuned; valid/test share one validation τ.
    pub fn default_for(split: Split) -> Self {
        match split {
            Split::Train => TauSource::Oracle,
            Split::Valid | Split::Test => TauSource::Validation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub input_snr_db: f64,
    pub seed: u64,
    pub split: Split,
    /// Generator settings, when the peak lists were drawn from one.
    pub peak_model: Option<PeakModel>,
    /// Peak list of every stored example.
    pub peaks: Vec<Vec<PeakParams>>,
    /// Index into the requested peak sets; also keys the noise substream.
    pub source_index: Vec<u64>,
    pub tau_protocol: TauSource,
    pub tau_grid: TauGrid,
    /// τ used for each stored condition row.
    pub taus: Vec<f64>,
    /// FID-domain SNR of each example before quantization.
    pub realized_snr_db: Vec<f64>,
    /// Examples dropped because a spectrum had zero variance.
    pub skipped: usize,
}

const REQUIRED_FIELDS: &[&str] = &[
    "format_version",
    "n",
    "K",
    "input_snr_db",
    "seed",
    "split",
    "peak_model",
    "peaks",
    "source_index",
    "tau_protocol",
    "tau_grid",
    "taus",
    "realized_snr_db",
    "skipped",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    clean: Vec<f32>,
    noisy: Vec<f32>,
    condition: Vec<f32>,
}

/// Noise substream for example `index`.
pub fn example_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.manifest.k
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.k == 0
    }

    pub fn n(&self) -> usize {
        self.manifest.n
    }

    fn row(data: &[f32], n: usize, i: usize) -> &[f32] {
        &data[i * n..(i + 1) * n]
    }

    pub fn clean_f32(&self, i: usize) -> &[f32] {
        Self::row(&self.clean, self.n(), i)
    }

    pub fn noisy_f32(&self, i: usize) -> &[f32] {
        Self::row(&self.noisy, self.n(), i)
    }

    pub fn condition_f32(&self, i: usize) -> &[f32] {
        Self::row(&self.condition, self.n(), i)
    }

    pub fn clean_row(&self, i: usize) -> Vec<f64> {
        widen(self.clean_f32(i))
    }

    pub fn noisy_row(&self, i: usize) -> Vec<f64> {
        widen(self.noisy_f32(i))
    }

    pub fn condition_row(&self, i: usize) -> Vec<f64> {
        widen(self.condition_f32(i))
    }

    /// Clean and noisy FIDs of example `i`, regenerated from the manifest.
    pub fn regenerate_fids(&self, i: usize) -> Result<(Fid, Fid)> {
        let m = &self.manifest;
        let clean = synth_fid(&m.peaks[i], m.n)?;
        let spec = NoiseSpec::new(m.input_snr_db, example_seed(m.seed, m.source_index[i]));
        let (noisy, _) = add_noise(&clean, spec)?;
        Ok((clean, noisy))
    }

    /// The single τ shared by all rows, if the protocol has one.
    pub fn shared_tau(&self) -> Option<f64> {
        match self.manifest.tau_protocol {
            TauSource::Oracle => None,
            _ => self.manifest.taus.first().copied(),
        }
    }

    /// Rebuild from parts, validating shapes and values.
    pub fn from_parts(
        manifest: Manifest,
        clean: Vec<f32>,
        noisy: Vec<f32>,
        condition: Vec<f32>,
    ) -> Result<Self> {
        let ds = Self {
            manifest,
            clean,
            noisy,
            condition,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if m.format_version != DATASET_VERSION {
            return Err(Error::Version {
                expected: DATASET_VERSION,
                found: m.format_version.clone(),
            });
        }
        let cells = m.k * m.n;
        for (name, arr) in [("X", &self.clean), ("Y", &self.noisy), ("C", &self.condition)] {
            if arr.len() != cells {
                return Err(Error::ShapeMismatch(format!(
                    "array {name} holds {} values, expected K·n = {cells}",
                    arr.len()
                )));
            }
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("array {name}")));
            }
        }
        for (field, len) in [
            ("peaks", m.peaks.len()),
            ("source_index", m.source_index.len()),
            ("taus", m.taus.len()),
            ("realized_snr_db", m.realized_snr_db.len()),
        ] {
            if len != m.k {
                return Err(Error::ShapeMismatch(format!(
                    "manifest field `{field}` has {len} entries, expected K = {}",
                    m.k
                )));
            }
        }
        for i in 0..m.k {
            for (name, row) in [("X", self.clean_f32(i)), ("Y", self.noisy_f32(i))] {
                let (mean, std) = row_moments(row);
                if mean.abs() > ROW_NORM_TOL || (std - 1.0).abs() > ROW_NORM_TOL {
                    return Err(Error::Format(format!(
                        "row {i} of {name} is not normalized (mean {mean:e}, std {std})"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

fn row_moments(row: &[f32]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = row
        .iter()
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

/// What a caller asks [`make_dataset`] for.
#[derive(Debug, Clone)]
pub struct DatasetRequest<'a> {
    pub peak_sets: &'a [Vec<PeakParams>],
    /// Recorded in the manifest when the peak sets came from a generator.
    pub peak_model: Option<PeakModel>,
    pub n: usize,
    pub noise: NoiseSpec,
    pub split: Split,
    pub tau_grid: &'a TauGrid,
    pub tau_source: TauSource,
}

struct Example {
    index: usize,
    clean: Spectrum,
    noisy: Spectrum,
    realized_snr_db: f64,
}

fn make_example(req: &DatasetRequest<'_>, index: usize) -> Result<Option<Example>> {
    let clean_fid = synth_fid(&req.peak_sets[index], req.n)?;
    let spec = NoiseSpec::new(
        req.noise.input_snr_db,
        example_seed(req.noise.seed, index as u64),
    );
    let (noisy_fid, _) = add_noise(&clean_fid, spec)?;
    let clean = fid_to_spectrum(&clean_fid);
    let noisy = fid_to_spectrum(&noisy_fid);
    match (clean, noisy) {
        (Ok(clean), Ok(noisy)) => Ok(Some(Example {
            index,
            clean,
            noisy,
            realized_snr_db: fid_snr_db(&clean_fid, &noisy_fid),
        })),
        (Err(Error::DegenerateInput(_)), _) | (_, Err(Error::DegenerateInput(_))) => Ok(None),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// Generate a dataset. Output is bit-identical for fixed inputs whatever
/// `exec` is.
pub fn make_dataset(req: &DatasetRequest<'_>, exec: Exec) -> Result<Dataset> {
    if req.peak_sets.is_empty() {
        return Err(Error::invalid("no peak sets given"));
    }
    if let TauSource::Fixed(t) = req.tau_source {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::invalid(format!("fixed tau must be finite and ≥ 0, got {t}")));
        }
    }
    let generated = exec.map(req.peak_sets.len(), |i| make_example(req, i));
    let mut examples = Vec::with_capacity(generated.len());
    for ex in generated {
        if let Some(ex) = ex? {
            examples.push(ex);
        }
    }
    let skipped = req.peak_sets.len() - examples.len();
    if skipped > 0 {
        warn!("skipped {skipped} degenerate example(s)");
    }

    let (taus, conditions): (Vec<f64>, Vec<Vec<f64>>) = match req.tau_source {
        TauSource::Oracle => {
            let tuned = exec.map(examples.len(), |i| {
                let ex = &examples[i];
                tune_tau_oracle(&ex.noisy, &ex.clean, req.tau_grid, Exec::Sequential)
                    .map(|(t, c)| (t, c.into_values()))
            });
            tuned.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip()
        }
        TauSource::Validation | TauSource::Fixed(_) => {
            let tau = match req.tau_source {
                TauSource::Fixed(t) => t,
                _ if examples.is_empty() => req.tau_grid.values()[0],
                _ => {
                    let pairs: Vec<_> = examples
                        .iter()
                        .map(|e| (e.noisy.clone(), e.clean.clone()))
                        .collect();
                    tune_tau_validation(&pairs, req.tau_grid, exec)?
                }
            };
            let conds = exec.map(examples.len(), |i| {
                tv_prox_values(examples[i].noisy.values(), tau)
            });
            let conds = conds.into_iter().collect::<Result<Vec<_>>>()?;
            (vec![tau; examples.len()], conds)
        }
    };

    let quantize = |rows: &mut Vec<f32>, v: &[f64]| rows.extend(v.iter().map(|&x| x as f32));
    let cells = examples.len() * req.n;
    let (mut clean, mut noisy, mut condition) = (
        Vec::with_capacity(cells),
        Vec::with_capacity(cells),
        Vec::with_capacity(cells),
    );
    for (ex, c) in examples.iter().zip(&conditions) {
        quantize(&mut clean, ex.clean.values());
        quantize(&mut noisy, ex.noisy.values());
        quantize(&mut condition, c);
    }
    let manifest = Manifest {
        format_version: DATASET_VERSION.to_string(),
        n: req.n,
        k: examples.len(),
        input_snr_db: req.noise.input_snr_db,
        seed: req.noise.seed,
        split: req.split,
        peak_model: req.peak_model.clone(),
        peaks: examples
            .iter()
            .map(|e| req.peak_sets[e.index].clone())
            .collect(),
        source_index: examples.iter().map(|e| e.index as u64).collect(),
        tau_protocol: req.tau_source,
        tau_grid: req.tau_grid.clone(),
        taus,
        realized_snr_db: examples.iter().map(|e| e.realized_snr_db).collect(),
        skipped,
    };
    Dataset::from_parts(manifest, clean, noisy, condition)
}

/// `<stem>.json` and `<stem>.bin` for a path given with or without either
/// extension.
pub fn dataset_paths(path: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let path = path.as_ref();
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut json = stem.clone().into_os_string();
    json.push(".json");
    let mut bin = stem.into_os_string();
    bin.push(".bin");
    (json.into(), bin.into())
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let (json_path, bin_path) = dataset_paths(path);
    let mut json = serde_json::to_vec_pretty(&ds.manifest)
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;
    json.push(b'\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let mut blob = Vec::with_capacity(4 * (ds.clean.len() + ds.noisy.len() + ds.condition.len()));
    for arr in [&ds.clean, &ds.noisy, &ds.condition] {
        for v in arr.iter() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(&bin_path, blob).map_err(|e| Error::io(&bin_path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let (json_path, _) = dataset_paths(path);
    let text = fs::read(&json_path).map_err(|e| Error::io(&json_path, e))?;
    parse_manifest(&text)
}

fn parse_manifest(text: &[u8]) -> Result<Manifest> {
    let value: serde_json::Value =
        serde_json::from_slice(text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Format("manifest is not a JSON object".into()))?;
    match obj.get("format_version").and_then(|v| v.as_str()) {
        Some(DATASET_VERSION) => {}
        Some(other) => {
            return Err(Error::Version {
                expected: DATASET_VERSION,
                found: other.to_string(),
            })
        }
        None => return Err(Error::MissingField("format_version".into())),
    }
    if let Some(missing) = REQUIRED_FIELDS.iter().find(|f| !obj.contains_key(**f)) {
        return Err(Error::MissingField(missing.to_string()));
    }
    serde_json::from_value(value).map_err(|e| Error::Format(format!("manifest: {e}")))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let (json_path, bin_path) = dataset_paths(path);
    let manifest = read_manifest(&json_path)?;
    let blob = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let cells = manifest.k * manifest.n;
    if blob.len() != 3 * cells * 4 {
        return Err(Error::ShapeMismatch(format!(
            "{} holds {} bytes, expected 3·K·n·4 = {}",
            bin_path.display(),
            blob.len(),
            3 * cells * 4
        )));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    let mut take = || (&mut values).take(cells).collect::<Vec<f32>>();
    let clean = take();
    let noisy = take();
    let condition = take();
    Dataset::from_parts(manifest, clean, noisy, condition)
}
