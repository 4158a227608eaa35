use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use nmr_tvcond::bench::{run_bench, BenchConfig, CadzowSettings, Denoiser, MethodId, ModelSpec};
use nmr_tvcond::dataset::{
    make_dataset, read_dataset, write_dataset, Dataset, DatasetRequest, Split, TauSource,
};
use nmr_tvcond::metrics::{cap_snr, rmse, snr_db};
use nmr_tvcond::plot::emit_plot;
use nmr_tvcond::report::{emit_report, ReportFormat};
use nmr_tvcond::signal::{add_noise, fid_snr_db, fid_to_spectrum, synth_fid, PeakModel};
use nmr_tvcond::tv::{tune_tau_oracle, tune_tau_validation, TauGrid};
use nmr_tvcond::wavelet::{Threshold, ThresholdMode, WaveletConfig};
use nmr_tvcond::{Exec, NoiseSpec};

#[derive(Parser)]
#[command(name = "tvcond", version, about = "Denoise synthetic 1D NMR spectra and benchmark the methods")]
struct Cli {
    /// Base seed for peak lists and noise.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// FID-domain input SNR in dB.
    #[arg(long = "snr-db", global = true, default_value_t = 3.0, allow_negative_numbers = true)]
    snr_db: f64,
    /// Output path. Commands that can print fall back to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one random example and write its FID and spectra.
    Synth {
        #[arg(long, default_value_t = 2048)]
        n: usize,
    },
    /// Generate an NMRD1 dataset at one noise level.
    MakeDataset {
        #[arg(long, value_parser = parse_split)]
        split: Split,
        /// Number of examples. Defaults to 512 for train and 32 otherwise.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 2048)]
        n: usize,
        /// Use the τ tuned on this validation dataset for every condition row.
        #[arg(long, conflicts_with = "tau_protocol")]
        tau_from: Option<PathBuf>,
        /// How the condition τ is picked. Defaults to oracle for train and
        /// validation otherwise.
        #[arg(long, value_enum)]
        tau_protocol: Option<Protocol>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Denoise one dataset row with one or more methods.
    Denoise {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[command(flatten)]
        methods: MethodArgs,
    },
    /// Score methods on test datasets, one per noise level.
    Bench {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        #[command(flatten)]
        methods: MethodArgs,
        /// Timed repetitions per spectrum.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Report format. Guessed from the --out extension when omitted.
        #[arg(long, value_parser = parse_format)]
        format: Option<ReportFormat>,
    },
    /// Draw clean, noisy and denoised spectra for one row as SVG.
    Plot {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Sample range of the inset as START:END. Defaults to a window
        /// around the tallest clean peak.
        #[arg(long, value_parser = parse_range)]
        zoom: Option<Range<usize>>,
        #[command(flatten)]
        methods: MethodArgs,
    },
    /// Pick τ for the TV baseline on a dataset.
    TuneTau {
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Protocol::Validation)]
        protocol: Protocol,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Protocol {
    Oracle,
    Validation,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Soft,
    Hard,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    tau_min: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    tau_count: Option<usize>,
}

impl GridArgs {
    fn is_set(&self) -> bool {
        self.tau_min.is_some() || self.tau_max.is_some() || self.tau_count.is_some()
    }

    fn grid(&self) -> Result<TauGrid> {
        if !self.is_set() {
            return Ok(TauGrid::default());
        }
        let d = TauGrid::default();
        let v = d.values();
        Ok(TauGrid::log_spaced(
            self.tau_min.unwrap_or(v[0]),
            self.tau_max.unwrap_or(v[v.len() - 1]),
            self.tau_count.unwrap_or(v.len()),
        )?)
    }
}

#[derive(Args)]
struct MethodArgs {
    /// Methods to run, comma separated or repeated.
    #[arg(long = "method", value_delimiter = ',', default_value = "tv", value_parser = parse_method)]
    method: Vec<MethodId>,
    /// TV strength for `tv` and the `tvcondnet` condition. Defaults to the
    /// dataset's stored τ.
    #[arg(long)]
    tau: Option<f64>,
    /// Cadzow rank. Estimated per spectrum when omitted.
    #[arg(long)]
    rank: Option<usize>,
    /// Cadzow Hankel window length.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Network weights as PATH or METHOD[@SNR]=PATH.
    #[arg(long)]
    weights: Vec<String>,
    /// Wavelet decomposition depth.
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, value_enum, default_value_t = Mode::Soft)]
    threshold_mode: Mode,
    /// Fixed wavelet threshold instead of the universal one.
    #[arg(long)]
    threshold: Option<f64>,
}

impl MethodArgs {
    fn config(&self, exec: Exec) -> Result<BenchConfig> {
        let mut methods = self.method.clone();
        methods.dedup();
        let models = self
            .weights
            .iter()
            .map(|w| parse_weights(w, &methods))
            .collect::<Result<Vec<_>>>()?;
        Ok(BenchConfig {
            methods,
            tau: self.tau,
            wavelet: WaveletConfig {
                levels: self.levels,
                mode: match self.threshold_mode {
                    Mode::Soft => ThresholdMode::Soft,
                    Mode::Hard => ThresholdMode::Hard,
                },
                threshold: self.threshold.map_or(Threshold::Auto, Threshold::Fixed),
            },
            cadzow: CadzowSettings {
                rank: self.rank,
                iterations: self.iterations,
                window: self.window,
            },
            models,
            repetitions: 1,
            exec,
        })
    }
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|e: nmr_tvcond::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<MethodId, String> {
    s.parse().map_err(|e: nmr_tvcond::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: nmr_tvcond::Error| e.to_string())
}

fn parse_range(s: &str) -> Result<Range<usize>, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:END, got `{s}`"))?;
    let a = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
    Ok(a..b)
}

/// `PATH` binds to the single learned method selected; `METHOD[@SNR]=PATH`
/// is explicit.
fn parse_weights(arg: &str, methods: &[MethodId]) -> Result<ModelSpec> {
    if let Some((key, path)) = arg.split_once('=') {
        let (name, level) = match key.split_once('@') {
            Some((m, l)) => {
                let level: f64 = l
                    .parse()
                    .with_context(|| format!("bad noise level in `{arg}`"))?;
                (m, Some(level))
            }
            None => (key, None),
        };
        let method: MethodId = name.parse()?;
        ensure!(
            method.network_inputs().is_some(),
            "`{method}` does not take weights"
        );
        return Ok(ModelSpec {
            method,
            input_snr_db: level,
            path: PathBuf::from(path),
        });
    }
    let learned: Vec<MethodId> = methods
        .iter()
        .copied()
        .filter(|m| m.network_inputs().is_some())
        .collect();
    match learned.as_slice() {
        [m] => Ok(ModelSpec {
            method: *m,
            input_snr_db: None,
            path: PathBuf::from(arg),
        }),
        [] => bail!("--weights {arg} given but no learned method selected"),
        _ => bail!("--weights {arg} is ambiguous, use METHOD=PATH"),
    }
}

/// Seed of one split's peak lists and noise, so splits made from the same
/// base seed never share examples.
fn split_seed(seed: u64, split: Split) -> u64 {
    let k = match split {
        Split::Train => 1,
        Split::Valid => 2,
        Split::Test => 3,
    };
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn is_csv(out: Option<&Path>) -> bool {
    out.and_then(|p| p.extension()).is_some_and(|e| e == "csv")
}

fn load(path: &Path) -> Result<Dataset> {
    read_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn check_row(ds: &Dataset, index: usize) -> Result<()> {
    ensure!(
        index < ds.len(),
        "row {index} out of range, dataset has {} rows",
        ds.len()
    );
    Ok(())
}

fn denoise_row(ds: &Dataset, index: usize, cfg: &BenchConfig) -> Result<Vec<(MethodId, Vec<f64>)>> {
    cfg.methods
        .iter()
        .map(|&m| {
            let d = Denoiser::new(m, ds.manifest.input_snr_db, cfg)?;
            Ok((m, d.apply(ds, index, cfg)?))
        })
        .collect()
}

fn synth(cli: &Cli, n: usize) -> Result<()> {
    let peaks = PeakModel::default().sample_sets(1, cli.seed).remove(0);
    let clean_fid = synth_fid(&peaks, n)?;
    let (noisy_fid, sigma) = add_noise(&clean_fid, NoiseSpec::new(cli.snr_db, cli.seed))?;
    let clean = fid_to_spectrum(&clean_fid)?;
    let noisy = fid_to_spectrum(&noisy_fid)?;
    let out = cli.out.as_deref();
    let text = if is_csv(out) {
        let mut s = String::from("index,fid_clean_re,fid_clean_im,fid_noisy_re,fid_noisy_im,clean,noisy\n");
        for t in 0..n {
            let (c, y) = (clean_fid.samples()[t], noisy_fid.samples()[t]);
            let _ = writeln!(
                s,
                "{t},{},{},{},{},{},{}",
                c.re,
                c.im,
                y.re,
                y.im,
                clean.values()[t],
                noisy.values()[t]
            );
        }
        s
    } else {
        let doc = json!({
            "seed": cli.seed,
            "n": n,
            "input_snr_db": cli.snr_db,
            "realized_snr_db": fid_snr_db(&clean_fid, &noisy_fid),
            "sigma": sigma,
            "peaks": peaks,
            "clean": clean.values(),
            "noisy": noisy.values(),
        });
        serde_json::to_string_pretty(&doc)? + "\n"
    };
    write_output(out, &text)
}

#[allow(clippy::too_many_arguments)]
fn make(
    cli: &Cli,
    exec: Exec,
    split: Split,
    k: Option<usize>,
    n: usize,
    tau_from: Option<&Path>,
    protocol: Option<Protocol>,
    grid: &GridArgs,
) -> Result<()> {
    let out = cli
        .out
        .as_deref()
        .context("make-dataset needs --out <stem>")?;
    let k = k.unwrap_or(if split == Split::Train { 512 } else { 32 });
    let tau_source = match (tau_from, protocol) {
        (Some(p), _) => {
            let valid = load(p)?;
            let tau = valid
                .shared_tau()
                .with_context(|| format!("{} has no single validation τ", p.display()))?;
            info!("using τ = {tau} from {}", p.display());
            TauSource::Fixed(tau)
        }
        (None, Some(Protocol::Oracle)) => TauSource::Oracle,
        (None, Some(Protocol::Validation)) => TauSource::Validation,
        (None, None) => TauSource::default_for(split),
    };
    let seed = split_seed(cli.seed, split);
    let model = PeakModel::default();
    let peaks = model.sample_sets(k, seed);
    let grid = grid.grid()?;
    let ds = make_dataset(
        &DatasetRequest {
            peak_sets: &peaks,
            peak_model: Some(model),
            n,
            noise: NoiseSpec::new(cli.snr_db, seed),
            split,
            tau_grid: &grid,
            tau_source,
        },
        exec,
    )?;
    write_dataset(&ds, out)?;
    info!(
        "wrote {} examples ({} skipped) to {}",
        ds.len(),
        ds.manifest.skipped,
        out.display()
    );
    Ok(())
}

fn denoise(cli: &Cli, exec: Exec, path: &Path, index: usize, args: &MethodArgs) -> Result<()> {
    let ds = load(path)?;
    check_row(&ds, index)?;
    let cfg = args.config(exec)?;
    let results = denoise_row(&ds, index, &cfg)?;
    let (x, y) = (ds.clean_row(index), ds.noisy_row(index));
    let out = cli.out.as_deref();
    let text = if is_csv(out) {
        let mut s = String::from("index,clean,noisy");
        for (m, _) in &results {
            let _ = write!(s, ",{m}");
        }
        s.push('\n');
        for t in 0..ds.n() {
            let _ = write!(s, "{t},{},{}", x[t], y[t]);
            for (_, d) in &results {
                let _ = write!(s, ",{}", d[t]);
            }
            s.push('\n');
        }
        s
    } else {
        let methods = results
            .iter()
            .map(|(m, d)| {
                Ok(json!({
                    "method": m,
                    "snr_db": cap_snr(snr_db(&x, d)?),
                    "rmse": rmse(&x, d)?,
                    "denoised": d,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let doc = json!({
            "dataset": path.display().to_string(),
            "index": index,
            "input_snr_db": ds.manifest.input_snr_db,
            "tau": cfg.tau.unwrap_or(ds.manifest.taus[index]),
            "noisy_snr_db": cap_snr(snr_db(&x, &y)?),
            "results": methods,
        });
        serde_json::to_string_pretty(&doc)? + "\n"
    };
    for (m, d) in &results {
        info!("{m}: {:.2} dB", cap_snr(snr_db(&x, d)?));
    }
    write_output(out, &text)
}

fn bench(
    cli: &Cli,
    exec: Exec,
    datasets: &[PathBuf],
    args: &MethodArgs,
    reps: usize,
    format: Option<ReportFormat>,
) -> Result<()> {
    ensure!(reps > 0, "--reps must be at least 1");
    let cfg = BenchConfig {
        repetitions: reps,
        ..args.config(exec)?
    };
    let report = run_bench(datasets, &cfg)?;
    let out = cli.out.as_deref();
    let format = format.unwrap_or_else(|| out.map(ReportFormat::from_path).unwrap_or_default());
    emit_report(&report, format, out)?;
    Ok(())
}

/// Window of a sixteenth of the spectrum centred on its largest value.
fn default_zoom(x: &[f64]) -> Range<usize> {
    let n = x.len();
    let peak = x
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > x[best] { i } else { best });
    let half = (n / 32).max(1);
    let start = peak.saturating_sub(half);
    let end = (peak + half + 1).min(n);
    if end - start < 2 {
        0..n
    } else {
        start..end
    }
}

fn plot(
    cli: &Cli,
    exec: Exec,
    path: &Path,
    index: usize,
    zoom: Option<Range<usize>>,
    args: &MethodArgs,
) -> Result<()> {
    let out = cli.out.as_deref().context("plot needs --out <file.svg>")?;
    let ds = load(path)?;
    check_row(&ds, index)?;
    let cfg = args.config(exec)?;
    let results: Vec<(String, Vec<f64>)> = denoise_row(&ds, index, &cfg)?
        .into_iter()
        .map(|(m, d)| (m.to_string(), d))
        .collect();
    let x = ds.clean_row(index);
    let zoom = zoom.unwrap_or_else(|| default_zoom(&x));
    emit_plot(&x, &ds.noisy_row(index), &results, zoom, out)?;
    Ok(())
}

fn tune(cli: &Cli, exec: Exec, path: &Path, protocol: Protocol, grid: &GridArgs) -> Result<()> {
    let ds = load(path)?;
    ensure!(!ds.is_empty(), "dataset {} is empty", path.display());
    let grid = if grid.is_set() {
        grid.grid()?
    } else {
        ds.manifest.tau_grid.clone()
    };
    let pairs = (0..ds.len())
        .map(|i| {
            Ok((
                nmr_tvcond::Spectrum::from_f32(ds.noisy_f32(i))?,
                nmr_tvcond::Spectrum::from_f32(ds.clean_f32(i))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let doc = match protocol {
        Protocol::Validation => {
            let tau = tune_tau_validation(&pairs, &grid, exec)?;
            json!({ "protocol": "validation", "tau": tau })
        }
        Protocol::Oracle => {
            let taus = pairs
                .iter()
                .map(|(y, x)| Ok(tune_tau_oracle(y, x, &grid, exec)?.0))
                .collect::<Result<Vec<_>>>()?;
            json!({ "protocol": "oracle", "taus": taus })
        }
    };
    write_output(cli.out.as_deref(), &(serde_json::to_string_pretty(&doc)? + "\n"))
}

fn run(cli: &Cli) -> Result<()> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    ensure!(cli.snr_db.is_finite(), "--snr-db must be finite");
    match &cli.command {
        Command::Synth { n } => synth(cli, *n),
        Command::MakeDataset {
            split,
            k,
            n,
            tau_from,
            tau_protocol,
            grid,
        } => make(cli, exec, *split, *k, *n, tau_from.as_deref(), *tau_protocol, grid),
        Command::Denoise {
            dataset,
            index,
            methods,
        } => denoise(cli, exec, dataset, *index, methods),
        Command::Bench {
            datasets,
            methods,
            reps,
            format,
        } => bench(cli, exec, datasets, methods, *reps, *format),
        Command::Plot {
            dataset,
            index,
            zoom,
            methods,
        } => plot(cli, exec, dataset, *index, zoom.clone(), methods),
        Command::TuneTau {
            dataset,
            protocol,
            grid,
        } => tune(cli, exec, dataset, *protocol, grid),
    }
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
