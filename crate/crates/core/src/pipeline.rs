//! End-to-end runs: load or generate data, corrupt it, integrate, score.

use std::borrow::Cow;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::{remove_component_means, DepthMap};
use crate::fm::{integrate_fm, FmConfig};
use crate::io;
use crate::krylov::{cg_solve, PreconditionerKind, SolveStats, SolverConfig, DEFAULT_TOL};
use crate::metrics::{mse_opt, Metrics};
use crate::photometric::{estimate_normals, normals_to_gradient, reproject, PsProblem, Reprojection};
use crate::poisson::{assemble, compatibilize, robustify_gradient};
use crate::scalar::Real;
use crate::spectral::{embed_masked, integrate_dct, integrate_fft, restrict};
use crate::synthetic::{add_noise, inject_outliers, Dataset, DatasetKind};

pub const DEFAULT_OUTLIER_MAGNITUDE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Fm,
    /// Unpreconditioned CG from zero.
    Cg,
    /// Preconditioned CG from zero.
    Pcg,
    /// Preconditioned CG started from the fast marching solution.
    FmPcg,
    Fft,
    Dct,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Fm, Method::Cg, Method::Pcg, Method::FmPcg, Method::Fft, Method::Dct];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fm => "fm",
            Method::Cg => "cg",
            Method::Pcg => "pcg",
            Method::FmPcg => "fm-pcg",
            Method::Fft => "fft",
            Method::Dct => "dct",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, Method::Cg | Method::Pcg | Method::FmPcg)
    }

    pub fn uses_fm(self) -> bool {
        matches!(self, Method::Fm | Method::FmPcg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DataSource {
    Synthetic { kind: DatasetKind, size: usize },
    Files { gradient: PathBuf, mask: Option<PathBuf>, truth: Option<PathBuf> },
    /// Grey-level images with one light direction line per image.
    PhotometricStereo { images: Vec<PathBuf>, lights: PathBuf, mask: Option<PathBuf> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub data: DataSource,
    pub method: Method,
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Used by `pcg` and `fm-pcg`; `cg` always runs unpreconditioned.
    pub preconditioner: PreconditionerKind,
    pub fm: FmConfig,
    pub noise_pct: f64,
    pub outlier_frac: f64,
    pub outlier_magnitude: f64,
    pub robustify: bool,
    pub seed: u64,
}

impl RunSpec {
    pub fn new(data: DataSource, method: Method) -> Self {
        Self {
            data,
            method,
            tol: DEFAULT_TOL,
            max_iter: None,
            preconditioner: SolverConfig::<f64>::default().preconditioner,
            fm: FmConfig::default(),
            noise_pct: 0.0,
            outlier_frac: 0.0,
            outlier_magnitude: DEFAULT_OUTLIER_MAGNITUDE,
            robustify: false,
            seed: 0,
        }
    }

    pub fn synthetic(kind: DatasetKind, size: usize, method: Method) -> Self {
        Self::new(DataSource::Synthetic { kind, size }, method)
    }

    /// The preconditioner this run actually uses.
    pub fn effective_preconditioner(&self) -> PreconditionerKind {
        match self.method {
            Method::Pcg | Method::FmPcg => self.preconditioner,
            _ => PreconditionerKind::None,
        }
    }
}

/// Seconds spent in each stage; stages a method skips stay 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub data: f64,
    pub fm: f64,
    pub assembly: f64,
    pub preconditioner: f64,
    pub solve: f64,
    pub spectral: f64,
    pub metrics: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome<T> {
    pub domain: Domain,
    pub depth: DepthMap<T>,
    pub truth: Option<DepthMap<T>>,
    pub metrics: Option<Metrics>,
    pub stats: Option<SolveStats>,
    pub timings: StageTimings,
}

/// Loads or generates the input gradient and applies the configured
/// corruption. Noise uses `seed`, outliers `seed + 1`.
pub fn prepare<T: Real>(spec: &RunSpec) -> Result<Dataset<T>> {
    let mut ds = match &spec.data {
        DataSource::Synthetic { kind, size } => kind.generate(*size)?,
        DataSource::Files { gradient, mask, truth } => {
            let mask = mask.as_deref().map(io::load_mask).transpose()?;
            let (domain, g) = io::load_gradient(gradient, mask)?;
            let truth = truth.as_deref().map(|p| io::load_depth(p, &domain)).transpose()?;
            let name = gradient.file_stem().map_or("input".into(), |s| s.to_string_lossy().into_owned());
            Dataset { name, domain, gradient: g, ground_truth: truth }
        }
        DataSource::PhotometricStereo { images, lights, mask } => {
            let problem = load_ps_problem::<T>(images, lights, mask.as_deref())?;
            let (gradient, _) = normals_to_gradient(&estimate_normals(&problem)?);
            Dataset { name: "ps".into(), domain: problem.domain, gradient, ground_truth: None }
        }
    };
    if spec.noise_pct > 0.0 {
        ds.gradient = add_noise(&ds.gradient, spec.noise_pct, spec.seed)?;
    }
    if spec.outlier_frac > 0.0 {
        ds.gradient = inject_outliers(&ds.gradient, spec.outlier_frac, spec.outlier_magnitude, spec.seed + 1)?;
    }
    Ok(ds)
}

/// Integrates a prepared dataset.
pub fn integrate<T: Real>(spec: &RunSpec, ds: &Dataset<T>, timings: &mut StageTimings) -> Result<(DepthMap<T>, Option<SolveStats>)> {
    let domain = &ds.domain;
    let gradient = if spec.robustify {
        Cow::Owned(robustify_gradient(domain, &ds.gradient).gradient)
    } else {
        Cow::Borrowed(&ds.gradient)
    };
    let clock = Instant::now();
    let warm = if spec.method.uses_fm() { Some(integrate_fm(&gradient, domain, &spec.fm)?) } else { None };
    timings.fm = clock.elapsed().as_secs_f64();

    match spec.method {
        Method::Fm => Ok((warm.expect("fm ran"), None)),
        Method::Cg | Method::Pcg | Method::FmPcg => {
            let clock = Instant::now();
            let system = compatibilize(assemble(domain, &gradient));
            timings.assembly = clock.elapsed().as_secs_f64();

            let precond = spec.effective_preconditioner();
            let clock = Instant::now();
            let factor = precond.factorize(&system.matrix)?;
            timings.preconditioner = clock.elapsed().as_secs_f64();

            let cfg = SolverConfig { tol: T::lit(spec.tol), max_iter: spec.max_iter, preconditioner: precond };
            let clock = Instant::now();
            let x0 = warm.as_ref().map(|w| w.values.as_slice());
            let (x, stats) = cg_solve(&system, x0, factor.as_ref(), &cfg)?;
            timings.solve = clock.elapsed().as_secs_f64();
            Ok((DepthMap::new(x), Some(stats)))
        }
        Method::Fft | Method::Dct => {
            let clock = Instant::now();
            let rect = embed_masked(domain, &gradient)?;
            let full = if spec.method == Method::Fft { integrate_fft(&rect)? } else { integrate_dct(&rect)? };
            let mut depth = restrict(domain, &full)?;
            remove_component_means(domain, &mut depth.values);
            timings.spectral = clock.elapsed().as_secs_f64();
            Ok((depth, None))
        }
    }
}

/// Runs one specification end to end.
pub fn run<T: Real>(spec: &RunSpec) -> Result<RunOutcome<T>> {
    let start = Instant::now();
    let mut timings = StageTimings::default();
    let clock = Instant::now();
    let ds = prepare::<T>(spec)?;
    timings.data = clock.elapsed().as_secs_f64();

    let (depth, stats) = integrate(spec, &ds, &mut timings)?;

    let clock = Instant::now();
    let metrics = ds.ground_truth.as_ref().map(|t| mse_opt(&depth, t, &ds.domain)).transpose()?;
    timings.metrics = clock.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();
    Ok(RunOutcome { domain: ds.domain, depth, truth: ds.ground_truth, metrics, stats, timings })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: RunSpec,
    pub seeds: Seeds,
    pub versions: Versions,
    pub metrics: Option<Metrics>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub final_residual: Option<f64>,
    pub timings: StageTimings,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Seeds {
    pub noise: u64,
    pub outliers: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Versions {
    pub sni: String,
    pub scalar: String,
}

impl Manifest {
    pub fn new<T: Real>(spec: &RunSpec, outcome: &RunOutcome<T>) -> Self {
        Self {
            spec: spec.clone(),
            seeds: Seeds { noise: spec.seed, outliers: spec.seed + 1 },
            versions: Versions {
                sni: env!("CARGO_PKG_VERSION").into(),
                scalar: std::any::type_name::<T>().into(),
            },
            metrics: outcome.metrics,
            iterations: outcome.stats.as_ref().map(|s| s.iterations),
            converged: outcome.stats.as_ref().map(|s| s.converged),
            final_residual: outcome.stats.as_ref().map(SolveStats::final_residual),
            timings: outcome.timings,
        }
    }
}

/// Writes `depth.pfm`, `manifest.json`, and when ground truth is known
/// `error.png` (red at `error_cap`, default the largest error).
pub fn write_artifacts<T: Real>(
    dir: &Path,
    spec: &RunSpec,
    outcome: &RunOutcome<T>,
    error_cap: Option<f64>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let depth_path = dir.join("depth.pfm");
    io::save_depth(&depth_path, &outcome.domain, &outcome.depth)?;
    written.push(depth_path);

    if let (Some(truth), Some(m)) = (&outcome.truth, &outcome.metrics) {
        let errors: Vec<f64> = outcome
            .depth
            .values
            .iter()
            .zip(&truth.values)
            .map(|(e, t)| (e.as_f64() + m.offset_used - t.as_f64()).abs())
            .collect();
        let cap = error_cap.unwrap_or_else(|| errors.iter().copied().fold(0.0, f64::max));
        let path = dir.join("error.png");
        io::save_error_map(&path, &outcome.domain, &errors, if cap > 0.0 { cap } else { 1.0 })?;
        written.push(path);
    }

    let manifest_path = dir.join("manifest.json");
    let file = std::fs::File::create(&manifest_path)?;
    serde_json::to_writer_pretty(file, &Manifest::new(spec, outcome))?;
    written.push(manifest_path);
    Ok(written)
}

/// Cartesian product of datasets, sizes, methods and preconditioners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSuite {
    pub datasets: Vec<DatasetKind>,
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    /// Swept for `pcg` and `fm-pcg`; other methods get one row.
    pub preconditioners: Vec<PreconditionerKind>,
    /// Template for every other setting.
    pub base: RunSpec,
}

impl BenchmarkSuite {
    pub fn specs(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for &kind in &self.datasets {
            for &size in &self.sizes {
                for &method in &self.methods {
                    let base = RunSpec {
                        data: DataSource::Synthetic { kind, size },
                        method,
                        ..self.base.clone()
                    };
                    if matches!(method, Method::Pcg | Method::FmPcg) {
                        for &preconditioner in &self.preconditioners {
                            out.push(RunSpec { preconditioner, ..base.clone() });
                        }
                    } else {
                        out.push(base);
                    }
                }
            }
        }
        out
    }
}

/// One benchmark table row. Columns ending in `seconds` are wall times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub size: usize,
    pub method: String,
    pub preconditioner: String,
    pub tau: f64,
    pub alpha: f64,
    pub noise_pct: f64,
    pub outlier_frac: f64,
    pub robustify: bool,
    pub seed: u64,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub final_residual: Option<f64>,
    pub mse: Option<f64>,
    pub ssim: Option<f64>,
    pub fm_seconds: f64,
    pub assembly_seconds: f64,
    pub preconditioner_seconds: f64,
    pub solve_seconds: f64,
    pub total_seconds: f64,
    pub error: Option<String>,
}

impl BenchRow {
    fn new(spec: &RunSpec) -> Self {
        let (dataset, size) = match &spec.data {
            DataSource::Synthetic { kind, size } => (kind.name().to_string(), *size),
            DataSource::Files { gradient, .. } => (gradient.display().to_string(), 0),
            DataSource::PhotometricStereo { lights, .. } => (lights.display().to_string(), 0),
        };
        let pc = spec.effective_preconditioner();
        Self {
            dataset,
            size,
            method: spec.method.name().into(),
            preconditioner: pc.label(),
            tau: pc.tau(),
            alpha: pc.alpha(),
            noise_pct: spec.noise_pct,
            outlier_frac: spec.outlier_frac,
            robustify: spec.robustify,
            seed: spec.seed,
            iterations: None,
            converged: None,
            final_residual: None,
            mse: None,
            ssim: None,
            fm_seconds: 0.0,
            assembly_seconds: 0.0,
            preconditioner_seconds: 0.0,
            solve_seconds: 0.0,
            total_seconds: 0.0,
            error: None,
        }
    }
}

/// Runs every spec of the suite in order; failures become rows with `error` set.
pub fn benchmark<T: Real>(suite: &BenchmarkSuite) -> Result<Vec<BenchRow>> {
    let specs = suite.specs();
    if specs.is_empty() {
        return Err(Error::InvalidArgument("benchmark suite is empty".into()));
    }
    Ok(specs
        .iter()
        .map(|spec| {
            let mut row = BenchRow::new(spec);
            match run::<T>(spec) {
                Ok(out) => {
                    if let Some(s) = &out.stats {
                        row.iterations = Some(s.iterations);
                        row.converged = Some(s.converged);
                        row.final_residual = Some(s.final_residual());
                    }
                    row.mse = out.metrics.map(|m| m.mse);
                    row.ssim = out.metrics.map(|m| m.ssim);
                    row.fm_seconds = out.timings.fm;
                    row.assembly_seconds = out.timings.assembly;
                    row.preconditioner_seconds = out.timings.preconditioner;
                    row.solve_seconds = out.timings.solve;
                    row.total_seconds = out.timings.total;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect())
}

/// CSV text without the columns whose name ends in `seconds`.
pub fn strip_timing_columns(csv_text: &str) -> Result<String> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| !headers[i].ends_with("seconds")).collect();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(keep.iter().map(|&i| &headers[i]))?;
    for record in reader.records() {
        let record = record?;
        writer.write_record(keep.iter().map(|&i| &record[i]))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads images (intensities in `[0, 255]`), light directions and an
/// optional mask; without a mask the whole image is the domain.
pub fn load_ps_problem<T: Real>(images: &[PathBuf], lights: &Path, mask: Option<&Path>) -> Result<PsProblem<T>> {
    let lightings = io::parse_lightings(&std::fs::read_to_string(lights)?)?;
    let mut rasters = Vec::with_capacity(images.len());
    let mut dims = None;
    for path in images {
        let (w, h, data) = io::load_gray(path)?;
        if *dims.get_or_insert((w, h)) != (w, h) {
            return Err(Error::InvalidArgument(format!("{} has a different size from the first image", path.display())));
        }
        rasters.push(data);
    }
    let (w, h) = dims.ok_or_else(|| Error::InvalidArgument("no input images".into()))?;
    let domain = match mask {
        Some(m) => Domain::new(io::load_mask(m)?)?,
        None => Domain::full(w, h)?,
    };
    if (domain.width(), domain.height()) != (w, h) {
        return Err(Error::InvalidArgument(format!(
            "mask is {}x{}, images are {w}x{h}",
            domain.width(),
            domain.height()
        )));
    }
    let images = rasters.iter().map(|r| domain.gather(r).into_iter().map(T::lit).collect()).collect();
    PsProblem::new(domain, images, lightings)
}

/// Photometric stereo run: normals, gradient, integration, reprojection.
#[derive(Clone, Debug)]
pub struct PsOutcome<T> {
    pub depth: DepthMap<T>,
    pub normals: Vec<[T; 3]>,
    pub albedo: Vec<T>,
    pub flagged: Vec<bool>,
    pub reprojection: Reprojection<T>,
    pub stats: Option<SolveStats>,
    pub timings: StageTimings,
}

/// Integrates the normals estimated from `problem` with `spec`'s method
/// and solver settings. Flagged pixels are down-weighted when
/// `spec.robustify` is set.
pub fn run_ps<T: Real>(problem: &PsProblem<T>, spec: &RunSpec) -> Result<PsOutcome<T>> {
    let start = Instant::now();
    let nf = estimate_normals(problem)?;
    let (gradient, flagged) = normals_to_gradient(&nf);
    let ds = Dataset { name: "ps".into(), domain: problem.domain.clone(), gradient, ground_truth: None };
    let mut timings = StageTimings::default();
    let (depth, stats) = integrate(spec, &ds, &mut timings)?;
    let reprojection = reproject(&depth, &nf.albedo, problem)?;
    timings.total = start.elapsed().as_secs_f64();
    Ok(PsOutcome { depth, normals: nf.normals, albedo: nf.albedo, flagged, reprojection, stats, timings })
}
