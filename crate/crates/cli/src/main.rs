use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sni::io::{self, StatsRow};
use sni::krylov::{PreconditionerKind, DEFAULT_ALPHA, DEFAULT_TOL};
use sni::photometric::{default_lightings, gradient_to_normals, render};
use sni::pipeline::{self, BenchmarkSuite, DataSource, Manifest, Method, RunSpec};
use sni::poisson::{assemble, compatibilize, robustify_gradient};
use sni::synthetic::DatasetKind;
use sni::FmConfig;

#[derive(Parser)]
#[command(name = "sni", version, about = "Integrate surface gradient fields into depth maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (gradient, mask, ground truth) to disk.
    Generate(GenerateArgs),
    /// Integrate one gradient field.
    Integrate(IntegrateArgs),
    /// Sweep datasets, sizes, methods and preconditioners into a CSV table.
    Benchmark(BenchmarkArgs),
    /// Photometric stereo: estimate normals from images, then integrate.
    Ps(PsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fm,
    Cg,
    Pcg,
    FmPcg,
    Fft,
    Dct,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Fm => Method::Fm,
            MethodArg::Cg => Method::Cg,
            MethodArg::Pcg => Method::Pcg,
            MethodArg::FmPcg => Method::FmPcg,
            MethodArg::Fft => Method::Fft,
            MethodArg::Dct => Method::Dct,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PrecondArg {
    None,
    Ic,
    Mic,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Sombrero,
    Peaks,
    Vase,
    Phantom,
}

impl From<DatasetArg> for DatasetKind {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Sombrero => DatasetKind::Sombrero,
            DatasetArg::Peaks => DatasetKind::Peaks,
            DatasetArg::Vase => DatasetKind::Vase,
            DatasetArg::Phantom => DatasetKind::Phantom,
        }
    }
}

#[derive(Args, Clone)]
struct Corruption {
    /// Gaussian gradient noise, σ as a percentage of the largest |gradient|.
    #[arg(long, default_value_t = 0.0)]
    noise_pct: f64,
    /// Fraction of pixels whose gradient is replaced by an outlier.
    #[arg(long, default_value_t = 0.0)]
    outlier_frac: f64,
    #[arg(long, default_value_t = pipeline::DEFAULT_OUTLIER_MAGNITUDE)]
    outlier_magnitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "fm-pcg")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "mic")]
    precond: PrecondArg,
    /// Drop tolerance of the incomplete factorization.
    #[arg(long, default_value_t = 1e-3)]
    tau: f64,
    /// Diagonal shift of the modified factorization.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Relative residual at which CG stops.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Weight of the auxiliary distance term in fast marching.
    #[arg(long, default_value_t = sni::fm::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Down-weight gradients that violate integrability.
    #[arg(long)]
    robustify: bool,
}

fn preconditioner(kind: PrecondArg, tau: f64, alpha: f64) -> PreconditionerKind {
    match kind {
        PrecondArg::None => PreconditionerKind::None,
        PrecondArg::Ic => PreconditionerKind::Ic { tau },
        PrecondArg::Mic => PreconditionerKind::Mic { tau, alpha },
    }
}

impl SolverArgs {
    fn apply(&self, spec: &mut RunSpec) {
        spec.method = self.method.into();
        spec.preconditioner = preconditioner(self.precond, self.tau, self.alpha);
        spec.tol = self.tol;
        spec.max_iter = self.max_iter;
        spec.fm = FmConfig { lambda: self.lambda, ..FmConfig::default() };
        spec.robustify = self.robustify;
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[command(flatten)]
    corruption: Corruption,
    /// Also render photometric stereo images under four default lights.
    #[arg(long)]
    ps_images: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Built-in dataset; alternative to --gradient.
    #[arg(long, value_enum, conflicts_with = "gradient")]
    dataset: Option<DatasetArg>,
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Two-channel gradient file.
    #[arg(long)]
    gradient: Option<PathBuf>,
    #[arg(long, requires = "gradient")]
    mask: Option<PathBuf>,
    /// Ground-truth depth (PFM) for error metrics.
    #[arg(long, requires = "gradient")]
    truth: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    corruption: Corruption,
    /// Absolute error mapped to red in the error image.
    #[arg(long)]
    error_cap: Option<f64>,
    /// Also write the Poisson matrix and right-hand side as COO text.
    #[arg(long)]
    export_matrix: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "phantom")]
    dataset: Vec<DatasetArg>,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    sizes: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "pcg,fm-pcg")]
    method: Vec<MethodArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "none,mic")]
    precond: Vec<PrecondArg>,
    /// Drop tolerances swept for each incomplete factorization.
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.001")]
    tau: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = sni::fm::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    robustify: bool,
    #[command(flatten)]
    corruption: Corruption,
    /// Output directory for `benchmark.csv` and `stats.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PsArgs {
    /// Grey-level input images, at least three.
    #[arg(long, num_args = 3.., required = true)]
    images: Vec<PathBuf>,
    /// Light directions, one `lx ly lz` line per image.
    #[arg(long)]
    lights: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Integrate(a) => integrate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Ps(a) => ps(a),
    }
}

fn base_spec(data: DataSource, c: &Corruption) -> RunSpec {
    RunSpec {
        noise_pct: c.noise_pct,
        outlier_frac: c.outlier_frac,
        outlier_magnitude: c.outlier_magnitude,
        seed: c.seed,
        ..RunSpec::new(data, Method::FmPcg)
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = base_spec(DataSource::Synthetic { kind: a.dataset.into(), size: a.size }, &a.corruption);
    let ds = pipeline::prepare::<f64>(&spec)?;
    fs::create_dir_all(&a.out)?;
    io::save_gradient(&a.out.join("gradient.gf"), &ds.domain, &ds.gradient)?;
    io::save_mask(&a.out.join("mask.png"), ds.domain.mask())?;
    if let Some(t) = &ds.ground_truth {
        io::save_depth(&a.out.join("truth.pfm"), &ds.domain, t)?;
    }
    if a.ps_images {
        let lights = default_lightings();
        let normals = gradient_to_normals(&ds.gradient);
        let albedo = vec![1.0; ds.domain.len()];
        for (i, img) in render(&normals, &albedo, &lights).iter().enumerate() {
            let raster = ds.domain.scatter(&img.iter().map(|v| v * 255.0).collect::<Vec<_>>(), 0.0);
            io::save_gray(&a.out.join(format!("image_{i}.png")), ds.domain.width(), ds.domain.height(), &raster)?;
        }
        fs::write(a.out.join("lights.txt"), io::format_lightings(&lights))?;
    }
    println!("{}: {} pixels written to {}", ds.name, ds.domain.len(), a.out.display());
    Ok(())
}

fn integrate(a: IntegrateArgs) -> Result<()> {
    let data = match (&a.dataset, &a.gradient) {
        (Some(d), None) => DataSource::Synthetic { kind: (*d).into(), size: a.size },
        (None, Some(g)) => DataSource::Files { gradient: g.clone(), mask: a.mask.clone(), truth: a.truth.clone() },
        _ => bail!("give exactly one of --dataset or --gradient"),
    };
    let mut spec = base_spec(data, &a.corruption);
    a.solver.apply(&mut spec);
    let outcome = pipeline::run::<f64>(&spec)?;
    pipeline::write_artifacts(&a.out, &spec, &outcome, a.error_cap)?;
    if a.export_matrix {
        export_matrix(&a.out, &spec)?;
    }
    if let Some(s) = &outcome.stats {
        let row = StatsRow {
            size: outcome.domain.len(),
            preconditioner: spec.effective_preconditioner().label(),
            tau: spec.effective_preconditioner().tau(),
            alpha: spec.effective_preconditioner().alpha(),
            iterations: s.iterations,
            seconds: outcome.timings.solve,
            final_residual: s.final_residual(),
        };
        io::write_csv(fs::File::create(a.out.join("stats.csv"))?, &[row])?;
        println!("{} iterations, residual {:.3e}, converged {}", s.iterations, s.final_residual(), s.converged);
    }
    if let Some(m) = outcome.metrics {
        println!("mse {:.6e}  ssim {:.6}", m.mse, m.ssim);
    }
    println!("{:.3} s total", outcome.timings.total);
    Ok(())
}

fn export_matrix(dir: &Path, spec: &RunSpec) -> Result<()> {
    let ds = pipeline::prepare::<f64>(spec)?;
    let g = if spec.robustify { robustify_gradient(&ds.domain, &ds.gradient).gradient } else { ds.gradient };
    let system = compatibilize(assemble(&ds.domain, &g));
    system.matrix.write_coo(fs::File::create(dir.join("matrix.coo"))?)?;
    let rhs: String = system.rhs.iter().map(|v| format!("{v:e}\n")).collect();
    fs::write(dir.join("rhs.txt"), rhs)?;
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let mut preconditioners = Vec::new();
    for &p in &a.precond {
        if p == PrecondArg::None {
            preconditioners.push(PreconditionerKind::None);
        } else {
            preconditioners.extend(a.tau.iter().map(|&t| preconditioner(p, t, a.alpha)));
        }
    }
    let mut base = base_spec(DataSource::Synthetic { kind: DatasetKind::Phantom, size: 0 }, &a.corruption);
    base.tol = a.tol;
    base.fm = FmConfig { lambda: a.lambda, ..FmConfig::default() };
    base.robustify = a.robustify;
    let suite = BenchmarkSuite {
        datasets: a.dataset.iter().map(|&d| d.into()).collect(),
        sizes: a.sizes.clone(),
        methods: a.method.iter().map(|&m| m.into()).collect(),
        preconditioners,
        base,
    };
    let rows = pipeline::benchmark::<f64>(&suite)?;
    fs::create_dir_all(&a.out)?;
    io::write_csv(fs::File::create(a.out.join("benchmark.csv"))?, &rows)?;
    let stats: Vec<StatsRow> = rows
        .iter()
        .filter_map(|r| {
            Some(StatsRow {
                size: r.size,
                preconditioner: r.preconditioner.clone(),
                tau: r.tau,
                alpha: r.alpha,
                iterations: r.iterations?,
                seconds: r.solve_seconds,
                final_residual: r.final_residual?,
            })
        })
        .collect();
    io::write_csv(fs::File::create(a.out.join("stats.csv"))?, &stats)?;
    for r in &rows {
        let iters = r.iterations.map_or("-".into(), |i| i.to_string());
        let mse = r.mse.map_or("-".into(), |m| format!("{m:.4e}"));
        println!(
            "{:<9}{:>6} {:<7}{:<18}{:>6} iters  mse {:<12}{:.3} s{}",
            r.dataset,
            r.size,
            r.method,
            r.preconditioner,
            iters,
            mse,
            r.total_seconds,
            r.error.as_deref().map_or(String::new(), |e| format!("  error: {e}"))
        );
    }
    Ok(())
}

fn ps(a: PsArgs) -> Result<()> {
    let problem = pipeline::load_ps_problem::<f64>(&a.images, &a.lights, a.mask.as_deref())
        .with_context(|| format!("loading photometric stereo input ({})", a.lights.display()))?;
    let data = DataSource::PhotometricStereo { images: a.images.clone(), lights: a.lights.clone(), mask: a.mask.clone() };
    let mut spec = RunSpec::new(data, Method::FmPcg);
    spec.seed = a.seed;
    a.solver.apply(&mut spec);
    let out = pipeline::run_ps(&problem, &spec)?;

    fs::create_dir_all(&a.out)?;
    let d = &problem.domain;
    io::save_depth(&a.out.join("depth.pfm"), d, &out.depth)?;
    io::save_normal_map(&a.out.join("normals.png"), d, &out.normals)?;
    let amax = out.albedo.iter().copied().fold(0.0, f64::max);
    let albedo: Vec<f64> = out.albedo.iter().map(|v| if amax > 0.0 { v / amax * 255.0 } else { 0.0 }).collect();
    io::save_gray(&a.out.join("albedo.png"), d.width(), d.height(), &d.scatter(&albedo, 0.0))?;
    let outcome = pipeline::RunOutcome {
        domain: d.clone(),
        depth: out.depth.clone(),
        truth: None,
        metrics: None,
        stats: out.stats.clone(),
        timings: out.timings,
    };
    let manifest = serde_json::json!({
        "run": Manifest::new(&spec, &outcome),
        "flagged_pixels": out.flagged.iter().filter(|&&f| f).count(),
        "reprojection_mse": out.reprojection.mse,
        "reprojection_ssim": out.reprojection.ssim,
    });
    fs::write(a.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!(
        "reprojection mse {:.4e}  ssim {:.4}  ({} flagged pixels)",
        out.reprojection.mean_mse(),
        out.reprojection.mean_ssim(),
        out.flagged.iter().filter(|&&f| f).count()
    );
    Ok(())
}
