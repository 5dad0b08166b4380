//! Command-line surface: training, spectrum exports, oracle comparison, and
//! the downstream applications, each leaving a run manifest next to its
//! outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use specfield::apps::{self, EigenvalueTarget, OptimizeConfig};
use specfield::csvio;
use specfield::error::{Error, Result};
use specfield::field::{Activation, EigenFieldSet, ElasticityParams, OperatorKind, PositionalEncoding};
use specfield::oracle::{compare_model_to_mesh, TriMesh};
use specfield::rng;
use specfield::shapespace::registry::instantiate;
use specfield::shapespace::{built_in_families, FamilyParams, GeometryCode, ShapeFamily};
use specfield::spectral::{
    evaluate_spectrum, train_shape_space, train_single_shape, FilterMode, SortKey, SortMode, TrainConfig,
};

#[derive(Parser, Debug, Serialize)]
#[command(name = "specfield", version, about = "Neural-field eigenanalysis over parametric shape families")]
pub struct Cli {
    /// Worker-thread cap (defaults to SPECFIELD_THREADS, then 1). The
    /// current build evaluates serially; the cap is recorded for manifests.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Train an eigenfunction model for one shape or a whole shape space.
    Train(TrainArgs),
    /// Export eigenvalue curves along one geometry-code axis.
    SpectrumCurve(SpectrumCurveArgs),
    /// Compare a single-shape model against the discrete operator on a mesh.
    CompareOracle(CompareOracleArgs),
    /// Recover a geometry code matching target eigenvalues.
    Optimize(OptimizeArgs),
    /// Project a sampled field onto the eigenbasis and rebuild it elsewhere.
    Transfer(TransferArgs),
    /// Scan eigenvalues and shape-gradient norms along a code axis.
    CrossoverScan(CrossoverScanArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Shape family id (see the registry: interval1d, disk2d, rectangle2d,
    /// ushape2d, boxchair2d, sdfshell).
    #[arg(long)]
    pub family: String,
    /// Family construction parameters, `key=value,key=value`.
    #[arg(long, default_value = "")]
    pub family_params: String,
    /// Freeze a parametric family at this geometry code (`a` or `a,b,c`),
    /// producing a single-shape model.
    #[arg(long)]
    pub pin: Option<String>,
    #[arg(long, value_parser = parse_operator)]
    #[serde(serialize_with = "serialize_operator")]
    pub operator: OperatorKind,
    /// Learned eigenfunction count.
    #[arg(long)]
    pub modes: usize,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    /// Cubature points per epoch.
    #[arg(long, default_value_t = 1500)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dominance ordering: causal (re-sorted every epoch) or fixed.
    #[arg(long, default_value = "causal")]
    pub sort: String,
    /// Orthogonality gradient filtering: causal or none.
    #[arg(long, default_value = "causal")]
    pub filter: String,
    /// Sorting key: raw (pre-projection Rayleigh quotients) or projected.
    #[arg(long, default_value = "raw")]
    pub sort_key: String,
    #[arg(long)]
    pub out: PathBuf,
    /// First Lame parameter (elasticity only).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Second Lame parameter (elasticity only).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Positional-encoding octaves.
    #[arg(long, default_value_t = 5)]
    pub pe_octaves: u32,
    /// Drop the raw-coordinate passthrough from the encoding.
    #[arg(long, default_value_t = false)]
    pub no_passthrough: bool,
    /// Also positionally encode the geometry code.
    #[arg(long, default_value_t = false)]
    pub encode_geometry: bool,
    /// Hidden layer widths.
    #[arg(long, default_value = "40,40,40")]
    pub hidden: String,
    #[arg(long, default_value = "sine")]
    pub activation: String,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr_final: f64,
    /// Differentiate through the normalization denominator instead of
    /// freezing it.
    #[arg(long, default_value_t = false)]
    pub exact_norm_gradient: bool,
    /// Log the summed mode energy every this many epochs (0 = quiet).
    #[arg(long, default_value_t = 0)]
    pub log_every: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct SpectrumCurveArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Geometry-code component to sweep.
    #[arg(long, default_value_t = 0)]
    pub axis: usize,
    /// Sweep range, two values: lo hi.
    #[arg(long, num_args = 2)]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Cubature points per evaluation.
    #[arg(long, default_value_t = 20000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed values for the other code components (defaults to box center).
    #[arg(long)]
    pub base: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareOracleArgs {
    /// Single-shape model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Planar triangle mesh (ASCII OFF).
    #[arg(long)]
    pub mesh: PathBuf,
    /// Learned modes to compare (clamped to the trained count).
    #[arg(long, default_value_t = 8)]
    pub modes: usize,
    #[arg(long, default_value_t = 20000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-mode report CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Target eigenvalues, comma-separated.
    #[arg(long)]
    pub targets: String,
    /// Learned-mode indices the targets apply to (default 0,1,...).
    #[arg(long)]
    pub target_modes: Option<String>,
    /// Starting geometry code.
    #[arg(long)]
    pub g0: String,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub step_size: f64,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Loss threshold counting as converged.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Trace CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TransferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Source geometry code.
    #[arg(long)]
    pub g: String,
    /// Destination geometry code.
    #[arg(long)]
    pub g_prime: String,
    /// Input samples CSV (`x..., u...`) on a cubature of the source shape.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 4000)]
    pub recon_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coefficients CSV.
    #[arg(long)]
    pub out_coeffs: PathBuf,
    /// Reconstruction CSV.
    #[arg(long)]
    pub out_recon: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CrossoverScanArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub axis: usize,
    #[arg(long, num_args = 2)]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 4000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub base: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_operator(s: &str) -> std::result::Result<OperatorKind, String> {
    OperatorKind::parse(s).map_err(|e| e.to_string())
}

fn serialize_operator<S: serde::Serializer>(op: &OperatorKind, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match op {
        OperatorKind::Laplace => "laplace",
        OperatorKind::Elasticity => "elasticity",
    })
}

/// Comma- or semicolon-separated geometry code.
fn parse_code(s: &str) -> Result<GeometryCode> {
    let mut code = Vec::new();
    for part in s.split([',', ';']).map(str::trim).filter(|p| !p.is_empty()) {
        code.push(
            part.parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("geometry code component '{part}': {e}")))?,
        );
    }
    Ok(GeometryCode(code))
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<usize>()
                .map_err(|e| Error::InvalidConfig(format!("list entry '{p}': {e}")))
        })
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("list entry '{p}': {e}")))
        })
        .collect()
}

pub fn threads_from(cli_threads: Option<usize>) -> usize {
    cli_threads
        .or_else(|| std::env::var("SPECFIELD_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1)
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    seed: u64,
    model: Option<String>,
    outputs: Vec<String>,
    wall_clock_seconds: f64,
    /// Content hash of the model artifact this run produced or consumed.
    artifact_sha256: Option<String>,
    threads: usize,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    command: &str,
    config: serde_json::Value,
    seed: u64,
    model: Option<&Path>,
    outputs: &[&Path],
    started: Instant,
    threads: usize,
    primary_out: &Path,
) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        seed,
        model: model.map(|p| p.display().to_string()),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        artifact_sha256: model.map(sha256_file).transpose()?,
        threads,
    };
    let path = manifest_path(primary_out);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Model(format!("manifest: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn manifest_path(primary_out: &Path) -> PathBuf {
    let mut name = primary_out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary_out.with_file_name(name)
}

/// Load a model plus the shape family it references.
fn load_model_and_family(path: &Path) -> Result<(EigenFieldSet, Box<dyn ShapeFamily>)> {
    let set = EigenFieldSet::load(path)?;
    let registry = built_in_families();
    let family = instantiate(&registry, &set.family_id, &set.family_params)?;
    if family.code_dim() != set.d_g {
        return Err(Error::Model(format!(
            "model expects a {}-dimensional shape space but family '{}' has {}",
            set.d_g,
            set.family_id,
            family.code_dim()
        )));
    }
    Ok((set, family))
}

fn base_code(family: &dyn ShapeFamily, base: &Option<String>) -> Result<GeometryCode> {
    match base {
        Some(s) => {
            let g = parse_code(s)?;
            family.check_code(&g)?;
            Ok(g)
        }
        None => Ok(GeometryCode(
            family.code_bounds().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
        )),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = threads_from(cli.threads);
    match cli.command {
        Command::Train(args) => cmd_train(args, threads),
        Command::SpectrumCurve(args) => cmd_spectrum_curve(args, threads),
        Command::CompareOracle(args) => cmd_compare_oracle(args, threads),
        Command::Optimize(args) => cmd_optimize(args, threads),
        Command::Transfer(args) => cmd_transfer(args, threads),
        Command::CrossoverScan(args) => cmd_crossover_scan(args, threads),
    }
}

fn cmd_train(args: TrainArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    let config_snapshot = serde_json::to_value(&args).unwrap_or_default();

    let mut params = FamilyParams::parse(&args.family_params)?;
    if let Some(pin) = &args.pin {
        let code = parse_code(pin)?;
        let joined: Vec<String> = code.0.iter().map(|v| format!("{v}")).collect();
        params.insert("pin", &joined.join(";"));
    }
    let registry = built_in_families();
    let family = instantiate(&registry, &args.family, &params)?;

    let elasticity = match args.operator {
        OperatorKind::Elasticity => {
            let mu = args.mu.ok_or_else(|| Error::InvalidConfig("elasticity needs --mu".into()))?;
            let lambda = args.lambda.ok_or_else(|| Error::InvalidConfig("elasticity needs --lambda".into()))?;
            Some(ElasticityParams { mu, lambda })
        }
        OperatorKind::Laplace => {
            if args.mu.is_some() || args.lambda.is_some() {
                return Err(Error::InvalidConfig("--mu/--lambda only apply to elasticity".into()));
            }
            None
        }
    };

    let config = TrainConfig {
        k: args.modes,
        epochs: args.epochs,
        samples_per_epoch: args.samples,
        learning_rate: args.lr,
        lr_final: args.lr_final,
        sort_mode: SortMode::parse(&args.sort)?,
        filter_mode: FilterMode::parse(&args.filter)?,
        sort_key: match args.sort_key.as_str() {
            "raw" => SortKey::RawRayleigh,
            "projected" => SortKey::Projected,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "sort key '{other}', expected raw or projected"
                )))
            }
        },
        exact_norm_gradient: args.exact_norm_gradient,
        seed: args.seed,
        hidden: parse_usize_list(&args.hidden)?,
        activation: Activation::parse(&args.activation)?,
        encoding: PositionalEncoding { octaves: args.pe_octaves, passthrough: !args.no_passthrough },
        encode_geometry: args.encode_geometry,
        elasticity,
        log_every: args.log_every,
    };

    let set = if family.code_dim() == 0 {
        train_single_shape(family.as_ref(), &GeometryCode::empty(), args.operator, &config)?
    } else {
        train_shape_space(family.as_ref(), args.operator, &config)?
    };
    set.save(&args.out)?;
    println!(
        "trained {} learned + {} known modes -> {}",
        set.learned_count(),
        set.known_count(),
        args.out.display()
    );
    write_manifest("train", config_snapshot, args.seed, Some(&args.out), &[&args.out], started, threads, &args.out)
}

fn cmd_spectrum_curve(args: SpectrumCurveArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    let config_snapshot = serde_json::to_value(&args).unwrap_or_default();
    let (set, family) = load_model_and_family(&args.model)?;
    if set.d_g == 0 {
        return Err(Error::InvalidConfig("spectrum curves need a shape-space model".into()));
    }
    if args.axis >= set.d_g {
        return Err(Error::InvalidConfig(format!(
            "axis {} out of range for a {}-dimensional code",
            args.axis, set.d_g
        )));
    }
    if args.range.len() != 2 {
        return Err(Error::InvalidConfig("--range needs two values".into()));
    }
    let base = base_code(family.as_ref(), &args.base)?;
    let path = apps::axis_path(&base, args.axis, args.range[0], args.range[1], args.steps)?;
    let mut rows = Vec::with_capacity(path.len());
    for g in &path {
        family.check_code(g)?;
        // One shared cubature stream: curves vary with the code, not with
        // sampling noise.
        let mut cubature_rng = rng::stream(args.seed, rng::STREAM_CUBATURE, 0);
        let (eval, _) = evaluate_spectrum(&set, family.as_ref(), g, args.samples, &mut cubature_rng)?;
        rows.push((g.0.clone(), eval.spectrum.eigenvalues));
    }
    csvio::write_spectrum_curve(&args.out, set.d_g, set.mode_count(), &rows)?;
    println!("wrote {} rows -> {}", rows.len(), args.out.display());
    write_manifest(
        "spectrum-curve",
        config_snapshot,
        args.seed,
        Some(&args.model),
        &[&args.out],
        started,
        threads,
        &args.out,
    )
}

fn cmd_compare_oracle(args: CompareOracleArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    let config_snapshot = serde_json::to_value(&args).unwrap_or_default();
    let (set, family) = load_model_and_family(&args.model)?;
    let mesh = TriMesh::load_off(&args.mesh)?;
    let mut cubature_rng = rng::stream(args.seed, rng::STREAM_CUBATURE, 0);
    let report = compare_model_to_mesh(&set, family.as_ref(), &mesh, args.modes, args.samples, &mut cubature_rng)?;

    let mut out = String::from("learned,oracle,lambda_learned,lambda_oracle,rel_err,match_mse\n");
    for r in &report.per_mode {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.learned, r.oracle, r.eigenvalue_learned, r.eigenvalue_oracle, r.eigenvalue_rel_err, r.match_mse
        ));
    }
    std::fs::write(&args.out, out)?;
    println!(
        "compared {} modes: mean eigenvalue relative error {:.4}, mean matched MSE {:.6}",
        report.modes_compared, report.mean_eigenvalue_rel_err, report.mean_match_mse
    );
    write_manifest(
        "compare-oracle",
        config_snapshot,
        args.seed,
        Some(&args.model),
        &[&args.out],
        started,
        threads,
        &args.out,
    )
}

fn cmd_optimize(args: OptimizeArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    let config_snapshot = serde_json::to_value(&args).unwrap_or_default();
    let (set, family) = load_model_and_family(&args.model)?;
    let target_values = parse_f64_list(&args.targets)?;
    let modes = match &args.target_modes {
        Some(s) => parse_usize_list(s)?,
        None => (0..target_values.len()).collect(),
    };
    if modes.len() != target_values.len() {
        return Err(Error::InvalidConfig(format!(
            "{} targets but {} target modes",
            target_values.len(),
            modes.len()
        )));
    }
    if target_values.len() > set.learned_count() {
        return Err(Error::InvalidConfig(format!(
            "{} targets exceed the model's {} learned modes",
            target_values.len(),
            set.learned_count()
        )));
    }
    let targets: Vec<EigenvalueTarget> = modes
        .iter()
        .zip(&target_values)
        .map(|(m, v)| EigenvalueTarget { mode: *m, value: *v })
        .collect();
    let g0 = parse_code(&args.g0)?;
    let config = OptimizeConfig {
        max_steps: args.steps,
        step_size: args.step_size,
        samples: args.samples,
        seed: args.seed,
        tolerance: args.tolerance,
    };
    let trace = apps::optimize_shape_for_eigenvalues(&set, family.as_ref(), &targets, &g0, &config)?;
    csvio::write_trace(&args.out, set.d_g, &trace)?;
    let last = trace.iterates.last().unwrap();
    println!(
        "{} after {} steps: g = {:?}, loss {:.6e}",
        if trace.converged { "converged" } else { "stopped" },
        trace.steps_used,
        last.g,
        last.loss
    );
    write_manifest("optimize", config_snapshot, args.seed, Some(&args.model), &[&args.out], started, threads, &args.out)
}

fn cmd_transfer(args: TransferArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    let config_snapshot = serde_json::to_value(&args).unwrap_or_default();
    let (set, family) = load_model_and_family(&args.model)?;
    let g = parse_code(&args.g)?;
    let g_prime = parse_code(&args.g_prime)?;
    family.check_code(&g)?;
    family.check_code(&g_prime)?;
    let (points, values, n) = csvio::read_usamples(&args.input, set.spatial_dim, set.output_width())?;
    let mut recon_rng = rng::stream(args.seed, "transfer-recon", 0);
    let (coeffs, cubature, recon) = apps::transfer_solution(
        &set,
        family.as_ref(),
        &g,
        &points,
        &values,
        n,
        &g_prime,
        args.recon_samples,
        &mut recon_rng,
    )?;

    let mut out = String::from("mode,alpha\n");
    for (i, a) in coeffs.alpha.iter().enumerate() {
        out.push_str(&format!("{i},{a}\n"));
    }
    std::fs::write(&args.out_coeffs, out)?;
    csvio::write_usamples(&args.out_recon, set.spatial_dim, set.output_width(), &cubature.points, &recon)?;
    println!(
        "projected {n} samples onto {} modes; reconstructed {} samples at g' = {:?}",
        coeffs.mode_count, args.recon_samples, g_prime.0
    );
    write_manifest(
        "transfer",
        config_snapshot,
        args.seed,
        Some(&args.model),
        &[&args.out_coeffs, &args.out_recon],
        started,
        threads,
        &args.out_coeffs,
    )
}

fn cmd_crossover_scan(args: CrossoverScanArgs, threads: usize) -> Result<()> {
    let started = Instant::now();
    let config_snapshot = serde_json::to_value(&args).unwrap_or_default();
    let (set, family) = load_model_and_family(&args.model)?;
    if args.range.len() != 2 {
        return Err(Error::InvalidConfig("--range needs two values".into()));
    }
    let base = base_code(family.as_ref(), &args.base)?;
    let path = apps::axis_path(&base, args.axis, args.range[0], args.range[1], args.steps)?;
    let scan = apps::crossover_scan(&set, family.as_ref(), &path, args.samples, args.seed)?;
    csvio::write_scan(&args.out, set.d_g, &scan)?;
    println!("scanned {} samples -> {}", scan.path.len(), args.out.display());
    write_manifest(
        "crossover-scan",
        config_snapshot,
        args.seed,
        Some(&args.model),
        &[&args.out],
        started,
        threads,
        &args.out,
    )
}

/// Process exit code for an error: 2 for usage-level problems, 1 for
/// runtime/numeric failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::UnknownFamily { .. } | Error::Parse(_) => 2,
        _ => 1,
    }
}
