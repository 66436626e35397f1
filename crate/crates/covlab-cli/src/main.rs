//! Command-line front end for covlab: demos and batch runs with
//! reproducible, self-describing reports.
//!
//! Every report embeds the effective configuration (including the seed), so
//! a report file plus this binary reproduces itself byte for byte. Bodies
//! contain no timestamps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use covlab::change_of_variables::{
    cov_lhs, cov_rhs, gaussian_demo, image_measure_bounds, image_measure_via_inverse, CoVConfig,
    DifferentiableMap, IntegrandSpec,
};
use covlab::covering::{
    besicovitch_partition, estimate_besicovitch_constant, measure_almost_cover, vitali_select,
    BallFamily,
};
use covlab::differentiation::{
    lebesgue_density, rn_derivative_at, MeasurePair, RadiusSchedule, VitaliFamilyKind,
};
use covlab::error::CovError;
use covlab::geometry::{Norm, Vector};
use covlab::linalg::{transvection_decompose, Matrix};
use covlab::sampler::SeededSampler;
use covlab::schema::{MeasureSchema, RegionSchema};

#[derive(Parser)]
#[command(
    name = "covlab",
    about = "Numerical change-of-variables toolkit: decompositions, coverings, densities, integrals",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Seed for the random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Mesh size for grid-based estimates.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Linearization slack for sandwich bounds.
    #[arg(long)]
    delta: Option<f64>,
    /// Optional JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format; csv only for radius-sweep commands.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Factor a matrix into transvections and a diagonal.
    Decompose {
        /// Matrix as JSON rows, e.g. `[[1,1],[0,1]]`.
        #[arg(long)]
        matrix: Option<String>,
        /// File containing the matrix JSON.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a covering algorithm over a ball family file.
    Cover {
        /// vitali, besicovitch, or almost.
        #[arg(long, default_value = "vitali")]
        mode: String,
        /// Ball family JSON file.
        #[arg(long)]
        input: PathBuf,
        /// Region JSON (almost mode).
        #[arg(long)]
        region: Option<String>,
        /// Measure JSON (almost mode; Lebesgue scale 1 by default).
        #[arg(long)]
        mu: Option<String>,
        /// Target covered fraction (almost mode).
        #[arg(long, default_value_t = 0.9)]
        target_fraction: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Packing lower bound for the Besicovitch constant N(E).
    BesicovitchConstant {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Norm: euclidean or sup.
        #[arg(long, default_value = "euclidean")]
        mode: String,
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Lebesgue density of a region at a point along shrinking radii.
    Density {
        /// Region JSON.
        #[arg(long)]
        region: String,
        /// Point as a JSON array, e.g. '[0.5,0.5]'.
        #[arg(long)]
        point: String,
        /// Radii as a JSON array (default [0.2,0.1,0.05,0.025]).
        #[arg(long)]
        radii: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Ratio of two measures on shrinking balls, with extrapolation.
    RnDeriv {
        /// Numerator measure JSON.
        #[arg(long)]
        rho: String,
        /// Denominator measure JSON.
        #[arg(long)]
        mu: String,
        #[arg(long)]
        point: String,
        #[arg(long)]
        radii: Option<String>,
        /// centered or containing balls.
        #[arg(long, default_value = "centered")]
        mode: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Both sides of the change-of-variables identity.
    CovIntegrate {
        /// Map name: `identity[:d]`, `linear:<matrix>`, `polar`, `cubic-shear`.
        #[arg(long)]
        map: String,
        /// Region JSON for the source set s.
        #[arg(long)]
        region: String,
        /// Integrand name: one or gauss.
        #[arg(long, default_value = "one")]
        integrand: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Mesh-linearization sandwich bounds for Leb(f(K)).
    ImageBounds {
        #[arg(long)]
        map: String,
        #[arg(long)]
        region: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Gaussian integral via the polar change of variables.
    GaussianDemo {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Optional JSON config file; flags override these.
#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    seed: Option<u64>,
    samples: Option<usize>,
    epsilon: Option<f64>,
    delta: Option<f64>,
}

struct Effective {
    seed: u64,
    samples: usize,
    epsilon: f64,
    delta: f64,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Runtime(String),
}

impl From<CovError> for CliError {
    fn from(e: CovError) -> Self {
        match e {
            CovError::InvalidParameter(_) | CovError::DimensionMismatch { .. } => {
                CliError::Invalid(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn effective(common: &CommonArgs) -> Result<Effective, CliError> {
    let file: FileConfig = match &common.config {
        Some(path) => serde_json::from_str(&read_file(path)?)
            .map_err(|e| CliError::Invalid(format!("bad config file: {e}")))?,
        None => FileConfig::default(),
    };
    Ok(Effective {
        seed: common.seed.or(file.seed).unwrap_or(42),
        samples: common.samples.or(file.samples).unwrap_or(1_000_000),
        epsilon: common.epsilon.or(file.epsilon).unwrap_or(0.05),
        delta: common.delta.or(file.delta).unwrap_or(0.05),
    })
}

fn parse_point(json: &str) -> Result<Vector, CliError> {
    let coords: Vec<f64> = serde_json::from_str(json)
        .map_err(|e| CliError::Invalid(format!("bad point JSON: {e}")))?;
    Ok(Vector::new(coords)?)
}

fn parse_radii(json: &Option<String>) -> Result<RadiusSchedule, CliError> {
    match json {
        None => Ok(RadiusSchedule::default()),
        Some(s) => {
            let radii: Vec<f64> = serde_json::from_str(s)
                .map_err(|e| CliError::Invalid(format!("bad radii JSON: {e}")))?;
            Ok(RadiusSchedule::new(radii)?)
        }
    }
}

fn parse_norm(mode: &str) -> Result<Norm, CliError> {
    match mode {
        "euclidean" => Ok(Norm::Euclidean),
        "sup" => Ok(Norm::Sup),
        other => Err(CliError::Invalid(format!(
            "unknown norm {other:?}; expected euclidean or sup"
        ))),
    }
}

fn emit(common: &CommonArgs, body: &str) -> Result<(), CliError> {
    match &common.output {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn json_report(command: &str, config: Value, results: Value) -> String {
    let report = json!({
        "command": command,
        "config": config,
        "results": results,
    });
    let mut body = serde_json::to_string_pretty(&report).expect("report serializes");
    body.push('\n');
    body
}

fn require_json_format(common: &CommonArgs) -> Result<(), CliError> {
    if common.format == Format::Csv {
        return Err(CliError::Invalid(
            "csv format is only available for density and rn-deriv".into(),
        ));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decompose {
            matrix,
            input,
            common,
        } => {
            require_json_format(&common)?;
            let text = match (&matrix, &input) {
                (Some(m), _) => m.clone(),
                (None, Some(path)) => read_file(path)?,
                (None, None) => {
                    return Err(CliError::Invalid(
                        "decompose needs --matrix or --input".into(),
                    ))
                }
            };
            let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("bad matrix JSON: {e}")))?;
            let m = Matrix::from_rows(rows)?;
            let dec = transvection_decompose(&m);
            let rec = dec.reconstruct();
            let mut err = 0.0f64;
            for i in 0..m.dim() {
                for j in 0..m.dim() {
                    err += (rec.get(i, j) - m.get(i, j)).powi(2);
                }
            }
            let results = json!({
                "left": dec.left,
                "diag": dec.diag,
                "right": dec.right,
                "diag_product": dec.diag_product(),
                "determinant": m.determinant(),
                "reconstruction_error_frobenius": err.sqrt(),
            });
            emit(
                &common,
                &json_report("decompose", json!({ "matrix": m.rows() }), results),
            )
        }
        Command::Cover {
            mode,
            input,
            region,
            mu,
            target_fraction,
            common,
        } => {
            require_json_format(&common)?;
            let eff = effective(&common)?;
            let family: BallFamily = serde_json::from_str(&read_file(&input)?)
                .map_err(|e| CliError::Invalid(format!("bad ball family JSON: {e}")))?;
            let config = json!({
                "mode": mode,
                "input": input.display().to_string(),
                "seed": eff.seed,
                "samples": eff.samples,
                "target_fraction": target_fraction,
                "balls": family.balls.len(),
            });
            let results = match mode.as_str() {
                "vitali" => {
                    let selected = vitali_select(&family);
                    json!({ "selected": selected, "enlargement": covlab::covering::VITALI_ENLARGEMENT })
                }
                "besicovitch" => {
                    let part = besicovitch_partition(&family)?;
                    json!({ "families": part.families, "family_count": part.families.len() })
                }
                "almost" => {
                    let region_json = region
                        .ok_or_else(|| CliError::Invalid("almost mode needs --region".into()))?;
                    let region = RegionSchema::parse(&region_json)?;
                    let mu = match mu {
                        Some(s) => MeasureSchema::parse(&s)?,
                        None => covlab::measure::MeasureModel::lebesgue(1.0)?,
                    };
                    let out = measure_almost_cover(
                        &family,
                        &region,
                        &mu,
                        target_fraction,
                        &SeededSampler::new(eff.seed),
                    )?;
                    serde_json::to_value(&out).expect("almost cover serializes")
                }
                other => {
                    return Err(CliError::Invalid(format!(
                        "unknown cover mode {other:?}; expected vitali, besicovitch, or almost"
                    )))
                }
            };
            emit(&common, &json_report("cover", config, results))
        }
        Command::BesicovitchConstant {
            dim,
            mode,
            budget,
            common,
        } => {
            require_json_format(&common)?;
            let eff = effective(&common)?;
            let norm = parse_norm(&mode)?;
            let budget = budget.unwrap_or(100_000);
            let packing =
                estimate_besicovitch_constant(dim, norm, budget, &SeededSampler::new(eff.seed))?;
            let config = json!({
                "dim": dim, "norm": mode, "budget": budget, "seed": eff.seed,
            });
            let results = json!({
                "count": packing.count,
                "valid": packing.is_valid(),
                "points": packing.points,
            });
            emit(
                &common,
                &json_report("besicovitch-constant", config, results),
            )
        }
        Command::Density {
            region,
            point,
            radii,
            common,
        } => {
            let eff = effective(&common)?;
            let region_spec = RegionSchema::parse(&region)?;
            let x = parse_point(&point)?;
            let schedule = parse_radii(&radii)?;
            let out = lebesgue_density(
                &region_spec,
                &x,
                &schedule,
                Norm::Euclidean,
                &SeededSampler::new(eff.seed),
                eff.samples,
            )?;
            match common.format {
                Format::Csv => {
                    let mut body = String::from("r,value,std_error\n");
                    for p in &out {
                        body.push_str(&format!("{},{},{}\n", p.r, p.density, p.std_error));
                    }
                    emit(&common, &body)
                }
                Format::Json => {
                    let config = json!({
                        "region": region, "point": point,
                        "radii": schedule.radii(), "seed": eff.seed, "samples": eff.samples,
                    });
                    emit(
                        &common,
                        &json_report("density", config, json!({ "densities": out })),
                    )
                }
            }
        }
        Command::RnDeriv {
            rho,
            mu,
            point,
            radii,
            mode,
            common,
        } => {
            let eff = effective(&common)?;
            let pair = MeasurePair {
                rho: MeasureSchema::parse(&rho)?,
                mu: MeasureSchema::parse(&mu)?,
            };
            let x = parse_point(&point)?;
            let schedule = parse_radii(&radii)?;
            let kind = match mode.as_str() {
                "centered" => VitaliFamilyKind::CenteredBalls,
                "containing" => VitaliFamilyKind::ContainingBalls,
                other => {
                    return Err(CliError::Invalid(format!(
                        "unknown mode {other:?}; expected centered or containing"
                    )))
                }
            };
            let out = rn_derivative_at(
                &pair,
                &x,
                &schedule,
                kind,
                Norm::Euclidean,
                &SeededSampler::new(eff.seed),
                eff.samples,
            )?;
            match common.format {
                Format::Csv => {
                    let mut body = String::from("r,value,std_error\n");
                    for p in &out.ratios {
                        body.push_str(&format!("{},{},{}\n", p.r, p.ratio, p.std_error));
                    }
                    emit(&common, &body)
                }
                Format::Json => {
                    let config = json!({
                        "rho": rho, "mu": mu, "point": point, "mode": mode,
                        "radii": schedule.radii(), "seed": eff.seed, "samples": eff.samples,
                    });
                    emit(
                        &common,
                        &json_report(
                            "rn-deriv",
                            config,
                            json!({ "ratios": out.ratios, "extrapolated": out.extrapolated }),
                        ),
                    )
                }
            }
        }
        Command::CovIntegrate {
            map,
            region,
            integrand,
            common,
        } => {
            require_json_format(&common)?;
            let eff = effective(&common)?;
            let map_spec = DifferentiableMap::from_name(&map)?;
            let region_spec = RegionSchema::parse(&region)?;
            let g = IntegrandSpec::from_name(&integrand)?;
            let cfg = CoVConfig {
                epsilon: eff.epsilon,
                delta: eff.delta,
                n_samples: eff.samples,
                seed: eff.seed,
                ..CoVConfig::default()
            };
            let rhs = cov_rhs(&map_spec, &region_spec, &g, &cfg)?;
            let lhs = cov_lhs(&map_spec, &region_spec, &g, &cfg)?;
            let sigma = lhs.combined_sigma(&rhs);
            let config = json!({
                "map": map, "region": region, "integrand": integrand,
                "seed": eff.seed, "samples": eff.samples, "epsilon": eff.epsilon,
            });
            let results = json!({
                "lhs": lhs,
                "rhs": rhs,
                "difference": lhs.value - rhs.value,
                "combined_sigma": sigma,
                "within_3_sigma": (lhs.value - rhs.value).abs() <= 3.0 * sigma,
            });
            emit(&common, &json_report("cov-integrate", config, results))
        }
        Command::ImageBounds {
            map,
            region,
            common,
        } => {
            require_json_format(&common)?;
            let eff = effective(&common)?;
            let map_spec = DifferentiableMap::from_name(&map)?;
            let region_spec = RegionSchema::parse(&region)?;
            let cfg = CoVConfig {
                epsilon: eff.epsilon,
                delta: eff.delta,
                n_samples: eff.samples,
                seed: eff.seed,
                ..CoVConfig::default()
            };
            let bounds = image_measure_bounds(&map_spec, &region_spec, &cfg)?;
            let reference = if map_spec.has_inverse() {
                let est = image_measure_via_inverse(&map_spec, &region_spec, &cfg)?;
                json!({ "value": est.value, "std_error": est.std_error })
            } else {
                Value::Null
            };
            let config = json!({
                "map": map, "region": region, "seed": eff.seed,
                "samples": eff.samples, "epsilon": eff.epsilon, "delta": eff.delta,
            });
            let results = json!({
                "lower": bounds.lower,
                "upper": bounds.upper,
                "report": bounds.report,
                "independent_estimate": reference,
            });
            emit(&common, &json_report("image-bounds", config, results))
        }
        Command::GaussianDemo { common } => {
            require_json_format(&common)?;
            let eff = effective(&common)?;
            let cfg = CoVConfig {
                epsilon: eff.epsilon,
                delta: eff.delta,
                n_samples: eff.samples,
                seed: eff.seed,
                ..CoVConfig::default()
            };
            let demo = gaussian_demo(&cfg)?;
            let config = json!({ "seed": eff.seed, "samples": eff.samples });
            let results = json!({
                "i_squared": demo.i_squared,
                "i": demo.i,
                "i_std_error": demo.i_std_error,
                "truncation_radius": demo.truncation_radius,
                "reference": (2.0 * std::f64::consts::PI).sqrt(),
            });
            emit(&common, &json_report("gaussian-demo", config, results))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
