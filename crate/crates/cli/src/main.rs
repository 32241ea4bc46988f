use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use metriclab::bounds::{
    brute_force_min_R, brute_force_min_R_positive, gap_bounds, threshold_chain_min_R,
    threshold_chain_min_R_positive, threshold_dominance, GapBoundsMode,
};
use metriclab::chain::{ball_chain, classify_chain, dendrogram_chain, PartitionChain};
use metriclab::dimension::{dyadic_grid, estimate_metric_dimension, Centers, Window};
use metriclab::embed::{
    embed_chain, min_embedding_dimension, select_embedding_levels, verify_embedding_distortion,
};
use metriclab::io::{load_space, write_coordinates_csv, write_matrix_csv, ChainJson};
use metriclab::logratio::{nondiscreteness_check, profile_with_space};
use metriclab::metric::{DEFAULT_HYPERSPACE_CAP, DEFAULT_PRODUCT_CAP};
use metriclab::ultrametric::build_certificate;
use metriclab::zoo::{AnalyticFamily, FamilyKind, LevelSelection, Sample};
use metriclab::{Error, FiniteMetricSpace, ValidateOptions};

const DEFAULT_MAX_POINTS: usize = 20_000;

#[derive(Parser, Serialize)]
#[command(
    name = "metriclab",
    version,
    about = "Log-ratio analysis of finite metric spaces"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for the report and any data files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
enum Command {
    /// Log-ratio profile of a chain.
    Profile {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Comparison ultrametric and its certificate.
    Ultrametrize {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Box-norm embedding into R^N.
    Embed {
        #[command(flatten)]
        source: SourceArgs,
        /// Target dimension; computed from --dim-d when absent.
        #[arg(long = "N")]
        n_dim: Option<usize>,
        /// Doubling dimension bound D used to compute N.
        #[arg(long)]
        dim_d: Option<f64>,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        epsilon: f64,
        /// Embed the raw chain instead of the longest packable sub-chain.
        #[arg(long)]
        no_select: bool,
        /// Level number from which the distortion bounds are asserted.
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Metric dimension estimate on a dyadic grid.
    Dimension {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long = "ratio", default_value_t = 16.0)]
        t: f64,
        #[arg(long, default_value_t = 1)]
        i_min: u32,
        #[arg(long, default_value_t = 30)]
        j_max: u32,
        /// Number of sampled centers; all points when absent.
        #[arg(long)]
        centers: Option<usize>,
    },
    /// Sample a closed-form family.
    Zoo {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Sup-metric product of several spaces.
    Product {
        /// Factor files (CSV or JSON).
        #[arg(long = "factor", required = true)]
        factors: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Hausdorff metric on the nonempty subsets.
    Hyperspace {
        #[command(flatten)]
        source: SourceArgs,
        /// Largest subset size (default: all subsets).
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// Gap-bound functions G and g.
    GapBounds {
        #[command(flatten)]
        source: SourceArgs,
        /// Radii; dyadic 2^-1..2^-20 when absent.
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
    },
    /// Brute force over all partitions of a small space.
    Oracle {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
    },
}

#[derive(Args, Serialize, Clone)]
struct SourceArgs {
    /// Distance matrix CSV or JSON descriptor.
    #[arg(long, conflicts_with = "zoo")]
    input: Option<PathBuf>,
    /// Closed-form family.
    #[arg(long)]
    zoo: Option<String>,
    /// Family parameter s.
    #[arg(long)]
    s: Option<f64>,
    /// Family parameter t.
    #[arg(long)]
    t: Option<f64>,
    /// Family parameter r.
    #[arg(long = "family-r")]
    family_r: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    /// Comma-separated level numbers to keep (zoo families).
    #[arg(long, value_delimiter = ',')]
    levels: Vec<usize>,
    /// Chain built on an input space.
    #[arg(long, value_enum, default_value_t = ChainArg::Dendrogram)]
    chain: ChainArg,
    /// Chain JSON to use instead.
    #[arg(long)]
    chain_file: Option<PathBuf>,
    /// Rescale an input of diameter above 1.
    #[arg(long)]
    rescale: bool,
    #[arg(long, default_value_t = metriclab::metric::DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(ValueEnum, Serialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum ChainArg {
    Dendrogram,
    Ball,
}

#[derive(ValueEnum, Serialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Exact,
    Heuristic,
    Auto,
}

struct Source {
    space: FiniteMetricSpace,
    chain: PartitionChain,
    sample: Option<Sample>,
}

/// Failures mapped to exit status 2.
fn is_verification_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::CertificateViolated { .. }
            | Error::BoundViolated { .. }
            | Error::DistortionBoundsViolated { .. }
    )
}

fn max_points() -> usize {
    std::env::var("METRICLAB_MAX_POINTS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MAX_POINTS)
}

fn family(src: &SourceArgs) -> Result<AnalyticFamily, Error> {
    let name = src.zoo.as_deref().unwrap_or_default();
    let kind = FamilyKind::parse(name).ok_or(Error::InvalidParameter {
        name: "zoo",
        value: f64::NAN,
        expected: "one of seq_factorial, seq_power_tower, seq_geometric, seq_polynomial, seq_log, product_geometric, cantor_factorial, sqrt_ultra",
    })?;
    let param = match kind.parameter() {
        Some("s") => src.s,
        Some("t") => src.t,
        Some(_) => src.family_r,
        None => None,
    };
    AnalyticFamily::new(kind, param)
}

fn load(src: &SourceArgs) -> Result<Source, Error> {
    if src.zoo.is_some() {
        let fam = family(src)?;
        let depth = src.depth.ok_or(Error::InvalidParameter {
            name: "depth",
            value: f64::NAN,
            expected: "--depth for zoo families",
        })?;
        let sel = if src.levels.is_empty() {
            LevelSelection::All
        } else {
            LevelSelection::Indices(src.levels.clone())
        };
        let sample = fam.sample_levels(depth, &sel)?;
        return Ok(Source {
            space: sample.space.clone(),
            chain: sample.chain.clone(),
            sample: Some(sample),
        });
    }
    let path = src.input.as_ref().ok_or(Error::InvalidParameter {
        name: "input",
        value: f64::NAN,
        expected: "--input or --zoo",
    })?;
    let space = load_checked(path, src)?;
    let chain = match &src.chain_file {
        Some(p) => {
            let c: ChainJson = serde_json::from_str(&fs::read_to_string(p)?)?;
            c.into_chain(&space)?
        }
        None => match src.chain {
            ChainArg::Dendrogram => dendrogram_chain(&space),
            ChainArg::Ball => ball_chain(&space)?,
        },
    };
    Ok(Source {
        space,
        chain,
        sample: None,
    })
}

fn load_checked(path: &Path, src: &SourceArgs) -> Result<FiniteMetricSpace, Error> {
    let opts = ValidateOptions {
        tolerance: src.tolerance,
        rescale: src.rescale,
    };
    let space = load_space(path, &opts)?;
    let cap = max_points();
    if space.len() > cap {
        return Err(Error::CapExceeded {
            what: "points (METRICLAB_MAX_POINTS)",
            requested: space.len(),
            cap,
        });
    }
    Ok(space)
}

fn write_file(
    out: &Option<PathBuf>,
    name: &str,
    f: impl FnOnce(fs::File) -> Result<(), Error>,
) -> Result<Option<String>, Error> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            f(fs::File::create(dir.join(name))?)?;
            Ok(Some(name.to_string()))
        }
        None => Ok(None),
    }
}

/// Runs the command; `Ok((result, verified))`.
fn run(cli: &Cli) -> Result<(Value, bool), Error> {
    let out = &cli.out;
    match &cli.command {
        Command::Profile { source, epsilon } => {
            let src = load(source)?;
            let mut prof = profile_with_space(&src.space, &src.chain, *epsilon)?;
            if let Some(s) = &src.sample {
                prof = prof.with_exact_limit(s.family.exact_r);
            }
            let nondiscrete = nondiscreteness_check(&src.chain);
            Ok((
                json!({ "profile": prof, "nondiscreteness": nondiscrete }),
                true,
            ))
        }
        Command::Ultrametrize { source, p, epsilon } => {
            let src = load(source)?;
            let cert = build_certificate(&src.space, &src.chain, *p, *epsilon)?;
            let verdict = cert.check(src.space.tolerance());
            if let Some(rho) = &cert.rho {
                write_file(out, "rho.csv", |f| write_matrix_csv(rho, f))?;
            }
            let mut v = json!({ "certificate": cert });
            if let Err(e) = verdict {
                v["violation"] = json!(e.to_string());
                return Ok((v, false));
            }
            Ok((v, true))
        }
        Command::Embed {
            source,
            n_dim,
            dim_d,
            p,
            epsilon,
            no_select,
            burn_in,
        } => {
            let src = load(source)?;
            let mut dimension = None;
            let n = match (n_dim, dim_d) {
                (Some(n), _) => *n,
                (None, Some(d)) => {
                    let r = metriclab::logratio::profile(
                        &src.chain,
                        metriclab::logratio::DEFAULT_EPSILON,
                    )
                    .estimate;
                    let e = min_embedding_dimension(*d, r, r - 1.0)?;
                    dimension = Some(e);
                    e.n
                }
                (None, None) => {
                    return Err(Error::InvalidParameter {
                        name: "N",
                        value: f64::NAN,
                        expected: "--N or --dim-d",
                    })
                }
            };
            let chain = if *no_select {
                src.chain.clone()
            } else {
                src.chain.select(&select_embedding_levels(&src.chain, n)?)?
            };
            let result = embed_chain(&src.space, &chain, n, *p, *epsilon)?;
            write_file(out, "coordinates.csv", |f| {
                write_coordinates_csv(&result, f)
            })?;
            let audits_pass = result.audits_pass();
            let mut v = json!({
                "dimension": dimension,
                "N": n,
                "levels_used": chain.indices(),
                "level_audit": result.level_audit,
                "fitted": result.fitted,
                "warnings": result.warnings,
            });
            if out.is_none() {
                v["coordinates"] = json!(result.coords);
            }
            match verify_embedding_distortion(&src.space, &chain, &result, *p, *epsilon, *burn_in) {
                Ok(rep) => {
                    v["distortion"] = json!(rep);
                    Ok((v, audits_pass))
                }
                Err(e) if is_verification_failure(&e) => {
                    v["violation"] = json!(e.to_string());
                    Ok((v, false))
                }
                Err(e) => Err(e),
            }
        }
        Command::Dimension {
            source,
            r,
            t,
            i_min,
            j_max,
            centers,
        } => {
            let src = load(source)?;
            let centers = centers.map_or(Centers::All, Centers::Sample);
            let est = estimate_metric_dimension(
                &src.space,
                Window { r: *r, t: *t },
                &dyadic_grid(*i_min, *j_max),
                centers,
            )?;
            Ok((json!({ "dimension": est }), true))
        }
        Command::Zoo { source } => {
            let src = load(source)?;
            let sample = src.sample.as_ref().ok_or(Error::InvalidParameter {
                name: "zoo",
                value: f64::NAN,
                expected: "--zoo with a family name",
            })?;
            let formulas = sample.family.formulas(sample.depth)?;
            let space_file = write_file(out, "space.csv", |f| write_matrix_csv(&src.space, f))?;
            let chain_json = ChainJson::from_chain(&src.chain);
            let chain_file = write_file(out, "chain.json", |f| {
                serde_json::to_writer_pretty(f, &chain_json)?;
                Ok(())
            })?;
            let mut v = json!({
                "family": sample.family,
                "depth": sample.depth,
                "points": src.space.len(),
                "formulas": formulas,
                "hypothesis_violations": sample.hypothesis_violations,
                "space_file": space_file,
                "chain_file": chain_file,
            });
            if out.is_none() {
                v["chain"] = json!(chain_json);
            }
            Ok((v, true))
        }
        Command::Product { factors, epsilon } => {
            let args = SourceArgs {
                input: None,
                zoo: None,
                s: None,
                t: None,
                family_r: None,
                depth: None,
                levels: Vec::new(),
                chain: ChainArg::Dendrogram,
                chain_file: None,
                rescale: false,
                tolerance: metriclab::metric::DEFAULT_TOLERANCE,
            };
            let spaces = factors
                .iter()
                .map(|p| load_checked(p, &args))
                .collect::<Result<Vec<_>, _>>()?;
            let cap = DEFAULT_PRODUCT_CAP.max(max_points());
            let prod = FiniteMetricSpace::sup_product(&spaces, cap)?;
            let estimate = |s: &FiniteMetricSpace| -> Result<f64, Error> {
                Ok(profile_with_space(s, &dendrogram_chain(s), *epsilon)?.estimate)
            };
            let factor_estimates = spaces.iter().map(estimate).collect::<Result<Vec<_>, _>>()?;
            let product_estimate = estimate(&prod)?;
            write_file(out, "product.csv", |f| write_matrix_csv(&prod, f))?;
            let max_factor = factor_estimates
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((
                json!({
                    "points": prod.len(),
                    "factor_estimates": factor_estimates.iter().map(|v| float_json(*v)).collect::<Vec<_>>(),
                    "product_estimate": float_json(product_estimate),
                    "product_at_least_max_factor": product_estimate >= max_factor,
                }),
                true,
            ))
        }
        Command::Hyperspace { source, max_size } => {
            let src = load(source)?;
            let size = max_size.unwrap_or(src.space.len());
            let hyper = src
                .space
                .hausdorff_hyperspace(size, DEFAULT_HYPERSPACE_CAP.max(max_points()))?;
            let check = hyper.space.is_ultrametric();
            write_file(out, "hyperspace.csv", |f| write_matrix_csv(&hyper.space, f))?;
            Ok((
                json!({
                    "points": hyper.space.len(),
                    "base_is_ultrametric": src.space.is_ultrametric().holds,
                    "is_ultrametric": check.holds,
                    "worst_relative_excess": float_json(check.relative_excess),
                    "subsets": hyper.points,
                }),
                true,
            ))
        }
        Command::GapBounds {
            source,
            radii,
            mode,
        } => {
            let src = load(source)?;
            let radii: Vec<f64> = if radii.is_empty() {
                (1..=20).map(|k| 0.5f64.powi(k)).collect()
            } else {
                radii.clone()
            };
            let mode = match mode {
                ModeArg::Exact => GapBoundsMode::Exact,
                ModeArg::Heuristic => GapBoundsMode::Heuristic,
                ModeArg::Auto => GapBoundsMode::Auto,
            };
            Ok((
                json!({ "gap_bounds": gap_bounds(&src.space, &radii, mode)? }),
                true,
            ))
        }
        Command::Oracle { source, r } => {
            let src = load(source)?;
            let brute = brute_force_min_R(&src.space, *r)?;
            let chain_min = threshold_chain_min_R(&src.space, *r)?;
            let dominance = threshold_dominance(&src.space)?;
            let agree = brute.min_ratio == chain_min.min_ratio;
            Ok((
                json!({
                    "brute_force": brute,
                    "threshold_chain": chain_min,
                    "positive_brute_force": brute_force_min_R_positive(&src.space, *r)?,
                    "positive_threshold_chain": threshold_chain_min_R_positive(&src.space, *r)?,
                    "dominance": dominance,
                    "minimum_agrees": agree,
                    "classification": classify_chain(&src.chain, 2.0).ok(),
                }),
                agree && dominance.passes(),
            ))
        }
    }
}

fn float_json(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(metriclab::io::format_float(v))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok((result, verified)) => {
            let report = json!({
                "schema": 1,
                "config": cli,
                "verified": verified,
                "result": result,
            });
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Some(dir) = &cli.out {
                if let Err(e) =
                    fs::create_dir_all(dir).and_then(|_| fs::write(dir.join("report.json"), &text))
                {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            println!("{text}");
            if verified {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification failed");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_verification_failure(&e) { 2 } else { 1 })
        }
    }
}
