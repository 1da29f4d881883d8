//! `ghlab`: exact Gromov-Hausdorff distances, geodesics and convexity checks
//! from the command line.
//!
//! Exit status is 0 on success, 1 when a verification fails and 2 for bad
//! input or unmet preconditions.

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{ArgAction, Parser, Subcommand};
use ghlab::correspondence::{gh_exact_bruteforce, RelationError, DEFAULT_ENUMERATION_BUDGET};
use ghlab::geodesic::{uniform_grid, GeodesicCurve, GeodesicError, DEFAULT_GRID};
use ghlab::harness::{self, HarnessError, TheoremReport};
use ghlab::intervals::{
    c_s_with_distance, hausdorff_distance, rational, theorem2_report, Coord, IntervalError, IntervalUnion,
};
use ghlab::partition::{
    canonical_partition, split_correspondence, verify_partition, Partition, PartitionError, PropertyReport,
    SplitCorrespondence,
};
use ghlab::solver::{gh_lower_bound, solve, SolveError, SolverOptions};
use ghlab::{Correspondence, FiniteMetricSpace};
use serde::Serialize;
use thiserror::Error;

use crate::io::{read_intervals, read_json, read_space, write_csv, write_json, write_space, IoError};

#[derive(Parser)]
#[command(
    name = "ghlab",
    version,
    about = "Exact Gromov-Hausdorff computations and convexity checks"
)]
struct Cli {
    /// Write the JSON result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance for symmetry and triangle checks when reading spaces.
    #[arg(long, global = true, default_value_t = 0.0)]
    tol: f64,
    /// Derive every random choice from --seed; with `false`, a missing seed
    /// is taken from the clock.
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a file holds a finite metric space.
    Validate { space: PathBuf },
    /// Size, diameter, s, e and general position of a space.
    Diag { space: PathBuf },
    /// Exact Gromov-Hausdorff distance with an optimal correspondence.
    Ghd {
        x: PathBuf,
        y: PathBuf,
        /// Stop after this many search nodes and report the bracketing interval.
        #[arg(long)]
        node_budget: Option<u64>,
        /// Also minimize over every correspondence (small spaces only).
        #[arg(long)]
        bruteforce: bool,
    },
    /// Sample the geodesic R_t between two spaces.
    Geodesic {
        x: PathBuf,
        y: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Output the space R_t at this parameter instead of the series.
        #[arg(long)]
        at: Option<f64>,
        /// Write the series t, diam, gh_to_point as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Hausdorff geodesic between interval unions; defaults to the segment
    /// versus its endpoints.
    Hgeo {
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 11)]
        grid: usize,
        /// Interval union file for the start set (with --b).
        #[arg(long, requires = "b")]
        a: Option<PathBuf>,
        /// Interval union file for the end set (with --a).
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        /// Write the series s, diam, gh_to_point as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Canonical partition of X with respect to a center M.
    Partition {
        m: PathBuf,
        x: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Check this partition file instead of computing one.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Split an optimal correspondence between X and this space blockwise.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// The geodesic between spaces of diameter at most 2r stays within r of a point.
    #[command(name = "verify-thm1")]
    VerifyThm1 {
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
    },
    /// The Hausdorff geodesic between [0, 2r] and {0, 2r} leaves the ball of radius r.
    #[command(name = "verify-thm2")]
    VerifyThm2 {
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        /// Grid sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [11usize, 101])]
        grid: Vec<usize>,
    },
    /// The geodesic between spaces near a center in general position stays near it.
    #[command(name = "verify-thm3")]
    VerifyThm3 {
        m: PathBuf,
        x: PathBuf,
        y: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
    },
    /// Seeded batch of all three verifications.
    Campaign {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Space sizes, comma separated; trial k uses sizes[k % len].
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 4])]
        sizes: Vec<usize>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Usage(String),
}

/// Whether the command's checks passed.
enum Outcome {
    Pass,
    Fail(String),
}

impl Outcome {
    fn from_pass(pass: bool, what: &str) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail(format!("{what} failed"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Caps the worker pool at `GHLAB_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("GHLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("GHLAB_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let out = cli.out.as_deref();
    let space = |p: &Path| read_space(p, cli.tol);
    match &cli.command {
        Command::Validate { space: path } => {
            let s = space(path)?;
            write_json(
                &ValidateOutput {
                    valid: true,
                    n: s.len(),
                },
                out,
            )?;
            Ok(Outcome::Pass)
        }
        Command::Diag { space: path } => {
            write_json(&space(path)?.diagnostics(), out)?;
            Ok(Outcome::Pass)
        }
        Command::Ghd {
            x,
            y,
            node_budget,
            bruteforce,
        } => ghd(&space(x)?, &space(y)?, *node_budget, *bruteforce, out),
        Command::Geodesic { x, y, grid, at, csv } => geodesic(space(x)?, space(y)?, *grid, *at, csv.as_deref(), out),
        Command::Hgeo { r, grid, a, b, csv } => match (a, b) {
            (Some(a), Some(b)) => hgeo_general(a, b, *grid, csv.as_deref(), out),
            _ => hgeo_counterexample(*r, *grid, csv.as_deref(), out),
        },
        Command::Partition {
            m,
            x,
            eps,
            labels,
            split,
        } => {
            let split = split.as_deref().map(space).transpose()?;
            partition(&space(m)?, &space(x)?, *eps, labels.as_deref(), split.as_ref(), out)
        }
        Command::VerifyThm1 { x, y, r, grid } => {
            report(harness::verify_theorem1(&space(x)?, &space(y)?, *r, *grid)?, out)
        }
        Command::VerifyThm2 { r, grid } => report(harness::verify_theorem2(*r, grid)?, out),
        Command::VerifyThm3 { m, x, y, grid } => report(
            harness::verify_theorem3(&space(m)?, &space(x)?, &space(y)?, *grid)?,
            out,
        ),
        Command::Campaign { seed, trials, sizes } => {
            let seed = match (seed, cli.deterministic) {
                (Some(s), _) => *s,
                (None, true) => 0,
                (None, false) => clock_seed(),
            };
            let summary = harness::campaign(seed, *trials, sizes)?;
            write_json(&summary, out)?;
            Ok(Outcome::from_pass(summary.pass, "campaign"))
        }
    }
}

fn clock_seed() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

#[derive(Serialize)]
struct ValidateOutput {
    valid: bool,
    n: usize,
}

#[derive(Serialize)]
struct GhdOutput {
    distance: f64,
    witness: Correspondence,
    node_count: u64,
    lower_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bruteforce: Option<BruteForceOutput>,
}

#[derive(Serialize)]
struct BruteForceOutput {
    distance: f64,
    witness: Correspondence,
    optimal_count: usize,
    enumerated: u64,
}

fn ghd(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    node_budget: Option<u64>,
    bruteforce: bool,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let res = solve(x, y, SolverOptions { node_budget })?;
    let bruteforce = if bruteforce {
        let bf = gh_exact_bruteforce(x, y, DEFAULT_ENUMERATION_BUDGET)?;
        Some(BruteForceOutput {
            distance: bf.distance,
            witness: bf.witness,
            optimal_count: bf.optimal.len(),
            enumerated: bf.enumerated,
        })
    } else {
        None
    };
    let agree = bruteforce.as_ref().is_none_or(|bf| bf.distance == res.distance);
    write_json(
        &GhdOutput {
            distance: res.distance,
            witness: res.witness,
            node_count: res.node_count,
            lower_bound: gh_lower_bound(x, y),
            bruteforce,
        },
        out,
    )?;
    Ok(Outcome::from_pass(agree, "agreement with exhaustive search"))
}

#[derive(Serialize)]
struct SeriesPoint {
    t: f64,
    diam: f64,
    gh_to_point: f64,
}

#[derive(Serialize)]
struct GeodesicOutput {
    gh: f64,
    witness: Correspondence,
    series: Vec<SeriesPoint>,
}

fn series_csv(path: &Path, name: &str, series: &[SeriesPoint]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = series
        .iter()
        .map(|p| vec![p.t.to_string(), p.diam.to_string(), p.gh_to_point.to_string()])
        .collect();
    write_csv(path, Some(&[name, "diam", "gh_to_point"]), &rows)?;
    Ok(())
}

fn geodesic(
    x: FiniteMetricSpace,
    y: FiniteMetricSpace,
    grid: usize,
    at: Option<f64>,
    csv: Option<&Path>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let curve = GeodesicCurve::new(x, y);
    if let Some(t) = at {
        write_space(&curve.evaluate(t)?, out)?;
        return Ok(Outcome::Pass);
    }
    if grid < 2 {
        return Err(CliError::Usage(format!("grid of {grid} points needs at least 2")));
    }
    let series = uniform_grid(grid)
        .into_iter()
        .map(|t| {
            let rt = curve.evaluate(t)?;
            Ok(SeriesPoint {
                t,
                diam: rt.diam(),
                gh_to_point: rt.gh_to_point(),
            })
        })
        .collect::<Result<Vec<_>, GeodesicError>>()?;
    if let Some(path) = csv {
        series_csv(path, "t", &series)?;
    }
    write_json(
        &GeodesicOutput {
            gh: curve.gh(),
            witness: curve.witness().clone(),
            series,
        },
        out,
    )?;
    Ok(Outcome::Pass)
}

fn hgeo_counterexample(r: f64, grid: usize, csv: Option<&Path>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let rep = theorem2_report(r, grid)?;
    if let Some(path) = csv {
        let series: Vec<SeriesPoint> = rep
            .samples
            .iter()
            .map(|s| SeriesPoint {
                t: s.s,
                diam: s.diam,
                gh_to_point: s.gh_to_point,
            })
            .collect();
        series_csv(path, "s", &series)?;
    }
    write_json(&rep, out)?;
    Ok(Outcome::from_pass(rep.holds(), "counterexample check"))
}

#[derive(Serialize)]
struct HgeoPoint {
    s: f64,
    set: IntervalUnion,
    diam: f64,
    gh_to_point: f64,
}

#[derive(Serialize)]
struct HgeoOutput {
    hausdorff: f64,
    series: Vec<HgeoPoint>,
}

fn hgeo_general(a: &Path, b: &Path, grid: usize, csv: Option<&Path>, out: Option<&Path>) -> Result<Outcome, CliError> {
    if grid < 2 {
        return Err(CliError::Usage(format!("grid of {grid} points needs at least 2")));
    }
    let a = read_intervals(a)?.to_exact();
    let b = read_intervals(b)?.to_exact();
    let r = hausdorff_distance(&a, &b);
    let steps = grid - 1;
    let mut series = Vec::with_capacity(grid);
    for i in 0..grid {
        let s = &r * rational(i as i64, steps as i64);
        let c = c_s_with_distance(&a, &b, &r, &s)?.to_f64();
        let diam = c.diam();
        series.push(HgeoPoint {
            s: s.to_f64_lossy(),
            set: c,
            diam,
            gh_to_point: diam / 2.0,
        });
    }
    if let Some(path) = csv {
        let plain: Vec<SeriesPoint> = series
            .iter()
            .map(|p| SeriesPoint {
                t: p.s,
                diam: p.diam,
                gh_to_point: p.gh_to_point,
            })
            .collect();
        series_csv(path, "s", &plain)?;
    }
    write_json(
        &HgeoOutput {
            hausdorff: r.to_f64_lossy(),
            series,
        },
        out,
    )?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct PartitionOutput {
    labels: Vec<usize>,
    report: PropertyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<SplitOutput>,
}

#[derive(Serialize)]
struct SplitOutput {
    correspondence: Correspondence,
    blocks: SplitCorrespondence,
}

fn partition(
    m: &FiniteMetricSpace,
    x: &FiniteMetricSpace,
    eps: f64,
    labels: Option<&Path>,
    split: Option<&FiniteMetricSpace>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let p: Partition = match labels {
        Some(path) => read_json(path)?,
        None => canonical_partition(m, x, eps)?,
    };
    let report = verify_partition(m, x, eps, &p)?;
    let split = match split {
        Some(y) => {
            let r = ghlab::gh_exact(x, y).witness;
            let blocks = split_correspondence(m, x, y, eps, &r)?;
            Some(SplitOutput {
                correspondence: r,
                blocks,
            })
        }
        None => None,
    };
    let pass = report.pass();
    write_json(
        &PartitionOutput {
            labels: p.labels().to_vec(),
            report,
            split,
        },
        out,
    )?;
    Ok(Outcome::from_pass(pass, "partition properties"))
}

fn report(rep: TheoremReport, out: Option<&Path>) -> Result<Outcome, CliError> {
    write_json(&rep, out)?;
    Ok(Outcome::from_pass(rep.pass, &rep.theorem))
}
