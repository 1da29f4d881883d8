//! End-to-end checks of the convexity statements on concrete instances.
//!
//! * Balls around the one-point space contain a shortest curve between any
//!   two of their points: along `R_t`, `diam(R_t) <= max(diam X, diam Y)`.
//! * They do not contain every shortest curve: the Hausdorff geodesic between
//!   `[0, 2r]` and `{0, 2r}` leaves the ball of radius `r`.
//! * Balls of radius `r = min(s, e) / 4` around a space `M` in general
//!   position contain a shortest curve between any two of their points. The
//!   proof bounds `d_GH(M, R_t)` through `R' = ⊔ {i} x R_i`; both that bound
//!   and the exact distance are checked.
//!
//! Every check becomes a [`Sample`]; a report passes iff all samples do.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::geodesic::{uniform_grid, GeodesicCurve, GeodesicError};
use crate::intervals::{theorem2_report, IntervalError};
use crate::metric::{perturb, random_general_position_with, FiniteMetricSpace, MetricError};
use crate::partition::{canonical_partition, split_with_partitions, PartitionError};
use crate::solver::gh_exact;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Relative shrink applied to perturbation magnitudes so generated spaces
/// stay strictly inside the ball.
pub const INTERIOR_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("{space} is outside the ball: {value} > {bound}")]
    OutsideBall { space: String, value: f64, bound: f64 },
    #[error("center has {0} points; at least 3 are needed")]
    CenterTooSmall(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    /// Equal up to a stated tolerance.
    Approx,
}

/// One measured quantity and the bound it must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    /// Curve parameter, absent for instance-level checks.
    pub t: Option<f64>,
    pub check: String,
    pub value: f64,
    pub bound: f64,
    pub comparison: Comparison,
    pub ok: bool,
}

impl Sample {
    pub fn new(t: Option<f64>, check: &str, value: f64, comparison: Comparison, bound: f64) -> Self {
        let ok = match comparison {
            Comparison::Le => value <= bound,
            Comparison::Lt => value < bound,
            Comparison::Ge => value >= bound,
            Comparison::Gt => value > bound,
            Comparison::Eq => value == bound,
            Comparison::Approx => unreachable!("use Sample::approx"),
        };
        Self {
            t,
            check: check.to_string(),
            value,
            bound,
            comparison,
            ok,
        }
    }

    pub fn approx(t: Option<f64>, check: &str, value: f64, bound: f64, tol: f64) -> Self {
        Self {
            t,
            check: check.to_string(),
            value,
            bound,
            comparison: Comparison::Approx,
            ok: (value - bound).abs() <= tol,
        }
    }

    /// A check whose outcome was decided elsewhere, e.g. by exact arithmetic.
    pub fn flag(t: Option<f64>, check: &str, value: f64, bound: f64, ok: bool) -> Self {
        Self {
            t,
            check: check.to_string(),
            value,
            bound,
            comparison: Comparison::Eq,
            ok,
        }
    }

    /// Signed slack of an inequality; `None` for equalities.
    pub fn margin(&self) -> Option<f64> {
        match self.comparison {
            Comparison::Le | Comparison::Lt => Some(self.bound - self.value),
            Comparison::Ge | Comparison::Gt => Some(self.value - self.bound),
            Comparison::Eq | Comparison::Approx => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub theorem: String,
    pub params: serde_json::Value,
    pub samples: Vec<Sample>,
    pub pass: bool,
    /// Smallest slack of the samples measuring the headline bound.
    pub worst_margin: f64,
    pub seed: Option<u64>,
    pub version: String,
}

impl TheoremReport {
    fn new(theorem: &str, params: serde_json::Value, samples: Vec<Sample>, headline: &[&str]) -> Self {
        let pass = samples.iter().all(|s| s.ok);
        let worst_margin = samples
            .iter()
            .filter(|s| headline.contains(&s.check.as_str()))
            .filter_map(Sample::margin)
            .fold(f64::INFINITY, f64::min);
        Self {
            theorem: theorem.to_string(),
            params,
            samples,
            pass,
            worst_margin,
            seed: None,
            version: VERSION.to_string(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| !s.ok)
    }
}

fn check_grid(t_grid: usize) -> Result<Vec<f64>, HarnessError> {
    if t_grid < 2 {
        return Err(HarnessError::InvalidArgument(format!(
            "grid of {t_grid} points needs at least 2"
        )));
    }
    Ok(uniform_grid(t_grid))
}

/// Follows `R_t` between two spaces of diameter at most `2r` and checks that
/// it stays within `r` of the one-point space.
pub fn verify_theorem1(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    r: f64,
    t_grid: usize,
) -> Result<TheoremReport, HarnessError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(HarnessError::InvalidArgument(format!(
            "radius {r} must be positive and finite"
        )));
    }
    let ts = check_grid(t_grid)?;
    for (name, space) in [("X", x), ("Y", y)] {
        if space.diam() > 2.0 * r {
            return Err(HarnessError::OutsideBall {
                space: name.to_string(),
                value: space.diam(),
                bound: 2.0 * r,
            });
        }
    }
    let curve = GeodesicCurve::new(x.clone(), y.clone());
    let point = FiniteMetricSpace::point();
    let diam_bound = x.diam().max(y.diam());
    let mut samples = Vec::with_capacity(3 * ts.len());
    for &t in &ts {
        let rt = curve.evaluate(t)?;
        let diam = rt.diam();
        let gh = gh_exact(&point, &rt).distance;
        samples.push(Sample::new(Some(t), "diam_bound", diam, Comparison::Le, diam_bound));
        samples.push(Sample::new(
            Some(t),
            "gh_to_point_is_half_diam",
            gh,
            Comparison::Eq,
            diam / 2.0,
        ));
        samples.push(Sample::new(Some(t), "gh_to_point", gh, Comparison::Le, r));
    }
    let params = json!({
        "r": r,
        "t_grid": t_grid,
        "n_x": x.len(),
        "n_y": y.len(),
        "diam_x": x.diam(),
        "diam_y": y.diam(),
        "gh_xy": curve.gh(),
    });
    Ok(TheoremReport::new("theorem1", params, samples, &["gh_to_point"]))
}

/// Checks the interval counterexample for radius `r` on each grid, and that
/// the headline values do not depend on the grid.
pub fn verify_theorem2(r: f64, grids: &[usize]) -> Result<TheoremReport, HarnessError> {
    if grids.is_empty() {
        return Err(HarnessError::InvalidArgument("no grids given".into()));
    }
    let mut samples = Vec::new();
    let mut headline: Option<(f64, f64)> = None;
    let mut params = Vec::new();
    for &grid in grids {
        let rep = theorem2_report(r, grid)?;
        let tol = 1e-12 * r;
        let half = r / 2.0;
        samples.push(Sample::new(None, "hausdorff_ab", rep.hausdorff_ab, Comparison::Eq, r));
        samples.push(Sample::flag(
            Some(half),
            "c_half_shape",
            rep.diam_c_half,
            3.0 * r,
            rep.c_half_matches,
        ));
        samples.push(Sample::flag(
            Some(half),
            "diam_c_half",
            rep.diam_c_half,
            3.0 * r,
            rep.diam_is_3r,
        ));
        samples.push(Sample::new(
            Some(half),
            "leaves_ball",
            rep.gh_c_half_to_point,
            Comparison::Gt,
            r,
        ));
        samples.push(Sample::approx(
            Some(half),
            "discrete_c_half_to_point",
            rep.discrete_c_half_to_point,
            rep.gh_c_half_to_point,
            tol,
        ));
        samples.push(Sample::flag(
            None,
            "additivity",
            rep.additivity_sum,
            r,
            rep.additivity_exact,
        ));
        for s in &rep.samples {
            samples.push(Sample::flag(Some(s.s), "s_position", s.dh_to_a, s.s, s.s_position));
        }
        for lb in &rep.lower_bounds {
            samples.push(Sample::approx(
                None,
                "discrete_lower_bound",
                lb.lower_bound,
                r - lb.step,
                tol,
            ));
        }
        let values = (rep.diam_c_half, rep.violation_margin);
        match headline {
            None => headline = Some(values),
            Some(first) => samples.push(Sample::flag(
                None,
                "grid_independent",
                values.1,
                first.1,
                values == first,
            )),
        }
        params.push(json!({ "grid": grid, "violation_margin": rep.violation_margin, "c_half": rep.c_half }));
    }
    let params = json!({ "r": r, "grids": params });
    Ok(TheoremReport::new("theorem2", params, samples, &["leaves_ball"]))
}

/// Radius of the balls around `m` covered by the weak convexity statement.
pub fn theorem3_radius(m: &FiniteMetricSpace) -> f64 {
    m.s_value().min(m.e_value()) / 4.0
}

/// Follows `R_t` between two spaces in the ball of radius
/// `r = min(s(M), e(M)) / 4` around `M` and checks both the bound through
/// `R'` and the exact distance to `M`.
///
/// Spaces exactly on the sphere (`d_GH = r`) are accepted, but the partition
/// construction needs `2 d_GH < 2r`, so only the exact distance is checked
/// for them and the report's `boundary` parameter is set.
pub fn verify_theorem3(
    m: &FiniteMetricSpace,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    t_grid: usize,
) -> Result<TheoremReport, HarnessError> {
    if m.len() < 3 {
        return Err(HarnessError::CenterTooSmall(m.len()));
    }
    if !m.is_general_position() {
        return Err(PartitionError::NotGeneralPosition.into());
    }
    let ts = check_grid(t_grid)?;
    let r = theorem3_radius(m);
    let eps = 2.0 * r;
    let gh_mx = gh_exact(m, x).distance;
    let gh_my = gh_exact(m, y).distance;
    for (name, gh) in [("X", gh_mx), ("Y", gh_my)] {
        if gh > r {
            return Err(HarnessError::OutsideBall {
                space: name.to_string(),
                value: gh,
                bound: r,
            });
        }
    }
    let boundary = gh_mx == r || gh_my == r;
    let curve = GeodesicCurve::new(x.clone(), y.clone());
    let mut samples = Vec::with_capacity(3 * ts.len() + 1);

    // Label of each pair of the witness under the blockwise split.
    let mut labels = None;
    if !boundary {
        let px = canonical_partition(m, x, eps)?;
        let py = canonical_partition(m, y, eps)?;
        match split_with_partitions(&px, &py, curve.witness()) {
            Ok(split) => {
                samples.push(Sample::flag(None, "blockwise_split", 0.0, 0.0, true));
                labels = Some(split.labels_of(curve.witness()));
            }
            Err(PartitionError::CrossBlock { .. }) => {
                samples.push(Sample::flag(None, "blockwise_split", 1.0, 0.0, false));
            }
            Err(e) => return Err(e.into()),
        }
    }

    for &t in &ts {
        let rt = curve.evaluate(t)?;
        let exact = gh_exact(m, &rt).distance;
        samples.push(Sample::new(Some(t), "gh_to_center", exact, Comparison::Le, r));
        if let Some(labels) = &labels {
            let k = labels.len();
            let mut dis = 0.0f64;
            for a in 0..k {
                for b in (a + 1)..k {
                    dis = dis.max((m.dist(labels[a], labels[b]) - curve.pair_distance(t, a, b)).abs());
                }
            }
            let analytic = dis / 2.0;
            samples.push(Sample::new(Some(t), "split_bound", analytic, Comparison::Le, r));
            samples.push(Sample::new(
                Some(t),
                "split_bound_dominates",
                exact,
                Comparison::Le,
                analytic,
            ));
        }
    }
    let params = json!({
        "r": r,
        "eps": eps,
        "t_grid": t_grid,
        "n_m": m.len(),
        "n_x": x.len(),
        "n_y": y.len(),
        "s": m.s_value(),
        "e": m.e_value(),
        "gh_mx": gh_mx,
        "gh_my": gh_my,
        "gh_xy": curve.gh(),
        "boundary": boundary,
    });
    Ok(TheoremReport::new(
        "theorem3",
        params,
        samples,
        &["gh_to_center", "split_bound"],
    ))
}

/// Pass count and worst margin for one statement across a campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub passed: usize,
    pub worst_margin: f64,
    /// Trial indices whose report failed.
    pub failed_trials: Vec<usize>,
}

impl Aggregate {
    fn from_reports<'a>(reports: impl Iterator<Item = (usize, &'a TheoremReport)>) -> Self {
        let mut agg = Aggregate {
            runs: 0,
            passed: 0,
            worst_margin: f64::INFINITY,
            failed_trials: Vec::new(),
        };
        for (k, rep) in reports {
            agg.runs += 1;
            if rep.pass {
                agg.passed += 1;
            } else {
                agg.failed_trials.push(k);
            }
            agg.worst_margin = agg.worst_margin.min(rep.worst_margin);
        }
        agg
    }

    pub fn pass_rate(&self) -> f64 {
        if self.runs == 0 {
            1.0
        } else {
            self.passed as f64 / self.runs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub seed: u64,
    pub trials: usize,
    pub sizes: Vec<usize>,
    pub theorem1: Aggregate,
    pub theorem2: Aggregate,
    pub theorem3: Aggregate,
    /// Instances of the third check that landed exactly on the sphere.
    pub theorem3_boundary: usize,
    pub pass: bool,
    pub version: String,
}

struct TrialReports {
    theorem1: TheoremReport,
    theorem2: TheoremReport,
    theorem3: TheoremReport,
}

fn run_trial(seed: u64, k: usize, n: usize) -> Result<TrialReports, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);

    let r = rng.gen_range(0.5..2.0);
    let nx = rng.gen_range(1..=n);
    let scale_x = 2.0 * r;
    let scale_y = 2.0 * r * rng.gen_range(0.25..=1.0);
    let x = random_general_position_with(&mut rng, nx, scale_x, 0.0)?;
    let y = random_general_position_with(&mut rng, n, scale_y, 0.0)?;
    let theorem1 = verify_theorem1(&x, &y, r, crate::geodesic::DEFAULT_GRID)?;

    let r2 = rng.gen_range(0.1..10.0);
    let theorem2 = verify_theorem2(r2, &[11, 21])?;

    let nm = n.max(3);
    let scale = rng.gen_range(1.0..4.0);
    let m = random_general_position_with(&mut rng, nm, scale, 0.05)?;
    let radius = theorem3_radius(&m);
    let near = |rng: &mut ChaCha8Rng| -> Result<FiniteMetricSpace, MetricError> {
        let magnitude = 2.0 * radius * (1.0 - INTERIOR_MARGIN) * rng.gen_range(0.1..=1.0);
        let split = if rng.gen_bool(0.5) {
            Some(rng.gen_range(0..nm))
        } else {
            None
        };
        perturb(&m, magnitude, split, rng)
    };
    let mx = near(&mut rng)?;
    let my = near(&mut rng)?;
    let theorem3 = verify_theorem3(&m, &mx, &my, crate::geodesic::DEFAULT_GRID)?;

    Ok(TrialReports {
        theorem1: theorem1.with_seed(seed),
        theorem2: theorem2.with_seed(seed),
        theorem3: theorem3.with_seed(seed),
    })
}

/// Runs `trials` independent trials of all three checks. Trial `k` draws
/// from its own stream of a generator seeded with `seed`, using size
/// `sizes[k % sizes.len()]`, so the summary depends only on the arguments.
pub fn campaign(seed: u64, trials: usize, sizes: &[usize]) -> Result<CampaignSummary, HarnessError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(HarnessError::InvalidArgument(
            "sizes must be nonempty and positive".into(),
        ));
    }
    let reports = (0..trials)
        .into_par_iter()
        .map(|k| run_trial(seed, k, sizes[k % sizes.len()]))
        .collect::<Result<Vec<_>, _>>()?;
    let theorem1 = Aggregate::from_reports(reports.iter().map(|r| &r.theorem1).enumerate());
    let theorem2 = Aggregate::from_reports(reports.iter().map(|r| &r.theorem2).enumerate());
    let theorem3 = Aggregate::from_reports(reports.iter().map(|r| &r.theorem3).enumerate());
    let theorem3_boundary = reports
        .iter()
        .filter(|r| r.theorem3.params["boundary"] == json!(true))
        .count();
    let pass = [&theorem1, &theorem2, &theorem3].iter().all(|a| a.passed == a.runs);
    Ok(CampaignSummary {
        seed,
        trials,
        sizes: sizes.to_vec(),
        theorem1,
        theorem2,
        theorem3,
        theorem3_boundary,
        pass,
        version: VERSION.to_string(),
    })
}
