//! The segment `[0, 2r]` and its two endpoints `{0, 2r}` lie in the ball of
//! radius `r` around the one-point space, yet the Hausdorff geodesic
//! `s -> C_s` between them leaves that ball at `s = r/2`, where its diameter
//! is `3r`.
//!
//! All set computations run on exact rationals; the report carries them as
//! `f64` together with flags recording which identities held exactly.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use super::{c_s_with_distance, exact, hausdorff_distance, Coord, IntervalError, IntervalUnion};
use crate::metric::FiniteMetricSpace;
use crate::solver::gh_exact;

/// Number of successive halvings of the discretization step.
const LOWER_BOUND_LEVELS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicSample {
    pub s: f64,
    /// `d_H(C_s, A)`.
    pub dh_to_a: f64,
    /// `d_H(C_s, B)`.
    pub dh_to_b: f64,
    pub diam: f64,
    /// `d_GH(C_s, point) = diam / 2`.
    pub gh_to_point: f64,
    /// `d_H(C_s, A) = s` and `d_H(C_s, B) = r - s`, exactly.
    pub s_position: bool,
}

/// Lower bound on `d_GH(A, B)` obtained from a finite sample `A_h` of `A`:
/// `d_GH(A, B) >= d_GH(A_h, B) - d_H(A, A_h)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteLowerBound {
    pub step: f64,
    pub points: usize,
    pub gh_discrete: f64,
    pub discretization_error: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub r: f64,
    pub a: IntervalUnion,
    pub b: IntervalUnion,
    pub hausdorff_ab: f64,
    /// `d_GH(A, B) <= d_H(A, B)`.
    pub gh_upper: f64,
    pub c_half: IntervalUnion,
    /// `C_{r/2} = [-r/2, r/2] ∪ [3r/2, 5r/2]` exactly.
    pub c_half_matches: bool,
    pub diam_c_half: f64,
    pub diam_is_3r: bool,
    pub gh_c_half_to_point: f64,
    /// `d_GH(C_{r/2}, point) - r`; positive means the curve left the ball.
    pub violation_margin: f64,
    /// Exact distance from a discretization of `C_{r/2}` to the point.
    pub discrete_c_half_to_point: f64,
    pub samples: Vec<GeodesicSample>,
    pub additivity_sum: f64,
    /// The consecutive Hausdorff distances add up to `r` exactly.
    pub additivity_exact: bool,
    pub lower_bounds: Vec<DiscreteLowerBound>,
}

impl CounterexampleReport {
    /// Every identity held and the ball was left.
    pub fn holds(&self) -> bool {
        self.c_half_matches
            && self.diam_is_3r
            && self.violation_margin > 0.0
            && self.additivity_exact
            && self.samples.iter().all(|s| s.s_position)
            && (self.discrete_c_half_to_point - self.gh_c_half_to_point).abs() <= 1e-12 * self.r
            && self.lower_bounds_converge()
    }

    /// Each discrete lower bound equals `r - step` up to rounding.
    pub fn lower_bounds_converge(&self) -> bool {
        self.lower_bounds
            .iter()
            .all(|lb| (lb.lower_bound - (self.r - lb.step)).abs() <= 1e-12 * self.r)
    }
}

/// Builds the full report for radius `r` on a uniform grid of `grid` values
/// of `s` in `[0, r]`.
pub fn theorem2_report(r: f64, grid: usize) -> Result<CounterexampleReport, IntervalError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(IntervalError::InvalidArgument(format!(
            "radius {r} must be positive and finite"
        )));
    }
    if grid < 2 {
        return Err(IntervalError::InvalidArgument(format!(
            "grid of {grid} points needs at least 2"
        )));
    }
    let re = exact(r);
    let two_r = &re + &re;
    let a = IntervalUnion::interval(BigRational::zero(), two_r.clone())?;
    let b = IntervalUnion::new(vec![(BigRational::zero(), BigRational::zero()), (two_r.clone(), two_r)])?;
    let dh = hausdorff_distance(&a, &b);

    let half = &re / BigRational::from_integer(2.into());
    let c_half = c_s_with_distance(&a, &b, &dh, &half)?;
    let three_halves = &re + &half;
    let expected = IntervalUnion::new(vec![
        (-half.clone(), half.clone()),
        (three_halves.clone(), &three_halves + &re),
    ])?;
    let diam_half = c_half.diam();
    let three_r = &re + &re + &re;

    let steps = grid - 1;
    let mut curve = Vec::with_capacity(grid);
    for i in 0..grid {
        let s = &dh * BigRational::new(i.into(), steps.into());
        let c = c_s_with_distance(&a, &b, &dh, &s)?;
        curve.push((s, c));
    }
    let samples = curve
        .iter()
        .map(|(s, c)| {
            let to_a = hausdorff_distance(c, &a);
            let to_b = hausdorff_distance(c, &b);
            let diam = c.diam();
            GeodesicSample {
                s: s.to_f64_lossy(),
                dh_to_a: to_a.to_f64_lossy(),
                dh_to_b: to_b.to_f64_lossy(),
                gh_to_point: (&diam / BigRational::from_integer(2.into())).to_f64_lossy(),
                diam: diam.to_f64_lossy(),
                s_position: to_a == *s && to_b == &dh - s,
            }
        })
        .collect();
    let additivity: BigRational = curve
        .windows(2)
        .map(|w| hausdorff_distance(&w[0].1, &w[1].1))
        .fold(BigRational::zero(), |acc, v| acc + v);

    let a_f = a.to_f64();
    let b_f = b.to_f64();
    let b_space = b_f.discretize(r, 2)?;
    let mut lower_bounds = Vec::new();
    for level in 1..=LOWER_BOUND_LEVELS {
        let step = r / f64::from(1u32 << level);
        let a_h = a_f.discretize(step, usize::MAX)?;
        let sample = IntervalUnion::new(a_f.sample_points(step)?.into_iter().map(|p| (p, p)).collect())?;
        let gh = gh_exact(&a_h, &b_space).distance;
        let err = hausdorff_distance(&a_f, &sample);
        lower_bounds.push(DiscreteLowerBound {
            step,
            points: a_h.len(),
            gh_discrete: gh,
            discretization_error: err,
            lower_bound: gh - err,
        });
    }

    let c_half_f = c_half.to_f64();
    let discrete_half = c_half_f.discretize(r / 4.0, usize::MAX)?;
    let gh_half = (&diam_half / BigRational::from_integer(2.into())).to_f64_lossy();

    Ok(CounterexampleReport {
        r,
        a: a_f,
        b: b_f,
        hausdorff_ab: dh.to_f64_lossy(),
        gh_upper: dh.to_f64_lossy(),
        c_half_matches: c_half == expected,
        diam_c_half: diam_half.to_f64_lossy(),
        diam_is_3r: diam_half == three_r,
        gh_c_half_to_point: gh_half,
        violation_margin: (&diam_half / BigRational::from_integer(2.into()) - &re).to_f64_lossy(),
        discrete_c_half_to_point: gh_exact(&discrete_half, &FiniteMetricSpace::point()).distance,
        c_half: c_half_f,
        samples,
        additivity_sum: additivity.to_f64_lossy(),
        additivity_exact: additivity == dh,
        lower_bounds,
    })
}
