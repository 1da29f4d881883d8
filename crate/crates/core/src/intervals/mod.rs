//! Compact subsets of the real line as finite unions of closed intervals.
//!
//! Every operation needed to follow a Hausdorff geodesic between two such
//! sets is closed-form: closed neighborhoods, intersections, diameters and
//! the Hausdorff distance itself. The coordinate type is generic so the same
//! code runs on `f64` and on exact rationals ([`BigRational`]).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::FiniteMetricSpace;

mod counterexample;

pub use counterexample::{theorem2_report, CounterexampleReport, DiscreteLowerBound, GeodesicSample};

/// Default cap on the number of points produced by [`IntervalUnion::discretize`].
pub const DEFAULT_POINT_BUDGET: usize = 64;

/// Scalar type for interval endpoints.
pub trait Coord: Clone + PartialOrd + Num + Signed + Debug {
    fn is_finite_coord(&self) -> bool;
    fn to_f64_lossy(&self) -> f64;
}

impl Coord for f64 {
    fn is_finite_coord(&self) -> bool {
        self.is_finite()
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Coord for BigRational {
    fn is_finite_coord(&self) -> bool {
        true
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Exact rational value of a finite float.
pub fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("an interval union needs at least one interval")]
    Empty,
    #[error("interval {index} has lower end above upper end")]
    Inverted { index: usize },
    #[error("interval {index} has a non-finite end")]
    NotFinite { index: usize },
    #[error("neighborhood radius {0} is negative")]
    NegativeRadius(f64),
    #[error("parameter {s} is outside [0, {r}]")]
    ParameterOutOfRange { s: f64, r: f64 },
    #[error("step {0} must be positive and finite")]
    InvalidStep(f64),
    #[error("discretization has {count} points, above the budget of {budget}")]
    PointBudget { count: usize, budget: usize },
    #[error("intersection is empty")]
    EmptyIntersection,
    #[error("{0}")]
    InvalidArgument(String),
}

/// A nonempty finite union of closed intervals, stored sorted with gaps
/// between consecutive intervals. A point is the interval `[a, a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion<T: Coord = f64> {
    intervals: Vec<(T, T)>,
}

fn two<T: Coord>() -> T {
    T::one() + T::one()
}

fn max_of<T: Coord>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

fn min_of<T: Coord>(a: T, b: T) -> T {
    if a <= b {
        a
    } else {
        b
    }
}

impl<T: Coord> IntervalUnion<T> {
    /// Sorts and merges the intervals. Overlapping and touching intervals
    /// become one.
    pub fn new(mut intervals: Vec<(T, T)>) -> Result<Self, IntervalError> {
        if intervals.is_empty() {
            return Err(IntervalError::Empty);
        }
        for (index, (a, b)) in intervals.iter().enumerate() {
            if !a.is_finite_coord() || !b.is_finite_coord() {
                return Err(IntervalError::NotFinite { index });
            }
            if a > b {
                return Err(IntervalError::Inverted { index });
            }
        }
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite ends"));
        Ok(Self {
            intervals: merge_sorted(intervals),
        })
    }

    pub fn point(a: T) -> Self {
        Self {
            intervals: vec![(a.clone(), a)],
        }
    }

    pub fn interval(a: T, b: T) -> Result<Self, IntervalError> {
        Self::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(T, T)] {
        &self.intervals
    }

    pub fn min(&self) -> &T {
        &self.intervals[0].0
    }

    pub fn max(&self) -> &T {
        &self.intervals[self.intervals.len() - 1].1
    }

    pub fn diam(&self) -> T {
        self.max().clone() - self.min().clone()
    }

    pub fn contains(&self, p: &T) -> bool {
        self.intervals.iter().any(|(a, b)| a <= p && p <= b)
    }

    /// Every interval of `self` lies inside one interval of `other`.
    pub fn is_subset(&self, other: &Self) -> bool {
        self.intervals
            .iter()
            .all(|(a, b)| other.intervals.iter().any(|(c, d)| c <= a && b <= d))
    }

    /// Closed `r`-neighborhood `{p : dist(p, self) <= r}`.
    pub fn neighborhood(&self, r: &T) -> Result<Self, IntervalError> {
        if r.is_negative() {
            return Err(IntervalError::NegativeRadius(r.to_f64_lossy()));
        }
        let grown = self
            .intervals
            .iter()
            .map(|(a, b)| (a.clone() - r.clone(), b.clone() + r.clone()))
            .collect();
        Ok(Self {
            intervals: merge_sorted(grown),
        })
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a, b) = &self.intervals[i];
            let (c, d) = &other.intervals[j];
            let lo = max_of(a.clone(), c.clone());
            let hi = min_of(b.clone(), d.clone());
            if lo <= hi {
                out.push((lo, hi));
            }
            if b < d {
                i += 1;
            } else {
                j += 1;
            }
        }
        (!out.is_empty()).then(|| Self {
            intervals: merge_sorted(out),
        })
    }

    pub fn distance_to_point(&self, p: &T) -> T {
        self.intervals
            .iter()
            .map(|(a, b)| {
                if p < a {
                    a.clone() - p.clone()
                } else if p > b {
                    p.clone() - b.clone()
                } else {
                    T::zero()
                }
            })
            .reduce(min_of)
            .expect("nonempty union")
    }

    /// `sup_{p in self} dist(p, other)`.
    ///
    /// The distance to `other` is piecewise linear with local maxima only at
    /// midpoints of `other`'s gaps, so it is enough to look at the ends of
    /// `self`'s intervals and at the gap midpoints that `self` contains.
    pub fn directed_deviation(&self, other: &Self) -> T {
        let mut candidates: Vec<T> = self
            .intervals
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        for w in other.intervals.windows(2) {
            let mid = (w[0].1.clone() + w[1].0.clone()) / two();
            if self.contains(&mid) {
                candidates.push(mid);
            }
        }
        candidates
            .iter()
            .map(|p| other.distance_to_point(p))
            .reduce(max_of)
            .expect("nonempty union")
    }

    /// Gaps between consecutive intervals, as `(right end, next left end)`.
    pub fn gaps(&self) -> impl Iterator<Item = (&T, &T)> {
        self.intervals.windows(2).map(|w| (&w[0].1, &w[1].0))
    }
}

/// Hausdorff distance between two interval unions.
pub fn hausdorff_distance<T: Coord>(a: &IntervalUnion<T>, b: &IntervalUnion<T>) -> T {
    max_of(a.directed_deviation(b), b.directed_deviation(a))
}

/// `C_s(A, B) = B_s(A) ∩ B_{r-s}(B)` with `r = d_H(A, B)`, for `s` in `[0, r]`.
pub fn c_s<T: Coord>(a: &IntervalUnion<T>, b: &IntervalUnion<T>, s: &T) -> Result<IntervalUnion<T>, IntervalError> {
    let r = hausdorff_distance(a, b);
    c_s_with_distance(a, b, &r, s)
}

/// As [`c_s`], with the Hausdorff distance `r` already known.
pub fn c_s_with_distance<T: Coord>(
    a: &IntervalUnion<T>,
    b: &IntervalUnion<T>,
    r: &T,
    s: &T,
) -> Result<IntervalUnion<T>, IntervalError> {
    if s.is_negative() || s > r {
        return Err(IntervalError::ParameterOutOfRange {
            s: s.to_f64_lossy(),
            r: r.to_f64_lossy(),
        });
    }
    let near_a = a.neighborhood(s)?;
    let near_b = b.neighborhood(&(r.clone() - s.clone()))?;
    near_a.intersection(&near_b).ok_or(IntervalError::EmptyIntersection)
}

fn merge_sorted<T: Coord>(intervals: Vec<(T, T)>) -> Vec<(T, T)> {
    let mut out: Vec<(T, T)> = Vec::with_capacity(intervals.len());
    for (a, b) in intervals {
        match out.last_mut() {
            Some(last) if a <= last.1 => {
                if b > last.1 {
                    last.1 = b;
                }
            }
            _ => out.push((a, b)),
        }
    }
    out
}

impl IntervalUnion<f64> {
    /// Interval ends plus a uniform grid of spacing `step` inside each
    /// interval, in increasing order. Every point of the union is within
    /// `step / 2` of the result.
    pub fn sample_points(&self, step: f64) -> Result<Vec<f64>, IntervalError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(IntervalError::InvalidStep(step));
        }
        let mut points = Vec::new();
        for &(a, b) in &self.intervals {
            points.push(a);
            let mut k = 1.0;
            loop {
                let p = a + k * step;
                if p >= b {
                    break;
                }
                points.push(p);
                k += 1.0;
            }
            if b > a {
                points.push(b);
            }
        }
        Ok(points)
    }

    /// Finite subspace of the line made of [`IntervalUnion::sample_points`],
    /// with the induced distances `|p - q|`.
    pub fn discretize(&self, step: f64, budget: usize) -> Result<FiniteMetricSpace, IntervalError> {
        let points = self.sample_points(step)?;
        let count = points.len();
        if count > budget {
            return Err(IntervalError::PointBudget { count, budget });
        }
        let mut d = vec![0.0; count * count];
        for (i, p) in points.iter().enumerate() {
            for (j, q) in points.iter().enumerate() {
                d[i * count + j] = (p - q).abs();
            }
        }
        Ok(FiniteMetricSpace::from_flat_unchecked(count, d))
    }

    pub fn to_exact(&self) -> IntervalUnion<BigRational> {
        IntervalUnion {
            intervals: self.intervals.iter().map(|&(a, b)| (exact(a), exact(b))).collect(),
        }
    }
}

impl IntervalUnion<BigRational> {
    pub fn to_f64(&self) -> IntervalUnion<f64> {
        let intervals = self
            .intervals
            .iter()
            .map(|(a, b)| (a.to_f64_lossy(), b.to_f64_lossy()))
            .collect();
        // Rounding can only make neighbors touch, so re-merge.
        IntervalUnion {
            intervals: merge_sorted(intervals),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct UnionRepr {
    intervals: Vec<[f64; 2]>,
}

impl Serialize for IntervalUnion<f64> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        UnionRepr {
            intervals: self.intervals.iter().map(|&(a, b)| [a, b]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntervalUnion<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = UnionRepr::deserialize(deserializer)?;
        IntervalUnion::new(repr.intervals.into_iter().map(|[a, b]| (a, b)).collect()).map_err(serde::de::Error::custom)
    }
}
