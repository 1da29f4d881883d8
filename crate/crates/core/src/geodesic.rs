//! Shortest curves in Gromov-Hausdorff space built from an optimal
//! correspondence.
//!
//! For an optimal correspondence `R` between `X` and `Y`, the spaces
//! `R_t = (R, rho_t)` with
//!
//! ```text
//! rho_t((x, y), (x', y')) = (1 - t) |xx'| + t |yy'|
//! ```
//!
//! trace a shortest curve from `X` (at `t = 0`) to `Y` (at `t = 1`). At the
//! endpoints `rho_t` is only a pseudometric on `R`, so the endpoint spaces
//! themselves are returned there.

use thiserror::Error;

use crate::correspondence::{distortion, Correspondence, RelationError};
use crate::metric::FiniteMetricSpace;
use crate::solver::{gh_exact, solve, SolveError, SolverOptions};

/// Default number of points in a uniform `t` grid.
pub const DEFAULT_GRID: usize = 33;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesicError {
    #[error("curve parameter {0} is outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("correspondence has distortion {distortion} but the distance is {distance}")]
    NotOptimal { distortion: f64, distance: f64 },
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A shortest curve `t -> R_t` between two finite metric spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicCurve {
    x: FiniteMetricSpace,
    y: FiniteMetricSpace,
    witness: Correspondence,
    gh: f64,
}

impl GeodesicCurve {
    /// Curve induced by an optimal correspondence from the exact solver.
    pub fn new(x: FiniteMetricSpace, y: FiniteMetricSpace) -> Self {
        let res = gh_exact(&x, &y);
        Self {
            x,
            y,
            witness: res.witness,
            gh: res.distance,
        }
    }

    /// As [`GeodesicCurve::new`], aborting when the solver exceeds its budget.
    pub fn with_options(
        x: FiniteMetricSpace,
        y: FiniteMetricSpace,
        opts: SolverOptions,
    ) -> Result<Self, GeodesicError> {
        let res = solve(&x, &y, opts)?;
        Ok(Self {
            x,
            y,
            witness: res.witness,
            gh: res.distance,
        })
    }

    /// Curve induced by a caller-supplied correspondence, which must be optimal.
    pub fn from_correspondence(
        x: FiniteMetricSpace,
        y: FiniteMetricSpace,
        witness: Correspondence,
    ) -> Result<Self, GeodesicError> {
        let dis = distortion(&witness, &x, &y)?;
        let distance = gh_exact(&x, &y).distance;
        if dis / 2.0 != distance {
            return Err(GeodesicError::NotOptimal {
                distortion: dis,
                distance,
            });
        }
        Ok(Self {
            x,
            y,
            witness,
            gh: distance,
        })
    }

    pub fn start(&self) -> &FiniteMetricSpace {
        &self.x
    }

    pub fn end(&self) -> &FiniteMetricSpace {
        &self.y
    }

    pub fn witness(&self) -> &Correspondence {
        &self.witness
    }

    /// Gromov-Hausdorff distance between the endpoints, i.e. the curve length.
    pub fn gh(&self) -> f64 {
        self.gh
    }

    /// `rho_t` between the `a`-th and `b`-th pairs of the witness, for any
    /// `t` in `[0, 1]`.
    ///
    /// The convex combination is clamped to the interval spanned by its two
    /// terms so rounding never leaves it.
    pub fn pair_distance(&self, t: f64, a: usize, b: usize) -> f64 {
        let pairs = self.witness.pairs();
        let (x1, y1) = pairs[a];
        let (x2, y2) = pairs[b];
        interpolate(self.x.dist(x1, x2), self.y.dist(y1, y2), t)
    }

    /// The space `R_t`.
    pub fn evaluate(&self, t: f64) -> Result<FiniteMetricSpace, GeodesicError> {
        check_parameter(t)?;
        if t == 0.0 {
            return Ok(self.x.clone());
        }
        if t == 1.0 {
            return Ok(self.y.clone());
        }
        let k = self.witness.len();
        let mut d = vec![0.0; k * k];
        for a in 0..k {
            for b in (a + 1)..k {
                let v = self.pair_distance(t, a, b);
                assert!(v > 0.0, "distinct pairs at interior t = {t} collapsed");
                d[a * k + b] = v;
                d[b * k + a] = v;
            }
        }
        Ok(FiniteMetricSpace::from_flat_unchecked(k, d))
    }

    /// Diameter of `R_t`.
    pub fn interior_diam(&self, t: f64) -> Result<f64, GeodesicError> {
        Ok(self.evaluate(t)?.diam())
    }

    /// Sum of exact distances between consecutive samples of the curve.
    ///
    /// `ts` must start at 0, end at 1 and be strictly increasing.
    pub fn polyline_length(&self, ts: &[f64]) -> Result<f64, GeodesicError> {
        check_grid(ts)?;
        let spaces = ts.iter().map(|&t| self.evaluate(t)).collect::<Result<Vec<_>, _>>()?;
        Ok(spaces.windows(2).map(|w| gh_exact(&w[0], &w[1]).distance).sum())
    }
}

pub(crate) fn interpolate(a: f64, b: f64, t: f64) -> f64 {
    ((1.0 - t) * a + t * b).clamp(a.min(b), a.max(b))
}

fn check_parameter(t: f64) -> Result<(), GeodesicError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(GeodesicError::ParameterOutOfRange(t))
    }
}

fn check_grid(ts: &[f64]) -> Result<(), GeodesicError> {
    if ts.len() < 2 {
        return Err(GeodesicError::InvalidGrid("needs at least two points".into()));
    }
    if ts[0] != 0.0 || ts[ts.len() - 1] != 1.0 {
        return Err(GeodesicError::InvalidGrid("must start at 0 and end at 1".into()));
    }
    if ts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GeodesicError::InvalidGrid("must be strictly increasing".into()));
    }
    Ok(())
}

/// `k` evenly spaced parameters from 0 to 1 inclusive (`k >= 2`).
pub fn uniform_grid(k: usize) -> Vec<f64> {
    assert!(k >= 2, "a grid needs both endpoints");
    let last = (k - 1) as f64;
    (0..k).map(|i| i as f64 / last).collect()
}
