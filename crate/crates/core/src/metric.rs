//! Finite metric spaces and the scalar diagnostics used by the convexity checks.
//!
//! Points are the indices `0..n`. Distances live in a dense row-major matrix.
//! A space is only ever built through [`FiniteMetricSpace::validate`] (or by
//! operations whose output is a metric by construction), so every value of the
//! type satisfies the metric axioms.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of attempts made by [`random_general_position`].
pub const GENERATOR_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("a metric space needs at least one point")]
    Empty,
    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("declared size {declared} does not match the matrix size {actual}")]
    SizeMismatch { declared: usize, actual: usize },
    #[error("non-finite distance at ({i}, {j})")]
    NotFinite { i: usize, j: usize },
    #[error("nonzero diagonal at ({i}, {i}): {value}")]
    NonZeroDiagonal { i: usize, value: f64 },
    #[error("asymmetric distances at ({i}, {j}): {dij} vs {dji}")]
    Asymmetric { i: usize, j: usize, dij: f64, dji: f64 },
    #[error("distinct points ({i}, {j}) have non-positive distance {value}")]
    NonPositive { i: usize, j: usize, value: f64 },
    #[error(
        "triangle inequality violated at ({i},{k},{j}): d[{i}][{k}] = {direct} > {detour} = d[{i}][{j}] + d[{j}][{k}]"
    )]
    Triangle {
        i: usize,
        k: usize,
        j: usize,
        direct: f64,
        detour: f64,
    },
    #[error("no general-position space found after {attempts} attempts (n = {n}, min_sep = {min_sep})")]
    GenerationFailed { n: usize, min_sep: f64, attempts: usize },
}

/// A finite metric space on the points `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    n: usize,
    d: Vec<f64>,
}

impl FiniteMetricSpace {
    /// Checks the metric axioms on `matrix` and builds the space.
    ///
    /// Symmetry, the zero diagonal and the triangle inequality are checked
    /// with slack `tol`; positivity of off-diagonal entries is always strict.
    /// When `tol > 0` the stored matrix is symmetrized and its diagonal zeroed.
    /// The first violated axiom is reported with its witnessing indices.
    pub fn validate(matrix: &[Vec<f64>], tol: f64) -> Result<Self, MetricError> {
        let n = matrix.len();
        if n == 0 {
            return Err(MetricError::Empty);
        }
        for (row, r) in matrix.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NotSquare { row, len: r.len(), n });
            }
        }
        for (i, r) in matrix.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                if !v.is_finite() {
                    return Err(MetricError::NotFinite { i, j });
                }
            }
        }
        for (i, r) in matrix.iter().enumerate() {
            if r[i].abs() > tol {
                return Err(MetricError::NonZeroDiagonal { i, value: r[i] });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (dij, dji) = (matrix[i][j], matrix[j][i]);
                if (dij - dji).abs() > tol {
                    return Err(MetricError::Asymmetric { i, j, dij, dji });
                }
            }
        }
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d[i * n + j] = if tol > 0.0 {
                        0.5 * (matrix[i][j] + matrix[j][i])
                    } else {
                        matrix[i][j]
                    };
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && d[i * n + j] <= 0.0 {
                    return Err(MetricError::NonPositive {
                        i,
                        j,
                        value: d[i * n + j],
                    });
                }
            }
        }
        for i in 0..n {
            for k in 0..n {
                let direct = d[i * n + k];
                for j in 0..n {
                    let detour = d[i * n + j] + d[j * n + k];
                    if direct > detour + tol {
                        return Err(MetricError::Triangle {
                            i,
                            k,
                            j,
                            direct,
                            detour,
                        });
                    }
                }
            }
        }
        Ok(Self { n, d })
    }

    /// Builds a space from a flat matrix known to be a metric.
    pub(crate) fn from_flat_unchecked(n: usize, d: Vec<f64>) -> Self {
        debug_assert_eq!(d.len(), n * n);
        debug_assert!(n >= 1);
        Self { n, d }
    }

    /// The one-point space.
    pub fn point() -> Self {
        Self { n: 1, d: vec![0.0] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false: a metric space has at least one point.
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Largest distance from `i` to any point.
    pub fn eccentricity(&self, i: usize) -> f64 {
        self.row(i).iter().copied().fold(0.0, f64::max)
    }

    pub fn diam(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest distance between distinct points, `+inf` for a single point.
    pub fn s_value(&self) -> f64 {
        let mut s = f64::INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                s = s.min(self.dist(i, j));
            }
        }
        s
    }

    /// Smallest gap between distances of two different unordered pairs,
    /// `+inf` when there are fewer than two such pairs.
    pub fn e_value(&self) -> f64 {
        let mut values = self.pair_distances();
        values.sort_by(f64::total_cmp);
        values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// All nonzero distances are distinct and every triangle of distinct
    /// points is strict.
    pub fn is_general_position(&self) -> bool {
        if self.e_value() <= 0.0 {
            return false;
        }
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    if self.dist(i, k) >= self.dist(i, j) + self.dist(j, k) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Gromov-Hausdorff distance to the one-point space.
    pub fn gh_to_point(&self) -> f64 {
        self.diam() / 2.0
    }

    pub fn diagnostics(&self) -> SpaceDiagnostics {
        SpaceDiagnostics {
            n: self.n,
            diam: self.diam(),
            s: self.s_value(),
            e: self.e_value(),
            general_position: self.is_general_position(),
        }
    }

    fn pair_distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out.push(self.dist(i, j));
            }
        }
        out
    }

    /// Restriction to the given points, in the given order.
    pub fn subspace(&self, points: &[usize]) -> Self {
        let m = points.len();
        let mut d = vec![0.0; m * m];
        for (a, &i) in points.iter().enumerate() {
            for (b, &j) in points.iter().enumerate() {
                d[a * m + b] = self.dist(i, j);
            }
        }
        Self::from_flat_unchecked(m, d)
    }
}

/// Scalar summary of a space. Infinite `s`/`e` encode an empty infimum and
/// serialize as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceDiagnostics {
    pub n: usize,
    pub diam: f64,
    pub s: f64,
    pub e: f64,
    pub general_position: bool,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    n: usize,
    d: Vec<Vec<f64>>,
}

impl Serialize for FiniteMetricSpace {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SpaceRepr {
            n: self.n,
            d: self.to_matrix(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FiniteMetricSpace {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = SpaceRepr::deserialize(deserializer)?;
        if repr.n != repr.d.len() {
            return Err(serde::de::Error::custom(MetricError::SizeMismatch {
                declared: repr.n,
                actual: repr.d.len(),
            }));
        }
        FiniteMetricSpace::validate(&repr.d, 0.0).map_err(serde::de::Error::custom)
    }
}

/// Draws a random space in general position.
///
/// Pairwise distances are drawn from `[scale/2, scale]`, which makes every
/// triangle strict, and spread so that any two of them differ by at least
/// `min_sep * scale`. Each attempt is checked against [`FiniteMetricSpace::validate`]
/// and the general-position and separation requirements; the same `seed`
/// always produces the same space.
pub fn random_general_position(
    n: usize,
    seed: u64,
    scale: f64,
    min_sep: f64,
) -> Result<FiniteMetricSpace, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_general_position_with(&mut rng, n, scale, min_sep)
}

/// As [`random_general_position`], drawing from a caller-owned generator.
pub fn random_general_position_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    scale: f64,
    min_sep: f64,
) -> Result<FiniteMetricSpace, MetricError> {
    if n <= 1 {
        return Ok(FiniteMetricSpace::point());
    }
    let pairs = n * (n - 1) / 2;
    let lo = 0.5 * scale;
    let gap = min_sep * scale;
    let slack = (scale - lo) - gap * (pairs - 1) as f64;
    for _ in 0..GENERATOR_RETRIES {
        let mut values: Vec<f64> = if slack > 0.0 {
            // Sorted uniform draws on a shortened range, then shifted apart.
            let mut u: Vec<f64> = (0..pairs).map(|_| rng.gen::<f64>() * slack).collect();
            u.sort_by(f64::total_cmp);
            u.iter().enumerate().map(|(k, v)| lo + v + gap * k as f64).collect()
        } else {
            (0..pairs).map(|_| rng.gen_range(lo..=scale)).collect()
        };
        values.shuffle(rng);
        let mut m = vec![vec![0.0; n]; n];
        let mut it = values.into_iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = it.next().expect("one value per pair");
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        let Ok(space) = FiniteMetricSpace::validate(&m, 0.0) else {
            continue;
        };
        if space.is_general_position() && space.s_value() >= gap && space.e_value() >= gap {
            return Ok(space);
        }
    }
    Err(MetricError::GenerationFailed {
        n,
        min_sep,
        attempts: GENERATOR_RETRIES,
    })
}

/// A random metric space close to `center`.
///
/// Every distance moves by less than `magnitude / 2`. With `split = Some(i)`
/// the point `i` gets a twin (appended as the last point) at distance in
/// `[magnitude / 4, magnitude / 2]` from it, whose distances to the other
/// points differ from `i`'s by at most that amount. The identity
/// correspondence (plus the twin pair) then has distortion below `magnitude`.
/// Draws that break the triangle inequality are redrawn.
pub fn perturb<R: Rng + ?Sized>(
    center: &FiniteMetricSpace,
    magnitude: f64,
    split: Option<usize>,
    rng: &mut R,
) -> Result<FiniteMetricSpace, MetricError> {
    let n = center.len();
    let size = n + usize::from(split.is_some());
    let half = 0.5 * magnitude;
    for _ in 0..GENERATOR_RETRIES {
        let mut m = vec![vec![0.0; size]; size];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = center.dist(i, j) + if half > 0.0 { rng.gen_range(-half..half) } else { 0.0 };
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        if let Some(i) = split {
            let eta = if half > 0.0 {
                rng.gen_range(0.5 * half..=half)
            } else {
                0.0
            };
            m[i][n] = eta;
            m[n][i] = eta;
            for j in (0..n).filter(|&j| j != i) {
                let v = m[i][j] + eta * rng.gen_range(-1.0..=1.0);
                m[j][n] = v;
                m[n][j] = v;
            }
        }
        if let Ok(space) = FiniteMetricSpace::validate(&m, 0.0) {
            return Ok(space);
        }
    }
    Err(MetricError::GenerationFailed {
        n: size,
        min_sep: magnitude,
        attempts: GENERATOR_RETRIES,
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::FiniteMetricSpace;

    /// Three points with pairwise distances 3, 4 and 6.
    pub fn m346() -> FiniteMetricSpace {
        FiniteMetricSpace::validate(&[vec![0.0, 3.0, 4.0], vec![3.0, 0.0, 6.0], vec![4.0, 6.0, 0.0]], 0.0).unwrap()
    }

    /// [`m346`] with point 1 doubled into two points 0.05 apart (the twin is
    /// point 3).
    pub fn m346_doubled() -> FiniteMetricSpace {
        FiniteMetricSpace::validate(
            &[
                vec![0.0, 3.0, 4.0, 3.0],
                vec![3.0, 0.0, 6.0, 0.05],
                vec![4.0, 6.0, 0.0, 6.0],
                vec![3.0, 0.05, 6.0, 0.0],
            ],
            0.0,
        )
        .unwrap()
    }

    /// [`m346`] with distances 3.1, 3.9 and 6.05.
    pub fn m346_perturbed() -> FiniteMetricSpace {
        FiniteMetricSpace::validate(&[vec![0.0, 3.1, 3.9], vec![3.1, 0.0, 6.05], vec![3.9, 6.05, 0.0]], 0.0).unwrap()
    }

    pub fn two_points(d: f64) -> FiniteMetricSpace {
        FiniteMetricSpace::validate(&[vec![0.0, d], vec![d, 0.0]], 0.0).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn brute_s(x: &FiniteMetricSpace) -> f64 {
        let mut s = f64::INFINITY;
        for i in 0..x.len() {
            for j in 0..x.len() {
                if i != j {
                    s = s.min(x.dist(i, j));
                }
            }
        }
        s
    }

    fn brute_e(x: &FiniteMetricSpace) -> f64 {
        let n = x.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
            }
        }
        let mut e = f64::INFINITY;
        for (a, &(x1, y1)) in pairs.iter().enumerate() {
            for (b, &(z, w)) in pairs.iter().enumerate() {
                if a != b {
                    e = e.min((x.dist(x1, y1) - x.dist(z, w)).abs());
                }
            }
        }
        e
    }

    #[test]
    fn validate_accepts_point_and_pair() {
        let p = FiniteMetricSpace::validate(&[vec![0.0]], 0.0).unwrap();
        assert_eq!(p, FiniteMetricSpace::point());
        assert_eq!(two_points(1.0).len(), 2);
    }

    #[test]
    fn validate_reports_triangle_witness() {
        let err = FiniteMetricSpace::validate(&[vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]], 0.0)
            .unwrap_err();
        assert!(matches!(err, MetricError::Triangle { i: 0, k: 2, j: 1, .. }), "{err:?}");
    }

    #[test]
    fn validate_error_paths() {
        assert_eq!(FiniteMetricSpace::validate(&[], 0.0), Err(MetricError::Empty));
        assert!(matches!(
            FiniteMetricSpace::validate(&[vec![0.0, 1.0]], 0.0),
            Err(MetricError::NotSquare { .. })
        ));
        assert!(matches!(
            FiniteMetricSpace::validate(&[vec![0.5]], 0.0),
            Err(MetricError::NonZeroDiagonal { i: 0, .. })
        ));
        assert!(matches!(
            FiniteMetricSpace::validate(&[vec![0.0, 1.0], vec![2.0, 0.0]], 0.0),
            Err(MetricError::Asymmetric { i: 0, j: 1, .. })
        ));
        assert!(matches!(
            FiniteMetricSpace::validate(&[vec![0.0, 0.0], vec![0.0, 0.0]], 0.0),
            Err(MetricError::NonPositive { i: 0, j: 1, .. })
        ));
        assert!(matches!(
            FiniteMetricSpace::validate(&[vec![0.0, f64::NAN], vec![1.0, 0.0]], 0.0),
            Err(MetricError::NotFinite { i: 0, j: 1 })
        ));
    }

    #[test]
    fn validate_tolerance_admits_noise() {
        let noisy = [vec![0.0, 1.0, 2.0 + 1e-9], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::validate(&noisy, 0.0).is_err());
        let x = FiniteMetricSpace::validate(&noisy, 1e-6).unwrap();
        assert_eq!(x.dist(0, 2), x.dist(2, 0));
    }

    #[test]
    fn diagnostics_examples() {
        let p = FiniteMetricSpace::point();
        assert_eq!(p.diam(), 0.0);
        assert_eq!(p.s_value(), f64::INFINITY);
        assert_eq!(p.e_value(), f64::INFINITY);
        assert_eq!(p.gh_to_point(), 0.0);

        let two = two_points(2.0);
        assert_eq!(two.diam(), 2.0);
        assert_eq!(two.s_value(), 2.0);
        assert_eq!(two.gh_to_point(), 1.0);
        assert_eq!(two_points(5.0).e_value(), f64::INFINITY);

        let m = m346();
        assert_eq!(m.diam(), 6.0);
        assert_eq!(m.s_value(), 3.0);
        assert_eq!(m.e_value(), 1.0);
        assert!(m.is_general_position());
        assert_eq!(m.gh_to_point(), 3.0);
    }

    #[test]
    fn general_position_rejects_ties_and_degenerate_triangles() {
        let tie =
            FiniteMetricSpace::validate(&[vec![0.0, 3.0, 3.0], vec![3.0, 0.0, 5.0], vec![3.0, 5.0, 0.0]], 0.0).unwrap();
        assert_eq!(tie.e_value(), 0.0);
        assert!(!tie.is_general_position());
        let flat =
            FiniteMetricSpace::validate(&[vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 2.0], vec![3.0, 2.0, 0.0]], 0.0).unwrap();
        assert!(flat.e_value() > 0.0);
        assert!(!flat.is_general_position());
    }

    #[test]
    fn generator_examples() {
        assert_eq!(
            random_general_position(1, 3, 1.0, 0.1).unwrap(),
            FiniteMetricSpace::point()
        );
        let x = random_general_position(3, 7, 10.0, 0.05).unwrap();
        assert!(FiniteMetricSpace::validate(&x.to_matrix(), 0.0).is_ok());
        assert!(x.is_general_position());
        assert_eq!(
            random_general_position(4, 7, 10.0, 0.05).unwrap(),
            random_general_position(4, 7, 10.0, 0.05).unwrap()
        );
    }

    #[test]
    fn generator_reports_impossible_separation() {
        let err = random_general_position(6, 1, 1.0, 0.2).unwrap_err();
        assert!(matches!(err, MetricError::GenerationFailed { n: 6, .. }));
    }

    #[test]
    fn json_round_trip_revalidates() {
        let m = m346();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"n":3,"d":[[0.0,3.0,4.0],[3.0,0.0,6.0],[4.0,6.0,0.0]]}"#);
        let back: FiniteMetricSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<FiniteMetricSpace>(r#"{"n":3,"d":[[0,1,3],[1,0,1],[3,1,0]]}"#).is_err());
        assert!(serde_json::from_str::<FiniteMetricSpace>(r#"{"n":2,"d":[[0]]}"#).is_err());
    }

    #[test]
    fn perturbations_stay_close() {
        use crate::correspondence::{distortion, Correspondence};
        let m = random_general_position(4, 9, 10.0, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for split in [None, Some(0), Some(3)] {
            for _ in 0..20 {
                let x = perturb(&m, 0.2, split, &mut rng).unwrap();
                let mut pairs: Vec<_> = (0..4).map(|i| (i, i)).collect();
                if let Some(i) = split {
                    pairs.push((i, 4));
                }
                let r = Correspondence::new(4, x.len(), pairs).unwrap();
                assert!(distortion(&r, &m, &x).unwrap() < 0.2);
            }
        }
    }

    proptest! {
        #[test]
        fn generated_spaces_satisfy_invariants(n in 1usize..8, seed in any::<u64>(), scale in 0.1f64..100.0) {
            let x = random_general_position(n, seed, scale, 0.01).unwrap();
            prop_assert!(FiniteMetricSpace::validate(&x.to_matrix(), 0.0).is_ok());
            prop_assert_eq!(x.gh_to_point(), x.diam() / 2.0);
            prop_assert_eq!(x.s_value(), brute_s(&x));
            prop_assert_eq!(x.e_value(), brute_e(&x));
            prop_assert!(x.is_general_position());
            if n >= 2 {
                prop_assert!(x.s_value() <= x.diam());
                prop_assert!(x.diam() > 0.0);
            }
        }

        #[test]
        fn general_position_matches_enumeration(
            raw in proptest::collection::vec(1u8..6, 6)
        ) {
            // Small integer distances on 4 points produce plenty of ties and
            // degenerate triangles.
            let n = 4;
            let mut m = vec![vec![0.0; n]; n];
            let mut it = raw.into_iter();
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = f64::from(it.next().unwrap());
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            if let Ok(x) = FiniteMetricSpace::validate(&m, 0.0) {
                prop_assert_eq!(x.s_value(), brute_s(&x));
                prop_assert_eq!(x.e_value(), brute_e(&x));
                let mut strict = true;
                for i in 0..n { for j in 0..n { for k in 0..n {
                    if i != j && j != k && i != k && x.dist(i, k) >= x.dist(i, j) + x.dist(j, k) {
                        strict = false;
                    }
                }}}
                prop_assert_eq!(x.is_general_position(), (x.e_value() > 0.0 || n <= 2) && strict);
            }
        }
    }
}
