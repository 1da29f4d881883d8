//! Relations between finite index sets, their distortion, and exhaustive
//! enumeration of correspondences.
//!
//! The enumerator is the reference oracle for the branch-and-bound solver in
//! [`crate::solver`]: it minimizes distortion over every subset of the
//! `nx x ny` grid whose projections are both surjective.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::FiniteMetricSpace;

/// Default cap on `nx * ny` for exhaustive enumeration (sides up to 4 x 5).
pub const DEFAULT_ENUMERATION_BUDGET: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelationError {
    #[error("relation is empty")]
    Empty,
    #[error("pair ({x}, {y}) is outside the {nx} x {ny} grid")]
    OutOfRange { x: usize, y: usize, nx: usize, ny: usize },
    #[error("point {0} of the first space is not covered")]
    UncoveredX(usize),
    #[error("point {0} of the second space is not covered")]
    UncoveredY(usize),
    #[error("relation is {nx} x {ny} but the spaces have {space_x} and {space_y} points")]
    SizeMismatch {
        nx: usize,
        ny: usize,
        space_x: usize,
        space_y: usize,
    },
    #[error("enumeration of a {nx} x {ny} grid exceeds the budget of {budget} cells")]
    BudgetExceeded { nx: usize, ny: usize, budget: usize },
}

/// A nonempty set of index pairs `(x, y)` with `x < nx` and `y < ny`.
///
/// Pairs are kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    nx: usize,
    ny: usize,
    pairs: Vec<(usize, usize)>,
}

impl Relation {
    pub fn new(nx: usize, ny: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self, RelationError> {
        if pairs.is_empty() {
            return Err(RelationError::Empty);
        }
        if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= nx || y >= ny) {
            return Err(RelationError::OutOfRange { x, y, nx, ny });
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self { nx, ny, pairs })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.pairs.binary_search(&(x, y)).is_ok()
    }

    /// Image of `x`, in increasing order.
    pub fn image(&self, x: usize) -> Vec<usize> {
        self.pairs.iter().filter(|p| p.0 == x).map(|p| p.1).collect()
    }

    /// Preimage of `y`, in increasing order.
    pub fn preimage(&self, y: usize) -> Vec<usize> {
        self.pairs.iter().filter(|p| p.1 == y).map(|p| p.0).collect()
    }

    pub fn transpose(&self) -> Relation {
        let pairs = self.pairs.iter().map(|&(x, y)| (y, x)).collect();
        Relation::new(self.ny, self.nx, pairs).expect("transpose of a valid relation")
    }

    fn check_spaces(&self, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<(), RelationError> {
        if self.nx != x.len() || self.ny != y.len() {
            return Err(RelationError::SizeMismatch {
                nx: self.nx,
                ny: self.ny,
                space_x: x.len(),
                space_y: y.len(),
            });
        }
        Ok(())
    }
}

/// A relation whose projections onto both sides are surjective.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Correspondence(Relation);

impl Correspondence {
    pub fn new(nx: usize, ny: usize, pairs: Vec<(usize, usize)>) -> Result<Self, RelationError> {
        Self::try_from(Relation::new(nx, ny, pairs)?)
    }

    /// The diagonal of a space with itself.
    pub fn identity(n: usize) -> Self {
        Self(Relation {
            nx: n,
            ny: n,
            pairs: (0..n).map(|i| (i, i)).collect(),
        })
    }

    /// Every pair of the grid.
    pub fn full(nx: usize, ny: usize) -> Self {
        let pairs = (0..nx).flat_map(|x| (0..ny).map(move |y| (x, y))).collect();
        Self(Relation { nx, ny, pairs })
    }

    pub fn as_relation(&self) -> &Relation {
        &self.0
    }

    pub fn transpose(&self) -> Correspondence {
        Correspondence(self.0.transpose())
    }

    /// Drops pairs in order whenever both of their points stay covered.
    ///
    /// The result is a sub-correspondence, so its distortion is no larger.
    pub fn minimized(&self) -> Correspondence {
        let mut cover_x = vec![0usize; self.0.nx];
        let mut cover_y = vec![0usize; self.0.ny];
        for &(x, y) in &self.0.pairs {
            cover_x[x] += 1;
            cover_y[y] += 1;
        }
        let mut kept = Vec::with_capacity(self.0.pairs.len());
        for &(x, y) in &self.0.pairs {
            if cover_x[x] > 1 && cover_y[y] > 1 {
                cover_x[x] -= 1;
                cover_y[y] -= 1;
            } else {
                kept.push((x, y));
            }
        }
        Correspondence(Relation {
            nx: self.0.nx,
            ny: self.0.ny,
            pairs: kept,
        })
    }
}

impl std::ops::Deref for Correspondence {
    type Target = Relation;

    fn deref(&self) -> &Relation {
        &self.0
    }
}

impl TryFrom<Relation> for Correspondence {
    type Error = RelationError;

    fn try_from(rel: Relation) -> Result<Self, RelationError> {
        let mut seen_x = vec![false; rel.nx];
        let mut seen_y = vec![false; rel.ny];
        for &(x, y) in &rel.pairs {
            seen_x[x] = true;
            seen_y[y] = true;
        }
        if let Some(x) = seen_x.iter().position(|s| !s) {
            return Err(RelationError::UncoveredX(x));
        }
        if let Some(y) = seen_y.iter().position(|s| !s) {
            return Err(RelationError::UncoveredY(y));
        }
        Ok(Self(rel))
    }
}

#[derive(Serialize, Deserialize)]
struct CorrespondenceRepr {
    nx: usize,
    ny: usize,
    pairs: Vec<(usize, usize)>,
}

impl Serialize for Correspondence {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CorrespondenceRepr {
            nx: self.nx,
            ny: self.ny,
            pairs: self.pairs.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Correspondence {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = CorrespondenceRepr::deserialize(deserializer)?;
        Correspondence::new(repr.nx, repr.ny, repr.pairs).map_err(serde::de::Error::custom)
    }
}

/// Largest discrepancy `| |xx'| - |yy'| |` over all pairs of pairs in `rel`.
pub fn distortion(rel: &Relation, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64, RelationError> {
    rel.check_spaces(x, y)?;
    Ok(distortion_of_pairs(rel.pairs(), x, y))
}

pub(crate) fn distortion_of_pairs(pairs: &[(usize, usize)], x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let mut dis = 0.0f64;
    for (a, &(x1, y1)) in pairs.iter().enumerate() {
        for &(x2, y2) in &pairs[a + 1..] {
            dis = dis.max((x.dist(x1, x2) - y.dist(y1, y2)).abs());
        }
    }
    dis
}

/// Iterator over every correspondence of an `nx x ny` grid.
///
/// Subsets are visited as bitmasks in increasing numeric order, bit
/// `x * ny + y` standing for the pair `(x, y)`.
#[derive(Debug, Clone)]
pub struct Correspondences {
    nx: usize,
    ny: usize,
    next: u64,
    end: u64,
    row_masks: Vec<u64>,
    col_masks: Vec<u64>,
}

impl Correspondences {
    fn new(nx: usize, ny: usize) -> Self {
        let cells = nx * ny;
        let row_masks = (0..nx).map(|x| ((1u64 << ny) - 1) << (x * ny)).collect();
        let col_masks = (0..ny)
            .map(|y| (0..nx).fold(0u64, |m, x| m | 1u64 << (x * ny + y)))
            .collect();
        Self {
            nx,
            ny,
            next: 1,
            end: 1u64 << cells,
            row_masks,
            col_masks,
        }
    }

    fn is_correspondence(&self, mask: u64) -> bool {
        self.row_masks.iter().all(|r| mask & r != 0) && self.col_masks.iter().all(|c| mask & c != 0)
    }

    fn decode(&self, mask: u64) -> Correspondence {
        let mut pairs = Vec::with_capacity(mask.count_ones() as usize);
        for x in 0..self.nx {
            for y in 0..self.ny {
                if mask >> (x * self.ny + y) & 1 == 1 {
                    pairs.push((x, y));
                }
            }
        }
        Correspondence(Relation {
            nx: self.nx,
            ny: self.ny,
            pairs,
        })
    }

    /// Next surjective mask, without decoding it.
    fn next_mask(&mut self) -> Option<u64> {
        while self.next < self.end {
            let mask = self.next;
            self.next += 1;
            if self.is_correspondence(mask) {
                return Some(mask);
            }
        }
        None
    }
}

impl Iterator for Correspondences {
    type Item = Correspondence;

    fn next(&mut self) -> Option<Correspondence> {
        self.next_mask().map(|m| self.decode(m))
    }
}

/// Streams every correspondence between sides of size `nx` and `ny`.
pub fn enumerate_correspondences(nx: usize, ny: usize, budget: usize) -> Result<Correspondences, RelationError> {
    if nx == 0 || ny == 0 || nx * ny > budget || nx * ny > 62 {
        return Err(RelationError::BudgetExceeded { nx, ny, budget });
    }
    Ok(Correspondences::new(nx, ny))
}

/// Result of exhaustive minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub distance: f64,
    /// First minimizer in enumeration order.
    pub witness: Correspondence,
    /// Every minimizer, in enumeration order.
    pub optimal: Vec<Correspondence>,
    pub enumerated: u64,
}

/// Exact Gromov-Hausdorff distance by minimizing distortion over every
/// correspondence.
pub fn gh_exact_bruteforce(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: usize,
) -> Result<BruteForceResult, RelationError> {
    let mut iter = enumerate_correspondences(x.len(), y.len(), budget)?;
    let ny = y.len();
    let mut best = f64::INFINITY;
    let mut optimal_masks: Vec<u64> = Vec::new();
    let mut enumerated = 0u64;
    let mut pairs = Vec::with_capacity(x.len() * ny);
    while let Some(mask) = iter.next_mask() {
        enumerated += 1;
        pairs.clear();
        let mut bits = mask;
        while bits != 0 {
            let cell = bits.trailing_zeros() as usize;
            pairs.push((cell / ny, cell % ny));
            bits &= bits - 1;
        }
        let dis = distortion_of_pairs(&pairs, x, y);
        if dis < best {
            best = dis;
            optimal_masks.clear();
            optimal_masks.push(mask);
        } else if dis == best {
            optimal_masks.push(mask);
        }
    }
    let optimal: Vec<Correspondence> = optimal_masks.iter().map(|&m| iter.decode(m)).collect();
    Ok(BruteForceResult {
        distance: best / 2.0,
        witness: optimal[0].clone(),
        optimal,
        enumerated,
    })
}
