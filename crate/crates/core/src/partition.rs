//! Canonical partitions of spaces close to a space in general position.
//!
//! If `M` is in general position and `2 d_GH(M, X) < eps <= s(M) / 2`, every
//! optimal correspondence `R` between `M` and `X` sends distinct points of `M`
//! to disjoint sets, so the images `X_i = R(i)` partition `X`. The partition
//! does not depend on the choice of `R` beyond renaming the blocks, and it
//! satisfies
//!
//! ```text
//! diam X_i < eps,    | |xx'| - |ij| | < eps   for x in X_i, x' in X_j, i != j.
//! ```
//!
//! When both `X` and `Y` are that close to `M` with `eps <= min(s, e) / 4`,
//! every optimal correspondence between `X` and `Y` stays inside
//! `X_1 x Y_1 ∪ ... ∪ X_n x Y_n`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspondence::{distortion, Correspondence, Relation, RelationError};
use crate::metric::FiniteMetricSpace;
use crate::solver::gh_exact;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("the center space is not in general position")]
    NotGeneralPosition,
    #[error("eps = {eps} is outside (0, {max}]")]
    EpsOutOfRange { eps: f64, max: f64 },
    #[error("2 d_GH = {twice_gh} is not below eps = {eps}")]
    TooFar { twice_gh: f64, eps: f64 },
    #[error("point {x} lies in blocks {first} and {second}")]
    NotAPartition { x: usize, first: usize, second: usize },
    #[error("pair ({x}, {y}) joins block {x_label} to block {y_label}")]
    CrossBlock {
        x: usize,
        y: usize,
        x_label: usize,
        y_label: usize,
    },
    #[error("correspondence has distortion {distortion} but the distance is {distance}")]
    NotOptimal { distortion: f64, distance: f64 },
    #[error("labels must use every value in 0..{n_blocks}; {missing} is missing")]
    InvalidLabels { n_blocks: usize, missing: usize },
    #[error("partition has {labels} labels for {points} points")]
    SizeMismatch { labels: usize, points: usize },
    #[error(transparent)]
    Relation(#[from] RelationError),
}

/// A labeling of the points of a space by blocks `0..n_blocks`, every block
/// nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    labels: Vec<usize>,
    #[serde(skip)]
    n_blocks: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Result<Self, PartitionError> {
        let n_blocks = labels.iter().max().map_or(0, |&m| m + 1);
        let mut used = vec![false; n_blocks];
        for &l in &labels {
            used[l] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(PartitionError::InvalidLabels { n_blocks, missing });
        }
        Ok(Self { labels, n_blocks })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, x: usize) -> usize {
        self.labels[x]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Points of each block in increasing order, indexed by label.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_blocks];
        for (x, &l) in self.labels.iter().enumerate() {
            blocks[l].push(x);
        }
        blocks
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            labels: Vec<usize>,
        }
        let repr = Repr::deserialize(deserializer)?;
        Partition::new(repr.labels).map_err(serde::de::Error::custom)
    }
}

/// True iff some bijection of labels carries the blocks of `p1` onto those
/// of `p2`.
pub fn renumbering_equivalence(p1: &Partition, p2: &Partition) -> bool {
    if p1.len() != p2.len() || p1.n_blocks() != p2.n_blocks() {
        return false;
    }
    let mut forward = vec![None; p1.n_blocks()];
    let mut backward = vec![None; p2.n_blocks()];
    for (&a, &b) in p1.labels.iter().zip(&p2.labels) {
        match (forward[a], backward[b]) {
            (None, None) => {
                forward[a] = Some(b);
                backward[b] = Some(a);
            }
            (Some(fb), Some(ba)) if fb == b && ba == a => {}
            _ => return false,
        }
    }
    true
}

/// The blocks `R(i)` of a correspondence between `M` (first side) and `X`,
/// labeled by the points of `M`.
pub fn partition_from_correspondence(r: &Correspondence) -> Result<Partition, PartitionError> {
    let mut labels = vec![None; r.ny()];
    for &(i, x) in r.pairs() {
        match labels[x] {
            None => labels[x] = Some(i),
            Some(first) if first != i => {
                return Err(PartitionError::NotAPartition { x, first, second: i });
            }
            Some(_) => {}
        }
    }
    let labels = labels
        .into_iter()
        .map(|l| l.expect("a correspondence covers every point"))
        .collect();
    Partition::new(labels)
}

fn check_center(m: &FiniteMetricSpace) -> Result<(), PartitionError> {
    if m.is_general_position() {
        Ok(())
    } else {
        Err(PartitionError::NotGeneralPosition)
    }
}

fn check_eps(eps: f64, max: f64) -> Result<(), PartitionError> {
    if eps > 0.0 && eps <= max {
        Ok(())
    } else {
        Err(PartitionError::EpsOutOfRange { eps, max })
    }
}

fn near_partition(m: &FiniteMetricSpace, x: &FiniteMetricSpace, eps: f64) -> Result<Partition, PartitionError> {
    let res = gh_exact(m, x);
    let twice_gh = 2.0 * res.distance;
    if twice_gh >= eps {
        return Err(PartitionError::TooFar { twice_gh, eps });
    }
    partition_from_correspondence(&res.witness)
}

/// Partition of `X` induced by an optimal correspondence with `M`.
///
/// Requires `M` in general position, `0 < eps <= s(M) / 2` and
/// `2 d_GH(M, X) < eps`.
pub fn canonical_partition(
    m: &FiniteMetricSpace,
    x: &FiniteMetricSpace,
    eps: f64,
) -> Result<Partition, PartitionError> {
    check_center(m)?;
    check_eps(eps, m.s_value() / 2.0)?;
    near_partition(m, x, eps)
}

/// Largest value of a checked quantity, with the points that attain it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: usize,
    pub x2: usize,
    /// Labels of `x` and `x2`.
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub eps: f64,
    /// Every block has diameter below `eps`.
    pub diam_ok: bool,
    pub worst_diam: Option<Witness>,
    /// `eps` minus the largest block diameter.
    pub diam_margin: f64,
    /// Every cross-block discrepancy `| |xx'| - |ij| |` is below `eps`.
    pub discrepancy_ok: bool,
    pub worst_discrepancy: Option<Witness>,
    pub discrepancy_margin: f64,
}

impl PropertyReport {
    pub fn pass(&self) -> bool {
        self.diam_ok && self.discrepancy_ok
    }
}

/// Checks both partition properties, reporting the worst pairs.
///
/// Fails only when `p` does not fit `X` or has more blocks than `M` has
/// points.
pub fn verify_partition(
    m: &FiniteMetricSpace,
    x: &FiniteMetricSpace,
    eps: f64,
    p: &Partition,
) -> Result<PropertyReport, PartitionError> {
    if p.len() != x.len() {
        return Err(PartitionError::SizeMismatch {
            labels: p.len(),
            points: x.len(),
        });
    }
    if p.n_blocks() > m.len() {
        return Err(PartitionError::SizeMismatch {
            labels: p.n_blocks(),
            points: m.len(),
        });
    }
    let mut worst_diam: Option<Witness> = None;
    let mut worst_disc: Option<Witness> = None;
    for a in 0..x.len() {
        for b in a..x.len() {
            let (i, j) = (p.label(a), p.label(b));
            let slot = if i == j { &mut worst_diam } else { &mut worst_disc };
            let value = if i == j {
                x.dist(a, b)
            } else {
                (x.dist(a, b) - m.dist(i, j)).abs()
            };
            if slot.as_ref().is_none_or(|w| value > w.value) {
                *slot = Some(Witness {
                    x: a,
                    x2: b,
                    i,
                    j,
                    value,
                });
            }
        }
    }
    let margin = |w: &Option<Witness>| eps - w.as_ref().map_or(0.0, |w| w.value);
    Ok(PropertyReport {
        eps,
        diam_ok: margin(&worst_diam) > 0.0,
        diam_margin: margin(&worst_diam),
        worst_diam,
        discrepancy_ok: margin(&worst_disc) > 0.0,
        discrepancy_margin: margin(&worst_disc),
        worst_discrepancy: worst_disc,
    })
}

/// One block `R_i` of a split correspondence, in local indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitBlock {
    pub label: usize,
    pub x_points: Vec<usize>,
    pub y_points: Vec<usize>,
    /// Correspondence between `x_points` and `y_points` by position.
    pub correspondence: Correspondence,
}

/// A correspondence cut into one correspondence per pair of blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitCorrespondence {
    pub blocks: Vec<SplitBlock>,
}

impl SplitCorrespondence {
    /// Reassembles the blocks as a correspondence between the whole spaces.
    pub fn union(&self, nx: usize, ny: usize) -> Result<Correspondence, RelationError> {
        let pairs = self
            .blocks
            .iter()
            .flat_map(|b| {
                b.correspondence
                    .pairs()
                    .iter()
                    .map(|&(a, c)| (b.x_points[a], b.y_points[c]))
            })
            .collect();
        Correspondence::new(nx, ny, pairs)
    }

    /// Label of each pair of `r`, assuming `r` is the split correspondence.
    pub fn labels_of(&self, r: &Relation) -> Vec<usize> {
        let mut label_of_x = vec![0; r.nx()];
        for b in &self.blocks {
            for &x in &b.x_points {
                label_of_x[x] = b.label;
            }
        }
        r.pairs().iter().map(|&(x, _)| label_of_x[x]).collect()
    }
}

/// Restricts `r` to the blocks of `px` and `py`, matching blocks by label.
///
/// Fails with the first pair of `r` whose endpoints carry different labels.
pub fn split_with_partitions(
    px: &Partition,
    py: &Partition,
    r: &Relation,
) -> Result<SplitCorrespondence, PartitionError> {
    for (p, n) in [(px, r.nx()), (py, r.ny())] {
        if p.len() != n {
            return Err(PartitionError::SizeMismatch {
                labels: p.len(),
                points: n,
            });
        }
    }
    if let Some(&(x, y)) = r.pairs().iter().find(|&&(x, y)| px.label(x) != py.label(y)) {
        return Err(PartitionError::CrossBlock {
            x,
            y,
            x_label: px.label(x),
            y_label: py.label(y),
        });
    }
    let xb = px.blocks();
    let yb = py.blocks();
    let mut blocks = Vec::with_capacity(xb.len());
    for (label, (x_points, y_points)) in xb.into_iter().zip(yb).enumerate() {
        let local = |pts: &[usize], v: usize| pts.binary_search(&v).expect("point lies in its block");
        let pairs = r
            .pairs()
            .iter()
            .filter(|&&(x, _)| px.label(x) == label)
            .map(|&(x, y)| (local(&x_points, x), local(&y_points, y)))
            .collect();
        let correspondence = Correspondence::new(x_points.len(), y_points.len(), pairs)?;
        blocks.push(SplitBlock {
            label,
            x_points,
            y_points,
            correspondence,
        });
    }
    Ok(SplitCorrespondence { blocks })
}

/// Renumbers `py` by the permutation of blocks that `r` induces, provided it
/// is an isometry of `M`. Canonical numberings are only unique up to such
/// isometries, which exist for two-point centers.
fn align_labels(m: &FiniteMetricSpace, px: &Partition, py: Partition, r: &Relation) -> Partition {
    let n = px.n_blocks();
    if py.n_blocks() != n {
        return py;
    }
    let mut sigma = vec![None; n];
    for &(x, y) in r.pairs() {
        let (i, j) = (px.label(x), py.label(y));
        match sigma[i] {
            None => sigma[i] = Some(j),
            Some(k) if k != j => return py,
            Some(_) => {}
        }
    }
    let Some(sigma) = sigma.into_iter().collect::<Option<Vec<usize>>>() else {
        return py;
    };
    let mut inverse = vec![usize::MAX; n];
    for (i, &j) in sigma.iter().enumerate() {
        if inverse[j] != usize::MAX {
            return py;
        }
        inverse[j] = i;
    }
    let isometry = (0..n).all(|i| (0..n).all(|j| m.dist(sigma[i], sigma[j]) == m.dist(i, j)));
    if !isometry {
        return py;
    }
    let labels = py.labels().iter().map(|&l| inverse[l]).collect();
    Partition::new(labels).expect("a relabeling keeps every block")
}

/// Splits an optimal correspondence `r` between `X` and `Y` along their
/// canonical partitions with respect to `M`.
///
/// Requires `M` in general position, `0 < eps <= min(s(M), e(M)) / 4`, both
/// spaces within `eps / 2` of `M` (strictly) and `r` optimal. The blocks of
/// `Y` are renumbered first if `r` matches them to those of `X` through an
/// isometry of `M`. A pair of `r` joining different blocks is reported before
/// optimality is checked.
pub fn split_correspondence(
    m: &FiniteMetricSpace,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    eps: f64,
    r: &Correspondence,
) -> Result<SplitCorrespondence, PartitionError> {
    check_center(m)?;
    check_eps(eps, m.s_value().min(m.e_value()) / 4.0)?;
    let px = near_partition(m, x, eps)?;
    let py = near_partition(m, y, eps)?;
    let dis = distortion(r, x, y)?;
    let py = align_labels(m, &px, py, r);
    let split = split_with_partitions(&px, &py, r)?;
    let distance = gh_exact(x, y).distance;
    if dis / 2.0 != distance {
        return Err(PartitionError::NotOptimal {
            distortion: dis,
            distance,
        });
    }
    Ok(split)
}
