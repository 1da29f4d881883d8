//! Exact Gromov-Hausdorff distance between finite metric spaces.
//!
//! The distance is half the smallest distortion of a correspondence. Every
//! correspondence contains one generated by a pair of maps `f: X -> Y`,
//! `g: Y -> X` (keep one image per point of `X` and one preimage per point of
//! `Y`), and dropping pairs never increases distortion. The search therefore
//! runs over map pairs only:
//!
//! * points of `X` are assigned first, in decreasing eccentricity order;
//! * points of `Y` that `f` already hits reuse an existing pair and need no
//!   branching; the remaining ones are assigned next, again by eccentricity;
//! * candidate images are tried in increasing order of incremental distortion.
//!
//! Every node carries, for each cell `(x, y)` of the grid, the distortion that
//! adding the pair would force. It starts from a per-pair bound (each `x'`
//! must land somewhere in `Y`, each `y'` must come from somewhere in `X`) and
//! is raised by every pair that gets assigned. A subtree is cut when the
//! cheapest completion of some open point cannot beat the incumbent. The
//! first incumbent comes from a greedy correspondence.
//!
//! Among all optimal map pairs the search returns the first one met in its
//! deterministic depth-first order, so the witness is reproducible.

use thiserror::Error;

use crate::correspondence::{distortion_of_pairs, Correspondence};
use crate::metric::FiniteMetricSpace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("node budget of {budget} exhausted; distance lies in [{lower}, {upper}]")]
    NodeBudget { budget: u64, lower: f64, upper: f64 },
}

/// Exact distance with an optimal correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct GhResult {
    pub distance: f64,
    pub witness: Correspondence,
    /// Search nodes expanded.
    pub node_count: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverOptions {
    /// Abort with a certified interval after this many nodes.
    pub node_budget: Option<u64>,
}

/// Exact Gromov-Hausdorff distance with default options.
pub fn gh_exact(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> GhResult {
    solve(x, y, SolverOptions::default()).expect("no node budget set")
}

/// `|diam X - diam Y| / 2`, a lower bound on the distance.
pub fn gh_lower_bound(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    (x.diam() - y.diam()).abs() / 2.0
}

/// Exact Gromov-Hausdorff distance, honoring the node budget in `opts`.
pub fn solve(x: &FiniteMetricSpace, y: &FiniteMetricSpace, opts: SolverOptions) -> Result<GhResult, SolveError> {
    let mut search = Search::new(x, y, opts.node_budget);
    search.run();
    if search.aborted {
        let upper = search
            .best
            .as_ref()
            .map_or(search.greedy, |(v, _)| *v)
            .min(search.greedy);
        return Err(SolveError::NodeBudget {
            budget: opts.node_budget.unwrap_or(0),
            lower: search.global_lb / 2.0,
            upper: upper / 2.0,
        });
    }
    let (value, cells) = search.best.take().expect("search always finds a leaf");
    let m = y.len();
    let pairs = cells.iter().map(|&c| (c / m, c % m)).collect();
    let witness = Correspondence::new(x.len(), m, pairs)
        .expect("map pairs cover both sides")
        .minimized();
    debug_assert_eq!(distortion_of_pairs(witness.pairs(), x, y), value);
    Ok(GhResult {
        distance: value / 2.0,
        witness,
        node_count: search.nodes,
    })
}

struct Search {
    n: usize,
    m: usize,
    nm: usize,
    /// `disc[p * nm + q]`: discrepancy between cells `p` and `q`.
    disc: Vec<f64>,
    x_order: Vec<usize>,
    y_order: Vec<usize>,
    /// One cost row of length `nm` per depth.
    costs: Vec<f64>,
    assigned: Vec<usize>,
    y_cover: Vec<u32>,
    best: Option<(f64, Vec<usize>)>,
    greedy: f64,
    global_lb: f64,
    nodes: u64,
    budget: Option<u64>,
    aborted: bool,
    done: bool,
}

fn eccentricity_order(s: &FiniteMetricSpace) -> Vec<usize> {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.eccentricity(b).total_cmp(&s.eccentricity(a)).then(a.cmp(&b)));
    order
}

impl Search {
    fn new(x: &FiniteMetricSpace, y: &FiniteMetricSpace, budget: Option<u64>) -> Self {
        let (n, m) = (x.len(), y.len());
        let nm = n * m;
        let mut disc = vec![0.0; nm * nm];
        for p in 0..nm {
            let (x1, y1) = (p / m, p % m);
            for q in 0..nm {
                let (x2, y2) = (q / m, q % m);
                disc[p * nm + q] = (x.dist(x1, x2) - y.dist(y1, y2)).abs();
            }
        }
        // Any correspondence containing (x1, y1) must relate every x2 to some
        // y2 and every y2 to some x2.
        let mut pair_lb = vec![0.0f64; nm];
        for (p, lb) in pair_lb.iter_mut().enumerate() {
            for x2 in 0..n {
                let best = (0..m)
                    .map(|y2| disc[p * nm + x2 * m + y2])
                    .fold(f64::INFINITY, f64::min);
                *lb = lb.max(best);
            }
            for y2 in 0..m {
                let best = (0..n)
                    .map(|x2| disc[p * nm + x2 * m + y2])
                    .fold(f64::INFINITY, f64::min);
                *lb = lb.max(best);
            }
        }
        let mut costs = vec![0.0; (n + m + 1) * nm];
        costs[..nm].copy_from_slice(&pair_lb);

        let mut global_lb = (x.diam() - y.diam()).abs();
        for x1 in 0..n {
            let v = (0..m).map(|y1| pair_lb[x1 * m + y1]).fold(f64::INFINITY, f64::min);
            global_lb = global_lb.max(v);
        }
        for y1 in 0..m {
            let v = (0..n).map(|x1| pair_lb[x1 * m + y1]).fold(f64::INFINITY, f64::min);
            global_lb = global_lb.max(v);
        }

        let mut search = Self {
            n,
            m,
            nm,
            disc,
            x_order: eccentricity_order(x),
            y_order: eccentricity_order(y),
            costs,
            assigned: Vec::with_capacity(n + m),
            y_cover: vec![0; m],
            best: None,
            greedy: f64::INFINITY,
            global_lb,
            nodes: 0,
            budget,
            aborted: false,
            done: false,
        };
        search.greedy = search.greedy_distortion();
        search
    }

    /// Distortion of the correspondence built by always taking the cheapest
    /// image in the search order.
    fn greedy_distortion(&self) -> f64 {
        let (n, m) = (self.n, self.m);
        let mut chosen: Vec<usize> = Vec::with_capacity(n + m);
        let mut covered = vec![false; m];
        let incremental = |chosen: &[usize], p: usize| {
            chosen
                .iter()
                .map(|&q| self.disc[p * self.nm + q])
                .fold(0.0f64, f64::max)
        };
        let pick = |chosen: &[usize], cells: &mut dyn Iterator<Item = usize>| {
            cells
                .map(|p| (incremental(chosen, p), p))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .expect("nonempty side")
                .1
        };
        for &x in &self.x_order {
            let p = pick(&chosen, &mut (0..m).map(|y| x * m + y));
            covered[p % m] = true;
            chosen.push(p);
        }
        for &y in &self.y_order {
            if !covered[y] {
                let p = pick(&chosen, &mut (0..n).map(|x| x * m + y));
                chosen.push(p);
            }
        }
        chosen
            .iter()
            .enumerate()
            .flat_map(|(a, &p)| chosen[a + 1..].iter().map(move |&q| (p, q)))
            .map(|(p, q)| self.disc[p * self.nm + q])
            .fold(0.0, f64::max)
    }

    #[inline]
    fn admissible(&self, v: f64) -> bool {
        match &self.best {
            None => v <= self.greedy,
            Some((b, _)) => v < *b,
        }
    }

    fn run(&mut self) {
        self.dfs(0, 0.0);
    }

    /// Next open variable: an unassigned point of X, then an uncovered point
    /// of Y. Returns the candidate cells, or `None` at a leaf.
    fn next_cells(&self, depth: usize) -> Option<Vec<usize>> {
        let (n, m) = (self.n, self.m);
        if depth < n {
            let x = self.x_order[depth];
            return Some((0..m).map(|y| x * m + y).collect());
        }
        self.y_order
            .iter()
            .find(|&&y| self.y_cover[y] == 0)
            .map(|&y| (0..n).map(|x| x * m + y).collect())
    }

    fn lower_bound(&self, depth: usize, current: f64) -> f64 {
        let (n, m) = (self.n, self.m);
        let cost = &self.costs[depth * self.nm..(depth + 1) * self.nm];
        let mut lb = current;
        for &x in self.x_order.iter().skip(depth.min(n)) {
            let v = cost[x * m..(x + 1) * m].iter().copied().fold(f64::INFINITY, f64::min);
            lb = lb.max(v);
        }
        for y in 0..m {
            if self.y_cover[y] == 0 {
                let v = (0..n).map(|x| cost[x * m + y]).fold(f64::INFINITY, f64::min);
                lb = lb.max(v);
            }
        }
        lb
    }

    fn dfs(&mut self, depth: usize, current: f64) {
        if self.done || self.aborted {
            return;
        }
        let Some(cells) = self.next_cells(depth) else {
            if self.admissible(current) {
                self.best = Some((current, self.assigned.clone()));
                if current <= self.global_lb {
                    self.done = true;
                }
            }
            return;
        };
        if !self.admissible(self.lower_bound(depth, current)) {
            return;
        }
        let nm = self.nm;
        let base = depth * nm;
        let mut candidates: Vec<(f64, usize)> = cells
            .into_iter()
            .map(|p| (self.costs[base + p].max(current), p))
            .filter(|&(c, _)| self.admissible(c))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        for (value, p) in candidates {
            if self.done || self.aborted {
                return;
            }
            if !self.admissible(value) {
                // Candidates are sorted, so the rest fail too.
                break;
            }
            self.nodes += 1;
            if self.budget.is_some_and(|b| self.nodes > b) {
                self.aborted = true;
                return;
            }
            let (parent, child) = self.costs[base..base + 2 * nm].split_at_mut(nm);
            let row = &self.disc[p * nm..(p + 1) * nm];
            for ((c, &pc), &d) in child.iter_mut().zip(parent.iter()).zip(row) {
                *c = pc.max(d);
            }
            self.assigned.push(p);
            self.y_cover[p % self.m] += 1;
            self.dfs(depth + 1, value);
            self.y_cover[p % self.m] -= 1;
            self.assigned.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::{distortion, gh_exact_bruteforce};
    use crate::metric::fixtures::*;
    use crate::metric::random_general_position;
    use proptest::prelude::*;

    #[test]
    fn identical_spaces_are_at_zero() {
        for n in 1..=7 {
            let x = random_general_position(n, n as u64, 4.0, 0.01).unwrap();
            let r = gh_exact(&x, &x);
            assert_eq!(r.distance, 0.0, "n = {n}");
            assert_eq!(distortion(&r.witness, &x, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn distance_to_point_is_half_diameter() {
        let p = FiniteMetricSpace::point();
        for n in 1..=8 {
            let x = random_general_position(n, 11 + n as u64, 3.0, 0.0).unwrap();
            assert_eq!(gh_exact(&x, &p).distance, x.diam() / 2.0);
            assert_eq!(gh_exact(&p, &x).distance, x.diam() / 2.0);
        }
    }

    #[test]
    fn two_point_spaces() {
        let r = gh_exact(&two_points(2.0), &two_points(4.0));
        assert_eq!(r.distance, 1.0);
        assert_eq!(distortion(&r.witness, &two_points(2.0), &two_points(4.0)).unwrap(), 2.0);
    }

    #[test]
    fn perturbed_triangle() {
        let r = gh_exact(&m346(), &m346_perturbed());
        assert!((r.distance - 0.05).abs() < 1e-12);
        assert_eq!(r.witness, Correspondence::identity(3));
    }

    #[test]
    fn lower_bound_examples() {
        let m = m346();
        assert_eq!(gh_lower_bound(&m, &m), 0.0);
        assert_eq!(gh_lower_bound(&two_points(2.0), &two_points(4.0)), 1.0);
        assert_eq!(gh_lower_bound(&m, &FiniteMetricSpace::point()), 3.0);
    }

    #[test]
    fn node_budget_returns_certified_interval() {
        let x = random_general_position(6, 1, 5.0, 0.0).unwrap();
        let y = random_general_position(6, 2, 5.0, 0.0).unwrap();
        let exact = gh_exact(&x, &y).distance;
        match solve(&x, &y, SolverOptions { node_budget: Some(1) }) {
            Err(SolveError::NodeBudget { lower, upper, .. }) => {
                assert!(lower <= exact && exact <= upper, "{lower} {exact} {upper}");
            }
            Ok(r) => assert_eq!(r.distance, exact),
        }
    }

    #[test]
    fn witness_is_reproducible() {
        let x = random_general_position(5, 21, 5.0, 0.0).unwrap();
        let y = random_general_position(4, 22, 5.0, 0.0).unwrap();
        assert_eq!(gh_exact(&x, &y), gh_exact(&x, &y));
    }

    /// Minimum distortion over every map pair `(f, g)`, with no pruning.
    fn map_pair_oracle(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
        let (n, m) = (x.len(), y.len());
        let mut best = f64::INFINITY;
        let fs = (m as u64).pow(n as u32);
        let gs = (n as u64).pow(m as u32);
        let mut pairs = Vec::with_capacity(n + m);
        for fc in 0..fs {
            for gc in 0..gs {
                pairs.clear();
                let mut c = fc;
                for xi in 0..n {
                    pairs.push((xi, (c % m as u64) as usize));
                    c /= m as u64;
                }
                let mut c = gc;
                for yi in 0..m {
                    pairs.push(((c % n as u64) as usize, yi));
                    c /= n as u64;
                }
                best = best.min(distortion_of_pairs(&pairs, x, y));
            }
        }
        best / 2.0
    }

    #[test]
    fn agrees_with_map_pair_enumeration_beyond_bruteforce_budget() {
        for seed in 0..6u64 {
            for (nx, ny) in [(5, 4), (4, 5), (6, 3), (3, 6)] {
                let x = random_general_position(nx, seed * 31 + 1, 5.0, 0.0).unwrap();
                let y = random_general_position(ny, seed * 31 + 2, 4.0, 0.0).unwrap();
                assert_eq!(
                    gh_exact(&x, &y).distance,
                    map_pair_oracle(&x, &y),
                    "seed {seed} {nx}x{ny}"
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn agrees_with_bruteforce(seed in any::<u64>(), nx in 1usize..5, ny in 1usize..5) {
            let x = random_general_position(nx, seed, 5.0, 0.0).unwrap();
            let y = random_general_position(ny, seed.wrapping_add(1), 3.0, 0.0).unwrap();
            let fast = gh_exact(&x, &y);
            let slow = gh_exact_bruteforce(&x, &y, 20).unwrap();
            prop_assert_eq!(fast.distance, slow.distance);
            prop_assert_eq!(distortion(&fast.witness, &x, &y).unwrap(), 2.0 * fast.distance);
            prop_assert!(fast.distance >= gh_lower_bound(&x, &y));
            prop_assert!(fast.distance <= x.diam().max(y.diam()) / 2.0);
        }

        #[test]
        fn symmetric(seed in any::<u64>(), nx in 1usize..6, ny in 1usize..6) {
            let x = random_general_position(nx, seed, 5.0, 0.0).unwrap();
            let y = random_general_position(ny, seed ^ 0x5555, 4.0, 0.0).unwrap();
            prop_assert_eq!(gh_exact(&x, &y).distance, gh_exact(&y, &x).distance);
        }

        #[test]
        fn random_correspondences_bound_the_distance(seed in any::<u64>(), bits in any::<u32>()) {
            let x = random_general_position(4, seed, 5.0, 0.0).unwrap();
            let y = random_general_position(3, seed ^ 1, 5.0, 0.0).unwrap();
            let mut pairs: Vec<_> = (0..12).filter(|c| bits >> c & 1 == 1).map(|c| (c / 3, c % 3)).collect();
            pairs.extend([(0, 0), (1, 1), (2, 2), (3, 0)]);
            let r = Correspondence::new(4, 3, pairs).unwrap();
            prop_assert!(gh_exact(&x, &y).distance <= distortion(&r, &x, &y).unwrap() / 2.0);
        }

        #[test]
        fn map_pair_reduction_is_sound(seed in any::<u64>(), bits in any::<u32>(), pick in any::<u64>()) {
            // Any correspondence contains one generated by a map pair with no
            // larger distortion.
            let x = random_general_position(4, seed, 5.0, 0.0).unwrap();
            let y = random_general_position(4, seed ^ 7, 5.0, 0.0).unwrap();
            let mut pairs: Vec<_> = (0..16).filter(|c| bits >> c & 1 == 1).map(|c| (c / 4, c % 4)).collect();
            pairs.extend([(0, 1), (1, 0), (2, 3), (3, 2)]);
            let r = Correspondence::new(4, 4, pairs).unwrap();
            let mut sub = Vec::new();
            for xi in 0..4 {
                let img = r.image(xi);
                sub.push((xi, img[(pick as usize + xi) % img.len()]));
            }
            for yi in 0..4 {
                let pre = r.preimage(yi);
                sub.push((pre[(pick as usize >> 8).wrapping_add(yi) % pre.len()], yi));
            }
            let sub = Correspondence::new(4, 4, sub).unwrap();
            prop_assert!(sub.pairs().iter().all(|&(a, b)| r.contains(a, b)));
            prop_assert!(distortion(&sub, &x, &y).unwrap() <= distortion(&r, &x, &y).unwrap());
        }
    }
}
