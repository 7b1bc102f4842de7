//! Parallel classes of k-subsets (Baranyai's theorem, uniform case).
//!
//! When `k | N`, the `C(N, k)` k-subsets of `[N] = {1, ..., N}` split into
//! `C(N-1, k-1)` parallel classes, each a partition of `[N]` into `N/k`
//! blocks. Blocks within one class touch disjoint indices, so the matrix
//! products they index are independent.
//!
//! The general construction follows the integral-flow induction: elements
//! are added one at a time, and at each step a maximum flow decides which
//! partial block of every class receives the new element. A fractional
//! solution always exists, so an integral one does too. The cases `k = 1`,
//! `k = 2` (round robin) and `k = N` are written down directly.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::linalg::{gemm_acc, mat_pow, Matrix};

/// Largest `C(N, k)` that `build_partitions` and `verify_family` accept.
pub const SUBSET_CAP: u128 = 1_000_000;

/// A block is a strictly increasing list of 1-based indices.
pub type Block = Vec<u32>;
/// A parallel class is a list of disjoint blocks covering `[N]`.
pub type ParallelClass = Vec<Block>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionFamily {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub classes: Vec<ParallelClass>,
}

impl PartitionFamily {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Sorts blocks within each class by smallest element, then sorts classes
    /// lexicographically.
    pub fn canonicalize(&mut self) {
        for class in &mut self.classes {
            for block in class.iter_mut() {
                block.sort_unstable();
            }
            class.sort();
        }
        self.classes.sort();
    }
}

/// Exact binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return u128::MAX,
        }
    }
    acc
}

/// Splits `n` indices into a prefix whose length `k` divides and a remainder
/// of `p < k` indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Peel {
    /// Number of trailing indices `n - p + 1, ..., n` set aside.
    pub p: usize,
    /// Length of the prefix `[n - p]`, a multiple of `k`.
    pub main: usize,
}

pub fn peel(n: usize, k: usize) -> Peel {
    assert!(k > 0, "block size must be positive");
    let p = n % k;
    Peel { p, main: n - p }
}

fn check_shape(n: usize, k: usize) -> Result<u128> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidFamily("N and k must be positive".into()));
    }
    if !n.is_multiple_of(k) {
        return Err(Error::NotDivisible { n, k });
    }
    let subsets = binomial(n, k);
    if subsets > SUBSET_CAP {
        return Err(Error::FamilyTooLarge {
            subsets,
            cap: SUBSET_CAP,
        });
    }
    Ok(subsets)
}

/// All `C(N-1, k-1)` parallel classes of k-subsets of `[N]`, canonically
/// ordered.
pub fn build_partitions(n: usize, k: usize) -> Result<PartitionFamily> {
    check_shape(n, k)?;
    let classes = if k == n {
        vec![vec![(1..=n as u32).collect()]]
    } else if k == 1 {
        vec![(1..=n as u32).map(|i| vec![i]).collect()]
    } else if k == 2 {
        round_robin(n)
    } else {
        flow_construction(n, k)
    };
    let mut family = PartitionFamily { n, k, classes };
    family.canonicalize();
    Ok(family)
}

/// Circle method: fix `N`, rotate the other `N - 1` points.
fn round_robin(n: usize) -> Vec<ParallelClass> {
    let m = n - 1;
    (0..m)
        .map(|r| {
            let mut class = vec![sorted_pair(r + 1, n)];
            for j in 1..n / 2 {
                let a = (r + j) % m;
                let b = (r + m - j) % m;
                class.push(sorted_pair(a + 1, b + 1));
            }
            class
        })
        .collect()
}

fn sorted_pair(a: usize, b: usize) -> Block {
    vec![a.min(b) as u32, a.max(b) as u32]
}

/// Interned partial blocks; id 0 is the empty set.
struct SubsetTable {
    sets: Vec<Block>,
    ids: HashMap<Block, usize>,
}

impl SubsetTable {
    fn new() -> Self {
        Self {
            sets: vec![Vec::new()],
            ids: HashMap::from([(Vec::new(), 0)]),
        }
    }

    fn intern(&mut self, set: Block) -> usize {
        if let Some(&id) = self.ids.get(&set) {
            return id;
        }
        let id = self.sets.len();
        self.sets.push(set.clone());
        self.ids.insert(set, id);
        id
    }

    fn extend(&mut self, id: usize, element: u32) -> usize {
        let mut set = self.sets[id].clone();
        set.push(element);
        self.intern(set)
    }
}

fn flow_construction(n: usize, k: usize) -> Vec<ParallelClass> {
    let class_total = binomial(n - 1, k - 1) as usize;
    let blocks_per_class = n / k;
    let mut table = SubsetTable::new();
    // Non-empty partial blocks of each class; the rest of its
    // `blocks_per_class` slots are empty.
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); class_total];

    for i in 0..n {
        let element = i as u32 + 1;
        let remaining = n - i - 1;
        // Node layout: source, classes, subsets (by table id), sink.
        let subset_base = 1 + class_total;
        let sink = subset_base + table.sets.len();
        let mut net = FlowNetwork::new(sink + 1);
        let mut used = vec![false; table.sets.len()];
        let mut choices = Vec::with_capacity(class_total);
        for (c, blocks) in classes.iter().enumerate() {
            net.add_edge(0, 1 + c, 1);
            let mut options = Vec::with_capacity(blocks.len() + 1);
            for &b in blocks {
                if table.sets[b].len() < k {
                    options.push((b, net.add_edge(1 + c, subset_base + b, 1)));
                    used[b] = true;
                }
            }
            let empty = blocks_per_class - blocks.len();
            if empty > 0 {
                options.push((0, net.add_edge(1 + c, subset_base, empty as u64)));
                used[0] = true;
            }
            choices.push(options);
        }
        for (id, set) in table.sets.iter().enumerate() {
            if used[id] {
                // Each S must be extended exactly C(N-i-1, k-|S|-1) times.
                let demand = binomial(remaining, k - set.len() - 1) as u64;
                if demand > 0 {
                    net.add_edge(subset_base + id, sink, demand);
                }
            }
        }
        let pushed = net.max_flow(0, sink);
        assert_eq!(
            pushed as usize, class_total,
            "integral flow must saturate every class"
        );
        for (blocks, options) in classes.iter_mut().zip(&choices) {
            let &(chosen, _) = options
                .iter()
                .find(|(_, e)| net.flow_on(*e) > 0)
                .expect("each class routes one unit");
            let extended = table.extend(chosen, element);
            if chosen == 0 {
                blocks.push(extended);
            } else {
                let slot = blocks
                    .iter()
                    .position(|&b| b == chosen)
                    .expect("block present");
                blocks[slot] = extended;
            }
        }
    }
    classes
        .into_iter()
        .map(|blocks| blocks.into_iter().map(|b| table.sets[b].clone()).collect())
        .collect()
}

/// Colex rank of a sorted 0-based k-subset.
fn colex_rank(block: &[u32]) -> u128 {
    block
        .iter()
        .enumerate()
        .map(|(i, &c)| binomial(c as usize, i + 1))
        .sum()
}

/// Brute-force check of every family invariant: each class partitions `[N]`
/// into k-blocks, the classes number `C(N-1, k-1)`, and every k-subset of
/// `[N]` appears exactly once overall.
pub fn verify_family(f: &PartitionFamily) -> bool {
    let (n, k) = (f.n, f.k);
    let Ok(subsets) = check_shape(n, k) else {
        return false;
    };
    if f.classes.len() as u128 != binomial(n - 1, k - 1) {
        return false;
    }
    let mut seen = vec![false; subsets as usize];
    let mut covered = vec![false; n];
    for class in &f.classes {
        if class.len() != n / k {
            return false;
        }
        covered.iter_mut().for_each(|c| *c = false);
        for block in class {
            if block.len() != k || !block.windows(2).all(|w| w[0] < w[1]) {
                return false;
            }
            if block.iter().any(|&j| j == 0 || j as usize > n) {
                return false;
            }
            for &j in block {
                let slot = &mut covered[j as usize - 1];
                if *slot {
                    return false;
                }
                *slot = true;
            }
            let zero_based: Vec<u32> = block.iter().map(|&j| j - 1).collect();
            let rank = colex_rank(&zero_based) as usize;
            if seen[rank] {
                return false;
            }
            seen[rank] = true;
        }
        if !covered.iter().all(|&c| c) {
            return false;
        }
    }
    seen.iter().all(|&s| s)
}

/// For each class `r`, `Σ_{blocks j_1 < ... < j_k} n^{-k} (X_{j_k} ··· X_{j_1} - X^k)`.
///
/// `xs[j - 1]` is `X_j`; `n` is the normalization of the enclosing product
/// and may exceed `N`.
pub fn grouped_sums(
    f: &PartitionFamily,
    xs: &[Matrix],
    x_mean: &Matrix,
    n: usize,
) -> Result<Vec<Matrix>> {
    if xs.len() < f.n {
        return Err(Error::LengthMismatch {
            expected: f.n,
            got: xs.len(),
        });
    }
    if n < f.n {
        return Err(Error::InvalidFamily(format!(
            "normalization n = {n} is smaller than N = {}",
            f.n
        )));
    }
    x_mean.require_square()?;
    let d = x_mean.rows();
    for x in &xs[..f.n] {
        if x.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                op: "grouped_sums",
                left: (d, d),
                right: x.shape(),
            });
        }
    }
    let inv_n = 1.0 / n as f64;
    let centered = mat_pow(&x_mean.scale(inv_n), f.k as u64)?;

    f.classes
        .iter()
        .map(|class| {
            let mut sum = Matrix::zeros(d, d);
            for block in class {
                if block.len() != f.k || block.iter().any(|&j| j == 0 || j as usize > f.n) {
                    return Err(Error::InvalidFamily(format!("malformed block {block:?}")));
                }
                // X_{j_k} ··· X_{j_1}, each factor scaled by 1/n.
                let mut prod = Matrix::identity(d);
                for &j in block {
                    let mut next = Matrix::zeros(d, d);
                    gemm_acc(&mut next, inv_n, &xs[j as usize - 1], &prod);
                    prod = next;
                }
                sum.axpy(1.0, &prod)?;
                sum.axpy(-1.0, &centered)?;
            }
            Ok(sum)
        })
        .collect()
}
