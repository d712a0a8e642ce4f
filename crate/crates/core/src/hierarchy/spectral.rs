//! Hierarchy induction by recursive spectral bisection.
//!
//! Each cluster is split in two using the Ng-Jordan-Weiss recipe on the
//! symmetrized transition affinity `W = (A + Aᵀ) / 2`: normalize as
//! `D^{-1/2} W D^{-1/2}`, embed rows with the top two eigenvectors, normalize
//! the embedded rows and run 2-means. Recursion stops at `min_leaf` states.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AbstractionHierarchy, HierarchyError};
use crate::hmm::LogModel;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOptions {
    /// Upper bound on the fan-out of any induced state.
    pub max_children: usize,
    /// Clusters of at most this many states are not split further.
    pub min_leaf: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            max_children: 2,
            min_leaf: 1,
            restarts: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InducedHierarchy {
    pub hierarchy: AbstractionHierarchy,
    /// Splits where 2-means left one side empty and a balanced split by
    /// index was used instead.
    pub fallback_splits: usize,
}

enum Tree {
    State(usize),
    Cluster(Vec<Tree>),
}

impl Tree {
    fn height(&self) -> usize {
        match self {
            Tree::State(_) => 0,
            Tree::Cluster(kids) => 1 + kids.iter().map(Tree::height).max().unwrap_or(0),
        }
    }
}

pub fn induce_hierarchy_spectral(
    model: &LogModel,
    max_children: usize,
    min_leaf: usize,
) -> Result<InducedHierarchy, HierarchyError> {
    induce_with(
        model,
        &SpectralOptions {
            max_children,
            min_leaf,
            ..SpectralOptions::default()
        },
    )
}

pub fn induce_with(model: &LogModel, opts: &SpectralOptions) -> Result<InducedHierarchy, HierarchyError> {
    let n = model.num_states();
    if n < 2 {
        return Err(HierarchyError::InvalidArgument("need at least 2 states".into()));
    }
    if opts.max_children < 2 || opts.min_leaf == 0 || opts.min_leaf > opts.max_children {
        return Err(HierarchyError::InvalidArgument(format!(
            "need max_children >= 2 and 1 <= min_leaf <= max_children, got {} and {}",
            opts.max_children, opts.min_leaf
        )));
    }
    let w = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (model.transition(i, j).exp() + model.transition(j, i).exp())
    });
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut fallbacks = 0;
    let all: Vec<usize> = (0..n).collect();
    let tree = build_tree(&w, &all, opts, &mut rng, &mut fallbacks);
    Ok(InducedHierarchy {
        hierarchy: flatten(&tree, n),
        fallback_splits: fallbacks,
    })
}

fn build_tree(
    w: &DMatrix<f64>,
    members: &[usize],
    opts: &SpectralOptions,
    rng: &mut ChaCha8Rng,
    fallbacks: &mut usize,
) -> Tree {
    if members.len() == 1 {
        return Tree::State(members[0]);
    }
    if members.len() <= opts.min_leaf {
        return Tree::Cluster(members.iter().map(|&s| Tree::State(s)).collect());
    }
    let (left, right) = match bisect(w, members, opts.restarts, rng) {
        Some(split) => split,
        None => {
            *fallbacks += 1;
            let mid = members.len() / 2;
            (members[..mid].to_vec(), members[mid..].to_vec())
        }
    };
    Tree::Cluster(vec![
        build_tree(w, &left, opts, rng, fallbacks),
        build_tree(w, &right, opts, rng, fallbacks),
    ])
}

/// Top-two eigenvector embedding of the normalized affinity restricted to
/// `members`, with rows scaled to unit length.
pub(crate) fn spectral_embedding(w: &DMatrix<f64>, members: &[usize]) -> Vec<[f64; 2]> {
    let k = members.len();
    let sub = DMatrix::from_fn(k, k, |i, j| w[(members[i], members[j])]);
    let inv_sqrt: Vec<f64> = (0..k)
        .map(|i| {
            let d: f64 = sub.row(i).sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let norm = DMatrix::from_fn(k, k, |i, j| inv_sqrt[i] * sub[(i, j)] * inv_sqrt[j]);
    let eig = norm.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (c0, c1) = (order[0], order[1]);
    (0..k)
        .map(|i| {
            let x = eig.eigenvectors[(i, c0)];
            let y = eig.eigenvectors[(i, c1)];
            let len = (x * x + y * y).sqrt();
            if len > 0.0 {
                [x / len, y / len]
            } else {
                [0.0, 0.0]
            }
        })
        .collect()
}

fn bisect(
    w: &DMatrix<f64>,
    members: &[usize],
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let points = spectral_embedding(w, members);
    let labels = two_means(&points, restarts, rng);
    let left: Vec<usize> = members
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    let right: Vec<usize> = members
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    if left.is_empty() || right.is_empty() {
        return None;
    }
    // keep the cluster holding the smallest state first, for determinism
    Some(if left[0] < right[0] { (left, right) } else { (right, left) })
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Lloyd's algorithm with k = 2; the restart with the lowest inertia wins.
fn two_means(points: &[[f64; 2]], restarts: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let n = points.len();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for _ in 0..restarts.max(1) {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let mut centers = [points[a], points[b]];
        let mut labels = vec![false; n];
        for _ in 0..100 {
            let mut changed = false;
            for (p, l) in points.iter().zip(labels.iter_mut()) {
                let side = dist2(p, &centers[1]) < dist2(p, &centers[0]);
                changed |= side != *l;
                *l = side;
            }
            for (c, side) in centers.iter_mut().zip([false, true]) {
                let (mut sx, mut sy, mut cnt) = (0.0, 0.0, 0usize);
                for (p, &l) in points.iter().zip(&labels) {
                    if l == side {
                        sx += p[0];
                        sy += p[1];
                        cnt += 1;
                    }
                }
                if cnt > 0 {
                    *c = [sx / cnt as f64, sy / cnt as f64];
                }
            }
            if !changed {
                break;
            }
        }
        let inertia: f64 = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| dist2(p, &centers[l as usize]))
            .sum();
        if best.as_ref().is_none_or(|(bi, _)| inertia < *bi) {
            best = Some((inertia, labels));
        }
    }
    best.expect("at least one restart").1
}

/// Lays the tree out in levels. States that sit shallower than the deepest
/// leaf are lifted through single-child pad states.
fn flatten(tree: &Tree, num_states: usize) -> AbstractionHierarchy {
    let height = tree.height();
    let mut sizes = vec![0usize; height + 1];
    sizes[0] = num_states;
    let mut maps: Vec<Vec<usize>> = (0..height).map(|_| Vec::new()).collect();
    maps[0] = vec![usize::MAX; num_states];

    fn place(
        node: &Tree,
        level: usize,
        parent: Option<usize>,
        sizes: &mut [usize],
        maps: &mut [Vec<usize>],
    ) {
        match node {
            Tree::State(s) => {
                let mut up = parent.expect("states are never the root here");
                for pad in (1..=level).rev() {
                    let idx = sizes[pad];
                    sizes[pad] += 1;
                    maps[pad].push(up);
                    up = idx;
                }
                maps[0][*s] = up;
            }
            Tree::Cluster(kids) => {
                let idx = sizes[level];
                sizes[level] += 1;
                if let Some(p) = parent {
                    maps[level].push(p);
                }
                for kid in kids {
                    place(kid, level - 1, Some(idx), sizes, maps);
                }
            }
        }
    }
    if let Tree::Cluster(_) = tree {
        place(tree, height, None, &mut sizes, &mut maps);
    }
    AbstractionHierarchy::new(sizes, maps).expect("induced tree is a valid hierarchy")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::validate_hierarchy;
    use crate::hmm::{validate_model, HmmModel};

    fn block_model() -> LogModel {
        // two 2-state blocks, 0.98 of each row's mass stays in its block
        validate_model(&HmmModel::new(
            vec![
                vec![0.60, 0.38, 0.01, 0.01],
                vec![0.38, 0.60, 0.01, 0.01],
                vec![0.01, 0.01, 0.60, 0.38],
                vec![0.01, 0.01, 0.38, 0.60],
            ],
            vec![vec![1.0]; 4],
            vec![0.25; 4],
        ))
        .unwrap()
    }

    /// Normalized association, the quantity maximized by a normalized cut.
    fn association(w: &DMatrix<f64>, side: &[bool]) -> f64 {
        let n = side.len();
        let mut total = 0.0;
        for s in [false, true] {
            let (mut within, mut vol) = (0.0, 0.0);
            for i in (0..n).filter(|&i| side[i] == s) {
                for j in 0..n {
                    vol += w[(i, j)];
                    if side[j] == s {
                        within += w[(i, j)];
                    }
                }
            }
            total += within / vol;
        }
        total
    }

    #[test]
    fn block_model_splits_into_blocks() {
        let model = block_model();
        let induced = induce_hierarchy_spectral(&model, 2, 1).unwrap();
        let h = &induced.hierarchy;
        validate_hierarchy(h, 4).unwrap();
        assert_eq!(induced.fallback_splits, 0);
        let top = h.top_level();
        let first = h.ancestor(0, 0, top - 1);
        let side: Vec<bool> = (0..4).map(|s| h.ancestor(0, s, top - 1) != first).collect();
        assert_eq!(side, vec![false, false, true, true]);

        // exhaustive oracle over all non-trivial 2-partitions
        let w = DMatrix::from_fn(4, 4, |i, j| {
            0.5 * (model.transition(i, j).exp() + model.transition(j, i).exp())
        });
        let mut best = (f64::MIN, 0u32);
        for mask in 1u32..(1 << 4) - 1 {
            let side: Vec<bool> = (0..4).map(|i| mask >> i & 1 == 1).collect();
            let v = association(&w, &side);
            if v > best.0 + 1e-12 {
                best = (v, mask);
            }
        }
        let best_side: Vec<bool> = (0..4).map(|i| best.1 >> i & 1 == 1).collect();
        assert!(best_side == side || best_side.iter().zip(&side).all(|(a, b)| a != b));
    }

    #[test]
    fn two_states_give_a_trivial_tree() {
        let model = validate_model(&HmmModel::new(
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![1.0]; 2],
            vec![0.5, 0.5],
        ))
        .unwrap();
        let h = induce_hierarchy_spectral(&model, 2, 1).unwrap().hierarchy;
        assert_eq!(h.level_sizes(), &[2, 1]);
    }

    #[test]
    fn leaf_clusters_hold_several_states() {
        let h = induce_hierarchy_spectral(&block_model(), 2, 2).unwrap().hierarchy;
        assert_eq!(h.level_sizes(), &[4, 2, 1]);
        assert_eq!(h.parent_maps()[0], vec![0, 0, 1, 1]);
    }

    #[test]
    fn bad_arguments() {
        assert!(induce_hierarchy_spectral(&block_model(), 1, 1).is_err());
        assert!(induce_hierarchy_spectral(&block_model(), 2, 3).is_err());
        assert!(induce_hierarchy_spectral(&block_model(), 2, 0).is_err());
    }

    #[test]
    fn uneven_tree_is_padded() {
        let tree = Tree::Cluster(vec![
            Tree::Cluster(vec![Tree::State(0), Tree::State(1)]),
            Tree::State(2),
        ]);
        let h = flatten(&tree, 3);
        assert_eq!(h.level_sizes(), &[3, 2, 1]);
        validate_hierarchy(&h, 3).unwrap();
        assert_eq!(h.children(1, 1), &[2]);
    }
}
