//! Gács–Körner maximal common partitioning and its conditional version.
//!
//! The maximal common partitioning of `(X, Y)` is realized as the connected
//! components of the bipartite support graph: vertices are the symbols with
//! positive marginal probability, and `x ~ y` is an edge iff `p(x, y)` lies in
//! the support. Blocks are ordered by their smallest `x`.
//!
//! For a tripartite pmf the partition is taken per Eve symbol. The per-`z`
//! block instances are then merged across `z` whenever two instances share an
//! `x` (or a `y`); a labeling of the blocks that is a function of `x` alone and
//! of `y` alone must be constant on these merge components, so one exists iff
//! no component contains two blocks of the same `z`.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::dist::{entropy, Dist2, Dist3};
use crate::scalar::Real;

/// Disjoint-set forest with union by size and path halving.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

/// One block `X_i × Y_i` of a common partitioning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

/// The maximal common partitioning of a bipartite pmf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommonPartition {
    blocks: Vec<Block>,
    block_of_x: Vec<Option<usize>>,
    block_of_y: Vec<Option<usize>>,
}

impl Serialize for CommonPartition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CommonPartition", 1)?;
        st.serialize_field("blocks", &self.blocks)?;
        st.end()
    }
}

impl CommonPartition {
    /// Connected components of the bipartite graph on `dx + dy` vertices
    /// whose edges are given by `edge(x, y)`. Isolated vertices get no block.
    fn from_support(dx: usize, dy: usize, edge: impl Fn(usize, usize) -> bool) -> Self {
        let mut uf = UnionFind::new(dx + dy);
        let mut has_x = vec![false; dx];
        let mut has_y = vec![false; dy];
        for x in 0..dx {
            for y in 0..dy {
                if edge(x, y) {
                    uf.union(x, dx + y);
                    has_x[x] = true;
                    has_y[y] = true;
                }
            }
        }
        let mut root_to_block = vec![usize::MAX; dx + dy];
        let mut blocks: Vec<Block> = Vec::new();
        let mut block_of_x = vec![None; dx];
        for x in (0..dx).filter(|&x| has_x[x]) {
            let r = uf.find(x);
            if root_to_block[r] == usize::MAX {
                root_to_block[r] = blocks.len();
                blocks.push(Block {
                    x: Vec::new(),
                    y: Vec::new(),
                });
            }
            let b = root_to_block[r];
            blocks[b].x.push(x);
            block_of_x[x] = Some(b);
        }
        let mut block_of_y = vec![None; dy];
        for y in (0..dy).filter(|&y| has_y[y]) {
            let b = root_to_block[uf.find(dx + y)];
            blocks[b].y.push(y);
            block_of_y[y] = Some(b);
        }
        Self {
            blocks,
            block_of_x,
            block_of_y,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of_x(&self, x: usize) -> Option<usize> {
        self.block_of_x.get(x).copied().flatten()
    }

    pub fn block_of_y(&self, y: usize) -> Option<usize> {
        self.block_of_y.get(y).copied().flatten()
    }

    /// Probability of each block under `d`.
    pub fn block_probs<R: Real>(&self, d: &Dist2<R>) -> Vec<R> {
        let mut out = vec![R::zero(); self.blocks.len()];
        let [da, db] = d.dims();
        for a in 0..da {
            if let Some(j) = self.block_of_x(a) {
                for b in 0..db {
                    out[j] = out[j] + d.get(a, b);
                }
            }
        }
        out
    }
}

/// Maximal common partitioning of `d`, support threshold `R::SUPPORT_EPS`.
pub fn maximal_common_partition<R: Real>(d: &Dist2<R>) -> CommonPartition {
    let eps = R::lit(R::SUPPORT_EPS);
    let [da, db] = d.dims();
    CommonPartition::from_support(da, db, |a, b| d.get(a, b) > eps)
}

/// `H(J_XY)`, the Gács–Körner common information.
pub fn common_information<R: Real>(d: &Dist2<R>) -> R {
    entropy(&maximal_common_partition(d).block_probs(d))
}

/// Maximal conditional common function `J_{XY|Z}` together with the
/// cross-`z` merge labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondCommonFunction {
    per_z: Vec<Option<CommonPartition>>,
    labels: Vec<Vec<usize>>,
    num_labels: usize,
    per_z_injective: bool,
}

impl Serialize for CondCommonFunction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct PerZ<'a> {
            z: usize,
            blocks: &'a [Block],
        }
        #[derive(Serialize)]
        struct Labels<'a> {
            z: usize,
            labels: &'a [usize],
        }
        let per_z: Vec<PerZ> = self
            .per_z
            .iter()
            .enumerate()
            .filter_map(|(z, p)| p.as_ref().map(|p| PerZ { z, blocks: p.blocks() }))
            .collect();
        let labels: Vec<Labels> = self
            .per_z
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_some())
            .map(|(z, _)| Labels {
                z,
                labels: &self.labels[z],
            })
            .collect();
        let mut st = s.serialize_struct("CondCommonFunction", 3)?;
        st.serialize_field("per_z", &per_z)?;
        st.serialize_field("global_labels", &labels)?;
        st.serialize_field("per_z_injective", &self.per_z_injective)?;
        st.end()
    }
}

impl CondCommonFunction {
    /// Partition of `p_{XY|Z=z}`; `None` when `p(z) = 0`.
    pub fn partition(&self, z: usize) -> Option<&CommonPartition> {
        self.per_z.get(z).and_then(Option::as_ref)
    }

    pub fn num_z(&self) -> usize {
        self.per_z.len()
    }

    /// Largest number of blocks over all `z`.
    pub fn max_blocks(&self) -> usize {
        self.per_z
            .iter()
            .flatten()
            .map(CommonPartition::num_blocks)
            .max()
            .unwrap_or(0)
    }

    /// Block index of `x` within the partition for `z`.
    pub fn local_block(&self, x: usize, z: usize) -> Option<usize> {
        self.partition(z).and_then(|p| p.block_of_x(x))
    }

    pub fn local_block_of_y(&self, y: usize, z: usize) -> Option<usize> {
        self.partition(z).and_then(|p| p.block_of_y(y))
    }

    pub fn global_label(&self, z: usize, block: usize) -> Option<usize> {
        self.labels.get(z).and_then(|l| l.get(block)).copied()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// True iff no merge component holds two blocks of the same `z`.
    pub fn per_z_injective(&self) -> bool {
        self.per_z_injective
    }
}

/// Builds `J_{XY|Z}` and the canonical merge labeling for `d`.
pub fn conditional_common_function<R: Real>(d: &Dist3<R>) -> CondCommonFunction {
    let eps = R::lit(R::SUPPORT_EPS);
    let [dx, dy, dz] = d.dims();
    let pz = d.marginal_z();
    let per_z: Vec<Option<CommonPartition>> = (0..dz)
        .map(|z| {
            (pz[z] > eps)
                .then(|| CommonPartition::from_support(dx, dy, |x, y| d.get(x, y, z) > eps))
        })
        .collect();

    // Node ids for block instances (z, i), increasing in (z, i).
    let mut offset = vec![0usize; dz + 1];
    for z in 0..dz {
        offset[z + 1] = offset[z] + per_z[z].as_ref().map_or(0, |p| p.num_blocks());
    }
    let mut uf = UnionFind::new(offset[dz]);
    let mut first_x: Vec<Option<usize>> = vec![None; dx];
    let mut first_y: Vec<Option<usize>> = vec![None; dy];
    for (z, part) in per_z.iter().enumerate() {
        let Some(part) = part else { continue };
        for (i, block) in part.blocks().iter().enumerate() {
            let node = offset[z] + i;
            for &x in &block.x {
                match first_x[x] {
                    Some(n) => {
                        uf.union(n, node);
                    }
                    None => first_x[x] = Some(node),
                }
            }
            for &y in &block.y {
                match first_y[y] {
                    Some(n) => {
                        uf.union(n, node);
                    }
                    None => first_y[y] = Some(node),
                }
            }
        }
    }

    let mut root_label = vec![usize::MAX; offset[dz]];
    let mut num_labels = 0;
    let mut labels = vec![Vec::new(); dz];
    let mut per_z_injective = true;
    for z in 0..dz {
        let n = offset[z + 1] - offset[z];
        let mut seen = Vec::with_capacity(n);
        for i in 0..n {
            let r = uf.find(offset[z] + i);
            if root_label[r] == usize::MAX {
                root_label[r] = num_labels;
                num_labels += 1;
            }
            let l = root_label[r];
            if seen.contains(&l) {
                per_z_injective = false;
            }
            seen.push(l);
        }
        labels[z] = seen;
    }

    CondCommonFunction {
        per_z,
        labels,
        num_labels,
        per_z_injective,
    }
}

/// `H(J_{XY|Z} | Z) = sum_z p(z) H(J | Z = z)`.
pub fn cond_common_entropy<R: Real>(d: &Dist3<R>) -> R {
    cond_common_entropy_with(d, &conditional_common_function(d))
}

pub(crate) fn cond_common_entropy_with<R: Real>(d: &Dist3<R>, j: &CondCommonFunction) -> R {
    let pz = d.marginal_z();
    let [dx, dy, _] = d.dims();
    let mut total = R::zero();
    for (z, &w) in pz.iter().enumerate() {
        let Some(part) = j.partition(z) else { continue };
        let mut probs = vec![R::zero(); part.num_blocks()];
        for x in 0..dx {
            if let Some(b) = part.block_of_x(x) {
                for y in 0..dy {
                    probs[b] = probs[b] + d.get(x, y, z) / w;
                }
            }
        }
        total = total + w * entropy(&probs);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::binary_entropy;
    use proptest::prelude::*;

    fn d2(dims: [usize; 2], entries: &[(usize, usize, f64)]) -> Dist2<f64> {
        let mut p = vec![0.0; dims[0] * dims[1]];
        for &(a, b, v) in entries {
            p[a * dims[1] + b] += v;
        }
        Dist2::new(dims, p).unwrap()
    }

    fn perfect4_z_half() -> Dist3<f64> {
        Dist3::from_sparse(
            [4, 4, 2],
            &[(0, 0, 0, 0.25), (1, 1, 0, 0.25), (2, 2, 1, 0.25), (3, 3, 1, 0.25)],
        )
        .unwrap()
    }

    fn thm6a(lambda: f64) -> Dist3<f64> {
        Dist3::from_sparse(
            [2, 2, 2],
            &[
                (0, 0, 0, 0.25),
                (1, 1, 0, 0.25),
                (0, 0, 1, lambda / 2.0),
                (1, 1, 1, (1.0 - lambda) / 2.0),
            ],
        )
        .unwrap()
    }

    /// Maximal common partitioning by exhaustive search over set partitions
    /// of supp X. Each y must see x's from a single part; the longest valid
    /// partition wins.
    fn brute_force_blocks(d: &Dist2<f64>) -> Vec<(Vec<usize>, Vec<usize>)> {
        let [da, db] = d.dims();
        let px = d.marginal_a();
        let py = d.marginal_b();
        let xs: Vec<usize> = (0..da).filter(|&a| px[a] > 1e-12).collect();
        let ys: Vec<usize> = (0..db).filter(|&b| py[b] > 1e-12).collect();
        let mut best: Option<Vec<(Vec<usize>, Vec<usize>)>> = None;
        // Restricted growth strings enumerate set partitions.
        let n = xs.len();
        let mut rgs = vec![0usize; n];
        loop {
            let parts = rgs.iter().copied().max().map_or(0, |m| m + 1);
            let mut ok = true;
            let mut yblock = vec![usize::MAX; db];
            for &b in &ys {
                for (i, &a) in xs.iter().enumerate() {
                    if d.get(a, b) > 1e-12 {
                        if yblock[b] == usize::MAX {
                            yblock[b] = rgs[i];
                        } else if yblock[b] != rgs[i] {
                            ok = false;
                        }
                    }
                }
            }
            // every part needs a y
            for part in 0..parts {
                if !ys.iter().any(|&b| yblock[b] == part) {
                    ok = false;
                }
            }
            if ok && best.as_ref().is_none_or(|bb| bb.len() < parts) {
                let mut blocks = vec![(Vec::new(), Vec::new()); parts];
                for (i, &a) in xs.iter().enumerate() {
                    blocks[rgs[i]].0.push(a);
                }
                for &b in &ys {
                    blocks[yblock[b]].1.push(b);
                }
                best = Some(blocks);
            }
            // next RGS
            let mut i = n;
            loop {
                if i <= 1 {
                    let mut v: Vec<_> = best.unwrap();
                    v.sort();
                    return v;
                }
                i -= 1;
                let m = rgs[..i].iter().copied().max().unwrap_or(0);
                if rgs[i] <= m {
                    rgs[i] += 1;
                    for r in rgs[i + 1..].iter_mut() {
                        *r = 0;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn partition_examples() {
        let copy = d2([2, 2], &[(0, 0, 0.5), (1, 1, 0.5)]);
        let p = maximal_common_partition(&copy);
        assert_eq!(
            p.blocks(),
            &[Block { x: vec![0], y: vec![0] }, Block { x: vec![1], y: vec![1] }]
        );
        let ind = d2([2, 3], &[(0, 0, 0.1), (0, 1, 0.2), (0, 2, 0.1), (1, 0, 0.2), (1, 1, 0.2), (1, 2, 0.2)]);
        assert_eq!(maximal_common_partition(&ind).num_blocks(), 1);
        let chain = d2([2, 2], &[(0, 0, 1.0 / 3.0), (0, 1, 1.0 / 3.0), (1, 1, 1.0 / 3.0)]);
        assert_eq!(maximal_common_partition(&chain).num_blocks(), 1);
        assert_eq!(brute_force_blocks(&chain).len(), 1);
    }

    #[test]
    fn zero_rows_get_no_block() {
        let d = d2([3, 3], &[(0, 0, 0.5), (2, 2, 0.5)]);
        let p = maximal_common_partition(&d);
        assert_eq!(p.num_blocks(), 2);
        assert_eq!(p.block_of_x(1), None);
        assert_eq!(p.block_of_y(1), None);
        assert_eq!(p.block_of_y(2), Some(1));
    }

    #[test]
    fn common_information_examples() {
        let copy4 = d2([4, 4], &[(0, 0, 0.25), (1, 1, 0.25), (2, 2, 0.25), (3, 3, 0.25)]);
        assert!((common_information(&copy4) - 2.0).abs() < 1e-15);
        let ind = d2([2, 2], &[(0, 0, 0.25), (0, 1, 0.25), (1, 0, 0.25), (1, 1, 0.25)]);
        assert_eq!(common_information(&ind), 0.0);
        let split = d2([2, 3], &[(0, 0, 0.5), (1, 1, 0.25), (1, 2, 0.25)]);
        let p = maximal_common_partition(&split);
        assert_eq!(p.blocks()[1], Block { x: vec![1], y: vec![1, 2] });
        assert!((common_information(&split) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_function_examples() {
        let j = conditional_common_function(&perfect4_z_half());
        assert!(j.per_z_injective());
        assert_eq!(j.partition(1).unwrap().num_blocks(), 2);
        assert_eq!(j.num_labels(), 4);
        assert_eq!(j.local_block(3, 1), Some(1));

        let ind = Dist3::from_fn([2, 2, 2], |_, _, _| 0.125f64).unwrap();
        let j = conditional_common_function(&ind);
        assert_eq!(j.num_labels(), 1);
        assert!(j.per_z_injective());

        let j = conditional_common_function(&thm6a(0.25));
        assert!(j.per_z_injective());
        assert_eq!(j.global_label(0, 0), j.global_label(1, 0));
        assert_eq!(j.global_label(0, 1), j.global_label(1, 1));
        assert_ne!(j.global_label(0, 0), j.global_label(0, 1));
    }

    #[test]
    fn block_flip_is_not_injective() {
        let d = Dist3::from_sparse(
            [2, 2, 2],
            &[(0, 0, 0, 0.25), (1, 1, 0, 0.25), (0, 1, 1, 0.25), (1, 0, 1, 0.25)],
        )
        .unwrap();
        let j = conditional_common_function(&d);
        assert!(!j.per_z_injective());
        assert_eq!(j.num_labels(), 1);
    }

    #[test]
    fn conditional_entropy_examples() {
        assert!((cond_common_entropy(&perfect4_z_half()) - 1.0).abs() < 1e-15);
        let ind = Dist3::from_fn([2, 2, 2], |_, _, _| 0.125f64).unwrap();
        assert_eq!(cond_common_entropy(&ind), 0.0);
        assert!((cond_common_entropy(&thm6a(0.0)) - 0.5).abs() < 1e-15);
        let lam: f64 = 0.3;
        let expected = (1.0 + binary_entropy(lam).unwrap()) / 2.0;
        assert!((cond_common_entropy(&thm6a(lam)) - expected).abs() < 1e-12);
    }

    #[test]
    fn serializes_expected_shape() {
        let j = conditional_common_function(&thm6a(0.25));
        let v = serde_json::to_value(&j).unwrap();
        assert_eq!(v["per_z"][1]["z"], 1);
        assert_eq!(v["per_z"][0]["blocks"][1]["x"][0], 1);
        assert_eq!(v["per_z_injective"], true);
        assert_eq!(v["global_labels"][1]["labels"][1], 1);
        let p = maximal_common_partition(&d2([2, 2], &[(0, 0, 0.5), (1, 1, 0.5)]));
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"blocks":[{"x":[0],"y":[0]},{"x":[1],"y":[1]}]}"#
        );
    }

    fn sparse_d2() -> impl Strategy<Value = Dist2<f64>> {
        (1usize..=4, 1usize..=4).prop_flat_map(|(a, b)| {
            prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], a * b)
                .prop_filter("nonzero", |w| w.iter().any(|&v| v > 0.0))
                .prop_map(move |w| {
                    let s: f64 = w.iter().sum();
                    Dist2::new([a, b], w.iter().map(|v| v / s).collect()).unwrap()
                })
        })
    }

    fn sparse_d3() -> impl Strategy<Value = Dist3<f64>> {
        (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(a, b, c)| {
            prop::collection::vec(prop_oneof![Just(0.0), Just(0.0), 0.01f64..1.0], a * b * c)
                .prop_filter("nonzero", |w| w.iter().any(|&v| v > 0.0))
                .prop_map(move |w| {
                    let s: f64 = w.iter().sum();
                    Dist3::new([a, b, c], w.iter().map(|v| v / s).collect()).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(d in sparse_d2()) {
            let p = maximal_common_partition(&d);
            let mut got: Vec<_> = p.blocks().iter().map(|b| (b.x.clone(), b.y.clone())).collect();
            got.sort();
            prop_assert_eq!(got, brute_force_blocks(&d));
        }

        #[test]
        fn common_information_below_marginal_entropies(d in sparse_d2()) {
            let ci = common_information(&d);
            prop_assert!(ci <= entropy(&d.marginal_a()) + 1e-12);
            prop_assert!(ci <= entropy(&d.marginal_b()) + 1e-12);
        }

        #[test]
        fn partition_invariants_hold(d in sparse_d2()) {
            let p = maximal_common_partition(&d);
            let [da, db] = d.dims();
            for a in 0..da {
                for b in 0..db {
                    if d.get(a, b) > 1e-12 {
                        prop_assert_eq!(p.block_of_x(a), p.block_of_y(b));
                    }
                }
            }
            for blk in p.blocks() {
                prop_assert!(!blk.x.is_empty() && !blk.y.is_empty());
            }
        }

        #[test]
        fn cond_entropy_ignores_relabeling(d in sparse_d3(), seed in 0u64..1000) {
            // Permuting X/Y symbols permutes blocks and their labels.
            let [dx, dy, dz] = d.dims();
            let rot = |n: usize| (0..n).map(|i| (i + seed as usize) % n).collect::<Vec<_>>();
            let q = d.permute(&rot(dx), &rot(dy), &(0..dz).collect::<Vec<_>>()).unwrap();
            prop_assert!((cond_common_entropy(&d) - cond_common_entropy(&q)).abs() < 1e-12);
        }
    }
}
