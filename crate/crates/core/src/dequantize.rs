//! Multi-round local-instrument protocols with public outcomes, run on the
//! incoherent embedding, and their conversion into classical protocols
//! driven by message kernels.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{Dist3, DEFAULT_PRODUCT_CAP};
use crate::error::{Error, Result};
use crate::qlinalg::random::random_isometry;
use crate::qlinalg::{cr, trace_distance, CMatrix, QState};
use crate::scalar::Real;

/// A full or partial list of broadcast outcomes.
pub type History = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimCaps {
    /// Largest dense output dimension.
    pub dense: usize,
    /// Largest number of `(x, y, z, history)` branches enumerated.
    pub branches: usize,
}

impl Default for SimCaps {
    fn default() -> Self {
        Self {
            dense: 1024,
            branches: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

/// Odd rounds (1-based) are Alice's.
pub fn speaker(round: usize) -> Party {
    if round % 2 == 1 {
        Party::Alice
    } else {
        Party::Bob
    }
}

/// Kraus operators per outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument<R> {
    pub outcomes: Vec<Vec<CMatrix<R>>>,
}

impl<R: Real> Instrument<R> {
    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    /// Single outcome, identity Kraus operator.
    pub fn trivial(dim: usize) -> Self {
        Self {
            outcomes: vec![vec![CMatrix::identity(dim)]],
        }
    }

    /// Projective measurement in the computational basis.
    pub fn computational(dim: usize) -> Self {
        Self {
            outcomes: (0..dim)
                .map(|i| {
                    vec![CMatrix::from_fn(dim, dim, |a, b| {
                        cr(if a == i && b == i { R::one() } else { R::zero() })
                    })]
                })
                .collect(),
        }
    }

    fn completeness_defect(&self, dim: usize) -> Result<R> {
        let mut s = CMatrix::zeros(dim, dim);
        for k in self.outcomes.iter().flatten() {
            if k.rows() != dim || k.cols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {}x{} on a {dim}-dimensional space",
                    k.rows(),
                    k.cols()
                )));
            }
            s = &s + &(&k.adjoint() * k);
        }
        Ok(s.max_diff(&CMatrix::identity(dim)))
    }
}

fn apply_kraus<R: Real>(ks: &[CMatrix<R>], rho: &CMatrix<R>) -> CMatrix<R> {
    let mut out = CMatrix::zeros(ks[0].rows(), ks[0].rows());
    for k in ks {
        out = &out + &(&(k * rho) * &k.adjoint());
    }
    out
}

fn channel_defect<R: Real>(ks: &[CMatrix<R>], in_dim: usize, out_dim: usize) -> Result<R> {
    if ks.is_empty() {
        return Err(Error::InvalidTree("empty Kraus list".into()));
    }
    let mut s = CMatrix::zeros(in_dim, in_dim);
    for k in ks {
        if k.rows() != out_dim || k.cols() != in_dim {
            return Err(Error::DimensionMismatch(format!(
                "leaf Kraus operator {}x{}, expected {out_dim}x{in_dim}",
                k.rows(),
                k.cols()
            )));
        }
        s = &s + &(&k.adjoint() * k);
    }
    Ok(s.max_diff(&CMatrix::identity(in_dim)))
}

/// Final local channels after a full history.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf<R> {
    pub alice: Vec<CMatrix<R>>,
    pub bob: Vec<CMatrix<R>>,
}

/// History-keyed instruments; the node for history `h` acts in round
/// `h.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentTree<R> {
    rounds: usize,
    dim_a: usize,
    dim_b: usize,
    out_a: usize,
    out_b: usize,
    nodes: BTreeMap<History, Instrument<R>>,
    leaves: BTreeMap<History, Leaf<R>>,
}

impl<R: Real> InstrumentTree<R> {
    /// Validates shape, completeness of every history, and trace
    /// preservation of every node and leaf.
    pub fn new(
        rounds: usize,
        [dim_a, dim_b]: [usize; 2],
        [out_a, out_b]: [usize; 2],
        nodes: BTreeMap<History, Instrument<R>>,
        leaves: BTreeMap<History, Leaf<R>>,
    ) -> Result<Self> {
        if !rounds.is_multiple_of(2) {
            return Err(Error::InvalidTree(format!("rounds must be even, got {rounds}")));
        }
        if dim_a == 0 || dim_b == 0 || out_a == 0 || out_b == 0 {
            return Err(Error::InvalidTree("zero dimension".into()));
        }
        let t = Self {
            rounds,
            dim_a,
            dim_b,
            out_a,
            out_b,
            nodes,
            leaves,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let tol = R::lit(R::STATE_TOL);
        let mut frontier: Vec<History> = vec![vec![]];
        let mut visited_nodes = 0;
        for round in 1..=self.rounds {
            let mut next = Vec::new();
            for h in frontier {
                let node = self.nodes.get(&h).ok_or_else(|| {
                    Error::InvalidTree(format!("missing node for history {}", history_key(&h)))
                })?;
                visited_nodes += 1;
                if node.outcomes.is_empty() || node.outcomes.iter().any(|o| o.is_empty()) {
                    return Err(Error::InvalidTree(format!(
                        "node {} has an empty outcome",
                        history_key(&h)
                    )));
                }
                let dim = match speaker(round) {
                    Party::Alice => self.dim_a,
                    Party::Bob => self.dim_b,
                };
                let defect = node.completeness_defect(dim)?;
                if defect > tol {
                    return Err(Error::InvalidTree(format!(
                        "node {} is not trace preserving (defect {})",
                        history_key(&h),
                        defect.as_f64()
                    )));
                }
                for i in 0..node.num_outcomes() {
                    let mut c = h.clone();
                    c.push(i);
                    next.push(c);
                }
            }
            frontier = next;
        }
        if visited_nodes != self.nodes.len() {
            return Err(Error::InvalidTree("nodes outside the history tree".into()));
        }
        if frontier.len() != self.leaves.len() {
            return Err(Error::InvalidTree(format!(
                "{} leaves for {} full histories",
                self.leaves.len(),
                frontier.len()
            )));
        }
        for h in &frontier {
            let leaf = self.leaves.get(h).ok_or_else(|| {
                Error::InvalidTree(format!("missing leaf for history {}", history_key(h)))
            })?;
            let da = channel_defect(&leaf.alice, self.dim_a, self.out_a)?;
            let db = channel_defect(&leaf.bob, self.dim_b, self.out_b)?;
            if da.max(db) > tol {
                return Err(Error::InvalidTree(format!(
                    "leaf {} is not trace preserving",
                    history_key(h)
                )));
            }
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn input_dims(&self) -> [usize; 2] {
        [self.dim_a, self.dim_b]
    }

    pub fn output_dims(&self) -> [usize; 2] {
        [self.out_a, self.out_b]
    }

    pub fn node(&self, h: &[usize]) -> Option<&Instrument<R>> {
        self.nodes.get(h)
    }

    pub fn leaf(&self, h: &[usize]) -> Option<&Leaf<R>> {
        self.leaves.get(h)
    }

    /// Full histories in lexicographic order; their index is the value of
    /// the message register.
    pub fn histories(&self) -> Vec<History> {
        self.leaves.keys().cloned().collect()
    }

    /// No rounds, identity leaves.
    pub fn identity(dim_a: usize, dim_b: usize) -> Self {
        let mut leaves = BTreeMap::new();
        leaves.insert(
            vec![],
            Leaf {
                alice: vec![CMatrix::identity(dim_a)],
                bob: vec![CMatrix::identity(dim_b)],
            },
        );
        Self::new(0, [dim_a, dim_b], [dim_a, dim_b], BTreeMap::new(), leaves)
            .expect("identity tree is valid")
    }

    /// Alice measures her input in the computational basis and announces
    /// it; Bob stays silent, and in the end prepares the announced symbol.
    pub fn announce_and_copy(dim_a: usize, dim_b: usize) -> Self {
        let mut nodes = BTreeMap::new();
        nodes.insert(vec![], Instrument::computational(dim_a));
        let mut leaves = BTreeMap::new();
        for i in 0..dim_a {
            nodes.insert(vec![i], Instrument::trivial(dim_b));
            let prep = (0..dim_b)
                .map(|j| {
                    CMatrix::from_fn(dim_a, dim_b, |a, b| {
                        cr(if a == i && b == j { R::one() } else { R::zero() })
                    })
                })
                .collect();
            leaves.insert(
                vec![i, 0],
                Leaf {
                    alice: vec![CMatrix::identity(dim_a)],
                    bob: prep,
                },
            );
        }
        Self::new(2, [dim_a, dim_b], [dim_a, dim_a], nodes, leaves)
            .expect("announce tree is valid")
    }

    pub fn to_file(&self) -> TreeFile {
        TreeFile {
            rounds: self.rounds,
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            out_a: self.out_a,
            out_b: self.out_b,
            nodes: self
                .nodes
                .iter()
                .map(|(h, n)| {
                    (
                        history_key(h),
                        n.outcomes
                            .iter()
                            .map(|ks| ks.iter().map(MatFile::from_matrix).collect())
                            .collect(),
                    )
                })
                .collect(),
            leaves: self
                .leaves
                .iter()
                .map(|(h, l)| {
                    (
                        history_key(h),
                        LeafFile {
                            a: l.alice.iter().map(MatFile::from_matrix).collect(),
                            b: l.bob.iter().map(MatFile::from_matrix).collect(),
                        },
                    )
                })
                .collect(),
        }
    }
}

pub fn history_key(h: &[usize]) -> String {
    h.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_history(s: &str) -> Result<History> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidTree(format!("bad history key {s:?}")))
        })
        .collect()
}

/// Matrix as `{"re": [[...]], "im": [[...]]}`; `im` may be omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatFile {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatFile {
    pub fn from_matrix<R: Real>(m: &CMatrix<R>) -> Self {
        let re = (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| m[(i, j)].re.as_f64()).collect())
            .collect();
        let im: Vec<Vec<f64>> = (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| m[(i, j)].im.as_f64()).collect())
            .collect();
        let has_im = im.iter().flatten().any(|&v| v != 0.0);
        Self {
            re,
            im: has_im.then_some(im),
        }
    }

    pub fn to_matrix<R: Real>(&self) -> Result<CMatrix<R>> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 || self.re.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged or empty matrix".into()));
        }
        if let Some(im) = &self.im {
            if im.len() != rows || im.iter().any(|r| r.len() != cols) {
                return Err(Error::DimensionMismatch("re/im shapes differ".into()));
            }
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |m| m[i][j]);
            Complex::new(R::lit(self.re[i][j]), R::lit(im))
        }))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafFile {
    pub a: Vec<MatFile>,
    pub b: Vec<MatFile>,
}

/// JSON form; history keys are comma-separated outcomes, `""` is the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeFile {
    pub rounds: usize,
    pub dim_a: usize,
    pub dim_b: usize,
    pub out_a: usize,
    pub out_b: usize,
    #[serde(default)]
    pub nodes: BTreeMap<String, Vec<Vec<MatFile>>>,
    pub leaves: BTreeMap<String, LeafFile>,
}

impl TreeFile {
    pub fn to_tree<R: Real>(&self) -> Result<InstrumentTree<R>> {
        let mats = |v: &[MatFile]| -> Result<Vec<CMatrix<R>>> {
            v.iter().map(|m| m.to_matrix()).collect()
        };
        let mut nodes = BTreeMap::new();
        for (k, outs) in &self.nodes {
            let outcomes = outs.iter().map(|ks| mats(ks)).collect::<Result<_>>()?;
            nodes.insert(parse_history(k)?, Instrument { outcomes });
        }
        let mut leaves = BTreeMap::new();
        for (k, l) in &self.leaves {
            leaves.insert(
                parse_history(k)?,
                Leaf {
                    alice: mats(&l.a)?,
                    bob: mats(&l.b)?,
                },
            );
        }
        InstrumentTree::new(
            self.rounds,
            [self.dim_a, self.dim_b],
            [self.out_a, self.out_b],
            nodes,
            leaves,
        )
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Kraus operators of `count` maps from `in_dim` to `out_dim`, cut from the
/// row blocks of one random isometry, so they sum to the identity exactly.
fn random_kraus_blocks<R: Real, G: Rng + ?Sized>(
    in_dim: usize,
    out_dim: usize,
    count: usize,
    rng: &mut G,
) -> Vec<CMatrix<R>> {
    // enough blocks for the isometry to exist
    let count = count.max(in_dim.div_ceil(out_dim));
    let v: CMatrix<R> = random_isometry(out_dim * count, in_dim, rng);
    (0..count)
        .map(|b| CMatrix::from_fn(out_dim, in_dim, |i, j| v[(b * out_dim + i, j)]))
        .collect()
}

/// Shape of random trees.
#[derive(Debug, Clone, Copy)]
pub struct TreeShape {
    pub rounds: usize,
    pub dims: [usize; 2],
    pub outs: [usize; 2],
    pub max_outcomes: usize,
    pub max_kraus: usize,
}

pub fn random_tree<R: Real, G: Rng + ?Sized>(shape: &TreeShape, rng: &mut G) -> InstrumentTree<R> {
    let [dim_a, dim_b] = shape.dims;
    let [out_a, out_b] = shape.outs;
    let mut nodes = BTreeMap::new();
    let mut frontier: Vec<History> = vec![vec![]];
    for round in 1..=shape.rounds {
        let dim = match speaker(round) {
            Party::Alice => dim_a,
            Party::Bob => dim_b,
        };
        let mut next = Vec::new();
        for h in frontier {
            let m = rng.gen_range(1..=shape.max_outcomes.max(1));
            let ks: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=shape.max_kraus.max(1))).collect();
            let mut all = random_kraus_blocks::<R, _>(dim, dim, ks.iter().sum(), rng).into_iter();
            let outcomes = ks.iter().map(|&k| all.by_ref().take(k).collect()).collect();
            nodes.insert(h.clone(), Instrument { outcomes });
            for i in 0..m {
                let mut c = h.clone();
                c.push(i);
                next.push(c);
            }
        }
        frontier = next;
    }
    let mut leaves = BTreeMap::new();
    for h in frontier {
        let ka = rng.gen_range(1..=shape.max_kraus.max(1));
        let kb = rng.gen_range(1..=shape.max_kraus.max(1));
        leaves.insert(
            h,
            Leaf {
                alice: random_kraus_blocks(dim_a, out_a, ka, rng),
                bob: random_kraus_blocks(dim_b, out_b, kb, rng),
            },
        );
    }
    InstrumentTree::new(shape.rounds, shape.dims, shape.outs, nodes, leaves)
        .expect("random tree is valid by construction")
}

fn basis_projector<R: Real>(dim: usize, i: usize) -> CMatrix<R> {
    CMatrix::from_fn(dim, dim, |a, b| {
        cr(if a == i && b == i { R::one() } else { R::zero() })
    })
}

/// One party's unnormalized operator after its own maps along every
/// prefix of every history, starting from `|s><s|`.
fn party_prefix_ops<R: Real>(
    tree: &InstrumentTree<R>,
    party: Party,
    s: usize,
) -> BTreeMap<History, CMatrix<R>> {
    let dim = match party {
        Party::Alice => tree.dim_a,
        Party::Bob => tree.dim_b,
    };
    let mut out = BTreeMap::new();
    out.insert(vec![], basis_projector(dim, s));
    let mut frontier: Vec<History> = vec![vec![]];
    for round in 1..=tree.rounds {
        let mut next = Vec::new();
        for h in frontier {
            let node = &tree.nodes[&h];
            let cur = out[&h].clone();
            for (i, ks) in node.outcomes.iter().enumerate() {
                let mut c = h.clone();
                c.push(i);
                let op = if speaker(round) == party {
                    apply_kraus(ks, &cur)
                } else {
                    cur.clone()
                };
                out.insert(c.clone(), op);
                next.push(c);
            }
        }
        frontier = next;
    }
    out
}

fn leaf_output<R: Real>(
    tree: &InstrumentTree<R>,
    party: Party,
    h: &[usize],
    op: &CMatrix<R>,
) -> CMatrix<R> {
    let leaf = &tree.leaves[h];
    match party {
        Party::Alice => apply_kraus(&leaf.alice, op),
        Party::Bob => apply_kraus(&leaf.bob, op),
    }
}

fn check_inputs<R: Real>(
    tree: &InstrumentTree<R>,
    d: &Dist3<R>,
    n: usize,
    caps: &SimCaps,
) -> Result<Dist3<R>> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let dn = d.product_power(n, DEFAULT_PRODUCT_CAP.max(caps.branches))?;
    let [dx, dy, dz] = dn.dims();
    if [dx, dy] != [tree.dim_a, tree.dim_b] {
        return Err(Error::DimensionMismatch(format!(
            "tree acts on {}x{}, source has {dx}x{dy} after {n} copies",
            tree.dim_a, tree.dim_b
        )));
    }
    let m = tree.leaves.len();
    let branches = dx * dy * dz * m;
    if branches > caps.branches {
        return Err(Error::CapExceeded {
            what: "protocol branches",
            requested: branches,
            cap: caps.branches,
        });
    }
    let dense = tree.out_a * tree.out_b * dz * m;
    if dense > caps.dense {
        return Err(Error::CapExceeded {
            what: "output dimension",
            requested: dense,
            cap: caps.dense,
        });
    }
    Ok(dn)
}

/// Runs the tree on `rho_ccc^{(x)n}`; the result lives on
/// `[A', B', E^n, M]` with `M` the index of the full history.
pub fn simulate_quantum<R: Real>(
    tree: &InstrumentTree<R>,
    d: &Dist3<R>,
    n: usize,
    caps: &SimCaps,
) -> Result<QState<R>> {
    let dn = check_inputs(tree, d, n, caps)?;
    let [dx, dy, dz] = dn.dims();
    let hist = tree.histories();
    let m = hist.len();
    let (oa, ob) = (tree.out_a, tree.out_b);
    let dim = oa * ob * dz * m;
    let finals = |party: Party, s: usize| -> Vec<CMatrix<R>> {
        let ops = party_prefix_ops(tree, party, s);
        hist.iter().map(|h| leaf_output(tree, party, h, &ops[h])).collect()
    };
    let alice: Vec<Vec<CMatrix<R>>> = (0..dx).map(|x| finals(Party::Alice, x)).collect();
    let bob: Vec<Vec<CMatrix<R>>> = (0..dy).map(|y| finals(Party::Bob, y)).collect();
    let mut rho = CMatrix::zeros(dim, dim);
    // index ((a * ob + b) * dz + z) * m + h
    for (x, y, z, p) in dn.support() {
        for hi in 0..m {
            let ka = &alice[x][hi];
            let kb = &bob[y][hi];
            for a in 0..oa {
                for a2 in 0..oa {
                    let va = ka[(a, a2)];
                    if va.norm_sqr() == R::zero() {
                        continue;
                    }
                    for b in 0..ob {
                        for b2 in 0..ob {
                            let i = ((a * ob + b) * dz + z) * m + hi;
                            let j = ((a2 * ob + b2) * dz + z) * m + hi;
                            rho[(i, j)] = rho[(i, j)] + va * kb[(b, b2)] * p;
                        }
                    }
                }
            }
        }
    }
    Ok(QState::new_unchecked(vec![oa, ob, dz, m], rho))
}

/// Dephases `A'` and `B'` in the computational basis.
pub fn dephase_output<R: Real>(s: &QState<R>) -> Result<QState<R>> {
    s.dephase(0)?.dephase(1)
}

/// Message kernels `Pr[i_k | i_<k, own symbol]` and final local channels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalProtocol<R> {
    pub rounds: usize,
    pub dims: [usize; 2],
    pub outs: [usize; 2],
    /// Prefix (length `k - 1`) to rows indexed by the speaker's symbol.
    pub kernels: BTreeMap<String, Vec<Vec<R>>>,
    /// Full history to rows `Pr[x' | h, x]`.
    pub final_a: BTreeMap<String, Vec<Vec<R>>>,
    pub final_b: BTreeMap<String, Vec<Vec<R>>>,
    #[serde(skip)]
    histories: Vec<History>,
}

impl<R: Real> ClassicalProtocol<R> {
    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    /// Largest deviation of any kernel row sum from one.
    pub fn stochasticity_defect(&self) -> R {
        self.kernels
            .values()
            .chain(self.final_a.values())
            .chain(self.final_b.values())
            .flatten()
            .map(|row| (row.iter().copied().sum::<R>() - R::one()).abs())
            .fold(R::zero(), R::max)
    }

    pub fn kernel(&self, prefix: &[usize]) -> Option<&Vec<Vec<R>>> {
        self.kernels.get(&history_key(prefix))
    }
}

fn ratio_row<R: Real>(num: Vec<R>, den: R) -> Vec<R> {
    let clip = R::lit(R::EIG_CLIP);
    let k = num.len();
    if den <= clip {
        // unreachable conditioning event
        return vec![R::one() / R::from_usize_lossy(k); k];
    }
    num.into_iter().map(|v| (v / den).max(R::zero())).collect()
}

/// Classical protocol with the same dephased output on incoherent inputs.
pub fn dequantize<R: Real>(tree: &InstrumentTree<R>) -> ClassicalProtocol<R> {
    let ops_a: Vec<_> = (0..tree.dim_a)
        .map(|x| party_prefix_ops(tree, Party::Alice, x))
        .collect();
    let ops_b: Vec<_> = (0..tree.dim_b)
        .map(|y| party_prefix_ops(tree, Party::Bob, y))
        .collect();
    let mut kernels = BTreeMap::new();
    for (h, node) in &tree.nodes {
        let round = h.len() + 1;
        let ops = match speaker(round) {
            Party::Alice => &ops_a,
            Party::Bob => &ops_b,
        };
        let rows = ops
            .iter()
            .map(|o| {
                let den = o[h].trace().re;
                let num = (0..node.num_outcomes())
                    .map(|i| {
                        let mut c = h.clone();
                        c.push(i);
                        o[&c].trace().re
                    })
                    .collect();
                ratio_row(num, den)
            })
            .collect();
        kernels.insert(history_key(h), rows);
    }
    let finals = |party: Party, ops: &[BTreeMap<History, CMatrix<R>>]| {
        tree.leaves
            .keys()
            .map(|h| {
                let rows = ops
                    .iter()
                    .map(|o| {
                        let out = leaf_output(tree, party, h, &o[h]);
                        let num = (0..out.rows()).map(|i| out[(i, i)].re).collect();
                        ratio_row(num, o[h].trace().re)
                    })
                    .collect();
                (history_key(h), rows)
            })
            .collect::<BTreeMap<_, _>>()
    };
    ClassicalProtocol {
        rounds: tree.rounds,
        dims: [tree.dim_a, tree.dim_b],
        outs: [tree.out_a, tree.out_b],
        final_a: finals(Party::Alice, &ops_a),
        final_b: finals(Party::Bob, &ops_b),
        kernels,
        histories: tree.histories(),
    }
}

/// Forward chaining of the classical protocol over every input triple and
/// history; diagonal state on `[A', B', E^n, M]`.
pub fn simulate_classical<R: Real>(
    proto: &ClassicalProtocol<R>,
    d: &Dist3<R>,
    n: usize,
    caps: &SimCaps,
) -> Result<QState<R>> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let dn = d.product_power(n, DEFAULT_PRODUCT_CAP.max(caps.branches))?;
    let [dx, dy, dz] = dn.dims();
    if [dx, dy] != proto.dims {
        return Err(Error::DimensionMismatch("protocol input dims".into()));
    }
    let m = proto.histories.len();
    let [oa, ob] = proto.outs;
    let dim = oa * ob * dz * m;
    if dim > caps.dense || dx * dy * dz * m > caps.branches {
        return Err(Error::CapExceeded {
            what: "output dimension",
            requested: dim,
            cap: caps.dense,
        });
    }
    let mut diag = vec![R::zero(); dim];
    for (x, y, z, p) in dn.support() {
        for (hi, h) in proto.histories.iter().enumerate() {
            let mut w = p;
            for k in 0..h.len() {
                let rows = &proto.kernels[&history_key(&h[..k])];
                let s = match speaker(k + 1) {
                    Party::Alice => x,
                    Party::Bob => y,
                };
                w = w * rows[s][h[k]];
                if w == R::zero() {
                    break;
                }
            }
            if w == R::zero() {
                continue;
            }
            let key = history_key(h);
            let fa = &proto.final_a[&key][x];
            let fb = &proto.final_b[&key][y];
            for a in 0..oa {
                for b in 0..ob {
                    let idx = ((a * ob + b) * dz + z) * m + hi;
                    diag[idx] = diag[idx] + w * fa[a] * fb[b];
                }
            }
        }
    }
    Ok(QState::new_unchecked(vec![oa, ob, dz, m], CMatrix::diag(&diag)))
}

/// Trace distance, using the diagonal shortcut when both inputs are
/// diagonal.
fn distance<R: Real>(a: &QState<R>, b: &QState<R>) -> Result<R> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch("output dims differ".into()));
    }
    if a.is_diagonal(R::zero()) && b.is_diagonal(R::zero()) {
        let s: R = a
            .diagonal_entries()
            .iter()
            .zip(b.diagonal_entries())
            .map(|(x, y)| (*x - y).abs())
            .sum();
        return Ok(s * R::lit(0.5));
    }
    trace_distance(a, b)
}

/// `|| dephase(quantum run) - classical run ||_1 / 2`.
pub fn verify_equivalence<R: Real>(
    tree: &InstrumentTree<R>,
    d: &Dist3<R>,
    n: usize,
    caps: &SimCaps,
) -> Result<R> {
    let q = dephase_output(&simulate_quantum(tree, d, n, caps)?)?;
    let c = simulate_classical(&dequantize(tree), d, n, caps)?;
    distance(&q, &c)
}

/// Law of the full history under a state on `[A', B', E, M]`.
pub fn history_marginal<R: Real>(s: &QState<R>) -> Result<Vec<R>> {
    Ok(s.partial_trace(&[3])?.diagonal_entries())
}
