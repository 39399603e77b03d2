//! Dense probability distributions over finite alphabets and the Shannon
//! quantities computed from them. Entropies are in bits, `0 log 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::scalar::{plogp, Real};

/// Default cap on the number of joint states a product power may produce.
pub const DEFAULT_PRODUCT_CAP: usize = 4096;

/// One of the three parties' variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    X,
    Y,
    Z,
}

impl Var {
    #[inline]
    pub fn axis(self) -> usize {
        match self {
            Var::X => 0,
            Var::Y => 1,
            Var::Z => 2,
        }
    }
}

/// Checks non-negativity, finiteness and normalization of a flat array.
pub fn validate<R: Real>(dims: &[usize], p: &[R], tol: R) -> std::result::Result<(), Violation> {
    if dims.contains(&0) {
        return Err(Violation::EmptyAlphabet(dims.to_vec()));
    }
    let expected: usize = dims.iter().product();
    if expected != p.len() {
        return Err(Violation::Shape {
            expected,
            found: p.len(),
        });
    }
    for (index, &v) in p.iter().enumerate() {
        if !v.is_finite() {
            return Err(Violation::NonFinite { index });
        }
        if v < R::zero() {
            return Err(Violation::NegativeEntry {
                index,
                value: v.as_f64(),
            });
        }
    }
    let sum: R = p.iter().copied().sum();
    let deviation = (sum - R::one()).abs();
    if deviation > tol {
        return Err(Violation::Sum {
            sum: sum.as_f64(),
            deviation: deviation.as_f64(),
            tol: tol.as_f64(),
        });
    }
    Ok(())
}

/// Shannon entropy of a probability vector.
pub fn entropy<R: Real>(p: &[R]) -> R {
    p.iter().copied().map(plogp).sum()
}

/// `h(x) = -x log x - (1-x) log(1-x)`.
pub fn binary_entropy<R: Real>(x: R) -> Result<R> {
    if !(x >= R::zero() && x <= R::one()) {
        return Err(Error::NotAProbability(x.as_f64()));
    }
    Ok(plogp(x) + plogp(R::one() - x))
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Dense joint pmf over any number of variables, row-major.
///
/// This is the workhorse behind every information quantity: callers that
/// need a derived variable (a block label, a public message) append it with
/// [`JointPmf::extend`] and then ask for the entropy of any variable subset.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf<R> {
    dims: Vec<usize>,
    p: Vec<R>,
}

impl<R: Real> JointPmf<R> {
    pub fn new(dims: Vec<usize>, p: Vec<R>) -> Result<Self> {
        validate(&dims, &p, R::lit(R::VALIDATION_TOL)).map_err(Error::InvalidDistribution)?;
        Ok(Self { dims, p })
    }

    pub(crate) fn from_parts(dims: Vec<usize>, p: Vec<R>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), p.len());
        Self { dims, p }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[R] {
        &self.p
    }

    pub fn num_vars(&self) -> usize {
        self.dims.len()
    }

    /// Decodes a flat index into per-variable symbols.
    pub fn decode(&self, mut flat: usize, out: &mut [usize]) {
        for i in (0..self.dims.len()).rev() {
            out[i] = flat % self.dims[i];
            flat /= self.dims[i];
        }
    }

    /// Sums out every variable not listed in `keep`; the result's variables
    /// appear in the order given.
    pub fn marginal(&self, keep: &[usize]) -> Result<JointPmf<R>> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        for &k in keep {
            if k >= self.dims.len() {
                return Err(Error::OutOfRange {
                    index: k,
                    size: self.dims.len(),
                });
            }
        }
        Ok(self.marginal_unchecked(keep))
    }

    fn marginal_unchecked(&self, keep: &[usize]) -> JointPmf<R> {
        let out_dims: Vec<usize> = keep.iter().map(|&k| self.dims[k]).collect();
        let out_strides = strides(&out_dims);
        let mut out = vec![R::zero(); out_dims.iter().product()];
        let mut sym = vec![0usize; self.dims.len()];
        for (flat, &v) in self.p.iter().enumerate() {
            if v == R::zero() {
                continue;
            }
            self.decode(flat, &mut sym);
            let o: usize = keep
                .iter()
                .zip(&out_strides)
                .map(|(&k, &s)| sym[k] * s)
                .sum();
            out[o] = out[o] + v;
        }
        JointPmf::from_parts(out_dims, out)
    }

    pub fn entropy(&self) -> R {
        entropy(&self.p)
    }

    /// `H(vars)`; the empty set has zero entropy.
    pub fn entropy_of(&self, vars: &[usize]) -> R {
        if vars.is_empty() {
            return R::zero();
        }
        let mut v = vars.to_vec();
        v.sort_unstable();
        v.dedup();
        self.marginal_unchecked(&v).entropy()
    }

    /// `H(a | given)`.
    pub fn cond_entropy(&self, a: &[usize], given: &[usize]) -> R {
        let joint: Vec<usize> = a.iter().chain(given).copied().collect();
        (self.entropy_of(&joint) - self.entropy_of(given)).max(R::zero())
    }

    pub fn mutual_info(&self, a: &[usize], b: &[usize]) -> R {
        self.cond_mutual_info(a, b, &[])
    }

    /// `I(A:B|C) = H(AC) + H(BC) - H(ABC) - H(C)`, clamped at zero.
    pub fn cond_mutual_info(&self, a: &[usize], b: &[usize], c: &[usize]) -> R {
        let ac: Vec<usize> = a.iter().chain(c).copied().collect();
        let bc: Vec<usize> = b.iter().chain(c).copied().collect();
        let abc: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        let v = self.entropy_of(&ac) + self.entropy_of(&bc)
            - self.entropy_of(&abc)
            - self.entropy_of(c);
        v.max(R::zero())
    }

    /// Appends a variable that is a deterministic function of the existing
    /// ones. `label` is only consulted on support points and must return a
    /// value below `label_dim` there.
    pub fn extend<F>(&self, label_dim: usize, mut label: F) -> JointPmf<R>
    where
        F: FnMut(&[usize]) -> usize,
    {
        let mut dims = self.dims.clone();
        dims.push(label_dim);
        let mut out = vec![R::zero(); self.p.len() * label_dim];
        let mut sym = vec![0usize; self.dims.len()];
        for (flat, &v) in self.p.iter().enumerate() {
            if v == R::zero() {
                continue;
            }
            self.decode(flat, &mut sym);
            let l = label(&sym);
            assert!(l < label_dim, "derived label {l} >= {label_dim}");
            out[flat * label_dim + l] = v;
        }
        JointPmf::from_parts(dims, out)
    }

    pub fn into_dist2(self) -> Result<Dist2<R>> {
        if self.dims.len() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "expected 2 variables, found {}",
                self.dims.len()
            )));
        }
        Ok(Dist2 {
            dims: [self.dims[0], self.dims[1]],
            p: self.p,
        })
    }
}

/// Bipartite pmf `p(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist2<R> {
    dims: [usize; 2],
    p: Vec<R>,
}

impl<R: Real> Dist2<R> {
    pub fn new(dims: [usize; 2], p: Vec<R>) -> Result<Self> {
        validate(&dims, &p, R::lit(R::VALIDATION_TOL)).map_err(Error::InvalidDistribution)?;
        Ok(Self { dims, p })
    }

    pub fn from_fn(dims: [usize; 2], mut f: impl FnMut(usize, usize) -> R) -> Result<Self> {
        let mut p = Vec::with_capacity(dims[0] * dims[1]);
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                p.push(f(a, b));
            }
        }
        Self::new(dims, p)
    }

    pub(crate) fn from_parts(dims: [usize; 2], p: Vec<R>) -> Self {
        Self { dims, p }
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn probs(&self) -> &[R] {
        &self.p
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> R {
        self.p[a * self.dims[1] + b]
    }

    pub fn marginal_a(&self) -> Vec<R> {
        (0..self.dims[0])
            .map(|a| (0..self.dims[1]).map(|b| self.get(a, b)).sum())
            .collect()
    }

    pub fn marginal_b(&self) -> Vec<R> {
        (0..self.dims[1])
            .map(|b| (0..self.dims[0]).map(|a| self.get(a, b)).sum())
            .collect()
    }

    pub fn entropy(&self) -> R {
        entropy(&self.p)
    }

    pub fn mutual_info(&self) -> R {
        (entropy(&self.marginal_a()) + entropy(&self.marginal_b()) - self.entropy()).max(R::zero())
    }

    pub fn joint(&self) -> JointPmf<R> {
        JointPmf::from_parts(self.dims.to_vec(), self.p.clone())
    }
}

/// Row-stochastic channel `k[z][zbar] = Pr[zbar | z]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel<R> {
    in_dim: usize,
    out_dim: usize,
    k: Vec<R>,
}

impl<R: Real> Channel<R> {
    pub fn new(in_dim: usize, out_dim: usize, k: Vec<R>) -> Result<Self> {
        Self::new_with_tol(in_dim, out_dim, k, R::lit(R::VALIDATION_TOL))
    }

    pub fn new_with_tol(in_dim: usize, out_dim: usize, k: Vec<R>, tol: R) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidChannel(Violation::EmptyAlphabet(vec![
                in_dim, out_dim,
            ])));
        }
        if k.len() != in_dim * out_dim {
            return Err(Error::InvalidChannel(Violation::Shape {
                expected: in_dim * out_dim,
                found: k.len(),
            }));
        }
        for row in 0..in_dim {
            let r = &k[row * out_dim..(row + 1) * out_dim];
            validate(&[out_dim], r, tol).map_err(|v| {
                Error::InvalidChannel(match v {
                    Violation::Sum { sum, .. } => Violation::RowSum {
                        row,
                        sum,
                        tol: tol.as_f64(),
                    },
                    Violation::NegativeEntry { index, value } => Violation::NegativeEntry {
                        index: row * out_dim + index,
                        value,
                    },
                    other => other,
                })
            })?;
        }
        Ok(Self { in_dim, out_dim, k })
    }

    pub fn identity(n: usize) -> Self {
        Self::deterministic(&(0..n).collect::<Vec<_>>(), n).expect("identity map is valid")
    }

    /// Every input goes to `symbol`.
    pub fn constant(in_dim: usize, out_dim: usize, symbol: usize) -> Result<Self> {
        Self::deterministic(&vec![symbol; in_dim], out_dim)
    }

    pub fn deterministic(map: &[usize], out_dim: usize) -> Result<Self> {
        let mut k = vec![R::zero(); map.len() * out_dim];
        for (z, &zb) in map.iter().enumerate() {
            if zb >= out_dim {
                return Err(Error::OutOfRange {
                    index: zb,
                    size: out_dim,
                });
            }
            k[z * out_dim + zb] = R::one();
        }
        Self::new(map.len(), out_dim, k)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn get(&self, z: usize, zbar: usize) -> R {
        self.k[z * self.out_dim + zbar]
    }

    /// The function `z -> zbar` if every row is a point mass.
    pub fn as_function(&self) -> Option<Vec<usize>> {
        (0..self.in_dim)
            .map(|z| (0..self.out_dim).find(|&zb| self.get(z, zb) == R::one()))
            .collect()
    }
}

/// Tripartite pmf `p(x, y, z)`, flattened with `x` major and `z` minor.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist3<R> {
    dims: [usize; 3],
    p: Vec<R>,
}

impl<R: Real> Dist3<R> {
    pub fn new(dims: [usize; 3], p: Vec<R>) -> Result<Self> {
        Self::new_with_tol(dims, p, R::lit(R::VALIDATION_TOL))
    }

    pub fn new_with_tol(dims: [usize; 3], p: Vec<R>, tol: R) -> Result<Self> {
        validate(&dims, &p, tol).map_err(Error::InvalidDistribution)?;
        Ok(Self { dims, p })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> R) -> Result<Self> {
        let mut p = Vec::with_capacity(dims.iter().product());
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                for z in 0..dims[2] {
                    p.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, p)
    }

    /// Builds from `(x, y, z, p)` entries; unlisted entries are zero and
    /// repeated entries accumulate.
    pub fn from_sparse(dims: [usize; 3], entries: &[(usize, usize, usize, R)]) -> Result<Self> {
        let mut p = vec![R::zero(); dims.iter().product()];
        for &(x, y, z, v) in entries {
            for (i, s) in [x, y, z].into_iter().enumerate() {
                if s >= dims[i] {
                    return Err(Error::OutOfRange {
                        index: s,
                        size: dims[i],
                    });
                }
            }
            let i = (x * dims[1] + y) * dims[2] + z;
            p[i] = p[i] + v;
        }
        Self::new(dims, p)
    }

    /// Unvalidated sparse constructor; repeated points accumulate.
    pub(crate) fn from_parts_sparse(dims: [usize; 3], pts: &[(usize, usize, usize, R)]) -> Self {
        let mut p = vec![R::zero(); dims.iter().product()];
        for &(x, y, z, v) in pts {
            let i = (x * dims[1] + y) * dims[2] + z;
            p[i] = p[i] + v;
        }
        Dist3::from_parts(dims, p)
    }

    pub(crate) fn from_parts(dims: [usize; 3], p: Vec<R>) -> Self {
        Self { dims, p }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn probs(&self) -> &[R] {
        &self.p
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> R {
        self.p[self.index(x, y, z)]
    }

    pub fn validate(&self, tol: R) -> std::result::Result<(), Violation> {
        validate(&self.dims, &self.p, tol)
    }

    /// Iterates over `(x, y, z, p)` with `p > 0`.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, usize, R)> + '_ {
        let [_, dy, dz] = self.dims;
        self.p.iter().enumerate().filter_map(move |(i, &v)| {
            (v > R::zero()).then_some((i / (dy * dz), (i / dz) % dy, i % dz, v))
        })
    }

    pub fn joint(&self) -> JointPmf<R> {
        JointPmf::from_parts(self.dims.to_vec(), self.p.clone())
    }

    pub fn marginal(&self, keep: &[Var]) -> Result<JointPmf<R>> {
        let axes: Vec<usize> = keep.iter().map(|v| v.axis()).collect();
        self.joint().marginal(&axes)
    }

    pub fn marginal_xy(&self) -> Dist2<R> {
        let [dx, dy, dz] = self.dims;
        let p = (0..dx * dy)
            .map(|i| self.p[i * dz..(i + 1) * dz].iter().copied().sum())
            .collect();
        Dist2::from_parts([dx, dy], p)
    }

    pub fn marginal_xz(&self) -> Dist2<R> {
        let [dx, dy, dz] = self.dims;
        let mut p = vec![R::zero(); dx * dz];
        for (x, _, z, v) in self.support() {
            p[x * dz + z] = p[x * dz + z] + v;
        }
        let _ = dy;
        Dist2::from_parts([dx, dz], p)
    }

    pub fn marginal_yz(&self) -> Dist2<R> {
        let [_, dy, dz] = self.dims;
        let mut p = vec![R::zero(); dy * dz];
        for (_, y, z, v) in self.support() {
            p[y * dz + z] = p[y * dz + z] + v;
        }
        Dist2::from_parts([dy, dz], p)
    }

    pub fn marginal_x(&self) -> Vec<R> {
        self.marginal_xy().marginal_a()
    }

    pub fn marginal_y(&self) -> Vec<R> {
        self.marginal_xy().marginal_b()
    }

    pub fn marginal_z(&self) -> Vec<R> {
        let mut pz = vec![R::zero(); self.dims[2]];
        for (_, _, z, v) in self.support() {
            pz[z] = pz[z] + v;
        }
        pz
    }

    /// `p(x, y | Z = z)`.
    pub fn conditional_xy_given_z(&self, z: usize) -> Result<Dist2<R>> {
        let [dx, dy, dz] = self.dims;
        if z >= dz {
            return Err(Error::OutOfRange { index: z, size: dz });
        }
        let pz = self.marginal_z()[z];
        if pz <= R::lit(R::SUPPORT_EPS) {
            return Err(Error::ZeroProbability(z));
        }
        let p = (0..dx * dy).map(|i| self.p[i * dz + z] / pz).collect();
        Ok(Dist2::from_parts([dx, dy], p))
    }

    pub fn entropy(&self) -> R {
        entropy(&self.p)
    }

    /// `I(A : B | C)` for any grouping of the three variables.
    pub fn cond_mutual_info(&self, a: &[Var], b: &[Var], c: &[Var]) -> R {
        let ax = |v: &[Var]| v.iter().map(|v| v.axis()).collect::<Vec<_>>();
        self.joint().cond_mutual_info(&ax(a), &ax(b), &ax(c))
    }

    /// `n` i.i.d. copies with the sequence of each party's symbols encoded
    /// as a base-`d` number, first copy most significant.
    pub fn product_power(&self, n: usize, cap: usize) -> Result<Dist3<R>> {
        if n == 0 {
            return Err(Error::Precondition("product power needs n >= 1".into()));
        }
        let base: usize = self.p.len();
        let mut total: usize = 1;
        for _ in 0..n {
            total = total
                .checked_mul(base)
                .filter(|&t| t <= cap)
                .ok_or(Error::CapExceeded {
                    what: "product-power joint states",
                    requested: base.saturating_pow(n as u32),
                    cap,
                })?;
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor(self);
        }
        Ok(acc)
    }

    /// Independent joint of `self` and `other`, each party holding the pair.
    pub fn tensor(&self, other: &Dist3<R>) -> Dist3<R> {
        let [ax, ay, az] = self.dims;
        let [bx, by, bz] = other.dims;
        let dims = [ax * bx, ay * by, az * bz];
        let mut p = vec![R::zero(); dims.iter().product()];
        for (x1, y1, z1, v1) in self.support() {
            for (x2, y2, z2, v2) in other.support() {
                let x = x1 * bx + x2;
                let y = y1 * by + y2;
                let z = z1 * bz + z2;
                p[(x * dims[1] + y) * dims[2] + z] = v1 * v2;
            }
        }
        Dist3::from_parts(dims, p)
    }

    /// `p(x, y, zbar) = sum_z p(x, y, z) k[z][zbar]`.
    pub fn apply_channel_z(&self, ch: &Channel<R>) -> Result<Dist3<R>> {
        let [dx, dy, dz] = self.dims;
        if ch.in_dim() != dz {
            return Err(Error::DimensionMismatch(format!(
                "channel input {} vs |Z| = {dz}",
                ch.in_dim()
            )));
        }
        let dzb = ch.out_dim();
        let mut p = vec![R::zero(); dx * dy * dzb];
        for (x, y, z, v) in self.support() {
            for zb in 0..dzb {
                let k = ch.get(z, zb);
                if k > R::zero() {
                    let i = (x * dy + y) * dzb + zb;
                    p[i] = p[i] + v * k;
                }
            }
        }
        Ok(Dist3::from_parts([dx, dy, dzb], p))
    }

    /// Relabels each alphabet: the mass at `(x, y, z)` moves to
    /// `(px[x], py[y], pz[z])`. Each map must be a permutation.
    pub fn permute(&self, px: &[usize], py: &[usize], pz: &[usize]) -> Result<Dist3<R>> {
        for (perm, &d) in [px, py, pz].into_iter().zip(&self.dims) {
            let mut seen = vec![false; d];
            if perm.len() != d {
                return Err(Error::DimensionMismatch("permutation length".into()));
            }
            for &i in perm {
                if i >= d || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Precondition("not a permutation".into()));
                }
            }
        }
        let mut p = vec![R::zero(); self.p.len()];
        for (x, y, z, v) in self.support() {
            let i = self.index(px[x], py[y], pz[z]);
            p[i] = v;
        }
        Ok(Dist3::from_parts(self.dims, p))
    }
}

/// On-disk distribution format: dense nested arrays or sparse entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistFile {
    Dense {
        dims: [usize; 3],
        p: Vec<Vec<Vec<f64>>>,
    },
    Sparse {
        dims: [usize; 3],
        entries: Vec<SparseEntry>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseEntry {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub p: f64,
}

impl DistFile {
    pub fn to_dist<R: Real>(&self) -> Result<Dist3<R>> {
        match self {
            DistFile::Dense { dims, p } => {
                let shape_err = || {
                    Error::InvalidDistribution(Violation::Shape {
                        expected: dims.iter().product(),
                        found: p.iter().flatten().flatten().count(),
                    })
                };
                if p.len() != dims[0]
                    || p.iter().any(|row| {
                        row.len() != dims[1] || row.iter().any(|c| c.len() != dims[2])
                    })
                {
                    return Err(shape_err());
                }
                let flat = p.iter().flatten().flatten().map(|&v| R::lit(v)).collect();
                Dist3::new(*dims, flat)
            }
            DistFile::Sparse { dims, entries } => {
                let e: Vec<_> = entries.iter().map(|e| (e.x, e.y, e.z, R::lit(e.p))).collect();
                Dist3::from_sparse(*dims, &e)
            }
        }
    }

    pub fn from_dist<R: Real>(d: &Dist3<R>) -> Self {
        let [dx, dy, _] = d.dims();
        let p = (0..dx)
            .map(|x| {
                (0..dy)
                    .map(|y| (0..d.dims()[2]).map(|z| d.get(x, y, z).as_f64()).collect())
                    .collect()
            })
            .collect();
        DistFile::Dense { dims: d.dims(), p }
    }
}

impl<R: Real> Dist3<R> {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: DistFile = serde_json::from_str(s)?;
        f.to_dist()
    }
}
