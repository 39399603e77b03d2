use num_complex::Complex;
use serde::{Deserialize, Serialize, Serializer};

use super::eig::{eigh, hermitian_eigs, DIM_CAP};
use super::matrix::{cr, kron_vec, norm, CMatrix, C};
use crate::error::{Error, Result};
use crate::scalar::{plogp, Real};

/// Row-major strides: the first subsystem is most significant.
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Full-index offset of every joint symbol of `subs`, taken in the order
/// listed (first listed is most significant).
pub(crate) fn offsets(dims: &[usize], subs: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &s in subs {
        let (d, stride) = (dims[s], st[s]);
        out = out
            .iter()
            .flat_map(|&o| (0..d).map(move |i| o + i * stride))
            .collect();
    }
    out
}

fn check_dims(dims: &[usize], n: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidState(format!("bad subsystem dims {dims:?}")));
    }
    let prod: usize = dims.iter().product();
    if prod != n {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} give {prod}, matrix has {n}"
        )));
    }
    if n > DIM_CAP {
        return Err(Error::CapExceeded {
            what: "state dimension",
            requested: n,
            cap: DIM_CAP,
        });
    }
    Ok(())
}

/// Validates a subsystem selection and returns the complement.
fn split_subsystems(nsub: usize, keep: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; nsub];
    for &k in keep {
        if k >= nsub {
            return Err(Error::OutOfRange { index: k, size: nsub });
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::Precondition(format!("subsystem {k} listed twice")));
        }
    }
    Ok((0..nsub).filter(|&k| !seen[k]).collect())
}

/// Entropy in bits of a spectrum, clipping round-off to `[0, 1]`.
pub fn entropy_of_spectrum<R: Real>(values: &[R]) -> R {
    let clip = R::lit(R::EIG_CLIP);
    values
        .iter()
        .map(|&v| if v < clip { R::zero() } else { plogp(v.min(R::one())) })
        .sum()
}

/// Density matrix on a tensor product of subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct QState<R> {
    dims: Vec<usize>,
    rho: CMatrix<R>,
}

impl<R: Real> QState<R> {
    pub fn new(dims: Vec<usize>, rho: CMatrix<R>) -> Result<Self> {
        Self::new_with_tol(dims, rho, R::lit(R::STATE_TOL))
    }

    pub fn new_with_tol(dims: Vec<usize>, rho: CMatrix<R>, tol: R) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::InvalidState("density matrix not square".into()));
        }
        check_dims(&dims, rho.rows())?;
        let defect = rho.hermiticity_defect();
        if !(defect <= tol) {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {})",
                defect.as_f64()
            )));
        }
        let tr = rho.trace().re;
        if !((tr - R::one()).abs() <= tol) {
            return Err(Error::InvalidState(format!("trace {}", tr.as_f64())));
        }
        let e = hermitian_eigs(&rho)?;
        let min = e.values.last().copied().unwrap_or(R::zero());
        if min < -tol {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {}",
                min.as_f64()
            )));
        }
        Ok(Self { dims, rho })
    }

    pub(crate) fn new_unchecked(dims: Vec<usize>, rho: CMatrix<R>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), rho.rows());
        Self { dims, rho }
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(dims: Vec<usize>, probs: &[R]) -> Result<Self> {
        check_dims(&dims, probs.len())?;
        if let Err(v) = crate::dist::validate(&[probs.len()], probs, R::lit(R::VALIDATION_TOL)) {
            return Err(Error::InvalidDistribution(v));
        }
        Ok(Self {
            dims,
            rho: CMatrix::diag(probs),
        })
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        Self::diagonal(dims, &vec![R::one() / R::from_usize_lossy(n); n])
    }

    pub fn from_pure(psi: &PureState<R>) -> Self {
        Self {
            dims: psi.dims.clone(),
            rho: CMatrix::outer(&psi.amp, &psi.amp),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.rho.rows()
    }

    pub fn rho(&self) -> &CMatrix<R> {
        &self.rho
    }

    pub fn into_matrix(self) -> CMatrix<R> {
        self.rho
    }

    pub fn diagonal_entries(&self) -> Vec<R> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }

    pub fn tensor(&self, o: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&o.dims);
        Self {
            dims,
            rho: self.rho.kron(&o.rho),
        }
    }

    /// Reduced state on `keep`, subsystems in the order listed.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        let traced = split_subsystems(self.dims.len(), keep)?;
        let ko = offsets(&self.dims, keep);
        let to = offsets(&self.dims, &traced);
        let n = ko.len();
        let rho = CMatrix::from_fn(n, n, |a, b| {
            to.iter().fold(cr(R::zero()), |acc, &t| {
                acc + self.rho[(ko[a] + t, ko[b] + t)]
            })
        });
        Ok(Self {
            dims: keep.iter().map(|&k| self.dims[k]).collect(),
            rho,
        })
    }

    /// Removes coherences between different basis states of `sub`.
    pub fn dephase(&self, sub: usize) -> Result<Self> {
        if sub >= self.dims.len() {
            return Err(Error::OutOfRange {
                index: sub,
                size: self.dims.len(),
            });
        }
        let st = strides(&self.dims)[sub];
        let d = self.dims[sub];
        let mut rho = self.rho.clone();
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                if (i / st) % d != (j / st) % d {
                    rho[(i, j)] = cr(R::zero());
                }
            }
        }
        Ok(Self {
            dims: self.dims.clone(),
            rho,
        })
    }

    pub fn dephase_all(&self) -> Self {
        let mut rho = CMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            rho[(i, i)] = cr(self.rho[(i, i)].re);
        }
        Self {
            dims: self.dims.clone(),
            rho,
        }
    }

    pub fn partial_transpose(&self, sub: usize) -> Result<CMatrix<R>> {
        if sub >= self.dims.len() {
            return Err(Error::OutOfRange {
                index: sub,
                size: self.dims.len(),
            });
        }
        let st = strides(&self.dims)[sub];
        let d = self.dims[sub];
        let n = self.dim();
        Ok(CMatrix::from_fn(n, n, |i, j| {
            let (si, sj) = ((i / st) % d, (j / st) % d);
            let i2 = i - si * st + sj * st;
            let j2 = j - sj * st + si * st;
            self.rho[(i2, j2)]
        }))
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &CMatrix<R>) -> Result<Self> {
        if u.rows() != self.dim() || u.cols() != self.dim() {
            return Err(Error::DimensionMismatch("unitary size".into()));
        }
        Ok(Self {
            dims: self.dims.clone(),
            rho: &(u * &self.rho) * &u.adjoint(),
        })
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<R> {
        eigh(&self.rho).values
    }

    pub fn entropy(&self) -> R {
        entropy_of_spectrum(&self.eigenvalues())
    }

    /// Entropy of the reduced state on `subs`; zero for the empty set.
    pub fn entropy_of(&self, subs: &[usize]) -> Result<R> {
        if subs.is_empty() {
            return Ok(R::zero());
        }
        Ok(self.partial_trace(subs)?.entropy())
    }

    pub fn is_diagonal(&self, tol: R) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.rho[(i, j)].norm() <= tol))
    }

    pub fn to_file(&self) -> StateFile {
        let n = self.dim();
        StateFile {
            dims: self.dims.clone(),
            re: (0..n)
                .map(|i| (0..n).map(|j| self.rho[(i, j)].re.as_f64()).collect())
                .collect(),
            im: (0..n)
                .map(|i| (0..n).map(|j| self.rho[(i, j)].im.as_f64()).collect())
                .collect(),
        }
    }
}

impl<R: Real> Serialize for QState<R> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

/// `S(rho)` in bits.
pub fn von_neumann_entropy<R: Real>(s: &QState<R>) -> R {
    s.entropy()
}

/// `||a - b||_1 / 2`.
pub fn trace_distance<R: Real>(a: &QState<R>, b: &QState<R>) -> Result<R> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    let diff = &a.rho - &b.rho;
    let e = eigh(&diff);
    let s: R = e.values.iter().map(|v| v.abs()).sum();
    Ok(s * R::lit(0.5))
}

/// `I(A:B|E) = S(AE) + S(BE) - S(ABE) - S(E)`.
pub fn cond_mutual_info_q<R: Real>(
    s: &QState<R>,
    a: &[usize],
    b: &[usize],
    e: &[usize],
) -> Result<R> {
    let all: Vec<usize> = a.iter().chain(b).chain(e).copied().collect();
    split_subsystems(s.dims.len(), &all)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySelection);
    }
    let ae: Vec<usize> = a.iter().chain(e).copied().collect();
    let be: Vec<usize> = b.iter().chain(e).copied().collect();
    Ok(s.entropy_of(&ae)? + s.entropy_of(&be)? - s.entropy_of(&all)? - s.entropy_of(e)?)
}

/// `I(A:B) = S(A) + S(B) - S(AB)`.
pub fn mutual_info_q<R: Real>(s: &QState<R>, a: &[usize], b: &[usize]) -> Result<R> {
    cond_mutual_info_q(s, a, b, &[])
}

/// `S(rho || sigma)` in bits; infinite when `supp rho` is not inside
/// `supp sigma`.
pub fn relative_entropy<R: Real>(rho: &QState<R>, sigma: &QState<R>) -> Result<R> {
    if rho.dims != sigma.dims {
        return Err(Error::DimensionMismatch("relative entropy dims".into()));
    }
    let es = eigh(&sigma.rho);
    let clip = R::lit(R::EIG_CLIP);
    let n = rho.dim();
    // tr rho log sigma = sum_k <v_k|rho|v_k> log lambda_k
    let mut cross = R::zero();
    for k in 0..n {
        let v = es.vector(k);
        let w = rho.rho.mat_vec(&v);
        let overlap = super::matrix::inner(&v, &w).re;
        if es.values[k] <= clip {
            if overlap > clip {
                return Ok(R::infinity());
            }
            continue;
        }
        cross = cross + overlap * es.values[k].log2();
    }
    Ok((-rho.entropy() - cross).max(R::zero()))
}

/// Unit vector on a tensor product of subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<R> {
    dims: Vec<usize>,
    amp: Vec<C<R>>,
}

impl<R: Real> PureState<R> {
    pub fn new(dims: Vec<usize>, amp: Vec<C<R>>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) || dims.iter().product::<usize>() != amp.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} vs {} amplitudes",
                amp.len()
            )));
        }
        let nrm = norm(&amp);
        if !((nrm - R::one()).abs() <= R::lit(R::VALIDATION_TOL) * R::lit(10.0)) {
            return Err(Error::InvalidState(format!("norm {}", nrm.as_f64())));
        }
        Ok(Self { dims, amp })
    }

    pub(crate) fn new_unchecked(dims: Vec<usize>, amp: Vec<C<R>>) -> Self {
        Self { dims, amp }
    }

    /// Rescales `amp` to unit norm.
    pub fn normalized(dims: Vec<usize>, amp: Vec<C<R>>) -> Result<Self> {
        let nrm = norm(&amp);
        if nrm <= R::zero() {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::new(dims, amp.into_iter().map(|z| z / nrm).collect())
    }

    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let n: usize = dims.iter().product();
        if index >= n {
            return Err(Error::OutOfRange { index, size: n });
        }
        let mut amp = vec![cr(R::zero()); n];
        amp[index] = cr(R::one());
        Self::new(dims, amp)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amp(&self) -> &[C<R>] {
        &self.amp
    }

    pub fn tensor(&self, o: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&o.dims);
        Self {
            dims,
            amp: kron_vec(&self.amp, &o.amp),
        }
    }

    pub fn density(&self) -> QState<R> {
        QState::from_pure(self)
    }

    /// Reduced state on `keep` without forming the full projector.
    pub fn reduced(&self, keep: &[usize]) -> Result<QState<R>> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        let traced = split_subsystems(self.dims.len(), keep)?;
        let ko = offsets(&self.dims, keep);
        let to = offsets(&self.dims, &traced);
        let n = ko.len();
        if n > DIM_CAP {
            return Err(Error::CapExceeded {
                what: "state dimension",
                requested: n,
                cap: DIM_CAP,
            });
        }
        let rho = CMatrix::from_fn(n, n, |a, b| {
            to.iter().fold(cr(R::zero()), |acc, &t| {
                acc + self.amp[ko[a] + t] * self.amp[ko[b] + t].conj()
            })
        });
        Ok(QState::new_unchecked(
            keep.iter().map(|&k| self.dims[k]).collect(),
            rho,
        ))
    }

    pub fn to_file(&self) -> PureFile {
        PureFile {
            dims: self.dims.clone(),
            re: self.amp.iter().map(|z| z.re.as_f64()).collect(),
            im: self.amp.iter().map(|z| z.im.as_f64()).collect(),
        }
    }
}

impl<R: Real> Serialize for PureState<R> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

/// `{"dims": [...], "re": [[...]], "im": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// `{"dims": [...], "re": [...], "im": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PureFile {
    pub dims: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Either state file form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyStateFile {
    Mixed(StateFile),
    Pure(PureFile),
}

impl StateFile {
    pub fn to_state<R: Real>(&self) -> Result<QState<R>> {
        let n = self.re.len();
        if self.im.len() != n
            || self.re.iter().chain(&self.im).any(|row| row.len() != n)
        {
            return Err(Error::DimensionMismatch("re/im must be square and equal-sized".into()));
        }
        let m = CMatrix::from_fn(n, n, |i, j| {
            Complex::new(R::lit(self.re[i][j]), R::lit(self.im[i][j]))
        });
        QState::new(self.dims.clone(), m)
    }
}

impl PureFile {
    pub fn to_state<R: Real>(&self) -> Result<PureState<R>> {
        if self.re.len() != self.im.len() {
            return Err(Error::DimensionMismatch("re/im length".into()));
        }
        let amp = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| Complex::new(R::lit(a), R::lit(b)))
            .collect();
        PureState::new(self.dims.clone(), amp)
    }
}

impl AnyStateFile {
    pub fn to_mixed<R: Real>(&self) -> Result<QState<R>> {
        match self {
            AnyStateFile::Mixed(f) => f.to_state(),
            AnyStateFile::Pure(f) => Ok(f.to_state::<R>()?.density()),
        }
    }
}
