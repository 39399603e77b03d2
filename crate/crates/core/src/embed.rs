//! Quantum embeddings of a tripartite pmf and the Eve-channel extension.
//!
//! Subsystems are always ordered A, B, E with `x` most significant.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::common::maximal_common_partition;
use crate::dist::{Channel, Dist3};
use crate::error::{Error, Result};
use crate::qlinalg::{CMatrix, PureState, QState, C, DIM_CAP};
use crate::scalar::Real;

/// Phases `phi(x, y, z)` in `[0, 2 pi)` on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAssignment<R> {
    dims: [usize; 3],
    phi: Vec<R>,
}

fn wrap<R: Real>(v: R) -> R {
    let tau = R::TAU();
    let w = v % tau;
    let w = if w < R::zero() { w + tau } else { w };
    // `-tiny + tau` can round up to tau
    if w >= tau {
        R::zero()
    } else {
        w
    }
}

impl<R: Real> PhaseAssignment<R> {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            phi: vec![R::zero(); dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> R) -> Result<Self> {
        let mut s = Self::zeros(dims);
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                for z in 0..dims[2] {
                    s.set(x, y, z, f(x, y, z))?;
                }
            }
        }
        Ok(s)
    }

    pub fn from_entries(dims: [usize; 3], entries: &[(usize, usize, usize, R)]) -> Result<Self> {
        let mut s = Self::zeros(dims);
        for &(x, y, z, v) in entries {
            s.set(x, y, z, v)?;
        }
        Ok(s)
    }

    fn set(&mut self, x: usize, y: usize, z: usize, v: R) -> Result<()> {
        for (i, d) in [x, y, z].into_iter().zip(self.dims) {
            if i >= d {
                return Err(Error::OutOfRange { index: i, size: d });
            }
        }
        if !v.is_finite() {
            return Err(Error::Precondition("phase must be finite".into()));
        }
        let i = (x * self.dims[1] + y) * self.dims[2] + z;
        self.phi[i] = wrap(v);
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> R {
        self.phi[(x * self.dims[1] + y) * self.dims[2] + z]
    }

    pub fn to_file(&self) -> PhaseFile {
        let [dx, dy, dz] = self.dims;
        let mut entries = Vec::new();
        for x in 0..dx {
            for y in 0..dy {
                for z in 0..dz {
                    let phi = self.get(x, y, z);
                    if phi != R::zero() {
                        entries.push(PhaseEntry {
                            x,
                            y,
                            z,
                            phi: phi.as_f64(),
                        });
                    }
                }
            }
        }
        PhaseFile { entries }
    }
}

/// `{"entries": [{"x":..,"y":..,"z":..,"phi":..}, ...]}`; absent entries are 0.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PhaseFile {
    pub entries: Vec<PhaseEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub phi: f64,
}

impl PhaseFile {
    pub fn to_phases<R: Real>(&self, dims: [usize; 3]) -> Result<PhaseAssignment<R>> {
        let e: Vec<_> = self
            .entries
            .iter()
            .map(|e| (e.x, e.y, e.z, R::lit(e.phi)))
            .collect();
        PhaseAssignment::from_entries(dims, &e)
    }
}

fn check_phases<R: Real>(d: &Dist3<R>, ph: &PhaseAssignment<R>) -> Result<()> {
    if d.dims() != ph.dims {
        return Err(Error::DimensionMismatch(format!(
            "phases {:?} vs distribution {:?}",
            ph.dims,
            d.dims()
        )));
    }
    Ok(())
}

/// `e^{i phi} sqrt(p)` over the flattened grid.
fn amplitudes<R: Real>(d: &Dist3<R>, ph: &PhaseAssignment<R>) -> Vec<C<R>> {
    d.probs()
        .iter()
        .zip(&ph.phi)
        .map(|(&p, &f)| {
            if p > R::zero() {
                Complex::from_polar(p.sqrt(), f)
            } else {
                Complex::new(R::zero(), R::zero())
            }
        })
        .collect()
}

fn check_cap(n: usize) -> Result<()> {
    if n > DIM_CAP {
        return Err(Error::CapExceeded {
            what: "state dimension",
            requested: n,
            cap: DIM_CAP,
        });
    }
    Ok(())
}

/// `sum_xyz e^{i phi} sqrt(p(x,y,z)) |x y z>`.
pub fn embed_qqq<R: Real>(d: &Dist3<R>, ph: &PhaseAssignment<R>) -> Result<PureState<R>> {
    check_phases(d, ph)?;
    PureState::normalized(d.dims().to_vec(), amplitudes(d, ph))
}

/// Keeps coherence `a_i a_j^*` only between indices that agree on every
/// subsystem flagged classical.
fn partially_dephased<R: Real>(
    d: &Dist3<R>,
    ph: &PhaseAssignment<R>,
    classical: [bool; 3],
) -> Result<QState<R>> {
    check_phases(d, ph)?;
    let [dx, dy, dz] = d.dims();
    let n = dx * dy * dz;
    check_cap(n)?;
    let a = amplitudes(d, ph);
    let coords = |i: usize| [i / (dy * dz), (i / dz) % dy, i % dz];
    let m = CMatrix::from_fn(n, n, |i, j| {
        let (ci, cj) = (coords(i), coords(j));
        if (0..3).any(|k| classical[k] && ci[k] != cj[k]) {
            Complex::new(R::zero(), R::zero())
        } else {
            a[i] * a[j].conj()
        }
    });
    Ok(QState::new_unchecked(vec![dx, dy, dz], m))
}

/// `sum_x p(x) |x><x| (x) |psi_x><psi_x|`.
pub fn embed_cqq<R: Real>(d: &Dist3<R>, ph: &PhaseAssignment<R>) -> Result<QState<R>> {
    partially_dephased(d, ph, [true, false, false])
}

/// `sum_xy p(x,y) |xy><xy| (x) |psi_xy><psi_xy|`.
pub fn embed_ccq<R: Real>(d: &Dist3<R>, ph: &PhaseAssignment<R>) -> Result<QState<R>> {
    partially_dephased(d, ph, [true, true, false])
}

/// Diagonal state with entries `p(x, y, z)`.
pub fn embed_ccc<R: Real>(d: &Dist3<R>) -> Result<QState<R>> {
    check_cap(d.probs().len())?;
    Ok(QState::new_unchecked(d.dims().to_vec(), CMatrix::diag(d.probs())))
}

/// Eve's ensemble `{p(z), |phi_z>}` with
/// `<xy|phi_z> = e^{i phi} sqrt(p(x, y | z))`, for every `z` with `p(z) > 0`.
pub fn eve_ensemble<R: Real>(
    d: &Dist3<R>,
    ph: &PhaseAssignment<R>,
) -> Result<Vec<(usize, R, PureState<R>)>> {
    check_phases(d, ph)?;
    let [dx, dy, dz] = d.dims();
    let a = amplitudes(d, ph);
    let pz = d.marginal_z();
    let mut out = Vec::new();
    for z in 0..dz {
        if pz[z] <= R::zero() {
            continue;
        }
        let v: Vec<C<R>> = (0..dx * dy).map(|xy| a[xy * dz + z]).collect();
        out.push((z, pz[z], PureState::normalized(vec![dx, dy], v)?));
    }
    Ok(out)
}

/// `sigma = sum_zbar p(zbar) sigma_(zbar) (x) |zbar><zbar|` where
/// `p(zbar) sigma_(zbar) = sum_z k[z][zbar] p(z) |phi_z><phi_z|`.
pub fn extension_sigma<R: Real>(
    d: &Dist3<R>,
    ph: &PhaseAssignment<R>,
    ch: &Channel<R>,
) -> Result<QState<R>> {
    check_phases(d, ph)?;
    let [dx, dy, dz] = d.dims();
    if ch.in_dim() != dz {
        return Err(Error::DimensionMismatch(format!(
            "channel input {} vs |Z| = {dz}",
            ch.in_dim()
        )));
    }
    let dzb = ch.out_dim();
    let nab = dx * dy;
    check_cap(nab * dzb)?;
    let a = amplitudes(d, ph);
    let mut m = CMatrix::zeros(nab * dzb, nab * dzb);
    for zb in 0..dzb {
        for z in 0..dz {
            let k = ch.get(z, zb);
            if k <= R::zero() {
                continue;
            }
            for i in 0..nab {
                let ai = a[i * dz + z];
                if ai.norm_sqr() == R::zero() {
                    continue;
                }
                for j in 0..nab {
                    let v = ai * a[j * dz + z].conj() * k;
                    m[(i * dzb + zb, j * dzb + zb)] = m[(i * dzb + zb, j * dzb + zb)] + v;
                }
            }
        }
    }
    Ok(QState::new_unchecked(vec![dx, dy, dzb], m))
}

/// The normalized `AB` block of a state classical on its last subsystem,
/// with its weight; `None` when the weight is zero.
pub fn conditional_block<R: Real>(sigma: &QState<R>, zbar: usize) -> Result<Option<(R, QState<R>)>> {
    let dims = sigma.dims();
    if dims.len() != 3 {
        return Err(Error::DimensionMismatch("expected A, B, Zbar subsystems".into()));
    }
    let dzb = dims[2];
    if zbar >= dzb {
        return Err(Error::OutOfRange { index: zbar, size: dzb });
    }
    let nab = dims[0] * dims[1];
    let rho = sigma.rho();
    let block = CMatrix::from_fn(nab, nab, |i, j| rho[(i * dzb + zbar, j * dzb + zbar)]);
    let w = block.trace().re;
    if w <= R::zero() {
        return Ok(None);
    }
    Ok(Some((
        w,
        QState::new_unchecked(vec![dims[0], dims[1]], block.scale_re(R::one() / w)),
    )))
}

/// Local relabeling `x -> j`, `y -> j` realizing the block measurement for
/// one Eve symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockMeasurement {
    pub zbar: usize,
    pub num_blocks: usize,
    /// `None` for symbols outside the conditional support.
    pub x_map: Vec<Option<usize>>,
    pub y_map: Vec<Option<usize>>,
}

impl BlockMeasurement {
    /// Dephases `sigma_ab` and relabels both sides to block indices.
    /// Symbols without a label go to block 0; they carry no weight.
    pub fn apply<R: Real>(&self, sigma_ab: &QState<R>) -> Result<QState<R>> {
        let (dx, dy) = (self.x_map.len(), self.y_map.len());
        if sigma_ab.dims() != [dx, dy] {
            return Err(Error::DimensionMismatch(format!(
                "state dims {:?} vs measurement [{dx}, {dy}]",
                sigma_ab.dims()
            )));
        }
        let nb = self.num_blocks.max(1);
        let mut p = vec![R::zero(); nb * nb];
        let rho = sigma_ab.rho();
        for x in 0..dx {
            for y in 0..dy {
                let jx = self.x_map[x].unwrap_or(0);
                let jy = self.y_map[y].unwrap_or(0);
                let i = x * dy + y;
                p[jx * nb + jy] = p[jx * nb + jy] + rho[(i, i)].re;
            }
        }
        Ok(QState::new_unchecked(vec![nb, nb], CMatrix::diag(&p)))
    }
}

/// Block measurement for `zbar` after passing Eve's symbol through `ch`.
pub fn omega_measurement<R: Real>(
    d: &Dist3<R>,
    ch: &Channel<R>,
    zbar: usize,
) -> Result<BlockMeasurement> {
    let db = d.apply_channel_z(ch)?;
    let cond = db.conditional_xy_given_z(zbar)?;
    let part = maximal_common_partition(&cond);
    let [dx, dy, _] = d.dims();
    Ok(BlockMeasurement {
        zbar,
        num_blocks: part.num_blocks(),
        x_map: (0..dx).map(|x| part.block_of_x(x)).collect(),
        y_map: (0..dy).map(|y| part.block_of_y(y)).collect(),
    })
}

/// One measurement per `zbar`; `None` where `p(zbar) = 0`.
pub fn omega_measurements<R: Real>(
    d: &Dist3<R>,
    ch: &Channel<R>,
) -> Result<Vec<Option<BlockMeasurement>>> {
    let db = d.apply_channel_z(ch)?;
    let pz = db.marginal_z();
    (0..ch.out_dim())
        .map(|zb| {
            if pz[zb] > R::zero() {
                omega_measurement(d, ch, zb).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}
