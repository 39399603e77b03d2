//! Entanglement measures and bounds for small bipartite states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::binary_entropy;
use crate::embed::conditional_block;
use crate::error::{Error, Result};
use crate::qlinalg::random::{random_isometry, random_unit};
use crate::qlinalg::{
    cr, eigh, inner, mutual_info_q, norm, CMatrix, PureState, QState, C,
};
use crate::scalar::Real;

/// Largest total dimension the numeric optimizers accept.
pub const OPT_DIM_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeasureName {
    #[serde(rename = "E_F")]
    EntanglementOfFormation,
    #[serde(rename = "E_sq")]
    Squashed,
    #[serde(rename = "E_r")]
    RelativeEntropy,
    #[serde(rename = "E_entropy")]
    EntanglementEntropy,
    #[serde(rename = "concurrence")]
    Concurrence,
    #[serde(rename = "neg")]
    LogNegativity,
    #[serde(rename = "K_D")]
    KeyRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Exact,
    UpperBound,
    LowerBound,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub converged: bool,
    pub best_restart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureResult {
    pub name: MeasureName,
    pub value: f64,
    pub kind: Kind,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    /// Known enclosing interval when the value is not pinned.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
}

impl MeasureResult {
    pub(crate) fn new(name: MeasureName, value: f64, kind: Kind, method: &str) -> Self {
        Self {
            name,
            value,
            kind,
            method: method.to_string(),
            diagnostics: None,
            interval: None,
        }
    }
}

fn bipartite_dims<R: Real>(rho: &QState<R>) -> Result<(usize, usize)> {
    match rho.dims() {
        &[a, b] => Ok((a, b)),
        d => Err(Error::DimensionMismatch(format!(
            "expected a bipartite state, got dims {d:?}"
        ))),
    }
}

fn ln2<R: Real>() -> R {
    R::LN_2()
}

/// `S(tr_A |psi><psi|)` for a bipartite pure state.
pub fn entanglement_entropy<R: Real>(psi: &PureState<R>) -> Result<MeasureResult> {
    if psi.dims().len() != 2 {
        return Err(Error::DimensionMismatch("expected two subsystems".into()));
    }
    let s = psi.reduced(&[1])?.entropy();
    Ok(MeasureResult::new(
        MeasureName::EntanglementEntropy,
        s.as_f64(),
        Kind::Exact,
        "reduced-state entropy",
    ))
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence<R: Real>(rho: &QState<R>) -> Result<R> {
    if rho.dims() != [2, 2] {
        return Err(Error::DimensionMismatch("concurrence needs dims [2, 2]".into()));
    }
    // (Y (x) Y) rho^* (Y (x) Y): Y(x)Y is the anti-diagonal [-1, 1, 1, -1].
    let sign = [-R::one(), R::one(), R::one(), -R::one()];
    let r = rho.rho();
    let tilde = CMatrix::from_fn(4, 4, |i, j| r[(3 - i, 3 - j)].conj() * (sign[i] * sign[j]));
    // square roots amplify roundoff, so spectra are cut at a few ulps
    let e = eigh(r);
    let cut = noise_floor(&e.values);
    let sq = e.apply(|v| if v > cut { v.sqrt() } else { R::zero() });
    let m = &(&sq * &tilde) * &sq;
    let em = eigh(&m);
    let cut = noise_floor(&em.values);
    let mut lam: Vec<R> = em
        .values
        .iter()
        .map(|&v| if v > cut { v.sqrt() } else { R::zero() })
        .collect();
    lam.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(R::zero()).min(R::one()))
}

fn noise_floor<R: Real>(values: &[R]) -> R {
    let top = values.iter().fold(R::zero(), |m, v| m.max(v.abs()));
    R::lit(16.0) * R::epsilon() * top
}

pub fn concurrence_2q<R: Real>(rho: &QState<R>) -> Result<MeasureResult> {
    Ok(MeasureResult::new(
        MeasureName::Concurrence,
        concurrence(rho)?.as_f64(),
        Kind::Exact,
        "Wootters",
    ))
}

/// `h((1 + sqrt(1 - C^2)) / 2)`.
pub fn eof_from_concurrence<R: Real>(c: R) -> R {
    let x = (R::one() + (R::one() - c * c).max(R::zero()).sqrt()) * R::lit(0.5);
    binary_entropy(x.min(R::one())).unwrap_or(R::zero())
}

pub fn eof_2q<R: Real>(rho: &QState<R>) -> Result<MeasureResult> {
    let c = concurrence(rho)?;
    Ok(MeasureResult::new(
        MeasureName::EntanglementOfFormation,
        eof_from_concurrence(c).as_f64(),
        Kind::Exact,
        "Wootters concurrence formula",
    ))
}

/// Average entanglement entropy of a supplied decomposition of `rho`.
pub fn eof_ensemble_value<R: Real>(
    rho: &QState<R>,
    ensemble: &[(R, PureState<R>)],
) -> Result<MeasureResult> {
    bipartite_dims(rho)?;
    let n = rho.dim();
    let mut avg = CMatrix::zeros(n, n);
    let mut total = R::zero();
    let mut value = R::zero();
    for (p, psi) in ensemble {
        if psi.dims() != rho.dims() {
            return Err(Error::DimensionMismatch("ensemble member dims".into()));
        }
        if *p < R::zero() {
            return Err(Error::NotAProbability(p.as_f64()));
        }
        avg = &avg + &CMatrix::outer(psi.amp(), psi.amp()).scale_re(*p);
        total = total + *p;
        value = value + *p * psi.reduced(&[1])?.entropy();
    }
    let dev = avg.max_diff(rho.rho());
    if (total - R::one()).abs() > R::lit(1e-9) || dev > R::lit(1e-9) {
        return Err(Error::Precondition(format!(
            "ensemble does not average to the state (deviation {})",
            dev.as_f64()
        )));
    }
    Ok(MeasureResult::new(
        MeasureName::EntanglementOfFormation,
        value.as_f64(),
        Kind::UpperBound,
        "given ensemble",
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct EofOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Ensemble size; `None` means `rank^2`.
    pub ensemble_size: Option<usize>,
    /// Stop once the value changes by less than this (bits).
    pub tol: f64,
}

impl Default for EofOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iter: 3000,
            seed: 0,
            ensemble_size: None,
            tol: 1e-8,
        }
    }
}

/// Decompositions of `rho` parametrized by Stiefel matrices `U` (`m x r`):
/// member `i` is `sum_k U_ik sqrt(lambda_k) |v_k>`.
struct EofProblem<R> {
    da: usize,
    db: usize,
    w: Vec<Vec<C<R>>>,
}

impl<R: Real> EofProblem<R> {
    fn new(rho: &QState<R>) -> Result<Self> {
        let (da, db) = bipartite_dims(rho)?;
        let e = eigh(rho.rho());
        let clip = R::lit(R::EIG_CLIP);
        let w = (0..rho.dim())
            .filter(|&k| e.values[k] > clip)
            .map(|k| {
                let s = e.values[k].sqrt();
                e.vector(k).into_iter().map(|z| z * s).collect()
            })
            .collect();
        Ok(Self { da, db, w })
    }

    fn rank(&self) -> usize {
        self.w.len()
    }

    fn member(&self, u: &CMatrix<R>, i: usize) -> Vec<C<R>> {
        let n = self.da * self.db;
        let mut psi = vec![cr(R::zero()); n];
        for (k, wk) in self.w.iter().enumerate() {
            let c = u[(i, k)];
            for (p, &x) in psi.iter_mut().zip(wk) {
                *p = *p + c * x;
            }
        }
        psi
    }

    /// Objective in nats and, on request, the Euclidean gradient
    /// `E_ik = <W_k, G_i Psi_i>` with `G_i = -ln sigma_i + ln p_i`.
    fn eval(&self, u: &CMatrix<R>, grad: bool) -> (R, Option<CMatrix<R>>) {
        let (da, db) = (self.da, self.db);
        let clip = R::lit(R::EIG_CLIP);
        let m = u.rows();
        let mut f = R::zero();
        let mut g = grad.then(|| CMatrix::zeros(m, self.rank()));
        for i in 0..m {
            let psi = self.member(u, i);
            let sigma = CMatrix::from_fn(da, da, |a, a2| {
                (0..db).fold(cr(R::zero()), |acc, b| acc + psi[a * db + b] * psi[a2 * db + b].conj())
            });
            let p = sigma.trace().re;
            if p <= clip {
                continue;
            }
            let e = eigh(&sigma);
            let lp = p.ln();
            for &mu in &e.values {
                if mu > clip {
                    f = f - mu * mu.ln();
                }
            }
            f = f + p * lp;
            if let Some(g) = g.as_mut() {
                let gm = e.apply(|mu| if mu > clip { lp - mu.ln() } else { R::zero() });
                // G Psi as a da x db array
                let mut gpsi = vec![cr(R::zero()); da * db];
                for a in 0..da {
                    for a2 in 0..da {
                        let c = gm[(a, a2)];
                        for b in 0..db {
                            gpsi[a * db + b] = gpsi[a * db + b] + c * psi[a2 * db + b];
                        }
                    }
                }
                for (k, wk) in self.w.iter().enumerate() {
                    g[(i, k)] = inner(wk, &gpsi);
                }
            }
        }
        (f, g)
    }
}

fn re_inner<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>) -> R {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Tangent projection at a Stiefel point: `E - U sym(U^dagger E)`.
fn project<R: Real>(u: &CMatrix<R>, e: &CMatrix<R>) -> CMatrix<R> {
    let ue = &u.adjoint() * e;
    let sym = ue.hermitian_part();
    e - &(u * &sym)
}

/// Gram-Schmidt on the columns.
fn retract<R: Real>(x: &CMatrix<R>) -> CMatrix<R> {
    let mut cols: Vec<Vec<C<R>>> = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let mut v = x.column(j);
        for _ in 0..2 {
            for c in &cols {
                let proj = inner(c, &v);
                for (vi, &ci) in v.iter_mut().zip(c) {
                    *vi = *vi - ci * proj;
                }
            }
        }
        let s = norm(&v);
        cols.push(v.into_iter().map(|z| z / s).collect());
    }
    CMatrix::from_columns(&cols)
}

struct RunOutcome<R> {
    value: R,
    iterations: usize,
    converged: bool,
}

/// Riemannian conjugate gradient with Armijo backtracking.
fn eof_descent<R: Real>(prob: &EofProblem<R>, mut u: CMatrix<R>, opts: &EofOptions) -> RunOutcome<R> {
    let (mut f, g) = prob.eval(&u, true);
    let mut xi = project(&u, &g.expect("gradient requested"));
    let mut dir = xi.scale_re(-R::one());
    let mut step = R::one();
    let tol = R::lit(opts.tol) * ln2::<R>();
    let mut small = 0;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let mut slope = re_inner(&xi, &dir) * R::lit(2.0);
        if slope >= R::zero() {
            dir = xi.scale_re(-R::one());
            slope = -re_inner(&xi, &xi) * R::lit(2.0);
        }
        if -slope <= R::epsilon() * R::epsilon() {
            converged = true;
            break;
        }
        let mut t = step * R::lit(2.0);
        let mut accepted = None;
        for _ in 0..60 {
            let cand = retract(&(&u + &dir.scale_re(t)));
            let (fc, _) = prob.eval(&cand, false);
            if fc <= f + R::lit(1e-4) * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t = t * R::lit(0.5);
        }
        let Some((un, fnew)) = accepted else {
            converged = true;
            break;
        };
        step = t;
        let (_, gn) = prob.eval(&un, true);
        let xin = project(&un, &gn.expect("gradient requested"));
        // Polak-Ribiere with transport by projection
        let xi_t = project(&un, &xi);
        let denom = re_inner(&xi, &xi);
        let beta = if denom > R::zero() {
            (re_inner(&xin, &(&xin - &xi_t)) / denom).max(R::zero())
        } else {
            R::zero()
        };
        let dir_t = project(&un, &dir);
        dir = &xin.scale_re(-R::one()) + &dir_t.scale_re(beta);
        let delta = f - fnew;
        u = un;
        f = fnew;
        xi = xin;
        if delta < tol {
            small += 1;
            if small >= 5 {
                converged = true;
                break;
            }
        } else {
            small = 0;
        }
    }
    RunOutcome {
        value: f / ln2::<R>(),
        iterations,
        converged,
    }
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Numeric upper bound on `E_F` by local search over decompositions.
pub fn eof_numeric<R: Real>(rho: &QState<R>, opts: &EofOptions) -> Result<MeasureResult> {
    bipartite_dims(rho)?;
    if rho.dim() > OPT_DIM_CAP {
        return Err(Error::CapExceeded {
            what: "optimizer dimension",
            requested: rho.dim(),
            cap: OPT_DIM_CAP,
        });
    }
    let prob = EofProblem::new(rho)?;
    let r = prob.rank();
    let m = opts.ensemble_size.unwrap_or(r * r).max(r);
    let restarts = opts.restarts.max(1);
    let runs: Vec<RunOutcome<R>> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let u0 = if k == 0 {
                // the eigen-decomposition itself
                CMatrix::from_fn(m, r, |i, j| if i == j { cr(R::one()) } else { cr(R::zero()) })
            } else {
                random_isometry(m, r, &mut restart_rng(opts.seed, k))
            };
            eof_descent(&prob, u0, opts)
        })
        .collect();
    let (best, run) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.value
                .partial_cmp(&b.1.value)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        })
        .expect("at least one restart");
    let mut res = MeasureResult::new(
        MeasureName::EntanglementOfFormation,
        run.value.max(R::zero()).as_f64(),
        Kind::UpperBound,
        "decomposition search on the Stiefel manifold",
    );
    res.diagnostics = Some(Diagnostics {
        iterations: runs.iter().map(|r| r.iterations).sum(),
        restarts,
        seed: opts.seed,
        converged: run.converged,
        best_restart: best,
    });
    Ok(res)
}

/// `1/2 sum_zbar p(zbar) I(A:B)` over the blocks of a state classical on
/// its third subsystem; an upper bound on `E_sq` of the `AB` marginal.
pub fn esq_extension_value<R: Real>(sigma: &QState<R>) -> Result<R> {
    let dims = sigma.dims();
    if dims.len() != 3 {
        return Err(Error::DimensionMismatch("expected A, B, Zbar subsystems".into()));
    }
    let dzb = dims[2];
    let n = sigma.dim();
    let tol = R::lit(R::STATE_TOL);
    let rho = sigma.rho();
    for i in 0..n {
        for j in 0..n {
            if i % dzb != j % dzb && rho[(i, j)].norm() > tol {
                return Err(Error::Precondition(
                    "extension is not classical on its last subsystem".into(),
                ));
            }
        }
    }
    let mut total = R::zero();
    for zb in 0..dzb {
        if let Some((w, blk)) = conditional_block(sigma, zb)? {
            total = total + w * mutual_info_q(&blk, &[0], &[1])?;
        }
    }
    Ok(total * R::lit(0.5))
}

pub fn esq_classical_extension_bound<R: Real>(sigma: &QState<R>) -> Result<MeasureResult> {
    Ok(MeasureResult::new(
        MeasureName::Squashed,
        esq_extension_value(sigma)?.as_f64(),
        Kind::UpperBound,
        "classical extension",
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct RelEntOptions {
    /// Product terms; `None` means `2 dA dB`.
    pub k_terms: Option<usize>,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for RelEntOptions {
    fn default() -> Self {
        Self {
            k_terms: None,
            restarts: 32,
            max_iter: 400,
            seed: 0,
        }
    }
}

/// Weight of the maximally mixed state mixed into every candidate.
pub const REL_ENT_MIX: f64 = 1e-6;

struct ProductMix<R> {
    q: Vec<R>,
    a: Vec<Vec<C<R>>>,
    b: Vec<Vec<C<R>>>,
}

struct Eval<R> {
    f: R,
    vectors: CMatrix<R>,
    lam: Vec<R>,
    rv: CMatrix<R>,
}

struct RelEntProblem<R> {
    da: usize,
    db: usize,
    rho: CMatrix<R>,
    neg_entropy_nats: R,
}

impl<R: Real> RelEntProblem<R> {
    fn sigma(&self, s: &ProductMix<R>) -> CMatrix<R> {
        let n = self.da * self.db;
        let w = R::lit(REL_ENT_MIX);
        let mut m = CMatrix::diag(&vec![w / R::from_usize_lossy(n); n]);
        for ((q, a), b) in s.q.iter().zip(&s.a).zip(&s.b) {
            if *q <= R::zero() {
                continue;
            }
            let v: Vec<C<R>> = a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect();
            let c = *q * (R::one() - w);
            for i in 0..n {
                let vi = v[i] * c;
                for j in 0..n {
                    m[(i, j)] = m[(i, j)] + vi * v[j].conj();
                }
            }
        }
        m
    }

    /// `S(rho || sigma)` in nats, keeping the spectral data needed for the
    /// derivative.
    fn eval(&self, s: &ProductMix<R>) -> Eval<R> {
        let sig = self.sigma(s);
        let e = eigh(&sig);
        let n = sig.rows();
        let rv = &(&e.vectors.adjoint() * &self.rho) * &e.vectors;
        let lam: Vec<R> = e.values.iter().map(|&x| x.max(R::min_positive_value())).collect();
        let mut cross = R::zero();
        for k in 0..n {
            cross = cross + rv[(k, k)].re * lam[k].ln();
        }
        Eval {
            f: self.neg_entropy_nats - cross,
            vectors: e.vectors,
            lam,
            rv,
        }
    }

    /// Frechet derivative `D = Dlog_sigma[rho]`.
    fn derivative(&self, e: &Eval<R>) -> CMatrix<R> {
        let n = e.lam.len();
        let lam = &e.lam;
        let gamma = CMatrix::from_fn(n, n, |k, l| {
            let (x, y) = (lam[k], lam[l]);
            let g = if (x - y).abs() > R::lit(1e-12) * x.max(y) {
                (x.ln() - y.ln()) / (x - y)
            } else {
                R::one() / x
            };
            e.rv[(k, l)] * g
        });
        &(&e.vectors * &gamma) * &e.vectors.adjoint()
    }

    /// `(I (x) <b|) D (I (x) |b>)`.
    fn contract_b(&self, d: &CMatrix<R>, b: &[C<R>]) -> CMatrix<R> {
        let db = self.db;
        CMatrix::from_fn(self.da, self.da, |a, a2| {
            let mut acc = cr(R::zero());
            for j in 0..db {
                for j2 in 0..db {
                    acc = acc + b[j].conj() * d[(a * db + j, a2 * db + j2)] * b[j2];
                }
            }
            acc
        })
    }

    fn contract_a(&self, d: &CMatrix<R>, a: &[C<R>]) -> CMatrix<R> {
        let db = self.db;
        CMatrix::from_fn(db, db, |j, j2| {
            let mut acc = cr(R::zero());
            for i in 0..self.da {
                for i2 in 0..self.da {
                    acc = acc + a[i].conj() * d[(i * db + j, i2 * db + j2)] * a[i2];
                }
            }
            acc
        })
    }

    fn expect(&self, d: &CMatrix<R>, a: &[C<R>], b: &[C<R>]) -> R {
        let v: Vec<C<R>> = a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect();
        inner(&v, &d.mat_vec(&v)).re
    }
}

fn basis_vec<R: Real>(n: usize, i: usize) -> Vec<C<R>> {
    (0..n)
        .map(|k| if k == i { cr(R::one()) } else { cr(R::zero()) })
        .collect()
}

/// Blend `v` toward `target` (phase aligned) and renormalize.
fn blend<R: Real>(v: &[C<R>], target: &[C<R>], s: R) -> Vec<C<R>> {
    let ov = inner(target, v);
    let ph = if ov.norm() > R::zero() { ov / ov.norm() } else { cr(R::one()) };
    let w: Vec<C<R>> = v
        .iter()
        .zip(target)
        .map(|(&x, &t)| x * (R::one() - s) + t * ph * s)
        .collect();
    let n = norm(&w);
    if n > R::zero() {
        w.into_iter().map(|z| z / n).collect()
    } else {
        target.to_vec()
    }
}

/// Terms lighter than this fraction of the heaviest are not refined.
const REFINE_WEIGHT_FLOOR: f64 = 1e-8;
/// Terms whose predicted improvement is below this (nats) are left alone.
const REFINE_MIN_GAIN: f64 = 1e-13;

fn rel_ent_run<R: Real>(
    prob: &RelEntProblem<R>,
    mut s: ProductMix<R>,
    max_iter: usize,
) -> RunOutcome<R> {
    let e0 = prob.eval(&s);
    let mut f = e0.f;
    let mut d = prob.derivative(&e0);
    let mut small = 0;
    let mut iterations = 0;
    let mut converged = false;
    let steps = [R::one(), R::lit(0.5), R::lit(0.125)];
    for it in 0..max_iter {
        iterations = it + 1;
        let f_start = f;
        // multiplicative weight update, damped if it overshoots
        let t: Vec<R> = s
            .a
            .iter()
            .zip(&s.b)
            .map(|(a, b)| prob.expect(&d, a, b).max(R::zero()))
            .collect();
        for &pow in &steps {
            let mut q: Vec<R> = s.q.iter().zip(&t).map(|(&q, &t)| q * t.powf(pow)).collect();
            let tot: R = q.iter().copied().sum();
            if tot <= R::zero() {
                break;
            }
            q.iter_mut().for_each(|v| *v = *v / tot);
            let trial = ProductMix { q, a: s.a.clone(), b: s.b.clone() };
            let et = prob.eval(&trial);
            if et.f < f {
                s = trial;
                f = et.f;
                d = prob.derivative(&et);
                break;
            }
        }
        // refine product vectors one term at a time
        let qmax = s.q.iter().copied().fold(R::zero(), R::max);
        let floor = qmax * R::lit(REFINE_WEIGHT_FLOOR);
        for i in 0..s.q.len() {
            if s.q[i] <= floor {
                continue;
            }
            let a_star = eigh(&prob.contract_b(&d, &s.b[i])).vector(0);
            let b_star = eigh(&prob.contract_a(&d, &a_star)).vector(0);
            // first-order decrease of moving the whole term onto the target
            let gain = s.q[i] * (prob.expect(&d, &a_star, &b_star) - prob.expect(&d, &s.a[i], &s.b[i]));
            if gain <= R::lit(REFINE_MIN_GAIN) {
                continue;
            }
            for &st in &steps {
                let mut trial = ProductMix { q: s.q.clone(), a: s.a.clone(), b: s.b.clone() };
                trial.a[i] = blend(&s.a[i], &a_star, st);
                trial.b[i] = blend(&s.b[i], &b_star, st);
                let et = prob.eval(&trial);
                if et.f < f {
                    s = trial;
                    f = et.f;
                    d = prob.derivative(&et);
                    break;
                }
            }
        }
        let delta = f_start - f;
        if delta < R::lit(1e-11) {
            small += 1;
            if small >= 5 {
                converged = true;
                break;
            }
        } else {
            small = 0;
        }
    }
    RunOutcome {
        value: f / ln2::<R>(),
        iterations,
        converged,
    }
}

/// Upper bound on the relative entropy of entanglement from separable
/// candidates `sum_i q_i |a_i b_i><a_i b_i|` mixed with `I/d`.
pub fn rel_ent_upper<R: Real>(rho: &QState<R>, opts: &RelEntOptions) -> Result<MeasureResult> {
    let (da, db) = bipartite_dims(rho)?;
    if rho.dim() > OPT_DIM_CAP {
        return Err(Error::CapExceeded {
            what: "optimizer dimension",
            requested: rho.dim(),
            cap: OPT_DIM_CAP,
        });
    }
    let k = opts.k_terms.unwrap_or(2 * da * db).max(1);
    let prob = RelEntProblem {
        da,
        db,
        rho: rho.rho().clone(),
        neg_entropy_nats: -rho.entropy() * ln2::<R>(),
    };
    let restarts = opts.restarts.max(1);
    let runs: Vec<RunOutcome<R>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(opts.seed, r);
            let mut a = Vec::with_capacity(k);
            let mut b = Vec::with_capacity(k);
            for i in 0..k {
                if r == 0 && i < da * db {
                    a.push(basis_vec(da, i / db));
                    b.push(basis_vec(db, i % db));
                } else {
                    a.push(random_unit(da, &mut rng));
                    b.push(random_unit(db, &mut rng));
                }
            }
            let q = vec![R::one() / R::from_usize_lossy(k); k];
            rel_ent_run(&prob, ProductMix { q, a, b }, opts.max_iter)
        })
        .collect();
    let (best, run) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.value
                .partial_cmp(&b.1.value)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        })
        .expect("at least one restart");
    let mut res = MeasureResult::new(
        MeasureName::RelativeEntropy,
        run.value.max(R::zero()).as_f64(),
        Kind::UpperBound,
        "separable product-mixture search",
    );
    res.diagnostics = Some(Diagnostics {
        iterations: runs.iter().map(|r| r.iterations).sum(),
        restarts,
        seed: opts.seed,
        converged: run.converged,
        best_restart: best,
    });
    Ok(res)
}

/// `log2 || rho^{T_B} ||_1`.
pub fn log_negativity<R: Real>(rho: &QState<R>) -> Result<R> {
    bipartite_dims(rho)?;
    let pt = rho.partial_transpose(1)?;
    let s: R = eigh(&pt).values.iter().map(|v| v.abs()).sum();
    Ok(s.log2().max(R::zero()))
}

pub fn negativity_log<R: Real>(rho: &QState<R>) -> Result<MeasureResult> {
    Ok(MeasureResult::new(
        MeasureName::LogNegativity,
        log_negativity(rho)?.as_f64(),
        Kind::LowerBound,
        "partial transpose trace norm",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::random::{random_density, random_pure, random_unitary};
    use proptest::prelude::*;

    fn bell() -> PureState<f64> {
        let s = 0.5f64.sqrt();
        PureState::new(vec![2, 2], vec![cr(s), cr(0.0), cr(0.0), cr(s)]).unwrap()
    }

    fn quick() -> EofOptions {
        EofOptions { restarts: 8, ..Default::default() }
    }

    #[test]
    fn bell_measures() {
        let psi = bell();
        let rho = psi.density();
        assert!((entanglement_entropy(&psi).unwrap().value - 1.0).abs() < 1e-12);
        assert!((concurrence(&rho).unwrap() - 1.0).abs() < 1e-10);
        assert!((eof_2q(&rho).unwrap().value - 1.0).abs() < 1e-9);
        assert!((log_negativity(&rho).unwrap() - 1.0).abs() < 1e-10);
        let er = rel_ent_upper(&rho, &RelEntOptions { restarts: 2, ..Default::default() }).unwrap();
        assert!(er.value >= 1.0 - 1e-9 && er.value < 1.0 + 1e-3, "{}", er.value);
    }

    #[test]
    fn product_state_is_unentangled() {
        let rho = QState::<f64>::diagonal(vec![2, 2], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(concurrence(&rho).unwrap(), 0.0);
        assert!(eof_numeric(&rho, &quick()).unwrap().value < 1e-9);
        assert!(log_negativity(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn ensemble_must_reproduce_state() {
        let rho = bell().density();
        let good = eof_ensemble_value(&rho, &[(1.0, bell())]).unwrap();
        assert!((good.value - 1.0).abs() < 1e-12);
        let other = PureState::<f64>::basis(vec![2, 2], 0).unwrap();
        assert!(eof_ensemble_value(&rho, &[(1.0, other)]).is_err());
    }

    #[test]
    fn numeric_eof_matches_wootters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..20 {
            let rank = 1 + k % 4;
            let rho: QState<f64> = random_density(&[2, 2], rank, &mut rng);
            let exact = eof_2q(&rho).unwrap().value;
            let num = eof_numeric(&rho, &quick()).unwrap().value;
            assert!(num >= exact - 1e-6, "case {k}: {num} < {exact}");
            assert!(num - exact <= 1e-4, "case {k} rank {rank}: {num} vs {exact}");
        }
    }

    #[test]
    fn relent_between_negativity_and_pure_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let psi: PureState<f64> = random_pure(&[2, 2], &mut rng);
            let rho = psi.density();
            let s = entanglement_entropy(&psi).unwrap().value;
            let er = rel_ent_upper(&rho, &RelEntOptions { restarts: 4, ..Default::default() })
                .unwrap()
                .value;
            assert!(er >= s - 1e-6 && er <= s + 2e-2, "{er} vs {s}");
        }
    }

    #[test]
    fn esq_extension_rejects_coherent_register() {
        let s = 0.5f64.sqrt();
        let ghz = PureState::new(
            vec![2, 2, 2],
            (0..8).map(|i| cr(if i == 0 || i == 7 { s } else { 0.0 })).collect(),
        )
        .unwrap();
        assert!(esq_extension_value(&ghz.density()).is_err());
        let dephased = ghz.density().dephase(2).unwrap();
        // each block is a product state
        assert!(esq_extension_value(&dephased).unwrap().abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn local_unitaries_preserve_measures(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho: QState<f64> = random_density(&[2, 2], 2, &mut rng);
            let u = random_unitary::<f64, _>(2, &mut rng).kron(&random_unitary(2, &mut rng));
            let rot = rho.conjugate_by(&u).unwrap();
            prop_assert!((concurrence(&rho).unwrap() - concurrence(&rot).unwrap()).abs() < 1e-8);
            prop_assert!((log_negativity(&rho).unwrap() - log_negativity(&rot).unwrap()).abs() < 1e-8);
        }

        #[test]
        fn pure_states_have_eof_equal_entropy(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi: PureState<f64> = random_pure(&[2, 2], &mut rng);
            let s = entanglement_entropy(&psi).unwrap().value;
            prop_assert!((eof_2q(&psi.density()).unwrap().value - s).abs() < 1e-7);
        }
    }
}
