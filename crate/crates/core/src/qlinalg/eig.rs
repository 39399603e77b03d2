//! Dense Hermitian eigensolver for small matrices.

use super::matrix::{cr, CMatrix, C};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest matrix dimension the dense routines accept.
pub const DIM_CAP: usize = 256;

/// Eigenvalues in descending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct Eigen<R> {
    pub values: Vec<R>,
    pub vectors: CMatrix<R>,
}

impl<R: Real> Eigen<R> {
    pub fn vector(&self, k: usize) -> Vec<C<R>> {
        self.vectors.column(k)
    }

    /// `V f(Lambda) V^dagger`.
    pub fn apply(&self, f: impl Fn(R) -> R) -> CMatrix<R> {
        let n = self.values.len();
        let fv: Vec<R> = self.values.iter().map(|&v| f(v)).collect();
        let v = &self.vectors;
        CMatrix::from_fn(n, n, |i, j| {
            (0..n).fold(cr(R::zero()), |acc, k| {
                acc + v[(i, k)] * v[(j, k)].conj() * fv[k]
            })
        })
    }

    pub fn reconstruct(&self) -> CMatrix<R> {
        self.apply(|x| x)
    }
}

/// Checked eigendecomposition; the input must be Hermitian within `1e-10`
/// relative to its largest entry.
pub fn hermitian_eigs<R: Real>(m: &CMatrix<R>) -> Result<Eigen<R>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix is not square",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() > DIM_CAP {
        return Err(Error::CapExceeded {
            what: "matrix dimension",
            requested: m.rows(),
            cap: DIM_CAP,
        });
    }
    let tol = R::lit(R::STATE_TOL) * m.max_abs().max(R::one());
    let defect = m.hermiticity_defect();
    if !(defect <= tol) {
        return Err(Error::InvalidState(format!(
            "matrix not Hermitian (defect {})",
            defect.as_f64()
        )));
    }
    Ok(eigh(m))
}

/// Unchecked eigendecomposition of the Hermitian part of `m`.
///
/// Householder reduction to a real symmetric tridiagonal matrix, then
/// implicit-shift QL on that.
pub(crate) fn eigh<R: Real>(m: &CMatrix<R>) -> Eigen<R> {
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut q = CMatrix::<R>::identity(n);
    let zero = cr(R::zero());
    let two = R::lit(2.0);

    for k in 0..n.saturating_sub(2) {
        let xnorm = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<R>().sqrt();
        let x0 = a[(k + 1, k)];
        let tail = xnorm * xnorm - x0.norm_sqr();
        if tail <= R::epsilon() * R::epsilon() * xnorm * xnorm {
            continue;
        }
        let ph = if x0.norm() > R::zero() { x0 / x0.norm() } else { cr(R::one()) };
        let alpha = ph * (-xnorm);
        let mut u = vec![zero; n];
        for i in k + 1..n {
            u[i] = a[(i, k)];
        }
        u[k + 1] = u[k + 1] - alpha;
        let un = u.iter().map(|z| z.norm_sqr()).sum::<R>().sqrt();
        u.iter_mut().for_each(|z| *z = *z / un);
        // A <- H A H with H = I - 2 u u^dagger
        let p = a.mat_vec(&u);
        let kk = (0..n).fold(zero, |acc, i| acc + u[i].conj() * p[i]).re;
        for i in 0..n {
            for j in 0..n {
                let upd = u[i] * p[j].conj() * two + p[i] * u[j].conj() * two
                    - u[i] * u[j].conj() * (two * two * kk);
                a[(i, j)] = a[(i, j)] - upd;
            }
        }
        // Q <- Q H
        let qu = q.mat_vec(&u);
        for i in 0..n {
            for j in k + 1..n {
                q[(i, j)] = q[(i, j)] - qu[i] * u[j].conj() * two;
            }
        }
    }

    // Rotate the complex subdiagonal onto the nonnegative reals.
    let mut d: Vec<R> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut e = vec![R::zero(); n];
    let mut delta = vec![cr(R::one()); n];
    for k in 0..n.saturating_sub(1) {
        let off = a[(k + 1, k)];
        e[k] = off.norm();
        delta[k + 1] = if e[k] > R::zero() { delta[k] * (off / e[k]) } else { delta[k] };
    }

    let mut z = vec![R::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = R::one();
    }
    tql(&mut d, &mut e, &mut z, n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    // V = Q diag(delta) Z
    let vectors = CMatrix::from_fn(n, n, |i, c| {
        let col = order[c];
        (0..n).fold(zero, |acc, k| acc + q[(i, k)] * delta[k] * z[k * n + col])
    });
    Eigen { values, vectors }
}

const MAX_QL_ITER: usize = 60;

/// Implicit-shift QL on the symmetric tridiagonal `(d, e)`, `e[i]` coupling
/// `i` and `i + 1`; rotations are accumulated into the row-major `z`.
fn tql<R: Real>(d: &mut [R], e: &mut [R], z: &mut [R], n: usize) {
    let eps = R::epsilon();
    let two = R::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l || iter == MAX_QL_ITER {
                break;
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(R::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (R::one(), R::one(), R::zero());
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == R::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = R::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = R::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::random::random_hermitian;
    use num_complex::Complex;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cplx(re: f64, im: f64) -> C<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn trivial_spectra() {
        let e = hermitian_eigs(&CMatrix::<f64>::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let e = hermitian_eigs(&CMatrix::<f64>::diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert!((e.vector(0)[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_two_by_two() {
        // [[1, i], [-i, 1]] has eigenvalues 2 and 0.
        let m = CMatrix::from_vec(
            2,
            2,
            vec![cplx(1., 0.), cplx(0., 1.), cplx(0., -1.), cplx(1., 0.)],
        );
        let e = hermitian_eigs(&m).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-14);
        assert!(e.values[1].abs() < 1e-14);
        assert!(e.reconstruct().max_diff(&m) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_vec(2, 2, vec![cplx(1., 0.), cplx(1., 0.), cplx(0., 0.), cplx(1., 0.)]);
        assert!(matches!(hermitian_eigs(&m), Err(Error::InvalidState(_))));
    }

    #[test]
    fn random_six_by_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_hermitian::<f64, _>(6, &mut rng);
            let e = hermitian_eigs(&m).unwrap();
            assert!(e.reconstruct().max_diff(&m) <= 1e-9);
            let vv = &e.vectors.adjoint() * &e.vectors;
            assert!(vv.max_diff(&CMatrix::identity(6)) < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn single_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_hermitian::<f32, _>(4, &mut rng);
        let e = hermitian_eigs(&m).unwrap();
        assert!(e.reconstruct().max_diff(&m) <= 1e-4);
    }

    proptest! {
        #[test]
        fn reconstruction(seed in 0u64..10_000, n in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_hermitian::<f64, _>(n, &mut rng);
            let e = hermitian_eigs(&m).unwrap();
            prop_assert!(e.reconstruct().max_diff(&m) <= 1e-9);
        }
    }
}
