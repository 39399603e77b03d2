//! Random matrices and states for tests and optimizer restarts.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{cr, inner, norm, CMatrix, C};
use super::state::{PureState, QState};
use crate::scalar::Real;

pub fn gaussian<R: Real, G: Rng + ?Sized>(rng: &mut G) -> C<R> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(R::lit(re), R::lit(im))
}

pub fn gaussian_vec<R: Real, G: Rng + ?Sized>(n: usize, rng: &mut G) -> Vec<C<R>> {
    (0..n).map(|_| gaussian(rng)).collect()
}

/// Uniformly random unit vector.
pub fn random_unit<R: Real, G: Rng + ?Sized>(n: usize, rng: &mut G) -> Vec<C<R>> {
    let v: Vec<C<R>> = gaussian_vec(n, rng);
    let s = norm(&v);
    v.into_iter().map(|z| z / s).collect()
}

pub fn random_hermitian<R: Real, G: Rng + ?Sized>(n: usize, rng: &mut G) -> CMatrix<R> {
    CMatrix::from_fn(n, n, |_, _| gaussian(rng)).hermitian_part()
}

/// Columns of a `rows x cols` isometry (`cols <= rows`) by Gram-Schmidt on
/// Gaussian vectors.
pub fn random_isometry<R: Real, G: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut G) -> CMatrix<R> {
    assert!(cols <= rows, "isometry needs cols <= rows");
    let mut basis: Vec<Vec<C<R>>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v = gaussian_vec(rows, rng);
        for b in &basis {
            let c = inner(b, &v);
            for (vi, &bi) in v.iter_mut().zip(b) {
                *vi = *vi - bi * c;
            }
        }
        let s = norm(&v);
        if s > R::lit(1e-6) {
            basis.push(v.into_iter().map(|z| z / s).collect());
        }
    }
    CMatrix::from_columns(&basis)
}

pub fn random_unitary<R: Real, G: Rng + ?Sized>(n: usize, rng: &mut G) -> CMatrix<R> {
    random_isometry(n, n, rng)
}

pub fn random_pure<R: Real, G: Rng + ?Sized>(dims: &[usize], rng: &mut G) -> PureState<R> {
    let n = dims.iter().product();
    PureState::new_unchecked(dims.to_vec(), random_unit(n, rng))
}

/// `G G^dagger / tr` with `G` a `d x rank` Gaussian matrix.
pub fn random_density<R: Real, G: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut G) -> QState<R> {
    let n: usize = dims.iter().product();
    let g = CMatrix::from_fn(n, rank.max(1), |_, _| gaussian(rng));
    let m = &g * &g.adjoint();
    let t = m.trace().re;
    QState::new_unchecked(dims.to_vec(), m.scale(cr(R::one() / t)).hermitian_part())
}
