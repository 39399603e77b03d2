//! Named distributions used by the reproduction reports and tests.

use crate::dist::Dist3;
use crate::embed::PhaseAssignment;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Binary source whose Eve symbol reveals a biased bit with weight `lambda`:
/// `p(0,0,0) = p(1,1,0) = 1/4`, `p(0,0,1) = lambda/2`,
/// `p(1,1,1) = (1 - lambda)/2`.
pub fn biased_eve_bit<R: Real>(lambda: R) -> Result<Dist3<R>> {
    if !(lambda >= R::zero() && lambda <= R::one()) {
        return Err(Error::NotAProbability(lambda.as_f64()));
    }
    let q = R::lit(0.25);
    let h = R::lit(0.5);
    Dist3::from_sparse(
        [2, 2, 2],
        &[
            (0, 0, 0, q),
            (1, 1, 0, q),
            (0, 0, 1, lambda * h),
            (1, 1, 1, (R::one() - lambda) * h),
        ],
    )
}

/// `p(0,0) = 1/2`, `p(1,0) = p(1,1) = 1/4` with a trivial Eve alphabet.
pub fn independent_eve_z<R: Real>() -> Dist3<R> {
    let q = R::lit(0.25);
    Dist3::from_sparse([2, 2, 1], &[(0, 0, 0, R::lit(0.5)), (1, 0, 0, q), (1, 1, 0, q)])
        .expect("valid constant pmf")
}

/// `X = Y` uniform on four symbols, `Z = floor(X / 2)`.
pub fn paired_blocks<R: Real>() -> Dist3<R> {
    let q = R::lit(0.25);
    Dist3::from_sparse(
        [4, 4, 2],
        &[(0, 0, 0, q), (1, 1, 0, q), (2, 2, 1, q), (3, 3, 1, q)],
    )
    .expect("valid constant pmf")
}

/// A source that is not block independent for Eve's own alphabet but
/// becomes UBI after merging `z = 0` and `z = 1`:
/// `z = 0` carries the three-point chain `(0,0), (0,1), (1,1)`, `z = 1` the
/// missing corner `(1,0)`, and `z = 2` a perfectly shared bit on `{2, 3}`.
pub fn merge_witness<R: Real>() -> Dist3<R> {
    let e = R::lit(0.125);
    let h = R::lit(0.25);
    Dist3::from_sparse(
        [4, 4, 3],
        &[
            (0, 0, 0, e),
            (0, 1, 0, e),
            (1, 1, 0, e),
            (1, 0, 1, e),
            (2, 2, 2, h),
            (3, 3, 2, h),
        ],
    )
    .expect("valid constant pmf")
}

/// Uniform `X = Y` bit and constant Eve; the ideal one-bit key.
pub fn shared_bit<R: Real>() -> Dist3<R> {
    let h = R::lit(0.5);
    Dist3::from_sparse([2, 2, 1], &[(0, 0, 0, h), (1, 1, 0, h)]).expect("valid constant pmf")
}

/// `p(0,0,0) = p(1,1,0) = p(0,1,1) = p(1,0,1) = 1/4`: the blocks swap with z.
pub fn block_flip<R: Real>() -> Dist3<R> {
    let q = R::lit(0.25);
    Dist3::from_sparse(
        [2, 2, 2],
        &[(0, 0, 0, q), (1, 1, 0, q), (0, 1, 1, q), (1, 0, 1, q)],
    )
    .expect("valid constant pmf")
}

/// Four-level source whose coherent embedding has three Eve branches:
/// a shared bit on `{0,1}` (`z = 0`), Alice on `{0,1}` with Bob on `{2,3}`
/// (`z = 1`), and the mirror image (`z = 2`).
pub fn three_branch<R: Real>() -> Dist3<R> {
    let s = R::one() / R::lit(6.0);
    let t = R::one() / R::lit(12.0);
    let mut e = vec![(0, 0, 0, s), (1, 1, 0, s)];
    for a in 0..2 {
        for b in 2..4 {
            e.push((a, b, 1, t));
            e.push((b, a, 2, t));
        }
    }
    Dist3::from_sparse([4, 4, 3], &e).expect("valid constant pmf")
}

/// Phases turning the `z = 1, 2` branches into `|+2> + |-3>` and
/// `|2+> + |3->`.
pub fn three_branch_phases<R: Real>() -> PhaseAssignment<R> {
    PhaseAssignment::from_entries([4, 4, 3], &[(1, 3, 1, R::PI()), (3, 1, 2, R::PI())])
        .expect("in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_valid() {
        assert!(biased_eve_bit(0.3f64).is_ok());
        assert!(biased_eve_bit(1.5f64).is_err());
        assert!(biased_eve_bit(f64::NAN).is_err());
        for d in [
            independent_eve_z::<f64>(),
            paired_blocks(),
            merge_witness(),
            shared_bit(),
            block_flip(),
        ] {
            assert!(d.validate(1e-12).is_ok());
        }
    }
}
