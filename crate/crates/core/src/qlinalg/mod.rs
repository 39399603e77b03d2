//! Dense complex linear algebra for small multipartite quantum states.

mod eig;
mod matrix;
pub mod random;
mod state;

pub use eig::{hermitian_eigs, Eigen, DIM_CAP};
#[allow(unused_imports)]
pub(crate) use eig::eigh;
pub use matrix::{inner, kron_vec, norm, CMatrix, C};
#[allow(unused_imports)]
pub(crate) use matrix::cr;
pub use state::{
    cond_mutual_info_q, entropy_of_spectrum, mutual_info_q, relative_entropy, trace_distance,
    von_neumann_entropy, AnyStateFile, PureFile, PureState, QState, StateFile,
};
#[allow(unused_imports)]
pub(crate) use state::{offsets, strides};
