//! Independent reference computations for the acceptance suite. Nothing here
//! calls into the library under test except for constructing inputs.

use rand::Rng;
use secrecy_core::Dist3;

/// Shannon entropy in bits; zero entries contribute nothing.
pub fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

pub fn h2(p: f64) -> f64 {
    shannon(&[p, 1.0 - p])
}

/// Entanglement of formation of a two-qubit state supported on
/// `span{|00>, |11>}` with coherence `c01 = <00|rho|11>`.
pub fn eof_parity_state(c01: f64) -> f64 {
    let c = (2.0 * c01.abs()).min(1.0);
    h2((1.0 + (1.0 - c * c).sqrt()) / 2.0)
}

/// Random pmf whose entries are nonzero with probability `density`.
pub fn random_pmf<G: Rng + ?Sized>(rng: &mut G, dims: [usize; 3], density: f64) -> Dist3 {
    let n = dims.iter().product();
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < density {
                    rng.gen_range(0.05..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            return Dist3::new(dims, w.iter().map(|x| x / s).collect()).expect("normalized");
        }
    }
}
