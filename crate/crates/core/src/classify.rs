//! Membership tests for the block-independence hierarchy and the
//! (semi-)unambiguous classes.

use serde::Serialize;

use crate::common::{
    cond_common_entropy_with, conditional_common_function, maximal_common_partition,
    CommonPartition, CondCommonFunction,
};
use crate::dist::{Channel, Dist3, JointPmf};
use crate::scalar::Real;

/// Default number of Eve channels the down-search may try.
pub const DEFAULT_BUDGET: usize = 10_000;

/// Largest dense alphabet product allowed for the message-extended pmf.
const MESSAGE_CAP: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }

    pub fn is_yes(self) -> bool {
        self == Verdict::Yes
    }
}

/// `p(x, y, z)` extended with the per-`z` block index as variable 3.
fn with_block_label<R: Real>(d: &Dist3<R>, j: &CondCommonFunction) -> JointPmf<R> {
    d.joint().extend(j.max_blocks().max(1), |s| {
        j.local_block(s[0], s[2]).unwrap_or(0)
    })
}

/// `I(X:Y | J, Z)` for the maximal conditional common function.
pub fn block_cmi<R: Real>(d: &Dist3<R>) -> R {
    let j = conditional_common_function(d);
    with_block_label(d, &j).cond_mutual_info(&[0], &[1], &[3, 2])
}

pub fn is_block_independent<R: Real>(d: &Dist3<R>, tol: R) -> bool {
    block_cmi(d) <= tol
}

pub fn is_ubi<R: Real>(d: &Dist3<R>, tol: R) -> bool {
    let j = conditional_common_function(d);
    is_ubi_with(d, &j, tol)
}

fn is_ubi_with<R: Real>(d: &Dist3<R>, j: &CondCommonFunction, tol: R) -> bool {
    j.per_z_injective() && with_block_label(d, j).cond_mutual_info(&[0], &[1], &[3, 2]) <= tol
}

/// The global label of `x` under the merge labeling of `j`, if `x` occurs.
pub fn label_of_x(j: &CondCommonFunction, x: usize) -> Option<usize> {
    (0..j.num_z()).find_map(|z| j.local_block(x, z).and_then(|b| j.global_label(z, b)))
}

pub fn label_of_y(j: &CondCommonFunction, y: usize) -> Option<usize> {
    (0..j.num_z()).find_map(|z| j.local_block_of_y(y, z).and_then(|b| j.global_label(z, b)))
}

pub fn is_semi_unambiguous<R: Real>(d: &Dist3<R>) -> bool {
    let eps = R::lit(R::SUPPORT_EPS);
    let [dx, dy, dz] = d.dims();
    let pxy = d.marginal_xy();
    (0..dx).all(|x| {
        (0..dy).all(|y| {
            let hits = (0..dz).filter(|&z| d.get(x, y, z) > eps).count();
            if pxy.get(x, y) > eps {
                hits == 1
            } else {
                hits <= 1
            }
        })
    })
}

pub fn is_unambiguous<R: Real>(d: &Dist3<R>, tol: R) -> bool {
    if !is_semi_unambiguous(d) {
        return false;
    }
    let j = conditional_common_function(d);
    with_block_label(d, &j).cond_entropy(&[0, 1], &[3, 2]) <= tol
}

/// The message `M = (J_XZ(x), J_YZ(y))` each party broadcasts.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalMessage {
    pub alice: CommonPartition,
    pub bob: CommonPartition,
}

impl CanonicalMessage {
    pub fn new<R: Real>(d: &Dist3<R>) -> Self {
        Self {
            alice: maximal_common_partition(&d.marginal_xz()),
            bob: maximal_common_partition(&d.marginal_yz()),
        }
    }

    pub fn num_values(&self) -> usize {
        self.alice.num_blocks().max(1) * self.bob.num_blocks().max(1)
    }

    pub fn value(&self, x: usize, y: usize) -> usize {
        let a = self.alice.block_of_x(x).unwrap_or(0);
        // Bob's partition is over (Y, Z), so `y` is its first coordinate.
        let b = self.bob.block_of_x(y).unwrap_or(0);
        a * self.bob.num_blocks().max(1) + b
    }
}

/// Evidence gathered by the canonical-message check.
#[derive(Debug, Clone, Serialize)]
pub struct PdCertificate {
    pub message: CanonicalMessage,
    pub block_independent: bool,
    pub extended_ubi: bool,
    /// `I(M : J | Z)`.
    pub message_leak: f64,
}

/// Builds the pmf of `((M, X), (M, Y), (Z, M))` on compressed alphabets.
fn message_extension<R: Real>(d: &Dist3<R>, m: &CanonicalMessage) -> Option<Dist3<R>> {
    let eps = R::lit(R::SUPPORT_EPS);
    let mut ax: Vec<(usize, usize)> = Vec::new();
    let mut ay: Vec<(usize, usize)> = Vec::new();
    let mut az: Vec<(usize, usize)> = Vec::new();
    let mut pts = Vec::new();
    let intern = |v: &mut Vec<(usize, usize)>, k: (usize, usize)| match v.iter().position(|&e| e == k) {
        Some(i) => i,
        None => {
            v.push(k);
            v.len() - 1
        }
    };
    for (x, y, z, p) in d.support() {
        if p <= eps {
            continue;
        }
        let mv = m.value(x, y);
        let i = intern(&mut ax, (mv, x));
        let j = intern(&mut ay, (mv, y));
        let k = intern(&mut az, (z, mv));
        pts.push((i, j, k, p));
    }
    let dims = [ax.len().max(1), ay.len().max(1), az.len().max(1)];
    if dims.iter().product::<usize>() > MESSAGE_CAP {
        return None;
    }
    Some(Dist3::from_parts_sparse(dims, &pts))
}

/// Canonical-message test for UBI-PD. `No` when `d` is not block
/// independent; `Inconclusive` when the canonical message does not work.
pub fn is_ubi_pd<R: Real>(d: &Dist3<R>, tol: R) -> (Verdict, PdCertificate) {
    let j = conditional_common_function(d);
    let bi = with_block_label(d, &j).cond_mutual_info(&[0], &[1], &[3, 2]) <= tol;
    let message = CanonicalMessage::new(d);
    let extended_ubi = bi
        && message_extension(d, &message).is_some_and(|e| is_ubi(&e, tol));
    let leak = message_leak(d, &j, &message);
    let verdict = if !bi {
        Verdict::No
    } else if extended_ubi && leak <= tol {
        Verdict::Yes
    } else {
        Verdict::Inconclusive
    };
    let cert = PdCertificate {
        message,
        block_independent: bi,
        extended_ubi,
        message_leak: leak.as_f64(),
    };
    (verdict, cert)
}

/// `I(M : J_{XY|Z} | Z)`.
fn message_leak<R: Real>(d: &Dist3<R>, j: &CondCommonFunction, m: &CanonicalMessage) -> R {
    with_block_label(d, j)
        .extend(m.num_values(), |s| m.value(s[0], s[1]))
        .cond_mutual_info(&[4], &[3], &[2])
}

/// Outcome of the Eve-channel search.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum DownResult {
    Found {
        /// `z -> zbar` on the full Eve alphabet.
        map: Vec<usize>,
        out_dim: usize,
        tested: usize,
    },
    Inconclusive {
        tested: usize,
        budget_exhausted: bool,
    },
}

impl DownResult {
    pub fn channel<R: Real>(&self) -> Option<Channel<R>> {
        match self {
            DownResult::Found { map, out_dim, .. } => Channel::deterministic(map, *out_dim).ok(),
            DownResult::Inconclusive { .. } => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, DownResult::Found { .. })
    }
}

/// Calls `f` on every restricted growth string of length `n` with exactly
/// `k` blocks, in lexicographic order, until `f` returns `true`.
fn for_each_rgs(n: usize, k: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    fn rec(
        s: &mut Vec<usize>,
        n: usize,
        k: usize,
        used: usize,
        f: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if s.len() == n {
            return used == k && f(s);
        }
        let left = n - s.len();
        for v in 0..=used.min(k - 1) {
            let now = used.max(v + 1);
            if k - now > left - 1 {
                continue;
            }
            s.push(v);
            let stop = rec(s, n, k, now, f);
            s.pop();
            if stop {
                return true;
            }
        }
        false
    }
    if n == 0 || k == 0 || k > n {
        return false;
    }
    rec(&mut Vec::with_capacity(n), n, k, 0, f)
}

/// Passes if `p_{XYZbar}` is canonically UBI-PD and
/// `I(Z : J_{XY|Zbar} | M, Zbar) <= tol`.
fn down_candidate_passes<R: Real>(d: &Dist3<R>, map: &[usize], k: usize, tol: R) -> bool {
    let Ok(ch) = Channel::deterministic(map, k) else {
        return false;
    };
    let Ok(db) = d.apply_channel_z(&ch) else {
        return false;
    };
    let (v, cert) = is_ubi_pd(&db, tol);
    if !v.is_yes() {
        return false;
    }
    let jb = conditional_common_function(&db);
    let m = &cert.message;
    // variables: x, y, z, zbar, m, j
    d.joint()
        .extend(k, |s| map[s[2]])
        .extend(m.num_values(), |s| m.value(s[0], s[1]))
        .extend(jb.max_blocks().max(1), |s| jb.local_block(s[0], s[3]).unwrap_or(0))
        .cond_mutual_info(&[2], &[5], &[4, 3])
        <= tol
}

/// Searches deterministic Eve channels, up to relabeling of the output,
/// finest partitions first. Zero-probability Eve symbols are sent to `0`.
pub fn is_ubi_pd_down<R: Real>(d: &Dist3<R>, tol: R, budget: usize) -> DownResult {
    let eps = R::lit(R::SUPPORT_EPS);
    let dz = d.dims()[2];
    let pz = d.marginal_z();
    let live: Vec<usize> = (0..dz).filter(|&z| pz[z] > eps).collect();
    let n = live.len();
    let mut tested = 0usize;
    let mut found: Option<(Vec<usize>, usize)> = None;
    let mut exhausted = false;
    for k in (1..=n).rev() {
        let done = for_each_rgs(n, k, &mut |rgs| {
            if tested >= budget {
                exhausted = true;
                return true;
            }
            tested += 1;
            let mut map = vec![0usize; dz];
            for (&z, &b) in live.iter().zip(rgs) {
                map[z] = b;
            }
            if down_candidate_passes(d, &map, k, tol) {
                found = Some((map, k));
                return true;
            }
            false
        });
        if done {
            break;
        }
    }
    match found {
        Some((map, out_dim)) => DownResult::Found {
            map,
            out_dim,
            tested,
        },
        None => DownResult::Inconclusive {
            tested,
            budget_exhausted: exhausted,
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub entropy: f64,
    pub support: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificates {
    /// Global label per `x` (and per `y`) when UBI holds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ubi_labels: Option<UbiLabels>,
    pub ubi_pd: PdCertificate,
    pub ubi_pd_down: DownResult,
    pub block_cmi: f64,
    pub cond_common_entropy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UbiLabels {
    pub x: Vec<Option<usize>>,
    pub y: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub bi: Verdict,
    pub ubi: Verdict,
    pub ubi_pd: Verdict,
    pub ubi_pd_down: Verdict,
    pub semi_unambiguous: Verdict,
    pub unambiguous: Verdict,
    pub common: CondCommonFunction,
    pub certificates: Certificates,
    pub tolerances: Tolerances,
}

impl ClassReport {
    /// Broken class implications; always empty unless there is a bug.
    pub fn nesting_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |cond: bool, msg: &str| {
            if cond {
                v.push(msg.to_string());
            }
        };
        check(self.ubi.is_yes() && !self.bi.is_yes(), "ubi without bi");
        check(self.ubi.is_yes() && !self.ubi_pd.is_yes(), "ubi without ubi_pd");
        check(
            self.ubi_pd.is_yes() && !self.ubi_pd_down.is_yes(),
            "ubi_pd without ubi_pd_down",
        );
        check(
            self.unambiguous.is_yes() && !self.semi_unambiguous.is_yes(),
            "unambiguous without semi_unambiguous",
        );
        check(
            self.ubi_pd_down.is_yes() != self.certificates.ubi_pd_down.is_found(),
            "ubi_pd_down verdict disagrees with its certificate",
        );
        v
    }
}

pub fn classify<R: Real>(d: &Dist3<R>, tol: R, budget: usize) -> ClassReport {
    let j = conditional_common_function(d);
    let ext = with_block_label(d, &j);
    let cmi = ext.cond_mutual_info(&[0], &[1], &[3, 2]);
    let bi = cmi <= tol;
    let ubi = bi && j.per_z_injective();
    let semi = is_semi_unambiguous(d);
    let unamb = semi && ext.cond_entropy(&[0, 1], &[3, 2]) <= tol;
    let (pd, pd_cert) = is_ubi_pd(d, tol);
    let down = is_ubi_pd_down(d, tol, budget);
    let [dx, dy, _] = d.dims();
    let ubi_labels = ubi.then(|| UbiLabels {
        x: (0..dx).map(|x| label_of_x(&j, x)).collect(),
        y: (0..dy).map(|y| label_of_y(&j, y)).collect(),
    });
    let cce = cond_common_entropy_with(d, &j);
    ClassReport {
        bi: Verdict::from_bool(bi),
        ubi: Verdict::from_bool(ubi),
        ubi_pd: pd,
        ubi_pd_down: if down.is_found() {
            Verdict::Yes
        } else {
            Verdict::Inconclusive
        },
        semi_unambiguous: Verdict::from_bool(semi),
        unambiguous: Verdict::from_bool(unamb),
        common: j,
        certificates: Certificates {
            ubi_labels,
            ubi_pd: pd_cert,
            ubi_pd_down: down,
            block_cmi: cmi.as_f64(),
            cond_common_entropy: cce.as_f64(),
        },
        tolerances: Tolerances {
            entropy: tol.as_f64(),
            support: R::SUPPORT_EPS,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;
    use crate::common::cond_common_entropy;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    fn noisy_copy() -> Dist3<f64> {
        Dist3::from_fn([2, 2, 1], |x, y, _| if x == y { 0.4 } else { 0.1 }).unwrap()
    }

    fn uniform3() -> Dist3<f64> {
        Dist3::from_fn([2, 2, 2], |_, _, _| 0.125).unwrap()
    }

    #[test]
    fn block_independence() {
        assert!(is_block_independent(&biased_eve_bit(0.25f64).unwrap(), TOL));
        assert!(!is_block_independent(&noisy_copy(), TOL));
        assert!(is_block_independent(&uniform3(), TOL));
    }

    #[test]
    fn ubi_examples() {
        assert!(is_ubi(&biased_eve_bit(0.25f64).unwrap(), TOL));
        assert!(is_ubi(&paired_blocks::<f64>(), TOL));
        assert!(!is_ubi(&block_flip::<f64>(), TOL));
    }

    #[test]
    fn ambiguity_examples() {
        assert!(is_semi_unambiguous(&paired_blocks::<f64>()));
        assert!(!is_semi_unambiguous(&biased_eve_bit(0.25f64).unwrap()));
        assert!(!is_semi_unambiguous(&uniform3()));

        assert!(is_unambiguous(&paired_blocks::<f64>(), TOL));
        let copy4 = Dist3::from_sparse(
            [4, 4, 1],
            &[(0, 0, 0, 0.25f64), (1, 1, 0, 0.25), (2, 2, 0, 0.25), (3, 3, 0, 0.25)],
        )
        .unwrap();
        assert!(is_unambiguous(&copy4, TOL));
        // Each XOR slice splits into singleton blocks.
        let xor = Dist3::from_fn([2, 2, 2], |x, y, z| if x ^ y == z { 0.25 } else { 0.0 }).unwrap();
        assert!(is_unambiguous(&xor, TOL));
        let and = Dist3::from_fn([2, 2, 2], |x, y, z| if x & y == z { 0.25 } else { 0.0 }).unwrap();
        assert!(is_semi_unambiguous(&and));
        assert!(!is_unambiguous(&and, TOL));
    }

    #[test]
    fn ubi_pd_examples() {
        assert_eq!(is_ubi_pd(&paired_blocks::<f64>(), TOL).0, Verdict::Yes);
        assert_eq!(is_ubi_pd(&biased_eve_bit(0.25f64).unwrap(), TOL).0, Verdict::Yes);
        assert_eq!(is_ubi_pd(&block_flip::<f64>(), TOL).0, Verdict::Inconclusive);
        assert_eq!(is_ubi_pd(&noisy_copy(), TOL).0, Verdict::No);
    }

    #[test]
    fn rgs_order_and_counts() {
        let mut seen = Vec::new();
        for k in (1..=3).rev() {
            for_each_rgs(3, k, &mut |s| {
                seen.push(s.to_vec());
                false
            });
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1, 2],
                vec![0, 0, 1],
                vec![0, 1, 0],
                vec![0, 1, 1],
                vec![0, 0, 0]
            ]
        );
        let mut bell5 = 0;
        for k in 1..=5 {
            for_each_rgs(5, k, &mut |_| {
                bell5 += 1;
                false
            });
        }
        assert_eq!(bell5, 52);
    }

    #[test]
    fn down_search() {
        let r = is_ubi_pd_down(&paired_blocks::<f64>(), TOL, DEFAULT_BUDGET);
        assert!(matches!(r, DownResult::Found { ref map, tested: 1, .. } if map == &[0, 1]));
        let r = is_ubi_pd_down(&biased_eve_bit(0.25f64).unwrap(), TOL, DEFAULT_BUDGET);
        assert!(matches!(r, DownResult::Found { tested: 1, .. }));

        let w = merge_witness::<f64>();
        assert!(!is_block_independent(&w, TOL));
        match is_ubi_pd_down(&w, TOL, DEFAULT_BUDGET) {
            DownResult::Found { map, out_dim, tested } => {
                assert_eq!(map, vec![0, 0, 1]);
                assert_eq!(out_dim, 2);
                assert!(tested >= 2);
            }
            other => panic!("expected a merge channel, got {other:?}"),
        }
        let r = is_ubi_pd_down(&noisy_copy(), TOL, DEFAULT_BUDGET);
        assert!(matches!(r, DownResult::Inconclusive { tested: 1, budget_exhausted: false }));
        let r = is_ubi_pd_down(&w, TOL, 1);
        assert!(matches!(r, DownResult::Inconclusive { tested: 1, budget_exhausted: true }));
    }

    #[test]
    fn classify_examples() {
        let r = classify(&paired_blocks::<f64>(), TOL, DEFAULT_BUDGET);
        for v in [r.bi, r.ubi, r.ubi_pd, r.ubi_pd_down, r.semi_unambiguous, r.unambiguous] {
            assert_eq!(v, Verdict::Yes);
        }
        let r = classify(&biased_eve_bit(0.25f64).unwrap(), TOL, DEFAULT_BUDGET);
        assert!(r.ubi.is_yes() && r.ubi_pd.is_yes() && r.ubi_pd_down.is_yes());
        assert_eq!(r.semi_unambiguous, Verdict::No);
        let r = classify(&uniform3(), TOL, DEFAULT_BUDGET);
        assert!(r.bi.is_yes() && r.ubi.is_yes());
        assert_eq!(r.semi_unambiguous, Verdict::No);
        assert!(r.nesting_violations().is_empty());
        let v = serde_json::to_value(classify(&block_flip::<f64>(), TOL, 100)).unwrap();
        assert_eq!(v["ubi"], "no");
        assert_eq!(v["ubi_pd"], "inconclusive");
    }

    #[test]
    fn ubi_labels_are_functions_of_each_side() {
        let d = biased_eve_bit(0.25f64).unwrap();
        let j = conditional_common_function(&d);
        let ext = d
            .joint()
            .extend(j.num_labels(), |s| {
                j.global_label(s[2], j.local_block(s[0], s[2]).unwrap()).unwrap()
            });
        assert!(ext.cond_entropy(&[3], &[0]) <= 1e-10);
        assert!(ext.cond_entropy(&[3], &[1]) <= 1e-10);
        assert!(ext.cond_mutual_info(&[0], &[1], &[3, 2]) <= 1e-10);
    }

    fn small_dist() -> impl Strategy<Value = Dist3<f64>> {
        (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(a, b, c)| {
            prop::collection::vec(
                prop_oneof![3 => Just(0.0), 1 => Just(1.0), 1 => 0.01f64..1.0],
                a * b * c,
            )
            .prop_filter("nonzero", |w| w.iter().any(|&v| v > 0.0))
            .prop_map(move |w| {
                let s: f64 = w.iter().sum();
                Dist3::new([a, b, c], w.iter().map(|v| v / s).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn nesting_holds(d in small_dist()) {
            let r = classify(&d, TOL, DEFAULT_BUDGET);
            prop_assert!(r.nesting_violations().is_empty(), "{:?}", r.nesting_violations());
        }

        #[test]
        fn ubi_invariant_under_relabeling(d in small_dist(), s in 0usize..6) {
            let [dx, dy, dz] = d.dims();
            let rot = |n: usize, k: usize| (0..n).map(|i| (i + k) % n).collect::<Vec<_>>();
            let rev = |n: usize| (0..n).rev().collect::<Vec<_>>();
            let q = d.permute(&rot(dx, s), &rev(dy), &rot(dz, s + 1)).unwrap();
            prop_assert_eq!(is_ubi(&d, TOL), is_ubi(&q, TOL));
        }

        #[test]
        fn ubi_doubles_under_product(d in small_dist()) {
            if is_ubi(&d, TOL) {
                let d2 = d.product_power(2, 4096).unwrap();
                prop_assert!(is_ubi(&d2, TOL));
                let diff = cond_common_entropy(&d2) - 2.0 * cond_common_entropy(&d);
                prop_assert!(diff.abs() < 1e-9);
            }
        }
    }
}
