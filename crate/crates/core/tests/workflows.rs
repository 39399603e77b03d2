use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use secrecy_core::catalog::{biased_eve_bit, paired_blocks};
use secrecy_core::classify::{classify, Verdict, DEFAULT_BUDGET};
use secrecy_core::dequantize::{random_tree, verify_equivalence, SimCaps, TreeFile, TreeShape};
use secrecy_core::dist::{self, DistFile};
use secrecy_core::embed::{self, embed_qqq, PhaseFile};
use secrecy_core::entangle::{concurrence, eof_2q};
use secrecy_core::keyrate::kd_class;
use secrecy_core::qlinalg::{self, AnyStateFile};
use secrecy_core::reproduce::{reproduce, ReproId, ReproOptions};
use secrecy_core::{Dist3, PhaseAssignment, QState};

#[test]
fn dense_and_sparse_files_agree() {
    let dense = r#"{"dims":[2,2,2],"p":[[[0.25,0.125],[0,0]],[[0,0],[0.25,0.375]]]}"#;
    let sparse = r#"{"dims":[2,2,2],"entries":[
        {"x":0,"y":0,"z":0,"p":0.25},{"x":0,"y":0,"z":1,"p":0.125},
        {"x":1,"y":1,"z":0,"p":0.25},{"x":1,"y":1,"z":1,"p":0.375}]}"#;
    let a = Dist3::from_json_str(dense).unwrap();
    let b = Dist3::from_json_str(sparse).unwrap();
    assert_eq!(a.probs(), b.probs());
    assert_eq!(a.probs(), biased_eve_bit(0.25).unwrap().probs());
    let back: Dist3 = serde_json::from_str::<DistFile>(&serde_json::to_string(&DistFile::from_dist(&a)).unwrap())
        .unwrap()
        .to_dist()
        .unwrap();
    assert_eq!(back.probs(), a.probs());
}

#[test]
fn malformed_files_are_rejected() {
    for bad in [
        r#"{"dims":[2,1,1],"p":[[[0.5]]]}"#,
        r#"{"dims":[1,1,2],"p":[[[0.7,0.7]]]}"#,
        r#"{"dims":[1,1,1],"entries":[{"x":1,"y":0,"z":0,"p":1}]}"#,
        r#"{"dims":[1,1,1]}"#,
        "[1, 2",
    ] {
        assert!(Dist3::from_json_str(bad).is_err(), "{bad}");
    }
}

#[test]
fn single_and_double_precision_agree() {
    let d64: dist::Dist3<f64> = biased_eve_bit(0.25).unwrap();
    let d32: dist::Dist3<f32> = biased_eve_bit(0.25f32).unwrap();
    let k64 = kd_class(&d64, &classify(&d64, 1e-9, DEFAULT_BUDGET)).unwrap().value;
    let k32 = kd_class(&d32, &classify(&d32, 1e-5, DEFAULT_BUDGET)).unwrap().value;
    assert!((k64 - k32).abs() < 1e-5, "{k64} vs {k32}");
    let r64 = embed_qqq(&d64, &embed::PhaseAssignment::zeros([2, 2, 2]))
        .unwrap()
        .reduced(&[0, 1])
        .unwrap();
    let r32 = embed_qqq(&d32, &embed::PhaseAssignment::zeros([2, 2, 2]))
        .unwrap()
        .reduced(&[0, 1])
        .unwrap();
    let (c64, c32) = (concurrence(&r64).unwrap(), concurrence(&r32).unwrap());
    assert!((c64 - c32 as f64).abs() < 1e-5);
    assert!((c64 - (0.5 + 0.1875f64.sqrt())).abs() < 1e-12);
}

#[test]
fn embedded_state_survives_json() {
    let d: Dist3 = paired_blocks();
    let ph: PhaseAssignment = PhaseFile::default().to_phases(d.dims()).unwrap();
    let psi = embed_qqq(&d, &ph).unwrap();
    let text = serde_json::to_string(&psi).unwrap();
    let back: QState = serde_json::from_str::<AnyStateFile>(&text).unwrap().to_mixed().unwrap();
    assert!(back.rho().max_diff(psi.density().rho()) < 1e-15);
    let rho = psi.density().partial_trace(&[0, 1]).unwrap();
    let text = serde_json::to_string(&rho).unwrap();
    let back: QState = serde_json::from_str::<AnyStateFile>(&text).unwrap().to_mixed().unwrap();
    assert_eq!(back.dims(), &[4, 4]);
    assert!((back.entropy() - 1.0).abs() < 1e-12);
}

#[test]
fn tree_json_round_trip_keeps_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let shape = TreeShape {
        rounds: 2,
        dims: [2, 2],
        outs: [2, 2],
        max_outcomes: 2,
        max_kraus: 2,
    };
    let tree = random_tree::<f64, _>(&shape, &mut rng);
    let text = serde_json::to_string(&tree.to_file()).unwrap();
    let back = TreeFile::from_json_str(&text).unwrap().to_tree::<f64>().unwrap();
    assert_eq!(back.histories(), tree.histories());
    let d: Dist3 = biased_eve_bit(0.4).unwrap();
    let dev = verify_equivalence(&back, &d, 1, &SimCaps::default()).unwrap();
    assert!(dev <= 1e-12, "{dev}");
}

#[test]
fn classification_of_paired_blocks() {
    let d: Dist3 = paired_blocks();
    let rep = classify(&d, 1e-9, DEFAULT_BUDGET);
    assert_eq!(rep.ubi, Verdict::Yes);
    assert_eq!(rep.unambiguous, Verdict::Yes);
    assert!(rep.nesting_violations().is_empty());
    let v = serde_json::to_value(&rep).unwrap();
    assert_eq!(v["ubi"], "yes");
}

#[test]
fn cheap_reproductions_pass() {
    let opts = ReproOptions::default();
    for id in [ReproId::Thm6a, ReproId::Thm6b, ReproId::Lemma] {
        let r = reproduce(id, &opts).unwrap();
        assert!(r.pass, "{}", id.name());
    }
}

#[test]
fn wootters_matches_pure_state_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let psi = qlinalg::random::random_pure::<f64, _>(&[2, 2], &mut rng);
        let s = psi.reduced(&[0]).unwrap().entropy();
        let ef = eof_2q(&psi.density()).unwrap().value;
        assert!((s - ef).abs() < 1e-9);
    }
}
