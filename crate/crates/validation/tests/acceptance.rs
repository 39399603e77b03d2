//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use secrecy_core::catalog::{biased_eve_bit, independent_eve_z};
use secrecy_core::classify::{classify, DEFAULT_BUDGET};
use secrecy_core::common::cond_common_entropy;
use secrecy_core::dequantize::{random_tree, verify_equivalence, SimCaps, TreeShape};
use secrecy_core::embed::{embed_ccc, embed_ccq, embed_cqq, embed_qqq};
use secrecy_core::entangle::{eof_2q, eof_numeric, EofOptions};
use secrecy_core::keyrate::{kd_class, kd_independent_eve, lemma_example_rates, verify_chain, ChainOptions};
use secrecy_core::qlinalg::random::{random_density, random_unitary};
use secrecy_core::reproduce::{reproduce, ReproId, ReproOptions};
use secrecy_core::{Dist3, PhaseAssignment, QState};
use secrecy_validation::{eof_parity_state, h2, random_pmf, shannon};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Check) -> Check {
    let t = Instant::now();
    let r = f();
    let el = t.elapsed();
    match (r, limit) {
        (Ok(msg), Some(l)) if el >= l => Err(format!("{msg}; too slow: {el:.2?} >= {l:?}")),
        (Ok(msg), _) => Ok(format!("{msg}; {el:.2?}")),
        (Err(e), _) => Err(format!("{e}; {el:.2?}")),
    }
}

fn c1_biased_bit_rates() -> Check {
    let mut max_gap: f64 = 0.0;
    for lam in [0.0, 0.1, 0.25, 0.4, 0.5] {
        let d: Dist3 = biased_eve_bit(lam).map_err(|e| e.to_string())?;
        let rep = classify(&d, 1e-9, DEFAULT_BUDGET);
        let k = kd_class(&d, &rep).map_err(|e| e.to_string())?.value;
        let k_ref = (1.0 + h2(lam)) / 2.0;
        ensure((k - k_ref).abs() <= 1e-9, || format!("K_D({lam}) = {k}, want {k_ref}"))?;
        let rho = embed_qqq(&d, &PhaseAssignment::zeros(d.dims()))
            .and_then(|s| s.reduced(&[0, 1]))
            .map_err(|e| e.to_string())?;
        let ef = eof_2q(&rho).map_err(|e| e.to_string())?.value;
        // rho^AB lives on span{|00>, |11>}
        let coh: f64 = (0..2).map(|z| (d.get(0, 0, z) * d.get(1, 1, z)).sqrt()).sum();
        let ef_ref = eof_parity_state(coh);
        ensure((ef - ef_ref).abs() <= 1e-6, || format!("E_F({lam}) = {ef}, want {ef_ref}"))?;
        if lam > 0.0 && lam < 0.5 {
            ensure(k > ef, || format!("K_D <= E_F at {lam}"))?;
            max_gap = max_gap.max(k - ef);
        } else if lam == 0.5 {
            ensure((k - 1.0).abs() <= 1e-9 && (ef - 1.0).abs() <= 1e-6, || {
                format!("at 1/2: K_D = {k}, E_F = {ef}")
            })?;
        }
    }
    Ok(format!("largest K_D - E_F {max_gap:.6}"))
}

fn c2_independent_eve() -> Check {
    let d: Dist3 = independent_eve_z();
    let i = kd_independent_eve(&d, 1e-9).map_err(|e| e.to_string())?.value;
    let xy = d.marginal_xy();
    let i_ref = shannon(&xy.marginal_a()) + shannon(&xy.marginal_b()) - shannon(xy.probs());
    ensure((i - i_ref).abs() <= 1e-12, || format!("I(X:Y) {i} vs oracle {i_ref}"))?;
    ensure((i - 0.3113).abs() <= 1e-3, || format!("I(X:Y) = {i}"))?;
    let s_b = embed_qqq(&d, &PhaseAssignment::zeros(d.dims()))
        .and_then(|s| s.reduced(&[1]))
        .map_err(|e| e.to_string())?
        .entropy();
    let r = 0.5f64.sqrt();
    let s_ref = shannon(&[(1.0 + r) / 2.0, (1.0 - r) / 2.0]);
    ensure((s_b - 0.6009).abs() <= 1e-3 && (s_b - s_ref).abs() <= 1e-9, || {
        format!("S(B) = {s_b}, oracle {s_ref}")
    })?;
    ensure(s_b > i, || "no gap".into())?;
    let rep = reproduce(ReproId::Thm6b, &ReproOptions::default()).map_err(|e| e.to_string())?;
    ensure(rep.pass && !rep.notes.is_empty(), || "report missing the text note".into())?;
    Ok(format!("I(X:Y) {i:.6}, S(B) {s_b:.6}, text discrepancy noted"))
}

fn c3_lemma() -> Check {
    let rep = lemma_example_rates().map_err(|e| e.to_string())?;
    let want = [1.0, 2.0 / 3.0, 1.0 / 3.0];
    ensure(rep.rows.len() == 3, || format!("{} rows", rep.rows.len()))?;
    for (row, w) in rep.rows.iter().zip(want) {
        ensure((row.bound - w).abs() <= 1e-9, || {
            format!("{}: bound {} want {w}", row.embedding, row.bound)
        })?;
    }
    ensure(rep.pass, || "lemma report fails".into())?;
    let b: Vec<String> = rep.rows.iter().map(|r| format!("{:.9}", r.bound)).collect();
    Ok(format!("bounds {}", b.join(", ")))
}

fn c4_paired_blocks_chain() -> Check {
    let d: Dist3 = Dist3::from_fn([4, 4, 2], |x, y, z| {
        if x == y && z == x / 2 {
            0.25
        } else {
            0.0
        }
    })
    .map_err(|e| e.to_string())?;
    let opts = ChainOptions::default();
    ensure(opts.eof.restarts == 32, || "expected 32 restarts".into())?;
    let rep = verify_chain(&d, &PhaseAssignment::zeros(d.dims()), &opts).map_err(|e| e.to_string())?;
    let cls = &rep.classification;
    ensure(cls.ubi.is_yes() && cls.semi_unambiguous.is_yes(), || "classification".into())?;
    let k = rep.kd_class.value;
    let hjz = cond_common_entropy(&d);
    ensure((k - 1.0).abs() <= 1e-9 && (hjz - 1.0).abs() <= 1e-9, || format!("K_D {k}, H(J|Z) {hjz}"))?;
    let ef = rep.e_f.as_ref().ok_or("no E_F")?.value;
    let er = rep.e_r_bound.as_ref().ok_or("no E_r")?.value;
    let esq = rep.e_sq_bound.value;
    ensure((ef - 1.0).abs() <= 2e-2, || format!("E_F {ef}"))?;
    ensure((er - 1.0).abs() <= 2e-2, || format!("E_r {er}"))?;
    ensure((esq - 1.0).abs() <= 1e-9, || format!("E_sq bound {esq}"))?;
    ensure(rep.pass, || "chain orderings fail".into())?;
    Ok(format!("E_F {ef:.9}, E_r {er:.9}, E_sq {esq:.9}"))
}

fn c5_dequantization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let caps = SimCaps::default();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let d = random_pmf(&mut rng, [2, 2, 2], 0.8);
        for _ in 0..5 {
            let shape = TreeShape {
                rounds: 2 * rng.gen_range(0..=1),
                dims: [2, 2],
                outs: [rng.gen_range(1..=2), rng.gen_range(1..=2)],
                max_outcomes: 3,
                max_kraus: 2,
            };
            let tree = random_tree::<f64, _>(&shape, &mut rng);
            let dev = verify_equivalence(&tree, &d, 1, &caps).map_err(|e| e.to_string())?;
            worst = worst.max(dev);
            ensure(dev <= 1e-9, || format!("deviation {dev:e} for {shape:?}"))?;
        }
    }
    Ok(format!("50 trees, worst deviation {worst:.3e}"))
}

fn c6_classifier() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut ubi = 0;
    for i in 0..1000 {
        let dims = [rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3)];
        let density = rng.gen_range(0.2..0.7);
        let d = random_pmf(&mut rng, dims, density);
        let rep = classify(&d, 1e-9, DEFAULT_BUDGET);
        let v = rep.nesting_violations();
        ensure(v.is_empty(), || format!("instance {i}: {v:?}"))?;
        if rep.ubi.is_yes() {
            ubi += 1;
            let k = kd_class(&d, &rep).map_err(|e| e.to_string())?.value;
            let dd = d.tensor(&d);
            let k2 = kd_class(&dd, &classify(&dd, 1e-9, DEFAULT_BUDGET)).map_err(|e| e.to_string())?;
            ensure((k2.value - 2.0 * k).abs() <= 1e-9, || {
                format!("instance {i}: K(d x d) {} vs 2K {}", k2.value, 2.0 * k)
            })?;
        }
    }
    ensure(ubi > 0, || "no UBI instances sampled".into())?;
    Ok(format!("1000 instances, {ubi} UBI checked for additivity"))
}

fn c7_dephasing_chain() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let dims = [rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3)];
        let d = random_pmf(&mut rng, dims, 0.7);
        let ph = PhaseAssignment::from_fn(dims, |_, _, _| rng.gen_range(-3.2..3.2)).map_err(|e| e.to_string())?;
        let err = |e: secrecy_core::Error| e.to_string();
        let qqq: QState = embed_qqq(&d, &ph).map_err(err)?.density();
        let cqq = embed_cqq(&d, &ph).map_err(err)?;
        let ccq = embed_ccq(&d, &ph).map_err(err)?;
        let ccc = embed_ccc(&d).map_err(err)?;
        let steps = [
            qqq.dephase(0).map_err(err)?.rho().max_diff(cqq.rho()),
            cqq.dephase(1).map_err(err)?.rho().max_diff(ccq.rho()),
            ccq.dephase(2).map_err(err)?.rho().max_diff(ccc.rho()),
        ];
        for s in steps {
            worst = worst.max(s);
            ensure(s <= 1e-12, || format!("instance {i}: step deviation {s:e}"))?;
        }
        ensure(ccc.diagonal_entries() == d.probs(), || format!("instance {i}: ccc diagonal"))?;
        ensure(ccc.is_diagonal(0.0), || format!("instance {i}: ccc off-diagonal"))?;
    }
    Ok(format!("100 instances, worst step deviation {worst:.3e}"))
}

fn c8_wootters() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let rank = 1 + i % 4;
        let rho: QState = random_density(&[2, 2], rank, &mut rng);
        let u = random_unitary::<f64, _>(4, &mut rng);
        let rho = rho.conjugate_by(&u).map_err(|e| e.to_string())?;
        let exact = eof_2q(&rho).map_err(|e| e.to_string())?.value;
        let opts = EofOptions {
            seed: i as u64,
            ..EofOptions::default()
        };
        let num = eof_numeric(&rho, &opts).map_err(|e| e.to_string())?.value;
        worst = worst.max((num - exact).abs());
        ensure((num - exact).abs() <= 1e-4, || format!("state {i}: {num} vs {exact}"))?;
    }
    Ok(format!("20 states, worst |numeric - Wootters| {worst:.3e}"))
}

fn c9_gap_scaling() -> Check {
    let d: Dist3 = biased_eve_bit(0.25).map_err(|e| e.to_string())?;
    let k = kd_class(&d, &classify(&d, 1e-9, DEFAULT_BUDGET)).map_err(|e| e.to_string())?.value;
    let rho = embed_qqq(&d, &PhaseAssignment::zeros(d.dims()))
        .and_then(|s| s.reduced(&[0, 1]))
        .map_err(|e| e.to_string())?;
    let ef = eof_2q(&rho).map_err(|e| e.to_string())?.value;
    // key rate of n copies computed directly, checked against additivity
    for n in 2..=3 {
        let dn = d.product_power(n, 4096).map_err(|e| e.to_string())?;
        let kn = kd_class(&dn, &classify(&dn, 1e-9, DEFAULT_BUDGET)).map_err(|e| e.to_string())?.value;
        ensure((kn - n as f64 * k).abs() <= 1e-9, || format!("K_D of {n} copies {kn}"))?;
    }
    let gaps: Vec<f64> = (1..=3).map(|n| n as f64 * (k - ef)).collect();
    let lin = gaps.iter().enumerate().all(|(i, g)| (g - (i + 1) as f64 * gaps[0]).abs() <= 1e-12);
    ensure(lin, || format!("gaps not linear: {gaps:?}"))?;
    let mut prev = 0.0;
    for (i, &g) in gaps.iter().enumerate() {
        let slack = g - prev;
        ensure(slack > 0.09, || {
            format!(
                "n = {}: gap {g:.6} grows by {slack:.6} per copy, required > 0.09 \
                 (single-copy gap is K_D {k:.6} - E_F {ef:.6})",
                i + 1
            )
        })?;
        prev = g;
    }
    Ok(format!("gaps {gaps:?}"))
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    type Criterion = (&'static str, Option<Duration>, fn() -> Check);
    let criteria: Vec<Criterion> = vec![
        ("1 biased-bit key rate vs E_F", Some(s(1)), c1_biased_bit_rates),
        ("2 independent-Eve source", Some(s(1)), c2_independent_eve),
        ("3 extension bounds 1, 2/3, 1/3", Some(s(1)), c3_lemma),
        ("4 paired-blocks chain", Some(s(60)), c4_paired_blocks_chain),
        ("5 dequantization equivalence", Some(s(120)), c5_dequantization),
        ("6 classifier nesting and additivity", Some(s(60)), c6_classifier),
        ("7 dephasing chain", Some(s(10)), c7_dephasing_chain),
        ("8 Wootters cross-check", Some(s(60)), c8_wootters),
        ("9 gap scaling", None, c9_gap_scaling),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        match timed(limit, f) {
            Ok(msg) => println!("criterion {name}: PASS ({msg})"),
            Err(msg) => {
                failed += 1;
                println!("criterion {name}: FAIL ({msg})");
            }
        }
    }
    println!("acceptance: {} of 9 criteria failed", failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
