//! Key rates pinned by source class, entanglement bound chains on the
//! coherent embedding, and classical-versus-quantum advantage reports.

use serde::Serialize;

use crate::catalog::{three_branch, three_branch_phases};
use crate::classify::{classify, ClassReport, DEFAULT_BUDGET};
use crate::common::cond_common_entropy;
use crate::dist::{Channel, Dist3};
use crate::embed::{embed_ccq, embed_cqq, embed_qqq, extension_sigma, PhaseAssignment};
use crate::entangle::{
    eof_2q, eof_numeric, esq_extension_value, rel_ent_upper, EofOptions, Kind, MeasureName,
    MeasureResult, RelEntOptions, OPT_DIM_CAP,
};
use crate::error::{Error, Result};
use crate::qlinalg::{cond_mutual_info_q, cr, mutual_info_q, trace_distance, CMatrix, QState, C};
use crate::scalar::Real;

pub const DEFAULT_CHAIN_TOL: f64 = 2e-2;

/// `Phi_r`: `r` perfectly shared uniform bits as a diagonal state on
/// `[2^r, 2^r]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TargetKeyState {
    pub r: u32,
}

impl TargetKeyState {
    pub fn new(r: u32) -> Self {
        Self { r }
    }

    pub fn size(&self) -> usize {
        1usize << self.r
    }

    pub fn state<R: Real>(&self) -> Result<QState<R>> {
        let s = self.size();
        let w = R::one() / R::from_usize_lossy(s);
        let p: Vec<R> = (0..s * s)
            .map(|i| if i / s == i % s { w } else { R::zero() })
            .collect();
        QState::diagonal(vec![s, s], &p)
    }
}

fn mutual_xy<R: Real>(d: &Dist3<R>) -> R {
    d.joint().mutual_info(&[0], &[1])
}

fn classical_upper<R: Real>(d: &Dist3<R>) -> R {
    let j = d.joint();
    j.mutual_info(&[0], &[1]).min(j.cond_mutual_info(&[0], &[1], &[2]))
}

/// `K_D` from the source class: `H(J|Z)` for UBI-PD, `H(J|Zbar)` after the
/// certified Eve-side channel for UBI-PD-down, otherwise only an interval.
pub fn kd_class<R: Real>(d: &Dist3<R>, report: &ClassReport) -> Result<MeasureResult> {
    if report.ubi_pd.is_yes() {
        return Ok(MeasureResult::new(
            MeasureName::KeyRate,
            cond_common_entropy(d).as_f64(),
            Kind::Exact,
            "H(J|Z)",
        ));
    }
    if let Some(ch) = report.certificates.ubi_pd_down.channel::<R>() {
        let dbar = d.apply_channel_z(&ch)?;
        return Ok(MeasureResult::new(
            MeasureName::KeyRate,
            cond_common_entropy(&dbar).as_f64(),
            Kind::Exact,
            "H(J|Zbar) after an Eve-side channel",
        ));
    }
    let up = classical_upper(d).as_f64();
    let mut m = MeasureResult::new(
        MeasureName::KeyRate,
        up,
        Kind::Inconclusive,
        "no class formula; min(I(X:Y), I(X:Y|Z))",
    );
    m.interval = Some([0.0, up]);
    Ok(m)
}

/// `K_D = I(X:Y)` when Eve's symbol is independent of `XY`.
pub fn kd_independent_eve<R: Real>(d: &Dist3<R>, tol: R) -> Result<MeasureResult> {
    let j = d.joint();
    let leak = j.mutual_info(&[0, 1], &[2]);
    if leak > tol {
        return Err(Error::Precondition(format!(
            "I(XY:Z) = {} exceeds tolerance",
            leak.as_f64()
        )));
    }
    Ok(MeasureResult::new(
        MeasureName::KeyRate,
        mutual_xy(d).as_f64(),
        Kind::Exact,
        "I(X:Y) with independent Eve",
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct ChainOptions {
    pub chain_tol: f64,
    /// Tolerance for comparisons between exactly computed values.
    pub tol: f64,
    pub classify_tol: f64,
    pub budget: usize,
    pub eof: EofOptions,
    pub relent: RelEntOptions,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            chain_tol: DEFAULT_CHAIN_TOL,
            tol: 1e-9,
            classify_tol: 1e-9,
            budget: DEFAULT_BUDGET,
            eof: EofOptions::default(),
            relent: RelEntOptions::default(),
        }
    }
}

impl ChainOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.eof.seed = seed;
        self.relent.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub lhs: String,
    pub rhs: String,
    pub relation: Relation,
    pub lhs_value: f64,
    pub rhs_value: f64,
    /// `lhs - rhs`.
    pub slack: f64,
    pub tol: f64,
    pub pass: bool,
}

impl OrderingCheck {
    fn new(lhs: &str, l: f64, relation: Relation, rhs: &str, r: f64, tol: f64) -> Self {
        let slack = l - r;
        let pass = match relation {
            Relation::AtLeast => slack >= -tol,
            Relation::Equal => slack.abs() <= tol,
        };
        Self {
            lhs: lhs.into(),
            rhs: rhs.into(),
            relation,
            lhs_value: l,
            rhs_value: r,
            slack,
            tol,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub kd_class: MeasureResult,
    pub h_j_given_z: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_entropy: Option<MeasureResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_f: Option<MeasureResult>,
    pub e_sq_bound: MeasureResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_r_bound: Option<MeasureResult>,
    pub orderings: Vec<OrderingCheck>,
    pub pass: bool,
    pub chain_tol: f64,
    pub seed: u64,
    pub classification: ClassReport,
}

/// Quantities computed on `rho^AB = tr_E |Psi_qqq><Psi_qqq|`.
struct EmbeddingBounds {
    e_entropy: Option<MeasureResult>,
    e_f: Option<MeasureResult>,
    e_sq: MeasureResult,
    e_r: Option<MeasureResult>,
    coherent_info: f64,
}

fn embedding_bounds<R: Real>(
    d: &Dist3<R>,
    ph: &PhaseAssignment<R>,
    report: &ClassReport,
    opts: &ChainOptions,
) -> Result<EmbeddingBounds> {
    let psi = embed_qqq(d, ph)?;
    let rho = psi.reduced(&[0, 1])?;
    let [dx, dy, dz] = d.dims();
    let s_ab = rho.entropy();
    let s_b = rho.entropy_of(&[1])?;
    let e_entropy = (s_ab.as_f64() <= 1e-9).then(|| {
        MeasureResult::new(
            MeasureName::EntanglementEntropy,
            s_b.as_f64(),
            Kind::Exact,
            "pure marginal",
        )
    });
    let e_f = if [dx, dy] == [2, 2] {
        Some(eof_2q(&rho)?)
    } else if dx * dy <= OPT_DIM_CAP {
        Some(eof_numeric(&rho, &opts.eof)?)
    } else {
        None
    };
    let e_r = if dx * dy <= OPT_DIM_CAP {
        Some(rel_ent_upper(&rho, &opts.relent)?)
    } else {
        None
    };
    let ch = report
        .certificates
        .ubi_pd_down
        .channel::<R>()
        .unwrap_or_else(|| Channel::identity(dz));
    let sigma = extension_sigma(d, ph, &ch)?;
    let e_sq = MeasureResult::new(
        MeasureName::Squashed,
        esq_extension_value(&sigma)?.as_f64(),
        Kind::UpperBound,
        "classical extension",
    );
    Ok(EmbeddingBounds {
        e_entropy,
        e_f,
        e_sq,
        e_r,
        coherent_info: (s_b - s_ab).max(R::zero()).as_f64(),
    })
}

/// Evaluates the entanglement bound chain on the coherent embedding and
/// checks the orderings the source class guarantees.
pub fn verify_chain<R: Real>(
    d: &Dist3<R>,
    ph: &PhaseAssignment<R>,
    opts: &ChainOptions,
) -> Result<ChainReport> {
    let report = classify(d, R::lit(opts.classify_tol), opts.budget);
    let kd = kd_class(d, &report)?;
    let hjz = cond_common_entropy(d).as_f64();
    let b = embedding_bounds(d, ph, &report, opts)?;
    let tol_of = |m: &MeasureResult| {
        if m.kind == Kind::Exact {
            opts.tol
        } else {
            opts.chain_tol
        }
    };
    let mut orderings = Vec::new();
    if report.ubi_pd_down.is_yes() {
        orderings.push(OrderingCheck::new(
            "K_D",
            kd.value,
            Relation::AtLeast,
            "E_sq_bound",
            b.e_sq.value,
            opts.tol,
        ));
    }
    if report.ubi_pd.is_yes() {
        if let Some(ef) = &b.e_f {
            orderings.push(OrderingCheck::new(
                "K_D",
                kd.value,
                Relation::AtLeast,
                "E_F",
                ef.value,
                tol_of(ef),
            ));
        }
        if report.semi_unambiguous.is_yes() {
            let mut eq = |name: &str, v: f64| {
                orderings.push(OrderingCheck::new(
                    "K_D",
                    kd.value,
                    Relation::Equal,
                    name,
                    v,
                    opts.chain_tol,
                ))
            };
            if let Some(ef) = &b.e_f {
                eq("E_F", ef.value);
            }
            eq("E_sq_bound", b.e_sq.value);
            if let Some(er) = &b.e_r {
                eq("E_r_bound", er.value);
            }
            eq("H(J|Z)", hjz);
        }
    }
    let pass = orderings.iter().all(|o| o.pass);
    Ok(ChainReport {
        kd_class: kd,
        h_j_given_z: hjz,
        e_entropy: b.e_entropy,
        e_f: b.e_f,
        e_sq_bound: b.e_sq,
        e_r_bound: b.e_r,
        orderings,
        pass,
        chain_tol: opts.chain_tol,
        seed: opts.eof.seed,
        classification: report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The classical rate beats every quantum upper bound.
    EveAdvantage,
    /// A quantum lower bound beats the classical rate.
    AbAdvantage,
    /// Both rates pinned and equal.
    NoGap,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdvantageReport {
    pub classical: MeasureResult,
    pub classical_interval: [f64; 2],
    pub quantum_interval: [f64; 2],
    pub quantum_upper_sources: Vec<MeasureResult>,
    pub quantum_lower_method: String,
    /// Classical minus quantum, when both are pinned.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub direction: Direction,
    pub tol: f64,
}

/// Compares the classical key rate with bounds on the key rate of the
/// coherent embedding; a direction is declared only when the intervals
/// separate by more than the tolerance.
pub fn advantage_report<R: Real>(
    d: &Dist3<R>,
    ph: &PhaseAssignment<R>,
    opts: &ChainOptions,
) -> Result<AdvantageReport> {
    let report = classify(d, R::lit(opts.classify_tol), opts.budget);
    let mut classical = kd_class(d, &report)?;
    if classical.kind != Kind::Exact {
        if let Ok(m) = kd_independent_eve(d, R::lit(opts.classify_tol)) {
            classical = m;
        }
    }
    let c_int = match classical.interval {
        Some(i) if classical.kind != Kind::Exact => i,
        _ => [classical.value, classical.value],
    };
    let b = embedding_bounds(d, ph, &report, opts)?;
    let mut sources = vec![b.e_sq.clone()];
    sources.extend(b.e_r.clone());
    sources.extend(b.e_f.clone());
    let mut q_upper = sources.iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
    let mut q_lower = b.coherent_info;
    let mut lower_method = "coherent information".to_string();
    // reversible and semi-unambiguous sources have equal classical and
    // quantum rates
    if classical.kind == Kind::Exact
        && report.ubi_pd_down.is_yes()
        && report.semi_unambiguous.is_yes()
    {
        q_lower = q_lower.max(classical.value);
        q_upper = q_upper.min(classical.value);
        lower_method = "equal to the classical rate for this class".into();
    }
    if q_lower >= q_upper - opts.tol {
        // pinned up to tolerance
        q_upper = q_upper.max(q_lower);
    }
    let tol = opts.tol;
    let c_pinned = c_int[1] - c_int[0] <= tol;
    let q_pinned = q_upper - q_lower <= tol;
    let direction = if c_int[0] > q_upper + tol {
        Direction::EveAdvantage
    } else if q_lower > c_int[1] + tol {
        Direction::AbAdvantage
    } else if c_pinned && q_pinned {
        Direction::NoGap
    } else {
        Direction::Indeterminate
    };
    Ok(AdvantageReport {
        classical,
        classical_interval: c_int,
        quantum_interval: [q_lower, q_upper],
        quantum_upper_sources: sources,
        quantum_lower_method: lower_method,
        gap: (c_pinned && q_pinned).then(|| c_int[0] - q_lower),
        direction,
        tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaRow {
    pub embedding: String,
    pub bound: f64,
    pub bound_method: String,
    /// Same bound on the embedding obtained by actually dephasing the
    /// coherent state.
    pub bound_dephased_embedding: f64,
    pub achievable: f64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
    /// Trace distance between the listed partially classical state and the
    /// dephasing of the coherent state.
    pub listed_vs_dephased: [f64; 2],
    pub tol: f64,
    pub pass: bool,
}

fn diag4(idx: &[usize]) -> CMatrix<f64> {
    let mut v = vec![0.0; 4];
    for &i in idx {
        v[i] = 1.0;
    }
    CMatrix::diag(&v)
}

fn ket_outer(v: &[C<f64>]) -> CMatrix<f64> {
    CMatrix::outer(v, v)
}

fn e_proj(z: usize) -> CMatrix<f64> {
    let mut v = vec![0.0; 3];
    v[z] = 1.0;
    CMatrix::diag(&v)
}

/// Two-letter product kets `|a b>` on `4 x 4`, with `b` given as a vector.
fn ab_ket(a: usize, b: &[C<f64>]) -> Vec<C<f64>> {
    let mut v = vec![cr(0.0); 16];
    for (j, &bj) in b.iter().enumerate() {
        v[a * 4 + j] = bj;
    }
    v
}

fn plus_minus(sign: f64) -> Vec<C<f64>> {
    let s = 0.5f64.sqrt();
    vec![cr(s), cr(sign * s), cr(0.0), cr(0.0)]
}

/// The partially classical states of the three-branch source as listed,
/// with `Phi_2` the one-bit key state. The four-term product branches carry
/// weight `1/12` per term so the states have unit trace.
fn listed_states() -> Result<(QState<f64>, QState<f64>)> {
    let phi2 = TargetKeyState::new(1).state::<f64>()?;
    // Phi_2 padded from 2x2 into 4x4
    let key = CMatrix::from_fn(16, 16, |i, j| {
        let (a, b, a2, b2) = (i / 4, i % 4, j / 4, j % 4);
        if a < 2 && b < 2 && a2 < 2 && b2 < 2 {
            phi2.rho()[(a * 2 + b, a2 * 2 + b2)]
        } else {
            cr(0.0)
        }
    });
    let z0 = key.scale_re(1.0 / 3.0).kron(&e_proj(0));
    let z1 = diag4(&[0, 1]).kron(&diag4(&[2, 3])).scale_re(1.0 / 12.0).kron(&e_proj(1));
    let coherent_b = &ket_outer(&ab_ket(2, &plus_minus(1.0))) + &ket_outer(&ab_ket(3, &plus_minus(-1.0)));
    let cqq_z2 = coherent_b.scale_re(1.0 / 6.0).kron(&e_proj(2));
    let ccq_z2 = diag4(&[2, 3]).kron(&diag4(&[0, 1])).scale_re(1.0 / 12.0).kron(&e_proj(2));
    let cqq = QState::new(vec![4, 4, 3], &(&z0 + &z1) + &cqq_z2)?;
    let ccq = QState::new(vec![4, 4, 3], &(&z0 + &z1) + &ccq_z2)?;
    Ok((cqq, ccq))
}

/// Key extracted by the subspace protocol: both parties project onto
/// `{0,1}` or `{2,3}`; a party holding `{0,1}` opposite a `{2,3}` partner
/// measures `{+,-}`, everyone else measures the computational basis. Each
/// branch yields `max(0, I(A:B) - I(A:E))` on the measured state.
pub fn subspace_protocol_rate(state: &QState<f64>) -> Result<f64> {
    if state.dims() != [4, 4, 3] {
        return Err(Error::DimensionMismatch("expected dims [4, 4, 3]".into()));
    }
    let basis = |mine: usize, other: usize| -> Vec<Vec<C<f64>>> {
        let unit = |i: usize| -> Vec<C<f64>> {
            (0..4).map(|k| cr(if k == i { 1.0 } else { 0.0 })).collect()
        };
        match (mine, other) {
            (1, _) => vec![unit(2), unit(3)],
            (0, 1) => vec![plus_minus(1.0), plus_minus(-1.0)],
            _ => vec![unit(0), unit(1)],
        }
    };
    let rho = state.rho();
    let mut total = 0.0;
    for ab in 0..2 {
        for bb in 0..2 {
            let ka = basis(ab, bb);
            let kb = basis(bb, ab);
            let mut m = CMatrix::zeros(12, 12);
            for i in 0..2 {
                for j in 0..2 {
                    let v: Vec<C<f64>> = ka[i]
                        .iter()
                        .flat_map(|&x| kb[j].iter().map(move |&y| x * y))
                        .collect();
                    let o = (i * 2 + j) * 3;
                    for e in 0..3 {
                        for e2 in 0..3 {
                            let mut acc = cr(0.0);
                            for k in 0..16 {
                                for l in 0..16 {
                                    acc += v[k].conj() * rho[(k * 3 + e, l * 3 + e2)] * v[l];
                                }
                            }
                            m[(o + e, o + e2)] = acc;
                        }
                    }
                }
            }
            let p = m.trace().re;
            if p <= 1e-14 {
                continue;
            }
            let s = QState::new(vec![2, 2, 3], m.scale_re(1.0 / p))?;
            let r = mutual_info_q(&s, &[0], &[1])? - mutual_info_q(&s, &[0], &[2])?;
            total += p * r.max(0.0);
        }
    }
    Ok(total)
}

/// Key-rate bounds for the three-branch source under the qqq, cqq and ccq
/// embeddings, with the subspace protocol's achievable rates.
pub fn lemma_example_rates() -> Result<LemmaReport> {
    let tol = 1e-9;
    let d = three_branch::<f64>();
    let ph = three_branch_phases::<f64>();
    let qqq = embed_qqq(&d, &ph)?.density();
    let (cqq, ccq) = listed_states()?;
    let true_cqq = embed_cqq(&d, &ph)?;
    let true_ccq = embed_ccq(&d, &ph)?;
    let cmi_eve_dephased =
        |s: &QState<f64>| -> Result<f64> { cond_mutual_info_q(&s.dephase(2)?, &[0], &[1], &[2]) };
    let q_bound = esq_extension_value(&qqq.dephase(2)?)?;
    let rows_in = [
        ("qqq", q_bound, "1/2 I(A:B|E) with Eve dephased", q_bound, &qqq, 1.0),
        (
            "cqq",
            cmi_eve_dephased(&cqq)?,
            "I(A:B|E), Eve classical",
            cmi_eve_dephased(&true_cqq)?,
            &cqq,
            2.0 / 3.0,
        ),
        (
            "ccq",
            cmi_eve_dephased(&ccq)?,
            "I(A:B|E), Eve classical",
            cmi_eve_dephased(&true_ccq)?,
            &ccq,
            1.0 / 3.0,
        ),
    ];
    let mut rows = Vec::new();
    for (name, bound, method, deph, state, expected) in rows_in {
        let achievable = subspace_protocol_rate(state)?;
        rows.push(LemmaRow {
            embedding: name.into(),
            bound,
            bound_method: method.into(),
            bound_dephased_embedding: deph,
            achievable,
            expected,
            pass: (bound - expected).abs() <= tol && (achievable - expected).abs() <= tol,
        });
    }
    let listed_vs_dephased = [
        trace_distance(&cqq, &true_cqq)?,
        trace_distance(&ccq, &true_ccq)?,
    ];
    let pass = rows.iter().all(|r| r.pass);
    Ok(LemmaReport {
        rows,
        listed_vs_dephased,
        tol,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{biased_eve_bit, independent_eve_z, paired_blocks, shared_bit};
    use crate::dist::{binary_entropy, DEFAULT_PRODUCT_CAP};
    use crate::entangle::eof_from_concurrence;
    use proptest::prelude::*;

    fn quick() -> ChainOptions {
        let mut o = ChainOptions::default();
        o.eof.restarts = 4;
        o.relent.restarts = 2;
        o
    }

    fn report(d: &Dist3<f64>) -> ClassReport {
        classify(d, 1e-9, DEFAULT_BUDGET)
    }

    #[test]
    fn target_state_is_maximally_correlated() {
        let s = TargetKeyState::new(2).state::<f64>().unwrap();
        assert_eq!(s.dims(), &[4, 4]);
        let diag = s.diagonal_entries();
        for (i, v) in diag.iter().enumerate() {
            let want = if i / 4 == i % 4 { 0.25 } else { 0.0 };
            assert_eq!(*v, want);
        }
        assert!(s.is_diagonal(0.0));
    }

    #[test]
    fn class_rate_of_biased_eve_bit() {
        for lam in [0.0, 0.1, 0.25, 0.4, 0.5] {
            let d = biased_eve_bit(lam).unwrap();
            let k = kd_class(&d, &report(&d)).unwrap();
            assert_eq!(k.kind, Kind::Exact);
            let oracle = (1.0 + binary_entropy(lam).unwrap()) / 2.0;
            assert!((k.value - oracle).abs() < 1e-12, "{lam}");
        }
    }

    #[test]
    fn class_rate_paired_blocks_and_non_bi() {
        let d = paired_blocks::<f64>();
        assert!((kd_class(&d, &report(&d)).unwrap().value - 1.0).abs() < 1e-12);
        let d = independent_eve_z::<f64>();
        let k = kd_class(&d, &report(&d)).unwrap();
        assert_eq!(k.kind, Kind::Inconclusive);
        let iv = k.interval.unwrap();
        assert!(iv[0] == 0.0 && iv[1] > 0.3);
    }

    #[test]
    fn independent_eve_rates() {
        let d = independent_eve_z::<f64>();
        // H(X) + H(Y) - H(XY) = 1 + h(1/4) - 3/2
        let h = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        let oracle = h - 0.5;
        let v = kd_independent_eve(&d, 1e-9).unwrap().value;
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.3112781245).abs() < 1e-9);
        assert!((kd_independent_eve(&shared_bit::<f64>(), 1e-9).unwrap().value - 1.0).abs() < 1e-12);
        let indep = Dist3::<f64>::from_fn([2, 2, 1], |_, _, _| 0.25).unwrap();
        assert!(kd_independent_eve(&indep, 1e-9).unwrap().value.abs() < 1e-12);
        assert!(kd_independent_eve(&biased_eve_bit(0.25).unwrap(), 1e-9).is_err());
    }

    #[test]
    fn chain_on_paired_blocks() {
        let d = paired_blocks::<f64>();
        let r = verify_chain(&d, &PhaseAssignment::zeros(d.dims()), &quick()).unwrap();
        assert!(r.pass, "{:#?}", r.orderings);
        assert!((r.e_sq_bound.value - 1.0).abs() < 1e-9);
        assert!(r.orderings.iter().any(|o| o.rhs == "E_r_bound"));
        assert!(r.orderings.len() >= 5);
    }

    #[test]
    fn chain_on_biased_eve_bit() {
        let d = biased_eve_bit(0.25).unwrap();
        let r = verify_chain(&d, &PhaseAssignment::zeros(d.dims()), &quick()).unwrap();
        assert!(r.pass);
        let ef = r.e_f.as_ref().unwrap();
        assert_eq!(ef.kind, Kind::Exact);
        let c = 0.5 + (0.25f64 * 0.75).sqrt();
        assert!((ef.value - eof_from_concurrence(c)).abs() < 1e-9);
        let o = r.orderings.iter().find(|o| o.rhs == "E_F").unwrap();
        assert!(o.slack > 1e-3);
        assert!(!r.orderings.iter().any(|o| o.relation == Relation::Equal));
    }

    #[test]
    fn chain_on_product_source_is_all_zero() {
        let d = Dist3::<f64>::from_fn([2, 2, 2], |_, _, _| 0.125).unwrap();
        let r = verify_chain(&d, &PhaseAssignment::zeros(d.dims()), &quick()).unwrap();
        assert!(r.pass);
        assert!(r.kd_class.value.abs() < 1e-12);
        assert!(r.e_f.unwrap().value.abs() < 1e-9);
        assert!(r.e_sq_bound.value.abs() < 1e-9);
        // the pure product state sits at the mixing floor -log2(1 - w (1 - 1/d))
        let w = crate::entangle::REL_ENT_MIX;
        let floor = -(1.0 - w * 0.75f64).log2();
        let er = r.e_r_bound.unwrap().value;
        assert!(er >= floor - 1e-12 && er <= floor + 1e-9, "{er:e}");
    }

    #[test]
    fn advantage_directions() {
        let d = biased_eve_bit(0.25).unwrap();
        let a = advantage_report(&d, &PhaseAssignment::zeros(d.dims()), &quick()).unwrap();
        assert_eq!(a.direction, Direction::EveAdvantage);

        let d = independent_eve_z::<f64>();
        let a = advantage_report(&d, &PhaseAssignment::zeros(d.dims()), &quick()).unwrap();
        assert_eq!(a.direction, Direction::AbAdvantage);
        assert!((a.quantum_interval[0] - 0.6008760366928562).abs() < 1e-9);

        let d = paired_blocks::<f64>();
        let a = advantage_report(&d, &PhaseAssignment::zeros(d.dims()), &quick()).unwrap();
        assert_eq!(a.direction, Direction::NoGap);
        assert!(a.gap.unwrap().abs() < 1e-9);
    }

    #[test]
    fn lemma_rates() {
        let r = lemma_example_rates().unwrap();
        assert!(r.pass, "{:#?}", r.rows);
        let dephased: Vec<f64> = r.rows.iter().map(|x| x.bound_dephased_embedding).collect();
        assert!((dephased[1] - 1.0).abs() < 1e-9);
        assert!((dephased[2] - 1.0 / 3.0).abs() < 1e-9);
        assert!(r.listed_vs_dephased[0] > 0.1);
    }

    #[test]
    fn strict_gap_on_lambda_grid() {
        for lam in [0.1, 0.2, 0.25, 0.3, 0.4] {
            let d = biased_eve_bit(lam).unwrap();
            let k = kd_class(&d, &report(&d)).unwrap().value;
            let rho = embed_qqq(&d, &PhaseAssignment::zeros(d.dims()))
                .unwrap()
                .reduced(&[0, 1])
                .unwrap();
            assert!(k - eof_2q(&rho).unwrap().value > 0.0, "{lam}");
        }
    }

    #[test]
    fn channel_extension_bound_can_exceed_rate() {
        // merged branch: 3/4 |phi><phi| + 1/4 |10><10| with
        // phi = (|00> + |01> + |11>)/sqrt 3; I(A:B) = h(1/4) there (numpy)
        let d = crate::catalog::merge_witness::<f64>();
        let r = report(&d);
        assert!(r.ubi_pd_down.is_yes() && !r.ubi_pd.is_yes());
        let k = kd_class(&d, &r).unwrap().value;
        assert!((k - 0.5).abs() < 1e-12);
        let ch = r.certificates.ubi_pd_down.channel::<f64>().unwrap();
        let s = extension_sigma(&d, &PhaseAssignment::zeros(d.dims()), &ch).unwrap();
        let bound = esq_extension_value(&s).unwrap();
        assert!((bound - 0.7028195311147832).abs() < 1e-9);
        let chain = verify_chain(&d, &PhaseAssignment::zeros(d.dims()), &quick()).unwrap();
        let o = chain.orderings.iter().find(|o| o.rhs == "E_sq_bound").unwrap();
        assert!(!o.pass && (o.slack + 0.2028195311147832).abs() < 1e-9);
    }

    fn small_dist() -> impl Strategy<Value = Dist3<f64>> {
        (1usize..=3, 1usize..=3, 1usize..=2).prop_flat_map(|(a, b, c)| {
            prop::collection::vec(prop_oneof![Just(0.0), 0.05f64..1.0], a * b * c).prop_filter_map(
                "nonzero",
                move |w| {
                    let t: f64 = w.iter().sum();
                    (t > 0.0).then(|| {
                        Dist3::new([a, b, c], w.iter().map(|v| v / t).collect()).unwrap()
                    })
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ubi_rate_is_additive(d in small_dist()) {
            let r = report(&d);
            if r.ubi.is_yes() {
                let k1 = kd_class(&d, &r).unwrap().value;
                let d2 = d.product_power(2, DEFAULT_PRODUCT_CAP).unwrap();
                let k2 = kd_class(&d2, &report(&d2)).unwrap().value;
                prop_assert!((k2 - 2.0 * k1).abs() < 1e-9);
            }
        }

        #[test]
        fn reversible_rate_dominates_extension_bound(d in small_dist()) {
            let r = report(&d);
            if r.ubi_pd_down.is_yes() {
                let k = kd_class(&d, &r).unwrap().value;
                let ch = r.certificates.ubi_pd_down.channel::<f64>().unwrap();
                let s = extension_sigma(&d, &PhaseAssignment::zeros(d.dims()), &ch).unwrap();
                prop_assert!(k + 1e-9 >= esq_extension_value(&s).unwrap());
            }
        }
    }
}
