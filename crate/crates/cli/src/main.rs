//! `secrecy-forge`: file-based front end for `secrecy-core`.
//!
//! Exit codes: 0 success, 1 a checked property failed, 2 usage or input error.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use secrecy_core::classify::classify;
use secrecy_core::common::{
    common_information, cond_common_entropy, conditional_common_function, maximal_common_partition,
};
use secrecy_core::dequantize::{verify_equivalence, TreeFile};
use secrecy_core::dist::DistFile;
use secrecy_core::embed::{embed_ccc, embed_ccq, embed_cqq, embed_qqq, PhaseFile};
use secrecy_core::entangle::{
    concurrence_2q, entanglement_entropy, eof_numeric, esq_classical_extension_bound,
    negativity_log, rel_ent_upper, MeasureResult,
};
use secrecy_core::keyrate::{advantage_report, kd_class, kd_independent_eve, verify_chain};
use secrecy_core::qlinalg::AnyStateFile;
use secrecy_core::reproduce::{reproduce, ReproId, ReproOptions};
use secrecy_core::{Dist3, PhaseAssignment, PureState, QState};

use config::{expand_tol_flags, Caps, RunConfig};
use report::{read_input, render, InputDigest};

#[derive(Parser)]
#[command(name = "secrecy-forge", version, about = "Secret-key analysis of tripartite distributions")]
struct Cli {
    /// RNG seed for the numeric optimizers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Override a tolerance; written `--tol.<name>=<value>`
    /// (names: chain, classify, eof, equivalence, exact).
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedKind {
    Qqq,
    Cqq,
    Ccq,
    Ccc,
}

#[derive(Subcommand)]
enum Command {
    /// Place a distribution in the block-independence hierarchy.
    Classify {
        #[arg(long)]
        dist: PathBuf,
    },
    /// Common information of X,Y and the conditional common function given Z.
    Commoninfo {
        #[arg(long)]
        dist: PathBuf,
    },
    /// Classical key rate (exact where the class allows, bounds otherwise).
    Keyrate {
        #[arg(long)]
        dist: PathBuf,
        /// Phases of the coherent embedding used by `--advantage`.
        #[arg(long)]
        phases: Option<PathBuf>,
        /// Also compare against bounds for the coherent embedding.
        #[arg(long)]
        advantage: bool,
    },
    /// Quantum state embedding of a distribution.
    Embed {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, value_enum)]
        kind: EmbedKind,
        #[arg(long)]
        phases: Option<PathBuf>,
    },
    /// Entanglement measures of a bipartite state; a third subsystem is
    /// treated as Eve and traced out (or dephased for `esq`).
    Measures {
        #[arg(long)]
        state: PathBuf,
        /// Comma list from: ef, esq, er, neg, conc, ent.
        #[arg(long, default_value = "ef,esq,er,neg")]
        which: String,
    },
    /// Ordering checks between key rate and entanglement measures.
    Chain {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        phases: Option<PathBuf>,
    },
    /// Compare an instrument tree with its classical counterpart.
    DequantizeCheck {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
    /// Recompute a named worked example.
    Reproduce {
        /// thm6a, thm6b, lemma, thm7d, table1 or table2.
        id: String,
        /// Grid for thm6a; repeatable.
        #[arg(long)]
        lambda: Vec<f64>,
    },
}

struct Outcome {
    pass: bool,
    inputs: Vec<InputDigest>,
    result: Value,
}

fn load_dist(path: &Path) -> Result<(Dist3, InputDigest)> {
    let inp = read_input("dist", path)?;
    let f: DistFile = serde_json::from_str(&inp.text)
        .with_context(|| format!("parsing distribution {}", path.display()))?;
    let d = f
        .to_dist()
        .with_context(|| format!("validating distribution {}", path.display()))?;
    Ok((d, inp.digest))
}

fn load_phases(path: Option<&Path>, d: &Dist3) -> Result<(PhaseAssignment, Option<InputDigest>)> {
    let Some(path) = path else {
        return Ok((PhaseAssignment::zeros(d.dims()), None));
    };
    let inp = read_input("phases", path)?;
    let f: PhaseFile = serde_json::from_str(&inp.text)
        .with_context(|| format!("parsing phases {}", path.display()))?;
    let ph = f.to_phases(d.dims()).context("validating phases")?;
    Ok((ph, Some(inp.digest)))
}

/// Accepts a bare state file or an `embed` report wrapping one.
fn load_state(path: &Path) -> Result<(AnyStateFile, InputDigest)> {
    let inp = read_input("state", path)?;
    let mut v: Value = serde_json::from_str(&inp.text)
        .with_context(|| format!("parsing state {}", path.display()))?;
    if let Some(inner) = v.get_mut("result").filter(|r| r.get("dims").is_some()) {
        v = inner.take();
    }
    let f: AnyStateFile = serde_json::from_value(v)
        .with_context(|| format!("{} is not a state file", path.display()))?;
    Ok((f, inp.digest))
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn cmd_classify(cfg: &RunConfig, dist: &Path) -> Result<Outcome> {
    let (d, dg) = load_dist(dist)?;
    let rep = classify(&d, cfg.tol("classify"), cfg.caps.budget);
    let violations = rep.nesting_violations();
    let mut result = to_value(&rep)?;
    result["nesting_violations"] = to_value(&violations)?;
    Ok(Outcome {
        pass: violations.is_empty(),
        inputs: vec![dg],
        result,
    })
}

fn cmd_commoninfo(dist: &Path) -> Result<Outcome> {
    let (d, dg) = load_dist(dist)?;
    let xy = d.marginal_xy();
    let result = json!({
        "common_information_xy": common_information(&xy),
        "partition_xy": to_value(&maximal_common_partition(&xy))?,
        "cond_common_entropy": cond_common_entropy(&d),
        "conditional": to_value(&conditional_common_function(&d))?,
    });
    Ok(Outcome {
        pass: true,
        inputs: vec![dg],
        result,
    })
}

fn cmd_keyrate(cfg: &RunConfig, dist: &Path, phases: Option<&Path>, advantage: bool) -> Result<Outcome> {
    let (d, dg) = load_dist(dist)?;
    let mut inputs = vec![dg];
    let rep = classify(&d, cfg.tol("classify"), cfg.caps.budget);
    let mut result = json!({ "kd_class": to_value(&kd_class(&d, &rep)?)? });
    if let Ok(m) = kd_independent_eve(&d, cfg.tol("classify")) {
        result["kd_independent_eve"] = to_value(&m)?;
    }
    if advantage || phases.is_some() {
        let (ph, pd) = load_phases(phases, &d)?;
        inputs.extend(pd);
        result["advantage"] = to_value(&advantage_report(&d, &ph, &cfg.chain())?)?;
    }
    Ok(Outcome {
        pass: true,
        inputs,
        result,
    })
}

fn cmd_embed(dist: &Path, kind: EmbedKind, phases: Option<&Path>) -> Result<Outcome> {
    let (d, dg) = load_dist(dist)?;
    let mut inputs = vec![dg];
    let (ph, pd) = load_phases(phases, &d)?;
    inputs.extend(pd);
    let result = match kind {
        EmbedKind::Qqq => to_value(&embed_qqq(&d, &ph)?)?,
        EmbedKind::Cqq => to_value(&embed_cqq(&d, &ph)?)?,
        EmbedKind::Ccq => to_value(&embed_ccq(&d, &ph)?)?,
        EmbedKind::Ccc => to_value(&embed_ccc(&d)?)?,
    };
    Ok(Outcome {
        pass: true,
        inputs,
        result,
    })
}

fn cmd_measures(cfg: &RunConfig, state: &Path, which: &str) -> Result<Outcome> {
    let (file, dg) = load_state(state)?;
    let full: QState = file.to_mixed()?;
    let ab = match full.dims().len() {
        2 => full.clone(),
        3 => full.partial_trace(&[0, 1])?,
        n => bail!("expected 2 or 3 subsystems, found {n}"),
    };
    let chain = cfg.chain();
    let mut out: Vec<MeasureResult> = Vec::new();
    for name in which.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m = match name {
            "ef" => eof_numeric(&ab, &chain.eof)?,
            "er" => rel_ent_upper(&ab, &chain.relent)?,
            "neg" => negativity_log(&ab)?,
            "conc" => concurrence_2q(&ab)?,
            "esq" => {
                let ext = if full.dims().len() == 3 {
                    full.dephase(2)?
                } else {
                    full.tensor(&QState::diagonal(vec![1], &[1.0])?)
                };
                esq_classical_extension_bound(&ext)?
            }
            "ent" => {
                let psi: PureState = match &file {
                    AnyStateFile::Pure(p) if p.dims.len() == 2 => p.to_state()?,
                    _ => bail!("ent needs a pure bipartite state"),
                };
                entanglement_entropy(&psi)?
            }
            other => bail!("unknown measure {other:?}; known: ef, esq, er, neg, conc, ent"),
        };
        out.push(m);
    }
    Ok(Outcome {
        pass: true,
        inputs: vec![dg],
        result: to_value(&out)?,
    })
}

fn cmd_chain(cfg: &RunConfig, dist: &Path, phases: Option<&Path>) -> Result<Outcome> {
    let (d, dg) = load_dist(dist)?;
    let mut inputs = vec![dg];
    let (ph, pd) = load_phases(phases, &d)?;
    inputs.extend(pd);
    let rep = verify_chain(&d, &ph, &cfg.chain())?;
    Ok(Outcome {
        pass: rep.pass,
        inputs,
        result: to_value(&rep)?,
    })
}

fn cmd_dequantize_check(cfg: &RunConfig, tree: &Path, dist: &Path, n: usize) -> Result<Outcome> {
    let inp = read_input("tree", tree)?;
    let t: TreeFile = serde_json::from_str(&inp.text)
        .with_context(|| format!("parsing tree {}", tree.display()))?;
    let t = t.to_tree::<f64>().context("validating tree")?;
    let (d, dg) = load_dist(dist)?;
    let tol = cfg.tol("equivalence");
    let dev = verify_equivalence(&t, &d, n, &cfg.caps.sim())?;
    let pass = dev <= tol;
    Ok(Outcome {
        pass,
        inputs: vec![inp.digest, dg],
        result: json!({
            "rounds": t.rounds(),
            "n": n,
            "max_deviation": dev,
            "tol": tol,
            "pass": pass,
        }),
    })
}

fn cmd_reproduce(cfg: &RunConfig, id: &str, lambdas: &[f64]) -> Result<Outcome> {
    let id: ReproId = id.parse()?;
    let mut opts = ReproOptions {
        seed: cfg.seed,
        chain: cfg.chain(),
        caps: cfg.caps.sim(),
        ..ReproOptions::default()
    };
    if !lambdas.is_empty() {
        if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            bail!("--lambda {l} outside [0, 1]");
        }
        opts.lambdas = lambdas.to_vec();
    }
    let rep = reproduce(id, &opts)?;
    Ok(Outcome {
        pass: rep.pass,
        inputs: vec![],
        result: to_value(&rep)?,
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Classify { .. } => "classify",
        Command::Commoninfo { .. } => "commoninfo",
        Command::Keyrate { .. } => "keyrate",
        Command::Embed { .. } => "embed",
        Command::Measures { .. } => "measures",
        Command::Chain { .. } => "chain",
        Command::DequantizeCheck { .. } => "dequantize-check",
        Command::Reproduce { .. } => "reproduce",
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    let cfg = RunConfig::new(cli.seed, &cli.tol, Caps::from_env()?)?;
    let o = match &cli.cmd {
        Command::Classify { dist } => cmd_classify(&cfg, dist)?,
        Command::Commoninfo { dist } => cmd_commoninfo(dist)?,
        Command::Keyrate {
            dist,
            phases,
            advantage,
        } => cmd_keyrate(&cfg, dist, phases.as_deref(), *advantage)?,
        Command::Embed { dist, kind, phases } => cmd_embed(dist, *kind, phases.as_deref())?,
        Command::Measures { state, which } => cmd_measures(&cfg, state, which)?,
        Command::Chain { dist, phases } => cmd_chain(&cfg, dist, phases.as_deref())?,
        Command::DequantizeCheck { tree, dist, n } => cmd_dequantize_check(&cfg, tree, dist, *n)?,
        Command::Reproduce { id, lambda } => cmd_reproduce(&cfg, id, lambda)?,
    };
    let text = render(command_name(&cli.cmd), &cfg, &o.inputs, o.pass, o.result)?;
    match &cli.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(o.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(expand_tol_flags(std::env::args())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
