use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use rmcfair::benchmarks;
use rmcfair::encode::{check_annotator, encode_system};
use rmcfair::error::Error;
use rmcfair::oracle::{
    as_reach, compare_encodings, expand, kfair_expand, render_fair_state, render_word, ExplicitMdp,
    Verdict,
};
use rmcfair::proof::{check_proof, resolve_target, RegularProof};
use rmcfair::search::{search, SearchBudget, Status};
use rmcfair::spec::{validate, SystemSpec};

const OK: u8 = 0;
const REFUTED: u8 = 1;
const UNKNOWN: u8 = 2;
const INPUT: u8 = 3;

/// Fairness-aware regular model checking: validate, encode, check and
/// search termination proofs, and cross-check finite instances.
#[derive(Parser)]
#[command(name = "rmcfair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural requirements of a system.
    Validate { spec: String },
    /// Encode the fairness annotator into counters.
    Encode {
        spec: String,
        /// Write the encoded system here instead of standard output.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Write Graphviz drawings of the encoded automata.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Check a regular termination proof.
    CheckProof { spec: String, proof: String },
    /// Explore finite instances explicitly.
    Oracle {
        spec: String,
        /// Instance sizes, comma separated.
        #[arg(long, required = true, value_delimiter = ',')]
        n: Vec<usize>,
        /// Fairness bounds, comma separated; without it the plain instance is used.
        #[arg(long, value_delimiter = ',')]
        kfair: Vec<u8>,
        /// Compare the counter encoding against the k-fair instance.
        #[arg(long, requires = "kfair")]
        compare: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Search for a proof within a state budget.
    Search {
        spec: String,
        #[arg(long, default_value_t = 2)]
        max_inv: usize,
        #[arg(long, default_value_t = 2)]
        max_ord: usize,
        /// Seconds.
        #[arg(long, default_value_t = 60)]
        timeout: u64,
        /// Write the proof here instead of standard output.
        #[arg(long)]
        emit: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the shipped systems and proofs.
    Benchmarks {
        /// Write every shipped file into this directory.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INPUT } else { OK });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Validate { spec } => cmd_validate(&load_spec(&spec)?),
        Command::Encode { spec, emit, dot } => {
            cmd_encode(&load_spec(&spec)?, emit.as_deref(), dot.as_deref())
        }
        Command::CheckProof { spec, proof } => cmd_check(&load_spec(&spec)?, &proof),
        Command::Oracle {
            spec,
            n,
            kfair,
            compare,
            jobs,
        } => cmd_oracle(&load_spec(&spec)?, &n, &kfair, compare, jobs),
        Command::Search {
            spec,
            max_inv,
            max_ord,
            timeout,
            emit,
            jobs,
        } => {
            if max_inv == 0 || max_ord == 0 || jobs == 0 {
                return Err(anyhow!("state bounds and jobs must be positive"));
            }
            let budget = SearchBudget {
                max_inv_states: max_inv,
                max_ord_states: max_ord,
                timeout: Duration::from_secs(timeout),
                jobs,
                ..SearchBudget::default()
            };
            cmd_search(&load_spec(&spec)?, &budget, emit.as_deref())
        }
        Command::Benchmarks { export } => cmd_benchmarks(export.as_deref()),
    }
}

/// A spec file, or the name of a shipped system.
fn load_spec(arg: &str) -> Result<SystemSpec> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return SystemSpec::parse(&text).with_context(|| format!("in {arg}"));
    }
    Ok(benchmarks::benchmark(arg)?)
}

fn load_proof_text(arg: &str) -> Result<String> {
    let path = Path::new(arg);
    if path.exists() {
        return fs::read_to_string(path).with_context(|| format!("reading {arg}"));
    }
    benchmarks::proof_entry(arg)
        .map(|p| p.source.to_string())
        .ok_or_else(|| anyhow!("no file or shipped proof named `{arg}`"))
}

/// Write through a temporary file in the same directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("{} is not a file path", path.display()))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

fn cmd_validate(spec: &SystemSpec) -> Result<u8> {
    let mut violations: Vec<String> = validate(spec)?.iter().map(|v| v.to_string()).collect();
    if let Some(ann) = &spec.fairness {
        if let Some((w0, w1, pos)) = check_annotator(ann)? {
            let r = |w: &[_]| render_word(&spec.alphabet, w);
            violations.push(format!(
                "annotator-kind: `{}` and `{}` get different fairness kinds at position {pos}",
                r(&w0),
                r(&w1)
            ));
        }
    }
    if violations.is_empty() {
        println!("{}: ok", spec.name);
        return Ok(OK);
    }
    for v in &violations {
        println!("{}: {v}", spec.name);
    }
    Ok(REFUTED)
}

fn cmd_encode(spec: &SystemSpec, emit: Option<&Path>, dot: Option<&Path>) -> Result<u8> {
    let enc = match encode_system(spec) {
        Ok(e) => e,
        Err(e @ Error::InconsistentAnnotator { .. }) => {
            println!("{}: {e}", spec.name);
            return Ok(REFUTED);
        }
        Err(e) => return Err(e.into()),
    };
    let text = enc.spec.to_text();
    match emit {
        Some(path) => {
            write_atomic(path, &text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    if let Some(path) = dot {
        let s = &enc.spec;
        let mut out = String::new();
        for (name, nfa) in [
            ("v1", &s.v1),
            ("v2", &s.v2),
            ("init", &s.init),
            ("final", &s.final_),
            ("p1", s.p1.carrier()),
            ("p2", s.p2.carrier()),
        ] {
            let _ = writeln!(out, "{}", nfa.to_dot(&format!("{}.{name}", s.name)));
        }
        write_atomic(path, &out)?;
        println!("wrote {}", path.display());
    }
    Ok(OK)
}

fn cmd_check(spec: &SystemSpec, proof_arg: &str) -> Result<u8> {
    let text = load_proof_text(proof_arg)?;
    let target = resolve_target(spec, &RegularProof::target(&text)?)?;
    let proof = RegularProof::parse(&text, &target.alphabet)?;
    let report = check_proof(&target, &proof)?;
    println!("proof for {}", target.name);
    print!("{}", report.render(&target.alphabet));
    Ok(if report.passed() { OK } else { REFUTED })
}

fn verdict_lines<L>(
    mdp: &ExplicitMdp<L>,
    v: &Verdict,
    render: impl Fn(&L) -> String,
) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(w) = &v.witness {
        for &(s, t) in &w.choices {
            out.push(format!(
                "  choose {} -> {}",
                render(&mdp.labels[s as usize]),
                render(&mdp.labels[t as usize])
            ));
        }
        for &s in &w.trap {
            out.push(format!("  trap {}", render(&mdp.labels[s as usize])));
        }
    }
    out
}

/// One oracle run: its report lines and exit code.
fn oracle_run(
    spec: &SystemSpec,
    n: usize,
    k: Option<u8>,
    compare: bool,
) -> Result<(Vec<String>, u8)> {
    let head = match k {
        Some(k) => format!("n={n} k={k}"),
        None => format!("n={n} plain"),
    };
    let bound = |e: Error| -> Result<(Vec<String>, u8)> {
        match e {
            Error::StateBound { .. } => Ok((vec![format!("{head} unknown: {e}")], UNKNOWN)),
            e => Err(e.into()),
        }
    };
    let alph = &spec.alphabet;
    match (k, compare) {
        (None, _) => match expand(spec, n) {
            Ok(mdp) => {
                let v = as_reach(&mdp);
                let mut lines = vec![format!(
                    "{head} {v} states={} edges={}",
                    mdp.num_states(),
                    mdp.num_edges()
                )];
                lines.extend(verdict_lines(&mdp, &v, |w| render_word(alph, w)));
                Ok((lines, if v.holds { OK } else { REFUTED }))
            }
            Err(e) => bound(e),
        },
        (Some(k), false) => match kfair_expand(spec, n, k) {
            Ok(mdp) => {
                let v = as_reach(&mdp);
                let mut lines = vec![format!(
                    "{head} {v} states={} edges={}",
                    mdp.num_states(),
                    mdp.num_edges()
                )];
                lines.extend(verdict_lines(&mdp, &v, |s| render_fair_state(alph, s)));
                Ok((lines, if v.holds { OK } else { REFUTED }))
            }
            Err(e) => bound(e),
        },
        (Some(k), true) => match compare_encodings(spec, n, k) {
            Ok(c) => Ok(match c.mismatch {
                None => (
                    vec![format!(
                        "{head} compare ok states={} edges={} verdict={}",
                        c.states, c.edges, c.kfair
                    )],
                    OK,
                ),
                Some(m) => (vec![format!("{head} compare mismatch: {m}")], REFUTED),
            }),
            Err(e) => bound(e),
        },
    }
}

fn cmd_oracle(
    spec: &SystemSpec,
    ns: &[usize],
    ks: &[u8],
    compare: bool,
    jobs: usize,
) -> Result<u8> {
    if ks.contains(&0) {
        return Err(anyhow!("--kfair bounds must be positive"));
    }
    let mut runs: Vec<(usize, Option<u8>)> = Vec::new();
    for &n in ns {
        if ks.is_empty() {
            runs.push((n, None));
        }
        for &k in ks {
            runs.push((n, Some(k)));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    let results: Vec<Result<(Vec<String>, u8)>> = pool.install(|| {
        runs.par_iter()
            .map(|&(n, k)| oracle_run(spec, n, k, compare))
            .collect()
    });
    let mut code = OK;
    println!("oracle {}", spec.name);
    for r in results {
        let (lines, c) = r?;
        for l in lines {
            println!("{l}");
        }
        code = match (code, c) {
            (REFUTED, _) | (_, REFUTED) => REFUTED,
            (UNKNOWN, _) | (_, UNKNOWN) => UNKNOWN,
            _ => OK,
        };
    }
    Ok(code)
}

fn cmd_search(spec: &SystemSpec, budget: &SearchBudget, emit: Option<&Path>) -> Result<u8> {
    let target = if spec.fairness.is_some() {
        encode_system(spec)?.spec
    } else {
        spec.clone()
    };
    let out = search(&target, budget)?;
    let stats = &out.stats;
    let summary = format!(
        "checks={} counterexamples={} elapsed={:.2}s",
        stats.checks,
        stats.counterexamples,
        stats.elapsed.as_secs_f64()
    );
    match (out.status, out.proof) {
        (Status::Proved, Some(proof)) => {
            let (ni, no) = out.sizes.unwrap_or_default();
            println!(
                "{}: proved inv-states={ni} ord-states={no} {summary}",
                target.name
            );
            let text = proof.to_text();
            match emit {
                Some(path) => {
                    write_atomic(path, &text)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(OK)
        }
        _ => {
            let why = if stats.timed_out {
                "timeout"
            } else {
                "state bounds exhausted"
            };
            println!(
                "{}: unknown ({why}; max-inv={} max-ord={}) {summary}",
                target.name, budget.max_inv_states, budget.max_ord_states
            );
            Ok(UNKNOWN)
        }
    }
}

fn cmd_benchmarks(export: Option<&Path>) -> Result<u8> {
    for e in benchmarks::entries() {
        println!("{}\t{:?}", e.name, e.kind);
    }
    for p in benchmarks::proofs() {
        println!(
            "{}\tproof for {}\t{}",
            p.name,
            p.system,
            if p.valid { "valid" } else { "broken" }
        );
    }
    if let Some(dir) = export {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for e in benchmarks::entries() {
            write_atomic(&dir.join(format!("{}.spec", e.name)), e.source)?;
        }
        for p in benchmarks::proofs() {
            write_atomic(&dir.join(format!("{}.proof", p.name)), p.source)?;
        }
        println!("exported to {}", dir.display());
    }
    Ok(OK)
}
