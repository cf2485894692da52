//! Explicit-state ground truth for fixed instance sizes.
//!
//! Only the support of probabilistic moves is represented: almost-sure
//! reachability does not depend on the actual probabilities.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::alphabet::{Alphabet, Symbol, Word};
use crate::encode::{encode_system_with, EncodedSpec, SigmaTable};
use crate::error::{Error, Result};
use crate::nfa::{Nfa, NfaBuilder};
use crate::spec::{GammaLetter, SystemSpec, GAP, PEBBLE};

/// Default limit on the number of explicit states.
pub const DEFAULT_STATE_BOUND: usize = 2_000_000;

/// Environment variable overriding [`DEFAULT_STATE_BOUND`].
pub const STATE_BOUND_VAR: &str = "RMCFAIR_STATE_BOUND";

pub fn state_bound() -> usize {
    std::env::var(STATE_BOUND_VAR)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_STATE_BOUND)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Player {
    Scheduler,
    Random,
}

/// A finite MDP given by the support of its moves.
#[derive(Clone, Debug)]
pub struct ExplicitMdp<L> {
    pub labels: Vec<L>,
    pub owner: Vec<Player>,
    /// Successors, sorted; scheduler choices for scheduler states, the
    /// support of the distribution for random states.
    pub edges: Vec<Vec<u32>>,
    pub init: Vec<u32>,
    pub finals: Vec<bool>,
}

impl<L> ExplicitMdp<L> {
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }
}

/// A counter valuation: one value in `0..=k` per position.
pub type Valuation = Vec<u8>;

/// State label of the k-fair expansion.
pub type FairState = (Word, Valuation);

/// Outcome of the almost-sure reachability check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub holds: bool,
    /// A memoryless scheduler keeping the run away from the final states
    /// with positive probability; present iff the verdict fails.
    pub witness: Option<Strategy>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strategy {
    /// `(state, chosen successor)` for scheduler states, sorted by state.
    pub choices: Vec<(u32, u32)>,
    /// States of the end component the scheduler steers into, sorted.
    pub trap: Vec<u32>,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.holds { "holds" } else { "fails" })
    }
}

fn check_bound(needed: u128, bound: usize) -> Result<()> {
    if needed > bound as u128 {
        return Err(Error::StateBound { needed, bound });
    }
    Ok(())
}

/// Configurations of length `n` with their owners, in lexicographic order.
fn configurations(spec: &SystemSpec, n: usize, bound: usize) -> Result<(Vec<Word>, Vec<Player>)> {
    let v1 = &spec.v1;
    let configs = spec.configurations();
    check_bound(configs.count_words(n), bound)?;
    let words = configs.words_of_length(n);
    let owner = words
        .iter()
        .map(|w| {
            if v1.accepts(w) {
                Player::Scheduler
            } else {
                Player::Random
            }
        })
        .collect();
    Ok((words, owner))
}

/// The instance of size `n`: all configurations of length `n`, with moves
/// given by `p1` from scheduler states and `p2` from random states. Moves
/// leaving the configurations are dropped.
pub fn expand(spec: &SystemSpec, n: usize) -> Result<ExplicitMdp<Word>> {
    expand_bounded(spec, n, state_bound())
}

pub fn expand_bounded(spec: &SystemSpec, n: usize, bound: usize) -> Result<ExplicitMdp<Word>> {
    let (words, owner) = configurations(spec, n, bound)?;
    let index: HashMap<&Word, u32> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w, i as u32))
        .collect();
    let mut edges = Vec::with_capacity(words.len());
    for (w, o) in words.iter().zip(&owner) {
        let rel = if *o == Player::Scheduler {
            &spec.p1
        } else {
            &spec.p2
        };
        let mut succ: Vec<u32> = rel
            .successors(w)
            .iter()
            .filter_map(|y| index.get(y).copied())
            .collect();
        succ.sort_unstable();
        edges.push(succ);
    }
    let init = (0..words.len() as u32)
        .filter(|&i| spec.init.accepts(&words[i as usize]))
        .collect();
    let finals = words.iter().map(|w| spec.final_.accepts(w)).collect();
    Ok(ExplicitMdp {
        labels: words,
        owner,
        edges,
        init,
        finals,
    })
}

/// Counter update for one position, driven by the annotation of the
/// source configuration.
pub fn update_counter(value: u8, g: GammaLetter, k: u8) -> u8 {
    match (g.premise, g.consequence, g.compassion) {
        (true, false, _) => value - 1,
        (false, false, true) => value,
        _ => k,
    }
}

/// The instance of size `n` under `k`-fairness: states pair a
/// configuration with a counter valuation. Moves are enabled only when all
/// counters are positive; each annotation of the source configuration
/// yields its own counter update. Initial states have all counters at
/// `k`; a state is final if its configuration is final or some counter is
/// zero.
pub fn kfair_expand(spec: &SystemSpec, n: usize, k: u8) -> Result<ExplicitMdp<FairState>> {
    kfair_expand_bounded(spec, n, k, state_bound())
}

pub fn kfair_expand_bounded(
    spec: &SystemSpec,
    n: usize,
    k: u8,
    bound: usize,
) -> Result<ExplicitMdp<FairState>> {
    let ann = spec.fairness.as_ref().ok_or(Error::NoAnnotator)?;
    assert!(k >= 1, "k must be positive");
    let configs = spec.configurations().count_words(n);
    let vals = (k as u128 + 1).checked_pow(n as u32).unwrap_or(u128::MAX);
    check_bound(configs.saturating_mul(vals), bound)?;
    let (words, owner) = configurations(spec, n, bound)?;
    let nvals = vals as usize;
    let index: HashMap<&Word, usize> = words.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let valuation = |mut code: usize| -> Valuation {
        let mut v = vec![0u8; n];
        for slot in v.iter_mut().rev() {
            *slot = (code % (k as usize + 1)) as u8;
            code /= k as usize + 1;
        }
        v
    };
    let code = |v: &[u8]| {
        v.iter()
            .fold(0usize, |acc, &x| acc * (k as usize + 1) + x as usize)
    };

    let total = words.len() * nvals;
    let mut labels = Vec::with_capacity(total);
    let mut fair_owner = Vec::with_capacity(total);
    let mut edges = Vec::with_capacity(total);
    let mut finals = Vec::with_capacity(total);
    let mut init = Vec::new();
    for (wi, w) in words.iter().enumerate() {
        let rel = if owner[wi] == Player::Scheduler {
            &spec.p1
        } else {
            &spec.p2
        };
        let targets: Vec<usize> = rel
            .successors(w)
            .iter()
            .filter_map(|y| index.get(y).copied())
            .collect();
        let annotations = ann.outputs(w);
        let is_final = spec.final_.accepts(w);
        let is_init = spec.init.accepts(w);
        for c in 0..nvals {
            let f = valuation(c);
            let id = (wi * nvals + c) as u32;
            let guard = f.iter().all(|&x| x > 0);
            let mut succ = Vec::new();
            if guard {
                for a in &annotations {
                    let g: Valuation = f
                        .iter()
                        .zip(a)
                        .map(|(&x, &g)| update_counter(x, g, k))
                        .collect();
                    let gc = code(&g);
                    succ.extend(targets.iter().map(|&t| (t * nvals + gc) as u32));
                }
            }
            succ.sort_unstable();
            succ.dedup();
            if is_init && f.iter().all(|&x| x == k) {
                init.push(id);
            }
            finals.push(is_final || !guard);
            edges.push(succ);
            fair_owner.push(owner[wi]);
            labels.push((w.clone(), f));
        }
    }
    Ok(ExplicitMdp {
        labels,
        owner: fair_owner,
        edges,
        init,
        finals,
    })
}

/// Tarjan's algorithm over the states with `alive[s]`, following only
/// edges between alive states. Returns the component id of each state.
fn sccs(edges: &[Vec<u32>], alive: &[bool]) -> Vec<u32> {
    let n = edges.len();
    const NONE: u32 = u32::MAX;
    let mut index = vec![NONE; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![NONE; n];
    let mut stack = Vec::new();
    let mut counter = 0u32;
    let mut ncomp = 0u32;
    let mut call: Vec<(u32, usize)> = Vec::new();
    for root in 0..n as u32 {
        if !alive[root as usize] || index[root as usize] != NONE {
            continue;
        }
        call.push((root, 0));
        index[root as usize] = counter;
        low[root as usize] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            let vs = v as usize;
            if *i < edges[vs].len() {
                let w = edges[vs][*i];
                *i += 1;
                let ws = w as usize;
                if !alive[ws] {
                    continue;
                }
                if index[ws] == NONE {
                    index[ws] = counter;
                    low[ws] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[ws] = true;
                    call.push((w, 0));
                } else if on_stack[ws] {
                    low[vs] = low[vs].min(index[ws]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p as usize] = low[p as usize].min(low[vs]);
                }
                if low[vs] == index[vs] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w as usize] = false;
                        comp[w as usize] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

/// States of end components among the non-final states. A non-final dead
/// end counts as a (trivial) end component: runs stuck there never reach
/// a final state.
pub fn bad_end_components<L>(mdp: &ExplicitMdp<L>) -> Vec<bool> {
    let n = mdp.num_states();
    let mut alive: Vec<bool> = mdp.finals.iter().map(|f| !f).collect();
    loop {
        let comp = sccs(&mdp.edges, &alive);
        let mut changed = false;
        for s in 0..n {
            if !alive[s] || mdp.edges[s].is_empty() {
                continue;
            }
            let inside = |t: &u32| alive[*t as usize] && comp[*t as usize] == comp[s];
            let keep = match mdp.owner[s] {
                Player::Scheduler => mdp.edges[s].iter().any(inside),
                Player::Random => mdp.edges[s].iter().all(inside),
            };
            if !keep {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            return alive;
        }
    }
}

/// Does every scheduler reach a final state with probability one from
/// every initial state?
pub fn as_reach<L>(mdp: &ExplicitMdp<L>) -> Verdict {
    let n = mdp.num_states();
    let bad = bad_end_components(mdp);
    // Backward BFS from the bad states through non-final states.
    let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (s, succ) in mdp.edges.iter().enumerate() {
        for &t in succ {
            rev[t as usize].push(s as u32);
        }
    }
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        if bad[s] {
            dist[s] = 0;
            queue.push_back(s as u32);
        }
    }
    while let Some(t) = queue.pop_front() {
        for &s in &rev[t as usize] {
            if !mdp.finals[s as usize] && dist[s as usize] == u32::MAX {
                dist[s as usize] = dist[t as usize] + 1;
                queue.push_back(s);
            }
        }
    }
    if mdp.init.iter().all(|&s| dist[s as usize] == u32::MAX) {
        return Verdict {
            holds: true,
            witness: None,
        };
    }

    // The scheduler heads for the bad states and then stays inside.
    let comp = sccs(&mdp.edges, &bad);
    let mut choices = Vec::new();
    let mut seen = vec![false; n];
    let mut stack: Vec<u32> = mdp
        .init
        .iter()
        .copied()
        .filter(|&s| dist[s as usize] != u32::MAX)
        .collect();
    let mut trap = Vec::new();
    for &s in &stack {
        seen[s as usize] = true;
    }
    while let Some(s) = stack.pop() {
        let su = s as usize;
        let next: Vec<u32> = if bad[su] {
            trap.push(s);
            match mdp.owner[su] {
                Player::Scheduler => {
                    match mdp.edges[su]
                        .iter()
                        .find(|&&t| bad[t as usize] && comp[t as usize] == comp[su])
                    {
                        Some(&c) => {
                            choices.push((s, c));
                            vec![c]
                        }
                        // A dead end.
                        None => vec![],
                    }
                }
                Player::Random => mdp.edges[su].clone(),
            }
        } else {
            match mdp.owner[su] {
                Player::Scheduler => {
                    let c = *mdp.edges[su]
                        .iter()
                        .min_by_key(|&&t| (dist[t as usize], t))
                        .unwrap();
                    choices.push((s, c));
                    vec![c]
                }
                Player::Random => mdp.edges[su]
                    .iter()
                    .copied()
                    .filter(|&t| !mdp.finals[t as usize])
                    .collect(),
            }
        };
        for t in next {
            if !seen[t as usize] && !mdp.finals[t as usize] {
                seen[t as usize] = true;
                stack.push(t);
            }
        }
    }
    choices.sort_unstable();
    trap.sort_unstable();
    Verdict {
        holds: false,
        witness: Some(Strategy { choices, trap }),
    }
}

/// `as_reach` of the `k`-fair instance of size `n`.
pub fn kfair_verdict(spec: &SystemSpec, n: usize, k: u8) -> Result<Verdict> {
    Ok(as_reach(&kfair_expand(spec, n, k)?))
}

pub fn render_word(alph: &Alphabet, w: &[Symbol]) -> String {
    if w.is_empty() {
        "ε".into()
    } else {
        alph.render(w)
    }
}

pub fn render_fair_state(alph: &Alphabet, s: &FairState) -> String {
    let vals: Vec<String> = s.1.iter().map(|v| v.to_string()).collect();
    format!("{} [{}]", render_word(alph, &s.0), vals.join(" "))
}

/// Where the encoded system and the k-fair instance disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mismatch {
    /// The number of uniform-block encoded configurations differs from the
    /// number of k-fair states.
    StateCount {
        encoded: u128,
        kfair: usize,
    },
    Owner {
        state: String,
    },
    Initial {
        state: String,
    },
    Final {
        state: String,
    },
    /// An encoded successor does not decode to a uniform-block state.
    Shape {
        from: String,
        to: String,
    },
    /// An edge present on one side only.
    Edge {
        from: String,
        to: String,
        in_encoded: bool,
    },
    Verdict {
        encoded: bool,
        kfair: bool,
    },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::StateCount { encoded, kfair } => {
                write!(
                    f,
                    "{encoded} encoded configurations but {kfair} k-fair states"
                )
            }
            Mismatch::Owner { state } => write!(f, "owner differs at {state}"),
            Mismatch::Initial { state } => write!(f, "initial membership differs at {state}"),
            Mismatch::Final { state } => write!(f, "final membership differs at {state}"),
            Mismatch::Shape { from, to } => {
                write!(f, "encoded move {from} -> {to} leaves the uniform blocks")
            }
            Mismatch::Edge {
                from,
                to,
                in_encoded,
            } => {
                let side = if *in_encoded {
                    "encoded system only"
                } else {
                    "k-fair instance only"
                };
                write!(f, "edge {from} -> {to} in the {side}")
            }
            Mismatch::Verdict { encoded, kfair } => {
                write!(f, "verdicts differ: encoded {encoded}, k-fair {kfair}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub states: usize,
    pub edges: usize,
    pub kfair: Verdict,
    pub encoded: Verdict,
    pub mismatch: Option<Mismatch>,
}

/// Uniform-block words of the encoded alphabet: each letter is followed by
/// exactly `k` counter symbols forming a well-formed block.
fn uniform_blocks(enc: &EncodedSpec, k: usize) -> Nfa {
    let alph = enc.spec.alphabet.clone();
    let pebble = alph.symbol(PEBBLE).unwrap();
    let gap = alph.symbol(GAP).unwrap();
    let mut b = NfaBuilder::new(alph.clone());
    // State 0: expecting a letter. States (1 + 2i + g) after i counter
    // symbols, g = 1 once a gap was read.
    b.add_state(true);
    b.set_initial(0);
    b.add_states(2 * k + 1);
    let st = |i: usize, g: usize| (1 + 2 * i + g) as u32;
    for a in enc.source_alphabet.names() {
        b.add_transition(0, alph.symbol(a).unwrap(), st(0, 0));
    }
    for i in 0..k {
        let next = |g| if i + 1 == k { 0 } else { st(i + 1, g) };
        b.add_transition(st(i, 0), pebble, next(0));
        b.add_transition(st(i, 0), gap, next(1));
        b.add_transition(st(i, 1), gap, next(1));
    }
    b.build()
}

/// Check the encoding against the k-fair instance of size `n`: encoded
/// configurations with uniform blocks of length `k` must correspond one to
/// one to k-fair states, with the same owners, initial and final states,
/// edges and verdict.
pub fn compare_encodings(spec: &SystemSpec, n: usize, k: u8) -> Result<Comparison> {
    compare_encodings_with(spec, n, k, &SigmaTable::default())
}

pub fn compare_encodings_with(
    spec: &SystemSpec,
    n: usize,
    k: u8,
    table: &SigmaTable,
) -> Result<Comparison> {
    let kf = kfair_expand(spec, n, k)?;
    let enc = encode_system_with(spec, table)?;
    let es = &enc.spec;
    let ku = k as usize;
    let render = |s: &FairState| render_fair_state(&spec.alphabet, s);

    let shaped = es.configurations().intersect(&uniform_blocks(&enc, ku))?;
    let count = shaped.count_words(n * (ku + 1));
    let mut mismatch = None;
    if count != kf.num_states() as u128 {
        mismatch = Some(Mismatch::StateCount {
            encoded: count,
            kfair: kf.num_states(),
        });
    }

    let nvals = (ku + 1).pow(n as u32);
    let index = |s: &FairState, word_index: &HashMap<&Word, usize>| -> Option<u32> {
        let wi = *word_index.get(&s.0)?;
        let c =
            s.1.iter()
                .fold(0usize, |acc, &x| acc * (ku + 1) + x as usize);
        Some((wi * nvals + c) as u32)
    };
    let mut word_index: HashMap<&Word, usize> = HashMap::new();
    for (i, l) in kf.labels.iter().enumerate().step_by(nvals) {
        word_index.insert(&l.0, i / nvals);
    }

    let mut enc_edges: Vec<Vec<u32>> = Vec::with_capacity(kf.num_states());
    let mut enc_finals = Vec::with_capacity(kf.num_states());
    let mut enc_init = Vec::new();
    for (s, label) in kf.labels.iter().enumerate() {
        let values: Vec<usize> = label.1.iter().map(|&v| v as usize).collect();
        let w = enc.encode_state(&label.0, &values, ku);
        let in_v1 = es.v1.accepts(&w);
        let owner_ok = in_v1 == (kf.owner[s] == Player::Scheduler) && (in_v1 || es.v2.accepts(&w));
        if mismatch.is_none() && !owner_ok {
            mismatch = Some(Mismatch::Owner {
                state: render(label),
            });
        }
        let is_init = es.init.accepts(&w);
        if is_init {
            enc_init.push(s as u32);
        }
        if mismatch.is_none() && is_init != kf.init.binary_search(&(s as u32)).is_ok() {
            mismatch = Some(Mismatch::Initial {
                state: render(label),
            });
        }
        let is_final = es.final_.accepts(&w);
        enc_finals.push(is_final);
        if mismatch.is_none() && is_final != kf.finals[s] {
            mismatch = Some(Mismatch::Final {
                state: render(label),
            });
        }
        let rel = if in_v1 { &es.p1 } else { &es.p2 };
        let mut succ = Vec::new();
        for y in rel.successors(&w) {
            let decoded = enc.decode(&y).filter(|d| d.blocks.iter().all(|&b| b == ku));
            let target = decoded.and_then(|d| {
                let fs: FairState = (d.word, d.values.iter().map(|&v| v as u8).collect());
                index(&fs, &word_index)
            });
            match target {
                Some(t) => succ.push(t),
                None => {
                    if mismatch.is_none() {
                        mismatch = Some(Mismatch::Shape {
                            from: render(label),
                            to: es.alphabet.render(&y),
                        });
                    }
                }
            }
        }
        succ.sort_unstable();
        succ.dedup();
        if mismatch.is_none() && succ != kf.edges[s] {
            let extra = succ.iter().find(|t| kf.edges[s].binary_search(t).is_err());
            let missing = kf.edges[s].iter().find(|t| succ.binary_search(t).is_err());
            let (t, in_encoded) = match (extra, missing) {
                (Some(&t), Some(&u)) if u < t => (u, false),
                (Some(&t), _) => (t, true),
                (None, Some(&u)) => (u, false),
                (None, None) => unreachable!(),
            };
            mismatch = Some(Mismatch::Edge {
                from: render(label),
                to: render(&kf.labels[t as usize]),
                in_encoded,
            });
        }
        enc_edges.push(succ);
    }
    let encoded_mdp = ExplicitMdp {
        labels: vec![(); kf.num_states()],
        owner: kf.owner.clone(),
        edges: enc_edges,
        init: enc_init,
        finals: enc_finals,
    };
    let kv = as_reach(&kf);
    let ev = as_reach(&encoded_mdp);
    if mismatch.is_none() && kv.holds != ev.holds {
        mismatch = Some(Mismatch::Verdict {
            encoded: ev.holds,
            kfair: kv.holds,
        });
    }
    Ok(Comparison {
        states: kf.num_states(),
        edges: kf.num_edges(),
        kfair: kv,
        encoded: ev,
        mismatch,
    })
}
