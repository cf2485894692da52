//! Bounded search for regular proofs.
//!
//! Candidates are partial deterministic automata for `inv` (over the
//! system alphabet) and `ord` (over pairs) whose transitions and final
//! flags are decided lazily: a transition is only fixed once some cached
//! counterexample needs it, and undecided transitions lead to an implicit
//! rejecting sink. Every counterexample harvested from a failed check is
//! a constraint any valid proof satisfies, so pruning with the cache never
//! discards a proof. New states are introduced in order, which removes
//! isomorphic copies.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::alphabet::{Alphabet, Symbol, Word};
use crate::error::Result;
use crate::nfa::{Nfa, NfaBuilder, State};
use crate::proof::{check_proof, Failure, RegularProof};
use crate::relation::Relation;
use crate::spec::SystemSpec;

#[derive(Clone, Debug)]
pub struct SearchBudget {
    pub max_inv_states: usize,
    pub max_ord_states: usize,
    pub timeout: Duration,
    /// Largest number of cached counterexamples.
    pub cache_capacity: usize,
    /// Number of state-count configurations explored in parallel.
    pub jobs: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_inv_states: 2,
            max_ord_states: 2,
            timeout: Duration::from_secs(60),
            cache_capacity: 4096,
            jobs: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Proved,
    /// The budget ran out (state bounds exhausted or deadline reached).
    Unknown,
}

#[derive(Clone, Debug, Default)]
pub struct SearchStats {
    /// Candidates that went through the full checker.
    pub checks: usize,
    /// Counterexamples harvested.
    pub counterexamples: usize,
    pub elapsed: Duration,
    pub timed_out: bool,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub status: Status,
    pub proof: Option<RegularProof>,
    /// `(inv states, ord states)` of the configuration that succeeded.
    pub sizes: Option<(usize, usize)>,
    pub stats: SearchStats,
}

/// A counterexample harvested from a failed check, kept as a constraint
/// on future candidates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Counterexample {
    /// `w` must be in `inv`.
    Init(Word),
    /// `from ∈ inv` implies `to ∈ inv`.
    Step { from: Word, to: Word },
    /// `(w, w)` must not be in `ord`.
    Reflexive(Word),
    /// `x ≺ y` and `y ≺ z` imply `x ≺ z`.
    Transitive { x: Word, y: Word, z: Word },
    /// `x ∈ inv` implies some `z` in `zs` with `z ∈ inv` and `z ≺ x`.
    Decrease { x: Word, zs: Vec<Word> },
}

impl Counterexample {
    pub fn from_failure(spec: &SystemSpec, f: &Failure) -> Counterexample {
        match f {
            Failure::InitNotInInv(w) => Counterexample::Init(w.clone()),
            Failure::NotInductive { from, to } => Counterexample::Step {
                from: from.clone(),
                to: to.clone(),
            },
            Failure::Reflexive(w) => Counterexample::Reflexive(w.clone()),
            Failure::Intransitive { x, y, z } => Counterexample::Transitive {
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
            },
            Failure::NoDecrease { x, y } => Counterexample::Decrease {
                x: x.clone(),
                zs: spec.p2.successors(y),
            },
        }
    }

    /// Membership-only evaluation on a complete candidate: `false` means
    /// the candidate violates the constraint, so the full check fails too.
    pub fn replay(&self, proof: &RegularProof) -> bool {
        let inv = |w: &Word| proof.inv.accepts(w);
        let ord = |a: &Word, b: &Word| proof.ord.contains(&[a, b]);
        match self {
            Counterexample::Init(w) => inv(w),
            Counterexample::Step { from, to } => !inv(from) || inv(to),
            Counterexample::Reflexive(w) => !ord(w, w),
            Counterexample::Transitive { x, y, z } => !(ord(x, y) && ord(y, z)) || ord(x, z),
            Counterexample::Decrease { x, zs } => !inv(x) || zs.iter().any(|z| inv(z) && ord(z, x)),
        }
    }
}

/// Run the search: configurations `(inv states, ord states)` are tried by
/// total size, then by invariant size; the first configuration yielding a
/// proof wins, whatever the number of jobs.
pub fn search(spec: &SystemSpec, budget: &SearchBudget) -> Result<SearchOutcome> {
    let start = Instant::now();
    let deadline = start + budget.timeout;
    let mut configs = Vec::new();
    for ni in 1..=budget.max_inv_states {
        for no in 1..=budget.max_ord_states {
            configs.push((ni, no));
        }
    }
    configs.sort_by_key(|&(ni, no)| (ni + no, ni));

    let run = |&(ni, no): &(usize, usize)| -> Result<(Option<RegularProof>, SearchStats)> {
        let mut s = Searcher::new(spec, ni, no, budget.cache_capacity, deadline)?;
        let proof = s.run()?;
        Ok((proof, s.stats))
    };

    let mut stats = SearchStats::default();
    let mut found = None;
    if budget.jobs <= 1 {
        for c in &configs {
            let (p, st) = run(c)?;
            merge(&mut stats, &st);
            if let Some(p) = p {
                found = Some((*c, p));
                break;
            }
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(budget.jobs)
            .build()
            .map_err(|e| crate::error::Error::Invalid(e.to_string()))?;
        let results: Vec<Result<(Option<RegularProof>, SearchStats)>> =
            pool.install(|| configs.par_iter().map(run).collect());
        for (c, r) in configs.iter().zip(results) {
            let (p, st) = r?;
            merge(&mut stats, &st);
            if let Some(p) = p {
                found = Some((*c, p));
                break;
            }
        }
    }
    stats.elapsed = start.elapsed();
    if let Some((_, p)) = &found {
        let report = check_proof(spec, p)?;
        assert!(
            report.passed(),
            "search returned a proof the checker rejects"
        );
    }
    Ok(match found {
        Some((sizes, proof)) => SearchOutcome {
            status: Status::Proved,
            proof: Some(proof),
            sizes: Some(sizes),
            stats,
        },
        None => SearchOutcome {
            status: Status::Unknown,
            proof: None,
            sizes: None,
            stats,
        },
    })
}

fn merge(into: &mut SearchStats, from: &SearchStats) {
    into.checks += from.checks;
    into.counterexamples += from.counterexamples;
    into.timed_out |= from.timed_out;
}

const UNDEF: u32 = u32::MAX;
const SINK: u32 = u32::MAX - 1;

/// A lazily decided DFA with at most `n` states; state 0 is initial.
struct Partial {
    n: usize,
    letters: usize,
    trans: Vec<u32>,
    /// 0 = rejecting, 1 = accepting, 2 = undecided.
    finals: Vec<u8>,
    used: usize,
}

impl Partial {
    fn new(n: usize, letters: usize) -> Self {
        Partial {
            n,
            letters,
            trans: vec![UNDEF; n * letters],
            finals: vec![2; n],
            used: 1,
        }
    }

    fn eval(&self, word: &[Symbol]) -> Val {
        let mut q = 0usize;
        for &a in word {
            let i = q * self.letters + a.index();
            match self.trans[i] {
                UNDEF => return Val::Unknown(Var::Trans(i)),
                SINK => return Val::False,
                t => q = t as usize,
            }
        }
        match self.finals[q] {
            0 => Val::False,
            1 => Val::True,
            _ => Val::Unknown(Var::Final(q)),
        }
    }

    fn to_nfa(&self, alph: &Arc<Alphabet>) -> Nfa {
        let mut b = NfaBuilder::new(alph.clone());
        b.add_states(self.used);
        b.set_initial(0);
        for q in 0..self.used {
            if self.finals[q] == 1 {
                b.set_final(q as State, true);
            }
            for a in 0..self.letters {
                let t = self.trans[q * self.letters + a];
                if t != UNDEF && t != SINK {
                    b.add_transition(q as State, Symbol(a as u32), t);
                }
            }
        }
        b.build()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    Trans(usize),
    Final(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Val {
    True,
    False,
    Unknown(Var),
}

/// Membership atoms: `(0, w)` for `w ∈ inv`, `(1, w)` for a pair word in
/// `ord`.
type Atom = (u8, Word);

#[derive(Clone, Debug)]
enum Formula {
    Atom(usize),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

/// Three-valued result: `(value, first undecided variable)`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Tri {
    T,
    F,
    U(LangVar),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct LangVar {
    lang: u8,
    var: Var,
}

struct Cached {
    formula: Formula,
    last_used: u64,
}

enum Step {
    Conflict,
    Branch(LangVar),
    Satisfied,
}

struct Searcher<'a> {
    spec: &'a SystemSpec,
    alph: Arc<Alphabet>,
    pair: Arc<Alphabet>,
    langs: [Partial; 2],
    trail: Vec<(u8, Var, u32, usize)>,
    atoms: Vec<Atom>,
    atom_index: HashMap<Atom, usize>,
    cache: Vec<Cached>,
    seen: HashMap<Counterexample, ()>,
    capacity: usize,
    tick: u64,
    deadline: Instant,
    stats: SearchStats,
}

struct Timeout;

impl<'a> Searcher<'a> {
    fn new(
        spec: &'a SystemSpec,
        ni: usize,
        no: usize,
        capacity: usize,
        deadline: Instant,
    ) -> Result<Self> {
        let alph = spec.alphabet.clone();
        let pair = Alphabet::product(&[alph.clone(), alph.clone()])?;
        Ok(Searcher {
            spec,
            langs: [Partial::new(ni, alph.len()), Partial::new(no, pair.len())],
            alph,
            pair,
            trail: Vec::new(),
            atoms: Vec::new(),
            atom_index: HashMap::new(),
            cache: Vec::new(),
            seen: HashMap::new(),
            capacity: capacity.max(1),
            tick: 0,
            deadline,
            stats: SearchStats::default(),
        })
    }

    fn run(&mut self) -> Result<Option<RegularProof>> {
        match self.dfs() {
            Ok(p) => Ok(p),
            Err(SearchError::Timeout(Timeout)) => {
                self.stats.timed_out = true;
                Ok(None)
            }
            Err(SearchError::Check(e)) => Err(e),
        }
    }

    fn atom(&mut self, lang: u8, w: Word) -> Formula {
        let key = (lang, w);
        let next = self.atoms.len();
        let id = *self.atom_index.entry(key.clone()).or_insert(next);
        if id == next {
            self.atoms.push(key);
        }
        Formula::Atom(id)
    }

    fn inv(&mut self, w: &Word) -> Formula {
        self.atom(0, w.clone())
    }

    fn ord(&mut self, smaller: &Word, larger: &Word) -> Formula {
        let w = smaller
            .iter()
            .zip(larger)
            .map(|(&a, &b)| self.pair.encode(&[a, b]))
            .collect();
        self.atom(1, w)
    }

    fn formula(&mut self, c: &Counterexample) -> Formula {
        let not = |f: Formula| Formula::Not(Box::new(f));
        match c {
            Counterexample::Init(w) => self.inv(w),
            Counterexample::Step { from, to } => {
                Formula::Or(vec![not(self.inv(from)), self.inv(to)])
            }
            Counterexample::Reflexive(w) => not(self.ord(w, w)),
            Counterexample::Transitive { x, y, z } => Formula::Or(vec![
                not(self.ord(x, y)),
                not(self.ord(y, z)),
                self.ord(x, z),
            ]),
            Counterexample::Decrease { x, zs } => {
                let mut alts = vec![not(self.inv(x))];
                for z in zs {
                    alts.push(Formula::And(vec![self.inv(z), self.ord(z, x)]));
                }
                Formula::Or(alts)
            }
        }
    }

    fn eval(&self, f: &Formula) -> Tri {
        match f {
            Formula::Atom(i) => {
                let (lang, w) = &self.atoms[*i];
                match self.langs[*lang as usize].eval(w) {
                    Val::True => Tri::T,
                    Val::False => Tri::F,
                    Val::Unknown(var) => Tri::U(LangVar { lang: *lang, var }),
                }
            }
            Formula::Not(g) => match self.eval(g) {
                Tri::T => Tri::F,
                Tri::F => Tri::T,
                u => u,
            },
            Formula::And(gs) => {
                let mut first = None;
                for g in gs {
                    match self.eval(g) {
                        Tri::F => return Tri::F,
                        Tri::U(v) => first = first.or(Some(v)),
                        Tri::T => {}
                    }
                }
                first.map_or(Tri::T, Tri::U)
            }
            Formula::Or(gs) => {
                let mut first = None;
                for g in gs {
                    match self.eval(g) {
                        Tri::T => return Tri::T,
                        Tri::U(v) => first = first.or(Some(v)),
                        Tri::F => {}
                    }
                }
                first.map_or(Tri::F, Tri::U)
            }
        }
    }

    fn step(&mut self) -> Step {
        self.tick += 1;
        let mut branch = None;
        for i in 0..self.cache.len() {
            match self.eval(&self.cache[i].formula) {
                Tri::F => {
                    self.cache[i].last_used = self.tick;
                    return Step::Conflict;
                }
                Tri::U(v) if branch.is_none() => {
                    self.cache[i].last_used = self.tick;
                    branch = Some(v);
                }
                _ => {}
            }
        }
        branch.map_or(Step::Satisfied, Step::Branch)
    }

    fn values(&self, v: LangVar) -> Vec<u32> {
        let p = &self.langs[v.lang as usize];
        match v.var {
            Var::Final(_) => vec![1, 0],
            Var::Trans(_) => {
                let mut out: Vec<u32> = (0..p.used as u32).collect();
                if p.used < p.n {
                    out.push(p.used as u32);
                }
                out.push(SINK);
                out
            }
        }
    }

    fn assign(&mut self, v: LangVar, value: u32) {
        let p = &mut self.langs[v.lang as usize];
        let old_used = p.used;
        let old = match v.var {
            Var::Trans(i) => {
                let old = p.trans[i];
                p.trans[i] = value;
                if value != SINK && value as usize == p.used {
                    p.used += 1;
                }
                old
            }
            Var::Final(q) => {
                let old = p.finals[q] as u32;
                p.finals[q] = value as u8;
                old
            }
        };
        self.trail.push((v.lang, v.var, old, old_used));
    }

    fn undo(&mut self) {
        let (lang, var, old, old_used) = self.trail.pop().unwrap();
        let p = &mut self.langs[lang as usize];
        match var {
            Var::Trans(i) => p.trans[i] = old,
            Var::Final(q) => p.finals[q] = old as u8,
        }
        p.used = old_used;
    }

    fn candidate(&self) -> Result<RegularProof> {
        let inv = self.langs[0].to_nfa(&self.alph);
        let ord = Relation::new(
            vec![self.alph.clone(), self.alph.clone()],
            self.langs[1].to_nfa(&self.pair),
        )?;
        Ok(RegularProof::new(self.spec.name.clone(), inv, ord))
    }

    fn learn(&mut self, c: Counterexample) {
        if self.seen.contains_key(&c) {
            return;
        }
        if self.cache.len() >= self.capacity {
            let (victim, _) = self
                .cache
                .iter()
                .enumerate()
                .min_by_key(|(_, c)| c.last_used)
                .unwrap();
            self.cache.swap_remove(victim);
        }
        let formula = self.formula(&c);
        self.seen.insert(c, ());
        self.stats.counterexamples += 1;
        self.cache.push(Cached {
            formula,
            last_used: self.tick,
        });
    }

    fn dfs(&mut self) -> std::result::Result<Option<RegularProof>, SearchError> {
        loop {
            if Instant::now() >= self.deadline {
                return Err(SearchError::Timeout(Timeout));
            }
            match self.step() {
                Step::Conflict => return Ok(None),
                Step::Branch(v) => {
                    for value in self.values(v) {
                        self.assign(v, value);
                        let r = self.dfs();
                        self.undo();
                        if let Some(p) = r? {
                            return Ok(Some(p));
                        }
                    }
                    return Ok(None);
                }
                Step::Satisfied => {
                    let cand = self.candidate()?;
                    self.stats.checks += 1;
                    let report = check_proof(self.spec, &cand)?;
                    if report.passed() {
                        return Ok(Some(cand));
                    }
                    let mut progress = false;
                    let failures: Vec<Failure> =
                        report.failures().map(|(_, f)| f.clone()).collect();
                    for f in failures {
                        let c = Counterexample::from_failure(self.spec, &f);
                        if !c.replay(&cand) {
                            self.seen.remove(&c);
                            self.learn(c);
                            progress = true;
                        }
                    }
                    if !progress {
                        return Ok(None);
                    }
                }
            }
        }
    }
}

enum SearchError {
    Timeout(Timeout),
    Check(crate::error::Error),
}

impl From<crate::error::Error> for SearchError {
    fn from(e: crate::error::Error) -> Self {
        SearchError::Check(e)
    }
}
