//! Nondeterministic finite automata and their boolean/decision algebra.
//!
//! Automata are immutable values; every operation returns a fresh automaton.
//! Witness words are always a shortest accepted word, ties broken by
//! lexicographic order of symbol ids.

use std::collections::{HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::alphabet::{Alphabet, Symbol, Word};
use crate::error::{Error, Result};

pub type State = u32;

#[derive(Clone)]
pub struct Nfa {
    alphabet: Arc<Alphabet>,
    /// Outgoing transitions per state, sorted by `(symbol, target)`.
    delta: Vec<Vec<(Symbol, State)>>,
    initial: Vec<State>,
    finals: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    And,
    Or,
}

/// Outcome of an inclusion test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inclusion {
    Holds,
    /// A shortest word in the left language but not the right.
    Counterexample(Word),
}

impl Inclusion {
    pub fn holds(&self) -> bool {
        matches!(self, Inclusion::Holds)
    }
}

/// Incremental construction of an [`Nfa`].
pub struct NfaBuilder {
    alphabet: Arc<Alphabet>,
    delta: Vec<Vec<(Symbol, State)>>,
    initial: Vec<State>,
    finals: Vec<bool>,
}

impl NfaBuilder {
    pub fn new(alphabet: Arc<Alphabet>) -> Self {
        NfaBuilder {
            alphabet,
            delta: Vec::new(),
            initial: Vec::new(),
            finals: Vec::new(),
        }
    }

    pub fn add_state(&mut self, accepting: bool) -> State {
        self.delta.push(Vec::new());
        self.finals.push(accepting);
        (self.delta.len() - 1) as State
    }

    pub fn add_states(&mut self, n: usize) -> State {
        let first = self.delta.len() as State;
        for _ in 0..n {
            self.add_state(false);
        }
        first
    }

    pub fn set_initial(&mut self, q: State) {
        self.initial.push(q);
    }

    pub fn set_final(&mut self, q: State, accepting: bool) {
        self.finals[q as usize] = accepting;
    }

    pub fn add_transition(&mut self, from: State, sym: Symbol, to: State) {
        self.delta[from as usize].push((sym, to));
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn build(self) -> Nfa {
        let mut delta = self.delta;
        for row in &mut delta {
            row.sort_unstable();
            row.dedup();
        }
        let mut initial = self.initial;
        initial.sort_unstable();
        initial.dedup();
        Nfa {
            alphabet: self.alphabet,
            delta,
            initial,
            finals: self.finals,
        }
    }
}

impl Nfa {
    /// Build directly from parts. Panics on out-of-range states.
    pub fn from_parts(
        alphabet: Arc<Alphabet>,
        states: usize,
        transitions: impl IntoIterator<Item = (State, Symbol, State)>,
        initial: impl IntoIterator<Item = State>,
        finals: impl IntoIterator<Item = State>,
    ) -> Nfa {
        let mut b = NfaBuilder::new(alphabet);
        b.add_states(states);
        for (p, a, q) in transitions {
            assert!(
                (p as usize) < states && (q as usize) < states,
                "state out of range"
            );
            assert!(a.index() < b.alphabet.len(), "symbol out of range");
            b.add_transition(p, a, q);
        }
        for q in initial {
            b.set_initial(q);
        }
        for q in finals {
            b.set_final(q, true);
        }
        b.build()
    }

    /// The empty language.
    pub fn empty(alphabet: Arc<Alphabet>) -> Nfa {
        Nfa {
            alphabet,
            delta: Vec::new(),
            initial: Vec::new(),
            finals: Vec::new(),
        }
    }

    /// `{ε}`.
    pub fn epsilon(alphabet: Arc<Alphabet>) -> Nfa {
        Nfa::from_parts(alphabet, 1, [], [0], [0])
    }

    /// `Σ*`.
    pub fn universal(alphabet: Arc<Alphabet>) -> Nfa {
        let syms: Vec<_> = alphabet.symbols().collect();
        Nfa::from_parts(alphabet, 1, syms.into_iter().map(|s| (0, s, 0)), [0], [0])
    }

    /// Words over the given letters only: `letters*`.
    pub fn star_of(alphabet: Arc<Alphabet>, letters: &[Symbol]) -> Nfa {
        Nfa::from_parts(alphabet, 1, letters.iter().map(|&s| (0, s, 0)), [0], [0])
    }

    /// The single word `w`.
    pub fn word(alphabet: Arc<Alphabet>, w: &[Symbol]) -> Nfa {
        let n = w.len();
        Nfa::from_parts(
            alphabet,
            n + 1,
            w.iter()
                .enumerate()
                .map(|(i, &s)| (i as State, s, i as State + 1)),
            [0],
            [n as State],
        )
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.delta.iter().map(Vec::len).sum()
    }

    pub fn initial(&self) -> &[State] {
        &self.initial
    }

    pub fn is_final(&self, q: State) -> bool {
        self.finals[q as usize]
    }

    pub fn finals(&self) -> impl Iterator<Item = State> + '_ {
        self.finals
            .iter()
            .enumerate()
            .filter(|(_, f)| **f)
            .map(|(i, _)| i as State)
    }

    pub fn successors(&self, q: State) -> &[(Symbol, State)] {
        &self.delta[q as usize]
    }

    pub fn transitions(&self) -> impl Iterator<Item = (State, Symbol, State)> + '_ {
        self.delta
            .iter()
            .enumerate()
            .flat_map(|(p, row)| row.iter().map(move |&(a, q)| (p as State, a, q)))
    }

    /// Targets of `q` on letter `a` (binary search in the sorted row).
    pub fn step(&self, q: State, a: Symbol) -> impl Iterator<Item = State> + '_ {
        let row = &self.delta[q as usize];
        let start = row.partition_point(|&(s, _)| s < a);
        row[start..]
            .iter()
            .take_while(move |&&(s, _)| s == a)
            .map(|&(_, t)| t)
    }

    /// Same automaton viewed over an equal alphabet (used after parsing).
    pub fn with_alphabet(mut self, alphabet: Arc<Alphabet>) -> Result<Nfa> {
        if *alphabet != *self.alphabet {
            return Err(Error::AlphabetMismatch(format!(
                "expected [{}], found [{}]",
                alphabet, self.alphabet
            )));
        }
        self.alphabet = alphabet;
        Ok(self)
    }

    /// Re-label onto a different alphabet through a symbol map.
    pub fn relabel(&self, alphabet: Arc<Alphabet>, map: impl Fn(Symbol) -> Option<Symbol>) -> Nfa {
        let mut b = NfaBuilder::new(alphabet);
        b.add_states(self.num_states());
        for (p, a, q) in self.transitions() {
            if let Some(a2) = map(a) {
                b.add_transition(p, a2, q);
            }
        }
        for &q in &self.initial {
            b.set_initial(q);
        }
        for q in self.finals() {
            b.set_final(q, true);
        }
        b.build()
    }

    pub fn accepts(&self, word: &[Symbol]) -> bool {
        let mut cur = vec![false; self.num_states()];
        for &q in &self.initial {
            cur[q as usize] = true;
        }
        let mut next = vec![false; self.num_states()];
        for &a in word {
            next.iter_mut().for_each(|x| *x = false);
            let mut any = false;
            for (p, on) in cur.iter().enumerate() {
                if *on {
                    for t in self.step(p as State, a) {
                        next[t as usize] = true;
                        any = true;
                    }
                }
            }
            if !any {
                return false;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur.iter().zip(&self.finals).any(|(c, f)| *c && *f)
    }

    pub fn is_deterministic(&self) -> bool {
        self.initial.len() <= 1
            && self
                .delta
                .iter()
                .all(|row| row.windows(2).all(|w| w[0].0 != w[1].0))
    }

    pub fn is_complete_dfa(&self) -> bool {
        self.initial.len() == 1
            && self.delta.iter().all(|row| {
                row.len() == self.alphabet.len()
                    && row.iter().enumerate().all(|(i, &(s, _))| s.index() == i)
            })
    }

    fn check_same_alphabet(&self, other: &Nfa) -> Result<()> {
        if *self.alphabet != *other.alphabet {
            return Err(Error::AlphabetMismatch(format!(
                "[{}] vs [{}]",
                self.alphabet, other.alphabet
            )));
        }
        Ok(())
    }

    /// Subset construction. The result is complete and has exactly one
    /// initial state; the empty subset acts as the sink when needed.
    pub fn determinize(&self) -> Nfa {
        let nsym = self.alphabet.len();
        let mut index: HashMap<Vec<State>, State> = HashMap::new();
        let mut sets: Vec<Vec<State>> = Vec::new();
        let start = self.initial.clone();
        index.insert(start.clone(), 0);
        sets.push(start);
        let mut delta: Vec<Vec<(Symbol, State)>> = Vec::new();
        let mut finals = Vec::new();
        let mut buckets: Vec<Vec<State>> = vec![Vec::new(); nsym];
        let mut i = 0;
        while i < sets.len() {
            let set = sets[i].clone();
            finals.push(set.iter().any(|&q| self.finals[q as usize]));
            for b in buckets.iter_mut() {
                b.clear();
            }
            for &q in &set {
                for &(a, t) in &self.delta[q as usize] {
                    buckets[a.index()].push(t);
                }
            }
            let mut row = Vec::with_capacity(nsym);
            for (a, bucket) in buckets.iter_mut().enumerate() {
                bucket.sort_unstable();
                bucket.dedup();
                let id = match index.get(bucket.as_slice()) {
                    Some(&id) => id,
                    None => {
                        let id = sets.len() as State;
                        index.insert(bucket.clone(), id);
                        sets.push(bucket.clone());
                        id
                    }
                };
                row.push((Symbol(a as u32), id));
            }
            delta.push(row);
            i += 1;
        }
        Nfa {
            alphabet: self.alphabet.clone(),
            delta,
            initial: vec![0],
            finals,
        }
    }

    /// Complement with respect to `Σ*`.
    pub fn complement(&self) -> Nfa {
        let mut d = if self.is_complete_dfa() {
            self.clone()
        } else {
            self.determinize()
        };
        d.finals.iter_mut().for_each(|f| *f = !*f);
        d
    }

    /// Add a sink so that every state has a move on every letter and there
    /// is at least one initial state. Does not change the language.
    pub fn completed(&self) -> Nfa {
        let nsym = self.alphabet.len();
        let needs_sink = self.initial.is_empty()
            || self.delta.iter().any(|row| {
                let mut seen = 0;
                let mut last = None;
                for &(s, _) in row {
                    if last != Some(s) {
                        seen += 1;
                        last = Some(s);
                    }
                }
                seen < nsym
            });
        if !needs_sink {
            return self.clone();
        }
        let mut out = self.clone();
        let sink = out.delta.len() as State;
        out.delta
            .push((0..nsym).map(|a| (Symbol(a as u32), sink)).collect());
        out.finals.push(false);
        for row in out.delta.iter_mut().take(sink as usize) {
            let mut have = vec![false; nsym];
            for &(s, _) in row.iter() {
                have[s.index()] = true;
            }
            for (a, h) in have.iter().enumerate() {
                if !h {
                    row.push((Symbol(a as u32), sink));
                }
            }
            row.sort_unstable();
        }
        if out.initial.is_empty() {
            out.initial.push(sink);
        }
        out
    }

    /// Synchronous product; `Or` completes both operands first so that
    /// every word has a run in each.
    pub fn product(&self, other: &Nfa, mode: Mode) -> Result<Nfa> {
        self.check_same_alphabet(other)?;
        let (a, b) = match mode {
            Mode::And => (
                std::borrow::Cow::Borrowed(self),
                std::borrow::Cow::Borrowed(other),
            ),
            Mode::Or => (
                std::borrow::Cow::Owned(self.completed()),
                std::borrow::Cow::Owned(other.completed()),
            ),
        };
        let mut index: HashMap<(State, State), State> = HashMap::new();
        let mut queue = Vec::new();
        let mut builder = NfaBuilder::new(self.alphabet.clone());
        let mut intern =
            |p: State, q: State, builder: &mut NfaBuilder, queue: &mut Vec<(State, State)>| {
                *index.entry((p, q)).or_insert_with(|| {
                    let acc = match mode {
                        Mode::And => a.finals[p as usize] && b.finals[q as usize],
                        Mode::Or => a.finals[p as usize] || b.finals[q as usize],
                    };
                    queue.push((p, q));
                    builder.add_state(acc)
                })
            };
        for &p in &a.initial {
            for &q in &b.initial {
                let id = intern(p, q, &mut builder, &mut queue);
                builder.set_initial(id);
            }
        }
        let mut i = 0;
        while i < queue.len() {
            let (p, q) = queue[i];
            let src = i as State;
            let ra = &a.delta[p as usize];
            let rb = &b.delta[q as usize];
            let (mut x, mut y) = (0, 0);
            while x < ra.len() && y < rb.len() {
                let (sa, sb) = (ra[x].0, rb[y].0);
                if sa < sb {
                    x += 1;
                } else if sb < sa {
                    y += 1;
                } else {
                    let xe = x + ra[x..].iter().take_while(|e| e.0 == sa).count();
                    let ye = y + rb[y..].iter().take_while(|e| e.0 == sb).count();
                    for ea in &ra[x..xe] {
                        for eb in &rb[y..ye] {
                            let dst = intern(ea.1, eb.1, &mut builder, &mut queue);
                            builder.add_transition(src, sa, dst);
                        }
                    }
                    x = xe;
                    y = ye;
                }
            }
            i += 1;
        }
        Ok(builder.build())
    }

    pub fn intersect(&self, other: &Nfa) -> Result<Nfa> {
        self.product(other, Mode::And)
    }

    /// Disjoint union (no completion needed, unlike `product(_, Or)`).
    pub fn union(&self, other: &Nfa) -> Result<Nfa> {
        self.check_same_alphabet(other)?;
        let off = self.num_states() as State;
        let mut out = self.clone();
        for row in &other.delta {
            out.delta
                .push(row.iter().map(|&(a, q)| (a, q + off)).collect());
        }
        out.finals.extend_from_slice(&other.finals);
        out.initial.extend(other.initial.iter().map(|q| q + off));
        Ok(out)
    }

    pub fn difference(&self, other: &Nfa) -> Result<Nfa> {
        self.intersect(&other.complement())
    }

    /// Concatenation `L(self)·L(other)`.
    pub fn concat(&self, other: &Nfa) -> Result<Nfa> {
        self.check_same_alphabet(other)?;
        let off = self.num_states() as State;
        let mut b = NfaBuilder::new(self.alphabet.clone());
        b.add_states(self.num_states() + other.num_states());
        let other_initial_final = other.initial.iter().any(|&q| other.finals[q as usize]);
        for (p, a, q) in self.transitions() {
            b.add_transition(p, a, q);
        }
        for (p, a, q) in other.transitions() {
            b.add_transition(p + off, a, q + off);
        }
        // A final state of `self` behaves like each initial state of `other`.
        for f in self.finals() {
            for &i in &other.initial {
                for &(a, t) in &other.delta[i as usize] {
                    b.add_transition(f, a, t + off);
                }
            }
        }
        for &q in &self.initial {
            b.set_initial(q);
        }
        for q in other.finals() {
            b.set_final(q + off, true);
        }
        if other_initial_final {
            for q in self.finals() {
                b.set_final(q, true);
            }
        }
        Ok(b.build())
    }

    /// Per-state distance to the nearest final state (`None` if unreachable).
    pub(crate) fn distances_to_final(&self) -> Vec<Option<u32>> {
        let n = self.num_states();
        let mut rev: Vec<Vec<State>> = vec![Vec::new(); n];
        for (p, _, q) in self.transitions() {
            rev[q as usize].push(p);
        }
        let mut dist = vec![None; n];
        let mut queue = VecDeque::new();
        for q in self.finals() {
            dist[q as usize] = Some(0);
            queue.push_back(q);
        }
        while let Some(q) = queue.pop_front() {
            let d = dist[q as usize].unwrap();
            for &p in &rev[q as usize] {
                if dist[p as usize].is_none() {
                    dist[p as usize] = Some(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// `None` if the language is empty; otherwise the shortest accepted
    /// word, lexicographically least among the shortest.
    pub fn shortest_word(&self) -> Option<Word> {
        let dist = self.distances_to_final();
        let mut cur: Vec<State> = self.initial.clone();
        let mut best = cur.iter().filter_map(|&q| dist[q as usize]).min()?;
        let mut word = Vec::with_capacity(best as usize);
        let nsym = self.alphabet.len();
        let mut mark = vec![false; self.num_states()];
        while best > 0 {
            let mut chosen = None;
            'letters: for a in 0..nsym {
                let a = Symbol(a as u32);
                for &q in &cur {
                    for t in self.step(q, a) {
                        if dist[t as usize] == Some(best - 1) {
                            chosen = Some(a);
                            break 'letters;
                        }
                    }
                }
            }
            let a = chosen.expect("distance labelling is consistent");
            let mut next = Vec::new();
            for &q in &cur {
                for t in self.step(q, a) {
                    if dist[t as usize] == Some(best - 1) && !mark[t as usize] {
                        mark[t as usize] = true;
                        next.push(t);
                    }
                }
            }
            for &t in &next {
                mark[t as usize] = false;
            }
            word.push(a);
            cur = next;
            best -= 1;
        }
        Some(word)
    }

    pub fn is_empty(&self) -> bool {
        self.shortest_word().is_none()
    }

    /// Shortest accepted word of exactly `len` letters (lexicographically least).
    pub fn shortest_of_length(&self, len: usize) -> Option<Word> {
        // Layered reachability, then greedy reconstruction backwards-consistent.
        let n = self.num_states();
        let mut layers: Vec<Vec<bool>> = vec![vec![false; n]; len + 1];
        // coreach[i][q]: from q, a word of length len - i reaches a final.
        for q in self.finals() {
            layers[len][q as usize] = true;
        }
        for i in (0..len).rev() {
            for (p, _, q) in self.transitions() {
                if layers[i + 1][q as usize] {
                    layers[i][p as usize] = true;
                }
            }
        }
        let mut cur: Vec<State> = self
            .initial
            .iter()
            .copied()
            .filter(|&q| layers[0][q as usize])
            .collect();
        if cur.is_empty() {
            return None;
        }
        let mut word = Vec::with_capacity(len);
        for i in 0..len {
            let mut chosen = None;
            'letters: for a in self.alphabet.symbols() {
                for &q in &cur {
                    if self.step(q, a).any(|t| layers[i + 1][t as usize]) {
                        chosen = Some(a);
                        break 'letters;
                    }
                }
            }
            let a = chosen?;
            let mut next: Vec<State> = cur
                .iter()
                .flat_map(|&q| {
                    self.step(q, a)
                        .filter(|&t| layers[i + 1][t as usize])
                        .collect::<Vec<_>>()
                })
                .collect();
            next.sort_unstable();
            next.dedup();
            word.push(a);
            cur = next;
        }
        Some(word)
    }

    /// Classical inclusion: `L(self) ⊆ L(other)` via product with the
    /// complement of the determinized right operand.
    pub fn includes_classical(&self, other: &Nfa) -> Result<Inclusion> {
        let diff = self.intersect(&other.complement())?;
        Ok(match diff.shortest_word() {
            None => Inclusion::Holds,
            Some(w) => Inclusion::Counterexample(w),
        })
    }

    /// Antichain-based inclusion; explores pairs `(p, S)` and discards any
    /// pair subsumed by one with a smaller subset. Returns a shortest
    /// counterexample (not necessarily lexicographically least).
    pub fn includes_antichain(&self, other: &Nfa) -> Result<Inclusion> {
        self.check_same_alphabet(other)?;
        let nsym = self.alphabet.len();
        let is_rejecting = |set: &[State]| !set.iter().any(|&q| other.finals[q as usize]);
        // antichain[p] holds minimal subsets seen together with p.
        let mut antichain: Vec<Vec<Vec<State>>> = vec![Vec::new(); self.num_states()];
        // (p, subset, parent index, letter)
        let mut nodes: Vec<(State, Vec<State>, usize, Symbol)> = Vec::new();
        let mut queue = VecDeque::new();
        let start: Vec<State> = other.initial.clone();
        let covered = |ac: &Vec<Vec<State>>, s: &[State]| ac.iter().any(|t| is_subset(t, s));
        for &p in &self.initial {
            if covered(&antichain[p as usize], &start) {
                continue;
            }
            antichain[p as usize].retain(|t| !is_subset(&start, t));
            antichain[p as usize].push(start.clone());
            nodes.push((p, start.clone(), usize::MAX, Symbol(0)));
            queue.push_back(nodes.len() - 1);
        }
        let mut buckets: Vec<Vec<State>> = vec![Vec::new(); nsym];
        while let Some(i) = queue.pop_front() {
            let (p, ref set, _, _) = nodes[i];
            if self.finals[p as usize] && is_rejecting(set) {
                let mut word = Vec::new();
                let mut j = i;
                while nodes[j].2 != usize::MAX {
                    word.push(nodes[j].3);
                    j = nodes[j].2;
                }
                word.reverse();
                return Ok(Inclusion::Counterexample(word));
            }
            let set = set.clone();
            for b in buckets.iter_mut() {
                b.clear();
            }
            for &q in &set {
                for &(a, t) in &other.delta[q as usize] {
                    buckets[a.index()].push(t);
                }
            }
            for b in buckets.iter_mut() {
                b.sort_unstable();
                b.dedup();
            }
            for &(a, p2) in &self.delta[p as usize] {
                let succ = &buckets[a.index()];
                if covered(&antichain[p2 as usize], succ) {
                    continue;
                }
                antichain[p2 as usize].retain(|t| !is_subset(succ, t));
                antichain[p2 as usize].push(succ.clone());
                nodes.push((p2, succ.clone(), i, a));
                queue.push_back(nodes.len() - 1);
            }
        }
        Ok(Inclusion::Holds)
    }

    /// `L(self) ⊆ L(other)`. The verdict comes from the antichain
    /// algorithm; on failure the canonical (shortest, then least) witness is
    /// recomputed on the classical product.
    pub fn includes(&self, other: &Nfa) -> Result<Inclusion> {
        match self.includes_antichain(other)? {
            Inclusion::Holds => Ok(Inclusion::Holds),
            Inclusion::Counterexample(_) => self.includes_classical(other),
        }
    }

    pub fn equivalent(&self, other: &Nfa) -> Result<bool> {
        Ok(self.includes(other)?.holds() && other.includes(self)?.holds())
    }

    /// Drop states that are unreachable or cannot reach a final state.
    pub fn trim(&self) -> Nfa {
        let n = self.num_states();
        let mut reach = vec![false; n];
        let mut stack: Vec<State> = self.initial.clone();
        for &q in &stack {
            reach[q as usize] = true;
        }
        while let Some(q) = stack.pop() {
            for &(_, t) in &self.delta[q as usize] {
                if !reach[t as usize] {
                    reach[t as usize] = true;
                    stack.push(t);
                }
            }
        }
        let dist = self.distances_to_final();
        let keep: Vec<bool> = (0..n).map(|q| reach[q] && dist[q].is_some()).collect();
        let mut map = vec![State::MAX; n];
        let mut next = 0;
        for q in 0..n {
            if keep[q] {
                map[q] = next;
                next += 1;
            }
        }
        let mut b = NfaBuilder::new(self.alphabet.clone());
        for q in 0..n {
            if keep[q] {
                b.add_state(self.finals[q]);
            }
        }
        for (p, a, q) in self.transitions() {
            if keep[p as usize] && keep[q as usize] {
                b.add_transition(map[p as usize], a, map[q as usize]);
            }
        }
        for &q in &self.initial {
            if keep[q as usize] {
                b.set_initial(map[q as usize]);
            }
        }
        b.build()
    }

    /// Minimal complete DFA (Moore partition refinement).
    pub fn minimize(&self) -> Nfa {
        let d = if self.is_complete_dfa() {
            self.clone()
        } else {
            self.determinize()
        };
        let n = d.num_states();
        let nsym = d.alphabet.len();
        let mut class: Vec<u32> = d.finals.iter().map(|&f| f as u32).collect();
        let mut count = {
            let mut c = class.clone();
            c.sort_unstable();
            c.dedup();
            c.len()
        };
        loop {
            let mut sig_index: HashMap<Vec<u32>, u32> = HashMap::new();
            let mut next = vec![0u32; n];
            for q in 0..n {
                let mut sig = Vec::with_capacity(nsym + 1);
                sig.push(class[q]);
                for &(_, t) in &d.delta[q] {
                    sig.push(class[t as usize]);
                }
                let len = sig_index.len() as u32;
                next[q] = *sig_index.entry(sig).or_insert(len);
            }
            let new_count = sig_index.len();
            class = next;
            if new_count == count {
                break;
            }
            count = new_count;
        }
        // Renumber classes in BFS order from the initial state.
        let mut order = vec![u32::MAX; count];
        let mut reps = Vec::new();
        let mut queue = VecDeque::new();
        let init = d.initial[0];
        order[class[init as usize] as usize] = 0;
        reps.push(init);
        queue.push_back(init);
        while let Some(q) = queue.pop_front() {
            for &(_, t) in &d.delta[q as usize] {
                let c = class[t as usize] as usize;
                if order[c] == u32::MAX {
                    order[c] = reps.len() as u32;
                    reps.push(t);
                    queue.push_back(t);
                }
            }
        }
        let mut b = NfaBuilder::new(d.alphabet.clone());
        for &r in &reps {
            b.add_state(d.finals[r as usize]);
        }
        for (i, &r) in reps.iter().enumerate() {
            for &(a, t) in &d.delta[r as usize] {
                b.add_transition(i as State, a, order[class[t as usize] as usize]);
            }
        }
        b.set_initial(0);
        b.build()
    }

    /// Textual `automaton` block (the export format).
    pub fn to_block(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "automaton {name} {{");
        let _ = writeln!(s, "  alphabet {};", self.alphabet.names().join(", "));
        let _ = writeln!(s, "  states {};", self.num_states());
        let list = |v: &mut dyn Iterator<Item = State>| {
            v.map(|q| q.to_string()).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(s, "  initial {};", list(&mut self.initial.iter().copied()));
        let _ = writeln!(s, "  final {};", list(&mut self.finals()));
        for (p, a, q) in self.transitions() {
            let _ = writeln!(s, "  {p} -{}-> {q};", self.alphabet.name(a));
        }
        s.push('}');
        s
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{name}\" {{");
        let _ = writeln!(s, "  rankdir=LR;");
        for q in 0..self.num_states() {
            let shape = if self.finals[q] {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(s, "  q{q} [shape={shape}, label=\"{q}\"];");
        }
        for (i, &q) in self.initial.iter().enumerate() {
            let _ = writeln!(s, "  init{i} [shape=point];");
            let _ = writeln!(s, "  init{i} -> q{q};");
        }
        // Merge parallel edges into one label.
        let mut edges: Vec<((State, State), Vec<&str>)> = Vec::new();
        let mut pos: HashMap<(State, State), usize> = HashMap::new();
        for (p, a, q) in self.transitions() {
            let i = *pos.entry((p, q)).or_insert_with(|| {
                edges.push(((p, q), Vec::new()));
                edges.len() - 1
            });
            edges[i].1.push(self.alphabet.name(a));
        }
        for ((p, q), labels) in edges {
            let _ = writeln!(s, "  q{p} -> q{q} [label=\"{}\"];", labels.join(", "));
        }
        s.push('}');
        s
    }

    /// Number of accepted words of exactly `len` letters (saturating).
    pub fn count_words(&self, len: usize) -> u128 {
        let d = self.determinize();
        let mut cur = vec![0u128; d.num_states()];
        cur[d.initial[0] as usize] = 1;
        for _ in 0..len {
            let mut next = vec![0u128; d.num_states()];
            for (p, _, q) in d.transitions() {
                next[q as usize] = next[q as usize].saturating_add(cur[p as usize]);
            }
            cur = next;
        }
        d.finals()
            .fold(0u128, |acc, q| acc.saturating_add(cur[q as usize]))
    }

    /// All accepted words of exactly `len` letters, in lexicographic order.
    /// Intended for tests and small instances.
    pub fn words_of_length(&self, len: usize) -> Vec<Word> {
        let n = self.num_states();
        let mut co = vec![vec![false; n]; len + 1];
        for q in self.finals() {
            co[len][q as usize] = true;
        }
        for i in (0..len).rev() {
            for (p, _, q) in self.transitions() {
                if co[i + 1][q as usize] {
                    co[i][p as usize] = true;
                }
            }
        }
        let mut out = Vec::new();
        let start: Vec<State> = self
            .initial
            .iter()
            .copied()
            .filter(|&q| co[0][q as usize])
            .collect();
        let mut word = Vec::with_capacity(len);
        self.enumerate_rec(&co, start, &mut word, len, &mut out);
        out
    }

    fn enumerate_rec(
        &self,
        co: &[Vec<bool>],
        cur: Vec<State>,
        word: &mut Word,
        len: usize,
        out: &mut Vec<Word>,
    ) {
        if cur.is_empty() {
            return;
        }
        let i = word.len();
        if i == len {
            out.push(word.clone());
            return;
        }
        for a in self.alphabet.symbols() {
            let mut next: Vec<State> = Vec::new();
            for &q in &cur {
                for t in self.step(q, a) {
                    if co[i + 1][t as usize] {
                        next.push(t);
                    }
                }
            }
            if next.is_empty() {
                continue;
            }
            next.sort_unstable();
            next.dedup();
            word.push(a);
            self.enumerate_rec(co, next, word, len, out);
            word.pop();
        }
    }
}

fn is_subset(a: &[State], b: &[State]) -> bool {
    // both sorted
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
    }
    true
}

impl fmt::Debug for Nfa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_block("nfa"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Arc<Alphabet> {
        Alphabet::new(["a", "b"]).unwrap()
    }

    fn sym(alph: &Alphabet, w: &str) -> Word {
        w.chars()
            .map(|c| alph.lookup(&c.to_string()).unwrap())
            .collect()
    }

    /// (a|b)* a (a|b)
    fn second_to_last_a() -> Nfa {
        let al = ab();
        let (a, b) = (Symbol(0), Symbol(1));
        Nfa::from_parts(
            al,
            3,
            [(0, a, 0), (0, b, 0), (0, a, 1), (1, a, 2), (1, b, 2)],
            [0],
            [2],
        )
    }

    #[test]
    fn determinize_is_complete_and_equivalent() {
        let n = second_to_last_a();
        let d = n.determinize();
        assert!(d.is_complete_dfa());
        assert!(d.num_states() <= 1 << n.num_states());
        for len in 0..=8 {
            for w in Nfa::universal(ab()).words_of_length(len) {
                assert_eq!(n.accepts(&w), d.accepts(&w));
            }
        }
    }

    #[test]
    fn determinize_empty_language() {
        let e = Nfa::empty(ab());
        let d = e.determinize();
        assert!(d.is_complete_dfa());
        assert!(d.is_empty());
        assert!(!d.accepts(&[]));
    }

    #[test]
    fn shortest_word_prefers_least_symbol() {
        let al = ab();
        // a a* accepts "a" first
        let n = Nfa::from_parts(
            al.clone(),
            2,
            [(0, Symbol(0), 1), (1, Symbol(0), 1)],
            [0],
            [1],
        );
        assert_eq!(n.shortest_word(), Some(sym(&al, "a")));
        assert_eq!(Nfa::empty(al.clone()).shortest_word(), None);
        assert_eq!(second_to_last_a().shortest_word(), Some(sym(&al, "aa")));
    }

    #[test]
    fn inclusion_examples() {
        let al = ab();
        let astar = Nfa::star_of(al.clone(), &[Symbol(0)]);
        let all = Nfa::universal(al.clone());
        assert_eq!(astar.includes(&all).unwrap(), Inclusion::Holds);
        assert_eq!(
            all.includes(&astar).unwrap(),
            Inclusion::Counterexample(sym(&al, "b"))
        );
        assert_eq!(
            all.includes_antichain(&astar).unwrap(),
            Inclusion::Counterexample(sym(&al, "b"))
        );
    }

    #[test]
    fn product_or_with_empty_is_identity() {
        let n = second_to_last_a();
        let u = n.product(&Nfa::empty(ab()), Mode::Or).unwrap();
        assert!(u.equivalent(&n).unwrap());
        let none = n.product(&n.complement(), Mode::And).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn minimize_keeps_language() {
        let n = second_to_last_a();
        let m = n.minimize();
        assert_eq!(m.num_states(), 4);
        assert!(m.equivalent(&n).unwrap());
    }

    #[test]
    fn concat_handles_nullable_right() {
        let al = ab();
        let a = Nfa::word(al.clone(), &sym(&al, "a"));
        let bstar = Nfa::star_of(al.clone(), &[Symbol(1)]);
        let c = a.concat(&bstar).unwrap();
        assert!(c.accepts(&sym(&al, "a")));
        assert!(c.accepts(&sym(&al, "abb")));
        assert!(!c.accepts(&sym(&al, "ba")));
    }

    #[test]
    fn alphabet_mismatch_is_an_error() {
        let other = Alphabet::new(["x"]).unwrap();
        let r = Nfa::universal(ab()).intersect(&Nfa::universal(other));
        assert!(matches!(r, Err(Error::AlphabetMismatch(_))));
    }
}
