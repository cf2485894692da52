//! Length-preserving multi-track relations.
//!
//! A `k`-track relation is an automaton over the tuple alphabet of its track
//! alphabets: a tuple word `(v1,w1)…(vn,wn)` stands for the pair `(v, w)`.
//! Track order is fixed as source, destination, then auxiliary tracks.

use std::collections::HashMap;
use std::sync::Arc;

use crate::alphabet::{Alphabet, Symbol, Word};
use crate::error::{Error, Result};
use crate::nfa::{Inclusion, Mode, Nfa, NfaBuilder, State};
use crate::syntax::{compile, Macros, Regex};

#[derive(Clone, Debug)]
pub struct Relation {
    tracks: Vec<Arc<Alphabet>>,
    carrier: Nfa,
}

/// Result of projecting away one track.
#[derive(Clone, Debug)]
pub enum Projection {
    Relation(Relation),
    Language(Nfa),
}

impl Projection {
    pub fn into_language(self) -> Option<Nfa> {
        match self {
            Projection::Language(n) => Some(n),
            Projection::Relation(_) => None,
        }
    }

    pub fn into_relation(self) -> Option<Relation> {
        match self {
            Projection::Relation(r) => Some(r),
            Projection::Language(_) => None,
        }
    }
}

/// Alphabet of a list of tracks: the track itself if there is only one.
fn alphabet_of(tracks: &[Arc<Alphabet>]) -> Result<Arc<Alphabet>> {
    match tracks {
        [] => Err(Error::Invalid("a relation needs at least one track".into())),
        [one] => Ok(one.clone()),
        many => Alphabet::product(many),
    }
}

/// Synchronous product of automata that each read some of the tracks of a
/// common tuple word, followed by projection onto `keep`.
///
/// `parts[i] = (automaton, track map)`: the automaton reads the tracks listed
/// in the map, in that order. Tracks not in `keep` are existentially
/// quantified.
pub fn join(tracks: &[Arc<Alphabet>], parts: &[(&Nfa, &[usize])], keep: &[usize]) -> Result<Nfa> {
    for &(nfa, map) in parts {
        for &t in map {
            if t >= tracks.len() {
                return Err(Error::TrackOutOfRange {
                    index: t,
                    tracks: tracks.len(),
                });
            }
        }
        let sub: Vec<_> = map.iter().map(|&t| tracks[t].clone()).collect();
        let want = alphabet_of(&sub)?;
        if **nfa.alphabet() != *want {
            return Err(Error::AlphabetMismatch(format!(
                "operand over [{}] used where [{}] is expected",
                nfa.alphabet(),
                want
            )));
        }
    }
    for &t in keep {
        if t >= tracks.len() {
            return Err(Error::TrackOutOfRange {
                index: t,
                tracks: tracks.len(),
            });
        }
    }
    let out_tracks: Vec<_> = keep.iter().map(|&t| tracks[t].clone()).collect();
    let out_alph = alphabet_of(&out_tracks)?;
    let sizes: Vec<usize> = tracks.iter().map(|a| a.len()).collect();

    // Encoders from a full letter (as component vector) to each part's letter
    // and to the output letter.
    let encode = |comps: &[Symbol], map: &[usize]| -> Symbol {
        let mut id = 0usize;
        for &t in map {
            id = id * sizes[t] + comps[t].index();
        }
        Symbol(id as u32)
    };

    let mut index: HashMap<Vec<State>, State> = HashMap::new();
    let mut queue: Vec<Vec<State>> = Vec::new();
    let mut b = NfaBuilder::new(out_alph);

    let all_final = |tuple: &[State]| parts.iter().zip(tuple).all(|((n, _), &q)| n.is_final(q));
    let mut intern =
        |tuple: Vec<State>, b: &mut NfaBuilder, queue: &mut Vec<Vec<State>>| -> State {
            if let Some(&id) = index.get(&tuple) {
                return id;
            }
            let id = b.add_state(all_final(&tuple));
            index.insert(tuple.clone(), id);
            queue.push(tuple);
            id
        };

    // Cartesian product of initial states.
    let mut inits: Vec<Vec<State>> = vec![Vec::new()];
    for (n, _) in parts {
        let mut next = Vec::new();
        for prefix in &inits {
            for &q in n.initial() {
                let mut t = prefix.clone();
                t.push(q);
                next.push(t);
            }
        }
        inits = next;
    }
    for t in inits {
        let id = intern(t, &mut b, &mut queue);
        b.set_initial(id);
    }

    // Tracks actually read by some part; unread tracks are free.
    let mut read = vec![false; tracks.len()];
    for (_, map) in parts {
        for &t in *map {
            read[t] = true;
        }
    }

    let mut i = 0;
    let mut comps = vec![Symbol(0); tracks.len()];
    while i < queue.len() {
        let tuple = queue[i].clone();
        let src = i as State;
        // Enumerate assignments to the read tracks, part by part, pruning on
        // parts without a matching transition.
        let mut results: Vec<(Symbol, Vec<State>)> = Vec::new();
        expand(
            parts,
            &tuple,
            0,
            &mut comps,
            &mut vec![false; tracks.len()],
            &mut Vec::with_capacity(parts.len()),
            &sizes,
            &mut |comps, targets| {
                // Free output tracks range over their whole alphabet.
                let free: Vec<usize> = keep.iter().copied().filter(|&t| !read[t]).collect();
                let mut c = comps.to_vec();
                let mut idx = vec![0usize; free.len()];
                loop {
                    for (j, &t) in free.iter().enumerate() {
                        c[t] = Symbol(idx[j] as u32);
                    }
                    results.push((encode(&c, keep), targets.to_vec()));
                    let mut j = 0;
                    loop {
                        if j == free.len() {
                            return;
                        }
                        idx[j] += 1;
                        if idx[j] < sizes[free[j]] {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                }
            },
        );
        for (letter, targets) in results {
            let dst = intern(targets, &mut b, &mut queue);
            b.add_transition(src, letter, dst);
        }
        i += 1;
    }
    Ok(b.build())
}

/// Depth-first choice of one transition per part, consistent on shared
/// tracks.
#[allow(clippy::too_many_arguments)]
fn expand(
    parts: &[(&Nfa, &[usize])],
    tuple: &[State],
    k: usize,
    comps: &mut Vec<Symbol>,
    fixed: &mut Vec<bool>,
    targets: &mut Vec<State>,
    sizes: &[usize],
    emit: &mut dyn FnMut(&[Symbol], &[State]),
) {
    if k == parts.len() {
        emit(comps, targets);
        return;
    }
    let (nfa, map) = parts[k];
    for &(letter, to) in nfa.successors(tuple[k]) {
        // Decode the part letter into its tracks.
        let mut rest = letter.index();
        let mut local = vec![Symbol(0); map.len()];
        for j in (0..map.len()).rev() {
            let s = sizes[map[j]];
            local[j] = Symbol((rest % s) as u32);
            rest /= s;
        }
        let mut ok = true;
        let mut newly = Vec::new();
        for (j, &t) in map.iter().enumerate() {
            if fixed[t] {
                if comps[t] != local[j] {
                    ok = false;
                    break;
                }
            } else {
                fixed[t] = true;
                comps[t] = local[j];
                newly.push(t);
            }
        }
        if ok {
            targets.push(to);
            expand(parts, tuple, k + 1, comps, fixed, targets, sizes, emit);
            targets.pop();
        }
        for t in newly {
            fixed[t] = false;
        }
    }
}

/// Transitions of a binary carrier from `q` whose first component is `a`;
/// these letters are contiguous in the mixed-radix encoding.
fn out_range(nfa: &Nfa, q: State, a: Symbol, out_len: usize) -> &[(Symbol, State)] {
    let row = nfa.successors(q);
    let lo = Symbol((a.index() * out_len) as u32);
    let hi = Symbol(((a.index() + 1) * out_len) as u32);
    let start = row.partition_point(|&(s, _)| s < lo);
    let end = row.partition_point(|&(s, _)| s < hi);
    &row[start..end]
}

/// Convolution of equal-length words into a tuple word.
pub fn convolve(alphabet: &Alphabet, words: &[&[Symbol]]) -> Result<Word> {
    if words.len() != alphabet.arity() || alphabet.arity() < 2 {
        return Err(Error::TrackOutOfRange {
            index: words.len(),
            tracks: alphabet.arity(),
        });
    }
    let n = words[0].len();
    if words.iter().any(|w| w.len() != n) {
        return Err(Error::LengthMismatch);
    }
    let mut parts = vec![Symbol(0); words.len()];
    Ok((0..n)
        .map(|i| {
            for (p, w) in parts.iter_mut().zip(words) {
                *p = w[i];
            }
            alphabet.encode(&parts)
        })
        .collect())
}

/// Split a tuple word into its component words.
pub fn deconvolve(alphabet: &Alphabet, word: &[Symbol]) -> Vec<Word> {
    let mut out = vec![Vec::with_capacity(word.len()); alphabet.arity()];
    for &s in word {
        for (t, c) in alphabet.decode(s).into_iter().enumerate() {
            out[t].push(c);
        }
    }
    out
}

impl Relation {
    pub fn new(tracks: Vec<Arc<Alphabet>>, carrier: Nfa) -> Result<Relation> {
        if tracks.len() < 2 {
            return Err(Error::Invalid(
                "a relation needs at least two tracks".into(),
            ));
        }
        let alph = Alphabet::product(&tracks)?;
        let carrier = carrier.with_alphabet(alph)?;
        Ok(Relation { tracks, carrier })
    }

    /// Binary relation from a regex over pair letters.
    pub fn parse(text: &str, tracks: Vec<Arc<Alphabet>>) -> Result<Relation> {
        Relation::from_regex(&Regex::parse(text)?, tracks, &Macros::new())
    }

    pub fn from_regex(re: &Regex, tracks: Vec<Arc<Alphabet>>, macros: &Macros) -> Result<Relation> {
        let alph = Alphabet::product(&tracks)?;
        let carrier = compile(re, &alph, macros)?;
        Ok(Relation { tracks, carrier })
    }

    pub fn empty(tracks: Vec<Arc<Alphabet>>) -> Result<Relation> {
        let alph = Alphabet::product(&tracks)?;
        Ok(Relation {
            tracks,
            carrier: Nfa::empty(alph),
        })
    }

    /// All tuples of equal-length words.
    pub fn universal(tracks: Vec<Arc<Alphabet>>) -> Result<Relation> {
        let alph = Alphabet::product(&tracks)?;
        Ok(Relation {
            tracks,
            carrier: Nfa::universal(alph),
        })
    }

    pub fn identity(alph: &Arc<Alphabet>) -> Result<Relation> {
        let tracks = vec![alph.clone(), alph.clone()];
        let pair = Alphabet::product(&tracks)?;
        let diag: Vec<Symbol> = alph.symbols().map(|s| pair.encode(&[s, s])).collect();
        Ok(Relation {
            tracks,
            carrier: Nfa::star_of(pair, &diag),
        })
    }

    /// `{(x, y) : x ∈ a, y ∈ b, |x| = |y|}`.
    pub fn cross(a: &Nfa, b: &Nfa) -> Result<Relation> {
        let tracks = vec![a.alphabet().clone(), b.alphabet().clone()];
        let carrier = join(&tracks, &[(a, &[0]), (b, &[1])], &[0, 1])?;
        Ok(Relation { tracks, carrier })
    }

    pub fn tracks(&self) -> &[Arc<Alphabet>] {
        &self.tracks
    }

    pub fn arity(&self) -> usize {
        self.tracks.len()
    }

    pub fn carrier(&self) -> &Nfa {
        &self.carrier
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        self.carrier.alphabet()
    }

    pub fn contains(&self, words: &[&[Symbol]]) -> bool {
        match convolve(self.alphabet(), words) {
            Ok(w) => self.carrier.accepts(&w),
            Err(_) => false,
        }
    }

    fn check_tracks(&self, other: &Relation) -> Result<()> {
        if self.tracks.len() != other.tracks.len()
            || self
                .tracks
                .iter()
                .zip(&other.tracks)
                .any(|(a, b)| **a != **b)
        {
            return Err(Error::AlphabetMismatch(format!(
                "relations over [{}] and [{}]",
                self.alphabet(),
                other.alphabet()
            )));
        }
        Ok(())
    }

    fn check_binary(&self) -> Result<()> {
        if self.arity() != 2 {
            return Err(Error::TrackOutOfRange {
                index: 2,
                tracks: self.arity(),
            });
        }
        Ok(())
    }

    pub fn union(&self, other: &Relation) -> Result<Relation> {
        self.check_tracks(other)?;
        Ok(Relation {
            tracks: self.tracks.clone(),
            carrier: self.carrier.union(&other.carrier)?,
        })
    }

    pub fn intersect(&self, other: &Relation) -> Result<Relation> {
        self.check_tracks(other)?;
        Ok(Relation {
            tracks: self.tracks.clone(),
            carrier: self.carrier.product(&other.carrier, Mode::And)?,
        })
    }

    pub fn complement(&self) -> Relation {
        Relation {
            tracks: self.tracks.clone(),
            carrier: self.carrier.complement(),
        }
    }

    pub fn includes(&self, other: &Relation) -> Result<Inclusion> {
        self.check_tracks(other)?;
        self.carrier.includes(&other.carrier)
    }

    pub fn equivalent(&self, other: &Relation) -> Result<bool> {
        self.check_tracks(other)?;
        self.carrier.equivalent(&other.carrier)
    }

    pub fn is_empty(&self) -> bool {
        self.carrier.is_empty()
    }

    /// Shortest tuple in the relation, split into component words.
    pub fn shortest(&self) -> Option<Vec<Word>> {
        self.carrier
            .shortest_word()
            .map(|w| deconvolve(self.alphabet(), &w))
    }

    /// `{(x, z) : ∃y. (x, y) ∈ self ∧ (y, z) ∈ other}`.
    pub fn compose(&self, other: &Relation) -> Result<Relation> {
        self.check_binary()?;
        other.check_binary()?;
        if *self.tracks[1] != *other.tracks[0] {
            return Err(Error::AlphabetMismatch(format!(
                "cannot compose: [{}] then [{}]",
                self.tracks[1], other.tracks[0]
            )));
        }
        let tracks = [
            self.tracks[0].clone(),
            self.tracks[1].clone(),
            other.tracks[1].clone(),
        ];
        let carrier = join(
            &tracks,
            &[(&self.carrier, &[0, 1]), (&other.carrier, &[1, 2])],
            &[0, 2],
        )?;
        Ok(Relation {
            tracks: vec![tracks[0].clone(), tracks[2].clone()],
            carrier,
        })
    }

    /// `{y : ∃x ∈ s. (x, y) ∈ self}`.
    pub fn post_image(&self, s: &Nfa) -> Result<Nfa> {
        self.check_binary()?;
        join(&self.tracks, &[(&self.carrier, &[0, 1]), (s, &[0])], &[1])
    }

    /// `{x : ∃y ∈ s. (x, y) ∈ self}`.
    pub fn pre_image(&self, s: &Nfa) -> Result<Nfa> {
        self.check_binary()?;
        join(&self.tracks, &[(&self.carrier, &[0, 1]), (s, &[1])], &[0])
    }

    pub fn domain(&self) -> Result<Nfa> {
        self.check_binary()?;
        join(&self.tracks, &[(&self.carrier, &[0, 1])], &[0])
    }

    pub fn range(&self) -> Result<Nfa> {
        self.check_binary()?;
        join(&self.tracks, &[(&self.carrier, &[0, 1])], &[1])
    }

    /// Restrict track `t` to words of `s`.
    pub fn restrict(&self, t: usize, s: &Nfa) -> Result<Relation> {
        let all: Vec<usize> = (0..self.arity()).collect();
        let carrier = join(&self.tracks, &[(&self.carrier, &all), (s, &[t])], &all)?;
        Ok(Relation {
            tracks: self.tracks.clone(),
            carrier,
        })
    }

    /// Reorder tracks: track `i` of the result is track `perm[i]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Relation> {
        let k = self.arity();
        let mut seen = vec![false; k];
        if perm.len() != k {
            return Err(Error::Invalid(format!(
                "permutation of length {} for {k} tracks",
                perm.len()
            )));
        }
        for &p in perm {
            if p >= k {
                return Err(Error::TrackOutOfRange {
                    index: p,
                    tracks: k,
                });
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::Invalid("not a permutation".into()));
            }
        }
        let tracks: Vec<_> = perm.iter().map(|&p| self.tracks[p].clone()).collect();
        let alph = Alphabet::product(&tracks)?;
        let old = self.alphabet().clone();
        let carrier = self.carrier.relabel(alph.clone(), |s| {
            let c = old.decode(s);
            let parts: Vec<Symbol> = perm.iter().map(|&p| c[p]).collect();
            Some(alph.encode(&parts))
        });
        Ok(Relation { tracks, carrier })
    }

    pub fn inverse(&self) -> Result<Relation> {
        self.check_binary()?;
        self.permute(&[1, 0])
    }

    /// Insert a free track over `alph` at position `at`.
    pub fn cylindrify(&self, at: usize, alph: &Arc<Alphabet>) -> Result<Relation> {
        let k = self.arity();
        if at > k {
            return Err(Error::TrackOutOfRange {
                index: at,
                tracks: k + 1,
            });
        }
        let mut tracks = self.tracks.clone();
        tracks.insert(at, alph.clone());
        let map: Vec<usize> = (0..k).map(|t| if t < at { t } else { t + 1 }).collect();
        let all: Vec<usize> = (0..=k).collect();
        let carrier = join(&tracks, &[(&self.carrier, &map)], &all)?;
        Ok(Relation { tracks, carrier })
    }

    /// Existentially quantify track `t`.
    pub fn project(&self, t: usize) -> Result<Projection> {
        let k = self.arity();
        if t >= k {
            return Err(Error::TrackOutOfRange {
                index: t,
                tracks: k,
            });
        }
        let all: Vec<usize> = (0..k).collect();
        let keep: Vec<usize> = all.iter().copied().filter(|&i| i != t).collect();
        let carrier = join(&self.tracks, &[(&self.carrier, &all)], &keep)?;
        if keep.len() == 1 {
            Ok(Projection::Language(carrier))
        } else {
            let tracks = keep.iter().map(|&i| self.tracks[i].clone()).collect();
            Ok(Projection::Relation(Relation { tracks, carrier }))
        }
    }

    /// All `y` with `(x, y)` in a binary relation, in lexicographic order.
    pub fn successors(&self, x: &[Symbol]) -> Vec<Word> {
        let n = x.len();
        let out_len = self.tracks[1].len();
        let nfa = &self.carrier;
        let range = |q: State, a: Symbol| out_range(nfa, q, a, out_len);
        let states = nfa.num_states();
        // co[i][q]: from q the suffix x[i..] can be read to a final state.
        let mut co = vec![vec![false; states]; n + 1];
        for q in nfa.finals() {
            co[n][q as usize] = true;
        }
        for i in (0..n).rev() {
            for q in 0..states {
                co[i][q] = range(q as State, x[i])
                    .iter()
                    .any(|&(_, t)| co[i + 1][t as usize]);
            }
        }
        let start: Vec<State> = nfa
            .initial()
            .iter()
            .copied()
            .filter(|&q| co[0][q as usize])
            .collect();
        let mut out = Vec::new();
        if start.is_empty() {
            return out;
        }
        let mut word = Vec::with_capacity(n);
        #[allow(clippy::too_many_arguments)]
        fn rec(
            i: usize,
            cur: &[State],
            x: &[Symbol],
            out_len: usize,
            co: &[Vec<bool>],
            nfa: &Nfa,
            word: &mut Word,
            out: &mut Vec<Word>,
        ) {
            if i == x.len() {
                out.push(word.clone());
                return;
            }
            let mut by_out: Vec<Vec<State>> = vec![Vec::new(); out_len];
            for &q in cur {
                for &(s, t) in out_range(nfa, q, x[i], out_len) {
                    if co[i + 1][t as usize] {
                        by_out[s.index() % out_len].push(t);
                    }
                }
            }
            for (b, mut next) in by_out.into_iter().enumerate() {
                if next.is_empty() {
                    continue;
                }
                next.sort_unstable();
                next.dedup();
                word.push(Symbol(b as u32));
                rec(i + 1, &next, x, out_len, co, nfa, word, out);
                word.pop();
            }
        }
        rec(0, &start, x, out_len, &co, nfa, &mut word, &mut out);
        out
    }

    /// Remove useless states (for export).
    pub fn trim(&self) -> Relation {
        Relation {
            tracks: self.tracks.clone(),
            carrier: self.carrier.trim(),
        }
    }

    pub fn to_block(&self, name: &str) -> String {
        self.carrier.to_block(name)
    }
}
