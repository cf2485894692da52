//! Fairness encoding: turn a system with a regular fairness annotator into
//! a plain system whose configurations carry unary counters.
//!
//! Every letter `a` of an encoded configuration is followed by a counter
//! block over `#1` (pebble) and `#0` (gap). A block `#1^v #0^(b-v)` holds
//! the value `v`; a block of gaps only is an alarm, meaning some fairness
//! obligation was pending for too long.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::alphabet::{Alphabet, Symbol, Word};
use crate::error::{Error, Result};
use crate::nfa::{Nfa, NfaBuilder, State};
use crate::relation::Relation;
use crate::spec::{gamma, Annotator, GammaLetter, SystemSpec, GAP, PEBBLE};
use crate::syntax::compile_regex;

/// Suffix appended to the name of an encoded system.
pub const ENCODED_SUFFIX: &str = "-encoded";

/// The counter alphabet `{#1, #0}`.
pub fn counter_alphabet() -> &'static Arc<Alphabet> {
    static C: OnceLock<Arc<Alphabet>> = OnceLock::new();
    C.get_or_init(|| Alphabet::new([PEBBLE, GAP]).unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gadget {
    Id,
    Dec,
    Reset,
}

impl Gadget {
    pub const ALL: [Gadget; 3] = [Gadget::Id, Gadget::Dec, Gadget::Reset];

    fn source(self) -> &'static str {
        match self {
            Gadget::Id => "(#1/#1)+ (#0/#0)*",
            Gadget::Dec => "(#1/#1)* #1/#0 (#0/#0)*",
            Gadget::Reset => "(#1/#1)+ (#0/#1)*",
        }
    }

    /// The gadget as a relation over any alphabet containing the counter
    /// symbols.
    pub fn relation_over(self, alph: &Arc<Alphabet>) -> Result<Relation> {
        Relation::parse(self.source(), vec![alph.clone(), alph.clone()])
    }

    pub fn relation(self) -> Relation {
        self.relation_over(counter_alphabet())
            .expect("gadget sources are well formed")
    }
}

impl fmt::Display for Gadget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gadget::Id => "ID",
            Gadget::Dec => "DEC",
            Gadget::Reset => "RESET",
        })
    }
}

/// `(ID, DEC, RESET)` over the counter alphabet.
pub fn counter_gadgets() -> (Relation, Relation, Relation) {
    (
        Gadget::Id.relation(),
        Gadget::Dec.relation(),
        Gadget::Reset.relation(),
    )
}

/// The substitution of annotation letters by counter gadgets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SigmaTable(pub [Gadget; 8]);

impl Default for SigmaTable {
    fn default() -> Self {
        let mut t = [Gadget::Reset; 8];
        for g in GammaLetter::ALL {
            t[g.index()] = match (g.premise, g.consequence, g.compassion) {
                (_, true, _) | (false, false, false) => Gadget::Reset,
                (true, false, _) => Gadget::Dec,
                (false, false, true) => Gadget::Id,
            };
        }
        SigmaTable(t)
    }
}

impl SigmaTable {
    pub fn get(&self, g: GammaLetter) -> Gadget {
        self.0[g.index()]
    }

    /// Every table differing from this one in exactly one entry, with the
    /// changed letter.
    pub fn mutations(&self) -> Vec<(GammaLetter, SigmaTable)> {
        let mut out = Vec::new();
        for g in GammaLetter::ALL {
            for alt in Gadget::ALL {
                if alt != self.get(g) {
                    let mut t = *self;
                    t.0[g.index()] = alt;
                    out.push((g, t));
                }
            }
        }
        out
    }
}

/// Check that annotator outputs agree on the kind bit: whenever two
/// annotation words both have a position `i`, their kind bits there are
/// equal. Returns `None` if consistent, otherwise two configurations whose
/// annotations disagree at the returned position.
pub fn check_annotator(ann: &Annotator) -> Result<Option<(Word, Word, usize)>> {
    let nfa = ann.relation().carrier().trim();
    let alph = nfa.alphabet().clone();
    let dist = nfa.distances_to_final();
    let coreach = |q: State| dist[q as usize].is_some();
    let kind_of = |s: Symbol| GammaLetter::from_symbol(alph.component(s, 1)).compassion;

    let mut seen: HashMap<Vec<State>, usize> = HashMap::new();
    let mut cur: Vec<State> = nfa
        .initial()
        .iter()
        .copied()
        .filter(|&q| coreach(q))
        .collect();
    let mut depth = 0;
    while !cur.is_empty() && !seen.contains_key(&cur) {
        seen.insert(cur.clone(), depth);
        let mut kinds = [false; 2];
        let mut next = Vec::new();
        for &q in &cur {
            for &(s, t) in nfa.successors(q) {
                if coreach(t) {
                    kinds[kind_of(s) as usize] = true;
                    next.push(t);
                }
            }
        }
        if kinds[0] && kinds[1] {
            let w0 = witness_with_kind(&nfa, depth, false)?;
            let w1 = witness_with_kind(&nfa, depth, true)?;
            return Ok(Some((w0, w1, depth)));
        }
        next.sort_unstable();
        next.dedup();
        cur = next;
        depth += 1;
    }
    Ok(None)
}

/// Shortest configuration whose annotation has kind `kind` at `pos`.
fn witness_with_kind(carrier: &Nfa, pos: usize, kind: bool) -> Result<Word> {
    let alph = carrier.alphabet().clone();
    let all: Vec<Symbol> = alph.symbols().collect();
    let hit: Vec<Symbol> = all
        .iter()
        .copied()
        .filter(|&s| GammaLetter::from_symbol(alph.component(s, 1)).compassion == kind)
        .collect();
    let mut b = NfaBuilder::new(alph.clone());
    b.add_states(pos + 2);
    b.set_initial(0);
    b.set_final(pos as State + 1, true);
    for i in 0..pos {
        for &s in &all {
            b.add_transition(i as State, s, i as State + 1);
        }
    }
    for &s in &hit {
        b.add_transition(pos as State, s, pos as State + 1);
    }
    for &s in &all {
        b.add_transition(pos as State + 1, s, pos as State + 1);
    }
    let w = carrier
        .intersect(&b.build())?
        .shortest_word()
        .expect("position carries this kind");
    Ok(w.into_iter().map(|s| alph.component(s, 0)).collect())
}

/// Letters of the intermediate automaton: pairs of `Σ × Σ` (same ids as
/// the pair alphabet) followed by the eight annotation letters.
pub fn intermediate_alphabet(sigma: &Arc<Alphabet>) -> Result<Arc<Alphabet>> {
    let pairs = Alphabet::product(&[sigma.clone(), sigma.clone()])?;
    Alphabet::new(pairs.names().iter().chain(gamma().names().iter()))
}

/// Stage 1: interleave a move relation with the annotation of its source.
/// Accepts `(a1,b1) c1 (a2,b2) c2 …` where `(a, b)` is in `rel` and `c` is
/// an annotation of `a`. States are triples `(q, f, c)` with `c` either an
/// annotation letter still to be emitted or nothing.
pub fn stage1(rel: &Relation, ann: &Annotator) -> Result<Nfa> {
    let sigma = rel.tracks()[0].clone();
    if rel.arity() != 2 || *rel.tracks()[1] != *sigma || **ann.alphabet() != *sigma {
        return Err(Error::AlphabetMismatch(
            "move relation and annotator must share one alphabet".into(),
        ));
    }
    let inter = intermediate_alphabet(&sigma)?;
    let npairs = sigma.len() * sigma.len();
    let r = rel.carrier();
    let f = ann.relation().carrier();
    let falph = f.alphabet();

    const PENDING_NONE: u8 = 8;
    let mut ids: HashMap<(State, State, u8), State> = HashMap::new();
    let mut b = NfaBuilder::new(inter);
    let mut queue = Vec::new();
    type Key = (State, State, u8);
    let intern = |key: Key,
                  ids: &mut HashMap<Key, State>,
                  b: &mut NfaBuilder,
                  queue: &mut Vec<Key>|
     -> State {
        *ids.entry(key).or_insert_with(|| {
            let accepting = key.2 == PENDING_NONE && r.is_final(key.0) && f.is_final(key.1);
            queue.push(key);
            b.add_state(accepting)
        })
    };
    for &q in r.initial() {
        for &p in f.initial() {
            let s = intern((q, p, PENDING_NONE), &mut ids, &mut b, &mut queue);
            b.set_initial(s);
        }
    }
    while let Some(key) = queue.pop() {
        let from = ids[&key];
        let (q, p, c) = key;
        if c != PENDING_NONE {
            let to = intern((q, p, PENDING_NONE), &mut ids, &mut b, &mut queue);
            b.add_transition(from, Symbol((npairs + c as usize) as u32), to);
            continue;
        }
        for &(ab, q2) in r.successors(q) {
            let a = rel.alphabet().component(ab, 0);
            for &(ac, p2) in f.successors(p) {
                if falph.component(ac, 0) != a {
                    continue;
                }
                let g = falph.component(ac, 1).0 as u8;
                let to = intern((q2, p2, g), &mut ids, &mut b, &mut queue);
                b.add_transition(from, ab, to);
            }
        }
    }
    Ok(b.build())
}

/// Replace every transition `p -a-> q` of `nfa` by a fresh copy of
/// `image(a)` glued between `p` and `q`. Images must not accept the empty
/// word.
pub fn substitute(nfa: &Nfa, target: &Arc<Alphabet>, image: impl Fn(Symbol) -> Nfa) -> Result<Nfa> {
    let mut cache: HashMap<Symbol, Nfa> = HashMap::new();
    let mut b = NfaBuilder::new(target.clone());
    b.add_states(nfa.num_states());
    for q in nfa.initial() {
        b.set_initial(*q);
    }
    for q in nfa.finals() {
        b.set_final(q, true);
    }
    for (p, a, q) in nfa.transitions() {
        let g = cache.entry(a).or_insert_with(|| image(a));
        if **g.alphabet() != **target {
            return Err(Error::AlphabetMismatch(
                "substitution image over the wrong alphabet".into(),
            ));
        }
        if g.initial().iter().any(|&s| g.is_final(s)) {
            return Err(Error::Invalid(
                "substitution image accepts the empty word".into(),
            ));
        }
        let base = b.add_states(g.num_states());
        let copy = |s: State| base + s;
        for &s in g.initial() {
            for &(x, t) in g.successors(s) {
                b.add_transition(p, x, copy(t));
                if g.is_final(t) {
                    b.add_transition(p, x, q);
                }
            }
        }
        for (s, x, t) in g.transitions() {
            b.add_transition(copy(s), x, copy(t));
            if g.is_final(t) {
                b.add_transition(copy(s), x, q);
            }
        }
    }
    Ok(b.build().trim())
}

/// The encoded alphabet `Σ ∪ {#1, #0}`.
pub fn encoded_alphabet(sigma: &Alphabet) -> Result<Arc<Alphabet>> {
    Alphabet::union(sigma, counter_alphabet())
}

/// Stage 2: splice the gadget `σ(c)` over each annotation letter `c` and
/// turn pair letters into pairs over the encoded alphabet.
pub fn stage2(intermediate: &Nfa, sigma: &Arc<Alphabet>, table: &SigmaTable) -> Result<Relation> {
    let enc = encoded_alphabet(sigma)?;
    let pair = Alphabet::product(&[enc.clone(), enc.clone()])?;
    let npairs = sigma.len() * sigma.len();
    let gadgets: Vec<Nfa> = Gadget::ALL
        .iter()
        .map(|g| g.relation_over(&enc).map(|r| r.carrier().clone()))
        .collect::<Result<_>>()?;
    let carrier = substitute(intermediate, &pair, |s| {
        if s.index() < npairs {
            let (a, b) = (s.index() / sigma.len(), s.index() % sigma.len());
            Nfa::word(
                pair.clone(),
                &[pair.encode(&[Symbol(a as u32), Symbol(b as u32)])],
            )
        } else {
            let g = table.get(GammaLetter::ALL[s.index() - npairs]);
            gadgets[Gadget::ALL.iter().position(|&x| x == g).unwrap()].clone()
        }
    })?;
    Relation::new(vec![enc.clone(), enc], carrier)
}

/// Replace each configuration letter `a` by `a` followed by a word of
/// `block`.
fn lift_with(lang: &Nfa, enc: &Arc<Alphabet>, block: &str) -> Result<Nfa> {
    let block = compile_regex(block, enc)?;
    let sigma = lang.alphabet().clone();
    substitute(lang, enc, |a| {
        let letter = Nfa::word(enc.clone(), &[enc.symbol(sigma.name(a)).unwrap()]);
        letter.concat(&block).unwrap()
    })
}

/// Any counter block: a positive value or an alarm.
pub const BLOCK: &str = "#1+ #0* | #0+";

pub fn lift(lang: &Nfa, enc: &Arc<Alphabet>) -> Result<Nfa> {
    lift_with(lang, enc, BLOCK)
}

/// Initial configurations carry full counters.
pub fn encode_init(init: &Nfa) -> Result<Nfa> {
    let enc = encoded_alphabet(init.alphabet())?;
    lift_with(init, &enc, "#1+")
}

/// Final configurations: final with any counters, or a configuration with
/// an alarm block.
pub fn encode_final(final_: &Nfa, configurations: &Nfa) -> Result<Nfa> {
    let enc = encoded_alphabet(final_.alphabet())?;
    let lifted = lift(final_, &enc)?;
    let alarm = alarm_language(final_.alphabet(), &enc)?;
    let alarmed = lift(configurations, &enc)?.intersect(&alarm)?;
    Ok(lifted.union(&alarmed)?.trim())
}

/// Words containing a configuration letter directly followed by a block
/// of gaps that ends the word or is followed by a configuration letter.
fn alarm_language(sigma: &Alphabet, enc: &Arc<Alphabet>) -> Result<Nfa> {
    let letters = sigma.names().join(" | ");
    compile_regex(&format!("_* ({letters}) #0+ (({letters}) _*)?"), enc)
}

/// A system over the encoded alphabet together with the alphabet of the
/// source system.
#[derive(Clone, Debug)]
pub struct EncodedSpec {
    pub spec: SystemSpec,
    pub source_alphabet: Arc<Alphabet>,
}

pub fn encode_system(spec: &SystemSpec) -> Result<EncodedSpec> {
    encode_system_with(spec, &SigmaTable::default())
}

/// Encode with a custom substitution table (used to test that every entry
/// of the table matters).
pub fn encode_system_with(spec: &SystemSpec, table: &SigmaTable) -> Result<EncodedSpec> {
    let ann = spec.fairness.as_ref().ok_or(Error::NoAnnotator)?;
    if let Some((w1, w2, position)) = check_annotator(ann)? {
        return Err(Error::InconsistentAnnotator {
            first: spec.alphabet.render(&w1),
            second: spec.alphabet.render(&w2),
            position,
        });
    }
    let sigma = &spec.alphabet;
    let enc = encoded_alphabet(sigma)?;
    let configs = spec.configurations();
    let p1 = stage2(&stage1(&spec.p1, ann)?, sigma, table)?;
    let p2 = stage2(&stage1(&spec.p2, ann)?, sigma, table)?;
    let out = SystemSpec {
        name: format!("{}{ENCODED_SUFFIX}", spec.name),
        alphabet: enc.clone(),
        v1: lift(&spec.v1, &enc)?,
        v2: lift(&spec.v2, &enc)?,
        init: encode_init(&spec.init)?,
        final_: encode_final(&spec.final_, &configs)?,
        p1,
        p2,
        fairness: None,
    };
    Ok(EncodedSpec {
        spec: out,
        source_alphabet: sigma.clone(),
    })
}

/// A decoded configuration: letters, counter values and block lengths.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Decoded {
    pub word: Word,
    pub values: Vec<usize>,
    pub blocks: Vec<usize>,
}

impl EncodedSpec {
    /// Split an encoded word into configuration and counters. `None` if the
    /// word is not of the shape `a1 w1 … am wm` with well-formed blocks.
    pub fn decode(&self, word: &[Symbol]) -> Option<Decoded> {
        let enc = &self.spec.alphabet;
        let pebble = enc.symbol(PEBBLE)?;
        let gap = enc.symbol(GAP)?;
        let mut out = Decoded {
            word: Vec::new(),
            values: Vec::new(),
            blocks: Vec::new(),
        };
        let mut i = 0;
        while i < word.len() {
            let a = self.source_alphabet.symbol(enc.name(word[i]))?;
            i += 1;
            let start = i;
            while i < word.len() && word[i] == pebble {
                i += 1;
            }
            let value = i - start;
            while i < word.len() && word[i] == gap {
                i += 1;
            }
            if i == start {
                return None;
            }
            out.word.push(a);
            out.values.push(value);
            out.blocks.push(i - start);
        }
        Some(out)
    }

    /// Encode a configuration with counter values in blocks of length `k`.
    pub fn encode_state(&self, word: &[Symbol], values: &[usize], k: usize) -> Word {
        let enc = &self.spec.alphabet;
        let pebble = enc.symbol(PEBBLE).unwrap();
        let gap = enc.symbol(GAP).unwrap();
        let mut out = Vec::with_capacity(word.len() * (k + 1));
        for (&a, &v) in word.iter().zip(values) {
            debug_assert!(v <= k);
            out.push(enc.symbol(self.source_alphabet.name(a)).unwrap());
            out.extend(std::iter::repeat_n(pebble, v));
            out.extend(std::iter::repeat_n(gap, k - v));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::benchmark;
    use crate::spec::validate;

    fn toy() -> SystemSpec {
        benchmark("token-death").unwrap()
    }

    #[test]
    fn sigma_default() {
        let t = SigmaTable::default();
        let name = |g: Gadget| g.to_string();
        let row: Vec<String> = GammaLetter::ALL.iter().map(|&g| name(t.get(g))).collect();
        assert_eq!(
            row,
            ["RESET", "ID", "RESET", "RESET", "DEC", "DEC", "RESET", "RESET"]
        );
        assert_eq!(t.mutations().len(), 16);
    }

    #[test]
    fn dec_example() {
        let c = counter_alphabet();
        let dec = Gadget::Dec.relation();
        let w = |s: &str| c.parse_word(s).unwrap();
        assert!(dec.contains(&[&w("#1 #1 #0"), &w("#1 #0 #0")]));
        assert!(!dec.contains(&[&w("#0 #0"), &w("#0 #0")]));
        let reset = Gadget::Reset.relation();
        assert!(reset.contains(&[&w("#1 #0 #0"), &w("#1 #1 #1")]));
    }

    #[test]
    fn mixed_kind_annotator_is_rejected() {
        let a = Alphabet::new(["a"]).unwrap();
        let rel = Relation::parse("a/001 | a/000", vec![a.clone(), gamma().clone()]).unwrap();
        let (w1, w2, i) = check_annotator(&Annotator::new(rel).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(
            (a.render(&w1), a.render(&w2), i),
            ("a".into(), "a".into(), 0)
        );
    }

    #[test]
    fn kind_at_shared_positions_of_different_lengths() {
        let a = Alphabet::new(["a", "b"]).unwrap();
        let rel = Relation::parse("a/001 | b/101 b/000", vec![a.clone(), gamma().clone()]).unwrap();
        assert!(check_annotator(&Annotator::new(rel).unwrap())
            .unwrap()
            .is_none());
        let rel = Relation::parse(
            "a/001 a/001 | b/101 b/000",
            vec![a.clone(), gamma().clone()],
        )
        .unwrap();
        let (w1, w2, i) = check_annotator(&Annotator::new(rel).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(i, 1);
        assert_eq!((a.render(&w1), a.render(&w2)), ("b b".into(), "a a".into()));
    }

    #[test]
    fn encoded_toy_validates() {
        let e = encode_system(&toy()).unwrap();
        assert_eq!(e.spec.name, "token-death-encoded");
        let v = validate(&e.spec).unwrap();
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn decode_roundtrip() {
        let e = encode_system(&toy()).unwrap();
        let w = e.source_alphabet.parse_word("a b am").unwrap();
        let enc = e.encode_state(&w, &[2, 0, 1], 3);
        assert_eq!(
            e.spec.alphabet.render(&enc),
            "a #1 #1 #0 b #0 #0 #0 am #1 #0 #0"
        );
        let d = e.decode(&enc).unwrap();
        assert_eq!(
            (d.word, d.values, d.blocks),
            (w, vec![2, 0, 1], vec![3, 3, 3])
        );
        let bad = e.spec.alphabet.parse_word("a #0 #1").unwrap();
        assert!(e.decode(&bad).is_none());
    }

    #[test]
    fn alarm_words_are_final() {
        let e = encode_system(&toy()).unwrap();
        let w = e.spec.alphabet.parse_word("a #0 #0 a #1").unwrap();
        assert!(e.spec.final_.accepts(&w));
        let w = e.spec.alphabet.parse_word("a #1 #0 a #1").unwrap();
        assert!(!e.spec.final_.accepts(&w));
        let w = e.spec.alphabet.parse_word("b #1 #0 b #1").unwrap();
        assert!(e.spec.final_.accepts(&w));
    }
}
