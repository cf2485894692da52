#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use rmcfair::alphabet::{Alphabet, Symbol, Word};
use rmcfair::nfa::Nfa;

/// An NFA given by raw parts, so the oracle can simulate it without
/// going through the library.
#[derive(Clone, Debug)]
pub struct RawNfa {
    pub letters: usize,
    pub states: usize,
    pub trans: Vec<(u32, u32, u32)>,
    pub initial: Vec<u32>,
    pub finals: Vec<u32>,
}

impl RawNfa {
    pub fn build(&self, alph: &Arc<Alphabet>) -> Nfa {
        Nfa::from_parts(
            alph.clone(),
            self.states,
            self.trans.iter().map(|&(p, a, q)| (p, Symbol(a), q)),
            self.initial.iter().copied(),
            self.finals.iter().copied(),
        )
    }
}

pub fn letters(k: usize) -> Arc<Alphabet> {
    Alphabet::new(["a", "b", "c", "d"].iter().take(k)).unwrap()
}

pub fn raw_nfa(letters: usize, max_states: usize) -> impl Strategy<Value = RawNfa> {
    (1..=max_states).prop_flat_map(move |states| {
        let s = states as u32;
        (
            prop::collection::vec((0..s, 0..letters as u32, 0..s), 0..=states * letters * 2),
            prop::collection::vec(0..s, 1..=2),
            prop::collection::vec(0..s, 0..=states),
        )
            .prop_map(move |(trans, initial, finals)| RawNfa {
                letters,
                states,
                trans,
                initial,
                finals,
            })
    })
}

/// Pairs of NFAs over a shared alphabet of 1 to 3 letters.
pub fn raw_pair(max_states: usize) -> impl Strategy<Value = (RawNfa, RawNfa)> {
    (1usize..=3).prop_flat_map(move |k| (raw_nfa(k, max_states), raw_nfa(k, max_states)))
}

/// Membership table: `table[len][i]` for the `i`-th word of length `len`
/// in base-`letters` order (first letter most significant).
pub type Table = Vec<Vec<bool>>;

fn simulate(
    letters: usize,
    succ: &dyn Fn(u128, usize) -> u128,
    is_final: &dyn Fn(u128) -> bool,
    start: u128,
    max_len: usize,
) -> Table {
    let mut table: Table = (0..=max_len)
        .map(|l| vec![false; letters.pow(l as u32)])
        .collect();
    let mut stack = vec![(0usize, 0usize, start)];
    while let Some((len, idx, set)) = stack.pop() {
        table[len][idx] = is_final(set);
        if len < max_len {
            for a in 0..letters {
                stack.push((len + 1, idx * letters + a, succ(set, a)));
            }
        }
    }
    table
}

/// Oracle language table of a raw NFA, by subset simulation.
pub fn raw_table(raw: &RawNfa, max_len: usize) -> Table {
    let succ = |set: u128, a: usize| {
        raw.trans
            .iter()
            .filter(|&&(p, b, _)| b as usize == a && set >> p & 1 == 1)
            .fold(0u128, |acc, &(_, _, q)| acc | 1 << q)
    };
    let fin = raw.finals.iter().fold(0u128, |acc, &q| acc | 1 << q);
    let start = raw.initial.iter().fold(0u128, |acc, &q| acc | 1 << q);
    simulate(raw.letters, &succ, &|s| s & fin != 0, start, max_len)
}

/// Language table of a library NFA computed from its transition list.
pub fn nfa_table(nfa: &Nfa, max_len: usize) -> Table {
    assert!(nfa.num_states() <= 128, "too many states for the oracle");
    let raw = RawNfa {
        letters: nfa.alphabet().len(),
        states: nfa.num_states(),
        trans: nfa.transitions().map(|(p, a, q)| (p, a.0, q)).collect(),
        initial: nfa.initial().to_vec(),
        finals: nfa.finals().collect(),
    };
    raw_table(&raw, max_len)
}

pub fn word_at(letters: usize, len: usize, mut idx: usize) -> Word {
    let mut w = vec![Symbol(0); len];
    for i in (0..len).rev() {
        w[i] = Symbol((idx % letters) as u32);
        idx /= letters;
    }
    w
}

/// First word in shortlex order satisfying `pred`.
pub fn first_word(
    letters: usize,
    max_len: usize,
    pred: impl Fn(usize, usize) -> bool,
) -> Option<Word> {
    for len in 0..=max_len {
        for i in 0..letters.pow(len as u32) {
            if pred(len, i) {
                return Some(word_at(letters, len, i));
            }
        }
    }
    None
}

/// Random NFA from a seeded generator, for suites that pin their cases.
pub fn random_raw(rng: &mut impl rand::Rng, letters: usize, max_states: usize) -> RawNfa {
    let states = rng.gen_range(1..=max_states);
    let s = states as u32;
    let trans = (0..rng.gen_range(0..=states * letters * 2))
        .map(|_| {
            (
                rng.gen_range(0..s),
                rng.gen_range(0..letters as u32),
                rng.gen_range(0..s),
            )
        })
        .collect();
    let initial = (0..rng.gen_range(1..=2))
        .map(|_| rng.gen_range(0..s))
        .collect();
    let finals = (0..rng.gen_range(0..=states))
        .map(|_| rng.gen_range(0..s))
        .collect();
    RawNfa {
        letters,
        states,
        trans,
        initial,
        finals,
    }
}
