//! Interned alphabets and tuple alphabets for multi-track relations.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Largest tuple alphabet a product may create.
pub const MAX_PRODUCT_LETTERS: usize = 10_000;

/// Prefix reserved for the unary counter symbols.
pub const RESERVED_PREFIX: char = '#';

/// A letter, interned as a dense index into its [`Alphabet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(pub u32);

impl Symbol {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A word over some alphabet.
pub type Word = Vec<Symbol>;

/// An ordered, duplicate-free list of symbol names.
///
/// Tuple alphabets (the letters of a `k`-track relation) remember their
/// component alphabets; letter ids are mixed-radix with track 0 most
/// significant, and letter names are the component names joined by `/`.
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, Symbol>,
    tracks: Vec<Arc<Alphabet>>,
    fingerprint: u64,
}

impl Alphabet {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Arc<Alphabet>> {
        let names: Vec<String> = names.into_iter().map(|s| s.as_ref().to_string()).collect();
        if names.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::InvalidSymbol(n.clone()));
            }
            if index.insert(n.clone(), Symbol(i as u32)).is_some() {
                return Err(Error::DuplicateSymbol(n.clone()));
            }
        }
        Ok(Arc::new(Alphabet::build(names, index, Vec::new())))
    }

    /// A user-facing alphabet: names must be identifiers and may not use
    /// the reserved counter prefix.
    pub fn user<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Arc<Alphabet>> {
        let names: Vec<String> = names.into_iter().map(|s| s.as_ref().to_string()).collect();
        for n in &names {
            if n.starts_with(RESERVED_PREFIX) {
                return Err(Error::ReservedSymbol(n.clone()));
            }
            if !is_identifier(n) {
                return Err(Error::InvalidSymbol(n.clone()));
            }
        }
        Alphabet::new(names)
    }

    fn build(
        names: Vec<String>,
        index: HashMap<String, Symbol>,
        tracks: Vec<Arc<Alphabet>>,
    ) -> Alphabet {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        names.hash(&mut h);
        tracks.len().hash(&mut h);
        Alphabet {
            names,
            index,
            tracks,
            fingerprint: h.finish(),
        }
    }

    /// The tuple alphabet `tracks[0] × … × tracks[k-1]`.
    ///
    /// Products are interned, so repeated requests for the same component
    /// list return the same `Arc`.
    pub fn product(tracks: &[Arc<Alphabet>]) -> Result<Arc<Alphabet>> {
        assert!(
            tracks.len() >= 2,
            "a tuple alphabet needs at least two tracks"
        );
        let size = tracks
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
        match size {
            Some(s) if s <= MAX_PRODUCT_LETTERS => {}
            _ => {
                return Err(Error::AlphabetTooLarge {
                    letters: tracks.iter().map(|a| a.len()).product::<usize>(),
                    limit: MAX_PRODUCT_LETTERS,
                })
            }
        }
        let key: Vec<u64> = tracks.iter().map(|a| a.fingerprint).collect();
        static CACHE: OnceLock<Mutex<HashMap<Vec<u64>, Vec<Arc<Alphabet>>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        {
            let guard = cache.lock().unwrap();
            if let Some(hits) = guard.get(&key) {
                for hit in hits {
                    if hit.tracks.iter().zip(tracks).all(|(a, b)| **a == **b) {
                        return Ok(hit.clone());
                    }
                }
            }
        }
        let mut names = vec![String::new()];
        for t in tracks {
            let mut next = Vec::with_capacity(names.len() * t.len());
            for prefix in &names {
                for n in &t.names {
                    if prefix.is_empty() {
                        next.push(n.clone());
                    } else {
                        next.push(format!("{prefix}/{n}"));
                    }
                }
            }
            names = next;
        }
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), Symbol(i as u32)))
            .collect();
        let alph = Arc::new(Alphabet::build(names, index, tracks.to_vec()));
        cache
            .lock()
            .unwrap()
            .entry(key)
            .or_default()
            .push(alph.clone());
        Ok(alph)
    }

    /// Disjoint union of two alphabets (names must not overlap).
    pub fn union(a: &Alphabet, b: &Alphabet) -> Result<Arc<Alphabet>> {
        Alphabet::new(a.names.iter().chain(b.names.iter()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, s: Symbol) -> &str {
        &self.names[s.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn symbol(&self, name: &str) -> Option<Symbol> {
        self.index.get(name).copied()
    }

    pub fn lookup(&self, name: &str) -> Result<Symbol> {
        self.symbol(name)
            .ok_or_else(|| Error::UnknownSymbol(name.to_string()))
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.names.len() as u32).map(Symbol)
    }

    /// Component alphabets; empty for a plain (single-track) alphabet.
    pub fn tracks(&self) -> &[Arc<Alphabet>] {
        &self.tracks
    }

    /// Number of tracks: 1 for a plain alphabet.
    pub fn arity(&self) -> usize {
        self.tracks.len().max(1)
    }

    pub fn track(&self, t: usize) -> &Arc<Alphabet> {
        &self.tracks[t]
    }

    /// Split a tuple letter into its components.
    pub fn decode(&self, s: Symbol) -> Vec<Symbol> {
        if self.tracks.is_empty() {
            return vec![s];
        }
        let mut rest = s.0 as usize;
        let mut out = vec![Symbol(0); self.tracks.len()];
        for (t, alph) in self.tracks.iter().enumerate().rev() {
            out[t] = Symbol((rest % alph.len()) as u32);
            rest /= alph.len();
        }
        out
    }

    /// Component `t` of a tuple letter.
    pub fn component(&self, s: Symbol, t: usize) -> Symbol {
        let mut rest = s.0 as usize;
        for alph in self.tracks[t + 1..].iter() {
            rest /= alph.len();
        }
        Symbol((rest % self.tracks[t].len()) as u32)
    }

    /// Assemble a tuple letter from its components.
    pub fn encode(&self, parts: &[Symbol]) -> Symbol {
        debug_assert_eq!(parts.len(), self.tracks.len());
        let mut id = 0usize;
        for (alph, p) in self.tracks.iter().zip(parts) {
            id = id * alph.len() + p.index();
        }
        Symbol(id as u32)
    }

    pub fn render(&self, word: &[Symbol]) -> String {
        word.iter()
            .map(|s| self.name(*s))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parse a whitespace-separated word.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        text.split_whitespace().map(|t| self.lookup(t)).collect()
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self, other)
            || (self.fingerprint == other.fingerprint
                && self.names == other.names
                && self.tracks.len() == other.tracks.len())
    }
}

impl Eq for Alphabet {}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tracks.is_empty() {
            write!(f, "Alphabet{:?}", self.names)
        } else {
            f.debug_list().entries(self.tracks.iter()).finish()
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.names.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_roundtrip() {
        let a = Alphabet::new(["T", "B"]).unwrap();
        let b = Alphabet::new(["x", "y", "z"]).unwrap();
        let p = Alphabet::product(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p.name(Symbol(4)), "B/y");
        for s in p.symbols() {
            let parts = p.decode(s);
            assert_eq!(p.encode(&parts), s);
            assert_eq!(p.component(s, 0), parts[0]);
            assert_eq!(p.component(s, 1), parts[1]);
        }
        let again = Alphabet::product(&[a, b]).unwrap();
        assert!(Arc::ptr_eq(&p, &again));
    }

    #[test]
    fn rejects_duplicates_and_reserved() {
        assert!(matches!(
            Alphabet::new(["a", "a"]),
            Err(Error::DuplicateSymbol(_))
        ));
        assert!(matches!(
            Alphabet::user(["a", "#1"]),
            Err(Error::ReservedSymbol(_))
        ));
        assert!(matches!(
            Alphabet::new(Vec::<String>::new()),
            Err(Error::EmptyAlphabet)
        ));
    }

    #[test]
    fn oversized_product_is_rejected() {
        let names: Vec<String> = (0..101).map(|i| format!("s{i}")).collect();
        let a = Alphabet::new(&names).unwrap();
        assert!(matches!(
            Alphabet::product(&[a.clone(), a]),
            Err(Error::AlphabetTooLarge { .. })
        ));
    }
}
