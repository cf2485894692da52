//! The shipped specification corpus.

use crate::error::{Error, Result};
use crate::spec::SystemSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// A protocol from the case-study families.
    Benchmark,
    /// Small systems used to exercise the pipeline.
    Toy,
    /// Deliberately broken variants of a toy.
    Mutation,
}

#[derive(Clone, Copy, Debug)]
pub struct Entry {
    pub name: &'static str,
    pub kind: Kind,
    pub source: &'static str,
}

macro_rules! entry {
    ($name:literal, $kind:ident) => {
        Entry {
            name: $name,
            kind: Kind::$kind,
            source: include_str!(concat!("../specs/", $name, ".spec")),
        }
    };
}

const REGISTRY: [Entry; 13] = [
    entry!("herman-ring-merge", Benchmark),
    entry!("herman-line-merge", Benchmark),
    entry!("herman-ring-annih", Benchmark),
    entry!("herman-line-annih", Benchmark),
    entry!("moran-line-2", Benchmark),
    entry!("cell-cycle-1", Benchmark),
    entry!("clustering-2", Benchmark),
    entry!("coin-game-3", Benchmark),
    entry!("token-death", Toy),
    entry!("mixed-fairness", Toy),
    entry!("herman-ring-merge-hand", Toy),
    entry!("token-death-idle", Mutation),
    entry!("token-death-final-shrink", Mutation),
];

/// A proof shipped alongside the corpus, checked against the encoding of
/// `system`.
#[derive(Clone, Copy, Debug)]
pub struct ProofEntry {
    pub name: &'static str,
    pub system: &'static str,
    /// Whether the proof is expected to pass the checker.
    pub valid: bool,
    pub source: &'static str,
}

macro_rules! proof {
    ($name:literal, $system:literal, $valid:literal) => {
        ProofEntry {
            name: $name,
            system: $system,
            valid: $valid,
            source: include_str!(concat!("../proofs/", $name, ".proof")),
        }
    };
}

const PROOFS: [ProofEntry; 7] = [
    proof!("token-death", "token-death", true),
    proof!("token-death-non-inductive", "token-death", false),
    proof!("token-death-reflexive", "token-death", false),
    proof!("token-death-intransitive", "token-death", false),
    proof!("token-death-upward", "token-death", false),
    proof!("token-death-idle", "token-death-idle", false),
    proof!(
        "token-death-final-shrink",
        "token-death-final-shrink",
        false
    ),
];

pub fn entries() -> &'static [Entry] {
    &REGISTRY
}

pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|e| e.name).collect()
}

pub fn entry(name: &str) -> Result<&'static Entry> {
    REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownBenchmark {
            name: name.to_string(),
            available: names().into_iter().map(String::from).collect(),
        })
}

pub fn benchmark(name: &str) -> Result<SystemSpec> {
    SystemSpec::parse(entry(name)?.source)
}

pub fn proofs() -> &'static [ProofEntry] {
    &PROOFS
}

pub fn proof_entry(name: &str) -> Option<&'static ProofEntry> {
    PROOFS.iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::validate;

    #[test]
    fn corpus_parses_and_validates() {
        for e in entries() {
            let spec = benchmark(e.name).unwrap_or_else(|err| panic!("{}: {err}", e.name));
            assert_eq!(spec.name, e.name);
            let v = validate(&spec).unwrap();
            assert!(
                v.is_empty(),
                "{}: {}",
                e.name,
                v.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("; ")
            );
        }
    }

    #[test]
    fn unknown_name_lists_registry() {
        match benchmark("nope") {
            Err(Error::UnknownBenchmark { available, .. }) => {
                assert!(available.contains(&"moran-line-2".to_string()))
            }
            other => panic!("{other:?}"),
        }
    }
}
