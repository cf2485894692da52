//! Regular model checking with finitary fairness.
//!
//! The crate covers the whole pipeline: automata and length-preserving
//! relations, a small specification language for regular MDPs, the fairness
//! encoder that turns a fair system into a plain one with unary counters, a
//! checker for regular termination proofs, an explicit-state oracle for
//! finite instances, and a bounded proof search.

pub mod alphabet;
pub mod benchmarks;
pub mod encode;
pub mod error;
pub mod nfa;
pub mod oracle;
pub mod proof;
pub mod relation;
pub mod search;
pub mod spec;
pub mod syntax;

pub use alphabet::{Alphabet, Symbol, Word};
pub use error::{Error, Result};
pub use nfa::{Inclusion, Mode, Nfa, NfaBuilder, State};
