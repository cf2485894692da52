//! Regular termination proofs: an inductive invariant and a ranking order.
//!
//! ```text
//! proof for token-death-encoded
//! inv = (a | b | am | bm | #1 | #0)*
//! ord = ...
//! ```
//!
//! Pairs `(z, x)` of `ord` mean `z ≺ x`: the left word is the smaller one.

use std::fmt;
use std::sync::Arc;

use crate::alphabet::{Alphabet, Word};
use crate::encode::{encode_system, ENCODED_SUFFIX};
use crate::error::{Error, Result};
use crate::nfa::{Inclusion, Nfa};
use crate::relation::{deconvolve, join, Relation};
use crate::spec::SystemSpec;
use crate::syntax::{compile, parse_automaton_block, parse_regex, Lexer, Macros, Regex, Tok};

#[derive(Clone, Debug)]
pub struct RegularProof {
    /// Name of the system the proof is about.
    pub system: String,
    pub inv: Nfa,
    pub ord: Relation,
}

impl RegularProof {
    pub fn new(system: impl Into<String>, inv: Nfa, ord: Relation) -> Self {
        RegularProof {
            system: system.into(),
            inv,
            ord,
        }
    }

    /// The system named in the header of a proof file.
    pub fn target(text: &str) -> Result<String> {
        let mut lx = Lexer::new(text);
        lx.skip_newlines()?;
        header(&mut lx)
    }

    /// Parse a proof over the alphabet of the system it targets.
    pub fn parse(text: &str, alphabet: &Arc<Alphabet>) -> Result<RegularProof> {
        let pair = Alphabet::product(&[alphabet.clone(), alphabet.clone()])?;
        let mut lx = Lexer::new(text);
        lx.skip_newlines()?;
        let system = header(&mut lx)?;
        let mut macros = Macros::new();
        let mut inv = None;
        let mut ord = None;
        loop {
            lx.skip_newlines()?;
            let (tok, pos) = lx.next()?;
            let kw = match tok {
                Tok::Eof => break,
                Tok::Name(n) => n,
                other => {
                    return Err(lx.error(pos, format!("expected a declaration, found {other:?}")))
                }
            };
            match kw.as_str() {
                "let" => {
                    let (name, _) = lx.expect_name()?;
                    if alphabet.symbol(&name).is_some() {
                        return Err(Error::MacroClash(name));
                    }
                    if macros.contains_key(&name) {
                        return Err(Error::DuplicateField(name));
                    }
                    lx.expect(Tok::Eq)?;
                    let body = parse_regex(&mut lx)?;
                    let mut used = Vec::new();
                    bare_names(&body, &mut used);
                    for u in used {
                        if alphabet.symbol(&u).is_none() && !macros.contains_key(&u) {
                            return Err(if u == name {
                                Error::RecursiveMacro(u)
                            } else {
                                Error::UndefinedMacro(u)
                            });
                        }
                    }
                    macros.insert(name, body);
                }
                "inv" | "ord" => {
                    let slot = if kw == "inv" { &mut inv } else { &mut ord };
                    if slot.is_some() {
                        return Err(Error::DuplicateField(kw));
                    }
                    let alph = if kw == "inv" { alphabet } else { &pair };
                    lx.expect(Tok::Eq)?;
                    let is_block = matches!(lx.peek()?, Tok::Name(n) if n == "automaton");
                    *slot = Some(if is_block {
                        lx.next()?;
                        parse_automaton_block(&mut lx, alph)?.1
                    } else {
                        compile(&parse_regex(&mut lx)?, alph, &macros)?
                    });
                }
                other => return Err(lx.error(pos, format!("unknown declaration `{other}`"))),
            }
            lx.end_statement()?;
        }
        let inv = inv.ok_or(Error::MissingField("inv"))?;
        let ord = Relation::new(
            vec![alphabet.clone(), alphabet.clone()],
            ord.ok_or(Error::MissingField("ord"))?,
        )?;
        Ok(RegularProof { system, inv, ord })
    }

    pub fn to_text(&self) -> String {
        format!(
            "proof for {}\ninv = {}\nord = {}\n",
            self.system,
            self.inv.trim().to_block("inv"),
            self.ord.carrier().trim().to_block("ord")
        )
    }
}

fn header(lx: &mut Lexer) -> Result<String> {
    let (kw, pos) = lx.expect_name()?;
    if kw != "proof" {
        return Err(lx.error(pos, "a proof starts with `proof for <system>`"));
    }
    let (f, pos) = lx.expect_name()?;
    if f != "for" {
        return Err(lx.error(pos, "expected `for`"));
    }
    let (name, pos) = lx.rest_of_line()?;
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(lx.error(pos, "expected a system name"));
    }
    Ok(name)
}

fn bare_names(re: &Regex, out: &mut Vec<String>) {
    match re {
        Regex::Letter(parts, _) if parts.len() == 1 => out.push(parts[0].clone()),
        Regex::Concat(v) | Regex::Alt(v) => v.iter().for_each(|r| bare_names(r, out)),
        Regex::Star(r) | Regex::Plus(r) | Regex::Opt(r) => bare_names(r, out),
        _ => {}
    }
}

/// The system a proof is checked against: the spec itself, or its
/// encoding when the proof names the encoded system.
pub fn resolve_target(spec: &SystemSpec, proof_system: &str) -> Result<SystemSpec> {
    if proof_system == spec.name {
        return Ok(spec.clone());
    }
    let encoded = format!("{}{ENCODED_SUFFIX}", spec.name);
    if proof_system == encoded {
        return Ok(encode_system(spec)?.spec);
    }
    Err(Error::ProofTarget {
        expected: spec.name.clone(),
        found: proof_system.to_string(),
    })
}

/// One failed verification condition with its witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Failure {
    /// An initial configuration outside the invariant.
    InitNotInInv(Word),
    /// A move from the invariant to a word outside it.
    NotInductive { from: Word, to: Word },
    /// `w ≺ w`.
    Reflexive(Word),
    /// `x ≺ y ≺ z` but not `x ≺ z`.
    Intransitive { x: Word, y: Word, z: Word },
    /// A scheduler move `x → y` after which no probabilistic move reaches
    /// a smaller configuration of the invariant.
    NoDecrease { x: Word, y: Word },
}

impl Failure {
    /// Re-evaluate the witness by direct membership tests; true if it
    /// really violates its condition.
    pub fn replays(&self, spec: &SystemSpec, proof: &RegularProof) -> bool {
        let inv = &proof.inv;
        let ord = |a: &Word, b: &Word| proof.ord.contains(&[a, b]);
        match self {
            Failure::InitNotInInv(w) => spec.init.accepts(w) && !inv.accepts(w),
            Failure::NotInductive { from, to } => {
                inv.accepts(from)
                    && !inv.accepts(to)
                    && (spec.p1.contains(&[from, to]) || spec.p2.contains(&[from, to]))
            }
            Failure::Reflexive(w) => ord(w, w),
            Failure::Intransitive { x, y, z } => ord(x, y) && ord(y, z) && !ord(x, z),
            Failure::NoDecrease { x, y } => {
                inv.accepts(x)
                    && !spec.final_.accepts(x)
                    && spec.configurations().accepts(y)
                    && !spec.final_.accepts(y)
                    && spec.p1.contains(&[x, y])
                    && spec
                        .p2
                        .successors(y)
                        .iter()
                        .all(|z| !(inv.accepts(z) && ord(z, x)))
            }
        }
    }

    pub fn render(&self, alph: &Alphabet) -> String {
        let r = |w: &Word| {
            if w.is_empty() {
                "ε".to_string()
            } else {
                alph.render(w)
            }
        };
        match self {
            Failure::InitNotInInv(w) => format!("initial `{}` is not in inv", r(w)),
            Failure::NotInductive { from, to } => {
                format!("move `{}` -> `{}` leaves inv", r(from), r(to))
            }
            Failure::Reflexive(w) => format!("ord relates `{}` to itself", r(w)),
            Failure::Intransitive { x, y, z } => {
                format!(
                    "`{}` < `{}` < `{}` but not `{}` < `{}`",
                    r(x),
                    r(y),
                    r(z),
                    r(x),
                    r(z)
                )
            }
            Failure::NoDecrease { x, y } => {
                format!(
                    "after scheduler move `{}` -> `{}` no probabilistic move decreases the rank",
                    r(x),
                    r(y)
                )
            }
        }
    }
}

/// Per-condition results: `None` means the condition holds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VcReport {
    pub vc1: Option<Failure>,
    pub vc2: Option<Failure>,
    pub vc3: Option<Failure>,
}

impl VcReport {
    pub fn passed(&self) -> bool {
        self.vc1.is_none() && self.vc2.is_none() && self.vc3.is_none()
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &Failure)> {
        [&self.vc1, &self.vc2, &self.vc3]
            .into_iter()
            .enumerate()
            .filter_map(|(i, f)| f.as_ref().map(|f| (i + 1, f)))
    }

    pub fn render(&self, alph: &Alphabet) -> String {
        let names = ["inductive invariant", "strict order", "rank decrease"];
        let mut s = String::new();
        for (i, f) in [&self.vc1, &self.vc2, &self.vc3].into_iter().enumerate() {
            match f {
                None => s.push_str(&format!("vc{} {}: ok\n", i + 1, names[i])),
                Some(f) => s.push_str(&format!(
                    "vc{} {}: FAIL {}\n",
                    i + 1,
                    names[i],
                    f.render(alph)
                )),
            }
        }
        s
    }
}

impl fmt::Display for VcReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = |x: &Option<Failure>| if x.is_none() { "ok" } else { "fail" };
        write!(
            f,
            "vc1 {} vc2 {} vc3 {}",
            v(&self.vc1),
            v(&self.vc2),
            v(&self.vc3)
        )
    }
}

fn check_alphabets(spec: &SystemSpec, proof: &RegularProof) -> Result<()> {
    if **proof.inv.alphabet() != *spec.alphabet
        || proof.ord.arity() != 2
        || proof.ord.tracks().iter().any(|t| **t != *spec.alphabet)
    {
        return Err(Error::AlphabetMismatch(format!(
            "proof is not over the alphabet of `{}`",
            spec.name
        )));
    }
    Ok(())
}

/// `init ⊆ inv` and `post(p1 ∪ p2, inv) ⊆ inv`.
pub fn check_vc1(spec: &SystemSpec, proof: &RegularProof) -> Result<Option<Failure>> {
    check_alphabets(spec, proof)?;
    if let Inclusion::Counterexample(w) = spec.init.includes(&proof.inv)? {
        return Ok(Some(Failure::InitNotInInv(w)));
    }
    let moves = spec.p1.union(&spec.p2)?;
    let post = moves.post_image(&proof.inv)?;
    if let Inclusion::Counterexample(y) = post.includes(&proof.inv)? {
        let target = Nfa::word(spec.alphabet.clone(), &y);
        let pair = moves
            .restrict(0, &proof.inv)?
            .restrict(1, &target)?
            .shortest()
            .expect("y has a predecessor");
        return Ok(Some(Failure::NotInductive {
            from: pair[0].clone(),
            to: pair[1].clone(),
        }));
    }
    Ok(None)
}

/// `ord` is irreflexive and transitive.
pub fn check_vc2(proof: &RegularProof) -> Result<Option<Failure>> {
    let ord = &proof.ord;
    let id = Relation::identity(&ord.tracks()[0])?;
    if let Some(pair) = ord.intersect(&id)?.shortest() {
        return Ok(Some(Failure::Reflexive(pair[0].clone())));
    }
    let two = ord.compose(ord)?;
    if let Inclusion::Counterexample(w) = two.includes(ord)? {
        let pair = deconvolve(ord.alphabet(), &w);
        let (x, z) = (&pair[0], &pair[1]);
        let alph = ord.tracks()[0].clone();
        let mid = ord
            .post_image(&Nfa::word(alph.clone(), x))?
            .intersect(&ord.pre_image(&Nfa::word(alph, z))?)?
            .shortest_of_length(x.len())
            .expect("composition witness has a middle word");
        return Ok(Some(Failure::Intransitive {
            x: x.clone(),
            y: mid,
            z: z.clone(),
        }));
    }
    Ok(None)
}

/// Every scheduler move `x → y` with `x ∈ inv \ final` and `y` a non-final
/// configuration admits a probabilistic move `y → z` with `z ∈ inv` and
/// `z ≺ x`.
pub fn check_vc3(spec: &SystemSpec, proof: &RegularProof) -> Result<Option<Failure>> {
    check_alphabets(spec, proof)?;
    let live = spec.final_.complement();
    let lhs = spec
        .p1
        .restrict(0, &proof.inv.intersect(&live)?)?
        .restrict(1, &spec.configurations().intersect(&live)?)?;
    let a = spec.alphabet.clone();
    let tracks = [a.clone(), a.clone(), a];
    // Tracks: x = 0, y = 1, z = 2.
    let rhs = join(
        &tracks,
        &[
            (spec.p2.carrier(), &[1, 2]),
            (&proof.inv, &[2]),
            (proof.ord.carrier(), &[2, 0]),
        ],
        &[0, 1],
    )?;
    let rhs = Relation::new(spec.pair_tracks(), rhs)?;
    if let Inclusion::Counterexample(w) = lhs.includes(&rhs)? {
        let pair = deconvolve(lhs.alphabet(), &w);
        return Ok(Some(Failure::NoDecrease {
            x: pair[0].clone(),
            y: pair[1].clone(),
        }));
    }
    Ok(None)
}

/// All three conditions, checked concurrently.
pub fn check_proof(spec: &SystemSpec, proof: &RegularProof) -> Result<VcReport> {
    check_alphabets(spec, proof)?;
    let (vc1, vc2, vc3) = std::thread::scope(|s| {
        let h1 = s.spawn(|| check_vc1(spec, proof));
        let h2 = s.spawn(|| check_vc2(proof));
        let vc3 = check_vc3(spec, proof);
        (h1.join().unwrap(), h2.join().unwrap(), vc3)
    });
    Ok(VcReport {
        vc1: vc1?,
        vc2: vc2?,
        vc3: vc3?,
    })
}

/// Sequential variant of [`check_proof`] stopping at the first failure.
pub fn first_failure(spec: &SystemSpec, proof: &RegularProof) -> Result<Option<(usize, Failure)>> {
    if let Some(f) = check_vc2(proof)? {
        return Ok(Some((2, f)));
    }
    if let Some(f) = check_vc1(spec, proof)? {
        return Ok(Some((1, f)));
    }
    Ok(check_vc3(spec, proof)?.map(|f| (3, f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{benchmark, proof_entry};

    fn load(name: &str) -> (SystemSpec, RegularProof) {
        let entry = proof_entry(name).unwrap();
        let spec = benchmark(entry.system).unwrap();
        let target = resolve_target(&spec, &RegularProof::target(entry.source).unwrap()).unwrap();
        let proof = RegularProof::parse(entry.source, &target.alphabet).unwrap();
        (target, proof)
    }

    #[test]
    fn shipped_proof_passes() {
        let (spec, proof) = load("token-death");
        let r = check_proof(&spec, &proof).unwrap();
        assert!(r.passed(), "{}", r.render(&spec.alphabet));
    }

    #[test]
    fn mutations_fail_with_replayable_witnesses() {
        for (name, vc) in [
            ("token-death-non-inductive", 1),
            ("token-death-reflexive", 2),
            ("token-death-intransitive", 2),
            ("token-death-upward", 3),
            ("token-death-idle", 3),
            ("token-death-final-shrink", 3),
        ] {
            let (spec, proof) = load(name);
            let r = check_proof(&spec, &proof).unwrap();
            let failed: Vec<usize> = r.failures().map(|(i, _)| i).collect();
            assert!(failed.contains(&vc), "{name}: {}", r.render(&spec.alphabet));
            for (_, f) in r.failures() {
                assert!(
                    f.replays(&spec, &proof),
                    "{name}: {}",
                    f.render(&spec.alphabet)
                );
            }
        }
    }

    #[test]
    fn wrong_target_is_rejected() {
        let spec = benchmark("token-death").unwrap();
        assert!(matches!(
            resolve_target(&spec, "herman-ring-merge"),
            Err(Error::ProofTarget { .. })
        ));
    }

    #[test]
    fn printed_proof_reparses() {
        let (spec, proof) = load("token-death");
        let back = RegularProof::parse(&proof.to_text(), &spec.alphabet).unwrap();
        assert_eq!(back.system, proof.system);
        assert!(back.inv.equivalent(&proof.inv).unwrap());
        assert!(back.ord.equivalent(&proof.ord).unwrap());
    }
}
