//! System specifications: regular MDPs with an optional fairness annotator.
//!
//! ```text
//! system herman-ring-merge
//! alphabet T, B, Tm, Bm
//! let I = T/T | B/B
//! v1 = (T|B)+
//! ...
//! fair = (T/101 | B/101)+ | ...
//! ```
//!
//! Any field may also be given as an `automaton` block, which is the form
//! used when printing.

use std::collections::HashSet;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::alphabet::{Alphabet, Symbol, Word, RESERVED_PREFIX};
use crate::error::{Error, Result};
use crate::nfa::{Inclusion, Nfa};
use crate::relation::Relation;
use crate::syntax::{compile, parse_automaton_block, parse_regex, Lexer, Macros, Pos, Regex, Tok};

/// Pebble and gap symbols of the unary counters.
pub const PEBBLE: &str = "#1";
pub const GAP: &str = "#0";

/// One fairness annotation letter: premise, consequence and kind bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GammaLetter {
    pub premise: bool,
    pub consequence: bool,
    /// `false` for justice, `true` for compassion.
    pub compassion: bool,
}

impl GammaLetter {
    pub const ALL: [GammaLetter; 8] = {
        let mut out = [GammaLetter {
            premise: false,
            consequence: false,
            compassion: false,
        }; 8];
        let mut i = 0;
        while i < 8 {
            out[i] = GammaLetter {
                premise: i & 4 != 0,
                consequence: i & 2 != 0,
                compassion: i & 1 != 0,
            };
            i += 1;
        }
        out
    };

    pub fn new(premise: bool, consequence: bool, compassion: bool) -> Self {
        GammaLetter {
            premise,
            consequence,
            compassion,
        }
    }

    pub fn index(self) -> usize {
        (self.premise as usize) << 2 | (self.consequence as usize) << 1 | self.compassion as usize
    }

    pub fn symbol(self) -> Symbol {
        Symbol(self.index() as u32)
    }

    pub fn from_symbol(s: Symbol) -> Self {
        GammaLetter::ALL[s.index()]
    }
}

impl fmt::Display for GammaLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            self.premise as u8, self.consequence as u8, self.compassion as u8
        )
    }
}

/// The 8-letter annotation alphabet; letter `ptk` has id `4p + 2t + k`.
pub fn gamma() -> &'static Arc<Alphabet> {
    static GAMMA: OnceLock<Arc<Alphabet>> = OnceLock::new();
    GAMMA.get_or_init(|| Alphabet::new(GammaLetter::ALL.iter().map(|g| g.to_string())).unwrap())
}

/// A letter-to-letter transducer from configurations to annotation words.
#[derive(Clone, Debug)]
pub struct Annotator {
    relation: Relation,
}

impl Annotator {
    pub fn new(relation: Relation) -> Result<Annotator> {
        if relation.arity() != 2 || *relation.tracks()[1] != **gamma() {
            return Err(Error::AlphabetMismatch(
                "annotator output track must be the annotation alphabet".into(),
            ));
        }
        Ok(Annotator { relation })
    }

    pub fn relation(&self) -> &Relation {
        &self.relation
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.relation.tracks()[0]
    }

    /// All annotation words for a configuration, lexicographically ordered.
    pub fn outputs(&self, word: &[Symbol]) -> Vec<Vec<GammaLetter>> {
        self.relation
            .successors(word)
            .into_iter()
            .map(|w| w.into_iter().map(GammaLetter::from_symbol).collect())
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub name: String,
    pub alphabet: Arc<Alphabet>,
    /// Scheduler-owned configurations.
    pub v1: Nfa,
    /// Configurations owned by the probabilistic player.
    pub v2: Nfa,
    pub init: Nfa,
    pub final_: Nfa,
    /// Scheduler moves, `V1 → V2`.
    pub p1: Relation,
    /// Probabilistic moves (support only), `V2 → V1`.
    pub p2: Relation,
    pub fairness: Option<Annotator>,
}

impl SystemSpec {
    pub fn pair_tracks(&self) -> Vec<Arc<Alphabet>> {
        vec![self.alphabet.clone(), self.alphabet.clone()]
    }

    /// `V1 ∪ V2`.
    pub fn configurations(&self) -> Nfa {
        self.v1
            .union(&self.v2)
            .expect("components share the alphabet")
    }

    /// True if the alphabet contains the counter symbols.
    pub fn has_counters(&self) -> bool {
        self.alphabet.symbol(PEBBLE).is_some() && self.alphabet.symbol(GAP).is_some()
    }

    pub fn parse(text: &str) -> Result<SystemSpec> {
        Parser::new(text).spec()
    }

    /// Print in the specification grammar, every component as an
    /// `automaton` block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("system {}\n", self.name));
        s.push_str(&format!("alphabet {}\n", self.alphabet.names().join(", ")));
        let fields: [(&str, &Nfa); 6] = [
            ("v1", &self.v1),
            ("v2", &self.v2),
            ("init", &self.init),
            ("final", &self.final_),
            ("p1", self.p1.carrier()),
            ("p2", self.p2.carrier()),
        ];
        for (name, nfa) in fields {
            s.push_str(&format!("{name} = {}\n", nfa.trim().to_block(name)));
        }
        if let Some(f) = &self.fairness {
            s.push_str(&format!(
                "fair = {}\n",
                f.relation().carrier().trim().to_block("fair")
            ));
        }
        s
    }
}

/// Which structural requirement a [`Violation`] breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `V1` and `V2` overlap.
    Overlap,
    /// A scheduler move leaves `V1` or does not land in `V2`.
    SchedulerAlternation,
    /// A probabilistic move leaves `V2` or does not land in `V1`.
    ProbabilisticAlternation,
    /// An initial configuration is not scheduler-owned.
    InitialOwner,
    /// A final configuration is not a configuration.
    FinalOwner,
    /// A non-final configuration has no move.
    DeadEnd,
    /// Some configuration has no annotation.
    AnnotatorTotality,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Overlap => "overlap",
            Rule::SchedulerAlternation => "scheduler-alternation",
            Rule::ProbabilisticAlternation => "probabilistic-alternation",
            Rule::InitialOwner => "initial-owner",
            Rule::FinalOwner => "final-owner",
            Rule::DeadEnd => "dead-end",
            Rule::AnnotatorTotality => "annotator-totality",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    /// One word, or a pair for move violations.
    pub witness: Vec<Word>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.message)
    }
}

fn render_word(alph: &Alphabet, w: &[Symbol]) -> String {
    if w.is_empty() {
        "ε".to_string()
    } else {
        alph.render(w)
    }
}

/// Check the structural requirements of a regular MDP. Violations are
/// returned as data, each with a shortest witness.
pub fn validate(spec: &SystemSpec) -> Result<Vec<Violation>> {
    let alph = &spec.alphabet;
    let mut out = Vec::new();
    let word_violation = |rule: Rule, w: Word, what: &str| Violation {
        rule,
        message: format!("`{}` {what}", render_word(alph, &w)),
        witness: vec![w],
    };

    if let Some(w) = spec.v1.intersect(&spec.v2)?.shortest_word() {
        out.push(word_violation(Rule::Overlap, w, "is in both v1 and v2"));
    }

    let moves = [
        (
            &spec.p1,
            &spec.v1,
            &spec.v2,
            Rule::SchedulerAlternation,
            "p1",
            "v1",
            "v2",
        ),
        (
            &spec.p2,
            &spec.v2,
            &spec.v1,
            Rule::ProbabilisticAlternation,
            "p2",
            "v2",
            "v1",
        ),
    ];
    for (rel, from, to, rule, name, from_name, to_name) in moves {
        let bad_src = rel.restrict(0, &from.complement())?;
        let bad_dst = rel.restrict(1, &to.complement())?;
        for (bad, side, set) in [(bad_src, "source", from_name), (bad_dst, "target", to_name)] {
            if let Some(pair) = bad.shortest() {
                out.push(Violation {
                    rule,
                    message: format!(
                        "{name} move `{}` -> `{}` has its {side} outside {set}",
                        render_word(alph, &pair[0]),
                        render_word(alph, &pair[1])
                    ),
                    witness: pair,
                });
            }
        }
    }

    if let Inclusion::Counterexample(w) = spec.init.includes(&spec.v1)? {
        out.push(word_violation(
            Rule::InitialOwner,
            w,
            "is initial but not in v1",
        ));
    }
    let configs = spec.configurations();
    if let Inclusion::Counterexample(w) = spec.final_.includes(&configs)? {
        out.push(word_violation(
            Rule::FinalOwner,
            w,
            "is final but not in v1 or v2",
        ));
    }

    let live = configs.difference(&spec.final_)?;
    let movable = spec.p1.domain()?.union(&spec.p2.domain()?)?;
    if let Inclusion::Counterexample(w) = live.includes(&movable)? {
        out.push(word_violation(
            Rule::DeadEnd,
            w,
            "is not final and has no move",
        ));
    }

    if let Some(f) = &spec.fairness {
        if let Inclusion::Counterexample(w) = configs.includes(&f.relation().domain()?)? {
            out.push(word_violation(
                Rule::AnnotatorTotality,
                w,
                "has no annotation",
            ));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    lx: Lexer<'a>,
    alphabet: Option<Arc<Alphabet>>,
    macros: Macros,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum FieldKind {
    Language,
    Pairs,
    Annotated,
}

enum FieldValue {
    Regex(Regex),
    Block(Nfa),
}

const FIELDS: [(&str, FieldKind); 7] = [
    ("v1", FieldKind::Language),
    ("v2", FieldKind::Language),
    ("init", FieldKind::Language),
    ("final", FieldKind::Language),
    ("p1", FieldKind::Pairs),
    ("p2", FieldKind::Pairs),
    ("fair", FieldKind::Annotated),
];

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            lx: Lexer::new(text),
            alphabet: None,
            macros: Macros::new(),
        }
    }

    fn alphabet(&self, pos: Pos) -> Result<&Arc<Alphabet>> {
        self.alphabet.as_ref().ok_or_else(|| Error::Parse {
            line: pos.line,
            col: pos.col,
            msg: "`alphabet` must come first".into(),
        })
    }

    fn field_alphabet(&self, kind: FieldKind, pos: Pos) -> Result<Arc<Alphabet>> {
        let a = self.alphabet(pos)?.clone();
        Ok(match kind {
            FieldKind::Language => a,
            FieldKind::Pairs => Alphabet::product(&[a.clone(), a])?,
            FieldKind::Annotated => Alphabet::product(&[a, gamma().clone()])?,
        })
    }

    /// Names used as bare letters in a regex (candidates for macro use).
    fn bare_names(re: &Regex, out: &mut Vec<String>) {
        match re {
            Regex::Letter(parts, _) if parts.len() == 1 => out.push(parts[0].clone()),
            Regex::Concat(v) | Regex::Alt(v) => v.iter().for_each(|r| Self::bare_names(r, out)),
            Regex::Star(r) | Regex::Plus(r) | Regex::Opt(r) => Self::bare_names(r, out),
            _ => {}
        }
    }

    fn spec(mut self) -> Result<SystemSpec> {
        let mut name: Option<String> = None;
        let mut values: Vec<Option<(FieldValue, Pos)>> = (0..FIELDS.len()).map(|_| None).collect();
        loop {
            self.lx.skip_newlines()?;
            let (tok, pos) = self.lx.next()?;
            let kw = match tok {
                Tok::Eof => break,
                Tok::Name(n) => n,
                other => {
                    return Err(self
                        .lx
                        .error(pos, format!("expected a declaration, found {other:?}")))
                }
            };
            match kw.as_str() {
                "system" => {
                    if name.is_some() {
                        return Err(Error::DuplicateField("system".into()));
                    }
                    let (n, npos) = self.lx.rest_of_line()?;
                    if n.is_empty() || n.chars().any(char::is_whitespace) {
                        return Err(self.lx.error(npos, "expected a system name"));
                    }
                    name = Some(n);
                    continue;
                }
                "alphabet" => {
                    if self.alphabet.is_some() {
                        return Err(Error::DuplicateField("alphabet".into()));
                    }
                    let mut names = vec![self.lx.expect_name()?.0];
                    while *self.lx.peek()? == Tok::Comma {
                        self.lx.next()?;
                        names.push(self.lx.expect_name()?.0);
                    }
                    self.alphabet = Some(user_alphabet(&names)?);
                }
                "let" => {
                    let (mname, mpos) = self.lx.expect_name()?;
                    let alph = self.alphabet(mpos)?.clone();
                    if alph.symbol(&mname).is_some() {
                        return Err(Error::MacroClash(mname));
                    }
                    if self.macros.contains_key(&mname) {
                        return Err(Error::DuplicateField(mname));
                    }
                    self.lx.expect(Tok::Eq)?;
                    let body = parse_regex(&mut self.lx)?;
                    let mut used = Vec::new();
                    Self::bare_names(&body, &mut used);
                    for u in used {
                        if alph.symbol(&u).is_none() && !self.macros.contains_key(&u) {
                            return Err(if u == mname {
                                Error::RecursiveMacro(u)
                            } else {
                                Error::UndefinedMacro(u)
                            });
                        }
                    }
                    self.macros.insert(mname, body);
                }
                field => {
                    let Some(i) = FIELDS.iter().position(|(n, _)| *n == field) else {
                        return Err(self.lx.error(pos, format!("unknown declaration `{field}`")));
                    };
                    if values[i].is_some() {
                        return Err(Error::DuplicateField(field.into()));
                    }
                    self.lx.expect(Tok::Eq)?;
                    let is_block = matches!(self.lx.peek()?, Tok::Name(n) if n == "automaton");
                    let value = if is_block {
                        self.lx.next()?;
                        let alph = self.field_alphabet(FIELDS[i].1, pos)?;
                        FieldValue::Block(parse_automaton_block(&mut self.lx, &alph)?.1)
                    } else {
                        FieldValue::Regex(parse_regex(&mut self.lx)?)
                    };
                    values[i] = Some((value, pos));
                }
            }
            self.lx.end_statement()?;
        }

        let name = name.ok_or(Error::MissingField("system"))?;
        let alphabet = self
            .alphabet
            .clone()
            .ok_or(Error::MissingField("alphabet"))?;
        let mut built: Vec<Option<Nfa>> = Vec::with_capacity(FIELDS.len());
        for (i, v) in values.into_iter().enumerate() {
            built.push(match v {
                None => None,
                Some((FieldValue::Block(n), _)) => Some(n),
                Some((FieldValue::Regex(re), pos)) => {
                    let alph = self.field_alphabet(FIELDS[i].1, pos)?;
                    Some(compile(&re, &alph, &self.macros)?)
                }
            });
        }
        let mut take = |i: usize| built[i].take().ok_or(Error::MissingField(FIELDS[i].0));
        let v1 = take(0)?;
        let v2 = take(1)?;
        let init = take(2)?;
        let final_ = take(3)?;
        let pair = vec![alphabet.clone(), alphabet.clone()];
        let p1 = Relation::new(pair.clone(), take(4)?)?;
        let p2 = Relation::new(pair, take(5)?)?;
        let fairness = match built[6].take() {
            Some(n) => Some(Annotator::new(Relation::new(
                vec![alphabet.clone(), gamma().clone()],
                n,
            )?)?),
            None => None,
        };
        let spec = SystemSpec {
            name,
            alphabet,
            v1,
            v2,
            init,
            final_,
            p1,
            p2,
            fairness,
        };
        if spec.fairness.is_some()
            && spec
                .alphabet
                .names()
                .iter()
                .any(|n| n.starts_with(RESERVED_PREFIX))
        {
            return Err(Error::ReservedSymbol(PEBBLE.into()));
        }
        Ok(spec)
    }
}

/// User alphabets: identifiers only, except that a counter-encoded system
/// lists both counter symbols.
fn user_alphabet(names: &[String]) -> Result<Arc<Alphabet>> {
    let mut seen = HashSet::new();
    let mut counters = 0;
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::DuplicateSymbol(n.clone()));
        }
        if n == PEBBLE || n == GAP {
            counters += 1;
        } else if n.starts_with(RESERVED_PREFIX) {
            return Err(Error::ReservedSymbol(n.clone()));
        } else if !crate::alphabet::is_identifier(n) || n == crate::syntax::WILDCARD {
            return Err(Error::InvalidSymbol(n.clone()));
        }
    }
    if counters == 1 {
        let n = names.iter().find(|n| *n == PEBBLE || *n == GAP).unwrap();
        return Err(Error::ReservedSymbol(n.clone()));
    }
    Alphabet::new(names)
}
