//! Lexer, regular expressions and automaton blocks.
//!
//! The same token stream serves regexes, `automaton` blocks, specification
//! files and proof files. Newlines are significant at the top level and
//! ignored inside parentheses and braces, so a long regex may be wrapped
//! inside `( … )`.

use std::collections::HashMap;
use std::sync::Arc;

use crate::alphabet::{Alphabet, Symbol};
use crate::error::{Error, Result};
use crate::nfa::{Nfa, NfaBuilder, State};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Name(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Bar,
    Star,
    Plus,
    Question,
    Slash,
    Comma,
    Semi,
    Eq,
    Dash,
    Arrow,
    Newline,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
            other => {
                let s = match other {
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::Bar => "|",
                    Tok::Star => "*",
                    Tok::Plus => "+",
                    Tok::Question => "?",
                    Tok::Slash => "/",
                    Tok::Comma => ",",
                    Tok::Semi => ";",
                    Tok::Eq => "=",
                    Tok::Dash => "-",
                    Tok::Arrow => "->",
                    _ => unreachable!(),
                };
                format!("`{s}`")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

pub struct Lexer<'a> {
    src: &'a str,
    offset: usize,
    line: usize,
    col: usize,
    depth: usize,
    peeked: Option<(Tok, Pos)>,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '#'
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer {
            src,
            offset: 0,
            line: 1,
            col: 1,
            depth: 0,
            peeked: None,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.offset..].chars().next()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    pub fn error(&self, pos: Pos, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: pos.line,
            col: pos.col,
            msg: msg.into(),
        }
    }

    fn lex(&mut self) -> Result<(Tok, Pos)> {
        loop {
            match self.peek_char() {
                Some('\n') if self.depth == 0 => break,
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.src[self.offset..].starts_with("//") => {
                    while let Some(c) = self.peek_char() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
        let pos = Pos {
            line: self.line,
            col: self.col,
        };
        let Some(c) = self.bump() else {
            return Ok((Tok::Eof, pos));
        };
        let tok = match c {
            '\n' => Tok::Newline,
            '(' => {
                self.depth += 1;
                Tok::LParen
            }
            ')' => {
                self.depth = self.depth.saturating_sub(1);
                Tok::RParen
            }
            '{' => {
                self.depth += 1;
                Tok::LBrace
            }
            '}' => {
                self.depth = self.depth.saturating_sub(1);
                Tok::RBrace
            }
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '|' => Tok::Bar,
            '*' => Tok::Star,
            '+' => Tok::Plus,
            '?' => Tok::Question,
            '/' => Tok::Slash,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            '-' => {
                if self.peek_char() == Some('>') {
                    self.bump();
                    Tok::Arrow
                } else {
                    Tok::Dash
                }
            }
            c if is_name_char(c) => {
                let start = self.offset - c.len_utf8();
                while self.peek_char().is_some_and(is_name_char) {
                    self.bump();
                }
                Tok::Name(self.src[start..self.offset].to_string())
            }
            other => return Err(self.error(pos, format!("unexpected character `{other}`"))),
        };
        Ok((tok, pos))
    }

    pub fn peek(&mut self) -> Result<&Tok> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex()?);
        }
        Ok(&self.peeked.as_ref().unwrap().0)
    }

    pub fn peek_pos(&mut self) -> Result<Pos> {
        self.peek()?;
        Ok(self.peeked.as_ref().unwrap().1)
    }

    pub fn next(&mut self) -> Result<(Tok, Pos)> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    pub fn expect(&mut self, want: Tok) -> Result<Pos> {
        let (tok, pos) = self.next()?;
        if tok == want {
            Ok(pos)
        } else {
            Err(self.error(
                pos,
                format!("expected {}, found {}", want.describe(), tok.describe()),
            ))
        }
    }

    pub fn expect_name(&mut self) -> Result<(String, Pos)> {
        match self.next()? {
            (Tok::Name(n), pos) => Ok((n, pos)),
            (tok, pos) => {
                Err(self.error(pos, format!("expected a name, found {}", tok.describe())))
            }
        }
    }

    /// Skip blank lines.
    pub fn skip_newlines(&mut self) -> Result<()> {
        while *self.peek()? == Tok::Newline {
            self.next()?;
        }
        Ok(())
    }

    /// Consume the end of a statement: a newline, a `;`, or end of input.
    pub fn end_statement(&mut self) -> Result<()> {
        match self.peek()? {
            Tok::Newline | Tok::Semi => {
                self.next()?;
                Ok(())
            }
            Tok::Eof => Ok(()),
            other => {
                let d = other.describe();
                let pos = self.peek_pos()?;
                Err(self.error(pos, format!("expected end of line, found {d}")))
            }
        }
    }

    /// The raw remainder of the current line, trimmed (comments removed).
    pub fn rest_of_line(&mut self) -> Result<(String, Pos)> {
        assert!(self.peeked.is_none(), "rest_of_line after peek");
        while self
            .peek_char()
            .is_some_and(|c| c != '\n' && c.is_whitespace())
        {
            self.bump();
        }
        let pos = Pos {
            line: self.line,
            col: self.col,
        };
        let start = self.offset;
        while self.peek_char().is_some_and(|c| c != '\n') {
            self.bump();
        }
        let mut text = &self.src[start..self.offset];
        if let Some(i) = text.find("//") {
            text = &text[..i];
        }
        Ok((text.trim().to_string(), pos))
    }
}

/// Regular expression syntax tree. Letters are kept as names and resolved
/// against an alphabet at compile time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Regex {
    /// The empty language `[]`.
    Nothing,
    /// The empty word.
    Epsilon,
    /// A letter; more than one component means a tuple letter `a/b`.
    Letter(Vec<String>, Pos),
    Concat(Vec<Regex>),
    Alt(Vec<Regex>),
    Star(Box<Regex>),
    Plus(Box<Regex>),
    Opt(Box<Regex>),
}

impl Regex {
    pub fn parse(text: &str) -> Result<Regex> {
        let mut lx = Lexer::new(text);
        lx.skip_newlines()?;
        let r = parse_regex(&mut lx)?;
        lx.skip_newlines()?;
        match lx.next()? {
            (Tok::Eof, _) => Ok(r),
            (tok, pos) => Err(lx.error(pos, format!("unexpected {}", tok.describe()))),
        }
    }
}

/// Parse a regex from the token stream, stopping before a token that cannot
/// continue it.
pub fn parse_regex(lx: &mut Lexer) -> Result<Regex> {
    let mut alts = vec![parse_concat(lx)?];
    while *lx.peek()? == Tok::Bar {
        lx.next()?;
        alts.push(parse_concat(lx)?);
    }
    Ok(if alts.len() == 1 {
        alts.pop().unwrap()
    } else {
        Regex::Alt(alts)
    })
}

fn parse_concat(lx: &mut Lexer) -> Result<Regex> {
    let mut parts = Vec::new();
    loop {
        match lx.peek()? {
            Tok::Name(_) | Tok::LParen | Tok::LBracket => parts.push(parse_postfix(lx)?),
            _ => break,
        }
    }
    Ok(match parts.len() {
        0 => Regex::Epsilon,
        1 => parts.pop().unwrap(),
        _ => Regex::Concat(parts),
    })
}

fn parse_postfix(lx: &mut Lexer) -> Result<Regex> {
    let mut r = parse_atom(lx)?;
    loop {
        r = match lx.peek()? {
            Tok::Star => Regex::Star(Box::new(r)),
            Tok::Plus => Regex::Plus(Box::new(r)),
            Tok::Question => Regex::Opt(Box::new(r)),
            _ => return Ok(r),
        };
        lx.next()?;
    }
}

fn parse_atom(lx: &mut Lexer) -> Result<Regex> {
    let (tok, pos) = lx.next()?;
    match tok {
        Tok::LParen => {
            let inner = parse_regex(lx)?;
            lx.expect(Tok::RParen)?;
            Ok(inner)
        }
        Tok::LBracket => {
            lx.expect(Tok::RBracket)?;
            Ok(Regex::Nothing)
        }
        Tok::Name(first) => {
            let mut parts = vec![first];
            while *lx.peek()? == Tok::Slash {
                lx.next()?;
                parts.push(lx.expect_name()?.0);
            }
            Ok(Regex::Letter(parts, pos))
        }
        other => Err(lx.error(
            pos,
            format!("expected a letter or `(`, found {}", other.describe()),
        )),
    }
}

/// Letter component matching any symbol of its track.
pub const WILDCARD: &str = "_";

/// Named sub-expressions introduced with `let`.
pub type Macros = HashMap<String, Regex>;

/// Compile a regex source over `alphabet` (no macros).
pub fn compile_regex(text: &str, alphabet: &Arc<Alphabet>) -> Result<Nfa> {
    compile(&Regex::parse(text)?, alphabet, &Macros::new())
}

/// Glushkov construction: one state per letter occurrence plus a start
/// state; no epsilon transitions.
pub fn compile(re: &Regex, alphabet: &Arc<Alphabet>, macros: &Macros) -> Result<Nfa> {
    let mut g = Glushkov {
        alphabet,
        macros,
        positions: Vec::new(),
        follow: Vec::new(),
        stack: Vec::new(),
    };
    let info = g.walk(re)?;
    let mut b = NfaBuilder::new(alphabet.clone());
    let start = b.add_state(info.nullable);
    b.set_initial(start);
    for _ in 0..g.positions.len() {
        b.add_state(false);
    }
    for &p in &info.last {
        b.set_final(p as State + 1, true);
    }
    for &p in &info.first {
        b.add_transition(start, g.positions[p], p as State + 1);
    }
    for (p, follows) in g.follow.iter().enumerate() {
        for &q in follows {
            b.add_transition(p as State + 1, g.positions[q], q as State + 1);
        }
    }
    Ok(b.build())
}

struct Info {
    nullable: bool,
    first: Vec<usize>,
    last: Vec<usize>,
}

struct Glushkov<'a> {
    alphabet: &'a Arc<Alphabet>,
    macros: &'a Macros,
    positions: Vec<Symbol>,
    follow: Vec<Vec<usize>>,
    stack: Vec<String>,
}

impl Glushkov<'_> {
    fn letter(&mut self, parts: &[String], pos: Pos) -> Result<Info> {
        let arity = self.alphabet.arity();
        if parts.len() == 1 {
            let name = &parts[0];
            if let Some(body) = self.macros.get(name) {
                if self.stack.contains(name) {
                    return Err(Error::RecursiveMacro(name.clone()));
                }
                self.stack.push(name.clone());
                let body = body.clone();
                let r = self.walk(&body);
                self.stack.pop();
                return r;
            }
            if arity > 1 {
                return Err(Error::UndefinedMacro(name.clone()));
            }
        }
        let syms: Vec<Symbol> = if arity == 1 {
            if parts.len() != 1 {
                return Err(Error::Parse {
                    line: pos.line,
                    col: pos.col,
                    msg: format!(
                        "tuple letter `{}` in a single-track expression",
                        parts.join("/")
                    ),
                });
            }
            if parts[0] == WILDCARD {
                self.alphabet.symbols().collect()
            } else {
                vec![self.alphabet.lookup(&parts[0])?]
            }
        } else {
            if parts.len() != arity {
                return Err(Error::Parse {
                    line: pos.line,
                    col: pos.col,
                    msg: format!(
                        "letter `{}` has {} components, expected {arity}",
                        parts.join("/"),
                        parts.len()
                    ),
                });
            }
            let mut choices: Vec<Vec<Symbol>> = Vec::with_capacity(arity);
            for (t, n) in parts.iter().enumerate() {
                let track = self.alphabet.track(t);
                choices.push(if n == WILDCARD {
                    track.symbols().collect()
                } else {
                    vec![track.lookup(n)?]
                });
            }
            let mut out = vec![Vec::new()];
            for c in &choices {
                out = out
                    .into_iter()
                    .flat_map(|prefix| {
                        c.iter().map(move |&s| {
                            let mut p = prefix.clone();
                            p.push(s);
                            p
                        })
                    })
                    .collect();
            }
            out.iter()
                .map(|comps| self.alphabet.encode(comps))
                .collect()
        };
        // A wildcard expands to an alternative of plain letters.
        let mut first = Vec::with_capacity(syms.len());
        for sym in syms {
            first.push(self.positions.len());
            self.positions.push(sym);
            self.follow.push(Vec::new());
        }
        Ok(Info {
            nullable: false,
            first: first.clone(),
            last: first,
        })
    }

    fn link(&mut self, from: &[usize], to: &[usize]) {
        for &p in from {
            let f = &mut self.follow[p];
            f.extend_from_slice(to);
            f.sort_unstable();
            f.dedup();
        }
    }

    fn walk(&mut self, re: &Regex) -> Result<Info> {
        Ok(match re {
            Regex::Nothing => Info {
                nullable: false,
                first: vec![],
                last: vec![],
            },
            Regex::Epsilon => Info {
                nullable: true,
                first: vec![],
                last: vec![],
            },
            Regex::Letter(parts, pos) => self.letter(parts, *pos)?,
            Regex::Concat(parts) => {
                let mut acc = Info {
                    nullable: true,
                    first: vec![],
                    last: vec![],
                };
                for part in parts {
                    let i = self.walk(part)?;
                    self.link(&acc.last, &i.first);
                    if acc.nullable {
                        acc.first.extend_from_slice(&i.first);
                    }
                    if i.nullable {
                        acc.last.extend_from_slice(&i.last);
                    } else {
                        acc.last = i.last;
                    }
                    acc.nullable &= i.nullable;
                }
                acc
            }
            Regex::Alt(parts) => {
                let mut acc = Info {
                    nullable: false,
                    first: vec![],
                    last: vec![],
                };
                for part in parts {
                    let i = self.walk(part)?;
                    acc.nullable |= i.nullable;
                    acc.first.extend(i.first);
                    acc.last.extend(i.last);
                }
                acc
            }
            Regex::Star(inner) | Regex::Plus(inner) => {
                let i = self.walk(inner)?;
                self.link(&i.last, &i.first);
                Info {
                    nullable: i.nullable || matches!(re, Regex::Star(_)),
                    ..i
                }
            }
            Regex::Opt(inner) => {
                let i = self.walk(inner)?;
                Info {
                    nullable: true,
                    ..i
                }
            }
        })
    }
}

/// Parse the body of an `automaton` block after the keyword. Letters are
/// resolved by name against `alphabet`; the block must list exactly the
/// same set of letters.
pub fn parse_automaton_block(lx: &mut Lexer, alphabet: &Arc<Alphabet>) -> Result<(String, Nfa)> {
    let (name, _) = lx.expect_name()?;
    let open = lx.expect(Tok::LBrace)?;
    let mut listed: Option<Vec<Symbol>> = None;
    let mut states: Option<usize> = None;
    let mut initial = Vec::new();
    let mut finals = Vec::new();
    let mut transitions = Vec::new();
    let letter = |lx: &mut Lexer| -> Result<(String, Pos)> {
        let (first, pos) = lx.expect_name()?;
        let mut s = first;
        while *lx.peek()? == Tok::Slash {
            lx.next()?;
            s.push('/');
            s.push_str(&lx.expect_name()?.0);
        }
        Ok((s, pos))
    };
    let number = |lx: &mut Lexer| -> Result<usize> {
        let (n, pos) = lx.expect_name()?;
        n.parse()
            .map_err(|_| lx.error(pos, format!("expected a state number, found `{n}`")))
    };
    let list = |lx: &mut Lexer| -> Result<Vec<usize>> {
        let mut out = Vec::new();
        if *lx.peek()? == Tok::Semi {
            return Ok(out);
        }
        out.push(number(lx)?);
        while *lx.peek()? == Tok::Comma {
            lx.next()?;
            out.push(number(lx)?);
        }
        Ok(out)
    };
    loop {
        let pos = lx.peek_pos()?;
        match lx.peek()?.clone() {
            Tok::RBrace => {
                lx.next()?;
                break;
            }
            Tok::Name(kw) if kw == "alphabet" => {
                lx.next()?;
                let mut syms = Vec::new();
                loop {
                    let (n, _) = letter(lx)?;
                    syms.push(alphabet.lookup(&n)?);
                    if *lx.peek()? != Tok::Comma {
                        break;
                    }
                    lx.next()?;
                }
                listed = Some(syms);
            }
            Tok::Name(kw) if kw == "states" => {
                lx.next()?;
                states = Some(number(lx)?);
            }
            Tok::Name(kw) if kw == "initial" => {
                lx.next()?;
                initial = list(lx)?;
            }
            Tok::Name(kw) if kw == "final" => {
                lx.next()?;
                finals = list(lx)?;
            }
            Tok::Name(_) => {
                let from = number(lx)?;
                lx.expect(Tok::Dash)?;
                let (n, _) = letter(lx)?;
                lx.expect(Tok::Arrow)?;
                let to = number(lx)?;
                transitions.push((from, alphabet.lookup(&n)?, to, pos));
            }
            Tok::Eof => return Err(lx.error(open, "unterminated automaton block")),
            other => {
                return Err(lx.error(
                    pos,
                    format!("unexpected {} in automaton block", other.describe()),
                ))
            }
        }
        lx.expect(Tok::Semi)?;
    }
    let listed = listed.ok_or(Error::MissingField("alphabet"))?;
    let mut seen = vec![false; alphabet.len()];
    for s in &listed {
        seen[s.index()] = true;
    }
    if listed.len() != alphabet.len() || seen.iter().any(|s| !s) {
        return Err(Error::AlphabetMismatch(format!(
            "automaton `{name}` must list exactly [{alphabet}]"
        )));
    }
    let n = states.ok_or(Error::MissingField("states"))?;
    let check = |q: usize, pos: Pos| -> Result<State> {
        if q < n {
            Ok(q as State)
        } else {
            Err(Error::Parse {
                line: pos.line,
                col: pos.col,
                msg: format!("state {q} out of range (states {n})"),
            })
        }
    };
    let mut b = NfaBuilder::new(alphabet.clone());
    b.add_states(n);
    for q in initial {
        b.set_initial(check(q, open)?);
    }
    for q in finals {
        let q = check(q, open)?;
        b.set_final(q, true);
    }
    for (p, a, q, pos) in transitions {
        let (p, q) = (check(p, pos)?, check(q, pos)?);
        b.add_transition(p, a, q);
    }
    Ok((name, b.build()))
}

/// Parse a standalone automaton block (`automaton <name> { … }`).
pub fn parse_automaton(text: &str, alphabet: &Arc<Alphabet>) -> Result<(String, Nfa)> {
    let mut lx = Lexer::new(text);
    lx.skip_newlines()?;
    let (kw, pos) = lx.expect_name()?;
    if kw != "automaton" {
        return Err(lx.error(pos, "expected `automaton`"));
    }
    let out = parse_automaton_block(&mut lx, alphabet)?;
    lx.skip_newlines()?;
    match lx.next()? {
        (Tok::Eof, _) => Ok(out),
        (tok, pos) => Err(lx.error(pos, format!("unexpected {}", tok.describe()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tb() -> Arc<Alphabet> {
        Alphabet::new(["T", "B"]).unwrap()
    }

    #[test]
    fn single_token_language() {
        let al = tb();
        let n = compile_regex("B* T B*", &al).unwrap();
        assert!(n.accepts(&al.parse_word("B T B").unwrap()));
        assert!(!n.accepts(&al.parse_word("T T").unwrap()));
    }

    #[test]
    fn empty_regex_is_epsilon() {
        let n = compile_regex("", &tb()).unwrap();
        assert!(n.accepts(&[]));
        assert!(!n.accepts(&[Symbol(0)]));
        assert!(compile_regex("[]", &tb()).unwrap().is_empty());
    }

    #[test]
    fn parse_errors_have_positions() {
        match compile_regex("T (B\n | ", &tb()) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(
            compile_regex("T X", &tb()).unwrap_err(),
            Error::UnknownSymbol("X".into())
        );
    }

    #[test]
    fn pair_letters_and_macros() {
        let al = tb();
        let pair = Alphabet::product(&[al.clone(), al.clone()]).unwrap();
        let mut macros = Macros::new();
        macros.insert("I".into(), Regex::parse("T/T | B/B").unwrap());
        let n = compile(&Regex::parse("I* T/B I*").unwrap(), &pair, &macros).unwrap();
        let w = vec![pair.lookup("B/B").unwrap(), pair.lookup("T/B").unwrap()];
        assert!(n.accepts(&w));
        let err = compile(&Regex::parse("J T/B").unwrap(), &pair, &macros).unwrap_err();
        assert_eq!(err, Error::UndefinedMacro("J".into()));
    }

    #[test]
    fn wildcard_components() {
        let al = tb();
        let pair = Alphabet::product(&[al.clone(), al.clone()]).unwrap();
        let n = compile(&Regex::parse("T/_ _/_*").unwrap(), &pair, &Macros::new()).unwrap();
        assert!(n.accepts(&[pair.lookup("T/B").unwrap(), pair.lookup("B/T").unwrap()]));
        assert!(!n.accepts(&[pair.lookup("B/B").unwrap()]));
        assert!(compile_regex("_ _", &al)
            .unwrap()
            .accepts(&al.parse_word("B T").unwrap()));
    }

    #[test]
    fn automaton_block_roundtrip() {
        let al = tb();
        let n = compile_regex("(T B)* | B", &al).unwrap();
        let text = n.to_block("x");
        let (name, back) = parse_automaton(&text, &al).unwrap();
        assert_eq!(name, "x");
        assert!(back.equivalent(&n).unwrap());
    }

    #[test]
    fn automaton_block_rejects_bad_state() {
        let text = "automaton a { alphabet T, B; states 1; initial 0; final 0; 0 -T-> 3; }";
        assert!(matches!(
            parse_automaton(text, &tb()),
            Err(Error::Parse { .. })
        ));
    }
}
