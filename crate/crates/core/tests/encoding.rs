mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use rmcfair::alphabet::{Alphabet, Symbol, Word};
use rmcfair::benchmarks::{benchmark, entries};
use rmcfair::encode::*;
use rmcfair::nfa::Nfa;
use rmcfair::oracle::{as_reach, expand};
use rmcfair::relation::Relation;
use rmcfair::spec::{gamma, validate, Annotator, GammaLetter, Rule, SystemSpec};

/// Value and length of a well-formed block `#1^v #0^(len-v)`.
fn block_value(w: &[Symbol], pebble: Symbol) -> Option<(usize, usize)> {
    let v = w.iter().take_while(|&&s| s == pebble).count();
    if w.is_empty() || w[v..].contains(&pebble) {
        return None;
    }
    Some((v, w.len()))
}

#[test]
fn gadgets_match_counter_arithmetic() {
    let alph = counter_alphabet().clone();
    let pebble = alph.lookup("#1").unwrap();
    let block = |v: usize, len: usize| -> Word {
        let mut w = vec![pebble; v];
        w.resize(len, alph.lookup("#0").unwrap());
        w
    };
    for g in Gadget::ALL {
        let rel = g.relation();
        for len in 0..=6 {
            for w in Nfa::universal(alph.clone()).words_of_length(len) {
                let want = match block_value(&w, pebble) {
                    Some((v, l)) if v >= 1 => vec![match g {
                        Gadget::Id => block(v, l),
                        Gadget::Dec => block(v - 1, l),
                        Gadget::Reset => block(l, l),
                    }],
                    _ => vec![],
                };
                assert_eq!(rel.successors(&w), want, "{g} on {}", alph.render(&w));
            }
        }
    }
}

#[test]
fn default_table_follows_the_update_rule() {
    let t = SigmaTable::default();
    for g in GammaLetter::ALL {
        let want = match (g.premise, g.consequence, g.compassion) {
            (true, false, _) => Gadget::Dec,
            (false, false, true) => Gadget::Id,
            _ => Gadget::Reset,
        };
        assert_eq!(t.get(g), want, "{}", g.index());
    }
    assert_eq!(t.mutations().len(), 16);
}

fn ab() -> Arc<Alphabet> {
    letters(2)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    /// Stage 1 accepts exactly the interleavings `(a,b) c` with `(a,b)` a
    /// move and `c` an annotation of `a`.
    #[test]
    fn stage1_interleaves_moves_and_annotations(rr in raw_nfa(4, 2), ra in raw_nfa(16, 2)) {
        let sigma = ab();
        let pair = Alphabet::product(&[sigma.clone(), sigma.clone()]).unwrap();
        let rel = Relation::new(vec![sigma.clone(), sigma.clone()], rr.build(&pair)).unwrap();
        let ann_alph = Alphabet::product(&[sigma.clone(), gamma().clone()]).unwrap();
        let ann = Annotator::new(Relation::new(vec![sigma.clone(), gamma().clone()], ra.build(&ann_alph)).unwrap()).unwrap();
        let st = stage1(&rel, &ann).unwrap();
        let (trel, tann) = (raw_table(&rr, 3), raw_table(&ra, 3));
        for n in 0..=3 {
            // Pair letter ids are 2a + b, annotator letters 8a + c.
            let words = st.words_of_length(2 * n);
            for w in &words {
                let (mut ri, mut ai) = (0, 0);
                for i in 0..n {
                    let p = w[2 * i].index();
                    let c = w[2 * i + 1].index();
                    prop_assert!(p < 4 && c >= 4);
                    ri = ri * 4 + p;
                    ai = ai * 16 + (p / 2) * 8 + (c - 4);
                }
                prop_assert!(trel[n][ri] && tann[n][ai]);
            }
            let mut expected = 0usize;
            for x in 0..1usize << n {
                let digits: Vec<usize> = (0..n).map(|i| x >> (n - 1 - i) & 1).collect();
                let moves = (0..1usize << n).filter(|&y| {
                    trel[n][(0..n).fold(0, |acc, i| acc * 4 + digits[i] * 2 + (y >> (n - 1 - i) & 1))]
                }).count();
                let anns = (0..8usize.pow(n as u32)).filter(|&c| {
                    tann[n][(0..n).fold(0, |acc, i| acc * 16 + digits[i] * 8 + c / 8usize.pow((n - 1 - i) as u32) % 8)]
                }).count();
                expected += moves * anns;
            }
            prop_assert_eq!(words.len(), expected);
        }
    }
}

#[test]
fn stage1_marking_example() {
    let spec = benchmark("herman-ring-merge").unwrap();
    let sigma = spec.alphabet.clone();
    let rel = Relation::parse("T/Tm", vec![sigma.clone(), sigma.clone()]).unwrap();
    let st = stage1(&rel, spec.fairness.as_ref().unwrap()).unwrap();
    let inter = intermediate_alphabet(&sigma).unwrap();
    let words: Vec<String> = st
        .words_of_length(2)
        .iter()
        .map(|w| inter.render(w))
        .collect();
    assert_eq!(words, vec!["T/Tm 101"]);
}

fn annotator(text: &str, sigma: &Arc<Alphabet>) -> Annotator {
    Annotator::new(Relation::parse(text, vec![sigma.clone(), gamma().clone()]).unwrap()).unwrap()
}

#[test]
fn shipped_annotators_are_consistent() {
    for e in entries() {
        let spec = benchmark(e.name).unwrap();
        if let Some(ann) = &spec.fairness {
            assert_eq!(check_annotator(ann).unwrap(), None, "{}", e.name);
        }
    }
}

#[test]
fn mixed_kind_annotator_is_rejected_with_witness() {
    let sigma = ab();
    let ann = annotator("a/101 (a/001)* | b/100 (_/000)*", &sigma);
    let (w0, w1, pos) = check_annotator(&ann).unwrap().expect("inconsistent");
    assert_eq!(pos, 0);
    let kinds =
        |w: &Word| -> Vec<bool> { ann.outputs(w).iter().map(|c| c[pos].compassion).collect() };
    assert!(kinds(&w0).contains(&false));
    assert!(kinds(&w1).contains(&true));
    assert_eq!(
        (sigma.render(&w0), sigma.render(&w1)),
        ("b".to_string(), "a".to_string())
    );

    // Disagreement deeper in the word, between words of different lengths.
    let ann = annotator("a/001 a/001 | b/001 b/000 b/000", &sigma);
    let (w0, w1, pos) = check_annotator(&ann).unwrap().expect("inconsistent");
    assert_eq!(pos, 1);
    assert_eq!(w0.len(), 3);
    assert_eq!(w1.len(), 2);
    match encode_system(&mixed_spec(&ann)) {
        Err(rmcfair::error::Error::InconsistentAnnotator { position, .. }) => {
            assert_eq!(position, 1)
        }
        other => panic!("{:?}", other.map(|e| e.spec.name)),
    }
}

fn mixed_spec(ann: &Annotator) -> SystemSpec {
    let mut spec = SystemSpec::parse(
        "system mixed\nalphabet a, b\nv1 = a+\nv2 = b+\ninit = a+\nfinal = []\np1 = (a/b)+\np2 = (b/a)+\n",
    )
    .unwrap();
    spec.fairness = Some(ann.clone());
    spec
}

#[test]
fn marking_only_tokens_leaves_a_dead_end() {
    let src = rmcfair::benchmarks::entry("herman-ring-merge")
        .unwrap()
        .source;
    let mutated = src.replace("let Pick = T/Tm | B/Bm", "let Pick = T/Tm");
    assert_ne!(mutated, src);
    let spec = SystemSpec::parse(&mutated).unwrap();
    let v = validate(&spec).unwrap();
    let dead: Vec<_> = v.iter().filter(|v| v.rule == Rule::DeadEnd).collect();
    assert_eq!(dead.len(), 1, "{v:?}");
    assert_eq!(spec.alphabet.render(&dead[0].witness[0]), "B B");
}

#[test]
fn herman_marking_and_final() {
    let spec = benchmark("herman-ring-merge").unwrap();
    let a = &spec.alphabet;
    let succ: Vec<String> = spec
        .p1
        .successors(&a.parse_word("T B").unwrap())
        .iter()
        .map(|w| a.render(w))
        .collect();
    assert_eq!(succ, vec!["T Bm", "Tm B"]);
    assert!(spec.final_.accepts(&a.parse_word("B T B").unwrap()));
    assert!(!spec.final_.accepts(&a.parse_word("T B T").unwrap()));
}

#[test]
fn encoded_init_and_guard() {
    let spec = benchmark("herman-ring-merge").unwrap();
    let enc = encode_system(&spec).unwrap();
    let e = &enc.spec.alphabet;
    assert_eq!(enc.spec.name, format!("herman-ring-merge{ENCODED_SUFFIX}"));
    assert!(enc
        .spec
        .init
        .accepts(&e.parse_word("T #1 B #1 #1").unwrap()));
    assert!(!enc.spec.init.accepts(&e.parse_word("T #1 B #0").unwrap()));
    // A block of gaps only blocks every move.
    let alarm = e.parse_word("T #1 B #0").unwrap();
    assert!(enc.spec.p1.successors(&alarm).is_empty());
    assert!(enc.spec.final_.accepts(&alarm));
    // Moves preserve length and decode to well-formed configurations.
    let x = e.parse_word("T #1 #1 B #1 #0").unwrap();
    for y in enc.spec.p1.successors(&x) {
        assert_eq!(y.len(), x.len());
        let d = enc.decode(&y).unwrap();
        assert_eq!(d.blocks, vec![2, 2]);
    }
}

proptest! {
    #[test]
    fn decode_inverts_encode_state(letters in prop::collection::vec(0u32..4, 1..5), k in 1usize..5, seed in any::<u64>()) {
        let spec = benchmark("herman-ring-merge").unwrap();
        let enc = encode_system(&spec).unwrap();
        let word: Word = letters.into_iter().map(Symbol).collect();
        let values: Vec<usize> = (0..word.len()).map(|i| (seed >> (4 * i)) as usize % (k + 1)).collect();
        let w = enc.encode_state(&word, &values, k);
        prop_assert_eq!(w.len(), word.len() * (k + 1));
        let d = enc.decode(&w).unwrap();
        prop_assert_eq!(d.word, word);
        prop_assert_eq!(d.values, values);
        prop_assert!(d.blocks.iter().all(|&b| b == k));
    }
}

/// The hand encoding resets the counter of the picked process at the
/// scheduler move, the generic one on the move out of the marked
/// configuration. Instances of the same total length have the same
/// states, owners and final states, the same number of moves and the same
/// verdict.
#[test]
fn hand_and_generic_herman_agree_on_verdicts() {
    let hand = benchmark("herman-ring-merge-hand").unwrap();
    let generic = encode_system(&benchmark("herman-ring-merge").unwrap())
        .unwrap()
        .spec;
    for len in 2..=9 {
        let a = expand(&hand, len).unwrap();
        let b = expand(&generic, len).unwrap();
        let render = |s: &SystemSpec, ws: &[Word]| {
            ws.iter().map(|w| s.alphabet.render(w)).collect::<Vec<_>>()
        };
        assert_eq!(
            render(&hand, &a.labels),
            render(&generic, &b.labels),
            "L={len}"
        );
        assert_eq!(a.owner, b.owner);
        assert_eq!(a.init, b.init);
        assert_eq!(a.finals, b.finals);
        assert_eq!(a.num_edges(), b.num_edges());
        assert_eq!(as_reach(&a).holds, as_reach(&b).holds, "L={len}");
    }
}
