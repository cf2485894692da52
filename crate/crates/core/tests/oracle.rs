use std::collections::BTreeSet;

use proptest::prelude::*;
use rmcfair::alphabet::Word;
use rmcfair::benchmarks::{benchmark, entries, Kind};
use rmcfair::encode::{Gadget, SigmaTable};
use rmcfair::error::Error;
use rmcfair::oracle::{
    as_reach, compare_encodings, compare_encodings_with, expand, kfair_expand,
    kfair_expand_bounded, kfair_verdict, render_fair_state, update_counter, ExplicitMdp, FairState,
    Player,
};
use rmcfair::spec::{GammaLetter, SystemSpec};

/// Does the Markov chain induced by `choice` reach a final state almost
/// surely from `s`? In a finite chain this holds iff every state reachable
/// without passing a final state can still reach one.
fn chain_reaches(mdp: &ExplicitMdp<()>, choice: &[Option<u32>], s: u32) -> bool {
    let succ = |q: usize| -> Vec<u32> {
        if mdp.finals[q] {
            return vec![];
        }
        match mdp.owner[q] {
            Player::Scheduler => choice[q].into_iter().collect(),
            Player::Random => mdp.edges[q].clone(),
        }
    };
    let mut reach = BTreeSet::from([s]);
    let mut stack = vec![s];
    while let Some(q) = stack.pop() {
        for t in succ(q as usize) {
            if reach.insert(t) {
                stack.push(t);
            }
        }
    }
    reach.iter().all(|&q| {
        let mut seen = BTreeSet::from([q]);
        let mut stack = vec![q];
        while let Some(p) = stack.pop() {
            if mdp.finals[p as usize] {
                return true;
            }
            for t in succ(p as usize) {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
        false
    })
}

fn all_schedulers(mdp: &ExplicitMdp<()>) -> Vec<Vec<Option<u32>>> {
    let mut out = vec![vec![]];
    for q in 0..mdp.num_states() {
        let opts: Vec<Option<u32>> =
            if mdp.owner[q] == Player::Scheduler && !mdp.edges[q].is_empty() {
                mdp.edges[q].iter().map(|&t| Some(t)).collect()
            } else {
                vec![None]
            };
        out = out
            .into_iter()
            .flat_map(|c| {
                opts.iter().map(move |&o| {
                    let mut c = c.clone();
                    c.push(o);
                    c
                })
            })
            .collect();
    }
    out
}

fn random_mdp() -> impl Strategy<Value = ExplicitMdp<()>> {
    (2usize..=12).prop_flat_map(|n| {
        let s = n as u32;
        (
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(prop::collection::vec(0..s, 0..=3), n),
            prop::collection::vec(prop::bool::weighted(0.2), n),
            prop::collection::vec(0..s, 1..=2),
        )
            .prop_map(move |(sched, edges, finals, init)| {
                let edges = edges
                    .into_iter()
                    .map(|mut e| {
                        e.sort_unstable();
                        e.dedup();
                        e
                    })
                    .collect();
                let mut init = init;
                init.sort_unstable();
                init.dedup();
                ExplicitMdp {
                    labels: vec![(); n],
                    owner: sched
                        .into_iter()
                        .map(|b| if b { Player::Scheduler } else { Player::Random })
                        .collect(),
                    edges,
                    init,
                    finals,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn as_reach_matches_memoryless_enumeration(mdp in random_mdp()) {
        let schedulers = all_schedulers(&mdp);
        prop_assume!(schedulers.len() <= 5000);
        let want = schedulers.iter().all(|c| mdp.init.iter().all(|&s| chain_reaches(&mdp, c, s)));
        let v = as_reach(&mdp);
        prop_assert_eq!(v.holds, want);
        prop_assert_eq!(v.witness.is_some(), !want);
        if let Some(w) = v.witness {
            let mut choice: Vec<Option<u32>> =
                (0..mdp.num_states()).map(|q| mdp.edges[q].first().copied()).collect();
            for &(s, t) in &w.choices {
                prop_assert_eq!(mdp.owner[s as usize], Player::Scheduler);
                prop_assert!(mdp.edges[s as usize].contains(&t));
                choice[s as usize] = Some(t);
            }
            prop_assert!(!mdp.init.iter().all(|&s| chain_reaches(&mdp, &choice, s)));
        }
    }
}

fn moves(spec: &SystemSpec, x: &Word, n: usize) -> BTreeSet<Word> {
    let configs = spec.configurations();
    let rel = if spec.v1.accepts(x) {
        &spec.p1
    } else {
        &spec.p2
    };
    configs
        .words_of_length(n)
        .into_iter()
        .filter(|y| rel.contains(&[x, y]))
        .collect()
}

#[test]
fn plain_edges_are_pairwise_memberships() {
    for name in [
        "herman-ring-merge",
        "herman-line-annih",
        "moran-line-2",
        "coin-game-3",
    ] {
        let spec = benchmark(name).unwrap();
        for n in 1..=3 {
            let mdp = expand(&spec, n).unwrap();
            assert_eq!(mdp.labels, spec.configurations().words_of_length(n));
            for (s, x) in mdp.labels.iter().enumerate() {
                let got: BTreeSet<Word> = mdp.edges[s]
                    .iter()
                    .map(|&t| mdp.labels[t as usize].clone())
                    .collect();
                assert_eq!(got, moves(&spec, x, n), "{name} n={n}");
                assert_eq!(mdp.finals[s], spec.final_.accepts(x));
                assert_eq!(mdp.owner[s] == Player::Scheduler, spec.v1.accepts(x));
                assert_eq!(mdp.init.contains(&(s as u32)), spec.init.accepts(x));
            }
        }
    }
}

/// Counter update written from the rule table: a pending obligation
/// decrements, an idle compassion counter keeps its value, anything
/// else refills.
fn next_counter(v: u8, g: GammaLetter, k: u8) -> u8 {
    match (g.premise, g.consequence, g.compassion) {
        (true, false, _) => v - 1,
        (false, false, true) => v,
        _ => k,
    }
}

#[test]
fn kfair_edges_follow_the_counter_rule() {
    for name in [
        "herman-ring-merge",
        "token-death",
        "mixed-fairness",
        "cell-cycle-1",
    ] {
        let spec = benchmark(name).unwrap();
        let ann = spec.fairness.as_ref().unwrap();
        for n in 1..=3 {
            for k in 1..=3u8 {
                let mdp = kfair_expand(&spec, n, k).unwrap();
                let index: std::collections::HashMap<&FairState, usize> =
                    mdp.labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
                for (s, (x, vals)) in mdp.labels.iter().enumerate() {
                    for g in GammaLetter::ALL {
                        assert_eq!(update_counter(k, g, k), next_counter(k, g, k));
                    }
                    let mut want = BTreeSet::new();
                    if vals.iter().all(|&v| v > 0) {
                        for y in moves(&spec, x, n) {
                            for c in ann.outputs(x) {
                                let v: Vec<u8> = vals
                                    .iter()
                                    .zip(&c)
                                    .map(|(&v, &g)| next_counter(v, g, k))
                                    .collect();
                                want.insert(index[&(y.clone(), v)]);
                            }
                        }
                    }
                    let got: BTreeSet<usize> = mdp.edges[s].iter().map(|&t| t as usize).collect();
                    assert_eq!(
                        got,
                        want,
                        "{name} n={n} k={k} at {}",
                        render_fair_state(&spec.alphabet, &mdp.labels[s])
                    );
                    let fin = spec.final_.accepts(x) || vals.contains(&0);
                    assert_eq!(mdp.finals[s], fin);
                    let init = spec.init.accepts(x) && vals.iter().all(|&v| v == k);
                    assert_eq!(mdp.init.contains(&(s as u32)), init);
                }
            }
        }
    }
}

#[test]
fn kfair_verdict_is_monotone_in_k() {
    for e in entries().iter().filter(|e| e.kind != Kind::Mutation) {
        let spec = benchmark(e.name).unwrap();
        if spec.fairness.is_none() {
            continue;
        }
        for n in 1..=4 {
            let verdicts: Vec<bool> = (1..=5)
                .map(|k| kfair_verdict(&spec, n, k).unwrap().holds)
                .collect();
            for k in 0..4 {
                assert!(
                    !verdicts[k + 1] || verdicts[k],
                    "{} n={n}: {verdicts:?}",
                    e.name
                );
            }
        }
    }
}

#[test]
fn known_verdicts() {
    let herman = benchmark("herman-ring-merge").unwrap();
    for k in [2, 4, 8] {
        assert!(kfair_verdict(&herman, 3, k).unwrap().holds);
    }
    let plain = as_reach(&expand(&herman, 3).unwrap());
    assert!(!plain.holds);
    assert!(!plain.witness.unwrap().choices.is_empty());
    assert!(
        kfair_verdict(&benchmark("moran-line-2").unwrap(), 3, 4)
            .unwrap()
            .holds
    );
}

#[test]
fn state_bound_is_enforced() {
    let spec = benchmark("herman-ring-merge").unwrap();
    match kfair_expand_bounded(&spec, 4, 8, 1000) {
        Err(Error::StateBound { needed, bound }) => {
            assert_eq!(bound, 1000);
            assert!(needed > 1000);
        }
        other => panic!("{:?}", other.map(|m| m.num_states())),
    }
}

#[test]
fn swapping_dec_and_id_is_detected() {
    let spec = benchmark("herman-ring-merge").unwrap();
    let mut table = SigmaTable::default();
    for g in table.0.iter_mut() {
        *g = match *g {
            Gadget::Dec => Gadget::Id,
            Gadget::Id => Gadget::Dec,
            r => r,
        };
    }
    let c = compare_encodings_with(&spec, 2, 2, &table).unwrap();
    assert!(c.mismatch.is_some());
    let ok = compare_encodings(&spec, 2, 2).unwrap();
    assert_eq!(ok.mismatch, None);
}
