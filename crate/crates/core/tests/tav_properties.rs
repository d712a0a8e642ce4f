use proptest::prelude::*;
use tav_core::hmm::{path_log_prob, viterbi_decode, LogModel};
use tav_core::tav::{presegment_times, split_point, AbstractLink, LinkKind, LinkScorer, Scope, TavError, TavSearch};
use tav_core::{
    build_abstract_models, tav_decode_traced, AbstractModelStack, AbstractionHierarchy, Error, Heuristic, HmmModel,
    ObservationSequence, TavOptions,
};

mod common;

use common::{all_sequences, bound_violations, chain_counts, graph_violations, segment_score, TOL};

fn normalize(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn rows(n: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.05f64..1.0, m), n)
        .prop_map(|r| r.iter().map(|w| normalize(w)).collect())
}

/// A model on `n` states over 3 symbols with an observation sequence.
fn instance(n: usize, len: std::ops::Range<usize>) -> impl Strategy<Value = (LogModel, ObservationSequence)> {
    (rows(n, n), rows(n, 3), rows(1, n), prop::collection::vec(0usize..3, len)).prop_map(|(a, b, pi, y)| {
        let model = HmmModel::new(a, b, pi.into_iter().next().unwrap()).validate().unwrap();
        (model, ObservationSequence::new(y))
    })
}

/// Four concrete states under two parents.
fn two_by_two() -> AbstractionHierarchy {
    AbstractionHierarchy::new(vec![4, 2], vec![vec![0, 0, 1, 1]]).unwrap()
}

/// Four concrete states, two middle states, one root state.
fn binary_four() -> AbstractionHierarchy {
    AbstractionHierarchy::new(vec![4, 2, 1], vec![vec![0, 0, 1, 1], vec![0, 0]]).unwrap()
}

fn hierarchy_for(kind: usize) -> AbstractionHierarchy {
    match kind {
        0 => two_by_two(),
        1 => binary_four(),
        2 => AbstractionHierarchy::new(vec![4, 2], vec![vec![0, 1, 1, 1]]).unwrap(),
        _ => AbstractionHierarchy::flat(4),
    }
}

#[test]
fn direct_score_example() {
    let model = HmmModel::new(
        vec![vec![0.9, 0.1], vec![0.5, 0.5]],
        vec![vec![0.8, 0.2], vec![0.5, 0.5]],
        vec![0.5, 0.5],
    )
    .validate()
    .unwrap();
    let h = AbstractionHierarchy::flat(2);
    let stack = build_abstract_models(&model, &h).unwrap();
    let obs = ObservationSequence::new(vec![1, 0, 0]);
    let mut scorer = LinkScorer::new(&stack, &h, &obs, Heuristic::Cheap);
    assert!((scorer.direct(0, 0, 0, 2) - 0.5184f64.ln()).abs() < 1e-12);
    assert!((scorer.direct(0, 0, 1, 2) - (0.9f64 * 0.8).ln()).abs() < 1e-12);
    assert!((scorer.score(LinkKind::Direct, 0, 0, 0, 1, 2) - scorer.step(0, 0, 0, 2)).abs() < 1e-12);
}

#[test]
fn cheap_formula_example() {
    let model = HmmModel::new(
        vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        vec![vec![0.7, 0.3], vec![0.3, 0.7]],
        vec![0.5, 0.5],
    )
    .validate()
    .unwrap();
    let h = AbstractionHierarchy::flat(2);
    let stack = build_abstract_models(&model, &h).unwrap();
    let obs = ObservationSequence::new(vec![0, 0, 1, 0]);
    let mut cheap = LinkScorer::new(&stack, &h, &obs, Heuristic::Cheap);
    let formula = cheap.cheap_formula(0, 0, 1, 0, 3);
    assert!((formula - 0.222264f64.ln()).abs() < 1e-12);
    let cross = cheap.cheap_cross(0, 0, 1, 0, 3);
    assert!(cross <= formula + 1e-12);
    let exact = cheap.restricted_viterbi(0, 0, 1, 0, 3);
    assert!(exact <= cross + 1e-12);
    let best = all_sequences(2, 2)
        .iter()
        .map(|mid| {
            let x = [0, mid[0], mid[1], 1];
            segment_score(&model, &obs, &x, 0, 3)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((exact - best).abs() < 1e-12);
    // span two: no interior factor
    let two = cheap.cheap_formula(0, 0, 1, 0, 2);
    assert!((two - (0.9f64 * 0.8 * 0.7 * 0.7).ln()).abs() < 1e-12);
}

#[test]
fn singleton_sibling_set_has_only_the_direct_trajectory() {
    let h = AbstractionHierarchy::new(vec![3, 2], vec![vec![0, 1, 1]]).unwrap();
    let model = HmmModel::new(
        vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.1, 0.1, 0.8]],
        vec![vec![0.5, 0.5], vec![0.9, 0.1], vec![0.2, 0.8]],
        vec![0.3, 0.3, 0.4],
    )
    .validate()
    .unwrap();
    let stack = build_abstract_models(&model, &h).unwrap();
    let obs = ObservationSequence::new(vec![0, 1, 1, 0, 1]);
    let mut scorer = LinkScorer::new(&stack, &h, &obs, Heuristic::Viterbi);
    let direct = scorer.direct(0, 0, 0, 4);
    assert!((direct - segment_score(&model, &obs, &[0; 5], 0, 4)).abs() < 1e-12);
    assert_eq!(scorer.restricted_viterbi(0, 0, 0, 0, 4), f64::NEG_INFINITY);
    assert_eq!(scorer.cheap_reentry(0, 0, 0, 4), f64::NEG_INFINITY);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn link_bounds_match_enumeration(
        (model, obs) in instance(4, 7..8),
        kind in 0usize..4,
        t1 in 0usize..4,
        span in 2usize..=6,
        i in 0usize..4,
        j in 0usize..4,
    ) {
        let h = hierarchy_for(kind);
        let t2 = (t1 + span).min(obs.len() - 1);
        prop_assume!(t2 - t1 >= 2);
        prop_assume!(Scope::of(&h, 0, i) == Scope::of(&h, 0, j));
        let stack = build_abstract_models(&model, &h).unwrap();
        let members: Vec<usize> = Scope::of(&h, 0, j).members(&h, 0).collect();
        let mut exact = f64::NEG_INFINITY;
        for mid in all_sequences(members.len(), t2 - t1 - 1) {
            let mut x = vec![0; t2 + 1];
            x[t1] = i;
            x[t2] = j;
            for (k, &m) in mid.iter().enumerate() {
                x[t1 + 1 + k] = members[m];
            }
            if i == j && x[t1..=t2].iter().all(|&s| s == j) {
                continue;
            }
            exact = exact.max(segment_score(&model, &obs, &x, t1, t2));
        }
        let mut scorer = LinkScorer::new(&stack, &h, &obs, Heuristic::Viterbi);
        let viterbi = scorer.restricted_viterbi(0, i, j, t1, t2);
        prop_assert!((viterbi - exact).abs() < TOL || viterbi == exact);
        let cheap = if i == j {
            scorer.cheap_reentry(0, j, t1, t2)
        } else {
            let cross = scorer.cheap_cross(0, i, j, t1, t2);
            prop_assert!(cross <= scorer.cheap_formula(0, i, j, t1, t2) + 1e-12);
            cross
        };
        prop_assert!(viterbi <= cheap + 1e-12);
        prop_assert!(scorer.cheap_formula(0, i, j, t1, t2) >= exact - TOL);
    }

    #[test]
    fn search_invariants_hold_after_every_iteration(
        (model, obs) in instance(4, 2..7),
        kind in 0usize..4,
        viterbi in any::<bool>(),
    ) {
        let h = hierarchy_for(kind);
        let stack = build_abstract_models(&model, &h).unwrap();
        let heuristic = if viterbi { Heuristic::Viterbi } else { Heuristic::Cheap };
        let options = TavOptions { heuristic, ..TavOptions::default() };
        let mut search = TavSearch::new(&stack, &h, &obs, options).unwrap();
        let paths = all_sequences(4, obs.len());
        let optimum = viterbi_decode(&model, &obs).unwrap().log_likelihood;
        let mut last = f64::INFINITY;
        for _ in 0..500 {
            let links = search.links();
            let bad = graph_violations(&model, &h, &obs, &links, &paths);
            prop_assert!(bad.is_empty(), "{:?}", bad);
            let incumbent = search.best_path().unwrap();
            prop_assert!(incumbent.log_score <= last + TOL);
            prop_assert!(incumbent.log_score >= optimum - TOL);
            last = incumbent.log_score;
            let bad = bound_violations(&search, &model, &h, &obs, &links, &paths);
            prop_assert!(bad.is_empty(), "{:?}", bad);
            if obs.len() == 1 || search.refine(&incumbent).unwrap() {
                prop_assert!((incumbent.log_score - optimum).abs() < TOL);
                return Ok(());
            }
        }
        prop_assert!(false, "search did not finish");
    }

    #[test]
    fn incumbents_never_increase((model, obs) in instance(4, 2..40), kind in 0usize..4, segments in 0usize..3) {
        let h = hierarchy_for(kind);
        let stack = build_abstract_models(&model, &h).unwrap();
        let presegments = if segments == 0 || segments + 1 >= obs.len() { 0 } else { segments + 1 };
        let options = TavOptions { presegments, ..TavOptions::default() };
        let (result, trace) = tav_decode_traced(&stack, &h, &obs, options).unwrap();
        for w in trace.incumbents.windows(2) {
            prop_assert!(w[1] <= w[0] + TOL);
        }
        let best = viterbi_decode(&model, &obs).unwrap();
        prop_assert!((result.log_likelihood - best.log_likelihood).abs() < TOL);
        prop_assert!((path_log_prob(&model, &obs, &result.path) - best.log_likelihood).abs() < TOL);
    }
}

fn fixture(len: usize) -> (LogModel, AbstractModelStack, AbstractionHierarchy, ObservationSequence) {
    let h = two_by_two();
    let model = HmmModel::new(
        vec![
            vec![0.7, 0.1, 0.1, 0.1],
            vec![0.2, 0.6, 0.1, 0.1],
            vec![0.1, 0.1, 0.6, 0.2],
            vec![0.1, 0.2, 0.1, 0.6],
        ],
        vec![vec![0.6, 0.4], vec![0.5, 0.5], vec![0.3, 0.7], vec![0.8, 0.2]],
        vec![0.25; 4],
    )
    .validate()
    .unwrap();
    let stack = build_abstract_models(&model, &h).unwrap();
    let obs = ObservationSequence::new((0..len).map(|t| t % 2).collect());
    (model, stack, h, obs)
}

fn find(links: &[AbstractLink], kind: LinkKind, level: usize, from: usize, t1: usize, to: usize, t2: usize) -> AbstractLink {
    *links
        .iter()
        .find(|l| l.kind == kind && l.level == level && l.from == from && l.to == to && l.t1 == t1 && l.t2 == t2)
        .expect("link exists")
}

fn count_kinds(links: &[AbstractLink], level: usize, t1: usize, t2: usize) -> [usize; 3] {
    let mut counts = [0; 3];
    for l in links.iter().filter(|l| l.level == level && l.t1 == t1 && l.t2 == t2) {
        counts[match l.kind {
            LinkKind::Direct => 0,
            LinkKind::Cross => 1,
            LinkKind::Reentry => 2,
        }] += 1;
    }
    counts
}

fn assert_partition(search: &TavSearch, h: &AbstractionHierarchy, len: usize) {
    let links = search.links();
    for x in all_sequences(4, len) {
        assert_eq!(chain_counts(&links, h, &x)[len - 1], 1, "path {x:?}");
    }
}

#[test]
fn spatial_refinement_of_a_direct_link_adds_every_sibling_link() {
    let (_, stack, h, obs) = fixture(5);
    let mut search = TavSearch::new(&stack, &h, &obs, TavOptions::default()).unwrap();
    assert_eq!(search.links().len(), 2 + 2 + 2);
    let top = find(&search.links(), LinkKind::Direct, 1, 0, 0, 0, 4);
    search.spatial_refine(&top).unwrap();
    let links = search.links();
    assert_eq!(count_kinds(&links, 0, 0, 4), [2, 2, 2]);
    assert_eq!(count_kinds(&links, 1, 0, 4), [1, 2, 2]);
    assert!(links.iter().filter(|l| l.level == 0).all(|l| l.scope == Some(Scope::State(0))));
    assert_partition(&search, &h, 5);
}

#[test]
fn spatial_refinement_of_a_single_step_gives_all_child_pairs() {
    let (_, stack, h, obs) = fixture(2);
    let mut search = TavSearch::new(&stack, &h, &obs, TavOptions::default()).unwrap();
    let cross = find(&search.links(), LinkKind::Cross, 1, 0, 0, 1, 1);
    search.spatial_refine(&cross).unwrap();
    let links = search.links();
    let children: Vec<&AbstractLink> = links.iter().filter(|l| l.level == 0).collect();
    assert_eq!(children.len(), 4);
    assert!(children.iter().all(|l| [0, 1].contains(&l.from) && [2, 3].contains(&l.to) && l.kind == LinkKind::Cross));
    assert_partition(&search, &h, 2);
    let concrete = find(&links, LinkKind::Cross, 0, 0, 0, 2, 1);
    assert!(matches!(search.spatial_refine(&concrete), Err(Error::Tav(TavError::AlreadyConcrete))));
}

#[test]
fn temporal_refinement_splits_the_whole_scope() {
    let (_, stack, h, obs) = fixture(5);
    let mut search = TavSearch::new(&stack, &h, &obs, TavOptions::default()).unwrap();
    let cross = find(&search.links(), LinkKind::Cross, 1, 0, 0, 1, 4);
    assert!(search.temporal_refine(&cross).unwrap());
    let links = search.links();
    assert_eq!(count_kinds(&links, 1, 0, 4), [0, 0, 0]);
    assert_eq!(count_kinds(&links, 1, 0, 2), [2, 2, 2]);
    assert_eq!(count_kinds(&links, 1, 2, 4), [2, 2, 2]);
    assert_eq!(search.used_times(), vec![0, 2, 4]);
    assert_partition(&search, &h, 5);
    let stale = find(&links, LinkKind::Reentry, 1, 0, 0, 0, 2);
    assert!(search.temporal_refine(&stale).unwrap());
    let links = search.links();
    assert_eq!(count_kinds(&links, 1, 0, 1), [2, 2, 0]);
    assert_eq!(count_kinds(&links, 1, 1, 2), [2, 2, 0]);
    assert_partition(&search, &h, 5);
}

#[test]
fn temporal_refinement_recurses_into_refined_children() {
    let (_, stack, h, obs) = fixture(5);
    let mut search = TavSearch::new(&stack, &h, &obs, TavOptions::default()).unwrap();
    let direct = find(&search.links(), LinkKind::Direct, 1, 0, 0, 0, 4);
    search.spatial_refine(&direct).unwrap();
    let cross = find(&search.links(), LinkKind::Cross, 1, 1, 0, 0, 4);
    assert!(search.temporal_refine(&cross).unwrap());
    let links = search.links();
    assert_eq!(count_kinds(&links, 0, 0, 4), [0, 0, 0]);
    assert_eq!(count_kinds(&links, 0, 0, 2), [2, 2, 2]);
    assert_eq!(count_kinds(&links, 0, 2, 4), [2, 2, 2]);
    assert_eq!(count_kinds(&links, 1, 0, 2), [1, 2, 2]);
    assert_partition(&search, &h, 5);
}

#[test]
fn temporal_refinement_rejects_single_steps() {
    let (_, stack, h, obs) = fixture(2);
    let mut search = TavSearch::new(&stack, &h, &obs, TavOptions::default()).unwrap();
    let cross = find(&search.links(), LinkKind::Cross, 1, 0, 0, 1, 1);
    assert!(matches!(
        search.temporal_refine(&cross),
        Err(Error::Tav(TavError::SpanTooShort { t1: 0, t2: 1 }))
    ));
}

#[test]
fn split_and_segment_points() {
    assert_eq!(split_point(1, 50), 26);
    assert_eq!(split_point(0, 4), 2);
    assert_eq!(presegment_times(101, 2).unwrap(), vec![0, 50, 100]);
    assert_eq!(presegment_times(101, 0).unwrap(), vec![0, 100]);
    assert!(matches!(presegment_times(101, 101), Err(TavError::BadSegmentCount { .. })));
    assert!(matches!(presegment_times(101, 1), Err(TavError::BadSegmentCount { .. })));
    let (model, stack, h, obs) = fixture(12);
    let options = TavOptions { presegments: 3, ..TavOptions::default() };
    let search = TavSearch::new(&stack, &h, &obs, options).unwrap();
    assert_eq!(search.used_times(), vec![0, 3, 7, 11]);
    let options = TavOptions { presegments: 12, ..TavOptions::default() };
    assert!(TavSearch::new(&stack, &h, &obs, options).is_err());
    let (result, _) = tav_decode_traced(&stack, &h, &obs, TavOptions { presegments: 3, ..TavOptions::default() }).unwrap();
    let best = viterbi_decode(&model, &obs).unwrap();
    assert!((result.log_likelihood - best.log_likelihood).abs() < TOL);
}
