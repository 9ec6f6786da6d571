//! End-to-end behavior of the search on small simulated models.

mod common;

use std::collections::BTreeSet;

use common::sem;
use fgs::search::{Operation, Phase};
use fgs::simulate::draw_samples;
use fgs::{fgs, simulate, CovarianceSource, Fgs, MixedGraph, ScoreConfig, SearchConfig, SimConfig};

fn config(c: f64) -> SearchConfig {
    SearchConfig { score: ScoreConfig { penalty_discount: c }, ..SearchConfig::default() }
}

fn pattern_text(g: &MixedGraph) -> String {
    g.to_string()
}

#[test]
fn independent_pair_gives_empty_graph() {
    let mut empty = 0;
    for seed in 0..100 {
        let data = draw_samples(&sem(2, &[]), 1000, seed).unwrap();
        let g = fgs(&CovarianceSource::new(&data), &config(2.0)).unwrap();
        if g.num_edges() == 0 {
            empty += 1;
        }
    }
    assert!(empty >= 95, "{empty}");
}

#[test]
fn single_edge_is_undirected() {
    let data = draw_samples(&sem(2, &[(0, 1, 1.0)]), 1000, 1).unwrap();
    let g = fgs(&CovarianceSource::new(&data), &config(2.0)).unwrap();
    assert_eq!(pattern_text(&g), "X1 --- X2\n");
}

#[test]
fn collider_is_oriented() {
    let data = draw_samples(&sem(3, &[(0, 1, 1.0), (2, 1, 1.0)]), 1000, 2).unwrap();
    let g = fgs(&CovarianceSource::new(&data), &config(2.0)).unwrap();
    assert_eq!(pattern_text(&g), "X1 --> X2\nX3 --> X2\n");
}

#[test]
fn chain_stays_undirected() {
    let data = draw_samples(&sem(3, &[(0, 1, 1.0), (1, 2, 1.0)]), 1000, 3).unwrap();
    let g = fgs(&CovarianceSource::new(&data), &config(2.0)).unwrap();
    assert_eq!(pattern_text(&g), "X1 --- X2\nX2 --- X3\n");
}

#[test]
fn effect_pairs_are_rare_for_independent_data() {
    let p = 30;
    let mut total = 0;
    for seed in 0..20 {
        let data = draw_samples(&sem(p, &[]), 1000, seed).unwrap();
        let src = CovarianceSource::new(&data);
        let mut search = Fgs::new(&src, config(4.0)).unwrap();
        search.step().unwrap();
        total += search.effect_edges().unwrap().num_pairs();
    }
    let pairs = 20 * p * (p - 1) / 2;
    assert!(total * 100 <= pairs, "{total} of {pairs}");
}

#[test]
fn first_insert_is_the_best_initial_arrow() {
    let mut cfg = SimConfig::new(25, 9);
    cfg.edges = 30;
    let (_, data) = simulate(&cfg).unwrap();
    let src = CovarianceSource::new(&data);
    let b = fgs::GaussianBic::new(&src, ScoreConfig::default()).unwrap();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for y in 0..25 {
        for x in 0..y {
            let d = b.score_diff(x, y, &[]).unwrap();
            if d > best.0 {
                best = (d, x, y);
            }
        }
    }
    let mut search = Fgs::new(&src, config(2.0)).unwrap();
    match search.step().unwrap() {
        Some(Operation::Insert { x, y, bump, .. }) => {
            let pair: BTreeSet<usize> = [x, y].into();
            assert_eq!(pair, [best.1, best.2].into());
            assert_eq!(bump, best.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn first_rescoring_touches_only_the_new_edge() {
    let mut cfg = SimConfig::new(5, 14);
    cfg.edges = 4;
    let (_, data) = simulate(&cfg).unwrap();
    let src = CovarianceSource::new(&data);
    let mut search =
        Fgs::new(&src, SearchConfig { effect_edge_pruning: false, ..config(2.0) }).unwrap();
    search.step().unwrap();
    assert_eq!(search.stats().inserts, 1);
    assert!(search.stats().forward_pair_evaluations <= 4 * (5 - 2));
}

#[test]
fn queue_holds_only_positive_distinct_arrows() {
    let mut cfg = SimConfig::new(20, 3);
    cfg.edges = 25;
    let (_, data) = simulate(&cfg).unwrap();
    let src = CovarianceSource::new(&data);
    let mut search = Fgs::new(&src, config(2.0)).unwrap();
    while search.step().unwrap().is_some() {
        let arrows: Vec<_> = search.queue().iter().collect();
        assert!(arrows.iter().all(|a| a.bump > 0.0));
        assert!(arrows.windows(2).all(|w| w[0] != w[1] && w[0].cmp(w[1]).is_lt()));
    }
    assert_eq!(search.phase(), Phase::Done);
}

#[test]
fn thread_count_does_not_change_the_result() {
    for seed in 0..5 {
        let mut cfg = SimConfig::new(60, seed);
        cfg.edges = 70;
        let (_, data) = simulate(&cfg).unwrap();
        let src = CovarianceSource::new(&data);
        let one = fgs(&src, &SearchConfig { threads: 1, ..config(2.0) }).unwrap();
        let four = fgs(&src, &SearchConfig { threads: 4, ..config(2.0) }).unwrap();
        assert_eq!(pattern_text(&one), pattern_text(&four));
    }
}

#[test]
fn pruning_off_terminates_and_is_a_pattern() {
    let mut cfg = SimConfig::new(30, 4);
    cfg.edges = 40;
    let (_, data) = simulate(&cfg).unwrap();
    let src = CovarianceSource::new(&data);
    let g = fgs(&src, &SearchConfig { effect_edge_pruning: false, ..config(2.0) }).unwrap();
    assert_eq!(g.revert_to_cpdag_global().unwrap(), g);
}

#[test]
fn subset_cap_still_terminates() {
    let mut cfg = SimConfig::new(30, 5);
    cfg.edges = 60;
    let (_, data) = simulate(&cfg).unwrap();
    let src = CovarianceSource::new(&data);
    let g = fgs(&src, &SearchConfig { max_subset_size: Some(1), ..config(2.0) }).unwrap();
    assert!(!g.has_directed_cycle());
}

#[test]
fn rejects_zero_threads_and_single_variable() {
    let data = draw_samples(&sem(2, &[]), 10, 0).unwrap();
    let src = CovarianceSource::new(&data);
    assert!(Fgs::new(&src, SearchConfig { threads: 0, ..config(2.0) }).is_err());
    let one = draw_samples(&sem(1, &[]), 10, 0).unwrap();
    assert!(Fgs::new(&CovarianceSource::new(&one), config(2.0)).is_err());
}
