//! Adjacency and arrow precision/recall of an estimated pattern against the
//! true pattern.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::graph::MixedGraph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("graphs have different node sets")]
    NodeMismatch,
}

/// A ratio that falls back to 1.0 when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    /// Set when the denominator was zero and `value` is the 1.0 fallback.
    pub empty: bool,
}

impl Rate {
    pub fn new(tp: usize, other: usize) -> Self {
        let denom = tp + other;
        if denom == 0 {
            Self { value: 1.0, empty: true }
        } else {
            Self { value: tp as f64 / denom as f64, empty: false }
        }
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonStats {
    pub adj_tp: usize,
    pub adj_fp: usize,
    pub adj_fn: usize,
    pub arrow_tp: usize,
    pub arrow_fp: usize,
    pub arrow_fn: usize,
    pub adj_precision: Rate,
    pub adj_recall: Rate,
    pub arrow_precision: Rate,
    pub arrow_recall: Rate,
}

impl ComparisonStats {
    pub fn is_exact(&self) -> bool {
        self.adj_fp == 0 && self.adj_fn == 0 && self.arrow_fp == 0 && self.arrow_fn == 0
    }
}

/// Compares graphs matched by node name. An arrow counts only with its
/// direction: `X --> Y` against a true `X <-- Y` is one false positive and
/// one false negative.
pub fn compare_patterns(estimated: &MixedGraph, truth: &MixedGraph) -> Result<ComparisonStats, MetricsError> {
    let names_est: BTreeSet<&String> = estimated.names().iter().collect();
    let names_true: BTreeSet<&String> = truth.names().iter().collect();
    if names_est != names_true || estimated.num_nodes() != truth.num_nodes() {
        return Err(MetricsError::NodeMismatch);
    }
    let adjacencies = |g: &MixedGraph| -> BTreeSet<(String, String)> {
        g.edges()
            .into_iter()
            .map(|e| {
                let (a, b) = (g.name(e.a).to_string(), g.name(e.b).to_string());
                if a < b { (a, b) } else { (b, a) }
            })
            .collect()
    };
    let arrows = |g: &MixedGraph| -> BTreeSet<(String, String)> {
        g.edges()
            .into_iter()
            .filter_map(|e| e.directed())
            .map(|(t, h)| (g.name(t).to_string(), g.name(h).to_string()))
            .collect()
    };

    let (adj_e, adj_t) = (adjacencies(estimated), adjacencies(truth));
    let (arr_e, arr_t) = (arrows(estimated), arrows(truth));
    let adj_tp = adj_e.intersection(&adj_t).count();
    let adj_fp = adj_e.len() - adj_tp;
    let adj_fn = adj_t.len() - adj_tp;
    let arrow_tp = arr_e.intersection(&arr_t).count();
    let arrow_fp = arr_e.len() - arrow_tp;
    let arrow_fn = arr_t.len() - arrow_tp;
    Ok(ComparisonStats {
        adj_tp,
        adj_fp,
        adj_fn,
        arrow_tp,
        arrow_fp,
        arrow_fn,
        adj_precision: Rate::new(adj_tp, adj_fp),
        adj_recall: Rate::new(adj_tp, adj_fn),
        arrow_precision: Rate::new(arrow_tp, arrow_fp),
        arrow_recall: Rate::new(arrow_tp, arrow_fn),
    })
}

pub const ROW_HEADER: [&str; 4] = ["adj_prec", "adj_rec", "arrow_prec", "arrow_rec"];

/// `adj_prec, adj_rec, arrow_prec, arrow_rec` as percentages, one decimal,
/// tab separated.
pub fn format_percentages(values: [f64; 4]) -> String {
    values.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join("\t")
}

/// One table row: variable count, time column, then the four percentages.
pub fn format_row(vars: usize, time: &str, stats: &ComparisonStats) -> String {
    let pct = [
        stats.adj_precision.percent(),
        stats.adj_recall.percent(),
        stats.arrow_precision.percent(),
        stats.arrow_recall.percent(),
    ];
    format!("{vars}\t{time}\t{}", format_percentages(pct))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(edges: &str) -> MixedGraph {
        let mut g = MixedGraph::new(["X", "Y", "Z", "W"]).unwrap();
        g.read_edges(edges).unwrap();
        g
    }

    #[test]
    fn identical_graphs_are_perfect() {
        let a = g("X --> Y\nZ --> Y\nZ --- W\n");
        let s = compare_patterns(&a, &a).unwrap();
        assert!(s.is_exact());
        for r in [s.adj_precision, s.adj_recall, s.arrow_precision, s.arrow_recall] {
            assert_eq!(r.value, 1.0);
            assert!(!r.empty);
        }
    }

    #[test]
    fn directed_estimate_against_undirected_truth() {
        let s = compare_patterns(&g("X --> Y\n"), &g("X --- Y\n")).unwrap();
        assert_eq!((s.adj_tp, s.adj_fp, s.adj_fn), (1, 0, 0));
        assert_eq!((s.arrow_tp, s.arrow_fp, s.arrow_fn), (0, 1, 0));
        assert!(s.arrow_recall.empty);
        assert_eq!(s.arrow_recall.value, 1.0);
    }

    #[test]
    fn reversed_arrow_is_one_fp_and_one_fn() {
        let s = compare_patterns(&g("Y --> X\n"), &g("X --> Y\n")).unwrap();
        assert_eq!((s.arrow_tp, s.arrow_fp, s.arrow_fn), (0, 1, 1));
        assert_eq!(s.adj_tp, 1);
    }

    #[test]
    fn ninety_percent() {
        let r = Rate::new(9, 1);
        assert!((r.value - 0.9).abs() < 1e-15);
    }

    #[test]
    fn node_mismatch() {
        let a = MixedGraph::new(["X", "Y"]).unwrap();
        let b = MixedGraph::new(["X", "Z"]).unwrap();
        assert_eq!(compare_patterns(&a, &b).unwrap_err(), MetricsError::NodeMismatch);
    }

    #[test]
    fn row_formatting() {
        let a = g("X --> Y\n");
        let s = compare_patterns(&a, &a).unwrap();
        assert_eq!(format_row(4, "12", &s), "4\t12\t100.0\t100.0\t100.0\t100.0");
    }
}
