//! Random sparse DAGs, linear-Gaussian parameterization and i.i.d. sampling.

use std::collections::HashMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::graph::{GraphError, MixedGraph};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{edges} edges requested but {vars} variables allow at most {max}")]
    TooManyEdges { edges: usize, vars: usize, max: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid range [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("model graph is not a DAG")]
    NotADag,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub vars: usize,
    pub edges: usize,
    pub samples: usize,
    /// Coefficient magnitudes are uniform on this range; signs are equiprobable.
    pub coef_range: (f64, f64),
    /// Error variances are uniform on this range.
    pub variance_range: (f64, f64),
    pub seed: u64,
}

impl SimConfig {
    /// `vars` variables, as many edges, 1000 samples.
    pub fn new(vars: usize, seed: u64) -> Self {
        Self {
            vars,
            edges: vars,
            samples: 1000,
            coef_range: (0.05, 1.5),
            variance_range: (1.0, 3.0),
            seed,
        }
    }

    pub fn max_edges(vars: usize) -> usize {
        vars * vars.saturating_sub(1) / 2
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let max = Self::max_edges(self.vars);
        if self.edges > max {
            return Err(SimError::TooManyEdges { edges: self.edges, vars: self.vars, max });
        }
        if self.samples < 2 {
            return Err(SimError::TooFewSamples(self.samples));
        }
        for (lo, hi) in [self.coef_range, self.variance_range] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(SimError::BadRange(lo, hi));
            }
        }
        if self.variance_range.0 <= 0.0 {
            return Err(SimError::BadRange(self.variance_range.0, self.variance_range.1));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

const GRAPH_STREAM: u64 = 0;
const PARAM_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

/// A DAG with a coefficient per edge and an error variance per node.
#[derive(Debug, Clone)]
pub struct SemModel {
    pub dag: MixedGraph,
    pub coefficients: HashMap<(usize, usize), f64>,
    pub error_variances: Vec<f64>,
}

impl SemModel {
    pub fn new(
        dag: MixedGraph,
        coefficients: HashMap<(usize, usize), f64>,
        error_variances: Vec<f64>,
    ) -> Result<Self, SimError> {
        if !dag.is_fully_directed() || dag.has_directed_cycle() {
            return Err(SimError::NotADag);
        }
        assert_eq!(error_variances.len(), dag.num_nodes());
        for e in dag.edges() {
            let (t, h) = e.directed().expect("fully directed");
            assert!(coefficients.contains_key(&(t, h)), "missing coefficient for edge");
        }
        Ok(Self { dag, coefficients, error_variances })
    }

    pub fn coefficient(&self, tail: usize, head: usize) -> f64 {
        self.coefficients.get(&(tail, head)).copied().unwrap_or(0.0)
    }
}

/// `k`-th pair `(i, j)`, `i < j`, in the order (0,1), (0,2), (1,2), (0,3), ...
fn pair_at(k: usize) -> (usize, usize) {
    let mut j = ((1.0 + (1.0 + 8.0 * k as f64).sqrt()) / 2.0) as usize;
    while j * (j - 1) / 2 > k {
        j -= 1;
    }
    while (j + 1) * j / 2 <= k {
        j += 1;
    }
    (k - j * (j - 1) / 2, j)
}

/// Nodes `X1..Xp` in list order with `edges` distinct forward pairs chosen
/// uniformly without replacement, each directed from earlier to later.
pub fn random_forward_dag(cfg: &SimConfig) -> Result<MixedGraph, SimError> {
    let max = SimConfig::max_edges(cfg.vars);
    if cfg.edges > max {
        return Err(SimError::TooManyEdges { edges: cfg.edges, vars: cfg.vars, max });
    }
    let mut rng = cfg.rng(GRAPH_STREAM);
    let mut picks = index::sample(&mut rng, max, cfg.edges).into_vec();
    picks.sort_unstable();
    let mut dag = MixedGraph::with_default_names(cfg.vars);
    for k in picks {
        let (i, j) = pair_at(k);
        dag.add_directed(i, j)?;
    }
    Ok(dag)
}

/// Draws a coefficient per edge (in edge order) and an error variance per
/// node.
pub fn parameterize(dag: &MixedGraph, cfg: &SimConfig) -> Result<SemModel, SimError> {
    cfg.validate()?;
    let mut rng = cfg.rng(PARAM_STREAM);
    let (clo, chi) = cfg.coef_range;
    let (vlo, vhi) = cfg.variance_range;
    let mut coefficients = HashMap::new();
    for e in dag.edges() {
        let (t, h) = e.directed().ok_or(SimError::NotADag)?;
        let magnitude = clo + (chi - clo) * rng.random::<f64>();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        coefficients.insert((t, h), sign * magnitude);
    }
    let error_variances = (0..dag.num_nodes())
        .map(|_| vlo + (vhi - vlo) * rng.random::<f64>())
        .collect();
    SemModel::new(dag.clone(), coefficients, error_variances)
}

/// `n` i.i.d. rows; each variable is the weighted sum of its parents plus
/// `N(0, error_variance)` noise, filled in topological order.
pub fn draw_samples(model: &SemModel, n: usize, seed: u64) -> Result<Dataset, SimError> {
    if n < 2 {
        return Err(SimError::TooFewSamples(n));
    }
    let order = model.dag.topological_order().ok_or(SimError::NotADag)?;
    let p = model.dag.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLE_STREAM);
    let mut columns = vec![vec![0.0; n]; p];
    let parent_lists: Vec<Vec<(usize, f64)>> = (0..p)
        .map(|v| model.dag.parents(v).iter().map(|&u| (u, model.coefficient(u, v))).collect())
        .collect();
    let sd: Vec<f64> = model.error_variances.iter().map(|v| v.sqrt()).collect();
    for t in 0..n {
        for &v in &order {
            let noise: f64 = rng.sample(StandardNormal);
            let mut value = sd[v] * noise;
            for &(u, a) in &parent_lists[v] {
                value += a * columns[u][t];
            }
            columns[v][t] = value;
        }
    }
    Ok(Dataset::from_columns(model.dag.names().to_vec(), columns)?)
}

/// Graph, parameters and data, all determined by `cfg.seed`.
pub fn simulate(cfg: &SimConfig) -> Result<(SemModel, Dataset), SimError> {
    cfg.validate()?;
    let dag = random_forward_dag(cfg)?;
    let model = parameterize(&dag, cfg)?;
    let data = draw_samples(&model, cfg.samples, cfg.seed)?;
    Ok((model, data))
}
