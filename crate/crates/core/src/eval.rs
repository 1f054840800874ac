//! Scoring partitions and running seeded experiment grids.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::constraints::{materialize, sample_constraints, BetaPolicy, ConstraintList, ConstraintMatrix, SamplingStrategy};
use crate::error::{Error, Result};
use crate::graph::{build_laplacian, rbf_affinity, AffinityGraph, PointCloud, Sigma};
use crate::linalg::SymMatrix;
use crate::solver::{csp_k_way, csp_two_way, unconstrained_ncut, KWayMode, Partition};

/// Hubert–Arabie adjusted Rand index.
///
/// When both partitions are trivial in the same way (one cluster each, or
/// all singletons each) the index is undefined; identical partitions then
/// score 1 and anything else 0.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "label vectors differ in length: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 labels".into()));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *table.entry((p, t)).or_default() += 1;
        *rows.entry(p).or_default() += 1;
        *cols.entry(t).or_default() += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(pred.len() as u64);
    let expected = a * b / total;
    let max = 0.5 * (a + b);
    if max == expected {
        let same = table.len() == rows.len() && table.len() == cols.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Fraction of nonzero constraints the labels honor: positive weights
/// satisfied by a shared label, negative weights by different labels.
pub fn satisfaction_ratio(labels: &[usize], list: &ConstraintList) -> Result<f64> {
    if labels.len() != list.n() {
        return Err(Error::InvalidInput(format!(
            "{} labels for constraints over {} nodes",
            labels.len(),
            list.n()
        )));
    }
    let mut total = 0usize;
    let mut satisfied = 0usize;
    for &(i, j, w) in list.triples() {
        if w == 0.0 {
            continue;
        }
        total += 1;
        if (w > 0.0) == (labels[i] == labels[j]) {
            satisfied += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidInput("constraint list has no nonzero pairs".into()));
    }
    Ok(satisfied as f64 / total as f64)
}

/// Spectral learning: must-links become affinity 1, cannot-links affinity 0,
/// then plain normalized cut.
pub fn spectral_learning_baseline(graph: &AffinityGraph, list: &ConstraintList, k: usize) -> Result<Partition> {
    if list.n() != graph.n() {
        return Err(Error::InvalidInput("constraint list and graph differ in size".into()));
    }
    let mut a = graph.affinity().as_matrix().clone();
    for &(i, j, w) in list.triples() {
        let v = if w > 0.0 {
            1.0
        } else if w < 0.0 {
            0.0
        } else {
            continue;
        };
        a[(i, j)] = v;
        a[(j, i)] = v;
    }
    let modified = build_laplacian(SymMatrix::new(a)?)?;
    unconstrained_ncut(&modified, k)
}

/// Scores for one partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ari: Option<f64>,
    pub satisfied_ratio: Option<f64>,
    pub cost: f64,
    pub purity: f64,
    pub beta: Option<f64>,
    pub n_constraints: usize,
}

impl MetricsReport {
    pub fn of(partition: &Partition, list: Option<&ConstraintList>, truth: Option<&[usize]>) -> Result<Self> {
        let cut = partition
            .cuts
            .first()
            .ok_or_else(|| Error::InvalidInput("partition carries no cut".into()))?;
        let satisfied_ratio = match list {
            Some(l) if l.triples().iter().any(|t| t.2 != 0.0) => Some(satisfaction_ratio(&partition.labels, l)?),
            _ => None,
        };
        Ok(Self {
            ari: truth.map(|t| ari(&partition.labels, t)).transpose()?,
            satisfied_ratio,
            cost: cut.cost,
            purity: cut.purity,
            beta: partition.beta,
            n_constraints: list.map_or(0, |l| l.triples().iter().filter(|t| t.2 != 0.0).count()),
        })
    }
}

/// Summary of one grid value over its trials. Failed trials are excluded
/// from `mean`, `min` and `max`, which are NaN when every trial failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub trials: usize,
    pub failures: usize,
}

impl SweepPoint {
    pub fn from_outcomes(x: f64, outcomes: &[Option<f64>]) -> Self {
        let ok: Vec<f64> = outcomes.iter().flatten().copied().collect();
        let (mean, min, max) = if ok.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                ok.iter().sum::<f64>() / ok.len() as f64,
                ok.iter().copied().fold(f64::INFINITY, f64::min),
                ok.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        Self {
            x,
            mean,
            min,
            max,
            trials: outcomes.len(),
            failures: outcomes.len() - ok.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// `seeds[g][t]` is the seed of trial `t` at grid index `g`.
    pub seeds: Vec<Vec<u64>>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,mean,min,max,failures\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{},{}\n", p.x, p.mean, p.min, p.max, p.failures));
        }
        out
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one `(grid value, trial)` cell; independent of grid order.
pub fn cell_seed(seed: u64, x: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ x) ^ trial)
}

/// Runs `f` over `cells` on `jobs` threads and returns results in cell order.
fn run_cells<T, R, F>(cells: &[T], jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs <= 1 {
        return Ok(cells.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(f).collect()))
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub sigma: Sigma,
    pub counts: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub policy: BetaPolicy,
    pub strategy: SamplingStrategy,
    pub jobs: usize,
}

/// Mean ARI of constrained 2-way cuts against ground truth per constraint count.
///
/// `m = 0` scores the unconstrained cut. Solver errors count as failed trials.
pub fn convergence_experiment(points: &PointCloud, config: &ConvergenceConfig) -> Result<SweepResult> {
    let truth = points
        .labels()
        .ok_or_else(|| Error::InvalidInput("convergence needs ground-truth labels".into()))?;
    if config.counts.is_empty() || config.trials == 0 {
        return Err(Error::InvalidInput("need a non-empty grid and at least one trial".into()));
    }
    let graph = rbf_affinity(points, config.sigma)?;
    graph.spectrum()?;
    let baseline = unconstrained_ncut(&graph, 2)?;
    let baseline_ari = ari(&baseline.labels, truth)?;
    let seeds: Vec<Vec<u64>> = config
        .counts
        .iter()
        .map(|&m| (0..config.trials).map(|t| cell_seed(config.seed, m as u64, t as u64)).collect())
        .collect();
    let cells: Vec<(usize, u64)> = config
        .counts
        .iter()
        .zip(&seeds)
        .flat_map(|(&m, s)| s.iter().map(move |&seed| (m, seed)))
        .collect();
    let outcomes = run_cells(&cells, config.jobs, |&(m, seed)| {
        if m == 0 {
            return Some(baseline_ari);
        }
        let trial = || -> Result<f64> {
            let list = sample_constraints(truth, Some(&baseline.labels), m, seed, config.strategy)?;
            let cm = materialize(&list, &graph)?;
            ari(&csp_two_way(&graph, &cm, config.policy)?.labels, truth)
        };
        trial().ok()
    })?;
    let points = config
        .counts
        .iter()
        .zip(outcomes.chunks(config.trials))
        .map(|(&m, chunk)| SweepPoint::from_outcomes(m as f64, chunk))
        .collect();
    Ok(SweepResult { points, seeds })
}

/// One β value of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSweepRow {
    pub t: f64,
    pub beta: Option<f64>,
    pub cost: Option<f64>,
    pub purity: Option<f64>,
    pub satisfied_ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    Cost,
    Purity,
    Satisfied,
}

impl std::str::FromStr for SweepMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cost" => Ok(SweepMetric::Cost),
            "purity" => Ok(SweepMetric::Purity),
            "satisfied" => Ok(SweepMetric::Satisfied),
            _ => Err(format!("unknown metric `{s}` (expected cost, purity or satisfied)")),
        }
    }
}

/// Solves once per `t` with β at fraction `t` of its admissible range.
/// `k > 2` uses the embedding K-way mode.
pub fn beta_sweep(
    graph: &AffinityGraph,
    cm: &ConstraintMatrix,
    t_grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<Vec<BetaSweepRow>> {
    if t_grid.is_empty() {
        return Err(Error::InvalidInput("beta sweep grid is empty".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidInput(format!("grid value {t} is outside (0, 1)")));
    }
    let list = cm.to_list();
    let has_pairs = !list.is_empty();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let policy = BetaPolicy::Fraction(t);
            let solved = if k == 2 {
                csp_two_way(graph, cm, policy)
            } else {
                csp_k_way(graph, cm, policy, k, KWayMode::Embed, seed)
            };
            match solved {
                Ok(p) => BetaSweepRow {
                    t,
                    beta: p.beta,
                    cost: Some(p.cuts[0].cost),
                    purity: Some(p.cuts[0].purity),
                    satisfied_ratio: if has_pairs { satisfaction_ratio(&p.labels, &list).ok() } else { None },
                    error: None,
                },
                Err(e) => BetaSweepRow {
                    t,
                    beta: None,
                    cost: None,
                    purity: None,
                    satisfied_ratio: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Single-trial sweep rows as a [`SweepResult`] over `t`.
pub fn beta_sweep_result(rows: &[BetaSweepRow], metric: SweepMetric) -> SweepResult {
    let points = rows
        .iter()
        .map(|r| {
            let value = match metric {
                SweepMetric::Cost => r.cost,
                SweepMetric::Purity => r.purity,
                SweepMetric::Satisfied => r.satisfied_ratio,
            };
            SweepPoint::from_outcomes(r.t, &[value])
        })
        .collect();
    SweepResult {
        points,
        seeds: vec![Vec::new(); rows.len()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    /// Rand-index terms by direct enumeration of all unordered pairs.
    fn ari_by_pairs(p: &[usize], t: &[usize]) -> f64 {
        let n = p.len();
        let (mut both, mut in_p, mut in_t, mut total) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let sp = p[i] == p[j];
                let st = t[i] == t[j];
                total += 1.0;
                if sp {
                    in_p += 1.0;
                }
                if st {
                    in_t += 1.0;
                }
                if sp && st {
                    both += 1.0;
                }
            }
        }
        let expected = in_p * in_t / total;
        (both - expected) / (0.5 * (in_p + in_t) - expected)
    }

    #[test]
    fn ari_basic_cases() {
        assert_eq!(ari(&[0, 0, 1, 1], &[5, 5, 3, 3]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(ari(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert!(ari(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn ari_matches_pair_count() {
        let pred = [0, 0, 1, 1, 2, 2];
        let truth = [0, 0, 1, 2, 2, 2];
        // both = 2, in_p = 3, in_t = 4, total = 15: (2 − 0.8)/(3.5 − 0.8).
        let expected = (2.0 - 0.8) / (3.5 - 0.8);
        assert!((ari(&pred, &truth).unwrap() - expected).abs() < 1e-15);
        assert!((ari_by_pairs(&pred, &truth) - expected).abs() < 1e-15);
    }

    #[test]
    fn satisfaction_cases() {
        let ml = ConstraintList::from_triples(4, [(0, 1, 1.0), (1, 2, 0.3)]).unwrap();
        assert_eq!(satisfaction_ratio(&[0, 0, 0, 1], &ml).unwrap(), 1.0);
        let cl = ConstraintList::from_triples(4, [(0, 1, -1.0)]).unwrap();
        assert_eq!(satisfaction_ratio(&[0, 0, 0, 1], &cl).unwrap(), 0.0);
        assert!(satisfaction_ratio(&[0, 0, 0, 1], &ConstraintList::new(4)).is_err());
    }

    #[test]
    fn toy_q_list_fully_satisfied() {
        let g = fixtures::toy_graph();
        let list = fixtures::toy_constraints(&g).to_list();
        assert_eq!(list.len(), 15);
        assert_eq!(satisfaction_ratio(&fixtures::TOY_COLORS, &list).unwrap(), 1.0);
    }

    #[test]
    fn sl_with_empty_list_is_ncut() {
        let g = fixtures::toy_graph();
        let sl = spectral_learning_baseline(&g, &ConstraintList::new(6), 2).unwrap();
        assert_eq!(sl.labels, unconstrained_ncut(&g, 2).unwrap().labels);
    }

    #[test]
    fn sl_cutting_bridge_disconnects() {
        let g = fixtures::toy_graph();
        let list = ConstraintList::from_triples(6, [(2, 3, -1.0)]).unwrap();
        assert!(matches!(
            spectral_learning_baseline(&g, &list, 2),
            Err(Error::DisconnectedGraph { .. })
        ));
    }

    #[test]
    fn sl_with_within_class_must_links_recovers_truth() {
        let truth = [0, 1, 0, 1, 0, 1];
        let g = build_laplacian(SymMatrix::from_fn(6, |i, j| if i == j { 0.0 } else { 0.1 }).unwrap()).unwrap();
        let mut list = ConstraintList::new(6);
        for i in 0..6 {
            for j in (i + 1)..6 {
                if truth[i] == truth[j] {
                    list.push(i, j, 1.0).unwrap();
                }
            }
        }
        let sl = spectral_learning_baseline(&g, &list, 2).unwrap();
        assert_eq!(ari(&sl.labels, &truth).unwrap(), 1.0);
    }

    #[test]
    fn cell_seeds_ignore_grid_order() {
        assert_eq!(cell_seed(7, 50, 3), cell_seed(7, 50, 3));
        assert_ne!(cell_seed(7, 50, 3), cell_seed(7, 3, 50));
    }

    #[test]
    fn toy_beta_sweep_purity_grows() {
        let g = fixtures::toy_graph();
        let cm = fixtures::toy_constraints(&g);
        // Bound is 8/3·vol and λmin is 0, so β = vol and 2·vol sit at t = 3/8 and 3/4.
        let rows = beta_sweep(&g, &cm, &[0.375, 0.75], 2, 0).unwrap();
        assert!((rows[0].beta.unwrap() - g.vol()).abs() < 1e-9);
        assert!((rows[1].beta.unwrap() - 2.0 * g.vol()).abs() < 1e-9);
        assert!(rows[1].purity.unwrap() >= rows[0].purity.unwrap());
        assert_eq!(beta_sweep(&g, &cm, &[0.5], 2, 0).unwrap().len(), 1);
        assert!(beta_sweep(&g, &cm, &[], 2, 0).is_err());
    }

    #[test]
    fn sweep_csv_header() {
        let r = SweepResult {
            points: vec![SweepPoint::from_outcomes(10.0, &[Some(0.5), None, Some(1.0)])],
            seeds: vec![vec![1, 2, 3]],
        };
        assert_eq!(r.to_csv(), "x,mean,min,max,failures\n10,0.75,0.5,1,1\n");
    }
}
