//! Predictor-guided multi-objective search.
//!
//! Objectives are (accuracy ↑, cycles ↓). The outer loop runs `K`
//! iterations: the first true-evaluates `N` random genomes; every later
//! one trains ridge surrogates on all true evaluations so far, screens `M`
//! unique genomes with NSGA-II on predicted objectives, and true-evaluates
//! the top `N`. The final front only ever contains true evaluations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accuracy::{proxy_from_params, ProxyParams};
use crate::cim::simulate;
use crate::dataflow::DataflowCompiler;
use crate::encoding::{Codec, CodecError, Genome, Scope, DEFAULT_MUTATION_RATE};
use crate::predict::{kendall_tau, mape, Model, ModelKind, PredictError, TargetTransform};
use crate::rng;
use crate::workload::{count_params, WorkloadError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SearchMode {
    #[serde(rename = "elastic-arch-static-config", alias = "ELASTIC_ARCH_STATIC_CFG")]
    ElasticArchStaticCfg,
    #[serde(rename = "static-arch-elastic-config", alias = "STATIC_ARCH_ELASTIC_CFG")]
    StaticArchElasticCfg,
    #[serde(rename = "elastic-arch-elastic-config", alias = "ELASTIC_ARCH_ELASTIC_CFG")]
    ElasticArchElasticCfg,
}

impl SearchMode {
    pub const ALL: [SearchMode; 3] = [
        SearchMode::ElasticArchStaticCfg,
        SearchMode::StaticArchElasticCfg,
        SearchMode::ElasticArchElasticCfg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SearchMode::ElasticArchStaticCfg => "elastic-arch-static-config",
            SearchMode::StaticArchElasticCfg => "static-arch-elastic-config",
            SearchMode::ElasticArchElasticCfg => "elastic-arch-elastic-config",
        }
    }

    pub fn parse(s: &str) -> Option<SearchMode> {
        let norm: String = s
            .chars()
            .map(|c| if c == '_' { '-' } else { c.to_ascii_lowercase() })
            .collect();
        match norm.as_str() {
            "elastic-arch-static-config" | "elastic-arch-static-cfg" => {
                Some(SearchMode::ElasticArchStaticCfg)
            }
            "static-arch-elastic-config" | "static-arch-elastic-cfg" => {
                Some(SearchMode::StaticArchElasticCfg)
            }
            "elastic-arch-elastic-config" | "elastic-arch-elastic-cfg" => {
                Some(SearchMode::ElasticArchElasticCfg)
            }
            _ => None,
        }
    }

    pub fn scope(self) -> Scope {
        match self {
            SearchMode::ElasticArchStaticCfg => Scope {
                arch: true,
                hardware: false,
            },
            SearchMode::StaticArchElasticCfg => Scope {
                arch: false,
                hardware: true,
            },
            SearchMode::ElasticArchElasticCfg => Scope::JOINT,
        }
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which sides are elastic, plus the NSGA-II knobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSetting {
    pub mode: SearchMode,
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_mutation")]
    pub mutation_rate: f64,
    #[serde(default = "default_crossover")]
    pub crossover_rate: f64,
}

fn default_population() -> usize {
    100
}

fn default_mutation() -> f64 {
    DEFAULT_MUTATION_RATE
}

fn default_crossover() -> f64 {
    0.9
}

impl SearchSetting {
    pub fn new(mode: SearchMode) -> Self {
        SearchSetting {
            mode,
            population: default_population(),
            mutation_rate: default_mutation(),
            crossover_rate: default_crossover(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub accuracy: f64,
    pub cycles: f64,
}

impl Objectives {
    pub fn new(accuracy: f64, cycles: f64) -> Self {
        Objectives { accuracy, cycles }
    }

    /// At least as accurate and as fast, and strictly better in one.
    pub fn dominates(&self, o: &Objectives) -> bool {
        self.accuracy >= o.accuracy
            && self.cycles <= o.cycles
            && (self.accuracy > o.accuracy || self.cycles < o.cycles)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Provenance {
    Predicted,
    True,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub genome: Genome,
    pub accuracy: f64,
    pub cycles: f64,
    pub provenance: Provenance,
}

impl ParetoPoint {
    pub fn objectives(&self) -> Objectives {
        Objectives::new(self.accuracy, self.cycles)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("invalid search parameters: {0}")]
    Params(&'static str),
    #[error("every front point is below the baseline accuracy {0}")]
    BelowBaseline(f64),
    #[error("empty front")]
    EmptyFront,
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

/// Fast non-dominated sort. Returns fronts of indices, best first, each in
/// ascending index order.
pub fn non_dominated_sort(points: &[Objectives]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by = alloc::vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if points[i].dominates(&points[j]) {
                dominates[i].push(j);
                dominated_by[j] += 1;
            } else if points[j].dominates(&points[i]) {
                dominates[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// NSGA-II crowding distance of each point of one front. Boundary points
/// get infinity; an objective with zero range contributes nothing.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    let mut d = alloc::vec![0.0; n];
    if n <= 2 {
        return alloc::vec![f64::INFINITY; n];
    }
    let keys: [fn(&Objectives) -> f64; 2] = [|o| o.accuracy, |o| o.cycles];
    for key in keys {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| key(&front[a]).total_cmp(&key(&front[b])).then(a.cmp(&b)));
        let lo = key(&front[order[0]]);
        let hi = key(&front[order[n - 1]]);
        d[order[0]] = f64::INFINITY;
        d[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if !(range > 0.0) {
            continue;
        }
        for w in 1..n - 1 {
            let gap = key(&front[order[w + 1]]) - key(&front[order[w - 1]]);
            d[order[w]] += gap / range;
        }
    }
    d
}

/// Rank and crowding distance of every point.
pub fn rank_and_crowding(points: &[Objectives]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = alloc::vec![0; points.len()];
    let mut crowd = alloc::vec![0.0; points.len()];
    for (r, front) in non_dominated_sort(points).iter().enumerate() {
        let objs: Vec<Objectives> = front.iter().map(|&i| points[i]).collect();
        for (&i, c) in front.iter().zip(crowding_distance(&objs)) {
            rank[i] = r;
            crowd[i] = c;
        }
    }
    (rank, crowd)
}

/// Indices of `pool` ordered by (rank ↑, crowding ↓, genome ↑).
fn ranked_order(genomes: &[&Genome], objs: &[Objectives]) -> Vec<usize> {
    let (rank, crowd) = rank_and_crowding(objs);
    let mut idx: Vec<usize> = (0..objs.len()).collect();
    idx.sort_by(|&a, &b| {
        rank[a]
            .cmp(&rank[b])
            .then_with(|| crowd[b].total_cmp(&crowd[a]))
            .then_with(|| genomes[a].cmp(genomes[b]))
    });
    idx
}

/// The `n` best members of `pool` by (rank, crowding, genome).
pub fn select_top_n(pool: &[(Genome, Objectives)], n: usize) -> Vec<usize> {
    let genomes: Vec<&Genome> = pool.iter().map(|p| &p.0).collect();
    let objs: Vec<Objectives> = pool.iter().map(|p| p.1).collect();
    let mut order = ranked_order(&genomes, &objs);
    order.truncate(n);
    order
}

/// First front, sorted by cycles ascending (ties: accuracy descending,
/// then genome).
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    if points.is_empty() {
        return Vec::new();
    }
    let objs: Vec<Objectives> = points.iter().map(ParetoPoint::objectives).collect();
    let mut front: Vec<ParetoPoint> = non_dominated_sort(&objs)[0]
        .iter()
        .map(|&i| points[i].clone())
        .collect();
    front.sort_by(|a, b| {
        a.cycles
            .total_cmp(&b.cycles)
            .then_with(|| b.accuracy.total_cmp(&a.accuracy))
            .then_with(|| a.genome.cmp(&b.genome))
    });
    front
}

/// `baseline.cycles` over the front's cycles at the baseline accuracy.
///
/// The front is read as a piecewise-linear curve from cycles to accuracy.
/// The first front point (by cycles) that reaches the baseline accuracy
/// fixes the segment: when a cheaper, less accurate front point precedes
/// it, cycles are interpolated linearly between the two; otherwise that
/// point's cycles are used.
pub fn cycle_reduction_at_iso_accuracy(
    front: &[Objectives],
    baseline: Objectives,
) -> Result<f64, SearchError> {
    if front.is_empty() {
        return Err(SearchError::EmptyFront);
    }
    let mut pts: Vec<Objectives> = non_dominated_sort(front)[0].iter().map(|&i| front[i]).collect();
    pts.sort_by(|a, b| {
        a.cycles
            .total_cmp(&b.cycles)
            .then(b.accuracy.total_cmp(&a.accuracy))
    });
    let Some(k) = pts.iter().position(|p| p.accuracy >= baseline.accuracy) else {
        return Err(SearchError::BelowBaseline(baseline.accuracy));
    };
    let hit = pts[k];
    let cycles = if k > 0 && pts[k - 1].accuracy < baseline.accuracy && hit.accuracy > baseline.accuracy {
        let lo = pts[k - 1];
        let t = (baseline.accuracy - lo.accuracy) / (hit.accuracy - lo.accuracy);
        lo.cycles + t * (hit.cycles - lo.cycles)
    } else {
        hit.cycles
    };
    Ok(baseline.cycles / cycles)
}

/// Area dominated by `points` and bounded by `reference` (accuracy floor,
/// cycle ceiling). Points that do not dominate the reference add nothing.
pub fn hypervolume(points: &[Objectives], reference: Objectives) -> f64 {
    let useful: Vec<Objectives> = points
        .iter()
        .copied()
        .filter(|p| p.accuracy > reference.accuracy && p.cycles < reference.cycles)
        .collect();
    if useful.is_empty() {
        return 0.0;
    }
    let mut front: Vec<Objectives> = non_dominated_sort(&useful)[0]
        .iter()
        .map(|&i| useful[i])
        .collect();
    front.sort_by(|a, b| a.cycles.total_cmp(&b.cycles));
    let mut area = 0.0;
    for (i, p) in front.iter().enumerate() {
        let right = front.get(i + 1).map_or(reference.cycles, |q| q.cycles);
        area += (right - p.cycles) * (p.accuracy - reference.accuracy);
    }
    area
}

/// Predicted objectives for a genome.
pub trait Surrogate {
    fn predict(&self, g: &Genome) -> Objectives;
}

/// Ridge (or SVR) models for cycles (log domain) and accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictors {
    pub cycles: Model,
    pub accuracy: Model,
}

impl Predictors {
    pub fn fit(
        kind: ModelKind,
        genomes: &[Genome],
        objs: &[Objectives],
        seed: u64,
    ) -> Result<Self, PredictError> {
        let x: Vec<Vec<f64>> = genomes.iter().map(Genome::features).collect();
        let cyc: Vec<f64> = objs.iter().map(|o| o.cycles).collect();
        let acc: Vec<f64> = objs.iter().map(|o| o.accuracy).collect();
        Ok(Predictors {
            cycles: Model::fit(kind, &x, &cyc, TargetTransform::Log, rng::derive(seed, 1))?,
            accuracy: Model::fit(kind, &x, &acc, TargetTransform::Identity, rng::derive(seed, 2))?,
        })
    }
}

impl Surrogate for Predictors {
    fn predict(&self, g: &Genome) -> Objectives {
        let x = g.features();
        Objectives::new(self.accuracy.predict(&x), self.cycles.predict(&x))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreenResult {
    /// Every unique genome evaluated, in evaluation order.
    pub evaluated: Vec<(Genome, Objectives)>,
    /// The space ran out of new genomes before `m` were found.
    pub exhausted: bool,
}

/// Consecutive duplicate offspring tolerated before switching to uniform
/// sampling, and then before declaring the space exhausted.
const STALE_LIMIT: usize = 2000;

/// Generational NSGA-II on surrogate objectives until `m` unique genomes
/// have been evaluated. The initial population is `min(population, m)`
/// uniform samples.
pub fn nsga2_screen<S: Surrogate + ?Sized, R: Rng + ?Sized>(
    codec: &Codec,
    setting: &SearchSetting,
    surrogate: &S,
    m: usize,
    rng: &mut R,
) -> Result<ScreenResult, SearchError> {
    let pop_size = setting.population.max(2).min(m.max(1));
    let mut seen: BTreeSet<Genome> = BTreeSet::new();
    let mut evaluated: Vec<(Genome, Objectives)> = Vec::new();
    let mut exhausted = false;

    let add = |g: Genome, seen: &mut BTreeSet<Genome>, ev: &mut Vec<(Genome, Objectives)>| -> Option<usize> {
        if seen.contains(&g) {
            return None;
        }
        seen.insert(g.clone());
        let o = surrogate.predict(&g);
        ev.push((g, o));
        Some(ev.len() - 1)
    };

    let mut population: Vec<usize> = Vec::with_capacity(pop_size);
    let mut stale = 0;
    while population.len() < pop_size {
        match add(codec.sample(rng), &mut seen, &mut evaluated) {
            Some(i) => {
                population.push(i);
                stale = 0;
            }
            None => {
                stale += 1;
                if stale > STALE_LIMIT {
                    exhausted = true;
                    break;
                }
            }
        }
    }

    while !exhausted && evaluated.len() < m {
        let objs: Vec<Objectives> = population.iter().map(|&i| evaluated[i].1).collect();
        let (rank, crowd) = rank_and_crowding(&objs);
        let better = |a: usize, b: usize| -> usize {
            match rank[a].cmp(&rank[b]).then_with(|| crowd[b].total_cmp(&crowd[a])) {
                Ordering::Greater => b,
                _ => a,
            }
        };
        let mut offspring = Vec::with_capacity(pop_size);
        let mut stale = 0;
        while offspring.len() < pop_size && evaluated.len() < m {
            let child = if stale < STALE_LIMIT {
                let n = population.len();
                let p1 = better(rng.gen_range(0..n), rng.gen_range(0..n));
                let p2 = better(rng.gen_range(0..n), rng.gen_range(0..n));
                let g1 = &evaluated[population[p1]].0;
                let g2 = &evaluated[population[p2]].0;
                let c = if rng.gen_bool(setting.crossover_rate.clamp(0.0, 1.0)) {
                    codec.crossover(g1, g2, rng)?
                } else {
                    g1.clone()
                };
                codec.mutate(&c, setting.mutation_rate.clamp(0.0, 1.0), rng)?
            } else {
                codec.sample(rng)
            };
            match add(child, &mut seen, &mut evaluated) {
                Some(i) => {
                    offspring.push(i);
                    stale = 0;
                }
                None => {
                    stale += 1;
                    if stale > 2 * STALE_LIMIT {
                        exhausted = true;
                        break;
                    }
                }
            }
        }
        // Generational replacement with elitism over parents ∪ offspring.
        let merged: Vec<usize> = population.iter().chain(&offspring).copied().collect();
        let genomes: Vec<&Genome> = merged.iter().map(|&i| &evaluated[i].0).collect();
        let objs: Vec<Objectives> = merged.iter().map(|&i| evaluated[i].1).collect();
        let order = ranked_order(&genomes, &objs);
        population = order.iter().take(pop_size).map(|&k| merged[k]).collect();
    }
    Ok(ScreenResult { evaluated, exhausted })
}

/// Ground-truth objectives of a batch of genomes; `None` marks a genome
/// whose layers cannot be mapped onto its hardware.
pub trait TrueEvaluator {
    fn evaluate(&mut self, genomes: &[Genome]) -> Vec<Option<Objectives>>;
}

/// Uncached evaluator: analytical simulator for cycles, proxy for accuracy.
pub struct SimulatorOracle<'a, C: DataflowCompiler + ?Sized> {
    pub codec: &'a Codec,
    pub proxy: ProxyParams,
    pub compiler: &'a C,
    canonical_params: u64,
}

impl<'a, C: DataflowCompiler + ?Sized> SimulatorOracle<'a, C> {
    pub fn new(codec: &'a Codec, proxy: ProxyParams, compiler: &'a C) -> Result<Self, SearchError> {
        proxy.validate()?;
        let space = codec.arch_space();
        let canonical_params = count_params(space, &space.canonical())?;
        Ok(SimulatorOracle {
            codec,
            proxy,
            compiler,
            canonical_params,
        })
    }

    pub fn evaluate_one(&self, g: &Genome) -> Option<Objectives> {
        let (subnet, cfg) = self.codec.decode(g).ok()?;
        let space = self.codec.arch_space();
        let layers = space.lower(&subnet).ok()?;
        let report = simulate(&layers, &cfg, self.compiler).ok()?;
        let params = crate::workload::total_params(&layers);
        let acc = proxy_from_params(
            &subnet,
            params,
            self.canonical_params,
            self.proxy.capacity_scale.get(space.family),
            &self.proxy,
        );
        Some(Objectives::new(acc, report.total_cycles as f64))
    }
}

impl<C: DataflowCompiler + ?Sized> TrueEvaluator for SimulatorOracle<'_, C> {
    fn evaluate(&mut self, genomes: &[Genome]) -> Vec<Option<Objectives>> {
        genomes.iter().map(|g| self.evaluate_one(g)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub setting: SearchSetting,
    #[serde(default)]
    pub predictor: ModelKind,
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.k == 0 {
            return Err(SearchError::Params("k must be at least 1"));
        }
        if self.n == 0 {
            return Err(SearchError::Params("n must be at least 1"));
        }
        if self.m < self.n {
            return Err(SearchError::Params("m must be at least n"));
        }
        if !(0.0..=1.0).contains(&self.setting.mutation_rate) {
            return Err(SearchError::Params("mutation_rate must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.setting.crossover_rate) {
            return Err(SearchError::Params("crossover_rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Surrogate quality on the batch it selected, before retraining.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchEval {
    pub cycles_mape: Option<f64>,
    pub cycles_tau: Option<f64>,
    pub accuracy_mape: Option<f64>,
    pub accuracy_tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// True-evaluated samples the predictors are trained on afterwards.
    pub training_size: usize,
    /// Unique genomes screened on predicted objectives.
    pub screened: usize,
    pub exhausted: bool,
    /// Selected genomes not true-evaluated in an earlier iteration.
    pub new_genomes: usize,
    pub infeasible: usize,
    pub predictor_eval: Option<BatchEval>,
    pub lambda_cycles: Option<f64>,
    pub lambda_accuracy: Option<f64>,
    /// Front of the screened pool, on predicted objectives.
    pub predicted_front: Vec<ParetoPoint>,
    /// Front of every feasible true evaluation so far.
    pub front: Vec<ParetoPoint>,
}

/// One true-evaluated sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub iteration: usize,
    pub genome: Genome,
    /// Training targets; the sentinel for infeasible genomes.
    pub objectives: Objectives,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchHistory {
    pub params: SearchParams,
    pub iterations: Vec<IterationRecord>,
    /// Training set in insertion order (`k·N` entries after iteration `k`).
    pub evaluated: Vec<Evaluated>,
    pub final_front: Vec<ParetoPoint>,
    pub predictors: Option<Predictors>,
}

fn lambda_of(m: &Model) -> Option<f64> {
    match m {
        Model::Ridge(r) => Some(r.lambda),
        Model::Svr(_) => None,
    }
}

fn true_front(evaluated: &[Evaluated]) -> Vec<ParetoPoint> {
    let mut uniq: BTreeMap<&Genome, Objectives> = BTreeMap::new();
    for e in evaluated.iter().filter(|e| e.feasible) {
        uniq.insert(&e.genome, e.objectives);
    }
    let pts: Vec<ParetoPoint> = uniq
        .into_iter()
        .map(|(g, o)| ParetoPoint {
            genome: g.clone(),
            accuracy: o.accuracy,
            cycles: o.cycles,
            provenance: Provenance::True,
        })
        .collect();
    pareto_front(&pts)
}

/// Runs the `K`-iteration predictor-guided search.
///
/// Infeasible genomes get the sentinel objectives (accuracy 0, cycles twice
/// the largest feasible cycle count seen so far) as training targets and
/// never enter a front. When screening yields fewer than `N` genomes that
/// were not true-evaluated before, the batch is topped up with the best
/// already-evaluated screened genomes (cycling if needed), so the training
/// set always holds exactly `k·N` samples.
pub fn joint_search<E: TrueEvaluator + ?Sized>(
    codec: &Codec,
    params: &SearchParams,
    evaluator: &mut E,
) -> Result<SearchHistory, SearchError> {
    params.validate()?;
    if codec.scope() != params.setting.mode.scope() {
        return Err(SearchError::Params("codec scope does not match the search mode"));
    }
    let n = params.n;
    let mut known: BTreeMap<Genome, Option<Objectives>> = BTreeMap::new();
    let mut evaluated: Vec<Evaluated> = Vec::new();
    let mut iterations = Vec::new();
    let mut max_cycles = 0.0f64;
    let mut predictors: Option<Predictors> = None;

    for k in 1..=params.k {
        let mut screened = 0;
        let mut exhausted = false;
        let mut predicted_front = Vec::new();
        let mut predicted: Vec<Option<Objectives>> = Vec::new();
        let batch: Vec<Genome> = match &predictors {
            None => {
                let mut r = rng::seeded(rng::derive(params.seed, 0));
                (0..n).map(|_| codec.sample(&mut r)).collect()
            }
            Some(p) => {
                let mut r = rng::seeded(rng::derive(params.seed, 100 + k as u64));
                let screen = nsga2_screen(codec, &params.setting, p, params.m, &mut r)?;
                screened = screen.evaluated.len();
                exhausted = screen.exhausted;
                let pts: Vec<ParetoPoint> = screen
                    .evaluated
                    .iter()
                    .map(|(g, o)| ParetoPoint {
                        genome: g.clone(),
                        accuracy: o.accuracy,
                        cycles: o.cycles,
                        provenance: Provenance::Predicted,
                    })
                    .collect();
                predicted_front = pareto_front(&pts);
                let (fresh, old): (Vec<_>, Vec<_>) = screen
                    .evaluated
                    .into_iter()
                    .partition(|(g, _)| !known.contains_key(g));
                let mut chosen: Vec<(Genome, Objectives)> = select_top_n(&fresh, n)
                    .into_iter()
                    .map(|i| fresh[i].clone())
                    .collect();
                if chosen.len() < n {
                    let refill: Vec<(Genome, Objectives)> = if old.is_empty() {
                        chosen.clone()
                    } else {
                        select_top_n(&old, old.len())
                            .into_iter()
                            .map(|i| old[i].clone())
                            .collect()
                    };
                    let mut it = refill.iter().cycle();
                    while chosen.len() < n {
                        match it.next() {
                            Some(x) => chosen.push(x.clone()),
                            None => break,
                        }
                    }
                }
                predicted = chosen.iter().map(|c| Some(c.1)).collect();
                chosen.into_iter().map(|c| c.0).collect()
            }
        };
        if batch.len() != n {
            return Err(SearchError::Params("search space produced no genomes"));
        }

        let mut todo: Vec<Genome> = Vec::new();
        let mut queued: BTreeSet<&Genome> = BTreeSet::new();
        for g in &batch {
            if !known.contains_key(g) && queued.insert(g) {
                todo.push(g.clone());
            }
        }
        let new_genomes = todo.len();
        let results = evaluator.evaluate(&todo);
        for (g, r) in todo.into_iter().zip(results) {
            if let Some(o) = r {
                max_cycles = max_cycles.max(o.cycles);
            }
            known.insert(g, r);
        }
        let sentinel = Objectives::new(0.0, 2.0 * max_cycles.max(1.0));
        let mut infeasible = 0;
        let mut truth = Vec::with_capacity(n);
        for g in &batch {
            let r = known[g];
            if r.is_none() {
                infeasible += 1;
            }
            let objectives = r.unwrap_or(sentinel);
            truth.push(objectives);
            evaluated.push(Evaluated {
                iteration: k,
                genome: g.clone(),
                objectives,
                feasible: r.is_some(),
            });
        }

        let predictor_eval = (!predicted.is_empty()).then(|| {
            let pc: Vec<f64> = predicted.iter().map(|o| o.map_or(0.0, |o| o.cycles)).collect();
            let pa: Vec<f64> = predicted.iter().map(|o| o.map_or(0.0, |o| o.accuracy)).collect();
            let tc: Vec<f64> = truth.iter().map(|o| o.cycles).collect();
            let ta: Vec<f64> = truth.iter().map(|o| o.accuracy).collect();
            BatchEval {
                cycles_mape: mape(&tc, &pc).ok(),
                cycles_tau: kendall_tau(&tc, &pc).ok(),
                accuracy_mape: mape(&ta, &pa).ok(),
                accuracy_tau: kendall_tau(&ta, &pa).ok(),
            }
        });

        let genomes: Vec<Genome> = evaluated.iter().map(|e| e.genome.clone()).collect();
        let objs: Vec<Objectives> = evaluated.iter().map(|e| e.objectives).collect();
        let mut fitted = Predictors::fit(
            params.predictor,
            &genomes,
            &objs,
            rng::derive(params.seed, 200 + k as u64),
        )?;
        let hash = &codec.layout().schema_hash;
        fitted.cycles.set_schema_hash(hash);
        fitted.accuracy.set_schema_hash(hash);

        iterations.push(IterationRecord {
            iteration: k,
            training_size: evaluated.len(),
            screened,
            exhausted,
            new_genomes,
            infeasible,
            predictor_eval,
            lambda_cycles: lambda_of(&fitted.cycles),
            lambda_accuracy: lambda_of(&fitted.accuracy),
            predicted_front,
            front: true_front(&evaluated),
        });
        predictors = Some(fitted);
    }

    let final_front = true_front(&evaluated);
    Ok(SearchHistory {
        params: *params,
        iterations,
        evaluated,
        final_front,
        predictors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cim::ConfigSpace;
    use crate::dataflow::AnalyticCompiler;
    use crate::workload::ArchSpace;

    fn o(a: f64, c: f64) -> Objectives {
        Objectives::new(a, c)
    }

    #[test]
    fn sort_example() {
        let f = non_dominated_sort(&[o(0.8, 100.0), o(0.7, 50.0), o(0.6, 200.0)]);
        assert_eq!(f, alloc::vec![alloc::vec![0, 1], alloc::vec![2]]);
        assert_eq!(non_dominated_sort(&[o(0.5, 1.0)]), alloc::vec![alloc::vec![0]]);
        let dup = non_dominated_sort(&[o(0.5, 1.0), o(0.5, 1.0)]);
        assert_eq!(dup, alloc::vec![alloc::vec![0, 1]]);
    }

    #[test]
    fn crowding_examples() {
        assert!(crowding_distance(&[o(0.1, 1.0), o(0.2, 2.0)])
            .iter()
            .all(|d| d.is_infinite()));
        let d = crowding_distance(&[o(0.1, 1.0), o(0.2, 2.0), o(0.3, 3.0)]);
        assert_eq!(d[1], 2.0);
        let flat = crowding_distance(&[o(0.1, 5.0), o(0.2, 5.0), o(0.4, 5.0)]);
        assert!((flat[1] - (0.4 - 0.1) / 0.3).abs() < 1e-12);
    }

    #[test]
    fn iso_accuracy_examples() {
        let r = cycle_reduction_at_iso_accuracy(&[o(0.75, 500.0)], o(0.75, 1000.0)).unwrap();
        assert_eq!(r, 2.0);
        let r = cycle_reduction_at_iso_accuracy(&[o(0.70, 200.0), o(0.80, 600.0)], o(0.75, 1000.0)).unwrap();
        assert!((r - 2.5).abs() < 1e-12);
        assert_eq!(
            cycle_reduction_at_iso_accuracy(&[o(0.70, 200.0)], o(0.75, 1000.0)),
            Err(SearchError::BelowBaseline(0.75))
        );
    }

    #[test]
    fn hypervolume_of_staircase() {
        let hv = hypervolume(&[o(0.5, 1.0), o(1.0, 2.0)], o(0.0, 3.0));
        assert!((hv - (0.5 * 1.0 + 1.0 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn top_n_prefers_rank_then_crowding() {
        let g = |s: &str| Genome::parse(s).unwrap();
        let pool = alloc::vec![
            (g("00"), o(0.1, 10.0)),
            (g("01"), o(0.5, 1.0)),
            (g("10"), o(0.3, 0.5)),
            (g("11"), o(0.4, 0.8)),
        ];
        let top = select_top_n(&pool, 2);
        assert_eq!(top, alloc::vec![1, 2]);
        assert_eq!(select_top_n(&pool, 4).len(), 4);
    }

    fn tiny_codec(mode: SearchMode) -> Codec {
        Codec::new(ArchSpace::vit_base(), ConfigSpace::default(), mode.scope()).unwrap()
    }

    struct Bits;

    impl Surrogate for Bits {
        fn predict(&self, g: &Genome) -> Objectives {
            let ones = g.bits().iter().enumerate().filter(|(_, &b)| b == 1);
            let s: usize = ones.map(|(i, _)| i).sum();
            o((s % 97) as f64, (s % 89) as f64)
        }
    }

    #[test]
    fn screen_with_population_equal_m_is_initial_population() {
        let codec = tiny_codec(SearchMode::ElasticArchElasticCfg);
        let setting = SearchSetting::new(SearchMode::ElasticArchElasticCfg);
        let res = nsga2_screen(&codec, &setting, &Bits, 100, &mut rng::seeded(1)).unwrap();
        assert_eq!(res.evaluated.len(), 100);
        let mut r = rng::seeded(1);
        let mut first = Vec::new();
        let mut seen = BTreeSet::new();
        while first.len() < 100 {
            let g = codec.sample(&mut r);
            if seen.insert(g.clone()) {
                first.push(g);
            }
        }
        let got: Vec<Genome> = res.evaluated.into_iter().map(|e| e.0).collect();
        assert_eq!(got, first);
    }

    #[test]
    fn screen_is_unique_valid_and_reports_exhaustion() {
        let codec = tiny_codec(SearchMode::ElasticArchElasticCfg);
        let setting = SearchSetting::new(SearchMode::ElasticArchElasticCfg);
        let res = nsga2_screen(&codec, &setting, &Bits, 400, &mut rng::seeded(2)).unwrap();
        assert_eq!(res.evaluated.len(), 400);
        let uniq: BTreeSet<_> = res.evaluated.iter().map(|e| &e.0).collect();
        assert_eq!(uniq.len(), 400);
        assert!(res.evaluated.iter().all(|(g, _)| codec.decode(g).is_ok()));

        let small = tiny_codec(SearchMode::ElasticArchStaticCfg);
        let setting = SearchSetting::new(SearchMode::ElasticArchStaticCfg);
        let res = nsga2_screen(&small, &setting, &Bits, 100, &mut rng::seeded(3)).unwrap();
        assert!(res.exhausted);
        assert_eq!(res.evaluated.len(), 27);
    }

    #[test]
    fn training_sizes_grow_by_n() {
        let codec = tiny_codec(SearchMode::ElasticArchStaticCfg);
        let compiler = AnalyticCompiler;
        let mut oracle = SimulatorOracle::new(&codec, ProxyParams::default(), &compiler).unwrap();
        let params = SearchParams {
            k: 3,
            m: 40,
            n: 20,
            seed: 5,
            setting: SearchSetting::new(SearchMode::ElasticArchStaticCfg),
            predictor: ModelKind::default(),
        };
        let h = joint_search(&codec, &params, &mut oracle).unwrap();
        let sizes: Vec<usize> = h.iterations.iter().map(|r| r.training_size).collect();
        assert_eq!(sizes, alloc::vec![20, 40, 60]);
        assert!(h.final_front.iter().all(|p| p.provenance == Provenance::True));
        assert!(!h.final_front.is_empty());
        let again = joint_search(&codec, &params, &mut oracle).unwrap();
        assert_eq!(again, h);
        assert_eq!(h.iterations[0].predictor_eval, None);
    }
}
