//! Experiment configuration and the search / predictor-evaluation runners.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cimnet_core::cim::{ConfigSpaceError, Multipliers};
use cimnet_core::predict::{evaluate_predictor, ModelKind, PredictorEval, TargetTransform};
use cimnet_core::search::{hypervolume, joint_search, BatchEval, SearchHistory, SearchParams, SearchSetting};
use cimnet_core::{
    cycle_reduction_at_iso_accuracy, rng, ArchSpace, Codec, ConfigSpace, Family, HardwareConfig, HwParams,
    Objectives, ProxyParams, Scope, SearchMode, SubnetArch,
};

use crate::error::{ConfigError, Error};
use crate::eval::{CachedCompiler, Evaluator};
use crate::io;

/// Fields of the default configuration space that an experiment replaces.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpaceOverrides {
    #[serde(default)]
    pub base: Option<HardwareConfig>,
    #[serde(default)]
    pub ladders: Option<HwParams<Vec<f64>>>,
    #[serde(default)]
    pub compute_budget: Option<f64>,
    #[serde(default)]
    pub memory_budget: Option<[f64; 2]>,
}

impl ConfigSpaceOverrides {
    pub fn apply(&self) -> ConfigSpace {
        let mut s = ConfigSpace::default();
        if let Some(b) = self.base {
            s.base = b;
        }
        if let Some(l) = &self.ladders {
            s.ladders = l.clone();
        }
        if let Some(c) = self.compute_budget {
            s.compute_budget = c;
        }
        if let Some(m) = self.memory_budget {
            s.memory_budget = m;
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NsgaParams {
    pub population: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
}

impl Default for NsgaParams {
    fn default() -> Self {
        let s = SearchSetting::new(SearchMode::ElasticArchElasticCfg);
        NsgaParams {
            population: s.population,
            mutation_rate: s.mutation_rate,
            crossover_rate: s.crossover_rate,
        }
    }
}

fn default_k() -> usize {
    5
}

fn default_m() -> usize {
    2000
}

fn default_n() -> usize {
    500
}

fn default_out() -> PathBuf {
    PathBuf::from("run")
}

/// The JSON document accepted by `cimnet run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub setting: SearchMode,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Seeds to run; each gets its own output subdirectory when more than
    /// one is given.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub predictor: ModelKind,
    #[serde(default)]
    pub config_space: ConfigSpaceOverrides,
    /// Replaces the family's preset architecture space.
    #[serde(default)]
    pub arch_space: Option<ArchSpace>,
    #[serde(default)]
    pub proxy: ProxyParams,
    #[serde(default)]
    pub nsga: NsgaParams,
    /// Maximum true evaluations (`k·n`) the experiment may spend.
    #[serde(default)]
    pub eval_budget: Option<usize>,
}

/// Everything one search run needs.
#[derive(Clone, Debug)]
pub struct SearchSpec {
    pub arch: ArchSpace,
    pub config: ConfigSpace,
    pub params: SearchParams,
    pub proxy: ProxyParams,
}

impl SearchSpec {
    /// Preset spaces, default knobs.
    pub fn new(family: Family, mode: SearchMode, k: usize, m: usize, n: usize, seed: u64) -> Self {
        SearchSpec {
            arch: ArchSpace::preset(family),
            config: ConfigSpace::default(),
            params: SearchParams {
                k,
                m,
                n,
                seed,
                setting: SearchSetting::new(mode),
                predictor: ModelKind::default(),
            },
            proxy: ProxyParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Semantic checks; `text` is the source document, for line anchors.
    pub fn validate(&self, text: &str, origin: &str) -> Result<(), Error> {
        let at = |key: &str, msg: String| -> Error {
            ConfigError::field(origin, io::line_of_key(text, key), key, msg).into()
        };
        if self.k == 0 {
            return Err(at("k", "must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(at("n", "must be at least 1".into()));
        }
        if self.m < self.n {
            return Err(at("m", format!("must be at least n = {}", self.n)));
        }
        if let Some(b) = self.eval_budget {
            if self.k * self.n > b {
                return Err(at(
                    "eval_budget",
                    format!("k·n = {} exceeds the evaluation budget {b}", self.k * self.n),
                ));
            }
        }
        if self.nsga.population < 2 {
            return Err(at("population", "must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.nsga.mutation_rate) {
            return Err(at("mutation_rate", "must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.nsga.crossover_rate) {
            return Err(at("crossover_rate", "must lie in [0, 1]".into()));
        }
        if let Err(e) = self.proxy.validate() {
            return Err(at("proxy", e.to_string()));
        }
        if let Some(a) = &self.arch_space {
            if let Err(e) = a.validate() {
                return Err(at("arch_space", e.to_string()));
            }
            if a.family != self.family {
                return Err(at(
                    "arch_space",
                    format!("family {} does not match {}", a.family, self.family),
                ));
            }
        }
        match self.config_space.apply().check() {
            Ok(()) => Ok(()),
            Err(ConfigSpaceError::Empty) if self.setting.scope().hardware => Err(Error::Infeasible(
                "no configuration satisfies the compute and memory budgets".into(),
            )),
            Err(ConfigSpaceError::Empty) => Ok(()),
            Err(e) => Err(at("config_space", e.to_string())),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![0]
        } else {
            self.seeds.clone()
        }
    }

    pub fn spec(&self, seed: u64) -> SearchSpec {
        SearchSpec {
            arch: self
                .arch_space
                .clone()
                .unwrap_or_else(|| ArchSpace::preset(self.family)),
            config: self.config_space.apply(),
            params: SearchParams {
                k: self.k,
                m: self.m,
                n: self.n,
                seed,
                setting: SearchSetting {
                    mode: self.setting,
                    population: self.nsga.population,
                    mutation_rate: self.nsga.mutation_rate,
                    crossover_rate: self.nsga.crossover_rate,
                },
                predictor: self.predictor,
            },
            proxy: self.proxy,
        }
    }
}

/// Hardware configuration as stored on disk: ladder multipliers and the
/// resolved absolute values. Either may be given on input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Multipliers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<HardwareConfig>,
}

impl HardwareDoc {
    pub fn of(cfg: &HardwareConfig, space: &ConfigSpace) -> Self {
        HardwareDoc {
            multipliers: Some(space.multipliers(cfg)),
            values: Some(*cfg),
        }
    }

    pub fn resolve(&self, space: &ConfigSpace) -> Result<HardwareConfig, String> {
        match (&self.values, &self.multipliers) {
            (Some(v), Some(m)) => {
                if space.resolve(m) != *v {
                    return Err("multipliers and values disagree".into());
                }
                Ok(*v)
            }
            (Some(v), None) => Ok(*v),
            (None, Some(m)) => Ok(space.resolve(m)),
            (None, None) => Err("needs `multipliers` or `values`".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub arch: SubnetArch,
    pub config: HardwareDoc,
    /// PROXY accuracy.
    pub accuracy: f64,
    pub cycles: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub family: Family,
    pub setting: SearchMode,
    pub seed: u64,
    pub k: usize,
    pub m: usize,
    pub n: usize,
    /// Accuracy values are produced by the proxy, not by trained networks.
    pub accuracy_kind: String,
    pub schema_hash: String,
    pub true_evaluations: usize,
    pub unique_genomes: usize,
    pub infeasible: usize,
    /// True-evaluated genomes whose hardware part breaks the setting's
    /// constraints (the configuration space, or equality with the static
    /// configuration when hardware is frozen).
    pub budget_violations: usize,
    pub front_size: usize,
    pub baseline: Baseline,
    pub cycle_reduction_at_iso_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_reduction_error: Option<String>,
    /// Reference point: accuracy 0, cycles twice the baseline's.
    pub hypervolume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub genome_id: String,
    pub accuracy: f64,
    pub cycles: u64,
    pub genome: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationEvalRow {
    pub iteration: usize,
    pub training_size: usize,
    pub cycles_mape: Option<f64>,
    pub cycles_tau: Option<f64>,
    pub accuracy_mape: Option<f64>,
    pub accuracy_tau: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenomeRecord {
    pub iteration: usize,
    pub genome_id: String,
    pub genome: String,
    pub feasible: bool,
    /// PROXY accuracy (0 for infeasible genomes).
    pub accuracy: f64,
    pub cycles: f64,
    pub arch: SubnetArch,
    pub config: HardwareConfig,
}

pub struct RunOutcome {
    pub history: SearchHistory,
    pub summary: Summary,
    pub records: Vec<GenomeRecord>,
}

fn eval_row(iteration: usize, training_size: usize, e: Option<BatchEval>) -> IterationEvalRow {
    let e = e.unwrap_or(BatchEval {
        cycles_mape: None,
        cycles_tau: None,
        accuracy_mape: None,
        accuracy_tau: None,
    });
    IterationEvalRow {
        iteration,
        training_size,
        cycles_mape: e.cycles_mape,
        cycles_tau: e.cycles_tau,
        accuracy_mape: e.accuracy_mape,
        accuracy_tau: e.accuracy_tau,
    }
}

/// Canonical sub-network on the static configuration.
pub fn baseline(evaluator: &Evaluator) -> Result<Baseline, Error> {
    let codec = evaluator.codec();
    let arch = codec.static_arch().clone();
    let cfg = *codec.static_config();
    let e = evaluator
        .evaluate_pair(&arch, &cfg)
        .map_err(|e| Error::Infeasible(format!("static baseline: {e}")))?;
    Ok(Baseline {
        arch,
        config: HardwareDoc::of(&cfg, codec.config_space()),
        accuracy: e.accuracy,
        cycles: e.report.total_cycles,
    })
}

/// Runs one search; writes artifacts to `out` when given.
pub fn run_search(
    spec: &SearchSpec,
    compiler: &CachedCompiler,
    out: Option<&Path>,
) -> Result<RunOutcome, Error> {
    let mode = spec.params.setting.mode;
    let codec = Codec::new(spec.arch.clone(), spec.config.clone(), mode.scope()).map_err(|e| match e {
        cimnet_core::encoding::CodecError::Space(ConfigSpaceError::Empty) => Error::Infeasible(e.to_string()),
        other => Error::Other(other.into()),
    })?;
    let mut evaluator = Evaluator::new(&codec, spec.proxy, compiler).map_err(|e| Error::Other(e.into()))?;
    let base = baseline(&evaluator)?;
    log::info!(
        "{} {} seed {}: baseline accuracy {:.4} (proxy), {} cycles",
        spec.arch.family,
        mode,
        spec.params.seed,
        base.accuracy,
        base.cycles
    );
    let history = joint_search(&codec, &spec.params, &mut evaluator).map_err(|e| Error::Other(e.into()))?;

    let mut records = Vec::with_capacity(history.evaluated.len());
    let mut violations = 0;
    for e in &history.evaluated {
        let (arch, config) = codec
            .decode_unchecked(&e.genome)
            .map_err(|e| Error::Other(e.into()))?;
        if codec.check_hardware(&config).is_err() {
            violations += 1;
        }
        records.push(GenomeRecord {
            iteration: e.iteration,
            genome_id: e.genome.id(),
            genome: e.genome.to_bit_string(),
            feasible: e.feasible,
            accuracy: if e.feasible { e.objectives.accuracy } else { 0.0 },
            cycles: e.objectives.cycles,
            arch,
            config,
        });
    }

    let front: Vec<Objectives> = history.final_front.iter().map(|p| p.objectives()).collect();
    let base_obj = Objectives::new(base.accuracy, base.cycles as f64);
    let (reduction, reduction_error) = match cycle_reduction_at_iso_accuracy(&front, base_obj) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let hv = hypervolume(&front, Objectives::new(0.0, 2.0 * base.cycles as f64));
    let unique: std::collections::BTreeSet<_> = history.evaluated.iter().map(|e| &e.genome).collect();
    let summary = Summary {
        family: spec.arch.family,
        setting: mode,
        seed: spec.params.seed,
        k: spec.params.k,
        m: spec.params.m,
        n: spec.params.n,
        accuracy_kind: "PROXY".into(),
        schema_hash: codec.layout().schema_hash.clone(),
        true_evaluations: history.evaluated.len(),
        unique_genomes: unique.len(),
        infeasible: history.evaluated.iter().filter(|e| !e.feasible).count(),
        budget_violations: violations,
        front_size: front.len(),
        baseline: base,
        cycle_reduction_at_iso_accuracy: reduction,
        cycle_reduction_error: reduction_error,
        hypervolume: hv,
    };

    if let Some(dir) = out {
        write_run(dir, &codec, &history, &records, &summary)?;
    }
    Ok(RunOutcome {
        history,
        summary,
        records,
    })
}

pub fn front_rows(history: &SearchHistory) -> Vec<FrontRow> {
    history
        .final_front
        .iter()
        .map(|p| FrontRow {
            genome_id: p.genome.id(),
            accuracy: p.accuracy,
            cycles: p.cycles as u64,
            genome: p.genome.to_bit_string(),
        })
        .collect()
}

fn write_run(
    dir: &Path,
    codec: &Codec,
    history: &SearchHistory,
    records: &[GenomeRecord],
    summary: &Summary,
) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_csv(&dir.join("front.csv"), &front_rows(history))?;
    io::write_jsonl(&dir.join("history.jsonl"), &history.iterations)?;
    io::write_jsonl(&dir.join("genomes.jsonl"), records)?;
    io::write_json(&dir.join("genome_layout.json"), codec.layout())?;
    let rows: Vec<IterationEvalRow> = history
        .iterations
        .iter()
        .map(|r| eval_row(r.iteration, r.training_size, r.predictor_eval))
        .collect();
    io::write_csv(&dir.join("predictor_eval.csv"), &rows)?;
    if let Some(p) = &history.predictors {
        io::write_json(&dir.join("predictors.json"), p)?;
    }
    io::write_json(&dir.join("summary.json"), summary)
}

/// Loads, validates and runs an experiment file. Returns one summary per
/// seed.
pub fn run_experiment(path: &Path) -> Result<Vec<Summary>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let cfg: ExperimentConfig = io::parse_json(&text, &origin)?;
    cfg.validate(&text, &origin)?;
    let seeds = cfg.seeds();
    let compiler = CachedCompiler::new();
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let dir = if seeds.len() == 1 {
            cfg.out_dir.clone()
        } else {
            cfg.out_dir.join(format!("seed-{seed}"))
        };
        let r = run_search(&cfg.spec(seed), &compiler, Some(&dir))?;
        out.push(r.summary);
    }
    if seeds.len() > 1 {
        io::write_json(&cfg.out_dir.join("summary.json"), &out)?;
    }
    Ok(out)
}

/// One point of a predictor learning curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub family: Family,
    pub setting: SearchMode,
    pub model: String,
    pub target: String,
    pub n_train: usize,
    pub n_test: usize,
    pub trials: usize,
    pub mape: f64,
    pub kendall_tau: f64,
}

/// Samples `pool` genomes uniformly from the space and returns features
/// with true (accuracy, cycles); infeasible genomes are skipped.
pub fn labeled_pool(evaluator: &mut Evaluator, pool: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Objectives>) {
    let mut r = rng::seeded(seed);
    let mut x = Vec::with_capacity(pool);
    let mut y = Vec::with_capacity(pool);
    let mut attempts = 0;
    while x.len() < pool && attempts < pool * 4 {
        attempts += 1;
        let g = evaluator.codec().sample(&mut r);
        if let Some(o) = evaluator.evaluate_genome(&g) {
            x.push(g.features());
            y.push(o);
        }
    }
    (x, y)
}

#[allow(clippy::too_many_arguments)]
pub fn predictor_curve(
    family: Family,
    mode: SearchMode,
    compiler: &CachedCompiler,
    pool: usize,
    sizes: &[usize],
    trials: usize,
    kind: ModelKind,
    seed: u64,
) -> Result<Vec<CurveRow>, Error> {
    let codec = Codec::new(ArchSpace::preset(family), ConfigSpace::default(), mode.scope())
        .map_err(|e| Error::Other(e.into()))?;
    let mut evaluator =
        Evaluator::new(&codec, ProxyParams::default(), compiler).map_err(|e| Error::Other(e.into()))?;
    let (x, y) = labeled_pool(&mut evaluator, pool, seed);
    let model = match kind {
        ModelKind::Ridge { .. } => "ridge",
        ModelKind::Svr(_) => "svr",
    };
    let mut rows = Vec::new();
    let mut targets = vec![("cycles", TargetTransform::Log)];
    if mode.scope().arch {
        targets.push(("accuracy", TargetTransform::Identity));
    }
    for (target, transform) in targets {
        let t: Vec<f64> = y
            .iter()
            .map(|o| if target == "cycles" { o.cycles } else { o.accuracy })
            .collect();
        let curve: Vec<PredictorEval> = evaluate_predictor(&x, &t, sizes, trials, kind, transform, seed)
            .map_err(|e| match e {
                cimnet_core::predict::PredictError::PoolTooSmall { .. } => {
                    Error::Config(ConfigError::field("arguments", 0, "pool", e.to_string()))
                }
                other => Error::Other(other.into()),
            })?;
        for p in curve {
            rows.push(CurveRow {
                family,
                setting: mode,
                model: model.into(),
                target: target.into(),
                n_train: p.n_train,
                n_test: p.n_test,
                trials: p.trials,
                mape: p.mape,
                kendall_tau: p.kendall_tau,
            });
        }
    }
    Ok(rows)
}

/// Scope for a mode, re-exported for callers that build codecs directly.
pub fn scope_of(mode: SearchMode) -> Scope {
    mode.scope()
}
