//! Memoized ground-truth evaluation.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use cimnet_core::accuracy::proxy_from_params;
use cimnet_core::cim::LayerCost;
use cimnet_core::dataflow::{compile_dataflow, DataflowError};
use cimnet_core::search::{Objectives, TrueEvaluator};
use cimnet_core::workload::{total_params, WorkloadError};
use cimnet_core::{
    simulate, Codec, CycleReport, Dataflow, DataflowCompiler, Genome, HardwareConfig, LayerSpec, ProxyParams,
    SubnetArch,
};

type LayerKey = (u64, u64, u64, u64, u32);
type Plan = Result<(Dataflow, LayerCost), DataflowError>;

fn key(l: &LayerSpec) -> LayerKey {
    (l.groups, l.resolution, l.reduction, l.out_channels, l.elem_bytes)
}

/// [`compile_dataflow`] memoized on layer shape and hardware configuration.
/// Names are not part of the key.
#[derive(Default)]
pub struct CachedCompiler {
    plans: RefCell<HashMap<(LayerKey, HardwareConfig), Plan>>,
    hits: Cell<u64>,
    misses: Cell<u64>,
}

impl CachedCompiler {
    pub fn new() -> Self {
        Self::default()
    }

    /// (hits, misses)
    pub fn stats(&self) -> (u64, u64) {
        (self.hits.get(), self.misses.get())
    }
}

impl DataflowCompiler for CachedCompiler {
    fn compile(
        &self,
        layer: &LayerSpec,
        cfg: &HardwareConfig,
    ) -> Result<(Dataflow, LayerCost), DataflowError> {
        let k = (key(layer), *cfg);
        if let Some(r) = self.plans.borrow().get(&k) {
            self.hits.set(self.hits.get() + 1);
            return match r {
                Ok(v) => Ok(*v),
                // Re-attach this layer's name to the cached failure.
                Err(DataflowError::Infeasible { capacity, .. }) => Err(DataflowError::Infeasible {
                    layer: layer.name.clone(),
                    capacity: *capacity,
                }),
                Err(e) => Err(e.clone()),
            };
        }
        self.misses.set(self.misses.get() + 1);
        let r = compile_dataflow(layer, cfg).map(|o| (o.dataflow, o.cost));
        self.plans.borrow_mut().insert(k, r.clone());
        r
    }
}

/// A fully evaluated (sub-network, configuration) pair.
#[derive(Debug, Clone)]
pub struct PairEval {
    /// Proxy accuracy.
    pub accuracy: f64,
    pub params: u64,
    pub report: CycleReport,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Dataflow(#[from] DataflowError),
}

/// Simulator cycles plus proxy accuracy, cached per genome.
pub struct Evaluator<'a> {
    codec: &'a Codec,
    proxy: ProxyParams,
    compiler: &'a CachedCompiler,
    canonical_params: u64,
    cache: HashMap<Genome, Option<Objectives>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        codec: &'a Codec,
        proxy: ProxyParams,
        compiler: &'a CachedCompiler,
    ) -> Result<Self, WorkloadError> {
        proxy.validate()?;
        let space = codec.arch_space();
        let canonical_params = total_params(&space.lower(&space.canonical())?);
        Ok(Evaluator {
            codec,
            proxy,
            compiler,
            canonical_params,
            cache: HashMap::new(),
        })
    }

    pub fn codec(&self) -> &Codec {
        self.codec
    }

    /// Evaluates any pair, regardless of the codec's scope.
    pub fn evaluate_pair(&self, subnet: &SubnetArch, cfg: &HardwareConfig) -> Result<PairEval, EvalError> {
        let space = self.codec.arch_space();
        let layers = space.lower(subnet)?;
        let params = total_params(&layers);
        let report = simulate(&layers, cfg, self.compiler)?;
        let accuracy = proxy_from_params(
            subnet,
            params,
            self.canonical_params,
            self.proxy.capacity_scale.get(space.family),
            &self.proxy,
        );
        Ok(PairEval {
            accuracy,
            params,
            report,
        })
    }

    pub fn evaluate_genome(&mut self, g: &Genome) -> Option<Objectives> {
        if let Some(v) = self.cache.get(g) {
            return *v;
        }
        let v = self
            .codec
            .decode(g)
            .ok()
            .and_then(|(s, c)| match self.evaluate_pair(&s, &c) {
                Ok(e) => Some(Objectives::new(e.accuracy, e.report.total_cycles as f64)),
                Err(err) => {
                    log::debug!("genome {} infeasible: {err}", g.id());
                    None
                }
            });
        self.cache.insert(g.clone(), v);
        v
    }

    pub fn unique_evaluations(&self) -> usize {
        self.cache.len()
    }
}

impl TrueEvaluator for Evaluator<'_> {
    fn evaluate(&mut self, genomes: &[Genome]) -> Vec<Option<Objectives>> {
        genomes.iter().map(|g| self.evaluate_genome(g)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cimnet_core::search::SimulatorOracle;
    use cimnet_core::{AnalyticCompiler, ArchSpace, ConfigSpace, Scope};

    #[test]
    fn cached_matches_uncached() {
        let codec = Codec::new(ArchSpace::mbv3(), ConfigSpace::default(), Scope::JOINT).unwrap();
        let compiler = CachedCompiler::new();
        let mut ev = Evaluator::new(&codec, ProxyParams::default(), &compiler).unwrap();
        let direct = SimulatorOracle::new(&codec, ProxyParams::default(), &AnalyticCompiler).unwrap();
        let mut r = cimnet_core::rng::seeded(8);
        for _ in 0..10 {
            let g = codec.sample(&mut r);
            assert_eq!(ev.evaluate_genome(&g), direct.evaluate_one(&g));
            assert_eq!(ev.evaluate_genome(&g), direct.evaluate_one(&g));
        }
        assert!(compiler.stats().0 > 0);
    }
}
