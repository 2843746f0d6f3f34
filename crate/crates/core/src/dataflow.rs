//! Per-layer dataflow compiler.
//!
//! A dataflow splits a layer's `(G, I, Oc, Ic)` extents spatially across
//! memory arrays, then chunks each node's tile temporally until a chunk's
//! double-buffered working set fits in array memory. Split factors come
//! from a power-of-two ladder clipped to each extent; uneven splits get
//! balanced tiles whose sizes differ by at most one.
//!
//! Groups are placed first: `sg = min(G, nodes)`, and only the remaining
//! node budget is spent on the other dimensions.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cim::{layer_cost, placement_free_terms, HardwareConfig, LayerCost};
use crate::workload::{LayerSpec, WorkloadError};

/// Split or chunk counts over `(G, I, Oc, Ic)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factors {
    pub groups: u64,
    pub resolution: u64,
    pub out_channels: u64,
    pub reduction: u64,
}

impl Factors {
    pub const ONE: Factors = Factors {
        groups: 1,
        resolution: 1,
        out_channels: 1,
        reduction: 1,
    };

    pub fn new(groups: u64, resolution: u64, out_channels: u64, reduction: u64) -> Self {
        Factors {
            groups,
            resolution,
            out_channels,
            reduction,
        }
    }

    pub fn product(&self) -> u64 {
        self.groups * self.resolution * self.out_channels * self.reduction
    }

    pub fn as_array(&self) -> [u64; 4] {
        [self.groups, self.resolution, self.out_channels, self.reduction]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dataflow {
    pub spatial: Factors,
    pub temporal: Factors,
}

impl Dataflow {
    pub fn single_node() -> Self {
        Dataflow {
            spatial: Factors::ONE,
            temporal: Factors::ONE,
        }
    }

    pub fn active_nodes(&self) -> u64 {
        self.spatial.product()
    }

    pub fn temporal_steps(&self) -> u64 {
        self.temporal.product()
    }
}

/// A candidate dataflow with its simulated cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileOption {
    pub dataflow: Dataflow,
    pub cost: LayerCost,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataflowError {
    #[error("layer `{layer}`: no tiling fits in {capacity} bytes of array memory")]
    Infeasible { layer: String, capacity: u64 },
    #[error("dataflow occupies {active} nodes but the machine has {nodes}")]
    TooManyNodes { active: u64, nodes: u64 },
    #[error("{kind} factor {factor} for `{dim}` is outside 1..={extent}")]
    FactorOutOfRange {
        kind: &'static str,
        dim: &'static str,
        factor: u64,
        extent: u64,
    },
    #[error("working set of {needed} bytes exceeds array memory of {capacity} bytes")]
    WorkingSet { needed: u64, capacity: u64 },
    #[error("hardware configuration has a zero-valued field")]
    ZeroConfig,
    #[error(transparent)]
    Layer(#[from] WorkloadError),
}

/// Something that picks a dataflow for a layer and reports its cost.
pub trait DataflowCompiler {
    fn compile(
        &self,
        layer: &LayerSpec,
        cfg: &HardwareConfig,
    ) -> Result<(Dataflow, LayerCost), DataflowError>;
}

/// Exhaustive ladder sweep; see [`compile_dataflow`].
#[derive(Clone, Copy, Debug, Default)]
pub struct AnalyticCompiler;

impl DataflowCompiler for AnalyticCompiler {
    fn compile(
        &self,
        layer: &LayerSpec,
        cfg: &HardwareConfig,
    ) -> Result<(Dataflow, LayerCost), DataflowError> {
        compile_dataflow(layer, cfg).map(|o| (o.dataflow, o.cost))
    }
}

/// Powers of two clipped to `extent`, keeping values `<= cap`.
pub fn ladder(extent: u64, cap: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 1u64;
    loop {
        let v = p.min(extent);
        if v > cap {
            break;
        }
        out.push(v);
        if p >= extent {
            break;
        }
        p *= 2;
    }
    out
}

fn extents(layer: &LayerSpec) -> [u64; 4] {
    [
        layer.groups,
        layer.resolution,
        layer.out_channels,
        layer.reduction,
    ]
}

/// Largest per-node tile extents under `spatial`.
pub fn node_extents(layer: &LayerSpec, spatial: &Factors) -> Factors {
    Factors {
        groups: layer.groups.div_ceil(spatial.groups),
        resolution: layer.resolution.div_ceil(spatial.resolution),
        out_channels: layer.out_channels.div_ceil(spatial.out_channels),
        reduction: layer.reduction.div_ceil(spatial.reduction),
    }
}

/// Double-buffered bytes of one IFM, weight and OFM chunk on the largest
/// node.
pub fn working_set_bytes(layer: &LayerSpec, spatial: &Factors, temporal: &Factors) -> u64 {
    let e = node_extents(layer, spatial);
    let g = e.groups.div_ceil(temporal.groups);
    let i = e.resolution.div_ceil(temporal.resolution);
    let o = e.out_channels.div_ceil(temporal.out_channels);
    let ic = e.reduction.div_ceil(temporal.reduction);
    2 * u64::from(layer.elem_bytes) * g * (i * ic + ic * o + i * o)
}

pub(crate) fn check_feasible(
    layer: &LayerSpec,
    cfg: &HardwareConfig,
    df: &Dataflow,
) -> Result<(), DataflowError> {
    layer.validate()?;
    if !cfg.is_positive() {
        return Err(DataflowError::ZeroConfig);
    }
    const DIMS: [&str; 4] = ["G", "I", "Oc", "Ic"];
    let ext = extents(layer);
    for ((&f, &e), dim) in df.spatial.as_array().iter().zip(&ext).zip(DIMS) {
        if f == 0 || f > e {
            return Err(DataflowError::FactorOutOfRange {
                kind: "spatial",
                dim,
                factor: f,
                extent: e,
            });
        }
    }
    let active = df.active_nodes();
    if active > cfg.nodes() {
        return Err(DataflowError::TooManyNodes {
            active,
            nodes: cfg.nodes(),
        });
    }
    let node = node_extents(layer, &df.spatial).as_array();
    for ((&f, &e), dim) in df.temporal.as_array().iter().zip(&node).zip(DIMS) {
        if f == 0 || f > e {
            return Err(DataflowError::FactorOutOfRange {
                kind: "temporal",
                dim,
                factor: f,
                extent: e,
            });
        }
    }
    let needed = working_set_bytes(layer, &df.spatial, &df.temporal);
    if needed > cfg.ma_mem_size {
        return Err(DataflowError::WorkingSet {
            needed,
            capacity: cfg.ma_mem_size,
        });
    }
    Ok(())
}

/// Spatial splits `(sg, si, so, sic)` with `sg = min(G, nodes)` and the
/// other factors drawn from their ladders within the remaining budget.
pub fn enumerate_spatial_tiles(layer: &LayerSpec, cfg: &HardwareConfig) -> Vec<Factors> {
    let nodes = cfg.nodes().max(1);
    let sg = layer.groups.min(nodes).max(1);
    let budget = nodes / sg;
    let mut out = Vec::new();
    for si in ladder(layer.resolution, budget) {
        for so in ladder(layer.out_channels, budget / si) {
            for sic in ladder(layer.reduction, budget / (si * so)) {
                out.push(Factors::new(sg, si, so, sic));
            }
        }
    }
    out
}

/// The minimal temporal chunkings that fit array memory: every returned
/// tuple fits, and halving any of its chunk counts overflows.
///
/// Chunking never reduces traffic, so a non-minimal chunking is never
/// cheaper than a minimal one below it and always takes more steps. The
/// list is ordered by total steps, then lexicographically; it is empty iff
/// even one-element chunks overflow.
pub fn enumerate_temporal_tiles(layer: &LayerSpec, cfg: &HardwareConfig, spatial: &Factors) -> Vec<Factors> {
    let e = node_extents(layer, spatial);
    let b = u64::from(layer.elem_bytes);
    let cap = cfg.ma_mem_size;
    if working_set_bytes(layer, spatial, &Factors::ONE) <= cap {
        return alloc::vec![Factors::ONE];
    }
    let lg = ladder(e.groups, u64::MAX);
    let li = ladder(e.resolution, u64::MAX);
    let lo = ladder(e.out_channels, u64::MAX);
    let lic = ladder(e.reduction, u64::MAX);

    // Smallest reduction chunk count (as a ladder index) that fits.
    let min_tic = |tg: u64, ti: u64, to: u64| -> Option<usize> {
        let g = e.groups.div_ceil(tg);
        let i = e.resolution.div_ceil(ti);
        let o = e.out_channels.div_ceil(to);
        let per = cap / (2 * b * g);
        let io = i * o;
        if per <= io {
            return None;
        }
        let ic_max = (per - io) / (i + o);
        if ic_max == 0 {
            return None;
        }
        lic.iter().position(|&t| e.reduction.div_ceil(t) <= ic_max)
    };

    let (ng, ni, no) = (lg.len(), li.len(), lo.len());
    let mut table: Vec<Option<usize>> = alloc::vec![None; ng * ni * no];
    let at = |g: usize, i: usize, o: usize| (g * ni + i) * no + o;
    for (gi, &tg) in lg.iter().enumerate() {
        for (ii, &ti) in li.iter().enumerate() {
            for (oi, &to) in lo.iter().enumerate() {
                table[at(gi, ii, oi)] = min_tic(tg, ti, to);
            }
        }
    }

    let mut out = Vec::new();
    for gi in 0..ng {
        for ii in 0..ni {
            for oi in 0..no {
                let Some(k) = table[at(gi, ii, oi)] else {
                    continue;
                };
                let dominated = (gi > 0 && table[at(gi - 1, ii, oi)] == Some(k))
                    || (ii > 0 && table[at(gi, ii - 1, oi)] == Some(k))
                    || (oi > 0 && table[at(gi, ii, oi - 1)] == Some(k));
                if !dominated {
                    out.push(Factors::new(lg[gi], li[ii], lo[oi], lic[k]));
                }
            }
        }
    }
    out.sort_by_key(|t| (t.product(), t.as_array()));
    out
}

/// Total preference order: fewer cycles, then fewer active nodes, then
/// fewer temporal steps, then lexicographic factors.
pub fn preference(a: &TileOption, b: &TileOption) -> Ordering {
    let key = |o: &TileOption| {
        (
            o.cost.cycles,
            o.dataflow.active_nodes(),
            o.dataflow.temporal_steps(),
            o.dataflow.spatial.as_array(),
            o.dataflow.temporal.as_array(),
        )
    };
    key(a).cmp(&key(b))
}

fn check_inputs(layer: &LayerSpec, cfg: &HardwareConfig) -> Result<(), DataflowError> {
    layer.validate()?;
    if !cfg.is_positive() {
        return Err(DataflowError::ZeroConfig);
    }
    Ok(())
}

/// Every spatial split paired with each of its minimal temporal chunkings,
/// best first.
pub fn option_table(layer: &LayerSpec, cfg: &HardwareConfig) -> Result<Vec<TileOption>, DataflowError> {
    check_inputs(layer, cfg)?;
    let mut out = Vec::new();
    for spatial in enumerate_spatial_tiles(layer, cfg) {
        for temporal in enumerate_temporal_tiles(layer, cfg, &spatial) {
            let dataflow = Dataflow { spatial, temporal };
            out.push(TileOption {
                dataflow,
                cost: layer_cost(layer, cfg, &dataflow),
            });
        }
    }
    out.sort_by(preference);
    Ok(out)
}

/// The latency-minimal dataflow for `layer` on `cfg`.
///
/// Equivalent to the head of [`option_table`], but skips spatial splits
/// whose placement-free lower bound already exceeds the best cost found.
pub fn compile_dataflow(layer: &LayerSpec, cfg: &HardwareConfig) -> Result<TileOption, DataflowError> {
    check_inputs(layer, cfg)?;
    let mut spatials = enumerate_spatial_tiles(layer, cfg);
    // Most nodes first: the compute term usually dominates and this finds
    // a tight incumbent early.
    spatials.sort_by_key(|s| core::cmp::Reverse(s.product()));

    let mut best: Option<TileOption> = None;
    for spatial in spatials {
        let probe = Dataflow {
            spatial,
            temporal: Factors::ONE,
        };
        let (c, d, l2, ma) = placement_free_terms(layer, cfg, &probe);
        let bound = c.max(d).max(l2).max(ma);
        if best.is_some_and(|b| bound > b.cost.cycles) {
            continue;
        }
        for temporal in enumerate_temporal_tiles(layer, cfg, &spatial) {
            let dataflow = Dataflow { spatial, temporal };
            if let Some(b) = &best {
                let (_, _, _, ma) = placement_free_terms(layer, cfg, &dataflow);
                if ma > b.cost.cycles {
                    continue;
                }
            }
            let cand = TileOption {
                dataflow,
                cost: layer_cost(layer, cfg, &dataflow),
            };
            if best.is_none_or(|b| preference(&cand, &b) == Ordering::Less) {
                best = Some(cand);
            }
        }
    }
    best.ok_or_else(|| DataflowError::Infeasible {
        layer: layer.name.clone(),
        capacity: cfg.ma_mem_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cim::{simulate_layer, HwParams};

    fn machine(l1: u64, ma: u64, mem: u64) -> HardwareConfig {
        HwParams {
            dram_bw: 64,
            l2_bw: 128,
            l1_bw: 32,
            l1_num_child: l1,
            ma_bw: 16,
            ma_mem_size: mem,
            ma_num_child: ma,
            ma_comp_per_core: 8,
        }
    }

    #[test]
    fn ladder_clips_to_extent() {
        assert_eq!(ladder(5, 8), alloc::vec![1, 2, 4, 5]);
        assert_eq!(ladder(5, 4), alloc::vec![1, 2, 4]);
        assert_eq!(ladder(1, 16), alloc::vec![1]);
        assert_eq!(ladder(8, 8), alloc::vec![1, 2, 4, 8]);
    }

    #[test]
    fn groups_saturate_nodes_first() {
        let layer = LayerSpec::new("dw", 16, 64, 9, 1, 1).unwrap();
        let tiles = enumerate_spatial_tiles(&layer, &machine(4, 4, 1 << 20));
        assert_eq!(tiles, alloc::vec![Factors::new(16, 1, 1, 1)]);
    }

    #[test]
    fn single_group_and_single_node() {
        let layer = LayerSpec::new("d", 1, 64, 64, 64, 1).unwrap();
        let tiles = enumerate_spatial_tiles(&layer, &machine(2, 4, 1 << 20));
        assert!(tiles.iter().all(|t| t.groups == 1 && t.product() <= 8));
        assert_eq!(tiles.len(), 20);
        let one = enumerate_spatial_tiles(&layer, &machine(1, 1, 1 << 20));
        assert_eq!(one, alloc::vec![Factors::ONE]);
    }

    #[test]
    fn whole_tile_fits_without_chunking() {
        let layer = LayerSpec::new("d", 1, 8, 8, 8, 1).unwrap();
        let t = enumerate_temporal_tiles(&layer, &machine(1, 1, 1 << 20), &Factors::ONE);
        assert_eq!(t, alloc::vec![Factors::ONE]);
    }

    #[test]
    fn memory_below_one_element_each_is_infeasible() {
        let layer = LayerSpec::new("d", 1, 8, 8, 8, 1).unwrap();
        // One IFM, weight and OFM element, double-buffered: 6 bytes.
        assert!(enumerate_temporal_tiles(&layer, &machine(1, 1, 5), &Factors::ONE).is_empty());
        assert!(!enumerate_temporal_tiles(&layer, &machine(1, 1, 6), &Factors::ONE).is_empty());
        assert!(matches!(
            compile_dataflow(&layer, &machine(1, 1, 5)),
            Err(DataflowError::Infeasible { .. })
        ));
    }

    #[test]
    fn reduction_only_chunking_needs_four() {
        // I = Oc = 1: only Ic can be chunked. Tile working set 2·(2·1024 + 1)
        // = 4098 bytes = 2.5× the 1639-byte memory.
        let layer = LayerSpec::new("r", 1, 1, 1024, 1, 1).unwrap();
        let cfg = machine(1, 1, 1639);
        let ws = working_set_bytes(&layer, &Factors::ONE, &Factors::ONE);
        assert!(ws as f64 / 1639.0 > 2.5 && (ws as f64 / 1639.0) < 2.51);
        // Oracle: smallest power of two whose chunk fits.
        let expected = (0..11)
            .map(|k| 1u64 << k)
            .find(|&t| working_set_bytes(&layer, &Factors::ONE, &Factors::new(1, 1, 1, t)) <= 1639)
            .unwrap();
        assert_eq!(expected, 4);
        let tiles = enumerate_temporal_tiles(&layer, &cfg, &Factors::ONE);
        assert_eq!(tiles.iter().map(|t| t.reduction).min(), Some(4));
    }

    #[test]
    fn temporal_tiles_are_minimal_and_fit() {
        let layer = LayerSpec::new("m", 3, 100, 70, 50, 2).unwrap();
        let cfg = machine(1, 2, 4096);
        for s in enumerate_spatial_tiles(&layer, &cfg) {
            let tiles = enumerate_temporal_tiles(&layer, &cfg, &s);
            assert!(!tiles.is_empty());
            for t in &tiles {
                assert!(working_set_bytes(&layer, &s, t) <= cfg.ma_mem_size);
                for other in &tiles {
                    let le = t.as_array().iter().zip(other.as_array()).all(|(a, b)| *a <= b);
                    assert!(!(le && t != other), "{t:?} dominates {other:?}");
                }
            }
        }
    }

    #[test]
    fn single_node_machine_compiles_to_unsplit_dataflow() {
        let layer = LayerSpec::new("d", 2, 16, 16, 16, 1).unwrap();
        let best = compile_dataflow(&layer, &machine(1, 1, 1 << 20)).unwrap();
        assert_eq!(best.dataflow, Dataflow::single_node());
    }

    #[test]
    fn compute_bound_layer_uses_every_node() {
        let layer = LayerSpec::new("c", 1, 256, 512, 256, 1).unwrap();
        let mut cfg = machine(2, 4, 1 << 24);
        cfg.ma_comp_per_core = 1;
        cfg.dram_bw = 1 << 20;
        cfg.l2_bw = 1 << 20;
        cfg.l1_bw = 1 << 20;
        cfg.ma_bw = 1 << 20;
        let best = compile_dataflow(&layer, &cfg).unwrap();
        assert_eq!(best.dataflow.active_nodes(), 8);
    }

    #[test]
    fn pruned_search_matches_full_table() {
        let layers = [
            LayerSpec::new("a", 1, 3136, 576, 64, 1).unwrap(),
            LayerSpec::new("b", 96, 3136, 9, 1, 1).unwrap(),
            LayerSpec::new("c", 1, 49, 960, 160, 1).unwrap(),
            LayerSpec::new("d", 12, 197, 64, 197, 1).unwrap(),
            LayerSpec::new("e", 1, 1, 1280, 1000, 1).unwrap(),
        ];
        for (l1, ma, mem) in [(2, 8, 8192), (8, 8, 32768), (16, 16, 65536), (4, 2, 2048)] {
            let cfg = machine(l1, ma, mem);
            for layer in &layers {
                let table = option_table(layer, &cfg).unwrap();
                let best = compile_dataflow(layer, &cfg).unwrap();
                assert_eq!(best, table[0], "{} on {l1}x{ma}", layer.name);
                for opt in &table {
                    assert!(best.cost.cycles <= opt.cost.cycles);
                }
                assert_eq!(simulate_layer(layer, &cfg, &best.dataflow).unwrap(), best.cost);
            }
        }
    }

    #[test]
    fn feasibility_errors() {
        let layer = LayerSpec::new("d", 1, 16, 16, 16, 1).unwrap();
        let cfg = machine(1, 2, 1 << 20);
        let too_many = Dataflow {
            spatial: Factors::new(1, 4, 1, 1),
            temporal: Factors::ONE,
        };
        assert!(matches!(
            simulate_layer(&layer, &cfg, &too_many),
            Err(DataflowError::TooManyNodes { active: 4, nodes: 2 })
        ));
        let out_of_range = Dataflow {
            spatial: Factors::new(2, 1, 1, 1),
            temporal: Factors::ONE,
        };
        assert!(matches!(
            simulate_layer(&layer, &cfg, &out_of_range),
            Err(DataflowError::FactorOutOfRange { dim: "G", .. })
        ));
        let small = machine(1, 1, 100);
        assert!(matches!(
            simulate_layer(&layer, &small, &Dataflow::single_node()),
            Err(DataflowError::WorkingSet { .. })
        ));
    }
}
