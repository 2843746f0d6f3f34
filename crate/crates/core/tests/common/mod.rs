//! Independent reference implementations used as test oracles, plus fuzz
//! generators. Shared with the acceptance harness in the `cimnet` crate.

#![allow(dead_code)]

use cimnet_core::dataflow::{Dataflow, Factors};
use cimnet_core::{simulate_layer, HardwareConfig, LayerSpec, Objectives};
use rand::Rng;

pub fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|&d| n.is_multiple_of(d)).collect()
}

/// 1, 2, 4, ... clipped at `n` (so `n` itself is always last).
pub fn pow2_clipped(n: u64) -> Vec<u64> {
    let mut out = vec![];
    let mut p = 1;
    while p < n {
        out.push(p);
        p *= 2;
    }
    out.push(n);
    out
}

/// Minimum cycles over every dataflow whose factors come from `values`,
/// placing groups first (`sg = min(G, nodes)`) and using at most the
/// machine's nodes. Temporal values are drawn per node extent. Returns
/// `None` when nothing fits.
pub fn brute_force_min_cycles(
    layer: &LayerSpec,
    cfg: &HardwareConfig,
    values: fn(u64) -> Vec<u64>,
) -> Option<u64> {
    let nodes = cfg.l1_num_child * cfg.ma_num_child;
    let sg = layer.groups.min(nodes);
    let mut best: Option<u64> = None;
    for si in values(layer.resolution) {
        for so in values(layer.out_channels) {
            for sic in values(layer.reduction) {
                if sg * si * so * sic > nodes {
                    continue;
                }
                let spatial = Factors::new(sg, si, so, sic);
                let eg = layer.groups.div_ceil(sg);
                let ei = layer.resolution.div_ceil(si);
                let eo = layer.out_channels.div_ceil(so);
                let eic = layer.reduction.div_ceil(sic);
                for tg in values(eg) {
                    for ti in values(ei) {
                        for to in values(eo) {
                            for tic in values(eic) {
                                let df = Dataflow {
                                    spatial,
                                    temporal: Factors::new(tg, ti, to, tic),
                                };
                                if let Ok(c) = simulate_layer(layer, cfg, &df) {
                                    best = Some(best.map_or(c.cycles, |b| b.min(c.cycles)));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

pub fn random_small_layer<R: Rng>(r: &mut R, i: usize) -> LayerSpec {
    let g = if r.gen_bool(0.3) { r.gen_range(2..=32) } else { 1 };
    LayerSpec::new(
        format!("l{i}"),
        g,
        r.gen_range(1..=32),
        r.gen_range(1..=32),
        r.gen_range(1..=32),
        [1, 2][r.gen_range(0..2)],
    )
    .unwrap()
}

/// A machine with at most 8 memory arrays and a small array memory, so
/// temporal chunking matters.
pub fn random_small_machine<R: Rng>(r: &mut R) -> HardwareConfig {
    let (l1, ma) = [
        (1, 1),
        (1, 2),
        (2, 1),
        (2, 2),
        (1, 3),
        (3, 2),
        (2, 4),
        (4, 2),
        (1, 8),
        (1, 5),
        (1, 7),
    ][r.gen_range(0..11)];
    HardwareConfig {
        dram_bw: r.gen_range(1..=64),
        l2_bw: r.gen_range(1..=64),
        l1_bw: r.gen_range(1..=64),
        l1_num_child: l1,
        ma_bw: r.gen_range(1..=64),
        ma_mem_size: [96, 256, 700, 2048, 8192, 65536][r.gen_range(0..6)],
        ma_num_child: ma,
        ma_comp_per_core: r.gen_range(1..=128),
    }
}

/// Kendall τ-b from tie-group sizes: `(C − D) / sqrt((n0 − n1)(n0 − n2))`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as i64;
    let n0 = n * (n - 1) / 2;
    let ties = |v: &[f64]| -> i64 {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let mut total = 0;
        let mut run = 1i64;
        for w in s.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    };
    let (mut c, mut d) = (0i64, 0i64);
    for i in 0..x.len() {
        for j in 0..i {
            let s = (x[i] - x[j]).signum() * (y[i] - y[j]).signum();
            if x[i] != x[j] && y[i] != y[j] {
                if s > 0.0 {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
    }
    (c - d) as f64 / (((n0 - ties(x)) as f64) * ((n0 - ties(y)) as f64)).sqrt()
}

fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a.accuracy >= b.accuracy && a.cycles <= b.cycles && (a.accuracy > b.accuracy || a.cycles < b.cycles)
}

/// Rank of every point by repeatedly peeling the non-dominated layer.
pub fn brute_force_ranks(pts: &[Objectives]) -> Vec<usize> {
    let mut rank = vec![usize::MAX; pts.len()];
    let mut level = 0;
    while rank.contains(&usize::MAX) {
        let layer: Vec<usize> = (0..pts.len())
            .filter(|&i| rank[i] == usize::MAX)
            .filter(|&i| !(0..pts.len()).any(|j| rank[j] == usize::MAX && dominates(&pts[j], &pts[i])))
            .collect();
        for i in layer {
            rank[i] = level;
        }
        level += 1;
    }
    rank
}

/// Gradient of `‖Xw + b − y‖² + λ‖w‖²` at `(w, b)`.
pub fn ridge_gradient(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, lambda: f64) -> Vec<f64> {
    let d = w.len();
    let mut g = vec![0.0; d + 1];
    for (row, &t) in x.iter().zip(y) {
        let r = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b - t;
        for k in 0..d {
            g[k] += 2.0 * r * row[k];
        }
        g[d] += 2.0 * r;
    }
    for k in 0..d {
        g[k] += 2.0 * lambda * w[k];
    }
    g
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}
