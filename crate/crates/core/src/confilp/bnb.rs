//! Depth-first branch and bound on column counts, used when the demand
//! state space is too large for the DP.
//!
//! Blocks are filled one after another and columns in order; at each node the
//! remaining machines give an interval bound on every job type's usage and on
//! the total load, which prunes most branches.

use super::{ConfIlpModel, DemandRelation, SolverLimits};
use crate::error::{Error, Result};

struct Bounds {
    /// `col_min[b][i][j]` = min over columns `i..` of block `b` of count `j`.
    col_min: Vec<Vec<Vec<u64>>>,
    col_max: Vec<Vec<Vec<u64>>>,
    load_min: Vec<Vec<u64>>,
    load_max: Vec<Vec<u64>>,
    /// Usage bounds contributed by all blocks after `b`.
    after_min: Vec<Vec<u128>>,
    after_max: Vec<Vec<u128>>,
    after_load_min: Vec<u128>,
    after_load_max: Vec<u128>,
}

fn bounds(model: &ConfIlpModel) -> Bounds {
    let d = model.demand.len();
    let nb = model.blocks.len();
    let mut col_min = Vec::with_capacity(nb);
    let mut col_max = Vec::with_capacity(nb);
    let mut load_min = Vec::with_capacity(nb);
    let mut load_max = Vec::with_capacity(nb);
    for b in &model.blocks {
        let k = b.columns.len();
        let mut mn = vec![vec![u64::MAX; d]; k + 1];
        let mut mx = vec![vec![0; d]; k + 1];
        let mut lmn = vec![u64::MAX; k + 1];
        let mut lmx = vec![0; k + 1];
        for i in (0..k).rev() {
            let c = &b.columns[i];
            for j in 0..d {
                mn[i][j] = mn[i + 1][j].min(c.counts[j]);
                mx[i][j] = mx[i + 1][j].max(c.counts[j]);
            }
            lmn[i] = lmn[i + 1].min(c.load);
            lmx[i] = lmx[i + 1].max(c.load);
        }
        col_min.push(mn);
        col_max.push(mx);
        load_min.push(lmn);
        load_max.push(lmx);
    }
    let mut after_min = vec![vec![0u128; d]; nb + 1];
    let mut after_max = vec![vec![0u128; d]; nb + 1];
    let mut after_load_min = vec![0u128; nb + 1];
    let mut after_load_max = vec![0u128; nb + 1];
    for b in (0..nb).rev() {
        let m = model.blocks[b].machines as u128;
        let has = !model.blocks[b].columns.is_empty();
        for j in 0..d {
            let lo = if has { col_min[b][0][j] as u128 } else { 0 };
            let hi = if has { col_max[b][0][j] as u128 } else { 0 };
            after_min[b][j] = after_min[b + 1][j] + m * lo;
            after_max[b][j] = after_max[b + 1][j] + m * hi;
        }
        let lo = if has { load_min[b][0] as u128 } else { 0 };
        let hi = if has { load_max[b][0] as u128 } else { 0 };
        after_load_min[b] = after_load_min[b + 1] + m * lo;
        after_load_max[b] = after_load_max[b + 1] + m * hi;
    }
    Bounds {
        col_min,
        col_max,
        load_min,
        load_max,
        after_min,
        after_max,
        after_load_min,
        after_load_max,
    }
}

struct Search<'a> {
    model: &'a ConfIlpModel,
    bounds: Bounds,
    nodes: u64,
    max_nodes: u64,
    chosen: Vec<Vec<(usize, u64)>>,
}

impl Search<'_> {
    /// Can blocks `b..` (with `rem` machines left in block `b`, restricted to
    /// columns `i..`) still meet the remaining demand `r`?
    fn promising(&self, b: usize, i: usize, rem: u64, r: &[u64], load: u64) -> bool {
        let bd = &self.bounds;
        let rem = rem as u128;
        let exact = self.model.relation == DemandRelation::Exact;
        for (j, &rj) in r.iter().enumerate() {
            let lo = rem * bd.col_min[b][i][j] as u128 + bd.after_min[b + 1][j];
            if lo > rj as u128 {
                return false;
            }
            if exact {
                let hi = rem * bd.col_max[b][i][j] as u128 + bd.after_max[b + 1][j];
                if hi < rj as u128 {
                    return false;
                }
            }
        }
        let lo = rem * bd.load_min[b][i] as u128 + bd.after_load_min[b + 1];
        if lo > load as u128 {
            return false;
        }
        if exact {
            let hi = rem * bd.load_max[b][i] as u128 + bd.after_load_max[b + 1];
            if hi < load as u128 {
                return false;
            }
        }
        true
    }

    /// Places the `rem` remaining machines of block `b` on columns `i..`,
    /// each frame committing one column with a positive count.
    fn dfs(&mut self, b: usize, i: usize, rem: u64, r: &mut Vec<u64>, load: u64) -> Result<bool> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(Error::ResourceLimit(format!(
                "branch and bound exceeded {} nodes",
                self.max_nodes
            )));
        }
        let model = self.model;
        if b == model.blocks.len() {
            return Ok(match model.relation {
                DemandRelation::Exact => r.iter().all(|&x| x == 0),
                DemandRelation::AtMost => true,
            });
        }
        if rem == 0 {
            let next_rem = model.blocks.get(b + 1).map_or(0, |nb| nb.machines);
            return self.dfs(b + 1, 0, next_rem, r, load);
        }
        let block = &model.blocks[b];
        for ci in i..block.columns.len() {
            // The bounds only tighten as `ci` grows.
            if !self.promising(b, ci, rem, r, load) {
                break;
            }
            let col = &block.columns[ci];
            let mut most = rem;
            for (c, &x) in col.counts.iter().zip(r.iter()) {
                if *c > 0 {
                    most = most.min(x / c);
                }
            }
            for k in (1..=most).rev() {
                for (x, c) in r.iter_mut().zip(&col.counts) {
                    *x -= c * k;
                }
                let found = self.dfs(b, ci + 1, rem - k, r, load - col.load * k)?;
                for (x, c) in r.iter_mut().zip(&col.counts) {
                    *x += c * k;
                }
                if found {
                    self.chosen[b].push((ci, k));
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

pub(super) fn solve(model: &ConfIlpModel, limits: &SolverLimits) -> Result<super::dp::Solution> {
    if model.blocks.iter().any(|b| b.machines > 0 && b.columns.is_empty()) {
        return Ok(None);
    }
    let mut search = Search {
        model,
        bounds: bounds(model),
        nodes: 0,
        max_nodes: limits.max_nodes,
        chosen: vec![Vec::new(); model.blocks.len()],
    };
    let mut r = model.demand.clone();
    let load: u64 = r.iter().zip(&model.p).map(|(a, b)| a * b).sum();
    let first = model.blocks.first().map_or(0, |b| b.machines);
    if search.dfs(0, 0, first, &mut r, load)? {
        let mut chosen = search.chosen;
        for c in &mut chosen {
            c.reverse();
        }
        Ok(Some(chosen))
    } else {
        Ok(None)
    }
}
