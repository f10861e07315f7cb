//! Dynamic programming over remaining-demand vectors.
//!
//! States are remaining demands `0 ≤ x ≤ n` in mixed radix (first job type
//! fastest). Each block is processed machine by machine; the reachable sets
//! after every machine are kept so that a solution can be reconstructed.

use super::{ConfIlpModel, DemandRelation, SolverLimits};

pub(super) enum DpError {
    /// State space or layer memory above the configured budget.
    TooLarge,
}

/// Column counts per block, or `None` when infeasible.
pub(super) type Solution = Option<Vec<Vec<(usize, u64)>>>;

/// Stored bits across all layers before giving up on the DP.
const LAYER_BIT_BUDGET: u64 = 1 << 30;

#[derive(Clone)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(len: usize) -> Self {
        BitSet {
            words: vec![0; len.div_ceil(64)],
        }
    }
    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }
    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }
    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }
    fn first(&self) -> Option<usize> {
        self.iter().next()
    }
}

pub(super) fn solve(model: &ConfIlpModel, limits: &SolverLimits) -> Result<Solution, DpError> {
    let d = model.demand.len();
    let mut strides = Vec::with_capacity(d);
    let mut total: u64 = 1;
    for &nj in &model.demand {
        strides.push(total as usize);
        total = total
            .checked_mul(nj + 1)
            .filter(|&t| t <= limits.max_states)
            .ok_or(DpError::TooLarge)?;
    }
    let states = total as usize;
    let job_total: u64 = model.demand.iter().sum();

    // Quick refusals that need no state space.
    for b in &model.blocks {
        if b.machines > 0 && b.columns.is_empty() {
            return Ok(None);
        }
        let has_zero = b.columns.iter().any(|c| c.is_zero());
        if b.machines > job_total && !has_zero {
            return Ok(None);
        }
    }

    // offset of a column in state index space
    let offsets: Vec<Vec<usize>> = model
        .blocks
        .iter()
        .map(|b| {
            b.columns
                .iter()
                .map(|c| c.counts.iter().zip(&strides).map(|(&k, &s)| k as usize * s).sum())
                .collect()
        })
        .collect();

    let decode = |idx: usize, out: &mut Vec<u64>| {
        let mut rest = idx;
        out.clear();
        for &nj in &model.demand {
            let r = (nj + 1) as usize;
            out.push((rest % r) as u64);
            rest /= r;
        }
    };

    let mut start = BitSet::new(states);
    start.set(states - 1); // full demand
    let mut layers: Vec<Vec<BitSet>> = Vec::with_capacity(model.blocks.len());
    let mut stored_bits: u64 = states as u64;
    let mut cur = start;
    let mut digits = Vec::with_capacity(d);
    for (bi, block) in model.blocks.iter().enumerate() {
        let mut block_layers = vec![cur.clone()];
        if block.machines == 0 {
            layers.push(block_layers);
            continue;
        }
        let has_zero = block.columns.iter().any(|c| c.is_zero());
        let steps = block.machines;
        let mut k = 0;
        while k < steps {
            let mut next = BitSet::new(states);
            for x in cur.iter() {
                decode(x, &mut digits);
                for (ci, col) in block.columns.iter().enumerate() {
                    if col.counts.iter().zip(&digits).all(|(c, x)| c <= x) {
                        next.set(x - offsets[bi][ci]);
                    }
                }
            }
            if next.is_empty() {
                return Ok(None);
            }
            k += 1;
            if has_zero && next.words == cur.words {
                // Further machines can idle: the set is stable from here on.
                break;
            }
            stored_bits += states as u64;
            if stored_bits > LAYER_BIT_BUDGET {
                return Err(DpError::TooLarge);
            }
            block_layers.push(next.clone());
            cur = next;
        }
        layers.push(block_layers);
    }

    let accept = match model.relation {
        DemandRelation::Exact => cur.get(0).then_some(0),
        DemandRelation::AtMost => cur.first(),
    };
    let Some(mut x) = accept else {
        return Ok(None);
    };

    // Backtrack: walk each block's layers in reverse, re-adding a column that
    // leads back into the previous layer.
    let mut solution = vec![Vec::new(); model.blocks.len()];
    for (bi, block) in model.blocks.iter().enumerate().rev() {
        let block_layers = &layers[bi];
        let explicit = (block_layers.len() - 1) as u64;
        let mut counts = vec![0u64; block.columns.len()];
        for k in (1..block_layers.len()).rev() {
            decode(x, &mut digits);
            let prev = &block_layers[k - 1];
            let found = block.columns.iter().enumerate().find(|(ci, col)| {
                col.counts
                    .iter()
                    .zip(&digits)
                    .zip(&model.demand)
                    .all(|((c, x), n)| c + x <= *n)
                    && prev.get(x + offsets[bi][*ci])
            });
            let (ci, _) = found.expect("DP layers are consistent");
            counts[ci] += 1;
            x += offsets[bi][ci];
        }
        if block.machines > explicit {
            let zero = block
                .columns
                .iter()
                .position(|c| c.is_zero())
                .expect("stabilized block has a zero column");
            counts[zero] += block.machines - explicit;
        }
        solution[bi] = counts
            .into_iter()
            .enumerate()
            .filter(|&(_, k)| k > 0)
            .collect();
    }
    debug_assert_eq!(x, states - 1);
    Ok(Some(solution))
}
