//! Instance-level reductions: the lcm constants, the cutting construction,
//! load-window decomposition, threshold normalization and machine compression.

use std::collections::VecDeque;

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::model::{dot, Configuration, HMSchedule, Instance, Relation, ScheduleEntry};
use crate::rational::{ceil_u64, floor_u64, lcm_big, Rational};

/// `delta = lcm(p)` and `gamma = d · pmax · delta`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionConstants {
    pub delta: BigUint,
    pub gamma: BigUint,
}

impl ReductionConstants {
    pub fn delta_u64(&self) -> Option<u64> {
        self.delta.to_u64()
    }

    pub fn gamma_u64(&self) -> Option<u64> {
        self.gamma.to_u64()
    }

    /// `(delta, gamma)` when both fit into 64 bits and `gamma + delta` does too.
    pub fn small(&self) -> Option<(u64, u64)> {
        let delta = self.delta_u64()?;
        let gamma = self.gamma_u64()?;
        gamma.checked_add(delta)?;
        Some((delta, gamma))
    }
}

pub fn constants(p: &[u64]) -> ReductionConstants {
    let delta = lcm_big(p.iter().copied());
    let pmax = p.iter().copied().max().unwrap_or(1);
    let gamma = &delta * BigUint::from(p.len() as u64) * BigUint::from(pmax);
    ReductionConstants { delta, gamma }
}

/// Finds `w̄ ≤ w` with `p·w̄ = lcm(p)`, given `p·w ≥ d·pmax·lcm(p)`.
///
/// Some job type carries at least a `1/d` share of the load, hence at least
/// `pmax·delta ≥ delta`; `delta / p_j` copies of it form the witness.
pub fn cut(w: &[u64], p: &[u64]) -> Result<Vec<u64>> {
    if w.len() != p.len() {
        return Err(Error::Malformed("cut: w and p differ in length".into()));
    }
    let k = constants(p);
    let load = BigUint::from(dot(w, p));
    if load < k.gamma {
        return Err(Error::Domain(format!(
            "cut requires p·w ≥ {} but p·w = {load}",
            k.gamma
        )));
    }
    // load fits in u64 and delta ≤ gamma ≤ load.
    let delta = k.delta_u64().expect("delta bounded by p·w");
    let (j, _) = w
        .iter()
        .zip(p)
        .map(|(&wj, &pj)| wj * pj)
        .enumerate()
        .fold((0, 0), |best, (j, l)| if l > best.1 { (j, l) } else { best });
    let mut out = vec![0; w.len()];
    out[j] = delta / p[j];
    debug_assert!(out[j] <= w[j]);
    Ok(out)
}

/// Result of decomposing a load window `[l, u]` into `exact_blocks` pieces of
/// load exactly `delta` (or at least `delta` when `u = ∞`), `slack_blocks`
/// pieces of load at most `delta`, and a core window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReducedWindow {
    pub exact_blocks: u64,
    pub slack_blocks: u64,
    pub core_lower: u64,
    /// `None` is an unbounded window.
    pub core_upper: Option<u64>,
}

impl ReducedWindow {
    pub fn unchanged(l: u64, u: Option<u64>) -> Self {
        ReducedWindow {
            exact_blocks: 0,
            slack_blocks: 0,
            core_lower: l,
            core_upper: u,
        }
    }
}

/// Applies the lower-bound rule while `l ≥ gamma`, then the width rule while
/// `u − l ≥ gamma + delta`. For `u = ∞` only the unbounded lower rule applies.
pub fn reduce_window(l: u64, u: Option<u64>, k: &ReductionConstants) -> ReducedWindow {
    debug_assert!(u.is_none_or(|u| l <= u));
    let Some((delta, gamma)) = k.small() else {
        // Every 64-bit window is already below the thresholds.
        return ReducedWindow::unchanged(l, u);
    };
    let mut exact = 0;
    let mut lower = l;
    if lower >= gamma {
        exact = (lower - gamma) / delta + 1;
        lower -= exact * delta;
    }
    let Some(upper) = u else {
        return ReducedWindow {
            exact_blocks: exact,
            slack_blocks: 0,
            core_lower: lower,
            core_upper: None,
        };
    };
    let mut upper = upper - exact * delta;
    let mut slack = 0;
    if upper - lower >= gamma + delta {
        slack = (upper - lower - (gamma + delta)) / delta + 1;
        upper -= slack * delta;
    }
    ReducedWindow {
        exact_blocks: exact,
        slack_blocks: slack,
        core_lower: lower,
        core_upper: Some(upper),
    }
}

/// Rescales speeds so that `rel`-feasibility at threshold `t` becomes
/// `rel`-feasibility at threshold 1.
///
/// `≤`: `s'_t = min(floor(T·s_t), 1 + p·n)`. `≥`: `s'_t = min(ceil(T·s_t), 1 + p·n)`.
/// Loads are integers, so rounding is lossless; a machine asked for more than
/// the total load is unsatisfiable either way, so the clamp keeps the verdict.
pub fn normalize(inst: &Instance, rel: Relation, threshold: &Rational) -> Instance {
    let clamp = inst.total_load().saturating_add(1);
    let speeds = inst
        .s
        .iter()
        .map(|&s| {
            let cap = threshold * Rational::from_integer(BigInt::from(s));
            let v = match rel {
                Relation::Le => floor_u64(&cap),
                Relation::Ge => ceil_u64(&cap),
            };
            v.min(clamp)
        })
        .collect();
    inst.with_speeds(speeds)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeCompression {
    pub machines: u64,
    pub original_speed: u64,
    pub residual_speed: u64,
    /// Machines of speed `delta` split off each original machine.
    pub delta_machines: u64,
    pub compressed_type: usize,
}

/// How each original machine type maps into the compressed instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressionMap {
    pub delta: u64,
    pub types: Vec<TypeCompression>,
    /// Compressed type that receives the split-off `delta`-speed machines.
    pub delta_type: Option<usize>,
    pub compressed_counts: Vec<u64>,
}

impl CompressionMap {
    pub fn is_identity(&self) -> bool {
        self.delta_type.is_none()
            && self
                .types
                .iter()
                .enumerate()
                .all(|(t, c)| c.compressed_type == t && c.residual_speed == c.original_speed)
    }
}

/// Replaces every machine of speed `s ≥ gamma + delta` by
/// `ceil((s − gamma − delta)/delta)` machines of speed `delta` and one residual
/// machine. Types of equal speed are merged, in order of first appearance, and
/// the `delta` type is appended once if it does not already exist.
///
/// Preserves both `≤1`- and `≥1`-feasibility. Only defined for unrestricted
/// instances.
pub fn compress(inst: &Instance) -> Result<(Instance, CompressionMap)> {
    if inst.restrict.is_some() {
        return Err(Error::Malformed(
            "compression is only defined for unrestricted instances".into(),
        ));
    }
    let k = constants(&inst.p);
    let small = k.small();
    let delta = small.map_or(0, |(d, _)| d);

    let mut speeds: Vec<u64> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let slot = |speed: u64, speeds: &mut Vec<u64>, counts: &mut Vec<u64>| -> usize {
        match speeds.iter().position(|&s| s == speed) {
            Some(i) => i,
            None => {
                speeds.push(speed);
                counts.push(0);
                speeds.len() - 1
            }
        }
    };

    let mut types = Vec::with_capacity(inst.tau());
    let mut split_total = 0u64;
    for t in 0..inst.tau() {
        let s = inst.s[t];
        let (residual, pieces) = match small {
            Some((delta, gamma)) if s >= gamma + delta => {
                let pieces = (s - gamma - delta).div_ceil(delta);
                (s - pieces * delta, pieces)
            }
            _ => (s, 0),
        };
        let c = slot(residual, &mut speeds, &mut counts);
        counts[c] += inst.m[t];
        split_total += pieces * inst.m[t];
        types.push(TypeCompression {
            machines: inst.m[t],
            original_speed: s,
            residual_speed: residual,
            delta_machines: pieces,
            compressed_type: c,
        });
    }
    let delta_type = (split_total > 0).then(|| {
        let c = slot(delta, &mut speeds, &mut counts);
        counts[c] += split_total;
        c
    });

    let compressed = Instance {
        p: inst.p.clone(),
        n: inst.n.clone(),
        s: speeds,
        m: counts.clone(),
        restrict: None,
    };
    Ok((
        compressed,
        CompressionMap {
            delta,
            types,
            delta_type,
            compressed_counts: counts,
        },
    ))
}

/// Reassembles a schedule of the compressed instance into one for the
/// original types: each original machine receives one configuration of its
/// residual type plus one configuration per split-off `delta` machine.
pub fn lift_schedule(sched: &HMSchedule, cmap: &CompressionMap) -> Result<HMSchedule> {
    let tau_c = cmap.compressed_counts.len();
    let mut pools: Vec<VecDeque<(Configuration, u64)>> = vec![VecDeque::new(); tau_c];
    for e in sched.canonical().entries {
        if e.machine_type >= tau_c {
            return Err(Error::Malformed(format!(
                "schedule references compressed type {} of {tau_c}",
                e.machine_type
            )));
        }
        pools[e.machine_type].push_back((e.config, e.count));
    }
    for (c, pool) in pools.iter().enumerate() {
        let have: u64 = pool.iter().map(|(_, k)| k).sum();
        if have != cmap.compressed_counts[c] {
            return Err(Error::Malformed(format!(
                "compressed type {c}: schedule has {have} machines, map expects {}",
                cmap.compressed_counts[c]
            )));
        }
    }

    fn take(pool: &mut VecDeque<(Configuration, u64)>, want: u64) -> Option<(Configuration, u64)> {
        let front = pool.front_mut()?;
        let k = want.min(front.1);
        let cfg = front.0.clone();
        front.1 -= k;
        if front.1 == 0 {
            pool.pop_front();
        }
        Some((cfg, k))
    }

    let mut entries = Vec::new();
    let inconsistent = || Error::Malformed("schedule inconsistent with compression map".into());
    for (t, tc) in cmap.types.iter().enumerate() {
        let mut remaining = tc.machines;
        while remaining > 0 {
            if tc.delta_machines == 0 {
                let (cfg, k) = take(&mut pools[tc.compressed_type], remaining).ok_or_else(inconsistent)?;
                entries.push(ScheduleEntry {
                    machine_type: t,
                    config: cfg,
                    count: k,
                });
                remaining -= k;
            } else {
                let (mut cfg, _) = take(&mut pools[tc.compressed_type], 1).ok_or_else(inconsistent)?;
                let dt = cmap.delta_type.ok_or_else(inconsistent)?;
                for _ in 0..tc.delta_machines {
                    let (piece, _) = take(&mut pools[dt], 1).ok_or_else(inconsistent)?;
                    cfg = cfg.add(&piece);
                }
                entries.push(ScheduleEntry {
                    machine_type: t,
                    config: cfg,
                    count: 1,
                });
                remaining -= 1;
            }
        }
    }
    if pools.iter().any(|p| !p.is_empty()) {
        return Err(inconsistent());
    }
    Ok(HMSchedule::new(entries).canonical())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::verify_schedule;
    use crate::model::FeasibilityQuery;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn small(p: &[u64]) -> (u64, u64) {
        constants(p).small().unwrap()
    }

    #[test]
    fn constants_examples() {
        assert_eq!(small(&[2, 3]), (6, 36));
        assert_eq!(small(&[1]), (1, 1));
        assert_eq!(small(&[4, 6]), (12, 144));
    }

    #[test]
    fn cut_examples() {
        assert_eq!(cut(&[18, 0], &[2, 3]).unwrap(), vec![3, 0]);
        assert_eq!(cut(&[1], &[1]).unwrap(), vec![1]);
        let w = cut(&[12, 4], &[2, 3]).unwrap();
        assert!(w[0] <= 12 && w[1] <= 4);
        assert_eq!(dot(&w, &[2, 3]), 6);
        assert!(matches!(cut(&[1, 1], &[2, 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn reduce_window_examples() {
        let k = constants(&[2, 3]);
        assert_eq!(
            reduce_window(40, Some(100), &k),
            ReducedWindow {
                exact_blocks: 1,
                slack_blocks: 4,
                core_lower: 34,
                core_upper: Some(70)
            }
        );
        assert_eq!(reduce_window(0, Some(5), &k), ReducedWindow::unchanged(0, Some(5)));
        // Stops at the first lower bound below gamma: 72 - 7·6 = 30.
        assert_eq!(
            reduce_window(72, None, &k),
            ReducedWindow {
                exact_blocks: 7,
                slack_blocks: 0,
                core_lower: 30,
                core_upper: None
            }
        );
    }

    #[test]
    fn normalize_examples() {
        let three_machines = Instance::new(vec![1], vec![7], vec![15, 13, 11], vec![1, 1, 1], None).unwrap();
        assert_eq!(normalize(&three_machines, Relation::Le, &ratio(1, 5)).s, vec![3, 2, 2]);
        assert_eq!(normalize(&three_machines, Relation::Le, &int(0)).s, vec![0, 0, 0]);
        assert_eq!(normalize(&three_machines, Relation::Le, &int(10)).s, vec![8, 8, 8]);
        let one = Instance::new(vec![2], vec![3], vec![4], vec![1], None).unwrap();
        assert_eq!(normalize(&one, Relation::Ge, &ratio(3, 2)).s, vec![6]);
    }

    #[test]
    fn compress_examples() {
        let inst = Instance::new(vec![1], vec![5], vec![5], vec![1], None).unwrap();
        let (c, map) = compress(&inst).unwrap();
        assert_eq!((c.s.clone(), c.m.clone()), (vec![2, 1], vec![1, 3]));
        assert_eq!(map.types[0].delta_machines, 3);
        assert_eq!(map.delta_type, Some(1));

        let inst = Instance::new(vec![2, 3], vec![1, 1], vec![100], vec![1], None).unwrap();
        let (c, _) = compress(&inst).unwrap();
        assert_eq!((c.s, c.m), (vec![40, 6], vec![1, 10]));

        let inst = Instance::new(vec![2, 3], vec![1, 1], vec![41, 7], vec![2, 1], None).unwrap();
        let (c, map) = compress(&inst).unwrap();
        assert_eq!(c, inst);
        assert!(map.is_identity());
    }

    #[test]
    fn compress_merges_equal_residuals() {
        // p=(1): speeds 5 and 6 both leave residual 2 (5-3, 6-4).
        let inst = Instance::new(vec![1], vec![3], vec![5, 6, 2], vec![1, 2, 1], None).unwrap();
        let (c, map) = compress(&inst).unwrap();
        assert_eq!(c.s, vec![2, 1]);
        assert_eq!(c.m, vec![4, 3 + 2 * 4]);
        assert_eq!(map.types.iter().map(|t| t.compressed_type).collect::<Vec<_>>(), vec![0, 0, 0]);
    }

    #[test]
    fn lift_merges_pieces() {
        let inst = Instance::new(vec![1], vec![5], vec![5], vec![1], None).unwrap();
        let (c, map) = compress(&inst).unwrap();
        let p = [1];
        let sched = HMSchedule::from_machines([
            (0, Configuration::new(vec![2], &p)),
            (1, Configuration::new(vec![1], &p)),
            (1, Configuration::new(vec![1], &p)),
            (1, Configuration::new(vec![1], &p)),
        ]);
        assert!(verify_schedule(&c, &sched, &FeasibilityQuery::makespan(int(1))).unwrap().ok);
        let lifted = lift_schedule(&sched, &map).unwrap();
        assert_eq!(lifted.entries.len(), 1);
        assert_eq!(lifted.entries[0].config.load, 5);
        assert!(verify_schedule(&inst, &lifted, &FeasibilityQuery::makespan(int(1))).unwrap().ok);

        let short = HMSchedule::from_machines([(0, Configuration::new(vec![2], &p))]);
        assert!(matches!(lift_schedule(&short, &map), Err(Error::Malformed(_))));
    }

    #[test]
    fn lift_identity() {
        let inst = Instance::new(vec![2, 3], vec![2, 1], vec![7, 9], vec![1, 1], None).unwrap();
        let (_, map) = compress(&inst).unwrap();
        let p = [2, 3];
        let sched = HMSchedule::from_machines([
            (0, Configuration::new(vec![2, 0], &p)),
            (1, Configuration::new(vec![0, 1], &p)),
        ]);
        assert_eq!(lift_schedule(&sched, &map).unwrap(), sched);
    }

    proptest! {
        #[test]
        fn cut_postcondition(p in prop::collection::vec(1u64..=8, 1..=3), seed in prop::collection::vec(0u64..400, 3)) {
            let (delta, gamma) = small(&p);
            let mut w: Vec<u64> = seed[..p.len()].to_vec();
            // Top up until the precondition holds.
            let load = dot(&w, &p);
            if load < gamma {
                w[0] += (gamma - load).div_ceil(p[0]);
            }
            let cutw = cut(&w, &p).unwrap();
            prop_assert!(cutw.iter().zip(&w).all(|(a, b)| a <= b));
            prop_assert_eq!(dot(&cutw, &p), delta);
        }

        #[test]
        fn compress_is_idempotent_and_bounded(
            p in prop::collection::vec(1u64..=4, 1..=2),
            speeds in prop::collection::vec(1u64..300, 1..=3),
            nj in 0u64..20,
        ) {
            let d = p.len();
            let tau = speeds.len();
            let total = dot(&p, &vec![nj; d]);
            // The machine-count bound needs speeds normalized to at most 1 + p·n.
            let speeds = speeds.into_iter().map(|s| s.min(total + 1)).collect();
            let inst = Instance::new(p.clone(), vec![nj; d], speeds, vec![1; tau], None).unwrap();
            let (delta, gamma) = small(&p);
            let (c, map) = compress(&inst).unwrap();
            prop_assert!(c.smax() <= gamma + delta);
            prop_assert!(c.tau() as u64 <= (1 + gamma + delta).min(1 + tau as u64));
            prop_assert!(c.machine_count() <= (2 + total) * inst.machine_count());
            prop_assert_eq!(map.types.len(), tau);
            let (again, map2) = compress(&c).unwrap();
            prop_assert_eq!(again, c);
            prop_assert!(map2.is_identity());
        }
    }
}
