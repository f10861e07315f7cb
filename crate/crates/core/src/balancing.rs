//! Fractional schedules on large machines and the balancing tools built on
//! them: `σ̂`, its guessable approximation `σ̃`, the reduced preassignment
//! `σ̌`, the `Cmin` conversion and the Mnich vector.
//!
//! A machine is large when its speed is at least `r0 = d·pmax·(4 + pmax)`.
//! Area 1 of a machine is its first `r0` units of capacity, area 2 the rest.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{HMSchedule, Instance};
use crate::rational::{int, Rational};

/// `r0 = d·pmax·(4 + pmax)`.
pub fn r0(d: usize, pmax: u64) -> u64 {
    d as u64 * pmax * (4 + pmax)
}

/// Per-type rational job multiplicities, split into the three phases.
///
/// Phases 1a and 1b are identical on every machine; phase 2 is proportional
/// to each type's share `w_t` of area 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FractionalSchedule {
    pub p: Vec<u64>,
    pub speeds: Vec<u64>,
    pub counts: Vec<u64>,
    pub r0: u64,
    pub phase_1a: Vec<Rational>,
    pub phase_1b: Vec<Rational>,
    /// `phase_2[t][j]`.
    pub phase_2: Vec<Vec<Rational>>,
    /// `w_t = (s_t − r0)/A₀`; zero when `A₀ = 0` or the type has no machines.
    pub weights: Vec<Rational>,
    /// `A₀ = Σ_i (s_i − r0)`, the size of area 2.
    pub area_2: u64,
}

impl FractionalSchedule {
    pub fn d(&self) -> usize {
        self.p.len()
    }

    pub fn tau(&self) -> usize {
        self.speeds.len()
    }

    /// Multiplicity of job type `j` on each machine of type `t`.
    pub fn value(&self, t: usize, j: usize) -> Rational {
        &self.phase_1a[j] + &self.phase_1b[j] + &self.phase_2[t][j]
    }

    pub fn row(&self, t: usize) -> Vec<Rational> {
        (0..self.d()).map(|j| self.value(t, j)).collect()
    }

    /// Phase 1 (1a + 1b) of job type `j`.
    pub fn phase_1(&self, j: usize) -> Rational {
        &self.phase_1a[j] + &self.phase_1b[j]
    }

    /// `p·σ_t`, the load on one machine of type `t`.
    pub fn load(&self, t: usize) -> Rational {
        weighted(&self.p, &self.row(t))
    }

    pub fn phase_2_load(&self, t: usize) -> Rational {
        weighted(&self.p, &self.phase_2[t])
    }

    pub fn phase_1_load(&self) -> Rational {
        let row: Vec<Rational> = (0..self.d()).map(|j| self.phase_1(j)).collect();
        weighted(&self.p, &row)
    }

    /// `Σ_i σ_i`, summed over all machines.
    pub fn total(&self) -> Vec<Rational> {
        (0..self.d())
            .map(|j| {
                (0..self.tau())
                    .map(|t| self.value(t, j) * int(self.counts[t]))
                    .fold(Rational::zero(), |a, b| a + b)
            })
            .collect()
    }

    /// Types that have at least one machine.
    pub fn present_types(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tau()).filter(move |&t| self.counts[t] > 0)
    }
}

fn weighted(p: &[u64], row: &[Rational]) -> Rational {
    row.iter()
        .zip(p)
        .map(|(x, &pj)| x * int(pj))
        .fold(Rational::zero(), |a, b| a + b)
}

/// Lowest-index type with a machine of maximal speed.
pub fn imax_type(speeds: &[u64], counts: &[u64]) -> Option<usize> {
    let smax = (0..speeds.len()).filter(|&t| counts[t] > 0).map(|t| speeds[t]).max()?;
    (0..speeds.len()).find(|&t| counts[t] > 0 && speeds[t] == smax)
}

/// Builds `σ̂` for the jobs `nl` on an instance whose machines are all large.
///
/// Phase 1a puts `min(pmax, floor(nl_j/m))` jobs of each type on every
/// machine. Types that reached `pmax` spread their remaining jobs over area 2
/// in proportion to each machine's share, scaled down so area 2 is not
/// exceeded. Whatever is left is split equally over all machines (phase 1b).
pub fn build_sigma_hat(inst_large: &Instance, nl: &[u64]) -> Result<FractionalSchedule> {
    let d = inst_large.d();
    if nl.len() != d {
        return Err(Error::Malformed(format!("nL has {} entries, expected {d}", nl.len())));
    }
    let pmax = inst_large.pmax();
    let r0 = r0(d, pmax);
    if let Some(t) = inst_large.present_types().find(|&t| inst_large.s[t] < r0) {
        return Err(Error::Domain(format!(
            "machine type {t} has speed {} below r0 = {r0}",
            inst_large.s[t]
        )));
    }
    let m = inst_large.machine_count();
    if m == 0 {
        return Err(Error::Domain("no large machines".into()));
    }
    let tau = inst_large.tau();
    let mq = int(m);

    let nu_1a: Vec<u64> = nl.iter().map(|&v| (m * pmax).min(m * (v / m))).collect();
    let phase_1a: Vec<Rational> = nu_1a.iter().map(|&v| int(v) / &mq).collect();
    let a0: u64 = inst_large.present_types().map(|t| inst_large.m[t] * (inst_large.s[t] - r0)).sum();
    let nu_2_prime: Vec<u64> = (0..d)
        .map(|j| if nu_1a[j] >= m * pmax { nl[j] - nu_1a[j] } else { 0 })
        .collect();
    let demand_2: u64 = nu_2_prime.iter().zip(&inst_large.p).map(|(a, b)| a * b).sum();
    let factor = if demand_2 == 0 {
        Rational::one()
    } else {
        Rational::one().min(int(a0) / int(demand_2))
    };
    let nu_2: Vec<Rational> = nu_2_prime.iter().map(|&v| int(v) * &factor).collect();
    let weights: Vec<Rational> = (0..tau)
        .map(|t| {
            if a0 == 0 || inst_large.m[t] == 0 {
                Rational::zero()
            } else {
                int(inst_large.s[t] - r0) / int(a0)
            }
        })
        .collect();
    let phase_2: Vec<Vec<Rational>> = weights
        .iter()
        .map(|w| nu_2.iter().map(|v| w * v).collect())
        .collect();
    let phase_1b: Vec<Rational> = (0..d)
        .map(|j| (int(nl[j]) - int(nu_1a[j]) - &nu_2[j]) / &mq)
        .collect();
    Ok(FractionalSchedule {
        p: inst_large.p.clone(),
        speeds: inst_large.s.clone(),
        counts: inst_large.m.clone(),
        r0,
        phase_1a,
        phase_1b,
        phase_2,
        weights,
        area_2: a0,
    })
}

/// `σ̃`: floors of phases 1a and 1b, and phase 2 rebuilt from the floor of
/// the fastest machine's phase 2 scaled by `w_t / w_imax`.
pub fn build_sigma_tilde(shat: &FractionalSchedule, imax_type: usize) -> FractionalSchedule {
    let floor = |r: &Rational| r.floor();
    let phase_1a = shat.phase_1a.iter().map(floor).collect();
    let phase_1b = shat.phase_1b.iter().map(floor).collect();
    let w_max = &shat.weights[imax_type];
    let base: Vec<Rational> = shat.phase_2[imax_type].iter().map(floor).collect();
    let phase_2 = shat
        .weights
        .iter()
        .map(|w| {
            if w_max.is_zero() {
                vec![Rational::zero(); shat.d()]
            } else {
                let scale = w / w_max;
                base.iter().map(|b| b * &scale).collect()
            }
        })
        .collect();
    FractionalSchedule {
        phase_1a,
        phase_1b,
        phase_2,
        ..shat.clone()
    }
}

/// Every machine gets at least `pmax` jobs of type `j`, or none does.
pub fn is_regular(fs: &FractionalSchedule, pmax: u64) -> bool {
    let pm = int(pmax);
    (0..fs.d()).all(|j| {
        let big: Vec<bool> = fs.present_types().map(|t| fs.value(t, j) >= pm).collect();
        big.iter().all(|&b| b) || big.iter().all(|&b| !b)
    })
}

/// Regularity of an integral schedule, machine by machine.
pub fn is_regular_schedule(sched: &HMSchedule, d: usize, pmax: u64) -> bool {
    (0..d).all(|j| {
        let big: Vec<bool> = sched
            .entries
            .iter()
            .filter(|e| e.count > 0)
            .map(|e| e.config.counts[j] >= pmax)
            .collect();
        big.iter().all(|&b| b) || big.iter().all(|&b| !b)
    })
}

/// `σ̌_t(j) = floor(fs_t(j)) ∸ (pmax + floor(κ/pmin))`, or `∸ pmax` without κ.
pub fn reduced_schedule(
    fs: &FractionalSchedule,
    kappa: Option<u64>,
    pmin: u64,
    pmax: u64,
) -> Vec<Vec<u64>> {
    (0..fs.tau())
        .map(|t| {
            (0..fs.d())
                .map(|j| reduce_entry(&fs.value(t, j), kappa, pmin, pmax))
                .collect()
        })
        .collect()
}

pub fn reduce_entry(value: &Rational, kappa: Option<u64>, pmin: u64, pmax: u64) -> u64 {
    let cut = pmax + kappa.map_or(0, |k| k / pmin);
    crate::rational::floor_u64(value).saturating_sub(cut)
}

/// Turns `≥1`-feasibility into `(pmax−1)`-idle `≤1`-feasibility of an `≤n`
/// schedule on speeds `s_t + pmax − 1`. Returns the new instance and `κ`.
pub fn cmin_to_idle_cmax(inst: &Instance) -> (Instance, u64) {
    let kappa = inst.pmax() - 1;
    let speeds = inst.s.iter().map(|&s| s + kappa).collect();
    (inst.with_speeds(speeds), kappa)
}

/// Finds `0 < w ≤ v` with `p·w = α·p_j` and `1 ≤ α ≤ pmax`.
///
/// Lay out up to `p_j` jobs from `v` in a row; two of the `p_j + 1` prefix
/// sums agree modulo `p_j` and the jobs between them form `w`.
pub fn mnich_vector(v: &[u64], j: usize, p: &[u64]) -> Result<(Vec<u64>, u64)> {
    if v.len() != p.len() || j >= p.len() {
        return Err(Error::Malformed("mnich_vector: dimension mismatch".into()));
    }
    let pj = p[j];
    let mut items: Vec<usize> = Vec::new();
    'fill: for (k, &vk) in v.iter().enumerate() {
        for _ in 0..vk {
            if items.len() as u64 == pj {
                break 'fill;
            }
            items.push(k);
        }
    }
    let mut seen: Vec<Option<usize>> = vec![None; pj as usize];
    seen[0] = Some(0);
    let mut sum = 0u64;
    for (idx, &k) in items.iter().enumerate() {
        sum += p[k];
        let r = (sum % pj) as usize;
        if let Some(start) = seen[r] {
            let mut w = vec![0u64; p.len()];
            for &k in &items[start..=idx] {
                w[k] += 1;
            }
            let load: u64 = w.iter().zip(p).map(|(a, b)| a * b).sum();
            return Ok((w, load / pj));
        }
        seen[r] = Some(idx + 1);
    }
    Err(Error::Domain(format!(
        "no vector below {v:?} has load divisible by p_{j} = {pj}; requires ‖v‖₁ ≥ p_j"
    )))
}

/// `σ̃` from the three guessed parts: phase 1a `a`, phase 1b `b`, and the
/// floor `f` of the fastest machine's phase 2.
pub fn sigma_tilde_from_guess(
    p: &[u64],
    speeds: &[u64],
    counts: &[u64],
    a: &[u64],
    b: &[u64],
    f: &[u64],
) -> Result<FractionalSchedule> {
    let d = p.len();
    let pmax = p.iter().copied().max().unwrap_or(1);
    let r0 = r0(d, pmax);
    let imax = imax_type(speeds, counts).ok_or_else(|| Error::Domain("no machines".into()))?;
    let a0: u64 = (0..speeds.len())
        .filter(|&t| counts[t] > 0)
        .map(|t| counts[t] * speeds[t].saturating_sub(r0))
        .sum();
    let weights: Vec<Rational> = (0..speeds.len())
        .map(|t| {
            if a0 == 0 || counts[t] == 0 {
                Rational::zero()
            } else {
                int(speeds[t].saturating_sub(r0)) / int(a0)
            }
        })
        .collect();
    let w_max = weights[imax].clone();
    let phase_2 = weights
        .iter()
        .map(|w| {
            f.iter()
                .map(|&fj| {
                    if w_max.is_zero() {
                        Rational::zero()
                    } else {
                        w / &w_max * int(fj)
                    }
                })
                .collect()
        })
        .collect();
    Ok(FractionalSchedule {
        p: p.to_vec(),
        speeds: speeds.to_vec(),
        counts: counts.to_vec(),
        r0,
        phase_1a: a.iter().map(|&x| int(x)).collect(),
        phase_1b: b.iter().map(|&x| int(x)).collect(),
        phase_2,
        weights,
        area_2: a0,
    })
}

/// `p·nl ≤ Σ s_t m_t`.
pub fn fractionally_feasible(inst: &Instance, nl: &[u64]) -> bool {
    let load: u128 = nl.iter().zip(&inst.p).map(|(&a, &b)| a as u128 * b as u128).sum();
    load <= inst.capacity()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn two_six() -> Instance {
        Instance::new(vec![1], vec![10], vec![6], vec![2], None).unwrap()
    }

    #[test]
    fn sigma_hat_hand_example() {
        let s = build_sigma_hat(&two_six(), &[10]).unwrap();
        assert_eq!(s.r0, 5);
        assert_eq!(s.phase_1a, vec![int(1)]);
        assert_eq!(s.area_2, 2);
        assert_eq!(s.weights, vec![ratio(1, 2)]);
        assert_eq!(s.phase_2, vec![vec![int(1)]]);
        assert_eq!(s.phase_1b, vec![int(3)]);
        assert_eq!(s.value(0, 0), int(5));
        assert_eq!(s.total(), vec![int(10)]);
        assert!(is_regular(&s, 1));

        let t = build_sigma_tilde(&s, 0);
        assert_eq!(t.value(0, 0), int(5));
    }

    #[test]
    fn sigma_hat_zero_and_overfull() {
        let s = build_sigma_hat(&two_six(), &[0]).unwrap();
        assert_eq!(s.value(0, 0), int(0));
        assert_eq!(build_sigma_tilde(&s, 0).value(0, 0), int(0));

        let s = build_sigma_hat(&two_six(), &[14]).unwrap();
        assert_eq!(s.value(0, 0), int(7));
        assert!(s.load(0) > int(6));
        assert!(!fractionally_feasible(&two_six(), &[14]));
    }

    #[test]
    fn sigma_tilde_mixed_speeds() {
        let inst = Instance::new(vec![1], vec![20], vec![7, 6], vec![1, 1], None).unwrap();
        let s = build_sigma_hat(&inst, &[11]).unwrap();
        assert_eq!(s.area_2, 3);
        assert_eq!(s.weights, vec![ratio(2, 3), ratio(1, 3)]);
        let t = build_sigma_tilde(&s, imax_type(&inst.s, &inst.m).unwrap());
        for ty in 0..2 {
            let diff = s.value(ty, 0) - t.value(ty, 0);
            assert!(diff >= int(0) && diff <= int(2), "{diff}");
        }
    }

    #[test]
    fn small_machines_are_rejected() {
        let inst = Instance::new(vec![1], vec![3], vec![4], vec![1], None).unwrap();
        assert!(matches!(build_sigma_hat(&inst, &[3]), Err(Error::Domain(_))));
    }

    #[test]
    fn regularity_of_schedules() {
        use crate::model::Configuration;
        let p = [1];
        let sched = HMSchedule::from_machines([
            (0, Configuration::new(vec![3], &p)),
            (0, Configuration::new(vec![2], &p)),
        ]);
        assert!(!is_regular_schedule(&sched, 1, 3));
        assert!(is_regular_schedule(&sched, 1, 2));
        assert!(is_regular_schedule(&HMSchedule::default(), 1, 3));
    }

    #[test]
    fn reduced_schedule_examples() {
        assert_eq!(reduce_entry(&ratio(27, 5), Some(2), 2, 3), 1);
        assert_eq!(reduce_entry(&int(0), Some(2), 2, 3), 0);
        assert_eq!(reduce_entry(&int(5), None, 2, 3), 2);
    }

    #[test]
    fn cmin_conversion_examples() {
        let inst = Instance::new(vec![2, 3], vec![1, 1], vec![4, 7], vec![1, 1], None).unwrap();
        let (c, k) = cmin_to_idle_cmax(&inst);
        assert_eq!((c.s, k), (vec![6, 9], 2));
        let unit = Instance::new(vec![1], vec![1], vec![4], vec![1], None).unwrap();
        let (c, k) = cmin_to_idle_cmax(&unit);
        assert_eq!((c.s, k), (vec![4], 0));
    }

    #[test]
    fn mnich_examples() {
        let (w, a) = mnich_vector(&[0, 3], 0, &[2, 3]).unwrap();
        assert_eq!((w, a), (vec![0, 2], 3));
        let (w, a) = mnich_vector(&[1], 0, &[5]).unwrap();
        assert_eq!((w, a), (vec![1], 1));
        let (w, a) = mnich_vector(&[3, 0], 1, &[2, 3]).unwrap();
        assert_eq!((w, a), (vec![3, 0], 2));
        assert!(matches!(mnich_vector(&[0, 1], 0, &[2, 3]), Err(Error::Domain(_))));
    }
}
