//! Design-of-experiments generation.
//!
//! Hierarchical sampling groups the valid discrete vectors, splits the sample
//! budget over groups by weight, draws discrete vectors within each group and
//! fills active continuous variables from a Sobol' sequence. Non-hierarchical
//! sampling draws Sobol' points in the declared space and corrects them.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correction::{CorrectionError, Corrector};
use crate::metrics::rate_record;
use crate::sobol::SobolSampler;
use crate::space::{DesignSpace, Enumeration, SpaceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Correction(#[from] CorrectionError),
    #[error("nothing to group: the space has no valid discrete vectors")]
    Empty,
    #[error("sample size must be at least 1")]
    ZeroSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "grouping")]
pub enum Grouping {
    None,
    ByNAct,
    ByXAct,
    ByMrd { rd_min: f64 },
}

impl Grouping {
    pub const DEFAULT_RD_MIN: f64 = 0.80;
}

impl Default for Grouping {
    fn default() -> Self {
        Grouping::ByXAct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    NAct,
    GroupSize,
}

/// Partition of the valid discrete vectors into groups of enumeration indices.
/// Groups are ordered by their first member.
pub fn group(space: &DesignSpace, e: &Enumeration, grouping: Grouping) -> Result<Vec<Vec<usize>>, SamplingError> {
    if e.is_empty() {
        return Err(SamplingError::Empty);
    }
    let all: Vec<usize> = (0..e.len()).collect();
    Ok(match grouping {
        Grouping::None => vec![all],
        Grouping::ByNAct => group_by_key(&all, |k| e.masks[k].iter().filter(|&&a| a).count()),
        Grouping::ByXAct => group_by_key(&all, |k| e.masks[k].clone()),
        Grouping::ByMrd { rd_min } => {
            let mut out = Vec::new();
            split_mrd(space, e, all, rd_min, &mut out);
            out.sort_by_key(|g| g[0]);
            out
        }
    })
}

fn group_by_key<K: std::hash::Hash + Eq>(members: &[usize], key: impl Fn(usize) -> K) -> Vec<Vec<usize>> {
    let mut slot: HashMap<K, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &k in members {
        let g = *slot.entry(key(k)).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(k);
    }
    groups
}

/// Recursive split on the variable with the highest rate diversity within the
/// current subset, as long as it reaches `rd_min`. Only variables taking at
/// least two states (an option or inactive) in the subset can split it.
fn split_mrd(space: &DesignSpace, e: &Enumeration, members: Vec<usize>, rd_min: f64, out: &mut Vec<Vec<usize>>) {
    let state = |k: usize, j: usize| if e.masks[k][j] { e.vectors[k][j] as i64 } else { -1 };
    let vectors: Vec<Vec<f64>> = members.iter().map(|&k| e.vectors[k].clone()).collect();
    let masks: Vec<Vec<bool>> = members.iter().map(|&k| e.masks[k].clone()).collect();
    let mut best: Option<(usize, f64)> = None;
    for j in space.discrete_indices() {
        let first = state(members[0], j);
        if members.iter().all(|&k| state(k, j) == first) {
            continue;
        }
        let rd = rate_record(space, &vectors, &masks, j).rd;
        if rd >= rd_min && best.is_none_or(|(_, b)| rd > b) {
            best = Some((j, rd));
        }
    }
    match best {
        None => out.push(members),
        Some((j, _)) => {
            for sub in group_by_key(&members, |k| state(k, j)) {
                split_mrd(space, e, sub, rd_min, out);
            }
        }
    }
}

/// Relative group weights.
pub fn weights(e: &Enumeration, groups: &[Vec<usize>], weighting: Weighting) -> Vec<f64> {
    let w: Vec<f64> = groups
        .iter()
        .map(|g| match weighting {
            Weighting::Uniform => 1.0,
            Weighting::NAct => {
                let total: usize = g.iter().map(|&k| e.masks[k].iter().filter(|&&a| a).count()).sum();
                total as f64 / g.len() as f64
            }
            Weighting::GroupSize => (g.len() as f64).sqrt(),
        })
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter().map(|v| v / sum).collect()
}

/// Largest-remainder apportionment of `n` over `w_rel`; ties go to the earlier
/// group.
pub fn apportion(w_rel: &[f64], n: usize) -> Vec<usize> {
    let exact: Vec<f64> = w_rel.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..w_rel.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &g in order.iter().take(n.saturating_sub(assigned)) {
        counts[g] += 1;
    }
    counts
}

/// A generated design of experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doe {
    pub x: Vec<Vec<f64>>,
    pub masks: Vec<Vec<bool>>,
    /// Requested samples per group (hierarchical sampling only).
    pub quotas: Vec<usize>,
    /// Samples drawn per group (hierarchical sampling only).
    pub drawn: Vec<usize>,
    /// Samples that could not be drawn because a purely discrete group ran
    /// out of distinct vectors.
    pub shortfall: usize,
}

pub fn sample_hierarchical(
    space: &DesignSpace,
    n: usize,
    grouping: Grouping,
    weighting: Weighting,
    seed: u64,
) -> Result<Doe, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroSamples);
    }
    let e = space.enumeration()?;
    let groups = group(space, &e, grouping)?;
    let quotas = apportion(&weights(&e, &groups, weighting), n);
    let cont = space.continuous_indices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut picks = Vec::with_capacity(n);
    let mut drawn = Vec::with_capacity(groups.len());
    let mut shortfall = 0;
    for (g, &q) in groups.iter().zip(&quotas) {
        let mut members = g.clone();
        members.shuffle(&mut rng);
        let take = q.min(members.len());
        picks.extend_from_slice(&members[..take]);
        let mut count = take;
        if q > take {
            // repeats only make sense where continuous values can differ
            let repeatable: Vec<usize> = g.iter().copied().filter(|&k| cont.iter().any(|&i| e.masks[k][i])).collect();
            if repeatable.is_empty() {
                shortfall += q - take;
            } else {
                for _ in take..q {
                    picks.push(repeatable[rng.random_range(0..repeatable.len())]);
                }
                count = q;
            }
        }
        drawn.push(count);
    }

    let mut sobol = (!cont.is_empty()).then(|| SobolSampler::new(cont.len(), seed));
    let mut x = Vec::with_capacity(picks.len());
    let mut masks = Vec::with_capacity(picks.len());
    for k in picks {
        let mut v = e.vectors[k].clone();
        let mask = e.masks[k].clone();
        if let Some(s) = sobol.as_mut() {
            let u = s.next_point();
            for (c, &i) in cont.iter().enumerate() {
                if mask[i] {
                    let (lo, hi) = space.variables()[i].bounds();
                    v[i] = lo + u[c] * (hi - lo);
                }
            }
        }
        x.push(v);
        masks.push(mask);
    }
    Ok(Doe { x, masks, quotas, drawn, shortfall })
}

/// Maps a unit-cube point to the declared space; discrete variables use
/// equal-width bins.
pub fn unit_to_declared(space: &DesignSpace, u: &[f64]) -> Vec<f64> {
    space
        .variables()
        .iter()
        .zip(u)
        .map(|(v, &ui)| {
            if v.is_discrete() {
                let n = v.n_options();
                ((ui * n as f64).floor() as usize).min(n - 1) as f64
            } else {
                let (lo, hi) = v.bounds();
                lo + ui * (hi - lo)
            }
        })
        .collect()
}

pub fn sample_nonhierarchical(
    space: &DesignSpace,
    n: usize,
    corrector: &Corrector,
    seed: u64,
) -> Result<Doe, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroSamples);
    }
    let mut sobol = SobolSampler::new(space.n_vars().max(1), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut x = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for _ in 0..n {
        let raw = unit_to_declared(space, &sobol.next_point());
        let v = corrector.correct(space, &raw, &mut rng)?;
        masks.push(space.mask(&v));
        x.push(v);
    }
    Ok(Doe { x, masks, quotas: Vec::new(), drawn: Vec::new(), shortfall: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_largest_remainder() {
        assert_eq!(apportion(&[4.0 / 11.0, 4.0 / 11.0, 2.0 / 11.0, 1.0 / 11.0], 100), vec![37, 36, 18, 9]);
        assert_eq!(apportion(&[0.25; 4], 10), vec![3, 3, 2, 2]);
        assert_eq!(apportion(&[1.0], 7), vec![7]);
    }

    #[test]
    fn flat_space_single_group() {
        let s = DesignSpace::builder().integer("a", 0, 2).integer("b", 0, 1).build().unwrap();
        let e = s.enumeration().unwrap();
        for g in [Grouping::None, Grouping::ByNAct, Grouping::ByXAct, Grouping::ByMrd { rd_min: 0.5 }] {
            assert_eq!(group(&s, &e, g).unwrap().len(), 1);
        }
    }

    #[test]
    fn group_size_weighting() {
        let s = DesignSpace::builder().integer("a", 0, 1).integer("b", 0, 3).active_if("b", crate::space::Expr::eq("a", 1)).build().unwrap();
        let e = s.enumeration().unwrap();
        let groups = group(&s, &e, Grouping::ByXAct).unwrap();
        let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        assert_eq!(sizes, vec![1, 4]);
        let w = weights(&e, &groups, Weighting::GroupSize);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15 && (w[1] - 2.0 / 3.0).abs() < 1e-15);
    }
}
