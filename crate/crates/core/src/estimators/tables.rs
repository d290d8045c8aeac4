//! Drivers for the per-multi-index and per-level convergence tables.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::noise::{sample_path, SeedSpec, StreamTag};

use super::hierarchy::{mixed_difference, p_values, LevelSampler, SchemeConfig};
use super::index::LevelIndex;
use super::stats::{LevelId, LevelStats};

/// Mean and variance of every mixed difference on `[0, levels]^2` at fixed
/// `k`. Each sample drives all grids with one shared path.
pub fn table1(
    cfg: &SchemeConfig,
    levels: u32,
    k: f64,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<LevelStats>> {
    cfg.params.require_stable()?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let n = cfg.steps_for(k)?;
    let grids: Vec<LevelIndex> = (0..=levels)
        .flat_map(|l1| (0..=levels).map(move |l2| LevelIndex::new(l1, l2)))
        .collect();
    let per_sample = exec.map(0..samples, |i| {
        let path = sample_path(SeedSpec::new(seed, StreamTag::MultiIndex, i), n, k)?;
        let vals = p_values(cfg, grids.iter().copied(), &path)?;
        Ok(grids
            .iter()
            .map(|g| mixed_difference(*g, &vals))
            .collect::<Vec<f64>>())
    })?;
    Ok(grids
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let xs: Vec<f64> = per_sample.iter().map(|row| row[gi]).collect();
            LevelStats::from_samples(LevelId::Multi(*g), &xs, cfg.delta_cost(*g, k))
        })
        .collect())
}

/// Default sample counts per level: `max(min, top / 4^l)`.
pub fn geometric_schedule(levels: u32, top: u64, min: u64) -> Vec<u64> {
    (0..=levels)
        .map(|l| (top >> (2 * l).min(63)).max(min))
        .collect()
}

/// Statistics of the coupled corrections `dP_l` for `l = 0..samples.len()`.
pub fn table2<S: LevelSampler + ?Sized>(
    sampler: &S,
    samples: &[u64],
    exec: Execution,
) -> Result<Vec<LevelStats>> {
    sampler.config().params.require_stable()?;
    samples
        .iter()
        .enumerate()
        .map(|(l, &m)| {
            let l = l as u32;
            log::info!("level {l}: {m} coupled samples");
            let d = exec.map(0..m, |i| Ok(sampler.sample(l, i)?.delta()))?;
            Ok(LevelStats::from_samples(LevelId::Level(l), &d, sampler.cost_coupled(l)))
        })
        .collect()
}

/// Balancing offset between interior and axis indices: for each axis the
/// `l_x` whose `|E dP_(2+l_x,0)|` is nearest (in log scale) to
/// `|E dP_(1,1)|`, then the larger of the two axes.
pub fn estimate_lstar(table: &[LevelStats]) -> Result<u32> {
    let means: BTreeMap<LevelIndex, f64> = table
        .iter()
        .filter_map(|s| match s.id {
            LevelId::Multi(i) => Some((i, s.mean.abs())),
            LevelId::Level(_) => None,
        })
        .collect();
    let centre = *means.get(&LevelIndex::new(1, 1)).ok_or(Error::EmptyPilot)?;
    let axis = |along_x: bool| -> Result<u32> {
        let mut best: Option<(u32, f64)> = None;
        for lx in 0u32.. {
            let idx = if along_x {
                LevelIndex::new(2 + lx, 0)
            } else {
                LevelIndex::new(0, 2 + lx)
            };
            let Some(v) = means.get(&idx) else { break };
            let gap = (centre / v).ln().abs();
            if best.is_none_or(|(_, g)| gap < g) {
                best = Some((lx, gap));
            }
        }
        best.map(|(l, _)| l).ok_or(Error::EmptyPilot)
    };
    Ok(axis(true)?.max(axis(false)?))
}
