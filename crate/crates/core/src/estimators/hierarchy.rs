//! Discrete functionals on anisotropic grids, mixed differences, and the
//! level hierarchies sampled by the Monte Carlo drivers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fd::{self, Boundary, Domain, Grid2D};
use crate::model::ModelParams;
use crate::noise::{coarsen, sample_path, BrownianPath, SeedSpec, StreamTag};

use super::index::{IndexKind, IndexSet, LevelIndex};

/// Model plus discretisation constants shared by every level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    pub params: ModelParams,
    /// Coarsest mesh width.
    pub h0: f64,
    /// Coarsest timestep; level `l` uses `k0 4^-l`.
    pub k0: f64,
    pub domain: Domain,
}

impl SchemeConfig {
    pub fn new(params: ModelParams, h0: f64, k0: f64) -> Self {
        SchemeConfig {
            params,
            h0,
            k0,
            domain: Domain::default(),
        }
    }

    pub fn grid(&self, idx: LevelIndex) -> Result<Grid2D> {
        Grid2D::new(
            self.h0 * 0.5f64.powi(idx.l1 as i32),
            self.h0 * 0.5f64.powi(idx.l2 as i32),
            self.domain,
            Boundary::Dirichlet,
            self.params.x0,
            self.params.y0,
        )
    }

    pub fn k_at(&self, level: u32) -> f64 {
        self.k0 * 0.25f64.powi(level as i32)
    }

    /// Number of steps for timestep `k`, which must divide the horizon.
    pub fn steps_for(&self, k: f64) -> Result<usize> {
        let r = self.params.t / k;
        let n = r.round();
        if !(k > 0.0) || n < 1.0 || (r - n).abs() > 1e-9 * r {
            return Err(Error::TimeGridMismatch {
                steps: n.max(0.0) as usize,
                k,
                t: self.params.t,
            });
        }
        Ok(n as usize)
    }

    /// Node updates of one solve on `idx` with timestep `k`.
    pub fn grid_cost(&self, idx: LevelIndex, k: f64) -> f64 {
        let hx = self.h0 * 0.5f64.powi(idx.l1 as i32);
        let hy = self.h0 * 0.5f64.powi(idx.l2 as i32);
        (self.domain.width() / hx).round() * (self.domain.height() / hy).round() * (self.params.t / k).round()
    }

    /// Cost of one mixed difference: all of its constituent solves.
    pub fn delta_cost(&self, idx: LevelIndex, k: f64) -> f64 {
        idx.mixed_terms().iter().map(|(m, _)| self.grid_cost(*m, k)).sum()
    }

    /// Cost of a sparse combination, counted term by term: each mixed
    /// difference pays for its own solves.
    pub fn combination_cost(&self, set: &IndexSet, k: f64) -> f64 {
        set.indices().iter().map(|i| self.delta_cost(*i, k)).sum()
    }
}

/// Quadrant functional on grid `idx` along `path`.
pub fn p_value(cfg: &SchemeConfig, idx: LevelIndex, path: &BrownianPath) -> Result<f64> {
    fd::solve_path(cfg.grid(idx)?, &cfg.params, path)
}

/// Values on several grids along one shared path.
pub fn p_values(
    cfg: &SchemeConfig,
    grids: impl IntoIterator<Item = LevelIndex>,
    path: &BrownianPath,
) -> Result<BTreeMap<LevelIndex, f64>> {
    grids
        .into_iter()
        .map(|g| Ok((g, p_value(cfg, g, path)?)))
        .collect()
}

/// First-order mixed difference from already computed grid values.
pub fn mixed_difference(idx: LevelIndex, values: &BTreeMap<LevelIndex, f64>) -> f64 {
    idx.mixed_terms()
        .iter()
        .map(|(m, s)| *s as f64 * values[m])
        .sum()
}

/// Mixed difference at `idx`: up to four solves on the same path.
pub fn delta_p(cfg: &SchemeConfig, idx: LevelIndex, path: &BrownianPath) -> Result<f64> {
    let vals = p_values(cfg, idx.mixed_terms().into_iter().map(|(m, _)| m), path)?;
    Ok(mixed_difference(idx, &vals))
}

/// Sparse-combination value `sum_{l in I} dP_l`, evaluated by solving each
/// grid with a non-zero combination coefficient once.
pub fn combination_value(cfg: &SchemeConfig, set: &IndexSet, path: &BrownianPath) -> Result<f64> {
    let mut acc = 0.0;
    for (idx, c) in set.combination() {
        acc += c as f64 * p_value(cfg, idx, path)?;
    }
    Ok(acc)
}

/// Fine and coarse values of one coupled sample; `coarse` is zero on level 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledSample {
    pub fine: f64,
    pub coarse: f64,
}

impl CoupledSample {
    pub fn delta(&self) -> f64 {
        self.fine - self.coarse
    }
}

/// A sequence of approximations indexed by level, sampled on coupled paths.
pub trait LevelSampler: Sync {
    fn name(&self) -> &'static str;
    fn config(&self) -> &SchemeConfig;
    fn master_seed(&self) -> u64;
    fn tag(&self, level: u32) -> StreamTag;
    /// Approximation on level `level` along `path` (timestep `k_level`).
    fn value(&self, level: u32, path: &BrownianPath) -> Result<f64>;
    /// Node updates of one fine evaluation.
    fn cost_fine(&self, level: u32) -> f64;

    fn cost_coupled(&self, level: u32) -> f64 {
        self.cost_fine(level) + if level > 0 { self.cost_fine(level - 1) } else { 0.0 }
    }

    fn path(&self, level: u32, index: u64) -> Result<BrownianPath> {
        let cfg = self.config();
        let k = cfg.k_at(level);
        let n = cfg.steps_for(k)?;
        sample_path(SeedSpec::new(self.master_seed(), self.tag(level), index), n, k)
    }

    fn sample_fine(&self, level: u32, index: u64) -> Result<f64> {
        self.value(level, &self.path(level, index)?)
    }

    fn sample(&self, level: u32, index: u64) -> Result<CoupledSample> {
        let path = self.path(level, index)?;
        let fine = self.value(level, &path)?;
        let coarse = if level == 0 {
            0.0
        } else {
            self.value(level - 1, &coarsen(&path, 4)?)?
        };
        Ok(CoupledSample { fine, coarse })
    }
}

/// Sparse combinations over a family of index sets.
#[derive(Clone, Debug)]
pub struct SparseHierarchy {
    pub cfg: SchemeConfig,
    pub kind: IndexKind,
    pub seed: u64,
}

impl SparseHierarchy {
    pub fn new(cfg: SchemeConfig, kind: IndexKind, seed: u64) -> Self {
        SparseHierarchy { cfg, kind, seed }
    }

    pub fn set(&self, level: u32) -> IndexSet {
        self.kind.set(level)
    }
}

impl LevelSampler for SparseHierarchy {
    fn name(&self) -> &'static str {
        "sparse"
    }

    fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    fn master_seed(&self) -> u64 {
        self.seed
    }

    fn tag(&self, level: u32) -> StreamTag {
        StreamTag::Sparse { level }
    }

    fn value(&self, level: u32, path: &BrownianPath) -> Result<f64> {
        combination_value(&self.cfg, &self.set(level), path)
    }

    fn cost_fine(&self, level: u32) -> f64 {
        self.cfg.combination_cost(&self.set(level), self.cfg.k_at(level))
    }
}

/// Isotropic grids `h = h0 2^-l` in both directions.
#[derive(Clone, Debug)]
pub struct FullGridHierarchy {
    pub cfg: SchemeConfig,
    pub seed: u64,
}

impl FullGridHierarchy {
    pub fn new(cfg: SchemeConfig, seed: u64) -> Self {
        FullGridHierarchy { cfg, seed }
    }
}

impl LevelSampler for FullGridHierarchy {
    fn name(&self) -> &'static str {
        "full"
    }

    fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    fn master_seed(&self) -> u64 {
        self.seed
    }

    fn tag(&self, level: u32) -> StreamTag {
        StreamTag::FullGrid { level }
    }

    fn value(&self, level: u32, path: &BrownianPath) -> Result<f64> {
        p_value(&self.cfg, LevelIndex::new(level, level), path)
    }

    fn cost_fine(&self, level: u32) -> f64 {
        self.cfg
            .grid_cost(LevelIndex::new(level, level), self.cfg.k_at(level))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::index::{balanced_index_set, standard_index_set};
    use crate::model::exact_functional;

    fn cfg() -> SchemeConfig {
        SchemeConfig::new(ModelParams::reference(), 1.0, 0.25)
    }

    fn path(idx: u64, k: f64) -> BrownianPath {
        let n = (1.0 / k).round() as usize;
        sample_path(SeedSpec::new(5, StreamTag::Check { id: 3 }, idx), n, k).unwrap()
    }

    #[test]
    fn delta_at_origin_is_plain_value() {
        let c = cfg();
        let p = path(0, 1.0 / 16.0);
        let o = LevelIndex::new(0, 0);
        assert_eq!(delta_p(&c, o, &p).unwrap(), p_value(&c, o, &p).unwrap());
    }

    #[test]
    fn telescoping_identity() {
        let c = cfg();
        let p = path(1, 1.0 / 16.0);
        for set in [standard_index_set(2), balanced_index_set(4, 1)] {
            let direct: f64 = set
                .indices()
                .iter()
                .map(|i| delta_p(&c, *i, &p).unwrap())
                .sum();
            let comb = combination_value(&c, &set, &p).unwrap();
            assert!((direct - comb).abs() < 1e-12, "{direct} vs {comb}");
        }
    }

    #[test]
    fn deterministic_mixed_difference_matches_error_surface() {
        // With the noise off every solve is deterministic, and the mixed
        // difference of values equals the mixed difference of errors against
        // the exact functional (the exact value cancels).
        let c = SchemeConfig::new(ModelParams::reference().deterministic(), 1.0, 0.25);
        let p = path(2, 1.0 / 16.0);
        let exact = exact_functional(&c.params, 0.0, 0.0);
        let idx = LevelIndex::new(1, 2);
        let err = |m: LevelIndex| p_value(&c, m, &p).unwrap() - exact;
        let want = err(LevelIndex::new(1, 2)) - err(LevelIndex::new(0, 2)) - err(LevelIndex::new(1, 1))
            + err(LevelIndex::new(0, 1));
        assert!((delta_p(&c, idx, &p).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn cost_accounting_reproduces_reference_levels() {
        // h0 = 1/2, k0 = 1/8, balanced sets with l* = 2
        let c = SchemeConfig::new(ModelParams::reference(), 0.5, 0.125);
        let s = SparseHierarchy::new(c, IndexKind::Balanced { l_star: 2 }, 0);
        let want = [13.64, 18.50, 22.02, 25.22, 28.44, 31.65];
        for (l, w) in want.iter().enumerate() {
            let got = s.cost_coupled(l as u32).log2();
            assert!((got - w).abs() < 0.01, "level {l}: {got} vs {w}");
        }
    }

    #[test]
    fn coupled_level_zero_has_no_coarse() {
        let c = cfg();
        let s = FullGridHierarchy::new(c, 3);
        let x = s.sample(0, 7).unwrap();
        assert_eq!(x.coarse, 0.0);
        assert_eq!(x.fine, s.sample_fine(0, 7).unwrap());
        let y = s.sample(1, 7).unwrap();
        assert_eq!(y.fine, s.sample_fine(1, 7).unwrap());
    }

    #[test]
    fn steps_must_divide_horizon() {
        let c = cfg();
        assert_eq!(c.steps_for(0.25).unwrap(), 4);
        assert!(matches!(c.steps_for(0.3), Err(Error::TimeGridMismatch { .. })));
    }
}
