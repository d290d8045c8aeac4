//! Monte Carlo drivers: fixed-level sparse MC, tolerance-driven single-level
//! MC, multilevel MC, and the bias/variance budget search.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::noise::{sample_path, SeedSpec, StreamTag};

use super::hierarchy::{combination_value, CoupledSample, LevelSampler, SchemeConfig};
use super::index::IndexSet;
use super::stats::{mean, variance, LevelId, LevelStats};

/// Result of one estimator run.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    pub method: String,
    pub estimate: f64,
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    /// Per-level statistics of the quantities actually averaged (corrections
    /// for multilevel runs, plain values otherwise).
    pub levels: Vec<LevelStats>,
    /// Node updates of the final estimator, `sum M_l C_l`.
    pub total_cost: f64,
    /// Node updates spent on pilot samples that the final estimator did not
    /// reuse.
    pub pilot_cost: f64,
    pub wall_time: Duration,
}

impl EstimatorReport {
    /// Estimated variance of the estimate, `sum V_l / M_l`.
    pub fn estimator_variance(&self) -> f64 {
        self.levels
            .iter()
            .map(|s| s.variance / s.samples as f64)
            .sum()
    }
}

/// Plain MC average of a sparse combination at fixed `k`.
pub fn sparse_mc(
    cfg: &SchemeConfig,
    set: &IndexSet,
    k: f64,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<EstimatorReport> {
    let start = Instant::now();
    cfg.params.require_stable()?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let n = cfg.steps_for(k)?;
    let h_fine = cfg.h0 * 0.5f64.powi(set.level as i32);
    if k > 4.0 * h_fine * h_fine {
        log::warn!("k = {k} exceeds 4 h^2 at level {}; bias may not decay", set.level);
    }
    let tag = StreamTag::Sparse { level: set.level };
    let values = exec.map(0..samples, |i| {
        let path = sample_path(SeedSpec::new(seed, tag, i), n, k)?;
        combination_value(cfg, set, &path)
    })?;
    let stats = LevelStats::from_samples(
        LevelId::Level(set.level),
        &values,
        cfg.combination_cost(set, k),
    );
    Ok(EstimatorReport {
        method: "sparse-mc".into(),
        estimate: stats.mean,
        epsilon: None,
        alpha: None,
        total_cost: stats.cost(),
        levels: vec![stats],
        pilot_cost: 0.0,
        wall_time: start.elapsed(),
    })
}

/// Level from the closed-form rule `round((-log2 eps + log2 |ln eps|) / 2)`.
pub fn sparse_level_for_tolerance(eps: f64) -> u32 {
    let l = 0.5 * (-eps.log2() + eps.ln().abs().log2());
    l.round().max(0.0) as u32
}

/// Tuning of the pilot stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PilotOptions {
    /// Samples per level.
    pub samples: u64,
    /// Levels sampled up front (`0..initial_levels`).
    pub initial_levels: u32,
    pub max_level: u32,
}

impl Default for PilotOptions {
    fn default() -> Self {
        PilotOptions {
            samples: 100,
            initial_levels: 3,
            max_level: 6,
        }
    }
}

/// Coupled pilot samples per level, extended on demand. The same streams
/// feed the final estimators, so pilot samples are reused there.
pub struct Pilot<'a, S: LevelSampler + ?Sized> {
    sampler: &'a S,
    opts: PilotOptions,
    exec: Execution,
    samples: Vec<Vec<CoupledSample>>,
}

impl<'a, S: LevelSampler + ?Sized> Pilot<'a, S> {
    pub fn new(sampler: &'a S, opts: PilotOptions, exec: Execution) -> Result<Self> {
        sampler.config().params.require_stable()?;
        if opts.samples < 2 {
            return Err(Error::EmptyPilot);
        }
        if opts.max_level < 1 {
            return Err(Error::InvalidArgument(
                "max level must be at least 1 to estimate the bias".into(),
            ));
        }
        let mut p = Pilot {
            sampler,
            opts,
            exec,
            samples: Vec::new(),
        };
        p.ensure(opts.initial_levels.clamp(2, opts.max_level + 1) - 1)?;
        Ok(p)
    }

    pub fn sampler(&self) -> &S {
        self.sampler
    }

    pub fn options(&self) -> PilotOptions {
        self.opts
    }

    /// Samples levels up to `level` that are still missing.
    pub fn ensure(&mut self, level: u32) -> Result<()> {
        if level > self.opts.max_level {
            return Err(Error::InvalidArgument(format!(
                "level {level} above max level {}",
                self.opts.max_level
            )));
        }
        while self.samples.len() <= level as usize {
            let l = self.samples.len() as u32;
            log::info!("pilot: {} samples on {} level {l}", self.opts.samples, self.sampler.name());
            let s = self
                .exec
                .map(0..self.opts.samples, |i| self.sampler.sample(l, i))?;
            self.samples.push(s);
        }
        Ok(())
    }

    pub fn levels(&self) -> u32 {
        self.samples.len() as u32
    }

    pub fn samples(&self, level: u32) -> &[CoupledSample] {
        &self.samples[level as usize]
    }

    pub fn delta_stats(&self, level: u32) -> (f64, f64) {
        let d: Vec<f64> = self.samples(level).iter().map(|s| s.delta()).collect();
        (mean(&d), variance(&d))
    }

    pub fn fine_variance(&self, level: u32) -> f64 {
        let f: Vec<f64> = self.samples(level).iter().map(|s| s.fine).collect();
        variance(&f)
    }

    /// Node updates spent on all pilot samples.
    pub fn cost(&self) -> f64 {
        (0..self.levels())
            .map(|l| self.opts.samples as f64 * self.sampler.cost_coupled(l))
            .sum()
    }

    /// Estimated `|E[P - P_L]|`, assuming the corrections shrink by 4 per
    /// level: `(4/3)|m_1|` for `L = 0`, `|m_1|/3` for `L = 1`, and
    /// `max(|m_L|, |m_{L-1}|/4)/3` beyond.
    pub fn bias(&mut self, level: u32) -> Result<f64> {
        self.ensure(level.max(1))?;
        let m = |l: u32| self.delta_stats(l).0.abs();
        Ok(match level {
            0 => 4.0 / 3.0 * m(1),
            1 => m(1) / 3.0,
            l => m(l).max(m(l - 1) / 4.0) / 3.0,
        })
    }

    /// Smallest level whose estimated bias is within `target`.
    pub fn level_for_bias(&mut self, target: f64, eps: f64) -> Result<u32> {
        for l in 0..=self.opts.max_level {
            if self.bias(l)? <= target {
                return Ok(l);
            }
        }
        Err(Error::IncreaseMaxLevel {
            eps,
            max_level: self.opts.max_level,
        })
    }
}

/// Which estimator a tolerance-driven run builds on top of a hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Plain MC on the single level that meets the bias budget.
    SingleLevel,
    /// Telescoping sum of coupled corrections.
    Multilevel,
}

/// Level choice and sample counts for one `(eps, alpha)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub level: u32,
    /// Samples per level; single-level plans have one entry for `level`.
    pub samples: Vec<u64>,
    pub cost: f64,
}

/// Sample sizes `M_l = ceil(eps^-2 (1-alpha^2)^-1 sqrt(V_l/C_l) sum_j sqrt(V_j C_j))`.
pub fn mlmc_allocation(var: &[f64], cost: &[f64], eps: f64, alpha: f64) -> Result<Vec<u64>> {
    if var.iter().all(|v| *v <= 0.0) {
        return Err(Error::ZeroVariance);
    }
    let budget = (1.0 - alpha * alpha) * eps * eps;
    let sum: f64 = var.iter().zip(cost).map(|(v, c)| (v * c).sqrt()).sum();
    Ok(var
        .iter()
        .zip(cost)
        .map(|(v, c)| ((v / c).sqrt() * sum / budget).ceil().max(1.0) as u64)
        .collect())
}

pub fn plan<S: LevelSampler + ?Sized>(
    pilot: &mut Pilot<'_, S>,
    method: Method,
    eps: f64,
    alpha: f64,
) -> Result<Plan> {
    if !(eps > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need eps > 0 and alpha in (0, 1), got eps = {eps}, alpha = {alpha}"
        )));
    }
    let level = pilot.level_for_bias(alpha * eps, eps)?;
    let s = pilot.sampler();
    match method {
        Method::Multilevel => {
            let var: Vec<f64> = (0..=level).map(|l| pilot.delta_stats(l).1).collect();
            let cost: Vec<f64> = (0..=level).map(|l| s.cost_coupled(l)).collect();
            let samples = mlmc_allocation(&var, &cost, eps, alpha)?;
            let total = samples.iter().zip(&cost).map(|(m, c)| *m as f64 * c).sum();
            Ok(Plan {
                level,
                samples,
                cost: total,
            })
        }
        Method::SingleLevel => {
            let v = pilot.fine_variance(level);
            if v <= 0.0 {
                return Err(Error::ZeroVariance);
            }
            let m = (v / ((1.0 - alpha * alpha) * eps * eps)).ceil().max(1.0) as u64;
            Ok(Plan {
                level,
                samples: vec![m],
                cost: m as f64 * s.cost_fine(level),
            })
        }
    }
}

/// Default grid for the budget split.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..50).map(|i| i as f64 * 0.02).collect()
}

/// Cheapest conceivable plan reaching `level`: one sample per level.
fn cost_floor<S: LevelSampler + ?Sized>(s: &S, method: Method, level: u32) -> f64 {
    match method {
        Method::SingleLevel => s.cost_fine(level),
        Method::Multilevel => (0..=level).map(|l| s.cost_coupled(l)).sum(),
    }
}

/// Budget split with the smallest predicted cost; ties go to the smaller
/// `alpha`. Splits whose bias target is out of reach are skipped.
///
/// Splits are visited from large to small `alpha`. A smaller split can only
/// need a deeper level, so once the one-sample cost of that level exceeds
/// the best plan so far the search stops without sampling the level.
pub fn alpha_search<S: LevelSampler + ?Sized>(
    pilot: &mut Pilot<'_, S>,
    method: Method,
    eps: f64,
    alphas: &[f64],
) -> Result<(f64, Plan)> {
    let mut best: Option<(f64, Plan)> = None;
    let mut sorted = alphas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let max_level = pilot.options().max_level;
    let mut level = 0;
    'splits: for a in sorted {
        loop {
            if let Some((_, b)) = &best {
                if cost_floor(pilot.sampler(), method, level) > b.cost {
                    break 'splits;
                }
            }
            if pilot.bias(level)? <= a * eps {
                break;
            }
            if level == max_level {
                break 'splits;
            }
            level += 1;
        }
        let p = plan(pilot, method, eps, a)?;
        if best.as_ref().is_none_or(|(_, b)| p.cost <= b.cost) {
            best = Some((a, p));
        }
    }
    best.ok_or(Error::IncreaseMaxLevel {
        eps,
        max_level,
    })
}

fn collect_level<S: LevelSampler + ?Sized, T: Send>(
    pilot: &Pilot<'_, S>,
    level: u32,
    m: u64,
    exec: Execution,
    reuse: impl Fn(&CoupledSample) -> T,
    fresh: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let have = if level < pilot.levels() {
        pilot.samples(level)
    } else {
        &[]
    };
    let reused = (m as usize).min(have.len());
    let mut out: Vec<T> = have[..reused].iter().map(reuse).collect();
    out.extend(exec.map(reused as u64..m, fresh)?);
    Ok(out)
}

fn unused_pilot_cost<S: LevelSampler + ?Sized>(pilot: &Pilot<'_, S>, used: &[(u32, u64, f64)]) -> f64 {
    let s = pilot.sampler();
    let n = pilot.options().samples;
    (0..pilot.levels())
        .map(|l| {
            let reused = used
                .iter()
                .filter(|(lev, _, _)| *lev == l)
                .map(|(_, m, c)| (*m).min(n) as f64 * c)
                .sum::<f64>();
            n as f64 * s.cost_coupled(l) - reused
        })
        .sum()
}

/// Executes a plan: samples are indices `0..M_l` of each level's stream, so
/// pilot samples with those indices are reused.
pub fn execute<S: LevelSampler + ?Sized>(
    pilot: &Pilot<'_, S>,
    method: Method,
    plan: &Plan,
    eps: Option<f64>,
    alpha: Option<f64>,
    exec: Execution,
) -> Result<EstimatorReport> {
    let start = Instant::now();
    let s = pilot.sampler();
    let mut levels = Vec::new();
    let mut used = Vec::new();
    let name = match method {
        Method::SingleLevel => "mc",
        Method::Multilevel => "mlmc",
    };
    match method {
        Method::Multilevel => {
            for (l, &m) in plan.samples.iter().enumerate() {
                let l = l as u32;
                let d = collect_level(pilot, l, m, exec, |c| c.delta(), |i| {
                    Ok(s.sample(l, i)?.delta())
                })?;
                levels.push(LevelStats::from_samples(LevelId::Level(l), &d, s.cost_coupled(l)));
                used.push((l, m, s.cost_coupled(l)));
            }
        }
        Method::SingleLevel => {
            let l = plan.level;
            let m = plan.samples[0];
            let f = collect_level(pilot, l, m, exec, |c| c.fine, |i| s.sample_fine(l, i))?;
            levels.push(LevelStats::from_samples(LevelId::Level(l), &f, s.cost_fine(l)));
            // reused pilot samples paid for the coarse solve too
            used.push((l, m, s.cost_fine(l)));
        }
    }
    let estimate = levels.iter().map(|s| s.mean).sum();
    let total_cost = levels.iter().map(|s| s.cost()).sum();
    Ok(EstimatorReport {
        method: format!("{}-{}", s.name(), name),
        estimate,
        epsilon: eps,
        alpha,
        levels,
        total_cost,
        pilot_cost: unused_pilot_cost(pilot, &used),
        wall_time: start.elapsed(),
    })
}

/// Pilot, level choice, allocation and final sampling at a fixed split.
pub fn mlmc_run<S: LevelSampler + ?Sized>(
    sampler: &S,
    eps: f64,
    alpha: f64,
    opts: PilotOptions,
    exec: Execution,
) -> Result<EstimatorReport> {
    let mut pilot = Pilot::new(sampler, opts, exec)?;
    let p = plan(&mut pilot, Method::Multilevel, eps, alpha)?;
    execute(&pilot, Method::Multilevel, &p, Some(eps), Some(alpha), exec)
}

/// Single-level counterpart of [`mlmc_run`].
pub fn mc_run<S: LevelSampler + ?Sized>(
    sampler: &S,
    eps: f64,
    alpha: f64,
    opts: PilotOptions,
    exec: Execution,
) -> Result<EstimatorReport> {
    let mut pilot = Pilot::new(sampler, opts, exec)?;
    let p = plan(&mut pilot, Method::SingleLevel, eps, alpha)?;
    execute(&pilot, Method::SingleLevel, &p, Some(eps), Some(alpha), exec)
}
