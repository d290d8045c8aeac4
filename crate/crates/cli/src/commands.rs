use std::path::PathBuf;
use std::time::Instant;

use zakai_core::estimators::{
    self, default_alpha_grid, estimate_lstar, execute, fit_interior_slope, fit_slopes,
    geometric_schedule, ols_slope, plan, EstimatorReport, FullGridHierarchy, IndexKind,
    LevelId, LevelIndex, LevelSampler, LevelStats, Method, Pilot, PilotOptions, SchemeConfig,
    SparseHierarchy, StatField,
};
use zakai_core::fd::{write_field_csv, Domain, FieldGrid, Stepper};
use zakai_core::noise::{sample_path, SeedSpec, StreamTag};
use zakai_core::report::{self, AlphaRow, CostRow, Metadata};
use zakai_core::spectral::oracle_rows;
use zakai_core::{BrownianPath, Execution, ModelParams};

use crate::config::Config;
use crate::error::CliError;

type Res<T> = Result<T, CliError>;

const DEFAULT_SEED: u64 = 42;

pub struct Context {
    pub cfg: Config,
    pub command: &'static str,
    pub out: PathBuf,
    pub full: bool,
    pub dump_paths: Option<PathBuf>,
    pub dump_field: Option<PathBuf>,
}

impl Context {
    fn seed(&self) -> Res<u64> {
        Ok(self.cfg.peek("seed")?.unwrap_or(DEFAULT_SEED))
    }

    fn exec(&self) -> Execution {
        Execution::default()
    }

    fn params(&self) -> Res<ModelParams> {
        let r = ModelParams::reference();
        let c = &self.cfg;
        Ok(ModelParams::new(
            c.get("mu_x", r.mu_x)?,
            c.get("mu_y", r.mu_y)?,
            c.get("rho_x", r.rho_x)?,
            c.get("rho_y", r.rho_y)?,
            c.get("rho_xy", r.rho_xy)?,
            c.get("t", r.t)?,
            c.get("x0", r.x0)?,
            c.get("y0", r.y0)?,
        )?)
    }

    fn scheme(&self, h0: f64, k0: f64) -> Res<SchemeConfig> {
        let d = Domain::default();
        let c = &self.cfg;
        let mut s = SchemeConfig::new(self.params()?, c.get("h0", h0)?, c.get("k0", k0)?);
        s.domain = Domain {
            x_min: c.get("x_min", d.x_min)?,
            x_max: c.get("x_max", d.x_max)?,
            y_min: c.get("y_min", d.y_min)?,
            y_max: c.get("y_max", d.y_max)?,
        };
        Ok(s)
    }

    fn index_kind(&self, default_balanced: bool) -> Res<IndexKind> {
        let name: String = self.cfg.get(
            "index_set",
            if default_balanced { "balanced" } else { "standard" }.to_string(),
        )?;
        match name.as_str() {
            "standard" => Ok(IndexKind::Standard),
            "balanced" => Ok(IndexKind::Balanced {
                l_star: self.cfg.get("l_star", 2u32)?,
            }),
            other => Err(CliError::Config(format!(
                "index_set must be `standard` or `balanced`, got `{other}`"
            ))),
        }
    }

    fn pilot_options(&self) -> Res<PilotOptions> {
        let d = PilotOptions::default();
        Ok(PilotOptions {
            samples: self.cfg.get("pilot_samples", d.samples)?,
            max_level: self.cfg.get("max_level", d.max_level)?,
            ..d
        })
    }

    /// `None` means search over the default grid.
    fn alpha(&self) -> Res<Option<f64>> {
        let raw: String = self.cfg.get("alpha", "search".to_string())?;
        if raw == "search" {
            return Ok(None);
        }
        let a: f64 = raw
            .parse()
            .map_err(|_| CliError::Config(format!("alpha must be a number or `search`, got `{raw}`")))?;
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::Config(format!("alpha must lie in (0, 1), got {a}")));
        }
        Ok(Some(a))
    }

    fn meta(&self) -> Res<Metadata> {
        Ok(Metadata {
            seed: self.seed()?,
            config_hash: self.cfg.hash(self.command),
        })
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Res<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        let path = self.out.join(name);
        std::fs::write(&path, buf)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    fn dump_path(&self, name: &str, path: &BrownianPath) -> Res<()> {
        if let Some(dir) = &self.dump_paths {
            std::fs::create_dir_all(dir)?;
            path.dump(&dir.join(format!("{name}.bin")))?;
        }
        Ok(())
    }

    /// Solves `path` on grid `(l, l)` and writes the first and last layers.
    fn dump_field(&self, cfg: &SchemeConfig, level: u32, path: &BrownianPath) -> Res<()> {
        let Some(file) = &self.dump_field else {
            return Ok(());
        };
        let grid = cfg.grid(LevelIndex::new(level, level))?;
        let last = Stepper::new(grid, &cfg.params, path.k())?.run(path)?;
        let meta = self.meta()?;
        let mut buf = Vec::new();
        {
            use std::io::Write;
            writeln!(buf, "# seed={} config={}", meta.seed, meta.config_hash)?;
            writeln!(buf, "layer,x,y,value")?;
            write_field_csv(&mut buf, &FieldGrid::dirac(grid))?;
            write_field_csv(&mut buf, &last)?;
        }
        if let Some(dir) = file.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(file, buf)?;
        Ok(())
    }

    fn dump_levels(&self, sampler: &dyn LevelSampler, top: u32) -> Res<()> {
        if self.dump_paths.is_some() {
            for l in 0..=top {
                self.dump_path(&format!("{}_l{l}_s0", sampler.name()), &sampler.path(l, 0)?)?;
            }
        }
        if self.dump_field.is_some() {
            self.dump_field(sampler.config(), top, &sampler.path(top, 0)?)?;
        }
        Ok(())
    }
}

fn fmt_slope(r: zakai_core::Result<f64>) -> String {
    match r {
        Ok(s) => format!("{s:.3}"),
        Err(_) => "n/a".into(),
    }
}

pub fn table1(ctx: &Context) -> Res<()> {
    let c = &ctx.cfg;
    let k: f64 = c.get("k", 1.0 / 64.0)?;
    let cfg = ctx.scheme(1.0, k)?;
    let levels: u32 = c.get("levels", 4)?;
    let samples: u64 = c.get("samples", if ctx.full { 20_000 } else { 2000 })?;
    let seed = ctx.seed()?;
    let meta = ctx.meta()?;
    let stats = estimators::table1(&cfg, levels, k, samples, seed, ctx.exec())?;
    let path = ctx.write("table1.csv", |w| report::write_table1(w, &meta, &stats))?;
    if ctx.dump_paths.is_some() || ctx.dump_field.is_some() {
        let p = sample_path(SeedSpec::new(seed, StreamTag::MultiIndex, 0), cfg.steps_for(k)?, k)?;
        ctx.dump_path("multi_index_s0", &p)?;
        ctx.dump_field(&cfg, levels, &p)?;
    }
    let lstar = estimate_lstar(&stats)
        .map(|l| l.to_string())
        .unwrap_or_else(|_| "n/a".into());
    println!(
        "table1: rows={} M={} mean_slope={} var_slope={} l_star={} -> {}",
        stats.len(),
        samples,
        fmt_slope(fit_interior_slope(&stats, StatField::Mean)),
        fmt_slope(fit_interior_slope(&stats, StatField::Variance)),
        lstar,
        path.display()
    );
    Ok(())
}

pub fn table2(ctx: &Context) -> Res<()> {
    let c = &ctx.cfg;
    let cfg = ctx.scheme(0.5, 0.125)?;
    let kind = ctx.index_kind(true)?;
    let levels: u32 = c.get("levels", 5)?;
    let top: u64 = c.get("top_samples", if ctx.full { 65_536 } else { 4096 })?;
    let min: u64 = c.get("min_samples", if ctx.full { 256 } else { 16 })?;
    let sampler = SparseHierarchy::new(cfg, kind, ctx.seed()?);
    let meta = ctx.meta()?;
    let stats = estimators::table2(&sampler, &geometric_schedule(levels, top, min), ctx.exec())?;
    let path = ctx.write("table2.csv", |w| report::write_table2(w, &meta, &stats))?;
    ctx.dump_levels(&sampler, levels)?;
    println!(
        "table2: levels=0..{} slopes mean={} var={} cost={} -> {}",
        levels,
        fmt_slope(fit_slopes(&stats, StatField::Mean)),
        fmt_slope(fit_slopes(&stats, StatField::Variance)),
        fmt_slope(fit_slopes(&stats, StatField::Cost)),
        path.display()
    );
    Ok(())
}

/// The four tolerance-driven estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    FullMc,
    SparseMc,
    FullMlmc,
    SparseMlmc,
}

impl Kind {
    const ALL: [Kind; 4] = [Kind::FullMc, Kind::SparseMc, Kind::FullMlmc, Kind::SparseMlmc];

    fn name(self) -> &'static str {
        match self {
            Kind::FullMc => "full-mc",
            Kind::SparseMc => "sparse-mc",
            Kind::FullMlmc => "full-mlmc",
            Kind::SparseMlmc => "sparse-mlmc",
        }
    }

    fn method(self) -> Method {
        match self {
            Kind::FullMc | Kind::SparseMc => Method::SingleLevel,
            Kind::FullMlmc | Kind::SparseMlmc => Method::Multilevel,
        }
    }

    fn sparse(self) -> bool {
        matches!(self, Kind::SparseMc | Kind::SparseMlmc)
    }

    fn parse(s: &str) -> Res<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown method `{s}`")))
    }
}

/// Samplers for the tolerance-driven commands: isotropic grids and sparse
/// combinations on the same scheme.
struct Samplers {
    full: FullGridHierarchy,
    sparse: SparseHierarchy,
}

impl Samplers {
    fn new(ctx: &Context) -> Res<Self> {
        let cfg = ctx.scheme(1.0, 0.5)?;
        let kind = ctx.index_kind(false)?;
        let seed = ctx.seed()?;
        Ok(Samplers {
            full: FullGridHierarchy::new(cfg, seed),
            sparse: SparseHierarchy::new(cfg, kind, seed),
        })
    }

    fn get(&self, kind: Kind) -> &dyn LevelSampler {
        if kind.sparse() {
            &self.sparse
        } else {
            &self.full
        }
    }
}

fn run_tolerance(
    pilot: &mut Pilot<'_, dyn LevelSampler + '_>,
    kind: Kind,
    eps: f64,
    alpha: Option<f64>,
    exec: Execution,
) -> zakai_core::Result<EstimatorReport> {
    let (a, p) = match alpha {
        Some(a) => (a, plan(pilot, kind.method(), eps, a)?),
        None => estimators::alpha_search(pilot, kind.method(), eps, &default_alpha_grid())?,
    };
    let mut r = execute(pilot, kind.method(), &p, Some(eps), Some(a), exec)?;
    r.method = kind.name().to_string();
    Ok(r)
}

fn summary(r: &EstimatorReport) {
    let top = r.levels.last().map(LevelStats::level).unwrap_or(0);
    println!(
        "{}: estimate={} std_error={:.3e} eps={} alpha={} level={} cost={:.4e} pilot_cost={:.4e} wall={:.2}s",
        r.method,
        r.estimate,
        r.estimator_variance().sqrt(),
        r.epsilon.map(|e| e.to_string()).unwrap_or_else(|| "-".into()),
        r.alpha.map(|a| a.to_string()).unwrap_or_else(|| "-".into()),
        top,
        r.total_cost,
        r.pilot_cost,
        r.wall_time.as_secs_f64()
    );
}

/// Tolerance-driven run of one estimator.
pub fn estimator(ctx: &Context, kind: Kind) -> Res<()> {
    let samplers = Samplers::new(ctx)?;
    let eps: f64 = ctx.cfg.get("eps", 0.01)?;
    if !(eps > 0.0) {
        return Err(CliError::Config(format!("eps must be positive, got {eps}")));
    }
    let alpha = ctx.alpha()?;
    let opts = ctx.pilot_options()?;
    let meta = ctx.meta()?;
    let sampler = samplers.get(kind);
    let mut pilot = Pilot::new(sampler, opts, ctx.exec())?;
    let r = run_tolerance(&mut pilot, kind, eps, alpha, ctx.exec())?;
    ctx.write(&format!("{}.csv", ctx.command), |w| report::write_report(w, &meta, &r))?;
    ctx.dump_levels(sampler, r.levels.last().map(LevelStats::level).unwrap_or(0))?;
    summary(&r);
    Ok(())
}

pub fn sparse_mc(ctx: &Context) -> Res<()> {
    let Some(level) = ctx.cfg.get_opt::<u32>("level")? else {
        return estimator(ctx, Kind::SparseMc);
    };
    let samplers = Samplers::new(ctx)?;
    let cfg = samplers.sparse.cfg;
    let k: f64 = ctx.cfg.get("k", cfg.k_at(level))?;
    let samples: u64 = ctx.cfg.get("samples", if ctx.full { 10_000 } else { 1000 })?;
    let meta = ctx.meta()?;
    let set = samplers.sparse.set(level);
    let r = estimators::sparse_mc(&cfg, &set, k, samples, ctx.seed()?, ctx.exec())?;
    ctx.write("sparse-mc.csv", |w| report::write_report(w, &meta, &r))?;
    if ctx.dump_paths.is_some() || ctx.dump_field.is_some() {
        let tag = StreamTag::Sparse { level };
        let p = sample_path(SeedSpec::new(ctx.seed()?, tag, 0), cfg.steps_for(k)?, k)?;
        ctx.dump_path(&format!("sparse_l{level}_s0"), &p)?;
        ctx.dump_field(&cfg, level, &p)?;
    }
    summary(&r);
    Ok(())
}

pub fn full_mc(ctx: &Context) -> Res<()> {
    let Some(level) = ctx.cfg.get_opt::<u32>("level")? else {
        return estimator(ctx, Kind::FullMc);
    };
    let samplers = Samplers::new(ctx)?;
    let sampler = &samplers.full;
    sampler.cfg.params.require_stable()?;
    let samples: u64 = ctx.cfg.get("samples", if ctx.full { 10_000 } else { 1000 })?;
    if samples == 0 {
        return Err(CliError::Config("samples must be positive".into()));
    }
    let meta = ctx.meta()?;
    let start = Instant::now();
    let values = ctx.exec().map(0..samples, |i| sampler.sample_fine(level, i))?;
    let stats = LevelStats::from_samples(LevelId::Level(level), &values, sampler.cost_fine(level));
    let r = EstimatorReport {
        method: "full-mc".into(),
        estimate: stats.mean,
        epsilon: None,
        alpha: None,
        total_cost: stats.cost(),
        levels: vec![stats],
        pilot_cost: 0.0,
        wall_time: start.elapsed(),
    };
    ctx.write("full-mc.csv", |w| report::write_report(w, &meta, &r))?;
    ctx.dump_levels(sampler, level)?;
    summary(&r);
    Ok(())
}

fn csv_safe(msg: &str) -> String {
    msg.replace([',', '\n'], ";")
}

pub fn compare_cost(ctx: &Context) -> Res<()> {
    let default_eps: Vec<f64> = (4..=7).map(|e| 2f64.powi(-e)).collect();
    let eps_list: Vec<f64> = ctx.cfg.get_list("eps", &default_eps)?;
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(CliError::Config("eps list must hold positive values".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Config("eps list must be sorted in descending order".into()));
    }
    let alpha = ctx.alpha()?;
    let opts = ctx.pilot_options()?;
    let samplers = Samplers::new(ctx)?;
    let meta = ctx.meta()?;
    let exec = ctx.exec();
    let mut full_pilot = Pilot::new(samplers.get(Kind::FullMc), opts, exec)?;
    let mut sparse_pilot = Pilot::new(samplers.get(Kind::SparseMc), opts, exec)?;
    let mut rows = Vec::new();
    for &eps in &eps_list {
        for kind in Kind::ALL {
            let pilot = if kind.sparse() {
                &mut sparse_pilot
            } else {
                &mut full_pilot
            };
            let row = match run_tolerance(pilot, kind, eps, alpha, exec) {
                Ok(r) => {
                    log::info!("{} eps={eps}: cost {:.4e}", kind.name(), r.total_cost);
                    CostRow {
                        method: kind.name().into(),
                        epsilon: eps,
                        total_cost: r.total_cost,
                        status: "ok".into(),
                    }
                }
                Err(e) if e.is_stability_refusal() => return Err(e.into()),
                Err(e) => {
                    log::warn!("{} eps={eps}: {e}", kind.name());
                    CostRow {
                        method: kind.name().into(),
                        epsilon: eps,
                        total_cost: f64::NAN,
                        status: csv_safe(&e.to_string()),
                    }
                }
            };
            rows.push(row);
        }
    }
    let path = ctx.write("cost.csv", |w| report::write_cost(w, &meta, &rows))?;
    for kind in Kind::ALL {
        let ok: Vec<&CostRow> = rows
            .iter()
            .filter(|r| r.method == kind.name() && r.status == "ok")
            .collect();
        let x: Vec<f64> = ok.iter().map(|r| r.epsilon.log2()).collect();
        let y: Vec<f64> = ok.iter().map(|r| r.total_cost.log2()).collect();
        let e2w: Vec<f64> = ok.iter().map(|r| r.eps2_cost()).collect();
        let spread = e2w.iter().cloned().fold(f64::NAN, f64::max) / e2w.iter().cloned().fold(f64::NAN, f64::min);
        println!(
            "compare-cost {}: points={} slope={} eps2_cost_spread={:.3}",
            kind.name(),
            ok.len(),
            fmt_slope(ols_slope(&x, &y)),
            spread
        );
    }
    println!("compare-cost: pilot_cost_excluded -> {}", path.display());
    Ok(())
}

pub fn oracle_check(ctx: &Context) -> Res<()> {
    let c = &ctx.cfg;
    let params = ctx.params()?.driftless();
    let h: f64 = c.get("h", 0.125)?;
    let lambda: f64 = c.get("lambda", 4.0)?;
    let k: f64 = c.get("k", lambda * h * h)?;
    let p: f64 = c.get("p", 0.25)?;
    let n: usize = c.get("n", 100)?;
    let meta = ctx.meta()?;
    let rows = oracle_rows(&params, k, h, lambda, p, n, ctx.exec())?;
    let path = ctx.write("oracle.csv", |w| report::write_oracle(w, &meta, &rows))?;
    let worst = rows.iter().map(|r| r.bound_ratio).fold(0.0, f64::max);
    println!(
        "oracle-check: frequencies={} max_ratio={:.6e} bound={} -> {}",
        rows.len(),
        worst,
        if worst < 1.0 { "holds" } else { "violated" },
        path.display()
    );
    Ok(())
}

pub fn alpha_search(ctx: &Context) -> Res<()> {
    let method: String = ctx.cfg.get("method", "sparse-mlmc".to_string())?;
    let kind = Kind::parse(&method)?;
    let eps: f64 = ctx.cfg.get("eps", 0.01)?;
    let opts = ctx.pilot_options()?;
    let samplers = Samplers::new(ctx)?;
    let meta = ctx.meta()?;
    let mut pilot = Pilot::new(samplers.get(kind), opts, ctx.exec())?;
    let grid = default_alpha_grid();
    let (best, p) = estimators::alpha_search(&mut pilot, kind.method(), eps, &grid)?;
    // only splits whose level the search already sampled get a prediction
    let mut rows = Vec::new();
    for &a in &grid {
        let mut reachable = None;
        for l in 0..pilot.levels() {
            if pilot.bias(l)? <= a * eps {
                reachable = Some(l);
                break;
            }
        }
        rows.push(match reachable {
            Some(_) => {
                let q = plan(&mut pilot, kind.method(), eps, a)?;
                AlphaRow {
                    alpha: a,
                    level: Some(q.level),
                    predicted_cost: Some(q.cost),
                    status: "ok".into(),
                }
            }
            None => AlphaRow {
                alpha: a,
                level: None,
                predicted_cost: None,
                status: "pruned".into(),
            },
        });
    }
    let path = ctx.write("alpha.csv", |w| report::write_alpha(w, &meta, &rows))?;
    println!(
        "alpha-search {}: eps={} best_alpha={} level={} predicted_cost={:.4e} -> {}",
        kind.name(),
        eps,
        best,
        p.level,
        p.cost,
        path.display()
    );
    Ok(())
}
