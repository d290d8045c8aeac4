//! CSV output. Every file starts with a `# seed=... config=...` comment and a
//! header row; floats use Rust's shortest round-trip formatting, so equal
//! values always print the same bytes.

use std::io::{self, Write};

use crate::estimators::{EstimatorReport, LevelId, LevelStats};
use crate::spectral::OracleRow;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metadata {
    pub seed: u64,
    pub config_hash: String,
}

fn header<W: Write>(w: &mut W, meta: &Metadata, columns: &str) -> io::Result<()> {
    writeln!(w, "# seed={} config={}", meta.seed, meta.config_hash)?;
    writeln!(w, "{columns}")
}

pub fn write_table1<W: Write>(w: &mut W, meta: &Metadata, stats: &[LevelStats]) -> io::Result<()> {
    header(w, meta, "l1,l2,log2_abs_mean,log2_var,M")?;
    for s in stats {
        if let LevelId::Multi(i) = s.id {
            writeln!(
                w,
                "{},{},{},{},{}",
                i.l1,
                i.l2,
                s.mean.abs().log2(),
                s.variance.log2(),
                s.samples
            )?;
        }
    }
    Ok(())
}

pub fn write_table2<W: Write>(w: &mut W, meta: &Metadata, stats: &[LevelStats]) -> io::Result<()> {
    header(w, meta, "l,log2_abs_mean,log2_var,log2_cost,M")?;
    for s in stats {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.level(),
            s.mean.abs().log2(),
            s.variance.log2(),
            s.cost_per_sample.log2(),
            s.samples
        )?;
    }
    Ok(())
}

/// One row of a cost comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CostRow {
    pub method: String,
    pub epsilon: f64,
    pub total_cost: f64,
    pub status: String,
}

impl CostRow {
    pub fn eps2_cost(&self) -> f64 {
        self.epsilon * self.epsilon * self.total_cost
    }
}

pub fn write_cost<W: Write>(w: &mut W, meta: &Metadata, rows: &[CostRow]) -> io::Result<()> {
    header(w, meta, "method,epsilon,total_cost,eps2_cost,status")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.method,
            r.epsilon,
            r.total_cost,
            r.eps2_cost(),
            r.status
        )?;
    }
    Ok(())
}

pub fn write_oracle<W: Write>(w: &mut W, meta: &Metadata, rows: &[OracleRow]) -> io::Result<()> {
    header(w, meta, "xi,eta,abs_mean_amp,second_moment,bound_ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.xi, r.eta, r.abs_mean_amp, r.second_moment, r.bound_ratio
        )?;
    }
    Ok(())
}

/// Predicted cost of one budget split.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    pub level: Option<u32>,
    pub predicted_cost: Option<f64>,
    pub status: String,
}

pub fn write_alpha<W: Write>(w: &mut W, meta: &Metadata, rows: &[AlphaRow]) -> io::Result<()> {
    header(w, meta, "alpha,level,predicted_cost,status")?;
    for r in rows {
        let level = r.level.map(|l| l.to_string()).unwrap_or_default();
        let cost = r.predicted_cost.map(|c| c.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", r.alpha, level, cost, r.status)?;
    }
    Ok(())
}

/// Per-level breakdown of an estimator run.
pub fn write_report<W: Write>(w: &mut W, meta: &Metadata, report: &EstimatorReport) -> io::Result<()> {
    header(w, meta, "level,mean,variance,samples,cost")?;
    for s in &report.levels {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.id,
            s.mean,
            s.variance,
            s.samples,
            s.cost()
        )?;
    }
    Ok(())
}
