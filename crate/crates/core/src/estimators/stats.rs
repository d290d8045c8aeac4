//! Order-stable sample statistics and log-log slope fits.

use std::fmt;

use crate::error::{Error, Result};

use super::index::LevelIndex;

/// Pairwise (tree) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased two-pass variance; zero for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LevelId {
    Level(u32),
    Multi(LevelIndex),
}

impl fmt::Display for LevelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelId::Level(l) => write!(f, "{l}"),
            LevelId::Multi(i) => write!(f, "{i}"),
        }
    }
}

/// Sample statistics of one level or multi-index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelStats {
    pub id: LevelId,
    pub mean: f64,
    pub variance: f64,
    /// Node updates for one sample.
    pub cost_per_sample: f64,
    pub samples: u64,
}

impl LevelStats {
    pub fn from_samples(id: LevelId, xs: &[f64], cost_per_sample: f64) -> Self {
        LevelStats {
            id,
            mean: mean(xs),
            variance: variance(xs),
            cost_per_sample,
            samples: xs.len() as u64,
        }
    }

    /// Total node updates spent on this level.
    pub fn cost(&self) -> f64 {
        self.cost_per_sample * self.samples as f64
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance / self.samples as f64).sqrt()
    }

    pub fn level(&self) -> u32 {
        match self.id {
            LevelId::Level(l) => l,
            LevelId::Multi(i) => i.sum(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatField {
    Mean,
    Variance,
    Cost,
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: x.len().min(y.len()),
        });
    }
    let mx = mean(x);
    let my = mean(y);
    let sxy: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let sxx: Vec<f64> = x.iter().map(|a| (a - mx) * (a - mx)).collect();
    Ok(pairwise_sum(&sxy) / pairwise_sum(&sxx))
}

/// Slope of `log2 field` against level, over levels `>= 1`. The mean uses
/// its absolute value and the cost is per sample.
pub fn fit_slopes(stats: &[LevelStats], field: StatField) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = stats
        .iter()
        .filter(|s| s.level() >= 1)
        .map(|s| (s.level() as f64, field_value(s, field).log2()))
        .unzip();
    ols_slope(&x, &y)
}

/// Slope of `log2 field` against `l1 + l2` over the interior multi-indices
/// (`l1, l2 >= 1`) of a per-multi-index table.
pub fn fit_interior_slope(stats: &[LevelStats], field: StatField) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = stats
        .iter()
        .filter_map(|s| match s.id {
            LevelId::Multi(i) if i.is_interior() => Some((i.sum() as f64, field_value(s, field).log2())),
            _ => None,
        })
        .unzip();
    ols_slope(&x, &y)
}

fn field_value(s: &LevelStats, field: StatField) -> f64 {
    match field {
        StatField::Mean => s.mean.abs(),
        StatField::Variance => s.variance,
        StatField::Cost => s.cost_per_sample,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geometric(rate: f64) -> Vec<LevelStats> {
        (0..6)
            .map(|l| LevelStats {
                id: LevelId::Level(l),
                mean: 2f64.powf(rate * l as f64),
                variance: 2f64.powf(2.0 * rate * l as f64),
                cost_per_sample: 2f64.powi(3 * l as i32),
                samples: 10,
            })
            .collect()
    }

    #[test]
    fn exact_geometric_slopes() {
        let s = geometric(-2.0);
        assert!((fit_slopes(&s, StatField::Mean).unwrap() + 2.0).abs() < 1e-12);
        assert!((fit_slopes(&s, StatField::Variance).unwrap() + 4.0).abs() < 1e-12);
        assert!((fit_slopes(&s, StatField::Cost).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn interior_slope_ignores_axes() {
        use crate::estimators::LevelIndex;
        let mut s = Vec::new();
        for l1 in 0..4u32 {
            for l2 in 0..4u32 {
                let v = if l1 == 0 || l2 == 0 { 1.0 } else { 2f64.powi(-2 * (l1 + l2) as i32) };
                s.push(LevelStats {
                    id: LevelId::Multi(LevelIndex::new(l1, l2)),
                    mean: -v,
                    variance: v * v,
                    cost_per_sample: 1.0,
                    samples: 4,
                });
            }
        }
        assert!((fit_interior_slope(&s, StatField::Mean).unwrap() + 2.0).abs() < 1e-12);
        assert!((fit_interior_slope(&s, StatField::Variance).unwrap() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let s = geometric(-2.0);
        assert!(matches!(
            fit_slopes(&s[..3], StatField::Mean),
            Err(Error::TooFewPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn small_statistics() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(variance(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(variance(&[5.0]), 0.0);
        assert!(mean(&[]).is_nan());
    }

    proptest! {
        #[test]
        fn pairwise_close_to_naive(xs in proptest::collection::vec(-1e3f64..1e3, 0..300)) {
            let naive: f64 = xs.iter().sum();
            let scale: f64 = xs.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
            prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-12 * scale);
        }

        #[test]
        fn variance_nonnegative(xs in proptest::collection::vec(-1e3f64..1e3, 0..100)) {
            prop_assert!(variance(&xs) >= 0.0);
        }
    }
}
