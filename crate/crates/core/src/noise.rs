//! Seedable Brownian increment streams and exact coarsening for level coupling.
//!
//! Each stream is a ChaCha8 generator whose key is derived from the master
//! seed and a purpose tag, and whose 64-bit stream id is the sample index.
//! Identical `(master_seed, tag, sample_index)` triples reproduce a stream bit
//! for bit regardless of which thread draws it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::NormalPair;

/// What a stream is used for. Streams with different tags are independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamTag {
    /// Multi-index table: one shared path per sample across all indices.
    MultiIndex,
    /// Sparse-combination hierarchy at a level (MLMC corrections and plain
    /// sparse MC share these streams).
    Sparse { level: u32 },
    /// Full-grid hierarchy at a level.
    FullGrid { level: u32 },
    /// Free-standing checks and diagnostics.
    Check { id: u32 },
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::MultiIndex => 1 << 32,
            StreamTag::Sparse { level } => (2 << 32) | u64::from(level),
            StreamTag::FullGrid { level } => (3 << 32) | u64::from(level),
            StreamTag::Check { id } => (4 << 32) | u64::from(id),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub sample_index: u64,
    pub tag: StreamTag,
}

impl SeedSpec {
    pub fn new(master_seed: u64, tag: StreamTag, sample_index: u64) -> Self {
        SeedSpec {
            master_seed,
            sample_index,
            tag,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.tag.code().to_le_bytes());
        // fixed domain-separation constant in the remaining key bytes
        key[16..24].copy_from_slice(&0x5a4b_4149_5f4d_4c4d_u64.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.sample_index);
        rng
    }
}

/// Raw (uncorrelated) standard-normal pairs on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    k: f64,
    steps: Vec<NormalPair>,
}

impl BrownianPath {
    pub fn from_steps(k: f64, steps: Vec<NormalPair>) -> Result<Self> {
        if !(k > 0.0) || steps.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "path needs k > 0 and at least one step (k={k}, N={})",
                steps.len()
            )));
        }
        Ok(BrownianPath { k, steps })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[NormalPair] {
        &self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.k * self.steps.len() as f64
    }

    /// Checks `N k = T` up to rounding.
    pub fn check_horizon(&self, t: f64) -> Result<()> {
        if (self.horizon() - t).abs() > 1e-12 * t.max(1.0) {
            return Err(Error::TimeGridMismatch {
                steps: self.len(),
                k: self.k,
                t,
            });
        }
        Ok(())
    }

    /// Terminal values `(W_T^x, W_T^y)` of the raw independent components.
    pub fn terminal_raw(&self) -> (f64, f64) {
        let sk = self.k.sqrt();
        let (sx, sy) = self
            .steps
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.z_x, b + p.z_y));
        (sk * sx, sk * sy)
    }

    /// Terminal values of the correlated Brownian motion.
    pub fn terminal(&self, rho_xy: f64) -> (f64, f64) {
        let (wx, wy) = self.terminal_raw();
        (wx, rho_xy * wx + (1.0 - rho_xy * rho_xy).sqrt() * wy)
    }

    /// Writes the path as little-endian `u64` N, `f64` k, then N pairs.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.steps.len() as u64).to_le_bytes())?;
        w.write_all(&self.k.to_le_bytes())?;
        for p in &self.steps {
            w.write_all(&p.z_x.to_le_bytes())?;
            w.write_all(&p.z_y.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let k = f64::from_le_bytes(b8);
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            let z_x = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let z_y = f64::from_le_bytes(b8);
            steps.push(NormalPair { z_x, z_y });
        }
        Self::from_steps(k, steps)
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Draws `n` i.i.d. standard-normal pairs at timestep `k`.
pub fn sample_path(seed: SeedSpec, n: usize, k: f64) -> Result<BrownianPath> {
    let mut rng = seed.rng();
    let steps = (0..n)
        .map(|_| NormalPair {
            z_x: rng.sample(StandardNormal),
            z_y: rng.sample(StandardNormal),
        })
        .collect();
    BrownianPath::from_steps(k, steps)
}

/// Coarsens by summing blocks of `factor` increments: the coarse normal is
/// `sum(z) / sqrt(factor)` so that `sqrt(factor k) z'` is the exact Wiener
/// increment over the block.
pub fn coarsen(path: &BrownianPath, factor: usize) -> Result<BrownianPath> {
    if factor == 0 || path.len() % factor != 0 {
        return Err(Error::IncompatibleRefinement {
            len: path.len(),
            factor,
        });
    }
    let scale = 1.0 / (factor as f64).sqrt();
    let steps = path
        .steps
        .chunks_exact(factor)
        .map(|block| {
            let (sx, sy) = block
                .iter()
                .fold((0.0, 0.0), |(a, b), p| (a + p.z_x, b + p.z_y));
            NormalPair {
                z_x: sx * scale,
                z_y: sy * scale,
            }
        })
        .collect();
    BrownianPath::from_steps(path.k * factor as f64, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::correlate;
    use proptest::prelude::*;

    fn seed(i: u64) -> SeedSpec {
        SeedSpec::new(42, StreamTag::Check { id: 0 }, i)
    }

    #[test]
    fn same_seed_same_path() {
        let a = sample_path(seed(3), 64, 1.0 / 64.0).unwrap();
        let b = sample_path(seed(3), 64, 1.0 / 64.0).unwrap();
        assert_eq!(a, b);
        let c = sample_path(seed(4), 64, 1.0 / 64.0).unwrap();
        assert_ne!(a, c);
        let d = sample_path(SeedSpec::new(42, StreamTag::Sparse { level: 0 }, 3), 64, 1.0 / 64.0)
            .unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn shape() {
        let p = sample_path(seed(0), 4, 0.25).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.check_horizon(1.0).is_ok());
        assert!(p.check_horizon(2.0).is_err());
    }

    #[test]
    fn streams_uncorrelated_and_standard() {
        let n = 10_000;
        let a = sample_path(seed(10), n, 1.0).unwrap();
        let b = sample_path(seed(11), n, 1.0).unwrap();
        let xs: Vec<f64> = a.steps().iter().map(|p| p.z_x).collect();
        let ys: Vec<f64> = b.steps().iter().map(|p| p.z_x).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&xs), mean(&ys));
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let r = cov / (vx * vy).sqrt();
        assert!(r.abs() < 0.02, "r = {r}");
        assert!(mx.abs() < 0.04);
        assert!((vx / n as f64 - 1.0).abs() < 0.05);
        // the two components of one stream are independent too
        let zs: Vec<f64> = a.steps().iter().map(|p| p.z_y).collect();
        let mz = mean(&zs);
        let c2: f64 = xs.iter().zip(&zs).map(|(x, z)| (x - mx) * (z - mz)).sum::<f64>()
            / (n as f64);
        assert!(c2.abs() < 0.02);
    }

    #[test]
    fn coarsen_examples() {
        let zero = BrownianPath::from_steps(0.25, vec![NormalPair::default(); 8]).unwrap();
        let c = coarsen(&zero, 4).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.steps().iter().all(|p| p.z_x == 0.0 && p.z_y == 0.0));
        assert_eq!(c.k(), 1.0);

        let ones = BrownianPath::from_steps(0.25, vec![NormalPair::new(1.0, 0.0); 4]).unwrap();
        let c = coarsen(&ones, 4).unwrap();
        assert_eq!(c.steps()[0].z_x, 2.0);

        let odd = BrownianPath::from_steps(0.25, vec![NormalPair::default(); 6]).unwrap();
        assert!(matches!(
            coarsen(&odd, 4),
            Err(Error::IncompatibleRefinement { len: 6, factor: 4 })
        ));
    }

    #[test]
    fn coarsen_twice_matches_sixteen_block_sums() {
        let k = 1.0 / 256.0;
        let fine = sample_path(seed(7), 256, k).unwrap();
        let twice = coarsen(&coarsen(&fine, 4).unwrap(), 4).unwrap();
        assert_eq!(twice.k(), 16.0 * k);
        for (n, c) in twice.steps().iter().enumerate() {
            let block = &fine.steps()[16 * n..16 * n + 16];
            let sx: f64 = block.iter().map(|p| k.sqrt() * p.z_x).sum();
            let sy: f64 = block.iter().map(|p| k.sqrt() * p.z_y).sum();
            assert!((twice.k().sqrt() * c.z_x - sx).abs() <= 1e-14 * (1.0 + sx.abs()));
            assert!((twice.k().sqrt() * c.z_y - sy).abs() <= 1e-14 * (1.0 + sy.abs()));
        }
    }

    #[test]
    fn dump_roundtrip() {
        let p = sample_path(seed(1), 16, 1.0 / 16.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("p.bin");
        p.dump(&file).unwrap();
        assert_eq!(std::fs::metadata(&file).unwrap().len(), 16 + 16 * 16);
        assert_eq!(BrownianPath::load(&file).unwrap(), p);
    }

    proptest! {
        #[test]
        fn wiener_sum_exactness(idx in 0u64..1000, blocks in 1usize..32) {
            let k = 1.0 / 64.0;
            let fine = sample_path(seed(idx), 4 * blocks, k).unwrap();
            let coarse = coarsen(&fine, 4).unwrap();
            for (n, c) in coarse.steps().iter().enumerate() {
                let block = &fine.steps()[4 * n..4 * n + 4];
                let sum: f64 = block.iter().map(|p| k.sqrt() * p.z_x).sum();
                let lhs = (4.0 * k).sqrt() * c.z_x;
                prop_assert!((lhs - sum).abs() <= 1e-15 * block.iter().map(|p| (k.sqrt() * p.z_x).abs()).sum::<f64>().max(1e-300) * 4.0);
            }
        }

        #[test]
        fn correlation_commutes_with_coarsening(idx in 0u64..1000, rho in -1.0f64..1.0) {
            let fine = sample_path(seed(idx), 16, 1.0 / 16.0).unwrap();
            let coarse = coarsen(&fine, 4).unwrap();
            for (n, c) in coarse.steps().iter().enumerate() {
                let direct = correlate(*c, rho);
                let via_fine: f64 = fine.steps()[4 * n..4 * n + 4]
                    .iter()
                    .map(|p| correlate(*p, rho))
                    .sum::<f64>() / 2.0;
                let scale = fine.steps()[4 * n..4 * n + 4].iter().map(|p| p.z_x.abs() + p.z_y.abs()).sum::<f64>();
                prop_assert!((direct - via_fine).abs() <= 1e-15 * 8.0 * scale.max(1e-300));
            }
        }
    }
}
