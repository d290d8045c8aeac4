use crate::error::{Error, Result};

/// Ghost layers on each side of the stored field; the Milstein stencil
/// reaches two nodes out.
pub(crate) const PAD: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Domain {
            x_min: -8.0,
            x_max: 12.0,
            y_min: -8.0,
            y_max: 12.0,
        }
    }
}

impl Domain {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Treatment of the truncation boundary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Zero values on the outermost nodes and beyond.
    #[default]
    Dirichlet,
    /// The domain wraps; the node at `x_max` is identified with `x_min`.
    Periodic,
}

fn exact_ratio(len: f64, h: f64, what: &str) -> Result<usize> {
    let r = len / h;
    let n = r.round();
    if !(h > 0.0) || !r.is_finite() || n < 1.0 || (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "{what}: extent {len} is not an integer multiple of h = {h}"
        )));
    }
    Ok(n as usize)
}

fn node_index(pos: f64, min: f64, h: f64, what: &str) -> usize {
    let r = (pos - min) / h;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.abs().max(1.0) {
        log::warn!("{what} = {pos} is not a grid node (h = {h}); using the nearest node");
    }
    n.max(0.0) as usize
}

/// Uniform mesh on the truncated domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub h_x: f64,
    pub h_y: f64,
    pub domain: Domain,
    pub boundary: Boundary,
    /// Stored nodes along x (boundary nodes included for Dirichlet).
    pub n_x: usize,
    pub n_y: usize,
    /// Node of the initial point.
    pub i0: usize,
    pub j0: usize,
    /// First node of the quadrant functional (the `x = 0` line).
    pub i_zero: usize,
    pub j_zero: usize,
}

impl Grid2D {
    pub fn new(
        h_x: f64,
        h_y: f64,
        domain: Domain,
        boundary: Boundary,
        x0: f64,
        y0: f64,
    ) -> Result<Self> {
        let cx = exact_ratio(domain.width(), h_x, "x")?;
        let cy = exact_ratio(domain.height(), h_y, "y")?;
        let (n_x, n_y) = match boundary {
            Boundary::Dirichlet => (cx + 1, cy + 1),
            Boundary::Periodic => (cx, cy),
        };
        if n_x < 4 || n_y < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 nodes per direction, got {n_x} x {n_y}"
            )));
        }
        let inside = |v: f64, lo: f64, hi: f64| v >= lo && v <= hi;
        if !inside(x0, domain.x_min, domain.x_max) || !inside(y0, domain.y_min, domain.y_max) {
            return Err(Error::InvalidGrid(format!(
                "initial point ({x0}, {y0}) outside the domain"
            )));
        }
        if !inside(0.0, domain.x_min, domain.x_max) || !inside(0.0, domain.y_min, domain.y_max) {
            return Err(Error::InvalidGrid("domain must contain the origin".into()));
        }
        let wrap = |i: usize, n: usize| if i >= n { i - n } else { i };
        let i0 = wrap(node_index(x0, domain.x_min, h_x, "x0"), n_x);
        let j0 = wrap(node_index(y0, domain.y_min, h_y, "y0"), n_y);
        let i_zero = wrap(node_index(0.0, domain.x_min, h_x, "x origin"), n_x);
        let j_zero = wrap(node_index(0.0, domain.y_min, h_y, "y origin"), n_y);
        Ok(Grid2D {
            h_x,
            h_y,
            domain,
            boundary,
            n_x,
            n_y,
            i0,
            j0,
            i_zero,
            j_zero,
        })
    }

    /// Mesh `(h0 2^-l1, h0 2^-l2)` on the default domain.
    pub fn at_level(l1: u32, l2: u32, h0: f64, x0: f64, y0: f64) -> Result<Self> {
        Self::new(
            h0 * 0.5f64.powi(l1 as i32),
            h0 * 0.5f64.powi(l2 as i32),
            Domain::default(),
            Boundary::Dirichlet,
            x0,
            y0,
        )
    }

    pub fn x(&self, i: usize) -> f64 {
        self.domain.x_min + i as f64 * self.h_x
    }

    pub fn y(&self, j: usize) -> f64 {
        self.domain.y_min + j as f64 * self.h_y
    }

    /// Range of node indices that the scheme updates along each direction.
    pub(crate) fn active_x(&self) -> std::ops::Range<usize> {
        match self.boundary {
            Boundary::Dirichlet => 1..self.n_x - 1,
            Boundary::Periodic => 0..self.n_x,
        }
    }

    pub(crate) fn active_y(&self) -> std::ops::Range<usize> {
        match self.boundary {
            Boundary::Dirichlet => 1..self.n_y - 1,
            Boundary::Periodic => 0..self.n_y,
        }
    }

    pub(crate) fn stride(&self) -> usize {
        self.n_x + 2 * PAD
    }

    pub(crate) fn storage_len(&self) -> usize {
        self.stride() * (self.n_y + 2 * PAD)
    }

    /// Node updates per time step in the cost model: cells, not stored nodes.
    pub fn cells(&self) -> f64 {
        (self.domain.width() / self.h_x).round() * (self.domain.height() / self.h_y).round()
    }

    /// Cost of one path at timestep `k` over horizon `t`, in node updates.
    pub fn path_cost(&self, t: f64, k: f64) -> f64 {
        self.cells() * (t / k).round()
    }
}

/// Solution values on a grid at one time layer, stored with ghost layers.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    grid: Grid2D,
    pub layer: usize,
    pub(crate) data: Vec<f64>,
}

impl FieldGrid {
    pub fn zeros(grid: Grid2D) -> Self {
        FieldGrid {
            grid,
            layer: 0,
            data: vec![0.0; grid.storage_len()],
        }
    }

    /// Discrete Dirac mass: `1/(h_x h_y)` at the initial node.
    pub fn dirac(grid: Grid2D) -> Self {
        let mut f = Self::zeros(grid);
        f.set(grid.i0, grid.j0, 1.0 / (grid.h_x * grid.h_y));
        f
    }

    /// Builds a field from node values in row-major order (x fastest).
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.n_y {
            for i in 0..grid.n_x {
                out.set(i, j, f(i, j));
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub(crate) fn idx(&self, i: usize, j: usize) -> usize {
        (j + PAD) * self.grid.stride() + i + PAD
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let p = self.idx(i, j);
        self.data[p] = v;
    }

    /// Node values row by row.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid.n_y).flat_map(move |j| (0..self.grid.n_x).map(move |i| self.get(i, j)))
    }

    /// `h_x h_y` times the sum of node values.
    pub fn mass(&self) -> f64 {
        self.grid.h_x * self.grid.h_y * self.values().sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &FieldGrid) -> f64 {
        self.values()
            .zip(other.values())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Copies wrapped values into the ghost layers (periodic mode only).
    pub(crate) fn fill_ghosts(&mut self) {
        if self.grid.boundary != Boundary::Periodic {
            return;
        }
        let (nx, ny, s) = (self.grid.n_x, self.grid.n_y, self.grid.stride());
        for j in PAD..ny + PAD {
            let row = &mut self.data[j * s..(j + 1) * s];
            for g in 0..PAD {
                row[g] = row[nx + g];
                row[nx + PAD + g] = row[PAD + g];
            }
        }
        for g in 0..PAD {
            self.data.copy_within((ny + g) * s..(ny + g + 1) * s, g * s);
            self.data
                .copy_within((PAD + g) * s..(PAD + g + 1) * s, (ny + PAD + g) * s);
        }
    }
}
