//! Semi-implicit Milstein step with ADI factorisation.

use crate::error::{Error, Result};
use crate::model::{correlate, ModelParams, NormalPair};
use crate::noise::BrownianPath;

use super::grid::{Boundary, FieldGrid, Grid2D, PAD};
use super::tridiag::LineSolver;

/// Stencil weights of the explicit operator for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepCoeffs {
    /// Multiplies `V_{i+1} - V_{i-1}`.
    pub dx: f64,
    pub dy: f64,
    /// Multiplies `V_{i+2} - 2 V_i + V_{i-2}`.
    pub dxx2: f64,
    pub dyy2: f64,
    /// Multiplies the cross difference.
    pub dxy: f64,
}

impl StepCoeffs {
    pub fn new(params: &ModelParams, grid: &Grid2D, k: f64, z_x: f64, z_tilde_y: f64) -> Self {
        let (hx, hy) = (grid.h_x, grid.h_y);
        let (rx, ry) = (params.rho_x, params.rho_y);
        StepCoeffs {
            dx: -(rx * k).sqrt() * z_x / (2.0 * hx),
            dy: -(ry * k).sqrt() * z_tilde_y / (2.0 * hy),
            dxx2: rx * k * (z_x * z_x - 1.0) / (8.0 * hx * hx),
            dyy2: ry * k * (z_tilde_y * z_tilde_y - 1.0) / (8.0 * hy * hy),
            dxy: (rx * ry).sqrt() * k * z_x * z_tilde_y / (4.0 * hx * hy),
        }
    }
}

/// Writes `M_n V` into the active nodes of `out`. Ghost layers of `field`
/// must be current (zero for Dirichlet, wrapped for periodic).
fn apply_milstein(field: &FieldGrid, c: &StepCoeffs, out: &mut FieldGrid) {
    let g = *field.grid();
    let s = g.stride();
    let xs = g.active_x();
    let (lo, hi) = (xs.start + PAD, xs.end + PAD);
    let v = &field.data;
    for j in g.active_y() {
        let r = (j + PAD) * s;
        let (m2, m1, p1, p2) = (r - 2 * s, r - s, r + s, r + 2 * s);
        let row = &mut out.data[r..r + s];
        for i in lo..hi {
            let c0 = v[r + i];
            let ddx = v[r + i + 1] - v[r + i - 1];
            let ddy = v[p1 + i] - v[m1 + i];
            let dxx = v[r + i + 2] - 2.0 * c0 + v[r + i - 2];
            let dyy = v[p2 + i] - 2.0 * c0 + v[m2 + i];
            let dxy = v[p1 + i + 1] - v[m1 + i + 1] - v[p1 + i - 1] + v[m1 + i - 1];
            row[i] = c0 + c.dx * ddx + c.dy * ddy + c.dxx2 * dxx + c.dyy2 * dyy + c.dxy * dxy;
        }
    }
}

/// The explicit Milstein operator applied to `field`.
pub fn milstein_rhs(
    field: &FieldGrid,
    params: &ModelParams,
    k: f64,
    z_x: f64,
    z_tilde_y: f64,
) -> FieldGrid {
    let mut src = field.clone();
    src.fill_ghosts();
    let mut out = FieldGrid::zeros(*field.grid());
    apply_milstein(&src, &StepCoeffs::new(params, field.grid(), k, z_x, z_tilde_y), &mut out);
    out.layer = field.layer;
    out
}

/// Line operator `I + (mu k / 2h) D - (k / 2h^2) D_2` as `(lower, diag, upper)`.
fn implicit_row(mu: f64, k: f64, h: f64) -> (f64, f64, f64) {
    let adv = mu * k / (2.0 * h);
    let dif = k / (2.0 * h * h);
    (-adv - dif, 1.0 + 2.0 * dif, adv - dif)
}

fn line_solver(boundary: Boundary, n: usize, row: (f64, f64, f64)) -> Result<LineSolver> {
    let (a, b, c) = row;
    match boundary {
        Boundary::Dirichlet => LineSolver::new(n - 2, a, b, c),
        Boundary::Periodic => LineSolver::cyclic(n, a, b, c),
    }
}

/// Both ADI sweeps for a fixed grid, drift and timestep.
#[derive(Clone, Debug)]
pub struct AdiSolver {
    grid: Grid2D,
    x: LineSolver,
    y: LineSolver,
}

impl AdiSolver {
    pub fn new(grid: Grid2D, params: &ModelParams, k: f64) -> Result<Self> {
        Ok(AdiSolver {
            grid,
            x: line_solver(grid.boundary, grid.n_x, implicit_row(params.mu_x, k, grid.h_x))?,
            y: line_solver(grid.boundary, grid.n_y, implicit_row(params.mu_y, k, grid.h_y))?,
        })
    }

    /// x-lines, then y-lines, in place on the active nodes.
    pub fn solve(&self, field: &mut FieldGrid) {
        self.sweep_x(field);
        self.sweep_y(field);
    }

    pub(crate) fn sweep_x(&self, field: &mut FieldGrid) {
        let s = self.grid.stride();
        let xs = self.grid.active_x();
        let first = |j: usize| (j + PAD) * s + xs.start + PAD;
        let ys = self.grid.active_y();
        let mut j = ys.start;
        while j + 4 <= ys.end {
            let starts = [first(j), first(j + 1), first(j + 2), first(j + 3)];
            self.x.solve_interleaved(&mut field.data, starts);
            j += 4;
        }
        for j in j..ys.end {
            let start = first(j);
            self.x.solve(&mut field.data[start..start + xs.len()]);
        }
    }

    pub(crate) fn sweep_y(&self, field: &mut FieldGrid) {
        let s = self.grid.stride();
        let xs = self.grid.active_x();
        let start = (self.grid.active_y().start + PAD) * s + xs.start + PAD;
        self.y.solve_columns(&mut field.data, start, s, xs.len());
    }
}

/// Implicit ADI solve of one step's right-hand side.
pub fn adi_solve(rhs: &FieldGrid, params: &ModelParams, k: f64) -> Result<FieldGrid> {
    let solver = AdiSolver::new(*rhs.grid(), params, k)?;
    let mut out = rhs.clone();
    solver.solve(&mut out);
    Ok(out)
}

/// Reusable time stepper for one grid and timestep.
#[derive(Clone, Debug)]
pub struct Stepper {
    params: ModelParams,
    k: f64,
    adi: AdiSolver,
    scratch: FieldGrid,
}

impl Stepper {
    pub fn new(grid: Grid2D, params: &ModelParams, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidArgument(format!("timestep must be positive, got {k}")));
        }
        Ok(Stepper {
            params: *params,
            k,
            adi: AdiSolver::new(grid, params, k)?,
            scratch: FieldGrid::zeros(grid),
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.adi.grid
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Advances `field` by one step driven by the raw pair.
    pub fn step(&mut self, field: &mut FieldGrid, pair: NormalPair) {
        let zt = correlate(pair, self.params.rho_xy);
        let c = StepCoeffs::new(&self.params, &self.adi.grid, self.k, pair.z_x, zt);
        field.fill_ghosts();
        apply_milstein(field, &c, &mut self.scratch);
        self.adi.solve(&mut self.scratch);
        std::mem::swap(&mut field.data, &mut self.scratch.data);
        field.layer += 1;
    }

    /// Runs the whole path from the Dirac datum, calling `observe` on the
    /// initial layer and after every step.
    pub fn run_with(
        &mut self,
        path: &BrownianPath,
        mut observe: impl FnMut(&FieldGrid),
    ) -> Result<FieldGrid> {
        if (path.k() - self.k).abs() > 1e-14 * self.k {
            return Err(Error::InvalidArgument(format!(
                "path timestep {} differs from solver timestep {}",
                path.k(),
                self.k
            )));
        }
        path.check_horizon(self.params.t)?;
        let mut field = FieldGrid::dirac(self.adi.grid);
        observe(&field);
        for (n, pair) in path.steps().iter().enumerate() {
            self.step(&mut field, *pair);
            observe(&field);
            // cheap periodic guard; a blow-up shows on the peak node first
            if (n + 1) % 64 == 0 && !field.get(self.adi.grid.i0, self.adi.grid.j0).is_finite() {
                return Err(Error::NonFinite { step: n + 1 });
            }
        }
        if !field.is_finite() {
            return Err(Error::NonFinite { step: path.len() });
        }
        Ok(field)
    }

    pub fn run(&mut self, path: &BrownianPath) -> Result<FieldGrid> {
        self.run_with(path, |_| {})
    }
}

/// One step of the scheme.
pub fn step(field: &FieldGrid, params: &ModelParams, k: f64, pair: NormalPair) -> Result<FieldGrid> {
    let mut st = Stepper::new(*field.grid(), params, k)?;
    let mut out = field.clone();
    st.step(&mut out, pair);
    Ok(out)
}

/// Trapezoidal mass in the positive quadrant with half weights on the axes
/// and a quarter weight at the origin.
pub fn loss_functional(field: &FieldGrid) -> f64 {
    let g = field.grid();
    let (iz, jz) = (g.i_zero, g.j_zero);
    let row_sum = |j: usize| {
        let interior: f64 = (iz + 1..g.n_x).map(|i| field.get(i, j)).sum();
        interior + 0.5 * field.get(iz, j)
    };
    let interior: f64 = (jz + 1..g.n_y).map(row_sum).sum();
    g.h_x * g.h_y * (interior + 0.5 * row_sum(jz))
}

/// Quadrant functional of the scheme's solution along one path.
pub fn solve_path(grid: Grid2D, params: &ModelParams, path: &BrownianPath) -> Result<f64> {
    let lambda_warn = 4.0;
    let k = path.k();
    if k > lambda_warn * grid.h_x.min(grid.h_y).powi(2) {
        log::debug!("k = {k} is large relative to h^2; the scheme stays stable but accuracy drops");
    }
    params.require_stable()?;
    let mut st = Stepper::new(grid, params, k)?;
    Ok(loss_functional(&st.run(path)?))
}
