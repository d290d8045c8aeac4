//! Finite-difference engine on the truncated domain.

mod grid;
mod scheme;
mod tridiag;

pub use grid::{Boundary, Domain, FieldGrid, Grid2D};
pub use scheme::{
    adi_solve, loss_functional, milstein_rhs, solve_path, step, AdiSolver, StepCoeffs, Stepper,
};
pub use tridiag::LineSolver;

/// Writes one field as `layer,x,y,value` rows.
pub fn write_field_csv<W: std::io::Write>(
    w: &mut W,
    field: &FieldGrid,
) -> std::io::Result<()> {
    let g = field.grid();
    for j in 0..g.n_y {
        for i in 0..g.n_x {
            writeln!(w, "{},{},{},{}", field.layer, g.x(i), g.y(j), field.get(i, j))?;
        }
    }
    Ok(())
}
