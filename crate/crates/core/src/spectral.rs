//! Fourier symbols of the scheme: per-step amplification factors, their
//! exact first and second moments, the high-wave decay bound, and a periodic
//! solver that works mode by mode.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fd::{Boundary, FieldGrid, Grid2D};
use crate::model::{correlate, ModelParams, NormalPair};
use crate::noise::BrownianPath;

/// Trigonometric symbols of the difference operators at `(xi, eta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolSet {
    pub a_x: f64,
    pub a_y: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub c_x: f64,
    pub c_y: f64,
    pub d: f64,
    pub u: f64,
    pub v: f64,
}

fn sinc2(half: f64) -> f64 {
    if half == 0.0 {
        1.0
    } else {
        (half.sin() / half).powi(2)
    }
}

pub fn symbols(xi: f64, eta: f64, h_x: f64, h_y: f64) -> SymbolSet {
    let (sx, sy) = ((xi * h_x).sin(), (eta * h_y).sin());
    let (sx2, sy2) = ((xi * h_x / 2.0).sin(), (eta * h_y / 2.0).sin());
    SymbolSet {
        a_x: -2.0 * sx2 * sx2 / (h_x * h_x),
        a_y: -2.0 * sy2 * sy2 / (h_y * h_y),
        b_x: -sx * sx / (2.0 * h_x * h_x),
        b_y: -sy * sy / (2.0 * h_y * h_y),
        c_x: sx / h_x,
        c_y: sy / h_y,
        d: -sx * sy / (h_x * h_y),
        u: sinc2(xi * h_x / 2.0),
        v: sinc2(eta * h_y / 2.0),
    }
}

/// Which implicit operator sits in the denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Unfactorised implicit step, `1 - (a_x + a_y) k`.
    Full,
    /// ADI factorisation, `(1 - a_x k)(1 - a_y k)`.
    Adi,
}

/// Scheme symbol at fixed parameters, timestep and mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeSymbol {
    pub params: ModelParams,
    pub k: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub variant: Variant,
    /// Include the advection terms in the denominator. Off by default, which
    /// matches the driftless analysis.
    pub with_drift: bool,
}

impl SchemeSymbol {
    pub fn new(params: ModelParams, k: f64, h_x: f64, h_y: f64, variant: Variant) -> Self {
        SchemeSymbol {
            params,
            k,
            h_x,
            h_y,
            variant,
            with_drift: false,
        }
    }

    pub fn with_drift(mut self) -> Self {
        self.with_drift = true;
        self
    }

    pub fn denominator(&self, xi: f64, eta: f64) -> Complex64 {
        let s = symbols(xi, eta, self.h_x, self.h_y);
        let k = self.k;
        let (mx, my) = if self.with_drift {
            (
                self.params.mu_x * k * (xi * self.h_x).sin() / self.h_x,
                self.params.mu_y * k * (eta * self.h_y).sin() / self.h_y,
            )
        } else {
            (0.0, 0.0)
        };
        match self.variant {
            Variant::Full => Complex64::new(1.0 - (s.a_x + s.a_y) * k, mx + my),
            Variant::Adi => {
                Complex64::new(1.0 - s.a_x * k, mx) * Complex64::new(1.0 - s.a_y * k, my)
            }
        }
    }

    /// Numerator for independent normals `z_x` and the correlated `z_tilde_y`.
    pub fn numerator(&self, xi: f64, eta: f64, z_x: f64, z_tilde_y: f64) -> Complex64 {
        let s = symbols(xi, eta, self.h_x, self.h_y);
        let p = &self.params;
        let k = self.k;
        let im = -k.sqrt() * (s.c_x * p.rho_x.sqrt() * z_x + s.c_y * p.rho_y.sqrt() * z_tilde_y);
        let re = 1.0
            + k * (s.b_x * p.rho_x * (z_x * z_x - 1.0)
                + s.b_y * p.rho_y * (z_tilde_y * z_tilde_y - 1.0)
                + s.d * (p.rho_x * p.rho_y).sqrt() * z_x * z_tilde_y);
        Complex64::new(re, im)
    }

    /// Amplification factor `C_n` for one raw pair.
    pub fn amplification(&self, xi: f64, eta: f64, pair: NormalPair) -> Complex64 {
        let zt = correlate(pair, self.params.rho_xy);
        self.numerator(xi, eta, pair.z_x, zt) / self.denominator(xi, eta)
    }

    /// `E[C_n]`.
    pub fn moment_e(&self, xi: f64, eta: f64) -> Complex64 {
        let s = symbols(xi, eta, self.h_x, self.h_y);
        let p = &self.params;
        let delta = s.d * (p.rho_x * p.rho_y).sqrt();
        Complex64::new(1.0 + self.k * delta * p.rho_xy, 0.0) / self.denominator(xi, eta)
    }

    /// `E[|C_n|^2]` from the Gaussian moments of `(z, z~)`.
    pub fn moment_e2(&self, xi: f64, eta: f64) -> f64 {
        let s = symbols(xi, eta, self.h_x, self.h_y);
        let p = &self.params;
        let k = self.k;
        let r = p.rho_xy;
        let g1 = s.c_x * p.rho_x.sqrt();
        let g2 = s.c_y * p.rho_y.sqrt();
        let b1 = s.b_x * p.rho_x;
        let b2 = s.b_y * p.rho_y;
        let dl = s.d * (p.rho_x * p.rho_y).sqrt();
        // Q = b1 (z^2 - 1) + b2 (z~^2 - 1) + dl z z~; E[Q] = dl r
        let eq2 = 2.0 * b1 * b1
            + 2.0 * b2 * b2
            + dl * dl * (1.0 + 2.0 * r * r)
            + 4.0 * b1 * b2 * r * r
            + 4.0 * (b1 + b2) * dl * r;
        let noise = g1 * g1 + g2 * g2 + 2.0 * g1 * g2 * r;
        let num = 1.0 + 2.0 * k * dl * r + k * k * eq2 + k * noise;
        num / self.denominator(xi, eta).norm_sqr()
    }
}

/// Smallest slack in the stability conditions and in `rho < 1`.
pub fn beta(params: &ModelParams) -> f64 {
    let (rx, ry, r) = (params.rho_x, params.rho_y, params.rho_xy.abs());
    [
        1.0 - rx,
        1.0 - ry,
        1.0 - 2.0 * rx * rx * (1.0 + 2.0 * r),
        1.0 - 2.0 * ry * ry * (1.0 + 2.0 * r),
        1.0 - 2.0 * rx * ry * (1.0 + 2.0 * r + 3.0 * r * r),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// Decay constant `8 beta T / (pi^2 (1 + lambda pi^2 / 4)^2)`.
pub fn kappa(params: &ModelParams, lambda: f64) -> Result<f64> {
    let b = beta(params);
    if !(b > 0.0) {
        return Err(Error::StabilityMarginViolated(b));
    }
    Ok(8.0 * b * params.t / (PI * PI * (1.0 + 0.25 * lambda * PI * PI).powi(2)))
}

/// One frequency of a decay sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleRow {
    pub xi: f64,
    pub eta: f64,
    pub abs_mean_amp: f64,
    pub second_moment: f64,
    pub bound_ratio: f64,
}

/// High-wave frequencies: `n` values of `xi` in `(h^-p, pi/(2h)]`, and `n`
/// values of `eta` over the same band with both signs.
pub fn high_wave_grid(h: f64, p: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let lo = h.powf(-p);
    let hi = PI / (2.0 * h);
    let band = |i: usize, m: usize| lo + (hi - lo) * (i + 1) as f64 / m as f64;
    let xi: Vec<f64> = (0..n).map(|i| band(i, n)).collect();
    let half = n / 2;
    let mut eta: Vec<f64> = (0..half).map(|i| -band(i, half.max(1))).collect();
    eta.extend((0..n - half).map(|i| band(i, n - half)));
    (xi, eta)
}

/// Per-frequency rows of the high-wave sweep, using the unfactorised
/// denominator as in the decay analysis.
pub fn oracle_rows(
    params: &ModelParams,
    k: f64,
    h: f64,
    lambda: f64,
    p: f64,
    n: usize,
    exec: Execution,
) -> Result<Vec<OracleRow>> {
    let kap = kappa(params, lambda)?;
    if !(0.0..0.5).contains(&p) || h.powf(-p) >= PI / (2.0 * h) {
        return Err(Error::InvalidArgument(format!(
            "empty high-wave band for h = {h}, p = {p}"
        )));
    }
    let steps = (params.t / k).round() as i32;
    let sym = SchemeSymbol::new(*params, k, h, h, Variant::Full);
    let (xis, etas) = high_wave_grid(h, p, n);
    let rows = exec.map(0..(n * n) as u64, |idx| {
        let (xi, eta) = (xis[idx as usize / n], etas[idx as usize % n]);
        let e2 = sym.moment_e2(xi, eta);
        Ok(OracleRow {
            xi,
            eta,
            abs_mean_amp: sym.moment_e(xi, eta).norm(),
            second_moment: e2,
            bound_ratio: e2.powi(steps) * (kap * (xi * xi + eta * eta)).exp(),
        })
    })?;
    Ok(rows)
}

/// Worst ratio `E[|C|^2]^N exp(kappa (xi^2 + eta^2))` over the high-wave
/// sweep; the decay bound holds when it is below 1.
pub fn decay_check(params: &ModelParams, k: f64, h: f64, lambda: f64, p: f64) -> Result<f64> {
    let rows = oracle_rows(params, k, h, lambda, p, 100, Execution::default())?;
    Ok(rows.iter().map(|r| r.bound_ratio).fold(0.0, f64::max))
}

fn fft2(data: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (fx, fy) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    for row in data.chunks_exact_mut(nx) {
        fx.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = data[j * nx + i];
        }
        fy.process(&mut col);
        for j in 0..ny {
            data[j * nx + i] = col[j];
        }
    }
}

/// Evolves the Dirac datum on a periodic grid by multiplying each discrete
/// Fourier mode by the ADI amplification factors (drift included), then
/// transforms back.
pub fn spectral_solve_periodic(
    grid: Grid2D,
    params: &ModelParams,
    path: &BrownianPath,
) -> Result<FieldGrid> {
    spectral_solve_steps(grid, params, path.k(), path.steps())
}

/// Same as [`spectral_solve_periodic`] for a bare slice of pairs, which may
/// be empty.
pub fn spectral_solve_steps(
    grid: Grid2D,
    params: &ModelParams,
    k: f64,
    steps: &[NormalPair],
) -> Result<FieldGrid> {
    if grid.boundary != Boundary::Periodic {
        return Err(Error::InvalidGrid("spectral solve needs a periodic grid".into()));
    }
    let (nx, ny) = (grid.n_x, grid.n_y);
    let init = FieldGrid::dirac(grid);
    let mut modes: Vec<Complex64> = init.values().map(|v| Complex64::new(v, 0.0)).collect();
    fft2(&mut modes, nx, ny, false);
    let sym = SchemeSymbol::new(*params, k, grid.h_x, grid.h_y, Variant::Adi).with_drift();
    for (m2, row) in modes.chunks_exact_mut(nx).enumerate() {
        let eta = 2.0 * PI * m2 as f64 / (ny as f64 * grid.h_y);
        for (m1, x) in row.iter_mut().enumerate() {
            let xi = 2.0 * PI * m1 as f64 / (nx as f64 * grid.h_x);
            for pair in steps {
                *x *= sym.amplification(xi, eta, *pair);
            }
        }
    }
    fft2(&mut modes, nx, ny, true);
    let scale = 1.0 / (nx * ny) as f64;
    let mut out = FieldGrid::from_fn(grid, |i, j| modes[j * nx + i].re * scale);
    out.layer = steps.len();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::Domain;

    #[test]
    fn symbols_at_zero_and_nyquist() {
        let s = symbols(0.0, 0.0, 0.25, 0.5);
        assert_eq!((s.a_x, s.b_x, s.c_x, s.d), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((s.u, s.v), (1.0, 1.0));
        let h = 0.25;
        let s = symbols(PI / h, 0.3, h, h);
        assert!((s.a_x + 2.0 / (h * h)).abs() < 1e-12);
        assert!(s.c_x.abs() < 1e-12 && s.b_x.abs() < 1e-12);
    }

    #[test]
    fn symbol_parity() {
        let (a, b) = (symbols(1.3, 0.7, 0.25, 0.25), symbols(-1.3, 0.7, 0.25, 0.25));
        assert_eq!(a.a_x, b.a_x);
        assert_eq!(a.b_x, b.b_x);
        assert_eq!(a.c_x, -b.c_x);
        assert_eq!(a.d, -b.d);
    }

    #[test]
    fn constant_mode_preserved() {
        let p = ModelParams::reference();
        for v in [Variant::Full, Variant::Adi] {
            let s = SchemeSymbol::new(p, 1.0 / 64.0, 0.25, 0.25, v);
            let c = s.amplification(0.0, 0.0, NormalPair::new(1.7, -2.2));
            assert_eq!(c, Complex64::new(1.0, 0.0));
            assert_eq!(s.moment_e(0.0, 0.0), Complex64::new(1.0, 0.0));
            assert_eq!(s.moment_e2(0.0, 0.0), 1.0);
        }
    }

    #[test]
    fn deterministic_symbol_is_heat_contraction() {
        let p = ModelParams::reference().deterministic();
        let s = SchemeSymbol::new(p, 1.0 / 64.0, 0.25, 0.25, Variant::Full);
        let c = s.amplification(2.0, -1.0, NormalPair::new(0.4, 0.4));
        assert_eq!(c.im, 0.0);
        assert!(c.re > 0.0 && c.re < 1.0);
        let sy = symbols(2.0, -1.0, 0.25, 0.25);
        assert!((c.re - 1.0 / (1.0 - (sy.a_x + sy.a_y) / 64.0)).abs() < 1e-15);
        assert!((s.moment_e2(2.0, -1.0) - c.re * c.re).abs() < 1e-15);
    }

    #[test]
    fn variants_differ_by_cross_term() {
        let p = ModelParams::reference();
        let (k, h) = (1.0 / 64.0, 0.25);
        let pair = NormalPair::new(0.3, -1.2);
        let full = SchemeSymbol::new(p, k, h, h, Variant::Full).amplification(1.0, 1.0, pair);
        let adi = SchemeSymbol::new(p, k, h, h, Variant::Adi).amplification(1.0, 1.0, pair);
        let s = symbols(1.0, 1.0, h, h);
        let ratio = full / adi;
        let want = 1.0 + s.a_x * s.a_y * k * k / (1.0 - (s.a_x + s.a_y) * k);
        assert!((ratio.re - want).abs() < 1e-14 && ratio.im.abs() < 1e-14);
    }

    #[test]
    fn one_dimensional_reduction() {
        let p = ModelParams {
            rho_xy: 0.0,
            ..ModelParams::reference()
        };
        let (k, h) = (1.0 / 32.0, 0.5);
        let s = SchemeSymbol::new(p, k, h, h, Variant::Full);
        let sy = symbols(1.7, 0.0, h, h);
        let want = (1.0 + k * sy.c_x.powi(2) * p.rho_x + 2.0 * k * k * sy.b_x.powi(2) * p.rho_x.powi(2))
            / (1.0 - sy.a_x * k).powi(2);
        assert!((s.moment_e2(1.7, 0.0) - want).abs() < 1e-14);
    }

    #[test]
    fn beta_and_kappa_reference_values() {
        let p = ModelParams::reference();
        assert!((beta(&p) - 0.7994).abs() < 1e-12);
        let want = 8.0 * 0.7994 / (PI * PI * (1.0 + PI * PI).powi(2));
        assert!((kappa(&p, 4.0).unwrap() - want).abs() < 1e-15);
        let bad = ModelParams {
            rho_x: 0.9,
            rho_y: 0.9,
            rho_xy: 1.0,
            ..p
        };
        assert!(matches!(kappa(&bad, 4.0), Err(Error::StabilityMarginViolated(_))));
    }

    #[test]
    fn zero_steps_reproduce_dirac() {
        let g = Grid2D::new(0.5, 0.5, Domain::default(), Boundary::Periodic, 2.0, 2.0).unwrap();
        let out = spectral_solve_steps(g, &ModelParams::reference(), 0.25, &[]).unwrap();
        assert!(out.max_abs_diff(&FieldGrid::dirac(g)) < 1e-13);
    }
}
