//! Constant-coefficient tridiagonal solves for the ADI sweeps.
//!
//! Every line of one sweep shares the same matrix, so the Thomas elimination
//! factors are computed once. Periodic lines are cyclic tridiagonal and go
//! through Sherman-Morrison on top of the same factors.

use crate::error::{Error, Result};

/// Factored `a x_{i-1} + b x_i + c x_{i+1} = d_i`, optionally with wrap-around.
#[derive(Clone, Debug)]
pub struct LineSolver {
    m: usize,
    a: f64,
    cp: Vec<f64>,
    inv: Vec<f64>,
    cyclic: Option<Cyclic>,
}

#[derive(Clone, Debug)]
struct Cyclic {
    /// Solution of the modified system with the rank-one vector on the right.
    z: Vec<f64>,
    /// `beta / gamma`, where beta is the top-right corner.
    bg: f64,
    /// `1 + z_0 + (beta/gamma) z_{m-1}`.
    denom: f64,
}

fn factor(m: usize, a: f64, diag: &[f64], c: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cp = vec![0.0; m];
    let mut inv = vec![0.0; m];
    let mut prev = 0.0;
    for i in 0..m {
        let pivot = diag[i] - a * prev;
        if !pivot.is_finite() || pivot.abs() < 1e-300 {
            return Err(Error::TridiagonalBreakdown { line: 0, pivot });
        }
        inv[i] = 1.0 / pivot;
        cp[i] = c * inv[i];
        prev = cp[i];
    }
    Ok((cp, inv))
}

impl LineSolver {
    /// Open line of `m` unknowns; neighbours outside the line are zero.
    pub fn new(m: usize, a: f64, b: f64, c: f64) -> Result<Self> {
        check_dominance(a, b, c)?;
        let (cp, inv) = factor(m, a, &vec![b; m], c)?;
        Ok(LineSolver {
            m,
            a,
            cp,
            inv,
            cyclic: None,
        })
    }

    /// Periodic line of `m >= 3` unknowns.
    pub fn cyclic(m: usize, a: f64, b: f64, c: f64) -> Result<Self> {
        check_dominance(a, b, c)?;
        if m < 3 {
            return Err(Error::InvalidGrid("cyclic line needs at least 3 nodes".into()));
        }
        // A = B + u v^T with u = (gamma, 0.., c), v = (1, 0.., a/gamma)
        let (alpha, beta) = (c, a);
        let gamma = -b;
        let mut diag = vec![b; m];
        diag[0] = b - gamma;
        diag[m - 1] = b - alpha * beta / gamma;
        let (cp, inv) = factor(m, a, &diag, c)?;
        let mut solver = LineSolver {
            m,
            a,
            cp,
            inv,
            cyclic: None,
        };
        let mut z = vec![0.0; m];
        z[0] = gamma;
        z[m - 1] = alpha;
        solver.thomas(&mut z);
        let bg = beta / gamma;
        let denom = 1.0 + z[0] + bg * z[m - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::TridiagonalBreakdown { line: 0, pivot: denom });
        }
        solver.cyclic = Some(Cyclic { z, bg, denom });
        Ok(solver)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    fn thomas(&self, d: &mut [f64]) {
        let (a, cp, inv) = (self.a, &self.cp[..], &self.inv[..]);
        let m = self.m;
        let d = &mut d[..m];
        d[0] *= inv[0];
        for i in 1..m {
            d[i] = (d[i] - a * d[i - 1]) * inv[i];
        }
        for i in (0..m - 1).rev() {
            d[i] -= cp[i] * d[i + 1];
        }
    }

    /// Solves in place on a contiguous line.
    pub fn solve(&self, d: &mut [f64]) {
        self.thomas(d);
        if let Some(cy) = &self.cyclic {
            let fact = (d[0] + cy.bg * d[self.m - 1]) / cy.denom;
            for (v, z) in d[..self.m].iter_mut().zip(&cy.z) {
                *v -= fact * z;
            }
        }
    }

    /// Solves `B` equal-length contiguous lines in lockstep, interleaving the
    /// independent recurrences. Line `r` starts at `data[starts[r]]`.
    pub fn solve_interleaved<const B: usize>(&self, data: &mut [f64], starts: [usize; B]) {
        let m = self.m;
        let (a, cp, inv) = (self.a, &self.cp[..m], &self.inv[..m]);
        let mut prev = [0.0; B];
        for r in 0..B {
            let v = data[starts[r]] * inv[0];
            data[starts[r]] = v;
            prev[r] = v;
        }
        for i in 1..m {
            let f = inv[i];
            for r in 0..B {
                let p = starts[r] + i;
                let v = (data[p] - a * prev[r]) * f;
                data[p] = v;
                prev[r] = v;
            }
        }
        for i in (0..m - 1).rev() {
            let f = cp[i];
            for r in 0..B {
                let p = starts[r] + i;
                let v = data[p] - f * prev[r];
                data[p] = v;
                prev[r] = v;
            }
        }
        if let Some(cy) = &self.cyclic {
            for r in 0..B {
                let d = &mut data[starts[r]..starts[r] + m];
                let fact = (d[0] + cy.bg * d[m - 1]) / cy.denom;
                for (v, z) in d.iter_mut().zip(&cy.z) {
                    *v -= fact * z;
                }
            }
        }
    }

    /// Solves many lines at once, one per column: the unknowns of column `i`
    /// are `data[start + r * stride + i]` for `r` in `0..m` and `i` in
    /// `0..width`. Inner loops run along rows so they vectorise.
    pub fn solve_columns(&self, data: &mut [f64], start: usize, stride: usize, width: usize) {
        let m = self.m;
        let a = self.a;
        let row = |r: usize| start + r * stride;
        {
            let s = row(0);
            let f = self.inv[0];
            data[s..s + width].iter_mut().for_each(|v| *v *= f);
        }
        for r in 1..m {
            let (prev, cur) = data.split_at_mut(row(r));
            let p = &prev[row(r - 1)..row(r - 1) + width];
            let f = self.inv[r];
            for (v, q) in cur[..width].iter_mut().zip(p) {
                *v = (*v - a * q) * f;
            }
        }
        for r in (0..m - 1).rev() {
            let (cur, next) = data.split_at_mut(row(r + 1));
            let nx = &next[..width];
            let f = self.cp[r];
            for (v, q) in cur[row(r)..row(r) + width].iter_mut().zip(nx) {
                *v -= f * q;
            }
        }
        if let Some(cy) = &self.cyclic {
            let (first, last) = (row(0), row(m - 1));
            let fact: Vec<f64> = (0..width)
                .map(|i| (data[first + i] + cy.bg * data[last + i]) / cy.denom)
                .collect();
            for r in 0..m {
                let z = cy.z[r];
                let s = row(r);
                for (v, f) in data[s..s + width].iter_mut().zip(&fact) {
                    *v -= f * z;
                }
            }
        }
    }
}

fn check_dominance(a: f64, b: f64, c: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && c.is_finite()) || a.abs() + c.abs() > b.abs() {
        return Err(Error::TridiagonalBreakdown {
            line: 0,
            pivot: b.abs() - a.abs() - c.abs(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gaussian elimination with partial pivoting on a dense copy.
    fn dense_solve(mut mat: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
        let n = rhs.len();
        for col in 0..n {
            let p = (col..n)
                .max_by(|&x, &y| mat[x][col].abs().total_cmp(&mat[y][col].abs()))
                .unwrap();
            mat.swap(col, p);
            rhs.swap(col, p);
            for r in col + 1..n {
                let f = mat[r][col] / mat[col][col];
                for c in col..n {
                    mat[r][c] -= f * mat[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| mat[r][c] * x[c]).sum();
            x[r] = (rhs[r] - s) / mat[r][r];
        }
        x
    }

    fn dense(n: usize, a: f64, b: f64, c: f64, wrap: bool) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = b;
            if i > 0 {
                m[i][i - 1] = a;
            } else if wrap {
                m[i][n - 1] = a;
            }
            if i + 1 < n {
                m[i][i + 1] = c;
            } else if wrap {
                m[i][0] = c;
            }
        }
        m
    }

    #[test]
    fn matches_dense_on_eight_nodes() {
        // zero drift: diagonal 1 + k/h^2, off-diagonals -k/(2 h^2)
        let (k, h) = (1.0 / 64.0, 0.25);
        let off = -k / (2.0 * h * h);
        let diag = 1.0 + k / (h * h);
        let s = LineSolver::new(8, off, diag, off).unwrap();
        for e in 0..8 {
            let mut d = vec![0.0; 8];
            d[e] = 1.0;
            let want = dense_solve(dense(8, off, diag, off, false), d.clone());
            s.solve(&mut d);
            for (x, y) in d.iter().zip(&want) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn asymmetric_and_cyclic_match_dense() {
        let (a, b, c) = (-0.7, 2.1, -0.4);
        let rhs: Vec<f64> = (0..9).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        for wrap in [false, true] {
            let s = if wrap {
                LineSolver::cyclic(9, a, b, c).unwrap()
            } else {
                LineSolver::new(9, a, b, c).unwrap()
            };
            let want = dense_solve(dense(9, a, b, c, wrap), rhs.clone());
            let mut d = rhs.clone();
            s.solve(&mut d);
            for (x, y) in d.iter().zip(&want) {
                assert!((x - y).abs() < 1e-13, "wrap={wrap}");
            }
        }
    }

    #[test]
    fn column_solve_matches_line_solve() {
        for wrap in [false, true] {
            let (a, b, c) = (-0.3, 1.9, -0.6);
            let s = if wrap {
                LineSolver::cyclic(6, a, b, c).unwrap()
            } else {
                LineSolver::new(6, a, b, c).unwrap()
            };
            let (stride, width, start) = (7, 4, 2);
            let mut data: Vec<f64> = (0..stride * 8).map(|i| (i as f64 * 0.37).sin()).collect();
            let orig = data.clone();
            s.solve_columns(&mut data, start, stride, width);
            for col in 0..width {
                let mut line: Vec<f64> = (0..6).map(|r| orig[start + r * stride + col]).collect();
                s.solve(&mut line);
                for r in 0..6 {
                    assert!((data[start + r * stride + col] - line[r]).abs() < 1e-14);
                }
            }
            // entries outside the block are untouched
            assert_eq!(data[0], orig[0]);
            assert_eq!(data[start + width], orig[start + width]);
        }
    }

    #[test]
    fn interleaved_matches_single_lines() {
        for wrap in [false, true] {
            let (a, b, c) = (-0.45, 1.9, -0.35);
            let s = if wrap {
                LineSolver::cyclic(7, a, b, c).unwrap()
            } else {
                LineSolver::new(7, a, b, c).unwrap()
            };
            let mut data: Vec<f64> = (0..40).map(|i| (i as f64 * 0.91).cos()).collect();
            let orig = data.clone();
            s.solve_interleaved(&mut data, [1, 10, 20, 30]);
            for st in [1, 10, 20, 30] {
                let mut line = orig[st..st + 7].to_vec();
                s.solve(&mut line);
                assert_eq!(&data[st..st + 7], &line[..]);
            }
        }
    }

    #[test]
    fn rejects_non_dominant_rows() {
        assert!(matches!(
            LineSolver::new(8, -2.0, 1.0, 0.5),
            Err(Error::TridiagonalBreakdown { .. })
        ));
    }
}
