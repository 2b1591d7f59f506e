//! One-dimensional interpolation on strictly increasing grids.

use crate::{Error, Result};

/// Interpolation scheme for sampled 1D data. Outside the grid the
/// interpolant is zero (data are compactly supported).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Linear,
    CubicSpline,
    /// Local cubic through the four nearest nodes; exact on cubics.
    Lagrange4,
}

/// A sampled function with a prepared interpolant.
#[derive(Debug, Clone)]
pub struct Interpolant {
    grid: Vec<f64>,
    values: Vec<f64>,
    // second derivatives for the spline, empty otherwise
    m: Vec<f64>,
    kind: Interp,
}

impl Interpolant {
    pub fn new(grid: &[f64], values: &[f64], kind: Interp) -> Result<Self> {
        check_grid(grid)?;
        if grid.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        let m = match kind {
            Interp::CubicSpline if grid.len() >= 3 => natural_spline(grid, values),
            _ => Vec::new(),
        };
        Ok(Self {
            grid: grid.to_vec(),
            values: values.to_vec(),
            m,
            kind,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        let n = g.len();
        if n == 1 {
            return if x == g[0] { self.values[0] } else { 0.0 };
        }
        if !(x >= g[0] && x <= g[n - 1]) {
            return 0.0;
        }
        let i = match g.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        if self.kind == Interp::Lagrange4 && n >= 4 {
            let lo = i.saturating_sub(1).min(n - 4);
            return lagrange(&g[lo..lo + 4], &self.values[lo..lo + 4], x);
        }
        let h = g[i + 1] - g[i];
        let a = (g[i + 1] - x) / h;
        let b = 1.0 - a;
        let lin = a * self.values[i] + b * self.values[i + 1];
        if self.m.is_empty() {
            lin
        } else {
            lin + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Polynomial continuation below the first node through the first
    /// three (or two, for linear) samples.
    pub fn extrapolate_left(&self, x: f64) -> f64 {
        let k = match self.kind {
            Interp::Linear => 2,
            _ => 3,
        }
        .min(self.grid.len());
        lagrange(&self.grid[..k], &self.values[..k], x)
    }
}

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut sum = 0.0;
    for (a, (&xa, &ya)) in xs.iter().zip(ys).enumerate() {
        let mut w = 1.0;
        for (b, &xb) in xs.iter().enumerate() {
            if a != b {
                w *= (x - xb) / (xa - xb);
            }
        }
        sum += w * ya;
    }
    sum
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite grid point".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn natural_spline(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    // tridiagonal solve for interior second derivatives
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        let diag = 2.0 * (h0 + h1);
        let (cp, dp) = if i == 1 { (0.0, 0.0) } else { (c[i - 1], d[i - 1]) };
        let denom = diag - h0 * cp;
        c[i] = h1 / denom;
        d[i] = (rhs - h0 * dp) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

/// Weights for the derivative at `x0` of the Lagrange interpolant through
/// `xs` (Fornberg's algorithm, first derivative only).
pub(crate) fn derivative_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    // c[k][j]: weight of point j for derivative order k (k = 0, 1)
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// First derivative of grid data: 5-point stencil in the interior,
/// 3-point one-sided at the two ends.
pub(crate) fn differentiate(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let range = if n < 3 {
                0..n
            } else if i == 0 {
                0..3
            } else if i == n - 1 {
                n - 3..n
            } else if i == 1 || i == n - 2 || n < 5 {
                i - 1..i + 2
            } else {
                i - 2..i + 3
            };
            let w = derivative_weights(grid[i], &grid[range.clone()]);
            w.iter().zip(&values[range]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_smooth_function() {
        let x: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|v| (3.0 * v).sin()).collect();
        let s = Interpolant::new(&x, &y, Interp::CubicSpline).unwrap();
        for &t in &[0.3333, 1.0101, 1.7777] {
            assert!((s.eval(t) - (3.0 * t).sin()).abs() < 1e-7);
        }
        assert_eq!(s.eval(-0.1), 0.0);
        assert_eq!(s.eval(2.5), 0.0);
    }

    #[test]
    fn linear_is_exact_on_lines() {
        let x = [0.0, 0.5, 2.0];
        let y = [1.0, 2.0, 5.0];
        let s = Interpolant::new(&x, &y, Interp::Linear).unwrap();
        assert!((s.eval(1.25) - 3.5).abs() < 1e-15);
    }

    #[test]
    fn fornberg_weights_match_centered_stencil() {
        let w = derivative_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_is_fourth_order_inside() {
        let x: Vec<f64> = (0..50).map(|i| 0.1 + i as f64 * 0.02).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(4)).collect();
        let d = differentiate(&x, &y);
        for i in 2..48 {
            assert!((d[i] - 4.0 * x[i].powi(3)).abs() < 1e-11);
        }
        assert!((d[0] - 4.0 * x[0].powi(3)).abs() < 1e-2);
    }

    #[test]
    fn lagrange_is_exact_on_cubics() {
        let x: Vec<f64> = (0..20).map(|i| 0.05 + 0.1 * i as f64 + 0.01 * (i % 3) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - v + 2.0 * v * v - 0.5 * v * v * v).collect();
        let s = Interpolant::new(&x, &y, Interp::Lagrange4).unwrap();
        for &t in &[0.07, 0.77, 1.5, x[19] - 1e-3] {
            assert!((s.eval(t) - (1.0 - t + 2.0 * t * t - 0.5 * t * t * t)).abs() < 1e-12);
        }
        assert!((s.extrapolate_left(0.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Interpolant::new(&[0.0, 0.0], &[1.0, 1.0], Interp::Linear).is_err());
        assert!(Interpolant::new(&[0.0, 1.0], &[1.0], Interp::Linear).is_err());
    }
}
