//! The Abel operator `A h(t) = ∫_0^t r h(r)/√(t²−r²) dr`, its left inverse
//! `B`, their principal symbols, and the assembly of the boundary trace
//! from a sinogram.
//!
//! Both integrals are evaluated after the substitution `r = t·sin φ`,
//! which removes the square-root singularity:
//! `A h(t) = t ∫_0^{π/2} sin φ · h(t sin φ) dφ`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::interp::{check_grid, differentiate, Interp, Interpolant};
use crate::quadrature::GaussLegendre;
use crate::radon::{Convention, Sinogram};
use crate::{par, Error, Result};

/// Gauss–Legendre nodes used on `[0, π/2]`.
pub const ABEL_NODES: usize = 256;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(ABEL_NODES)
            .mapped(0.0, FRAC_PI_2)
            .map(|(phi, w)| (phi.sin(), w))
            .collect()
    })
}

/// Samples of a function on a strictly increasing positive grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples1D {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Samples1D {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if grid[0] <= 0.0 {
            return Err(Error::InvalidInput("grid must be positive".into()));
        }
        if grid.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Vec<f64>, f: F) -> Result<Self> {
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    /// First and last index with a nonzero value.
    pub fn support(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|&v| v != 0.0)?;
        let last = self.values.iter().rposition(|&v| v != 0.0)?;
        Some((first, last))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn evaluator(&self, kind: Interp) -> Result<Extended> {
        Ok(Extended {
            start: self.grid[0],
            inner: Interpolant::new(&self.grid, &self.values, kind)?,
        })
    }
}

/// Interpolant continued polynomially down to zero.
struct Extended {
    start: f64,
    inner: Interpolant,
}

impl Extended {
    fn eval(&self, x: f64) -> f64 {
        if x < self.start && x >= 0.0 {
            self.inner.extrapolate_left(x)
        } else {
            self.inner.eval(x)
        }
    }
}

/// `A h(t)` for a callable `h`.
pub fn abel_apply_fn<F: Fn(f64) -> f64>(h: F, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    t * rule().iter().map(|&(s, w)| w * s * h(t * s)).sum::<f64>()
}

/// `∫_0^{π/2} H(r sin φ) dφ`, the inner integral of the printed kernel.
fn printed_inner<F: Fn(f64) -> f64>(h: F, r: f64) -> f64 {
    rule().iter().map(|&(s, w)| w * h(r * s)).sum()
}

/// `A h` on the grid of `h` (cubic interpolation between samples).
pub fn abel_apply(h: &Samples1D) -> Result<Samples1D> {
    abel_apply_at(h, &h.grid, Interp::Lagrange4)
}

/// `A h` at arbitrary positive points.
pub fn abel_apply_at(h: &Samples1D, t: &[f64], kind: Interp) -> Result<Samples1D> {
    let f = h.evaluator(kind)?;
    let values = par::map_slice(t, |&ti| abel_apply_fn(|x| f.eval(x), ti));
    Samples1D::new(t.to_vec(), values)
}

/// Inner kernel used by [`abel_invert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbelKernel {
    /// `∫_0^r t·H(t)/√(r²−t²) dt`; makes `B` a left inverse of `A`.
    #[default]
    Corrected,
    /// `∫_0^r H(t)/√(r²−t²) dt`, kept only to demonstrate that it is not.
    Printed,
}

/// `B H(r) = (2/(πr))·d/dr ∫_0^r t H(t)/√(r²−t²) dt` on the grid of `H`.
/// The derivative uses fourth-order differences inside and second-order
/// one-sided ones at the ends.
pub fn abel_invert(big_h: &Samples1D, kernel: AbelKernel) -> Result<Samples1D> {
    let n = big_h.grid.len();
    if n < 5 {
        return Err(Error::InvalidInput(format!("inversion needs at least 5 samples, got {n}")));
    }
    let f = big_h.evaluator(Interp::Lagrange4)?;
    let at_zero = f.inner.extrapolate_left(0.0);
    let scale = big_h.max_abs();
    if at_zero.abs() > 1e-6 * scale {
        return Err(Error::Domain(format!(
            "data do not vanish at t = 0 (extrapolated value {at_zero:.3e})"
        )));
    }
    let inner = par::map_slice(&big_h.grid, |&r| match kernel {
        AbelKernel::Corrected => abel_apply_fn(|x| f.eval(x), r),
        AbelKernel::Printed => printed_inner(|x| f.eval(x), r),
    });
    let d = differentiate(&big_h.grid, &inner);
    let values = big_h
        .grid
        .iter()
        .zip(d)
        .map(|(&r, dv)| 2.0 / (PI * r) * dv)
        .collect();
    Samples1D::new(big_h.grid.clone(), values)
}

/// `√(π/2)·e^{−iπ/4}·√r·(τ₊^{−1/2} + i·τ₋^{−1/2})`.
pub fn principal_symbol_a(r: f64, tau: f64) -> Result<Complex64> {
    if tau == 0.0 {
        return Err(Error::SingularFrequency);
    }
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("r must be positive, got {r}")));
    }
    let phase = Complex64::from_polar((PI / 2.0).sqrt(), -FRAC_PI_4);
    let bracket = if tau > 0.0 {
        Complex64::new(tau.powf(-0.5), 0.0)
    } else {
        Complex64::new(0.0, (-tau).powf(-0.5))
    };
    Ok(phase * r.sqrt() * bracket)
}

/// Reciprocal of the symbol of `A`.
pub fn principal_symbol_b(r: f64, tau: f64) -> Result<Complex64> {
    Ok(principal_symbol_a(r, tau)?.inv())
}

/// Boundary data `Λf(t, s)` on a uniform time grid starting at 0,
/// t-major: `values[n·ns + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub t_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Period of the curve parameter for closed curves.
    pub s_period: Option<f64>,
}

impl BoundaryTrace {
    pub fn new(t_grid: Vec<f64>, s_grid: Vec<f64>, values: Vec<f64>, s_period: Option<f64>) -> Result<Self> {
        check_grid(&t_grid)?;
        check_grid(&s_grid)?;
        if t_grid.len() < 2 {
            return Err(Error::InvalidInput("trace needs at least two time samples".into()));
        }
        let dt = (t_grid[t_grid.len() - 1] - t_grid[0]) / (t_grid.len() - 1) as f64;
        if t_grid.iter().enumerate().any(|(k, &t)| (t - t_grid[0] - dt * k as f64).abs() > 1e-9 * dt.max(1.0)) {
            return Err(Error::Config("trace time grid must be uniform".into()));
        }
        if values.len() != t_grid.len() * s_grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a {}x{} trace",
                values.len(),
                t_grid.len(),
                s_grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("trace values must be finite".into()));
        }
        Ok(Self {
            t_grid,
            s_grid,
            values,
            s_period,
        })
    }

    pub fn zeros(t_grid: Vec<f64>, s_grid: Vec<f64>, s_period: Option<f64>) -> Result<Self> {
        let n = t_grid.len() * s_grid.len();
        Self::new(t_grid, s_grid, vec![0.0; n], s_period)
    }

    pub fn nt(&self) -> usize {
        self.t_grid.len()
    }

    pub fn ns(&self) -> usize {
        self.s_grid.len()
    }

    pub fn dt(&self) -> f64 {
        (self.t_grid[self.nt() - 1] - self.t_grid[0]) / (self.nt() - 1) as f64
    }

    pub fn t_final(&self) -> f64 {
        self.t_grid[self.nt() - 1]
    }

    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.values[n * self.ns() + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Whether `s_grid` is a uniform sampling of one full period.
    pub fn is_periodic(&self) -> bool {
        let Some(period) = self.s_period else {
            return false;
        };
        let ns = self.ns() as f64;
        let ds = period / ns;
        self.s_grid
            .iter()
            .enumerate()
            .all(|(j, &s)| (s - self.s_grid[0] - ds * j as f64).abs() < 1e-9 * period)
    }

    /// Linear interpolation in `t` (zero outside `[t_0, T]`) and in `s`
    /// (periodic when the period is known).
    pub fn sample(&self, t: f64, s: f64) -> f64 {
        let t0 = self.t_grid[0];
        let dt = self.dt();
        let ft = (t - t0) / dt;
        if !(ft >= 0.0 && ft <= (self.nt() - 1) as f64) {
            return 0.0;
        }
        let n = (ft.floor() as usize).min(self.nt() - 2);
        let a = ft - n as f64;
        let (j0, j1, b) = self.s_bracket(s);
        let row = |m: usize| (1.0 - b) * self.get(m, j0) + b * self.get(m, j1);
        (1.0 - a) * row(n) + a * row(n + 1)
    }

    fn s_bracket(&self, s: f64) -> (usize, usize, f64) {
        let g = &self.s_grid;
        let ns = g.len();
        if let Some(p) = self.s_period {
            let x = g[0] + (s - g[0]).rem_euclid(p);
            let k = g.partition_point(|&v| v <= x).saturating_sub(1);
            let (next, width) = if k + 1 < ns { (k + 1, g[k + 1] - g[k]) } else { (0, g[0] + p - g[k]) };
            return (k, next, ((x - g[k]) / width).clamp(0.0, 1.0));
        }
        if s <= g[0] {
            return (0, 0, 0.0);
        }
        if s >= g[ns - 1] {
            return (ns - 1, ns - 1, 0.0);
        }
        let k = g.partition_point(|&v| v <= s) - 1;
        (k, k + 1, (s - g[k]) / (g[k + 1] - g[k]))
    }

    /// Time series at one curve sample.
    pub fn series(&self, j: usize) -> Vec<f64> {
        (0..self.nt()).map(|n| self.get(n, j)).collect()
    }

    pub fn scaled(&self, alpha: f64) -> BoundaryTrace {
        BoundaryTrace {
            values: self.values.iter().map(|v| alpha * v).collect(),
            ..self.clone()
        }
    }

    fn as_table(&self) -> Result<Sinogram> {
        Sinogram::new(Convention::Trace, self.t_grid.clone(), self.s_grid.clone(), self.values.clone())
    }

    /// Same layout as the sinogram CSV with `trace` in the convention column.
    pub fn to_csv(&self) -> Result<String> {
        self.as_table()?.to_csv()
    }

    pub fn from_csv_str(text: &str, s_period: Option<f64>) -> Result<Self> {
        let t = Sinogram::from_csv_str(text)?;
        if t.convention != Convention::Trace {
            return Err(Error::Parse("file does not hold a boundary trace".into()));
        }
        Self::new(t.r_grid, t.s_grid, t.values, s_period)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn to_pgm(&self) -> Result<Vec<u8>> {
        Ok(self.as_table()?.to_pgm())
    }
}

/// `A` of the piecewise-linear interpolant of `(r, m)`, integrated exactly
/// interval by interval. Below the first node the first segment is
/// continued to `r = 0`; beyond the last node the data are zero.
pub fn abel_piecewise_linear(r: &[f64], m: &[f64], t: f64) -> f64 {
    if !(t > 0.0) || r.len() < 2 {
        return 0.0;
    }
    let t2 = t * t;
    let root = |x: f64| (t2 - x * x).max(0.0).sqrt();
    // ∫ x/√(t²−x²) and ∫ x²/√(t²−x²)
    let i1 = |x: f64| -root(x);
    let i2 = |x: f64| 0.5 * t2 * (x / t).clamp(-1.0, 1.0).asin() - 0.5 * x * root(x);
    let mut total = 0.0;
    let mut lo = 0.0;
    for k in 0..r.len() - 1 {
        if lo >= t {
            break;
        }
        let hi = r[k + 1].min(t);
        if hi > lo {
            let b = (m[k + 1] - m[k]) / (r[k + 1] - r[k]);
            let a = m[k] - b * r[k];
            total += a * (i1(hi) - i1(lo)) + b * (i2(hi) - i2(lo));
        }
        lo = r[k + 1];
    }
    total
}

/// `Λ = A` applied in `r` to the circular mean of the data, column by
/// column, evaluated on `t_grid`. Raw data are divided by `2πr`,
/// radial-normalized data by `π`. The mean is taken piecewise linear in `r`.
pub fn lambda_from_sinogram(sg: &Sinogram, t_grid: &[f64], s_period: Option<f64>) -> Result<BoundaryTrace> {
    let mean_factor = |r: f64| match sg.convention {
        Convention::Raw if r > 0.0 => Ok(1.0 / (2.0 * PI * r)),
        Convention::Raw => Ok(0.0),
        Convention::RadialNormalized => Ok(1.0 / PI),
        Convention::Trace => Err(Error::InvalidInput("input is already a trace".into())),
    };
    if sg.nr() < 3 {
        return Err(Error::InvalidInput("need at least three radii".into()));
    }
    let factors = sg.r_grid.iter().map(|&r| mean_factor(r)).collect::<Result<Vec<_>>>()?;
    let (nt, ns) = (t_grid.len(), sg.ns());
    let columns: Vec<Vec<f64>> = par::map_range(ns, |j| {
        let mut mean: Vec<f64> = sg.column(j).iter().zip(&factors).map(|(v, c)| v * c).collect();
        if sg.convention == Convention::Raw && sg.r_grid[0] <= 0.0 {
            // raw data vanish at r = 0; continue the mean linearly
            let (r1, r2) = (sg.r_grid[1], sg.r_grid[2]);
            mean[0] = mean[1] + (mean[1] - mean[2]) * r1 / (r2 - r1);
        }
        t_grid.iter().map(|&t| abel_piecewise_linear(&sg.r_grid, &mean, t)).collect()
    });
    let mut values = vec![0.0; nt * ns];
    for (j, col) in columns.iter().enumerate() {
        for (n, v) in col.iter().enumerate() {
            values[n * ns + j] = *v;
        }
    }
    BoundaryTrace::new(t_grid.to_vec(), sg.s_grid.clone(), values, s_period)
}
