//! Singularity cancellation for radial data on the unit circle.
//!
//! The phantom is the indicator of `|x| < 1/2`. Its transform has a
//! one-sided `h^{j+1/2}` expansion at `r = 1/2 + h`. A ghost
//! `g = H(t)·Σ a_k t^k`, `t = |x|² − 9/4`, lives outside the unit disc and
//! its transform has the same kind of expansion at the same radius, so the
//! coefficients `a_k` can be chosen to cancel the phantom's terms order by
//! order.

use nalgebra::{DMatrix, DVector};

use crate::fields::{JumpSeries, JumpSide, RadialProfile};
use crate::quadrature::Adaptive;
use crate::radon::{radial_transform, radial_transform_with};
use crate::{par, Error, Result};

/// Squared radius of the ghost's jump.
pub const GHOST_JUMP: f64 = 2.25;
/// Radius at which both singularities meet.
pub const BASE_RADIUS: f64 = 0.5;
/// Default fit window and sample count.
pub const DEFAULT_H_MAX: f64 = 1e-2;
pub const DEFAULT_SAMPLES: usize = 40;
const H_MIN: f64 = 1e-6;
const GUARD_TERMS: usize = 2;
const MAX_COND: f64 = 1e10;

/// `F(r0 + h) ≈ Σ_j c_j h^{j+1/2}` for small `h > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConormalSeries {
    pub r0: f64,
    pub coeffs: Vec<f64>,
    pub uncertainty: Vec<f64>,
    pub h_max: f64,
}

impl ConormalSeries {
    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * h.powf(j as f64 + 0.5))
            .sum()
    }
}

/// Ghost jump location and polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostSpec {
    pub t_jump: f64,
    pub coeffs: Vec<f64>,
}

impl GhostSpec {
    pub fn new(t_jump: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(t_jump > 1.0) {
            return Err(Error::InvalidInput(format!(
                "ghost jump must lie outside the unit disc, got |x|² = {t_jump}"
            )));
        }
        Ok(Self { t_jump, coeffs })
    }

    pub fn to_profile(&self) -> RadialProfile {
        RadialProfile::Jump(JumpSeries {
            t_jump: self.t_jump,
            coeffs: self.coeffs.clone(),
            side: JumpSide::Above,
            cutoff: None,
        })
    }

    /// The ghost truncated to its first `n` coefficients.
    pub fn truncated(&self, n: usize) -> GhostSpec {
        GhostSpec {
            t_jump: self.t_jump,
            coeffs: self.coeffs.iter().take(n).copied().collect(),
        }
    }
}

/// Geometric samples on `[lo, hi]`.
pub fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

struct Fit {
    coeffs: Vec<f64>,
    std_err: Vec<f64>,
}

/// Least squares `y ≈ Σ_j c_j x^j` via SVD, `columns` terms.
fn poly_fit(x: &[f64], y: &[f64], columns: usize) -> Result<Fit> {
    let a = DMatrix::from_fn(x.len(), columns, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > MAX_COND {
        return Err(Error::IllConditioned(cond));
    }
    let c = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::InvalidInput(format!("least squares failed: {e}")))?;
    let resid = &a * &c - &b;
    let dof = (x.len() as f64 - columns as f64).max(1.0);
    let sigma2 = resid.norm_squared() / dof;
    let ata_inv = (a.transpose() * &a)
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    let std_err = (0..columns).map(|j| (sigma2 * ata_inv[(j, j)]).sqrt()).collect();
    Ok(Fit {
        coeffs: c.iter().copied().collect(),
        std_err,
    })
}

/// Fits `F(h) ≈ Σ_{j<n_terms} c_j h^{j+1/2}` from samples of `F` at
/// geometric points in `[1e-6, h_max]`. The fit is done on `F(h)/√h` in
/// the scaled variable `h/h_max` with two extra guard terms absorbing the
/// truncation; the uncertainty combines the change when one more term is
/// added and the coefficient standard error.
pub fn conormal_expand<F>(f: F, n_terms: usize, h_max: f64) -> Result<ConormalSeries>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    conormal_expand_with(f, n_terms, h_max, DEFAULT_SAMPLES)
}

pub fn conormal_expand_with<F>(f: F, n_terms: usize, h_max: f64, samples: usize) -> Result<ConormalSeries>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    if n_terms == 0 || n_terms > 4 {
        return Err(Error::InvalidInput(format!("n_terms must be in 1..=4, got {n_terms}")));
    }
    if !(h_max > H_MIN) {
        return Err(Error::InvalidInput(format!("h_max must exceed {H_MIN}, got {h_max}")));
    }
    let columns = n_terms + GUARD_TERMS;
    if samples < columns + 2 {
        return Err(Error::InvalidInput(format!("need at least {} samples", columns + 2)));
    }
    let hs = geometric(H_MIN, h_max, samples);
    let values = par::map_slice(&hs, |&h| f(h)).into_iter().collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = hs.iter().map(|h| h / h_max).collect();
    let y: Vec<f64> = hs.iter().zip(&values).map(|(h, v)| v / h.sqrt()).collect();
    let base = poly_fit(&x, &y, columns)?;
    let more = poly_fit(&x, &y, columns + 1)?;
    let unscale = |j: usize| h_max.powi(j as i32);
    let coeffs = (0..n_terms).map(|j| base.coeffs[j] / unscale(j)).collect();
    let uncertainty = (0..n_terms)
        .map(|j| ((base.coeffs[j] - more.coeffs[j]).abs() + base.std_err[j]) / unscale(j))
        .collect();
    Ok(ConormalSeries {
        r0: BASE_RADIUS,
        coeffs,
        uncertainty,
        h_max,
    })
}

/// Series of `R f(1/2 + h)` for a radial profile.
pub fn profile_series(profile: &RadialProfile, n_terms: usize, h_max: f64) -> Result<ConormalSeries> {
    conormal_expand(|h| radial_transform(profile, BASE_RADIUS + h), n_terms, h_max)
}

/// The phantom: indicator of `|x| < 1/2`.
pub fn phantom() -> RadialProfile {
    RadialProfile::disc(BASE_RADIUS).expect("positive radius")
}

/// `A_k(h) = R[H(t)·t^k](1/2 + h)`, `t = |x|² − 9/4`.
pub fn basis_series(k: usize, n_terms: usize, h_max: f64) -> Result<ConormalSeries> {
    if k > 3 {
        return Err(Error::InvalidInput(format!("basis index must be at most 3, got {k}")));
    }
    profile_series(&RadialProfile::step_monomial(GHOST_JUMP, k)?, n_terms, h_max)
}

/// Forward substitution on the triangular system
/// `Σ_{m≤k} a_m·basis_m[k] = target[k]`.
pub fn solve_ghost_coeffs(target: &ConormalSeries, basis: &[ConormalSeries]) -> Result<GhostSpec> {
    let n = basis.len();
    let mut a = Vec::with_capacity(n);
    for k in 0..n {
        let pivot = basis[k].coeff(k);
        let scale = basis[k].coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if pivot.abs() <= 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Ellipticity(k));
        }
        let known: f64 = (0..k).map(|m| a[m] * basis[m].coeff(k)).sum();
        a.push((target.coeff(k) - known) / pivot);
    }
    GhostSpec::new(GHOST_JUMP, a)
}

/// `f − g` as a radial profile.
pub fn difference(f: &RadialProfile, g: &GhostSpec) -> RadialProfile {
    let neg = GhostSpec {
        t_jump: g.t_jump,
        coeffs: g.coeffs.iter().map(|c| -c).collect(),
    };
    RadialProfile::Sum(vec![f.clone(), neg.to_profile()])
}

/// Log-log readout of `|R(f − g)(1/2 + h)|` on `h ∈ [1e-4, 1e-2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFit {
    pub slope: f64,
    /// Leading coefficient `c` in `R(f − g) ≈ c·h^{n+1/2}`.
    pub coefficient: f64,
    pub max_abs: f64,
    /// Set when the residual sits below the quadrature noise floor.
    pub indeterminate: bool,
    pub samples: Vec<(f64, f64)>,
}

pub fn residual_order(f: &RadialProfile, g: &GhostSpec, n_terms_used: usize) -> Result<ResidualFit> {
    let diff = difference(f, &g.truncated(n_terms_used));
    let hs = geometric(1e-4, 1e-2, 25);
    let quad = Adaptive {
        abs_tol: 1e-17,
        rel_tol: 1e-15,
        max_intervals: 20_000,
    };
    let res = par::map_slice(&hs, |&h| radial_transform_with(&diff, BASE_RADIUS + h, &quad))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let max_abs = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let indeterminate = max_abs < 1e-11;
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = res.iter().map(|v| v.abs().max(1e-300).ln()).collect();
    let slope = poly_fit(&lx, &ly, 2).map(|f| f.coeffs[1]).unwrap_or(f64::NAN);
    let p = n_terms_used as f64 + 0.5;
    let scaled: Vec<f64> = hs.iter().zip(&res).map(|(h, v)| v / h.powf(p)).collect();
    let coefficient = poly_fit(&hs, &scaled, 2).map(|f| f.coeffs[0]).unwrap_or(f64::NAN);
    Ok(ResidualFit {
        slope,
        coefficient,
        max_abs,
        indeterminate,
        samples: hs.into_iter().zip(res).collect(),
    })
}

/// The complete construction: phantom series, basis series and ghost.
#[derive(Debug, Clone)]
pub struct Cancellation {
    pub target: ConormalSeries,
    pub basis: Vec<ConormalSeries>,
    pub ghost: GhostSpec,
}

pub fn build_ghost(n_terms: usize, h_max: f64) -> Result<Cancellation> {
    let target = profile_series(&phantom(), n_terms, h_max)?;
    let basis = (0..n_terms)
        .map(|k| basis_series(k, n_terms, h_max))
        .collect::<Result<Vec<_>>>()?;
    let first = solve_ghost_coeffs(&target, &basis)?;
    let ghost = refine_sequential(&phantom(), first, &basis, h_max)?;
    Ok(Cancellation { target, basis, ghost })
}

/// Re-derives each `a_k` from a fit of the current residual
/// `f − Σ_{m<k} a_m·g_m`, whose leading term is `h^{k+1/2}`. Fitting the
/// small residual instead of the full series keeps the absolute error of
/// the higher coefficients near the quadrature floor.
fn refine_sequential(
    f: &RadialProfile,
    mut ghost: GhostSpec,
    basis: &[ConormalSeries],
    h_max: f64,
) -> Result<GhostSpec> {
    let n = basis.len();
    for (k, b) in basis.iter().enumerate().skip(1) {
        let diff = difference(f, &ghost.truncated(k));
        let series = profile_series(&diff, n, h_max)?;
        ghost.coeffs[k] = series.coeff(k) / b.coeff(k);
    }
    Ok(ghost)
}

/// `(r, Rf, Rg, R(f−g))` along `r_grid`, for the residual figures.
pub fn residual_curve(f: &RadialProfile, g: &GhostSpec, r_grid: &[f64]) -> Result<Vec<[f64; 4]>> {
    let gp = g.to_profile();
    par::map_slice(r_grid, |&r| {
        let rf = radial_transform(f, r)?;
        let rg = radial_transform(&gp, r)?;
        Ok([r, rf, rg, rf - rg])
    })
    .into_iter()
    .collect()
}
