//! Leapfrog solver for `u_tt = Δu` on a square grid, and everything built
//! on it: the boundary trace `Λf`, time-reversal reconstruction, the
//! one-sided incoming inverses, the ghost `f_R = −Λ_R^{-1}Λ_L f_L`, the
//! cone diagnostic and energy bookkeeping.
//!
//! Curves are handled by staircase Dirichlet injection: grid nodes just
//! across the curve take the data value at the nearest curve point.
//! Backward problems (zero data at `t = T`) are run forward in the reversed
//! time `τ = T − t`, where the sponge layer stays absorbing.

use std::f64::consts::{SQRT_2, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::abel::{lambda_from_sinogram, BoundaryTrace};
use crate::fields::{GridField, GridSpec};
use crate::geometry::{classify_covector_within, Classification, Covector, Curve, TRANSVERSAL_TOL};
use crate::radon::Sinogram;
use crate::{par, Error, Result, Vec2};

/// Largest accepted Courant number relative to the 2D stability limit.
pub const CFL_SAFETY: f64 = 0.9;
/// Minimal sponge width in cells.
pub const MIN_SPONGE: usize = 40;
/// Frequency bins excluded from the cone diagnostic on each axis.
pub const CONE_CUTOFF_BINS: usize = 4;

const INACTIVE: u8 = 0;
const ACTIVE: u8 = 1;
const BAND: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveConfig {
    /// Full computational grid, sponge included.
    pub grid: GridSpec,
    /// Requested time step; the effective one divides `t_final` evenly.
    pub dt: f64,
    pub t_final: f64,
    /// End of the plateau of the cutoff `χ`.
    pub t0: f64,
    /// Width of the absorbing layer in cells (0 disables it).
    pub sponge_cells: usize,
    /// Peak damping rate; `None` picks one from the layer width.
    pub sponge_strength: Option<f64>,
    /// Number of curve samples for traces.
    pub n_s: usize,
    /// Disc `(center, radius)` containing the phantom, when known.
    pub declared_support: Option<(Vec2, f64)>,
}

impl WaveConfig {
    /// Defaults: largest stable step, 40-cell sponge, `χ` plateau up to
    /// `t0`, one curve sample per cell along the curve.
    pub fn new(grid: GridSpec, t_final: f64, t0: f64) -> Self {
        Self {
            grid,
            dt: CFL_SAFETY * grid.h / SQRT_2,
            t_final,
            t0,
            sponge_cells: MIN_SPONGE,
            sponge_strength: None,
            n_s: 0,
            declared_support: None,
        }
    }

    /// Square grid centered at the origin, large enough that nothing sent
    /// back by the sponge reaches the curve before `t_final`: the free
    /// half-width `D` satisfies `(D − a) + (D − b) > T`, with `a` bounding
    /// the support and `b` the curve in the max norm.
    pub fn isolated(h: f64, curve: &Curve, support: (Vec2, f64), t_final: f64, t0: f64) -> Result<Self> {
        let (c, r) = support;
        let a = c[0].abs().max(c[1].abs()) + r;
        let (lo, hi) = curve.bounding_box();
        let b = lo.abs().max().max(hi.abs().max());
        let free = (0.5 * (t_final + a + b)).max(b + 4.0 * h);
        let half = ((free / h).ceil() + MIN_SPONGE as f64 + 2.0) * h;
        let mut cfg = Self::new(GridSpec::centered(half, h)?, t_final, t0);
        cfg.declared_support = Some(support);
        Ok(cfg)
    }

    /// Whether every path support → sponge → curve is longer than `T`.
    pub fn is_isolated(&self, curve: &Curve) -> bool {
        let Some((c, r)) = self.declared_support else {
            return false;
        };
        let (flo, fhi) = self.free_region();
        let (lo, hi) = curve.bounding_box();
        let to_edge_from_support = (c[0] - r - flo[0])
            .min(c[1] - r - flo[1])
            .min(fhi[0] - c[0] - r)
            .min(fhi[1] - c[1] - r);
        let to_edge_from_curve = (lo - flo).min().min((fhi - hi).min());
        to_edge_from_support + to_edge_from_curve > self.t_final
    }

    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn dt_eff(&self) -> f64 {
        self.t_final / self.steps() as f64
    }

    pub fn time_grid(&self) -> Vec<f64> {
        let dt = self.dt_eff();
        (0..=self.steps()).map(|n| n as f64 * dt).collect()
    }

    pub fn s_grid(&self, curve: &Curve) -> Vec<f64> {
        let n = if self.n_s > 0 {
            self.n_s
        } else {
            ((curve.length() / self.grid.h).ceil() as usize).max(64)
        };
        curve.uniform_parameters(n)
    }

    /// Smooth cutoff: 1 on `[0, t0]`, 0 at `t_final`, quintic smoothstep in
    /// between.
    pub fn chi(&self, t: f64) -> f64 {
        if t <= self.t0 {
            return 1.0;
        }
        if t >= self.t_final {
            return 0.0;
        }
        let x = (t - self.t0) / (self.t_final - self.t0);
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }

    fn sponge_sigma(&self) -> f64 {
        self.sponge_strength.unwrap_or_else(|| {
            let width = self.sponge_cells as f64 * self.grid.h;
            1.5 * (1e6f64).ln() / width
        })
    }

    /// Inner rectangle free of sponge, as `(lo, hi)` corners.
    pub fn free_region(&self) -> (Vec2, Vec2) {
        let pad = self.sponge_cells as f64 * self.grid.h;
        (
            self.grid.origin + Vec2::new(pad, pad),
            self.grid.far_corner() - Vec2::new(pad, pad),
        )
    }

    /// Travel time bound `max |x − y|` over curve points `x` and the
    /// declared support.
    pub fn required_time(&self, curve: &Curve) -> Option<f64> {
        let (c, r) = self.declared_support?;
        let n = 512;
        Some(
            curve
                .uniform_parameters(n)
                .iter()
                .map(|&s| (curve.point(s) - c).norm() + r)
                .fold(0.0, f64::max),
        )
    }

    pub fn validate(&self, curve: Option<&Curve>) -> Result<()> {
        let h = self.grid.h;
        let limit = CFL_SAFETY * h / SQRT_2;
        if !(self.dt > 0.0) || self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "time step {} violates the CFL bound dt ≤ 0.9·h/√2 = {limit}",
                self.dt
            )));
        }
        if !(self.t_final > 0.0) || !(self.t0 >= 0.0) || self.t0 >= self.t_final {
            return Err(Error::Config(format!(
                "cutoff times must satisfy 0 ≤ T0 < T, got T0 = {}, T = {}",
                self.t0, self.t_final
            )));
        }
        if self.sponge_cells > 0 && self.sponge_cells < MIN_SPONGE {
            return Err(Error::Config(format!(
                "sponge must be at least {MIN_SPONGE} cells wide, got {}",
                self.sponge_cells
            )));
        }
        if 2 * self.sponge_cells + 4 >= self.grid.nx.min(self.grid.ny) {
            return Err(Error::Config("grid too small for its sponge layer".into()));
        }
        if let Some(curve) = curve {
            let (lo, hi) = curve.bounding_box();
            let (flo, fhi) = self.free_region();
            let margin = (lo - flo).min().min((fhi - hi).min());
            if margin < 2.0 * h {
                return Err(Error::Config(format!(
                    "curve must stay two cells inside the sponge-free region (margin {margin:.4})"
                )));
            }
        }
        Ok(())
    }

    /// Reconstruction needs `T` and `T0` above the travel-time bound for the
    /// declared support.
    pub fn check_travel_time(&self, curve: &Curve) -> Result<()> {
        if let Some(need) = self.required_time(curve) {
            for (name, t) in [("T", self.t_final), ("T0", self.t0)] {
                if t <= need {
                    return Err(Error::Config(format!(
                        "{name} = {t} does not exceed the travel-time bound max|x−y| = {need:.4} \
                         (x on the curve, y in the declared support)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which side of the curve a one-sided problem lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Toward the left normal; the interior of a counterclockwise curve.
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Whole,
    Side(Side),
}

/// Node classification plus damping for one solve.
struct Domain {
    spec: GridSpec,
    kind: Vec<u8>,
    damping: Vec<f64>,
    band: Vec<usize>,
    band_s: Vec<f64>,
    /// Extrapolation weight `δ_b/δ_i` and interior stencil per band node.
    band_ratio: Vec<f64>,
    band_probe: Vec<Option<[(usize, f64); 4]>>,
}

impl Domain {
    fn build(cfg: &WaveConfig, curve: Option<&Curve>, region: Region, sponge: bool) -> Result<Self> {
        let spec = cfg.grid;
        let (nx, ny) = (spec.nx, spec.ny);
        let on_ring = |i: usize, j: usize| i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
        let mut kind = vec![INACTIVE; nx * ny];
        let inside: Vec<bool> = match (region, curve) {
            (Region::Whole, _) => Vec::new(),
            (Region::Side(_), Some(c)) => {
                if !c.is_closed() {
                    return Err(Error::NotApplicable("one-sided solves need a closed curve".into()));
                }
                let mut v = vec![false; nx * ny];
                par::for_each_row_mut(&mut v, nx, |j, row| {
                    for (i, x) in row.iter_mut().enumerate() {
                        *x = c.contains(spec.node(i, j));
                    }
                });
                v
            }
            (Region::Side(_), None) => return Err(Error::InvalidInput("one-sided solve without a curve".into())),
        };
        let wanted = |idx: usize| match region {
            Region::Whole => true,
            Region::Side(Side::Left) => inside[idx],
            Region::Side(Side::Right) => !inside[idx],
        };
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                if !on_ring(i, j) && wanted(idx) {
                    kind[idx] = ACTIVE;
                }
            }
        }
        let mut band = Vec::new();
        if let Region::Side(_) = region {
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let idx = j * nx + i;
                    if kind[idx] == ACTIVE || wanted(idx) {
                        continue;
                    }
                    let touches = [idx - 1, idx + 1, idx - nx, idx + nx]
                        .iter()
                        .any(|&k| kind[k] == ACTIVE);
                    if touches {
                        band.push(idx);
                    }
                }
            }
            for &idx in &band {
                kind[idx] = BAND;
            }
        }
        let band_s = match curve {
            Some(c) => par::map_slice(&band, |&idx| c.nearest(spec.node(idx % nx, idx / nx)).1),
            None => Vec::new(),
        };
        // Band values continue the boundary value linearly through an
        // interior sample taken two cells inside along the normal.
        let reach = 2.0 * spec.h;
        let mut band_ratio = Vec::with_capacity(band.len());
        let mut band_probe = Vec::with_capacity(band.len());
        if let (Some(c), Region::Side(side)) = (curve, region) {
            for (&idx, &sb) in band.iter().zip(&band_s) {
                let p = c.point(sb);
                let n_in = match side {
                    Side::Left => c.normal(sb),
                    Side::Right => -c.normal(sb),
                };
                let delta = (p - spec.node(idx % nx, idx / nx)).dot(&n_in).max(0.0);
                let probe = Probe::stencil(&spec, p + reach * n_in)
                    .filter(|st| st.iter().all(|&(k, w)| w == 0.0 || kind[k] == ACTIVE));
                band_ratio.push(delta / reach);
                band_probe.push(probe);
            }
        }
        let damping = if sponge && cfg.sponge_cells > 0 {
            let w = cfg.sponge_cells as f64;
            let smax = cfg.sponge_sigma();
            let mut d = vec![0.0; nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    let depth = i.min(j).min(nx - 1 - i).min(ny - 1 - j) as f64;
                    if depth < w {
                        let x = (w - depth) / w;
                        d[j * nx + i] = smax * x * x;
                    }
                }
            }
            d
        } else {
            Vec::new()
        };
        Ok(Self {
            spec,
            kind,
            damping,
            band,
            band_s,
            band_ratio,
            band_probe,
        })
    }

    /// Writes band values for boundary data `value(s)` into `u`, whose
    /// active nodes must already hold the same time level.
    fn fill_band<F: Fn(f64) -> f64>(&self, u: &mut [f64], value: F) {
        for (k, &idx) in self.band.iter().enumerate() {
            let h = value(self.band_s[k]);
            u[idx] = match &self.band_probe[k] {
                Some(st) => {
                    let inner: f64 = st.iter().map(|&(m, w)| w * u[m]).sum();
                    h + self.band_ratio[k] * (h - inner)
                }
                None => h,
            };
        }
    }

    fn is_active(&self, idx: usize) -> bool {
        self.kind[idx] == ACTIVE
    }
}

/// Three time levels of the leapfrog scheme.
struct Leapfrog<'a> {
    dom: &'a Domain,
    dt: f64,
    prev: Vec<f64>,
    curr: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Leapfrog<'a> {
    fn new(dom: &'a Domain, dt: f64) -> Self {
        let n = dom.spec.len();
        Self {
            dom,
            dt,
            prev: vec![0.0; n],
            curr: vec![0.0; n],
            next: vec![0.0; n],
        }
    }

    fn laplacian_at(u: &[f64], idx: usize, nx: usize, inv_h2: f64) -> f64 {
        (u[idx - 1] + u[idx + 1] + u[idx - nx] + u[idx + nx] - 4.0 * u[idx]) * inv_h2
    }

    /// Advances one step; band nodes of the new level follow `value(s)`.
    fn step<F: Fn(f64) -> f64>(&mut self, value: F) {
        let nx = self.dom.spec.nx;
        let inv_h2 = 1.0 / (self.dom.spec.h * self.dom.spec.h);
        let dt = self.dt;
        let dt2 = dt * dt;
        let (prev, curr) = (&self.prev, &self.curr);
        let kind = &self.dom.kind;
        let damping = &self.dom.damping;
        par::for_each_row_mut(&mut self.next, nx, |j, row| {
            let base = j * nx;
            for (i, out) in row.iter_mut().enumerate() {
                let idx = base + i;
                *out = match kind[idx] {
                    ACTIVE => {
                        let lap = Self::laplacian_at(curr, idx, nx, inv_h2);
                        let s = if damping.is_empty() { 0.0 } else { 0.5 * damping[idx] * dt };
                        (2.0 * curr[idx] - (1.0 - s) * prev[idx] + dt2 * lap) / (1.0 + s)
                    }
                    _ => 0.0,
                };
            }
        });
        self.dom.fill_band(&mut self.next, value);
        std::mem::swap(&mut self.prev, &mut self.curr);
        std::mem::swap(&mut self.curr, &mut self.next);
    }
}

/// Bilinear read-out stencils for a list of points.
struct Probe {
    stencils: Vec<[(usize, f64); 4]>,
}

impl Probe {
    fn new(spec: &GridSpec, points: &[Vec2]) -> Result<Self> {
        let stencils = points
            .iter()
            .map(|p| {
                Self::stencil(spec, *p).ok_or_else(|| Error::Config(format!("curve point {p:?} lies outside the grid")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { stencils })
    }

    fn stencil(spec: &GridSpec, p: Vec2) -> Option<[(usize, f64); 4]> {
        let fx = (p[0] - spec.origin[0]) / spec.h;
        let fy = (p[1] - spec.origin[1]) / spec.h;
        if !(fx >= 0.0 && fy >= 0.0 && fx < (spec.nx - 1) as f64 && fy < (spec.ny - 1) as f64) {
            return None;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        let (a, b) = (fx - i as f64, fy - j as f64);
        let idx = j * spec.nx + i;
        Some([
            (idx, (1.0 - a) * (1.0 - b)),
            (idx + 1, a * (1.0 - b)),
            (idx + spec.nx, (1.0 - a) * b),
            (idx + spec.nx + 1, a * b),
        ])
    }

    fn read(&self, u: &[f64], out: &mut [f64]) {
        for (o, st) in out.iter_mut().zip(&self.stencils) {
            *o = st.iter().map(|&(k, w)| w * u[k]).sum();
        }
    }
}

fn check_field_grid(f: &GridField, cfg: &WaveConfig) -> Result<()> {
    if f.spec != cfg.grid {
        return Err(Error::Config("field grid differs from the solver grid".into()));
    }
    Ok(())
}

/// Warns when the field reaches into the sponge (plus a 4-cell margin).
fn warn_if_in_sponge(f: &GridField, cfg: &WaveConfig) {
    if cfg.sponge_cells == 0 {
        return;
    }
    let edge = cfg.sponge_cells + 4;
    let s = f.spec;
    let scale = f.max_abs();
    let mut worst = 0.0f64;
    for j in 0..s.ny {
        for i in 0..s.nx {
            if i.min(j).min(s.nx - 1 - i).min(s.ny - 1 - j) < edge {
                worst = worst.max(f.get(i, j).abs());
            }
        }
    }
    if worst > 1e-8 * scale {
        log::warn!("field reaches the sponge layer ({worst:.3e} of {scale:.3e}); results are truncated");
    }
}

/// Second-order start for `(u, u_t) = (0, f)`:
/// `u¹ = dt·f + dt³/6·Δf` on active nodes.
fn start_from_velocity(lf: &mut Leapfrog, f: &[f64]) {
    let nx = lf.dom.spec.nx;
    let inv_h2 = 1.0 / (lf.dom.spec.h * lf.dom.spec.h);
    let dt = lf.dt;
    for idx in 0..f.len() {
        if lf.dom.is_active(idx) {
            lf.curr[idx] = dt * f[idx] + dt * dt * dt / 6.0 * Leapfrog::laplacian_at(f, idx, nx, inv_h2);
        }
    }
}

/// `Λf(t, s) = u(t, γ(s))` for `u_tt = Δu`, `(u, u_t)|_{t=0} = (0, f)` on
/// the whole plane (sponge-truncated grid).
pub fn forward_trace(f: &GridField, cfg: &WaveConfig, curve: &Curve) -> Result<BoundaryTrace> {
    cfg.validate(Some(curve))?;
    check_field_grid(f, cfg)?;
    warn_if_in_sponge(f, cfg);
    if cfg.declared_support.is_some() && !cfg.is_isolated(curve) {
        log::warn!("sponge reflections can reach the curve before T; the trace tail is approximate");
    }
    let dom = Domain::build(cfg, None, Region::Whole, true)?;
    let dt = cfg.dt_eff();
    let steps = cfg.steps();
    let s_grid = cfg.s_grid(curve);
    let points: Vec<Vec2> = s_grid.iter().map(|&s| curve.point(s)).collect();
    let probe = Probe::new(&cfg.grid, &points)?;
    let ns = s_grid.len();
    let mut values = vec![0.0; (steps + 1) * ns];
    let mut lf = Leapfrog::new(&dom, dt);
    start_from_velocity(&mut lf, &f.values);
    probe.read(&lf.curr, &mut values[ns..2 * ns]);
    for n in 2..=steps {
        lf.step(|_| 0.0);
        probe.read(&lf.curr, &mut values[n * ns..(n + 1) * ns]);
    }
    let period = curve.is_closed().then(|| curve.length());
    BoundaryTrace::new(cfg.time_grid(), s_grid, values, period)
}

/// Solves the one-sided backward problem with Dirichlet data `data(t, s)`
/// and zero data at `t = T`; returns `∂_t v` at `t = 0` on active nodes.
fn backward_dirichlet<F>(cfg: &WaveConfig, curve: &Curve, side: Side, data: F) -> Result<GridField>
where
    F: Fn(f64, f64) -> f64,
{
    let dom = Domain::build(cfg, Some(curve), Region::Side(side), side == Side::Right)?;
    if !dom.kind.contains(&ACTIVE) {
        return Err(Error::Config("the chosen side of the curve has no grid nodes".into()));
    }
    let dt = cfg.dt_eff();
    let steps = cfg.steps();
    if steps < 3 {
        return Err(Error::Config("need at least three time steps".into()));
    }
    let t_final = cfg.t_final;
    let mut lf = Leapfrog::new(&dom, dt);
    // τ = 0: w = 0 inside, band from data(T)
    dom.fill_band(&mut lf.curr, |s| data(t_final, s));
    // τ = dt: w¹ = dt²/2·Δw⁰ inside
    {
        let nx = dom.spec.nx;
        let inv_h2 = 1.0 / (dom.spec.h * dom.spec.h);
        let w0 = lf.curr.clone();
        let mut w1 = vec![0.0; w0.len()];
        for (idx, v) in w1.iter_mut().enumerate() {
            if dom.is_active(idx) {
                *v = 0.5 * dt * dt * Leapfrog::laplacian_at(&w0, idx, nx, inv_h2);
            }
        }
        dom.fill_band(&mut w1, |s| data(t_final - dt, s));
        lf.prev = w0;
        lf.curr = w1;
    }
    let mut older = Vec::new();
    for n in 2..=steps {
        let t = t_final - n as f64 * dt;
        if n == steps {
            older = lf.prev.clone();
        }
        lf.step(|s| data(t.max(0.0), s));
    }
    let (w_n, w_n1, w_n2) = (&lf.curr, &lf.prev, &older);
    let values: Vec<f64> = (0..w_n.len())
        .map(|idx| {
            if dom.is_active(idx) {
                -(3.0 * w_n[idx] - 4.0 * w_n1[idx] + w_n2[idx]) / (2.0 * dt)
            } else {
                0.0
            }
        })
        .collect();
    GridField::from_values(cfg.grid, values)
}

fn check_trace_matches(hdata: &BoundaryTrace, cfg: &WaveConfig) -> Result<()> {
    if hdata.t_grid[0].abs() > 1e-12 {
        return Err(Error::Config("trace must start at t = 0".into()));
    }
    if (hdata.t_final() - cfg.t_final).abs() > 0.5 * cfg.dt_eff() {
        return Err(Error::Config(format!(
            "trace ends at t = {} but the solver runs to T = {}",
            hdata.t_final(),
            cfg.t_final
        )));
    }
    Ok(())
}

/// Time reversal `G(χh) = ∂_t v|_{t=0}` inside the curve, where `v` solves
/// the wave equation with `v = χ·h` on the curve and zero data at `T`.
pub fn time_reversal(hdata: &BoundaryTrace, cfg: &WaveConfig, curve: &Curve) -> Result<GridField> {
    cfg.validate(Some(curve))?;
    cfg.check_travel_time(curve)?;
    check_trace_matches(hdata, cfg)?;
    backward_dirichlet(cfg, curve, Side::Left, |t, s| cfg.chi(t) * hdata.sample(t, s))
}

/// Sinogram → trace → cutoff → time reversal.
pub fn parametrix_reconstruct(sg: &Sinogram, cfg: &WaveConfig, curve: &Curve) -> Result<GridField> {
    cfg.validate(Some(curve))?;
    cfg.check_travel_time(curve)?;
    let period = curve.is_closed().then(|| curve.length());
    let trace = lambda_from_sinogram(sg, &cfg.time_grid(), period)?;
    time_reversal(&trace, cfg, curve)
}

/// `Λ_side^{-1} h = 2·∂_t u|_{t=0}` for the incoming solution on one side.
pub fn incoming_inverse(hdata: &BoundaryTrace, side: Side, cfg: &WaveConfig, curve: &Curve) -> Result<GridField> {
    cfg.validate(Some(curve))?;
    check_trace_matches(hdata, cfg)?;
    if side == Side::Right {
        // room for outgoing waves before the sponge
        let (lo, hi) = curve.bounding_box();
        let (flo, fhi) = cfg.free_region();
        let margin = (lo - flo).min().min((fhi - hi).min());
        if margin < 4.0 * cfg.grid.h {
            return Err(Error::Config(format!(
                "exterior region too small: {margin:.4} between curve and sponge"
            )));
        }
    }
    let v = backward_dirichlet(cfg, curve, side, |t, s| hdata.sample(t, s))?;
    Ok(v.scaled(2.0))
}

/// The ghost of an interior field `f_L` whose singularity sits at `cv`:
/// `f_R = −Λ_R^{-1} Λ_L f_L`.
pub fn unitary_ghost(f_l: &GridField, cv: &Covector, cfg: &WaveConfig, curve: &Curve) -> Result<GridField> {
    if f_l.max_abs() > 0.0 {
        let class = classify_covector_within(curve, cv, TRANSVERSAL_TOL, cfg.t_final)?;
        if class != Classification::SigmaLPlus && class != Classification::SigmaLMinus {
            return Err(Error::NotApplicable(format!(
                "covector {cv} is classified {class:?}, not a single transversal hit from the left"
            )));
        }
    }
    let h = forward_trace(f_l, cfg, curve)?;
    Ok(incoming_inverse(&h, Side::Right, cfg, curve)?.scaled(-1.0))
}

/// Fraction of the trace's spectral energy with `|σ| > δ|τ|`, ignoring the
/// lowest bins on both axes. With `taper` a Hann window is applied in `t`.
pub fn cone_diagnostic(trace: &BoundaryTrace, delta: f64, taper: bool) -> Result<f64> {
    if !trace.is_periodic() {
        return Err(Error::Config("cone diagnostic needs a uniform periodic s grid".into()));
    }
    let (nt, ns) = (trace.nt(), trace.ns());
    let period = trace.s_period.expect("periodic");
    let mut data: Vec<Complex64> = (0..nt)
        .flat_map(|n| {
            let w = if taper { 0.5 - 0.5 * (TAU * n as f64 / (nt - 1) as f64).cos() } else { 1.0 };
            (0..ns).map(move |j| (n, j, w))
        })
        .map(|(n, j, w)| Complex64::new(w * trace.get(n, j), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    let fft_s = planner.plan_fft_forward(ns);
    for row in data.chunks_mut(ns) {
        fft_s.process(row);
    }
    let fft_t = planner.plan_fft_forward(nt);
    let mut column = vec![Complex64::new(0.0, 0.0); nt];
    for j in 0..ns {
        for n in 0..nt {
            column[n] = data[n * ns + j];
        }
        fft_t.process(&mut column);
        for n in 0..nt {
            data[n * ns + j] = column[n];
        }
    }
    let signed = |k: usize, len: usize| if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
    let dt = trace.dt();
    let (mut outside, mut total) = (0.0, 0.0);
    for m in 0..nt {
        let mm = signed(m, nt);
        if mm.abs() < CONE_CUTOFF_BINS as f64 {
            continue;
        }
        let tau = TAU * mm / (nt as f64 * dt);
        for k in 0..ns {
            let kk = signed(k, ns);
            if kk.abs() < CONE_CUTOFF_BINS as f64 {
                continue;
            }
            let sigma = TAU * kk / period;
            let e = data[m * ns + k].norm_sqr();
            total += e;
            if sigma.abs() > delta * tau.abs() {
                outside += e;
            }
        }
    }
    Ok(if total > 0.0 { outside / total } else { 0.0 })
}

/// Conserved discrete energy of two consecutive levels:
/// `‖(u¹ − u⁰)/dt‖² + ⟨∇u¹, ∇u⁰⟩`, gradients by forward differences with
/// zero values beyond the grid.
pub fn discrete_energy(u0: &GridField, u1: &GridField, dt: f64) -> f64 {
    let s = u0.spec;
    let h = s.h;
    let (nx, ny) = (s.nx, s.ny);
    let at = |u: &GridField, i: isize, j: isize| {
        if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
            0.0
        } else {
            u.get(i as usize, j as usize)
        }
    };
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for j in -1..ny as isize {
        for i in -1..nx as isize {
            if i >= 0 && j >= 0 {
                let v = (at(u1, i, j) - at(u0, i, j)) / dt;
                kinetic += v * v;
            }
            let gx1 = at(u1, i + 1, j) - at(u1, i, j);
            let gx0 = at(u0, i + 1, j) - at(u0, i, j);
            let gy1 = at(u1, i, j + 1) - at(u1, i, j);
            let gy0 = at(u0, i, j + 1) - at(u0, i, j);
            potential += gx1 * gx0 + gy1 * gy0;
        }
    }
    (kinetic + potential / (h * h)) * h * h
}

/// A solution snapshot: displacement, velocity and time.
#[derive(Debug, Clone)]
pub struct CauchySlice {
    pub u: GridField,
    pub ut: GridField,
    pub t: f64,
}

/// Energy history of `(0, f)` in a closed box (zero Dirichlet ring, no
/// sponge) over `steps` steps of size `dt`.
pub fn closed_box_energy(f: &GridField, dt: f64, steps: usize) -> Result<Vec<f64>> {
    let spec = f.spec;
    if dt > CFL_SAFETY * spec.h / SQRT_2 {
        return Err(Error::Config("time step violates the CFL bound".into()));
    }
    let mut cfg = WaveConfig::new(spec, dt * steps as f64, 0.0);
    cfg.dt = dt;
    cfg.sponge_cells = 0;
    let dom = Domain::build(&cfg, None, Region::Whole, false)?;
    let mut lf = Leapfrog::new(&dom, dt);
    start_from_velocity(&mut lf, &f.values);
    let as_field = |v: &Vec<f64>| GridField {
        spec,
        values: v.clone(),
    };
    let mut out = vec![discrete_energy(&as_field(&lf.prev), &as_field(&lf.curr), dt)];
    for _ in 1..steps {
        lf.step(|_| 0.0);
        out.push(discrete_energy(&as_field(&lf.prev), &as_field(&lf.curr), dt));
    }
    Ok(out)
}

/// Evolves `(0, f)` on the whole grid for `steps` steps and returns the
/// final slice.
pub fn evolve(f: &GridField, cfg: &WaveConfig, steps: usize) -> Result<CauchySlice> {
    check_field_grid(f, cfg)?;
    let dom = Domain::build(cfg, None, Region::Whole, true)?;
    let dt = cfg.dt_eff();
    let mut lf = Leapfrog::new(&dom, dt);
    start_from_velocity(&mut lf, &f.values);
    for _ in 1..steps.max(1) {
        lf.step(|_| 0.0);
    }
    let ut: Vec<f64> = lf.curr.iter().zip(&lf.prev).map(|(a, b)| (a - b) / dt).collect();
    Ok(CauchySlice {
        u: GridField {
            spec: cfg.grid,
            values: lf.curr.clone(),
        },
        ut: GridField {
            spec: cfg.grid,
            values: ut,
        },
        t: steps.max(1) as f64 * dt,
    })
}

/// Largest `|Λf|` over times strictly before `t_limit`.
pub fn max_before(trace: &BoundaryTrace, t_limit: f64) -> f64 {
    let mut m = 0.0f64;
    for n in 0..trace.nt() {
        if trace.t_grid[n] >= t_limit {
            break;
        }
        for j in 0..trace.ns() {
            m = m.max(trace.get(n, j).abs());
        }
    }
    m
}

/// Position of the largest gradient along the ray from `center` in
/// direction `dir`, sampled every `step` up to `length`.
pub fn edge_along(field: &GridField, center: Vec2, dir: Vec2, length: f64, step: f64) -> f64 {
    let d = dir / dir.norm();
    let n = (length / step) as usize;
    let mut best = (0.0, 0.0);
    for k in 1..n {
        let a = field.sample(center + d * ((k - 1) as f64 * step));
        let b = field.sample(center + d * ((k + 1) as f64 * step));
        let g = ((b - a) / (2.0 * step)).abs();
        if g > best.0 {
            best = (g, k as f64 * step);
        }
    }
    best.1
}

/// Normalized correlation `⟨a, b⟩ / (‖a‖‖b‖)`.
pub fn correlation(a: &GridField, b: &GridField) -> Result<f64> {
    let d = a.dot(b)?;
    let n = a.norm_l2() * b.norm_l2();
    Ok(if n > 0.0 { d / n } else { 0.0 })
}

/// Center of mass of `|f|`.
pub fn center_of_mass(f: &GridField) -> Vec2 {
    let s = f.spec;
    let mut acc = Vec2::zeros();
    let mut w = 0.0;
    for j in 0..s.ny {
        for i in 0..s.nx {
            let v = f.get(i, j).abs();
            acc += v * s.node(i, j);
            w += v;
        }
    }
    if w > 0.0 {
        acc / w
    } else {
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{bump_field, disc_indicator, gaussian_field};

    fn small_cfg(h: f64, half: f64, t: f64, t0: f64) -> WaveConfig {
        let spec = GridSpec::centered(half, h).unwrap();
        WaveConfig::new(spec, t, t0)
    }

    #[test]
    fn validation() {
        let mut cfg = small_cfg(0.02, 2.0, 2.0, 1.0);
        assert!(cfg.validate(Some(&Curve::unit_circle())).is_ok());
        cfg.dt = 0.02;
        assert!(matches!(cfg.validate(None), Err(Error::Config(_))));
        let mut cfg = small_cfg(0.02, 2.0, 2.0, 1.0);
        cfg.declared_support = Some((Vec2::zeros(), 0.5));
        assert!(cfg.check_travel_time(&Curve::unit_circle()).is_err());
        cfg.t_final = 3.0;
        cfg.t0 = 1.6;
        assert!(cfg.check_travel_time(&Curve::unit_circle()).is_ok());
        cfg.sponge_cells = 10;
        assert!(cfg.validate(None).is_err());
    }

    #[test]
    fn chi_shape() {
        let cfg = small_cfg(0.02, 2.0, 3.0, 1.0);
        assert_eq!(cfg.chi(0.5), 1.0);
        assert_eq!(cfg.chi(3.0), 0.0);
        assert!((cfg.chi(2.0) - 0.5).abs() < 1e-12);
        let mut last = 1.0;
        for k in 0..100 {
            let v = cfg.chi(1.0 + 2.0 * k as f64 / 99.0);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn zero_inputs_give_zero() {
        let cfg = small_cfg(0.02, 2.0, 1.0, 0.5);
        let c = Curve::unit_circle();
        let f = GridField::zeros(cfg.grid);
        let tr = forward_trace(&f, &cfg, &c).unwrap();
        assert_eq!(tr.max_abs(), 0.0);
        let g = time_reversal(&tr, &cfg, &c).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        let g = incoming_inverse(&tr, Side::Right, &cfg, &c).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        let cv = Covector::from_components(0.5, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(unitary_ghost(&f, &cv, &cfg, &c).unwrap().max_abs(), 0.0);
        assert_eq!(cone_diagnostic(&tr, 1.0, false).unwrap(), 0.0);
    }

    #[test]
    fn radial_field_gives_symmetric_trace() {
        let cfg = small_cfg(0.02, 2.0, 1.5, 0.5);
        let c = Curve::unit_circle();
        let f = disc_indicator(cfg.grid, 0.5, Vec2::zeros(), true).unwrap();
        let tr = forward_trace(&f, &cfg, &c).unwrap();
        let scale = tr.max_abs();
        for n in (0..tr.nt()).step_by(7) {
            let row: Vec<f64> = (0..tr.ns()).map(|j| tr.get(n, j)).collect();
            let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            assert!(hi - lo < 0.05 * scale, "t index {n}: spread {}", hi - lo);
        }
    }

    #[test]
    fn closed_box_energy_is_conserved() {
        let spec = GridSpec::centered(1.0, 0.02).unwrap();
        let f = gaussian_field(spec, Vec2::new(0.1, 0.0), 0.1, 1.0).unwrap();
        let dt = 0.9 * 0.02 / SQRT_2;
        let e = closed_box_energy(&f, dt, 400).unwrap();
        let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max) / e[0];
        assert!(drift < 1e-3, "drift {drift}");
    }

    #[test]
    fn finite_speed() {
        let cfg = small_cfg(0.005, 1.6, 0.8, 0.4);
        let c = Curve::unit_circle();
        let f = bump_field(cfg.grid, Vec2::zeros(), 0.3).unwrap();
        let tr = forward_trace(&f, &cfg, &c).unwrap();
        assert!(max_before(&tr, 0.7) <= 1e-6 * f.max_abs());
        assert!(tr.max_abs() > 1e-3);
    }

    #[test]
    fn cone_rejects_open_grids() {
        let tr = BoundaryTrace::zeros(vec![0.0, 0.1, 0.2], vec![0.0, 1.0], None).unwrap();
        assert!(matches!(cone_diagnostic(&tr, 1.0, false), Err(Error::Config(_))));
        // s-independent data sits entirely at σ = 0
        let t: Vec<f64> = (0..64).map(|n| n as f64 * 0.05).collect();
        let s: Vec<f64> = (0..32).map(|j| j as f64 * TAU / 32.0).collect();
        let vals: Vec<f64> = t.iter().flat_map(|&tt| std::iter::repeat_n((5.0 * tt).sin(), 32)).collect();
        let tr = BoundaryTrace::new(t, s, vals, Some(TAU)).unwrap();
        assert!(cone_diagnostic(&tr, 1.0, false).unwrap() < 1e-20);
    }
}
