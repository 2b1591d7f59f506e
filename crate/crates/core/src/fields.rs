//! Sampled 2D fields, phantoms, wave packets and radial profiles.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use crate::interp::{Interp, Interpolant};
use crate::{par, Error, Result, Vec2};

const HEADER_LEN: usize = 80;

/// Node layout of a square-cell grid. Node `(i, j)` sits at
/// `origin + h·(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Vec2,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin: Vec2, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {h}")));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput(format!("grid needs at least 2x2 nodes, got {nx}x{ny}")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        Ok(Self { origin, h, nx, ny })
    }

    /// Square grid covering `[-half, half]²` with spacing close to `h`
    /// (the node count is rounded so both ends are nodes).
    pub fn centered(half: f64, h: f64) -> Result<Self> {
        let cells = (2.0 * half / h).round().max(1.0) as usize;
        let h = 2.0 * half / cells as f64;
        Self::new(Vec2::new(-half, -half), h, cells + 1, cells + 1)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + self.h * i as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + self.h * j as f64
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.x(i), self.y(j))
    }

    /// Upper corner of the grid.
    pub fn far_corner(&self) -> Vec2 {
        self.node(self.nx - 1, self.ny - 1)
    }

    /// Distance from `p` to the nearest grid edge (negative outside).
    pub fn margin(&self, p: Vec2) -> f64 {
        let lo = p - self.origin;
        let hi = self.far_corner() - p;
        lo[0].min(lo[1]).min(hi[0]).min(hi[1])
    }
}

/// Row-major samples on a [`GridSpec`]: `values[j·nx + i]` at node `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            values: vec![0.0; spec.len()],
            spec,
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values for a {}x{} grid",
                values.len(),
                spec.nx,
                spec.ny
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field values must be finite".into()));
        }
        Ok(Self { spec, values })
    }

    /// Evaluates `f` at every node, row by row in parallel.
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(Vec2) -> f64 + Sync + Send,
    {
        let mut values = vec![0.0; spec.len()];
        par::for_each_row_mut(&mut values, spec.nx, |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(spec.node(i, j));
            }
        });
        Self { spec, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let nx = self.spec.nx;
        self.values[j * nx + i] = v;
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn sample(&self, p: Vec2) -> f64 {
        let s = &self.spec;
        let fx = (p[0] - s.origin[0]) / s.h;
        let fy = (p[1] - s.origin[1]) / s.h;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= (s.nx - 1) as f64 && fy <= (s.ny - 1) as f64) {
            return 0.0;
        }
        let i = (fx.floor() as usize).min(s.nx - 2);
        let j = (fy.floor() as usize).min(s.ny - 2);
        let a = fx - i as f64;
        let b = fy - j as f64;
        (1.0 - a) * (1.0 - b) * self.get(i, j)
            + a * (1.0 - b) * self.get(i + 1, j)
            + (1.0 - a) * b * self.get(i, j + 1)
            + a * b * self.get(i + 1, j + 1)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm `(Σ v² h²)^{1/2}`.
    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.spec.h * self.spec.h).sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.h * self.spec.h
    }

    pub fn dot(&self, other: &GridField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.spec.h * self.spec.h)
    }

    pub fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::InvalidInput("fields live on different grids".into()));
        }
        Ok(())
    }

    /// `self + alpha·other`.
    pub fn add_scaled(&self, alpha: f64, other: &GridField) -> Result<GridField> {
        self.check_same_grid(other)?;
        Ok(GridField {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + alpha * b).collect(),
        })
    }

    pub fn scaled(&self, alpha: f64) -> GridField {
        GridField {
            spec: self.spec,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Copy with every node where `keep` is false set to zero.
    pub fn masked<F: Fn(Vec2) -> bool>(&self, keep: F) -> GridField {
        let mut out = self.clone();
        for j in 0..self.spec.ny {
            for i in 0..self.spec.nx {
                if !keep(self.spec.node(i, j)) {
                    out.set(i, j, 0.0);
                }
            }
        }
        out
    }

    /// `‖self − reference‖₂ / ‖reference‖₂` over nodes where `keep` holds.
    pub fn relative_l2_error<F: Fn(Vec2) -> bool>(&self, reference: &GridField, keep: F) -> Result<f64> {
        self.check_same_grid(reference)?;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..self.spec.ny {
            for i in 0..self.spec.nx {
                if keep(self.spec.node(i, j)) {
                    let r = reference.get(i, j);
                    let d = self.get(i, j) - r;
                    num += d * d;
                    den += r * r;
                }
            }
        }
        if den == 0.0 {
            return Err(Error::InvalidInput("reference field vanishes on the comparison region".into()));
        }
        Ok((num / den).sqrt())
    }

    /// Magnitude of the centered-difference gradient at interior nodes
    /// (zero on the outer ring).
    pub fn gradient_magnitude(&self) -> GridField {
        let s = self.spec;
        let mut out = GridField::zeros(s);
        for j in 1..s.ny - 1 {
            for i in 1..s.nx - 1 {
                let gx = (self.get(i + 1, j) - self.get(i - 1, j)) / (2.0 * s.h);
                let gy = (self.get(i, j + 1) - self.get(i, j - 1)) / (2.0 * s.h);
                out.set(i, j, gx.hypot(gy));
            }
        }
        out
    }

    /// Binary layout: an 80-byte ASCII header `nx ny ox oy h` padded with
    /// spaces and closed by a newline, then `nx·ny` little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.spec;
        let mut header = format!("{} {} {:e} {:e} {:e}", s.nx, s.ny, s.origin[0], s.origin[1], s.h).into_bytes();
        header.resize(HEADER_LEN - 1, b' ');
        header.push(b'\n');
        let mut out = header;
        out.reserve(8 * self.values.len());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Parse("field file shorter than its header".into()));
        }
        let header = std::str::from_utf8(&bytes[..HEADER_LEN])
            .map_err(|_| Error::Parse("field header is not ASCII".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(Error::Parse(format!("field header needs 5 entries, got {}", parts.len())));
        }
        let bad = |what: &str| Error::Parse(format!("bad {what} in field header"));
        let nx: usize = parts[0].parse().map_err(|_| bad("nx"))?;
        let ny: usize = parts[1].parse().map_err(|_| bad("ny"))?;
        let ox: f64 = parts[2].parse().map_err(|_| bad("ox"))?;
        let oy: f64 = parts[3].parse().map_err(|_| bad("oy"))?;
        let h: f64 = parts[4].parse().map_err(|_| bad("h"))?;
        let spec = GridSpec::new(Vec2::new(ox, oy), h, nx, ny)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 8 * spec.len() {
            return Err(Error::Parse(format!(
                "field body has {} bytes, expected {}",
                body.len(),
                8 * spec.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::from_values(spec, values)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// 8-bit binary PGM, min–max normalized, top row = largest y.
    pub fn to_pgm(&self) -> Vec<u8> {
        pgm_bytes(self.spec.nx, self.spec.ny, |i, j| self.get(i, self.spec.ny - 1 - j), &self.values)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_pgm())?;
        Ok(())
    }
}

/// Shared PGM writer: `at(col, row)` with row 0 at the top.
pub(crate) fn pgm_bytes<F: Fn(usize, usize) -> f64>(width: usize, height: usize, at: F, all: &[f64]) -> Vec<u8> {
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for row in 0..height {
        for col in 0..width {
            let v = if span > 0.0 { (at(col, row) - lo) / span } else { 0.0 };
            out.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Indicator of the disc `|x − center| < radius`. With `smooth` the edge
/// is a linear ramp one cell wide centered on the circle.
pub fn disc_indicator(spec: GridSpec, radius: f64, center: Vec2, smooth: bool) -> Result<GridField> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("disc radius must be positive, got {radius}")));
    }
    if radius < 2.0 * spec.h {
        return Err(Error::Resolution(format!(
            "disc radius {radius} is below two cells (h = {})",
            spec.h
        )));
    }
    let h = spec.h;
    Ok(GridField::from_fn(spec, move |p| {
        let d = (p - center).norm() - radius;
        if smooth {
            (0.5 - d / h).clamp(0.0, 1.0)
        } else if d < 0.0 {
            1.0
        } else {
            0.0
        }
    }))
}

/// Isotropic Gaussian `amplitude·exp(−|x−c|²/(2w²))`.
pub fn gaussian_field(spec: GridSpec, center: Vec2, width: f64, amplitude: f64) -> Result<GridField> {
    if !(width > 0.0) {
        return Err(Error::InvalidInput(format!("gaussian width must be positive, got {width}")));
    }
    Ok(GridField::from_fn(spec, move |p| {
        amplitude * (-(p - center).norm_squared() / (2.0 * width * width)).exp()
    }))
}

/// Smooth compactly supported bump `exp(1 − 1/(1 − ρ²))`, `ρ = |x−c|/radius`.
pub fn bump_value(p: Vec2, center: Vec2, radius: f64) -> f64 {
    let rho2 = (p - center).norm_squared() / (radius * radius);
    if rho2 < 1.0 {
        (1.0 - 1.0 / (1.0 - rho2)).exp()
    } else {
        0.0
    }
}

pub fn bump_field(spec: GridSpec, center: Vec2, radius: f64) -> Result<GridField> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("bump radius must be positive, got {radius}")));
    }
    Ok(GridField::from_fn(spec, move |p| bump_value(p, center, radius)))
}

/// Gaussian-windowed plane wave `cos(k·(x−x0))·exp(−|x−x0|²/(2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePacket {
    pub x0: Vec2,
    pub k: Vec2,
    pub sigma: f64,
}

impl WavePacket {
    pub fn new(x0: Vec2, k: Vec2, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidInput(format!("packet width must be positive, got {sigma}")));
        }
        if !(k.norm() > 0.0) {
            return Err(Error::InvalidInput("packet wavevector must be nonzero".into()));
        }
        Ok(Self { x0, k, sigma })
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        let d = p - self.x0;
        self.k.dot(&d).cos() * (-d.norm_squared() / (2.0 * self.sigma * self.sigma)).exp()
    }

    pub fn wavelength(&self) -> f64 {
        TAU / self.k.norm()
    }
}

pub fn wavepacket_field(spec: GridSpec, packet: &WavePacket) -> Result<GridField> {
    if packet.wavelength() < 4.0 * spec.h {
        return Err(Error::Resolution(format!(
            "wavelength {:.4} is below four cells (h = {})",
            packet.wavelength(),
            spec.h
        )));
    }
    if spec.margin(packet.x0) < 4.0 * packet.sigma {
        return Err(Error::InvalidInput(format!(
            "packet at {:?} needs a 4σ = {} margin inside the grid",
            packet.x0,
            4.0 * packet.sigma
        )));
    }
    let p = *packet;
    Ok(GridField::from_fn(spec, move |x| p.eval(x)))
}

/// Which side of the jump carries the polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpSide {
    /// `H(ρ² − t_jump)·Σ a_k t^k`
    Above,
    /// `H(t_jump − ρ²)·Σ a_k t^k`
    Below,
}

/// Polynomial in `t = ρ² − t_jump` switched on across a conormal jump.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSeries {
    pub t_jump: f64,
    pub coeffs: Vec<f64>,
    pub side: JumpSide,
    /// Optional outer limit in ρ² beyond which the profile is zero.
    pub cutoff: Option<f64>,
}

/// A radial function `f(x) = F(|x|²)`.
#[derive(Debug, Clone)]
pub enum RadialProfile {
    Zero,
    /// Sampled `F` on a grid in ρ², linear in between, zero outside.
    Table(Interpolant, Vec<f64>),
    Jump(JumpSeries),
    Sum(Vec<RadialProfile>),
}

impl RadialProfile {
    pub fn table(rho2: &[f64], values: &[f64]) -> Result<Self> {
        if rho2.first().is_some_and(|&r| r < 0.0) {
            return Err(Error::InvalidInput("table abscissae are squared radii and must be ≥ 0".into()));
        }
        Ok(RadialProfile::Table(
            Interpolant::new(rho2, values, Interp::Linear)?,
            vec![rho2[0], rho2[rho2.len() - 1]],
        ))
    }

    pub fn jump(t_jump: f64, coeffs: Vec<f64>, side: JumpSide) -> Result<Self> {
        if !(t_jump > 0.0) {
            return Err(Error::InvalidInput(format!("jump radius must be positive, got {t_jump}")));
        }
        Ok(RadialProfile::Jump(JumpSeries {
            t_jump,
            coeffs,
            side,
            cutoff: None,
        }))
    }

    /// Indicator of `|x| < radius`.
    pub fn disc(radius: f64) -> Result<Self> {
        Self::jump(radius * radius, vec![1.0], JumpSide::Below)
    }

    /// Monomial step `H(t)·t^k`, `t = ρ² − t_jump`.
    pub fn step_monomial(t_jump: f64, k: usize) -> Result<Self> {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self::jump(t_jump, c, JumpSide::Above)
    }

    pub fn eval(&self, rho2: f64) -> f64 {
        eval_radial(self, rho2)
    }

    /// Values of ρ² where the profile is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match self {
            RadialProfile::Zero => Vec::new(),
            RadialProfile::Table(_, ends) => ends.clone(),
            RadialProfile::Jump(j) => std::iter::once(j.t_jump).chain(j.cutoff).collect(),
            RadialProfile::Sum(parts) => parts.iter().flat_map(|p| p.breakpoints()).collect(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Samples `F(|x − center|²)` on a grid.
    pub fn to_field(&self, spec: GridSpec, center: Vec2) -> GridField {
        GridField::from_fn(spec, |p| self.eval((p - center).norm_squared()))
    }
}

/// `F(ρ²)`; zero outside the support.
pub fn eval_radial(profile: &RadialProfile, rho2: f64) -> f64 {
    match profile {
        RadialProfile::Zero => 0.0,
        RadialProfile::Table(interp, _) => interp.eval(rho2),
        RadialProfile::Jump(j) => {
            let t = rho2 - j.t_jump;
            let on = match j.side {
                JumpSide::Above => t >= 0.0,
                JumpSide::Below => t < 0.0,
            };
            if !on || j.cutoff.is_some_and(|c| rho2 >= c) {
                return 0.0;
            }
            j.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
        }
        RadialProfile::Sum(parts) => parts.iter().map(|p| eval_radial(p, rho2)).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(h: f64) -> GridSpec {
        GridSpec::centered(1.0, h).unwrap()
    }

    #[test]
    fn disc_values_and_area() {
        let f = disc_indicator(grid(0.005), 0.5, Vec2::zeros(), false).unwrap();
        assert_eq!(f.sample(Vec2::zeros()), 1.0);
        assert_eq!(f.sample(Vec2::new(1.0, 0.0)), 0.0);
        let area = f.integral();
        assert!((area - std::f64::consts::FRAC_PI_4).abs() < 0.01 * std::f64::consts::FRAC_PI_4);
        assert!(matches!(
            disc_indicator(grid(0.1), 0.15, Vec2::zeros(), false),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn bilinear_is_exact_on_affine_fields() {
        let s = grid(0.05);
        let f = GridField::from_fn(s, |p| 2.0 + 3.0 * p[0] - 0.7 * p[1]);
        for p in [Vec2::new(0.123, -0.456), Vec2::new(-0.9, 0.31), Vec2::new(0.999, 0.999)] {
            assert_abs_diff_eq!(f.sample(p), 2.0 + 3.0 * p[0] - 0.7 * p[1], epsilon = 1e-12);
        }
        assert_eq!(f.sample(Vec2::new(1.5, 0.0)), 0.0);
    }

    #[test]
    fn wavepacket_values() {
        let s = grid(0.01);
        let k = Vec2::new(30.0, 10.0);
        let p = WavePacket::new(Vec2::new(0.1, -0.05), k, 0.06).unwrap();
        let f = wavepacket_field(s, &p).unwrap();
        assert_abs_diff_eq!(p.eval(p.x0), 1.0, epsilon = 1e-15);
        let far = p.x0 + 4.0 * p.sigma * k / k.norm();
        assert!(p.eval(far).abs() <= (-8.0f64).exp() + 1e-15);
        assert!(f.max_abs() <= 1.0 + 1e-12);
        let bad = WavePacket::new(Vec2::zeros(), Vec2::new(200.0, 0.0), 0.06).unwrap();
        assert!(matches!(wavepacket_field(s, &bad), Err(Error::Resolution(_))));
        let edge = WavePacket::new(Vec2::new(0.95, 0.0), k, 0.06).unwrap();
        assert!(wavepacket_field(s, &edge).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let s = GridSpec::new(Vec2::new(-0.3, 0.25), 0.1, 7, 5).unwrap();
        let f = GridField::from_fn(s, |p| p[0] * p[1] + 1.0 / 3.0);
        let bytes = f.to_bytes();
        assert_eq!(bytes.len(), 80 + 8 * 35);
        let g = GridField::from_bytes(&bytes).unwrap();
        assert_eq!(f, g);
        assert!(GridField::from_bytes(&bytes[..100]).is_err());
        let pgm = f.to_pgm();
        assert!(pgm.starts_with(b"P5\n7 5\n255\n"));
        assert_eq!(pgm.len(), "P5\n7 5\n255\n".len() + 35);
    }

    #[test]
    fn radial_profiles() {
        let a = [3f64.sqrt() / 3.0, -5.0 / 16.0, 83.0 / 5184.0];
        let g = RadialProfile::jump(2.25, a.to_vec(), JumpSide::Above).unwrap();
        assert_abs_diff_eq!(g.eval(2.26), a[0] + a[1] * 0.01 + a[2] * 1e-4, epsilon = 1e-14);
        assert_abs_diff_eq!(g.eval(2.26), 0.574229, epsilon = 5e-6);
        assert_eq!(g.eval(2.24), 0.0);
        let disc = RadialProfile::disc(0.5).unwrap();
        assert_eq!(disc.eval(0.2), 1.0);
        assert_eq!(disc.eval(0.25), 0.0);
        let bg = RadialProfile::table(&[0.0, 4.0], &[0.7, 0.7]).unwrap();
        assert_abs_diff_eq!(bg.eval(1.3), 0.7, epsilon = 1e-15);
        let sum = RadialProfile::Sum(vec![disc, bg]);
        assert_abs_diff_eq!(sum.eval(0.1), 1.7, epsilon = 1e-15);
        assert_eq!(sum.breakpoints(), vec![0.0, 0.25, 4.0]);
    }

    #[test]
    fn bump_is_compact() {
        let c = Vec2::new(0.2, 0.1);
        assert_abs_diff_eq!(bump_value(c, c, 0.3), 1.0, epsilon = 1e-15);
        assert_eq!(bump_value(c + Vec2::new(0.3, 0.0), c, 0.3), 0.0);
    }
}
