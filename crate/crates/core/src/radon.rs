//! Forward circular transform over circles centered on a curve, and the
//! exact radial fast path for the unit circle.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use crate::fields::{pgm_bytes, GridField, RadialProfile};
use crate::geometry::Curve;
use crate::interp::check_grid;
use crate::quadrature::Adaptive;
use crate::{par, Error, Result, Vec2};

/// Smallest accepted angular node count.
pub const MIN_THETA: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// Arc-length integral over the circle.
    Raw,
    /// Raw value divided by `2r`.
    RadialNormalized,
    /// A boundary trace `(t, s)` stored in the same layout.
    Trace,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Raw => "raw",
            Convention::RadialNormalized => "radial",
            Convention::Trace => "trace",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "raw" => Ok(Convention::Raw),
            "radial" => Ok(Convention::RadialNormalized),
            "trace" | "kind=trace" => Ok(Convention::Trace),
            other => Err(Error::Parse(format!("unknown convention '{other}'"))),
        }
    }
}

/// Data on an `(r, s)` rectangle, r-major: `values[i·ns + j]` belongs to
/// `(r_grid[i], s_grid[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub convention: Convention,
    pub r_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn new(convention: Convention, r_grid: Vec<f64>, s_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&r_grid)?;
        check_grid(&s_grid)?;
        if values.len() != r_grid.len() * s_grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a {}x{} table",
                values.len(),
                r_grid.len(),
                s_grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table values must be finite".into()));
        }
        Ok(Self {
            convention,
            r_grid,
            s_grid,
            values,
        })
    }

    pub fn zeros(convention: Convention, r_grid: Vec<f64>, s_grid: Vec<f64>) -> Result<Self> {
        let n = r_grid.len() * s_grid.len();
        Self::new(convention, r_grid, s_grid, vec![0.0; n])
    }

    pub fn nr(&self) -> usize {
        self.r_grid.len()
    }

    pub fn ns(&self) -> usize {
        self.s_grid.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ns() + j]
    }

    /// Values along the first axis at a fixed `s` index.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nr()).map(|i| self.get(i, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Raw ↔ radial-normalized conversion (`R = R_γ/(2r)`).
    pub fn to_convention(&self, target: Convention) -> Result<Sinogram> {
        let factor = |r: f64| match (self.convention, target) {
            (a, b) if a == b => Ok(1.0),
            (Convention::Raw, Convention::RadialNormalized) => Ok(1.0 / (2.0 * r)),
            (Convention::RadialNormalized, Convention::Raw) => Ok(2.0 * r),
            _ => Err(Error::InvalidInput("a trace cannot change convention".into())),
        };
        let ns = self.ns();
        let mut values = self.values.clone();
        for (i, &r) in self.r_grid.iter().enumerate() {
            let c = factor(r)?;
            for v in &mut values[i * ns..(i + 1) * ns] {
                *v *= c;
            }
        }
        Ok(Sinogram {
            convention: target,
            values,
            ..self.clone()
        })
    }

    /// Centered-difference `∂_r` (one-sided at the ends).
    pub fn dr(&self) -> Sinogram {
        let (nr, ns) = (self.nr(), self.ns());
        let mut values = vec![0.0; nr * ns];
        for i in 0..nr {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(nr - 1));
            let d = self.r_grid[b] - self.r_grid[a];
            for j in 0..ns {
                values[i * ns + j] = (self.get(b, j) - self.get(a, j)) / d;
            }
        }
        Sinogram {
            values,
            ..self.clone()
        }
    }

    fn uniform_step(grid: &[f64], what: &str) -> Result<f64> {
        let n = grid.len();
        let d = if n > 1 { (grid[n - 1] - grid[0]) / (n - 1) as f64 } else { 0.0 };
        let tol = 1e-9 * grid[n - 1].abs().max(grid[0].abs()).max(1.0);
        if grid.iter().enumerate().any(|(k, &g)| (g - (grid[0] + d * k as f64)).abs() > tol) {
            return Err(Error::InvalidInput(format!("{what} grid is not uniform")));
        }
        Ok(d)
    }

    /// CSV: a header line `convention,r0,dr,nr,s0,ds,ns`, one line with those
    /// values, then one line of `ns` values per r. Grids must be uniform.
    pub fn to_csv(&self) -> Result<String> {
        let dr = Self::uniform_step(&self.r_grid, "r")?;
        let ds = Self::uniform_step(&self.s_grid, "s")?;
        let mut out = String::from("convention,r0,dr,nr,s0,ds,ns\n");
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{},{:.17e},{:.17e},{}\n",
            self.convention.as_str(),
            self.r_grid[0],
            dr,
            self.nr(),
            self.s_grid[0],
            ds,
            self.ns()
        ));
        for i in 0..self.nr() {
            let row: Vec<String> = (0..self.ns()).map(|j| format!("{:.17e}", self.get(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty table file".into()))?;
        if header.split(',').map(str::trim).collect::<Vec<_>>() != ["convention", "r0", "dr", "nr", "s0", "ds", "ns"] {
            return Err(Error::Parse(format!("unexpected table header '{header}'")));
        }
        let meta: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing grid line".into()))?
            .split(',')
            .collect();
        if meta.len() != 7 {
            return Err(Error::Parse("grid line needs 7 fields".into()));
        }
        let convention = Convention::parse(meta[0])?;
        let num = |k: usize| -> Result<f64> {
            meta[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("grid field {k}: {e}")))
        };
        let count = |k: usize| -> Result<usize> {
            meta[k]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("grid field {k}: {e}")))
        };
        let (r0, dr, nr, s0, ds, ns) = (num(1)?, num(2)?, count(3)?, num(4)?, num(5)?, count(6)?);
        let r_grid: Vec<f64> = (0..nr).map(|i| r0 + dr * i as f64).collect();
        let s_grid: Vec<f64> = (0..ns).map(|j| s0 + ds * j as f64).collect();
        let mut values = Vec::with_capacity(nr * ns);
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
            if row.len() != ns {
                return Err(Error::Parse(format!("row {i} has {} values, expected {ns}", row.len())));
            }
            values.extend(row);
        }
        if values.len() != nr * ns {
            return Err(Error::Parse(format!("expected {nr} rows, got {}", values.len() / ns.max(1))));
        }
        Self::new(convention, r_grid, s_grid, values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    /// PGM with s along the horizontal axis and r increasing downwards.
    pub fn to_pgm(&self) -> Vec<u8> {
        pgm_bytes(self.ns(), self.nr(), |j, i| self.get(i, j), &self.values)
    }
}

/// `n` uniform samples `start + k·step`.
pub fn uniform_grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start + step * k as f64).collect()
}

/// Raw transform of an arbitrary function: trapezoid rule with `n_theta`
/// uniform angles and weight `r·Δθ`.
pub fn forward_sinogram_fn<F>(f: F, curve: &Curve, r_grid: &[f64], s_grid: &[f64], n_theta: usize) -> Result<Sinogram>
where
    F: Fn(Vec2) -> f64 + Sync + Send,
{
    if n_theta < MIN_THETA {
        return Err(Error::InvalidInput(format!("n_theta must be at least {MIN_THETA}, got {n_theta}")));
    }
    check_grid(r_grid)?;
    check_grid(s_grid)?;
    if r_grid[0] <= 0.0 {
        return Err(Error::InvalidInput("radii must be positive".into()));
    }
    let dtheta = TAU / n_theta as f64;
    let dirs: Vec<Vec2> = (0..n_theta)
        .map(|k| {
            let a = dtheta * k as f64;
            Vec2::new(a.cos(), a.sin())
        })
        .collect();
    let centers: Vec<Vec2> = s_grid.iter().map(|&s| curve.point(s)).collect();
    let ns = s_grid.len();
    let values = par::map_range(r_grid.len() * ns, |idx| {
        let (i, j) = (idx / ns, idx % ns);
        let r = r_grid[i];
        let c = centers[j];
        dirs.iter().map(|d| f(c + r * d)).sum::<f64>() * r * dtheta
    });
    Sinogram::new(Convention::Raw, r_grid.to_vec(), s_grid.to_vec(), values)
}

/// Raw transform of a sampled field (bilinear sampling).
pub fn forward_sinogram(
    f: &GridField,
    curve: &Curve,
    r_grid: &[f64],
    s_grid: &[f64],
    n_theta: usize,
) -> Result<Sinogram> {
    check_truncation(f, curve, r_grid, s_grid)?;
    forward_sinogram_fn(|p| f.sample(p), curve, r_grid, s_grid, n_theta)
}

/// Fails when some circle leaves the grid while the field does not vanish
/// on the grid's outer ring.
fn check_truncation(f: &GridField, curve: &Curve, r_grid: &[f64], s_grid: &[f64]) -> Result<()> {
    let s = f.spec;
    let scale = f.max_abs();
    if scale == 0.0 {
        return Ok(());
    }
    let mut edge = 0.0f64;
    for i in 0..s.nx {
        edge = edge.max(f.get(i, 0).abs()).max(f.get(i, s.ny - 1).abs());
    }
    for j in 0..s.ny {
        edge = edge.max(f.get(0, j).abs()).max(f.get(s.nx - 1, j).abs());
    }
    if edge <= 1e-12 * scale {
        return Ok(());
    }
    let r_max = r_grid.iter().copied().fold(0.0, f64::max);
    if s_grid.iter().any(|&p| s.margin(curve.point(p)) < r_max) {
        return Err(Error::Truncation(format!(
            "circles of radius {r_max} leave the grid and the field is nonzero on its edge ({edge:.3e})"
        )));
    }
    Ok(())
}

/// `R f(r) = ∫_0^π F(1 + r² + 2r cos θ) dθ` for the unit circle centered at
/// the origin and `f(x) = F(|x|²)`. The integration is split at every angle
/// where the circle crosses a breakpoint of `F`.
pub fn radial_transform(profile: &RadialProfile, r: f64) -> Result<f64> {
    radial_transform_with(profile, r, &Adaptive::default())
}

pub fn radial_transform_with(profile: &RadialProfile, r: f64, quad: &Adaptive) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
    }
    if matches!(profile, RadialProfile::Zero) {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = profile
        .breakpoints()
        .into_iter()
        .filter_map(|b| crossing_angle(b, r))
        .collect();
    let est = quad.integrate(|th| profile.eval(1.0 + r * r + 2.0 * r * th.cos()), 0.0, PI, &breaks)?;
    Ok(est.value)
}

/// Angle `θ ∈ (0, π)` where `1 + r² + 2r cos θ = b`, via half angles so
/// the result stays accurate when the circle is nearly tangent to the
/// sphere `|x|² = b`.
fn crossing_angle(b: f64, r: f64) -> Option<f64> {
    let one_plus_c = (b - (1.0 - r) * (1.0 - r)) / (2.0 * r);
    let one_minus_c = ((1.0 + r) * (1.0 + r) - b) / (2.0 * r);
    if !(one_plus_c > 0.0 && one_minus_c > 0.0) {
        return None;
    }
    Some(if one_plus_c < one_minus_c {
        PI - 2.0 * (0.5 * one_plus_c).sqrt().asin()
    } else {
        2.0 * (0.5 * one_minus_c).sqrt().asin()
    })
}

/// Nearest and farthest distance from `γ(s)` to a disc.
pub fn support_bounds(center: Vec2, radius: f64, curve: &Curve, s: f64) -> (f64, f64) {
    let d = (curve.point(s) - center).norm();
    ((d - radius).max(0.0), d + radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{disc_indicator, GridSpec, JumpSide};
    use approx::assert_abs_diff_eq;

    fn arc_oracle(r: f64) -> f64 {
        // raw arc length of |x−(1,0)| = r inside |x| < 1/2
        let c = (r * r + 0.75) / (2.0 * r);
        if c >= 1.0 {
            0.0
        } else if c <= -1.0 {
            TAU * r
        } else {
            2.0 * r * c.acos()
        }
    }

    #[test]
    fn zero_field_gives_zero_sinogram() {
        let spec = GridSpec::centered(2.0, 0.05).unwrap();
        let f = GridField::zeros(spec);
        let sg = forward_sinogram(&f, &Curve::unit_circle(), &[0.5, 1.0], &[0.0, 1.0], 64).unwrap();
        assert!(sg.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disc_sinogram_matches_arc_oracle() {
        let c = Curve::unit_circle();
        let exact = forward_sinogram_fn(
            |p| if p.norm() < 0.5 { 1.0 } else { 0.0 },
            &c,
            &[0.75],
            &[0.0, 1.0, 2.5],
            8192,
        )
        .unwrap();
        for j in 0..3 {
            assert!((exact.get(0, j) - arc_oracle(0.75)).abs() < 1e-3 * arc_oracle(0.75));
        }
        assert_abs_diff_eq!(arc_oracle(0.75), 0.7580, epsilon = 1e-4);
        let spec = GridSpec::centered(2.0, 0.005).unwrap();
        let f = disc_indicator(spec, 0.5, Vec2::zeros(), false).unwrap();
        let sg = forward_sinogram(&f, &c, &[0.75], &[0.0, 1.0, 2.5], 2048).unwrap();
        for j in 0..3 {
            assert!((sg.get(0, j) - arc_oracle(0.75)).abs() < 1e-2 * arc_oracle(0.75));
        }
    }

    #[test]
    fn radial_transform_examples() {
        let disc = RadialProfile::disc(0.5).unwrap();
        let h: f64 = 0.01;
        let r = 0.5 + h;
        let expect = (((0.5 + h) * (0.5 + h) + 0.75) / (1.0 + 2.0 * h)).acos();
        assert_abs_diff_eq!(radial_transform(&disc, r).unwrap(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(expect, 0.139439, epsilon = 1e-6);
        assert_eq!(radial_transform(&disc, 0.49).unwrap(), 0.0);
        let step = RadialProfile::step_monomial(2.25, 0).unwrap();
        let a0 = ((1.25 - r * r) / (1.0 + 2.0 * h)).acos();
        assert_abs_diff_eq!(radial_transform(&step, r).unwrap(), a0, epsilon = 1e-12);
        assert_eq!(radial_transform(&RadialProfile::Zero, 0.3).unwrap(), 0.0);
        let _ = JumpSide::Above;
    }

    #[test]
    fn support_bounds_examples() {
        let c = Curve::unit_circle();
        let (a, b) = support_bounds(Vec2::zeros(), 0.5, &c, 1.234);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 1.5, epsilon = 1e-14);
        let (a, b) = support_bounds(Vec2::new(0.3, 0.0), 0.0, &c, 0.0);
        assert_abs_diff_eq!(a, 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 0.7, epsilon = 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let sg = Sinogram::new(
            Convention::Raw,
            uniform_grid(0.1, 0.1, 3),
            uniform_grid(0.0, 0.5, 2),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5],
        )
        .unwrap();
        let text = sg.to_csv().unwrap();
        assert!(text.starts_with("convention,r0,dr,nr,s0,ds,ns\nraw,"));
        let back = Sinogram::from_csv_str(&text).unwrap();
        assert_eq!(back.values, sg.values);
        assert!((back.r_grid[2] - 0.3).abs() < 1e-15);
        assert!(Sinogram::from_csv_str("nope\n").is_err());
    }

    #[test]
    fn truncation_is_flagged() {
        let spec = GridSpec::centered(1.0, 0.05).unwrap();
        let f = GridField::from_fn(spec, |_| 1.0);
        assert!(matches!(
            forward_sinogram(&f, &Curve::unit_circle(), &[0.5], &[0.0], 64),
            Err(Error::Truncation(_))
        ));
        assert!(forward_sinogram(&f, &Curve::unit_circle(), &[0.5], &[0.0], 32).is_err());
    }
}
