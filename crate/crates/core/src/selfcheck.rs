//! Quick invariant suite across all modules, with a plain-text report.
//!
//! The report contains measured values and tolerances only (no timings),
//! so two runs with the same seed print identical bytes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abel::{
    abel_apply, abel_apply_fn, abel_invert, lambda_from_sinogram, principal_symbol_a, principal_symbol_b, AbelKernel,
    Samples1D,
};
use crate::cancel::{build_ghost, phantom, residual_order, DEFAULT_H_MAX};
use crate::fields::{bump_field, disc_indicator, gaussian_field, GridSpec, RadialProfile};
use crate::geometry::{artifact_set, billiard_flow, mirror, Covector, Curve};
use crate::radon::{forward_sinogram, radial_transform, uniform_grid};
use crate::wave::{closed_box_energy, cone_diagnostic, forward_trace, max_before, WaveConfig};
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfcheckOptions {
    pub seed: u64,
    /// Kernel used by the left-inverse check.
    pub kernel: AbelKernel,
}

impl Default for SelfcheckOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            kernel: AbelKernel::Corrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    /// Passes when `measured ≤ tolerance`.
    fn at_most(name: &'static str, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    fn from_result(name: &'static str, tolerance: f64, r: Result<f64>) -> Self {
        match r {
            Ok(v) => Self::at_most(name, v, tolerance),
            Err(e) => {
                log::error!("{name}: {e}");
                Self {
                    name,
                    measured: f64::NAN,
                    tolerance,
                    passed: false,
                }
            }
        }
    }
}

fn random_covector(rng: &mut ChaCha8Rng) -> Covector {
    loop {
        let x = Vec2::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
        if x.norm() < 0.9 {
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            return Covector::new(x, Vec2::new(a.cos(), a.sin())).expect("unit direction");
        }
    }
}

fn check_mirror() -> Result<f64> {
    let cv = Covector::from_components(0.0, 0.0, 1.0, 0.0)?;
    let m = mirror(&Curve::unit_circle(), &cv)?;
    Ok((m.x - Vec2::new(2.0, 0.0)).norm() + (m.direction() - Vec2::new(-1.0, 0.0)).norm())
}

fn check_artifact_chain() -> Result<f64> {
    let cv = Covector::from_components(0.0, 0.0, 1.0, 0.0)?;
    let chain = artifact_set(&Curve::unit_circle(), &cv, 4.0)?;
    let want = [(0, Vec2::new(0.0, 0.0)), (1, Vec2::new(2.0, 0.0)), (2, Vec2::new(-4.0, 0.0))];
    let mut err = 0.0f64;
    for (k, p) in want {
        err = match chain.segment(k) {
            Some(e) => err.max((e.covector.x - p).norm()),
            None => f64::INFINITY,
        };
    }
    Ok(err)
}

/// The segment-1 artifact element must be the tangent-line mirror.
fn check_segment_one(rng: &mut ChaCha8Rng) -> Result<f64> {
    let c = Curve::unit_circle();
    let mut err = 0.0f64;
    for _ in 0..10 {
        let cv = random_covector(rng);
        let chain = artifact_set(&c, &cv, 10.0)?;
        let m = mirror(&c, &cv)?;
        if let Some(e) = chain.segment(1) {
            err = err.max((e.covector.x - m.x).norm()).max((e.covector.direction() - m.direction()).norm());
        }
        // the flow stays inside
        err = err.max((billiard_flow(&c, &cv, 3.3)?.x.norm() - 1.0).max(0.0));
    }
    Ok(err)
}

fn check_arc_oracle() -> Result<f64> {
    let r = 0.75;
    let got = radial_transform(&RadialProfile::disc(0.5)?, r)?;
    // angular measure of the arc inside the disc
    let want = ((r * r + 0.75) / (2.0 * r)).acos();
    Ok((got - want).abs())
}

fn check_abel_pairs() -> Result<f64> {
    let mut err = 0.0f64;
    for t in [0.1, 0.7, 1.9] {
        err = err.max((abel_apply_fn(|_| 1.0, t) - t).abs());
        err = err.max((abel_apply_fn(|r| r, t) - PI * t * t / 4.0).abs());
    }
    Ok(err)
}

fn check_left_inverse(rng: &mut ChaCha8Rng, kernel: AbelKernel) -> Result<f64> {
    let grid: Vec<f64> = (0..1250).map(|i| 0.002 + 2.498 * i as f64 / 1249.0).collect();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let c: f64 = rng.gen_range(0.9..1.5);
        let w: f64 = rng.gen_range(0.01..0.03);
        let h = Samples1D::from_fn(grid.clone(), |r| (-(r - c) * (r - c) / w).exp())?;
        let back = abel_invert(&abel_apply(&h)?, kernel)?;
        let scale = h.max_abs();
        let band = (c - 0.4)..=(c + 0.4);
        for ((b, v), r) in back.values.iter().zip(&h.values).zip(&h.grid) {
            if band.contains(r) {
                worst = worst.max((b - v).abs() / scale);
            }
        }
    }
    Ok(worst)
}

fn check_symbols() -> Result<f64> {
    let mut err = 0.0f64;
    for (r, tau) in [(0.3, -7.0), (1.0, 1.0), (2.0, 50.0)] {
        let p = principal_symbol_a(r, tau)? * principal_symbol_b(r, tau)?;
        err = err.max((p - 1.0).norm());
    }
    Ok(err)
}

fn check_a0() -> Result<f64> {
    let c = build_ghost(1, DEFAULT_H_MAX)?;
    Ok((c.ghost.coeffs[0] - 3f64.sqrt() / 3.0).abs())
}

fn check_one_term_slope() -> Result<f64> {
    let c = build_ghost(1, DEFAULT_H_MAX)?;
    let fit = residual_order(&phantom(), &c.ghost, 1)?;
    Ok((fit.slope - 1.5).abs())
}

fn check_energy() -> Result<f64> {
    let spec = GridSpec::centered(1.0, 0.02)?;
    let f = gaussian_field(spec, Vec2::new(0.1, 0.0), 0.1, 1.0)?;
    let dt = 0.9 * 0.02 / 2f64.sqrt();
    // 2T with T = 2
    let e = closed_box_energy(&f, dt, (4.0 / dt).ceil() as usize)?;
    Ok(e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max) / e[0])
}

fn check_finite_speed() -> Result<f64> {
    let c = Curve::unit_circle();
    let spec = GridSpec::centered(1.6, 0.005)?;
    let cfg = WaveConfig::new(spec, 0.8, 0.4);
    let f = bump_field(spec, Vec2::zeros(), 0.3)?;
    let tr = forward_trace(&f, &cfg, &c)?;
    Ok(max_before(&tr, 0.7) / f.max_abs())
}

/// Route consistency and the cone fraction from one disc-phantom trace.
fn check_route_and_cone() -> Result<(f64, f64)> {
    let c = Curve::unit_circle();
    let h = 0.02;
    let mut cfg = WaveConfig::isolated(h, &c, (Vec2::zeros(), 0.5), 2.0, 1.0)?;
    cfg.n_s = 128;
    let f = disc_indicator(cfg.grid, 0.5, Vec2::zeros(), true)?;
    let tr = forward_trace(&f, &cfg, &c)?;
    let r = uniform_grid(0.5 * h, 0.5 * h, (2.1 / (0.5 * h)) as usize);
    let sg = forward_sinogram(&f, &c, &r, &cfg.s_grid(&c), 1024)?;
    let lam = lambda_from_sinogram(&sg, &cfg.time_grid(), Some(c.length()))?;
    let mut num = 0.0;
    for n in 0..tr.nt() {
        for j in 0..tr.ns() {
            num += (tr.get(n, j) - lam.get(n, j)).powi(2);
        }
    }
    let route = num.sqrt() / tr.norm_l2();
    Ok((route, cone_diagnostic(&tr, 1.0, false)?))
}

/// Runs every check in a fixed order.
pub fn run_selfcheck(opts: &SelfcheckOptions) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = vec![
        CheckResult::from_result("geometry.mirror_center", 1e-12, check_mirror()),
        CheckResult::from_result("geometry.artifact_chain", 1e-10, check_artifact_chain()),
        CheckResult::from_result("geometry.segment_one_mirror", 1e-10, check_segment_one(&mut rng)),
        CheckResult::from_result("radon.arc_oracle", 1e-10, check_arc_oracle()),
        CheckResult::from_result("abel.exact_pairs", 1e-8, check_abel_pairs()),
        CheckResult::from_result("abel.left_inverse", 1e-5, check_left_inverse(&mut rng, opts.kernel)),
        CheckResult::from_result("abel.symbol_product", 1e-12, check_symbols()),
        CheckResult::from_result("cancel.a0", 1e-6, check_a0()),
        CheckResult::from_result("cancel.one_term_slope", 0.1, check_one_term_slope()),
        CheckResult::from_result("wave.energy_drift", 1e-3, check_energy()),
        CheckResult::from_result("wave.finite_speed", 1e-6, check_finite_speed()),
    ];
    match check_route_and_cone() {
        Ok((route, cone)) => {
            out.push(CheckResult::at_most("wave.route_consistency", route, 0.03));
            out.push(CheckResult::at_most("wave.cone_fraction", cone, 0.05));
        }
        Err(e) => {
            let msg = e.to_string();
            out.push(CheckResult::from_result("wave.route_consistency", 0.03, Err(e)));
            out.push(CheckResult::from_result("wave.cone_fraction", 0.05, Err(Error::NotApplicable(msg))));
        }
    }
    out
}

pub fn render_report(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "[{tag}] {:<28} measured={:.3e} tol={:.1e}", r.name, r.measured, r.tolerance);
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let _ = writeln!(s, "{passed}/{} checks passed", results.len());
    s
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_format() {
        let r = vec![CheckResult::at_most("x", 1.0, 2.0), CheckResult::at_most("y", 3.0, 2.0)];
        let text = render_report(&r);
        assert!(text.starts_with("[PASS] x"));
        assert!(text.contains("[FAIL] y"));
        assert!(text.ends_with("1/2 checks passed\n"));
        assert!(!all_passed(&r));
    }
}
