//! Acceptance criteria 1–11. Every criterion prints one
//! `criterion N: PASS|FAIL` line with the measured values; the binary exits
//! nonzero if any fails. A positional argument filters by function name.
//!
//! Run with `cargo test -p circrad --test acceptance`.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use circrad::abel::{abel_apply, abel_apply_fn, abel_invert, lambda_from_sinogram, AbelKernel, Samples1D};
use circrad::cancel::{build_ghost, phantom, profile_series, residual_order, DEFAULT_H_MAX};
use circrad::fields::{disc_indicator, gaussian_field, wavepacket_field, GridField, GridSpec, WavePacket};
use circrad::geometry::{artifact_set, mirror, mirror_hit, Covector, Curve};
use circrad::radon::{forward_sinogram, forward_sinogram_fn, uniform_grid};
use circrad::wave::{
    center_of_mass, closed_box_energy, cone_diagnostic, forward_trace, max_before, parametrix_reconstruct,
    unitary_ghost, WaveConfig,
};
use circrad::Vec2;

fn report(n: u32, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n}: {tag} {detail}");
}

fn criterion_01_example_coefficients() -> bool {
    let c = build_ghost(3, DEFAULT_H_MAX).unwrap();
    let a = &c.ghost.coeffs;
    let want = [3f64.sqrt() / 3.0, -5.0 / 16.0, 83.0 / 5184.0];
    let tol = [1e-6, 1e-5, 1e-4];
    let ok: Vec<bool> = (0..3).map(|k| (a[k] - want[k]).abs() <= tol[k]).collect();
    let pass = ok.iter().all(|&b| b);
    report(
        1,
        pass,
        format!(
            "a0={:.8} (want {:.8}, {}) a1={:.8} (want {:.8}, {}) a2={:.8} (want {:.8}, {})",
            a[0], want[0], ok[0], a[1], want[1], ok[1], a[2], want[2], ok[2]
        ),
    );
    pass
}

fn criterion_02_phantom_expansion() -> bool {
    let s = profile_series(&phantom(), 3, DEFAULT_H_MAX).unwrap();
    let want = [SQRT_2, -17.0 * SQRT_2 / 12.0, 243.0 * SQRT_2 / 160.0];
    let err = (0..3).map(|j| (s.coeff(j) - want[j]).abs()).fold(0.0, f64::max);
    let pass = err <= 1e-5;
    report(
        2,
        pass,
        format!("c=({:.8}, {:.8}, {:.8}) max err {err:.2e} tol 1e-5", s.coeff(0), s.coeff(1), s.coeff(2)),
    );
    pass
}

fn criterion_03_residual_orders() -> bool {
    let c = build_ghost(3, DEFAULT_H_MAX).unwrap();
    let f = phantom();
    let fits: Vec<_> = (1..=3).map(|n| residual_order(&f, &c.ghost, n).unwrap()).collect();
    let slopes_ok = (fits[0].slope - 1.5).abs() <= 0.1 && (fits[1].slope - 2.5).abs() <= 0.1 && fits[2].slope >= 3.3;
    let want = -83.0 * SQRT_2 / 720.0;
    let coef_ok = (fits[1].coefficient - want).abs() <= 1e-3;
    let pass = slopes_ok && coef_ok;
    report(
        3,
        pass,
        format!(
            "slopes {:.3} {:.3} {:.3} ({}) two-term coefficient {:.5} (want {want:.5}, {coef_ok})",
            fits[0].slope, fits[1].slope, fits[2].slope, slopes_ok, fits[1].coefficient
        ),
    );
    pass
}

fn criterion_04_abel_left_inverse() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid: Vec<f64> = (0..1250).map(|i| 0.002 + 2.498 * i as f64 / 1249.0).collect();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let c: f64 = rng.gen_range(0.9..1.5);
        let w: f64 = rng.gen_range(0.01..0.03);
        let h = Samples1D::from_fn(grid.clone(), |r| (-(r - c) * (r - c) / w).exp()).unwrap();
        let back = abel_invert(&abel_apply(&h).unwrap(), AbelKernel::Corrected).unwrap();
        let scale = h.max_abs();
        for ((b, v), r) in back.values.iter().zip(&h.values).zip(&h.grid) {
            if (r - c).abs() <= 0.4 {
                worst = worst.max((b - v).abs() / scale);
            }
        }
    }
    let mut pair = 0.0f64;
    for t in [0.05, 0.3, 1.0, 2.7] {
        pair = pair.max((abel_apply_fn(|_| 1.0, t) - t).abs());
        pair = pair.max((abel_apply_fn(|r| r, t) - PI * t * t / 4.0).abs());
    }
    let pass = worst <= 1e-5 && pair <= 1e-8;
    report(4, pass, format!("left inverse {worst:.2e} (tol 1e-5) exact pairs {pair:.2e} (tol 1e-8)"));
    pass
}

fn criterion_05_route_consistency() -> bool {
    let c = Curve::unit_circle();
    let h = 0.005;
    let mut cfg = WaveConfig::isolated(h, &c, (Vec2::zeros(), 0.5), 2.0, 1.0).unwrap();
    cfg.n_s = 256;
    let f = disc_indicator(cfg.grid, 0.5, Vec2::zeros(), true).unwrap();
    let tr = forward_trace(&f, &cfg, &c).unwrap();
    let r = uniform_grid(0.5 * h, 0.5 * h, (2.1 / (0.5 * h)) as usize);
    let sg = forward_sinogram(&f, &c, &r, &cfg.s_grid(&c), 2048).unwrap();
    let lam = lambda_from_sinogram(&sg, &cfg.time_grid(), Some(c.length())).unwrap();
    let mut num = 0.0;
    for n in 0..tr.nt() {
        for j in 0..tr.ns() {
            num += (tr.get(n, j) - lam.get(n, j)).powi(2);
        }
    }
    let err = num.sqrt() / tr.norm_l2();
    let pass = err <= 0.03;
    report(5, pass, format!("relative L2 difference {err:.4} tol 0.03"));
    pass
}

/// Grid just large enough for solves inside the unit circle.
fn interior_config(h: f64, t_final: f64, t0: f64, support: (Vec2, f64)) -> WaveConfig {
    let mut cfg = WaveConfig::new(GridSpec::centered(1.0 + 44.0 * h, h).unwrap(), t_final, t0);
    cfg.declared_support = Some(support);
    cfg
}

fn criterion_06_parametrix() -> bool {
    let c = Curve::unit_circle();
    let center = Vec2::new(0.1, 0.05);
    let mut errs = Vec::new();
    for h in [0.01, 0.005] {
        let cfg = interior_config(h, 6.0, 2.0, (center, 0.45));
        let f = gaussian_field(cfg.grid, center, 0.1, 1.0).unwrap();
        let r = uniform_grid(0.5 * h, 0.5 * h, (1.7 / (0.5 * h)) as usize);
        let sg = forward_sinogram(&f, &c, &r, &cfg.s_grid(&c), 1024).unwrap();
        let g = parametrix_reconstruct(&sg, &cfg, &c).unwrap();
        errs.push(g.relative_l2_error(&f, |p| p.norm() < 1.0).unwrap());
    }
    let factor = errs[0] / errs[1];
    let pass = errs[0] <= 0.07 && errs[1] <= 0.07 && factor >= 1.5;
    report(
        6,
        pass,
        format!("error {:.4} (h=0.01) {:.4} (h=0.005) factor {factor:.2} (want ≤0.07, ≥1.5)", errs[0], errs[1]),
    );
    pass
}

fn criterion_07_exterior_smoothness() -> bool {
    let c = Curve::unit_circle();
    let h = 0.005;
    let w = 8.0 * h;
    let rad = 0.3;
    let mut peaks = Vec::new();
    for ctr in [Vec2::new(0.2, 0.0), Vec2::new(1.5, 0.0)] {
        let cfg = interior_config(h, 6.0, 3.5, (ctr, rad + 3.0 * w));
        let ff = move |p: Vec2| 0.5 * (1.0 - (((p - ctr).norm() - rad) / w).tanh());
        // norm of the phantom on a grid that holds it entirely
        let norm = GridField::from_fn(GridSpec::centered(2.0, h).unwrap(), ff).norm_l2();
        let r = uniform_grid(0.5 * h, h, (2.9 / h) as usize);
        let sg = forward_sinogram_fn(ff, &c, &r, &cfg.s_grid(&c), 1024).unwrap();
        let g = parametrix_reconstruct(&sg, &cfg, &c).unwrap().scaled(1.0 / norm);
        peaks.push(g.gradient_magnitude().masked(|p| p.norm() < 0.9).max_abs());
    }
    let ratio = peaks[1] / peaks[0];
    let pass = ratio <= 0.1;
    report(
        7,
        pass,
        format!("max interior gradient {:.4} (interior) {:.4} (exterior) ratio {ratio:.4} tol 0.1", peaks[0], peaks[1]),
    );
    pass
}

fn criterion_08_cancellation_ghost() -> bool {
    let c = Curve::unit_circle();
    let h = 0.0025;
    let x0 = Vec2::new(0.7, 0.0);
    let a = 20f64.to_radians();
    let k = Vec2::new(a.cos(), a.sin()) * (TAU / (20.0 * h));
    let sigma = 12.0 * h;
    let cfg = WaveConfig::isolated(h, &c, (x0, 0.3), 1.0, 0.5).unwrap();
    let fl = wavepacket_field(cfg.grid, &WavePacket::new(x0, k, sigma).unwrap()).unwrap();
    let cv = Covector::new(x0, k).unwrap();
    let fr = unitary_ghost(&fl, &cv, &cfg, &c).unwrap();

    let m = mirror(&c, &cv).unwrap();
    let offset = (center_of_mass(&fr) - m.x).norm() / sigma;

    let hit = mirror_hit(&c, &cv).unwrap();
    let r = uniform_grid(hit.t - 6.0 * sigma, 0.25 * h, (48.0 * sigma / h) as usize);
    let s: Vec<f64> = (0..81).map(|j| hit.s - 0.1 + 0.2 * j as f64 / 80.0).collect();
    let alone = forward_sinogram(&fl, &c, &r, &s, 4096).unwrap().dr().max_abs();
    let sum = fl.add_scaled(1.0, &fr).unwrap();
    let both = forward_sinogram(&sum, &c, &r, &s, 4096).unwrap().dr().max_abs();
    let ratio = both / alone;

    let pass = ratio <= 0.2 && offset <= 3.0;
    report(
        8,
        pass,
        format!("band suppression {ratio:.3} (tol 0.2) ghost center {offset:.2}σ from mirror (tol 3σ)"),
    );
    pass
}

fn criterion_09_cone_condition() -> bool {
    let c = Curve::unit_circle();
    let h = 0.01;
    let cfg = WaveConfig::isolated(h, &c, (Vec2::zeros(), 0.5), 2.0, 1.0).unwrap();
    let disc = disc_indicator(cfg.grid, 0.5, Vec2::zeros(), true).unwrap();
    let gauss = gaussian_field(cfg.grid, Vec2::new(0.2, -0.1), 0.1, 1.0).unwrap();
    let fractions: Vec<f64> = [disc, gauss]
        .iter()
        .map(|f| cone_diagnostic(&forward_trace(f, &cfg, &c).unwrap(), 1.0, false).unwrap())
        .collect();
    let pass = fractions.iter().all(|&v| v <= 0.05);
    report(
        9,
        pass,
        format!("energy outside the cone {:.4} (disc) {:.4} (Gaussian) tol 0.05", fractions[0], fractions[1]),
    );
    pass
}

/// Straight-line travel inside the unit circle with specular reflection,
/// written out independently of the library.
fn oracle_chain(x: Vec2, d: Vec2, t_max: f64) -> Vec<(i64, Vec2, Vec2)> {
    let mut out = vec![(0, x, d)];
    for sign in [1.0, -1.0] {
        let (mut p, mut u, mut clock, mut k) = (x, d * sign, 0.0, 0i64);
        loop {
            let b = p.dot(&u);
            let t = -b + (b * b - p.norm_squared() + 1.0).sqrt();
            clock += t;
            if clock > t_max {
                break;
            }
            p += t * u;
            let n = p / p.norm();
            u -= 2.0 * u.dot(&n) * n;
            k += 1;
            // at time sign·clock the physical direction is sign·u; undo the
            // free motion Φ^{-t}
            let dir = u * sign;
            out.push((sign as i64 * k, p - sign * clock * dir, dir));
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

fn criterion_10_artifact_set() -> bool {
    let c = Curve::unit_circle();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut chain_err, mut mirror_err) = (0.0f64, 0.0f64);
    let mut count_ok = true;
    for _ in 0..20 {
        let x = loop {
            let p = Vec2::new(rng.gen_range(-0.95..0.95), rng.gen_range(-0.95..0.95));
            if p.norm() < 0.95 {
                break p;
            }
        };
        let a: f64 = rng.gen_range(0.0..TAU);
        let d = Vec2::new(a.cos(), a.sin());
        let cv = Covector::new(x, d).unwrap();
        let chain = artifact_set(&c, &cv, 10.0).unwrap();
        let want = oracle_chain(x, d, 10.0);
        count_ok &= chain.len() == want.len();
        for (k, p, u) in &want {
            match chain.segment(*k) {
                Some(e) => {
                    let dx = e.covector.x - p;
                    let du = e.covector.direction() - u;
                    chain_err = chain_err.max(dx.amax()).max(du.amax());
                }
                None => count_ok = false,
            }
        }
        // tangent-line mirror at the forward hit
        let b = x.dot(&d);
        let q = x + (-b + (b * b - x.norm_squared() + 1.0).sqrt()) * d;
        let n = q / q.norm();
        let mx = x - 2.0 * (x - q).dot(&n) * n;
        let md = d - 2.0 * d.dot(&n) * n;
        let e = chain.segment(1).unwrap();
        mirror_err = mirror_err
            .max((e.covector.x - mx).amax())
            .max((e.covector.direction() - md).amax());
    }
    let pass = count_ok && chain_err <= 1e-8 && mirror_err <= 1e-10;
    report(
        10,
        pass,
        format!("segments match {count_ok}, chain error {chain_err:.2e} (tol 1e-8) mirror error {mirror_err:.2e} (tol 1e-10)"),
    );
    pass
}

fn criterion_11_solver_health() -> bool {
    let h = 0.02;
    let f = gaussian_field(GridSpec::centered(1.0, h).unwrap(), Vec2::new(0.1, 0.0), 0.1, 1.0).unwrap();
    let dt = 0.9 * h / SQRT_2;
    let e = closed_box_energy(&f, dt, (4.0 / dt).ceil() as usize).unwrap();
    let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max) / e[0];

    let c = Curve::unit_circle();
    let cfg = WaveConfig::new(GridSpec::centered(1.6, 0.005).unwrap(), 0.8, 0.4);
    let bump = circrad::fields::bump_field(cfg.grid, Vec2::zeros(), 0.3).unwrap();
    let tr = forward_trace(&bump, &cfg, &c).unwrap();
    let early = max_before(&tr, 0.7) / bump.max_abs();

    let pass = drift <= 1e-3 && early <= 1e-6;
    report(
        11,
        pass,
        format!("energy drift {drift:.2e} over 2T (tol 1e-3) signal before arrival {early:.2e} (tol 1e-6)"),
    );
    pass
}

type Check = (&'static str, fn() -> bool);

fn main() -> ExitCode {
    let all: [Check; 11] = [
        ("criterion_01_example_coefficients", criterion_01_example_coefficients),
        ("criterion_02_phantom_expansion", criterion_02_phantom_expansion),
        ("criterion_03_residual_orders", criterion_03_residual_orders),
        ("criterion_04_abel_left_inverse", criterion_04_abel_left_inverse),
        ("criterion_05_route_consistency", criterion_05_route_consistency),
        ("criterion_06_parametrix", criterion_06_parametrix),
        ("criterion_07_exterior_smoothness", criterion_07_exterior_smoothness),
        ("criterion_08_cancellation_ghost", criterion_08_cancellation_ghost),
        ("criterion_09_cone_condition", criterion_09_cone_condition),
        ("criterion_10_artifact_set", criterion_10_artifact_set),
        ("criterion_11_solver_health", criterion_11_solver_health),
    ];
    // libtest flags such as --nocapture are accepted and ignored
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (name, check) in all {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let ok = std::panic::catch_unwind(check).unwrap_or_else(|_| {
            println!("{name}: FAIL (panicked)");
            false
        });
        if !ok {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(" "));
        ExitCode::FAILURE
    }
}
