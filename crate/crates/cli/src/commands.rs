use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use circrad::abel::{lambda_from_sinogram, AbelKernel};
use circrad::cancel::{build_ghost, difference, phantom, residual_curve, residual_order};
use circrad::fields::{disc_indicator, gaussian_field, wavepacket_field, GridField, GridSpec, WavePacket};
use circrad::geometry::{artifact_set, mirror, Covector, Curve, ON_CURVE_TOL};
use circrad::radon::{forward_sinogram, forward_sinogram_fn, uniform_grid, Convention, Sinogram};
use circrad::selfcheck::{all_passed, render_report, run_selfcheck, SelfcheckOptions};
use circrad::wave::{center_of_mass, parametrix_reconstruct, unitary_ghost, WaveConfig, MIN_SPONGE};
use circrad::Vec2;

use crate::config::{ArtifactsConfig, CancelConfig, ForwardConfig, GhostConfig, PhantomSpec, ReconstructConfig};
use crate::error::{CliError, CliResult};
use crate::output::RunDir;

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn vec2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s.into_bytes()
}

pub fn forward(cfg: &ForwardConfig, run: &mut RunDir) -> CliResult<()> {
    positive("h", cfg.h)?;
    positive("grid_half", cfg.grid_half)?;
    positive("r_start", cfg.r_start)?;
    positive("r_step", cfg.r_step)?;
    if cfg.nr == 0 || cfg.ns == 0 {
        return Err(CliError::Config("nr and ns must be at least 1".into()));
    }
    let convention = Convention::parse(&cfg.convention).map_err(|e| CliError::Config(e.to_string()))?;
    if convention == Convention::Trace {
        return Err(CliError::Config("forward writes `raw` or `radial` sinograms".into()));
    }
    if let Some(p) = cfg.curve.input_path() {
        run.input(p)?;
    }
    let curve = cfg.curve.build()?;
    let r = uniform_grid(cfg.r_start, cfg.r_step, cfg.nr);
    let s = curve.uniform_parameters(cfg.ns);
    let spec = GridSpec::centered(cfg.grid_half, cfg.h)?;
    let n = cfg.n_theta;
    // analytic phantoms are integrated exactly as functions, sampled ones
    // through bilinear interpolation
    let (field, sg) = match &cfg.phantom {
        PhantomSpec::Zero => (GridField::zeros(spec), forward_sinogram_fn(|_| 0.0, &curve, &r, &s, n)?),
        PhantomSpec::Disc { center, radius, smooth } => {
            let c = vec2(*center);
            let f = disc_indicator(spec, *radius, c, *smooth)?;
            let sg = if *smooth {
                forward_sinogram(&f, &curve, &r, &s, n)?
            } else {
                let rad = *radius;
                forward_sinogram_fn(move |p| if (p - c).norm() < rad { 1.0 } else { 0.0 }, &curve, &r, &s, n)?
            };
            (f, sg)
        }
        PhantomSpec::Gaussian { center, width, amplitude } => {
            let (c, w, a) = (vec2(*center), *width, *amplitude);
            let f = gaussian_field(spec, c, w, a)?;
            let sg = forward_sinogram_fn(move |p| a * (-(p - c).norm_squared() / (2.0 * w * w)).exp(), &curve, &r, &s, n)?;
            (f, sg)
        }
        PhantomSpec::File { path } => {
            run.input(path)?;
            let f = GridField::read_binary(path)?;
            let sg = forward_sinogram(&f, &curve, &r, &s, n)?;
            (f, sg)
        }
    };
    if let Some(t_final) = cfg.trace_t_final {
        positive("trace_t_final", t_final)?;
        let n = (t_final / cfg.r_step).round().max(1.0) as usize;
        let t: Vec<f64> = (0..=n).map(|k| t_final * k as f64 / n as f64).collect();
        let period = curve.is_closed().then(|| curve.length());
        let tr = lambda_from_sinogram(&sg, &t, period)?;
        run.write("trace.csv", tr.to_csv()?.as_bytes())?;
        run.write("trace.pgm", &tr.to_pgm()?)?;
    }
    let sg = sg.to_convention(convention)?;
    run.write("sinogram.csv", sg.to_csv()?.as_bytes())?;
    run.write("sinogram.pgm", &sg.to_pgm())?;
    run.write("phantom.bin", &field.to_bytes())?;
    run.write("phantom.pgm", &field.to_pgm())?;
    Ok(())
}

/// Grid holding the curve plus the sponge and a four-cell margin.
fn interior_grid(curve: &Curve, h: f64) -> CliResult<GridSpec> {
    let (lo, hi) = curve.bounding_box();
    let reach = lo.abs().max().max(hi.abs().max());
    Ok(GridSpec::centered(reach + (MIN_SPONGE + 4) as f64 * h, h)?)
}

pub fn reconstruct(cfg: &ReconstructConfig, run: &mut RunDir) -> CliResult<()> {
    positive("h", cfg.h)?;
    let path = cfg
        .sinogram
        .as_ref()
        .ok_or_else(|| CliError::Config("reconstruct needs `sinogram` (a sinogram CSV)".into()))?;
    if let Some(p) = cfg.curve.input_path() {
        run.input(p)?;
    }
    let curve = cfg.curve.build()?;
    if !curve.is_closed() {
        return Err(CliError::Config("reconstruction needs a closed curve".into()));
    }
    run.input(path)?;
    let sg = Sinogram::read_csv(path)?;
    let mut wc = WaveConfig::new(interior_grid(&curve, cfg.h)?, cfg.t_final, cfg.t0);
    wc.declared_support = cfg.support.as_ref().map(|s| (vec2(s.center), s.radius));
    let g = parametrix_reconstruct(&sg, &wc, &curve)?;

    let mut report = json!({
        "grid": {"nx": g.spec.nx, "ny": g.spec.ny, "h": g.spec.h},
        "t_final": wc.t_final,
        "t0": wc.t0,
        "max_abs": g.max_abs(),
        "norm_l2": g.norm_l2(),
    });
    if let Some(tp) = &cfg.truth {
        run.input(tp)?;
        let truth = GridField::read_binary(tp)?;
        let on_grid = GridField::from_fn(g.spec, |p| truth.sample(p));
        let err = g.relative_l2_error(&on_grid, |p| curve.contains(p))?;
        report["relative_l2_error"] = json!(err);
        println!("relative L2 error inside the curve: {err:.6}");
    }
    run.write("reconstruction.bin", &g.to_bytes())?;
    run.write("reconstruction.pgm", &g.to_pgm())?;
    run.write("report.json", &json_bytes(&report))?;
    Ok(())
}

fn random_interior(curve: &Curve, rng: &mut ChaCha8Rng) -> Covector {
    let (lo, hi) = curve.bounding_box();
    loop {
        let x = Vec2::new(rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1]));
        if curve.contains(x) && curve.nearest(x).0 > 1e3 * ON_CURVE_TOL {
            let a: f64 = rng.gen_range(0.0..TAU);
            return Covector { x, xi: Vec2::new(a.cos(), a.sin()) };
        }
    }
}

pub fn artifacts(cfg: &ArtifactsConfig, run: &mut RunDir) -> CliResult<()> {
    positive("t_max", cfg.t_max)?;
    if let Some(p) = cfg.curve.input_path() {
        run.input(p)?;
    }
    let curve = cfg.curve.build()?;
    let mut list = cfg
        .covectors
        .iter()
        .map(|c| Covector::from_components(c[0], c[1], c[2], c[3]).map_err(|e| CliError::Config(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    if cfg.random_covectors > 0 {
        if !curve.is_closed() {
            return Err(CliError::Config("random covectors need a closed curve".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        list.extend((0..cfg.random_covectors).map(|_| random_interior(&curve, &mut rng)));
    }
    if list.is_empty() {
        return Err(CliError::Config("no covectors given".into()));
    }
    let mut index = String::from("index,x,y,xix,xiy,elements\n");
    for (k, cv) in list.iter().enumerate() {
        let chain = artifact_set(&curve, cv, cfg.t_max)?;
        let _ = writeln!(
            index,
            "{k},{:.12},{:.12},{:.12},{:.12},{}",
            cv.x[0],
            cv.x[1],
            cv.xi[0],
            cv.xi[1],
            chain.len()
        );
        run.write(&format!("artifacts_{k}.csv"), chain.to_csv().as_bytes())?;
    }
    run.write("covectors.csv", index.as_bytes())?;
    Ok(())
}

pub fn cancel(cfg: &CancelConfig, run: &mut RunDir) -> CliResult<()> {
    if cfg.n_terms == 0 {
        return Err(CliError::Config("n_terms must be at least 1".into()));
    }
    positive("h_max", cfg.h_max)?;
    if cfg.n_r < 2 || cfg.image_size < 2 {
        return Err(CliError::Config("n_r and image_size must be at least 2".into()));
    }
    let c = build_ghost(cfg.n_terms, cfg.h_max)?;

    let mut coeffs = String::from("k,a_k\n");
    for (k, a) in c.ghost.coeffs.iter().enumerate() {
        let _ = writeln!(coeffs, "{k},{a:.15e}");
    }
    run.write("coefficients.csv", coeffs.as_bytes())?;

    let mut series = String::from("series,j,coeff,uncertainty\n");
    let named = std::iter::once(("phantom".to_string(), &c.target))
        .chain(c.basis.iter().enumerate().map(|(k, b)| (format!("basis_{k}"), b)));
    for (name, s) in named {
        for (j, (v, u)) in s.coeffs.iter().zip(&s.uncertainty).enumerate() {
            let _ = writeln!(series, "{name},{j},{v:.15e},{u:.3e}");
        }
    }
    run.write("series.csv", series.as_bytes())?;

    let f = phantom();
    let mut orders = String::from("n_terms,slope,coefficient,max_abs,indeterminate\n");
    for n in 1..=cfg.n_terms {
        let fit = residual_order(&f, &c.ghost, n)?;
        let _ = writeln!(
            orders,
            "{n},{:.6},{:.6e},{:.6e},{}",
            fit.slope, fit.coefficient, fit.max_abs, fit.indeterminate
        );
    }
    run.write("residual_orders.csv", orders.as_bytes())?;

    let r: Vec<f64> = (1..=cfg.n_r).map(|k| 2.0 * k as f64 / cfg.n_r as f64).collect();
    let mut curve = String::from("r,Rf,Rg,Rdiff\n");
    for row in residual_curve(&f, &c.ghost, &r)? {
        let _ = writeln!(curve, "{:.6},{:.12e},{:.12e},{:.12e}", row[0], row[1], row[2], row[3]);
    }
    run.write("figure.csv", curve.as_bytes())?;

    // f − g on [−2, 2]²
    let spec = GridSpec::centered(2.0, 4.0 / (cfg.image_size - 1) as f64)?;
    let img = difference(&f, &c.ghost).to_field(spec, Vec2::zeros());
    run.write("figure.pgm", &img.to_pgm())?;
    Ok(())
}

pub fn ghost(cfg: &GhostConfig, run: &mut RunDir) -> CliResult<()> {
    positive("h", cfg.h)?;
    positive("cells_per_wavelength", cfg.cells_per_wavelength)?;
    positive("sigma_cells", cfg.sigma_cells)?;
    if let Some(p) = cfg.curve.input_path() {
        run.input(p)?;
    }
    let curve = cfg.curve.build()?;
    let h = cfg.h;
    let x0 = vec2(cfg.x0);
    let a = cfg.angle_deg.to_radians();
    let k = Vec2::new(a.cos(), a.sin()) * (TAU / (cfg.cells_per_wavelength * h));
    let sigma = cfg.sigma_cells * h;
    let wc = WaveConfig::isolated(h, &curve, (x0, 5.0 * sigma), cfg.t_final, cfg.t0)?;
    let fl = wavepacket_field(wc.grid, &WavePacket::new(x0, k, sigma)?)?;
    let cv = Covector::new(x0, k)?;
    let fr = unitary_ghost(&fl, &cv, &wc, &curve)?;
    let m = mirror(&curve, &cv)?;
    let com = center_of_mass(&fr);
    let offset = (com - m.x).norm() / sigma;
    println!("ghost center {:.4},{:.4}; mirror point {:.4},{:.4}; offset {offset:.2} sigma", com[0], com[1], m.x[0], m.x[1]);
    let report = json!({
        "sigma": sigma,
        "mirror_point": [m.x[0], m.x[1]],
        "mirror_direction": [m.direction()[0], m.direction()[1]],
        "ghost_center": [com[0], com[1]],
        "offset_sigma": offset,
        "norm_ratio": fr.norm_l2() / fl.norm_l2(),
    });
    run.write("f_left.bin", &fl.to_bytes())?;
    run.write("f_left.pgm", &fl.to_pgm())?;
    run.write("f_right.bin", &fr.to_bytes())?;
    run.write("f_right.pgm", &fr.to_pgm())?;
    run.write("f_sum.pgm", &fl.add_scaled(1.0, &fr)?.to_pgm())?;
    run.write("report.json", &json_bytes(&report))?;
    Ok(())
}

pub fn selfcheck(seed: u64, kernel: AbelKernel, run: &mut RunDir) -> CliResult<()> {
    let results = run_selfcheck(&SelfcheckOptions { seed, kernel });
    let text = render_report(&results);
    print!("{text}");
    run.write("report.txt", text.as_bytes())?;
    if all_passed(&results) {
        Ok(())
    } else {
        Err(CliError::Failed("some self-checks failed".into()))
    }
}
