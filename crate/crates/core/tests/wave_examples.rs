use std::f64::consts::TAU;

use circrad::fields::{disc_indicator, gaussian_field, wavepacket_field, GridField, WavePacket};
use circrad::geometry::{Covector, Curve};
use circrad::wave::{
    correlation, edge_along, forward_trace, incoming_inverse, time_reversal, unitary_ghost, Side, WaveConfig,
};
use circrad::Vec2;

#[test]
fn time_reversal_recovers_a_gaussian() {
    let c = Curve::unit_circle();
    let center = Vec2::new(0.1, 0.05);
    let mut errs = Vec::new();
    for h in [0.01, 0.005] {
        let cfg = WaveConfig::isolated(h, &c, (center, 0.45), 6.0, 2.0).unwrap();
        let f = gaussian_field(cfg.grid, center, 0.1, 1.0).unwrap();
        let tr = forward_trace(&f, &cfg, &c).unwrap();
        let g = time_reversal(&tr, &cfg, &c).unwrap();
        errs.push(g.relative_l2_error(&f, |p| p.norm() < 1.0).unwrap());
    }
    assert!(errs[1] <= 0.05, "{errs:?}");
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn disc_edge_is_recovered() {
    let c = Curve::unit_circle();
    let h = 0.01;
    let cfg = WaveConfig::isolated(h, &c, (Vec2::zeros(), 0.5), 4.0, 2.0).unwrap();
    let f = disc_indicator(cfg.grid, 0.5, Vec2::zeros(), true).unwrap();
    let g = time_reversal(&forward_trace(&f, &cfg, &c).unwrap(), &cfg, &c).unwrap();
    for k in 0..8 {
        let a = TAU * k as f64 / 8.0;
        let edge = edge_along(&g, Vec2::zeros(), Vec2::new(a.cos(), a.sin()), 0.9, 0.25 * h);
        assert!((edge - 0.5).abs() <= 2.0 * h, "direction {k}: edge at {edge}");
    }
}

#[test]
fn left_round_trip_recovers_a_packet() {
    let c = Curve::unit_circle();
    let h = 0.0025;
    let x0 = Vec2::new(0.8, 0.0);
    let a = 20f64.to_radians();
    let k = Vec2::new(a.cos(), a.sin()) * (TAU / (24.0 * h));
    let cfg = WaveConfig::isolated(h, &c, (x0, 0.2), 1.0, 0.5).unwrap();
    let f = wavepacket_field(cfg.grid, &WavePacket::new(x0, k, 12.0 * h).unwrap()).unwrap();
    let back = incoming_inverse(&forward_trace(&f, &cfg, &c).unwrap(), Side::Left, &cfg, &c).unwrap();
    let corr = correlation(&back, &f).unwrap();
    let energy = (back.norm_l2() / f.norm_l2()).powi(2);
    assert!(corr >= 0.95, "correlation {corr}");
    assert!((energy - 1.0).abs() <= 0.1, "energy ratio {energy}");
}

#[test]
fn ghost_of_zero_is_zero() {
    let c = Curve::unit_circle();
    let cfg = WaveConfig::isolated(0.02, &c, (Vec2::new(0.5, 0.0), 0.2), 1.0, 0.5).unwrap();
    let cv = Covector::from_components(0.5, 0.0, 1.0, 0.0).unwrap();
    let g = unitary_ghost(&GridField::zeros(cfg.grid), &cv, &cfg, &c).unwrap();
    assert_eq!(g.max_abs(), 0.0);
}

#[test]
fn ghost_needs_a_left_covector() {
    let c = Curve::unit_circle();
    let cfg = WaveConfig::isolated(0.02, &c, (Vec2::new(0.5, 0.0), 0.2), 1.0, 0.5).unwrap();
    let f = gaussian_field(cfg.grid, Vec2::new(0.5, 0.0), 0.05, 1.0).unwrap();
    // meets the circle at a grazing angle
    let grazing = Covector::from_components(0.999, 0.0, 0.0, 1.0).unwrap();
    assert!(unitary_ghost(&f, &grazing, &cfg, &c).is_err());
}
