//! Gauss–Legendre rules and an adaptive Gauss–Kronrod integrator.

use crate::{Error, Result};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the three-term recurrence, started from the
    /// Tricomi approximation of each root.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// 7-point Gauss / 15-point Kronrod abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    let val = resk * h;
    let err = ((resk - resg) * h).abs();
    (val, err)
}

/// Adaptive integration settings.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

/// Result of an adaptive integration: value and error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Adaptive {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    /// Globally adaptive bisection on `[a, b]` split first at `breaks`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, breaks: &[f64]) -> Result<Estimate> {
        if a == b {
            return Ok(Estimate { value: 0.0, error: 0.0 });
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut pts: Vec<f64> = std::iter::once(lo)
            .chain(breaks.iter().copied().filter(|&x| x > lo && x < hi))
            .chain(std::iter::once(hi))
            .collect();
        pts.sort_by(|x, y| x.total_cmp(y));
        pts.dedup();

        // (a, b, value, error)
        let mut work: Vec<(f64, f64, f64, f64)> = pts
            .windows(2)
            .map(|w| {
                let (v, e) = kronrod15(&f, w[0], w[1]);
                (w[0], w[1], v, e)
            })
            .collect();
        loop {
            let total: f64 = work.iter().map(|w| w.2).sum();
            let err: f64 = work.iter().map(|w| w.3).sum();
            let target = self.abs_tol.max(self.rel_tol * total.abs());
            if err <= target {
                return Ok(Estimate {
                    value: sign * total,
                    error: err,
                });
            }
            if work.len() >= self.max_intervals {
                return Err(Error::NonConvergence(err));
            }
            let (idx, _) = work
                .iter()
                .enumerate()
                .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
                .expect("non-empty work list");
            let (a0, b0, _, _) = work.swap_remove(idx);
            let m = 0.5 * (a0 + b0);
            if m <= a0 || m >= b0 {
                // interval exhausted at machine resolution; accept as is
                return Ok(Estimate {
                    value: sign * total,
                    error: err,
                });
            }
            let (v1, e1) = kronrod15(&f, a0, m);
            let (v2, e2) = kronrod15(&f, m, b0);
            work.push((a0, m, v1, e1));
            work.push((m, b0, v2, e2));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(5);
        // degree 9 exact
        let v = gl.integrate(0.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4));
        let exact = 2f64.powi(10) / 10.0 - 3.0 * 2f64.powi(5) / 5.0;
        assert!((v - exact).abs() < 1e-11 * exact.abs());
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_rules_stay_accurate() {
        let gl = GaussLegendre::new(256);
        let v = gl.integrate(0.0, PI, f64::sin);
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_breakpoints_and_sqrt_endpoint() {
        let q = Adaptive::default();
        let step = q
            .integrate(|x| if x < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, &[0.3])
            .unwrap();
        assert!((step.value - 0.3).abs() < 1e-14);
        let s = q.integrate(|x: f64| x.sqrt(), 0.0, 1.0, &[]).unwrap();
        assert!((s.value - 2.0 / 3.0).abs() < 1e-12);
        let rev = q.integrate(|x: f64| x * x, 1.0, 0.0, &[]).unwrap();
        assert!((rev.value + 1.0 / 3.0).abs() < 1e-14);
    }
}
