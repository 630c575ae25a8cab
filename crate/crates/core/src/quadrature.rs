//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! The integrator works on vector-valued, fallible integrands so that the
//! nested integrals of the analytic engine can share one subdivision and
//! propagate inner failures with `?`. Scalar helpers wrap the vector core.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of bisections applied to any subinterval.
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-4,
            abs_tol: 1e-8,
            max_depth: 12,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_depth: u32) -> Result<Self> {
        let spec = QuadratureSpec {
            rel_tol,
            abs_tol,
            max_depth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol", "must be positive"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid("abs_tol", "must be positive"));
        }
        if self.max_depth < 1 {
            return Err(Error::invalid("max_depth", "must be at least 1"));
        }
        Ok(())
    }

    /// Same depth budget with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        QuadratureSpec {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            max_depth: self.max_depth,
        }
    }
}

// Kronrod abscissae (positive half, descending) and weights; the Gauss
// 7-point rule uses every second abscissa.
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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    lo: f64,
    hi: f64,
    depth: u32,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

struct Kronrod<'a, F> {
    f: &'a mut F,
    dim: usize,
    fv: Vec<f64>,
    samples: Vec<f64>,
}

impl<F> Kronrod<'_, F>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    fn rule(&mut self, lo: f64, hi: f64) -> Result<(Vec<f64>, f64)> {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let dim = self.dim;
        // samples[k * dim + i]: component i at node k; node order is
        // centre, then (-x_j, +x_j) pairs for j = 0..7.
        for k in 0..15 {
            let x = if k == 0 {
                center
            } else {
                let j = (k - 1) / 2;
                if k % 2 == 1 {
                    center - half * XGK[j]
                } else {
                    center + half * XGK[j]
                }
            };
            self.fv.iter_mut().for_each(|v| *v = 0.0);
            (self.f)(x, &mut self.fv)?;
            self.samples[k * dim..(k + 1) * dim].copy_from_slice(&self.fv);
        }

        let mut result = vec![0.0; dim];
        let mut worst = 0.0f64;
        for i in 0..dim {
            let fc = self.samples[i];
            let mut resk = WGK[7] * fc;
            let mut resg = WG[3] * fc;
            let mut resabs = (WGK[7] * fc).abs();
            for j in 0..7 {
                let f1 = self.samples[(2 * j + 1) * dim + i];
                let f2 = self.samples[(2 * j + 2) * dim + i];
                resk += WGK[j] * (f1 + f2);
                resabs += WGK[j] * (f1.abs() + f2.abs());
                if j % 2 == 1 {
                    resg += WG[j / 2] * (f1 + f2);
                }
            }
            let mean = 0.5 * resk;
            let mut resasc = WGK[7] * (fc - mean).abs();
            for j in 0..7 {
                let f1 = self.samples[(2 * j + 1) * dim + i];
                let f2 = self.samples[(2 * j + 2) * dim + i];
                resasc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
            }
            let resk_scaled = resk * half;
            let resabs = resabs * half.abs();
            let resasc = resasc * half.abs();
            let mut err = ((resk - resg) * half).abs();
            if resasc != 0.0 && err != 0.0 {
                err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
            }
            if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
                err = err.max(50.0 * f64::EPSILON * resabs);
            }
            if !resk_scaled.is_finite() || !err.is_finite() {
                return Err(Error::NumericalFailure {
                    estimate: resk_scaled,
                    error_bound: f64::INFINITY,
                });
            }
            result[i] = resk_scaled;
            worst = worst.max(err);
        }
        Ok((result, worst))
    }
}

/// Integrates a `dim`-component integrand over `[lo, hi]`.
///
/// `f(x, out)` writes the integrand components into `out` (zeroed before
/// each call). The error criterion uses the max-norm of the running total.
pub fn integrate_vec<F>(dim: usize, mut f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    if !(lo <= hi) {
        return Err(Error::invalid("quadrature bounds", format!("lo {lo} > hi {hi}")));
    }
    if lo == hi || dim == 0 {
        return Ok(vec![0.0; dim]);
    }
    let mut rule = Kronrod {
        f: &mut f,
        dim,
        fv: vec![0.0; dim],
        samples: vec![0.0; 15 * dim],
    };

    let (value, error) = rule.rule(lo, hi)?;
    let mut heap = BinaryHeap::new();
    let mut settled: Vec<Panel> = Vec::new();
    heap.push(Panel {
        lo,
        hi,
        depth: 0,
        value,
        error,
    });

    loop {
        let mut total = vec![0.0; dim];
        let mut total_err = 0.0;
        for p in heap.iter().chain(settled.iter()) {
            for (t, v) in total.iter_mut().zip(&p.value) {
                *t += v;
            }
            total_err += p.error;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = (spec.rel_tol * scale).max(spec.abs_tol);
        if total_err <= tol {
            return Ok(total);
        }

        let Some(worst) = heap.pop() else {
            return Err(Error::NumericalFailure {
                estimate: total[0],
                error_bound: total_err,
            });
        };
        if worst.depth >= spec.max_depth {
            settled.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        for (a, b) in [(worst.lo, mid), (mid, worst.hi)] {
            let (value, error) = rule.rule(a, b)?;
            heap.push(Panel {
                lo: a,
                hi: b,
                depth: worst.depth + 1,
                value,
                error,
            });
        }
    }
}

pub fn try_integrate<F>(mut f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_vec(
        1,
        |x, out| {
            out[0] = f(x)?;
            Ok(())
        },
        lo,
        hi,
        spec,
    )
    .map(|v| v[0])
}

pub fn integrate<F>(mut f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), lo, hi, spec)
}

/// `\int_lo^inf f`, through `x = lo + scale * t / (1 - t)` on `t in [0, 1)`.
pub fn integrate_to_infinity<F>(mut f: F, lo: f64, scale: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(scale > 0.0) {
        return Err(Error::invalid("scale", "must be positive"));
    }
    integrate(
        |t| {
            let one_minus = 1.0 - t;
            let x = lo + scale * t / one_minus;
            let jac = scale / (one_minus * one_minus);
            let v = f(x) * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        spec,
    )
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let spec = QuadratureSpec::default();
        let v = integrate(|x| x, 0.0, 1.0, &spec).unwrap();
        assert!((v - 0.5).abs() < 1e-10);
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, &spec).unwrap();
        assert!((v - (64.0 / 6.0 - 1.0 / 6.0 - 9.0)).abs() < 1e-10);
    }

    #[test]
    fn sine_over_half_period() {
        let spec = QuadratureSpec {
            rel_tol: 1e-10,
            ..QuadratureSpec::default()
        };
        let v = integrate(f64::sin, 0.0, PI, &spec).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn rayleigh_normalisation_on_half_line() {
        let mu: f64 = 3e-4;
        let spec = QuadratureSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_depth: 20,
        };
        let v = integrate_to_infinity(
            |x| 2.0 * PI * mu * x * (-PI * mu * x * x).exp(),
            0.0,
            1.0 / mu.sqrt(),
            &spec,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn kink_is_resolved() {
        let spec = QuadratureSpec {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_depth: 40,
        };
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &spec).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-9);
    }

    #[test]
    fn depth_cap_reports_failure() {
        let spec = QuadratureSpec {
            rel_tol: 1e-14,
            abs_tol: 1e-300,
            max_depth: 1,
        };
        let err = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &spec).unwrap_err();
        match err {
            Error::NumericalFailure { estimate, error_bound } => {
                assert!(estimate > 1.0 && estimate < 2.1);
                assert!(error_bound > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vector_components_share_subdivision() {
        let spec = QuadratureSpec {
            rel_tol: 1e-10,
            ..QuadratureSpec::default()
        };
        let v = integrate_vec(
            3,
            |x, out| {
                out[0] = 1.0;
                out[1] = x;
                out[2] = x.exp();
                Ok(())
            },
            0.0,
            2.0,
            &spec,
        )
        .unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
        assert!((v[1] - 2.0).abs() < 1e-12);
        assert!((v[2] - (2f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn inner_errors_propagate() {
        let spec = QuadratureSpec::default();
        let r = try_integrate(
            |x| {
                if x > 0.5 {
                    Err(Error::UndefinedConditional)
                } else {
                    Ok(x)
                }
            },
            0.0,
            1.0,
            &spec,
        );
        assert_eq!(r, Err(Error::UndefinedConditional));
    }

    #[test]
    fn gauss_legendre_rules() {
        for n in [1usize, 2, 5, 8, 24] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n}");
            // exact for degree 2n-1
            let deg = 2 * n - 1;
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((approx - exact).abs() < 1e-12, "n={n}");
        }
    }
}
