//! Spectrum of the near part of the Faddeev kernel.
//!
//! The kernel is split as `g = g chi + g (1 - chi)` with a smooth radial
//! cutoff `chi`. The far part is sampled directly; the near part carries the
//! logarithmic singularity and is integrated against plane waves with a
//! tensor Gauss-Legendre rule that is graded towards the origin.

use std::f64::consts::PI;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Cutoff radii in units of the grid spacing.
const WINDOW_INNER: f64 = 2.0;
const WINDOW_HALF_WIDTH: f64 = 6.0;
const WINDOW_BETA: f64 = 24.0;

const RULE_ORDER: usize = 8;
const GRADING_LEVELS: i32 = 10;
const CDF_NODES: usize = 4096;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(RULE_ORDER.try_into().expect("nonzero order"))
            .iter()
            .map(|(x, w)| (*x, *w))
            .collect()
    })
}

fn es(t: f64) -> f64 {
    (WINDOW_BETA * ((1.0 - t * t).max(0.0).sqrt() - 1.0)).exp()
}

/// Normalized CDF of the exponential-of-semicircle bump on `[-1, 1]`,
/// tabulated with its density for cubic Hermite interpolation.
struct Cdf {
    step: f64,
    value: Vec<f64>,
    density: Vec<f64>,
}

impl Cdf {
    fn get() -> &'static Cdf {
        static CDF: OnceLock<Cdf> = OnceLock::new();
        CDF.get_or_init(|| {
            let step = 2.0 / CDF_NODES as f64;
            let mut value = vec![0.0; CDF_NODES + 1];
            for i in 0..CDF_NODES {
                let a = -1.0 + i as f64 * step;
                let piece: f64 = rule()
                    .iter()
                    .map(|(x, w)| w * es(a + 0.5 * step * (x + 1.0)))
                    .sum();
                value[i + 1] = value[i] + 0.5 * step * piece;
            }
            let total = value[CDF_NODES];
            value.iter_mut().for_each(|v| *v /= total);
            let density = (0..=CDF_NODES)
                .map(|i| es(-1.0 + i as f64 * step) / total)
                .collect();
            Cdf {
                step,
                value,
                density,
            }
        })
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= -1.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let u = (s + 1.0) / self.step;
        let i = (u.floor() as usize).min(CDF_NODES - 1);
        let t = u - i as f64;
        let (y0, y1) = (self.value[i], self.value[i + 1]);
        let (d0, d1) = (self.density[i] * self.step, self.density[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1
    }
}

/// Radial cutoff: 1 inside `inner`, 0 beyond `inner + 2 half_width`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window {
    inner: f64,
    half_width: f64,
}

impl Window {
    pub(crate) fn for_spacing(h: f64) -> Self {
        Self {
            inner: WINDOW_INNER * h,
            half_width: WINDOW_HALF_WIDTH * h,
        }
    }

    pub(crate) fn radius(&self) -> f64 {
        self.inner + 2.0 * self.half_width
    }

    pub(crate) fn eval(&self, r: f64) -> f64 {
        if r <= self.inner {
            1.0
        } else if r >= self.radius() {
            0.0
        } else {
            1.0 - Cdf::get().eval((r - self.inner - self.half_width) / self.half_width)
        }
    }
}

/// Tensor rule nodes and weights over consecutive intervals.
fn tensor(edges: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut y = Vec::new();
    let mut w = Vec::new();
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (x, wx) in rule() {
            y.push(0.5 * (b - a) * x + 0.5 * (b + a));
            w.push(0.5 * (b - a) * wx);
        }
    }
    (y, w)
}

/// Adds `sum_{a,b} f(y_a, y_b) e^{-i (xi_p y_a + xi_q y_b)}` into `out`
/// (row-major `xi.len()^2`), using real matrix products.
fn accumulate_transform(y: &[f64], f: &DMatrix<Complex64>, xi: &[f64], out: &mut [Complex64]) {
    let ny = y.len();
    let np = xi.len();
    let c = DMatrix::from_fn(ny, np, |a, q| (xi[q] * y[a]).cos());
    let s = DMatrix::from_fn(ny, np, |a, q| (xi[q] * y[a]).sin());
    let fr = f.map(|v| v.re);
    let fi = f.map(|v| v.im);
    // T = F E with E = C - iS.
    let tr = &fr * &c + &fi * &s;
    let ti = &fi * &c - &fr * &s;
    // E^T T
    let ct = c.transpose();
    let st = s.transpose();
    let gr = &ct * &tr + &st * &ti;
    let gi = &ct * &ti - &st * &tr;
    for p in 0..np {
        for q in 0..np {
            out[p * np + q] += Complex64::new(gr[(p, q)], gi[(p, q)]);
        }
    }
}

/// `int g(y) chi(|y|) e^{-i xi . y} dy` at `(xi[p], xi[q])`, row-major.
///
/// `kernel` must be the closed-form kernel for `y != 0` and `log_offset`
/// its constant part at the origin, `g(y) ~ (log|y| + log_offset) / 2pi`.
pub(crate) fn near_spectrum(
    kernel: impl Fn(Complex64) -> Complex64,
    log_offset: f64,
    h: f64,
    window: Window,
    xi: &[f64],
) -> Vec<Complex64> {
    let np = xi.len();
    let mut out = vec![Complex64::default(); np * np];
    let cells = (window.radius() / h).ceil() as i64;
    let uniform: Vec<f64> = (-cells..=cells).map(|j| j as f64 * h).collect();

    let mut levels = vec![h];
    for _ in 0..GRADING_LEVELS {
        levels.push(levels.last().unwrap() * 0.5);
    }
    let s_min = *levels.last().unwrap();
    let mut graded: Vec<f64> = levels.iter().map(|s| -s).collect();
    graded.push(0.0);
    graded.extend(levels.iter().rev());

    let mut sample = |edges: &[f64], hole: f64| {
        let (y, w) = tensor(edges);
        let f = DMatrix::from_fn(y.len(), y.len(), |a, b| {
            if y[a].abs() < hole && y[b].abs() < hole {
                return Complex64::default();
            }
            let x = Complex64::new(y[a], y[b]);
            let chi = window.eval(x.norm());
            if chi == 0.0 {
                return Complex64::default();
            }
            kernel(x) * (chi * w[a] * w[b])
        });
        accumulate_transform(&y, &f, xi, &mut out);
    };
    sample(&uniform, h);
    sample(&graded, s_min);

    // Central square of half-side s_min, where the kernel is its log limit.
    let s2 = s_min * s_min;
    let centre = 4.0 * s2 * s_min.ln()
        + 2.0 * s2 * (2f64.ln() - 3.0 + 0.5 * PI)
        + 4.0 * s2 * log_offset;
    let centre = Complex64::new(centre / (2.0 * PI), 0.0);
    out.iter_mut().for_each(|v| *v += centre);
    out
}

/// Constant part of the kernel's logarithmic limit at the origin.
pub(crate) fn log_offset(k: Complex64) -> f64 {
    EULER_GAMMA + k.norm().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_endpoints_and_symmetry() {
        let cdf = Cdf::get();
        assert_eq!(cdf.eval(-1.0), 0.0);
        assert_eq!(cdf.eval(1.0), 1.0);
        assert!((cdf.eval(0.0) - 0.5).abs() < 1e-13);
        for s in [0.1, 0.37, 0.8] {
            assert!((cdf.eval(s) + cdf.eval(-s) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn window_is_monotone_with_compact_support() {
        let w = Window::for_spacing(0.25);
        assert_eq!(w.eval(0.0), 1.0);
        assert_eq!(w.eval(w.radius()), 0.0);
        let mut prev = 1.0;
        for i in 0..200 {
            let v = w.eval(i as f64 * w.radius() / 200.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn log_kernel_integral_matches_radial_rule() {
        // Radially symmetric integrand: compare with a 1-D rule in r, exact
        // on the inner disc where the window is 1.
        let h = 0.25;
        let w = Window::for_spacing(h);
        let c = 0.3;
        let f = |r: f64| r * (r.ln() + c);
        let got = near_spectrum(|x| Complex64::new((x.norm().ln() + c) / (2.0 * PI), 0.0), c, h, w, &[0.0]);
        let r0 = w.inner;
        let mut want = 0.5 * r0 * r0 * r0.ln() - 0.25 * r0 * r0 + 0.5 * c * r0 * r0;
        let rule = GaussLegendre::new(64.try_into().unwrap());
        want += rule.integrate(r0, w.radius(), |r| f(r) * w.eval(r));
        assert!((got[0].re - want).abs() < 1e-9 * want.abs().max(1.0), "{} vs {want}", got[0].re);
        assert!(got[0].im.abs() < 1e-12);
    }
}
