//! Uniform square discretization of the complex plane, plane quadrature,
//! Fourier-multiplier derivatives and the solid Cauchy transform.
//!
//! Nodes are `z_mn = (-L + m h) + i(-L + n h)` for `m, n` in `0..N`, stored
//! row-major in `(m, n)`, with `h = 2L/N`. Every node carries the quadrature
//! weight `h^2`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NvsError, Result};
use crate::fft::{angular_frequency, is_nyquist, Fft2};

/// Lattice sums of `w^-n` over the nonzero Gaussian integers.
const SQUARE_LATTICE_SUMS: [(usize, f64); 2] =
    [(4, 3.151_212_002_153_897_5), (8, 4.255_773_035_365_189_5)];

pub const MIN_GRID_SIZE: usize = 8;

/// Ratio of boundary to interior magnitude above which a field is reported
/// as leaking through the periodic boundary.
pub const LEAKAGE_THRESHOLD: f64 = 1e-6;

/// Largest imaginary part tolerated in a field flagged as real.
pub const REAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: f64,
    size: usize,
}

/// Builds a grid of `size` points per axis covering `[-half_width, half_width)^2`.
pub fn make_grid(half_width: f64, size: usize) -> Result<GridSpec> {
    GridSpec::new(half_width, size)
}

impl GridSpec {
    pub fn new(half_width: f64, size: usize) -> Result<Self> {
        Self::with_min_size(half_width, size, MIN_GRID_SIZE)
    }

    pub(crate) fn with_min_size(half_width: f64, size: usize, min: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(NvsError::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if size % 2 != 0 {
            return Err(NvsError::InvalidGrid(format!("size must be even, got {size}")));
        }
        if size < min {
            return Err(NvsError::InvalidGrid(format!(
                "size must be at least {min}, got {size}"
            )));
        }
        Ok(Self { half_width, size })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.size as f64
    }

    /// Quadrature weight shared by every node.
    pub fn weight(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn len(&self) -> usize {
        self.size * self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn index(&self, m: usize, n: usize) -> usize {
        m * self.size + n
    }

    pub fn node(&self, m: usize, n: usize) -> Complex64 {
        Complex64::new(self.coordinate(m), self.coordinate(n))
    }

    pub fn node_at(&self, idx: usize) -> Complex64 {
        self.node(idx / self.size, idx % self.size)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(move |i| self.node_at(i))
    }

    /// Nodes in the outermost 10% frame, `max(|x1|, |x2|) >= 0.9 L`.
    pub fn in_outer_annulus(&self, idx: usize) -> bool {
        let z = self.node_at(idx);
        z.re.abs().max(z.im.abs()) >= 0.9 * self.half_width - 1e-12
    }

    /// Nodes in the central half box, `max(|x1|, |x2|) <= L/2`.
    pub fn in_interior(&self, idx: usize) -> bool {
        let z = self.node_at(idx);
        z.re.abs().max(z.im.abs()) <= 0.5 * self.half_width + 1e-12
    }

    /// Grid with the same spacing and twice the extent; used for zero-padded
    /// convolutions.
    pub fn padded(&self) -> GridSpec {
        GridSpec {
            half_width: 2.0 * self.half_width,
            size: 2 * self.size,
        }
    }

    /// Embeds `values` into the centre of the padded grid, zero elsewhere.
    pub(crate) fn embed(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.size;
        let p = 2 * n;
        let off = n / 2;
        let mut out = vec![Complex64::default(); p * p];
        for m in 0..n {
            let src = &values[m * n..(m + 1) * n];
            let dst = (m + off) * p + off;
            out[dst..dst + n].copy_from_slice(src);
        }
        out
    }

    /// Inverse of [`GridSpec::embed`]: extracts the central `N x N` block.
    pub(crate) fn restrict(&self, padded: &[Complex64]) -> Vec<Complex64> {
        let n = self.size;
        let p = 2 * n;
        let off = n / 2;
        let mut out = Vec::with_capacity(n * n);
        for m in 0..n {
            let src = (m + off) * p + off;
            out.extend_from_slice(&padded[src..src + n]);
        }
        out
    }
}

/// Derivatives of a smooth field that need not decay at the grid edge,
/// valid on the central half box.
///
/// The field is multiplied by a separable complementary-error-function
/// taper `W` before the Fourier multipliers are applied, and the exact
/// derivatives of `W` are removed with the product rule.
pub(crate) struct TaperedCalculus {
    grid: GridSpec,
    fft: Fft2,
    w: Vec<f64>,
    dz_w: Vec<Complex64>,
    dzbar_w: Vec<Complex64>,
    lap_w: Vec<f64>,
}

impl TaperedCalculus {
    pub(crate) fn new(grid: GridSpec) -> Self {
        let l = grid.half_width();
        let (c, d) = (0.7 * l, 0.09 * l);
        let rsp = 1.0 / PI.sqrt();
        let a = |t: f64| 0.5 * libm::erfc((t.abs() - c) / d);
        let a1 = |t: f64| {
            let s = (t.abs() - c) / d;
            -t.signum() * (-s * s).exp() * rsp / d
        };
        let a2 = |t: f64| {
            let s = (t.abs() - c) / d;
            2.0 * s * (-s * s).exp() * rsp / (d * d)
        };
        let mut w = Vec::with_capacity(grid.len());
        let mut dz_w = Vec::with_capacity(grid.len());
        let mut dzbar_w = Vec::with_capacity(grid.len());
        let mut lap_w = Vec::with_capacity(grid.len());
        for z in grid.nodes() {
            let (x, y) = (z.re, z.im);
            let d1 = a1(x) * a(y);
            let d2 = a(x) * a1(y);
            w.push(a(x) * a(y));
            dz_w.push(0.5 * Complex64::new(d1, -d2));
            dzbar_w.push(0.5 * Complex64::new(d1, d2));
            lap_w.push(a2(x) * a(y) + a(x) * a2(y));
        }
        Self {
            grid,
            fft: Fft2::new(grid.size()),
            w,
            dz_w,
            dzbar_w,
            lap_w,
        }
    }

    fn raw(&self, tapered: &[Complex64], which: Derivative) -> Vec<Complex64> {
        apply_symbol(tapered, self.grid.size(), self.grid.spacing(), &self.fft, |x1, x2, nyq| {
            if nyq && which.zero_at_nyquist() {
                Complex64::default()
            } else {
                which.symbol(x1, x2)
            }
        })
    }

    /// `(dz u, dzbar u, Laplacian u)`; meaningful only on the interior.
    pub(crate) fn derivatives(&self, u: &[Complex64]) -> [Vec<Complex64>; 3] {
        let tapered: Vec<Complex64> = u.iter().zip(&self.w).map(|(v, w)| v * w).collect();
        let dz_t = self.raw(&tapered, Derivative::Dz);
        let dzbar_t = self.raw(&tapered, Derivative::Dzbar);
        let lap_t = self.raw(&tapered, Derivative::Laplacian);
        let n = u.len();
        let mut dz = Vec::with_capacity(n);
        let mut dzbar = Vec::with_capacity(n);
        let mut lap = Vec::with_capacity(n);
        for i in 0..n {
            let w = self.w[i];
            let du = (dz_t[i] - u[i] * self.dz_w[i]) / w;
            let dbu = (dzbar_t[i] - u[i] * self.dzbar_w[i]) / w;
            let cross = 4.0 * (self.dz_w[i] * dbu + self.dzbar_w[i] * du);
            dz.push(du);
            dzbar.push(dbu);
            lap.push((lap_t[i] - cross - u[i] * self.lap_w[i]) / w);
        }
        [dz, dzbar, lap]
    }
}

/// Complex samples on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
    real: bool,
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(NvsError::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid,
            values,
            real: false,
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, Complex64::default())
    }

    pub fn constant(grid: GridSpec, c: Complex64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
            real: c.im == 0.0,
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(f).collect(),
            real: false,
        }
    }

    pub fn from_real_fn(grid: GridSpec, f: impl Fn(Complex64) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(|z| Complex64::new(f(z), 0.0)).collect(),
            real: true,
        }
    }

    pub fn from_real_values(grid: GridSpec, values: &[f64]) -> Result<Self> {
        let field = Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())?;
        Ok(Self {
            real: true,
            ..field
        })
    }

    /// Flags the field as real after checking the imaginary residue; the
    /// imaginary parts are then dropped.
    pub fn into_real(mut self) -> Result<Self> {
        let residue = self.max_imag();
        if residue > REAL_TOLERANCE {
            return Err(NvsError::Precondition(format!(
                "field is not real: imaginary residue {residue:e}"
            )));
        }
        self.values.iter_mut().for_each(|v| v.im = 0.0);
        self.real = true;
        Ok(self)
    }

    /// Drops imaginary parts without checking them.
    pub fn real_part(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| Complex64::new(v.re, 0.0)).collect(),
            real: true,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.values[self.grid.index(m, n)]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            real: false,
        }
    }

    /// Maps with access to the node coordinate.
    pub fn map_with_node(&self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| f(self.grid.node_at(i), v))
                .collect(),
            real: false,
        }
    }

    pub fn zip_with(
        &self,
        other: &ComplexField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        if self.grid != other.grid {
            return Err(NvsError::InvalidGrid("fields live on different grids".into()));
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            real: false,
        })
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
            real: self.real,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let real = self.real && c.im == 0.0;
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| v * c).collect(),
            real,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Quadrature L2 norm, `sqrt(h^2 sum |f|^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.weight() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Largest magnitude over nodes selected by `keep(index)`.
    pub fn sup_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Euclidean norm over nodes selected by `keep(index)`, weighted by `h`.
    pub fn l2_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        (self.grid.weight()
            * self
                .values
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, v)| v.norm_sqr())
                .sum::<f64>())
        .sqrt()
    }
}

impl Add for &ComplexField {
    type Output = ComplexField;
    fn add(self, rhs: &ComplexField) -> ComplexField {
        let mut out = self.zip_with(rhs, |a, b| a + b).expect("grid mismatch in add");
        out.real = self.real && rhs.real;
        out
    }
}

impl Sub for &ComplexField {
    type Output = ComplexField;
    fn sub(self, rhs: &ComplexField) -> ComplexField {
        let mut out = self.zip_with(rhs, |a, b| a - b).expect("grid mismatch in sub");
        out.real = self.real && rhs.real;
        out
    }
}

/// Pointwise product.
impl Mul for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: &ComplexField) -> ComplexField {
        let mut out = self.zip_with(rhs, |a, b| a * b).expect("grid mismatch in mul");
        out.real = self.real && rhs.real;
        out
    }
}

/// Plane integral `h^2 sum f(z_mn)`.
pub fn integrate(f: &ComplexField) -> Complex64 {
    f.values.iter().sum::<Complex64>() * f.grid.weight()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Derivative {
    /// `d/dz = (d/dx1 - i d/dx2) / 2`
    Dz,
    /// `d/dzbar = (d/dx1 + i d/dx2) / 2`
    Dzbar,
    Laplacian,
}

impl Derivative {
    /// Fourier symbol at angular frequency `(xi1, xi2)`.
    pub fn symbol(self, xi1: f64, xi2: f64) -> Complex64 {
        let half_i = Complex64::new(0.0, 0.5);
        match self {
            Derivative::Dz => half_i * Complex64::new(xi1, -xi2),
            Derivative::Dzbar => half_i * Complex64::new(xi1, xi2),
            Derivative::Laplacian => Complex64::new(-(xi1 * xi1 + xi2 * xi2), 0.0),
        }
    }

    fn zero_at_nyquist(self) -> bool {
        !matches!(self, Derivative::Laplacian)
    }
}

/// Ratio of the largest magnitude on the edge nodes to the largest magnitude
/// anywhere. Zero for the zero field.
pub fn boundary_leakage(f: &ComplexField) -> f64 {
    let grid = f.grid;
    let n = grid.size();
    let total = f.sup_norm();
    if total == 0.0 {
        return 0.0;
    }
    let edge = f.sup_where(|i| {
        let (m, k) = (i / n, i % n);
        m == 0 || k == 0 || m == n - 1 || k == n - 1
    });
    edge / total
}

/// Applies a Fourier multiplier on an `n x n` periodic array with spacing `h`.
/// The closure receives `(xi1, xi2, nyquist)` where `nyquist` is set when
/// either axis sits on its Nyquist bin.
pub(crate) fn apply_symbol(
    values: &[Complex64],
    n: usize,
    h: f64,
    fft: &Fft2,
    symbol: impl Fn(f64, f64, bool) -> Complex64,
) -> Vec<Complex64> {
    let mut work = values.to_vec();
    fft.forward(&mut work);
    for p in 0..n {
        let xi1 = angular_frequency(p, n, h);
        for q in 0..n {
            let xi2 = angular_frequency(q, n, h);
            let nyq = is_nyquist(p, n) || is_nyquist(q, n);
            work[p * n + q] *= symbol(xi1, xi2, nyq);
        }
    }
    fft.inverse(&mut work);
    work
}

/// Derivative via discrete Fourier multipliers on the periodic grid.
///
/// First-order symbols vanish on the Nyquist bins. A warning is logged when
/// the field does not decay at the grid edge.
pub fn spectral_derivative(f: &ComplexField, which: Derivative) -> ComplexField {
    let leak = boundary_leakage(f);
    if leak > LEAKAGE_THRESHOLD {
        log::warn!("spectral derivative of a field with boundary leakage {leak:.3e}");
    }
    let grid = f.grid;
    let fft = Fft2::new(grid.size());
    let values = apply_symbol(&f.values, grid.size(), grid.spacing(), &fft, |x1, x2, nyq| {
        if nyq && which.zero_at_nyquist() {
            Complex64::default()
        } else {
            which.symbol(x1, x2)
        }
    });
    let real = f.real && which == Derivative::Laplacian;
    let mut out = ComplexField {
        grid,
        values,
        real: false,
    };
    if real {
        out = out.real_part();
    }
    out
}

/// Solid Cauchy transform `g(z) = (1/pi) \iint f(w) / (z - w) dA(w)`, so that
/// `dg/dzbar = f`.
///
/// The mass of `f` is carried by a Gaussian whose transform is known in
/// closed form. The zero-mass remainder is inverted with the `dzbar` symbol
/// on the zero-padded periodic box, and the additive constant lost with the
/// zero mode is restored from the first moment `\iint conj(w) f(w) dA`.
pub fn cauchy_transform(f: &ComplexField) -> ComplexField {
    let grid = f.grid;
    let l = grid.half_width();
    let s = l / 8.0;
    let mass = integrate(f);

    let gauss = |z: Complex64| (-z.norm_sqr() / (s * s)).exp();
    let remainder: Vec<Complex64> = f
        .values
        .iter()
        .zip(grid.nodes())
        .map(|(&v, z)| v - mass * gauss(z) / (PI * s * s))
        .collect();

    let moment = |f: &dyn Fn(Complex64) -> Complex64| -> Complex64 {
        remainder
            .iter()
            .zip(grid.nodes())
            .map(|(&v, z)| v * f(z))
            .sum::<Complex64>()
            * grid.weight()
    };
    let period = 4.0 * l;
    let offset = -moment(&|z| z.conj()) / (period * period);
    // The periodic kernel is (zeta(z) - pi zbar / A) / pi for the square
    // lattice; the leading terms of zeta(z) - 1/z are removed using the
    // holomorphic moments of the remainder.
    let moments: Vec<Complex64> = (0..8)
        .map(|j| moment(&|z: Complex64| z.powu(j as u32)))
        .collect();
    let lattice = |z: Complex64| -> Complex64 {
        let mut total = Complex64::default();
        for &(order, sum) in &SQUARE_LATTICE_SUMS {
            // (1/pi) G_order / P^order * \iint (z - w)^(order - 1) f0(w) dA(w)
            let p = order - 1;
            let mut poly = Complex64::default();
            let mut binom = 1.0;
            for j in 0..=p {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                poly += sign * binom * z.powu((p - j) as u32) * moments[j];
                binom = binom * (p - j) as f64 / (j + 1) as f64;
            }
            total += sum / (PI * period.powi(order as i32)) * poly;
        }
        total
    };

    let padded = grid.padded();
    let fft = Fft2::new(padded.size());
    let solved = apply_symbol(
        &grid.embed(&remainder),
        padded.size(),
        grid.spacing(),
        &fft,
        |x1, x2, nyq| {
            if nyq || (x1 == 0.0 && x2 == 0.0) {
                Complex64::default()
            } else {
                Complex64::new(1.0, 0.0) / Derivative::Dzbar.symbol(x1, x2)
            }
        },
    );
    let periodic = grid.restrict(&solved);

    let values = periodic
        .iter()
        .zip(grid.nodes())
        .map(|(&g, z)| {
            let carried = if z.norm_sqr() == 0.0 {
                Complex64::default()
            } else {
                mass * (1.0 - gauss(z)) / (PI * z)
            };
            g + offset + lattice(z) + carried
        })
        .collect();
    ComplexField {
        grid,
        values,
        real: false,
    }
}
