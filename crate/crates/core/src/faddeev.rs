//! Faddeev solutions `psi = e^{ikz} mu` of `(-Laplacian + v) psi = 0` with
//! `mu -> 1`, computed from the Lippmann-Schwinger equation
//! `mu = 1 + g_k * (v mu)` where `(Laplacian + 4ik d/dzbar) g_k = delta`.
//!
//! The kernel is evaluated in closed form,
//! `g_k(x) = -(1/2pi) e^{-ikx} Re E1(-ikx)`. Away from the origin the
//! convolution weights are plain samples `h^2 g_k`; near it the kernel is
//! cut off smoothly and replaced by its band-limited interpolant.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conductivity::Potential;
use crate::error::{NvsError, Result};
use crate::fft::{angular_frequency, Fft2};
use crate::grid::{ComplexField, GridSpec, TaperedCalculus};
use crate::krylov::{gmres, join, split, GmresSettings};
use crate::quadrature::{log_offset, near_spectrum, Window};
use crate::special::scaled_e1;

pub const DEFAULT_K_MIN: f64 = 0.1;
pub const RESONANCE_THRESHOLD: f64 = 1e-8;
pub const PDE_RESIDUAL_TOLERANCE: f64 = 1e-6;
pub const BOUNDARY_DEVIATION_TOLERANCE: f64 = 1e-2;


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter {
    k: Complex64,
}

impl SpectralParameter {
    pub fn new(k: Complex64) -> Result<Self> {
        Self::with_min(k, DEFAULT_K_MIN)
    }

    pub fn with_min(k: Complex64, k_min: f64) -> Result<Self> {
        let excluded = |reason: String| NvsError::ExcludedSpectralParameter {
            re: k.re,
            im: k.im,
            reason,
        };
        if !(k.re.is_finite() && k.im.is_finite()) {
            return Err(excluded("not finite".into()));
        }
        if k.norm() == 0.0 {
            return Err(excluded("k = 0".into()));
        }
        if k.norm() < k_min {
            return Err(excluded(format!("|k| < k_min = {k_min}")));
        }
        Ok(Self { k })
    }

    pub fn value(&self) -> Complex64 {
        self.k
    }

    /// Largest `|k|` resolved on `grid`: `0.75 xi_max / 2` with `xi_max = pi/h`.
    pub fn max_resolved(grid: GridSpec) -> f64 {
        0.75 * (PI / grid.spacing()) / 2.0
    }

    pub fn check_resolved(&self, grid: GridSpec) -> Result<()> {
        let limit = Self::max_resolved(grid);
        if self.k.norm() > limit {
            return Err(NvsError::ExcludedSpectralParameter {
                re: self.k.re,
                im: self.k.im,
                reason: format!("|k| > {limit:.4} is not resolved by spacing {}", grid.spacing()),
            });
        }
        Ok(())
    }
}

/// Fourier multiplier `-1 / (|xi|^2 + 2k(xi1 + i xi2))` of `g_k`.
pub fn greens_multiplier(xi1: f64, xi2: f64, k: Complex64) -> Complex64 {
    let xc = Complex64::new(xi1, xi2);
    -1.0 / (xc.norm_sqr() + 2.0 * k * xc)
}

/// Smallest `|xi_c (conj(xi_c) + 2k)|` over the half-shifted frequency lattice
/// of the zero-padded grid.
fn resonance_margin(grid: GridSpec, k: Complex64) -> f64 {
    let n = 2 * grid.size();
    let h = grid.spacing();
    let step = 2.0 * PI / (n as f64 * h);
    let mut margin = f64::INFINITY;
    for p in 0..n {
        let xi1 = angular_frequency(p, n, h) + 0.5 * step;
        for q in 0..n {
            let xi2 = angular_frequency(q, n, h) + 0.5 * step;
            let xc = Complex64::new(xi1, xi2);
            margin = margin.min((xc * (xc.conj() + 2.0 * k)).norm());
        }
    }
    margin
}

/// Closed-form `g_k(x)` for `x != 0`.
pub fn greens_kernel(x: Complex64, k: Complex64) -> Complex64 {
    let u = Complex64::new(0.0, -1.0) * k * x;
    let s = scaled_e1(u);
    -(s + Complex64::from_polar(1.0, 2.0 * u.im) * s.conj()) / (4.0 * PI)
}

/// `g_k` sampled at the nodes of `grid`, centred at the origin node
/// `(N/2, N/2)`. The origin carries the quadrature weight per unit area.
pub fn faddeev_greens(grid: GridSpec, k: SpectralParameter) -> Result<ComplexField> {
    let kv = k.value();
    let margin = resonance_margin(grid, kv);
    if margin < RESONANCE_THRESHOLD {
        return Err(NvsError::Resonance {
            re: kv.re,
            im: kv.im,
            symbol: margin,
        });
    }
    let h = grid.spacing();
    let centre = KernelTable::new(grid, k).at(0, 0) / grid.weight();
    Ok(ComplexField::from_fn(grid, |z| {
        if z.norm() < 0.5 * h {
            centre
        } else {
            greens_kernel(z, kv)
        }
    }))
}

/// Quadrature weights for every node offset of a grid, stored periodically
/// on the `2N x 2N` lattice used by the zero-padded convolution.
///
/// Beyond the cutoff radius the weight is `h^2 g_k(offset)`.
/// The windowed part `g_k chi` is replaced by its band-limited interpolant,
/// whose spectrum is integrated with a graded rule.
#[derive(Debug, Clone)]
pub struct KernelTable {
    n: usize,
    values: Vec<Complex64>,
}

impl KernelTable {
    pub fn new(grid: GridSpec, k: SpectralParameter) -> Self {
        let n = grid.size();
        let p = 2 * n;
        let h = grid.spacing();
        let kv = k.value();
        let window = Window::for_spacing(h);
        // The Nyquist bin takes the mean over both signs of its frequency,
        // so the table stays symmetric under x -> -x with k -> -k.
        let mut xi: Vec<f64> = (0..p).map(|j| angular_frequency(j, p, h)).collect();
        xi.push(-xi[n]);
        let wide = near_spectrum(|x| greens_kernel(x, kv), log_offset(kv), h, window, &xi);
        let variants = |j: usize| if j == n { vec![n, p] } else { vec![j] };
        let mut values = vec![Complex64::default(); p * p];
        for a in 0..p {
            for b in 0..p {
                let (va, vb) = (variants(a), variants(b));
                let mut acc = Complex64::default();
                for &i in &va {
                    for &j in &vb {
                        acc += wide[i * (p + 1) + j];
                    }
                }
                values[a * p + b] = acc / (va.len() * vb.len()) as f64;
            }
        }
        Fft2::new(p).inverse(&mut values);
        let signed = |j: usize| if j < n { j as f64 } else { j as f64 - p as f64 };
        let w = grid.weight();
        for a in 0..p {
            for b in 0..p {
                if a == 0 && b == 0 {
                    continue;
                }
                let x = Complex64::new(signed(a) * h, signed(b) * h);
                let outer = 1.0 - window.eval(x.norm());
                if outer > 0.0 {
                    values[a * p + b] += greens_kernel(x, kv) * (w * outer);
                }
            }
        }
        Self { n, values }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Table for `-k`, using `g_{-k}(x) = g_k(-x)`.
    pub fn reflected(&self) -> Self {
        let p = 2 * self.n;
        let mut values = vec![Complex64::default(); p * p];
        for a in 0..p {
            for b in 0..p {
                values[((p - a) % p) * p + (p - b) % p] = self.values[a * p + b];
            }
        }
        Self { n: self.n, values }
    }

    /// Weight for the node offset `(dp, dq)`, `|dp|, |dq| < N`.
    pub fn at(&self, dp: i64, dq: i64) -> Complex64 {
        let p = 2 * self.n as i64;
        self.values[(dp.rem_euclid(p) * p + dq.rem_euclid(p)) as usize]
    }
}

/// Discrete convolution with `g_k` by zero-padded FFT.
pub struct GreensOperator {
    n: usize,
    fft: Fft2,
    kernel_hat: Vec<Complex64>,
}

impl GreensOperator {
    pub fn new(table: &KernelTable) -> Self {
        let n = table.size();
        let fft = Fft2::new(2 * n);
        let mut kernel = table.values.clone();
        fft.forward(&mut kernel);
        Self {
            n,
            fft,
            kernel_hat: kernel,
        }
    }

    /// `(g_k * f)(z_j) = sum_l w(z_j - z_l) f(z_l)`.
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let p = 2 * n;
        let mut work = vec![Complex64::default(); p * p];
        for m in 0..n {
            work[m * p..m * p + n].copy_from_slice(&f[m * n..(m + 1) * n]);
        }
        self.fft.forward(&mut work);
        work.iter_mut().zip(&self.kernel_hat).for_each(|(a, b)| *a *= b);
        self.fft.inverse(&mut work);
        let mut out = Vec::with_capacity(n * n);
        for m in 0..n {
            out.extend_from_slice(&work[m * p..m * p + n]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Dense,
    Iterative,
}

impl std::str::FromStr for SolveMethod {
    type Err = NvsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Self::Dense),
            "iterative" => Ok(Self::Iterative),
            other => Err(NvsError::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub method: SolveMethod,
    pub gmres: GmresSettings,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            method: SolveMethod::Iterative,
            gmres: GmresSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `|(Laplacian + 4ik d/dzbar) mu - v mu| / |v mu|` on the interior.
    pub pde_residual: f64,
    /// `max |mu - 1|` on the outer annulus.
    pub boundary_deviation: f64,
    pub solver_iterations: usize,
    /// Relative residual of the linear system.
    pub solver_residual: f64,
}

#[derive(Debug, Clone)]
pub struct FaddeevField {
    pub k: SpectralParameter,
    pub mu: ComplexField,
    pub diagnostics: Diagnostics,
    /// Fingerprint of the potential the field was solved for.
    pub potential: String,
}

impl FaddeevField {
    pub fn is_accepted(&self) -> bool {
        self.diagnostics.pde_residual <= PDE_RESIDUAL_TOLERANCE
            && self.diagnostics.boundary_deviation <= BOUNDARY_DEVIATION_TOLERANCE
    }
}

pub fn solve_mu(p: &Potential, k: SpectralParameter, method: SolveMethod) -> Result<FaddeevField> {
    solve_mu_with(
        p,
        k,
        &SolverSettings {
            method,
            ..Default::default()
        },
    )
}

pub fn solve_mu_with(p: &Potential, k: SpectralParameter, settings: &SolverSettings) -> Result<FaddeevField> {
    k.check_resolved(p.grid())?;
    let table = match settings.method {
        SolveMethod::Iterative if !p.is_zero() => Some(KernelTable::new(p.grid(), k)),
        _ => None,
    };
    solve_checked(p, k, settings, table.as_ref())
}

/// As [`solve_mu_with`], reusing a kernel table built for the same grid and
/// `k` (for instance the reflection of the table at `-k`).
pub fn solve_mu_with_table(
    p: &Potential,
    k: SpectralParameter,
    table: &KernelTable,
    settings: &SolverSettings,
) -> Result<FaddeevField> {
    k.check_resolved(p.grid())?;
    if table.size() != p.grid().size() {
        return Err(NvsError::Precondition(format!(
            "kernel table for N = {} used on N = {}",
            table.size(),
            p.grid().size()
        )));
    }
    solve_checked(p, k, settings, Some(table))
}

fn solve_checked(
    p: &Potential,
    k: SpectralParameter,
    settings: &SolverSettings,
    table: Option<&KernelTable>,
) -> Result<FaddeevField> {
    let grid = p.grid();
    let v = p.values();
    let (mu, iterations, solver_residual) = if p.is_zero() {
        (ComplexField::constant(grid, 1.0.into()), 0, 0.0)
    } else {
        match (settings.method, table) {
            (SolveMethod::Dense, _) => (crate::oracle::dense_mu(p, k)?, 1, 0.0),
            (SolveMethod::Iterative, table) => {
                let owned;
                let table = match table {
                    Some(t) => t,
                    None => {
                        owned = KernelTable::new(grid, k);
                        &owned
                    }
                };
                let op = GreensOperator::new(table);
                let vals = v.values();
                let apply = |x: &[f64], out: &mut [f64]| {
                    let xs = join(x);
                    let vx: Vec<Complex64> = xs.iter().zip(vals).map(|(a, b)| a * b).collect();
                    let gvx = op.apply(&vx);
                    let y: Vec<Complex64> = xs.iter().zip(&gvx).map(|(a, b)| a - b).collect();
                    out.copy_from_slice(&split(&y));
                };
                let rhs = split(&vec![Complex64::new(1.0, 0.0); grid.len()]);
                let outcome = gmres(apply, &rhs, &settings.gmres)?;
                let mu = ComplexField::new(grid, join(&outcome.x))?;
                (mu, outcome.iterations, outcome.residual)
            }
        }
    };
    let diagnostics = Diagnostics {
        pde_residual: pde_residual(p, k, &mu),
        boundary_deviation: (&mu - &ComplexField::constant(grid, 1.0.into()))
            .sup_where(|i| grid.in_outer_annulus(i)),
        solver_iterations: iterations,
        solver_residual,
    };
    Ok(FaddeevField {
        k,
        mu,
        diagnostics,
        potential: p.fingerprint(),
    })
}

/// Pointwise `(Laplacian + 4ik d/dzbar) mu - v mu` on the grid; meaningful on
/// the interior only.
pub fn pde_defect(p: &Potential, k: SpectralParameter, mu: &ComplexField) -> Vec<Complex64> {
    let grid = mu.grid();
    let u: Vec<Complex64> = mu.values().iter().map(|m| m - 1.0).collect();
    let [_, dzbar, lap] = TaperedCalculus::new(grid).derivatives(&u);
    let four_ik = Complex64::new(0.0, 4.0) * k.value();
    (0..grid.len())
        .map(|i| lap[i] + four_ik * dzbar[i] - p.values().values()[i] * mu.values()[i])
        .collect()
}

/// Relative interior residual of `(Laplacian + 4ik d/dzbar) mu = v mu`.
pub fn pde_residual(p: &Potential, k: SpectralParameter, mu: &ComplexField) -> f64 {
    let grid = mu.grid();
    let defect = pde_defect(p, k, mu);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.len() {
        if grid.in_interior(i) {
            num += defect[i].norm_sqr();
            den += (p.values().values()[i] * mu.values()[i]).norm_sqr();
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// `psi(z) = e^{ikz} mu(z)`.
pub fn psi_from_mu(f: &FaddeevField) -> ComplexField {
    let k = f.k.value();
    f.mu
        .map_with_node(|z, m| (Complex64::new(0.0, 1.0) * k * z).exp() * m)
}

/// Relative interior residual of `(-Laplacian + v) psi = 0`, using
/// `(-Laplacian + v)(e^{ikz} mu) = -e^{ikz} ((Laplacian + 4ik d/dzbar) mu - v mu)`.
pub fn psi_residual(p: &Potential, f: &FaddeevField) -> f64 {
    let grid = f.mu.grid();
    let k = f.k.value();
    let defect = pde_defect(p, f.k, &f.mu);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.len() {
        if grid.in_interior(i) {
            let e = (Complex64::new(0.0, 1.0) * k * grid.node_at(i)).exp().norm_sqr();
            num += e * defect[i].norm_sqr();
            den += e * (p.values().values()[i] * f.mu.values()[i]).norm_sqr();
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LargeKDecay {
    /// `(|k|, sup |mu - 1|)` in input order.
    pub entries: Vec<(f64, f64)>,
    /// Least-squares slope of `log sup|mu - 1|` against `log |k|`; `None`
    /// when any entry vanishes.
    pub exponent: Option<f64>,
}

/// Sup-norm of `mu - 1` along a sequence of spectral parameters.
pub fn mu_large_k_decay(p: &Potential, ks: &[Complex64]) -> Result<LargeKDecay> {
    let grid = p.grid();
    let mut entries = Vec::with_capacity(ks.len());
    for &k in ks {
        let f = solve_mu(p, SpectralParameter::new(k)?, SolveMethod::Iterative)?;
        let dev = (&f.mu - &ComplexField::constant(grid, 1.0.into())).sup_norm();
        entries.push((k.norm(), dev));
    }
    let exponent = if entries.len() >= 2 && entries.iter().all(|e| e.1 > 0.0) {
        let pts: Vec<(f64, f64)> = entries.iter().map(|(a, b)| (a.ln(), b.ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    Ok(LargeKDecay { entries, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductivity::{bump_gamma, potential_from_gamma};
    use crate::grid::make_grid;

    fn bump(n: usize, amplitude: f64) -> Potential {
        let g = make_grid(8.0, n).unwrap();
        potential_from_gamma(&bump_gamma(g, amplitude, 1.0, Complex64::default()).unwrap()).unwrap()
    }

    fn kp(re: f64, im: f64) -> SpectralParameter {
        SpectralParameter::new(Complex64::new(re, im)).unwrap()
    }

    #[test]
    fn multiplier_value() {
        let m = greens_multiplier(1.0, 0.0, Complex64::new(1.0, 0.0));
        assert!((m - Complex64::new(-1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn multiplier_conjugate_symmetry() {
        let k = Complex64::new(0.7, -0.4);
        for &(a, b) in &[(0.3, 1.1), (-2.0, 0.5), (1.5, -0.25)] {
            let m = greens_multiplier(a, b, k);
            assert!((m.conj() - greens_multiplier(a, -b, k.conj())).norm() < 1e-15);
            assert!((m - greens_multiplier(-a, -b, -k)).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_excluded_parameters() {
        assert!(SpectralParameter::new(Complex64::default()).is_err());
        assert!(SpectralParameter::new(Complex64::new(0.05, 0.0)).is_err());
        let g = make_grid(8.0, 64).unwrap();
        assert!(kp(5.0, 0.0).check_resolved(g).is_err());
        assert!(kp(2.0, 2.0).check_resolved(g).is_ok());
    }

    #[test]
    fn kernel_solves_faddeev_operator() {
        // Apply (Laplacian + 4ik d/dzbar) to g_k by finite differences away from 0.
        let k = Complex64::new(0.6, -0.8);
        let d = 1e-3;
        for &x in &[Complex64::new(0.7, 0.2), Complex64::new(-1.5, 2.0), Complex64::new(3.0, -0.4)] {
            let g = |z| greens_kernel(z, k);
            let dx = Complex64::new(d, 0.0);
            let dy = Complex64::new(0.0, d);
            let lap = (g(x + dx) + g(x - dx) + g(x + dy) + g(x - dy) - 4.0 * g(x)) / (d * d);
            let gx = (g(x + dx) - g(x - dx)) / (2.0 * d);
            let gy = (g(x + dy) - g(x - dy)) / (2.0 * d);
            let dzbar = 0.5 * (gx + Complex64::new(0.0, 1.0) * gy);
            let r = lap + Complex64::new(0.0, 4.0) * k * dzbar;
            assert!(r.norm() < 1e-5 * g(x).norm().max(1.0), "x = {x}: {r}");
        }
    }

    #[test]
    fn kernel_log_singularity() {
        let k = Complex64::new(1.3, 0.4);
        let x = Complex64::new(1e-7, 2e-7);
        let g = greens_kernel(x, k);
        let limit = (0.577_215_664_901_532_9 + k.norm().ln()) / (2.0 * PI);
        assert!((g - x.norm().ln() / (2.0 * PI) - limit).norm() < 1e-6);
    }

    #[test]
    fn kernel_scaling() {
        let k = Complex64::new(-0.3, 0.9);
        let x = Complex64::new(0.8, -1.7);
        let one = Complex64::new(1.0, 0.0);
        assert!((greens_kernel(x, k) - greens_kernel(k * x, one)).norm() < 1e-13);
    }

    #[test]
    fn zero_potential_gives_unit_mu() {
        let g = make_grid(8.0, 32).unwrap();
        for method in [SolveMethod::Iterative, SolveMethod::Dense] {
            let f = solve_mu(&Potential::zero(g), kp(0.5, 0.3), method).unwrap();
            assert!(f.mu.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
            let psi = psi_from_mu(&f);
            for (i, v) in psi.values().iter().enumerate() {
                let z = g.node_at(i);
                assert!((v - (Complex64::new(0.0, 1.0) * Complex64::new(0.5, 0.3) * z).exp()).norm() == 0.0);
            }
        }
    }

    #[test]
    fn psi_modulus_identity() {
        let p = bump(32, 1.0);
        let f = solve_mu(&p, kp(0.4, -0.9), SolveMethod::Iterative).unwrap();
        let psi = psi_from_mu(&f);
        let k = f.k.value();
        for (i, v) in psi.values().iter().enumerate() {
            let z = p.grid().node_at(i);
            let expected = f.mu.values()[i].norm() * (-(k.im * z.re + k.re * z.im)).exp();
            assert!((v.norm() - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn reference_value_at_origin() {
        // Converged value of mu(0) for the reference bump at k = 0.5 + 0.3i,
        // obtained by refining the grid with this solver (N = 64 .. 256).
        let p = bump(64, 1.0);
        let f = solve_mu(&p, kp(0.5, 0.3), SolveMethod::Iterative).unwrap();
        let n = p.grid().size();
        let mu0 = f.mu.get(n / 2, n / 2);
        assert!((mu0.re - 1.2598198).abs() < 2e-5, "mu(0) = {mu0}");
        assert!(f.diagnostics.solver_residual <= 1e-10);
    }

    #[test]
    fn iterative_matches_dense() {
        let p = bump(32, 1.0);
        for k in [kp(0.5, 0.3), kp(-1.2, 0.7), kp(0.2, -1.9)] {
            let a = solve_mu(&p, k, SolveMethod::Iterative).unwrap();
            let b = solve_mu(&p, k, SolveMethod::Dense).unwrap();
            assert!((&a.mu - &b.mu).sup_norm() <= 1e-8);
        }
    }

    #[test]
    fn born_regime() {
        // The second-order share scales like |G_k v|, which grows as |k| -> 0;
        // at this amplitude it is below 1e-3 for |k| >= 1.5.
        let p = bump(64, 0.01);
        for k in [kp(2.0, 0.0), kp(1.2, 0.9), kp(-0.5, 2.5)] {
            let f = solve_mu(&p, k, SolveMethod::Iterative).unwrap();
            let op = GreensOperator::new(&KernelTable::new(p.grid(), k));
            let gv = ComplexField::new(p.grid(), op.apply(p.values().values())).unwrap();
            let born = &ComplexField::constant(p.grid(), 1.0.into()) + &gv;
            assert!((&f.mu - &born).l2_norm() <= 1e-3 * gv.l2_norm());
        }
    }

    #[test]
    fn pde_residual_at_reference_resolution() {
        let p = bump(64, 1.0);
        for k in [kp(0.8, 0.3), kp(0.1, 0.1), kp(2.0, 1.0), kp(-1.875, 1.875)] {
            let f = solve_mu(&p, k, SolveMethod::Iterative).unwrap();
            assert!(f.diagnostics.pde_residual <= PDE_RESIDUAL_TOLERANCE, "{}", f.diagnostics.pde_residual);
        }
    }

    #[test]
    fn reflected_table_matches_negated_parameter() {
        let g = make_grid(8.0, 16).unwrap();
        let a = KernelTable::new(g, kp(0.7, -0.4)).reflected();
        let b = KernelTable::new(g, kp(-0.7, 0.4));
        for dp in -15..16 {
            for dq in -15..16 {
                assert!((a.at(dp, dq) - b.at(dp, dq)).norm() <= 1e-13 * b.at(0, 0).norm());
            }
        }
    }

    #[test]
    fn greens_field_centre_and_resonance_margin() {
        let g = make_grid(8.0, 16).unwrap();
        let k = kp(1.0, 0.0);
        let f = faddeev_greens(g, k).unwrap();
        assert_eq!(f.get(8, 8), KernelTable::new(g, k).at(0, 0) / g.weight());
        assert!((f.get(9, 8) - greens_kernel(Complex64::new(1.0, 0.0), k.value())).norm() < 1e-15);
        assert!(resonance_margin(g, k.value()) > RESONANCE_THRESHOLD);
    }
}
