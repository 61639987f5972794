//! Brute-force reference implementations for the test suite.
//!
//! Nothing here uses the FFT convolution or the Krylov solver. The only
//! shared piece is [`KernelTable`], which defines the discrete operator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::conductivity::Potential;
use crate::error::{NvsError, Result};
use crate::faddeev::{solve_mu_with, KernelTable, SolverSettings, SpectralParameter};
use crate::grid::ComplexField;
use crate::scattering::ScatteringData;

pub const DENSE_MAX_SIZE: usize = 32;
pub const BORN_MAX_SIZE: usize = 128;

/// Solves `mu = 1 + g_k * (v mu)` by LU on the explicitly assembled matrix.
pub fn dense_mu(p: &Potential, k: SpectralParameter) -> Result<ComplexField> {
    let grid = p.grid();
    let n = grid.size();
    if n > DENSE_MAX_SIZE {
        return Err(NvsError::SizeGuard(format!(
            "dense solve needs N <= {DENSE_MAX_SIZE}, got {n}"
        )));
    }
    let table = KernelTable::new(grid, k);
    let v = p.values().values();
    let len = n * n;
    let mut a = DMatrix::<Complex64>::zeros(len, len);
    for j in 0..len {
        let (jm, jn) = ((j / n) as i64, (j % n) as i64);
        for l in 0..len {
            let (lm, ln) = ((l / n) as i64, (l % n) as i64);
            let mut entry = -table.at(jm - lm, jn - ln) * v[l];
            if j == l {
                entry += 1.0;
            }
            a[(j, l)] = entry;
        }
    }
    let rhs = DVector::<Complex64>::from_element(len, Complex64::new(1.0, 0.0));
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| NvsError::Precondition("dense Lippmann-Schwinger matrix is singular".into()))?;
    ComplexField::new(grid, sol.iter().copied().collect())
}

/// Direct double-loop convolution with the kernel table.
fn convolve(table: &KernelTable, f: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); n * n];
    for jm in 0..n {
        for jn in 0..n {
            let mut acc = Complex64::default();
            for lm in 0..n {
                for ln in 0..n {
                    let val = f[lm * n + ln];
                    if val != Complex64::default() {
                        acc += table.at(jm as i64 - lm as i64, jn as i64 - ln as i64) * val;
                    }
                }
            }
            out[jm * n + jn] = acc;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct BornSeries {
    pub sum: ComplexField,
    /// `|term_j| / |term_{j-1}|` for `j = 1..=orders` (sup norms).
    pub ratios: Vec<f64>,
}

/// Partial Neumann sum `sum_{j <= orders} (G_k diag v)^j 1`.
pub fn born_series(p: &Potential, k: SpectralParameter, orders: usize) -> Result<BornSeries> {
    let grid = p.grid();
    let n = grid.size();
    if n > BORN_MAX_SIZE {
        return Err(NvsError::SizeGuard(format!(
            "Born series needs N <= {BORN_MAX_SIZE}, got {n}"
        )));
    }
    let v = p.values().values();
    let mut term = vec![Complex64::new(1.0, 0.0); n * n];
    let mut sum = term.clone();
    let mut ratios = Vec::with_capacity(orders);
    if orders > 0 && !p.is_zero() {
        let table = KernelTable::new(grid, k);
        for order in 1..=orders {
            let prev = term.iter().map(|t| t.norm()).fold(0.0, f64::max);
            let vt: Vec<Complex64> = term.iter().zip(v).map(|(a, b)| a * b).collect();
            term = convolve(&table, &vt, n);
            let next = term.iter().map(|t| t.norm()).fold(0.0, f64::max);
            let ratio = if prev == 0.0 { 0.0 } else { next / prev };
            if ratio >= 0.5 {
                return Err(NvsError::Divergence { order, ratio });
            }
            ratios.push(ratio);
            sum.iter_mut().zip(&term).for_each(|(s, t)| *s += t);
        }
    } else {
        ratios.resize(orders, 0.0);
    }
    Ok(BornSeries {
        sum: ComplexField::new(grid, sum)?,
        ratios,
    })
}

/// `b(k) = h^2 sum_y e^{i(ky + conj(k y))} v(y) mu(y)` by a plain double loop.
pub fn brute_b(p: &Potential, mu: &ComplexField, k: Complex64) -> Complex64 {
    let grid = p.grid();
    let n = grid.size();
    let h = grid.spacing();
    let l = grid.half_width();
    let mut total = Complex64::default();
    for m in 0..n {
        for q in 0..n {
            let y = Complex64::new(-l + m as f64 * h, -l + q as f64 * h);
            let ky = k * y;
            let phase = Complex64::new(0.0, 1.0) * (ky + ky.conj());
            let idx = m * n + q;
            total += phase.exp() * p.values().values()[idx] * mu.values()[idx];
        }
    }
    total * (h * h)
}

/// Right-hand side of the d-bar equation written out directly.
fn rhs(b: Complex64, k: Complex64, z: Complex64, mu: Complex64) -> Complex64 {
    let kz = k * z;
    let phase = (-Complex64::i() * (kz + kz.conj())).exp();
    phase * b * mu.conj() / (4.0 * std::f64::consts::PI * k.conj())
}

fn relative(worst: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Central differences of `mu(z, .)` across neighbouring k-nodes against the
/// d-bar right-hand side: `max |FD - rhs| / max |rhs|` over interior nodes.
pub fn fd_dbar_residual(mu_on_kgrid: &[Complex64], s: &ScatteringData, z: Complex64) -> f64 {
    let kg = s.kgrid();
    let m = kg.size();
    let dk = kg.spacing();
    let b = s.values();
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for p in 1..m - 1 {
        for q in 1..m - 1 {
            let at = |pp: usize, qq: usize| mu_on_kgrid[pp * m + qq];
            let d_re = (at(p + 1, q) - at(p - 1, q)) / (2.0 * dk);
            let d_im = (at(p, q + 1) - at(p, q - 1)) / (2.0 * dk);
            let fd = 0.5 * (d_re + Complex64::i() * d_im);
            let r = rhs(b[p * m + q], kg.node(p, q), z, at(p, q));
            worst = worst.max((fd - r).norm());
            scale = scale.max(r.norm());
        }
    }
    relative(worst, scale)
}

/// Same measure with a local stencil `k +- delta`, `k +- i delta` of fresh
/// forward solves around every interior k-node of `s`. Returns one value per
/// entry of `z_nodes` (flat z-grid indices).
pub fn fd_dbar_residual_local(
    p: &Potential,
    s: &ScatteringData,
    z_nodes: &[usize],
    delta: f64,
    settings: &SolverSettings,
) -> Result<Vec<f64>> {
    let kg = s.kgrid();
    let m = kg.size();
    let b = s.values();
    let grid = p.grid();
    let solve = |k: Complex64| -> Result<Vec<Complex64>> {
        let f = solve_mu_with(p, SpectralParameter::with_min(k, kg.k_min().min(delta))?, settings)?;
        Ok(z_nodes.iter().map(|&i| f.mu.values()[i]).collect())
    };
    let mut worst = vec![0.0f64; z_nodes.len()];
    let mut scale = vec![0.0f64; z_nodes.len()];
    for pp in 1..m - 1 {
        for q in 1..m - 1 {
            let k = kg.node(pp, q);
            let centre = solve(k)?;
            let east = solve(k + delta)?;
            let west = solve(k - delta)?;
            let north = solve(k + Complex64::new(0.0, delta))?;
            let south = solve(k - Complex64::new(0.0, delta))?;
            for j in 0..z_nodes.len() {
                let d_re = (east[j] - west[j]) / (2.0 * delta);
                let d_im = (north[j] - south[j]) / (2.0 * delta);
                let fd = 0.5 * (d_re + Complex64::i() * d_im);
                let r = rhs(b[pp * m + q], k, grid.node_at(z_nodes[j]), centre[j]);
                worst[j] = worst[j].max((fd - r).norm());
                scale[j] = scale[j].max(r.norm());
            }
        }
    }
    Ok(worst.into_iter().zip(scale).map(|(w, s)| relative(w, s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductivity::{bump_gamma, potential_from_gamma};
    use crate::grid::make_grid;
    use crate::scattering::{forward_mu_samples, forward_transform, KGrid};

    fn kp(re: f64, im: f64) -> SpectralParameter {
        SpectralParameter::new(Complex64::new(re, im)).unwrap()
    }

    #[test]
    fn dense_zero_potential() {
        let g = make_grid(4.0, 16).unwrap();
        let mu = dense_mu(&Potential::zero(g), kp(1.0, 0.0)).unwrap();
        assert!(mu.values().iter().all(|v| (v - 1.0).norm() < 1e-15));
    }

    #[test]
    fn dense_size_guard() {
        let g = make_grid(8.0, 64).unwrap();
        assert!(matches!(dense_mu(&Potential::zero(g), kp(1.0, 0.0)), Err(NvsError::SizeGuard(_))));
    }

    #[test]
    fn born_trivial_orders() {
        let g = make_grid(8.0, 16).unwrap();
        let p = potential_from_gamma(&bump_gamma(g, 1.0, 1.0, Complex64::default()).unwrap()).unwrap();
        let zero = born_series(&p, kp(1.0, 0.0), 0).unwrap();
        assert!(zero.sum.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let one = born_series(&Potential::zero(g), kp(1.0, 0.0), 1).unwrap();
        assert!(one.sum.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn born_small_amplitude_ratio_and_dense_agreement() {
        let g = make_grid(8.0, 32).unwrap();
        let p = potential_from_gamma(&bump_gamma(g, 0.01, 1.0, Complex64::default()).unwrap()).unwrap();
        let k = kp(1.5, 0.5);
        let series = born_series(&p, k, 4).unwrap();
        assert!(series.ratios.iter().all(|r| *r < 0.1), "{:?}", series.ratios);
        let dense = dense_mu(&p, k).unwrap();
        let first = born_series(&p, k, 1).unwrap().sum;
        let one = ComplexField::constant(g, 1.0.into());
        let gap = (&dense - &first).l2_norm();
        assert!(gap <= 1e-3 * (&first - &one).l2_norm());
        assert!((&dense - &series.sum).sup_norm() < 1e-10);
    }

    #[test]
    fn born_detects_divergence() {
        let g = make_grid(8.0, 16).unwrap();
        let p = Potential::new(ComplexField::from_real_fn(g, |z| -40.0 * (-z.norm_sqr()).exp())).unwrap();
        assert!(matches!(born_series(&p, kp(0.2, 0.0), 6), Err(NvsError::Divergence { .. })));
    }

    #[test]
    fn brute_b_zero_and_conjugation() {
        let g = make_grid(8.0, 16).unwrap();
        let one = ComplexField::constant(g, 1.0.into());
        assert_eq!(brute_b(&Potential::zero(g), &one, Complex64::new(0.5, 0.5)), Complex64::default());
        let p = potential_from_gamma(&bump_gamma(g, 1.0, 1.0, Complex64::new(0.5, 0.0)).unwrap()).unwrap();
        let mu = ComplexField::from_fn(g, |z| Complex64::new(1.0, 0.2) + 0.1 * z);
        let k = Complex64::new(0.3, -0.7);
        // The phase is real-symmetric: conj(b[mu]) = b[conj(mu)] evaluated at -k.
        let lhs = brute_b(&p, &mu, k).conj();
        let rhs = brute_b(&p, &mu.conj(), -k);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    fn bump_potential(n: usize) -> Potential {
        let g = make_grid(8.0, n).unwrap();
        let mut p = potential_from_gamma(&bump_gamma(g, 1.0, 1.0, Complex64::default()).unwrap()).unwrap();
        let q = 1e3 * p.values().sup_norm();
        assert!(p.verify_decay(q, 0.5));
        p
    }

    #[test]
    fn fd_residual_vanishes_for_zero_data() {
        let kg = KGrid::new(1.5, 8).unwrap();
        let s = ScatteringData::zero(kg);
        let mu = vec![Complex64::new(1.0, 0.0); kg.len()];
        assert_eq!(fd_dbar_residual(&mu, &s, Complex64::new(0.5, -0.25)), 0.0);
    }

    #[test]
    fn fd_grid_residual_decreases_under_refinement() {
        let p = bump_potential(32);
        let centre = p.grid().len() / 2 + p.grid().size() / 2;
        let z = p.grid().node_at(centre);
        let settings = SolverSettings::default();
        let mut prev = f64::INFINITY;
        for m in [8, 16] {
            let (s, mu) = forward_mu_samples(&p, &KGrid::new(1.5, m).unwrap(), &settings, &[centre]).unwrap();
            let r = fd_dbar_residual(&mu[0], &s, z);
            assert!(r <= prev);
            prev = r;
        }
    }

    #[test]
    fn fd_local_residual_is_small() {
        let p = bump_potential(32);
        let centre = p.grid().len() / 2 + p.grid().size() / 2;
        let s = forward_transform(&p, &KGrid::new(1.5, 4).unwrap()).unwrap();
        let r = fd_dbar_residual_local(&p, &s, &[centre, centre + 3], 1e-3, &SolverSettings::default()).unwrap();
        // Measured about 1e-5 at this resolution.
        assert!(r.iter().all(|v| *v < 1e-4), "{r:?}");
    }
}
