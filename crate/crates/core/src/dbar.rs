//! Inverse transform: the d-bar equation in `k`, reconstruction of
//! `gamma^{1/2}` and `v`, and the zero-data certificate.
//!
//! For a fixed `z` the unknown `mu(z, .)` lives on the half-shifted k-grid and
//! solves
//!
//! ```text
//! mu(k) = 1 + (1/pi) sum_{l != j} dk^2 a(k_l) conj(mu(k_l)) / (k - k_l)
//! a(k)  = e^{-i(kz + conj(kz))} b(k) / (4 pi conj(k))
//! ```
//!
//! with `b = 0` outside the truncation radius. The self term is dropped
//! (principal value on the centred cell).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{NvsError, Result};
use crate::fft::Fft2;
use crate::grid::{ComplexField, GridSpec, TaperedCalculus};
use crate::conductivity::Potential;
use crate::krylov::{gmres, join, split, GmresSettings};
use crate::scattering::{KGrid, ScatteringData};

/// Nodes with `|mu|` at or below this are excluded from the division in
/// [`reconstruct_v`].
pub const MU_MASK_THRESHOLD: f64 = 1e-6;
pub const MAX_MASK_FRACTION: f64 = 0.01;
pub const IMAGINARY_TOLERANCE: f64 = 1e-2;

/// `(1/(4 pi conj(k))) e^{-i(kz + conj(kz))} b mu_bar`.
pub fn dbar_rhs(b_k: Complex64, k: Complex64, z: Complex64, mu_bar: Complex64) -> Result<Complex64> {
    if k == Complex64::default() {
        return Err(NvsError::ExcludedSpectralParameter {
            re: 0.0,
            im: 0.0,
            reason: "the d-bar right-hand side is singular at k = 0".into(),
        });
    }
    Ok(coefficient(b_k, k, z) * mu_bar)
}

fn coefficient(b_k: Complex64, k: Complex64, z: Complex64) -> Complex64 {
    let phase = Complex64::from_polar(1.0, -2.0 * (k * z).re);
    phase * b_k / (4.0 * std::f64::consts::PI * k.conj())
}

#[derive(Debug, Clone)]
pub struct DbarProblem {
    pub z: Complex64,
    pub scattering: ScatteringData,
    /// Truncation radius `R`; data with `|k| > R` is treated as zero.
    pub radius: f64,
}

impl DbarProblem {
    /// Problem with `R = K`.
    pub fn new(scattering: ScatteringData, z: Complex64) -> Result<Self> {
        let radius = scattering.kgrid().half_width();
        Self::with_radius(scattering, z, radius)
    }

    pub fn with_radius(scattering: ScatteringData, z: Complex64, radius: f64) -> Result<Self> {
        let k_half = scattering.kgrid().half_width();
        if !(radius > 0.0 && radius <= k_half) {
            return Err(NvsError::InvalidParameter(format!(
                "truncation radius must lie in (0, K = {k_half}], got {radius}"
            )));
        }
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(NvsError::InvalidParameter("evaluation point must be finite".into()));
        }
        Ok(Self {
            z,
            scattering,
            radius,
        })
    }

    fn coefficients(&self) -> Vec<Complex64> {
        let kg = self.scattering.kgrid();
        self.scattering
            .values()
            .iter()
            .zip(kg.nodes())
            .map(|(b, k)| {
                if k.norm() <= self.radius {
                    coefficient(*b, k, self.z)
                } else {
                    Complex64::default()
                }
            })
            .collect()
    }
}

/// Discrete solid Cauchy transform on a k-grid, applied by FFT.
pub struct CauchyOperator {
    size: usize,
    fft: Fft2,
    spectrum: Vec<Complex64>,
}

impl CauchyOperator {
    pub fn new(kg: &KGrid) -> Self {
        let m = kg.size();
        let n = 2 * m;
        let dk = kg.spacing();
        let scale = dk / std::f64::consts::PI;
        let mut table = vec![Complex64::default(); n * n];
        for dp in -(m as i64 - 1)..m as i64 {
            for dq in -(m as i64 - 1)..m as i64 {
                if dp == 0 && dq == 0 {
                    continue;
                }
                let r = dp.rem_euclid(n as i64) as usize;
                let c = dq.rem_euclid(n as i64) as usize;
                // k_j - k_l = dk (dp + i dq).
                table[r * n + c] = scale / Complex64::new(dp as f64, dq as f64);
            }
        }
        let fft = Fft2::new(n);
        fft.forward(&mut table);
        Self {
            size: m,
            fft,
            spectrum: table,
        }
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let m = self.size;
        let n = 2 * m;
        let mut buf = vec![Complex64::default(); n * n];
        for p in 0..m {
            buf[p * n..p * n + m].copy_from_slice(&f[p * m..(p + 1) * m]);
        }
        self.fft.forward(&mut buf);
        buf.iter_mut().zip(&self.spectrum).for_each(|(a, s)| *a *= s);
        self.fft.inverse(&mut buf);
        let mut out = Vec::with_capacity(m * m);
        for p in 0..m {
            out.extend_from_slice(&buf[p * n..p * n + m]);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DbarSolution {
    pub z: Complex64,
    /// `mu(z, k)` in k-grid node order.
    pub mu: Vec<Complex64>,
    pub iterations: usize,
    pub solver_residual: f64,
    /// Central-difference `d mu / d conj(k)` against the right-hand side,
    /// `max |FD - rhs| / max |rhs|` over interior nodes.
    pub kbar_residual: f64,
}

pub fn solve_dbar(s: &ScatteringData, z: Complex64) -> Result<DbarSolution> {
    let problem = DbarProblem::new(s.clone(), z)?;
    let op = CauchyOperator::new(&s.kgrid());
    solve_dbar_with(&problem, &op, &GmresSettings::default())
}

pub fn solve_dbar_with(
    problem: &DbarProblem,
    op: &CauchyOperator,
    settings: &GmresSettings,
) -> Result<DbarSolution> {
    let kg = problem.scattering.kgrid();
    let len = kg.len();
    let a = problem.coefficients();
    if a.iter().all(|c| *c == Complex64::default()) {
        return Ok(DbarSolution {
            z: problem.z,
            mu: vec![Complex64::new(1.0, 0.0); len],
            iterations: 0,
            solver_residual: 0.0,
            kbar_residual: 0.0,
        });
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        let mu = join(x);
        let t: Vec<Complex64> = mu.iter().zip(&a).map(|(m, c)| c * m.conj()).collect();
        let ct = op.apply(&t);
        let r: Vec<Complex64> = mu.iter().zip(&ct).map(|(m, c)| m - c).collect();
        out.copy_from_slice(&split(&r));
    };
    let rhs = split(&vec![Complex64::new(1.0, 0.0); len]);
    let outcome = gmres(apply, &rhs, settings)?;
    let mu = join(&outcome.x);
    let kbar_residual = kbar_residual(&kg, &mu, &a);
    Ok(DbarSolution {
        z: problem.z,
        mu,
        iterations: outcome.iterations,
        solver_residual: outcome.residual,
        kbar_residual,
    })
}

fn kbar_residual(kg: &KGrid, mu: &[Complex64], a: &[Complex64]) -> f64 {
    let m = kg.size();
    let dk = kg.spacing();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for idx in (0..kg.len()).filter(|&i| kg.is_interior(i)) {
        let d1 = (mu[idx + m] - mu[idx - m]) / (2.0 * dk);
        let d2 = (mu[idx + 1] - mu[idx - 1]) / (2.0 * dk);
        let fd = 0.5 * (d1 + Complex64::i() * d2);
        let rhs = a[idx] * mu[idx].conj();
        worst = worst.max((fd - rhs).norm());
        scale = scale.max(rhs.norm());
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DbarSettings {
    /// Truncation radius; `None` means `R = K`.
    pub radius: Option<f64>,
    pub gmres: GmresSettings,
}

impl Default for DbarSettings {
    fn default() -> Self {
        Self {
            radius: None,
            gmres: GmresSettings::default(),
        }
    }
}

/// Indices of the k-nodes of smallest modulus.
pub fn innermost_ring(kg: &KGrid) -> Vec<usize> {
    let r = kg.nodes().map(|k| k.norm()).fold(f64::INFINITY, f64::min);
    (0..kg.len())
        .filter(|&i| kg.node_at(i).norm() <= r * (1.0 + 1e-12))
        .collect()
}

/// The k-node closest to `target`.
pub fn nearest_node(kg: &KGrid, target: Complex64) -> usize {
    (0..kg.len())
        .min_by(|&a, &b| {
            let da = (kg.node_at(a) - target).norm();
            let db = (kg.node_at(b) - target).norm();
            da.total_cmp(&db)
        })
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct Inversion {
    /// Real part of the innermost-ring mean of `mu(z, .)`.
    pub gamma_sqrt: ComplexField,
    /// `max |Im| / max |Re|` of the ring mean before it was made real.
    pub imaginary_residue: f64,
    pub positive: bool,
    /// `mu(., k)` on the z-grid for each requested k-node.
    pub slices: Vec<(usize, ComplexField)>,
    pub max_iterations: usize,
    pub max_solver_residual: f64,
    pub max_kbar_residual: f64,
    /// `sup |mu - 1|` over all z-nodes and k-nodes.
    pub max_mu_deviation: f64,
}

/// Solves the d-bar equation at every node of `spec` and reads off
/// `gamma^{1/2}` at the innermost k-ring.
pub fn reconstruct_gamma_sqrt(s: &ScatteringData, spec: GridSpec) -> Result<Inversion> {
    invert(s, spec, &DbarSettings::default(), &[])
}

/// Like [`reconstruct_gamma_sqrt`], additionally returning `mu(., k)` for
/// the k-nodes listed in `keep`.
pub fn invert(s: &ScatteringData, spec: GridSpec, settings: &DbarSettings, keep: &[usize]) -> Result<Inversion> {
    let kg = s.kgrid();
    if let Some(&bad) = keep.iter().find(|&&i| i >= kg.len()) {
        return Err(NvsError::InvalidParameter(format!("k-node index {bad} is outside the k-grid")));
    }
    let radius = settings.radius.unwrap_or(kg.half_width());
    let op = CauchyOperator::new(&kg);
    let ring = innermost_ring(&kg);
    let solutions: Vec<Result<DbarSolution>> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let problem = DbarProblem::with_radius(s.clone(), spec.node_at(i), radius)?;
            solve_dbar_with(&problem, &op, &settings.gmres)
        })
        .collect();
    let mut ring_mean = Vec::with_capacity(spec.len());
    let mut slices: Vec<Vec<Complex64>> = vec![Vec::with_capacity(spec.len()); keep.len()];
    let (mut max_iterations, mut max_solver_residual, mut max_kbar_residual) = (0, 0.0f64, 0.0f64);
    let mut max_mu_deviation: f64 = 0.0;
    for sol in solutions {
        let sol = sol?;
        let mean = ring.iter().map(|&i| sol.mu[i]).sum::<Complex64>() / ring.len() as f64;
        ring_mean.push(mean);
        for (slot, &j) in slices.iter_mut().zip(keep) {
            slot.push(sol.mu[j]);
        }
        max_iterations = max_iterations.max(sol.iterations);
        max_solver_residual = max_solver_residual.max(sol.solver_residual);
        max_kbar_residual = max_kbar_residual.max(sol.kbar_residual);
        max_mu_deviation = sol.mu.iter().map(|m| (m - 1.0).norm()).fold(max_mu_deviation, f64::max);
    }
    let re_max = ring_mean.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let im_max = ring_mean.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let imaginary_residue = if re_max > 0.0 { im_max / re_max } else { im_max };
    if imaginary_residue > IMAGINARY_TOLERANCE {
        log::warn!("reconstructed gamma^1/2 has relative imaginary residue {imaginary_residue:.3e}");
    }
    let real: Vec<f64> = ring_mean.iter().map(|v| v.re).collect();
    let positive = real.iter().all(|v| *v > 0.0);
    if !positive {
        log::warn!("reconstructed gamma^1/2 is not positive everywhere");
    }
    let slices = keep
        .iter()
        .zip(slices)
        .map(|(&j, values)| Ok((j, ComplexField::new(spec, values)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Inversion {
        gamma_sqrt: ComplexField::from_real_values(spec, &real)?,
        imaginary_residue,
        positive,
        slices,
        max_iterations,
        max_solver_residual,
        max_kbar_residual,
        max_mu_deviation,
    })
}

#[derive(Debug, Clone)]
pub struct ReconstructedPotential {
    pub potential: Potential,
    /// `max |Im v| / max |Re v|` before the imaginary part was dropped.
    pub imaginary_residue: f64,
    pub masked_fraction: f64,
}

/// `v = (Laplacian + 4ik d/dzbar) mu / mu` on the half-size interior; zero
/// outside it and where `|mu| <= MU_MASK_THRESHOLD`.
pub fn reconstruct_v(mu: &ComplexField, k: Complex64) -> Result<ReconstructedPotential> {
    let grid = mu.grid();
    let u: Vec<Complex64> = mu.values().iter().map(|m| m - 1.0).collect();
    let [_, dzbar, lap] = TaperedCalculus::new(grid).derivatives(&u);
    let four_ik = Complex64::new(0.0, 4.0) * k;
    let mut masked = 0usize;
    let mut v = vec![Complex64::default(); grid.len()];
    for i in 0..grid.len() {
        let m = mu.values()[i];
        if m.norm() <= MU_MASK_THRESHOLD {
            masked += 1;
            continue;
        }
        if grid.in_interior(i) {
            v[i] = (lap[i] + four_ik * dzbar[i]) / m;
        }
    }
    let masked_fraction = masked as f64 / grid.len() as f64;
    if masked_fraction > MAX_MASK_FRACTION {
        return Err(NvsError::MaskTooLarge {
            fraction: masked_fraction,
        });
    }
    let re_max = v.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let im_max = v.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let imaginary_residue = if re_max > 0.0 { im_max / re_max } else { im_max };
    if imaginary_residue > IMAGINARY_TOLERANCE {
        log::warn!("reconstructed v has relative imaginary residue {imaginary_residue:.3e}");
    }
    let real = ComplexField::from_real_values(grid, &v.iter().map(|c| c.re).collect::<Vec<_>>())?;
    Ok(ReconstructedPotential {
        potential: Potential::new(real)?,
        imaginary_residue,
        masked_fraction,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LiouvilleReport {
    pub tolerance: f64,
    pub sup_b: f64,
    pub sup_mu_minus_one: f64,
    pub sup_v: f64,
    /// `sup |mu - 1| / sup |b|`, zero when `b = 0`.
    pub mu_constant: f64,
    /// `sup |v| / sup |b|`, zero when `b = 0`.
    pub v_constant: f64,
    /// k-node used for the potential reconstruction.
    pub k_node: Complex64,
}

/// Checks that small data gives `mu` close to 1 and `v` close to 0 on `spec`.
pub fn liouville_certificate(s: &ScatteringData, tol: f64, spec: GridSpec) -> Result<LiouvilleReport> {
    let sup_b = s.sup_norm();
    if !(tol >= 0.0) || sup_b > tol {
        return Err(NvsError::Precondition(format!(
            "certificate needs sup|b| = {sup_b:e} <= tol = {tol:e}"
        )));
    }
    let kg = s.kgrid();
    let kj = nearest_node(&kg, Complex64::new(0.5 * kg.half_width(), 0.0));
    let inversion = invert(s, spec, &DbarSettings::default(), &[kj])?;
    let sup_mu_minus_one = inversion.max_mu_deviation;
    let v = reconstruct_v(&inversion.slices[0].1, kg.node_at(kj))?;
    let sup_v = v.potential.values().sup_norm();
    let ratio = |x: f64| if sup_b > 0.0 { x / sup_b } else { 0.0 };
    Ok(LiouvilleReport {
        tolerance: tol,
        sup_b,
        sup_mu_minus_one,
        sup_v,
        mu_constant: ratio(sup_mu_minus_one),
        v_constant: ratio(sup_v),
        k_node: kg.node_at(kj),
    })
}
