//! Traveling-wave analysis of scattering data.
//!
//! A traveling wave `v(x, t) = V(x - ct)` would need the time phase
//! `e^{i(k^3 + conj(k)^3) t}` to agree with the translation phase for
//! `y = ct` at every node. The mismatch rate is the phase gap; a nonzero
//! `b` away from its zero curve leaves a positive residual.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conductivity::Potential;
use crate::error::{NvsError, Result};
use crate::faddeev::SolverSettings;
use crate::scattering::{evolution_rate, forward_transform_with, KGrid, ScatteringData};

/// Nodes with `|phase_gap|` below this count as near the zero curve.
pub const ZERO_CURVE_THRESHOLD: f64 = 1e-3;

/// Velocity `c = c1 + i c2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    c: Complex64,
}

impl Velocity {
    pub fn new(c: Complex64) -> Result<Self> {
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(NvsError::InvalidParameter(format!("velocity {c} is not finite")));
        }
        Ok(Self { c })
    }

    pub fn value(&self) -> Complex64 {
        self.c
    }
}

/// `samples x samples` velocities covering `[lo, hi]^2`, row-major in `c1`.
pub fn velocity_box(lo: f64, hi: f64, samples: usize) -> Result<Vec<Velocity>> {
    if samples < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(NvsError::InvalidParameter(format!(
            "velocity box needs lo < hi and at least 2 samples, got [{lo}, {hi}] x {samples}"
        )));
    }
    let step = (hi - lo) / (samples - 1) as f64;
    let axis: Vec<f64> = (0..samples).map(|i| lo + i as f64 * step).collect();
    axis.iter()
        .flat_map(|&a| axis.iter().map(move |&b| Velocity::new(Complex64::new(a, b))))
        .collect()
}

/// `(k^3 + conj(k)^3) - (kc + conj(kc))`.
pub fn phase_gap(k: Complex64, c: Velocity) -> f64 {
    let kc = k * c.c;
    evolution_rate(k) - (kc + kc.conj()).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TravelingWaveResidual {
    pub sup_residual: f64,
    pub l2_residual: f64,
    pub zero_curve_fraction: f64,
}

/// Residual density `|phase_gap(k, c)| |b(k)|` reduced to sup and quadrature
/// L2 norms over the k-grid.
pub fn traveling_wave_residual(s: &ScatteringData, c: Velocity) -> TravelingWaveResidual {
    let kg = s.kgrid();
    let dk = kg.spacing();
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    let mut near = 0usize;
    for (b, k) in s.base().iter().zip(kg.nodes()) {
        let gap = phase_gap(k, c);
        if gap.abs() < ZERO_CURVE_THRESHOLD {
            near += 1;
        }
        let rho = gap.abs() * b.norm();
        sup = sup.max(rho);
        sq += rho * rho;
    }
    TravelingWaveResidual {
        sup_residual: sup,
        l2_residual: (sq * dk * dk).sqrt(),
        zero_curve_fraction: near as f64 / kg.len() as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySample {
    pub c: Complex64,
    pub residual: TravelingWaveResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonCertificate {
    /// Minimum L2 residual over the velocity samples.
    pub floor: f64,
    pub argmin: Complex64,
    pub sup_b: f64,
    /// Median `|phase_gap|` over the k-nodes at the minimizing velocity.
    pub median_phase_gap: f64,
    pub samples: Vec<VelocitySample>,
}

impl SolitonCertificate {
    /// True when a nonzero residual floor rules out every sampled velocity.
    pub fn excludes_solitons(&self) -> bool {
        self.floor > 0.0
    }
}

/// Forward transform of `p`, then the residual floor over `c_grid`.
pub fn soliton_certificate(
    p: &Potential,
    kg: &KGrid,
    settings: &SolverSettings,
    c_grid: &[Velocity],
) -> Result<SolitonCertificate> {
    let (s, _) = forward_transform_with(p, kg, settings)?;
    certificate_from_data(&s, c_grid)
}

/// Residual floor over `c_grid` for scattering data at `t = 0`.
pub fn certificate_from_data(s: &ScatteringData, c_grid: &[Velocity]) -> Result<SolitonCertificate> {
    if c_grid.is_empty() {
        return Err(NvsError::InvalidParameter("empty velocity grid".into()));
    }
    let samples: Vec<VelocitySample> = c_grid
        .par_iter()
        .map(|&c| VelocitySample {
            c: c.value(),
            residual: traveling_wave_residual(s, c),
        })
        .collect();
    let best = samples
        .iter()
        .min_by(|a, b| a.residual.l2_residual.total_cmp(&b.residual.l2_residual))
        .expect("nonempty");
    let argmin = best.c;
    let kg = s.kgrid();
    let mut gaps: Vec<f64> = kg.nodes().map(|k| phase_gap(k, Velocity { c: argmin }).abs()).collect();
    gaps.sort_by(f64::total_cmp);
    let mid = gaps.len() / 2;
    let median_phase_gap = if gaps.len() % 2 == 0 {
        0.5 * (gaps[mid - 1] + gaps[mid])
    } else {
        gaps[mid]
    };
    Ok(SolitonCertificate {
        floor: best.residual.l2_residual,
        argmin,
        sup_b: s.sup_norm(),
        median_phase_gap,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn vel(re: f64, im: f64) -> Velocity {
        Velocity::new(c(re, im)).unwrap()
    }

    #[test]
    fn phase_gap_values() {
        assert_eq!(phase_gap(c(1.0, 0.0), vel(1.0, 0.0)), 0.0);
        assert_eq!(phase_gap(c(1.0, 0.0), vel(0.0, 0.0)), 2.0);
        let kg = KGrid::new(2.0, 16).unwrap();
        let v = vel(3.5, -1.25);
        for i in 0..kg.len() {
            let a = phase_gap(kg.node_at(i), v);
            let b = phase_gap(kg.node_at(kg.mirror(i)), v);
            assert!((a + b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn velocity_validation() {
        assert!(Velocity::new(c(f64::NAN, 0.0)).is_err());
        assert!(velocity_box(1.0, -1.0, 5).is_err());
        let grid = velocity_box(-10.0, 10.0, 21).unwrap();
        assert_eq!(grid.len(), 441);
        assert_eq!(grid[0].value(), c(-10.0, -10.0));
        assert_eq!(grid[440].value(), c(10.0, 10.0));
        assert_eq!(grid[220].value(), c(0.0, 0.0));
    }

    #[test]
    fn zero_data_has_zero_residual() {
        let s = ScatteringData::zero(KGrid::new(2.0, 8).unwrap());
        for v in velocity_box(-10.0, 10.0, 5).unwrap() {
            let r = traveling_wave_residual(&s, v);
            assert_eq!((r.sup_residual, r.l2_residual), (0.0, 0.0));
        }
        let cert = certificate_from_data(&s, &velocity_box(-10.0, 10.0, 5).unwrap()).unwrap();
        assert_eq!(cert.floor, 0.0);
        assert!(!cert.excludes_solitons());
    }

    #[test]
    fn data_on_the_zero_curve_is_invisible() {
        // c = k0^2 puts the node k0 (and -k0) exactly on the zero curve.
        let kg = KGrid::new(2.0, 8).unwrap();
        let k0 = kg.node(5, 3);
        let v = Velocity::new(k0 * k0).unwrap();
        let base: Vec<Complex64> = kg
            .nodes()
            .map(|k| if phase_gap(k, v) == 0.0 { c(1.0, 0.0) } else { c(0.0, 0.0) })
            .collect();
        assert!(base.iter().filter(|b| b.re != 0.0).count() >= 2);
        let s = ScatteringData::synthetic(kg, base, "curve").unwrap();
        let r = traveling_wave_residual(&s, v);
        assert_eq!(r.l2_residual, 0.0);
    }

    #[test]
    fn homogeneity_and_elementwise_check() {
        let kg = KGrid::new(2.0, 8).unwrap();
        let base: Vec<Complex64> = kg.nodes().map(|k| (-(k.norm_sqr())).exp() * c(0.4, -0.3)).collect();
        let s = ScatteringData::synthetic(kg, base.clone(), "gauss").unwrap();
        let v = vel(0.0, 0.0);
        let r = traveling_wave_residual(&s, v);
        let direct = kg
            .nodes()
            .zip(&base)
            .map(|(k, b)| (2.0 * (k * k * k).re).abs() * b.norm())
            .fold(0.0, f64::max);
        assert_eq!(r.sup_residual, direct);
        let scaled = traveling_wave_residual(&s.scaled(c(2.0, 0.0)), vel(1.5, 2.0));
        let plain = traveling_wave_residual(&s, vel(1.5, 2.0));
        assert!((scaled.l2_residual - 2.0 * plain.l2_residual).abs() <= 1e-15 * scaled.l2_residual);
        assert!((scaled.sup_residual - 2.0 * plain.sup_residual).abs() <= 1e-15 * scaled.sup_residual);
    }

    #[test]
    fn positive_floor_for_smooth_data() {
        let kg = KGrid::new(2.0, 16).unwrap();
        let base: Vec<Complex64> = kg.nodes().map(|k| (-(k.norm_sqr())).exp() * c(1.0, 0.0)).collect();
        let s = ScatteringData::synthetic(kg, base, "gauss").unwrap();
        let cert = certificate_from_data(&s, &velocity_box(-10.0, 10.0, 21).unwrap()).unwrap();
        assert!(cert.floor > 10.0 * f64::EPSILON * cert.sup_b);
        assert!(cert.excludes_solitons());
        assert_eq!(cert.samples.len(), 441);
    }
}
