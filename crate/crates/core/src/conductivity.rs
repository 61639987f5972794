//! Conductivities, the potentials `v = gamma^{-1/2} Laplacian gamma^{1/2}` they
//! generate, and the auxiliary field `w` with `dw/dzbar = -3 dv/dz`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NvsError, Result};
use crate::fft::Fft2;
use crate::grid::{
    apply_symbol, boundary_leakage, TaperedCalculus, cauchy_transform, spectral_derivative, ComplexField,
    Derivative, GridSpec, LEAKAGE_THRESHOLD,
};

pub const DEFAULT_FLOOR: f64 = 1e-3;

/// Largest `|gamma - 1|` allowed on the outer annulus.
pub const FAR_FIELD_TOLERANCE: f64 = 1e-10;

/// Relative tolerance on `(-Laplacian + v) gamma^{1/2} = 0`.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;

/// Status of the gradient integrability condition, which a grid cannot check.
pub const GRADIENT_CONDITION: &str = "assumed from construction";

#[derive(Debug, Clone, PartialEq)]
pub struct Conductivity {
    gamma: ComplexField,
    floor: f64,
}

impl Conductivity {
    /// Validates positivity above `floor` and the far-field normalization.
    pub fn new(gamma: ComplexField, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(NvsError::InvalidParameter(format!("floor must be positive, got {floor}")));
        }
        let gamma = gamma.into_real()?;
        let min = gamma.values().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        if min < floor {
            return Err(NvsError::PositivityViolation { min, floor });
        }
        let grid = gamma.grid();
        let deviation = gamma
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| grid.in_outer_annulus(*i))
            .map(|(_, v)| (v.re - 1.0).abs())
            .fold(0.0, f64::max);
        if deviation > FAR_FIELD_TOLERANCE {
            return Err(NvsError::FarFieldViolation { deviation });
        }
        Ok(Self { gamma, floor })
    }

    pub fn gamma(&self) -> &ComplexField {
        &self.gamma
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn grid(&self) -> GridSpec {
        self.gamma.grid()
    }

    /// `gamma^{1/2}` as a real field.
    pub fn sqrt(&self) -> ComplexField {
        self.gamma.map(|g| Complex64::new(g.re.sqrt(), 0.0)).real_part()
    }
}

/// `gamma(z) = 1 + A exp(-|z - z0|^2 / sigma^2)` with the default floor.
pub fn bump_gamma(grid: GridSpec, amplitude: f64, width: f64, center: Complex64) -> Result<Conductivity> {
    bump_gamma_with_floor(grid, amplitude, width, center, DEFAULT_FLOOR)
}

pub fn bump_gamma_with_floor(
    grid: GridSpec,
    amplitude: f64,
    width: f64,
    center: Complex64,
    floor: f64,
) -> Result<Conductivity> {
    if !amplitude.is_finite() || !center.re.is_finite() || !center.im.is_finite() {
        return Err(NvsError::InvalidParameter("non-finite bump parameters".into()));
    }
    if !(width > 0.0) {
        return Err(NvsError::InvalidParameter(format!("width must be positive, got {width}")));
    }
    if width > grid.half_width() / 4.0 {
        return Err(NvsError::InvalidParameter(format!(
            "width {width} exceeds L/4 = {}",
            grid.half_width() / 4.0
        )));
    }
    let peak = 1.0 + amplitude.min(0.0);
    if peak < floor {
        return Err(NvsError::PositivityViolation { min: peak, floor });
    }
    let gamma = ComplexField::from_real_fn(grid, |z| {
        1.0 + amplitude * (-(z - center).norm_sqr() / (width * width)).exp()
    });
    Conductivity::new(gamma, floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub q: f64,
    pub epsilon: f64,
}

/// Real Schrödinger potential with an optional decay certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    v: ComplexField,
    certificate: Option<DecayCertificate>,
}

impl Potential {
    /// Wraps a field after checking that it is real.
    pub fn new(v: ComplexField) -> Result<Self> {
        Ok(Self {
            v: v.into_real()?,
            certificate: None,
        })
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self {
            v: ComplexField::zeros(grid),
            certificate: None,
        }
    }

    pub fn values(&self) -> &ComplexField {
        &self.v
    }

    pub fn grid(&self) -> GridSpec {
        self.v.grid()
    }

    pub fn certificate(&self) -> Option<DecayCertificate> {
        self.certificate
    }

    pub fn is_zero(&self) -> bool {
        self.v.values().iter().all(|x| *x == Complex64::default())
    }

    /// Checks `|v(z)| <= q (1 + |z|)^{-2-eps}` at every node and attaches the
    /// certificate on success.
    pub fn verify_decay(&mut self, q: f64, epsilon: f64) -> bool {
        let grid = self.grid();
        let ok = q > 0.0
            && epsilon > 0.0
            && self
                .v
                .values()
                .iter()
                .zip(grid.nodes())
                .all(|(v, z)| v.norm() <= q * (1.0 + z.norm()).powf(-2.0 - epsilon));
        if ok {
            self.certificate = Some(DecayCertificate { q, epsilon });
        }
        ok
    }

    /// Hex SHA-256 of the grid parameters and the sample bytes.
    pub fn fingerprint(&self) -> String {
        let grid = self.grid();
        let mut hasher = Sha256::new();
        hasher.update((grid.size() as u32).to_le_bytes());
        hasher.update(grid.half_width().to_le_bytes());
        for v in self.v.values() {
            hasher.update(v.re.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// `v(z - y)` by Fourier translation on the periodic grid; exact when `y`
    /// is a multiple of the spacing in both axes.
    pub fn translate(&self, y: Complex64) -> Result<Potential> {
        let grid = self.grid();
        let n = grid.size();
        let h = grid.spacing();
        let steps = (y.re / h, y.im / h);
        let on_grid = (steps.0 - steps.0.round()).abs() < 1e-12 && (steps.1 - steps.1.round()).abs() < 1e-12;
        let values: Vec<Complex64> = if on_grid {
            let (sm, sn) = (steps.0.round() as i64, steps.1.round() as i64);
            let mut out = vec![Complex64::default(); grid.len()];
            for m in 0..n as i64 {
                for k in 0..n as i64 {
                    let a = (m - sm).rem_euclid(n as i64) as usize;
                    let b = (k - sn).rem_euclid(n as i64) as usize;
                    out[grid.index(m as usize, k as usize)] = self.v.get(a, b);
                }
            }
            out
        } else {
            let fft = Fft2::new(n);
            apply_symbol(self.v.values(), n, h, &fft, |x1, x2, _| {
                Complex64::from_polar(1.0, -(x1 * y.re + x2 * y.im))
            })
        };
        let shifted = ComplexField::new(grid, values)?.real_part();
        let before = boundary_leakage(&self.v);
        let leak = boundary_leakage(&shifted);
        if leak > LEAKAGE_THRESHOLD.max(10.0 * before) {
            return Err(NvsError::SupportViolation(format!(
                "translation by {y} pushes the potential to the grid boundary (leakage {leak:.3e})"
            )));
        }
        let mut out = Potential {
            v: shifted,
            certificate: None,
        };
        // 1 + |z| <= (1 + |y|)(1 + |z - y|) transfers the bound.
        if let Some(c) = self.certificate {
            out.verify_decay(c.q * (1.0 + y.norm()).powf(2.0 + c.epsilon), c.epsilon);
        }
        Ok(out)
    }
}

/// `v = Laplacian(gamma^{1/2}) / gamma^{1/2}`.
pub fn potential_from_gamma(c: &Conductivity) -> Result<Potential> {
    schrodinger_potential(c.gamma(), 1.0)
}

/// Potential of a conductivity tending to `far` at infinity. The Laplacian is
/// taken of `gamma^{1/2} - far^{1/2}`, which decays.
pub(crate) fn schrodinger_potential(gamma: &ComplexField, far: f64) -> Result<Potential> {
    let root_far = far.sqrt();
    let root = gamma.map(|g| Complex64::new(g.re.sqrt(), 0.0)).real_part();
    let perturbation = root.map(|s| s - root_far).real_part();
    let lap = spectral_derivative(&perturbation, Derivative::Laplacian);
    let v = lap.zip_with(&root, |l, s| Complex64::new(l.re / s.re, 0.0))?;

    let identity = (&v * &root).zip_with(&lap, |a, b| a - b)?;
    let rel = identity.l2_norm() / root.l2_norm();
    if rel > IDENTITY_TOLERANCE {
        return Err(NvsError::Precondition(format!(
            "(-Laplacian + v) gamma^(1/2) residual {rel:e} exceeds {IDENTITY_TOLERANCE:e}"
        )));
    }
    Potential::new(v)
}

/// Auxiliary field `w` with its acceptance diagnostics.
#[derive(Debug, Clone)]
pub struct AuxiliaryField {
    pub w: ComplexField,
    /// `max |dw/dzbar + 3 dv/dz| / max |dv/dz|` on the interior.
    pub residual: f64,
    /// `max |w|` on the outer annulus over `max |w|`.
    pub far_field_ratio: f64,
}

impl AuxiliaryField {
    pub fn is_accepted(&self) -> bool {
        self.residual <= 1e-6 && self.far_field_ratio <= 1e-2
    }
}

/// Solves `dw/dzbar = -3 dv/dz` with `w -> 0` at infinity.
pub fn compute_w(p: &Potential) -> Result<AuxiliaryField> {
    let v = p.values();
    let grid = v.grid();
    if p.certificate().is_none() {
        let ratio = boundary_leakage(v);
        if ratio > LEAKAGE_THRESHOLD {
            return Err(NvsError::BoundaryLeakage { ratio });
        }
    }
    let dv = spectral_derivative(v, Derivative::Dz);
    let w = cauchy_transform(&dv.scale((-3.0).into()));
    let [_, dzbar_w, _] = TaperedCalculus::new(grid).derivatives(w.values());
    let check = &ComplexField::new(grid, dzbar_w)? + &dv.scale(3.0.into());
    let scale = dv.sup_where(|i| grid.in_interior(i));
    let residual = if scale == 0.0 {
        check.sup_norm()
    } else {
        check.sup_where(|i| grid.in_interior(i)) / scale
    };
    let peak = w.sup_norm();
    let far_field_ratio = if peak == 0.0 {
        0.0
    } else {
        w.sup_where(|i| grid.in_outer_annulus(i)) / peak
    };
    Ok(AuxiliaryField {
        w,
        residual,
        far_field_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn reference() -> (GridSpec, Conductivity) {
        bump_on(64)
    }

    fn bump_on(n: usize) -> (GridSpec, Conductivity) {
        let g = make_grid(8.0, n).unwrap();
        let c = bump_gamma(g, 1.0, 1.0, Complex64::default()).unwrap();
        (g, c)
    }

    #[test]
    fn zero_amplitude_is_unit_conductivity() {
        let g = make_grid(8.0, 32).unwrap();
        let c = bump_gamma(g, 0.0, 1.0, Complex64::default()).unwrap();
        assert!(c.gamma().values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let v = potential_from_gamma(&c).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn bump_peak_value() {
        let (g, c) = reference();
        let max = c.gamma().values().iter().map(|v| v.re).fold(0.0, f64::max);
        let min = c.gamma().values().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        assert_eq!(max, 2.0);
        assert_eq!(c.gamma().get(g.size() / 2, g.size() / 2).re, 2.0);
        assert!(min >= 1.0);
    }

    #[test]
    fn floor_violation_is_rejected() {
        let g = make_grid(8.0, 32).unwrap();
        let err = bump_gamma_with_floor(g, -0.99, 1.0, Complex64::default(), 0.05).unwrap_err();
        assert!(matches!(err, NvsError::PositivityViolation { .. }));
    }

    #[test]
    fn wide_or_offcentre_bumps_are_rejected() {
        let g = make_grid(8.0, 32).unwrap();
        assert!(bump_gamma(g, 1.0, 2.5, Complex64::default()).is_err());
        assert!(matches!(
            bump_gamma(g, 1.0, 1.0, Complex64::new(6.5, 0.0)),
            Err(NvsError::FarFieldViolation { .. })
        ));
    }

    #[test]
    fn bump_potential_matches_closed_form() {
        // s = sqrt(1 + exp(-r^2)); Laplacian s = s'' + s'/r.
        let (g, c) = bump_on(128);
        let v = potential_from_gamma(&c).unwrap();
        let exact = ComplexField::from_real_fn(g, |z| {
            let r2 = z.norm_sqr();
            let e = (-r2).exp();
            let s = (1.0 + e).sqrt();
            // d/dr2 s = -e / (2 s), d2/dr2^2 s = e/(2s) - e^2/(4 s^3)
            let d1 = -e / (2.0 * s);
            let d2 = e / (2.0 * s) - e * e / (4.0 * s * s * s);
            (4.0 * d1 + 4.0 * r2 * d2) / s
        });
        let err = (v.values() - &exact).sup_norm();
        assert!(err < 1e-10, "err {err:e}");
        let outside = v.values().sup_where(|i| g.node_at(i).norm() > 6.0);
        assert!(outside < 1e-8);
    }

    #[test]
    fn mirror_equivariance() {
        let g = make_grid(8.0, 64).unwrap();
        let z0 = Complex64::new(0.75, -0.5);
        let v = potential_from_gamma(&bump_gamma(g, 1.0, 1.0, z0).unwrap()).unwrap();
        let w = potential_from_gamma(&bump_gamma(g, 1.0, 1.0, -z0).unwrap()).unwrap();
        let n = g.size();
        for m in 1..n {
            for k in 1..n {
                let a = v.values().get(m, k);
                let b = w.values().get(n - m, n - k);
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn scale_invariance() {
        let (_, c) = reference();
        let v = potential_from_gamma(&c).unwrap();
        let scaled = c.gamma().scale(2.5.into());
        let u = schrodinger_potential(&scaled, 2.5).unwrap();
        assert!((v.values() - u.values()).sup_norm() < 1e-10);
    }

    #[test]
    fn decay_checks() {
        let (g, c) = reference();
        let mut zero = Potential::zero(g);
        assert!(zero.verify_decay(1e-3, 0.1));
        let mut v = potential_from_gamma(&c).unwrap();
        let q = 1e3 * v.values().sup_norm();
        assert!(v.verify_decay(q, 0.5));
        assert_eq!(v.certificate(), Some(DecayCertificate { q, epsilon: 0.5 }));
        let mut one = Potential::new(ComplexField::constant(g, 1.0.into())).unwrap();
        assert!(!one.verify_decay(1.0, 1.0));
        assert!(one.certificate().is_none());
    }

    #[test]
    fn w_for_zero_and_bump() {
        let (g, c) = bump_on(128);
        let w0 = compute_w(&Potential::zero(g)).unwrap();
        assert_eq!(w0.w.sup_norm(), 0.0);
        let v = potential_from_gamma(&c).unwrap();
        let aux = compute_w(&v).unwrap();
        assert!(aux.residual <= 1e-6, "residual {:e}", aux.residual);
        assert!(aux.far_field_ratio <= 1e-2, "ratio {:e}", aux.far_field_ratio);
        // conj(w) solves d conj(w)/dz = -3 dv/dzbar because v is real.
        let [dz, _, _] = TaperedCalculus::new(g).derivatives(aux.w.conj().values());
        let lhs = ComplexField::new(g, dz).unwrap();
        let rhs = spectral_derivative(v.values(), Derivative::Dzbar).scale((-3.0).into());
        let scale = rhs.sup_norm();
        let err = (&lhs - &rhs).sup_where(|i| g.in_interior(i)) / scale;
        assert!(err < 1e-6, "err {err:e}");
    }

    #[test]
    fn w_rejects_leaking_potential() {
        let g = make_grid(4.0, 16).unwrap();
        let p = Potential::new(ComplexField::constant(g, 1.0.into())).unwrap();
        assert!(matches!(compute_w(&p), Err(NvsError::BoundaryLeakage { .. })));
    }

    #[test]
    fn on_grid_translation_is_exact() {
        let (g, c) = bump_on(128);
        let v = potential_from_gamma(&c).unwrap();
        let y = Complex64::new(1.0, 0.5);
        let shifted = v.translate(y).unwrap();
        let direct = potential_from_gamma(&bump_gamma(g, 1.0, 1.0, y).unwrap()).unwrap();
        assert!((shifted.values() - direct.values()).sup_norm() < 1e-12);
        let spectral = v.translate(Complex64::new(0.1, -0.05)).unwrap();
        let direct = potential_from_gamma(&bump_gamma(g, 1.0, 1.0, Complex64::new(0.1, -0.05)).unwrap()).unwrap();
        assert!((spectral.values() - direct.values()).sup_norm() < 1e-10);
        assert!(matches!(v.translate(Complex64::new(6.0, 0.0)), Err(NvsError::SupportViolation(_))));
    }

    #[test]
    fn fingerprint_distinguishes_potentials() {
        let (g, c) = reference();
        let v = potential_from_gamma(&c).unwrap();
        assert_eq!(v.fingerprint(), v.clone().fingerprint());
        assert_ne!(v.fingerprint(), Potential::zero(g).fingerprint());
        assert_eq!(v.fingerprint().len(), 64);
    }
}
