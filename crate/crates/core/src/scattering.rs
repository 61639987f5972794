//! Scattering data `b(k) = \iint e^{i(ky + conj(ky))} v(y) mu(y, k) dA(y)` on a
//! half-shifted k-grid, and the exact phase laws for translation and time
//! evolution.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conductivity::Potential;
use crate::error::{NvsError, Result};
use crate::faddeev::{
    solve_mu_with, solve_mu_with_table, Diagnostics, FaddeevField, KernelTable, SolveMethod, SolverSettings,
    SpectralParameter, DEFAULT_K_MIN,
};
use crate::grid::{boundary_leakage, integrate, LEAKAGE_THRESHOLD};

/// Square lattice in the k-plane offset by half a step, so `0` is never a node.
///
/// Node `(p, q)` is `(-K + (p + 1/2) dk) + i(-K + (q + 1/2) dk)` with
/// `dk = 2K/M`, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    half_width: f64,
    size: usize,
    k_min: f64,
}

impl KGrid {
    pub fn new(half_width: f64, size: usize) -> Result<Self> {
        Self::with_min(half_width, size, DEFAULT_K_MIN)
    }

    pub fn with_min(half_width: f64, size: usize, k_min: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(NvsError::InvalidGrid(format!("k-grid half width must be positive, got {half_width}")));
        }
        if size < 2 || size % 2 != 0 {
            return Err(NvsError::InvalidGrid(format!("k-grid size must be even and >= 2, got {size}")));
        }
        if !(k_min > 0.0) {
            return Err(NvsError::InvalidParameter(format!("k_min must be positive, got {k_min}")));
        }
        let grid = Self {
            half_width,
            size,
            k_min,
        };
        let nearest = 0.5 * grid.spacing() * std::f64::consts::SQRT_2;
        if nearest < k_min {
            return Err(NvsError::InvalidGrid(format!(
                "innermost k-node |k| = {nearest:.4} is below k_min = {k_min}"
            )));
        }
        Ok(grid)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.size as f64
    }

    pub fn len(&self) -> usize {
        self.size * self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    pub fn node(&self, p: usize, q: usize) -> Complex64 {
        Complex64::new(self.coordinate(p), self.coordinate(q))
    }

    pub fn node_at(&self, idx: usize) -> Complex64 {
        self.node(idx / self.size, idx % self.size)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(move |i| self.node_at(i))
    }

    /// Index of the node `-k` for the node at `idx`.
    pub fn mirror(&self, idx: usize) -> usize {
        let (p, q) = (idx / self.size, idx % self.size);
        (self.size - 1 - p) * self.size + (self.size - 1 - q)
    }

    /// Nodes whose four axis neighbours exist.
    pub fn is_interior(&self, idx: usize) -> bool {
        let (p, q) = (idx / self.size, idx % self.size);
        p > 0 && q > 0 && p + 1 < self.size && q + 1 < self.size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Fingerprint of the potential, or a free-form tag for synthetic data.
    pub potential: String,
    pub solver: String,
    /// Evolution time applied lazily to the stored values.
    pub time: f64,
    /// Accumulated translation.
    pub shift: Complex64,
}

/// `b` on a k-grid. The stored values are `b(k, 0)`; the time in the
/// provenance is applied as a phase when values are read.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringData {
    kgrid: KGrid,
    base: Vec<Complex64>,
    provenance: Provenance,
}

/// `k^3 + conj(k)^3 = 2 Re k^3`.
pub fn evolution_rate(k: Complex64) -> f64 {
    2.0 * (k * k * k).re
}

/// `e^{i(ky + conj(ky))}`.
pub fn shift_phase(k: Complex64, y: Complex64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * (k * y).re)
}

impl ScatteringData {
    pub fn new(kgrid: KGrid, base: Vec<Complex64>, provenance: Provenance) -> Result<Self> {
        if base.len() != kgrid.len() {
            return Err(NvsError::ShapeMismatch {
                expected: kgrid.len(),
                got: base.len(),
            });
        }
        if base.iter().any(|b| !(b.re.is_finite() && b.im.is_finite())) {
            return Err(NvsError::InvalidParameter("scattering data must be finite".into()));
        }
        Ok(Self {
            kgrid,
            base,
            provenance,
        })
    }

    /// Synthetic data with a free-form provenance tag.
    pub fn synthetic(kgrid: KGrid, base: Vec<Complex64>, tag: &str) -> Result<Self> {
        Self::new(
            kgrid,
            base,
            Provenance {
                potential: tag.to_string(),
                solver: "none".into(),
                time: 0.0,
                shift: Complex64::default(),
            },
        )
    }

    pub fn zero(kgrid: KGrid) -> Self {
        Self::synthetic(kgrid, vec![Complex64::default(); kgrid.len()], "zero").expect("finite zeros")
    }

    pub fn kgrid(&self) -> KGrid {
        self.kgrid
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn time(&self) -> f64 {
        self.provenance.time
    }

    /// Values at time 0.
    pub fn base(&self) -> &[Complex64] {
        &self.base
    }

    /// `b(k, t)` at every node.
    pub fn values(&self) -> Vec<Complex64> {
        let t = self.provenance.time;
        if t == 0.0 {
            return self.base.clone();
        }
        self.base
            .iter()
            .zip(self.kgrid.nodes())
            .map(|(b, k)| Complex64::from_polar(1.0, evolution_rate(k) * t) * b)
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.base.iter().map(|b| b.norm()).fold(0.0, f64::max)
    }

    /// Multiplies every value by a real or complex constant.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            kgrid: self.kgrid,
            base: self.base.iter().map(|b| b * c).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// `b(k)` for one solved Faddeev field.
pub fn compute_b(p: &Potential, f: &FaddeevField) -> Result<Complex64> {
    if f.potential != p.fingerprint() {
        return Err(NvsError::ProvenanceMismatch(
            "mu was solved for a different potential".into(),
        ));
    }
    let k = f.k.value();
    let integrand = (p.values() * &f.mu).map_with_node(|y, vm| shift_phase(k, y) * vm);
    Ok(integrate(&integrand))
}

fn require_decay(p: &Potential) -> Result<()> {
    if p.certificate().is_none() {
        let ratio = boundary_leakage(p.values());
        if ratio > LEAKAGE_THRESHOLD {
            return Err(NvsError::BoundaryLeakage { ratio });
        }
    }
    Ok(())
}

pub fn forward_transform(p: &Potential, kg: &KGrid) -> Result<ScatteringData> {
    forward_transform_with(p, kg, &SolverSettings::default()).map(|(s, _)| s)
}

/// Forward transform with per-node solver diagnostics, in node order.
pub fn forward_transform_with(
    p: &Potential,
    kg: &KGrid,
    settings: &SolverSettings,
) -> Result<(ScatteringData, Vec<Diagnostics>)> {
    sweep(p, kg, settings, &[]).map(|(s, d, _)| (s, d))
}

/// Forward transform that also keeps `mu(z, k)` for the z-grid nodes with
/// flat indices `nodes`. Entry `j` of the result holds `mu(z_j, .)` over the
/// k-grid in node order.
pub fn forward_mu_samples(
    p: &Potential,
    kg: &KGrid,
    settings: &SolverSettings,
    nodes: &[usize],
) -> Result<(ScatteringData, Vec<Vec<Complex64>>)> {
    if let Some(&bad) = nodes.iter().find(|&&i| i >= p.grid().len()) {
        return Err(NvsError::InvalidParameter(format!("z-node index {bad} is outside the grid")));
    }
    let (s, _, samples) = sweep(p, kg, settings, nodes)?;
    let by_node = (0..nodes.len())
        .map(|j| samples.iter().map(|row| row[j]).collect())
        .collect();
    Ok((s, by_node))
}

type NodeResult = (Complex64, Diagnostics, Vec<Complex64>);

fn sweep(
    p: &Potential,
    kg: &KGrid,
    settings: &SolverSettings,
    nodes: &[usize],
) -> Result<(ScatteringData, Vec<Diagnostics>, Vec<Vec<Complex64>>)> {
    require_decay(p)?;
    let finish = |f: FaddeevField| -> Result<NodeResult> {
        let picked = nodes.iter().map(|&j| f.mu.values()[j]).collect();
        Ok((compute_b(p, &f)?, f.diagnostics, picked))
    };
    let share = settings.method == SolveMethod::Iterative && !p.is_zero();
    let param = |idx: usize| SpectralParameter::with_min(kg.node_at(idx), kg.k_min());
    // Nodes k and -k share one kernel table up to reflection.
    let solve_pair = |i: usize, j: usize| -> Vec<(usize, Result<NodeResult>)> {
        let table = if share && i != j {
            param(i)
                .and_then(|k| k.check_resolved(p.grid()).map(|_| k))
                .ok()
                .map(|k| KernelTable::new(p.grid(), k))
        } else {
            None
        };
        let Some(table) = table else {
            let mut out = vec![(i, param(i).and_then(|k| solve_mu_with(p, k, settings)).and_then(finish))];
            if i != j {
                out.push((j, param(j).and_then(|k| solve_mu_with(p, k, settings)).and_then(finish)));
            }
            return out;
        };
        let first = param(i)
            .and_then(|k| solve_mu_with_table(p, k, &table, settings))
            .and_then(finish);
        let second = param(j)
            .and_then(|k| solve_mu_with_table(p, k, &table.reflected(), settings))
            .and_then(finish);
        vec![(i, first), (j, second)]
    };
    let pairs: Vec<(usize, Result<NodeResult>)> = (0..kg.len())
        .filter(|&i| i <= kg.mirror(i))
        .collect::<Vec<_>>()
        .into_par_iter()
        .flat_map_iter(|i| solve_pair(i, kg.mirror(i)))
        .collect();
    let mut results: Vec<Option<Result<NodeResult>>> = (0..kg.len()).map(|_| None).collect();
    for (i, r) in pairs {
        results[i] = Some(r);
    }
    let results = results.into_iter().map(|r| r.expect("every node solved"));
    let mut b = Vec::with_capacity(kg.len());
    let mut diagnostics = Vec::with_capacity(kg.len());
    let mut samples = Vec::with_capacity(kg.len());
    let mut failures = Vec::new();
    for (i, r) in results.enumerate() {
        match r {
            Ok((value, d, picked)) => {
                b.push(value);
                diagnostics.push(d);
                samples.push(picked);
            }
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(NvsError::ForwardFailures { failures });
    }
    let grid = p.grid();
    let provenance = Provenance {
        potential: p.fingerprint(),
        solver: format!(
            "{:?} tol={:e} max_iter={} restart={} L={} N={}",
            settings.method,
            settings.gmres.tolerance,
            settings.gmres.max_iterations,
            settings.gmres.restart,
            grid.half_width(),
            grid.size()
        ),
        time: 0.0,
        shift: Complex64::default(),
    };
    Ok((ScatteringData::new(*kg, b, provenance)?, diagnostics, samples))
}

/// `b_y(k) = e^{i(ky + conj(ky))} b(k)`.
pub fn shift_b(s: &ScatteringData, y: Complex64) -> ScatteringData {
    let mut out = s.clone();
    for (b, k) in out.base.iter_mut().zip(s.kgrid.nodes()) {
        *b *= shift_phase(k, y);
    }
    out.provenance.shift += y;
    out
}

/// `b(k, t + dt) = e^{i(k^3 + conj(k)^3) dt} b(k, t)`, applied lazily.
pub fn evolve_b(s: &ScatteringData, t: f64) -> ScatteringData {
    let mut out = s.clone();
    out.provenance.time += t;
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftLemmaReport {
    pub y: Complex64,
    /// Largest nodewise `|b_direct - b_phase| / |b_phase|`.
    pub max_relative_error: f64,
    pub sup_b: f64,
}

/// Compares the forward transform of `v(. - y)` with the phase law applied
/// to the transform of `v`.
pub fn verify_shift_lemma(p: &Potential, y: Complex64, kg: &KGrid) -> Result<ShiftLemmaReport> {
    verify_shift_lemma_with(p, y, kg, &SolverSettings::default())
}

pub fn verify_shift_lemma_with(
    p: &Potential,
    y: Complex64,
    kg: &KGrid,
    settings: &SolverSettings,
) -> Result<ShiftLemmaReport> {
    let moved = p.translate(y)?;
    let (base, _) = forward_transform_with(p, kg, settings)?;
    let (direct, _) = forward_transform_with(&moved, kg, settings)?;
    let phased = shift_b(&base, y);
    let max_relative_error = direct
        .values()
        .iter()
        .zip(phased.values())
        .map(|(d, q)| {
            let diff = (d - q).norm();
            if q.norm() > 0.0 {
                diff / q.norm()
            } else {
                diff
            }
        })
        .fold(0.0, f64::max);
    Ok(ShiftLemmaReport {
        y,
        max_relative_error,
        sup_b: base.sup_norm(),
    })
}

/// Largest nearest-neighbour jump of `b` over the median jump. Returns `0`
/// when all jumps vanish.
pub fn continuity_ratio(s: &ScatteringData) -> f64 {
    let m = s.kgrid.size();
    let b = s.values();
    let mut jumps = Vec::with_capacity(2 * m * m);
    for p in 0..m {
        for q in 0..m {
            let here = b[p * m + q];
            if p + 1 < m {
                jumps.push((b[(p + 1) * m + q] - here).norm());
            }
            if q + 1 < m {
                jumps.push((b[p * m + q + 1] - here).norm());
            }
        }
    }
    jumps.sort_by(|a, c| a.total_cmp(c));
    let median = jumps[jumps.len() / 2];
    let max = *jumps.last().unwrap_or(&0.0);
    if max == 0.0 {
        0.0
    } else {
        max / median
    }
}

/// Compares coarse data with fine data (same `K`, twice the `M`) interpolated
/// to the coarse nodes by six-point midpoint interpolation on each axis.
/// Returns the largest difference over interior coarse nodes relative to the
/// coarse sup-norm.
pub fn refinement_discrepancy(coarse: &ScatteringData, fine: &ScatteringData) -> Result<f64> {
    let (cg, fg) = (coarse.kgrid, fine.kgrid);
    if fg.size() != 2 * cg.size() || (fg.half_width() - cg.half_width()).abs() > 1e-12 {
        return Err(NvsError::InvalidGrid("fine grid must have the same K and twice the M".into()));
    }
    let (mc, mf) = (cg.size(), fg.size());
    let fb = fine.values();
    let cb = coarse.values();
    // Coarse node p sits midway between fine nodes 2p and 2p + 1.
    let weights = [3.0, -25.0, 150.0, 150.0, -25.0, 3.0].map(|w: f64| w / 256.0);
    let mut worst: f64 = 0.0;
    for p in 2..mc - 2 {
        for q in 2..mc - 2 {
            let mut interp = Complex64::default();
            for (a, wa) in weights.iter().enumerate() {
                for (c, wc) in weights.iter().enumerate() {
                    let fp = 2 * p + a - 2;
                    let fq = 2 * q + c - 2;
                    interp += wa * wc * fb[fp * mf + fq];
                }
            }
            worst = worst.max((interp - cb[p * mc + q]).norm());
        }
    }
    let scale = coarse.sup_norm();
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductivity::{bump_gamma, potential_from_gamma};
    use crate::faddeev::{solve_mu, SolveMethod};
    use crate::grid::{make_grid, ComplexField};
    use crate::oracle::{brute_b, dense_mu};

    fn bump(n: usize) -> Potential {
        let g = make_grid(8.0, n).unwrap();
        let mut p = potential_from_gamma(&bump_gamma(g, 1.0, 1.0, Complex64::default()).unwrap()).unwrap();
        let q = 1e3 * p.values().sup_norm();
        assert!(p.verify_decay(q, 0.5));
        p
    }

    fn sample(kg: KGrid) -> ScatteringData {
        let b = kg
            .nodes()
            .map(|k| Complex64::new(1.0 / (1.0 + k.norm_sqr()), 0.3 * k.re))
            .collect();
        ScatteringData::synthetic(kg, b, "sample").unwrap()
    }

    #[test]
    fn kgrid_layout() {
        let kg = KGrid::new(2.0, 16).unwrap();
        assert_eq!(kg.spacing(), 0.25);
        assert_eq!(kg.node(0, 0), Complex64::new(-1.875, -1.875));
        assert_eq!(kg.node_at(17), Complex64::new(-1.625, -1.625));
        assert!(kg.nodes().all(|k| k.norm() >= kg.k_min() && k.norm() > 0.0));
        for i in 0..kg.len() {
            assert_eq!(kg.node_at(kg.mirror(i)), -kg.node_at(i));
        }
        assert!(KGrid::new(2.0, 15).is_err());
        assert!(KGrid::new(2.0, 64).is_err());
        assert!(KGrid::with_min(2.0, 64, 0.04).is_ok());
    }

    #[test]
    fn leaking_potential_is_rejected() {
        let g = make_grid(4.0, 16).unwrap();
        let p = Potential::new(ComplexField::constant(g, 0.1.into())).unwrap();
        assert!(matches!(
            forward_transform(&p, &KGrid::new(2.0, 4).unwrap()),
            Err(NvsError::BoundaryLeakage { .. })
        ));
    }

    #[test]
    fn zero_potential_has_zero_data() {
        let g = make_grid(8.0, 32).unwrap();
        let s = forward_transform(&Potential::zero(g), &KGrid::new(2.0, 4).unwrap()).unwrap();
        assert!(s.values().iter().all(|b| *b == Complex64::default()));
    }

    #[test]
    fn compute_b_matches_brute_force_and_bounds() {
        let p = bump(32);
        let k = SpectralParameter::new(Complex64::new(0.5, 0.0)).unwrap();
        let f = solve_mu(&p, k, SolveMethod::Iterative).unwrap();
        let b = compute_b(&p, &f).unwrap();
        let dense = dense_mu(&p, k).unwrap();
        let brute = brute_b(&p, &dense, k.value());
        assert!((b - brute).norm() <= 1e-8);
        let same_path = brute_b(&p, &f.mu, k.value());
        assert!((b - same_path).norm() <= 1e-12 * b.norm().max(1.0));
        let bound = integrate(&(p.values() * &f.mu).map(|x| x.norm().into())).re;
        assert!(b.norm() <= bound);
    }

    #[test]
    fn compute_b_checks_provenance() {
        let p = bump(32);
        let other = Potential::zero(p.grid());
        let k = SpectralParameter::new(Complex64::new(0.5, 0.0)).unwrap();
        let f = solve_mu(&other, k, SolveMethod::Iterative).unwrap();
        assert!(matches!(compute_b(&p, &f), Err(NvsError::ProvenanceMismatch(_))));
    }

    #[test]
    fn phase_laws() {
        let kg = KGrid::new(2.0, 8).unwrap();
        let s = sample(kg);
        assert_eq!(shift_b(&s, Complex64::default()).values(), s.values());
        assert_eq!(evolve_b(&s, 0.0).values(), s.values());
        let (y1, y2) = (Complex64::new(0.3, -1.2), Complex64::new(-0.7, 0.4));
        let a = shift_b(&shift_b(&s, y1), y2).values();
        let b = shift_b(&s, y1 + y2).values();
        for ((x, w), orig) in a.iter().zip(&b).zip(s.values()) {
            assert!((x - w).norm() <= 1e-15 * orig.norm().max(1.0) * 4.0);
            assert!((x.norm() - orig.norm()).abs() <= 1e-15 * orig.norm().max(1.0) * 4.0);
        }
        let e = evolve_b(&evolve_b(&s, 0.7), 2.3).values();
        let f = evolve_b(&s, 3.0).values();
        assert_eq!(e, f);
        for t in [0.1, 1.0, 10.0] {
            for (x, orig) in evolve_b(&s, t).values().iter().zip(s.values()) {
                assert!((x.norm() - orig.norm()).abs() <= 4.0 * f64::EPSILON * orig.norm());
            }
        }
        let y = Complex64::new(1.0, 0.5);
        let one = evolve_b(&shift_b(&s, y), 1.5).values();
        let two = shift_b(&evolve_b(&s, 1.5), y).values();
        for (x, w) in one.iter().zip(&two) {
            assert!((x - w).norm() <= 1e-12);
        }
    }

    #[test]
    fn continuity_and_refinement_proxies() {
        let p = bump(64);
        let coarse = forward_transform(&p, &KGrid::new(2.0, 16).unwrap()).unwrap();
        let fine = forward_transform(&p, &KGrid::with_min(2.0, 32, 0.05).unwrap()).unwrap();
        assert!(continuity_ratio(&fine) <= 5.0, "ratio {}", continuity_ratio(&fine));
        let d = refinement_discrepancy(&coarse, &fine).unwrap();
        assert!(d <= 1e-3, "discrepancy {d:e}");
        assert!(refinement_discrepancy(&fine, &coarse).is_err());
    }

    #[test]
    fn shift_lemma_trivial_and_reference() {
        let p = bump(32);
        let kg = KGrid::new(2.0, 4).unwrap();
        let zero = verify_shift_lemma(&p, Complex64::default(), &kg).unwrap();
        assert!(zero.max_relative_error <= 1e-10);
        let y = Complex64::new(1.0, 0.5);
        let fwd = verify_shift_lemma(&p, y, &kg).unwrap();
        let back = verify_shift_lemma(&p, -y, &kg).unwrap();
        assert!(fwd.max_relative_error <= 1e-3);
        let (a, b) = (fwd.max_relative_error.max(1e-14), back.max_relative_error.max(1e-14));
        assert!(a <= 2.0 * b && b <= 2.0 * a, "{a:e} vs {b:e}");
    }

    #[test]
    fn forward_is_parallel_deterministic() {
        let p = bump(32);
        let kg = KGrid::new(2.0, 4).unwrap();
        let a = forward_transform(&p, &kg).unwrap();
        let b = forward_transform(&p, &kg).unwrap();
        assert_eq!(a, b);
    }
}
