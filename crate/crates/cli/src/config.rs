//! Experiment configuration, read from and written to JSON.

use std::path::PathBuf;

use num_complex::Complex64;
use nvs_core::conductivity::DEFAULT_FLOOR;
use nvs_core::dbar::{IMAGINARY_TOLERANCE, MAX_MASK_FRACTION, MU_MASK_THRESHOLD};
use nvs_core::faddeev::{
    SolveMethod, SolverSettings, BOUNDARY_DEVIATION_TOLERANCE, DEFAULT_K_MIN, PDE_RESIDUAL_TOLERANCE,
    RESONANCE_THRESHOLD,
};
use nvs_core::grid::{LEAKAGE_THRESHOLD, MIN_GRID_SIZE};
use nvs_core::krylov::GmresSettings;
use nvs_core::nvdyn::ZERO_CURVE_THRESHOLD;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GenConductivity,
    Potential,
    Forward,
    Shift,
    Evolve,
    VerifyShift,
    Invert,
    Liouville,
    SolitonCertificate,
    Roundtrip,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::GenConductivity,
        Experiment::Potential,
        Experiment::Forward,
        Experiment::Shift,
        Experiment::Evolve,
        Experiment::VerifyShift,
        Experiment::Invert,
        Experiment::Liouville,
        Experiment::SolitonCertificate,
        Experiment::Roundtrip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GenConductivity => "gen-conductivity",
            Experiment::Potential => "potential",
            Experiment::Forward => "forward",
            Experiment::Shift => "shift",
            Experiment::Evolve => "evolve",
            Experiment::VerifyShift => "verify-shift",
            Experiment::Invert => "invert",
            Experiment::Liouville => "liouville",
            Experiment::SolitonCertificate => "soliton-certificate",
            Experiment::Roundtrip => "roundtrip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub half_width: f64,
    pub size: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KGridConfig {
    pub half_width: f64,
    pub size: usize,
    pub k_min: f64,
}

impl Default for KGridConfig {
    fn default() -> Self {
        Self {
            half_width: 2.0,
            size: 16,
            k_min: DEFAULT_K_MIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConductivityConfig {
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
    /// Positivity floor `delta0`.
    pub floor: f64,
}

impl Default for ConductivityConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            width: 1.0,
            center: [0.0, 0.0],
            floor: DEFAULT_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: SolveMethod,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let g = GmresSettings::default();
        Self {
            method: SolveMethod::Iterative,
            tolerance: g.tolerance,
            max_iterations: g.max_iterations,
            restart: g.restart,
        }
    }
}

impl SolverConfig {
    pub fn gmres(&self) -> GmresSettings {
        GmresSettings {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            restart: self.restart,
        }
    }

    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            method: self.method,
            gmres: self.gmres(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbarConfig {
    /// Truncation radius; `None` uses the k-grid half width.
    pub radius: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for DbarConfig {
    fn default() -> Self {
        let g = GmresSettings::default();
        Self {
            radius: None,
            tolerance: g.tolerance,
            max_iterations: g.max_iterations,
            restart: g.restart,
        }
    }
}

/// Thresholds applied by the library and by the report checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub pde_residual: f64,
    pub boundary_deviation: f64,
    pub resonance: f64,
    pub leakage: f64,
    pub mu_mask: f64,
    pub max_mask_fraction: f64,
    pub imaginary_residue: f64,
    pub zero_curve: f64,
    pub shift_lemma: f64,
    pub roundtrip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pde_residual: PDE_RESIDUAL_TOLERANCE,
            boundary_deviation: BOUNDARY_DEVIATION_TOLERANCE,
            resonance: RESONANCE_THRESHOLD,
            leakage: LEAKAGE_THRESHOLD,
            mu_mask: MU_MASK_THRESHOLD,
            max_mask_fraction: MAX_MASK_FRACTION,
            imaginary_residue: IMAGINARY_TOLERANCE,
            zero_curve: ZERO_CURVE_THRESHOLD,
            shift_lemma: 1e-3,
            roundtrip: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    /// Bound `q` in `|v| <= q (1 + |z|)^{-2-eps}`; `None` uses `1e3 sup|v|`.
    pub q: Option<f64>,
    pub epsilon: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { q: None, epsilon: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocityBoxConfig {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

impl Default for VelocityBoxConfig {
    fn default() -> Self {
        Self {
            lo: -10.0,
            hi: 10.0,
            samples: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub grid: GridConfig,
    pub kgrid: KGridConfig,
    pub conductivity: ConductivityConfig,
    pub solver: SolverConfig,
    pub dbar: DbarConfig,
    pub decay: DecayConfig,
    /// Translation `y` for shift and verify-shift.
    pub shift: [f64; 2],
    /// Evolution time for evolve.
    pub time: f64,
    /// Sup-norm the data is scaled to for the Liouville certificate.
    pub liouville_epsilon: f64,
    pub velocity_box: VelocityBoxConfig,
    pub tolerances: Tolerances,
    /// Worker threads; 0 picks the number of cores.
    pub threads: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Roundtrip,
            grid: GridConfig::default(),
            kgrid: KGridConfig::default(),
            conductivity: ConductivityConfig::default(),
            solver: SolverConfig::default(),
            dbar: DbarConfig::default(),
            decay: DecayConfig::default(),
            shift: [1.0, 0.5],
            time: 1.0,
            liouville_epsilon: 1e-6,
            velocity_box: VelocityBoxConfig::default(),
            tolerances: Tolerances::default(),
            threads: 0,
            output_dir: PathBuf::from("nvs-out"),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    check(x.is_finite() && x > 0.0, || format!("{name} must be positive and finite, got {x}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn shift_vector(&self) -> Complex64 {
        Complex64::new(self.shift[0], self.shift[1])
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(self.conductivity.center[0], self.conductivity.center[1])
    }

    /// Range checks that do not need the numerical library.
    pub fn validate(&self) -> Result<(), CliError> {
        positive("grid.half_width", self.grid.half_width)?;
        check(
            self.grid.size >= MIN_GRID_SIZE && self.grid.size.is_power_of_two(),
            || format!("grid.size must be a power of two >= {MIN_GRID_SIZE}, got {}", self.grid.size),
        )?;
        positive("kgrid.half_width", self.kgrid.half_width)?;
        check(self.kgrid.size >= 2 && self.kgrid.size % 2 == 0, || {
            format!("kgrid.size must be even and >= 2, got {}", self.kgrid.size)
        })?;
        positive("kgrid.k_min", self.kgrid.k_min)?;
        let c = &self.conductivity;
        check(c.amplitude.is_finite(), || "conductivity.amplitude must be finite".into())?;
        positive("conductivity.width", c.width)?;
        check(c.center.iter().all(|v| v.is_finite()), || "conductivity.center must be finite".into())?;
        positive("conductivity.floor", c.floor)?;
        for (name, tol, iters, restart) in [
            ("solver", self.solver.tolerance, self.solver.max_iterations, self.solver.restart),
            ("dbar", self.dbar.tolerance, self.dbar.max_iterations, self.dbar.restart),
        ] {
            positive(&format!("{name}.tolerance"), tol)?;
            check(iters > 0 && restart > 0, || format!("{name}: iterations and restart must be positive"))?;
        }
        if let Some(r) = self.dbar.radius {
            positive("dbar.radius", r)?;
            check(r <= self.kgrid.half_width, || {
                format!("dbar.radius {r} exceeds the k-grid half width {}", self.kgrid.half_width)
            })?;
        }
        if let Some(q) = self.decay.q {
            positive("decay.q", q)?;
        }
        positive("decay.epsilon", self.decay.epsilon)?;
        check(self.shift.iter().all(|v| v.is_finite()), || "shift must be finite".into())?;
        check(self.time.is_finite(), || "time must be finite".into())?;
        positive("liouville_epsilon", self.liouville_epsilon)?;
        let vb = &self.velocity_box;
        check(vb.lo.is_finite() && vb.hi.is_finite() && vb.lo < vb.hi && vb.samples >= 2, || {
            "velocity_box needs finite lo < hi and samples >= 2".into()
        })?;
        let t = &self.tolerances;
        for (name, v) in [
            ("pde_residual", t.pde_residual),
            ("boundary_deviation", t.boundary_deviation),
            ("resonance", t.resonance),
            ("leakage", t.leakage),
            ("mu_mask", t.mu_mask),
            ("max_mask_fraction", t.max_mask_fraction),
            ("imaginary_residue", t.imaginary_residue),
            ("zero_curve", t.zero_curve),
            ("shift_lemma", t.shift_lemma),
            ("roundtrip", t.roundtrip),
        ] {
            positive(&format!("tolerances.{name}"), v)?;
        }
        check(!self.output_dir.as_os_str().is_empty(), || "output_dir must not be empty".into())?;
        Ok(())
    }
}
