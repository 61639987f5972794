//! Experiment orchestration driven by [`ExperimentConfig`].

use nvs_core::conductivity::{bump_gamma_with_floor, compute_w, Conductivity, Potential};
use nvs_core::dbar::{invert, DbarSettings, Inversion};
use nvs_core::faddeev::Diagnostics;
use nvs_core::grid::{boundary_leakage, make_grid, ComplexField, GridSpec};
use nvs_core::io::{encode_field, encode_scattering, field_to_csv, scattering_to_csv};
use nvs_core::nvdyn::{certificate_from_data, velocity_box, SolitonCertificate};
use nvs_core::scattering::{
    continuity_ratio, evolve_b, forward_transform_with, shift_b, verify_shift_lemma_with, KGrid, ScatteringData,
};
use nvs_core::{potential_from_gamma, NvsError};
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::report::{write_bytes, ArtifactSet, Check, Report};
use crate::Result;

/// Soliton floors must exceed this multiple of `sup|b| * median|gap|`.
pub const SOLITON_FLOOR_FACTOR: f64 = 1e-6;

pub const REPORT_FILE: &str = "report.json";

pub fn conductivity(cfg: &ExperimentConfig) -> Result<Conductivity> {
    let grid = make_grid(cfg.grid.half_width, cfg.grid.size)?;
    let c = &cfg.conductivity;
    Ok(bump_gamma_with_floor(grid, c.amplitude, c.width, cfg.center(), c.floor)?)
}

/// `q` defaults to `1e3 sup|v|` (or 1 for `v = 0`).
pub fn decay_bound(cfg: &ExperimentConfig, p: &Potential) -> f64 {
    cfg.decay.q.unwrap_or_else(|| {
        let sup = p.values().sup_norm();
        if sup > 0.0 {
            1e3 * sup
        } else {
            1.0
        }
    })
}

/// Potential with its decay certificate attached.
pub fn certified_potential(cfg: &ExperimentConfig, gamma: &Conductivity) -> Result<Potential> {
    let mut p = potential_from_gamma(gamma)?;
    let q = decay_bound(cfg, &p);
    if !p.verify_decay(q, cfg.decay.epsilon) {
        return Err(NvsError::Precondition(format!(
            "potential violates |v| <= {q:e} (1 + |z|)^(-2-{})",
            cfg.decay.epsilon
        ))
        .into());
    }
    Ok(p)
}

pub fn kgrid(cfg: &ExperimentConfig) -> Result<KGrid> {
    Ok(KGrid::with_min(cfg.kgrid.half_width, cfg.kgrid.size, cfg.kgrid.k_min)?)
}

pub fn dbar_settings(cfg: &ExperimentConfig) -> DbarSettings {
    DbarSettings {
        radius: cfg.dbar.radius,
        gmres: nvs_core::krylov::GmresSettings {
            tolerance: cfg.dbar.tolerance,
            max_iterations: cfg.dbar.max_iterations,
            restart: cfg.dbar.restart,
        },
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    artifacts: ArtifactSet,
    checks: Vec<Check>,
    diagnostics: serde_json::Map<String, Value>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            artifacts: ArtifactSet::default(),
            checks: Vec::new(),
            diagnostics: serde_json::Map::new(),
        }
    }

    fn field(&mut self, name: &str, f: &ComplexField) {
        self.artifacts.add(name, &format!("{name}.nvs1"), encode_field(f));
        self.artifacts.add(&format!("{name}_csv"), &format!("{name}.csv"), field_to_csv(f).into_bytes());
    }

    fn scattering(&mut self, name: &str, s: &ScatteringData) {
        self.artifacts.add(name, &format!("{name}.nvb1"), encode_scattering(s));
        self.artifacts
            .add(&format!("{name}_csv"), &format!("{name}.csv"), scattering_to_csv(s).into_bytes());
    }

    fn note(&mut self, key: &str, value: Value) {
        self.diagnostics.insert(key.to_string(), value);
    }

    fn gamma(&mut self) -> Result<Conductivity> {
        let gamma = conductivity(self.cfg)?;
        let values: Vec<f64> = gamma.gamma().values().iter().map(|v| v.re).collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.note("gamma", json!({ "min": min, "max": max, "floor": gamma.floor() }));
        Ok(gamma)
    }

    fn potential(&mut self, gamma: &Conductivity) -> Result<Potential> {
        let p = certified_potential(self.cfg, gamma)?;
        let cert = p.certificate().expect("certified");
        self.note(
            "potential",
            json!({
                "sup_v": p.values().sup_norm(),
                "leakage": boundary_leakage(p.values()),
                "decay_q": cert.q,
                "decay_epsilon": cert.epsilon,
                "fingerprint": p.fingerprint(),
            }),
        );
        Ok(p)
    }

    fn forward(&mut self, p: &Potential) -> Result<ScatteringData> {
        let kg = kgrid(self.cfg)?;
        let (s, diag) = forward_transform_with(p, &kg, &self.cfg.solver.settings())?;
        let worst = |f: fn(&Diagnostics) -> f64| diag.iter().map(f).fold(0.0, f64::max);
        let pde = worst(|d| d.pde_residual);
        let boundary = worst(|d| d.boundary_deviation);
        let iterations = diag.iter().map(|d| d.solver_iterations).max().unwrap_or(0);
        self.note(
            "forward",
            json!({
                "nodes": kg.len(),
                "sup_b": s.sup_norm(),
                "max_pde_residual": pde,
                "max_boundary_deviation": boundary,
                "max_solver_iterations": iterations,
                "max_solver_residual": worst(|d| d.solver_residual),
                "continuity_ratio": continuity_ratio(&s),
            }),
        );
        let tol = &self.cfg.tolerances;
        self.checks.push(Check::at_most("pde_residual", pde, tol.pde_residual));
        self.checks
            .push(Check::at_most("boundary_deviation", boundary, tol.boundary_deviation));
        Ok(s)
    }

    fn invert(&mut self, s: &ScatteringData, spec: GridSpec) -> Result<Inversion> {
        let inv = invert(s, spec, &dbar_settings(self.cfg), &[])?;
        self.note(
            "inversion",
            json!({
                "imaginary_residue": inv.imaginary_residue,
                "positive": inv.positive,
                "max_iterations": inv.max_iterations,
                "max_solver_residual": inv.max_solver_residual,
                "max_kbar_residual": inv.max_kbar_residual,
                "max_mu_deviation": inv.max_mu_deviation,
            }),
        );
        self.checks.push(Check::at_most(
            "imaginary_residue",
            inv.imaginary_residue,
            self.cfg.tolerances.imaginary_residue,
        ));
        Ok(inv)
    }

    fn data(&mut self) -> Result<(Conductivity, ScatteringData)> {
        let gamma = self.gamma()?;
        let p = self.potential(&gamma)?;
        let s = self.forward(&p)?;
        Ok((gamma, s))
    }

    fn finish(self) -> Result<Report> {
        let dir = &self.cfg.output_dir;
        let artifacts = self.artifacts.write(dir)?;
        let report = Report {
            experiment: self.cfg.experiment.name().to_string(),
            config: self.cfg.clone(),
            artifacts,
            checks: self.checks,
            diagnostics: Value::Object(self.diagnostics),
        };
        write_bytes(&dir.join(REPORT_FILE), report.to_json().as_bytes())?;
        Ok(report)
    }
}

/// Runs the selected experiment, writes its artifacts and `report.json`
/// into the output directory, and returns the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let mut run = Run::new(cfg);
    match cfg.experiment {
        Experiment::GenConductivity => {
            let gamma = run.gamma()?;
            run.field("gamma", gamma.gamma());
        }
        Experiment::Potential => {
            let gamma = run.gamma()?;
            let p = run.potential(&gamma)?;
            let w = compute_w(&p)?;
            run.note(
                "w",
                json!({ "residual": w.residual, "far_field_ratio": w.far_field_ratio, "accepted": w.is_accepted() }),
            );
            run.field("v", p.values());
            run.field("w", &w.w);
        }
        Experiment::Forward => {
            let (_, s) = run.data()?;
            run.scattering("b", &s);
        }
        Experiment::Shift => {
            let (_, s) = run.data()?;
            let moved = shift_b(&s, cfg.shift_vector());
            run.scattering("b", &s);
            run.scattering("b_shifted", &moved);
        }
        Experiment::Evolve => {
            let (_, s) = run.data()?;
            let later = evolve_b(&s, cfg.time);
            let modulus = s
                .values()
                .iter()
                .zip(later.values())
                .map(|(a, b)| (a.norm() - b.norm()).abs())
                .fold(0.0, f64::max);
            run.note("evolution", json!({ "time": cfg.time, "max_modulus_change": modulus }));
            run.scattering("b", &s);
            run.scattering("b_evolved", &later);
        }
        Experiment::VerifyShift => {
            let gamma = run.gamma()?;
            let p = run.potential(&gamma)?;
            let kg = kgrid(cfg)?;
            let r = verify_shift_lemma_with(&p, cfg.shift_vector(), &kg, &cfg.solver.settings())?;
            run.note("shift_lemma", serde_json::to_value(&r).expect("serializable"));
            run.checks.push(Check::at_most(
                "shift_lemma",
                r.max_relative_error,
                cfg.tolerances.shift_lemma,
            ));
        }
        Experiment::Invert => {
            let (gamma, s) = run.data()?;
            let inv = run.invert(&s, gamma.grid())?;
            run.field("gamma_sqrt_rec", &inv.gamma_sqrt);
        }
        Experiment::Liouville => {
            let (gamma, s) = run.data()?;
            let sup = s.sup_norm();
            let eps = cfg.liouville_epsilon;
            let small = if sup > 0.0 { s.scaled((eps / sup).into()) } else { s };
            let r = nvs_core::dbar::liouville_certificate(&small, eps * (1.0 + 1e-9), gamma.grid())?;
            run.note("liouville", serde_json::to_value(&r).expect("serializable"));
            run.scattering("b_small", &small);
        }
        Experiment::SolitonCertificate => {
            let (_, s) = run.data()?;
            let vb = &cfg.velocity_box;
            let c_grid = velocity_box(vb.lo, vb.hi, vb.samples)?;
            let cert = certificate_from_data(&s, &c_grid)?;
            record_certificate(&mut run, &cert);
            run.artifacts
                .add("velocity_samples_csv", "velocity_samples.csv", certificate_csv(&cert).into_bytes());
        }
        Experiment::Roundtrip => {
            let (gamma, s) = run.data()?;
            let inv = run.invert(&s, gamma.grid())?;
            let truth = gamma.sqrt();
            let err = (&inv.gamma_sqrt - &truth).l2_norm() / truth.l2_norm();
            let sup_err = (&inv.gamma_sqrt - &truth).sup_norm();
            run.note("roundtrip", json!({ "relative_l2_error": err, "sup_error": sup_err }));
            run.checks.push(Check::at_most("roundtrip", err, cfg.tolerances.roundtrip));
            run.scattering("b", &s);
            run.field("gamma_sqrt_rec", &inv.gamma_sqrt);
        }
    }
    run.finish()
}

fn record_certificate(run: &mut Run, cert: &SolitonCertificate) {
    let threshold = SOLITON_FLOOR_FACTOR * cert.sup_b * cert.median_phase_gap;
    run.note(
        "soliton_certificate",
        json!({
            "floor": cert.floor,
            "argmin": [cert.argmin.re, cert.argmin.im],
            "sup_b": cert.sup_b,
            "median_phase_gap": cert.median_phase_gap,
            "threshold": threshold,
            "excludes_solitons": cert.excludes_solitons(),
        }),
    );
    if cert.sup_b > 0.0 {
        run.checks.push(Check::above("soliton_floor", cert.floor, threshold));
    }
}

/// `c1,c2,sup_res,l2_res` rows in velocity order.
pub fn certificate_csv(cert: &SolitonCertificate) -> String {
    let mut out = String::from("c1,c2,sup_res,l2_res\n");
    for s in &cert.samples {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s.c.re, s.c.im, s.residual.sup_residual, s.residual.l2_residual
        ));
    }
    out
}
