//! Subcommand definitions and their file-level implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use nvs_core::conductivity::{bump_gamma_with_floor, compute_w, Conductivity, Potential, DEFAULT_FLOOR};
use nvs_core::dbar::{invert, liouville_certificate, nearest_node, reconstruct_v, DbarSettings};
use nvs_core::faddeev::{solve_mu_with, SolveMethod, SolverSettings, SpectralParameter, DEFAULT_K_MIN};
use nvs_core::grid::{make_grid, ComplexField};
use nvs_core::io::{decode_field, decode_scattering, encode_field, encode_scattering, export_csv};
use nvs_core::nvdyn::{certificate_from_data, velocity_box};
use nvs_core::oracle::{born_series, brute_b, dense_mu};
use nvs_core::scattering::{evolve_b, forward_transform_with, shift_b, verify_shift_lemma_with, KGrid, ScatteringData};
use nvs_core::potential_from_gamma;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::experiment::{certificate_csv, run_experiment};
use crate::report::{read_bytes, write_bytes};
use crate::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "nvs", version, about = "Zero-energy scattering transform and Novikov-Veselov dynamics")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian-bump conductivity on a square grid.
    GenConductivity(GenConductivity),
    /// Schrodinger potential of a conductivity.
    Potential(PotentialCmd),
    /// Solve for the Faddeev field at one spectral parameter.
    Mu(MuCmd),
    /// Scattering data on a k-grid.
    Forward(ForwardCmd),
    /// Apply the translation phase to scattering data.
    Shift(ShiftCmd),
    /// Evolve scattering data in time.
    Evolve(EvolveCmd),
    /// Compare the transform of a translated potential with the phase law.
    VerifyShift(VerifyShiftCmd),
    /// Reconstruct the conductivity from scattering data.
    Invert(InvertCmd),
    /// Small-data certificate: mu close to 1 and v close to 0.
    Liouville(LiouvilleCmd),
    /// Traveling-wave residual floor over a box of velocities.
    SolitonCertificate(SolitonCmd),
    /// Text export of an NVS1 or NVB1 file.
    ExportCsv(ExportCsvCmd),
    /// Run an experiment from a JSON config.
    Run(RunCmd),
    #[command(subcommand, hide = true)]
    Oracle(OracleCmd),
}

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im but got {s:?}"))?;
    let part = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok(Complex64::new(part(re)?, part(im)?))
}

#[derive(Debug, Args)]
pub struct GenConductivity {
    #[arg(long = "A", allow_hyphen_values = true)]
    pub amplitude: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, value_parser = parse_complex, default_value = "0,0", allow_hyphen_values = true)]
    pub center: Complex64,
    #[arg(long = "L")]
    pub half_width: f64,
    #[arg(long = "N")]
    pub size: usize,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub delta0: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PotentialCmd {
    #[arg(long)]
    pub gamma: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Check `|v| <= q (1 + |z|)^(-2-eps)`.
    #[arg(long, num_args = 2, value_names = ["Q", "EPS"])]
    pub verify_decay: Option<Vec<f64>>,
    #[arg(long)]
    pub emit_w: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub delta0: f64,
}

/// Decay bound applied when a potential file is loaded.
#[derive(Debug, Args)]
pub struct DecayArgs {
    /// Defaults to 1e3 sup|v|.
    #[arg(long)]
    pub decay_q: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub decay_eps: f64,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value = "iterative")]
    pub method: SolveMethod,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        let mut s = SolverSettings {
            method: self.method,
            ..SolverSettings::default()
        };
        if let Some(t) = self.tolerance {
            s.gmres.tolerance = t;
        }
        if let Some(m) = self.max_iterations {
            s.gmres.max_iterations = m;
        }
        s
    }
}

#[derive(Debug, Args)]
pub struct KGridArgs {
    #[arg(long = "K", default_value_t = 2.0)]
    pub half_width: f64,
    #[arg(long = "M", default_value_t = 16)]
    pub size: usize,
    #[arg(long, default_value_t = DEFAULT_K_MIN)]
    pub k_min: f64,
}

impl KGridArgs {
    fn kgrid(&self) -> Result<KGrid> {
        Ok(KGrid::with_min(self.half_width, self.size, self.k_min)?)
    }
}

#[derive(Debug, Args)]
pub struct MuCmd {
    #[arg(long)]
    pub v: PathBuf,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub k: Complex64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = DEFAULT_K_MIN)]
    pub k_min: f64,
}

#[derive(Debug, Args)]
pub struct ForwardCmd {
    #[arg(long)]
    pub v: PathBuf,
    #[command(flatten)]
    pub kgrid: KGridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub decay: DecayArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShiftCmd {
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub y: Complex64,
    /// Defaults to the input path with a `.shifted.nvb1` suffix.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveCmd {
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    /// Defaults to the input path with a `.evolved.nvb1` suffix.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyShiftCmd {
    #[arg(long)]
    pub v: PathBuf,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub y: Complex64,
    #[command(flatten)]
    pub kgrid: KGridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub decay: DecayArgs,
}

#[derive(Debug, Args)]
pub struct InvertCmd {
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long = "L")]
    pub half_width: f64,
    #[arg(long = "N")]
    pub size: usize,
    /// Writes `gamma` (the square of the reconstructed `gamma^1/2`).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub emit_v: Option<PathBuf>,
    #[arg(long = "R")]
    pub radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LiouvilleCmd {
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "L", default_value_t = 8.0)]
    pub half_width: f64,
    #[arg(long = "N", default_value_t = 32)]
    pub size: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolitonCmd {
    #[arg(long)]
    pub v: PathBuf,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [-10.0, 10.0], allow_hyphen_values = true)]
    pub cbox: Vec<f64>,
    #[arg(long, default_value_t = 21)]
    pub csamples: usize,
    #[command(flatten)]
    pub kgrid: KGridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub decay: DecayArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-velocity residuals as `c1,c2,sup_res,l2_res`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportCsvCmd {
    pub input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunCmd {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OracleCmd {
    /// Dense solve of the Faddeev equation.
    Dense {
        #[arg(long)]
        v: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        k: Complex64,
    },
    /// Partial sums of the Neumann series.
    Born {
        #[arg(long)]
        v: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        k: Complex64,
        #[arg(long, default_value_t = 8)]
        orders: usize,
    },
    /// Direct quadrature of b(k) from an iterative solve.
    BruteB {
        #[arg(long)]
        v: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        k: Complex64,
    },
}

fn load_field(path: &Path) -> Result<ComplexField> {
    Ok(decode_field(&read_bytes(path)?)?)
}

fn load_scattering(path: &Path) -> Result<ScatteringData> {
    Ok(decode_scattering(&read_bytes(path)?)?)
}

fn load_potential(path: &Path, decay: &DecayArgs) -> Result<Potential> {
    let mut p = Potential::new(load_field(path)?)?;
    let sup = p.values().sup_norm();
    let q = decay.decay_q.unwrap_or(if sup > 0.0 { 1e3 * sup } else { 1.0 });
    if !p.verify_decay(q, decay.decay_eps) {
        return Err(nvs_core::NvsError::Precondition(format!(
            "potential violates |v| <= {q:e} (1 + |z|)^(-2-{})",
            decay.decay_eps
        ))
        .into());
    }
    Ok(p)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn emit(value: serde_json::Value) {
    println!("{value}");
}

fn emit_report(value: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        let mut text = serde_json::to_string_pretty(value).expect("json");
        text.push('\n');
        write_bytes(path, text.as_bytes())?;
    }
    emit(value.clone());
    Ok(())
}

fn spectral(k: Complex64, k_min: f64) -> Result<SpectralParameter> {
    Ok(SpectralParameter::with_min(k, k_min)?)
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenConductivity(a) => {
            let grid = make_grid(a.half_width, a.size)?;
            let gamma = bump_gamma_with_floor(grid, a.amplitude, a.sigma, a.center, a.delta0)?;
            write_bytes(&a.out, &encode_field(gamma.gamma()))?;
            emit(json!({ "out": a.out, "sup_gamma": gamma.gamma().sup_norm() }));
        }
        Command::Potential(a) => {
            let gamma = Conductivity::new(load_field(&a.gamma)?, a.delta0)?;
            let mut p = potential_from_gamma(&gamma)?;
            let mut report = json!({ "out": a.out, "sup_v": p.values().sup_norm() });
            if let Some(qe) = &a.verify_decay {
                let ok = p.verify_decay(qe[0], qe[1]);
                if !ok {
                    return Err(nvs_core::NvsError::Precondition(format!(
                        "potential violates |v| <= {:e} (1 + |z|)^(-2-{})",
                        qe[0], qe[1]
                    ))
                    .into());
                }
                report["decay"] = json!({ "q": qe[0], "epsilon": qe[1] });
            }
            let w = a.emit_w.as_ref().map(|_| compute_w(&p)).transpose()?;
            write_bytes(&a.out, &encode_field(p.values()))?;
            if let (Some(path), Some(w)) = (&a.emit_w, w) {
                write_bytes(path, &encode_field(&w.w))?;
                report["w"] = json!({ "residual": w.residual, "far_field_ratio": w.far_field_ratio });
            }
            emit(report);
        }
        Command::Mu(a) => {
            let p = Potential::new(load_field(&a.v)?)?;
            let f = solve_mu_with(&p, spectral(a.k, a.k_min)?, &a.solver.settings())?;
            write_bytes(&a.out, &encode_field(&f.mu))?;
            emit(json!({
                "k": [a.k.re, a.k.im],
                "pde_residual": f.diagnostics.pde_residual,
                "boundary_deviation": f.diagnostics.boundary_deviation,
                "solver_iterations": f.diagnostics.solver_iterations,
                "solver_residual": f.diagnostics.solver_residual,
                "accepted": f.is_accepted(),
            }));
        }
        Command::Forward(a) => {
            let p = load_potential(&a.v, &a.decay)?;
            let (s, diag) = forward_transform_with(&p, &a.kgrid.kgrid()?, &a.solver.settings())?;
            write_bytes(&a.out, &encode_scattering(&s))?;
            let pde = diag.iter().map(|d| d.pde_residual).fold(0.0, f64::max);
            emit(json!({ "out": a.out, "sup_b": s.sup_norm(), "max_pde_residual": pde }));
        }
        Command::Shift(a) => {
            let s = shift_b(&load_scattering(&a.b)?, a.y);
            let out = a.out.unwrap_or_else(|| with_suffix(&a.b, ".shifted.nvb1"));
            write_bytes(&out, &encode_scattering(&s))?;
            emit(json!({ "out": out, "y": [a.y.re, a.y.im] }));
        }
        Command::Evolve(a) => {
            let s = evolve_b(&load_scattering(&a.b)?, a.t);
            let out = a.out.unwrap_or_else(|| with_suffix(&a.b, ".evolved.nvb1"));
            write_bytes(&out, &encode_scattering(&s))?;
            emit(json!({ "out": out, "t": s.time() }));
        }
        Command::VerifyShift(a) => {
            let p = load_potential(&a.v, &a.decay)?;
            let r = verify_shift_lemma_with(&p, a.y, &a.kgrid.kgrid()?, &a.solver.settings())?;
            emit(serde_json::to_value(&r).expect("json"));
        }
        Command::Invert(a) => {
            let s = load_scattering(&a.b)?;
            let spec = make_grid(a.half_width, a.size)?;
            let settings = DbarSettings {
                radius: a.radius,
                ..DbarSettings::default()
            };
            let kg = s.kgrid();
            let kj = nearest_node(&kg, Complex64::new(0.5 * kg.half_width(), 0.0));
            let keep: Vec<usize> = a.emit_v.iter().map(|_| kj).collect();
            let inv = invert(&s, spec, &settings, &keep)?;
            let gamma = inv.gamma_sqrt.map(|g| g * g);
            write_bytes(&a.out, &encode_field(&gamma))?;
            let mut report = json!({
                "out": a.out,
                "imaginary_residue": inv.imaginary_residue,
                "positive": inv.positive,
                "max_iterations": inv.max_iterations,
                "max_kbar_residual": inv.max_kbar_residual,
            });
            if let (Some(path), Some((_, mu))) = (&a.emit_v, inv.slices.first()) {
                let v = reconstruct_v(mu, kg.node_at(kj))?;
                write_bytes(path, &encode_field(v.potential.values()))?;
                report["v_imaginary_residue"] = json!(v.imaginary_residue);
                report["v_masked_fraction"] = json!(v.masked_fraction);
            }
            emit(report);
        }
        Command::Liouville(a) => {
            let s = load_scattering(&a.b)?;
            let r = liouville_certificate(&s, a.tol, make_grid(a.half_width, a.size)?)?;
            emit_report(&serde_json::to_value(&r).expect("json"), a.report.as_deref())?;
        }
        Command::SolitonCertificate(a) => {
            let p = load_potential(&a.v, &a.decay)?;
            let (s, _) = forward_transform_with(&p, &a.kgrid.kgrid()?, &a.solver.settings())?;
            let cert = certificate_from_data(&s, &velocity_box(a.cbox[0], a.cbox[1], a.csamples)?)?;
            if let Some(path) = &a.csv {
                write_bytes(path, certificate_csv(&cert).as_bytes())?;
            }
            let value = json!({
                "floor": cert.floor,
                "argmin": [cert.argmin.re, cert.argmin.im],
                "sup_b": cert.sup_b,
                "median_phase_gap": cert.median_phase_gap,
                "excludes_solitons": cert.excludes_solitons(),
            });
            emit_report(&value, a.report.as_deref())?;
        }
        Command::ExportCsv(a) => {
            let text = export_csv(&read_bytes(&a.input)?)?;
            match &a.out {
                Some(path) => write_bytes(path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Run(a) => {
            let text = std::fs::read_to_string(&a.config).map_err(|e| CliError::io(&a.config, e))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if let Some(dir) = a.output_dir {
                cfg.output_dir = dir;
            }
            let report = run_experiment(&cfg)?;
            emit(json!({
                "experiment": report.experiment,
                "output_dir": cfg.output_dir,
                "passed": report.passed(),
                "checks": report.checks,
            }));
        }
        Command::Oracle(o) => oracle(o)?,
    }
    Ok(())
}

fn oracle(cmd: OracleCmd) -> Result<()> {
    match cmd {
        OracleCmd::Dense { v, k } => {
            let p = Potential::new(load_field(&v)?)?;
            let mu = dense_mu(&p, spectral(k, DEFAULT_K_MIN)?)?;
            emit(json!({ "sup_mu_minus_one": mu.map(|m| m - 1.0).sup_norm() }));
        }
        OracleCmd::Born { v, k, orders } => {
            let p = Potential::new(load_field(&v)?)?;
            let series = born_series(&p, spectral(k, DEFAULT_K_MIN)?, orders)?;
            emit(json!({ "ratios": series.ratios, "sup_mu_minus_one": series.sum.map(|m| m - 1.0).sup_norm() }));
        }
        OracleCmd::BruteB { v, k } => {
            let p = Potential::new(load_field(&v)?)?;
            let f = solve_mu_with(&p, spectral(k, DEFAULT_K_MIN)?, &SolverSettings::default())?;
            let b = brute_b(&p, &f.mu, k);
            emit(json!({ "b": [b.re, b.im] }));
        }
    }
    Ok(())
}
