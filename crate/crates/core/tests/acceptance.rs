//! End-to-end acceptance run at desk scale. Prints one line per criterion
//! and fails if any criterion fails.

use num_complex::Complex64;
use nvs_core::dbar::{invert, liouville_certificate, reconstruct_v, DbarSettings};
use nvs_core::faddeev::{solve_mu, SolverSettings, SpectralParameter};
use nvs_core::nvdyn::{certificate_from_data, soliton_certificate, velocity_box};
use nvs_core::oracle::{born_series, brute_b, dense_mu, fd_dbar_residual_local};
use nvs_core::scattering::{compute_b, forward_transform_with, verify_shift_lemma};
use nvs_core::{
    bump_gamma, evolve_b, make_grid, potential_from_gamma, ComplexField, Conductivity, KGrid, Potential,
    ScatteringData, SolveMethod,
};

const L: f64 = 8.0;
const K: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference_gamma(n: usize, amplitude: f64) -> Conductivity {
    bump_gamma(make_grid(L, n).unwrap(), amplitude, 1.0, Complex64::default()).unwrap()
}

fn certified(gamma: &Conductivity) -> Potential {
    let mut p = potential_from_gamma(gamma).unwrap();
    let q = 1e3 * p.values().sup_norm().max(1e-300);
    assert!(p.verify_decay(q, 0.5));
    p
}

fn kgrid(m: usize) -> KGrid {
    kgrid_with(K, m)
}

/// Forward data with per-node PDE residuals.
struct Level {
    gamma: Conductivity,
    potential: Potential,
    data: ScatteringData,
    pde: Vec<f64>,
}

fn level(n: usize, m: usize) -> Level {
    let gamma = reference_gamma(n, 1.0);
    let potential = certified(&gamma);
    let (data, diag) = forward_transform_with(&potential, &kgrid(m), &SolverSettings::default()).unwrap();
    Level {
        gamma,
        potential,
        data,
        pde: diag.iter().map(|d| d.pde_residual).collect(),
    }
}

fn trivial_chain() -> Outcome {
    let gamma = reference_gamma(64, 0.0);
    let p = potential_from_gamma(&gamma).unwrap();
    let sup_v = p.values().sup_norm();
    let (s, _) = forward_transform_with(&p, &kgrid(16), &SolverSettings::default()).unwrap();
    let sup_b = s.sup_norm();
    let kj = s.kgrid().len() / 2;
    let inv = invert(&s, gamma.grid(), &DbarSettings::default(), &[kj]).unwrap();
    let sup_mu = inv.max_mu_deviation;
    let v_rec = reconstruct_v(&inv.slices[0].1, s.kgrid().node_at(kj)).unwrap();
    let sup_vrec = v_rec.potential.values().sup_norm();
    let sup_gamma = (&inv.gamma_sqrt - &ComplexField::constant(gamma.grid(), 1.0.into())).sup_norm();
    let worst = sup_v.max(sup_b).max(sup_mu).max(sup_vrec).max(sup_gamma);
    outcome(
        worst <= 1e-10,
        format!("sup|v| {sup_v:.1e}, sup|b| {sup_b:.1e}, sup|mu-1| {sup_mu:.1e}, sup|v_rec| {sup_vrec:.1e}, sup|gamma^1/2-1| {sup_gamma:.1e}"),
    )
}

fn pde_residual(reference: &Level) -> Outcome {
    let worst = reference.pde.iter().copied().fold(0.0, f64::max);
    let over = reference.pde.iter().filter(|r| **r > 1e-6).count();
    outcome(
        worst <= 1e-6,
        format!("max over {} k-nodes {worst:.2e} (tol 1e-6), {over} above tol", reference.pde.len()),
    )
}

fn kgrid_with(half_width: f64, m: usize) -> KGrid {
    let innermost = half_width / m as f64 * std::f64::consts::SQRT_2;
    KGrid::with_min(half_width, m, innermost.min(0.1)).unwrap()
}

fn shift_lemma() -> Outcome {
    let y = Complex64::new(1.0, 0.5);
    let p = |n: usize| certified(&reference_gamma(n, 1.0));
    let reference = verify_shift_lemma(&p(64), y, &kgrid(16)).unwrap().max_relative_error;
    // N = 32 resolves |k| <= 2.36 only; the refinement study uses the
    // reference nodes with |Re k|, |Im k| <= 1.625.
    let sub = kgrid_with(1.75, 14);
    let errors: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| verify_shift_lemma(&p(n), y, &sub).unwrap().max_relative_error)
        .collect();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        reference <= 1e-3 && monotone,
        format!(
            "reference {reference:.2e} (tol 1e-3); inner nodes N=32 {:.2e}, N=64 {:.2e}, N=128 {:.2e} (nonincreasing)",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn evolution(reference: &Level) -> Outcome {
    let s = &reference.data;
    let scale = s.sup_norm();
    let b0 = s.values();
    let mut modulus: f64 = 0.0;
    let mut group: f64 = 0.0;
    let times = [0.1, 1.0, 10.0];
    for t in times {
        for (a, b) in evolve_b(s, t).values().iter().zip(&b0) {
            modulus = modulus.max((a.norm() - b.norm()).abs());
        }
        for t2 in times {
            let composed = evolve_b(&evolve_b(s, t), t2).values();
            let direct = evolve_b(s, t + t2).values();
            for (a, b) in composed.iter().zip(&direct) {
                group = group.max((a - b).norm());
            }
        }
    }
    let (modulus, group) = (modulus / scale, group / scale);
    outcome(
        modulus <= 1e-14 && group <= 1e-13,
        format!("max ||b(t)|-|b(0)|| / sup|b| {modulus:.1e}, group law {group:.1e}"),
    )
}

fn dbar_equation(reference: &Level) -> Outcome {
    let g = reference.potential.grid();
    let z_nodes: Vec<usize> = [(32, 32), (36, 34), (28, 37)].iter().map(|&(m, n)| g.index(m, n)).collect();
    let r = fd_dbar_residual_local(&reference.potential, &reference.data, &z_nodes, 1e-3, &SolverSettings::default())
        .unwrap();
    let worst = r.iter().copied().fold(0.0, f64::max);
    let points: Vec<String> = z_nodes
        .iter()
        .zip(&r)
        .map(|(&i, v)| format!("z={} {v:.2e}", g.node_at(i)))
        .collect();
    outcome(worst <= 1e-3, format!("{} (tol 1e-3)", points.join(", ")))
}

fn roundtrip_error(level: &Level) -> f64 {
    let inv = invert(&level.data, level.gamma.grid(), &DbarSettings::default(), &[]).unwrap();
    let truth = level.gamma.sqrt();
    (&inv.gamma_sqrt - &truth).l2_norm() / truth.l2_norm()
}

fn roundtrip(reference: &Level, refined: &Level) -> Outcome {
    let coarse = roundtrip_error(reference);
    let fine = roundtrip_error(refined);
    outcome(
        coarse <= 0.05 && fine <= coarse,
        format!("(N=64, M=16) {:.2}%, (N=128, M=32) {:.2}% (tol 5%, nonincreasing)", 100.0 * coarse, 100.0 * fine),
    )
}

fn liouville(levels: &[&Level]) -> Outcome {
    let eps = 1e-6;
    let spec = make_grid(L, 32).unwrap();
    let constants: Vec<f64> = levels
        .iter()
        .map(|lv| {
            let s = lv.data.scaled((eps / lv.data.sup_norm()).into());
            liouville_certificate(&s, 1.0001 * eps, spec).unwrap().mu_constant
        })
        .collect();
    let reference = constants[1];
    let stable = constants.iter().all(|c| (c - reference).abs() <= 0.5 * reference);
    let zero = ScatteringData::zero(kgrid(16));
    let exact = invert(&zero, spec, &DbarSettings::default(), &[]).unwrap().max_mu_deviation;
    outcome(
        stable && exact == 0.0,
        format!(
            "C = sup|mu-1|/eps: M=8 {:.4}, M=16 {:.4}, M=32 {:.4} (within 50% of M=16); b=0 gives sup|mu-1| = {exact:e}",
            constants[0], constants[1], constants[2]
        ),
    )
}

fn soliton(reference: &Level) -> Outcome {
    let s = &reference.data;
    let coarse = certificate_from_data(s, &velocity_box(-10.0, 10.0, 21).unwrap()).unwrap();
    let fine = certificate_from_data(s, &velocity_box(-10.0, 10.0, 41).unwrap()).unwrap();
    let threshold = 1e-6 * coarse.sup_b * coarse.median_phase_gap;
    let change = (fine.floor - coarse.floor).abs() / coarse.floor;
    let g = make_grid(L, 64).unwrap();
    let zero = soliton_certificate(&Potential::zero(g), &kgrid(16), &SolverSettings::default(), &velocity_box(-10.0, 10.0, 21).unwrap())
        .unwrap();
    outcome(
        coarse.floor > threshold && change <= 0.2 && zero.floor == 0.0,
        format!(
            "floor {:.4e} at c={} (threshold {threshold:.2e}), 41^2 floor {:.4e} ({:.1}% change), v=0 floor {:e}",
            coarse.floor,
            coarse.argmin,
            fine.floor,
            100.0 * change,
            zero.floor
        ),
    )
}

fn oracles() -> Outcome {
    let p32 = certified(&reference_gamma(32, 1.0));
    let mut dense_gap: f64 = 0.0;
    for k in [Complex64::new(0.5, 0.3), Complex64::new(-1.2, 0.7), Complex64::new(1.9, -1.1)] {
        let k = SpectralParameter::new(k).unwrap();
        let a = solve_mu(&p32, k, SolveMethod::Iterative).unwrap().mu;
        let b = dense_mu(&p32, k).unwrap();
        dense_gap = dense_gap.max((&a - &b).sup_norm());
    }
    let p64 = certified(&reference_gamma(64, 1.0));
    let mut b_gap: f64 = 0.0;
    for k in [Complex64::new(0.8, 0.3), Complex64::new(-1.5, 1.25)] {
        let f = solve_mu(&p64, SpectralParameter::new(k).unwrap(), SolveMethod::Iterative).unwrap();
        let fast = compute_b(&p64, &f).unwrap();
        let slow = brute_b(&p64, &f.mu, k);
        b_gap = b_gap.max((fast - slow).norm() / slow.norm());
    }
    let weak = certified(&reference_gamma(64, 0.01));
    let mut born: f64 = 0.0;
    for k in [Complex64::new(2.0, 0.0), Complex64::new(1.2, 0.9), Complex64::new(-0.5, 2.5)] {
        let k = SpectralParameter::new(k).unwrap();
        let mu = solve_mu(&weak, k, SolveMethod::Iterative).unwrap().mu;
        let first = born_series(&weak, k, 1).unwrap().sum;
        let one = ComplexField::constant(weak.grid(), 1.0.into());
        born = born.max((&mu - &first).l2_norm() / (&first - &one).l2_norm());
    }
    outcome(
        dense_gap <= 1e-8 && b_gap <= 1e-12 && born <= 1e-3,
        format!("iterative vs dense {dense_gap:.1e} (tol 1e-8), compute_b vs brute_b {b_gap:.1e} (tol 1e-12), Born gap {born:.1e} (tol 1e-3)"),
    )
}

#[test]
fn acceptance_criteria() {
    let coarse = level(64, 8);
    let reference = level(64, 16);
    let refined = level(128, 32);
    let results = [
        ("1 trivial conductivity chain", trivial_chain()),
        ("2 Faddeev PDE residual", pde_residual(&reference)),
        ("3 shift lemma", shift_lemma()),
        ("4 time evolution", evolution(&reference)),
        ("5 d-bar equation", dbar_equation(&reference)),
        ("6 round trip", roundtrip(&reference, &refined)),
        ("7 Liouville certificate", liouville(&[&coarse, &reference, &refined])),
        ("8 soliton absence", soliton(&reference)),
        ("9 oracle equivalence", oracles()),
    ];
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
