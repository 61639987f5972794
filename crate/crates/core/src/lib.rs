//! Zero-energy scattering transform for two-dimensional conductivity-type
//! potentials: forward map `v -> b` through Faddeev solutions, D-bar
//! inversion `b -> gamma^{1/2}`, Novikov-Veselov time evolution of `b` and
//! the traveling-wave residual.

pub mod error;
pub mod fft;
pub mod grid;
pub mod special;
pub mod krylov;
pub mod conductivity;
mod quadrature;
pub mod faddeev;
pub mod oracle;
pub mod scattering;
pub mod dbar;
pub mod nvdyn;
pub mod io;

pub use conductivity::{bump_gamma, potential_from_gamma, Conductivity, Potential};
pub use dbar::{invert, reconstruct_gamma_sqrt, solve_dbar, DbarSettings, Inversion};
pub use error::{NvsError, Result};
pub use faddeev::{solve_mu, FaddeevField, SolveMethod, SolverSettings, SpectralParameter};
pub use grid::{make_grid, ComplexField, GridSpec};
pub use nvdyn::{phase_gap, soliton_certificate, traveling_wave_residual, Velocity};
pub use scattering::{evolve_b, forward_transform, shift_b, KGrid, ScatteringData};
