//! Two-dimensional FFT on square row-major arrays.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned forward/inverse transforms for an `n x n` row-major array.
///
/// The inverse is normalized, so `inverse(forward(x)) == x`.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let norm = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|v| *v *= norm);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.n * self.n, "fft2 buffer size");
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, self.n);
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, self.n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Angular frequency of FFT bin `j` for `n` samples at spacing `h`.
///
/// The Nyquist bin maps to the negative frequency `-pi/h`.
pub fn angular_frequency(j: usize, n: usize, h: f64) -> f64 {
    let signed = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
    2.0 * PI * signed / (n as f64 * h)
}

/// True for the Nyquist bin of an even-length transform.
pub fn is_nyquist(j: usize, n: usize) -> bool {
    n % 2 == 0 && j == n / 2
}
