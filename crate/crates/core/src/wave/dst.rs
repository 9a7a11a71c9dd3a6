//! Type-I discrete sine transforms on the collocation grid `x_m = m pi/(M+1)`.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Cached DST-I of size `M` (grid points `x_m`, `m = 1..M`), realized by an
/// odd extension and one complex FFT of length `2(M+1)`.
pub struct SineTransform {
    pub m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    pub fn new(m: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * (m + 1));
        SineTransform { m, fft }
    }

    /// `S_k = sum_{j=1}^{M} f_j sin(j k pi / (M+1))`, `k = 1..M`.
    pub fn dst1(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.m);
        let l = 2 * (self.m + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); l];
        for (j, &v) in f.iter().enumerate() {
            buf[j + 1].re = v;
            buf[l - j - 1].re = -v;
        }
        self.fft.process(&mut buf);
        (1..=self.m).map(|k| -0.5 * buf[k].im).collect()
    }

    /// Collocation points `x_m = m pi / (M+1)`.
    pub fn points(&self) -> Vec<f64> {
        (1..=self.m).map(|i| i as f64 * std::f64::consts::PI / (self.m + 1) as f64).collect()
    }

    /// Quadrature weight of the grid: `integral f = w sum_m f(x_m)` for
    /// band-limited integrands.
    pub fn quadrature_weight(&self) -> f64 {
        std::f64::consts::PI / (self.m + 1) as f64
    }
}

/// Orthonormal sine basis bridge for a `J`-mode solution on an `M`-point
/// grid (`M >= J`): `e_j(x) = sqrt(2/pi) sin(j x)`.
pub struct SpectralGrid {
    pub modes: usize,
    pub transform: SineTransform,
}

impl SpectralGrid {
    pub fn new(modes: usize, grid_points: usize) -> Self {
        assert!(grid_points >= modes);
        SpectralGrid { modes, transform: SineTransform::new(grid_points) }
    }

    /// Grid values from basis coefficients.
    pub fn to_grid(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut padded = vec![0.0; self.transform.m];
        padded[..self.modes].copy_from_slice(coeffs);
        let scale = (2.0 / std::f64::consts::PI).sqrt();
        self.transform.dst1(&padded).into_iter().map(|v| scale * v).collect()
    }

    /// Basis coefficients of grid values (exact for band `<= M`).
    pub fn to_coeffs(&self, grid: &[f64]) -> Vec<f64> {
        let scale = (2.0 * std::f64::consts::PI).sqrt() / (self.transform.m + 1) as f64;
        let full = self.transform.dst1(grid);
        full[..self.modes].iter().map(|v| scale * v).collect()
    }
}
