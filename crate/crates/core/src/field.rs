//! Uniform transverse grids and sampled complex fields.
//!
//! Every integral in the crate is a trapezoidal sum over a [`TransverseGrid`];
//! fields are expected to vanish at the window edges, which makes the rule
//! spectrally accurate for the smooth parts of the integrand.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Uniform sampling of the transverse coordinate `x` (micrometres).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseGrid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl TransverseGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!("window [{x_min}, {x_max}] is empty or not finite")));
        }
        if n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!("{n_points} points, need at least {}", Self::MIN_POINTS)));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    /// Grid symmetric about `x = 0`.
    pub fn centered(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the sample nearest to `x`, clamped to the window.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx()).round();
        i.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Grids are compatible when their sampling is identical to rounding.
    pub fn matches(&self, other: &TransverseGrid) -> bool {
        let tol = 1e-9 * self.dx();
        self.n_points == other.n_points && (self.x_min - other.x_min).abs() <= tol && (self.x_max - other.x_max).abs() <= tol
    }

    /// Trapezoidal integral of real samples.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        trapezoid(values, self.dx())
    }

    /// Trapezoidal integral of complex samples.
    pub fn integrate_complex(&self, values: &[C64]) -> C64 {
        let n = values.len();
        if n == 0 {
            return C64::new(0.0, 0.0);
        }
        let inner: C64 = values.iter().sum();
        (inner - 0.5 * (values[0] + values[n - 1])) * self.dx()
    }
}

fn trapezoid(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let inner: f64 = values.iter().sum();
    (inner - 0.5 * (values[0] + values[n - 1])) * dx
}

/// Complex samples of a transverse field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: TransverseGrid,
    samples: Vec<C64>,
}

impl ComplexField {
    pub fn new(grid: TransverseGrid, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} samples on a {}-point grid", samples.len(), grid.len())));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: TransverseGrid) -> Self {
        Self { grid, samples: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: TransverseGrid, f: impl Fn(f64) -> C64) -> Self {
        let samples = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        Self { grid, samples }
    }

    pub fn from_real(grid: TransverseGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm_sqr()).collect()
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { grid: self.grid, samples: self.samples.iter().map(|&s| s * factor).collect() }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: C64, other: &ComplexField) -> Result<Self> {
        self.check_grid(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(&a, &b)| a + factor * b).collect();
        Ok(Self { grid: self.grid, samples })
    }

    fn check_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid.matches(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "[{}, {}]/{} vs [{}, {}]/{}",
                self.grid.x_min, self.grid.x_max, self.grid.n_points, other.grid.x_min, other.grid.x_max, other.grid.n_points
            )))
        }
    }
}

/// `∫ f*(x) g(x) dx`.
pub fn overlap(f: &ComplexField, g: &ComplexField) -> Result<C64> {
    f.check_grid(g)?;
    let products: Vec<C64> = f.samples.iter().zip(&g.samples).map(|(a, b)| a.conj() * b).collect();
    Ok(f.grid.integrate_complex(&products))
}

/// `∫ |f(x)|² dx`.
pub fn power(f: &ComplexField) -> f64 {
    f.grid.integrate(&f.intensity())
}

/// Positive real rescaling to unit power.
pub fn normalize(f: &ComplexField) -> Result<ComplexField> {
    let p = power(f);
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Degenerate(format!("cannot normalize a field with power {p}")));
    }
    Ok(f.scaled(C64::new(1.0 / p.sqrt(), 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: TransverseGrid, center: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| C64::new((-(x - center).powi(2) / 2.0).exp(), 0.0))
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TransverseGrid::new(1.0, 1.0, 64).is_err());
        assert!(TransverseGrid::new(-1.0, 1.0, 8).is_err());
        assert!(TransverseGrid::new(f64::NAN, 1.0, 64).is_err());
    }

    #[test]
    fn gaussian_overlap_matches_closed_form() {
        // ∫ e^{-(x-a)²/2} e^{-(x-b)²/2} dx = √π e^{-d²/4} for unit-width Gaussians.
        let grid = TransverseGrid::centered(20.0, 2048).unwrap();
        for d in [0.0, 0.5, 1.3, 3.0] {
            let f = normalize(&gaussian(grid, -d / 2.0)).unwrap();
            let g = normalize(&gaussian(grid, d / 2.0)).unwrap();
            let o = overlap(&f, &g).unwrap();
            assert!((o.re - (-d * d / 4.0_f64).exp()).abs() < 1e-6, "d = {d}: {o}");
            assert!(o.im.abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_rejects_grid_mismatch() {
        let a = ComplexField::zeros(TransverseGrid::centered(10.0, 64).unwrap());
        let b = ComplexField::zeros(TransverseGrid::centered(10.0, 128).unwrap());
        assert!(matches!(overlap(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn power_and_normalize() {
        let grid = TransverseGrid::centered(15.0, 512).unwrap();
        assert_eq!(power(&ComplexField::zeros(grid)), 0.0);
        assert!(matches!(normalize(&ComplexField::zeros(grid)), Err(Error::Degenerate(_))));

        let g = gaussian(grid, 0.3);
        let n = normalize(&g).unwrap();
        assert!((power(&n) - 1.0).abs() < 1e-12);
        let n5 = normalize(&g.scaled(C64::new(5.0, 0.0))).unwrap();
        for (a, b) in n.samples().iter().zip(n5.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        let again = normalize(&n).unwrap();
        for (a, b) in n.samples().iter().zip(again.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
