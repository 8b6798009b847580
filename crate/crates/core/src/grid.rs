//! Uniform periodic grids on `[-L, L)^d` and their discrete Fourier duals.
//!
//! Flat indices are row-major with axis 0 slowest. The forward transform is
//! normalized by `1 / N^d` so that the inverse is a plain sum and
//! `inverse(forward(f)) == f` up to rounding.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const MAX_DIM: usize = 2;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

#[derive(Clone)]
pub struct SpatialGrid {
    dim: usize,
    half_width: f64,
    points: usize,
    spacing: f64,
    nodes: Arc<[f64]>,
    freqs: Arc<[f64]>,
    plans: Arc<Plans>,
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid")
            .field("dim", &self.dim)
            .field("half_width", &self.half_width)
            .field("points", &self.points)
            .finish()
    }
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.half_width == other.half_width
    }
}

/// Builds a `d`-dimensional grid with `n` points per axis on `[-l, l)`.
pub fn make_grid(dim: usize, half_width: f64, points: usize) -> Result<SpatialGrid> {
    SpatialGrid::new(dim, half_width, points)
}

impl SpatialGrid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..={MAX_DIM}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        if !points.is_multiple_of(2) || points < 8 {
            return Err(Error::InvalidGrid(format!("point count {points} must be even and >= 8")));
        }
        let spacing = 2.0 * half_width / points as f64;
        let nodes: Vec<f64> = (0..points).map(|j| -half_width + j as f64 * spacing).collect();
        let dxi = std::f64::consts::PI / half_width;
        let freqs: Vec<f64> = (0..points)
            .map(|k| {
                let k = k as i64;
                let signed = if k < points as i64 / 2 { k } else { k - points as i64 };
                signed as f64 * dxi
            })
            .collect();
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        };
        Ok(Self {
            dim,
            half_width,
            points,
            spacing,
            nodes: nodes.into(),
            freqs: freqs.into(),
            plans: Arc::new(plans),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn freq_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    pub fn max_frequency(&self) -> f64 {
        std::f64::consts::PI / self.spacing
    }

    /// Total number of samples, `N^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `dx^d` used by the Riemann-sum quadrature.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// One-dimensional node coordinates, shared by every axis.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// One-dimensional frequencies in FFT order, shared by every axis.
    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    /// Per-axis indices of a flat index.
    pub fn unflatten(&self, idx: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.points, idx % self.points],
        }
    }

    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let [i, j] = self.unflatten(idx);
        match self.dim {
            1 => [self.nodes[i], 0.0],
            _ => [self.nodes[i], self.nodes[j]],
        }
    }

    pub fn frequency(&self, idx: usize) -> [f64; MAX_DIM] {
        let [i, j] = self.unflatten(idx);
        match self.dim {
            1 => [self.freqs[i], 0.0],
            _ => [self.freqs[i], self.freqs[j]],
        }
    }

    /// Coordinate of flat index `idx` along `axis`.
    pub fn coordinate(&self, idx: usize, axis: usize) -> f64 {
        self.nodes[self.unflatten(idx)[axis]]
    }

    pub fn frequency_along(&self, idx: usize, axis: usize) -> f64 {
        self.freqs[self.unflatten(idx)[axis]]
    }

    /// Samples `f` at every node.
    pub fn sample<T>(&self, mut f: impl FnMut([f64; MAX_DIM]) -> T) -> Vec<T> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }

    /// Samples a function of frequency at every dual node (FFT order).
    pub fn sample_frequencies<T>(&self, mut f: impl FnMut([f64; MAX_DIM]) -> T) -> Vec<T> {
        (0..self.len()).map(|i| f(self.frequency(i))).collect()
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let plan = if inverse { &self.plans.inverse } else { &self.plans.forward };
        let n = self.points;
        if self.dim == 1 || axis == self.dim - 1 {
            plan.process(data);
            return;
        }
        // axis 0 of a 2-d array: gather strided columns
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                column[r] = data[r * n + c];
            }
            plan.process(&mut column);
            for r in 0..n {
                data[r * n + c] = column[r];
            }
        }
    }

    /// In-place normalized forward transform over all axes.
    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        for axis in 0..self.dim {
            self.transform_axis(data, axis, false);
        }
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// In-place inverse transform over all axes (unnormalized sum).
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        for axis in 0..self.dim {
            self.transform_axis(data, axis, true);
        }
    }

    /// Fraction of the total mass carried by nodes in the outer 10% of the box
    /// along any axis.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let edge = 0.9 * self.half_width;
        (0..self.len())
            .map(|i| {
                let p = self.point(i);
                p[..self.dim].iter().any(|x| x.abs() > edge)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct WaveFunction {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: &SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "sample count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Wraps samples without the finiteness scan; for internal operator output.
    pub(crate) fn from_raw(grid: &SpatialGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values }
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self::from_raw(grid, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl FnMut([f64; 2]) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.sample(f))
    }

    /// `pi^{-d/4} w^{-d/2} exp(-|x - c|^2 / (2 w^2) + i k.x)`, unit L2 norm on R^d.
    pub fn gaussian(grid: &SpatialGrid, center: [f64; 2], width: f64, momentum: [f64; 2]) -> Self {
        let d = grid.dim();
        let norm = (std::f64::consts::PI * width * width).powf(-(d as f64) / 4.0);
        let values = grid.sample(|x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for a in 0..d {
                r2 += (x[a] - center[a]).powi(2);
                phase += momentum[a] * x[a];
            }
            Complex64::from_polar(norm * (-r2 / (2.0 * width * width)).exp(), phase)
        });
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn check_same_grid(&self, other: &WaveFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|v| v * s).collect())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: Complex64, other: &WaveFunction) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self::from_raw(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(),
        )
    }

    pub fn sub(&self, other: &WaveFunction) -> Self {
        self.add_scaled(Complex64::new(-1.0, 0.0), other)
    }

    pub fn add(&self, other: &WaveFunction) -> Self {
        self.add_scaled(Complex64::new(1.0, 0.0), other)
    }

    /// Pointwise multiplication by real samples.
    pub fn mul_real(&self, weights: &[f64]) -> Self {
        Self::from_raw(&self.grid, self.values.iter().zip(weights).map(|(v, w)| v * w).collect())
    }

    pub fn boundary_mass(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let edge: f64 = self
            .grid
            .boundary_mask()
            .iter()
            .zip(&self.values)
            .filter(|(m, _)| **m)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        edge / total
    }
}

/// `(f, g) = dx^d sum f_j conj(g_j)`.
pub fn l2_inner_product(f: &WaveFunction, g: &WaveFunction) -> Result<Complex64> {
    f.check_same_grid(g)?;
    let s: Complex64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum();
    Ok(s * f.grid.cell_volume())
}

/// Applies the Fourier multiplier `(i xi_axis)^order`.
pub fn spectral_derivative(f: &WaveFunction, axis: usize, order: u32) -> Result<WaveFunction> {
    let grid = f.grid();
    if axis >= grid.dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range for dimension {}", grid.dim())));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("derivative order must be at least 1".into()));
    }
    let mut data = f.values.clone();
    grid.forward(&mut data);
    let i_pow = Complex64::i().powu(order);
    for (idx, v) in data.iter_mut().enumerate() {
        let xi = grid.frequency_along(idx, axis);
        *v *= i_pow * xi.powi(order as i32);
    }
    grid.inverse(&mut data);
    Ok(WaveFunction::from_raw(grid, data))
}

/// Mixed partial `d^alpha f` for a multi-index over the grid axes.
pub fn mixed_derivative(f: &WaveFunction, alpha: &[u32]) -> Result<WaveFunction> {
    let grid = f.grid();
    if alpha.len() != grid.dim() {
        return Err(Error::InvalidArgument("multi-index length must equal grid dimension".into()));
    }
    if alpha.iter().all(|&a| a == 0) {
        return Ok(f.clone());
    }
    let mut data = f.values.clone();
    grid.forward(&mut data);
    let total: u32 = alpha.iter().sum();
    let i_pow = Complex64::i().powu(total);
    for (idx, v) in data.iter_mut().enumerate() {
        let mut m = 1.0;
        for (axis, &a) in alpha.iter().enumerate() {
            if a > 0 {
                m *= grid.frequency_along(idx, axis).powi(a as i32);
            }
        }
        *v *= i_pow * m;
    }
    grid.inverse(&mut data);
    Ok(WaveFunction::from_raw(grid, data))
}

/// All multi-indices in `dim` variables with `|alpha| <= max_order`.
pub fn multi_indices(dim: usize, max_order: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    match dim {
        1 => {
            for a in 0..=max_order {
                out.push(vec![a]);
            }
        }
        _ => {
            for total in 0..=max_order {
                for a in 0..=total {
                    out.push(vec![a, total - a]);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_arithmetic() {
        let g = make_grid(1, 10.0, 512).unwrap();
        assert!((g.spacing() - 20.0 / 512.0).abs() < 1e-15);
        assert!((g.max_frequency() - std::f64::consts::PI * 512.0 / 20.0).abs() < 1e-12);
        assert!((g.freq_spacing() - std::f64::consts::PI / 10.0).abs() < 1e-15);

        let g = make_grid(1, 5.0, 8).unwrap();
        let expect = [-5.0, -3.75, -2.5, -1.25, 0.0, 1.25, 2.5, 3.75];
        for (a, b) in g.nodes().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }

        let g = make_grid(2, 6.0, 128).unwrap();
        assert_eq!(g.len(), 128 * 128);
        assert_eq!(g.sample_frequencies(|k| k[0]).len(), 128 * 128);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(make_grid(1, 1.0, 9).is_err());
        assert!(make_grid(1, 0.0, 16).is_err());
        assert!(make_grid(1, -1.0, 16).is_err());
        assert!(make_grid(3, 1.0, 16).is_err());
        assert!(make_grid(1, 1.0, 6).is_err());
    }

    #[test]
    fn frequency_range_is_dual() {
        let g = make_grid(1, 3.0, 16).unwrap();
        let max = g.frequencies().iter().cloned().fold(f64::MIN, f64::max);
        let min = g.frequencies().iter().cloned().fold(f64::MAX, f64::min);
        assert!((min + g.max_frequency()).abs() < 1e-12);
        assert!(max < g.max_frequency());
    }

    #[test]
    fn transform_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [make_grid(1, 4.0, 64).unwrap(), make_grid(2, 4.0, 32).unwrap()] {
            let orig: Vec<Complex64> = (0..g.len()).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let mut data = orig.clone();
            g.forward(&mut data);
            g.inverse(&mut data);
            let err: f64 = data.iter().zip(&orig).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let scale: f64 = orig.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            assert!(err / scale < 1e-12);
        }
    }

    #[test]
    fn plane_wave_derivative() {
        let g = make_grid(1, 10.0, 128).unwrap();
        let kappa = 7.0 * g.freq_spacing();
        let f = WaveFunction::from_fn(&g, |x| Complex64::from_polar(1.0, kappa * x[0])).unwrap();
        let df = spectral_derivative(&f, 0, 1).unwrap();
        let expect = f.scaled(c(0.0, kappa));
        assert!(df.sub(&expect).norm() / expect.norm() < 1e-12);
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = make_grid(2, 3.0, 16).unwrap();
        let f = WaveFunction::from_fn(&g, |_| c(1.0, 0.0)).unwrap();
        for order in 1..4 {
            for axis in 0..2 {
                assert!(spectral_derivative(&f, axis, order).unwrap().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_second_derivative() {
        let g = make_grid(1, 10.0, 512).unwrap();
        let f = WaveFunction::from_fn(&g, |x| c((-x[0] * x[0]).exp(), 0.0)).unwrap();
        let d2 = spectral_derivative(&f, 0, 2).unwrap();
        for (i, v) in d2.values().iter().enumerate() {
            let x = g.nodes()[i];
            let exact = (4.0 * x * x - 2.0) * (-x * x).exp();
            assert!((v - c(exact, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn normalized_gaussian_has_unit_norm() {
        let g = make_grid(1, 10.0, 256).unwrap();
        let f = WaveFunction::gaussian(&g, [0.5, 0.0], 1.3, [0.0, 0.0]);
        let ip = l2_inner_product(&f, &f).unwrap();
        assert!((ip.re - 1.0).abs() < 1e-10);
        assert!(ip.im.abs() < 1e-15);

        let g2 = make_grid(2, 8.0, 64).unwrap();
        let f2 = WaveFunction::gaussian(&g2, [0.0, 0.3], 1.0, [1.0, 0.0]);
        assert!((f2.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn plane_waves_are_orthogonal() {
        let g = make_grid(1, 5.0, 64).unwrap();
        let dk = g.freq_spacing();
        let f = WaveFunction::from_fn(&g, |x| Complex64::from_polar(1.0, 3.0 * dk * x[0])).unwrap();
        let h = WaveFunction::from_fn(&g, |x| Complex64::from_polar(1.0, -5.0 * dk * x[0])).unwrap();
        assert!(l2_inner_product(&f, &h).unwrap().norm() < 1e-12);
    }

    #[test]
    fn inner_product_rejects_mismatched_grids() {
        let a = WaveFunction::zeros(&make_grid(1, 5.0, 64).unwrap());
        let b = WaveFunction::zeros(&make_grid(1, 5.0, 32).unwrap());
        assert!(matches!(l2_inner_product(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn rejects_non_finite_samples() {
        let g = make_grid(1, 5.0, 8).unwrap();
        let mut v = vec![c(0.0, 0.0); 8];
        v[3] = c(f64::NAN, 0.0);
        assert!(matches!(WaveFunction::new(&g, v), Err(Error::NonFinite(3))));
    }

    #[test]
    fn boundary_mass_of_centered_gaussian_is_tiny() {
        let g = make_grid(1, 10.0, 256).unwrap();
        let f = WaveFunction::gaussian(&g, [0.0, 0.0], 1.0, [0.0, 0.0]);
        assert!(f.boundary_mass() < 1e-30);
        let edge = WaveFunction::gaussian(&g, [9.5, 0.0], 0.3, [0.0, 0.0]);
        assert!(edge.boundary_mass() > 0.5);
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 4).len(), 5);
        assert_eq!(multi_indices(2, 2).len(), 6);
    }
}
