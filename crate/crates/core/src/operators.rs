//! Matrix-free Hamiltonians, the mollified Hamiltonian, powers of the
//! reference operator `Lambda_M`, and weighted Sobolev norms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{mixed_derivative, multi_indices, SpatialGrid, WaveFunction};
use crate::linalg::{conjugate_gradient, SolveStats};
use crate::potentials::{eval_potential, partial_rho, PotentialFamily};
use crate::symbolcalc::{eval_symbol, quantize_adjoint_raw, quantize_raw, CutoffSpec, SymbolField, SymbolKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A linear operator on the samples of a fixed grid.
pub trait LinearOperator: Sync {
    fn grid(&self) -> &SpatialGrid;

    fn apply_raw(&self, f: &[Complex64]) -> Vec<Complex64>;

    fn apply(&self, f: &WaveFunction) -> WaveFunction {
        WaveFunction::from_raw(self.grid(), self.apply_raw(f.values()))
    }
}

/// `sum_j (p_j - a_j)^2 / 2m_j + w` in symmetric three-term form with
/// `p = -i grad`, frozen at one instant.
///
/// With `kinetic = false` the `p^2` part is dropped, which is the shape of the
/// parameter derivative of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct FrozenHamiltonian {
    grid: SpatialGrid,
    inv_two_mass: Vec<f64>,
    kinetic: Option<Vec<f64>>,
    vector: Vec<Option<Vec<f64>>>,
    scalar: Vec<f64>,
}

impl FrozenHamiltonian {
    /// `masses` has one entry per axis; `vector[j]` multiplies the cross term on
    /// axis `j` (missing trailing axes count as zero); `scalar` is the full
    /// multiplicative part.
    pub fn new(
        grid: &SpatialGrid,
        masses: &[f64],
        kinetic: bool,
        vector: Vec<Option<Vec<f64>>>,
        scalar: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(masses.len(), grid.dim());
        let mut vector = vector;
        vector.resize(grid.dim(), None);
        let inv_two_mass: Vec<f64> = masses.iter().map(|m| 0.5 / m).collect();
        let kinetic = kinetic.then(|| {
            grid.sample_frequencies(|xi| (0..grid.dim()).map(|j| xi[j] * xi[j] * inv_two_mass[j]).sum())
        });
        Self { grid: grid.clone(), inv_two_mass, kinetic, vector, scalar }
    }

    pub fn scalar(&self) -> &[f64] {
        &self.scalar
    }

    pub fn vector(&self, axis: usize) -> Option<&[f64]> {
        self.vector[axis].as_deref()
    }

    /// Adds a constant shift to the multiplicative part.
    pub fn shifted(mut self, mu: f64) -> Self {
        self.scalar.iter_mut().for_each(|w| *w += mu);
        self
    }
}

impl LinearOperator for FrozenHamiltonian {
    fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn apply_raw(&self, f: &[Complex64]) -> Vec<Complex64> {
        let grid = &self.grid;
        let n = f.len();
        let mut fh = f.to_vec();
        grid.forward(&mut fh);
        let mut spectral = match &self.kinetic {
            Some(k) => fh.iter().zip(k).map(|(v, m)| v * m).collect(),
            None => vec![ZERO; n],
        };
        let mut out: Vec<Complex64> = f.iter().zip(&self.scalar).map(|(v, w)| v * w).collect();
        for (axis, a) in self.vector.iter().enumerate() {
            let Some(a) = a else { continue };
            let c = self.inv_two_mass[axis];
            // -(a p f) / 2m
            let mut pf: Vec<Complex64> =
                fh.iter().enumerate().map(|(k, v)| v * grid.frequency_along(k, axis)).collect();
            grid.inverse(&mut pf);
            for i in 0..n {
                out[i] -= pf[i] * (a[i] * c);
            }
            // -(p (a f)) / 2m, accumulated in Fourier space
            let mut af: Vec<Complex64> = f.iter().zip(a).map(|(v, w)| v * w).collect();
            grid.forward(&mut af);
            for (k, v) in af.iter().enumerate() {
                spectral[k] -= v * (grid.frequency_along(k, axis) * c);
            }
        }
        grid.inverse(&mut spectral);
        for i in 0..n {
            out[i] += spectral[i];
        }
        out
    }
}

/// Single-particle Hamiltonian `H(t)` for a family at a fixed parameter.
#[derive(Debug, Clone)]
pub struct HamiltonianHandle {
    fam: PotentialFamily,
    rho: f64,
    grid: SpatialGrid,
}

impl HamiltonianHandle {
    pub fn new(fam: &PotentialFamily, rho: f64, grid: &SpatialGrid) -> Result<Self> {
        if fam.dim() != grid.dim() {
            return Err(Error::InvalidFamily {
                name: fam.name().to_string(),
                reason: format!("family is {}-dimensional, grid is {}-dimensional", fam.dim(), grid.dim()),
            });
        }
        // surfaces non-finite samples early
        eval_potential(fam, 0.0, rho, grid)?;
        Ok(Self { fam: fam.clone(), rho, grid: grid.clone() })
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.fam
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.fam.mass()
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(&self.fam, rho, &self.grid)
    }

    pub fn norm_order(&self, a: i32) -> Result<NormOrder> {
        NormOrder::new(a, self.fam.growth_order(), self.fam.mass(), &self.grid)
    }

    /// `H(t)` with potentials sampled at `t`.
    pub fn freeze(&self, t: f64) -> Result<FrozenHamiltonian> {
        let s = eval_potential(&self.fam, t, self.rho, &self.grid)?;
        let m = self.fam.mass();
        let mut scalar = s.scalar;
        for a in &s.vector {
            for (w, ai) in scalar.iter_mut().zip(a) {
                *w += ai * ai / (2.0 * m);
            }
        }
        let vector = s
            .vector
            .into_iter()
            .map(|a| if a.iter().any(|v| *v != 0.0) { Some(a) } else { None })
            .collect();
        Ok(FrozenHamiltonian::new(&self.grid, &vec![m; self.grid.dim()], true, vector, scalar))
    }

    /// `dH/drho (t) = -(dA.p + p.dA)/2m + A.dA/m + dV`.
    pub fn freeze_d_rho(&self, t: f64) -> Result<FrozenHamiltonian> {
        let s = eval_potential(&self.fam, t, self.rho, &self.grid)?;
        let d = partial_rho(&self.fam, t, self.rho, &self.grid)?;
        let m = self.fam.mass();
        let mut scalar = d.scalar;
        for (a, da) in s.vector.iter().zip(&d.vector) {
            for i in 0..scalar.len() {
                scalar[i] += a[i] * da[i] / m;
            }
        }
        let vector = d
            .vector
            .into_iter()
            .map(|a| if a.iter().any(|v| *v != 0.0) { Some(a) } else { None })
            .collect();
        Ok(FrozenHamiltonian::new(&self.grid, &vec![m; self.grid.dim()], false, vector, scalar))
    }
}

pub fn apply_hamiltonian(h: &HamiltonianHandle, t: f64, f: &WaveFunction) -> Result<WaveFunction> {
    check_grid(h.grid(), f)?;
    Ok(h.freeze(t)?.apply(f))
}

fn check_grid(grid: &SpatialGrid, f: &WaveFunction) -> Result<()> {
    if grid != f.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `X_eps^H H X_eps` where `X_eps` quantizes the cutoff symbol.
#[derive(Debug, Clone)]
pub struct FrozenMollified {
    cutoff: Option<SymbolField>,
    inner: FrozenHamiltonian,
}

impl FrozenMollified {
    pub fn new(h: &HamiltonianHandle, spec: &CutoffSpec, t: f64) -> Result<Self> {
        let cutoff = if spec.is_identity() {
            None
        } else {
            Some(eval_symbol(&SymbolKind::Cutoff(*spec), h.family(), h.grid(), t, h.rho())?)
        };
        Ok(Self { cutoff, inner: h.freeze(t)? })
    }
}

impl LinearOperator for FrozenMollified {
    fn grid(&self) -> &SpatialGrid {
        self.inner.grid()
    }

    fn apply_raw(&self, f: &[Complex64]) -> Vec<Complex64> {
        match &self.cutoff {
            None => self.inner.apply_raw(f),
            Some(chi) => {
                let xf = quantize_raw(chi, f);
                let hxf = self.inner.apply_raw(&xf);
                quantize_adjoint_raw(chi, &hxf)
            }
        }
    }
}

pub fn apply_mollified(h: &HamiltonianHandle, spec: &CutoffSpec, t: f64, f: &WaveFunction) -> Result<WaveFunction> {
    check_grid(h.grid(), f)?;
    Ok(FrozenMollified::new(h, spec, t)?.apply(f))
}

// ---------------------------------------------------------------------------
// Lambda_M and weighted norms
// ---------------------------------------------------------------------------

/// Order `a` of the weighted space together with the reference operator
/// `Lambda_M = mu' + |p|^2/2m + <x>^{2(M+1)}`.
#[derive(Debug, Clone)]
pub struct NormOrder {
    a: i32,
    growth_order: f64,
    mass: f64,
    mu_prime: f64,
    grid: SpatialGrid,
    weight: Vec<f64>,
    kinetic: Vec<f64>,
    solver_tol: f64,
    max_iter: usize,
}

pub const MAX_NORM_ORDER: i32 = 3;

impl NormOrder {
    pub fn new(a: i32, growth_order: f64, mass: f64, grid: &SpatialGrid) -> Result<Self> {
        if a.abs() > MAX_NORM_ORDER {
            return Err(Error::InvalidArgument(format!("norm order {a} exceeds |a| <= {MAX_NORM_ORDER}")));
        }
        let dim = grid.dim();
        let weight = grid.sample(|x| {
            let r2: f64 = x[..dim].iter().map(|v| v * v).sum();
            (1.0 + r2).powf(growth_order + 1.0)
        });
        let kinetic = grid.sample_frequencies(|xi| xi[..dim].iter().map(|v| v * v).sum::<f64>() / (2.0 * mass));
        // smallest lambda_M on the grid without shift, then one unit of headroom
        let min_symbol = weight.iter().cloned().fold(f64::INFINITY, f64::min)
            + kinetic.iter().cloned().fold(f64::INFINITY, f64::min);
        let mu_prime = (-min_symbol).max(0.0) + 1.0;
        Ok(Self {
            a,
            growth_order,
            mass,
            mu_prime,
            grid: grid.clone(),
            weight,
            kinetic,
            solver_tol: 1e-12,
            max_iter: 20_000,
        })
    }

    pub fn with_order(&self, a: i32) -> Result<Self> {
        if a.abs() > MAX_NORM_ORDER {
            return Err(Error::InvalidArgument(format!("norm order {a} exceeds |a| <= {MAX_NORM_ORDER}")));
        }
        Ok(Self { a, ..self.clone() })
    }

    pub fn order(&self) -> i32 {
        self.a
    }

    pub fn growth_order(&self) -> f64 {
        self.growth_order
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn mu_prime(&self) -> f64 {
        self.mu_prime
    }

    pub fn with_solver(mut self, tol: f64, max_iter: usize) -> Self {
        self.solver_tol = tol;
        self.max_iter = max_iter;
        self
    }

    fn lambda_raw(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut fh = f.to_vec();
        self.grid.forward(&mut fh);
        fh.iter_mut().zip(&self.kinetic).for_each(|(v, k)| *v *= k);
        self.grid.inverse(&mut fh);
        for i in 0..f.len() {
            fh[i] += f[i] * (self.mu_prime + self.weight[i]);
        }
        fh
    }

    fn lambda_inverse_raw(&self, f: &[Complex64]) -> Result<(Vec<Complex64>, SolveStats)> {
        conjugate_gradient(|v| self.lambda_raw(v), f, None, self.solver_tol, self.max_iter)
    }
}

impl LinearOperator for NormOrder {
    fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// A single application of `Lambda_M`.
    fn apply_raw(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.lambda_raw(f)
    }
}

/// `Lambda_M^a f`; negative powers by conjugate-gradient solves.
pub fn apply_lambda_m_power(order: &NormOrder, f: &WaveFunction) -> Result<WaveFunction> {
    check_grid(&order.grid, f)?;
    let mut v = f.values().to_vec();
    if order.a >= 0 {
        for _ in 0..order.a {
            v = order.lambda_raw(&v);
        }
    } else {
        for _ in 0..(-order.a) {
            v = order.lambda_inverse_raw(&v)?.0;
        }
    }
    Ok(WaveFunction::from_raw(&order.grid, v))
}

/// Derivative part `sum_{1 <= |alpha| <= 2a} ||d^alpha f||`.
pub(crate) fn derivative_norm_sum(f: &WaveFunction, a: i32) -> Result<f64> {
    let mut total = 0.0;
    for alpha in multi_indices(f.grid().dim(), 2 * a as u32) {
        if alpha.iter().sum::<u32>() == 0 {
            continue;
        }
        total += mixed_derivative(f, &alpha)?.norm();
    }
    Ok(total)
}

/// Weighted Sobolev norm of order `a`.
///
/// For `a >= 1`: `||f|| + sum_{1 <= |alpha| <= 2a} ||d^alpha f|| + ||<x>^{2a(M+1)} f||`.
/// For `a < 0`: `||Lambda_M^a f||`.
pub fn weighted_norm(order: &NormOrder, f: &WaveFunction) -> Result<f64> {
    check_grid(&order.grid, f)?;
    match order.a {
        0 => Ok(f.norm()),
        a if a > 0 => {
            let weighted = f.mul_real(&order.weight.iter().map(|w| w.powi(a)).collect::<Vec<_>>());
            Ok(f.norm() + derivative_norm_sum(f, a)? + weighted.norm())
        }
        _ => Ok(apply_lambda_m_power(order, f)?.norm()),
    }
}
