//! Time stepping: Crank–Nicolson with midpoint sampling and a Lanczos
//! exponential integrator, plus run diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SpatialGrid, WaveFunction};
use crate::io::fmt_num;
use crate::linalg::{conjugate_gradient, dot, norm};
use crate::operators::{weighted_norm, FrozenMollified, HamiltonianHandle, LinearOperator};
use crate::symbolcalc::CutoffSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A possibly time-dependent Hermitian operator on a grid.
pub trait Hamiltonian: Sync {
    fn grid(&self) -> &SpatialGrid;

    /// The operator at time `t`.
    fn freeze_at(&self, t: f64) -> Result<Box<dyn LinearOperator + '_>>;

    /// The mollified operator `X^H H X` at time `t`.
    fn freeze_mollified(&self, _t: f64, _spec: &CutoffSpec) -> Result<Box<dyn LinearOperator + '_>> {
        Err(Error::Unsupported("mollified flow is only available for single-particle Hamiltonians".into()))
    }

    fn weighted_norm(&self, a: i32, f: &WaveFunction) -> Result<f64>;

    fn is_time_dependent(&self) -> bool {
        true
    }
}

/// A Hamiltonian family indexed by a real parameter.
pub trait ParametricHamiltonian: Hamiltonian + Sized {
    fn rho(&self) -> f64;

    fn rho_range(&self) -> (f64, f64);

    fn depends_on_rho(&self) -> bool;

    fn with_rho(&self, rho: f64) -> Result<Self>;

    /// `dH/drho` at time `t`.
    fn freeze_d_rho(&self, t: f64) -> Result<Box<dyn LinearOperator + '_>>;
}

impl Hamiltonian for HamiltonianHandle {
    fn grid(&self) -> &SpatialGrid {
        HamiltonianHandle::grid(self)
    }

    fn freeze_at(&self, t: f64) -> Result<Box<dyn LinearOperator + '_>> {
        Ok(Box::new(self.freeze(t)?))
    }

    fn freeze_mollified(&self, t: f64, spec: &CutoffSpec) -> Result<Box<dyn LinearOperator + '_>> {
        Ok(Box::new(FrozenMollified::new(self, spec, t)?))
    }

    fn weighted_norm(&self, a: i32, f: &WaveFunction) -> Result<f64> {
        weighted_norm(&self.norm_order(a)?, f)
    }

    fn is_time_dependent(&self) -> bool {
        self.family().is_time_dependent()
    }
}

impl ParametricHamiltonian for HamiltonianHandle {
    fn rho(&self) -> f64 {
        HamiltonianHandle::rho(self)
    }

    fn rho_range(&self) -> (f64, f64) {
        self.family().rho_range()
    }

    fn depends_on_rho(&self) -> bool {
        self.family().depends_on_rho()
    }

    fn with_rho(&self, rho: f64) -> Result<Self> {
        HamiltonianHandle::with_rho(self, rho)
    }

    fn freeze_d_rho(&self, t: f64) -> Result<Box<dyn LinearOperator + '_>> {
        Ok(Box::new(HamiltonianHandle::freeze_d_rho(self, t)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CrankNicolson,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    /// Relative tolerance of the inner solve (CN) or of the Krylov error
    /// estimate (Lanczos).
    pub tol: f64,
    pub max_iter: usize,
    pub krylov_dim: usize,
    /// Cutoff for the regularized flow `i u' = X^H H X u`.
    pub cutoff: Option<CutoffSpec>,
    pub boundary_tol: f64,
    /// Keep every `save_every`-th state (the first and last are always kept).
    pub save_every: usize,
    /// Compute per-step diagnostics every `record_every` steps.
    pub record_every: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::CrankNicolson,
            dt: 1e-3,
            t_final: 1.0,
            tol: 1e-12,
            max_iter: 20_000,
            krylov_dim: 30,
            cutoff: None,
            boundary_tol: 1e-6,
            save_every: 0,
            record_every: 1,
        }
    }
}

impl PropagatorConfig {
    pub fn crank_nicolson(dt: f64, t_final: f64) -> Self {
        Self { dt, t_final, ..Self::default() }
    }

    pub fn lanczos(dt: f64, t_final: f64) -> Self {
        Self { scheme: Scheme::Lanczos, dt, t_final, ..Self::default() }
    }

    /// Number of steps; errors unless `t_final` is an integer multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {} must be positive", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon {} must be nonnegative", self.t_final)));
        }
        if !(self.tol > 0.0 && self.boundary_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.krylov_dim < 2 {
            return Err(Error::InvalidArgument("Krylov dimension must be at least 2".into()));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(self.dt) {
            return Err(Error::InvalidArgument(format!(
                "horizon {} is not an integer multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// Diagnostics from one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub norm: f64,
    /// `(a, ||u||_a)` for the requested orders.
    pub weighted: Vec<(i32, f64)>,
    pub boundary_mass: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct PropagationRun {
    pub records: Vec<StepRecord>,
    pub states: Vec<(f64, WaveFunction)>,
    pub final_state: WaveFunction,
    pub boundary_flagged: bool,
    pub steps: usize,
    pub total_iterations: usize,
}

impl PropagationRun {
    pub fn initial_norm(&self) -> f64 {
        self.records[0].norm
    }

    /// `max_t | ||u(t)|| - ||u0|| |`
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.initial_norm();
        self.records.iter().map(|r| (r.norm - n0).abs()).fold(0.0, f64::max)
    }

    /// Recorded `||u(t)||_a` series.
    pub fn weighted_series(&self, a: i32) -> Option<Vec<(f64, f64)>> {
        self.records
            .iter()
            .map(|r| r.weighted.iter().find(|(o, _)| *o == a).map(|(_, v)| (r.t, *v)))
            .collect()
    }

    /// `max_t ||u(t)||_a / ||u0||_a`
    pub fn max_weighted_ratio(&self, a: i32) -> Option<f64> {
        let s = self.weighted_series(a)?;
        let n0 = s.first()?.1;
        Some(s.iter().map(|(_, v)| v / n0).fold(0.0, f64::max))
    }

    pub fn to_csv(&self) -> String {
        let orders: Vec<i32> = self.records.first().map(|r| r.weighted.iter().map(|w| w.0).collect()).unwrap_or_default();
        let mut s = String::from("t,norm");
        for a in &orders {
            s.push_str(&format!(",norm_a{a}"));
        }
        s.push_str(",boundary_mass,residual\n");
        for r in &self.records {
            s.push_str(&format!("{},{}", fmt_num(r.t), fmt_num(r.norm)));
            for (_, v) in &r.weighted {
                s.push_str(&format!(",{}", fmt_num(*v)));
            }
            s.push_str(&format!(",{},{}\n", fmt_num(r.boundary_mass), fmt_num(r.residual)));
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Solves `(I + i tau H) u1 = rhs` through CG on `(I + tau^2 H^2) y = rhs`,
/// `u1 = (I - i tau H) y`.
fn cayley_solve(
    op: &dyn LinearOperator,
    tau: f64,
    rhs: &[Complex64],
    guess: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, StepInfo)> {
    let normal = |v: &[Complex64]| {
        let hv = op.apply_raw(v);
        let hhv = op.apply_raw(&hv);
        v.iter().zip(&hhv).map(|(a, b)| a + b * (tau * tau)).collect()
    };
    let (y, stats) = conjugate_gradient(normal, rhs, Some(guess), tol, max_iter)?;
    let hy = op.apply_raw(&y);
    let u1 = y.iter().zip(&hy).map(|(a, b)| a - I * tau * b).collect();
    Ok((u1, StepInfo { iterations: stats.iterations, residual: stats.relative_residual, substeps: 1 }))
}

/// One Crank–Nicolson step with an optional midpoint source:
/// `(I + i dt/2 H) u1 = (I - i dt/2 H) u0 - i dt f`.
pub fn crank_nicolson_step(
    op: &dyn LinearOperator,
    dt: f64,
    u: &[Complex64],
    source: Option<&[Complex64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, StepInfo)> {
    let tau = 0.5 * dt;
    let hu = op.apply_raw(u);
    let mut rhs: Vec<Complex64> = u.iter().zip(&hu).map(|(a, b)| a - I * tau * b).collect();
    if let Some(f) = source {
        rhs.iter_mut().zip(f).for_each(|(r, s)| *r -= I * dt * s);
    }
    cayley_solve(op, tau, &rhs, u, tol, max_iter)
}

/// `exp(-i dt H) u` on a Krylov subspace of dimension at most `m`, with
/// substeps whenever the a-posteriori error estimate exceeds `tol`.
pub fn lanczos_step(op: &dyn LinearOperator, dt: f64, u: &[Complex64], m: usize, tol: f64) -> Result<(Vec<Complex64>, StepInfo)> {
    let mut v = u.to_vec();
    let mut remaining = dt;
    let mut info = StepInfo { substeps: 0, ..Default::default() };
    let mut tau = dt;
    while remaining.abs() > 0.0 {
        let beta0 = norm(&v);
        if beta0 == 0.0 {
            break;
        }
        let (basis, alpha, beta) = lanczos_basis(op, &v, m);
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let q = &eig.eigenvectors;
        let exp_t = |s: f64| -> Vec<Complex64> {
            (0..k)
                .map(|r| {
                    (0..k)
                        .map(|c| q[(r, c)] * q[(0, c)] * Complex64::from_polar(1.0, -s * eig.eigenvalues[c]))
                        .sum()
                })
                .collect()
        };
        let breakdown = beta.len() < k || beta[k - 1] == 0.0;
        tau = if tau.abs() > remaining.abs() { remaining } else { tau };
        let mut y = exp_t(tau);
        if !breakdown {
            let beta_k = beta[k - 1];
            // the estimate cannot go below rounding in exp(-i tau T)
            let floor = beta_k * k as f64 * f64::EPSILON;
            let mut halvings = 0;
            while beta_k * y[k - 1].norm() > (tol * (tau / dt).abs()).max(floor) {
                tau *= 0.5;
                y = exp_t(tau);
                halvings += 1;
                if halvings > 60 {
                    return Err(Error::NoConvergence { iterations: info.substeps, residual: beta_k * y[k - 1].norm() });
                }
            }
            info.residual = info.residual.max(beta_k * y[k - 1].norm());
        }
        let mut next = vec![ZERO; v.len()];
        for (j, b) in basis.iter().enumerate() {
            let c = y[j] * beta0;
            next.iter_mut().zip(b).for_each(|(n, x)| *n += c * x);
        }
        v = next;
        remaining -= tau;
        if remaining.abs() < 1e-14 * dt.abs() {
            remaining = 0.0;
        }
        info.substeps += 1;
        info.iterations += k;
    }
    Ok((v, info))
}

/// Orthonormal Krylov basis with full reorthogonalization. `beta[j]` couples
/// basis vectors `j` and `j + 1`; `beta` has the same length as `alpha`, its
/// last entry being the residual coupling (zero on breakdown).
fn lanczos_basis(op: &dyn LinearOperator, u: &[Complex64], m: usize) -> (Vec<Vec<Complex64>>, Vec<f64>, Vec<f64>) {
    let m = m.min(u.len());
    let b0 = norm(u);
    let mut basis = vec![u.iter().map(|z| z / b0).collect::<Vec<_>>()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let scale = b0;
    for j in 0..m {
        let mut w = op.apply_raw(&basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bn = norm(&w);
        if bn <= 1e-13 * scale.max(a.abs()) {
            beta.push(0.0);
            break;
        }
        beta.push(bn);
        if j + 1 < m {
            basis.push(w.iter().map(|z| z / bn).collect());
        }
    }
    (basis, alpha, beta)
}

/// Advances `u` by `dt` from time `t` with the operator sampled at `t + dt/2`.
fn advance(
    cfg: &PropagatorConfig,
    op: &dyn LinearOperator,
    dt: f64,
    u: &[Complex64],
    source: Option<&[Complex64]>,
) -> Result<(Vec<Complex64>, StepInfo)> {
    match (cfg.scheme, source) {
        (Scheme::CrankNicolson, _) => crank_nicolson_step(op, dt, u, source, cfg.tol, cfg.max_iter),
        (Scheme::Lanczos, None) => lanczos_step(op, dt, u, cfg.krylov_dim, cfg.tol),
        (Scheme::Lanczos, Some(_)) => Err(Error::Unsupported("inhomogeneous steps use Crank–Nicolson".into())),
    }
}

fn freeze<'a>(cfg: &PropagatorConfig, h: &'a dyn Hamiltonian, t: f64) -> Result<Box<dyn LinearOperator + 'a>> {
    match &cfg.cutoff {
        Some(spec) => h.freeze_mollified(t, spec),
        None => h.freeze_at(t),
    }
}

/// One step from `t` to `t + cfg.dt`.
pub fn step(cfg: &PropagatorConfig, h: &dyn Hamiltonian, t: f64, u: &WaveFunction) -> Result<WaveFunction> {
    cfg.steps()?;
    if h.grid() != u.grid() {
        return Err(Error::GridMismatch);
    }
    if !u.is_finite() {
        return Err(Error::InvalidArgument("initial state has non-finite entries".into()));
    }
    let op = freeze(cfg, h, t + 0.5 * cfg.dt)?;
    let (v, _) = advance(cfg, op.as_ref(), cfg.dt, u.values(), None)?;
    Ok(WaveFunction::from_raw(u.grid(), v))
}

/// Source term evaluated at step midpoints.
pub type Source<'a> = dyn Fn(f64) -> Result<WaveFunction> + Sync + 'a;

struct Recorder<'a> {
    h: &'a dyn Hamiltonian,
    orders: &'a [i32],
    cfg: &'a PropagatorConfig,
    records: Vec<StepRecord>,
    states: Vec<(f64, WaveFunction)>,
    flagged: bool,
}

impl<'a> Recorder<'a> {
    fn record(&mut self, t: f64, u: &WaveFunction, residual: f64) -> Result<()> {
        let norm = u.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite(0));
        }
        let mut weighted = Vec::with_capacity(self.orders.len());
        for &a in self.orders {
            let v = self.h.weighted_norm(a, u)?;
            if !v.is_finite() {
                return Err(Error::NonFinite(0));
            }
            weighted.push((a, v));
        }
        let boundary_mass = u.boundary_mass();
        if boundary_mass > self.cfg.boundary_tol * norm * norm {
            self.flagged = true;
        }
        self.records.push(StepRecord { t, norm, weighted, boundary_mass, residual });
        Ok(())
    }
}

/// Propagates from `t_start` to `t_end` (either direction) with `|cfg.dt|`.
pub fn propagate_between(
    cfg: &PropagatorConfig,
    h: &dyn Hamiltonian,
    u0: &WaveFunction,
    t_start: f64,
    t_end: f64,
    orders: &[i32],
    source: Option<&Source<'_>>,
) -> Result<PropagationRun> {
    let span = (t_end - t_start).abs();
    let steps = PropagatorConfig { t_final: span, ..cfg.clone() }.steps()?;
    if h.grid() != u0.grid() {
        return Err(Error::GridMismatch);
    }
    if !u0.is_finite() {
        return Err(Error::InvalidArgument("initial state has non-finite entries".into()));
    }
    let dt = if t_end >= t_start { cfg.dt } else { -cfg.dt };
    let mut rec = Recorder { h, orders, cfg, records: Vec::new(), states: vec![(t_start, u0.clone())], flagged: false };
    rec.record(t_start, u0, 0.0)?;
    let cached = if h.is_time_dependent() { None } else { Some(freeze(cfg, h, t_start)?) };
    let mut u = u0.values().to_vec();
    let mut total_iterations = 0;
    for n in 0..steps {
        let t = t_start + n as f64 * dt;
        let mid = t + 0.5 * dt;
        let fresh;
        let op: &dyn LinearOperator = match &cached {
            Some(op) => op.as_ref(),
            None => {
                fresh = freeze(cfg, h, mid)?;
                fresh.as_ref()
            }
        };
        let f = source.map(|s| s(mid)).transpose()?;
        let (next, info) = advance(cfg, op, dt, &u, f.as_ref().map(|f| f.values()))?;
        u = next;
        total_iterations += info.iterations;
        let t_next = t_start + (n + 1) as f64 * dt;
        let last = n + 1 == steps;
        if last || (cfg.record_every > 0 && (n + 1) % cfg.record_every == 0) {
            let w = WaveFunction::from_raw(u0.grid(), u.clone());
            rec.record(t_next, &w, info.residual)?;
        }
        if !last && cfg.save_every > 0 && (n + 1) % cfg.save_every == 0 {
            rec.states.push((t_next, WaveFunction::from_raw(u0.grid(), u.clone())));
        }
    }
    let final_state = WaveFunction::from_raw(u0.grid(), u);
    if steps > 0 {
        rec.states.push((t_end, final_state.clone()));
    }
    Ok(PropagationRun {
        records: rec.records,
        states: rec.states,
        final_state,
        boundary_flagged: rec.flagged,
        steps,
        total_iterations,
    })
}

pub fn propagate(cfg: &PropagatorConfig, h: &dyn Hamiltonian, u0: &WaveFunction, orders: &[i32]) -> Result<PropagationRun> {
    propagate_between(cfg, h, u0, 0.0, cfg.t_final, orders, None)
}

/// `i u' = H u + f` with the source sampled at step midpoints (Crank–Nicolson only).
pub fn propagate_inhomogeneous(
    cfg: &PropagatorConfig,
    h: &dyn Hamiltonian,
    u0: &WaveFunction,
    source: &Source<'_>,
    orders: &[i32],
) -> Result<PropagationRun> {
    if cfg.scheme != Scheme::CrankNicolson {
        return Err(Error::Unsupported("inhomogeneous steps use Crank–Nicolson".into()));
    }
    propagate_between(cfg, h, u0, 0.0, cfg.t_final, orders, Some(source))
}

/// Smallest `C >= 0` with `||u(t)||_a <= exp(C t) ||u0||_a` over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyFit {
    pub order: i32,
    pub rate: f64,
    pub max_ratio: f64,
    pub finite: bool,
}

pub fn energy_estimate_check(run: &PropagationRun, a: i32) -> Result<EnergyFit> {
    let s = run
        .weighted_series(a)
        .ok_or_else(|| Error::InvalidArgument(format!("run did not record order {a}")))?;
    let (t0, n0) = s[0];
    let mut rate: f64 = 0.0;
    let mut max_ratio: f64 = 1.0;
    for &(t, v) in &s[1..] {
        let ratio = v / n0;
        max_ratio = max_ratio.max(ratio);
        let dt = (t - t0).abs();
        if dt > 0.0 && ratio > 1.0 {
            rate = rate.max(ratio.ln() / dt);
        }
    }
    Ok(EnergyFit { order: a, rate, max_ratio, finite: rate.is_finite() && max_ratio.is_finite() })
}

/// `true` when two fits of the same order agree within `rel` (relative to
/// the larger), treating rates below `floor` as equal.
pub fn energy_fits_agree(a: &EnergyFit, b: &EnergyFit, rel: f64, floor: f64) -> bool {
    if !(a.finite && b.finite) {
        return false;
    }
    let hi = a.rate.max(b.rate);
    hi <= floor || (a.rate - b.rate).abs() <= rel * hi
}
