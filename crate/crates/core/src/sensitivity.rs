//! Dependence of solutions on the family parameter: continuity moduli,
//! difference quotients and the variational equation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::WaveFunction;
use crate::io::fmt_num;
use crate::propagator::{crank_nicolson_step, propagate, Hamiltonian, ParametricHamiltonian, PropagatorConfig, Scheme};
use crate::symbolcalc::fit_slope;

/// States at the saved times of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<WaveFunction>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &WaveFunction {
        self.states.last().expect("trajectories hold the initial state")
    }

    /// `max_t ||self(t) - other(t)||_a`; both must share the save schedule.
    pub fn max_distance(&self, other: &Trajectory, h: &dyn Hamiltonian, a: i32) -> Result<f64> {
        if self.times.len() != other.times.len() {
            return Err(Error::InvalidArgument("trajectories have different save schedules".into()));
        }
        let mut m: f64 = 0.0;
        for (x, y) in self.states.iter().zip(&other.states) {
            m = m.max(h.weighted_norm(a, &x.sub(y))?);
        }
        Ok(m)
    }

    pub fn max_norm(&self, h: &dyn Hamiltonian, a: i32) -> Result<f64> {
        let mut m: f64 = 0.0;
        for s in &self.states {
            m = m.max(h.weighted_norm(a, s)?);
        }
        Ok(m)
    }
}

fn with_saves(cfg: &PropagatorConfig) -> PropagatorConfig {
    let save = if cfg.save_every == 0 { 1 } else { cfg.save_every };
    PropagatorConfig { save_every: save, record_every: save, ..cfg.clone() }
}

fn check_rho<H: ParametricHamiltonian>(h: &H, rho: f64) -> Result<()> {
    let (lo, hi) = h.rho_range();
    if !(rho >= lo && rho <= hi) {
        return Err(Error::InvalidArgument(format!("parameter {rho} outside the admissible range [{lo}, {hi}]")));
    }
    Ok(())
}

/// `u(t; rho)` at the save times of `cfg` (every step when `save_every == 0`).
pub fn trajectory<H: ParametricHamiltonian>(cfg: &PropagatorConfig, h: &H, rho: f64, u0: &WaveFunction) -> Result<Trajectory> {
    let hr = h.with_rho(rho)?;
    let run = propagate(&with_saves(cfg), &hr, u0, &[])?;
    let (times, states) = run.states.into_iter().unzip();
    Ok(Trajectory { times, states })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusPoint {
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusCurve {
    pub rho: f64,
    pub order: i32,
    pub points: Vec<ModulusPoint>,
    /// Slope of `log value` against `log delta` over the nonzero points.
    pub slope: Option<f64>,
}

impl ModulusCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,modulus\n");
        for p in &self.points {
            s.push_str(&format!("{},{}\n", fmt_num(p.delta), fmt_num(p.value)));
        }
        s
    }
}

/// `max_t ||u(t; rho + delta) - u(t; rho)||_a` for each `delta`.
pub fn continuity_modulus<H: ParametricHamiltonian>(
    cfg: &PropagatorConfig,
    h: &H,
    u0: &WaveFunction,
    rho: f64,
    deltas: &[f64],
    a: i32,
) -> Result<ModulusCurve> {
    check_rho(h, rho)?;
    for d in deltas {
        check_rho(h, rho + d)?;
    }
    let base = trajectory(cfg, h, rho, u0)?;
    let mut points = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let value = if delta == 0.0 {
            0.0
        } else {
            trajectory(cfg, h, rho + delta, u0)?.max_distance(&base, h, a)?
        };
        points.push(ModulusPoint { delta, value });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.delta != 0.0 && p.value > 0.0)
        .map(|p| (p.delta.abs().ln(), p.value.ln()))
        .unzip();
    Ok(ModulusCurve { rho, order: a, slope: fit_slope(&lx, &ly), points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotientKind {
    /// `(u(rho + tau) - u(rho)) / tau`
    Forward,
    /// `(u(rho + tau) - u(rho - tau)) / 2 tau`
    Central,
}

#[derive(Debug, Clone)]
pub struct QuotientRun {
    pub tau: f64,
    pub kind: QuotientKind,
    pub trajectory: Trajectory,
    /// `||w_tau(t)||_a` at each save time.
    pub norms: Vec<f64>,
}

impl QuotientRun {
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn difference_quotient<H: ParametricHamiltonian>(
    cfg: &PropagatorConfig,
    h: &H,
    u0: &WaveFunction,
    rho: f64,
    tau: f64,
    a: i32,
    kind: QuotientKind,
) -> Result<QuotientRun> {
    if tau == 0.0 || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("quotient offset {tau} must be nonzero and finite")));
    }
    check_rho(h, rho + tau)?;
    let (lower, scale) = match kind {
        QuotientKind::Forward => (rho, 1.0 / tau),
        QuotientKind::Central => {
            check_rho(h, rho - tau)?;
            (rho - tau, 0.5 / tau)
        }
    };
    check_rho(h, lower)?;
    let up = trajectory(cfg, h, rho + tau, u0)?;
    let lo = trajectory(cfg, h, lower, u0)?;
    let s = Complex64::new(scale, 0.0);
    let states: Vec<WaveFunction> = up.states.iter().zip(&lo.states).map(|(x, y)| x.sub(y).scaled(s)).collect();
    let norms = states.iter().map(|w| h.weighted_norm(a, w)).collect::<Result<Vec<_>>>()?;
    Ok(QuotientRun { tau, kind, trajectory: Trajectory { times: up.times, states }, norms })
}

#[derive(Debug, Clone)]
pub struct VariationalRun {
    pub rho: f64,
    pub solution: Trajectory,
    pub derivative: Trajectory,
    /// `||w(t)||_a` at each save time.
    pub norms: Vec<f64>,
}

impl VariationalRun {
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }
}

/// Solves `i w' = H w + (dH/drho) u`, `w(0) = 0`, in lockstep with `u`.
///
/// The source at each midpoint is `(dH/drho)(u_n + u_{n+1})/2`, which makes
/// `w_n` the exact parameter derivative of the discrete Crank–Nicolson
/// solution (up to the inner-solve tolerance).
pub fn solve_variational<H: ParametricHamiltonian>(
    cfg: &PropagatorConfig,
    h: &H,
    u0: &WaveFunction,
    a: i32,
) -> Result<VariationalRun> {
    if cfg.scheme != Scheme::CrankNicolson {
        return Err(Error::Unsupported("the variational solve uses Crank–Nicolson".into()));
    }
    if cfg.cutoff.is_some() {
        return Err(Error::Unsupported("the variational solve uses the unregularized flow".into()));
    }
    let steps = cfg.steps()?;
    if h.grid() != u0.grid() {
        return Err(Error::GridMismatch);
    }
    let save = if cfg.save_every == 0 { 1 } else { cfg.save_every };
    let grid = u0.grid().clone();
    let mut u = u0.values().to_vec();
    let mut w = vec![Complex64::new(0.0, 0.0); u.len()];
    let mut sol = Trajectory { times: vec![0.0], states: vec![u0.clone()] };
    let mut der = Trajectory { times: vec![0.0], states: vec![WaveFunction::zeros(&grid)] };
    let rho_dependent = h.depends_on_rho();
    for n in 0..steps {
        let mid = (n as f64 + 0.5) * cfg.dt;
        let op = h.freeze_at(mid)?;
        let (u1, _) = crank_nicolson_step(op.as_ref(), cfg.dt, &u, None, cfg.tol, cfg.max_iter)?;
        if rho_dependent {
            let avg: Vec<Complex64> = u.iter().zip(&u1).map(|(x, y)| (x + y) * 0.5).collect();
            let src = h.freeze_d_rho(mid)?.apply_raw(&avg);
            w = crank_nicolson_step(op.as_ref(), cfg.dt, &w, Some(&src), cfg.tol, cfg.max_iter)?.0;
        }
        u = u1;
        if (n + 1) % save == 0 || n + 1 == steps {
            let t = (n + 1) as f64 * cfg.dt;
            sol.times.push(t);
            sol.states.push(WaveFunction::from_raw(&grid, u.clone()));
            der.times.push(t);
            der.states.push(WaveFunction::from_raw(&grid, w.clone()));
        }
    }
    let norms = der.states.iter().map(|s| h.weighted_norm(a, s)).collect::<Result<Vec<_>>>()?;
    Ok(VariationalRun { rho: h.rho(), solution: sol, derivative: der, norms })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscrepancyPoint {
    pub tau: f64,
    /// `max_t ||w_tau(t) - w(t)||_a`
    pub discrepancy: f64,
    /// `max_t ||w_tau(t)||_a`
    pub quotient_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityReport {
    pub rho: f64,
    pub order: i32,
    pub kind: QuotientKind,
    pub points: Vec<DiscrepancyPoint>,
    /// `max_t ||w(t)||_a` of the variational solution.
    pub variational_norm: f64,
    /// Least-squares order of the discrepancy in `tau`.
    pub observed_order: Option<f64>,
}

impl SensitivityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,discrepancy,quotient_norm\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", fmt_num(p.tau), fmt_num(p.discrepancy), fmt_num(p.quotient_norm)));
        }
        s
    }

    /// `sup_tau max_t ||w_tau(t)||_a`
    pub fn quotient_sup(&self) -> f64 {
        self.points.iter().map(|p| p.quotient_norm).fold(0.0, f64::max)
    }
}

/// Compares difference quotients over a `tau` sweep with the variational solution.
pub fn compare_quotients<H: ParametricHamiltonian>(
    cfg: &PropagatorConfig,
    h: &H,
    u0: &WaveFunction,
    taus: &[f64],
    a: i32,
    kind: QuotientKind,
) -> Result<SensitivityReport> {
    let rho = h.rho();
    let var = solve_variational(cfg, h, u0, a)?;
    let mut points = Vec::with_capacity(taus.len());
    for &tau in taus {
        let q = difference_quotient(cfg, h, u0, rho, tau, a, kind)?;
        let discrepancy = q.trajectory.max_distance(&var.derivative, h, a)?;
        points.push(DiscrepancyPoint { tau, discrepancy, quotient_norm: q.max_norm() });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.discrepancy > 0.0)
        .map(|p| (p.tau.abs().ln(), p.discrepancy.ln()))
        .unzip();
    Ok(SensitivityReport {
        rho,
        order: a,
        kind,
        points,
        variational_norm: var.max_norm(),
        observed_order: fit_slope(&lx, &ly),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::operators::{HamiltonianHandle, LinearOperator};
    use crate::potentials::catalog::builtin;
    use crate::potentials::{FamilySpec, PotentialFamily};

    fn setup(name: &str, rho: f64) -> (HamiltonianHandle, WaveFunction) {
        let g = make_grid(1, 6.0, 64).unwrap();
        let h = HamiltonianHandle::new(&builtin(name, 1).unwrap(), rho, &g).unwrap();
        let u = WaveFunction::gaussian(&g, [0.3, 0.0], 0.8, [0.5, 0.0]);
        (h, u)
    }

    fn cfg() -> PropagatorConfig {
        PropagatorConfig::crank_nicolson(1e-2, 0.2)
    }

    #[test]
    fn zero_offset_is_rejected() {
        let (h, u) = setup("anharmonic", 1.0);
        assert!(difference_quotient(&cfg(), &h, &u, 1.0, 0.0, 0, QuotientKind::Forward).is_err());
        assert!(difference_quotient(&cfg(), &h, &u, 1.0, 10.0, 0, QuotientKind::Forward).is_err());
    }

    #[test]
    fn parameter_free_family_gives_zero() {
        let (h, u) = setup("harmonic", 1.0);
        let q = difference_quotient(&cfg(), &h, &u, 1.0, 0.1, 0, QuotientKind::Central).unwrap();
        assert!(q.max_norm() == 0.0);
        let var = solve_variational(&cfg(), &h, &u, 0).unwrap();
        assert!(var.max_norm() == 0.0);
        let m = continuity_modulus(&cfg(), &h, &u, 1.0, &[0.0, 0.1], 0).unwrap();
        assert_eq!(m.points[0].value, 0.0);
        assert!(m.points[1].value == 0.0);
    }

    #[test]
    fn variational_starts_at_zero_and_grows_like_dt() {
        let (h, u) = setup("anharmonic", 1.0);
        let c = PropagatorConfig::crank_nicolson(1e-3, 1e-3);
        let var = solve_variational(&c, &h, &u, 0).unwrap();
        assert_eq!(var.derivative.states[0].norm(), 0.0);
        let src = h.freeze_d_rho(0.0).unwrap().apply(&u).norm();
        let first = var.derivative.states[1].norm();
        assert!((first / (1e-3 * src) - 1.0).abs() < 0.05, "{first} vs {}", 1e-3 * src);
    }

    #[test]
    fn central_quotients_converge_at_second_order() {
        let (h, u) = setup("anharmonic", 1.0);
        let r = compare_quotients(&cfg(), &h, &u, &[1e-1, 1e-2], 0, QuotientKind::Central).unwrap();
        let order = r.observed_order.unwrap();
        assert!(order > 1.8, "{order}");
        let f = compare_quotients(&cfg(), &h, &u, &[1e-1, 1e-2], 0, QuotientKind::Forward).unwrap();
        let order = f.observed_order.unwrap();
        assert!((0.8..1.3).contains(&order), "{order}");
    }

    #[test]
    fn central_and_forward_differ_by_order_tau() {
        let (h, u) = setup("anharmonic", 1.0);
        let diff = |tau: f64| {
            let c = difference_quotient(&cfg(), &h, &u, 1.0, tau, 0, QuotientKind::Central).unwrap();
            let f = difference_quotient(&cfg(), &h, &u, 1.0, tau, 0, QuotientKind::Forward).unwrap();
            c.trajectory.max_distance(&f.trajectory, &h, 0).unwrap()
        };
        let ratio = diff(0.1) / diff(0.05);
        assert!((1.7..2.3).contains(&ratio), "{ratio}");
    }

    #[test]
    fn modulus_is_lipschitz() {
        let (h, u) = setup("anharmonic", 1.0);
        let m = continuity_modulus(&cfg(), &h, &u, 1.0, &[1e-1, 1e-2, 1e-3], 0).unwrap();
        for w in m.points.windows(2) {
            let r = w[0].value / w[1].value;
            assert!((7.0..13.0).contains(&r), "{r}");
        }
        assert!((m.slope.unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn magnetic_parameter_derivative() {
        let g = make_grid(1, 6.0, 64).unwrap();
        let fam = PotentialFamily::from_spec(&FamilySpec {
            name: "rho_mag".into(),
            dim: 1,
            scalar: "(1 + x^2)^2".into(),
            vector: vec!["rho*sin(x)".into()],
            growth_order: 1.0,
            delta: 1.0,
            mass: 1.0,
            rho_range: (0.0, 2.0),
        })
        .unwrap();
        let h = HamiltonianHandle::new(&fam, 1.0, &g).unwrap();
        let u = WaveFunction::gaussian(&g, [0.0, 0.0], 0.7, [0.0, 0.0]);
        let r = compare_quotients(&cfg(), &h, &u, &[1e-1, 1e-2], 0, QuotientKind::Central).unwrap();
        assert!(r.observed_order.unwrap() > 1.8, "{:?}", r.points);
    }

    #[test]
    fn lanczos_is_rejected_for_variational() {
        let (h, u) = setup("anharmonic", 1.0);
        assert!(solve_variational(&PropagatorConfig::lanczos(1e-2, 0.1), &h, &u, 0).is_err());
    }
}
