//! One function per verification suite. Each returns its verdict, key scalars
//! and CSV artifacts; nothing is written to disk here.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Serialize;
use tdse_core::io::fmt_num;
use tdse_core::multiparticle::{particle_moments, product_state, propagate_two_particle, TwoParticleSystem};
use tdse_core::operators::HamiltonianHandle;
use tdse_core::potentials::{closed_samples, interior_samples, validate_assumption, InteractionFamily};
use tdse_core::propagator::{energy_estimate_check, propagate, Hamiltonian, PropagatorConfig, Scheme};
use tdse_core::sensitivity::{compare_quotients, continuity_modulus, solve_variational};
use tdse_core::symbolcalc::{commutator_probe, parametrix_residual, scan_ellipticity, CutoffSpec, ProbeOptions};
use tdse_core::{make_grid, WaveFunction};

use crate::config::{ExperimentConfig, Suite, SuiteSetup};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    /// The suite could not complete; counts as a failure.
    #[serde(rename = "ERROR")]
    Error,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Error => "ERROR",
        }
    }
}

/// A CSV file produced by a suite, relative to the output directory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub path: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub suite: Suite,
    pub verdict: Verdict,
    pub message: String,
    pub scalars: BTreeMap<String, f64>,
    pub artifacts: Vec<Artifact>,
}

struct Builder {
    suite: Suite,
    scalars: BTreeMap<String, f64>,
    artifacts: Vec<Artifact>,
}

impl Builder {
    fn new(suite: Suite) -> Self {
        Self { suite, scalars: BTreeMap::new(), artifacts: Vec::new() }
    }

    fn scalar(&mut self, key: impl Into<String>, v: f64) {
        self.scalars.insert(key.into(), v);
    }

    fn csv(&mut self, file: &str, contents: String) {
        self.artifacts.push(Artifact { path: format!("{}/{file}", self.suite.name()), contents });
    }

    fn finish(self, ok: bool, message: String) -> SuiteRun {
        SuiteRun {
            suite: self.suite,
            verdict: Verdict::from_bool(ok),
            message,
            scalars: self.scalars,
            artifacts: self.artifacts,
        }
    }
}

/// Runs one suite. Errors and panics become an `ERROR` verdict.
pub fn run_suite(cfg: &ExperimentConfig, suite: Suite) -> SuiteRun {
    let result = catch_unwind(AssertUnwindSafe(|| {
        let b = Builder::new(suite);
        match suite {
            Suite::Validate => validate(cfg, b),
            Suite::Propagate => propagate_suite(cfg, b),
            Suite::EpsSweep => eps_sweep(cfg, b),
            Suite::Parametrix => parametrix(cfg, b),
            Suite::Commutator => commutator(cfg, b),
            Suite::Sensitivity => sensitivity(cfg, b),
            Suite::Continuity => continuity(cfg, b),
            Suite::TwoParticle => two_particle(cfg, b),
        }
    }));
    let message = match result {
        Ok(Ok(run)) => return run,
        Ok(Err(e)) => e.to_string(),
        Err(panic) => match panic.downcast_ref::<&str>() {
            Some(s) => format!("panic: {s}"),
            None => match panic.downcast_ref::<String>() {
                Some(s) => format!("panic: {s}"),
                None => "panic".to_string(),
            },
        },
    };
    SuiteRun { suite, verdict: Verdict::Error, message, scalars: BTreeMap::new(), artifacts: Vec::new() }
}

type SuiteResult = Result<SuiteRun, CliError>;

fn handle(cfg: &ExperimentConfig) -> Result<(HamiltonianHandle, WaveFunction), CliError> {
    let grid = cfg.spatial_grid()?;
    let h = HamiltonianHandle::new(&cfg.potential_family()?, cfg.family.rho, &grid)?;
    let u0 = cfg.initial.build(&grid);
    Ok((h, u0))
}

fn setup_handle(setup: &SuiteSetup, rho: f64) -> Result<HamiltonianHandle, CliError> {
    Ok(HamiltonianHandle::new(&setup.family, rho, &setup.grid)?)
}

fn require_rho_dependence(setup: &SuiteSetup) -> Result<(), CliError> {
    if setup.family.depends_on_rho() {
        Ok(())
    } else {
        Err(CliError::Precondition(format!("family `{}` does not depend on rho", setup.family.name())))
    }
}

fn validate(cfg: &ExperimentConfig, mut b: Builder) -> SuiteResult {
    let v = &cfg.validate;
    let fam = cfg.potential_family()?;
    let grid = make_grid(cfg.grid.dim, v.half_width, v.points)?;
    let ts = closed_samples((0.0, v.t_max), v.t_samples);
    let rhos = interior_samples(fam.rho_range(), v.rho_samples);
    let rep = validate_assumption(&fam, &grid, &ts, &rhos, v.alpha_max)?;
    let mut csv = String::from("check,constant,offset,shell_slope,passed\n");
    for c in &rep.checks {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            c.name,
            fmt_num(c.constant),
            c.offset.map(fmt_num).unwrap_or_default(),
            fmt_num(c.shell_slope),
            c.passed
        ));
        b.scalar(format!("{}.constant", c.name), c.constant);
    }
    b.csv("constants.csv", csv);
    let failures: Vec<String> = rep.failures().map(|c| format!("{} ({})", c.name, c.message)).collect();
    b.scalar("checks", rep.checks.len() as f64);
    b.scalar("failures", failures.len() as f64);
    let msg = if failures.is_empty() {
        format!("{}: all {} growth checks hold", fam.name(), rep.checks.len())
    } else {
        format!("{}: failed {}", fam.name(), failures.join("; "))
    };
    Ok(b.finish(rep.passed, msg))
}

fn propagate_suite(cfg: &ExperimentConfig, mut b: Builder) -> SuiteResult {
    let p = &cfg.propagate;
    let (h, u0) = handle(cfg)?;
    let run = propagate(&cfg.propagator, &h, &u0, &p.orders)?;
    b.csv("trajectory.csv", run.to_csv());
    let drift = run.max_norm_drift();
    b.scalar("max_norm_drift", drift);
    b.scalar("boundary_flagged", run.boundary_flagged as u8 as f64);
    let mut bounded = true;
    for &a in &p.orders {
        let fit = energy_estimate_check(&run, a)?;
        b.scalar(format!("c_a{a}"), fit.rate);
        b.scalar(format!("max_ratio_a{a}"), fit.max_ratio);
        bounded &= fit.finite;
    }
    let ok = drift <= p.drift_tol && bounded && !(p.fail_on_boundary && run.boundary_flagged);
    let msg = format!(
        "norm drift {drift:.3e} (tol {:.1e}), weighted norms bounded: {bounded}, boundary flagged: {}",
        p.drift_tol, run.boundary_flagged
    );
    Ok(b.finish(ok, msg))
}

fn eps_sweep(cfg: &ExperimentConfig, mut b: Builder) -> SuiteResult {
    let e = &cfg.eps_sweep;
    let setup = cfg.eps_sweep_setup()?;
    let h = setup_handle(&setup, cfg.family.rho)?;
    let u0 = &setup.initial;
    b.scalar("t_final", setup.propagator.t_final);
    let mu = match e.mu {
        Some(mu) => mu,
        None => scan_ellipticity(h.family(), h.grid(), 0.0, cfg.family.rho)?.mu_min,
    };
    b.scalar("mu", mu);
    let reference = propagate(&setup.propagator, &h, u0, &[])?.final_state;
    let mut csv = format!("eps,error,max_norm_a{}\n", e.order);
    let mut errors = Vec::with_capacity(e.eps.len());
    let mut maxima = Vec::with_capacity(e.eps.len());
    for &eps in &e.eps {
        let c = PropagatorConfig { cutoff: Some(CutoffSpec::new(eps, mu, e.profile)?), ..setup.propagator.clone() };
        let run = propagate(&c, &h, u0, &[e.order])?;
        let err = run.final_state.sub(&reference).norm();
        let max = run.weighted_series(e.order).unwrap_or_default().iter().map(|p| p.1).fold(0.0, f64::max);
        csv.push_str(&format!("{},{},{}\n", fmt_num(eps), fmt_num(err), fmt_num(max)));
        errors.push(err);
        maxima.push(max);
    }
    b.csv("convergence.csv", csv);
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let last = *errors.last().unwrap_or(&f64::NAN);
    let hi = maxima.iter().cloned().fold(f64::MIN, f64::max);
    let lo = maxima.iter().cloned().fold(f64::MAX, f64::min);
    let stability = hi / lo;
    b.scalar("final_error", last);
    b.scalar("stability_ratio", stability);
    let ok = decreasing && last <= e.final_tol && stability <= e.stability_ratio;
    let msg = format!(
        "{}: errors strictly decreasing: {decreasing}, final {last:.3e} (tol {:.1e}), max/min of max_t ||u_eps||_{} = {stability:.3}",
        setup.family.name(),
        e.final_tol,
        e.order
    );
    Ok(b.finish(ok, msg))
}

fn probe_options(cfg: &ExperimentConfig, probes: usize, power_iterations: usize) -> ProbeOptions {
    ProbeOptions { n_probe: probes, power_iterations, seed: cfg.seed }
}

fn parametrix(cfg: &ExperimentConfig, mut b: Builder) -> SuiteResult {
    let p = &cfg.parametrix;
    let (fam, grid) = cfg.parametrix_setup()?;
    let scan = scan_ellipticity(&fam, &grid, p.t, cfg.family.rho)?;
    let mus: Vec<f64> = p.offsets.iter().map(|o| scan.c1 + o).collect();
    let curve =
        parametrix_residual(&fam, &grid, p.t, cfg.family.rho, &mus, &probe_options(cfg, p.probes, p.power_iterations))?;
    b.csv("residual.csv", curve.to_csv());
    b.scalar("c0", scan.c0);
    b.scalar("c1", scan.c1);
    b.scalar("mu_min", scan.mu_min);
    let slope = curve.slope.unwrap_or(f64::NAN);
    b.scalar("slope", slope);
    let ok = (slope - p.target_slope).abs() <= p.slope_tol;
    let msg = format!("{}: fitted slope {slope:.4} (target {} +/- {})", fam.name(), p.target_slope, p.slope_tol);
    Ok(b.finish(ok, msg))
}

fn commutator(cfg: &ExperimentConfig, mut b: Builder) -> SuiteResult {
    let c = &cfg.commutator;
    let grid = cfg.spatial_grid()?;
    let fam = cfg.potential_family()?;
    let mu = match c.mu {
        Some(mu) => mu,
        None => scan_ellipticity(&fam, &grid, c.t, cfg.family.rho)?.mu_min,
    };
    let curve =
        commutator_probe(&fam, &grid, c.t, cfg.family.rho, mu, &c.eps, &probe_options(cfg, c.probes, c.power_iterations))?;
    b.csv("bound.csv", curve.to_csv());
    b.scalar("mu", mu);
    b.scalar("sup", curve.sup);
    b.scalar("growth", curve.growth);
    let ok = curve.sup.is_finite() && curve.growth <= c.max_growth;
    let msg = format!("max/min {:.3} (limit {}), sup {:.3e}", curve.growth, c.max_growth, curve.sup);
    Ok(b.finish(ok, msg))
}

fn sensitivity(cfg: &ExperimentConfig, mut b: Builder) -> SuiteResult {
    let s = &cfg.sensitivity;
    let setup = cfg.sensitivity_setup()?;
    require_rho_dependence(&setup)?;
    let (h, u0, pc) = (setup_handle(&setup, cfg.family.rho)?, &setup.initial, &setup.propagator);
    let rho = cfg.family.rho;
    let u0_norm = h.weighted_norm(1, u0)?;
    let rep = compare_quotients(pc, &h, u0, &s.taus, s.order, s.kind)?;
    b.csv("discrepancy.csv", rep.to_csv());
    let order = rep.observed_order.unwrap_or(f64::NAN);
    let ratio = rep.quotient_sup() / rep.variational_norm;
    b.scalar("observed_order", order);
    b.scalar("variational_max", rep.variational_norm);
    b.scalar("quotient_sup", rep.quotient_sup());

    // max_t ||w||_0 / ||u0||_1 at each parameter
    let constant = |r: f64| -> Result<f64, CliError> {
        if r == rho && s.order == 0 {
            return Ok(rep.variational_norm / u0_norm);
        }
        Ok(solve_variational(pc, &h.with_rho(r)?, u0, 0)?.max_norm() / u0_norm)
    };
    let reference = constant(rho)?;
    b.scalar("constant", reference);
    let mut csv = String::from("rho,constant\n");
    let mut worst: f64 = 0.0;
    for &r in &s.rhos {
        let c = constant(r)?;
        worst = worst.max((c / reference - 1.0).abs());
        csv.push_str(&format!("{},{}\n", fmt_num(r), fmt_num(c)));
    }
    b.csv("constants.csv", csv);
    b.scalar("constant_deviation", worst);
    let within = ratio.is_finite() && ratio <= s.quotient_factor && ratio >= 1.0 / s.quotient_factor;
    let ok = order >= s.min_order && worst <= s.constant_tol && within;
    let msg = format!(
        "{}: observed order {order:.3} (min {}), constant deviation {:.1}% (tol {:.0}%), quotient sup / variational max {ratio:.4}",
        setup.family.name(),
        s.min_order,
        100.0 * worst,
        100.0 * s.constant_tol
    );
    Ok(b.finish(ok, msg))
}

fn continuity(cfg: &ExperimentConfig, mut b: Builder) -> SuiteResult {
    let c = &cfg.continuity;
    let setup = cfg.continuity_setup()?;
    require_rho_dependence(&setup)?;
    let h = setup_handle(&setup, cfg.family.rho)?;
    let curve = continuity_modulus(&setup.propagator, &h, &setup.initial, cfg.family.rho, &c.deltas, c.order)?;
    b.csv("modulus.csv", curve.to_csv());
    let slope = curve.slope.unwrap_or(f64::NAN);
    b.scalar("slope", slope);
    let ok = slope >= c.min_slope;
    Ok(b.finish(ok, format!("{}: modulus slope {slope:.3} (min {})", setup.family.name(), c.min_slope)))
}

fn two_particle(cfg: &ExperimentConfig, mut b: Builder) -> SuiteResult {
    let tp = &cfg.two_particle;
    let first = cfg.family_for_dim(1)?;
    let second = cfg.second_family()?;
    let interaction = cfg.interaction()?;
    let rho = cfg.family.rho;
    let sys = TwoParticleSystem::new(&first, &second, &interaction, rho, tp.half_width, tp.points)?;
    let g1 = sys.single_grid().clone();
    let f1 = WaveFunction::gaussian(&g1, [tp.centers[0], 0.0], tp.width, [0.0, 0.0]);
    let f2 = WaveFunction::gaussian(&g1, [tp.centers[1], 0.0], tp.width, [0.0, 0.0]);
    let grid = Hamiltonian::grid(&sys).clone();
    let u0 = product_state(&grid, &f1, &f2)?;

    let run = propagate_two_particle(&cfg.propagator, &sys, &u0, &tp.orders)?;
    b.csv("trajectory.csv", run.to_csv());
    let drift = run.max_norm_drift();
    b.scalar("max_norm_drift", drift);
    for &a in &tp.orders {
        if let Some(r) = run.max_weighted_ratio(a) {
            b.scalar(format!("max_ratio_a{a}"), r);
        }
    }
    let moment_order = tp.orders.iter().copied().find(|a| *a > 0).unwrap_or(1);
    let order = sys.norm_order(moment_order)?;
    let mut csv = format!("t,moment_1_a{moment_order},moment_2_a{moment_order}\n");
    for (t, state) in &run.states {
        let [m1, m2] = particle_moments(&order, state)?;
        csv.push_str(&format!("{},{},{}\n", fmt_num(*t), fmt_num(m1), fmt_num(m2)));
    }
    b.csv("particles.csv", csv);

    let mut ok = drift <= tp.drift_tol;
    let mut msg = format!("norm drift {drift:.3e} (tol {:.1e})", tp.drift_tol);
    if tp.factorization {
        let err = factorization_error(cfg, &sys, &f1, &f2)?;
        b.scalar("factorization_error", err);
        ok &= err <= tp.factorization_tol;
        msg.push_str(&format!(", non-interacting factorization error {err:.3e} (tol {:.1e})", tp.factorization_tol));
    }
    Ok(b.finish(ok, msg))
}

/// Distance between the joint run with `W = 0` and the tensor product of the
/// single-particle runs. Uses the Lanczos exponential, which factors exactly
/// over commuting terms.
fn factorization_error(
    cfg: &ExperimentConfig,
    sys: &TwoParticleSystem,
    f1: &WaveFunction,
    f2: &WaveFunction,
) -> Result<f64, CliError> {
    let tp = &cfg.two_particle;
    let rho = cfg.family.rho;
    let free =
        TwoParticleSystem::new(sys.particle(0), sys.particle(1), &InteractionFamily::zero(), rho, tp.half_width, tp.points)?;
    let pc = PropagatorConfig { scheme: Scheme::Lanczos, save_every: 0, ..cfg.propagator.clone() };
    let grid = Hamiltonian::grid(&free).clone();
    let joint = propagate_two_particle(&pc, &free, &product_state(&grid, f1, f2)?, &[])?.final_state;
    let g1 = free.single_grid();
    let r1 = propagate(&pc, &HamiltonianHandle::new(free.particle(0), rho, g1)?, f1, &[])?.final_state;
    let r2 = propagate(&pc, &HamiltonianHandle::new(free.particle(1), rho, g1)?, f2, &[])?.final_state;
    Ok(joint.sub(&product_state(&grid, &r1, &r2)?).norm())
}
