//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tdse_core::linalg::random_vector;
use tdse_core::multiparticle::{product_state, propagate_two_particle, TwoParticleSystem};
use tdse_core::operators::{apply_hamiltonian, HamiltonianHandle};
use tdse_core::potentials::catalog::{builtin, switched_quartic, BUILTIN};
use tdse_core::potentials::{closed_samples, eval_potential, interior_samples, validate_assumption, InteractionFamily};
use tdse_core::propagator::{propagate, Hamiltonian, ParametricHamiltonian, PropagatorConfig, Scheme};
use tdse_core::sensitivity::{compare_quotients, QuotientKind};
use tdse_core::symbolcalc::{
    commutator_probe, eval_symbol, parametrix_residual, quantize_symbol, scan_ellipticity, CutoffSpec, ProbeOptions,
    SymbolField, SymbolKind,
};
use tdse_core::{make_grid, Result, SpatialGrid, WaveFunction};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

/// Shared run for the conservation and weighted-stability criteria.
fn quartic_run(dt: f64) -> Result<(tdse_core::propagator::PropagationRun, Duration)> {
    let g = make_grid(1, 10.0, 512)?;
    let h = HamiltonianHandle::new(&builtin("confined_quartic", 1)?, 1.0, &g)?;
    let u0 = WaveFunction::gaussian(&g, [0.5, 0.0], 0.8, [1.0, 0.0]);
    let start = Instant::now();
    let run = propagate(&PropagatorConfig::crank_nicolson(dt, 1.0), &h, &u0, &[1, 2])?;
    Ok((run, start.elapsed()))
}

fn norm_conservation() -> Result<Outcome> {
    let (run, took) = quartic_run(1e-3)?;
    let drift = run.max_norm_drift();
    outcome(
        drift <= 1e-7 && took <= Duration::from_secs(30),
        format!("max drift {drift:.2e} (<= 1e-7), runtime {} (<= 30s)", secs(took)),
    )
}

fn weighted_stability() -> Result<Outcome> {
    let (coarse, _) = quartic_run(1e-3)?;
    let (fine, _) = quartic_run(5e-4)?;
    let mut passed = true;
    let mut parts = Vec::new();
    for a in [1, 2] {
        let r = coarse.max_weighted_ratio(a).unwrap_or(f64::NAN);
        let r2 = fine.max_weighted_ratio(a).unwrap_or(f64::NAN);
        let change = (r2 / r - 1.0).abs();
        passed &= r.is_finite() && r2.is_finite() && change <= 0.2;
        parts.push(format!("a={a}: max ratio {r:.4} (dt), {r2:.4} (dt/2), change {:.1}%", 100.0 * change));
    }
    outcome(passed, parts.join("; "))
}

fn harmonic_exact() -> Result<Outcome> {
    let g = make_grid(1, 10.0, 512)?;
    let h = HamiltonianHandle::new(&builtin("harmonic", 1)?, 1.0, &g)?;
    let u0 = WaveFunction::gaussian(&g, [0.0, 0.0], 1.0, [0.0, 0.0]);
    let t = 1.0;
    let run = propagate(&PropagatorConfig::crank_nicolson(1e-3, t), &h, &u0, &[])?;
    let exact = u0.scaled(Complex64::from_polar(1.0, -0.5 * t));
    let err = run.final_state.sub(&exact).norm();
    outcome(err <= 1e-6, format!("ground-state error {err:.2e} (<= 1e-6)"))
}

fn parametrix_decay() -> Result<Outcome> {
    let start = Instant::now();
    let g = make_grid(1, 6.0, 128)?;
    let fam = builtin("quartic", 1)?;
    let scan = scan_ellipticity(&fam, &g, 0.0, 1.0)?;
    let mus: Vec<f64> = (0..6).map(|i| scan.c1 + 4.0 * 10f64.powf(i as f64 / 5.0)).collect();
    let curve = parametrix_residual(&fam, &g, 0.0, 1.0, &mus, &ProbeOptions::default())?;
    let took = start.elapsed();
    let slope = curve.slope.unwrap_or(f64::NAN);
    outcome(
        (slope + 0.5).abs() <= 0.15 && curve.skipped.is_empty() && took <= Duration::from_secs(120),
        format!("slope {slope:.3} (-0.5 +/- 0.15) over mu - C1 in [4, 40], runtime {} (<= 120s)", secs(took)),
    )
}

fn commutator_bound() -> Result<Outcome> {
    let g = make_grid(1, 6.0, 128)?;
    let fam = builtin("confined_quartic", 1)?;
    let mu = scan_ellipticity(&fam, &g, 0.0, 1.0)?.mu_min;
    let eps: Vec<f64> = (0..=6).map(|k| 0.5f64.powi(k)).collect();
    let curve = commutator_probe(&fam, &g, 0.0, 1.0, mu, &eps, &ProbeOptions { n_probe: 16, ..Default::default() })?;
    outcome(
        curve.growth <= 10.0 && curve.sup.is_finite(),
        format!("max/min {:.2} (<= 10), sup {:.3e}", curve.growth, curve.sup),
    )
}

fn regularization_convergence() -> Result<Outcome> {
    let g = make_grid(1, 10.0, 256)?;
    let fam = builtin("harmonic", 1)?;
    let h = HamiltonianHandle::new(&fam, 1.0, &g)?;
    let mu = scan_ellipticity(&fam, &g, 0.0, 1.0)?.mu_min;
    let u0 = WaveFunction::gaussian(&g, [0.0, 0.0], 1.0, [0.0, 0.0]);
    let cfg = PropagatorConfig::crank_nicolson(1e-3, 0.1);
    let reference = propagate(&cfg, &h, &u0, &[])?.final_state;
    let mut errors = Vec::new();
    for k in 0..=4 {
        let c = PropagatorConfig { cutoff: Some(CutoffSpec::gaussian(0.5f64.powi(k), mu)?), ..cfg.clone() };
        errors.push(propagate(&c, &h, &u0, &[])?.final_state.sub(&reference).norm());
    }
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let last = *errors.last().unwrap();
    let list: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    outcome(
        decreasing && last <= 1e-3,
        format!("errors [{}] strictly decreasing: {decreasing}, final {last:.2e} (<= 1e-3)", list.join(", ")),
    )
}

struct SensitivitySweep {
    orders: Vec<f64>,
    constants: Vec<(f64, f64)>,
    sup_ratio_at_one: f64,
}

fn sensitivity_sweep() -> Result<SensitivitySweep> {
    let g = make_grid(1, 8.0, 128)?;
    let fam = builtin("anharmonic", 1)?;
    let u0 = WaveFunction::gaussian(&g, [0.5, 0.0], 0.8, [0.0, 0.0]);
    let cfg = PropagatorConfig::crank_nicolson(1e-3, 2.0);
    let mut sweep = SensitivitySweep { orders: Vec::new(), constants: Vec::new(), sup_ratio_at_one: f64::NAN };
    for rho in [0.5, 1.0, 2.0] {
        let h = HamiltonianHandle::new(&fam, rho, &g)?;
        let rep = compare_quotients(&cfg, &h, &u0, &[1e-1, 1e-2, 1e-3], 0, QuotientKind::Central)?;
        sweep.constants.push((rho, rep.variational_norm / h.weighted_norm(1, &u0)?));
        if rho == 1.0 {
            sweep.orders.push(rep.observed_order.unwrap_or(f64::NAN));
            sweep.sup_ratio_at_one = rep.quotient_sup() / rep.variational_norm;
        }
    }
    Ok(sweep)
}

fn sensitivity(sweep: &SensitivitySweep) -> Result<Outcome> {
    let order = sweep.orders[0];
    let c_ref = sweep.constants.iter().find(|(r, _)| *r == 1.0).unwrap().1;
    let cs: Vec<f64> = sweep.constants.iter().map(|c| c.1).collect();
    let max = cs.iter().cloned().fold(f64::MIN, f64::max);
    let min = cs.iter().cloned().fold(f64::MAX, f64::min);
    let near_ref = cs.iter().all(|c| (c / c_ref - 1.0).abs() <= 0.5);
    let spread = max / min;
    let list: Vec<String> = sweep.constants.iter().map(|(r, c)| format!("C({r})={c:.4}")).collect();
    outcome(
        order >= 1.8 && near_ref && spread <= 1.5,
        format!("observed order {order:.3} (>= 1.8); {}; max/min {spread:.3} (<= 1.5)", list.join(" ")),
    )
}

fn quotient_bound(sweep: &SensitivitySweep) -> Result<Outcome> {
    let r = sweep.sup_ratio_at_one;
    outcome(
        r.is_finite() && (0.5..=2.0).contains(&r),
        format!("quotient sup / variational max = {r:.5} (within 2x)"),
    )
}

fn two_particle() -> Result<Outcome> {
    let start = Instant::now();
    let fam = builtin("confined_quartic", 1)?;
    let w = InteractionFamily::new("pair", "0.1*(1 + x^2)", 0.0, 1.0)?;
    let (l, n, dt, t) = (6.0, 128, 1e-3, 0.5);
    let sys = TwoParticleSystem::new(&fam, &fam, &w, 1.0, l, n)?;
    let g1 = sys.single_grid().clone();
    let f1 = WaveFunction::gaussian(&g1, [0.5, 0.0], 0.8, [1.0, 0.0]);
    let f2 = WaveFunction::gaussian(&g1, [-0.5, 0.0], 0.8, [0.0, 0.0]);
    let g = Hamiltonian::grid(&sys).clone();
    let u0 = product_state(&g, &f1, &f2)?;
    let drift = propagate_two_particle(&PropagatorConfig::crank_nicolson(dt, t), &sys, &u0, &[])?.max_norm_drift();

    let free = TwoParticleSystem::new(&fam, &fam, &InteractionFamily::zero(), 1.0, l, n)?;
    let cfg = PropagatorConfig { scheme: Scheme::Lanczos, ..PropagatorConfig::crank_nicolson(dt, t) };
    let joint = propagate_two_particle(&cfg, &free, &u0, &[])?.final_state;
    let single = HamiltonianHandle::new(&fam, free.rho(), &g1)?;
    let r1 = propagate(&cfg, &single, &f1, &[])?.final_state;
    let r2 = propagate(&cfg, &single, &f2, &[])?.final_state;
    let fact = joint.sub(&product_state(&g, &r1, &r2)?).norm();
    let took = start.elapsed();
    outcome(
        drift <= 1e-7 && fact <= 1e-6 && took <= Duration::from_secs(300),
        format!(
            "norm drift {drift:.2e} (<= 1e-7), factorization error {fact:.2e} (<= 1e-6), runtime {} (<= 300s)",
            secs(took)
        ),
    )
}

/// Dense matrix `(1/N) sum_k exp(i (x_j - x_l) xi_k) s(j, k)` of a 1-d symbol.
fn dense_quantization(g: &SpatialGrid, s: impl Fn(usize, usize) -> Complex64) -> Vec<Complex64> {
    let n = g.len();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for l in 0..n {
            let dx = g.point(j)[0] - g.point(l)[0];
            m[j * n + l] = (0..n).map(|k| Complex64::from_polar(1.0, dx * g.frequency(k)[0]) * s(j, k)).sum::<Complex64>()
                / n as f64;
        }
    }
    m
}

fn matvec(m: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n).map(|j| (0..n).map(|l| m[j * n + l] * v[l]).sum()).collect()
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let r: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (d / r).sqrt()
}

fn oracle_equivalence() -> Result<Outcome> {
    let g = make_grid(1, 6.0, 64)?;
    let fam = builtin("confined_quartic", 1)?;
    let (t, rho) = (0.3, 1.0);
    let n = g.len();

    let mu = scan_ellipticity(&fam, &g, t, rho)?.mu_min + 1.0;
    let symbols: Vec<SymbolField> = vec![
        eval_symbol(&SymbolKind::Hs, &fam, &g, t, rho)?,
        eval_symbol(&SymbolKind::Parametrix { mu }, &fam, &g, t, rho)?,
        eval_symbol(&SymbolKind::Cutoff(CutoffSpec::gaussian(0.25, mu)?), &fam, &g, t, rho)?,
    ];
    let dense: Vec<Vec<Complex64>> = symbols.iter().map(|s| dense_quantization(&g, |j, k| s.get(j, k))).collect();

    // H = p^2/2m - (A p + p A)/2m + A^2/2m + V from dense Fourier matrices
    let s = eval_potential(&fam, t, rho, &g)?;
    let m = fam.mass();
    let kin = dense_quantization(&g, |_, k| Complex64::new(g.frequency(k)[0].powi(2) / (2.0 * m), 0.0));
    let p = dense_quantization(&g, |_, k| Complex64::new(g.frequency(k)[0], 0.0));
    let a = &s.vector[0];
    let mut hm = kin;
    for j in 0..n {
        for l in 0..n {
            hm[j * n + l] -= p[j * n + l] * (a[j] + a[l]) / (2.0 * m);
        }
        hm[j * n + j] += a[j] * a[j] / (2.0 * m) + s.scalar[j];
    }
    let h = HamiltonianHandle::new(&fam, rho, &g)?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_q, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let v = WaveFunction::new(&g, random_vector(&mut rng, n))?;
        for (sym, mat) in symbols.iter().zip(&dense) {
            worst_q = worst_q.max(rel_err(quantize_symbol(sym, &v)?.values(), &matvec(mat, v.values())));
        }
        worst_h = worst_h.max(rel_err(apply_hamiltonian(&h, t, &v)?.values(), &matvec(&hm, v.values())));
    }
    outcome(
        worst_q <= 1e-10 && worst_h <= 1e-10,
        format!("quantize_symbol max rel err {worst_q:.2e}, apply_hamiltonian max rel err {worst_h:.2e} (<= 1e-10)"),
    )
}

fn validators() -> Result<Outcome> {
    let g = make_grid(1, 10.0, 256)?;
    let ts = closed_samples((0.0, 2.0 * std::f64::consts::PI), 9);
    let mut failed = Vec::new();
    for name in BUILTIN {
        let fam = builtin(name, 1)?;
        let rep = validate_assumption(&fam, &g, &ts, &interior_samples(fam.rho_range(), 4), 4)?;
        if !rep.passed {
            failed.push(name.to_string());
        }
    }
    let ts = closed_samples((0.0, 1.0), 5);
    let declared_quartic = validate_assumption(&switched_quartic(1, 1.0), &g, &ts, &[1.0], 2)?;
    let declared_quadratic = validate_assumption(&switched_quartic(1, 0.0), &g, &ts, &[1.0], 2)?;
    let lower = declared_quartic.check("scalar_lower_growth").is_some_and(|c| !c.passed);
    let upper = declared_quadratic.check("scalar_upper_growth").is_some_and(|c| !c.passed);
    outcome(
        failed.is_empty() && !declared_quartic.passed && !declared_quadratic.passed && lower && upper,
        format!(
            "builtins passing {}/{}; t|x|^4 + |x|^2 rejected: lower growth fails with M = 1 ({lower}), upper growth fails with M = 0 ({upper})",
            BUILTIN.len() - failed.len(),
            BUILTIN.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: usize, name: &str, res: Result<Outcome>| {
        let (passed, detail) = match res {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= passed;
        println!("[{}] {id:>2} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    };
    report(1, "norm conservation", norm_conservation());
    report(2, "weighted stability", weighted_stability());
    report(3, "harmonic exact solution", harmonic_exact());
    report(4, "parametrix decay", parametrix_decay());
    report(5, "uniform commutator bound", commutator_bound());
    report(6, "regularization convergence", regularization_convergence());
    match sensitivity_sweep() {
        Ok(sweep) => {
            report(7, "sensitivity", sensitivity(&sweep));
            report(8, "uniform quotient bound", quotient_bound(&sweep));
        }
        Err(e) => {
            let msg = e.to_string();
            report(7, "sensitivity", Err(tdse_core::Error::InvalidArgument(msg.clone())));
            report(8, "uniform quotient bound", Err(tdse_core::Error::InvalidArgument(msg)));
        }
    }
    report(9, "two-particle", two_particle());
    report(10, "oracle equivalence", oracle_equivalence());
    report(11, "assumption validators", validators());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
