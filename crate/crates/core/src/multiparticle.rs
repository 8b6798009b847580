//! Two particles on a line, each with its own electromagnetic family, coupled
//! by a pair interaction of the relative coordinate.
//!
//! The composite configuration space is a 2-d grid whose axis `k` carries the
//! coordinate of particle `k`.

use crate::error::{Error, Result};
use crate::grid::{make_grid, SpatialGrid, WaveFunction};
use crate::operators::{derivative_norm_sum, FrozenHamiltonian, LinearOperator};
use crate::potentials::{eval_potential, partial_rho, InteractionFamily, PotentialFamily};
use crate::propagator::{propagate, Hamiltonian, ParametricHamiltonian, PropagationRun, PropagatorConfig};

/// Largest per-particle point count accepted by [`propagate_two_particle`].
pub const MAX_POINTS_PER_PARTICLE: usize = 256;

/// Joint scalar potential and, per particle, its vector potential if any.
type ScalarPart = (Vec<f64>, Vec<Option<Vec<f64>>>);

#[derive(Debug, Clone)]
pub struct TwoParticleSystem {
    particles: [PotentialFamily; 2],
    interaction: InteractionFamily,
    rho: f64,
    single: SpatialGrid,
    grid: SpatialGrid,
}

impl TwoParticleSystem {
    /// Both particles live on the 1-d grid `[-half_width, half_width)` with
    /// `points` nodes. The parameter `rho` is shared by all three potentials.
    pub fn new(
        first: &PotentialFamily,
        second: &PotentialFamily,
        interaction: &InteractionFamily,
        rho: f64,
        half_width: f64,
        points: usize,
    ) -> Result<Self> {
        for fam in [first, second] {
            if fam.dim() != 1 {
                return Err(Error::InvalidFamily {
                    name: fam.name().to_string(),
                    reason: format!("particles move on a line, family is {}-dimensional", fam.dim()),
                });
            }
        }
        let single = make_grid(1, half_width, points)?;
        let grid = make_grid(2, half_width, points)?;
        let sys = Self { particles: [first.clone(), second.clone()], interaction: interaction.clone(), rho, single, grid };
        sys.scalar_part(0.0)?;
        Ok(sys)
    }

    pub fn particle(&self, k: usize) -> &PotentialFamily {
        &self.particles[k]
    }

    pub fn interaction(&self) -> &InteractionFamily {
        &self.interaction
    }

    pub fn masses(&self) -> [f64; 2] {
        [self.particles[0].mass(), self.particles[1].mass()]
    }

    /// The per-particle 1-d grid.
    pub fn single_grid(&self) -> &SpatialGrid {
        &self.single
    }

    pub fn norm_order(&self, a: i32) -> Result<PrimedNormOrder> {
        PrimedNormOrder::new(a, [self.particles[0].growth_order(), self.particles[1].growth_order()], &self.grid)
    }

    /// Relative coordinate `x1 - x2` wrapped into the periodic cell.
    fn separation(&self, idx: usize) -> f64 {
        let period = 2.0 * self.grid.half_width();
        let r = self.grid.coordinate(idx, 0) - self.grid.coordinate(idx, 1);
        r - period * (r / period).round()
    }

    /// Lifts per-particle samples on the 1-d grid to the composite grid.
    fn lift(&self, k: usize, samples: &[f64]) -> Vec<f64> {
        (0..self.grid.len()).map(|idx| samples[self.grid.unflatten(idx)[k]]).collect()
    }

    /// `V1 + V2 + W + sum_k |A_k|^2 / 2m_k` and the lifted vector potentials.
    fn scalar_part(&self, t: f64) -> Result<ScalarPart> {
        let mut scalar: Vec<f64> = (0..self.grid.len())
            .map(|idx| self.interaction.eval(t, self.rho, self.separation(idx)))
            .collect();
        if let Some(i) = scalar.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut vector = Vec::with_capacity(2);
        for (k, fam) in self.particles.iter().enumerate() {
            let s = eval_potential(fam, t, self.rho, &self.single)?;
            let v = self.lift(k, &s.scalar);
            scalar.iter_mut().zip(&v).for_each(|(w, vk)| *w += vk);
            vector.push(match s.vector.first() {
                Some(a) if a.iter().any(|v| *v != 0.0) => {
                    let a = self.lift(k, a);
                    let m = fam.mass();
                    scalar.iter_mut().zip(&a).for_each(|(w, ak)| *w += ak * ak / (2.0 * m));
                    Some(a)
                }
                _ => None,
            });
        }
        Ok((scalar, vector))
    }

    pub fn freeze(&self, t: f64) -> Result<FrozenHamiltonian> {
        let (scalar, vector) = self.scalar_part(t)?;
        Ok(FrozenHamiltonian::new(&self.grid, &self.masses(), true, vector, scalar))
    }

    pub fn freeze_d_rho(&self, t: f64) -> Result<FrozenHamiltonian> {
        let mut scalar: Vec<f64> = (0..self.grid.len())
            .map(|idx| self.interaction.eval_drho(t, self.rho, self.separation(idx)))
            .collect();
        let mut vector = Vec::with_capacity(2);
        for (k, fam) in self.particles.iter().enumerate() {
            let s = eval_potential(fam, t, self.rho, &self.single)?;
            let d = partial_rho(fam, t, self.rho, &self.single)?;
            let dv = self.lift(k, &d.scalar);
            scalar.iter_mut().zip(&dv).for_each(|(w, v)| *w += v);
            vector.push(match (s.vector.first(), d.vector.first()) {
                (Some(a), Some(da)) => {
                    let m = fam.mass();
                    let cross: Vec<f64> = a.iter().zip(da).map(|(a, da)| a * da / m).collect();
                    let cross = self.lift(k, &cross);
                    scalar.iter_mut().zip(&cross).for_each(|(w, c)| *w += c);
                    da.iter().any(|v| *v != 0.0).then(|| self.lift(k, da))
                }
                _ => None,
            });
        }
        Ok(FrozenHamiltonian::new(&self.grid, &self.masses(), false, vector, scalar))
    }
}

impl Hamiltonian for TwoParticleSystem {
    fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn freeze_at(&self, t: f64) -> Result<Box<dyn LinearOperator + '_>> {
        Ok(Box::new(self.freeze(t)?))
    }

    fn weighted_norm(&self, a: i32, f: &WaveFunction) -> Result<f64> {
        weighted_norm_primed(&self.norm_order(a)?, f)
    }

    fn is_time_dependent(&self) -> bool {
        self.particles.iter().any(|p| p.is_time_dependent()) || self.interaction.is_time_dependent()
    }
}

impl ParametricHamiltonian for TwoParticleSystem {
    fn rho(&self) -> f64 {
        self.rho
    }

    /// Intersection of the two particles' parameter ranges.
    fn rho_range(&self) -> (f64, f64) {
        let (a0, a1) = self.particles[0].rho_range();
        let (b0, b1) = self.particles[1].rho_range();
        (a0.max(b0), a1.min(b1))
    }

    fn depends_on_rho(&self) -> bool {
        self.particles.iter().any(|p| p.depends_on_rho()) || self.interaction.depends_on_rho()
    }

    fn with_rho(&self, rho: f64) -> Result<Self> {
        let sys = Self { rho, ..self.clone() };
        sys.scalar_part(0.0)?;
        Ok(sys)
    }

    fn freeze_d_rho(&self, t: f64) -> Result<Box<dyn LinearOperator + '_>> {
        Ok(Box::new(TwoParticleSystem::freeze_d_rho(self, t)?))
    }
}

/// `H_1 (x) I + I (x) H_2 + W_12` at `(t, rho)` applied to `f`.
pub fn apply_two_particle_hamiltonian(sys: &TwoParticleSystem, t: f64, rho: f64, f: &WaveFunction) -> Result<WaveFunction> {
    if f.grid() != &sys.grid {
        return Err(Error::GridMismatch);
    }
    if rho == sys.rho {
        Ok(sys.freeze(t)?.apply(f))
    } else {
        Ok(sys.with_rho(rho)?.freeze(t)?.apply(f))
    }
}

/// Order and per-particle weights of the composite weighted norm.
#[derive(Debug, Clone)]
pub struct PrimedNormOrder {
    a: i32,
    growth_orders: [f64; 2],
    weights: [Vec<f64>; 2],
    grid: SpatialGrid,
}

impl PrimedNormOrder {
    /// Only non-negative orders are available on the composite space.
    pub fn new(a: i32, growth_orders: [f64; 2], grid: &SpatialGrid) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::InvalidArgument("the composite norm lives on a 2-d grid".into()));
        }
        if !(0..=crate::operators::MAX_NORM_ORDER).contains(&a) {
            return Err(Error::Unsupported(format!(
                "composite weighted norm of order {a}; orders 0..={} are available",
                crate::operators::MAX_NORM_ORDER
            )));
        }
        let weights = [0, 1].map(|k| {
            let p = 2.0 * a as f64 * (growth_orders[k] + 1.0);
            grid.sample(|x| (1.0 + x[k] * x[k]).sqrt().powf(p))
        });
        Ok(Self { a, growth_orders, weights, grid: grid.clone() })
    }

    pub fn order(&self) -> i32 {
        self.a
    }

    pub fn growth_orders(&self) -> [f64; 2] {
        self.growth_orders
    }
}

/// `||f|| + sum_{1 <= |alpha| <= 2a} ||d^alpha f|| + sum_k ||<x_k>^{2a(M_k+1)} f||`,
/// which is the plain L2 norm for `a = 0`.
pub fn weighted_norm_primed(order: &PrimedNormOrder, f: &WaveFunction) -> Result<f64> {
    if f.grid() != &order.grid {
        return Err(Error::GridMismatch);
    }
    if order.a == 0 {
        return Ok(f.norm());
    }
    let moments: f64 = order.weights.iter().map(|w| f.mul_real(w).norm()).sum();
    Ok(f.norm() + derivative_norm_sum(f, order.a)? + moments)
}

/// Per-particle moment terms `||<x_k>^{2a(M_k+1)} f||`.
pub fn particle_moments(order: &PrimedNormOrder, f: &WaveFunction) -> Result<[f64; 2]> {
    if f.grid() != &order.grid {
        return Err(Error::GridMismatch);
    }
    Ok([f.mul_real(&order.weights[0]).norm(), f.mul_real(&order.weights[1]).norm()])
}

/// Propagates a two-particle state, refusing grids above
/// [`MAX_POINTS_PER_PARTICLE`] points per particle.
pub fn propagate_two_particle(
    cfg: &PropagatorConfig,
    sys: &TwoParticleSystem,
    u0: &WaveFunction,
    orders: &[i32],
) -> Result<PropagationRun> {
    if sys.single.points() > MAX_POINTS_PER_PARTICLE {
        return Err(Error::InvalidArgument(format!(
            "{} points per particle exceeds the limit of {MAX_POINTS_PER_PARTICLE}",
            sys.single.points()
        )));
    }
    if cfg.cutoff.is_some_and(|c| !c.is_identity()) {
        return Err(Error::Unsupported("mollified flow is only available for single-particle Hamiltonians".into()));
    }
    propagate(&cfg_without_cutoff(cfg), sys, u0, orders)
}

fn cfg_without_cutoff(cfg: &PropagatorConfig) -> PropagatorConfig {
    PropagatorConfig { cutoff: None, ..cfg.clone() }
}

/// Tensor product `f (x) g` of two 1-d states on the composite grid.
pub fn product_state(grid: &SpatialGrid, first: &WaveFunction, second: &WaveFunction) -> Result<WaveFunction> {
    if grid.dim() != 2 || first.grid().dim() != 1 || first.grid() != second.grid() || first.len() != grid.points() {
        return Err(Error::GridMismatch);
    }
    let (a, b) = (first.values(), second.values());
    let values = (0..grid.len())
        .map(|idx| {
            let [i, j] = grid.unflatten(idx);
            a[i] * b[j]
        })
        .collect();
    WaveFunction::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l2_inner_product, spectral_derivative};
    use crate::linalg::random_vector;
    use crate::operators::HamiltonianHandle;
    use crate::potentials::catalog::builtin;
    use crate::propagator::Scheme;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_wave(grid: &SpatialGrid, seed: u64) -> WaveFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WaveFunction::new(grid, random_vector(&mut rng, grid.len())).unwrap()
    }

    fn pair(w: &str) -> TwoParticleSystem {
        let q = builtin("confined_quartic", 1).unwrap();
        let h = builtin("harmonic", 1).unwrap();
        let w = InteractionFamily::new("w", w, 0.0, 1.0).unwrap();
        TwoParticleSystem::new(&q, &h, &w, 1.0, 6.0, 32).unwrap()
    }

    #[test]
    fn hamiltonian_is_additive_over_particles() {
        let sys = pair("0");
        let g1 = sys.single_grid().clone();
        let f1 = WaveFunction::gaussian(&g1, [0.3, 0.0], 0.9, [0.5, 0.0]);
        let f2 = WaveFunction::gaussian(&g1, [-0.2, 0.0], 1.1, [-1.0, 0.0]);
        let t = 0.4;
        let h1 = HamiltonianHandle::new(sys.particle(0), 1.0, &g1).unwrap().freeze(t).unwrap();
        let h2 = HamiltonianHandle::new(sys.particle(1), 1.0, &g1).unwrap().freeze(t).unwrap();
        let g = Hamiltonian::grid(&sys).clone();
        let expect = product_state(&g, &h1.apply(&f1), &f2)
            .unwrap()
            .add(&product_state(&g, &f1, &h2.apply(&f2)).unwrap());
        let got = apply_two_particle_hamiltonian(&sys, t, 1.0, &product_state(&g, &f1, &f2).unwrap()).unwrap();
        assert!(got.sub(&expect).norm() / expect.norm() < 1e-12);
    }

    #[test]
    fn composite_hamiltonian_is_hermitian() {
        let sys = pair("0.3 * (1 + x^2)");
        let g = Hamiltonian::grid(&sys).clone();
        let (f, h) = (random_wave(&g, 1), random_wave(&g, 2));
        let op = sys.freeze(0.7).unwrap();
        let lhs = l2_inner_product(&op.apply(&f), &h).unwrap();
        let rhs = l2_inner_product(&f, &op.apply(&h)).unwrap();
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-12);
    }

    #[test]
    fn constant_interaction_shifts_spectrum() {
        let a = pair("0");
        let b = pair("2.5");
        let g = Hamiltonian::grid(&a).clone();
        let f = random_wave(&g, 3);
        let diff = apply_two_particle_hamiltonian(&b, 0.2, 1.0, &f)
            .unwrap()
            .sub(&apply_two_particle_hamiltonian(&a, 0.2, 1.0, &f).unwrap());
        assert!(diff.sub(&f.scaled(Complex64::new(2.5, 0.0))).norm() < 1e-10 * f.norm());
    }

    #[test]
    fn interaction_uses_wrapped_separation() {
        let sys = pair("x^2");
        let l = sys.single_grid().half_width();
        for idx in 0..Hamiltonian::grid(&sys).len() {
            let r = sys.separation(idx);
            assert!((-l..=l).contains(&r));
        }
    }

    #[test]
    fn primed_norm_matches_product_gaussian_oracle() {
        let q = builtin("quartic", 1).unwrap();
        let h = builtin("harmonic", 1).unwrap();
        let sys = TwoParticleSystem::new(&q, &h, &InteractionFamily::zero(), 1.0, 8.0, 64).unwrap();
        let g1 = sys.single_grid().clone();
        let f1 = WaveFunction::gaussian(&g1, [0.2, 0.0], 0.8, [0.0, 0.0]);
        let f2 = WaveFunction::gaussian(&g1, [-0.4, 0.0], 1.2, [1.0, 0.0]);
        let f = product_state(Hamiltonian::grid(&sys), &f1, &f2).unwrap();
        let a = 1;
        // derivatives and moments of a product factor into 1-d pieces
        let d = |f: &WaveFunction, k: u32| if k == 0 { f.norm() } else { spectral_derivative(f, 0, k).unwrap().norm() };
        let mut expect = f1.norm() * f2.norm();
        for i in 0..=2u32 {
            for j in 0..=(2 - i) {
                if i + j > 0 {
                    expect += d(&f1, i) * d(&f2, j);
                }
            }
        }
        let moment = |f: &WaveFunction, m: f64| {
            let w = g1.sample(|x| (1.0 + x[0] * x[0]).powf((m + 1.0) * a as f64));
            f.mul_real(&w).norm()
        };
        expect += moment(&f1, 1.0) * f2.norm() + f1.norm() * moment(&f2, 0.0);
        let got = Hamiltonian::weighted_norm(&sys, a, &f).unwrap();
        assert!((got - expect).abs() / expect < 1e-12, "{got} vs {expect}");
        assert_eq!(Hamiltonian::weighted_norm(&sys, 0, &f).unwrap(), f.norm());
        assert!(sys.norm_order(-1).is_err());
    }

    #[test]
    fn exchange_symmetry_is_preserved() {
        let h = builtin("anharmonic", 1).unwrap();
        let w = InteractionFamily::new("w", "rho * (1 + x^2)", 0.0, 1.0).unwrap();
        let sys = TwoParticleSystem::new(&h, &h, &w, 0.5, 6.0, 32).unwrap();
        let g = Hamiltonian::grid(&sys).clone();
        let g1 = sys.single_grid().clone();
        let a = WaveFunction::gaussian(&g1, [0.8, 0.0], 0.7, [0.0, 0.0]);
        let b = WaveFunction::gaussian(&g1, [-0.5, 0.0], 0.9, [0.5, 0.0]);
        let u0 = product_state(&g, &a, &b).unwrap().add(&product_state(&g, &b, &a).unwrap());
        let run = propagate_two_particle(&PropagatorConfig::crank_nicolson(1e-2, 0.2), &sys, &u0, &[]).unwrap();
        let u = run.final_state.values();
        let n = g1.points();
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                defect = defect.max((u[i * n + j] - u[j * n + i]).norm());
            }
        }
        assert!(defect < 1e-10, "{defect}");
    }

    #[test]
    fn noninteracting_flow_factorizes() {
        let sys = pair("0");
        let g1 = sys.single_grid().clone();
        let f1 = WaveFunction::gaussian(&g1, [0.3, 0.0], 0.9, [0.5, 0.0]);
        let f2 = WaveFunction::gaussian(&g1, [-0.2, 0.0], 1.1, [-1.0, 0.0]);
        let cfg = PropagatorConfig { scheme: Scheme::Lanczos, ..PropagatorConfig::lanczos(1e-2, 0.3) };
        let run1 = propagate(&cfg, &HamiltonianHandle::new(sys.particle(0), 1.0, &g1).unwrap(), &f1, &[]).unwrap();
        let run2 = propagate(&cfg, &HamiltonianHandle::new(sys.particle(1), 1.0, &g1).unwrap(), &f2, &[]).unwrap();
        let g = Hamiltonian::grid(&sys).clone();
        let joint = propagate_two_particle(&cfg, &sys, &product_state(&g, &f1, &f2).unwrap(), &[]).unwrap();
        let expect = product_state(&g, &run1.final_state, &run2.final_state).unwrap();
        assert!(joint.final_state.sub(&expect).norm() < 1e-9);
    }

    #[test]
    fn grid_limit_and_cutoff_are_enforced() {
        let h = builtin("harmonic", 1).unwrap();
        let sys = TwoParticleSystem::new(&h, &h, &InteractionFamily::zero(), 1.0, 6.0, 512).unwrap();
        let u0 = WaveFunction::zeros(Hamiltonian::grid(&sys));
        let cfg = PropagatorConfig::crank_nicolson(0.1, 0.1);
        assert!(propagate_two_particle(&cfg, &sys, &u0, &[]).is_err());
        let sys = pair("0");
        let u0 = WaveFunction::gaussian(Hamiltonian::grid(&sys), [0.0, 0.0], 1.0, [0.0, 0.0]);
        let cfg = PropagatorConfig { cutoff: Some(crate::symbolcalc::CutoffSpec::gaussian(0.5, 1.0).unwrap()), ..cfg };
        assert!(matches!(propagate_two_particle(&cfg, &sys, &u0, &[]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn parameter_derivative_matches_difference() {
        let h = builtin("anharmonic", 1).unwrap();
        let w = InteractionFamily::new("w", "rho * (1 + x^2)", 0.0, 1.0).unwrap();
        let sys = TwoParticleSystem::new(&h, &h, &w, 1.0, 6.0, 32).unwrap();
        let g = Hamiltonian::grid(&sys).clone();
        let f = WaveFunction::gaussian(&g, [0.2, -0.3], 1.0, [0.0, 0.0]);
        let e = 1e-5;
        let plus = sys.with_rho(1.0 + e).unwrap().freeze(0.0).unwrap().apply(&f);
        let minus = sys.with_rho(1.0 - e).unwrap().freeze(0.0).unwrap().apply(&f);
        let fd = plus.sub(&minus).scaled(Complex64::new(0.5 / e, 0.0));
        let exact = sys.freeze_d_rho(0.0).unwrap().apply(&f);
        assert!(fd.sub(&exact).norm() / exact.norm() < 1e-8);
    }

    #[test]
    fn tensor_eigenvalues_add() {
        let h = builtin("harmonic", 1).unwrap();
        let sys = TwoParticleSystem::new(&h, &h, &InteractionFamily::zero(), 1.0, 8.0, 64).unwrap();
        let g1 = sys.single_grid().clone();
        // ground state and first excited state of x^2/2
        let e0 = WaveFunction::gaussian(&g1, [0.0, 0.0], 1.0, [0.0, 0.0]);
        let e1 = WaveFunction::from_fn(&g1, |x| Complex64::new(x[0] * (-x[0] * x[0] / 2.0).exp(), 0.0)).unwrap();
        let f = product_state(Hamiltonian::grid(&sys), &e0, &e1).unwrap();
        let hf = apply_two_particle_hamiltonian(&sys, 0.0, 1.0, &f).unwrap();
        assert!(hf.sub(&f.scaled(Complex64::new(2.0, 0.0))).norm() < 1e-10 * f.norm());
    }

    #[test]
    fn primed_norm_closed_form_gaussian() {
        let h = builtin("harmonic", 1).unwrap();
        let sys = TwoParticleSystem::new(&h, &h, &InteractionFamily::zero(), 1.0, 10.0, 128).unwrap();
        let g1 = sys.single_grid().clone();
        let g = WaveFunction::gaussian(&g1, [0.0, 0.0], 1.0, [0.0, 0.0]);
        let f = product_state(Hamiltonian::grid(&sys), &g, &g).unwrap();
        // ||g'|| = 1/sqrt 2, ||g''|| = sqrt 3 / 2, ||<x>^2 g|| = sqrt(1 + 1 + 3/4)
        let expect = 1.0 + 2.0 * 0.5f64.sqrt() + 3f64.sqrt() + 0.5 + 2.0 * 2.75f64.sqrt();
        let got = weighted_norm_primed(&sys.norm_order(1).unwrap(), &f).unwrap();
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
        let mut prev = 0.0;
        for a in 0..=2 {
            let n = weighted_norm_primed(&sys.norm_order(a).unwrap(), &f).unwrap();
            assert!(n > prev);
            prev = n;
        }
        let [m1, m2] = particle_moments(&sys.norm_order(1).unwrap(), &f).unwrap();
        assert!((m1 - 2.75f64.sqrt()).abs() < 1e-6 && (m2 - m1).abs() < 1e-12);
    }

    #[test]
    fn coupling_sensitivity_converges_at_second_order() {
        use crate::sensitivity::{compare_quotients, QuotientKind};
        let h = builtin("harmonic", 1).unwrap();
        let w = InteractionFamily::new("w", "rho * (1 + x^2)", 0.0, 1.0).unwrap();
        let sys = TwoParticleSystem::new(&h, &h, &w, 0.1, 6.0, 32).unwrap();
        let g1 = sys.single_grid().clone();
        let a = WaveFunction::gaussian(&g1, [0.5, 0.0], 0.8, [0.0, 0.0]);
        let b = WaveFunction::gaussian(&g1, [-0.5, 0.0], 0.8, [0.0, 0.0]);
        let u0 = product_state(Hamiltonian::grid(&sys), &a, &b).unwrap();
        let cfg = PropagatorConfig::crank_nicolson(1e-2, 0.3);
        let rep = compare_quotients(&cfg, &sys, &u0, &[5e-2, 5e-3], 0, QuotientKind::Central).unwrap();
        assert!(rep.variational_norm > 0.0);
        assert!(rep.observed_order.unwrap() > 1.8, "{:?}", rep.points);
    }
}
