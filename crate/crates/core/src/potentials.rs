//! Closed-form time- and parameter-dependent electromagnetic potentials,
//! the builtin catalog, and sampling validators for the growth hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var};
use crate::grid::SpatialGrid;

/// Scalar and vector potential samples on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSamples {
    pub scalar: Vec<f64>,
    /// One array per spatial component.
    pub vector: Vec<Vec<f64>>,
}

impl PotentialSamples {
    pub fn has_vector(&self) -> bool {
        self.vector.iter().any(|a| a.iter().any(|v| *v != 0.0))
    }
}

#[derive(Debug, Clone)]
pub struct PotentialFamily {
    name: String,
    dim: usize,
    mass: f64,
    growth_order: f64,
    delta: f64,
    rho_range: (f64, f64),
    scalar_src: String,
    vector_src: Vec<String>,
    scalar: Expr,
    vector: Vec<Expr>,
    dt_scalar: Expr,
    dt_vector: Vec<Expr>,
    drho_scalar: Expr,
    drho_vector: Vec<Expr>,
    divergence: Expr,
}

/// Declarative description, as read from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub dim: usize,
    pub scalar: String,
    #[serde(default)]
    pub vector: Vec<String>,
    pub growth_order: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "default_rho_range")]
    pub rho_range: (f64, f64),
}

fn one() -> f64 {
    1.0
}

fn default_rho_range() -> (f64, f64) {
    (0.0, 4.0)
}

impl PotentialFamily {
    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidFamily { name: spec.name.clone(), reason };
        if spec.dim == 0 || spec.dim > 2 {
            return Err(invalid(format!("dimension {} unsupported", spec.dim)));
        }
        if !(spec.mass > 0.0 && spec.mass.is_finite()) {
            return Err(invalid(format!("mass {} must be positive", spec.mass)));
        }
        if !(spec.growth_order >= 0.0 && spec.growth_order.is_finite()) {
            return Err(invalid(format!("growth order {} must be nonnegative", spec.growth_order)));
        }
        if spec.rho_range.0.partial_cmp(&spec.rho_range.1) != Some(std::cmp::Ordering::Less) {
            return Err(invalid(format!("parameter interval {:?} is empty", spec.rho_range)));
        }
        let scalar = Expr::parse(&spec.scalar, spec.dim).map_err(|e| invalid(e.to_string()))?;
        let mut vector_src = spec.vector.clone();
        if vector_src.is_empty() {
            vector_src = vec!["0".to_string(); spec.dim];
        }
        if vector_src.len() != spec.dim {
            return Err(invalid(format!(
                "vector potential has {} components, expected {}",
                vector_src.len(),
                spec.dim
            )));
        }
        let vector = vector_src
            .iter()
            .map(|s| Expr::parse(s, spec.dim).map_err(|e| invalid(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mut divergence = Expr::constant(0.0);
        for (j, a) in vector.iter().enumerate() {
            let d = a.diff(Var::X(j));
            if !d.is_zero() {
                divergence = if divergence.is_zero() { d } else { Expr::Add(Box::new(divergence), Box::new(d)) };
            }
        }
        Ok(Self {
            name: spec.name.clone(),
            dim: spec.dim,
            mass: spec.mass,
            growth_order: spec.growth_order,
            delta: spec.delta,
            rho_range: spec.rho_range,
            scalar_src: spec.scalar.clone(),
            vector_src,
            dt_scalar: scalar.diff(Var::T),
            dt_vector: vector.iter().map(|a| a.diff(Var::T)).collect(),
            drho_scalar: scalar.diff(Var::Rho),
            drho_vector: vector.iter().map(|a| a.diff(Var::Rho)).collect(),
            scalar,
            vector,
            divergence,
        })
    }

    pub fn spec(&self) -> FamilySpec {
        FamilySpec {
            name: self.name.clone(),
            dim: self.dim,
            scalar: self.scalar_src.clone(),
            vector: self.vector_src.clone(),
            growth_order: self.growth_order,
            delta: self.delta,
            mass: self.mass,
            rho_range: self.rho_range,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn growth_order(&self) -> f64 {
        self.growth_order
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho_range(&self) -> (f64, f64) {
        self.rho_range
    }

    pub fn contains_rho(&self, rho: f64) -> bool {
        rho > self.rho_range.0 && rho < self.rho_range.1
    }

    pub fn depends_on_rho(&self) -> bool {
        !self.drho_scalar.is_zero() || self.drho_vector.iter().any(|a| !a.is_zero())
    }

    pub fn has_vector_potential(&self) -> bool {
        self.vector.iter().any(|a| !a.is_zero())
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.dt_scalar.is_zero() || self.dt_vector.iter().any(|a| !a.is_zero())
    }

    pub fn scalar_expr(&self) -> &Expr {
        &self.scalar
    }

    pub fn vector_exprs(&self) -> &[Expr] {
        &self.vector
    }

    pub fn scalar_at(&self, t: f64, rho: f64, x: [f64; 2]) -> f64 {
        self.scalar.eval(&Env::new(t, rho, x))
    }

    pub fn vector_at(&self, t: f64, rho: f64, x: [f64; 2], component: usize) -> f64 {
        self.vector[component].eval(&Env::new(t, rho, x))
    }

    pub fn divergence_at(&self, t: f64, rho: f64, x: [f64; 2]) -> f64 {
        self.divergence.eval(&Env::new(t, rho, x))
    }

    fn check_dim(&self, grid: &SpatialGrid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::InvalidFamily {
                name: self.name.clone(),
                reason: format!("family is {}-dimensional, grid is {}-dimensional", self.dim, grid.dim()),
            });
        }
        Ok(())
    }

    fn sample(&self, scalar: &Expr, vector: &[Expr], t: f64, rho: f64, grid: &SpatialGrid) -> Result<PotentialSamples> {
        self.check_dim(grid)?;
        let eval = |e: &Expr| -> Result<Vec<f64>> {
            if e.is_zero() {
                return Ok(vec![0.0; grid.len()]);
            }
            let v = grid.sample(|x| e.eval(&Env::new(t, rho, x)));
            if let Some(i) = v.iter().position(|s| !s.is_finite()) {
                return Err(Error::InvalidFamily {
                    name: self.name.clone(),
                    reason: format!("non-finite sample at x = {:?}, t = {t}, rho = {rho}", grid.point(i)),
                });
            }
            Ok(v)
        };
        Ok(PotentialSamples {
            scalar: eval(scalar)?,
            vector: vector.iter().map(eval).collect::<Result<_>>()?,
        })
    }

    pub fn divergence_samples(&self, t: f64, rho: f64, grid: &SpatialGrid) -> Vec<f64> {
        if self.divergence.is_zero() {
            return vec![0.0; grid.len()];
        }
        grid.sample(|x| self.divergence.eval(&Env::new(t, rho, x)))
    }
}

/// Samples `(V, A)` at time `t` and parameter `rho` on the grid nodes.
pub fn eval_potential(fam: &PotentialFamily, t: f64, rho: f64, grid: &SpatialGrid) -> Result<PotentialSamples> {
    fam.sample(&fam.scalar, &fam.vector, t, rho, grid)
}

/// Closed-form `(dV/drho, dA/drho)`; zero arrays for parameter-free families.
pub fn partial_rho(fam: &PotentialFamily, t: f64, rho: f64, grid: &SpatialGrid) -> Result<PotentialSamples> {
    fam.sample(&fam.drho_scalar, &fam.drho_vector, t, rho, grid)
}

/// Closed-form time derivatives `(dV/dt, dA/dt)`.
pub fn partial_t(fam: &PotentialFamily, t: f64, rho: f64, grid: &SpatialGrid) -> Result<PotentialSamples> {
    fam.sample(&fam.dt_scalar, &fam.dt_vector, t, rho, grid)
}

/// Pair interaction `W(t, r; rho)` of the relative coordinate.
#[derive(Debug, Clone)]
pub struct InteractionFamily {
    name: String,
    src: String,
    expr: Expr,
    drho: Expr,
    growth_order: f64,
    delta: f64,
}

impl InteractionFamily {
    /// `growth_order` is `M_0`, the smaller of the two particles' growth orders.
    pub fn new(name: &str, src: &str, growth_order: f64, delta: f64) -> Result<Self> {
        let expr = Expr::parse(src, 1).map_err(|e| Error::InvalidFamily {
            name: name.to_string(),
            reason: e.to_string(),
        })?;
        Ok(Self {
            name: name.to_string(),
            src: src.to_string(),
            drho: expr.diff(Var::Rho),
            expr,
            growth_order,
            delta,
        })
    }

    pub fn zero() -> Self {
        Self::new("none", "0", 0.0, 1.0).expect("constant expression parses")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn is_zero(&self) -> bool {
        self.expr.is_zero()
    }

    pub fn depends_on_rho(&self) -> bool {
        !self.drho.is_zero()
    }

    pub fn is_time_dependent(&self) -> bool {
        self.expr.depends_on(Var::T)
    }

    pub fn growth_order(&self) -> f64 {
        self.growth_order
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eval(&self, t: f64, rho: f64, r: f64) -> f64 {
        self.expr.eval(&Env::new(t, rho, [r, 0.0]))
    }

    pub fn eval_drho(&self, t: f64, rho: f64, r: f64) -> f64 {
        self.drho.eval(&Env::new(t, rho, [r, 0.0]))
    }
}

pub mod catalog {
    //! Builtin families. Every entry satisfies the growth hypotheses on the
    //! default sample; the counterexamples deliberately do not.

    use super::*;

    pub const BUILTIN: &[&str] = &["harmonic", "quartic", "confined_quartic", "anharmonic", "oscillating_harmonic"];

    fn radial2(dim: usize) -> &'static str {
        if dim == 1 {
            "x^2"
        } else {
            "(x1^2 + x2^2)"
        }
    }

    /// Looks up a builtin family by name for dimension `dim`.
    pub fn builtin(name: &str, dim: usize) -> Result<PotentialFamily> {
        let r2 = radial2(dim);
        let spec = match name {
            // V = |x|^2 / 2, A = 0
            "harmonic" => FamilySpec {
                name: name.into(),
                dim,
                scalar: format!("{r2}/2"),
                vector: vec![],
                growth_order: 0.0,
                delta: 1.0,
                mass: 1.0,
                rho_range: default_rho_range(),
            },
            "quartic" => FamilySpec {
                name: name.into(),
                dim,
                scalar: format!("(1 + {r2})^2"),
                vector: vec![],
                growth_order: 1.0,
                delta: 1.0,
                mass: 1.0,
                rho_range: default_rho_range(),
            },
            "confined_quartic" => FamilySpec {
                name: name.into(),
                dim,
                scalar: format!("(2 + sin(t))*(1 + {r2})^2"),
                vector: if dim == 1 {
                    vec!["cos(t)*<x>".into()]
                } else {
                    vec!["-cos(t)*x2/2".into(), "cos(t)*x1/2".into()]
                },
                growth_order: 1.0,
                delta: 0.5,
                mass: 1.0,
                rho_range: default_rho_range(),
            },
            "anharmonic" => FamilySpec {
                name: name.into(),
                dim,
                scalar: format!("{r2}/2 + rho*{r2}^2/4"),
                vector: vec![],
                growth_order: 1.0,
                delta: 1.0,
                mass: 1.0,
                rho_range: default_rho_range(),
            },
            // confinement whose gradient grows as fast as the potential itself
            "oscillating_harmonic" => FamilySpec {
                name: name.into(),
                dim,
                scalar: if dim == 1 {
                    "(1 + x^2)*(2 + sin(x))".into()
                } else {
                    "(1 + x1^2 + x2^2)*(2 + sin(x1)*sin(x2))".into()
                },
                vector: vec![],
                growth_order: 0.0,
                delta: 1.0,
                mass: 1.0,
                rho_range: default_rho_range(),
            },
            other => {
                return Err(Error::InvalidFamily {
                    name: other.to_string(),
                    reason: format!("unknown builtin family; known: {}", BUILTIN.join(", ")),
                })
            }
        };
        PotentialFamily::from_spec(&spec)
    }

    /// `V = t |x|^4 + |x|^2`, `A = 0`: vanishing quartic coefficient at `t = 0`.
    pub fn switched_quartic(dim: usize, growth_order: f64) -> PotentialFamily {
        let r2 = radial2(dim);
        PotentialFamily::from_spec(&FamilySpec {
            name: "switched_quartic".into(),
            dim,
            scalar: format!("t*{r2}^2 + {r2}"),
            vector: vec![],
            growth_order,
            delta: 1.0,
            mass: 1.0,
            rho_range: default_rho_range(),
        })
        .expect("static expression parses")
    }

    /// `V = x^2/2`, `A = x` in one dimension with the declared margin `delta`.
    pub fn linear_vector_potential(delta: f64) -> PotentialFamily {
        PotentialFamily::from_spec(&FamilySpec {
            name: "linear_vector_potential".into(),
            dim: 1,
            scalar: "x^2/2".into(),
            vector: vec!["x".into()],
            growth_order: 0.0,
            delta,
            mass: 1.0,
            rho_range: default_rho_range(),
        })
        .expect("static expression parses")
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Where a bound was found to be violated (or attained).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub rho: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub inequality: String,
    /// Empirical constant: max (or min, for lower bounds) of `|q| / weight`.
    pub constant: f64,
    /// Secondary constant (`C_1` of the lower growth bound), if any.
    pub offset: Option<f64>,
    /// Log-log slope of the shell-wise ratio over the outer dyadic shells.
    pub shell_slope: f64,
    pub passed: bool,
    pub message: String,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub family: String,
    pub growth_order: f64,
    pub delta: f64,
    pub spatial_samples: usize,
    pub t_samples: usize,
    pub rho_samples: usize,
    pub alpha_max: u32,
    pub shells: Vec<f64>,
    pub checks: Vec<BoundCheck>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Largest ratio slope still accepted as "bounded" on the outer shells.
pub const SHELL_SLOPE_TOLERANCE: f64 = 0.25;
const FD_STEP: f64 = 2e-2;
const MAX_SPATIAL_SAMPLES: usize = 4096;

fn bracket(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Central finite-difference approximation of `d^alpha q` at `x`.
fn fd_derivative(q: &dyn Fn([f64; 2]) -> f64, x: [f64; 2], alpha: &[u32]) -> f64 {
    // tensor product of 1-d central stencils: d^k ~ h^-k sum (-1)^i C(k,i) q(x + (k/2 - i) h)
    let stencil = |k: u32| -> Vec<(f64, f64)> {
        (0..=k)
            .map(|i| {
                let w = if i % 2 == 0 { 1.0 } else { -1.0 } * binomial(k, i);
                (w, (k as f64 / 2.0 - i as f64) * FD_STEP)
            })
            .collect()
    };
    let s0 = stencil(alpha[0]);
    let s1 = if alpha.len() > 1 { stencil(alpha[1]) } else { vec![(1.0, 0.0)] };
    let mut acc = 0.0;
    let mut magnitude = 0.0;
    for (w0, o0) in &s0 {
        for (w1, o1) in &s1 {
            let term = w0 * w1 * q([x[0] + o0, x[1] + o1]);
            acc += term;
            magnitude += term.abs();
        }
    }
    // cancellation below the rounding floor is an exact zero
    if acc.abs() <= 64.0 * f64::EPSILON * magnitude {
        return 0.0;
    }
    let order: u32 = alpha.iter().sum();
    acc / FD_STEP.powi(order as i32)
}

struct Sample {
    x: [f64; 2],
    r: f64,
}

fn spatial_samples(grid: &SpatialGrid) -> Vec<Sample> {
    let stride = (grid.len() / MAX_SPATIAL_SAMPLES).max(1);
    (0..grid.len())
        .step_by(stride)
        .map(|i| {
            let x = grid.point(i);
            let r = x[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt();
            Sample { x, r }
        })
        .collect()
}

fn shell_edges(max_r: f64) -> Vec<f64> {
    let mut edges = vec![1.0];
    while edges.last().unwrap() * 2.0 <= max_r {
        edges.push(edges.last().unwrap() * 2.0);
    }
    edges
}

fn shell_of(edges: &[f64], r: f64) -> Option<usize> {
    if r < edges[0] {
        return None;
    }
    Some(edges.iter().rposition(|&e| r >= e).unwrap())
}

/// Least-squares slope of `log y` against `log x` over strictly positive `y`.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Upper,
    Lower,
}

/// Evaluates `q(t, rho, x) / weight(x)` over the sample and reduces it.
struct RatioScan<'a> {
    samples: &'a [Sample],
    edges: &'a [f64],
    t_samples: &'a [f64],
    rho_samples: &'a [f64],
    dim: usize,
}

impl RatioScan<'_> {
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        name: &str,
        inequality: String,
        side: Side,
        q: &dyn Fn(f64, f64, [f64; 2]) -> f64,
        weight: &dyn Fn(&[f64]) -> f64,
    ) -> BoundCheck {
        let init = if side == Side::Upper { 0.0 } else { f64::INFINITY };
        let mut shell_stat = vec![(0.0, init); self.edges.len()];
        let mut best = init;
        let mut witness = None;
        let mut nonfinite = None;
        for s in self.samples {
            let w = weight(&s.x[..self.dim]);
            for &t in self.t_samples {
                for &rho in self.rho_samples {
                    let raw = q(t, rho, s.x);
                    if !raw.is_finite() {
                        nonfinite.get_or_insert(Witness { t, rho, x: s.x[..self.dim].to_vec() });
                        continue;
                    }
                    let ratio = match side {
                        Side::Upper => raw.abs() / w,
                        Side::Lower => raw / w,
                    };
                    let better = match side {
                        Side::Upper => ratio > best,
                        Side::Lower => ratio < best,
                    };
                    if better {
                        best = ratio;
                        witness = Some(Witness { t, rho, x: s.x[..self.dim].to_vec() });
                    }
                    if let Some(k) = shell_of(self.edges, s.r) {
                        let st = &mut shell_stat[k];
                        let replace = match side {
                            Side::Upper => ratio > st.1,
                            Side::Lower => ratio < st.1,
                        };
                        if replace {
                            *st = (s.r, ratio);
                        }
                    }
                }
            }
        }
        // regress against the radius where each shell attains its extreme
        let pts: Vec<(f64, f64)> = shell_stat.iter().filter(|(r, s)| *r > 0.0 && s.is_finite()).copied().collect();
        let outer = &pts[pts.len().saturating_sub((pts.len() / 2).max(2))..];
        let slope = loglog_slope(outer);
        if let Some(w) = nonfinite {
            return BoundCheck {
                name: name.into(),
                inequality,
                constant: f64::NAN,
                offset: None,
                shell_slope: f64::NAN,
                passed: false,
                message: "non-finite value in sample".into(),
                witness: Some(w),
            };
        }
        match side {
            Side::Upper => {
                let passed = best.is_finite() && slope <= SHELL_SLOPE_TOLERANCE;
                let message = if passed {
                    format!("bounded on sample, constant {best:.6e}")
                } else {
                    format!("ratio grows across outer shells with log-log slope {slope:.3}")
                };
                BoundCheck {
                    name: name.into(),
                    inequality,
                    constant: best,
                    offset: None,
                    shell_slope: slope,
                    passed,
                    message,
                    witness,
                }
            }
            Side::Lower => {
                let outer_min = outer.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                let passed = outer_min > 0.0 && slope >= -SHELL_SLOPE_TOLERANCE;
                let message = if passed {
                    format!("lower growth constant {outer_min:.6e}")
                } else if outer_min <= 0.0 {
                    "ratio not bounded away from zero on outer shells".to_string()
                } else {
                    format!("ratio decays across outer shells with log-log slope {slope:.3}")
                };
                BoundCheck {
                    name: name.into(),
                    inequality,
                    constant: outer_min,
                    offset: None,
                    shell_slope: slope,
                    passed,
                    message,
                    witness,
                }
            }
        }
    }
}

/// Sampling check of the growth hypotheses on `(V, A)`.
///
/// Every bound is tested as a ratio `|q| / weight` over grid nodes, time
/// samples and parameter samples. A bound passes when the ratio has a finite
/// maximum and does not grow (or, for the lower bound on `V`, decay) across
/// the outer dyadic shells `2^k <= |x| < 2^(k+1)`.
pub fn validate_assumption(
    fam: &PotentialFamily,
    grid: &SpatialGrid,
    t_samples: &[f64],
    rho_samples: &[f64],
    alpha_max: u32,
) -> Result<ValidationReport> {
    if alpha_max > 4 {
        return Err(Error::InvalidArgument(format!("alpha_max {alpha_max} exceeds finite-difference depth 4")));
    }
    if t_samples.is_empty() || rho_samples.is_empty() {
        return Err(Error::InvalidArgument("time and parameter samples must be nonempty".into()));
    }
    fam.check_dim(grid)?;
    let dim = fam.dim;
    let m = fam.growth_order;
    let samples = spatial_samples(grid);
    let max_r = samples.iter().map(|s| s.r).fold(0.0, f64::max);
    let edges = shell_edges(max_r);
    let scan = RatioScan { samples: &samples, edges: &edges, t_samples, rho_samples, dim };
    let w_scalar = move |x: &[f64]| bracket(x).powf(2.0 * (m + 1.0));
    let w_vector = move |x: &[f64]| bracket(x).powf(m + 1.0);
    let delta = fam.delta;
    let w_vector_margin = move |x: &[f64]| bracket(x).powf(m + 1.0 - delta);

    let mut checks = Vec::new();

    // two-sided growth of V
    let v = |t: f64, rho: f64, x: [f64; 2]| fam.scalar.eval(&Env::new(t, rho, x));
    let mut lower = scan.run(
        "scalar_lower_growth",
        "C0 <x>^{2(M+1)} - C1 <= V".into(),
        Side::Lower,
        &v,
        &w_scalar,
    );
    if lower.passed {
        let c0 = lower.constant;
        let mut c1: f64 = 0.0;
        for s in &samples {
            let w = w_scalar(&s.x[..dim]);
            for &t in t_samples {
                for &rho in rho_samples {
                    c1 = c1.max(c0 * w - v(t, rho, s.x));
                }
            }
        }
        lower.offset = Some(c1);
    }
    checks.push(lower);
    checks.push(scan.run("scalar_upper_growth", "V <= C2 <x>^{2(M+1)}".into(), Side::Upper, &v, &w_scalar));

    let alphas = crate::grid::multi_indices(dim, alpha_max);
    let dt_v = |t: f64, rho: f64, x: [f64; 2]| fam.dt_scalar.eval(&Env::new(t, rho, x));
    for alpha in &alphas {
        let order: u32 = alpha.iter().sum();
        if order >= 1 {
            let q = |t: f64, rho: f64, x: [f64; 2]| fd_derivative(&|y| v(t, rho, y), x, alpha);
            checks.push(scan.run(
                &format!("scalar_derivative_growth{alpha:?}"),
                format!("|d^{alpha:?} V| <= C <x>^{{2(M+1)}}"),
                Side::Upper,
                &q,
                &w_scalar,
            ));
        }
        let q = |t: f64, rho: f64, x: [f64; 2]| {
            if order == 0 {
                dt_v(t, rho, x)
            } else {
                fd_derivative(&|y| dt_v(t, rho, y), x, alpha)
            }
        };
        checks.push(scan.run(
            &format!("scalar_time_derivative_growth{alpha:?}"),
            format!("|d^{alpha:?} dV/dt| <= C <x>^{{2(M+1)}}"),
            Side::Upper,
            &q,
            &w_scalar,
        ));
    }

    for j in 0..dim {
        let a = |t: f64, rho: f64, x: [f64; 2]| fam.vector[j].eval(&Env::new(t, rho, x));
        let dt_a = |t: f64, rho: f64, x: [f64; 2]| fam.dt_vector[j].eval(&Env::new(t, rho, x));
        let mut check = scan.run(
            &format!("vector_growth[{j}]"),
            "|A_j| <= C <x>^{M+1-delta}, delta > 0".into(),
            Side::Upper,
            &a,
            &w_vector_margin,
        );
        if delta <= 0.0 {
            check.passed = false;
            check.message = format!("declared margin delta = {delta} must be positive");
        }
        checks.push(check);
        for alpha in &alphas {
            let order: u32 = alpha.iter().sum();
            if order >= 1 {
                let q = |t: f64, rho: f64, x: [f64; 2]| fd_derivative(&|y| a(t, rho, y), x, alpha);
                checks.push(scan.run(
                    &format!("vector_derivative_growth[{j}]{alpha:?}"),
                    format!("|d^{alpha:?} A_j| <= C <x>^{{M+1}}"),
                    Side::Upper,
                    &q,
                    &w_vector,
                ));
            }
            let q = |t: f64, rho: f64, x: [f64; 2]| {
                if order == 0 {
                    dt_a(t, rho, x)
                } else {
                    fd_derivative(&|y| dt_a(t, rho, y), x, alpha)
                }
            };
            checks.push(scan.run(
                &format!("vector_time_derivative_growth[{j}]{alpha:?}"),
                format!("|d^{alpha:?} dA_j/dt| <= C <x>^{{M+1}}"),
                Side::Upper,
                &q,
                &w_vector,
            ));
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        family: fam.name.clone(),
        growth_order: m,
        delta,
        spatial_samples: samples.len(),
        t_samples: t_samples.len(),
        rho_samples: rho_samples.len(),
        alpha_max,
        shells: edges,
        checks,
        passed,
    })
}

/// Growth check for a pair interaction on relative coordinates sampled from
/// the nodes of a one-dimensional grid.
pub fn validate_interaction(
    w: &InteractionFamily,
    grid: &SpatialGrid,
    t_samples: &[f64],
    rho_samples: &[f64],
    alpha_max: u32,
) -> Result<ValidationReport> {
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument("interaction validation uses a 1-d grid of separations".into()));
    }
    if alpha_max > 4 {
        return Err(Error::InvalidArgument(format!("alpha_max {alpha_max} exceeds finite-difference depth 4")));
    }
    let samples = spatial_samples(grid);
    let max_r = samples.iter().map(|s| s.r).fold(0.0, f64::max);
    let edges = shell_edges(max_r);
    let scan = RatioScan { samples: &samples, edges: &edges, t_samples, rho_samples, dim: 1 };
    let m0 = w.growth_order;
    let delta = w.delta;
    let weight_margin = move |x: &[f64]| bracket(x).powf(2.0 * (m0 + 1.0) - delta);
    let weight = move |x: &[f64]| bracket(x).powf(2.0 * (m0 + 1.0));
    let q = |t: f64, rho: f64, x: [f64; 2]| w.eval(t, rho, x[0]);
    let mut checks = Vec::new();
    let mut growth = scan.run(
        "interaction_growth",
        "|W| <= C <r>^{2(M0+1)-delta}, delta > 0".into(),
        Side::Upper,
        &q,
        &weight_margin,
    );
    if delta <= 0.0 {
        growth.passed = false;
        growth.message = format!("declared margin delta = {delta} must be positive");
    }
    checks.push(growth);
    for k in 1..=alpha_max {
        let alpha = [k];
        let dq = |t: f64, rho: f64, x: [f64; 2]| fd_derivative(&|y| w.eval(t, rho, y[0]), x, &alpha);
        checks.push(scan.run(
            &format!("interaction_derivative_growth[{k}]"),
            format!("|d^{k} W| <= C <r>^{{2(M0+1)}}"),
            Side::Upper,
            &dq,
            &weight,
        ));
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        family: w.name.clone(),
        growth_order: m0,
        delta,
        spatial_samples: samples.len(),
        t_samples: t_samples.len(),
        rho_samples: rho_samples.len(),
        alpha_max,
        shells: edges,
        checks,
        passed,
    })
}

/// Evenly spaced samples strictly inside an interval.
pub fn interior_samples(range: (f64, f64), n: usize) -> Vec<f64> {
    (1..=n).map(|k| range.0 + (range.1 - range.0) * k as f64 / (n + 1) as f64).collect()
}

/// Evenly spaced samples on a closed interval.
pub fn closed_samples(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range.0];
    }
    (0..n).map(|k| range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;
    use crate::grid::make_grid;

    fn default_grid() -> SpatialGrid {
        make_grid(1, 10.0, 256).unwrap()
    }

    fn t_samples() -> Vec<f64> {
        closed_samples((0.0, 2.0 * std::f64::consts::PI), 9)
    }

    #[test]
    fn builtin_samples() {
        let g = make_grid(1, 5.0, 8).unwrap();
        let fam = builtin("confined_quartic", 1).unwrap();
        let s = eval_potential(&fam, 0.0, 1.0, &g).unwrap();
        assert_eq!(s.scalar[4], 2.0);
        assert!((s.vector[0][4] - 1.0).abs() < 1e-15);

        let h = builtin("harmonic", 1).unwrap();
        assert_eq!(h.scalar_at(3.7, 0.0, [1.0, 0.0]), 0.5);

        let an = builtin("anharmonic", 1).unwrap();
        let a0 = eval_potential(&an, 0.2, 0.0, &g).unwrap();
        let h0 = eval_potential(&h, 0.2, 0.0, &g).unwrap();
        assert_eq!(a0, h0);
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        assert!(matches!(builtin("nope", 1), Err(Error::InvalidFamily { .. })));
    }

    #[test]
    fn non_finite_samples_invalidate_family() {
        let fam = PotentialFamily::from_spec(&FamilySpec {
            name: "bad".into(),
            dim: 1,
            scalar: "1/x".into(),
            vector: vec![],
            growth_order: 0.0,
            delta: 1.0,
            mass: 1.0,
            rho_range: (0.0, 1.0),
        })
        .unwrap();
        // node x = 0 is on the grid
        assert!(matches!(eval_potential(&fam, 0.0, 0.5, &default_grid()), Err(Error::InvalidFamily { .. })));
    }

    #[test]
    fn rho_partials_closed_form() {
        let g = default_grid();
        let an = builtin("anharmonic", 1).unwrap();
        let d = partial_rho(&an, 0.0, 1.0, &g).unwrap();
        for (i, x) in g.nodes().iter().enumerate() {
            assert!((d.scalar[i] - x.powi(4) / 4.0).abs() <= 1e-12 * (1.0 + x.powi(4)));
        }
        let h = builtin("harmonic", 1).unwrap();
        assert!(!h.depends_on_rho());
        let d = partial_rho(&h, 0.3, 1.0, &g).unwrap();
        assert!(d.scalar.iter().all(|v| *v == 0.0));
        assert!(d.vector[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rho_partials_match_second_order_differences() {
        let g = make_grid(1, 4.0, 64).unwrap();
        // nonpolynomial rho dependence so the central difference has a visible O(h^2) error
        let fam = PotentialFamily::from_spec(&FamilySpec {
            name: "rho_exp".into(),
            dim: 1,
            scalar: "x^2/2 + exp(rho)*x^4/4".into(),
            vector: vec!["sin(rho)*<x>".into()],
            growth_order: 1.0,
            delta: 0.5,
            mass: 1.0,
            rho_range: (0.0, 2.0),
        })
        .unwrap();
        let rho = 0.7;
        let exact = partial_rho(&fam, 0.0, rho, &g).unwrap();
        let err_at = |h: f64| -> f64 {
            let hi = eval_potential(&fam, 0.0, rho + h, &g).unwrap();
            let lo = eval_potential(&fam, 0.0, rho - h, &g).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..g.len() {
                let fd = (hi.scalar[i] - lo.scalar[i]) / (2.0 * h);
                worst = worst.max((fd - exact.scalar[i]).abs());
                let fd = (hi.vector[0][i] - lo.vector[0][i]) / (2.0 * h);
                worst = worst.max((fd - exact.vector[0][i]).abs());
            }
            worst
        };
        let e1 = err_at(1e-3);
        let e2 = err_at(1e-4);
        assert!(e1 < 1e-4 && e2 < 1e-6);
        let ratio = err_at(2e-3) / err_at(1e-3);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn builtins_pass_validation() {
        let g = default_grid();
        for name in BUILTIN {
            let fam = builtin(name, 1).unwrap();
            let rep = validate_assumption(&fam, &g, &t_samples(), &interior_samples(fam.rho_range(), 4), 4).unwrap();
            let failures: Vec<_> = rep.failures().map(|c| (&c.name, &c.message)).collect();
            assert!(rep.passed, "{name}: {failures:?}");
        }
    }

    #[test]
    fn confined_quartic_constants() {
        let fam = builtin("confined_quartic", 1).unwrap();
        let rep = validate_assumption(&fam, &default_grid(), &t_samples(), &[1.0], 2).unwrap();
        let lower = rep.check("scalar_lower_growth").unwrap();
        let upper = rep.check("scalar_upper_growth").unwrap();
        assert!(lower.constant >= 1.0 - 1e-12 && lower.constant <= 1.1, "{}", lower.constant);
        assert!(upper.constant <= 3.0 + 1e-12);
        assert!(lower.offset.unwrap() >= 0.0);
    }

    #[test]
    fn switched_quartic_fails_lower_growth() {
        let g = default_grid();
        let fam = switched_quartic(1, 1.0);
        let rep = validate_assumption(&fam, &g, &closed_samples((0.0, 1.0), 5), &[1.0], 2).unwrap();
        assert!(!rep.passed);
        let lower = rep.check("scalar_lower_growth").unwrap();
        assert!(!lower.passed);
        assert_eq!(lower.witness.as_ref().unwrap().t, 0.0);
        // matching the t = 0 growth instead breaks the upper bound
        let fam = switched_quartic(1, 0.0);
        let rep = validate_assumption(&fam, &g, &closed_samples((0.0, 1.0), 5), &[1.0], 2).unwrap();
        assert!(!rep.check("scalar_upper_growth").unwrap().passed);
    }

    #[test]
    fn linear_vector_potential_needs_positive_margin() {
        let g = default_grid();
        for delta in [0.0, 0.5] {
            let fam = linear_vector_potential(delta);
            let rep = validate_assumption(&fam, &g, &[0.0], &[1.0], 2).unwrap();
            assert!(!rep.check("vector_growth[0]").unwrap().passed, "delta {delta}");
        }
    }

    #[test]
    fn two_dimensional_builtins_pass() {
        let g = make_grid(2, 8.0, 64).unwrap();
        for name in ["harmonic", "confined_quartic"] {
            let fam = builtin(name, 2).unwrap();
            let rep = validate_assumption(&fam, &g, &closed_samples((0.0, 3.0), 3), &[1.0], 2).unwrap();
            assert!(rep.passed, "{name}: {:?}", rep.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn interaction_growth() {
        let g = default_grid();
        let w = InteractionFamily::new("pair", "0.1*(1 + r^2)", 1.0, 1.0).unwrap();
        let rep = validate_interaction(&w, &g, &[0.0], &[1.0], 4).unwrap();
        assert!(rep.passed, "{:?}", rep.failures().collect::<Vec<_>>());
        // too fast for M0 = 0 with delta = 1: exponent 2 vs 1
        let w = InteractionFamily::new("pair", "0.1*(1 + r^2)", 0.0, 1.0).unwrap();
        let rep = validate_interaction(&w, &g, &[0.0], &[1.0], 2).unwrap();
        assert!(!rep.check("interaction_growth").unwrap().passed);
    }

    #[test]
    fn alpha_max_is_capped() {
        let fam = builtin("harmonic", 1).unwrap();
        assert!(validate_assumption(&fam, &default_grid(), &[0.0], &[1.0], 5).is_err());
    }
}
