//! Phase-space symbols sampled on (node, frequency) pairs, their Kohn–Nirenberg
//! quantization, and numerical probes of the parametrix and cutoff commutator.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SpatialGrid, WaveFunction};
use crate::io::fmt_num;
use crate::linalg::{estimate_operator_norm, NormEstimate};
use crate::operators::{FrozenHamiltonian, HamiltonianHandle, LinearOperator};
use crate::potentials::{eval_potential, PotentialFamily};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest number of (node, frequency) pairs a field may hold.
pub const MAX_FIELD_ENTRIES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffProfile {
    /// `chi(s) = exp(-s^2)`
    Gaussian,
    /// `chi = 1`, which turns the cutoff into the identity.
    Unit,
}

impl CutoffProfile {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            CutoffProfile::Gaussian => (-s * s).exp(),
            CutoffProfile::Unit => 1.0,
        }
    }
}

/// `chi_eps = chi(eps (mu + h))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub eps: f64,
    pub mu: f64,
    pub profile: CutoffProfile,
}

impl CutoffSpec {
    pub fn new(eps: f64, mu: f64, profile: CutoffProfile) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("cutoff eps {eps} not in (0, 1]")));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("cutoff shift {mu} is not finite")));
        }
        Ok(Self { eps, mu, profile })
    }

    pub fn gaussian(eps: f64, mu: f64) -> Result<Self> {
        Self::new(eps, mu, CutoffProfile::Gaussian)
    }

    pub fn is_identity(&self) -> bool {
        self.profile == CutoffProfile::Unit
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolKind {
    H,
    Hs,
    Lambda { mu: f64 },
    LambdaM { mu_prime: f64 },
    Parametrix { mu: f64 },
    Cutoff(CutoffSpec),
}

/// Per-grid table of `exp(i x_j xi_k)` and the phase linking the FFT to the
/// physical Fourier transform.
#[derive(Debug)]
struct Phases {
    table: Vec<Complex64>,
    shift: Vec<Complex64>,
}

impl Phases {
    fn new(grid: &SpatialGrid) -> Self {
        let n = grid.points();
        let nodes = grid.nodes();
        let freqs = grid.frequencies();
        let mut table = Vec::with_capacity(n * n);
        for x in nodes {
            for xi in freqs {
                table.push(Complex64::from_polar(1.0, x * xi));
            }
        }
        let l = grid.half_width();
        let shift = grid.sample_frequencies(|xi| {
            let s: f64 = xi[..grid.dim()].iter().sum();
            Complex64::from_polar(1.0, l * s)
        });
        Self { table, shift }
    }

    #[inline]
    fn at(&self, n: usize, dim: usize, j: usize, k: usize) -> Complex64 {
        if dim == 1 {
            self.table[j * n + k]
        } else {
            self.table[(j / n) * n + k / n] * self.table[(j % n) * n + k % n]
        }
    }
}

/// A symbol sampled at every (x_j, xi_k) pair, stored row-major by node.
#[derive(Debug, Clone)]
pub struct SymbolField {
    grid: SpatialGrid,
    values: Vec<Complex64>,
    t: f64,
    rho: f64,
    phases: Arc<Phases>,
}

impl SymbolField {
    pub fn from_fn(
        grid: &SpatialGrid,
        t: f64,
        rho: f64,
        mut f: impl FnMut([f64; 2], [f64; 2]) -> Complex64,
    ) -> Result<Self> {
        let n = grid.len();
        check_field_size(grid)?;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            let x = grid.point(j);
            for k in 0..n {
                values.push(f(x, grid.frequency(k)));
            }
        }
        Self::from_values(grid, values, t, rho)
    }

    pub fn from_values(grid: &SpatialGrid, values: Vec<Complex64>, t: f64, rho: f64) -> Result<Self> {
        let n = grid.len();
        check_field_size(grid)?;
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!("symbol has {} entries, expected {}", values.len(), n * n)));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid: grid.clone(), values, t, rho, phases: Arc::new(Phases::new(grid)) })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Value at node `j`, frequency `k`.
    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.values[j * self.grid.len() + k]
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }
}

fn check_field_size(grid: &SpatialGrid) -> Result<()> {
    let n = grid.len();
    if n.checked_mul(n).is_none_or(|e| e > MAX_FIELD_ENTRIES) {
        return Err(Error::Unsupported(format!(
            "symbol field with {n}^2 entries exceeds the {MAX_FIELD_ENTRIES}-entry limit"
        )));
    }
    Ok(())
}

/// `h(x, xi) = |xi - A|^2 / 2m + V` and `div A`, sampled per node.
struct PhaseSpaceSamples {
    scalar: Vec<f64>,
    vector: Vec<Vec<f64>>,
    divergence: Vec<f64>,
    mass: f64,
}

impl PhaseSpaceSamples {
    fn new(fam: &PotentialFamily, grid: &SpatialGrid, t: f64, rho: f64) -> Result<Self> {
        if fam.dim() != grid.dim() {
            return Err(Error::InvalidFamily {
                name: fam.name().to_string(),
                reason: format!("family is {}-dimensional, grid is {}-dimensional", fam.dim(), grid.dim()),
            });
        }
        let s = eval_potential(fam, t, rho, grid)?;
        let divergence = fam.divergence_samples(t, rho, grid);
        if let Some(i) = divergence.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { scalar: s.scalar, vector: s.vector, divergence, mass: fam.mass() })
    }

    #[inline]
    fn h(&self, j: usize, xi: [f64; 2]) -> f64 {
        let mut kin = 0.0;
        for (axis, a) in self.vector.iter().enumerate() {
            let d = xi[axis] - a[j];
            kin += d * d;
        }
        if self.vector.is_empty() {
            kin = xi.iter().map(|v| v * v).sum();
        }
        kin / (2.0 * self.mass) + self.scalar[j]
    }

    #[inline]
    fn hs(&self, j: usize, xi: [f64; 2]) -> Complex64 {
        Complex64::new(self.h(j, xi), self.divergence[j] / (2.0 * self.mass))
    }
}

/// Grid estimate of the ellipticity constants in
/// `C0 (<xi>^2 + <x>^{2(M+1)}) - C1 <= h`.
#[derive(Debug, Clone, Serialize)]
pub struct EllipticityScan {
    pub c0: f64,
    pub c1: f64,
    /// Smallest admissible parametrix shift, `C0/2 + C1`.
    pub mu_min: f64,
    pub min_h: f64,
    pub argmin_x: Vec<f64>,
    pub argmin_xi: Vec<f64>,
}

fn theta(grid: &SpatialGrid, x: [f64; 2], xi: [f64; 2], growth_order: f64) -> f64 {
    let d = grid.dim();
    let r2: f64 = x[..d].iter().map(|v| v * v).sum();
    let k2: f64 = xi[..d].iter().map(|v| v * v).sum();
    1.0 + k2 + (1.0 + r2).powf(growth_order + 1.0)
}

pub fn scan_ellipticity(fam: &PotentialFamily, grid: &SpatialGrid, t: f64, rho: f64) -> Result<EllipticityScan> {
    check_field_size(grid)?;
    let ps = PhaseSpaceSamples::new(fam, grid, t, rho)?;
    let n = grid.len();
    let m = fam.growth_order();
    let mut hs = Vec::with_capacity(n * n);
    let mut th = Vec::with_capacity(n * n);
    let mut min_h = f64::INFINITY;
    let mut argmin = (0, 0);
    for j in 0..n {
        let x = grid.point(j);
        for k in 0..n {
            let xi = grid.frequency(k);
            let h = ps.h(j, xi);
            if h < min_h {
                min_h = h;
                argmin = (j, k);
            }
            hs.push(h);
            th.push(theta(grid, x, xi, m));
        }
    }
    let mut sorted = th.clone();
    let mid = sorted.len() / 2;
    let (_, median, _) = sorted.select_nth_unstable_by(mid, f64::total_cmp);
    let median = *median;
    let mut c_up = f64::INFINITY;
    let mut c_low = f64::INFINITY;
    for (h, t) in hs.iter().zip(&th) {
        if *h > 0.0 {
            c_up = c_up.min(t / h);
        }
        if *t >= median {
            c_low = c_low.min(h / t);
        }
    }
    let c0 = c_up.min(0.5 * c_low);
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::InvalidFamily {
            name: fam.name().to_string(),
            reason: format!("symbol is not elliptic on the grid (C0 estimate {c0})"),
        });
    }
    let c1 = hs.iter().zip(&th).map(|(h, t)| c0 * t - h).fold(0.0, f64::max);
    let d = grid.dim();
    Ok(EllipticityScan {
        c0,
        c1,
        mu_min: 0.5 * c0 + c1,
        min_h,
        argmin_x: grid.point(argmin.0)[..d].to_vec(),
        argmin_xi: grid.frequency(argmin.1)[..d].to_vec(),
    })
}

/// Samples the requested symbol at every (node, frequency) pair.
pub fn eval_symbol(
    kind: &SymbolKind,
    fam: &PotentialFamily,
    grid: &SpatialGrid,
    t: f64,
    rho: f64,
) -> Result<SymbolField> {
    check_field_size(grid)?;
    let ps = PhaseSpaceSamples::new(fam, grid, t, rho)?;
    let n = grid.len();
    let mut values = Vec::with_capacity(n * n);
    match *kind {
        SymbolKind::LambdaM { mu_prime } => {
            let m = fam.growth_order();
            let d = grid.dim();
            for j in 0..n {
                let x = grid.point(j);
                let w = (1.0 + x[..d].iter().map(|v| v * v).sum::<f64>()).powf(m + 1.0);
                for k in 0..n {
                    let xi = grid.frequency(k);
                    let kin: f64 = xi[..d].iter().map(|v| v * v).sum::<f64>() / (2.0 * fam.mass());
                    values.push(Complex64::new(mu_prime + kin + w, 0.0));
                }
            }
        }
        SymbolKind::Parametrix { mu } => {
            let scan = scan_ellipticity(fam, grid, t, rho)?;
            if !(mu >= scan.mu_min) {
                return Err(Error::InadmissibleShift {
                    mu,
                    mu_min: scan.mu_min,
                    x: scan.argmin_x,
                    xi: scan.argmin_xi,
                });
            }
            for j in 0..n {
                for k in 0..n {
                    values.push(1.0 / (mu + ps.hs(j, grid.frequency(k))));
                }
            }
        }
        _ => {
            for j in 0..n {
                for k in 0..n {
                    let xi = grid.frequency(k);
                    let v = match *kind {
                        SymbolKind::H => Complex64::new(ps.h(j, xi), 0.0),
                        SymbolKind::Hs => ps.hs(j, xi),
                        SymbolKind::Lambda { mu } => mu + ps.hs(j, xi),
                        SymbolKind::Cutoff(spec) => Complex64::new(spec.profile.eval(spec.eps * (spec.mu + ps.h(j, xi))), 0.0),
                        SymbolKind::LambdaM { .. } | SymbolKind::Parametrix { .. } => unreachable!(),
                    };
                    values.push(v);
                }
            }
        }
    }
    SymbolField::from_values(grid, values, t, rho)
}

/// `(S f)(x_j) = sum_k exp(i x_j xi_k) s(x_j, xi_k) fhat(xi_k)` on raw samples.
pub(crate) fn quantize_raw(s: &SymbolField, f: &[Complex64]) -> Vec<Complex64> {
    let grid = &s.grid;
    let n = grid.len();
    let np = grid.points();
    let d = grid.dim();
    let mut fh = f.to_vec();
    grid.forward(&mut fh);
    fh.iter_mut().zip(&s.phases.shift).for_each(|(v, p)| *v *= p);
    let mut out = vec![ZERO; n];
    for (j, o) in out.iter_mut().enumerate() {
        let row = &s.values[j * n..(j + 1) * n];
        let mut acc = ZERO;
        for k in 0..n {
            acc += s.phases.at(np, d, j, k) * row[k] * fh[k];
        }
        *o = acc;
    }
    out
}

/// Conjugate transpose of [`quantize_raw`] with respect to the grid inner product.
pub(crate) fn quantize_adjoint_raw(s: &SymbolField, g: &[Complex64]) -> Vec<Complex64> {
    let grid = &s.grid;
    let n = grid.len();
    let np = grid.points();
    let d = grid.dim();
    let mut v = vec![ZERO; n];
    for (j, gj) in g.iter().enumerate() {
        let row = &s.values[j * n..(j + 1) * n];
        for k in 0..n {
            v[k] += (s.phases.at(np, d, j, k) * row[k]).conj() * gj;
        }
    }
    let scale = 1.0 / n as f64;
    v.iter_mut().zip(&s.phases.shift).for_each(|(x, p)| *x *= p.conj() * scale);
    grid.inverse(&mut v);
    v
}

pub fn quantize_symbol(s: &SymbolField, f: &WaveFunction) -> Result<WaveFunction> {
    if s.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(WaveFunction::from_raw(&s.grid, quantize_raw(s, f.values())))
}

pub fn quantize_adjoint(s: &SymbolField, f: &WaveFunction) -> Result<WaveFunction> {
    if s.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(WaveFunction::from_raw(&s.grid, quantize_adjoint_raw(s, f.values())))
}

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

/// Settings shared by the randomized operator-norm probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub n_probe: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { n_probe: 16, power_iterations: 30, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualPoint {
    pub mu: f64,
    /// `mu - C1`
    pub shifted: f64,
    pub residual: f64,
    pub probes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualCurve {
    pub scan: EllipticityScan,
    pub points: Vec<ResidualPoint>,
    /// Shifts rejected as inadmissible.
    pub skipped: Vec<f64>,
    /// Least-squares slope of `log residual` against `log(mu - C1)`.
    pub slope: Option<f64>,
}

impl ResidualCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mu,residual,probes\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", fmt_num(p.mu), fmt_num(p.residual), p.probes));
        }
        s
    }
}

/// Least-squares slope of `y` against `x`; `None` with fewer than two points.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxy: f64 = (0..n).map(|i| (x[i] - mx) * (y[i] - my)).sum();
    let sxx: f64 = (0..n).map(|i| (x[i] - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Norm estimate of `(mu + H) Op(p_mu) - I` for one admissible shift.
pub fn residual_norm(h: &FrozenHamiltonian, p: &SymbolField, mu: f64, opts: &ProbeOptions) -> NormEstimate {
    let lam = h.clone().shifted(mu);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    estimate_operator_norm(
        |v| {
            let mut w = lam.apply_raw(&quantize_raw(p, v));
            w.iter_mut().zip(v).for_each(|(a, b)| *a -= b);
            w
        },
        |v| {
            let mut w = quantize_adjoint_raw(p, &lam.apply_raw(v));
            w.iter_mut().zip(v).for_each(|(a, b)| *a -= b);
            w
        },
        h.grid().len(),
        opts.n_probe,
        opts.power_iterations,
        &mut rng,
    )
}

pub fn parametrix_residual(
    fam: &PotentialFamily,
    grid: &SpatialGrid,
    t: f64,
    rho: f64,
    mu_list: &[f64],
    opts: &ProbeOptions,
) -> Result<ResidualCurve> {
    let scan = scan_ellipticity(fam, grid, t, rho)?;
    let h = HamiltonianHandle::new(fam, rho, grid)?.freeze(t)?;
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &mu in mu_list {
        let p = match eval_symbol(&SymbolKind::Parametrix { mu }, fam, grid, t, rho) {
            Ok(p) => p,
            Err(Error::InadmissibleShift { .. }) => {
                skipped.push(mu);
                continue;
            }
            Err(e) => return Err(e),
        };
        let est = residual_norm(&h, &p, mu, opts);
        points.push(ResidualPoint { mu, shifted: mu - scan.c1, residual: est.value, probes: est.probes });
    }
    let lx: Vec<f64> = points.iter().map(|p| p.shifted.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.residual.ln()).collect();
    let slope = fit_slope(&lx, &ly);
    Ok(ResidualCurve { scan, points, skipped, slope })
}

/// Norm estimate of `[Op(chi), Lambda]` for a given cutoff field and `Lambda = mu + H`.
pub fn commutator_norm(chi: &SymbolField, lam: &FrozenHamiltonian, opts: &ProbeOptions) -> NormEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    estimate_operator_norm(
        |v| {
            let a = quantize_raw(chi, &lam.apply_raw(v));
            let b = lam.apply_raw(&quantize_raw(chi, v));
            a.iter().zip(&b).map(|(x, y)| x - y).collect()
        },
        |v| {
            let a = lam.apply_raw(&quantize_adjoint_raw(chi, v));
            let b = quantize_adjoint_raw(chi, &lam.apply_raw(v));
            a.iter().zip(&b).map(|(x, y)| x - y).collect()
        },
        lam.grid().len(),
        opts.n_probe,
        opts.power_iterations,
        &mut rng,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundPoint {
    pub eps: f64,
    pub bound: f64,
    pub probes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorCurve {
    pub mu: f64,
    pub points: Vec<BoundPoint>,
    pub sup: f64,
    /// Largest bound divided by smallest bound.
    pub growth: f64,
    pub diverges: bool,
}

impl CommutatorCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,bound,probes\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", fmt_num(p.eps), fmt_num(p.bound), p.probes));
        }
        s
    }
}

/// Bounds below this are treated as exact zeros when judging growth.
const COMMUTATOR_FLOOR: f64 = 1e-9;

pub fn commutator_probe(
    fam: &PotentialFamily,
    grid: &SpatialGrid,
    t: f64,
    rho: f64,
    mu: f64,
    eps_list: &[f64],
    opts: &ProbeOptions,
) -> Result<CommutatorCurve> {
    let lam = HamiltonianHandle::new(fam, rho, grid)?.freeze(t)?.shifted(mu);
    let mut points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let spec = CutoffSpec::gaussian(eps, mu)?;
        let chi = eval_symbol(&SymbolKind::Cutoff(spec), fam, grid, t, rho)?;
        let est = commutator_norm(&chi, &lam, opts);
        points.push(BoundPoint { eps, bound: est.value, probes: est.probes });
    }
    let sup = points.iter().map(|p| p.bound).fold(0.0, f64::max);
    let inf = points.iter().map(|p| p.bound).fold(f64::INFINITY, f64::min);
    let growth = if sup <= COMMUTATOR_FLOOR { 1.0 } else { sup / inf.max(COMMUTATOR_FLOOR) };
    Ok(CommutatorCurve { mu, points, sup, growth, diverges: growth > 10.0 })
}
