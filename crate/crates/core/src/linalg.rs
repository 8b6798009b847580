//! Matrix-free Krylov helpers on flat complex vectors.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type Vector = Vec<Complex64>;

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a Hermitian positive-definite operator.
///
/// Stops when `||b - A x|| <= tol * ||b||`.
pub fn conjugate_gradient(
    apply: impl Fn(&[Complex64]) -> Vector,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, SolveStats)> {
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![Complex64::new(0.0, 0.0); b.len()], SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let mut x: Vector = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![Complex64::new(0.0, 0.0); b.len()],
    };
    let mut r: Vector = if x0.is_some() {
        let ax = apply(&x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    } else {
        b.to_vec()
    };
    let mut p = r.clone();
    let mut rr = dot(&r, &r).re;
    let target = tol * b_norm;
    for it in 0..max_iter {
        let res = rr.sqrt();
        if res <= target {
            return Ok((x, SolveStats { iterations: it, relative_residual: res / b_norm }));
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap).re;
        if pap <= 0.0 {
            return Err(Error::NoConvergence { iterations: it, residual: res / b_norm });
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r).re;
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    let res = rr.sqrt() / b_norm;
    if res <= tol {
        Ok((x, SolveStats { iterations: max_iter, relative_residual: res }))
    } else {
        Err(Error::NoConvergence { iterations: max_iter, residual: res })
    }
}

/// Lower-bound estimate of an operator 2-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    /// Best `||A v|| / ||v||` among the random probes before power iteration.
    pub best_probe: f64,
    pub probes: usize,
    pub power_iterations: usize,
}

pub fn random_vector(rng: &mut impl Rng, len: usize) -> Vector {
    (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Random probing followed by power iteration on `A^H A`.
pub fn estimate_operator_norm(
    apply: impl Fn(&[Complex64]) -> Vector,
    apply_adjoint: impl Fn(&[Complex64]) -> Vector,
    len: usize,
    probes: usize,
    power_iterations: usize,
    rng: &mut impl Rng,
) -> NormEstimate {
    let mut best = 0.0;
    let mut best_v = random_vector(rng, len);
    for _ in 0..probes.max(1) {
        let v = random_vector(rng, len);
        let ratio = norm(&apply(&v)) / norm(&v);
        if ratio > best {
            best = ratio;
            best_v = v;
        }
    }
    let mut value = best;
    let mut v = best_v;
    for _ in 0..power_iterations {
        let nv = norm(&v);
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|z| *z /= nv);
        let av = apply(&v);
        value = value.max(norm(&av));
        let w = apply_adjoint(&av);
        if norm(&w) == 0.0 {
            break;
        }
        v = w;
    }
    NormEstimate { value, best_probe: best, probes: probes.max(1), power_iterations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_op(d: &[f64]) -> impl Fn(&[Complex64]) -> Vector + '_ {
        move |v| v.iter().zip(d).map(|(a, b)| a * b).collect()
    }

    #[test]
    fn cg_solves_diagonal_system() {
        let d: Vec<f64> = (1..=50).map(|k| k as f64).collect();
        let b: Vector = (0..50).map(|k| Complex64::new(k as f64, 1.0)).collect();
        let (x, stats) = conjugate_gradient(diag_op(&d), &b, None, 1e-12, 200).unwrap();
        for k in 0..50 {
            assert!((x[k] * d[k] - b[k]).norm() < 1e-9);
        }
        assert!(stats.relative_residual <= 1e-12);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let d: Vec<f64> = (1..=50).map(|k| (k * k) as f64).collect();
        let b = vec![Complex64::new(1.0, 0.0); 50];
        assert!(matches!(
            conjugate_gradient(diag_op(&d), &b, None, 1e-14, 3),
            Err(Error::NoConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let d = vec![2.0; 4];
        let (x, _) = conjugate_gradient(diag_op(&d), &[Complex64::new(0.0, 0.0); 4], None, 1e-12, 10).unwrap();
        assert!(x.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn power_iteration_finds_largest_singular_value() {
        let d: Vec<f64> = (0..40).map(|k| 1.0 + k as f64 / 10.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = estimate_operator_norm(diag_op(&d), diag_op(&d), 40, 4, 200, &mut rng);
        assert!(est.value <= 4.9 + 1e-12);
        assert!(est.value > 4.85);
        assert!(est.best_probe <= est.value);
    }
}
