//! Spectral radius computation and echo-state scaling of recurrent matrices.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest size handled by dense eigendecomposition; bigger matrices use
/// power iteration.
pub const DENSE_EIGEN_LIMIT: usize = 512;

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITERS: usize = 10_000;

/// All eigenvalues of a square real matrix via real Schur decomposition.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::dim("eigenvalues (square matrix)", n, m.ncols()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // retries: looser deflation tolerance, then the transpose
    let attempts = [
        (m.clone(), f64::EPSILON, 100),
        (m.clone(), 1e3 * f64::EPSILON, 1000),
        (m.transpose(), 1e3 * f64::EPSILON, 1000),
    ];
    for (a, eps, iters) in attempts {
        if let Some(schur) = nalgebra::linalg::Schur::try_new(a, eps, iters * n.max(10)) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::EigenSolver(n))
}

/// Eigenvalue moduli sorted in descending order.
pub fn eigenvalue_moduli(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let mut moduli: Vec<f64> = eigenvalues(m)?.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(moduli)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() <= DENSE_EIGEN_LIMIT {
        Ok(eigenvalue_moduli(m)?.first().copied().unwrap_or(0.0))
    } else {
        power_iteration_radius(m)
    }
}

/// Dominant eigenvalue modulus by power iteration.
///
/// The estimate is taken over two steps, `sqrt(|A^2 x| / |x|)`, which stays
/// stable when the dominant eigenvalues form a complex conjugate pair or a
/// `+r/-r` pair.
pub fn power_iteration_radius(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::dim("power iteration (square matrix)", n, m.ncols()));
    }
    if n == 0 {
        return Ok(0.0);
    }
    // deterministic, non-degenerate start vector
    let mut x = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    x /= x.norm();
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITERS {
        let y = m * &x;
        let z = m * &y;
        let zn = z.norm();
        if zn == 0.0 {
            return Ok(0.0);
        }
        let est = zn.sqrt();
        if (est - prev).abs() <= POWER_TOL * est.max(1.0) {
            return Ok(est);
        }
        prev = est;
        x = z / zn;
    }
    Ok(prev)
}

/// Radius of the leak-mixed map `(1 - leak) I + leak W`.
pub fn effective_radius(w: &DMatrix<f64>, leak: f64) -> Result<f64> {
    let n = w.nrows();
    let a = DMatrix::<f64>::identity(n, n) * (1.0 - leak) + w * leak;
    spectral_radius(&a)
}

/// Returns `c * W` where the scalar `c > 0` puts the largest eigenvalue
/// modulus of `(1 - leak) I + leak * c * W` at `target`.
///
/// The spectrum of the mixed map is the affine image `(1 - leak) + leak c l`
/// of the spectrum of `W`, so `c` is solved per eigenvalue from
/// `|(1 - leak) + leak c l| = target` and the binding root is chosen.
pub fn scale_spectral_radius(w: &DMatrix<f64>, leak: f64, target: f64) -> Result<DMatrix<f64>> {
    let c = spectral_scale_factor(w, leak, target)?;
    Ok(w * c)
}

pub fn spectral_scale_factor(w: &DMatrix<f64>, leak: f64, target: f64) -> Result<f64> {
    if !(leak > 0.0 && leak <= 1.0) {
        return Err(Error::SpectralScaling(format!(
            "leak must lie in (0, 1], got {leak}; at leak 0 the radius is fixed at 1"
        )));
    }
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::SpectralScaling(format!(
            "target radius must be positive, got {target}"
        )));
    }
    if w.iter().all(|v| *v == 0.0) {
        return Err(Error::SpectralScaling("matrix is entirely zero".into()));
    }
    if w.nrows() > DENSE_EIGEN_LIMIT {
        return scale_factor_by_bisection(w, leak, target);
    }
    let eigs = eigenvalues(w)?;
    let base = 1.0 - leak;
    // |base + leak c l|^2 = target^2  <=>  qa c^2 + qb c + qc = 0
    let roots: Vec<Option<(f64, f64)>> = eigs
        .iter()
        .map(|l| {
            let qa = leak * leak * l.norm_sqr();
            let qb = 2.0 * base * leak * l.re;
            let qc = base * base - target * target;
            if qa == 0.0 {
                return None;
            }
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            Some(((-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)))
        })
        .collect();

    let rho0 = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = rho0.max(1.0);
    if target > base {
        // Every eigenvalue starts inside the target disc at c = 0 and crosses
        // it exactly once; the first crossing binds.
        let c = roots
            .iter()
            .flatten()
            .map(|&(_, hi)| hi)
            .filter(|hi| *hi > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !c.is_finite() {
            return Err(Error::SpectralScaling(format!(
                "matrix has zero spectral radius; target {target} is unreachable"
            )));
        }
        Ok(c)
    } else {
        // Radius starts at 1 - leak >= target: need every eigenvalue inside
        // the disc simultaneously, taking the smallest such c.
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        for (l, r) in eigs.iter().zip(&roots) {
            match r {
                Some((a, b)) => {
                    lo = lo.max(*a);
                    hi = hi.min(*b);
                }
                None => {
                    // eigenvalue 0 (or never inside): fixed at |base|
                    if l.norm() * scale > 1e-14 || base > target {
                        return Err(Error::SpectralScaling(format!(
                            "target {target} below the leak floor {base} is unreachable"
                        )));
                    }
                }
            }
        }
        if lo > hi || hi < 0.0 || lo <= 0.0 {
            return Err(Error::SpectralScaling(format!(
                "target {target} below the leak floor {base} is unreachable for this matrix"
            )));
        }
        Ok(lo)
    }
}

fn scale_factor_by_bisection(w: &DMatrix<f64>, leak: f64, target: f64) -> Result<f64> {
    let base = 1.0 - leak;
    if target <= base {
        return Err(Error::SpectralScaling(format!(
            "target {target} at or below the leak floor {base} is not supported above {DENSE_EIGEN_LIMIT} neurons"
        )));
    }
    let radius_at = |c: f64| effective_radius(&(w * c), leak);
    let rho0 = power_iteration_radius(w)?;
    if rho0 == 0.0 {
        return Err(Error::SpectralScaling(format!(
            "matrix has zero spectral radius; target {target} is unreachable"
        )));
    }
    let mut lo = 0.0;
    let mut hi = (target + base) / (leak * rho0);
    while radius_at(hi)? <= target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::SpectralScaling("bracket diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radius_at(mid)? <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
