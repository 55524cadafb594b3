use super::sparse::{dot, norm2, CsrMatrix};
use super::SparseSystem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target for `‖b − A x‖ / ‖b‖`.
    pub tol: f64,
    /// Iteration cap as a multiple of the system size.
    pub max_iter_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter_factor: 10,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual of the returned iterate, recomputed from scratch.
    pub residual: f64,
}

const MAX_RESTARTS: usize = 8;
const ROUNDING_SLACK: f64 = 1e1;

/// The rounding floor never excuses a relative residual above this.
const FLOOR_CAP: f64 = 1e-3;

/// Iterations between refreshes of the rounding floor.
const FLOOR_REFRESH: usize = 32;

/// Jacobi-preconditioned conjugate gradients on an SPD matrix.
///
/// `x` holds the initial guess on entry and the solution on exit.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: SolverOptions) -> Result<SolveReport> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    // Rounding limits how far the true residual can drop; stop there
    // instead of chasing an unreachable tolerance.
    let floor = |x: &[f64]| (ROUNDING_SLACK * f64::EPSILON * (a.abs_product_norm(x) + b_norm)).min(FLOOR_CAP * b_norm);
    let max_iter = opts.max_iter_factor.max(1) * n.max(1);
    let target = opts.tol * b_norm;
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    for _restart in 0..MAX_RESTARTS {
        a.mul_vec_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut res = norm2(&r);
        let mut res_floor = floor(x);
        while res > target {
            if res <= res_floor {
                res_floor = floor(x);
                if res <= res_floor {
                    break;
                }
            }
            if iterations >= max_iter {
                return Err(Error::SolverFailure {
                    iterations,
                    residual: res / b_norm,
                    context: String::new(),
                });
            }
            a.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::SolverFailure {
                    iterations,
                    residual: res / b_norm,
                    context: " (matrix is not positive definite)".into(),
                });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;

            // Refresh the recursive residual now and then to stop drift.
            if iterations % 500 == 0 {
                a.mul_vec_into(x, &mut ap);
                for i in 0..n {
                    r[i] = b[i] - ap[i];
                }
            }
            res = norm2(&r);
            if iterations % FLOOR_REFRESH == 0 {
                res_floor = floor(x);
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }

        a.mul_vec_into(x, &mut ap);
        let true_res = ap.iter().zip(b).map(|(ax, b)| (b - ax) * (b - ax)).sum::<f64>().sqrt();
        if true_res <= target.max(floor(x)) {
            return Ok(SolveReport {
                iterations,
                residual: true_res / b_norm,
            });
        }
    }
    a.mul_vec_into(x, &mut ap);
    let true_res = ap.iter().zip(b).map(|(ax, b)| (b - ax) * (b - ax)).sum::<f64>().sqrt();
    Err(Error::SolverFailure {
        iterations,
        residual: true_res / b_norm,
        context: " (stagnated above the requested tolerance)".into(),
    })
}

/// Solves an assembled system and returns the full nodal vector with the
/// prescribed values filled back in.
pub fn solve(system: &SparseSystem, tol: f64) -> Result<Vec<f64>> {
    solve_with(system, SolverOptions::with_tol(tol), None).map(|(x, _)| x)
}

/// Like [`solve`], optionally warm-started from a previous full nodal vector.
pub fn solve_with(
    system: &SparseSystem,
    opts: SolverOptions,
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport)> {
    let mut x = match guess {
        Some(g) => system.restrict(g),
        None => vec![0.0; system.num_free()],
    };
    let report = pcg(&system.matrix, &system.rhs, &mut x, opts)?;
    log::debug!("pcg: {} unknowns, {} iterations, residual {:.2e}", x.len(), report.iterations, report.residual);
    Ok((system.expand(&x), report))
}
