//! Scalar root bracketing (Brent) and a damped 2-d Newton solver with a
//! finite-difference Jacobian.

use crate::error::Error;
use crate::Result;

/// Outcome of a solver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport<T> {
    pub root: T,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

const BRENT_MAX_ITER: usize = 200;

/// Brent's method on a bracketing interval [lo, hi] with f(lo)·f(hi) <= 0.
///
/// Stops when |f(root)| <= tol or the bracket width falls below
/// tol·max(1, |root|).
pub fn brent_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<SolveReport<f64>> {
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa * fb > 0.0 {
        return Err(Error::BracketInvalid {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    if fa == 0.0 {
        return Ok(SolveReport { root: a, iterations: 0, residual: 0.0, converged: true });
    }
    if fb == 0.0 {
        return Ok(SolveReport { root: b, iterations: 0, residual: 0.0, converged: true });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for iter in 1..=BRENT_MAX_ITER {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol * b.abs().max(1.0);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol {
            // Residual reports the satisfied criterion: |f| or the
            // normalized bracket width, whichever is smaller.
            let width_norm = (2.0 * xm).abs() / b.abs().max(1.0);
            return Ok(SolveReport {
                root: b,
                iterations: iter,
                residual: fb.abs().min(width_norm),
                converged: true,
            });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation, falling back to secant.
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = f(b);
    }

    Err(Error::NonConvergence {
        solver: "brent_root",
        iterations: BRENT_MAX_ITER,
        residual: fb.abs(),
    })
}

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_MAX_HALVINGS: usize = 30;

/// Damped Newton for a 2-d system F(x) = 0 with a forward-difference
/// Jacobian. Steps are halved (up to 30 times) whenever the residual
/// norm fails to decrease.
///
/// Non-convergence and singular Jacobians are reported through
/// `converged = false` rather than an error, so callers can inspect the
/// last iterate.
pub fn newton_2d(
    f: impl Fn([f64; 2]) -> [f64; 2],
    start: [f64; 2],
    tol: f64,
) -> SolveReport<[f64; 2]> {
    let norm = |v: [f64; 2]| v[0].abs().max(v[1].abs());
    let mut x = start;
    let mut fx = f(x);
    let mut res = norm(fx);

    for iter in 0..NEWTON_MAX_ITER {
        if !res.is_finite() {
            return SolveReport { root: x, iterations: iter, residual: res, converged: false };
        }
        if res <= tol {
            return SolveReport { root: x, iterations: iter, residual: res, converged: true };
        }

        // Forward-difference Jacobian.
        let mut jac = [[0.0f64; 2]; 2];
        for col in 0..2 {
            let h = 1e-7 * x[col].abs().max(1e-7);
            let mut xh = x;
            xh[col] += h;
            let fh = f(xh);
            jac[0][col] = (fh[0] - fx[0]) / h;
            jac[1][col] = (fh[1] - fx[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = jac.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if det.abs() < 1e-14 * scale.max(1.0) * scale.max(1.0) {
            return SolveReport { root: x, iterations: iter, residual: res, converged: false };
        }
        let step = [
            (jac[1][1] * fx[0] - jac[0][1] * fx[1]) / det,
            (jac[0][0] * fx[1] - jac[1][0] * fx[0]) / det,
        ];

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let candidate = [x[0] - lambda * step[0], x[1] - lambda * step[1]];
            let fc = f(candidate);
            let rc = norm(fc);
            if rc.is_finite() && rc < res {
                x = candidate;
                fx = fc;
                res = rc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return SolveReport { root: x, iterations: iter + 1, residual: res, converged: false };
        }
    }

    SolveReport {
        root: x,
        iterations: NEWTON_MAX_ITER,
        residual: res,
        converged: res <= tol,
    }
}
