//! Scalar root finding on a bracket.

use crate::error::{Error, Result};

/// Brent's method on `[a, b]` with `f(a)` and `f(b)` of opposite sign.
///
/// Stops when `|f(x)| <= ftol` or the bracket is narrower than `xtol`.
pub fn brent(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidParameter(format!(
            "root not bracketed: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..max_iter {
        if fb.abs() <= ftol || (b - a).abs() <= xtol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected {
            (s - b).abs() >= (b - c).abs() / 2.0 || (b - c).abs() < xtol
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0 || (c - d).abs() < xtol
        };
        if outside || slow {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    if fb.abs() <= ftol {
        Ok(b)
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            increment: (b - a).abs(),
        })
    }
}

/// Scans outward from 0 on `[-s_max, s_max]` and returns the sign change
/// nearest to 0 as `(a, b, f(a), f(b))`. Points where `f` fails are skipped.
pub fn bracket_near_zero(
    mut f: impl FnMut(f64) -> Result<f64>,
    f0: f64,
    s_max: f64,
    steps: usize,
) -> Option<(f64, f64, f64, f64)> {
    let mut prev = [(0.0, Some(f0)), (0.0, Some(f0))];
    for i in 1..=steps {
        // Geometric spacing resolves roots near 0 and still reaches s_max.
        let s = s_max * (2f64.powf(i as f64 / steps as f64 * 12.0) - 1.0) / (2f64.powi(12) - 1.0);
        for (side, sign) in [(0usize, 1.0), (1usize, -1.0)] {
            let x = sign * s;
            let fx = f(x).ok().filter(|v| v.is_finite());
            if let (Some(fp), Some(fx)) = (prev[side].1, fx) {
                if fp == 0.0 {
                    return Some((prev[side].0, prev[side].0, 0.0, 0.0));
                }
                if fp.signum() != fx.signum() {
                    return Some((prev[side].0, x, fp, fx));
                }
            }
            prev[side] = (x, fx);
        }
    }
    None
}
