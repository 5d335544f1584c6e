use crate::error::{Error, Result};

/// Default relative tolerance on the bracket width.
pub const REL_TOL: f64 = 1e-12;
/// Iteration cap for every bisection in the crate.
pub const MAX_ITER: usize = 200;

/// Bisection on a bracket `[lo, hi]` where `f(lo)` and `f(hi)` have opposite
/// signs (or one of them is zero).
///
/// Stops when the bracket is narrower than `rel_tol * |mid|` (plus a tiny
/// absolute floor), when the midpoint hits an exact zero, or after
/// [`MAX_ITER`] halvings.
pub fn bisect<F>(what: &'static str, mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NotBracketed { what, lo: a, hi: b });
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
        if b - a <= rel_tol * mid.abs() + f64::MIN_POSITIVE {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Bisection to an absolute tolerance on the argument.
pub fn bisect_abs<F>(what: &'static str, mut f: F, lo: f64, hi: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NotBracketed { what, lo: a, hi: b });
    }
    for _ in 0..MAX_ITER {
        if b - a <= abs_tol {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let x = bisect("x^2-2", |x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn reversed_bracket_is_fine() {
        let x = bisect("x-1", |x| Ok(x - 1.0), 3.0, -1.0, REL_TOL).unwrap();
        assert!((x - 1.0).abs() < 1e-11);
    }

    #[test]
    fn rejects_same_sign() {
        let err = bisect("x^2+1", |x| Ok(x * x + 1.0), -1.0, 1.0, REL_TOL).unwrap_err();
        assert!(matches!(err, Error::NotBracketed { .. }));
    }

    #[test]
    fn absolute_tolerance() {
        let x = bisect_abs("x-0.3", |x| Ok(x - 0.3), 0.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() <= 1e-9);
    }
}
