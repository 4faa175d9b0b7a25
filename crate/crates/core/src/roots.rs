//! Scalar bracketed root finding shared by the graph and quantization code.

/// Illinois false position on `[lo, hi]`, where `f(lo)` and `f(hi)` must
/// have opposite signs. Returns `None` if they do not.
pub(crate) fn illinois<F>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if !fa.is_finite() || !fb.is_finite() || fa.signum() == fb.signum() {
        return None;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        // Alternate with plain bisection so a stubborn end cannot stall us.
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= xtol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
    }
    Some(if fa.abs() < fb.abs() { a } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root_of_two() {
        let r = illinois(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(illinois(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }
}
