//! Golden-section search for a unimodal scalar function.

use alloc::format;

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenMin {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

/// Minimizes `f` on `[lo, hi]` until the bracket is narrower than `tol`.
///
/// Fails with [`Error::Bracket`] if the minimum sits on either end of the
/// initial interval (the true minimizer is probably outside it) or `f`
/// returns a non-finite value.
pub fn golden_section_min<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<GoldenMin>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::invalid(format!("bad golden-section interval [{lo}, {hi}] / tol {tol}")));
    }
    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Bracket(format!("objective is not finite at {x}")))
        }
    };

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut evaluations = 2;
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
        evaluations += 1;
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    let edge = 10.0 * tol;
    if x - lo <= edge || hi - x <= edge {
        return Err(Error::Bracket(format!(
            "minimum at the edge of [{lo}, {hi}] (x = {x})"
        )));
    }
    Ok(GoldenMin { x, fx, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let r = golden_section_min(|x| Ok((x - 1.3) * (x - 1.3) + 2.0), -5.0, 5.0, 1e-10).unwrap();
        assert!((r.x - 1.3).abs() < 1e-7);
        assert!((r.fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn edge_minimum_is_a_bracket_failure() {
        let r = golden_section_min(Ok, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::Bracket(_))));
    }

    #[test]
    fn non_finite_objective() {
        let r = golden_section_min(|_| Ok(f64::NAN), 0.0, 1.0, 1e-6);
        assert!(matches!(r, Err(Error::Bracket(_))));
    }
}
