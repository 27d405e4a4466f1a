//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite, half-infinite
//! and infinite intervals, plus a power substitution for integrable endpoint
//! singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

impl QuadSettings {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx)? + f(center + dx)?;
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * half;
    if !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok((value, ((kron - gauss) * half).abs()))
}

/// Adaptive integral of a fallible integrand over `[a, b]`.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, settings: &QuadSettings) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("bad interval [{a}, {b}]")));
    }
    let (sign, lo, hi) = if a < b { (1.0, a, b) } else { (-1.0, b, a) };
    let mut heap = BinaryHeap::new();
    let (value, error) = kronrod(&mut f, lo, hi)?;
    let mut evaluations = 15;
    let mut total = value;
    let mut total_err = error;
    heap.push(Panel {
        a: lo,
        b: hi,
        value,
        error,
    });
    loop {
        if total_err <= settings.abs_tol.max(settings.rel_tol * total.abs()) {
            break;
        }
        if heap.len() >= settings.max_intervals {
            return Err(Error::Quadrature(format!(
                "error {total_err:.3e} above tolerance after {} panels on [{lo}, {hi}]",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further in double precision
            return Err(Error::Quadrature(format!(
                "panel [{}, {}] exhausted precision with error {:.3e}",
                worst.a, worst.b, worst.error
            )));
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid)?;
        let (v2, e2) = kronrod(&mut f, mid, worst.b)?;
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum in interval order so the result does not carry the running
    // updates' rounding.
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value: sign * value,
        error,
        evaluations,
    })
}

pub fn integrate<F>(mut f: F, a: f64, b: f64, settings: &QuadSettings) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, settings)
}

/// `∫_a^∞ f` through `x = a + t/(1-t)`.
pub fn try_integrate_to_infinity<F>(mut f: F, a: f64, settings: &QuadSettings) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    try_integrate(
        |t| {
            let s = 1.0 - t;
            let x = a + t / s;
            let fx = f(x)?;
            Ok(if fx == 0.0 { 0.0 } else { fx / (s * s) })
        },
        0.0,
        1.0,
        settings,
    )
}

pub fn integrate_to_infinity<F>(mut f: F, a: f64, settings: &QuadSettings) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    try_integrate_to_infinity(|x| Ok(f(x)), a, settings)
}

/// `∫_{-∞}^{∞} f` through `x = t/(1-t²)`.
pub fn try_integrate_real_line<F>(mut f: F, settings: &QuadSettings) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    try_integrate(
        |t| {
            let s = 1.0 - t * t;
            let x = t / s;
            let fx = f(x)?;
            Ok(if fx == 0.0 { 0.0 } else { fx * (1.0 + t * t) / (s * s) })
        },
        -1.0,
        1.0,
        settings,
    )
}

pub fn integrate_real_line<F>(mut f: F, settings: &QuadSettings) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    try_integrate_real_line(|x| Ok(f(x)), settings)
}

/// `∫_0^b f` for `f(x) ~ x^alpha` near zero with `alpha > -1`.
///
/// Substitutes `x = u^m`, `m = 1/(1+alpha)`, which turns the leading
/// behaviour into a constant.
pub fn try_integrate_from_origin<F>(
    mut f: F,
    b: f64,
    alpha: f64,
    settings: &QuadSettings,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if alpha <= -1.0 {
        return Err(Error::Divergent(format!(
            "x^{alpha} is not integrable at the origin"
        )));
    }
    let m = 1.0 / (1.0 + alpha);
    let ub = b.powf(1.0 / m);
    try_integrate(
        |u| {
            if u == 0.0 {
                return Ok(0.0);
            }
            let x = u.powf(m);
            Ok(f(x)? * m * u.powf(m - 1.0))
        },
        0.0,
        ub,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_exact() {
        let s = QuadSettings::default();
        let r = integrate(|x| x.powi(5) - 2.0 * x, -1.0, 2.0, &s).unwrap();
        assert_relative_eq!(r.value, 63.0 / 6.0 - 3.0, max_relative = 1e-14);
        let r = integrate(|x| x * x, 2.0, 0.0, &s).unwrap();
        assert_relative_eq!(r.value, -8.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_on_real_line() {
        let s = QuadSettings::default();
        let r = integrate_real_line(|x| (-0.5 * x * x).exp(), &s).unwrap();
        assert_relative_eq!(r.value, (2.0 * PI).sqrt(), max_relative = 1e-11);
        let r = integrate_real_line(|x| x * x * (-0.5 * x * x).exp(), &s).unwrap();
        assert_relative_eq!(r.value, (2.0 * PI).sqrt(), max_relative = 1e-11);
    }

    #[test]
    fn half_line_exponential() {
        let s = QuadSettings::default();
        let r = integrate_to_infinity(|x| (-x).exp(), 1.0, &s).unwrap();
        assert_relative_eq!(r.value, (-1.0f64).exp(), max_relative = 1e-11);
    }

    #[test]
    fn endpoint_singularity() {
        let s = QuadSettings::default();
        // ∫_0^1 x^{-1/2} = 2
        let r = try_integrate_from_origin(|x| Ok(x.powf(-0.5)), 1.0, -0.5, &s).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-12);
        // ∫_0^1 x^{-0.9} cos x
        let r = try_integrate_from_origin(|x| Ok(x.powf(-0.9) * x.cos()), 1.0, -0.9, &s).unwrap();
        let reference = integrate(|u: f64| {
            // x = u^10 makes the integrand smooth: 10 cos(u^10)
            10.0 * u.powi(10).cos()
        }, 0.0, 1.0, &s).unwrap();
        assert_relative_eq!(r.value, reference.value, max_relative = 1e-11);
        assert!(try_integrate_from_origin(|x| Ok(1.0 / x), 1.0, -1.0, &s).is_err());
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let s = QuadSettings::default();
        assert!(integrate(|_| f64::NAN, 0.0, 1.0, &s).is_err());
    }

    #[test]
    fn refinement_cap_is_an_error() {
        let s = QuadSettings {
            abs_tol: 0.0,
            rel_tol: 1e-15,
            max_intervals: 3,
        };
        assert!(matches!(
            integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &s),
            Err(Error::Quadrature(_))
        ));
    }
}
