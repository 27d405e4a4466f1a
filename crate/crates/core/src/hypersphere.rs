//! The radius/direction split `φ = κη` and exact moments of the uniform
//! measure on the unit sphere `S^{N-1}`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::FieldConfig;

/// Tolerance on `Ση² = 1`.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Field radius `κ ≥ 0` and unit direction field `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypersphericalState {
    kappa: f64,
    eta: Vec<f64>,
}

impl HypersphericalState {
    /// Builds a state, renormalising `eta` onto the unit sphere.
    pub fn new(kappa: f64, eta: Vec<f64>) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be finite and non-negative, got {kappa}"
            )));
        }
        let eta = normalized(eta)?;
        Ok(Self { kappa, eta })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn sites(&self) -> usize {
        self.eta.len()
    }

    pub fn into_parts(self) -> (f64, Vec<f64>) {
        (self.kappa, self.eta)
    }
}

fn normalized(mut v: Vec<f64>) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::DegenerateInput("empty direction field".into()));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("eta[{i}] = {}", v[i])));
    }
    let norm = euclidean_norm(&v);
    if norm == 0.0 {
        return Err(Error::DegenerateInput(
            "zero vector has no direction on the sphere".into(),
        ));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Overflow-safe Euclidean norm.
pub fn euclidean_norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

pub fn decompose(field: &FieldConfig) -> Result<HypersphericalState> {
    let values = field.values();
    let kappa = euclidean_norm(values);
    if kappa == 0.0 {
        return Err(Error::DegenerateInput(
            "zero field: direction is undefined".into(),
        ));
    }
    let eta = values.iter().map(|x| x / kappa).collect();
    HypersphericalState::new(kappa, eta)
}

pub fn recompose(state: &HypersphericalState) -> FieldConfig {
    FieldConfig::new(state.eta.iter().map(|e| state.kappa * e).collect())
        .expect("finite kappa times unit vector is finite")
}

/// Uniform direction on `S^{n-1}` from normalised independent Gaussians.
pub fn sample_uniform_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sphere dimension N must be >= 1".into()));
    }
    let mut buf = vec![0.0; n];
    fill_uniform_direction(&mut buf, rng);
    Ok(buf)
}

/// In-place variant of [`sample_uniform_direction`]; `out` must be non-empty.
pub fn fill_uniform_direction<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    loop {
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let norm = euclidean_norm(out);
        if norm > 0.0 {
            out.iter_mut().for_each(|x| *x /= norm);
            return;
        }
    }
}

/// `⟨η_k² η_l²⟩ = (1 + 2δ_kl) / (N(N+2))` for the uniform sphere measure.
pub fn exact_pair_moment(n: usize, same_site: bool) -> f64 {
    let n = n as f64;
    let num = if same_site { 3.0 } else { 1.0 };
    num / (n * (n + 2.0))
}

/// Exact uniform-sphere moment `E[Π_i η_i^{e_i}]` over distinct sites.
///
/// Any odd exponent gives zero. For even exponents `e_i = 2a_i`,
/// `E = Π_i (2a_i - 1)!! / Π_{j < A} (N + 2j)` with `A = Σ a_i`, which is the
/// Gamma-function form `Γ(N/2) Π Γ(a_i+1/2)/Γ(1/2) / Γ(N/2 + A)` with the
/// half-integer Gammas cancelled.
pub fn sphere_moment(n: usize, exponents: &[u32]) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("sphere dimension N must be >= 1".into()));
    }
    if exponents.len() > n {
        return Err(Error::InvalidParameter(format!(
            "{} distinct sites requested on a sphere with N = {n}",
            exponents.len()
        )));
    }
    if exponents.iter().any(|e| e % 2 == 1) {
        return Ok(0.0);
    }
    let numerators = exponents
        .iter()
        .flat_map(|&e| (1..=e / 2).map(|t| (2 * t - 1) as f64));
    let denominators = (0..).map(|j: u64| n as f64 + 2.0 * j as f64);
    // Interleave factors so the running product stays near unity.
    Ok(numerators
        .zip(denominators)
        .fold(1.0, |acc, (num, den)| acc * (num / den)))
}

/// Total mass `∫ δ(1 - Ση²) Π dη = π^{N/2} / Γ(N/2)` (half the area of `S^{N-1}`).
pub fn sphere_delta_measure(n: usize) -> f64 {
    assert!(n >= 1);
    // m(1) = 1, m(2) = π, m(k+2) = m(k) π / (k/2)
    let (mut m, mut k) = if n % 2 == 1 { (1.0, 1) } else { (std::f64::consts::PI, 2) };
    while k < n {
        m *= std::f64::consts::PI / (k as f64 / 2.0);
        k += 2;
    }
    m
}

/// Parses a comma-separated exponent list such as `"4,4"` or `"2"`.
pub fn parse_exponent_spec(spec: &str) -> Result<Vec<u32>> {
    let trimmed = spec.trim();
    if trimmed.is_empty() {
        return Err(Error::InvalidParameter("empty exponent list".into()));
    }
    trimmed
        .split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<u32>()
                .ok()
                .filter(|&e| e <= 64)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "malformed exponent `{tok}` (expected an integer in 0..=64)"
                    ))
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::function::gamma::ln_gamma;

    fn gamma_formula(n: usize, exps: &[u32]) -> f64 {
        let half = 0.5 * n as f64;
        let a: Vec<f64> = exps.iter().map(|&e| e as f64 / 2.0).collect();
        let total: f64 = a.iter().sum();
        let ln = ln_gamma(half) - ln_gamma(half + total)
            + a.iter().map(|&ai| ln_gamma(ai + 0.5) - ln_gamma(0.5)).sum::<f64>();
        ln.exp()
    }

    #[test]
    fn decompose_examples() {
        let s = decompose(&FieldConfig::new(vec![3.0, 4.0]).unwrap()).unwrap();
        assert_relative_eq!(s.kappa(), 5.0, max_relative = 1e-15);
        assert_relative_eq!(s.eta()[0], 0.6, max_relative = 1e-15);
        assert_relative_eq!(s.eta()[1], 0.8, max_relative = 1e-15);

        let s = decompose(&FieldConfig::new(vec![1.0; 4]).unwrap()).unwrap();
        assert_relative_eq!(s.kappa(), 2.0, max_relative = 1e-15);
        assert!(s.eta().iter().all(|&e| (e - 0.5).abs() < 1e-15));

        let err = decompose(&FieldConfig::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn recompose_examples() {
        let s = HypersphericalState::new(5.0, vec![0.6, 0.8]).unwrap();
        let f = recompose(&s);
        assert_relative_eq!(f.values()[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(f.values()[1], 4.0, max_relative = 1e-14);

        let s = HypersphericalState::new(0.0, vec![0.3, -0.1]).unwrap();
        assert!(recompose(&s).values().iter().all(|&x| x == 0.0));

        let s = HypersphericalState::new(2.0, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(recompose(&s).values(), &[2.0, 0.0, 0.0]);
    }

    #[test]
    fn state_rejects_negative_kappa() {
        assert!(HypersphericalState::new(-1.0, vec![1.0]).is_err());
        assert!(HypersphericalState::new(1.0, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn pair_moment_examples() {
        assert_eq!(exact_pair_moment(4, true), 1.0 / 8.0);
        assert_relative_eq!(exact_pair_moment(4, false), 1.0 / 24.0, max_relative = 1e-15);
        assert_eq!(exact_pair_moment(1, true), 1.0);
    }

    #[test]
    fn sphere_moment_examples() {
        for n in 1..20 {
            assert_relative_eq!(sphere_moment(n, &[2]).unwrap(), 1.0 / n as f64, max_relative = 1e-15);
            assert_eq!(sphere_moment(n, &[1]).unwrap(), 0.0);
        }
        assert_relative_eq!(sphere_moment(6, &[4, 4]).unwrap(), 1.0 / 640.0, max_relative = 1e-14);
        assert!(sphere_moment(2, &[2, 2, 2]).is_err());
        assert_eq!(sphere_moment(3, &[]).unwrap(), 1.0);
    }

    #[test]
    fn sphere_moment_matches_gamma_formula() {
        for n in 1..12 {
            for exps in [vec![2], vec![4], vec![8], vec![2, 2], vec![4, 4], vec![2, 4, 6], vec![0, 6]] {
                if exps.len() > n {
                    continue;
                }
                let exact = sphere_moment(n, &exps).unwrap();
                assert_relative_eq!(exact, gamma_formula(n, &exps), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn sphere_moment_reduces_to_pair_moment() {
        for n in [1, 2, 4, 10, 50] {
            assert_relative_eq!(sphere_moment(n, &[4]).unwrap(), exact_pair_moment(n, true), max_relative = 1e-14);
            if n >= 2 {
                assert_relative_eq!(
                    sphere_moment(n, &[2, 2]).unwrap(),
                    exact_pair_moment(n, false),
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn sphere_6_44_monte_carlo() {
        let mut rng = crate::rng::stream(11);
        let samples = 2_000_000;
        let mut acc = Vec::with_capacity(samples);
        let mut eta = [0.0; 6];
        for _ in 0..samples {
            fill_uniform_direction(&mut eta, &mut rng);
            acc.push(eta[0].powi(4) * eta[1].powi(4));
        }
        let est = crate::stats::naive_estimate(&acc);
        assert!((est.mean - 1.0 / 640.0).abs() < 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn zero_sphere_is_sign() {
        let mut rng = crate::rng::stream(3);
        let mut plus = 0;
        let trials = 20_000;
        for _ in 0..trials {
            let e = sample_uniform_direction(1, &mut rng).unwrap();
            assert!(e[0] == 1.0 || e[0] == -1.0);
            if e[0] > 0.0 {
                plus += 1;
            }
        }
        let frac = plus as f64 / trials as f64;
        // 3 standard errors of a fair coin
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / trials as f64).sqrt());
        assert!(sample_uniform_direction(0, &mut rng).is_err());
    }

    #[test]
    fn delta_measure_values() {
        use std::f64::consts::PI;
        assert_relative_eq!(sphere_delta_measure(1), 1.0);
        assert_relative_eq!(sphere_delta_measure(2), PI);
        assert_relative_eq!(sphere_delta_measure(3), 2.0 * PI);
        assert_relative_eq!(sphere_delta_measure(4), PI * PI);
        for n in 1..30 {
            let via_gamma = (0.5 * n as f64 * PI.ln() - ln_gamma(0.5 * n as f64)).exp();
            assert_relative_eq!(sphere_delta_measure(n), via_gamma, max_relative = 1e-12);
        }
    }

    #[test]
    fn uniform_gradient_moment_is_two_over_n() {
        // <(η_i - η_j)^2> = 2/N for distinct sites
        for n in [2usize, 5, 9] {
            let exact = 2.0 * sphere_moment(n, &[2]).unwrap();
            assert_relative_eq!(exact, 2.0 / n as f64, max_relative = 1e-15);
        }
    }

    #[test]
    fn exponent_spec_parsing() {
        assert_eq!(parse_exponent_spec("4,4").unwrap(), vec![4, 4]);
        assert_eq!(parse_exponent_spec(" 2 ").unwrap(), vec![2]);
        assert!(parse_exponent_spec("").is_err());
        assert!(parse_exponent_spec("4,,4").is_err());
        assert!(parse_exponent_spec("-2").is_err());
        assert!(parse_exponent_spec("x").is_err());
        assert!(parse_exponent_spec("1000").is_err());
    }

    proptest! {
        #[test]
        fn decompose_recompose_round_trip(v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            prop_assume!(v.iter().any(|&x| x != 0.0));
            let f = FieldConfig::new(v.clone()).unwrap();
            let s = decompose(&f).unwrap();
            let norm: f64 = s.eta().iter().map(|e| e * e).sum();
            prop_assert!((norm - 1.0).abs() < UNIT_NORM_TOL);
            let back = recompose(&s);
            let scale = euclidean_norm(&v);
            for (a, b) in back.values().iter().zip(&v) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn sampled_directions_are_unit(n in 1usize..200, seed in any::<u64>()) {
            let mut rng = crate::rng::stream(seed);
            let e = sample_uniform_direction(n, &mut rng).unwrap();
            let norm: f64 = e.iter().map(|x| x * x).sum();
            prop_assert!((norm - 1.0).abs() < UNIT_NORM_TOL);
        }

        #[test]
        fn schwarz_bound_on_bonds(n in 2usize..50, seed in any::<u64>()) {
            let mut rng = crate::rng::stream(seed);
            let e = sample_uniform_direction(n, &mut rng).unwrap();
            for i in 0..n {
                let j = (i + 1) % n;
                let d = (e[j] - e[i]).powi(2);
                prop_assert!(d <= 2.0 * (e[i] * e[i] + e[j] * e[j]) + 1e-15);
            }
        }
    }
}
