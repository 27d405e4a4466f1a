use klab_core::action::{renormalize_modified, ConventionalParams, Measure, ModifiedParams};
use klab_core::lattice::{build_lattice, SourceField};
use klab_core::quadrature::{integrate_to_infinity, QuadSettings};
use klab_core::sampler::{
    generating_functional_ratio, quadrature_reference, quadrature_reference_polar, run_chain,
    ChainConfig, Observable,
};

fn cfg(seed: u64) -> ChainConfig {
    ChainConfig {
        steps: 60_000,
        burn_in: 5_000,
        seed,
        ..ChainConfig::default()
    }
}

fn quad() -> QuadSettings {
    QuadSettings::with_tolerance(1e-11, 1e-10)
}

/// Exponent of the three-site ring `-(Y/2) Σ(φ_{k+1}-φ_k)² - (m²/2) Σ φ²`.
fn ring_weight(y: f64, m2: f64) -> impl Fn(&[f64]) -> f64 {
    move |p: &[f64]| {
        let grad: f64 = (0..3).map(|k| (p[(k + 1) % 3] - p[k]).powi(2)).sum();
        let mass: f64 = p.iter().map(|x| x * x).sum();
        (-0.5 * y * grad - 0.5 * m2 * mass).exp()
    }
}

#[test]
fn three_site_gaussian_radius_matches_cartesian_quadrature() {
    let g = build_lattice(1, 1, 1.0).unwrap();
    let p = ConventionalParams::new(1.0, 0.6, 0.0, 4).unwrap();
    let w = ring_weight(1.0, 0.6);
    let z = quadrature_reference(3, &w, &quad()).unwrap();
    let k2 = quadrature_reference(3, |x| x.iter().map(|v| v * v).sum::<f64>() * w(x), &quad()).unwrap() / z;
    let r = run_chain(&g, &p, &SourceField::zeros(3), Measure::Conventional, &cfg(1), &[Observable::KappaSq]).unwrap();
    let e = r.get(Observable::KappaSq).unwrap();
    assert!(e.deviation(k2) < 3.0, "MCMC {e:?} vs quadrature {k2}");
}

#[test]
fn log_radius_shift_between_measures() {
    let g = build_lattice(1, 1, 1.0).unwrap();
    let p = ConventionalParams::new(1.0, 0.6, 0.0, 4).unwrap();
    let w = ring_weight(1.0, 0.6);
    let lnk = |x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>().ln();
    for (m, seed) in [(Measure::Conventional, 2), (Measure::Modified, 3)] {
        let z = quadrature_reference_polar(3, m, &w, &quad()).unwrap();
        let expected = quadrature_reference_polar(3, m, |x| lnk(x) * w(x), &quad()).unwrap() / z;
        let r = run_chain(&g, &p, &SourceField::zeros(3), m, &cfg(seed), &[Observable::LogKappa]).unwrap();
        let e = r.get(Observable::LogKappa).unwrap();
        assert!(e.deviation(expected) < 3.0, "{m}: {e:?} vs {expected}");
    }
}

#[test]
fn modified_free_rescaled_radius_is_half_normal() {
    // Without the gradient term the modified free radius is half-normal in ϱ.
    let g = build_lattice(3, 1, 1.0).unwrap();
    let m2 = 1.7;
    let mut p = renormalize_modified(&ModifiedParams::new(m2, 0.0, 4).unwrap(), 27, 1.0, 3);
    p.gradient_coeff = 0.0;
    let s = quad();
    let num = integrate_to_infinity(|r| r * r * (-0.5 * m2 * r * r).exp(), 0.0, &s).unwrap().value;
    let den = integrate_to_infinity(|r| (-0.5 * m2 * r * r).exp(), 0.0, &s).unwrap().value;
    let r = run_chain(&g, &p, &SourceField::zeros(27), Measure::Modified, &cfg(4), &[Observable::RhoSq]).unwrap();
    let e = r.get(Observable::RhoSq).unwrap();
    assert!(e.deviation(num / den) < 3.0, "{e:?} vs {}", num / den);
}

#[test]
fn source_ratio_is_even_in_h() {
    let g = build_lattice(2, 1, 1.0).unwrap();
    let p = ConventionalParams::free(1.0);
    let h = SourceField::new((0..9).map(|k| 0.05 * k as f64).collect()).unwrap();
    let c = ChainConfig { steps: 4000, burn_in: 500, ..cfg(5) };
    let a = generating_functional_ratio(&g, &p, &h, Measure::Conventional, &c).unwrap();
    let b = generating_functional_ratio(&g, &p, &h.negated(), Measure::Conventional, &c).unwrap();
    assert_eq!(a, b);
}
