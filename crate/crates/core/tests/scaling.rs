use std::f64::consts::PI;

use klab_core::action::{ConventionalParams, Measure};
use klab_core::sampler::{ChainConfig, Observable};
use klab_core::scaling::{
    fit_n_exponent, run_sweep, ModelSpec, Protocol, SweepObservable, SweepPlan, SweepPoint, VolumeMode,
};

/// `Σ_k 1/(m₀² aⁿ + Y aⁿ⁻² λ_k)` with the periodic lattice Laplacian spectrum.
fn gaussian_kappa_sq(dim: usize, side: usize, a: f64, y: f64, m2: f64) -> f64 {
    let lam: Vec<f64> = (0..side).map(|k| 4.0 * (PI * k as f64 / side as f64).sin().powi(2)).collect();
    let mut total = 0.0;
    let n = side.pow(dim as u32);
    for idx in 0..n {
        let mut rest = idx;
        let mut l = 0.0;
        for _ in 0..dim {
            l += lam[rest % side];
            rest /= side;
        }
        total += 1.0 / (m2 * a.powi(dim as i32) + y * a.powi(dim as i32 - 2) * l);
    }
    total
}

fn plan(points: &[usize], measures: Vec<Measure>, model: ModelSpec) -> SweepPlan {
    SweepPlan {
        dim: 2,
        points: points.iter().map(|&l| SweepPoint { half_extent: l, spacing: 1.0 }).collect(),
        model,
        measures,
        chain: ChainConfig { steps: 30_000, burn_in: 3_000, ..ChainConfig::default() },
        chains_per_point: 2,
        volume: VolumeMode::Free,
        protocol: Protocol::BareFixed,
    }
}

#[test]
fn conventional_sweep_matches_gaussian_spectrum() {
    let p = plan(&[1, 2], vec![Measure::Conventional], ModelSpec::default());
    let obs = [SweepObservable::Chain { observable: Observable::KappaSq }];
    let r = run_sweep(&p, &obs, 17).unwrap();
    assert!(r.failures.is_empty());
    for row in &r.rows {
        let want = gaussian_kappa_sq(2, 2 * row.half_extent + 1, 1.0, 1.0, 1.0);
        assert!(row.estimate.deviation(want) < 4.0, "N={}: {:?} vs {want}", row.sites, row.estimate);
    }
}

#[test]
fn sweep_is_reproducible_and_seeded_per_task() {
    let p = plan(&[1, 2], vec![Measure::Conventional, Measure::Modified], ModelSpec::default());
    let obs = [SweepObservable::Chain { observable: Observable::Kappa }, SweepObservable::Bubble];
    let a = run_sweep(&p, &obs, 3).unwrap();
    let b = run_sweep(&p, &obs, 3).unwrap();
    assert_eq!(a, b);
    let c = run_sweep(&p, &obs, 4).unwrap();
    assert_ne!(a.rows[0].estimate, c.rows[0].estimate);
    let mut seeds: Vec<u64> = a.rows.iter().filter(|r| r.observable == "kappa").map(|r| r.seed).collect();
    seeds.dedup();
    assert_eq!(seeds.len(), 4);
}

#[test]
fn non_normalizable_points_are_recorded_not_fatal() {
    let model = ModelSpec {
        conventional: ConventionalParams::new(1.0, -1.0, 0.0, 4).unwrap(),
        ..ModelSpec::default()
    };
    let p = plan(&[1], vec![Measure::Conventional, Measure::Modified], model);
    let r = run_sweep(&p, &[SweepObservable::Chain { observable: Observable::Kappa }], 1).unwrap();
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].measure, Measure::Conventional);
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.rows[0].measure, Measure::Modified);
}

#[test]
fn kappa_sq_grows_linearly_in_n_without_gradient() {
    let model = ModelSpec {
        conventional: ConventionalParams::new(0.0, 1.0, 0.0, 4).unwrap(),
        ..ModelSpec::default()
    };
    let p = plan(&[1, 2, 3], vec![Measure::Conventional], model);
    let r = run_sweep(&p, &[SweepObservable::Chain { observable: Observable::KappaSq }], 9).unwrap();
    let rows = r.series(Measure::Conventional, "kappa_sq");
    let fit = fit_n_exponent(&rows).unwrap();
    // ⟨κ²⟩ = N / m₀² exactly
    assert!((fit.exponent - 1.0).abs() < 0.02, "{fit:?}");
    for row in rows {
        assert!(row.estimate.deviation(row.sites as f64) < 4.0);
    }
}
