//! Deterministic references: brute-force quadrature for `N ≤ 3`, the
//! analytic two-vertex bubble, and the exact source ratio of the free
//! modified model.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{run_chain, ChainConfig, Observable};
use crate::action::{
    leading_saddle_kappa, predicted_scaling, ConventionalParams, Measure, ScalingPrediction, Term,
};
use crate::error::{Error, Result};
use crate::hypersphere::sphere_moment;
use crate::lattice::{LatticeGeometry, SourceField};
use crate::quadrature::{try_integrate, try_integrate_real_line, try_integrate_to_infinity, QuadSettings};
use crate::stats::Estimate;

fn check_small(sites: usize) -> Result<()> {
    if !(1..=3).contains(&sites) {
        return Err(Error::InvalidParameter(format!(
            "quadrature references support 1 <= N <= 3, got {sites}"
        )));
    }
    Ok(())
}

fn inner(settings: &QuadSettings) -> QuadSettings {
    QuadSettings {
        abs_tol: settings.abs_tol * 1e-2,
        rel_tol: (settings.rel_tol * 1e-2).max(1e-13),
        max_intervals: settings.max_intervals,
    }
}

fn nest<F>(f: &F, point: &mut [f64], depth: usize, settings: &QuadSettings) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if depth == point.len() {
        return Ok(f(point));
    }
    let s = if depth == 0 { *settings } else { inner(settings) };
    let r = try_integrate_real_line(
        |x| {
            point[depth] = x;
            nest(f, point, depth + 1, settings)
        },
        &s,
    )?;
    Ok(r.value)
}

/// `∫_{R^N} f(φ) Π dφ_k` by nested adaptive quadrature; `f` must include
/// its own weight and decay rapidly.
pub fn quadrature_reference<F>(sites: usize, f: F, settings: &QuadSettings) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    check_small(sites)?;
    let mut point = vec![0.0; sites];
    nest(&f, &mut point, 0, settings)
}

/// The same integral in radial–angular form,
/// `∫_0^∞ w(κ) dκ ∮ f(κη) dΩ(η)` with `w = κ^{N-1}` (conventional) or
/// `w = 1` (modified).
pub fn quadrature_reference_polar<F>(
    sites: usize,
    measure: Measure,
    f: F,
    settings: &QuadSettings,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    check_small(sites)?;
    let weight = |k: f64| match measure {
        Measure::Conventional => k.powi(sites as i32 - 1),
        Measure::Modified => 1.0,
    };
    let s_in = inner(settings);
    let angular = |k: f64| -> Result<f64> {
        match sites {
            1 => Ok(f(&[k]) + f(&[-k])),
            2 => Ok(try_integrate(|t| Ok(f(&[k * t.cos(), k * t.sin()])), 0.0, 2.0 * PI, &s_in)?.value),
            _ => Ok(try_integrate(
                |th| {
                    let (st, ct) = th.sin_cos();
                    let ring = try_integrate(
                        |ph| {
                            let (sp, cp) = ph.sin_cos();
                            Ok(f(&[k * st * cp, k * st * sp, k * ct]))
                        },
                        0.0,
                        2.0 * PI,
                        &inner(&s_in),
                    )?;
                    Ok(st * ring.value)
                },
                0.0,
                PI,
                &s_in,
            )?
            .value),
        }
    };
    Ok(try_integrate_to_infinity(|k| Ok(weight(k) * angular(k)?), 0.0, settings)?.value)
}

/// Exact `S(h)/S(0)` of the modified free model with `Y = 0 = g₀`:
///
/// `Σ_k (aⁿ|h|²/(2m₀²))^k ⟨η_1^{2k}⟩ / k!`,
///
/// obtained from the half-line Gaussian `κ` integral symmetrised under
/// `η → -η` and rotation invariance of the sphere moments.
pub fn free_modified_source_ratio(
    sites: usize,
    spacing_pow_n: f64,
    mass_sq: f64,
    h: &SourceField,
) -> Result<f64> {
    if h.len() != sites {
        return Err(Error::SizeMismatch {
            expected: sites,
            actual: h.len(),
        });
    }
    if !(mass_sq > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "free model needs m0^2 > 0, got {mass_sq}"
        )));
    }
    let h2: f64 = h.values().iter().map(|x| x * x).sum();
    let x = spacing_pow_n * h2 / (2.0 * mass_sq);
    let mut total = 1.0;
    let mut x_pow_over_fact = 1.0;
    for k in 1..=400u32 {
        x_pow_over_fact *= x / k as f64;
        let term = x_pow_over_fact * sphere_moment(sites, &[2 * k])?;
        total += term;
        if term < 1e-17 * total {
            return Ok(total);
        }
    }
    Err(Error::InvalidParameter(format!(
        "source series did not converge (x = {x})"
    )))
}

/// The two-vertex bubble `κ⁸ a^{2n} Σ_{k,l} ⟨η_k⁴ η_l⁴⟩` with the uniform
/// sphere average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleEstimate {
    pub sites: usize,
    pub spacing: f64,
    pub dim: usize,
    /// `√(N a^{2-n})`
    pub kappa: f64,
    /// `Σ_{k,l} ⟨η_k⁴ η_l⁴⟩ = N⟨η⁸⟩ + N(N-1)⟨η_k⁴η_l⁴⟩`
    pub sphere_sum: f64,
    pub value: Estimate,
    /// Same with `κ² = (N-1) a^{2-n}`.
    pub value_exact_radius: f64,
    pub predicted: ScalingPrediction,
}

pub fn bubble_estimate(geom: &LatticeGeometry) -> Result<BubbleEstimate> {
    let n_sites = geom.sites();
    let a = geom.spacing();
    let dim = geom.dim();
    let mut sphere_sum = n_sites as f64 * sphere_moment(n_sites, &[8])?;
    if n_sites > 1 {
        sphere_sum += (n_sites * (n_sites - 1)) as f64 * sphere_moment(n_sites, &[4, 4])?;
    }
    let kappa = leading_saddle_kappa(n_sites, a, dim);
    let a2n = a.powi(2 * dim as i32);
    let exact_k2 = (n_sites - 1) as f64 * a.powi(2 - dim as i32);
    Ok(BubbleEstimate {
        sites: n_sites,
        spacing: a,
        dim,
        kappa,
        sphere_sum,
        value: Estimate::exact(kappa.powi(8) * a2n * sphere_sum),
        value_exact_radius: exact_k2.powi(4) * a2n * sphere_sum,
        predicted: predicted_scaling(Term::QuarticBubble, 4, dim as u32, Measure::Conventional),
    })
}

/// The bubble with `Σ⟨η_k⁴η_l⁴⟩` averaged under the sampled measure
/// instead of the uniform sphere.
pub fn bubble_weighted(
    geom: &LatticeGeometry,
    params: &ConventionalParams,
    measure: Measure,
    cfg: &ChainConfig,
) -> Result<Estimate> {
    let r = run_chain(
        geom,
        params,
        &SourceField::zeros(geom.sites()),
        measure,
        cfg,
        &[Observable::EtaFourthSumSq],
    )?;
    let a = geom.spacing();
    let k = leading_saddle_kappa(geom.sites(), a, geom.dim());
    Ok(r.estimates[0].1.scaled(k.powi(8) * a.powi(2 * geom.dim() as i32)))
}
