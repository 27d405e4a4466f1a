//! Metropolis sampling of the functional integral in `(κ, η)` coordinates,
//! under the conventional measure (`κ^{N-1} dκ dσ`) or the modified one
//! (`dκ dσ`).
//!
//! Two move types:
//!
//! * radial: `κ' = κ exp(σ z)`, `z ~ N(0,1)`; the log-normal proposal is
//!   asymmetric in `κ` and contributes the Hastings term `ln κ' - ln κ`;
//! * angular: a Givens rotation of a random coordinate pair `(i, j)` of `η`
//!   by an angle uniform in `[-θ, θ]`. It keeps `Ση² = 1` exactly and is its
//!   own inverse in distribution, so the proposal cancels. For `N = 1` the
//!   angular move is the flip `η → -η`.
//!
//! One sweep is `N` angular moves followed by [`RADIAL_MOVES_PER_SWEEP`]
//! radial moves; all direction sums are recomputed and `η` renormalised after
//! every sweep so rounding drift cannot accumulate.

mod observable;
mod reference;
pub mod trace;

pub use observable::{parse_observable, InsertionKind, Observable};
pub use reference::{
    bubble_estimate, bubble_weighted, free_modified_source_ratio, quadrature_reference,
    quadrature_reference_polar, BubbleEstimate,
};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{saddle_kappa, ConventionalParams, Measure};
use crate::error::{Error, Result};
use crate::hypersphere::{euclidean_norm, fill_uniform_direction};
use crate::lattice::{LatticeGeometry, SourceField};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::stats::{binned_estimate, combine_equal, Estimate};
use trace::{Trace, TraceHeader};

pub const RADIAL_MOVES_PER_SWEEP: usize = 8;

/// Target acceptance rate for step-size adaptation during burn-in.
const TARGET_ACCEPTANCE: f64 = 0.4;

/// Largest `|x|` allowed in a reweighting factor `exp(x)`.
const MAX_REWEIGHT_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Total sweeps, burn-in included.
    pub steps: usize,
    pub burn_in: usize,
    /// Width of the log-normal radial proposal.
    pub kappa_step: f64,
    /// Largest Givens rotation angle.
    pub eta_step: f64,
    pub seed: u64,
    #[serde(default = "one")]
    pub thinning: usize,
}

fn one() -> usize {
    1
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            burn_in: 2_000,
            kappa_step: 0.1,
            eta_step: 0.5,
            seed: 0,
            thinning: 1,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be >= 1".into()));
        }
        for (name, v) in [("kappa_step", self.kappa_step), ("eta_step", self.eta_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.steps - self.burn_in) / self.thinning
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub radial: f64,
    pub angular: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub estimates: Vec<(Observable, Estimate)>,
    pub acceptance: Acceptance,
    /// Step sizes after burn-in adaptation.
    pub kappa_step: f64,
    pub eta_step: f64,
    pub trace: Trace,
}

impl ChainResult {
    pub fn get(&self, obs: Observable) -> Option<&Estimate> {
        self.estimates.iter().find(|(o, _)| *o == obs).map(|(_, e)| e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiChainResult {
    pub combined: Vec<(Observable, Estimate)>,
    pub chains: Vec<ChainResult>,
}

impl MultiChainResult {
    pub fn get(&self, obs: Observable) -> Option<&Estimate> {
        self.combined.iter().find(|(o, _)| *o == obs).map(|(_, e)| e)
    }
}

/// Rejects parameter sets whose integrand does not decay at large `κ` for
/// every direction.
pub fn check_normalizable(params: &ConventionalParams) -> Result<()> {
    params.validate()?;
    let quartic_bound = params.coupling > 0.0 && params.power % 2 == 0;
    if params.coupling > 0.0 && params.power % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "odd interaction power {} with g0 > 0 is unbounded below",
            params.power
        )));
    }
    if params.mass_sq <= 0.0 && !quartic_bound {
        return Err(Error::InvalidParameter(format!(
            "measure is not normalizable: m0^2 = {} <= 0 without a confining interaction",
            params.mass_sq
        )));
    }
    Ok(())
}

/// Live chain state with cached direction sums.
pub struct ChainState<'a> {
    geom: &'a LatticeGeometry,
    params: ConventionalParams,
    h: &'a [f64],
    jacobian: f64,
    an: f64,
    grad_pref: f64,
    mass_pref: f64,
    kappa: f64,
    eta: Vec<f64>,
    grad: f64,
    power: f64,
    source: f64,
    bonds: Vec<(usize, usize)>,
}

impl<'a> ChainState<'a> {
    fn new(
        geom: &'a LatticeGeometry,
        params: ConventionalParams,
        h: &'a SourceField,
        measure: Measure,
        kappa: f64,
        eta: Vec<f64>,
    ) -> Self {
        let a = geom.spacing();
        let n = geom.dim() as i32;
        let an = a.powi(n);
        let mut s = Self {
            geom,
            params,
            h: h.values(),
            jacobian: match measure {
                Measure::Conventional => (geom.sites() - 1) as f64,
                Measure::Modified => 0.0,
            },
            an,
            grad_pref: 0.5 * params.gradient_coeff * a.powi(n - 2),
            mass_pref: 0.5 * params.mass_sq * an,
            kappa,
            eta,
            grad: 0.0,
            power: 0.0,
            source: 0.0,
            bonds: Vec::with_capacity(4 * geom.dim()),
        };
        s.refresh();
        s
    }

    /// Renormalises `η` and recomputes every cached sum from scratch.
    fn refresh(&mut self) {
        let norm = euclidean_norm(&self.eta);
        self.eta.iter_mut().for_each(|x| *x /= norm);
        let p = self.params.power as i32;
        self.grad = self.geom.gradient_sq(&self.eta);
        self.power = self.eta.iter().map(|e| e.powi(p)).sum();
        self.source = self.h.iter().zip(&self.eta).map(|(h, e)| h * e).sum();
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `Σ_{k,μ} (η_{k+μ} - η_k)²`
    pub fn gradient_sum(&self) -> f64 {
        self.grad
    }

    /// `Σ η_k^p`
    pub fn power_sum(&self) -> f64 {
        self.power
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        self.geom
    }

    /// Log target density as a function of `κ` at the current `η`.
    pub fn radial_log_target(&self, kappa: f64) -> f64 {
        self.jacobian * kappa.ln() + self.an * self.source * kappa
            - (self.grad_pref * self.grad + self.mass_pref) * kappa * kappa
            - self.params.coupling * self.an * self.power * kappa.powi(self.params.power as i32)
    }

    /// Log Metropolis–Hastings ratio for the radial move `κ → κ'`,
    /// including the log-normal proposal correction.
    pub fn radial_log_ratio(&self, kappa_new: f64) -> f64 {
        self.radial_log_target(kappa_new) - self.radial_log_target(self.kappa) + kappa_new.ln()
            - self.kappa.ln()
    }

    fn collect_bonds(&mut self, i: usize, j: usize) {
        self.bonds.clear();
        for site in [i, j] {
            for mu in 0..self.geom.dim() {
                self.bonds.push((site, mu));
                self.bonds.push((self.geom.back_neighbor(site, mu), mu));
            }
        }
        self.bonds.sort_unstable();
        self.bonds.dedup();
    }

    fn bond_sum(&self) -> f64 {
        self.bonds
            .iter()
            .map(|&(k, mu)| {
                let d = self.eta[self.geom.neighbor(k, mu)] - self.eta[k];
                d * d
            })
            .sum()
    }

    /// Applies the rotation of `(η_i, η_j)` by `θ` and returns the change of
    /// the log density; the cached sums are updated.
    fn rotate(&mut self, i: usize, j: usize, theta: f64) -> (f64, RotationUndo) {
        let (s, c) = theta.sin_cos();
        let (ei, ej) = (self.eta[i], self.eta[j]);
        let (ni, nj) = (c * ei - s * ej, s * ei + c * ej);
        self.collect_bonds(i, j);
        let before = self.bond_sum();
        self.eta[i] = ni;
        self.eta[j] = nj;
        let after = self.bond_sum();
        let p = self.params.power as i32;
        let d_grad = after - before;
        let d_power = ni.powi(p) + nj.powi(p) - ei.powi(p) - ej.powi(p);
        let d_source = self.h[i] * (ni - ei) + self.h[j] * (nj - ej);
        let k = self.kappa;
        let d_log = self.an * k * d_source
            - self.grad_pref * k * k * d_grad
            - self.params.coupling * self.an * k.powi(p) * d_power;
        self.grad += d_grad;
        self.power += d_power;
        self.source += d_source;
        (
            d_log,
            RotationUndo {
                i,
                j,
                ei,
                ej,
                d_grad,
                d_power,
                d_source,
            },
        )
    }

    fn undo(&mut self, u: RotationUndo) {
        self.eta[u.i] = u.ei;
        self.eta[u.j] = u.ej;
        self.grad -= u.d_grad;
        self.power -= u.d_power;
        self.source -= u.d_source;
    }

    /// Log density change of the flip `η → -η`.
    fn flip_log_ratio(&self) -> f64 {
        let p = self.params.power;
        let d_power = if p % 2 == 1 { -2.0 * self.power } else { 0.0 };
        -2.0 * self.an * self.kappa * self.source
            - self.params.coupling * self.an * self.kappa.powi(p as i32) * d_power
    }

    fn flip(&mut self) {
        self.eta.iter_mut().for_each(|x| *x = -*x);
        self.source = -self.source;
        if self.params.power % 2 == 1 {
            self.power = -self.power;
        }
    }
}

struct RotationUndo {
    i: usize,
    j: usize,
    ei: f64,
    ej: f64,
    d_grad: f64,
    d_power: f64,
    d_source: f64,
}

#[derive(Default, Clone, Copy)]
struct Counter {
    tried: u64,
    accepted: u64,
}

impl Counter {
    fn rate(&self) -> f64 {
        if self.tried == 0 {
            0.0
        } else {
            self.accepted as f64 / self.tried as f64
        }
    }
}

fn accept(rng: &mut StreamRng, log_ratio: f64) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

struct Sampled {
    columns: Vec<Vec<f64>>,
    acceptance: Acceptance,
    kappa_step: f64,
    eta_step: f64,
}

/// Runs one chain and calls `record` on every kept configuration, which
/// writes one value per column.
fn simulate<F>(
    geom: &LatticeGeometry,
    params: &ConventionalParams,
    h: &SourceField,
    measure: Measure,
    cfg: &ChainConfig,
    n_columns: usize,
    mut record: F,
) -> Result<Sampled>
where
    F: FnMut(&ChainState<'_>, &mut [f64]) -> Result<()>,
{
    cfg.validate()?;
    check_normalizable(params)?;
    geom.check_len(h.len())?;
    let sites = geom.sites();
    let mut rng = stream(cfg.seed);

    let mut eta = vec![0.0; sites];
    fill_uniform_direction(&mut eta, &mut rng);
    let mut state = ChainState::new(geom, *params, h, measure, 1.0, eta);
    if measure == Measure::Conventional {
        if let Ok(k) = saddle_kappa(geom, params, state.grad, state.power) {
            state.kappa = k;
        }
    }

    let mut kappa_step = cfg.kappa_step;
    let mut eta_step = cfg.eta_step.min(std::f64::consts::PI);
    let samples = cfg.samples();
    let mut columns = vec![Vec::with_capacity(samples); n_columns];
    let mut row = vec![0.0; n_columns];
    let mut radial = Counter::default();
    let mut angular = Counter::default();

    for sweep in 0..cfg.steps {
        let burning = sweep < cfg.burn_in;
        let mut sweep_radial = Counter::default();
        let mut sweep_angular = Counter::default();

        for _ in 0..sites {
            sweep_angular.tried += 1;
            if sites == 1 {
                if accept(&mut rng, state.flip_log_ratio()) {
                    state.flip();
                    sweep_angular.accepted += 1;
                }
                continue;
            }
            let i = rng.random_range(0..sites);
            let mut j = rng.random_range(0..sites - 1);
            if j >= i {
                j += 1;
            }
            let theta = eta_step * (2.0 * rng.random::<f64>() - 1.0);
            let (d_log, undo) = state.rotate(i, j, theta);
            if accept(&mut rng, d_log) {
                sweep_angular.accepted += 1;
            } else {
                state.undo(undo);
            }
        }

        for _ in 0..RADIAL_MOVES_PER_SWEEP {
            sweep_radial.tried += 1;
            let z: f64 = rng.sample(StandardNormal);
            let proposal = state.kappa * (kappa_step * z).exp();
            if !(proposal > 0.0 && proposal.is_finite()) {
                continue;
            }
            let lr = state.radial_log_ratio(proposal);
            if lr.is_nan() {
                return Err(Error::NonFinite(format!(
                    "radial log ratio at kappa = {proposal}"
                )));
            }
            if accept(&mut rng, lr) {
                state.kappa = proposal;
                sweep_radial.accepted += 1;
            }
        }

        state.refresh();

        if burning {
            // Multiplicative Robbins–Monro on the log step with a decaying gain.
            let gain = 1.0 / (1.0 + sweep as f64 / 50.0).sqrt();
            kappa_step *= (gain * (sweep_radial.rate() - TARGET_ACCEPTANCE)).exp();
            kappa_step = kappa_step.clamp(1e-6, 5.0);
            if sites > 1 {
                eta_step *= (gain * (sweep_angular.rate() - TARGET_ACCEPTANCE)).exp();
                eta_step = eta_step.clamp(1e-6, std::f64::consts::PI);
            }
            continue;
        }
        radial.tried += sweep_radial.tried;
        radial.accepted += sweep_radial.accepted;
        angular.tried += sweep_angular.tried;
        angular.accepted += sweep_angular.accepted;

        if (sweep - cfg.burn_in + 1) % cfg.thinning == 0 && columns.first().map_or(true, |c| c.len() < samples) {
            record(&state, &mut row)?;
            for (col, &v) in columns.iter_mut().zip(&row) {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("observable value {v}")));
                }
                col.push(v);
            }
        }
    }

    let acceptance = Acceptance {
        radial: radial.rate(),
        angular: angular.rate(),
    };
    for (name, rate) in [("radial", acceptance.radial), ("angular", acceptance.angular)] {
        // full-circle rotations accepted almost always: the direction is
        // nearly uniform, nothing left to tune
        let saturated = name == "angular" && (sites == 1 || (rate > 0.99 && eta_step >= std::f64::consts::PI));
        if !(0.01..=0.99).contains(&rate) && !saturated {
            log::warn!("{name} acceptance rate {rate:.3} outside (0.01, 0.99); consider retuning");
        }
    }
    Ok(Sampled {
        columns,
        acceptance,
        kappa_step,
        eta_step,
    })
}

fn trace_header(geom: &LatticeGeometry, measure: Measure) -> TraceHeader {
    TraceHeader {
        dim: geom.dim() as u32,
        half_extent: geom.half_extent() as u32,
        spacing: geom.spacing(),
        sites: geom.sites() as u64,
        measure,
    }
}

/// Samples the measure and returns a binned estimate per observable.
pub fn run_chain(
    geom: &LatticeGeometry,
    params: &ConventionalParams,
    h: &SourceField,
    measure: Measure,
    cfg: &ChainConfig,
    observables: &[Observable],
) -> Result<ChainResult> {
    if observables.is_empty() {
        return Err(Error::InvalidParameter("no observables requested".into()));
    }
    let an = geom.spacing().powi(geom.dim() as i32);
    let sampled = simulate(geom, params, h, measure, cfg, observables.len(), |s, row| {
        for (slot, obs) in row.iter_mut().zip(observables) {
            *slot = obs.evaluate(s, an);
        }
        Ok(())
    })?;
    let estimates = observables
        .iter()
        .zip(&sampled.columns)
        .map(|(o, c)| (*o, binned_estimate(c)))
        .collect();
    Ok(ChainResult {
        estimates,
        acceptance: sampled.acceptance,
        kappa_step: sampled.kappa_step,
        eta_step: sampled.eta_step,
        trace: Trace {
            header: trace_header(geom, measure),
            names: observables.iter().map(|o| o.to_string()).collect(),
            columns: sampled.columns,
        },
    })
}

/// Independent chains seeded `derive_seed(cfg.seed, c)` for `c = 0..chains`,
/// run in parallel and merged in chain order.
pub fn run_chains(
    geom: &LatticeGeometry,
    params: &ConventionalParams,
    h: &SourceField,
    measure: Measure,
    cfg: &ChainConfig,
    observables: &[Observable],
    chains: usize,
) -> Result<MultiChainResult> {
    if chains == 0 {
        return Err(Error::InvalidParameter("need at least one chain".into()));
    }
    let results: Vec<ChainResult> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let cfg = cfg.with_seed(derive_seed(cfg.seed, c as u64));
            run_chain(geom, params, h, measure, &cfg, observables)
        })
        .collect::<Result<_>>()?;
    let combined = observables
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let ests: Vec<Estimate> = results.iter().map(|r| r.estimates[k].1).collect();
            (*o, combine_equal(&ests).expect("at least one chain"))
        })
        .collect();
    Ok(MultiChainResult {
        combined,
        chains: results,
    })
}

/// Estimates `S(h)/S(0) = ⟨exp(κ Σ h_k η_k aⁿ)⟩` on the source-free chain.
///
/// The source-free measure is invariant under `η → -η`, so the estimator
/// averages `cosh` of the exponent; `S(h) = S(-h)` then holds sample by
/// sample.
pub fn generating_functional_ratio(
    geom: &LatticeGeometry,
    params: &ConventionalParams,
    h: &SourceField,
    measure: Measure,
    cfg: &ChainConfig,
) -> Result<Estimate> {
    geom.check_len(h.len())?;
    if h.is_zero() {
        return Ok(Estimate::exact(1.0));
    }
    let an = geom.spacing().powi(geom.dim() as i32);
    let zero = SourceField::zeros(geom.sites());
    let hv = h.values();
    let sampled = simulate(geom, params, &zero, measure, cfg, 1, |s, row| {
        let x = s.kappa * an * hv.iter().zip(&s.eta).map(|(h, e)| h * e).sum::<f64>();
        if x.abs() > MAX_REWEIGHT_EXPONENT {
            return Err(Error::ReweightOverflow(x));
        }
        row[0] = x.cosh();
        Ok(())
    })?;
    Ok(binned_estimate(&sampled.columns[0]))
}

/// Bare insertion strength: conventional strengths are bare already;
/// modified ones are physical and pass through the multiplicative maps.
pub fn insertion_bare_strength(
    kind: InsertionKind,
    strength: f64,
    measure: Measure,
    geom: &LatticeGeometry,
    power: u32,
) -> f64 {
    match measure {
        Measure::Conventional => strength,
        Measure::Modified => {
            let n = geom.sites() as f64;
            match kind {
                InsertionKind::Mass => strength / n,
                InsertionKind::Power => {
                    let e = (0.5 * power as f64 - 1.0) * geom.dim() as f64;
                    strength / n * geom.spacing().powf(e)
                }
            }
        }
    }
}

/// Value of the first-order insertion `x` at a configuration:
/// `½ Δm₀² κ² aⁿ` or `g₀ κ^p Σ η^p aⁿ`.
pub fn insertion_value(
    geom: &LatticeGeometry,
    kind: InsertionKind,
    power: u32,
    bare_strength: f64,
    kappa: f64,
    eta: &[f64],
) -> f64 {
    let an = geom.spacing().powi(geom.dim() as i32);
    match kind {
        InsertionKind::Mass => 0.5 * bare_strength * kappa * kappa * an,
        InsertionKind::Power => {
            let s: f64 = eta.iter().map(|e| e.powi(power as i32)).sum();
            bare_strength * kappa.powi(power as i32) * s * an
        }
    }
}

/// Order-`k` magnitude `⟨x^k⟩/k!` of an insertion relative to the
/// unperturbed integral (normalised to one).
#[allow(clippy::too_many_arguments)]
pub fn perturbation_magnitude(
    geom: &LatticeGeometry,
    params: &ConventionalParams,
    measure: Measure,
    kind: InsertionKind,
    strength: f64,
    order: u32,
    cfg: &ChainConfig,
) -> Result<Estimate> {
    let obs = Observable::insertion(kind, order)?;
    let bare = insertion_bare_strength(kind, strength, measure, geom, params.power);
    let r = run_chain(geom, params, &SourceField::zeros(geom.sites()), measure, cfg, &[obs])?;
    Ok(r.estimates[0].1.scaled(bare.powi(order as i32)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{log_density, renormalize_modified, ModifiedParams};
    use crate::hypersphere::HypersphericalState;
    use crate::lattice::build_lattice;

    fn short(seed: u64) -> ChainConfig {
        ChainConfig {
            steps: 3000,
            burn_in: 500,
            seed,
            ..ChainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig { steps: 10, burn_in: 10, ..short(0) }.validate().is_err());
        assert!(ChainConfig { thinning: 0, ..short(0) }.validate().is_err());
        assert!(ChainConfig { eta_step: 0.0, ..short(0) }.validate().is_err());
        assert_eq!(ChainConfig { thinning: 3, ..short(0) }.samples(), 833);
    }

    #[test]
    fn normalizability() {
        assert!(check_normalizable(&ConventionalParams::free(1.0)).is_ok());
        assert!(check_normalizable(&ConventionalParams::free(0.0)).is_err());
        assert!(check_normalizable(&ConventionalParams::new(1.0, -1.0, 0.5, 4).unwrap()).is_ok());
        assert!(check_normalizable(&ConventionalParams::new(1.0, 1.0, 0.5, 3).unwrap()).is_err());
    }

    fn state_for<'a>(
        g: &'a LatticeGeometry,
        p: ConventionalParams,
        h: &'a SourceField,
        m: Measure,
        seed: u64,
    ) -> ChainState<'a> {
        let mut rng = stream(seed);
        let mut eta = vec![0.0; g.sites()];
        fill_uniform_direction(&mut eta, &mut rng);
        ChainState::new(g, p, h, m, 1.7, eta)
    }

    fn full_log(g: &LatticeGeometry, p: &ConventionalParams, h: &SourceField, m: Measure, s: &ChainState) -> f64 {
        let st = HypersphericalState::new(s.kappa, s.eta.clone()).unwrap();
        log_density(m, g, &st, p, h).unwrap()
    }

    #[test]
    fn incremental_rotation_matches_full_density() {
        let g = build_lattice(2, 1, 0.8).unwrap();
        let p = ConventionalParams::new(1.2, 0.7, 0.3, 4).unwrap();
        let h = SourceField::new((0..9).map(|k| 0.1 * k as f64 - 0.3).collect()).unwrap();
        for m in [Measure::Conventional, Measure::Modified] {
            let mut s = state_for(&g, p, &h, m, 11);
            let mut rng = stream(5);
            for _ in 0..200 {
                let i = rng.random_range(0..9);
                let j = (i + 1 + rng.random_range(0..8)) % 9;
                let before = full_log(&g, &p, &h, m, &s);
                let (d, _) = s.rotate(i, j, rng.random_range(-1.0..1.0));
                let after = full_log(&g, &p, &h, m, &s);
                assert!((after - before - d).abs() < 1e-10, "{d} vs {}", after - before);
                assert!((s.eta.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
            }
            let cached = (s.grad, s.power, s.source);
            s.refresh();
            assert!((cached.0 - s.grad).abs() < 1e-10);
            assert!((cached.1 - s.power).abs() < 1e-10);
            assert!((cached.2 - s.source).abs() < 1e-10);
        }
    }

    #[test]
    fn undo_restores_state() {
        let g = build_lattice(1, 1, 1.0).unwrap();
        let h = SourceField::zeros(3);
        let mut s = state_for(&g, ConventionalParams::free(1.0), &h, Measure::Conventional, 3);
        let (eta, grad) = (s.eta.clone(), s.grad);
        let (_, u) = s.rotate(0, 2, 0.4);
        s.undo(u);
        assert_eq!(s.eta, eta);
        assert!((s.grad - grad).abs() < 1e-15);
    }

    #[test]
    fn detailed_balance_identity() {
        // π(x) q(y|x) α(x→y) = π(y) q(x|y) α(y→x) in log space
        let g = build_lattice(1, 1, 1.0).unwrap();
        let p = ConventionalParams::new(1.0, 0.5, 0.2, 4).unwrap();
        let h = SourceField::uniform(3, 0.3).unwrap();
        for m in [Measure::Conventional, Measure::Modified] {
            let mut s = state_for(&g, p, &h, m, 9);
            for &(k0, k1) in &[(0.5, 2.0), (3.0, 1.1), (1.0, 1.0)] {
                s.kappa = k0;
                let fwd = s.radial_log_ratio(k1);
                s.kappa = k1;
                let back = s.radial_log_ratio(k0);
                assert!((fwd + back).abs() < 1e-12);
                // against the full density plus log-normal proposal density
                s.kappa = k0;
                let lx = full_log(&g, &p, &h, m, &s);
                s.kappa = k1;
                let ly = full_log(&g, &p, &h, m, &s);
                let q = |from: f64, to: f64| -(to.ln() - from.ln()).powi(2) / 2.0 - to.ln();
                assert!((fwd - (ly + q(k1, k0) - lx - q(k0, k1))).abs() < 1e-10);
            }
            let before = full_log(&g, &p, &h, m, &s);
            let (d, u) = s.rotate(1, 2, 0.3);
            let (d_back, _) = s.rotate(1, 2, -0.3);
            assert!((d + d_back).abs() < 1e-12);
            let _ = u;
            assert!((full_log(&g, &p, &h, m, &s) - before).abs() < 1e-12);
        }
    }

    #[test]
    fn reproducible_bit_for_bit() {
        let g = build_lattice(2, 1, 1.0).unwrap();
        let p = ConventionalParams::free(1.0);
        let h = SourceField::zeros(9);
        let obs = [Observable::Kappa, Observable::MassInsertion(2)];
        let a = run_chain(&g, &p, &h, Measure::Conventional, &short(42), &obs).unwrap();
        let b = run_chain(&g, &p, &h, Measure::Conventional, &short(42), &obs).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&g, &p, &h, Measure::Conventional, &short(43), &obs).unwrap();
        assert_ne!(a.estimates, c.estimates);
    }

    #[test]
    fn sphere_preserved_over_long_run() {
        let g = build_lattice(1, 2, 1.0).unwrap();
        let h = SourceField::zeros(5);
        let mut s = state_for(&g, ConventionalParams::free(1.0), &h, Measure::Modified, 1);
        let mut rng = stream(2);
        for _ in 0..200_000 {
            let i = rng.random_range(0..5);
            let j = (i + 1 + rng.random_range(0..4)) % 5;
            s.rotate(i, j, rng.random_range(-3.0..3.0));
        }
        let norm: f64 = s.eta.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-9, "{norm}");
    }

    #[test]
    fn single_site_chain_flips() {
        let g = build_lattice(1, 0, 1.0).unwrap();
        let p = ConventionalParams::free(1.0);
        let r = run_chain(&g, &p, &SourceField::zeros(1), Measure::Modified, &short(1), &[Observable::KappaSq, Observable::EtaPowerSum]).unwrap();
        // modified measure at N = 1: half-normal with unit variance
        assert!(r.get(Observable::KappaSq).unwrap().deviation(1.0) < 4.0);
        assert_eq!(r.acceptance.angular, 1.0);
    }

    #[test]
    fn generating_functional_symmetry_and_normalization() {
        let g = build_lattice(1, 1, 1.0).unwrap();
        let p = renormalize_modified(&ModifiedParams::new(1.0, 0.0, 4).unwrap(), 3, 1.0, 1);
        let h = SourceField::new(vec![0.3, -0.1, 0.2]).unwrap();
        let cfg = short(7);
        let s0 = generating_functional_ratio(&g, &p, &SourceField::zeros(3), Measure::Modified, &cfg).unwrap();
        assert_eq!(s0.mean, 1.0);
        assert_eq!(s0.std_error, 0.0);
        let plus = generating_functional_ratio(&g, &p, &h, Measure::Modified, &cfg).unwrap();
        let minus = generating_functional_ratio(&g, &p, &h.negated(), Measure::Modified, &cfg).unwrap();
        assert_eq!(plus, minus);
        assert!(plus.mean > 1.0);
    }

    #[test]
    fn reweight_overflow_reported() {
        let g = build_lattice(1, 1, 1.0).unwrap();
        let p = ConventionalParams::free(1.0);
        let h = SourceField::uniform(3, 1e6).unwrap();
        assert!(matches!(
            generating_functional_ratio(&g, &p, &h, Measure::Conventional, &short(1)),
            Err(Error::ReweightOverflow(_))
        ));
    }

    #[test]
    fn insertion_vanishes_at_zero_radius() {
        let g = build_lattice(3, 1, 1.0).unwrap();
        let eta = vec![1.0 / (27f64).sqrt(); 27];
        for kind in [InsertionKind::Mass, InsertionKind::Power] {
            assert_eq!(insertion_value(&g, kind, 4, 2.0, 0.0, &eta), 0.0);
        }
        assert_eq!(insertion_value(&g, InsertionKind::Mass, 4, 2.0, 3.0, &eta), 9.0);
    }

    #[test]
    fn modified_strength_maps() {
        let g = build_lattice(3, 1, 0.5).unwrap();
        assert_eq!(insertion_bare_strength(InsertionKind::Mass, 2.0, Measure::Conventional, &g, 4), 2.0);
        assert!((insertion_bare_strength(InsertionKind::Mass, 2.7, Measure::Modified, &g, 4) - 0.1).abs() < 1e-15);
        // g N^{-1} a^{(p/2-1) n} = 27 / 27 * 0.5^3
        assert!((insertion_bare_strength(InsertionKind::Power, 27.0, Measure::Modified, &g, 4) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn parallel_chains_match_serial_seeds() {
        let g = build_lattice(1, 1, 1.0).unwrap();
        let p = ConventionalParams::free(1.0);
        let h = SourceField::zeros(3);
        let cfg = short(99);
        let multi = run_chains(&g, &p, &h, Measure::Conventional, &cfg, &[Observable::Kappa], 3).unwrap();
        for (c, r) in multi.chains.iter().enumerate() {
            let serial = run_chain(&g, &p, &h, Measure::Conventional, &cfg.with_seed(derive_seed(99, c as u64)), &[Observable::Kappa]).unwrap();
            assert_eq!(&serial, r);
        }
    }
}
